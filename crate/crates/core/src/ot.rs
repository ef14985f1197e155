//! 1-out-of-2 oblivious transfer for wire labels, Bellare–Micali style:
//! two messages over a prime-order subgroup of Z_p^* (p a safe prime).
//!
//! The receiver publishes one public key per choice bit, constructed so
//! that it knows the discrete log of pk_choice but not of the complement
//! C / pk (C is a public element with unknown discrete log). The sender
//! ElGamal-wraps both labels; the receiver can derive the shared key only
//! for the chosen slot.

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::RngCore;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::garble::{WireLabel, LABEL_BYTES};

/// Group description: p = 2q + 1 safe prime, g generates the order-q
/// subgroup of quadratic residues, c is a subgroup element nobody knows
/// the discrete log of (derived by hashing into the group).
#[derive(Clone, Debug)]
pub struct OtParams {
    pub p: BigUint,
    pub q: BigUint,
    pub g: BigUint,
    pub c: BigUint,
    pub elem_bytes: usize,
}

const P_256_HEX: &str = "155eeefc34c614d66aa57d2359f1e88114cd9491cc638c4d3e8c6314a82342837";
const Q_256_HEX: &str = "aaf777e1a630a6b3552be91acf8f4408a66ca48e631c6269f46318a5411a141b";
const P_61_HEX: &str = "2fe76cfe60e5a467";
const Q_61_HEX: &str = "17f3b67f3072d233";

fn hex(s: &str) -> BigUint {
    BigUint::parse_bytes(s.as_bytes(), 16).expect("valid hex constant")
}

impl OtParams {
    fn from_group(p: BigUint, q: BigUint) -> Self {
        let g = BigUint::from(4u32);
        let elem_bytes = ((p.bits() + 7) / 8) as usize;
        // hash into the subgroup: square of a hashed value is a QR; the
        // discrete log of the result is unknown to everyone
        let mut h = Sha256::new();
        h.update(b"ot-base-point");
        h.update(p.to_bytes_be());
        let seed = BigUint::from_bytes_be(&h.finalize()) % &p;
        let c = seed.modpow(&BigUint::from(2u32), &p);
        assert!(!c.is_one(), "degenerate base point");
        OtParams {
            p,
            q,
            g,
            c,
            elem_bytes,
        }
    }

    /// 256-bit prime-order subgroup; the default for sessions.
    pub fn secure() -> Self {
        Self::from_group(hex(P_256_HEX), hex(Q_256_HEX))
    }

    /// ~2^61-order subgroup: fast for exhaustive tests, NOT secure.
    pub fn test_insecure() -> Self {
        Self::from_group(hex(P_61_HEX), hex(Q_61_HEX))
    }

    /// Strict membership used on received elements: in the subgroup and
    /// not the identity.
    pub fn validate(&self, x: &BigUint) -> Result<()> {
        if !x.is_zero()
            && *x < self.p
            && x.modpow(&self.q, &self.p).is_one()
            && !x.is_one()
        {
            Ok(())
        } else {
            Err(Error::ObliviousTransfer("malformed or mismatched transfer data".into()))
        }
    }

    pub fn encode_elem(&self, x: &BigUint) -> Vec<u8> {
        let mut bytes = x.to_bytes_be();
        let mut out = vec![0u8; self.elem_bytes - bytes.len()];
        out.append(&mut bytes);
        out
    }

    pub fn decode_elem(&self, bytes: &[u8]) -> Result<BigUint> {
        if bytes.len() != self.elem_bytes {
            return Err(Error::ObliviousTransfer("malformed or mismatched transfer data".into()));
        }
        Ok(BigUint::from_bytes_be(bytes))
    }

    fn random_scalar(&self, rng: &mut dyn RngCore) -> BigUint {
        // uniform in [1, q)
        loop {
            let k = rng.gen_biguint_below(&self.q);
            if !k.is_zero() {
                return k;
            }
        }
    }

    fn inverse(&self, x: &BigUint) -> BigUint {
        // subgroup has prime order q: x^{-1} = x^{q-1}
        x.modpow(&(&self.q - 1u32), &self.p)
    }
}

/// One group element per choice bit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OtRequest {
    pub elements: Vec<BigUint>,
}

/// Per choice bit, two wrapped payloads (slot 0 and slot 1); each slot is
/// an ephemeral element, a 16-byte ciphertext, and a 16-byte tag.
#[derive(Clone, Debug)]
pub struct OtResponse {
    pub slots: Vec<[OtSlot; 2]>,
}

#[derive(Clone, Debug)]
pub struct OtSlot {
    pub e: BigUint,
    pub ct: [u8; LABEL_BYTES],
    pub tag: [u8; 16],
}

/// Single-use secret side of a request.
pub struct ReceiverState {
    choices: Vec<bool>,
    scalars: Vec<BigUint>,
}

fn wrap_key(params: &OtParams, e: &BigUint, k: &BigUint, index: u32, slot: u8) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"ot-wrap");
    h.update(index.to_le_bytes());
    h.update([slot]);
    h.update(params.encode_elem(e));
    h.update(params.encode_elem(k));
    h.finalize().into()
}

fn wrap_tag(key: &[u8; 32], ct: &[u8; LABEL_BYTES]) -> [u8; 16] {
    let mut h = Sha256::new();
    h.update(b"ot-tag");
    h.update(key);
    h.update(ct);
    let digest = h.finalize();
    let mut tag = [0u8; 16];
    tag.copy_from_slice(&digest[..16]);
    tag
}

pub fn ot_receive_phase1(
    params: &OtParams,
    choices: &[bool],
    rng: &mut dyn RngCore,
) -> (OtRequest, ReceiverState) {
    let mut elements = Vec::with_capacity(choices.len());
    let mut scalars = Vec::with_capacity(choices.len());
    for &choice in choices {
        let k = params.random_scalar(rng);
        let gk = params.g.modpow(&k, &params.p);
        // pk_choice = g^k; the complement pk is C / g^k, so the receiver
        // cannot know both discrete logs
        let pk0 = if choice {
            (&params.c * params.inverse(&gk)) % &params.p
        } else {
            gk
        };
        elements.push(pk0);
        scalars.push(k);
    }
    (
        OtRequest { elements },
        ReceiverState {
            choices: choices.to_vec(),
            scalars,
        },
    )
}

pub fn ot_send(
    params: &OtParams,
    request: &OtRequest,
    pairs: &[(WireLabel, WireLabel)],
    rng: &mut dyn RngCore,
) -> Result<OtResponse> {
    if request.elements.len() != pairs.len() {
        return Err(Error::ObliviousTransfer("malformed or mismatched transfer data".into()));
    }
    let mut slots = Vec::with_capacity(pairs.len());
    for (i, (pk0, pair)) in request.elements.iter().zip(pairs).enumerate() {
        params.validate(pk0)?;
        let pk1 = (&params.c * params.inverse(pk0)) % &params.p;
        let messages = [&pair.0, &pair.1];
        let mut wrapped = Vec::with_capacity(2);
        for (slot_idx, pk) in [pk0, &pk1].into_iter().enumerate() {
            let r = params.random_scalar(rng);
            let e = params.g.modpow(&r, &params.p);
            let shared = pk.modpow(&r, &params.p);
            let key = wrap_key(params, &e, &shared, i as u32, slot_idx as u8);
            let mut ct = messages[slot_idx].0;
            for (c, k) in ct.iter_mut().zip(&key[..LABEL_BYTES]) {
                *c ^= k;
            }
            let tag = wrap_tag(&key, &ct);
            wrapped.push(OtSlot { e, ct, tag });
        }
        let [w0, w1]: [OtSlot; 2] = wrapped.try_into().expect("two slots");
        slots.push([w0, w1]);
    }
    Ok(OtResponse { slots })
}

pub fn ot_receive_phase2(
    params: &OtParams,
    response: &OtResponse,
    state: ReceiverState,
) -> Result<Vec<WireLabel>> {
    if response.slots.len() != state.choices.len() {
        return Err(Error::ObliviousTransfer("malformed or mismatched transfer data".into()));
    }
    let mut labels = Vec::with_capacity(state.choices.len());
    for (i, ((slot_pair, &choice), k)) in response
        .slots
        .iter()
        .zip(&state.choices)
        .zip(&state.scalars)
        .enumerate()
    {
        let slot = &slot_pair[choice as usize];
        params.validate(&slot.e)?;
        let shared = slot.e.modpow(k, &params.p);
        let key = wrap_key(params, &slot.e, &shared, i as u32, choice as u8);
        if wrap_tag(&key, &slot.ct) != slot.tag {
            return Err(Error::ObliviousTransfer(format!(
                "integrity check failed for choice bit {i}"
            )));
        }
        let mut m = slot.ct;
        for (c, kk) in m.iter_mut().zip(&key[..LABEL_BYTES]) {
            *c ^= kk;
        }
        labels.push(WireLabel(m));
    }
    Ok(labels)
}

impl OtRequest {
    pub fn to_bytes(&self, params: &OtParams) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + self.elements.len() * params.elem_bytes);
        out.extend_from_slice(&(self.elements.len() as u32).to_le_bytes());
        for e in &self.elements {
            out.extend_from_slice(&params.encode_elem(e));
        }
        out
    }

    pub fn from_bytes(params: &OtParams, bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::ObliviousTransfer("malformed or mismatched transfer data".into()));
        }
        let count = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
        let body = &bytes[4..];
        if body.len() != count * params.elem_bytes {
            return Err(Error::ObliviousTransfer("malformed or mismatched transfer data".into()));
        }
        let elements = body
            .chunks_exact(params.elem_bytes)
            .map(|c| params.decode_elem(c))
            .collect::<Result<_>>()?;
        Ok(OtRequest { elements })
    }
}

impl OtResponse {
    pub fn to_bytes(&self, params: &OtParams) -> Vec<u8> {
        let slot_bytes = params.elem_bytes + LABEL_BYTES + 16;
        let mut out = Vec::with_capacity(4 + self.slots.len() * 2 * slot_bytes);
        out.extend_from_slice(&(self.slots.len() as u32).to_le_bytes());
        for pair in &self.slots {
            for slot in pair {
                out.extend_from_slice(&params.encode_elem(&slot.e));
                out.extend_from_slice(&slot.ct);
                out.extend_from_slice(&slot.tag);
            }
        }
        out
    }

    pub fn from_bytes(params: &OtParams, bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::ObliviousTransfer("malformed or mismatched transfer data".into()));
        }
        let count = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
        let slot_bytes = params.elem_bytes + LABEL_BYTES + 16;
        let body = &bytes[4..];
        if body.len() != count * 2 * slot_bytes {
            return Err(Error::ObliviousTransfer("malformed or mismatched transfer data".into()));
        }
        let mut chunks = body.chunks_exact(slot_bytes);
        let mut slots = Vec::with_capacity(count);
        for _ in 0..count {
            let mut pair = Vec::with_capacity(2);
            for _ in 0..2 {
                let chunk = chunks.next().expect("length checked");
                let e = params.decode_elem(&chunk[..params.elem_bytes])?;
                let mut ct = [0u8; LABEL_BYTES];
                ct.copy_from_slice(&chunk[params.elem_bytes..params.elem_bytes + LABEL_BYTES]);
                let mut tag = [0u8; 16];
                tag.copy_from_slice(&chunk[params.elem_bytes + LABEL_BYTES..]);
                pair.push(OtSlot { e, ct, tag });
            }
            let [w0, w1]: [OtSlot; 2] = pair.try_into().expect("two slots");
            slots.push([w0, w1]);
        }
        Ok(OtResponse { slots })
    }
}
