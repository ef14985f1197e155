//! Yao garbling of circuits: 128-bit wire labels, free XOR/NOT, point-and-
//! permute row ordering, SHA-256-based row encryption, and output decoding
//! for the reveal-to-evaluator variant.
//!
//! Only AND gates produce ciphertexts: 4 rows of 16 bytes each, addressed
//! directly by the select bits of the two active input labels.

use rand::RngCore;
use sha2::{Digest, Sha256};

use crate::circuit::{Circuit, GateKind, export_netlist};
use crate::error::{Error, Result};

pub const LABEL_BYTES: usize = 16;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub struct WireLabel(pub [u8; LABEL_BYTES]);

impl WireLabel {
    pub fn random(rng: &mut dyn RngCore) -> Self {
        let mut bytes = [0u8; LABEL_BYTES];
        rng.fill_bytes(&mut bytes);
        WireLabel(bytes)
    }

    pub fn xor(&self, other: &WireLabel) -> WireLabel {
        let mut out = [0u8; LABEL_BYTES];
        for i in 0..LABEL_BYTES {
            out[i] = self.0[i] ^ other.0[i];
        }
        WireLabel(out)
    }

    /// The point-and-permute select bit: LSB of the last byte.
    pub fn select_bit(&self) -> bool {
        self.0[LABEL_BYTES - 1] & 1 == 1
    }
}

/// The free-XOR offset; label(1) = label(0) XOR offset on every wire. The
/// select bit is forced to 1 so paired labels always disagree in it.
#[derive(Clone, Copy, Debug)]
pub struct GlobalOffset(pub WireLabel);

impl GlobalOffset {
    pub fn random(rng: &mut dyn RngCore) -> Self {
        let mut label = WireLabel::random(rng);
        label.0[LABEL_BYTES - 1] |= 1;
        GlobalOffset(label)
    }
}

/// Both labels of every input wire, in circuit input order. The garbler
/// encodes its own bits directly; the evaluator-side pairs feed oblivious
/// transfer.
#[derive(Clone, Debug)]
pub struct InputEncoding {
    pub garbler: Vec<(WireLabel, WireLabel)>,
    pub evaluator: Vec<(WireLabel, WireLabel)>,
}

impl InputEncoding {
    pub fn encode_garbler(&self, bits: &[bool]) -> Result<Vec<WireLabel>> {
        if bits.len() != self.garbler.len() {
            return Err(Error::GarbleFormat("malformed or mismatched garbled data".into()));
        }
        Ok(bits
            .iter()
            .zip(&self.garbler)
            .map(|(&b, pair)| if b { pair.1 } else { pair.0 })
            .collect())
    }
}

/// Per output wire: the select bit of label(0), plus truncated hashes of
/// both labels so a corrupted evaluation is detected instead of silently
/// decoding to a wrong bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OutputDecode {
    pub perm0: bool,
    pub h0: [u8; 8],
    pub h1: [u8; 8],
}

pub type DecodeMap = Vec<OutputDecode>;

#[derive(Clone, Debug)]
pub struct GarbledCircuit {
    /// SHA-256 of the netlist text; ties tables to a topology.
    pub circuit_hash: [u8; 32],
    pub and_count: u32,
    pub l: u8,
    pub p: u16,
    /// one 4x16-byte table per AND gate, in gate order
    pub tables: Vec<[u8; 64]>,
    pub decode: DecodeMap,
}

pub fn circuit_hash(c: &Circuit) -> [u8; 32] {
    Sha256::digest(export_netlist(c).as_bytes()).into()
}

/// Row key: first 16 bytes of SHA-256(label_a || label_b || gate_id BE).
/// The gate id prevents key reuse across gates; a plain combination of the
/// labels would collide across rows under free XOR.
fn kdf(a: &WireLabel, b: &WireLabel, gate_id: u32) -> [u8; LABEL_BYTES] {
    let mut h = Sha256::new();
    h.update(a.0);
    h.update(b.0);
    h.update(gate_id.to_be_bytes());
    let digest = h.finalize();
    let mut key = [0u8; LABEL_BYTES];
    key.copy_from_slice(&digest[..LABEL_BYTES]);
    key
}

fn decode_hash(label: &WireLabel) -> [u8; 8] {
    let mut h = Sha256::new();
    h.update(b"decode");
    h.update(label.0);
    let digest = h.finalize();
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    out
}

/// Garbling knobs; `kdf_tweak` perturbs the key derivation and exists only
/// so the verification suite can inject a fault and watch the differential
/// test catch it.
#[derive(Clone, Copy, Default, Debug)]
pub struct GarbleOptions {
    pub kdf_tweak: u32,
}

pub fn garble(
    c: &Circuit,
    p: u16,
    rng: &mut dyn RngCore,
) -> (GarbledCircuit, InputEncoding) {
    garble_with_options(c, p, rng, GarbleOptions::default())
}

pub fn garble_with_options(
    c: &Circuit,
    p: u16,
    rng: &mut dyn RngCore,
    opts: GarbleOptions,
) -> (GarbledCircuit, InputEncoding) {
    let offset = GlobalOffset::random(rng);
    let mut zero: Vec<Option<WireLabel>> = vec![None; c.wire_count];
    for (w, _) in c.garbler_inputs.iter().chain(&c.evaluator_inputs) {
        zero[*w] = Some(WireLabel::random(rng));
    }

    let mut tables = Vec::with_capacity(c.gates.len());
    for (gate_idx, g) in c.gates.iter().enumerate() {
        let la0 = zero[g.a].expect("topological order");
        match g.kind {
            GateKind::Xor => {
                let lb0 = zero[g.b.unwrap()].expect("topological order");
                zero[g.out] = Some(la0.xor(&lb0));
            }
            GateKind::Not => {
                // swap label semantics: the active label passes through
                // unchanged on the evaluator side
                zero[g.out] = Some(la0.xor(&offset.0));
            }
            GateKind::And => {
                let lb0 = zero[g.b.unwrap()].expect("topological order");
                let lo0 = WireLabel::random(rng);
                zero[g.out] = Some(lo0);
                let gid = (gate_idx as u32) ^ opts.kdf_tweak;
                let mut table = [0u8; 64];
                for va in 0..2u8 {
                    for vb in 0..2u8 {
                        let la = if va == 1 { la0.xor(&offset.0) } else { la0 };
                        let lb = if vb == 1 { lb0.xor(&offset.0) } else { lb0 };
                        let out = if va & vb == 1 { lo0.xor(&offset.0) } else { lo0 };
                        let ct = out.xor(&WireLabel(kdf(&la, &lb, gid)));
                        let row = (la.select_bit() as usize) * 2 + lb.select_bit() as usize;
                        table[row * 16..row * 16 + 16].copy_from_slice(&ct.0);
                    }
                }
                tables.push(table);
            }
        }
    }

    let decode = c
        .outputs
        .iter()
        .map(|&w| {
            let l0 = zero[w].expect("topological order");
            let l1 = l0.xor(&offset.0);
            OutputDecode {
                perm0: l0.select_bit(),
                h0: decode_hash(&l0),
                h1: decode_hash(&l1),
            }
        })
        .collect();

    let pair = |w: usize| -> (WireLabel, WireLabel) {
        let l0 = zero[w].expect("input");
        (l0, l0.xor(&offset.0))
    };
    let encoding = InputEncoding {
        garbler: c.garbler_inputs.iter().map(|(w, _)| pair(*w)).collect(),
        evaluator: c.evaluator_inputs.iter().map(|(w, _)| pair(*w)).collect(),
    };

    let garbled = GarbledCircuit {
        circuit_hash: circuit_hash(c),
        and_count: tables.len() as u32,
        l: c.outputs.len() as u8,
        p,
        tables,
        decode,
    };
    (garbled, encoding)
}

/// Evaluates with one active label per input wire; the topology comes from
/// the (public) circuit, whose hash must match the garbled header.
pub fn evaluate_garbled(
    g: &GarbledCircuit,
    c: &Circuit,
    garbler_labels: &[WireLabel],
    evaluator_labels: &[WireLabel],
) -> Result<Vec<WireLabel>> {
    if g.circuit_hash != circuit_hash(c) {
        return Err(Error::GarbleFormat("malformed or mismatched garbled data".into()));
    }
    if garbler_labels.len() != c.garbler_inputs.len()
        || evaluator_labels.len() != c.evaluator_inputs.len()
    {
        return Err(Error::GarbleFormat("malformed or mismatched garbled data".into()));
    }
    let mut active: Vec<Option<WireLabel>> = vec![None; c.wire_count];
    for ((w, _), &l) in c.garbler_inputs.iter().zip(garbler_labels) {
        active[*w] = Some(l);
    }
    for ((w, _), &l) in c.evaluator_inputs.iter().zip(evaluator_labels) {
        active[*w] = Some(l);
    }
    let mut table_idx = 0usize;
    for (gate_idx, gate) in c.gates.iter().enumerate() {
        let la = active[gate.a].ok_or(Error::UnassignedWire(gate.a))?;
        let out = match gate.kind {
            GateKind::Xor => {
                let lb = active[gate.b.unwrap()].ok_or(Error::UnassignedWire(gate.b.unwrap()))?;
                la.xor(&lb)
            }
            GateKind::Not => la,
            GateKind::And => {
                let lb = active[gate.b.unwrap()].ok_or(Error::UnassignedWire(gate.b.unwrap()))?;
                let table = g.tables.get(table_idx).ok_or_else(|| Error::GarbleFormat("missing AND table".into()))?;
                table_idx += 1;
                let row = (la.select_bit() as usize) * 2 + lb.select_bit() as usize;
                let mut ct = [0u8; LABEL_BYTES];
                ct.copy_from_slice(&table[row * 16..row * 16 + 16]);
                WireLabel(ct).xor(&WireLabel(kdf(&la, &lb, gate_idx as u32)))
            }
        };
        active[gate.out] = Some(out);
    }
    let labels: Vec<WireLabel> = c
        .outputs
        .iter()
        .map(|&w| active[w].ok_or(Error::UnassignedWire(w)))
        .collect::<Result<_>>()?;
    // integrity: every output label must hash to one of the two candidates
    for (label, dec) in labels.iter().zip(&g.decode) {
        let h = decode_hash(label);
        if h != dec.h0 && h != dec.h1 {
            return Err(Error::GarbleEvaluation("output label failed integrity check".into()));
        }
    }
    Ok(labels)
}

/// bit = select(active) XOR select(label(0)); the hash check rejects
/// labels that belong to neither truth value.
pub fn decode_outputs(labels: &[WireLabel], decode: &DecodeMap) -> Result<Vec<bool>> {
    if labels.len() != decode.len() {
        return Err(Error::GarbleFormat("malformed or mismatched garbled data".into()));
    }
    labels
        .iter()
        .zip(decode)
        .map(|(label, dec)| {
            let h = decode_hash(label);
            let bit = label.select_bit() ^ dec.perm0;
            let expect = if bit { dec.h1 } else { dec.h0 };
            if h != expect {
                return Err(Error::GarbleEvaluation("output label failed integrity check".into()));
            }
            Ok(bit)
        })
        .collect()
}

pub const HEADER_BYTES: usize = 32 + 4 + 2 + 2;

impl GarbledCircuit {
    /// header {circuit hash, AND count le32, l le16, p le16}, then 64-byte
    /// tables in gate order, then 17 bytes per output wire.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out =
            Vec::with_capacity(HEADER_BYTES + 64 * self.tables.len() + 17 * self.decode.len());
        out.extend_from_slice(&self.circuit_hash);
        out.extend_from_slice(&self.and_count.to_le_bytes());
        out.extend_from_slice(&(self.l as u16).to_le_bytes());
        out.extend_from_slice(&self.p.to_le_bytes());
        for t in &self.tables {
            out.extend_from_slice(t);
        }
        for d in &self.decode {
            out.push(d.perm0 as u8);
            out.extend_from_slice(&d.h0);
            out.extend_from_slice(&d.h1);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_BYTES {
            return Err(Error::GarbleFormat("malformed or mismatched garbled data".into()));
        }
        let mut circuit_hash = [0u8; 32];
        circuit_hash.copy_from_slice(&bytes[..32]);
        let and_count = u32::from_le_bytes(bytes[32..36].try_into().unwrap());
        let l16 = u16::from_le_bytes(bytes[36..38].try_into().unwrap());
        let p = u16::from_le_bytes(bytes[38..40].try_into().unwrap());
        if l16 == 0 || l16 > 64 {
            return Err(Error::GarbleFormat("malformed or mismatched garbled data".into()));
        }
        let l = l16 as u8;
        let tables_end = HEADER_BYTES + 64 * and_count as usize;
        let total = tables_end + 17 * l as usize;
        if bytes.len() != total {
            return Err(Error::GarbleFormat("malformed or mismatched garbled data".into()));
        }
        let tables = bytes[HEADER_BYTES..tables_end]
            .chunks_exact(64)
            .map(|chunk| {
                let mut t = [0u8; 64];
                t.copy_from_slice(chunk);
                t
            })
            .collect();
        let decode = bytes[tables_end..]
            .chunks_exact(17)
            .map(|chunk| {
                let mut h0 = [0u8; 8];
                let mut h1 = [0u8; 8];
                h0.copy_from_slice(&chunk[1..9]);
                h1.copy_from_slice(&chunk[9..17]);
                Ok(OutputDecode {
                    perm0: match chunk[0] {
                        0 => false,
                        1 => true,
                        _ => return Err(Error::GarbleFormat("malformed or mismatched garbled data".into())),
                    },
                    h0,
                    h1,
                })
            })
            .collect::<Result<_>>()?;
        Ok(GarbledCircuit {
            circuit_hash,
            and_count,
            l,
            p,
            tables,
            decode,
        })
    }

    /// Hash of the full garbled material; distinct per garbling session
    /// and used by the protocol transcripts to assert freshness.
    pub fn material_hash(&self) -> [u8; 32] {
        Sha256::digest(self.to_bytes()).into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{
        build_neuron_circuit, evaluate_plaintext, CircuitBuilder, CircuitMode, NeuronCircuitSpec,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    fn single_gate(kind: GateKind) -> Circuit {
        let mut b = CircuitBuilder::new();
        let x = b.garbler_input("x");
        let y = b.evaluator_input("y");
        let o = match kind {
            GateKind::And => b.and(x, y),
            GateKind::Xor => b.xor(x, y),
            GateKind::Not => unreachable!(),
        };
        b.finish(vec![o])
    }

    #[test]
    fn single_and_gate_truth_table() {
        let c = single_gate(GateKind::And);
        let (g, enc) = garble(&c, 1, &mut rng(1));
        assert_eq!(g.tables.len(), 1);
        for a in [false, true] {
            for bb in [false, true] {
                let gl = vec![if a { enc.garbler[0].1 } else { enc.garbler[0].0 }];
                let el = vec![if bb { enc.evaluator[0].1 } else { enc.evaluator[0].0 }];
                let out = evaluate_garbled(&g, &c, &gl, &el).unwrap();
                let bits = decode_outputs(&out, &g.decode).unwrap();
                assert_eq!(bits, vec![a && bb], "AND({a},{bb})");
            }
        }
    }

    #[test]
    fn single_xor_gate_has_empty_tables() {
        let c = single_gate(GateKind::Xor);
        let (g, enc) = garble(&c, 1, &mut rng(2));
        assert!(g.tables.is_empty());
        for a in [false, true] {
            for bb in [false, true] {
                let gl = vec![if a { enc.garbler[0].1 } else { enc.garbler[0].0 }];
                let el = vec![if bb { enc.evaluator[0].1 } else { enc.evaluator[0].0 }];
                let out = evaluate_garbled(&g, &c, &gl, &el).unwrap();
                assert_eq!(decode_outputs(&out, &g.decode).unwrap(), vec![a ^ bb]);
            }
        }
    }

    #[test]
    fn not_gates_are_free_and_correct() {
        let mut b = CircuitBuilder::new();
        let x = b.garbler_input("x");
        let o = b.not(x);
        let c = b.finish(vec![o]);
        let (g, enc) = garble(&c, 1, &mut rng(3));
        assert!(g.tables.is_empty());
        for bit in [false, true] {
            let gl = vec![if bit { enc.garbler[0].1 } else { enc.garbler[0].0 }];
            let out = evaluate_garbled(&g, &c, &gl, &[]).unwrap();
            assert_eq!(decode_outputs(&out, &g.decode).unwrap(), vec![!bit]);
        }
    }

    fn run_neuron(
        c: &Circuit,
        g: &GarbledCircuit,
        enc: &InputEncoding,
        gb: &[bool],
        eb: &[bool],
    ) -> Vec<bool> {
        let gl = enc.encode_garbler(gb).unwrap();
        let el: Vec<WireLabel> = eb
            .iter()
            .zip(&enc.evaluator)
            .map(|(&b, pair)| if b { pair.1 } else { pair.0 })
            .collect();
        let out = evaluate_garbled(g, c, &gl, &el).unwrap();
        decode_outputs(&out, &g.decode).unwrap()
    }

    #[test]
    fn neuron_p2_l3_differential_random() {
        use rand::Rng;
        let spec = NeuronCircuitSpec {
            p: 2,
            l: 3,
            mode: CircuitMode::SafeSign,
        };
        let c = build_neuron_circuit(&spec).unwrap();
        let (g, enc) = garble(&c, 2, &mut rng(4));
        let mut r = rng(5);
        for _ in 0..1000 {
            let gb: Vec<bool> = (0..c.garbler_inputs.len()).map(|_| r.gen()).collect();
            let eb: Vec<bool> = (0..c.evaluator_inputs.len()).map(|_| r.gen()).collect();
            let got = run_neuron(&c, &g, &enc, &gb, &eb);
            assert_eq!(got, evaluate_plaintext(&c, &gb, &eb).unwrap());
        }
    }

    #[test]
    fn neuron_p8_l16_differential_random() {
        use rand::Rng;
        let spec = NeuronCircuitSpec {
            p: 8,
            l: 16,
            mode: CircuitMode::PaperExact,
        };
        let c = build_neuron_circuit(&spec).unwrap();
        let (g, enc) = garble(&c, 8, &mut rng(6));
        assert_eq!(g.tables.len(), 480);
        let mut r = rng(7);
        for _ in 0..1000 {
            let gb: Vec<bool> = (0..c.garbler_inputs.len()).map(|_| r.gen()).collect();
            let eb: Vec<bool> = (0..c.evaluator_inputs.len()).map(|_| r.gen()).collect();
            let got = run_neuron(&c, &g, &enc, &gb, &eb);
            assert_eq!(got, evaluate_plaintext(&c, &gb, &eb).unwrap());
        }
    }

    #[test]
    fn corrupted_ciphertext_is_detected() {
        let spec = NeuronCircuitSpec {
            p: 2,
            l: 3,
            mode: CircuitMode::SafeSign,
        };
        let c = build_neuron_circuit(&spec).unwrap();
        let (mut g, enc) = garble(&c, 2, &mut rng(8));
        g.tables[0][5] ^= 0x40;
        let gb = vec![false; c.garbler_inputs.len()];
        let eb = vec![true; c.evaluator_inputs.len()];
        let gl = enc.encode_garbler(&gb).unwrap();
        let el: Vec<WireLabel> = eb
            .iter()
            .zip(&enc.evaluator)
            .map(|(&b, pair)| if b { pair.1 } else { pair.0 })
            .collect();
        assert!(matches!(
            evaluate_garbled(&g, &c, &gl, &el),
            Err(Error::GarbleEvaluation(_))
        ));
    }

    #[test]
    fn kdf_tweak_breaks_evaluation() {
        let c = single_gate(GateKind::And);
        let (g, enc) = garble_with_options(&c, 1, &mut rng(9), GarbleOptions { kdf_tweak: 1 });
        let gl = vec![enc.garbler[0].1];
        let el = vec![enc.evaluator[0].1];
        assert!(evaluate_garbled(&g, &c, &gl, &el).is_err());
    }

    #[test]
    fn fresh_seeds_share_no_labels() {
        use std::collections::HashSet;
        let spec = NeuronCircuitSpec {
            p: 2,
            l: 3,
            mode: CircuitMode::SafeSign,
        };
        let c = build_neuron_circuit(&spec).unwrap();
        let (_, e1) = garble(&c, 2, &mut rng(10));
        let (_, e2) = garble(&c, 2, &mut rng(11));
        let collect = |e: &InputEncoding| -> HashSet<[u8; 16]> {
            e.garbler
                .iter()
                .chain(&e.evaluator)
                .flat_map(|(a, b)| [a.0, b.0])
                .collect()
        };
        assert!(collect(&e1).is_disjoint(&collect(&e2)));
    }

    #[test]
    fn decode_round_trip_and_formula() {
        let spec = NeuronCircuitSpec {
            p: 4,
            l: 4,
            mode: CircuitMode::SafeSign,
        };
        let c = build_neuron_circuit(&spec).unwrap();
        let (g, enc) = garble(&c, 4, &mut rng(12));
        use rand::Rng;
        let mut r = rng(13);
        for _ in 0..50 {
            let gb: Vec<bool> = (0..c.garbler_inputs.len()).map(|_| r.gen()).collect();
            let eb: Vec<bool> = (0..c.evaluator_inputs.len()).map(|_| r.gen()).collect();
            assert_eq!(
                run_neuron(&c, &g, &enc, &gb, &eb),
                evaluate_plaintext(&c, &gb, &eb).unwrap()
            );
        }
        // decoding a label from the wrong wire fails the hash check
        let out = evaluate_garbled(
            &g,
            &c,
            &enc.encode_garbler(&vec![false; c.garbler_inputs.len()])
                .unwrap(),
            &enc.evaluator.iter().map(|p| p.0).collect::<Vec<_>>(),
        )
        .unwrap();
        let mut swapped = out.clone();
        swapped.swap(0, 1);
        if out[0] != out[1] {
            assert!(decode_outputs(&swapped, &g.decode).is_err());
        }
    }

    #[test]
    fn serialization_round_trip_and_size() {
        let spec = NeuronCircuitSpec {
            p: 8,
            l: 16,
            mode: CircuitMode::PaperExact,
        };
        let c = build_neuron_circuit(&spec).unwrap();
        let (g, _) = garble(&c, 8, &mut rng(14));
        let bytes = g.to_bytes();
        assert_eq!(bytes.len(), HEADER_BYTES + 64 * 480 + 17 * 16);
        let back = GarbledCircuit::from_bytes(&bytes).unwrap();
        assert_eq!(back.circuit_hash, g.circuit_hash);
        assert_eq!(back.tables, g.tables);
        assert_eq!(back.decode, g.decode);
        assert_eq!(back.material_hash(), g.material_hash());
        assert!(GarbledCircuit::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn ciphertext_bytes_look_uniform_across_inputs() {
        // obliviousness proxy: byte histograms of the tables do not depend
        // on which inputs are later evaluated, and no byte dominates
        let spec = NeuronCircuitSpec {
            p: 2,
            l: 8,
            mode: CircuitMode::SafeSign,
        };
        let c = build_neuron_circuit(&spec).unwrap();
        let (g, _) = garble(&c, 2, &mut rng(15));
        let mut counts = [0usize; 256];
        let mut total = 0usize;
        for t in &g.tables {
            for &b in t.iter() {
                counts[b as usize] += 1;
                total += 1;
            }
        }
        let expected = total as f64 / 256.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        // df = 255, alpha = 0.001 critical value
        assert!(chi2 < 327.0, "chi2 = {chi2}");
    }
}
