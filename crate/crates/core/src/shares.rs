//! Additive secret sharing over Z_{2^l}.
//!
//! A secret z is split as z = z1 + z2 mod q with z1 uniform on N_q. Affine
//! operations run locally on shares; elementwise products of shared
//! matrices use matrix-valued Beaver triples (A, B, C) with
//! A o B = C mod q, consumed once each. Public additive constants always go
//! to party 1's share.

use rand::Rng;

use crate::error::{Error, Result};
use crate::ring::{self, mask, RingElement, SignedValue};

/// One of the two computing parties.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PartyIndex {
    P1,
    P2,
}

impl PartyIndex {
    pub fn other(self) -> Self {
        match self {
            PartyIndex::P1 => PartyIndex::P2,
            PartyIndex::P2 => PartyIndex::P1,
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            PartyIndex::P1 => 1,
            PartyIndex::P2 => 2,
        }
    }

    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            1 => Ok(PartyIndex::P1),
            2 => Ok(PartyIndex::P2),
            _ => Err(Error::FileFormat(format!("invalid party index {v}"))),
        }
    }
}

/// One party's additive shares of a rows x cols matrix of residues.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ShareMatrix {
    pub party: PartyIndex,
    pub rows: usize,
    pub cols: usize,
    pub width: u8,
    /// row-major, each entry already reduced mod 2^width
    pub data: Vec<u64>,
}

/// Shares of a length-p vector (a single-column matrix).
pub type ShareVector = ShareMatrix;

impl ShareMatrix {
    pub fn new(party: PartyIndex, rows: usize, cols: usize, width: u8, data: Vec<u64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{rows}x{cols}"),
                got: format!("{} entries", data.len()),
            });
        }
        let m = mask(width);
        Ok(Self {
            party,
            rows,
            cols,
            width,
            data: data.into_iter().map(|v| v & m).collect(),
        })
    }

    pub fn entry(&self, r: usize, c: usize) -> RingElement {
        RingElement::new(self.data[r * self.cols + c], self.width).expect("stored reduced")
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.width != other.width {
            return Err(Error::WidthMismatch(self.width, other.width));
        }
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", self.rows, self.cols),
                got: format!("{}x{}", other.rows, other.cols),
            });
        }
        Ok(())
    }
}

/// Splits a residue into two shares; the first is uniform on N_q.
pub fn share(z: RingElement, rng: &mut impl Rng) -> (RingElement, RingElement) {
    let m = mask(z.width());
    let z1 = rng.gen::<u64>() & m;
    let z2 = z.value().wrapping_sub(z1) & m;
    (
        RingElement::new(z1, z.width()).expect("masked"),
        RingElement::new(z2, z.width()).expect("masked"),
    )
}

/// Shares a signed value after embedding it into N_q.
pub fn share_signed(z: SignedValue, rng: &mut impl Rng) -> (RingElement, RingElement) {
    share(ring::lift(z), rng)
}

/// mu(a + b mod q): correct whenever the true value lies in Z_q.
pub fn reconstruct(a: RingElement, b: RingElement) -> Result<SignedValue> {
    Ok(ring::mu(ring::mod_add(a, b)?))
}

/// Shares every entry of a signed matrix, reducing mod q first.
pub fn share_matrix(
    values: &[i64],
    rows: usize,
    cols: usize,
    width: u8,
    rng: &mut impl Rng,
) -> Result<(ShareMatrix, ShareMatrix)> {
    if values.len() != rows * cols {
        return Err(Error::ShapeMismatch {
            expected: format!("{rows}x{cols}"),
            got: format!("{} entries", values.len()),
        });
    }
    let m = mask(width);
    let mut d1 = Vec::with_capacity(values.len());
    let mut d2 = Vec::with_capacity(values.len());
    for &v in values {
        let z = (v as u64) & m;
        let z1 = rng.gen::<u64>() & m;
        d1.push(z1);
        d2.push(z.wrapping_sub(z1) & m);
    }
    Ok((
        ShareMatrix::new(PartyIndex::P1, rows, cols, width, d1)?,
        ShareMatrix::new(PartyIndex::P2, rows, cols, width, d2)?,
    ))
}

/// Recombines two share matrices into signed entries via mu.
pub fn reconstruct_matrix(a: &ShareMatrix, b: &ShareMatrix) -> Result<Vec<i64>> {
    a.check_same_shape(b)?;
    let m = mask(a.width);
    Ok(a.data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| ring::mu_raw(x.wrapping_add(y) & m, a.width))
        .collect())
}

/// Entrywise share addition (both parties add locally).
pub fn add_shares(a: &ShareMatrix, b: &ShareMatrix) -> Result<ShareMatrix> {
    a.check_same_shape(b)?;
    if a.party != b.party {
        return Err(Error::ShapeMismatch {
            expected: format!("shares of party {:?}", a.party),
            got: format!("party {:?}", b.party),
        });
    }
    let m = mask(a.width);
    let data = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| x.wrapping_add(y) & m)
        .collect();
    ShareMatrix::new(a.party, a.rows, a.cols, a.width, data)
}

/// a*[z] + b with public a, b: party 1 applies the additive constant, party
/// 2 only the multiplier.
pub fn affine_public(z: &ShareMatrix, mul: i64, add: i64) -> ShareMatrix {
    let m = mask(z.width);
    let mul = (mul as u64) & m;
    let add = if z.party == PartyIndex::P1 {
        (add as u64) & m
    } else {
        0
    };
    let data = z
        .data
        .iter()
        .map(|&v| v.wrapping_mul(mul).wrapping_add(add) & m)
        .collect();
    ShareMatrix::new(z.party, z.rows, z.cols, z.width, data).expect("shape preserved")
}

/// One party's Beaver-triple shares for an elementwise matrix product.
#[derive(Clone, Debug)]
pub struct BeaverTripleMatrix {
    pub id: u64,
    pub a: ShareMatrix,
    pub b: ShareMatrix,
    pub c: ShareMatrix,
    consumed: bool,
}

impl BeaverTripleMatrix {
    /// A fresh (unconsumed) triple from dealer-provided shares.
    pub fn new(id: u64, a: ShareMatrix, b: ShareMatrix, c: ShareMatrix) -> Result<Self> {
        a.check_same_shape(&b)?;
        a.check_same_shape(&c)?;
        Ok(Self {
            id,
            a,
            b,
            c,
            consumed: false,
        })
    }

    pub fn party(&self) -> PartyIndex {
        self.a.party
    }

    pub fn consumed(&self) -> bool {
        self.consumed
    }
}

/// This party's contribution to the opened values D = K - A, E = X - B.
#[derive(Clone, Debug, PartialEq)]
pub struct OpenedContribution {
    pub triple_id: u64,
    pub rows: usize,
    pub cols: usize,
    pub width: u8,
    pub d: Vec<u64>,
    pub e: Vec<u64>,
}

/// The publicly revealed D and E after both contributions are combined.
#[derive(Clone, Debug, PartialEq)]
pub struct OpenedValue {
    pub triple_id: u64,
    pub rows: usize,
    pub cols: usize,
    pub width: u8,
    pub d: Vec<u64>,
    pub e: Vec<u64>,
}

/// Emits this party's shares of D = [K] - [A] and E = [X] - [B], marking
/// the triple as consumed. A consumed triple cannot be opened again.
pub fn beaver_open(
    triple: &mut BeaverTripleMatrix,
    k_share: &ShareMatrix,
    x_share: &ShareMatrix,
) -> Result<OpenedContribution> {
    if triple.consumed {
        return Err(Error::TripleReused(triple.id));
    }
    triple.a.check_same_shape(k_share)?;
    triple.b.check_same_shape(x_share)?;
    triple.consumed = true;
    let m = mask(triple.a.width);
    let sub = |x: &[u64], y: &[u64]| -> Vec<u64> {
        x.iter()
            .zip(y)
            .map(|(&a, &b)| a.wrapping_sub(b) & m)
            .collect()
    };
    Ok(OpenedContribution {
        triple_id: triple.id,
        rows: triple.a.rows,
        cols: triple.a.cols,
        width: triple.a.width,
        d: sub(&k_share.data, &triple.a.data),
        e: sub(&x_share.data, &triple.b.data),
    })
}

impl OpenedValue {
    /// Combines both parties' contributions into the public D and E.
    pub fn combine(c1: &OpenedContribution, c2: &OpenedContribution) -> Result<Self> {
        if c1.triple_id != c2.triple_id {
            return Err(Error::Protocol {
                step: 0,
                message: format!(
                    "opened contributions refer to different triples ({} vs {})",
                    c1.triple_id, c2.triple_id
                ),
            });
        }
        if c1.rows != c2.rows || c1.cols != c2.cols || c1.width != c2.width {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{} width {}", c1.rows, c1.cols, c1.width),
                got: format!("{}x{} width {}", c2.rows, c2.cols, c2.width),
            });
        }
        let m = mask(c1.width);
        let add = |x: &[u64], y: &[u64]| -> Vec<u64> {
            x.iter()
                .zip(y)
                .map(|(&a, &b)| a.wrapping_add(b) & m)
                .collect()
        };
        Ok(OpenedValue {
            triple_id: c1.triple_id,
            rows: c1.rows,
            cols: c1.cols,
            width: c1.width,
            d: add(&c1.d, &c2.d),
            e: add(&c1.e, &c2.e),
        })
    }
}

/// Shares of the preactivation vector v = K xi + beta:
/// [v] = ([C] + D o [B] + E o [A] + D o E) 1 + [beta], where the public
/// D o E term is added by party 1 only.
pub fn preactivation_shares(
    opened: &OpenedValue,
    triple: &BeaverTripleMatrix,
    beta_share: &ShareVector,
) -> Result<ShareVector> {
    if opened.triple_id != triple.id {
        return Err(Error::Protocol {
            step: 0,
            message: format!(
                "opened value for triple {} applied to triple {}",
                opened.triple_id, triple.id
            ),
        });
    }
    let (rows, cols, width) = (triple.a.rows, triple.a.cols, triple.a.width);
    if opened.rows != rows || opened.cols != cols || opened.width != width {
        return Err(Error::ShapeMismatch {
            expected: format!("{rows}x{cols}"),
            got: format!("{}x{}", opened.rows, opened.cols),
        });
    }
    if beta_share.rows != rows || beta_share.cols != 1 || beta_share.width != width {
        return Err(Error::ShapeMismatch {
            expected: format!("{rows}x1"),
            got: format!("{}x{}", beta_share.rows, beta_share.cols),
        });
    }
    let m = mask(width);
    let public_term = triple.party() == PartyIndex::P1;
    let mut out = Vec::with_capacity(rows);
    for r in 0..rows {
        let mut acc = beta_share.data[r];
        for c in 0..cols {
            let idx = r * cols + c;
            let mut term = triple.c.data[idx];
            term = term.wrapping_add(opened.d[idx].wrapping_mul(triple.b.data[idx]));
            term = term.wrapping_add(opened.e[idx].wrapping_mul(triple.a.data[idx]));
            if public_term {
                term = term.wrapping_add(opened.d[idx].wrapping_mul(opened.e[idx]));
            }
            acc = acc.wrapping_add(term) & m;
        }
        out.push(acc);
    }
    ShareMatrix::new(triple.party(), rows, 1, width, out)
}

/// Replicates a shared state vector xi (length n) into the p x n matrix
/// whose rows all equal xi^T, staying a valid share of that matrix.
pub fn replicate_rows(xi_share: &ShareVector, p: usize) -> Result<ShareMatrix> {
    if xi_share.cols != 1 {
        return Err(Error::ShapeMismatch {
            expected: "column vector".into(),
            got: format!("{}x{}", xi_share.rows, xi_share.cols),
        });
    }
    let n = xi_share.rows;
    let mut data = Vec::with_capacity(p * n);
    for _ in 0..p {
        data.extend_from_slice(&xi_share.data);
    }
    ShareMatrix::new(xi_share.party, p, n, xi_share.width, data)
}

/// Dealer-side generation of `count` matrix triples for both parties.
/// `first_id` numbers them so transcripts can prove non-reuse.
pub fn deal_triples(
    rows: usize,
    cols: usize,
    width: u8,
    count: usize,
    first_id: u64,
    rng: &mut impl Rng,
) -> (Vec<BeaverTripleMatrix>, Vec<BeaverTripleMatrix>) {
    let m = mask(width);
    let mut out1 = Vec::with_capacity(count);
    let mut out2 = Vec::with_capacity(count);
    for k in 0..count {
        let len = rows * cols;
        let a: Vec<u64> = (0..len).map(|_| rng.gen::<u64>() & m).collect();
        let b: Vec<u64> = (0..len).map(|_| rng.gen::<u64>() & m).collect();
        let c: Vec<u64> = a
            .iter()
            .zip(&b)
            .map(|(&x, &y)| x.wrapping_mul(y) & m)
            .collect();
        let split = |vals: &[u64], rng: &mut dyn rand::RngCore| -> (Vec<u64>, Vec<u64>) {
            let mut s1 = Vec::with_capacity(vals.len());
            let mut s2 = Vec::with_capacity(vals.len());
            for &v in vals {
                let r = rng.next_u64() & m;
                s1.push(r);
                s2.push(v.wrapping_sub(r) & m);
            }
            (s1, s2)
        };
        let (a1, a2) = split(&a, rng);
        let (b1, b2) = split(&b, rng);
        let (c1, c2) = split(&c, rng);
        let id = first_id + k as u64;
        let mk = |party, a, b, c| BeaverTripleMatrix {
            id,
            a: ShareMatrix::new(party, rows, cols, width, a).expect("shape"),
            b: ShareMatrix::new(party, rows, cols, width, b).expect("shape"),
            c: ShareMatrix::new(party, rows, cols, width, c).expect("shape"),
            consumed: false,
        };
        out1.push(mk(PartyIndex::P1, a1, b1, c1));
        out2.push(mk(PartyIndex::P2, a2, b2, c2));
    }
    (out1, out2)
}

/// Binary share-file layout: magic, version, l, rows, cols, party, then
/// row-major little-endian elements.
pub mod file {
    use super::*;

    pub const MAGIC: &[u8; 4] = b"MXSH";
    pub const VERSION: u16 = 1;

    pub fn encode(m: &ShareMatrix) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(m.width);
        out.extend_from_slice(&(m.rows as u32).to_le_bytes());
        out.extend_from_slice(&(m.cols as u32).to_le_bytes());
        out.push(m.party.as_u8());
        let n = ring::byte_len(m.width);
        for &v in &m.data {
            out.extend_from_slice(&v.to_le_bytes()[..n]);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<ShareMatrix> {
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(Error::FileFormat("bad share file magic".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::FileFormat(format!("unsupported version {version}")));
        }
        let width = bytes[6];
        let rows = u32::from_le_bytes(bytes[7..11].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(bytes[11..15].try_into().unwrap()) as usize;
        let party = PartyIndex::from_u8(bytes[15])?;
        let n = ring::byte_len(width);
        let body = &bytes[16..];
        if body.len() != rows * cols * n {
            return Err(Error::FileFormat(format!(
                "share body holds {} bytes, expected {}",
                body.len(),
                rows * cols * n
            )));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for chunk in body.chunks(n) {
            data.push(RingElement::from_le_bytes(chunk, width)?.value());
        }
        ShareMatrix::new(party, rows, cols, width, data)
    }
}
