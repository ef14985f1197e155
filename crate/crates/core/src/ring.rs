//! Arithmetic over the ring Z_q with q = 2^l.
//!
//! All shared values in the scheme live in N_q = {0, ..., q-1}. The signed
//! reinterpretation `mu` maps residues >= q/2 to negative integers (two's
//! complement), which is a partial inverse of reduction mod q on
//! Z_q = {-q/2, ..., q/2 - 1}.

use crate::error::{Error, Result};

/// Returns the bit mask selecting the low `width` bits of a word.
pub(crate) fn mask(width: u8) -> u64 {
    debug_assert!((1..=64).contains(&width));
    if width == 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

fn check_width(width: u8) -> Result<()> {
    if (1..=64).contains(&width) {
        Ok(())
    } else {
        Err(Error::InvalidWidth(width))
    }
}

/// A residue in N_q with q = 2^l.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct RingElement {
    value: u64,
    width: u8,
}

impl RingElement {
    /// Creates an element, reducing `value` mod 2^width.
    pub fn new(value: u64, width: u8) -> Result<Self> {
        check_width(width)?;
        Ok(Self {
            value: value & mask(width),
            width,
        })
    }

    pub fn zero(width: u8) -> Result<Self> {
        Self::new(0, width)
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn width(&self) -> u8 {
        self.width
    }

    /// Little-endian serialization in ceil(l/8) bytes; the wire format uses
    /// this verbatim.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let n = byte_len(self.width);
        self.value.to_le_bytes()[..n].to_vec()
    }

    pub fn from_le_bytes(bytes: &[u8], width: u8) -> Result<Self> {
        check_width(width)?;
        let n = byte_len(width);
        if bytes.len() != n {
            return Err(Error::FileFormat(format!(
                "ring element needs {n} bytes, got {}",
                bytes.len()
            )));
        }
        let mut buf = [0u8; 8];
        buf[..n].copy_from_slice(bytes);
        Self::new(u64::from_le_bytes(buf), width)
    }
}

/// Number of bytes used to serialize one element of width `l`.
pub fn byte_len(width: u8) -> usize {
    (width as usize + 7) / 8
}

/// A signed integer in Z_q = {-2^{l-1}, ..., 2^{l-1} - 1}.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct SignedValue {
    value: i64,
    width: u8,
}

impl SignedValue {
    pub fn new(value: i64, width: u8) -> Result<Self> {
        check_width(width)?;
        let (lo, hi) = signed_range(width);
        if value < lo || value > hi {
            return Err(Error::SignedRange(value, width));
        }
        Ok(Self { value, width })
    }

    pub fn value(&self) -> i64 {
        self.value
    }

    pub fn width(&self) -> u8 {
        self.width
    }
}

/// Inclusive bounds of Z_q for q = 2^l.
pub fn signed_range(width: u8) -> (i64, i64) {
    if width == 64 {
        (i64::MIN, i64::MAX)
    } else {
        (-(1i64 << (width - 1)), (1i64 << (width - 1)) - 1)
    }
}

/// (a + b) mod 2^l.
pub fn mod_add(a: RingElement, b: RingElement) -> Result<RingElement> {
    if a.width != b.width {
        return Err(Error::WidthMismatch(a.width, b.width));
    }
    RingElement::new(a.value.wrapping_add(b.value), a.width)
}

/// (a - b) mod 2^l.
pub fn mod_sub(a: RingElement, b: RingElement) -> Result<RingElement> {
    if a.width != b.width {
        return Err(Error::WidthMismatch(a.width, b.width));
    }
    RingElement::new(a.value.wrapping_sub(b.value), a.width)
}

/// (a * b) mod 2^l.
pub fn mod_mul(a: RingElement, b: RingElement) -> Result<RingElement> {
    if a.width != b.width {
        return Err(Error::WidthMismatch(a.width, b.width));
    }
    RingElement::new(a.value.wrapping_mul(b.value), a.width)
}

/// The signed partial inverse of reduction mod q: values >= q/2 map to
/// negatives via two's complement.
pub fn mu(a: RingElement) -> SignedValue {
    let value = mu_raw(a.value, a.width);
    SignedValue {
        value,
        width: a.width,
    }
}

/// `mu` on a raw residue already reduced mod 2^l.
pub(crate) fn mu_raw(value: u64, width: u8) -> i64 {
    debug_assert_eq!(value & mask(width), value);
    if width == 64 {
        return value as i64;
    }
    if value >= 1u64 << (width - 1) {
        value as i64 - (1i64 << width)
    } else {
        value as i64
    }
}

/// Inverse of `mu` on Z_q: embeds a signed value back into N_q.
pub fn lift(s: SignedValue) -> RingElement {
    RingElement {
        value: (s.value as u64) & mask(s.width),
        width: s.width,
    }
}

/// Embeds an arbitrary signed integer, reducing mod 2^l. Unlike [`lift`]
/// the input does not have to fit Z_q.
pub fn reduce_signed(value: i64, width: u8) -> Result<RingElement> {
    RingElement::new(value as u64, width)
}

/// LSB-first bit vector of length l.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BitVector {
    bits: Vec<bool>,
}

impl BitVector {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// LSB-first bit decomposition of a residue.
pub fn to_bits(a: RingElement) -> BitVector {
    let bits = (0..a.width).map(|j| (a.value >> j) & 1 == 1).collect();
    BitVector { bits }
}

/// Recomposes an LSB-first bit vector into a residue.
pub fn from_bits(v: &BitVector) -> Result<RingElement> {
    let width = v.bits.len() as u8;
    check_width(width)?;
    let mut value = 0u64;
    for (j, &bit) in v.bits.iter().enumerate() {
        if bit {
            value |= 1u64 << j;
        }
    }
    RingElement::new(value, width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn re(v: u64, l: u8) -> RingElement {
        RingElement::new(v, l).unwrap()
    }

    #[test]
    fn mod_add_worked_examples() {
        // 3 + 6 = 9 -> 1 and 5 + 2 = 7 at l = 3
        assert_eq!(mod_add(re(3, 3), re(6, 3)).unwrap().value(), 1);
        assert_eq!(mod_add(re(5, 3), re(2, 3)).unwrap().value(), 7);
        for x in 0..8 {
            assert_eq!(mod_add(re(0, 3), re(x, 3)).unwrap().value(), x);
        }
    }

    #[test]
    fn mod_add_width_mismatch() {
        assert!(matches!(
            mod_add(re(1, 3), re(1, 4)),
            Err(Error::WidthMismatch(3, 4))
        ));
    }

    #[test]
    fn mu_worked_examples() {
        assert_eq!(mu(re(7, 3)).value(), -1);
        assert_eq!(mu(re(1, 3)).value(), 1);
        // boundary z = q/2
        assert_eq!(mu(re(4, 3)).value(), -4);
    }

    #[test]
    fn lift_inverts_mu() {
        assert_eq!(lift(SignedValue::new(-1, 3).unwrap()).value(), 7);
        assert_eq!(lift(SignedValue::new(0, 3).unwrap()).value(), 0);
        assert_eq!(lift(SignedValue::new(-4, 3).unwrap()).value(), 4);
        assert!(SignedValue::new(4, 3).is_err());
        assert!(SignedValue::new(-5, 3).is_err());
    }

    #[test]
    fn mu_lift_roundtrip_exhaustive() {
        for l in 1..=12u8 {
            let (lo, hi) = signed_range(l);
            for z in lo..=hi {
                let s = SignedValue::new(z, l).unwrap();
                assert_eq!(mu(lift(s)), s);
            }
        }
    }

    #[test]
    fn mu_congruent_mod_q() {
        for l in 1..=10u8 {
            for v in 0..(1u64 << l) {
                let a = re(v, l);
                let m = mu(a).value();
                assert_eq!(m.rem_euclid(1 << l) as u64, v);
            }
        }
    }

    #[test]
    fn bits_worked_examples() {
        // 9 mod 8 = 1 -> LSB-first [1,0,0]
        let a = re(9, 3);
        assert_eq!(to_bits(a).bits(), &[true, false, false]);
        assert_eq!(to_bits(re(0, 3)).bits(), &[false, false, false]);
    }

    #[test]
    fn bits_roundtrip_exhaustive() {
        for l in [3u8, 8, 12] {
            for v in 0..(1u64 << l) {
                let a = re(v, l);
                assert_eq!(from_bits(&to_bits(a)).unwrap(), a);
            }
        }
    }

    #[test]
    fn serialization_roundtrip() {
        let a = re(0x1234, 16);
        let bytes = a.to_le_bytes();
        assert_eq!(bytes, vec![0x34, 0x12]);
        assert_eq!(RingElement::from_le_bytes(&bytes, 16).unwrap(), a);
        // l = 3 still uses one byte
        assert_eq!(re(5, 3).to_le_bytes(), vec![5]);
    }

    proptest! {
        #[test]
        fn add_commutative_associative(a in 0u64..1 << 16, b in 0u64..1 << 16, c in 0u64..1 << 16) {
            let l = 16;
            let (ra, rb, rc) = (re(a, l), re(b, l), re(c, l));
            prop_assert_eq!(mod_add(ra, rb).unwrap(), mod_add(rb, ra).unwrap());
            let left = mod_add(mod_add(ra, rb).unwrap(), rc).unwrap();
            let right = mod_add(ra, mod_add(rb, rc).unwrap()).unwrap();
            prop_assert_eq!(left, right);
        }
    }
}
