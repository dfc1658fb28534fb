//! Packed bit strings.
//!
//! Packing is normative for serialization and hashing: 8 bits per byte,
//! most-significant-bit first, index 0 = MSB of byte 0, trailing pad bits
//! zero.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryTemplate {
    len: usize,
    bytes: Vec<u8>,
}

impl BinaryTemplate {
    pub fn zeros(len: usize) -> Self {
        Self { len, bytes: vec![0u8; (len + 7) / 8] }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut t = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            t.set(i, b);
        }
        t
    }

    /// Reconstruct from packed bytes; pad bits must be zero.
    pub fn from_bytes(len: usize, bytes: Vec<u8>) -> Result<Self> {
        if bytes.len() != (len + 7) / 8 {
            return Err(Error::Dimension {
                what: "packed template bytes",
                expected: (len + 7) / 8,
                actual: bytes.len(),
            });
        }
        let t = Self { len, bytes };
        for i in len..t.bytes.len() * 8 {
            if t.raw_bit(i) {
                return Err(Error::Integrity("nonzero pad bits in packed template".into()));
            }
        }
        Ok(t)
    }

    #[inline]
    fn raw_bit(&self, i: usize) -> bool {
        self.bytes[i / 8] & (0x80 >> (i % 8)) != 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.raw_bit(i)
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 0x80 >> (i % 8);
        if v {
            self.bytes[i / 8] |= mask;
        } else {
            self.bytes[i / 8] &= !mask;
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.raw_bit(i))
    }

    pub fn count_ones(&self) -> usize {
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn xor(&self, other: &Self) -> Result<Self> {
        if self.len != other.len {
            return Err(Error::Dimension { what: "template xor", expected: self.len, actual: other.len });
        }
        let bytes = self.bytes.iter().zip(&other.bytes).map(|(a, b)| a ^ b).collect();
        Ok(Self { len: self.len, bytes })
    }

    pub fn complement(&self) -> Self {
        let mut t = Self { len: self.len, bytes: self.bytes.iter().map(|b| !b).collect() };
        // keep pad bits zero
        for i in t.len..t.bytes.len() * 8 {
            let mask = 0x80 >> (i % 8);
            t.bytes[i / 8] &= !mask;
        }
        t
    }

    pub fn hamming_distance(&self, other: &Self) -> Result<usize> {
        Ok(self.xor(other)?.count_ones())
    }
}

impl std::fmt::Display for BinaryTemplate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn msb_first_packing() {
        let t = BinaryTemplate::from_bits(&[true, false, true]);
        assert_eq!(t.as_bytes(), &[0b1010_0000]);
        assert_eq!(t.to_string(), "101");
    }

    #[test]
    fn pad_bits_must_be_zero() {
        assert!(BinaryTemplate::from_bytes(3, vec![0b1010_0000]).is_ok());
        assert!(matches!(
            BinaryTemplate::from_bytes(3, vec![0b1010_0001]),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn complement_zeroes_pad() {
        let t = BinaryTemplate::zeros(3).complement();
        assert_eq!(t.as_bytes(), &[0b1110_0000]);
        assert_eq!(t.count_ones(), 3);
    }

    #[test]
    fn distance_rejects_length_mismatch() {
        let a = BinaryTemplate::zeros(8);
        let b = BinaryTemplate::zeros(9);
        assert!(matches!(a.hamming_distance(&b), Err(Error::Dimension { .. })));
    }

    proptest! {
        #[test]
        fn roundtrip_bits(bits in proptest::collection::vec(any::<bool>(), 1..200)) {
            let t = BinaryTemplate::from_bits(&bits);
            let back: Vec<bool> = t.iter().collect();
            prop_assert_eq!(back, bits.clone());
            let t2 = BinaryTemplate::from_bytes(bits.len(), t.as_bytes().to_vec()).unwrap();
            prop_assert_eq!(t2, t);
        }

        #[test]
        fn xor_distance_agrees_with_per_bit_count(
            bits in proptest::collection::vec(any::<(bool, bool)>(), 1..200)
        ) {
            let a = BinaryTemplate::from_bits(&bits.iter().map(|p| p.0).collect::<Vec<_>>());
            let b = BinaryTemplate::from_bits(&bits.iter().map(|p| p.1).collect::<Vec<_>>());
            let naive = bits.iter().filter(|(x, y)| x != y).count();
            prop_assert_eq!(a.hamming_distance(&b).unwrap(), naive);
        }
    }
}
