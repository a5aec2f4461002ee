//! Fixed-length bit strings used for keys, digests and signatures.

use std::fmt;
use std::ops::BitXor;

use bitvec::prelude::*;
use rand::{Rng, RngExt};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A bit string indexed from 0. Bit 0 is the leftmost character of the
/// textual form and the most significant bit of the first hex nibble.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString(BitVec<u64, Lsb0>);

impl BitString {
    pub fn zeros(len: usize) -> Self {
        Self(bitvec![u64, Lsb0; 0; len])
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut bits = BitVec::<u64, Lsb0>::with_capacity(len);
        let mut remaining = len;
        while remaining > 0 {
            let word: u64 = rng.random();
            let take = remaining.min(64);
            bits.extend_from_bitslice(&word.view_bits::<Lsb0>()[..take]);
            remaining -= take;
        }
        Self(bits)
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        Self(bits.into_iter().collect())
    }

    /// Parses a string of `'0'`/`'1'` characters.
    pub fn parse_binary(text: &str) -> Option<Self> {
        text.chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<BitVec<u64, Lsb0>>>()
            .map(Self)
    }

    /// Expands bytes most-significant bit first.
    pub fn from_bytes_msb_first(bytes: &[u8]) -> Self {
        Self(bytes.view_bits::<Msb0>().iter().by_vals().collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> bool {
        self.0[index]
    }

    pub fn set(&mut self, index: usize, value: bool) {
        self.0.set(index, value);
    }

    pub fn is_zero(&self) -> bool {
        self.0.not_any()
    }

    pub fn count_ones(&self) -> usize {
        self.0.count_ones()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().by_vals()
    }

    /// Returns `self || other`.
    pub fn concat(&self, other: &BitString) -> BitString {
        let mut out = self.0.clone();
        out.extend_from_bitslice(&other.0);
        Self(out)
    }

    /// Splits into `[0, at)` and `[at, len)`.
    pub fn split_at(&self, at: usize) -> (BitString, BitString) {
        let (head, tail) = self.0.split_at(at);
        (Self(head.to_bitvec()), Self(tail.to_bitvec()))
    }

    /// Bitwise XOR, `None` on length mismatch.
    pub fn xor(&self, other: &BitString) -> Option<BitString> {
        if self.len() != other.len() {
            return None;
        }
        let mut out = self.0.clone();
        out ^= other.0.as_bitslice();
        Some(Self(out))
    }

    /// Packs the bits into little-endian `u64` words (bit `i` is bit `i % 64`
    /// of word `i / 64`); unused high bits of the last word are zero.
    pub fn to_words(&self) -> Vec<u64> {
        let mut words = vec![0u64; self.len().div_ceil(64)];
        for index in self.0.iter_ones() {
            words[index / 64] |= 1u64 << (index % 64);
        }
        words
    }

    pub fn from_words(words: &[u64], len: usize) -> Self {
        Self(words.view_bits::<Lsb0>()[..len].to_bitvec())
    }

    /// Lowercase hex, most significant nibble first; a trailing partial
    /// nibble is padded with zero bits on the right.
    pub fn to_hex(&self) -> String {
        self.0
            .chunks(4)
            .map(|chunk| {
                let nibble = chunk
                    .iter()
                    .by_vals()
                    .chain(std::iter::repeat(false))
                    .take(4)
                    .fold(0u32, |acc, bit| (acc << 1) | u32::from(bit));
                char::from_digit(nibble, 16).expect("nibble < 16")
            })
            .collect()
    }

    /// Inverse of [`BitString::to_hex`] for a known bit length.
    pub fn from_hex(text: &str, len: usize) -> Option<Self> {
        if text.len() != len.div_ceil(4) {
            return None;
        }
        let mut bits = BitVec::<u64, Lsb0>::with_capacity(text.len() * 4);
        for c in text.chars() {
            let nibble = c.to_digit(16)?;
            for shift in (0..4).rev() {
                bits.push((nibble >> shift) & 1 == 1);
            }
        }
        if bits[len..].any() {
            return None;
        }
        bits.truncate(len);
        Some(Self(bits))
    }
}

impl BitXor for &BitString {
    type Output = BitString;

    /// Panics on length mismatch; use [`BitString::xor`] for fallible XOR.
    fn bitxor(self, rhs: &BitString) -> BitString {
        self.xor(rhs).expect("xor of bit strings with different lengths")
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for bit in self.iter() {
            f.write_str(if bit { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len() <= 64 {
            write!(f, "BitString({self})")
        } else {
            write!(f, "BitString[{}]({})", self.len(), self.to_hex())
        }
    }
}

#[derive(Serialize, Deserialize)]
struct BitStringRepr {
    len: usize,
    hex: String,
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        BitStringRepr { len: self.len(), hex: self.to_hex() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = BitStringRepr::deserialize(deserializer)?;
        BitString::from_hex(&repr.hex, repr.len)
            .ok_or_else(|| serde::de::Error::custom("malformed hex bit string"))
    }
}
