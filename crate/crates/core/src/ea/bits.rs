use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};

use super::EaError;

/// A search point in `{0,1}^n`, bit-packed, with a cached zero count.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
    zeros: usize,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        BitString {
            words: vec![0; len.div_ceil(64)],
            len,
            zeros: len,
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut b = Self::zeros(len);
        for i in 0..len {
            b.set(i, true);
        }
        b
    }

    /// Uniformly random point.
    pub fn random(len: usize, rng: &mut dyn RngCore) -> Self {
        let mut b = Self::zeros(len);
        for w in b.words.iter_mut() {
            *w = rng.random();
        }
        if !len.is_multiple_of(64) {
            if let Some(last) = b.words.last_mut() {
                *last &= (1u64 << (len % 64)) - 1;
            }
        }
        b.zeros = len - b.words.iter().map(|w| w.count_ones() as usize).sum::<usize>();
        b
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let bits: Vec<bool> = bits.into_iter().collect();
        let mut b = Self::zeros(bits.len());
        for (i, bit) in bits.into_iter().enumerate() {
            b.set(i, bit);
        }
        b
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range");
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        if self.get(i) != value {
            self.flip(i);
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range");
        let mask = 1u64 << (i % 64);
        let w = &mut self.words[i / 64];
        *w ^= mask;
        if *w & mask == 0 {
            self.zeros += 1;
        } else {
            self.zeros -= 1;
        }
    }

    pub fn flip_all(&mut self, positions: &[usize]) {
        for &i in positions {
            self.flip(i);
        }
    }

    pub fn zero_count(&self) -> usize {
        self.zeros
    }

    pub fn one_count(&self) -> usize {
        self.len - self.zeros
    }

    pub fn is_all_ones(&self) -> bool {
        self.zeros == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(|i| self.get(i))
    }

    /// Number of zero bits among `positions`.
    pub fn zeros_in(&self, positions: &[usize]) -> usize {
        positions.iter().filter(|&&i| !self.get(i)).count()
    }

    /// Fraction of zero bits among `positions` (0-based).
    pub fn density(&self, positions: &[usize]) -> Result<f64, EaError> {
        if positions.is_empty() {
            return Err(EaError::EmptySet);
        }
        if let Some(&bad) = positions.iter().find(|&&i| i >= self.len) {
            return Err(EaError::PositionOutOfRange {
                position: bad,
                len: self.len,
            });
        }
        Ok(self.zeros_in(positions) as f64 / positions.len() as f64)
    }

    pub fn hamming_distance(&self, other: &BitString) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }
}

/// Zero density of `point` at the given positions.
pub fn density(point: &BitString, index_set: &[usize]) -> Result<f64, EaError> {
    point.density(index_set)
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
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = EaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(EaError::BadBitString(other)),
            })
            .collect::<Result<Vec<bool>, _>>()
            .map(BitString::from_bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use proptest::prelude::*;

    #[test]
    fn density_examples() {
        let all_zero = BitString::zeros(8);
        let all_one = BitString::ones(8);
        assert_eq!(all_zero.density(&[0, 3, 7]).unwrap(), 1.0);
        assert_eq!(all_one.density(&[0, 3, 7]).unwrap(), 0.0);
        let x: BitString = "0101".parse().unwrap();
        assert_eq!(density(&x, &[0, 1]).unwrap(), 0.5);
        assert!(matches!(x.density(&[]), Err(EaError::EmptySet)));
        assert!(x.density(&[4]).is_err());
    }

    #[test]
    fn parse_and_display_round_trip() {
        let x: BitString = "1100101".parse().unwrap();
        assert_eq!(x.to_string(), "1100101");
        assert_eq!(x.zero_count(), 3);
        assert!("10a".parse::<BitString>().is_err());
    }

    #[test]
    fn random_point_masks_tail_bits() {
        let mut rng = rng_from_seed(4);
        let x = BitString::random(70, &mut rng);
        assert_eq!(x.zero_count() + x.one_count(), 70);
        assert_eq!(x.iter().filter(|b| !b).count(), x.zero_count());
    }

    proptest! {
        #[test]
        fn zero_count_tracks_flips(len in 1usize..200, flips in proptest::collection::vec(0usize..1000, 0..50)) {
            let mut x = BitString::zeros(len);
            for f in flips {
                x.flip(f % len);
            }
            prop_assert_eq!(x.zero_count(), x.iter().filter(|b| !b).count());
            prop_assert_eq!(x.zero_count() + x.one_count(), len);
        }
    }
}
