use std::fmt;

use rand::Rng;

use crate::{Error, Result};

/// Fixed-length bit vector; every entry is exactly 0 or 1.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Solution(Vec<u8>);

impl Solution {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::invalid(format!("bit value {b} is not 0 or 1")));
        }
        Ok(Self(bits))
    }

    pub(crate) fn from_bits_unchecked(bits: Vec<u8>) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        Self(bits)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    /// Uniform sample from {0,1}^dim.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        Self((0..dim).map(|_| rng.random_range(0..=1u8)).collect())
    }

    pub fn from_bitstring(s: &str) -> Result<Self> {
        s.bytes()
            .map(|c| match c {
                b'0' => Ok(0),
                b'1' => Ok(1),
                other => Err(Error::Parse(format!("invalid bit character {:?}", other as char))),
            })
            .collect::<Result<Vec<u8>>>()
            .map(Self)
    }

    pub fn to_bitstring(&self) -> String {
        self.0.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bits(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    pub fn complement(&self) -> Self {
        Self(self.0.iter().map(|&b| 1 - b).collect())
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        self.0[i] = bit as u8;
    }

    pub fn hamming(&self, other: &Solution) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| b as f64).collect()
    }

    /// Truncates or zero-pads to `dim` coordinates.
    pub fn resized(&self, dim: usize) -> Self {
        let mut bits = self.0.clone();
        bits.resize(dim, 0);
        Self(bits)
    }
}

impl fmt::Debug for Solution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Solution({})", self.to_bitstring())
    }
}

impl fmt::Display for Solution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bitstring())
    }
}

/// A repaired solution together with its true objective value.
#[derive(Clone, Debug, PartialEq)]
pub struct EvaluatedSample {
    pub solution: Solution,
    pub objective: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_binary() {
        assert!(Solution::new(vec![0, 2]).is_err());
        assert!(Solution::from_bitstring("01x").is_err());
    }

    #[test]
    fn complement_and_bitstring() {
        let x = Solution::from_bitstring("101").unwrap();
        assert_eq!(x.complement().to_bitstring(), "010");
        assert_eq!(x.resized(5).to_bitstring(), "10100");
        assert_eq!(x.resized(2).to_bitstring(), "10");
    }
}
