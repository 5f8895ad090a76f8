use crate::rng::SimRng;
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;

/// Uniform random permutation of coded-bit positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaver {
    perm: Vec<usize>,
    seed: u64,
}

impl Interleaver {
    pub fn new(len: usize, seed: u64) -> Self {
        let mut perm: Vec<usize> = (0..len).collect();
        perm.shuffle(&mut SimRng::seed_from_u64(seed));
        Interleaver { perm, seed }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// `out[i] = input[perm[i]]`.
    pub fn interleave<T: Copy>(&self, input: &[T]) -> Result<Vec<T>> {
        Error::check_len(self.perm.len(), input.len())?;
        Ok(self.perm.iter().map(|&p| input[p]).collect())
    }

    pub fn deinterleave<T: Copy + Default>(&self, input: &[T]) -> Result<Vec<T>> {
        Error::check_len(self.perm.len(), input.len())?;
        let mut out = vec![T::default(); input.len()];
        for (&p, &v) in self.perm.iter().zip(input) {
            out[p] = v;
        }
        Ok(out)
    }
}
