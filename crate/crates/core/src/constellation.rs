//! Gray-mapped unit-energy constellations and delay-sequency frames.
//!
//! Point `i` of a [`Constellation`] carries the bit label `i`, most
//! significant bit first. For square QAM the first half of the label selects
//! the in-phase level and the second half the quadrature level, each through
//! a reflected Gray code with label 0 on the most positive level:
//!
//! ```text
//! BPSK  0 -> +1           1 -> -1
//! QPSK  00 -> (+1+j)/sqrt2  01 -> (+1-j)/sqrt2
//!       10 -> (-1+j)/sqrt2  11 -> (-1-j)/sqrt2
//! ```

use crate::{Error, Result, C64};
use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<C64>,
    bits_per_symbol: usize,
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

/// Amplitudes of a Gray-labelled PAM axis, indexed by label.
fn pam_axis(levels: usize) -> Vec<f64> {
    let mut by_label = vec![0.0; levels];
    for j in 0..levels {
        by_label[gray(j)] = (levels - 1) as f64 - 2.0 * j as f64;
    }
    by_label
}

/// Builds the unit-average-energy Gray constellation of order `q`.
pub fn build_constellation(q: usize) -> Result<Constellation> {
    let points = match q {
        2 => vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)],
        4 | 16 | 64 => {
            let side = (q as f64).sqrt() as usize;
            let half_bits = side.trailing_zeros();
            let axis = pam_axis(side);
            let scale = (3.0 / (2.0 * (q as f64 - 1.0))).sqrt();
            (0..q)
                .map(|label| {
                    let i = label >> half_bits;
                    let k = label & (side - 1);
                    C64::new(axis[i] * scale, axis[k] * scale)
                })
                .collect()
        }
        _ => return Err(Error::UnsupportedOrder(q)),
    };
    Ok(Constellation {
        points,
        bits_per_symbol: q.trailing_zeros() as usize,
    })
}

impl Constellation {
    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    /// Points indexed by bit label.
    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn point(&self, label: usize) -> C64 {
        self.points[label]
    }

    /// Bit `k` (0 = most significant) of a label.
    pub fn label_bit(&self, label: usize, k: usize) -> u8 {
        ((label >> (self.bits_per_symbol - 1 - k)) & 1) as u8
    }

    /// Label of the nearest point.
    pub fn nearest(&self, z: C64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn symbols(&self, labels: &[usize]) -> Vec<C64> {
        labels.iter().map(|&l| self.points[l]).collect()
    }

    /// Maps `labels.len() * bits_per_symbol` bits to labels, MSB first.
    pub fn labels_from_bits(&self, bits: &[u8]) -> Result<Vec<usize>> {
        let k = self.bits_per_symbol;
        if !bits.len().is_multiple_of(k) {
            return Err(Error::invalid(format!(
                "{} bits is not a multiple of {k} bits per symbol",
                bits.len()
            )));
        }
        Ok(bits
            .chunks(k)
            .map(|chunk| chunk.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize))
            .collect())
    }

    pub fn bits_from_labels(&self, labels: &[usize]) -> Vec<u8> {
        let k = self.bits_per_symbol;
        let mut out = Vec::with_capacity(labels.len() * k);
        for &l in labels {
            for b in 0..k {
                out.push(self.label_bit(l, b));
            }
        }
        out
    }

    /// Hard-demaps symbols to bits through the nearest point.
    pub fn demap(&self, symbols: &[C64]) -> Vec<u8> {
        let labels: Vec<usize> = symbols.iter().map(|&z| self.nearest(z)).collect();
        self.bits_from_labels(&labels)
    }
}

/// Delay-sequency frame `X_DS` (`M x N`) stored as its column-major
/// vectorization `x = vec(X_DS)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DsFrame {
    m: usize,
    n: usize,
    x: Vec<C64>,
}

impl DsFrame {
    pub fn from_vec(m: usize, n: usize, x: Vec<C64>) -> Result<Self> {
        Error::check_len(m * n, x.len())?;
        Ok(DsFrame { m, n, x })
    }

    pub fn from_matrix(x_ds: &DMatrix<C64>) -> Self {
        DsFrame {
            m: x_ds.nrows(),
            n: x_ds.ncols(),
            x: x_ds.as_slice().to_vec(),
        }
    }

    pub fn to_matrix(&self) -> DMatrix<C64> {
        DMatrix::from_column_slice(self.m, self.n, &self.x)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `X_DS(l, k)`.
    pub fn get(&self, l: usize, k: usize) -> C64 {
        self.x[l + k * self.m]
    }

    pub fn as_vec(&self) -> &[C64] {
        &self.x
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.x
    }
}

/// Maps `L = MN log2 Q` bits onto a frame, filling `X_DS` column-major.
pub fn map_bits(bits: &[u8], c: &Constellation, m: usize, n: usize) -> Result<DsFrame> {
    Error::check_len(m * n * c.bits_per_symbol(), bits.len())?;
    let labels = c.labels_from_bits(bits)?;
    DsFrame::from_vec(m, n, c.symbols(&labels))
}

/// Number of differing bits between the labels of two symbol vectors.
pub fn hamming_distance(x: &[C64], x_tilde: &[C64], c: &Constellation) -> usize {
    x.iter()
        .zip(x_tilde)
        .map(|(&a, &b)| (c.nearest(a) ^ c.nearest(b)).count_ones() as usize)
        .sum()
}
