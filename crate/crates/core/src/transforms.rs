//! Normalized DFT and sequency-ordered Walsh-Hadamard matrices, and
//! Kronecker-structured operators `(W (x) G) v` applied without forming the
//! `MN x MN` product.
//!
//! Sequency row `k` of the Walsh matrix is natural-order Hadamard row
//! `bitrev(gray(k))`, which has exactly `k` sign changes.

use crate::{Error, Result, C64};
use nalgebra::DMatrix;

/// Orthonormal sequency-ordered Walsh-Hadamard matrix. Symmetric and
/// self-inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct WalshMatrix {
    matrix: DMatrix<f64>,
}

impl WalshMatrix {
    pub fn order(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

/// Unitary `M`-point DFT matrix with entries `exp(-j 2 pi m l / M) / sqrt(M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DftMatrix {
    matrix: DMatrix<C64>,
}

impl DftMatrix {
    pub fn order(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }
}

fn bit_reverse(x: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS - bits)
    }
}

/// Natural-order Hadamard row holding sequency `k` for a transform of size `n`.
pub fn sequency_to_natural(k: usize, n: usize) -> usize {
    bit_reverse(k ^ (k >> 1), n.trailing_zeros())
}

pub fn walsh_matrix(n: usize) -> Result<WalshMatrix> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::invalid(format!("Walsh order {n} is not a power of two")));
    }
    let scale = 1.0 / (n as f64).sqrt();
    let matrix = DMatrix::from_fn(n, n, |k, j| {
        let h = sequency_to_natural(k, n);
        if (h & j).count_ones().is_multiple_of(2) {
            scale
        } else {
            -scale
        }
    });
    Ok(WalshMatrix { matrix })
}

pub fn dft_matrix(m: usize) -> Result<DftMatrix> {
    if m == 0 {
        return Err(Error::invalid("DFT order must be positive"));
    }
    let scale = 1.0 / (m as f64).sqrt();
    let matrix = DMatrix::from_fn(m, m, |r, c| {
        // reduce the exponent first to keep the phase argument small
        let k = (r * c) % m;
        C64::from_polar(scale, -2.0 * std::f64::consts::PI * k as f64 / m as f64)
    });
    Ok(DftMatrix { matrix })
}

/// Computes `(W (x) diag(g)) v` for an `N x N` matrix `W` and an `M`-sample
/// diagonal `g`, with `v` the column-major vectorization of an `M x N` block.
///
/// Equivalent to `vec(diag(g) V W^T)`; costs `O(MN (N + 1))`.
pub fn apply_kron(w: &DMatrix<f64>, g: &[f64], v: &[C64]) -> Result<Vec<C64>> {
    let n = w.nrows();
    if w.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: w.ncols(),
        });
    }
    let m = g.len();
    Error::check_len(m * n, v.len())?;
    let mut out = vec![C64::new(0.0, 0.0); m * n];
    for (k, block) in v.chunks_exact(m).enumerate() {
        for row in 0..n {
            let wk = w[(row, k)];
            if wk == 0.0 {
                continue;
            }
            let dst = &mut out[row * m..(row + 1) * m];
            for ((d, &s), &gi) in dst.iter_mut().zip(block).zip(g) {
                *d += s * (wk * gi);
            }
        }
    }
    Ok(out)
}

/// In-place orthonormal Walsh-Hadamard transform with sequency-ordered output.
pub fn fwht_sequency(v: &mut [C64]) {
    let n = v.len();
    assert!(n.is_power_of_two(), "FWHT length must be a power of two");
    let mut h = 1;
    while h < n {
        for i in (0..n).step_by(2 * h) {
            for j in i..i + h {
                let a = v[j];
                let b = v[j + h];
                v[j] = a + b;
                v[j + h] = a - b;
            }
        }
        h *= 2;
    }
    let natural = v.to_vec();
    let scale = 1.0 / (n as f64).sqrt();
    for (k, out) in v.iter_mut().enumerate() {
        *out = natural[sequency_to_natural(k, n)] * scale;
    }
}

/// Fast `(W_N (x) diag(g)) v` for the sequency Walsh matrix, using one
/// butterfly transform per delay bin.
pub fn apply_walsh_kron(g: &[f64], v: &[C64]) -> Result<Vec<C64>> {
    let m = g.len();
    if m == 0 || !v.len().is_multiple_of(m) {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: v.len(),
        });
    }
    let n = v.len() / m;
    if !n.is_power_of_two() {
        return Err(Error::invalid(format!("Walsh order {n} is not a power of two")));
    }
    let mut out = vec![C64::new(0.0, 0.0); m * n];
    let mut lane = vec![C64::new(0.0, 0.0); n];
    for (l, &gl) in g.iter().enumerate() {
        for (k, x) in lane.iter_mut().enumerate() {
            *x = v[l + k * m] * gl;
        }
        fwht_sequency(&mut lane);
        for (k, x) in lane.iter().enumerate() {
            out[l + k * m] = *x;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_normal, trial_rng};

    fn sign_changes(row: &[f64]) -> usize {
        row.windows(2).filter(|w| w[0].signum() != w[1].signum()).count()
    }

    /// Dense `W (x) diag(g)` used as the reference operator.
    fn dense_kron(w: &DMatrix<f64>, g: &[f64]) -> DMatrix<C64> {
        let n = w.nrows();
        let m = g.len();
        DMatrix::from_fn(m * n, m * n, |r, c| {
            let (bi, ri) = (r / m, r % m);
            let (bj, rj) = (c / m, c % m);
            if ri == rj {
                C64::new(w[(bi, bj)] * g[ri], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    #[test]
    fn small_walsh_matrices() {
        assert_eq!(walsh_matrix(1).unwrap().matrix()[(0, 0)], 1.0);
        let w2 = walsh_matrix(2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let expected = DMatrix::from_row_slice(2, 2, &[s, s, s, -s]);
        assert!((w2.matrix() - expected).abs().max() < 1e-15);

        let w4 = walsh_matrix(4).unwrap();
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|r| (0..4).map(|c| w4.matrix()[(r, c)] * 2.0).collect())
            .collect();
        assert_eq!(rows[0], vec![1.0, 1.0, 1.0, 1.0]);
        assert_eq!(rows[1], vec![1.0, 1.0, -1.0, -1.0]);
        assert_eq!(rows[2], vec![1.0, -1.0, -1.0, 1.0]);
        assert_eq!(rows[3], vec![1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn walsh_rejects_non_power_of_two() {
        assert!(walsh_matrix(0).is_err());
        assert!(walsh_matrix(6).is_err());
    }

    #[test]
    fn walsh_self_inverse_and_sequency_ordered() {
        for n in [2, 4, 8, 16, 32, 64] {
            let w = walsh_matrix(n).unwrap();
            let prod = w.matrix() * w.matrix();
            let err = (prod - DMatrix::<f64>::identity(n, n)).abs().max();
            assert!(err < 1e-12, "N={n}: {err}");
            for k in 0..n {
                let row: Vec<f64> = w.matrix().row(k).iter().copied().collect();
                assert_eq!(sign_changes(&row), k, "N={n} row {k}");
            }
        }
    }

    #[test]
    fn dft_small_and_unitary() {
        assert_eq!(dft_matrix(1).unwrap().matrix()[(0, 0)], C64::new(1.0, 0.0));
        let f2 = dft_matrix(2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((f2.matrix()[(1, 1)] - C64::new(-s, 0.0)).norm() < 1e-15);
        for m in [4, 5, 16] {
            let f = dft_matrix(m).unwrap();
            let prod = f.matrix() * f.matrix().adjoint();
            let err = (prod - DMatrix::<C64>::identity(m, m)).map(|z| z.norm()).max();
            assert!(err < 1e-12, "M={m}: {err}");
        }
    }

    #[test]
    fn kron_identity_is_noop() {
        let w = DMatrix::<f64>::identity(2, 2);
        let v: Vec<C64> = (0..6).map(|i| C64::new(i as f64, 1.0)).collect();
        assert_eq!(apply_kron(&w, &[1.0; 3], &v).unwrap(), v);
    }

    #[test]
    fn kron_matches_dense_oracle() {
        let mut rng = trial_rng(11, 0, 0);
        for &(m, n) in &[(2, 2), (3, 4), (4, 2), (8, 8), (5, 8)] {
            let w = walsh_matrix(n).unwrap();
            let g: Vec<f64> = (0..m).map(|i| 0.3 + 0.1 * i as f64).collect();
            let v: Vec<C64> = (0..m * n).map(|_| complex_normal(&mut rng, 1.0)).collect();
            let fast = apply_kron(w.matrix(), &g, &v).unwrap();
            let dense = dense_kron(w.matrix(), &g) * nalgebra::DVector::from_column_slice(&v);
            for (a, b) in fast.iter().zip(dense.iter()) {
                assert!((a - b).norm() < 1e-10);
            }
            let butterfly = apply_walsh_kron(&g, &v).unwrap();
            for (a, b) in fast.iter().zip(&butterfly) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn kron_inverse_window_round_trip() {
        let mut rng = trial_rng(12, 0, 0);
        let w = walsh_matrix(4).unwrap();
        let g = [0.5, 2.0, 0.25, 1.5];
        let g_inv: Vec<f64> = g.iter().map(|x| 1.0 / x).collect();
        let v: Vec<C64> = (0..16).map(|_| complex_normal(&mut rng, 1.0)).collect();
        let there = apply_kron(w.matrix(), &g, &v).unwrap();
        let back = apply_kron(w.matrix(), &g_inv, &there).unwrap();
        for (a, b) in back.iter().zip(&v) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn kron_dimension_mismatch() {
        let w = walsh_matrix(2).unwrap();
        assert!(matches!(
            apply_kron(w.matrix(), &[1.0; 3], &[C64::new(0.0, 0.0); 5]),
            Err(Error::DimensionMismatch { expected: 6, got: 5 })
        ));
    }
}
