//! Maximum-likelihood and soft-output LMMSE detection for `y = H x + n`.
//!
//! LLRs use the convention `L = ln P(b=0) / P(b=1)`.

use crate::constellation::Constellation;
use crate::{CMatrix, Error, Result, C64};
use nalgebra::DVector;

/// Largest candidate count the exhaustive detector will visit.
pub const MLD_MAX_CANDIDATES: f64 = (1u64 << 20) as f64;

/// Clip applied to every extrinsic LLR.
pub const LLR_CLIP: f64 = 30.0;

/// Exhaustive ML detection: returns the constellation labels minimizing
/// `||y - H x||^2`.
///
/// Candidates are visited in increasing index `sum_i label_i Q^i`; the first
/// minimum wins, so ties resolve to the lowest index. The residual is updated
/// one column at a time as the odometer advances.
pub fn mld(y: &[C64], h: &CMatrix, c: &Constellation) -> Result<Vec<usize>> {
    let rows = h.nrows();
    let cols = h.ncols();
    Error::check_len(rows, y.len())?;
    let q = c.order();
    let candidates = (q as f64).powi(cols as i32);
    if candidates > MLD_MAX_CANDIDATES {
        return Err(Error::Infeasible {
            candidates,
            limit: MLD_MAX_CANDIDATES,
            hint: "use the LMMSE detector for frames this large",
        });
    }
    let points = c.points();
    let mut labels = vec![0usize; cols];
    let mut residual: Vec<C64> = y.to_vec();
    for col in 0..cols {
        let a = points[0];
        for (r, hv) in residual.iter_mut().zip(h.column(col).iter()) {
            *r -= hv * a;
        }
    }
    let metric = |res: &[C64]| res.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let mut best = labels.clone();
    let mut best_metric = metric(&residual);
    loop {
        // advance the odometer, updating the residual for each changed digit
        let mut pos = 0;
        loop {
            if pos == cols {
                return Ok(best);
            }
            let old = points[labels[pos]];
            labels[pos] = (labels[pos] + 1) % q;
            let delta = points[labels[pos]] - old;
            for (r, hv) in residual.iter_mut().zip(h.column(pos).iter()) {
                *r -= hv * delta;
            }
            if labels[pos] != 0 {
                break;
            }
            pos += 1;
        }
        let d = metric(&residual);
        if d < best_metric {
            best_metric = d;
            best.copy_from_slice(&labels);
        }
    }
}

/// Per-symbol Gaussian priors derived from bit LLRs.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolPriors {
    pub mean: Vec<C64>,
    pub variance: Vec<f64>,
    /// Bit LLRs the moments were computed from, `bits_per_symbol` per symbol.
    pub bit_llrs: Vec<f64>,
}

impl SymbolPriors {
    /// Zero-mean unit-variance priors with no bit information.
    pub fn uninformative(symbols: usize, c: &Constellation) -> Self {
        SymbolPriors {
            mean: vec![C64::new(0.0, 0.0); symbols],
            variance: vec![1.0; symbols],
            bit_llrs: vec![0.0; symbols * c.bits_per_symbol()],
        }
    }

    /// Soft bit-to-symbol conversion: symbol probabilities from independent
    /// bit LLRs, then mean and variance.
    pub fn from_bit_llrs(bit_llrs: &[f64], c: &Constellation) -> Result<Self> {
        let k = c.bits_per_symbol();
        if !bit_llrs.len().is_multiple_of(k) {
            return Err(Error::invalid("bit LLR count is not a multiple of bits per symbol"));
        }
        let mut mean = Vec::with_capacity(bit_llrs.len() / k);
        let mut variance = Vec::with_capacity(bit_llrs.len() / k);
        for llrs in bit_llrs.chunks(k) {
            let probs = label_probabilities(llrs, c);
            let mu: C64 = probs.iter().zip(c.points()).map(|(p, a)| a * *p).sum();
            let e2: f64 = probs.iter().zip(c.points()).map(|(p, a)| p * a.norm_sqr()).sum();
            mean.push(mu);
            variance.push((e2 - mu.norm_sqr()).max(1e-12));
        }
        Ok(SymbolPriors {
            mean,
            variance,
            bit_llrs: bit_llrs.to_vec(),
        })
    }
}

/// Label probabilities from independent bit LLRs.
fn label_probabilities(llrs: &[f64], c: &Constellation) -> Vec<f64> {
    let log_p: Vec<f64> = (0..c.order())
        .map(|label| {
            llrs.iter()
                .enumerate()
                .map(|(b, &l)| {
                    // ln P(bit) = -ln(1 + e^{-+L})
                    let signed = if c.label_bit(label, b) == 0 { l } else { -l };
                    -softplus(-signed)
                })
                .sum()
        })
        .collect();
    let max = log_p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_p.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Extrinsic bit LLRs of one symbol observed as `z = x + w`, `w ~ CN(0, var)`,
/// using the prior LLRs of the other bits of the same symbol.
pub fn symbol_to_bit_llrs(z: C64, var: f64, prior_llrs: &[f64], c: &Constellation) -> Vec<f64> {
    let k = c.bits_per_symbol();
    let metric: Vec<f64> = c.points().iter().map(|a| -(z - a).norm_sqr() / var).collect();
    (0..k)
        .map(|bit| {
            let term = |label: usize| {
                let others: f64 = (0..k)
                    .filter(|&j| j != bit)
                    .map(|j| {
                        if c.label_bit(label, j) == 0 {
                            prior_llrs[j] / 2.0
                        } else {
                            -prior_llrs[j] / 2.0
                        }
                    })
                    .sum();
                metric[label] + others
            };
            let zero = log_sum_exp((0..c.order()).filter(|&l| c.label_bit(l, bit) == 0).map(term));
            let one = log_sum_exp((0..c.order()).filter(|&l| c.label_bit(l, bit) == 1).map(term));
            (zero - one).clamp(-LLR_CLIP, LLR_CLIP)
        })
        .collect()
}

/// LMMSE detector output.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftOutput {
    /// Posterior means `x_hat`.
    pub estimates: Vec<C64>,
    /// Diagonal of the error covariance.
    pub variances: Vec<f64>,
    /// Posterior bit LLRs (`extrinsic + prior`).
    pub llrs: Vec<f64>,
    /// Extrinsic bit LLRs, clipped to `+-LLR_CLIP`.
    pub extrinsic: Vec<f64>,
    /// Symbols the channel does not observe at all.
    pub unobserved: usize,
}

impl SoftOutput {
    /// Hard bit decisions from the posterior LLRs.
    pub fn hard_bits(&self) -> Vec<u8> {
        self.llrs.iter().map(|&l| u8::from(l < 0.0)).collect()
    }
}

/// Soft LMMSE equalization with optional priors.
///
/// With `A = H D H^H + n0 I` and `D = diag(prior variances)`:
/// `x_hat = m + D H^H A^{-1} (y - H m)`, error variances
/// `v_i - v_i^2 h_i^H A^{-1} h_i`. The extrinsic observation of symbol `i` is
/// `z_i = m_i + h_i^H A^{-1}(y - H m) / g_i` with variance `1/g_i - v_i`,
/// `g_i = h_i^H A^{-1} h_i`, which excludes the symbol's own prior.
pub fn lmmse(
    y: &[C64],
    h: &CMatrix,
    n0: f64,
    c: &Constellation,
    priors: Option<&SymbolPriors>,
) -> Result<SoftOutput> {
    let rows = h.nrows();
    let cols = h.ncols();
    Error::check_len(rows, y.len())?;
    if !(n0 > 0.0) {
        return Err(Error::invalid("LMMSE needs a positive noise power"));
    }
    let k = c.bits_per_symbol();
    let default;
    let priors = match priors {
        Some(p) => {
            Error::check_len(cols, p.mean.len())?;
            Error::check_len(cols * k, p.bit_llrs.len())?;
            p
        }
        None => {
            default = SymbolPriors::uninformative(cols, c);
            &default
        }
    };
    let mut hd = h.clone();
    for (j, mut col) in hd.column_iter_mut().enumerate() {
        col *= C64::new(priors.variance[j], 0.0);
    }
    let mut a = &hd * h.adjoint();
    for i in 0..rows {
        a[(i, i)] += C64::new(n0, 0.0);
    }
    let chol = nalgebra::Cholesky::new(a)
        .ok_or_else(|| Error::Singular("LMMSE covariance is not positive definite".into()))?;
    let mean = DVector::from_column_slice(&priors.mean);
    let resid = DVector::from_column_slice(y) - h * &mean;
    let u = chol.solve(&resid);
    let z = chol.solve(h);

    let mut estimates = Vec::with_capacity(cols);
    let mut variances = Vec::with_capacity(cols);
    let mut extrinsic = Vec::with_capacity(cols * k);
    let mut unobserved = 0;
    let g_floor = 1e-12 * (1.0 / n0);
    for i in 0..cols {
        let hi = h.column(i);
        let g = hi.dotc(&z.column(i)).re;
        let corr = hi.dotc(&u);
        let v = priors.variance[i];
        estimates.push(priors.mean[i] + corr * v);
        variances.push((v - v * v * g).max(1e-15));
        let prior_bits = &priors.bit_llrs[i * k..(i + 1) * k];
        if g <= g_floor {
            unobserved += 1;
            extrinsic.extend(std::iter::repeat_n(0.0, k));
            continue;
        }
        let z_i = priors.mean[i] + corr / g;
        let var_e = (1.0 / g - v).max(1e-12);
        extrinsic.extend(symbol_to_bit_llrs(z_i, var_e, prior_bits, c));
    }
    if unobserved == cols {
        return Err(Error::Singular(
            "no symbol is observed through this channel (window nulls the link)".into(),
        ));
    }
    let llrs = extrinsic
        .iter()
        .zip(&priors.bit_llrs)
        .map(|(e, p)| e + p)
        .collect();
    Ok(SoftOutput {
        estimates,
        variances,
        llrs,
        extrinsic,
        unobserved,
    })
}
