//! Pairwise error probabilities and the union bound on ML bit error rate.
//!
//! For a path-separable channel `H = sum_p h_p Upsilon_p`, the error vector
//! `e = x - x~` enters only through `Sigma(e) = [Upsilon_1 e ... Upsilon_P e]`
//! and its Gram matrix `Xi = Sigma(e)^H Sigma(e)`. With Chernoff CPEP
//! `exp(-eta / 4N0) / 2`, `eta = h^H Xi h`, averaging over `h ~ CN(mu, I/P)`
//! leaves a product over the nonzero eigenvalues of `Xi`.

use crate::channel::{draw_channel, draw_phn, ChannelRealization, PathTap, PhnRealization};
use crate::constellation::Constellation;
use crate::modem::Transceiver;
use crate::params::SystemParams;
use crate::{CMatrix, Error, Result, C64};
use nalgebra::{DVector, SymmetricEigen};
use rand::Rng;
use std::collections::BTreeMap;

/// Relative threshold on eigenvalues used to decide the rank of `Xi`.
pub const RANK_TOL: f64 = 1e-10;

/// Largest codebook the exact union bound will enumerate.
pub const EXACT_MAX_CODEWORDS: f64 = 1024.0;

/// `Upsilon_p = (W (x) G_rx) Theta Pi^delay Delta^beta (W (x) G_tx)`.
pub fn build_upsilon(tx: &Transceiver, delay: usize, beta: f64, phn: &PhnRealization) -> Result<CMatrix> {
    let unit = ChannelRealization {
        taps: vec![PathTap {
            gain: C64::new(1.0, 0.0),
            delay,
            doppler_int: beta.trunc() as i64,
            doppler_frac: beta - beta.trunc(),
        }],
    };
    Ok(tx.effective_channel(&unit, phn)?.h)
}

/// One `Upsilon_p` per path of `channel`; tap gains are ignored.
pub fn build_upsilons(tx: &Transceiver, channel: &ChannelRealization, phn: &PhnRealization) -> Result<Vec<CMatrix>> {
    channel
        .taps
        .iter()
        .map(|t| build_upsilon(tx, t.delay, t.beta(), phn))
        .collect()
}

/// `Sigma(x) = [Upsilon_1 x ... Upsilon_P x]`, `MN x P`.
#[derive(Debug, Clone, PartialEq)]
pub struct CodewordMatrix {
    pub sigma: CMatrix,
}

impl CodewordMatrix {
    pub fn new(upsilons: &[CMatrix], x: &[C64]) -> Result<Self> {
        let first = upsilons.first().ok_or_else(|| Error::invalid("no paths"))?;
        Error::check_len(first.ncols(), x.len())?;
        let xv = DVector::from_column_slice(x);
        let mut sigma = CMatrix::zeros(first.nrows(), upsilons.len());
        for (p, u) in upsilons.iter().enumerate() {
            sigma.set_column(p, &(u * &xv));
        }
        Ok(CodewordMatrix { sigma })
    }

    pub fn paths(&self) -> usize {
        self.sigma.ncols()
    }

    pub fn gram(&self) -> CMatrix {
        self.sigma.adjoint() * &self.sigma
    }
}

/// Eigen-structure of `Xi`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSpectrum {
    pub gram: CMatrix,
    /// All `P` eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors as columns, in the order of `eigenvalues`.
    pub eigenvectors: CMatrix,
    /// Number of eigenvalues above `tol * lambda_max`.
    pub rank: usize,
    /// `varsigma_i = <E[h], phi_i>` for the first `rank` eigenvectors.
    pub means: Vec<C64>,
    /// `xi_i = |varsigma_i|^2`.
    pub ricean: Vec<f64>,
}

impl DistanceSpectrum {
    /// Decomposes a Hermitian PSD Gram matrix, assuming zero-mean taps.
    pub fn from_gram(gram: CMatrix, tol: f64) -> Result<Self> {
        if gram.nrows() != gram.ncols() || gram.nrows() == 0 {
            return Err(Error::invalid("Gram matrix must be square and non-empty"));
        }
        let eig = SymmetricEigen::new(gram.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut eigenvectors = CMatrix::zeros(gram.nrows(), gram.ncols());
        for (dst, &src) in order.iter().enumerate() {
            eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        let rank = numerical_rank(&eigenvalues, tol);
        Ok(DistanceSpectrum {
            gram,
            eigenvalues,
            eigenvectors,
            rank,
            means: vec![C64::new(0.0, 0.0); rank],
            ricean: vec![0.0; rank],
        })
    }

    /// Sets the tap mean `E[h]`, filling `varsigma_i` and `xi_i`.
    pub fn with_mean(mut self, mean: &[C64]) -> Result<Self> {
        Error::check_len(self.gram.nrows(), mean.len())?;
        let mu = DVector::from_column_slice(mean);
        self.means = (0..self.rank)
            .map(|i| self.eigenvectors.column(i).dotc(&mu))
            .collect();
        self.ricean = self.means.iter().map(|s| s.norm_sqr()).collect();
        Ok(self)
    }

    /// The `rank` nonzero eigenvalues.
    pub fn positive_eigenvalues(&self) -> &[f64] {
        &self.eigenvalues[..self.rank]
    }

    /// `eta = h^H Xi h`.
    pub fn eta(&self, h: &[C64]) -> f64 {
        let hv = DVector::from_column_slice(h);
        hv.dotc(&(&self.gram * &hv)).re.max(0.0)
    }
}

fn numerical_rank(desc: &[f64], tol: f64) -> usize {
    let max = desc.first().copied().unwrap_or(0.0);
    if !(max > 0.0) {
        return 0;
    }
    desc.iter().take_while(|&&l| l > tol * max).count()
}

/// `Xi = Sigma(e)^H Sigma(e)` and its eigen-decomposition.
pub fn gram_and_spectrum(e: &[C64], upsilons: &[CMatrix], tol: f64) -> Result<DistanceSpectrum> {
    if e.iter().all(|v| *v == C64::new(0.0, 0.0)) {
        return Err(Error::invalid("error vector is zero; the pairwise error probability is 1/2 by convention"));
    }
    DistanceSpectrum::from_gram(CodewordMatrix::new(upsilons, e)?.gram(), tol)
}

/// Chernoff-bounded conditional PEP `exp(-eta / (4 N0)) / 2`.
pub fn cpep(eta: f64, n0: f64) -> f64 {
    0.5 * (-eta / (4.0 * n0)).exp()
}

/// Unconditional PEP averaged over `h ~ CN(mu, I/P)`.
pub fn upep(spec: &DistanceSpectrum, paths: usize, n0: f64) -> f64 {
    upep_from_eigenvalues(spec.positive_eigenvalues(), Some(&spec.ricean), paths, n0)
}

/// Same as [`upep`] from raw eigenvalues; `ricean = None` means Rayleigh.
pub fn upep_from_eigenvalues(lambdas: &[f64], ricean: Option<&[f64]>, paths: usize, n0: f64) -> f64 {
    let scale = 4.0 * paths as f64 * n0;
    let mut v = 0.5;
    for (i, &l) in lambdas.iter().enumerate() {
        let c = l / scale;
        let xi = ricean.map_or(0.0, |r| r[i]);
        v *= (-(xi * c) / (1.0 + c)).exp() / (1.0 + c);
    }
    v
}

/// High-SNR Rayleigh UPEP `(4 P N0)^r / (2 prod lambda_i)`.
pub fn upep_high_snr(spec: &DistanceSpectrum, paths: usize, n0: f64) -> Result<f64> {
    if spec.ricean.iter().any(|&x| x != 0.0) {
        return Err(Error::invalid("high-SNR UPEP holds only for zero-mean (Rayleigh) taps"));
    }
    Ok(upep_high_snr_from_eigenvalues(spec.positive_eigenvalues(), paths, n0))
}

pub fn upep_high_snr_from_eigenvalues(lambdas: &[f64], paths: usize, n0: f64) -> f64 {
    let scale = 4.0 * paths as f64 * n0;
    lambdas.iter().fold(0.5, |acc, &l| acc * scale / l)
}

/// Descending eigenvalues of a small Hermitian matrix, negatives clamped.
fn hermitian_eigenvalues(xi: &CMatrix) -> Vec<f64> {
    let mut v = match xi.nrows() {
        1 => vec![xi[(0, 0)].re],
        2 => {
            let (a, d) = (xi[(0, 0)].re, xi[(1, 1)].re);
            let b = xi[(0, 1)].norm_sqr();
            let mid = 0.5 * (a + d);
            let rad = (0.25 * (a - d) * (a - d) + b).sqrt();
            let top = mid + rad;
            let det = a * d - b;
            vec![top, if top > 0.0 { det / top } else { 0.0 }]
        }
        _ => SymmetricEigen::new(xi.clone()).eigenvalues.iter().copied().collect(),
    };
    v.sort_by(|a, b| b.total_cmp(a));
    for l in &mut v {
        *l = l.max(0.0);
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundMode {
    /// Every ordered codeword pair.
    Exact,
    /// Uniformly drawn ordered pairs `x != x~`, this many per realization.
    Sampled { pairs_per_realization: usize },
}

/// Union bound on a grid of noise powers.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub snr_db: Vec<f64>,
    pub n0: Vec<f64>,
    /// Union bound with the exact UPEP.
    pub bound: Vec<f64>,
    /// Union bound with the high-SNR UPEP.
    pub bound_high_snr: Vec<f64>,
    /// 95% half-width of `bound` in sampled mode; zero for exact mode.
    pub ci_half_width: Vec<f64>,
    /// Ordered pairs per realization (exact count or samples drawn).
    pub n_pairs: u64,
    pub n_realizations: usize,
    /// Smallest rank of `Xi` seen over all pairs and realizations.
    pub min_rank: usize,
}

/// Distinct symbol differences `a - b` with the number of ordered pairs
/// producing each and their summed label Hamming distance.
#[derive(Debug, Clone)]
struct DifferenceTable {
    diffs: Vec<C64>,
    count: Vec<f64>,
    dist_sum: Vec<f64>,
    zero: usize,
}

impl DifferenceTable {
    fn new(c: &Constellation) -> Self {
        let key = |z: C64| ((z.re * 1e9).round() as i64, (z.im * 1e9).round() as i64);
        let mut map: BTreeMap<(i64, i64), (C64, f64, f64)> = BTreeMap::new();
        for a in 0..c.order() {
            for b in 0..c.order() {
                let d = c.point(a) - c.point(b);
                let entry = map.entry(key(d)).or_insert((d, 0.0, 0.0));
                entry.1 += 1.0;
                entry.2 += (a ^ b).count_ones() as f64;
            }
        }
        let mut diffs = Vec::new();
        let mut count = Vec::new();
        let mut dist_sum = Vec::new();
        let mut zero = 0;
        for (k, (d, n, s)) in map {
            if k == (0, 0) {
                zero = diffs.len();
            }
            diffs.push(d);
            count.push(n);
            dist_sum.push(s);
        }
        DifferenceTable {
            diffs,
            count,
            dist_sum,
            zero,
        }
    }
}

fn check_grid(snr_db: &[f64]) -> Result<Vec<f64>> {
    if snr_db.is_empty() {
        return Err(Error::invalid("empty SNR grid"));
    }
    Ok(snr_db.iter().map(|&s| crate::params::n0_from_snr_db(s)).collect())
}

/// Union bound on BER averaged over `n_realizations` independent draws of
/// path geometry (delays, Dopplers) and phase noise. The tap gains are
/// averaged analytically by the UPEP.
pub fn union_bound<R: Rng + ?Sized>(
    params: &SystemParams,
    tx: &Transceiver,
    c: &Constellation,
    snr_db: &[f64],
    n_realizations: usize,
    mode: BoundMode,
    rng: &mut R,
) -> Result<BoundReport> {
    params.validate()?;
    Error::check_len(params.mn(), tx.mn())?;
    if c.order() != params.q {
        return Err(Error::invalid("constellation order differs from params.q"));
    }
    if n_realizations == 0 {
        return Err(Error::invalid("n_realizations must be positive"));
    }
    let n0 = check_grid(snr_db)?;
    let mn = params.mn();
    let l_bits = mn * c.bits_per_symbol();
    let codewords = (c.order() as f64).powi(mn as i32);
    if mode == BoundMode::Exact && codewords > EXACT_MAX_CODEWORDS {
        return Err(Error::Infeasible {
            candidates: codewords,
            limit: EXACT_MAX_CODEWORDS,
            hint: "use the sampled union bound for this many codewords",
        });
    }
    let g = snr_db.len();
    let mut bound = vec![0.0; g];
    let mut high = vec![0.0; g];
    let mut ci = vec![0.0; g];
    let mut min_rank = params.paths;
    let n_pairs = match mode {
        BoundMode::Exact => (codewords * (codewords - 1.0)) as u64,
        BoundMode::Sampled { pairs_per_realization } => pairs_per_realization as u64,
    };
    let mut sampled_terms: Vec<Vec<f64>> = vec![Vec::new(); g];

    // geometry first, so both modes see the same realizations for one seed
    let mut realizations = Vec::with_capacity(n_realizations);
    for _ in 0..n_realizations {
        let channel = draw_channel(params, rng)?;
        let phn = draw_phn(params.sigma2_phn, params.phn_unit, mn, params.theta0, rng)?;
        realizations.push(build_upsilons(tx, &channel, &phn)?);
    }
    for ups in &realizations {
        match mode {
            BoundMode::Exact => {
                let (b, h, r) = exact_realization(ups, c, &n0, params.paths)?;
                min_rank = min_rank.min(r);
                for i in 0..g {
                    bound[i] += b[i] / (l_bits as f64 * codewords);
                    high[i] += h[i] / (l_bits as f64 * codewords);
                }
            }
            BoundMode::Sampled { pairs_per_realization } => {
                if pairs_per_realization == 0 {
                    return Err(Error::invalid("sampled bound needs at least one pair"));
                }
                let factor = (codewords - 1.0) / l_bits as f64;
                for _ in 0..pairs_per_realization {
                    let x: Vec<usize> = (0..mn).map(|_| rng.random_range(0..c.order())).collect();
                    let mut xt = x.clone();
                    while xt == x {
                        for v in &mut xt {
                            *v = rng.random_range(0..c.order());
                        }
                    }
                    let d: usize = x.iter().zip(&xt).map(|(a, b)| (a ^ b).count_ones() as usize).sum();
                    let e: Vec<C64> = x.iter().zip(&xt).map(|(&a, &b)| c.point(a) - c.point(b)).collect();
                    let gram = CodewordMatrix::new(ups, &e)?.gram();
                    let lam = hermitian_eigenvalues(&gram);
                    let r = numerical_rank(&lam, RANK_TOL);
                    min_rank = min_rank.min(r);
                    for i in 0..g {
                        let u = upep_from_eigenvalues(&lam[..r], None, params.paths, n0[i]);
                        let uh = upep_high_snr_from_eigenvalues(&lam[..r], params.paths, n0[i]);
                        sampled_terms[i].push(factor * u * d as f64);
                        high[i] += factor * uh * d as f64;
                    }
                }
            }
        }
    }
    if let BoundMode::Sampled { pairs_per_realization } = mode {
        let total = (n_realizations * pairs_per_realization) as f64;
        for i in 0..g {
            let terms = &sampled_terms[i];
            let mean = terms.iter().sum::<f64>() / total;
            let var = terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (total - 1.0).max(1.0);
            bound[i] = mean;
            high[i] /= total;
            ci[i] = 1.96 * (var / total).sqrt();
        }
    } else {
        for i in 0..g {
            bound[i] /= n_realizations as f64;
            high[i] /= n_realizations as f64;
        }
    }
    Ok(BoundReport {
        snr_db: snr_db.to_vec(),
        n0,
        bound,
        bound_high_snr: high,
        ci_half_width: ci,
        n_pairs,
        n_realizations,
        min_rank,
    })
}

/// Sum over all ordered pairs of `UPEP * d` for one realization, grouped by
/// distinct error vector. Returns (exact sums, high-SNR sums, minimum rank).
fn exact_realization(
    ups: &[CMatrix],
    c: &Constellation,
    n0: &[f64],
    paths: usize,
) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let table = DifferenceTable::new(c);
    let mn = ups[0].ncols();
    let p = ups.len();
    let base = table.diffs.len();
    let mut digits = vec![0usize; mn];
    let mut e = vec![C64::new(0.0, 0.0); mn];
    let mut v = CMatrix::zeros(ups[0].nrows(), p);
    let mut sums = vec![0.0; n0.len()];
    let mut high = vec![0.0; n0.len()];
    let mut min_rank = p;
    loop {
        if digits.iter().any(|&d| d != table.zero) {
            let mut count = 1.0;
            let mut ratio = 0.0;
            for (j, &d) in digits.iter().enumerate() {
                count *= table.count[d];
                ratio += table.dist_sum[d] / table.count[d];
                e[j] = table.diffs[d];
            }
            let weight = count * ratio;
            // recomputed from scratch so that nulled components stay exactly zero
            v.fill(C64::new(0.0, 0.0));
            for (q, u) in ups.iter().enumerate() {
                let mut col = v.column_mut(q);
                for (j, &ej) in e.iter().enumerate() {
                    if ej != C64::new(0.0, 0.0) {
                        col.axpy(ej, &u.column(j), C64::new(1.0, 0.0));
                    }
                }
            }
            let gram = v.adjoint() * &v;
            let lam = hermitian_eigenvalues(&gram);
            let r = numerical_rank(&lam, RANK_TOL);
            min_rank = min_rank.min(r);
            for (i, &n) in n0.iter().enumerate() {
                sums[i] += weight * upep_from_eigenvalues(&lam[..r], None, paths, n);
                high[i] += weight * upep_high_snr_from_eigenvalues(&lam[..r], paths, n);
            }
        }
        let mut pos = 0;
        loop {
            if pos == mn {
                return Ok((sums, high, min_rank));
            }
            digits[pos] = (digits[pos] + 1) % base;
            if digits[pos] != 0 {
                break;
            }
            pos += 1;
        }
    }
}

/// Reference union bound for one realization by direct enumeration of every
/// ordered codeword pair. Quadratic in the codebook size; meant for checking.
pub fn union_bound_naive(ups: &[CMatrix], c: &Constellation, n0: f64) -> Result<f64> {
    let mn = ups[0].ncols();
    let q = c.order();
    let total = q.pow(mn as u32);
    let l_bits = mn * c.bits_per_symbol();
    let labels = |mut idx: usize| -> Vec<usize> {
        (0..mn)
            .map(|_| {
                let l = idx % q;
                idx /= q;
                l
            })
            .collect()
    };
    let mut acc = 0.0;
    for a in 0..total {
        let la = labels(a);
        for b in 0..total {
            if a == b {
                continue;
            }
            let lb = labels(b);
            let d: usize = la.iter().zip(&lb).map(|(x, y)| (x ^ y).count_ones() as usize).sum();
            let e: Vec<C64> = la.iter().zip(&lb).map(|(&x, &y)| c.point(x) - c.point(y)).collect();
            let spec = gram_and_spectrum(&e, ups, RANK_TOL);
            let u = match spec {
                Ok(s) => upep(&s, ups.len(), n0),
                Err(_) => 0.5,
            };
            acc += u * d as f64;
        }
    }
    Ok(acc / (l_bits as f64 * total as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::time_domain_channel;
    use crate::constellation::build_constellation;
    use crate::params::Theta0;
    use crate::rng::{complex_normal, trial_rng};
    use crate::windows::{sample_window, WindowKind};

    fn transceiver(kind: WindowKind, m: usize, n: usize) -> Transceiver {
        let w = sample_window(kind, m, 1.0).unwrap();
        Transceiver::new(n, w.clone(), w).unwrap()
    }

    fn random_e(rng: &mut impl Rng, c: &Constellation, mn: usize) -> Vec<C64> {
        loop {
            let e: Vec<C64> = (0..mn)
                .map(|_| c.point(rng.random_range(0..c.order())) - c.point(rng.random_range(0..c.order())))
                .collect();
            if e.iter().any(|v| v.norm() > 0.0) {
                return e;
            }
        }
    }

    #[test]
    fn identity_geometry_gives_identity() {
        let tx = transceiver(WindowKind::Rectangular, 4, 2);
        let u = build_upsilon(&tx, 0, 0.0, &PhnRealization::none(8)).unwrap();
        assert!((u - CMatrix::identity(8, 8)).map(|z| z.norm()).max() < 1e-12);
    }

    #[test]
    fn upsilons_reconstruct_effective_channel() {
        let mut params = SystemParams::mld_reference();
        params.fractional_doppler = true;
        let mut rng = trial_rng(21, 0, 0);
        for kind in WindowKind::ALL {
            let tx = transceiver(kind, 4, 2);
            let ch = draw_channel(&params, &mut rng).unwrap();
            let phn = draw_phn(3.0, params.phn_unit, 8, Theta0::Uniform, &mut rng).unwrap();
            let h = tx.effective_channel(&ch, &phn).unwrap().h;
            let ups = build_upsilons(&tx, &ch, &phn).unwrap();
            let mut sum = CMatrix::zeros(8, 8);
            for (t, u) in ch.taps.iter().zip(&ups) {
                sum += u * t.gain;
            }
            assert!((sum - h).norm() < 1e-10, "{kind}");
        }
        // and the time-domain matrix agrees on the rect, PHN-free case
        let tx = transceiver(WindowKind::Rectangular, 4, 2);
        let ch = draw_channel(&params, &mut rng).unwrap();
        assert!(time_domain_channel(&ch, 8).norm() > 0.0);
        let _ = tx;
    }

    #[test]
    fn single_path_gram_is_scalar_norm() {
        let tx = transceiver(WindowKind::Hamming, 4, 2);
        let c = build_constellation(2).unwrap();
        let mut rng = trial_rng(22, 0, 0);
        let ups = vec![build_upsilon(&tx, 1, 0.3, &PhnRealization::none(8)).unwrap()];
        let e = random_e(&mut rng, &c, 8);
        let s = gram_and_spectrum(&e, &ups, RANK_TOL).unwrap();
        let direct = (&ups[0] * DVector::from_column_slice(&e)).norm_squared();
        assert_eq!(s.rank, 1);
        assert!((s.eigenvalues[0] - direct).abs() < 1e-10);
    }

    #[test]
    fn duplicate_geometry_is_rank_one() {
        let tx = transceiver(WindowKind::Rectangular, 4, 2);
        let u = build_upsilon(&tx, 2, -1.0, &PhnRealization::none(8)).unwrap();
        let c = build_constellation(2).unwrap();
        let e = random_e(&mut trial_rng(23, 0, 0), &c, 8);
        assert_eq!(gram_and_spectrum(&e, &[u.clone(), u], RANK_TOL).unwrap().rank, 1);
    }

    #[test]
    fn eta_dual_computation_and_psd() {
        let params = SystemParams::mld_reference();
        let c = build_constellation(2).unwrap();
        let tx = transceiver(WindowKind::Blackman, 4, 2);
        let mut rng = trial_rng(24, 0, 0);
        for _ in 0..100 {
            let ch = draw_channel(&params, &mut rng).unwrap();
            let phn = draw_phn(0.3, params.phn_unit, 8, Theta0::Uniform, &mut rng).unwrap();
            let ups = build_upsilons(&tx, &ch, &phn).unwrap();
            let e = random_e(&mut rng, &c, 8);
            let Ok(s) = gram_and_spectrum(&e, &ups, RANK_TOL) else { continue };
            let h: Vec<C64> = (0..2).map(|_| complex_normal(&mut rng, 0.5)).collect();
            let sigma = CodewordMatrix::new(&ups, &e).unwrap().sigma;
            let direct = (&sigma * DVector::from_column_slice(&h)).norm_squared();
            assert!((s.eta(&h) - direct).abs() < 1e-10 * direct.max(1.0));
            let lmax = s.eigenvalues[0];
            assert!(s.eigenvalues.iter().all(|&l| l >= -1e-10 * lmax));
            // Xi(-e) = Xi(e)
            let neg: Vec<C64> = e.iter().map(|v| -v).collect();
            let s2 = gram_and_spectrum(&neg, &ups, RANK_TOL).unwrap();
            assert!((s2.gram - &s.gram).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_error_vector_rejected() {
        let tx = transceiver(WindowKind::Rectangular, 4, 2);
        let u = build_upsilon(&tx, 0, 0.0, &PhnRealization::none(8)).unwrap();
        assert!(gram_and_spectrum(&[C64::new(0.0, 0.0); 8], &[u], RANK_TOL).is_err());
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(cpep(0.0, 0.1), 0.5);
        assert!((cpep(0.4, 0.1) - 0.5 * (-1.0f64).exp()).abs() < 1e-15);
        assert!(cpep(1.0, 0.1) < cpep(0.5, 0.1));
        // r = 1, xi = 0, lambda / 4PN0 = 1
        assert!((upep_from_eigenvalues(&[0.8], None, 2, 0.1) - 0.25).abs() < 1e-15);
        assert!((upep_high_snr_from_eigenvalues(&[1.0], 1, 0.0025) - 0.005).abs() < 1e-15);
        let a = upep_high_snr_from_eigenvalues(&[0.3, 0.7], 2, 1e-3);
        let b = upep_high_snr_from_eigenvalues(&[0.6, 1.4], 2, 1e-3);
        assert!((a / b - 4.0).abs() < 1e-12);
        assert_eq!(upep_from_eigenvalues(&[], None, 2, 0.1), 0.5);
    }

    #[test]
    fn ricean_branch() {
        let gram = CMatrix::from_diagonal(&DVector::from_vec(vec![C64::new(2.0, 0.0), C64::new(0.5, 0.0)]));
        let spec = DistanceSpectrum::from_gram(gram, RANK_TOL).unwrap();
        let rayleigh = upep(&spec, 2, 0.1);
        assert!((rayleigh - upep_from_eigenvalues(&[2.0, 0.5], None, 2, 0.1)).abs() < 1e-15);
        let spec = spec.with_mean(&[C64::new(0.5, 0.0), C64::new(0.0, 0.0)]).unwrap();
        assert!((spec.ricean[0] - 0.25).abs() < 1e-12);
        let c0: f64 = 2.0 / 0.8;
        let c1 = 0.5 / 0.8;
        let expect = 0.5 / (1.0 + c0) * (-(0.25 * c0) / (1.0 + c0)).exp() / (1.0 + c1);
        assert!((upep(&spec, 2, 0.1) - expect).abs() < 1e-14);
        assert!(upep_high_snr(&spec, 2, 0.1).is_err());
    }

    #[test]
    fn upep_range_and_monotonicity() {
        let mut rng = trial_rng(25, 0, 0);
        for _ in 0..1000 {
            let l1: f64 = rng.random_range(1e-6..10.0);
            let l2: f64 = rng.random_range(1e-6..l1);
            let n0 = 10f64.powf(rng.random_range(-5.0..1.0));
            let u = upep_from_eigenvalues(&[l1, l2], None, 2, n0);
            assert!(u > 0.0 && u <= 0.5);
            assert!(upep_from_eigenvalues(&[l1 * 1.1, l2], None, 2, n0) < u);
        }
    }

    #[test]
    fn grouped_enumeration_matches_pairwise() {
        let params = SystemParams::mld_reference();
        let mut rng = trial_rng(26, 0, 0);
        for (q, m, n, kind) in [
            (2, 4, 2, WindowKind::Rectangular),
            (2, 4, 2, WindowKind::Hamming),
            (4, 2, 2, WindowKind::Rectangular),
        ] {
            let c = build_constellation(q).unwrap();
            let tx = transceiver(kind, m, n);
            let mut p = params.clone();
            p.m = m;
            p.n = n;
            p.l_max = m - 1;
            let ch = draw_channel(&p, &mut rng).unwrap();
            let phn = draw_phn(0.3, p.phn_unit, m * n, Theta0::Uniform, &mut rng).unwrap();
            let ups = build_upsilons(&tx, &ch, &phn).unwrap();
            for n0 in [0.3, 0.01] {
                let naive = union_bound_naive(&ups, &c, n0).unwrap();
                let (s, _, _) = exact_realization(&ups, &c, &[n0], 2).unwrap();
                let l = (m * n * c.bits_per_symbol()) as f64;
                let grouped = s[0] / (l * (q as f64).powi((m * n) as i32));
                assert!((grouped - naive).abs() < 1e-9 * naive, "Q={q} {kind}: {grouped} vs {naive}");
            }
        }
    }

    #[test]
    fn exact_pair_count_and_infeasible_guard() {
        let params = SystemParams::mld_reference();
        let c = build_constellation(2).unwrap();
        let tx = transceiver(WindowKind::Rectangular, 4, 2);
        let mut rng = trial_rng(27, 0, 0);
        let r = union_bound(&params, &tx, &c, &[10.0, 20.0], 2, BoundMode::Exact, &mut rng).unwrap();
        assert_eq!(r.n_pairs, 256 * 255);
        assert!(r.bound[1] < r.bound[0]);

        let mut big = SystemParams::spectrum_reference();
        big.snr_db = vec![10.0];
        let c4 = build_constellation(4).unwrap();
        let tx16 = transceiver(WindowKind::Rectangular, 16, 16);
        assert!(matches!(
            union_bound(&big, &tx16, &c4, &[10.0], 1, BoundMode::Exact, &mut rng),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn sampled_agrees_with_exact() {
        let params = SystemParams::mld_reference();
        let c = build_constellation(2).unwrap();
        let tx = transceiver(WindowKind::Rectangular, 4, 2);
        let snr = [8.0, 16.0];
        let exact = union_bound(&params, &tx, &c, &snr, 20, BoundMode::Exact, &mut trial_rng(28, 0, 0)).unwrap();
        let sampled = union_bound(
            &params,
            &tx,
            &c,
            &snr,
            20,
            BoundMode::Sampled { pairs_per_realization: 4000 },
            &mut trial_rng(28, 0, 0),
        )
        .unwrap();
        for i in 0..snr.len() {
            let gap = (exact.bound[i] - sampled.bound[i]).abs();
            assert!(gap < 1.5 * sampled.ci_half_width[i] + 1e-12, "{gap} vs {}", sampled.ci_half_width[i]);
        }
    }
}
