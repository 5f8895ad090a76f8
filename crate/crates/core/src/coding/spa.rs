//! Flooding sum-product decoding in the LLR domain (`L = ln P0/P1`).

use super::ldpc::LdpcCode;
use crate::Result;
use crate::Error;

/// Magnitude cap for channel and check messages.
const MSG_CLIP: f64 = 30.0;
/// Keeps `atanh` finite when every incoming message is saturated.
const TANH_CLIP: f64 = 1.0 - 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct SpaOutput {
    /// Hard decisions on the posteriors.
    pub bits: Vec<u8>,
    /// Posterior LLRs.
    pub posterior: Vec<f64>,
    /// Posterior minus channel LLR, for the outer loop.
    pub extrinsic: Vec<f64>,
    /// All checks satisfied and every decision nonzero-confidence.
    pub converged: bool,
    /// Message-passing iterations actually run.
    pub iterations: usize,
}

fn hard(l: f64) -> u8 {
    u8::from(l < 0.0)
}

/// Decodes `llrs` with at most `max_iter` iterations, stopping early once
/// the hard decisions satisfy every check. `max_iter = 0` returns the
/// channel hard decisions.
///
/// A bit whose posterior is exactly zero is undecided, so an all-zero input
/// never reports convergence.
pub fn spa_decode(llrs: &[f64], code: &LdpcCode, max_iter: usize) -> Result<SpaOutput> {
    Error::check_len(code.n(), llrs.len())?;
    let channel: Vec<f64> = llrs.iter().map(|l| l.clamp(-MSG_CLIP, MSG_CLIP)).collect();
    let rows = code.check_rows();

    // edge layout: check-major, edge_start[i]..edge_start[i+1]
    let mut edge_start = Vec::with_capacity(rows.len() + 1);
    edge_start.push(0);
    for r in rows {
        edge_start.push(edge_start.last().unwrap() + r.len());
    }
    let edge_var: Vec<usize> = rows.iter().flatten().copied().collect();
    let mut c2v = vec![0.0; edge_var.len()];
    let mut posterior = channel.clone();
    let mut bits: Vec<u8> = posterior.iter().map(|&l| hard(l)).collect();
    let settled = |post: &[f64], bits: &[u8]| {
        code.unsatisfied(bits) == 0 && post.iter().all(|&l| l != 0.0)
    };
    let mut converged = settled(&posterior, &bits);
    let mut iterations = 0;
    let mut t = Vec::new();
    let mut prefix = Vec::new();

    while iterations < max_iter {
        iterations += 1;
        for (ci, r) in rows.iter().enumerate() {
            let span = edge_start[ci]..edge_start[ci + 1];
            t.clear();
            for e in span.clone() {
                // variable-to-check message excludes this check's own input
                let v2c = posterior[edge_var[e]] - c2v[e];
                t.push((v2c / 2.0).tanh());
            }
            // leave-one-out products via prefix/suffix scans
            prefix.clear();
            let mut acc = 1.0;
            for &x in &t {
                prefix.push(acc);
                acc *= x;
            }
            let mut suffix = 1.0;
            for k in (0..r.len()).rev() {
                let prod = (prefix[k] * suffix).clamp(-TANH_CLIP, TANH_CLIP);
                c2v[span.start + k] = (2.0 * prod.atanh()).clamp(-MSG_CLIP, MSG_CLIP);
                suffix *= t[k];
            }
        }
        posterior.copy_from_slice(&channel);
        for (e, &v) in edge_var.iter().enumerate() {
            posterior[v] += c2v[e];
        }
        for (b, &l) in bits.iter_mut().zip(&posterior) {
            *b = hard(l);
        }
        converged = settled(&posterior, &bits);
        if converged {
            break;
        }
    }
    let extrinsic = posterior.iter().zip(&channel).map(|(p, c)| p - c).collect();
    Ok(SpaOutput {
        bits,
        posterior,
        extrinsic,
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::ldpc::ldpc_construct;
    use crate::rng::{random_bits, trial_rng};
    use rand_distr::{Distribution, Normal};

    fn bpsk_llrs(cw: &[u8], amp: f64) -> Vec<f64> {
        cw.iter().map(|&b| if b == 0 { amp } else { -amp }).collect()
    }

    #[test]
    fn noiseless_converges_in_one_iteration() {
        let code = ldpc_construct(256, 0.5, 1).unwrap();
        let mut rng = trial_rng(1, 0, 0);
        let cw = code.encode(&random_bits(&mut rng, code.k())).unwrap();
        let out = spa_decode(&bpsk_llrs(&cw, f64::INFINITY), &code, 20).unwrap();
        assert_eq!(out.bits, cw);
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn zero_llrs_never_converge() {
        let code = ldpc_construct(128, 0.5, 1).unwrap();
        let out = spa_decode(&[0.0; 128], &code, 7).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 7);
    }

    #[test]
    fn zero_iterations_return_hard_decisions() {
        let code = ldpc_construct(128, 0.5, 1).unwrap();
        let mut rng = trial_rng(2, 0, 0);
        let llrs: Vec<f64> = (0..128).map(|_| rand::Rng::random_range(&mut rng, -3.0..3.0)).collect();
        let out = spa_decode(&llrs, &code, 0).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.posterior, llrs);
        for (b, l) in out.bits.iter().zip(&llrs) {
            assert_eq!(*b, u8::from(*l < 0.0));
        }
    }

    #[test]
    fn single_check_extrinsic_matches_box_plus() {
        // one parity check over 3 bits: extrinsic of bit 0 = 2 atanh(tanh(a/2) tanh(b/2))
        let code = LdpcCode::from_rows(3, vec![vec![0, 1, 2]]).unwrap();
        let l = [0.4, 1.5, -2.0];
        let out = spa_decode(&l, &code, 1).unwrap();
        let expect = 2.0 * ((1.5f64 / 2.0).tanh() * (-2.0f64 / 2.0).tanh()).atanh();
        assert!((out.extrinsic[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn awgn_decoding_reduces_bit_errors() {
        // BPSK at Eb/N0 = 3 dB, rate 1/2: Es/N0 = 0 dB, LLR = 2y/sigma^2
        let code = ldpc_construct(1024, 0.5, 11).unwrap();
        let ebn0 = 10f64.powf(0.3);
        let sigma2 = 1.0 / (2.0 * code.rate() * ebn0);
        let normal = Normal::new(0.0, sigma2.sqrt()).unwrap();
        let mut rng = trial_rng(3, 0, 0);
        let (mut before, mut after) = (0usize, 0usize);
        for _ in 0..20 {
            let cw = code.encode(&random_bits(&mut rng, code.k())).unwrap();
            let llrs: Vec<f64> = cw
                .iter()
                .map(|&b| {
                    let x = if b == 0 { 1.0 } else { -1.0 };
                    2.0 * (x + normal.sample(&mut rng)) / sigma2
                })
                .collect();
            before += llrs.iter().zip(&cw).filter(|(l, &b)| u8::from(**l < 0.0) != b).count();
            let out = spa_decode(&llrs, &code, 50).unwrap();
            after += out.bits.iter().zip(&cw).filter(|(a, b)| a != b).count();
        }
        assert!(after * 10 < before, "before {before} after {after}");
    }
}
