//! Doubly-selective multipath channel and Wiener phase noise.
//!
//! The time-domain channel is `H_T = sum_p h_p Pi^{l_p} Delta^{beta_p}` where
//! `Pi` is the forward cyclic shift (`(Pi s)[q] = s[q-1 mod MN]`) and
//! `Delta = diag(exp(j 2 pi q / MN))`. No guard samples are inserted, so the
//! delay wraps cyclically across the frame.

use crate::params::{DopplerLimit, PhnUnit, SystemParams, Theta0, SPEED_OF_LIGHT};
use crate::rng::complex_normal;
use crate::{CMatrix, Error, Result, C64};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathTap {
    pub gain: C64,
    /// Integer delay index `l_p`.
    pub delay: usize,
    /// Integer Doppler index `k_p`.
    pub doppler_int: i64,
    /// Fractional Doppler `kappa_p` in `[-1/2, 1/2]`.
    pub doppler_frac: f64,
}

impl PathTap {
    /// Normalized Doppler `beta_p = k_p + kappa_p`.
    pub fn beta(&self) -> f64 {
        self.doppler_int as f64 + self.doppler_frac
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub taps: Vec<PathTap>,
}

/// Maximum integer Doppler index.
///
/// From speed: `ceil(nu_max N T)` with `nu_max = f_c v / c`.
pub fn doppler_limit(params: &SystemParams) -> Result<usize> {
    match params.doppler {
        DopplerLimit::Explicit(k) => Ok(k),
        DopplerLimit::FromSpeed { v_max_kmh } => {
            if !(v_max_kmh >= 0.0) || !(params.f_c >= 0.0) || !(params.delta_f > 0.0) {
                return Err(Error::invalid("speed-derived Doppler needs v_max >= 0, f_c >= 0, delta_f > 0"));
            }
            let nu_max = params.f_c * (v_max_kmh / 3.6) / SPEED_OF_LIGHT;
            Ok((nu_max * params.frame_duration()).ceil() as usize)
        }
    }
}

/// Draws `P` taps: `h_p ~ CN(0, 1/P)`, `l_1 = 0`, further delays uniform on
/// `{0..l_max}`, integer Doppler uniform on `{-k_max..k_max}`, fractional
/// part uniform on `[-1/2, 1/2]` when enabled.
pub fn draw_channel<R: Rng + ?Sized>(params: &SystemParams, rng: &mut R) -> Result<ChannelRealization> {
    if params.paths == 0 {
        return Err(Error::invalid("at least one path is required"));
    }
    if params.l_max >= params.m {
        return Err(Error::invalid("l_max must be at most M-1"));
    }
    let k_max = doppler_limit(params)? as i64;
    let var = 1.0 / params.paths as f64;
    let taps = (0..params.paths)
        .map(|p| {
            let gain = complex_normal(rng, var);
            let delay = if p == 0 { 0 } else { rng.random_range(0..=params.l_max) };
            let doppler_int = rng.random_range(-k_max..=k_max);
            let doppler_frac = if params.fractional_doppler {
                rng.random_range(-0.5..=0.5)
            } else {
                0.0
            };
            PathTap {
                gain,
                delay,
                doppler_int,
                doppler_frac,
            }
        })
        .collect();
    Ok(ChannelRealization { taps })
}

/// Diagonal of `Delta^beta`, valid for fractional `beta`.
pub fn doppler_diagonal(beta: f64, mn: usize) -> Vec<C64> {
    (0..mn)
        .map(|q| C64::from_polar(1.0, 2.0 * PI * beta * q as f64 / mn as f64))
        .collect()
}

/// `Pi^delay Delta^beta v` without forming the matrix.
pub fn shift_doppler_apply(delay: usize, beta: f64, v: &[C64]) -> Vec<C64> {
    let mn = v.len();
    let phases = doppler_diagonal(beta, mn);
    (0..mn)
        .map(|q| {
            let src = (q + mn - delay % mn) % mn;
            phases[src] * v[src]
        })
        .collect()
}

impl ChannelRealization {
    /// Matrix-free `H_T s`.
    pub fn apply(&self, s: &[C64]) -> Vec<C64> {
        let mn = s.len();
        let mut out = vec![C64::new(0.0, 0.0); mn];
        for tap in &self.taps {
            for (o, v) in out.iter_mut().zip(shift_doppler_apply(tap.delay, tap.beta(), s)) {
                *o += tap.gain * v;
            }
        }
        out
    }

    pub fn num_paths(&self) -> usize {
        self.taps.len()
    }
}

/// Dense `H_T` (`MN x MN`).
pub fn time_domain_channel(real: &ChannelRealization, mn: usize) -> CMatrix {
    let mut h = CMatrix::zeros(mn, mn);
    for tap in &real.taps {
        let phases = doppler_diagonal(tap.beta(), mn);
        for col in 0..mn {
            let row = (col + tap.delay) % mn;
            h[(row, col)] += tap.gain * phases[col];
        }
    }
    h
}

/// Wiener phase process `theta(q) = theta(q-1) + delta`, radians.
#[derive(Debug, Clone, PartialEq)]
pub struct PhnRealization {
    pub theta: Vec<f64>,
}

impl PhnRealization {
    /// No phase noise: `Theta = I`.
    pub fn none(mn: usize) -> Self {
        PhnRealization { theta: vec![0.0; mn] }
    }

    /// Diagonal of `Theta`.
    pub fn diagonal(&self) -> Vec<C64> {
        self.theta.iter().map(|&t| C64::from_polar(1.0, t)).collect()
    }

    /// Same process with the drift removed, keeping only `theta(0)`.
    pub fn common_phase(&self) -> PhnRealization {
        let t0 = self.theta.first().copied().unwrap_or(0.0);
        PhnRealization {
            theta: vec![t0; self.theta.len()],
        }
    }
}

/// Draws a phase trajectory of `mn` samples. `sigma2` is interpreted per
/// `unit`; increments are zero-mean Gaussian.
pub fn draw_phn<R: Rng + ?Sized>(
    sigma2: f64,
    unit: PhnUnit,
    mn: usize,
    theta0: Theta0,
    rng: &mut R,
) -> Result<PhnRealization> {
    if !(sigma2 >= 0.0) {
        return Err(Error::invalid("phase-noise variance must be non-negative"));
    }
    let std = unit.to_rad2(sigma2).sqrt();
    let start = match theta0 {
        Theta0::Uniform => rng.random_range(0.0..2.0 * PI),
        Theta0::Fixed(deg) => deg.to_radians(),
    };
    let mut theta = Vec::with_capacity(mn);
    let mut acc = start;
    for q in 0..mn {
        if q > 0 {
            let z: f64 = rng.sample(StandardNormal);
            acc += std * z;
        }
        theta.push(acc);
    }
    Ok(PhnRealization { theta })
}
