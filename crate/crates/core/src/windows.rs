//! Transmit/receive signaling windows and their sampled diagonals.
//!
//! Every window is supported on `[0, T0]` with `T0 = (M-1)T/M` and evaluated
//! from its closed form; the sampled diagonal holds `g(mT/M)` for
//! `m = 0..M-1`, so the last sample sits exactly on `t = T0`.

use crate::{Error, Result};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WindowKind {
    Rectangular,
    Hamming,
    Hanning,
    Blackman,
    BartlettHann,
}

impl WindowKind {
    pub const ALL: [WindowKind; 5] = [
        WindowKind::Rectangular,
        WindowKind::Hamming,
        WindowKind::Hanning,
        WindowKind::Blackman,
        WindowKind::BartlettHann,
    ];

    /// Configuration name.
    pub fn name(self) -> &'static str {
        match self {
            WindowKind::Rectangular => "rect",
            WindowKind::Hamming => "hamming",
            WindowKind::Hanning => "hanning",
            WindowKind::Blackman => "blackman",
            WindowKind::BartlettHann => "bartlett-hann",
        }
    }
}

impl fmt::Display for WindowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WindowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WindowKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| {
                Error::Parse(format!(
                    "unknown window '{s}' (expected rect, hamming, hanning, blackman, bartlett-hann)"
                ))
            })
    }
}

/// Window value at normalized time `u = t / T0`; zero outside `[0, 1]`.
pub fn eval_window_normalized(kind: WindowKind, u: f64) -> f64 {
    if !(0.0..=1.0).contains(&u) {
        return 0.0;
    }
    let c1 = (2.0 * PI * u).cos();
    // closed forms that vanish at the edges leave rounding residue there
    let g = match kind {
        WindowKind::Rectangular => 1.0,
        WindowKind::Hamming => 0.54 - 0.46 * c1,
        WindowKind::Hanning => 0.5 - 0.5 * c1,
        WindowKind::Blackman => 0.42 - 0.5 * c1 + 0.08 * (4.0 * PI * u).cos(),
        WindowKind::BartlettHann => {
            let tp = u - 0.5;
            0.62 - 0.48 * tp.abs() + 0.38 * (2.0 * PI * tp).cos()
        }
    };
    if g.abs() < 1e-12 {
        0.0
    } else {
        g
    }
}

/// Continuous-time window `g(t)` with support `[0, T0]`.
pub fn eval_window(kind: WindowKind, t: f64, t0: f64) -> f64 {
    debug_assert!(t0 > 0.0);
    eval_window_normalized(kind, t / t0)
}

/// Sampled window diagonal `G = diag[g(0), g(T/M), ..., g((M-1)T/M)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowDiagonal {
    kind: WindowKind,
    samples: Vec<f64>,
    t0: f64,
}

pub fn sample_window(kind: WindowKind, m: usize, t_sym: f64) -> Result<WindowDiagonal> {
    if m < 2 {
        return Err(Error::invalid(format!("window needs M >= 2 samples, got {m}")));
    }
    if !(t_sym > 0.0) {
        return Err(Error::invalid("symbol duration must be positive"));
    }
    let t0 = (m - 1) as f64 * t_sym / m as f64;
    let samples: Vec<f64> = (0..m)
        .map(|i| eval_window(kind, i as f64 * t_sym / m as f64, t0))
        .collect();
    let diag = WindowDiagonal { kind, samples, t0 };
    if diag.nulls_link() {
        log::warn!("{kind} window sampled at M={m} is identically zero; the link carries no energy");
    }
    Ok(diag)
}

impl WindowDiagonal {
    pub fn kind(&self) -> WindowKind {
        self.kind
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Support duration `T0`.
    pub fn support(&self) -> f64 {
        self.t0
    }

    /// Mean squared sample value.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|g| g * g).sum::<f64>() / self.samples.len() as f64
    }

    /// True when every sample is zero.
    pub fn nulls_link(&self) -> bool {
        self.samples.iter().all(|&g| g == 0.0)
    }

    /// Number of zero samples (delay bins that carry nothing).
    pub fn zero_samples(&self) -> usize {
        self.samples.iter().filter(|&&g| g == 0.0).count()
    }

    /// Copy rescaled to unit mean energy. Windows are used unnormalized
    /// unless an experiment asks for this explicitly.
    pub fn normalized(&self) -> WindowDiagonal {
        let e = self.energy();
        let scale = if e > 0.0 { 1.0 / e.sqrt() } else { 0.0 };
        WindowDiagonal {
            kind: self.kind,
            samples: self.samples.iter().map(|g| g * scale).collect(),
            t0: self.t0,
        }
    }
}
