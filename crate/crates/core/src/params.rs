//! System parameters shared by every stage of the link.

use crate::{Error, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// How the maximum integer Doppler index is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DopplerLimit {
    /// Use this value directly.
    Explicit(usize),
    /// Derive from the maximum speed in km/h and the carrier frequency.
    FromSpeed { v_max_kmh: f64 },
}

/// Interpretation of the configured phase-noise increment variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhnUnit {
    /// The value is a variance in squared degrees (`0.3` means `0.3 deg^2`,
    /// i.e. a standard deviation of `sqrt(0.3)` degrees).
    #[default]
    SquaredDegrees,
    /// The value is a standard deviation in degrees (`0.3` means `(0.3 deg)^2`).
    StdDegrees,
}

impl PhnUnit {
    /// Increment variance in rad^2 for a configured value.
    pub fn to_rad2(self, value: f64) -> f64 {
        let deg = std::f64::consts::PI / 180.0;
        match self {
            PhnUnit::SquaredDegrees => value * deg * deg,
            PhnUnit::StdDegrees => (value * deg).powi(2),
        }
    }
}

/// Initial oscillator phase `theta(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Theta0 {
    /// Uniform on `[0, 360)` degrees.
    #[default]
    Uniform,
    /// Fixed value in degrees.
    Fixed(f64),
}

/// Lattice, channel and impairment constants.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Delay bins.
    pub m: usize,
    /// Sequency bins; must be a power of two.
    pub n: usize,
    /// Subcarrier spacing in Hz.
    pub delta_f: f64,
    /// Carrier frequency in Hz.
    pub f_c: f64,
    /// Constellation order.
    pub q: usize,
    /// Number of channel paths.
    pub paths: usize,
    /// Phase-noise increment variance, see [`PhnUnit`].
    pub sigma2_phn: f64,
    pub phn_unit: PhnUnit,
    pub theta0: Theta0,
    /// Largest integer delay index.
    pub l_max: usize,
    pub doppler: DopplerLimit,
    /// Draw a fractional Doppler component uniformly on `[-1/2, 1/2]`.
    pub fractional_doppler: bool,
    /// Evaluation grid of symbol SNRs in dB.
    pub snr_db: Vec<f64>,
}

impl SystemParams {
    /// Small frame used for exhaustive ML detection and exact bounds:
    /// `M=4, N=2`, BPSK, two paths, `k_max = N-1`, `l_max = M-1`.
    pub fn mld_reference() -> Self {
        SystemParams {
            m: 4,
            n: 2,
            delta_f: 15e3,
            f_c: 40e9,
            q: 2,
            paths: 2,
            sigma2_phn: 0.3,
            phn_unit: PhnUnit::SquaredDegrees,
            theta0: Theta0::Uniform,
            l_max: 3,
            doppler: DopplerLimit::Explicit(1),
            fractional_doppler: true,
            snr_db: (0..=10).map(|i| 4.0 * i as f64).collect(),
        }
    }

    /// `M=N=16`, QPSK, six paths at 4 GHz with an 800 km/h speed limit.
    pub fn spectrum_reference() -> Self {
        SystemParams {
            m: 16,
            n: 16,
            delta_f: 18.75e3,
            f_c: 4e9,
            q: 4,
            paths: 6,
            sigma2_phn: 0.3,
            phn_unit: PhnUnit::SquaredDegrees,
            theta0: Theta0::Uniform,
            l_max: 6,
            doppler: DopplerLimit::FromSpeed { v_max_kmh: 800.0 },
            fractional_doppler: true,
            snr_db: (0..=8).map(|i| 4.0 * i as f64).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::invalid("M must be positive"));
        }
        if self.n == 0 || !self.n.is_power_of_two() {
            return Err(Error::invalid(format!("N={} is not a power of two", self.n)));
        }
        if !(self.delta_f > 0.0) {
            return Err(Error::invalid("subcarrier spacing must be positive"));
        }
        if !matches!(self.q, 2 | 4 | 16 | 64) {
            return Err(Error::UnsupportedOrder(self.q));
        }
        if self.paths == 0 {
            return Err(Error::invalid("at least one channel path is required"));
        }
        if self.l_max >= self.m {
            return Err(Error::invalid(format!(
                "l_max={} must be at most M-1={}",
                self.l_max,
                self.m - 1
            )));
        }
        if !(self.sigma2_phn >= 0.0) {
            return Err(Error::invalid("phase-noise variance must be non-negative"));
        }
        if let DopplerLimit::FromSpeed { v_max_kmh } = self.doppler {
            if !(v_max_kmh >= 0.0) || !(self.f_c >= 0.0) {
                return Err(Error::invalid("speed and carrier frequency must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn mn(&self) -> usize {
        self.m * self.n
    }

    /// Symbol duration `T = 1/delta_f`.
    pub fn symbol_duration(&self) -> f64 {
        1.0 / self.delta_f
    }

    pub fn bandwidth(&self) -> f64 {
        self.m as f64 * self.delta_f
    }

    pub fn frame_duration(&self) -> f64 {
        self.n as f64 * self.symbol_duration()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.q.trailing_zeros() as usize
    }

    /// Bits carried by one frame, `L = MN log2 Q`.
    pub fn bits_per_frame(&self) -> usize {
        self.mn() * self.bits_per_symbol()
    }

    /// PHN increment variance in rad^2.
    pub fn phn_variance_rad2(&self) -> f64 {
        self.phn_unit.to_rad2(self.sigma2_phn)
    }
}

/// Noise power for a symbol SNR in dB (`gamma = 1/N0`).
pub fn n0_from_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}
