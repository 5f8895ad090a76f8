//! Oversampled continuous-time synthesis and out-of-band emission estimates.
//!
//! Each delay-sequency frame is spread into time-frequency symbols
//! `X_TF = F_M X W_N`, and block `n` of the waveform is
//! `sum_m X_TF(m, n) g(t - nT) exp(j 2 pi m delta_f (t - nT)) / sqrt(M)`,
//! sampled at `O` times the modem rate with the continuous window. Frames
//! follow each other without guard intervals.

use crate::constellation::Constellation;
use crate::params::SystemParams;
use crate::transforms::apply_walsh_kron;
use crate::windows::{eval_window_normalized, WindowKind};
use crate::{Error, Result, C64};
use rand::Rng;
use rustfft::FftPlanner;

/// Reported values are clipped to this floor.
pub const NPSD_FLOOR_DB: f64 = -300.0;

/// Waveform of `n_frames` random frames at `O` samples per modem sample.
pub fn synthesize_oversampled<R: Rng + ?Sized>(
    params: &SystemParams,
    c: &Constellation,
    kind: WindowKind,
    oversample: usize,
    n_frames: usize,
    rng: &mut R,
) -> Result<Vec<C64>> {
    if oversample < 4 {
        return Err(Error::invalid(format!("oversampling factor {oversample} < 4")));
    }
    let mn = params.mn();
    let mut frames = Vec::with_capacity(n_frames);
    for _ in 0..n_frames {
        frames.push((0..mn).map(|_| c.point(rng.random_range(0..c.order()))).collect::<Vec<_>>());
    }
    synthesize_frames(params.m, params.n, kind, oversample, &frames)
}

/// Deterministic synthesis of the given frames (column-major `M x N` each).
pub fn synthesize_frames(
    m: usize,
    n: usize,
    kind: WindowKind,
    oversample: usize,
    frames: &[Vec<C64>],
) -> Result<Vec<C64>> {
    if m < 2 || oversample == 0 {
        return Err(Error::invalid("synthesis needs M >= 2 and O >= 1"));
    }
    let block = m * oversample;
    let window: Vec<f64> = (0..block)
        .map(|i| eval_window_normalized(kind, i as f64 / (oversample * (m - 1)) as f64))
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(block);
    let scale = 1.0 / m as f64; // unitary DFT, then 1/sqrt(M) synthesis
    let mut out = Vec::with_capacity(frames.len() * n * block);
    let mut buf = vec![C64::new(0.0, 0.0); block];
    for x in frames {
        Error::check_len(m * n, x.len())?;
        let dt = apply_walsh_kron(&vec![1.0; m], x)?;
        for col in dt.chunks_exact(m) {
            let mut tf = col.to_vec();
            fwd.process(&mut tf);
            buf.fill(C64::new(0.0, 0.0));
            buf[..m].copy_from_slice(&tf);
            inv.process(&mut buf);
            out.extend(buf.iter().zip(&window).map(|(v, g)| v * (g * scale)));
        }
    }
    Ok(out)
}

/// Welch power spectral density, peak-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate {
    /// Cycles per sample, `(k - L/2) / L`, ascending.
    pub freq: Vec<f64>,
    /// Linear PSD, unnormalized, so that `mean(psd)` equals the signal power.
    pub psd: Vec<f64>,
    /// Peak-normalized PSD in dB, floored at [`NPSD_FLOOR_DB`].
    pub npsd_db: Vec<f64>,
    pub segment_len: usize,
    pub overlap: f64,
    pub averages: usize,
}

impl PsdEstimate {
    /// NPSD at the grid point nearest `f`.
    pub fn at(&self, f: f64) -> f64 {
        let l = self.segment_len as f64;
        let k = ((f * l).round() + l / 2.0).clamp(0.0, l - 1.0) as usize;
        self.npsd_db[k]
    }

    /// Integral of the PSD over one period in normalized frequency.
    pub fn total_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() / self.psd.len() as f64
    }
}

/// Averaged periodogram with a Hann taper over `n_avg` overlapping segments.
pub fn estimate_npsd(stream: &[C64], segment_len: usize, overlap: f64, n_avg: usize) -> Result<PsdEstimate> {
    if segment_len < 2 || !(0.0..1.0).contains(&overlap) || n_avg == 0 {
        return Err(Error::invalid("PSD needs segment_len >= 2, overlap in [0, 1), n_avg >= 1"));
    }
    let hop = ((segment_len as f64 * (1.0 - overlap)).round() as usize).max(1);
    let needed = (segment_len + (n_avg - 1) * hop).max(2 * segment_len);
    if stream.len() < needed {
        return Err(Error::InsufficientSamples {
            needed,
            have: stream.len(),
        });
    }
    let taper: Vec<f64> = (0..segment_len)
        .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / segment_len as f64).cos())
        .collect();
    let taper_energy: f64 = taper.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(segment_len);
    let mut acc = vec![0.0; segment_len];
    let mut buf = vec![C64::new(0.0, 0.0); segment_len];
    for s in 0..n_avg {
        let seg = &stream[s * hop..s * hop + segment_len];
        for ((b, x), w) in buf.iter_mut().zip(seg).zip(&taper) {
            *b = x * w;
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }
    let half = segment_len / 2;
    let norm = 1.0 / (taper_energy * n_avg as f64);
    let psd: Vec<f64> = (0..segment_len).map(|k| acc[(k + half) % segment_len] * norm).collect();
    let freq: Vec<f64> = (0..segment_len)
        .map(|k| (k as f64 - half as f64) / segment_len as f64)
        .collect();
    let peak = psd.iter().cloned().fold(0.0, f64::max);
    let npsd_db = psd
        .iter()
        .map(|&p| {
            if peak > 0.0 && p > 0.0 {
                (10.0 * (p / peak).log10()).max(NPSD_FLOOR_DB)
            } else {
                NPSD_FLOOR_DB
            }
        })
        .collect();
    Ok(PsdEstimate {
        freq,
        psd,
        npsd_db,
        segment_len,
        overlap,
        averages: n_avg,
    })
}

/// Occupied band of `M` subcarriers at spacing `1/(O M)` cycles/sample,
/// each counted with half a spacing on either side.
pub fn occupied_band(m: usize, oversample: usize) -> (f64, f64) {
    let spacing = 1.0 / (oversample * m) as f64;
    (-0.5 * spacing, (m as f64 - 0.5) * spacing)
}

/// NPSD at one out-of-band offset.
#[derive(Debug, Clone, PartialEq)]
pub struct OobePoint {
    /// Distance from band center in units of the half-bandwidth.
    pub offset: f64,
    /// Larger of the two sides, dB.
    pub npsd_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OobeReport {
    pub points: Vec<OobePoint>,
    /// Largest NPSD strictly outside the band.
    pub max_out_of_band_db: f64,
}

/// OOBE at `offsets` half-bandwidths from the band center.
pub fn oobe_report(psd: &PsdEstimate, band: (f64, f64), offsets: &[f64]) -> Result<OobeReport> {
    let (lo, hi) = band;
    let (fmin, fmax) = (psd.freq[0], *psd.freq.last().unwrap());
    if !(lo < hi && lo >= fmin && hi <= fmax) {
        return Err(Error::invalid(format!("band [{lo}, {hi}] outside the PSD grid")));
    }
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut points = Vec::with_capacity(offsets.len());
    for &k in offsets {
        let (a, b) = (center - k * half, center + k * half);
        if a < fmin || b > fmax {
            return Err(Error::invalid(format!("offset {k} falls outside the PSD grid")));
        }
        points.push(OobePoint {
            offset: k,
            npsd_db: psd.at(a).max(psd.at(b)),
        });
    }
    let max_out_of_band_db = psd
        .freq
        .iter()
        .zip(&psd.npsd_db)
        .filter(|(f, _)| **f < lo || **f > hi)
        .map(|(_, v)| *v)
        .fold(NPSD_FLOOR_DB, f64::max);
    Ok(OobeReport {
        points,
        max_out_of_band_db,
    })
}
