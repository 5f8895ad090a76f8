//! Single-trial link runners shared by the Monte Carlo drivers.
//!
//! A trial draws everything it needs from the generator it is handed, in a
//! fixed order: bits, channel, phase noise, then noise. Drivers that hand the
//! same per-trial stream to several windows or SNR points therefore compare
//! them on common random numbers.

use crate::channel::{draw_channel, draw_phn, PhnRealization};
use crate::coding::{turbo_loop, FrameObservation, Framing, Interleaver, LdpcCode, TurboConfig};
use crate::constellation::{build_constellation, map_bits, Constellation};
use crate::detectors::{lmmse, mld};
use crate::modem::{propagate, Transceiver};
use crate::params::SystemParams;
use crate::rng::random_bits;
use crate::windows::{sample_window, WindowKind};
use crate::{Error, Result};
use rand::Rng;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detector {
    Mld,
    Lmmse,
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Detector::Mld => "mld",
            Detector::Lmmse => "lmmse",
        })
    }
}

impl FromStr for Detector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mld" | "ml" => Ok(Detector::Mld),
            "lmmse" | "mmse" => Ok(Detector::Lmmse),
            other => Err(Error::Parse(format!("unknown detector '{other}' (expected mld or lmmse)"))),
        }
    }
}

/// What the receiver knows about the phase noise.
///
/// With full knowledge the phase process drops out of ML and LMMSE
/// performance entirely (it is a diagonal unitary factor that commutes with
/// the receive window), so a phase-noise penalty only shows up when the
/// detector tracks the common phase alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsiMode {
    /// Detector uses the true `H` including the phase trajectory.
    Perfect,
    /// Detector knows taps and geometry but only the initial phase `theta(0)`.
    CommonPhase,
}

impl fmt::Display for CsiMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CsiMode::Perfect => "perfect",
            CsiMode::CommonPhase => "common-phase",
        })
    }
}

impl FromStr for CsiMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "perfect" => Ok(CsiMode::Perfect),
            "common-phase" | "common_phase" => Ok(CsiMode::CommonPhase),
            other => Err(Error::Parse(format!(
                "unknown CSI mode '{other}' (expected perfect or common-phase)"
            ))),
        }
    }
}

fn detector_phn(phn: &PhnRealization, csi: CsiMode) -> PhnRealization {
    match csi {
        CsiMode::Perfect => phn.clone(),
        CsiMode::CommonPhase => phn.common_phase(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ErrorCount {
    pub errors: u64,
    pub bits: u64,
}

impl ErrorCount {
    pub fn add(&mut self, other: ErrorCount) {
        self.errors += other.errors;
        self.bits += other.bits;
    }

    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.errors as f64 / self.bits as f64
        }
    }
}

fn count_errors(a: &[u8], b: &[u8]) -> ErrorCount {
    ErrorCount {
        errors: a.iter().zip(b).filter(|(x, y)| x != y).count() as u64,
        bits: a.len() as u64,
    }
}

/// Uncoded link with one window kind used at both ends.
#[derive(Debug, Clone)]
pub struct UncodedLink {
    pub params: SystemParams,
    pub constellation: Constellation,
    pub tx: Transceiver,
    pub detector: Detector,
    pub csi: CsiMode,
}

impl UncodedLink {
    pub fn new(params: &SystemParams, kind: WindowKind, detector: Detector, csi: CsiMode) -> Result<Self> {
        params.validate()?;
        let t = params.symbol_duration();
        let w = sample_window(kind, params.m, t)?;
        let tx = Transceiver::new(params.n, w.clone(), w)?;
        let constellation = build_constellation(params.q)?;
        if detector == Detector::Mld {
            let candidates = (params.q as f64).powi(params.mn() as i32);
            if candidates > crate::detectors::MLD_MAX_CANDIDATES {
                return Err(Error::Infeasible {
                    candidates,
                    limit: crate::detectors::MLD_MAX_CANDIDATES,
                    hint: "use the LMMSE detector for frames this large",
                });
            }
        }
        Ok(UncodedLink {
            params: params.clone(),
            constellation,
            tx,
            detector,
            csi,
        })
    }

    /// One frame through the link at noise power `n0`.
    pub fn trial<R: Rng + ?Sized>(&self, n0: f64, rng: &mut R) -> Result<ErrorCount> {
        let p = &self.params;
        let c = &self.constellation;
        let bits = random_bits(rng, p.bits_per_frame());
        let x = map_bits(&bits, c, p.m, p.n)?;
        let channel = draw_channel(p, rng)?;
        let phn = draw_phn(p.sigma2_phn, p.phn_unit, p.mn(), p.theta0, rng)?;
        let s = self.tx.modulate(&x)?;
        let r = propagate(&s, &channel, &phn, n0, rng)?;
        let y = self.tx.demodulate(&r)?;
        let h = self.tx.effective_channel(&channel, &detector_phn(&phn, self.csi))?.h;
        let decided = match self.detector {
            Detector::Mld => c.bits_from_labels(&mld(&y, &h, c)?),
            Detector::Lmmse => lmmse(&y, &h, n0.max(1e-12), c, None)?.hard_bits(),
        };
        Ok(count_errors(&bits, &decided))
    }
}

/// Outcome of one coded trial (one codeword).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CodedOutcome {
    /// Message-bit errors after the iterative receiver.
    pub coded: ErrorCount,
    /// Coded-bit errors of the first LMMSE pass, the uncoded reference.
    pub uncoded: ErrorCount,
    /// Unsatisfied checks after each outer iteration, padded with the last
    /// value when the loop stopped early.
    pub unsatisfied: Vec<usize>,
}

/// LDPC-coded link with the iterative LMMSE/SPA receiver. Each frame of a
/// codeword sees an independent channel and phase-noise draw.
#[derive(Debug, Clone)]
pub struct CodedLink {
    pub link: UncodedLink,
    pub code: LdpcCode,
    pub interleaver: Interleaver,
    pub turbo: TurboConfig,
}

impl CodedLink {
    pub fn new(
        params: &SystemParams,
        kind: WindowKind,
        csi: CsiMode,
        code: LdpcCode,
        interleaver_seed: u64,
        turbo: TurboConfig,
    ) -> Result<Self> {
        let link = UncodedLink::new(params, kind, Detector::Lmmse, csi)?;
        let interleaver = Interleaver::new(code.n(), interleaver_seed);
        Ok(CodedLink {
            link,
            code,
            interleaver,
            turbo,
        })
    }

    pub fn framing(&self) -> Result<Framing> {
        Framing::new(self.code.n(), self.link.params.bits_per_frame())
    }

    pub fn trial<R: Rng + ?Sized>(&self, n0: f64, rng: &mut R) -> Result<CodedOutcome> {
        let p = &self.link.params;
        let c = &self.link.constellation;
        let tx = &self.link.tx;
        let framing = self.framing()?;
        let message = random_bits(rng, self.code.k());
        let codeword = self.code.encode(&message)?;
        let mixed = self.interleaver.interleave(&codeword)?;
        let mut frames = Vec::with_capacity(framing.frames());
        for fb in framing.segment(&mixed)? {
            let x = map_bits(&fb, c, p.m, p.n)?;
            let channel = draw_channel(p, rng)?;
            let phn = draw_phn(p.sigma2_phn, p.phn_unit, p.mn(), p.theta0, rng)?;
            let r = propagate(&tx.modulate(&x)?, &channel, &phn, n0, rng)?;
            let y = tx.demodulate(&r)?;
            let h = tx.effective_channel(&channel, &detector_phn(&phn, self.link.csi))?.h;
            frames.push(FrameObservation { y, h });
        }
        let out = turbo_loop(&frames, n0.max(1e-12), c, &self.code, &self.interleaver, self.turbo)?;
        let mut unsatisfied = out.unsatisfied.clone();
        let last = *unsatisfied.last().unwrap_or(&0);
        unsatisfied.resize(self.turbo.t_det, last);
        Ok(CodedOutcome {
            coded: count_errors(&message, &out.message),
            uncoded: count_errors(&codeword, &out.detector_hard),
            unsatisfied,
        })
    }
}
