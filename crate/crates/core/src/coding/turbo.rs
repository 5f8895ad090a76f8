//! Iterative LMMSE detection and SPA decoding over a codeword spread across
//! several OTSM frames.
//!
//! Framing: the interleaved codeword fills `ceil(n_c / L)` frames of `L`
//! bits each; the tail of the last frame is zero-padded. Pad bits are known
//! to the receiver and enter the detector as saturated priors.

use super::interleaver::Interleaver;
use super::ldpc::LdpcCode;
use super::spa::spa_decode;
use crate::constellation::Constellation;
use crate::detectors::{lmmse, SymbolPriors, LLR_CLIP};
use crate::{CMatrix, Error, Result, C64};

/// Maps one codeword onto a sequence of frames of `bits_per_frame` bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Framing {
    pub codeword_len: usize,
    pub bits_per_frame: usize,
}

impl Framing {
    pub fn new(codeword_len: usize, bits_per_frame: usize) -> Result<Self> {
        if codeword_len == 0 || bits_per_frame == 0 {
            return Err(Error::invalid("framing needs positive lengths"));
        }
        Ok(Framing {
            codeword_len,
            bits_per_frame,
        })
    }

    pub fn frames(&self) -> usize {
        self.codeword_len.div_ceil(self.bits_per_frame)
    }

    pub fn pad_bits(&self) -> usize {
        self.frames() * self.bits_per_frame - self.codeword_len
    }

    /// Splits interleaved coded bits into zero-padded frames.
    pub fn segment(&self, bits: &[u8]) -> Result<Vec<Vec<u8>>> {
        Error::check_len(self.codeword_len, bits.len())?;
        Ok((0..self.frames())
            .map(|f| {
                let start = f * self.bits_per_frame;
                let end = (start + self.bits_per_frame).min(bits.len());
                let mut chunk = bits[start..end].to_vec();
                chunk.resize(self.bits_per_frame, 0);
                chunk
            })
            .collect())
    }
}

/// Received samples of one frame with the detector's channel matrix.
#[derive(Debug, Clone)]
pub struct FrameObservation {
    pub y: Vec<C64>,
    pub h: CMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TurboConfig {
    /// Outer detection-decoding iterations.
    pub t_det: usize,
    /// SPA iterations per outer iteration.
    pub t_ldpc: usize,
}

impl Default for TurboConfig {
    fn default() -> Self {
        TurboConfig { t_det: 8, t_ldpc: 6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurboOutput {
    /// Decoded message bits.
    pub message: Vec<u8>,
    /// Decoded codeword bits (before interleaving).
    pub codeword: Vec<u8>,
    /// Hard decisions of the first detector pass, codeword order. Useful
    /// as the uncoded reference on the same channel realization.
    pub detector_hard: Vec<u8>,
    /// Unsatisfied checks after each outer iteration that ran.
    pub unsatisfied: Vec<usize>,
    pub converged: bool,
}

impl TurboOutput {
    pub fn outer_iterations(&self) -> usize {
        self.unsatisfied.len()
    }
}

/// Runs `cfg.t_det` rounds of {LMMSE with priors, deinterleave, SPA,
/// interleave extrinsic into priors}, stopping once the decoder output is a
/// codeword.
pub fn turbo_loop(
    frames: &[FrameObservation],
    n0: f64,
    c: &Constellation,
    code: &LdpcCode,
    interleaver: &Interleaver,
    cfg: TurboConfig,
) -> Result<TurboOutput> {
    if cfg.t_det == 0 {
        return Err(Error::invalid("turbo loop needs at least one outer iteration"));
    }
    Error::check_len(code.n(), interleaver.len())?;
    let first = frames.first().ok_or_else(|| Error::invalid("no frames"))?;
    let symbols = first.h.ncols();
    let k = c.bits_per_symbol();
    let framing = Framing::new(code.n(), symbols * k)?;
    Error::check_len(framing.frames(), frames.len())?;
    for f in frames {
        Error::check_len(symbols, f.h.ncols())?;
        Error::check_len(f.h.nrows(), f.y.len())?;
    }
    let l = framing.bits_per_frame;
    let n_c = code.n();

    // priors in the interleaved domain, pad bits pinned to 0
    let mut prior = vec![0.0; framing.frames() * l];
    for p in prior.iter_mut().skip(n_c) {
        *p = LLR_CLIP;
    }
    let mut unsatisfied = Vec::with_capacity(cfg.t_det);
    let mut detector_hard = Vec::new();
    let mut decoded = None;
    for outer in 0..cfg.t_det {
        let mut det_ext = Vec::with_capacity(prior.len());
        for (f, obs) in frames.iter().enumerate() {
            let bits = &prior[f * l..(f + 1) * l];
            let priors = SymbolPriors::from_bit_llrs(bits, c)?;
            let out = lmmse(&obs.y, &obs.h, n0, c, Some(&priors))?;
            det_ext.extend(out.extrinsic);
        }
        let channel = interleaver.deinterleave(&det_ext[..n_c])?;
        if outer == 0 {
            detector_hard = channel.iter().map(|&v| u8::from(v < 0.0)).collect();
        }
        let dec = spa_decode(&channel, code, cfg.t_ldpc)?;
        unsatisfied.push(code.unsatisfied(&dec.bits));
        let done = dec.converged;
        let ext: Vec<f64> = dec
            .extrinsic
            .iter()
            .map(|v| v.clamp(-LLR_CLIP, LLR_CLIP))
            .collect();
        let ext = interleaver.interleave(&ext)?;
        prior[..n_c].copy_from_slice(&ext);
        decoded = Some(dec);
        if done {
            break;
        }
    }
    let dec = decoded.expect("at least one outer iteration");
    Ok(TurboOutput {
        message: code.extract_message(&dec.bits),
        codeword: dec.bits,
        detector_hard,
        unsatisfied,
        converged: dec.converged,
    })
}
