//! Transmit chain, receive chain and the effective delay-sequency channel.
//!
//! ```text
//! s = (W_N (x) G_tx) x
//! r = Theta H_T s + n_T
//! y = (W_N (x) G_rx) r  =  H x + (W_N (x) G_rx) n_T
//! H = (W_N (x) G_rx) Theta H_T (W_N (x) G_tx)
//! ```

use crate::channel::{ChannelRealization, PhnRealization};
use crate::constellation::DsFrame;
use crate::rng::complex_normal;
use crate::transforms::{apply_kron, dft_matrix, walsh_matrix, WalshMatrix};
use crate::windows::WindowDiagonal;
use crate::{CMatrix, Error, Result, C64};
use nalgebra::DMatrix;
use rand::Rng;

/// Time-domain samples at spacing `1/(M delta_f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TxSignal {
    pub s: Vec<C64>,
}

/// Walsh matrix plus transmit/receive windows for one `M x N` lattice.
#[derive(Debug, Clone)]
pub struct Transceiver {
    walsh: WalshMatrix,
    g_tx: WindowDiagonal,
    g_rx: WindowDiagonal,
}

impl Transceiver {
    pub fn new(n: usize, g_tx: WindowDiagonal, g_rx: WindowDiagonal) -> Result<Self> {
        Error::check_len(g_tx.len(), g_rx.len())?;
        Ok(Transceiver {
            walsh: walsh_matrix(n)?,
            g_tx,
            g_rx,
        })
    }

    pub fn m(&self) -> usize {
        self.g_tx.len()
    }

    pub fn n(&self) -> usize {
        self.walsh.order()
    }

    pub fn mn(&self) -> usize {
        self.m() * self.n()
    }

    pub fn walsh(&self) -> &WalshMatrix {
        &self.walsh
    }

    pub fn g_tx(&self) -> &WindowDiagonal {
        &self.g_tx
    }

    pub fn g_rx(&self) -> &WindowDiagonal {
        &self.g_rx
    }

    pub fn modulate(&self, x: &DsFrame) -> Result<TxSignal> {
        Error::check_len(self.m(), x.m())?;
        Error::check_len(self.n(), x.n())?;
        self.modulate_vec(x.as_vec())
    }

    pub fn modulate_vec(&self, x: &[C64]) -> Result<TxSignal> {
        Ok(TxSignal {
            s: apply_kron(self.walsh.matrix(), self.g_tx.samples(), x)?,
        })
    }

    /// `y = (W_N (x) G_rx) r`.
    pub fn demodulate(&self, r: &[C64]) -> Result<Vec<C64>> {
        apply_kron(self.walsh.matrix(), self.g_rx.samples(), r)
    }

    /// Receive path through the time-frequency grid:
    /// `Y_TF = F_M G_rx R`, then `Y_DS = F_M^H Y_TF W_N`.
    pub fn demodulate_via_tf(&self, r: &[C64]) -> Result<DMatrix<C64>> {
        Error::check_len(self.mn(), r.len())?;
        let (m, n) = (self.m(), self.n());
        let f = dft_matrix(m)?;
        let r_mat = DMatrix::from_column_slice(m, n, r);
        let g = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            m,
            self.g_rx.samples().iter().map(|&v| C64::new(v, 0.0)),
        ));
        let y_tf = f.matrix() * g * r_mat;
        let w = self.walsh.matrix().map(|v| C64::new(v, 0.0));
        Ok(f.matrix().adjoint() * y_tf * w)
    }

    /// Dense effective channel, assembled column by column through the
    /// structured operators.
    pub fn effective_channel(
        &self,
        channel: &ChannelRealization,
        phn: &PhnRealization,
    ) -> Result<EffectiveChannel> {
        let mn = self.mn();
        Error::check_len(mn, phn.theta.len())?;
        let theta = phn.diagonal();
        let mut h = CMatrix::zeros(mn, mn);
        let mut unit = vec![C64::new(0.0, 0.0); mn];
        for col in 0..mn {
            unit[col] = C64::new(1.0, 0.0);
            let s = self.modulate_vec(&unit)?.s;
            let mut r = channel.apply(&s);
            for (v, t) in r.iter_mut().zip(&theta) {
                *v *= t;
            }
            let y = self.demodulate(&r)?;
            h.column_mut(col).copy_from_slice(&y);
            unit[col] = C64::new(0.0, 0.0);
        }
        Ok(EffectiveChannel {
            h,
            theta,
            channel: channel.clone(),
        })
    }
}

/// `r = Theta H_T s + n_T` with `n_T ~ CN(0, n0 I)`.
pub fn propagate<R: Rng + ?Sized>(
    s: &TxSignal,
    channel: &ChannelRealization,
    phn: &PhnRealization,
    n0: f64,
    rng: &mut R,
) -> Result<Vec<C64>> {
    Error::check_len(s.s.len(), phn.theta.len())?;
    if !(n0 >= 0.0) {
        return Err(Error::invalid("noise power must be non-negative"));
    }
    let mut r = channel.apply(&s.s);
    for (v, t) in r.iter_mut().zip(phn.theta.iter()) {
        *v *= C64::from_polar(1.0, *t);
        if n0 > 0.0 {
            *v += complex_normal(rng, n0);
        }
    }
    Ok(r)
}

/// Effective delay-sequency channel `H` with the factors it was built from.
#[derive(Debug, Clone)]
pub struct EffectiveChannel {
    pub h: CMatrix,
    /// Diagonal of `Theta`.
    pub theta: Vec<C64>,
    pub channel: ChannelRealization,
}

impl EffectiveChannel {
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let v = &self.h * nalgebra::DVector::from_column_slice(x);
        v.as_slice().to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_channel, draw_phn, time_domain_channel, PathTap};
    use crate::params::{PhnUnit, SystemParams, Theta0};
    use crate::rng::trial_rng;
    use crate::windows::{sample_window, WindowKind};

    fn rect(m: usize) -> WindowDiagonal {
        sample_window(WindowKind::Rectangular, m, 1.0).unwrap()
    }

    fn random_vec(rng: &mut impl Rng, len: usize) -> Vec<C64> {
        (0..len).map(|_| complex_normal(rng, 1.0)).collect()
    }

    fn identity_channel() -> ChannelRealization {
        ChannelRealization {
            taps: vec![PathTap {
                gain: C64::new(1.0, 0.0),
                delay: 0,
                doppler_int: 0,
                doppler_frac: 0.0,
            }],
        }
    }

    #[test]
    fn unit_symbol_modulation() {
        let trx = Transceiver::new(2, rect(2), rect(2)).unwrap();
        let mut x = vec![C64::new(0.0, 0.0); 4];
        x[0] = C64::new(1.0, 0.0);
        let frame = DsFrame::from_vec(2, 2, x).unwrap();
        let s = trx.modulate(&frame).unwrap().s;
        let a = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [a, 0.0, a, 0.0];
        for (v, e) in s.iter().zip(expected) {
            assert!((v - C64::new(e, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn zero_window_zero_signal() {
        let zero = sample_window(WindowKind::Hanning, 2, 1.0).unwrap();
        let trx = Transceiver::new(4, zero.clone(), zero).unwrap();
        let mut rng = trial_rng(1, 0, 0);
        let x = random_vec(&mut rng, 8);
        assert!(trx.modulate_vec(&x).unwrap().s.iter().all(|z| z.norm() == 0.0));
        assert!(trx.demodulate(&x).unwrap().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn rect_modulation_preserves_norm() {
        let trx = Transceiver::new(8, rect(4), rect(4)).unwrap();
        let mut rng = trial_rng(2, 0, 0);
        let x = random_vec(&mut rng, 32);
        let s = trx.modulate_vec(&x).unwrap().s;
        let nx: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        let ns: f64 = s.iter().map(|z| z.norm_sqr()).sum();
        assert!((nx - ns).abs() < 1e-10);
        let y = trx.demodulate(&s).unwrap();
        for (a, b) in y.iter().zip(&x) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn noiseless_propagation_identities() {
        let mut rng = trial_rng(3, 0, 0);
        let s = TxSignal { s: random_vec(&mut rng, 8) };
        let r = propagate(&s, &identity_channel(), &PhnRealization::none(8), 0.0, &mut rng).unwrap();
        assert_eq!(r, s.s);
        let gain = C64::new(0.3, -0.8);
        let ch = ChannelRealization {
            taps: vec![PathTap {
                gain,
                delay: 1,
                doppler_int: 0,
                doppler_frac: 0.0,
            }],
        };
        let r = propagate(&s, &ch, &PhnRealization::none(8), 0.0, &mut rng).unwrap();
        for q in 0..8 {
            assert!((r[q] - gain * s.s[(q + 7) % 8]).norm() < 1e-15);
        }
    }

    #[test]
    fn noise_power_matches() {
        let mut rng = trial_rng(4, 0, 0);
        let len = 1_000_000;
        let s = TxSignal { s: vec![C64::new(0.0, 0.0); len] };
        let n0 = 0.37;
        let r = propagate(&s, &identity_channel(), &PhnRealization::none(len), n0, &mut rng).unwrap();
        let p = r.iter().map(|z| z.norm_sqr()).sum::<f64>() / len as f64;
        assert!((p - n0).abs() / n0 < 0.01, "{p}");
    }

    #[test]
    fn vector_and_tf_receive_paths_agree() {
        let mut rng = trial_rng(5, 0, 0);
        for kind in WindowKind::ALL {
            let g = sample_window(kind, 4, 1.0).unwrap();
            let trx = Transceiver::new(8, g.clone(), g).unwrap();
            let r = random_vec(&mut rng, 32);
            let y = trx.demodulate(&r).unwrap();
            let y_mat = trx.demodulate_via_tf(&r).unwrap();
            for (a, b) in y.iter().zip(y_mat.iter()) {
                assert!((a - b).norm() < 1e-12, "{kind}");
            }
        }
    }

    #[test]
    fn degenerate_channel_is_identity() {
        let trx = Transceiver::new(2, rect(4), rect(4)).unwrap();
        let eff = trx.effective_channel(&identity_channel(), &PhnRealization::none(8)).unwrap();
        // exact up to the rounding of 1/sqrt(N) squared
        assert!((eff.h - CMatrix::identity(8, 8)).map(|z| z.norm()).max() <= 4.0 * f64::EPSILON);
    }

    fn dense_oracle(trx: &Transceiver, ch: &ChannelRealization, phn: &PhnRealization) -> CMatrix {
        let mn = trx.mn();
        let m = trx.m();
        let w = trx.walsh().matrix();
        let kron = |g: &[f64]| {
            CMatrix::from_fn(mn, mn, |r, c| {
                if r % m == c % m {
                    C64::new(w[(r / m, c / m)] * g[r % m], 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
        };
        let theta = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(phn.diagonal()));
        kron(trx.g_rx().samples()) * theta * time_domain_channel(ch, mn) * kron(trx.g_tx().samples())
    }

    #[test]
    fn effective_channel_matches_dense_product_and_chain() {
        let p = SystemParams::mld_reference();
        let mut rng = trial_rng(6, 0, 0);
        for kind in WindowKind::ALL {
            let g = sample_window(kind, p.m, p.symbol_duration()).unwrap();
            let trx = Transceiver::new(p.n, g.clone(), g).unwrap();
            for _ in 0..10 {
                let ch = draw_channel(&p, &mut rng).unwrap();
                let phn = draw_phn(3.0, PhnUnit::SquaredDegrees, p.mn(), Theta0::Uniform, &mut rng).unwrap();
                let eff = trx.effective_channel(&ch, &phn).unwrap();
                let oracle = dense_oracle(&trx, &ch, &phn);
                assert!((&eff.h - oracle).map(|z| z.norm()).max() < 1e-12);

                let x = random_vec(&mut rng, p.mn());
                let s = trx.modulate_vec(&x).unwrap();
                let y = trx.demodulate(&propagate(&s, &ch, &phn, 0.0, &mut rng).unwrap()).unwrap();
                let hx = eff.apply(&x);
                let err: f64 = y.iter().zip(&hx).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
                assert!(err < 1e-10, "{kind}: {err}");
            }
        }
    }

    #[test]
    fn rect_windows_preserve_frobenius_norm() {
        let p = SystemParams::spectrum_reference();
        let mut rng = trial_rng(7, 0, 0);
        let trx = Transceiver::new(p.n, rect(p.m), rect(p.m)).unwrap();
        let ch = draw_channel(&p, &mut rng).unwrap();
        let eff = trx.effective_channel(&ch, &PhnRealization::none(p.mn())).unwrap();
        let ht = time_domain_channel(&ch, p.mn());
        assert!((eff.h.norm_squared() / ht.norm_squared() - 1.0).abs() < 1e-10);
    }
}
