//! Fast end-to-end sanity checks of the installed library.

use otsm::analysis::{union_bound, BoundMode};
use otsm::coding::{ldpc_construct, spa_decode};
use otsm::constellation::build_constellation;
use otsm::modem::Transceiver;
use otsm::params::SystemParams;
use otsm::rng::{random_bits, trial_rng};
use otsm::sim::{CsiMode, Detector, UncodedLink};
use otsm::spectral::{estimate_npsd, synthesize_oversampled};
use otsm::windows::{sample_window, WindowKind};

type Check = (&'static str, fn() -> Result<(), String>);

fn unit_energy() -> Result<(), String> {
    for q in [2, 4, 16, 64] {
        let c = build_constellation(q).map_err(|e| e.to_string())?;
        let es = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / q as f64;
        if (es - 1.0).abs() > 1e-12 {
            return Err(format!("Q={q}: average energy {es}"));
        }
    }
    Ok(())
}

fn noiseless_mld() -> Result<(), String> {
    let params = SystemParams::mld_reference();
    for kind in [WindowKind::Rectangular, WindowKind::Hamming] {
        let link = UncodedLink::new(&params, kind, Detector::Mld, CsiMode::Perfect).map_err(|e| e.to_string())?;
        for t in 0..50 {
            let c = link.trial(0.0, &mut trial_rng(7, 0, t)).map_err(|e| e.to_string())?;
            if c.errors != 0 {
                return Err(format!("{kind}: {} errors without noise", c.errors));
            }
        }
    }
    Ok(())
}

fn ldpc_round_trip() -> Result<(), String> {
    let code = ldpc_construct(256, 0.5, 1).map_err(|e| e.to_string())?;
    let msg = random_bits(&mut trial_rng(7, 1, 0), code.k());
    let cw = code.encode(&msg).map_err(|e| e.to_string())?;
    let llr: Vec<f64> = cw.iter().map(|&b| if b == 0 { 4.0 } else { -4.0 }).collect();
    let out = spa_decode(&llr, &code, 5).map_err(|e| e.to_string())?;
    if !out.converged || code.extract_message(&out.bits) != msg {
        return Err("noiseless decode failed".into());
    }
    Ok(())
}

fn bound_finite() -> Result<(), String> {
    let params = SystemParams::mld_reference();
    let c = build_constellation(params.q).map_err(|e| e.to_string())?;
    let w = sample_window(WindowKind::Rectangular, params.m, params.symbol_duration()).map_err(|e| e.to_string())?;
    let tx = Transceiver::new(params.n, w.clone(), w).map_err(|e| e.to_string())?;
    let rep = union_bound(&params, &tx, &c, &[10.0, 30.0], 3, BoundMode::Exact, &mut trial_rng(7, 2, 0))
        .map_err(|e| e.to_string())?;
    if !(rep.bound[0].is_finite() && rep.bound[1] < rep.bound[0]) {
        return Err(format!("bound not decreasing: {:?}", rep.bound));
    }
    Ok(())
}

fn psd_power() -> Result<(), String> {
    let mut params = SystemParams::spectrum_reference();
    params.m = 8;
    params.n = 8;
    let c = build_constellation(params.q).map_err(|e| e.to_string())?;
    let s = synthesize_oversampled(&params, &c, WindowKind::Rectangular, 8, 32, &mut trial_rng(7, 3, 0))
        .map_err(|e| e.to_string())?;
    let est = estimate_npsd(&s, 512, 0.5, 60).map_err(|e| e.to_string())?;
    let mean = s.iter().map(|v| v.norm_sqr()).sum::<f64>() / s.len() as f64;
    let rel = (est.total_power() / mean - 1.0).abs();
    if rel > 0.05 {
        return Err(format!("PSD integrates to {} of the signal power", 1.0 + rel));
    }
    Ok(())
}

pub const CHECKS: [Check; 5] = [
    ("constellation unit energy", unit_energy),
    ("noiseless ML detection", noiseless_mld),
    ("LDPC encode and decode", ldpc_round_trip),
    ("union bound decreases", bound_finite),
    ("PSD integrates to signal power", psd_power),
];

/// Runs every check, printing one line each. Returns the failure count.
pub fn run() -> usize {
    let mut failed = 0;
    for (name, f) in CHECKS {
        match f() {
            Ok(()) => println!("ok   {name}"),
            Err(e) => {
                failed += 1;
                println!("FAIL {name}: {e}");
            }
        }
    }
    failed
}
