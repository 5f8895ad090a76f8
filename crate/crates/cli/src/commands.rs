//! The experiment drivers behind each subcommand.

use crate::config::{ExperimentConfig, LoadedConfig};
use crate::output::{append_timing, key, sci, timing_path, CheckpointCsv, Provenance};
use crate::stats::{wilson, Z95};
use otsm::analysis::union_bound;
use otsm::coding::{ldpc_construct, TurboConfig};
use otsm::constellation::build_constellation;
use otsm::modem::Transceiver;
use otsm::params::n0_from_snr_db;
use otsm::rng::trial_rng;
use otsm::sim::{CodedLink, CodedOutcome, Detector, ErrorCount, UncodedLink};
use otsm::spectral::{estimate_npsd, occupied_band, oobe_report, synthesize_oversampled, NPSD_FLOOR_DB};
use otsm::windows::{sample_window, WindowKind};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Stream domains for [`trial_rng`]. Trials in one domain share their
/// random stream across windows, SNR points and phase-noise levels.
pub const DOMAIN_BER: u64 = 1;
pub const DOMAIN_BOUND: u64 = 2;
pub const DOMAIN_PSD: u64 = 3;
pub const DOMAIN_CODED: u64 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] otsm::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    /// 2 for bad input, 3 for an infeasible request, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use otsm::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(E::Infeasible { .. }) => 3,
            CliError::Core(
                E::InvalidParameter(_)
                | E::Parse(_)
                | E::UnsupportedOrder(_)
                | E::DimensionMismatch { .. }
                | E::InsufficientSamples { .. }
                | E::Construction(_),
            ) => 2,
            CliError::Core(E::Singular(_)) | CliError::Io(_) | CliError::Failed(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Runs trials `0, 1, ...` in batches until `stop` says so or `max_trials`
/// is reached. Results are folded in trial order, and `stop` is only
/// consulted between batches, so the outcome does not depend on the thread
/// count.
fn run_batches<T, F, A, S>(pool: &rayon::ThreadPool, batch: usize, max_trials: u64, trial: F, mut fold: A, stop: S) -> CliResult<u64>
where
    T: Send,
    F: Fn(u64) -> otsm::Result<T> + Sync,
    A: FnMut(T),
    S: Fn() -> bool,
{
    let mut start = 0u64;
    while start < max_trials {
        let end = (start + batch as u64).min(max_trials);
        let results: otsm::Result<Vec<T>> = pool.install(|| (start..end).into_par_iter().map(&trial).collect());
        for r in results? {
            fold(r);
        }
        start = end;
        if stop() {
            break;
        }
    }
    Ok(start)
}

pub struct Context {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
    pool: rayon::ThreadPool,
}

impl Context {
    pub fn new(loaded: LoadedConfig) -> CliResult<Self> {
        loaded.experiment.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(loaded.runtime.threads)
            .build()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
        Ok(Context {
            cfg: loaded.experiment,
            out: loaded.runtime.output,
            pool,
        })
    }

    fn file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Uncoded Monte Carlo BER, one file per window.
pub fn ber(ctx: &Context) -> CliResult<Vec<PathBuf>> {
    let cfg = &ctx.cfg;
    let params = cfg.params()?;
    let detector = cfg.detector()?;
    let csi = cfg.csi()?;
    let e = &cfg.experiment;
    // fail before any work if one of the windows cannot run
    let links = cfg
        .windows()?
        .into_iter()
        .map(|k| Ok((k, UncodedLink::new(&params, k, detector, csi)?)))
        .collect::<otsm::Result<Vec<_>>>()?;
    ensure_dir(&ctx.out)?;
    let prov = Provenance::new("ber", cfg);
    let mut paths = Vec::new();
    for (kind, link) in links {
        let path = ctx.file(&format!("ber_{}.csv", kind.name()));
        let mut header = prov.header(&[
            ("window", kind.name().into()),
            ("detector", detector.to_string()),
            ("csi", csi.to_string()),
            ("ci", "wilson 95%".into()),
        ]);
        header.push_str("snr_db,ber,ci_low,ci_high,bit_errors,bits,trials\n");
        let mut csv = CheckpointCsv::open(&path, &header)?;
        for &snr in &params.snr_db {
            let k = key(snr);
            if csv.is_done(&k) {
                continue;
            }
            let n0 = n0_from_snr_db(snr);
            let started = Instant::now();
            let mut total = ErrorCount::default();
            let total_ref = std::cell::Cell::new(0u64);
            let trials = run_batches(
                &ctx.pool,
                e.batch,
                e.max_trials,
                |t| link.trial(n0, &mut trial_rng(e.seed, DOMAIN_BER, t)),
                |c| {
                    total.add(c);
                    total_ref.set(total.errors);
                },
                || total_ref.get() >= e.target_errors,
            )?;
            let (lo, hi) = wilson(total.errors, total.bits, Z95);
            csv.append(&[
                k.clone(),
                sci(total.ber()),
                sci(lo),
                sci(hi),
                total.errors.to_string(),
                total.bits.to_string(),
                trials.to_string(),
            ])?;
            append_timing(&timing_path(&path), &k, started.elapsed().as_secs_f64())?;
            log::info!("ber {} {snr} dB: {:.3e} ({} errors, {trials} trials)", kind, total.ber(), total.errors);
        }
        paths.push(path);
    }
    Ok(paths)
}

/// Union bound on BER, one file per window.
pub fn bound(ctx: &Context) -> CliResult<Vec<PathBuf>> {
    let cfg = &ctx.cfg;
    let params = cfg.params()?;
    let mode = cfg.bound_mode()?;
    let c = build_constellation(params.q)?;
    ensure_dir(&ctx.out)?;
    let prov = Provenance::new("bound", cfg);
    let mut paths = Vec::new();
    for kind in cfg.windows()? {
        let path = ctx.file(&format!("bound_{}.csv", kind.name()));
        let mut header = prov.header(&[
            ("window", kind.name().into()),
            ("mode", cfg.experiment.bound_mode.clone()),
        ]);
        header.push_str("snr_db,bound,bound_high_snr,ci_half_width,n_pairs,n_realizations,min_rank\n");
        let mut csv = CheckpointCsv::open(&path, &header)?;
        let keys: Vec<String> = params.snr_db.iter().map(|&s| key(s)).collect();
        if keys.iter().all(|k| csv.is_done(k)) {
            paths.push(path);
            continue;
        }
        let w = sample_window(kind, params.m, params.symbol_duration())?;
        let tx = Transceiver::new(params.n, w.clone(), w)?;
        let started = Instant::now();
        let mut rng = trial_rng(cfg.experiment.seed, DOMAIN_BOUND, 0);
        let rep = ctx.pool.install(|| {
            union_bound(&params, &tx, &c, &params.snr_db, cfg.experiment.bound_realizations, mode, &mut rng)
        })?;
        for (i, k) in keys.iter().enumerate() {
            if csv.is_done(k) {
                continue;
            }
            csv.append(&[
                k.clone(),
                sci(rep.bound[i]),
                sci(rep.bound_high_snr[i]),
                sci(rep.ci_half_width[i]),
                rep.n_pairs.to_string(),
                rep.n_realizations.to_string(),
                rep.min_rank.to_string(),
            ])?;
        }
        append_timing(&timing_path(&path), "all", started.elapsed().as_secs_f64())?;
        log::info!("bound {kind}: done");
        paths.push(path);
    }
    Ok(paths)
}

/// One entry of the OOBE table.
#[derive(Debug, Clone, PartialEq)]
pub struct OobeRow {
    pub window: WindowKind,
    pub offset: f64,
    pub npsd_db: f64,
    pub delta_vs_rect_db: f64,
}

/// Welch NPSD per window plus an OOBE summary in `oobe.csv`.
pub fn psd(ctx: &Context) -> CliResult<(Vec<PathBuf>, Vec<OobeRow>)> {
    let cfg = &ctx.cfg;
    let params = cfg.params()?;
    let p = &cfg.psd;
    let c = build_constellation(params.q)?;
    ensure_dir(&ctx.out)?;
    let prov = Provenance::new("psd", cfg);
    let hop = ((p.segment_len as f64 * (1.0 - p.overlap)).round() as usize).max(1);
    let needed = (p.segment_len + (p.averages - 1) * hop).max(2 * p.segment_len);
    let per_frame = params.mn() * p.oversample;
    let frames = needed.div_ceil(per_frame);
    let band = occupied_band(params.m, p.oversample);

    let estimate = |kind: WindowKind| -> otsm::Result<_> {
        let mut rng = trial_rng(cfg.experiment.seed, DOMAIN_PSD, 0);
        let stream = synthesize_oversampled(&params, &c, kind, p.oversample, frames, &mut rng)?;
        let est = estimate_npsd(&stream, p.segment_len, p.overlap, p.averages)?;
        let rep = oobe_report(&est, band, &p.offsets)?;
        Ok((est, rep))
    };
    let (_, rect) = estimate(WindowKind::Rectangular)?;
    let mut paths = Vec::new();
    let mut rows = Vec::new();
    for kind in cfg.windows()? {
        let (est, rep) = estimate(kind)?;
        let path = ctx.file(&format!("psd_{}.csv", kind.name()));
        let mut text = prov.header(&[("window", kind.name().into())]);
        text.push_str("normalized_freq,npsd_db\n");
        for (f, v) in est.freq.iter().zip(&est.npsd_db) {
            writeln!(text, "{f:.8},{v:.4}").unwrap();
        }
        std::fs::write(&path, text)?;
        paths.push(path);
        for (pt, r) in rep.points.iter().zip(&rect.points) {
            rows.push(OobeRow {
                window: kind,
                offset: pt.offset,
                npsd_db: pt.npsd_db,
                delta_vs_rect_db: r.npsd_db - pt.npsd_db,
            });
        }
    }
    let path = ctx.file("oobe.csv");
    let mut text = prov.header(&[
        ("estimator", "welch, periodic hann taper".into()),
        ("segment_len", p.segment_len.to_string()),
        ("overlap", p.overlap.to_string()),
        ("averages", p.averages.to_string()),
        ("oversample", p.oversample.to_string()),
        ("frames", frames.to_string()),
        ("band", format!("[{:.8}, {:.8}] cycles/sample", band.0, band.1)),
        ("offset_unit", "half-bandwidths from the band center, worse side".into()),
        ("floor_db", NPSD_FLOOR_DB.to_string()),
    ]);
    text.push_str("window,offset,npsd_db,delta_vs_rect_db,at_floor\n");
    for r in &rows {
        writeln!(
            text,
            "{},{},{:.3},{:.3},{}",
            r.window.name(),
            key(r.offset),
            r.npsd_db,
            r.delta_vs_rect_db,
            r.npsd_db <= NPSD_FLOOR_DB
        )
        .unwrap();
    }
    std::fs::write(&path, text)?;
    paths.push(path);
    Ok((paths, rows))
}

#[derive(Default)]
struct CodedTotals {
    coded: ErrorCount,
    uncoded: ErrorCount,
    unsat: Vec<u64>,
    codewords: u64,
}

impl CodedTotals {
    fn add(&mut self, o: CodedOutcome) {
        self.coded.add(o.coded);
        self.uncoded.add(o.uncoded);
        if self.unsat.len() < o.unsatisfied.len() {
            self.unsat.resize(o.unsatisfied.len(), 0);
        }
        for (a, b) in self.unsat.iter_mut().zip(&o.unsatisfied) {
            *a += *b as u64;
        }
        self.codewords += 1;
    }
}

/// LDPC-coded BER with the iterative receiver, one file per window and
/// phase-noise level in `coding.sigma2_sweep`.
pub fn coded_ber(ctx: &Context) -> CliResult<Vec<PathBuf>> {
    let cfg = &ctx.cfg;
    let cc = &cfg.coding;
    if !cc.enabled {
        return Err(CliError::Usage("coded-ber needs coding.enabled = true".into()));
    }
    let base = cfg.params()?;
    let csi = cfg.coded_csi()?;
    let turbo = TurboConfig {
        t_det: cc.t_det,
        t_ldpc: cc.t_ldpc,
    };
    let code = ldpc_construct(cc.codeword_len, cc.rate, cc.code_seed)?;
    let windows = cfg.windows()?;
    // the detector is always LMMSE here; reject frames it cannot handle early
    UncodedLink::new(&base, WindowKind::Rectangular, Detector::Lmmse, csi)?;
    ensure_dir(&ctx.out)?;
    let prov = Provenance::new("coded-ber", cfg);
    let e = &cfg.experiment;
    let mut paths = Vec::new();
    for kind in windows {
        for &s2 in &cc.sigma2_sweep {
            let mut params = base.clone();
            params.sigma2_phn = s2;
            let link = CodedLink::new(&params, kind, csi, code.clone(), cc.interleaver_seed, turbo)?;
            let path = ctx.file(&format!("coded_ber_{}_s{}.csv", kind.name(), key(s2)));
            let mut header = prov.header(&[
                ("window", kind.name().into()),
                ("sigma2_phn", key(s2)),
                ("code", format!("n={} k={} rank={}", code.n(), code.k(), code.rank())),
                ("frames_per_codeword", link.framing()?.frames().to_string()),
                ("csi", csi.to_string()),
                ("ci", "wilson 95%".into()),
            ]);
            header.push_str("snr_db,ber,ci_low,ci_high,bit_errors,bits,uncoded_ber,uncoded_errors,uncoded_bits,codewords");
            for i in 1..=cc.t_det {
                write!(header, ",mean_unsat_it{i}").unwrap();
            }
            header.push('\n');
            let mut csv = CheckpointCsv::open(&path, &header)?;
            for &snr in &params.snr_db {
                let k = key(snr);
                if csv.is_done(&k) {
                    continue;
                }
                let n0 = n0_from_snr_db(snr);
                let started = Instant::now();
                let mut tot = CodedTotals::default();
                let errs = std::cell::Cell::new(0u64);
                run_batches(
                    &ctx.pool,
                    e.batch,
                    cc.max_codewords,
                    |t| link.trial(n0, &mut trial_rng(e.seed, DOMAIN_CODED, t)),
                    |o| {
                        tot.add(o);
                        errs.set(tot.coded.errors);
                    },
                    || errs.get() >= cc.target_errors,
                )?;
                let (lo, hi) = wilson(tot.coded.errors, tot.coded.bits, Z95);
                let mut row = vec![
                    k.clone(),
                    sci(tot.coded.ber()),
                    sci(lo),
                    sci(hi),
                    tot.coded.errors.to_string(),
                    tot.coded.bits.to_string(),
                    sci(tot.uncoded.ber()),
                    tot.uncoded.errors.to_string(),
                    tot.uncoded.bits.to_string(),
                    tot.codewords.to_string(),
                ];
                row.extend(tot.unsat.iter().map(|&u| format!("{:.4}", u as f64 / tot.codewords as f64)));
                csv.append(&row)?;
                append_timing(&timing_path(&path), &k, started.elapsed().as_secs_f64())?;
                log::info!(
                    "coded {kind} s2={s2} {snr} dB: coded {:.3e}, uncoded {:.3e}, {} codewords",
                    tot.coded.ber(),
                    tot.uncoded.ber(),
                    tot.codewords
                );
            }
            paths.push(path);
        }
    }
    Ok(paths)
}
