//! Experiment configuration.
//!
//! A config file is TOML with up to five sections. Every key is optional; a
//! missing key takes its value from the system preset (`system.preset`,
//! `"mld"` for `ber`/`bound`, `"spectrum"` for `psd`/`coded-ber`) or from the
//! defaults below. Unknown keys are rejected.
//!
//! ```toml
//! [system]
//! preset = "mld"           # mld | spectrum
//! m = 4                    # delay bins
//! n = 2                    # sequency bins (power of two)
//! delta_f = 15000.0        # subcarrier spacing, Hz
//! f_c = 40e9               # carrier, Hz
//! q = 2                    # constellation order: 2, 4, 16, 64
//! paths = 2
//! sigma2_phn = 0.3         # phase-noise increment variance
//! phn_unit = "deg2"        # deg2 (variance in deg^2) | deg (std in degrees)
//! theta0 = "uniform"       # or a fixed initial phase in degrees
//! l_max = 3
//! k_max = 1                # explicit Doppler bound, or instead:
//! # v_max_kmh = 800.0      # derive it from speed and carrier
//! fractional_doppler = false
//! snr_db = [0, 4, 8]
//!
//! [experiment]
//! windows = ["rect", "hamming"]
//! detector = "mld"         # mld | lmmse
//! csi = "perfect"          # perfect | common-phase
//! target_errors = 200
//! max_trials = 1000000
//! batch = 256
//! seed = 1
//! bound_realizations = 100
//! bound_mode = "exact"     # exact | sampled
//! bound_pairs = 10000      # pairs per realization in sampled mode
//!
//! [coding]
//! enabled = true
//! codeword_len = 1024
//! rate = 0.5
//! code_seed = 1
//! interleaver_seed = 2
//! t_det = 8
//! t_ldpc = 6
//! sigma2_sweep = [0.3, 3.0]
//! csi = "common-phase"
//! target_errors = 200
//! max_codewords = 2000
//!
//! [psd]
//! oversample = 8
//! segment_len = 4096
//! overlap = 0.5
//! averages = 200
//! offsets = [1.5, 2.0]     # in half-bandwidths from the band center
//!
//! [runtime]                # not part of the provenance hash
//! output = "out"
//! threads = 1
//! ```

use otsm::analysis::BoundMode;
use otsm::params::{DopplerLimit, PhnUnit, SystemParams, Theta0};
use otsm::sim::{CsiMode, Detector};
use otsm::windows::WindowKind;
use otsm::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Mld,
    Spectrum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialPhase {
    Named(String),
    Degrees(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub preset: Preset,
    pub m: usize,
    pub n: usize,
    pub delta_f: f64,
    pub f_c: f64,
    pub q: usize,
    pub paths: usize,
    pub sigma2_phn: f64,
    pub phn_unit: String,
    pub theta0: InitialPhase,
    pub l_max: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_max_kmh: Option<f64>,
    pub fractional_doppler: bool,
    pub snr_db: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub windows: Vec<String>,
    pub detector: String,
    pub csi: String,
    pub target_errors: u64,
    pub max_trials: u64,
    pub batch: usize,
    pub seed: u64,
    pub bound_realizations: usize,
    pub bound_mode: String,
    pub bound_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodingConfig {
    pub enabled: bool,
    pub codeword_len: usize,
    pub rate: f64,
    pub code_seed: u64,
    pub interleaver_seed: u64,
    pub t_det: usize,
    pub t_ldpc: usize,
    pub sigma2_sweep: Vec<f64>,
    pub csi: String,
    pub target_errors: u64,
    pub max_codewords: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsdConfig {
    pub oversample: usize,
    pub segment_len: usize,
    pub overlap: f64,
    pub averages: usize,
    pub offsets: Vec<f64>,
}

/// Settings that change where and how fast a run happens, not its results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuntimeConfig {
    pub output: PathBuf,
    pub threads: usize,
}

/// Everything that determines the numbers a run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub experiment: RunConfig,
    pub coding: CodingConfig,
    pub psd: PsdConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FullConfig {
    #[serde(flatten)]
    experiment: ExperimentConfig,
    runtime: RuntimeConfig,
}

impl SystemConfig {
    pub fn preset(preset: Preset) -> Self {
        let p = match preset {
            Preset::Mld => SystemParams::mld_reference(),
            Preset::Spectrum => SystemParams::spectrum_reference(),
        };
        let (k_max, v_max_kmh) = match p.doppler {
            DopplerLimit::Explicit(k) => (Some(k), None),
            DopplerLimit::FromSpeed { v_max_kmh } => (None, Some(v_max_kmh)),
        };
        SystemConfig {
            preset,
            m: p.m,
            n: p.n,
            delta_f: p.delta_f,
            f_c: p.f_c,
            q: p.q,
            paths: p.paths,
            sigma2_phn: p.sigma2_phn,
            phn_unit: "deg2".into(),
            theta0: InitialPhase::Named("uniform".into()),
            l_max: p.l_max,
            k_max,
            v_max_kmh,
            fractional_doppler: p.fractional_doppler,
            snr_db: p.snr_db,
        }
    }

    pub fn to_params(&self) -> Result<SystemParams> {
        let phn_unit = match self.phn_unit.as_str() {
            "deg2" => PhnUnit::SquaredDegrees,
            "deg" => PhnUnit::StdDegrees,
            other => return Err(Error::Parse(format!("phn_unit '{other}' (expected deg2 or deg)"))),
        };
        let theta0 = match &self.theta0 {
            InitialPhase::Named(s) if s == "uniform" => Theta0::Uniform,
            InitialPhase::Named(s) => {
                return Err(Error::Parse(format!("theta0 '{s}' (expected \"uniform\" or degrees)")))
            }
            InitialPhase::Degrees(d) => Theta0::Fixed(*d),
        };
        let doppler = match (self.k_max, self.v_max_kmh) {
            (Some(k), None) => DopplerLimit::Explicit(k),
            (None, Some(v)) => DopplerLimit::FromSpeed { v_max_kmh: v },
            _ => return Err(Error::invalid("set exactly one of system.k_max and system.v_max_kmh")),
        };
        let p = SystemParams {
            m: self.m,
            n: self.n,
            delta_f: self.delta_f,
            f_c: self.f_c,
            q: self.q,
            paths: self.paths,
            sigma2_phn: self.sigma2_phn,
            phn_unit,
            theta0,
            l_max: self.l_max,
            doppler,
            fractional_doppler: self.fractional_doppler,
            snr_db: self.snr_db.clone(),
        };
        p.validate()?;
        Ok(p)
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            windows: WindowKind::ALL.iter().map(|k| k.name().to_string()).collect(),
            detector: "mld".into(),
            csi: "perfect".into(),
            target_errors: 200,
            max_trials: 1_000_000,
            batch: 256,
            seed: 1,
            bound_realizations: 100,
            bound_mode: "exact".into(),
            bound_pairs: 10_000,
        }
    }
}

impl Default for CodingConfig {
    fn default() -> Self {
        CodingConfig {
            enabled: true,
            codeword_len: 1024,
            rate: 0.5,
            code_seed: 1,
            interleaver_seed: 2,
            t_det: 8,
            t_ldpc: 6,
            sigma2_sweep: vec![0.3, 3.0],
            csi: "common-phase".into(),
            target_errors: 200,
            max_codewords: 2000,
        }
    }
}

impl Default for PsdConfig {
    fn default() -> Self {
        PsdConfig {
            oversample: 8,
            segment_len: 4096,
            overlap: 0.5,
            averages: 200,
            offsets: vec![1.5, 2.0],
        }
    }
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig {
            output: PathBuf::from("out"),
            threads: 1,
        }
    }
}

/// Fully resolved configuration plus runtime options.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub experiment: ExperimentConfig,
    pub runtime: RuntimeConfig,
}

impl ExperimentConfig {
    pub fn defaults(preset: Preset) -> Self {
        ExperimentConfig {
            system: SystemConfig::preset(preset),
            experiment: RunConfig::default(),
            coding: CodingConfig::default(),
            psd: PsdConfig::default(),
        }
    }

    pub fn params(&self) -> Result<SystemParams> {
        self.system.to_params()
    }

    pub fn windows(&self) -> Result<Vec<WindowKind>> {
        if self.experiment.windows.is_empty() {
            return Err(Error::invalid("experiment.windows is empty"));
        }
        self.experiment.windows.iter().map(|w| w.parse()).collect()
    }

    pub fn detector(&self) -> Result<Detector> {
        self.experiment.detector.parse()
    }

    pub fn csi(&self) -> Result<CsiMode> {
        self.experiment.csi.parse()
    }

    pub fn coded_csi(&self) -> Result<CsiMode> {
        self.coding.csi.parse()
    }

    pub fn bound_mode(&self) -> Result<BoundMode> {
        match self.experiment.bound_mode.as_str() {
            "exact" => Ok(BoundMode::Exact),
            "sampled" => Ok(BoundMode::Sampled {
                pairs_per_realization: self.experiment.bound_pairs,
            }),
            other => Err(Error::Parse(format!("bound_mode '{other}' (expected exact or sampled)"))),
        }
    }

    /// Checks every field that can be checked without running anything.
    pub fn validate(&self) -> Result<()> {
        self.params()?;
        self.windows()?;
        self.detector()?;
        self.csi()?;
        self.coded_csi()?;
        self.bound_mode()?;
        let e = &self.experiment;
        if e.target_errors == 0 || e.max_trials == 0 || e.batch == 0 {
            return Err(Error::invalid("target_errors, max_trials and batch must be positive"));
        }
        if e.bound_realizations == 0 || e.bound_pairs == 0 {
            return Err(Error::invalid("bound_realizations and bound_pairs must be positive"));
        }
        let c = &self.coding;
        if c.t_det == 0 || c.codeword_len == 0 || c.max_codewords == 0 || c.target_errors == 0 {
            return Err(Error::invalid("coding lengths, iteration and trial counts must be positive"));
        }
        if c.sigma2_sweep.is_empty() || c.sigma2_sweep.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::invalid("coding.sigma2_sweep needs non-negative values"));
        }
        let p = &self.psd;
        if p.oversample < 4 || p.segment_len < 16 || p.averages == 0 || !(0.0..1.0).contains(&p.overlap) {
            return Err(Error::invalid("psd needs oversample >= 4, segment_len >= 16, averages >= 1, overlap in [0, 1)"));
        }
        if p.offsets.iter().any(|o| !(*o > 1.0)) {
            return Err(Error::invalid("psd offsets must lie outside the band (> 1 half-bandwidth)"));
        }
        Ok(())
    }

    /// Canonical TOML used for provenance.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML, hex.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Resolves a config file (or no file) against the preset for a command.
pub fn load(text: Option<&str>, default_preset: Preset) -> Result<LoadedConfig> {
    let user: toml::Table = match text {
        Some(t) => toml::from_str(t).map_err(|e| Error::Parse(format!("config: {e}")))?,
        None => toml::Table::new(),
    };
    let preset = match user.get("system").and_then(|s| s.get("preset")) {
        Some(v) => v
            .clone()
            .try_into::<Preset>()
            .map_err(|_| Error::Parse(format!("system.preset {v} (expected \"mld\" or \"spectrum\")")))?,
        None => default_preset,
    };
    let full = FullConfig {
        experiment: ExperimentConfig::defaults(preset),
        runtime: RuntimeConfig::default(),
    };
    let mut base: toml::Table = toml::Table::try_from(&full).expect("defaults serialize");
    // an explicit Doppler choice replaces the preset's
    if let Some(sys) = user.get("system").and_then(|s| s.as_table()) {
        if let Some(toml::Value::Table(b)) = base.get_mut("system") {
            if sys.contains_key("k_max") || sys.contains_key("v_max_kmh") {
                b.remove("k_max");
                b.remove("v_max_kmh");
            }
        }
    }
    merge(&mut base, user);
    let full: FullConfig = toml::Value::Table(base)
        .try_into()
        .map_err(|e| Error::Parse(format!("config: {e}")))?;
    Ok(LoadedConfig {
        experiment: full.experiment,
        runtime: full.runtime,
    })
}
