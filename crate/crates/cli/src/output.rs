//! Result files: provenance headers and per-row checkpointing.
//!
//! Every result file starts with `#` comment lines carrying the command, the
//! config hash, the seed and the full resolved config. Data rows are
//! appended and flushed one at a time, so an interrupted run leaves a valid
//! prefix. Reopening a file whose header matches byte for byte resumes after
//! the last complete row; any other header means the file is rewritten.

use crate::config::ExperimentConfig;
use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct Provenance {
    pub command: String,
    pub hash: String,
    pub seed: u64,
    pub toml: String,
}

impl Provenance {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        Provenance {
            command: command.to_string(),
            hash: cfg.hash(),
            seed: cfg.experiment.seed,
            toml: cfg.to_toml(),
        }
    }

    /// Comment block. `extra` lines are written as `# key: value`.
    pub fn header(&self, extra: &[(&str, String)]) -> String {
        let mut h = format!(
            "# otsm {} {}\n# config_hash: {}\n# seed: {}\n",
            self.command,
            env!("CARGO_PKG_VERSION"),
            self.hash,
            self.seed
        );
        for (k, v) in extra {
            h.push_str(&format!("# {k}: {v}\n"));
        }
        h.push_str("# config:\n");
        for line in self.toml.lines() {
            h.push_str("#   ");
            h.push_str(line);
            h.push('\n');
        }
        h
    }
}

/// Formats a float for a key column, shortest round-trip form.
pub fn key(x: f64) -> String {
    format!("{x}")
}

/// Formats a float for a value column, shortest round-trip form in
/// scientific notation.
pub fn sci(x: f64) -> String {
    format!("{x:e}")
}

/// CSV file that can be resumed row by row.
#[derive(Debug)]
pub struct CheckpointCsv {
    path: PathBuf,
    file: File,
    done: BTreeSet<String>,
}

impl CheckpointCsv {
    /// Opens `path` for a run whose full header (comments plus the column
    /// line) is `header`. Returns the file and whether it was resumed.
    pub fn open(path: &Path, header: &str) -> io::Result<Self> {
        let mut done = BTreeSet::new();
        let mut resumed = false;
        if let Ok(text) = fs::read_to_string(path) {
            if let Some(body) = text.strip_prefix(header) {
                // drop a torn final line
                let complete = match body.rfind('\n') {
                    Some(i) => &body[..=i],
                    None => "",
                };
                for line in complete.lines() {
                    if let Some(k) = line.split(',').next() {
                        done.insert(k.to_string());
                    }
                }
                fs::write(path, format!("{header}{complete}"))?;
                resumed = true;
            } else {
                log::warn!("{} has a different header; starting over", path.display());
            }
        }
        if !resumed {
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir)?;
            }
            fs::write(path, header)?;
        } else if !done.is_empty() {
            log::info!("{}: resuming, {} rows already present", path.display(), done.len());
        }
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(CheckpointCsv {
            path: path.to_path_buf(),
            file,
            done,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn is_done(&self, key: &str) -> bool {
        self.done.contains(key)
    }

    pub fn append(&mut self, fields: &[String]) -> io::Result<()> {
        writeln!(self.file, "{}", fields.join(","))?;
        self.file.flush()?;
        if let Some(k) = fields.first() {
            self.done.insert(k.clone());
        }
        Ok(())
    }
}

/// Path of the wall-clock sidecar for a result file.
pub fn timing_path(path: &Path) -> PathBuf {
    path.with_extension("timing.csv")
}

/// Appends one `key,seconds` line to a timing sidecar, creating it if needed.
pub fn append_timing(path: &Path, key: &str, seconds: f64) -> io::Result<()> {
    let fresh = !path.exists();
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(f, "key,wall_seconds")?;
    }
    writeln!(f, "{key},{seconds:.3}")
}
