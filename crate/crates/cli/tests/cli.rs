use otsm_cli::config::ExperimentConfig;
use std::path::Path;
use std::process::{Command, Output};

fn otsm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otsm"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = "[system]\nsnr_db = [0, 6]\n[experiment]\nwindows = [\"rect\"]\ntarget_errors = 100\nmax_trials = 20000\nbatch = 200\n";

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(otsm(&["selftest"], d).status.code(), Some(0));
    assert_eq!(otsm(&["frobnicate"], d).status.code(), Some(2));
    let bad = write(d, "bad.toml", "[system]\nbogus = 1\n");
    assert_eq!(otsm(&["ber", "--config", &bad], d).status.code(), Some(2));
    assert_eq!(otsm(&["ber", "--window", "kaiser"], d).status.code(), Some(2));
    assert_eq!(otsm(&["ber", "--config", "/nonexistent.toml"], d).status.code(), Some(2));
    let big = write(d, "big.toml", "[system]\nm = 16\nn = 16\n");
    let out = otsm(&["ber", "--config", &big], d);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("LMMSE"));
    let off = write(d, "off.toml", "[coding]\nenabled = false\n");
    assert_eq!(otsm(&["coded-ber", "--config", &off], d).status.code(), Some(2));
}

#[test]
fn provenance_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "c.toml", SMALL);
    let out = otsm(&["ber", "--config", &cfg, "--seed", "11", "--out", "res"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(d.join("res/ber_rect.csv")).unwrap();
    let field = |k: &str| {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("# {k}: ")))
            .unwrap()
            .to_string()
    };
    let embedded: String = text
        .lines()
        .filter_map(|l| l.strip_prefix("#   "))
        .map(|l| format!("{l}\n"))
        .collect();
    let parsed: ExperimentConfig = toml::from_str(&embedded).unwrap();
    assert_eq!(parsed.hash(), field("config_hash"));
    assert_eq!(field("seed"), "11");
    assert_eq!(parsed.experiment.seed, 11);
    assert_eq!(parsed.system.snr_db, vec![0.0, 6.0]);
}

#[test]
fn interrupted_run_resumes_to_identical_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "c.toml", SMALL);
    assert!(otsm(&["ber", "--config", &cfg, "--out", "full"], d).status.success());
    let full = std::fs::read_to_string(d.join("full/ber_rect.csv")).unwrap();

    // keep the header and the first data row, plus half of the second
    let cut = full.trim_end().rfind('\n').unwrap() + 1;
    std::fs::create_dir_all(d.join("part")).unwrap();
    std::fs::write(d.join("part/ber_rect.csv"), &full[..cut + 5]).unwrap();
    assert!(otsm(&["ber", "--config", &cfg, "--out", "part"], d).status.success());
    assert_eq!(std::fs::read_to_string(d.join("part/ber_rect.csv")).unwrap(), full);

    // a different config starts the file over
    assert!(otsm(&["ber", "--config", &cfg, "--out", "part", "--seed", "5"], d).status.success());
    assert_ne!(std::fs::read_to_string(d.join("part/ber_rect.csv")).unwrap(), full);
}

#[test]
fn error_target_bounds_relative_ci() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(
        d,
        "c.toml",
        "[system]\nsnr_db = [-2, 0, 4, 8]\n[experiment]\nwindows = [\"rect\", \"hamming\"]\ntarget_errors = 200\nmax_trials = 200000\nbatch = 256\n",
    );
    assert!(otsm(&["ber", "--config", &cfg, "--out", "r"], d).status.success());
    for w in ["rect", "hamming"] {
        let text = std::fs::read_to_string(d.join(format!("r/ber_{w}.csv"))).unwrap();
        let rows: Vec<Vec<f64>> = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("snr_db"))
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), 4);
        for r in rows {
            let (ber, lo, hi, errors, bits) = (r[1], r[2], r[3], r[4], r[5]);
            assert_eq!(ber, errors / bits);
            assert!(lo <= ber && ber <= hi);
            if errors >= 200.0 {
                assert!((hi - lo) / 2.0 <= 0.15 * ber, "{w} at {} dB", r[0]);
            }
        }
    }
}

#[test]
fn psd_and_bound_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(
        d,
        "c.toml",
        "[system]\nm = 8\nn = 8\n[psd]\nsegment_len = 1024\naverages = 40\n[experiment]\nwindows = [\"rect\", \"blackman\"]\n",
    );
    let out = otsm(&["psd", "--config", &cfg, "--out", "p"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let oobe = std::fs::read_to_string(d.join("p/oobe.csv")).unwrap();
    let rows: Vec<&str> = oobe.lines().filter(|l| l.starts_with("blackman,")).collect();
    assert_eq!(rows.len(), 2);
    let delta: f64 = rows[0].split(',').nth(3).unwrap().parse().unwrap();
    assert!(delta > 10.0, "{delta}");
    let psd = std::fs::read_to_string(d.join("p/psd_rect.csv")).unwrap();
    let peak = psd
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("normalized"))
        .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .fold(f64::MIN, f64::max);
    assert_eq!(peak, 0.0);

    let out = otsm(
        &["bound", "--snr-db", "-4,10,20", "--window", "rect", "--out", "b", "--config", &write(d, "b.toml", "[experiment]\nbound_realizations = 3\n")],
        d,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(d.join("b/bound_rect.csv")).unwrap();
    let bounds: Vec<f64> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("snr_db"))
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(bounds.len(), 3);
    assert!(bounds[0] > bounds[1] && bounds[1] > bounds[2]);
}
