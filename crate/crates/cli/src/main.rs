use clap::{Args, Parser, Subcommand};
use otsm_cli::commands::{self, CliError, CliResult, Context};
use otsm_cli::config::{load, LoadedConfig, Preset};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "otsm", version, about = "OTSM link simulation and analysis")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML config file; missing keys take preset defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed (overrides experiment.seed)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides runtime.output)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Window to run; repeat for several (overrides experiment.windows)
    #[arg(long = "window", global = true)]
    windows: Vec<String>,
    /// Comma-separated SNR grid in dB (overrides system.snr_db)
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    snr_db: Vec<f64>,
    /// Worker threads (overrides runtime.threads)
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Uncoded Monte Carlo BER
    Ber,
    /// Union bound on the ML bit error rate
    Bound,
    /// Welch NPSD and out-of-band emission
    Psd,
    /// LDPC-coded BER with iterative detection and decoding
    CodedBer,
    /// Quick sanity checks of the library
    Selftest,
}

fn resolve(global: &Global, preset: Preset) -> CliResult<LoadedConfig> {
    let text = match &global.config {
        Some(p) => Some(
            std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?,
        ),
        None => None,
    };
    let mut cfg = load(text.as_deref(), preset)?;
    if let Some(s) = global.seed {
        cfg.experiment.experiment.seed = s;
    }
    if let Some(o) = &global.out {
        cfg.runtime.output = o.clone();
    }
    if !global.windows.is_empty() {
        cfg.experiment.experiment.windows = global.windows.clone();
    }
    if !global.snr_db.is_empty() {
        cfg.experiment.system.snr_db = global.snr_db.clone();
    }
    if let Some(t) = global.threads {
        cfg.runtime.threads = t;
    }
    Ok(cfg)
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let preset = match cli.command {
        Command::Ber | Command::Bound | Command::Selftest => Preset::Mld,
        Command::Psd | Command::CodedBer => Preset::Spectrum,
    };
    if let Command::Selftest = cli.command {
        let failed = otsm_cli::selftest::run();
        if failed > 0 {
            return Err(CliError::Failed(format!("{failed} self-checks failed")));
        }
        return Ok(());
    }
    let ctx = Context::new(resolve(&cli.global, preset)?)?;
    match cli.command {
        Command::Ber => report(&commands::ber(&ctx)?),
        Command::Bound => report(&commands::bound(&ctx)?),
        Command::Psd => {
            let (paths, rows) = commands::psd(&ctx)?;
            report(&paths);
            for r in rows {
                println!(
                    "{:<14} offset {:>4}: {:>9.2} dB ({:+.2} dB vs rect)",
                    r.window.name(),
                    r.offset,
                    r.npsd_db,
                    r.delta_vs_rect_db
                );
            }
        }
        Command::CodedBer => report(&commands::coded_ber(&ctx)?),
        Command::Selftest => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
