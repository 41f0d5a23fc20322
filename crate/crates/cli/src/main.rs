use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use majorana_nh::{execute, resolve, CliError, Command, Overrides, OUT_ENV, PRESET_IDS, THREADS_ENV};
use majorana_nh_core::model::EnergyScale;

#[derive(Parser)]
#[command(name = "majorana-nh", version, about = "Spectra, exceptional points and skin effect of non-Hermitian Yao-Lee models")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Bloch spectrum on a bond-phase grid or at listed momenta.
    BlochSpectrum(Common),
    /// Closed-form and scanned exceptional points.
    EpFind(Common),
    /// Fermi arcs joining exceptional points.
    ArcTrace(Common),
    /// Skin-effect criterion per flavour of a flavour-diagonal model.
    SkinCheck(Common),
    /// Open or periodic ribbon spectra with localization classes.
    RibbonSweep(Common),
    /// Site-resolved right-eigenvector weights.
    Localization(Common),
    /// Regenerate the data behind a figure.
    Reproduce {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESET_IDS))]
        preset: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    Raw,
    Half,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
    #[arg(long, env = THREADS_ENV)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    scale: Option<Scale>,
}

fn run(command: Command, common: Common, preset: Option<String>) -> Result<(), CliError> {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Numeric(e.to_string()))?;
    }
    let text = common.config.as_ref().map(std::fs::read_to_string).transpose()?;
    let overrides = Overrides {
        out: common.out,
        seed: common.seed,
        scale: common.scale.map(|s| match s {
            Scale::Raw => EnergyScale::Raw,
            Scale::Half => EnergyScale::Half,
        }),
    };
    let (config, preset) = resolve(command, text.as_deref(), preset.as_deref(), &overrides)?;
    let out = PathBuf::from(&config.output.dir);
    let report = execute(&config, &out, preset.as_ref())?;
    if let Some(r) = report {
        for c in &r.checks {
            let status = if c.pass { "ok" } else { "MISMATCH" };
            println!("{status:>8} {}: expected {}, observed {}", c.name, c.expected, c.observed);
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common, preset) = match cli.command {
        Sub::BlochSpectrum(c) => (Command::BlochSpectrum, c, None),
        Sub::EpFind(c) => (Command::EpFind, c, None),
        Sub::ArcTrace(c) => (Command::ArcTrace, c, None),
        Sub::SkinCheck(c) => (Command::SkinCheck, c, None),
        Sub::RibbonSweep(c) => (Command::RibbonSweep, c, None),
        Sub::Localization(c) => (Command::Localization, c, None),
        Sub::Reproduce { preset, common } => (Command::Reproduce, common, preset),
    };
    match run(command, common, preset) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("majorana-nh: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
