use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use kamforge::artifact::{error_json, write_all, Stamp};
use kamforge::{run, CliError, Command, ExperimentConfig, Format, Overrides};

/// Reversible KAM toolkit: unfoldings, nondegeneracy, Diophantine sets,
/// coverings, homological equations, KAM steps and response tori.
#[derive(Parser, Debug)]
#[command(name = "kamforge", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Check tolerance for residuals and symmetry defects.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn execute(cli: &Cli, stamp: &mut Stamp) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if cfg.command != cli.command {
        return Err(CliError::Config(format!("config is for {}, not {}", cfg.command, cli.command)));
    }
    cfg.apply(&Overrides {
        seed: cli.seed,
        tol: cli.tol,
        format: cli.format,
    });
    let cfg = cfg.resolve()?;
    stamp.digest = Some(cfg.digest());
    let out = run(&cfg)?;
    write_all(&cli.out, &out.files)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help, --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rec = CliError::Usage(e.to_string()).record();
            eprintln!("{}", error_json(&Stamp { command: None, digest: None }, &rec));
            return ExitCode::from(2);
        }
    };
    let mut stamp = Stamp {
        command: Some(cli.command),
        digest: None,
    };
    match execute(&cli, &mut stamp) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let line = error_json(&stamp, &e.record());
            eprintln!("{line}");
            if std::fs::create_dir_all(&cli.out).is_ok() {
                let _ = std::fs::write(cli.out.join("error.json"), format!("{line}\n"));
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
