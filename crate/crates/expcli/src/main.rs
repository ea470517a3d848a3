use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kdntk_cli::config::ExperimentKind;
use kdntk_cli::record::OutputFormat;
use kdntk_cli::{run_file, validate_file, RunOptions};

/// Seeded distillation experiments on linearized wide networks.
#[derive(Debug, Parser)]
#[command(name = "kdntk", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory; overrides `output` in the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Root seed; overrides `seed` in the config.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Effective student logits over a (ρ, T, z_t) grid.
    EffectiveLogits,
    /// Empirical-vs-analytic kernel error over widths.
    NtkCheck,
    /// Data inefficiency I(n) for tasks or distillation targets.
    Inefficiency,
    /// Transfer risk against n with power-law fits.
    Risk,
    /// Angle distribution and transfer-risk bound check.
    AngleDist,
    /// Hard-label correction against teacher stopping epoch.
    HardLabelEffect,
    /// Weight-change norm of zero-function vs task fits.
    ZeroNorm,
    /// Check a config without running it.
    Validate,
}

impl Command {
    fn kind(&self) -> Option<ExperimentKind> {
        Some(match self {
            Command::EffectiveLogits => ExperimentKind::EffectiveLogits,
            Command::NtkCheck => ExperimentKind::NtkCheck,
            Command::Inefficiency => ExperimentKind::Inefficiency,
            Command::Risk => ExperimentKind::Risk,
            Command::AngleDist => ExperimentKind::AngleDist,
            Command::HardLabelEffect => ExperimentKind::HardLabelEffect,
            Command::ZeroNorm => ExperimentKind::ZeroNorm,
            Command::Validate => return None,
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(config) = cli.config.clone() else {
        eprintln!("error: --config PATH is required");
        return ExitCode::from(1);
    };

    if let Command::Validate = cli.command {
        return match validate_file(&config, None) {
            Ok(report) => {
                for w in &report.warnings {
                    eprintln!("warning: {w}");
                }
                println!(
                    "OK: {} (estimated kernel-solve cost {:.3e})",
                    report.kind, report.solve_cost
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        };
    }

    if let Ok(report) = validate_file(&config, cli.command.kind()) {
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
    }
    let opts = RunOptions {
        kind: cli.command.kind(),
        out_dir: cli.out,
        seed: cli.seed,
        threads: cli.threads,
        format: cli.format,
    };
    match run_file(&config, &opts) {
        Ok(outcome) => {
            println!(
                "[{}] {} rows -> {} (manifest {})",
                outcome.kind,
                outcome.records.len(),
                outcome.records_path.display(),
                outcome.manifest_path.display()
            );
            if let Some(e) = &outcome.error {
                eprintln!("error: {e}; completed rows kept, manifest marked incomplete");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
