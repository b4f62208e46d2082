use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spinqubit_cli::output::{json, map_csv, sweep_csv, Format};
use spinqubit_cli::{cmd_check, cmd_rabimap, cmd_solve, cmd_sweep, cmd_symmetry, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "spinqubit", version, about = "g-matrix and Rabi-frequency simulator for hole spin qubits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Cache directory (overrides the config).
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    /// Constant Zeeman splitting in GHz instead of a constant field.
    #[arg(long, global = true)]
    fixed_zeeman: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// g-matrix, g' and derived tensors at the configured bias.
    Solve,
    /// Rabi frequency over field orientations.
    Rabimap,
    /// Gate-voltage or strain sweep.
    Sweep,
    /// Cross-formula invariant checks on a dense-solvable instance.
    Check,
    /// Mirror detection and g / g' zero-pattern verification.
    Symmetry,
}

fn run(cli: &Cli) -> Result<String, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Validation("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(c) = &cli.cache {
        cfg.cache = Some(c.clone());
    }
    if let Some(z) = cli.fixed_zeeman {
        cfg.field.fixed_zeeman_ghz = Some(z);
        cfg.field.magnitude = None;
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    let text = match cli.command {
        Command::Solve => {
            let (out, hit) = cmd_solve(&cfg)?;
            if hit {
                eprintln!("cache hit {}", out.record.key);
            }
            json(&out)
        }
        Command::Rabimap => {
            let (map, hit) = cmd_rabimap(&cfg)?;
            if hit {
                eprintln!("cache hit");
            }
            match cli.format {
                Format::Csv => map_csv(&map),
                Format::Json => json(&map),
            }
        }
        Command::Sweep => {
            let t = cmd_sweep(&cfg)?;
            match cli.format {
                Format::Csv => sweep_csv(&t),
                Format::Json => json(&t),
            }
        }
        Command::Check => json(&cmd_check(&cfg)?),
        Command::Symmetry => json(&cmd_symmetry(&cfg)?),
    };
    if let Some(out) = &cfg.output {
        std::fs::write(out, &text)?;
        Ok(String::new())
    } else {
        Ok(text)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(text) => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
