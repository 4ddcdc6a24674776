use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use distobs_cli::{analyze, compare, simulate, to_json, CliError, Overrides, ScenarioConfig, EXIT_CONFIG};

#[derive(Parser, Debug)]
#[command(name = "distobs", version, about = "Simulate and analyze adaptive distributed observers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the configured observers; writes trace.csv and summary.json.
    Simulate(RunArgs),
    /// Run both observers on the same scenario; writes compare.json and compare.txt.
    Compare(RunArgs),
    /// Static checks without integration; prints JSON (and writes analysis.json with --out-dir).
    Analyze(AnalyzeArgs),
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t-final")]
    t_final: Option<f64>,
    /// Keep every k-th integration step in the trace.
    #[arg(long)]
    stride: Option<usize>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "out-dir", default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
}

fn load(c: &Common) -> Result<ScenarioConfig, CliError> {
    let mut cfg = ScenarioConfig::load(&c.config)?;
    cfg.apply(&Overrides {
        seed: c.seed,
        dt: c.dt,
        t_final: c.t_final,
        stride: c.stride,
    });
    // flags can break an otherwise valid file (e.g. --dt 0)
    cfg.to_scenario()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => {
            let cfg = load(&a.common)?;
            let summary = simulate(&cfg, &a.out_dir)?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            let worst = |s: &Option<distobs_cli::report::ObserverSummary>| {
                s.as_ref()
                    .and_then(|s| s.terminal.get("err_y"))
                    .map(|v| v.iter().copied().fold(0.0, f64::max))
            };
            if let Some(e) = worst(&summary.output_based) {
                println!("output_based: max terminal |y~| = {e:.3e}");
            }
            if let Some(e) = worst(&summary.state_based) {
                println!("state_based:  max terminal |y~| = {e:.3e}");
            }
            println!("wrote {}", a.out_dir.display());
        }
        Command::Compare(a) => {
            let cfg = load(&a.common)?;
            let report = compare(&cfg, &a.out_dir)?;
            print!("{}", report.table());
        }
        Command::Analyze(a) => {
            let cfg = load(&a.common)?;
            let report = analyze(&cfg)?;
            let json = to_json(&report);
            if let Some(dir) = &a.out_dir {
                std::fs::create_dir_all(dir)
                    .and_then(|_| std::fs::write(dir.join("analysis.json"), &json))
                    .map_err(|e| CliError::Io {
                        context: format!("writing {}", dir.display()),
                        source: e,
                    })?;
            }
            print!("{json}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
