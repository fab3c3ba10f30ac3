use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use knxlab::experiment::{self, ExperimentConfig, ExperimentError};

#[derive(Parser)]
#[command(name = "knxlab", version, about = "KNX false-data-injection lab: simulate, measure energy impact, detect")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate baseline, attack, single-relay and null captures.
    Simulate,
    /// Run the HVAC energy-impact scenarios.
    Hvac,
    /// Turn captures into feature files.
    Featurize,
    /// Train and evaluate every window × feature × algorithm cell.
    Train,
    /// Classify the windows of a capture with a trained model.
    Detect {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        capture: PathBuf,
    },
    /// simulate, hvac, featurize, train and report in one go.
    Suite,
    /// Plot-ready CSVs and a text summary from stored results.
    Report,
}

fn load_config(common: &Common) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text).map_err(|e| match e {
                ExperimentError::Config(m) => ExperimentError::Config(format!("{}: {m}", path.display())),
                other => other,
            })?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    let cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Simulate => {
            let s = experiment::simulate(&cfg)?;
            for r in &s.runs {
                let relay = match (r.relay_forwarded, r.relay_modified, r.injected) {
                    (Some(f), Some(m), _) => format!(", relay forwarded {f} modified {m}"),
                    (_, _, Some(i)) => format!(", injected {i}"),
                    _ => String::new(),
                };
                println!(
                    "{:<20} segment {} telegrams {:>6} temperature {:>6}{relay}",
                    r.name, r.segment, r.telegrams, r.temperature_telegrams
                );
            }
        }
        Command::Hvac => {
            let h = experiment::hvac(&cfg)?;
            for (name, s) in [("attack-i", h.attack_i), ("attack-ii", h.attack_ii)] {
                let e = s.additional_kwh;
                println!(
                    "{name:<10} baseline {:.2} kWh attacked {:.2} kWh additional fan {:.3} pump {:.3} chiller {:.3} total {:.3}",
                    s.baseline_kwh, s.attacked_kwh, e.fan, e.pump, e.chiller, e.total
                );
            }
            for p in &h.sweep {
                println!("bias {:>4} additional total {:.3} kWh", p.bias, p.additional_kwh.total);
            }
        }
        Command::Featurize => {
            experiment::featurize_all(&cfg)?;
            println!("features written to {}", cfg.out_dir.join("features").display());
        }
        Command::Train => {
            for r in experiment::train_all(&cfg)? {
                println!("{:<8} {:>3} min {:<9} {:<5} accuracy {:.4}", r.experiment, r.window_min, r.feature.name(), r.algorithm.name(), r.accuracy);
            }
        }
        Command::Detect { model, capture } => {
            let stem = capture.file_stem().map_or("capture".into(), |s| s.to_string_lossy().into_owned());
            let out = cfg.out_dir.join("verdicts").join(format!("{stem}.csv"));
            let v = experiment::detect_file(&model, &capture, &out)?;
            let attacks = v.iter().filter(|v| v.label == knxlab::detector::Label::Attack).count();
            println!("{} windows, {attacks} attack, {} no-attack; verdicts in {}", v.len(), v.len() - attacks, out.display());
        }
        Command::Suite => print!("{}", experiment::suite(&cfg)?),
        Command::Report => print!("{}", experiment::report(&cfg)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = if e.is_config() { 2 } else { 1 };
            eprintln!("error: {:#}", anyhow::Error::new(e).context(context_for(code)));
            ExitCode::from(code)
        }
    }
}

fn context_for(code: u8) -> &'static str {
    if code == 2 {
        "configuration rejected"
    } else {
        "run failed"
    }
}
