use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use burstdsp::equalize::measure_quality;
use burstdsp::harness::{
    receive, scenario, sweep, transmit, waveform, write_csv, TrainingKind, TrialConfig, TrialReport, RMSE_BLOCK,
};
use burstdsp::seqcore::{build_preamble, build_training_blocks};
use burstdsp::signal::DualPolSignal;
use burstdsp::txchain::decide_16qam;
use burstdsp::{Error, Result};

#[derive(Parser)]
#[command(name = "burstdsp", version, about = "Burst-mode coherent receiver DSP simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON trial configuration; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured preamble (symbol rate) as a CBW1 waveform file.
    GenPreamble {
        #[command(flatten)]
        common: Common,
    },
    /// Run seeded trials and print the JSON report.
    RunTrial {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
        /// Also write the received waveform of trial 0 as a CBW1 file.
        #[arg(long)]
        dump_rx: Option<PathBuf>,
    },
    /// Sweep one parameter and emit a CSV table.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<f64>,
    },
    /// Print the effective configuration with all defaults filled in.
    ShowConfig {
        #[command(flatten)]
        common: Common,
    },
    /// Run the receiver on a 2-sps CBW1 waveform file and print a JSON summary.
    Replay {
        #[command(flatten)]
        common: Common,
        /// Waveform to process.
        input: PathBuf,
        /// Write the equalized payload symbols here as a CBW1 file.
        #[arg(long)]
        symbols_out: Option<PathBuf>,
    },
}

fn load_config(common: &Common, trials: Option<usize>) -> Result<TrialConfig> {
    let mut cfg = match &common.config {
        Some(path) => TrialConfig::load(path)?,
        None => TrialConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(path: Option<&Path>, value: &impl serde::Serialize) -> Result<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenPreamble { common } => {
            let cfg = load_config(&common, None)?;
            let pre = build_preamble::<f64>(&cfg.frame.preamble)?;
            let mut out = output(common.out.as_deref())?;
            waveform::write_to(&pre, &mut out)?;
            out.flush()?;
        }
        Command::ShowConfig { common } => {
            let cfg = load_config(&common, None)?;
            write_json(common.out.as_deref(), &cfg)?;
        }
        Command::RunTrial { common, trials, dump_rx } => {
            let cfg = load_config(&common, trials)?;
            if let Some(path) = dump_rx {
                let sc = scenario(&cfg, 0)?;
                waveform::write_waveform(&path, &transmit(&cfg, &sc, 0)?)?;
            }
            let report = TrialReport::run(&cfg)?;
            write_json(common.out.as_deref(), &report)?;
        }
        Command::Sweep {
            common,
            trials,
            param,
            values,
        } => {
            let cfg = load_config(&common, trials)?;
            let rows = sweep(&cfg, &param, &values)?;
            let mut out = output(common.out.as_deref())?;
            write_csv(&rows, &mut out)?;
            out.flush()?;
        }
        Command::Replay {
            common,
            input,
            symbols_out,
        } => {
            let cfg = load_config(&common, None)?;
            if cfg.dsp.training != TrainingKind::Cazac {
                return Err(Error::Config("replay needs the deterministic CAZAC training".into()));
            }
            let rx = waveform::read_waveform(&input)?;
            let blocks = build_training_blocks::<f64>(cfg.frame.preamble.n)?;
            let out = receive(&cfg, &rx, &blocks, None)?;
            let decisions = decided(&out.payload);
            let pilots: Vec<usize> = (0..out.payload.len()).step_by(cfg.frame.pilot_period).collect();
            let q = measure_quality(&out.payload, &decisions, &pilots, RMSE_BLOCK)?;
            if let Some(path) = symbols_out {
                waveform::write_waveform(&path, &out.payload)?;
            }
            write_json(
                common.out.as_deref(),
                &json!({
                    "offset": out.offset,
                    "symbol_offset": out.symbol_offset,
                    "pmnr_db": out.pmnr_db,
                    "metric": out.metric,
                    "fo_hz": out.foe.fo_hz,
                    "payload_symbols": out.payload.len(),
                    "decision_snr_db": q.snr_db,
                }),
            )?;
        }
    }
    Ok(())
}

fn decided(s: &DualPolSignal<f64>) -> DualPolSignal<f64> {
    let d = |v: &[num_complex::Complex<f64>]| v.iter().map(|&z| decide_16qam(z)).collect();
    DualPolSignal::new(d(&s.x), d(&s.y), 1).expect("equal lengths")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut record = json!({ "kind": e.kind(), "message": e.to_string() });
            if let Error::Trial { trial, .. } = &e {
                record["trial"] = json!(trial);
            }
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
