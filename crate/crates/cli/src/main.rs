use std::path::PathBuf;
use std::process::ExitCode;

use atlas_fusion::config::{load_config, Stage};
use atlas_fusion::dataset::Timestamp;
use atlas_fusion::pipeline::run;
use atlas_fusion::scenario::{generate_scenario, ScenarioError, ScenarioSpec};
use clap::{Parser, Subcommand};

const EXIT_CONFIG: u8 = 1;
const EXIT_DATA: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "atlas-fuse", version, about = "Offline multi-sensor fusion over recorded datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Process a recorded dataset.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured output directory.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Stop before the first packet later than this timestamp (ns).
        #[arg(long)]
        until: Option<u64>,
        /// Comma-separated stages to turn off.
        #[arg(long, value_delimiter = ',')]
        disable: Vec<String>,
        /// Write the aggregated cloud as PLY every this many seconds of data.
        #[arg(long)]
        snapshot_every: Option<f64>,
        /// More log output (-v debug, -vv trace).
        #[arg(short, long, action = clap::ArgAction::Count)]
        verbose: u8,
    },
    /// Generate a synthetic dataset from a scenario file.
    Gen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(short, long, action = clap::ArgAction::Count)]
        verbose: u8,
    },
}

fn init_logging(base: &str, verbose: u8) {
    let level = match verbose {
        0 => base.parse().unwrap_or(log::LevelFilter::Info),
        1 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn cmd_run(
    config: PathBuf,
    output: Option<PathBuf>,
    until: Option<u64>,
    disable: Vec<String>,
    snapshot_every: Option<f64>,
    verbose: u8,
) -> ExitCode {
    let mut cfg = match load_config(&config) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    for name in disable.iter().filter(|s| !s.is_empty()) {
        match name.trim().parse::<Stage>() {
            Ok(s) => cfg.stages.disable(s),
            Err(e) => return fail(EXIT_CONFIG, format!("--disable: {e}")),
        }
    }
    if let Some(s) = snapshot_every {
        cfg.snapshot_every = Some(s);
    }
    if let Some(o) = output {
        cfg.output_dir = o;
    }
    cfg.until = until.map(Timestamp);
    if let Err(e) = cfg.validate() {
        return fail(EXIT_CONFIG, e);
    }
    init_logging(&cfg.log_level, verbose);

    match run(&cfg) {
        Ok(report) => {
            println!(
                "processed {} packets ({} skipped, {} anomalies); wrote {} annotation files, {} depth images, {} snapshots to {}",
                report.total_packets(),
                report.skipped.values().sum::<usize>(),
                report.total_anomalies(),
                report.annotation_files,
                report.depth_images,
                report.snapshots,
                cfg.output_dir.display()
            );
            for (sensor, n) in &report.packets {
                println!("  {sensor}: {n}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(EXIT_DATA, e),
    }
}

fn cmd_gen(spec: PathBuf, out: PathBuf, verbose: u8) -> ExitCode {
    init_logging("info", verbose);
    let spec = match ScenarioSpec::load(&spec) {
        Ok(s) => s,
        Err(ScenarioError::Io(e)) => return fail(EXIT_CONFIG, format!("cannot read {}: {e}", spec.display())),
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    match generate_scenario(&spec, &out) {
        Ok(report) => {
            println!("generated {} records in {}", report.total(), out.display());
            for (sensor, n) in &report.record_counts {
                println!("  {sensor}: {n}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(EXIT_DATA, e),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run { config, output, until, disable, snapshot_every, verbose } => {
            cmd_run(config, output, until, disable, snapshot_every, verbose)
        }
        Command::Gen { spec, out, verbose } => cmd_gen(spec, out, verbose),
    }
}
