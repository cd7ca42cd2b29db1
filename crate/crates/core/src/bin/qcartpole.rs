use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qcartpole::experiments::baseline::{run_baseline, BaselineReport};
use qcartpole::experiments::config::ExperimentConfig;
use qcartpole::experiments::export::{self, ExportFormat};
use qcartpole::experiments::latency::{latency_report, parse_rates_csv, reference_rates, LatencyReport};
use qcartpole::experiments::matrix::DurationMatrix;
use qcartpole::experiments::sweep::{eval_matrices, load_agents, run_train_sweep};
use qcartpole::experiments::ExperimentError;

#[derive(Parser)]
#[command(version, about = "Hybrid quantum-classical CartPole experiments")]
struct Cli {
    /// JSON experiment config; defaults are used for missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seeds per ensemble (baseline and sweep).
    #[arg(long, global = true)]
    seeds: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Config override `key=value` with a dotted key, e.g. `sweep.lr.actor=0.02`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classical vs hybrid episodes-to-solve at 50 Hz.
    Baseline,
    /// Train hybrid agents over the training-frequency grid.
    TrainSweep,
    /// Evaluate sweep checkpoints over inference frequencies and shot counts.
    EvalMatrix,
    /// Fit the latency model and report feasibility.
    Latency {
        /// CSV with columns shots,standard_stack,low_level.
        #[arg(long)]
        rates: Option<PathBuf>,
    },
    /// Convert a saved matrices.json or baseline.json to CSV or JSON.
    Export {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ExportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ExportFormat::Csv,
            Format::Json => ExportFormat::Json,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, ExperimentError> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seeds) = cli.seeds {
        config.set_seeds(seeds);
    }
    for o in &cli.overrides {
        config.apply_override(o)?;
    }
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
    }
    let out = cli.out.as_path();

    match cli.command {
        Command::Baseline => {
            let report = run_baseline(&config.baseline, Some(&out.join("baseline")))?;
            print_baseline(&report);
            export::write_json(&report, &out.join("baseline.json"))?;
        }
        Command::TrainSweep => {
            let runs = run_train_sweep(&config.sweep, &out.join("sweep"));
            println!("{:>8} {:>6} {:>8}  checkpoint", "train_hz", "seed", "solved");
            for r in &runs {
                let solved = r.episodes_to_solve.map_or("-".into(), |e| e.to_string());
                match &r.error {
                    None => println!("{:>8} {:>6} {:>8}  {}", r.train_freq, r.seed, solved, r.path.display()),
                    Some(e) => println!("{:>8} {:>6} {:>8}  FAILED: {e}", r.train_freq, r.seed, solved),
                }
            }
            export::write_json(&runs, &out.join("sweep_runs.json"))?;
            let failed = runs.iter().filter(|r| r.error.is_some()).count();
            if failed > 0 {
                eprintln!("{failed} of {} sweep runs failed", runs.len());
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::EvalMatrix => {
            let agents = load_agents(&config.sweep, &out.join("sweep"));
            let matrices = eval_matrices(&config.sweep, &agents)?;
            for m in &matrices {
                print_matrix(m);
            }
            export::export_matrices(&matrices, &out.join("matrices.json"), ExportFormat::Json)?;
            export::export_matrices(&matrices, &out.join("matrices.csv"), ExportFormat::Csv)?;
        }
        Command::Latency { rates } => {
            let rates_path = rates.or(config.latency.rates_csv.clone());
            let rates = match &rates_path {
                Some(path) => parse_rates_csv(std::fs::File::open(path).map_err(|source| ExperimentError::Io {
                    path: path.clone(),
                    source,
                })?)?,
                None => reference_rates(),
            };
            let matrices_path = out.join("matrices.json");
            let matrices: Option<Vec<DurationMatrix>> = matrices_path
                .exists()
                .then(|| export::read_json(&matrices_path))
                .transpose()?;
            let report = latency_report(&rates, matrices.as_deref())?;
            print_latency(&report);
            export::write_json(&report, &out.join("latency.json"))?;
        }
        Command::Export { input, output, format } => export_file(&input, &output, format.into())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn export_file(input: &Path, output: &Path, format: ExportFormat) -> Result<(), ExperimentError> {
    if let Ok(matrices) = export::read_json::<Vec<DurationMatrix>>(input) {
        return export::export_matrices(&matrices, output, format);
    }
    let report: BaselineReport = export::read_json(input)?;
    export::export_baseline(&report, output, format)
}

fn print_baseline(report: &BaselineReport) {
    println!(
        "episodes to solve at {} Hz (cap {})",
        report.control_freq, report.episode_cap
    );
    println!(
        "{:<16} {:>7} {:>9} {:>9} {:>9}",
        "variant", "solved", "unsolved", "mean", "std"
    );
    for v in &report.variants {
        let fmt = |x: Option<f64>| x.map_or("-".into(), |x| format!("{x:.1}"));
        println!(
            "{:<16} {:>7} {:>9} {:>9} {:>9}",
            v.variant.name(),
            v.solved,
            v.unsolved,
            fmt(v.mean),
            fmt(v.std)
        );
    }
}

fn print_matrix(m: &DurationMatrix) {
    println!(
        "\nmean balancing duration [s], {} shots (rows: train Hz, columns: inference Hz)",
        m.shots
    );
    print!("{:>8}", "");
    for f in &m.inference_freqs {
        print!(" {f:>12}");
    }
    println!();
    for (i, tf) in m.train_freqs.iter().enumerate() {
        print!("{tf:>8}");
        for j in 0..m.inference_freqs.len() {
            match m.cell(i, j) {
                Some(c) => print!(" {:>5.2} ± {:<4.2}", c.mean_s, c.std_s),
                None => print!(" {:>12}", "absent"),
            }
        }
        println!();
    }
}

fn print_latency(report: &LatencyReport) {
    for (name, t) in [
        ("standard stack", &report.model.standard_stack),
        ("low level", &report.model.low_level),
    ] {
        println!(
            "{name:<15} overhead {:.4} s, per shot {:.2} us (physical {:.2} us)",
            t.fixed_overhead_s,
            t.per_shot_s() * 1e6,
            t.physical_per_shot_s() * 1e6
        );
    }
    println!(
        "\n{:>6} {:>10} {:>10} {:>10} {:>10} {:>8}",
        "shots", "std obs", "std fit", "low obs", "low fit", "speedup"
    );
    for r in &report.rows {
        println!(
            "{:>6} {:>10.3} {:>10.3} {:>10.2} {:>10.2} {:>7.1}x",
            r.shots,
            r.observed_standard_hz,
            r.predicted_standard_hz,
            r.observed_low_level_hz,
            r.predicted_low_level_hz,
            r.speedup
        );
    }
    if let Some(f) = &report.feasibility {
        println!(
            "\nfeasibility ({}; balancing needs mean >= {} s)",
            f.path, f.duration_threshold_s
        );
        println!(
            "{:>8} {:>6} {:>10} {:>10} {:>9}",
            "inf_hz", "shots", "max_hz", "mean_s", "feasible"
        );
        for p in &f.points {
            let mean = p.mean_duration_s.map_or("-".into(), |m| format!("{m:.2}"));
            println!(
                "{:>8} {:>6} {:>10.2} {:>10} {:>9}",
                p.inference_freq_hz, p.shots, p.max_control_freq_hz, mean, p.jointly_feasible
            );
        }
    }
}
