use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fdcast::config::{FracOrder, InputSource, PipelineConfig, Representation};
use fdcast::fracdiff::DEFAULT_THRESHOLD;
use fdcast::pipeline::{run_stages, Stage};

#[derive(Parser)]
#[command(
    name = "fdcast",
    version,
    about = "Unit-root diagnostics, fractional differencing and neural forecasts for price series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Summary statistics and autocorrelations
    Stats(Common),
    /// Augmented Dickey-Fuller tests (constant and constant+trend)
    Adf(Common),
    /// Write the fractionally differenced series
    Fracdiff(Common),
    /// ADF p-value across differencing orders and the selected d*
    Dstar(Common),
    /// Lag and hyperparameter search for the dense regressor
    TuneMlp(Common),
    /// Sample Gramian angular field images
    Gaf(Common),
    /// Train and evaluate the GAF convolutional regressor
    TrainCnn(Common),
    /// Every stage for every representation
    RunAll(Common),
}

#[derive(Args)]
struct Common {
    /// Flat key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any configuration key, e.g. --set tuner.n_candidates=8
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report directory (the FDCAST_OUTPUT_DIR variable takes precedence)
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// CSV input file; replaces any synthetic input
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    date_column: Option<String>,
    #[arg(long)]
    value_column: Option<String>,
    /// serial or parallel
    #[arg(long)]
    exec: Option<String>,
}

impl Common {
    fn pairs(&self) -> Result<Vec<(String, String)>, String> {
        let mut pairs = Vec::new();
        let mut push = |k: &str, v: String| pairs.push((k.to_string(), v));
        if let Some(s) = self.seed {
            push("seed", s.to_string());
        }
        if let Some(d) = &self.output_dir {
            push("output.dir", d.display().to_string());
        }
        if let Some(p) = &self.input {
            push("input.csv", p.display().to_string());
        }
        if let Some(c) = &self.date_column {
            push("input.date_column", c.clone());
        }
        if let Some(c) = &self.value_column {
            push("input.value_column", c.clone());
        }
        if let Some(e) = &self.exec {
            push("exec", e.clone());
        }
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| format!("override {o:?} is not KEY=VALUE"))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(pairs)
    }

    fn load(&self) -> Result<PipelineConfig, String> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_file(path).map_err(|e| e.to_string())?,
            None => PipelineConfig::default(),
        };
        let pairs = self.pairs()?;
        // a CSV given on the command line replaces a synthetic input from the file
        if self.input.is_some() && matches!(cfg.input, InputSource::Synthetic(_)) {
            cfg.input = InputSource::Csv {
                path: PathBuf::new(),
                date_column: "date".into(),
                value_column: "value".into(),
            };
        }
        cfg.apply(&pairs).map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

fn stages_for(command: &Command) -> (&Common, Vec<Stage>) {
    match command {
        Command::Stats(c) => (c, vec![Stage::Stats, Stage::Acf]),
        Command::Adf(c) => (c, vec![Stage::Adf]),
        Command::Fracdiff(c) => (c, vec![Stage::Series]),
        Command::Dstar(c) => (c, vec![Stage::Dstar]),
        Command::TuneMlp(c) => (c, vec![Stage::Tuner]),
        Command::Gaf(c) => (c, vec![Stage::Gaf]),
        Command::TrainCnn(c) => (c, vec![Stage::Cnn]),
        Command::RunAll(c) => (c, Stage::ALL.to_vec()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, stages) = stages_for(&cli.command);
    let mut cfg = match common.load() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Command::Fracdiff(_) = cli.command {
        let frac = cfg
            .representations
            .iter()
            .copied()
            .find(|r| matches!(r, Representation::FracDiff { .. }))
            .unwrap_or(Representation::FracDiff {
                d: FracOrder::Auto,
                threshold: DEFAULT_THRESHOLD,
            });
        cfg.representations = vec![frac];
    }

    let out = match run_stages(&cfg, &stages) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    println!(
        "wrote {} artifacts to {}",
        out.manifest.artifacts.len(),
        out.dir.display()
    );
    for run in &out.runs {
        if let Some(Ok(m)) = &run.mlp {
            println!(
                "{}: lag {} mlp MAE {:.6} R2 {} | naive MAE {:.6}",
                run.representation.label(),
                m.tuned.best_lag,
                m.mlp.mae,
                m.mlp.r_squared.map_or("n/a".into(), |r| format!("{r:.4}")),
                m.naive.mae
            );
        }
    }
    if let Some(Ok(d)) = &out.base_dstar {
        match d.d_star {
            Some(v) => println!("d* = {v} at the {} level", d.significance_level),
            None => println!("no d* on the grid at the {} level", d.significance_level),
        }
    }
    let failed: Vec<_> = out.manifest.failed_stages().collect();
    for f in &failed {
        eprintln!(
            "stage {}{} failed: {}",
            f.stage,
            f.representation.as_ref().map(|r| format!(" [{r}]")).unwrap_or_default(),
            f.error.as_deref().unwrap_or("")
        );
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
