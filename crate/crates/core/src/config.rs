//! Flat `key = value` configuration with dotted section prefixes.
//!
//! ```text
//! # comment
//! seed = 7
//! input.synthetic = random_walk
//! input.n = 2000
//! tuner.lag_grid = 1, 5, 10
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cnn::{CnnConfig, ConvSpec};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fracdiff::DEFAULT_THRESHOLD;
use crate::gaf::DEFAULT_WINDOW;
use crate::supervised::DEFAULT_TEST_FRACTION;
use crate::synthetic::{SyntheticKind, SyntheticSpec};
use crate::tuner::TunerConfig;
use crate::unit_root::AdfSpec;

/// Environment variable that overrides `output.dir`.
pub const OUTPUT_DIR_ENV: &str = "FDCAST_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InputSource {
    Csv {
        path: PathBuf,
        date_column: String,
        value_column: String,
    },
    Synthetic(SyntheticSpec),
}

/// Order used by the fractional representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FracOrder {
    /// Use the d* found on the log levels.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Representation {
    Levels,
    LogReturns,
    FracDiff { d: FracOrder, threshold: f64 },
}

impl Representation {
    pub fn label(&self) -> &'static str {
        match self {
            Representation::Levels => "levels",
            Representation::LogReturns => "log_returns",
            Representation::FracDiff { .. } => "fracdiff",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DstarSettings {
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_step: f64,
    pub significance: f64,
    pub threshold: f64,
    pub spec: AdfSpec,
}

impl Default for DstarSettings {
    fn default() -> Self {
        DstarSettings {
            grid_min: 0.0,
            grid_max: 1.0,
            grid_step: 0.05,
            significance: 0.01,
            threshold: DEFAULT_THRESHOLD,
            spec: AdfSpec::Constant,
        }
    }
}

impl DstarSettings {
    pub fn grid(&self) -> Vec<f64> {
        let steps = ((self.grid_max - self.grid_min) / self.grid_step + 1e-9).floor() as usize;
        (0..=steps)
            .map(|i| {
                let d = self.grid_min + i as f64 * self.grid_step;
                // keep grid labels clean, e.g. 0.35 rather than 0.35000000000000003
                (d * 1e10).round() / 1e10
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub input: InputSource,
    pub representations: Vec<Representation>,
    pub acf_lags: Vec<usize>,
    pub adf_max_lag: Option<usize>,
    pub dstar: DstarSettings,
    pub test_fraction: f64,
    pub tuner: TunerConfig,
    pub cnn_enabled: bool,
    pub cnn: CnnConfig,
    pub gaf_window: usize,
    pub gaf_samples: usize,
    pub output_dir: PathBuf,
    pub exec: Exec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            input: InputSource::Synthetic(SyntheticSpec {
                level: 1000.0,
                ..SyntheticSpec::new(SyntheticKind::RandomWalk, 2000, 0)
            }),
            representations: vec![
                Representation::Levels,
                Representation::LogReturns,
                Representation::FracDiff {
                    d: FracOrder::Auto,
                    threshold: DEFAULT_THRESHOLD,
                },
            ],
            acf_lags: vec![1, 5, 10, 20, 60],
            adf_max_lag: None,
            dstar: DstarSettings::default(),
            test_fraction: DEFAULT_TEST_FRACTION,
            tuner: TunerConfig::default(),
            cnn_enabled: true,
            cnn: CnnConfig::default(),
            gaf_window: DEFAULT_WINDOW,
            gaf_samples: 3,
            output_dir: PathBuf::from("report"),
            exec: Exec::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::InvalidConfig(format!("{key}: cannot parse {value:?}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(Error::InvalidConfig(format!(
            "{key}: expected a boolean, got {other:?}"
        ))),
    }
}

/// Parses the text form into ordered key/value pairs.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::InvalidConfig(format!("line {}: expected key = value", i + 1)));
        };
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::InvalidConfig(format!("line {}: empty key", i + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<PipelineConfig> {
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PipelineConfig::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        cfg.apply(&parse_pairs(text)?)?;
        Ok(cfg)
    }

    /// Applies overrides in order; later keys win. Validates the result.
    pub fn apply(&mut self, pairs: &[(String, String)]) -> Result<()> {
        let mut csv_path: Option<PathBuf> = None;
        let mut date_column = None;
        let mut value_column = None;
        let mut synth = match &self.input {
            InputSource::Synthetic(s) => Some(*s),
            InputSource::Csv { .. } => None,
        };
        let mut synth_touched = false;
        let mut seed_override = None;
        let mut frac_d = None;
        let mut frac_threshold = None;
        let mut reps: Option<Vec<String>> = None;

        for (key, value) in pairs {
            let (k, v) = (key.as_str(), value.as_str());
            match k {
                "seed" => self.seed = parse(k, v)?,
                "exec" => {
                    self.exec = match v {
                        "serial" => Exec::Serial,
                        "parallel" => Exec::Parallel,
                        _ => {
                            return Err(Error::InvalidConfig(format!(
                                "exec: expected serial or parallel, got {v:?}"
                            )))
                        }
                    }
                }
                "output.dir" => self.output_dir = PathBuf::from(v),
                "input.csv" => csv_path = Some(PathBuf::from(v)),
                "input.date_column" => date_column = Some(v.to_string()),
                "input.value_column" => value_column = Some(v.to_string()),
                "input.synthetic"
                | "input.n"
                | "input.phi"
                | "input.d"
                | "input.innovation_std"
                | "input.level"
                | "input.seed" => {
                    synth_touched = true;
                    let s = synth.get_or_insert_with(|| match PipelineConfig::default().input {
                        InputSource::Synthetic(s) => s,
                        InputSource::Csv { .. } => unreachable!(),
                    });
                    match k {
                        "input.synthetic" => {
                            s.kind = match v {
                                "random_walk" => SyntheticKind::RandomWalk,
                                "white_noise" => SyntheticKind::WhiteNoise,
                                "ar1" => SyntheticKind::Ar1 { phi: 0.5 },
                                "arfima" => SyntheticKind::Arfima0d0 { d: 0.4 },
                                _ => {
                                    return Err(Error::InvalidConfig(format!(
                                        "input.synthetic: unknown kind {v:?} (random_walk, white_noise, ar1, arfima)"
                                    )))
                                }
                            }
                        }
                        "input.n" => s.n = parse(k, v)?,
                        "input.innovation_std" => s.innovation_std = parse(k, v)?,
                        "input.level" => s.level = parse(k, v)?,
                        "input.seed" => seed_override = Some(parse(k, v)?),
                        _ => {}
                    }
                }
                "representations" => reps = Some(parse_list(k, v)?),
                "acf.lags" => self.acf_lags = parse_list(k, v)?,
                "adf.max_lag" => self.adf_max_lag = if v == "auto" { None } else { Some(parse(k, v)?) },
                "dstar.grid_min" => self.dstar.grid_min = parse(k, v)?,
                "dstar.grid_max" => self.dstar.grid_max = parse(k, v)?,
                "dstar.grid_step" => self.dstar.grid_step = parse(k, v)?,
                "dstar.significance" => self.dstar.significance = parse(k, v)?,
                "dstar.threshold" => self.dstar.threshold = parse(k, v)?,
                "dstar.spec" => self.dstar.spec = parse(k, v)?,
                "fracdiff.d" => {
                    frac_d = Some(if v == "auto" {
                        FracOrder::Auto
                    } else {
                        FracOrder::Fixed(parse(k, v)?)
                    })
                }
                "fracdiff.threshold" => frac_threshold = Some(parse(k, v)?),
                "split.test_fraction" => self.test_fraction = parse(k, v)?,
                "tuner.lag_grid" => self.tuner.lag_grid = parse_list(k, v)?,
                "tuner.n_candidates" => self.tuner.n_candidates = parse(k, v)?,
                "tuner.rungs" => self.tuner.halving_rungs = parse_list(k, v)?,
                "tuner.keep_fraction" => self.tuner.keep_fraction = parse(k, v)?,
                "tuner.batch_grid" => self.tuner.batch_grid = parse_list(k, v)?,
                "tuner.search_batch_size" => self.tuner.search_batch_size = parse(k, v)?,
                "tuner.patience" => self.tuner.patience = parse(k, v)?,
                "tuner.final_max_epochs" => self.tuner.final_max_epochs = parse(k, v)?,
                "cnn.enabled" => self.cnn_enabled = parse_bool(k, v)?,
                "cnn.filters" => {
                    let kernel = self.cnn.conv_layers.first().map_or(3, |c| c.kernel);
                    self.cnn.conv_layers = parse_list::<usize>(k, v)?
                        .into_iter()
                        .map(|filters| ConvSpec { filters, kernel })
                        .collect();
                }
                "cnn.kernel" => {
                    let kernel: usize = parse(k, v)?;
                    self.cnn.conv_layers.iter_mut().for_each(|c| c.kernel = kernel);
                }
                "cnn.dense_units" => self.cnn.dense_units = parse(k, v)?,
                "cnn.learning_rate" => self.cnn.learning_rate = parse(k, v)?,
                "cnn.batch_size" => self.cnn.batch_size = parse(k, v)?,
                "cnn.max_epochs" => self.cnn.max_epochs = parse(k, v)?,
                "cnn.patience" => self.cnn.patience = parse(k, v)?,
                "gaf.window" => self.gaf_window = parse(k, v)?,
                "gaf.samples" => self.gaf_samples = parse(k, v)?,
                _ => return Err(Error::InvalidConfig(format!("unknown key {k:?}"))),
            }
        }

        // kind parameters may arrive before or after the kind itself
        if let Some(s) = synth.as_mut() {
            for (k, v) in pairs {
                match (k.as_str(), &mut s.kind) {
                    ("input.phi", SyntheticKind::Ar1 { phi }) => *phi = parse(k, v)?,
                    ("input.d", SyntheticKind::Arfima0d0 { d }) => *d = parse(k, v)?,
                    ("input.phi", _) | ("input.d", _) => {
                        return Err(Error::InvalidConfig(format!("{k} does not apply to {:?}", s.kind)))
                    }
                    _ => {}
                }
            }
            if let Some(seed) = seed_override {
                s.seed = seed;
            }
        }

        match (csv_path, synth_touched) {
            (Some(_), true) => {
                return Err(Error::InvalidConfig(
                    "input.csv and synthetic input keys are mutually exclusive".into(),
                ))
            }
            (Some(path), false) => {
                let (old_date, old_value) = match &self.input {
                    InputSource::Csv {
                        date_column,
                        value_column,
                        ..
                    } => (date_column.clone(), value_column.clone()),
                    InputSource::Synthetic(_) => ("date".to_string(), "value".to_string()),
                };
                self.input = InputSource::Csv {
                    path,
                    date_column: date_column.clone().unwrap_or(old_date),
                    value_column: value_column.clone().unwrap_or(old_value),
                };
            }
            (None, true) => self.input = InputSource::Synthetic(synth.expect("touched")),
            (None, false) => {}
        }
        if let InputSource::Csv {
            date_column: dc,
            value_column: vc,
            ..
        } = &mut self.input
        {
            if let Some(d) = date_column {
                *dc = d;
            }
            if let Some(v) = value_column {
                *vc = v;
            }
        } else if date_column.is_some() || value_column.is_some() {
            return Err(Error::InvalidConfig("column names need input.csv".into()));
        }

        let (cur_d, cur_t) = self
            .representations
            .iter()
            .find_map(|r| match r {
                Representation::FracDiff { d, threshold } => Some((*d, *threshold)),
                _ => None,
            })
            .unwrap_or((FracOrder::Auto, DEFAULT_THRESHOLD));
        let frac = Representation::FracDiff {
            d: frac_d.unwrap_or(cur_d),
            threshold: frac_threshold.unwrap_or(cur_t),
        };
        if let Some(names) = reps {
            let mut out = Vec::new();
            for name in names {
                let r = match name.as_str() {
                    "levels" => Representation::Levels,
                    "log_returns" => Representation::LogReturns,
                    "fracdiff" => frac,
                    other => {
                        return Err(Error::InvalidConfig(format!(
                            "unknown representation {other:?} (levels, log_returns, fracdiff)"
                        )))
                    }
                };
                if out.iter().any(|o: &Representation| o.label() == r.label()) {
                    return Err(Error::InvalidConfig(format!("representation {name} listed twice")));
                }
                out.push(r);
            }
            self.representations = out;
        } else {
            for r in self.representations.iter_mut() {
                if let Representation::FracDiff { .. } = r {
                    *r = frac;
                }
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if let InputSource::Synthetic(s) = &self.input {
            s.validate().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        }
        if self.representations.is_empty() {
            return bad("at least one representation is required".into());
        }
        for r in &self.representations {
            if let Representation::FracDiff { d, threshold } = r {
                if let FracOrder::Fixed(d) = d {
                    if !(0.0..=2.0).contains(d) {
                        return bad(format!("fracdiff.d must lie in [0, 2], got {d}"));
                    }
                }
                if !(*threshold > 0.0 && *threshold < 1.0) {
                    return bad(format!("fracdiff.threshold must lie in (0, 1), got {threshold}"));
                }
            }
        }
        if self.acf_lags.is_empty() {
            return bad("acf.lags must not be empty".into());
        }
        let d = &self.dstar;
        if !(d.grid_step > 0.0 && 0.0 <= d.grid_min && d.grid_min <= d.grid_max && d.grid_max <= 1.0) {
            return bad("d* grid must satisfy 0 <= min <= max <= 1 with a positive step".into());
        }
        if !(d.significance > 0.0 && d.significance < 0.5) {
            return bad(format!(
                "dstar.significance must lie in (0, 0.5), got {}",
                d.significance
            ));
        }
        if !(d.threshold > 0.0 && d.threshold < 1.0) {
            return bad(format!("dstar.threshold must lie in (0, 1), got {}", d.threshold));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction <= 0.5) {
            return bad(format!(
                "split.test_fraction must lie in (0, 0.5], got {}",
                self.test_fraction
            ));
        }
        self.tuner.validate()?;
        if self.gaf_window < 2 {
            return bad("gaf.window must be at least 2".into());
        }
        self.cnn.validate(self.gaf_window)?;
        Ok(())
    }

    /// Output directory after the environment override.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output_dir.clone(),
        }
    }

    /// Canonical text form; execution mode and output location are left out
    /// because they do not affect results.
    pub fn canonical(&self) -> String {
        let mut map = BTreeMap::new();
        let value = serde_json::to_value(self).expect("config serialises");
        if let serde_json::Value::Object(obj) = value {
            for (k, v) in obj {
                if k != "exec" && k != "output_dir" {
                    map.insert(k, v.to_string());
                }
            }
        }
        map.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Seed of the named stage stream.
    pub fn stage_seed(&self, stage: &str) -> u64 {
        crate::rng::stream_seed(self.seed, stage)
    }
}
