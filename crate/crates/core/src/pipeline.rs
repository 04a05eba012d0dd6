//! Input loading and the end-to-end report run.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use crate::cnn::{cnn_fit, cnn_predict, CnnConfig};
use crate::config::{FracOrder, InputSource, PipelineConfig, Representation};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fracdiff::{dstar_search_with, fracdiff_apply, fracdiff_weights, DstarSearchResult, DEFAULT_MAX_TERMS};
use crate::gaf::{build_image_dataset, gaf_pairs, GafImage};
use crate::report::{fmt_float, fmt_opt, Manifest, Report};
use crate::series::{acf, log_returns, summary_stats, AcfTable, Series, SummaryStats};
use crate::supervised::{evaluate, naive_forecast, ModelReport};
use crate::synthetic::generate;
use crate::tuner::{leaderboard_rows, tune, TunerConfig, TunerResult, LEADERBOARD_HEADER};
use crate::unit_root::{adf_test, AdfResult, AdfSpec};

/// Reads `date_column`/`value_column` from a headed CSV file. Rows are
/// sorted by date; duplicate dates and non-finite values are rejected.
/// Row numbers in errors are file line numbers (the header is line 1).
pub fn load_csv(path: &Path, date_column: &str, value_column: &str) -> Result<Series> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::io(path, e.into()))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::ParseError {
            row: 1,
            reason: e.to_string(),
        })?
        .clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::ParseError {
            row: 1,
            reason: format!("missing column {name:?}"),
        })
    };
    let (di, vi) = (find(date_column)?, find(value_column)?);

    let mut rows: Vec<(NaiveDate, f64, usize)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::ParseError {
            row,
            reason: e.to_string(),
        })?;
        let field = |idx: usize, what: &str| {
            record.get(idx).ok_or_else(|| Error::ParseError {
                row,
                reason: format!("missing {what} field"),
            })
        };
        let date = NaiveDate::parse_from_str(field(di, "date")?, "%Y-%m-%d").map_err(|e| Error::ParseError {
            row,
            reason: format!("bad date: {e}"),
        })?;
        let raw = field(vi, "value")?;
        let value: f64 = raw.parse().map_err(|_| Error::ParseError {
            row,
            reason: format!("bad number {raw:?}"),
        })?;
        if !value.is_finite() {
            return Err(Error::ParseError {
                row,
                reason: format!("non-finite value {raw:?}"),
            });
        }
        rows.push((date, value, row));
    }
    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::DuplicateDate {
            row: w[0].2.max(w[1].2),
            date: w[1].0.to_string(),
        });
    }
    let name = path
        .file_stem()
        .map_or("series".into(), |s| s.to_string_lossy().into_owned());
    Series::new(
        name,
        rows.iter().map(|r| r.0).collect(),
        rows.iter().map(|r| r.1).collect(),
    )
}

pub fn series_rows(s: &Series) -> Vec<Vec<String>> {
    s.timestamps()
        .iter()
        .zip(s.values())
        .map(|(d, v)| vec![d.to_string(), fmt_float(*v)])
        .collect()
}

pub fn load_input(cfg: &PipelineConfig) -> Result<Series> {
    match &cfg.input {
        InputSource::Csv {
            path,
            date_column,
            value_column,
        } => load_csv(path, date_column, value_column),
        InputSource::Synthetic(spec) => generate(spec),
    }
}

/// The series the d* search and the fractional representation work on:
/// log levels when every value is positive, raw levels otherwise.
pub fn fracdiff_base(levels: &Series) -> Result<Series> {
    if levels.values().iter().all(|v| *v > 0.0) {
        let logs = levels.values().iter().map(|v| v.ln()).collect();
        Ok(levels.with_values(logs)?.renamed(format!("{}_log", levels.name())))
    } else {
        Ok(levels.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Series,
    Stats,
    Acf,
    Adf,
    Dstar,
    Tuner,
    Gaf,
    Cnn,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Series,
        Stage::Stats,
        Stage::Acf,
        Stage::Adf,
        Stage::Dstar,
        Stage::Tuner,
        Stage::Gaf,
        Stage::Cnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Series => "series",
            Stage::Stats => "stats",
            Stage::Acf => "acf",
            Stage::Adf => "adf",
            Stage::Dstar => "dstar",
            Stage::Tuner => "tuner",
            Stage::Gaf => "gaf",
            Stage::Cnn => "cnn",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CnnOutcome {
    pub report: ModelReport,
    pub naive: ModelReport,
    pub dates: Vec<NaiveDate>,
    pub actual: Vec<f64>,
    pub predicted: Vec<f64>,
    pub persistence: Vec<f64>,
    pub epochs_run: usize,
}

#[derive(Debug, Clone)]
pub struct MlpOutcome {
    pub tuned: TunerResult,
    pub mlp: ModelReport,
    pub naive: ModelReport,
    pub predicted: Vec<f64>,
    pub persistence: Vec<f64>,
}

/// Everything computed for one representation. Stage fields are `None`
/// when the stage was not requested.
#[derive(Debug)]
pub struct RepresentationRun {
    pub representation: Representation,
    pub series: Result<Series>,
    pub stats: Option<Result<SummaryStats>>,
    pub acf: Option<Result<AcfTable>>,
    pub adf: Option<Result<Vec<AdfResult>>>,
    pub dstar: Option<Result<DstarSearchResult>>,
    pub mlp: Option<Result<MlpOutcome>>,
    pub gaf: Option<Result<Vec<GafImage>>>,
    pub cnn: Option<Result<CnnOutcome>>,
}

fn dstar_for(s: &Series, cfg: &PipelineConfig, exec: Exec) -> Result<DstarSearchResult> {
    let d = &cfg.dstar;
    dstar_search_with(s, &d.grid(), d.significance, d.threshold, d.spec, exec)
}

pub fn representation_series(
    levels: &Series,
    representation: Representation,
    base_dstar: Option<&Result<DstarSearchResult>>,
) -> Result<Series> {
    match representation {
        Representation::Levels => Ok(levels.clone()),
        Representation::LogReturns => log_returns(levels),
        Representation::FracDiff { d, threshold } => {
            let d = match d {
                FracOrder::Fixed(d) => d,
                FracOrder::Auto => match base_dstar {
                    Some(Ok(r)) => r.d_star.ok_or_else(|| {
                        Error::InvalidConfig("no grid order reached significance; set fracdiff.d explicitly".into())
                    })?,
                    Some(Err(e)) => return Err(Error::InvalidConfig(format!("d* search failed: {e}"))),
                    None => return Err(Error::InvalidConfig("d* search was not run".into())),
                },
            };
            let spec = fracdiff_weights(d, threshold, DEFAULT_MAX_TERMS)?;
            fracdiff_apply(&fracdiff_base(levels)?, &spec)
        }
    }
}

fn run_mlp(s: &Series, tuner: &TunerConfig, test_fraction: f64) -> Result<MlpOutcome> {
    let tuned = tune(s, tuner, test_fraction)?;
    let predicted = tuned.test_predictions()?;
    let persistence = naive_forecast(&tuned.supervised);
    let actual = tuned.supervised.test_targets();
    let mlp = evaluate(&predicted, actual, "mlp")?;
    let naive = evaluate(&persistence, actual, "naive")?;
    Ok(MlpOutcome {
        tuned,
        mlp,
        naive,
        predicted,
        persistence,
    })
}

pub fn run_cnn(s: &Series, config: &CnnConfig, window: usize, test_fraction: f64) -> Result<CnnOutcome> {
    let ds = build_image_dataset(s, window, test_fraction)?;
    let model = cnn_fit(config, &ds.train.images, &ds.train.targets)?;
    let predicted = cnn_predict(&model, &ds.test.images)?;
    if predicted.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLoss {
            epoch: model.history.as_ref().map_or(0, |h| h.epochs_run()),
        });
    }
    // persistence forecast: the last value inside each window
    let all = s.values();
    let offset = s.len() - ds.test.len();
    let persistence: Vec<f64> = (0..ds.test.len()).map(|i| all[offset + i - 1]).collect();
    let report = evaluate(&predicted, &ds.test.targets, "cnn_gaf")?;
    let naive = evaluate(&persistence, &ds.test.targets, "naive")?;
    Ok(CnnOutcome {
        report,
        naive,
        dates: ds.test.target_dates.clone(),
        actual: ds.test.targets,
        predicted,
        persistence,
        epochs_run: model.history.as_ref().map_or(0, |h| h.epochs_run()),
    })
}

/// First, middle and last windows (up to `count`) of the series.
fn gaf_samples(s: &Series, window: usize, count: usize) -> Result<Vec<GafImage>> {
    let pairs = gaf_pairs(s, window)?;
    let n = pairs.images.len();
    let count = count.min(n);
    let picks: Vec<usize> = if count <= 1 {
        vec![0; count]
    } else {
        (0..count).map(|i| i * (n - 1) / (count - 1)).collect()
    };
    Ok(picks.into_iter().map(|i| pairs.images[i].clone()).collect())
}

fn run_representation(
    levels: &Series,
    representation: Representation,
    base_dstar: Option<&Result<DstarSearchResult>>,
    cfg: &PipelineConfig,
    stages: &[Stage],
) -> RepresentationRun {
    let want = |s: Stage| stages.contains(&s);
    let label = representation.label();
    let series = representation_series(levels, representation, base_dstar);
    let mut run = RepresentationRun {
        representation,
        series,
        stats: None,
        acf: None,
        adf: None,
        dstar: None,
        mlp: None,
        gaf: None,
        cnn: None,
    };
    let Ok(s) = run.series.as_ref() else {
        return run;
    };
    if want(Stage::Stats) {
        run.stats = Some(summary_stats(s));
    }
    if want(Stage::Acf) {
        run.acf = Some(acf(s, &cfg.acf_lags));
    }
    if want(Stage::Adf) {
        run.adf = Some(
            AdfSpec::ALL
                .iter()
                .map(|spec| adf_test(s, *spec, cfg.adf_max_lag))
                .collect(),
        );
    }
    if want(Stage::Dstar) {
        run.dstar = Some(dstar_for(s, cfg, cfg.exec));
    }
    if want(Stage::Tuner) {
        let tuner = TunerConfig {
            seed: cfg.stage_seed(&format!("tuner/{label}")),
            exec: cfg.exec,
            ..cfg.tuner.clone()
        };
        run.mlp = Some(run_mlp(s, &tuner, cfg.test_fraction));
    }
    if want(Stage::Gaf) {
        run.gaf = Some(gaf_samples(s, cfg.gaf_window, cfg.gaf_samples));
    }
    if want(Stage::Cnn) {
        run.cnn = Some(if cfg.cnn_enabled {
            let cnn = CnnConfig {
                seed: cfg.stage_seed(&format!("cnn/{label}")),
                ..cfg.cnn.clone()
            };
            run_cnn(s, &cnn, cfg.gaf_window, cfg.test_fraction)
        } else {
            Err(Error::InvalidConfig("cnn.enabled = false".into()))
        });
    }
    run
}

fn report_rows(reports: &[&ModelReport]) -> Vec<Vec<String>> {
    reports
        .iter()
        .map(|r| {
            vec![
                r.model_label.clone(),
                r.n_test.to_string(),
                fmt_float(r.mae),
                fmt_float(r.rmse),
                fmt_opt(r.r_squared),
                fmt_opt(r.pearson),
            ]
        })
        .collect()
}

const REPORT_HEADER: [&str; 6] = ["model", "n_test", "mae", "rmse", "r_squared", "pearson"];

fn stats_rows(st: &SummaryStats) -> Vec<Vec<String>> {
    let p = &st.percentiles;
    [
        ("n", st.n.to_string()),
        ("mean", fmt_float(st.mean)),
        ("std_dev", fmt_float(st.std_dev)),
        ("min", fmt_float(st.min)),
        ("p1", fmt_float(p.p1)),
        ("p5", fmt_float(p.p5)),
        ("p50", fmt_float(p.p50)),
        ("p95", fmt_float(p.p95)),
        ("p99", fmt_float(p.p99)),
        ("max", fmt_float(st.max)),
        ("skewness", fmt_float(st.skewness)),
        ("excess_kurtosis", fmt_float(st.excess_kurtosis)),
        ("max_drawdown", fmt_opt(st.max_drawdown)),
    ]
    .into_iter()
    .map(|(k, v)| vec![k.to_string(), v])
    .collect()
}

fn adf_rows(results: &[AdfResult]) -> Vec<Vec<String>> {
    results
        .iter()
        .map(|r| {
            vec![
                r.spec.code().to_string(),
                fmt_float(r.statistic),
                fmt_float(r.p_value),
                r.p_value_clamped.to_string(),
                r.lags_used.to_string(),
                r.max_lag.to_string(),
                r.n_obs.to_string(),
                fmt_float(r.critical_values.one_pct),
                fmt_float(r.critical_values.five_pct),
                fmt_float(r.critical_values.ten_pct),
                fmt_float(r.aic),
            ]
        })
        .collect()
}

const ADF_HEADER: [&str; 11] = [
    "spec",
    "statistic",
    "p_value",
    "p_value_clamped",
    "lags_used",
    "max_lag",
    "n_obs",
    "cv_1pct",
    "cv_5pct",
    "cv_10pct",
    "aic",
];

fn dstar_rows(r: &DstarSearchResult) -> Vec<Vec<String>> {
    r.points
        .iter()
        .map(|p| {
            vec![
                fmt_float(p.d),
                p.truncation_lag.to_string(),
                p.n_obs.map(|n| n.to_string()).unwrap_or_default(),
                fmt_opt(p.statistic),
                fmt_opt(p.p_value),
                p.p_value.is_some_and(|v| v <= r.significance_level).to_string(),
                (r.d_star == Some(p.d)).to_string(),
            ]
        })
        .collect()
}

const DSTAR_HEADER: [&str; 7] = [
    "d",
    "truncation_lag",
    "n_obs",
    "statistic",
    "p_value",
    "rejects",
    "is_d_star",
];

fn write_dstar(report: &mut Report, rel: &str, rep: Option<&str>, r: &DstarSearchResult) -> Result<()> {
    report.write_table(rel, "dstar_curve", rep, &DSTAR_HEADER, &dstar_rows(r))
}

fn emit_stage<T>(
    report: &mut Report,
    stage: Stage,
    rep: Option<&str>,
    outcome: Option<&Result<T>>,
    emit: impl FnOnce(&mut Report, &T) -> Result<()>,
) {
    let Some(outcome) = outcome else { return };
    let error = match outcome {
        Ok(v) => emit(report, v).err().map(|e| e.to_string()),
        Err(e) => Some(e.to_string()),
    };
    report.record_stage(stage.name(), rep, error);
}

fn emit_run(report: &mut Report, run: &RepresentationRun, stages: &[Stage]) {
    let label = run.representation.label();
    let rep = Some(label);
    let path = |file: &str| format!("{label}/{file}");

    if let Err(e) = &run.series {
        report.record_stage("transform", rep, Some(e.to_string()));
        return;
    }
    let s = run.series.as_ref().expect("checked");
    if stages.contains(&Stage::Series) {
        let r = report.write_table(&path("series.csv"), "series", rep, &["date", "value"], &series_rows(s));
        report.record_stage(Stage::Series.name(), rep, r.err().map(|e| e.to_string()));
    }
    emit_stage(report, Stage::Stats, rep, run.stats.as_ref(), |r, st| {
        r.write_table(
            &path("summary_stats.csv"),
            "summary_stats",
            rep,
            &["statistic", "value"],
            &stats_rows(st),
        )
    });
    emit_stage(report, Stage::Acf, rep, run.acf.as_ref(), |r, t| {
        let rows: Vec<Vec<String>> = t
            .lags
            .iter()
            .zip(&t.values)
            .map(|(l, v)| vec![l.to_string(), fmt_float(*v)])
            .collect();
        r.write_table(&path("acf.csv"), "acf", rep, &["lag", "acf"], &rows)
    });
    emit_stage(report, Stage::Adf, rep, run.adf.as_ref(), |r, results| {
        r.write_table(&path("adf.csv"), "adf", rep, &ADF_HEADER, &adf_rows(results))
    });
    emit_stage(report, Stage::Dstar, rep, run.dstar.as_ref(), |r, d| {
        write_dstar(r, &path("dstar_curve.csv"), rep, d)
    });
    emit_stage(report, Stage::Tuner, rep, run.mlp.as_ref(), |r, m| {
        let rows = leaderboard_rows(&m.tuned.leaderboard);
        let header: Vec<&str> = LEADERBOARD_HEADER.to_vec();
        r.write_table(&path("leaderboard.csv"), "leaderboard", rep, &header, &rows[1..])?;
        let c = &m.tuned.best_config;
        let mut summary = vec![
            vec!["best_lag".to_string(), m.tuned.best_lag.to_string()],
            vec!["best_validation_loss".into(), fmt_float(m.tuned.best_validation_loss)],
            vec!["refined_batch_size".into(), m.tuned.refined_batch_size.to_string()],
            vec![
                "refined_validation_loss".into(),
                fmt_float(m.tuned.refined_validation_loss),
            ],
            vec!["n_hidden_layers".into(), c.n_hidden_layers.to_string()],
            vec!["units_per_layer".into(), c.units_per_layer.to_string()],
            vec!["dropout_rate".into(), fmt_float(c.dropout_rate)],
            vec!["batch_norm".into(), c.batch_norm.to_string()],
            vec!["learning_rate".into(), fmt_float(c.learning_rate)],
        ];
        for (b, loss) in &m.tuned.batch_losses {
            summary.push(vec![format!("val_loss_batch_{b}"), fmt_opt(*loss)]);
        }
        for l in &m.tuned.lags {
            let v = match &l.outcome {
                crate::tuner::LagOutcome::Searched { best_val_loss, .. } => fmt_float(*best_val_loss),
                crate::tuner::LagOutcome::Skipped { reason } => format!("skipped: {reason}"),
            };
            summary.push(vec![format!("lag_{}_best_val_loss", l.lag), v]);
        }
        r.write_table(
            &path("tuner_summary.csv"),
            "tuner_summary",
            rep,
            &["key", "value"],
            &summary,
        )?;
        r.write_table(
            &path("mlp_report.csv"),
            "model_report",
            rep,
            &REPORT_HEADER,
            &report_rows(&[&m.mlp, &m.naive]),
        )?;
        let set = &m.tuned.supervised;
        let rows: Vec<Vec<String>> = (0..m.predicted.len())
            .map(|i| {
                vec![
                    set.test_dates()[i].to_string(),
                    fmt_float(set.test_targets()[i]),
                    fmt_float(m.predicted[i]),
                    fmt_float(m.persistence[i]),
                ]
            })
            .collect();
        r.write_table(
            &path("trajectory_mlp.csv"),
            "trajectory",
            rep,
            &["date", "actual", "mlp", "naive"],
            &rows,
        )
    });
    emit_stage(report, Stage::Gaf, rep, run.gaf.as_ref(), |r, images| {
        for (i, img) in images.iter().enumerate() {
            r.write_bytes(&path(&format!("gaf/sample_{i}.pgm")), "gaf_pgm", rep, &img.to_pgm())?;
            let rows: Vec<Vec<String>> = img
                .matrix
                .rows()
                .into_iter()
                .map(|row| row.iter().map(|v| fmt_float(*v)).collect())
                .collect();
            let header: Vec<String> = (0..img.size()).map(|j| format!("c{j}")).collect();
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            r.write_table(&path(&format!("gaf/sample_{i}.csv")), "gaf_csv", rep, &header, &rows)?;
        }
        Ok(())
    });
    emit_stage(report, Stage::Cnn, rep, run.cnn.as_ref(), |r, c| {
        r.write_table(
            &path("cnn_report.csv"),
            "model_report",
            rep,
            &REPORT_HEADER,
            &report_rows(&[&c.report, &c.naive]),
        )?;
        let rows: Vec<Vec<String>> = (0..c.predicted.len())
            .map(|i| {
                vec![
                    c.dates[i].to_string(),
                    fmt_float(c.actual[i]),
                    fmt_float(c.predicted[i]),
                    fmt_float(c.persistence[i]),
                ]
            })
            .collect();
        r.write_table(
            &path("trajectory_cnn.csv"),
            "trajectory",
            rep,
            &["date", "actual", "cnn_gaf", "naive"],
            &rows,
        )
    });
}

#[derive(Debug)]
pub struct PipelineOutput {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub runs: Vec<RepresentationRun>,
    pub base_dstar: Option<Result<DstarSearchResult>>,
}

impl PipelineOutput {
    pub fn any_failed(&self) -> bool {
        self.manifest.failed_stages().next().is_some()
    }

    pub fn run_for(&self, label: &str) -> Option<&RepresentationRun> {
        self.runs.iter().find(|r| r.representation.label() == label)
    }
}

/// Runs the requested stages for every configured representation and
/// writes the report. Failing stages are recorded in the manifest; the
/// others still run. Only input and I/O setup errors abort the run.
pub fn run_stages(cfg: &PipelineConfig, stages: &[Stage]) -> Result<PipelineOutput> {
    cfg.validate()?;
    let dir = cfg.resolved_output_dir();
    let mut report = Report::create(&dir, cfg.seed, cfg.hash())?;
    let levels = load_input(cfg);
    if let Err(e) = &levels {
        report.record_stage("input", None, Some(e.to_string()));
        let manifest = report.finish()?;
        return Ok(PipelineOutput {
            dir,
            manifest,
            runs: Vec::new(),
            base_dstar: None,
        });
    }
    let levels = levels.expect("checked");
    let r = report.write_table(
        "input_series.csv",
        "series",
        None,
        &["date", "value"],
        &series_rows(&levels),
    );
    report.record_stage("input", None, r.err().map(|e| e.to_string()));

    let needs_base = stages.contains(&Stage::Dstar)
        || cfg
            .representations
            .iter()
            .any(|r| matches!(r, Representation::FracDiff { d: FracOrder::Auto, .. }));
    let base_dstar = needs_base.then(|| fracdiff_base(&levels).and_then(|b| dstar_for(&b, cfg, cfg.exec)));
    if stages.contains(&Stage::Dstar) {
        emit_stage(&mut report, Stage::Dstar, None, base_dstar.as_ref(), |r, d| {
            write_dstar(r, "dstar_curve_base.csv", None, d)?;
            let row = vec![
                fmt_opt(d.d_star),
                fmt_float(d.significance_level),
                d.spec.code().to_string(),
            ];
            r.write_table(
                "dstar_selected.csv",
                "dstar",
                None,
                &["d_star", "significance", "spec"],
                &[row],
            )
        });
    }

    let runs: Vec<RepresentationRun> = cfg.exec.map(&cfg.representations, |rep| {
        run_representation(&levels, *rep, base_dstar.as_ref(), cfg, stages)
    });
    for run in &runs {
        emit_run(&mut report, run, stages);
    }
    let manifest = report.finish()?;
    Ok(PipelineOutput {
        dir,
        manifest,
        runs,
        base_dstar,
    })
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    run_stages(cfg, &Stage::ALL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::File::create(&p).unwrap().write_all(text.as_bytes()).unwrap();
        p
    }

    #[test]
    fn two_row_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.csv", "date,close\n2020-01-02,100\n2020-01-03,101\n");
        let s = load_csv(&p, "date", "close").unwrap();
        assert_eq!(s.values(), &[100.0, 101.0]);
    }

    #[test]
    fn out_of_order_rows_are_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let a = load_csv(
            &write(
                dir.path(),
                "a.csv",
                "date,v\n2020-01-02,1\n2020-01-03,2\n2020-01-06,3\n",
            ),
            "date",
            "v",
        )
        .unwrap();
        let b = load_csv(
            &write(
                dir.path(),
                "b.csv",
                "date,v\n2020-01-06,3\n2020-01-02,1\n2020-01-03,2\n",
            ),
            "date",
            "v",
        )
        .unwrap();
        assert_eq!(a.values(), b.values());
        assert_eq!(a.timestamps(), b.timestamps());
    }

    #[test]
    fn rejection_paths() {
        let dir = tempfile::tempdir().unwrap();
        let nan = write(dir.path(), "n.csv", "date,v\n2020-01-02,1\n2020-01-03,NaN\n");
        assert!(matches!(
            load_csv(&nan, "date", "v"),
            Err(Error::ParseError { row: 3, .. })
        ));
        let dup = write(dir.path(), "d.csv", "date,v\n2020-01-02,1\n2020-01-02,2\n");
        assert!(matches!(load_csv(&dup, "date", "v"), Err(Error::DuplicateDate { .. })));
        let bad_date = write(dir.path(), "b.csv", "date,v\n02/01/2020,1\n");
        assert!(matches!(
            load_csv(&bad_date, "date", "v"),
            Err(Error::ParseError { row: 2, .. })
        ));
        assert!(matches!(
            load_csv(&nan, "date", "missing"),
            Err(Error::ParseError { row: 1, .. })
        ));
        assert!(matches!(
            load_csv(&dir.path().join("nope.csv"), "date", "v"),
            Err(Error::FileNotFound(_))
        ));
    }
}
