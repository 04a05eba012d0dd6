//! Desk-scale acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.
//!
//! `cargo test --test acceptance -- 8` runs only the criteria whose number or
//! name contains the given text.

mod common;

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use fdcast::cnn::CnnConfig;
use fdcast::fracdiff::{default_grid, dstar_search, fracdiff_values, fracdiff_weights, DEFAULT_MAX_TERMS};
use fdcast::gaf::{gaf_encode, rescale_window};
use fdcast::pipeline::run_cnn;
use fdcast::rng;
use fdcast::supervised::{evaluate, naive_forecast, ModelReport};
use fdcast::synthetic::{generate, SyntheticKind, SyntheticSpec};
use fdcast::tuner::{tune, TunerConfig};
use fdcast::unit_root::adf_test_values;
use fdcast::{adf_critical_values, log_returns, run_pipeline, AdfSpec, Exec, PipelineConfig};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const ROOT_SEED: u64 = 2024;
const TIME_LIMIT: Duration = Duration::from_secs(15 * 60);

type Check = fn() -> Result<String, String>;

fn ensure(ok: bool, detail: String) -> Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn seeds(stream: &str, n: usize) -> Vec<u64> {
    let base = rng::stream_seed(ROOT_SEED, stream);
    (0..n as u64).map(|i| rng::child_seed(base, i)).collect()
}

fn critical_values() -> Result<String, String> {
    let published = [
        (AdfSpec::Constant, [-3.4336, -2.8630, -2.5675]),
        (AdfSpec::ConstantTrend, [-3.9633, -3.4127, -3.1283]),
    ];
    let mut worst: f64 = 0.0;
    for (spec, want) in published {
        let cv = adf_critical_values(1992, spec).map_err(|e| e.to_string())?;
        for (got, w) in [cv.one_pct, cv.five_pct, cv.ten_pct].iter().zip(want) {
            worst = worst.max((got - w).abs());
        }
    }
    ensure(worst <= 0.01, format!("largest deviation {worst:.5}"))
}

fn rejection_rate(kind: SyntheticKind, stream: &str) -> f64 {
    let s = seeds(stream, 500);
    let rejected: usize = Exec::default()
        .map(&s, |&seed| {
            let y = generate(&SyntheticSpec::new(kind, 500, seed)).expect("valid spec");
            let r = adf_test_values(y.values(), AdfSpec::Constant, None).expect("long enough");
            usize::from(r.p_value < 0.05)
        })
        .iter()
        .sum();
    rejected as f64 / s.len() as f64
}

fn adf_size_and_power() -> Result<String, String> {
    let t = Instant::now();
    let size = rejection_rate(SyntheticKind::RandomWalk, "adf/size");
    let power = rejection_rate(SyntheticKind::Ar1 { phi: 0.5 }, "adf/power");
    let secs = t.elapsed().as_secs_f64();
    ensure(
        (0.02..=0.09).contains(&size) && power >= 0.95 && secs < 60.0,
        format!("size {:.1}%, power {:.1}%, {secs:.1}s", 100.0 * size, 100.0 * power),
    )
}

/// `|w_k|` from the gamma-function closed form, for `0 < d < 1`.
fn closed_form_weight(d: f64, k: usize) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let k = k as f64;
    -(ln_gamma(k - d) - ln_gamma(k + 1.0) - ln_gamma(1.0 - d) + d.ln()).exp()
}

fn fractional_weights() -> Result<String, String> {
    let mut r = rng::stream(ROOT_SEED, "weights");
    let mut worst_rec: f64 = 0.0;
    let mut worst_closed: f64 = 0.0;
    for _ in 0..1000 {
        let d: f64 = r.random_range(0.0..2.0);
        let spec = fracdiff_weights(d, 1e-5, 20_000).map_err(|e| e.to_string())?;
        let w = &spec.weights;
        for k in 1..w.len() {
            let next = -w[k - 1] * (d - k as f64 + 1.0) / k as f64;
            worst_rec = worst_rec.max((w[k] - next).abs() / w[k].abs().max(f64::MIN_POSITIVE));
        }
        if d > 0.01 && d < 0.99 {
            for (k, wk) in w.iter().enumerate().skip(1).take(100) {
                worst_closed = worst_closed.max((wk - closed_form_weight(d, k)).abs() / wk.abs());
            }
        }
    }

    let x: Vec<f64> = (0..500).map(|_| r.random_range(-50.0..50.0)).collect();
    let one = fracdiff_weights(1.0, 1e-5, DEFAULT_MAX_TERMS).map_err(|e| e.to_string())?;
    let fd = fracdiff_values(&x, &one).map_err(|e| e.to_string())?;
    let first_diff: Vec<f64> = x.windows(2).map(|p| p[1] - p[0]).collect();
    let exact = fd == first_diff;

    let tail = fracdiff_weights(0.4, 1e-12, 2000).map_err(|e| e.to_string())?;
    let pts: Vec<(f64, f64)> = (100..=1000)
        .map(|k| ((k as f64).ln(), tail.weights[k].abs().ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = pts.iter().map(|(a, b)| (a - mx) * (b - my)).sum::<f64>()
        / pts.iter().map(|(a, _)| (a - mx).powi(2)).sum::<f64>();

    ensure(
        worst_rec <= 1e-14 && worst_closed < 1e-9 && exact && (slope + 1.4).abs() <= 0.05,
        format!("recurrence {worst_rec:.1e}, closed form {worst_closed:.1e}, d=1 exact {exact}, tail slope {slope:.4}"),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn dstar_analog() -> Result<String, String> {
    let t = Instant::now();
    let grid = default_grid();
    let walks = seeds("dstar/walks", 50);
    let found: Vec<Option<f64>> = Exec::default().map(&walks, |&seed| {
        let y = generate(&SyntheticSpec::new(SyntheticKind::RandomWalk, 2000, seed)).expect("valid spec");
        dstar_search(&y, &grid, 0.01, 1e-5, AdfSpec::Constant)
            .expect("search runs")
            .d_star
    });
    // a walk with no d* on the grid counts above every grid point
    let med = median(found.iter().map(|d| d.unwrap_or(f64::INFINITY)).collect());

    // long enough that every order on the grid leaves a testable series
    let priced = seeds("dstar/returns", 3);
    let worst_p = Exec::default()
        .map(&priced, |&seed| {
            let spec = SyntheticSpec {
                level: 1000.0,
                ..SyntheticSpec::new(SyntheticKind::RandomWalk, 5000, seed)
            };
            let r = log_returns(&generate(&spec).expect("valid spec")).expect("positive levels");
            let res = dstar_search(&r, &grid, 0.01, 1e-5, AdfSpec::Constant).expect("search runs");
            res.p_values
                .iter()
                .map(|p| p.unwrap_or(f64::INFINITY))
                .fold(0.0, f64::max)
        })
        .into_iter()
        .fold(0.0, f64::max);
    let secs = t.elapsed().as_secs_f64();
    ensure(
        (0.3..=0.7).contains(&med) && worst_p < 0.01 && secs < 180.0,
        format!("median d* {med:.2}, largest log-return p {worst_p:.1e}, {secs:.1}s"),
    )
}

fn gradient_suite() -> Result<String, String> {
    let t = Instant::now();
    type Check = (&'static str, fn(u64) -> f64);
    let checks: [Check; 5] = [
        ("dense", common::dense),
        ("relu", common::relu),
        ("batch norm", common::batchnorm),
        ("conv", common::conv),
        ("max pool", common::maxpool),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (label, check) in checks {
        let worst = (0..20).map(|s| check(1000 + s)).fold(0.0, f64::max);
        ok &= worst < common::TOL;
        parts.push(format!("{label} {worst:.1e}"));
    }
    let secs = t.elapsed().as_secs_f64();
    ensure(ok && secs < 30.0, format!("{}, {secs:.1}s", parts.join(", ")))
}

/// Tuning budget shared by the forecasting criteria.
fn desk_tuner(seed: u64) -> TunerConfig {
    TunerConfig {
        lag_grid: vec![1, 5, 10, 20],
        n_candidates: 8,
        halving_rungs: vec![5, 15, 45],
        final_max_epochs: 200,
        seed,
        ..TunerConfig::default()
    }
}

fn tuned_reports(spec: &SyntheticSpec, tuner_seed: u64) -> Result<(ModelReport, ModelReport), String> {
    let s = generate(spec).map_err(|e| e.to_string())?;
    let r = tune(&s, &desk_tuner(tuner_seed), 0.2).map_err(|e| e.to_string())?;
    let set = &r.supervised;
    let pred = r.test_predictions().map_err(|e| e.to_string())?;
    let mlp = evaluate(&pred, set.test_targets(), "mlp").map_err(|e| e.to_string())?;
    let naive = evaluate(&naive_forecast(set), set.test_targets(), "naive").map_err(|e| e.to_string())?;
    Ok((mlp, naive))
}

fn levels_analog() -> Result<String, String> {
    let t = Instant::now();
    let spec = SyntheticSpec {
        level: 1000.0,
        ..SyntheticSpec::new(SyntheticKind::RandomWalk, 2000, rng::stream_seed(ROOT_SEED, "levels"))
    };
    let (mlp, naive) = tuned_reports(&spec, 1)?;
    let r2m = mlp.r_squared.unwrap_or(f64::NAN);
    let r2n = naive.r_squared.unwrap_or(f64::NAN);
    let gap = (mlp.mae - naive.mae).abs() / naive.mae;
    let secs = t.elapsed().as_secs_f64();
    ensure(
        r2m >= 0.9 && r2n >= 0.9 && gap < 0.2 && secs < 300.0,
        format!(
            "R2 mlp {r2m:.4} naive {r2n:.4}, MAE mlp {:.4} naive {:.4} ({:.1}% apart), {secs:.1}s",
            mlp.mae,
            naive.mae,
            100.0 * gap
        ),
    )
}

fn returns_analog() -> Result<String, String> {
    let spec = SyntheticSpec::new(SyntheticKind::WhiteNoise, 2000, rng::stream_seed(ROOT_SEED, "returns"));
    let (mlp, _) = tuned_reports(&spec, 2)?;
    let r2 = mlp.r_squared.unwrap_or(f64::NAN);
    ensure((-0.10..=0.05).contains(&r2), format!("test R2 {r2:.4}"))
}

fn persistence_analog() -> Result<String, String> {
    let runs: Vec<u64> = (0..10).collect();
    let outcomes = Exec::default().map(&runs, |&seed| {
        let spec = SyntheticSpec {
            level: 100.0,
            ..SyntheticSpec::new(SyntheticKind::Ar1 { phi: 0.9 }, 4000, seed)
        };
        tuned_reports(&spec, seed).map(|(m, n)| m.mae / n.mae)
    });
    let mut ratios = Vec::new();
    for o in outcomes {
        ratios.push(o?);
    }
    let wins = ratios.iter().filter(|r| **r <= 1.0).count();
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    ensure(
        wins >= 8,
        format!("{wins}/10 seeds at or below naive MAE (ratios {})", shown.join(" ")),
    )
}

fn gaf_invariants() -> Result<String, String> {
    let mut r = rng::stream(ROOT_SEED, "gaf");
    let mut worst = [0.0f64; 4];
    // offsets are drawn on each window's own scale, so the data carry full
    // relative precision into the checks
    let window = |r: &mut rng::StageRng, near_constant: bool| -> (Vec<f64>, f64) {
        let w = r.random_range(2..=40);
        let scale = 10f64.powf(r.random_range(-3.0..3.0));
        let offset = scale * r.random_range(-10.0..10.0);
        let spread = if near_constant { scale * 1e-9 } else { scale };
        let y = (0..w)
            .map(|_| {
                let z: f64 = StandardNormal.sample(r);
                offset + spread * z
            })
            .collect();
        (y, scale)
    };
    for i in 0..1200 {
        let near_constant = i >= 1000;
        let (y, scale) = window(&mut r, near_constant);
        let img = gaf_encode(&y).map_err(|e| e.to_string())?;
        let g = &img.matrix;
        let (scaled, _, _) = rescale_window(&y);
        let n = y.len();
        for a in 0..n {
            let diag = 2.0 * scaled[a] * scaled[a] - 1.0;
            worst[2] = worst[2].max((g[[a, a]] - diag).abs());
            for b in 0..n {
                worst[0] = worst[0].max((g[[a, b]] - g[[b, a]]).abs());
                worst[1] = worst[1].max(g[[a, b]].abs() - 1.0);
                let trig = scaled[a] * scaled[b] - (1.0 - scaled[a].powi(2)).sqrt() * (1.0 - scaled[b].powi(2)).sqrt();
                worst[2] = worst[2].max((g[[a, b]] - trig).abs());
            }
        }
        // rescaling cancels affine maps only up to the window's own precision,
        // so near-constant windows are kept to the first three checks
        if !near_constant {
            let a: f64 = r.random_range(0.1..10.0);
            let b = a * scale * r.random_range(-10.0..10.0);
            let moved: Vec<f64> = y.iter().map(|v| a * v + b).collect();
            let other = gaf_encode(&moved).map_err(|e| e.to_string())?;
            let diff = (&other.matrix - g).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            worst[3] = worst[3].max(diff);
        }
    }
    ensure(
        worst[0] <= 1e-12 && worst[1] <= 1e-12 && worst[2] <= 1e-12 && worst[3] <= 1e-12,
        format!(
            "symmetry {:.1e}, range {:.1e}, identities {:.1e}, affine {:.1e}",
            worst[0],
            worst[1].max(0.0),
            worst[2],
            worst[3]
        ),
    )
}

fn cnn_analog() -> Result<String, String> {
    let mut parts = Vec::new();
    let mut ok = true;
    for (label, kind, level) in [
        ("white noise", SyntheticKind::WhiteNoise, 0.0),
        ("random walk", SyntheticKind::RandomWalk, 1000.0),
    ] {
        let spec = SyntheticSpec {
            level,
            ..SyntheticSpec::new(kind, 1000, rng::stream_seed(ROOT_SEED, label))
        };
        let s = generate(&spec).map_err(|e| e.to_string())?;
        let cfg = CnnConfig {
            seed: rng::stream_seed(ROOT_SEED, "cnn"),
            ..CnnConfig::default()
        };
        let out = run_cnn(&s, &cfg, 20, 0.2).map_err(|e| format!("{label}: {e}"))?;
        let finite = out.predicted.iter().all(|p| p.is_finite());
        let r2 = out.report.r_squared.unwrap_or(f64::NAN);
        ok &= finite && r2 <= 0.05;
        parts.push(format!("{label} R2 {r2:.3} after {} epochs", out.epochs_run));
    }
    ensure(ok, parts.join(", "))
}

fn read_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).expect("report directory") {
            let path = entry.expect("entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .expect("under root")
                    .to_string_lossy()
                    .into_owned();
                out.push((rel, fs::read(&path).expect("readable")));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let text = "seed = 11
input.synthetic = random_walk
input.n = 600
input.level = 1000
tuner.lag_grid = 1, 3
tuner.n_candidates = 3
tuner.rungs = 2, 6
tuner.batch_grid = 32, 64
tuner.final_max_epochs = 10
cnn.max_epochs = 3
dstar.grid_step = 0.25";
    let mut trees = Vec::new();
    for (name, exec) in [("first", "parallel"), ("second", "parallel"), ("serial", "serial")] {
        let mut cfg = PipelineConfig::from_text(&format!("{text}\nexec = {exec}")).map_err(|e| e.to_string())?;
        cfg.output_dir = tmp.path().join(name);
        let out = run_pipeline(&cfg).map_err(|e| e.to_string())?;
        if out.any_failed() {
            return Err(format!("{name} run had failed stages"));
        }
        trees.push(read_tree(&cfg.output_dir));
    }
    let same_rerun = trees[0] == trees[1];
    let same_exec = trees[0] == trees[2];
    ensure(
        same_rerun && same_exec,
        format!(
            "{} files, rerun identical {same_rerun}, serial matches parallel {same_exec}",
            trees[0].len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(u8, &str, Check); 11] = [
        (1, "ADF critical values at n=1992", critical_values),
        (2, "ADF size and power", adf_size_and_power),
        (3, "fractional weights", fractional_weights),
        (4, "d* on random walks and log returns", dstar_analog),
        (5, "layer gradients", gradient_suite),
        (6, "random-walk levels forecast", levels_analog),
        (7, "white-noise returns forecast", returns_analog),
        (8, "persistence advantage on AR(1)", persistence_analog),
        (9, "GAF invariants", gaf_invariants),
        (10, "CNN on GAF images", cnn_analog),
        (11, "determinism", determinism),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected = |id: u8, name: &str| {
        filters.is_empty()
            || filters.iter().any(|f| match f.parse::<u8>() {
                Ok(n) => n == id,
                Err(_) => name.contains(f.as_str()),
            })
    };

    let start = Instant::now();
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, check) in criteria {
        if !selected(id, name) {
            continue;
        }
        ran += 1;
        let t = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {id:>2}. {name} [{secs:.1}s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {id:>2}. {name} [{secs:.1}s]: {detail}");
            }
        }
    }
    if ran == 11 {
        let total = start.elapsed();
        let label = if total < TIME_LIMIT { "PASS" } else { "FAIL" };
        if total >= TIME_LIMIT {
            failed += 1;
        }
        println!("{label}  12. full suite under 15 minutes: {:.1}s", total.as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
