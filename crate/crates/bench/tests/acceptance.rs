//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use mixest_bench::config::{ExperimentConfig, Metric};
use mixest_bench::record::{raw, ExperimentRecord};
use mixest_bench::run::{run_experiment, RunOptions};
use mixest_bench::verify::{theorem_config, FIT_FROM};
use mixest_core::dictionary::GridLayer;
use mixest_core::estimators::{
    exp_smd_step, sgd_step, softmax, softmax_loss_gradient, EstimatorState, SignConvention, StepSchedule,
};
use mixest_core::evaluation::{estimate_nu, fit_rate, kl_continuous, solve_best_in_class, FnDensity, Objective, Reference};
use mixest_core::grid::{BoxDomain, MidpointGrid};
use mixest_core::rng::seeded;
use mixest_core::simplex::{kl_divergence, ENTROPY_FLOOR};
use mixest_core::{Dictionary, MirrorKind, SamplePoint, WeightVector};
use rand::Rng;

/// Writes straight to stderr so the line survives libtest's output capture.
fn report(criterion: u32, result: Result<String, String>) {
    let (tag, text) = match &result {
        Ok(t) => ("PASS", t),
        Err(t) => ("FAIL", t),
    };
    let line = format!("{tag} criterion {criterion}: {text}\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
    if let Err(msg) = result {
        panic!("criterion {criterion} failed: {msg}");
    }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mixest-acceptance-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn random_simplex(rng: &mut impl Rng, dim: usize) -> WeightVector {
    let raw: Vec<f64> = (0..dim).map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-3).collect();
    WeightVector::normalized(raw).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// Criteria 1-3: the worked two-symbol instance.

const WORKED: &str = r#"
name = "worked"
seed = 2024
n = 1000
trials = 200
formats = []
[target]
kind = "categorical"
pmf = [0.5, 0.5]
[dictionary]
kind = "categorical"
epsilon = 0.5
[oracles]
nu_probes = 0
"#;

struct Timed {
    record: ExperimentRecord,
    elapsed: Duration,
}

fn worked_run() -> &'static Timed {
    static RUN: OnceLock<Timed> = OnceLock::new();
    RUN.get_or_init(|| {
        let config = theorem_config(&ExperimentConfig::from_toml(WORKED).unwrap()).unwrap();
        let start = Instant::now();
        let record = run_experiment(&config, &RunOptions::default()).unwrap();
        Timed { record, elapsed: start.elapsed() }
    })
}

fn bound_check(estimator: &str, metric: Metric, bound: &str) -> Result<String, String> {
    let run = worked_run();
    let record = &run.record;
    let nu = record.oracles.nu.as_ref().ok_or("nu missing")?.value;
    let g = record.oracles.g_infinity.0;
    if (nu - 0.5).abs() > 1e-9 || (g - 3.0).abs() > 1e-9 {
        return Err(format!("oracle constants nu={nu}, G_inf={g}"));
    }
    let series = record.series(estimator, metric).ok_or("series missing")?;
    let curve = record.bound(estimator, metric).ok_or("bound curve missing")?;
    if curve.bound != bound || series.values.len() != 200 {
        return Err(format!("unexpected bound {} over {} trials", curve.bound, series.values.len()));
    }
    let mean = raw(&series.mean);
    let limit = raw(&curve.values);
    let mut worst: f64 = 0.0;
    for ((c, m), b) in series.checkpoints.iter().zip(&mean).zip(&limit) {
        if !(m <= b) {
            return Err(format!("mean {m:.4e} exceeds {bound} {b:.4e} at N={c}"));
        }
        worst = worst.max(m / b);
    }
    if run.elapsed >= Duration::from_secs(10) {
        return Err(format!("took {:.1?}", run.elapsed));
    }
    Ok(format!(
        "{} checkpoints, max mean/bound {worst:.3}, both estimators in {:.2?}",
        series.checkpoints.len(),
        run.elapsed
    ))
}

#[test]
fn criterion_1_theorem2_bound() {
    report(1, bound_check("exp_smd", Metric::KlVsBestInClass, "theorem2"));
}

#[test]
fn criterion_2_theorem1_bound() {
    report(2, bound_check("sgd", Metric::L2VsBestInClass, "theorem1"));
}

fn prop1_gap(mirror: &str, horizon: u64) -> f64 {
    let text = format!(
        r#"
        seed = 99
        n = {horizon}
        trials = 200
        checkpoints = [{horizon}]
        metrics = ["suboptimality_gap"]
        formats = []
        [target]
        kind = "categorical"
        pmf = [0.7, 0.3]
        [dictionary]
        kind = "categorical"
        epsilon = 0.5
        [oracles]
        nu = false
        [[estimators]]
        name = "est"
        mirror = "{mirror}"
        output = "cesaro"
        schedule = {{ kind = "constant_sqrt_n" }}
        "#
    );
    let record = run_experiment(&ExperimentConfig::from_toml(&text).unwrap(), &RunOptions::default()).unwrap();
    record.series("est", Metric::SuboptimalityGap).unwrap().mean[0].0
}

fn criterion_3() -> Result<String, String> {
    let record = &worked_run().record;
    let series = record.series("exp_smd", Metric::KlVsBestInClass).ok_or("series missing")?;
    let points: Vec<(f64, f64)> = series
        .checkpoints
        .iter()
        .zip(raw(&series.mean))
        .filter(|(c, _)| **c >= FIT_FROM)
        .map(|(c, m)| (*c as f64, m))
        .collect();
    let fit = fit_rate(&points).map_err(|e| e.to_string())?;
    if !(-1.3..=-0.8).contains(&fit.slope) || fit.r_squared < 0.9 {
        return Err(format!("theorem-2 slope {:.3}, R² {:.3}", fit.slope, fit.r_squared));
    }
    let mut detail = format!("theorem-2 slope {:.3} (R² {:.3})", fit.slope, fit.r_squared);
    for mirror in ["negative_entropy", "euclidean"] {
        let horizons = [100u64, 316, 1000, 3162, 10000];
        let points: Vec<(f64, f64)> = horizons.iter().map(|&n| (n as f64, prop1_gap(mirror, n))).collect();
        let fit = fit_rate(&points).map_err(|e| format!("{mirror}: {e}"))?;
        if !(-0.8..=-0.35).contains(&fit.slope) {
            return Err(format!("{detail}; {mirror} horizon-tuned slope {:.3} from {points:?}", fit.slope));
        }
        detail.push_str(&format!("; {mirror} horizon-tuned slope {:.3}", fit.slope));
    }
    Ok(detail)
}

#[test]
fn criterion_3_rate_exponents() {
    report(3, criterion_3());
}

// Criterion 4: closed-form steps against brute-force prox minimization.

/// Minimizes `f` over the 2- or 3-simplex by a coarse grid scan followed by
/// repeated tenfold zooms around the incumbent.
fn grid_minimize(dim: usize, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let free = dim - 1;
    let point = |c: &[f64]| {
        let mut z = c.to_vec();
        z.push((1.0 - c.iter().sum::<f64>()).max(0.0));
        z
    };
    let mut center = vec![0.5 / free as f64; free];
    let mut half_width: f64 = 1.0;
    let mut step: f64 = 0.01;
    let mut best = (f64::INFINITY, point(&center));
    while step > 1e-8 {
        let n = (2.0 * half_width / step).round() as i64;
        let axis = |k: usize, i: i64| (center[k] - half_width + i as f64 * step).clamp(0.0, 1.0);
        let mut visit = |c: &[f64]| {
            if c.iter().sum::<f64>() > 1.0 {
                return;
            }
            let z = point(c);
            let v = f(&z);
            if v < best.0 {
                best = (v, z);
            }
        };
        for i in 0..=n {
            if free == 1 {
                visit(&[axis(0, i)]);
            } else {
                for j in 0..=n {
                    visit(&[axis(0, i), axis(1, j)]);
                }
            }
        }
        center = best.1[..free].to_vec();
        half_width = 3.0 * step;
        step /= 10.0;
    }
    best.1
}

fn criterion_4() -> Result<String, String> {
    let mut rng = seeded(404);
    let mut worst: f64 = 0.0;
    for dim in [2, 3] {
        for _ in 0..100 {
            let m = random_simplex(&mut rng, dim);
            let g: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..4.0)).collect();
            let gamma = rng.random_range(0.01..1.0);
            let linear = |z: &[f64]| gamma * z.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();

            let closed = sgd_step(&m, &g, gamma, SignConvention::Descent).unwrap();
            let brute = grid_minimize(dim, |z| {
                z.iter().zip(m.iter()).map(|(a, b)| 0.5 * (a - b).powi(2)).sum::<f64>() - linear(z)
            });
            worst = worst.max(max_abs_diff(closed.as_slice(), &brute));

            let closed = exp_smd_step(&m, &g, gamma).unwrap();
            let brute = grid_minimize(dim, |z| kl_divergence(z, m.as_slice()).unwrap() - linear(z));
            worst = worst.max(max_abs_diff(closed.as_slice(), &brute));
            if worst >= 1e-4 {
                return Err(format!("deviation {worst:.2e} at m={m:?}, g={g:?}, gamma={gamma}"));
            }
        }
    }
    Ok(format!("400 prox problems, max deviation {worst:.2e}"))
}

#[test]
fn criterion_4_geometry_equivalence() {
    report(4, criterion_4());
}

// Criterion 5: oracle cross-checks.

fn criterion_5() -> Result<String, String> {
    let dict = Dictionary::categorical(2, 0.5).unwrap();
    let nu = estimate_nu(&dict, Reference::ExactPmf(&[0.5, 0.5]), &[WeightVector::uniform(2).unwrap()])
        .map_err(|e| e.to_string())?
        .nu;
    if (nu - 0.5).abs() > 1e-9 {
        return Err(format!("nu = {nu}"));
    }

    let mut rng = seeded(505);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let dict = Dictionary::categorical(3, rng.random_range(0.1..0.9)).unwrap();
        let raw: Vec<f64> = (0..3).map(|_| rng.random_range(0.01..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let pmf: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let obj = Objective::new(&dict, Reference::ExactPmf(&pmf)).unwrap();
        let best = solve_best_in_class(&dict, Reference::ExactPmf(&pmf), 1e-8).map_err(|e| e.to_string())?;
        let steps = 1000;
        let mut brute = (f64::INFINITY, [0.0; 3]);
        for a in 0..=steps {
            for b in 0..=(steps - a) {
                let m = [a as f64, b as f64, (steps - a - b) as f64].map(|x| x / steps as f64);
                let v = obj.value(&m);
                if v < brute.0 {
                    brute = (v, m);
                }
            }
        }
        worst = worst.max(max_abs_diff(best.weights.as_slice(), &brute.1));
    }
    if worst >= 2e-3 {
        return Err(format!("solver differs from grid search by {worst:.2e}"));
    }

    let unit = |cx: f64| {
        FnDensity(move |p: &[f64]| (-((p[0] - cx).powi(2) + p[1].powi(2)) / 2.0).exp() / std::f64::consts::TAU)
    };
    let grid = MidpointGrid::new(BoxDomain::square(-7.0, 7.0).unwrap(), 400).unwrap();
    let kl = kl_continuous(&unit(-0.5), &unit(0.5), &grid).map_err(|e| e.to_string())?.value;
    if (kl - 0.5).abs() >= 2e-3 {
        return Err(format!("Gaussian KL {kl}"));
    }
    Ok(format!("nu {nu}, solver gap {worst:.2e}, Gaussian KL {kl:.6}"))
}

#[test]
fn criterion_5_oracle_cross_checks() {
    report(5, criterion_5());
}

// Criterion 6: gradients against central differences.

fn criterion_6() -> Result<String, String> {
    let mut rng = seeded(606);
    let h = 1e-6;
    let layers = [GridLayer { grid_side: 3, sigma: 1.5 }, GridLayer { grid_side: 2, sigma: 0.8 }];
    let gaussian = Dictionary::multiscale_gaussian(BoxDomain::square(-5.0, 5.0).unwrap(), &layers).unwrap();
    let categorical = Dictionary::categorical(6, 0.2).unwrap();
    let mut worst_rel: f64 = 0.0;
    let mut worst_dot: f64 = 0.0;
    for t in 0..50 {
        let (dict, zeta) = if t % 2 == 0 {
            (&gaussian, SamplePoint::xy(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)))
        } else {
            (&categorical, SamplePoint::Symbol(rng.random_range(0..6)))
        };
        let m = random_simplex(&mut rng, dict.len());
        let g = dict.stochastic_gradient(&m, &zeta).map_err(|e| e.to_string())?;
        let dot: f64 = g.iter().zip(m.iter()).map(|(a, b)| a * b).sum();
        worst_dot = worst_dot.max((dot - 1.0).abs());
        // The central difference of log Q is taken in ln1p form, since moving
        // m_i by ±h changes Q by exactly ±h f_i.
        let values = dict.component_values(&zeta).unwrap();
        let q: f64 = m.iter().zip(&values).map(|(a, b)| a * b).sum();
        for i in 0..dict.len() {
            let r = h * values[i] / q;
            let fd = (r.ln_1p() - (-r).ln_1p()) / (2.0 * h);
            worst_rel = worst_rel.max((fd - g[i]).abs() / g[i].abs().max(1e-6));
        }
    }
    let dict = Dictionary::categorical(5, 0.2).unwrap();
    let mut worst_softmax: f64 = 0.0;
    for _ in 0..50 {
        let w: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
        let values = dict.component_values(&SamplePoint::Symbol(rng.random_range(0..5))).unwrap();
        let loss = |w: &[f64]| -softmax(w).iter().zip(&values).map(|(a, b)| a * b).sum::<f64>().ln();
        let m = softmax(&w);
        let q: f64 = m.iter().zip(&values).map(|(a, b)| a * b).sum();
        let g: Vec<f64> = values.iter().map(|f| f / q).collect();
        let dot: f64 = g.iter().zip(&m).map(|(a, b)| a * b).sum();
        worst_dot = worst_dot.max((dot - 1.0).abs());
        let analytic = softmax_loss_gradient(&m, &g);
        for j in 0..5 {
            let (mut up, mut down) = (w.clone(), w.clone());
            up[j] += h;
            down[j] -= h;
            let fd = (loss(&up) - loss(&down)) / (2.0 * h);
            worst_softmax = worst_softmax.max((fd - analytic[j]).abs() / analytic[j].abs().max(1e-6));
        }
    }
    let detail = format!("score rel {worst_rel:.2e}, softmax rel {worst_softmax:.2e}, |<m,g>-1| {worst_dot:.2e}");
    if worst_rel >= 1e-4 || worst_softmax >= 1e-4 || worst_dot >= 1e-9 {
        return Err(detail);
    }
    Ok(detail)
}

#[test]
fn criterion_6_gradient_correctness() {
    report(6, criterion_6());
}

// Criterion 7: a million mixed steps stay on the simplex.

fn criterion_7() -> Result<String, String> {
    let mut rng = seeded(707);
    let mut steps = 0u64;
    let mut worst_sum: f64 = 0.0;
    let mut min_entropy: f64 = 1.0;
    let mut min_euclid: f64 = 1.0;
    for segment in 0..100 {
        let k = rng.random_range(2..20);
        let dict = Dictionary::categorical(k, rng.random_range(0.001..0.9)).unwrap();
        let mirror = if segment % 2 == 0 { MirrorKind::Euclidean } else { MirrorKind::NegativeEntropy };
        let schedule = match rng.random_range(0..3) {
            0 => StepSchedule::strongly_convex(rng.random_range(0.001..2.0)),
            1 => StepSchedule::power_decay(rng.random_range(0.01..10.0), rng.random_range(0.0..1.0)),
            _ => StepSchedule::constant_sqrt_n(10_000, rng.random_range(0.1..2.0), rng.random_range(0.5..100.0)),
        }
        .unwrap();
        let m0 = random_simplex(&mut rng, k);
        let mut state = EstimatorState::new(m0, schedule, mirror).unwrap();
        let skew: Vec<f64> = (0..k).map(|_| rng.random::<f64>().powi(3)).collect();
        let total: f64 = skew.iter().sum();
        for _ in 0..10_000 {
            let mut u = rng.random::<f64>() * total;
            let symbol = skew
                .iter()
                .position(|w| {
                    u -= w;
                    u < 0.0
                })
                .unwrap_or(k - 1);
            state.step(&dict, &SamplePoint::Symbol(symbol)).map_err(|e| e.to_string())?;
            steps += 1;
            for m in [state.current(), state.cesaro()] {
                worst_sum = worst_sum.max((m.iter().sum::<f64>() - 1.0).abs());
                match mirror {
                    MirrorKind::NegativeEntropy => min_entropy = min_entropy.min(m.min()),
                    MirrorKind::Euclidean => min_euclid = min_euclid.min(m.min()),
                }
            }
        }
    }
    let detail = format!(
        "{steps} steps, max |sum-1| {worst_sum:.2e}, min euclidean weight {min_euclid:.2e}, min entropic weight {min_entropy:.2e}"
    );
    if worst_sum > 1e-9 || min_euclid < 0.0 || min_entropy < ENTROPY_FLOOR {
        return Err(detail);
    }
    Ok(detail)
}

#[test]
fn criterion_7_simplex_invariance() {
    report(7, criterion_7());
}

// Criteria 8-10: the shipped configurations through the CLI.

struct CliRun {
    csv: Vec<u8>,
    record: ExperimentRecord,
    elapsed: Duration,
}

fn cli_run(config: &str, tag: &str, jobs: Option<usize>) -> CliRun {
    let out = scratch_dir(tag);
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mixest"));
    if let Some(j) = jobs {
        cmd.arg("--jobs").arg(j.to_string());
    }
    cmd.arg("run").arg(configs_dir().join(config)).arg("--out").arg(&out).env_remove("MIXEST_SEED");
    let start = Instant::now();
    let output = cmd.output().expect("spawn mixest");
    let elapsed = start.elapsed();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let stem = config.trim_end_matches(".toml");
    let csv = std::fs::read(out.join(format!("{stem}.csv"))).unwrap();
    let record = serde_json::from_slice(&std::fs::read(out.join(format!("{stem}.json"))).unwrap()).unwrap();
    let _ = std::fs::remove_dir_all(out);
    CliRun { csv, record, elapsed }
}

fn fourmode_single_thread() -> &'static CliRun {
    static RUN: OnceLock<CliRun> = OnceLock::new();
    RUN.get_or_init(|| cli_run("fourmode.toml", "fourmode-a", Some(1)))
}

fn value_at(record: &ExperimentRecord, estimator: &str, n: u64) -> Option<f64> {
    let s = record.series(estimator, Metric::KlVsTarget)?;
    let i = s.checkpoints.iter().position(|&c| c == n)?;
    Some(s.mean[i].0)
}

fn criterion_8() -> Result<String, String> {
    let run = fourmode_single_thread();
    let r = &run.record;
    if r.oracles.dictionary_size != 1189 || r.config.n != 20_000 || r.trials.len() != 3 {
        return Err("configuration differs from the reference setup".into());
    }
    let early = value_at(r, "exp_smd", 200).ok_or("no N=200 checkpoint")?;
    let late = value_at(r, "exp_smd", 20_000).ok_or("no N=20000 checkpoint")?;
    if !(late < early) {
        return Err(format!("KL {late:.4} at N=20000 is not below {early:.4} at N=200"));
    }
    if run.elapsed >= Duration::from_secs(300) {
        return Err(format!("took {:.1?}", run.elapsed));
    }
    let kde = value_at(r, "kde", 8000).unwrap_or(f64::NAN);
    let knn = value_at(r, "knn", 8000).unwrap_or(f64::NAN);
    Ok(format!(
        "KL {early:.4} -> {late:.4} (N=200 -> 20000) in {:.1?} single-threaded; at N=8000 KDE {kde:.4}, k-NN {knn:.4}",
        run.elapsed
    ))
}

#[test]
fn criterion_8_reference_configuration() {
    report(8, criterion_8());
}

fn criterion_9() -> Result<String, String> {
    let r = &fourmode_single_thread().record;
    let kde: Vec<f64> = [500, 2000, 8000].iter().map(|&n| value_at(r, "kde", n).unwrap_or(f64::NAN)).collect();
    if !(kde[1] < kde[0] && kde[2] < kde[1]) {
        return Err(format!("KDE KL not decreasing: {kde:?}"));
    }
    let cat = cli_run("categorical.toml", "categorical", None).record;
    let support = 50;
    let smd = cat.series("exp_smd", Metric::KlVsTarget).ok_or("exp_smd missing")?;
    let mut compared = 0;
    for (i, &n) in smd.checkpoints.iter().enumerate().filter(|(_, &n)| n >= 10 * support) {
        let add = value_at(&cat, "add_constant", n).ok_or("add_constant missing")?;
        if !(smd.mean[i].0 < add) {
            return Err(format!("at N={n} Exp-SMD KL {} is not below add-one {add}", smd.mean[i].0));
        }
        compared += 1;
    }
    let last = *smd.checkpoints.last().unwrap();
    Ok(format!(
        "KDE KL {:.4}/{:.4}/{:.4}; Exp-SMD beats add-one at {compared} checkpoints (final {:.4} vs {:.4})",
        kde[0],
        kde[1],
        kde[2],
        value_at(&cat, "exp_smd", last).unwrap(),
        value_at(&cat, "add_constant", last).unwrap()
    ))
}

#[test]
fn criterion_9_baseline_sanity() {
    report(9, criterion_9());
}

fn criterion_10() -> Result<String, String> {
    let first = fourmode_single_thread();
    // At least 4 workers so the pool interleaves trials even on a single core.
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get()).max(4);
    let second = cli_run("fourmode.toml", "fourmode-b", Some(jobs));
    if first.csv != second.csv {
        return Err("CSV output differs between runs".into());
    }
    Ok(format!("{} identical CSV bytes (1 worker vs {jobs})", first.csv.len()))
}

#[test]
fn criterion_10_determinism() {
    report(10, criterion_10());
}
