//! Acceptance criteria. Each prints one PASS/FAIL line; the process exits
//! nonzero if any fails.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::{close, finite_difference, gradient_matches, oracle_grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use viloss::data::{generate_synth, normalize_minmax, Dataset, SynthSpec, SynthVariant};
use viloss::experiment::{parse_key_values, preset, run, ExperimentConfig, ExperimentOutput};
use viloss::grid::{compute_weights, fit_grid, select_lambda, NormKind};
use viloss::losses::BaseLoss;
use viloss::models::{Model, ModelKind, ModelSpec};

const FD_RELATIVE: f64 = 1e-5;
const FD_STEP: f64 = 1e-5;
const ORACLE_TOL: f64 = 1e-9;
const LD_CANDIDATES: [usize; 7] = [1, 2, 5, 10, 20, 50, 100];
/// LD at the finest candidate must fall to at most this share of the peak.
const SPARSE_FLOOR_SHARE: f64 = 0.5;
const SYNTH_1D_MIN_GAIN: f64 = 0.15;
const SYNTH_2D_MIN_GAIN: f64 = 0.20;
const F1_SLACK: f64 = 0.01;
const PRECISION_WINS: usize = 3;
const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit: Duration, o: Outcome) -> Outcome {
    if elapsed > limit {
        return outcome(
            false,
            format!("{} (took {elapsed:?}, limit {limit:?})", o.detail),
        );
    }
    outcome(o.pass, format!("{} [{elapsed:.2?}]", o.detail))
}

fn random_triple(rng: &mut ChaCha8Rng) -> (Model, Vec<f64>, Vec<f64>, BaseLoss) {
    let kind = match rng.random_range(0..3) {
        0 => ModelKind::Linear,
        1 => ModelKind::Polynomial {
            degree: rng.random_range(1..=3),
        },
        _ => ModelKind::Logistic,
    };
    let m = rng.random_range(1..=3);
    let v = if kind == ModelKind::Logistic {
        1
    } else {
        rng.random_range(1..=2)
    };
    let spec = ModelSpec::new(kind, m, v).unwrap();
    let params = (0..spec.n_params())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let model = Model::with_params(spec, params).unwrap();
    let x = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (y, loss) = if kind == ModelKind::Logistic {
        let y = vec![f64::from(rng.random_range(0..2u8))];
        let loss = if rng.random_bool(0.5) {
            BaseLoss::Bce
        } else {
            BaseLoss::Mse
        };
        (y, loss)
    } else {
        let y = (0..v).map(|_| rng.random_range(-1.0..1.0)).collect();
        let loss = match rng.random_range(0..3) {
            0 => BaseLoss::Mse,
            1 => BaseLoss::Lqr,
            _ => BaseLoss::huber(rng.random_range(0.2..2.0)).unwrap(),
        };
        (y, loss)
    };
    (model, x, y, loss)
}

fn gradient_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut bit_failures, mut fd_failures, mut worst) = (0, 0, 0.0f64);
    let mut triples = 0;
    while triples < 100 {
        let (model, x, y, loss) = random_triple(&mut rng);
        if let BaseLoss::Huber { delta } = loss {
            // the second derivative jumps at |r| = delta
            let pred = model.predict(&x).unwrap();
            if pred
                .iter()
                .zip(&y)
                .any(|(p, t)| ((p - t).abs() - delta).abs() < 1e-3)
            {
                continue;
            }
        }
        triples += 1;
        let w = rng.random_range(0.0..4.0);
        let (eval, grad) = model.param_gradient(&x, &y, &loss).unwrap();
        let (_, wgrad) = model.weighted_param_gradient(&x, &y, &loss, w).unwrap();
        if grad
            .iter()
            .zip(&wgrad)
            .any(|(g, wg)| (w * g).to_bits() != wg.to_bits())
        {
            bit_failures += 1;
        }
        let fd = finite_difference(&model, &x, &y, &loss, FD_STEP);
        for (a, n) in grad.iter().zip(&fd) {
            worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(1e-300));
            if !gradient_matches(*a, *n, FD_RELATIVE, eval.value) {
                fd_failures += 1;
            }
        }
    }
    within(
        start.elapsed(),
        Duration::from_secs(5),
        outcome(
            bit_failures == 0 && fd_failures == 0,
            format!(
                "{triples} triples: {bit_failures} bitwise mismatches, {fd_failures} finite-difference misses (worst relative gap {worst:.1e})"
            ),
        ),
    )
}

fn grid_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut mismatches = Vec::new();
    for case in 0..50 {
        let n = rng.random_range(1..=200);
        let m = rng.random_range(1..=3);
        let v = rng.random_range(1..=2);
        let lambda = rng.random_range(1..=10);
        let draw = |rng: &mut ChaCha8Rng, d: usize| -> Vec<Vec<f64>> {
            (0..n)
                .map(|_| {
                    (0..d)
                        .map(|_| {
                            if rng.random_bool(0.2) {
                                f64::from(rng.random_range(0..3u8)) * 0.5
                            } else {
                                rng.random_range(-4.0..4.0)
                            }
                        })
                        .collect()
                })
                .collect()
        };
        let xs = draw(&mut rng, m);
        let ys = draw(&mut rng, v);
        let subset: Vec<usize> = (0..m).collect();
        let ds = Dataset::from_rows(&xs, &ys).unwrap();
        let grid = fit_grid(&ds, lambda, &subset).unwrap();
        let o = oracle_grid(&xs, &ys, lambda, &subset);
        let l1 = compute_weights(&grid, &ds, NormKind::L1).unwrap();
        let l2 = compute_weights(&grid, &ds, NormKind::L2).unwrap();
        let mut ok = grid.cells().len() == o.nonempty;
        for (i, x) in xs.iter().enumerate() {
            let id = grid.locate_cell(x).unwrap();
            let s = grid.cell(&id).unwrap();
            ok &= id.0 == o.bins[i]
                && close(s.sigma_x, o.sigma_x[i], ORACLE_TOL)
                && close(s.sigma_y, o.sigma_y[i], ORACLE_TOL)
                && close(s.mu, o.mu[i], ORACLE_TOL)
                && close(l1.get(i).gamma, o.gamma_l1[i], ORACLE_TOL)
                && close(l2.get(i).gamma, o.gamma_l2[i], ORACLE_TOL);
        }
        if !ok {
            mismatches.push(case);
        }
    }
    within(
        start.elapsed(),
        Duration::from_secs(10),
        outcome(
            mismatches.is_empty(),
            format!("50 datasets, mismatching cases: {mismatches:?}"),
        ),
    )
}

fn normalized_synth(variant: SynthVariant, seed: u64) -> Dataset {
    let raw = generate_synth(&SynthSpec::new(variant, seed)).unwrap();
    let all: Vec<usize> = (0..raw.len()).collect();
    normalize_minmax(&raw, &all).unwrap().0
}

fn ld_shape() -> Outcome {
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for seed in SEEDS {
        let ds = normalized_synth(SynthVariant::Synth2D, seed);
        let sweep = select_lambda(&ds, &LD_CANDIDATES, &[0, 1]).unwrap();
        let ld: Vec<f64> = sweep.rows.iter().map(|r| r.ld).collect();
        let peak = ld.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let at = ld.iter().position(|&l| l == peak).unwrap();
        let rising = ld[..=at].windows(2).all(|w| w[0] < w[1]);
        let falling = ld[at..].windows(2).all(|w| w[0] > w[1]);
        let ok = [5, 10, 20].contains(&sweep.best)
            && ld[0] > 0.0
            && ld[6] <= SPARSE_FLOOR_SHARE * peak
            && rising
            && falling;
        if !ok {
            failures.push(seed);
        }
        summary.push(format!(
            "seed {seed}: argmax {} LD(1)={:.3} LD(100)/peak={:.2}",
            sweep.best,
            ld[0],
            ld[6] / peak
        ));
    }
    outcome(
        failures.is_empty(),
        format!("{}; failing seeds {failures:?}", summary.join(", ")),
    )
}

fn config_with(name: &str, overrides: &str) -> ExperimentConfig {
    let mut map = parse_key_values(&preset(name).unwrap().to_text()).unwrap();
    map.extend(parse_key_values(overrides).unwrap());
    ExperimentConfig::from_map(&map).unwrap()
}

fn median_of(
    out: &ExperimentOutput,
    loss: &str,
    norm: Option<NormKind>,
    f: impl Fn(&viloss::experiment::ResultRow) -> f64,
) -> f64 {
    let mut v: Vec<f64> = out
        .rows
        .iter()
        .filter(|r| r.loss == loss && r.gamma_norm == norm)
        .map(f)
        .collect();
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn mape_gain(preset_name: &str, min_gain: f64, limit: Duration) -> Outcome {
    let start = Instant::now();
    let cfg = config_with(
        preset_name,
        "losses = mse\ngamma_norms = l2\nseeds = 1,2,3,4,5\n",
    );
    let out = run(&cfg).unwrap();
    let mape = |r: &viloss::experiment::ResultRow| r.regression.unwrap().mape;
    let base = median_of(&out, "mse", None, mape);
    let weighted = median_of(&out, "viloss_mse", Some(NormKind::L2), mape);
    let gain = (base - weighted) / base;
    within(
        start.elapsed(),
        limit,
        outcome(
            gain >= min_gain,
            format!(
                "median MAPE mse {base:.4} vs viloss_mse(l2) {weighted:.4}: relative reduction {:.1}% (need {:.0}%)",
                100.0 * gain,
                100.0 * min_gain
            ),
        ),
    )
}

fn lambda_one_never_selected() -> Outcome {
    let mut picks = Vec::new();
    for variant in [SynthVariant::Synth1D, SynthVariant::Synth2D] {
        for seed in SEEDS {
            let ds = normalized_synth(variant, seed);
            let all: Vec<usize> = (0..ds.n_features()).collect();
            picks.push((
                variant.name(),
                select_lambda(&ds, &LD_CANDIDATES, &all).unwrap().best,
            ));
        }
    }
    // reported only: weighting at lambda = 1 against the baseline
    let cfg = config_with("synth-2d", "losses = mse\ngamma_norms = l2\nlambda = 1\n");
    let out = run(&cfg).unwrap();
    let mape = |r: &viloss::experiment::ResultRow| r.regression.unwrap().mape;
    let note = format!(
        "lambda=1 on synth-2d: mse {:.4}, viloss_mse(l2) {:.4}",
        median_of(&out, "mse", None, mape),
        median_of(&out, "viloss_mse", Some(NormKind::L2), mape)
    );
    let chosen: Vec<String> = picks.iter().map(|(n, l)| format!("{n}:{l}")).collect();
    outcome(
        picks.iter().all(|(_, l)| *l != 1),
        format!("selected {}; {note}", chosen.join(" ")),
    )
}

fn logistic_precision() -> Outcome {
    let cfg = config_with("binary", "seeds = 1,2,3,4,5\n");
    let out = run(&cfg).unwrap();
    let base: Vec<_> = out.rows.iter().filter(|r| r.loss == "bce").collect();
    let f1 = |r: &viloss::experiment::ResultRow| r.classification.unwrap().f1;
    let base_f1 = median_of(&out, "bce", None, f1);
    let mut lines = vec![format!("bce median F1 {base_f1:.4}")];
    let mut any = false;
    for norm in [NormKind::L1, NormKind::L2] {
        let weighted: Vec<_> = out
            .rows
            .iter()
            .filter(|r| r.loss == "viloss_bce" && r.gamma_norm == Some(norm))
            .collect();
        let wins = base
            .iter()
            .zip(&weighted)
            .filter(|(b, w)| {
                assert_eq!(b.seed, w.seed);
                w.classification.unwrap().precision > b.classification.unwrap().precision
            })
            .count();
        let w_f1 = median_of(&out, "viloss_bce", Some(norm), f1);
        let ok = w_f1 >= base_f1 - F1_SLACK && wins >= PRECISION_WINS;
        any |= ok;
        lines.push(format!(
            "{norm}: median F1 {w_f1:.4}, precision up in {wins}/5 seeds"
        ));
    }
    outcome(any, lines.join("; "))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_viloss");
    let repro = |args: &[&str]| {
        Command::new(bin)
            .current_dir(dir.path())
            .args(args)
            .output()
            .unwrap()
            .status
            .success()
    };
    if !repro(&["repro", "synth-1d", "--out", "first"]) {
        return outcome(false, "first run failed".into());
    }
    if !repro(&["repro", "--config", "first/manifest.txt", "--out", "second"]) {
        return outcome(false, "rerun from manifest failed".into());
    }
    let read = |p: &Path| std::fs::read(dir.path().join(p)).unwrap();
    let files = ["manifest.txt", "results.csv", "summary.csv"];
    let differing: Vec<&str> = files
        .iter()
        .filter(|f| read(&Path::new("first").join(f)) != read(&Path::new("second").join(f)))
        .copied()
        .collect();
    outcome(
        differing.is_empty(),
        format!("rerun from manifest; differing files: {differing:?}"),
    )
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("1 gradient identity", gradient_identity),
        ("2 grid oracle", grid_oracle),
        ("3 LD shape on synth-2d", ld_shape),
        ("4 synth-1d improvement", || {
            mape_gain("synth-1d", SYNTH_1D_MIN_GAIN, Duration::from_secs(120))
        }),
        ("5 synth-2d improvement", || {
            mape_gain("synth-2d", SYNTH_2D_MIN_GAIN, Duration::from_secs(300))
        }),
        ("6 lambda=1 never selected", lambda_one_never_selected),
        ("7 logistic precision", logistic_precision),
        ("8 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        println!(
            "criterion {name}: {} - {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!("{failed} of 8 criteria failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
