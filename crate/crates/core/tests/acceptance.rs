//! Acceptance checks, one line of output per criterion.
//!
//! Runs without the libtest harness so the PASS/FAIL lines always reach the
//! terminal; the process exits non-zero when any criterion fails.

use std::path::Path;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use swarm_ann::anneal::{acceptance_probability, sa_accept, update_velocity_improved};
use swarm_ann::dataset::{generate_synthetic, impute_mean, make_folds, split, Dataset, RawTable};
use swarm_ann::experiment::{read_trace, run_experiment, DataSource, ExperimentConfig};
use swarm_ann::metrics::{compute_metrics, f_measure, ConfusionMatrix};
use swarm_ann::mlp::Topology;
use swarm_ann::pso::{self, update_position, update_velocity, Particle, PsoConfig, Swarm};
use swarm_ann::trainer::{train_weights, Algorithm, TrainerConfig};

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn f_measure_formula_reproduction() -> Outcome {
    // Counts chosen so that precision is exactly 461/500 and recall 103/125.
    let cm = ConfusionMatrix {
        tp: 47_483,
        fp: 4_017,
        fn_: 10_142,
        tn: 20_000,
    };
    let report = compute_metrics(&cm).expect("non-empty matrix");
    let harmonic = 2.0 / (1.0 / 0.922 + 1.0 / 0.824);
    let direct = f_measure(0.922, 0.824).expect("non-zero inputs");
    let pass = (report.precision - 0.922).abs() < 1e-12
        && (report.recall - 0.824).abs() < 1e-12
        && (report.f_measure - 0.870).abs() <= 0.0005
        && (direct - 0.870).abs() <= 0.0005
        && (report.f_measure - harmonic).abs() < 1e-12;
    Outcome::new(
        pass,
        format!(
            "F-measure {:.6} from the report, {direct:.6} direct",
            report.f_measure
        ),
    )
}

fn default_parameters() -> Outcome {
    let c = TrainerConfig::default();
    let mut problems = Vec::new();
    let mut expect = |what: &str, ok: bool| {
        if !ok {
            problems.push(what.to_string());
        }
    };
    expect("outer swarm 20", c.outer.swarm_size == 20);
    expect("outer iterations 15", c.outer.max_iterations == 15);
    expect("inner swarm 50", c.inner.swarm_size == 50);
    expect("inner iterations 2000", c.inner.max_iterations == 2000);
    expect("hidden [7, 30]", c.hidden_low == 7 && c.hidden_high == 30);
    expect(
        "outer box [7, 30]",
        c.outer.space_low == 7.0 && c.outer.space_high == 30.0,
    );
    expect(
        "weight box [-2, 2]",
        c.inner.space_low == -2.0 && c.inner.space_high == 2.0,
    );
    for (name, p) in [("outer", &c.outer), ("inner", &c.inner)] {
        expect(&format!("{name} c1"), p.c1 == 1.4960);
        expect(&format!("{name} c2"), p.c2 == 1.4960);
        expect(&format!("{name} w0"), p.w0 == 0.8);
        expect(&format!("{name} decay"), p.w_decay == 0.9);
    }

    let config = PsoConfig::with_box(5, 60, -2.0, 2.0).with_seed(3);
    let mut swarm = Swarm::init(&config, 3, &sphere).expect("valid config");
    let mut worst = 0.0f64;
    for k in 0..=60 {
        if k > 0 {
            swarm.step(&config, &sphere).expect("finite objective");
        }
        worst = worst.max((swarm.inertia - 0.8 * 0.9f64.powi(k)).abs());
    }
    expect("inertia schedule", worst <= 1e-15);
    Outcome::new(
        problems.is_empty(),
        if problems.is_empty() {
            format!("all defaults match; max inertia error {worst:e}")
        } else {
            format!("mismatched: {}", problems.join(", "))
        },
    )
}

fn sphere_optimization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let oracle = (0..1_000_000)
        .map(|_| sphere(&[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]))
        .fold(f64::INFINITY, f64::min);
    if oracle >= 1e-3 {
        return Outcome::new(
            false,
            format!("random search oracle only reached {oracle:e}"),
        );
    }
    let start = Instant::now();
    let config = PsoConfig::with_box(20, 200, -2.0, 2.0).with_seed(7);
    let out = pso::run(&config, 2, &sphere).expect("finite objective");
    let elapsed = start.elapsed();
    Outcome::new(
        out.gbest_fitness < 1e-4 && elapsed < Duration::from_secs(1),
        format!(
            "gbest {:e} in {elapsed:.2?} (random search oracle {oracle:e})",
            out.gbest_fitness
        ),
    )
}

fn annealing_acceptance_frequency() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (delta_e, t) in [(1.0, 1.0), (1.0, 0.5), (0.5, 2.0)] {
        let trials = 100_000;
        let accepted = (0..trials)
            .filter(|_| sa_accept(delta_e, t, 1.0, rng.random::<f64>()).expect("valid inputs"))
            .count();
        let freq = accepted as f64 / trials as f64;
        let expected = (-delta_e / t).exp();
        worst = worst.max((freq - expected).abs());
        parts.push(format!("({delta_e}, {t}): {freq:.4} vs {expected:.4}"));
    }
    let elapsed = start.elapsed();
    Outcome::new(
        worst <= 0.01 && elapsed < Duration::from_secs(1),
        format!("{}; max gap {worst:.4} in {elapsed:.2?}", parts.join(", ")),
    )
}

fn zero_repulsion_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let d = rng.random_range(1..12);
        let mut vec =
            |lo: f64, hi: f64| -> Vec<f64> { (0..d).map(|_| rng.random_range(lo..hi)).collect() };
        let mut particle = Particle::new(vec(-2.0, 2.0), vec(-0.8, 0.8), 0.0);
        particle.pbest_position = vec(-2.0, 2.0);
        particle.pworst_position = vec(-2.0, 2.0);
        let gbest = vec(-2.0, 2.0);
        let (r1, r2, r3) = (vec(0.0, 1.0), vec(0.0, 1.0), vec(0.0, 1.0));
        let w = rng.random_range(0.0..1.0);
        let mut config = PsoConfig::weight_search();
        config.c1 = rng.random_range(0.0..3.0);
        config.c2 = rng.random_range(0.0..3.0);
        let standard =
            update_velocity(&particle, &gbest, w, &config, &r1, &r2).expect("matching dims");
        let improved = update_velocity_improved(
            &particle,
            &gbest,
            w,
            config.c1,
            config.c2,
            0.0,
            &r1,
            &r2,
            &r3,
            config.v_max,
        )
        .expect("matching dims");
        let same = standard
            .iter()
            .zip(&improved)
            .all(|(a, b)| a.to_bits() == b.to_bits());
        if !same {
            mismatches += 1;
        }
    }
    let cold = [1e-3, 1e-1, 1.0, 10.0]
        .iter()
        .all(|&de| acceptance_probability(de, 1e-12, 1.0).expect("valid inputs") == 0.0);
    let cold_monotone = acceptance_probability(1.0, 1e-2, 1.0).expect("valid")
        < acceptance_probability(1.0, 1e-1, 1.0).expect("valid");
    Outcome::new(
        mismatches == 0 && cold && cold_monotone,
        format!(
            "{mismatches} of 10000 operand sets differ; near-zero temperature rejects every worse move: {cold}"
        ),
    )
}

fn last_improvement(trace: &[f64]) -> usize {
    (1..trace.len())
        .rev()
        .find(|&i| trace[i] < trace[i - 1])
        .unwrap_or(0)
}

fn local_minima_escape() -> Outcome {
    let start = Instant::now();
    let data = generate_synthetic(200, 2, 2.0, 31).expect("valid generator inputs");
    let topology = Topology::new(2, 5).expect("positive sizes");
    let base = TrainerConfig {
        inner: PsoConfig::with_box(20, 300, -2.0, 2.0),
        ..TrainerConfig::default()
    };
    let seeds: Vec<u64> = (0..20).collect();
    let runs: Vec<[Vec<f64>; 3]> = seeds
        .par_iter()
        .map(|&seed| {
            Algorithm::ALL.map(|a| {
                train_weights(topology, &data, &base.clone().with_algorithm(a), seed)
                    .expect("training succeeds")
                    .trace
            })
        })
        .collect();
    let median = |i: usize| {
        let mut finals: Vec<f64> = runs
            .iter()
            .map(|r| *r[i].last().expect("non-empty"))
            .collect();
        finals.sort_by(f64::total_cmp);
        (finals[9] + finals[10]) / 2.0
    };
    let (plain, improved) = (median(0), median(2));
    let half = 150;
    let stagnant = runs.iter().filter(|r| r[0][half - 1] <= r[0][299]).count();
    let rounding_only = runs
        .iter()
        .filter(|r| r[0][half - 1] - r[0][299] <= 1e-12)
        .count();
    let escapes = runs
        .iter()
        .filter(|r| {
            let s = last_improvement(&r[0]);
            [&r[1], &r[2]].iter().any(|t| last_improvement(t) > s)
        })
        .count();
    let elapsed = start.elapsed();
    Outcome::new(
        improved <= plain && stagnant >= 5 && escapes >= 5 && elapsed < Duration::from_secs(120),
        format!(
            "median final MSE improved {improved:.5} vs plain {plain:.5} (SA {:.5}); plain stagnant in {stagnant}/20 ({rounding_only}/20 gain at most 1e-12 in the second half); SA improves later in {escapes}/20; {elapsed:.1?}",
            median(1)
        ),
    )
}

fn nearest_centroid_accuracy(data: &Dataset, k: usize, seed: u64) -> f64 {
    let plan = make_folds(data.n_rows(), k, seed).expect("valid folds");
    let mut total = 0.0;
    for fold in 0..k {
        let (train, test) = split(data, &plan, fold).expect("valid split");
        let d = train.n_features();
        let mut centroids = [vec![0.0; d], vec![0.0; d]];
        let mut counts = [0.0; 2];
        for (x, &y) in train.rows().zip(train.labels()) {
            counts[y as usize] += 1.0;
            for (c, v) in centroids[y as usize].iter_mut().zip(x) {
                *c += v;
            }
        }
        for (c, n) in centroids.iter_mut().zip(counts) {
            c.iter_mut().for_each(|v| *v /= n);
        }
        let dist =
            |x: &[f64], c: &[f64]| -> f64 { x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum() };
        let correct = test
            .rows()
            .zip(test.labels())
            .filter(|(x, &y)| {
                let guess = u8::from(dist(x, &centroids[1]) < dist(x, &centroids[0]));
                guess == y
            })
            .count();
        total += correct as f64 / test.n_rows() as f64;
    }
    total / k as f64
}

fn desk_experiment(dir: &Path) -> Outcome {
    let start = Instant::now();
    let data_seed = 17;
    let experiment_seed = 23;
    let data = generate_synthetic(200, 2, 4.0, data_seed).expect("valid generator inputs");
    let oracle = nearest_centroid_accuracy(&data, 4, experiment_seed);
    if oracle <= 0.90 {
        return Outcome::new(
            false,
            format!("nearest-centroid oracle only reached {oracle:.3}"),
        );
    }

    let mut config = ExperimentConfig::new(DataSource::Synthetic {
        rows: 400,
        n_features: 2,
        separation: 4.0,
        seed: data_seed,
    });
    config.k_folds = 4;
    config.seed = experiment_seed;
    config.trainer = TrainerConfig::default().with_hidden_bounds(3, 8);
    config.trainer.outer.swarm_size = 5;
    config.trainer.outer.max_iterations = 3;
    config.trainer.inner = PsoConfig::with_box(20, 200, -2.0, 2.0);

    let run_into = |sub: &str| {
        let mut c = config.clone();
        c.output_dir = dir.join(sub);
        run_experiment(&c).map(|o| (o, c.output_dir))
    };
    let (first, first_dir) = match run_into("first") {
        Ok(v) => v,
        Err(e) => return Outcome::new(false, format!("experiment failed: {e}")),
    };
    let accuracy = first
        .results
        .iter()
        .find(|r| r.algorithm == Algorithm::PsoImprovedPsoSa)
        .map(|r| r.cross_validation.overall.accuracy)
        .unwrap_or(0.0);

    let mut monotone = true;
    for a in Algorithm::ALL {
        let rows =
            read_trace(first_dir.join(format!("trace_{}.csv", a.key()))).expect("trace parses");
        for fold in 0..4 {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| r.fold == fold)
                .map(|r| r.best_mse)
                .collect();
            monotone &= !values.is_empty() && values.windows(2).all(|w| w[1] <= w[0]);
        }
    }

    let (_, second_dir) = match run_into("second") {
        Ok(v) => v,
        Err(e) => return Outcome::new(false, format!("rerun failed: {e}")),
    };
    let mut identical = true;
    for f in &first.files {
        let name = f.file_name().expect("file name");
        identical &= std::fs::read(f).ok() == std::fs::read(second_dir.join(name)).ok();
    }
    let elapsed = start.elapsed();
    Outcome::new(
        accuracy > 0.90 && monotone && identical && elapsed < Duration::from_secs(300),
        format!(
            "overall accuracy {accuracy:.4} (nearest-centroid oracle {oracle:.4}); traces monotone: {monotone}; rerun identical: {identical}; {elapsed:.1?}"
        ),
    )
}

fn property<S: Strategy>(
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(ProptestConfig {
        cases: 1000,
        failure_persistence: None,
        ..ProptestConfig::default()
    });
    runner
        .run(&strategy, test)
        .map_err(|e| format!("{name}: {e}"))
}

fn fold_partition() -> Result<(), String> {
    property(
        "fold partition",
        (2usize..300, 2usize..12, any::<u64>()).prop_filter("k <= n", |(n, k, _)| k <= n),
        |(n, k, seed)| {
            let plan = make_folds(n, k, seed).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let mut seen = vec![0u32; n];
            for fold in 0..k {
                for i in plan.fold_indices(fold) {
                    seen[i] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            let sizes = plan.fold_sizes();
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            prop_assert!(hi - lo <= 1);
            Ok(())
        },
    )
}

fn clamp_bounds() -> Result<(), String> {
    let operands = (1usize..8, -5.0f64..0.0, 0.1f64..5.0, any::<u64>());
    property("clamp bounds", operands, |(d, low, width, seed)| {
        let high = low + width;
        let config = PsoConfig::with_box(4, 1, low, high);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vec =
            |lo: f64, hi: f64| -> Vec<f64> { (0..d).map(|_| rng.random_range(lo..hi)).collect() };
        let mut p = Particle::new(vec(low, high), vec(-10.0, 10.0), 0.0);
        p.pbest_position = vec(low - 3.0, high + 3.0);
        let gbest = vec(low - 3.0, high + 3.0);
        let (r1, r2) = (vec(0.0, 1.0), vec(0.0, 1.0));
        let v = update_velocity(&p, &gbest, 0.8, &config, &r1, &r2).unwrap();
        prop_assert!(v.iter().all(|x| x.abs() <= config.v_max));
        let big = vec(-100.0, 100.0);
        let x = update_position(&p.position, &big, &config).unwrap();
        prop_assert!(x.iter().all(|&x| (low..=high).contains(&x)));
        Ok(())
    })
}

fn monotone_traces() -> Result<(), String> {
    let operands = (
        1usize..5,
        2usize..8,
        1usize..15,
        any::<u64>(),
        prop::collection::vec(-3.0f64..3.0, 4),
    );
    property(
        "monotone best-so-far traces",
        operands,
        |(d, swarm, iters, seed, centre)| {
            let config = PsoConfig::with_box(swarm, iters, -2.0, 2.0).with_seed(seed);
            let f = move |x: &[f64]| -> f64 {
                x.iter().zip(&centre).map(|(a, c)| (a - c).powi(2)).sum()
            };
            let out = pso::run(&config, d, &f).unwrap();
            prop_assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
            prop_assert_eq!(*out.trace.last().unwrap(), out.gbest_fitness);
            Ok(())
        },
    )
}

fn metric_identities() -> Result<(), String> {
    let counts = (0u64..500, 0u64..500, 0u64..500, 0u64..500)
        .prop_filter("non-empty", |c| c.0 + c.1 + c.2 + c.3 > 0);
    property("metric identities", counts, |(tp, tn, fp, fn_)| {
        let cm = ConfusionMatrix { tp, tn, fp, fn_ };
        let r = compute_metrics(&cm).unwrap();
        let s = compute_metrics(&cm.swapped()).unwrap();
        let total = (tp + tn + fp + fn_) as f64;
        prop_assert!((r.accuracy - (tp + tn) as f64 / total).abs() < 1e-12);
        prop_assert_eq!(r.accuracy, s.accuracy);
        prop_assert_eq!(r.recall, s.specificity);
        prop_assert_eq!(r.specificity, s.recall);
        prop_assert_eq!(r.precision_bankrupt(), s.precision);
        for v in [
            r.accuracy,
            r.precision,
            r.recall,
            r.specificity,
            r.f_measure,
        ] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        if !r.degenerate.f_measure {
            prop_assert!(r.f_measure >= r.precision.min(r.recall) - 1e-12);
            prop_assert!(r.f_measure <= r.precision.max(r.recall) + 1e-12);
        }
        Ok(())
    })
}

fn normalization_round_trip() -> Result<(), String> {
    let rows = (1usize..5)
        .prop_flat_map(|d| prop::collection::vec(prop::collection::vec(-1e6f64..1e6, d), 1..40));
    property("normalization round trip", rows, |rows| {
        let d = rows[0].len();
        let names = (0..d).map(|i| format!("c{i}")).collect();
        let labels = vec![0; rows.len()];
        let raw = Dataset::from_rows(names, &rows, labels).unwrap();
        let scaled = raw.fit_scaler().apply(&raw).unwrap();
        for (i, row) in rows.iter().enumerate() {
            prop_assert!(scaled.row(i).iter().all(|v| (0.0..=1.0).contains(v)));
            for (a, b) in scaled.denormalized_row(i).iter().zip(row) {
                let range = scaled
                    .normalization()
                    .iter()
                    .map(|r| r.span())
                    .fold(0.0, f64::max);
                prop_assert!(
                    (a - b).abs() <= 1e-9 * (1.0 + range + b.abs()),
                    "{} vs {}",
                    a,
                    b
                );
            }
        }
        Ok(())
    })
}

fn imputation_idempotence() -> Result<(), String> {
    let cells = (1usize..5).prop_flat_map(|d| {
        prop::collection::vec(
            prop::collection::vec(prop::option::weighted(0.7, -100.0f64..100.0), d),
            2..30,
        )
    });
    property("imputation idempotence", cells, |rows| {
        let d = rows[0].len();
        let observed = (0..d).all(|c| rows.iter().any(|r| r[c].is_some()));
        let names = (0..d).map(|i| format!("c{i}")).collect();
        let labels = vec![1; rows.len()];
        let table = RawTable::new(names, rows, labels).unwrap();
        match impute_mean(&table) {
            Ok(once) => {
                prop_assert!(observed);
                prop_assert!(!once.has_missing());
                prop_assert_eq!(impute_mean(&once).unwrap(), once);
            }
            Err(_) => prop_assert!(!observed),
        }
        Ok(())
    })
}

fn invariant_suites() -> Outcome {
    let suites = [
        fold_partition(),
        clamp_bounds(),
        monotone_traces(),
        metric_identities(),
        normalization_round_trip(),
        imputation_idempotence(),
    ];
    let failures: Vec<String> = suites.into_iter().filter_map(Result::err).collect();
    Outcome::new(
        failures.is_empty(),
        if failures.is_empty() {
            "6 invariant suites, 1000 cases each".to_string()
        } else {
            failures.join("; ")
        },
    )
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let scratch = tempfile::tempdir().expect("temporary directory");
    let criteria: Vec<Criterion> = vec![
        (
            "F-measure formula reproduction",
            Box::new(f_measure_formula_reproduction),
        ),
        (
            "default parameters and inertia schedule",
            Box::new(default_parameters),
        ),
        ("sphere optimization", Box::new(sphere_optimization)),
        (
            "annealing acceptance frequency",
            Box::new(annealing_acceptance_frequency),
        ),
        (
            "zero-repulsion velocity equivalence",
            Box::new(zero_repulsion_equivalence),
        ),
        ("local-minima escape", Box::new(local_minima_escape)),
        (
            "desk-scale cross-validated experiment",
            Box::new(|| desk_experiment(scratch.path())),
        ),
        ("invariant property suites", Box::new(invariant_suites)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = check();
        let status = if outcome.pass { "PASS" } else { "FAIL" };
        if !outcome.pass {
            failed += 1;
        }
        println!("criterion {} [{status}] {name}: {}", i + 1, outcome.detail);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
