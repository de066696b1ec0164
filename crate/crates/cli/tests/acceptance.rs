//! Acceptance suite. Runs every acceptance criterion at its stated
//! tolerance, prints one PASS/FAIL line per criterion, and exits non-zero
//! if any criterion fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use gridres_cli::commands::build_bundle;
use gridres_cli::golden::check_reference_shapley;
use gridres_cli::report::{CvarRow, ScoreRow};
use gridres_cli::RunConfig;
use gridres_core::engine::{run_scenario, RunSettings};
use gridres_core::grid::{Bus, Line, LineMask, Source, SourceKind};
use gridres_core::mcdm::{choquet_aligned, shapley, solve_lambda, FuzzyDensities, LambdaMeasure};
use gridres_core::risk::{cvar_alpha, Orientation, ParamDistribution};
use gridres_core::{load_network, FragilityCurve, Mode, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn demo_config() -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/demo.json");
    RunConfig::load(path).expect("bundled demo config loads")
}

fn random_densities(rng: &mut ChaCha8Rng) -> FuzzyDensities {
    let values: Vec<f64> = (0..5).map(|_| rng.random_range(0.05..=0.95)).collect();
    FuzzyDensities::new(["c0", "c1", "c2", "c3", "c4"].into_iter().zip(values)).unwrap()
}

fn reference_shapley() -> Outcome {
    let start = Instant::now();
    let checks = check_reference_shapley().expect("bundled cases solve");
    let elapsed = start.elapsed();
    let worst = checks.iter().map(|c| c.max_abs_error).fold(0.0, f64::max);
    let bad: usize = checks.iter().map(|c| c.mismatches).sum();
    outcome(
        bad == 0 && elapsed < Duration::from_secs(1),
        format!("max |error| {worst:.2e} (tol 5e-5), {bad} entries out, {elapsed:.2?}"),
    )
}

fn shapley_efficiency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut negative = 0;
    for _ in 0..1000 {
        let m = LambdaMeasure::from_densities(random_densities(&mut rng)).unwrap();
        let eta = shapley(&m).unwrap().values();
        worst = worst.max((eta.iter().sum::<f64>() - 1.0).abs());
        negative += eta.iter().filter(|&&e| e < 0.0).count();
    }
    outcome(worst <= 1e-9 && negative == 0, format!("max |sum - 1| {worst:.2e}, {negative} negative indices"))
}

fn lambda_residual() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut violations = 0;
    for _ in 0..1000 {
        let d = random_densities(&mut rng);
        let lambda = solve_lambda(&d).unwrap();
        let mu = d.values();
        let residual = (mu.iter().map(|m| 1.0 + lambda * m).product::<f64>() - (1.0 + lambda)).abs();
        worst = worst.max(residual);
        let expected_sign = (1.0 - mu.iter().sum::<f64>()).signum();
        if lambda <= -1.0 || lambda.signum() != expected_sign {
            violations += 1;
        }
    }
    outcome(worst <= 1e-10 && violations == 0, format!("max residual {worst:.2e}, {violations} range/sign violations"))
}

/// Integrates the quantile function of the sorted atoms over `[0, 1 - alpha]`.
fn oracle_cvar(points: &[(f64, f64)], alpha: f64) -> f64 {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let tail = 1.0 - alpha;
    let mut lo = 0.0;
    let mut acc = 0.0;
    for (v, p) in sorted {
        let hi = lo + p;
        let overlap = (hi.min(tail) - lo).max(0.0);
        acc += v * overlap;
        lo = hi;
        if lo >= tail {
            break;
        }
    }
    acc / tail
}

fn cvar_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=50);
        let raw: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let v = if rng.random_bool(0.2) { 0.5 } else { rng.random::<f64>() };
                (v, rng.random_range(0.01..1.0))
            })
            .collect();
        let total: f64 = raw.iter().map(|r| r.1).sum();
        let points: Vec<(f64, f64)> = raw.into_iter().map(|(v, w)| (v, w / total)).collect();
        let dist = ParamDistribution::new(points.clone(), Orientation::HigherIsBetter).unwrap();
        for alpha in [0.8, 0.9, 0.95, 0.99] {
            let got = cvar_alpha(&dist, alpha).unwrap();
            worst = worst.max((got - oracle_cvar(&points, alpha)).abs());
        }
    }
    outcome(worst <= 1e-12, format!("max |difference| {worst:.2e} over 4000 evaluations"))
}

fn choquet_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tol = 1e-12;
    let mut failures = [0usize; 4];
    for _ in 0..1000 {
        let m = LambdaMeasure::from_densities(random_densities(&mut rng)).unwrap();
        let f: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();

        let c = rng.random::<f64>();
        if (choquet_aligned(&[c; 5], &m) - c).abs() > tol {
            failures[0] += 1;
        }

        let v = choquet_aligned(&f, &m);
        let lo = f.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if v < lo - tol || v > hi + tol {
            failures[1] += 1;
        }

        let g: Vec<f64> = f.iter().map(|x| x + rng.random::<f64>() * 0.5).collect();
        if choquet_aligned(&g, &m) < v - tol {
            failures[2] += 1;
        }

        let raw: Vec<f64> = (0..5).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let additive = LambdaMeasure::additive(FuzzyDensities::new(["c0", "c1", "c2", "c3", "c4"].into_iter().zip(w.clone())).unwrap());
        let weighted: f64 = w.iter().zip(&f).map(|(a, b)| a * b).sum();
        if (choquet_aligned(&f, &additive) - weighted).abs() > tol {
            failures[3] += 1;
        }
    }
    outcome(
        failures.iter().all(|&n| n == 0),
        format!(
            "violations: idempotency {}, internality {}, monotonicity {}, additive {}",
            failures[0], failures[1], failures[2], failures[3]
        ),
    )
}

/// Counts simple paths by dynamic programming over visited-vertex sets,
/// with edge multiplicities.
fn oracle_paths(n: usize, multiplicity: &[Vec<u64>], sources: &[usize], targets: &[usize]) -> u64 {
    let mut sources = sources.to_vec();
    sources.sort_unstable();
    sources.dedup();
    let mut is_target = vec![false; n];
    for &t in targets {
        is_target[t] = true;
    }
    let mut total = 0;
    for &s in &sources {
        let mut dp = vec![vec![0u64; n]; 1 << n];
        dp[1 << s][s] = 1;
        for mask in 0..(1usize << n) {
            for v in 0..n {
                let ways = dp[mask][v];
                if ways == 0 {
                    continue;
                }
                if is_target[v] {
                    total += ways;
                }
                for w in 0..n {
                    if mask & (1 << w) == 0 && multiplicity[v][w] > 0 {
                        dp[mask | (1 << w)][w] += ways * multiplicity[v][w];
                    }
                }
            }
        }
    }
    total
}

fn simple_path_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let curve = FragilityCurve::new(0.01, 30.0, 60.0, 1.0).unwrap();
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = rng.random_range(2..=10);
        let density = rng.random_range(0.2..0.7);
        let buses: Vec<Bus> = (0..n)
            .map(|i| Bus { id: format!("b{i}"), load_kw: 0.0, is_critical: false, weight: 1.0 })
            .collect();
        let mut lines = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if !rng.random_bool(density) {
                    continue;
                }
                let copies = if rng.random_bool(0.1) { 2 } else { 1 };
                for _ in 0..copies {
                    lines.push(Line {
                        id: format!("l{}", lines.len()),
                        from_bus: format!("b{a}"),
                        to_bus: format!("b{b}"),
                        is_tie: rng.random_bool(0.2),
                        is_switchable: false,
                        fragility: curve,
                    });
                }
            }
        }
        let sources = vec![Source { bus: "b0".into(), kind: SourceKind::Substation, capacity_kw: 1.0, smart_only: false }];
        let net = Network::new(buses, lines, sources, Mode::Smart).unwrap();
        let failed = LineMask::from_bools((0..net.lines().len()).map(|_| rng.random_bool(0.15)).collect());

        let mut multiplicity = vec![vec![0u64; n]; n];
        for l in 0..net.lines().len() {
            if !failed.contains(l) {
                let (a, b) = net.line_ends(l);
                multiplicity[a][b] += 1;
                multiplicity[b][a] += 1;
            }
        }
        let starts: Vec<usize> = (0..rng.random_range(1..=3)).map(|_| rng.random_range(0..n)).collect();
        let targets: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
        let got = net.count_simple_paths(&failed, &starts, &targets, u64::MAX);
        if got.count != oracle_paths(n, &multiplicity, &starts, &targets) {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches on 200 graphs"))
}

fn score(rows: &[ScoreRow], mode: Mode, case: &str) -> f64 {
    rows.iter().find(|r| r.mode == mode && r.case == case).expect("score row").score
}

fn cvar(rows: &[CvarRow], mode: Mode, param: &str) -> f64 {
    let row = rows.iter().find(|r| r.mode == mode).expect("cvar row");
    row.values.iter().find(|(n, _)| n == param).expect("cvar column").1
}

fn end_to_end_ordering(rows: &[ScoreRow], elapsed: Duration) -> Outcome {
    let cases: Vec<&str> = rows.iter().filter(|r| r.mode == Mode::Smart).map(|r| r.case.as_str()).collect();
    let smart_wins = cases.iter().all(|c| score(rows, Mode::Smart, c) > score(rows, Mode::Base, c));
    let best = cases
        .iter()
        .copied()
        .max_by(|a, b| score(rows, Mode::Smart, a).total_cmp(&score(rows, Mode::Smart, b)))
        .unwrap_or("");
    let scores: Vec<String> = cases
        .iter()
        .map(|c| format!("{c} {:.4}/{:.4}", score(rows, Mode::Base, c), score(rows, Mode::Smart, c)))
        .collect();
    outcome(
        smart_wins && best == "Case IV" && elapsed < Duration::from_secs(300),
        format!("smart > base in every case: {smart_wins}; best smart case {best}; {elapsed:.2?}; base/smart {}", scores.join(", ")),
    )
}

fn convergence(cfg: &RunConfig) -> Outcome {
    let net = load_network(&cfg.network_path).unwrap();
    let mid = cfg.scenario_set.len() / 2;
    let means: Vec<f64> = (0..10u64)
        .map(|k| {
            let settings = RunSettings {
                n_trials: 1000,
                master_seed: 1000 + k,
                keep_raw: false,
                trial: cfg.trial_settings(),
            };
            run_scenario(&net, &cfg.scenario_set, mid, &cfg.timeline, &settings)
                .unwrap()
                .mean_params
                .availability
        })
        .collect();
    let mean = means.iter().sum::<f64>() / 10.0;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / 9.0;
    let rsd = var.sqrt() / mean;
    let speed = cfg.scenario_set.scenarios()[mid].speed;
    outcome(rsd <= 0.02, format!("relative std {:.3}% at {speed} m/s (limit 2%)", rsd * 100.0))
}

fn determinism(cfg: &RunConfig) -> Outcome {
    let run = |threads: usize, dir: &Path| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let bundle = pool.install(|| build_bundle(cfg)).unwrap();
        bundle.write_to(dir).unwrap();
        bundle.files().into_iter().map(|(name, _)| dir.join(name)).collect::<Vec<PathBuf>>()
    };
    let max = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(4).max(2);
    let tmp = tempfile::tempdir().unwrap();
    let one = run(1, &tmp.path().join("one"));
    let many = run(max, &tmp.path().join("many"));
    let differing: Vec<String> = one
        .iter()
        .zip(&many)
        .filter(|(a, b)| std::fs::read(a).unwrap() != std::fs::read(b).unwrap())
        .map(|(a, _)| a.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    outcome(
        differing.is_empty() && one.len() == many.len(),
        format!("{} files compared, 1 vs {max} threads, differing: {differing:?}", one.len()),
    )
}

fn tail_ordering(rows: &[CvarRow]) -> Outcome {
    let (ab, as_) = (cvar(rows, Mode::Base, "availability"), cvar(rows, Mode::Smart, "availability"));
    let (rb, rs) = (cvar(rows, Mode::Base, "resourcefulness"), cvar(rows, Mode::Smart, "resourcefulness"));
    outcome(
        as_ >= ab && rs >= rb,
        format!("availability base {ab:.5} smart {as_:.5}; resourcefulness base {rb:.5} smart {rs:.5}"),
    )
}

fn main() {
    let cfg = demo_config();
    let start = Instant::now();
    let bundle = build_bundle(&cfg).expect("bundled demo run succeeds");
    let full_elapsed = start.elapsed();

    let results: Vec<(&str, Outcome)> = vec![
        ("reference Shapley indices", reference_shapley()),
        ("Shapley efficiency", shapley_efficiency()),
        ("lambda solver residual", lambda_residual()),
        ("CVaR oracle equivalence", cvar_oracle()),
        ("Choquet properties", choquet_properties()),
        ("simple-path oracle", simple_path_oracle()),
        ("end-to-end score ordering", end_to_end_ordering(&bundle.score_table, full_elapsed)),
        ("Monte-Carlo convergence", convergence(&cfg)),
        ("thread-count determinism", determinism(&cfg)),
        ("per-parameter tail ordering", tail_ordering(&bundle.cvar_table)),
    ];

    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("acceptance {:>2} {status} {name}: {}", i + 1, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
