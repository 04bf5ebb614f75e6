//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use common::{brute_force_currency, random_state, sv};
use lipdream::cli::{cmd_run, RunConfig, Scenario};
use lipdream::data_io::{synth_market, synth_ohlcv, write_ohlcv, write_report, OhlcvSynthParams, ReportFormat, SynthParams};
use lipdream::dreams::{build_augmented_set, dream_count, generate_dreams, DreamConfig, LabeledState};
use lipdream::lipschitz::{lower_bound_gap, propext_bound, DEFAULT_ACTION_RADIUS};
use lipdream::metric::eps_distance;
use lipdream::reward::sample_action_set;
use lipdream::scenarios::{run_allocation_backtest, run_currency_backtest, AllocationConfig, CurrencyConfig};
use lipdream::{
    ActionKind, ActionVector, Error, ExtensionKind, ExtensionModel, MetricConfig, RewardSample,
    SampledRewardFunction, StateVector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, took: Duration) -> Result<(), String> {
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))
}

fn golden_example() -> Outcome {
    let start = Instant::now();
    let cfg = MetricConfig::new(0.5).map_err(|e| e.to_string())?;
    let f = SampledRewardFunction::new(
        vec![RewardSample::new(sv(&[1.0, 0.0]), 50.0), RewardSample::new(sv(&[2.0, 0.0]), 0.0)],
        cfg,
    )
    .map_err(|e| e.to_string())?;
    let k = f.lipschitz_constant();
    let d12 = eps_distance(&[1.0, 0.0], &[2.0, 0.0], &cfg).unwrap();
    let dx1 = eps_distance(&[-1.0, 0.0], &[1.0, 0.0], &cfg).unwrap();
    let dx2 = eps_distance(&[-1.0, 0.0], &[2.0, 0.0], &cfg).unwrap();
    let rm = ExtensionModel::mcshane(f).unwrap().evaluate(&sv(&[-1.0, 0.0])).unwrap();
    let took = start.elapsed();
    for (name, got, want) in [("K", k, 100.0), ("d12", d12, 0.5), ("dx1", dx1, 2.0), ("dx2", dx2, 2.5), ("R^M", rm, -150.0)] {
        ensure((got - want).abs() <= 1e-9, || format!("{name} = {got}, expected {want}"))?;
    }
    within(Duration::from_millis(1), took)?;
    Ok(format!("K=100, distances 0.5/2/2.5, R^M((-1,0))={rm}, {took:?}"))
}

fn metric_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_triangle = f64::NEG_INFINITY;
    for i in 0..10_000 {
        let dim = rng.random_range(2..=8);
        let eps = [0.0, 0.1, 0.5, 1.0, 2.0][i % 5];
        let cfg = MetricConfig::new(eps).unwrap();
        let (a, b, c) = (
            random_state(&mut rng, dim, 10.0),
            random_state(&mut rng, dim, 10.0),
            random_state(&mut rng, dim, 10.0),
        );
        let d = |x: &StateVector, y: &StateVector| x.eps_distance(y, &cfg).unwrap();
        ensure(d(&a, &b) == d(&b, &a), || format!("asymmetric at triple {i}"))?;
        let slack = d(&a, &c) - d(&a, &b) - d(&b, &c);
        worst_triangle = worst_triangle.max(slack);
        ensure(slack <= 1e-9, || format!("triangle violated by {slack} at triple {i}"))?;
        let t = a.angular_distance(&b).unwrap();
        ensure((0.0..=1.0).contains(&t), || format!("angle {t} out of range"))?;
        let (l, m) = (rng.random_range(1e-3..1e3), rng.random_range(1e-3..1e3));
        let ts = a.scaled(l).unwrap().angular_distance(&b.scaled(m).unwrap()).unwrap();
        ensure((ts - t).abs() <= 1e-9, || format!("angle not scale invariant at triple {i}: {t} vs {ts}"))?;
        let alpha = rng.random_range(f64::MIN_POSITIVE..=1e-6);
        let mut v = vec![0.0; dim];
        v[0] = alpha;
        let nv: Vec<f64> = v.iter().map(|x| -x).collect();
        let dv = eps_distance(&v, &nv, &cfg).unwrap();
        ensure(dv >= 1.0, || format!("d(b,-b) = {dv} < 1 for alpha {alpha}"))?;
    }
    let took = start.elapsed();
    within(Duration::from_secs(5), took)?;
    Ok(format!("10000 triples, worst triangle slack {worst_triangle:.3e}, {took:?}"))
}

fn extension_suite() -> Outcome {
    let start = Instant::now();
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut worst_lip = f64::NEG_INFINITY;
    for set in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + set);
        let dim = rng.random_range(1..=6);
        let n = rng.random_range(1..=50);
        let cfg = MetricConfig::new(rng.random_range(0.01..1.0)).unwrap();
        let points: Vec<StateVector> = (0..n).map(|_| random_state(&mut rng, dim, 5.0)).collect();
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let probes: Vec<StateVector> = (0..100).map(|_| random_state(&mut rng, dim, 5.0)).collect();
        let f = SampledRewardFunction::new(
            points.iter().zip(&values).map(|(p, &v)| RewardSample::new(p.clone(), v)),
            cfg,
        )
        .map_err(|e| e.to_string())?;
        let k = f.lipschitz_constant();
        let pair_d: Vec<Vec<f64>> = probes
            .iter()
            .map(|x| probes.iter().map(|y| x.eps_distance(y, &cfg).unwrap()).collect())
            .collect();
        let mut by_kind = Vec::new();
        for &l in &grid {
            let m = ExtensionModel::new(f.clone(), ExtensionKind::Blend(l)).unwrap();
            for (p, &v) in points.iter().zip(&values) {
                let e = m.evaluate(p).unwrap();
                ensure((e - v).abs() <= 1e-9, || format!("set {set}, blend {l}: {e} != sample {v}"))?;
            }
            let vals = m.evaluate_batch(&probes).unwrap();
            for i in 0..vals.len() {
                for j in 0..i {
                    let excess = (vals[i] - vals[j]).abs() - k * pair_d[i][j];
                    worst_lip = worst_lip.max(excess);
                    ensure(excess <= 1e-7, || format!("set {set}, blend {l}: Lipschitz excess {excess}"))?;
                }
            }
            by_kind.push(vals);
        }
        let m = ExtensionModel::mcshane(f).unwrap();
        for (i, x) in probes.iter().enumerate() {
            let (lo, hi) = m.envelopes(x).unwrap();
            for (vals, l) in by_kind.iter().zip(grid) {
                let b = vals[i];
                ensure(lo <= b + 1e-9 && b <= hi + 1e-9, || {
                    format!("set {set}, probe {i}: blend {l} = {b} outside [{lo}, {hi}]")
                })?;
            }
        }
    }
    let took = start.elapsed();
    within(Duration::from_secs(30), took)?;
    Ok(format!("200 sets x 100 probes, worst Lipschitz excess {worst_lip:.3e}, {took:?}"))
}

fn bound_diagnostics() -> Outcome {
    let start = Instant::now();
    let mut dominated = 0;
    let mut checks = 0;
    for inst in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + inst);
        let dim = rng.random_range(2..=6);
        let n = rng.random_range(2..=30);
        let points: Vec<StateVector> = (0..n).map(|_| random_state(&mut rng, dim, 1.0)).collect();
        let bets = sample_action_set(n, ActionKind::L1Simplex100, dim, 7000 + inst).unwrap();
        let f = SampledRewardFunction::new(
            points.iter().zip(&bets).map(|(p, a)| RewardSample::new(p.clone(), p.dot(a.coords()).unwrap())),
            MetricConfig::default(),
        )
        .map_err(|e| e.to_string())?;
        let m = ExtensionModel::mcshane(f.clone()).unwrap();
        // Candidate actions for the lower bound: random bets and the vertices.
        let mut candidates: Vec<ActionVector> = sample_action_set(10, ActionKind::L1Simplex100, dim, 9000 + inst)
            .unwrap()
            .actions()
            .to_vec();
        for i in 0..dim {
            let mut c = vec![0.0; dim];
            c[i] = 100.0;
            candidates.push(ActionVector::new(c, ActionKind::L1Simplex100).unwrap());
        }
        for _ in 0..10 {
            let x = random_state(&mut rng, dim, 1.0);
            let rm = m.evaluate(&x).unwrap();
            let pb = propext_bound(&f, &x, DEFAULT_ACTION_RADIUS).unwrap();
            let a0 = bets.get(pb.index).unwrap();
            let gap = (rm - x.dot(a0.coords()).unwrap()).abs();
            checks += 1;
            ensure(gap <= pb.bound + 1e-7, || format!("instance {inst}: gap {gap} above bound {}", pb.bound))?;
            for a in &candidates {
                match lower_bound_gap(&f, &x, a.coords()) {
                    Ok(lower) => {
                        dominated += 1;
                        let actual = (x.dot(a.coords()).unwrap() - rm).abs();
                        ensure(actual + 1e-12 >= lower, || {
                            format!("instance {inst}: gap {actual} below lower bound {lower}")
                        })?;
                    }
                    Err(Error::Precondition(_)) => {}
                    Err(e) => return Err(e.to_string()),
                }
            }
        }
    }
    let took = start.elapsed();
    within(Duration::from_secs(10), took)?;
    ensure(dominated > 0, || "no instance met the dominance condition".into())?;
    Ok(format!("{checks} representation checks, {dominated} dominated lower-bound checks, {took:?}"))
}

fn dream_suite() -> Outcome {
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = rng.random_range(2..=6);
        let n = rng.random_range(2..=40);
        let real: Vec<StateVector> = (0..n).map(|_| random_state(&mut rng, dim, 3.0)).collect();
        let cfg = DreamConfig {
            noise_scale: 0.0,
            seed,
            ..DreamConfig::default()
        };
        for d in generate_dreams(&real, 25, &cfg).map_err(|e| e.to_string())? {
            let (a, b) = (real[d.parents.0].coords(), real[d.parents.1].coords());
            for k in 0..dim {
                let err = (d.state.coords()[k] - (d.t * a[k] + (1.0 - d.t) * b[k])).abs();
                ensure(err <= 1e-9, || format!("seed {seed}: dream off its segment by {err}"))?;
            }
        }

        let bets = sample_action_set(n, ActionKind::L1Simplex100, dim, seed).unwrap();
        let labeled: Vec<LabeledState> = real
            .iter()
            .zip(&bets)
            .map(|(s, a)| LabeledState {
                state: s.clone(),
                reward: s.dot(a.coords()).unwrap(),
                action: a.clone(),
            })
            .collect();
        let f = SampledRewardFunction::new(
            labeled.iter().map(|e| RewardSample::new(e.state.clone(), e.reward)),
            MetricConfig::default(),
        )
        .unwrap();
        let k = f.lipschitz_constant();
        let ext = ExtensionModel::mcshane(f).unwrap();
        for beta in [0.0, 0.25, 0.5, 0.75] {
            let cfg = DreamConfig {
                beta,
                seed,
                ..DreamConfig::default()
            };
            let set = build_augmented_set(&labeled, &cfg, &ext, &bets).map_err(|e| e.to_string())?;
            let want = (n as f64 * beta / (1.0 - beta)).round() as usize;
            ensure(set.dreams.len() == want && dream_count(n, beta).unwrap() == want, || {
                format!("seed {seed}, beta {beta}: {} dreams, expected {want}", set.dreams.len())
            })?;
            ensure((set.dream_fraction() - beta).abs() <= 1.0 / set.len() as f64, || {
                format!("seed {seed}: dream share {} for beta {beta}", set.dream_fraction())
            })?;
            for d in &set.dreams {
                for e in &labeled {
                    let lim = k * d.state.eps_distance(&e.state, &MetricConfig::default()).unwrap() + 1e-7;
                    ensure((d.reward - e.reward).abs() <= lim, || format!("seed {seed}: dream reward breaks K"))?;
                }
            }
        }
    }
    Ok("50 seeds: segments within 1e-9, exact dream counts, rewards K-consistent".into())
}

fn currency_oracle() -> Outcome {
    // Two leading bars feed the first state and the first training day.
    let bars = synth_ohlcv(&OhlcvSynthParams {
        n_days: 32,
        seed: 6,
        ..OhlcvSynthParams::default()
    })
    .unwrap();
    let actions = sample_action_set(3, ActionKind::L2SphereSigned, 3, 6).unwrap();
    let report = run_currency_backtest(&bars, &actions, &CurrencyConfig::default()).map_err(|e| e.to_string())?;
    let oracle = brute_force_currency(&bars, &actions, 0.1);
    ensure(report.steps.len() == 30 && oracle.len() == 30, || {
        format!("{} steps, oracle has {}, expected 30", report.steps.len(), oracle.len())
    })?;
    for (s, o) in report.steps.iter().zip(&oracle) {
        let want = actions.get(o.action).unwrap().coords();
        ensure(s.step == o.day && s.action == want && s.predicted == o.predicted && s.realized == o.realized, || {
            format!(
                "day {}: action {:?} / predicted {} vs oracle action {:?} / {}",
                s.step, s.action, s.predicted, want, o.predicted
            )
        })?;
    }
    Ok(format!("{} steps identical to the nested-loop oracle", oracle.len()))
}

fn dream_comparability() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut close = 0;
    let mut lines = Vec::new();
    for seed in 0..20u64 {
        let prices = synth_market(&SynthParams {
            n_steps: 800,
            n_products: 4,
            drift: -4.0,
            volatility: 20.0,
            seed,
        })
        .unwrap();
        let cfg = AllocationConfig {
            seed,
            ..AllocationConfig::default()
        };
        let out = run_allocation_backtest(&prices, &cfg).map_err(|e| format!("seed {seed}: {e}"))?;
        for (r, tag) in [(&out.real_only, "real"), (&out.with_dreams, "dreams")] {
            let path = dir.path().join(format!("alloc-{seed}.{tag}.json"));
            write_report(r, &path, ReportFormat::Json).map_err(|e| e.to_string())?;
        }
        let (r, d) = (out.real_only.survival_time.unwrap(), out.with_dreams.survival_time.unwrap());
        let ok = r <= 2 * d && d <= 2 * r;
        close += ok as usize;
        lines.push(format!("    seed {seed:2}: survival real {r:3} dreams {d:3}{}", if ok { "" } else { "  <- outside 2x" }));
    }
    let took = start.elapsed();
    let summary = format!("{close}/20 seeds within 2x (need 14), {took:?}");
    if close < 14 || took >= Duration::from_secs(120) {
        return Err(format!("{summary}\n{}", lines.join("\n")));
    }
    Ok(summary)
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bars = dir.path().join("bars.csv");
    write_ohlcv(
        &bars,
        &synth_ohlcv(&OhlcvSynthParams {
            n_days: 40,
            seed: 9,
            ..OhlcvSynthParams::default()
        })
        .unwrap(),
    )
    .map_err(|e| e.to_string())?;
    let runs = [
        RunConfig {
            scenario: Scenario::Currency,
            input: Some(bars),
            output: Some(dir.path().join("cur.json")),
            seed: 9,
            ..RunConfig::default()
        },
        RunConfig {
            scenario: Scenario::Allocation,
            output: Some(dir.path().join("alloc.csv")),
            seed: 9,
            ..RunConfig::default()
        },
    ];
    let mut files = 0;
    for cfg in &runs {
        let first = cmd_run(cfg).map_err(|e| e.to_string())?;
        let bytes: Vec<Vec<u8>> = first.reports.iter().map(|p| std::fs::read(p).unwrap()).collect();
        let second = cmd_run(cfg).map_err(|e| e.to_string())?;
        for (p, b) in second.reports.iter().zip(&bytes) {
            ensure(&std::fs::read(p).unwrap() == b, || format!("{} differs between runs", p.display()))?;
            files += 1;
        }
    }
    Ok(format!("{files} report files byte-identical across repeated runs"))
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "golden worked example", golden_example()),
        (2, "metric properties", metric_suite()),
        (3, "extension properties", extension_suite()),
        (4, "bound diagnostics", bound_diagnostics()),
        (5, "dream suite", dream_suite()),
        (6, "currency oracle equivalence", currency_oracle()),
        (7, "dream-augmentation comparability", dream_comparability()),
    ];
    let substitutes_ok = results.iter().filter(|(n, _, _)| *n == 6 || *n == 7).all(|(_, _, r)| r.is_ok());
    results.push((
        8,
        "desk-scale substitutes",
        if substitutes_ok {
            Ok("original market data and network baselines unavailable; criteria 6 and 7 stand in and pass".into())
        } else {
            Err("criteria 6 or 7 failed, so the stand-in checks did not hold".into())
        },
    ));
    results.push((9, "reproducible reports", reproducibility()));

    let mut failed = 0;
    for (n, name, r) in &results {
        match r {
            Ok(detail) => println!("criterion {n} [PASS] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} [FAIL] {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

