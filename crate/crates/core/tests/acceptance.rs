//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits nonzero on any FAIL.

mod common;

use std::time::{Duration, Instant};

use common::*;
use wq_sysid::era_okid::{self, EraConfig};
use wq_sysid::experiment::{
    run_experiment, run_scenarios, ExperimentConfig, InputSpec, NetworkSource, OrderChoice, Preset, ScenarioPlan,
};
use wq_sysid::lti_model::{cascade, impulse_response, simulate, spectral_radius};
use wq_sysid::order_select::{binary_search_order, EnergyProfile};
use wq_sysid::signals::{gen_random, SignalKind};
use wq_sysid::subspace_id::identify_sim;
use wq_sysid::wdn_sim::{self, build_quality_model};
use wq_sysid::{Method, SimVariant};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn markov_round_trip() -> Outcome {
    let t = Instant::now();
    let mut rng = rng(101);
    let (mut worst_okid, mut worst_era) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let (n_x, n_u, n_y) = random_dims(&mut rng);
        let plant = random_plant(&mut rng, n_x, n_u, n_y, (0.3, 0.8), true);
        // a finite Hankel of rank n_x already determines the plant
        let truth = impulse_response(&plant, 40);

        let era_id = era_okid::era(
            &truth,
            &EraConfig::near_square(truth.len(), n_y, n_u, n_x).map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
        let era_h = impulse_response(&era_id.model, 20);
        worst_era = worst_era.max(truth.relative_error(&era_h, 0, 20).unwrap());

        // at ρ ≤ 0.8 lags beyond 120 are below round-off
        let m = 120;
        let u = gen_random(n_u, 400, (-1.0, 1.0), rng_seed(&mut rng), 1.0).unwrap();
        let y = simulate(&plant, &u, &vec![0.0; n_x]).unwrap();
        let h = era_okid::okid_markov(&u, &y, m)
            .map_err(|e| e.to_string())?
            .truncated(41);
        let cfg = EraConfig::near_square(h.len(), n_y, n_u, n_x).unwrap();
        let okid_id = era_okid::era(&h, &cfg).map_err(|e| e.to_string())?;
        let okid_h = impulse_response(&okid_id.model, 20);
        worst_okid = worst_okid.max(truth.relative_error(&okid_h, 0, 20).unwrap());
    }
    let el = t.elapsed();
    check(
        worst_okid < 1e-6 && worst_era < 1e-8 && within(el, 5.0),
        format!(
            "worst OKID/ERA {worst_okid:.2e} (< 1e-6), worst ERA {worst_era:.2e} (< 1e-8), {:.2}s (< 5s)",
            el.as_secs_f64()
        ),
    )
}

fn rng_seed(rng: &mut rand_chacha::ChaCha8Rng) -> u64 {
    use rand::Rng;
    rng.gen()
}

fn sim_exactness() -> Outcome {
    let t = Instant::now();
    let mut rng = rng(202);
    let mut worst = [0.0f64; 3];
    for _ in 0..50 {
        let (n_x, n_u, n_y) = random_dims(&mut rng);
        let plant = random_plant(&mut rng, n_x, n_u, n_y, (0.3, 0.8), true);
        let k = n_x.div_ceil(n_y).max(2) + 2;
        let u = gen_random(n_u, 1000, (-1.0, 1.0), rng_seed(&mut rng), 1.0).unwrap();
        let y = simulate(&plant, &u, &vec![0.0; n_x]).unwrap();
        let truth = impulse_response(&plant, 2 * k);
        for (i, v) in SimVariant::ALL.into_iter().enumerate() {
            let id = identify_sim(&u, &y, k, n_x, v).map_err(|e| format!("{v:?}: {e}"))?;
            let h = impulse_response(&id.model, 2 * k);
            worst[i] = worst[i].max(truth.relative_error(&h, 0, 2 * k).unwrap());
        }
    }
    let el = t.elapsed();
    check(
        worst[0] < 1e-5 && worst[1] < 1e-5 && worst[2] < 1e-4 && within(el, 10.0),
        format!(
            "worst N4SID {:.2e}, MOESP {:.2e} (< 1e-5), CVA {:.2e} (< 1e-4), {:.2}s (< 10s)",
            worst[0],
            worst[1],
            worst[2],
            el.as_secs_f64()
        ),
    )
}

/// Published three-node RMSEs, scenario-major; `None` where no stable model was reported.
const THREE_NODE_TABLE: [(Method, [Option<f64>; 3]); 5] = [
    (Method::N4sid, [Some(0.0332), Some(0.0712), Some(0.0107)]),
    (Method::Moesp, [Some(0.0332), Some(0.0516), Some(0.0105)]),
    (Method::Cva, [Some(0.0183), Some(0.323), None]),
    (Method::Era, [Some(0.0224), Some(0.0152), Some(0.0037)]),
    (Method::OkidEra, [Some(0.0234), Some(0.0154), Some(0.0037)]),
];

fn three_node_scenarios() -> Outcome {
    let cells = run_scenarios(Preset::ThreeNode, 7);
    let mut problems = Vec::new();
    let mut lines = Vec::new();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let rmse = |s: usize, m: Method| {
        cells
            .iter()
            .find(|c| c.scenario == s && c.method == m)
            .and_then(|c| c.report.as_ref())
    };
    for (m, published) in THREE_NODE_TABLE {
        let mut row = format!("{:<9}", m.name());
        for s in 1..=3 {
            let Some(r) = rmse(s, m) else {
                let err = cells
                    .iter()
                    .find(|c| c.scenario == s && c.method == m)
                    .and_then(|c| c.error.clone());
                problems.push(format!("{} S{s} failed: {err:?}", m.name()));
                row.push_str("        failed");
                continue;
            };
            row.push_str(&format!(" {:>13.4e}", r.rmse));
            if r.wall_time_s >= 10.0 {
                problems.push(format!("{} S{s} took {:.1}s", m.name(), r.wall_time_s));
            }
            if m.is_era_based() && !r.stable {
                problems.push(format!("{} S{s} unstable", m.name()));
            }
            if s < 3 && r.relative_rmse() > 0.05 {
                problems.push(format!("{} S{s} relative RMSE {:.3}", m.name(), r.relative_rmse()));
            }
            if let Some(p) = published[s - 1] {
                let ratio = r.rmse / p;
                lo = lo.min(ratio);
                hi = hi.max(ratio);
                if !(0.1..=10.0).contains(&ratio) {
                    problems.push(format!("{} S{s} is {ratio:.2}x the published value", m.name()));
                }
            }
        }
        lines.push(row);
    }
    for m in [Method::Era, Method::OkidEra] {
        if let (Some(a), Some(b)) = (rmse(1, m), rmse(3, m)) {
            if b.rmse >= a.rmse {
                problems.push(format!(
                    "{} S3 {:.3e} does not improve on S1 {:.3e}",
                    m.name(),
                    b.rmse,
                    a.rmse
                ));
            }
        }
    }
    for l in &lines {
        println!("    {l}");
    }
    check(
        problems.is_empty(),
        format!("ratio to published RMSEs in [{lo:.2}, {hi:.2}]; issues: {problems:?}"),
    )
}

fn net1_okid_era() -> Outcome {
    let t = Instant::now();
    let cfg = ExperimentConfig {
        network: NetworkSource::Preset(Preset::Net1),
        method: Method::OkidEra,
        order: OrderChoice::Fixed(127),
        test_input: InputSpec::Rect {
            start: 0,
            width: 40,
            amplitude: 40.0,
        },
        validation_input: InputSpec::Random { lo: 0.0, hi: 40.0 },
        steps: 400,
        seed: 3,
        block_rows: None,
        markov_horizon: None,
    };
    let r = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let el = t.elapsed();
    // the report carries no model, so repeat the identification to probe it
    let u = cfg.test_input.generate(1, cfg.steps, cfg.seed, 15.0).unwrap();
    let plant = build_quality_model::<f64>(&wdn_sim::net1_preset()).unwrap();
    let y = simulate(&plant, &u, &vec![0.0; plant.n_x()]).unwrap();
    let era_cfg = EraConfig::near_square(cfg.steps, 3, 1, 127).unwrap();
    let id = era_okid::okid_era(&u, &y, &era_cfg, cfg.steps - 1).map_err(|e| e.to_string())?;
    let j22 = wdn_sim::net1_preset().sensors.iter().position(|s| s == "J22").unwrap();
    let h: Vec<f64> = impulse_response(&id.model, 300)
        .params()
        .iter()
        .map(|p| p[(j22, 0)])
        .collect();
    let peaks = prominent_maxima(&h, 0.1);
    check(
        r.stable && r.n_r == 127 && peaks.len() == 2 && within(el, 120.0),
        format!(
            "n_r {} stable {} relative RMSE {:.2e}, J22 peaks at {:?}, {:.1}s (< 120s)",
            r.n_r,
            r.stable,
            r.relative_rmse(),
            peaks,
            el.as_secs_f64()
        ),
    )
}

fn order_selection() -> Outcome {
    let t = Instant::now();
    let mut rng = rng(505);
    let mut mismatches = 0;
    for i in 0..200 {
        let sv = random_spectrum(&mut rng, 1 + i % 60);
        let g = [0.0, 0.5, 0.9, 0.95, 0.99, 0.999][i % 6];
        if binary_search_order(&sv, g).unwrap() != linear_scan_order(&sv, g) {
            mismatches += 1;
        }
    }
    let plant = build_quality_model::<f64>(&wdn_sim::three_node_preset()).unwrap();
    let h = impulse_response(&plant, 999);
    let cfg = EraConfig::near_square(h.len(), 2, 1, 1).unwrap();
    let sv = era_okid::prepare_era(&h, cfg.m_o, cfg.m_c)
        .unwrap()
        .singular_values()
        .to_vec();
    let n95 = binary_search_order(&sv, 0.95).unwrap();
    let el = t.elapsed();
    check(
        mismatches == 0 && n95 <= 40 && within(el, 1.0),
        format!(
            "{mismatches} mismatches in 200 spectra, three-node n_r(0.95) = {n95} (<= 40), {:.3}s (< 1s)",
            el.as_secs_f64()
        ),
    )
}

fn cascade_correctness() -> Outcome {
    let mut rng = rng(606);
    let (mut worst_y, mut worst_rho) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let (n1, nu, nm) = random_dims(&mut rng);
        let (n2, _, ny) = random_dims(&mut rng);
        let s1 = random_plant(&mut rng, n1, nu, nm, (0.2, 0.95), true);
        let s2 = random_plant(&mut rng, n2, nm, ny, (0.2, 0.95), true);
        let u = gen_random(nu, 200, (-1.0, 1.0), rng_seed(&mut rng), 1.0).unwrap();
        let both = cascade(&s1, &s2).unwrap();
        let direct = simulate(&both, &u, &vec![0.0; n1 + n2]).unwrap();
        let mid = simulate(&s1, &u, &vec![0.0; n1]).unwrap().with_kind(SignalKind::Input);
        let seq = simulate(&s2, &mid, &vec![0.0; n2]).unwrap();
        let scale = seq.peak().max(1.0);
        for k in 0..u.len() {
            for i in 0..ny {
                worst_y = worst_y.max((direct.at(i, k) - seq.at(i, k)).abs() / scale);
            }
        }
        let expect = spectral_radius(&s1).unwrap().max(spectral_radius(&s2).unwrap());
        worst_rho = worst_rho.max((spectral_radius(&both).unwrap() - expect).abs());
    }
    check(
        worst_y < 1e-10 && worst_rho < 1e-9,
        format!("worst output gap {worst_y:.2e} (< 1e-10), worst radius gap {worst_rho:.2e} (< 1e-9)"),
    )
}

fn plant_invariants() -> Outcome {
    let mut problems = Vec::new();
    let mut notes = Vec::new();
    for (name, spec) in [
        ("three-node", wdn_sim::three_node_preset()),
        ("net1", wdn_sim::net1_preset()),
    ] {
        let plant = build_quality_model::<f64>(&spec).unwrap();
        let rho = spectral_radius(&plant).unwrap();
        if rho >= 1.0 {
            problems.push(format!("{name} radius {rho}"));
        }
        let lags = spec.arrival_lags().unwrap();
        let horizon = lags.iter().flatten().flatten().max().copied().unwrap_or(0) + 50;
        let h = impulse_response(&plant, horizon);
        for k in 0..h.len() {
            let p = h.get(k);
            for i in 0..plant.n_y() {
                for j in 0..plant.n_u() {
                    let v = p[(i, j)];
                    if v < 0.0 {
                        problems.push(format!("{name} h({k})[{i},{j}] = {v}"));
                    }
                    match lags[i][j] {
                        Some(d) if k < d && v != 0.0 => problems.push(format!("{name} early response at {k}")),
                        Some(d) if k == d && v <= 0.0 => problems.push(format!("{name} nothing at lag {d}")),
                        None if v != 0.0 => problems.push(format!("{name} response without a path")),
                        _ => {}
                    }
                }
            }
        }
        let mut lossless = spec.clone();
        lossless.decay_rate = 0.0;
        let a = build_quality_model::<f64>(&lossless).unwrap();
        let w = lossless.mass_weights().unwrap();
        let mut worst: f64 = 0.0;
        for j in 0..a.n_x() {
            if w[j] == 0.0 {
                continue;
            }
            let out: f64 = (0..a.n_x()).map(|i| w[i] * a.a()[(i, j)]).sum();
            worst = worst.max(out / w[j]);
        }
        if worst > 1.0 + 1e-12 {
            problems.push(format!("{name} creates mass: ratio {worst}"));
        }
        notes.push(format!(
            "{name}: radius {rho:.4}, lags {lags:?}, max mass ratio {worst:.3}"
        ));
    }
    check(
        problems.is_empty(),
        format!("{}; issues: {problems:?}", notes.join("; ")),
    )
}

fn energy_properties() -> Outcome {
    let mut rng = rng(808);
    let mut bad = Vec::new();
    for i in 0..100 {
        let sv = random_spectrum(&mut rng, 1 + i % 50);
        let p = EnergyProfile::new(&sv).unwrap();
        if p.levels.windows(2).any(|w| w[1] < w[0]) {
            bad.push(format!("spectrum {i} not monotone"));
        }
        if (p.levels.last().unwrap() - 1.0).abs() > 1e-12 {
            bad.push(format!("spectrum {i} ends at {}", p.levels.last().unwrap()));
        }
        let scaled: Vec<f64> = sv.iter().map(|s| s * 37.5).collect();
        let q = EnergyProfile::new(&scaled).unwrap();
        if p.levels.iter().zip(&q.levels).any(|(a, b)| (a - b).abs() > 1e-12) {
            bad.push(format!("spectrum {i} not scale invariant"));
        }
    }
    check(bad.is_empty(), format!("100 spectra; issues: {bad:?}"))
}

fn determinism() -> Outcome {
    let plan = ScenarioPlan::for_preset(Preset::ThreeNode);
    let mut differing = Vec::new();
    for method in Method::ALL {
        let cfg = plan.config(2, method, 11).unwrap();
        let a = run_experiment(&cfg).map_err(|e| e.to_string())?;
        let b = run_experiment(&cfg).map_err(|e| e.to_string())?;
        if a.to_json_without_timing().unwrap() != b.to_json_without_timing().unwrap() {
            differing.push(method.name());
        }
    }
    check(
        differing.is_empty(),
        format!("five methods run twice; differing reports: {differing:?}"),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 ERA/OKID round trip", markov_round_trip),
        ("2 SIM exactness", sim_exactness),
        ("3 three-node scenarios", three_node_scenarios),
        ("4 Net1 OKID/ERA", net1_okid_era),
        ("5 order selection", order_selection),
        ("6 cascade", cascade_correctness),
        ("7 plant invariants", plant_invariants),
        ("8 energy level", energy_properties),
        ("9 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(d) => println!("criterion {name}: PASS ({d})"),
            Err(d) => {
                failed += 1;
                println!("criterion {name}: FAIL ({d})");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
