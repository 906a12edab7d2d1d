//! Acceptance criteria 1–9. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::process::{Command, ExitCode};

use flocksim::analysis::{fit_growth_exponent, summary_json, timeseries_csv};
use flocksim::cli::sweep;
use flocksim::graph::{avg_path_length, clustering_coefficient, grow_usw, random_graph, UswParams};
use flocksim::model::{classify_condition, DoId, NamedCondition, PolicyKind, SimConfig};
use flocksim::{run, RunResult, Simulation};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const SEEDS: u64 = 20;

struct Outcome {
    pass: bool,
    detail: String,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn runs_for(config: &SimConfig, policy: PolicyKind, seeds: u64) -> Vec<RunResult> {
    (1..=seeds).into_par_iter().map(|seed| run(SimConfig { policy, seed, ..config.clone() }).expect("run")).collect()
}

struct DefaultRuns {
    least: Vec<RunResult>,
    moderate: Vec<RunResult>,
    most: Vec<RunResult>,
}

impl DefaultRuns {
    fn new() -> Self {
        let c = SimConfig::default();
        DefaultRuns {
            least: runs_for(&c, PolicyKind::LeastAggressive, SEEDS),
            moderate: runs_for(&c, PolicyKind::ModeratelyAggressive, SEEDS),
            most: runs_for(&c, PolicyKind::MostAggressive, SEEDS),
        }
    }

    fn of(&self, p: PolicyKind) -> &[RunResult] {
        match p {
            PolicyKind::LeastAggressive => &self.least,
            PolicyKind::ModeratelyAggressive => &self.moderate,
            PolicyKind::MostAggressive => &self.most,
        }
    }
}

fn med(runs: &[RunResult], f: impl Fn(&RunResult) -> f64) -> f64 {
    median(runs.iter().map(f).collect())
}

fn steady_t(r: &RunResult) -> f64 {
    r.steady_state_t.map(|t| t as f64).unwrap_or(f64::INFINITY)
}

fn criterion_1(p: &DefaultRuns) -> Outcome {
    let (l, m, x) = (med(&p.least, steady_t), med(&p.moderate, steady_t), med(&p.most, steady_t));
    Outcome {
        pass: x < l && l < m,
        detail: format!("median steady t: most {x}, least {l}, moderate {m}; need most < least < moderate"),
    }
}

fn criterion_2(p: &DefaultRuns) -> Outcome {
    let msgs = |r: &RunResult| r.total_messages() as f64;
    let eff = |r: &RunResult| r.final_effectiveness();
    let ratio = med(&p.most, msgs) / med(&p.moderate, msgs);
    let (em, ex) = (med(&p.moderate, eff), med(&p.most, eff));
    Outcome {
        pass: (0.35..=0.75).contains(&ratio) && (em - ex).abs() <= 0.05,
        detail: format!(
            "messages most/moderate = {ratio:.3} (need [0.35, 0.75]); effectiveness moderate {em:.3}, most {ex:.3} (need |diff| <= 0.05)"
        ),
    }
}

fn criterion_3(p: &DefaultRuns) -> Outcome {
    let zero = |r: &RunResult| r.world.zero_copy_fraction();
    let (zl, zx) = (med(&p.least, zero), med(&p.most, zero));
    Outcome {
        pass: zl - zx >= 0.10,
        detail: format!("zero-copy fraction least {zl:.3}, most {zx:.3}; difference {:.3} (need >= 0.10)", zl - zx),
    }
}

fn criterion_4() -> Outcome {
    let config = SimConfig::default();
    let sizes = [10, 50, 100, 250, 500];
    let (report, _) = sweep(&sizes, &config, None).expect("sweep");
    let per_size: Vec<(u64, f64)> = sizes
        .iter()
        .map(|n| {
            let sum: u64 = report.points.iter().filter(|p| p.n == *n).map(|p| p.growth_messages).sum();
            (*n as u64, sum as f64)
        })
        .collect();
    let fit = fit_growth_exponent(&per_size).expect("fit");
    let slope = fit.slope;
    let marginal = fit.marginal_slope.unwrap_or(f64::NAN);
    let per_policy: Vec<String> = report.per_policy.iter().map(|(p, f)| format!("{p} {:.2}", f.slope)).collect();
    Outcome {
        pass: (1.7..=2.3).contains(&slope) && (0.7..=1.3).contains(&marginal),
        detail: format!(
            "growth-message slope {slope:.3} (need [1.7, 2.3]), marginal slope {marginal:.3} (need [0.7, 1.3]); per policy: {}",
            per_policy.join(", ")
        ),
    }
}

/// Share of a DO's sent messages that fall in its first two active bins.
fn burst_fraction(r: &RunResult, id: DoId) -> f64 {
    let bins = r.ledger.do_sent_bins(id);
    let total: u64 = bins.iter().sum();
    let Some(first) = bins.iter().position(|c| *c > 0) else { return 0.0 };
    let early: u64 = bins[first..].iter().take(2).sum();
    early as f64 / total as f64
}

fn criterion_5(p: &DefaultRuns) -> Outcome {
    let mid = DoId(SimConfig::default().n_max / 2);
    let mut pass = true;
    let mut parts = Vec::new();
    for policy in PolicyKind::ALL {
        let f = med(p.of(policy), |r| burst_fraction(r, mid));
        pass &= f >= 0.8;
        parts.push(format!("{policy} {f:.3}"));
    }
    Outcome { pass, detail: format!("{mid} share of sends in first 2 bins: {} (need >= 0.80 each)", parts.join(", ")) }
}

fn criterion_6() -> Outcome {
    let params = UswParams::default();
    let ratios: Vec<(f64, f64)> = (1..=SEEDS)
        .into_par_iter()
        .map(|seed| {
            let g = grow_usw(500, &params, &mut ChaCha8Rng::seed_from_u64(seed));
            let r = random_graph(500, g.edge_count(), &mut ChaCha8Rng::seed_from_u64(seed + 1_000_000));
            (clustering_coefficient(&g).unwrap(), clustering_coefficient(&r).unwrap())
        })
        .collect();
    let c_usw = median(ratios.iter().map(|r| r.0).collect());
    let c_rand = median(ratios.iter().map(|r| r.1).collect());
    let path = |n: u32, seeds: u64| -> f64 {
        median(
            (1..=seeds)
                .into_par_iter()
                .map(|seed| avg_path_length(&grow_usw(n, &params, &mut ChaCha8Rng::seed_from_u64(seed))).unwrap().mean)
                .collect(),
        )
    };
    let (l500, l5000) = (path(500, SEEDS), path(5000, 5));
    Outcome {
        pass: c_usw >= 2.0 * c_rand && l5000 <= 2.0 * l500,
        detail: format!(
            "clustering {c_usw:.4} vs random {c_rand:.4} (need >= 2x); path length n=500 {l500:.3}, n=5000 {l5000:.3} (need <= 2x)"
        ),
    }
}

fn criterion_7() -> Outcome {
    let target = 1_000_000u64;
    let mut configs = Vec::new();
    let mut seed = 0;
    // default population at several capacities, cycling policies and seeds
    while configs.len() < 400 {
        for cap in [1, 2, 3, 5, 10] {
            for policy in PolicyKind::ALL {
                seed += 1;
                configs.push(SimConfig { host_capacity: cap, policy, seed, ..SimConfig::default() });
            }
        }
    }
    let mut events = 0u64;
    let mut violations = Vec::new();
    for chunk in configs.chunks(15) {
        if events >= target {
            break;
        }
        let results: Vec<(u64, Option<String>)> = chunk
            .par_iter()
            .map(|c| {
                let mut sim = Simulation::new(c.clone()).unwrap();
                loop {
                    match sim.step() {
                        Ok(true) => {}
                        Ok(false) => break,
                        Err(e) => return (sim.t(), Some(format!("seed {}: {e}", c.seed))),
                    }
                    if let Err(e) = sim.check_invariants() {
                        return (sim.t(), Some(format!("seed {} t {}: {e}", c.seed, sim.t())));
                    }
                }
                (sim.t(), None)
            })
            .collect();
        for (t, v) in results {
            events += t;
            violations.extend(v);
        }
    }
    Outcome {
        pass: events >= target && violations.is_empty(),
        detail: format!(
            "{events} events checked, {} violations{}",
            violations.len(),
            violations.first().map(|v| format!(" (first: {v})")).unwrap_or_default()
        ),
    }
}

fn criterion_8() -> Outcome {
    let famine = SimConfig { host_capacity: 1, ..SimConfig::default() };
    let straddle = SimConfig { host_capacity: 2, ..SimConfig::default() };
    assert_eq!(classify_condition(&famine), NamedCondition::Famine);
    assert_eq!(classify_condition(&straddle), NamedCondition::Straddle);
    let eff = |r: &RunResult| r.final_effectiveness();
    let moderate = runs_for(&famine, PolicyKind::ModeratelyAggressive, SEEDS);
    let most = runs_for(&famine, PolicyKind::MostAggressive, SEEDS);
    let (em, ex) = (med(&moderate, eff), med(&most, eff));
    let famine_max = moderate.iter().chain(&most).map(eff).fold(f64::MIN, f64::max);
    let straddle_min =
        PolicyKind::ALL.iter().flat_map(|p| runs_for(&straddle, *p, SEEDS)).map(|r| eff(&r)).fold(f64::MAX, f64::min);
    Outcome {
        pass: (em - ex).abs() <= 0.10 && famine_max < straddle_min,
        detail: format!(
            "famine (H_c=1) effectiveness moderate {em:.3}, most {ex:.3} (need |diff| <= 0.10); best famine run {famine_max:.3} < worst straddle (H_c=2) run {straddle_min:.3}"
        ),
    }
}

fn criterion_9() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_flocksim");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let ok = Command::new(bin)
            .args(["run", "--policy", "most", "--seed", "7"])
            .arg("--out-dir")
            .arg(d.path())
            .output()
            .unwrap();
        assert!(ok.status.success());
    }
    let mut same = true;
    for name in ["most_n500_s7.csv", "most_n500_s7.json", "most_n500_s7_edges.txt"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        same &= a == b;
    }
    let c = SimConfig { policy: PolicyKind::LeastAggressive, seed: 3, ..SimConfig::default() };
    let (x, y) = (run(c.clone()).unwrap(), run(c).unwrap());
    same &= timeseries_csv(&x).unwrap() == timeseries_csv(&y).unwrap() && summary_json(&x) == summary_json(&y);
    Outcome {
        pass: same,
        detail: "two invocations with equal config and seed give byte-identical CSV, JSON and edge list".into(),
    }
}

fn main() -> ExitCode {
    let runs = DefaultRuns::new();
    let criteria: Vec<(u32, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (1, Box::new(|| criterion_1(&runs))),
        (2, Box::new(|| criterion_2(&runs))),
        (3, Box::new(|| criterion_3(&runs))),
        (4, Box::new(criterion_4)),
        (5, Box::new(|| criterion_5(&runs))),
        (6, Box::new(criterion_6)),
        (7, Box::new(criterion_7)),
        (8, Box::new(criterion_8)),
        (9, Box::new(criterion_9)),
    ];
    let mut failed = 0;
    for (n, f) in &criteria {
        let o = f();
        println!("{} criterion {n}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
