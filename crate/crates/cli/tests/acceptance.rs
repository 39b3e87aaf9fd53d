//! End-to-end acceptance checks. Run with
//! `cargo test --test acceptance -- --nocapture` to see one line per criterion.

use std::path::{Path, PathBuf};
use std::process::Command;

use markov_sampler::{
    age_cost, brute_force_deterministic, clairvoyant_frequency, run_policy, run_sweep,
    two_state_clairvoyant_frequency, Execution, MarkovChain, Problem, SamplingModel, SweepProblem,
    SweepSpec,
};
use markov_sampler_cli::report::SolveReport;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_markov-sampler")
}

fn write_chain(dir: &Path, name: &str, rows: &[[f64; 2]; 2]) -> PathBuf {
    let path = dir.join(name);
    let json = format!(
        "{{\"p\": [[{}, {}], [{}, {}]]}}",
        rows[0][0], rows[0][1], rows[1][0], rows[1][1]
    );
    std::fs::write(&path, json).unwrap();
    path
}

struct Output {
    code: i32,
    stdout: Vec<u8>,
    stderr: String,
}

fn run_cli(args: &[&str]) -> Output {
    let out = Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs");
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: out.stdout,
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn solve_cli(args: &[&str]) -> Result<SolveReport, String> {
    let out = run_cli(args);
    ensure!(out.code == 0, "exit {}: {}", out.code, out.stderr);
    serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())
}

fn random_chain(rng: &mut ChaCha8Rng, n: usize) -> MarkovChain {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..n).map(|_| 0.05 + rng.random::<f64>()).collect();
            let sum: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / sum).collect()
        })
        .collect();
    MarkovChain::from_rows(&rows).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn sticky_chain_penalty(dir: &Path) -> Check {
    let chain = write_chain(dir, "ex1.json", &[[0.9, 0.1], [0.6, 0.4]]);
    let r = solve_cli(&[
        "solve",
        "--chain",
        chain.to_str().unwrap(),
        "--m-max",
        "7",
        "--clairvoyant",
    ])?;
    ensure!(
        (r.lp_objective - 1.416).abs() <= 0.002,
        "objective {}",
        r.lp_objective
    );
    ensure!(
        (r.problem.required_interval.unwrap() - 5.83).abs() < 0.005,
        "required interval {:?}",
        r.problem.required_interval
    );
    let d = &r.policy.dist;
    let policy_matches = (d[0][5] - 0.465).abs() <= 0.005
        && (d[0][6] - 0.535).abs() <= 0.005
        && (d[1][1] - 1.0).abs() <= 0.005;
    ensure!(policy_matches, "policy {d:?}");
    Ok(format!(
        "penalty {:.4}, P(6|1)={:.3} P(7|1)={:.3} P(2|2)={:.3}",
        r.lp_objective, d[0][5], d[0][6], d[1][1]
    ))
}

fn flipping_chain_frequency(dir: &Path) -> Check {
    let chain = write_chain(dir, "ex2.json", &[[0.1, 0.9], [0.9, 0.1]]);
    let r = solve_cli(&[
        "solve",
        "--chain",
        chain.to_str().unwrap(),
        "--m-max",
        "4",
        "--age-limit",
        "1",
    ])?;
    let freq = r.evaluation.avg_sampling_frequency;
    ensure!((freq - 0.476).abs() <= 0.002, "frequency {freq}");
    for (j, row) in r.policy.dist.iter().enumerate() {
        ensure!(
            (row[1] - 0.899).abs() <= 0.005 && (row[2] - 0.101).abs() <= 0.005,
            "row {j}: {row:?}"
        );
    }
    let periodic = r
        .periodic_baseline
        .as_ref()
        .ok_or("no periodic baseline")?
        .evaluation
        .avg_sampling_frequency;
    ensure!(
        (periodic - 0.5).abs() < 1e-12,
        "periodic frequency {periodic}"
    );
    Ok(format!("frequency {freq:.5}, periodic {periodic}"))
}

fn clairvoyant_frequency_matches_paths() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for case in 0..20u64 {
        let n = 2 + (case as usize % 4);
        let chain = random_chain(&mut rng, n);
        let nu = clairvoyant_frequency(&chain);
        let path = chain.sample_path(0, 1_000_000, 100 + case);
        let empirical = path.transition_frequency();
        worst = worst.max((nu - empirical).abs());
        ensure!(
            (nu - empirical).abs() <= 0.01,
            "case {case}: {nu} vs {empirical}"
        );
        if n == 2 {
            let (p12, p21) = (chain.prob(0, 1), chain.prob(1, 0));
            let closed = two_state_clairvoyant_frequency(p12, p21);
            ensure!(
                (nu - closed).abs() <= 1e-12,
                "case {case}: closed form {closed}"
            );
        }
    }
    Ok(format!("20 chains, worst gap {worst:.5}"))
}

fn cost_identity() -> Check {
    for k in 0..10 {
        let p = f64::from(k) / 10.0;
        for tau in 1..=12u32 {
            let closed = f64::from(tau - 1) - p * (1.0 - p.powi(tau as i32 - 1)) / (1.0 - p);
            let direct = age_cost(p, tau);
            ensure!(
                (direct - closed).abs() <= 1e-12,
                "p={p} tau={tau}: {direct} vs {closed}"
            );
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let trials = 1_000_000;
    for (p, tau) in [(0.5, 4u32), (0.9, 7), (0.3, 10)] {
        let mut total = 0u64;
        for _ in 0..trials {
            for n in 1..tau {
                if rng.random::<f64>() >= p {
                    total += u64::from(tau - n);
                    break;
                }
            }
        }
        let mc = total as f64 / f64::from(trials);
        let exact = age_cost(p, tau);
        ensure!(rel(mc, exact) <= 0.01, "p={p} tau={tau}: {mc} vs {exact}");
    }
    Ok("closed form to 1e-12, sojourn Monte Carlo within 1%".into())
}

fn lp_analytic_empirical() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut worst_sim: f64 = 0.0;
    for case in 0..10u64 {
        let n = 2 + (case as usize % 3);
        let m_max = 4 + (case as u32 % 5);
        let chain = random_chain(&mut rng, n);
        let model = SamplingModel::new(chain.clone(), m_max).unwrap();
        let problem = if case % 2 == 0 {
            let interval = 2.0 + rng.random::<f64>() * (f64::from(m_max) - 2.5);
            Problem::MinAgePenalty { nu: 1.0 / interval }
        } else {
            Problem::MaxInterval {
                age_limit: 0.2 + rng.random::<f64>() * 1.5,
            }
        };
        let sol = model
            .solve(problem)
            .map_err(|e| format!("case {case}: {e}"))?;
        let evaluated = model
            .evaluate_policy(&sol.policy)
            .map_err(|e| e.to_string())?;
        let objective = problem.objective_of(&evaluated);
        ensure!(
            (objective - sol.lp_objective).abs() <= 1e-6,
            "case {case}: LP {} vs evaluation {objective}",
            sol.lp_objective
        );
        let sim =
            run_policy(&chain, &sol.policy, 1_000_000, 9000 + case).map_err(|e| e.to_string())?;
        let empirical = match problem {
            Problem::MinAgePenalty { .. } => sim.empirical_age_penalty,
            Problem::MaxInterval { .. } => sim.empirical_interval,
        };
        worst_sim = worst_sim.max(rel(empirical, objective));
        ensure!(
            rel(empirical, objective) <= 0.01,
            "case {case}: simulated {empirical} vs {objective}"
        );
    }
    Ok(format!(
        "10 instances, worst simulation gap {:.3}%",
        100.0 * worst_sim
    ))
}

fn brute_force_dominance() -> Check {
    let grid: Vec<f64> = (1..=9).map(|k| f64::from(k) / 10.0).collect();
    let m_max = 8;
    let tol = 1e-9;
    let mut infeasible = 0;
    for &p12 in &grid {
        for &p21 in &grid {
            let chain = MarkovChain::two_state(p12, p21).unwrap();
            let model = SamplingModel::new(chain.clone(), m_max).unwrap();
            let at = format!("p12={p12} p21={p21}");

            let p1 = Problem::MinAgePenalty {
                nu: clairvoyant_frequency(&chain),
            };
            let brute = brute_force_deterministic(&model, p1, Execution::Parallel)
                .map_err(|e| e.to_string())?;
            match (model.solve(p1), brute) {
                (Ok(sol), Some(best)) => {
                    let lp = sol.report.avg_age_penalty;
                    ensure!(
                        lp <= best.report.avg_age_penalty + tol,
                        "{at}: P1 {lp} vs deterministic"
                    );
                    if let Ok((_, periodic)) = model.periodic_baseline(p1) {
                        ensure!(
                            lp <= periodic.avg_age_penalty + tol,
                            "{at}: P1 {lp} vs periodic"
                        );
                    }
                }
                (Err(markov_sampler::CmdpError::InfeasibleByConstruction { .. }), None) => {
                    infeasible += 1;
                }
                (lp, brute) => {
                    return Err(format!(
                        "{at}: P1 LP {:?} disagrees with brute force {:?}",
                        lp.map(|s| s.lp_objective),
                        brute.map(|b| b.intervals)
                    ))
                }
            }

            let p2 = Problem::MaxInterval { age_limit: 1.0 };
            let sol = model.solve(p2).map_err(|e| format!("{at}: {e}"))?;
            let best = brute_force_deterministic(&model, p2, Execution::Parallel)
                .map_err(|e| e.to_string())?
                .ok_or(format!("{at}: no deterministic P2 policy"))?;
            let interval = sol.report.avg_sampling_interval;
            ensure!(
                interval >= best.report.avg_sampling_interval - tol,
                "{at}: P2 {interval} vs deterministic"
            );
            let (_, periodic) = model.periodic_baseline(p2).map_err(|e| e.to_string())?;
            ensure!(
                sol.report.avg_sampling_frequency <= periodic.avg_sampling_frequency + tol,
                "{at}: P2 frequency vs periodic"
            );
        }
    }
    Ok(format!(
        "81 grid points, P1 infeasible at {infeasible} (brute force agrees)"
    ))
}

fn frequency_ratio_direction() -> Check {
    let spec = SweepSpec {
        problem: SweepProblem::MaxInterval(vec![1.0]),
        p12: vec![0.1, 0.9],
        p21: vec![0.1, 0.9],
        m_max: 32,
    };
    let rows = run_sweep(&spec, Execution::Parallel);
    let ratio = |p: f64| {
        rows.iter()
            .find(|r| r.p12 == p && r.p21 == p)
            .and_then(|r| r.ratio_to_clairvoyant)
            .ok_or(format!("no ratio at {p}"))
    };
    let (low, high) = (ratio(0.1)?, ratio(0.9)?);
    ensure!(low > 1.0, "ratio at 0.1 is {low}");
    ensure!((high - 0.529).abs() <= 0.005, "ratio at 0.9 is {high}");
    Ok(format!("ratio {low:.3} at 0.1, {high:.4} at 0.9"))
}

fn feasibility_edges(dir: &Path) -> Check {
    let chain = write_chain(dir, "edge.json", &[[0.9, 0.1], [0.6, 0.4]]);
    let chain = chain.to_str().unwrap();
    let out = run_cli(&["solve", "--chain", chain, "--m-max", "4", "--nu", "0.2"]);
    ensure!(
        out.code == 3,
        "exit {} for 1/nu > M: {}",
        out.code,
        out.stderr
    );
    ensure!(
        out.stderr.contains("\"infeasible\""),
        "stderr {}",
        out.stderr
    );
    let r = solve_cli(&[
        "solve",
        "--chain",
        chain,
        "--m-max",
        "4",
        "--age-limit",
        "0",
    ])?;
    for row in &r.policy.dist {
        ensure!((row[0] - 1.0).abs() < 1e-9, "row {row:?}");
    }
    ensure!(
        r.evaluation.avg_age_penalty.abs() < 1e-9,
        "penalty {}",
        r.evaluation.avg_age_penalty
    );
    ensure!(
        (r.evaluation.avg_sampling_frequency - 1.0).abs() < 1e-9,
        "frequency {}",
        r.evaluation.avg_sampling_frequency
    );
    Ok("exit 3 when 1/nu > M; d=0 samples every slot".into())
}

fn determinism(dir: &Path) -> Check {
    let chain = write_chain(dir, "det.json", &[[0.1, 0.9], [0.9, 0.1]]);
    let chain = chain.to_str().unwrap();
    let solve = [
        "solve",
        "--chain",
        chain,
        "--m-max",
        "4",
        "--age-limit",
        "1",
    ];
    let simulate = [
        "simulate",
        "--chain",
        chain,
        "--m-max",
        "4",
        "--age-limit",
        "1",
        "--samples",
        "200000",
        "--seed",
        "17",
    ];
    for args in [&solve[..], &simulate[..]] {
        let (a, b) = (run_cli(args), run_cli(args));
        ensure!(a.code == 0 && b.code == 0, "{}: {}", args[0], a.stderr);
        ensure!(
            a.stdout == b.stdout,
            "{} output differs between runs",
            args[0]
        );
    }
    Ok("solve and simulate reports byte-identical".into())
}

#[test]
fn acceptance() {
    let dir = TempDir::new().unwrap();
    let criteria: Vec<(&str, Box<dyn Fn() -> Check>)> = vec![
        (
            "sticky chain, M=7, clairvoyant bound",
            Box::new(|| sticky_chain_penalty(dir.path())),
        ),
        (
            "flipping chain, M=4, age limit 1",
            Box::new(|| flipping_chain_frequency(dir.path())),
        ),
        (
            "clairvoyant frequency",
            Box::new(clairvoyant_frequency_matches_paths),
        ),
        ("age cost identity", Box::new(cost_identity)),
        ("LP / analytic / empirical", Box::new(lp_analytic_empirical)),
        ("brute-force dominance", Box::new(brute_force_dominance)),
        (
            "frequency ratio direction",
            Box::new(frequency_ratio_direction),
        ),
        (
            "feasibility edges",
            Box::new(|| feasibility_edges(dir.path())),
        ),
        ("determinism", Box::new(|| determinism(dir.path()))),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                println!("criterion {} FAIL  {name}: {detail}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
