use std::path::Path;

use markov_sampler::{
    clairvoyant_frequency, run_policy_with, run_sweep, with_workers, CmdpError, Execution,
    MarkovChain, MarkovPolicy, NuBound, Problem, SamplingModel, SimOptions, SweepProblem,
    SweepSpec,
};

use crate::args::{
    parse_values, Command, InfoArgs, ProblemChoice, RunConfig, SimulateArgs, SolveArgs, SweepArgs,
    SweepKind,
};
use crate::error::CliError;
use crate::files::{
    policy_from_rows, read_chain, read_json, read_policy, to_pretty_json, write_output,
};
use crate::report::{
    InfoReport, PeriodicReport, PolicyReport, PolicySimulationReport, ProblemReport, SolveReport,
};

/// Largest gap allowed between the LP objective and the re-evaluated policy.
pub const SELF_CONSISTENCY_TOLERANCE: f64 = 1e-6;

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Info(args) => cmd_info(&args),
        Command::Solve(args) => cmd_solve(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Sweep(args) => cmd_sweep(&args),
    }
}

fn require_m_max(m_max: u32) -> Result<(), CliError> {
    if m_max < 1 {
        return Err(CliError::InvalidInput("--m-max must be at least 1".into()));
    }
    Ok(())
}

pub fn cmd_info(args: &InfoArgs) -> Result<(), CliError> {
    require_m_max(args.m_max)?;
    let chain = read_chain(&args.chain)?;
    let model = SamplingModel::new(chain.clone(), args.m_max)?;
    let nu = clairvoyant_frequency(&chain);
    let report = InfoReport {
        n_states: chain.n_states(),
        p: chain.rows(),
        stationary: chain.stationary().iter().copied().collect(),
        nu_clairvoyant: nu,
        clairvoyant_interval: 1.0 / nu,
        m_max: args.m_max,
        age_cost: (0..chain.n_states())
            .map(|j| model.costs().row(j).to_vec())
            .collect(),
    };
    write_output(args.out.as_ref(), &to_pretty_json(&report))
}

fn resolve_problem(choice: ProblemChoice, chain: &MarkovChain) -> (Problem, bool) {
    match choice {
        ProblemChoice::Nu(nu) => (Problem::MinAgePenalty { nu }, false),
        ProblemChoice::Clairvoyant => (
            Problem::MinAgePenalty {
                nu: clairvoyant_frequency(chain),
            },
            true,
        ),
        ProblemChoice::AgeLimit(age_limit) => (Problem::MaxInterval { age_limit }, false),
    }
}

/// Solves the configured problem and checks the report against itself.
pub fn solve_report(config: &RunConfig, vertex: bool) -> Result<SolveReport, CliError> {
    let choice = config.problem.ok_or_else(|| {
        CliError::InvalidInput("one of --nu, --clairvoyant or --age-limit is required".into())
    })?;
    let chain = read_chain(&config.chain_path)?;
    let mut model = SamplingModel::new(chain.clone(), config.m_max)?;
    if vertex {
        model = model.with_vertex_solutions();
    }
    let (problem, clairvoyant) = resolve_problem(choice, &chain);
    let solution = model.solve(problem)?;

    let recheck = model.evaluate_policy(&solution.policy)?;
    if !solution.policy.any_defaulted() {
        let evaluated = problem.objective_of(&recheck);
        if (evaluated - solution.lp_objective).abs() > SELF_CONSISTENCY_TOLERANCE {
            return Err(CmdpError::ObjectiveMismatch {
                lp: solution.lp_objective,
                evaluated,
            }
            .into());
        }
    }

    let periodic_baseline = match model.periodic_baseline(problem) {
        Ok((tau, evaluation)) => Some(PeriodicReport { tau, evaluation }),
        Err(CmdpError::PeriodExceedsM { .. }) => None,
        Err(err) => return Err(err.into()),
    };
    Ok(SolveReport {
        n_states: chain.n_states(),
        m_max: config.m_max,
        problem: ProblemReport::new(problem, clairvoyant),
        nu_clairvoyant: clairvoyant_frequency(&chain),
        stationary: chain.stationary().iter().copied().collect(),
        lp_objective: solution.lp_objective,
        policy: PolicyReport::from(&solution.policy),
        evaluation: solution.report,
        periodic_baseline,
        simulation: None,
    })
}

pub fn cmd_solve(args: &SolveArgs) -> Result<(), CliError> {
    let config = RunConfig {
        chain_path: args.chain.clone(),
        m_max: args.m_max,
        problem: args.constraint.choice(),
        output_path: args.out.clone(),
        seed: 0,
        k_samples: 1,
    }
    .validate()?;
    let report = solve_report(&config, args.vertex)?;
    write_output(config.output_path.as_ref(), &to_pretty_json(&report))
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let config = RunConfig {
        chain_path: args.chain.clone(),
        m_max: args.m_max,
        problem: args.constraint.choice(),
        output_path: args.out.clone(),
        seed: args.seed,
        k_samples: args.samples,
    }
    .validate()?;
    let options = SimOptions {
        burn_in: args.burn_in,
        ..SimOptions::default()
    };
    let simulate = |chain: &MarkovChain, policy: &MarkovPolicy| {
        run_policy_with(chain, policy, config.k_samples, config.seed, &options)
    };

    let bytes = if let Some(path) = &args.report {
        let mut report: SolveReport = read_json(path)?;
        let chain = read_chain(&config.chain_path)?;
        let policy = policy_from_rows(path, report.policy.dist.clone())?;
        report.simulation = Some(simulate(&chain, &policy)?);
        to_pretty_json(&report)
    } else if args.policy.is_some() || args.periodic.is_some() {
        let chain = read_chain(&config.chain_path)?;
        let (policy, m_max) = match (&args.policy, args.periodic) {
            (Some(path), _) => {
                let policy = read_policy(path)?;
                let m_max = policy.m_max();
                (policy, m_max)
            }
            (None, Some(tau)) => {
                if tau < 1 || tau > config.m_max {
                    return Err(CliError::InvalidInput(format!(
                        "--periodic must be in 1..={}, got {tau}",
                        config.m_max
                    )));
                }
                (
                    MarkovPolicy::periodic(chain.n_states(), config.m_max, tau),
                    config.m_max,
                )
            }
            (None, None) => unreachable!("checked above"),
        };
        let model = SamplingModel::new(chain.clone(), m_max)?;
        let evaluation = model.evaluate_policy(&policy)?;
        let simulation = simulate(&chain, &policy)?;
        to_pretty_json(&PolicySimulationReport {
            n_states: chain.n_states(),
            m_max,
            policy: PolicyReport::from(&policy),
            evaluation,
            simulation,
        })
    } else if config.problem.is_some() {
        let mut report = solve_report(&config, false)?;
        let chain = read_chain(&config.chain_path)?;
        let policy = policy_from_rows(Path::new("<solution>"), report.policy.dist.clone())?;
        report.simulation = Some(simulate(&chain, &policy)?);
        to_pretty_json(&report)
    } else {
        return Err(CliError::InvalidInput(
            "simulate needs --policy, --report, --periodic or a problem flag".into(),
        ));
    };
    write_output(config.output_path.as_ref(), &bytes)
}

pub fn sweep_spec(args: &SweepArgs) -> Result<SweepSpec, CliError> {
    require_m_max(args.m_max)?;
    let problem = match args.problem {
        SweepKind::Clairvoyant => SweepProblem::Clairvoyant,
        SweepKind::P1 => {
            if args.clairvoyant {
                SweepProblem::MinAgePenalty(vec![NuBound::Clairvoyant])
            } else {
                let text = args.nu.as_deref().ok_or_else(|| {
                    CliError::InvalidInput("--problem p1 needs --nu or --clairvoyant".into())
                })?;
                SweepProblem::MinAgePenalty(
                    parse_values("nu", text)?
                        .into_iter()
                        .map(NuBound::Value)
                        .collect(),
                )
            }
        }
        SweepKind::P2 => {
            let text = args
                .age_limit
                .as_deref()
                .ok_or_else(|| CliError::InvalidInput("--problem p2 needs --age-limit".into()))?;
            SweepProblem::MaxInterval(parse_values("age-limit", text)?)
        }
    };
    Ok(SweepSpec {
        problem,
        p12: parse_values("p12", &args.p12)?,
        p21: parse_values("p21", &args.p21)?,
        m_max: args.m_max,
    })
}

/// Runs the sweep and renders it as CSV with a header row.
pub fn sweep_csv(
    spec: &SweepSpec,
    exec: Execution,
    workers: Option<usize>,
) -> Result<Vec<u8>, CliError> {
    let rows = with_workers(workers, || run_sweep(spec, exec));
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        writer
            .serialize(row)
            .map_err(|err| CliError::Internal(format!("csv: {err}")))?;
    }
    writer
        .into_inner()
        .map_err(|err| CliError::Internal(format!("csv: {err}")))
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let spec = sweep_spec(args)?;
    let exec = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let bytes = sweep_csv(&spec, exec, args.workers)?;
    write_output(args.out.as_ref(), &bytes)
}
