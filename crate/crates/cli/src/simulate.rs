use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;

use coupon_embed::algebra::semigroup_params;
use coupon_embed::model::{cm_from_params, cm_power_params_spectral};
use coupon_embed::sim::{
    collection_time_stats, continuous_marginal, discrete_marginal, empirical_transition,
    run_continuous, run_discrete, write_continuous_csv, write_discrete_csv, CollectionTimeStats,
    RngSeed,
};
use coupon_embed::{Subset, SubsetVector};
use serde::Serialize;

use crate::semigroup::generator_of;
use crate::spec::ModelSpec;
use crate::{
    by_cardinality, json_string, tool_info, CliError, Outcome, OutputFormat, SimMode,
    SimulateArgs, SubsetValue, ToolInfo, EXIT_OK,
};

/// Largest `n` for which the full one-step matrix is estimated (one row per subset).
pub const TRANSITION_MAX_N: usize = 6;
/// Stream reserved for the exported sample trajectory.
pub const TRAJECTORY_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Serialize)]
pub struct MarginalEstimate {
    pub empirical: Vec<SubsetValue>,
    pub exact: Vec<SubsetValue>,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransitionEstimate {
    pub trials_per_row: u64,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    pub tool: ToolInfo,
    pub mode: &'static str,
    pub n: usize,
    pub seed: u64,
    pub trials: u64,
    pub tolerance: f64,
    pub steps: Option<usize>,
    pub horizon: Option<f64>,
    pub transition: Option<TransitionEstimate>,
    pub marginal: MarginalEstimate,
    pub collection_time: Option<CollectionTimeStats>,
    pub trajectory: Option<String>,
}

fn marginal(empirical: &SubsetVector, exact: &SubsetVector) -> MarginalEstimate {
    MarginalEstimate {
        empirical: by_cardinality(empirical),
        exact: by_cardinality(exact),
        max_deviation: empirical.max_abs_diff(exact),
    }
}

pub fn run(args: &SimulateArgs) -> Result<Outcome, CliError> {
    if args.trials == 0 {
        return Err(CliError::input("--trials must be at least 1"));
    }
    let model = ModelSpec::read(&args.spec)?.validate()?;
    let p = model.distribution();
    let n = p.n();
    let trajectory = args.trajectory.as_ref().map(|path| path.display().to_string());
    let mut sample_rng = RngSeed::new(args.seed, TRAJECTORY_STREAM).rng();

    let report = match args.mode {
        SimMode::Discrete => {
            let exact = if args.steps == 0 {
                SubsetVector::unit(n)
            } else {
                cm_power_params_spectral(p, args.steps)?.into_inner()
            };
            let empirical = discrete_marginal(p, args.steps, Subset::EMPTY, args.trials, args.seed)?;
            let transition = if n <= TRANSITION_MAX_N {
                let m_hat = empirical_transition(p, args.trials, args.seed)?;
                let m = cm_from_params(p)?;
                Some(TransitionEstimate {
                    trials_per_row: args.trials,
                    max_deviation: m_hat.max_abs_diff(m.as_dense()),
                })
            } else {
                None
            };
            let collection_time = if args.collection_time {
                Some(collection_time_stats(p, args.trials, args.seed)?)
            } else {
                None
            };
            if let Some(path) = &args.trajectory {
                let t = run_discrete(p, args.steps, Subset::EMPTY, &mut sample_rng)?;
                write_discrete_csv(&t, BufWriter::new(File::create(path)?))?;
            }
            SimulationReport {
                tool: tool_info(),
                mode: "discrete",
                n,
                seed: args.seed,
                trials: args.trials,
                tolerance: args.tolerance,
                steps: Some(args.steps),
                horizon: None,
                transition,
                marginal: marginal(&empirical, &exact),
                collection_time,
                trajectory,
            }
        }
        SimMode::Continuous => {
            if args.collection_time {
                return Err(CliError::input("--collection-time applies to discrete mode only"));
            }
            let r = generator_of(&model, args.tolerance)?;
            let exact = semigroup_params(&r, args.horizon)?.into_inner();
            let empirical = continuous_marginal(&r, args.horizon, Subset::EMPTY, args.trials, args.seed)?;
            if let Some(path) = &args.trajectory {
                let t = run_continuous(&r, args.horizon, Subset::EMPTY, &mut sample_rng)?;
                write_continuous_csv(&t, BufWriter::new(File::create(path)?))?;
            }
            SimulationReport {
                tool: tool_info(),
                mode: "continuous",
                n,
                seed: args.seed,
                trials: args.trials,
                tolerance: args.tolerance,
                steps: None,
                horizon: Some(args.horizon),
                transition: None,
                marginal: marginal(&empirical, &exact),
                collection_time: None,
                trajectory,
            }
        }
    };
    let stdout = match args.output {
        OutputFormat::Json => json_string(&report),
        OutputFormat::Text => render_text(&report),
    };
    Ok(Outcome {
        code: EXIT_OK,
        stdout,
    })
}

pub fn render_text(report: &SimulationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} {}", report.tool.name, report.tool.version);
    let _ = writeln!(
        s,
        "mode: {}, n = {}, trials = {}, seed = {}",
        report.mode, report.n, report.trials, report.seed
    );
    match (report.steps, report.horizon) {
        (Some(steps), _) => {
            let _ = writeln!(s, "law of X_{steps} from the empty set");
        }
        (_, Some(h)) => {
            let _ = writeln!(s, "law of Y_t at t = {h} from the empty set");
        }
        _ => {}
    }
    let width = report
        .marginal
        .exact
        .iter()
        .map(|e| Subset::from_mask(e.mask).to_string().len())
        .max()
        .unwrap_or(2)
        .max(6);
    let _ = writeln!(s, "{:<width$}  {:>12}  {:>12}", "subset", "empirical", "exact");
    for (e, x) in report.marginal.empirical.iter().zip(&report.marginal.exact) {
        let _ = writeln!(
            s,
            "{:<width$}  {:>12.6}  {:>12.6}",
            Subset::from_mask(e.mask).to_string(),
            e.value,
            x.value
        );
    }
    let _ = writeln!(s, "max deviation of the law: {:e}", report.marginal.max_deviation);
    if let Some(t) = &report.transition {
        let _ = writeln!(
            s,
            "max deviation of the one-step matrix ({} draws per row): {:e}",
            t.trials_per_row, t.max_deviation
        );
    }
    if let Some(c) = &report.collection_time {
        let _ = writeln!(
            s,
            "collection time: mean {:.4} (s.e. {:.4}), median {}, p95 {}, max {}",
            c.mean, c.std_error, c.median, c.p95, c.max
        );
    }
    if let Some(path) = &report.trajectory {
        let _ = writeln!(s, "sample trajectory written to {path}");
    }
    s
}
