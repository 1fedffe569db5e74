use std::fmt::Write as _;

use coupon_embed::algebra::{exp_closed, ModuliVector};
use coupon_embed::embedding::{
    avoidance_probs, correlation_report, embeddability_verdict_with, pair_conditions,
    Outcome as VerdictOutcome, PairCondition, MAX_PARTITION_FORMULA_SIZE,
};
use coupon_embed::lattice::zeta_subsets;
use coupon_embed::model::{cg_from_params, cm_from_params};
use coupon_embed::oracle::exp_oracle;
use coupon_embed::{Subset, SubsetVector};
use serde::Serialize;

use crate::spec::{Model, ModelSpec};
use crate::{
    by_cardinality, json_string, tool_info, AnalyzeArgs, CliError, Outcome, OutputFormat,
    SubsetRef, SubsetValue, ToolInfo, EXIT_NOT_EMBEDDABLE, EXIT_OK, EXIT_SINGULAR,
};

/// Largest `n` for which the report includes the dense `exp(R)` residual.
pub const MATRIX_RESIDUAL_MAX_N: usize = 6;

#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub verdict: f64,
    pub singular: f64,
    pub matrix_residual_max_n: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Residual {
    /// `max |Exp(r) − p|` over the parameter vector.
    pub params: f64,
    /// `max |exp(R) − M_p|` from the dense oracle; only for small `n`.
    pub matrix: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub tool: ToolInfo,
    pub tolerances: Tolerances,
    pub n: usize,
    pub input: &'static str,
    pub verdict: VerdictOutcome,
    pub witnesses: Vec<SubsetRef>,
    pub boundary_flags: Vec<SubsetRef>,
    pub spectrum_simple: bool,
    pub p: Vec<SubsetValue>,
    pub q: Vec<SubsetValue>,
    pub lambda: Vec<SubsetValue>,
    pub r: Option<Vec<SubsetValue>>,
    pub mu: Option<Vec<SubsetValue>>,
    pub pairs: Vec<PairCondition>,
    pub correlations: Option<Vec<SubsetValue>>,
    pub residual: Option<Residual>,
}

impl AnalysisReport {
    pub fn exit_code(&self) -> i32 {
        match self.verdict {
            VerdictOutcome::Embeddable => EXIT_OK,
            VerdictOutcome::NotEmbeddable => EXIT_NOT_EMBEDDABLE,
            VerdictOutcome::SingularNotEmbeddable => EXIT_SINGULAR,
        }
    }
}

fn input_kind(model: &Model) -> &'static str {
    match model {
        Model::Distribution(_) => "distribution",
        Model::Independent { .. } => "independent",
        Model::Rates { .. } => "rates",
    }
}

pub fn analyze(
    model: &Model,
    tol: f64,
    singular_tol: f64,
    correlations: Option<usize>,
) -> Result<AnalysisReport, CliError> {
    if [tol, singular_tol].iter().any(|t| t.is_nan() || *t < 0.0) {
        return Err(CliError::input("tolerances must be nonnegative"));
    }
    if let Some(size) = correlations {
        if size == 0 || size > MAX_PARTITION_FORMULA_SIZE {
            return Err(CliError::input(format!(
                "--correlations takes a size in 1..={MAX_PARTITION_FORMULA_SIZE}"
            )));
        }
    }
    let p = model.distribution();
    let n = p.n();
    let verdict = embeddability_verdict_with(p, tol, singular_tol);
    let lambda = zeta_subsets(p.probs());
    let q = avoidance_probs(p);

    let residual = verdict.rates.as_ref().map(|r| {
        let back = exp_closed(&ModuliVector::from(r.clone()));
        let params = back.values().max_abs_diff(p.probs());
        let matrix = (n <= MATRIX_RESIDUAL_MAX_N).then(|| {
            let generator = verdict.generator_rates().unwrap_or_else(|| r.clone());
            let big_r = cg_from_params(&generator).expect("small n");
            let m = cm_from_params(p).expect("small n");
            exp_oracle(big_r.as_dense()).max_abs_diff(m.as_dense())
        });
        Residual { params, matrix }
    });
    let pairs = if verdict.rates.is_some() {
        pair_conditions(p)?
    } else {
        Vec::new()
    };
    let correlations = match correlations {
        Some(size) => Some(
            correlation_report(p, size)?
                .correlations
                .into_iter()
                .map(|c| SubsetValue {
                    mask: c.subset.mask(),
                    elements: c.subset.elements(),
                    value: c.value,
                })
                .collect(),
        ),
        None => None,
    };

    Ok(AnalysisReport {
        tool: tool_info(),
        tolerances: Tolerances {
            verdict: tol,
            singular: singular_tol,
            matrix_residual_max_n: MATRIX_RESIDUAL_MAX_N,
        },
        n,
        input: input_kind(model),
        verdict: verdict.outcome,
        witnesses: verdict.witnesses.iter().map(|&k| k.into()).collect(),
        boundary_flags: verdict.boundary_flags.iter().map(|&k| k.into()).collect(),
        spectrum_simple: verdict.spectrum_simple,
        p: by_cardinality(p.probs()),
        q: by_cardinality(q.values()),
        lambda: by_cardinality(&lambda),
        r: verdict.rates.as_ref().map(|r| by_cardinality(r.rates())),
        mu: verdict
            .rates
            .as_ref()
            .map(|r| by_cardinality(&zeta_subsets(r.rates()))),
        pairs,
        correlations,
        residual,
    })
}

fn subset_list(list: &[SubsetRef]) -> String {
    if list.is_empty() {
        return "none".into();
    }
    list.iter()
        .map(|s| Subset::from_mask(s.mask).to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn verdict_name(v: VerdictOutcome) -> &'static str {
    match v {
        VerdictOutcome::Embeddable => "embeddable",
        VerdictOutcome::NotEmbeddable => "not embeddable",
        VerdictOutcome::SingularNotEmbeddable => "not embeddable (singular: p_empty = 0)",
    }
}

pub fn render_text(report: &AnalysisReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} {}", report.tool.name, report.tool.version);
    let _ = writeln!(s, "n = {}, input: {}", report.n, report.input);
    let _ = writeln!(s, "verdict: {}", verdict_name(report.verdict));
    let _ = writeln!(s, "witnesses (r_K < -{:e}): {}", report.tolerances.verdict, subset_list(&report.witnesses));
    let _ = writeln!(
        s,
        "boundary (|r_K| <= {:e}): {}",
        report.tolerances.verdict,
        subset_list(&report.boundary_flags)
    );
    let _ = writeln!(s, "simple spectrum: {}", if report.spectrum_simple { "yes" } else { "no" });

    let labels: Vec<String> = report
        .p
        .iter()
        .map(|e| Subset::from_mask(e.mask).to_string())
        .collect();
    let width = labels.iter().map(String::len).max().unwrap_or(2).max(6);
    let _ = write!(s, "\n{:<width$}  {:>22}  {:>22}  {:>22}", "subset", "p", "q", "lambda");
    if report.r.is_some() {
        let _ = write!(s, "  {:>22}  {:>22}", "r", "mu");
    }
    s.push('\n');
    for (i, label) in labels.iter().enumerate() {
        let _ = write!(
            s,
            "{label:<width$}  {:>22.15e}  {:>22.15e}  {:>22.15e}",
            report.p[i].value, report.q[i].value, report.lambda[i].value
        );
        if let (Some(r), Some(mu)) = (&report.r, &report.mu) {
            let _ = write!(s, "  {:>22.15e}  {:>22.15e}", r[i].value, mu[i].value);
        }
        s.push('\n');
    }

    if !report.pairs.is_empty() {
        let _ = writeln!(s, "\npair conditions p_empty p_ij - p_i p_j:");
        for c in &report.pairs {
            let _ = writeln!(
                s,
                "  {{{},{}}}  {:>22.15e}  {}",
                c.i,
                c.j,
                c.margin,
                if c.holds { "holds" } else { "fails" }
            );
        }
    }
    if let Some(corr) = &report.correlations {
        let _ = writeln!(s, "\ncorrelation functions C_K:");
        for c in corr {
            let _ = writeln!(s, "  {:<width$}  {:>22.15e}", Subset::from_mask(c.mask).to_string(), c.value);
        }
    }
    if let Some(res) = &report.residual {
        let _ = writeln!(s, "\nresidual max|Exp(r) - p|: {:e}", res.params);
        if let Some(m) = res.matrix {
            let _ = writeln!(s, "residual max|exp(R) - M_p|: {m:e}");
        }
    }
    s
}

pub fn run(args: &AnalyzeArgs) -> Result<Outcome, CliError> {
    let model = ModelSpec::read(&args.spec)?.validate()?;
    let report = analyze(&model, args.tolerance, args.singular_tolerance, args.correlations)?;
    let stdout = match args.output {
        OutputFormat::Json => json_string(&report),
        OutputFormat::Text => render_text(&report),
    };
    Ok(Outcome {
        code: report.exit_code(),
        stdout,
    })
}

/// Values of a report column keyed back into a vector (for tests and tooling).
pub fn column_vector(n: usize, column: &[SubsetValue]) -> SubsetVector {
    let mut v = SubsetVector::zeros(n);
    for e in column {
        v[Subset::from_mask(e.mask)] = e.value;
    }
    v
}
