use coupon_embed::algebra::semigroup_params;
use coupon_embed::embedding::{embeddability_verdict, Outcome as VerdictOutcome};
use coupon_embed::lattice::subsets_by_cardinality;
use coupon_embed::RateVector;
use serde::Serialize;

use crate::spec::{Model, ModelSpec};
use crate::{
    by_cardinality, json_string, tool_info, CliError, Outcome, SemigroupArgs, SubsetValue,
    TableFormat, ToolInfo, EXIT_NOT_EMBEDDABLE, EXIT_OK, EXIT_SINGULAR,
};

/// Largest number of grid intervals accepted by `--grid`.
pub const MAX_GRID_STEPS: usize = 1_000_000;

/// The generator parameters of a model: given directly, or the logarithm of an
/// embeddable distribution.
pub fn generator_of(model: &Model, tol: f64) -> Result<RateVector, CliError> {
    if let Some(r) = model.given_rates() {
        return Ok(r.clone());
    }
    let verdict = embeddability_verdict(model.distribution(), tol);
    match verdict.outcome {
        VerdictOutcome::Embeddable => Ok(verdict.generator_rates().expect("embeddable")),
        VerdictOutcome::NotEmbeddable => Err(CliError::with_code(
            EXIT_NOT_EMBEDDABLE,
            format!(
                "distribution is not embeddable; negative rates at {}",
                verdict
                    .witnesses
                    .iter()
                    .map(|k| k.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            ),
        )),
        VerdictOutcome::SingularNotEmbeddable => Err(CliError::with_code(
            EXIT_SINGULAR,
            "distribution is not embeddable: p_empty = 0 makes M_p singular",
        )),
    }
}

/// Parses `t0..t1:steps` into `steps + 1` evenly spaced times.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::input(format!("--grid expects t0..t1:steps, got {text:?}"));
    let (range, steps) = text.split_once(':').ok_or_else(bad)?;
    let (t0, t1) = range.split_once("..").ok_or_else(bad)?;
    let t0: f64 = t0.trim().parse().map_err(|_| bad())?;
    let t1: f64 = t1.trim().parse().map_err(|_| bad())?;
    let steps: usize = steps.trim().parse().map_err(|_| bad())?;
    if steps == 0 || steps > MAX_GRID_STEPS || !(t0.is_finite() && t1.is_finite()) || t1 < t0 {
        return Err(bad());
    }
    Ok((0..=steps)
        .map(|i| t0 + (t1 - t0) * i as f64 / steps as f64)
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct SemigroupRow {
    pub t: f64,
    pub p: Vec<SubsetValue>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SemigroupTable {
    pub tool: ToolInfo,
    pub tolerance: f64,
    pub n: usize,
    pub rates: Vec<SubsetValue>,
    pub rows: Vec<SemigroupRow>,
}

/// `p(t)` for `t = 0` and every requested time, in increasing order.
pub fn table(r: &RateVector, times: &[f64], tol: f64) -> Result<SemigroupTable, CliError> {
    let mut all = vec![0.0];
    for &t in times {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(CliError::input(format!("time {t} must be finite and >= 0")));
        }
        all.push(t);
    }
    all.sort_by(f64::total_cmp);
    all.dedup();
    let rows = all
        .into_iter()
        .map(|t| {
            let p = semigroup_params(r, t)?;
            Ok(SemigroupRow {
                t,
                p: by_cardinality(p.probs()),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(SemigroupTable {
        tool: tool_info(),
        tolerance: tol,
        n: r.n(),
        rates: by_cardinality(r.rates()),
        rows,
    })
}

pub fn render_csv(table: &SemigroupTable) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain(subsets_by_cardinality(table.n).into_iter().map(|k| format!("p{k}")))
        .collect();
    let csv_err = |e: csv::Error| CliError::input(format!("csv output failed: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    for row in &table.rows {
        let record: Vec<String> = std::iter::once(row.t.to_string())
            .chain(row.p.iter().map(|e| format!("{:.17e}", e.value)))
            .collect();
        w.write_record(&record).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::input(format!("csv output failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn run(args: &SemigroupArgs) -> Result<Outcome, CliError> {
    let model = ModelSpec::read(&args.spec)?.validate()?;
    let mut times = args.times.clone();
    if let Some(grid) = &args.grid {
        times.extend(parse_grid(grid)?);
    }
    if times.is_empty() {
        return Err(CliError::input("give at least one --time or a --grid"));
    }
    let r = generator_of(&model, args.tolerance)?;
    let table = table(&r, &times, args.tolerance)?;
    let stdout = match args.output {
        TableFormat::Csv => render_csv(&table)?,
        TableFormat::Json => json_string(&table),
    };
    Ok(Outcome {
        code: EXIT_OK,
        stdout,
    })
}
