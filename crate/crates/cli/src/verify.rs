//! Cross-checks between independent computation routes, aggregated by check name.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use coupon_embed::algebra::{exp_closed, exp_series, lattice_norm, semigroup_params, star, ModuliVector};
use coupon_embed::embedding::{
    embeddability_verdict, pair_condition, partition_log_param, DEFAULT_VERDICT_TOL,
    MAX_PARTITION_FORMULA_SIZE,
};
use coupon_embed::lattice::{mobius_subsets, subsets_by_cardinality, zeta_subsets};
use coupon_embed::model::{
    cg_from_params, cm_from_params, eigenbasis, eigenvalues_cm, params_from_cm, CouponDistribution,
};
use coupon_embed::oracle::{exp_oracle, mat_mul, matlog_oracle};
use coupon_embed::random::{random_distribution, random_distribution_with_empty, random_embeddable};
use coupon_embed::sim::RngSeed;
use coupon_embed::Subset;
use serde::Serialize;

use crate::spec::ModelSpec;
use crate::{
    json_string, tool_info, CliError, Level, Outcome, OutputFormat, ToolInfo, VerifyArgs, EXIT_OK,
    EXIT_VERIFY_FAILED,
};

/// Largest `n` for checks that build dense `2^n × 2^n` matrices.
pub const DENSE_CHECK_MAX_N: usize = 6;
/// Largest `n` accepted by `--random`.
pub const RANDOM_MAX_N: usize = 12;
/// Largest instance count accepted by `--random`.
pub const RANDOM_MAX_COUNT: u64 = 1_000_000;
/// Size of the perturbation written into the generator by `--inject-fault`.
pub const FAULT_SIZE: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub threshold: f64,
    pub instances: u64,
    pub max_residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub tool: ToolInfo,
    pub level: &'static str,
    pub instances: u64,
    pub fault_injected: bool,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

#[derive(Default)]
struct Ledger {
    checks: BTreeMap<&'static str, CheckResult>,
}

impl Ledger {
    fn record(&mut self, name: &'static str, threshold: f64, residual: f64) {
        let entry = self.checks.entry(name).or_insert(CheckResult {
            name,
            threshold,
            instances: 0,
            max_residual: 0.0,
            passed: true,
        });
        entry.instances += 1;
        if residual.is_nan() || residual > entry.max_residual {
            entry.max_residual = residual;
        }
        if residual.is_nan() || residual > threshold {
            entry.passed = false;
        }
    }
}

fn bool_residual(ok: bool) -> f64 {
    if ok {
        0.0
    } else {
        1.0
    }
}

fn check_instance(p: &CouponDistribution, level: Level, inject_fault: bool, ledger: &mut Ledger) {
    let n = p.n();
    let full = level == Level::Full;
    let x = p.probs();

    ledger.record(
        "zeta_mobius_round_trip",
        1e-12,
        mobius_subsets(&zeta_subsets(x)).max_abs_diff(x),
    );
    if n <= DENSE_CHECK_MAX_N {
        let m = cm_from_params(p).expect("small n");
        let residual = match params_from_cm(m.as_dense(), 1e-12) {
            Ok(back) => back.probs().max_abs_diff(x),
            Err(_) => f64::INFINITY,
        };
        ledger.record("cm_params_round_trip", 1e-12, residual);

        let v = eigenbasis(n).expect("small n");
        let lambda = eigenvalues_cm(p);
        let mv = mat_mul(m.as_dense(), v.as_dense()).expect("same size");
        let dim = 1usize << n;
        let mut worst: f64 = 0.0;
        for i in 0..dim {
            for k in 0..dim {
                let expected = v.as_dense().get(i, k) * lambda.get(Subset::from_mask(k as u32));
                worst = worst.max((mv.get(i, k) - expected).abs());
            }
        }
        ledger.record("eigenvectors", 1e-12, worst);
    }

    let verdict = embeddability_verdict(p, DEFAULT_VERDICT_TOL);
    let Some(r) = verdict.rates.clone() else {
        return;
    };
    let r_mod = ModuliVector::from(r.clone());
    let back = exp_closed(&r_mod);
    ledger.record("exp_of_log_params", 1e-10, back.values().max_abs_diff(x));

    let half = exp_closed(&r_mod.scaled(0.5));
    let square = star(&half, &half).expect("same n");
    ledger.record("square_root_star", 1e-10, square.values().max_abs_diff(x));

    let norm = lattice_norm(&r_mod);
    if norm <= 30.0 {
        let threshold = 1e-10 * norm.exp().max(1.0);
        let residual = match exp_series(&r_mod) {
            Ok(series) => series.values().max_abs_diff(back.values()),
            Err(_) => f64::INFINITY,
        };
        ledger.record("exp_closed_vs_series", threshold, residual);
    }

    let max_k = if full { 6 } else { 4 }.min(MAX_PARTITION_FORMULA_SIZE);
    let mut worst: f64 = 0.0;
    for k in subsets_by_cardinality(n) {
        if k.is_empty() {
            continue;
        }
        if k.len() > max_k {
            break;
        }
        let via_partitions = partition_log_param(p, k).unwrap_or(f64::NAN);
        let diff = (via_partitions - r.get(k)).abs();
        worst = if diff.is_nan() { f64::NAN } else { worst.max(diff) };
    }
    ledger.record("partition_vs_mobius", 1e-10, worst);

    let mut agree = true;
    for i in 1..=n {
        for j in i + 1..=n {
            let c = pair_condition(p, i, j).expect("valid pair");
            let rij = r.get(Subset::singleton(i).union(Subset::singleton(j)));
            if c.margin.abs() > 1e-12 && (c.margin > 0.0) != (rij > 0.0) {
                agree = false;
            }
        }
    }
    if n >= 2 {
        ledger.record("pair_condition_sign", 0.0, bool_residual(agree));
    }

    if let Some(g) = verdict.generator_rates() {
        let half = semigroup_params(&g, 0.5).expect("generator");
        let one = semigroup_params(&g, 1.0).expect("generator");
        let composed = star(&ModuliVector::from(half.clone()), &ModuliVector::from(half))
            .expect("same n");
        ledger.record(
            "semigroup_law",
            1e-10,
            composed.values().max_abs_diff(one.probs()),
        );
    }

    if n <= DENSE_CHECK_MAX_N {
        let generator = verdict.generator_rates().unwrap_or_else(|| r.clone());
        let mut big_r = cg_from_params(&generator).expect("small n").into_dense();
        if inject_fault {
            big_r.add_to(0, (1 << n) - 1, FAULT_SIZE);
        }
        let m = cm_from_params(p).expect("small n");
        ledger.record(
            "generator_exponential",
            1e-8,
            exp_oracle(&big_r).max_abs_diff(m.as_dense()),
        );

        let log_regime = p.p_empty() >= 0.3 && (full || n <= 4);
        if log_regime {
            let residual = match matlog_oracle(m.as_dense()) {
                Ok(log) => {
                    let via_params = cg_from_params(&r).expect("small n");
                    log.max_abs_diff(via_params.as_dense())
                }
                Err(_) => f64::INFINITY,
            };
            ledger.record("matlog_two_path", 1e-7, residual);
        }
    }
}

fn random_instance(n: usize, seed: u64, index: u64) -> Result<CouponDistribution, CliError> {
    let mut rng = RngSeed::new(seed, index).rng();
    let p = match index % 3 {
        0 => random_embeddable(n, 0.05, &mut rng)?,
        1 => random_distribution_with_empty(n, 0.3, &mut rng)?,
        _ => random_distribution(n, &mut rng)?,
    };
    Ok(p)
}

pub fn verify(
    instances: &[CouponDistribution],
    level: Level,
    inject_fault: bool,
) -> VerifyReport {
    let mut ledger = Ledger::default();
    for p in instances {
        check_instance(p, level, inject_fault, &mut ledger);
    }
    if inject_fault && !ledger.checks.contains_key("generator_exponential") {
        // Nothing to corrupt: the self-test must still fail.
        ledger.record("generator_exponential", 1e-8, f64::INFINITY);
    }
    let checks: Vec<CheckResult> = ledger.checks.into_values().collect();
    let passed = checks.iter().all(|c| c.passed);
    VerifyReport {
        tool: tool_info(),
        level: match level {
            Level::Quick => "quick",
            Level::Full => "full",
        },
        instances: instances.len() as u64,
        fault_injected: inject_fault,
        checks,
        passed,
    }
}

pub fn render_text(report: &VerifyReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} {}: {} instance(s), level {}{}",
        report.tool.name,
        report.tool.version,
        report.instances,
        report.level,
        if report.fault_injected { ", fault injected" } else { "" }
    );
    let width = report.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in &report.checks {
        let _ = writeln!(
            s,
            "{}  {:<width$}  residual {:>10.3e}  threshold {:>8.1e}  instances {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.max_residual,
            c.threshold,
            c.instances
        );
    }
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        let _ = writeln!(s, "all checks passed");
    } else {
        let _ = writeln!(s, "failed: {}", failed.join(", "));
    }
    s
}

pub fn run(args: &VerifyArgs) -> Result<Outcome, CliError> {
    let instances = match (&args.spec, &args.random) {
        (Some(path), None) => vec![ModelSpec::read(path)?.validate()?.distribution().clone()],
        (None, Some(v)) => {
            let (n, count, seed) = (v[0] as usize, v[1], v[2]);
            if n == 0 || n > RANDOM_MAX_N {
                return Err(CliError::input(format!("--random N must be in 1..={RANDOM_MAX_N}")));
            }
            if count == 0 || count > RANDOM_MAX_COUNT {
                return Err(CliError::input(format!(
                    "--random COUNT must be in 1..={RANDOM_MAX_COUNT}"
                )));
            }
            (0..count)
                .map(|i| random_instance(n, seed, i))
                .collect::<Result<Vec<_>, _>>()?
        }
        _ => return Err(CliError::input("give a spec file or --random N COUNT SEED")),
    };
    let report = verify(&instances, args.level, args.inject_fault);
    let stdout = match args.output {
        OutputFormat::Json => json_string(&report),
        OutputFormat::Text => render_text(&report),
    };
    Ok(Outcome {
        code: if report.passed { EXIT_OK } else { EXIT_VERIFY_FAILED },
        stdout,
    })
}
