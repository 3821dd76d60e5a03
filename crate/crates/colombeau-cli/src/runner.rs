//! Scenario execution: build objects from a parsed scenario, run the
//! requested checks, and write `report.json` plus CSV series into the
//! output directory.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use colombeau::catalog::{build_kernel, build_net};
use colombeau::hermite::{
    coefficient_decay_check, expand, verify_inclusion_bound, DampingExponent, HermiteExpansion,
};
use colombeau::operators::{
    kernel_growth_check, verify_composition, GeneralizedOperator, KernelGrowthReport,
    QuadratureSpec,
};
use colombeau::seminorms::{
    classify_power_growth, classify_tempered, classify_ultra, GrowthReport, MuSpec, NuSpec, Verdict,
};

use crate::report::{self, cell, num, pairs};
use crate::scenario::{
    resolve_box, resolve_grid, ClassifyScenario, ClassifySpec, ComposeScenario, ExpmapScenario,
    HermiteScenario,
};

/// Command-line overrides applied on top of scenario settings.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    /// Gauss–Hermite node count for operator quadrature.
    pub nodes: Option<usize>,
    /// Replace the scenario grid with 2^{−1} … 2^{−K}.
    pub eps_levels: Option<usize>,
    /// Replace the scenario tolerance.
    pub tol: Option<f64>,
}

/// A failure before or during a run, split by who has to act on it: a
/// configuration error means the scenario or invocation is wrong, an
/// internal error means the computation itself gave up.
#[derive(Debug)]
pub enum RunError {
    Config(anyhow::Error),
    Internal(anyhow::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Internal(_) => 3,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "configuration error: {e:#}"),
            RunError::Internal(e) => write!(f, "internal error: {e:#}"),
        }
    }
}

fn lib_err(e: colombeau::Error) -> RunError {
    match &e {
        colombeau::Error::NonFiniteSample { .. } | colombeau::Error::Budget { .. } => {
            RunError::Internal(e.into())
        }
        _ => RunError::Config(e.into()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Classify,
    Compose,
    Expmap,
    Hermite,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Classify => "classify",
            CommandKind::Compose => "compose",
            CommandKind::Expmap => "expmap",
            CommandKind::Hermite => "hermite",
        }
    }
}

struct CmdOutcome {
    title: Option<String>,
    pass: bool,
    body: Value,
}

/// Run one subcommand end to end. Returns whether the scenario's checks
/// passed; the detailed report lands in `<out>/report.json`.
pub fn run(
    kind: CommandKind,
    scenario_path: &Path,
    out_dir: &Path,
    overrides: &Overrides,
) -> Result<bool, RunError> {
    let bytes = fs::read(scenario_path).map_err(|e| {
        RunError::Config(anyhow::anyhow!("reading {}: {e}", scenario_path.display()))
    })?;
    let sha = report::sha256_hex(&bytes);
    fs::create_dir_all(out_dir)
        .map_err(|e| RunError::Config(anyhow::anyhow!("creating {}: {e}", out_dir.display())))?;
    let outcome = match kind {
        CommandKind::Classify => run_classify(parse(&bytes)?, overrides, out_dir)?,
        CommandKind::Compose => run_compose(parse(&bytes)?, overrides, out_dir)?,
        CommandKind::Expmap => run_expmap(parse(&bytes)?, overrides, out_dir)?,
        CommandKind::Hermite => run_hermite(parse(&bytes)?, overrides, out_dir)?,
    };
    let envelope = report::envelope(
        kind.name(),
        &sha,
        outcome.title.as_deref(),
        outcome.pass,
        outcome.body,
    );
    report::write_json(&out_dir.join("report.json"), &envelope).map_err(RunError::Config)?;
    Ok(outcome.pass)
}

fn parse<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, RunError> {
    serde_json::from_slice(bytes)
        .map_err(|e| RunError::Config(anyhow::anyhow!("scenario parse: {e}")))
}

fn run_classify(
    scn: ClassifyScenario,
    overrides: &Overrides,
    out: &Path,
) -> Result<CmdOutcome, RunError> {
    let grid = resolve_grid(&scn.grid, overrides.eps_levels).map_err(lib_err)?;
    let bounds = resolve_box(&scn.sampling).map_err(lib_err)?;
    let net = build_net(&scn.net, &grid, scn.dim).map_err(lib_err)?;
    let (mode, growth, conditions): (&str, GrowthReport, Option<Value>) = match &scn.classify {
        ClassifySpec::Power { q, l, p_max } => {
            let spec = MuSpec::new(*q, *l).map_err(lib_err)?;
            let growth = classify_power_growth(&net, &spec, &bounds, *p_max).map_err(lib_err)?;
            ("power", growth, None)
        }
        ClassifySpec::Tempered { l, p_max } => {
            let growth = classify_tempered(&net, *l, &bounds, *p_max).map_err(lib_err)?;
            ("tempered", growth, None)
        }
        ClassifySpec::Ultra {
            weights,
            monomial_weights,
            envelope_weights,
            h,
            cap,
            ultra_type,
        } => {
            let m_seq = weights.build().map_err(lib_err)?;
            let mono = match monomial_weights {
                Some(w) => w.build().map_err(lib_err)?,
                None => m_seq.clone(),
            };
            let env = match envelope_weights {
                Some(w) => w.build().map_err(lib_err)?,
                None => m_seq.clone(),
            };
            let conditions = if m_seq.p_max() >= 16 {
                let report = m_seq.check_conditions().map_err(lib_err)?;
                Some(serde_json::to_value(report).map_err(|e| RunError::Internal(e.into()))?)
            } else {
                None
            };
            let spec = NuSpec::new(*h, m_seq, mono, *cap).map_err(lib_err)?;
            let growth = classify_ultra(&net, &spec, &env, *ultra_type, &bounds).map_err(lib_err)?;
            ("ultra", growth, conditions)
        }
    };
    let rows: Vec<Vec<String>> = growth
        .seminorm_values
        .iter()
        .map(|&(e, v)| vec![cell(e), cell(v)])
        .collect();
    report::write_csv(&out.join("seminorms.csv"), &["eps", "seminorm"], &rows)
        .map_err(RunError::Config)?;
    let pass = growth.verdict != Verdict::Inconclusive;
    let body = json!({
        "mode": mode,
        "dim": scn.dim,
        "verdict": growth.verdict.to_string(),
        "growth": growth.to_json(),
        "conditions": conditions,
    });
    Ok(CmdOutcome {
        title: scn.title,
        pass,
        body,
    })
}

fn growth_check_json(g: &KernelGrowthReport) -> Value {
    json!({
        "series": pairs(&g.series),
        "slope": num(g.slope),
        "r2": num(g.r2),
        "stated_exponent": num(g.stated_exponent),
        "corrected_exponent": num(g.corrected_exponent),
        "exceeds_stated": g.exceeds_stated,
        "within_corrected": g.within_corrected,
        "boundary_flag": g.boundary_flag,
    })
}

fn run_compose(
    scn: ComposeScenario,
    overrides: &Overrides,
    out: &Path,
) -> Result<CmdOutcome, RunError> {
    let grid = resolve_grid(&scn.grid, overrides.eps_levels).map_err(lib_err)?;
    let n = scn.dim;
    let nodes = overrides.nodes.unwrap_or(scn.nodes);
    let tolerance = overrides.tol.unwrap_or(scn.tolerance);
    let quad = QuadratureSpec::new(nodes).map_err(lib_err)?;
    let outer = GeneralizedOperator::new(
        build_kernel(&scn.outer, &grid, n).map_err(lib_err)?,
        quad.clone(),
    );
    let inner =
        GeneralizedOperator::new(build_kernel(&scn.inner, &grid, n).map_err(lib_err)?, quad);
    let input = build_net(&scn.input, &grid, n).map_err(lib_err)?;
    grid.find(scn.epsilon).map_err(lib_err)?;
    let points = scn.points.resolve(n).map_err(lib_err)?;
    let comp = verify_composition(&outer, &inner, &input, scn.epsilon, &points, tolerance)
        .map_err(lib_err)?;

    let growth = match &scn.growth_check {
        Some(gc) => {
            let bounds = resolve_box(&scn.sampling).map_err(lib_err)?;
            let target = match scn.power {
                Some(k) => outer.power(k).map_err(lib_err)?,
                None => GeneralizedOperator::compose(&outer, &inner).map_err(lib_err)?,
            };
            Some(
                kernel_growth_check(target.kernel(), gc.q1, gc.q2, &bounds, gc.with_derivatives)
                    .map_err(lib_err)?,
            )
        }
        None => None,
    };

    let mut header: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    header.extend(["composed", "chained", "discrepancy"].map(String::from));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = comp
        .per_point
        .iter()
        .map(|(p, lhs, rhs, d)| {
            p.iter()
                .map(|&c| cell(c))
                .chain([cell(*lhs), cell(*rhs), cell(*d)])
                .collect()
        })
        .collect();
    report::write_csv(&out.join("discrepancies.csv"), &header_refs, &rows)
        .map_err(RunError::Config)?;
    if let Some(g) = &growth {
        let rows: Vec<Vec<String>> = g
            .series
            .iter()
            .map(|&(e, v)| vec![cell(e), cell(v)])
            .collect();
        report::write_csv(&out.join("growth.csv"), &["eps", "sup"], &rows)
            .map_err(RunError::Config)?;
    }

    let pass = comp.pass && growth.as_ref().map_or(true, |g| g.within_corrected);
    let body = json!({
        "dim": n,
        "epsilon": num(scn.epsilon),
        "nodes": nodes,
        "tolerance": num(tolerance),
        "composition": {
            "max_discrepancy": num(comp.max_discrepancy),
            "pass": comp.pass,
            "warnings": comp.warnings,
            "per_point": comp.per_point.iter().map(|(p, lhs, rhs, d)| json!({
                "point": p,
                "composed": num(*lhs),
                "chained": num(*rhs),
                "discrepancy": num(*d),
            })).collect::<Vec<_>>(),
        },
        "growth": growth.as_ref().map(growth_check_json),
    });
    Ok(CmdOutcome {
        title: scn.title,
        pass,
        body,
    })
}

fn run_expmap(
    scn: ExpmapScenario,
    overrides: &Overrides,
    out: &Path,
) -> Result<CmdOutcome, RunError> {
    let grid = resolve_grid(&scn.grid, overrides.eps_levels).map_err(lib_err)?;
    let n = scn.dim;
    let nodes = overrides.nodes.unwrap_or(scn.nodes);
    let tolerance = overrides.tol.unwrap_or(scn.tolerance);
    let mut quad = QuadratureSpec::new(nodes).map_err(lib_err)?;
    if let Some(budget) = scn.budget {
        quad = quad.with_budget(budget);
    }
    let op = GeneralizedOperator::new(build_kernel(&scn.kernel, &grid, n).map_err(lib_err)?, quad);
    let input = build_net(&scn.input, &grid, n).map_err(lib_err)?;
    grid.find(scn.epsilon).map_err(lib_err)?;
    let points = scn.points.resolve(n).map_err(lib_err)?;

    let mut rows = Vec::new();
    let mut body_points = Vec::with_capacity(points.len());
    let mut all_converged = true;
    for (idx, x) in points.iter().enumerate() {
        let o = op
            .exp_apply(&input, scn.epsilon, x, scn.k_max, tolerance)
            .map_err(lib_err)?;
        all_converged &= o.converged;
        for (k, t) in o.terms.iter().enumerate() {
            rows.push(vec![idx.to_string(), (k + 1).to_string(), cell(*t)]);
        }
        body_points.push(json!({
            "point": x,
            "value": num(o.value),
            "identity_term": num(o.identity_term),
            "terms_used": o.terms.len(),
            "converged": o.converged,
            "last_term": num(o.last_term),
        }));
    }
    report::write_csv(&out.join("terms.csv"), &["point_index", "k", "term"], &rows)
        .map_err(RunError::Config)?;

    let body = json!({
        "dim": n,
        "epsilon": num(scn.epsilon),
        "nodes": nodes,
        "k_max": scn.k_max,
        "tolerance": num(tolerance),
        "points": body_points,
    });
    Ok(CmdOutcome {
        title: scn.title,
        pass: all_converged,
        body,
    })
}

fn run_hermite(
    scn: HermiteScenario,
    overrides: &Overrides,
    out: &Path,
) -> Result<CmdOutcome, RunError> {
    let grid = resolve_grid(&scn.grid, overrides.eps_levels).map_err(lib_err)?;
    let expansion = HermiteExpansion::new(scn.coefficients.clone()).map_err(lib_err)?;
    let weights = scn.weights.build().map_err(lib_err)?;
    let mut notes: Vec<String> = Vec::new();

    let decay =
        coefficient_decay_check(&expansion, &weights, scn.h, scn.direction).map_err(lib_err)?;
    let margin_rows: Vec<Vec<String>> = expansion
        .coefficients()
        .iter()
        .zip(&decay.margins)
        .enumerate()
        .map(|(i, (&b, &m))| vec![i.to_string(), cell(b), cell(m)])
        .collect();
    report::write_csv(
        &out.join("margins.csv"),
        &["n", "coefficient", "margin"],
        &margin_rows,
    )
    .map_err(RunError::Config)?;

    let conditions = if scn.conditions {
        if weights.p_max() >= 16 {
            let report = weights.check_conditions().map_err(lib_err)?;
            Some(serde_json::to_value(report).map_err(|e| RunError::Internal(e.into()))?)
        } else {
            notes.push(format!(
                "condition checks skipped: sequence stores only p ≤ {}",
                weights.p_max()
            ));
            None
        }
    } else {
        None
    };

    let inclusion = if scn.inclusion {
        if scn.convention == DampingExponent::SquaredValue {
            let inc = verify_inclusion_bound(&expansion, &weights, scn.h, &grid).map_err(lib_err)?;
            let rows: Vec<Vec<String>> = inc
                .c_eps
                .iter()
                .map(|&(e, c)| vec![cell(e), cell(c)])
                .collect();
            report::write_csv(&out.join("inclusion.csv"), &["eps", "c_eps"], &rows)
                .map_err(RunError::Config)?;
            Some(inc)
        } else {
            notes.push(
                "inclusion check skipped: only defined for the squared_value convention".into(),
            );
            None
        }
    } else {
        None
    };

    let roundtrip = match &scn.roundtrip {
        Some(rt) => {
            let field = expansion.field();
            let (recovered, proj) = expand(&field, rt.n_max, rt.subdivisions).map_err(lib_err)?;
            let rt_tol = overrides.tol.unwrap_or(1e-8);
            let original = expansion.coefficients();
            let got = recovered.coefficients();
            let len = original.len().max(got.len());
            let mut max_delta = 0.0f64;
            for i in 0..len {
                let a = original.get(i).copied().unwrap_or(0.0);
                let b = got.get(i).copied().unwrap_or(0.0);
                max_delta = max_delta.max((a - b).abs());
            }
            let rt_pass = max_delta <= rt_tol;
            Some(json!({
                "n_max": rt.n_max,
                "max_delta": num(max_delta),
                "projection_delta": num(proj.max_delta),
                "half_width": num(proj.half_width),
                "decay_warning": proj.decay_warning,
                "tolerance": num(rt_tol),
                "pass": rt_pass,
            }))
        }
        None => None,
    };

    let pass = decay.pass
        && inclusion
            .as_ref()
            .map_or(true, |i| i.finite && i.nondecreasing)
        && roundtrip
            .as_ref()
            .map_or(true, |rt| rt["pass"] == Value::Bool(true));
    let body = json!({
        "degree": expansion.degree(),
        "weights": weights.name(),
        "h": num(scn.h),
        "direction": serde_json::to_value(scn.direction).map_err(|e| RunError::Internal(e.into()))?,
        "convention": serde_json::to_value(scn.convention).map_err(|e| RunError::Internal(e.into()))?,
        "decay": {
            "log_c": num(decay.log_c),
            "argmax": decay.argmax,
            "violations": decay.violations,
            "pass": decay.pass,
            "margins": decay.margins.iter().map(|&m| num(m)).collect::<Vec<_>>(),
        },
        "conditions": conditions,
        "inclusion": inclusion.as_ref().map(|i| json!({
            "finite": i.finite,
            "nondecreasing": i.nondecreasing,
            "sup": num(i.sup),
            "c_eps": pairs(&i.c_eps),
        })),
        "roundtrip": roundtrip,
        "notes": notes,
    });
    Ok(CmdOutcome {
        title: scn.title,
        pass,
        body,
    })
}
