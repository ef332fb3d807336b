use std::fs;
use std::io::Write;
use std::path::Path;

use num::rational::BigRational;
use num::Zero;
use serde::Serialize;
use serde_json::{json, Value};
use walklab::boundary::FreeBoundary;
use walklab::cache::PowerCache;
use walklab::drift::{drift_from_powers, drift_monte_carlo, entropy_from_powers, max_step_norm, ExactDrift};
use walklab::exec::Workers;
use walklab::gspace::{
    diagonal_ergodicity, factor_map_pf, isometric_factor_witness, product_measure, solve_stationary, FiniteGSpace, WordMeasure,
};
use walklab::metric::{build_ball, check_seminorm_with, BallCache, ClosedFormNorm, WordNorm, DEFAULT_BALL_BUDGET};
use walklab::quasi::{
    check_homomorphism_liouville, check_quasi_harmonicity, compute_fk_sequence, compute_phi, generator_pairs,
    max_lipschitz_excess, FkTable,
};
use walklab::radial::FreeSrwRadial;
use walklab::sampler::SamplerConfig;
use walklab::{ArithmeticMode, Error, FiniteMeasure, GroupElement, GroupId, Result, Weight};

use crate::config::RunConfig;

type Q = BigRational;

/// Split on commas that are not inside brackets.
fn split_top_level(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, c) in text.char_indices() {
        match c {
            '(' | '{' | '[' => depth += 1,
            ')' | '}' | ']' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&text[start..]);
    parts
}

pub fn parse_measure<W: Weight>(group: GroupId, text: &str) -> Result<FiniteMeasure<W>> {
    let text = text.trim();
    if text.eq_ignore_ascii_case("srw") {
        return Ok(FiniteMeasure::simple_random_walk(group));
    }
    let atoms = split_top_level(text)
        .into_iter()
        .map(|part| {
            let (elem, weight) = part
                .rsplit_once(':')
                .ok_or_else(|| Error::Parse(format!("expected ELEMENT:WEIGHT, got '{part}'")))?;
            Ok((group.parse_element(elem)?, W::parse_weight(weight)?))
        })
        .collect::<Result<Vec<_>>>()?;
    FiniteMeasure::from_atoms(group, atoms)
}

fn group_of(cfg: &RunConfig) -> Result<GroupId> {
    cfg.group.parse()
}

/// Closed form where one exists, otherwise a ball table of the given radius.
fn norm_for(cfg: &RunConfig, group: GroupId, radius: u64) -> Result<Box<dyn WordNorm>> {
    if let Ok(n) = ClosedFormNorm::new(group) {
        return Ok(Box::new(n));
    }
    let radius = u32::try_from(radius).map_err(|_| Error::Resource {
        budget: DEFAULT_BALL_BUDGET,
        radius: u32::MAX,
    })?;
    let table = match &cfg.cache_dir {
        Some(dir) => BallCache::new(dir).load_or_build(group, radius, DEFAULT_BALL_BUDGET)?,
        None => build_ball(group, &group.generators(), radius, DEFAULT_BALL_BUDGET)?,
    };
    Ok(Box::new(table))
}

fn powers<W: Weight>(cfg: &RunConfig, mu: &FiniteMeasure<W>, threshold: &W) -> Result<Vec<FiniteMeasure<W>>> {
    match &cfg.cache_dir {
        Some(dir) => PowerCache::new(dir).powers(mu, cfg.n_max, threshold, cfg.workers),
        None => mu.powers(cfg.n_max, threshold, cfg.workers),
    }
}

fn write_series(cfg: &RunConfig, header: &str, rows: &[String]) -> Result<()> {
    if let Some(path) = &cfg.emit_series {
        let mut out = fs::File::create(path)?;
        writeln!(out, "{header}")?;
        for r in rows {
            writeln!(out, "{r}")?;
        }
    }
    Ok(())
}

fn require_mode(cfg: &RunConfig, mode: ArithmeticMode) -> Result<()> {
    if cfg.arithmetic() != mode {
        return Err(Error::Precondition(format!(
            "'{}' runs only in {} mode",
            cfg.command,
            match mode {
                ArithmeticMode::Exact => "exact",
                ArithmeticMode::Float64 => "float",
            }
        )));
    }
    Ok(())
}

fn sampler(cfg: &RunConfig) -> SamplerConfig {
    SamplerConfig {
        seed: cfg.seed,
        trajectories: cfg.trajectories,
        steps: cfg.steps,
        workers: cfg.workers,
    }
}

fn measure_json<W: Weight>(mu: &FiniteMeasure<W>) -> Value {
    Value::Array(
        mu.atoms_by_serialization()
            .iter()
            .map(|(g, w)| json!({"element": g.to_string(), "weight": w.render()}))
            .collect(),
    )
}

macro_rules! by_mode {
    ($cfg:expr, $f:ident) => {
        match $cfg.arithmetic() {
            ArithmeticMode::Exact => $f::<Q>($cfg),
            ArithmeticMode::Float64 => $f::<f64>($cfg),
        }
    };
}

pub fn drift(cfg: &RunConfig) -> Result<Value> {
    by_mode!(cfg, drift_in)
}

fn drift_in<W: Weight>(cfg: &RunConfig) -> Result<Value> {
    let group = group_of(cfg)?;
    let mu = parse_measure::<W>(group, &cfg.measure)?;
    let threshold = W::parse_weight(&cfg.truncation)?;
    let step_radius = mu.support().map(|g| g.word_len().unwrap_or(0)).max().unwrap_or(1).max(1) as u64;
    let mut radius = cfg.n_max as u64 * step_radius;
    if cfg.trajectories > 0 {
        radius = radius.max(cfg.steps as u64 * step_radius);
    }
    let norm = norm_for(cfg, group, radius)?;
    let step = max_step_norm(&mu, norm.as_ref())?;
    let exact = drift_from_powers(&powers(cfg, &mu, &threshold)?, step, norm.as_ref())?;
    let terms = exact.terms();
    write_series(
        cfg,
        "n,a_n,ratio",
        &terms.iter().map(|t| format!("{},{},{}", t.n, t.a_n_value, t.ratio)).collect::<Vec<_>>(),
    )?;
    let monte_carlo = if cfg.trajectories > 0 {
        let checkpoints: Vec<usize> = (0..)
            .map(|i| 1usize << i)
            .take_while(|&n| n < cfg.steps)
            .chain([cfg.steps])
            .collect();
        Some(drift_monte_carlo(&mu, norm.as_ref(), &sampler(cfg), &checkpoints)?)
    } else {
        None
    };
    Ok(json!({
        "measure": measure_json(&mu),
        "terms": terms,
        "certified_bound": exact.certified_bound(),
        "certified_bound_exact": exact.certified_bound_exact().map(|w| w.render()),
        "subadditive": exact.max_subadditivity_excess() <= 0.0,
        "max_subadditivity_excess": finite_or_null(exact.max_subadditivity_excess()),
        "monte_carlo": monte_carlo,
    }))
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub fn entropy(cfg: &RunConfig) -> Result<Value> {
    by_mode!(cfg, entropy_in)
}

fn entropy_in<W: Weight>(cfg: &RunConfig) -> Result<Value> {
    let group = group_of(cfg)?;
    let mu = parse_measure::<W>(group, &cfg.measure)?;
    let threshold = W::parse_weight(&cfg.truncation)?;
    let report = entropy_from_powers(&powers(cfg, &mu, &threshold)?);
    let rates: Vec<f64> = (1..report.entropy.len()).map(|n| report.rate(n)).collect();
    write_series(
        cfg,
        "n,entropy,rate",
        &rates
            .iter()
            .enumerate()
            .map(|(i, r)| format!("{},{},{}", i + 1, report.entropy[i + 1], r))
            .collect::<Vec<_>>(),
    )?;
    Ok(json!({
        "measure": measure_json(&mu),
        "entropy": report.entropy,
        "rates": rates,
        "deficit": report.deficit,
        "estimate": report.estimate,
        "max_subadditivity_excess": finite_or_null(report.max_subadditivity_excess()),
    }))
}

pub fn phi(cfg: &RunConfig) -> Result<Value> {
    by_mode!(cfg, phi_in)
}

fn phi_in<W: Weight>(cfg: &RunConfig) -> Result<Value> {
    let group = group_of(cfg)?;
    let mu = parse_measure::<W>(group, &cfg.measure)?;
    let threshold = W::parse_weight(&cfg.truncation)?;
    if cfg.n_max == 0 {
        return Err(Error::Precondition("phi needs --n-max >= 1".into()));
    }
    let step_radius = mu.support().map(|g| g.word_len().unwrap_or(0)).max().unwrap_or(1).max(1) as u32;
    if cfg.radius < 2 * step_radius {
        return Err(Error::Precondition(format!("phi needs --radius >= {}", 2 * step_radius)));
    }
    let test_radius = cfg.radius - step_radius;
    let norm = norm_for(cfg, group, cfg.radius as u64 + cfg.n_max as u64 * step_radius as u64)?;
    let ball = build_ball(group, &group.generators(), cfg.radius, DEFAULT_BALL_BUDGET)?;
    let eval = ball.elements_within(cfg.radius);
    let test = ball.elements_within(test_radius);

    let srw_free = matches!(group, GroupId::Free { .. }) && mu == FiniteMeasure::simple_random_walk(group);
    let (fks, drift): (Vec<FkTable<W>>, ExactDrift<W>) = if srw_free && threshold.is_zero() {
        let rad = FreeSrwRadial::<W>::new(group, cfg.n_max)?;
        (rad.fk_sequence(cfg.n_max, &eval)?, rad.drift())
    } else {
        let fks = compute_fk_sequence(&mu, norm.as_ref(), cfg.n_max, &eval, &threshold, cfg.workers)?;
        let step = max_step_norm(&mu, norm.as_ref())?;
        let drift = drift_from_powers(&mu.powers(cfg.n_max, &threshold, cfg.workers)?, step, norm.as_ref())?;
        (fks, drift)
    };

    let mut rows = Vec::new();
    let mut series = Vec::new();
    for n in 1..=cfg.n_max {
        let phi = compute_phi(&fks, n)?;
        let rep = check_quasi_harmonicity(&mu, &phi, &drift, &test)?;
        rows.push(format!("{n},{},{},{}", rep.sup_distortion, rep.inf_distortion, rep.drift_ratio));
        series.push(json!({
            "n": n,
            "sup_distortion": rep.sup_distortion,
            "inf_distortion": rep.inf_distortion,
            "drift_ratio": rep.drift_ratio,
            "telescoping_exact": rep.telescoping_exact,
        }));
    }
    write_series(cfg, "n,sup_distortion,inf_distortion,drift_ratio", &rows)?;

    let phi = compute_phi(&fks, cfg.n_max)?;
    let report = check_quasi_harmonicity(&mu, &phi, &drift, &test)?;
    let inner = ball.elements_within(test_radius / 2);
    let pairs: Vec<(GroupElement, GroupElement)> = inner
        .iter()
        .flat_map(|g| inner.iter().map(move |s| (g.clone(), s.clone())))
        .collect();
    let mut bound_excess = f64::NEG_INFINITY;
    for fk in &fks {
        bound_excess = bound_excess.max(fk.max_bound_excess(norm.as_ref())?);
    }
    let values: Vec<Value> = test
        .iter()
        .map(|g| {
            let b = phi.get(g)?;
            Ok(json!({"element": g.to_string(), "value": b.value.render(), "error": b.error}))
        })
        .collect::<Result<_>>()?;
    Ok(json!({
        "measure": measure_json(&mu),
        "eval_radius": cfg.radius,
        "test_radius": test_radius,
        "report": report,
        "series": series,
        "fk_bound_excess": finite_or_null(bound_excess),
        "lipschitz_excess": finite_or_null(max_lipschitz_excess(&phi, norm.as_ref(), &pairs)?),
        "homomorphism_defect": check_homomorphism_liouville(&phi, &generator_pairs(group))?,
        "phi": values,
    }))
}

fn boundary(cfg: &RunConfig) -> Result<(FreeBoundary, FiniteMeasure<Q>)> {
    require_mode(cfg, ArithmeticMode::Exact)?;
    let group = GroupId::Free { k: cfg.k };
    let b = FreeBoundary::new(group)?;
    let mu = parse_measure::<Q>(group, &cfg.measure)?;
    b.require_srw(&mu)?;
    Ok((b, mu))
}

pub fn cocycle(cfg: &RunConfig) -> Result<Value> {
    let (b, mu) = boundary(cfg)?;
    let identity = b.check_cocycle_identity_ball(cfg.radius, cfg.level, cfg.workers)?;
    let mut normalization = Vec::new();
    for k in 1..=cfg.n_max {
        let level = cfg.level.max(2 * k + 2);
        let r = b.check_cocycle_normalization(&mu, k, level)?;
        normalization.push(json!({"k": k, "level": level, "residual": r.render(), "exact": r.is_zero()}));
    }
    Ok(json!({
        "identity": identity,
        "normalization": normalization,
    }))
}

pub fn poisson_norm(cfg: &RunConfig) -> Result<Value> {
    let (b, _) = boundary(cfg)?;
    let group = b.group();
    let table = build_ball(group, &group.generators(), cfg.radius, DEFAULT_BALL_BUDGET)?;
    let mut values = Vec::new();
    let mut mismatches = 0;
    for (g, len) in table.sorted_entries() {
        let v = b.poisson_seminorm(g)?;
        if v.exponent != len as u64 {
            mismatches += 1;
        }
        values.push(v);
    }
    let axioms = check_seminorm_with(&table, |g| b.poisson_seminorm(g).ok().map(|v| v.exponent as i64));
    Ok(json!({
        "log_base": b.log_base(),
        "values": values,
        "word_norm_mismatches": mismatches,
        "axioms": axioms,
        "axioms_hold": axioms.is_clean(),
    }))
}

pub fn c_seq(cfg: &RunConfig) -> Result<Value> {
    let (b, mu) = boundary(cfg)?;
    let c = b.c_sequence(&mu, cfg.n_max)?;
    write_series(
        cfg,
        "n,c_n",
        &c.values.iter().enumerate().map(|(i, v)| format!("{},{v}", i + 1)).collect::<Vec<_>>(),
    )?;
    Ok(serde_json::to_value(c).expect("serializable"))
}

pub fn span_rank(cfg: &RunConfig) -> Result<Value> {
    let (b, _) = boundary(cfg)?;
    let rank = b.span_rank(cfg.level, cfg.radius)?;
    let cylinders = b.cylinder_count(cfg.level);
    Ok(json!({
        "rank": rank,
        "cylinders": cylinders as u64,
        "full": rank as u128 == cylinders,
    }))
}

fn load_space(path: &str) -> Result<FiniteGSpace> {
    fs::read_to_string(Path::new(path))?.parse()
}

fn space_inputs(cfg: &RunConfig, count: usize) -> Result<Vec<FiniteGSpace>> {
    if cfg.inputs.len() != count {
        return Err(Error::Precondition(format!(
            "'{}' expects {count} G-space file(s), got {}",
            cfg.command,
            cfg.inputs.len()
        )));
    }
    cfg.inputs.iter().map(|p| load_space(p)).collect()
}

/// The space's own measure if it has one, otherwise the stationary solution.
fn measure_on(space: &FiniteGSpace, mu: &WordMeasure) -> Result<Vec<f64>> {
    match space.measure() {
        Some(nu) => Ok(nu.to_vec()),
        None => Ok(solve_stationary(space, mu)?.measure),
    }
}

pub fn stationary(cfg: &RunConfig) -> Result<Value> {
    require_mode(cfg, ArithmeticMode::Float64)?;
    let space = &space_inputs(cfg, 1)?[0];
    let mu = WordMeasure::parse(space, &cfg.measure)?;
    let report = solve_stationary(space, &mu)?;
    Ok(serde_json::to_value(report).expect("serializable"))
}

fn pair(cfg: &RunConfig) -> Result<(FiniteGSpace, Vec<f64>, FiniteGSpace, Vec<f64>)> {
    require_mode(cfg, ArithmeticMode::Float64)?;
    let mut spaces = space_inputs(cfg, 2)?;
    let y = spaces.pop().expect("two spaces");
    let x = spaces.pop().expect("two spaces");
    let mu = WordMeasure::parse(&x, &cfg.measure)?;
    let nu = measure_on(&x, &mu)?;
    let eta = measure_on(&y, &WordMeasure::parse(&y, &cfg.measure)?)?;
    Ok((x, nu, y, eta))
}

pub fn ergodicity(cfg: &RunConfig) -> Result<Value> {
    let (x, nu, y, eta) = pair(cfg)?;
    let report = diagonal_ergodicity(&x, &nu, &y, &eta)?;
    let witness = isometric_factor_witness(&x, &nu, &y, &eta)?;
    Ok(json!({
        "nu": nu,
        "eta": eta,
        "report": report,
        "isometric_witness": witness,
    }))
}

pub fn factor(cfg: &RunConfig) -> Result<Value> {
    let (x, nu, y, eta) = pair(cfg)?;
    let f: Vec<f64> = match &cfg.function {
        Some(text) => text
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad function value '{t}'")))
            })
            .collect::<Result<_>>()?,
        None => {
            let indicator = diagonal_ergodicity(&x, &nu, &y, &eta)?
                .witness
                .ok_or_else(|| Error::Precondition("diagonal action is ergodic; pass --function".into()))?;
            let mass = product_measure(&nu, &eta);
            let mean: f64 = indicator.iter().zip(&mass).map(|(v, m)| v * m).sum();
            indicator.iter().map(|v| v - mean).collect()
        }
    };
    let report = factor_map_pf(&f, &x, &nu, &y, &eta)?;
    Ok(json!({"function": f, "report": report}))
}

#[derive(Serialize)]
pub struct SelfTestOutcome {
    pub cases: Vec<walklab::selftest::SelfTestCase>,
    pub passed: usize,
    pub failed: usize,
}

pub fn selftest(cfg: &RunConfig) -> Result<SelfTestOutcome> {
    require_mode(cfg, ArithmeticMode::Exact)?;
    let cases = walklab::selftest::run(cfg.workers as Workers);
    let passed = cases.iter().filter(|c| c.passed).count();
    Ok(SelfTestOutcome {
        failed: cases.len() - passed,
        passed,
        cases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_measures() {
        let z2 = GroupId::FreeAbelian { d: 2 };
        let mu = parse_measure::<Q>(z2, "(1,0):1/2,(0,-1):1/2").unwrap();
        assert_eq!(mu.len(), 2);
        let f2 = GroupId::Free { k: 2 };
        let mu = parse_measure::<Q>(f2, "a:1/4,A:1/4,b:1/4,B:1/4").unwrap();
        assert_eq!(mu, FiniteMeasure::simple_random_walk(f2));
        let l = parse_measure::<f64>(GroupId::Lamplighter, "{}@1:1/3,{}@-1:1/3,{0}@0:1/3").unwrap();
        assert_eq!(l.len(), 3);
        assert!(parse_measure::<Q>(f2, "a:1/2").is_err());
        assert!(parse_measure::<Q>(f2, "a=1").is_err());
    }
}
