//! The exact identity suite, run in rational arithmetic.

use num::rational::BigRational;
use num::{BigInt, Zero};
use serde::Serialize;

use crate::boundary::FreeBoundary;
use crate::drift::adjoint_drift_equality;
use crate::error::Result;
use crate::exec::Workers;
use crate::group::GroupId;
use crate::measure::FiniteMeasure;
use crate::metric::{build_ball, check_seminorm_with, ClosedFormNorm, DEFAULT_BALL_BUDGET};
use crate::quasi::{check_diag_recursion, compute_fk_sequence};
use crate::weight::Weight;

type Q = BigRational;

#[derive(Clone, Debug, Serialize)]
pub struct SelfTestCase {
    pub id: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn case(id: &'static str, name: &'static str, outcome: Result<(bool, String)>) -> SelfTestCase {
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    SelfTestCase { id, name, passed, detail }
}

fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

fn f2() -> GroupId {
    GroupId::Free { k: 2 }
}

pub fn cocycle_identity(workers: Workers) -> Result<(bool, String)> {
    let b = FreeBoundary::new(f2())?;
    let r = b.check_cocycle_identity_ball(3, 8, workers)?;
    Ok((r.exact_zero, format!("{} checks, max residual {}", r.checked, r.max_residual)))
}

pub fn cocycle_normalization() -> Result<(bool, String)> {
    let b = FreeBoundary::new(f2())?;
    let mu = FiniteMeasure::<Q>::simple_random_walk(f2());
    let mut worst = Q::zero();
    for (k, level) in [(1, 4), (2, 6), (3, 8)] {
        let r = b.check_cocycle_normalization(&mu, k, level)?;
        if r > worst {
            worst = r;
        }
    }
    Ok((worst.is_zero(), format!("max residual {worst} for k <= 3")))
}

pub fn c_sequence() -> Result<(bool, String)> {
    let b = FreeBoundary::new(f2())?;
    let c = b.c_sequence(&FiniteMeasure::simple_random_walk(f2()), 5)?;
    let ok = c.additive && c.exact[0] == q(-1, 2);
    Ok((ok, format!("c_n / log 3 = [{}]", c.coefficients.join(", "))))
}

pub fn poisson_seminorm() -> Result<(bool, String)> {
    let b = FreeBoundary::new(f2())?;
    let table = build_ball(f2(), &f2().generators(), 5, DEFAULT_BALL_BUDGET)?;
    let mut mismatches = 0;
    for g in table.elements_within(5) {
        if b.poisson_seminorm(&g)?.exponent != table.word_norm(&g)? as u64 {
            mismatches += 1;
        }
    }
    let axioms = check_seminorm_with(&table, |g| b.poisson_seminorm(g).ok().map(|v| v.exponent as i64));
    Ok((
        mismatches == 0 && axioms.is_clean(),
        format!("{} elements, {mismatches} mismatches, {} pairs checked", table.len(), axioms.checked_pairs),
    ))
}

pub fn harmonicity() -> Result<(bool, String)> {
    let b = FreeBoundary::new(f2())?;
    let mu = FiniteMeasure::<Q>::simple_random_walk(f2());
    let n = b.cylinder_count(3) as usize;
    let mut functions = vec![b.constant_function(3, Q::from_int(1))?];
    for c in b.cylinders(1)? {
        functions.push(b.refine(&b.indicator(&c)?, 3)?);
    }
    // a fixed non-symmetric rational function of level 3
    let mut f = b.constant_function(3, Q::zero())?;
    for (i, v) in f.values.iter_mut().enumerate() {
        *v = q((i as i64 * 7 + 3) % 11 - 5, 1 + (i as i64 % 4));
    }
    functions.push(f);
    let mut worst = Q::zero();
    for f in &functions {
        let r = b.check_harmonicity(f, &mu, 2)?;
        if r > worst {
            worst = r;
        }
    }
    Ok((worst.is_zero(), format!("{} functions on {n} cylinders, max residual {worst}", functions.len())))
}

pub fn diag_recursion() -> Result<(bool, String)> {
    let mut details = Vec::new();
    let mut ok = true;
    for group in [f2(), GroupId::FreeAbelian { d: 2 }] {
        let mu = FiniteMeasure::<Q>::simple_random_walk(group);
        let norm = ClosedFormNorm::new(group)?;
        let table = build_ball(group, &group.generators(), 4, DEFAULT_BALL_BUDGET)?;
        let fks = compute_fk_sequence(&mu, &norm, 5, &table.elements_within(4), &Q::zero(), 0)?;
        let test = table.elements_within(3);
        for k in 0..=4 {
            let r = check_diag_recursion(&mu, &fks[k], &fks[k + 1], &test)?;
            ok &= r.exact_zero;
        }
        details.push(format!("{group}: k <= 4 on {} elements", test.len()));
    }
    Ok((ok, details.join("; ")))
}

pub fn span_rank() -> Result<(bool, String)> {
    let b = FreeBoundary::new(f2())?;
    let r1 = b.span_rank(1, 1)?;
    let r2 = b.span_rank(2, 2)?;
    Ok((r1 == 4 && r2 == 12, format!("level 1: {r1}, level 2: {r2}")))
}

pub fn adjoint_drift() -> Result<(bool, String)> {
    let z = GroupId::FreeAbelian { d: 1 };
    let mu = FiniteMeasure::<Q>::from_atoms(
        z,
        vec![(z.parse_element("(1)")?, q(2, 3)), (z.parse_element("(-1)")?, q(1, 3))],
    )?;
    let norm = ClosedFormNorm::new(z)?;
    let cmp = adjoint_drift_equality(&mu, &norm, 12, &Q::zero(), 1)?;
    Ok((cmp.exactly_equal(), format!("a_12 = {}", cmp.forward.a[12].render())))
}

/// Every exact identity, in a fixed order.
pub fn run(workers: Workers) -> Vec<SelfTestCase> {
    vec![
        case("1a", "cocycle identity", cocycle_identity(workers)),
        case("1b", "cocycle normalization", cocycle_normalization()),
        case("1c", "c_n additivity", c_sequence()),
        case("1d", "Poisson semi-norm", poisson_seminorm()),
        case("1e", "harmonicity of Poisson integrals", harmonicity()),
        case("1f", "f_k recursion", diag_recursion()),
        case("1g", "span rank", span_rank()),
        case("1h", "adjoint drift equality", adjoint_drift()),
    ]
}
