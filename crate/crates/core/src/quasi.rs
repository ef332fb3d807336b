//! Cesaro construction of a quasi-harmonic function from a word norm.
//!
//! `f_k(s) = sum_t (rho(st) - rho(t)) mu^{*k}(t)` and
//! `phi_n = (1/n) sum_{k<n} f_k`. The checks in this module measure, on a
//! finite set of elements, how closely `phi_n` satisfies the recursion
//! between consecutive `f_k`, the Lipschitz bound, quasi-harmonicity with
//! distortion equal to the drift, and (for Liouville walks) additivity.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::drift::ExactDrift;
use crate::error::{Error, Result};
use crate::exec::{self, Workers};
use crate::group::{mul_unchecked, GroupElement, GroupId};
use crate::measure::FiniteMeasure;
use crate::metric::WordNorm;
use crate::weight::Weight;

/// A value together with a bound on its truncation error.
#[derive(Clone, Debug, PartialEq)]
pub struct Bounded<W> {
    pub value: W,
    pub error: f64,
}

/// `f_k` tabulated on a finite set of elements.
#[derive(Clone, Debug)]
pub struct FkTable<W> {
    pub k: usize,
    pub group: GroupId,
    pub entries: BTreeMap<GroupElement, Bounded<W>>,
}

/// `phi_n` tabulated on a finite set of elements.
#[derive(Clone, Debug)]
pub struct PhiTable<W> {
    pub n: usize,
    pub group: GroupId,
    pub entries: BTreeMap<GroupElement, Bounded<W>>,
}

fn lookup<'a, W>(entries: &'a BTreeMap<GroupElement, Bounded<W>>, g: &GroupElement, what: &str) -> Result<&'a Bounded<W>> {
    entries
        .get(g)
        .ok_or_else(|| Error::Precondition(format!("{what} table does not cover {g}")))
}

impl<W: Weight> FkTable<W> {
    pub fn get(&self, g: &GroupElement) -> Result<&Bounded<W>> {
        lookup(&self.entries, g, "f_k")
    }

    /// Largest `|f_k(s)| - rho(s) - error(s)`; non-positive when the triangle
    /// inequality bound holds on every entry.
    pub fn max_bound_excess(&self, norm: &dyn WordNorm) -> Result<f64> {
        let mut worst = f64::NEG_INFINITY;
        for (s, b) in &self.entries {
            let rho = norm.norm(s)? as f64;
            worst = worst.max(b.value.abs_value().to_f64() - rho - b.error);
        }
        Ok(worst)
    }
}

impl<W: Weight> PhiTable<W> {
    pub fn get(&self, g: &GroupElement) -> Result<&Bounded<W>> {
        lookup(&self.entries, g, "phi_n")
    }

    pub fn elements(&self) -> impl Iterator<Item = &GroupElement> {
        self.entries.keys()
    }
}

/// `f_k` on `eval` from a precomputed (possibly truncated) `mu^{*k}`.
///
/// Dropped atoms of `mu^{*k}` carry total mass `deficit`, and each contributes
/// `|rho(st) - rho(t)| <= rho(s)`, so `deficit * rho(s)` bounds the error.
pub fn fk_from_power<W: Weight>(
    power: &FiniteMeasure<W>,
    k: usize,
    norm: &dyn WordNorm,
    eval: &[GroupElement],
    workers: Workers,
) -> Result<FkTable<W>> {
    let atoms: Vec<(&GroupElement, &W)> = power.iter().collect();
    let base_norms: Vec<u64> = atoms.iter().map(|(t, _)| norm.norm(t)).collect::<Result<_>>()?;
    let deficit = power.deficit().to_f64();
    let rows = exec::map_indexed(eval.len(), workers, |i| {
        let s = &eval[i];
        let mut acc = W::zero();
        for ((t, w), &rt) in atoms.iter().zip(&base_norms) {
            let rst = norm.norm(&mul_unchecked(s, t)?)?;
            acc = acc + W::from_int(rst as i64 - rt as i64) * (*w).clone();
        }
        let error = deficit * norm.norm(s)? as f64;
        Ok((s.clone(), Bounded { value: acc, error }))
    });
    Ok(FkTable {
        k,
        group: power.group(),
        entries: rows.into_iter().collect::<Result<_>>()?,
    })
}

/// `f_k` on `eval`, computing `mu^{*k}` on the way.
pub fn compute_fk<W: Weight>(
    mu: &FiniteMeasure<W>,
    norm: &dyn WordNorm,
    k: usize,
    eval: &[GroupElement],
    threshold: &W,
    workers: Workers,
) -> Result<FkTable<W>> {
    let power = mu.power(k, threshold, workers)?;
    fk_from_power(&power, k, norm, eval, workers)
}

/// `f_0, ..., f_n` on `eval` along a single chain of convolution powers.
pub fn compute_fk_sequence<W: Weight>(
    mu: &FiniteMeasure<W>,
    norm: &dyn WordNorm,
    n: usize,
    eval: &[GroupElement],
    threshold: &W,
    workers: Workers,
) -> Result<Vec<FkTable<W>>> {
    let mut out = Vec::with_capacity(n + 1);
    let mut power = FiniteMeasure::identity(mu.group());
    for k in 0..=n {
        if k > 0 {
            power = power.convolve(mu, threshold, workers)?;
        }
        out.push(fk_from_power(&power, k, norm, eval, workers)?);
    }
    Ok(out)
}

/// `phi_n = (1/n) sum_{k<n} f_k` pointwise on the elements common to all tables.
pub fn compute_phi<W: Weight>(fks: &[FkTable<W>], n: usize) -> Result<PhiTable<W>> {
    if n == 0 {
        return Err(Error::Precondition("phi_n needs n >= 1".into()));
    }
    if fks.len() < n || (0..n).any(|k| fks[k].k != k) {
        return Err(Error::Precondition(format!("phi_{n} needs f_0..f_{} in order", n - 1)));
    }
    let scale = W::from_ratio(1, n as i64);
    let mut entries = BTreeMap::new();
    for g in fks[0].entries.keys() {
        let mut value = W::zero();
        let mut error = 0.0;
        for fk in &fks[..n] {
            let b = fk.get(g)?;
            value = value + b.value.clone();
            error += b.error;
        }
        entries.insert(
            g.clone(),
            Bounded {
                value: value * scale.clone(),
                error: error / n as f64,
            },
        );
    }
    Ok(PhiTable {
        n,
        group: fks[0].group,
        entries,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub max_residual: f64,
    /// Largest residual allowed by the propagated truncation errors.
    pub bound: f64,
    pub exact_zero: bool,
    pub checked: usize,
}

impl ResidualReport {
    pub fn within_bound(&self) -> bool {
        self.max_residual <= self.bound
    }
}

/// Residual of `sum_s f_k(gs) mu(s) = f_{k+1}(g) + sum_s f_k(s) mu(s)` over `test_set`.
pub fn check_diag_recursion<W: Weight>(
    mu: &FiniteMeasure<W>,
    fk: &FkTable<W>,
    fk_next: &FkTable<W>,
    test_set: &[GroupElement],
) -> Result<ResidualReport> {
    if fk_next.k != fk.k + 1 {
        return Err(Error::Precondition(format!("expected f_{} after f_{}", fk.k + 1, fk.k)));
    }
    let mut mean_term = W::zero();
    let mut mean_err = 0.0;
    for (s, w) in mu.iter() {
        let b = fk.get(s)?;
        mean_term = mean_term + b.value.clone() * w.clone();
        mean_err += b.error * w.to_f64();
    }
    let mut max_residual = 0.0f64;
    let mut bound = 0.0f64;
    let mut exact_zero = true;
    for g in test_set {
        let mut lhs = W::zero();
        let mut err = mean_err;
        for (s, w) in mu.iter() {
            let b = fk.get(&mul_unchecked(g, s)?)?;
            lhs = lhs + b.value.clone() * w.clone();
            err += b.error * w.to_f64();
        }
        let next = fk_next.get(g)?;
        err += next.error;
        let residual = lhs - next.value.clone() - mean_term.clone();
        exact_zero &= residual.is_zero();
        max_residual = max_residual.max(residual.abs_value().to_f64());
        bound = bound.max(err);
    }
    let slack = W::tolerance().to_f64() * 16.0;
    Ok(ResidualReport {
        max_residual,
        bound: bound + slack,
        exact_zero,
        checked: test_set.len(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DistortionEntry {
    pub element: String,
    pub distortion: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuasiHarmonicReport {
    pub n: usize,
    pub distortions: Vec<DistortionEntry>,
    pub sup_distortion: f64,
    pub inf_distortion: f64,
    /// `a_n / n`.
    pub drift_ratio: f64,
    /// `max_g |d_n(g) - a_n / n|`.
    pub max_gap_to_ratio: f64,
    /// `sum_s phi_n(s) mu(s)`, which telescopes to `a_n / n`.
    pub mean_increment: String,
    pub telescoping_residual: f64,
    pub telescoping_exact: bool,
}

/// Distortion `d_n(g) = sum_s phi_n(gs) mu(s) - phi_n(g)` on `test_set`, and
/// the telescoping identity `sum_s phi_n(s) mu(s) = a_n / n`.
pub fn check_quasi_harmonicity<W: Weight>(
    mu: &FiniteMeasure<W>,
    phi: &PhiTable<W>,
    drift: &ExactDrift<W>,
    test_set: &[GroupElement],
) -> Result<QuasiHarmonicReport> {
    let n = phi.n;
    if drift.n_max() < n {
        return Err(Error::Precondition(format!("drift terms computed only up to {}", drift.n_max())));
    }
    let ratio = drift.a[n].clone() / W::from_int(n as i64);
    let mut distortions = Vec::with_capacity(test_set.len());
    let mut sup = f64::NEG_INFINITY;
    let mut inf = f64::INFINITY;
    let mut gap = 0.0f64;
    for g in test_set {
        let mut acc = W::zero();
        for (s, w) in mu.iter() {
            acc = acc + phi.get(&mul_unchecked(g, s)?)?.value.clone() * w.clone();
        }
        let d = acc - phi.get(g)?.value.clone();
        let df = d.to_f64();
        sup = sup.max(df);
        inf = inf.min(df);
        gap = gap.max((d - ratio.clone()).abs_value().to_f64());
        distortions.push(DistortionEntry {
            element: g.to_string(),
            distortion: df,
        });
    }
    let mut mean = W::zero();
    for (s, w) in mu.iter() {
        mean = mean + phi.get(s)?.value.clone() * w.clone();
    }
    let tele = mean.clone() - ratio.clone();
    Ok(QuasiHarmonicReport {
        n,
        distortions,
        sup_distortion: sup,
        inf_distortion: inf,
        drift_ratio: ratio.to_f64(),
        max_gap_to_ratio: gap,
        mean_increment: mean.render(),
        telescoping_residual: tele.abs_value().to_f64(),
        telescoping_exact: tele.is_zero(),
    })
}

/// Largest `|phi_n(gs) - phi_n(s)| - rho(g) - errors` over the pairs; the
/// Lipschitz bound holds when this is non-positive.
pub fn max_lipschitz_excess<W: Weight>(
    phi: &PhiTable<W>,
    norm: &dyn WordNorm,
    pairs: &[(GroupElement, GroupElement)],
) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for (g, s) in pairs {
        let gs = phi.get(&mul_unchecked(g, s)?)?;
        let bs = phi.get(s)?;
        let diff = (gs.value.clone() - bs.value.clone()).abs_value().to_f64();
        worst = worst.max(diff - norm.norm(g)? as f64 - gs.error - bs.error);
    }
    Ok(worst)
}

/// `max |phi_n(gh) - phi_n(g) - phi_n(h)|` over the pairs.
pub fn check_homomorphism_liouville<W: Weight>(phi: &PhiTable<W>, pairs: &[(GroupElement, GroupElement)]) -> Result<f64> {
    let mut worst = 0.0f64;
    for (g, h) in pairs {
        let gh = phi.get(&mul_unchecked(g, h)?)?.value.clone();
        let defect = gh - phi.get(g)?.value.clone() - phi.get(h)?.value.clone();
        worst = worst.max(defect.abs_value().to_f64());
    }
    Ok(worst)
}

/// All ordered pairs of generators; the default test pairs for additivity.
pub fn generator_pairs(group: GroupId) -> Vec<(GroupElement, GroupElement)> {
    let gens = group.generators();
    let mut out = Vec::new();
    for g in gens.iter() {
        for h in gens.iter() {
            out.push((g.clone(), h.clone()));
        }
    }
    out
}
