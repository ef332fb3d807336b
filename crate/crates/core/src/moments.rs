//! Moment tensors of measures on the unit ball of a finite-dimensional
//! orthogonal representation.
//!
//! For a stationary atomic measure `xi`, the tensors
//! `moment_sigma_k = int v^{(x)k} dxi(v)` are averaged fixed points of
//! `pi^{(x)k}`; strict convexity of the norm ball then forces each
//! `pi^{(x)k}(s)` to fix them, and `xi` itself is invariant.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gspace::{GenLetter, GenWord, WordMeasure, COMPOSED_TOL, LINALG_TOL};

/// Orthogonal matrices for each named generator.
#[derive(Clone, Debug)]
pub struct OrthogonalRep {
    dim: usize,
    names: Vec<String>,
    matrices: Vec<DMatrix<f64>>,
}

impl OrthogonalRep {
    /// Checks orthogonality of every matrix and that every relator acts trivially.
    pub fn new(dim: usize, generators: Vec<(String, DMatrix<f64>)>, relators: &[GenWord]) -> Result<Self> {
        let id = DMatrix::<f64>::identity(dim, dim);
        let mut names = Vec::new();
        let mut matrices = Vec::new();
        for (name, m) in generators {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::Domain(format!("generator {name} is not {dim}x{dim}")));
            }
            let defect = (m.transpose() * &m - &id).amax();
            if defect > LINALG_TOL {
                return Err(Error::Domain(format!("generator {name} is not orthogonal (defect {defect:e})")));
            }
            names.push(name);
            matrices.push(m);
        }
        let rep = OrthogonalRep { dim, names, matrices };
        for r in relators {
            if r.iter().any(|l| l.generator >= rep.matrices.len()) {
                return Err(Error::Domain("relator uses an unknown generator".into()));
            }
            let defect = (rep.word_matrix(r) - &id).amax();
            if defect > LINALG_TOL {
                return Err(Error::Domain(format!("relator does not act trivially (defect {defect:e})")));
            }
        }
        Ok(rep)
    }

    /// `Z/n` acting on the plane by rotation through `2 pi / n`.
    pub fn rotation(n: usize) -> Self {
        let t = std::f64::consts::TAU / n as f64;
        let m = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        let relator = vec![GenLetter { generator: 0, inverse: false }; n];
        // cos and sin of 2 pi / n are off by an ulp; relators are checked to 1e-12
        OrthogonalRep::new(2, vec![("a".into(), m)], &[relator]).expect("rotation is orthogonal")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generator_names(&self) -> &[String] {
        &self.names
    }

    /// `pi(s^{-1}) = pi(s)^T`.
    pub fn letter_matrix(&self, l: GenLetter) -> DMatrix<f64> {
        if l.inverse {
            self.matrices[l.generator].transpose()
        } else {
            self.matrices[l.generator].clone()
        }
    }

    pub fn word_matrix(&self, w: &[GenLetter]) -> DMatrix<f64> {
        w.iter()
            .fold(DMatrix::identity(self.dim, self.dim), |acc, l| acc * self.letter_matrix(*l))
    }
}

/// `pi^{(x)k}(m)` as a `d^k x d^k` matrix.
fn tensor_power(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    (1..k).fold(m.clone(), |acc, _| acc.kronecker(m))
}

fn vector_tensor_power(v: &DVector<f64>, k: usize) -> DVector<f64> {
    (1..k).fold(v.clone(), |acc, _| acc.kronecker(v))
}

/// `int v^{(x)k} dxi(v)`, flattened with the first index most significant.
pub fn moment_sigma(xi: &[(DVector<f64>, f64)], k: usize) -> DVector<f64> {
    let dim = xi.first().map_or(0, |(v, _)| v.len());
    xi.iter()
        .fold(DVector::zeros(dim.pow(k as u32)), |acc, (v, w)| acc + vector_tensor_power(v, k) * *w)
}

/// Atoms of `xi` merged when they lie within `COMPOSED_TOL` of each other.
fn merge_atoms(atoms: impl IntoIterator<Item = (DVector<f64>, f64)>) -> Vec<(DVector<f64>, f64)> {
    let mut out: Vec<(DVector<f64>, f64)> = Vec::new();
    for (v, w) in atoms {
        match out.iter_mut().find(|(u, _)| (u - &v).amax() <= COMPOSED_TOL) {
            Some(entry) => entry.1 += w,
            None => out.push((v, w)),
        }
    }
    out
}

/// Largest mass discrepancy between two atomic measures after merging close atoms.
fn atomic_distance(a: &[(DVector<f64>, f64)], b: &[(DVector<f64>, f64)]) -> f64 {
    let a = merge_atoms(a.iter().cloned());
    let b = merge_atoms(b.iter().cloned());
    let mut worst = 0.0f64;
    for (v, w) in &a {
        let other = b.iter().find(|(u, _)| (u - v).amax() <= COMPOSED_TOL).map_or(0.0, |(_, x)| *x);
        worst = worst.max((w - other).abs());
    }
    for (u, x) in &b {
        if !a.iter().any(|(v, _)| (u - v).amax() <= COMPOSED_TOL) {
            worst = worst.max(*x);
        }
    }
    worst
}

fn push_atoms(m: &DMatrix<f64>, xi: &[(DVector<f64>, f64)], scale: f64) -> Vec<(DVector<f64>, f64)> {
    xi.iter().map(|(v, w)| (m * v, w * scale)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentOrder {
    pub k: usize,
    pub moment_sigma: Vec<f64>,
    pub norm: f64,
    /// `|sum_s mu(s) pi^{(x)k}(s) sigma_k - sigma_k|_inf`.
    pub averaged_residual: f64,
    /// `max_s |pi^{(x)k}(s) sigma_k - sigma_k|_inf` over the support of `mu`.
    pub fixed_residual: f64,
    /// Largest difference between `sigma_k` and its index transposes.
    pub symmetry_defect: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentReport {
    pub stationarity_residual: f64,
    pub orders: Vec<MomentOrder>,
    /// `max_s` atomic distance between `pi(s)_* xi` and `xi`.
    pub invariance_defect: f64,
    pub invariant: bool,
}

fn symmetry_defect(t: &DVector<f64>, dim: usize, k: usize) -> f64 {
    let mut worst = 0.0f64;
    let mut digits = vec![0usize; k];
    for idx in 0..t.len() {
        let mut r = idx;
        for d in digits.iter_mut().rev() {
            *d = r % dim;
            r /= dim;
        }
        for a in 0..k {
            for b in a + 1..k {
                let mut swapped = digits.clone();
                swapped.swap(a, b);
                let j = swapped.iter().fold(0, |acc, d| acc * dim + d);
                worst = worst.max((t[idx] - t[j]).abs());
            }
        }
    }
    worst
}

/// Moment tensors `sigma_1 .. sigma_{k_max}` of a stationary `xi` and the
/// consequences of their invariance.
pub fn moment_tensor_invariance(rep: &OrthogonalRep, xi: &[(DVector<f64>, f64)], mu: &WordMeasure, k_max: usize) -> Result<MomentReport> {
    if xi.is_empty() {
        return Err(Error::Precondition("xi has no atoms".into()));
    }
    for (v, w) in xi {
        if v.len() != rep.dim {
            return Err(Error::Domain(format!("atom of dimension {} in a {}-dimensional representation", v.len(), rep.dim)));
        }
        if v.norm() > 1.0 + LINALG_TOL || !(*w > 0.0) {
            return Err(Error::Precondition("xi must be a positive measure on the unit ball".into()));
        }
    }
    let total: f64 = xi.iter().map(|(_, w)| w).sum();
    if (total - 1.0).abs() > LINALG_TOL {
        return Err(Error::Precondition(format!("xi has total mass {total}")));
    }
    if mu.atoms.iter().any(|(w, _)| w.iter().any(|l| l.generator >= rep.matrices.len())) {
        return Err(Error::Domain("measure uses an unknown generator".into()));
    }
    let steps: Vec<(DMatrix<f64>, f64)> = mu.atoms.iter().map(|(w, p)| (rep.word_matrix(w), *p)).collect();
    let averaged: Vec<(DVector<f64>, f64)> = steps.iter().flat_map(|(m, p)| push_atoms(m, xi, *p)).collect();
    let stationarity = atomic_distance(&averaged, xi);
    if stationarity > COMPOSED_TOL {
        return Err(Error::Precondition(format!("xi is not stationary (residual {stationarity:e})")));
    }
    let mut orders = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let sigma = moment_sigma(xi, k);
        let powers: Vec<(DMatrix<f64>, f64)> = steps.iter().map(|(m, p)| (tensor_power(m, k), *p)).collect();
        let avg = powers.iter().fold(DVector::zeros(sigma.len()), |acc, (m, p)| acc + (m * &sigma) * *p);
        let fixed = powers.iter().map(|(m, _)| (m * &sigma - &sigma).amax()).fold(0.0, f64::max);
        orders.push(MomentOrder {
            k,
            norm: sigma.norm(),
            averaged_residual: (avg - &sigma).amax(),
            fixed_residual: fixed,
            symmetry_defect: symmetry_defect(&sigma, rep.dim, k),
            moment_sigma: sigma.iter().copied().collect(),
        });
    }
    let invariance_defect = steps
        .iter()
        .map(|(m, _)| atomic_distance(&push_atoms(m, xi, 1.0), xi))
        .fold(0.0, f64::max);
    Ok(MomentReport {
        stationarity_residual: stationarity,
        orders,
        invariance_defect,
        invariant: invariance_defect <= COMPOSED_TOL,
    })
}

/// Uniform measure on the orbit of `v` under the cyclic group generated by `m`.
pub fn cyclic_orbit_measure(m: &DMatrix<f64>, v: DVector<f64>, max_len: usize) -> Result<Vec<(DVector<f64>, f64)>> {
    let mut orbit = vec![v.clone()];
    let mut cur = m * &v;
    while (&cur - &v).amax() > COMPOSED_TOL {
        if orbit.len() == max_len {
            return Err(Error::Precondition(format!("orbit longer than {max_len}")));
        }
        orbit.push(cur.clone());
        cur = m * cur;
    }
    let w = 1.0 / orbit.len() as f64;
    Ok(orbit.into_iter().map(|v| (v, w)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn srw() -> WordMeasure {
        WordMeasure::simple_random_walk(1)
    }

    #[test]
    fn fixed_vector() {
        let rep = OrthogonalRep::rotation(4);
        let xi = vec![(DVector::from_column_slice(&[0.0, 0.0]), 1.0)];
        let r = moment_tensor_invariance(&rep, &xi, &srw(), 3).unwrap();
        assert!(r.invariant);
        assert!(r.orders.iter().all(|o| o.norm == 0.0));
    }

    #[test]
    fn rotation_orbits() {
        for n in [3, 4] {
            let rep = OrthogonalRep::rotation(n);
            let xi = cyclic_orbit_measure(&rep.matrices[0], DVector::from_column_slice(&[1.0, 0.0]), 16).unwrap();
            assert_eq!(xi.len(), n);
            let r = moment_tensor_invariance(&rep, &xi, &srw(), 3).unwrap();
            assert!(r.invariant);
            let s1 = &r.orders[0].moment_sigma;
            assert!(s1.iter().all(|x| x.abs() < 1e-12), "n = {n}: {s1:?}");
            let s2 = &r.orders[1].moment_sigma;
            let half_id = [0.5, 0.0, 0.0, 0.5];
            assert!(s2.iter().zip(half_id).all(|(a, b)| (a - b).abs() < 1e-12), "n = {n}: {s2:?}");
            for o in &r.orders {
                assert!(o.averaged_residual < 1e-12 && o.fixed_residual < 1e-12 && o.symmetry_defect < 1e-12);
                assert!(o.norm <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn non_stationary_rejected() {
        let rep = OrthogonalRep::rotation(4);
        let xi = vec![(DVector::from_column_slice(&[1.0, 0.0]), 1.0)];
        assert!(moment_tensor_invariance(&rep, &xi, &srw(), 2).is_err());
    }

    #[test]
    fn non_orthogonal_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!(OrthogonalRep::new(2, vec![("a".into(), m)], &[]).is_err());
    }
}
