//! Seeded Monte Carlo sampling of random-walk trajectories.
//!
//! Trajectory `i` draws its increments from a ChaCha stream keyed by
//! `(seed, i)`, so every trajectory is reproducible on its own and aggregate
//! statistics do not depend on how trajectories are spread over workers.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Workers};
use crate::group::{right_mul_in_place, GroupElement, GroupId};
use crate::measure::FiniteMeasure;
use crate::weight::Weight;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub seed: u64,
    pub trajectories: usize,
    pub steps: usize,
    pub workers: Workers,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            seed: 0x5eed,
            trajectories: 2000,
            steps: 2000,
            workers: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trajectories == 0 {
            return Err(Error::Precondition("at least one trajectory is required".into()));
        }
        Ok(())
    }
}

/// Deterministic stream for trajectory `index` under `seed`.
pub fn trajectory_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Inverse-CDF sampler over the atoms of a measure, taken in the
/// lexicographic order of their string forms.
#[derive(Clone, Debug)]
pub struct IncrementSampler {
    group: GroupId,
    atoms: Vec<GroupElement>,
    cumulative: Vec<f64>,
}

impl IncrementSampler {
    pub fn new<W: Weight>(mu: &FiniteMeasure<W>) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::Precondition("cannot sample from an empty measure".into()));
        }
        let mut atoms = Vec::with_capacity(mu.len());
        let mut cumulative = Vec::with_capacity(mu.len());
        let mut acc = 0.0;
        for (g, w) in mu.atoms_by_serialization() {
            acc += w.to_f64();
            atoms.push(g);
            cumulative.push(acc);
        }
        Ok(IncrementSampler {
            group: mu.group(),
            atoms,
            cumulative,
        })
    }

    pub fn group(&self) -> GroupId {
        self.group
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> &GroupElement {
        let total = *self.cumulative.last().expect("nonempty");
        let u: f64 = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= u);
        &self.atoms[i.min(self.atoms.len() - 1)]
    }

    /// Run `steps` increments from the identity, calling `visit(k, X_k)` for
    /// `k = 1..=steps`, and return the endpoint.
    pub fn walk<R: Rng, F>(&self, steps: usize, rng: &mut R, mut visit: F) -> Result<GroupElement>
    where
        F: FnMut(usize, &GroupElement) -> Result<()>,
    {
        let mut x = self.group.identity();
        for k in 1..=steps {
            right_mul_in_place(&mut x, self.draw(rng))?;
            visit(k, &x)?;
        }
        Ok(x)
    }
}

/// Positions `X_1, ..., X_n` of one trajectory; `X_0 = e` is implicit.
pub fn sample_trajectory<W: Weight, R: Rng>(mu: &FiniteMeasure<W>, n: usize, rng: &mut R) -> Result<Vec<GroupElement>> {
    let sampler = IncrementSampler::new(mu)?;
    let mut out = Vec::with_capacity(n);
    sampler.walk(n, rng, |_, x| {
        out.push(x.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Endpoints `X_n` of every trajectory, in trajectory order.
pub fn sample_endpoints<W: Weight>(config: &SamplerConfig, mu: &FiniteMeasure<W>, n: usize) -> Result<Vec<GroupElement>> {
    config.validate()?;
    let sampler = IncrementSampler::new(mu)?;
    exec::map_indexed(config.trajectories, config.workers, |i| {
        let mut rng = trajectory_stream(config.seed, i as u64);
        sampler.walk(n, &mut rng, |_, _| Ok(()))
    })
    .into_iter()
    .collect()
}

/// Empirical law of `X_n` built from integer visit counts.
pub fn empirical_endpoint_distribution<W: Weight>(
    config: &SamplerConfig,
    mu: &FiniteMeasure<W>,
    n: usize,
) -> Result<FiniteMeasure<f64>> {
    let mut counts: BTreeMap<GroupElement, u64> = BTreeMap::new();
    for g in sample_endpoints(config, mu, n)? {
        *counts.entry(g).or_default() += 1;
    }
    let total = config.trajectories as f64;
    let atoms = counts.into_iter().map(|(g, c)| (g, c as f64 / total)).collect();
    Ok(FiniteMeasure::from_raw(mu.group(), atoms, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::rational::BigRational;

    fn z1() -> GroupId {
        GroupId::FreeAbelian { d: 1 }
    }

    #[test]
    fn empty_walk() {
        let mu = FiniteMeasure::<f64>::simple_random_walk(z1());
        let mut rng = trajectory_stream(1, 0);
        assert!(sample_trajectory(&mu, 0, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn deterministic_walk() {
        let f2 = GroupId::Free { k: 2 };
        let a = f2.parse_element("a").unwrap();
        let mu = FiniteMeasure::<f64>::dirac(f2, a).unwrap();
        let mut rng = trajectory_stream(7, 3);
        let path = sample_trajectory(&mu, 3, &mut rng).unwrap();
        let expected: Vec<GroupElement> = ["a", "aa", "aaa"].iter().map(|s| f2.parse_element(s).unwrap()).collect();
        assert_eq!(path, expected);
        let cfg = SamplerConfig {
            trajectories: 10,
            ..SamplerConfig::default()
        };
        let emp = empirical_endpoint_distribution(&cfg, &mu, 5).unwrap();
        assert_eq!(emp.len(), 1);
        assert_eq!(emp.weight(&f2.parse_element("aaaaa").unwrap()), 1.0);
    }

    #[test]
    fn reproducible_across_runs_and_workers() {
        let mu = FiniteMeasure::<f64>::simple_random_walk(z1());
        let a = sample_trajectory(&mu, 50, &mut trajectory_stream(42, 0)).unwrap();
        let b = sample_trajectory(&mu, 50, &mut trajectory_stream(42, 0)).unwrap();
        assert_eq!(a, b);
        let c = sample_trajectory(&mu, 50, &mut trajectory_stream(42, 1)).unwrap();
        assert_ne!(a, c);
        let base = SamplerConfig {
            seed: 42,
            trajectories: 500,
            steps: 30,
            workers: 1,
        };
        let e1 = sample_endpoints(&base, &mu, 30).unwrap();
        let e4 = sample_endpoints(&SamplerConfig { workers: 4, ..base.clone() }, &mu, 30).unwrap();
        assert_eq!(e1, e4);
    }

    #[test]
    fn endpoint_law_matches_exact_square() {
        let mu = FiniteMeasure::<BigRational>::simple_random_walk(z1());
        let exact = mu.power(2, &BigRational::from_ratio(0, 1), 1).unwrap().to_float();
        let cfg = SamplerConfig {
            seed: 11,
            trajectories: 100_000,
            steps: 2,
            workers: 0,
        };
        let emp = empirical_endpoint_distribution(&cfg, &mu, 2).unwrap();
        assert!(emp.total_variation(&exact) < 0.01);
    }

    #[test]
    fn one_step_free_frequencies() {
        let f2 = GroupId::Free { k: 2 };
        let mu = FiniteMeasure::<f64>::simple_random_walk(f2);
        let cfg = SamplerConfig {
            seed: 5,
            trajectories: 100_000,
            steps: 1,
            workers: 0,
        };
        let emp = empirical_endpoint_distribution(&cfg, &mu, 1).unwrap();
        assert_eq!(emp.len(), 4);
        for (_, w) in emp.iter() {
            assert!((w - 0.25).abs() < 0.01);
        }
    }
}
