//! Drift of a random walk with respect to a word norm, and the Shannon
//! entropy of its convolution powers.
//!
//! The exact part evaluates `a_n = sum_s rho(s) mu^{*n}(s)` on convolution
//! powers. Since `a_{m+n} <= a_m + a_n`, every `a_n / n` is an upper bound for
//! the drift, and the smallest one seen is reported as the certified bound.
//! The Monte Carlo part averages `rho(X_n) / n` over seeded trajectories.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::measure::FiniteMeasure;
use crate::metric::WordNorm;
use crate::sampler::{trajectory_stream, IncrementSampler, SamplerConfig};
use crate::weight::Weight;

/// Two-sided 95% normal quantile.
const Z_95: f64 = 1.959_963_984_540_054;

/// Exact partial drift values `a_1..a_{n_max}`.
#[derive(Clone, Debug)]
pub struct ExactDrift<W> {
    /// `a[n]` for `n = 0..=n_max`; `a[0] = 0`.
    pub a: Vec<W>,
    /// Upper error bar on each `a[n]` from truncated mass.
    pub error: Vec<f64>,
    pub deficit: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DriftTerm {
    pub n: usize,
    pub a_n: String,
    pub a_n_value: f64,
    pub ratio: f64,
    pub error: f64,
    pub deficit: f64,
}

impl<W: Weight> ExactDrift<W> {
    pub fn n_max(&self) -> usize {
        self.a.len() - 1
    }

    /// `min_n (a_n + error_n) / n` over the computed range.
    pub fn certified_bound(&self) -> f64 {
        (1..self.a.len())
            .map(|n| (self.a[n].to_f64() + self.error[n]) / n as f64)
            .fold(f64::INFINITY, f64::min)
    }

    /// Same bound in the weight type, valid only when nothing was truncated.
    pub fn certified_bound_exact(&self) -> Option<W> {
        if self.error.iter().any(|e| *e != 0.0) {
            return None;
        }
        (1..self.a.len())
            .map(|n| self.a[n].clone() / W::from_int(n as i64))
            .reduce(|x, y| if y < x { y } else { x })
    }

    /// Largest `a_{m+n} - a_m - a_n - error` over computed pairs; `<= 0` means
    /// subadditivity holds within the error bars.
    pub fn max_subadditivity_excess(&self) -> f64 {
        let n_max = self.n_max();
        let mut worst = f64::NEG_INFINITY;
        for m in 1..n_max {
            for n in 1..=(n_max - m) {
                let excess = self.a[m + n].clone() - self.a[m].clone() - self.a[n].clone();
                let slack = self.error[m] + self.error[n];
                worst = worst.max(excess.to_f64() - slack);
            }
        }
        worst
    }

    /// Exact subadditivity check in the weight type (no error slack).
    pub fn is_exactly_subadditive(&self) -> bool {
        let n_max = self.n_max();
        (1..n_max).all(|m| (1..=(n_max - m)).all(|n| self.a[m + n] <= self.a[m].clone() + self.a[n].clone()))
    }

    pub fn terms(&self) -> Vec<DriftTerm> {
        (1..self.a.len())
            .map(|n| DriftTerm {
                n,
                a_n: self.a[n].render(),
                a_n_value: self.a[n].to_f64(),
                ratio: self.a[n].to_f64() / n as f64,
                error: self.error[n],
                deficit: self.deficit[n],
            })
            .collect()
    }
}

/// Largest norm of an atom of `mu`.
pub fn max_step_norm<W: Weight>(mu: &FiniteMeasure<W>, norm: &dyn WordNorm) -> Result<u64> {
    mu.support().map(|g| norm.norm(g)).try_fold(0u64, |acc, n| Ok(acc.max(n?)))
}

/// `a_n` from precomputed powers `[mu^{*0}, ..., mu^{*n_max}]`.
pub fn drift_from_powers<W: Weight>(powers: &[FiniteMeasure<W>], step_norm: u64, norm: &dyn WordNorm) -> Result<ExactDrift<W>> {
    let mut a = Vec::with_capacity(powers.len());
    let mut error = Vec::with_capacity(powers.len());
    let mut deficit = Vec::with_capacity(powers.len());
    for (n, p) in powers.iter().enumerate() {
        let value = p.expect(|g| {
            norm.norm(g).map(|r| W::from_int(r as i64)).map_err(|e| match e {
                Error::OutOfRange { radius, .. } => Error::SupportEscapes { step: n, radius },
                other => other,
            })
        })?;
        let d = p.deficit().to_f64();
        a.push(value);
        error.push(d * (n as f64) * step_norm as f64);
        deficit.push(d);
    }
    Ok(ExactDrift { a, error, deficit })
}

pub fn drift_exact_partial<W: Weight>(
    mu: &FiniteMeasure<W>,
    norm: &dyn WordNorm,
    n_max: usize,
    threshold: &W,
    workers: exec::Workers,
) -> Result<ExactDrift<W>> {
    let step = max_step_norm(mu, norm)?;
    if let Some(r) = norm.radius() {
        if (n_max as u64).saturating_mul(step) > r {
            return Err(Error::SupportEscapes {
                step: (r / step.max(1)) as usize + 1,
                radius: r as u32,
            });
        }
    }
    let powers = mu.powers(n_max, threshold, workers)?;
    drift_from_powers(&powers, step, norm)
}

/// Monte Carlo estimate of `rho(X_n) / n` at one checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonteCarloPoint {
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub half_width: f64,
    pub trajectories: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonteCarloDrift {
    pub seed: u64,
    pub trajectories: usize,
    pub points: Vec<MonteCarloPoint>,
}

impl MonteCarloDrift {
    pub fn at(&self, n: usize) -> Option<&MonteCarloPoint> {
        self.points.iter().find(|p| p.n == n)
    }
}

/// Sample `config.trajectories` walks of length `max(checkpoints)` and record
/// `rho(X_n)` at each checkpoint. Norms are integers, so sums are exact and
/// the result is independent of the worker count.
pub fn drift_monte_carlo<W: Weight>(
    mu: &FiniteMeasure<W>,
    norm: &dyn WordNorm,
    config: &SamplerConfig,
    checkpoints: &[usize],
) -> Result<MonteCarloDrift> {
    config.validate()?;
    let mut checkpoints: Vec<usize> = checkpoints.iter().copied().filter(|&n| n > 0).collect();
    if checkpoints.is_empty() {
        checkpoints.push(config.steps.max(1));
    }
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let steps = *checkpoints.last().expect("nonempty");
    let sampler = IncrementSampler::new(mu)?;
    let per_trajectory: Vec<Result<Vec<u64>>> = exec::map_indexed(config.trajectories, config.workers, |i| {
        let mut rng = trajectory_stream(config.seed, i as u64);
        let mut values = Vec::with_capacity(checkpoints.len());
        let mut next = 0;
        sampler.walk(steps, &mut rng, |k, x| {
            if checkpoints[next] == k {
                values.push(norm.norm(x)?);
                next += 1;
            }
            Ok(())
        })?;
        Ok(values)
    });
    let mut sums = vec![0u128; checkpoints.len()];
    let mut squares = vec![0u128; checkpoints.len()];
    for values in per_trajectory {
        for (j, v) in values?.into_iter().enumerate() {
            sums[j] += v as u128;
            squares[j] += (v as u128) * (v as u128);
        }
    }
    let count = config.trajectories as f64;
    let points = checkpoints
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let mean_norm = sums[j] as f64 / count;
            let var_norm = if config.trajectories > 1 {
                ((squares[j] as f64 - sums[j] as f64 * mean_norm) / (count - 1.0)).max(0.0)
            } else {
                0.0
            };
            let std_dev = var_norm.sqrt() / n as f64;
            MonteCarloPoint {
                n,
                mean: mean_norm / n as f64,
                std_dev,
                half_width: Z_95 * std_dev / count.sqrt(),
                trajectories: config.trajectories,
            }
        })
        .collect();
    Ok(MonteCarloDrift {
        seed: config.seed,
        trajectories: config.trajectories,
        points,
    })
}

/// Term-by-term comparison of `a_n(mu)` and `a_n(check mu)`.
#[derive(Clone, Debug)]
pub struct AdjointDriftComparison<W> {
    pub forward: ExactDrift<W>,
    pub adjoint: ExactDrift<W>,
}

impl<W: Weight> AdjointDriftComparison<W> {
    pub fn max_abs_difference(&self) -> f64 {
        self.forward
            .a
            .iter()
            .zip(&self.adjoint.a)
            .map(|(x, y)| (x.clone() - y.clone()).abs_value().to_f64())
            .fold(0.0, f64::max)
    }

    pub fn exactly_equal(&self) -> bool {
        self.forward.a == self.adjoint.a
    }
}

pub fn adjoint_drift_equality<W: Weight>(
    mu: &FiniteMeasure<W>,
    norm: &dyn WordNorm,
    n_max: usize,
    threshold: &W,
    workers: exec::Workers,
) -> Result<AdjointDriftComparison<W>> {
    Ok(AdjointDriftComparison {
        forward: drift_exact_partial(mu, norm, n_max, threshold, workers)?,
        adjoint: drift_exact_partial(&mu.adjoint(), norm, n_max, threshold, workers)?,
    })
}

/// Shannon entropies `H_n = -sum mu^{*n}(s) log mu^{*n}(s)` (natural log).
#[derive(Clone, Debug, Serialize)]
pub struct EntropyReport {
    /// `entropy[n]` for `n = 0..=n_max`.
    pub entropy: Vec<f64>,
    pub deficit: Vec<f64>,
    /// `min_{n >= 1} H_n / n`.
    pub estimate: f64,
}

impl EntropyReport {
    pub fn rate(&self, n: usize) -> f64 {
        self.entropy[n] / n as f64
    }

    /// Largest `H_{m+n} - H_m - H_n` over computed pairs.
    pub fn max_subadditivity_excess(&self) -> f64 {
        let n_max = self.entropy.len() - 1;
        let mut worst = f64::NEG_INFINITY;
        for m in 1..n_max {
            for n in 1..=(n_max - m) {
                worst = worst.max(self.entropy[m + n] - self.entropy[m] - self.entropy[n]);
            }
        }
        worst
    }
}

pub fn entropy_from_powers<W: Weight>(powers: &[FiniteMeasure<W>]) -> EntropyReport {
    let entropy: Vec<f64> = powers
        .iter()
        .map(|p| {
            p.iter()
                .map(|(_, w)| {
                    let w = w.to_f64();
                    -w * w.ln()
                })
                .sum::<f64>()
                .max(0.0)
        })
        .collect();
    let estimate = (1..entropy.len())
        .map(|n| entropy[n] / n as f64)
        .fold(f64::INFINITY, f64::min);
    EntropyReport {
        deficit: powers.iter().map(|p| p.deficit().to_f64()).collect(),
        entropy,
        estimate,
    }
}

pub fn entropy_partial<W: Weight>(
    mu: &FiniteMeasure<W>,
    n_max: usize,
    threshold: &W,
    workers: exec::Workers,
) -> Result<EntropyReport> {
    Ok(entropy_from_powers(&mu.powers(n_max, threshold, workers)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{GroupElement, GroupId};
    use crate::metric::{build_ball, ClosedFormNorm};
    use num::rational::BigRational;
    use num::Zero;

    type Q = BigRational;

    fn q(n: i64, d: i64) -> Q {
        Q::from_ratio(n, d)
    }

    fn z1() -> GroupId {
        GroupId::FreeAbelian { d: 1 }
    }

    #[test]
    fn integer_srw_first_terms() {
        let mu = FiniteMeasure::<Q>::simple_random_walk(z1());
        let norm = ClosedFormNorm::new(z1()).unwrap();
        let d = drift_exact_partial(&mu, &norm, 2, &Q::zero(), 1).unwrap();
        assert_eq!(d.a[1], q(1, 1));
        assert_eq!(d.a[2], q(1, 1));
        assert_eq!(d.certified_bound_exact().unwrap(), q(1, 2));
    }

    #[test]
    fn free_srw_first_terms() {
        let f2 = GroupId::Free { k: 2 };
        let mu = FiniteMeasure::<Q>::simple_random_walk(f2);
        let norm = ClosedFormNorm::new(f2).unwrap();
        let d = drift_exact_partial(&mu, &norm, 4, &Q::zero(), 1).unwrap();
        assert_eq!(d.a[1], q(1, 1));
        assert_eq!(d.a[2], q(3, 2));
        assert!(d.is_exactly_subadditive());
    }

    #[test]
    fn deterministic_walk_has_unit_drift() {
        let mu = FiniteMeasure::<Q>::dirac(z1(), GroupElement::Vector(vec![1])).unwrap();
        let norm = ClosedFormNorm::new(z1()).unwrap();
        let d = drift_exact_partial(&mu, &norm, 6, &Q::zero(), 1).unwrap();
        for n in 0..=6 {
            assert_eq!(d.a[n], q(n as i64, 1));
        }
        assert_eq!(d.certified_bound(), 1.0);
    }

    #[test]
    fn escaping_support_is_reported() {
        let f2 = GroupId::Free { k: 2 };
        let mu = FiniteMeasure::<Q>::simple_random_walk(f2);
        let ball = build_ball(f2, &f2.generators(), 3, 1_000_000).unwrap();
        let err = drift_exact_partial(&mu, &ball, 5, &Q::zero(), 1).unwrap_err();
        assert!(matches!(err, Error::SupportEscapes { step: 4, radius: 3 }), "{err}");
    }

    #[test]
    fn truncation_error_bars_cover_exact_values() {
        let z2 = GroupId::FreeAbelian { d: 2 };
        let norm = ClosedFormNorm::new(z2).unwrap();
        let mu = FiniteMeasure::<f64>::simple_random_walk(z2);
        let exact = drift_exact_partial(&mu, &norm, 10, &0.0, 1).unwrap();
        let cut = drift_exact_partial(&mu, &norm, 10, &1e-4, 1).unwrap();
        for n in 1..=10 {
            assert!(cut.a[n] <= exact.a[n] + 1e-12);
            assert!(exact.a[n] <= cut.a[n] + cut.error[n] + 1e-12, "n = {n}");
        }
        assert!(cut.max_subadditivity_excess() <= 1e-12);
    }

    #[test]
    fn adjoint_drift_on_biased_integer_walk() {
        let mu = FiniteMeasure::from_atoms(
            z1(),
            [(GroupElement::Vector(vec![1]), q(2, 3)), (GroupElement::Vector(vec![-1]), q(1, 3))],
        )
        .unwrap();
        let norm = ClosedFormNorm::new(z1()).unwrap();
        let cmp = adjoint_drift_equality(&mu, &norm, 12, &Q::zero(), 1).unwrap();
        assert!(cmp.exactly_equal());
        // E|S_1| = 1 and E|S_2| = 2 * (4/9 + 1/9) = 10/9
        assert_eq!(cmp.forward.a[2], q(10, 9));
    }

    #[test]
    fn entropy_examples() {
        let mu = FiniteMeasure::<Q>::dirac(z1(), GroupElement::Vector(vec![1])).unwrap();
        let rep = entropy_partial(&mu, 5, &Q::zero(), 1).unwrap();
        assert!(rep.entropy.iter().all(|h| *h == 0.0));

        let srw = FiniteMeasure::<Q>::simple_random_walk(z1());
        let rep = entropy_partial(&srw, 4, &Q::zero(), 1).unwrap();
        assert!((rep.entropy[1] - 2f64.ln()).abs() < 1e-15);
        assert!(rep.max_subadditivity_excess() <= 1e-12);

        let f2 = FiniteMeasure::<Q>::simple_random_walk(GroupId::Free { k: 2 });
        let rep = entropy_partial(&f2, 5, &Q::zero(), 1).unwrap();
        assert!((rep.entropy[1] - 4f64.ln()).abs() < 1e-15);
        for n in 1..5 {
            assert!(rep.rate(n + 1) < rep.rate(n));
        }
    }

    #[test]
    fn monte_carlo_is_worker_independent() {
        let f2 = GroupId::Free { k: 2 };
        let mu = FiniteMeasure::<f64>::simple_random_walk(f2);
        let norm = ClosedFormNorm::new(f2).unwrap();
        let cfg = SamplerConfig {
            seed: 9,
            trajectories: 300,
            steps: 100,
            workers: 1,
        };
        let a = drift_monte_carlo(&mu, &norm, &cfg, &[50, 100]).unwrap();
        let b = drift_monte_carlo(&mu, &norm, &SamplerConfig { workers: 3, ..cfg }, &[100, 50]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.points.len(), 2);
    }
}
