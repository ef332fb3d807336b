//! Exact radial computations for the simple random walk on a free group.
//!
//! The word length of the simple random walk on `F_k` is a birth-death chain
//! (up with probability `(2k-1)/2k` away from the origin), and given its
//! radius the position is uniform on the sphere. Together these give `a_n`
//! and `f_n(s)` in time polynomial in `n`, where generic convolution would
//! have to enumerate `~(2k-1)^n` atoms.

use std::collections::BTreeMap;

use crate::drift::ExactDrift;
use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupId};
use crate::quasi::{Bounded, FkTable};
use crate::weight::Weight;

#[derive(Clone, Debug)]
pub struct FreeSrwRadial<W> {
    group: GroupId,
    rank: usize,
    /// `cancel[i]` is the probability that at least `i + 1` letters cancel
    /// when a reduced word is multiplied by a uniform word on a sphere.
    cancel: Vec<W>,
    laws: Vec<Vec<W>>,
}

impl<W: Weight> FreeSrwRadial<W> {
    /// Radial data for `n_max` steps of the simple random walk on `group`.
    pub fn new(group: GroupId, n_max: usize) -> Result<Self> {
        let rank = match group {
            GroupId::Free { k } => k as usize,
            other => return Err(Error::Domain(format!("radial backend needs a free group, got {other}"))),
        };
        group.validate()?;
        let two_k = 2 * rank as i64;
        let mut cancel = Vec::with_capacity(n_max + 1);
        let mut q = W::from_ratio(1, two_k);
        let step = W::from_ratio(1, two_k - 1);
        for _ in 0..=n_max {
            cancel.push(q.clone());
            q = q * step.clone();
        }
        let up = W::from_ratio(two_k - 1, two_k);
        let down = W::from_ratio(1, two_k);
        let mut laws = Vec::with_capacity(n_max + 1);
        let mut law = vec![W::one()];
        laws.push(law.clone());
        for _ in 0..n_max {
            let mut next = vec![W::zero(); law.len() + 1];
            for (r, p) in law.iter().enumerate() {
                if p.is_zero() {
                    continue;
                }
                if r == 0 {
                    next[1] = next[1].clone() + p.clone();
                } else {
                    next[r + 1] = next[r + 1].clone() + p.clone() * up.clone();
                    next[r - 1] = next[r - 1].clone() + p.clone() * down.clone();
                }
            }
            laws.push(next.clone());
            law = next;
        }
        Ok(FreeSrwRadial { group, rank, cancel, laws })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn n_max(&self) -> usize {
        self.laws.len() - 1
    }

    /// Law of `|X_n|` as a vector indexed by radius.
    pub fn radius_law(&self, n: usize) -> &[W] {
        &self.laws[n]
    }

    /// `a_n = E|X_n|` for `n = 0..=n_max`.
    pub fn drift(&self) -> ExactDrift<W> {
        let a: Vec<W> = self
            .laws
            .iter()
            .map(|law| {
                law.iter()
                    .enumerate()
                    .fold(W::zero(), |acc, (r, p)| acc + W::from_int(r as i64) * p.clone())
            })
            .collect();
        let n = a.len();
        ExactDrift {
            a,
            error: vec![0.0; n],
            deficit: vec![0.0; n],
        }
    }

    /// `E|sX_n| - E|X_n|` for any `s` of length `r`.
    pub fn fk_radial(&self, n: usize, r: usize) -> W {
        let mut acc = W::zero();
        let mut partial = W::zero();
        let mut used = 0;
        for (j, p) in self.laws[n].iter().enumerate() {
            let m = r.min(j);
            while used < m {
                partial = partial + self.cancel[used].clone();
                used += 1;
            }
            if p.is_zero() {
                continue;
            }
            let shift = W::from_int(r as i64) - W::from_int(2) * partial.clone();
            acc = acc + shift * p.clone();
        }
        acc
    }

    /// `f_0, ..., f_n` tabulated on `eval`.
    pub fn fk_sequence(&self, n: usize, eval: &[GroupElement]) -> Result<Vec<FkTable<W>>> {
        if n > self.n_max() {
            return Err(Error::Precondition(format!("radial data prepared up to {} steps", self.n_max())));
        }
        let mut lengths = Vec::with_capacity(eval.len());
        for g in eval {
            if !self.group.contains(g) {
                return Err(Error::Domain(format!("{g} is not an element of {}", self.group)));
            }
            lengths.push(g.word_len().expect("free group element"));
        }
        let max_len = lengths.iter().copied().max().unwrap_or(0);
        Ok((0..=n)
            .map(|k| {
                let by_len: Vec<W> = (0..=max_len).map(|r| self.fk_radial(k, r)).collect();
                let entries: BTreeMap<GroupElement, Bounded<W>> = eval
                    .iter()
                    .zip(&lengths)
                    .map(|(g, &r)| {
                        (
                            g.clone(),
                            Bounded {
                                value: by_len[r].clone(),
                                error: 0.0,
                            },
                        )
                    })
                    .collect();
                FkTable {
                    k,
                    group: self.group,
                    entries,
                }
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::drift_exact_partial;
    use crate::measure::FiniteMeasure;
    use crate::metric::{build_ball, ClosedFormNorm};
    use crate::quasi::compute_fk_sequence;
    use num::rational::BigRational;
    use num::Zero;

    type Q = BigRational;

    #[test]
    fn laws_are_normalized() {
        let rad = FreeSrwRadial::<Q>::new(GroupId::Free { k: 2 }, 20).unwrap();
        for n in 0..=20 {
            let total = rad.radius_law(n).iter().fold(Q::zero(), |a, p| a + p.clone());
            assert_eq!(total, Q::from_int(1));
        }
    }

    #[test]
    fn matches_convolution() {
        for k in [1u32, 2, 3] {
            let f = GroupId::Free { k };
            let n = if k == 3 { 4 } else { 6 };
            let rad = FreeSrwRadial::<Q>::new(f, n).unwrap();
            let mu = FiniteMeasure::<Q>::simple_random_walk(f);
            let norm = ClosedFormNorm::new(f).unwrap();
            let drift = drift_exact_partial(&mu, &norm, n, &Q::zero(), 1).unwrap();
            assert_eq!(rad.drift().a, drift.a, "rank {k}");
            let eval = build_ball(f, &f.generators(), 3, 1 << 20).unwrap().elements_within(3);
            let generic = compute_fk_sequence(&mu, &norm, n, &eval, &Q::zero(), 1).unwrap();
            let radial = rad.fk_sequence(n, &eval).unwrap();
            for (a, b) in generic.iter().zip(&radial) {
                for (g, x) in &a.entries {
                    assert_eq!(x.value, b.entries[g].value, "rank {k}, f_{} at {g}", a.k);
                }
            }
        }
    }

    #[test]
    fn rejects_other_groups() {
        assert!(FreeSrwRadial::<Q>::new(GroupId::FreeAbelian { d: 2 }, 3).is_err());
    }
}
