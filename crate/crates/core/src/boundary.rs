//! Exact model of the boundary of a free group under the simple random walk.
//!
//! Boundary points are infinite reduced words and the hitting measure gives
//! the cylinder `C_w` of words extending `w` mass `(1/2k) (2k-1)^{1-|w|}`.
//! Everything here is exact rational arithmetic; values of the Poisson
//! cocycle are integer powers of `2k-1` and are carried as exponents.
//!
//! Finite-level cylinders stand in for the conull set on which the cocycle is
//! defined: `sigma(g, .)` is constant on every cylinder of level at least `|g|`.

use num::rational::BigRational;
use num::traits::Pow;
use num::{BigInt, One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{self, Workers};
use crate::group::{GroupElement, GroupId, Letter};
use crate::measure::FiniteMeasure;
use crate::metric::{build_ball, DEFAULT_BALL_BUDGET};
use crate::sampler::{trajectory_stream, IncrementSampler, SamplerConfig};

type Q = BigRational;

/// Upper bound on the number of cylinders enumerated at one level.
pub const MAX_CYLINDERS: u128 = 50_000_000;

/// The set of boundary points extending a nonempty reduced prefix.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cylinder {
    prefix: Vec<Letter>,
}

impl Cylinder {
    pub fn prefix(&self) -> &[Letter] {
        &self.prefix
    }

    pub fn level(&self) -> usize {
        self.prefix.len()
    }

    pub fn as_element(&self) -> GroupElement {
        GroupElement::Word(self.prefix.clone())
    }
}

impl std::fmt::Display for Cylinder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "C[{}]", self.as_element())
    }
}

/// A function on the boundary that is constant on the cylinders of one level.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderFunction {
    pub level: usize,
    /// Values in the enumeration order of [`FreeBoundary::cylinders`].
    pub values: Vec<Q>,
}

fn common_prefix(a: &[Letter], b: &[Letter]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

fn pow_q(base: i64, exp: i64) -> Q {
    let b = Q::from_integer(BigInt::from(base));
    if exp >= 0 {
        Pow::pow(b, exp as u64)
    } else {
        Pow::pow(b.recip(), exp.unsigned_abs())
    }
}

fn word(g: &GroupElement) -> Result<&[Letter]> {
    g.letters()
        .ok_or_else(|| Error::Domain(format!("{g} is not a free-group element")))
}

#[derive(Clone, Debug, Serialize)]
pub struct CocycleCheck {
    pub checked: usize,
    /// Largest difference of exponents of `2k-1` between the two sides.
    pub max_exponent_residual: i64,
    /// Largest absolute difference of the two sides, as `p/q`.
    pub max_residual: String,
    pub exact_zero: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SemiNormValue {
    pub element: String,
    /// `rho_mu(g) = exponent * log(2k-1)`.
    pub exponent: u64,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CSequence {
    /// `log(2k-1)`.
    pub log_base: f64,
    /// `c_n / log(2k-1)` for `n = 1..=n_max`, as `p/q`.
    pub coefficients: Vec<String>,
    pub values: Vec<f64>,
    /// Whether `c_n = n c_1` holds exactly for every computed `n`.
    pub additive: bool,
    #[serde(skip)]
    pub exact: Vec<Q>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CylinderFrequency {
    pub cylinder: String,
    pub empirical: f64,
    pub expected: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CylinderFrequencyReport {
    pub level: usize,
    pub steps: usize,
    pub seed: u64,
    pub trajectories: usize,
    pub frequencies: Vec<CylinderFrequency>,
    /// Fraction of walks whose endpoint was shorter than the level.
    pub unresolved: f64,
    pub total_variation: f64,
}

/// Boundary of `F_k` with the hitting measure of the simple random walk.
#[derive(Clone, Copy, Debug)]
pub struct FreeBoundary {
    group: GroupId,
    rank: u32,
}

impl FreeBoundary {
    pub fn new(group: GroupId) -> Result<Self> {
        match group.validate()? {
            GroupId::Free { k } if k >= 2 => Ok(FreeBoundary { group, rank: k }),
            GroupId::Free { k } => Err(Error::Domain(format!("boundary model needs rank >= 2, got {k}"))),
            other => Err(Error::Domain(format!("boundary model is only available for free groups, got {other}"))),
        }
    }

    /// Boundary of the group carrying `mu`, which must be the simple random walk.
    pub fn for_measure(mu: &FiniteMeasure<Q>) -> Result<Self> {
        let b = FreeBoundary::new(mu.group())?;
        b.require_srw(mu)?;
        Ok(b)
    }

    pub fn require_srw(&self, mu: &FiniteMeasure<Q>) -> Result<()> {
        let gens = self.group.generators();
        let w = Q::new(BigInt::one(), BigInt::from(2 * self.rank));
        let ok = mu.group() == self.group
            && mu.deficit().is_zero()
            && mu.len() == gens.len()
            && gens.iter().all(|g| mu.weight(g) == w);
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(
                "the boundary model only admits the simple random walk (uniform on the standard generators)".into(),
            ))
        }
    }

    pub fn group(&self) -> GroupId {
        self.group
    }

    /// `2k - 1`.
    pub fn base(&self) -> i64 {
        2 * self.rank as i64 - 1
    }

    pub fn log_base(&self) -> f64 {
        (self.base() as f64).ln()
    }

    /// `2k (2k-1)^{level-1}`.
    pub fn cylinder_count(&self, level: usize) -> u128 {
        if level == 0 {
            return 1;
        }
        let b = self.base() as u128;
        (0..level - 1).fold(2 * self.rank as u128, |acc, _| acc.saturating_mul(b))
    }

    pub fn cylinder(&self, prefix: &GroupElement) -> Result<Cylinder> {
        if !self.group.contains(prefix) {
            return Err(Error::Domain(format!("{prefix} is not an element of {}", self.group)));
        }
        let w = word(prefix)?;
        if w.is_empty() {
            return Err(Error::Domain("cylinders need a nonempty prefix".into()));
        }
        Ok(Cylinder { prefix: w.to_vec() })
    }

    /// All cylinders of a level, in lexicographic order of letter codes.
    pub fn cylinders(&self, level: usize) -> Result<Vec<Cylinder>> {
        if level == 0 {
            return Err(Error::Domain("cylinder level must be at least 1".into()));
        }
        let count = self.cylinder_count(level);
        if count > MAX_CYLINDERS {
            return Err(Error::Resource {
                budget: MAX_CYLINDERS as usize,
                radius: level as u32,
            });
        }
        let letters = 2 * self.rank as usize;
        let mut out = Vec::with_capacity(count as usize);
        let mut stack: Vec<Letter> = Vec::with_capacity(level);
        fn rec(stack: &mut Vec<Letter>, level: usize, letters: usize, out: &mut Vec<Cylinder>) {
            if stack.len() == level {
                out.push(Cylinder { prefix: stack.clone() });
                return;
            }
            for code in 0..letters {
                let l = Letter::from_code(code);
                if stack.last().is_some_and(|p| p.inverse() == l) {
                    continue;
                }
                stack.push(l);
                rec(stack, level, letters, out);
                stack.pop();
            }
        }
        rec(&mut stack, level, letters, &mut out);
        Ok(out)
    }

    /// Position of a cylinder in the enumeration order of its level.
    pub fn cylinder_index(&self, c: &Cylinder) -> usize {
        let b = self.base() as usize;
        let mut idx = 0usize;
        for (i, l) in c.prefix.iter().enumerate() {
            let r = if i == 0 {
                l.code()
            } else {
                let banned = c.prefix[i - 1].inverse().code();
                l.code() - usize::from(l.code() > banned)
            };
            idx = if i == 0 { r } else { idx * b + r };
        }
        idx
    }

    /// Exponent `e` with `m(C_w) = (1/2k) (2k-1)^e`, i.e. `e = 1 - |w|`.
    pub fn mass(&self, c: &Cylinder) -> Q {
        self.mass_at_level(c.level())
    }

    fn mass_at_level(&self, level: usize) -> Q {
        pow_q(self.base(), 1 - level as i64) / Q::from_integer(BigInt::from(2 * self.rank))
    }

    /// Exponent of `sigma(g, C) = (2k-1)^{2p - |g|}`, `p` the common prefix length.
    pub fn cocycle_exponent(&self, g: &GroupElement, c: &Cylinder) -> Result<i64> {
        let w = word(g)?;
        if c.level() < w.len() {
            return Err(Error::LevelTooShallow {
                level: c.level(),
                required: w.len(),
            });
        }
        Ok(2 * common_prefix(w, &c.prefix) as i64 - w.len() as i64)
    }

    pub fn cocycle(&self, g: &GroupElement, c: &Cylinder) -> Result<Q> {
        Ok(pow_q(self.base(), self.cocycle_exponent(g, c)?))
    }

    /// The cylinder `g C`; needs `level(C) > |g|` so the prefix is not consumed.
    pub fn translate(&self, g: &GroupElement, c: &Cylinder) -> Result<Cylinder> {
        let w = word(g)?;
        if c.level() <= w.len() {
            return Err(Error::LevelTooShallow {
                level: c.level(),
                required: w.len() + 1,
            });
        }
        match GroupElement::reduced_word(w.iter().copied().chain(c.prefix.iter().copied())) {
            GroupElement::Word(prefix) => Ok(Cylinder { prefix }),
            _ => unreachable!(),
        }
    }

    /// `sigma(st, C) = sigma(s, C) sigma(t, s^{-1} C)` on every cylinder of `level`.
    pub fn check_cocycle_identity(&self, s: &GroupElement, t: &GroupElement, level: usize) -> Result<CocycleCheck> {
        let cylinders = self.cylinders(self.required_identity_level(s, t, level)?)?;
        self.cocycle_identity_on(&[(s.clone(), t.clone())], &cylinders, 1)
    }

    /// The cocycle identity for every ordered pair from the ball of `radius`.
    pub fn check_cocycle_identity_ball(&self, radius: u32, level: usize, workers: Workers) -> Result<CocycleCheck> {
        let ball = build_ball(self.group, &self.group.generators(), radius, DEFAULT_BALL_BUDGET)?.elements_within(radius);
        let pairs: Vec<(GroupElement, GroupElement)> = ball
            .iter()
            .flat_map(|s| ball.iter().map(move |t| (s.clone(), t.clone())))
            .collect();
        let worst = 2 * radius as usize;
        if level < worst.max(radius as usize + 1) {
            return Err(Error::LevelTooShallow {
                level,
                required: worst.max(radius as usize + 1),
            });
        }
        let cylinders = self.cylinders(level)?;
        self.cocycle_identity_on(&pairs, &cylinders, workers)
    }

    fn required_identity_level(&self, s: &GroupElement, t: &GroupElement, level: usize) -> Result<usize> {
        let (ls, lt) = (word(s)?.len(), word(t)?.len());
        let required = (ls + lt).max(ls + 1);
        if level < required {
            return Err(Error::LevelTooShallow { level, required });
        }
        Ok(level)
    }

    fn cocycle_identity_on(
        &self,
        pairs: &[(GroupElement, GroupElement)],
        cylinders: &[Cylinder],
        workers: Workers,
    ) -> Result<CocycleCheck> {
        let per_pair = exec::map_indexed(pairs.len(), workers, |i| -> Result<i64> {
            let (s, t) = &pairs[i];
            let st = GroupElement::reduced_word(word(s)?.iter().chain(word(t)?).copied());
            let s_inv = GroupElement::reduced_word(word(s)?.iter().rev().map(|l| l.inverse()));
            let mut worst = 0i64;
            for c in cylinders {
                let lhs = self.cocycle_exponent(&st, c)?;
                let rhs = self.cocycle_exponent(s, c)? + self.cocycle_exponent(t, &self.translate(&s_inv, c)?)?;
                worst = worst.max((lhs - rhs).abs());
            }
            Ok(worst)
        });
        let mut max_exp = 0i64;
        for r in per_pair {
            max_exp = max_exp.max(r?);
        }
        let residual = if max_exp == 0 {
            Q::zero()
        } else {
            pow_q(self.base(), max_exp) - Q::one()
        };
        Ok(CocycleCheck {
            checked: pairs.len() * cylinders.len(),
            max_exponent_residual: max_exp,
            max_residual: residual.to_string(),
            exact_zero: max_exp == 0,
        })
    }

    /// `max_C |sum_s sigma(s, C) mu^{*k}(s) - 1|` over the cylinders of `level`.
    pub fn check_cocycle_normalization(&self, mu: &FiniteMeasure<Q>, k_power: usize, level: usize) -> Result<Q> {
        self.require_srw(mu)?;
        let power = mu.power(k_power, &Q::zero(), 1)?;
        let max_len = power.support().map(|g| g.word_len().unwrap_or(0)).max().unwrap_or(0);
        if level < max_len.max(1) {
            return Err(Error::LevelTooShallow {
                level,
                required: max_len.max(1),
            });
        }
        let mut worst = Q::zero();
        for c in self.cylinders(level)? {
            let mut total = Q::zero();
            for (s, w) in power.iter() {
                total += self.cocycle(s, &c)? * w;
            }
            let r = (total - Q::one()).abs();
            if r > worst {
                worst = r;
            }
        }
        Ok(worst)
    }

    /// `rho_mu(g) = log sup_z sigma(g, z)`, maximized over one representative
    /// cylinder for each possible common-prefix length with `g`.
    pub fn poisson_seminorm(&self, g: &GroupElement) -> Result<SemiNormValue> {
        if !self.group.contains(g) {
            return Err(Error::Domain(format!("{g} is not an element of {}", self.group)));
        }
        let w = word(g)?;
        let level = w.len().max(1);
        let mut best: Option<i64> = None;
        for p in 0..=w.len() {
            if let Some(c) = self.diverging_cylinder(w, p, level) {
                let e = self.cocycle_exponent(g, &c)?;
                best = Some(best.map_or(e, |b| b.max(e)));
            }
        }
        let exponent = best.expect("p = |g| always has a representative") as u64;
        Ok(SemiNormValue {
            element: g.to_string(),
            exponent,
            value: exponent as f64 * self.log_base(),
        })
    }

    /// A cylinder of `level` sharing exactly `p` leading letters with `w`.
    fn diverging_cylinder(&self, w: &[Letter], p: usize, level: usize) -> Option<Cylinder> {
        let mut prefix: Vec<Letter> = w[..p].to_vec();
        let letters = 2 * self.rank as usize;
        let allowed = |prev: Option<Letter>, avoid: Option<Letter>| {
            (0..letters)
                .map(Letter::from_code)
                .find(|l| prev.is_none_or(|q| q.inverse() != *l) && avoid != Some(*l))
        };
        if p < w.len() {
            prefix.push(allowed(prefix.last().copied(), Some(w[p]))?);
        }
        while prefix.len() < level {
            prefix.push(allowed(prefix.last().copied(), None)?);
        }
        Some(Cylinder { prefix })
    }

    /// `int log sigma(s, z) dm(z) / log(2k-1) = 2 E[p] - |s|`, where
    /// `P(p >= i) = m(C_{s_1..s_i})`.
    pub fn log_cocycle_integral(&self, s: &GroupElement) -> Result<Q> {
        let w = word(s)?;
        let mut expected_prefix = Q::zero();
        for i in 1..=w.len() {
            expected_prefix += self.mass_at_level(i);
        }
        Ok(Q::from_integer(BigInt::from(2)) * expected_prefix - Q::from_integer(BigInt::from(w.len())))
    }

    /// `c_n = sum_s (int log sigma(s, z) dm(z)) mu_check^{*n}(s)` for `n = 1..=n_max`.
    pub fn c_sequence(&self, mu: &FiniteMeasure<Q>, n_max: usize) -> Result<CSequence> {
        self.require_srw(mu)?;
        let powers = mu.adjoint().powers(n_max, &Q::zero(), 1)?;
        let mut exact = Vec::with_capacity(n_max);
        for p in powers.iter().skip(1) {
            let mut c = Q::zero();
            for (s, w) in p.iter() {
                c += self.log_cocycle_integral(s)? * w;
            }
            exact.push(c);
        }
        let additive = exact
            .iter()
            .enumerate()
            .all(|(i, c)| *c == exact[0].clone() * Q::from_integer(BigInt::from(i + 1)));
        let lb = self.log_base();
        Ok(CSequence {
            log_base: lb,
            coefficients: exact.iter().map(|c| c.to_string()).collect(),
            values: exact.iter().map(|c| q_to_f64(c) * lb).collect(),
            additive,
            exact,
        })
    }

    pub fn constant_function(&self, level: usize, value: Q) -> Result<CylinderFunction> {
        let n = self.cylinder_count(level);
        if level == 0 || n > MAX_CYLINDERS {
            return Err(Error::Domain(format!("unsupported cylinder level {level}")));
        }
        Ok(CylinderFunction {
            level,
            values: vec![value; n as usize],
        })
    }

    /// Indicator of `C`, as a function of level `level(C)`.
    pub fn indicator(&self, c: &Cylinder) -> Result<CylinderFunction> {
        let mut f = self.constant_function(c.level(), Q::zero())?;
        f.values[self.cylinder_index(c)] = Q::one();
        Ok(f)
    }

    /// The same function viewed at a deeper level.
    pub fn refine(&self, f: &CylinderFunction, level: usize) -> Result<CylinderFunction> {
        self.check_function(f)?;
        if level < f.level {
            return Err(Error::Domain(format!("cannot refine level {} down to {level}", f.level)));
        }
        let values = self
            .cylinders(level)?
            .into_iter()
            .map(|c| {
                let coarse = Cylinder {
                    prefix: c.prefix[..f.level].to_vec(),
                };
                f.values[self.cylinder_index(&coarse)].clone()
            })
            .collect();
        Ok(CylinderFunction { level, values })
    }

    fn check_function(&self, f: &CylinderFunction) -> Result<()> {
        if f.level == 0 || f.values.len() as u128 != self.cylinder_count(f.level) {
            return Err(Error::Domain(format!(
                "cylinder function of level {} needs {} values, got {}",
                f.level,
                self.cylinder_count(f.level),
                f.values.len()
            )));
        }
        Ok(())
    }

    /// `P f(g) = int f(g z) dm(z) = sum_w f(w) m(g^{-1} C_w)`.
    pub fn poisson_integral(&self, f: &CylinderFunction, g: &GroupElement) -> Result<Q> {
        self.check_function(f)?;
        let w = word(g)?;
        if f.level < w.len() + 1 {
            return Err(Error::LevelTooShallow {
                level: f.level,
                required: w.len() + 1,
            });
        }
        let mut total = Q::zero();
        for (c, v) in self.cylinders(f.level)?.iter().zip(&f.values) {
            if v.is_zero() {
                continue;
            }
            let p = common_prefix(w, &c.prefix);
            total += self.mass_at_level(w.len() + c.level() - 2 * p) * v;
        }
        Ok(total)
    }

    /// `max_g |sum_s P f(gs) mu(s) - P f(g)|` over the ball of `radius`.
    pub fn check_harmonicity(&self, f: &CylinderFunction, mu: &FiniteMeasure<Q>, radius: u32) -> Result<Q> {
        self.require_srw(mu)?;
        let f = self.refine(f, f.level.max(radius as usize + 2))?;
        let ball = build_ball(self.group, &self.group.generators(), radius, DEFAULT_BALL_BUDGET)?.elements_within(radius);
        let mut worst = Q::zero();
        for g in &ball {
            let mut lhs = Q::zero();
            for (s, w) in mu.iter() {
                let gs = self.group.mul(g, s)?;
                lhs += self.poisson_integral(&f, &gs)? * w;
            }
            let r = (lhs - self.poisson_integral(&f, g)?).abs();
            if r > worst {
                worst = r;
            }
        }
        Ok(worst)
    }

    /// Rank of the rows `sigma(s, .)` on the cylinders of `level`, `s` in the ball of `radius`.
    pub fn span_rank(&self, level: usize, radius: u32) -> Result<usize> {
        if radius as usize > level {
            return Err(Error::LevelTooShallow {
                level,
                required: radius as usize,
            });
        }
        let cylinders = self.cylinders(level.max(1))?;
        let ball = build_ball(self.group, &self.group.generators(), radius, DEFAULT_BALL_BUDGET)?.elements_within(radius);
        let mut rows: Vec<Vec<Q>> = Vec::with_capacity(ball.len());
        for s in &ball {
            rows.push(cylinders.iter().map(|c| self.cocycle(s, c)).collect::<Result<_>>()?);
        }
        Ok(rational_rank(rows))
    }

    /// Cylinder frequencies of the endpoints of sampled walks against the hitting measure.
    pub fn cylinder_frequency_check(&self, config: &SamplerConfig, level: usize) -> Result<CylinderFrequencyReport> {
        config.validate()?;
        let cylinders = self.cylinders(level)?;
        let mu = FiniteMeasure::<Q>::simple_random_walk(self.group);
        let sampler = IncrementSampler::new(&mu)?;
        let hits = exec::map_indexed(config.trajectories, config.workers, |i| -> Result<Option<usize>> {
            let mut rng = trajectory_stream(config.seed, i as u64);
            let x = sampler.walk(config.steps, &mut rng, |_, _| Ok(()))?;
            let w = word(&x)?;
            Ok((w.len() >= level).then(|| self.cylinder_index(&Cylinder { prefix: w[..level].to_vec() })))
        });
        let mut counts = vec![0u64; cylinders.len()];
        let mut unresolved = 0u64;
        for h in hits {
            match h? {
                Some(i) => counts[i] += 1,
                None => unresolved += 1,
            }
        }
        let total = config.trajectories as f64;
        let expected = q_to_f64(&self.mass_at_level(level));
        let frequencies: Vec<CylinderFrequency> = cylinders
            .iter()
            .zip(&counts)
            .map(|(c, &n)| CylinderFrequency {
                cylinder: c.to_string(),
                empirical: n as f64 / total,
                expected,
            })
            .collect();
        let unresolved = unresolved as f64 / total;
        let tv = 0.5 * (frequencies.iter().map(|f| (f.empirical - f.expected).abs()).sum::<f64>() + unresolved);
        Ok(CylinderFrequencyReport {
            level,
            steps: config.steps,
            seed: config.seed,
            trajectories: config.trajectories,
            frequencies,
            unresolved,
            total_variation: tv,
        })
    }
}

fn q_to_f64(q: &Q) -> f64 {
    use num::ToPrimitive;
    q.to_f64().unwrap_or(f64::NAN)
}

/// Rank by Gaussian elimination over the rationals.
pub fn rational_rank(mut rows: Vec<Vec<Q>>) -> usize {
    let cols = rows.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, pivot);
        let inv = rows[rank][col].recip();
        for j in col..cols {
            rows[rank][j] = &rows[rank][j] * &inv;
        }
        for r in 0..rows.len() {
            if r != rank && !rows[r][col].is_zero() {
                let factor = rows[r][col].clone();
                for j in col..cols {
                    let d = &factor * &rows[rank][j];
                    rows[r][j] -= d;
                }
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f2() -> GroupId {
        GroupId::Free { k: 2 }
    }

    fn q(n: i64, d: i64) -> Q {
        Q::new(BigInt::from(n), BigInt::from(d))
    }

    fn el(s: &str) -> GroupElement {
        f2().parse_element(s).unwrap()
    }

    fn srw() -> FiniteMeasure<Q> {
        FiniteMeasure::simple_random_walk(f2())
    }

    #[test]
    fn cylinders_partition() {
        let b = FreeBoundary::new(f2()).unwrap();
        for level in 1..=5 {
            let cs = b.cylinders(level).unwrap();
            assert_eq!(cs.len() as u128, b.cylinder_count(level));
            let total = cs.iter().fold(Q::zero(), |acc, c| acc + b.mass(c));
            assert_eq!(total, Q::one());
            for (i, c) in cs.iter().enumerate() {
                assert_eq!(b.cylinder_index(c), i);
            }
        }
    }

    #[test]
    fn cocycle_values() {
        let b = FreeBoundary::new(f2()).unwrap();
        let ca = b.cylinder(&el("a")).unwrap();
        let cb = b.cylinder(&el("b")).unwrap();
        assert_eq!(b.cocycle(&el("e"), &ca).unwrap(), Q::one());
        assert_eq!(b.cocycle(&el("a"), &ca).unwrap(), q(3, 1));
        assert_eq!(b.cocycle(&el("a"), &cb).unwrap(), q(1, 3));
        assert!(matches!(
            b.cocycle(&el("ab"), &ca),
            Err(Error::LevelTooShallow { required: 2, .. })
        ));
        let integral = b
            .cylinders(1)
            .unwrap()
            .iter()
            .fold(Q::zero(), |acc, c| acc + b.cocycle(&el("a"), c).unwrap() * b.mass(c));
        assert_eq!(integral, Q::one());
    }

    #[test]
    fn cocycle_matches_cylinder_ratio() {
        // sigma(g, C_w) = m(g^{-1} C_w) / m(C_w) once the prefix survives
        let b = FreeBoundary::new(f2()).unwrap();
        let ball = build_ball(f2(), &f2().generators(), 2, 1000).unwrap().elements_within(2);
        for g in &ball {
            let g_inv = f2().inv(g).unwrap();
            for c in b.cylinders(3).unwrap() {
                let ratio = b.mass(&b.translate(&g_inv, &c).unwrap()) / b.mass(&c);
                assert_eq!(b.cocycle(g, &c).unwrap(), ratio, "{g} on {c}");
            }
        }
    }

    #[test]
    fn cocycle_identity_small() {
        let b = FreeBoundary::new(f2()).unwrap();
        let r = b.check_cocycle_identity(&el("e"), &el("e"), 1).unwrap();
        assert!(r.exact_zero);
        let r = b.check_cocycle_identity(&el("a"), &el("a"), 4).unwrap();
        assert!(r.exact_zero);
        let c = b.cylinder(&el("aaaa")).unwrap();
        assert_eq!(b.cocycle(&el("aa"), &c).unwrap(), q(9, 1));
        assert!(b.check_cocycle_identity(&el("ab"), &el("ab"), 3).is_err());
        let r = b.check_cocycle_identity_ball(2, 5, 0).unwrap();
        assert!(r.exact_zero);
    }

    #[test]
    fn normalization() {
        let b = FreeBoundary::new(f2()).unwrap();
        assert!(b.check_cocycle_normalization(&srw(), 1, 1).unwrap().is_zero());
        assert!(b.check_cocycle_normalization(&srw(), 2, 6).unwrap().is_zero());
        assert!(b.check_cocycle_normalization(&srw(), 3, 2).is_err());
    }

    #[test]
    fn only_simple_random_walk() {
        let lazy = FiniteMeasure::<Q>::from_atoms(
            f2(),
            vec![(el("a"), q(1, 2)), (el("A"), q(1, 4)), (el("b"), q(1, 8)), (el("B"), q(1, 8))],
        )
        .unwrap();
        assert!(FreeBoundary::for_measure(&lazy).is_err());
        assert!(FreeBoundary::for_measure(&srw()).is_ok());
        assert!(FreeBoundary::new(GroupId::Free { k: 1 }).is_err());
        assert!(FreeBoundary::new(GroupId::Lamplighter).is_err());
    }

    #[test]
    fn seminorm_is_scaled_length() {
        let b = FreeBoundary::new(f2()).unwrap();
        assert_eq!(b.poisson_seminorm(&el("e")).unwrap().exponent, 0);
        assert_eq!(b.poisson_seminorm(&el("a")).unwrap().exponent, 1);
        for g in build_ball(f2(), &f2().generators(), 4, 1000).unwrap().elements_within(4) {
            // brute force over every cylinder of level |g|
            let level = g.word_len().unwrap().max(1);
            let brute = b
                .cylinders(level)
                .unwrap()
                .iter()
                .map(|c| b.cocycle_exponent(&g, c).unwrap())
                .max()
                .unwrap();
            assert_eq!(b.poisson_seminorm(&g).unwrap().exponent as i64, brute);
        }
    }

    #[test]
    fn c_sequence_first_terms() {
        let b = FreeBoundary::new(f2()).unwrap();
        let c = b.c_sequence(&srw(), 3).unwrap();
        assert_eq!(c.exact[0], q(-1, 2));
        assert_eq!(c.exact[1], q(-1, 1));
        assert!(c.additive);
    }

    #[test]
    fn poisson_integrals() {
        let b = FreeBoundary::new(f2()).unwrap();
        let ca = b.cylinder(&el("a")).unwrap();
        let ind = b.refine(&b.indicator(&ca).unwrap(), 2).unwrap();
        assert_eq!(b.poisson_integral(&ind, &el("e")).unwrap(), q(1, 4));
        assert_eq!(b.poisson_integral(&ind, &el("a")).unwrap(), q(3, 4));
        let one = b.constant_function(3, Q::one()).unwrap();
        assert_eq!(b.poisson_integral(&one, &el("ab")).unwrap(), Q::one());
        assert!(b.poisson_integral(&b.indicator(&ca).unwrap(), &el("a")).is_err());
        assert!(b.check_harmonicity(&b.indicator(&ca).unwrap(), &srw(), 3).unwrap().is_zero());
    }

    #[test]
    fn span_ranks() {
        let b = FreeBoundary::new(f2()).unwrap();
        assert_eq!(b.span_rank(1, 1).unwrap(), 4);
        assert_eq!(b.span_rank(2, 2).unwrap(), 12);
        assert_eq!(b.span_rank(2, 0).unwrap(), 1);
        assert!(b.span_rank(1, 2).is_err());
    }

    #[test]
    fn rank_oracle() {
        let rows = vec![vec![q(1, 1), q(2, 1)], vec![q(2, 1), q(4, 1)], vec![q(0, 1), q(1, 3)]];
        assert_eq!(rational_rank(rows), 2);
        assert_eq!(rational_rank(vec![vec![Q::zero(); 3]; 2]), 0);
    }
}
