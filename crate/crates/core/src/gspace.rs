//! Finite permutation models of measured group actions.
//!
//! A [`FiniteGSpace`] lists, for each named generator, the permutation by
//! which it acts on `{0, ..., N-1}`, together with relator words that must act
//! trivially. Measures on the acting group are finite combinations of words in
//! the generators ([`WordMeasure`]); their convolution powers are tracked as
//! distributions over permutations.
//!
//! "Essentially" always means on atoms of positive mass.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Residual tolerance for linear-algebra steps.
pub const LINALG_TOL: f64 = 1e-12;
/// Residual tolerance for composed checks.
pub const COMPOSED_TOL: f64 = 1e-10;

pub type Perm = Vec<usize>;

/// A generator or its inverse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GenLetter {
    pub generator: usize,
    pub inverse: bool,
}

pub type GenWord = Vec<GenLetter>;

fn identity_perm(n: usize) -> Perm {
    (0..n).collect()
}

fn invert_perm(p: &[usize]) -> Perm {
    let mut out = vec![0; p.len()];
    for (x, &y) in p.iter().enumerate() {
        out[y] = x;
    }
    out
}

/// `p o q`: first `q`, then `p`.
fn compose(p: &[usize], q: &[usize]) -> Perm {
    q.iter().map(|&x| p[x]).collect()
}

fn is_permutation(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    for &x in p {
        if x >= p.len() || seen[x] {
            return false;
        }
        seen[x] = true;
    }
    true
}

/// Parse one-line cycle notation such as `(0 1 2)(3 4)`; `()` is the identity.
pub fn parse_cycles(text: &str, size: usize) -> Result<Perm> {
    let mut perm = identity_perm(size);
    let mut seen = vec![false; size];
    let mut rest = text.trim();
    while !rest.is_empty() {
        let body = rest
            .strip_prefix('(')
            .ok_or_else(|| Error::Parse(format!("expected '(' in cycle notation: {text}")))?;
        let close = body
            .find(')')
            .ok_or_else(|| Error::Parse(format!("unclosed cycle in {text}")))?;
        let points: Vec<usize> = body[..close]
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<usize>().map_err(|_| Error::Parse(format!("bad point '{t}' in {text}"))))
            .collect::<Result<_>>()?;
        for (i, &x) in points.iter().enumerate() {
            if x >= size {
                return Err(Error::Parse(format!("point {x} outside 0..{size}")));
            }
            if seen[x] {
                return Err(Error::Parse(format!("point {x} repeated in {text}")));
            }
            seen[x] = true;
            perm[x] = points[(i + 1) % points.len()];
        }
        rest = body[close + 1..].trim_start();
    }
    Ok(perm)
}

fn format_cycles(p: &[usize]) -> String {
    let mut seen = vec![false; p.len()];
    let mut out = String::new();
    for start in 0..p.len() {
        if seen[start] || p[start] == start {
            continue;
        }
        let mut cycle = vec![start];
        seen[start] = true;
        let mut x = p[start];
        while x != start {
            seen[x] = true;
            cycle.push(x);
            x = p[x];
        }
        out.push('(');
        out.push_str(&cycle.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "));
        out.push(')');
    }
    if out.is_empty() {
        out.push_str("()");
    }
    out
}

/// Connected components of the graph with edges `x -> p(x)`, each sorted.
fn orbits_of(size: usize, perms: &[&Perm], mask: Option<&[bool]>) -> Vec<Vec<usize>> {
    let active = |x: usize| mask.is_none_or(|m| m[x]);
    let mut label = vec![usize::MAX; size];
    let mut out = Vec::new();
    for start in 0..size {
        if label[start] != usize::MAX || !active(start) {
            continue;
        }
        let id = out.len();
        let mut orbit = vec![start];
        label[start] = id;
        let mut i = 0;
        while i < orbit.len() {
            let x = orbit[i];
            for p in perms {
                let y = p[x];
                if label[y] == usize::MAX && active(y) {
                    label[y] = id;
                    orbit.push(y);
                }
            }
            i += 1;
        }
        orbit.sort_unstable();
        out.push(orbit);
    }
    out
}

/// A finite set with a permutation action of a finitely generated group.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteGSpace {
    size: usize,
    names: Vec<String>,
    perms: Vec<Perm>,
    inverses: Vec<Perm>,
    relators: Vec<GenWord>,
    measure: Option<Vec<f64>>,
}

impl FiniteGSpace {
    /// Builds a space and checks that every relator acts trivially.
    pub fn new(size: usize, generators: Vec<(String, Perm)>, relators: Vec<GenWord>) -> Result<Self> {
        if size == 0 {
            return Err(Error::Domain("a G-space needs at least one point".into()));
        }
        let mut names = Vec::new();
        let mut perms = Vec::new();
        for (name, p) in generators {
            if p.len() != size || !is_permutation(&p) {
                return Err(Error::Domain(format!("generator {name} is not a permutation of 0..{size}")));
            }
            if names.contains(&name) {
                return Err(Error::Domain(format!("generator {name} declared twice")));
            }
            names.push(name);
            perms.push(p);
        }
        let inverses = perms.iter().map(|p| invert_perm(p)).collect();
        let space = FiniteGSpace {
            size,
            names,
            perms,
            inverses,
            relators,
            measure: None,
        };
        for r in &space.relators {
            if r.iter().any(|l| l.generator >= space.perms.len()) {
                return Err(Error::Domain("relator uses an unknown generator".into()));
            }
            if space.word_perm(r) != identity_perm(size) {
                return Err(Error::Domain(format!("relator {} does not act trivially", space.format_word(r))));
            }
        }
        Ok(space)
    }

    /// Attaches a measure; entries must be non-negative and sum to one.
    pub fn with_measure(mut self, nu: Vec<f64>) -> Result<Self> {
        check_probability(&nu, self.size)?;
        self.measure = Some(nu);
        Ok(self)
    }

    /// `Z/n` acting on itself by `x -> x + 1` through the generator `a`.
    pub fn cyclic(n: usize) -> Self {
        let p: Perm = (0..n).map(|x| (x + 1) % n).collect();
        let relator = vec![GenLetter { generator: 0, inverse: false }; n];
        FiniteGSpace::new(n, vec![("a".into(), p)], vec![relator]).expect("cyclic action is valid")
    }

    /// `n` points, every generator acting trivially.
    pub fn trivial(n: usize, generators: &[&str]) -> Self {
        let gens = generators.iter().map(|g| (g.to_string(), identity_perm(n))).collect();
        FiniteGSpace::new(n, gens, Vec::new()).expect("trivial action is valid")
    }

    /// A transitive action of the free group on the listed generators, with
    /// independent uniformly random permutations (resampled until transitive).
    pub fn random_transitive(seed: u64, size: usize, generators: &[&str]) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let gens: Vec<(String, Perm)> = generators
                .iter()
                .map(|g| {
                    let mut p = identity_perm(size);
                    p.shuffle(&mut rng);
                    (g.to_string(), p)
                })
                .collect();
            let space = FiniteGSpace::new(size, gens, Vec::new()).expect("random permutations are valid");
            if space.orbits().len() == 1 {
                return space;
            }
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn generator_names(&self) -> &[String] {
        &self.names
    }

    pub fn generator(&self, i: usize) -> &Perm {
        &self.perms[i]
    }

    pub fn relators(&self) -> &[GenWord] {
        &self.relators
    }

    pub fn measure(&self) -> Option<&[f64]> {
        self.measure.as_deref()
    }

    pub fn letter_perm(&self, l: GenLetter) -> &Perm {
        if l.inverse {
            &self.inverses[l.generator]
        } else {
            &self.perms[l.generator]
        }
    }

    /// Permutation of the word `s_1 ... s_m`, acting as `s_1(s_2(... s_m(x)))`.
    pub fn word_perm(&self, w: &[GenLetter]) -> Perm {
        let mut p = identity_perm(self.size);
        for l in w.iter().rev() {
            p = compose(self.letter_perm(*l), &p);
        }
        p
    }

    pub fn format_word(&self, w: &[GenLetter]) -> String {
        if w.is_empty() {
            return "e".into();
        }
        w.iter()
            .map(|l| {
                if l.inverse {
                    format!("{}^-1", self.names[l.generator])
                } else {
                    self.names[l.generator].clone()
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn parse_word(&self, text: &str) -> Result<GenWord> {
        text.split_whitespace()
            .filter(|t| *t != "e")
            .map(|t| {
                let (name, inverse) = match t.strip_suffix("^-1") {
                    Some(n) => (n, true),
                    None => (t, false),
                };
                let generator = self
                    .names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| Error::Parse(format!("unknown generator '{name}'")))?;
                Ok(GenLetter { generator, inverse })
            })
            .collect()
    }

    /// Orbits of the generated group, each sorted, ordered by smallest point.
    pub fn orbits(&self) -> Vec<Vec<usize>> {
        let perms: Vec<&Perm> = self.perms.iter().collect();
        orbits_of(self.size, &perms, None)
    }

    /// Diagonal action on `X x Y`; point `(x, y)` has index `x * |Y| + y`.
    /// Both spaces must name the same generators in the same order. Relators
    /// of either factor are kept when they act trivially on the product.
    pub fn diagonal_product(&self, other: &FiniteGSpace) -> Result<FiniteGSpace> {
        if self.names != other.names {
            return Err(Error::Domain(format!(
                "generator lists differ: {:?} vs {:?}",
                self.names, other.names
            )));
        }
        let m = other.size;
        let gens = self
            .names
            .iter()
            .zip(self.perms.iter().zip(&other.perms))
            .map(|(name, (p, q))| {
                let prod: Perm = (0..self.size * m).map(|i| p[i / m] * m + q[i % m]).collect();
                (name.clone(), prod)
            })
            .collect();
        let mut relators: Vec<GenWord> = Vec::new();
        for r in self.relators.iter().chain(&other.relators) {
            if self.word_perm(r) == identity_perm(self.size) && other.word_perm(r) == identity_perm(m) && !relators.contains(r) {
                relators.push(r.clone());
            }
        }
        let mut space = FiniteGSpace::new(self.size * m, gens, relators)?;
        if let (Some(nu), Some(eta)) = (&self.measure, &other.measure) {
            space.measure = Some(product_measure(nu, eta));
        }
        Ok(space)
    }

    /// `(s_* nu)(y) = nu(s^{-1} y)`.
    pub fn push_forward(&self, perm: &[usize], nu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.size];
        for (x, &w) in nu.iter().enumerate() {
            out[perm[x]] += w;
        }
        out
    }
}

impl fmt::Display for FiniteGSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "size {}", self.size)?;
        for (name, p) in self.names.iter().zip(&self.perms) {
            writeln!(f, "gen {name} {}", format_cycles(p))?;
        }
        for r in &self.relators {
            writeln!(f, "relator {}", self.format_word(r))?;
        }
        if let Some(nu) = &self.measure {
            let parts: Vec<String> = nu.iter().map(|w| w.to_string()).collect();
            writeln!(f, "measure {}", parts.join(" "))?;
        }
        Ok(())
    }
}

impl FromStr for FiniteGSpace {
    type Err = Error;

    /// Lines `size N`, `gen NAME CYCLES`, `relator WORD`, `measure W0 W1 ...`;
    /// `#` starts a comment.
    fn from_str(text: &str) -> Result<Self> {
        let mut size: Option<usize> = None;
        let mut gens: Vec<(String, Perm)> = Vec::new();
        let mut relator_lines: Vec<String> = Vec::new();
        let mut measure: Option<Vec<f64>> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let rest = rest.trim();
            let err = |m: &str| Error::Parse(format!("line {}: {m}", lineno + 1));
            match key {
                "size" => size = Some(rest.parse().map_err(|_| err("bad size"))?),
                "gen" => {
                    let n = size.ok_or_else(|| err("'size' must come before 'gen'"))?;
                    let (name, cycles) = rest.split_once(char::is_whitespace).unwrap_or((rest, "()"));
                    if name.is_empty() || name.contains('^') {
                        return Err(err("bad generator name"));
                    }
                    gens.push((name.to_string(), parse_cycles(cycles, n)?));
                }
                "relator" => relator_lines.push(rest.to_string()),
                "measure" => {
                    measure = Some(
                        rest.split_whitespace()
                            .map(|t| t.parse::<f64>().map_err(|_| err("bad measure weight")))
                            .collect::<Result<_>>()?,
                    )
                }
                other => return Err(err(&format!("unknown key '{other}'"))),
            }
        }
        let size = size.ok_or_else(|| Error::Parse("missing 'size'".into()))?;
        let mut space = FiniteGSpace::new(size, gens, Vec::new())?;
        let relators = relator_lines.iter().map(|r| space.parse_word(r)).collect::<Result<Vec<_>>>()?;
        space = FiniteGSpace::new(size, space.names.iter().cloned().zip(space.perms.clone()).collect(), relators)?;
        match measure {
            Some(nu) => space.with_measure(nu),
            None => Ok(space),
        }
    }
}

fn check_probability(nu: &[f64], size: usize) -> Result<()> {
    if nu.len() != size {
        return Err(Error::Domain(format!("measure has {} entries for {size} points", nu.len())));
    }
    if nu.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::Domain("measure weights must be finite and non-negative".into()));
    }
    let total: f64 = nu.iter().sum();
    if (total - 1.0).abs() > LINALG_TOL {
        return Err(Error::Domain(format!("measure has total mass {total}")));
    }
    Ok(())
}

pub fn product_measure(nu: &[f64], eta: &[f64]) -> Vec<f64> {
    nu.iter().flat_map(|a| eta.iter().map(move |b| a * b)).collect()
}

/// A finitely supported probability measure on the acting group, given as
/// weighted words in the generators.
#[derive(Clone, Debug, PartialEq)]
pub struct WordMeasure {
    pub atoms: Vec<(GenWord, f64)>,
}

impl WordMeasure {
    pub fn new(atoms: Vec<(GenWord, f64)>) -> Result<Self> {
        if atoms.is_empty() || atoms.iter().any(|(_, w)| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Domain("word measure needs positive weights".into()));
        }
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > LINALG_TOL {
            return Err(Error::Domain(format!("word measure has total mass {total}")));
        }
        Ok(WordMeasure { atoms })
    }

    /// Uniform on the generators and their inverses.
    pub fn simple_random_walk(generators: usize) -> Self {
        let w = 1.0 / (2 * generators) as f64;
        let atoms = (0..generators)
            .flat_map(|g| [false, true].map(|inverse| (vec![GenLetter { generator: g, inverse }], w)))
            .collect();
        WordMeasure { atoms }
    }

    /// `srw`, or comma-separated `WORD:WEIGHT` atoms with words as in relators.
    pub fn parse(space: &FiniteGSpace, text: &str) -> Result<Self> {
        let text = text.trim();
        if text == "srw" {
            return Ok(Self::simple_random_walk(space.names.len()));
        }
        let atoms = text
            .split(',')
            .map(|part| {
                let (word, weight) = part
                    .rsplit_once(':')
                    .ok_or_else(|| Error::Parse(format!("expected WORD:WEIGHT, got '{part}'")))?;
                let w = parse_fraction(weight.trim())?;
                Ok((space.parse_word(word)?, w))
            })
            .collect::<Result<Vec<_>>>()?;
        WordMeasure::new(atoms)
    }

    /// Law of the random permutation `s_1 ... s_k`, as a sorted distribution.
    pub fn power_on(&self, space: &FiniteGSpace, k: usize) -> Vec<(Perm, f64)> {
        let steps: Vec<(Perm, f64)> = self.atoms.iter().map(|(w, p)| (space.word_perm(w), *p)).collect();
        let mut dist: BTreeMap<Perm, f64> = BTreeMap::new();
        dist.insert(identity_perm(space.size), 1.0);
        for _ in 0..k {
            let mut next: BTreeMap<Perm, f64> = BTreeMap::new();
            for (g, pg) in &dist {
                for (s, ps) in &steps {
                    *next.entry(compose(g, s)).or_default() += pg * ps;
                }
            }
            dist = next;
        }
        dist.into_iter().collect()
    }
}

fn parse_fraction(s: &str) -> Result<f64> {
    match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().map_err(|_| Error::Parse(format!("bad weight '{s}'")))?;
            let d: f64 = d.trim().parse().map_err(|_| Error::Parse(format!("bad weight '{s}'")))?;
            Ok(n / d)
        }
        None => s.parse().map_err(|_| Error::Parse(format!("bad weight '{s}'"))),
    }
}

/// `sum_s mu(s) (s_* nu)`.
fn markov_step(space: &FiniteGSpace, steps: &[(Perm, f64)], nu: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; space.size];
    for (p, w) in steps {
        for (x, &m) in nu.iter().enumerate() {
            out[p[x]] += w * m;
        }
    }
    out
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct StationaryReport {
    pub measure: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub orbits: Vec<Vec<usize>>,
    pub orbit_masses: Vec<f64>,
    /// `max_s |s_* nu - nu|` over the generators.
    pub invariance_defect: f64,
}

/// Maximum number of averaged power-iteration steps.
pub const STATIONARY_BUDGET: usize = 100_000;

/// Stationary measure by Cesaro-averaged power iteration from the uniform measure.
pub fn solve_stationary(space: &FiniteGSpace, mu: &WordMeasure) -> Result<StationaryReport> {
    let steps = mu.power_on(space, 1);
    let n = space.size;
    let mut current = vec![1.0 / n as f64; n];
    let mut average = current.clone();
    let mut iterations = 0;
    let mut residual = max_abs_diff(&markov_step(space, &steps, &average), &average);
    while residual > LINALG_TOL {
        if iterations == STATIONARY_BUDGET {
            return Err(Error::NonConvergence { iterations, residual });
        }
        iterations += 1;
        current = markov_step(space, &steps, &current);
        let t = iterations as f64;
        for (a, c) in average.iter_mut().zip(&current) {
            *a = (*a * t + c) / (t + 1.0);
        }
        residual = max_abs_diff(&markov_step(space, &steps, &average), &average);
    }
    let orbits = space.orbits();
    let orbit_masses = orbits.iter().map(|o| o.iter().map(|&x| average[x]).sum()).collect();
    let invariance_defect = space
        .perms
        .iter()
        .map(|p| max_abs_diff(&space.push_forward(p, &average), &average))
        .fold(0.0, f64::max);
    Ok(StationaryReport {
        measure: average,
        residual,
        iterations,
        orbits,
        orbit_masses,
        invariance_defect,
    })
}

/// `max_x |sum_s mu(s) f(s x) - f(x)|`.
pub fn harmonic_residual(space: &FiniteGSpace, mu: &WordMeasure, f: &[f64]) -> f64 {
    let pf = markov_operator(&mu.power_on(space, 1), f);
    max_abs_diff(&pf, f)
}

/// `(P f)(x) = sum_g law(g) f(g x)`.
fn markov_operator(law: &[(Perm, f64)], f: &[f64]) -> Vec<f64> {
    (0..f.len()).map(|x| law.iter().map(|(p, w)| w * f[p[x]]).sum()).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct StatinvIdentity {
    pub k: usize,
    /// `sum_s mu^{*k}(s) int (f(sx) - f(x))^2 dnu`.
    pub lhs: f64,
    /// `2 (int f^2 dnu - int f P^k f dnu)`.
    pub rhs: f64,
    pub residual: f64,
}

/// Both sides of the expanded-square identity for `k = 1..=k_max`. Holds for
/// every `f` as soon as `nu` is stationary.
pub fn statinv_identity(space: &FiniteGSpace, nu: &[f64], mu: &WordMeasure, f: &[f64], k_max: usize) -> Result<Vec<StatinvIdentity>> {
    check_probability(nu, space.size)?;
    if f.len() != space.size {
        return Err(Error::Domain(format!("function has {} values for {} points", f.len(), space.size)));
    }
    let norm_sq: f64 = f.iter().zip(nu).map(|(v, m)| v * v * m).sum();
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let law = mu.power_on(space, k);
        let lhs: f64 = law
            .iter()
            .map(|(p, w)| w * (0..space.size).map(|x| nu[x] * (f[p[x]] - f[x]).powi(2)).sum::<f64>())
            .sum();
        let pkf = markov_operator(&law, f);
        let cross: f64 = f.iter().zip(&pkf).zip(nu).map(|((a, b), m)| a * b * m).sum();
        let rhs = 2.0 * (norm_sq - cross);
        out.push(StatinvIdentity {
            k,
            lhs,
            rhs,
            residual: (lhs - rhs).abs(),
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct StatinvReport {
    pub harmonic_residual: f64,
    pub identities: Vec<StatinvIdentity>,
    pub max_identity_residual: f64,
    /// Largest left-hand side; vanishes for harmonic `f`.
    pub max_lhs: f64,
    /// `max |f(sx) - f(x)|` over generators and positive-mass `x`.
    pub invariance_defect: f64,
    pub invariant: bool,
}

/// Harmonic functions on a stationary space are essentially invariant.
pub fn check_statinv(space: &FiniteGSpace, nu: &[f64], mu: &WordMeasure, f: &[f64]) -> Result<StatinvReport> {
    let stationarity = max_abs_diff(&markov_step(space, &mu.power_on(space, 1), nu), nu);
    if stationarity > LINALG_TOL {
        return Err(Error::Precondition(format!("measure is not stationary (residual {stationarity:e})")));
    }
    let harmonic = harmonic_residual(space, mu, f);
    if harmonic > COMPOSED_TOL {
        return Err(Error::Precondition(format!("function is not harmonic (residual {harmonic:e})")));
    }
    let identities = statinv_identity(space, nu, mu, f, 4)?;
    let mut invariance_defect = 0.0f64;
    for p in &space.perms {
        for x in 0..space.size {
            if nu[x] > 0.0 {
                invariance_defect = invariance_defect.max((f[p[x]] - f[x]).abs());
            }
        }
    }
    Ok(StatinvReport {
        harmonic_residual: harmonic,
        max_identity_residual: identities.iter().map(|i| i.residual).fold(0.0, f64::max),
        max_lhs: identities.iter().map(|i| i.lhs.abs()).fold(0.0, f64::max),
        identities,
        invariance_defect,
        invariant: invariance_defect <= COMPOSED_TOL,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ErgodicityReport {
    pub ergodic: bool,
    /// Orbits of the diagonal action on positive-mass points of `X x Y`.
    pub orbits: Vec<Vec<(usize, usize)>>,
    /// Invariant non-constant function on `X x Y` (index `x * |Y| + y`), if not ergodic.
    pub witness: Option<Vec<f64>>,
}

/// Whether the diagonal action is transitive on the positive-mass atoms of `nu x eta`.
pub fn diagonal_ergodicity(x: &FiniteGSpace, nu: &[f64], y: &FiniteGSpace, eta: &[f64]) -> Result<ErgodicityReport> {
    check_probability(nu, x.size)?;
    check_probability(eta, y.size)?;
    let prod = x.diagonal_product(y)?;
    let mass = product_measure(nu, eta);
    let mask: Vec<bool> = mass.iter().map(|m| *m > 0.0).collect();
    let perms: Vec<&Perm> = prod.perms.iter().collect();
    let orbits = orbits_of(prod.size, &perms, Some(&mask));
    let m = y.size;
    let ergodic = orbits.len() <= 1;
    let witness = (!ergodic).then(|| {
        let mut f = vec![0.0; prod.size];
        for &i in &orbits[0] {
            f[i] = 1.0;
        }
        f
    });
    Ok(ErgodicityReport {
        ergodic,
        orbits: orbits.iter().map(|o| o.iter().map(|&i| (i / m, i % m)).collect()).collect(),
        witness,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FactorReport {
    /// `p_f(x) = f(x, .)`, one row per point of `X`.
    pub p_f: Vec<Vec<f64>>,
    /// `max_x |int p_f(x) deta|`; zero when every `p_f(x)` is mean-zero.
    pub max_row_mean: f64,
    /// Push-forward of `nu` under `p_f`: distinct vectors and their masses.
    pub image: Vec<(Vec<f64>, f64)>,
    /// `f_2(x, z) = int f(x, y) f(z, y) deta(y)`.
    pub f2: Vec<Vec<f64>>,
    pub f2_constant: bool,
    /// `Lambda(y) = int f(x, y) dnu(x)`.
    pub lambda: Vec<f64>,
    pub max_lambda: f64,
    pub f_nonzero: bool,
    /// A nonzero `f` forces `f_2` to be non-constant.
    pub dichotomy_holds: bool,
}

fn positive_range(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        0.0
    } else {
        hi - lo
    }
}

/// Vectors `p_f(x) in L^2_0(Y, eta)` and the correlation `f_2` for an
/// invariant, mean-zero, bounded `f` on `X x Y` (index `x * |Y| + y`).
pub fn factor_map_pf(f: &[f64], x: &FiniteGSpace, nu: &[f64], y: &FiniteGSpace, eta: &[f64]) -> Result<FactorReport> {
    check_probability(nu, x.size)?;
    check_probability(eta, y.size)?;
    let prod = x.diagonal_product(y)?;
    let (n, m) = (x.size, y.size);
    if f.len() != n * m {
        return Err(Error::Domain(format!("function has {} values for {} points", f.len(), n * m)));
    }
    let mass = product_measure(nu, eta);
    let mut invariance = 0.0f64;
    for p in &prod.perms {
        for i in 0..n * m {
            if mass[i] > 0.0 {
                invariance = invariance.max((f[p[i]] - f[i]).abs());
            }
        }
    }
    if invariance > COMPOSED_TOL {
        return Err(Error::Precondition(format!("f is not invariant (residual {invariance:e})")));
    }
    let mean: f64 = f.iter().zip(&mass).map(|(a, b)| a * b).sum();
    if mean.abs() > COMPOSED_TOL {
        return Err(Error::Precondition(format!("f does not have mean zero (mean {mean:e})")));
    }
    let sup = f.iter().zip(&mass).filter(|(_, w)| **w > 0.0).map(|(v, _)| v.abs()).fold(0.0, f64::max);
    if sup > 1.0 + LINALG_TOL {
        return Err(Error::Precondition(format!("f has sup norm {sup} > 1")));
    }
    let eta_defect = y
        .perms
        .iter()
        .map(|p| max_abs_diff(&y.push_forward(p, eta), eta))
        .fold(0.0, f64::max);
    if eta_defect > LINALG_TOL {
        return Err(Error::Precondition(format!("eta is not invariant (residual {eta_defect:e})")));
    }
    for (space, measure, label) in [(x, nu, "X"), (y, eta, "Y")] {
        let mask: Vec<bool> = measure.iter().map(|w| *w > 0.0).collect();
        let perms: Vec<&Perm> = space.perms.iter().collect();
        if orbits_of(space.size, &perms, Some(&mask)).len() > 1 {
            return Err(Error::Precondition(format!("{label} is not ergodic")));
        }
    }

    let fm = DMatrix::from_row_slice(n, m, f);
    let eta_v = DVector::from_column_slice(eta);
    let nu_v = DVector::from_column_slice(nu);
    let row_means = &fm * &eta_v;
    let f2m = &fm * DMatrix::from_diagonal(&eta_v) * fm.transpose();
    let lambda = fm.transpose() * &nu_v;

    let p_f: Vec<Vec<f64>> = (0..n).map(|i| fm.row(i).iter().copied().collect()).collect();
    let mut image: Vec<(Vec<f64>, f64)> = Vec::new();
    for (i, v) in p_f.iter().enumerate() {
        if nu[i] == 0.0 {
            continue;
        }
        match image.iter_mut().find(|(u, _)| max_abs_diff(u, v) <= COMPOSED_TOL) {
            Some(entry) => entry.1 += nu[i],
            None => image.push((v.clone(), nu[i])),
        }
    }
    let f2: Vec<Vec<f64>> = (0..n).map(|i| f2m.row(i).iter().copied().collect()).collect();
    let f2_range = positive_range(
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| nu[i] * nu[j] > 0.0)
            .map(|(i, j)| f2[i][j]),
    );
    let f2_constant = f2_range <= COMPOSED_TOL;
    let f_nonzero = sup > COMPOSED_TOL;
    Ok(FactorReport {
        max_row_mean: (0..n).filter(|&i| nu[i] > 0.0).map(|i| row_means[i].abs()).fold(0.0, f64::max),
        p_f,
        image,
        f2,
        f2_constant,
        max_lambda: (0..m).filter(|&j| eta[j] > 0.0).map(|j| lambda[j].abs()).fold(0.0, f64::max),
        lambda: lambda.iter().copied().collect(),
        f_nonzero,
        dichotomy_holds: !f_nonzero || !f2_constant,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct IsometricWitness {
    /// The distinct vectors `p_f(x)` in `L^2(Y, eta)`.
    pub vectors: Vec<Vec<f64>>,
    pub masses: Vec<f64>,
    /// For each generator, the permutation it induces on `vectors`.
    pub actions: Vec<(String, Vec<usize>)>,
    /// Every generator acts on the vectors through the orthogonal Koopman operator.
    pub koopman_consistent: bool,
}

/// For a non-ergodic diagonal action, the finite orbit of vectors `p_f(x)`
/// on which the group acts by isometries.
pub fn isometric_factor_witness(x: &FiniteGSpace, nu: &[f64], y: &FiniteGSpace, eta: &[f64]) -> Result<Option<IsometricWitness>> {
    let erg = diagonal_ergodicity(x, nu, y, eta)?;
    let Some(indicator) = erg.witness else {
        return Ok(None);
    };
    let mass = product_measure(nu, eta);
    let mean: f64 = indicator.iter().zip(&mass).map(|(a, b)| a * b).sum();
    let centered: Vec<f64> = indicator.iter().map(|v| v - mean).collect();
    let scale = centered.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let f: Vec<f64> = centered.iter().map(|v| v / scale).collect();
    let report = factor_map_pf(&f, x, nu, y, eta)?;
    let vectors: Vec<Vec<f64>> = report.image.iter().map(|(v, _)| v.clone()).collect();
    let masses = report.image.iter().map(|(_, w)| *w).collect();
    let find = |v: &[f64]| vectors.iter().position(|u| max_abs_diff(u, v) <= COMPOSED_TOL);
    let mut actions = Vec::new();
    let mut consistent = true;
    for (gi, name) in x.names.iter().enumerate() {
        let (px, py) = (&x.perms[gi], &y.perms[gi]);
        let mut induced = vec![usize::MAX; vectors.len()];
        for (i, v) in report.p_f.iter().enumerate() {
            if nu[i] == 0.0 {
                continue;
            }
            let (Some(src), Some(dst)) = (find(v), find(&report.p_f[px[i]])) else {
                consistent = false;
                continue;
            };
            if induced[src] != usize::MAX && induced[src] != dst {
                consistent = false;
            }
            induced[src] = dst;
            // Koopman operator: (pi(s) v)(y') = v(s^{-1} y')
            let mut koopman = vec![0.0; y.size];
            for (yy, val) in v.iter().enumerate() {
                koopman[py[yy]] = *val;
            }
            consistent &= max_abs_diff(&koopman, &vectors[dst]) <= COMPOSED_TOL;
        }
        actions.push((name.clone(), induced));
    }
    Ok(Some(IsometricWitness {
        vectors,
        masses,
        actions,
        koopman_consistent: consistent,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flip() -> FiniteGSpace {
        "size 2\ngen a (0 1)\nrelator a a\n".parse().unwrap()
    }

    fn uniform(n: usize) -> Vec<f64> {
        vec![1.0 / n as f64; n]
    }

    #[test]
    fn cycle_notation() {
        assert_eq!(parse_cycles("(0 1 2)(3 4)", 5).unwrap(), vec![1, 2, 0, 4, 3]);
        assert_eq!(parse_cycles("()", 3).unwrap(), vec![0, 1, 2]);
        assert!(parse_cycles("(0 1)(1 2)", 3).is_err());
        assert!(parse_cycles("(0 5)", 3).is_err());
        assert_eq!(format_cycles(&[1, 2, 0, 4, 3]), "(0 1 2)(3 4)");
    }

    #[test]
    fn text_round_trip() {
        let text = "# rotation\nsize 4\ngen a (0 1 2 3)\nrelator a a a a\nmeasure 0.25 0.25 0.25 0.25\n";
        let space: FiniteGSpace = text.parse().unwrap();
        assert_eq!(space.to_string().parse::<FiniteGSpace>().unwrap(), space);
        assert!("size 3\ngen a (0 1 2)\nrelator a a\n".parse::<FiniteGSpace>().is_err());
        assert!("size 2\ngen a (0 1)\nbogus 1\n".parse::<FiniteGSpace>().is_err());
        let w = space.parse_word("a a^-1 a").unwrap();
        assert_eq!(space.word_perm(&w), vec![1, 2, 3, 0]);
    }

    #[test]
    fn word_perm_order() {
        let space: FiniteGSpace = "size 3\ngen a (0 1)\ngen b (1 2)\n".parse().unwrap();
        let ab = space.parse_word("a b").unwrap();
        // a(b(0)) = a(0) = 1
        assert_eq!(space.word_perm(&ab)[0], 1);
        // a(b(1)) = a(2) = 2
        assert_eq!(space.word_perm(&ab)[1], 2);
    }

    #[test]
    fn stationary_examples() {
        let rot = FiniteGSpace::cyclic(5);
        let mu = WordMeasure::parse(&rot, "a:2/3,a^-1:1/3").unwrap();
        let rep = solve_stationary(&rot, &mu).unwrap();
        assert!(max_abs_diff(&rep.measure, &uniform(5)) < LINALG_TOL);
        let triv = FiniteGSpace::trivial(3, &["a"]);
        let rep = solve_stationary(&triv, &WordMeasure::simple_random_walk(1)).unwrap();
        assert_eq!(rep.iterations, 0);
        let two: FiniteGSpace = "size 5\ngen a (0 1)(2 3 4)\n".parse().unwrap();
        let rep = solve_stationary(&two, &WordMeasure::simple_random_walk(1)).unwrap();
        assert_eq!(rep.orbits, vec![vec![0, 1], vec![2, 3, 4]]);
        assert!(rep.measure.iter().all(|w| (w - 0.2).abs() < LINALG_TOL));
        assert!(rep.invariance_defect < LINALG_TOL);
    }

    #[test]
    fn statinv_examples() {
        let two: FiniteGSpace = "size 5\ngen a (0 1)(2 3 4)\n".parse().unwrap();
        let mu = WordMeasure::simple_random_walk(1);
        let nu = uniform(5);
        let rep = check_statinv(&two, &nu, &mu, &[1.0; 5]).unwrap();
        assert_eq!(rep.max_lhs, 0.0);
        let indicator = [1.0, 1.0, 0.0, 0.0, 0.0];
        let rep = check_statinv(&two, &nu, &mu, &indicator).unwrap();
        assert!(rep.invariant && rep.max_identity_residual < COMPOSED_TOL);
        assert!(check_statinv(&two, &nu, &mu, &[1.0, 0.0, 0.0, 0.0, 0.0]).is_err());
        let ids = statinv_identity(&two, &nu, &mu, &[0.3, -1.0, 2.0, 0.5, 0.0], 4).unwrap();
        assert!(ids.iter().all(|i| i.residual < COMPOSED_TOL));
        assert!(ids.iter().all(|i| i.lhs > 0.0));
    }

    #[test]
    fn ergodicity_examples() {
        let rot = FiniteGSpace::cyclic(3);
        let point = FiniteGSpace::trivial(1, &["a"]);
        assert!(diagonal_ergodicity(&rot, &uniform(3), &point, &[1.0]).unwrap().ergodic);
        let rep = diagonal_ergodicity(&flip(), &uniform(2), &flip(), &uniform(2)).unwrap();
        assert!(!rep.ergodic);
        assert_eq!(rep.orbits, vec![vec![(0, 0), (1, 1)], vec![(0, 1), (1, 0)]]);
        assert_eq!(rep.witness.unwrap(), vec![1.0, 0.0, 0.0, 1.0]);
        let flip_z: FiniteGSpace = "size 2\ngen a (0 1)\n".parse().unwrap();
        let rep = diagonal_ergodicity(&flip_z, &uniform(2), &rot, &uniform(3)).unwrap();
        assert!(rep.ergodic);
        assert_eq!(rep.orbits[0].len(), 6);
    }

    #[test]
    fn factor_examples() {
        let zero = factor_map_pf(&[0.0; 4], &flip(), &uniform(2), &flip(), &uniform(2)).unwrap();
        assert!(zero.f2_constant && !zero.f_nonzero && zero.dichotomy_holds);
        let f = [1.0, -1.0, -1.0, 1.0];
        let rep = factor_map_pf(&f, &flip(), &uniform(2), &flip(), &uniform(2)).unwrap();
        assert_eq!(rep.f2, vec![vec![1.0, -1.0], vec![-1.0, 1.0]]);
        assert!(!rep.f2_constant && rep.dichotomy_holds);
        assert_eq!(rep.max_lambda, 0.0);
        assert_eq!(rep.max_row_mean, 0.0);
        assert_eq!(rep.image.len(), 2);
        let not_invariant = [1.0, -1.0, 1.0, -1.0];
        assert!(factor_map_pf(&not_invariant, &flip(), &uniform(2), &flip(), &uniform(2)).is_err());
    }

    #[test]
    fn isometric_witnesses() {
        let w = isometric_factor_witness(&flip(), &uniform(2), &flip(), &uniform(2)).unwrap().unwrap();
        assert_eq!(w.vectors.len(), 2);
        assert_eq!(w.actions[0].1, vec![1, 0]);
        assert!(w.koopman_consistent);
        let v0 = &w.vectors[0];
        assert!(max_abs_diff(&w.vectors[1], &v0.iter().map(|x| -x).collect::<Vec<_>>()) < 1e-15);

        let rot = FiniteGSpace::cyclic(3);
        let point = FiniteGSpace::trivial(1, &["a"]);
        assert!(isometric_factor_witness(&rot, &uniform(3), &point, &[1.0]).unwrap().is_none());

        let rot4: FiniteGSpace = "size 4\ngen a (0 1 2 3)\n".parse().unwrap();
        let quot: FiniteGSpace = "size 2\ngen a (0 1)\n".parse().unwrap();
        let w = isometric_factor_witness(&rot4, &uniform(4), &quot, &uniform(2)).unwrap().unwrap();
        assert_eq!(w.vectors.len(), 2);
        assert!(w.koopman_consistent);
    }

    #[test]
    fn random_spaces_are_transitive_and_reproducible() {
        let a = FiniteGSpace::random_transitive(3, 7, &["a", "b"]);
        let b = FiniteGSpace::random_transitive(3, 7, &["a", "b"]);
        assert_eq!(a, b);
        assert_eq!(a.orbits().len(), 1);
    }
}
