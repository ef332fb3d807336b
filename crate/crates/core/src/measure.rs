//! Finitely supported probability measures on groups and their convolution
//! powers, with exact accounting for mass dropped by truncation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};



use crate::error::{Error, Result};
use crate::exec::{self, Workers};
use crate::group::{inv_unchecked, mul_unchecked, GeneratorSet, GroupElement, GroupId};
use crate::weight::Weight;

/// Version tag of the text serialization.
pub const MEASURE_FORMAT_VERSION: u32 = 1;

/// Left atoms per parallel work item in [`FiniteMeasure::convolve`]. Fixed so
/// that the floating-point summation order never depends on the worker count.
const CONVOLVE_CHUNK: usize = 256;

/// A sparse probability measure: strictly positive atoms plus the mass lost to
/// truncation (`deficit`), so that `mass() + deficit() == 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMeasure<W> {
    group: GroupId,
    atoms: BTreeMap<GroupElement, W>,
    deficit: W,
}

impl<W: Weight> FiniteMeasure<W> {
    pub fn dirac(group: GroupId, g: GroupElement) -> Result<Self> {
        if !group.contains(&g) {
            return Err(Error::Domain(format!("{g} is not an element of {group}")));
        }
        Ok(FiniteMeasure {
            group,
            atoms: BTreeMap::from([(g, W::one())]),
            deficit: W::zero(),
        })
    }

    /// Assemble a measure without re-checking normalization.
    pub(crate) fn from_raw(group: GroupId, atoms: BTreeMap<GroupElement, W>, deficit: W) -> Self {
        FiniteMeasure { group, atoms, deficit }
    }

    pub fn identity(group: GroupId) -> Self {
        Self::dirac(group, group.identity()).expect("identity is a member")
    }

    /// Build a probability measure from `(element, weight)` pairs. Repeated
    /// elements are merged; weights must be positive and sum to one.
    pub fn from_atoms(group: GroupId, atoms: impl IntoIterator<Item = (GroupElement, W)>) -> Result<Self> {
        let mut map: BTreeMap<GroupElement, W> = BTreeMap::new();
        for (g, w) in atoms {
            if !group.contains(&g) {
                return Err(Error::Domain(format!("{g} is not an element of {group}")));
            }
            if w <= W::zero() {
                return Err(Error::Precondition(format!("weight of {g} is not positive")));
            }
            let slot = map.entry(g).or_insert_with(W::zero);
            *slot = slot.clone() + w;
        }
        let m = FiniteMeasure {
            group,
            atoms: map,
            deficit: W::zero(),
        };
        m.check_normalized()?;
        Ok(m)
    }

    /// Uniform measure on a list of distinct elements.
    pub fn uniform(group: GroupId, elements: &[GroupElement]) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::Precondition("uniform measure on an empty set".into()));
        }
        let w = W::from_ratio(1, elements.len() as i64);
        Self::from_atoms(group, elements.iter().cloned().map(|g| (g, w.clone())))
    }

    /// Simple random walk: uniform on the standard generators.
    pub fn simple_random_walk(group: GroupId) -> Self {
        let gens: GeneratorSet = group.generators();
        Self::uniform(group, gens.elements()).expect("generator sets are nonempty")
    }

    fn check_normalized(&self) -> Result<()> {
        let total = self.mass() + self.deficit.clone();
        let err = (total - W::one()).abs_value();
        let tol = if W::MODE == crate::weight::ArithmeticMode::Exact {
            W::zero()
        } else {
            W::from_ratio(1, 1_000_000_000_000)
        };
        if err > tol {
            return Err(Error::Precondition(format!(
                "weights sum to {} (deficit {}), expected 1",
                self.mass().render(),
                self.deficit.render()
            )));
        }
        Ok(())
    }

    pub fn group(&self) -> GroupId {
        self.group
    }

    pub fn deficit(&self) -> &W {
        &self.deficit
    }

    /// Retained mass, `1 - deficit` up to rounding.
    pub fn mass(&self) -> W {
        self.atoms.values().fold(W::zero(), |acc, w| acc + w.clone())
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn get(&self, g: &GroupElement) -> Option<&W> {
        self.atoms.get(g)
    }

    /// Weight at `g`, zero off the support.
    pub fn weight(&self, g: &GroupElement) -> W {
        self.atoms.get(g).cloned().unwrap_or_else(W::zero)
    }

    /// Atoms in canonical element order.
    pub fn iter(&self) -> impl Iterator<Item = (&GroupElement, &W)> {
        self.atoms.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &GroupElement> {
        self.atoms.keys()
    }

    /// Atoms ordered by their canonical string form; used for inverse-CDF sampling.
    pub fn atoms_by_serialization(&self) -> Vec<(GroupElement, W)> {
        let mut v: Vec<(String, GroupElement, W)> = self
            .atoms
            .iter()
            .map(|(g, w)| (g.to_string(), g.clone(), w.clone()))
            .collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v.into_iter().map(|(_, g, w)| (g, w)).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.atoms
            .iter()
            .all(|(g, w)| self.atoms.get(&inv_unchecked(g).expect("members invert")) == Some(w))
    }

    /// `(mu * nu)(s) = sum over s1 s2 = s of mu(s1) nu(s2)`. Atoms of the
    /// product lighter than `threshold` are dropped into the deficit; a zero
    /// threshold keeps everything.
    pub fn convolve(&self, other: &Self, threshold: &W, workers: Workers) -> Result<Self> {
        if self.group != other.group {
            return Err(Error::Domain(format!(
                "cannot convolve measures on {} and {}",
                self.group, other.group
            )));
        }
        let left: Vec<(&GroupElement, &W)> = self.atoms.iter().collect();
        let right: Vec<(&GroupElement, &W)> = other.atoms.iter().collect();
        let partials = exec::map_chunks(&left, CONVOLVE_CHUNK, workers, |chunk| {
            let mut acc: HashMap<GroupElement, W> = HashMap::new();
            for (g, wg) in chunk {
                for (h, wh) in &right {
                    let gh = mul_unchecked(g, h)?;
                    let w = (*wg).clone() * (*wh).clone();
                    match acc.get_mut(&gh) {
                        Some(slot) => *slot = slot.clone() + w,
                        None => {
                            acc.insert(gh, w);
                        }
                    }
                }
            }
            Ok::<_, Error>(acc)
        });
        let mut total: HashMap<GroupElement, W> = HashMap::new();
        for partial in partials {
            for (g, w) in partial? {
                match total.get_mut(&g) {
                    Some(slot) => *slot = slot.clone() + w,
                    None => {
                        total.insert(g, w);
                    }
                }
            }
        }
        // sorted pass so the dropped-mass sum has a fixed order
        let sorted: BTreeMap<GroupElement, W> = total.into_iter().collect();
        let mut atoms = BTreeMap::new();
        let mut dropped = W::zero();
        for (g, w) in sorted {
            if w < *threshold {
                dropped = dropped + w;
            } else {
                atoms.insert(g, w);
            }
        }
        // mass of a product of sub-probability measures is the product of masses
        let carried = self.deficit.clone() + other.deficit.clone() - self.deficit.clone() * other.deficit.clone();
        Ok(FiniteMeasure {
            group: self.group,
            atoms,
            deficit: carried + dropped,
        })
    }

    /// `mu^{*n}`, computed as `mu^{*(n-1)} * mu`; `mu^{*0}` is the point mass at `e`.
    pub fn power(&self, n: usize, threshold: &W, workers: Workers) -> Result<Self> {
        let mut acc = Self::identity(self.group);
        for _ in 0..n {
            acc = acc.convolve(self, threshold, workers)?;
        }
        Ok(acc)
    }

    /// `[mu^{*0}, mu^{*1}, ..., mu^{*n}]`.
    pub fn powers(&self, n: usize, threshold: &W, workers: Workers) -> Result<Vec<Self>> {
        let mut out = Vec::with_capacity(n + 1);
        out.push(Self::identity(self.group));
        for k in 0..n {
            let next = out[k].convolve(self, threshold, workers)?;
            out.push(next);
        }
        Ok(out)
    }

    /// `check(mu)(s) = mu(s^{-1})`.
    pub fn adjoint(&self) -> Self {
        let atoms = self
            .atoms
            .iter()
            .map(|(g, w)| (inv_unchecked(g).expect("members invert"), w.clone()))
            .collect();
        FiniteMeasure {
            group: self.group,
            atoms,
            deficit: self.deficit.clone(),
        }
    }

    /// Total-variation distance `1/2 sum |mu(s) - nu(s)|`, counting both deficits as unmatched mass.
    pub fn total_variation(&self, other: &Self) -> f64 {
        let keys: BTreeSet<&GroupElement> = self.atoms.keys().chain(other.atoms.keys()).collect();
        let diff: f64 = keys
            .into_iter()
            .map(|g| (self.weight(g).to_f64() - other.weight(g).to_f64()).abs())
            .sum();
        0.5 * (diff + self.deficit.to_f64() + other.deficit.to_f64())
    }

    /// Integral of `f` against the retained atoms.
    pub fn expect<F>(&self, mut f: F) -> Result<W>
    where
        F: FnMut(&GroupElement) -> Result<W>,
    {
        let mut acc = W::zero();
        for (g, w) in &self.atoms {
            acc = acc + f(g)? * w.clone();
        }
        Ok(acc)
    }

    /// Same measure with weights converted to `f64`.
    pub fn to_float(&self) -> FiniteMeasure<f64> {
        FiniteMeasure {
            group: self.group,
            atoms: self.atoms.iter().map(|(g, w)| (g.clone(), w.to_f64())).collect(),
            deficit: self.deficit.to_f64(),
        }
    }

    pub fn write_to(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "walklab-measure {MEASURE_FORMAT_VERSION}")?;
        writeln!(out, "group {}", self.group)?;
        let mode = match W::MODE {
            crate::weight::ArithmeticMode::Exact => "exact",
            crate::weight::ArithmeticMode::Float64 => "float",
        };
        writeln!(out, "mode {mode}")?;
        writeln!(out, "deficit {}", self.deficit.render())?;
        writeln!(out, "atoms {}", self.atoms.len())?;
        for (g, w) in &self.atoms {
            writeln!(out, "{g}\t{}", w.render())?;
        }
        Ok(())
    }

    pub fn read_from(input: impl BufRead) -> Result<Self> {
        let mut lines = input.lines();
        let mut header = |key: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("measure file truncated before {key}")))??;
            line.strip_prefix(key)
                .map(|v| v.trim().to_string())
                .ok_or_else(|| Error::Parse(format!("expected {key:?}, found {line:?}")))
        };
        let version = header("walklab-measure")?;
        if version != MEASURE_FORMAT_VERSION.to_string() {
            return Err(Error::Parse(format!("unsupported measure format version {version}")));
        }
        let group: GroupId = header("group")?.parse()?;
        let mode: crate::weight::ArithmeticMode = header("mode")?.parse()?;
        if mode != W::MODE {
            return Err(Error::Parse(format!("measure stored in {mode:?} mode")));
        }
        let deficit = W::parse_weight(&header("deficit")?)?;
        let count: usize = header("atoms")?
            .parse()
            .map_err(|_| Error::Parse("bad atom count".into()))?;
        let mut atoms = BTreeMap::new();
        for line in lines {
            let line = line?;
            let (g, w) = line
                .split_once('\t')
                .ok_or_else(|| Error::Parse(format!("bad atom line {line:?}")))?;
            atoms.insert(group.parse_element(g)?, W::parse_weight(w)?);
        }
        if atoms.len() != count {
            return Err(Error::Parse(format!("expected {count} atoms, found {}", atoms.len())));
        }
        let m = FiniteMeasure { group, atoms, deficit };
        m.check_normalized()?;
        Ok(m)
    }
}

/// Whether every element of `targets` lies in the semigroup generated by the
/// support of `mu`, looking at words of length at most `depth`. A `false`
/// answer only means "not verified at this depth".
pub fn check_support_generates<W: Weight>(mu: &FiniteMeasure<W>, targets: &GeneratorSet, depth: usize) -> bool {
    let support: Vec<&GroupElement> = mu.support().collect();
    let mut seen: BTreeSet<GroupElement> = BTreeSet::new();
    let mut frontier: Vec<GroupElement> = vec![mu.group.identity()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for g in &frontier {
            for s in &support {
                let Ok(h) = mul_unchecked(g, s) else { continue };
                if seen.insert(h.clone()) {
                    next.push(h);
                }
            }
        }
        if targets.iter().all(|t| seen.contains(t)) {
            return true;
        }
        frontier = next;
    }
    targets.iter().all(|t| seen.contains(t))
}

/// Integer weight check: whether `W` values sum to exactly one.
pub fn is_exactly_normalized<W: Weight>(mu: &FiniteMeasure<W>) -> bool {
    mu.mass() + mu.deficit.clone() == W::one()
}
