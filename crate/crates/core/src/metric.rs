//! Word norms: breadth-first ball tables on Cayley graphs, closed forms where
//! they exist, and semi-norm axiom checks.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::group::{mul_unchecked, GeneratorSet, GroupElement, GroupId};

/// Default cap on the number of elements a ball table may hold.
pub const DEFAULT_BALL_BUDGET: usize = 5_000_000;

/// Version tag of the on-disk ball format.
pub const BALL_FORMAT_VERSION: u32 = 1;

/// Anything that can evaluate a word norm exactly.
pub trait WordNorm: Sync {
    fn norm(&self, g: &GroupElement) -> Result<u64>;

    /// Largest norm this evaluator can certify, `None` if unbounded.
    fn radius(&self) -> Option<u64> {
        None
    }
}

/// All elements of word norm at most `radius`, with their norms.
#[derive(Clone, Debug)]
pub struct BallTable {
    group: GroupId,
    generators: GeneratorSet,
    radius: u32,
    entries: HashMap<GroupElement, u32>,
    spheres: Vec<usize>,
}

/// Breadth-first search from the identity, one sphere at a time.
pub fn build_ball(group: GroupId, generators: &GeneratorSet, radius: u32, budget: usize) -> Result<BallTable> {
    let identity = group.identity();
    let mut entries = HashMap::new();
    entries.insert(identity.clone(), 0u32);
    let mut spheres = vec![1usize];
    let mut frontier = vec![identity];
    for r in 1..=radius {
        let mut next = Vec::new();
        for g in &frontier {
            for s in generators.iter() {
                let h = mul_unchecked(g, s)?;
                if !entries.contains_key(&h) {
                    entries.insert(h.clone(), r);
                    next.push(h);
                }
            }
            if entries.len() > budget {
                return Err(Error::Resource { budget, radius: r });
            }
        }
        spheres.push(next.len());
        frontier = next;
    }
    Ok(BallTable {
        group,
        generators: generators.clone(),
        radius,
        entries,
        spheres,
    })
}

impl BallTable {
    pub fn group(&self) -> GroupId {
        self.group
    }

    pub fn generators(&self) -> &GeneratorSet {
        &self.generators
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of elements of norm exactly `n`.
    pub fn sphere_size(&self, n: u32) -> usize {
        self.spheres.get(n as usize).copied().unwrap_or(0)
    }

    pub fn get(&self, g: &GroupElement) -> Option<u32> {
        self.entries.get(g).copied()
    }

    pub fn word_norm(&self, g: &GroupElement) -> Result<u32> {
        self.get(g).ok_or_else(|| Error::OutOfRange {
            element: g.to_string(),
            radius: self.radius,
        })
    }

    /// Entries sorted by norm, then by element; stable across runs.
    pub fn sorted_entries(&self) -> Vec<(&GroupElement, u32)> {
        let mut v: Vec<_> = self.entries.iter().map(|(g, &n)| (g, n)).collect();
        v.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(b.0)));
        v
    }

    /// Elements of norm at most `r` (clamped to the table radius), sorted.
    pub fn elements_within(&self, r: u32) -> Vec<GroupElement> {
        self.sorted_entries()
            .into_iter()
            .filter(|(_, n)| *n <= r)
            .map(|(g, _)| g.clone())
            .collect()
    }

    pub fn write_to(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "walklab-ball {BALL_FORMAT_VERSION}")?;
        writeln!(out, "group {}", self.group)?;
        let gens: Vec<String> = self.generators.iter().map(|g| g.to_string()).collect();
        writeln!(out, "generators {}", gens.join(" "))?;
        writeln!(out, "radius {}", self.radius)?;
        writeln!(out, "count {}", self.entries.len())?;
        for (g, n) in self.sorted_entries() {
            writeln!(out, "{g}\t{n}")?;
        }
        Ok(())
    }

    /// Read a table written by [`BallTable::write_to`]. Only the standard
    /// generator set of the stored group is accepted.
    pub fn read_from(input: impl BufRead) -> Result<BallTable> {
        let mut lines = input.lines();
        let mut header = |key: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("ball file truncated before {key}")))??;
            line.strip_prefix(key)
                .map(|v| v.trim().to_string())
                .ok_or_else(|| Error::Parse(format!("expected {key:?}, found {line:?}")))
        };
        let version = header("walklab-ball")?;
        if version != BALL_FORMAT_VERSION.to_string() {
            return Err(Error::Parse(format!("unsupported ball format version {version}")));
        }
        let group: GroupId = header("group")?.parse()?;
        let gens = header("generators")?;
        let generators = group.generators();
        let expected: Vec<String> = generators.iter().map(|g| g.to_string()).collect();
        if gens.split_whitespace().collect::<Vec<_>>() != expected {
            return Err(Error::Parse("ball file uses a non-standard generator set".into()));
        }
        let radius: u32 = header("radius")?
            .parse()
            .map_err(|_| Error::Parse("bad radius".into()))?;
        let count: usize = header("count")?
            .parse()
            .map_err(|_| Error::Parse("bad count".into()))?;
        let mut entries = HashMap::with_capacity(count);
        let mut spheres = vec![0usize; radius as usize + 1];
        for line in lines {
            let line = line?;
            let (g, n) = line
                .split_once('\t')
                .ok_or_else(|| Error::Parse(format!("bad ball entry {line:?}")))?;
            let n: u32 = n.parse().map_err(|_| Error::Parse(format!("bad norm in {line:?}")))?;
            if n > radius {
                return Err(Error::Parse(format!("norm {n} exceeds radius {radius}")));
            }
            spheres[n as usize] += 1;
            entries.insert(group.parse_element(g)?, n);
        }
        if entries.len() != count {
            return Err(Error::Parse(format!(
                "ball file lists {} entries, header says {count}",
                entries.len()
            )));
        }
        Ok(BallTable {
            group,
            generators,
            radius,
            entries,
            spheres,
        })
    }
}

impl WordNorm for BallTable {
    fn norm(&self, g: &GroupElement) -> Result<u64> {
        self.word_norm(g).map(u64::from)
    }

    fn radius(&self) -> Option<u64> {
        Some(self.radius as u64)
    }
}

/// On-disk cache of ball tables, keyed by group, generator set, radius and
/// format version.
#[derive(Clone, Debug)]
pub struct BallCache {
    dir: PathBuf,
}

impl BallCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        BallCache { dir: dir.into() }
    }

    pub fn path_for(&self, group: GroupId, generators: &GeneratorSet, radius: u32) -> PathBuf {
        let mut hasher = Sha256::new();
        for g in generators.iter() {
            hasher.update(g.to_string().as_bytes());
            hasher.update(b" ");
        }
        let digest = hasher.finalize();
        let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
        let name = format!(
            "ball-v{BALL_FORMAT_VERSION}-{}-{hex}-r{radius}.txt",
            group.to_string().replace(':', "_")
        );
        self.dir.join(name)
    }

    pub fn load_or_build(&self, group: GroupId, radius: u32, budget: usize) -> Result<BallTable> {
        let generators = group.generators();
        let path = self.path_for(group, &generators, radius);
        if path.exists() {
            if let Ok(table) = read_ball(&path) {
                return Ok(table);
            }
        }
        let table = build_ball(group, &generators, radius, budget)?;
        fs::create_dir_all(&self.dir)?;
        let tmp = path.with_extension("tmp");
        table.write_to(BufWriter::new(fs::File::create(&tmp)?))?;
        fs::rename(&tmp, &path)?;
        Ok(table)
    }
}

fn read_ball(path: &Path) -> Result<BallTable> {
    BallTable::read_from(BufReader::new(fs::File::open(path)?))
}

/// Exact word norms that need no table: reduced length on `F_k`, the l1 norm
/// on `Z^d`, and the travelling-lamplighter formula. Heisenberg has no closed
/// form here and is rejected.
#[derive(Clone, Copy, Debug)]
pub struct ClosedFormNorm {
    group: GroupId,
}

impl ClosedFormNorm {
    pub fn new(group: GroupId) -> Result<Self> {
        match group {
            GroupId::Heisenberg => Err(Error::Precondition(
                "no closed-form word norm for the Heisenberg group; use a ball table".into(),
            )),
            _ => Ok(ClosedFormNorm { group }),
        }
    }
}

impl WordNorm for ClosedFormNorm {
    fn norm(&self, g: &GroupElement) -> Result<u64> {
        if !self.group.contains(g) {
            return Err(Error::Domain(format!("{g} is not an element of {}", self.group)));
        }
        match g {
            GroupElement::Vector(v) => Ok(v.iter().map(|x| x.unsigned_abs()).sum()),
            GroupElement::Word(w) => Ok(w.len() as u64),
            GroupElement::Lamp { .. } => lamplighter_norm_closed_form(g),
            GroupElement::Heis { .. } => unreachable!("rejected in ClosedFormNorm::new"),
        }
    }
}

/// Word norm of a lamplighter element for the generators {walk +1, walk -1,
/// switch}: one switch per ON lamp plus the shortest tour from 0 that covers
/// every ON lamp and ends at the walker position.
pub fn lamplighter_norm_closed_form(g: &GroupElement) -> Result<u64> {
    let GroupElement::Lamp { lamps, pos } = g else {
        return Err(Error::Domain(format!("{g} is not a lamplighter element")));
    };
    let pos = *pos as i128;
    let lo = lamps.first().map_or(0, |&x| x as i128).min(0).min(pos);
    let hi = lamps.last().map_or(0, |&x| x as i128).max(0).max(pos);
    let left_first = -lo + (hi - lo) + (hi - pos);
    let right_first = hi + (hi - lo) + (pos - lo);
    let travel = left_first.min(right_first);
    u64::try_from(lamps.len() as i128 + travel).map_err(|_| Error::Overflow("lamplighter norm"))
}

/// Outcome of checking the semi-norm axioms on a ball.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SemiNormReport {
    pub checked_pairs: u64,
    pub max_triangle_violation: i64,
    pub max_symmetry_violation: i64,
    pub identity_value: i64,
}

impl SemiNormReport {
    pub fn is_clean(&self) -> bool {
        self.identity_value == 0 && self.max_triangle_violation == 0 && self.max_symmetry_violation == 0
    }
}

/// Check the axioms on the table's own word norm.
pub fn check_seminorm(table: &BallTable) -> SemiNormReport {
    check_seminorm_with(table, |g| table.get(g).map(i64::from))
}

/// Check the semi-norm axioms for an arbitrary integer-valued function on the
/// elements of `table`: value 0 at the identity, symmetry under inversion, and
/// subadditivity for every pair whose product stays inside the ball. Values
/// are exact integers, so a clean report has all violations equal to zero.
pub fn check_seminorm_with<F>(table: &BallTable, value: F) -> SemiNormReport
where
    F: Fn(&GroupElement) -> Option<i64>,
{
    let elements = table.elements_within(table.radius);
    let identity_value = value(&table.group.identity()).unwrap_or(i64::MAX);
    let mut max_symmetry_violation = 0i64;
    for g in &elements {
        let gi = table.group.inv(g).expect("ball elements are members");
        if let (Some(a), Some(b)) = (value(g), value(&gi)) {
            max_symmetry_violation = max_symmetry_violation.max((a - b).abs());
        }
    }
    let mut checked_pairs = 0u64;
    let mut max_triangle_violation = 0i64;
    let values: Vec<Option<i64>> = elements.iter().map(&value).collect();
    for (s, vs) in elements.iter().zip(&values) {
        let Some(vs) = vs else { continue };
        for (t, vt) in elements.iter().zip(&values) {
            let Some(vt) = vt else { continue };
            let st = mul_unchecked(s, t).expect("ball elements multiply");
            if table.get(&st).is_none() {
                continue;
            }
            if let Some(vst) = value(&st) {
                checked_pairs += 1;
                max_triangle_violation = max_triangle_violation.max(vst - vs - vt);
            }
        }
    }
    SemiNormReport {
        checked_pairs,
        max_triangle_violation,
        max_symmetry_violation,
        identity_value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball(group: GroupId, r: u32) -> BallTable {
        build_ball(group, &group.generators(), r, DEFAULT_BALL_BUDGET).unwrap()
    }

    #[test]
    fn free_ball_sizes() {
        let f2 = GroupId::Free { k: 2 };
        assert_eq!(ball(f2, 1).len(), 5);
        for n in 0..=6u32 {
            assert_eq!(ball(f2, n).len(), 2 * 3usize.pow(n) - 1);
        }
        let f3 = ball(GroupId::Free { k: 3 }, 4);
        for n in 1..=4 {
            assert_eq!(f3.sphere_size(n), 6 * 5usize.pow(n - 1));
        }
    }

    #[test]
    fn lattice_ball() {
        let z2 = ball(GroupId::FreeAbelian { d: 2 }, 2);
        assert_eq!(z2.len(), 13);
    }

    #[test]
    fn norms_on_small_elements() {
        let f2 = GroupId::Free { k: 2 };
        let t = ball(f2, 4);
        assert_eq!(t.word_norm(&f2.identity()).unwrap(), 0);
        assert_eq!(t.word_norm(&f2.parse_element("aBa").unwrap()).unwrap(), 3);
        let far = f2.parse_element("aaaaa").unwrap();
        assert!(matches!(t.word_norm(&far), Err(Error::OutOfRange { radius: 4, .. })));

        let l = GroupId::Lamplighter;
        let lt = ball(l, 6);
        assert_eq!(lt.word_norm(&GroupElement::lamp([0], 0)).unwrap(), 1);
    }

    #[test]
    fn lamplighter_closed_form_examples() {
        assert_eq!(lamplighter_norm_closed_form(&GroupElement::lamp([], 0)).unwrap(), 0);
        assert_eq!(lamplighter_norm_closed_form(&GroupElement::lamp([], 5)).unwrap(), 5);
        // two switches plus the tour 0 -> -1 -> 2 -> 0 of length 6
        let g = GroupElement::lamp([-1, 2], 0);
        assert_eq!(lamplighter_norm_closed_form(&g).unwrap(), 8);
        assert_eq!(ball(GroupId::Lamplighter, 9).word_norm(&g).unwrap(), 8);
    }

    #[test]
    fn lamplighter_closed_form_matches_bfs() {
        let t = ball(GroupId::Lamplighter, 12);
        for (g, n) in t.sorted_entries() {
            assert_eq!(lamplighter_norm_closed_form(g).unwrap(), n as u64, "{g}");
        }
    }

    #[test]
    fn seminorm_axioms_hold() {
        for (group, r) in [
            (GroupId::Free { k: 2 }, 4),
            (GroupId::FreeAbelian { d: 3 }, 3),
            (GroupId::Heisenberg, 5),
        ] {
            let rep = check_seminorm(&ball(group, r));
            assert!(rep.is_clean(), "{group}: {rep:?}");
            assert!(rep.checked_pairs > 0);
        }
    }

    #[test]
    fn broken_norm_is_caught() {
        let t = ball(GroupId::FreeAbelian { d: 1 }, 3);
        // squaring breaks subadditivity: |2|^2 > |1|^2 + |1|^2
        let rep = check_seminorm_with(&t, |g| t.get(g).map(|n| (n * n) as i64));
        assert!(rep.max_triangle_violation > 0);
    }

    #[test]
    fn budget_exceeded_names_radius() {
        let f2 = GroupId::Free { k: 2 };
        let err = build_ball(f2, &f2.generators(), 10, 200).unwrap_err();
        assert!(matches!(err, Error::Resource { budget: 200, radius: 5 }), "{err}");
    }

    #[test]
    fn text_format_round_trip_and_cache() {
        let h = GroupId::Heisenberg;
        let t = ball(h, 3);
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let back = BallTable::read_from(&buf[..]).unwrap();
        assert_eq!(back.len(), t.len());
        for (g, n) in t.sorted_entries() {
            assert_eq!(back.get(g), Some(n));
        }

        let dir = std::env::temp_dir().join(format!("walklab-ball-test-{}", std::process::id()));
        let cache = BallCache::new(&dir);
        let a = cache.load_or_build(h, 3, DEFAULT_BALL_BUDGET).unwrap();
        let b = cache.load_or_build(h, 3, DEFAULT_BALL_BUDGET).unwrap();
        assert_eq!(a.sorted_entries(), b.sorted_entries());
        fs::remove_dir_all(dir).ok();
    }
}
