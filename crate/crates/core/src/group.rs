//! Canonical-form arithmetic for the built-in finitely generated groups.
//!
//! Four families are supported: free abelian groups `Z^d`, free groups `F_k`,
//! the lamplighter group `Z/2 wr Z` and the discrete Heisenberg group.
//! Elements are stored in a canonical form, so structural equality is group
//! equality. Coordinates are checked 64-bit integers; any overflow surfaces as
//! [`Error::Overflow`] instead of wrapping.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported free-group rank; letters are rendered as `a..z`.
pub const MAX_FREE_RANK: u32 = 26;

/// Identifies one of the built-in groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GroupId {
    FreeAbelian { d: u32 },
    Free { k: u32 },
    Lamplighter,
    Heisenberg,
}

/// A letter of the free-group alphabet: generator `index`, possibly inverted.
///
/// Encoded as `2 * index + inverse_bit` so that the inverse letter is `code ^ 1`
/// and the natural order is `a < A < b < B < ...`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter(u8);

impl Letter {
    pub fn new(index: u32, inverse: bool) -> Self {
        debug_assert!(index < MAX_FREE_RANK);
        Letter((index as u8) << 1 | inverse as u8)
    }

    pub fn index(self) -> u32 {
        (self.0 >> 1) as u32
    }

    pub fn is_inverse(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn inverse(self) -> Self {
        Letter(self.0 ^ 1)
    }

    /// Position in the `2k` letter alphabet.
    pub fn code(self) -> usize {
        self.0 as usize
    }

    pub fn from_code(code: usize) -> Self {
        Letter(code as u8)
    }

    fn to_char(self) -> char {
        let c = (b'a' + self.index() as u8) as char;
        if self.is_inverse() {
            c.to_ascii_uppercase()
        } else {
            c
        }
    }

    fn from_char(c: char) -> Option<Self> {
        if c.is_ascii_lowercase() {
            Some(Letter::new(c as u32 - 'a' as u32, false))
        } else if c.is_ascii_uppercase() {
            Some(Letter::new(c as u32 - 'A' as u32, true))
        } else {
            None
        }
    }
}

/// An element of a built-in group, in canonical form.
///
/// The derived `Ord` is used wherever a deterministic iteration order is needed.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupElement {
    /// Integer vector of `Z^d`.
    Vector(Vec<i64>),
    /// Freely reduced word.
    Word(Vec<Letter>),
    /// Lamplighter element: sorted ON lamps and the walker position.
    Lamp { lamps: Vec<i64>, pos: i64 },
    /// Unitriangular matrix with upper entries `x`, `z` (corner) and `y`.
    Heis { x: i64, y: i64, z: i64 },
}

impl GroupElement {
    /// Reduced word length for free-group elements, `None` otherwise.
    pub fn word_len(&self) -> Option<usize> {
        match self {
            GroupElement::Word(w) => Some(w.len()),
            _ => None,
        }
    }

    pub fn letters(&self) -> Option<&[Letter]> {
        match self {
            GroupElement::Word(w) => Some(w),
            _ => None,
        }
    }

    /// Free-group element from a word, reducing it on the way.
    pub fn reduced_word(letters: impl IntoIterator<Item = Letter>) -> Self {
        let mut out: Vec<Letter> = Vec::new();
        for l in letters {
            push_letter(&mut out, l);
        }
        GroupElement::Word(out)
    }

    /// Lamplighter element; lamps are sorted and toggled pairs cancel.
    pub fn lamp(lamps: impl IntoIterator<Item = i64>, pos: i64) -> Self {
        let mut v: Vec<i64> = lamps.into_iter().collect();
        v.sort_unstable();
        let mut out: Vec<i64> = Vec::with_capacity(v.len());
        for x in v {
            if out.last() == Some(&x) {
                out.pop();
            } else {
                out.push(x);
            }
        }
        GroupElement::Lamp { lamps: out, pos }
    }
}

fn push_letter(word: &mut Vec<Letter>, l: Letter) {
    if word.last() == Some(&l.inverse()) {
        word.pop();
    } else {
        word.push(l);
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupElement::Vector(v) => {
                write!(f, "(")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
            GroupElement::Word(w) if w.is_empty() => write!(f, "e"),
            GroupElement::Word(w) => {
                for l in w {
                    write!(f, "{}", l.to_char())?;
                }
                Ok(())
            }
            GroupElement::Lamp { lamps, pos } => {
                write!(f, "{{")?;
                for (i, x) in lamps.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "}}@{pos}")
            }
            GroupElement::Heis { x, y, z } => write!(f, "({x},{y},{z})"),
        }
    }
}

/// The standard symmetric generating set of a group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorSet {
    elements: Vec<GroupElement>,
}

impl GeneratorSet {
    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &GroupElement> {
        self.elements.iter()
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        self.elements.contains(g)
    }
}

impl GroupId {
    pub fn validate(self) -> Result<Self> {
        match self {
            GroupId::FreeAbelian { d: 0 } => Err(Error::Domain("zd requires d >= 1".into())),
            GroupId::Free { k } if k == 0 || k > MAX_FREE_RANK => Err(Error::Domain(format!(
                "free group rank must be in 1..={MAX_FREE_RANK}, got {k}"
            ))),
            _ => Ok(self),
        }
    }

    pub fn identity(&self) -> GroupElement {
        match *self {
            GroupId::FreeAbelian { d } => GroupElement::Vector(vec![0; d as usize]),
            GroupId::Free { .. } => GroupElement::Word(Vec::new()),
            GroupId::Lamplighter => GroupElement::Lamp {
                lamps: Vec::new(),
                pos: 0,
            },
            GroupId::Heisenberg => GroupElement::Heis { x: 0, y: 0, z: 0 },
        }
    }

    pub fn generators(&self) -> GeneratorSet {
        let elements = match *self {
            GroupId::FreeAbelian { d } => {
                let mut out = Vec::with_capacity(2 * d as usize);
                for i in 0..d as usize {
                    for sign in [1, -1] {
                        let mut v = vec![0; d as usize];
                        v[i] = sign;
                        out.push(GroupElement::Vector(v));
                    }
                }
                out
            }
            GroupId::Free { k } => (0..k)
                .flat_map(|i| {
                    [false, true].map(|inv| GroupElement::Word(vec![Letter::new(i, inv)]))
                })
                .collect(),
            GroupId::Lamplighter => vec![
                GroupElement::Lamp {
                    lamps: vec![],
                    pos: 1,
                },
                GroupElement::Lamp {
                    lamps: vec![],
                    pos: -1,
                },
                GroupElement::Lamp {
                    lamps: vec![0],
                    pos: 0,
                },
            ],
            GroupId::Heisenberg => vec![
                GroupElement::Heis { x: 1, y: 0, z: 0 },
                GroupElement::Heis { x: -1, y: 0, z: 0 },
                GroupElement::Heis { x: 0, y: 1, z: 0 },
                GroupElement::Heis { x: 0, y: -1, z: 0 },
            ],
        };
        GeneratorSet { elements }
    }

    /// Whether `g` is a canonical-form member of this group.
    pub fn contains(&self, g: &GroupElement) -> bool {
        match (self, g) {
            (GroupId::FreeAbelian { d }, GroupElement::Vector(v)) => v.len() == *d as usize,
            (GroupId::Free { k }, GroupElement::Word(w)) => {
                w.iter().all(|l| l.index() < *k) && w.windows(2).all(|p| p[0] != p[1].inverse())
            }
            (GroupId::Lamplighter, GroupElement::Lamp { lamps, .. }) => {
                lamps.windows(2).all(|p| p[0] < p[1])
            }
            (GroupId::Heisenberg, GroupElement::Heis { .. }) => true,
            _ => false,
        }
    }

    fn check(&self, g: &GroupElement) -> Result<()> {
        if self.contains(g) {
            Ok(())
        } else {
            Err(Error::Domain(format!("{g} is not an element of {self}")))
        }
    }

    /// Group law. Both operands must be members of `self`.
    pub fn mul(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
        self.check(g)?;
        self.check(h)?;
        mul_unchecked(g, h)
    }

    pub fn inv(&self, g: &GroupElement) -> Result<GroupElement> {
        self.check(g)?;
        inv_unchecked(g)
    }

    /// Left-to-right product of a sequence of elements.
    pub fn product<'a>(&self, items: impl IntoIterator<Item = &'a GroupElement>) -> Result<GroupElement> {
        let mut acc = self.identity();
        for g in items {
            acc = self.mul(&acc, g)?;
        }
        Ok(acc)
    }

    /// Parse an element from its canonical string form, re-canonicalizing it.
    pub fn parse_element(&self, s: &str) -> Result<GroupElement> {
        let s = s.trim();
        let bad = || Error::Parse(format!("cannot parse {s:?} as an element of {self}"));
        if s == "e" {
            return Ok(self.identity());
        }
        let g = match self {
            GroupId::FreeAbelian { d } => {
                let v = parse_tuple(s).ok_or_else(bad)?;
                if v.len() != *d as usize {
                    return Err(bad());
                }
                GroupElement::Vector(v)
            }
            GroupId::Free { .. } => {
                let letters: Option<Vec<Letter>> = s.chars().map(Letter::from_char).collect();
                GroupElement::reduced_word(letters.ok_or_else(bad)?)
            }
            GroupId::Lamplighter => {
                let (set, pos) = s.split_once('@').ok_or_else(bad)?;
                let inner = set
                    .strip_prefix('{')
                    .and_then(|x| x.strip_suffix('}'))
                    .ok_or_else(bad)?;
                let lamps: Vec<i64> = if inner.trim().is_empty() {
                    Vec::new()
                } else {
                    inner
                        .split(',')
                        .map(|t| t.trim().parse::<i64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad())?
                };
                let pos = pos.trim().parse::<i64>().map_err(|_| bad())?;
                GroupElement::lamp(lamps, pos)
            }
            GroupId::Heisenberg => match parse_tuple(s).ok_or_else(bad)?.as_slice() {
                [x, y, z] => GroupElement::Heis {
                    x: *x,
                    y: *y,
                    z: *z,
                },
                _ => return Err(bad()),
            },
        };
        self.check(&g)?;
        Ok(g)
    }
}

fn parse_tuple(s: &str) -> Option<Vec<i64>> {
    let inner = s.strip_prefix('(')?.strip_suffix(')')?;
    inner.split(',').map(|t| t.trim().parse().ok()).collect()
}

pub(crate) fn mul_unchecked(g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
    use GroupElement::*;
    Ok(match (g, h) {
        (Vector(a), Vector(b)) => Vector(
            a.iter()
                .zip(b)
                .map(|(x, y)| x.checked_add(*y).ok_or(Error::Overflow("Z^d product")))
                .collect::<Result<_>>()?,
        ),
        (Word(a), Word(b)) => {
            let mut out = a.clone();
            for &l in b {
                push_letter(&mut out, l);
            }
            Word(out)
        }
        (Lamp { lamps: l1, pos: p1 }, Lamp { lamps: l2, pos: p2 }) => {
            let shifted: Vec<i64> = l2
                .iter()
                .map(|x| x.checked_add(*p1).ok_or(Error::Overflow("lamplighter product")))
                .collect::<Result<_>>()?;
            Lamp {
                lamps: symmetric_difference(l1, &shifted),
                pos: p1.checked_add(*p2).ok_or(Error::Overflow("lamplighter product"))?,
            }
        }
        (Heis { x: x1, y: y1, z: z1 }, Heis { x: x2, y: y2, z: z2 }) => {
            let of = || Error::Overflow("Heisenberg product");
            let corner = x1.checked_mul(*y2).ok_or_else(of)?;
            Heis {
                x: x1.checked_add(*x2).ok_or_else(of)?,
                y: y1.checked_add(*y2).ok_or_else(of)?,
                z: z1
                    .checked_add(*z2)
                    .and_then(|z| z.checked_add(corner))
                    .ok_or_else(of)?,
            }
        }
        _ => return Err(Error::Domain(format!("cannot multiply {g} and {h}"))),
    })
}

/// `g <- g * s` without reallocating where the representation allows it.
/// Both operands must already be members of the same group.
pub fn right_mul_in_place(g: &mut GroupElement, s: &GroupElement) -> Result<()> {
    use GroupElement::*;
    match (g, s) {
        (Vector(a), Vector(b)) if a.len() == b.len() => {
            for (x, y) in a.iter_mut().zip(b) {
                *x = x.checked_add(*y).ok_or(Error::Overflow("Z^d product"))?;
            }
        }
        (Word(a), Word(b)) => {
            for &l in b {
                push_letter(a, l);
            }
        }
        (Lamp { lamps, pos }, Lamp { lamps: toggles, pos: step }) => {
            for t in toggles {
                let at = t.checked_add(*pos).ok_or(Error::Overflow("lamplighter product"))?;
                match lamps.binary_search(&at) {
                    Ok(i) => {
                        lamps.remove(i);
                    }
                    Err(i) => lamps.insert(i, at),
                }
            }
            *pos = pos.checked_add(*step).ok_or(Error::Overflow("lamplighter product"))?;
        }
        (g @ Heis { .. }, h @ Heis { .. }) => {
            *g = mul_unchecked(g, h)?;
        }
        (g, s) => return Err(Error::Domain(format!("cannot multiply {g} and {s}"))),
    }
    Ok(())
}

pub(crate) fn inv_unchecked(g: &GroupElement) -> Result<GroupElement> {
    use GroupElement::*;
    Ok(match g {
        Vector(v) => Vector(
            v.iter()
                .map(|x| x.checked_neg().ok_or(Error::Overflow("Z^d inverse")))
                .collect::<Result<_>>()?,
        ),
        Word(w) => Word(w.iter().rev().map(|l| l.inverse()).collect()),
        Lamp { lamps, pos } => Lamp {
            lamps: lamps
                .iter()
                .map(|x| x.checked_sub(*pos).ok_or(Error::Overflow("lamplighter inverse")))
                .collect::<Result<_>>()?,
            pos: pos.checked_neg().ok_or(Error::Overflow("lamplighter inverse"))?,
        },
        Heis { x, y, z } => {
            let of = || Error::Overflow("Heisenberg inverse");
            Heis {
                x: x.checked_neg().ok_or_else(of)?,
                y: y.checked_neg().ok_or_else(of)?,
                z: x
                    .checked_mul(*y)
                    .and_then(|xy| xy.checked_sub(*z))
                    .ok_or_else(of)?,
            }
        }
    })
}

fn symmetric_difference(a: &[i64], b: &[i64]) -> Vec<i64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupId::FreeAbelian { d } => write!(f, "zd:{d}"),
            GroupId::Free { k } => write!(f, "free:{k}"),
            GroupId::Lamplighter => write!(f, "lamplighter"),
            GroupId::Heisenberg => write!(f, "heisenberg"),
        }
    }
}

impl FromStr for GroupId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let parse_param = |p: &str| {
            p.parse::<u32>()
                .map_err(|_| Error::Parse(format!("bad group parameter in {s:?}")))
        };
        let id = match s.split_once(':') {
            Some(("zd", d)) | Some(("z", d)) => GroupId::FreeAbelian { d: parse_param(d)? },
            Some(("free", k)) | Some(("f", k)) => GroupId::Free { k: parse_param(k)? },
            None if s == "lamplighter" => GroupId::Lamplighter,
            None if s == "heisenberg" => GroupId::Heisenberg,
            None if s == "z" => GroupId::FreeAbelian { d: 1 },
            _ => return Err(Error::Parse(format!("unknown group {s:?}"))),
        };
        id.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f2() -> GroupId {
        GroupId::Free { k: 2 }
    }

    fn w(s: &str) -> GroupElement {
        f2().parse_element(s).unwrap()
    }

    #[test]
    fn free_cancellation() {
        let g = f2();
        assert_eq!(g.mul(&w("a"), &w("A")).unwrap(), g.identity());
        assert_eq!(g.mul(&w("ab"), &w("Ba")).unwrap(), w("aa"));
        assert_eq!(g.inv(&w("ab")).unwrap(), w("BA"));
        assert_eq!(g.inv(&g.identity()).unwrap(), g.identity());
    }

    #[test]
    fn heisenberg_matrix_product() {
        // (x, y, z) <-> [[1, x, z], [0, 1, y], [0, 0, 1]]
        fn matrix(g: &GroupElement) -> [[i64; 3]; 3] {
            match g {
                GroupElement::Heis { x, y, z } => [[1, *x, *z], [0, 1, *y], [0, 0, 1]],
                _ => unreachable!(),
            }
        }
        fn matmul(a: [[i64; 3]; 3], b: [[i64; 3]; 3]) -> [[i64; 3]; 3] {
            let mut c = [[0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
                }
            }
            c
        }
        let h = GroupId::Heisenberg;
        let g1 = GroupElement::Heis { x: 1, y: 0, z: 0 };
        let g2 = GroupElement::Heis { x: 0, y: 1, z: 0 };
        let p = h.mul(&g1, &g2).unwrap();
        assert_eq!(p, GroupElement::Heis { x: 1, y: 1, z: 1 });
        assert_eq!(matrix(&p), matmul(matrix(&g1), matrix(&g2)));

        let a = GroupElement::Heis { x: 3, y: -2, z: 7 };
        let b = GroupElement::Heis { x: -5, y: 4, z: 1 };
        assert_eq!(matrix(&h.mul(&a, &b).unwrap()), matmul(matrix(&a), matrix(&b)));
    }

    #[test]
    fn lamplighter_inverse() {
        let l = GroupId::Lamplighter;
        let g = GroupElement::lamp([0], 1);
        let gi = l.inv(&g).unwrap();
        assert_eq!(gi, GroupElement::lamp([-1], -1));
        assert_eq!(l.mul(&g, &gi).unwrap(), l.identity());
        assert_eq!(l.mul(&gi, &g).unwrap(), l.identity());
    }

    #[test]
    fn mixed_groups_rejected() {
        let z2 = GroupId::FreeAbelian { d: 2 };
        let err = z2.mul(&z2.identity(), &w("a")).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        let z3 = GroupId::FreeAbelian { d: 3 };
        assert!(z2.mul(&z2.identity(), &z3.identity()).is_err());
        // letter c is not in F_2
        let f3 = GroupId::Free { k: 3 };
        assert!(f2().mul(&w("a"), &f3.parse_element("c").unwrap()).is_err());
    }

    #[test]
    fn in_place_matches_mul() {
        let cases = [
            (f2(), "aBa", "Ab"),
            (GroupId::Lamplighter, "{-1,3}@2", "{0}@0"),
            (GroupId::Lamplighter, "{1,3}@2", "{1}@-1"),
            (GroupId::Heisenberg, "(1,2,3)", "(0,-1,0)"),
            (GroupId::FreeAbelian { d: 2 }, "(1,2)", "(-1,0)"),
        ];
        for (id, a, b) in cases {
            let a = id.parse_element(a).unwrap();
            let b = id.parse_element(b).unwrap();
            let mut c = a.clone();
            right_mul_in_place(&mut c, &b).unwrap();
            assert_eq!(c, id.mul(&a, &b).unwrap());
        }
    }

    #[test]
    fn overflow_is_an_error() {
        let z = GroupId::FreeAbelian { d: 1 };
        let big = GroupElement::Vector(vec![i64::MAX]);
        let one = GroupElement::Vector(vec![1]);
        assert!(matches!(z.mul(&big, &one), Err(Error::Overflow(_))));
        let h = GroupId::Heisenberg;
        let a = GroupElement::Heis { x: i64::MAX, y: 0, z: 0 };
        let b = GroupElement::Heis { x: 0, y: 2, z: 0 };
        assert!(matches!(h.mul(&a, &b), Err(Error::Overflow(_))));
    }

    #[test]
    fn generator_sets_are_symmetric() {
        for id in [
            GroupId::FreeAbelian { d: 3 },
            GroupId::Free { k: 3 },
            GroupId::Lamplighter,
            GroupId::Heisenberg,
        ] {
            let s = id.generators();
            assert!(!s.contains(&id.identity()));
            for g in s.iter() {
                assert!(s.contains(&id.inv(g).unwrap()), "{id}: {g}");
            }
        }
    }

    #[test]
    fn parse_and_display() {
        for (id, s) in [
            ("free:2", "aBBa"),
            ("zd:3", "(1,-2,0)"),
            ("lamplighter", "{-1,2}@0"),
            ("heisenberg", "(1,2,-3)"),
        ] {
            let id: GroupId = id.parse().unwrap();
            let g = id.parse_element(s).unwrap();
            assert_eq!(g.to_string(), s);
        }
        assert_eq!(w("aAb").to_string(), "b");
        assert_eq!(w("e").to_string(), "e");
        assert!("free:0".parse::<GroupId>().is_err());
        assert!("zd:0".parse::<GroupId>().is_err());
        assert!("sl2".parse::<GroupId>().is_err());
    }
}
