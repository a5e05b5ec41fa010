//! Combinatorics of the four-wave resonance relation on the Fourier lattice.
//!
//! A triple `(k, l, m)` is resonant with a target `j` when
//! `j = k - l + m` and `|j|^2 = |k|^2 - |l|^2 + |m|^2`. Geometrically the four
//! points are the corners of a rectangle with `l` and `j` opposite, or one of
//! the two degenerate patterns `(k = j, m = l)` and `(k = l, m = j)`.
//!
//! Modes are stored as two-vectors. Higher-dimensional tori only ever see the
//! trailing zeros, since interactions starting in the plane stay there.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::Write;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lattice point `j = (j1, j2)`; ordered lexicographically.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[i64; 2]", into = "[i64; 2]")]
pub struct ModeIndex {
    pub j1: i64,
    pub j2: i64,
}

impl ModeIndex {
    pub const ZERO: ModeIndex = ModeIndex { j1: 0, j2: 0 };

    pub const fn new(j1: i64, j2: i64) -> Self {
        ModeIndex { j1, j2 }
    }

    pub fn norm_sq(self) -> i64 {
        self.j1 * self.j1 + self.j2 * self.j2
    }

    pub fn dot(self, other: ModeIndex) -> i64 {
        self.j1 * other.j1 + self.j2 * other.j2
    }

    /// `max(|j1|, |j2|)`, the norm whose balls are the truncation boxes.
    pub fn max_norm(self) -> i64 {
        self.j1.abs().max(self.j2.abs())
    }

    pub fn l1_norm(self) -> i64 {
        self.j1.abs() + self.j2.abs()
    }

    /// Image under element `g` (0..8) of the dihedral group of the square:
    /// bit 2 swaps the coordinates, bits 0 and 1 flip the signs.
    pub fn dihedral(self, g: u8) -> ModeIndex {
        let (a, b) = if g & 4 != 0 {
            (self.j2, self.j1)
        } else {
            (self.j1, self.j2)
        };
        let a = if g & 1 != 0 { -a } else { a };
        let b = if g & 2 != 0 { -b } else { b };
        ModeIndex::new(a, b)
    }
}

impl From<[i64; 2]> for ModeIndex {
    fn from(v: [i64; 2]) -> Self {
        ModeIndex::new(v[0], v[1])
    }
}

impl From<ModeIndex> for [i64; 2] {
    fn from(j: ModeIndex) -> Self {
        [j.j1, j.j2]
    }
}

impl From<(i64, i64)> for ModeIndex {
    fn from(v: (i64, i64)) -> Self {
        ModeIndex::new(v.0, v.1)
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.j1, self.j2)
    }
}

impl Add for ModeIndex {
    type Output = ModeIndex;
    fn add(self, rhs: ModeIndex) -> ModeIndex {
        ModeIndex::new(self.j1 + rhs.j1, self.j2 + rhs.j2)
    }
}

impl Sub for ModeIndex {
    type Output = ModeIndex;
    fn sub(self, rhs: ModeIndex) -> ModeIndex {
        ModeIndex::new(self.j1 - rhs.j1, self.j2 - rhs.j2)
    }
}

impl Neg for ModeIndex {
    type Output = ModeIndex;
    fn neg(self) -> ModeIndex {
        ModeIndex::new(-self.j1, -self.j2)
    }
}

/// Sorted set of modes.
pub type ModeSet = BTreeSet<ModeIndex>;

/// Ordered triple `(k, l, m)`; ordering is lexicographic on `(k, l, m)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ResonantTriple {
    pub k: ModeIndex,
    pub l: ModeIndex,
    pub m: ModeIndex,
}

impl ResonantTriple {
    pub const fn new(k: ModeIndex, l: ModeIndex, m: ModeIndex) -> Self {
        ResonantTriple { k, l, m }
    }

    /// `k - l + m`.
    pub fn target(&self) -> ModeIndex {
        self.k - self.l + self.m
    }

    /// `|k|^2 - |l|^2 + |m|^2`.
    pub fn frequency(&self) -> i64 {
        self.k.norm_sq() - self.l.norm_sq() + self.m.norm_sq()
    }

    /// True for `(k = j, m = l)` or `(k = l, m = j)` with `j` the target.
    pub fn is_degenerate(&self) -> bool {
        let j = self.target();
        self.k == j || self.k == self.l
    }

    pub fn swapped(&self) -> ResonantTriple {
        ResonantTriple::new(self.m, self.l, self.k)
    }

    pub fn dihedral(&self, g: u8) -> ResonantTriple {
        ResonantTriple::new(self.k.dihedral(g), self.l.dihedral(g), self.m.dihedral(g))
    }
}

pub fn is_resonant(j: ModeIndex, t: &ResonantTriple) -> bool {
    t.target() == j && t.frequency() == j.norm_sq()
}

/// `| |k - l + m|^2 - (|k|^2 - |l|^2 + |m|^2) |`. Zero exactly on resonant
/// triples and at least one otherwise.
pub fn phase_gap(k: ModeIndex, l: ModeIndex, m: ModeIndex) -> u64 {
    let t = ResonantTriple::new(k, l, m);
    (t.target().norm_sq() - t.frequency()).unsigned_abs()
}

/// All `(k, l, m)` in `support^3` resonant with `j`, sorted.
///
/// For each `l` the pair `(k, m)` must satisfy `k + m = j + l` and
/// `|k|^2 + |m|^2 = |j|^2 + |l|^2`, so scanning `k` fixes `m`. The degenerate
/// triple `(j, j, j)` is produced once.
pub fn enumerate_resonances(j: ModeIndex, support: &ModeSet) -> Vec<ResonantTriple> {
    let lookup: HashSet<ModeIndex> = support.iter().copied().collect();
    let j_sq = j.norm_sq();
    let mut out = Vec::new();
    for &l in support {
        let sum = j + l;
        let energy = j_sq + l.norm_sq();
        for &k in support {
            let m = sum - k;
            if k.norm_sq() + m.norm_sq() == energy && lookup.contains(&m) {
                out.push(ResonantTriple::new(k, l, m));
            }
        }
    }
    out.sort_unstable();
    out
}

/// Reference enumeration: filters every triple of `support^3` with
/// [`is_resonant`]. Cubic cost; kept for cross-checking exported tables.
pub fn brute_force_resonances(j: ModeIndex, support: &ModeSet) -> Vec<ResonantTriple> {
    let mut out = Vec::new();
    for &k in support {
        for &l in support {
            for &m in support {
                let t = ResonantTriple::new(k, l, m);
                if is_resonant(j, &t) {
                    out.push(t);
                }
            }
        }
    }
    out
}

/// The box `max(|j1|, |j2|) <= radius`.
pub fn box_modes(radius: i64) -> ModeSet {
    let mut set = ModeSet::new();
    for j1 in -radius..=radius {
        for j2 in -radius..=radius {
            set.insert(ModeIndex::new(j1, j2));
        }
    }
    set
}

/// `{(0,0), (+-1,0), (0,+-1)}`, the support of `1 + 2cos x1 + 2cos x2`.
pub fn five_mode_set() -> ModeSet {
    [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)]
        .into_iter()
        .map(ModeIndex::from)
        .collect()
}

/// `{(+-1,0), (0,+-1)}`, the support of `2cos x1 + 2cos x2`.
pub fn unit_square_set() -> ModeSet {
    [(1, 0), (-1, 0), (0, 1), (0, -1)]
        .into_iter()
        .map(ModeIndex::from)
        .collect()
}

/// Generations `J_0, J_1, ...` of the iterated resonance closure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModeSetSequence {
    pub j_sets: Vec<ModeSet>,
    pub n_sets: Vec<ModeSet>,
}

impl ModeSetSequence {
    /// `J_k`, the modes that first appear at iteration `k`.
    pub fn generation(&self, k: usize) -> &ModeSet {
        &self.j_sets[k]
    }

    /// `N^(k)`, the union of `J_0 .. J_k`.
    pub fn cumulative(&self, k: usize) -> &ModeSet {
        &self.n_sets[k]
    }

    pub fn len(&self) -> usize {
        self.j_sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.j_sets.is_empty()
    }

    /// Generation index of `j`, if it has appeared.
    pub fn generation_of(&self, j: ModeIndex) -> Option<usize> {
        self.j_sets.iter().position(|s| s.contains(&j))
    }
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// Targets outside `current` that some non-degenerate triple in `current^3`
/// is resonant with. Resonance of `(k, l, m)` with its own target is
/// equivalent to `(k - l) . (m - l) = 0`, so `m` walks the lattice line
/// through `l` orthogonal to `k - l`.
fn new_targets(current: &ModeSet) -> ModeSet {
    let bound = current.iter().map(|j| j.max_norm()).max().unwrap_or(0);
    let mut found = ModeSet::new();
    for &l in current {
        for &k in current {
            if k == l {
                continue;
            }
            let d = k - l;
            let g = gcd(d.j1, d.j2);
            let step = ModeIndex::new(-d.j2 / g, d.j1 / g);
            for dir in [step, -step] {
                let mut m = l + dir;
                while m.max_norm() <= bound {
                    if current.contains(&m) {
                        let j = k - l + m;
                        if !current.contains(&j) {
                            found.insert(j);
                        }
                    }
                    m = m + dir;
                }
            }
        }
    }
    found
}

/// Iterates the resonance closure `n_iter` times from `j0`.
pub fn generate_mode_sets(j0: &ModeSet, n_iter: usize) -> Result<ModeSetSequence> {
    if j0.is_empty() {
        return Err(Error::EmptyModeSet);
    }
    let mut j_sets = vec![j0.clone()];
    let mut n_sets = vec![j0.clone()];
    for _ in 0..n_iter {
        let current = n_sets.last().expect("non-empty");
        let fresh = new_targets(current);
        let mut next = current.clone();
        next.extend(fresh.iter().copied());
        j_sets.push(fresh);
        n_sets.push(next);
    }
    Ok(ModeSetSequence { j_sets, n_sets })
}

/// Extremal modes of generation `n`: `{(0,+-2^p), (+-2^p,0)}` for `n = 2p`
/// and `{(+-2^p, +-2^p)}` for `n = 2p + 1`. Every element has `|j|^2 = 2^n`.
pub fn extremal_modes(n: u32) -> ModeSet {
    let s = 1i64 << (n / 2);
    let pts: [(i64, i64); 4] = if n % 2 == 0 {
        [(0, s), (0, -s), (s, 0), (-s, 0)]
    } else {
        [(s, s), (s, -s), (-s, s), (-s, -s)]
    };
    pts.into_iter().map(ModeIndex::from).collect()
}

/// Generation `n` with `j` in `N_*^(n)`, if any.
pub fn extremal_generation(j: ModeIndex) -> Option<u32> {
    let sq = j.norm_sq();
    if sq <= 0 || sq & (sq - 1) != 0 {
        return None;
    }
    let n = sq.trailing_zeros();
    extremal_modes(n).contains(&j).then_some(n)
}

/// The unordered pair `{k, m}` of generation-`(n-1)` extremal modes producing
/// `j` through the zero mode: `j = k + m`, `|j|^2 = |k|^2 + |m|^2`.
/// Returned with `k < m`.
pub fn unique_generator(j: ModeIndex, n: u32) -> Result<(ModeIndex, ModeIndex)> {
    if n == 0 || !extremal_modes(n).contains(&j) {
        return Err(Error::NotExtremal {
            mode: j,
            generation: n,
        });
    }
    let prev: Vec<ModeIndex> = extremal_modes(n - 1).into_iter().collect();
    let mut pairs = Vec::new();
    for (a, &k) in prev.iter().enumerate() {
        for &m in &prev[a + 1..] {
            if k + m == j && k.norm_sq() + m.norm_sq() == j.norm_sq() {
                pairs.push((k, m));
            }
        }
    }
    match pairs.as_slice() {
        [pair] => Ok(*pair),
        _ => Err(Error::NotExtremal {
            mode: j,
            generation: n,
        }),
    }
}

/// Writes `j1 j2 | k1 k2 l1 l2 m1 m2`, one line per triple.
pub fn write_resonance_table<W: Write>(
    mut w: W,
    j: ModeIndex,
    triples: &[ResonantTriple],
) -> std::io::Result<()> {
    for t in triples {
        writeln!(
            w,
            "{} {} | {} {} {} {} {} {}",
            j.j1, j.j2, t.k.j1, t.k.j2, t.l.j1, t.l.j2, t.m.j1, t.m.j2
        )?;
    }
    Ok(())
}

/// Writes `j1 j2`, one line per mode, in sorted order.
pub fn write_mode_set<W: Write>(mut w: W, set: &ModeSet) -> std::io::Result<()> {
    for j in set {
        writeln!(w, "{} {}", j.j1, j.j2)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(a: i64, b: i64) -> ModeIndex {
        ModeIndex::new(a, b)
    }

    fn set(pts: &[(i64, i64)]) -> ModeSet {
        pts.iter().copied().map(ModeIndex::from).collect()
    }

    // Independent of both library enumerators: filters on the two defining
    // equations written out by hand.
    fn oracle(j: ModeIndex, support: &ModeSet) -> BTreeSet<ResonantTriple> {
        let mut out = BTreeSet::new();
        for &k in support {
            for &l in support {
                for &m in support {
                    let v = (k.j1 - l.j1 + m.j1, k.j2 - l.j2 + m.j2);
                    let e = k.j1 * k.j1 + k.j2 * k.j2 - l.j1 * l.j1 - l.j2 * l.j2
                        + m.j1 * m.j1
                        + m.j2 * m.j2;
                    if v == (j.j1, j.j2) && e == j.j1 * j.j1 + j.j2 * j.j2 {
                        out.insert(ResonantTriple::new(k, l, m));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn resonance_membership() {
        let t = ResonantTriple::new(mi(0, 1), mi(-1, 0), mi(0, -1));
        assert!(is_resonant(mi(1, 0), &t));
        let t = ResonantTriple::new(mi(5, 3), mi(2, 2), mi(2, 2));
        assert!(is_resonant(mi(5, 3), &t));
        let t = ResonantTriple::new(mi(2, 0), mi(1, 0), mi(0, 0));
        assert_eq!(t.target(), mi(1, 0));
        assert!(!is_resonant(mi(1, 0), &t));
    }

    #[test]
    fn unit_square_has_nine_triples() {
        let got = enumerate_resonances(mi(1, 0), &unit_square_set());
        let want: Vec<_> = oracle(mi(1, 0), &unit_square_set()).into_iter().collect();
        assert_eq!(got, want);
        assert_eq!(got.len(), 9);
        assert_eq!(got.iter().filter(|t| t.is_degenerate()).count(), 7);
        assert!(got.contains(&ResonantTriple::new(mi(0, 1), mi(-1, 0), mi(0, -1))));
        assert!(got.contains(&ResonantTriple::new(mi(0, -1), mi(-1, 0), mi(0, 1))));
    }

    #[test]
    fn zero_mode_alone() {
        let got = enumerate_resonances(ModeIndex::ZERO, &set(&[(0, 0)]));
        assert_eq!(
            got,
            vec![ResonantTriple::new(ModeIndex::ZERO, ModeIndex::ZERO, ModeIndex::ZERO)]
        );
    }

    #[test]
    fn diagonal_mode_from_five_mode_datum() {
        let got = enumerate_resonances(mi(1, 1), &five_mode_set());
        assert_eq!(
            got,
            vec![
                ResonantTriple::new(mi(0, 1), mi(0, 0), mi(1, 0)),
                ResonantTriple::new(mi(1, 0), mi(0, 0), mi(0, 1)),
            ]
        );
    }

    #[test]
    fn enumeration_matches_oracle_on_box() {
        let support = box_modes(4);
        for &j in &box_modes(5) {
            let got = enumerate_resonances(j, &support);
            let brute = brute_force_resonances(j, &support);
            let want: Vec<_> = oracle(j, &support).into_iter().collect();
            assert_eq!(got, want, "j = {j}");
            assert_eq!(brute, want, "j = {j}");
        }
    }

    #[test]
    fn first_generations_of_five_mode_datum() {
        let seq = generate_mode_sets(&five_mode_set(), 2).unwrap();
        assert_eq!(seq.generation(1), &set(&[(1, 1), (1, -1), (-1, -1), (-1, 1)]));
        let diamond: ModeSet = box_modes(2).into_iter().filter(|j| j.l1_norm() <= 2).collect();
        assert_eq!(seq.cumulative(2), &diamond);
    }

    #[test]
    fn unit_square_is_closed() {
        let seq = generate_mode_sets(&unit_square_set(), 4).unwrap();
        for k in 1..=4 {
            assert!(seq.generation(k).is_empty());
        }
    }

    #[test]
    fn empty_datum_is_rejected() {
        assert!(matches!(
            generate_mode_sets(&ModeSet::new(), 1),
            Err(Error::EmptyModeSet)
        ));
    }

    #[test]
    fn extremal_sets() {
        assert_eq!(extremal_modes(0), set(&[(0, 1), (0, -1), (1, 0), (-1, 0)]));
        assert_eq!(extremal_modes(1), set(&[(1, 1), (1, -1), (-1, 1), (-1, -1)]));
        assert_eq!(extremal_modes(4), set(&[(0, 4), (0, -4), (4, 0), (-4, 0)]));
        for n in 0..12 {
            for j in extremal_modes(n) {
                assert_eq!(j.norm_sq(), 1 << n);
                assert_eq!(extremal_generation(j), Some(n));
            }
        }
        assert_eq!(extremal_generation(mi(2, 1)), None);
        assert_eq!(extremal_generation(mi(0, 0)), None);
    }

    #[test]
    fn unique_generators() {
        assert_eq!(unique_generator(mi(1, 1), 1).unwrap(), (mi(0, 1), mi(1, 0)));
        assert_eq!(unique_generator(mi(2, 0), 2).unwrap(), (mi(1, -1), mi(1, 1)));
        assert_eq!(unique_generator(mi(2, 2), 3).unwrap(), (mi(0, 2), mi(2, 0)));
        assert!(unique_generator(mi(2, 1), 2).is_err());
        assert!(unique_generator(mi(1, 0), 0).is_err());
    }

    #[test]
    fn phase_gap_values() {
        assert_eq!(phase_gap(mi(0, 1), mi(-1, 0), mi(0, -1)), 0);
        assert_eq!(phase_gap(mi(2, 0), mi(1, 0), mi(0, 0)), 2);
    }

    #[test]
    fn dihedral_group_acts_on_triples() {
        let t = ResonantTriple::new(mi(0, 1), mi(-1, 0), mi(0, -1));
        for g in 0..8 {
            assert!(is_resonant(mi(1, 0).dihedral(g), &t.dihedral(g)));
            assert_eq!(mi(3, -2).dihedral(g).norm_sq(), 13);
        }
    }

    #[test]
    fn table_format() {
        let mut buf = Vec::new();
        let triples = enumerate_resonances(mi(1, 1), &five_mode_set());
        write_resonance_table(&mut buf, mi(1, 1), &triples).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "1 1 | 0 1 0 0 1 0\n1 1 | 1 0 0 0 0 1\n"
        );
    }
}
