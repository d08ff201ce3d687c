//! Nearest-neighbour walks on Z^d and N-path families.
//!
//! Enumeration is depth-first over an explicit stack, pruned by the L1
//! distance to the required endpoint, so streams are deterministic and only
//! feasible prefixes are ever visited.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cauchyn::{Compositions, MultiIndex};
use crate::error::{Error, Result};

pub const MAX_DIM: usize = 6;

/// Default cap on visited DFS nodes.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// A point of Z^d, `d ≤ MAX_DIM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    dim: u8,
    coords: [i32; MAX_DIM],
}

impl Site {
    pub fn origin(d: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&d), "dimension {d} out of range");
        Site { dim: d as u8, coords: [0; MAX_DIM] }
    }

    pub fn new(coords: &[i32]) -> Self {
        let mut s = Site::origin(coords.len());
        s.coords[..coords.len()].copy_from_slice(coords);
        s
    }

    /// `sign · e_axis`.
    pub fn unit(d: usize, axis: usize, sign: i32) -> Self {
        let mut s = Site::origin(d);
        s.coords[axis] = sign;
        s
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i32] {
        &self.coords[..self.dim as usize]
    }

    pub fn l1(&self) -> u32 {
        self.coords().iter().map(|c| c.unsigned_abs()).sum()
    }

    pub fn is_origin(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }

    /// Neighbour in direction `dir`: `+e_0, -e_0, +e_1, -e_1, …`.
    pub fn step(&self, dir: u8) -> Self {
        let mut s = *self;
        s.coords[(dir / 2) as usize] += if dir.is_multiple_of(2) { 1 } else { -1 };
        s
    }
}

impl std::ops::Add for Site {
    type Output = Site;
    fn add(self, rhs: Site) -> Site {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut s = self;
        for k in 0..MAX_DIM {
            s.coords[k] += rhs.coords[k];
        }
        s
    }
}

impl std::ops::Sub for Site {
    type Output = Site;
    fn sub(self, rhs: Site) -> Site {
        self + (-rhs)
    }
}

impl std::ops::Neg for Site {
    type Output = Site;
    fn neg(self) -> Site {
        let mut s = self;
        for c in s.coords.iter_mut() {
            *c = -*c;
        }
        s
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coords().iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl std::str::FromStr for Site {
    type Err = Error;

    /// `(1,0)` or `1,0`.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let coords = inner
            .split(',')
            .map(|t| t.trim().parse::<i32>().map_err(|e| Error::Parse(format!("site {s:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::Parse(format!("site {s:?} has unsupported dimension")));
        }
        Ok(Site::new(&coords))
    }
}

/// A nearest-neighbour path `(x_0, …, x_n)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeWalk {
    sites: Vec<Site>,
}

impl LatticeWalk {
    pub fn new(sites: Vec<Site>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::InvalidArgument("a walk has at least one site".into()));
        }
        for w in sites.windows(2) {
            if (w[1] - w[0]).l1() != 1 || w[0].dim != w[1].dim {
                return Err(Error::InvalidArgument(format!("non-unit step {} -> {}", w[0], w[1])));
            }
        }
        Ok(LatticeWalk { sites })
    }

    pub fn trivial(at: Site) -> Self {
        LatticeWalk { sites: vec![at] }
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    /// `|γ|`, the number of steps.
    pub fn len(&self) -> usize {
        self.sites.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Initial point.
    pub fn start(&self) -> Site {
        self.sites[0]
    }

    /// Final point.
    pub fn end(&self) -> Site {
        self.sites[self.sites.len() - 1]
    }

    /// `n_γ(u)` for every visited `u`.
    pub fn visits(&self) -> BTreeMap<Site, usize> {
        let mut m = BTreeMap::new();
        for &s in &self.sites {
            *m.entry(s).or_insert(0) += 1;
        }
        m
    }

    /// `#γ`, the number of distinct vertices.
    pub fn vertex_count(&self) -> usize {
        self.visits().len()
    }
}

/// An ordered N-tuple of walks with the displacements `u_i` that link the end
/// of walk `i` to the start of walk `i+1` (cyclically).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NPathFamily {
    walks: Vec<LatticeWalk>,
    offsets: Vec<Site>,
}

impl NPathFamily {
    /// Checks `start(γ_{i+1}) - end(γ_i) = u_i` for all `i` with `γ_{N+1} = γ_1`,
    /// and `start(γ_1) = 0`.
    pub fn new(walks: Vec<LatticeWalk>, offsets: Vec<Site>) -> Result<Self> {
        if walks.is_empty() || walks.len() != offsets.len() {
            return Err(Error::InvalidArgument("need one offset per walk".into()));
        }
        if !walks[0].start().is_origin() {
            return Err(Error::InvalidArgument("the first walk must start at the origin".into()));
        }
        let n = walks.len();
        for i in 0..n {
            let next = &walks[(i + 1) % n];
            if next.start() - walks[i].end() != offsets[i] {
                return Err(Error::InvalidArgument(format!("walk {} is not compatible with offset {}", i + 1, offsets[i])));
            }
        }
        Ok(NPathFamily { walks, offsets })
    }

    pub fn walks(&self) -> &[LatticeWalk] {
        &self.walks
    }

    pub fn offsets(&self) -> &[Site] {
        &self.offsets
    }

    pub fn n_walks(&self) -> usize {
        self.walks.len()
    }

    /// `|Γ| = Σ |γ_i|`.
    pub fn total_length(&self) -> usize {
        self.walks.iter().map(|w| w.len()).sum()
    }
}

/// `u ↦ (n_{γ_1}(u), …, n_{γ_N}(u))` over the vertices of the family.
pub fn visit_counts(family: &NPathFamily) -> BTreeMap<Site, MultiIndex> {
    let n = family.n_walks();
    let mut m: BTreeMap<Site, MultiIndex> = BTreeMap::new();
    for (i, w) in family.walks.iter().enumerate() {
        for &s in w.sites() {
            m.entry(s).or_insert_with(|| MultiIndex::zeros(n)).0[i] += 1;
        }
    }
    m
}

/// Depth-first stream of unit-step sequences of length `n` from the origin
/// to `target`.
#[derive(Debug, Clone)]
pub(crate) struct StepDfs {
    d: usize,
    n: usize,
    target: Site,
    pos: Site,
    dirs: Vec<u8>,
    started: bool,
    done: bool,
    nodes: u64,
    budget: u64,
}

impl StepDfs {
    pub(crate) fn new(d: usize, n: usize, target: Site, budget: u64) -> Self {
        StepDfs {
            d,
            n,
            target,
            pos: Site::origin(d),
            dirs: Vec::with_capacity(n),
            started: false,
            done: false,
            nodes: 0,
            budget,
        }
    }

    fn feasible(&self, at: Site, remaining: usize) -> bool {
        let dist = (self.target - at).l1() as usize;
        dist <= remaining && (remaining - dist).is_multiple_of(2)
    }

    // Pushes the first feasible direction `>= from` at the current depth.
    fn advance(&mut self, from: u8) -> Result<bool> {
        let remaining = self.n - self.dirs.len() - 1;
        for dir in from..(2 * self.d) as u8 {
            let next = self.pos.step(dir);
            self.nodes += 1;
            if self.nodes > self.budget {
                self.done = true;
                return Err(Error::ResourceLimit { budget: self.budget });
            }
            if self.feasible(next, remaining) {
                self.pos = next;
                self.dirs.push(dir);
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn undo(&mut self, dir: u8) {
        self.pos = self.pos.step(dir ^ 1);
    }

    pub(crate) fn next_steps(&mut self) -> Option<Result<&[u8]>> {
        if self.done {
            return None;
        }
        let mut descend = if !self.started {
            self.started = true;
            if !self.feasible(self.pos, self.n) {
                self.done = true;
                return None;
            }
            true
        } else {
            false
        };
        loop {
            if descend {
                while self.dirs.len() < self.n {
                    match self.advance(0) {
                        Ok(true) => {}
                        Ok(false) => break,
                        Err(e) => return Some(Err(e)),
                    }
                }
                if self.dirs.len() == self.n {
                    return Some(Ok(&self.dirs));
                }
            }
            loop {
                let Some(dir) = self.dirs.pop() else {
                    self.done = true;
                    return None;
                };
                self.undo(dir);
                match self.advance(dir + 1) {
                    Ok(true) => break,
                    Ok(false) => {}
                    Err(e) => return Some(Err(e)),
                }
            }
            descend = true;
        }
    }

    pub(crate) fn nodes(&self) -> u64 {
        self.nodes
    }
}

fn check_dim(d: usize) -> Result<()> {
    if !(1..=MAX_DIM).contains(&d) {
        return Err(Error::InvalidArgument(format!("dimension {d} must lie in 1..={MAX_DIM}")));
    }
    Ok(())
}

/// Stream of closed walks `0 → 0` of length exactly `n`.
pub struct ClosedWalks {
    dfs: StepDfs,
}

impl Iterator for ClosedWalks {
    type Item = Result<LatticeWalk>;

    fn next(&mut self) -> Option<Self::Item> {
        let d = self.dfs.d;
        match self.dfs.next_steps()? {
            Err(e) => Some(Err(e)),
            Ok(dirs) => {
                let mut sites = Vec::with_capacity(dirs.len() + 1);
                let mut at = Site::origin(d);
                sites.push(at);
                for &dir in dirs {
                    at = at.step(dir);
                    sites.push(at);
                }
                Some(Ok(LatticeWalk { sites }))
            }
        }
    }
}

pub fn enumerate_closed_walks(d: usize, n: usize) -> Result<ClosedWalks> {
    enumerate_closed_walks_with_budget(d, n, DEFAULT_BUDGET)
}

pub fn enumerate_closed_walks_with_budget(d: usize, n: usize, budget: u64) -> Result<ClosedWalks> {
    check_dim(d)?;
    Ok(ClosedWalks { dfs: StepDfs::new(d, n, Site::origin(d), budget) })
}

/// Stream of compatible N-path families of total length `n`. Walk lengths
/// run over compositions of `n` in lexicographic order; for each, the
/// concatenated steps are enumerated depth first.
pub struct NPaths {
    d: usize,
    n: usize,
    offsets: Vec<Site>,
    target: Site,
    budget: u64,
    used: u64,
    lengths: Compositions,
    current: Option<(MultiIndex, StepDfs)>,
}

impl NPaths {
    fn build(&self, lengths: &MultiIndex, dirs: &[u8]) -> NPathFamily {
        let mut walks = Vec::with_capacity(lengths.len());
        let mut at = Site::origin(self.d);
        let mut k = 0;
        for (i, &len) in lengths.iter().enumerate() {
            let mut sites = Vec::with_capacity(len + 1);
            sites.push(at);
            for &dir in &dirs[k..k + len] {
                at = at.step(dir);
                sites.push(at);
            }
            k += len;
            walks.push(LatticeWalk { sites });
            at = at + self.offsets[i];
        }
        NPathFamily { walks, offsets: self.offsets.clone() }
    }
}

impl Iterator for NPaths {
    type Item = Result<NPathFamily>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.current.is_none() {
                let lengths = self.lengths.next()?;
                let remaining = self.budget.saturating_sub(self.used);
                self.current = Some((lengths, StepDfs::new(self.d, self.n, self.target, remaining)));
            }
            let (lengths, dfs) = self.current.as_mut().expect("current composition");
            match dfs.next_steps() {
                Some(Ok(dirs)) => {
                    let dirs = dirs.to_vec();
                    let lengths = lengths.clone();
                    return Some(Ok(self.build(&lengths, &dirs)));
                }
                Some(Err(e)) => {
                    self.lengths = Compositions::new(0, 1);
                    self.current = None;
                    return Some(Err(e));
                }
                None => {
                    self.used += dfs.nodes();
                    self.current = None;
                }
            }
        }
    }
}

/// All families `Γ = (γ_1, …, γ_N)` with `|Γ| = n`, `start(γ_1) = 0` and
/// `start(γ_{i+1}) - end(γ_i) = u_i` cyclically.
pub fn enumerate_npaths(d: usize, offsets: &[Site], n: usize) -> Result<NPaths> {
    enumerate_npaths_with_budget(d, offsets, n, DEFAULT_BUDGET)
}

pub fn enumerate_npaths_with_budget(d: usize, offsets: &[Site], n: usize, budget: u64) -> Result<NPaths> {
    check_dim(d)?;
    if offsets.is_empty() {
        return Err(Error::InvalidArgument("at least one offset is required".into()));
    }
    if let Some(bad) = offsets.iter().find(|u| u.dim() != d) {
        return Err(Error::InvalidArgument(format!("offset {bad} is not in dimension {d}")));
    }
    // the concatenated steps must cancel the total displacement
    let total = offsets.iter().fold(Site::origin(d), |acc, &u| acc + u);
    Ok(NPaths {
        d,
        n,
        offsets: offsets.to_vec(),
        target: -total,
        budget,
        used: 0,
        lengths: Compositions::new(offsets.len(), n),
        current: None,
    })
}

fn central_binomial(n: usize) -> u128 {
    let k = n / 2;
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// Number of closed walks of length `n` on Z^d.
pub fn count_walks(d: usize, n: usize) -> Result<u128> {
    count_walks_with_budget(d, n, DEFAULT_BUDGET)
}

pub fn count_walks_with_budget(d: usize, n: usize, budget: u64) -> Result<u128> {
    check_dim(d)?;
    if n % 2 == 1 {
        return Ok(0);
    }
    if d == 1 {
        return Ok(central_binomial(n));
    }
    let mut dfs = StepDfs::new(d, n, Site::origin(d), budget);
    let mut count = 0u128;
    while let Some(r) = dfs.next_steps() {
        r?;
        count += 1;
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn s(c: &[i32]) -> Site {
        Site::new(c)
    }

    // closed-walk counts by dynamic programming over positions
    fn dp_count(d: usize, n: usize) -> u128 {
        let mut layer: HashMap<Site, u128> = HashMap::from([(Site::origin(d), 1)]);
        for _ in 0..n {
            let mut next = HashMap::new();
            for (p, c) in layer {
                for dir in 0..(2 * d) as u8 {
                    *next.entry(p.step(dir)).or_insert(0) += c;
                }
            }
            layer = next;
        }
        layer.get(&Site::origin(d)).copied().unwrap_or(0)
    }

    #[test]
    fn closed_walk_examples() {
        let w: Vec<_> = enumerate_closed_walks(1, 2).unwrap().map(|w| w.unwrap()).collect();
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].sites(), &[s(&[0]), s(&[1]), s(&[0])]);
        assert_eq!(w[1].sites(), &[s(&[0]), s(&[-1]), s(&[0])]);
        assert_eq!(enumerate_closed_walks(2, 2).unwrap().count(), 4);
        for d in 1..=3 {
            assert_eq!(enumerate_closed_walks(d, 1).unwrap().count(), 0);
            assert_eq!(enumerate_closed_walks(d, 0).unwrap().count(), 1);
        }
    }

    #[test]
    fn counts_match_dynamic_programming() {
        assert_eq!(count_walks(1, 4).unwrap(), 6);
        assert_eq!(count_walks(2, 4).unwrap(), 36);
        assert_eq!(count_walks(3, 2).unwrap(), 6);
        for n in 0..=12 {
            assert_eq!(count_walks(1, n).unwrap(), dp_count(1, n));
            assert_eq!(enumerate_closed_walks(1, n).unwrap().count() as u128, dp_count(1, n));
        }
        for d in 2..=3 {
            for n in 0..=8 {
                let c = count_walks(d, n).unwrap();
                assert_eq!(c, dp_count(d, n), "d={d} n={n}");
                assert!(c <= (2 * d as u128).pow(n as u32));
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        let err = count_walks_with_budget(2, 12, 1000);
        assert_eq!(err, Err(Error::ResourceLimit { budget: 1000 }));
        let mut it = enumerate_closed_walks_with_budget(3, 10, 50).unwrap();
        assert!(it.any(|r| r.is_err()));
    }

    #[test]
    fn single_walk_families_are_closed_walks() {
        let fam: Vec<_> = enumerate_npaths(2, &[Site::origin(2)], 4).unwrap().map(|f| f.unwrap()).collect();
        let walks: Vec<_> = enumerate_closed_walks(2, 4).unwrap().map(|w| w.unwrap()).collect();
        assert_eq!(fam.len(), walks.len());
        for (f, w) in fam.iter().zip(&walks) {
            assert_eq!(&f.walks()[0], w);
        }
    }

    #[test]
    fn two_walk_zero_length_family() {
        let offsets = [s(&[1]), s(&[-1])];
        let fam: Vec<_> = enumerate_npaths(1, &offsets, 0).unwrap().map(|f| f.unwrap()).collect();
        assert_eq!(fam.len(), 1);
        assert_eq!(fam[0].walks()[0].sites(), &[s(&[0])]);
        assert_eq!(fam[0].walks()[1].sites(), &[s(&[1])]);
        // brute force over all pairs of zero-length walks near the origin
        let mut brute = 0;
        for a in -2..=2 {
            for b in -2..=2 {
                let w = vec![LatticeWalk::trivial(s(&[a])), LatticeWalk::trivial(s(&[b]))];
                if NPathFamily::new(w, offsets.to_vec()).is_ok() {
                    brute += 1;
                }
            }
        }
        assert_eq!(brute, 1);
    }

    // brute force: all pairs of walks with the right lengths, filtered by compatibility
    fn brute_pairs(d: usize, offsets: &[Site], n: usize) -> usize {
        let mut total = 0;
        for l1 in 0..=n {
            let l2 = n - l1;
            for first in all_walks_from(Site::origin(d), l1) {
                let start2 = first.end() + offsets[0];
                for second in all_walks_from(start2, l2) {
                    if NPathFamily::new(vec![first.clone(), second], offsets.to_vec()).is_ok() {
                        total += 1;
                    }
                }
            }
        }
        total
    }

    fn all_walks_from(start: Site, len: usize) -> Vec<LatticeWalk> {
        let mut out = vec![vec![start]];
        for _ in 0..len {
            let mut next = Vec::new();
            for w in out {
                for dir in 0..(2 * start.dim()) as u8 {
                    let mut v = w.clone();
                    v.push(w[w.len() - 1].step(dir));
                    next.push(v);
                }
            }
            out = next;
        }
        out.into_iter().map(|v| LatticeWalk::new(v).unwrap()).collect()
    }

    #[test]
    fn npath_counts_match_brute_force() {
        for (d, offsets) in [
            (1, vec![s(&[1]), s(&[-1])]),
            (1, vec![s(&[0]), s(&[0])]),
            (2, vec![s(&[1, 0]), s(&[0, -1])]),
            (2, vec![s(&[0, 1]), s(&[0, -1])]),
        ] {
            for n in 0..=4 {
                let fam: Vec<_> = enumerate_npaths(d, &offsets, n).unwrap().map(|f| f.unwrap()).collect();
                assert_eq!(fam.len(), brute_pairs(d, &offsets, n), "d={d} offsets={offsets:?} n={n}");
                for f in &fam {
                    assert_eq!(f.total_length(), n);
                    assert!(NPathFamily::new(f.walks().to_vec(), f.offsets().to_vec()).is_ok());
                }
            }
        }
    }

    #[test]
    fn npath_count_bound_per_length_split() {
        let offsets = [s(&[0, 0]), s(&[0, 0])];
        for n in 0..=6 {
            let fam: Vec<_> = enumerate_npaths(2, &offsets, n).unwrap().map(|f| f.unwrap()).collect();
            let mut per_split: BTreeMap<Vec<usize>, u128> = BTreeMap::new();
            for f in &fam {
                *per_split.entry(f.walks().iter().map(|w| w.len()).collect()).or_default() += 1;
            }
            for &c in per_split.values() {
                assert!(c <= 4u128.pow(n as u32));
            }
        }
        // summed over splits the count can exceed (2d)^n once N ≥ 2
        let two = enumerate_npaths(1, &[s(&[0]), s(&[0])], 2).unwrap().count();
        assert_eq!(two, 6);
    }

    #[test]
    fn odd_parity_families_are_empty() {
        assert_eq!(enumerate_npaths(2, &[s(&[1, 0]), s(&[0, 0])], 2).unwrap().count(), 0);
        assert_eq!(enumerate_npaths(1, &[s(&[1]), s(&[0])], 1).unwrap().count(), 2);
    }

    #[test]
    fn visit_count_examples() {
        let w = LatticeWalk::new(vec![s(&[0]), s(&[1]), s(&[0])]).unwrap();
        let f = NPathFamily::new(vec![w], vec![s(&[0])]).unwrap();
        let v = visit_counts(&f);
        assert_eq!(v[&s(&[0])], MultiIndex(vec![2]));
        assert_eq!(v[&s(&[1])], MultiIndex(vec![1]));
        let z = NPathFamily::new(vec![LatticeWalk::trivial(s(&[0]))], vec![s(&[0])]).unwrap();
        assert_eq!(visit_counts(&z)[&s(&[0])], MultiIndex(vec![1]));
    }

    #[test]
    fn enumeration_is_deterministic() {
        use std::hash::{DefaultHasher, Hash, Hasher};
        let run = || {
            let mut h = DefaultHasher::new();
            for f in enumerate_npaths(2, &[s(&[1, 0]), s(&[-1, 0])], 4).unwrap() {
                for w in f.unwrap().walks() {
                    w.sites().hash(&mut h);
                }
            }
            h.finish()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn invalid_walks_are_rejected() {
        assert!(LatticeWalk::new(vec![s(&[0]), s(&[2])]).is_err());
        assert!(NPathFamily::new(vec![LatticeWalk::trivial(s(&[1]))], vec![s(&[-1])]).is_err());
        assert!(enumerate_npaths(1, &[s(&[0, 1])], 2).is_err());
        assert_eq!("(1,-2)".parse::<Site>().unwrap(), s(&[1, -2]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn visit_counts_are_conserved(seed in 0usize..10_000, n in 0usize..7, ux in -1i32..=1, uy in -1i32..=1) {
            let offsets = [s(&[ux, uy]), s(&[0, 0]), s(&[-ux, -uy])];
            let fams: Vec<_> = enumerate_npaths(2, &offsets, n).unwrap().map(|f| f.unwrap()).collect();
            if !fams.is_empty() {
                let f = &fams[seed % fams.len()];
                let total: usize = visit_counts(f).values().map(|m| m.abs()).sum();
                prop_assert_eq!(total, f.total_length() + f.n_walks());
            }
        }
    }
}
