//! Monotone grid paths on the `m x n` grid.
//!
//! A grid path is a step function `[0,1] -> [0,1]` that is constant on the
//! `m` stage cells and takes values in `{0, 1/n, ..., 1}`. It is stored as
//! the integer vector `b` of length `m + 1` with `b[i] = n * theta(i/m)`,
//! which is non-decreasing and ends at `b[m] = n`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error("grid dimensions must be positive, got {m}x{n}")]
    EmptyDims { m: usize, n: usize },
    #[error("vector {0:?} is not a monotone path on the {1} grid")]
    NotMonotone(Vec<usize>, GridDims),
    #[error("dimension mismatch: {0} vs {1}")]
    DimsMismatch(GridDims, GridDims),
    #[error("pair violates dominance at stage {stage}: a={a} < b={b}")]
    Dominance { stage: usize, a: usize, b: usize },
    #[error("cannot parse {0:?} as a grid path")]
    Parse(String),
    #[error("path index {index} out of range for {dims} ({count} paths)")]
    IndexOutOfRange {
        dims: GridDims,
        index: u128,
        count: u128,
    },
}

/// Stage count `m` and rank count `n` of the discretization grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridDims {
    m: usize,
    n: usize,
}

impl GridDims {
    pub fn new(m: usize, n: usize) -> Result<Self, GridError> {
        if m == 0 || n == 0 {
            return Err(GridError::EmptyDims { m, n });
        }
        Ok(GridDims { m, n })
    }

    pub fn square(n: usize) -> Result<Self, GridError> {
        Self::new(n, n)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of monotone grid paths, `C(m + n, m)`.
    pub fn path_count(&self) -> u128 {
        binomial((self.m + self.n) as u64, self.m as u64)
    }

    /// Number of dominant path pairs `(a, b)` with `a_i >= b_i` everywhere.
    ///
    /// Pairs of non-crossing monotone paths are counted by the 2x2
    /// Lindstrom-Gessel-Viennot determinant.
    pub fn dominant_pair_count(&self) -> u128 {
        let s = (self.m + self.n) as u64;
        let c0 = binomial(s, self.m as u64);
        let c_up = binomial(s, (self.m + 1) as u64);
        let c_dn = binomial(s, (self.m - 1) as u64);
        c0 * c0 - c_up * c_dn
    }

    pub fn doubled(&self) -> GridDims {
        GridDims {
            m: 2 * self.m,
            n: 2 * self.n,
        }
    }
}

impl fmt::Display for GridDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.m, self.n)
    }
}

/// Exact binomial coefficient in u128; panics on overflow (never reached for
/// the grid sizes this crate accepts).
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// A monotone grid path, stored as its non-decreasing vector with `b[m] = n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MonotonePath {
    b: Vec<usize>,
    dims: GridDims,
}

impl MonotonePath {
    pub fn new(dims: GridDims, b: Vec<usize>) -> Result<Self, GridError> {
        let ok = b.len() == dims.m + 1
            && b.windows(2).all(|w| w[0] <= w[1])
            && *b.last().unwrap() == dims.n;
        if !ok {
            return Err(GridError::NotMonotone(b, dims));
        }
        Ok(MonotonePath { b, dims })
    }

    /// The constant path at height `n`: `(n, ..., n)`.
    pub fn maximal(dims: GridDims) -> Self {
        MonotonePath {
            b: vec![dims.n; dims.m + 1],
            dims,
        }
    }

    /// The path `(0, ..., 0, n)` hugging the bottom of the grid.
    pub fn minimal(dims: GridDims) -> Self {
        let mut b = vec![0; dims.m + 1];
        b[dims.m] = dims.n;
        MonotonePath { b, dims }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn values(&self) -> &[usize] {
        &self.b
    }

    pub fn value(&self, i: usize) -> usize {
        self.b[i]
    }

    /// Inverse vector `jb[j] = min{i : b[i] > j}` for `j = 0..n-1`.
    pub fn inverse(&self) -> InversePath {
        let n = self.dims.n;
        let mut jb = vec![0usize; n];
        let mut i = 0;
        for (j, slot) in jb.iter_mut().enumerate() {
            while self.b[i] <= j {
                i += 1;
            }
            *slot = i;
        }
        InversePath { jb, dims: self.dims }
    }

    /// All valid paths differing from `self` in exactly one coordinate by +-1.
    ///
    /// Changing a single `b[i]` (i < m) by one unit moves the step path by
    /// exactly one grid cell of area, so this realizes the single-unit-square
    /// neighborhood. At most `2m` results.
    pub fn neighbors(&self) -> Vec<MonotonePath> {
        let m = self.dims.m;
        let mut out = Vec::with_capacity(2 * m);
        for i in 0..m {
            if self.b[i] + 1 <= self.b[i + 1] {
                let mut b = self.b.clone();
                b[i] += 1;
                out.push(MonotonePath { b, dims: self.dims });
            }
            if self.b[i] > 0 && (i == 0 || self.b[i] - 1 >= self.b[i - 1]) {
                let mut b = self.b.clone();
                b[i] -= 1;
                out.push(MonotonePath { b, dims: self.dims });
            }
        }
        out.sort_unstable();
        out
    }

    /// The same step function expressed on the doubled `2m x 2n` grid.
    pub fn upscale(&self) -> MonotonePath {
        let dims = self.dims.doubled();
        let mut b = Vec::with_capacity(dims.m + 1);
        for i in 0..dims.m {
            b.push(2 * self.b[i / 2]);
        }
        b.push(dims.n);
        MonotonePath { b, dims }
    }

    /// Nearest-path embedding into an arbitrary target grid.
    ///
    /// Coincides with `upscale` when the target is the doubled grid. Rounding
    /// is monotone, so the result is always a valid path, and dominance of a
    /// pair is preserved when both sides are rescaled.
    pub fn rescale(&self, target: GridDims) -> MonotonePath {
        let (m, n) = (self.dims.m, self.dims.n);
        let mut b = Vec::with_capacity(target.m + 1);
        for i in 0..target.m {
            let src = self.b[i * m / target.m];
            // round(src * n' / n), half away from zero
            b.push((2 * src * target.n + n) / (2 * n));
        }
        b.push(target.n);
        MonotonePath { b, dims: target }
    }

    /// Lexicographic rank of this path among all paths on its grid.
    pub fn index(&self) -> u128 {
        let (m, n) = (self.dims.m, self.dims.n);
        let mut idx: u128 = 0;
        let mut lo = 0usize;
        for i in 0..m {
            for c in lo..self.b[i] {
                idx += suffix_count(m - 1 - i, n - c);
            }
            lo = self.b[i];
        }
        idx
    }
}

/// Number of non-decreasing vectors of length `len` with values in a span of
/// `span + 1` integers.
fn suffix_count(len: usize, span: usize) -> u128 {
    binomial((len + span) as u64, len as u64)
}

impl fmt::Display for MonotonePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.b.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl FromStr for MonotonePath {
    type Err = GridError;

    /// Parses the `"b0,b1,...,bm"` form; dims are implied by the length and
    /// the terminal entry.
    fn from_str(s: &str) -> Result<Self, GridError> {
        let b: Vec<usize> = s
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| GridError::Parse(s.to_string()))?;
        if b.len() < 2 {
            return Err(GridError::Parse(s.to_string()));
        }
        let dims = GridDims::new(b.len() - 1, *b.last().unwrap())
            .map_err(|_| GridError::Parse(s.to_string()))?;
        MonotonePath::new(dims, b)
    }
}

/// Inverse vector of a monotone path; entry `j` is the first stage whose
/// path value exceeds rank `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InversePath {
    jb: Vec<usize>,
    dims: GridDims,
}

impl InversePath {
    pub fn values(&self) -> &[usize] {
        &self.jb
    }

    pub fn value(&self, j: usize) -> usize {
        self.jb[j]
    }

    /// Reconstructs the source path: `b[i] = min{j : jb[j] > i}`, or `n`.
    pub fn to_path(&self) -> MonotonePath {
        let (m, n) = (self.dims.m, self.dims.n);
        let mut b = vec![n; m + 1];
        for i in 0..m {
            b[i] = self.jb.iter().position(|&x| x > i).unwrap_or(n);
        }
        MonotonePath { b, dims: self.dims }
    }
}

/// A dominant pair of monotone paths: `a` lies weakly above `b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathPair {
    a: MonotonePath,
    b: MonotonePath,
}

impl PathPair {
    pub fn new(a: MonotonePath, b: MonotonePath) -> Result<Self, GridError> {
        if a.dims != b.dims {
            return Err(GridError::DimsMismatch(a.dims, b.dims));
        }
        for i in 0..=a.dims.m {
            if a.b[i] < b.b[i] {
                return Err(GridError::Dominance {
                    stage: i,
                    a: a.b[i],
                    b: b.b[i],
                });
            }
        }
        Ok(PathPair { a, b })
    }

    pub fn dims(&self) -> GridDims {
        self.a.dims
    }

    pub fn alpha(&self) -> &MonotonePath {
        &self.a
    }

    pub fn beta(&self) -> &MonotonePath {
        &self.b
    }

    /// The local perturbation set `T(a, b)`: one side moved to a neighboring
    /// path, filtered to pairs that keep dominance. Size `O(m)`.
    pub fn perturbations(&self) -> Vec<PathPair> {
        let mut out = Vec::new();
        for a2 in self.a.neighbors() {
            if let Ok(p) = PathPair::new(a2, self.b.clone()) {
                out.push(p);
            }
        }
        for b2 in self.b.neighbors() {
            if let Ok(p) = PathPair::new(self.a.clone(), b2) {
                out.push(p);
            }
        }
        out.sort_unstable();
        out
    }

    pub fn upscale(&self) -> PathPair {
        PathPair {
            a: self.a.upscale(),
            b: self.b.upscale(),
        }
    }

    pub fn rescale(&self, target: GridDims) -> PathPair {
        PathPair {
            a: self.a.rescale(target),
            b: self.b.rescale(target),
        }
    }
}

impl fmt::Display for PathPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}", self.a, self.b)
    }
}

impl FromStr for PathPair {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, GridError> {
        let (a, b) = s.split_once('|').ok_or_else(|| GridError::Parse(s.to_string()))?;
        PathPair::new(a.parse()?, b.parse()?)
    }
}

/// Streams every monotone path on the grid exactly once, in lexicographic
/// order of the vector `b`. Restartable from any rank via [`path_at_index`].
pub struct PathIter {
    dims: GridDims,
    next: Option<Vec<usize>>,
}

impl Iterator for PathIter {
    type Item = MonotonePath;

    fn next(&mut self) -> Option<MonotonePath> {
        let cur = self.next.take()?;
        let out = MonotonePath {
            b: cur.clone(),
            dims: self.dims,
        };
        let (m, n) = (self.dims.m, self.dims.n);
        let mut b = cur;
        // lexicographic successor: bump the rightmost entry below n and
        // level the suffix
        if let Some(i) = (0..m).rev().find(|&i| b[i] < n) {
            let v = b[i] + 1;
            for slot in b.iter_mut().take(m).skip(i) {
                *slot = v;
            }
            self.next = Some(b);
        }
        Some(out)
    }
}

pub fn enumerate_paths(dims: GridDims) -> PathIter {
    let mut first = vec![0usize; dims.m + 1];
    first[dims.m] = dims.n;
    PathIter {
        dims,
        next: Some(first),
    }
}

/// Starts the lexicographic stream at an arbitrary rank (combinatorial
/// unranking), so enumeration can be sharded across threads.
pub fn paths_from_index(dims: GridDims, index: u128) -> Result<PathIter, GridError> {
    Ok(PathIter {
        dims,
        next: Some(path_at_index(dims, index)?.b),
    })
}

/// The path of lexicographic rank `index`.
pub fn path_at_index(dims: GridDims, index: u128) -> Result<MonotonePath, GridError> {
    let count = dims.path_count();
    if index >= count {
        return Err(GridError::IndexOutOfRange { dims, index, count });
    }
    let (m, n) = (dims.m, dims.n);
    let mut rem = index;
    let mut b = Vec::with_capacity(m + 1);
    let mut lo = 0usize;
    for i in 0..m {
        let mut c = lo;
        loop {
            let block = suffix_count(m - 1 - i, n - c);
            if rem < block {
                break;
            }
            rem -= block;
            c += 1;
        }
        b.push(c);
        lo = c;
    }
    b.push(n);
    Ok(MonotonePath { b, dims })
}

/// Streams all dominant pairs `(a, b)` in lexicographic order of `(a, b)`.
pub fn enumerate_dominant_pairs(dims: GridDims) -> impl Iterator<Item = PathPair> {
    enumerate_paths(dims).flat_map(move |a| {
        let a2 = a.clone();
        enumerate_paths(dims)
            .filter(move |b| b.values().iter().zip(a2.values()).all(|(bi, ai)| bi <= ai))
            .map(move |b| PathPair { a: a.clone(), b })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(dims: GridDims, b: &[usize]) -> MonotonePath {
        MonotonePath::new(dims, b.to_vec()).unwrap()
    }

    #[test]
    fn enumeration_counts_match_binomial() {
        for m in 1..=8 {
            for n in 1..=8 {
                let dims = GridDims::new(m, n).unwrap();
                let count = enumerate_paths(dims).count() as u128;
                assert_eq!(count, dims.path_count(), "dims {dims}");
            }
        }
    }

    #[test]
    fn paper_scale_count() {
        let dims = GridDims::new(11, 12).unwrap();
        assert_eq!(dims.path_count(), 1_352_078);
    }

    #[test]
    fn tiny_grid_paths() {
        let dims = GridDims::new(1, 1).unwrap();
        let all: Vec<_> = enumerate_paths(dims).collect();
        assert_eq!(all, vec![path(dims, &[0, 1]), path(dims, &[1, 1])]);
    }

    #[test]
    fn enumeration_is_lexicographic_and_duplicate_free() {
        let dims = GridDims::new(3, 4).unwrap();
        let all: Vec<_> = enumerate_paths(dims).collect();
        assert_eq!(all.len() as u128, dims.path_count());
        for w in all.windows(2) {
            assert!(w[0].values() < w[1].values());
        }
    }

    #[test]
    fn inverse_examples() {
        let dims = GridDims::new(3, 4).unwrap();
        assert_eq!(path(dims, &[0, 2, 3, 4]).inverse().values(), &[1, 1, 2, 3]);
        assert_eq!(
            MonotonePath::maximal(dims).inverse().values(),
            &[0, 0, 0, 0]
        );
        assert_eq!(
            MonotonePath::minimal(dims).inverse().values(),
            &[3, 3, 3, 3]
        );
    }

    #[test]
    fn inverse_definition_and_roundtrip_exhaustive() {
        for m in 1..=6 {
            for n in 1..=6 {
                let dims = GridDims::new(m, n).unwrap();
                for p in enumerate_paths(dims) {
                    let inv = p.inverse();
                    let jb = inv.values();
                    for j in 0..n {
                        assert!(p.value(jb[j]) > j);
                        assert!(jb[j] == 0 || p.value(jb[j] - 1) <= j);
                    }
                    assert!(jb.windows(2).all(|w| w[0] <= w[1]));
                    assert_eq!(inv.to_path(), p);
                }
            }
        }
    }

    #[test]
    fn neighbor_examples() {
        let dims = GridDims::new(3, 4).unwrap();
        let got = path(dims, &[0, 2, 3, 4]).neighbors();
        let want: Vec<_> = [
            [0, 1, 3, 4],
            [0, 2, 2, 4],
            [0, 2, 4, 4],
            [0, 3, 3, 4],
            [1, 2, 3, 4],
        ]
        .iter()
        .map(|b| path(dims, b))
        .collect();
        assert_eq!(got, want);

        let d22 = GridDims::new(2, 2).unwrap();
        assert_eq!(path(d22, &[0, 0, 2]).neighbors(), vec![path(d22, &[0, 1, 2])]);

        let d11 = GridDims::new(1, 1).unwrap();
        assert_eq!(path(d11, &[1, 1]).neighbors(), vec![path(d11, &[0, 1])]);
    }

    #[test]
    fn neighbors_are_symmetric() {
        let dims = GridDims::new(4, 3).unwrap();
        for p in enumerate_paths(dims) {
            for q in p.neighbors() {
                assert!(q.neighbors().contains(&p), "{p} vs {q}");
            }
        }
    }

    #[test]
    fn perturbation_examples() {
        let d = GridDims::new(1, 1).unwrap();
        let pair = PathPair::new(path(d, &[1, 1]), path(d, &[0, 1])).unwrap();
        let got = pair.perturbations();
        let want = vec![
            PathPair::new(path(d, &[0, 1]), path(d, &[0, 1])).unwrap(),
            PathPair::new(path(d, &[1, 1]), path(d, &[1, 1])).unwrap(),
        ];
        assert_eq!(got, want);
    }

    #[test]
    fn perturbations_differ_in_one_coordinate() {
        let dims = GridDims::new(3, 3).unwrap();
        for pair in enumerate_dominant_pairs(dims) {
            for p in pair.perturbations() {
                let diff: usize = p
                    .alpha()
                    .values()
                    .iter()
                    .zip(pair.alpha().values())
                    .chain(p.beta().values().iter().zip(pair.beta().values()))
                    .map(|(x, y)| if x == y { 0 } else { 1 })
                    .sum();
                assert_eq!(diff, 1);
            }
            assert!(pair.perturbations().len() <= 4 * dims.m());
        }
    }

    #[test]
    fn maximal_pair_perturbs_only_beta_side() {
        let dims = GridDims::new(2, 2).unwrap();
        let a = MonotonePath::maximal(dims);
        let pair = PathPair::new(a.clone(), a.clone()).unwrap();
        let want: Vec<_> = a
            .neighbors()
            .into_iter()
            .map(|b| PathPair::new(a.clone(), b).unwrap())
            .collect();
        assert_eq!(pair.perturbations(), want);
    }

    #[test]
    fn upscale_examples() {
        let dims = GridDims::new(3, 4).unwrap();
        let up = path(dims, &[0, 2, 3, 4]).upscale();
        assert_eq!(up.dims(), GridDims::new(6, 8).unwrap());
        assert_eq!(up.values(), &[0, 0, 4, 4, 6, 6, 8]);
        assert_eq!(
            MonotonePath::maximal(dims).upscale(),
            MonotonePath::maximal(dims.doubled())
        );
    }

    #[test]
    fn upscale_preserves_step_function() {
        let dims = GridDims::new(3, 4).unwrap();
        for p in enumerate_paths(dims) {
            let up = p.upscale();
            // evaluate theta on a mesh finer than both grids
            let mesh = 4 * dims.m() * dims.n();
            for k in 0..mesh {
                let x = k as f64 / mesh as f64;
                let orig = p.value(((dims.m() as f64 * x).floor() as usize).min(dims.m())) as f64
                    / dims.n() as f64;
                let fine = up.value(((2.0 * dims.m() as f64 * x).floor() as usize)
                    .min(2 * dims.m())) as f64
                    / (2 * dims.n()) as f64;
                assert_eq!(orig, fine);
            }
        }
    }

    #[test]
    fn upscale_is_injective() {
        let dims = GridDims::new(2, 3).unwrap();
        let mut seen = std::collections::HashSet::new();
        for p in enumerate_paths(dims) {
            assert!(seen.insert(p.upscale()));
        }
    }

    #[test]
    fn rescale_matches_upscale_on_doubled_target() {
        let dims = GridDims::new(3, 4).unwrap();
        for p in enumerate_paths(dims) {
            assert_eq!(p.rescale(dims.doubled()), p.upscale());
        }
    }

    #[test]
    fn rescale_preserves_dominance() {
        let dims = GridDims::new(2, 2).unwrap();
        let target = GridDims::new(3, 3).unwrap();
        for pair in enumerate_dominant_pairs(dims) {
            let r = pair.rescale(target);
            assert_eq!(r.dims(), target);
        }
    }

    #[test]
    fn unranking_agrees_with_enumeration() {
        let dims = GridDims::new(4, 5).unwrap();
        for (k, p) in enumerate_paths(dims).enumerate() {
            assert_eq!(path_at_index(dims, k as u128).unwrap(), p);
            assert_eq!(p.index(), k as u128);
        }
        assert!(path_at_index(dims, dims.path_count()).is_err());
    }

    #[test]
    fn dominant_pair_count_matches_enumeration() {
        for (m, n) in [(1, 1), (2, 2), (3, 3), (2, 4), (4, 2)] {
            let dims = GridDims::new(m, n).unwrap();
            assert_eq!(
                enumerate_dominant_pairs(dims).count() as u128,
                dims.dominant_pair_count()
            );
        }
    }

    #[test]
    fn serialization_roundtrip() {
        let dims = GridDims::new(3, 4).unwrap();
        let p = path(dims, &[0, 2, 3, 4]);
        assert_eq!(p.to_string(), "0,2,3,4");
        assert_eq!("0,2,3,4".parse::<MonotonePath>().unwrap(), p);

        let pair = PathPair::new(path(dims, &[1, 2, 4, 4]), p.clone()).unwrap();
        assert_eq!(pair.to_string(), "1,2,4,4|0,2,3,4");
        assert_eq!(pair.to_string().parse::<PathPair>().unwrap(), pair);

        assert!("2,1,3".parse::<MonotonePath>().is_err());
        assert!("0,2|0,3".parse::<PathPair>().is_err());
    }

    #[test]
    fn invalid_paths_rejected() {
        let dims = GridDims::new(2, 3).unwrap();
        assert!(MonotonePath::new(dims, vec![0, 2, 1]).is_err()); // not monotone + wrong tail
        assert!(MonotonePath::new(dims, vec![0, 1, 2]).is_err()); // tail != n
        assert!(MonotonePath::new(dims, vec![0, 3]).is_err()); // wrong length
        assert!(GridDims::new(0, 3).is_err());
    }
}
