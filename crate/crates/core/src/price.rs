//! Discretized price functions `g(i, j)` on the `(m+1) x (n+1)` grid.

use rand::Rng;
use thiserror::Error;

use crate::grid::GridDims;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PriceError {
    #[error("expected {expected} interior values for {dims}, got {got}")]
    WrongSize {
        dims: GridDims,
        expected: usize,
        got: usize,
    },
    #[error("grid infeasible at ({i},{j}): {detail} (violation {violation:.3e} > tol {tol:.1e})")]
    Infeasible {
        i: usize,
        j: usize,
        detail: &'static str,
        violation: f64,
        tol: f64,
    },
    #[error("boundary row/column of the supplied matrix is not 0/1-valued at ({i},{j})")]
    BadBoundary { i: usize, j: usize },
}

/// Price values `g(i, j)` for `0 <= i <= m`, `0 <= j <= n`.
///
/// Feasible grids are non-increasing in the stage index, non-decreasing in
/// the rank index, with `g(i, n) = 1` and `g(m, j) = 0` for `j < n`. The
/// corner `g(m, n)` is pinned to 1, consistent with the rank boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceGrid {
    dims: GridDims,
    values: Vec<f64>, // row-major, (m+1) * (n+1)
}

impl PriceGrid {
    /// Builds a grid from the `m * n` interior values (row-major over
    /// `i < m`, `j < n`), filling boundaries, and validates feasibility
    /// exactly (no tolerance).
    pub fn from_interior(dims: GridDims, interior: &[f64]) -> Result<Self, PriceError> {
        let (m, n) = (dims.m(), dims.n());
        if interior.len() != m * n {
            return Err(PriceError::WrongSize {
                dims,
                expected: m * n,
                got: interior.len(),
            });
        }
        let mut g = PriceGrid::boundary_only(dims);
        for i in 0..m {
            for j in 0..n {
                g.values[i * (n + 1) + j] = interior[i * n + j];
            }
        }
        g.check_feasible(0.0)?;
        Ok(g)
    }

    /// Builds a grid from a full `(m+1) x (n+1)` matrix; boundary entries
    /// must already hold their fixed values.
    pub fn from_rows(dims: GridDims, rows: &[Vec<f64>]) -> Result<Self, PriceError> {
        let (m, n) = (dims.m(), dims.n());
        if rows.len() != m + 1 || rows.iter().any(|r| r.len() != n + 1) {
            return Err(PriceError::WrongSize {
                dims,
                expected: (m + 1) * (n + 1),
                got: rows.iter().map(|r| r.len()).sum(),
            });
        }
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let boundary = Self::boundary_value(dims, i, j);
                if let Some(want) = boundary {
                    if v != want {
                        return Err(PriceError::BadBoundary { i, j });
                    }
                }
            }
        }
        let interior: Vec<f64> = (0..m)
            .flat_map(|i| (0..n).map(move |j| rows[i][j]))
            .collect();
        Self::from_interior(dims, &interior)
    }

    /// Repairs raw interior values (typically solver output) by clamping to
    /// `[0, 1]` and projecting onto the monotone cone, provided no violation
    /// exceeds `tol`. Each entry moves by at most the largest violation.
    pub fn repair(dims: GridDims, interior: &[f64], tol: f64) -> Result<Self, PriceError> {
        let (m, n) = (dims.m(), dims.n());
        if interior.len() != m * n {
            return Err(PriceError::WrongSize {
                dims,
                expected: m * n,
                got: interior.len(),
            });
        }
        let at = |i: usize, j: usize| interior[i * n + j];
        for i in 0..m {
            for j in 0..n {
                let v = at(i, j);
                if v < -tol || v > 1.0 + tol {
                    return Err(PriceError::Infeasible {
                        i,
                        j,
                        detail: "value outside [0,1]",
                        violation: (-v).max(v - 1.0),
                        tol,
                    });
                }
                if j + 1 < n && v > at(i, j + 1) + tol {
                    return Err(PriceError::Infeasible {
                        i,
                        j,
                        detail: "decreasing in rank",
                        violation: v - at(i, j + 1),
                        tol,
                    });
                }
                if i + 1 < m && at(i + 1, j) > v + tol {
                    return Err(PriceError::Infeasible {
                        i,
                        j,
                        detail: "increasing in stage",
                        violation: at(i + 1, j) - v,
                        tol,
                    });
                }
            }
        }
        // Monotone envelope: sweep stages bottom-up and ranks left to right,
        // lifting each entry to the max of its already-final neighbors. For
        // inputs within tol of a feasible grid this moves no entry by more
        // than 2 * tol.
        let mut fixed = vec![0.0f64; m * n];
        for i in (0..m).rev() {
            for j in 0..n {
                let mut v = at(i, j).clamp(0.0, 1.0);
                if i + 1 < m {
                    v = v.max(fixed[(i + 1) * n + j]);
                }
                if j > 0 {
                    v = v.max(fixed[i * n + j - 1]);
                }
                fixed[i * n + j] = v;
            }
        }
        Self::from_interior(dims, &fixed)
    }

    fn boundary_only(dims: GridDims) -> Self {
        let (m, n) = (dims.m(), dims.n());
        let mut values = vec![0.0; (m + 1) * (n + 1)];
        for i in 0..=m {
            values[i * (n + 1) + n] = 1.0;
        }
        PriceGrid { dims, values }
    }

    fn boundary_value(dims: GridDims, i: usize, j: usize) -> Option<f64> {
        if j == dims.n() {
            Some(1.0)
        } else if i == dims.m() {
            Some(0.0)
        } else {
            None
        }
    }

    fn check_feasible(&self, tol: f64) -> Result<(), PriceError> {
        let (m, n) = (self.dims.m(), self.dims.n());
        for i in 0..m {
            for j in 0..n {
                let v = self.get(i, j);
                if v < -tol || v > 1.0 + tol {
                    return Err(PriceError::Infeasible {
                        i,
                        j,
                        detail: "value outside [0,1]",
                        violation: (-v).max(v - 1.0),
                        tol,
                    });
                }
                if v > self.get(i, j + 1) + tol {
                    return Err(PriceError::Infeasible {
                        i,
                        j,
                        detail: "decreasing in rank",
                        violation: v - self.get(i, j + 1),
                        tol,
                    });
                }
                if self.get(i + 1, j) > v + tol {
                    return Err(PriceError::Infeasible {
                        i,
                        j,
                        detail: "increasing in stage",
                        violation: self.get(i + 1, j) - v,
                        tol,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * (self.dims.n() + 1) + j]
    }

    /// Full matrix as rows, for serialization.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        let n = self.dims.n();
        self.values.chunks(n + 1).map(|r| r.to_vec()).collect()
    }

    /// Interior values row-major, the layout the LP builders use.
    pub fn interior(&self) -> Vec<f64> {
        let (m, n) = (self.dims.m(), self.dims.n());
        (0..m)
            .flat_map(|i| (0..n).map(move |j| self.get(i, j)))
            .collect()
    }

    /// A random feasible grid (monotone envelope of i.i.d. uniforms).
    pub fn random_feasible<R: Rng>(dims: GridDims, rng: &mut R) -> Self {
        let (m, n) = (dims.m(), dims.n());
        let mut interior = vec![0.0f64; m * n];
        for i in (0..m).rev() {
            for j in 0..n {
                let mut v: f64 = rng.gen();
                if i + 1 < m {
                    v = v.max(interior[(i + 1) * n + j]);
                }
                if j > 0 {
                    v = v.max(interior[i * n + j - 1]);
                }
                interior[i * n + j] = v;
            }
        }
        Self::from_interior(dims, &interior).expect("envelope is feasible")
    }

    /// A canonical feasible grid that is strictly increasing in rank on every
    /// stage row `i < m`; used where threshold semantics must be tie-free.
    pub fn strictly_rank_monotone(dims: GridDims) -> Self {
        let (m, n) = (dims.m(), dims.n());
        let mut interior = vec![0.0f64; m * n];
        for i in 0..m {
            for j in 0..n {
                interior[i * n + j] =
                    (j + 1) as f64 / (n + 2) as f64 * (1.0 - i as f64 / (2 * m) as f64);
            }
        }
        Self::from_interior(dims, &interior).expect("canonical grid is feasible")
    }

    /// A random feasible grid that is strictly increasing in rank on every
    /// stage row, so no two ranks ever tie in utility.
    pub fn random_strict<R: Rng>(dims: GridDims, rng: &mut R) -> Self {
        let base = Self::random_feasible(dims, rng);
        let tilt = Self::strictly_rank_monotone(dims);
        let interior: Vec<f64> = base
            .interior()
            .iter()
            .zip(tilt.interior())
            .map(|(a, b)| 0.875 * a + 0.125 * b)
            .collect();
        Self::from_interior(dims, &interior).expect("convex combination is feasible")
    }

    /// Rank indices `j` with `g(i, j) == g(i, j')` for some `j' != j` on a
    /// stage row `i < m`; empty iff the grid is strictly rank-monotone.
    pub fn rank_plateaus(&self) -> Vec<(usize, usize)> {
        let (m, n) = (self.dims.m(), self.dims.n());
        let mut out = Vec::new();
        for i in 0..m {
            for j in 0..n.saturating_sub(1) {
                if self.get(i, j) == self.get(i, j + 1) {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn boundary_values() {
        let dims = GridDims::new(2, 3).unwrap();
        let g = PriceGrid::from_interior(dims, &[0.1, 0.2, 0.3, 0.0, 0.1, 0.2]).unwrap();
        for i in 0..=2 {
            assert_eq!(g.get(i, 3), 1.0);
        }
        for j in 0..3 {
            assert_eq!(g.get(2, j), 0.0);
        }
        assert_eq!(g.get(2, 3), 1.0);
        assert_eq!(g.get(0, 1), 0.2);
    }

    #[test]
    fn infeasible_rejected() {
        let dims = GridDims::new(2, 2).unwrap();
        // increasing in stage
        assert!(PriceGrid::from_interior(dims, &[0.1, 0.2, 0.3, 0.4]).is_err());
        // decreasing in rank
        assert!(PriceGrid::from_interior(dims, &[0.5, 0.2, 0.1, 0.1]).is_err());
        // out of range
        assert!(PriceGrid::from_interior(dims, &[-0.1, 0.2, 0.0, 0.1]).is_err());
    }

    #[test]
    fn repair_clamps_small_violations() {
        let dims = GridDims::new(1, 1).unwrap();
        let g = PriceGrid::repair(dims, &[-1e-8], 1e-6).unwrap();
        assert_eq!(g.get(0, 0), 0.0);

        let dims = GridDims::new(1, 2).unwrap();
        let g = PriceGrid::repair(dims, &[0.5, 0.5 - 1e-8], 1e-6).unwrap();
        assert!(g.get(0, 0) <= g.get(0, 1));
        assert!((g.get(0, 0) - 0.5).abs() <= 2e-8);
    }

    #[test]
    fn repair_rejects_large_violations() {
        let dims = GridDims::new(1, 2).unwrap();
        let err = PriceGrid::repair(dims, &[0.5, 0.5 - 1e-3], 1e-6);
        assert!(matches!(err, Err(PriceError::Infeasible { .. })));
    }

    #[test]
    fn random_grids_are_feasible_and_strict_rows_have_no_plateaus() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (m, n) in [(1, 1), (3, 4), (6, 6)] {
            let dims = GridDims::new(m, n).unwrap();
            for _ in 0..20 {
                let g = PriceGrid::random_feasible(dims, &mut rng);
                g.check_feasible(0.0).unwrap();
                let s = PriceGrid::random_strict(dims, &mut rng);
                assert!(s.rank_plateaus().is_empty());
            }
        }
    }
}
