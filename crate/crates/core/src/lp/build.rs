//! Generators for the two LP families.
//!
//! Boundary price entries (`g(i,n) = 1`, `g(m,j) = 0`, `g(m,n) = 1`) are
//! substituted out as constants, so only the `m * n` interior entries become
//! variables. Every coefficient is assembled as an integer numerator over
//! the common denominator `m * n` and converted to f64 once.

use std::collections::HashMap;

#[cfg(test)]
use crate::gamma;
use crate::grid::{enumerate_paths, GridDims, MonotonePath, PathPair};
use crate::price::PriceGrid;

use super::{LpError, LpFamily, LpProblem, LpSolution, ModelSize, Sense, VarId};

/// Default cap on projected model memory (a laptop profile).
pub const DEFAULT_CAP_BYTES: u64 = 8 << 30;

#[derive(Debug, Clone)]
pub struct BuildOptions {
    /// Key the auxiliary lower-LP variables on `(i, b_i, inverse suffix)`
    /// instead of `(i, path)`; a safe model reduction, off by default.
    pub dedupe_h: bool,
    /// Refuse to build when the projected memory exceeds this; `None`
    /// disables the check.
    pub cap_bytes: Option<u64>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            dedupe_h: false,
            cap_bytes: Some(DEFAULT_CAP_BYTES),
        }
    }
}

impl BuildOptions {
    pub fn uncapped() -> Self {
        BuildOptions {
            dedupe_h: false,
            cap_bytes: None,
        }
    }
}

/// A built model plus the bookkeeping needed to read solutions back:
/// the variable map of the price grid and the constraint row of each
/// constraint-set member, in member order.
#[derive(Debug, Clone)]
pub struct LpModel {
    pub problem: LpProblem,
    pub dims: GridDims,
    pub family: LpFamily,
    pub gamma_var: VarId,
    g_vars: Vec<Option<VarId>>,
    /// Top-cell average variables of the upper family; empty for lower models.
    top_vars: Vec<VarId>,
    pub member_rows: Vec<usize>,
}

impl LpModel {
    pub fn g_var(&self, i: usize, j: usize) -> Option<VarId> {
        self.g_vars[i * (self.dims.n() + 1) + j]
    }

    /// Per-stage top-cell averages from an optimal solution of an upper
    /// model, clamped into their defining box.
    pub fn extract_top_averages(&self, sol: &LpSolution) -> Result<Vec<f64>, LpError> {
        sol.require_optimal()?;
        let n = self.dims.n();
        Ok(self
            .top_vars
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let floor = self
                    .g_var(i, n - 1)
                    .map(|v| sol.values[v])
                    .unwrap_or(0.0);
                sol.values[t].clamp(floor.clamp(0.0, 1.0), 1.0)
            })
            .collect())
    }

    /// Reads the price grid out of an optimal solution, repairing violations
    /// of feasibility up to 1e-6 by monotone projection.
    pub fn extract_price_grid(&self, sol: &LpSolution) -> Result<PriceGrid, LpError> {
        sol.require_optimal()?;
        let (m, n) = (self.dims.m(), self.dims.n());
        let mut interior = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let var = self.g_var(i, j).expect("interior entries are variables");
                interior[i * n + j] = sol.values[var];
            }
        }
        Ok(PriceGrid::repair(self.dims, &interior, 1e-6)?)
    }

    pub fn size(&self) -> ModelSize {
        self.problem.size()
    }
}

/// Exact projected size of the full lower LP (without h-deduplication).
pub fn project_lower_size(dims: GridDims) -> ModelSize {
    let (m, n) = (dims.m() as u128, dims.n() as u128);
    let paths = dims.path_count();
    let variables = 1 + m * n + m * paths;
    let h_rows = paths * m * (n + 2) / 2;
    let mono = m * (n - 1) + (m - 1) * n;
    let constraints = paths + h_rows + mono;
    // width bounds: a gamma row touches <= 1 + n + m columns, an h row <= 2 + n
    let nonzeros = paths * (1 + n + m) + h_rows * (2 + n) + 2 * mono;
    ModelSize {
        variables,
        constraints,
        nonzeros,
    }
}

/// Exact projected size of the full upper LP over all dominant pairs.
pub fn project_upper_size(dims: GridDims) -> ModelSize {
    project_upper_size_for(dims, dims.dominant_pair_count())
}

fn project_upper_size_for(dims: GridDims, pairs: u128) -> ModelSize {
    let (m, n) = (dims.m() as u128, dims.n() as u128);
    let mono = m * (n - 1) + (m - 1) * n;
    ModelSize {
        variables: 1 + m * n + m,
        constraints: pairs + mono + m + (m - 1),
        nonzeros: pairs * (2 + m + n) + 2 * mono + 2 * m + 2 * (m - 1),
    }
}

fn check_cap(size: ModelSize, cap: Option<u64>) -> Result<(), LpError> {
    if let Some(cap_bytes) = cap {
        let projected = size.projected_bytes();
        if projected > cap_bytes as u128 {
            return Err(LpError::ResourceRefusal {
                size,
                projected_bytes: projected,
                cap_bytes,
            });
        }
    }
    Ok(())
}

/// Sparse row under assembly: integer numerators over the denominator m*n.
struct RowBuf {
    terms: Vec<(VarId, i64)>,
    rhs: i64,
    denom: f64,
}

impl RowBuf {
    fn new(dims: GridDims) -> Self {
        RowBuf {
            terms: Vec::with_capacity(dims.m() + dims.n() + 2),
            rhs: 0,
            denom: (dims.m() * dims.n()) as f64,
        }
    }

    fn clear(&mut self) {
        self.terms.clear();
        self.rhs = 0;
    }

    fn add(&mut self, var: VarId, num: i64) {
        self.terms.push((var, num));
    }

    fn finish(&mut self) -> (Vec<(VarId, f64)>, f64) {
        self.terms.sort_unstable_by_key(|&(v, _)| v);
        let mut out: Vec<(VarId, f64)> = Vec::with_capacity(self.terms.len());
        for &(v, num) in &self.terms {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += num as f64 / self.denom,
                _ => out.push((v, num as f64 / self.denom)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        (out, self.rhs as f64 / self.denom)
    }
}

struct GridVars {
    gamma: VarId,
    g: Vec<Option<VarId>>,
    n: usize,
}

impl GridVars {
    fn new(problem: &mut LpProblem, dims: GridDims) -> Self {
        let gamma = problem.add_var("gamma", f64::NEG_INFINITY, f64::INFINITY);
        let (m, n) = (dims.m(), dims.n());
        let mut g = vec![None; (m + 1) * (n + 1)];
        for i in 0..m {
            for j in 0..n {
                g[i * (n + 1) + j] = Some(problem.add_var(format!("g_{i}_{j}"), 0.0, 1.0));
            }
        }
        GridVars { gamma, g, n }
    }

    #[inline]
    fn g(&self, i: usize, j: usize) -> Option<VarId> {
        self.g[i * (self.n + 1) + j]
    }

    /// Constant value of a boundary entry; None for interior (variable).
    #[inline]
    fn g_const(&self, i: usize, j: usize) -> Option<i64> {
        if self.g(i, j).is_some() {
            None
        } else if j == self.n {
            Some(1)
        } else {
            Some(0)
        }
    }
}

fn add_monotonicity_rows(problem: &mut LpProblem, vars: &GridVars, dims: GridDims) {
    let (m, n) = (dims.m(), dims.n());
    for i in 0..m {
        for j in 0..n - 1 {
            let a = vars.g(i, j).unwrap();
            let b = vars.g(i, j + 1).unwrap();
            problem
                .add_constraint(
                    format!("rank_{i}_{j}"),
                    vec![(a, 1.0), (b, -1.0)],
                    Sense::Le,
                    0.0,
                )
                .expect("valid row");
        }
    }
    for i in 0..m - 1 {
        for j in 0..n {
            let hi = vars.g(i, j).unwrap();
            let lo = vars.g(i + 1, j).unwrap();
            problem
                .add_constraint(format!("stage_{i}_{j}"), vec![(hi, -1.0), (lo, 1.0)], Sense::Le, 0.0)
                .expect("valid row");
        }
    }
}

/// Builds the full lower-bound LP over every monotone path.
pub fn build_lower_lp(dims: GridDims, opts: &BuildOptions) -> Result<LpModel, LpError> {
    check_cap(project_lower_size(dims), opts.cap_bytes)?;
    let paths: Vec<MonotonePath> = enumerate_paths(dims).collect();
    build_lower(dims, &paths, opts)
}

/// Builds the lower-bound LP with both constraint families instantiated only
/// for the given paths. Its optimum upper-bounds the full LP's value.
pub fn build_lower_lp_restricted(
    dims: GridDims,
    paths: &[MonotonePath],
    opts: &BuildOptions,
) -> Result<LpModel, LpError> {
    if paths.is_empty() {
        return Err(LpError::EmptySet);
    }
    build_lower(dims, paths, opts)
}

fn build_lower(
    dims: GridDims,
    paths: &[MonotonePath],
    opts: &BuildOptions,
) -> Result<LpModel, LpError> {
    let (m, n) = (dims.m(), dims.n());
    let mut problem = LpProblem::new(format!("ranking_lower_{dims}"));
    let vars = GridVars::new(&mut problem, dims);
    problem.set_objective(vars.gamma);
    add_monotonicity_rows(&mut problem, &vars, dims);

    // one h variable per (stage, path), or per distinct bracket family when
    // deduplicating: the brackets for (i, b) depend on b only through b_i and
    // the inverse-vector suffix from b_i
    let mut dedupe: HashMap<(usize, usize, Vec<usize>), VarId> = HashMap::new();
    let mut buf = RowBuf::new(dims);
    let mut member_rows = Vec::with_capacity(paths.len());

    for (k, b) in paths.iter().enumerate() {
        if b.dims() != dims {
            return Err(LpError::Grid(crate::grid::GridError::DimsMismatch(
                dims,
                b.dims(),
            )));
        }
        let jb = b.inverse();
        let mut h_ids = Vec::with_capacity(m);
        for i in 0..m {
            let b_i = b.value(i);
            let make_rows = |problem: &mut LpProblem, h: VarId, tag: &str| -> Result<(), LpError> {
                let mut row = RowBuf::new(dims);
                for j in b_i..=n {
                    row.clear();
                    row.add(h, (m * n) as i64);
                    let coef = (n - j + b_i) as i64;
                    match vars.g_const(i, j) {
                        // h <= j/n + coef/n * (1 - g(i,j)) + tail
                        None => {
                            row.add(vars.g(i, j).unwrap(), m as i64 * coef);
                            row.rhs += m as i64 * (j as i64 + coef);
                        }
                        Some(c) => row.rhs += m as i64 * (j as i64 + coef * (1 - c)),
                    }
                    for k2 in j..n {
                        let src = jb.value(k2);
                        match vars.g_const(src, k2) {
                            None => row.add(vars.g(src, k2).unwrap(), -(m as i64)),
                            Some(c) => row.rhs += m as i64 * c,
                        }
                    }
                    let (terms, rhs) = row.finish();
                    problem.add_constraint(format!("{tag}_{j}"), terms, Sense::Le, rhs)?;
                }
                Ok(())
            };
            let h = if opts.dedupe_h {
                let key = (i, b_i, jb.values()[b_i..].to_vec());
                match dedupe.get(&key) {
                    Some(&h) => h,
                    None => {
                        let t = dedupe.len();
                        let h = problem.add_var(
                            format!("hd_{t}"),
                            f64::NEG_INFINITY,
                            f64::INFINITY,
                        );
                        dedupe.insert(key, h);
                        make_rows(&mut problem, h, &format!("hd_{t}"))?;
                        h
                    }
                }
            } else {
                let h = problem.add_var(format!("h_{k}_{i}"), f64::NEG_INFINITY, f64::INFINITY);
                make_rows(&mut problem, h, &format!("h_{k}_{i}"))?;
                h
            };
            h_ids.push(h);
        }

        // gamma <= (1/n) sum_j (1 - jb_j/m) g(jb_j, j) - (1/m) sum_i b_i/n
        //          + (1/m) sum_i h(i, b)
        buf.clear();
        buf.add(vars.gamma, (m * n) as i64);
        for j in 0..n {
            let src = jb.value(j);
            let coef = (m - src) as i64;
            if coef == 0 {
                continue;
            }
            match vars.g_const(src, j) {
                None => buf.add(vars.g(src, j).unwrap(), -coef),
                Some(c) => buf.rhs += coef * c,
            }
        }
        for &h in &h_ids {
            buf.add(h, -(n as i64));
        }
        buf.rhs -= (0..m).map(|i| b.value(i) as i64).sum::<i64>();
        let (terms, rhs) = buf.finish();
        let row = problem.add_constraint(format!("gam_{k}"), terms, Sense::Le, rhs)?;
        member_rows.push(row);
    }

    Ok(LpModel {
        problem,
        dims,
        family: LpFamily::Lower,
        gamma_var: vars.gamma,
        g_vars: vars.g,
        top_vars: Vec::new(),
        member_rows,
    })
}

/// Builds the upper-bound LP restricted to the given pair set; passing all
/// dominant pairs yields the full program.
///
/// Besides the price-grid variables, the model carries one auxiliary
/// variable per stage line: the average of the price function over the top
/// rank cell, bounded by `g(i, n-1) <= t_i <= 1`, non-increasing across
/// stages, with the terminal stage line contributing 0. The v-side samples
/// for rank cell `n-1` read these averages; pinning them to the rank
/// boundary value 1 instead would price mass into the top cell that no
/// admissible function carries at time 1, and the resulting optimum would
/// not be tight.
pub fn build_upper_lp(
    dims: GridDims,
    pairs: &[PathPair],
    opts: &BuildOptions,
) -> Result<LpModel, LpError> {
    if pairs.is_empty() {
        return Err(LpError::EmptySet);
    }
    check_cap(project_upper_size_for(dims, pairs.len() as u128), opts.cap_bytes)?;

    let (m, n) = (dims.m(), dims.n());
    let mut problem = LpProblem::new(format!("ranking_upper_{dims}"));
    let vars = GridVars::new(&mut problem, dims);
    problem.set_objective(vars.gamma);
    add_monotonicity_rows(&mut problem, &vars, dims);

    // top-cell average variables t_i, linked to the grid and ordered
    let top_vars: Vec<VarId> = (0..m)
        .map(|i| problem.add_var(format!("t_{i}"), 0.0, 1.0))
        .collect();
    for (i, &t) in top_vars.iter().enumerate() {
        // g vars are created before t vars, so this row is sorted
        let g_top = vars.g(i, n - 1).unwrap();
        problem.add_constraint(
            format!("toplink_{i}"),
            vec![(g_top, 1.0), (t, -1.0)],
            Sense::Le,
            0.0,
        )?;
        if i + 1 < m {
            problem.add_constraint(
                format!("topmono_{i}"),
                vec![(t, -1.0), (top_vars[i + 1], 1.0)],
                Sense::Le,
                0.0,
            )?;
        }
    }

    let mut buf = RowBuf::new(dims);
    let mut member_rows = Vec::with_capacity(pairs.len());
    let mut below = vec![0i64; n + 1]; // below[j] = #{i < m : a_i <= j}

    for (k, pair) in pairs.iter().enumerate() {
        if pair.dims() != dims {
            return Err(LpError::Grid(crate::grid::GridError::DimsMismatch(
                dims,
                pair.dims(),
            )));
        }
        let (a, b) = (pair.alpha(), pair.beta());
        let jb = b.inverse();
        buf.clear();
        buf.add(vars.gamma, (m * n) as i64);

        below.iter_mut().for_each(|c| *c = 0);
        for i in 0..m {
            let (a_i, b_i) = (a.value(i), b.value(i));
            below[a_i] += 1;
            // match area
            buf.rhs += (a_i - b_i) as i64;
            // online-side gain, sampled at the next stage boundary
            let coef = (n - a_i + b_i) as i64;
            match vars.g_const(i + 1, a_i) {
                None => {
                    buf.add(vars.g(i + 1, a_i).unwrap(), coef);
                    buf.rhs += coef;
                }
                Some(c) => buf.rhs += coef * (1 - c),
            }
        }
        // prefix-sum: below[j] counts stages whose rank window starts at or
        // before j, i.e. the multiplicity of the cell-j sample in the last term
        for j in 1..=n {
            below[j] += below[j - 1];
        }
        for j in 0..n {
            let src = jb.value(j);
            let late = below[j];
            let early = (m - src) as i64;
            let total = early + late;
            if total == 0 {
                continue;
            }
            if j + 1 < n {
                // interior sample g(src, j+1); the stage boundary row is 0
                if src < m {
                    buf.add(vars.g(src, j + 1).unwrap(), -total);
                }
            } else if src < m {
                // top rank cell reads the average variable
                buf.add(top_vars[src], -total);
            }
        }
        let (terms, rhs) = buf.finish();
        let row = problem.add_constraint(format!("gam_{k}"), terms, Sense::Le, rhs)?;
        member_rows.push(row);
    }

    Ok(LpModel {
        problem,
        dims,
        family: LpFamily::Upper,
        gamma_var: vars.gamma,
        g_vars: vars.g,
        top_vars,
        member_rows,
    })
}

/// Every dominant pair on the grid, in lexicographic order.
pub fn all_dominant_pairs(dims: GridDims) -> Vec<PathPair> {
    crate::grid::enumerate_dominant_pairs(dims).collect()
}
