//! LP models for the two constraint families, solver backends, and model
//! exchange.
//!
//! Problems are linear programs maximizing a single designated variable.
//! Every coefficient produced by the builders is an integer multiple of
//! `1/(m*n)`, converted to f64 once at insertion.

mod backend;
mod build;
mod mps;

pub use backend::{backend_by_name, default_backend, ClarabelBackend, LpBackend, MicrolpBackend};
pub use build::{
    all_dominant_pairs, build_lower_lp, build_lower_lp_restricted, build_upper_lp,
    project_lower_size, project_upper_size, BuildOptions, LpModel,
};
pub use mps::{read_mps, write_mps};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::grid::{GridDims, GridError, MonotonePath, PathPair};
use crate::price::PriceError;

pub type VarId = usize;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("projected model too large: {size} (~{projected_bytes} bytes > cap {cap_bytes}); pass --force or raise the cap to build anyway")]
    ResourceRefusal {
        size: ModelSize,
        projected_bytes: u128,
        cap_bytes: u64,
    },
    #[error("constraint {name:?} references undeclared variable {var}")]
    UnknownVariable { name: String, var: VarId },
    #[error("non-finite coefficient in constraint {name:?}")]
    NonFinite { name: String },
    #[error("empty constraint set")]
    EmptySet,
    #[error("solution has status {status:?}, expected optimal")]
    NotOptimal { status: SolveStatus },
    #[error("{backend} backend failure: {detail}")]
    Backend { backend: String, detail: String },
    #[error("unknown backend {0:?} (available: clarabel, microlp)")]
    UnknownBackend(String),
    #[error("reported solution violates {name:?} by {violation:.3e}")]
    InfeasibleSolution { name: String, violation: f64 },
    #[error("mps parse error at line {line}: {detail}")]
    Mps { line: usize, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Price(#[from] PriceError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    /// Sparse terms, strictly increasing in variable id.
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * x[v]).sum()
    }

    /// Non-negative slack; for equalities, the absolute residual.
    pub fn slack(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        match self.sense {
            Sense::Le => self.rhs - a,
            Sense::Ge => a - self.rhs,
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

/// Which LP family a model belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpFamily {
    Lower,
    Upper,
}

impl fmt::Display for LpFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LpFamily::Lower => "lower",
            LpFamily::Upper => "upper",
        })
    }
}

impl FromStr for LpFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lower" => Ok(LpFamily::Lower),
            "upper" => Ok(LpFamily::Upper),
            other => Err(format!("unknown family {other:?}")),
        }
    }
}

/// A linear program maximizing one designated variable.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub name: String,
    vars: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Option<VarId>,
}

impl LpProblem {
    pub fn new(name: impl Into<String>) -> Self {
        LpProblem {
            name: name.into(),
            vars: Vec::new(),
            constraints: Vec::new(),
            objective: None,
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
        });
        self.vars.len() - 1
    }

    pub fn set_objective(&mut self, var: VarId) {
        assert!(var < self.vars.len(), "objective references unknown var");
        self.objective = Some(var);
    }

    /// The maximized variable. Builders always set it.
    pub fn objective(&self) -> VarId {
        self.objective.expect("objective variable not set")
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> Result<usize, LpError> {
        let name = name.into();
        debug_assert!(terms.windows(2).all(|w| w[0].0 < w[1].0));
        for &(v, c) in &terms {
            if v >= self.vars.len() {
                return Err(LpError::UnknownVariable { name, var: v });
            }
            if !c.is_finite() {
                return Err(LpError::NonFinite { name });
            }
        }
        if !rhs.is_finite() {
            return Err(LpError::NonFinite { name });
        }
        self.constraints.push(Constraint {
            name,
            terms,
            sense,
            rhs,
        });
        Ok(self.constraints.len() - 1)
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub(crate) fn vars_mut(&mut self) -> &mut [Variable] {
        &mut self.vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn size(&self) -> ModelSize {
        ModelSize {
            variables: self.vars.len() as u128,
            constraints: self.constraints.len() as u128,
            nonzeros: self.constraints.iter().map(|c| c.terms.len() as u128).sum(),
        }
    }
}

/// Variable/constraint/nonzero counts, also used for pre-build projections
/// of models that may be too large to materialize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSize {
    pub variables: u128,
    pub constraints: u128,
    pub nonzeros: u128,
}

impl ModelSize {
    /// Rough memory footprint of the assembled model.
    pub fn projected_bytes(&self) -> u128 {
        16 * self.nonzeros + 64 * (self.variables + self.constraints)
    }
}

impl fmt::Display for ModelSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} variables, {} constraints, {} nonzeros",
            self.variables, self.constraints, self.nonzeros
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// A time or iteration limit stopped the solver before proven optimality.
    Limit,
}

/// Solver output together with per-constraint activities and slacks.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: SolveStatus,
    /// Value of the maximized variable; NaN unless status is optimal.
    pub objective: f64,
    pub values: Vec<f64>,
    pub activities: Vec<f64>,
    pub slacks: Vec<f64>,
    pub backend: &'static str,
}

impl LpSolution {
    pub fn require_optimal(&self) -> Result<&Self, LpError> {
        if self.status == SolveStatus::Optimal {
            Ok(self)
        } else {
            Err(LpError::NotOptimal {
                status: self.status,
            })
        }
    }
}

/// Feasibility tolerance a returned optimal point must satisfy.
pub const SOLUTION_FEAS_TOL: f64 = 1e-7;

/// Solves the problem and, for optimal outcomes, verifies the reported point
/// satisfies every constraint and bound within [`SOLUTION_FEAS_TOL`].
pub fn solve(p: &LpProblem, backend: &dyn LpBackend) -> Result<LpSolution, LpError> {
    let raw = backend.solve_raw(p)?;
    let (status, values) = raw;
    let mut activities = Vec::new();
    let mut slacks = Vec::new();
    let mut objective = f64::NAN;
    if status == SolveStatus::Optimal {
        activities.reserve(p.constraints.len());
        slacks.reserve(p.constraints.len());
        for c in &p.constraints {
            let a = c.activity(&values);
            let s = c.slack(&values);
            if s < -SOLUTION_FEAS_TOL {
                return Err(LpError::InfeasibleSolution {
                    name: c.name.clone(),
                    violation: -s,
                });
            }
            activities.push(a);
            slacks.push(s);
        }
        for (k, v) in p.vars.iter().enumerate() {
            let x = values[k];
            if x < v.lower - SOLUTION_FEAS_TOL || x > v.upper + SOLUTION_FEAS_TOL {
                return Err(LpError::InfeasibleSolution {
                    name: v.name.clone(),
                    violation: (v.lower - x).max(x - v.upper),
                });
            }
        }
        objective = values[p.objective()];
    }
    Ok(LpSolution {
        status,
        objective,
        values,
        activities,
        slacks,
        backend: backend.id(),
    })
}

/// A working set of constraints for one LP family: grid-path pairs for the
/// upper bound, single grid paths for the lower-bound heuristic. Kept
/// sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintSet {
    Lower {
        dims: GridDims,
        paths: Vec<MonotonePath>,
    },
    Upper {
        dims: GridDims,
        pairs: Vec<PathPair>,
    },
}

impl ConstraintSet {
    pub fn from_paths(dims: GridDims, mut paths: Vec<MonotonePath>) -> Result<Self, GridError> {
        for p in &paths {
            if p.dims() != dims {
                return Err(GridError::DimsMismatch(dims, p.dims()));
            }
        }
        paths.sort_unstable();
        paths.dedup();
        Ok(ConstraintSet::Lower { dims, paths })
    }

    pub fn from_pairs(dims: GridDims, mut pairs: Vec<PathPair>) -> Result<Self, GridError> {
        for p in &pairs {
            if p.dims() != dims {
                return Err(GridError::DimsMismatch(dims, p.dims()));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        Ok(ConstraintSet::Upper { dims, pairs })
    }

    pub fn family(&self) -> LpFamily {
        match self {
            ConstraintSet::Lower { .. } => LpFamily::Lower,
            ConstraintSet::Upper { .. } => LpFamily::Upper,
        }
    }

    pub fn dims(&self) -> GridDims {
        match self {
            ConstraintSet::Lower { dims, .. } => *dims,
            ConstraintSet::Upper { dims, .. } => *dims,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ConstraintSet::Lower { paths, .. } => paths.len(),
            ConstraintSet::Upper { pairs, .. } => pairs.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn paths(&self) -> Option<&[MonotonePath]> {
        match self {
            ConstraintSet::Lower { paths, .. } => Some(paths),
            ConstraintSet::Upper { .. } => None,
        }
    }

    pub fn pairs(&self) -> Option<&[PathPair]> {
        match self {
            ConstraintSet::Upper { pairs, .. } => Some(pairs),
            ConstraintSet::Lower { .. } => None,
        }
    }

    /// Members in their serialized string form (`"b0,...,bm"` or `"a|b"`).
    pub fn member_strings(&self) -> Vec<String> {
        match self {
            ConstraintSet::Lower { paths, .. } => paths.iter().map(|p| p.to_string()).collect(),
            ConstraintSet::Upper { pairs, .. } => pairs.iter().map(|p| p.to_string()).collect(),
        }
    }

    /// Parses a set back from serialized members.
    pub fn from_member_strings(
        family: LpFamily,
        dims: GridDims,
        members: &[String],
    ) -> Result<Self, GridError> {
        match family {
            LpFamily::Lower => {
                let paths = members
                    .iter()
                    .map(|s| s.parse())
                    .collect::<Result<Vec<MonotonePath>, _>>()?;
                Self::from_paths(dims, paths)
            }
            LpFamily::Upper => {
                let pairs = members
                    .iter()
                    .map(|s| s.parse())
                    .collect::<Result<Vec<PathPair>, _>>()?;
                Self::from_pairs(dims, pairs)
            }
        }
    }
}
