//! Pluggable solver backends behind a narrow contract.
//!
//! `clarabel` (interior point) is the default and handles the large exact
//! models; `microlp` (simplex) is kept as an independent open-source
//! cross-check. Both are selectable at runtime via `RANKBOUND_BACKEND`.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus,
    SupportedConeT, ZeroConeT,
};

use super::{LpError, LpProblem, Sense, SolveStatus};

pub trait LpBackend: Sync {
    fn id(&self) -> &'static str;

    /// Returns the solve status and, when a point is available, the primal
    /// variable values. Limits must surface as `Limit`, never as a silently
    /// inaccurate `Optimal`.
    fn solve_raw(&self, p: &LpProblem) -> Result<(SolveStatus, Vec<f64>), LpError>;
}

pub fn backend_by_name(name: &str) -> Result<Box<dyn LpBackend>, LpError> {
    match name {
        "clarabel" => Ok(Box::new(ClarabelBackend::default())),
        "microlp" => Ok(Box::new(MicrolpBackend)),
        other => Err(LpError::UnknownBackend(other.to_string())),
    }
}

/// Backend named by the `RANKBOUND_BACKEND` environment variable, defaulting
/// to clarabel.
pub fn default_backend() -> Box<dyn LpBackend> {
    match std::env::var("RANKBOUND_BACKEND") {
        Ok(name) => backend_by_name(&name).unwrap_or_else(|_| {
            eprintln!("warning: unknown RANKBOUND_BACKEND {name:?}, using clarabel");
            Box::new(ClarabelBackend::default())
        }),
        Err(_) => Box::new(ClarabelBackend::default()),
    }
}

#[derive(Debug, Clone)]
pub struct ClarabelBackend {
    pub tol: f64,
    pub max_iter: u32,
}

impl Default for ClarabelBackend {
    fn default() -> Self {
        ClarabelBackend {
            tol: 1e-9,
            max_iter: 200,
        }
    }
}

impl LpBackend for ClarabelBackend {
    fn id(&self) -> &'static str {
        "clarabel"
    }

    fn solve_raw(&self, p: &LpProblem) -> Result<(SolveStatus, Vec<f64>), LpError> {
        let nv = p.vars().len();
        // rows in cone order: equalities first, then all inequalities as
        // a.x <= rhs, then finite bounds
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nv];
        let mut rhs: Vec<f64> = Vec::new();
        let mut row = 0usize;
        let push_row = |terms: &[(usize, f64)], sign: f64, b: f64, cols: &mut Vec<Vec<(usize, f64)>>, rhs: &mut Vec<f64>, row: &mut usize| {
            for &(v, c) in terms {
                cols[v].push((*row, sign * c));
            }
            rhs.push(sign * b);
            *row += 1;
        };

        let n_eq = p.constraints().iter().filter(|c| c.sense == Sense::Eq).count();
        for c in p.constraints().iter().filter(|c| c.sense == Sense::Eq) {
            push_row(&c.terms, 1.0, c.rhs, &mut cols, &mut rhs, &mut row);
        }
        for c in p.constraints().iter().filter(|c| c.sense != Sense::Eq) {
            let sign = if c.sense == Sense::Le { 1.0 } else { -1.0 };
            push_row(&c.terms, sign, c.rhs, &mut cols, &mut rhs, &mut row);
        }
        for (v, var) in p.vars().iter().enumerate() {
            if var.upper.is_finite() {
                push_row(&[(v, 1.0)], 1.0, var.upper, &mut cols, &mut rhs, &mut row);
            }
            if var.lower.is_finite() {
                push_row(&[(v, -1.0)], 1.0, -var.lower, &mut cols, &mut rhs, &mut row);
            }
        }
        let n_ineq = row - n_eq;

        let mut colptr = Vec::with_capacity(nv + 1);
        let mut rowval = Vec::new();
        let mut nzval = Vec::new();
        colptr.push(0);
        for col in &cols {
            // rows were pushed in ascending order per column
            for &(r, v) in col {
                rowval.push(r);
                nzval.push(v);
            }
            colptr.push(rowval.len());
        }
        let a = CscMatrix::new(row, nv, colptr, rowval, nzval);
        let p_mat = CscMatrix::zeros((nv, nv));
        let mut q = vec![0.0; nv];
        q[p.objective()] = -1.0; // maximize the designated variable

        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        if n_eq > 0 {
            cones.push(ZeroConeT(n_eq));
        }
        if n_ineq > 0 {
            cones.push(NonnegativeConeT(n_ineq));
        }

        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(self.max_iter)
            .tol_gap_abs(self.tol)
            .tol_gap_rel(self.tol)
            .tol_feas(self.tol)
            .build()
            .map_err(|e| LpError::Backend {
                backend: "clarabel".into(),
                detail: e.to_string(),
            })?;
        let mut solver =
            DefaultSolver::new(&p_mat, &q, &a, &rhs, &cones, settings).map_err(|e| {
                LpError::Backend {
                    backend: "clarabel".into(),
                    detail: format!("{e:?}"),
                }
            })?;
        solver.solve();

        let status = match solver.solution.status {
            SolverStatus::Solved => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                SolveStatus::Infeasible
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                SolveStatus::Unbounded
            }
            SolverStatus::AlmostSolved
            | SolverStatus::MaxIterations
            | SolverStatus::MaxTime
            | SolverStatus::InsufficientProgress => SolveStatus::Limit,
            other => {
                return Err(LpError::Backend {
                    backend: "clarabel".into(),
                    detail: format!("solver status {other:?}"),
                })
            }
        };
        let values = if status == SolveStatus::Optimal {
            solver.solution.x.clone()
        } else {
            Vec::new()
        };
        Ok((status, values))
    }
}

pub struct MicrolpBackend;

impl LpBackend for MicrolpBackend {
    fn id(&self) -> &'static str {
        "microlp"
    }

    fn solve_raw(&self, p: &LpProblem) -> Result<(SolveStatus, Vec<f64>), LpError> {
        use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome};

        let mut prob = Problem::new(OptimizationDirection::Maximize);
        let handles: Vec<_> = p
            .vars()
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let obj = if k == p.objective() { 1.0 } else { 0.0 };
                prob.add_var(obj, (v.lower, v.upper))
            })
            .collect();
        for c in p.constraints() {
            let terms: Vec<_> = c.terms.iter().map(|&(v, coef)| (handles[v], coef)).collect();
            let op = match c.sense {
                Sense::Le => ComparisonOp::Le,
                Sense::Ge => ComparisonOp::Ge,
                Sense::Eq => ComparisonOp::Eq,
            };
            prob.add_constraint(&terms, op, c.rhs);
        }
        match prob.solve() {
            Ok(SolveOutcome::Solution(s)) => {
                let values = handles.iter().map(|&h| s[h]).collect();
                Ok((SolveStatus::Optimal, values))
            }
            Ok(SolveOutcome::Interrupted(_)) => Ok((SolveStatus::Limit, Vec::new())),
            Err(microlp::Error::Infeasible) => Ok((SolveStatus::Infeasible, Vec::new())),
            Err(microlp::Error::Unbounded) => Ok((SolveStatus::Unbounded, Vec::new())),
            Err(e) => Err(LpError::Backend {
                backend: "microlp".into(),
                detail: e.to_string(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::solve;

    fn toy_problem() -> LpProblem {
        // max t s.t. t <= 1 - g, t <= g, g in [0,1]; optimum 0.5
        let mut p = LpProblem::new("toy");
        let t = p.add_var("t", f64::NEG_INFINITY, f64::INFINITY);
        let g = p.add_var("g", 0.0, 1.0);
        p.set_objective(t);
        p.add_constraint("c1", vec![(t, 1.0), (g, 1.0)], Sense::Le, 1.0)
            .unwrap();
        p.add_constraint("c2", vec![(t, 1.0), (g, -1.0)], Sense::Le, 0.0)
            .unwrap();
        p
    }

    #[test]
    fn both_backends_agree_on_toy_problem() {
        for backend in [
            Box::new(ClarabelBackend::default()) as Box<dyn LpBackend>,
            Box::new(MicrolpBackend),
        ] {
            let sol = solve(&toy_problem(), backend.as_ref()).unwrap();
            assert_eq!(sol.status, SolveStatus::Optimal);
            assert!((sol.objective - 0.5).abs() < 1e-7, "{}", backend.id());
            assert!(sol.slacks.iter().all(|&s| s >= -1e-7));
        }
    }

    #[test]
    fn contradictory_model_is_infeasible() {
        let mut p = LpProblem::new("bad");
        let t = p.add_var("t", f64::NEG_INFINITY, f64::INFINITY);
        p.set_objective(t);
        p.add_constraint("ge1", vec![(t, 1.0)], Sense::Ge, 1.0).unwrap();
        p.add_constraint("le0", vec![(t, 1.0)], Sense::Le, 0.0).unwrap();
        for backend in [
            Box::new(ClarabelBackend::default()) as Box<dyn LpBackend>,
            Box::new(MicrolpBackend),
        ] {
            let sol = solve(&p, backend.as_ref()).unwrap();
            assert_eq!(sol.status, SolveStatus::Infeasible, "{}", backend.id());
            assert!(sol.require_optimal().is_err());
        }
    }

    #[test]
    fn unbounded_model_detected() {
        let mut p = LpProblem::new("unbounded");
        let t = p.add_var("t", 0.0, f64::INFINITY);
        p.set_objective(t);
        p.add_constraint("ge", vec![(t, 1.0)], Sense::Ge, 1.0).unwrap();
        for backend in [
            Box::new(ClarabelBackend::default()) as Box<dyn LpBackend>,
            Box::new(MicrolpBackend),
        ] {
            let sol = solve(&p, backend.as_ref()).unwrap();
            assert_eq!(sol.status, SolveStatus::Unbounded, "{}", backend.id());
        }
    }

    #[test]
    fn backend_registry() {
        assert_eq!(backend_by_name("clarabel").unwrap().id(), "clarabel");
        assert_eq!(backend_by_name("microlp").unwrap().id(), "microlp");
        assert!(backend_by_name("gurobi").is_err());
    }
}
