use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::{BackendOutput, BackendStatus, CanonicalSdp, SdpBackend};
use crate::error::{Error, Result};
use crate::linalg;

/// Interior-point backend built on Clarabel's PSD-triangle cone.
#[derive(Debug, Clone)]
pub struct ClarabelBackend {
    pub tol: f64,
    pub max_iter: u32,
}

impl Default for ClarabelBackend {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 200 }
    }
}

impl ClarabelBackend {
    fn settings(&self, equilibrate: bool) -> Result<DefaultSettings<f64>> {
        DefaultSettingsBuilder::default()
            .verbose(false)
            .equilibrate_enable(equilibrate)
            .max_iter(self.max_iter)
            .tol_feas(self.tol)
            .tol_gap_abs(self.tol)
            .tol_gap_rel(self.tol)
            .build()
            .map_err(|e| Error::Solver(format!("clarabel settings: {e}")))
    }
}

/// Column-major upper-triangle order used by the PSD triangle cone,
/// off-diagonals scaled by √2.
fn svec_entries(dim: usize) -> impl Iterator<Item = (usize, usize, f64)> {
    (0..dim).flat_map(|j| (0..=j).map(move |i| (i, j, if i == j { 1.0 } else { std::f64::consts::SQRT_2 })))
}

impl SdpBackend for ClarabelBackend {
    fn name(&self) -> &str {
        "clarabel"
    }

    fn tolerance(&self) -> f64 {
        self.tol
    }

    fn solve(&self, sdp: &CanonicalSdp) -> Result<BackendOutput> {
        if sdp.n_vars == 0 {
            // nothing to optimize: the constant blocks decide feasibility
            let ok = sdp.blocks.iter().all(|b| linalg::min_sym_eigenvalue(&b.constant) >= 0.0);
            return Ok(BackendOutput {
                status: if ok { BackendStatus::Solved } else { BackendStatus::PrimalInfeasible },
                x: Vec::new(),
                iterations: 0,
                message: "constant problem".into(),
            });
        }

        let (mut ii, mut jj, mut vv) = (Vec::new(), Vec::new(), Vec::new());
        let mut b = Vec::new();
        let mut cones = Vec::with_capacity(sdp.blocks.len());
        let mut row0 = 0usize;
        for block in &sdp.blocks {
            let entries: Vec<_> = svec_entries(block.dim).collect();
            for &(i, j, s) in &entries {
                b.push(s * block.constant[(i, j)]);
            }
            for (k, m) in &block.coeffs {
                for (r, &(i, j, s)) in entries.iter().enumerate() {
                    let v = m[(i, j)];
                    if v != 0.0 {
                        ii.push(row0 + r);
                        jj.push(*k);
                        vv.push(-s * v);
                    }
                }
            }
            cones.push(if block.dim == 1 {
                SupportedConeT::NonnegativeConeT(1)
            } else {
                SupportedConeT::PSDTriangleConeT(block.dim)
            });
            row0 += entries.len();
        }
        let a = CscMatrix::new_from_triplets(row0, sdp.n_vars, ii, jj, vv);
        let p = CscMatrix::zeros((sdp.n_vars, sdp.n_vars));

        let run = |equilibrate: bool| -> Result<(BackendStatus, clarabel::solver::DefaultSolution<f64>)> {
            let mut solver = DefaultSolver::new(&p, &sdp.c, &a, &b, &cones, self.settings(equilibrate)?)
                .map_err(|e| Error::Solver(format!("clarabel setup: {e}")))?;
            solver.solve();
            let status = match solver.solution.status {
                SolverStatus::Solved => BackendStatus::Solved,
                SolverStatus::AlmostSolved => BackendStatus::AlmostSolved,
                SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                    BackendStatus::PrimalInfeasible
                }
                SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => BackendStatus::DualInfeasible,
                _ => BackendStatus::Failed,
            };
            Ok((status, solver.solution))
        };
        let (mut status, mut sol) = run(true)?;
        if status == BackendStatus::Failed {
            // Ruiz scaling occasionally derails tiny, badly scaled infeasible
            // problems; one unscaled retry usually settles them.
            let (s2, sol2) = run(false)?;
            if s2 != BackendStatus::Failed {
                (status, sol) = (s2, sol2);
            }
        }
        Ok(BackendOutput {
            status,
            x: sol.x.clone(),
            iterations: sol.iterations,
            message: format!("{:?}", sol.status),
        })
    }
}
