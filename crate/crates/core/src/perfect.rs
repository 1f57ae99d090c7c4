//! Sum secrecy rate under perfect CSI: for each pair of rate targets,
//! bisection on the eavesdropper SINR level `t` over SDP feasibility
//! problems, then a grid sweep over the targets.

use crate::channel::{capacity_bounds, CovarianceDesign, SystemInstance};
use crate::error::{Error, Result};
use crate::linalg::HermitianMatrix;
use crate::region::{bisect, sweep, CellStatus, GridSpec, RegionCell, RegionResult};
use crate::sdp::{
    find_feasible, AffineScalar, ConstraintId, LmiProblem, MatVar, SdpSettings, SdpSolution,
    SdpStatus,
};

/// Handles to the four covariance variables and the power budgets.
#[derive(Clone, Copy, Debug)]
pub struct CovVars {
    pub phi1: MatVar,
    pub psi1: MatVar,
    pub phi2: MatVar,
    pub psi2: MatVar,
    pub power1: ConstraintId,
    pub power2: ConstraintId,
}

impl CovVars {
    /// Declares the covariances (PSD by construction) and `tr(Φi + Ψi) ≤ Pi`.
    pub fn declare(p: &mut LmiProblem, inst: &SystemInstance) -> Self {
        let phi1 = p.hermitian_psd("Phi1", inst.m1);
        let psi1 = p.hermitian_psd("Psi1", inst.m1);
        let phi2 = p.hermitian_psd("Phi2", inst.m2);
        let psi2 = p.hermitian_psd("Psi2", inst.m2);
        let id1 = HermitianMatrix::identity(inst.m1);
        let id2 = HermitianMatrix::identity(inst.m2);
        let power1 = p.add_le(
            "power1",
            AffineScalar::constant(-inst.p1)
                .plus_trace(phi1, id1.clone())
                .plus_trace(psi1, id1),
        );
        let power2 = p.add_le(
            "power2",
            AffineScalar::constant(-inst.p2)
                .plus_trace(phi2, id2.clone())
                .plus_trace(psi2, id2),
        );
        Self {
            phi1,
            psi1,
            phi2,
            psi2,
            power1,
            power2,
        }
    }

    pub fn design(&self, sol: &SdpSolution) -> CovarianceDesign {
        CovarianceDesign {
            phi1: sol.matrix(self.phi1),
            psi1: sol.matrix(self.psi1),
            phi2: sol.matrix(self.phi2),
            psi2: sol.matrix(self.psi2),
            aux: None,
        }
    }
}

/// Handles into a perfect-CSI problem.
#[derive(Clone, Copy, Debug)]
pub struct PerfectVars {
    pub cov: CovVars,
    pub leakage: ConstraintId,
    pub rate1: ConstraintId,
    pub rate2: ConstraintId,
}

/// `2^r − 1`.
pub(crate) fn sinr_of_rate(r: f64) -> f64 {
    r.exp2() - 1.0
}

/// Rate constraints `(2^r − 1)(N0 + h Ψ h*) − h Φ h* ≤ 0` for both users.
pub(crate) fn add_rate_constraints(
    p: &mut LmiProblem,
    inst: &SystemInstance,
    v: &CovVars,
    rk1: f64,
    rl2: f64,
) -> (ConstraintId, ConstraintId) {
    let g1 = sinr_of_rate(rk1);
    let g2 = sinr_of_rate(rl2);
    let rate1 = p.add_le(
        "rate1",
        AffineScalar::constant(g1 * inst.n0)
            .plus_quadratic(v.psi1, &inst.h21, g1)
            .plus_quadratic(v.phi1, &inst.h21, -1.0),
    );
    let rate2 = p.add_le(
        "rate2",
        AffineScalar::constant(g2 * inst.n0)
            .plus_quadratic(v.psi2, &inst.h12, g2)
            .plus_quadratic(v.phi2, &inst.h12, -1.0),
    );
    (rate1, rate2)
}

/// Leakage numerator minus `t` times its denominator, as an affine expression.
pub(crate) fn leakage_expr(inst: &SystemInstance, v: &CovVars, t: f64) -> AffineScalar {
    AffineScalar::constant(-t * inst.n0)
        .plus_quadratic(v.phi1, &inst.z1, 1.0)
        .plus_quadratic(v.phi2, &inst.z2, 1.0)
        .plus_quadratic(v.psi1, &inst.z1, -t)
        .plus_quadratic(v.psi2, &inst.z2, -t)
}

/// Feasibility problem at leakage level `t`: the leakage epigraph, both
/// rate constraints, PSD domains and power budgets.
pub fn perfect_problem(
    inst: &SystemInstance,
    rk1: f64,
    rl2: f64,
    t: f64,
) -> (LmiProblem, PerfectVars) {
    let mut p = LmiProblem::new();
    let cov = CovVars::declare(&mut p, inst);
    let leakage = p.add_le("leakage", leakage_expr(inst, &cov, t));
    let (rate1, rate2) = add_rate_constraints(&mut p, inst, &cov, rk1, rl2);
    (
        p,
        PerfectVars {
            cov,
            leakage,
            rate1,
            rate2,
        },
    )
}

/// Result of [`min_leakage_at_rates`].
#[derive(Clone, Debug)]
pub struct LeakageSolution {
    pub t_min: f64,
    pub design: CovarianceDesign,
    pub solves: usize,
}

fn feasible_design(
    inst: &SystemInstance,
    rk1: f64,
    rl2: f64,
    t: f64,
    settings: &SdpSettings,
) -> Result<Option<CovarianceDesign>> {
    let (p, v) = perfect_problem(inst, rk1, rl2, t);
    let sol = find_feasible(&p, settings)?;
    match sol.status {
        SdpStatus::Optimal => Ok(Some(v.cov.design(&sol))),
        SdpStatus::Infeasible => Ok(None),
        SdpStatus::NumericalFailure => Err(Error::SolverFailure(format!(
            "feasibility at t = {t:.6e}: {}",
            sol.message.unwrap_or_default()
        ))),
    }
}

/// Validates targets against `[0, C'1] × [0, C'2]` and runs bisection.
pub fn min_leakage_with(
    inst: &SystemInstance,
    rk1: f64,
    rl2: f64,
    zeta: f64,
    settings: &SdpSettings,
) -> Result<LeakageSolution> {
    if !inst.is_perfect_csi() {
        return Err(Error::InvalidArgument(
            "perfect-CSI solver needs all error bounds at zero".into(),
        ));
    }
    if !(rk1 >= 0.0 && rl2 >= 0.0) {
        return Err(Error::InvalidArgument(
            "rate targets must be nonnegative".into(),
        ));
    }
    if !(zeta > 0.0) {
        return Err(Error::InvalidArgument("zeta must be positive".into()));
    }
    let cap = capacity_bounds(inst);
    let t_hi = sinr_of_rate(cap.ce);
    let b = bisect(t_hi, zeta, rk1, rl2, |t| {
        feasible_design(inst, rk1, rl2, t, settings)
    })?;
    Ok(LeakageSolution {
        t_min: b.t_min,
        design: b.payload,
        solves: b.solves,
    })
}

/// Smallest leakage SINR level `t` (within `zeta`) at which the rate targets
/// are achievable, and a design achieving it. The returned level is the
/// upper end of the final bisection bracket, so the design is certified.
pub fn min_leakage_at_rates(
    inst: &SystemInstance,
    rk1: f64,
    rl2: f64,
    zeta: f64,
) -> Result<LeakageSolution> {
    min_leakage_with(inst, rk1, rl2, zeta, &SdpSettings::default())
}

/// Runs `solve`, retrying once with a 10× looser feasibility tolerance when
/// the solver fails numerically.
pub(crate) fn with_retry<T>(
    settings: &SdpSettings,
    solve: impl Fn(&SdpSettings) -> Result<T>,
) -> Result<T> {
    match solve(settings) {
        Err(Error::SolverFailure(msg)) => {
            log::debug!("retrying with looser tolerance after: {msg}");
            solve(&settings.with_feas_tol(settings.feas_tol * 10.0))
        }
        r => r,
    }
}

pub(crate) fn cell_from_error(k: usize, l: usize, rk1: f64, rl2: f64, e: Error) -> RegionCell {
    let status = match e {
        Error::InfeasibleAtCapacity { .. } => CellStatus::Infeasible,
        e => CellStatus::Failed(e.to_string()),
    };
    RegionCell::unsolved(k, l, rk1, rl2, status)
}

/// Evaluates one perfect-CSI grid cell.
pub fn perfect_cell(
    inst: &SystemInstance,
    k: usize,
    l: usize,
    rk1: f64,
    rl2: f64,
    zeta: f64,
) -> RegionCell {
    let cap = capacity_bounds(inst);
    if rk1 > cap.c1 || rl2 > cap.c2 {
        return RegionCell::unsolved(k, l, rk1, rl2, CellStatus::Infeasible);
    }
    match with_retry(&SdpSettings::default(), |s| {
        min_leakage_with(inst, rk1, rl2, zeta, s)
    }) {
        Ok(sol) => {
            let re = (1.0 + sol.t_min).log2();
            RegionCell {
                k,
                l,
                r1_target: rk1,
                r2_target: rl2,
                t_min: sol.t_min,
                r1: rk1,
                r2: rl2,
                re,
                sum: (rk1 + rl2 - re).max(0.0),
                design: Some(sol.design),
                status: CellStatus::Converged,
                solves: sol.solves,
            }
        }
        Err(e) => cell_from_error(k, l, rk1, rl2, e),
    }
}

/// Grid sweep over `[0, C'1] × [0, C'2]` (or the grid's explicit range).
pub fn max_sum_secrecy(inst: &SystemInstance, grid: &GridSpec) -> Result<RegionResult> {
    grid.validate()?;
    if !inst.is_perfect_csi() {
        return Err(Error::InvalidArgument(
            "perfect-CSI solver needs all error bounds at zero".into(),
        ));
    }
    let cap = capacity_bounds(inst);
    let (r1s, r2s) = grid.targets(cap.c1, cap.c2);
    let cells = sweep(&r1s, &r2s, |k, l, rk1, rl2| {
        perfect_cell(inst, k, l, rk1, rl2, grid.zeta)
    });
    Ok(RegionResult::assemble(grid.k, grid.l, cells))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{leakage_rate, rate_user1, rate_user2};
    use crate::linalg::ComplexMatrix;
    use num_complex::Complex64;

    #[test]
    fn zero_targets_leak_nothing() {
        let inst = SystemInstance::reference(3.0);
        let s = min_leakage_at_rates(&inst, 0.0, 0.0, 1e-4).unwrap();
        assert!(s.t_min <= 1e-4);
    }

    #[test]
    fn full_rate_without_eavesdropper_path() {
        let mut inst = SystemInstance::reference(3.0);
        inst.z1 = ComplexMatrix::row_vector(&[Complex64::new(0.0, 0.0); 2]);
        let c1 = capacity_bounds(&inst).c1;
        let s = min_leakage_at_rates(&inst, c1, 0.0, 1e-4).unwrap();
        assert!(s.t_min <= 1e-4, "{}", s.t_min);
    }

    #[test]
    fn midpoint_design_meets_targets() {
        let inst = SystemInstance::reference(3.0);
        let cap = capacity_bounds(&inst);
        let (rk1, rl2) = (cap.c1 / 2.0, cap.c2 / 2.0);
        let s = min_leakage_at_rates(&inst, rk1, rl2, 1e-4).unwrap();
        s.design.check(&inst, 1e-8).unwrap();
        assert!(rate_user1(&inst, &s.design) >= rk1 - 1e-6);
        assert!(rate_user2(&inst, &s.design) >= rl2 - 1e-6);
        assert!(leakage_rate(&inst, &s.design) <= (1.0 + s.t_min).log2() + 1e-6);
    }

    #[test]
    fn targets_beyond_capacity_are_infeasible() {
        let inst = SystemInstance::reference(3.0);
        let cap = capacity_bounds(&inst);
        let e = min_leakage_at_rates(&inst, cap.c1 * 1.01, 0.0, 1e-4).unwrap_err();
        assert!(matches!(e, Error::InfeasibleAtCapacity { .. }), "{e}");
    }

    #[test]
    fn rejects_imperfect_instances() {
        let inst =
            SystemInstance::reference(3.0).with_eps(crate::channel::ErrorBounds::uniform(0.01));
        assert!(min_leakage_at_rates(&inst, 0.1, 0.1, 1e-4).is_err());
        assert!(max_sum_secrecy(&inst, &GridSpec::default()).is_err());
    }
}
