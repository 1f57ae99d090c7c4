//! KKT conditions (a1)–(a15) of the perfect-CSI leakage minimization and
//! the rank structure they imply.
//!
//! The leakage problem is a fractional program. At its optimum `t*` the
//! convex problem `min zΦz − t*(N0 + zΨz)` over the same constraints has
//! optimal value 0, and its multipliers scaled by `μ = 1/(N0 + zΨz)` are the
//! KKT multipliers. [`kkt_certificate`] finds `t*` by Dinkelbach iteration
//! started from the bisection level and reads the multipliers off the final
//! SDP solve.

use crate::channel::{capacity_bounds, CovarianceDesign, SystemInstance};
use crate::error::{Error, Result};
use crate::linalg::{numerical_rank_scaled, quadratic_form, ComplexMatrix, HermitianMatrix};
use crate::perfect::{add_rate_constraints, leakage_expr, sinr_of_rate, CovVars};
use crate::sdp::{solve, ConstraintId, DualValue, LmiProblem, SdpSettings, SdpSolution, SdpStatus};

/// Multipliers of the Lagrangian: `lambda*` for the power budgets, `mu`
/// for the leakage constraint, `nu*` for the rate constraints, `A*`, `B*`
/// for the PSD constraints on `Φ*`, `Ψ*`.
#[derive(Clone, Debug)]
pub struct KktDuals {
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub a1: HermitianMatrix,
    pub b1: HermitianMatrix,
    pub a2: HermitianMatrix,
    pub b2: HermitianMatrix,
}

/// Residuals of (a1)–(a15); `values[i]` belongs to condition `a{i+1}`.
#[derive(Clone, Debug)]
pub struct KktReport {
    pub values: [f64; 15],
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(*v))
    }

    /// Condition label and residual, e.g. `("a4", 1e-9)`.
    pub fn entries(&self) -> impl Iterator<Item = (String, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| (format!("a{}", i + 1), *v))
    }
}

fn qf(v: &ComplexMatrix, m: &HermitianMatrix) -> f64 {
    quadratic_form(v, m).expect("design dimensions match the instance")
}

fn leak_parts(inst: &SystemInstance, d: &CovarianceDesign) -> (f64, f64) {
    let num = qf(&inst.z1, &d.phi1) + qf(&inst.z2, &d.phi2);
    let den = inst.n0 + qf(&inst.z1, &d.psi1) + qf(&inst.z2, &d.psi2);
    (num, den)
}

fn rate_gaps(inst: &SystemInstance, d: &CovarianceDesign, rk1: f64, rl2: f64) -> (f64, f64) {
    let g1 = sinr_of_rate(rk1) * (inst.n0 + qf(&inst.h21, &d.psi1)) - qf(&inst.h21, &d.phi1);
    let g2 = sinr_of_rate(rl2) * (inst.n0 + qf(&inst.h12, &d.psi2)) - qf(&inst.h12, &d.phi2);
    (g1, g2)
}

fn neg_eig(m: &HermitianMatrix) -> f64 {
    m.min_eigenvalue()
        .map(|e| (-e).max(0.0))
        .unwrap_or(f64::INFINITY)
}

fn frob(a: &HermitianMatrix, b: &HermitianMatrix) -> f64 {
    a.sub(b)
        .map(|d| d.frobenius_norm())
        .unwrap_or(f64::INFINITY)
}

/// Evaluates (a1)–(a15) at leakage level `t`. Complementary-slackness
/// conditions are reported as absolute products; (a4)–(a7) as
/// `|tr(A Φ)|`; the stationarity conditions (a12)–(a15) as the Frobenius
/// distance between the supplied PSD multiplier and the closed form, plus
/// any negative eigenvalue of the multiplier.
pub fn kkt_residuals(
    inst: &SystemInstance,
    rk1: f64,
    rl2: f64,
    t: f64,
    d: &CovarianceDesign,
    k: &KktDuals,
) -> Result<KktReport> {
    let (num, den) = leak_parts(inst, d);
    let (g1, g2) = rate_gaps(inst, d, rk1, rl2);
    let pw1 = d.power1() - inst.p1;
    let pw2 = d.power2() - inst.p2;
    let mut v = [0.0; 15];

    let primal = [num - t * den, g1, g2, pw1, pw2]
        .into_iter()
        .fold(0.0_f64, |m, x| m.max(x));
    let psd = [&d.phi1, &d.psi1, &d.phi2, &d.psi2]
        .into_iter()
        .fold(0.0_f64, |m, x| m.max(neg_eig(x)));
    let duals_sign = [k.lambda1, k.lambda2, k.mu, k.nu1, k.nu2]
        .into_iter()
        .fold(0.0_f64, |m, x| m.max(-x));
    v[0] = primal.max(psd).max(duals_sign);
    v[1] = (k.lambda1 * pw1).abs();
    v[2] = (k.lambda2 * pw2).abs();
    v[3] = k.a1.inner_product(&d.phi1)?.abs();
    v[4] = k.b1.inner_product(&d.psi1)?.abs();
    v[5] = k.a2.inner_product(&d.phi2)?.abs();
    v[6] = k.b2.inner_product(&d.psi2)?.abs();
    v[7] = (k.mu * (num - t * den)).abs();
    v[8] = (k.nu1 * g1).abs();
    v[9] = (k.nu2 * g2).abs();
    v[10] = (k.mu * den - 1.0).abs();

    let id1 = HermitianMatrix::identity(inst.m1);
    let id2 = HermitianMatrix::identity(inst.m2);
    let (z1, z2) = (inst.z1.outer(), inst.z2.outer());
    let (h21, h12) = (inst.h21.outer(), inst.h12.outer());
    let form = |l: f64,
                id: &HermitianMatrix,
                z: &HermitianMatrix,
                zw: f64,
                h: &HermitianMatrix,
                hw: f64| {
        id.scale(l)
            .add(&z.scale(zw))
            .and_then(|m| m.add(&h.scale(hw)))
    };
    let g1c = sinr_of_rate(rk1);
    let g2c = sinr_of_rate(rl2);
    let a1 = form(k.lambda1, &id1, &z1, k.mu, &h21, -k.nu1)?;
    let b1 = form(k.lambda1, &id1, &z1, -k.mu * t, &h21, k.nu1 * g1c)?;
    let a2 = form(k.lambda2, &id2, &z2, k.mu, &h12, -k.nu2)?;
    let b2 = form(k.lambda2, &id2, &z2, -k.mu * t, &h12, k.nu2 * g2c)?;
    v[11] = frob(&a1, &k.a1) + neg_eig(&k.a1);
    v[12] = frob(&b1, &k.b1) + neg_eig(&k.b1);
    v[13] = frob(&a2, &k.a2) + neg_eig(&k.a2);
    v[14] = frob(&b2, &k.b2) + neg_eig(&k.b2);
    Ok(KktReport { values: v })
}

/// A KKT point of the leakage problem: the optimal level `t`, a design
/// attaining it, and its multipliers.
#[derive(Clone, Debug)]
pub struct KktCertificate {
    pub t: f64,
    pub design: CovarianceDesign,
    pub duals: KktDuals,
    /// Dinkelbach iterations (one SDP solve each).
    pub iterations: usize,
}

struct Handles {
    cov: CovVars,
    rate1: ConstraintId,
    rate2: ConstraintId,
}

fn dinkelbach_problem(inst: &SystemInstance, rk1: f64, rl2: f64, t: f64) -> (LmiProblem, Handles) {
    let mut p = LmiProblem::new();
    let cov = CovVars::declare(&mut p, inst);
    let (rate1, rate2) = add_rate_constraints(&mut p, inst, &cov, rk1, rl2);
    p.minimize(leakage_expr(inst, &cov, t));
    (p, Handles { cov, rate1, rate2 })
}

fn scalar_dual(sol: &SdpSolution, id: ConstraintId) -> Result<f64> {
    sol.dual(id)
        .and_then(DualValue::as_scalar)
        .ok_or_else(|| Error::MissingDuals(format!("{id:?}")))
}

fn matrix_dual(sol: &SdpSolution, id: ConstraintId) -> Result<HermitianMatrix> {
    sol.dual(id)
        .and_then(DualValue::as_matrix)
        .cloned()
        .ok_or_else(|| Error::MissingDuals(format!("{id:?}")))
}

/// Reads KKT multipliers from a solved Dinkelbach problem; errors when the
/// solution carries no duals.
fn duals_from(sol: &SdpSolution, h: &Handles, den: f64) -> Result<KktDuals> {
    if !sol.has_duals() {
        return Err(Error::MissingDuals(
            "solution has no dual certificate".into(),
        ));
    }
    let mu = 1.0 / den;
    let c = &h.cov;
    let m = |v| matrix_dual(sol, ConstraintId::MatrixDomain(v)).map(|a| a.scale(mu));
    Ok(KktDuals {
        lambda1: mu * scalar_dual(sol, c.power1)?,
        lambda2: mu * scalar_dual(sol, c.power2)?,
        mu,
        nu1: mu * scalar_dual(sol, h.rate1)?,
        nu2: mu * scalar_dual(sol, h.rate2)?,
        a1: m(c.phi1)?,
        b1: m(c.psi1)?,
        a2: m(c.phi2)?,
        b2: m(c.psi2)?,
    })
}

/// Solves with a tight duality gap, since rank tests read the small
/// eigenvalues of the solution. Problems whose feasible set has no interior
/// (rate targets at capacity) may not reach it; those fall back to looser
/// gaps.
fn solve_tight(p: &LmiProblem) -> Result<SdpSolution> {
    let mut last = None;
    for gap_tol in [1e-11, 1e-9, 1e-7] {
        let settings = SdpSettings {
            gap_tol,
            ..SdpSettings::default()
        };
        let sol = solve(p, &settings)?;
        if sol.status != SdpStatus::NumericalFailure {
            return Ok(sol);
        }
        last = Some(sol);
    }
    Ok(last.expect("at least one attempt"))
}

/// Dinkelbach iteration from `t_start` (any level at or above the optimum,
/// typically the bisection result) to the optimal leakage level.
pub fn kkt_certificate(
    inst: &SystemInstance,
    rk1: f64,
    rl2: f64,
    t_start: f64,
) -> Result<KktCertificate> {
    let cap = capacity_bounds(inst);
    if (rk1 > 0.0 && rk1 >= cap.c1 * (1.0 - 1e-12)) || (rl2 > 0.0 && rl2 >= cap.c2 * (1.0 - 1e-12))
    {
        return Err(Error::NoStrictlyFeasiblePoint(format!(
            "targets ({rk1:.6}, {rl2:.6}) reach the capacities ({:.6}, {:.6})",
            cap.c1, cap.c2
        )));
    }
    let mut t = t_start.max(0.0);
    for iterations in 1..=30 {
        let (p, h) = dinkelbach_problem(inst, rk1, rl2, t);
        let sol = solve_tight(&p)?;
        match sol.status {
            SdpStatus::Optimal => {}
            SdpStatus::Infeasible => return Err(Error::InfeasibleAtCapacity { rk1, rl2 }),
            SdpStatus::NumericalFailure => {
                return Err(Error::SolverFailure(sol.message.unwrap_or_default()))
            }
        }
        let design = h.cov.design(&sol);
        let (num, den) = leak_parts(inst, &design);
        let ratio = num / den;
        if t - ratio <= 1e-10 * (1.0 + t) || iterations == 30 {
            let duals = duals_from(&sol, &h, den)?;
            return Ok(KktCertificate {
                t,
                design,
                duals,
                iterations,
            });
        }
        t = ratio.max(0.0);
    }
    unreachable!("the loop returns on its last iteration")
}

/// Outcome of one rank prediction.
#[derive(Clone, Debug, PartialEq)]
pub enum RankOutcome {
    Pass,
    Fail(String),
    /// The prediction does not apply (zero covariance).
    Vacuous,
    /// Excluded from the check (collinear channels).
    Excluded,
    /// The rank test failed but the multiplier that forces it lies inside
    /// the dead band, so the case analysis is not decisive.
    Indeterminate(String),
}

impl RankOutcome {
    pub fn is_fail(&self) -> bool {
        matches!(self, RankOutcome::Fail(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            RankOutcome::Pass => "pass",
            RankOutcome::Fail(_) => "fail",
            RankOutcome::Vacuous => "vacuous",
            RankOutcome::Excluded => "excluded",
            RankOutcome::Indeterminate(_) => "indeterminate",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RankReport {
    pub user1: RankOutcome,
    pub user2: RankOutcome,
}

/// Multiplier threshold separating the two branches of the rank analysis.
pub const DUAL_MARGIN: f64 = 1e-6;
/// Relative eigenvalue threshold for numerical rank.
pub const RANK_TOL: f64 = 1e-6;
const COLLINEAR: f64 = 1.0 - 1e-8;

#[allow(clippy::too_many_arguments)]
fn rank_user(
    lambda: f64,
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    phi: &HermitianMatrix,
    psi: &HermitianMatrix,
    z: &ComplexMatrix,
    h: &ComplexMatrix,
    power: f64,
    t: f64,
    zeta: f64,
) -> Result<RankOutcome> {
    // Thresholds scale with the budget: solver noise is absolute, so a
    // nearly-zero covariance must not be judged relative to its own trace.
    let scale = power.max(1e-300);
    let nonzero = |m: &HermitianMatrix| m.trace() > RANK_TOL * scale;
    let rank = |m: &HermitianMatrix| numerical_rank_scaled(m, RANK_TOL, scale);
    if !nonzero(phi) {
        return Ok(RankOutcome::Vacuous);
    }
    let m = phi.dim();
    if lambda > DUAL_MARGIN {
        // Rank one follows from rank(multiplier) = M − 1, i.e. its second
        // smallest eigenvalue clearly positive.
        let decisive = |mult: &HermitianMatrix| -> Result<bool> {
            let ev = crate::linalg::hermitian_eigen(mult)?.values;
            Ok(ev.len() < 2 || ev[1] > DUAL_MARGIN)
        };
        let r = rank(phi)?;
        if r != 1 {
            let msg = format!("lambda > 0 but rank(Phi) = {r}");
            return Ok(if decisive(a)? {
                RankOutcome::Fail(msg)
            } else {
                RankOutcome::Indeterminate(msg)
            });
        }
        if t > zeta && nonzero(psi) {
            let r = rank(psi)?;
            if r != 1 {
                let msg = format!("lambda > 0, t > 0 but rank(Psi) = {r}");
                return Ok(if decisive(b)? {
                    RankOutcome::Fail(msg)
                } else {
                    RankOutcome::Indeterminate(msg)
                });
            }
        }
        return Ok(RankOutcome::Pass);
    }
    if z.alignment(h) > COLLINEAR {
        return Ok(RankOutcome::Excluded);
    }
    let r = rank(phi)?;
    if r > m.saturating_sub(1) {
        return Ok(RankOutcome::Fail(format!("lambda = 0 but rank(Phi) = {r}")));
    }
    // Energy of Phi along z, relative to its total energy (or the budget).
    let along = quadratic_form(z, phi)? / (z.norm_sqr().max(1e-300) * phi.trace().max(scale));
    if along > RANK_TOL {
        return Ok(RankOutcome::Fail(format!(
            "lambda = 0 but Phi leaks {along:.3e} along z"
        )));
    }
    if t > 2.0 * zeta {
        return Ok(RankOutcome::Fail(format!("lambda = 0 but t = {t:.3e}")));
    }
    Ok(RankOutcome::Pass)
}

/// Tests the rank predictions on a certificate. Violations are reported,
/// not returned as errors.
pub fn rank_check(inst: &SystemInstance, c: &KktCertificate, zeta: f64) -> Result<RankReport> {
    let d = &c.design;
    Ok(RankReport {
        user1: rank_user(
            c.duals.lambda1,
            &c.duals.a1,
            &c.duals.b1,
            &d.phi1,
            &d.psi1,
            &inst.z1,
            &inst.h21,
            inst.p1,
            c.t,
            zeta,
        )?,
        user2: rank_user(
            c.duals.lambda2,
            &c.duals.a2,
            &c.duals.b2,
            &d.phi2,
            &d.psi2,
            &inst.z2,
            &inst.h12,
            inst.p2,
            c.t,
            zeta,
        )?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::capacity_bounds;
    use crate::perfect::min_leakage_at_rates;

    fn certified(rk1_frac: f64, rl2_frac: f64) -> (SystemInstance, f64, f64, KktCertificate) {
        let inst = SystemInstance::reference(3.0);
        let cap = capacity_bounds(&inst);
        let (rk1, rl2) = (rk1_frac * cap.c1, rl2_frac * cap.c2);
        let s = min_leakage_at_rates(&inst, rk1, rl2, 1e-4).unwrap();
        let c = kkt_certificate(&inst, rk1, rl2, s.t_min).unwrap();
        assert!(
            c.t <= s.t_min + 1e-12 && c.t >= s.t_min - 2e-4,
            "{} vs {}",
            c.t,
            s.t_min
        );
        (inst, rk1, rl2, c)
    }

    #[test]
    fn zero_power_residuals_vanish() {
        let inst = SystemInstance::reference(3.0).with_power(0.0, 0.0);
        let d = CovarianceDesign::zeros(2, 2);
        let k = KktDuals {
            lambda1: 0.3,
            lambda2: 0.2,
            mu: 1.0 / inst.n0,
            nu1: 0.1,
            nu2: 0.4,
            a1: HermitianMatrix::identity(2),
            b1: HermitianMatrix::identity(2),
            a2: HermitianMatrix::identity(2),
            b2: HermitianMatrix::identity(2),
        };
        let r = kkt_residuals(&inst, 0.0, 0.0, 0.0, &d, &k).unwrap();
        for i in 0..11 {
            assert_eq!(r.values[i], 0.0, "a{}", i + 1);
        }
    }

    #[test]
    fn solved_cell_satisfies_kkt() {
        let (inst, rk1, rl2, c) = certified(0.7, 0.6);
        let r = kkt_residuals(&inst, rk1, rl2, c.t, &c.design, &c.duals).unwrap();
        assert!(r.max() <= 1e-6, "{r:?}");
        assert!(c.duals.lambda1 > DUAL_MARGIN);
        let rank = rank_check(&inst, &c, 1e-4).unwrap();
        assert_eq!(rank.user1, RankOutcome::Pass);
        assert!(!rank.user2.is_fail(), "{rank:?}");
    }

    #[test]
    fn perturbation_breaks_power_slackness() {
        let (inst, rk1, rl2, c) = certified(0.99, 0.99);
        let mut d = c.design.clone();
        d.phi1 = d
            .phi1
            .add(&HermitianMatrix::identity(2).scale(0.01))
            .unwrap();
        let r = kkt_residuals(&inst, rk1, rl2, c.t, &d, &c.duals).unwrap();
        assert!(r.values[1] > 1e-4, "{r:?}");
    }

    #[test]
    fn zero_leakage_cell() {
        let (inst, rk1, rl2, c) = certified(0.1, 0.1);
        let r = kkt_residuals(&inst, rk1, rl2, c.t, &c.design, &c.duals).unwrap();
        assert!(r.max() <= 1e-6, "{r:?}");
        let rank = rank_check(&inst, &c, 1e-4).unwrap();
        assert!(
            !rank.user1.is_fail() && !rank.user2.is_fail(),
            "{rank:?} {:?}",
            c.duals
        );
    }

    #[test]
    fn missing_duals_is_an_error() {
        let inst = SystemInstance::reference(3.0);
        let (p, h) = dinkelbach_problem(&inst, 0.1, 0.1, 0.0);
        let sol = crate::sdp::find_feasible(&p, &SdpSettings::default()).unwrap();
        assert!(matches!(
            duals_from(&sol, &h, 1.0),
            Err(Error::MissingDuals(_))
        ));
    }

    #[test]
    fn collinear_channels_are_excluded() {
        let mut inst = SystemInstance::reference(3.0);
        inst.z1 = inst.h21.scale(0.1);
        let phi = inst.h21.outer();
        let id = HermitianMatrix::identity(2);
        let out = rank_user(
            0.0,
            &id,
            &id,
            &phi,
            &HermitianMatrix::zeros(2),
            &inst.z1,
            &inst.h21,
            2.0,
            0.0,
            1e-4,
        )
        .unwrap();
        assert_eq!(out, RankOutcome::Excluded);
        let zero = HermitianMatrix::zeros(2);
        let out = rank_user(
            1.0, &id, &id, &zero, &zero, &inst.z1, &inst.h21, 2.0, 0.0, 1e-4,
        )
        .unwrap();
        assert_eq!(out, RankOutcome::Vacuous);
    }

    #[test]
    fn capacity_targets_have_no_interior() {
        let inst = SystemInstance::reference(3.0);
        let c1 = capacity_bounds(&inst).c1;
        let e = kkt_certificate(&inst, c1, 0.2, 1.0).unwrap_err();
        assert!(matches!(e, Error::NoStrictlyFeasiblePoint(_)), "{e}");
    }
}
