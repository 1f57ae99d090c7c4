//! Worst-case sum secrecy rate under norm-bounded CSI errors.
//!
//! Every fractional rate expression is split into a numerator and a
//! denominator that are bounded separately over their own error balls. Each
//! "quadratic form ≥ / ≤ scalar for all errors in a ball" condition becomes
//! one LMI through the S-procedure, with auxiliary scalars `t1…t10` and
//! multipliers `λ1…λ10`.

use crate::channel::{
    capacity_bounds, worst_case_rates_mc, AuxScalars, CovarianceDesign, ErrorBounds, SystemInstance,
};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, HermitianMatrix};
use crate::perfect::{cell_from_error, sinr_of_rate, with_retry};
use crate::region::{bisect, sweep, CellStatus, GridSpec, RegionCell, RegionResult};
use crate::sdp::{
    find_feasible, AffineHermitian, AffineScalar, ConstraintId, LmiProblem, MatVar, ScalarVar,
    SdpSettings, SdpSolution, SdpStatus,
};
use num_complex::Complex64;

/// Upper bound placed on every auxiliary scalar and multiplier. Keeps the
/// feasible set bounded; far above any value a budget-limited design needs.
pub const AUX_CAP: f64 = 1e4;

/// Handles into a robust problem. `psi1`, `psi2` and the jamming-related
/// scalars `t3, t4, t7, t10` are absent when jamming is disabled.
#[derive(Clone, Debug)]
pub struct RobustVars {
    pub phi1: MatVar,
    pub psi1: Option<MatVar>,
    pub phi2: MatVar,
    pub psi2: Option<MatVar>,
    /// `t[i]` holds `t_{i+1}`.
    pub t: [Option<ScalarVar>; 10],
    pub lambda: [Option<ScalarVar>; 10],
    pub blocks: [Option<ConstraintId>; 10],
    pub power1: ConstraintId,
    pub power2: ConstraintId,
}

impl RobustVars {
    /// Design with the auxiliary scalars attached (absent ones read as 0).
    pub fn design(&self, inst: &SystemInstance, sol: &SdpSolution) -> CovarianceDesign {
        let read = |v: &Option<ScalarVar>| v.map(|v| sol.scalar(v)).unwrap_or(0.0);
        let mut aux = AuxScalars::default();
        for i in 0..10 {
            aux.t[i] = read(&self.t[i]);
            aux.lambda[i] = read(&self.lambda[i]);
        }
        let mat = |v: Option<MatVar>, m: usize| {
            v.map(|v| sol.matrix(v))
                .unwrap_or_else(|| HermitianMatrix::zeros(m))
        };
        CovarianceDesign {
            phi1: sol.matrix(self.phi1),
            psi1: mat(self.psi1, inst.m1),
            phi2: sol.matrix(self.phi2),
            psi2: mat(self.psi2, inst.m2),
            aux: Some(aux),
        }
    }

    fn t_expr(&self, idx: &[usize], w: f64) -> AffineScalar {
        idx.iter()
            .fold(AffineScalar::constant(0.0), |e, &i| match self.t[i - 1] {
                Some(v) => e.plus(v, w),
                None => e,
            })
    }
}

/// `[I; v]`, or `[I; 0]` when `v` is `None`: the `(m+1) × m` lifting that
/// turns `(v + e) X (v + e)*` into a quadratic form in `[e, 1]`.
fn lift(m: usize, v: Option<&ComplexMatrix>) -> ComplexMatrix {
    let mut entries = vec![Complex64::new(0.0, 0.0); (m + 1) * m];
    for i in 0..m {
        entries[i * m + i] = Complex64::new(1.0, 0.0);
    }
    if let Some(v) = v {
        entries[m * m..].copy_from_slice(&v.row_major());
    }
    ComplexMatrix::from_row_major(m + 1, m, &entries).expect("lift dimensions")
}

fn corner(m: usize, w: f64) -> HermitianMatrix {
    let mut d = vec![0.0; m + 1];
    d[m] = w;
    HermitianMatrix::from_real_diagonal(&d)
}

fn ball(m: usize, eps: f64) -> HermitianMatrix {
    let mut d = vec![1.0; m + 1];
    d[m] = -eps * eps;
    HermitianMatrix::from_real_diagonal(&d)
}

/// One S-procedure block
/// `Σ w·G X G* + λ·diag(I, −ε²) + s·t·e_last ⪰ 0`. For `ε = 0` the error
/// ball is a point and the block is its `1 × 1` corner, the nominal
/// quadratic constraint, with no multiplier.
fn s_block(
    m: usize,
    v: Option<&ComplexMatrix>,
    mats: &[(MatVar, f64)],
    lambda: Option<ScalarVar>,
    eps: f64,
    t: Option<(ScalarVar, f64)>,
) -> AffineHermitian {
    let (g, dim) = match lambda {
        Some(_) => (lift(m, v), m + 1),
        None => (v.cloned().unwrap_or_else(|| ComplexMatrix::zeros(1, m)), 1),
    };
    let mut e = AffineHermitian::zeros(dim);
    if let Some(l) = lambda {
        e = e.plus_scalar(l, ball(m, eps));
    }
    for &(x, w) in mats {
        e = e.plus_congruence(x, w, g.clone());
    }
    if let Some((tv, s)) = t {
        e = e.plus_scalar(tv, corner(dim - 1, s));
    }
    e
}

/// Declares the covariances, auxiliary scalars and the ten S-procedure
/// blocks, without any of the coupling constraints.
pub fn robust_blocks(p: &mut LmiProblem, inst: &SystemInstance, jamming: bool) -> RobustVars {
    let (m1, m2) = (inst.m1, inst.m2);
    let phi1 = p.hermitian_psd("Phi1", m1);
    let psi1 = jamming.then(|| p.hermitian_psd("Psi1", m1));
    let phi2 = p.hermitian_psd("Phi2", m2);
    let psi2 = jamming.then(|| p.hermitian_psd("Psi2", m2));

    // t3, t4, t5, t8 carry printed sign constraints; t6, t9 bound PSD forms.
    let nonneg = [3, 4, 5, 6, 8, 9];
    let jam_only = [3, 4, 7, 10];
    let mut t = [None; 10];
    for i in 1..=10 {
        if !jamming && jam_only.contains(&i) {
            continue;
        }
        let name = format!("t{i}");
        t[i - 1] = Some(if nonneg.contains(&i) {
            p.nonneg(&name)
        } else {
            p.free(&name)
        });
    }
    let e = &inst.eps;
    let block_eps = [
        e.eps1, e.eps1, e.eps2, e.eps2, e.eps21, e.eps21, e.eps22, e.eps12, e.eps12, e.eps11,
    ];
    let jam_blocks = [2, 4, 6, 9];
    let mut lambda = [None; 10];
    for i in 1..=10 {
        if (jamming || !jam_blocks.contains(&i)) && block_eps[i - 1] > 0.0 {
            lambda[i - 1] = Some(p.nonneg(&format!("lambda{i}")));
        }
    }
    for v in t.iter().chain(lambda.iter()).flatten() {
        p.add_le("cap", AffineScalar::constant(-AUX_CAP).plus(*v, 1.0));
    }

    let id1 = HermitianMatrix::identity(m1);
    let id2 = HermitianMatrix::identity(m2);
    let mut power1 = AffineScalar::constant(-inst.p1).plus_trace(phi1, id1.clone());
    if let Some(x) = psi1 {
        power1 = power1.plus_trace(x, id1);
    }
    let mut power2 = AffineScalar::constant(-inst.p2).plus_trace(phi2, id2.clone());
    if let Some(x) = psi2 {
        power2 = power2.plus_trace(x, id2);
    }
    let power1 = p.add_le("power1", power1);
    let power2 = p.add_le("power2", power2);

    let tv = |i: usize, s: f64| t[i - 1].map(|v| (v, s));
    let lam = |i: usize| lambda[i - 1];
    let with_psi = |x: MatVar, psi: Option<MatVar>| -> Vec<(MatVar, f64)> {
        std::iter::once((x, -1.0))
            .chain(psi.map(|y| (y, -1.0)))
            .collect()
    };

    let mut blocks = [None; 10];
    // Eavesdropper numerator, upper bounds t1, t2.
    blocks[0] = Some(p.add_lmi(
        "S1",
        s_block(
            m1,
            Some(&inst.z1),
            &[(phi1, -1.0)],
            lam(1),
            e.eps1,
            tv(1, 1.0),
        ),
    ));
    blocks[2] = Some(p.add_lmi(
        "S3",
        s_block(
            m2,
            Some(&inst.z2),
            &[(phi2, -1.0)],
            lam(3),
            e.eps2,
            tv(2, 1.0),
        ),
    ));
    // Eavesdropper jamming, lower bounds t3, t4.
    if let Some(x) = psi1 {
        blocks[1] = Some(p.add_lmi(
            "S2",
            s_block(m1, Some(&inst.z1), &[(x, 1.0)], lam(2), e.eps1, tv(3, -1.0)),
        ));
    }
    if let Some(x) = psi2 {
        blocks[3] = Some(p.add_lmi(
            "S4",
            s_block(m2, Some(&inst.z2), &[(x, 1.0)], lam(4), e.eps2, tv(4, -1.0)),
        ));
    }
    // User 1: signal lower bound t5, self-noise t6, jamming t7.
    blocks[4] = Some(p.add_lmi(
        "S5",
        s_block(
            m1,
            Some(&inst.h21),
            &[(phi1, 1.0)],
            lam(5),
            e.eps21,
            tv(5, -1.0),
        ),
    ));
    if let Some(x) = psi1 {
        blocks[5] = Some(p.add_lmi(
            "S6",
            s_block(
                m1,
                Some(&inst.h21),
                &[(x, -1.0)],
                lam(6),
                e.eps21,
                tv(7, 1.0),
            ),
        ));
    }
    blocks[6] = Some(p.add_lmi(
        "S7",
        s_block(m2, None, &with_psi(phi2, psi2), lam(7), e.eps22, tv(6, 1.0)),
    ));
    // User 2: signal lower bound t8, self-noise t9, jamming t10.
    blocks[7] = Some(p.add_lmi(
        "S8",
        s_block(
            m2,
            Some(&inst.h12),
            &[(phi2, 1.0)],
            lam(8),
            e.eps12,
            tv(8, -1.0),
        ),
    ));
    if let Some(x) = psi2 {
        blocks[8] = Some(p.add_lmi(
            "S9",
            s_block(
                m2,
                Some(&inst.h12),
                &[(x, -1.0)],
                lam(9),
                e.eps12,
                tv(10, 1.0),
            ),
        ));
    }
    blocks[9] = Some(p.add_lmi(
        "S10",
        s_block(
            m1,
            None,
            &with_psi(phi1, psi1),
            lam(10),
            e.eps11,
            tv(9, 1.0),
        ),
    ));

    RobustVars {
        phi1,
        psi1,
        phi2,
        psi2,
        t,
        lambda,
        blocks,
        power1,
        power2,
    }
}

/// `g·(N0 + t_a + t_b) − t_s ≤ 0`.
pub(crate) fn user_coupling(
    inst: &SystemInstance,
    v: &RobustVars,
    g: f64,
    noise: [usize; 2],
    signal: usize,
) -> AffineScalar {
    let mut e = v.t_expr(&noise, g).plus_constant(g * inst.n0);
    if let Some(s) = v.t[signal - 1] {
        e = e.plus(s, -1.0);
    }
    e
}

/// `(t1 + t2) − t·(N0 + t3 + t4) ≤ 0`.
pub(crate) fn eve_coupling(inst: &SystemInstance, v: &RobustVars, t: f64) -> AffineScalar {
    let mut e = v.t_expr(&[1, 2], 1.0).plus_constant(-t * inst.n0);
    for s in v.t_expr(&[3, 4], -t).scalars {
        e = e.plus(s.0, s.1);
    }
    e
}

fn build(
    inst: &SystemInstance,
    rk1: f64,
    rl2: f64,
    t: f64,
    jamming: bool,
) -> (LmiProblem, RobustVars) {
    let mut p = LmiProblem::new();
    let v = robust_blocks(&mut p, inst, jamming);
    p.add_le("eve", eve_coupling(inst, &v, t));
    p.add_le(
        "user1",
        user_coupling(inst, &v, sinr_of_rate(rk1), [6, 7], 5),
    );
    p.add_le(
        "user2",
        user_coupling(inst, &v, sinr_of_rate(rl2), [9, 10], 8),
    );
    (p, v)
}

/// Feasibility problem at leakage level `t` with jamming enabled.
pub fn build_robust_lmis(
    inst: &SystemInstance,
    rk1: f64,
    rl2: f64,
    t: f64,
) -> (LmiProblem, RobustVars) {
    build(inst, rk1, rl2, t, true)
}

/// Result of [`robust_min_leakage`].
#[derive(Clone, Debug)]
pub struct RobustCell {
    pub rk1_target: f64,
    pub rl2_target: f64,
    pub t_min: f64,
    /// Worst-case rate lower bounds `log2(1 + t5/(N0+t6+t7))`, `log2(1 + t8/(N0+t9+t10))`.
    pub r1_lower: f64,
    pub r2_lower: f64,
    /// Best-case leakage upper bound `log2(1 + t_min)`.
    pub re_upper: f64,
    pub sum_lower: f64,
    pub design: CovarianceDesign,
    pub solves: usize,
}

/// Replaces `t5`, `t8` by the smallest values their couplings allow.
/// Lowering a signal bound keeps its block feasible, and makes the reported
/// rate bounds equal to the targets instead of solver-dependent slack.
fn canonicalize(inst: &SystemInstance, aux: &mut AuxScalars, rk1: f64, rl2: f64) {
    let t = &mut aux.t;
    t[4] = sinr_of_rate(rk1) * (inst.n0 + t[5] + t[6]);
    t[7] = sinr_of_rate(rl2) * (inst.n0 + t[8] + t[9]);
}

fn bounds(inst: &SystemInstance, aux: &AuxScalars) -> (f64, f64) {
    let t = &aux.t;
    let r1 = (1.0 + t[4] / (inst.n0 + t[5] + t[6])).log2();
    let r2 = (1.0 + t[7] / (inst.n0 + t[8] + t[9])).log2();
    (r1, r2)
}

fn feasible_design(
    inst: &SystemInstance,
    rk1: f64,
    rl2: f64,
    t: f64,
    jamming: bool,
    settings: &SdpSettings,
) -> Result<Option<CovarianceDesign>> {
    let (p, v) = build(inst, rk1, rl2, t, jamming);
    let sol = find_feasible(&p, settings)?;
    match sol.status {
        SdpStatus::Optimal => Ok(Some(v.design(inst, &sol))),
        SdpStatus::Infeasible => Ok(None),
        SdpStatus::NumericalFailure => Err(Error::SolverFailure(format!(
            "robust feasibility at t = {t:.6e}: {}",
            sol.message.unwrap_or_default()
        ))),
    }
}

fn min_leakage(
    inst: &SystemInstance,
    rk1: f64,
    rl2: f64,
    zeta: f64,
    jamming: bool,
    settings: &SdpSettings,
) -> Result<RobustCell> {
    inst.validate()?;
    if !(rk1 >= 0.0 && rl2 >= 0.0 && rk1.is_finite() && rl2.is_finite()) {
        return Err(Error::InvalidArgument(
            "rate targets must be finite and nonnegative".into(),
        ));
    }
    if !(zeta > 0.0) {
        return Err(Error::InvalidArgument("zeta must be positive".into()));
    }
    let t_hi = sinr_of_rate(capacity_bounds(inst).ce);
    let b = bisect(t_hi, zeta, rk1, rl2, |t| {
        feasible_design(inst, rk1, rl2, t, jamming, settings)
    })?;
    let mut design = b.payload;
    let aux = design
        .aux
        .as_mut()
        .expect("robust designs carry auxiliary scalars");
    canonicalize(inst, aux, rk1, rl2);
    let (r1_lower, r2_lower) = bounds(inst, aux);
    let re_upper = (1.0 + b.t_min).log2();
    Ok(RobustCell {
        rk1_target: rk1,
        rl2_target: rl2,
        t_min: b.t_min,
        r1_lower,
        r2_lower,
        re_upper,
        sum_lower: (r1_lower + r2_lower - re_upper).max(0.0),
        design,
        solves: b.solves,
    })
}

/// Smallest certified eavesdropper SINR level for the rate targets, by
/// bisection on `[0, 2^{cE} − 1]` with `cE` the best-case eavesdropper capacity.
pub fn robust_min_leakage(
    inst: &SystemInstance,
    rk1: f64,
    rl2: f64,
    zeta: f64,
) -> Result<RobustCell> {
    min_leakage(inst, rk1, rl2, zeta, true, &SdpSettings::default())
}

/// As [`robust_min_leakage`] with `Ψ1 = Ψ2 = 0` and the jamming scalars removed.
pub fn robust_min_leakage_no_jamming(
    inst: &SystemInstance,
    rk1: f64,
    rl2: f64,
    zeta: f64,
) -> Result<RobustCell> {
    min_leakage(inst, rk1, rl2, zeta, false, &SdpSettings::default())
}

fn robust_cell(
    inst: &SystemInstance,
    k: usize,
    l: usize,
    rk1: f64,
    rl2: f64,
    zeta: f64,
    jamming: bool,
) -> RegionCell {
    let cap = capacity_bounds(inst);
    if rk1 > cap.c1 || rl2 > cap.c2 {
        return RegionCell::unsolved(k, l, rk1, rl2, CellStatus::Infeasible);
    }
    match with_retry(&SdpSettings::default(), |s| {
        min_leakage(inst, rk1, rl2, zeta, jamming, s)
    }) {
        Ok(c) => RegionCell {
            k,
            l,
            r1_target: rk1,
            r2_target: rl2,
            t_min: c.t_min,
            r1: c.r1_lower,
            r2: c.r2_lower,
            re: c.re_upper,
            sum: c.sum_lower,
            design: Some(c.design),
            status: CellStatus::Converged,
            solves: c.solves,
        },
        Err(e) => cell_from_error(k, l, rk1, rl2, e),
    }
}

fn sweep_robust(inst: &SystemInstance, grid: &GridSpec, jamming: bool) -> Result<RegionResult> {
    grid.validate()?;
    inst.validate()?;
    let cap = capacity_bounds(inst);
    let (mut r1s, mut r2s) = grid.targets(cap.c1, cap.c2);
    // A zero worst-case capacity leaves only the zero target on that axis.
    if grid.range.is_none() && cap.c1 <= 0.0 {
        r1s = vec![0.0];
    }
    if grid.range.is_none() && cap.c2 <= 0.0 {
        r2s = vec![0.0];
    }
    let (k, l) = (r1s.len() - 1, r2s.len() - 1);
    let cells = sweep(&r1s, &r2s, |k, l, rk1, rl2| {
        robust_cell(inst, k, l, rk1, rl2, grid.zeta, jamming)
    });
    Ok(RegionResult::assemble(k, l, cells))
}

/// Worst-case sum secrecy lower bound over a grid spanning the worst-case
/// capacities `[0, c1] × [0, c2]` (or the grid's explicit range).
pub fn robust_max_sum_secrecy(inst: &SystemInstance, grid: &GridSpec) -> Result<RegionResult> {
    sweep_robust(inst, grid, true)
}

/// Same sweep with jamming disabled.
pub fn robust_max_sum_secrecy_no_jamming(
    inst: &SystemInstance,
    grid: &GridSpec,
) -> Result<RegionResult> {
    sweep_robust(inst, grid, false)
}

/// Without jamming each rate's numerator and denominator depend on disjoint
/// errors, so the decoupled bound is the exact worst case. This compares the
/// bound with a sampled worst case of the same design.
#[derive(Clone, Debug)]
pub struct NoJammingReport {
    /// Best no-jamming bound over the grid.
    pub bound_sum: f64,
    /// Sampled worst-case sum secrecy of the bound's design.
    pub sampled_sum: f64,
    /// `sampled_sum − bound_sum`; nonnegative up to solver tolerance, small
    /// when the sampler reaches the extremes.
    pub gap: f64,
    /// Best bound with jamming enabled.
    pub jamming_sum: f64,
    /// Whether `jamming_sum ≥ bound_sum − 1e-6`.
    pub jamming_dominates: bool,
    pub eps: ErrorBounds,
}

pub fn no_jamming_exactness(
    inst: &SystemInstance,
    grid: &GridSpec,
    samples: usize,
    seed: u64,
) -> Result<NoJammingReport> {
    let nj = robust_max_sum_secrecy_no_jamming(inst, grid)?;
    let jam = robust_max_sum_secrecy(inst, grid)?;
    let (bound_sum, sampled_sum) = match nj.best_cell() {
        Some(c) => {
            let d = c.design.as_ref().expect("converged cells carry a design");
            let w = worst_case_rates_mc(inst, d, samples, seed);
            (c.sum, (w.r1_min + w.r2_min - w.re_max).max(0.0))
        }
        None => (0.0, 0.0),
    };
    Ok(NoJammingReport {
        bound_sum,
        sampled_sum,
        gap: sampled_sum - bound_sum,
        jamming_sum: jam.sum_max,
        jamming_dominates: jam.sum_max >= bound_sum - 1e-6,
        eps: inst.eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{user1_sinr, worst_case_sinr_mc};
    use crate::perfect::min_leakage_at_rates;
    use crate::sdp::check_feasible;

    #[test]
    fn lift_shape() {
        let v = ComplexMatrix::row_vector(&[Complex64::new(1.0, 2.0), Complex64::new(3.0, -1.0)]);
        let g = lift(2, Some(&v));
        assert_eq!((g.rows(), g.cols()), (3, 2));
        assert_eq!(g.get(2, 1), Complex64::new(3.0, -1.0));
        assert_eq!(g.get(1, 1), Complex64::new(1.0, 0.0));
        assert_eq!(lift(2, None).get(2, 0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn problem_layout() {
        let inst = SystemInstance::reference(3.0).with_eps(ErrorBounds::uniform(0.02));
        let (p, v) = build_robust_lmis(&inst, 0.5, 0.3, 0.01);
        assert_eq!(p.lmi_count(), 10);
        for i in 0..10 {
            assert_eq!(p.lmi(i).1.dim(), 3);
        }
        assert!(v.blocks.iter().all(Option::is_some));
        let (p, v) = build_robust_lmis(&SystemInstance::reference(3.0), 0.5, 0.3, 0.01);
        assert_eq!(p.lmi_count(), 10);
        assert!((0..10).all(|i| p.lmi(i).1.dim() == 1));
        assert!(v.lambda.iter().all(Option::is_none));
        let (p, v) = build(&inst, 0.5, 0.3, 0.01, false);
        assert_eq!(p.lmi_count(), 6);
        assert!(v.psi1.is_none() && v.t[2].is_none() && v.t[5].is_some());
    }

    #[test]
    fn zero_everything_is_feasible() {
        let inst = SystemInstance::reference(3.0).with_eps(ErrorBounds::uniform(0.03));
        let (p, _) = build_robust_lmis(&inst, 0.0, 0.0, 0.0);
        assert!(check_feasible(&p, 1e-8).unwrap());
        let c = robust_min_leakage(&inst, 0.0, 0.0, 1e-4).unwrap();
        assert_eq!(c.t_min, 0.0);
        assert_eq!(c.re_upper, 0.0);
    }

    #[test]
    fn reduces_to_perfect_csi() {
        let inst = SystemInstance::reference(3.0);
        let cap = capacity_bounds(&inst);
        let (rk1, rl2) = (0.6 * cap.c1, 0.4 * cap.c2);
        let r = robust_min_leakage(&inst, rk1, rl2, 1e-4).unwrap();
        let p = min_leakage_at_rates(&inst, rk1, rl2, 1e-4).unwrap();
        assert!(
            (r.t_min - p.t_min).abs() <= 2e-4,
            "{} vs {}",
            r.t_min,
            p.t_min
        );
        assert!((r.r1_lower - rk1).abs() <= 1e-6);
        assert!((r.r2_lower - rl2).abs() <= 1e-6);
    }

    #[test]
    fn bounds_hold_on_samples() {
        let inst = SystemInstance::reference(3.0).with_eps(ErrorBounds::uniform(0.03));
        let cap = capacity_bounds(&inst);
        let (rk1, rl2) = (cap.c1 / 2.0, cap.c2 / 2.0);
        let c = robust_min_leakage(&inst, rk1, rl2, 1e-4).unwrap();
        c.design.check(&inst, 1e-7).unwrap();
        let aux = c.design.aux.unwrap();
        assert!(aux.lambda.iter().all(|&l| l >= -1e-9));
        let env = worst_case_sinr_mc(&inst, &c.design, 10_000, 11);
        assert!(env.user1_min >= sinr_of_rate(c.r1_lower) - 1e-6, "{env:?}");
        assert!(env.user2_min >= sinr_of_rate(c.r2_lower) - 1e-6, "{env:?}");
        assert!(env.eve_max <= sinr_of_rate(c.re_upper) + 1e-6, "{env:?}");
        let z = vec![Complex64::new(0.0, 0.0); 2];
        assert!(user1_sinr(&inst, &c.design, &z, &z) >= sinr_of_rate(rk1) - 1e-6);
    }

    #[test]
    fn zero_worst_case_capacity_collapses_axis() {
        let mut eps = ErrorBounds::uniform(0.01);
        eps.eps21 = 2.0;
        let inst = SystemInstance::reference(3.0).with_eps(eps);
        let r = robust_max_sum_secrecy(&inst, &GridSpec::new(2, 2, 1e-3).unwrap()).unwrap();
        assert_eq!(r.k, 0);
        assert_eq!(r.cells.len(), 3);
        assert!(r.cells.iter().all(|c| c.r1_target == 0.0));
    }
}
