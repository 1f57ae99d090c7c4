//! Minimum total transmit power subject to worst-case SINR floors at both
//! users and a best-case SINR cap at the eavesdropper.

use rayon::prelude::*;

use crate::channel::{AuxScalars, CovarianceDesign, SystemInstance};
use crate::error::{Error, Result};
use crate::linalg::HermitianMatrix;
use crate::perfect::with_retry;
use crate::robust::{eve_coupling, robust_blocks, user_coupling};
use crate::sdp::{solve, AffineScalar, LmiProblem, SdpSettings, SdpStatus};

/// SINR thresholds. `gamma_e = +∞` drops the eavesdropper constraint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinrSpec {
    pub gamma_e: f64,
    /// Floor at S1, which decodes the signal of S2.
    pub gamma_s1: f64,
    /// Floor at S2, which decodes the signal of S1.
    pub gamma_s2: f64,
}

impl SinrSpec {
    pub fn new(gamma_s1: f64, gamma_s2: f64, gamma_e: f64) -> Self {
        Self {
            gamma_e,
            gamma_s1,
            gamma_s2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |g: f64| g >= 0.0 && g.is_finite();
        if !ok(self.gamma_s1) || !ok(self.gamma_s2) || !(self.gamma_e >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "SINR thresholds must be nonnegative (floors finite): {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PowerSolution {
    pub total_power: f64,
    pub design: CovarianceDesign,
}

fn power_problem(inst: &SystemInstance, s: &SinrSpec) -> (LmiProblem, crate::robust::RobustVars) {
    let mut p = LmiProblem::new();
    let v = robust_blocks(&mut p, inst, true);
    if s.gamma_e.is_finite() {
        p.add_le("eve", eve_coupling(inst, &v, s.gamma_e));
    }
    p.add_le("user1", user_coupling(inst, &v, s.gamma_s2, [6, 7], 5));
    p.add_le("user2", user_coupling(inst, &v, s.gamma_s1, [9, 10], 8));
    let id1 = HermitianMatrix::identity(inst.m1);
    let id2 = HermitianMatrix::identity(inst.m2);
    let mut obj = AffineScalar::constant(0.0)
        .plus_trace(v.phi1, id1.clone())
        .plus_trace(v.phi2, id2.clone());
    if let (Some(a), Some(b)) = (v.psi1, v.psi2) {
        obj = obj.plus_trace(a, id1).plus_trace(b, id2);
    }
    p.minimize(obj);
    (p, v)
}

fn min_power_with(
    inst: &SystemInstance,
    s: &SinrSpec,
    settings: &SdpSettings,
) -> Result<PowerSolution> {
    let (p, v) = power_problem(inst, s);
    let sol = solve(&p, settings)?;
    match sol.status {
        SdpStatus::Optimal => {
            let design = v.design(inst, &sol);
            Ok(PowerSolution {
                total_power: sol.objective,
                design,
            })
        }
        SdpStatus::Infeasible => Err(Error::Infeasible {
            margin: sol.infeasibility_margin,
        }),
        SdpStatus::NumericalFailure => Err(Error::SolverFailure(sol.message.unwrap_or_default())),
    }
}

/// Single SDP solve. Both floors at zero are met by the all-zero design,
/// which is returned directly with exactly zero power.
pub fn min_total_power(inst: &SystemInstance, s: &SinrSpec) -> Result<PowerSolution> {
    inst.validate()?;
    s.validate()?;
    if s.gamma_s1 == 0.0 && s.gamma_s2 == 0.0 {
        let mut design = CovarianceDesign::zeros(inst.m1, inst.m2);
        design.aux = Some(AuxScalars::default());
        return Ok(PowerSolution {
            total_power: 0.0,
            design,
        });
    }
    with_retry(&SdpSettings::default(), |st| min_power_with(inst, s, st))
}

#[derive(Clone, Debug, PartialEq)]
pub enum PowerStatus {
    Optimal,
    /// Phase-I margin: how far the thresholds are from feasible.
    Infeasible(f64),
    Failed(String),
}

impl PowerStatus {
    pub fn label(&self) -> &'static str {
        match self {
            PowerStatus::Optimal => "optimal",
            PowerStatus::Infeasible(_) => "infeasible",
            PowerStatus::Failed(_) => "failed",
        }
    }
}

#[derive(Clone, Debug)]
pub struct PowerPoint {
    pub spec: SinrSpec,
    /// `NaN` unless optimal.
    pub total_power: f64,
    pub design: Option<CovarianceDesign>,
    pub status: PowerStatus,
}

/// Total power for symmetric floors `gamma_s1 = gamma_s2 = f` over `floors`.
pub fn power_vs_sinr_sweep(inst: &SystemInstance, floors: &[f64], gamma_e: f64) -> Vec<PowerPoint> {
    floors
        .par_iter()
        .map(|&f| {
            let spec = SinrSpec::new(f, f, gamma_e);
            match min_total_power(inst, &spec) {
                Ok(s) => PowerPoint {
                    spec,
                    total_power: s.total_power,
                    design: Some(s.design),
                    status: PowerStatus::Optimal,
                },
                Err(e) => PowerPoint {
                    spec,
                    total_power: f64::NAN,
                    design: None,
                    status: match e {
                        Error::Infeasible { margin } => PowerStatus::Infeasible(margin),
                        e => PowerStatus::Failed(e.to_string()),
                    },
                },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{capacity_bounds, worst_case_sinr_mc, ErrorBounds};

    fn inst(db: f64) -> SystemInstance {
        SystemInstance::reference(db).with_eps(ErrorBounds::uniform(0.02))
    }

    #[test]
    fn zero_floors_zero_power() {
        let s = min_total_power(&inst(3.0), &SinrSpec::new(0.0, 0.0, 0.1)).unwrap();
        assert_eq!(s.total_power, 0.0);
        assert_eq!(s.design.power1() + s.design.power2(), 0.0);
    }

    #[test]
    fn single_link_at_worst_case_capacity_uses_full_budget() {
        let i = inst(3.0);
        let c1 = capacity_bounds(&i).c1;
        let s = min_total_power(&i, &SinrSpec::new(0.0, c1.exp2() - 1.0, f64::INFINITY)).unwrap();
        assert!((s.total_power - i.p1).abs() < 1e-5, "{}", s.total_power);
        assert!(s.design.power2() < 1e-6);
    }

    #[test]
    fn design_passes_sampled_validation() {
        let i = inst(6.0);
        let spec = SinrSpec::new(1.0, 1.0, 0.1);
        let s = min_total_power(&i, &spec).unwrap();
        s.design.check(&i, 1e-7).unwrap();
        assert!(s.total_power <= i.p1 + i.p2 + 1e-8);
        let env = worst_case_sinr_mc(&i, &s.design, 10_000, 3);
        assert!(env.user1_min >= spec.gamma_s2 - 1e-6, "{env:?}");
        assert!(env.user2_min >= spec.gamma_s1 - 1e-6, "{env:?}");
        assert!(env.eve_max <= spec.gamma_e + 1e-6, "{env:?}");
    }

    #[test]
    fn infeasible_reports_margin() {
        let i = inst(3.0);
        let e = min_total_power(&i, &SinrSpec::new(1.0, 1.0, 0.1)).unwrap_err();
        assert!(
            matches!(e, Error::Infeasible { margin } if margin > 0.0),
            "{e}"
        );
    }

    #[test]
    fn sweep_is_monotone() {
        let i = inst(6.0);
        let floors = [0.0, 0.25, 0.5, 1.0, 1.2];
        let pts = power_vs_sinr_sweep(&i, &floors, f64::INFINITY);
        assert_eq!(pts[0].total_power, 0.0);
        let powers: Vec<f64> = pts.iter().map(|p| p.total_power).collect();
        assert!(
            pts.iter().all(|p| p.status == PowerStatus::Optimal),
            "{pts:?}"
        );
        assert!(powers.windows(2).all(|w| w[1] >= w[0] - 1e-7), "{powers:?}");
        let c2 = capacity_bounds(&i).c2;
        let above = power_vs_sinr_sweep(&i, &[c2.exp2() - 1.0 + 0.05], f64::INFINITY);
        assert!(matches!(above[0].status, PowerStatus::Infeasible(_)));
    }
}
