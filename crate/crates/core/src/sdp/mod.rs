//! Small dense semidefinite programming.
//!
//! Problems are stated over complex Hermitian matrix variables and real
//! scalars with [`LmiProblem`], lowered to real symmetric blocks through the
//! standard embedding, and solved by a primal-dual interior point method.
//! Feasibility is decided by a phase-I problem that shifts every constraint
//! by a common scalar `s` and minimizes it.

mod compile;
mod ipm;
mod model;

use std::collections::HashMap;

use nalgebra::DMatrix;

pub use compile::DualValue;
pub use model::{
    AffineHermitian, AffineScalar, ConstraintId, LmiProblem, MatVar, Relation, ScalarVar, VarDecl,
    VarKind,
};

use crate::error::{Error, Result};
use crate::linalg::HermitianMatrix;
use compile::{compile, extract_duals, Compiled, Layout};
use ipm::{ConeProblem, Control, Exit, IpmParams, Iterate, LinRow};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdpSettings {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iter: usize,
    pub step_fraction: f64,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            gap_tol: 1e-7,
            max_iter: 200,
            step_fraction: 0.98,
        }
    }
}

impl SdpSettings {
    pub fn with_feas_tol(mut self, tol: f64) -> Self {
        self.feas_tol = tol;
        self
    }

    fn params(&self) -> IpmParams {
        IpmParams {
            max_iter: self.max_iter,
            step_fraction: self.step_fraction,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.feas_tol > 0.0 && self.gap_tol > 0.0) {
            return Err(Error::InvalidArgument(
                "solver tolerances must be positive".into(),
            ));
        }
        if !(self.step_fraction > 0.0 && self.step_fraction < 1.0) || self.max_iter == 0 {
            return Err(Error::InvalidArgument(
                "invalid step fraction or iteration cap".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// Objective at the returned point (0 for pure feasibility problems).
    pub objective: f64,
    /// Largest violation of any block or linear constraint at the returned point.
    pub max_violation: f64,
    /// Phase-I lower bound on the common shift needed for feasibility;
    /// positive exactly when the problem was certified infeasible.
    pub infeasibility_margin: f64,
    pub iterations: usize,
    pub message: Option<String>,
    values: Vec<f64>,
    layout: Layout,
    duals: HashMap<ConstraintId, DualValue>,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }

    pub fn matrix(&self, v: MatVar) -> HermitianMatrix {
        self.layout.matrix(&self.values, v)
    }

    pub fn scalar(&self, v: ScalarVar) -> f64 {
        self.layout.scalar(&self.values, v)
    }

    /// Raw real parameter vector (diagnostics and determinism checks).
    pub fn raw_values(&self) -> &[f64] {
        &self.values
    }

    /// Dual multiplier of a constraint; present only after an optimization
    /// (not a pure feasibility check) converged.
    pub fn dual(&self, id: ConstraintId) -> Option<&DualValue> {
        self.duals.get(&id)
    }

    pub fn has_duals(&self) -> bool {
        !self.duals.is_empty()
    }
}

/// Phase-I problem: variables `(x, s)`, every cone shifted by `s`, plus `1 + s ≥ 0`.
fn phase_one(cone: &ConeProblem) -> ConeProblem {
    let n = cone.n;
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut lin: Vec<LinRow> = cone
        .lin
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.terms.push((n, 1.0));
            r
        })
        .collect();
    lin.push(LinRow {
        f0: 1.0,
        terms: vec![(n, 1.0)],
    });
    let psd = cone
        .psd
        .iter()
        .map(|b| {
            let mut b = b.clone();
            b.terms.push((n, DMatrix::identity(b.dim(), b.dim())));
            b
        })
        .collect();
    ConeProblem {
        n: n + 1,
        c,
        lin,
        psd,
    }
}

fn start_point(
    cone: &ConeProblem,
    x: Vec<f64>,
    shift: impl Fn(f64) -> f64,
    zscale: f64,
) -> Iterate {
    let ls: Vec<f64> = (0..cone.lin.len())
        .map(|i| {
            let v = cone.lin_value(i, &x);
            v + shift(v)
        })
        .collect();
    let ps: Vec<DMatrix<f64>> = (0..cone.psd.len())
        .map(|j| {
            let m = cone.psd_value(j, &x);
            let e = ipm::min_eig(&m);
            let d = m.nrows();
            m + DMatrix::identity(d, d) * shift(e)
        })
        .collect();
    Iterate {
        x,
        lz: vec![zscale; cone.lin.len()],
        pz: cone
            .psd
            .iter()
            .map(|b| DMatrix::identity(b.dim(), b.dim()) * zscale)
            .collect(),
        ls,
        ps,
    }
}

struct PhaseOne {
    status: SdpStatus,
    x: Vec<f64>,
    margin: f64,
    iterations: usize,
    message: Option<String>,
}

fn run_phase_one(compiled: &Compiled, settings: &SdpSettings) -> PhaseOne {
    let cone = &compiled.cone;
    let n = cone.n;
    if cone.lin.is_empty() && cone.psd.is_empty() {
        return PhaseOne {
            status: SdpStatus::Optimal,
            x: vec![0.0; n],
            margin: 0.0,
            iterations: 0,
            message: None,
        };
    }
    let x0 = vec![0.0; n];
    let s0 = (-cone.min_slack(&x0)).max(0.0) + 1.0;
    let p1 = phase_one(cone);
    let mut x = x0;
    x.push(s0);
    let nu = p1.degree() as f64;
    // Feasible primal start (the shift makes every cone strictly interior);
    // the dual start satisfies the `s` row of the dual exactly.
    let mut it = start_point(&p1, x, |_| 0.0, 1.0 / nu);
    let tol = settings.feas_tol;

    let mut decision: Option<(SdpStatus, f64)> = None;
    let (exit, iters) = ipm::run(&p1, &mut it, settings.params(), |it, st| {
        let s = it.x[n];
        let xnorm: f64 = it.x.iter().map(|v| v.abs()).sum();
        let certified = st.dobj - st.dinf * (1.0 + xnorm);
        if s <= 0.5 * tol && st.pinf <= 1e-3 * tol {
            decision = Some((SdpStatus::Optimal, certified));
            return Control::Stop;
        }
        if certified > tol {
            decision = Some((SdpStatus::Infeasible, certified));
            return Control::Stop;
        }
        if st.pobj - certified <= 1e-3 * tol {
            // Converged onto the boundary between the two cases.
            let status = if s <= tol {
                SdpStatus::Optimal
            } else {
                SdpStatus::Infeasible
            };
            decision = Some((status, certified));
            return Control::Stop;
        }
        Control::Continue
    });
    let x: Vec<f64> = it.x[..n].to_vec();
    match decision {
        Some((status, margin)) => PhaseOne {
            status,
            x,
            margin,
            iterations: iters,
            message: None,
        },
        None => {
            // Accept a point whose shift already meets the tolerance.
            let viol = cone.violation(&x, &compiled.lin_offsets);
            let status = if viol <= tol {
                SdpStatus::Optimal
            } else {
                SdpStatus::NumericalFailure
            };
            PhaseOne {
                status,
                x,
                margin: f64::NAN,
                iterations: iters,
                message: Some(match exit {
                    Exit::Breakdown(m) => format!("phase-I breakdown: {m}"),
                    Exit::IterationLimit => "phase-I iteration limit".into(),
                    Exit::Stopped => "phase-I stopped".into(),
                }),
            }
        }
    }
}

fn objective_at(compiled: &Compiled, x: &[f64]) -> f64 {
    compiled.obj_const
        + compiled
            .cone
            .c
            .iter()
            .zip(x)
            .map(|(c, x)| c * x)
            .sum::<f64>()
}

fn finish(
    compiled: Compiled,
    status: SdpStatus,
    x: Vec<f64>,
    margin: f64,
    iterations: usize,
    message: Option<String>,
    duals: HashMap<ConstraintId, DualValue>,
) -> SdpSolution {
    let max_violation = compiled.cone.violation(&x, &compiled.lin_offsets);
    SdpSolution {
        status,
        objective: objective_at(&compiled, &x),
        max_violation,
        infeasibility_margin: margin,
        iterations,
        message,
        values: x,
        layout: compiled.layout,
        duals,
    }
}

/// Finds a point satisfying every constraint within `feas_tol`, ignoring
/// the objective. `Optimal` means a feasible point was found.
pub fn find_feasible(p: &LmiProblem, settings: &SdpSettings) -> Result<SdpSolution> {
    settings.validate()?;
    let compiled = compile(p, 0.5 * settings.feas_tol)?;
    let r = run_phase_one(&compiled, settings);
    Ok(finish(
        compiled,
        r.status,
        r.x,
        r.margin,
        r.iterations,
        r.message,
        HashMap::new(),
    ))
}

/// Phase-I feasibility test. Numerical failure is reported as an error.
pub fn check_feasible(p: &LmiProblem, feas_tol: f64) -> Result<bool> {
    let sol = find_feasible(p, &SdpSettings::default().with_feas_tol(feas_tol))?;
    match sol.status {
        SdpStatus::Optimal => Ok(true),
        SdpStatus::Infeasible => Ok(false),
        SdpStatus::NumericalFailure => Err(Error::SolverFailure(
            sol.message
                .unwrap_or_else(|| "phase-I did not converge".into()),
        )),
    }
}

/// Minimizes the objective: phase-I decides feasibility, then an
/// infeasible-start phase-II run from the phase-I point optimizes.
pub fn solve(p: &LmiProblem, settings: &SdpSettings) -> Result<SdpSolution> {
    settings.validate()?;
    let compiled = compile(p, 0.5 * settings.feas_tol)?;
    let r1 = run_phase_one(&compiled, settings);
    if r1.status != SdpStatus::Optimal {
        return Ok(finish(
            compiled,
            r1.status,
            r1.x,
            r1.margin,
            r1.iterations,
            r1.message,
            HashMap::new(),
        ));
    }
    let cone = &compiled.cone;
    if cone.lin.is_empty() && cone.psd.is_empty() {
        let status = if cone.c.iter().all(|c| *c == 0.0) {
            SdpStatus::Optimal
        } else {
            SdpStatus::NumericalFailure
        };
        return Ok(finish(
            compiled,
            status,
            r1.x,
            0.0,
            0,
            Some("unbounded objective".into()),
            HashMap::new(),
        ));
    }

    let cscale = cone.c.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut it = start_point(cone, r1.x.clone(), |e| (1.0 - e).max(0.0), cscale);
    let tol = settings.feas_tol;
    let mut converged = false;
    let (exit, iters) = ipm::run(cone, &mut it, settings.params(), |_, st| {
        let scale = st.pobj.abs().max(1.0);
        if st.pinf <= 0.1 * tol
            && st.dinf <= 1e-9 * cscale
            && (st.pobj - st.dobj).abs() <= settings.gap_tol * scale
            && st.gap <= settings.gap_tol * scale
        {
            converged = true;
            return Control::Stop;
        }
        Control::Continue
    });
    let iterations = r1.iterations + iters;
    if converged {
        let duals = extract_duals(&compiled, &it.lz, &it.pz);
        let x = it.x;
        let viol = cone.violation(&x, &compiled.lin_offsets);
        let status = if viol <= tol {
            SdpStatus::Optimal
        } else {
            SdpStatus::NumericalFailure
        };
        return Ok(finish(compiled, status, x, 0.0, iterations, None, duals));
    }
    let message = match exit {
        Exit::Breakdown(m) => format!("phase-II breakdown: {m}"),
        _ => "phase-II iteration limit".into(),
    };
    log::debug!("{message}");
    // The phase-I point is still feasible; report it without a certificate.
    Ok(finish(
        compiled,
        SdpStatus::NumericalFailure,
        r1.x,
        0.0,
        iterations,
        Some(message),
        HashMap::new(),
    ))
}
