//! System instance, transmit covariance designs and the closed-form rate
//! and capacity expressions.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{quadratic_form, raw_quadratic_form, ComplexMatrix, HermitianMatrix};

/// Tolerance used when checking design PSD-ness and power budgets.
pub const DESIGN_TOL: f64 = 1e-8;

/// `10^(db/10)`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(p: f64) -> f64 {
    10.0 * p.log10()
}

/// Norm bounds on the channel estimation errors. `eps11`/`eps22` bound the
/// residual self-interference channels, `eps12`/`eps21` the direct links and
/// `eps1`/`eps2` the eavesdropper links.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorBounds {
    pub eps11: f64,
    pub eps12: f64,
    pub eps21: f64,
    pub eps22: f64,
    pub eps1: f64,
    pub eps2: f64,
}

impl ErrorBounds {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn uniform(e: f64) -> Self {
        Self {
            eps11: e,
            eps12: e,
            eps21: e,
            eps22: e,
            eps1: e,
            eps2: e,
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.eps11, self.eps12, self.eps21, self.eps22, self.eps1, self.eps2,
        ]
    }

    pub fn is_zero(&self) -> bool {
        self.as_array().iter().all(|e| *e == 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemInstance {
    pub m1: usize,
    pub m2: usize,
    /// S2 → S1 channel (length `m2`).
    pub h12: ComplexMatrix,
    /// S1 → S2 channel (length `m1`).
    pub h21: ComplexMatrix,
    /// S1 → E channel (length `m1`).
    pub z1: ComplexMatrix,
    /// S2 → E channel (length `m2`).
    pub z2: ComplexMatrix,
    pub n0: f64,
    pub p1: f64,
    pub p2: f64,
    pub eps: ErrorBounds,
}

impl SystemInstance {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        h12: &[Complex64],
        h21: &[Complex64],
        z1: &[Complex64],
        z2: &[Complex64],
        n0: f64,
        p1: f64,
        p2: f64,
        eps: ErrorBounds,
    ) -> Result<Self> {
        let inst = Self {
            m1: h21.len(),
            m2: h12.len(),
            h12: ComplexMatrix::row_vector(h12),
            h21: ComplexMatrix::row_vector(h21),
            z1: ComplexMatrix::row_vector(z1),
            z2: ComplexMatrix::row_vector(z2),
            n0,
            p1,
            p2,
            eps,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// The two-antenna reference channels with unit noise and equal
    /// budgets of `p_db` decibels.
    pub fn reference(p_db: f64) -> Self {
        let c = Complex64::new;
        Self::new(
            &[c(0.0838, 0.5207), c(0.2226, -0.2482)],
            &[c(0.4407, 0.6653), c(0.5650, -0.0015)],
            &[c(0.0765, 0.0276), c(-0.0093, 0.0062)],
            &[c(-0.0449, 0.0314), c(-0.0396, -0.0672)],
            1.0,
            db_to_linear(p_db),
            db_to_linear(p_db),
            ErrorBounds::zero(),
        )
        .expect("reference instance is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: &ComplexMatrix, m: usize| -> Result<()> {
            if v.rows() != 1 || v.cols() != m {
                return Err(Error::Dimension(format!(
                    "{name} must be a 1x{m} row vector"
                )));
            }
            if v.row_major()
                .iter()
                .any(|z| !z.re.is_finite() || !z.im.is_finite())
            {
                return Err(Error::InvalidArgument(format!(
                    "{name} has non-finite entries"
                )));
            }
            Ok(())
        };
        if self.m1 == 0 || self.m2 == 0 {
            return Err(Error::InvalidArgument(
                "antenna counts must be positive".into(),
            ));
        }
        check("h21", &self.h21, self.m1)?;
        check("z1", &self.z1, self.m1)?;
        check("h12", &self.h12, self.m2)?;
        check("z2", &self.z2, self.m2)?;
        if !(self.n0 > 0.0 && self.n0.is_finite()) {
            return Err(Error::InvalidArgument(
                "noise power must be positive".into(),
            ));
        }
        if !(self.p1 >= 0.0 && self.p2 >= 0.0 && self.p1.is_finite() && self.p2.is_finite()) {
            return Err(Error::InvalidArgument(
                "power budgets must be finite and nonnegative".into(),
            ));
        }
        if self
            .eps
            .as_array()
            .iter()
            .any(|e| !(*e >= 0.0 && e.is_finite()))
        {
            return Err(Error::InvalidArgument(
                "error bounds must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn with_eps(mut self, eps: ErrorBounds) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_power(mut self, p1: f64, p2: f64) -> Self {
        self.p1 = p1;
        self.p2 = p2;
        self
    }

    pub fn is_perfect_csi(&self) -> bool {
        self.eps.is_zero()
    }
}

/// Auxiliary scalars of the robust reformulation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AuxScalars {
    pub t: [f64; 10],
    pub lambda: [f64; 10],
}

/// Message (`phi`) and jamming (`psi`) covariances of both users.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceDesign {
    pub phi1: HermitianMatrix,
    pub psi1: HermitianMatrix,
    pub phi2: HermitianMatrix,
    pub psi2: HermitianMatrix,
    pub aux: Option<AuxScalars>,
}

impl CovarianceDesign {
    pub fn zeros(m1: usize, m2: usize) -> Self {
        Self {
            phi1: HermitianMatrix::zeros(m1),
            psi1: HermitianMatrix::zeros(m1),
            phi2: HermitianMatrix::zeros(m2),
            psi2: HermitianMatrix::zeros(m2),
            aux: None,
        }
    }

    /// Maximum-ratio transmission at full power, no jamming.
    pub fn mrt(inst: &SystemInstance) -> Self {
        let beam = |h: &ComplexMatrix, p: f64| {
            let n2 = h.norm_sqr();
            if n2 == 0.0 {
                HermitianMatrix::zeros(h.cols())
            } else {
                h.outer().scale(p / n2)
            }
        };
        Self {
            phi1: beam(&inst.h21, inst.p1),
            psi1: HermitianMatrix::zeros(inst.m1),
            phi2: beam(&inst.h12, inst.p2),
            psi2: HermitianMatrix::zeros(inst.m2),
            aux: None,
        }
    }

    pub fn power1(&self) -> f64 {
        self.phi1.trace() + self.psi1.trace()
    }

    pub fn power2(&self) -> f64 {
        self.phi2.trace() + self.psi2.trace()
    }

    /// Checks PSD-ness and the per-user power budgets within `tol`.
    pub fn check(&self, inst: &SystemInstance, tol: f64) -> Result<()> {
        let dims = [
            ("phi1", &self.phi1, inst.m1),
            ("psi1", &self.psi1, inst.m1),
            ("phi2", &self.phi2, inst.m2),
            ("psi2", &self.psi2, inst.m2),
        ];
        for (name, m, d) in dims {
            if m.dim() != d {
                return Err(Error::Dimension(format!(
                    "{name} has dim {}, expected {d}",
                    m.dim()
                )));
            }
            let e = m.min_eigenvalue()?;
            if e < -tol {
                return Err(Error::InvalidArgument(format!(
                    "{name} is not PSD (min eigenvalue {e:.3e})"
                )));
            }
        }
        if self.power1() > inst.p1 + tol || self.power2() > inst.p2 + tol {
            return Err(Error::InvalidArgument(format!(
                "power budget exceeded: {:.9} > {:.9} or {:.9} > {:.9}",
                self.power1(),
                inst.p1,
                self.power2(),
                inst.p2
            )));
        }
        Ok(())
    }
}

fn qf(v: &ComplexMatrix, m: &HermitianMatrix) -> f64 {
    quadratic_form(v, m).expect("design dimensions match the instance")
}

fn log_rate(sinr: f64) -> f64 {
    (1.0 + sinr).log2().max(0.0)
}

/// Rate of S1's message at S2 (estimates taken as the true channels).
pub fn rate_user1(inst: &SystemInstance, d: &CovarianceDesign) -> f64 {
    log_rate(qf(&inst.h21, &d.phi1) / (inst.n0 + qf(&inst.h21, &d.psi1)))
}

/// Rate of S2's message at S1.
pub fn rate_user2(inst: &SystemInstance, d: &CovarianceDesign) -> f64 {
    log_rate(qf(&inst.h12, &d.phi2) / (inst.n0 + qf(&inst.h12, &d.psi2)))
}

/// Information leakage rate at the eavesdropper.
pub fn leakage_rate(inst: &SystemInstance, d: &CovarianceDesign) -> f64 {
    let num = qf(&inst.z1, &d.phi1) + qf(&inst.z2, &d.phi2);
    let den = inst.n0 + qf(&inst.z1, &d.psi1) + qf(&inst.z2, &d.psi2);
    log_rate(num / den)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Capacities {
    /// Worst-case capacity of the S1 → S2 link.
    pub c1: f64,
    /// Worst-case capacity of the S2 → S1 link.
    pub c2: f64,
    /// Best-case capacity of the eavesdropper link.
    pub ce: f64,
}

pub fn capacity_bounds(inst: &SystemInstance) -> Capacities {
    let worst = |h: &ComplexMatrix, eps: f64, p: f64| {
        let n = h.norm();
        if n > eps {
            (1.0 + (n - eps).powi(2) * p / inst.n0).log2()
        } else {
            0.0
        }
    };
    let e = &inst.eps;
    let best =
        (inst.z1.norm() + e.eps1).powi(2) * inst.p1 + (inst.z2.norm() + e.eps2).powi(2) * inst.p2;
    Capacities {
        c1: worst(&inst.h21, e.eps21, inst.p1),
        c2: worst(&inst.h12, e.eps12, inst.p2),
        ce: (1.0 + best / inst.n0).log2(),
    }
}

fn shifted(v: &ComplexMatrix, e: &[Complex64]) -> Vec<Complex64> {
    v.row_major().iter().zip(e).map(|(a, b)| a + b).collect()
}

fn sum(a: &HermitianMatrix, b: &HermitianMatrix) -> HermitianMatrix {
    a.add(b).expect("same dimension")
}

/// SINR of S1's message at S2 for channel errors `e21` (direct link) and
/// `e22` (residual self-interference at S2).
pub fn user1_sinr(
    inst: &SystemInstance,
    d: &CovarianceDesign,
    e21: &[Complex64],
    e22: &[Complex64],
) -> f64 {
    let h = shifted(&inst.h21, e21);
    let self_noise = raw_quadratic_form(e22, sum(&d.phi2, &d.psi2).inner());
    raw_quadratic_form(&h, d.phi1.inner())
        / (inst.n0 + self_noise + raw_quadratic_form(&h, d.psi1.inner()))
}

/// SINR of S2's message at S1 for errors `e12` and `e11`.
pub fn user2_sinr(
    inst: &SystemInstance,
    d: &CovarianceDesign,
    e12: &[Complex64],
    e11: &[Complex64],
) -> f64 {
    let h = shifted(&inst.h12, e12);
    let self_noise = raw_quadratic_form(e11, sum(&d.phi1, &d.psi1).inner());
    raw_quadratic_form(&h, d.phi2.inner())
        / (inst.n0 + self_noise + raw_quadratic_form(&h, d.psi2.inner()))
}

/// SINR at the eavesdropper for errors `e1`, `e2` on its channels.
pub fn eve_sinr(
    inst: &SystemInstance,
    d: &CovarianceDesign,
    e1: &[Complex64],
    e2: &[Complex64],
) -> f64 {
    let z1 = shifted(&inst.z1, e1);
    let z2 = shifted(&inst.z2, e2);
    let num = raw_quadratic_form(&z1, d.phi1.inner()) + raw_quadratic_form(&z2, d.phi2.inner());
    let den =
        inst.n0 + raw_quadratic_form(&z1, d.psi1.inner()) + raw_quadratic_form(&z2, d.psi2.inner());
    num / den
}

/// Extreme SINRs over a set of error realizations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinrEnvelope {
    pub user1_min: f64,
    pub user2_min: f64,
    pub eve_max: f64,
}

impl SinrEnvelope {
    fn empty() -> Self {
        Self {
            user1_min: f64::INFINITY,
            user2_min: f64::INFINITY,
            eve_max: f64::NEG_INFINITY,
        }
    }

    fn merge(self, o: Self) -> Self {
        Self {
            user1_min: self.user1_min.min(o.user1_min),
            user2_min: self.user2_min.min(o.user2_min),
            eve_max: self.eve_max.max(o.eve_max),
        }
    }

    pub(crate) fn observe(&mut self, inst: &SystemInstance, d: &CovarianceDesign, e: &ErrorSample) {
        self.user1_min = self.user1_min.min(user1_sinr(inst, d, &e.e21, &e.e22));
        self.user2_min = self.user2_min.min(user2_sinr(inst, d, &e.e12, &e.e11));
        self.eve_max = self.eve_max.max(eve_sinr(inst, d, &e.e1, &e.e2));
    }

    pub fn rates(&self) -> WorstCaseRates {
        WorstCaseRates {
            r1_min: log_rate(self.user1_min),
            r2_min: log_rate(self.user2_min),
            re_max: log_rate(self.eve_max),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorstCaseRates {
    pub r1_min: f64,
    pub r2_min: f64,
    pub re_max: f64,
}

/// One realization of all six error vectors.
#[derive(Clone, Debug)]
pub(crate) struct ErrorSample {
    pub e11: Vec<Complex64>,
    pub e12: Vec<Complex64>,
    pub e21: Vec<Complex64>,
    pub e22: Vec<Complex64>,
    pub e1: Vec<Complex64>,
    pub e2: Vec<Complex64>,
}

impl ErrorSample {
    pub fn zero(inst: &SystemInstance) -> Self {
        let z = |m| vec![Complex64::new(0.0, 0.0); m];
        Self {
            e11: z(inst.m1),
            e12: z(inst.m2),
            e21: z(inst.m1),
            e22: z(inst.m2),
            e1: z(inst.m1),
            e2: z(inst.m2),
        }
    }
}

fn sphere_point(rng: &mut ChaCha8Rng, m: usize, radius: f64) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = (0..m)
        .map(|_| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
        .collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let s = if n > 0.0 { radius / n } else { 0.0 };
    for z in &mut v {
        *z *= s;
    }
    v
}

const MC_SHARD: usize = 1024;

/// Monte-Carlo estimate of the worst-case user rates and best-case leakage.
///
/// Each sample draws every error uniformly on its sphere of radius ε; the
/// all-zero realization is always included, and each sampled vector is also
/// evaluated with its partner error at the center. Sampling is split into
/// fixed shards with independent ChaCha streams, so results do not depend
/// on thread count.
pub fn worst_case_rates_mc(
    inst: &SystemInstance,
    d: &CovarianceDesign,
    samples: usize,
    seed: u64,
) -> WorstCaseRates {
    worst_case_sinr_mc(inst, d, samples, seed).rates()
}

pub fn worst_case_sinr_mc(
    inst: &SystemInstance,
    d: &CovarianceDesign,
    samples: usize,
    seed: u64,
) -> SinrEnvelope {
    let mut env = SinrEnvelope::empty();
    env.observe(inst, d, &ErrorSample::zero(inst));
    if inst.eps.is_zero() {
        return env;
    }
    let shards = samples.div_ceil(MC_SHARD);
    let e = inst.eps;
    (0..shards)
        .into_par_iter()
        .map(|shard| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard as u64);
            let count = MC_SHARD.min(samples - shard * MC_SHARD);
            let mut env = SinrEnvelope::empty();
            let zero = ErrorSample::zero(inst);
            for _ in 0..count {
                let s = ErrorSample {
                    e11: sphere_point(&mut rng, inst.m1, e.eps11),
                    e12: sphere_point(&mut rng, inst.m2, e.eps12),
                    e21: sphere_point(&mut rng, inst.m1, e.eps21),
                    e22: sphere_point(&mut rng, inst.m2, e.eps22),
                    e1: sphere_point(&mut rng, inst.m1, e.eps1),
                    e2: sphere_point(&mut rng, inst.m2, e.eps2),
                };
                env.observe(inst, d, &s);
                let centered = ErrorSample {
                    e11: zero.e11.clone(),
                    e21: zero.e21.clone(),
                    e1: zero.e1.clone(),
                    ..s.clone()
                };
                env.observe(inst, d, &centered);
                let centered = ErrorSample {
                    e12: zero.e12.clone(),
                    e22: zero.e22.clone(),
                    e2: zero.e2.clone(),
                    ..s
                };
                env.observe(inst, d, &centered);
            }
            env
        })
        .reduce(SinrEnvelope::empty, SinrEnvelope::merge)
        .merge(env)
}
