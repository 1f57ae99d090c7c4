//! Brute-force reference computations used to cross-check the SDP solvers.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::channel::{
    worst_case_rates_mc, CovarianceDesign, ErrorBounds, SinrEnvelope, SystemInstance,
    WorstCaseRates,
};
use crate::error::{Error, Result};
use crate::linalg::{raw_quadratic_form, ComplexMatrix, HermitianMatrix};

/// Best sum secrecy rate found on the power-split grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarOracle {
    pub sum_max: f64,
    /// Maximizing `(phi1, psi1, phi2, psi2)`.
    pub split: [f64; 4],
}

/// Exhaustive search for single-antenna users: every split of each budget
/// into message and jamming power on a grid of `steps` increments per user.
/// Error bounds are ignored; the nominal channels are used.
pub fn scalar_sum_secrecy_oracle(inst: &SystemInstance, steps: usize) -> Result<ScalarOracle> {
    inst.validate()?;
    if inst.m1 != 1 || inst.m2 != 1 {
        return Err(Error::Unsupported(
            "scalar oracle needs single-antenna users".into(),
        ));
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be positive".into()));
    }
    let g = |v: &ComplexMatrix| v.norm_sqr();
    let (h21, h12, z1, z2) = (g(&inst.h21), g(&inst.h12), g(&inst.z1), g(&inst.z2));
    let n0 = inst.n0;
    // (rate, eve signal, eve jamming, phi, psi) for each split of one budget
    let splits = |p: f64, h: f64, z: f64| -> Vec<[f64; 5]> {
        let mut out = Vec::with_capacity((steps + 1) * (steps + 2) / 2);
        for i in 0..=steps {
            for j in 0..=steps - i {
                let phi = p * i as f64 / steps as f64;
                let psi = p * j as f64 / steps as f64;
                let rate = (1.0 + h * phi / (n0 + h * psi)).log2();
                out.push([rate, z * phi, z * psi, phi, psi]);
            }
        }
        out
    };
    let u1 = splits(inst.p1, h21, z1);
    let u2 = splits(inst.p2, h12, z2);
    let (sum_max, a, b) = u1
        .par_iter()
        .enumerate()
        .map(|(ia, a)| {
            let mut best = (f64::NEG_INFINITY, ia, 0);
            for (ib, b) in u2.iter().enumerate() {
                let leak = (1.0 + (a[1] + b[1]) / (n0 + a[2] + b[2])).log2();
                let s = a[0] + b[0] - leak;
                if s > best.0 {
                    best = (s, ia, ib);
                }
            }
            best
        })
        .reduce(
            || (f64::NEG_INFINITY, 0, 0),
            |x, y| if y.0 > x.0 { y } else { x },
        );
    Ok(ScalarOracle {
        sum_max: sum_max.max(0.0),
        split: [u1[a][3], u1[a][4], u2[b][3], u2[b][4]],
    })
}

/// Random single-antenna instance: unit-variance user links, eavesdropper
/// links with variance 1/4, unit noise and budgets between 0 and 10 dB.
pub fn random_scalar_instance(seed: u64) -> SystemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cn = |var: f64| {
        let s = (var / 2.0).sqrt();
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        [Complex64::new(s * re, s * im)]
    };
    let (h12, h21, z1, z2) = (cn(1.0), cn(1.0), cn(0.25), cn(0.25));
    let p1 = 10f64.powf(rng.random_range(0.0..1.0));
    let p2 = 10f64.powf(rng.random_range(0.0..1.0));
    SystemInstance::new(&h12, &h21, &z1, &z2, 1.0, p1, p2, ErrorBounds::zero())
        .expect("finite random instance")
}

/// Error vectors of norm 0, ε/2 and ε along a regular direction grid.
///
/// For one antenna the directions are `steps` phases. For two antennas they
/// are `(cos a·e^{iθ1}, sin a·e^{iθ2})` with `steps + 1` values of `a` in
/// `[0, π/2]` and `steps` values of each phase. Doubling `steps` gives a
/// superset of the points.
pub fn error_grid(m: usize, eps: f64, steps: usize) -> Result<Vec<Vec<Complex64>>> {
    if m == 0 || m > 2 {
        return Err(Error::Unsupported(format!(
            "grid search supports 1 or 2 antennas, got {m}"
        )));
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be positive".into()));
    }
    let mut out = vec![vec![Complex64::new(0.0, 0.0); m]];
    if eps == 0.0 {
        return Ok(out);
    }
    let phase =
        |j: usize| Complex64::from_polar(1.0, std::f64::consts::TAU * j as f64 / steps as f64);
    let mut dirs = Vec::new();
    if m == 1 {
        dirs.extend((0..steps).map(|j| vec![phase(j)]));
    } else {
        for a in 0..=steps {
            let ang = std::f64::consts::FRAC_PI_2 * a as f64 / steps as f64;
            for j1 in 0..steps {
                for j2 in 0..steps {
                    dirs.push(vec![phase(j1) * ang.cos(), phase(j2) * ang.sin()]);
                }
            }
        }
    }
    for r in [eps / 2.0, eps] {
        out.extend(dirs.iter().map(|d| d.iter().map(|z| z * r).collect()));
    }
    Ok(out)
}

fn shifted(v: &ComplexMatrix, e: &[Complex64]) -> Vec<Complex64> {
    v.row_major().iter().zip(e).map(|(a, b)| a + b).collect()
}

/// Worst user SINRs and best eavesdropper SINR over the product of error
/// grids. Errors that enter only a denominator are maximized separately,
/// which gives the same extrema as the full product.
pub fn adversarial_error_search(
    inst: &SystemInstance,
    d: &CovarianceDesign,
    steps: usize,
) -> Result<SinrEnvelope> {
    inst.validate()?;
    let e = inst.eps;
    let g11 = error_grid(inst.m1, e.eps11, steps)?;
    let g12 = error_grid(inst.m2, e.eps12, steps)?;
    let g21 = error_grid(inst.m1, e.eps21, steps)?;
    let g22 = error_grid(inst.m2, e.eps22, steps)?;
    let g1 = error_grid(inst.m1, e.eps1, steps)?;
    let g2 = error_grid(inst.m2, e.eps2, steps)?;

    let worst_self = |grid: &[Vec<Complex64>], a: &HermitianMatrix, b: &HermitianMatrix| {
        let s = a.add(b).expect("same dimension");
        grid.iter()
            .map(|v| raw_quadratic_form(v, s.inner()))
            .fold(0.0, f64::max)
    };
    let user_min = |h: &ComplexMatrix,
                    grid: &[Vec<Complex64>],
                    phi: &HermitianMatrix,
                    psi: &HermitianMatrix,
                    interference: f64| {
        grid.iter()
            .map(|v| {
                let hv = shifted(h, v);
                raw_quadratic_form(&hv, phi.inner())
                    / (inst.n0 + interference + raw_quadratic_form(&hv, psi.inner()))
            })
            .fold(f64::INFINITY, f64::min)
    };
    let i2 = worst_self(&g22, &d.phi2, &d.psi2);
    let i1 = worst_self(&g11, &d.phi1, &d.psi1);
    let user1_min = user_min(&inst.h21, &g21, &d.phi1, &d.psi1, i2);
    let user2_min = user_min(&inst.h12, &g12, &d.phi2, &d.psi2, i1);

    let parts = |z: &ComplexMatrix,
                 grid: &[Vec<Complex64>],
                 phi: &HermitianMatrix,
                 psi: &HermitianMatrix|
     -> Vec<(f64, f64)> {
        grid.iter()
            .map(|v| {
                let zv = shifted(z, v);
                (
                    raw_quadratic_form(&zv, phi.inner()),
                    raw_quadratic_form(&zv, psi.inner()),
                )
            })
            .collect()
    };
    let p1 = parts(&inst.z1, &g1, &d.phi1, &d.psi1);
    let p2 = parts(&inst.z2, &g2, &d.phi2, &d.psi2);
    let eve_max = p1
        .par_iter()
        .map(|(a1, b1)| {
            p2.iter()
                .map(|(a2, b2)| (a1 + a2) / (inst.n0 + b1 + b2))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(SinrEnvelope {
        user1_min,
        user2_min,
        eve_max,
    })
}

/// Sampled and grid-searched worst cases of a robust design against its
/// certified bounds.
#[derive(Clone, Copy, Debug)]
pub struct SoundnessReport {
    pub mc: WorstCaseRates,
    /// `None` when an antenna count exceeds the grid search limit.
    pub adversarial: Option<WorstCaseRates>,
    /// Largest amount (bits) by which any found realization breaks
    /// `r1 ≥ r1_lower`, `r2 ≥ r2_lower` or `rE ≤ re_upper`; negative when
    /// all hold with slack.
    pub max_violation: f64,
}

pub fn robust_soundness(
    inst: &SystemInstance,
    d: &CovarianceDesign,
    bounds: WorstCaseRates,
    samples: usize,
    seed: u64,
    steps: usize,
) -> Result<SoundnessReport> {
    let violation = |w: &WorstCaseRates| {
        (bounds.r1_min - w.r1_min)
            .max(bounds.r2_min - w.r2_min)
            .max(w.re_max - bounds.re_max)
    };
    let mc = worst_case_rates_mc(inst, d, samples, seed);
    let adversarial = if inst.m1 <= 2 && inst.m2 <= 2 {
        Some(adversarial_error_search(inst, d, steps)?.rates())
    } else {
        None
    };
    let max_violation = adversarial
        .iter()
        .map(violation)
        .fold(violation(&mc), f64::max);
    Ok(SoundnessReport {
        mc,
        adversarial,
        max_violation,
    })
}
