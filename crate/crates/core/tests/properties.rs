use num_complex::Complex64;
use proptest::prelude::*;

use fdsecrecy::channel::{capacity_bounds, worst_case_rates_mc, ErrorBounds, SystemInstance};
use fdsecrecy::linalg::{
    fold_embedding, hermitian_eigen, quadratic_form, real_embed, ComplexMatrix, HermitianMatrix,
};
use fdsecrecy::oracle::scalar_sum_secrecy_oracle;
use fdsecrecy::perfect::{max_sum_secrecy, perfect_problem};
use fdsecrecy::power::{min_total_power, SinrSpec};
use fdsecrecy::region::{staircase, staircase_value, GridSpec};
use fdsecrecy::report::fmt_num;
use fdsecrecy::robust::robust_min_leakage;
use fdsecrecy::sdp::check_feasible;

fn complex() -> impl Strategy<Value = Complex64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| Complex64::new(a, b))
}

fn hermitian(n: usize) -> impl Strategy<Value = HermitianMatrix> {
    prop::collection::vec(complex(), n * n).prop_map(move |v| {
        let m = nalgebra::DMatrix::from_row_slice(n, n, &v);
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        HermitianMatrix::new(h).unwrap()
    })
}

fn sized_hermitian() -> impl Strategy<Value = HermitianMatrix> {
    (1usize..=4).prop_flat_map(hermitian)
}

proptest! {
    #[test]
    fn eigen_reconstructs(m in sized_hermitian()) {
        let e = hermitian_eigen(&m).unwrap();
        let v = e.vectors.inner();
        let lambda = nalgebra::DMatrix::from_fn(m.dim(), m.dim(), |r, c| {
            if r == c { Complex64::new(e.values[r], 0.0) } else { Complex64::new(0.0, 0.0) }
        });
        let back = v * lambda * v.adjoint();
        prop_assert!((back - m.inner()).norm() <= 1e-10 * m.frobenius_norm().max(1.0));
        let gram = v.adjoint() * v;
        let id = nalgebra::DMatrix::<Complex64>::identity(m.dim(), m.dim());
        prop_assert!((gram - id).norm() <= 1e-10);
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn quadratic_form_matches_spectrum(
        (m, x) in (1usize..=4).prop_flat_map(|n| (hermitian(n), prop::collection::vec(complex(), n)))
    ) {
        let v = ComplexMatrix::row_vector(&x);
        let e = hermitian_eigen(&m).unwrap();
        let u = e.vectors.inner();
        let mut spectral = 0.0;
        for (i, lam) in e.values.iter().enumerate() {
            let proj: Complex64 = (0..m.dim()).map(|r| x[r] * u[(r, i)]).sum();
            spectral += lam * proj.norm_sqr();
        }
        let q = quadratic_form(&v, &m).unwrap();
        prop_assert!((q - spectral).abs() <= 1e-9 * (1.0 + q.abs()), "{} vs {}", q, spectral);
    }

    #[test]
    fn embedding_preserves_inner_products_and_spectrum(
        (h, a) in (1usize..=3).prop_flat_map(|n| (hermitian(n), hermitian(n)))
    ) {
        let eh = real_embed(&h);
        let ea = real_embed(&a);
        let direct = h.inner_product(&a).unwrap();
        prop_assert!((eh.dot(&ea) - 2.0 * direct).abs() <= 1e-10 * (1.0 + direct.abs()));
        // Folding a symmetric matrix gives the Hermitian representative.
        let z = (&ea + ea.transpose()) * 0.25;
        let folded = fold_embedding(&z);
        prop_assert!((eh.dot(&z) - h.inner_product(&folded).unwrap()).abs() <= 1e-10 * (1.0 + direct.abs()));
        let mut ev: Vec<f64> = eh.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let hv = hermitian_eigen(&h).unwrap().values;
        for (i, v) in hv.iter().enumerate() {
            prop_assert!((ev[2 * i] - v).abs() <= 1e-9 && (ev[2 * i + 1] - v).abs() <= 1e-9);
        }
    }

    #[test]
    fn number_format_round_trips(x in prop::num::f64::NORMAL) {
        let s = fmt_num(x);
        let back: f64 = s.parse().unwrap();
        prop_assert!(((back - x) / x).abs() <= 5e-9, "{} -> {}", x, s);
        prop_assert!(!s.contains(' '));
    }

    #[test]
    fn staircase_dominates_every_box(
        boxes in prop::collection::vec((0.0..2.0f64, 0.0..2.0f64, 0.0..3.0f64), 1..12)
    ) {
        let poly = staircase(&boxes);
        prop_assert!(poly.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 >= w[1].1));
        for &(a, b, s) in &boxes {
            let (a, b) = (a.min(s), b.min(s));
            if a <= 0.0 && b <= 0.0 { continue; }
            // Upper-right corners of the box clipped by the diagonal.
            for x in [0.0, a, (s - b).clamp(0.0, a)] {
                let y = b.min(s - x).max(0.0);
                let top = staircase_value(&poly, x, 0).unwrap_or(f64::NEG_INFINITY);
                prop_assert!(top >= y - 1e-9, "({}, {}) above boundary {} in {:?}", x, y, top, poly);
            }
        }
    }
}

fn reference() -> SystemInstance {
    SystemInstance::reference(3.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn feasibility_is_monotone_in_t(f1 in 0.0..1.0f64, f2 in 0.0..1.0f64, t1 in 0.0..0.05f64, dt in 0.0..0.05f64) {
        let inst = reference();
        let cap = capacity_bounds(&inst);
        let (r1, r2) = (f1 * cap.c1, f2 * cap.c2);
        let (p1, _) = perfect_problem(&inst, r1, r2, t1);
        let (p2, _) = perfect_problem(&inst, r1, r2, t1 + dt);
        if check_feasible(&p1, 1e-8).unwrap() {
            prop_assert!(check_feasible(&p2, 1e-8).unwrap());
        }
    }

    #[test]
    fn robust_designs_are_valid_and_sound(f1 in 0.0..1.0f64, f2 in 0.0..1.0f64, eps in 0.0..0.06f64) {
        let inst = reference().with_eps(ErrorBounds::uniform(eps));
        let cap = capacity_bounds(&inst);
        let c = robust_min_leakage(&inst, f1 * cap.c1, f2 * cap.c2, 1e-4).unwrap();
        c.design.check(&inst, 1e-7).unwrap();
        let w = worst_case_rates_mc(&inst, &c.design, 2000, 5);
        prop_assert!(w.r1_min >= c.r1_lower - 1e-6);
        prop_assert!(w.r2_min >= c.r2_lower - 1e-6);
        prop_assert!(w.re_max <= c.re_upper + 1e-6);
    }

    #[test]
    fn power_grows_with_the_floor(a in 0.0..1.2f64, b in 0.0..1.2f64) {
        let inst = SystemInstance::reference(6.0).with_eps(ErrorBounds::uniform(0.02));
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let p_lo = min_total_power(&inst, &SinrSpec::new(lo, lo, f64::INFINITY)).unwrap().total_power;
        let p_hi = min_total_power(&inst, &SinrSpec::new(hi, hi, f64::INFINITY)).unwrap().total_power;
        prop_assert!(p_hi >= p_lo - 1e-6, "{} -> {}, {} -> {}", lo, p_lo, hi, p_hi);
    }

    #[test]
    fn scalar_oracle_ignores_channel_phases(
        g in prop::collection::vec(0.05..1.5f64, 4),
        phases in prop::collection::vec(0.0..std::f64::consts::TAU, 4),
    ) {
        let at = |ph: &[f64]| {
            let c = |i: usize| [Complex64::from_polar(g[i], ph[i])];
            SystemInstance::new(&c(0), &c(1), &c(2), &c(3), 1.0, 2.0, 1.5, ErrorBounds::zero()).unwrap()
        };
        let base = scalar_sum_secrecy_oracle(&at(&[0.0; 4]), 40).unwrap();
        let rotated = scalar_sum_secrecy_oracle(&at(&phases), 40).unwrap();
        prop_assert!((base.sum_max - rotated.sum_max).abs() <= 1e-12);
    }
}

#[test]
fn sweeps_are_deterministic() {
    let inst = reference();
    let grid = GridSpec::new(6, 5, 1e-4).unwrap();
    let a = max_sum_secrecy(&inst, &grid).unwrap();
    let b = max_sum_secrecy(&inst, &grid).unwrap();
    for (x, y) in a.cells.iter().zip(&b.cells) {
        assert_eq!(x.t_min.to_bits(), y.t_min.to_bits());
        assert_eq!(x.sum.to_bits(), y.sum.to_bits());
        assert_eq!(x.design, y.design);
    }
    assert_eq!(a.best, b.best);
}
