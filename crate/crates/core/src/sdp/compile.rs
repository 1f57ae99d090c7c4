//! Lowers an [`LmiProblem`] to the real conic form consumed by the IPM.
//!
//! A Hermitian variable of dimension `n` is parameterized by `n²` reals:
//! the diagonal, then `(re, im)` for each strictly upper entry `(k, l)`.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::ipm::{ConeProblem, LinRow, PsdBlock};
use super::model::{AffineScalar, ConstraintId, LmiProblem, MatVar, Relation, ScalarVar, VarKind};
use crate::error::Result;
use crate::linalg::{fold_embedding, real_embed, ComplexMatrix, HermitianMatrix};

#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub offsets: Vec<usize>,
    pub kinds: Vec<VarKind>,
    pub n: usize,
}

impl Layout {
    pub fn new(p: &LmiProblem) -> Self {
        let mut offsets = Vec::with_capacity(p.vars.len());
        let mut n = 0;
        for v in &p.vars {
            offsets.push(n);
            n += match v.kind {
                VarKind::HermitianPsd(d) => d * d,
                VarKind::Nonneg | VarKind::Free => 1,
            };
        }
        Self {
            offsets,
            kinds: p.vars.iter().map(|v| v.kind).collect(),
            n,
        }
    }

    pub fn matrix(&self, x: &[f64], v: MatVar) -> HermitianMatrix {
        let VarKind::HermitianPsd(d) = self.kinds[v.0] else {
            panic!("handle {} is not a matrix variable", v.0)
        };
        let base = &x[self.offsets[v.0]..];
        let mut m = DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
        for k in 0..d {
            m[(k, k)] = Complex64::new(base[k], 0.0);
        }
        for (q, (k, l)) in upper_pairs(d).enumerate() {
            let z = Complex64::new(base[d + 2 * q], base[d + 2 * q + 1]);
            m[(k, l)] = z;
            m[(l, k)] = z.conj();
        }
        HermitianMatrix::from_hermitian_unchecked(m)
    }

    pub fn scalar(&self, x: &[f64], v: ScalarVar) -> f64 {
        x[self.offsets[v.0]]
    }
}

fn upper_pairs(d: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..d).flat_map(move |k| ((k + 1)..d).map(move |l| (k, l)))
}

/// `G B_p G*` for every basis matrix `B_p` of a `d`-dimensional Hermitian variable.
fn congruence_basis(g: &DMatrix<Complex64>) -> Vec<DMatrix<Complex64>> {
    let d = g.ncols();
    let i = Complex64::new(0.0, 1.0);
    let col = |k: usize| g.column(k).into_owned();
    let mut out = Vec::with_capacity(d * d);
    for k in 0..d {
        let gk = col(k);
        out.push(&gk * gk.adjoint());
    }
    for (k, l) in upper_pairs(d) {
        let (gk, gl) = (col(k), col(l));
        let kl = &gk * gl.adjoint();
        let lk = kl.adjoint();
        out.push(&kl + &lk);
        out.push((kl - lk) * i);
    }
    out
}

/// `tr(C B_p)` for every basis matrix (always real for Hermitian `C`).
fn trace_basis(c: &HermitianMatrix) -> Vec<f64> {
    let d = c.dim();
    let mut out = Vec::with_capacity(d * d);
    for k in 0..d {
        out.push(c.get(k, k).re);
    }
    for (k, l) in upper_pairs(d) {
        let z = c.get(k, l);
        out.push(2.0 * z.re);
        out.push(2.0 * z.im);
    }
    out
}

fn embed_raw(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    real_embed(&HermitianMatrix::from_hermitian_unchecked(m.clone()))
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Slot {
    Lin(usize),
    /// Equality: rows for `−e + tol ≥ 0` and `e + tol ≥ 0`.
    LinPair(usize, usize),
    Psd(usize),
}

#[derive(Clone, Debug)]
pub(crate) struct Compiled {
    pub cone: ConeProblem,
    pub obj_const: f64,
    /// Tolerance added to each linear row (nonzero only for equality pairs).
    pub lin_offsets: Vec<f64>,
    pub slots: HashMap<ConstraintId, Slot>,
    pub layout: Layout,
}

fn lower_scalar(layout: &Layout, e: &AffineScalar, sign: f64) -> LinRow {
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    for (v, a) in &e.scalars {
        *acc.entry(layout.offsets[v.0]).or_default() += sign * a;
    }
    for (x, c) in &e.traces {
        let off = layout.offsets[x.0];
        for (p, t) in trace_basis(c).into_iter().enumerate() {
            *acc.entry(off + p).or_default() += sign * t;
        }
    }
    LinRow {
        f0: sign * e.constant,
        terms: acc.into_iter().filter(|(_, a)| *a != 0.0).collect(),
    }
}

pub(crate) fn compile(p: &LmiProblem, eq_tol: f64) -> Result<Compiled> {
    p.validate()?;
    let layout = Layout::new(p);
    let mut lin = Vec::new();
    let mut lin_offsets = Vec::new();
    let mut psd = Vec::new();
    let mut slots = HashMap::new();

    let mut c = vec![0.0; layout.n];
    let obj = lower_scalar(&layout, &p.objective, 1.0);
    for (k, a) in obj.terms {
        c[k] += a;
    }

    for (idx, (_, e, rel)) in p.linear.iter().enumerate() {
        match rel {
            Relation::LessEq => {
                slots.insert(ConstraintId::Linear(idx), Slot::Lin(lin.len()));
                lin.push(lower_scalar(&layout, e, -1.0));
                lin_offsets.push(0.0);
            }
            Relation::Eq => {
                let mut lo = lower_scalar(&layout, e, -1.0);
                let mut hi = lower_scalar(&layout, e, 1.0);
                lo.f0 += eq_tol;
                hi.f0 += eq_tol;
                slots.insert(
                    ConstraintId::Linear(idx),
                    Slot::LinPair(lin.len(), lin.len() + 1),
                );
                lin.push(lo);
                lin.push(hi);
                lin_offsets.extend([eq_tol, eq_tol]);
            }
        }
    }

    for (idx, (_, e)) in p.lmis.iter().enumerate() {
        let mut acc: BTreeMap<usize, DMatrix<Complex64>> = BTreeMap::new();
        let d = e.dim();
        let zero = || DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
        for (v, h) in &e.scalars {
            let slot = acc.entry(layout.offsets[v.0]).or_insert_with(zero);
            *slot += h.inner();
        }
        for (x, w, g) in &e.congruences {
            let off = layout.offsets[x.0];
            for (q, b) in congruence_basis(g.inner()).into_iter().enumerate() {
                let slot = acc.entry(off + q).or_insert_with(zero);
                *slot += b * Complex64::new(*w, 0.0);
            }
        }
        let id = ConstraintId::Lmi(idx);
        if d == 1 {
            slots.insert(id, Slot::Lin(lin.len()));
            lin.push(LinRow {
                f0: e.constant.get(0, 0).re,
                terms: acc
                    .into_iter()
                    .map(|(k, m)| (k, m[(0, 0)].re))
                    .filter(|(_, a)| *a != 0.0)
                    .collect(),
            });
            lin_offsets.push(0.0);
        } else {
            slots.insert(id, Slot::Psd(psd.len()));
            psd.push(PsdBlock {
                f0: real_embed(&e.constant),
                terms: acc
                    .into_iter()
                    .filter(|(_, m)| m.iter().any(|z| *z != Complex64::new(0.0, 0.0)))
                    .map(|(k, m)| (k, embed_raw(&m)))
                    .collect(),
            });
        }
    }

    for (vi, decl) in p.vars.iter().enumerate() {
        let off = layout.offsets[vi];
        match decl.kind {
            VarKind::HermitianPsd(1) => {
                slots.insert(ConstraintId::MatrixDomain(MatVar(vi)), Slot::Lin(lin.len()));
                lin.push(LinRow {
                    f0: 0.0,
                    terms: vec![(off, 1.0)],
                });
                lin_offsets.push(0.0);
            }
            VarKind::HermitianPsd(d) => {
                slots.insert(ConstraintId::MatrixDomain(MatVar(vi)), Slot::Psd(psd.len()));
                let g = ComplexMatrix::identity(d);
                psd.push(PsdBlock {
                    f0: DMatrix::zeros(2 * d, 2 * d),
                    terms: congruence_basis(g.inner())
                        .iter()
                        .enumerate()
                        .map(|(q, b)| (off + q, embed_raw(b)))
                        .collect(),
                });
            }
            VarKind::Nonneg => {
                slots.insert(
                    ConstraintId::ScalarDomain(ScalarVar(vi)),
                    Slot::Lin(lin.len()),
                );
                lin.push(LinRow {
                    f0: 0.0,
                    terms: vec![(off, 1.0)],
                });
                lin_offsets.push(0.0);
            }
            VarKind::Free => {}
        }
    }

    Ok(Compiled {
        cone: ConeProblem {
            n: layout.n,
            c,
            lin,
            psd,
        },
        obj_const: p.objective.constant,
        lin_offsets,
        slots,
        layout,
    })
}

/// Dual value attached to one modeling constraint.
#[derive(Clone, Debug)]
pub enum DualValue {
    Matrix(HermitianMatrix),
    Scalar(f64),
}

impl DualValue {
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            DualValue::Scalar(v) => Some(*v),
            DualValue::Matrix(_) => None,
        }
    }

    pub fn as_matrix(&self) -> Option<&HermitianMatrix> {
        match self {
            DualValue::Matrix(m) => Some(m),
            DualValue::Scalar(_) => None,
        }
    }
}

pub(crate) fn extract_duals(
    c: &Compiled,
    lz: &[f64],
    pz: &[DMatrix<f64>],
) -> HashMap<ConstraintId, DualValue> {
    c.slots
        .iter()
        .map(|(id, slot)| {
            let v = match *slot {
                Slot::Lin(i) => DualValue::Scalar(lz[i]),
                // Multiplier of `e = 0` in the Lagrangian `… + y·e`.
                Slot::LinPair(lo, hi) => DualValue::Scalar(lz[lo] - lz[hi]),
                Slot::Psd(j) => DualValue::Matrix(fold_embedding(&pz[j])),
            };
            (*id, v)
        })
        .collect()
}
