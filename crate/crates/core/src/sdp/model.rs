//! Modeling layer: Hermitian matrix and scalar variables, affine
//! expressions over them, and LMI / linear constraints.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, HermitianMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    /// Hermitian matrix of the given dimension, constrained PSD.
    HermitianPsd(usize),
    Nonneg,
    Free,
}

/// Handle to a Hermitian PSD matrix variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MatVar(pub(crate) usize);

/// Handle to a scalar variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ScalarVar(pub(crate) usize);

/// Handle to a constraint, used to look up its dual.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConstraintId {
    Lmi(usize),
    Linear(usize),
    /// The implicit PSD constraint on a matrix variable.
    MatrixDomain(MatVar),
    /// The implicit `x ≥ 0` constraint on a nonnegative scalar.
    ScalarDomain(ScalarVar),
}

#[derive(Clone, Debug)]
pub struct VarDecl {
    pub name: String,
    pub kind: VarKind,
}

/// `constant + Σ a·x + Σ tr(C·X)`.
#[derive(Clone, Debug, Default)]
pub struct AffineScalar {
    pub constant: f64,
    pub scalars: Vec<(ScalarVar, f64)>,
    pub traces: Vec<(MatVar, HermitianMatrix)>,
}

impl AffineScalar {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            ..Self::default()
        }
    }

    pub fn var(v: ScalarVar) -> Self {
        Self::constant(0.0).plus(v, 1.0)
    }

    pub fn plus(mut self, v: ScalarVar, a: f64) -> Self {
        self.scalars.push((v, a));
        self
    }

    /// Adds `tr(C·X)`.
    pub fn plus_trace(mut self, x: MatVar, c: HermitianMatrix) -> Self {
        self.traces.push((x, c));
        self
    }

    /// Adds `w · v X v*` for a row vector `v`.
    pub fn plus_quadratic(self, x: MatVar, v: &ComplexMatrix, w: f64) -> Self {
        self.plus_trace(x, v.outer().scale(w))
    }

    pub fn plus_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }
}

/// `C + Σ x·H + Σ w·G X G*`: an affine Hermitian-matrix-valued expression.
#[derive(Clone, Debug)]
pub struct AffineHermitian {
    pub constant: HermitianMatrix,
    pub scalars: Vec<(ScalarVar, HermitianMatrix)>,
    pub congruences: Vec<(MatVar, f64, ComplexMatrix)>,
}

impl AffineHermitian {
    pub fn zeros(dim: usize) -> Self {
        Self {
            constant: HermitianMatrix::zeros(dim),
            scalars: Vec::new(),
            congruences: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.constant.dim()
    }

    pub fn with_constant(mut self, c: HermitianMatrix) -> Self {
        self.constant = c;
        self
    }

    pub fn plus_scalar(mut self, v: ScalarVar, h: HermitianMatrix) -> Self {
        self.scalars.push((v, h));
        self
    }

    /// Adds `w · G X G*`.
    pub fn plus_congruence(mut self, x: MatVar, w: f64, g: ComplexMatrix) -> Self {
        self.congruences.push((x, w, g));
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    /// `expr ≤ 0`
    LessEq,
    /// `expr = 0`, handled as a pair of inequalities sharing the feasibility tolerance.
    Eq,
}

/// A block LMI system with a linear objective (minimized).
#[derive(Clone, Debug, Default)]
pub struct LmiProblem {
    pub(crate) vars: Vec<VarDecl>,
    pub(crate) objective: AffineScalar,
    pub(crate) lmis: Vec<(String, AffineHermitian)>,
    pub(crate) linear: Vec<(String, AffineScalar, Relation)>,
}

impl LmiProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn hermitian_psd(&mut self, name: &str, dim: usize) -> MatVar {
        self.vars.push(VarDecl {
            name: name.to_string(),
            kind: VarKind::HermitianPsd(dim),
        });
        MatVar(self.vars.len() - 1)
    }

    pub fn nonneg(&mut self, name: &str) -> ScalarVar {
        self.vars.push(VarDecl {
            name: name.to_string(),
            kind: VarKind::Nonneg,
        });
        ScalarVar(self.vars.len() - 1)
    }

    pub fn free(&mut self, name: &str) -> ScalarVar {
        self.vars.push(VarDecl {
            name: name.to_string(),
            kind: VarKind::Free,
        });
        ScalarVar(self.vars.len() - 1)
    }

    pub fn minimize(&mut self, objective: AffineScalar) {
        self.objective = objective;
    }

    /// Requires `expr ⪰ 0`.
    pub fn add_lmi(&mut self, label: &str, expr: AffineHermitian) -> ConstraintId {
        self.lmis.push((label.to_string(), expr));
        ConstraintId::Lmi(self.lmis.len() - 1)
    }

    /// Requires `expr ≤ 0`.
    pub fn add_le(&mut self, label: &str, expr: AffineScalar) -> ConstraintId {
        self.linear
            .push((label.to_string(), expr, Relation::LessEq));
        ConstraintId::Linear(self.linear.len() - 1)
    }

    /// Requires `expr = 0`.
    pub fn add_eq(&mut self, label: &str, expr: AffineScalar) -> ConstraintId {
        self.linear.push((label.to_string(), expr, Relation::Eq));
        ConstraintId::Linear(self.linear.len() - 1)
    }

    pub fn vars(&self) -> &[VarDecl] {
        &self.vars
    }

    pub fn lmi_count(&self) -> usize {
        self.lmis.len()
    }

    pub fn linear_count(&self) -> usize {
        self.linear.len()
    }

    pub fn lmi(&self, i: usize) -> (&str, &AffineHermitian) {
        let (l, e) = &self.lmis[i];
        (l, e)
    }

    pub fn linear(&self, i: usize) -> (&str, &AffineScalar, Relation) {
        let (l, e, r) = &self.linear[i];
        (l, e, *r)
    }

    pub fn objective(&self) -> &AffineScalar {
        &self.objective
    }

    pub fn has_objective(&self) -> bool {
        let o = &self.objective;
        o.constant != 0.0 || !o.scalars.is_empty() || !o.traces.is_empty()
    }

    /// Checks that every expression refers to declared variables of the
    /// right kind and that all dimensions agree.
    pub fn validate(&self) -> Result<()> {
        let scalar_ok = |v: &ScalarVar| -> Result<()> {
            match self.vars.get(v.0).map(|d| d.kind) {
                Some(VarKind::Nonneg) | Some(VarKind::Free) => Ok(()),
                _ => Err(Error::InvalidArgument(format!(
                    "scalar handle {} is not a scalar",
                    v.0
                ))),
            }
        };
        let mat_dim = |x: &MatVar| -> Result<usize> {
            match self.vars.get(x.0).map(|d| d.kind) {
                Some(VarKind::HermitianPsd(n)) => Ok(n),
                _ => Err(Error::InvalidArgument(format!(
                    "matrix handle {} is not a matrix",
                    x.0
                ))),
            }
        };
        let check_scalar = |e: &AffineScalar| -> Result<()> {
            for (v, _) in &e.scalars {
                scalar_ok(v)?;
            }
            for (x, c) in &e.traces {
                if mat_dim(x)? != c.dim() {
                    return Err(Error::Dimension(format!(
                        "trace coefficient for {} has dim {}",
                        self.vars[x.0].name,
                        c.dim()
                    )));
                }
            }
            Ok(())
        };
        check_scalar(&self.objective)?;
        for (_, e, _) in &self.linear {
            check_scalar(e)?;
        }
        for (label, e) in &self.lmis {
            let d = e.dim();
            for (v, h) in &e.scalars {
                scalar_ok(v)?;
                if h.dim() != d {
                    return Err(Error::Dimension(format!(
                        "LMI '{label}': scalar coefficient dim {}",
                        h.dim()
                    )));
                }
            }
            for (x, _, g) in &e.congruences {
                let n = mat_dim(x)?;
                if g.rows() != d || g.cols() != n {
                    return Err(Error::Dimension(format!(
                        "LMI '{label}': congruence factor is {}x{}, expected {d}x{n}",
                        g.rows(),
                        g.cols()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Plain-text listing of every block: the constant matrix and one
    /// coefficient matrix per variable term, complex entries as `a+bi`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# variables");
        for d in &self.vars {
            let _ = writeln!(out, "{} {:?}", d.name, d.kind);
        }
        for (label, e) in &self.lmis {
            let _ = writeln!(out, "\n# lmi {label} (dim {}) >= 0", e.dim());
            let _ = writeln!(out, "constant:");
            write_matrix(&mut out, &e.constant);
            for (v, h) in &e.scalars {
                let _ = writeln!(out, "coefficient of {}:", self.vars[v.0].name);
                write_matrix(&mut out, h);
            }
            for (x, w, g) in &e.congruences {
                let _ = writeln!(out, "congruence {w:+} * G {} G*, G =", self.vars[x.0].name);
                write_complex_rows(&mut out, g);
            }
        }
        for (label, e, rel) in &self.linear {
            let op = match rel {
                Relation::LessEq => "<= 0",
                Relation::Eq => "= 0",
            };
            let _ = writeln!(out, "\n# linear {label} {op}");
            let _ = writeln!(
                out,
                "constant: {}",
                fmt_complex(Complex64::new(e.constant, 0.0))
            );
            for (v, a) in &e.scalars {
                let _ = writeln!(
                    out,
                    "{}: {}",
                    self.vars[v.0].name,
                    fmt_complex(Complex64::new(*a, 0.0))
                );
            }
            for (x, c) in &e.traces {
                let _ = writeln!(out, "trace with {}:", self.vars[x.0].name);
                write_matrix(&mut out, c);
            }
        }
        out
    }
}

pub(crate) fn fmt_complex(z: Complex64) -> String {
    let sign = if z.im < 0.0 || (z.im == 0.0 && z.im.is_sign_negative()) {
        '-'
    } else {
        '+'
    };
    format!("{:.9e}{}{:.9e}i", z.re, sign, z.im.abs())
}

fn write_matrix(out: &mut String, m: &HermitianMatrix) {
    for r in 0..m.dim() {
        let row: Vec<String> = (0..m.dim()).map(|c| fmt_complex(m.get(r, c))).collect();
        let _ = writeln!(out, "  {}", row.join(" "));
    }
}

fn write_complex_rows(out: &mut String, m: &ComplexMatrix) {
    for r in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|c| fmt_complex(m.get(r, c))).collect();
        let _ = writeln!(out, "  {}", row.join(" "));
    }
}
