//! Primal-dual interior point method on a real conic problem
//!
//! ```text
//! minimize cᵀx  s.t.  f0ᵢ + aᵢᵀx ≥ 0          (linear rows)
//!                     F0ⱼ + Σ xₖ Fⱼₖ ⪰ 0      (symmetric blocks)
//! ```
//!
//! with Nesterov-Todd scaling and Mehrotra predictor-corrector steps.
//! Linear rows are 1×1 cones handled with scalar arithmetic.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen, SVD};

#[derive(Clone, Debug)]
pub(crate) struct LinRow {
    pub f0: f64,
    pub terms: Vec<(usize, f64)>,
}

#[derive(Clone, Debug)]
pub(crate) struct PsdBlock {
    pub f0: DMatrix<f64>,
    pub terms: Vec<(usize, DMatrix<f64>)>,
}

impl PsdBlock {
    pub fn dim(&self) -> usize {
        self.f0.nrows()
    }
}

#[derive(Clone, Debug)]
pub(crate) struct ConeProblem {
    pub n: usize,
    pub c: Vec<f64>,
    pub lin: Vec<LinRow>,
    pub psd: Vec<PsdBlock>,
}

impl ConeProblem {
    pub fn lin_value(&self, i: usize, x: &[f64]) -> f64 {
        let row = &self.lin[i];
        row.f0 + row.terms.iter().map(|&(k, a)| a * x[k]).sum::<f64>()
    }

    pub fn psd_value(&self, j: usize, x: &[f64]) -> DMatrix<f64> {
        let b = &self.psd[j];
        let mut m = b.f0.clone();
        for (k, f) in &b.terms {
            m += f * x[*k];
        }
        m
    }

    /// Barrier degree: total number of eigenvalues across all cones.
    pub fn degree(&self) -> usize {
        self.lin.len() + self.psd.iter().map(PsdBlock::dim).sum::<usize>()
    }

    /// Largest amount by which `x` violates any cone (0 when feasible).
    pub fn violation(&self, x: &[f64], lin_offsets: &[f64]) -> f64 {
        let mut v: f64 = 0.0;
        for i in 0..self.lin.len() {
            let off = lin_offsets.get(i).copied().unwrap_or(0.0);
            v = v.max(off - self.lin_value(i, x));
        }
        for j in 0..self.psd.len() {
            v = v.max(-min_eig(&self.psd_value(j, x)));
        }
        v.max(0.0)
    }

    /// Smallest eigenvalue over all cones at `x`.
    pub fn min_slack(&self, x: &[f64]) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.lin.len() {
            m = m.min(self.lin_value(i, x));
        }
        for j in 0..self.psd.len() {
            m = m.min(min_eig(&self.psd_value(j, x)));
        }
        m
    }
}

pub(crate) fn min_eig(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug)]
pub(crate) struct Iterate {
    pub x: Vec<f64>,
    pub ls: Vec<f64>,
    pub lz: Vec<f64>,
    pub ps: Vec<DMatrix<f64>>,
    pub pz: Vec<DMatrix<f64>>,
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Status {
    pub pobj: f64,
    pub dobj: f64,
    /// Max-abs primal residual `F(x) − S`.
    pub pinf: f64,
    /// Max-abs dual residual `c − A*(Z)`.
    pub dinf: f64,
    /// `⟨S, Z⟩`.
    pub gap: f64,
}

pub(crate) enum Control {
    Continue,
    Stop,
}

#[derive(Debug)]
pub(crate) enum Exit {
    Stopped,
    IterationLimit,
    Breakdown(String),
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct IpmParams {
    pub max_iter: usize,
    pub step_fraction: f64,
}

struct Scaling {
    /// `w = sqrt(s/z)` for each linear row.
    lin_w: Vec<f64>,
    lin_lam: Vec<f64>,
    /// `R` with `R⁻¹ S R⁻ᵀ = Rᵀ Z R = Λ`.
    r: Vec<DMatrix<f64>>,
    rinv: Vec<DMatrix<f64>>,
    lam: Vec<Vec<f64>>,
    /// Scaled coefficient matrices, same layout as the block terms.
    ft: Vec<Vec<DMatrix<f64>>>,
    rp_lin: Vec<f64>,
    rp_psd: Vec<DMatrix<f64>>,
}

struct Direction {
    dx: Vec<f64>,
    ds_lin: Vec<f64>,
    dz_lin: Vec<f64>,
    ds_psd: Vec<DMatrix<f64>>,
    dz_psd: Vec<DMatrix<f64>>,
}

fn frob_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub(crate) fn status(
    p: &ConeProblem,
    it: &Iterate,
) -> (Status, Vec<f64>, Vec<DMatrix<f64>>, Vec<f64>) {
    let x = &it.x;
    let mut pinf: f64 = 0.0;
    let rp_lin: Vec<f64> = (0..p.lin.len())
        .map(|i| {
            let r = p.lin_value(i, x) - it.ls[i];
            pinf = pinf.max(r.abs());
            r
        })
        .collect();
    let rp_psd: Vec<DMatrix<f64>> = (0..p.psd.len())
        .map(|j| {
            let r = p.psd_value(j, x) - &it.ps[j];
            pinf = pinf.max(r.amax());
            r
        })
        .collect();
    let mut rd = p.c.clone();
    let mut dobj = 0.0;
    let mut gap = 0.0;
    for (i, row) in p.lin.iter().enumerate() {
        let z = it.lz[i];
        for &(k, a) in &row.terms {
            rd[k] -= a * z;
        }
        dobj -= row.f0 * z;
        gap += it.ls[i] * z;
    }
    for (j, b) in p.psd.iter().enumerate() {
        let z = &it.pz[j];
        for (k, f) in &b.terms {
            rd[*k] -= frob_dot(f, z);
        }
        dobj -= frob_dot(&b.f0, z);
        gap += frob_dot(&it.ps[j], z);
    }
    let pobj: f64 = p.c.iter().zip(x).map(|(c, x)| c * x).sum();
    let dinf = rd.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    (
        Status {
            pobj,
            dobj,
            pinf,
            dinf,
            gap,
        },
        rp_lin,
        rp_psd,
        rd,
    )
}

fn scaling(
    p: &ConeProblem,
    it: &Iterate,
    rp_lin: Vec<f64>,
    rp_psd: Vec<DMatrix<f64>>,
) -> Result<Scaling, String> {
    let mut lin_w = Vec::with_capacity(p.lin.len());
    let mut lin_lam = Vec::with_capacity(p.lin.len());
    for i in 0..p.lin.len() {
        let (s, z) = (it.ls[i], it.lz[i]);
        if !(s > 0.0 && z > 0.0) {
            return Err(format!(
                "linear cone {i} left the interior (s={s:e}, z={z:e})"
            ));
        }
        lin_w.push((s / z).sqrt());
        lin_lam.push((s * z).sqrt());
    }
    let mut r = Vec::with_capacity(p.psd.len());
    let mut rinv = Vec::with_capacity(p.psd.len());
    let mut lam = Vec::with_capacity(p.psd.len());
    let mut ft = Vec::with_capacity(p.psd.len());
    let mut rp_scaled = Vec::with_capacity(p.psd.len());
    for (j, b) in p.psd.iter().enumerate() {
        let ls = Cholesky::new(it.ps[j].clone())
            .ok_or_else(|| format!("block {j}: S lost definiteness"))?;
        let lz = Cholesky::new(it.pz[j].clone())
            .ok_or_else(|| format!("block {j}: Z lost definiteness"))?;
        let ls = ls.l();
        let lzt = lz.l().transpose();
        let svd = SVD::new(&lzt * &ls, true, true);
        let u = svd.u.ok_or("svd failed")?;
        let vt = svd.v_t.ok_or("svd failed")?;
        let l: Vec<f64> = svd.singular_values.iter().copied().collect();
        if l.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(format!("block {j}: degenerate scaling"));
        }
        let n = l.len();
        let mut rj = &ls * vt.transpose();
        let mut rij = u.transpose() * &lzt;
        for k in 0..n {
            let f = l[k].sqrt();
            rj.column_mut(k).scale_mut(1.0 / f);
            rij.row_mut(k).scale_mut(1.0 / f);
        }
        let rit = rij.transpose();
        ft.push(b.terms.iter().map(|(_, f)| &rij * f * &rit).collect());
        let mut rps = &rij * &rp_psd[j] * &rit;
        symmetrize(&mut rps);
        rp_scaled.push(rps);
        r.push(rj);
        rinv.push(rij);
        lam.push(l);
    }
    let rp_lin = rp_lin.iter().zip(&lin_w).map(|(r, w)| r / w).collect();
    Ok(Scaling {
        lin_w,
        lin_lam,
        r,
        rinv,
        lam,
        ft,
        rp_lin,
        rp_psd: rp_scaled,
    })
}

fn schur(p: &ConeProblem, sc: &Scaling) -> DMatrix<f64> {
    let mut m = DMatrix::<f64>::zeros(p.n, p.n);
    for (i, row) in p.lin.iter().enumerate() {
        let w2 = sc.lin_w[i] * sc.lin_w[i];
        for &(a, fa) in &row.terms {
            for &(b, fb) in &row.terms {
                m[(a, b)] += fa * fb / w2;
            }
        }
    }
    for (j, b) in p.psd.iter().enumerate() {
        let ft = &sc.ft[j];
        for (ia, (a, _)) in b.terms.iter().enumerate() {
            for (ib, (bb, _)) in b.terms.iter().enumerate().skip(ia) {
                let v = frob_dot(&ft[ia], &ft[ib]);
                m[(*a, *bb)] += v;
                if ia != ib {
                    m[(*bb, *a)] += v;
                }
            }
        }
    }
    m
}

fn factor(m: DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    let scale = (0..m.nrows())
        .map(|i| m[(i, i)].abs())
        .fold(0.0_f64, f64::max)
        .max(1e-300);
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(c);
    }
    let mut reg = 1e-14;
    while reg < 1e-4 {
        let mut mm = m.clone();
        for i in 0..mm.nrows() {
            mm[(i, i)] += reg * scale;
        }
        if let Some(c) = Cholesky::new(mm) {
            return Some(c);
        }
        reg *= 100.0;
    }
    None
}

fn direction(
    p: &ConeProblem,
    sc: &Scaling,
    chol: &Cholesky<f64, nalgebra::Dyn>,
    rd: &[f64],
    rc_lin: &[f64],
    rc_psd: &[DMatrix<f64>],
) -> Direction {
    let mut rhs = nalgebra::DVector::<f64>::from_iterator(p.n, rd.iter().map(|v| -v));
    for (i, row) in p.lin.iter().enumerate() {
        let d = rc_lin[i] - sc.rp_lin[i];
        let w = sc.lin_w[i];
        for &(k, a) in &row.terms {
            rhs[k] += a / w * d;
        }
    }
    let diffs: Vec<DMatrix<f64>> = (0..p.psd.len())
        .map(|j| &rc_psd[j] - &sc.rp_psd[j])
        .collect();
    for (j, b) in p.psd.iter().enumerate() {
        for (t, (k, _)) in b.terms.iter().enumerate() {
            rhs[*k] += frob_dot(&sc.ft[j][t], &diffs[j]);
        }
    }
    let dx = chol.solve(&rhs);
    let dx: Vec<f64> = dx.iter().copied().collect();

    let mut ds_lin = Vec::with_capacity(p.lin.len());
    let mut dz_lin = Vec::with_capacity(p.lin.len());
    for (i, row) in p.lin.iter().enumerate() {
        let w = sc.lin_w[i];
        let ds = sc.rp_lin[i] + row.terms.iter().map(|&(k, a)| a / w * dx[k]).sum::<f64>();
        ds_lin.push(ds);
        dz_lin.push(rc_lin[i] - ds);
    }
    let mut ds_psd = Vec::with_capacity(p.psd.len());
    let mut dz_psd = Vec::with_capacity(p.psd.len());
    for (j, b) in p.psd.iter().enumerate() {
        let mut ds = sc.rp_psd[j].clone();
        for (t, (k, _)) in b.terms.iter().enumerate() {
            ds += &sc.ft[j][t] * dx[*k];
        }
        symmetrize(&mut ds);
        dz_psd.push(&rc_psd[j] - &ds);
        ds_psd.push(ds);
    }
    Direction {
        dx,
        ds_lin,
        dz_lin,
        ds_psd,
        dz_psd,
    }
}

/// Largest α ≤ ∞ with Λ + α·D ⪰ 0 for the primal (`dual = false`) or dual part.
fn max_step(sc: &Scaling, d: &Direction, dual: bool) -> f64 {
    let mut a = f64::INFINITY;
    let (dl, dp) = if dual {
        (&d.dz_lin, &d.dz_psd)
    } else {
        (&d.ds_lin, &d.ds_psd)
    };
    for (i, v) in dl.iter().enumerate() {
        if *v < 0.0 {
            a = a.min(-sc.lin_lam[i] / v);
        }
    }
    for (j, m) in dp.iter().enumerate() {
        let lam = &sc.lam[j];
        let n = lam.len();
        let mut t = m.clone();
        for r in 0..n {
            for c in 0..n {
                t[(r, c)] /= (lam[r] * lam[c]).sqrt();
            }
        }
        let e = min_eig(&t);
        if e < 0.0 {
            a = a.min(-1.0 / e);
        }
    }
    a
}

/// Runs the method from `it` until the monitor stops it, the iteration cap
/// is hit, or the iterate breaks down. Returns the exit reason and the
/// number of iterations taken.
pub(crate) fn run(
    p: &ConeProblem,
    it: &mut Iterate,
    params: IpmParams,
    mut monitor: impl FnMut(&Iterate, &Status) -> Control,
) -> (Exit, usize) {
    let nu = p.degree().max(1) as f64;
    for iter in 0..params.max_iter {
        let (st, rp_lin, rp_psd, rd) = status(p, it);
        if let Control::Stop = monitor(it, &st) {
            return (Exit::Stopped, iter);
        }
        if !(st.gap.is_finite() && st.pobj.is_finite() && st.dobj.is_finite()) {
            return (Exit::Breakdown("non-finite iterate".into()), iter);
        }
        let sc = match scaling(p, it, rp_lin, rp_psd) {
            Ok(s) => s,
            Err(e) => return (Exit::Breakdown(e), iter),
        };
        let chol = match factor(schur(p, &sc)) {
            Some(c) => c,
            None => return (Exit::Breakdown("Schur complement is singular".into()), iter),
        };
        let mu = st.gap / nu;

        // Predictor.
        let rc_lin: Vec<f64> = sc.lin_lam.iter().map(|l| -l).collect();
        let rc_psd: Vec<DMatrix<f64>> = sc
            .lam
            .iter()
            .map(|l| -DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(l)))
            .collect();
        let aff = direction(p, &sc, &chol, &rd, &rc_lin, &rc_psd);
        let ap = max_step(&sc, &aff, false).min(1.0);
        let ad = max_step(&sc, &aff, true).min(1.0);
        let mut mu_aff = 0.0;
        for i in 0..p.lin.len() {
            let l = sc.lin_lam[i];
            mu_aff += (l + ap * aff.ds_lin[i]) * (l + ad * aff.dz_lin[i]);
        }
        for j in 0..p.psd.len() {
            let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&sc.lam[j]));
            let s = &lam + &aff.ds_psd[j] * ap;
            let z = &lam + &aff.dz_psd[j] * ad;
            mu_aff += frob_dot(&s, &z);
        }
        mu_aff /= nu;
        let sigma = if mu > 0.0 {
            (mu_aff / mu).clamp(0.0, 1.0).powi(3)
        } else {
            0.0
        };

        // Corrector.
        let target = sigma * mu;
        let rc_lin: Vec<f64> = (0..p.lin.len())
            .map(|i| {
                let l = sc.lin_lam[i];
                (target - l * l - aff.ds_lin[i] * aff.dz_lin[i]) / l
            })
            .collect();
        let rc_psd: Vec<DMatrix<f64>> = (0..p.psd.len())
            .map(|j| {
                let lam = &sc.lam[j];
                let n = lam.len();
                let sz = &aff.ds_psd[j] * &aff.dz_psd[j];
                let mut rc = DMatrix::zeros(n, n);
                for r in 0..n {
                    for c in 0..n {
                        let mut v = -0.5 * (sz[(r, c)] + sz[(c, r)]);
                        if r == c {
                            v += target - lam[r] * lam[r];
                        }
                        rc[(r, c)] = v * 2.0 / (lam[r] + lam[c]);
                    }
                }
                rc
            })
            .collect();
        let d = direction(p, &sc, &chol, &rd, &rc_lin, &rc_psd);
        let ap = (params.step_fraction * max_step(&sc, &d, false)).min(1.0);
        let ad = (params.step_fraction * max_step(&sc, &d, true)).min(1.0);
        if ap < 1e-12 && ad < 1e-12 {
            return (Exit::Breakdown("step length underflow".into()), iter);
        }

        for (k, v) in d.dx.iter().enumerate() {
            it.x[k] += ap * v;
        }
        for i in 0..p.lin.len() {
            let w = sc.lin_w[i];
            it.ls[i] += ap * w * d.ds_lin[i];
            it.lz[i] += ad * d.dz_lin[i] / w;
        }
        for j in 0..p.psd.len() {
            let r = &sc.r[j];
            let ri = &sc.rinv[j];
            it.ps[j] += (r * &d.ds_psd[j] * r.transpose()) * ap;
            it.pz[j] += (ri.transpose() * &d.dz_psd[j] * ri) * ad;
            symmetrize(&mut it.ps[j]);
            symmetrize(&mut it.pz[j]);
        }
    }
    (Exit::IterationLimit, params.max_iter)
}
