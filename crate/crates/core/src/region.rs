//! Rate grids, the bisection driver, region results and their staircase
//! boundaries. Shared by the perfect-CSI and robust sweeps.

use rayon::prelude::*;

use crate::channel::CovarianceDesign;
use crate::error::{Error, Result};

/// Uniform grid of rate targets plus the bisection tolerance on `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    /// Subdivisions of the user-1 rate interval.
    pub k: usize,
    /// Subdivisions of the user-2 rate interval.
    pub l: usize,
    pub zeta: f64,
    /// Explicit upper ends of the two target intervals. When unset the
    /// solver's capacities are used. Targets above the capacities are
    /// reported infeasible without solving.
    pub range: Option<(f64, f64)>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            k: 40,
            l: 40,
            zeta: 1e-4,
            range: None,
        }
    }
}

impl GridSpec {
    pub fn new(k: usize, l: usize, zeta: f64) -> Result<Self> {
        let g = Self {
            k,
            l,
            zeta,
            range: None,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_range(mut self, r1_max: f64, r2_max: f64) -> Self {
        self.range = Some((r1_max, r2_max));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.l == 0 {
            return Err(Error::InvalidArgument("grid needs k, l >= 1".into()));
        }
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return Err(Error::InvalidArgument("zeta must be positive".into()));
        }
        if let Some((a, b)) = self.range {
            if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
                return Err(Error::InvalidArgument(
                    "grid range must be finite and nonnegative".into(),
                ));
            }
        }
        Ok(())
    }

    /// Target rates `i·c/k`, `j·c/l` over `[0, c1] × [0, c2]` (or the explicit range).
    pub fn targets(&self, c1: f64, c2: f64) -> (Vec<f64>, Vec<f64>) {
        let (a, b) = self.range.unwrap_or((c1, c2));
        let axis = |hi: f64, n: usize| {
            (0..=n)
                .map(|i| if i == n { hi } else { hi * i as f64 / n as f64 })
                .collect()
        };
        (axis(a, self.k), axis(b, self.l))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CellStatus {
    Converged,
    /// The targets are not achievable even at the eavesdropper capacity level.
    Infeasible,
    /// The SDP solver failed (after one retry with a looser tolerance).
    Failed(String),
}

impl CellStatus {
    pub fn label(&self) -> &'static str {
        match self {
            CellStatus::Converged => "converged",
            CellStatus::Infeasible => "infeasible",
            CellStatus::Failed(_) => "failed",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RegionCell {
    pub k: usize,
    pub l: usize,
    pub r1_target: f64,
    pub r2_target: f64,
    /// Smallest feasible leakage SINR level found by bisection (`NaN` unless converged).
    pub t_min: f64,
    /// Certified user rates (the targets under perfect CSI, the worst-case
    /// lower bounds under imperfect CSI).
    pub r1: f64,
    pub r2: f64,
    /// Leakage rate `log2(1 + t_min)` (an upper bound under imperfect CSI).
    pub re: f64,
    /// `max(0, r1 + r2 − re)`.
    pub sum: f64,
    pub design: Option<CovarianceDesign>,
    pub status: CellStatus,
    /// Number of feasibility problems solved for this cell.
    pub solves: usize,
}

impl RegionCell {
    pub(crate) fn unsolved(
        k: usize,
        l: usize,
        r1_target: f64,
        r2_target: f64,
        status: CellStatus,
    ) -> Self {
        Self {
            k,
            l,
            r1_target,
            r2_target,
            t_min: f64::NAN,
            r1: f64::NAN,
            r2: f64::NAN,
            re: f64::NAN,
            sum: f64::NAN,
            design: None,
            status,
            solves: 0,
        }
    }

    pub fn is_converged(&self) -> bool {
        self.status == CellStatus::Converged
    }
}

#[derive(Clone, Debug)]
pub struct RegionResult {
    pub k: usize,
    pub l: usize,
    /// Row-major over `(k, l)`: index `k·(l_count) + l`.
    pub cells: Vec<RegionCell>,
    pub best: Option<usize>,
    pub sum_max: f64,
}

/// Sums closer than this are treated as ties.
const TIE_TOL: f64 = 1e-9;

impl RegionResult {
    pub(crate) fn assemble(k: usize, l: usize, cells: Vec<RegionCell>) -> Self {
        let mut best: Option<usize> = None;
        for (i, c) in cells.iter().enumerate() {
            if !c.is_converged() {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(b) => {
                    let cb = &cells[b];
                    let better = if (c.sum - cb.sum).abs() <= TIE_TOL {
                        (c.k + c.l, c.k) > (cb.k + cb.l, cb.k)
                    } else {
                        c.sum > cb.sum
                    };
                    Some(if better { i } else { b })
                }
            };
        }
        let sum_max = best.map(|b| cells[b].sum.max(0.0)).unwrap_or(0.0);
        Self {
            k,
            l,
            cells,
            best,
            sum_max,
        }
    }

    pub fn cell(&self, k: usize, l: usize) -> &RegionCell {
        &self.cells[k * (self.l + 1) + l]
    }

    pub fn best_cell(&self) -> Option<&RegionCell> {
        self.best.map(|b| &self.cells[b])
    }

    pub fn converged(&self) -> impl Iterator<Item = &RegionCell> {
        self.cells.iter().filter(|c| c.is_converged())
    }

    pub fn failed_count(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| matches!(c.status, CellStatus::Failed(_)))
            .count()
    }
}

/// Evaluates every grid cell with a deterministic parallel map; the result
/// order is the row-major cell order regardless of completion order.
pub(crate) fn sweep<F>(r1_targets: &[f64], r2_targets: &[f64], eval: F) -> Vec<RegionCell>
where
    F: Fn(usize, usize, f64, f64) -> RegionCell + Sync,
{
    let l_count = r2_targets.len();
    (0..r1_targets.len() * l_count)
        .into_par_iter()
        .map(|idx| {
            let (k, l) = (idx / l_count, idx % l_count);
            eval(k, l, r1_targets[k], r2_targets[l])
        })
        .collect()
}

#[derive(Debug)]
pub(crate) struct Bisection<T> {
    pub t_min: f64,
    pub payload: T,
    pub solves: usize,
}

/// Bisection on `t ∈ [0, t_hi]` for a monotone feasibility oracle that
/// returns the feasible point when there is one. Returns the upper end of
/// the final bracket (the smallest level known to be feasible) together
/// with the point found there.
pub(crate) fn bisect<T>(
    t_hi: f64,
    zeta: f64,
    rk1: f64,
    rl2: f64,
    mut feasible: impl FnMut(f64) -> Result<Option<T>>,
) -> Result<Bisection<T>> {
    let mut solves = 1;
    let Some(mut payload) = feasible(t_hi)? else {
        return Err(Error::InfeasibleAtCapacity { rk1, rl2 });
    };
    solves += 1;
    if let Some(p) = feasible(0.0)? {
        return Ok(Bisection {
            t_min: 0.0,
            payload: p,
            solves,
        });
    }
    let (mut lo, mut hi) = (0.0, t_hi);
    while hi - lo > zeta {
        let mid = 0.5 * (lo + hi);
        solves += 1;
        match feasible(mid)? {
            Some(p) => {
                hi = mid;
                payload = p;
            }
            None => lo = mid,
        }
    }
    Ok(Bisection {
        t_min: hi,
        payload,
        solves,
    })
}

/// Upper-right boundary of a union of sets
/// `{R1 ∈ [0, a], R2 ∈ [0, b], R1 + R2 ≤ s}` given as `(a, b, s)`, as
/// vertices sorted by `R1` (vertical drops appear as two vertices with the
/// same `R1`). Boxes with a nonpositive extent are ignored.
pub fn staircase(boxes: &[(f64, f64, f64)]) -> Vec<(f64, f64)> {
    // Effective extents: the diagonal can cut both sides.
    let mut cand: Vec<(f64, f64, f64)> = boxes
        .iter()
        .filter(|(a, b, s)| a.is_finite() && b.is_finite() && s.is_finite())
        .map(|&(a, b, s)| (a.min(s), b.min(s), s.min(a + b)))
        .filter(|&(a, b, s)| a >= 0.0 && b >= 0.0 && s > 0.0 && (a > 0.0 || b > 0.0))
        .collect();
    if cand.is_empty() {
        return Vec::new();
    }
    cand.sort_by(|x, y| y.partial_cmp(x).unwrap());
    cand.dedup();
    let mut pareto: Vec<(f64, f64, f64)> = Vec::new();
    for c in &cand {
        if !pareto
            .iter()
            .any(|p| p.0 >= c.0 && p.1 >= c.1 && p.2 >= c.2)
        {
            pareto.push(*c);
        }
    }

    let height = |x: f64, strict: bool| -> Option<f64> {
        pareto
            .iter()
            .filter(|(a, _, _)| if strict { *a > x } else { *a >= x })
            .map(|&(_, b, s)| {
                if x + b <= s + 1e-12 * (1.0 + s) {
                    b
                } else {
                    s - x
                }
            })
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
    };

    let xmax = pareto.iter().map(|p| p.0).fold(0.0, f64::max);
    let mut xs: Vec<f64> = vec![0.0];
    for &(a, _, s) in &pareto {
        xs.push(a);
        for &(_, b2, _) in &pareto {
            let x = s - b2;
            if x > 0.0 && x < xmax {
                xs.push(x);
            }
        }
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();

    let mut pts: Vec<(f64, f64)> = Vec::new();
    for &x in &xs {
        let y = height(x, false).unwrap_or(0.0).max(0.0);
        pts.push((x, y));
        let right = height(x, true).unwrap_or(0.0).max(0.0);
        if right < y {
            pts.push((x, right));
        }
    }
    // Drop vertices lying on the segment between their neighbours.
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        if out.last() == Some(&p) {
            continue;
        }
        while out.len() >= 2 {
            let (a, b) = (out[out.len() - 2], out[out.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross.abs() <= 1e-12 {
                out.pop();
            } else {
                break;
            }
        }
        out.push(p);
    }
    out
}

/// Staircase boundary of the region: one set per converged cell with
/// sides `(r1, r2)` and diagonal cut at `sum`.
pub fn region_polygon(r: &RegionResult) -> Vec<(f64, f64)> {
    let boxes: Vec<(f64, f64, f64)> = r.converged().map(|c| (c.r1, c.r2, c.sum)).collect();
    staircase(&boxes)
}

/// Value of a staircase boundary at `x`. `side` < 0 takes the limit from
/// the left, > 0 from the right, 0 the largest value attained at `x`.
/// Returns `None` outside `[0, xmax]`.
pub fn staircase_value(poly: &[(f64, f64)], x: f64, side: i8) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut take = |v: f64| best = Some(best.map_or(v, |b: f64| b.max(v)));
    for w in poly.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.0 == b.0 {
            if side == 0 && a.0 == x {
                take(a.1.max(b.1));
            }
            continue;
        }
        let inside = match side {
            s if s < 0 => a.0 < x && x <= b.0,
            s if s > 0 => a.0 <= x && x < b.0,
            _ => a.0 <= x && x <= b.0,
        };
        if inside {
            take(a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0));
        }
    }
    if poly.len() == 1 && poly[0].0 == x {
        take(poly[0].1);
    }
    best
}

/// Whether the region under `inner` lies within the region under `outer`,
/// with slack `tol` on both axes.
pub fn staircase_contains(outer: &[(f64, f64)], inner: &[(f64, f64)], tol: f64) -> bool {
    if inner.is_empty() {
        return true;
    }
    if outer.is_empty() {
        return inner.iter().all(|p| p.0 <= tol && p.1 <= tol);
    }
    let xmax = outer.last().map(|p| p.0).unwrap_or(0.0);
    let mut xs: Vec<f64> = outer.iter().chain(inner).map(|p| p.0).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    let outer_at = |x: f64, side: i8| -> f64 {
        if x > xmax + tol {
            return f64::NEG_INFINITY;
        }
        let x = x.min(xmax);
        // Horizontal slack: the outer boundary may be reached within `tol`.
        let probes = [x, (x + tol).min(xmax)];
        probes
            .iter()
            .filter_map(|&p| {
                staircase_value(outer, p, side).or_else(|| staircase_value(outer, p, 0))
            })
            .fold(f64::NEG_INFINITY, f64::max)
    };
    for &x in &xs {
        for side in [-1i8, 1] {
            if let Some(v) = staircase_value(inner, x, side) {
                if v > outer_at(x, side) + tol {
                    return false;
                }
            }
        }
    }
    true
}
