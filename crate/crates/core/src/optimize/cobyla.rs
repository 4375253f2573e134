//! Bound-constrained COBYLA.
//!
//! Keeps a simplex of `p + 1` evaluated points, fits the linear interpolant of
//! the objective through them, and steps to the minimiser of that model inside
//! the trust region `‖d‖ ≤ ρ` intersected with the box. Bound constraints are
//! linear, so their interpolants are exact and every evaluated point is
//! feasible. `ρ` is halved whenever the simplex is well shaped and the model
//! step stops paying off, down to `rho_end`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

// Simplex acceptability: edge lengths at most BETA·ρ, vertex-to-face distances at least ALPHA·ρ.
const ALPHA: f64 = 0.25;
const BETA: f64 = 2.1;
// Length of a geometry-repair step relative to ρ.
const GAMMA: f64 = 0.5;
// Below this actual/predicted ratio a step counts as unsuccessful.
const RATIO_POOR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub rho_begin: f64,
    pub rho_end: f64,
    pub max_evals: usize,
    /// Stop as soon as an objective value at or below this is seen.
    pub f_target: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            rho_begin: 1.0,
            rho_end: 1e-6,
            max_evals: 1000,
            f_target: None,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_end > 0.0 && self.rho_end < self.rho_begin && self.rho_begin.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < rho_end < rho_begin, got {} and {}",
                self.rho_end, self.rho_begin
            )));
        }
        if self.max_evals == 0 {
            return Err(Error::InvalidParameter("max_evals must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CobylaStatus {
    /// Trust region reached `rho_end`.
    Converged,
    /// Evaluation budget ran out first.
    BudgetExhausted,
    /// An objective value met `f_target`.
    TargetReached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CobylaResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub status: CobylaStatus,
}

struct Stop(CobylaStatus);

struct Evaluator<'a, F> {
    objective: F,
    bounds: &'a [(f64, f64)],
    cfg: &'a OptimizerConfig,
    evals: usize,
    best: (Vec<f64>, f64),
}

impl<F: FnMut(&[f64]) -> f64> Evaluator<'_, F> {
    fn eval(&mut self, x: &[f64]) -> std::result::Result<f64, Stop> {
        if self.evals >= self.cfg.max_evals {
            return Err(Stop(CobylaStatus::BudgetExhausted));
        }
        let x: Vec<f64> = x
            .iter()
            .zip(self.bounds)
            .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
            .collect();
        let raw = (self.objective)(&x);
        // NaN is treated as the worst possible value.
        let f = if raw.is_nan() { f64::INFINITY } else { raw };
        self.evals += 1;
        if f < self.best.1 {
            self.best = (x, f);
        }
        if self.cfg.f_target.is_some_and(|t| f <= t) {
            return Err(Stop(CobylaStatus::TargetReached));
        }
        Ok(f)
    }
}

/// Minimises `objective` over the box `bounds` starting from `x0`.
///
/// The objective is called at most `max_evals` times; running out of budget is
/// reported through [`CobylaStatus::BudgetExhausted`] rather than an error.
pub fn cobyla_minimize<F>(
    objective: F,
    x0: &[f64],
    bounds: &[(f64, f64)],
    cfg: &OptimizerConfig,
) -> Result<CobylaResult>
where
    F: FnMut(&[f64]) -> f64,
{
    cfg.validate()?;
    let p = x0.len();
    if p == 0 {
        return Err(Error::Empty("start point"));
    }
    check_len("bounds", p, bounds.len())?;
    for (i, ((lo, hi), x)) in bounds.iter().zip(x0).enumerate() {
        let inside = lo <= hi && (lo..=hi).contains(&x);
        if !inside {
            return Err(Error::InvalidParameter(format!(
                "start coordinate {i} = {x} outside [{lo}, {hi}]"
            )));
        }
    }

    let mut ev = Evaluator {
        objective,
        bounds,
        cfg,
        evals: 0,
        best: (x0.to_vec(), f64::INFINITY),
    };
    let status = match run(&mut ev, x0, p) {
        Ok(()) => CobylaStatus::Converged,
        Err(Stop(s)) => s,
    };
    Ok(CobylaResult {
        x: ev.best.0,
        f: ev.best.1,
        evals: ev.evals,
        status,
    })
}

fn run<F: FnMut(&[f64]) -> f64>(
    ev: &mut Evaluator<'_, F>,
    x0: &[f64],
    p: usize,
) -> std::result::Result<(), Stop> {
    let bounds = ev.bounds;
    let mut rho = ev.cfg.rho_begin;
    let rho_end = ev.cfg.rho_end;

    let mut verts: Vec<Vec<f64>> = vec![x0.to_vec()];
    let mut fvals: Vec<f64> = vec![ev.eval(x0)?];
    for i in 0..p {
        let mut v = x0.to_vec();
        let (lo, hi) = bounds[i];
        v[i] = if x0[i] + rho <= hi {
            x0[i] + rho
        } else if x0[i] - rho >= lo {
            x0[i] - rho
        } else if hi - x0[i] >= x0[i] - lo {
            hi
        } else {
            lo
        };
        fvals.push(ev.eval(&v)?);
        verts.push(v);
    }

    // Set after a step that was short or gained too little; the next pass then
    // repairs geometry or shrinks ρ.
    let mut needs_attention = false;
    // Geometry repairs since the last change of ρ; near active bounds the simplex
    // may not be repairable, so ρ is reduced anyway after p + 1 attempts.
    let mut repairs = 0;
    loop {
        let b = argmin(&fvals);
        let edges: Vec<Vec<f64>> = (0..=p)
            .filter(|&j| j != b)
            .map(|j| sub(&verts[j], &verts[b]))
            .collect();
        let others: Vec<usize> = (0..=p).filter(|&j| j != b).collect();

        let Some(inv) = invert_rows(&edges) else {
            // Collapsed simplex: rebuild around the best vertex.
            let (v, f) = rebuild_vertex(ev, &verts[b], &edges, rho, bounds)?;
            let j = others[degenerate_index(&edges)];
            verts[j] = v;
            fvals[j] = f;
            continue;
        };
        // gradient g solves edges · g = Δf
        let df: Vec<f64> = others.iter().map(|&j| fvals[j] - fvals[b]).collect();
        let grad: Vec<f64> = (0..p)
            .map(|c| (0..p).map(|r| inv[c][r] * df[r]).sum())
            .collect();

        // inv column r is the dual vector of edge r; distance of that vertex to the
        // opposite face is 1 / ‖dual‖.
        let lengths: Vec<f64> = edges.iter().map(|e| norm(e)).collect();
        let face_dist: Vec<f64> = (0..p)
            .map(|r| 1.0 / norm(&(0..p).map(|c| inv[c][r]).collect::<Vec<_>>()))
            .collect();
        let too_long = argmax(&lengths);
        let too_flat = argmin(&face_dist);
        let acceptable = lengths[too_long] <= BETA * rho && face_dist[too_flat] >= ALPHA * rho;

        if needs_attention {
            if !acceptable && repairs <= p {
                let r = if lengths[too_long] > BETA * rho {
                    too_long
                } else {
                    too_flat
                };
                let dual: Vec<f64> = (0..p).map(|c| inv[c][r]).collect();
                let dir = scale(&dual, 1.0 / norm(&dual));
                let v = geometry_point(&verts[b], &dir, &grad, GAMMA * rho, bounds);
                let f = ev.eval(&v)?;
                verts[others[r]] = v;
                fvals[others[r]] = f;
                needs_attention = false;
                repairs += 1;
                continue;
            }
            if rho <= rho_end {
                return Ok(());
            }
            rho = if 0.5 * rho <= 1.5 * rho_end {
                rho_end
            } else {
                0.5 * rho
            };
            repairs = 0;
            needs_attention = false;
            continue;
        }

        let step = trust_region_step(&verts[b], &grad, rho, bounds);
        let step_len = norm(&step);
        if step_len < 0.5 * rho {
            needs_attention = true;
            continue;
        }
        let trial = add(&verts[b], &step);
        let f_trial = ev.eval(&trial)?;
        let predicted = -dot(&grad, &step);
        let actual = fvals[b] - f_trial;
        let ratio = if predicted > 0.0 {
            actual / predicted
        } else {
            f64::NEG_INFINITY
        };

        // Barycentric weight of the step on each edge: replacing vertex r scales
        // the simplex volume by |weight_r|.
        let weights: Vec<f64> = (0..p)
            .map(|r| (0..p).map(|c| inv[c][r] * step[c]).sum())
            .collect();
        let score: Vec<f64> = (0..p)
            .map(|r| weights[r].abs() * (lengths[r] / rho).max(1.0))
            .collect();
        let r = argmax(&score);
        if f_trial < fvals[b] || score[r] > 1.0 {
            verts[others[r]] = trial;
            fvals[others[r]] = f_trial;
        }
        if ratio <= RATIO_POOR {
            needs_attention = true;
        }
    }
}

/// Minimiser of `g·d` over `‖d‖ ≤ ρ` and `lo ≤ x + d ≤ hi`:
/// `dᵢ(t) = clamp(−t gᵢ)`, with `t` chosen so that `‖d(t)‖ = ρ` when reachable.
fn trust_region_step(x: &[f64], grad: &[f64], rho: f64, bounds: &[(f64, f64)]) -> Vec<f64> {
    let at = |t: f64| -> Vec<f64> {
        x.iter()
            .zip(grad)
            .zip(bounds)
            .map(|((xi, gi), (lo, hi))| (-t * gi).clamp(lo - xi, hi - xi))
            .collect()
    };
    let gnorm = norm(grad);
    if gnorm == 0.0 {
        return vec![0.0; x.len()];
    }
    let mut hi_t = rho / gnorm;
    let mut grow = 0;
    while norm(&at(hi_t)) < rho && grow < 200 {
        hi_t *= 2.0;
        grow += 1;
    }
    if norm(&at(hi_t)) < rho {
        return at(hi_t);
    }
    let mut lo_t = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo_t + hi_t);
        if norm(&at(mid)) < rho {
            lo_t = mid;
        } else {
            hi_t = mid;
        }
    }
    at(lo_t)
}

/// New vertex at distance `len` from `base` along `±dir`, taking the sign that does
/// not increase the linear model and staying inside the box.
fn geometry_point(
    base: &[f64],
    dir: &[f64],
    grad: &[f64],
    len: f64,
    bounds: &[(f64, f64)],
) -> Vec<f64> {
    let preferred = if dot(grad, dir) <= 0.0 { 1.0 } else { -1.0 };
    let reach = |sign: f64| -> f64 {
        // largest t in [0, len] with base + t·sign·dir inside the box
        let mut t = len;
        for ((b, d), (lo, hi)) in base.iter().zip(dir).zip(bounds) {
            let d = sign * d;
            if d > 0.0 {
                t = t.min((hi - b) / d);
            } else if d < 0.0 {
                t = t.min((lo - b) / d);
            }
        }
        t.max(0.0)
    };
    let (mut sign, mut t) = (preferred, reach(preferred));
    if t < len {
        let t_other = reach(-preferred);
        if t_other > t {
            sign = -preferred;
            t = t_other;
        }
    }
    if t >= 0.5 * len {
        return base
            .iter()
            .zip(dir)
            .map(|(b, d)| b + sign * t * d)
            .collect();
    }
    // Both rays leave the box early: take the longer of the two clamped full-length steps.
    let clamped = |sign: f64| -> Vec<f64> {
        base.iter()
            .zip(dir)
            .zip(bounds)
            .map(|((b, d), (lo, hi))| (b + sign * len * d).clamp(*lo, *hi))
            .collect()
    };
    let a = clamped(preferred);
    let b = clamped(-preferred);
    if norm(&sub(&a, base)) >= norm(&sub(&b, base)) {
        a
    } else {
        b
    }
}

fn rebuild_vertex<F: FnMut(&[f64]) -> f64>(
    ev: &mut Evaluator<'_, F>,
    base: &[f64],
    edges: &[Vec<f64>],
    rho: f64,
    bounds: &[(f64, f64)],
) -> std::result::Result<(Vec<f64>, f64), Stop> {
    // Coordinate direction least represented among the remaining edges.
    let p = base.len();
    let worst = degenerate_index(edges);
    let mut best_axis = 0;
    let mut best_cover = f64::INFINITY;
    for axis in 0..p {
        let cover: f64 = edges
            .iter()
            .enumerate()
            .filter(|(r, _)| *r != worst)
            .map(|(_, e)| (e[axis] / norm(e).max(f64::MIN_POSITIVE)).abs())
            .fold(0.0, f64::max);
        if cover < best_cover {
            best_cover = cover;
            best_axis = axis;
        }
    }
    let mut dir = vec![0.0; p];
    dir[best_axis] = 1.0;
    let v = geometry_point(base, &dir, &vec![0.0; p], rho, bounds);
    let f = ev.eval(&v)?;
    Ok((v, f))
}

/// Edge that is shortest relative to the others, used when the edge matrix is singular.
fn degenerate_index(edges: &[Vec<f64>]) -> usize {
    let lengths: Vec<f64> = edges.iter().map(|e| norm(e)).collect();
    argmin(&lengths)
}

/// Inverse of the square matrix whose rows are `rows`, by Gauss-Jordan with partial pivoting.
fn invert_rows(rows: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = rows.len();
    let mut a: Vec<Vec<f64>> = rows.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let scale = rows.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let d = a[col][col];
        for k in 0..n {
            a[col][k] /= d;
            inv[col][k] /= d;
        }
        for r in 0..n {
            if r != col {
                let factor = a[r][col];
                if factor != 0.0 {
                    for k in 0..n {
                        a[r][k] -= factor * a[col][k];
                        inv[r][k] -= factor * inv[col][k];
                    }
                }
            }
        }
    }
    Some(inv)
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn box2() -> Vec<(f64, f64)> {
        vec![(-2.0 * PI, 2.0 * PI); 2]
    }

    #[test]
    fn shifted_quadratic() {
        let r = cobyla_minimize(
            |x| (x[0] - 1.0).powi(2) + (x[1] - 2.0).powi(2),
            &[0.0, 0.0],
            &box2(),
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert!(
            (r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 2.0).abs() < 1e-4,
            "{r:?}"
        );
        assert_eq!(r.status, CobylaStatus::Converged);
    }

    #[test]
    fn rosenbrock() {
        let r = cobyla_minimize(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
            &box2(),
            &OptimizerConfig {
                rho_begin: 0.5,
                rho_end: 1e-8,
                max_evals: 20_000,
                f_target: None,
            },
        )
        .unwrap();
        assert!(r.f < 1e-3, "{r:?}");
    }

    #[test]
    fn start_at_minimum() {
        let r = cobyla_minimize(
            |x| x.iter().map(|v| v * v).sum(),
            &[0.0, 0.0, 0.0],
            &[(-1.0, 1.0); 3],
            &OptimizerConfig {
                rho_begin: 0.5,
                rho_end: 1e-3,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.x, vec![0.0, 0.0, 0.0]);
        assert_eq!(r.f, 0.0);
        assert!(r.evals < 60, "{}", r.evals);
    }

    #[test]
    fn active_bound() {
        // unconstrained minimum at x = 3 lies outside the box
        let r = cobyla_minimize(
            |x| (x[0] - 3.0).powi(2) + x[1].powi(2),
            &[0.0, 0.5],
            &[(-1.0, 1.0), (-1.0, 1.0)],
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-6 && r.x[1].abs() < 1e-4, "{r:?}");
    }

    #[test]
    fn budget_and_target() {
        let mut calls = 0;
        let r = cobyla_minimize(
            |x| {
                calls += 1;
                (x[0] - 1.0).powi(2) + (x[1] + 0.5).powi(2)
            },
            &[4.0, 4.0],
            &box2(),
            &OptimizerConfig {
                max_evals: 7,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.status, CobylaStatus::BudgetExhausted);
        assert_eq!(r.evals, 7);
        assert_eq!(calls, 7);

        let r = cobyla_minimize(
            |x| x[0].abs(),
            &[0.0],
            &[(-1.0, 1.0)],
            &OptimizerConfig {
                f_target: Some(0.0),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!((r.status, r.evals), (CobylaStatus::TargetReached, 1));
    }

    #[test]
    fn never_leaves_box() {
        let bounds = vec![(0.0, 1.0), (-0.5, 0.25)];
        let r = cobyla_minimize(
            |x| {
                assert!(x[0] >= 0.0 && x[0] <= 1.0 && x[1] >= -0.5 && x[1] <= 0.25);
                -x[0] - 3.0 * x[1]
            },
            &[0.5, 0.0],
            &bounds,
            &OptimizerConfig {
                rho_begin: 2.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(
            (r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 0.25).abs() < 1e-6,
            "{r:?}"
        );
    }

    #[test]
    fn invalid_inputs() {
        let f = |x: &[f64]| x[0];
        let b = [(-1.0, 1.0)];
        let bad = OptimizerConfig {
            rho_begin: 1e-7,
            ..Default::default()
        };
        assert!(cobyla_minimize(f, &[0.0], &b, &bad).is_err());
        assert!(cobyla_minimize(f, &[2.0], &b, &OptimizerConfig::default()).is_err());
        assert!(cobyla_minimize(f, &[], &[], &OptimizerConfig::default()).is_err());
    }

    #[test]
    fn trust_region_step_respects_ball_and_box() {
        let d = trust_region_step(&[0.0, 0.0], &[1.0, 0.0], 0.5, &[(-1.0, 1.0); 2]);
        assert!((d[0] + 0.5).abs() < 1e-9 && d[1] == 0.0);
        // x-direction blocked by the box; all remaining length goes into y
        let d = trust_region_step(&[-0.9, 0.0], &[1.0, 1.0], 1.0, &[(-1.0, 1.0); 2]);
        assert!((d[0] + 0.1).abs() < 1e-9, "{d:?}");
        assert!((norm(&d) - 1.0).abs() < 1e-9);
    }
}
