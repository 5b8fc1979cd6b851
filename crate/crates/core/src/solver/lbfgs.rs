//! Limited-memory BFGS with a strong-Wolfe line search and optional lower
//! bounds (used to keep stretch ratios above a positivity floor).

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_LINE_EVALS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub memory: usize,
    /// Stop when `|f_k - f_{k+1}| / |f_k|` falls below this.
    pub rel_tol: f64,
    /// Stop when the free-gradient max-norm falls below this.
    pub grad_tol: f64,
    pub max_iters: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            rel_tol: 1e-8,
            grad_tol: 1e-12,
            max_iters: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    RelativeDecrease,
    Gradient,
    MaxIterations,
    LineSearch,
}

#[derive(Debug, Clone)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Objective at `x0` followed by every accepted iterate.
    pub history: Vec<f64>,
    pub stop: StopReason,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Bounds<'a> {
    lower: Option<&'a [f64]>,
}

impl Bounds<'_> {
    fn lo(&self, i: usize) -> f64 {
        self.lower.map_or(f64::NEG_INFINITY, |l| l[i])
    }

    fn at_lower(&self, x: &[f64], i: usize) -> bool {
        let lo = self.lo(i);
        lo.is_finite() && x[i] <= lo + 1e-12 * lo.abs().max(1.0)
    }

    /// Zeroes direction components that would leave the feasible set.
    fn mask(&self, x: &[f64], d: &mut [f64]) {
        for i in 0..d.len() {
            if d[i] < 0.0 && self.at_lower(x, i) {
                d[i] = 0.0;
            }
        }
    }

    fn max_step(&self, x: &[f64], d: &[f64]) -> f64 {
        let mut a = f64::INFINITY;
        for i in 0..d.len() {
            let lo = self.lo(i);
            if d[i] < 0.0 && lo.is_finite() {
                a = a.min((x[i] - lo).max(0.0) / -d[i]);
            }
        }
        a
    }

    fn project(&self, x: &mut [f64]) {
        if let Some(l) = self.lower {
            for (xi, li) in x.iter_mut().zip(l) {
                *xi = xi.max(*li);
            }
        }
    }

    fn free_grad_norm(&self, x: &[f64], g: &[f64]) -> f64 {
        (0..g.len())
            .filter(|&i| !(g[i] > 0.0 && self.at_lower(x, i)))
            .fold(0.0f64, |m, i| m.max(g[i].abs()))
    }
}

struct Point {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

/// Minimizes `f` from `x0`. `lower`, when given, holds a lower bound per
/// coordinate (`-inf` for unbounded ones); `x0` is projected onto it first.
pub fn lbfgs_minimize<F>(mut f: F, x0: Vec<f64>, lower: Option<&[f64]>, opts: &LbfgsOptions) -> Result<LbfgsResult>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let bounds = Bounds { lower };
    let mut x0 = x0;
    bounds.project(&mut x0);
    let (f0, g0) = f(&x0);
    if !f0.is_finite() || g0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver(format!("objective is not finite at the starting point ({f0})")));
    }
    let mut evaluations = 1;
    let mut cur = Point { x: x0, f: f0, g: g0 };
    let mut history = vec![f0];
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let n = cur.x.len();

    let finish = |cur: Point, iterations, evaluations, history, stop| LbfgsResult {
        x: cur.x,
        value: cur.f,
        iterations,
        evaluations,
        history,
        stop,
    };

    if n == 0 || bounds.free_grad_norm(&cur.x, &cur.g) <= opts.grad_tol {
        return Ok(finish(cur, 0, evaluations, history, StopReason::Gradient));
    }

    for iter in 0..opts.max_iters {
        let mut d = two_loop(&cur.g, &memory);
        bounds.mask(&cur.x, &mut d);
        let mut slope = dot(&d, &cur.g);
        if slope >= 0.0 || !slope.is_finite() {
            memory.clear();
            d = cur.g.iter().map(|v| -v).collect();
            bounds.mask(&cur.x, &mut d);
            slope = dot(&d, &cur.g);
            if slope >= 0.0 {
                return Ok(finish(cur, iter, evaluations, history, StopReason::Gradient));
            }
        }
        let alpha0 = if memory.is_empty() {
            (1.0 / d.iter().fold(0.0f64, |m, v| m.max(v.abs()))).min(1.0)
        } else {
            1.0
        };
        let alpha_max = bounds.max_step(&cur.x, &d);
        let step = line_search(&mut f, &bounds, &cur, &d, slope, alpha0, alpha_max, &mut evaluations);
        let Some(next) = step else {
            if !memory.is_empty() {
                // Retry once from steepest descent before giving up.
                memory.clear();
                continue;
            }
            return Ok(finish(cur, iter, evaluations, history, StopReason::LineSearch));
        };

        let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.g.iter().zip(&cur.g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if memory.len() == opts.memory {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }
        let rel = (cur.f - next.f).abs() / cur.f.abs().max(f64::MIN_POSITIVE);
        cur = next;
        history.push(cur.f);
        if rel < opts.rel_tol {
            return Ok(finish(cur, iter + 1, evaluations, history, StopReason::RelativeDecrease));
        }
        if bounds.free_grad_norm(&cur.x, &cur.g) <= opts.grad_tol {
            return Ok(finish(cur, iter + 1, evaluations, history, StopReason::Gradient));
        }
    }
    let iters = opts.max_iters;
    Ok(finish(cur, iters, evaluations, history, StopReason::MaxIterations))
}

fn two_loop(g: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

#[allow(clippy::too_many_arguments)]
fn line_search<F>(
    f: &mut F,
    bounds: &Bounds<'_>,
    cur: &Point,
    d: &[f64],
    slope0: f64,
    alpha0: f64,
    alpha_max: f64,
    evaluations: &mut usize,
) -> Option<Point>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut eval = |a: f64| {
        *evaluations += 1;
        let mut x: Vec<f64> = cur.x.iter().zip(d).map(|(xi, di)| xi + a * di).collect();
        bounds.project(&mut x);
        let (fx, g) = f(&x);
        let slope = dot(&g, d);
        (Point { x, f: fx, g }, slope)
    };
    let armijo = |a: f64, fa: f64| fa.is_finite() && fa <= cur.f + C1 * a * slope0 && fa < cur.f;
    let curvature = |s: f64| s.abs() <= -C2 * slope0;

    let mut a_prev = 0.0;
    let mut f_prev = cur.f;
    let mut s_prev = slope0;
    let mut a = alpha0.min(alpha_max);
    if a <= 0.0 {
        return None;
    }
    let mut best: Option<Point> = None;
    let mut evals = 0;
    // (lo, f_lo, slope_lo, hi, f_hi): lo satisfies sufficient decrease.
    let bracket;
    loop {
        let (p, s) = eval(a);
        evals += 1;
        if !armijo(a, p.f) || (evals > 1 && p.f >= f_prev) {
            bracket = (a_prev, f_prev, s_prev, a, p.f);
            break;
        }
        if curvature(s) {
            return Some(p);
        }
        if s >= 0.0 {
            bracket = (a, p.f, s, a_prev, f_prev);
            best = Some(p);
            break;
        }
        if a >= alpha_max {
            // Blocked by a bound with sufficient decrease.
            return Some(p);
        }
        a_prev = a;
        f_prev = p.f;
        s_prev = s;
        best = Some(p);
        if evals >= MAX_LINE_EVALS {
            return best;
        }
        a = (2.0 * a).min(alpha_max);
    }

    let (mut lo, mut f_lo, mut s_lo, mut hi, mut f_hi) = bracket;
    while evals < MAX_LINE_EVALS {
        let (min, max) = if lo < hi { (lo, hi) } else { (hi, lo) };
        if max - min <= 1e-16 * max {
            break;
        }
        // Minimizer of the quadratic through (lo, f_lo, s_lo) and (hi, f_hi),
        // kept away from the bracket ends.
        let width = hi - lo;
        let curv = f_hi - f_lo - s_lo * width;
        let mut trial = lo - s_lo * width * width / (2.0 * curv);
        let pad = 0.1 * (max - min);
        if !trial.is_finite() || curv <= 0.0 || trial <= min + pad || trial >= max - pad {
            trial = 0.5 * (lo + hi);
        }
        let (p, s) = eval(trial);
        evals += 1;
        if !armijo(trial, p.f) || p.f >= f_lo {
            hi = trial;
            f_hi = p.f;
        } else {
            if curvature(s) {
                return Some(p);
            }
            if s * (hi - lo) >= 0.0 {
                hi = lo;
                f_hi = f_lo;
            }
            lo = trial;
            f_lo = p.f;
            s_lo = s;
            best = Some(p);
        }
    }
    best
}
