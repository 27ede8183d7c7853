//! Log-barrier interior method for one convex surrogate.
//!
//! Both slacks are tight at any minimiser, so they are eliminated first:
//! `z_m = g_lower_m(p)` and `y` is the positive root of
//! `C3 = y^2 (2 yl y + k(p))`, where `k` is affine in `p`. The reduced
//! objective is convex in `p` (`y` is a convex decreasing function of `k`),
//! and the barrier path runs over the two position coordinates only.
//! Keeping `y` as a free variable gives a narrow curved valley along the
//! propulsion constraint in which Newton steps crawl once the propulsion
//! weight is large.

use super::{cubic_root, g_expansion, g_lower, surrogate_objective, ScaIterate, SubproblemSolution, TrajectoryProblem};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::scalar::Scalar;

const T_START: f64 = 1.0;
const T_END: f64 = 1e8;
const T_FACTOR: f64 = 10.0;
const NEWTON_TOL: f64 = 1e-10;
const MAX_NEWTON: usize = 200;
const ARMIJO: f64 = 0.25;
const SHRINK: f64 = 0.5;

struct Reduced<'a, T> {
    prob: &'a TrajectoryProblem<T>,
    center: Vec2<T>,
    /// `f_lower = 2 yl y + k(p)` with `k = f0 + fp . d` and `d` the displacement.
    yl: T,
    f0: T,
    fp: Vec2<T>,
    /// `y <= y_max` holds iff `k >= k_min`.
    k_min: T,
    r2: T,
    y_max: T,
    /// Weight on slot propulsion power.
    a: T,
    coef: Vec<T>,
    /// `g_lower_m = g_l - kappa (|p - p_m|^2 - x_l)`.
    g_l: Vec<T>,
    kappa: Vec<T>,
    x_l: Vec<T>,
}

impl<'a, T: Scalar> Reduced<'a, T> {
    fn new(iterate: &ScaIterate<T>, prob: &'a TrajectoryProblem<T>) -> Self {
        let tau2 = prob.tau * prob.tau;
        let dl = iterate.local_point - prob.current_position;
        let yl = iterate.y_local;
        let two = T::lit(2.0);
        let c3 = prob.uav.c3;
        let y_max = T::lit(10.0) * c3.sqrt().sqrt();
        let k = prob.offloaders.len();
        let (mut g_l, mut kappa, mut x_l) = (Vec::with_capacity(k), Vec::with_capacity(k), Vec::with_capacity(k));
        for m in 0..k {
            let (g, kap, x) = g_expansion(m, iterate.local_point, prob);
            g_l.push(g);
            kappa.push(kap);
            x_l.push(x);
        }
        Self {
            prob,
            center: prob.current_position,
            yl,
            f0: -yl * yl - dl.norm_sq() / tau2,
            fp: dl * (two / tau2),
            k_min: c3 / (y_max * y_max) - two * yl * y_max,
            r2: prob.radius() * prob.radius(),
            y_max,
            a: prob.q_propulsion * prob.tau,
            coef: (0..k).map(|m| prob.comm_coefficient(m)).collect(),
            g_l,
            kappa,
            x_l,
        }
    }

    fn k_at(&self, p: Vec2<T>) -> T {
        self.f0 + self.fp.dot(p - self.center)
    }

    fn y_at(&self, p: Vec2<T>) -> T {
        cubic_root(T::lit(2.0) * self.yl, self.k_at(p), self.prob.uav.c3)
    }

    fn g_lower_at(&self, m: usize, p: Vec2<T>) -> T {
        self.g_l[m] - self.kappa[m] * (p.dist_sq(self.prob.offloaders[m].position) - self.x_l[m])
    }

    /// `t f(p) - log(r^2 - |d|^2) - log(k - k_min)`, or `None` outside the domain.
    fn barrier(&self, p: Vec2<T>, t: T) -> Option<T> {
        let h_disc = self.r2 - (p - self.center).norm_sq();
        let h_y = self.k_at(p) - self.k_min;
        if !(h_disc > T::zero() && h_y > T::zero()) {
            return None;
        }
        let mut z = Vec::with_capacity(self.coef.len());
        for m in 0..self.coef.len() {
            let g = self.g_lower_at(m, p);
            if !(g > T::zero()) {
                return None;
            }
            z.push(g);
        }
        let f = surrogate_objective(p, self.y_at(p), &z, self.prob);
        let val = t * f - h_disc.ln() - h_y.ln();
        val.is_finite().then_some(val)
    }

    /// Gradient and Hessian (row-major 2x2) of the barrier function.
    fn derivatives(&self, p: Vec2<T>, t: T) -> ([T; 2], [T; 4]) {
        let u = &self.prob.uav;
        let tau = self.prob.tau;
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let d = p - self.center;
        let dn = d.norm();
        let dd = [d.x, d.y];
        let fp = [self.fp.x, self.fp.y];
        let mut g = [T::zero(); 2];
        let mut h = [T::zero(); 4];

        // propulsion: a (C1 3 |d|^2/(U^2 tau^2) + C2 y(p) + C4 |d|^3/tau^3)
        let q2 = self.a * u.c1 * three / (u.u_tip * u.u_tip * tau * tau);
        let q3 = self.a * u.c4 / (tau * tau * tau);
        // dy/dk = -D(y), d2y/dk2 = D'(y) D(y) with D = y^3 / (2 yl y^3 + 2 C3)
        let y = self.y_at(p);
        let s = two * self.yl * y * y * y + two * u.c3;
        let dy = y * y * y / s;
        let d2y = T::lit(6.0) * u.c3 * y * y / (s * s) * dy;
        let c2 = self.a * u.c2;
        for i in 0..2 {
            g[i] = t * (two * q2 * dd[i] + three * q3 * dn * dd[i] - c2 * dy * fp[i]);
            for j in 0..2 {
                let diag = if i == j { T::one() } else { T::zero() };
                let mut v = two * q2 * diag + c2 * d2y * fp[i] * fp[j];
                if dn > T::zero() {
                    v = v + three * q3 * (dn * diag + dd[i] * dd[j] / dn);
                }
                h[2 * i + j] = t * v;
            }
        }

        // communication: c / g_lower with grad g_lower = -2 kappa e, hess = -2 kappa I
        for (m, &c) in self.coef.iter().enumerate() {
            let gl = self.g_lower_at(m, p);
            let e = p - self.prob.offloaders[m].position;
            let k = self.kappa[m];
            let dg = [-two * k * e.x, -two * k * e.y];
            for i in 0..2 {
                g[i] = g[i] - t * c / (gl * gl) * dg[i];
                for j in 0..2 {
                    let diag = if i == j { T::one() } else { T::zero() };
                    h[2 * i + j] = h[2 * i + j] + t * c * (two * dg[i] * dg[j] / (gl * gl * gl) + two * k * diag / (gl * gl));
                }
            }
        }

        // -log(r^2 - |d|^2)
        let hd = self.r2 - d.norm_sq();
        for i in 0..2 {
            g[i] = g[i] + two * dd[i] / hd;
            for j in 0..2 {
                let diag = if i == j { T::one() } else { T::zero() };
                h[2 * i + j] = h[2 * i + j] + T::lit(4.0) * dd[i] * dd[j] / (hd * hd) + two * diag / hd;
            }
        }
        // -log(k - k_min)
        let hy = self.k_at(p) - self.k_min;
        for i in 0..2 {
            g[i] = g[i] - fp[i] / hy;
            for j in 0..2 {
                h[2 * i + j] = h[2 * i + j] + fp[i] * fp[j] / (hy * hy);
            }
        }
        (g, h)
    }

    fn start(&self, iterate: &ScaIterate<T>) -> Vec2<T> {
        let p = iterate.local_point;
        let shrink = T::lit(0.999);
        if (p - self.center).norm_sq() >= self.r2 * shrink * shrink {
            self.center + (p - self.center) * shrink
        } else {
            p
        }
    }
}

/// Solve the convex surrogate built at `iterate`.
///
/// Returns the minimiser with `z_m = g_lower_m` and `y` on the tight root.
pub fn solve_subproblem<T: Scalar>(iterate: &ScaIterate<T>, prob: &TrajectoryProblem<T>) -> Result<SubproblemSolution<T>> {
    if prob.offloaders.is_empty() {
        return Err(Error::EmptyOffloaders);
    }
    let s = Reduced::new(iterate, prob);
    let mut p = s.start(iterate);
    if s.barrier(p, T::one()).is_none() {
        return Err(Error::SolverStalled("starting point is not strictly feasible".into()));
    }
    let mut steps = 0usize;
    let mut t = T::lit(T_START);
    let t_end = T::lit(T_END);
    loop {
        let mut centred = false;
        for _ in 0..MAX_NEWTON {
            let (g, h) = s.derivatives(p, t);
            let Some(step) = newton_direction(g, h) else {
                return Err(Error::SolverStalled("Newton system is singular".into()));
            };
            let dec = -(g[0] * step.x + g[1] * step.y);
            if dec * T::lit(0.5) <= T::lit(NEWTON_TOL) {
                centred = true;
                break;
            }
            let base = s.barrier(p, t).expect("iterate stays feasible");
            let mut len = T::one();
            let accepted = loop {
                let trial = p + step * len;
                if let Some(v) = s.barrier(trial, t) {
                    if v <= base - T::lit(ARMIJO) * len * dec {
                        break (v < base).then_some(trial);
                    }
                }
                len = len * T::lit(SHRINK);
                if len < T::lit(1e-20) {
                    break None;
                }
            };
            steps += 1;
            match accepted {
                Some(trial) => p = trial,
                None => {
                    // the barrier value no longer resolves the decrease; centred to working precision
                    centred = true;
                    break;
                }
            }
        }
        if !centred {
            return Err(Error::SolverStalled(format!("no Newton convergence at barrier weight {t}")));
        }
        if t >= t_end {
            break;
        }
        t = t * T::lit(T_FACTOR);
    }
    Ok(polish(p, &s, iterate, steps))
}

/// Solve `H d = -g` for a symmetric 2x2 `H`, damping the diagonal if it is not positive definite.
fn newton_direction<T: Scalar>(g: [T; 2], h: [T; 4]) -> Option<Vec2<T>> {
    let scale = h[0].abs().max(h[3].abs()).max(T::one());
    let mut damp = T::zero();
    for _ in 0..30 {
        let (a, b, c) = (h[0] + damp, h[1], h[3] + damp);
        let det = a * c - b * b;
        if a > T::zero() && det > T::epsilon() * a * c {
            return Some(Vec2::new(-(c * g[0] - b * g[1]) / det, -(a * g[1] - b * g[0]) / det));
        }
        damp = if damp == T::zero() { scale * T::lit(1e-14) } else { damp * T::lit(10.0) };
    }
    None
}

fn polish<T: Scalar>(mut p: Vec2<T>, s: &Reduced<'_, T>, iterate: &ScaIterate<T>, steps: usize) -> SubproblemSolution<T> {
    let prob = s.prob;
    // the barrier keeps iterates strictly inside; clip tiny overshoot from rounding
    let d = p - s.center;
    let r = prob.radius();
    if d.norm() > r {
        p = s.center + d * (r / d.norm());
    }
    let y = s.y_at(p).min(s.y_max);
    let z: Vec<T> = (0..s.coef.len()).map(|m| g_lower(p, m, iterate, prob)).collect();
    SubproblemSolution {
        position: p,
        y,
        objective: surrogate_objective(p, y, &z, prob),
        z,
        newton_steps: steps,
    }
}
