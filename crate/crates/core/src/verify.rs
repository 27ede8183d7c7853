//! Slow reference solvers used to check the fast ones.
//!
//! Everything here works from the model functions directly rather than from the
//! cached quantities inside the solvers.

use crate::allocation::{comm_demand, Allocation};
use crate::game::{GameContext, OffloadProfile};
use crate::geom::Vec2;
use crate::model::{self, spectral_efficiency, Execution, UdState};
use crate::scalar::Scalar;
use crate::trajectory::{g_lower, p2_objective, surrogate_objective, tight_y, ScaIterate, TrajectoryProblem};

/// Shares for the offloaders of `profile` under the context's policy, keyed by position.
fn shares_for<T: Scalar>(ctx: &GameContext<'_, T>, profile: &[bool]) -> Vec<(usize, T, T)> {
    let idx: Vec<usize> = (0..profile.len()).filter(|&j| profile[j]).collect();
    if idx.is_empty() {
        return Vec::new();
    }
    match ctx.policy {
        crate::allocation::AllocationPolicy::Equal => {
            let each = T::one() / T::lit(idx.len() as f64);
            idx.into_iter().map(|j| (j, each, each)).collect()
        }
        crate::allocation::AllocationPolicy::Optimal => {
            let mut beta = Vec::new();
            let mut phi = Vec::new();
            for &j in &idx {
                let ud = &ctx.uds[j];
                let r = spectral_efficiency(ud, ctx.uav_position, ctx.channel, ctx.uav.height);
                beta.push((ud.params.gamma * ud.task.cycles() / ctx.uav.f_max).sqrt());
                phi.push((comm_demand(ud) / (ctx.channel.bandwidth * r)).sqrt());
            }
            let sb: T = beta.iter().copied().sum();
            let sp: T = phi.iter().copied().sum();
            idx.iter()
                .enumerate()
                .map(|(k, &j)| (j, beta[k] / sb, phi[k] / sp))
                .collect()
        }
    }
}

/// `(utility, delay)` of device `j` under `profile`, from the model formulas.
pub fn utility_and_delay<T: Scalar>(ctx: &GameContext<'_, T>, profile: &[bool], j: usize) -> (T, T) {
    let ud = &ctx.uds[j];
    if !profile[j] {
        let u = model::ud_cost(Execution::Local, &ud.task, &ud.params).unwrap_or(T::infinity());
        return (u, model::local_delay(&ud.task, &ud.params));
    }
    let shares = shares_for(ctx, profile);
    let &(_, s, w) = shares.iter().find(|(k, _, _)| *k == j).expect("offloader has a share");
    let rate = model::uplink_rate(w, ud, ctx.uav_position, ctx.channel, ctx.uav.height);
    let compute = s * ctx.uav.f_max;
    let exec = Execution::Edge { rate, compute };
    let Ok(cost) = model::ud_cost(exec, &ud.task, &ud.params) else {
        return (T::infinity(), T::infinity());
    };
    let delay = model::edge_delay(&ud.task, rate, compute).unwrap_or(T::infinity());
    let price = ctx.q_compute / ctx.v_param * model::uav_compute_energy(&ud.task, ctx.uav.varpi);
    (price + cost, delay)
}

fn deadlines_met<T: Scalar>(ctx: &GameContext<'_, T>, profile: &[bool]) -> bool {
    (0..profile.len())
        .filter(|&j| profile[j])
        .all(|j| utility_and_delay(ctx, profile, j).1 <= ctx.uds[j].task.deadline)
}

fn strictly_better<T: Scalar>(a: T, b: T) -> bool {
    a < b - T::lit(1e-12) * a.abs().max(b.abs())
}

/// Whether `profile` is deadline-feasible and no device gains by switching alone.
///
/// A switch to offloading only counts if the resulting profile is itself feasible.
pub fn is_nash<T: Scalar>(ctx: &GameContext<'_, T>, profile: &[bool]) -> bool {
    if !deadlines_met(ctx, profile) {
        return false;
    }
    let mut alt = profile.to_vec();
    for m in 0..profile.len() {
        let here = utility_and_delay(ctx, profile, m).0;
        alt[m] = !profile[m];
        let there = utility_and_delay(ctx, &alt, m).0;
        let allowed = !alt[m] || deadlines_met(ctx, &alt);
        alt[m] = profile[m];
        if allowed && strictly_better(there, here) {
            return false;
        }
    }
    true
}

/// All equilibria of the game by enumeration of every profile. Use for small `M`.
pub fn nash_profiles<T: Scalar>(ctx: &GameContext<'_, T>) -> Vec<OffloadProfile> {
    let n = ctx.uds.len();
    assert!(n <= 20, "enumeration over {n} devices is too large");
    (0u32..(1 << n))
        .map(|bits| (0..n).map(|j| bits >> j & 1 == 1).collect::<Vec<_>>())
        .filter(|p| is_nash(ctx, p))
        .collect()
}

/// Resource-allocation objective for one resource: `sum a_i / x_i` over the simplex.
fn simplex_newton(a: &[f64]) -> Vec<f64> {
    // Newton on the KKT system of min sum a_i/x_i s.t. sum x_i = 1 from the
    // uniform point; the Hessian is diagonal so the step has a closed form.
    let n = a.len();
    let mut x = vec![1.0 / n as f64; n];
    let obj = |x: &[f64]| a.iter().zip(x).map(|(ai, xi)| ai / xi).sum::<f64>();
    for _ in 0..200 {
        let g: Vec<f64> = a.iter().zip(&x).map(|(ai, xi)| -ai / (xi * xi)).collect();
        let h: Vec<f64> = a.iter().zip(&x).map(|(ai, xi)| 2.0 * ai / (xi * xi * xi)).collect();
        // d_i = -(g_i + nu)/h_i with sum d_i = 0
        let num: f64 = g.iter().zip(&h).map(|(gi, hi)| gi / hi).sum();
        let den: f64 = h.iter().map(|hi| 1.0 / hi).sum();
        let nu = -num / den;
        let d: Vec<f64> = g.iter().zip(&h).map(|(gi, hi)| -(gi + nu) / hi).collect();
        let dec: f64 = d.iter().zip(&h).map(|(di, hi)| di * di * hi).sum();
        if dec < 1e-24 {
            break;
        }
        let f0 = obj(&x);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            if trial.iter().all(|&v| v > 0.0) && obj(&trial) <= f0 - 0.25 * t * dec {
                x = trial;
                break;
            }
            t *= 0.5;
            if t < 1e-30 {
                return x;
            }
        }
    }
    x
}

/// Numeric minimiser of the per-slot allocation problem for a fixed offloader set.
///
/// Returns `(compute_fraction, bandwidth_fraction)` per device in input order.
pub fn allocation_oracle(offloaders: &[&UdState<f64>], uav_pos: Vec2<f64>, ctx_channel: &model::ChannelParams<f64>, uav: &model::UavParams<f64>) -> Vec<(f64, f64)> {
    let compute: Vec<f64> = offloaders
        .iter()
        .map(|u| u.params.gamma * u.task.cycles() / uav.f_max)
        .collect();
    let comm: Vec<f64> = offloaders
        .iter()
        .map(|u| {
            let r = spectral_efficiency(u, uav_pos, ctx_channel, uav.height);
            comm_demand(u) / (ctx_channel.bandwidth * r)
        })
        .collect();
    let s = simplex_newton(&compute);
    let w = simplex_newton(&comm);
    s.into_iter().zip(w).collect()
}

/// Delay/energy part of the allocation objective for arbitrary shares.
pub fn allocation_cost(offloaders: &[&UdState<f64>], shares: &[(f64, f64)], uav_pos: Vec2<f64>, ch: &model::ChannelParams<f64>, uav: &model::UavParams<f64>) -> f64 {
    offloaders
        .iter()
        .zip(shares)
        .map(|(u, &(s, w))| {
            let rate = model::uplink_rate(w, u, uav_pos, ch, uav.height);
            model::ud_cost(Execution::Edge { rate, compute: s * uav.f_max }, &u.task, &u.params).unwrap_or(f64::INFINITY)
        })
        .sum()
}

/// Shares of an [`Allocation`] in the order of `offloaders`.
pub fn shares_in_order(offloaders: &[&UdState<f64>], alloc: &Allocation<f64>) -> Vec<(f64, f64)> {
    offloaders
        .iter()
        .map(|u| {
            let s = alloc.get(u.id).expect("device has a share");
            (s.compute_fraction, s.bandwidth_fraction)
        })
        .collect()
}

/// Minimise `f` over the disc of radius `r` around `c` by a grid of the given
/// pitch followed by a shrinking pattern search around the best grid point.
pub fn grid_minimise<F: Fn(Vec2<f64>) -> f64>(c: Vec2<f64>, r: f64, pitch: f64, f: F) -> (Vec2<f64>, f64) {
    let n = (r / pitch).ceil() as i64;
    let inside = |p: Vec2<f64>| p.dist(c) <= r;
    let mut best = (c, f(c));
    for i in -n..=n {
        for j in -n..=n {
            let p = c + Vec2::new(i as f64 * pitch, j as f64 * pitch);
            if !inside(p) {
                continue;
            }
            let v = f(p);
            if v < best.1 {
                best = (p, v);
            }
        }
    }
    let mut h = pitch;
    while h > 1e-7 {
        let mut moved = false;
        for d in [Vec2::new(h, 0.0), Vec2::new(-h, 0.0), Vec2::new(0.0, h), Vec2::new(0.0, -h)] {
            let mut p = best.0 + d;
            if !inside(p) {
                // slide onto the circle
                p = c + (p - c) * (r / p.dist(c));
            }
            let v = f(p);
            if v < best.1 {
                best = (p, v);
                moved = true;
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    best
}

/// Global minimum of the exact stage-2 objective over the speed ball.
pub fn stage2_grid_optimum(prob: &TrajectoryProblem<f64>, pitch: f64) -> (Vec2<f64>, f64) {
    grid_minimise(prob.current_position, prob.radius(), pitch, |p| {
        p2_objective(p, prob).unwrap_or(f64::INFINITY)
    })
}

/// Minimum of one convex surrogate over the ball with both slacks set tight.
pub fn subproblem_grid_optimum(iterate: &ScaIterate<f64>, prob: &TrajectoryProblem<f64>, pitch: f64) -> (Vec2<f64>, f64) {
    let y_max = 10.0 * prob.uav.c3.powf(0.25);
    grid_minimise(prob.current_position, prob.radius(), pitch, |p| {
        let y = tight_y(p, iterate, prob.current_position, prob.tau, prob.uav.c3).min(y_max);
        let z: Vec<f64> = (0..prob.offloaders.len()).map(|m| g_lower(p, m, iterate, prob)).collect();
        if z.iter().any(|&v| v <= 0.0) {
            return f64::INFINITY;
        }
        surrogate_objective(p, y, &z, prob)
    })
}
