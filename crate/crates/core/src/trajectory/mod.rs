//! Next-position planning for the UAV by successive convex approximation.
//!
//! The per-slot problem trades propulsion energy (weighted by the propulsion
//! backlog) against the upload cost of the devices that offloaded. Two slack
//! variables make it tractable: `y` replaces the induced-power square root and
//! `z_m` replaces each device's spectral efficiency. Their defining constraints
//! are non-convex, so each round replaces them by first-order minorants taken at
//! the current local point and solves the resulting convex program.

mod barrier;

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::model::{induced_radicand, propulsion_power, spectral_efficiency_from_scale, ChannelParams, UavParams};
use crate::scalar::Scalar;

pub use barrier::solve_subproblem;

/// Per-device constants that enter the trajectory objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryOffloader<T> {
    pub position: Vec2<T>,
    /// `gamma D + (1-gamma) P D`.
    pub demand: T,
    /// Bandwidth fraction from the allocation stage.
    pub bandwidth_share: T,
    /// SNR numerator, held at its value for the slot's starting position.
    pub snr_scale: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryProblem<T> {
    pub current_position: Vec2<T>,
    pub offloaders: Vec<TrajectoryOffloader<T>>,
    pub q_propulsion: T,
    pub v_param: T,
    pub uav: UavParams<T>,
    pub channel: ChannelParams<T>,
    pub tau: T,
}

impl<T: Scalar> TrajectoryProblem<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > T::zero()) {
            return Err(Error::invalid("tau", "must be positive"));
        }
        if !(self.q_propulsion >= T::zero() && self.v_param > T::zero()) {
            return Err(Error::invalid("trajectory", "queue weight must be non-negative and V positive"));
        }
        for (i, o) in self.offloaders.iter().enumerate() {
            if !(o.bandwidth_share > T::zero()) {
                return Err(Error::ZeroShare(i));
            }
            if !(o.demand >= T::zero() && o.snr_scale > T::zero()) {
                return Err(Error::invalid("trajectory.offloader", "demand and snr scale must be positive"));
            }
        }
        Ok(())
    }

    /// Largest displacement allowed in one slot.
    pub fn radius(&self) -> T {
        self.uav.v_max * self.tau
    }

    pub fn speed_to(&self, candidate: Vec2<T>) -> T {
        candidate.dist(self.current_position) / self.tau
    }

    /// `V c_m / (w_m B)`, the coefficient of `1/g_m` in the objective.
    pub fn comm_coefficient(&self, m: usize) -> T {
        let o = &self.offloaders[m];
        self.v_param * o.demand / (o.bandwidth_share * self.channel.bandwidth)
    }

    /// Spectral efficiency `g_m` of offloader `m` toward `candidate`.
    pub fn efficiency(&self, m: usize, candidate: Vec2<T>) -> T {
        let o = &self.offloaders[m];
        spectral_efficiency_from_scale(
            o.snr_scale,
            candidate.dist_sq(o.position),
            self.uav.height,
            self.channel.mu,
        )
    }

    pub fn in_ball(&self, candidate: Vec2<T>, slack: T) -> bool {
        candidate.dist(self.current_position) <= self.radius() + slack
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaIterate<T> {
    pub local_point: Vec2<T>,
    pub y_local: T,
    pub objective_value: T,
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution<T> {
    pub position: Vec2<T>,
    pub y: T,
    pub z: Vec<T>,
    /// Value of the convex surrogate at the returned point.
    pub objective: T,
    pub newton_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaStep<T> {
    pub iteration: usize,
    pub surrogate_objective: T,
    pub exact_objective: T,
    pub position: Vec2<T>,
    pub y: T,
    pub z: Vec<T>,
    /// Set when the inner solver failed and the local point was kept.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage2Outcome<T> {
    pub position: Vec2<T>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<ScaStep<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaOptions {
    pub epsilon: f64,
    pub max_iterations: usize,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            max_iterations: 100,
        }
    }
}

/// Exact stage-2 objective: weighted propulsion energy plus weighted upload cost.
pub fn p2_objective<T: Scalar>(candidate: Vec2<T>, prob: &TrajectoryProblem<T>) -> Result<T> {
    let excess = candidate.dist(prob.current_position) - prob.radius();
    if excess > T::lit(1e-9) * (T::one() + prob.radius()) {
        return Err(Error::OutsideSpeedBall {
            excess: excess.to_f64_lossy(),
        });
    }
    let mut total = prob.q_propulsion * propulsion_power(prob.speed_to(candidate), &prob.uav) * prob.tau;
    for m in 0..prob.offloaders.len() {
        total = total + prob.comm_coefficient(m) / prob.efficiency(m, candidate);
    }
    Ok(total)
}

/// Slack anchor `sqrt(sqrt(C3 + v^4/4) - v^2/2)` at the local point.
pub fn y_anchor<T: Scalar>(local_point: Vec2<T>, current_position: Vec2<T>, tau: T, c3: T) -> T {
    let v = local_point.dist(current_position) / tau;
    induced_radicand(v, c3).sqrt()
}

/// Concave minorant of `y^2 + v^2` around `(local_point, y_local)`.
pub fn f_lower<T: Scalar>(
    candidate: Vec2<T>,
    y: T,
    iterate: &ScaIterate<T>,
    current_position: Vec2<T>,
    tau: T,
) -> T {
    let yl = iterate.y_local;
    let dl = iterate.local_point - current_position;
    let d = candidate - current_position;
    let tau2 = tau * tau;
    let two = T::lit(2.0);
    yl * yl + two * yl * (y - yl) + dl.norm_sq() / tau2 + two / tau2 * dl.dot(d - dl)
}

/// Concave minorant of `g_m` around the iterate's local point.
pub fn g_lower<T: Scalar>(candidate: Vec2<T>, m: usize, iterate: &ScaIterate<T>, prob: &TrajectoryProblem<T>) -> T {
    let (g_l, kappa, x_l) = g_expansion(m, iterate.local_point, prob);
    let x = candidate.dist_sq(prob.offloaders[m].position);
    g_l - kappa * (x - x_l)
}

/// `(g_m, -dg_m/dx, x)` at `local`, where `x` is the squared horizontal distance.
pub(crate) fn g_expansion<T: Scalar>(m: usize, local: Vec2<T>, prob: &TrajectoryProblem<T>) -> (T, T, T) {
    let o = &prob.offloaders[m];
    let mu = prob.channel.mu;
    let x_l = local.dist_sq(o.position);
    let u = prob.uav.height * prob.uav.height + x_l;
    let g_l = prob.efficiency(m, local);
    let kappa = mu * o.snr_scale * T::lit(std::f64::consts::LOG2_E) / ((o.snr_scale + u.powf(mu)) * u);
    (g_l, kappa, x_l)
}

/// Positive `y` with `C3 / y^2 = f_lower(candidate, y)`.
///
/// `f_lower` is `2 y_l y + k` with `k` fixed by the candidate, so the condition is
/// the cubic `2 y_l y^3 + k y^2 - C3 = 0`, which has exactly one positive root.
pub fn tight_y<T: Scalar>(
    candidate: Vec2<T>,
    iterate: &ScaIterate<T>,
    current_position: Vec2<T>,
    tau: T,
    c3: T,
) -> T {
    let k = f_lower(candidate, T::zero(), iterate, current_position, tau);
    cubic_root(T::lit(2.0) * iterate.y_local, k, c3)
}

/// Positive root of `a y^3 + k y^2 - c3` for `a, c3 > 0`.
pub(crate) fn cubic_root<T: Scalar>(a: T, k: T, c3: T) -> T {
    let two = T::lit(2.0);
    let h = |y: T| (a * y + k) * y * y - c3;
    let mut hi = T::one();
    while h(hi) < T::zero() {
        hi = hi * two;
    }
    let mut lo = T::zero();
    let mut y = hi;
    for _ in 0..200 {
        let val = h(y);
        if val > T::zero() {
            hi = y;
        } else {
            lo = y;
        }
        let slope = T::lit(3.0) * a * y * y + two * k * y;
        let newton = y - val / slope;
        y = if slope > T::zero() && newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) * T::lit(0.5)
        };
        if hi - lo <= T::epsilon() * hi || val == T::zero() {
            break;
        }
    }
    y
}

fn hold<T: Scalar>(prob: &TrajectoryProblem<T>) -> Stage2Outcome<T> {
    Stage2Outcome {
        position: prob.current_position,
        iterations: 0,
        converged: true,
        trace: Vec::new(),
    }
}

/// Plan the next UAV position with the default accuracy and iteration cap.
pub fn solve_stage2<T: Scalar>(prob: &TrajectoryProblem<T>) -> Result<Stage2Outcome<T>> {
    solve_stage2_with(prob, ScaOptions::default())
}

pub fn solve_stage2_with<T: Scalar>(prob: &TrajectoryProblem<T>, opts: ScaOptions) -> Result<Stage2Outcome<T>> {
    prob.validate()?;
    if prob.offloaders.is_empty() {
        return Ok(hold(prob));
    }
    let c3 = prob.uav.c3;
    let eps = T::lit(opts.epsilon);
    let mut iterate = ScaIterate {
        local_point: prob.current_position,
        y_local: y_anchor(prob.current_position, prob.current_position, prob.tau, c3),
        objective_value: T::zero(),
        iteration: 0,
    };
    let mut best = (p2_objective(prob.current_position, prob)?, prob.current_position);
    let mut trace = Vec::new();
    let mut converged = false;
    for l in 1..=opts.max_iterations {
        iterate.y_local = y_anchor(iterate.local_point, prob.current_position, prob.tau, c3);
        let (sol, fallback) = match solve_subproblem(&iterate, prob) {
            Ok(sol) => (sol, false),
            Err(e) => {
                log::warn!("trajectory subproblem failed at round {l}: {e}; keeping local point");
                (fallback_solution(&iterate, prob), true)
            }
        };
        let exact = p2_objective(sol.position, prob)?;
        if exact < best.0 {
            best = (exact, sol.position);
        }
        let delta = (sol.objective - iterate.objective_value).abs();
        trace.push(ScaStep {
            iteration: l,
            surrogate_objective: sol.objective,
            exact_objective: exact,
            position: sol.position,
            y: sol.y,
            z: sol.z.clone(),
            fallback,
        });
        iterate.local_point = sol.position;
        iterate.objective_value = sol.objective;
        iterate.iteration = l;
        if delta < eps || fallback {
            converged = !fallback;
            break;
        }
    }
    if !converged {
        log::warn!(
            "trajectory planning stopped after {} rounds without meeting the accuracy threshold",
            trace.len()
        );
        return Ok(Stage2Outcome {
            position: best.1,
            iterations: trace.len(),
            converged,
            trace,
        });
    }
    Ok(Stage2Outcome {
        position: iterate.local_point,
        iterations: trace.len(),
        converged,
        trace,
    })
}

/// Surrogate solution at the local point itself, with tight slacks.
pub(crate) fn fallback_solution<T: Scalar>(iterate: &ScaIterate<T>, prob: &TrajectoryProblem<T>) -> SubproblemSolution<T> {
    let p = iterate.local_point;
    let y = tight_y(p, iterate, prob.current_position, prob.tau, prob.uav.c3);
    let z: Vec<T> = (0..prob.offloaders.len()).map(|m| g_lower(p, m, iterate, prob)).collect();
    let objective = surrogate_objective(p, y, &z, prob);
    SubproblemSolution {
        position: p,
        y,
        z,
        objective,
        newton_steps: 0,
    }
}

/// Convex surrogate objective at `(p, y, z)`.
pub fn surrogate_objective<T: Scalar>(p: Vec2<T>, y: T, z: &[T], prob: &TrajectoryProblem<T>) -> T {
    let u = &prob.uav;
    let v = prob.speed_to(p);
    let power = u.c1 * (T::one() + T::lit(3.0) * v * v / (u.u_tip * u.u_tip)) + u.c2 * y + u.c4 * v * v * v;
    let mut total = prob.q_propulsion * power * prob.tau;
    for (m, &zm) in z.iter().enumerate() {
        total = total + prob.comm_coefficient(m) / zm;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(offloaders: Vec<TrajectoryOffloader<f64>>, qp: f64) -> TrajectoryProblem<f64> {
        TrajectoryProblem {
            current_position: Vec2::new(200.0, 200.0),
            offloaders,
            q_propulsion: qp,
            v_param: 50.0,
            uav: UavParams::default(),
            channel: ChannelParams::default(),
            tau: 1.0,
        }
    }

    fn device(x: f64, y: f64) -> TrajectoryOffloader<f64> {
        TrajectoryOffloader {
            position: Vec2::new(x, y),
            demand: 0.5 * 5e5 + 0.5 * 0.1 * 5e5,
            bandwidth_share: 1.0,
            snr_scale: 0.1 * 1e-5 / 1e-13,
        }
    }

    fn iterate_at(prob: &TrajectoryProblem<f64>, local: Vec2<f64>) -> ScaIterate<f64> {
        ScaIterate {
            local_point: local,
            y_local: y_anchor(local, prob.current_position, prob.tau, prob.uav.c3),
            objective_value: 0.0,
            iteration: 0,
        }
    }

    #[test]
    fn hover_objective() {
        let prob = problem(vec![], 2.0);
        let u = &prob.uav;
        let want = 2.0 * (u.c1 + u.c2 * u.c3.powf(0.25));
        assert_relative_eq!(p2_objective(prob.current_position, &prob).unwrap(), want, max_relative = 1e-12);
        let edge = Vec2::new(230.0, 200.0);
        assert_relative_eq!(
            p2_objective(edge, &prob).unwrap(),
            2.0 * propulsion_power(30.0, u),
            max_relative = 1e-12
        );
        assert!(p2_objective(Vec2::new(231.0, 200.0), &prob).is_err());
    }

    #[test]
    fn anchor_cases() {
        let p = Vec2::new(1.0, 2.0);
        assert_relative_eq!(y_anchor(p, p, 1.0, 263.8), 263.8f64.powf(0.25), max_relative = 1e-14);
        assert_relative_eq!(y_anchor(p, p, 1.0, 16.0), 2.0);
        // sqrt(sqrt(263.8 + 2500) - 50)
        let y = y_anchor(Vec2::new(11.0, 2.0), p, 1.0, 263.8);
        assert_relative_eq!(y, 1.603_700_591_858_677, max_relative = 1e-12);
    }

    #[test]
    fn f_lower_is_tangent_and_below() {
        let prob = problem(vec![], 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = prob.current_position;
        for _ in 0..50 {
            let local = c + Vec2::new(rng.random_range(-21.0..21.0), rng.random_range(-21.0..21.0));
            let it = iterate_at(&prob, local);
            let exact = |p: Vec2<f64>, y: f64| y * y + p.dist_sq(c);
            assert_relative_eq!(f_lower(local, it.y_local, &it, c, 1.0), exact(local, it.y_local), max_relative = 1e-12);
            for _ in 0..200 {
                let p = c + Vec2::new(rng.random_range(-21.0..21.0), rng.random_range(-21.0..21.0));
                let y = rng.random_range(1e-6..12.0);
                assert!(f_lower(p, y, &it, c, 1.0) <= exact(p, y) + 1e-9);
            }
        }
    }

    #[test]
    fn g_lower_is_tangent_and_below() {
        let prob = problem(vec![device(150.0, 260.0)], 1.0);
        let it = iterate_at(&prob, Vec2::new(190.0, 215.0));
        assert_relative_eq!(g_lower(it.local_point, 0, &it, &prob), prob.efficiency(0, it.local_point), max_relative = 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let p = prob.current_position + Vec2::new(rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0));
            assert!(g_lower(p, 0, &it, &prob) <= prob.efficiency(0, p) + 1e-12);
        }
        let farther = Vec2::new(230.0, 190.0);
        assert!(g_lower(farther, 0, &it, &prob) < g_lower(it.local_point, 0, &it, &prob));
    }

    #[test]
    fn tight_y_solves_cubic() {
        let prob = problem(vec![], 1.0);
        let it = iterate_at(&prob, Vec2::new(212.0, 195.0));
        for p in [Vec2::new(200.0, 200.0), Vec2::new(215.0, 180.0), Vec2::new(225.0, 210.0)] {
            let y = tight_y(p, &it, prob.current_position, 1.0, prob.uav.c3);
            let f = f_lower(p, y, &it, prob.current_position, 1.0);
            assert!(y > 0.0);
            assert_relative_eq!(prob.uav.c3 / (y * y), f, max_relative = 1e-12);
        }
    }

    #[test]
    fn empty_set_holds_position() {
        let prob = problem(vec![], 1.0);
        let out = solve_stage2(&prob).unwrap();
        assert_eq!(out.position, prob.current_position);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn far_device_pulls_to_boundary() {
        let prob = problem(vec![device(400.0, 300.0)], 1e-6);
        let out = solve_stage2(&prob).unwrap();
        let d = out.position - prob.current_position;
        assert_relative_eq!(d.norm(), 30.0, max_relative = 1e-6);
        let want = Vec2::new(200.0, 100.0);
        let cos = d.dot(want) / (d.norm() * want.norm());
        assert!(cos > (1f64).to_radians().cos(), "{:?}", out.position);
    }

    #[test]
    fn matches_grid_search() {
        for qp in [1e-4, 1e-2, 0.3] {
            let prob = problem(vec![device(400.0, 300.0), device(180.0, 120.0)], qp);
            let out = solve_stage2(&prob).unwrap();
            let got = p2_objective(out.position, &prob).unwrap();
            let (_, best) = crate::verify::stage2_grid_optimum(&prob, 0.25);
            assert!(got <= best * 1.005, "qp {qp}: {got} vs grid {best}");
        }
    }

    #[test]
    fn overhead_device_keeps_position() {
        let prob = problem(vec![device(200.0, 200.0)], 50.0);
        let out = solve_stage2(&prob).unwrap();
        assert!(out.position.dist(prob.current_position) < 1e-3, "{:?}", out.position);
    }

    #[test]
    fn symmetric_pair_lands_on_bisector() {
        let prob = problem(vec![device(150.0, 260.0), device(250.0, 260.0)], 0.5);
        let out = solve_stage2(&prob).unwrap();
        assert!((out.position.x - 200.0).abs() < 1e-3, "{:?}", out.position);
    }

    #[test]
    fn rounds_descend_and_stay_tight() {
        let prob = problem(vec![device(120.0, 330.0), device(260.0, 150.0), device(330.0, 260.0)], 0.3);
        let out = solve_stage2(&prob).unwrap();
        assert!(out.converged);
        for w in out.trace.windows(2) {
            assert!(w[1].surrogate_objective <= w[0].surrogate_objective + 1e-6);
            assert!(w[1].exact_objective <= w[0].exact_objective + 1e-6);
        }
        assert!(prob.in_ball(out.position, 1e-9));
    }
}
