//! Multi-device offloading game and its best-response solver.
//!
//! Each device picks local execution or offloading. Under square-root proportional
//! resource sharing the edge utility of device `m` in offloader set `S` is
//!
//! ```text
//! U_m^ec = (Qc / V) E_m^c + beta_m * sum_{j in S} beta_j + phi_m * sum_{j in S} phi_j
//! ```
//!
//! which makes the game an exact potential game with
//!
//! ```text
//! F(A) = sum_i a_i ((Qc/V) E_i^c + beta_i sum_{j<=i} a_j beta_j + phi_i sum_{j<=i} a_j phi_j)
//!      + sum_i (1 - a_i) U_i^loc
//! ```
//!
//! Best response therefore terminates. Joins are only accepted when every
//! offloader, the joiner included, still meets its deadline, so the dynamics stay
//! inside the deadline-feasible strategy space.

use crate::allocation::{era_allocation, proportional_shares, weights_from_efficiency, Allocation, AllocationPolicy, Weights};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::model::{self, ChannelParams, UavParams, UdState};
use crate::scalar::Scalar;

/// Strategy profile: `true` means the device offloads.
pub type OffloadProfile = Vec<bool>;

/// Everything the offloading game needs to know about one slot.
#[derive(Debug, Clone, Copy)]
pub struct GameContext<'a, T> {
    pub uds: &'a [UdState<T>],
    pub uav_position: Vec2<T>,
    /// Compute-queue backlog used for the UAV energy price.
    pub q_compute: T,
    pub v_param: T,
    pub channel: &'a ChannelParams<T>,
    pub uav: &'a UavParams<T>,
    pub policy: AllocationPolicy,
}

/// Per-device constants of the game, computed once per slot.
#[derive(Debug, Clone, Copy)]
struct Player<T> {
    id: usize,
    local_utility: T,
    /// `(Qc/V) * varpi * eta * D`.
    energy_price: T,
    weights: Weights<T>,
    /// `B * r_m` at full bandwidth.
    link_capacity: T,
    data: T,
    cycles: T,
    deadline: T,
    gamma: T,
    tx_power: T,
}

/// Cost and delay of a device's edge option in a given offloader set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeEval<T> {
    pub utility: T,
    pub delay: T,
}

/// One accepted strategy change of the best-response dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep<T> {
    pub sweep: usize,
    pub mover: usize,
    pub offloads: bool,
    pub local_utility: T,
    pub edge_utility: T,
    pub potential: T,
}

#[derive(Debug, Clone)]
pub struct Stage1Outcome<T> {
    pub profile: OffloadProfile,
    pub allocation: Allocation<T>,
    pub sweeps: usize,
    pub converged: bool,
    pub trace: Vec<TraceStep<T>>,
}

impl<T: Scalar> Stage1Outcome<T> {
    pub fn offloaders(&self) -> impl Iterator<Item = usize> + '_ {
        self.profile.iter().enumerate().filter(|(_, &a)| a).map(|(i, _)| i)
    }
}

/// The offloading game of one slot with per-device constants cached.
#[derive(Debug, Clone)]
pub struct OffloadGame<T> {
    players: Vec<Player<T>>,
    policy: AllocationPolicy,
    f_max: T,
}

impl<T: Scalar> OffloadGame<T> {
    pub fn new(ctx: &GameContext<'_, T>) -> Self {
        let price = ctx.q_compute / ctx.v_param;
        let players = ctx
            .uds
            .iter()
            .map(|ud| {
                let r = model::spectral_efficiency(ud, ctx.uav_position, ctx.channel, ctx.uav.height);
                let g = ud.params.gamma;
                Player {
                    id: ud.id,
                    local_utility: g * model::local_delay(&ud.task, &ud.params)
                        + (T::one() - g) * model::local_energy(&ud.task, &ud.params),
                    energy_price: price * model::uav_compute_energy(&ud.task, ctx.uav.varpi),
                    weights: weights_from_efficiency(ud, r, ctx.channel.bandwidth, ctx.uav.f_max),
                    link_capacity: ctx.channel.bandwidth * r,
                    data: ud.task.data_bits,
                    cycles: ud.task.cycles(),
                    deadline: ud.task.deadline,
                    gamma: g,
                    tx_power: ud.params.tx_power,
                }
            })
            .collect();
        Self {
            players,
            policy: ctx.policy,
            f_max: ctx.uav.f_max,
        }
    }

    pub fn len(&self) -> usize {
        self.players.len()
    }

    pub fn is_empty(&self) -> bool {
        self.players.is_empty()
    }

    pub fn utility_local(&self, m: usize) -> T {
        self.players[m].local_utility
    }

    /// Closed-form weights `(beta_m, phi_m)` of player `m`.
    pub fn weights(&self, m: usize) -> Weights<T> {
        self.players[m].weights
    }

    pub fn energy_price(&self, m: usize) -> T {
        self.players[m].energy_price
    }

    /// Offloader set of `profile` with `m` forced in.
    fn members<'p>(&self, profile: &'p [bool], m: usize) -> impl Iterator<Item = usize> + 'p {
        profile
            .iter()
            .enumerate()
            .filter(move |&(j, &a)| a || j == m)
            .map(|(j, _)| j)
    }

    /// Shares `(s_m, w_m)` of `m` when the offloader set is `profile` plus `m`.
    fn shares(&self, m: usize, profile: &[bool]) -> (T, T) {
        match self.policy {
            AllocationPolicy::Optimal => {
                let (mut sb, mut sp) = (T::zero(), T::zero());
                for j in self.members(profile, m) {
                    sb = sb + self.players[j].weights.beta;
                    sp = sp + self.players[j].weights.comm_weight;
                }
                let w = self.players[m].weights;
                let frac = |x: T, s: T| if s > T::zero() { x / s } else { T::zero() };
                (frac(w.beta, sb), frac(w.comm_weight, sp))
            }
            AllocationPolicy::Equal => {
                let n = self.members(profile, m).count();
                let each = T::one() / T::lit(n as f64);
                (each, each)
            }
        }
    }

    /// Edge utility and completion delay of `m` with `a_m = 1` and the others as in `profile`.
    ///
    /// A zero share yields an infinite utility and delay.
    pub fn utility_edge(&self, m: usize, profile: &[bool]) -> EdgeEval<T> {
        let p = &self.players[m];
        let (s, w) = self.shares(m, profile);
        let rate = w * p.link_capacity;
        let compute = s * self.f_max;
        if !(rate > T::zero() && compute > T::zero()) {
            return EdgeEval {
                utility: T::infinity(),
                delay: T::infinity(),
            };
        }
        let delay = p.data / rate + p.cycles / compute;
        let energy = p.tx_power * p.data / rate;
        EdgeEval {
            utility: p.energy_price + p.gamma * delay + (T::one() - p.gamma) * energy,
            delay,
        }
    }

    /// Utility of `m` under `profile` (its own entry decides the option).
    pub fn utility(&self, m: usize, profile: &[bool]) -> T {
        if profile[m] {
            self.utility_edge(m, profile).utility
        } else {
            self.utility_local(m)
        }
    }

    /// Every offloader in `profile` meets its deadline.
    pub fn is_feasible(&self, profile: &[bool]) -> bool {
        profile
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .all(|(j, _)| self.utility_edge(j, profile).delay <= self.players[j].deadline)
    }

    pub fn potential(&self, profile: &[bool]) -> T {
        let (mut sb, mut sp) = (T::zero(), T::zero());
        let mut total = T::zero();
        for (p, &a) in self.players.iter().zip(profile) {
            if a {
                sb = sb + p.weights.beta;
                sp = sp + p.weights.comm_weight;
                total = total + p.energy_price + p.weights.beta * sb + p.weights.comm_weight * sp;
            } else {
                total = total + p.local_utility;
            }
        }
        total
    }

    /// Resource shares for the offloaders of `profile` under this game's policy.
    pub fn allocation(&self, profile: &[bool]) -> Result<Allocation<T>> {
        let idx: Vec<usize> = (0..self.len()).filter(|&j| profile[j]).collect();
        if idx.is_empty() {
            return Ok(Allocation::default());
        }
        let ids: Vec<usize> = idx.iter().map(|&j| self.players[j].id).collect();
        match self.policy {
            AllocationPolicy::Optimal => {
                let w: Vec<Weights<T>> = idx.iter().map(|&j| self.players[j].weights).collect();
                proportional_shares(&ids, &w)
            }
            AllocationPolicy::Equal => era_allocation(&ids),
        }
    }

    /// Best-response sweeps from the all-local profile.
    ///
    /// Devices move one at a time in index order and only on a strict improvement,
    /// so ties keep the incumbent choice. Returns [`Error::NoEquilibrium`] if the
    /// optimal-sharing game exceeds `max_sweeps`; the equal-sharing variant has no
    /// potential and reports `converged = false` instead.
    pub fn solve(&self, max_sweeps: usize) -> Result<Stage1Outcome<T>> {
        let n = self.len();
        let mut profile = vec![false; n];
        let mut trace = Vec::new();
        let mut sweeps = 0;
        let mut converged = false;
        while sweeps < max_sweeps {
            sweeps += 1;
            let mut changed = false;
            for m in 0..n {
                let u_loc = self.utility_local(m);
                let was_edge = profile[m];
                profile[m] = true;
                let edge = self.utility_edge(m, &profile);
                let edge_ok = self.is_feasible(&profile);
                let go_edge = if was_edge {
                    edge_ok && !strictly_less(u_loc, edge.utility)
                } else {
                    edge_ok && strictly_less(edge.utility, u_loc)
                };
                profile[m] = go_edge;
                if go_edge != was_edge {
                    changed = true;
                    trace.push(TraceStep {
                        sweep: sweeps,
                        mover: m,
                        offloads: go_edge,
                        local_utility: u_loc,
                        edge_utility: edge.utility,
                        potential: self.potential(&profile),
                    });
                }
            }
            if !changed {
                converged = true;
                break;
            }
        }
        if !converged && self.policy == AllocationPolicy::Optimal {
            return Err(Error::NoEquilibrium {
                sweeps,
                trace: trace
                    .iter()
                    .map(|s| {
                        format!(
                            "sweep {} device {} -> {} (loc {}, edge {}, F {})",
                            s.sweep,
                            s.mover,
                            if s.offloads { "edge" } else { "local" },
                            s.local_utility,
                            s.edge_utility,
                            s.potential
                        )
                    })
                    .collect(),
            });
        }
        let allocation = self.allocation(&profile)?;
        Ok(Stage1Outcome {
            profile,
            allocation,
            sweeps,
            converged,
            trace,
        })
    }
}

fn strictly_less<T: Scalar>(a: T, b: T) -> bool {
    a < b - T::lit(1e-12) * a.abs().max(b.abs())
}

/// Default best-response cap: ten sweeps per device.
pub fn default_sweep_cap(m: usize) -> usize {
    10 * m.max(1)
}

/// Stage 1: offloading equilibrium plus the matching resource shares.
pub fn solve_stage1<T: Scalar>(ctx: &GameContext<'_, T>) -> Result<Stage1Outcome<T>> {
    OffloadGame::new(ctx).solve(default_sweep_cap(ctx.uds.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Task, UdParams};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ud(id: usize, pos: Vec2<f64>, d: f64, eta: f64, f_local: f64) -> UdState<f64> {
        UdState {
            id,
            position: pos,
            velocity: Vec2::zero(),
            params: UdParams { f_local, ..UdParams::default() },
            task: Task::new(d, eta, 1.0),
        }
    }

    fn random_uds(rng: &mut ChaCha8Rng, m: usize) -> Vec<UdState<f64>> {
        (0..m)
            .map(|i| {
                let f = [1e9, 1.5e9, 2e9][rng.random_range(0..3)];
                ud(
                    i,
                    Vec2::new(rng.random_range(0.0..400.0), rng.random_range(0.0..400.0)),
                    rng.random_range(1e5..1e6),
                    rng.random_range(500.0..1500.0),
                    f,
                )
            })
            .collect()
    }

    fn ctx<'a>(uds: &'a [UdState<f64>], ch: &'a ChannelParams<f64>, uav: &'a UavParams<f64>, qc: f64) -> GameContext<'a, f64> {
        GameContext {
            uds,
            uav_position: Vec2::new(200.0, 200.0),
            q_compute: qc,
            v_param: 50.0,
            channel: ch,
            uav,
            policy: AllocationPolicy::Optimal,
        }
    }

    #[test]
    fn local_utility_weights() {
        let (ch, uav) = (ChannelParams::default(), UavParams::default());
        let mut u = ud(0, Vec2::new(200.0, 200.0), 1e6, 1000.0, 1e9);
        for (g, expect) in [(1.0, 1.0), (0.0, 1.0), (0.5, 1.0)] {
            u.params.gamma = g;
            let uds = [u];
            let game = OffloadGame::new(&ctx(&uds, &ch, &uav, 0.0));
            // T_loc = 1 s, E_loc = 1e-27 * 1e27 * 1 = 1 J
            assert_relative_eq!(game.utility_local(0), expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn sole_offloader_gets_full_resources() {
        let (ch, uav) = (ChannelParams::default(), UavParams::default());
        let uds = [ud(0, Vec2::new(150.0, 230.0), 5e5, 900.0, 1e9)];
        let game = OffloadGame::new(&ctx(&uds, &ch, &uav, 0.0));
        let e = game.utility_edge(0, &[true]);
        let rate = model::uplink_rate(1.0, &uds[0], Vec2::new(200.0, 200.0), &ch, 100.0);
        let c = model::ud_cost(model::Execution::Edge { rate, compute: 2e10 }, &uds[0].task, &uds[0].params).unwrap();
        assert_relative_eq!(e.utility, c, max_relative = 1e-12);
    }

    #[test]
    fn congestion_raises_edge_utility() {
        let (ch, uav) = (ChannelParams::default(), UavParams::default());
        let a = ud(0, Vec2::new(150.0, 230.0), 5e5, 900.0, 1e9);
        let b = UdState { id: 1, ..a };
        let uds = [a, b];
        let game = OffloadGame::new(&ctx(&uds, &ch, &uav, 3.0));
        assert!(game.utility_edge(0, &[true, true]).utility > game.utility_edge(0, &[true, false]).utility);
    }

    #[test]
    fn closed_form_edge_utility() {
        let (ch, uav) = (ChannelParams::default(), UavParams::default());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let uds = random_uds(&mut rng, 5);
        let game = OffloadGame::new(&ctx(&uds, &ch, &uav, 12.0));
        let profile = [true, false, true, true, false];
        for m in 0..5 {
            let mut with_m = profile;
            with_m[m] = true;
            let (sb, sp) = (0..5)
                .filter(|&j| with_m[j])
                .fold((0.0, 0.0), |(b, p), j| (b + game.weights(j).beta, p + game.weights(j).comm_weight));
            let w = game.weights(m);
            let closed = game.energy_price(m) + w.beta * sb + w.comm_weight * sp;
            assert_relative_eq!(game.utility_edge(m, &profile).utility, closed, max_relative = 1e-9);
        }
    }

    #[test]
    fn potential_special_profiles() {
        let (ch, uav) = (ChannelParams::default(), UavParams::default());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let uds = random_uds(&mut rng, 4);
        let game = OffloadGame::new(&ctx(&uds, &ch, &uav, 7.0));
        let all_local: f64 = (0..4).map(|m| game.utility_local(m)).sum();
        assert_relative_eq!(game.potential(&[false; 4]), all_local, max_relative = 1e-14);
        let w = game.weights(2);
        let expect = game.energy_price(2) + w.beta * w.beta + w.comm_weight * w.comm_weight
            + game.utility_local(0) + game.utility_local(1) + game.utility_local(3);
        assert_relative_eq!(game.potential(&[false, false, true, false]), expect, max_relative = 1e-12);
    }

    #[test]
    fn dominant_edge_strategy() {
        let (ch, uav) = (ChannelParams::default(), UavParams::default());
        let uds = [ud(0, Vec2::new(200.0, 200.0), 5e5, 1000.0, 2e9)];
        let out = solve_stage1(&ctx(&uds, &ch, &uav, 0.0)).unwrap();
        assert_eq!(out.profile, vec![true]);
        assert_eq!(out.allocation.shares.len(), 1);
        assert!(out.converged);
    }

    #[test]
    fn deadline_forces_local() {
        let (ch, mut uav) = (ChannelParams::default(), UavParams::default());
        // 1.5e9 cycles on a 1 GHz server cannot finish within 1 s
        uav.f_max = 1e9;
        let uds = [ud(0, Vec2::new(200.0, 200.0), 1e6, 1500.0, 2e9)];
        let game = OffloadGame::new(&ctx(&uds, &ch, &uav, 0.0));
        assert!(game.utility_edge(0, &[true]).delay > 1.0);
        assert!(game.utility_edge(0, &[true]).utility < game.utility_local(0));
        let out = game.solve(10).unwrap();
        assert_eq!(out.profile, vec![false]);
        assert!(out.allocation.is_empty());
    }

    #[test]
    fn potential_descends_along_trace() {
        let (ch, uav) = (ChannelParams::default(), UavParams::default());
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let uds = random_uds(&mut rng, 20);
            let game = OffloadGame::new(&ctx(&uds, &ch, &uav, rng.random_range(0.0..40.0)));
            let out = game.solve(default_sweep_cap(20)).unwrap();
            let mut prev = game.potential(&[false; 20]);
            for step in &out.trace {
                assert!(step.potential < prev, "{step:?} after {prev}");
                prev = step.potential;
            }
            assert!(game.is_feasible(&out.profile));
        }
    }

    #[test]
    fn equal_sharing_game_runs() {
        let (ch, uav) = (ChannelParams::default(), UavParams::default());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let uds = random_uds(&mut rng, 20);
        let mut c = ctx(&uds, &ch, &uav, 0.0);
        c.policy = AllocationPolicy::Equal;
        let out = solve_stage1(&c).unwrap();
        let n = out.profile.iter().filter(|&&a| a).count();
        assert_eq!(out.allocation.shares.len(), n);
        if n > 0 {
            let each = 1.0 / n as f64;
            assert!(out.allocation.shares.iter().all(|s| s.compute_fraction == each));
        }
    }
}
