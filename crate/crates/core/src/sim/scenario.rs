use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::ScenarioConfig;
use crate::geom::Vec2;
use crate::mobility::{step_position, step_velocity, MobilityParams};
use crate::model::{Task, UdParams, UdState};
use crate::scalar::Scalar;

const DEVICE_STREAM: u64 = 0;
const MOBILITY_STREAM: u64 = 1;
const TASK_STREAM: u64 = 2;

/// Pre-drawn exogenous randomness of one episode.
///
/// Device motion and task arrivals do not depend on any decision, so they are
/// drawn up front and every scheme replays the same realisation.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub f_local: Vec<T>,
    /// Indexed `[t][m]`.
    pub positions: Vec<Vec<Vec2<T>>>,
    pub velocities: Vec<Vec<Vec2<T>>>,
    pub tasks: Vec<Vec<Task<T>>>,
}

impl<T: Scalar> Scenario<T> {
    pub fn horizon(&self) -> usize {
        self.tasks.len()
    }

    /// Device states at the start of slot `t`.
    pub fn devices_at(&self, t: usize, cfg: &ScenarioConfig<T>) -> Vec<UdState<T>> {
        (0..self.f_local.len())
            .map(|m| UdState {
                id: m,
                position: self.positions[t][m],
                velocity: self.velocities[t][m],
                params: UdParams {
                    f_local: self.f_local[m],
                    tx_power: cfg.devices.tx_power,
                    gamma: cfg.devices.gamma,
                    kappa_eff: cfg.devices.kappa_eff,
                },
                task: self.tasks[t][m],
            })
            .collect()
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Draw device placement, motion and the task stream for one seed.
///
/// Task sizes are drawn as `min + u (max - min)` from a fixed stream of `u`, so
/// changing the size range rescales the same draws.
pub fn generate_scenario<T: Scalar>(cfg: &ScenarioConfig<T>, seed: u64) -> Scenario<T> {
    let n = cfg.num_uds;
    let f = |x: T| x.to_f64_lossy();
    let mut dev = stream(seed, DEVICE_STREAM);
    let mut mob = stream(seed, MOBILITY_STREAM);
    let mut tsk = stream(seed, TASK_STREAM);
    let sigma = f(cfg.mobility.sigma);
    let normal = Normal::new(0.0, sigma).expect("sigma validated non-negative");

    let mut f_local = Vec::with_capacity(n);
    let mut params = Vec::with_capacity(n);
    let mut pos = Vec::with_capacity(n);
    let mut vel = Vec::with_capacity(n);
    for _ in 0..n {
        let x = dev.random::<f64>() * f(cfg.area.width);
        let y = dev.random::<f64>() * f(cfg.area.height);
        let k = dev.random_range(0..cfg.devices.f_local_choices.len());
        let speed = dev.random::<f64>() * f(cfg.mobility.mean_speed_max);
        let heading = dev.random::<f64>() * std::f64::consts::TAU;
        let mean = Vec2::new(T::lit(speed * heading.cos()), T::lit(speed * heading.sin()));
        let v0 = mean + Vec2::new(T::lit(normal.sample(&mut dev)), T::lit(normal.sample(&mut dev)));
        f_local.push(cfg.devices.f_local_choices[k]);
        params.push(MobilityParams {
            alpha: cfg.mobility.alpha,
            mean_velocity: mean,
            sigma: cfg.mobility.sigma,
            area: cfg.area,
        });
        pos.push(Vec2::new(T::lit(x), T::lit(y)));
        vel.push(v0);
    }

    let horizon = cfg.horizon;
    let mut positions = Vec::with_capacity(horizon);
    let mut velocities = Vec::with_capacity(horizon);
    let mut tasks = Vec::with_capacity(horizon);
    let t = &cfg.tasks;
    for _ in 0..horizon {
        positions.push(pos.clone());
        velocities.push(vel.clone());
        let slot: Vec<Task<T>> = (0..n)
            .map(|_| {
                let ud = T::lit(tsk.random::<f64>());
                let ue = T::lit(tsk.random::<f64>());
                Task::new(
                    t.data_min + ud * (t.data_max - t.data_min),
                    t.intensity_min + ue * (t.intensity_max - t.intensity_min),
                    t.deadline,
                )
            })
            .collect();
        tasks.push(slot);
        for m in 0..n {
            let (p, v) = step_position(pos[m], vel[m], cfg.tau, &cfg.area);
            let noise = Vec2::new(T::lit(normal.sample(&mut mob)), T::lit(normal.sample(&mut mob)));
            pos[m] = p;
            vel[m] = step_velocity(v, &params[m], noise);
        }
    }
    Scenario {
        f_local,
        positions,
        velocities,
        tasks,
    }
}
