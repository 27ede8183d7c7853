//! Slot-by-slot simulation of the online controller and its benchmark schemes.

mod config;
mod scenario;

pub use config::{
    drift_bound_constant, DeviceSettings, EnergySettings, MobilitySettings, ScenarioConfig, SchemeSettings, TaskRanges,
};
pub use scenario::{generate_scenario, Scenario};

use std::fmt;
use std::str::FromStr;

use crate::allocation::{comm_demand, AllocationPolicy};
use crate::error::{Error, Result};
use crate::game::{solve_stage1, GameContext};
use crate::geom::Vec2;
use crate::lyapunov::{update_queues, EnergyQueues};
use crate::model::{self, snr_scale, uav_compute_energy, Execution, UdState};
use crate::scalar::Scalar;
use crate::trajectory::{solve_stage2, ScaStep, TrajectoryOffloader, TrajectoryProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    /// Full online controller.
    Ojoa,
    /// Everything computed locally.
    Elc,
    /// Equal resource sharing.
    Era,
    /// UAV fixed over one point.
    Flp,
    /// Energy queues ignored in every decision.
    Ocq,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 5] = [
        SchemeKind::Ojoa,
        SchemeKind::Elc,
        SchemeKind::Era,
        SchemeKind::Flp,
        SchemeKind::Ocq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Ojoa => "OJOA",
            SchemeKind::Elc => "ELC",
            SchemeKind::Era => "ERA",
            SchemeKind::Flp => "FLP",
            SchemeKind::Ocq => "OCQ",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid("scheme", format!("unknown scheme `{s}`")))
    }
}

/// Controller state carried from one slot to the next.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeState<T> {
    pub uav_position: Vec2<T>,
    pub queues: EnergyQueues<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord<T> {
    pub t: usize,
    pub ud_costs: Vec<T>,
    pub system_cost: T,
    pub e_compute: T,
    pub e_propulsion: T,
    /// CPU cycles executed on the UAV.
    pub workload: T,
    /// Backlogs after this slot's update.
    pub q_compute: T,
    pub q_propulsion: T,
    pub offload_count: usize,
    /// Where the UAV served this slot from.
    pub uav_position: Vec2<T>,
    pub next_position: Vec2<T>,
    pub game_sweeps: usize,
    pub sca_iterations: usize,
    /// Filled only when the scenario asks for it.
    pub sca_trace: Vec<ScaStep<T>>,
}

impl<T: Scalar> SlotRecord<T> {
    pub fn uav_energy(&self) -> T {
        self.e_compute + self.e_propulsion
    }
}

/// The three reported time averages plus the series they come from.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics<T> {
    pub time_average_ud_cost: T,
    pub time_average_uav_energy: T,
    pub time_average_workload: T,
    pub time_average_compute_energy: T,
    pub time_average_propulsion_energy: T,
    pub time_average_offloads: T,
    pub final_q_compute: T,
    pub final_q_propulsion: T,
    pub cost_series: Vec<T>,
    pub energy_series: Vec<T>,
    pub workload_series: Vec<T>,
}

fn mean<T: Scalar>(xs: impl Iterator<Item = T>) -> T {
    let (n, s) = xs.fold((0usize, T::zero()), |(n, s), x| (n + 1, s + x));
    if n == 0 {
        T::zero()
    } else {
        s / T::lit(n as f64)
    }
}

impl<T: Scalar> Metrics<T> {
    pub fn from_records(records: &[SlotRecord<T>]) -> Self {
        let cost_series: Vec<T> = records.iter().map(|r| r.system_cost).collect();
        let energy_series: Vec<T> = records.iter().map(|r| r.uav_energy()).collect();
        let workload_series: Vec<T> = records.iter().map(|r| r.workload).collect();
        let last = records.last();
        Self {
            time_average_ud_cost: mean(cost_series.iter().copied()),
            time_average_uav_energy: mean(energy_series.iter().copied()),
            time_average_workload: mean(workload_series.iter().copied()),
            time_average_compute_energy: mean(records.iter().map(|r| r.e_compute)),
            time_average_propulsion_energy: mean(records.iter().map(|r| r.e_propulsion)),
            time_average_offloads: mean(records.iter().map(|r| T::lit(r.offload_count as f64))),
            final_q_compute: last.map_or(T::zero(), |r| r.q_compute),
            final_q_propulsion: last.map_or(T::zero(), |r| r.q_propulsion),
            cost_series,
            energy_series,
            workload_series,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode<T> {
    pub scheme: SchemeKind,
    pub seed: u64,
    pub records: Vec<SlotRecord<T>>,
    pub metrics: Metrics<T>,
}

/// Starting state of an episode: UAV at its initial position, empty queues.
pub fn initial_state<T: Scalar>(scheme: SchemeKind, cfg: &ScenarioConfig<T>) -> Result<EpisodeState<T>> {
    let uav_position = match scheme {
        SchemeKind::Flp => cfg.schemes.flp_position,
        _ => cfg.uav.initial_position,
    };
    Ok(EpisodeState {
        uav_position,
        queues: cfg.initial_queues()?,
    })
}

/// Play one slot of `scheme` for the given devices (tasks already attached).
pub fn run_slot<T: Scalar>(
    scheme: SchemeKind,
    cfg: &ScenarioConfig<T>,
    t: usize,
    devices: &[UdState<T>],
    state: &EpisodeState<T>,
) -> Result<(SlotRecord<T>, EpisodeState<T>)> {
    let pos = state.uav_position;
    let decision_queues = match scheme {
        SchemeKind::Ocq => state.queues.zeroed(),
        _ => state.queues,
    };
    let mut ud_costs = Vec::with_capacity(devices.len());
    let mut e_compute = T::zero();
    let mut workload = T::zero();
    let mut offloaders = Vec::new();
    let mut game_sweeps = 0;

    if scheme == SchemeKind::Elc {
        for ud in devices {
            ud_costs.push(model::ud_cost(Execution::Local, &ud.task, &ud.params)?);
        }
    } else {
        let ctx = GameContext {
            uds: devices,
            uav_position: pos,
            q_compute: decision_queues.q_compute,
            v_param: decision_queues.v_param,
            channel: &cfg.channel,
            uav: &cfg.uav,
            policy: if scheme == SchemeKind::Era {
                AllocationPolicy::Equal
            } else {
                AllocationPolicy::Optimal
            },
        };
        let stage1 = solve_stage1(&ctx)?;
        game_sweeps = stage1.sweeps;
        for (m, ud) in devices.iter().enumerate() {
            if !stage1.profile[m] {
                ud_costs.push(model::ud_cost(Execution::Local, &ud.task, &ud.params)?);
                continue;
            }
            let share = stage1.allocation.get(ud.id).ok_or(Error::ZeroShare(ud.id))?;
            let rate = model::uplink_rate(share.bandwidth_fraction, ud, pos, &cfg.channel, cfg.uav.height);
            let compute = share.compute_fraction * cfg.uav.f_max;
            ud_costs.push(model::ud_cost(Execution::Edge { rate, compute }, &ud.task, &ud.params)?);
            e_compute = e_compute + uav_compute_energy(&ud.task, cfg.uav.varpi);
            workload = workload + ud.task.cycles();
            offloaders.push(TrajectoryOffloader {
                position: ud.position,
                demand: comm_demand(ud),
                bandwidth_share: share.bandwidth_fraction,
                snr_scale: snr_scale(ud, pos, &cfg.channel, cfg.uav.height),
            });
        }
    }

    let plans = match scheme {
        SchemeKind::Ojoa | SchemeKind::Ocq => true,
        SchemeKind::Era => cfg.schemes.era_plans_trajectory,
        SchemeKind::Elc | SchemeKind::Flp => false,
    };
    let offload_count = offloaders.len();
    let mut sca_trace = Vec::new();
    let (next_position, sca_iterations) = if plans {
        let prob = TrajectoryProblem {
            current_position: pos,
            offloaders,
            q_propulsion: decision_queues.q_propulsion,
            v_param: decision_queues.v_param,
            uav: cfg.uav,
            channel: cfg.channel,
            tau: cfg.tau,
        };
        let out = solve_stage2(&prob)?;
        if cfg.trace_sca {
            sca_trace = out.trace;
        }
        (out.position, out.iterations)
    } else {
        (pos, 0)
    };
    let speed = next_position.dist(pos) / cfg.tau;
    let e_propulsion = if scheme == SchemeKind::Elc && !cfg.schemes.elc_hover_energy {
        T::zero()
    } else {
        model::propulsion_power(speed, &cfg.uav) * cfg.tau
    };
    let queues = update_queues(&state.queues, e_compute, e_propulsion);
    let system_cost = ud_costs.iter().copied().fold(T::zero(), |a, b| a + b);
    let record = SlotRecord {
        t,
        ud_costs,
        system_cost,
        e_compute,
        e_propulsion,
        workload,
        q_compute: queues.q_compute,
        q_propulsion: queues.q_propulsion,
        offload_count,
        uav_position: pos,
        next_position,
        game_sweeps,
        sca_iterations,
        sca_trace,
    };
    Ok((
        record,
        EpisodeState {
            uav_position: next_position,
            queues,
        },
    ))
}

/// Run a whole episode on pre-drawn randomness.
pub fn run_episode_on<T: Scalar>(
    scheme: SchemeKind,
    cfg: &ScenarioConfig<T>,
    scenario: &Scenario<T>,
    seed: u64,
) -> Result<Episode<T>> {
    let mut state = initial_state(scheme, cfg)?;
    let mut records = Vec::with_capacity(scenario.horizon());
    for t in 0..scenario.horizon() {
        let devices = scenario.devices_at(t, cfg);
        let (rec, next) = run_slot(scheme, cfg, t, &devices, &state)?;
        records.push(rec);
        state = next;
    }
    let metrics = Metrics::from_records(&records);
    Ok(Episode {
        scheme,
        seed,
        records,
        metrics,
    })
}

pub fn run_episode<T: Scalar>(scheme: SchemeKind, cfg: &ScenarioConfig<T>, seed: u64) -> Result<Episode<T>> {
    cfg.validate()?;
    run_episode_on(scheme, cfg, &generate_scenario(cfg, seed), seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small() -> ScenarioConfig<f64> {
        ScenarioConfig {
            num_uds: 6,
            horizon: 5,
            ..Default::default()
        }
    }

    #[test]
    fn scheme_names_round_trip() {
        for k in SchemeKind::ALL {
            assert_eq!(k.name().parse::<SchemeKind>().unwrap(), k);
        }
        assert!("xyz".parse::<SchemeKind>().is_err());
    }

    #[test]
    fn elc_slot_is_all_local() {
        let cfg = small();
        let ep = run_episode(SchemeKind::Elc, &cfg, 3).unwrap();
        let s = generate_scenario(&cfg, 3);
        for rec in &ep.records {
            let devices = s.devices_at(rec.t, &cfg);
            let want: f64 = devices
                .iter()
                .map(|u| model::ud_cost(Execution::Local, &u.task, &u.params).unwrap())
                .sum();
            assert_relative_eq!(rec.system_cost, want, max_relative = 1e-12);
            assert_eq!(rec.workload, 0.0);
            assert_eq!(rec.e_compute, 0.0);
            assert_eq!(rec.uav_position, cfg.uav.initial_position);
        }
    }

    #[test]
    fn accounting_identities() {
        let cfg = small();
        for k in SchemeKind::ALL {
            let ep = run_episode(k, &cfg, 1).unwrap();
            for r in &ep.records {
                assert_relative_eq!(r.system_cost, r.ud_costs.iter().sum::<f64>(), max_relative = 1e-12);
                assert!(r.e_compute >= 0.0 && r.e_propulsion >= 0.0);
                assert!(r.next_position.dist(r.uav_position) <= cfg.uav.v_max * cfg.tau + 1e-9);
            }
            let m = &ep.metrics;
            assert_eq!(m.time_average_ud_cost, m.cost_series.iter().sum::<f64>() / 5.0);
        }
    }

    #[test]
    fn single_slot_metrics_equal_record() {
        let cfg = ScenarioConfig {
            horizon: 1,
            ..small()
        };
        let ep = run_episode(SchemeKind::Ojoa, &cfg, 2).unwrap();
        let r = &ep.records[0];
        assert_eq!(ep.metrics.time_average_ud_cost, r.system_cost);
        assert_eq!(ep.metrics.time_average_uav_energy, r.uav_energy());
        assert_eq!(ep.metrics.time_average_workload, r.workload);
    }

    #[test]
    fn episodes_are_deterministic() {
        let cfg = small();
        assert_eq!(run_episode(SchemeKind::Ojoa, &cfg, 8).unwrap(), run_episode(SchemeKind::Ojoa, &cfg, 8).unwrap());
    }

    #[test]
    fn flp_never_moves() {
        let cfg = small();
        let ep = run_episode(SchemeKind::Flp, &cfg, 4).unwrap();
        assert!(ep.records.iter().all(|r| r.uav_position == cfg.schemes.flp_position));
    }
}
