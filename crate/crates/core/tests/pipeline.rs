use approx::assert_relative_eq;
use uavmec::allocation::AllocationPolicy;
use uavmec::game::{solve_stage1, GameContext};
use uavmec::model::{self, Execution, Task, UdParams, UdState};
use uavmec::sim::{initial_state, run_slot, ScenarioConfig, SchemeKind};
use uavmec::trajectory::{p2_objective, solve_stage2, TrajectoryOffloader, TrajectoryProblem};
use uavmec::{verify, Vec2};

fn device(id: usize, x: f64, y: f64, data: f64, f_local: f64, cfg: &ScenarioConfig<f64>) -> UdState<f64> {
    UdState {
        id,
        position: Vec2::new(x, y),
        velocity: Vec2::zero(),
        params: UdParams {
            f_local,
            tx_power: cfg.devices.tx_power,
            gamma: cfg.devices.gamma,
            kappa_eff: cfg.devices.kappa_eff,
        },
        task: Task::new(data, 1000.0, cfg.tasks.deadline),
    }
}

#[test]
fn one_slot_matches_the_composed_oracles() {
    let cfg = ScenarioConfig::<f64>::default();
    let uds = vec![
        device(0, 150.0, 210.0, 8e5, 1e9, &cfg),
        device(1, 260.0, 180.0, 6e5, 5e8, &cfg),
        device(2, 330.0, 320.0, 3e5, 1.5e9, &cfg),
    ];
    let state = initial_state(SchemeKind::Ojoa, &cfg).unwrap();
    let (rec, next) = run_slot(SchemeKind::Ojoa, &cfg, 0, &uds, &state).unwrap();

    let ctx = GameContext {
        uds: &uds,
        uav_position: state.uav_position,
        q_compute: state.queues.q_compute,
        v_param: state.queues.v_param,
        channel: &cfg.channel,
        uav: &cfg.uav,
        policy: AllocationPolicy::Optimal,
    };
    let profile = solve_stage1(&ctx).unwrap().profile;
    assert!(verify::nash_profiles(&ctx).contains(&profile));
    let offloaders: Vec<&UdState<f64>> = uds.iter().zip(&profile).filter(|(_, &a)| a).map(|(u, _)| u).collect();
    assert_eq!(rec.offload_count, offloaders.len());
    assert!(!offloaders.is_empty());

    let shares = verify::allocation_oracle(&offloaders, state.uav_position, &cfg.channel, &cfg.uav);
    let mut k = 0;
    for (m, ud) in uds.iter().enumerate() {
        let want = if profile[m] {
            let (s, w) = shares[k];
            k += 1;
            let rate = model::uplink_rate(w, ud, state.uav_position, &cfg.channel, cfg.uav.height);
            model::ud_cost(Execution::Edge { rate, compute: s * cfg.uav.f_max }, &ud.task, &ud.params).unwrap()
        } else {
            model::ud_cost(Execution::Local, &ud.task, &ud.params).unwrap()
        };
        assert_relative_eq!(rec.ud_costs[m], want, max_relative = 1e-6);
    }

    let prob = TrajectoryProblem {
        current_position: state.uav_position,
        offloaders: offloaders
            .iter()
            .zip(&shares)
            .map(|(u, &(_, w))| TrajectoryOffloader {
                position: u.position,
                demand: uavmec::allocation::comm_demand(u),
                bandwidth_share: w,
                snr_scale: model::snr_scale(u, state.uav_position, &cfg.channel, cfg.uav.height),
            })
            .collect(),
        q_propulsion: state.queues.q_propulsion,
        v_param: state.queues.v_param,
        uav: cfg.uav,
        channel: cfg.channel,
        tau: cfg.tau,
    };
    let (_, best) = verify::stage2_grid_optimum(&prob, 0.1);
    let got = p2_objective(rec.next_position, &prob).unwrap();
    assert!((got - best) / best <= 5e-3, "{got} vs grid {best}");
    assert_eq!(next.uav_position, rec.next_position);
}

#[test]
fn repeated_slots_close_in_on_a_lone_device() {
    let cfg = ScenarioConfig::<f64>::default();
    let ud = device(0, 320.0, 260.0, 8e5, 1e9, &cfg);
    let mut pos = Vec2::new(200.0, 200.0);
    let mut dist = pos.dist(ud.position);
    // about 10 m per slot from 134 m out
    for _ in 0..13 {
        let prob = TrajectoryProblem {
            current_position: pos,
            offloaders: vec![TrajectoryOffloader {
                position: ud.position,
                demand: uavmec::allocation::comm_demand(&ud),
                bandwidth_share: 1.0,
                snr_scale: model::snr_scale(&ud, pos, &cfg.channel, cfg.uav.height),
            }],
            q_propulsion: 0.5,
            v_param: cfg.energy.v_param,
            uav: cfg.uav,
            channel: cfg.channel,
            tau: cfg.tau,
        };
        pos = solve_stage2(&prob).unwrap().position;
        let (_, best) = verify::stage2_grid_optimum(&prob, 0.2);
        let got = p2_objective(pos, &prob).unwrap();
        assert!(got <= best * (1.0 + 1e-5), "{got} vs grid {best} at {} m", pos.dist(ud.position));
        let d = pos.dist(ud.position);
        assert!(d <= dist + 1e-9, "distance grew from {dist} to {d}");
        dist = d;
    }
    assert!(dist < 2.0, "still {dist} m away");
}
