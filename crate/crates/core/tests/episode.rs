use approx::assert_relative_eq;
use uavmec::model::propulsion_power;
use uavmec::sim::{generate_scenario, run_episode, run_episode_on, ScenarioConfig, SchemeKind};

fn cfg(horizon: usize) -> ScenarioConfig<f64> {
    ScenarioConfig {
        horizon,
        ..Default::default()
    }
}

#[test]
fn schemes_see_the_same_devices() {
    let c = cfg(6);
    let a = generate_scenario(&c, 3);
    let b = generate_scenario(&c, 3);
    assert_eq!(a, b);
    assert_ne!(a, generate_scenario(&c, 4));
    for scheme in [SchemeKind::Ojoa, SchemeKind::Elc] {
        let ep = run_episode_on(scheme, &c, &a, 3).unwrap();
        assert_eq!(ep.records.len(), 6);
    }
}

#[test]
fn local_only_never_offloads_and_hovers() {
    let c = cfg(10);
    let ep = run_episode(SchemeKind::Elc, &c, 1).unwrap();
    let hover = propulsion_power(0.0, &c.uav) * c.tau;
    for r in &ep.records {
        assert_eq!(r.offload_count, 0);
        assert_eq!(r.workload, 0.0);
        assert_eq!(r.e_compute, 0.0);
        assert_relative_eq!(r.e_propulsion, hover, max_relative = 1e-12);
        assert_eq!(r.next_position, c.uav.initial_position);
    }
}

#[test]
fn queues_follow_the_recursion() {
    let c = cfg(30);
    let ep = run_episode(SchemeKind::Ojoa, &c, 2).unwrap();
    let (bc, bp) = (c.energy.budget_compute(), c.energy.budget_propulsion());
    let (mut qc, mut qp) = (0.0f64, 0.0f64);
    for r in &ep.records {
        qc = (qc + r.e_compute - bc).max(0.0);
        qp = (qp + r.e_propulsion - bp).max(0.0);
        assert_relative_eq!(r.q_compute, qc, epsilon = 1e-9);
        assert_relative_eq!(r.q_propulsion, qp, epsilon = 1e-9);
    }
}

#[test]
fn uav_stays_in_the_speed_ball_and_the_area() {
    let c = cfg(40);
    for scheme in [SchemeKind::Ojoa, SchemeKind::Era, SchemeKind::Ocq] {
        let ep = run_episode(scheme, &c, 5).unwrap();
        let mut prev = c.uav.initial_position;
        for r in &ep.records {
            assert_eq!(r.uav_position, prev);
            assert!(r.next_position.dist(prev) <= c.uav.v_max * c.tau + 1e-9);
            assert!(r.next_position.x >= 0.0 && r.next_position.x <= c.area.width);
            assert!(r.next_position.y >= 0.0 && r.next_position.y <= c.area.height);
            prev = r.next_position;
        }
    }
}

#[test]
fn fixed_position_benchmark_does_not_move() {
    let c = cfg(10);
    let ep = run_episode(SchemeKind::Flp, &c, 1).unwrap();
    for r in &ep.records {
        assert_eq!(r.uav_position, c.schemes.flp_position);
        assert_eq!(r.next_position, c.schemes.flp_position);
    }
}

#[test]
fn metrics_are_slot_averages() {
    let c = cfg(12);
    let ep = run_episode(SchemeKind::Ojoa, &c, 7).unwrap();
    let n = ep.records.len() as f64;
    let cost: f64 = ep.records.iter().map(|r| r.system_cost).sum::<f64>() / n;
    let energy: f64 = ep.records.iter().map(|r| r.e_compute + r.e_propulsion).sum::<f64>() / n;
    assert_relative_eq!(ep.metrics.time_average_ud_cost, cost, max_relative = 1e-12);
    assert_relative_eq!(ep.metrics.time_average_uav_energy, energy, max_relative = 1e-12);
    assert_eq!(ep.metrics.final_q_propulsion, ep.records.last().unwrap().q_propulsion);
}

#[test]
fn runs_in_single_precision() {
    let c = ScenarioConfig::<f32> {
        horizon: 8,
        num_uds: 8,
        ..Default::default()
    };
    let ep = run_episode(SchemeKind::Ojoa, &c, 1).unwrap();
    let d = ScenarioConfig::<f64> {
        horizon: 8,
        num_uds: 8,
        ..Default::default()
    };
    let reference = run_episode(SchemeKind::Ojoa, &d, 1).unwrap();
    let cost = ep.metrics.time_average_ud_cost;
    assert!(cost.is_finite() && cost > 0.0);
    assert_relative_eq!(f64::from(cost), reference.metrics.time_average_ud_cost, max_relative = 0.05);
}
