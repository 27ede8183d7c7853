//! Property and scenario checks shared by `selftest` and the acceptance suite.
//!
//! Each check takes its size as an argument so the command-line self-test can
//! run a reduced version of the same code.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uavmec::allocation::{comm_demand, optimal_allocation, p11_objective, AllocationPolicy};
use uavmec::game::{solve_stage1, GameContext, OffloadGame};
use uavmec::lyapunov::{drift_bound_rhs, lyapunov_value};
use uavmec::model::{snr_scale, Task, UdParams, UdState};
use uavmec::sim::{drift_bound_constant, run_episode, ScenarioConfig, SchemeKind};
use uavmec::trajectory::{
    f_lower, g_lower, p2_objective, solve_stage2, y_anchor, ScaIterate, TrajectoryOffloader, TrajectoryProblem,
};
use uavmec::{verify, Vec2};

use crate::config::ExperimentConfig;
use crate::experiment::{metrics_file, run_grid, write_outputs, SLOTS_FILE};
use crate::summary::{data_size_checks, scheme_checks, v_checks, Check, Summary, Verdict, DATA_SIZE_KEY, V_KEY};

/// Outcome of one numbered criterion.
#[derive(Debug, Clone)]
pub struct Criterion {
    pub id: u32,
    pub title: String,
    pub checks: Vec<Check>,
    pub elapsed: Duration,
    pub budget: Option<Duration>,
}

impl Criterion {
    /// Time `body` and collect its checks.
    pub fn run(id: u32, title: &str, budget: Option<Duration>, body: impl FnOnce() -> Vec<Check>) -> Criterion {
        let start = Instant::now();
        let checks = body();
        Criterion {
            id,
            title: title.to_string(),
            checks,
            elapsed: start.elapsed(),
            budget,
        }
    }

    pub fn within_budget(&self) -> bool {
        self.budget.is_none_or(|b| self.elapsed <= b)
    }

    pub fn passed(&self) -> bool {
        self.within_budget() && !self.checks.is_empty() && self.checks.iter().all(|c| c.verdict == Verdict::Pass)
    }

    /// One verdict line followed by indented detail lines.
    pub fn report(&self) -> String {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let budget = match self.budget {
            Some(b) => format!(" / limit {:.0} s", b.as_secs_f64()),
            None => String::new(),
        };
        let mut out = format!(
            "{verdict} criterion {}: {} ({:.1} s{budget})\n",
            self.id,
            self.title,
            self.elapsed.as_secs_f64()
        );
        for c in &self.checks {
            out.push_str(&format!("    {c}\n"));
        }
        if !self.within_budget() {
            out.push_str("    runtime limit exceeded\n");
        }
        out
    }
}

fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn random_devices(rng: &mut ChaCha8Rng, n: usize, cfg: &ScenarioConfig<f64>) -> Vec<UdState<f64>> {
    let t = &cfg.tasks;
    let choices = &cfg.devices.f_local_choices;
    (0..n)
        .map(|id| UdState {
            id,
            position: Vec2::new(rng.random::<f64>() * cfg.area.width, rng.random::<f64>() * cfg.area.height),
            velocity: Vec2::zero(),
            params: UdParams {
                f_local: choices[rng.random_range(0..choices.len())],
                tx_power: cfg.devices.tx_power,
                gamma: cfg.devices.gamma,
                kappa_eff: cfg.devices.kappa_eff,
            },
            task: Task::new(
                rng.random_range(t.data_min..=t.data_max),
                rng.random_range(t.intensity_min..=t.intensity_max),
                t.deadline,
            ),
        })
        .collect()
}

fn random_point(rng: &mut ChaCha8Rng, cfg: &ScenarioConfig<f64>) -> Vec2<f64> {
    Vec2::new(rng.random::<f64>() * cfg.area.width, rng.random::<f64>() * cfg.area.height)
}

/// Game inputs with a random UAV position and compute backlog.
struct GameInstance {
    uds: Vec<UdState<f64>>,
    uav_position: Vec2<f64>,
    q_compute: f64,
    cfg: ScenarioConfig<f64>,
}

impl GameInstance {
    fn random(rng: &mut ChaCha8Rng, n: usize) -> Self {
        let cfg = ScenarioConfig::default();
        GameInstance {
            uds: random_devices(rng, n, &cfg),
            uav_position: random_point(rng, &cfg),
            q_compute: rng.random_range(0.0..200.0),
            cfg,
        }
    }

    fn ctx(&self) -> GameContext<'_, f64> {
        GameContext {
            uds: &self.uds,
            uav_position: self.uav_position,
            q_compute: self.q_compute,
            v_param: self.cfg.energy.v_param,
            channel: &self.cfg.channel,
            uav: &self.cfg.uav,
            policy: AllocationPolicy::Optimal,
        }
    }
}

/// Every unilateral switch changes the mover's utility and the potential by the
/// same amount.
pub fn potential_identity(instances: usize, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst, mut count, mut bad) = (0.0f64, 0usize, 0usize);
    for _ in 0..instances {
        let n = rng.random_range(1..=10);
        let inst = GameInstance::random(&mut rng, n);
        let ctx = inst.ctx();
        let game = OffloadGame::new(&ctx);
        let profile: Vec<bool> = (0..inst.uds.len()).map(|_| rng.random_bool(0.5)).collect();
        let f0 = game.potential(&profile);
        for m in 0..profile.len() {
            let mut alt = profile.clone();
            alt[m] = !alt[m];
            let du = verify::utility_and_delay(&ctx, &alt, m).0 - verify::utility_and_delay(&ctx, &profile, m).0;
            let df = game.potential(&alt) - f0;
            let err = rel_diff(du, df);
            count += 1;
            worst = worst.max(err);
            if err > 1e-9 {
                bad += 1;
            }
        }
    }
    vec![Check {
        name: format!("utility change equals potential change ({instances} instances)"),
        verdict: if bad == 0 { Verdict::Pass } else { Verdict::Fail },
        detail: format!("{bad}/{count} deviations off by more than 1e-9, worst relative error {worst:.2e}"),
    }]
}

/// The best-response outcome survives an exhaustive unilateral-deviation check.
pub fn nash_certification(instances: usize, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut bad, mut errors, mut offloading) = (0usize, 0usize, 0usize);
    for _ in 0..instances {
        let n = rng.random_range(1..=4);
        let inst = GameInstance::random(&mut rng, n);
        let ctx = inst.ctx();
        match solve_stage1(&ctx) {
            Ok(out) => {
                offloading += out.profile.iter().filter(|&&a| a).count();
                let exhaustive = verify::nash_profiles(&ctx);
                if !verify::is_nash(&ctx, &out.profile) || !exhaustive.contains(&out.profile) {
                    bad += 1;
                }
            }
            Err(_) => errors += 1,
        }
    }
    vec![Check {
        name: format!("equilibrium certified by enumeration ({instances} instances)"),
        verdict: if bad + errors == 0 { Verdict::Pass } else { Verdict::Fail },
        detail: format!("{bad} counterexamples, {errors} solver errors, {offloading} offloading decisions in total"),
    }]
}

/// Closed-form shares against a numeric optimiser and random feasible shares.
pub fn allocation_optimality(instances: usize, samples: usize, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = ScenarioConfig::<f64>::default();
    let (mut worst_coord, mut beaten, mut errors) = (0.0f64, 0usize, 0usize);
    for _ in 0..instances {
        let n = rng.random_range(1..=8);
        let uds = random_devices(&mut rng, n, &cfg);
        let refs: Vec<&UdState<f64>> = uds.iter().collect();
        let pos = random_point(&mut rng, &cfg);
        let Ok(alloc) = optimal_allocation(&refs, pos, &cfg.channel, &cfg.uav) else {
            errors += 1;
            continue;
        };
        let closed = verify::shares_in_order(&refs, &alloc);
        let numeric = verify::allocation_oracle(&refs, pos, &cfg.channel, &cfg.uav);
        for (a, b) in closed.iter().zip(&numeric) {
            worst_coord = worst_coord.max((a.0 - b.0).abs()).max((a.1 - b.1).abs());
        }
        let best = p11_objective(&refs, &alloc, pos, &cfg.channel, &cfg.uav).unwrap_or(f64::INFINITY);
        for _ in 0..samples {
            let mut s: Vec<f64> = refs.iter().map(|_| rng.random::<f64>() + 1e-12).collect();
            let mut w: Vec<f64> = refs.iter().map(|_| rng.random::<f64>() + 1e-12).collect();
            let (ss, sw): (f64, f64) = (s.iter().sum(), w.iter().sum());
            s.iter_mut().for_each(|x| *x /= ss);
            w.iter_mut().for_each(|x| *x /= sw);
            let shares: Vec<(f64, f64)> = s.into_iter().zip(w).collect();
            let cost = verify::allocation_cost(&refs, &shares, pos, &cfg.channel, &cfg.uav);
            if cost < best * (1.0 - 1e-12) {
                beaten += 1;
            }
        }
    }
    vec![
        Check {
            name: format!("closed form matches numeric optimum ({instances} sets)"),
            verdict: if worst_coord <= 1e-6 && errors == 0 { Verdict::Pass } else { Verdict::Fail },
            detail: format!("largest coordinate gap {worst_coord:.2e}, {errors} errors"),
        },
        Check {
            name: format!("no random feasible allocation does better ({samples} per set)"),
            verdict: if beaten == 0 { Verdict::Pass } else { Verdict::Fail },
            detail: format!("{beaten} random allocations beat the closed form"),
        },
    ]
}

/// Random trajectory problem around a random UAV position, with `n` offloaders.
pub fn random_stage2(rng: &mut ChaCha8Rng, n: usize) -> TrajectoryProblem<f64> {
    let cfg = ScenarioConfig::<f64>::default();
    let current = random_point(rng, &cfg);
    let uds = random_devices(rng, n, &cfg);
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = raw.iter().sum();
    let offloaders = uds
        .iter()
        .zip(&raw)
        .map(|(ud, r)| TrajectoryOffloader {
            position: ud.position,
            demand: comm_demand(ud),
            bandwidth_share: r / total,
            snr_scale: snr_scale(ud, current, &cfg.channel, cfg.uav.height),
        })
        .collect();
    TrajectoryProblem {
        current_position: current,
        offloaders,
        q_propulsion: 10f64.powf(rng.random_range(-3.0..2.5)),
        v_param: cfg.energy.v_param,
        uav: cfg.uav,
        channel: cfg.channel,
        tau: cfg.tau,
    }
}

/// Point uniformly distributed in the disc of radius `r` around `c`.
fn in_disc(rng: &mut ChaCha8Rng, c: Vec2<f64>, r: f64) -> Vec2<f64> {
    let rho = r * rng.random::<f64>().sqrt();
    let th = rng.random::<f64>() * std::f64::consts::TAU;
    c + Vec2::new(rho * th.cos(), rho * th.sin())
}

/// Both first-order minorants touch their function at the expansion point and
/// stay below it elsewhere.
pub fn minorant_checks(instances: usize, samples: usize, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut f_tan, mut g_tan) = (0.0f64, 0.0f64);
    let (mut f_bad, mut g_bad) = (0usize, 0usize);
    for _ in 0..instances {
        let n = rng.random_range(1..=5);
        let prob = random_stage2(&mut rng, n);
        let c = prob.current_position;
        let (tau, c3) = (prob.tau, prob.uav.c3);
        let local = in_disc(&mut rng, c, prob.radius());
        let it = ScaIterate {
            local_point: local,
            y_local: y_anchor(local, c, tau, c3),
            objective_value: 0.0,
            iteration: 1,
        };
        let exact_f = |p: Vec2<f64>, y: f64| y * y + p.dist_sq(c) / (tau * tau);
        f_tan = f_tan.max(rel_diff(f_lower(local, it.y_local, &it, c, tau), exact_f(local, it.y_local)));
        for m in 0..prob.offloaders.len() {
            g_tan = g_tan.max(rel_diff(g_lower(local, m, &it, &prob), prob.efficiency(m, local)));
        }
        let y_max = 10.0 * c3.powf(0.25);
        for _ in 0..samples {
            // beyond the speed ball as well, the bounds are global
            let p = in_disc(&mut rng, c, 3.0 * prob.radius());
            let y = rng.random::<f64>() * y_max;
            let (lo, hi) = (f_lower(p, y, &it, c, tau), exact_f(p, y));
            if lo > hi + 1e-9 * hi.abs().max(1.0) {
                f_bad += 1;
            }
            for m in 0..prob.offloaders.len() {
                let (lo, hi) = (g_lower(p, m, &it, &prob), prob.efficiency(m, p));
                if lo > hi + 1e-9 * hi.abs().max(1e-12) {
                    g_bad += 1;
                }
            }
        }
    }
    vec![
        Check {
            name: "propulsion minorant tangent at the expansion point".into(),
            verdict: if f_tan <= 1e-9 { Verdict::Pass } else { Verdict::Fail },
            detail: format!("worst relative gap {f_tan:.2e}"),
        },
        Check {
            name: "rate minorant tangent at the expansion point".into(),
            verdict: if g_tan <= 1e-9 { Verdict::Pass } else { Verdict::Fail },
            detail: format!("worst relative gap {g_tan:.2e}"),
        },
        Check {
            name: format!("propulsion minorant below its function ({samples} samples x {instances})"),
            verdict: if f_bad == 0 { Verdict::Pass } else { Verdict::Fail },
            detail: format!("{f_bad} violations"),
        },
        Check {
            name: format!("rate minorant below its function ({samples} samples x {instances} x devices)"),
            verdict: if g_bad == 0 { Verdict::Pass } else { Verdict::Fail },
            detail: format!("{g_bad} violations"),
        },
    ]
}

/// Descent, convergence and slack tightness of the trajectory rounds, plus
/// global optimality on small instances against a dense grid.
pub fn sca_behaviour(instances: usize, grid_pitch: f64, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut ascents, mut unconverged, mut loose, mut errors) = (0usize, 0usize, 0usize, 0usize);
    let mut exact_ascents = 0usize;
    let (mut max_rounds, mut worst_tight) = (0usize, 0.0f64);
    let (mut grid_runs, mut grid_bad, mut worst_gap) = (0usize, 0usize, f64::NEG_INFINITY);
    for i in 0..instances {
        let n = if i % 2 == 0 { rng.random_range(1..=3) } else { rng.random_range(4..=20) };
        let prob = random_stage2(&mut rng, n);
        let c = prob.current_position;
        let (tau, c3) = (prob.tau, prob.uav.c3);
        let y_max = 10.0 * c3.powf(0.25);
        let out = match solve_stage2(&prob) {
            Ok(o) => o,
            Err(_) => {
                errors += 1;
                continue;
            }
        };
        if !out.converged || out.iterations > 100 {
            unconverged += 1;
        }
        max_rounds = max_rounds.max(out.iterations);
        let mut local = c;
        let mut prev: Option<f64> = None;
        let mut prev_exact = p2_objective(c, &prob).unwrap_or(f64::INFINITY);
        for step in &out.trace {
            if step.exact_objective > prev_exact + 1e-6 * prev_exact.abs().max(1.0) {
                exact_ascents += 1;
            }
            prev_exact = step.exact_objective;
            if let Some(g) = prev {
                if step.surrogate_objective > g + 1e-6 * g.abs().max(1.0) {
                    ascents += 1;
                }
            }
            prev = Some(step.surrogate_objective);
            let it = ScaIterate {
                local_point: local,
                y_local: y_anchor(local, c, tau, c3),
                objective_value: 0.0,
                iteration: step.iteration,
            };
            let p = step.position;
            let mut gap = 0.0f64;
            for (m, &z) in step.z.iter().enumerate() {
                gap = gap.max(rel_diff(z, g_lower(p, m, &it, &prob)));
            }
            let fl = f_lower(p, step.y, &it, c, tau);
            let need = c3 / (step.y * step.y);
            // at the y cap only a violated constraint counts
            if step.y < y_max * (1.0 - 1e-12) || need > fl * (1.0 + 1e-6) {
                gap = gap.max(rel_diff(need, fl));
            }
            worst_tight = worst_tight.max(gap);
            if gap > 1e-6 {
                loose += 1;
            }
            local = p;
        }
        if n <= 3 {
            grid_runs += 1;
            let (_, best) = verify::stage2_grid_optimum(&prob, grid_pitch);
            let got = p2_objective(out.position, &prob).unwrap_or(f64::INFINITY);
            let gap = (got - best) / best.abs();
            worst_gap = worst_gap.max(gap);
            if gap > 0.005 {
                grid_bad += 1;
            }
        }
    }
    let v = |ok: bool| if ok { Verdict::Pass } else { Verdict::Fail };
    vec![
        Check {
            name: format!("surrogate value non-increasing over rounds ({instances} instances)"),
            verdict: v(ascents == 0 && errors == 0),
            detail: format!("{ascents} ascents beyond 1e-6, {errors} solver errors"),
        },
        Check {
            name: "exact objective non-increasing over local points".into(),
            verdict: v(exact_ascents == 0 && errors == 0),
            detail: format!("{exact_ascents} ascents beyond 1e-6"),
        },
        Check {
            name: "converges with accuracy 0.01 within 100 rounds".into(),
            verdict: v(unconverged == 0 && errors == 0),
            detail: format!("{unconverged} unconverged, most rounds {max_rounds}"),
        },
        Check {
            name: "slacks tight at every subproblem solution".into(),
            verdict: v(loose == 0),
            detail: format!("{loose} loose solutions, worst relative gap {worst_tight:.2e}"),
        },
        Check {
            name: format!("within 0.5% of a {grid_pitch} m grid optimum for up to 3 devices ({grid_runs} instances)"),
            verdict: v(grid_bad == 0 && grid_runs > 0),
            detail: format!("{grid_bad} outside, worst relative excess {:.3}%", 100.0 * worst_gap),
        },
    ]
}

/// Long-run queue stability and the one-slot drift-plus-penalty bound of the
/// online controller at the default scenario.
pub fn queue_stability(horizon: usize, seeds: &[u64]) -> (Vec<Check>, Vec<Check>) {
    let cfg = ScenarioConfig::<f64> {
        horizon,
        ..Default::default()
    };
    let budget = cfg.energy.budget_total;
    let w = drift_bound_constant(&cfg);
    let v = cfg.energy.v_param;
    let (mut worst_backlog, mut worst_energy) = (0.0f64, 0.0f64);
    let (mut slots, mut violations, mut errors) = (0usize, 0usize, 0usize);
    let mut worst_slack = f64::INFINITY;
    for &seed in seeds {
        let ep = match run_episode(SchemeKind::Ojoa, &cfg, seed) {
            Ok(ep) => ep,
            Err(_) => {
                errors += 1;
                continue;
            }
        };
        let m = &ep.metrics;
        worst_backlog = worst_backlog.max(m.final_q_compute.max(m.final_q_propulsion) / horizon as f64);
        worst_energy = worst_energy.max(m.time_average_uav_energy);
        let mut q = cfg.initial_queues().expect("validated budgets");
        for r in &ep.records {
            let mut next = q;
            next.q_compute = r.q_compute;
            next.q_propulsion = r.q_propulsion;
            let realised = lyapunov_value(&next) - lyapunov_value(&q) + v * r.system_cost;
            let rhs = drift_bound_rhs(w, &q, r.e_compute, r.e_propulsion, r.system_cost);
            let slack = rhs - realised;
            worst_slack = worst_slack.min(slack);
            if slack < -1e-9 * rhs.abs().max(1.0) {
                violations += 1;
            }
            slots += 1;
            q = next;
        }
    }
    let vd = |ok: bool| if ok { Verdict::Pass } else { Verdict::Fail };
    let stability = vec![
        Check {
            name: format!("max(Q_c(T), Q_p(T)) / T < 0.05 * budget (T = {horizon}, {} seeds)", seeds.len()),
            verdict: vd(worst_backlog < 0.05 * budget && errors == 0),
            detail: format!("worst {worst_backlog:.4} J vs {:.4} J, {errors} failed episodes", 0.05 * budget),
        },
        Check {
            name: "time-average UAV energy <= 1.05 * budget".into(),
            verdict: vd(worst_energy <= 1.05 * budget && errors == 0),
            detail: format!("worst {worst_energy:.3} J vs {:.3} J", 1.05 * budget),
        },
    ];
    let bound = vec![Check {
        name: format!("drift-plus-penalty within the one-slot bound on every slot ({slots} slots)"),
        verdict: vd(violations == 0 && errors == 0 && slots > 0),
        detail: format!("{violations} violations, smallest slack {worst_slack:.3e}, W = {w:.3e}"),
    }];
    (stability, bound)
}

fn summarise(cfg: &ExperimentConfig) -> anyhow::Result<Summary> {
    let outcomes = run_grid(cfg)?;
    Ok(Summary::from_files(&[metrics_file(cfg, &outcomes)]))
}

fn grid_checks(cfg: &ExperimentConfig, evaluate: impl Fn(&Summary) -> Vec<Check>) -> Vec<Check> {
    match summarise(cfg) {
        Ok(s) => {
            let mut checks = evaluate(&s);
            if !s.failures.is_empty() {
                checks.push(Check {
                    name: "every episode completes".into(),
                    verdict: Verdict::Fail,
                    detail: format!("{} failed episodes", s.failures.len()),
                });
            }
            checks
        }
        Err(e) => vec![Check {
            name: "experiment runs".into(),
            verdict: Verdict::Fail,
            detail: e.to_string(),
        }],
    }
}

/// Scheme comparison at the default scenario.
pub fn scheme_ordering(seeds: &[u64]) -> Vec<Check> {
    let mut cfg = ExperimentConfig::default();
    cfg.seeds = seeds.to_vec();
    grid_checks(&cfg, |s| scheme_checks(s, 0))
}

/// Trends over the maximum task size (bits).
pub fn data_size_trend(values: &[f64], seeds: &[u64]) -> Vec<Check> {
    let mut cfg = ExperimentConfig::default();
    cfg.seeds = seeds.to_vec();
    cfg.sweep_key = DATA_SIZE_KEY.into();
    cfg.sweep_values = values.to_vec();
    grid_checks(&cfg, data_size_checks)
}

/// Cost/backlog trade-off of the online controller over `V`.
pub fn v_tradeoff(values: &[f64], seeds: &[u64]) -> Vec<Check> {
    let mut cfg = ExperimentConfig::default();
    cfg.seeds = seeds.to_vec();
    cfg.schemes = vec![SchemeKind::Ojoa];
    cfg.sweep_key = V_KEY.into();
    cfg.sweep_values = values.to_vec();
    grid_checks(&cfg, v_checks)
}

/// Run the same experiment into two directories and compare `slots.csv` bytes.
pub fn determinism(cfg: &ExperimentConfig, dir_a: &Path, dir_b: &Path) -> Vec<Check> {
    let run = |dir: &Path| -> anyhow::Result<Vec<u8>> {
        let outcomes = run_grid(cfg)?;
        write_outputs(cfg, &outcomes, dir)?;
        Ok(std::fs::read(dir.join(SLOTS_FILE))?)
    };
    let detail;
    let ok = match (run(dir_a), run(dir_b)) {
        (Ok(a), Ok(b)) => {
            detail = format!("{} bytes each, identical = {}", a.len(), a == b);
            a == b && !a.is_empty()
        }
        (Err(e), _) | (_, Err(e)) => {
            detail = e.to_string();
            false
        }
    };
    vec![Check {
        name: "identical configuration gives byte-identical slots.csv".into(),
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        detail,
    }]
}
