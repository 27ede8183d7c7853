use crate::error::{Error, Result};
use crate::geom::{Area, Vec2};
use crate::lyapunov::{drift_bound_from_maxima, max_propulsion_power, EnergyQueues};
use crate::model::{ChannelParams, UavParams};
use crate::scalar::Scalar;

/// Device constants shared by all devices, except the CPU speed which is drawn per device.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSettings<T> {
    pub tx_power: T,
    pub gamma: T,
    pub kappa_eff: T,
    /// Local CPU frequencies a device draws from uniformly.
    pub f_local_choices: Vec<T>,
}

impl<T: Scalar> Default for DeviceSettings<T> {
    fn default() -> Self {
        Self {
            tx_power: T::lit(0.1),
            gamma: T::lit(0.5),
            kappa_eff: T::lit(1e-27),
            f_local_choices: vec![T::lit(1e9), T::lit(1.5e9), T::lit(2e9)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskRanges<T> {
    pub data_min: T,
    pub data_max: T,
    pub intensity_min: T,
    pub intensity_max: T,
    pub deadline: T,
}

impl<T: Scalar> Default for TaskRanges<T> {
    fn default() -> Self {
        Self {
            data_min: T::lit(1e5),
            data_max: T::lit(1e6),
            intensity_min: T::lit(500.0),
            intensity_max: T::lit(1500.0),
            deadline: T::lit(1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilitySettings<T> {
    pub alpha: T,
    /// Upper end of the uniform mean-speed draw (m/s).
    pub mean_speed_max: T,
    pub sigma: T,
}

impl<T: Scalar> Default for MobilitySettings<T> {
    fn default() -> Self {
        Self {
            alpha: T::lit(0.8),
            mean_speed_max: T::lit(2.0),
            sigma: T::lit(0.5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySettings<T> {
    /// Long-run UAV energy budget per slot (J).
    pub budget_total: T,
    /// Part of the budget reserved for computing; the rest goes to propulsion.
    pub compute_fraction: T,
    pub v_param: T,
}

impl<T: Scalar> Default for EnergySettings<T> {
    fn default() -> Self {
        Self {
            budget_total: T::lit(220.0),
            compute_fraction: T::lit(0.15),
            v_param: T::lit(200.0),
        }
    }
}

impl<T: Scalar> EnergySettings<T> {
    pub fn budget_compute(&self) -> T {
        self.budget_total * self.compute_fraction
    }

    pub fn budget_propulsion(&self) -> T {
        self.budget_total * (T::one() - self.compute_fraction)
    }
}

/// Knobs that decide how the benchmark schemes reuse the main components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeSettings<T> {
    /// Equal-sharing benchmark plans its trajectory like the main scheme; otherwise it hovers.
    pub era_plans_trajectory: bool,
    /// Where the fixed-position benchmark hovers.
    pub flp_position: Vec2<T>,
    /// All-local benchmark still pays hover power.
    pub elc_hover_energy: bool,
}

impl<T: Scalar> Default for SchemeSettings<T> {
    fn default() -> Self {
        Self {
            era_plans_trajectory: true,
            flp_position: Vec2::new(T::lit(200.0), T::lit(200.0)),
            elc_hover_energy: true,
        }
    }
}

/// Everything one episode depends on apart from the seed and the scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig<T> {
    pub area: Area<T>,
    pub num_uds: usize,
    pub horizon: usize,
    pub tau: T,
    pub channel: ChannelParams<T>,
    pub uav: UavParams<T>,
    pub devices: DeviceSettings<T>,
    pub tasks: TaskRanges<T>,
    pub mobility: MobilitySettings<T>,
    pub energy: EnergySettings<T>,
    pub schemes: SchemeSettings<T>,
    /// Keep the per-round trajectory trace in every slot record.
    pub trace_sca: bool,
}

impl<T: Scalar> Default for ScenarioConfig<T> {
    fn default() -> Self {
        Self {
            area: Area::new(T::lit(400.0), T::lit(400.0)),
            num_uds: 20,
            horizon: 80,
            tau: T::one(),
            channel: ChannelParams::default(),
            // 1e-9 J/cycle leaves the compute budget slack at these loads, so the
            // compute queue would never price offloading
            uav: UavParams {
                varpi: T::lit(4e-9),
                ..UavParams::default()
            },
            devices: DeviceSettings::default(),
            tasks: TaskRanges::default(),
            mobility: MobilitySettings::default(),
            energy: EnergySettings::default(),
            schemes: SchemeSettings::default(),
            trace_sca: false,
        }
    }
}

fn check(ok: bool, field: &str, reason: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(field, reason))
    }
}

impl<T: Scalar> ScenarioConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: T| x > T::zero() && x.is_finite();
        check(pos(self.area.width), "area.width", "must be positive")?;
        check(pos(self.area.height), "area.height", "must be positive")?;
        check(self.num_uds > 0, "sim.M", "must be at least 1")?;
        check(self.horizon > 0, "sim.T", "must be at least 1")?;
        check(pos(self.tau), "sim.tau", "must be positive")?;
        self.channel.validate()?;
        self.uav.validate()?;
        check(
            self.area.contains(self.uav.initial_position),
            "uav.initial_x",
            "must lie inside the area",
        )?;
        let d = &self.devices;
        check(pos(d.tx_power), "ud.tx_power", "must be positive")?;
        check(d.gamma >= T::zero() && d.gamma <= T::one(), "ud.gamma", "must lie in [0, 1]")?;
        check(pos(d.kappa_eff), "ud.kappa_eff", "must be positive")?;
        check(
            !d.f_local_choices.is_empty() && d.f_local_choices.iter().all(|&f| pos(f)),
            "ud.f_local_choices",
            "must be a non-empty list of positive frequencies",
        )?;
        let t = &self.tasks;
        check(pos(t.data_min), "task.data_min", "must be positive")?;
        check(t.data_max >= t.data_min && t.data_max.is_finite(), "task.data_max", "must be at least task.data_min")?;
        check(pos(t.intensity_min), "task.intensity_min", "must be positive")?;
        check(
            t.intensity_max >= t.intensity_min && t.intensity_max.is_finite(),
            "task.intensity_max",
            "must be at least task.intensity_min",
        )?;
        check(pos(t.deadline), "task.deadline", "must be positive")?;
        let m = &self.mobility;
        check(m.alpha >= T::zero() && m.alpha <= T::one(), "mobility.alpha", "must lie in [0, 1]")?;
        check(m.mean_speed_max >= T::zero(), "mobility.mean_speed_max", "must be non-negative")?;
        check(m.sigma >= T::zero(), "mobility.sigma", "must be non-negative")?;
        let e = &self.energy;
        check(e.budget_total >= T::zero() && e.budget_total.is_finite(), "energy.budget_total", "must be non-negative")?;
        check(
            e.compute_fraction >= T::zero() && e.compute_fraction <= T::one(),
            "energy.compute_fraction",
            "must lie in [0, 1]",
        )?;
        check(pos(e.v_param), "energy.v", "must be positive")?;
        check(
            self.area.contains(self.schemes.flp_position),
            "scheme.flp_x",
            "must lie inside the area",
        )?;
        Ok(())
    }

    /// Empty queues carrying this scenario's budgets and `V`.
    pub fn initial_queues(&self) -> Result<EnergyQueues<T>> {
        EnergyQueues::new(self.energy.budget_compute(), self.energy.budget_propulsion(), self.energy.v_param)
    }

    /// Largest compute energy one slot can draw: every device offloads a maximal task.
    pub fn max_compute_energy(&self) -> T {
        self.uav.varpi * T::lit(self.num_uds as f64) * self.tasks.intensity_max * self.tasks.data_max
    }

    pub fn max_propulsion_energy(&self) -> T {
        self.tau * max_propulsion_power(&self.uav)
    }
}

/// Constant `W` of the one-slot drift-plus-penalty bound for this scenario.
pub fn drift_bound_constant<T: Scalar>(cfg: &ScenarioConfig<T>) -> T {
    drift_bound_from_maxima(
        cfg.energy.budget_compute(),
        cfg.energy.budget_propulsion(),
        cfg.max_compute_energy(),
        cfg.max_propulsion_energy(),
    )
}
