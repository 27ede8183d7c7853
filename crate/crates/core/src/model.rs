//! Physical models of the air-to-ground link, local and edge execution, and the
//! rotary-wing propulsion power curve.
//!
//! Everything here is a pure function of its arguments. Units are SI throughout:
//! bits, cycles, seconds, joules, watts, hertz and metres.

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::scalar::Scalar;

/// Probabilistic line-of-sight channel constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams<T> {
    /// Logistic LoS shape constant (also the elevation offset, in degrees).
    pub xi1: T,
    /// Logistic LoS slope constant.
    pub xi2: T,
    /// Extra attenuation of a non-LoS link, in (0, 1].
    pub kappa: T,
    /// Linear channel gain at the 1 m reference distance.
    pub beta0: T,
    /// Half the path-loss exponent.
    pub mu: T,
    /// Receiver noise power (W).
    pub noise_power: T,
    /// Total uplink bandwidth (Hz).
    pub bandwidth: T,
}

impl<T: Scalar> Default for ChannelParams<T> {
    fn default() -> Self {
        Self {
            xi1: T::lit(11.95),
            xi2: T::lit(0.14),
            kappa: T::lit(0.2),
            beta0: T::lit(1e-5),
            mu: T::one(),
            noise_power: T::lit(1e-13),
            bandwidth: T::lit(4e6),
        }
    }
}

impl<T: Scalar> ChannelParams<T> {
    pub fn validate(&self) -> Result<()> {
        positive("channel.xi1", self.xi1)?;
        positive("channel.xi2", self.xi2)?;
        if !(self.kappa > T::zero() && self.kappa <= T::one()) {
            return Err(Error::invalid("channel.kappa", "must lie in (0, 1]"));
        }
        positive("channel.beta0", self.beta0)?;
        positive("channel.mu", self.mu)?;
        positive("channel.noise_power", self.noise_power)?;
        positive("channel.bandwidth", self.bandwidth)
    }
}

/// UAV platform constants, including the rotary-wing propulsion model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavParams<T> {
    /// Fixed flight altitude (m).
    pub height: T,
    pub v_max: T,
    /// Total edge compute capacity (cycles/s).
    pub f_max: T,
    pub initial_position: Vec2<T>,
    /// Blade profile power (W).
    pub c1: T,
    /// Induced power coefficient.
    pub c2: T,
    /// Fourth power of the mean rotor induced velocity in hover.
    pub c3: T,
    /// Parasite power coefficient.
    pub c4: T,
    /// Rotor blade tip speed (m/s).
    pub u_tip: T,
    /// Energy per executed CPU cycle (J/cycle).
    pub varpi: T,
}

impl<T: Scalar> Default for UavParams<T> {
    fn default() -> Self {
        Self {
            height: T::lit(100.0),
            v_max: T::lit(30.0),
            f_max: T::lit(20e9),
            initial_position: Vec2::new(T::lit(200.0), T::lit(200.0)),
            c1: T::lit(79.86),
            c2: T::lit(21.99),
            c3: T::lit(263.8),
            c4: T::lit(0.009243),
            u_tip: T::lit(120.0),
            varpi: T::lit(1e-9),
        }
    }
}

impl<T: Scalar> UavParams<T> {
    pub fn validate(&self) -> Result<()> {
        positive("uav.height", self.height)?;
        positive("uav.v_max", self.v_max)?;
        positive("uav.f_max", self.f_max)?;
        if !self.initial_position.is_finite() {
            return Err(Error::invalid("uav.initial_position", "must be finite"));
        }
        positive("uav.c1", self.c1)?;
        positive("uav.c2", self.c2)?;
        positive("uav.c3", self.c3)?;
        positive("uav.c4", self.c4)?;
        positive("uav.u_tip", self.u_tip)?;
        positive("uav.varpi", self.varpi)
    }
}

/// Per-device hardware and preference constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UdParams<T> {
    /// Local CPU frequency (cycles/s).
    pub f_local: T,
    /// Uplink transmit power (W).
    pub tx_power: T,
    /// Weight of delay against energy in the device cost, in [0, 1].
    pub gamma: T,
    /// Effective switched capacitance of the local CPU.
    pub kappa_eff: T,
}

impl<T: Scalar> Default for UdParams<T> {
    fn default() -> Self {
        Self {
            f_local: T::lit(1.5e9),
            tx_power: T::lit(0.1),
            gamma: T::lit(0.5),
            kappa_eff: T::lit(1e-27),
        }
    }
}

impl<T: Scalar> UdParams<T> {
    pub fn validate(&self) -> Result<()> {
        positive("ud.f_local", self.f_local)?;
        positive("ud.tx_power", self.tx_power)?;
        if !(self.gamma >= T::zero() && self.gamma <= T::one()) {
            return Err(Error::invalid("ud.gamma", "must lie in [0, 1]"));
        }
        positive("ud.kappa_eff", self.kappa_eff)
    }
}

/// One computing job generated by a device in a slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Task<T> {
    /// Input size (bits).
    pub data_bits: T,
    /// Computation intensity (cycles/bit).
    pub intensity: T,
    /// Latest acceptable completion delay (s).
    pub deadline: T,
}

impl<T: Scalar> Task<T> {
    pub fn new(data_bits: T, intensity: T, deadline: T) -> Self {
        Self {
            data_bits,
            intensity,
            deadline,
        }
    }

    /// Total CPU cycles needed.
    pub fn cycles(&self) -> T {
        self.intensity * self.data_bits
    }

    pub fn validate(&self) -> Result<()> {
        positive("task.data_bits", self.data_bits)?;
        positive("task.intensity", self.intensity)?;
        positive("task.deadline", self.deadline)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UdState<T> {
    pub id: usize,
    pub position: Vec2<T>,
    pub velocity: Vec2<T>,
    pub params: UdParams<T>,
    pub task: Task<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavState<T> {
    pub position: Vec2<T>,
    pub params: UavParams<T>,
}

/// Where a task runs, with the resources it gets when offloaded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Execution<T> {
    Local,
    Edge { rate: T, compute: T },
}

/// UAV energy drawn in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SlotEnergy<T> {
    pub compute: T,
    pub propulsion: T,
}

impl<T: Scalar> SlotEnergy<T> {
    pub fn total(&self) -> T {
        self.compute + self.propulsion
    }
}

fn positive<T: Scalar>(field: &str, value: T) -> Result<()> {
    if value > T::zero() && value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be positive and finite, got {value}")))
    }
}

/// Elevation angle in degrees of the UAV as seen from a ground device.
pub fn elevation_deg<T: Scalar>(ud_pos: Vec2<T>, uav_pos: Vec2<T>, height: T) -> T {
    let slant = (ud_pos.dist_sq(uav_pos) + height * height).sqrt();
    (height / slant).min(T::one()).asin().to_degrees()
}

/// LoS probability as a logistic function of the elevation angle (degrees).
pub fn los_probability_at_elevation<T: Scalar>(theta_deg: T, ch: &ChannelParams<T>) -> T {
    T::one() / (T::one() + ch.xi1 * (-ch.xi2 * (theta_deg - ch.xi1)).exp())
}

pub fn los_probability<T: Scalar>(
    ud_pos: Vec2<T>,
    uav_pos: Vec2<T>,
    ch: &ChannelParams<T>,
    height: T,
) -> T {
    los_probability_at_elevation(elevation_deg(ud_pos, uav_pos, height), ch)
}

/// Expected attenuation once the NLoS penalty is averaged in: `p + (1 - p) kappa`.
pub fn effective_los_factor<T: Scalar>(p_los: T, kappa: T) -> T {
    p_los + (T::one() - p_los) * kappa
}

/// SNR numerator `P beta0 p~ / N0` of a device at the given UAV position.
pub fn snr_scale<T: Scalar>(ud: &UdState<T>, uav_pos: Vec2<T>, ch: &ChannelParams<T>, height: T) -> T {
    let p_los = los_probability(ud.position, uav_pos, ch, height);
    ud.params.tx_power * ch.beta0 * effective_los_factor(p_los, ch.kappa) / ch.noise_power
}

/// `log2(1 + scale / (d^2 + H^2)^mu)` for a fixed SNR scale and squared horizontal distance.
pub fn spectral_efficiency_from_scale<T: Scalar>(scale: T, horiz_dist_sq: T, height: T, mu: T) -> T {
    (T::one() + scale / (horiz_dist_sq + height * height).powf(mu)).log2()
}

/// Achievable spectral efficiency (bits/s/Hz) of a device toward the UAV.
pub fn spectral_efficiency<T: Scalar>(
    ud: &UdState<T>,
    uav_pos: Vec2<T>,
    ch: &ChannelParams<T>,
    height: T,
) -> T {
    let scale = snr_scale(ud, uav_pos, ch, height);
    spectral_efficiency_from_scale(scale, ud.position.dist_sq(uav_pos), height, ch.mu)
}

/// OFDMA uplink rate (bits/s) for a bandwidth fraction `w`.
pub fn uplink_rate<T: Scalar>(
    w: T,
    ud: &UdState<T>,
    uav_pos: Vec2<T>,
    ch: &ChannelParams<T>,
    height: T,
) -> T {
    w * ch.bandwidth * spectral_efficiency(ud, uav_pos, ch, height)
}

pub fn local_delay<T: Scalar>(task: &Task<T>, ud: &UdParams<T>) -> T {
    task.cycles() / ud.f_local
}

/// Dynamic CPU energy `k f^3 T_loc`.
pub fn local_energy<T: Scalar>(task: &Task<T>, ud: &UdParams<T>) -> T {
    ud.kappa_eff * ud.f_local.powi(3) * local_delay(task, ud)
}

/// Upload plus remote execution delay.
pub fn edge_delay<T: Scalar>(task: &Task<T>, rate: T, f_alloc: T) -> Result<T> {
    if !(rate > T::zero()) {
        return Err(Error::NonPositiveRate(rate.to_f64_lossy()));
    }
    if !(f_alloc > T::zero()) {
        return Err(Error::NonPositiveCompute(f_alloc.to_f64_lossy()));
    }
    Ok(task.data_bits / rate + task.cycles() / f_alloc)
}

pub fn transmit_energy<T: Scalar>(task: &Task<T>, tx_power: T, rate: T) -> T {
    tx_power * task.data_bits / rate
}

pub fn uav_compute_energy<T: Scalar>(task: &Task<T>, varpi: T) -> T {
    varpi * task.cycles()
}

/// Radicand of the induced-power term, `sqrt(C3 + v^4/4) - v^2/2`.
///
/// Written as `C3 / (sqrt(C3 + v^4/4) + v^2/2)` so it stays positive at high speed
/// instead of cancelling to zero.
pub fn induced_radicand<T: Scalar>(speed: T, c3: T) -> T {
    let half_v2 = speed * speed * T::lit(0.5);
    c3 / ((c3 + half_v2 * half_v2).sqrt() + half_v2)
}

/// Rotary-wing propulsion power (W) at horizontal speed `speed`.
pub fn propulsion_power<T: Scalar>(speed: T, p: &UavParams<T>) -> T {
    let v2 = speed * speed;
    let blade = p.c1 * (T::one() + T::lit(3.0) * v2 / (p.u_tip * p.u_tip));
    let induced = p.c2 * induced_radicand(speed, p.c3).sqrt();
    let parasite = p.c4 * v2 * speed;
    blade + induced + parasite
}

/// Weighted delay/energy cost of one device for the given execution choice.
///
/// For an offloaded task only the device's transmit energy enters; the UAV's
/// compute energy is accounted on the UAV side.
pub fn ud_cost<T: Scalar>(exec: Execution<T>, task: &Task<T>, ud: &UdParams<T>) -> Result<T> {
    let (delay, energy) = match exec {
        Execution::Local => (local_delay(task, ud), local_energy(task, ud)),
        Execution::Edge { rate, compute } => (
            edge_delay(task, rate, compute)?,
            transmit_energy(task, ud.tx_power, rate),
        ),
    };
    Ok(ud.gamma * delay + (T::one() - ud.gamma) * energy)
}

/// Compute and propulsion energy the UAV spends in one slot.
pub fn uav_slot_energy<'a, T: Scalar>(
    offloaded: impl IntoIterator<Item = &'a Task<T>>,
    varpi: T,
    speed: T,
    tau: T,
    p: &UavParams<T>,
) -> SlotEnergy<T> {
    let compute = offloaded
        .into_iter()
        .map(|t| uav_compute_energy(t, varpi))
        .fold(T::zero(), |a, b| a + b);
    SlotEnergy {
        compute,
        propulsion: propulsion_power(speed, p) * tau,
    }
}
