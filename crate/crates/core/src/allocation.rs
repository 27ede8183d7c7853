//! Compute and bandwidth sharing among the devices that offload in a slot.
//!
//! With the offloader set fixed, the weighted delay/energy cost is separable and
//! convex in the compute fractions `s` and bandwidth fractions `w`. Its minimiser
//! gives each device a share proportional to the square root of its weighted
//! demand:
//!
//! ```text
//! beta_m = sqrt(gamma_m eta_m D_m / F_max)
//! phi_m  = sqrt((gamma_m D_m + (1 - gamma_m) P_m D_m) / (B r_m))
//! s_m = beta_m / sum(beta),   w_m = phi_m / sum(phi)
//! ```

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::model::{spectral_efficiency, ChannelParams, UavParams, UdState};
use crate::scalar::Scalar;

/// How the UAV splits its resources among offloaders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AllocationPolicy {
    /// Square-root proportional shares (cost-minimising).
    Optimal,
    /// Every offloader gets `1/|M1|` of each resource.
    Equal,
}

/// Resource shares of one offloading device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Share<T> {
    pub id: usize,
    pub compute_fraction: T,
    pub bandwidth_fraction: T,
}

/// Shares for every offloader, ordered by device id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Allocation<T> {
    pub shares: Vec<Share<T>>,
}

impl<T: Scalar> Allocation<T> {
    pub fn get(&self, id: usize) -> Option<&Share<T>> {
        self.shares
            .binary_search_by_key(&id, |s| s.id)
            .ok()
            .map(|i| &self.shares[i])
    }

    pub fn is_empty(&self) -> bool {
        self.shares.is_empty()
    }

    pub fn compute_sum(&self) -> T {
        self.shares.iter().map(|s| s.compute_fraction).sum()
    }

    pub fn bandwidth_sum(&self) -> T {
        self.shares.iter().map(|s| s.bandwidth_fraction).sum()
    }

    /// Every share non-negative and both totals at most one (plus `tol`).
    pub fn is_feasible(&self, tol: T) -> bool {
        self.shares
            .iter()
            .all(|s| s.compute_fraction >= T::zero() && s.bandwidth_fraction >= T::zero())
            && self.compute_sum() <= T::one() + tol
            && self.bandwidth_sum() <= T::one() + tol
    }
}

/// Square-root demand weights of one device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights<T> {
    /// Compute weight `beta`.
    pub beta: T,
    /// Communication weight `phi`.
    pub comm_weight: T,
}

/// Weighted bits the device pays for per unit of rate: `gamma D + (1-gamma) P D`.
pub fn comm_demand<T: Scalar>(ud: &UdState<T>) -> T {
    let g = ud.params.gamma;
    g * ud.task.data_bits + (T::one() - g) * ud.params.tx_power * ud.task.data_bits
}

pub fn weights_from_efficiency<T: Scalar>(ud: &UdState<T>, efficiency: T, bandwidth: T, f_max: T) -> Weights<T> {
    Weights {
        beta: (ud.params.gamma * ud.task.cycles() / f_max).sqrt(),
        comm_weight: (comm_demand(ud) / (bandwidth * efficiency)).sqrt(),
    }
}

pub fn compute_weights<T: Scalar>(
    ud: &UdState<T>,
    uav_pos: Vec2<T>,
    ch: &ChannelParams<T>,
    uav: &UavParams<T>,
) -> Weights<T> {
    let r = spectral_efficiency(ud, uav_pos, ch, uav.height);
    weights_from_efficiency(ud, r, ch.bandwidth, uav.f_max)
}

/// Normalise precomputed weights into shares. `ids` and `weights` are parallel.
pub fn proportional_shares<T: Scalar>(ids: &[usize], weights: &[Weights<T>]) -> Result<Allocation<T>> {
    if ids.is_empty() {
        return Err(Error::EmptyOffloaders);
    }
    let sum_beta: T = weights.iter().map(|w| w.beta).sum();
    let sum_phi: T = weights.iter().map(|w| w.comm_weight).sum();
    let frac = |x: T, total: T| if total > T::zero() { x / total } else { T::zero() };
    let mut shares: Vec<Share<T>> = ids
        .iter()
        .zip(weights)
        .map(|(&id, w)| Share {
            id,
            compute_fraction: frac(w.beta, sum_beta),
            bandwidth_fraction: frac(w.comm_weight, sum_phi),
        })
        .collect();
    shares.sort_by_key(|s| s.id);
    Ok(Allocation { shares })
}

/// Cost-minimising shares for the given offloaders at the current UAV position.
pub fn optimal_allocation<T: Scalar>(
    offloaders: &[&UdState<T>],
    uav_pos: Vec2<T>,
    ch: &ChannelParams<T>,
    uav: &UavParams<T>,
) -> Result<Allocation<T>> {
    let ids: Vec<usize> = offloaders.iter().map(|u| u.id).collect();
    let weights: Vec<Weights<T>> = offloaders
        .iter()
        .map(|u| compute_weights(u, uav_pos, ch, uav))
        .collect();
    proportional_shares(&ids, &weights)
}

pub fn era_allocation<T: Scalar>(ids: &[usize]) -> Result<Allocation<T>> {
    if ids.is_empty() {
        return Err(Error::EmptyOffloaders);
    }
    let each = T::one() / T::lit(ids.len() as f64);
    let mut shares: Vec<Share<T>> = ids
        .iter()
        .map(|&id| Share {
            id,
            compute_fraction: each,
            bandwidth_fraction: each,
        })
        .collect();
    shares.sort_by_key(|s| s.id);
    Ok(Allocation { shares })
}

/// Total weighted edge cost of the offloaders under `alloc`.
pub fn p11_objective<T: Scalar>(
    offloaders: &[&UdState<T>],
    alloc: &Allocation<T>,
    uav_pos: Vec2<T>,
    ch: &ChannelParams<T>,
    uav: &UavParams<T>,
) -> Result<T> {
    let mut total = T::zero();
    for ud in offloaders {
        let share = alloc.get(ud.id).ok_or(Error::ZeroShare(ud.id))?;
        if !(share.compute_fraction > T::zero() && share.bandwidth_fraction > T::zero()) {
            return Err(Error::ZeroShare(ud.id));
        }
        let r = spectral_efficiency(ud, uav_pos, ch, uav.height);
        let link = share.bandwidth_fraction * ch.bandwidth * r;
        let g = ud.params.gamma;
        total = total
            + g * (ud.task.data_bits / link + ud.task.cycles() / (share.compute_fraction * uav.f_max))
            + (T::one() - g) * ud.params.tx_power * ud.task.data_bits / link;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Task, UdParams};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ud(id: usize, x: f64, d: f64, eta: f64, gamma: f64) -> UdState<f64> {
        UdState {
            id,
            position: Vec2::new(x, 0.0),
            velocity: Vec2::zero(),
            params: UdParams { gamma, ..UdParams::default() },
            task: Task::new(d, eta, 1.0),
        }
    }

    #[test]
    fn beta_arithmetic() {
        let u = ud(0, 0.0, 1e6, 1000.0, 1.0);
        let w = compute_weights(&u, Vec2::zero(), &ChannelParams::default(), &UavParams::default());
        assert_relative_eq!(w.beta, 0.05f64.sqrt(), max_relative = 1e-14);
        let u0 = ud(0, 0.0, 1e6, 1000.0, 0.0);
        let w0 = compute_weights(&u0, Vec2::zero(), &ChannelParams::default(), &UavParams::default());
        assert_eq!(w0.beta, 0.0);
    }

    #[test]
    fn comm_weight_at_100m() {
        let u = ud(0, 100.0, 5e5, 1000.0, 0.5);
        let ch = ChannelParams::default();
        let w = compute_weights(&u, Vec2::zero(), &ch, &UavParams::default());
        // r from the spectral-efficiency oracle (mpmath): 8.842752089549964 bits/s/Hz
        let expect = ((0.5 * 5e5 + 0.5 * 0.1 * 5e5) / (4e6 * 8.842_752_089_549_964f64)).sqrt();
        assert_relative_eq!(w.comm_weight, expect, max_relative = 1e-12);
    }

    #[test]
    fn singleton_and_symmetric() {
        let ch = ChannelParams::default();
        let uav = UavParams::default();
        let a = ud(3, 10.0, 4e5, 800.0, 0.5);
        let alloc = optimal_allocation(&[&a], Vec2::zero(), &ch, &uav).unwrap();
        assert_eq!(alloc.shares, vec![Share { id: 3, compute_fraction: 1.0, bandwidth_fraction: 1.0 }]);
        let b = ud(5, 10.0, 4e5, 800.0, 0.5);
        let alloc = optimal_allocation(&[&b, &a], Vec2::zero(), &ch, &uav).unwrap();
        assert_eq!(alloc.shares[0].id, 3);
        for s in &alloc.shares {
            assert_relative_eq!(s.compute_fraction, 0.5);
            assert_relative_eq!(s.bandwidth_fraction, 0.5);
        }
    }

    #[test]
    fn empty_rejected() {
        let none: [&UdState<f64>; 0] = [];
        assert_eq!(
            optimal_allocation(&none, Vec2::zero(), &ChannelParams::default(), &UavParams::default()),
            Err(Error::EmptyOffloaders)
        );
        assert_eq!(era_allocation::<f64>(&[]), Err(Error::EmptyOffloaders));
    }

    #[test]
    fn era_cases() {
        let a = era_allocation::<f64>(&[7]).unwrap();
        assert_eq!((a.shares[0].compute_fraction, a.shares[0].bandwidth_fraction), (1.0, 1.0));
        let a = era_allocation::<f64>(&[3, 1, 2, 0]).unwrap();
        assert!(a.shares.iter().all(|s| s.compute_fraction == 0.25 && s.bandwidth_fraction == 0.25));
        assert_eq!(a.shares.iter().map(|s| s.id).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn single_offloader_objective_is_full_resource_cost() {
        let ch = ChannelParams::default();
        let uav = UavParams::default();
        let a = ud(0, 50.0, 6e5, 1200.0, 0.3);
        let alloc = era_allocation(&[0]).unwrap();
        let got = p11_objective(&[&a], &alloc, Vec2::zero(), &ch, &uav).unwrap();
        let rate = crate::model::uplink_rate(1.0, &a, Vec2::zero(), &ch, uav.height);
        let t = crate::model::edge_delay(&a.task, rate, uav.f_max).unwrap();
        let e = crate::model::transmit_energy(&a.task, 0.1, rate);
        assert_relative_eq!(got, 0.3 * t + 0.7 * e, max_relative = 1e-12);
    }

    #[test]
    fn zero_share_rejected() {
        let ch = ChannelParams::default();
        let uav = UavParams::default();
        let a = ud(0, 50.0, 6e5, 1200.0, 0.3);
        let alloc = Allocation { shares: vec![Share { id: 0, compute_fraction: 0.0, bandwidth_fraction: 1.0 }] };
        assert_eq!(p11_objective(&[&a], &alloc, Vec2::zero(), &ch, &uav), Err(Error::ZeroShare(0)));
    }

    proptest! {
        #[test]
        fn halving_doubles_objective(xs in proptest::collection::vec((0.0f64..300.0, 1e5f64..1e6, 500.0f64..1500.0), 1..6)) {
            let uds: Vec<UdState<f64>> = xs.iter().enumerate().map(|(i, &(x, d, e))| ud(i, x, d, e, 0.5)).collect();
            let refs: Vec<&UdState<f64>> = uds.iter().collect();
            let (ch, uav) = (ChannelParams::default(), UavParams::default());
            let alloc = optimal_allocation(&refs, Vec2::zero(), &ch, &uav).unwrap();
            let half = Allocation { shares: alloc.shares.iter().map(|s| Share {
                compute_fraction: s.compute_fraction * 0.5, bandwidth_fraction: s.bandwidth_fraction * 0.5, ..*s
            }).collect() };
            let full = p11_objective(&refs, &alloc, Vec2::zero(), &ch, &uav).unwrap();
            let halved = p11_objective(&refs, &half, Vec2::zero(), &ch, &uav).unwrap();
            prop_assert!((halved - 2.0 * full).abs() <= 1e-12 * full);
            prop_assert!((alloc.compute_sum() - 1.0).abs() < 1e-12);
            prop_assert!((alloc.bandwidth_sum() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn shares_scale_free(ws in proptest::collection::vec((1e-3f64..10.0, 1e-3f64..10.0), 1..8), k in 1e-3f64..1e3) {
            let ids: Vec<usize> = (0..ws.len()).collect();
            let base: Vec<Weights<f64>> = ws.iter().map(|&(b, p)| Weights { beta: b, comm_weight: p }).collect();
            let scaled: Vec<Weights<f64>> = base.iter().map(|w| Weights { beta: w.beta * k, comm_weight: w.comm_weight }).collect();
            let a = proportional_shares(&ids, &base).unwrap();
            let b = proportional_shares(&ids, &scaled).unwrap();
            for (x, y) in a.shares.iter().zip(&b.shares) {
                prop_assert!((x.compute_fraction - y.compute_fraction).abs() < 1e-12);
            }
        }
    }
}
