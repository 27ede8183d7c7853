//! Virtual energy queues and the per-slot drift-plus-penalty objective.
//!
//! Two queues track how far the UAV's compute and propulsion energy have run
//! ahead of their per-slot budgets:
//!
//! ```text
//! Q(t+1) = max(Q(t) + E(t) - budget, 0)
//! L(Q)   = (Qc^2 + Qp^2) / 2
//! ```
//!
//! Minimising `Qc Ec + Qp Ep + V sum(C_m)` each slot keeps both queues mean-rate
//! stable, which in turn bounds the long-run average energy by the total budget.

use crate::error::{Error, Result};
use crate::model::{propulsion_power, UavParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyQueues<T> {
    pub q_compute: T,
    pub q_propulsion: T,
    pub budget_compute: T,
    pub budget_propulsion: T,
    /// Cost/backlog trade-off weight `V`.
    pub v_param: T,
}

impl<T: Scalar> EnergyQueues<T> {
    /// Empty queues with the given budgets.
    pub fn new(budget_compute: T, budget_propulsion: T, v_param: T) -> Result<Self> {
        let q = Self {
            q_compute: T::zero(),
            q_propulsion: T::zero(),
            budget_compute,
            budget_propulsion,
            v_param,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.budget_compute >= T::zero() && self.budget_propulsion >= T::zero()) {
            return Err(Error::invalid("energy.budget", "budgets must be non-negative"));
        }
        if !(self.v_param > T::zero() && self.v_param.is_finite()) {
            return Err(Error::invalid("lyapunov.v", "must be positive and finite"));
        }
        if !(self.q_compute >= T::zero() && self.q_propulsion >= T::zero()) {
            return Err(Error::invalid("lyapunov.queue", "backlogs must be non-negative"));
        }
        Ok(())
    }

    pub fn total_budget(&self) -> T {
        self.budget_compute + self.budget_propulsion
    }

    /// Same budgets with both backlogs read as zero, for decisions that ignore the energy constraint.
    pub fn zeroed(&self) -> Self {
        Self {
            q_compute: T::zero(),
            q_propulsion: T::zero(),
            ..*self
        }
    }
}

pub fn update_queues<T: Scalar>(q: &EnergyQueues<T>, e_compute: T, e_propulsion: T) -> EnergyQueues<T> {
    EnergyQueues {
        q_compute: (q.q_compute + e_compute - q.budget_compute).max(T::zero()),
        q_propulsion: (q.q_propulsion + e_propulsion - q.budget_propulsion).max(T::zero()),
        ..*q
    }
}

pub fn lyapunov_value<T: Scalar>(q: &EnergyQueues<T>) -> T {
    (q.q_compute * q.q_compute + q.q_propulsion * q.q_propulsion) * T::lit(0.5)
}

/// `Qc Ec + Qp Ep + V C`.
pub fn drift_plus_penalty_objective<T: Scalar>(
    q: &EnergyQueues<T>,
    e_compute: T,
    e_propulsion: T,
    total_ud_cost: T,
) -> T {
    q.q_compute * e_compute + q.q_propulsion * e_propulsion + q.v_param * total_ud_cost
}

/// Largest per-slot propulsion power over speeds in `[0, v_max]`.
///
/// Scans a 1 mm/s grid and then refines the best cell by golden-section search.
pub fn max_propulsion_power<T: Scalar>(p: &UavParams<T>) -> T {
    let vmax = p.v_max.to_f64_lossy();
    let f = |v: f64| propulsion_power(T::lit(v), p).to_f64_lossy();
    let step = 1e-3;
    let n = (vmax / step).ceil() as usize;
    let (mut best_v, mut best) = (0.0, f(0.0));
    for i in 1..=n {
        let v = (i as f64 * step).min(vmax);
        let val = f(v);
        if val > best {
            best = val;
            best_v = v;
        }
    }
    let (mut lo, mut hi) = ((best_v - step).max(0.0), (best_v + step).min(vmax));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if f(a) > f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    T::lit(best.max(f(0.5 * (lo + hi))))
}

/// Constant `W` of the one-slot drift bound, given the worst-case slot energies.
pub fn drift_bound_from_maxima<T: Scalar>(
    budget_compute: T,
    budget_propulsion: T,
    e_max_compute: T,
    e_max_propulsion: T,
) -> T {
    let term = |budget: T, e_max: T| {
        let a = budget * budget;
        let b = (e_max - budget) * (e_max - budget);
        a.max(b) * T::lit(0.5)
    };
    term(budget_compute, e_max_compute) + term(budget_propulsion, e_max_propulsion)
}

/// Right-hand side of the one-slot drift-plus-penalty bound.
pub fn drift_bound_rhs<T: Scalar>(
    w: T,
    q: &EnergyQueues<T>,
    e_compute: T,
    e_propulsion: T,
    total_ud_cost: T,
) -> T {
    w + q.q_compute * (e_compute - q.budget_compute)
        + q.q_propulsion * (e_propulsion - q.budget_propulsion)
        + q.v_param * total_ud_cost
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn queues(qc: f64, qp: f64) -> EnergyQueues<f64> {
        EnergyQueues {
            q_compute: qc,
            q_propulsion: qp,
            budget_compute: 4.0,
            budget_propulsion: 5.0,
            v_param: 1.0,
        }
    }

    #[test]
    fn update_cases() {
        assert_eq!(update_queues(&queues(5.0, 0.0), 3.0, 0.0).q_compute, 4.0);
        assert_eq!(update_queues(&queues(0.0, 0.0), 0.0, 2.0).q_propulsion, 0.0);
        assert_eq!(update_queues(&queues(10.0, 0.0), 10.0, 0.0).q_compute, 16.0);
    }

    #[test]
    fn new_queues_start_empty() {
        let q = EnergyQueues::new(33.0, 187.0, 50.0).unwrap();
        assert_eq!((q.q_compute, q.q_propulsion), (0.0, 0.0));
        assert!(EnergyQueues::new(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn lyapunov_cases() {
        assert_eq!(lyapunov_value(&queues(0.0, 0.0)), 0.0);
        assert_eq!(lyapunov_value(&queues(3.0, 4.0)), 12.5);
        assert_eq!(lyapunov_value(&queues(7.0, 2.0)), lyapunov_value(&queues(2.0, 7.0)));
    }

    #[test]
    fn objective_cases() {
        let mut q = queues(0.0, 0.0);
        q.v_param = 10.0;
        assert_eq!(drift_plus_penalty_objective(&q, 9.0, 9.0, 3.0), 30.0);
        let q = queues(2.0, 1.0);
        assert_eq!(drift_plus_penalty_objective(&q, 5.0, 4.0, 0.0), 14.0);
        let mut q2 = q;
        q2.v_param = 2.0;
        let base = drift_plus_penalty_objective(&q, 5.0, 4.0, 3.0);
        assert_eq!(drift_plus_penalty_objective(&q2, 5.0, 4.0, 3.0) - base, 3.0);
    }

    #[test]
    fn drift_constant_cases() {
        let w = drift_bound_from_maxima(5.0, 7.0, 10.0, 14.0);
        assert_relative_eq!(w, (100.0 + 196.0) / 8.0);
        let w = drift_bound_from_maxima(0.0, 7.0, 10.0, 14.0);
        assert_relative_eq!(w, 0.5 * 100.0 + 0.5 * 49.0);
    }

    #[test]
    fn max_power_at_defaults() {
        let p = UavParams::<f64>::default();
        let m = max_propulsion_power(&p);
        // power is increasing beyond the max-endurance speed, so the max sits at v_max
        assert_relative_eq!(m, propulsion_power(30.0, &p), max_relative = 1e-12);
        assert_relative_eq!(m, 356.298_140_589_626_76, max_relative = 1e-10);
    }

    proptest! {
        #[test]
        fn update_is_monotone(q in 0.0f64..100.0, e1 in 0.0f64..50.0, e2 in 0.0f64..50.0) {
            let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            let base = queues(q, q);
            let a = update_queues(&base, lo, lo);
            let b = update_queues(&base, hi, hi);
            prop_assert!(a.q_compute <= b.q_compute && a.q_propulsion <= b.q_propulsion);
            prop_assert!(a.q_compute >= 0.0 && a.q_propulsion >= 0.0);
        }

        #[test]
        fn one_slot_bound_holds(
            qc in 0.0f64..500.0, qp in 0.0f64..500.0,
            ec in 0.0f64..10.0, ep in 0.0f64..14.0, cost in 0.0f64..50.0,
        ) {
            let q = queues(qc, qp);
            let next = update_queues(&q, ec, ep);
            let w = drift_bound_from_maxima(q.budget_compute, q.budget_propulsion, 10.0, 14.0);
            let lhs = lyapunov_value(&next) - lyapunov_value(&q) + q.v_param * cost;
            let rhs = drift_bound_rhs(w, &q, ec, ep, cost);
            prop_assert!(lhs <= rhs + 1e-9 * (1.0 + rhs.abs()));
        }
    }
}
