//! Gauss-Markov device mobility with specular reflection at the area boundary.

use crate::error::{Error, Result};
use crate::geom::{Area, Vec2};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityParams<T> {
    /// Memory level in [0, 1]; 1 keeps the velocity forever.
    pub alpha: T,
    /// Asymptotic mean velocity.
    pub mean_velocity: Vec2<T>,
    /// Asymptotic per-axis standard deviation of velocity.
    pub sigma: T,
    pub area: Area<T>,
}

impl<T: Scalar> MobilityParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= T::zero() && self.alpha <= T::one()) {
            return Err(Error::invalid("mobility.alpha", "must lie in [0, 1]"));
        }
        if !(self.sigma >= T::zero()) {
            return Err(Error::invalid("mobility.sigma", "must be non-negative"));
        }
        if !(self.area.width > T::zero() && self.area.height > T::zero()) {
            return Err(Error::invalid("area", "width and height must be positive"));
        }
        Ok(())
    }
}

/// One Gauss-Markov velocity update. `noise` must already be scaled to N(0, sigma^2).
pub fn step_velocity<T: Scalar>(v: Vec2<T>, p: &MobilityParams<T>, noise: Vec2<T>) -> Vec2<T> {
    let a = p.alpha;
    let innovation = (T::one() - a * a).max(T::zero()).sqrt();
    v * a + p.mean_velocity * (T::one() - a) + noise * innovation
}

/// Advance a position by one slot, reflecting off the walls.
///
/// Returns the new position and the velocity with every reflected component negated.
pub fn step_position<T: Scalar>(
    pos: Vec2<T>,
    v: Vec2<T>,
    tau: T,
    area: &Area<T>,
) -> (Vec2<T>, Vec2<T>) {
    let (x, vx) = reflect_axis(pos.x + v.x * tau, v.x, area.width);
    let (y, vy) = reflect_axis(pos.y + v.y * tau, v.y, area.height);
    (Vec2::new(x, y), Vec2::new(vx, vy))
}

fn reflect_axis<T: Scalar>(mut c: T, mut v: T, len: T) -> (T, T) {
    // a single slot can cross the area more than once at extreme speeds
    for _ in 0..64 {
        if c > len {
            c = len + len - c;
            v = -v;
        } else if c < T::zero() {
            c = -c;
            v = -v;
        } else {
            return (c, v);
        }
    }
    (c.max(T::zero()).min(len), v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn params(alpha: f64) -> MobilityParams<f64> {
        MobilityParams {
            alpha,
            mean_velocity: Vec2::new(0.0, 1.0),
            sigma: 0.5,
            area: Area::new(400.0, 400.0),
        }
    }

    #[test]
    fn full_memory_ignores_noise() {
        let v = Vec2::new(1.5, -0.3);
        assert_eq!(step_velocity(v, &params(1.0), Vec2::new(7.0, -9.0)), v);
    }

    #[test]
    fn memoryless_reverts_to_mean() {
        let out = step_velocity(Vec2::new(3.0, 3.0), &params(0.0), Vec2::zero());
        assert_eq!(out, Vec2::new(0.0, 1.0));
    }

    #[test]
    fn mixed_update_arithmetic() {
        let out = step_velocity(Vec2::new(1.0, 0.0), &params(0.6), Vec2::new(0.5, -0.5));
        assert_relative_eq!(out.x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(out.y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn plain_step() {
        let area = Area::new(400.0, 400.0);
        let (p, v) = step_position(Vec2::new(100.0, 100.0), Vec2::new(10.0, -5.0), 1.0, &area);
        assert_eq!(p, Vec2::new(110.0, 95.0));
        assert_eq!(v, Vec2::new(10.0, -5.0));
        let (p, _) = step_position(Vec2::new(12.0, 7.0), Vec2::zero(), 1.0, &area);
        assert_eq!(p, Vec2::new(12.0, 7.0));
    }

    #[test]
    fn reflects_at_wall() {
        let area = Area::new(400.0, 400.0);
        let (p, v) = step_position(Vec2::new(395.0, 200.0), Vec2::new(10.0, 0.0), 1.0, &area);
        assert_eq!(p, Vec2::new(395.0, 200.0));
        assert_eq!(v, Vec2::new(-10.0, 0.0));
        let (p, v) = step_position(Vec2::new(3.0, 1.0), Vec2::new(-5.0, -4.0), 1.0, &area);
        assert_eq!(p, Vec2::new(2.0, 3.0));
        assert_eq!(v, Vec2::new(5.0, 4.0));
    }

    #[test]
    fn constant_velocity_without_noise() {
        let p = params(1.0);
        let mut v = Vec2::new(0.4, 0.2);
        for _ in 0..100 {
            v = step_velocity(v, &p, Vec2::zero());
        }
        assert_eq!(v, Vec2::new(0.4, 0.2));
    }

    #[test]
    fn long_run_mean_velocity() {
        let p = MobilityParams {
            alpha: 0.8,
            mean_velocity: Vec2::new(1.2, -0.7),
            sigma: 0.5,
            area: Area::new(400.0, 400.0),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normal = Normal::new(0.0, p.sigma).unwrap();
        let n = 100_000;
        let mut v = Vec2::zero();
        let mut sum = Vec2::zero();
        for _ in 0..n {
            v = step_velocity(v, &p, Vec2::new(normal.sample(&mut rng), normal.sample(&mut rng)));
            sum = sum + v;
        }
        let mean = sum * (1.0 / n as f64);
        // the stationary process has std sigma; autocorrelation inflates the
        // standard error of the mean by sqrt((1+a)/(1-a)) = 3
        let tol = 3.0 * p.sigma / (n as f64).sqrt() * 3.0;
        assert!((mean.x - 1.2).abs() < tol, "{mean:?}");
        assert!((mean.y + 0.7).abs() < tol, "{mean:?}");
    }

    proptest! {
        #[test]
        fn positions_stay_inside(
            x in 0.0f64..400.0, y in 0.0f64..400.0,
            vx in -2000.0f64..2000.0, vy in -2000.0f64..2000.0,
        ) {
            let area = Area::new(400.0, 400.0);
            let (p, v) = step_position(Vec2::new(x, y), Vec2::new(vx, vy), 1.0, &area);
            prop_assert!(area.contains(p));
            prop_assert_eq!(v.x.abs(), vx.abs());
            prop_assert_eq!(v.y.abs(), vy.abs());
        }
    }
}
