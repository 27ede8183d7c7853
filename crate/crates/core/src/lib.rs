//! Online joint task offloading, resource allocation and trajectory control for a
//! single UAV acting as an edge server over mobile ground devices.
//!
//! The math is generic over [`Scalar`] (`f32` or `f64`); the aliases below fix it
//! to `f64`, which is what the simulator and the command-line tools use.

// `!(x > 0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod error;
pub mod game;
pub mod geom;
pub mod lyapunov;
pub mod mobility;
pub mod model;
pub mod scalar;
pub mod sim;
pub mod trajectory;
pub mod verify;

pub use error::{Error, Result};
pub use geom::{Area, Vec2};
pub use scalar::Scalar;

pub type Point = geom::Vec2<f64>;
pub type Channel = model::ChannelParams<f64>;
pub type Uav = model::UavParams<f64>;
pub type Device = model::UdState<f64>;
pub type Queues = lyapunov::EnergyQueues<f64>;
