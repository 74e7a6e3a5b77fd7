//! Stochastic channel model for diffusive mobile molecular communication.

pub mod channel;
pub mod detect;
pub mod dist;
pub mod psim;
mod error;
mod mc;
pub mod quad;
pub mod specfun;
pub mod stats;

pub use channel::{
    effective_params, stokes_einstein, Channel, CirKernel, EffectiveParams, MobilityScenario,
    SystemConfig, Vec3, BOLTZMANN,
};
pub use error::{Error, Result};
pub use mc::Estimate;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    mod statistics {}
    #[doc = include_str!("../../../book/src/distribution.md")]
    mod distribution {}
    #[doc = include_str!("../../../book/src/detection.md")]
    mod detection {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
