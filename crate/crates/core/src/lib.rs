//! Transient temperature equalization of finite bosonic reservoirs that
//! exchange energy only through a single harmonic oscillator.
//!
//! The oscillator relaxes much faster than the reservoirs heat or cool, so it
//! sits in its stationary state for the instantaneous reservoir
//! temperatures. Each reservoir then obeys `C_j(T_j) dT_j/dt = −J_j`, where
//! the stationary flow `J_j` follows from the Bose occupancies at the
//! oscillator frequency.
//!
//! * [`physics`]: occupancies, transition rates, stationary occupancy and flows
//! * [`reservoir`]: energy, heat capacity and model-validity diagnostics
//! * [`dynamics`]: the temperature equations and their integration
//! * [`events`]: extrema, rank changes and equalization events
//! * [`analysis`]: equilibrium temperature, conductivity, equalization times
//! * [`io`]: scenario files, result tables, presets and parameter sweeps
//!
//! ```
//! use resdyn::{analysis, dynamics, ReservoirSpec, Scenario};
//!
//! let scenario = Scenario::new(
//!     1.0,
//!     vec![
//!         ReservoirSpec::unit(3.0, 1e-4, 0.105),
//!         ReservoirSpec::unit(3.0, 2e-2, 0.085),
//!         ReservoirSpec::unit(3.0, 2e-2, 0.107),
//!     ],
//! )?;
//! let run = dynamics::integrate(&scenario)?;
//! let t_eq = analysis::equilibrium_temperature(&scenario.reservoirs)?;
//! for t in &run.final_point().temps {
//!     assert!((t - t_eq).abs() < 1e-7);
//! }
//! # Ok::<(), resdyn::Error>(())
//! ```

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod events;
pub mod io;
pub mod physics;
pub mod reservoir;
pub mod roots;
pub mod scenario;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
pub use events::{EventKind, EventRecord};
pub use physics::OscillatorSpec;
pub use reservoir::ReservoirSpec;
pub use scenario::Scenario;

// every chapter of the guide runs as a doc-test
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/estimates.md")]
    mod estimates {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/files.md")]
    mod files {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/numerics.md")]
    mod numerics {}
}
