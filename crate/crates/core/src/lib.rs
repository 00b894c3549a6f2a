//! Numerical building blocks for a glued quasiregular construction: slope
//! schedules, exponential partial sums, gluing maps, Beltrami coefficients,
//! oscillation operators and zero statistics.

pub mod beltrami;
pub mod error;
pub mod expsum;
pub mod glue;
pub mod numeric;
pub mod oscillation;
pub mod quadrature;
pub mod schedule;
pub mod zeros;

pub use error::{Error, Result};
pub use expsum::{r0, remainder_r, solve_s_m, ExpPartialSum, MapValue, PhiMap};
pub use glue::{GlueConfig, RegionTag, Variant};
pub use schedule::{build_schedule, build_schedule_with, Side, SlopeSchedule};
