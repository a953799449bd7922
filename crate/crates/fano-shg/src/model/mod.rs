//! Domain types and the time-domain equations of motion.

mod equations;
mod params;
mod state;

pub use equations::{rhs_lab, rhs_rotating};
pub use params::{Fault, SystemParams, DEFAULT_CHI2};
pub use state::{DynamicState, Frame, Inversions, PURITY_TOL, STATE_DIM};
