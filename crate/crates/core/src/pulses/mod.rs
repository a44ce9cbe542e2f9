//! Pulse schedules: resonant synthesis, catalytic protocols and
//! lab-frame simulation.

pub mod catalysis;
pub mod model;
mod optimize;
pub mod refine;
pub mod schedule;
pub mod simulate;
pub mod synth;

pub use catalysis::{plan_catalysis, CatalysisPlan, CatalyticSchedule};
pub use refine::{refine, Refinement, REFINE_BUDGET};
pub use schedule::{PulseSchedule, Segment, SegmentKind, Tone};
pub use simulate::{simulate, SimOptions, SimulationResult, Trajectory};
pub use synth::{synthesize_transfer, synthesize_with, SynthOptions, Synthesis};
