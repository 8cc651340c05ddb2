//! Simulation of IEEE 802.11e HCCA uplink polling for VBR video streams.
//!
//! Three polling policies share one event-driven CAP engine: the reference
//! HCCA round robin, an Enhanced EDD variant with TXOP adaptation, and
//! F-Poll, which skips stations whose next frame has not yet arrived.

pub mod engine;
pub mod harness;
pub mod metrics;
pub mod policy;
pub mod qos;
pub mod scenario;
pub mod time;
pub mod trace;

pub use engine::{run, RunOutput, Scenario, SimError, StationSetup};
pub use policy::SchedulerKind;
pub use qos::{PhyProfile, TrafficSpec};
pub use time::Micros;
