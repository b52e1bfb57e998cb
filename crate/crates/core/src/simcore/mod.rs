//! Deterministic discrete-event core: clock, event queue, seeded substreams,
//! the radio delay model and synthetic vehicle mobility.

mod channel;
mod events;
pub mod mobility;
mod rng;

pub use channel::ChannelModel;
pub use events::{EventId, EventQueue, SimClock, Step};
pub use mobility::{Axis, MobilityConfig, TrafficLight, VehicleSpawner, VehicleTrack};
pub use rng::{derive_seed, RngStreams, SimRng, Stream};
