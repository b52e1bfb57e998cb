//! Outer-loop coordinator and offline training driver.

mod coordinator;

pub use coordinator::{meta_update_equivalence_check, submit_gradient, Coordinator, SharedCoordinator};
