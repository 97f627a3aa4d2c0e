pub mod exact;
pub mod stats;
pub mod traces;
