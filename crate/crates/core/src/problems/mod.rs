//! Test environments: synthetic objectives with known constants, and the
//! two decision-dependent benchmarks (strategic classification, MNL pricing).

pub mod io;
pub mod pricing;
pub mod strategic;
pub mod test_functions;

pub use pricing::{mnl_choice_probs, pricing_oracle, PricingInstance};
pub use strategic::{strategic_oracle, strategic_response, StrategicInstance, StrategicRecord};
pub use test_functions::{synthetic_instance, SyntheticKind, TestFunction, TestKind};
