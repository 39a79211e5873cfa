//! Online hierarchical topological mapping with appearance-based loop-closure
//! detection, plus the tooling needed to evaluate global descriptors on it.
//!
//! Images are aggregated into locations by global-descriptor distance. Loop
//! closures are searched only inside locations whose descriptor is similar to
//! the query, ranked by a discrete Bayes filter over past images and confirmed
//! by local binary feature matching with geometric verification.

pub mod belief;
pub mod descriptor;
pub mod error;
pub mod features;
pub mod gdsc;
pub mod harness;
pub mod image;
pub mod io;
pub mod map;
pub mod metrics;
pub mod phog;
pub mod synthetic;

pub use descriptor::{DescriptorSet, GlobalDescriptor, Metric};
pub use error::{Error, Result};
pub use features::{FeatureSet, LocalFeature};
