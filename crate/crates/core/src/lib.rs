//! Collision-based uniformity and closeness testing of discrete distributions.
//!
//! [`dist`] holds distributions, samplers and histograms. [`moments`] has the
//! collision statistics with their exact moments and variance bounds.
//! [`testers`] turns those into YES/NO testers with explicit sample sizes.
//! [`oracle`] checks the closed forms by enumeration and estimates error
//! rates by simulation.

pub mod dist;
pub mod error;
pub mod format;
pub mod moments;
pub mod numeric;
pub mod oracle;
pub mod testers;

pub use dist::{histogram, make_family, sample, AliasTable, Distribution, Family, Histogram, SampleSet};
pub use error::{Error, Result};
pub use moments::{BinomialMoments, CollisionCounts, MomentReport};
pub use oracle::{ErrorRateEstimate, ExactMoments, Scenario, Side};
pub use testers::{Decision, TesterConfig, Verdict};
