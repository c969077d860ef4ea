//! Identification of the ⟨operating system, browser, application⟩ tuple behind
//! encrypted HTTPS sessions.
//!
//! The pipeline runs capture files through [`capture`] and [`packet`] decoding,
//! groups packets into bidirectional [`session`]s, turns each session into
//! statistical, TCP, TLS and burst [`features`], and trains the classifiers in
//! [`learners`]. [`evaluate`] holds the repeated train/test harness and the
//! robustness experiments.

pub mod capture;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod features;
pub mod learners;
pub mod model;
pub mod packet;
pub mod session;
pub mod synth;
pub mod tls;

mod par;

pub use error::{Error, Result};
