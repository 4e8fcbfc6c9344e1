//! Context-aware active reinforcement learning for scheduling stress
//! self-report prompts from wearable PPG.
//!
//! The pipeline runs from raw PPG bursts ([`dsp`]) through HRV and context
//! features ([`features`]) to stress classifiers ([`models`]). A deep
//! Q-network ([`agent`]) decides when to prompt, behind a common policy
//! interface ([`policies`]). Studies ([`harness`]) run on synthetic cohorts
//! ([`sim`]) and persist through [`storage`].
//!
//! The [`guide`] modules mirror the chapters of the book in `book/`; their
//! examples run as doctests.

pub mod agent;
pub mod dsp;
pub mod error;
pub mod features;
pub mod harness;
pub mod models;
pub mod policies;
pub mod rng;
pub mod sim;
pub mod storage;
pub mod time;

pub use error::{Error, Result};

/// Chapters of the user guide.
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/signal-conditioning.md")]
    pub mod signal_conditioning {}
    #[doc = include_str!("../../../book/src/features.md")]
    pub mod features {}
    #[doc = include_str!("../../../book/src/stress-models.md")]
    pub mod stress_models {}
    #[doc = include_str!("../../../book/src/agent.md")]
    pub mod agent {}
    #[doc = include_str!("../../../book/src/policies.md")]
    pub mod policies {}
    #[doc = include_str!("../../../book/src/simulator.md")]
    pub mod simulator {}
    #[doc = include_str!("../../../book/src/studies.md")]
    pub mod studies {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
