//! Identification of discrete-time LTI water-quality models from input-output data.
//!
//! The crate bundles three things:
//!
//! * identification methods: the unified subspace family (N4SID, MOESP, CVA),
//!   ERA on Markov parameters, and OKID for estimating those parameters from
//!   arbitrary excitation;
//! * a plug-flow network builder that turns a declarative [`NetworkSpec`] into
//!   an exactly LTI chlorine-transport plant;
//! * an experiment runner used by the `wq-sysid` command-line tool.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`). The `*64`
//! aliases below are what most callers want.
//!
//! ```
//! use wq_sysid::{era_okid, signals, wdn_sim, lti_model};
//!
//! let plant = wdn_sim::build_quality_model::<f64>(&wdn_sim::three_node_preset()).unwrap();
//! let h = lti_model::impulse_response(&plant, 400);
//! let cfg = era_okid::EraConfig::near_square(h.len(), 2, 1, 15).unwrap();
//! let id = era_okid::era(&h, &cfg).unwrap();
//! assert_eq!(id.model.n_x(), 15);
//! let _ = signals::gen_impulse::<f64>(1, 10, 0, 1.0, 300.0).unwrap();
//! ```

pub mod era_okid;
pub mod error;
pub mod experiment;
pub mod lti_model;
pub mod numerics;
pub mod order_select;
pub mod scalar;
pub mod signals;
pub mod subspace_id;
pub mod wdn_sim;

pub use faer;
pub use num_complex::Complex;

pub use era_okid::EraConfig;
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, ExperimentReport, Method};
pub use lti_model::StateSpaceModel;
pub use numerics::TruncatedSvd;
pub use order_select::EnergyProfile;
pub use scalar::Real;
pub use signals::{HankelData, MarkovSequence, SignalKind, SignalSequence};
pub use subspace_id::{Diagnostics, IdentifiedModel, SimVariant};
pub use wdn_sim::NetworkSpec;

pub type StateSpaceModel64 = StateSpaceModel<f64>;
pub type StateSpaceModel32 = StateSpaceModel<f32>;
pub type SignalSequence64 = SignalSequence<f64>;
pub type SignalSequence32 = SignalSequence<f32>;
pub type MarkovSequence64 = MarkovSequence<f64>;
pub type MarkovSequence32 = MarkovSequence<f32>;
pub type HankelData64 = HankelData<f64>;
pub type HankelData32 = HankelData<f32>;
pub type IdentifiedModel64 = IdentifiedModel<f64>;
pub type IdentifiedModel32 = IdentifiedModel<f32>;
pub type TruncatedSvd64 = TruncatedSvd<f64>;
pub type TruncatedSvd32 = TruncatedSvd<f32>;
