//! Spoken-intent classification over phonetic input.
//!
//! An utterance is a phone sequence with an optional frame-level acoustic
//! embedding. One of three front-ends ([`frontend::FrontEndKind`]) turns it
//! into frames, and a dilated 1-D convolutional network ([`net`]) classifies
//! the frames. Forward and backward passes, the optimizer and the gradient
//! checker are all implemented here in `f64`.
//!
//! ```
//! use phonintent::corpus::{generate_synthetic, SyntheticSpec};
//! use phonintent::frontend::FrontEndKind;
//! use phonintent::trainer::{evaluate, train, Setup};
//!
//! let data = generate_synthetic(&SyntheticSpec { per_class: 6, ..Default::default() }, 0)?;
//! let mut setup = Setup::new(FrontEndKind::Panphone, [3, 5, 7, 9], [1, 2, 3, 4]);
//! setup.options.table = Some(phonintent::corpus::FeatureTable::synthetic(
//!     &SyntheticSpec::default().phone_inventory(),
//!     0,
//! ));
//! setup.channels = 8;
//! setup.hyper.epochs = 2;
//! let (model, _) = train(&data, None, &setup, 0)?;
//! assert!(evaluate(&model, &data)? >= 0.0);
//! # Ok::<(), phonintent::Error>(())
//! ```
//!
//! Modules, roughly in pipeline order:
//!
//! - [`corpus`]: manifests, `ALLO` embedding files, feature tables, the
//!   synthetic corpus, vocabularies and fold plans.
//! - [`frontend`]: the phone, panphone and allo encoders.
//! - [`net`]: layers, the model, parameters and checkpoints.
//! - [`optim`]: Adam, the learning-rate schedule and gradient checking.
//! - [`trainer`]: training loops, evaluation and run logs.
//! - [`experiments`]: cross-validation, sweeps, reports and plots.

pub mod corpus;
pub mod error;
pub mod experiments;
pub mod frontend;
pub mod net;
pub mod optim;
pub mod seed;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/frontends.md")]
    mod frontends {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/gradcheck.md")]
    mod gradcheck {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}
