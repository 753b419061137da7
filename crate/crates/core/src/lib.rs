//! Core of the IoT behavior-sequence synthesis pipeline.
//!
//! Everything in this crate is pure computation over in-memory data and builds
//! under `no_std` with `alloc`. File formats, the HTTP provider and the CLI live
//! in the `iotgen` companion crate.
//!
//! The pieces, bottom-up:
//!
//! * [`model`]: behaviors, sequences, datasets, the device dictionary that
//!   validates them, and the id/text codecs.
//! * [`ingest`]: seeded synthetic datasets with planted pattern structure,
//!   plus prompt token budgeting.
//! * [`autoencoder`]: a GRU seq2seq autoencoder trained by SGD whose held-out
//!   reconstruction loss is the importance signal.
//! * [`sppc`]: importance scoring (exact leave-one-out, K-fold, and the
//!   edit-distance similarity baseline) and top-k compression.
//! * [`generation`]: prompt assembly, the provider abstraction with retries,
//!   response parsing, validation and the repair loop.
//! * [`eval`]: full vs. similarity vs. SPPC training comparison.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod autoencoder;
pub mod eval;
pub mod ingest;
pub mod generation;
pub mod model;
pub mod runner;
pub mod seed;
pub mod sppc;

pub use model::{
    Behavior, BehaviorDataset, BehaviorSequence, DeviceDictionary, Timestamp, Vocabulary, Weekday,
};
pub use runner::{JobRunner, Sequential};
