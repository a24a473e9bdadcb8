//! Room-level visitor trajectories from BLE RSSI sighting logs.
//!
//! The crate covers the whole batch pipeline:
//!
//! - [`museum`]: venue topology and the room-pair weight table,
//! - [`ingest`]: sighting/label files and time binning,
//! - [`reconstruct`]: argmax, moving-average and network reconstruction,
//! - [`nn`]: the small fully connected classifier and its training loop,
//! - [`analysis`]: visit statistics, trajectory distances and clustering,
//! - [`sim`]: a seeded visit and RSSI simulator for ground truth,
//! - [`experiment`]: the labelled-bin comparison of the three methods.

pub mod analysis;
pub mod error;
pub mod experiment;
pub mod ingest;
pub mod museum;
pub mod nn;
pub mod reconstruct;
pub mod sim;

pub use error::{Error, Result};
pub use ingest::{GroundTruth, RssiMatrix, Sighting, VisitType};
pub use museum::{MuseumGraph, ReceiverId, RoomId, WeightTable};
pub use nn::{LabeledSet, NnModel, TrainConfig};
pub use reconstruct::{Method, SmoothingWindow, Trajectory};
