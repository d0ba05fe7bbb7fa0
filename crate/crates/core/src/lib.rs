//! Euclidean TSP pipeline built around next-node regression.
//!
//! A predictor guesses, for every node, where the next node of a good tour
//! lies. [`decoding`] turns those guesses into an edge-probability matrix and
//! a tour by greedy edge insertion; [`local_search`] polishes it with 2-opt;
//! [`exact`] and [`benchmark`] measure the result against baselines.

pub mod benchmark;
pub mod decoding;
pub mod encoding;
pub mod error;
pub mod exact;
pub mod formats;
pub mod geometry;
pub mod local_search;
pub mod predictor;

pub use error::{Error, Result};
pub use geometry::{distance, tour_length, validate_tour, Point, Tour, TourVerdict, TspInstance};
pub use predictor::{FittedPredictor, PredictionSet, PredictorKind, PredictorSpec};
