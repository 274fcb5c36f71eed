//! Experience-and-emotion navigation maps.
//!
//! An [`emotion::EmotionGrid`] stores one diagonal Gaussian per occupied
//! cell; their weighted sum is a soft cost that the incremental planner in
//! [`planning`] avoids. Events experienced while driving are described and
//! scored by the [`reflection`] pipeline, which widens the Gaussians of the
//! cells involved so the next plan keeps its distance.

pub mod emotion;
pub mod error;
pub mod geometry;
pub mod grounding;
pub mod harness;
pub mod llm;
pub mod planning;
pub mod reflection;
pub mod sim;

pub use error::GeometryError;
pub use geometry::{Cell, GridGeometry, Heading, OccupancyGrid};
