//! Player-tracking analytics for court sports.
//!
//! The crate takes raw tag readings (who, when, where) and turns them into
//! smoothed trajectories, synchronized frames, spacing metrics (pairwise
//! distances and convex-hull areas), offense/defense play segmentation,
//! k-means game phases and per-phase MDS layouts, then serializes the results
//! as markdown reports, SVG figures and JSON files.
//!
//! The modules follow the pipeline order:
//!
//! - [`ingest`]: CSV sensor logs, trajectories, stream statistics, resampling
//! - [`kinematics`]: constant-velocity Kalman filter
//! - [`geometry`]: pairwise distances, convex hull, polygon area
//! - [`segmentation`]: offense/defense labels, play intervals, Table-style summaries
//! - [`phases`]: distance features, k-means, BD/TD curve, crosstab
//! - [`embedding`]: average distance matrices and classical MDS
//! - [`events`]: play-by-play parsing, period map, frame/event join
//! - [`exporter`]: report, SVG and JSON writers
//! - [`pipeline`]: end-to-end commands used by the CLI and Python bindings

pub mod config;
pub mod embedding;
pub mod events;
pub mod exporter;
pub mod geometry;
pub mod ingest;
pub mod kinematics;
pub mod phases;
pub mod pipeline;
pub mod segmentation;
pub mod stats;
pub mod synthetic;

pub use ingest::{CourtSpec, Frame, Point, SensorSample, TagId, Trajectory};
