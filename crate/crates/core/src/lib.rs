//! Simulation lab for first-passage percolation (FPP) and growth processes on
//! supercritical random geometric graphs.
//!
//! The library samples homogeneous Poisson point processes in a finite box,
//! builds the Gilbert disk graph on the sample, runs i.i.d. first-passage
//! percolation and the Richardson growth model on the largest component, and
//! provides the estimators and convergence experiments needed to study the
//! Euclidean-ball shape limit and the high-density / slow-rate branching
//! limit at desk scale.
//!
//! Modules map onto the pipeline:
//!
//! * [`point_process`] — seeded Poisson sampling, rescaling, NDJSON I/O
//! * [`geograph`] — disk graph, components, graph observables
//! * [`fpp`] — passage-time laws, shortest-path times, growth traces
//! * [`shape`] — time-constant profiles, shape error, bond percolation
//! * [`scaling`] — jump kernels, cube statistics, branching limit
//! * [`runner`] — experiment configs, manifests, CSV/NDJSON/SVG output

pub mod cells;
pub mod config;
pub mod error;
pub mod fpp;
pub mod geograph;
pub mod manifest;
pub mod params;
pub mod point_process;
pub mod runner;
pub mod scaling;
pub mod seeds;
pub mod shape;
pub mod stats;
pub mod svg;

pub use error::{Error, Result};
pub use params::{unit_ball_volume, ModelParams};
pub use point_process::{sample_ppp, PointSet, Window};
