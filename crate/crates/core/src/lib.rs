//! Task planning for rearranging heterogeneous objects on a bounded tabletop.
//!
//! Objects are upright extrusions of 2D footprints, moved one at a time by
//! overhand pick-n-place. The crate provides:
//!
//! - [`geometry`]: SE(2) poses, footprints, the two-phase collision checker
//!   and the disc/polygon collision-probability estimate.
//! - [`weighting`]: per-object weights (HeCP for action count, HeTI for
//!   task impedance).
//! - [`instance`]: problem/plan model, plan validation and costs, the RAND
//!   and SQ instance generators, JSON persistence.
//! - [`depgraph`]: weighted dependency graphs, SCCs and exact minimum-weight
//!   feedback vertex sets.
//! - [`trlb`]: lazy-buffer planners (ETBM, ERBM and their unweighted
//!   baselines TBM, RBM).
//! - [`mcts`]: UCT search over arrangements (EMCTS and baseline MCTS).
//! - [`bench`]: benchmark harness and SVG rendering.

pub mod bench;
pub mod depgraph;
mod error;
pub mod geometry;
pub mod instance;
pub mod mcts;
pub mod trlb;
pub mod weighting;

pub use error::{Error, Result};
pub use geometry::{Footprint, Point, Pose, Shape, Workspace};
pub use instance::{
    Action, ActionTag, Arrangement, Instance, Objective, PlanReport, RearrangementPlan,
    Violation, ViolationKind,
};
pub use weighting::{ObjectCharacteristics, WeightVector};
