//! Simulation core for object-centric manipulation of articulated objects.
//!
//! The crate is organised bottom-up:
//!
//! * [`scene`]: procedural articulated objects, forward kinematics, face normals.
//! * [`render`]: pinhole camera, ray-cast depth / part-ID / position buffers.
//! * [`affordance`]: per-pixel actionability maps and positive/negative pixel sampling.
//! * [`dataset`]: prompt/answer templates, direction codec, JSONL dataset collection.
//! * [`control`]: quasi-static compliance model and the perturb-probe-commit direction search.
//! * [`policy`]: pose-proposal policies and the online outcome-supervised scorer.
//! * [`harness`]: success metrics, evaluation reports and adaptation experiments.

pub mod affordance;
pub mod control;
pub mod dataset;
mod error;
pub mod harness;
pub mod policy;
pub mod render;
pub mod scene;
pub mod seed;

pub use error::{Error, Result};

pub use affordance::{AffordanceMap, PixelSample};
pub use control::{AiaConfig, ContactState, EpisodeTrace, Termination};
pub use dataset::{DirectionCode, ManipPose, PromptRecord, Task};
pub use harness::{EpisodeResult, EvalReport};
pub use policy::{PosePolicy, PoseProposal, TtaScorer};
pub use render::{Camera, CameraView, Intrinsics};
pub use scene::{ArticulatedObject, Category, JointKind, JointSpec, PartGeometry, Triangle};
