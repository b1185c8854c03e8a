//! Text-to-shape retrieval for parametric linking rods.
//!
//! The crate covers the whole pipeline: a feature schema with canonical
//! descriptions ([`taxonomy`]), CSG rod solids and voxelization
//! ([`geometry`]), paired corpus synthesis and codecs ([`dataset`]), the
//! text and voxel encoders ([`encoders`]), bidirectional triplet training
//! ([`training`]), orthogonal-experiment tuning ([`doe`]) and nearest-shape
//! lookup ([`retrieval`]).

pub mod taxonomy;
pub mod geometry;
pub mod dataset;
pub mod encoders;
pub mod training;
pub mod doe;
pub mod retrieval;

pub use dataset::{CorpusConfig, ManifestRow, Sample, Split, Vocabulary};
pub use doe::{DesignFile, DesignMatrix};
pub use encoders::{Checkpoint, ShapeEncoder, TextEncoder};
pub use geometry::{CsgSolid, TriangleMesh, VoxelGrid};
pub use retrieval::{QueryResult, Retriever, ShapeIndex};
pub use taxonomy::{FeatureSchema, LinkingRodSpec, SizeClass};
pub use training::{Example, TrainerConfig};
