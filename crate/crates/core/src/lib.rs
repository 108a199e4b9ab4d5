//! Linear voice conversion over frame-level speech features.
//!
//! * [`tensor_io`]: feature matrices, the LVCF file format, SVD/pinv/lstsq.
//! * [`matching`]: cosine nearest-neighbour frame pairing.
//! * [`transforms`]: bias-only, orthogonal and unconstrained maps, the kNN
//!   baseline and weight visualisation.
//! * [`factorization`]: shared low-rank content plus per-speaker maps.
//! * [`synth`]: planted multi-speaker datasets with ground truth.
//! * [`metrics`]: W/CER, EER and a mean-embedding verifier.

pub mod error;
pub mod factorization;
pub mod matching;
pub mod metrics;
pub mod synth;
pub mod tensor_io;
pub mod transforms;

pub use error::{Error, Result};
pub use factorization::{SpeakerFactorization, SweepReport};
pub use matching::MatchedPairs;
pub use metrics::{ErrorRateReport, ScoreSet};
pub use synth::{SynthSpec, SynthTruth, TransformFamily};
pub use tensor_io::{FeatureMatrix, SvdResult};
pub use transforms::{LinearMap, MapKind};
