//! End-to-end pipelines: reconstruction autoencoders, graph classification
//! with edge drop, metrics and the shared training loop.

pub mod classification;
pub mod metrics;
pub mod reconstruction;
pub mod split;
pub mod training;

pub use classification::{labels_of, train_classification, ClassificationModel, ClassificationOutcome};
pub use metrics::{Metrics, TargetKind};
pub use reconstruction::{
    compression_report, train_reconstruction, AssignmentStrategy, CompressionReport, Decode,
    EdgeEncoder, ReconstructionConfig, ReconstructionModel, ReconstructionOutcome,
    ReconstructionSettings,
};
pub use split::{stratified_split, Split};
pub use training::{fit, EpochReport, History, HistoryRow, TrainConfig};
