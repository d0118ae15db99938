//! Per-beat ECG/PPG morphological features and their association with
//! blood pressure.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the type
//! aliases at the crate root fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bp;
pub mod config;
pub mod error;
pub mod features;
pub mod fiducials;
pub mod metrics;
pub mod pipeline;
pub mod ranking;
pub mod record;
pub mod results;
pub mod scalar;
pub mod segmentation;
pub mod signal;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Real;

pub use bp::{beat_bp, BpComponent};
pub use config::RunConfig;
pub use features::{catalog, extract_all, Family, FeatureCatalog, FeatureSpec, FEATURE_COUNT};
pub use fiducials::{locate_fiducials, Fiducial, FiducialSet};
pub use metrics::{
    associate_all, cross_sample_entropy, mutual_information, pearson, AssociationParams,
};
pub use pipeline::{run_pipeline, PipelineResult};
pub use ranking::{rank_features, top_k, RankWeights};
pub use record::{parse_record, Record};
pub use results::emit_results;
pub use segmentation::{detect_pulse_onsets, detect_r_peaks, pair_beats, DetectorConfig};
pub use signal::{derivative, level_crossings, smooth, zscore, SmoothingConfig};

/// Double-precision sampled signal.
pub type Signal = signal::SampledSignal<f64>;
/// Double-precision beat.
pub type Beat = segmentation::Beat<f64>;
/// Double-precision PPG derivative bundle.
pub type DerivativeBundle = signal::DerivativeBundle<f64>;
/// Double-precision feature vector.
pub type FeatureVector = features::FeatureVector<f64>;
/// Double-precision blood-pressure reference.
pub type BeatBp = bp::BeatBp<f64>;
/// Double-precision association table.
pub type AssociationResult = metrics::AssociationResult<f64>;
/// Double-precision association cell.
pub type AssociationScores = metrics::AssociationScores<f64>;
/// Double-precision ranking table.
pub type RankingTable = ranking::RankingTable<f64>;
