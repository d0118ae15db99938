//! End-to-end analysis of one record: beats, fiducials, features, BP
//! references, association, and ranking, overall and per segment.

use rayon::prelude::*;
use serde::Serialize;

use crate::bp::{beat_bp, BeatBp, BpComponent};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::features::{extract_all, FeatureVector};
use crate::fiducials::{locate_fiducials, FiducialSet};
use crate::metrics::{associate_all, AssociationResult};
use crate::ranking::{rank_features, RankingTable};
use crate::record::{Record, Segment};
use crate::scalar::Real;
use crate::segmentation::{
    detect_pulse_onsets_in, detect_r_peaks, pair_beats, Beat, PairingSummary,
};
use crate::signal::DerivativeBundle;

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "PULSEFEAT_THREADS";

/// Runs `f` on a pool limited by `PULSEFEAT_THREADS` when it is set to a
/// positive integer, otherwise on the global pool.
pub fn with_thread_cap<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
                Error::Config(format!(
                    "{THREADS_ENV} must be a positive integer, got '{v}'"
                ))
            })?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}

/// Everything computed for one beat.
#[derive(Debug, Clone)]
pub struct BeatRecord<T> {
    pub beat: Beat<T>,
    pub fiducials: FiducialSet,
    pub features: FeatureVector<T>,
    /// `None` when the record has no ABP channel.
    pub bp: Option<BeatBp<T>>,
}

impl<T: Real> BeatRecord<T> {
    /// Eligible for association: plausible RR (unless overridden) and a
    /// non-degenerate BP reference.
    fn usable(&self, include_implausible: bool) -> bool {
        (include_implausible || self.beat.is_plausible())
            && self.bp.is_some_and(|b| !b.is_degenerate())
    }
}

/// Association and rankings over one set of beats.
#[derive(Debug, Clone)]
pub struct Analysis<T> {
    pub n_beats: usize,
    pub association: AssociationResult<T>,
    /// One table per component, in SBP, DBP, MBP, PP order.
    pub rankings: Vec<RankingTable<T>>,
}

/// Per-segment outcome.
#[derive(Debug, Clone)]
pub struct SegmentAnalysis<T> {
    pub segment: Segment,
    pub n_beats: usize,
    pub analysis: Option<Analysis<T>>,
    pub notice: Option<String>,
}

/// Counts and notes describing a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PipelineSummary {
    pub r_peaks: usize,
    pub onsets: usize,
    pub beats_paired: usize,
    pub beats_implausible: usize,
    pub beats_bp_degenerate: usize,
    pub beats_used: usize,
    pub pairing: PairingSummary,
    pub diagnostics: Vec<String>,
}

/// Full pipeline output.
#[derive(Debug, Clone)]
pub struct PipelineResult<T> {
    pub fs: f64,
    pub beats: Vec<BeatRecord<T>>,
    pub analysis: Option<Analysis<T>>,
    pub segments: Vec<SegmentAnalysis<T>>,
    pub summary: PipelineSummary,
    pub top_k: usize,
}

impl<T> PipelineResult<T> {
    /// True when association was skipped for lack of usable beats.
    pub fn insufficient_data(&self) -> bool {
        self.analysis.is_none()
            && self
                .summary
                .diagnostics
                .iter()
                .any(|d| d.starts_with("analysis skipped"))
    }
}

/// Detects beats and extracts fiducials, features, and BP references.
pub fn extract_beats<T: Real>(
    record: &Record<T>,
    cfg: &RunConfig,
) -> Result<(Vec<BeatRecord<T>>, PipelineSummary)> {
    cfg.validate()?;
    let bundle = DerivativeBundle::compute(&record.ppg, &cfg.smoothing)?;
    let r = detect_r_peaks(&record.ecg, &cfg.detector)?;
    let o = detect_pulse_onsets_in(&bundle, &cfg.detector)?;
    let (beats, pairing) = pair_beats(&r.indices, &o.indices, record.fs(), &cfg.detector);
    let mut summary = PipelineSummary {
        r_peaks: r.indices.len(),
        onsets: o.indices.len(),
        beats_paired: beats.len(),
        pairing,
        ..Default::default()
    };
    summary.diagnostics.extend(r.diagnostics);
    summary.diagnostics.extend(o.diagnostics);
    let rows: Vec<Result<BeatRecord<T>>> = beats
        .par_iter()
        .map(|b| {
            let fiducials = locate_fiducials(&bundle, b)?;
            let features = extract_all(&bundle, &fiducials, b);
            let bp = record.abp.as_ref().map(|a| beat_bp(a, b)).transpose()?;
            Ok(BeatRecord {
                beat: *b,
                fiducials,
                features,
                bp,
            })
        })
        .collect();
    let rows: Vec<BeatRecord<T>> = rows.into_iter().collect::<Result<_>>()?;
    summary.beats_implausible = rows.iter().filter(|b| !b.beat.is_plausible()).count();
    summary.beats_bp_degenerate = rows
        .iter()
        .filter(|b| b.bp.is_some_and(|p| p.is_degenerate()))
        .count();
    Ok((rows, summary))
}

fn analyze<T: Real>(beats: &[&BeatRecord<T>], cfg: &RunConfig) -> Result<Option<Analysis<T>>> {
    if beats.len() < cfg.association.min_beats {
        return Ok(None);
    }
    let features: Vec<FeatureVector<T>> = beats.iter().map(|b| b.features.clone()).collect();
    let bps: Vec<BeatBp<T>> = beats
        .iter()
        .map(|b| b.bp.expect("usable beats carry BP"))
        .collect();
    let association = associate_all(&features, &bps, &cfg.association)?;
    let rankings = BpComponent::ALL
        .into_iter()
        .map(|c| rank_features(&association, c, &cfg.ranking.weights))
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(Analysis {
        n_beats: beats.len(),
        association,
        rankings,
    }))
}

/// Runs the complete analysis under the `PULSEFEAT_THREADS` cap.
pub fn run_pipeline<T: Real>(record: &Record<T>, cfg: &RunConfig) -> Result<PipelineResult<T>> {
    with_thread_cap(|| run_pipeline_inner(record, cfg))?
}

fn run_pipeline_inner<T: Real>(record: &Record<T>, cfg: &RunConfig) -> Result<PipelineResult<T>> {
    let (beats, mut summary) = extract_beats(record, cfg)?;
    let min = cfg.association.min_beats;
    let usable: Vec<&BeatRecord<T>> = beats
        .iter()
        .filter(|b| b.usable(cfg.include_implausible))
        .collect();
    summary.beats_used = usable.len();

    let mut analysis = None;
    let mut segments = Vec::new();
    if record.abp.is_none() {
        summary
            .diagnostics
            .push("no ABP channel: association and ranking skipped".into());
    } else {
        analysis = analyze(&usable, cfg)?;
        if analysis.is_none() {
            summary.diagnostics.push(format!(
                "analysis skipped: {} usable beats, need at least {min}",
                usable.len()
            ));
        }
        for label in &cfg.segments {
            if !record.segments.iter().any(|s| &s.label == label) {
                return Err(Error::Config(format!(
                    "segment '{label}' not present in record"
                )));
            }
        }
        for seg in &record.segments {
            if !cfg.segments.is_empty() && !cfg.segments.contains(&seg.label) {
                continue;
            }
            let members: Vec<&BeatRecord<T>> = usable
                .iter()
                .copied()
                .filter(|b| seg.contains(b.beat.onset) && b.beat.next_onset <= seg.end)
                .collect();
            let a = analyze(&members, cfg)?;
            let notice = a.is_none().then(|| {
                format!(
                    "segment '{}': {} usable beats, need at least {min}",
                    seg.label,
                    members.len()
                )
            });
            segments.push(SegmentAnalysis {
                segment: seg.clone(),
                n_beats: members.len(),
                analysis: a,
                notice,
            });
        }
    }
    Ok(PipelineResult {
        fs: record.fs().as_f64(),
        beats,
        analysis,
        segments,
        summary,
        top_k: cfg.ranking.top_k,
    })
}
