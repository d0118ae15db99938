#![allow(dead_code)]

use pulsefeat::segmentation::{detect_pulse_onsets_in, Beat};
use pulsefeat::signal::{DerivativeBundle, SampledSignal};
use pulsefeat::synth::{generate_record, SynthConfig, SynthRecord};
use pulsefeat::{detect_r_peaks, pair_beats, DetectorConfig, SmoothingConfig};

/// Clean synthetic record with default morphology.
pub fn clean_record(seed: u64, duration_s: f64) -> SynthRecord {
    let cfg = SynthConfig {
        seed,
        duration_s,
        ..Default::default()
    };
    generate_record(&cfg).expect("default synth config is valid")
}

/// Bundle and paired beats of a record's PPG.
pub fn bundle_and_beats(sr: &SynthRecord) -> (DerivativeBundle<f64>, Vec<Beat<f64>>) {
    let det = DetectorConfig::default();
    let bundle = DerivativeBundle::compute(&sr.record.ppg, &SmoothingConfig::default()).unwrap();
    let r = detect_r_peaks(&sr.record.ecg, &det).unwrap();
    let o = detect_pulse_onsets_in(&bundle, &det).unwrap();
    let (beats, _) = pair_beats(&r.indices, &o.indices, sr.record.fs(), &det);
    (bundle, beats)
}

/// Sampled signal from a closure over time in seconds.
pub fn sampled(n: usize, fs: f64, f: impl Fn(f64) -> f64) -> SampledSignal<f64> {
    SampledSignal::new((0..n).map(|i| f(i as f64 / fs)).collect(), fs, "ppg").unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-12)
}
