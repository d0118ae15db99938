//! Seeded generator of synchronized ECG, PPG, and ABP records with planted
//! ground truth.
//!
//! The PPG of each beat is a sum of Gaussian lobes (systolic, tidal,
//! diastolic) anchored at the pulse foot, on top of a smoothed sawtooth
//! runoff term. The ECG is a P-QRS-T template train. The ABP is rendered
//! per beat so that its minimum and maximum hit the planted DBP and SBP.
//! Feature-BP couplings are planted by adding a scaled, standardized copy
//! of a feature (measured on the noise-free PPG) to the chosen BP component.
//!
//! Generation runs in `f64`; cast the resulting record for other scalars.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bp::BpComponent;
use crate::error::{Error, Result};
use crate::features::{catalog, extract_all};
use crate::fiducials::locate_fiducials;
use crate::record::{Record, Segment};
use crate::segmentation::{detect_pulse_onsets_in, Beat, DetectorConfig};
use crate::signal::{DerivativeBundle, SampledSignal, SmoothingConfig};

/// A Gaussian lobe placed relative to the pulse anchor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lobe {
    pub amplitude: f64,
    /// Centre offset from the anchor, seconds.
    pub center_s: f64,
    /// Standard deviation, seconds.
    pub width_s: f64,
}

impl Lobe {
    pub const fn new(amplitude: f64, center_s: f64, width_s: f64) -> Self {
        Self {
            amplitude,
            center_s,
            width_s,
        }
    }
}

/// PPG pulse shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseModel {
    pub systolic: Lobe,
    /// Late-systolic lobe; without it the sdPPG c and d waves vanish.
    pub tidal: Option<Lobe>,
    /// Diastolic lobe; plants the e and f waves.
    pub diastolic: Option<Lobe>,
    /// Height of the runoff sawtooth that rises in systole and decays
    /// linearly until the next beat.
    pub runoff: f64,
    pub runoff_center_s: f64,
    pub runoff_width_s: f64,
    /// Constant offset of the PPG.
    pub dc_level: f64,
    /// Overall multiplier of the pulsatile part.
    pub scale: f64,
    /// Beat period at which lobe times are taken as given; other periods
    /// scale them by `sqrt(period / reference_period_s)`.
    pub reference_period_s: f64,
}

impl Default for PulseModel {
    fn default() -> Self {
        Self {
            systolic: Lobe::new(1.0, 0.13, 0.045),
            tidal: Some(Lobe::new(0.75, 0.23, 0.045)),
            diastolic: Some(Lobe::new(0.30, 0.43, 0.07)),
            runoff: 0.35,
            runoff_center_s: 0.10,
            runoff_width_s: 0.03,
            dc_level: 10.0,
            scale: 1.0,
            reference_period_s: 0.8,
        }
    }
}

impl PulseModel {
    /// Single systolic lobe with no dicrotic structure.
    pub fn single_lobe() -> Self {
        Self {
            tidal: None,
            diastolic: None,
            ..Self::default()
        }
    }
}

/// Per-beat morphology jitter. Relative entries are fractions of the
/// nominal value; all draws are normal and truncated at two sigma.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MorphologyJitter {
    pub systolic_width: f64,
    pub tidal_amplitude: f64,
    pub tidal_center_s: f64,
    pub tidal_width: f64,
    pub diastolic_amplitude: f64,
    pub diastolic_center_s: f64,
}

impl Default for MorphologyJitter {
    fn default() -> Self {
        Self {
            systolic_width: 0.05,
            tidal_amplitude: 0.05,
            tidal_center_s: 0.005,
            tidal_width: 0.05,
            diastolic_amplitude: 0.08,
            diastolic_center_s: 0.008,
        }
    }
}

impl MorphologyJitter {
    pub fn none() -> Self {
        Self {
            systolic_width: 0.0,
            tidal_amplitude: 0.0,
            tidal_center_s: 0.0,
            tidal_width: 0.0,
            diastolic_amplitude: 0.0,
            diastolic_center_s: 0.0,
        }
    }
}

/// Heart rate over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeartRate {
    /// Rate used when `profile` is empty.
    pub bpm: f64,
    /// `[time_s, bpm]` breakpoints, linearly interpolated and held flat
    /// outside their span.
    pub profile: Vec<[f64; 2]>,
    /// Standard deviation of RR-interval jitter, seconds.
    pub rr_jitter_s: f64,
}

impl Default for HeartRate {
    fn default() -> Self {
        Self {
            bpm: 75.0,
            profile: Vec::new(),
            rr_jitter_s: 0.0,
        }
    }
}

/// Planted pressure levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BpModel {
    pub sbp: f64,
    pub dbp: f64,
    /// Optional `[time_s, mmHg]` SBP breakpoints overriding `sbp`.
    pub sbp_profile: Vec<[f64; 2]>,
    /// Optional `[time_s, mmHg]` DBP breakpoints overriding `dbp`.
    pub dbp_profile: Vec<[f64; 2]>,
    /// Independent per-beat normal jitter, mmHg.
    pub sbp_jitter: f64,
    pub dbp_jitter: f64,
}

impl Default for BpModel {
    fn default() -> Self {
        Self {
            sbp: 120.0,
            dbp: 80.0,
            sbp_profile: Vec::new(),
            dbp_profile: Vec::new(),
            sbp_jitter: 2.0,
            dbp_jitter: 1.5,
        }
    }
}

/// Planted dependence of a BP component on a feature.
///
/// The feature is measured per beat on the noise-free PPG, standardized
/// across beats, and `gain_mmhg * z + N(0, noise_std)` is added to the
/// component. SBP couplings move SBP, DBP couplings move DBP, PP couplings
/// move SBP with DBP held, and MBP couplings shift both SBP and DBP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coupling {
    /// Feature key or one-based index.
    pub feature: String,
    pub component: BpComponent,
    pub gain_mmhg: f64,
    #[serde(default)]
    pub noise_std: f64,
}

/// Labeled record segment with its own coupling strength and BP offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub label: String,
    pub start_s: f64,
    pub end_s: f64,
    /// Multiplier on every coupling gain inside the segment.
    #[serde(default = "one")]
    pub coupling_scale: f64,
    /// Pressure offset reached mid-segment, ramped in and out over the
    /// first and last quarter of the segment.
    #[serde(default)]
    pub bp_offset_mmhg: f64,
}

fn one() -> f64 {
    1.0
}

/// Additive channel noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    /// White-noise SNR per channel in dB; `None` leaves it clean.
    pub ecg_snr_db: Option<f64>,
    pub ppg_snr_db: Option<f64>,
    pub abp_snr_db: Option<f64>,
    /// Amplitude of a slow PPG baseline sinusoid.
    pub baseline_amplitude: f64,
    pub baseline_hz: f64,
}

/// Full generator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub seed: u64,
    pub fs: f64,
    pub duration_s: f64,
    pub heart_rate: HeartRate,
    /// Delay from the R peak to the pulse foot, seconds.
    pub transit_delay_s: f64,
    /// Per-beat normal jitter of the delay, truncated at two sigma.
    pub transit_jitter_s: f64,
    pub pulse: PulseModel,
    pub jitter: MorphologyJitter,
    pub bp: BpModel,
    pub couplings: Vec<Coupling>,
    pub segments: Vec<SegmentSpec>,
    pub noise: NoiseSpec,
    /// Emit the ABP channel.
    pub with_abp: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            fs: 1000.0,
            duration_s: 60.0,
            heart_rate: HeartRate::default(),
            transit_delay_s: 0.25,
            transit_jitter_s: 0.004,
            pulse: PulseModel::default(),
            jitter: MorphologyJitter::default(),
            bp: BpModel::default(),
            couplings: Vec::new(),
            segments: Vec::new(),
            noise: NoiseSpec::default(),
            with_abp: true,
        }
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl SynthConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SynthConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("synth config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fs.is_finite() && self.fs >= 100.0) {
            return Err(bad("fs must be at least 100 Hz"));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(bad("duration_s must be positive"));
        }
        let hr = &self.heart_rate;
        let rates: Vec<f64> = if hr.profile.is_empty() {
            vec![hr.bpm]
        } else {
            hr.profile.iter().map(|p| p[1]).collect()
        };
        if rates.iter().any(|r| !(30.0..=180.0).contains(r)) {
            return Err(bad("heart rate must stay within 30-180 bpm"));
        }
        check_profile(&hr.profile, "heart_rate.profile")?;
        check_profile(&self.bp.sbp_profile, "bp.sbp_profile")?;
        check_profile(&self.bp.dbp_profile, "bp.dbp_profile")?;
        for (name, v) in [
            ("heart_rate.rr_jitter_s", hr.rr_jitter_s),
            ("transit_jitter_s", self.transit_jitter_s),
            ("bp.sbp_jitter", self.bp.sbp_jitter),
            ("bp.dbp_jitter", self.bp.dbp_jitter),
            ("noise.baseline_amplitude", self.noise.baseline_amplitude),
            ("noise.baseline_hz", self.noise.baseline_hz),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(bad(format!("{name} must be finite and non-negative")));
            }
        }
        if !(self.transit_delay_s > 0.05 && self.transit_delay_s < 0.7) {
            return Err(bad("transit_delay_s must lie in (0.05, 0.7)"));
        }
        let p = &self.pulse;
        for (name, l) in [
            ("systolic", Some(p.systolic)),
            ("tidal", p.tidal),
            ("diastolic", p.diastolic),
        ] {
            if let Some(l) = l {
                if !(l.width_s.is_finite() && l.width_s > 0.0) {
                    return Err(bad(format!("pulse.{name}.width_s must be positive")));
                }
                if !(l.amplitude.is_finite() && l.center_s.is_finite()) {
                    return Err(bad(format!("pulse.{name} must be finite")));
                }
            }
        }
        if !(p.systolic.amplitude > 0.0) {
            return Err(bad("pulse.systolic.amplitude must be positive"));
        }
        if !(p.scale.is_finite() && p.scale > 0.0) {
            return Err(bad("pulse.scale must be positive"));
        }
        if !(p.runoff_width_s > 0.0 && p.reference_period_s > 0.0)
            || !(p.runoff.is_finite() && p.dc_level.is_finite())
        {
            return Err(bad("pulse runoff/reference settings out of range"));
        }
        let j = &self.jitter;
        for v in [
            j.systolic_width,
            j.tidal_amplitude,
            j.tidal_center_s,
            j.tidal_width,
            j.diastolic_amplitude,
            j.diastolic_center_s,
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(bad("jitter entries must be finite and non-negative"));
            }
        }
        if j.systolic_width >= 0.5 || j.tidal_width >= 0.5 {
            return Err(bad("relative width jitter must stay below 0.5"));
        }
        for c in &self.couplings {
            if catalog().resolve(&c.feature).is_none() {
                return Err(bad(format!("unknown coupling feature '{}'", c.feature)));
            }
            if !(c.gain_mmhg.is_finite() && c.noise_std.is_finite() && c.noise_std >= 0.0) {
                return Err(bad("coupling gain and noise must be finite"));
            }
        }
        for s in &self.segments {
            if !(s.start_s >= 0.0 && s.end_s > s.start_s && s.end_s <= self.duration_s) {
                return Err(bad(format!("segment '{}' outside the record", s.label)));
            }
            if s.label.is_empty() || s.label.contains([',', ':', '\n']) {
                return Err(bad(format!("segment label '{}' invalid", s.label)));
            }
            if !(s.coupling_scale.is_finite() && s.bp_offset_mmhg.is_finite()) {
                return Err(bad("segment scale and offset must be finite"));
            }
        }
        for snr in [
            self.noise.ecg_snr_db,
            self.noise.ppg_snr_db,
            self.noise.abp_snr_db,
        ]
        .into_iter()
        .flatten()
        {
            if !snr.is_finite() {
                return Err(bad("noise SNR must be finite"));
            }
        }
        Ok(())
    }
}

fn check_profile(p: &[[f64; 2]], name: &str) -> Result<()> {
    if p.iter().any(|v| !(v[0].is_finite() && v[1].is_finite())) {
        return Err(bad(format!("{name} must be finite")));
    }
    if p.windows(2).any(|w| w[1][0] <= w[0][0]) {
        return Err(bad(format!("{name} times must be increasing")));
    }
    Ok(())
}

fn interp(profile: &[[f64; 2]], t: f64, fallback: f64) -> f64 {
    match profile {
        [] => fallback,
        [only] => only[1],
        _ => {
            if t <= profile[0][0] {
                return profile[0][1];
            }
            for w in profile.windows(2) {
                if t <= w[1][0] {
                    let f = (t - w[0][0]) / (w[1][0] - w[0][0]);
                    return w[0][1] + f * (w[1][1] - w[0][1]);
                }
            }
            profile[profile.len() - 1][1]
        }
    }
}

/// Planted values for one generated beat.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrueBeat {
    /// R-peak time, seconds.
    pub r_time: f64,
    /// Tangent-intersection foot of the noise-free pulse, seconds.
    pub foot_time: f64,
    /// Steepest point of the upstroke, seconds.
    pub max_slope_time: f64,
    /// Systolic peak, seconds.
    pub apex_time: f64,
    pub sbp: f64,
    pub dbp: f64,
    /// Mean of the noise-free ABP over the beat window; `None` when the
    /// window leaves the record.
    pub mbp: Option<f64>,
    /// Measured driver value per coupling, in config order.
    pub drivers: Vec<Option<f64>>,
    pub segment: Option<String>,
}

/// Ground truth for a generated record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub fs: f64,
    /// Beats whose R peak lies inside the record, in time order.
    pub beats: Vec<TrueBeat>,
}

/// Generated record together with its truth.
#[derive(Debug, Clone)]
pub struct SynthRecord {
    pub record: Record<f64>,
    pub truth: GroundTruth,
}

/// Per-beat PPG lobes, already scaled and jittered.
#[derive(Debug, Clone)]
struct BeatShape {
    anchor: f64,
    lobes: Vec<Lobe>,
}

/// Analytic PPG pulse train.
struct PulseTrain {
    beats: Vec<BeatShape>,
    /// Anchor times, with one extra anchor closing the last beat.
    anchors: Vec<f64>,
    runoff: f64,
    runoff_center: f64,
    runoff_width: f64,
}

fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

impl PulseTrain {
    fn interval(&self, t: f64) -> isize {
        self.anchors.partition_point(|a| *a <= t) as isize - 1
    }

    fn period(&self, k: isize) -> f64 {
        let n = self.anchors.len() as isize;
        let k = k.clamp(0, n - 2) as usize;
        self.anchors[k + 1] - self.anchors[k]
    }

    /// Beats whose lobes can reach into interval `k`.
    fn neighbours(&self, k: isize) -> std::ops::Range<usize> {
        let lo = (k - 5).max(0) as usize;
        let hi = ((k + 3).max(0) as usize).min(self.beats.len());
        lo..hi
    }

    /// Value and time derivative at `t`.
    fn eval(&self, t: f64) -> (f64, f64) {
        let k = self.interval(t);
        let mut v = 0.0;
        let mut dv = 0.0;
        for j in self.neighbours(k) {
            let b = &self.beats[j];
            for l in &b.lobes {
                let u = (t - b.anchor - l.center_s) / l.width_s;
                let g = l.amplitude * (-0.5 * u * u).exp();
                v += g;
                dv -= g * u / l.width_s;
            }
        }
        let last = self.anchors.len() as isize - 1;
        let (frac, dfrac) = if k < 0 {
            let tp = self.period(0);
            let f = 1.0 + (t - self.anchors[0]) / tp;
            if f > 0.0 {
                (f, 1.0 / tp)
            } else {
                (0.0, 0.0)
            }
        } else if k >= last {
            (1.0, 0.0)
        } else {
            let tp = self.period(k);
            ((t - self.anchors[k as usize]) / tp, 1.0 / tp)
        };
        let mut r = 1.0 - frac;
        let mut dr = -dfrac;
        let lo = (k - 2).max(0) as usize;
        let hi = ((k + 2).max(0) as usize).min(self.anchors.len() - 1);
        for a in &self.anchors[lo..=hi] {
            let u = (t - a - self.runoff_center) / self.runoff_width;
            r += norm_cdf(u) - if t >= *a { 1.0 } else { 0.0 };
            dr += norm_pdf(u) / self.runoff_width;
        }
        (v + self.runoff * r, dv + self.runoff * dr)
    }

    fn value(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    fn slope(&self, t: f64) -> f64 {
        self.eval(t).1
    }
}

/// Times of the steepest upstroke, tangent foot, and apex of the pulse
/// anchored at `anchor`.
fn pulse_landmarks(train: &PulseTrain, anchor: f64, scale: f64) -> (f64, f64, f64) {
    let step = 1e-4;
    let grid = |lo: f64, hi: f64| {
        let n = ((hi - lo) / step).ceil() as usize;
        (0..=n).map(move |i| lo + i as f64 * step)
    };
    let t_ms = grid(anchor - 0.02, anchor + 0.3 * scale)
        .map(|t| (t, train.slope(t)))
        .fold(
            (anchor, f64::NEG_INFINITY),
            |b, c| if c.1 > b.1 { c } else { b },
        )
        .0;
    let y_min = grid(t_ms - 0.3, t_ms)
        .map(|t| train.value(t))
        .fold(f64::INFINITY, f64::min);
    let (y, s) = train.eval(t_ms);
    let foot = t_ms - (y - y_min) / s;
    let apex = grid(t_ms, t_ms + 0.3 * scale)
        .map(|t| (t, train.value(t)))
        .fold(
            (t_ms, f64::NEG_INFINITY),
            |b, c| if c.1 > b.1 { c } else { b },
        )
        .0;
    (t_ms, foot, apex)
}

fn truncated_normal(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= 2.0 {
            return z;
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn jittered_lobes(
    model: &PulseModel,
    j: &MorphologyJitter,
    s: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Lobe> {
    let sys = model.systolic;
    let mut lobes = vec![Lobe::new(
        sys.amplitude,
        sys.center_s * s,
        sys.width_s * s * (1.0 + j.systolic_width * truncated_normal(rng)),
    )];
    if let Some(l) = model.tidal {
        lobes.push(Lobe::new(
            l.amplitude * (1.0 + j.tidal_amplitude * truncated_normal(rng)),
            l.center_s * s + j.tidal_center_s * truncated_normal(rng),
            l.width_s * s * (1.0 + j.tidal_width * truncated_normal(rng)),
        ));
    }
    if let Some(l) = model.diastolic {
        lobes.push(Lobe::new(
            l.amplitude * (1.0 + j.diastolic_amplitude * truncated_normal(rng)),
            l.center_s * s + j.diastolic_center_s * truncated_normal(rng),
            l.width_s * s,
        ));
    }
    lobes
}

/// ECG template lobes: amplitude (mV), offset from R (s), width (s).
const ECG_TEMPLATE: [(f64, f64, f64); 5] = [
    (0.15, -0.16, 0.02),
    (-0.10, -0.025, 0.008),
    (1.0, 0.0, 0.008),
    (-0.20, 0.025, 0.008),
    (0.30, 0.25, 0.04),
];

fn render_ecg(r_times: &[f64], n: usize, fs: f64) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for &r in r_times {
        for &(a, off, w) in &ECG_TEMPLATE {
            let c = r + off;
            let lo = (((c - 8.0 * w) * fs).floor().max(0.0)) as usize;
            let hi = (((c + 8.0 * w) * fs).ceil().max(0.0) as usize).min(n);
            for (i, v) in x.iter_mut().enumerate().take(hi).skip(lo) {
                let u = (i as f64 / fs - c) / w;
                *v += a * (-0.5 * u * u).exp();
            }
        }
    }
    x
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Renders the ABP; beat `k` spans `[starts[k], starts[k+1])` samples.
fn render_abp(starts: &[usize], sbp: &[f64], dbp: &[f64], n: usize, fs: f64) -> Vec<f64> {
    let mut x = vec![dbp[0]; n];
    let flat = (0.03 * fs).round() as usize;
    let peak = (0.12 * fs).round() as usize;
    let blend = ((0.01 * fs).round() as usize).max(1);
    let beats = sbp.len();
    for k in 0..beats {
        let (s0, s1) = (starts[k], starts[k + 1]);
        let pp = sbp[k] - dbp[k];
        let next_dbp = if k + 1 < beats { dbp[k + 1] } else { dbp[k] };
        let floor = (0.3f64).max((next_dbp - dbp[k]) / pp + 0.05).min(0.95);
        let len = s1 - s0;
        for i in 0..len {
            let gi = s0 + i;
            if gi >= n {
                break;
            }
            let shape = if i < flat {
                0.0
            } else if i < peak {
                0.5 * (1.0
                    - (std::f64::consts::PI * (i - flat) as f64 / (peak - flat) as f64).cos())
            } else if i == peak {
                1.0
            } else {
                let u = (i - peak) as f64 / fs / 0.2;
                floor + (1.0 - floor) * (-u * u).exp()
            };
            let mut v = dbp[k] + pp * shape;
            if i + blend >= len && len > blend {
                let w = smoothstep((i + blend - len + 1) as f64 / blend as f64);
                v = (1.0 - w) * v + w * next_dbp;
            }
            x[gi] = v;
        }
    }
    if let Some(&end) = starts.last() {
        let tail = *dbp.last().unwrap_or(&0.0);
        for v in x.iter_mut().skip(end) {
            *v = tail;
        }
    }
    x
}

fn add_noise(x: &mut [f64], snr_db: f64, rng: &mut ChaCha8Rng) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = (var / 10f64.powf(snr_db / 10.0)).sqrt();
    for v in x.iter_mut() {
        *v += sd * normal(rng);
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

/// Generates a record and its planted truth.
pub fn generate_record(cfg: &SynthConfig) -> Result<SynthRecord> {
    cfg.validate()?;
    let fs = cfg.fs;
    let n = (cfg.duration_s * fs).round() as usize;
    let horizon = cfg.duration_s + 3.0;
    let mut rng = stream(cfg.seed, 0);

    // Beat timing.
    let bpm = |t: f64| interp(&cfg.heart_rate.profile, t, cfg.heart_rate.bpm);
    let mut r_times = Vec::new();
    let mut t = 0.5 * 60.0 / bpm(0.0);
    while t < horizon {
        r_times.push(t);
        let rr = 60.0 / bpm(t) + cfg.heart_rate.rr_jitter_s * truncated_normal(&mut rng);
        t += rr.clamp(60.0 / 180.0, 2.0);
    }
    let total = r_times.len();
    let rr_of = |k: usize| {
        if k + 1 < total {
            r_times[k + 1] - r_times[k]
        } else {
            r_times[k] - r_times[k - 1]
        }
    };
    if total < 2 {
        return Err(bad("duration too short for two beats"));
    }

    // Per-beat morphology and anchors.
    let model = &cfg.pulse;
    let mut shapes = Vec::with_capacity(total);
    let mut anchors = Vec::with_capacity(total + 1);
    for (k, &r_time) in r_times.iter().enumerate().take(total) {
        let rr = rr_of(k);
        let s = (rr / model.reference_period_s).sqrt();
        let lobes = jittered_lobes(model, &cfg.jitter, s, &mut rng);
        if lobes.iter().any(|l| !(l.width_s > 0.0)) {
            return Err(bad("infeasible pulse: non-positive lobe width"));
        }
        let delay = cfg.transit_delay_s + cfg.transit_jitter_s * truncated_normal(&mut rng);
        // Foot offset of this pulse shape in a steady train of period rr.
        let probe = PulseTrain {
            beats: (0..4)
                .map(|i| BeatShape {
                    anchor: i as f64 * rr,
                    lobes: lobes.clone(),
                })
                .collect(),
            anchors: (0..5).map(|i| i as f64 * rr).collect(),
            runoff: model.runoff,
            runoff_center: model.runoff_center_s,
            runoff_width: model.runoff_width_s,
        };
        let (_, foot, _) = pulse_landmarks(&probe, 2.0 * rr, s);
        let anchor = r_time + delay - (foot - 2.0 * rr);
        anchors.push(anchor);
        shapes.push(BeatShape {
            anchor,
            lobes: lobes
                .into_iter()
                .map(|l| Lobe::new(l.amplitude * model.scale, l.center_s, l.width_s))
                .collect(),
        });
    }
    anchors.push(anchors[total - 1] + rr_of(total - 1));
    let train = PulseTrain {
        beats: shapes,
        anchors: anchors.clone(),
        runoff: model.runoff * model.scale,
        runoff_center: model.runoff_center_s,
        runoff_width: model.runoff_width_s,
    };

    let landmarks: Vec<(f64, f64, f64)> = (0..total)
        .map(|k| {
            pulse_landmarks(
                &train,
                anchors[k],
                (rr_of(k) / model.reference_period_s).sqrt(),
            )
        })
        .collect();

    let ppg_clean: Vec<f64> = (0..n)
        .map(|i| model.dc_level + train.value(i as f64 / fs))
        .collect();
    let ecg_clean = render_ecg(&r_times, n, fs);

    // Segments.
    let segment_of = |t: f64| cfg.segments.iter().find(|s| t >= s.start_s && t < s.end_s);
    let offset_at = |t: f64| -> f64 {
        segment_of(t).map_or(0.0, |s| {
            let len = s.end_s - s.start_s;
            let q = 0.25 * len;
            let up = smoothstep((t - s.start_s) / q);
            let down = smoothstep((s.end_s - t) / q);
            s.bp_offset_mmhg * up.min(down)
        })
    };

    // Baseline pressures.
    let mut sbp: Vec<f64> = Vec::with_capacity(total);
    let mut dbp: Vec<f64> = Vec::with_capacity(total);
    for &r in &r_times {
        let off = offset_at(r);
        sbp.push(
            interp(&cfg.bp.sbp_profile, r, cfg.bp.sbp) + off + cfg.bp.sbp_jitter * normal(&mut rng),
        );
        dbp.push(
            interp(&cfg.bp.dbp_profile, r, cfg.bp.dbp) + off + cfg.bp.dbp_jitter * normal(&mut rng),
        );
    }

    // Couplings, driven by features of the noise-free PPG.
    let feet_idx: Vec<usize> = landmarks
        .iter()
        .map(|l| (l.1 * fs).round().max(0.0) as usize)
        .collect();
    let mut drivers: Vec<Vec<Option<f64>>> = vec![Vec::new(); total];
    if !cfg.couplings.is_empty() {
        let raw = SampledSignal::new(ppg_clean.clone(), fs, "ppg")?;
        let bundle = DerivativeBundle::compute(&raw, &SmoothingConfig::default())?;
        let det = detect_pulse_onsets_in(&bundle, &DetectorConfig::default())?;
        let snap = |want: usize| -> usize {
            let tol = (0.015 * fs).round() as usize;
            let j = det.indices.partition_point(|&o| o < want);
            [j.checked_sub(1), Some(j)]
                .into_iter()
                .flatten()
                .filter_map(|j| det.indices.get(j).copied())
                .filter(|&o| o.abs_diff(want) <= tol)
                .min_by_key(|&o| o.abs_diff(want))
                .unwrap_or(want)
        };
        let specs: Vec<usize> = cfg
            .couplings
            .iter()
            .map(|c| catalog().resolve(&c.feature).map(|s| s.index).unwrap_or(0))
            .collect();
        for k in 0..total.saturating_sub(1) {
            let onset = snap(feet_idx[k]);
            let next = snap(feet_idx[k + 1]);
            let r_peak = (r_times[k] * fs).round() as usize;
            let vals = if next < n && onset < next && r_peak < onset {
                let beat = Beat {
                    r_peak,
                    onset,
                    next_onset: next,
                    rri: (r_times[k + 1] * fs).round() / fs - (r_times[k] * fs).round() / fs,
                };
                let fv = locate_fiducials(&bundle, &beat).map(|f| extract_all(&bundle, &f, &beat));
                specs
                    .iter()
                    .map(|&i| fv.as_ref().ok().and_then(|v| v.get(i)))
                    .collect()
            } else {
                vec![None; specs.len()]
            };
            drivers[k] = vals;
        }
        drivers[total - 1] = vec![None; specs.len()];
        for (ci, c) in cfg.couplings.iter().enumerate() {
            let vals: Vec<f64> = drivers.iter().filter_map(|d| d[ci]).collect();
            if vals.len() < 2 {
                return Err(bad(format!(
                    "coupling feature '{}' unavailable on generated beats",
                    c.feature
                )));
            }
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                / (vals.len() - 1) as f64)
                .sqrt();
            if !(sd > 0.0) {
                return Err(bad(format!(
                    "coupling feature '{}' does not vary across beats",
                    c.feature
                )));
            }
            let mut crng = stream(cfg.seed, 100 + ci as u64);
            for k in 0..total {
                let z = drivers[k][ci].map_or(0.0, |v| (v - mean) / sd);
                let scale = segment_of(r_times[k]).map_or(1.0, |s| s.coupling_scale);
                let term = scale * c.gain_mmhg * z + c.noise_std * normal(&mut crng);
                match c.component {
                    BpComponent::Sbp | BpComponent::Pp => sbp[k] += term,
                    BpComponent::Dbp => dbp[k] += term,
                    BpComponent::Mbp => {
                        sbp[k] += term;
                        dbp[k] += term;
                    }
                }
            }
        }
    }
    if let Some(k) = (0..total).find(|&k| !(sbp[k] - dbp[k] > 0.0)) {
        return Err(bad(format!(
            "infeasible pressures: pulse pressure {:.2} mmHg at beat {k}",
            sbp[k] - dbp[k]
        )));
    }

    // ABP beats start 25 ms after each foot.
    let abp_starts: Vec<usize> = landmarks
        .iter()
        .map(|l| ((l.1 + 0.025) * fs).round().max(0.0) as usize)
        .chain(std::iter::once(
            ((anchors[total] + 0.025) * fs).round() as usize
        ))
        .collect();
    let abp_clean = render_abp(&abp_starts, &sbp, &dbp, n, fs);

    // Truth.
    let mut beats = Vec::new();
    for k in 0..total {
        if r_times[k] >= cfg.duration_s {
            break;
        }
        let (ms, foot, apex) = landmarks[k];
        let mbp =
            (k + 1 < total && feet_idx[k + 1] <= n && feet_idx[k] < feet_idx[k + 1]).then(|| {
                let w = &abp_clean[feet_idx[k]..feet_idx[k + 1]];
                w.iter().sum::<f64>() / w.len() as f64
            });
        beats.push(TrueBeat {
            r_time: r_times[k],
            foot_time: foot,
            max_slope_time: ms,
            apex_time: apex,
            sbp: sbp[k],
            dbp: dbp[k],
            mbp,
            drivers: drivers[k].clone(),
            segment: segment_of(r_times[k]).map(|s| s.label.clone()),
        });
    }

    // Noise.
    let mut ecg = ecg_clean;
    let mut ppg = ppg_clean;
    let mut abp = abp_clean;
    if let Some(snr) = cfg.noise.ecg_snr_db {
        add_noise(&mut ecg, snr, &mut stream(cfg.seed, 1));
    }
    if let Some(snr) = cfg.noise.ppg_snr_db {
        add_noise(&mut ppg, snr, &mut stream(cfg.seed, 2));
    }
    if let Some(snr) = cfg.noise.abp_snr_db {
        add_noise(&mut abp, snr, &mut stream(cfg.seed, 3));
    }
    if cfg.noise.baseline_amplitude > 0.0 && cfg.noise.baseline_hz > 0.0 {
        let phase = stream(cfg.seed, 4).random::<f64>() * std::f64::consts::TAU;
        for (i, v) in ppg.iter_mut().enumerate() {
            let t = i as f64 / fs;
            *v += cfg.noise.baseline_amplitude
                * (std::f64::consts::TAU * cfg.noise.baseline_hz * t + phase).sin();
        }
    }

    let segments = cfg
        .segments
        .iter()
        .map(|s| Segment {
            label: s.label.clone(),
            start: (s.start_s * fs).round() as usize,
            end: ((s.end_s * fs).round() as usize).min(n),
        })
        .collect();
    let record = Record::new(
        SampledSignal::new(ecg, fs, "ecg")?,
        SampledSignal::new(ppg, fs, "ppg")?,
        if cfg.with_abp {
            Some(SampledSignal::new(abp, fs, "abp")?)
        } else {
            None
        },
        segments,
    )?;
    Ok(SynthRecord {
        record,
        truth: GroundTruth { fs, beats },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interp_holds_ends() {
        let p = [[0.0, 60.0], [10.0, 120.0]];
        assert_eq!(interp(&p, -1.0, 0.0), 60.0);
        assert_eq!(interp(&p, 5.0, 0.0), 90.0);
        assert_eq!(interp(&p, 11.0, 0.0), 120.0);
        assert_eq!(interp(&[], 3.0, 7.0), 7.0);
    }

    #[test]
    fn validation_catches_bad_configs() {
        let mut c = SynthConfig::default();
        c.heart_rate.bpm = 200.0;
        assert!(c.validate().is_err());
        let mut c = SynthConfig::default();
        c.pulse.systolic.width_s = 0.0;
        assert!(c.validate().is_err());
        let mut c = SynthConfig::default();
        c.couplings.push(Coupling {
            feature: "nope".into(),
            component: BpComponent::Sbp,
            gain_mmhg: 1.0,
            noise_std: 0.0,
        });
        assert!(c.validate().is_err());
    }

    #[test]
    fn abp_hits_planted_extrema() {
        let starts = [10, 810, 1610];
        let x = render_abp(&starts, &[130.0, 125.0], &[85.0, 90.0], 2000, 1000.0);
        let w = &x[10..810];
        assert_eq!(w.iter().copied().fold(f64::MIN, f64::max), 130.0);
        assert_eq!(w.iter().copied().fold(f64::MAX, f64::min), 85.0);
        assert!(x[809] >= 90.0 - 1e-9);
    }

    #[test]
    fn same_seed_same_record() {
        let cfg = SynthConfig {
            duration_s: 6.0,
            ..Default::default()
        };
        let a = generate_record(&cfg).unwrap();
        let b = generate_record(&cfg).unwrap();
        assert_eq!(a.record, b.record);
        let c = generate_record(&SynthConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.record, c.record);
    }
}
