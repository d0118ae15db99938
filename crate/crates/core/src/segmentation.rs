//! R-peak detection on the ECG, pulse-onset detection on the PPG, and
//! pairing of the two into cardiac cycles.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::{derivative, smooth, DerivativeBundle, SampledSignal, SmoothingConfig};

/// One cardiac cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beat<T> {
    /// ECG sample index of the R peak.
    pub r_peak: usize,
    /// PPG sample index of the pulse foot (FP1).
    pub onset: usize,
    /// PPG sample index of the following pulse foot (FP11).
    pub next_onset: usize,
    /// Time to the next R peak, in seconds.
    pub rri: T,
}

/// Plausible RR-interval range in seconds.
pub const RRI_PLAUSIBLE: (f64, f64) = (0.24, 2.0);

impl<T: Real> Beat<T> {
    /// Whether the RR interval falls inside the physiological gate.
    pub fn is_plausible(&self) -> bool {
        self.rri >= T::lit(RRI_PLAUSIBLE.0) && self.rri <= T::lit(RRI_PLAUSIBLE.1)
    }

    /// Shifts all sample indices by `offset`.
    pub fn shifted(&self, offset: usize) -> Self {
        Self {
            r_peak: self.r_peak + offset,
            onset: self.onset + offset,
            next_onset: self.next_onset + offset,
            rri: self.rri,
        }
    }
}

/// Tuning for the beat detectors and pairing rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    /// Minimum spacing between R peaks.
    pub r_refractory_ms: f64,
    /// Minimum spacing between pulse onsets.
    pub onset_refractory_ms: f64,
    /// Accept a candidate when its height exceeds this fraction of the
    /// running median of accepted heights.
    pub threshold_fraction: f64,
    /// Number of accepted heights kept in the running median.
    pub threshold_history: usize,
    /// Energy integration window for the R-peak detector.
    pub integration_ms: f64,
    /// Search half-width around an energy peak when refining to the raw ECG.
    pub r_search_ms: f64,
    /// Look-back window for the pre-upstroke minimum of each pulse.
    pub foot_lookback_ms: f64,
    /// Earliest onset after its R peak.
    pub pair_min_ms: f64,
    /// Latest onset after its R peak.
    pub pair_max_ms: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            r_refractory_ms: 200.0,
            onset_refractory_ms: 300.0,
            threshold_fraction: 0.4,
            threshold_history: 8,
            integration_ms: 150.0,
            r_search_ms: 75.0,
            foot_lookback_ms: 300.0,
            pair_min_ms: 50.0,
            pair_max_ms: 700.0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("r_refractory_ms", self.r_refractory_ms),
            ("onset_refractory_ms", self.onset_refractory_ms),
            ("integration_ms", self.integration_ms),
            ("r_search_ms", self.r_search_ms),
            ("foot_lookback_ms", self.foot_lookback_ms),
            ("pair_max_ms", self.pair_max_ms),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("detector.{name} must be positive")));
            }
        }
        if !(self.threshold_fraction > 0.0 && self.threshold_fraction < 1.0) {
            return Err(Error::Config(
                "detector.threshold_fraction must lie in (0, 1)".into(),
            ));
        }
        if self.threshold_history == 0 {
            return Err(Error::Config(
                "detector.threshold_history must be >= 1".into(),
            ));
        }
        if !(self.pair_min_ms >= 0.0 && self.pair_min_ms < self.pair_max_ms) {
            return Err(Error::Config(
                "detector.pair_min_ms must be >= 0 and below pair_max_ms".into(),
            ));
        }
        Ok(())
    }
}

/// Detected sample indices with human-readable notes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Detections {
    pub indices: Vec<usize>,
    pub diagnostics: Vec<String>,
}

fn ms_to_samples(ms: f64, fs: f64) -> usize {
    (ms * fs / 1000.0).round().max(1.0) as usize
}

fn require_seconds<T: Real>(s: &SampledSignal<T>, secs: f64) -> Result<()> {
    let need = (secs * s.fs().as_f64()).ceil() as usize;
    if s.len() < need {
        return Err(Error::InsufficientData {
            what: format!("{} samples (2 s)", s.label()),
            needed: need,
            got: s.len(),
        });
    }
    Ok(())
}

/// Local maxima `x[i-1] < x[i] >= x[i+1]` whose value exceeds `floor`.
fn local_maxima<T: Real>(x: &[T], floor: T) -> Vec<usize> {
    (1..x.len().saturating_sub(1))
        .filter(|&i| x[i] > x[i - 1] && x[i] >= x[i + 1] && x[i] > floor)
        .collect()
}

/// Keeps the highest candidates such that no two lie within `gap` samples.
fn suppress_non_maxima<T: Real>(x: &[T], mut cands: Vec<usize>, gap: usize) -> Vec<usize> {
    cands.sort_by(|&a, &b| x[b].partial_cmp(&x[a]).unwrap().then(a.cmp(&b)));
    let mut kept = BTreeSet::new();
    for c in cands {
        let lo = c.saturating_sub(gap);
        if kept.range(lo..=c + gap).next().is_none() {
            kept.insert(c);
        }
    }
    kept.into_iter().collect()
}

fn median<T: Real>(v: &VecDeque<T>) -> T {
    let mut s: Vec<T> = v.iter().copied().collect();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) * T::lit(0.5)
    }
}

/// Adaptive amplitude gate over time-ordered candidates.
///
/// The running median is seeded with the 90th percentile of all candidate
/// heights so the gate does not depend on where the record starts.
fn adaptive_gate<T: Real>(x: &[T], cands: &[usize], cfg: &DetectorConfig) -> Vec<usize> {
    if cands.is_empty() {
        return Vec::new();
    }
    let mut heights: Vec<T> = cands.iter().map(|&i| x[i]).collect();
    heights.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let seed = heights[((heights.len() - 1) * 9) / 10];
    let frac = T::lit(cfg.threshold_fraction);
    let mut hist: VecDeque<T> = VecDeque::from(vec![seed]);
    let mut out = Vec::new();
    for &c in cands {
        if x[c] >= frac * median(&hist) {
            out.push(c);
            hist.push_back(x[c]);
            if hist.len() > cfg.threshold_history {
                hist.pop_front();
            }
        }
    }
    out
}

fn scale_of<T: Real>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

fn argmax_in<T: Real>(x: &[T], lo: usize, hi: usize) -> usize {
    let mut best = lo;
    for i in lo + 1..hi {
        if x[i] > x[best] {
            best = i;
        }
    }
    best
}

/// Detects ECG R peaks.
///
/// The ECG is smoothed and differentiated, squared, and integrated over a
/// centred window. Peaks of that energy envelope pass a refractory
/// suppression and an adaptive gate, then each survivor is moved to the
/// largest raw-ECG sample nearby.
pub fn detect_r_peaks<T: Real>(ecg: &SampledSignal<T>, cfg: &DetectorConfig) -> Result<Detections> {
    cfg.validate()?;
    require_seconds(ecg, 2.0)?;
    let fs = ecg.fs().as_f64();
    let x = ecg.samples();
    let n = x.len();

    let slope = derivative(&smooth(ecg, 25.0, 2)?)?;
    let sq: Vec<T> = slope.samples().iter().map(|v| *v * *v).collect();
    let half = ms_to_samples(cfg.integration_ms, fs) / 2;
    let mut prefix = vec![T::zero(); n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + sq[i];
    }
    let energy: Vec<T> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / T::from_count(hi - lo)
        })
        .collect();

    let mut diagnostics = Vec::new();
    let scale = scale_of(x) * ecg.fs();
    let floor = {
        let f = T::epsilon().sqrt() * scale;
        f * f
    };
    let refractory = ms_to_samples(cfg.r_refractory_ms, fs);
    let cands = suppress_non_maxima(&energy, local_maxima(&energy, floor), refractory);
    let gated = adaptive_gate(&energy, &cands, cfg);

    let search = ms_to_samples(cfg.r_search_ms, fs);
    let local = ms_to_samples(25.0, fs);
    let mut refined: Vec<usize> = gated
        .iter()
        .map(|&c| {
            let mut p = argmax_in(x, c.saturating_sub(search), (c + search + 1).min(n));
            loop {
                let q = argmax_in(x, p.saturating_sub(local), (p + local + 1).min(n));
                if q == p || x[q] <= x[p] {
                    break p;
                }
                p = q;
            }
        })
        .collect();
    refined.sort_unstable();
    let mut peaks: Vec<usize> = Vec::with_capacity(refined.len());
    for p in refined {
        match peaks.last_mut() {
            Some(last) if p - *last < refractory => {
                if x[p] > x[*last] {
                    *last = p;
                }
            }
            _ => peaks.push(p),
        }
    }
    if peaks.is_empty() {
        diagnostics.push(format!("no R peaks found in {}", ecg.label()));
    }
    Ok(Detections {
        indices: peaks,
        diagnostics,
    })
}

/// Detects pulse onsets on a raw PPG channel.
pub fn detect_pulse_onsets<T: Real>(
    ppg: &SampledSignal<T>,
    smoothing: &SmoothingConfig,
    cfg: &DetectorConfig,
) -> Result<Detections> {
    require_seconds(ppg, 2.0)?;
    let bundle = DerivativeBundle::compute(ppg, smoothing)?;
    detect_pulse_onsets_in(&bundle, cfg)
}

/// Detects pulse onsets from a precomputed derivative bundle.
///
/// Each accepted upstroke (a gated peak of dPPG) yields one foot, placed
/// where the tangent at the steepest point meets the minimum of the
/// preceding look-back window.
pub fn detect_pulse_onsets_in<T: Real>(
    bundle: &DerivativeBundle<T>,
    cfg: &DetectorConfig,
) -> Result<Detections> {
    cfg.validate()?;
    require_seconds(&bundle.ppg, 2.0)?;
    let fs = bundle.fs().as_f64();
    let p = bundle.ppg.samples();
    let d = bundle.dppg.samples();
    let fs_t = bundle.fs();

    let scale = scale_of(p).max(T::min_positive_value());
    let floor = T::epsilon().sqrt() * scale * fs_t;
    let refractory = ms_to_samples(cfg.onset_refractory_ms, fs);
    let cands = suppress_non_maxima(d, local_maxima(d, floor), refractory);
    let upstrokes = adaptive_gate(d, &cands, cfg);

    let lookback = ms_to_samples(cfg.foot_lookback_ms, fs);
    let mut onsets: Vec<usize> = Vec::with_capacity(upstrokes.len());
    let mut diagnostics = Vec::new();
    for &u in &upstrokes {
        let lo = u.saturating_sub(lookback);
        let ymin = p[lo..=u].iter().fold(T::infinity(), |m, v| m.min(*v));
        let rise = p[u] - ymin;
        if rise <= floor / fs_t {
            continue;
        }
        let offset = (rise / d[u] * fs_t)
            .round()
            .to_usize()
            .unwrap_or(usize::MAX);
        let foot = u.saturating_sub(offset).max(lo);
        match onsets.last() {
            Some(&last) if foot <= last || foot - last < refractory => {
                diagnostics.push(format!("onset near sample {foot} suppressed by refractory"));
            }
            _ => onsets.push(foot),
        }
    }
    if onsets.is_empty() {
        diagnostics.push(format!("no pulse onsets found in {}", bundle.ppg.label()));
    }
    Ok(Detections {
        indices: onsets,
        diagnostics,
    })
}

/// Counts of R peaks that did not yield a beat.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PairingSummary {
    /// No onset inside the pairing window.
    pub no_onset: usize,
    /// Last R peak, or no following onset.
    pub incomplete: usize,
    /// Following onset lies beyond the next R peak's window.
    pub gap: usize,
}

impl PairingSummary {
    pub fn dropped(&self) -> usize {
        self.no_onset + self.incomplete + self.gap
    }
}

/// Pairs each R peak with the first unused onset 50-700 ms after it.
///
/// A beat needs a following R peak and a following onset; the following
/// onset must fall no later than the next R peak's pairing window.
pub fn pair_beats<T: Real>(
    r_peaks: &[usize],
    onsets: &[usize],
    fs: T,
    cfg: &DetectorConfig,
) -> (Vec<Beat<T>>, PairingSummary) {
    let fs64 = fs.as_f64();
    let min_lag = cfg.pair_min_ms * fs64 / 1000.0;
    let max_lag = cfg.pair_max_ms * fs64 / 1000.0;
    let mut beats = Vec::new();
    let mut summary = PairingSummary::default();
    let mut j = 0usize;
    for (i, &r) in r_peaks.iter().enumerate() {
        while j < onsets.len() && (onsets[j] as f64) < r as f64 + min_lag {
            j += 1;
        }
        if j >= onsets.len() || onsets[j] as f64 > r as f64 + max_lag || onsets[j] <= r {
            summary.no_onset += 1;
            continue;
        }
        let onset = onsets[j];
        j += 1;
        let (Some(&next_r), Some(&next_onset)) = (r_peaks.get(i + 1), onsets.get(j)) else {
            summary.incomplete += 1;
            continue;
        };
        if next_onset as f64 > next_r as f64 + max_lag {
            summary.gap += 1;
            continue;
        }
        beats.push(Beat {
            r_peak: r,
            onset,
            next_onset,
            rri: T::from_count(next_r - r) / fs,
        });
    }
    (beats, summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump_train(n: usize, period: usize, first: usize, width_s: f64) -> Vec<f64> {
        let fs = 1000.0;
        let mut x = vec![0.0; n];
        let mut c = first;
        while c < n {
            for (i, v) in x.iter_mut().enumerate() {
                let t = (i as f64 - c as f64) / fs;
                *v += (-0.5 * (t / (width_s / 2.355)).powi(2)).exp();
            }
            c += period;
        }
        x
    }

    #[test]
    fn r_peaks_on_clean_bumps() {
        let x = bump_train(8000, 800, 400, 0.02);
        let s = SampledSignal::new(x, 1000.0, "ecg").unwrap();
        let det = detect_r_peaks(&s, &DetectorConfig::default()).unwrap();
        let want: Vec<usize> = (0..10).map(|k| 400 + 800 * k).collect();
        assert_eq!(det.indices.len(), want.len());
        for (a, b) in det.indices.iter().zip(&want) {
            assert!((*a as i64 - *b as i64).abs() <= 2);
        }
    }

    #[test]
    fn flat_ecg_gives_no_peaks() {
        let s = SampledSignal::new(vec![0.0; 3000], 1000.0, "ecg").unwrap();
        let det = detect_r_peaks(&s, &DetectorConfig::default()).unwrap();
        assert!(det.indices.is_empty());
        assert_eq!(det.diagnostics.len(), 1);
    }

    #[test]
    fn short_records_are_rejected() {
        let s = SampledSignal::new(vec![0.0; 1999], 1000.0, "ecg").unwrap();
        assert!(detect_r_peaks(&s, &DetectorConfig::default()).is_err());
    }

    #[test]
    fn constant_ppg_gives_no_onsets() {
        let s = SampledSignal::new(vec![7.5; 3000], 1000.0, "ppg").unwrap();
        let det = detect_pulse_onsets(&s, &SmoothingConfig::default(), &DetectorConfig::default())
            .unwrap();
        assert!(det.indices.is_empty());
    }

    #[test]
    fn single_pulse_gives_one_onset() {
        let x: Vec<f64> = (0..3000)
            .map(|i| {
                let t = i as f64 / 1000.0;
                (-0.5 * ((t - 1.2) / 0.05).powi(2)).exp()
                    + 0.3 * (-0.5 * ((t - 1.5) / 0.07).powi(2)).exp()
            })
            .collect();
        let s = SampledSignal::new(x, 1000.0, "ppg").unwrap();
        let det = detect_pulse_onsets(&s, &SmoothingConfig::default(), &DetectorConfig::default())
            .unwrap();
        assert_eq!(det.indices.len(), 1);
        // tangent at the steepest point (t = 1.15) reaches zero near 1.10
        assert!((det.indices[0] as i64 - 1100).abs() <= 5);
    }

    #[test]
    fn pairing_hand_example() {
        let cfg = DetectorConfig::default();
        let (beats, summary) = pair_beats(&[1000, 2000], &[1250, 2250, 3250], 1000.0f64, &cfg);
        assert_eq!(
            beats,
            vec![Beat {
                r_peak: 1000,
                onset: 1250,
                next_onset: 2250,
                rri: 1.0
            }]
        );
        assert_eq!(summary.incomplete, 1);
        let (beats, _) = pair_beats(&[1000, 2000], &[900], 1000.0f64, &cfg);
        assert!(beats.is_empty());
    }

    #[test]
    fn plausibility_gate() {
        let mut b = Beat {
            r_peak: 0,
            onset: 10,
            next_onset: 20,
            rri: 0.8f64,
        };
        assert!(b.is_plausible());
        b.rri = 2.5;
        assert!(!b.is_plausible());
        b.rri = 0.2;
        assert!(!b.is_plausible());
    }
}
