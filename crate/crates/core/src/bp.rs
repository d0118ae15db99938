//! Per-beat blood-pressure references from the arterial waveform.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::segmentation::Beat;
use crate::signal::SampledSignal;

/// Blood-pressure component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BpComponent {
    Sbp,
    Dbp,
    Mbp,
    Pp,
}

impl BpComponent {
    pub const ALL: [BpComponent; 4] = [
        BpComponent::Sbp,
        BpComponent::Dbp,
        BpComponent::Mbp,
        BpComponent::Pp,
    ];

    pub fn code(self) -> &'static str {
        match self {
            BpComponent::Sbp => "SBP",
            BpComponent::Dbp => "DBP",
            BpComponent::Mbp => "MBP",
            BpComponent::Pp => "PP",
        }
    }

    /// Parses `SBP`/`DBP`/`MBP`/`PP`, case-insensitively.
    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.code().eq_ignore_ascii_case(s.trim()))
    }
}

impl fmt::Display for BpComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Per-beat pressures in mmHg.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeatBp<T> {
    pub sbp: T,
    pub dbp: T,
    pub mbp: T,
    pub pp: T,
}

impl<T: Real> BeatBp<T> {
    /// Builds a reference with `pp = sbp - dbp`.
    pub fn new(sbp: T, dbp: T, mbp: T) -> Self {
        Self {
            sbp,
            dbp,
            mbp,
            pp: sbp - dbp,
        }
    }

    /// A beat with non-positive pulse pressure carries no usable reference.
    pub fn is_degenerate(&self) -> bool {
        !(self.pp > T::zero())
    }

    pub fn component(&self, c: BpComponent) -> T {
        match c {
            BpComponent::Sbp => self.sbp,
            BpComponent::Dbp => self.dbp,
            BpComponent::Mbp => self.mbp,
            BpComponent::Pp => self.pp,
        }
    }
}

/// Extracts SBP (max), DBP (min), MBP (sample mean), and PP over the beat
/// window `[onset, next_onset)`.
pub fn beat_bp<T: Real>(abp: &SampledSignal<T>, beat: &Beat<T>) -> Result<BeatBp<T>> {
    if beat.onset >= beat.next_onset || beat.next_onset > abp.len() {
        return Err(Error::InvalidInput(format!(
            "beat window {}..{} outside ABP of length {}",
            beat.onset,
            beat.next_onset,
            abp.len()
        )));
    }
    let w = &abp.samples()[beat.onset..beat.next_onset];
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "non-finite ABP sample in beat window".into(),
        ));
    }
    let sbp = w.iter().copied().fold(T::neg_infinity(), T::max);
    let dbp = w.iter().copied().fold(T::infinity(), T::min);
    let mbp = w.iter().copied().sum::<T>() / T::from_count(w.len());
    // Guard the ordering against summation rounding.
    Ok(BeatBp::new(sbp, dbp, mbp.max(dbp).min(sbp)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beat(on: usize, next: usize) -> Beat<f64> {
        Beat {
            r_peak: 0,
            onset: on,
            next_onset: next,
            rri: 1.0,
        }
    }

    #[test]
    fn constant_pressure_is_degenerate() {
        let abp = SampledSignal::new(vec![100.0; 1000], 1000.0, "abp").unwrap();
        let bp = beat_bp(&abp, &beat(0, 1000)).unwrap();
        assert_eq!((bp.sbp, bp.dbp, bp.mbp, bp.pp), (100.0, 100.0, 100.0, 0.0));
        assert!(bp.is_degenerate());
    }

    #[test]
    fn square_wave_duty_cycle() {
        let x: Vec<f64> = (0..1000)
            .map(|i| if i < 400 { 120.0 } else { 80.0 })
            .collect();
        let abp = SampledSignal::new(x, 1000.0, "abp").unwrap();
        let bp = beat_bp(&abp, &beat(0, 1000)).unwrap();
        assert_eq!(bp.sbp, 120.0);
        assert_eq!(bp.dbp, 80.0);
        assert!((bp.mbp - 96.0).abs() < 1e-9);
        assert_eq!(bp.pp, 40.0);
        assert!(!bp.is_degenerate());
    }

    #[test]
    fn out_of_bounds_window() {
        let abp = SampledSignal::new(vec![1.0; 10], 1000.0, "abp").unwrap();
        assert!(beat_bp(&abp, &beat(5, 11)).is_err());
        assert!(beat_bp(&abp, &beat(5, 5)).is_err());
    }

    #[test]
    fn component_parsing() {
        assert_eq!(BpComponent::parse("sbp"), Some(BpComponent::Sbp));
        assert_eq!(BpComponent::parse("PP"), Some(BpComponent::Pp));
        assert_eq!(BpComponent::parse("x"), None);
    }
}
