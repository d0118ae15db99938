//! Per-beat PPG fiducial points FP1..FP11.
//!
//! | point | landmark |
//! |-------|----------|
//! | FP1 | pulse foot (onset) |
//! | FP2 | sdPPG a wave |
//! | FP3 | dPPG maximum (steepest upstroke) |
//! | FP4 | sdPPG b wave |
//! | FP5 | PPG systolic peak |
//! | FP6 | sdPPG c wave |
//! | FP7 | sdPPG d wave |
//! | FP8 | dPPG minimum after the peak |
//! | FP9 | sdPPG e wave (dicrotic notch) |
//! | FP10 | sdPPG f wave |
//! | FP11 | next pulse foot |

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::segmentation::Beat;
use crate::signal::DerivativeBundle;

/// Fiducial point identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Fiducial {
    Fp1,
    Fp2,
    Fp3,
    Fp4,
    Fp5,
    Fp6,
    Fp7,
    Fp8,
    Fp9,
    Fp10,
    Fp11,
}

impl Fiducial {
    pub const ALL: [Fiducial; 11] = [
        Fiducial::Fp1,
        Fiducial::Fp2,
        Fiducial::Fp3,
        Fiducial::Fp4,
        Fiducial::Fp5,
        Fiducial::Fp6,
        Fiducial::Fp7,
        Fiducial::Fp8,
        Fiducial::Fp9,
        Fiducial::Fp10,
        Fiducial::Fp11,
    ];

    /// One-based point number.
    pub fn number(self) -> usize {
        self as usize + 1
    }

    /// Looks up a point by its one-based number.
    pub fn from_number(n: usize) -> Option<Self> {
        n.checked_sub(1).and_then(|i| Self::ALL.get(i).copied())
    }

    /// Descriptive landmark name.
    pub fn landmark(self) -> &'static str {
        match self {
            Fiducial::Fp1 => "PPG valley",
            Fiducial::Fp2 => "sdPPG a",
            Fiducial::Fp3 => "dPPG peak",
            Fiducial::Fp4 => "sdPPG b",
            Fiducial::Fp5 => "PPG peak",
            Fiducial::Fp6 => "sdPPG c",
            Fiducial::Fp7 => "sdPPG d",
            Fiducial::Fp8 => "dPPG valley",
            Fiducial::Fp9 => "sdPPG e",
            Fiducial::Fp10 => "sdPPG f",
            Fiducial::Fp11 => "next PPG valley",
        }
    }
}

impl fmt::Display for Fiducial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FP{}", self.number())
    }
}

/// Fiducial sample indices for one beat with per-point validity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FiducialSet {
    /// Sample indices; meaningful only where `valid` is set.
    pub points: [usize; 11],
    pub valid: [bool; 11],
}

impl FiducialSet {
    /// Index of point `fp` when valid.
    pub fn get(&self, fp: Fiducial) -> Option<usize> {
        let i = fp as usize;
        self.valid[i].then_some(self.points[i])
    }

    pub fn is_valid(&self, fp: Fiducial) -> bool {
        self.valid[fp as usize]
    }

    /// True when every point was located.
    pub fn all_valid(&self) -> bool {
        self.valid.iter().all(|v| *v)
    }

    /// True when the valid points are strictly increasing in FP order.
    pub fn is_ordered(&self) -> bool {
        let mut last: Option<usize> = None;
        for i in 0..11 {
            if self.valid[i] {
                if let Some(l) = last {
                    if self.points[i] <= l {
                        return false;
                    }
                }
                last = Some(self.points[i]);
            }
        }
        true
    }

    /// Marks `fp` as located at sample `idx`.
    pub fn insert(&mut self, fp: Fiducial, idx: usize) {
        self.set(fp, Some(idx));
    }

    /// Marks `fp` as not located.
    pub fn remove(&mut self, fp: Fiducial) {
        self.set(fp, None);
    }

    fn set(&mut self, fp: Fiducial, idx: Option<usize>) {
        let i = fp as usize;
        match idx {
            Some(v) => {
                self.points[i] = v;
                self.valid[i] = true;
            }
            None => self.valid[i] = false,
        }
    }
}

/// First `x[i-1] < x[i] >= x[i+1]` with `lo < i < hi`.
fn first_local_max<T: Real>(x: &[T], lo: usize, hi: usize, above: Option<T>) -> Option<usize> {
    let hi = hi.min(x.len().saturating_sub(1));
    (lo + 1..hi).find(|&i| x[i] > x[i - 1] && x[i] >= x[i + 1] && above.is_none_or(|a| x[i] > a))
}

/// First `x[i-1] > x[i] <= x[i+1]` with `lo < i < hi`.
fn first_local_min<T: Real>(x: &[T], lo: usize, hi: usize, below: Option<T>) -> Option<usize> {
    let hi = hi.min(x.len().saturating_sub(1));
    (lo + 1..hi).find(|&i| x[i] < x[i - 1] && x[i] <= x[i + 1] && below.is_none_or(|b| x[i] < b))
}

/// Largest value on the open interval `(lo, hi)`; earliest index on ties.
fn argmax_open<T: Real>(x: &[T], lo: usize, hi: usize) -> Option<usize> {
    (lo + 1..hi).reduce(|b, i| if x[i] > x[b] { i } else { b })
}

fn argmin_open<T: Real>(x: &[T], lo: usize, hi: usize) -> Option<usize> {
    (lo + 1..hi).reduce(|b, i| if x[i] < x[b] { i } else { b })
}

/// Locates FP1..FP11 for one beat.
///
/// The search is hierarchical: the systolic peak, steepest upstroke, and
/// post-peak dPPG minimum anchor the windows in which the sdPPG a-f waves
/// are sought. The diastolic group is validated as a chain, so FP8 is
/// reported only when the c and d waves that precede it are found.
pub fn locate_fiducials<T: Real>(
    bundle: &DerivativeBundle<T>,
    beat: &Beat<T>,
) -> Result<FiducialSet> {
    let n = bundle.len();
    if beat.onset >= beat.next_onset || beat.next_onset >= n {
        return Err(Error::InvalidInput(format!(
            "beat span {}..{} outside signal of length {n}",
            beat.onset, beat.next_onset
        )));
    }
    let p = bundle.ppg.samples();
    let d = bundle.dppg.samples();
    let s = bundle.sdppg.samples();
    let (on, next) = (beat.onset, beat.next_onset);

    let mut fs = FiducialSet::default();
    fs.set(Fiducial::Fp1, Some(on));
    fs.set(Fiducial::Fp11, Some(next));

    let fp5 = argmax_open(p, on, next);
    fs.set(Fiducial::Fp5, fp5);
    let Some(fp5) = fp5 else {
        return Ok(fs);
    };

    let fp3 = argmax_open(d, on, fp5);
    fs.set(Fiducial::Fp3, fp3);
    if let Some(fp3) = fp3 {
        fs.set(Fiducial::Fp2, first_local_max(s, on, fp3, Some(T::zero())));
        fs.set(Fiducial::Fp4, first_local_min(s, fp3, fp5, Some(T::zero())));
    }

    let fp8 = argmin_open(d, fp5, next);
    let c = fp8.and_then(|v| first_local_max(s, fp5, v, None));
    let dw = match (c, fp8) {
        (Some(c), Some(v)) => first_local_min(s, c, v, None),
        _ => None,
    };
    let fp8 = dw.and(fp8);
    let e = fp8.and_then(|v| first_local_max(s, v, next, None));
    let f = e.and_then(|e| first_local_min(s, e, next, None));
    fs.set(Fiducial::Fp6, c);
    fs.set(Fiducial::Fp7, dw);
    fs.set(Fiducial::Fp8, fp8);
    fs.set(Fiducial::Fp9, e);
    fs.set(Fiducial::Fp10, f);
    Ok(fs)
}
