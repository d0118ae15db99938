//! Per-beat morphological features in the fixed 222-index layout.

pub mod catalog;

use crate::fiducials::{Fiducial, FiducialSet};
use crate::scalar::Real;
use crate::segmentation::Beat;
use crate::signal::{level_crossings, DerivativeBundle, Direction, SampledSignal};

pub use catalog::{
    catalog, fiducial_pairs, Dependencies, Family, FeatureCatalog, FeatureSpec, Unit,
    FEATURE_COUNT, PW_LEVEL_FIDUCIALS, PW_PERCENT_LEVELS,
};
use catalog::{PI_DPPG, PI_PPG, PI_SDPPG};

/// Feature values for one beat; `None` marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    values: Vec<Option<T>>,
}

impl<T: Real> FeatureVector<T> {
    /// Wraps exactly [`FEATURE_COUNT`] values.
    pub fn from_values(values: Vec<Option<T>>) -> Option<Self> {
        (values.len() == FEATURE_COUNT).then_some(Self { values })
    }

    /// Value at a one-based index.
    pub fn get(&self, index: usize) -> Option<T> {
        index
            .checked_sub(1)
            .and_then(|i| self.values.get(i).copied().flatten())
    }

    pub fn values(&self) -> &[Option<T>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `true` where the value is missing.
    pub fn missing_mask(&self) -> Vec<bool> {
        self.values.iter().map(Option::is_none).collect()
    }

    pub fn present_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// Values of one family, in index order.
    pub fn family(&self, family: Family) -> &[Option<T>] {
        let r = family.range();
        &self.values[r.start() - 1..*r.end()]
    }
}

fn time_of<T: Real>(idx: usize, fs: T) -> T {
    T::from_count(idx) / fs
}

fn at<T: Real>(x: &[T], fids: &FiducialSet, n: usize) -> Option<T> {
    fids.get(Fiducial::from_number(n)?).map(|i| x[i])
}

fn fp(fids: &FiducialSet, n: usize) -> Option<usize> {
    Fiducial::from_number(n).and_then(|f| fids.get(f))
}

fn ratio<T: Real>(num: Option<T>, den: Option<T>) -> Option<T> {
    match (num, den) {
        (Some(n), Some(d)) if d != T::zero() => Some(n / d),
        _ => None,
    }
}

/// Pulse amplitude `PPG(FP5) - PPG(FP1)` when positive.
fn amplitude<T: Real>(ppg: &[T], fids: &FiducialSet) -> Option<T> {
    let a = at(ppg, fids, 5)? - at(ppg, fids, 1)?;
    (a > T::zero()).then_some(a)
}

/// PTT_i: seconds from the R peak to FP_i, i = 1..10.
pub fn ptt_features<T: Real>(fids: &FiducialSet, beat: &Beat<T>, fs: T) -> [Option<T>; 10] {
    std::array::from_fn(|k| {
        fp(fids, k + 1).map(|i| (T::from_count(i) - T::from_count(beat.r_peak)) / fs)
    })
}

/// RRI followed by the 55 pairwise fiducial time differences.
pub fn td_features<T: Real>(fids: &FiducialSet, beat: &Beat<T>, fs: T) -> [Option<T>; 56] {
    let mut out = [None; 56];
    out[0] = Some(beat.rri);
    for (k, (i, j)) in fiducial_pairs().enumerate() {
        out[k + 1] = match (fp(fids, i), fp(fids, j)) {
            (Some(a), Some(b)) => Some(time_of(b, fs) - time_of(a, fs)),
            _ => None,
        };
    }
    out
}

/// Width of the pulse at `level` around FP5.
fn width_at<T: Real>(
    ppg: &SampledSignal<T>,
    level: T,
    fp1: usize,
    fp5: usize,
    fp11: usize,
) -> Option<T> {
    let x = ppg.samples();
    if !(level < x[fp5]) {
        return None;
    }
    let cs = level_crossings(ppg, level, fp1..fp11 + 1).ok()?;
    let peak = T::from_count(fp5);
    let rise = cs
        .iter()
        .rfind(|c| c.direction == Direction::Rising && c.position <= peak)?;
    let fall = cs
        .iter()
        .find(|c| c.direction == Direction::Falling && c.position >= peak)?;
    Some(fall.time - rise.time)
}

/// Pulse widths at 50/60/70 % of the amplitude and at the levels of
/// FP2, FP3, FP4, FP6, FP7, FP8, FP9.
pub fn pw_features<T: Real>(ppg: &SampledSignal<T>, fids: &FiducialSet) -> [Option<T>; 10] {
    let mut out = [None; 10];
    let x = ppg.samples();
    let (Some(fp1), Some(fp5), Some(fp11), Some(a)) =
        (fp(fids, 1), fp(fids, 5), fp(fids, 11), amplitude(x, fids))
    else {
        return out;
    };
    for (k, pct) in PW_PERCENT_LEVELS.iter().enumerate() {
        let level = x[fp1] + a * T::from_count(*pct as usize) / T::lit(100.0);
        out[k] = width_at(ppg, level, fp1, fp5, fp11);
    }
    for (k, n) in PW_LEVEL_FIDUCIALS.iter().enumerate() {
        out[3 + k] = at(x, fids, *n).and_then(|level| width_at(ppg, level, fp1, fp5, fp11));
    }
    out
}

/// Signed amplitude differences `PPG(FP_j) - PPG(FP_i)` for all 55 pairs.
pub fn am_features<T: Real>(ppg: &SampledSignal<T>, fids: &FiducialSet) -> [Option<T>; 55] {
    let x = ppg.samples();
    let mut out = [None; 55];
    for (k, (i, j)) in fiducial_pairs().enumerate() {
        out[k] = match (at(x, fids, i), at(x, fids, j)) {
            (Some(a), Some(b)) => Some(b - a),
            _ => None,
        };
    }
    out
}

/// PPG at FP1..FP10, dPPG at FP1/FP3/FP8, sdPPG at FP2/FP4/FP7..FP10.
pub fn pi_features<T: Real>(bundle: &DerivativeBundle<T>, fids: &FiducialSet) -> [Option<T>; 19] {
    let mut out = [None; 19];
    let p = bundle.ppg.samples();
    let d = bundle.dppg.samples();
    let s = bundle.sdppg.samples();
    let cells = PI_PPG
        .iter()
        .map(|&n| at(p, fids, n))
        .chain(PI_DPPG.iter().map(|&n| at(d, fids, n)))
        .chain(PI_SDPPG.iter().map(|&n| at(s, fids, n)));
    for (slot, v) in out.iter_mut().zip(cells) {
        *slot = v;
    }
    out
}

/// Cumulative trapezoid of `PPG - PPG(FP1)` from FP1 through FP11, in a.u.*s.
fn cumulative_area<T: Real>(ppg: &SampledSignal<T>, fp1: usize, fp11: usize) -> Vec<T> {
    let x = ppg.samples();
    let base = x[fp1];
    let half_dt = T::lit(0.5) / ppg.fs();
    let mut c = Vec::with_capacity(fp11 - fp1 + 1);
    let mut acc = T::zero();
    c.push(acc);
    for m in fp1..fp11 {
        acc += (x[m] - base + x[m + 1] - base) * half_dt;
        c.push(acc);
    }
    c
}

/// Areas between fiducial pairs, all pairs except (FP1, FP11).
pub fn ar_features<T: Real>(ppg: &SampledSignal<T>, fids: &FiducialSet) -> [Option<T>; 54] {
    let mut out = [None; 54];
    let (Some(fp1), Some(fp11)) = (fp(fids, 1), fp(fids, 11)) else {
        return out;
    };
    let c = cumulative_area(ppg, fp1, fp11);
    let area = |n: usize| {
        fp(fids, n)
            .filter(|&i| i >= fp1 && i <= fp11)
            .map(|i| c[i - fp1])
    };
    for (k, (i, j)) in fiducial_pairs().filter(|&p| p != (1, 11)).enumerate() {
        out[k] = match (area(i), area(j)) {
            (Some(a), Some(b)) => Some(b - a),
            _ => None,
        };
    }
    out
}

/// The 18 ratio indices; see the catalog for names and dependencies.
pub fn ri_features<T: Real>(
    bundle: &DerivativeBundle<T>,
    fids: &FiducialSet,
    beat: &Beat<T>,
) -> [Option<T>; 18] {
    let p = bundle.ppg.samples();
    let d = bundle.dppg.samples();
    let s = bundle.sdppg.samples();
    let fs = bundle.fs();
    let t = |n: usize| fp(fids, n).map(|i| time_of(i, fs));
    let pv = |n: usize| at(p, fids, n);
    let sv = |n: usize| at(s, fids, n);
    let dt = |a: usize, b: usize| Some(t(b)? - t(a)?);
    let a_amp = amplitude(p, fids);
    let rri = Some(beat.rri).filter(|r| *r > T::zero());

    let ddr = (|| {
        let (t1, t5, t9, t11) = (t(1)?, t(5)?, t(9)?, t(11)?);
        let (p1, p11) = (pv(1)?, pv(11)?);
        let base = |tt: T| p1 + (p11 - p1) * (tt - t1) / (t11 - t1);
        ratio(Some(pv(9)? - base(t9)), Some(pv(5)? - base(t5)))
    })();

    let areas = (|| {
        let (fp1, fp9, fp11) = (fp(fids, 1)?, fp(fids, 9)?, fp(fids, 11)?);
        let c = cumulative_area(&bundle.ppg, fp1, fp11);
        let a19 = c[fp9 - fp1];
        Some((c[fp11 - fp1] - a19, a19))
    })();

    let sa = sv(2).filter(|a| *a != T::zero());
    let (sb, sc, sd, se) = (sv(4), sv(6), sv(7), sv(9));
    let over_a = |num: Option<T>| ratio(num, sa);
    let cdb = (|| Some(sc? + sd? - sb?))();

    let dc = (|| {
        let (fp1, fp11) = (fp(fids, 1)?, fp(fids, 11)?);
        let sum: T = p[fp1..fp11].iter().copied().sum();
        Some(sum / T::from_count(fp11 - fp1))
    })();

    let reflection = (|| {
        let (fp9, fp11) = (fp(fids, 9)?, fp(fids, 11)?);
        let peak = p.get(fp9 + 1..fp11)?.iter().copied().reduce(T::max)?;
        ratio(Some(peak - pv(1)?), a_amp)
    })();

    [
        ratio(dt(1, 5), rri),
        ratio(dt(1, 5), dt(1, 11)),
        ratio(dt(1, 9), rri),
        ratio(pv(9).zip(pv(1)).map(|(a, b)| a - b), a_amp),
        ddr,
        ratio(pv(5).zip(pv(6)).map(|(a, b)| a - b), a_amp),
        areas.and_then(|(num, den)| ratio(Some(num), Some(den))),
        fp(fids, 3).and_then(|i| ratio(a_amp, Some(d[i]).filter(|v| *v > T::zero()))),
        over_a(sb),
        over_a(sc),
        over_a(sd),
        over_a(se),
        over_a(cdb),
        over_a(cdb.map(|v| -v)),
        over_a((|| Some(sb? - sc? - sd? - se?))()),
        ratio(pv(5), pv(1)),
        ratio(a_amp.map(|a| a * T::lit(100.0)), dc),
        reflection,
    ]
}

/// Assembles all families into the 222-index layout.
///
/// Any value whose catalog dependencies are not all valid is reported
/// missing.
pub fn extract_all<T: Real>(
    bundle: &DerivativeBundle<T>,
    fids: &FiducialSet,
    beat: &Beat<T>,
) -> FeatureVector<T> {
    let fs = bundle.fs();
    let mut values: Vec<Option<T>> = Vec::with_capacity(FEATURE_COUNT);
    values.extend(ptt_features(fids, beat, fs));
    values.extend(td_features(fids, beat, fs));
    values.extend(pw_features(&bundle.ppg, fids));
    values.extend(am_features(&bundle.ppg, fids));
    values.extend(pi_features(bundle, fids));
    values.extend(ar_features(&bundle.ppg, fids));
    values.extend(ri_features(bundle, fids, beat));
    debug_assert_eq!(values.len(), FEATURE_COUNT);
    for (v, spec) in values.iter_mut().zip(catalog().iter()) {
        if !spec.dependencies.satisfied_by(fids) {
            *v = None;
        }
    }
    FeatureVector { values }
}
