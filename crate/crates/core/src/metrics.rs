//! Feature-BP association metrics: Pearson correlation, cross-sample
//! entropy, and quantile-binned mutual information, plus the 222 x 4 sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bp::{BeatBp, BpComponent};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_COUNT};
use crate::scalar::Real;
use crate::signal::zscore;

/// Sample Pearson correlation coefficient.
pub fn pearson<T: Real>(x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "pearson: length mismatch {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData {
            what: "pearson samples".into(),
            needed: 3,
            got: x.len(),
        });
    }
    let n = T::from_count(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if !(sxx > T::zero()) || !(syy > T::zero()) {
        return Err(Error::DegenerateSeries("pearson: constant series".into()));
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Ok(r.max(-T::one()).min(T::one()))
}

/// Cross-sample entropy with its match counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossSampleEntropy<T> {
    /// `-ln(A/B)`, or `ln((N-m)^2)` when either count is zero.
    pub raw: T,
    /// `raw / ln((N-m)^2)`, clamped to `[0, 1]`.
    pub normalized: T,
    /// Template pairs matching at length `m`.
    pub matches_m: u64,
    /// Template pairs matching at length `m + 1`.
    pub matches_m1: u64,
}

/// Cross-sample entropy of two equal-length series.
///
/// Both series are standardized first. Templates start at every index
/// `0..N-m` for both lengths, every (x, y) start pair is compared, and the
/// distance is Chebyshev.
pub fn cross_sample_entropy<T: Real>(
    x: &[T],
    y: &[T],
    m: usize,
    r_tol: T,
) -> Result<CrossSampleEntropy<T>> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::InvalidInput(format!(
            "cross-sample entropy: length mismatch {n} vs {}",
            y.len()
        )));
    }
    if m == 0 || n < m + 2 {
        return Err(Error::InvalidInput(format!(
            "cross-sample entropy needs m >= 1 and N >= m + 2 (m = {m}, N = {n})"
        )));
    }
    if !(r_tol > T::zero()) {
        return Err(Error::InvalidParameter(
            "cross-sample entropy tolerance must be positive".into(),
        ));
    }
    let zx = zscore(x)?;
    let zy = zscore(y)?;
    let count = n - m;
    let (mut b, mut a) = (0u64, 0u64);
    for i in 0..count {
        for j in 0..count {
            if (0..m).all(|k| (zx[i + k] - zy[j + k]).abs() <= r_tol) {
                b += 1;
                if (zx[i + m] - zy[j + m]).abs() <= r_tol {
                    a += 1;
                }
            }
        }
    }
    let cap = (T::from_count(count) * T::from_count(count)).ln();
    let raw = if a == 0 || b == 0 {
        cap
    } else {
        -(T::lit(a as f64) / T::lit(b as f64)).ln()
    };
    let normalized = (raw / cap).max(T::zero()).min(T::one());
    Ok(CrossSampleEntropy {
        raw,
        normalized,
        matches_m: b,
        matches_m1: a,
    })
}

/// Mutual information with the bin counts actually used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MutualInformation<T> {
    /// Mutual information in nats.
    pub raw: T,
    /// `raw / min(H(x), H(y))`, within `[0, 1]`.
    pub normalized: T,
    pub requested_bins: usize,
    /// Non-empty bins of x after tie merging.
    pub bins_x: usize,
    /// Non-empty bins of y after tie merging.
    pub bins_y: usize,
}

impl<T> MutualInformation<T> {
    /// True when ties collapsed some quantile bins.
    pub fn merged(&self) -> bool {
        self.bins_x < self.requested_bins || self.bins_y < self.requested_bins
    }
}

/// Default bin count: `floor(sqrt(N))`, capped at 16.
pub fn default_bins(n: usize) -> usize {
    ((n as f64).sqrt().floor() as usize).clamp(1, 16)
}

/// Equal-frequency bin labels. Equal values always share a bin, so heavy
/// ties leave some bins empty.
fn quantile_bins<T: Real>(x: &[T], bins: usize) -> Vec<usize> {
    let n = x.len();
    let mut sorted: Vec<T> = x.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let edges: Vec<T> = (1..bins).map(|k| sorted[k * n / bins]).collect();
    x.iter()
        .map(|v| edges.partition_point(|e| *e <= *v))
        .collect()
}

fn entropy<T: Real>(counts: &[usize], n: T) -> T {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = T::from_count(c) / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information between two series under equal-frequency binning.
pub fn mutual_information<T: Real>(x: &[T], y: &[T], bins: usize) -> Result<MutualInformation<T>> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::InvalidInput(format!(
            "mutual information: length mismatch {n} vs {}",
            y.len()
        )));
    }
    if bins < 2 {
        return Err(Error::InvalidParameter(
            "mutual information needs at least 2 bins".into(),
        ));
    }
    if n < 4 * bins {
        return Err(Error::InvalidInput(format!(
            "mutual information with {bins} bins needs N >= {}, got {n}",
            4 * bins
        )));
    }
    let bx = quantile_bins(x, bins);
    let by = quantile_bins(y, bins);
    let mut joint = vec![0usize; bins * bins];
    let mut cx = vec![0usize; bins];
    let mut cy = vec![0usize; bins];
    for (&i, &j) in bx.iter().zip(&by) {
        joint[i * bins + j] += 1;
        cx[i] += 1;
        cy[j] += 1;
    }
    let nt = T::from_count(n);
    let hx = entropy(&cx, nt);
    let hy = entropy(&cy, nt);
    let mut raw = T::zero();
    for i in 0..bins {
        for j in 0..bins {
            let c = joint[i * bins + j];
            if c > 0 {
                let pxy = T::from_count(c) / nt;
                let px = T::from_count(cx[i]) / nt;
                let py = T::from_count(cy[j]) / nt;
                raw += pxy * (pxy / (px * py)).ln();
            }
        }
    }
    let raw = raw.max(T::zero());
    let hmin = hx.min(hy);
    if !(hmin > T::zero()) {
        return Err(Error::DegenerateSeries(
            "mutual information: zero marginal entropy".into(),
        ));
    }
    Ok(MutualInformation {
        raw,
        normalized: (raw / hmin).max(T::zero()).min(T::one()),
        requested_bins: bins,
        bins_x: cx.iter().filter(|&&c| c > 0).count(),
        bins_y: cy.iter().filter(|&&c| c > 0).count(),
    })
}

/// Settings for the association sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssociationParams {
    /// Template length for cross-sample entropy.
    pub cse_m: usize,
    /// Matching tolerance on standardized series.
    pub cse_r: f64,
    /// Fixed bin count; `None` uses [`default_bins`].
    pub mi_bins: Option<usize>,
    /// Minimum paired beats for a populated cell.
    pub min_beats: usize,
}

impl Default for AssociationParams {
    fn default() -> Self {
        Self {
            cse_m: 2,
            cse_r: 0.2,
            mi_bins: None,
            min_beats: 12,
        }
    }
}

impl AssociationParams {
    pub fn validate(&self) -> Result<()> {
        if self.cse_m == 0 {
            return Err(Error::Config("association.cse_m must be >= 1".into()));
        }
        if !(self.cse_r.is_finite() && self.cse_r > 0.0) {
            return Err(Error::Config("association.cse_r must be positive".into()));
        }
        if matches!(self.mi_bins, Some(b) if b < 2) {
            return Err(Error::Config("association.mi_bins must be >= 2".into()));
        }
        if self.min_beats < self.cse_m + 2 || self.min_beats < 4 {
            return Err(Error::Config(
                "association.min_beats must be at least max(4, cse_m + 2)".into(),
            ));
        }
        Ok(())
    }
}

/// Scores for one (feature, component) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociationScores<T> {
    pub cc: T,
    pub cse_raw: T,
    pub cse_norm: T,
    pub mi_raw: T,
    pub mi_norm: T,
    pub n_beats: usize,
}

/// Scores for every (feature, component) pair; unpopulated cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationResult<T> {
    cells: Vec<[Option<AssociationScores<T>>; 4]>,
    pub diagnostics: Vec<String>,
}

impl<T: Real> AssociationResult<T> {
    /// Builds a result from per-feature rows (one-based feature `k` at row `k-1`).
    pub fn from_cells(cells: Vec<[Option<AssociationScores<T>>; 4]>) -> Self {
        Self {
            cells,
            diagnostics: Vec::new(),
        }
    }

    pub fn get(&self, feature: usize, component: BpComponent) -> Option<&AssociationScores<T>> {
        feature
            .checked_sub(1)
            .and_then(|i| self.cells.get(i))
            .and_then(|row| row[component as usize].as_ref())
    }

    pub fn feature_count(&self) -> usize {
        self.cells.len()
    }

    pub fn populated(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.is_some()).count()
    }

    /// Populated cells in (feature, component) order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, BpComponent, &AssociationScores<T>)> {
        self.cells.iter().enumerate().flat_map(|(i, row)| {
            BpComponent::ALL
                .into_iter()
                .filter_map(move |c| row[c as usize].as_ref().map(|s| (i + 1, c, s)))
        })
    }
}

type CellRow<T> = ([Option<AssociationScores<T>>; 4], Vec<String>);

fn score_cell<T: Real>(
    x: &[T],
    y: &[T],
    params: &AssociationParams,
) -> Result<AssociationScores<T>> {
    let n = x.len();
    let cc = pearson(x, y)?;
    let cse = cross_sample_entropy(x, y, params.cse_m, T::lit(params.cse_r))?;
    let bins = params.mi_bins.unwrap_or_else(|| default_bins(n)).max(2);
    let mi = mutual_information(x, y, bins)?;
    Ok(AssociationScores {
        cc,
        cse_raw: cse.raw,
        cse_norm: cse.normalized,
        mi_raw: mi.raw,
        mi_norm: mi.normalized,
        n_beats: n,
    })
}

/// Scores every feature against every BP component.
///
/// Beats with degenerate BP are excluded; missing feature values are
/// dropped pairwise per feature. Cells with fewer than `min_beats` pairs or
/// a degenerate metric stay empty.
pub fn associate_all<T: Real>(
    features: &[FeatureVector<T>],
    bps: &[BeatBp<T>],
    params: &AssociationParams,
) -> Result<AssociationResult<T>> {
    params
        .validate()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    if features.len() != bps.len() {
        return Err(Error::InvalidInput(format!(
            "{} feature vectors but {} BP references",
            features.len(),
            bps.len()
        )));
    }
    let usable: Vec<usize> = (0..bps.len())
        .filter(|&i| !bps[i].is_degenerate())
        .collect();
    let rows: Vec<CellRow<T>> = (1..=FEATURE_COUNT)
        .into_par_iter()
        .map(|f| {
            let pairs: Vec<(T, &BeatBp<T>)> = usable
                .iter()
                .filter_map(|&b| features[b].get(f).map(|v| (v, &bps[b])))
                .collect();
            let mut row = [None; 4];
            let mut notes = Vec::new();
            if pairs.len() < params.min_beats {
                return (row, notes);
            }
            let x: Vec<T> = pairs.iter().map(|p| p.0).collect();
            for c in BpComponent::ALL {
                let y: Vec<T> = pairs.iter().map(|p| p.1.component(c)).collect();
                match score_cell(&x, &y, params) {
                    Ok(s) => row[c as usize] = Some(s),
                    Err(e) => notes.push(format!("feature {f} vs {c}: {e}")),
                }
            }
            (row, notes)
        })
        .collect();
    let mut result = AssociationResult {
        cells: Vec::with_capacity(FEATURE_COUNT),
        diagnostics: Vec::new(),
    };
    for (row, notes) in rows {
        result.cells.push(row);
        result.diagnostics.extend(notes);
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_closed_forms() {
        let x = [1.0f64, 2.0, 3.0, 4.0];
        assert!((pearson(&x, &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12);
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &y).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(
            pearson(&x, &[1.0, 1.0, 1.0, 1.0]),
            Err(Error::DegenerateSeries(_))
        ));
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn cse_boundary() {
        let x = [1.0, 2.0, 3.0];
        assert!(cross_sample_entropy(&x, &x, 2, 0.2).is_err());
        let x = [1.0, 3.0, 2.0, 4.0];
        assert!(cross_sample_entropy(&x, &x, 2, 0.2).is_ok());
    }

    #[test]
    fn cse_zero_match_convention() {
        // Alternating series against a ramp: no length-2 matches within 0.01.
        let x: Vec<f64> = (0..20)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let y: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let r = cross_sample_entropy(&x, &y, 2, 0.01).unwrap();
        assert_eq!(r.matches_m1, 0);
        assert!((r.raw - (18.0f64 * 18.0).ln()).abs() < 1e-12);
        assert_eq!(r.normalized, 1.0);
    }

    #[test]
    fn mi_identical_and_bins() {
        let x: Vec<f64> = (0..1024).map(|i| ((i * 37) % 1024) as f64).collect();
        let r = mutual_information(&x, &x, 16).unwrap();
        assert!((r.normalized - 1.0).abs() < 1e-9);
        assert!((r.raw - 16f64.ln()).abs() < 1e-9);
        assert!(!r.merged());
        assert!(mutual_information(&x[..60], &x[..60], 16).is_err());
        assert_eq!(default_bins(100), 10);
        assert_eq!(default_bins(1000), 16);
    }

    #[test]
    fn mi_reports_tie_merging() {
        let mut x = vec![0.0; 80];
        for (i, v) in x.iter_mut().enumerate().skip(60) {
            *v = i as f64;
        }
        let y: Vec<f64> = (0..80).map(|i| i as f64).collect();
        let r = mutual_information(&x, &y, 8).unwrap();
        assert!(r.merged());
        assert!(r.bins_x < 8);
        assert!(r.normalized <= 1.0);
    }
}
