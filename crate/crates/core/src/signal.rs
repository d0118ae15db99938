//! Uniformly sampled channels and the smoothing, differentiation,
//! standardization, and level-crossing primitives built on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A uniformly sampled channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal<T> {
    samples: Vec<T>,
    fs: T,
    label: String,
}

impl<T: Real> SampledSignal<T> {
    /// Builds a validated signal: `fs > 0`, at least two samples, all finite.
    pub fn new(samples: Vec<T>, fs: T, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if !(fs.is_finite() && fs > T::zero()) {
            return Err(Error::InvalidInput(format!(
                "{label}: sampling rate must be positive, got {fs}"
            )));
        }
        if samples.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "{label}: need at least 2 samples, got {}",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "{label}: non-finite sample at index {i}"
            )));
        }
        Ok(Self { samples, fs, label })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn fs(&self) -> T {
        self.fs
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false for a validated signal; provided for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration covered by the samples, `len / fs`, in seconds.
    pub fn duration(&self) -> T {
        T::from_count(self.samples.len()) / self.fs
    }

    /// Time of sample `i` in seconds.
    pub fn time_of(&self, i: usize) -> T {
        T::from_count(i) / self.fs
    }

    /// Returns a copy carrying a different label.
    pub fn relabeled(&self, label: impl Into<String>) -> Self {
        Self {
            samples: self.samples.clone(),
            fs: self.fs,
            label: label.into(),
        }
    }

    /// Consumes the signal and returns its samples.
    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    /// Converts to another scalar type.
    pub fn cast<U: Real>(&self) -> SampledSignal<U> {
        SampledSignal {
            samples: self.samples.iter().map(|x| U::lit(x.as_f64())).collect(),
            fs: U::lit(self.fs.as_f64()),
            label: self.label.clone(),
        }
    }

    fn with_samples(&self, samples: Vec<T>) -> Self {
        Self {
            samples,
            fs: self.fs,
            label: self.label.clone(),
        }
    }
}

/// Local polynomial smoothing settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoothingConfig {
    /// Window length in milliseconds.
    pub window_ms: f64,
    /// Order of the locally fitted polynomial.
    pub poly_order: usize,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            window_ms: 51.0,
            poly_order: 3,
        }
    }
}

/// Number of samples spanned by a window of `window_ms` at `fs`, rounded
/// to the nearest integer and bumped to the next odd count.
pub fn window_samples(window_ms: f64, fs: f64) -> usize {
    let n = (window_ms * fs / 1000.0).round().max(0.0) as usize;
    if n % 2 == 0 {
        n + 1
    } else {
        n
    }
}

/// Centre-point least-squares polynomial coefficients for a symmetric
/// window of half-width `h`.
fn savgol_center_weights(h: usize, order: usize) -> Vec<f64> {
    if h == 0 {
        return vec![1.0];
    }
    let order = order.min(2 * h);
    let m = order + 1;
    let xs: Vec<f64> = (0..=2 * h)
        .map(|i| (i as f64 - h as f64) / h as f64)
        .collect();
    // Normal equations (J^T J) a = e0, then weights w_i = sum_k a_k x_i^k.
    let mut ata = vec![vec![0.0; m]; m];
    for &x in &xs {
        let mut pw = vec![1.0; 2 * m];
        for k in 1..2 * m {
            pw[k] = pw[k - 1] * x;
        }
        for r in 0..m {
            for c in 0..m {
                ata[r][c] += pw[r + c];
            }
        }
    }
    let mut rhs = vec![0.0; m];
    rhs[0] = 1.0;
    let a = solve_dense(ata, rhs);
    xs.iter()
        .map(|&x| {
            let mut acc = 0.0;
            let mut p = 1.0;
            for ak in &a {
                acc += ak * p;
                p *= x;
            }
            acc
        })
        .collect()
}

/// Gaussian elimination with partial pivoting for tiny dense systems.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        for row in col + 1..n {
            let f = a[row][col] / d;
            if f != 0.0 {
                let (upper, lower) = a.split_at_mut(row);
                for (t, s) in lower[0][col..n].iter_mut().zip(&upper[col][col..n]) {
                    *t -= f * s;
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x
}

/// Local least-squares polynomial smoothing with a symmetric window.
///
/// Near the edges the window shrinks symmetrically, and the fit order drops
/// when the shrunken window holds too few samples.
pub fn smooth<T: Real>(
    signal: &SampledSignal<T>,
    window_ms: f64,
    poly_order: usize,
) -> Result<SampledSignal<T>> {
    let n_win = window_samples(window_ms, signal.fs().as_f64());
    if !window_ms.is_finite() || n_win < poly_order + 2 {
        return Err(Error::InvalidParameter(format!(
            "smoothing window of {window_ms} ms spans {n_win} samples; need at least {}",
            poly_order + 2
        )));
    }
    let x = signal.samples();
    let n = x.len();
    let half = (n_win / 2).min((n - 1) / 2);
    let weights: Vec<Vec<T>> = (0..=half)
        .map(|h| {
            savgol_center_weights(h, poly_order)
                .into_iter()
                .map(T::lit)
                .collect()
        })
        .collect();
    let out = (0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            let w = &weights[h];
            let base = i - h;
            let mut acc = T::zero();
            for (j, wj) in w.iter().enumerate() {
                acc += *wj * x[base + j];
            }
            acc
        })
        .collect();
    Ok(signal.with_samples(out))
}

/// Time derivative by central differences, scaled by `fs`, with
/// second-order one-sided differences at the endpoints.
pub fn derivative<T: Real>(signal: &SampledSignal<T>) -> Result<SampledSignal<T>> {
    let x = signal.samples();
    let n = x.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "derivative needs at least 3 samples, got {n}"
        )));
    }
    let fs = signal.fs();
    let half = T::lit(0.5);
    let mut out = Vec::with_capacity(n);
    out.push((T::lit(-3.0) * x[0] + T::lit(4.0) * x[1] - x[2]) * half * fs);
    for i in 1..n - 1 {
        out.push((x[i + 1] - x[i - 1]) * half * fs);
    }
    out.push((T::lit(3.0) * x[n - 1] - T::lit(4.0) * x[n - 2] + x[n - 3]) * half * fs);
    Ok(signal.with_samples(out))
}

/// Standardizes a series to zero mean and unit sample standard deviation.
pub fn zscore<T: Real>(series: &[T]) -> Result<Vec<T>> {
    let n = series.len();
    if n < 2 {
        return Err(Error::InsufficientData {
            what: "zscore series".into(),
            needed: 2,
            got: n,
        });
    }
    let (mean, sd) = mean_sd(series);
    if !(sd > T::zero()) || !sd.is_finite() {
        return Err(Error::DegenerateSeries("zero variance".into()));
    }
    Ok(series.iter().map(|&x| (x - mean) / sd).collect())
}

/// Mean and sample standard deviation (two-pass).
pub(crate) fn mean_sd<T: Real>(series: &[T]) -> (T, T) {
    let n = T::from_count(series.len());
    let mean = series.iter().copied().sum::<T>() / n;
    let ss: T = series.iter().map(|&x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - T::one())).sqrt())
}

/// Direction of a level crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Rising,
    Falling,
}

/// A sub-sample level crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing<T> {
    /// Crossing time in seconds from the first sample.
    pub time: T,
    /// Fractional sample position of the crossing.
    pub position: T,
    pub direction: Direction,
}

/// Locates crossings of `level` within the sample range `search`
/// (half-open) by linear interpolation between bracketing samples.
///
/// A sample counts as above the level when `x >= level`. A rise and fall
/// landing on the same instant (a touch) is not reported.
pub fn level_crossings<T: Real>(
    signal: &SampledSignal<T>,
    level: T,
    search: std::ops::Range<usize>,
) -> Result<Vec<Crossing<T>>> {
    if search.start >= search.end || search.end > signal.len() {
        return Err(Error::InvalidInput(format!(
            "search interval {}..{} invalid for signal of length {}",
            search.start,
            search.end,
            signal.len()
        )));
    }
    if !level.is_finite() {
        return Err(Error::InvalidInput("crossing level must be finite".into()));
    }
    let x = &signal.samples()[search.clone()];
    let fs = signal.fs();
    let mut out: Vec<Crossing<T>> = Vec::new();
    for i in 1..x.len() {
        let d0 = x[i - 1] - level;
        let d1 = x[i] - level;
        let above0 = d0 >= T::zero();
        let above1 = d1 >= T::zero();
        if above0 == above1 {
            continue;
        }
        let frac = d0 / (d0 - d1);
        let position = T::from_count(search.start + i - 1) + frac;
        let direction = if above1 {
            Direction::Rising
        } else {
            Direction::Falling
        };
        if let Some(last) = out.last() {
            if last.position == position {
                out.pop();
                continue;
            }
        }
        out.push(Crossing {
            time: position / fs,
            position,
            direction,
        });
    }
    Ok(out)
}

/// Smoothed PPG with its re-smoothed first and second derivatives.
#[derive(Debug, Clone)]
pub struct DerivativeBundle<T> {
    pub ppg: SampledSignal<T>,
    pub dppg: SampledSignal<T>,
    pub sdppg: SampledSignal<T>,
}

impl<T: Real> DerivativeBundle<T> {
    /// Smooths `raw`, then differentiates twice with re-smoothing after
    /// each pass.
    pub fn compute(raw: &SampledSignal<T>, cfg: &SmoothingConfig) -> Result<Self> {
        let ppg = smooth(raw, cfg.window_ms, cfg.poly_order)?.relabeled("ppg");
        let dppg = smooth(&derivative(&ppg)?, cfg.window_ms, cfg.poly_order)?.relabeled("dppg");
        let sdppg = smooth(&derivative(&dppg)?, cfg.window_ms, cfg.poly_order)?.relabeled("sdppg");
        Ok(Self { ppg, dppg, sdppg })
    }

    /// Wraps already-computed channels; lengths and rates must agree.
    pub fn from_parts(
        ppg: SampledSignal<T>,
        dppg: SampledSignal<T>,
        sdppg: SampledSignal<T>,
    ) -> Result<Self> {
        if ppg.len() != dppg.len() || ppg.len() != sdppg.len() {
            return Err(Error::InvalidInput(
                "PPG derivative channels differ in length".into(),
            ));
        }
        if ppg.fs() != dppg.fs() || ppg.fs() != sdppg.fs() {
            return Err(Error::InvalidInput(
                "PPG derivative channels differ in sampling rate".into(),
            ));
        }
        Ok(Self { ppg, dppg, sdppg })
    }

    pub fn len(&self) -> usize {
        self.ppg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ppg.is_empty()
    }

    pub fn fs(&self) -> T {
        self.ppg.fs()
    }
}
