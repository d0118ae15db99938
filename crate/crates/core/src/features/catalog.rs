//! The 222-entry feature table: index, family, name, dependencies, units.

use std::fmt;
use std::ops::RangeInclusive;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::fiducials::{Fiducial, FiducialSet};

/// Total number of features per beat.
pub const FEATURE_COUNT: usize = 222;

/// All 55 ordered pairs `(i, j)`, `1 <= i < j <= 11`, in lexicographic order.
pub fn fiducial_pairs() -> impl Iterator<Item = (usize, usize)> {
    (1..=11).flat_map(|i| (i + 1..=11).map(move |j| (i, j)))
}

/// Feature family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    /// Pulse transit time from the R peak.
    Ptt,
    /// Time durations between fiducials, plus RRI.
    Td,
    /// Pulse widths at amplitude levels.
    Pw,
    /// Amplitude differences between fiducials.
    Am,
    /// Intensities of PPG, dPPG, and sdPPG at fiducials.
    Pi,
    /// Areas under the baseline-anchored pulse.
    Ar,
    /// Ratio indices.
    Ri,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Ptt,
        Family::Td,
        Family::Pw,
        Family::Am,
        Family::Pi,
        Family::Ar,
        Family::Ri,
    ];

    /// One-based index range occupied by the family.
    pub fn range(self) -> RangeInclusive<usize> {
        match self {
            Family::Ptt => 1..=10,
            Family::Td => 11..=66,
            Family::Pw => 67..=76,
            Family::Am => 77..=131,
            Family::Pi => 132..=150,
            Family::Ar => 151..=204,
            Family::Ri => 205..=222,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Family::Ptt => "PTT",
            Family::Td => "TD",
            Family::Pw => "PW",
            Family::Am => "AM",
            Family::Pi => "PI",
            Family::Ar => "AR",
            Family::Ri => "RI",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Physical unit of a feature value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    Seconds,
    /// PPG arbitrary units.
    Au,
    AuPerSecond,
    AuPerSecondSquared,
    AuSeconds,
    Dimensionless,
    Percent,
}

impl Unit {
    pub fn symbol(self) -> &'static str {
        match self {
            Unit::Seconds => "s",
            Unit::Au => "a.u.",
            Unit::AuPerSecond => "a.u./s",
            Unit::AuPerSecondSquared => "a.u./s^2",
            Unit::AuSeconds => "a.u.*s",
            Unit::Dimensionless => "1",
            Unit::Percent => "%",
        }
    }

    /// Exponents `(amplitude, time)` describing how the value scales when
    /// the PPG is multiplied by `a` and time is dilated by `k`.
    pub fn scaling(self) -> (i32, i32) {
        match self {
            Unit::Seconds => (0, 1),
            Unit::Au => (1, 0),
            Unit::AuPerSecond => (1, -1),
            Unit::AuPerSecondSquared => (1, -2),
            Unit::AuSeconds => (1, 1),
            Unit::Dimensionless | Unit::Percent => (0, 0),
        }
    }
}

/// Set of landmarks a feature depends on: FP1..FP11 and the R peak.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Dependencies(u16);

const R_BIT: u16 = 1 << 11;

impl Dependencies {
    pub fn fiducials(fps: &[usize]) -> Self {
        Self(fps.iter().fold(0u16, |m, &n| m | (1 << (n - 1))))
    }

    pub fn with_r_peak(self) -> Self {
        Self(self.0 | R_BIT)
    }

    pub fn union(self, other: Self) -> Self {
        Self(self.0 | other.0)
    }

    pub fn contains(self, fp: Fiducial) -> bool {
        self.0 & (1 << (fp as u16)) != 0
    }

    pub fn needs_r_peak(self) -> bool {
        self.0 & R_BIT != 0
    }

    pub fn iter(self) -> impl Iterator<Item = Fiducial> {
        Fiducial::ALL.into_iter().filter(move |f| self.contains(*f))
    }

    /// True when every fiducial dependency is valid in `fids`.
    pub fn satisfied_by(self, fids: &FiducialSet) -> bool {
        self.iter().all(|f| fids.is_valid(f))
    }
}

impl fmt::Display for Dependencies {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        if self.needs_r_peak() {
            parts.push("R".into());
        }
        parts.extend(self.iter().map(|fp| fp.to_string()));
        f.write_str(&parts.join(";"))
    }
}

/// One catalog row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    /// One-based feature index.
    pub index: usize,
    pub family: Family,
    /// Stable machine-readable identifier.
    pub key: String,
    /// Human-readable name.
    pub name: String,
    pub dependencies: Dependencies,
    pub unit: Unit,
}

/// The full feature table.
#[derive(Debug, Clone)]
pub struct FeatureCatalog {
    entries: Vec<FeatureSpec>,
}

static CATALOG: LazyLock<FeatureCatalog> = LazyLock::new(FeatureCatalog::build);

/// Shared catalog instance.
pub fn catalog() -> &'static FeatureCatalog {
    &CATALOG
}

fn lm(n: usize) -> &'static str {
    Fiducial::from_number(n)
        .expect("fiducial number")
        .landmark()
}

/// Fiducial levels used for the non-percentage pulse widths.
pub const PW_LEVEL_FIDUCIALS: [usize; 7] = [2, 3, 4, 6, 7, 8, 9];
/// Percentage levels for the first three pulse widths.
pub const PW_PERCENT_LEVELS: [u32; 3] = [50, 60, 70];

pub(crate) const PI_PPG: [usize; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];
pub(crate) const PI_DPPG: [usize; 3] = [1, 3, 8];
pub(crate) const PI_SDPPG: [usize; 6] = [2, 4, 7, 8, 9, 10];

/// Ratio-index definitions: key, name, fiducials, uses RRI, unit.
const RI_TABLE: [(&str, &str, &[usize], bool, Unit); 18] = [
    (
        "ri_relative_rising_time",
        "Relative rising time",
        &[1, 5],
        true,
        Unit::Dimensionless,
    ),
    (
        "ri_crest_time_ratio",
        "Crest time ratio",
        &[1, 5, 11],
        false,
        Unit::Dimensionless,
    ),
    (
        "ri_relative_dicrotic_time",
        "Relative dicrotic time",
        &[1, 9],
        true,
        Unit::Dimensionless,
    ),
    (
        "ri_dicrotic_vertical_position",
        "Dicrotic vertical position",
        &[1, 5, 9],
        false,
        Unit::Dimensionless,
    ),
    (
        "ri_dicrotic_diastolic_ratio",
        "Dicrotic diastolic ratio",
        &[1, 5, 9, 11],
        false,
        Unit::Dimensionless,
    ),
    (
        "ri_augmentation_index",
        "Augmentation index",
        &[1, 5, 6],
        false,
        Unit::Dimensionless,
    ),
    (
        "ri_inflection_point_area_ratio",
        "Inflection point area ratio",
        &[1, 9, 11],
        false,
        Unit::Dimensionless,
    ),
    (
        "ri_slope_transit_time",
        "Slope transit time",
        &[1, 3, 5],
        false,
        Unit::Seconds,
    ),
    ("ri_b_over_a", "b/a", &[2, 4], false, Unit::Dimensionless),
    ("ri_c_over_a", "c/a", &[2, 6], false, Unit::Dimensionless),
    ("ri_d_over_a", "d/a", &[2, 7], false, Unit::Dimensionless),
    ("ri_e_over_a", "e/a", &[2, 9], false, Unit::Dimensionless),
    (
        "ri_cdb_over_a",
        "(c+d-b)/a",
        &[2, 4, 6, 7],
        false,
        Unit::Dimensionless,
    ),
    (
        "ri_bcd_over_a",
        "(b-c-d)/a",
        &[2, 4, 6, 7],
        false,
        Unit::Dimensionless,
    ),
    (
        "ri_aging_index",
        "Aging index (b-c-d-e)/a",
        &[2, 4, 6, 7, 9],
        false,
        Unit::Dimensionless,
    ),
    (
        "ri_ppg_intensity_ratio",
        "PPG intensity ratio",
        &[1, 5],
        false,
        Unit::Dimensionless,
    ),
    (
        "ri_perfusion_index",
        "Perfusion index",
        &[1, 5, 11],
        false,
        Unit::Percent,
    ),
    (
        "ri_reflection_index",
        "Reflection index",
        &[1, 5, 9, 11],
        false,
        Unit::Dimensionless,
    ),
];

impl FeatureCatalog {
    fn build() -> Self {
        let mut e: Vec<FeatureSpec> = Vec::with_capacity(FEATURE_COUNT);
        let mut push = |family, key: String, name: String, dependencies, unit| {
            let index = e.len() + 1;
            e.push(FeatureSpec {
                index,
                family,
                key,
                name,
                dependencies,
                unit,
            });
        };
        for i in 1..=10 {
            push(
                Family::Ptt,
                format!("ptt_fp{i}"),
                format!("Time interval from R peak to {}", lm(i)),
                Dependencies::fiducials(&[i]).with_r_peak(),
                Unit::Seconds,
            );
        }
        push(
            Family::Td,
            "td_rri".into(),
            "R-R interval".into(),
            Dependencies::default().with_r_peak(),
            Unit::Seconds,
        );
        for (i, j) in fiducial_pairs() {
            push(
                Family::Td,
                format!("td_fp{i}_fp{j}"),
                format!("Time duration between {} and {}", lm(i), lm(j)),
                Dependencies::fiducials(&[i, j]),
                Unit::Seconds,
            );
        }
        let pw_base = Dependencies::fiducials(&[1, 5, 11]);
        for pct in PW_PERCENT_LEVELS {
            push(
                Family::Pw,
                format!("pw_{pct}"),
                format!("Pulse Width {pct}%"),
                pw_base,
                Unit::Seconds,
            );
        }
        for k in PW_LEVEL_FIDUCIALS {
            push(
                Family::Pw,
                format!("pw_fp{k}"),
                format!("Pulse width at {} level", lm(k)),
                pw_base.union(Dependencies::fiducials(&[k])),
                Unit::Seconds,
            );
        }
        for (i, j) in fiducial_pairs() {
            push(
                Family::Am,
                format!("am_fp{i}_fp{j}"),
                format!("Amplitude between {} and {}", lm(i), lm(j)),
                Dependencies::fiducials(&[i, j]),
                Unit::Au,
            );
        }
        for k in PI_PPG {
            push(
                Family::Pi,
                format!("pi_ppg_fp{k}"),
                format!("Intensity of PPG at {}", lm(k)),
                Dependencies::fiducials(&[k]),
                Unit::Au,
            );
        }
        for k in PI_DPPG {
            push(
                Family::Pi,
                format!("pi_dppg_fp{k}"),
                format!("Intensity of dPPG at {}", lm(k)),
                Dependencies::fiducials(&[k]),
                Unit::AuPerSecond,
            );
        }
        for k in PI_SDPPG {
            push(
                Family::Pi,
                format!("pi_sdppg_fp{k}"),
                format!("Intensity of sdPPG at {}", lm(k)),
                Dependencies::fiducials(&[k]),
                Unit::AuPerSecondSquared,
            );
        }
        for (i, j) in fiducial_pairs().filter(|&p| p != (1, 11)) {
            push(
                Family::Ar,
                format!("ar_fp{i}_fp{j}"),
                format!("Area between {} and {}", lm(i), lm(j)),
                Dependencies::fiducials(&[1, i, j]),
                Unit::AuSeconds,
            );
        }
        for (key, name, fps, rri, unit) in RI_TABLE {
            let mut deps = Dependencies::fiducials(fps);
            if rri {
                deps = deps.with_r_peak();
            }
            push(Family::Ri, key.into(), name.into(), deps, unit);
        }
        Self { entries: e }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry for a one-based index.
    pub fn get(&self, index: usize) -> Option<&FeatureSpec> {
        index.checked_sub(1).and_then(|i| self.entries.get(i))
    }

    /// Entry for a machine key.
    pub fn by_key(&self, key: &str) -> Option<&FeatureSpec> {
        self.entries.iter().find(|e| e.key == key)
    }

    /// Resolves either a one-based index or a key.
    pub fn resolve(&self, id: &str) -> Option<&FeatureSpec> {
        match id.trim().parse::<usize>() {
            Ok(i) => self.get(i),
            Err(_) => self.by_key(id.trim()),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &FeatureSpec> {
        self.entries.iter()
    }

    /// Machine-readable CSV: index, family, name, dependencies, units.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,family,name,dependencies,units\n");
        for e in &self.entries {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                e.index,
                e.family,
                csv_field(&e.name),
                e.dependencies,
                e.unit.symbol()
            ));
        }
        s
    }

    /// Markdown table of the catalog.
    pub fn to_markdown(&self) -> String {
        let mut s = String::from(
            "| index | family | key | name | dependencies | units |\n|---|---|---|---|---|---|\n",
        );
        for e in &self.entries {
            s.push_str(&format!(
                "| {} | {} | `{}` | {} | {} | {} |\n",
                e.index,
                e.family,
                e.key,
                e.name,
                e.dependencies,
                e.unit.symbol()
            ));
        }
        s
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
