//! Borda fusion of the three association metrics into per-component
//! feature rankings.

use serde::{Deserialize, Serialize};

use crate::bp::BpComponent;
use crate::error::{Error, Result};
use crate::features::catalog;
use crate::metrics::AssociationResult;
use crate::scalar::Real;

/// Per-metric weights for the rank sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RankWeights {
    pub cc: f64,
    pub mi: f64,
    pub cse: f64,
}

impl Default for RankWeights {
    fn default() -> Self {
        Self {
            cc: 1.0,
            mi: 1.0,
            cse: 1.0,
        }
    }
}

impl RankWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.cc, self.mi, self.cse];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) || all.iter().all(|w| *w == 0.0) {
            return Err(Error::Config(
                "ranking weights must be finite, non-negative, and not all zero".into(),
            ));
        }
        Ok(())
    }
}

/// One ranked feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry<T> {
    pub feature_index: usize,
    pub name: String,
    pub cc: T,
    pub cse_norm: T,
    pub mi_norm: T,
    /// Weighted rank sum; lower is better.
    pub score: T,
}

/// Ranked features for one BP component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingTable<T> {
    pub component: BpComponent,
    pub entries: Vec<RankEntry<T>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl<T> RankingTable<T> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Feature index ranked first.
    pub fn head(&self) -> Option<usize> {
        self.entries.first().map(|e| e.feature_index)
    }
}

/// One-based average ranks; `better(a, b)` orders the best value first.
fn average_ranks<T: Real>(values: &[T], better: impl Fn(T, T) -> std::cmp::Ordering) -> Vec<T> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| better(values[a], values[b]));
    let mut ranks = vec![T::zero(); values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = T::from_count(i + j + 2) / T::lit(2.0);
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Ranks all populated features for `component`.
///
/// Each metric is ranked separately (|cc| and mi_norm descending, cse_norm
/// ascending, ties sharing the average rank); the fused score is the
/// weighted rank sum, ties going to the lower feature index.
pub fn rank_features<T: Real>(
    assoc: &AssociationResult<T>,
    component: BpComponent,
    weights: &RankWeights,
) -> Result<RankingTable<T>> {
    weights.validate()?;
    let cells: Vec<(usize, T, T, T)> = assoc
        .iter()
        .filter(|(_, c, _)| *c == component)
        .map(|(f, _, s)| (f, s.cc, s.cse_norm, s.mi_norm))
        .collect();
    if cells.is_empty() {
        return Ok(RankingTable {
            component,
            entries: Vec::new(),
            diagnostics: vec![format!("no populated cells for {component}")],
        });
    }
    let cc: Vec<T> = cells.iter().map(|c| c.1.abs()).collect();
    let cse: Vec<T> = cells.iter().map(|c| c.2).collect();
    let mi: Vec<T> = cells.iter().map(|c| c.3).collect();
    let desc = |a: T, b: T| b.partial_cmp(&a).unwrap();
    let asc = |a: T, b: T| a.partial_cmp(&b).unwrap();
    let r_cc = average_ranks(&cc, desc);
    let r_mi = average_ranks(&mi, desc);
    let r_cse = average_ranks(&cse, asc);
    let (wc, wm, we) = (T::lit(weights.cc), T::lit(weights.mi), T::lit(weights.cse));
    let cat = catalog();
    let mut entries: Vec<RankEntry<T>> = cells
        .iter()
        .enumerate()
        .map(|(k, &(f, c, e, m))| RankEntry {
            feature_index: f,
            name: cat.get(f).map(|s| s.name.clone()).unwrap_or_default(),
            cc: c,
            cse_norm: e,
            mi_norm: m,
            score: wc * r_cc[k] + wm * r_mi[k] + we * r_cse[k],
        })
        .collect();
    entries.sort_by(|a, b| {
        a.score
            .partial_cmp(&b.score)
            .unwrap()
            .then(a.feature_index.cmp(&b.feature_index))
    });
    Ok(RankingTable {
        component,
        entries,
        diagnostics: Vec::new(),
    })
}

/// Keeps the first `k` rows.
pub fn top_k<T: Clone>(table: &RankingTable<T>, k: usize) -> Result<RankingTable<T>> {
    if k == 0 {
        return Err(Error::InvalidParameter("top_k needs k >= 1".into()));
    }
    Ok(RankingTable {
        component: table.component,
        entries: table.entries.iter().take(k).cloned().collect(),
        diagnostics: table.diagnostics.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::AssociationScores;

    fn cell(cc: f64, cse: f64, mi: f64) -> Option<AssociationScores<f64>> {
        Some(AssociationScores {
            cc,
            cse_raw: cse,
            cse_norm: cse,
            mi_raw: mi,
            mi_norm: mi,
            n_beats: 20,
        })
    }

    fn result(rows: &[(usize, f64, f64, f64)]) -> AssociationResult<f64> {
        let mut cells = vec![[None; 4]; 222];
        for &(f, cc, cse, mi) in rows {
            cells[f - 1][0] = cell(cc, cse, mi);
        }
        AssociationResult::from_cells(cells)
    }

    #[test]
    fn average_ranks_share_ties() {
        let r = average_ranks(&[3.0, 1.0, 3.0, 2.0], |a: f64, b: f64| {
            b.partial_cmp(&a).unwrap()
        });
        assert_eq!(r, vec![1.5, 4.0, 1.5, 3.0]);
    }

    #[test]
    fn unanimous_winner_and_tie_break() {
        let a = result(&[
            (5, 0.1, 0.9, 0.1),
            (67, -0.95, 0.2, 0.8),
            (9, 0.5, 0.5, 0.5),
        ]);
        let t = rank_features(&a, BpComponent::Sbp, &RankWeights::default()).unwrap();
        assert_eq!(t.head(), Some(67));
        assert_eq!(t.entries[0].score, 3.0);

        let a = result(&[(40, 0.5, 0.5, 0.5), (12, 0.5, 0.5, 0.5)]);
        let t = rank_features(&a, BpComponent::Sbp, &RankWeights::default()).unwrap();
        assert_eq!(t.entries[0].feature_index, 12);
        assert_eq!(t.entries[0].score, t.entries[1].score);
    }

    #[test]
    fn empty_component_gives_diagnostic() {
        let a = result(&[(5, 0.1, 0.9, 0.1)]);
        let t = rank_features(&a, BpComponent::Pp, &RankWeights::default()).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.diagnostics.len(), 1);
    }

    #[test]
    fn top_k_clamps() {
        let a = result(&[(1, 0.1, 0.9, 0.1), (2, 0.2, 0.8, 0.2), (3, 0.3, 0.7, 0.3)]);
        let t = rank_features(&a, BpComponent::Sbp, &RankWeights::default()).unwrap();
        assert_eq!(top_k(&t, 2).unwrap().len(), 2);
        assert_eq!(top_k(&t, 1000).unwrap().len(), 3);
        assert_eq!(top_k(&t, 1).unwrap().head(), t.head());
        assert!(top_k(&t, 0).is_err());
    }

    #[test]
    fn weights_validate() {
        let w = RankWeights {
            cc: 0.0,
            mi: 0.0,
            cse: 0.0,
        };
        assert!(w.validate().is_err());
        let w = RankWeights {
            cc: -1.0,
            ..Default::default()
        };
        assert!(w.validate().is_err());
    }
}
