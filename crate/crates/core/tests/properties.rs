use proptest::prelude::*;

use pulsefeat::bp::BeatBp;
use pulsefeat::metrics::{AssociationResult, AssociationScores};
use pulsefeat::segmentation::Beat;
use pulsefeat::signal::SampledSignal;
use pulsefeat::{
    beat_bp, cross_sample_entropy, mutual_information, pearson, rank_features, smooth, top_k,
    zscore, BpComponent, RankWeights,
};

fn series(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, n)
}

fn paired(n: std::ops::Range<usize>) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    n.prop_flat_map(|len| {
        (
            prop::collection::vec(-100.0f64..100.0, len),
            prop::collection::vec(-100.0f64..100.0, len),
        )
    })
}

fn spread(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::MIN, f64::max);
    let min = v.iter().cloned().fold(f64::MAX, f64::min);
    max - min
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smoothing_is_linear((x, y) in paired(60..200), a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let fs = 500.0;
        let sig = |v: Vec<f64>| SampledSignal::new(v, fs, "s").unwrap();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let sx = smooth(&sig(x), 41.0, 3).unwrap();
        let sy = smooth(&sig(y), 41.0, 3).unwrap();
        let sm = smooth(&sig(mix), 41.0, 3).unwrap();
        for i in 0..sm.len() {
            let want = a * sx.samples()[i] + b * sy.samples()[i];
            prop_assert!(close(sm.samples()[i], want, 1e-9));
        }
    }

    #[test]
    fn zscore_is_affine_invariant(x in series(3..80), a in 0.1f64..50.0, b in -1e3f64..1e3, flip in any::<bool>()) {
        prop_assume!(spread(&x) > 1e-3);
        let a = if flip { -a } else { a };
        let z = zscore(&x).unwrap();
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let zy = zscore(&y).unwrap();
        for (p, q) in z.iter().zip(&zy) {
            prop_assert!(close(a.signum() * p, *q, 1e-9));
        }
    }

    #[test]
    fn pearson_is_affine_invariant((x, y) in paired(3..80), a in 0.1f64..50.0, b in -1e3f64..1e3, c in -50.0f64..-0.1, d in -1e3f64..1e3) {
        prop_assume!(spread(&x) > 1e-3 && spread(&y) > 1e-3);
        let r = pearson(&x, &y).unwrap();
        prop_assert!((-1.0..=1.0).contains(&r));
        let x2: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let y2: Vec<f64> = y.iter().map(|v| c * v + d).collect();
        prop_assert!(close(pearson(&x2, &y2).unwrap(), -r, 1e-9));
        prop_assert!(close(pearson(&y, &x).unwrap(), r, 1e-12));
    }

    #[test]
    fn cross_sample_entropy_is_symmetric((x, y) in paired(10..120)) {
        prop_assume!(spread(&x) > 1e-3 && spread(&y) > 1e-3);
        let a = cross_sample_entropy(&x, &y, 2, 0.2).unwrap();
        let b = cross_sample_entropy(&y, &x, 2, 0.2).unwrap();
        prop_assert_eq!(a.matches_m, b.matches_m);
        prop_assert_eq!(a.matches_m1, b.matches_m1);
        prop_assert!((0.0..=1.0).contains(&a.normalized));
    }

    #[test]
    fn mutual_information_ignores_monotone_maps((x, y) in paired(64..300)) {
        prop_assume!(spread(&x) > 1e-3 && spread(&y) > 1e-3);
        let base = mutual_information(&x, &y, 6).unwrap();
        let cubed: Vec<f64> = x.iter().map(|v| v * v * v).collect();
        let squashed: Vec<f64> = y.iter().map(|v| (v / 40.0).tanh() * 3.0 + 7.0).collect();
        let mapped = mutual_information(&cubed, &squashed, 6).unwrap();
        prop_assert!((base.normalized - mapped.normalized).abs() < 1e-6);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&base.normalized));
    }

    #[test]
    fn ranking_ignores_monotone_metric_maps(cells in prop::collection::vec((-1.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 5..40)) {
        let build = |f: &dyn Fn(f64) -> f64| {
            AssociationResult::from_cells(
                cells
                    .iter()
                    .map(|&(cc, cse, mi)| {
                        let s = AssociationScores { cc: f(cc), cse_raw: 0.0, cse_norm: f(cse), mi_raw: 0.0, mi_norm: f(mi), n_beats: 20 };
                        [Some(s), None, None, None]
                    })
                    .collect(),
            )
        };
        let w = RankWeights::default();
        let a = rank_features(&build(&|v| v), BpComponent::Sbp, &w).unwrap();
        let b = rank_features(&build(&|v| v * v * v), BpComponent::Sbp, &w).unwrap();
        let order = |t: &pulsefeat::ranking::RankingTable<f64>| t.entries.iter().map(|e| e.feature_index).collect::<Vec<_>>();
        prop_assert_eq!(order(&a), order(&b));
        prop_assert!(a.entries.windows(2).all(|p| p[0].score <= p[1].score));
        prop_assert_eq!(a.len(), cells.len());
        let scaled = RankWeights { cc: 3.0, mi: 3.0, cse: 3.0 };
        prop_assert_eq!(order(&a), order(&rank_features(&build(&|v| v), BpComponent::Sbp, &scaled).unwrap()));
    }

    #[test]
    fn top_k_composes(cells in prop::collection::vec((-1.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 1..30), j in 1usize..40, k in 1usize..40) {
        let assoc = AssociationResult::from_cells(
            cells
                .iter()
                .map(|&(cc, cse, mi)| [None, Some(AssociationScores { cc, cse_raw: 0.0, cse_norm: cse, mi_raw: 0.0, mi_norm: mi, n_beats: 20 }), None, None])
                .collect(),
        );
        let t = rank_features(&assoc, BpComponent::Dbp, &RankWeights::default()).unwrap();
        let nested = top_k(&top_k(&t, j).unwrap(), k).unwrap();
        let direct = top_k(&t, j.min(k)).unwrap();
        prop_assert_eq!(&nested.entries, &direct.entries);
        prop_assert_eq!(direct.len(), j.min(k).min(cells.len()));
    }

    #[test]
    fn bp_shifts_with_offset(v in prop::collection::vec(60.0f64..180.0, 400..800), c in -50.0f64..50.0) {
        let fs = 1000.0;
        let beat = Beat { r_peak: 10, onset: 50, next_onset: v.len() - 20, rri: 0.8 };
        let a = beat_bp(&SampledSignal::new(v.clone(), fs, "abp").unwrap(), &beat).unwrap();
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let b: BeatBp<f64> = beat_bp(&SampledSignal::new(shifted, fs, "abp").unwrap(), &beat).unwrap();
        prop_assert!(close(b.sbp, a.sbp + c, 1e-9));
        prop_assert!(close(b.dbp, a.dbp + c, 1e-9));
        prop_assert!(close(b.mbp, a.mbp + c, 1e-9));
        prop_assert!(close(b.pp, a.pp, 1e-9));
        prop_assert!(a.dbp <= a.mbp && a.mbp <= a.sbp);
    }
}

#[test]
fn top_k_rejects_zero() {
    let s = AssociationScores {
        cc: 0.5,
        cse_raw: 1.0,
        cse_norm: 0.2,
        mi_raw: 0.1,
        mi_norm: 0.3,
        n_beats: 20,
    };
    let assoc: AssociationResult<f64> =
        AssociationResult::from_cells(vec![[None, None, None, Some(s)]; 3]);
    let t = rank_features(&assoc, BpComponent::Pp, &RankWeights::default()).unwrap();
    assert!(top_k(&t, 0).is_err());
    assert_eq!(t.head(), Some(1));
}
