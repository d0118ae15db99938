mod common;

use common::{bundle_and_beats, clean_record, rel_close, sampled};
use pulsefeat::features::{ar_features, pw_features};
use pulsefeat::segmentation::Beat;
use pulsefeat::signal::{DerivativeBundle, SampledSignal};
use pulsefeat::{
    catalog, extract_all, locate_fiducials, Family, Fiducial, FiducialSet, SmoothingConfig,
    FEATURE_COUNT,
};

fn scaled(sig: &SampledSignal<f64>, gain: f64, fs: f64) -> SampledSignal<f64> {
    SampledSignal::new(
        sig.samples().iter().map(|x| x * gain).collect(),
        fs,
        sig.label(),
    )
    .unwrap()
}

#[test]
fn every_clean_beat_is_ordered_and_complete() {
    let sr = clean_record(11, 60.0);
    let (bundle, beats) = bundle_and_beats(&sr);
    assert!(beats.len() >= 70);
    for b in &beats {
        let f = locate_fiducials(&bundle, b).unwrap();
        assert!(f.all_valid(), "beat at {}: {:?}", b.onset, f);
        assert!(f.is_ordered(), "beat at {}: {:?}", b.onset, f);
        let v = extract_all(&bundle, &f, b);
        assert_eq!(v.len(), FEATURE_COUNT);
        assert_eq!(v.present_count(), FEATURE_COUNT);
    }
}

#[test]
fn family_slices_follow_layout() {
    let sr = clean_record(2, 10.0);
    let (bundle, beats) = bundle_and_beats(&sr);
    let b = &beats[2];
    let f = locate_fiducials(&bundle, b).unwrap();
    let v = extract_all(&bundle, &f, b);
    let lens: Vec<usize> = Family::ALL.iter().map(|fam| v.family(*fam).len()).collect();
    assert_eq!(lens, vec![10, 56, 10, 55, 19, 54, 18]);
    assert_eq!(v.family(Family::Pw)[0], v.get(67));
    assert_eq!(v.family(Family::Ri)[17], v.get(222));
}

/// Features must scale as gain^a * stretch^t, with (a, t) the unit's
/// amplitude and time exponents.
#[test]
fn features_covary_with_amplitude_and_time_scale() {
    let sr = clean_record(5, 12.0);
    let (bundle, beats) = bundle_and_beats(&sr);
    let fs = bundle.fs();
    for (gain, k) in [(3.7, 1.0), (1.0, 1.6), (0.45, 0.8)] {
        let stretch = 1.0 / k;
        let other = DerivativeBundle::from_parts(
            scaled(&bundle.ppg, gain, fs * k),
            scaled(&bundle.dppg, gain * k, fs * k),
            scaled(&bundle.sdppg, gain * k * k, fs * k),
        )
        .unwrap();
        for b in &beats {
            let f = locate_fiducials(&bundle, b).unwrap();
            let b2 = Beat {
                rri: b.rri * stretch,
                ..*b
            };
            let f2 = locate_fiducials(&other, &b2).unwrap();
            assert_eq!(f, f2);
            let v = extract_all(&bundle, &f, b);
            let v2 = extract_all(&other, &f2, &b2);
            for spec in catalog().iter() {
                let (a, t) = spec.unit.scaling();
                match (v.get(spec.index), v2.get(spec.index)) {
                    (Some(x), Some(y)) => {
                        let want = x * gain.powi(a) * stretch.powi(t);
                        assert!(rel_close(y, want, 1e-9), "{}: {y} vs {want}", spec.key);
                    }
                    (None, None) => {}
                    other => panic!("{}: presence differs {other:?}", spec.key),
                }
            }
        }
    }
}

#[test]
fn areas_are_additive() {
    let sr = clean_record(8, 20.0);
    let (bundle, beats) = bundle_and_beats(&sr);
    let key = |i: usize, j: usize| {
        catalog()
            .by_key(&format!("ar_fp{i}_fp{j}"))
            .map(|s| s.index)
    };
    for b in &beats {
        let f = locate_fiducials(&bundle, b).unwrap();
        let v = extract_all(&bundle, &f, b);
        let area = |i: usize, j: usize| key(i, j).and_then(|k| v.get(k));
        let mut checked = 0;
        for i in 1..=11 {
            for j in i + 1..=11 {
                for m in j + 1..=11 {
                    if let (Some(ij), Some(jm), Some(im)) = (area(i, j), area(j, m), area(i, m)) {
                        assert!(
                            rel_close(ij + jm, im, 1e-9),
                            "({i},{j},{m}): {} vs {im}",
                            ij + jm
                        );
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 100);
    }
}

#[test]
fn area_of_constant_offset_pulse_is_zero() {
    let ppg = sampled(1000, 1000.0, |_| 2.0);
    let mut set = FiducialSet::default();
    for (k, fp) in Fiducial::ALL.iter().enumerate() {
        set.insert(*fp, 50 + 80 * k);
    }
    assert!(ar_features(&ppg, &set)
        .iter()
        .all(|v| v.is_some_and(|x| x == 0.0)));
}

/// Full width at half maximum of a Gaussian is 2 sqrt(2 ln 2) sigma.
#[test]
fn gaussian_half_width() {
    let sigma = 0.05;
    let fs = 1000.0;
    let ppg = sampled(1000, fs, |t| {
        (-(t - 0.5f64).powi(2) / (2.0 * sigma * sigma)).exp()
    });
    let mut set = FiducialSet::default();
    set.insert(Fiducial::Fp1, 100);
    set.insert(Fiducial::Fp5, 500);
    set.insert(Fiducial::Fp11, 900);
    let pw = pw_features(&ppg, &set);
    let want = 2.0 * (2.0 * std::f64::consts::LN_2).sqrt() * sigma;
    assert!((pw[0].unwrap() - want).abs() < 1e-5, "{:?}", pw[0]);
    assert!(pw[1].unwrap() < pw[0].unwrap() && pw[2].unwrap() < pw[1].unwrap());
}

/// Slope transit time of a raised-cosine upstroke of duration T is
/// amplitude over peak slope, 2T/pi.
#[test]
fn slope_transit_time_of_cosine_upstroke() {
    use std::f64::consts::PI;
    let fs = 1000.0;
    let rise = 0.15;
    let raw = sampled(1200, fs, |t| {
        let u = t - 0.2;
        if u <= 0.0 {
            0.0
        } else if u <= rise {
            0.5 * (1.0 - (PI * u / rise).cos())
        } else if u <= rise + 0.1 {
            1.0
        } else {
            0.5 * (1.0 + (PI * ((u - rise - 0.1) / 0.6).min(1.0)).cos())
        }
    });
    let bundle = DerivativeBundle::compute(&raw, &SmoothingConfig::default()).unwrap();
    let beat = Beat {
        r_peak: 0,
        onset: 200,
        next_onset: 1100,
        rri: 0.9,
    };
    let f = locate_fiducials(&bundle, &beat).unwrap();
    let v = extract_all(&bundle, &f, &beat);
    let stt = catalog().by_key("ri_slope_transit_time").unwrap().index;
    let got = v.get(stt).expect("STT present");
    let want = 2.0 * rise / PI;
    assert!((got - want).abs() < 1e-3, "{got} vs {want}");
}

#[test]
fn features_missing_when_fiducial_absent() {
    let sr = clean_record(3, 10.0);
    let (bundle, beats) = bundle_and_beats(&sr);
    let b = &beats[3];
    let mut f = locate_fiducials(&bundle, b).unwrap();
    f.remove(Fiducial::Fp10);
    let v = extract_all(&bundle, &f, b);
    for spec in catalog().iter() {
        let needs = spec.dependencies.contains(Fiducial::Fp10);
        assert_eq!(v.get(spec.index).is_none(), needs, "{}", spec.key);
    }
    assert!(v.missing_mask().iter().filter(|m| **m).count() > 20);
}

#[test]
fn features_are_shift_equivariant() {
    let sr = clean_record(4, 10.0);
    let (bundle, beats) = bundle_and_beats(&sr);
    let pad = 137;
    let padded = |s: &SampledSignal<f64>| {
        let mut v = vec![s.samples()[0]; pad];
        v.extend_from_slice(s.samples());
        SampledSignal::new(v, s.fs(), s.label()).unwrap()
    };
    let other = DerivativeBundle::from_parts(
        padded(&bundle.ppg),
        padded(&bundle.dppg),
        padded(&bundle.sdppg),
    )
    .unwrap();
    for b in beats.iter().skip(1) {
        let f = locate_fiducials(&bundle, b).unwrap();
        let b2 = b.shifted(pad);
        let f2 = locate_fiducials(&other, &b2).unwrap();
        for fp in Fiducial::ALL {
            assert_eq!(f.get(fp).map(|p| p + pad), f2.get(fp));
        }
        let v = extract_all(&bundle, &f, b);
        let v2 = extract_all(&other, &f2, &b2);
        for (x, y) in v.values().iter().zip(v2.values()) {
            match (x, y) {
                (Some(x), Some(y)) => assert!(rel_close(*x, *y, 1e-12)),
                (None, None) => {}
                _ => panic!("presence differs"),
            }
        }
    }
}
