mod common;

use common::{hrv_oracle, nn, random_nn, rel_err};
use ema_rl::features::{encode_context, extract_hrv_features, ContextSnapshot, HrvFeatures, HRV_FEATURE_NAMES};
use ema_rl::rng;
use proptest::prelude::*;

#[test]
fn every_feature_matches_the_direct_formula_oracle() {
    let mut r = rng::stream(11, "hrv-oracle");
    for case in 0..100 {
        let iv = random_nn(&mut r);
        let got = extract_hrv_features(&nn(&iv)).unwrap().to_array();
        let want = hrv_oracle(&iv);
        for k in 0..12 {
            assert!(
                rel_err(got[k], want[k]) <= 1e-9,
                "case {case} {}: {} vs {}",
                HRV_FEATURE_NAMES[k],
                got[k],
                want[k]
            );
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn shift_invariant(f: &HrvFeatures) -> [f64; 7] {
    [f.sdnn, f.sdsd, f.rmssd, f.pnn20, f.pnn50, f.hr_mad, f.sd1]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shift_leaves_dispersion_unchanged(
        iv in proptest::collection::vec(600.0f64..1100.0, 8..80),
        c in -200.0f64..400.0,
    ) {
        let a = extract_hrv_features(&nn(&iv)).unwrap();
        let shifted: Vec<f64> = iv.iter().map(|x| x + c).collect();
        let b = extract_hrv_features(&nn(&shifted)).unwrap();
        for (x, y) in shift_invariant(&a).iter().zip(shift_invariant(&b).iter()) {
            prop_assert!(close(*x, *y), "{} vs {}", x, y);
        }
        prop_assert!(close(b.ibi, a.ibi + c));
    }

    #[test]
    fn scale_is_covariant(
        iv in proptest::collection::vec(600.0f64..1100.0, 8..80),
        k in 0.5f64..2.0,
    ) {
        let a = extract_hrv_features(&nn(&iv)).unwrap();
        let scaled: Vec<f64> = iv.iter().map(|x| x * k).collect();
        let b = extract_hrv_features(&nn(&scaled)).unwrap();
        for (x, y) in [(a.sdnn, b.sdnn), (a.sdsd, b.sdsd), (a.rmssd, b.rmssd), (a.hr_mad, b.hr_mad), (a.sd1, b.sd1), (a.sd2, b.sd2)] {
            prop_assert!(close(x * k, y), "{} * {} vs {}", x, k, y);
        }
        prop_assert!(close(a.s * k * k, b.s));
    }
}

#[test]
fn context_encoding_has_fixed_arity() {
    let base = encode_context(&ContextSnapshot::default()).unwrap();
    let busy = ContextSnapshot {
        call_count: 3,
        notification_count: 40,
        screen_touches: 500,
        hour: 13.5,
        ..ContextSnapshot::default()
    };
    assert_eq!(encode_context(&busy).unwrap().len(), base.len());
}
