mod common;

use common::{gaussian, reference_dft, reference_same_convolution, rng};
use demonsonar_core::dsp::{design_fir, fft, filter_apply, FirKind};
use proptest::prelude::*;

#[test]
fn fft_agrees_with_reference_dft() {
    let mut r = rng(11);
    for log2 in 3..=10 {
        let x = gaussian(&mut r, 1 << log2);
        let fast = fft(&x).unwrap();
        let slow = reference_dft(&x);
        let scale = slow.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let err = fast.iter().zip(&slow).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err / scale <= 1e-9, "n={} rel err {}", x.len(), err / scale);
    }
}

#[test]
fn lowpass_matches_direct_convolution() {
    let filter = design_fir(FirKind::Lowpass { cutoff_hz: 1_000.0 }, 8_000.0, 63).unwrap();
    let x = gaussian(&mut rng(4), 700);
    let got = filter_apply(&filter, &x).unwrap();
    let want = reference_same_convolution(filter.taps(), &x);
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() <= 1e-12);
    }
}

proptest! {
    #[test]
    fn parseval_holds(seed in any::<u64>(), log2 in 3u32..=10) {
        let x = gaussian(&mut rng(seed), 1 << log2);
        let spectrum = fft(&x).unwrap();
        let time: f64 = x.iter().map(|v| v * v).sum();
        let freq: f64 = spectrum.iter().map(|z| z.norm_sqr()).sum::<f64>() / x.len() as f64;
        prop_assert!((time - freq).abs() <= 1e-9 * time);
    }

    #[test]
    fn bandpass_matches_direct_convolution(seed in any::<u64>(), taps in (8usize..=64).prop_map(|h| 2 * h + 1)) {
        let filter = design_fir(FirKind::Bandpass { lo_hz: 500.0, hi_hz: 2_500.0 }, 8_000.0, taps).unwrap();
        let x = gaussian(&mut rng(seed), 300);
        let got = filter_apply(&filter, &x).unwrap();
        let want = reference_same_convolution(filter.taps(), &x);
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
