//! Time-domain checks of the closed-form intercept and margin math.

use proptest::prelude::*;
use rxchain::cascade::{analyze, NoiseModel};
use rxchain::intermod::im3_level;
use rxchain::model::{Chain, OperatingPoint, StageSpec};
use rxchain::sweeps::interferer_margin;
use rxchain::twotone::{design_nonlinearity, extract_ip3, simulate_two_tone, simulate_two_tone_with, SampleGrid};
use rxchain::Execution;

const F1: f64 = 1000.0;
const F2: f64 = 1013.0;

#[test]
fn interferer_margin_against_simulation() {
    // single stage with a 0 dBm intercept; main −32 dBm, interferer −82 dBm
    // one bin (standing in for 1 MHz) above
    let chain = Chain::new("one", vec![StageSpec::amplifier("A", 0.0, 3.0).with_iip3(0.0)], None).unwrap();
    let r = analyze(&chain, &OperatingPoint::new(1e9, 25.0, -32.0), &NoiseModel::default()).unwrap();
    let margin = interferer_margin(&r, 1e9, -32.0, -82.0, 1e6, 5e6)
        .unwrap()
        .finite()
        .unwrap();

    let model = design_nonlinearity(0.0, 0.0).unwrap();
    let m = simulate_two_tone_with(
        &model,
        F1,
        F1 + 1.0,
        -32.0,
        -82.0,
        SampleGrid::scaled(),
        Execution::Serial,
    )
    .unwrap();
    let measured = m.f1.power_dbm - m.im3_low.power_dbm.max(m.im3_high.power_dbm);
    assert!(
        (margin - measured).abs() < 0.1,
        "closed form {margin}, simulated {measured}"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn design_then_extract_is_identity(gain in 0.0f64..30.0, oip3 in 0.0f64..40.0) {
        let m = design_nonlinearity(gain, oip3).unwrap();
        let iip3 = oip3 - gain;
        let (lo, hi) = (iip3 - 40.0, iip3 - 30.0);
        let g = SampleGrid::scaled();
        let a = simulate_two_tone(&m, F1, F2, lo, g).unwrap();
        let b = simulate_two_tone(&m, F1, F2, hi, g).unwrap();
        let est = extract_ip3(&a, &b, lo, hi, m.gain_db()).unwrap();
        prop_assert!((est.oip3_dbm - oip3).abs() < 0.1, "{est:?}");
        prop_assert!((m.gain_db() - gain).abs() < 1e-9);
    }

    #[test]
    fn measured_im3_matches_closed_form(
        gain in 0.0f64..20.0,
        iip3 in -10.0f64..20.0,
        back1 in 25.0f64..45.0,
        back2 in 25.0f64..45.0,
    ) {
        let m = design_nonlinearity(gain, iip3 + gain).unwrap();
        let (p1, p2) = (iip3 - back1, iip3 - back2);
        let meas = simulate_two_tone_with(&m, F1, F2, p1, p2, SampleGrid::scaled(), Execution::default()).unwrap();
        let (low, high) = im3_level(p1, p2, iip3).unwrap();
        prop_assert!((meas.im3_low.power_dbm - gain - low).abs() < 0.1, "{meas:?}");
        prop_assert!((meas.im3_high.power_dbm - gain - high).abs() < 0.1, "{meas:?}");
        if back1 == back2 {
            prop_assert!((meas.im3_low.power_dbm - meas.im3_high.power_dbm).abs() < 0.01);
        }
    }

    #[test]
    fn equal_tones_give_equal_products(gain in 0.0f64..20.0, oip3 in 0.0f64..40.0, back in 25.0f64..50.0) {
        let m = design_nonlinearity(gain, oip3).unwrap();
        let meas = simulate_two_tone(&m, F1, F2, oip3 - gain - back, SampleGrid::scaled()).unwrap();
        prop_assert!((meas.im3_low.power_dbm - meas.im3_high.power_dbm).abs() < 0.01);
    }
}
