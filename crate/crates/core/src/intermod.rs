//! Frequency bookkeeping for two-tone intermodulation and mixer spurs, plus
//! closed-form IM3 levels.

use crate::error::{Error, Result};
use crate::model::{FrequencyPlan, Lo1Mode};
use serde::Serialize;

/// A product `|m·fa + n·fb|` of two input frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImProduct {
    pub m: i32,
    pub n: i32,
    pub freq_hz: f64,
    /// `|m| + |n|`
    pub order: u32,
    pub in_band: bool,
}

impl ImProduct {
    fn new(m: i32, n: i32, fa: f64, fb: f64) -> Self {
        ImProduct {
            m,
            n,
            freq_hz: (m as f64 * fa + n as f64 * fb).abs(),
            order: m.unsigned_abs() + n.unsigned_abs(),
            in_band: false,
        }
    }
}

fn same_freq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// All distinct two-tone products of order 2..=`max_order`, harmonics
/// (`2f1`, `3f2`, ...) included, sorted by frequency. When two coefficient
/// pairs land on the same frequency the lower-order one is kept.
pub fn two_tone_products(f1_hz: f64, f2_hz: f64, max_order: u32) -> Result<Vec<ImProduct>> {
    if !(f1_hz > 0.0 && f2_hz > 0.0) || !f1_hz.is_finite() || !f2_hz.is_finite() {
        return Err(Error::InvalidArgument("tone frequencies must be positive".into()));
    }
    if f1_hz == f2_hz {
        return Err(Error::InvalidArgument("degenerate tones: f1 == f2".into()));
    }
    if max_order < 2 {
        return Err(Error::InvalidArgument(format!(
            "max_order must be >= 2, got {max_order}"
        )));
    }
    let k = max_order as i32;
    let mut out = Vec::new();
    for m in -k..=k {
        for n in -k..=k {
            let order = m.unsigned_abs() + n.unsigned_abs();
            if order < 2 || order > max_order {
                continue;
            }
            // one sign per ± pair: leading nonzero coefficient positive
            if m < 0 || (m == 0 && n < 0) {
                continue;
            }
            out.push(ImProduct::new(m, n, f1_hz, f2_hz));
        }
    }
    out.sort_by(|a, b| a.freq_hz.total_cmp(&b.freq_hz).then(a.order.cmp(&b.order)));
    out.dedup_by(|later, kept| same_freq(later.freq_hz, kept.freq_hz));
    Ok(out)
}

/// Flags products inside the closed interval `center ± passband/2`.
pub fn in_band(products: &[ImProduct], center_hz: f64, passband_hz: f64) -> Result<Vec<ImProduct>> {
    if !(passband_hz > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "passband must be positive, got {passband_hz}"
        )));
    }
    Ok(products
        .iter()
        .map(|p| ImProduct {
            in_band: is_in_band(p.freq_hz, center_hz, passband_hz),
            ..*p
        })
        .collect())
}

pub fn is_in_band(freq_hz: f64, center_hz: f64, passband_hz: f64) -> bool {
    (freq_hz - center_hz).abs() <= passband_hz / 2.0
}

/// Input-referred IM3 levels, dBm, for tones `p1` at f1 and `p2` at f2:
/// `(level at 2f1−f2, level at 2f2−f1)`.
pub fn im3_level(p1_dbm: f64, p2_dbm: f64, iip3_dbm: f64) -> Result<(f64, f64)> {
    if !iip3_dbm.is_finite() {
        return Err(Error::InvalidArgument("im3_level needs a finite IIP3".into()));
    }
    Ok((
        2.0 * p1_dbm + p2_dbm - 2.0 * iip3_dbm,
        p1_dbm + 2.0 * p2_dbm - 2.0 * iip3_dbm,
    ))
}

/// Every frequency in the two-stage conversion for one RF input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanFrequencies {
    pub rf_hz: f64,
    pub lo1_hz: f64,
    pub if1_hz: f64,
    pub lo2_hz: f64,
    pub if2_hz: f64,
    pub image1_hz: f64,
    pub image2_hz: f64,
}

pub fn frequency_plan_table(plan: &FrequencyPlan, rf_hz: f64) -> Result<PlanFrequencies> {
    plan.check_rf(rf_hz)?;
    let if1 = plan.if1_hz;
    let (lo1, image1) = match plan.lo1_mode {
        Lo1Mode::HighSide => (rf_hz + if1, rf_hz + 2.0 * if1),
        Lo1Mode::LowSide => (rf_hz - if1, rf_hz - 2.0 * if1),
    };
    Ok(PlanFrequencies {
        rf_hz,
        lo1_hz: lo1,
        if1_hz: if1,
        lo2_hz: plan.lo2_hz,
        if2_hz: plan.if2_hz,
        image1_hz: image1,
        image2_hz: (2.0 * plan.lo2_hz - if1).abs(),
    })
}

/// One `m·f_sig ± n·f_lo` mixer product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpurEntry {
    #[serde(flatten)]
    pub product: ImProduct,
    /// The wanted `f_sig − f_lo` conversion.
    pub desired: bool,
}

/// Mixer spur table: `|m·f_sig + n·f_lo|` and `|m·f_sig − n·f_lo|` for
/// `1 ≤ m ≤ m_max`, `1 ≤ n ≤ n_max` (difference products carry a negative
/// `n`), flagged against the IF passband. Exactly `2·m_max·n_max` entries,
/// ordered by `m`, then `n`, sum before difference.
pub fn mixer_spur_table(
    f_sig_hz: f64,
    f_lo_hz: f64,
    m_max: u32,
    n_max: u32,
    if_center_hz: f64,
    if_passband_hz: f64,
) -> Result<Vec<SpurEntry>> {
    if m_max < 1 || n_max < 1 {
        return Err(Error::InvalidArgument("m_max and n_max must be >= 1".into()));
    }
    if !(if_passband_hz > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "passband must be positive, got {if_passband_hz}"
        )));
    }
    let mut out = Vec::with_capacity(2 * (m_max * n_max) as usize);
    for m in 1..=m_max as i32 {
        for n in 1..=n_max as i32 {
            for n_signed in [n, -n] {
                let mut p = ImProduct::new(m, n_signed, f_sig_hz, f_lo_hz);
                p.in_band = is_in_band(p.freq_hz, if_center_hz, if_passband_hz);
                out.push(SpurEntry {
                    product: p,
                    desired: m == 1 && n_signed == -1,
                });
            }
        }
    }
    Ok(out)
}

/// Spur / product table as CSV: m, n, freq_hz, order, in_band, desired.
pub fn spurs_to_csv(entries: &[SpurEntry]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    w.write_record(["m", "n", "freq_hz", "order", "in_band", "desired"])
        .map_err(io)?;
    for e in entries {
        let p = &e.product;
        w.write_record([
            p.m.to_string(),
            p.n.to_string(),
            p.freq_hz.to_string(),
            p.order.to_string(),
            p.in_band.to_string(),
            e.desired.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::If1Side;
    use proptest::prelude::*;

    const MHZ: f64 = 1e6;

    fn freqs(p: &[ImProduct]) -> Vec<f64> {
        p.iter().map(|p| p.freq_hz).collect()
    }

    fn has(p: &[ImProduct], f: f64) -> bool {
        p.iter().any(|p| same_freq(p.freq_hz, f))
    }

    #[test]
    fn third_order_products_next_to_tones() {
        let p = two_tone_products(3300.0 * MHZ, 3301.0 * MHZ, 3).unwrap();
        assert!(has(&p, 3299.0 * MHZ));
        assert!(has(&p, 3302.0 * MHZ));
        let im3: Vec<&ImProduct> = p
            .iter()
            .filter(|p| p.order == 3 && (p.freq_hz - 3300e6).abs() < 10e6)
            .collect();
        assert_eq!(im3.len(), 2);
        assert!(p.windows(2).all(|w| w[0].freq_hz < w[1].freq_hz));
    }

    #[test]
    fn second_order_products_far_away() {
        let p = two_tone_products(3300.0 * MHZ, 3301.0 * MHZ, 2).unwrap();
        assert!(has(&p, 1.0 * MHZ));
        assert!(has(&p, 6601.0 * MHZ));
        assert!(has(&p, 6600.0 * MHZ)); // 2f1 harmonic
        let flagged = in_band(&p, 3300.5 * MHZ, 5.0 * MHZ).unwrap();
        assert!(flagged.iter().all(|p| !p.in_band));
    }

    #[test]
    fn swap_gives_same_set() {
        let a = two_tone_products(3300.0 * MHZ, 3301.0 * MHZ, 5).unwrap();
        let b = two_tone_products(3301.0 * MHZ, 3300.0 * MHZ, 5).unwrap();
        assert_eq!(freqs(&a), freqs(&b));
    }

    #[test]
    fn product_errors() {
        assert!(two_tone_products(1e9, 1e9, 3).is_err());
        assert!(two_tone_products(1e9, 2e9, 1).is_err());
        assert!(two_tone_products(-1e9, 2e9, 3).is_err());
    }

    #[test]
    fn band_flags() {
        let p = two_tone_products(3300.0 * MHZ, 3301.0 * MHZ, 3).unwrap();
        let f = in_band(&p, 3300.5 * MHZ, 5.0 * MHZ).unwrap();
        let get = |hz: f64| f.iter().find(|p| same_freq(p.freq_hz, hz)).unwrap().in_band;
        assert!(get(3299.0 * MHZ));
        assert!(get(3302.0 * MHZ));
        assert!(!get(6601.0 * MHZ));
        // closed interval
        let edge = ImProduct {
            m: 1,
            n: 0,
            freq_hz: 3303.0 * MHZ,
            order: 1,
            in_band: false,
        };
        assert!(in_band(&[edge], 3300.5 * MHZ, 5.0 * MHZ).unwrap()[0].in_band);
        assert!(in_band(&[edge], 3300.5 * MHZ, 0.0).is_err());
    }

    #[test]
    fn im3_levels() {
        assert_eq!(im3_level(-32.0, -32.0, 0.0).unwrap(), (-96.0, -96.0));
        assert_eq!(im3_level(7.0, 7.0, 7.0).unwrap(), (7.0, 7.0));
        let (low, high) = im3_level(-32.0, -92.0, 0.0).unwrap();
        assert_eq!(low, 2.0 * -32.0 + -92.0);
        assert_eq!(high, 2.0 * -92.0 + -32.0);
        assert!(im3_level(0.0, 0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn plan_table_reference() {
        let plan = FrequencyPlan::reference();
        let t = frequency_plan_table(&plan, 3300.0 * MHZ).unwrap();
        assert_eq!(t.lo1_hz, 3900.0 * MHZ);
        assert_eq!(t.image1_hz, 4500.0 * MHZ);
        assert_eq!(t.lo2_hz, 540.0 * MHZ);
        assert_eq!(t.if2_hz, 60.0 * MHZ);
        assert_eq!(t.image2_hz, 480.0 * MHZ);
        assert_eq!(frequency_plan_table(&plan, 3100.0 * MHZ).unwrap().lo1_hz, 3700.0 * MHZ);
        assert_eq!(frequency_plan_table(&plan, 3500.0 * MHZ).unwrap().lo1_hz, 4100.0 * MHZ);
        assert!(frequency_plan_table(&plan, 3600.0 * MHZ).is_err());
    }

    #[test]
    fn plan_table_low_side() {
        let plan = FrequencyPlan::new((3.1e9, 3.5e9), Lo1Mode::LowSide, 540e6, 60e6, If1Side::Sum, 5e6).unwrap();
        let t = frequency_plan_table(&plan, 3300.0 * MHZ).unwrap();
        assert_eq!(t.lo1_hz, 2700.0 * MHZ);
        assert_eq!(t.image1_hz, 2100.0 * MHZ);
    }

    #[test]
    fn spur_table_desired_product() {
        let t = mixer_spur_table(3300.0 * MHZ, 3900.0 * MHZ, 3, 3, 600.0 * MHZ, 5.0 * MHZ).unwrap();
        assert_eq!(t.len(), 2 * 3 * 3);
        let desired: Vec<&SpurEntry> = t.iter().filter(|e| e.desired).collect();
        assert_eq!(desired.len(), 1);
        assert_eq!(desired[0].product.freq_hz, 600.0 * MHZ);
        assert!(desired[0].product.in_band);
        assert_eq!((desired[0].product.m, desired[0].product.n), (1, -1));
    }

    #[test]
    fn spur_table_degenerate_lo() {
        let t = mixer_spur_table(3900.0 * MHZ, 3900.0 * MHZ, 1, 1, 600.0 * MHZ, 5.0 * MHZ).unwrap();
        let f: Vec<f64> = t.iter().map(|e| e.product.freq_hz).collect();
        assert_eq!(f, vec![7800.0 * MHZ, 0.0]);
        assert!(t.iter().all(|e| !e.product.in_band));
        assert!(mixer_spur_table(1.0, 2.0, 0, 1, 1.0, 1.0).is_err());
    }

    #[test]
    fn spur_csv_header() {
        let t = mixer_spur_table(3300.0 * MHZ, 3900.0 * MHZ, 1, 1, 600.0 * MHZ, 5.0 * MHZ).unwrap();
        let csv = spurs_to_csv(&t).unwrap();
        assert_eq!(csv.lines().next(), Some("m,n,freq_hz,order,in_band,desired"));
        assert!(csv.contains("1,-1,600000000,2,true,true"));
    }

    proptest! {
        #[test]
        fn spur_count_bound(m in 1u32..6, n in 1u32..6, fs in 1e8f64..1e10, fl in 1e8f64..1e10) {
            prop_assert_eq!(mixer_spur_table(fs, fl, m, n, 6e8, 5e6).unwrap().len(), (2 * m * n) as usize);
        }

        #[test]
        fn products_symmetric(f1 in 1e6f64..1e10, df in 1e3f64..1e8, order in 2u32..6) {
            let a = two_tone_products(f1, f1 + df, order).unwrap();
            let b = two_tone_products(f1 + df, f1, order).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(same_freq(x.freq_hz, y.freq_hz));
            }
        }

        #[test]
        fn difference_products_translate(f1 in 1e8f64..1e9, df in 1e4f64..1e6, shift in 0.0f64..1e9) {
            let a = two_tone_products(f1, f1 + df, 3).unwrap();
            let b = two_tone_products(f1 + shift, f1 + df + shift, 3).unwrap();
            // m + n = 0: pure difference terms do not move with a common shift
            for p in a.iter().filter(|p| p.m + p.n == 0) {
                prop_assert!(b.iter().any(|q| q.m + q.n == 0 && (q.freq_hz - p.freq_hz).abs() < 1e-3));
            }
        }

        #[test]
        fn flags_reproducible(center in 1e9f64..4e9, pb in 1e5f64..1e8, f1 in 1e9f64..4e9, df in 1e5f64..1e7) {
            let p = two_tone_products(f1, f1 + df, 3).unwrap();
            for q in in_band(&p, center, pb).unwrap() {
                prop_assert_eq!(q.in_band, (q.freq_hz - center).abs() <= pb / 2.0);
            }
        }

        #[test]
        fn equal_tone_slope_and_sfdr(p in -120.0f64..0.0, iip3 in -20.0f64..40.0, floor in -180.0f64..-80.0) {
            let (a, _) = im3_level(p, p, iip3).unwrap();
            let (b, _) = im3_level(p + 1.0, p + 1.0, iip3).unwrap();
            prop_assert!((b - a - 3.0).abs() < 1e-9);
            // drive where IM3 reaches the floor, measured from the floor
            let p_star = (floor + 2.0 * iip3) / 3.0;
            let range = p_star - floor;
            prop_assert!((range - 2.0 / 3.0 * (iip3 - floor)).abs() < 1e-9);
            let (at_floor, _) = im3_level(p_star, p_star, iip3).unwrap();
            prop_assert!((at_floor - floor).abs() < 1e-9);
        }
    }
}
