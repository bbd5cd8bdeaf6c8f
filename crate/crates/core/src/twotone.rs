//! Time-domain two-tone oracle.
//!
//! Two coherent tones are synthesised, pushed sample by sample through a
//! memoryless polynomial `y = a1·x + a3·x³` (or a chain of them), and the
//! tone and IM3 bins are read off with single-bin DFTs. Nothing here uses
//! the closed-form cascade or IM3 formulas, which is what makes it usable
//! as an independent check on them.
//!
//! Tones and products must sit exactly on DFT bins, so no window is applied
//! and there is no leakage. The sum over samples is split into fixed-size
//! blocks whose partial sums are added in block order, so the result does
//! not depend on how blocks are scheduled across threads.

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::units::{dbm_to_watts, lin_to_db, watts_to_dbm, Level};
use serde::Serialize;
use std::f64::consts::PI;

pub const REF_IMPEDANCE_OHM: f64 = 50.0;
/// Largest fundamental gain change (compression or expansion) accepted as
/// small-signal drive.
pub const COMPRESSION_LIMIT_DB: f64 = 0.1;
/// Allowed deviation of the measured IM3 slope from 3 dB/dB in
/// [`extract_ip3`].
pub const SLOPE_TOLERANCE: f64 = 0.05;
/// Floor applied to measured bin powers so an exactly empty bin stays
/// finite.
pub const MEASUREMENT_FLOOR_DBM: f64 = -400.0;

const BLOCK: usize = 4096;

/// A memoryless transfer characteristic.
pub trait Memoryless: Sync {
    fn apply(&self, x: f64) -> f64;
    /// Linear and cubic coefficients of the small-signal expansion.
    fn cubic_terms(&self) -> (f64, f64);
    /// Highest harmonic order the characteristic can generate.
    fn max_order(&self) -> u32;
}

/// `y = a1·x + a3·x³`, volts in and out across `ref_impedance_ohm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolyNonlinearity {
    pub a1: f64,
    pub a3: f64,
    pub ref_impedance_ohm: f64,
}

impl PolyNonlinearity {
    pub fn new(a1: f64, a3: f64) -> Result<Self> {
        if !(a1 > 0.0 && a1.is_finite()) || !a3.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "need finite a1 > 0 and finite a3, got a1={a1}, a3={a3}"
            )));
        }
        Ok(PolyNonlinearity {
            a1,
            a3,
            ref_impedance_ohm: REF_IMPEDANCE_OHM,
        })
    }

    /// Peak input amplitude where the extrapolated fundamental and IM3
    /// lines cross: `sqrt(4·a1 / (3·|a3|))`.
    pub fn input_intercept_amplitude(&self) -> Option<f64> {
        intercept_amplitude(self.a1, self.a3)
    }

    pub fn gain_db(&self) -> f64 {
        20.0 * self.a1.log10()
    }

    pub fn iip3_dbm(&self) -> Level {
        cubic_iip3_dbm(self.a1, self.a3, self.ref_impedance_ohm)
    }

    pub fn oip3_dbm(&self) -> Level {
        self.iip3_dbm().map(|i| i + self.gain_db())
    }
}

impl Memoryless for PolyNonlinearity {
    #[inline]
    fn apply(&self, x: f64) -> f64 {
        x * (self.a1 + self.a3 * x * x)
    }

    fn cubic_terms(&self) -> (f64, f64) {
        (self.a1, self.a3)
    }

    fn max_order(&self) -> u32 {
        if self.a3 == 0.0 {
            1
        } else {
            3
        }
    }
}

/// Stages applied in sequence; the true composition, including the 5th and
/// higher order terms it creates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolyChain(pub Vec<PolyNonlinearity>);

impl Memoryless for PolyChain {
    #[inline]
    fn apply(&self, x: f64) -> f64 {
        self.0.iter().fold(x, |v, s| s.apply(v))
    }

    fn cubic_terms(&self) -> (f64, f64) {
        self.0
            .iter()
            .fold((1.0, 0.0), |(c1, c3), s| (s.a1 * c1, s.a1 * c3 + s.a3 * c1 * c1 * c1))
    }

    fn max_order(&self) -> u32 {
        self.0.iter().map(|s| s.max_order()).product()
    }
}

fn intercept_amplitude(a1: f64, a3: f64) -> Option<f64> {
    (a3 != 0.0).then(|| (4.0 * a1 / (3.0 * a3.abs())).sqrt())
}

/// Input intercept of a cubic characteristic, dBm.
pub fn cubic_iip3_dbm(c1: f64, c3: f64, r_ohm: f64) -> Level {
    match intercept_amplitude(c1, c3) {
        Some(a) => Level::Finite(watts_to_dbm(a * a / (2.0 * r_ohm))),
        None => Level::Unbounded,
    }
}

/// Peak volts of a sinusoid carrying `p_dbm` into the reference load.
pub fn dbm_to_peak_volts(p_dbm: f64) -> f64 {
    (2.0 * REF_IMPEDANCE_OHM * dbm_to_watts(p_dbm)).sqrt()
}

/// Cubic model with the given small-signal gain and output intercept.
pub fn design_nonlinearity(gain_db: f64, oip3_dbm: f64) -> Result<PolyNonlinearity> {
    if !oip3_dbm.is_finite() || !gain_db.is_finite() {
        return Err(Error::InvalidArgument(
            "design_nonlinearity needs finite gain and OIP3".into(),
        ));
    }
    let a1 = 10f64.powf(gain_db / 20.0);
    let a_oip3 = dbm_to_peak_volts(oip3_dbm);
    PolyNonlinearity::new(a1, -4.0 * a1.powi(3) / (3.0 * a_oip3 * a_oip3))
}

/// Sample rate and record length. The bin spacing is
/// `sample_rate_hz / num_samples`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleGrid {
    pub sample_rate_hz: f64,
    pub num_samples: usize,
}

impl SampleGrid {
    /// 1.024 GHz, 2^20 samples: 976.5625 Hz bins, so any whole-MHz tone
    /// lands on a bin.
    pub fn reference() -> Self {
        SampleGrid {
            sample_rate_hz: 1.024e9,
            num_samples: 1 << 20,
        }
    }

    /// 1 Hz bins over 65 536 samples; tones are given as bin numbers. The
    /// model is memoryless, so results carry over to any frequency scale.
    pub fn scaled() -> Self {
        SampleGrid {
            sample_rate_hz: 65_536.0,
            num_samples: 1 << 16,
        }
    }

    pub fn bin_hz(&self) -> f64 {
        self.sample_rate_hz / self.num_samples as f64
    }

    fn bin_of(&self, freq_hz: f64) -> Result<u64> {
        let k = freq_hz / self.bin_hz();
        if (k - k.round()).abs() > 1e-6 || k.round() < 1.0 {
            return Err(Error::Sampling(format!(
                "{freq_hz} Hz is not a positive integer multiple of the {} Hz bin spacing",
                self.bin_hz()
            )));
        }
        Ok(k.round() as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinPower {
    pub freq_hz: f64,
    pub power_dbm: f64,
}

/// Output spectrum at the four two-tone bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToneMeasurement {
    pub f1: BinPower,
    pub f2: BinPower,
    /// At `2·f1 − f2`.
    pub im3_low: BinPower,
    /// At `2·f2 − f1`.
    pub im3_high: BinPower,
    /// Mean output power over the record.
    pub total_power_dbm: f64,
    pub sample_rate_hz: f64,
    pub num_samples: usize,
}

impl ToneMeasurement {
    /// Mean of the two fundamentals, dB domain.
    pub fn fundamental_dbm(&self) -> f64 {
        0.5 * (self.f1.power_dbm + self.f2.power_dbm)
    }

    /// Mean of the two IM3 products, dB domain.
    pub fn im3_dbm(&self) -> f64 {
        0.5 * (self.im3_low.power_dbm + self.im3_high.power_dbm)
    }

    pub fn bins(&self) -> [BinPower; 4] {
        [self.f1, self.f2, self.im3_low, self.im3_high]
    }
}

/// Gain change of each fundamental, in dB, predicted from the cubic terms.
fn fundamental_deviation_db(c1: f64, c3: f64, amp1: f64, amp2: f64) -> f64 {
    let dev = |a: f64, b: f64| 20.0 * (1.0 + c3 / c1 * (0.75 * a * a + 1.5 * b * b)).abs().log10();
    dev(amp1, amp2).abs().max(dev(amp2, amp1).abs())
}

/// Equal-power two-tone test.
pub fn simulate_two_tone<M: Memoryless>(
    model: &M,
    f1_hz: f64,
    f2_hz: f64,
    p_per_tone_dbm: f64,
    grid: SampleGrid,
) -> Result<ToneMeasurement> {
    simulate_two_tone_with(
        model,
        f1_hz,
        f2_hz,
        p_per_tone_dbm,
        p_per_tone_dbm,
        grid,
        Execution::default(),
    )
}

/// Two-tone test with independent tone powers and an explicit execution
/// mode. Output is bit-identical across modes.
pub fn simulate_two_tone_with<M: Memoryless>(
    model: &M,
    f1_hz: f64,
    f2_hz: f64,
    p1_dbm: f64,
    p2_dbm: f64,
    grid: SampleGrid,
    exec: Execution,
) -> Result<ToneMeasurement> {
    let n = grid.num_samples;
    if n < 16 || !(grid.sample_rate_hz > 0.0) {
        return Err(Error::Sampling(format!(
            "invalid grid: {n} samples at {} Hz",
            grid.sample_rate_hz
        )));
    }
    if f1_hz == f2_hz {
        return Err(Error::InvalidArgument("degenerate tones: f1 == f2".into()));
    }
    let im3_low_hz = 2.0 * f1_hz - f2_hz;
    let im3_high_hz = 2.0 * f2_hz - f1_hz;
    let bins = [
        grid.bin_of(f1_hz)?,
        grid.bin_of(f2_hz)?,
        grid.bin_of(im3_low_hz)?,
        grid.bin_of(im3_high_hz)?,
    ];
    let nyquist = grid.sample_rate_hz / 2.0;
    let highest = model.max_order() as f64 * f1_hz.max(f2_hz);
    if highest >= nyquist {
        return Err(Error::Sampling(format!(
            "order-{} products reach {highest} Hz, at or above Nyquist {nyquist} Hz (aliasing)",
            model.max_order()
        )));
    }

    let (amp1, amp2) = (dbm_to_peak_volts(p1_dbm), dbm_to_peak_volts(p2_dbm));
    let (c1, c3) = model.cubic_terms();
    let dev = fundamental_deviation_db(c1, c3, amp1, amp2);
    if dev > COMPRESSION_LIMIT_DB {
        return Err(Error::Overdriven {
            compression_db: dev,
            limit_db: COMPRESSION_LIMIT_DB,
        });
    }

    let (cos, sin) = twiddles(n);
    let nu = n as u64;
    let n_blocks = n.div_ceil(BLOCK);
    let partials = par::map_range(n_blocks, exec, |b| {
        let start = b * BLOCK;
        let end = (start + BLOCK).min(n);
        let mut acc = [(0.0f64, 0.0f64); 4];
        let mut energy = 0.0;
        for i in start..end {
            let i = i as u64;
            let x = amp1 * cos[((bins[0] * i) % nu) as usize] + amp2 * cos[((bins[1] * i) % nu) as usize];
            let y = model.apply(x);
            energy += y * y;
            for (slot, &k) in acc.iter_mut().zip(&bins) {
                let idx = ((k * i) % nu) as usize;
                slot.0 += y * cos[idx];
                slot.1 -= y * sin[idx];
            }
        }
        (acc, energy)
    });
    let mut acc = [(0.0f64, 0.0f64); 4];
    let mut energy = 0.0;
    for (part, e) in partials {
        for (a, p) in acc.iter_mut().zip(part) {
            a.0 += p.0;
            a.1 += p.1;
        }
        energy += e;
    }

    let r = REF_IMPEDANCE_OHM;
    let power = |(re, im): (f64, f64)| {
        let amp = 2.0 * re.hypot(im) / n as f64;
        watts_to_dbm(amp * amp / (2.0 * r)).max(MEASUREMENT_FLOOR_DBM)
    };
    let freqs = [f1_hz, f2_hz, im3_low_hz, im3_high_hz];
    let bp = |i: usize| BinPower {
        freq_hz: freqs[i],
        power_dbm: power(acc[i]),
    };
    Ok(ToneMeasurement {
        f1: bp(0),
        f2: bp(1),
        im3_low: bp(2),
        im3_high: bp(3),
        total_power_dbm: watts_to_dbm(energy / n as f64 / r).max(MEASUREMENT_FLOOR_DBM),
        sample_rate_hz: grid.sample_rate_hz,
        num_samples: n,
    })
}

fn twiddles(n: usize) -> (Vec<f64>, Vec<f64>) {
    (0..n)
        .map(|i| {
            let (s, c) = (2.0 * PI * i as f64 / n as f64).sin_cos();
            (c, s)
        })
        .unzip()
}

/// Intercept extracted from two equal-tone measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ip3Estimate {
    pub iip3_dbm: f64,
    pub oip3_dbm: f64,
    pub fundamental_slope: f64,
    pub im3_slope: f64,
}

/// Fits the slope-1 fundamental and slope-3 IM3 lines through two drive
/// levels and returns their intersection. Per point the intercept is
/// `p + (P_fund − P_im3)/2`; the two points are averaged. `gain_db` refers
/// the result to the output.
pub fn extract_ip3(
    meas_low: &ToneMeasurement,
    meas_high: &ToneMeasurement,
    p_low_dbm: f64,
    p_high_dbm: f64,
    gain_db: f64,
) -> Result<Ip3Estimate> {
    if !(p_low_dbm < p_high_dbm) {
        return Err(Error::InvalidArgument(format!(
            "drive levels must ascend, got {p_low_dbm} then {p_high_dbm} dBm"
        )));
    }
    let span = p_high_dbm - p_low_dbm;
    let im3_slope = (meas_high.im3_dbm() - meas_low.im3_dbm()) / span;
    let fundamental_slope = (meas_high.fundamental_dbm() - meas_low.fundamental_dbm()) / span;
    if !((im3_slope - 3.0).abs() <= SLOPE_TOLERANCE) {
        return Err(Error::SlopeOutOfRegion {
            slope: im3_slope,
            tolerance: SLOPE_TOLERANCE,
        });
    }
    let point = |m: &ToneMeasurement, p: f64| p + (m.fundamental_dbm() - m.im3_dbm()) / 2.0;
    let iip3 = 0.5 * (point(meas_low, p_low_dbm) + point(meas_high, p_high_dbm));
    Ok(Ip3Estimate {
        iip3_dbm: iip3,
        oip3_dbm: iip3 + gain_db,
        fundamental_slope,
        im3_slope,
    })
}

/// Slopes between consecutive drive levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentSlope {
    pub from_dbm: f64,
    pub to_dbm: f64,
    pub fundamental: f64,
    pub im3: f64,
}

pub fn slope_scan<M: Memoryless>(
    model: &M,
    f1_hz: f64,
    f2_hz: f64,
    drive_levels_dbm: &[f64],
    grid: SampleGrid,
) -> Result<Vec<SegmentSlope>> {
    if drive_levels_dbm.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "slope scan needs at least 3 drive levels, got {}",
            drive_levels_dbm.len()
        )));
    }
    if drive_levels_dbm.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("drive levels must be strictly ascending".into()));
    }
    let meas = drive_levels_dbm
        .iter()
        .map(|&p| simulate_two_tone(model, f1_hz, f2_hz, p, grid))
        .collect::<Result<Vec<_>>>()?;
    Ok(drive_levels_dbm
        .windows(2)
        .zip(meas.windows(2))
        .map(|(p, m)| {
            let span = p[1] - p[0];
            SegmentSlope {
                from_dbm: p[0],
                to_dbm: p[1],
                fundamental: (m[1].fundamental_dbm() - m[0].fundamental_dbm()) / span,
                im3: (m[1].im3_dbm() - m[0].im3_dbm()) / span,
            }
        })
        .collect())
}

/// Output-referred gain measured from a tone, dB.
pub fn measured_gain_db(meas: &ToneMeasurement, p_in_dbm: f64) -> f64 {
    meas.f1.power_dbm - p_in_dbm
}

/// Power ratio helper used by callers converting measured bins.
pub fn ratio_db(a_dbm: f64, b_dbm: f64) -> f64 {
    lin_to_db(dbm_to_watts(a_dbm) / dbm_to_watts(b_dbm))
}
