//! Closed-form cascade analysis.
//!
//! Noise uses the Friis form with the `(F_k - 1)` correction on every stage
//! after the first:
//!
//! ```text
//! F = F1 + (F2 - 1)/G1 + (F3 - 1)/(G1 G2) + ...
//! ```
//!
//! Without the `- 1` terms a noiseless through-line would add noise.
//!
//! Third-order intercepts combine in linear power units, input referred:
//!
//! ```text
//! 1/P_cas = 1/P_1 + G1/P_2 + G1 G2/P_3 + ...
//! ```
//!
//! which is the power-unit form of summing squared reciprocal intercept
//! amplitudes. Stages without an intercept contribute nothing; a chain with
//! none at all has an unbounded intercept.

use crate::error::{Error, Result};
use crate::model::{resolve_stage_shifted, Chain, OperatingPoint, ResolvedStage};
use crate::units::{lin_to_db, mw_to_dbm, Level, BOLTZMANN, CELSIUS_OFFSET, T0_KELVIN};
use serde::Serialize;

/// Default analysis bandwidth when the chain carries no plan.
pub const DEFAULT_BANDWIDTH_HZ: f64 = 5e6;

/// Thermal noise reference for the floor calculation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseModel {
    pub ref_temp_k: f64,
    pub bandwidth_hz: f64,
    /// Source temperature used for kTB; set from the operating point.
    pub ambient_temp_k: f64,
    /// Operating temperatures the stage models are valid over, °C.
    pub temp_range_degc: (f64, f64),
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            ref_temp_k: T0_KELVIN,
            bandwidth_hz: DEFAULT_BANDWIDTH_HZ,
            ambient_temp_k: T0_KELVIN,
            temp_range_degc: (-55.0, 125.0),
        }
    }
}

impl NoiseModel {
    pub fn new(bandwidth_hz: f64) -> Result<Self> {
        let m = NoiseModel {
            bandwidth_hz,
            ..Default::default()
        };
        m.check()?;
        Ok(m)
    }

    /// Bandwidth taken from the chain's passband, else the 5 MHz default.
    pub fn for_chain(chain: &Chain) -> Self {
        NoiseModel {
            bandwidth_hz: chain.plan.as_ref().map_or(DEFAULT_BANDWIDTH_HZ, |p| p.passband_hz),
            ..Default::default()
        }
    }

    pub fn with_temp_range(mut self, min_degc: f64, max_degc: f64) -> Result<Self> {
        if !(min_degc < max_degc) || min_degc + CELSIUS_OFFSET <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "temperature range [{min_degc}, {max_degc}] °C is empty or below absolute zero"
            )));
        }
        self.temp_range_degc = (min_degc, max_degc);
        Ok(self)
    }

    /// Copy with the ambient temperature set, after checking it is within
    /// the validity range.
    pub fn at_temperature(&self, temp_degc: f64) -> Result<Self> {
        let (lo, hi) = self.temp_range_degc;
        if !(temp_degc >= lo && temp_degc <= hi) {
            return Err(Error::TemperatureOutOfRange {
                temp_degc,
                min_degc: lo,
                max_degc: hi,
            });
        }
        Ok(NoiseModel {
            ambient_temp_k: temp_degc + CELSIUS_OFFSET,
            ..*self
        })
    }

    fn check(&self) -> Result<()> {
        for (name, v) in [
            ("bandwidth_hz", self.bandwidth_hz),
            ("ref_temp_k", self.ref_temp_k),
            ("ambient_temp_k", self.ambient_temp_k),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "noise model {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Sum of stage gains in dB. Empty list → 0 dB.
pub fn cascade_gain(resolved: &[ResolvedStage]) -> f64 {
    let mut sum = DbSum::default();
    for s in resolved {
        sum.add(s.gain_db);
    }
    sum.value()
}

/// Compensated (Neumaier) sum, so dB totals do not depend on stage order
/// and land on the nearest double to the exact sum for short chains.
#[derive(Debug, Clone, Copy, Default)]
struct DbSum {
    sum: f64,
    comp: f64,
}

impl DbSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        self.comp += if self.sum.abs() >= x.abs() {
            (self.sum - t) + x
        } else {
            (x - t) + self.sum
        };
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Friis cascade. Returns `(F, NF_dB)`.
pub fn cascade_noise_figure(resolved: &[ResolvedStage]) -> Result<(f64, f64)> {
    if resolved.is_empty() {
        return Err(Error::EmptyChain);
    }
    let mut acc = Accumulator::default();
    for s in resolved {
        acc.push(s);
    }
    Ok((acc.noise_factor, lin_to_db(acc.noise_factor)))
}

/// Input-referred cascaded IIP3, dBm.
pub fn cascade_iip3(resolved: &[ResolvedStage]) -> Result<Level> {
    if resolved.is_empty() {
        return Err(Error::EmptyChain);
    }
    let mut acc = Accumulator::default();
    for s in resolved {
        acc.push(s);
    }
    Ok(acc.iip3_dbm())
}

/// kTB noise in the model bandwidth at the ambient temperature, plus the
/// cascade noise figure.
pub fn noise_floor(model: &NoiseModel, total_nf_db: f64) -> f64 {
    let ktb_mw = BOLTZMANN * model.ambient_temp_k * model.bandwidth_hz * 1e3;
    mw_to_dbm(ktb_mw) + total_nf_db
}

/// SFDR = (2/3)(IIP3 − floor). An unbounded intercept gives an unbounded
/// range.
pub fn sfdr(iip3_dbm: Level, noise_floor_dbm: f64) -> Level {
    iip3_dbm.map(|i| 2.0 / 3.0 * (i - noise_floor_dbm))
}

/// Running Friis / IIP3 state; totals and per-stage rows both come from
/// this loop so row k is bit-identical to analysing the k-stage prefix.
#[derive(Debug, Clone, Copy)]
struct Accumulator {
    stages: usize,
    gain_db: DbSum,
    gain_lin: f64,
    noise_factor: f64,
    inv_iip3_per_mw: f64,
}

impl Default for Accumulator {
    fn default() -> Self {
        Accumulator {
            stages: 0,
            gain_db: DbSum::default(),
            gain_lin: 1.0,
            noise_factor: 1.0,
            inv_iip3_per_mw: 0.0,
        }
    }
}

impl Accumulator {
    fn push(&mut self, s: &ResolvedStage) {
        self.noise_factor = if self.stages == 0 {
            s.noise_factor_lin
        } else {
            self.noise_factor + (s.noise_factor_lin - 1.0) / self.gain_lin
        };
        if let Some(p_mw) = s.iip3_mw {
            self.inv_iip3_per_mw += self.gain_lin / p_mw;
        }
        self.gain_db.add(s.gain_db);
        self.gain_lin *= s.gain_lin;
        self.stages += 1;
    }

    fn iip3_dbm(&self) -> Level {
        if self.inv_iip3_per_mw > 0.0 {
            Level::Finite(-lin_to_db(self.inv_iip3_per_mw))
        } else {
            Level::Unbounded
        }
    }
}

/// Cumulative budget after one stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeRow {
    pub label: String,
    pub cum_gain_db: f64,
    pub cum_nf_db: f64,
    pub cum_iip3_dbm: Level,
    pub cum_sfdr_db: Level,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeResult {
    pub total_gain_db: f64,
    pub total_nf_db: f64,
    pub total_noise_factor_lin: f64,
    pub total_iip3_dbm: Level,
    pub total_oip3_dbm: Level,
    pub noise_floor_dbm: f64,
    pub sfdr_db: Level,
    /// Signal level at the chain output for the operating point's drive.
    pub output_power_dbm: f64,
    pub rows: Vec<CascadeRow>,
}

/// Resolves every stage of `chain` at `point`, after checking the point
/// against the plan band (when the chain has a plan).
pub fn resolve_chain(chain: &Chain, point: &OperatingPoint) -> Result<Vec<ResolvedStage>> {
    resolve_chain_shifted(chain, point, |_| 0.0)
}

pub(crate) fn resolve_chain_shifted(
    chain: &Chain,
    point: &OperatingPoint,
    shift: impl Fn(usize) -> f64,
) -> Result<Vec<ResolvedStage>> {
    if let Some(plan) = &chain.plan {
        plan.check_rf(point.rf_hz)?;
    }
    chain
        .stages
        .iter()
        .enumerate()
        .map(|(i, s)| resolve_stage_shifted(s, point, shift(i)))
        .collect()
}

/// Full budget at an operating point.
pub fn analyze(chain: &Chain, point: &OperatingPoint, model: &NoiseModel) -> Result<CascadeResult> {
    let model = model.at_temperature(point.temp_degc)?;
    let resolved = resolve_chain(chain, point)?;
    analyze_resolved(&resolved, &model, point.p_in_dbm)
}

/// Budget over already-resolved stages; `model.ambient_temp_k` must
/// already reflect the operating temperature.
pub fn analyze_resolved(resolved: &[ResolvedStage], model: &NoiseModel, p_in_dbm: f64) -> Result<CascadeResult> {
    model.check()?;
    let floor_0 = noise_floor(model, 0.0);
    let mut acc = Accumulator::default();
    let mut rows = Vec::with_capacity(resolved.len());
    for s in resolved {
        acc.push(s);
        let nf = lin_to_db(acc.noise_factor);
        let iip3 = acc.iip3_dbm();
        rows.push(CascadeRow {
            label: s.label.clone(),
            cum_gain_db: acc.gain_db.value(),
            cum_nf_db: nf,
            cum_iip3_dbm: iip3,
            cum_sfdr_db: sfdr(iip3, floor_0 + nf),
        });
    }
    let total_nf_db = lin_to_db(acc.noise_factor);
    let total_iip3_dbm = acc.iip3_dbm();
    let noise_floor_dbm = floor_0 + total_nf_db;
    Ok(CascadeResult {
        total_gain_db: acc.gain_db.value(),
        total_nf_db,
        total_noise_factor_lin: acc.noise_factor,
        total_iip3_dbm,
        total_oip3_dbm: total_iip3_dbm.map(|i| i + acc.gain_db.value()),
        noise_floor_dbm,
        sfdr_db: sfdr(total_iip3_dbm, noise_floor_dbm),
        output_power_dbm: p_in_dbm + acc.gain_db.value(),
        rows,
    })
}

/// One stage's share of the cascaded-IIP3 reciprocal sum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contribution {
    pub label: String,
    /// `(Π_{j<k} G_j) / P_k`, 1/mW.
    pub term_per_mw: f64,
    pub share: f64,
}

/// Ranks nonlinear stages by their contribution to `1/P_cas`, largest
/// first. Shares sum to one.
pub fn bottleneck_report(resolved: &[ResolvedStage]) -> Result<Vec<Contribution>> {
    let mut gain = 1.0;
    let mut terms = Vec::new();
    for s in resolved {
        if let Some(p) = s.iip3_mw {
            terms.push((s.label.clone(), gain / p));
        }
        gain *= s.gain_lin;
    }
    if terms.is_empty() {
        return Err(Error::NoNonlinearStages);
    }
    let total: f64 = terms.iter().map(|t| t.1).sum();
    let mut out: Vec<Contribution> = terms
        .into_iter()
        .map(|(label, term)| Contribution {
            label,
            term_per_mw: term,
            share: term / total,
        })
        .collect();
    out.sort_by(|a, b| b.share.total_cmp(&a.share));
    Ok(out)
}

/// Per-stage budget as CSV: label, cum_gain_db, cum_nf_db, cum_iip3_dbm,
/// cum_sfdr_db.
pub fn rows_to_csv(result: &CascadeResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    w.write_record(["label", "cum_gain_db", "cum_nf_db", "cum_iip3_dbm", "cum_sfdr_db"])
        .map_err(io)?;
    for r in &result.rows {
        w.write_record([
            r.label.clone(),
            r.cum_gain_db.to_string(),
            r.cum_nf_db.to_string(),
            r.cum_iip3_dbm.to_string(),
            r.cum_sfdr_db.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
