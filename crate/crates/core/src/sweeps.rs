//! Batch evaluation: operating-point grids, tolerance corners, Monte Carlo
//! and attenuator calibration.
//!
//! Gain, NF and IIP3 do not depend on drive level (there is no compression
//! model); the power axis only moves output power and interferer margins.

use crate::cascade::{analyze, analyze_resolved, resolve_chain_shifted, CascadeResult, NoiseModel};
use crate::error::{Error, Result};
use crate::intermod::{im3_level, is_in_band};
use crate::model::{Chain, OperatingPoint, ATTENUATOR_MAX_DB, ATTENUATOR_STEP_DB};
use crate::par::{self, Execution};
use crate::units::{Level, REF_TEMP_DEGC};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterfererGrid {
    pub offset_hz: f64,
    pub levels_dbm: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    pub freqs_hz: Vec<f64>,
    pub temps_degc: Vec<f64>,
    pub powers_dbm: Vec<f64>,
    pub interferer: Option<InterfererGrid>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            freqs_hz: vec![3.1e9, 3.3e9, 3.5e9],
            temps_degc: vec![-40.0, 25.0, 85.0],
            powers_dbm: (0..10).map(|i| -122.0 + 10.0 * i as f64).collect(),
            interferer: Some(InterfererGrid {
                offset_hz: 1e6,
                levels_dbm: vec![-92.0, -82.0, -32.0],
            }),
        }
    }
}

impl SweepGrid {
    pub fn check(&self) -> Result<()> {
        let lists = [
            ("freqs_hz", &self.freqs_hz),
            ("temps_degc", &self.temps_degc),
            ("powers_dbm", &self.powers_dbm),
        ];
        for (name, list) in lists {
            if list.is_empty() {
                return Err(Error::InvalidArgument(format!("sweep grid {name} is empty")));
            }
            if list.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "sweep grid {name} has a non-finite value"
                )));
            }
        }
        if let Some(i) = &self.interferer {
            if i.levels_dbm.is_empty() || !(i.offset_hz > 0.0) {
                return Err(Error::InvalidArgument(
                    "interferer grid needs a positive offset and at least one level".into(),
                ));
            }
        }
        Ok(())
    }

    /// Operating points in row order: frequency-major, then temperature,
    /// power and interferer level.
    pub fn points(&self) -> Vec<OperatingPoint> {
        let mut out = Vec::new();
        for &f in &self.freqs_hz {
            for &t in &self.temps_degc {
                for &p in &self.powers_dbm {
                    let base = OperatingPoint::new(f, t, p);
                    match &self.interferer {
                        Some(i) => out.extend(i.levels_dbm.iter().map(|&l| base.with_interferer(i.offset_hz, l))),
                        None => out.push(base),
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub rf_hz: f64,
    pub temp_degc: f64,
    pub p_in_dbm: f64,
    pub interferer_offset_hz: Option<f64>,
    pub interferer_dbm: Option<f64>,
    pub total_gain_db: f64,
    pub total_nf_db: f64,
    pub total_iip3_dbm: Level,
    pub noise_floor_dbm: f64,
    pub sfdr_db: Level,
    pub output_power_dbm: f64,
    pub interferer_margin_db: Option<Level>,
}

fn passband_of(chain: &Chain, model: &NoiseModel) -> f64 {
    chain.plan.as_ref().map_or(model.bandwidth_hz, |p| p.passband_hz)
}

/// Evaluates one operating point into a sweep row.
pub fn evaluate_point(chain: &Chain, point: &OperatingPoint, model: &NoiseModel) -> Result<SweepRow> {
    let r = analyze(chain, point, model)?;
    let margin = point
        .interferer
        .map(|i| {
            interferer_margin(
                &r,
                point.rf_hz,
                point.p_in_dbm,
                i.p_dbm,
                i.offset_hz,
                passband_of(chain, model),
            )
        })
        .transpose()?;
    Ok(SweepRow {
        rf_hz: point.rf_hz,
        temp_degc: point.temp_degc,
        p_in_dbm: point.p_in_dbm,
        interferer_offset_hz: point.interferer.map(|i| i.offset_hz),
        interferer_dbm: point.interferer.map(|i| i.p_dbm),
        total_gain_db: r.total_gain_db,
        total_nf_db: r.total_nf_db,
        total_iip3_dbm: r.total_iip3_dbm,
        noise_floor_dbm: r.noise_floor_dbm,
        sfdr_db: r.sfdr_db,
        output_power_dbm: r.output_power_dbm,
        interferer_margin_db: margin,
    })
}

pub fn run_sweep(chain: &Chain, grid: &SweepGrid, model: &NoiseModel) -> Result<Vec<SweepRow>> {
    run_sweep_with(chain, grid, model, Execution::default())
}

/// Evaluates the full grid. The first failing point (in row order) aborts
/// the sweep, wrapped with that point's description.
pub fn run_sweep_with(chain: &Chain, grid: &SweepGrid, model: &NoiseModel, exec: Execution) -> Result<Vec<SweepRow>> {
    grid.check()?;
    par::try_map(&grid.points(), exec, |p| {
        evaluate_point(chain, p, model).map_err(|e| Error::AtPoint {
            point: p.to_string(),
            source: Box::new(e),
        })
    })
}

/// Main-signal level minus the stronger of the two IM3 products generated by
/// the main signal (at `rf_hz`) and an interferer `offset_hz` above it.
///
/// Both levels are input referred; referring both to the output adds the
/// same gain and leaves the difference unchanged. Both products
/// (`rf − offset`, `rf + 2·offset`) must fall in the passband centred on
/// `rf_hz`, otherwise the margin is undefined. An unbounded intercept gives
/// an unbounded margin.
pub fn interferer_margin(
    result: &CascadeResult,
    rf_hz: f64,
    main_dbm: f64,
    interferer_dbm: f64,
    offset_hz: f64,
    passband_hz: f64,
) -> Result<Level> {
    if !(offset_hz != 0.0 && offset_hz.is_finite()) || !(passband_hz > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "interferer margin needs a non-zero offset and positive passband, got {offset_hz} / {passband_hz} Hz"
        )));
    }
    let products = [rf_hz - offset_hz, rf_hz + 2.0 * offset_hz];
    if let Some(&f) = products.iter().find(|&&f| !is_in_band(f, rf_hz, passband_hz)) {
        return Err(Error::InterfererOutOfBand {
            freq_hz: f,
            passband_hz,
        });
    }
    match result.total_iip3_dbm {
        Level::Unbounded => Ok(Level::Unbounded),
        Level::Finite(iip3) => {
            let (low, high) = im3_level(main_dbm, interferer_dbm, iip3)?;
            Ok(Level::Finite(main_dbm - low.max(high)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstCase {
    pub nominal: CascadeResult,
    pub min_gain: CascadeResult,
    pub max_gain: CascadeResult,
}

/// Nominal plus the two same-direction tolerance corners, each recomputed by
/// a full cascade.
pub fn worst_case(chain: &Chain, point: &OperatingPoint, model: &NoiseModel) -> Result<WorstCase> {
    let m = model.at_temperature(point.temp_degc)?;
    let corner = |sign: f64| {
        let resolved = resolve_chain_shifted(chain, point, |i| sign * chain.stages[i].gain_tol_db)?;
        analyze_resolved(&resolved, &m, point.p_in_dbm)
    };
    Ok(WorstCase {
        nominal: corner(0.0)?,
        min_gain: corner(-1.0)?,
        max_gain: corner(1.0)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McSample {
    pub gain_db: f64,
    pub nf_db: f64,
    pub iip3_dbm: Level,
    pub sfdr_db: Level,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation (n − 1); 0 for a single trial.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(MetricSummary {
            mean,
            std: var.sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McSummary {
    pub trials: usize,
    pub seed: u64,
    pub gain_db: MetricSummary,
    pub nf_db: MetricSummary,
    /// `None` when the chain has no finite intercept.
    pub iip3_dbm: Option<MetricSummary>,
    pub sfdr_db: Option<MetricSummary>,
}

/// Per-trial samples. Trial `i` draws from its own ChaCha stream `i` of the
/// seeded generator, so results are independent of scheduling.
pub fn monte_carlo_samples(
    chain: &Chain,
    point: &OperatingPoint,
    model: &NoiseModel,
    n_trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<McSample>> {
    if n_trials == 0 {
        return Err(Error::InvalidArgument("monte carlo needs at least one trial".into()));
    }
    let m = model.at_temperature(point.temp_degc)?;
    let trials: Vec<u64> = (0..n_trials as u64).collect();
    par::try_map(&trials, exec, |&t| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t);
        let shifts: Vec<f64> = chain
            .stages
            .iter()
            .map(|s| {
                if s.gain_tol_db > 0.0 {
                    rng.random_range(-s.gain_tol_db..=s.gain_tol_db)
                } else {
                    0.0
                }
            })
            .collect();
        let resolved = resolve_chain_shifted(chain, point, |i| shifts[i])?;
        let r = analyze_resolved(&resolved, &m, point.p_in_dbm)?;
        Ok(McSample {
            gain_db: r.total_gain_db,
            nf_db: r.total_nf_db,
            iip3_dbm: r.total_iip3_dbm,
            sfdr_db: r.sfdr_db,
        })
    })
}

pub fn summarize(samples: &[McSample], seed: u64) -> Result<McSummary> {
    let col = |f: fn(&McSample) -> f64| samples.iter().map(f).collect::<Vec<_>>();
    let finite = |f: fn(&McSample) -> Level| samples.iter().map(|s| f(s).finite()).collect::<Option<Vec<f64>>>();
    let empty = || Error::InvalidArgument("no samples to summarize".into());
    Ok(McSummary {
        trials: samples.len(),
        seed,
        gain_db: MetricSummary::of(&col(|s| s.gain_db)).ok_or_else(empty)?,
        nf_db: MetricSummary::of(&col(|s| s.nf_db)).ok_or_else(empty)?,
        iip3_dbm: finite(|s| s.iip3_dbm).and_then(|v| MetricSummary::of(&v)),
        sfdr_db: finite(|s| s.sfdr_db).and_then(|v| MetricSummary::of(&v)),
    })
}

pub fn monte_carlo(
    chain: &Chain,
    point: &OperatingPoint,
    model: &NoiseModel,
    n_trials: usize,
    seed: u64,
) -> Result<McSummary> {
    let samples = monte_carlo_samples(chain, point, model, n_trials, seed, Execution::default())?;
    summarize(&samples, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationEntry {
    pub freq_hz: f64,
    pub setting_db: f64,
    pub achieved_gain_db: f64,
    pub error_db: f64,
}

/// Quantizes to the attenuator step, rounding to nearest with ties toward
/// more attenuation.
pub fn quantize_setting(required_db: f64) -> f64 {
    ((required_db / ATTENUATOR_STEP_DB + 0.5).floor() * ATTENUATOR_STEP_DB).clamp(0.0, ATTENUATOR_MAX_DB)
}

/// Lowest chain gain across `freqs_hz` with the attenuator at 0 dB: the
/// highest target every frequency can reach.
pub fn flattening_target(chain: &Chain, freqs_hz: &[f64], temp_degc: f64, model: &NoiseModel) -> Result<f64> {
    let zero = chain.with_attenuator_setting(0.0)?;
    freqs_hz
        .iter()
        .map(|&f| analyze(&zero, &OperatingPoint::new(f, temp_degc, 0.0), model).map(|r| r.total_gain_db))
        .try_fold(f64::INFINITY, |acc, g| g.map(|g| acc.min(g)))
}

/// Per-frequency attenuator settings bringing the chain gain to
/// `target_gain_db` at the reference temperature.
pub fn calibrate_attenuator(
    chain: &Chain,
    freqs_hz: &[f64],
    target_gain_db: f64,
    model: &NoiseModel,
) -> Result<Vec<CalibrationEntry>> {
    calibrate_attenuator_at(chain, freqs_hz, target_gain_db, model, REF_TEMP_DEGC)
}

pub fn calibrate_attenuator_at(
    chain: &Chain,
    freqs_hz: &[f64],
    target_gain_db: f64,
    model: &NoiseModel,
    temp_degc: f64,
) -> Result<Vec<CalibrationEntry>> {
    if freqs_hz.is_empty() {
        return Err(Error::InvalidArgument(
            "calibration needs at least one frequency".into(),
        ));
    }
    let zero = chain.with_attenuator_setting(0.0)?;
    freqs_hz
        .iter()
        .map(|&f| {
            let point = OperatingPoint::new(f, temp_degc, 0.0);
            let g0 = analyze(&zero, &point, model)?.total_gain_db;
            let required = g0 - target_gain_db;
            if !(-1e-9..=ATTENUATOR_MAX_DB + 1e-9).contains(&required) {
                return Err(Error::Unreachable {
                    freq_hz: f,
                    target_db: target_gain_db,
                    required_db: required,
                    max_db: ATTENUATOR_MAX_DB,
                });
            }
            let setting = quantize_setting(required);
            let achieved = analyze(&chain.with_attenuator_setting(setting)?, &point, model)?.total_gain_db;
            Ok(CalibrationEntry {
                freq_hz: f,
                setting_db: setting,
                achieved_gain_db: achieved,
                error_db: achieved - target_gain_db,
            })
        })
        .collect()
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::InvalidArgument(format!("csv: {e}"))
}

/// Serializes records with a header row.
pub fn to_csv<T: Serialize>(records: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(csv_err)?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Long-format plot data: one line per (metric, row), keyed by temperature
/// and interferer level so each series can be drawn directly.
pub fn plot_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metric", "temp_degc", "interferer_dbm", "pin_dbm", "freq_hz", "value"])
        .map_err(csv_err)?;
    type Metric = (&'static str, fn(&SweepRow) -> Option<String>);
    let metrics: [Metric; 6] = [
        ("gain_db", |r| Some(r.total_gain_db.to_string())),
        ("nf_db", |r| Some(r.total_nf_db.to_string())),
        ("iip3_dbm", |r| Some(r.total_iip3_dbm.to_string())),
        ("noise_floor_dbm", |r| Some(r.noise_floor_dbm.to_string())),
        ("sfdr_db", |r| Some(r.sfdr_db.to_string())),
        ("interferer_margin_db", |r| {
            r.interferer_margin_db.map(|m| m.to_string())
        }),
    ];
    for (name, get) in metrics {
        for r in rows {
            if let Some(v) = get(r) {
                let interferer = r.interferer_dbm.map(|v| v.to_string()).unwrap_or_default();
                w.write_record([
                    name.to_string(),
                    r.temp_degc.to_string(),
                    interferer,
                    r.p_in_dbm.to_string(),
                    r.rf_hz.to_string(),
                    v,
                ])
                .map_err(csv_err)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(csv_err)?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
