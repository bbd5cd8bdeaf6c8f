//! Stage, chain, frequency-plan and operating-point types, the chain
//! document loader, and per-stage parameter resolution.
//!
//! A chain document is JSON with top-level keys `name`, `plan` and
//! `stages`. Field names follow [`StageSpec`] and [`FrequencyPlan`];
//! frequencies are in Hz, gains and noise figures in dB, powers in dBm.
//!
//! ```json
//! {
//!   "name": "demo",
//!   "plan": { "rf_band_hz": [3.1e9, 3.5e9], "lo1_mode": "high-side",
//!             "lo2_hz": 540e6, "if2_hz": 60e6, "passband_hz": 5e6 },
//!   "stages": [
//!     { "label": "LNA", "kind": "amplifier", "gain_db": 18, "nf_db": 0.9, "iip3_dbm": 14 },
//!     { "label": "BPF", "kind": "filter", "gain_db": -2 }
//!   ]
//! }
//! ```

use crate::error::{Error, Result, Violation};
use crate::touchstone::{load_param_table, parse_touchstone, GainTable};
use crate::units::{db_to_lin, dbm_to_mw, Level, REF_TEMP_DEGC};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

/// Adjustable attenuator range and step, dB.
pub const ATTENUATOR_MAX_DB: f64 = 31.5;
pub const ATTENUATOR_STEP_DB: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageKind {
    Amplifier,
    Mixer,
    Attenuator,
    AdjustableAttenuator,
    Filter,
    Thermopad,
    Cable,
}

impl StageKind {
    /// Lossy passive kinds: gain ≤ 0 and NF equal to the loss.
    pub fn is_passive(self) -> bool {
        !matches!(self, StageKind::Amplifier | StageKind::Mixer)
    }
}

impl fmt::Display for StageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StageKind::Amplifier => "amplifier",
            StageKind::Mixer => "mixer",
            StageKind::Attenuator => "attenuator",
            StageKind::AdjustableAttenuator => "adjustable-attenuator",
            StageKind::Filter => "filter",
            StageKind::Thermopad => "thermopad",
            StageKind::Cable => "cable",
        };
        f.write_str(s)
    }
}

/// One element of the receive chain.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSpec {
    pub label: String,
    pub kind: StageKind,
    /// Gain at 25 °C; negative for lossy elements.
    pub gain_db: f64,
    /// Frequency-dependent gain, indexed by RF frequency. Replaces `gain_db`
    /// as the base gain when present.
    pub gain_table: Option<Arc<GainTable>>,
    pub gain_tempco_db_per_degc: f64,
    pub gain_tol_db: f64,
    /// Noise figure at 290 K.
    pub nf_db: f64,
    pub oip3_dbm: Option<f64>,
    pub iip3_dbm: Option<f64>,
    /// Commanded attenuation, adjustable attenuators only.
    pub setting_db: Option<f64>,
    /// Allows a passive stage to carry an NF different from its loss.
    pub nf_override: bool,
}

impl StageSpec {
    /// Active stage with no intercept, no tempco, no tolerance.
    pub fn amplifier(label: &str, gain_db: f64, nf_db: f64) -> Self {
        StageSpec {
            label: label.to_string(),
            kind: StageKind::Amplifier,
            gain_db,
            gain_table: None,
            gain_tempco_db_per_degc: 0.0,
            gain_tol_db: 0.0,
            nf_db,
            oip3_dbm: None,
            iip3_dbm: None,
            setting_db: None,
            nf_override: false,
        }
    }

    /// Lossy passive of the given kind; NF follows the loss.
    pub fn passive(label: &str, kind: StageKind, loss_db: f64) -> Self {
        let gain_db = -loss_db.abs();
        StageSpec {
            kind,
            nf_db: -gain_db,
            setting_db: (kind == StageKind::AdjustableAttenuator).then_some(0.0),
            ..StageSpec::amplifier(label, gain_db, 0.0)
        }
    }

    pub fn with_iip3(mut self, iip3_dbm: f64) -> Self {
        self.iip3_dbm = Some(iip3_dbm);
        self.oip3_dbm = None;
        self
    }

    pub fn with_oip3(mut self, oip3_dbm: f64) -> Self {
        self.oip3_dbm = Some(oip3_dbm);
        self.iip3_dbm = None;
        self
    }

    pub fn with_tempco(mut self, db_per_degc: f64) -> Self {
        self.gain_tempco_db_per_degc = db_per_degc;
        self
    }

    pub fn with_tolerance(mut self, tol_db: f64) -> Self {
        self.gain_tol_db = tol_db;
        self
    }

    pub fn with_gain_table(mut self, table: GainTable) -> Self {
        self.gain_table = Some(Arc::new(table));
        self
    }

    pub fn is_nonlinear(&self) -> bool {
        self.oip3_dbm.is_some() || self.iip3_dbm.is_some()
    }

    fn check(&self, out: &mut Vec<Violation>) {
        let label = self.label.as_str();
        let mut bad = |rule: String| out.push(Violation::stage(label, rule));
        if self.label.trim().is_empty() {
            bad("label must not be empty".into());
        }
        for (name, v) in [
            ("gain_db", Some(self.gain_db)),
            ("gain_tempco_db_per_degc", Some(self.gain_tempco_db_per_degc)),
            ("gain_tol_db", Some(self.gain_tol_db)),
            ("nf_db", Some(self.nf_db)),
            ("oip3_dbm", self.oip3_dbm),
            ("iip3_dbm", self.iip3_dbm),
            ("setting_db", self.setting_db),
        ] {
            if matches!(v, Some(x) if !x.is_finite()) {
                bad(format!("{name} must be finite"));
            }
        }
        if self.kind.is_passive() && self.gain_db > 0.0 {
            bad(format!("{} must have gain_db <= 0, got {}", self.kind, self.gain_db));
        }
        if self.kind.is_passive() {
            if let Some(t) = &self.gain_table {
                if t.gain_db.iter().any(|&g| g > 0.0) {
                    bad(format!("{} gain table contains positive gain", self.kind));
                }
            }
            if !self.nf_override && self.nf_db != -self.gain_db {
                bad(format!(
                    "passive nf_db ({}) must equal -gain_db ({}) unless nf_override is set",
                    self.nf_db, -self.gain_db
                ));
            }
        }
        if self.nf_db < 0.0 {
            bad(format!("nf_db must be >= 0, got {}", self.nf_db));
        }
        if self.gain_tol_db < 0.0 {
            bad(format!("gain_tol_db must be >= 0, got {}", self.gain_tol_db));
        }
        if self.oip3_dbm.is_some() && self.iip3_dbm.is_some() {
            bad("only one of oip3_dbm / iip3_dbm may be given".into());
        }
        match (self.kind, self.setting_db) {
            (StageKind::AdjustableAttenuator, Some(s)) => {
                if let Err(e) = check_setting(s) {
                    bad(e);
                }
            }
            (StageKind::AdjustableAttenuator, None) => bad("adjustable attenuator needs setting_db".into()),
            (_, Some(_)) => bad("setting_db is only valid on an adjustable-attenuator".into()),
            (_, None) => {}
        }
    }
}

fn check_setting(s: f64) -> std::result::Result<(), String> {
    if !(0.0..=ATTENUATOR_MAX_DB).contains(&s) {
        return Err(format!("setting_db {s} outside 0..{ATTENUATOR_MAX_DB} dB"));
    }
    let steps = s / ATTENUATOR_STEP_DB;
    if (steps - steps.round()).abs() > 1e-9 {
        return Err(format!(
            "setting_db {s} is not a multiple of the {ATTENUATOR_STEP_DB} dB step"
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Lo1Mode {
    #[default]
    HighSide,
    LowSide,
}

/// Whether the first IF sits above (`sum`: LO2 + IF2) or below
/// (`difference`: LO2 − IF2) the fixed second LO.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum If1Side {
    #[default]
    Sum,
    Difference,
}

/// Two-stage downconversion plan: switching LO1, fixed LO2.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyPlan {
    pub rf_band_hz: (f64, f64),
    pub lo1_mode: Lo1Mode,
    pub lo2_hz: f64,
    pub if2_hz: f64,
    pub if1_side: If1Side,
    /// Derived from `lo2_hz`, `if2_hz` and `if1_side`.
    pub if1_hz: f64,
    pub passband_hz: f64,
}

impl FrequencyPlan {
    pub fn new(
        rf_band_hz: (f64, f64),
        lo1_mode: Lo1Mode,
        lo2_hz: f64,
        if2_hz: f64,
        if1_side: If1Side,
        passband_hz: f64,
    ) -> Result<Self> {
        let v = Self::violations(rf_band_hz, lo2_hz, if2_hz, if1_side, passband_hz);
        if !v.is_empty() {
            return Err(Error::InvalidChain(v));
        }
        Ok(Self::unchecked(
            rf_band_hz,
            lo1_mode,
            lo2_hz,
            if2_hz,
            if1_side,
            passband_hz,
        ))
    }

    fn unchecked(
        rf_band_hz: (f64, f64),
        lo1_mode: Lo1Mode,
        lo2_hz: f64,
        if2_hz: f64,
        if1_side: If1Side,
        passband_hz: f64,
    ) -> Self {
        let if1_hz = match if1_side {
            If1Side::Sum => lo2_hz + if2_hz,
            If1Side::Difference => lo2_hz - if2_hz,
        };
        FrequencyPlan {
            rf_band_hz,
            lo1_mode,
            lo2_hz,
            if2_hz,
            if1_side,
            if1_hz,
            passband_hz,
        }
    }

    fn violations(
        (lo, hi): (f64, f64),
        lo2_hz: f64,
        if2_hz: f64,
        if1_side: If1Side,
        passband_hz: f64,
    ) -> Vec<Violation> {
        let mut v = Vec::new();
        for (name, x) in [
            ("rf band low", lo),
            ("rf band high", hi),
            ("lo2_hz", lo2_hz),
            ("if2_hz", if2_hz),
            ("passband_hz", passband_hz),
        ] {
            if !(x.is_finite() && x > 0.0) {
                v.push(Violation::chain(format!(
                    "plan {name} must be a positive frequency, got {x}"
                )));
            }
        }
        if lo >= hi {
            v.push(Violation::chain(format!(
                "plan rf_band_hz must be ascending, got [{lo}, {hi}]"
            )));
        }
        if if1_side == If1Side::Difference && lo2_hz <= if2_hz {
            v.push(Violation::chain("plan if1 = lo2 - if2 must be positive"));
        }
        v
    }

    /// The reference plan: 3.1–3.5 GHz, high-side LO1, LO2 540 MHz, IF2
    /// 60 MHz, IF1 600 MHz, 5 MHz passband.
    pub fn reference() -> Self {
        Self::unchecked((3.1e9, 3.5e9), Lo1Mode::HighSide, 540e6, 60e6, If1Side::Sum, 5e6)
    }

    pub fn contains(&self, rf_hz: f64) -> bool {
        rf_hz >= self.rf_band_hz.0 && rf_hz <= self.rf_band_hz.1
    }

    pub fn check_rf(&self, rf_hz: f64) -> Result<()> {
        if self.contains(rf_hz) {
            Ok(())
        } else {
            Err(Error::OutOfBand {
                freq_hz: rf_hz,
                low_hz: self.rf_band_hz.0,
                high_hz: self.rf_band_hz.1,
            })
        }
    }
}

/// Ordered stage list plus frequency plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub name: String,
    pub stages: Vec<StageSpec>,
    /// `None` for a plain RF block with no frequency conversion.
    pub plan: Option<FrequencyPlan>,
}

impl Chain {
    /// Validates and assembles a chain. With a plan present the chain must
    /// hold exactly two mixers; without one it must hold none.
    pub fn new(name: &str, stages: Vec<StageSpec>, plan: Option<FrequencyPlan>) -> Result<Self> {
        let chain = Chain {
            name: name.to_string(),
            stages,
            plan,
        };
        let v = chain.violations(false);
        if v.is_empty() {
            Ok(chain)
        } else {
            Err(Error::InvalidChain(v))
        }
    }

    /// The empty chain: 0 dB gain, no stages.
    pub fn identity(name: &str) -> Self {
        Chain {
            name: name.to_string(),
            stages: Vec::new(),
            plan: None,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.stages.is_empty()
    }

    fn violations(&self, identity: bool) -> Vec<Violation> {
        let mut v = Vec::new();
        if self.stages.is_empty() && !identity {
            v.push(Violation::chain(
                "stage list is empty (set \"identity\": true for the identity chain)",
            ));
        }
        if identity && !self.stages.is_empty() {
            v.push(Violation::chain("identity chain must not list stages"));
        }
        for (i, s) in self.stages.iter().enumerate() {
            s.check(&mut v);
            if self.stages[..i].iter().any(|p| p.label == s.label) {
                v.push(Violation::stage(&s.label, "duplicate label"));
            }
        }
        let mixers = self.stages.iter().filter(|s| s.kind == StageKind::Mixer).count();
        match &self.plan {
            Some(_) if mixers != 2 => v.push(Violation::chain(format!(
                "two-stage downconversion plan needs exactly 2 mixers, found {mixers}"
            ))),
            None if mixers != 0 => v.push(Violation::chain(format!(
                "{mixers} mixer(s) present but no frequency plan given"
            ))),
            _ => {}
        }
        v
    }

    pub fn adjustable_attenuator(&self) -> Result<usize> {
        let idx: Vec<usize> = self
            .stages
            .iter()
            .enumerate()
            .filter(|(_, s)| s.kind == StageKind::AdjustableAttenuator)
            .map(|(i, _)| i)
            .collect();
        match idx.as_slice() {
            [i] => Ok(*i),
            _ => Err(Error::InvalidArgument(format!(
                "chain must contain exactly one adjustable-attenuator, found {}",
                idx.len()
            ))),
        }
    }

    /// Copy of the chain with the adjustable attenuator commanded to
    /// `setting_db`.
    pub fn with_attenuator_setting(&self, setting_db: f64) -> Result<Chain> {
        check_setting(setting_db).map_err(Error::InvalidArgument)?;
        let i = self.adjustable_attenuator()?;
        let mut out = self.clone();
        out.stages[i].setting_db = Some(setting_db);
        Ok(out)
    }

    /// The first `k` stages, plan dropped (prefixes are not full receivers).
    pub fn prefix(&self, k: usize) -> Chain {
        Chain {
            name: format!("{}[..{k}]", self.name),
            stages: self.stages[..k].to_vec(),
            plan: None,
        }
    }

    /// Loads a chain document from disk; table paths resolve relative to
    /// the document's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Chain> {
        let path = path.as_ref();
        let text = read(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        build_chain(&text, &|rel: &str| read(&base.join(rel)))
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Ambient conditions and input drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub rf_hz: f64,
    pub temp_degc: f64,
    pub p_in_dbm: f64,
    pub interferer: Option<Interferer>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interferer {
    pub offset_hz: f64,
    pub p_dbm: f64,
}

impl OperatingPoint {
    pub fn new(rf_hz: f64, temp_degc: f64, p_in_dbm: f64) -> Self {
        OperatingPoint {
            rf_hz,
            temp_degc,
            p_in_dbm,
            interferer: None,
        }
    }

    pub fn with_interferer(mut self, offset_hz: f64, p_dbm: f64) -> Self {
        self.interferer = Some(Interferer { offset_hz, p_dbm });
        self
    }
}

impl fmt::Display for OperatingPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "rf={} Hz, temp={} °C, pin={} dBm",
            self.rf_hz, self.temp_degc, self.p_in_dbm
        )?;
        if let Some(i) = self.interferer {
            write!(f, ", interferer {} dBm at +{} Hz", i.p_dbm, i.offset_hz)?;
        }
        Ok(())
    }
}

/// A stage's parameters evaluated at an operating point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedStage {
    pub label: String,
    pub kind: StageKind,
    pub gain_db: f64,
    pub gain_lin: f64,
    pub noise_factor_lin: f64,
    pub nf_db: f64,
    /// Unbounded for ideally linear stages.
    pub iip3_dbm: Level,
    pub iip3_mw: Option<f64>,
    pub oip3_dbm: Level,
}

impl ResolvedStage {
    /// Builds a resolved stage directly from dB quantities.
    pub fn from_db(label: &str, kind: StageKind, gain_db: f64, nf_db: f64, iip3_dbm: Option<f64>) -> Self {
        ResolvedStage {
            label: label.to_string(),
            kind,
            gain_db,
            gain_lin: db_to_lin(gain_db),
            noise_factor_lin: db_to_lin(nf_db),
            nf_db,
            iip3_dbm: iip3_dbm.map_or(Level::Unbounded, Level::Finite),
            iip3_mw: iip3_dbm.map(dbm_to_mw),
            oip3_dbm: iip3_dbm.map_or(Level::Unbounded, |i| Level::Finite(i + gain_db)),
        }
    }

    pub fn is_nonlinear(&self) -> bool {
        self.iip3_mw.is_some()
    }
}

/// Completes an intercept pair from whichever side is given:
/// IIP3 = OIP3 − gain.
pub fn derive_ip3(gain_db: f64, oip3_dbm: Option<f64>, iip3_dbm: Option<f64>) -> Result<(f64, f64)> {
    match (oip3_dbm, iip3_dbm) {
        (Some(o), None) => Ok((o - gain_db, o)),
        (None, Some(i)) => Ok((i, i + gain_db)),
        (o, i) => Err(Error::InterceptSpec {
            supplied: o.is_some() as usize + i.is_some() as usize,
        }),
    }
}

/// Evaluates a stage at an operating point.
pub fn resolve_stage(stage: &StageSpec, point: &OperatingPoint) -> Result<ResolvedStage> {
    resolve_stage_shifted(stage, point, 0.0)
}

/// As [`resolve_stage`], with an extra process gain offset (tolerance
/// corners and Monte Carlo draws). The offset leaves the NF alone.
pub fn resolve_stage_shifted(stage: &StageSpec, point: &OperatingPoint, gain_shift_db: f64) -> Result<ResolvedStage> {
    let base = match &stage.gain_table {
        Some(t) => t.gain_at(point.rf_hz)?,
        None => stage.gain_db,
    };
    let setting = stage.setting_db.unwrap_or(0.0);
    let ref_gain = base - setting;
    let gain_db = ref_gain + stage.gain_tempco_db_per_degc * (point.temp_degc - REF_TEMP_DEGC) + gain_shift_db;
    let nf_db = if stage.kind.is_passive() && !stage.nf_override {
        -ref_gain
    } else {
        stage.nf_db
    };

    let (iip3, oip3) = if stage.is_nonlinear() {
        let (i, o) = derive_ip3(gain_db, stage.oip3_dbm, stage.iip3_dbm)?;
        (Level::Finite(i), Level::Finite(o))
    } else {
        (Level::Unbounded, Level::Unbounded)
    };
    Ok(ResolvedStage {
        label: stage.label.clone(),
        kind: stage.kind,
        gain_db,
        gain_lin: db_to_lin(gain_db),
        noise_factor_lin: db_to_lin(nf_db),
        nf_db,
        iip3_dbm: iip3,
        iip3_mw: iip3.finite().map(dbm_to_mw),
        oip3_dbm: oip3,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainDoc {
    name: String,
    #[serde(default)]
    identity: bool,
    #[serde(default)]
    plan: Option<PlanDoc>,
    stages: Vec<StageDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanDoc {
    rf_band_hz: (f64, f64),
    #[serde(default)]
    lo1_mode: Lo1Mode,
    lo2_hz: f64,
    if2_hz: f64,
    #[serde(default)]
    if1_side: If1Side,
    passband_hz: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StageDoc {
    label: String,
    kind: StageKind,
    gain_db: f64,
    #[serde(default)]
    gain_table: Option<TableRef>,
    #[serde(default)]
    gain_tempco_db_per_degc: f64,
    #[serde(default)]
    gain_tol_db: f64,
    #[serde(default)]
    nf_db: Option<f64>,
    #[serde(default)]
    oip3_dbm: Option<f64>,
    #[serde(default)]
    iip3_dbm: Option<f64>,
    #[serde(default)]
    setting_db: Option<f64>,
    #[serde(default)]
    nf_override: bool,
    /// Free-form provenance note; ignored.
    #[serde(default, rename = "note")]
    _note: Option<String>,
}

/// Where a stage's gain table comes from.
#[derive(Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum TableRef {
    /// Path to a Touchstone v1 `.s2p`; |S21| becomes the gain.
    Touchstone(String),
    /// Path to a frequency-only parameter CSV and the column to use.
    Csv { path: String, column: String },
    /// Inline `[freq_hz, gain_db]` pairs.
    Points(Vec<(f64, f64)>),
}

fn load_table(r: &TableRef, resolver: &dyn Fn(&str) -> Result<String>) -> Result<GainTable> {
    match r {
        TableRef::Touchstone(path) => Ok(parse_touchstone(&resolver(path)?)?.gain_table()),
        TableRef::Csv { path, column } => load_param_table(&resolver(path)?)?.gain_table(column),
        TableRef::Points(pts) => GainTable::new(pts.iter().map(|p| p.0).collect(), pts.iter().map(|p| p.1).collect()),
    }
}

/// Parses and validates a chain document. `resolver` maps a table path
/// named in the document to its text. Every violation is reported, not
/// just the first.
pub fn build_chain(text: &str, resolver: &dyn Fn(&str) -> Result<String>) -> Result<Chain> {
    let doc: ChainDoc = serde_json::from_str(text)?;
    let mut violations = Vec::new();

    let plan = doc.plan.map(|p| {
        violations.extend(FrequencyPlan::violations(
            p.rf_band_hz,
            p.lo2_hz,
            p.if2_hz,
            p.if1_side,
            p.passband_hz,
        ));
        FrequencyPlan::unchecked(p.rf_band_hz, p.lo1_mode, p.lo2_hz, p.if2_hz, p.if1_side, p.passband_hz)
    });

    let mut stages = Vec::with_capacity(doc.stages.len());
    for s in doc.stages {
        let gain_table = match &s.gain_table {
            Some(r) => match load_table(r, resolver) {
                Ok(t) => Some(Arc::new(t)),
                Err(e) => {
                    violations.push(Violation::stage(&s.label, format!("gain_table: {e}")));
                    None
                }
            },
            None => None,
        };
        let nf_db = match (s.nf_db, s.kind.is_passive()) {
            (Some(nf), _) => nf,
            (None, true) => -s.gain_db,
            (None, false) => {
                violations.push(Violation::stage(&s.label, "nf_db is required for active stages"));
                0.0
            }
        };
        let setting_db = match s.kind {
            StageKind::AdjustableAttenuator => Some(s.setting_db.unwrap_or(0.0)),
            _ => s.setting_db,
        };
        stages.push(StageSpec {
            label: s.label,
            kind: s.kind,
            gain_db: s.gain_db,
            gain_table,
            gain_tempco_db_per_degc: s.gain_tempco_db_per_degc,
            gain_tol_db: s.gain_tol_db,
            nf_db,
            oip3_dbm: s.oip3_dbm,
            iip3_dbm: s.iip3_dbm,
            setting_db,
            nf_override: s.nf_override,
        });
    }

    let chain = Chain {
        name: doc.name,
        stages,
        plan,
    };
    violations.extend(chain.violations(doc.identity));
    if violations.is_empty() {
        Ok(chain)
    } else {
        Err(Error::InvalidChain(violations))
    }
}

pub const REFERENCE_CHAIN_JSON: &str = include_str!("../data/fig2_chain.json");
pub const REFERENCE_AMP2_S2P: &str = include_str!("../data/amp2.s2p");

/// The shipped two-stage-downconversion S-band reference receiver.
pub fn reference_chain() -> Chain {
    build_chain(REFERENCE_CHAIN_JSON, &|path: &str| match path {
        "amp2.s2p" => Ok(REFERENCE_AMP2_S2P.to_string()),
        other => Err(Error::InvalidArgument(format!("no embedded table '{other}'"))),
    })
    .expect("embedded reference chain is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn no_tables(_: &str) -> Result<String> {
        Err(Error::InvalidArgument("no tables".into()))
    }

    #[test]
    fn reference_chain_builds() {
        let c = reference_chain();
        assert_eq!(c.stages.len(), 14);
        assert_eq!(c.stages.iter().filter(|s| s.kind == StageKind::Amplifier).count(), 5);
        let amp_gains: Vec<f64> = c
            .stages
            .iter()
            .filter(|s| s.kind == StageKind::Amplifier)
            .map(|s| s.gain_db)
            .collect();
        assert_eq!(amp_gains, vec![18.0, 18.0, 24.0, 20.0, 20.0]);
        let passive: f64 = c
            .stages
            .iter()
            .filter(|s| s.kind != StageKind::Amplifier)
            .map(|s| s.gain_db)
            .sum();
        assert_eq!(passive, -58.0);
        let plan = c.plan.as_ref().unwrap();
        assert_eq!(plan.if1_hz, 600e6);
        assert_eq!(plan.lo2_hz, 540e6);
        assert_eq!(c.stages[0].nf_db, 0.9);
    }

    #[test]
    fn identity_document() {
        let c = build_chain(r#"{"name":"id","identity":true,"stages":[]}"#, &no_tables).unwrap();
        assert!(c.is_identity());
        let err = build_chain(r#"{"name":"id","stages":[]}"#, &no_tables).unwrap_err();
        assert!(matches!(err, Error::InvalidChain(_)));
    }

    #[test]
    fn both_intercepts_rejected() {
        let doc = r#"{"name":"x","stages":[
            {"label":"A","kind":"amplifier","gain_db":10,"nf_db":2,"oip3_dbm":30,"iip3_dbm":20}]}"#;
        let err = build_chain(doc, &no_tables).unwrap_err();
        assert!(err.to_string().contains("only one of oip3_dbm / iip3_dbm"), "{err}");
    }

    #[test]
    fn all_violations_reported() {
        let doc = r#"{"name":"x","plan":{"rf_band_hz":[3.1e9,3.5e9],"lo2_hz":540e6,"if2_hz":60e6,"passband_hz":5e6},
          "stages":[
            {"label":"F","kind":"filter","gain_db":2},
            {"label":"A","kind":"amplifier","gain_db":10},
            {"label":"M","kind":"mixer","gain_db":-7,"nf_db":7}]}"#;
        let Error::InvalidChain(v) = build_chain(doc, &no_tables).unwrap_err() else {
            panic!()
        };
        let text: Vec<String> = v.iter().map(|v| v.to_string()).collect();
        assert!(
            text.iter()
                .any(|t| t.contains("stage 'F'") && t.contains("gain_db <= 0")),
            "{text:?}"
        );
        assert!(
            text.iter()
                .any(|t| t.contains("stage 'A'") && t.contains("nf_db is required")),
            "{text:?}"
        );
        assert!(text.iter().any(|t| t.contains("exactly 2 mixers")), "{text:?}");
    }

    #[test]
    fn passive_nf_must_match_loss_unless_overridden() {
        let bad = r#"{"name":"x","stages":[{"label":"P","kind":"attenuator","gain_db":-3,"nf_db":4}]}"#;
        assert!(build_chain(bad, &no_tables).is_err());
        let ok =
            r#"{"name":"x","stages":[{"label":"P","kind":"attenuator","gain_db":-3,"nf_db":4,"nf_override":true}]}"#;
        assert_eq!(build_chain(ok, &no_tables).unwrap().stages[0].nf_db, 4.0);
    }

    #[test]
    fn attenuator_setting_rules() {
        let doc = |s: &str| {
            format!(
                r#"{{"name":"x","stages":[{{"label":"ATT","kind":"adjustable-attenuator","gain_db":-2,"setting_db":{s}}}]}}"#
            )
        };
        assert!(build_chain(&doc("3.5"), &no_tables).is_ok());
        assert!(build_chain(&doc("3.25"), &no_tables).is_err());
        assert!(build_chain(&doc("32"), &no_tables).is_err());
        let c = build_chain(&doc("0"), &no_tables).unwrap();
        assert_eq!(
            c.with_attenuator_setting(10.0).unwrap().stages[0].setting_db,
            Some(10.0)
        );
        assert!(c.with_attenuator_setting(40.0).is_err());
    }

    #[test]
    fn malformed_json() {
        assert!(matches!(build_chain("", &no_tables), Err(Error::Document(_))));
        assert!(matches!(
            build_chain(r#"{"name":"x","stages":[],"bogus":1}"#, &no_tables),
            Err(Error::Document(_))
        ));
    }

    #[test]
    fn resolve_tempco() {
        let amp = StageSpec::amplifier("A", 18.0, 1.0).with_tempco(-0.01);
        let r = resolve_stage(&amp, &OperatingPoint::new(3.3e9, 85.0, -32.0)).unwrap();
        assert!((r.gain_db - 17.4).abs() < 1e-12);
    }

    #[test]
    fn resolve_derives_iip3_from_oip3() {
        let amp = StageSpec::amplifier("A", 20.0, 3.0).with_oip3(30.0);
        let r = resolve_stage(&amp, &OperatingPoint::new(3.3e9, 25.0, -32.0)).unwrap();
        assert_eq!(r.iip3_dbm, Level::Finite(10.0));
        assert_eq!(r.oip3_dbm, Level::Finite(30.0));
        assert!((r.iip3_mw.unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn resolve_rejects_out_of_table_frequency() {
        let table = GainTable::new(vec![3.0e9, 3.6e9], vec![18.0, 16.0]).unwrap();
        let amp = StageSpec::amplifier("A", 18.0, 1.0).with_gain_table(table);
        let err = resolve_stage(&amp, &OperatingPoint::new(2.9e9, 25.0, -32.0)).unwrap_err();
        assert!(matches!(err, Error::OutOfTableRange { .. }));
    }

    #[test]
    fn adjustable_attenuator_setting_subtracts() {
        let mut att = StageSpec::passive("ATT", StageKind::AdjustableAttenuator, 2.0);
        att.setting_db = Some(4.5);
        let r = resolve_stage(&att, &OperatingPoint::new(1e9, 25.0, 0.0)).unwrap();
        assert_eq!(r.gain_db, -6.5);
        assert_eq!(r.nf_db, 6.5);
        assert!(r.iip3_dbm.is_unbounded());
    }

    #[test]
    fn derive_ip3_examples() {
        assert_eq!(derive_ip3(18.0, Some(28.0), None).unwrap(), (10.0, 28.0));
        assert_eq!(derive_ip3(0.0, None, Some(5.0)).unwrap(), (5.0, 5.0));
        assert_eq!(derive_ip3(-6.0, None, Some(20.0)).unwrap(), (20.0, 14.0));
        assert!(matches!(
            derive_ip3(1.0, None, None),
            Err(Error::InterceptSpec { supplied: 0 })
        ));
        assert!(matches!(
            derive_ip3(1.0, Some(1.0), Some(2.0)),
            Err(Error::InterceptSpec { supplied: 2 })
        ));
    }

    #[test]
    fn plan_validation() {
        assert!(
            FrequencyPlan::new((3.1e9, 3.5e9), Lo1Mode::HighSide, 540e6, 60e6, If1Side::Difference, 5e6)
                .map(|p| p.if1_hz == 480e6)
                .unwrap()
        );
        assert!(FrequencyPlan::new((3.5e9, 3.1e9), Lo1Mode::HighSide, 540e6, 60e6, If1Side::Sum, 5e6).is_err());
        assert!(FrequencyPlan::new((3.1e9, 3.5e9), Lo1Mode::HighSide, 540e6, 60e6, If1Side::Sum, 0.0).is_err());
        assert!(FrequencyPlan::reference().check_rf(3.6e9).is_err());
    }

    fn arb_stage() -> impl Strategy<Value = StageSpec> {
        (
            -10.0f64..30.0,
            0.0f64..15.0,
            -0.05f64..0.05,
            prop::option::of(-10.0f64..40.0),
            any::<bool>(),
        )
            .prop_map(|(g, nf, tc, ip, out)| {
                let s = StageSpec::amplifier("S", g, nf).with_tempco(tc);
                match (ip, out) {
                    (Some(v), true) => s.with_oip3(v),
                    (Some(v), false) => s.with_iip3(v),
                    (None, _) => s,
                }
            })
    }

    proptest! {
        #[test]
        fn resolved_db_and_linear_agree(s in arb_stage(), t in -55.0f64..125.0) {
            let r = resolve_stage(&s, &OperatingPoint::new(3.3e9, t, -32.0)).unwrap();
            prop_assert!((10.0 * r.gain_lin.log10() - r.gain_db).abs() <= 1e-12 * r.gain_db.abs().max(1.0));
            prop_assert!((10.0 * r.noise_factor_lin.log10() - r.nf_db).abs() <= 1e-12 * r.nf_db.abs().max(1.0));
            prop_assert!(r.noise_factor_lin >= 1.0);
            if let (Level::Finite(i), Level::Finite(o)) = (r.iip3_dbm, r.oip3_dbm) {
                prop_assert!((i - (o - r.gain_db)).abs() < 1e-9);
                let mw = r.iip3_mw.unwrap();
                prop_assert!((10.0 * mw.log10() - i).abs() <= 1e-12 * i.abs().max(1.0));
            }
        }

        #[test]
        fn temperature_is_affine(s in arb_stage(), t1 in -55.0f64..125.0, t2 in -55.0f64..125.0) {
            let r1 = resolve_stage(&s, &OperatingPoint::new(3.3e9, t1, 0.0)).unwrap();
            let r2 = resolve_stage(&s, &OperatingPoint::new(3.3e9, t2, 0.0)).unwrap();
            let expect = s.gain_tempco_db_per_degc * (t1 - t2);
            prop_assert!((r1.gain_db - r2.gain_db - expect).abs() < 1e-9);
        }

        #[test]
        fn derive_ip3_involution(g in -20.0f64..40.0, v in -20.0f64..50.0, from_out in any::<bool>()) {
            let (i, o) = if from_out { derive_ip3(g, Some(v), None).unwrap() } else { derive_ip3(g, None, Some(v)).unwrap() };
            let (i2, o2) = if from_out { derive_ip3(g, None, Some(i)).unwrap() } else { derive_ip3(g, Some(o), None).unwrap() };
            prop_assert!((i - i2).abs() < 1e-12 && (o - o2).abs() < 1e-12);
        }

        #[test]
        fn passive_nf_equals_loss_at_reference(loss in 0.0f64..30.0, tc in 0.0f64..0.05) {
            for kind in [StageKind::Attenuator, StageKind::Filter, StageKind::Thermopad, StageKind::Cable] {
                let s = StageSpec::passive("P", kind, loss).with_tempco(tc);
                let r = resolve_stage(&s, &OperatingPoint::new(1e9, REF_TEMP_DEGC, 0.0)).unwrap();
                prop_assert_eq!(r.nf_db, -r.gain_db);
            }
        }
    }
}
