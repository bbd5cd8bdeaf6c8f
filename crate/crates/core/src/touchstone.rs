//! Vendor data ingestion: Touchstone v1 two-port files and CSV parameter
//! tables.
//!
//! Only |S21| is consumed downstream, as a frequency-dependent gain. The full
//! four-parameter matrix is kept on [`TwoPortNetwork`] so a network can be
//! written back out in any of the three v1 data formats.
//!
//! Interpolation is linear in (Hz, dB) and never extrapolates.

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Data format token of the option line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ParamFormat {
    /// dB magnitude / angle in degrees.
    Db,
    /// Linear magnitude / angle in degrees.
    Ma,
    /// Real / imaginary.
    Ri,
}

impl ParamFormat {
    fn token(self) -> &'static str {
        match self {
            ParamFormat::Db => "DB",
            ParamFormat::Ma => "MA",
            ParamFormat::Ri => "RI",
        }
    }

    fn to_complex(self, a: f64, b: f64) -> Complex64 {
        match self {
            ParamFormat::Db => Complex64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
            ParamFormat::Ma => Complex64::from_polar(a, b.to_radians()),
            ParamFormat::Ri => Complex64::new(a, b),
        }
    }

    /// |S| in dB straight from the raw pair, without a detour through
    /// polar form (DB values are taken verbatim).
    fn magnitude_db(self, a: f64, b: f64) -> f64 {
        match self {
            ParamFormat::Db => a,
            ParamFormat::Ma => 20.0 * a.abs().log10(),
            ParamFormat::Ri => 20.0 * a.hypot(b).log10(),
        }
    }

    fn pair(self, z: Complex64) -> (f64, f64) {
        match self {
            ParamFormat::Db => (20.0 * z.norm().log10(), z.arg().to_degrees()),
            ParamFormat::Ma => (z.norm(), z.arg().to_degrees()),
            ParamFormat::Ri => (z.re, z.im),
        }
    }
}

/// Parsed two-port S-parameter data.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPortNetwork {
    /// Strictly ascending, Hz.
    pub freq_hz: Vec<f64>,
    /// Forward gain |S21| in dB at each frequency point.
    pub s21_db: Vec<f64>,
    /// S11, S21, S12, S22 per frequency point.
    pub s: Vec<[Complex64; 4]>,
    /// Format the data was read in.
    pub format: ParamFormat,
    pub reference_ohm: f64,
}

struct OptionLine {
    scale: f64,
    /// Decimal exponent of `scale`, for exact unit conversion.
    exponent: i32,
    format: ParamFormat,
    reference_ohm: f64,
}

fn parse_option_line(body: &str, line: usize) -> Result<OptionLine> {
    let err = |message: String| Error::Touchstone { line, message };
    let mut opt = OptionLine {
        scale: 1e9,
        exponent: 9,
        format: ParamFormat::Ma,
        reference_ohm: 50.0,
    };
    let mut tokens = body.split_whitespace();
    while let Some(tok) = tokens.next() {
        match tok.to_ascii_uppercase().as_str() {
            "HZ" => (opt.scale, opt.exponent) = (1.0, 0),
            "KHZ" => (opt.scale, opt.exponent) = (1e3, 3),
            "MHZ" => (opt.scale, opt.exponent) = (1e6, 6),
            "GHZ" => (opt.scale, opt.exponent) = (1e9, 9),
            "S" => {}
            p @ ("Y" | "Z" | "H" | "G") => {
                return Err(err(format!("unsupported parameter type '{p}' (only S is accepted)")))
            }
            "DB" => opt.format = ParamFormat::Db,
            "MA" => opt.format = ParamFormat::Ma,
            "RI" => opt.format = ParamFormat::Ri,
            "R" => {
                let v = tokens
                    .next()
                    .ok_or_else(|| err("option 'R' without a resistance value".into()))?;
                opt.reference_ohm = v
                    .parse()
                    .map_err(|_| err(format!("invalid reference resistance '{v}'")))?;
                if !(opt.reference_ohm > 0.0) {
                    return Err(err(format!("reference resistance must be positive, got {v}")));
                }
            }
            _ => return Err(err(format!("unsupported format token '{tok}'"))),
        }
    }
    Ok(opt)
}

/// Converts a frequency field to Hz. Decimal fields are rescaled by
/// editing the exponent so "3.3" GHz lands on exactly 3.3e9 Hz.
fn scaled_frequency(token: &str, value: f64, opt: &OptionLine) -> f64 {
    if token.contains(['e', 'E']) {
        return value * opt.scale;
    }
    format!("{token}e{}", opt.exponent).parse().unwrap_or(value * opt.scale)
}

/// Parses Touchstone v1 two-port (`.s2p`) text.
pub fn parse_touchstone(text: &str) -> Result<TwoPortNetwork> {
    let mut option: Option<OptionLine> = None;
    let mut freq_hz = Vec::new();
    let mut s21_db = Vec::new();
    let mut s = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('!').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            return Err(Error::Touchstone {
                line,
                message: format!(
                    "Touchstone v2 keyword '{}' is not supported; supply a v1 file",
                    content.split_whitespace().next().unwrap_or(content)
                ),
            });
        }
        if let Some(body) = content.strip_prefix('#') {
            // v1: only the first option line counts.
            if option.is_none() {
                option = Some(parse_option_line(body, line)?);
            }
            continue;
        }
        let opt = option.as_ref().ok_or(Error::Touchstone {
            line,
            message: "data before option line ('# <unit> S <format> R <res>')".into(),
        })?;

        let values = content
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| Error::Touchstone {
                    line,
                    message: format!("non-numeric field '{t}'"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != 9 {
            return Err(Error::Touchstone {
                line,
                message: format!("expected 9 columns for a two-port row, found {}", values.len()),
            });
        }
        let f = scaled_frequency(content.split_whitespace().next().unwrap_or(""), values[0], opt);
        if let Some(&prev) = freq_hz.last() {
            if f <= prev {
                return Err(Error::Touchstone {
                    line,
                    message: format!("frequency {f} Hz is not above previous point {prev} Hz"),
                });
            }
        }
        let s21 = opt.format.magnitude_db(values[3], values[4]);
        if !s21.is_finite() {
            return Err(Error::Touchstone {
                line,
                message: "S21 magnitude is zero or not finite".into(),
            });
        }
        let mut row = [Complex64::new(0.0, 0.0); 4];
        for (k, z) in row.iter_mut().enumerate() {
            *z = opt.format.to_complex(values[1 + 2 * k], values[2 + 2 * k]);
        }
        freq_hz.push(f);
        s21_db.push(s21);
        s.push(row);
    }

    let opt = option.ok_or(Error::Touchstone {
        line: 0,
        message: "missing option line".into(),
    })?;
    if freq_hz.is_empty() {
        return Err(Error::Touchstone {
            line: 0,
            message: "no data rows".into(),
        });
    }
    Ok(TwoPortNetwork {
        freq_hz,
        s21_db,
        s,
        format: opt.format,
        reference_ohm: opt.reference_ohm,
    })
}

/// Writes a network as Touchstone v1 text with frequencies in Hz.
pub fn write_touchstone(net: &TwoPortNetwork, format: ParamFormat) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "! two-port network, {} points", net.freq_hz.len());
    let _ = writeln!(out, "# HZ S {} R {}", format.token(), net.reference_ohm);
    for (i, (&f, row)) in net.freq_hz.iter().zip(&net.s).enumerate() {
        let _ = write!(out, "{f}");
        for (k, z) in row.iter().enumerate() {
            let (a, b) = if k == 1 && format == ParamFormat::Db {
                // keep |S21| bit-exact when staying in dB
                (net.s21_db[i], z.arg().to_degrees())
            } else {
                format.pair(*z)
            };
            let _ = write!(out, " {a} {b}");
        }
        out.push('\n');
    }
    out
}

impl TwoPortNetwork {
    /// Interpolated |S21| in dB.
    pub fn gain_at(&self, freq_hz: f64) -> Result<f64> {
        interpolate(&self.freq_hz, &self.s21_db, freq_hz)
    }

    pub fn gain_table(&self) -> GainTable {
        GainTable {
            freq_hz: self.freq_hz.clone(),
            gain_db: self.s21_db.clone(),
        }
    }
}

/// Frequency → gain (dB) lookup table attached to a stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainTable {
    pub freq_hz: Vec<f64>,
    pub gain_db: Vec<f64>,
}

impl GainTable {
    pub fn new(freq_hz: Vec<f64>, gain_db: Vec<f64>) -> Result<Self> {
        if freq_hz.is_empty() || freq_hz.len() != gain_db.len() {
            return Err(Error::InvalidArgument(format!(
                "gain table needs matching nonempty columns, got {} frequencies and {} gains",
                freq_hz.len(),
                gain_db.len()
            )));
        }
        if freq_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "gain table frequencies must be strictly ascending".into(),
            ));
        }
        if gain_db.iter().chain(&freq_hz).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("gain table contains non-finite values".into()));
        }
        Ok(GainTable { freq_hz, gain_db })
    }

    pub fn gain_at(&self, freq_hz: f64) -> Result<f64> {
        interpolate(&self.freq_hz, &self.gain_db, freq_hz)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.freq_hz[0], *self.freq_hz.last().unwrap())
    }
}

/// Piecewise-linear interpolation on a strictly ascending grid. Exact at
/// grid points, error outside `[xs[0], xs[last]]`.
pub(crate) fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Result<f64> {
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    if !(x >= lo && x <= hi) {
        return Err(Error::OutOfTableRange {
            freq_hz: x,
            min_hz: lo,
            max_hz: hi,
        });
    }
    let i = xs.partition_point(|&v| v < x);
    if xs[i] == x {
        return Ok(ys[i]);
    }
    let (x0, x1, y0, y1) = (xs[i - 1], xs[i], ys[i - 1], ys[i]);
    let t = (x - x0) / (x1 - x0);
    Ok(y0 + t * (y1 - y0))
}

/// Rectangular parameter grid over frequency and (optionally) temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTable {
    pub freq_hz: Vec<f64>,
    pub temp_degc: Option<Vec<f64>>,
    pub columns: Vec<String>,
    /// `values[c][fi * n_temp + ti]`
    values: Vec<Vec<f64>>,
}

impl ParamTable {
    fn n_temp(&self) -> usize {
        self.temp_degc.as_ref().map_or(1, Vec::len)
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::InvalidArgument(format!("parameter table has no column '{name}'")))
    }

    pub fn value(&self, column: usize, fi: usize, ti: usize) -> f64 {
        self.values[column][fi * self.n_temp() + ti]
    }

    /// Bilinear lookup. `temp_degc` is ignored for frequency-only tables.
    pub fn lookup(&self, column: &str, freq_hz: f64, temp_degc: Option<f64>) -> Result<f64> {
        let c = self.column_index(column)?;
        let nt = self.n_temp();
        let along_freq = |ti: usize| -> Result<f64> {
            let ys: Vec<f64> = (0..self.freq_hz.len()).map(|fi| self.value(c, fi, ti)).collect();
            interpolate(&self.freq_hz, &ys, freq_hz)
        };
        match (&self.temp_degc, temp_degc) {
            (None, _) => along_freq(0),
            (Some(_), None) => Err(Error::InvalidArgument(
                "table is indexed by temperature; a temperature is required".into(),
            )),
            (Some(temps), Some(t)) => {
                let per_temp = (0..nt).map(along_freq).collect::<Result<Vec<_>>>()?;
                interpolate(temps, &per_temp, t).map_err(|_| Error::TemperatureOutOfRange {
                    temp_degc: t,
                    min_degc: temps[0],
                    max_degc: temps[nt - 1],
                })
            }
        }
    }

    /// Frequency-only column as a gain table (temperature tables must pick a
    /// temperature first, so they are rejected here).
    pub fn gain_table(&self, column: &str) -> Result<GainTable> {
        if self.temp_degc.is_some() {
            return Err(Error::InvalidArgument(
                "a gain table must be indexed by frequency only".into(),
            ));
        }
        let c = self.column_index(column)?;
        GainTable::new(self.freq_hz.clone(), self.values[c].clone())
    }
}

/// Parses a CSV parameter table with header `freq_hz[,temp_degc],<column>...`.
pub fn load_param_table(csv_text: &str) -> Result<ParamTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(csv_text.as_bytes());

    let header = reader
        .headers()
        .map_err(|e| Error::Table {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    if names.first() != Some(&"freq_hz") {
        return Err(Error::Table {
            line: 1,
            message: "first header column must be 'freq_hz'".into(),
        });
    }
    let has_temp = names.get(1) == Some(&"temp_degc");
    let n_axes = if has_temp { 2 } else { 1 };
    let columns: Vec<String> = names[n_axes..].iter().map(|s| s.to_string()).collect();
    if columns.is_empty() {
        return Err(Error::Table {
            line: 1,
            message: "no value columns after the axis columns".into(),
        });
    }

    let mut cells: Vec<(f64, f64, Vec<f64>, usize)> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Table {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != names.len() {
            return Err(Error::Table {
                line,
                message: format!("ragged row: expected {} fields, found {}", names.len(), rec.len()),
            });
        }
        let nums = rec
            .iter()
            .map(|cell| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Table {
                        line,
                        message: format!("non-numeric cell '{cell}'"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        let temp = if has_temp { nums[1] } else { 0.0 };
        cells.push((nums[0], temp, nums[n_axes..].to_vec(), line));
    }
    if cells.is_empty() {
        return Err(Error::Table {
            line: 2,
            message: "table has no data rows".into(),
        });
    }

    let mut grid: BTreeMap<(OrdF64, OrdF64), (Vec<f64>, usize)> = BTreeMap::new();
    for (f, t, vals, line) in cells {
        if let Some((_, first)) = grid.insert((OrdF64(f), OrdF64(t)), (vals, line)) {
            return Err(Error::Table {
                line,
                message: format!("duplicate axis values (freq_hz={f}, temp_degc={t}) first seen on line {first}"),
            });
        }
    }
    let mut freqs: Vec<f64> = grid.keys().map(|k| k.0 .0).collect();
    freqs.dedup();
    let mut temps: Vec<f64> = grid.keys().map(|k| k.1 .0).collect();
    temps.sort_by(f64::total_cmp);
    temps.dedup();
    if grid.len() != freqs.len() * temps.len() {
        return Err(Error::Table {
            line: 0,
            message: format!(
                "not a rectangular grid: {} rows for {} frequencies x {} temperatures",
                grid.len(),
                freqs.len(),
                temps.len()
            ),
        });
    }
    let mut values = vec![Vec::with_capacity(grid.len()); columns.len()];
    for (vals, _) in grid.values() {
        for (c, v) in vals.iter().enumerate() {
            values[c].push(*v);
        }
    }
    Ok(ParamTable {
        freq_hz: freqs,
        temp_degc: has_temp.then_some(temps),
        columns,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn db_row_extracts_s21() {
        let net = parse_touchstone("# GHz S DB R 50\n3.3 -15 170 18.0 -60 -25 10 -14 120\n").unwrap();
        assert_eq!(net.freq_hz, vec![3.3e9]);
        assert_eq!(net.s21_db, vec![18.0]);
        assert_eq!(net.format, ParamFormat::Db);
        assert_eq!(net.reference_ohm, 50.0);
    }

    #[test]
    fn ma_magnitude_ten_is_twenty_db() {
        let net = parse_touchstone("# MHz S MA R 50\n3300 0.1 0 10.0 45 0.001 0 0.2 0\n").unwrap();
        assert_eq!(net.freq_hz, vec![3.3e9]);
        assert!((net.s21_db[0] - 20.0).abs() < 1e-12);
    }

    #[test]
    fn ri_uses_modulus() {
        let net = parse_touchstone("# GHz S RI R 50\n3.3 0.1 0 3 4 0 0 0.1 0\n").unwrap();
        let oracle = 20.0 * 5f64.log10();
        assert!((net.s21_db[0] - oracle).abs() < 1e-12);
        assert!((net.s21_db[0] - 13.979_400_086_720_377).abs() < 1e-12);
    }

    #[test]
    fn defaults_and_comments() {
        let text = "! vendor header\n#\n1.0 0 0 2 0 0 0 0 0 ! inline\n\n2.0 0 0 4 0 0 0 0 0\n";
        let net = parse_touchstone(text).unwrap();
        assert_eq!(net.freq_hz, vec![1e9, 2e9]);
        assert_eq!(net.format, ParamFormat::Ma);
        assert!((net.s21_db[1] - 20.0 * 4f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn parse_errors() {
        let missing = parse_touchstone("3.3 0 0 1 0 0 0 0 0\n").unwrap_err();
        assert!(missing.to_string().contains("option line"), "{missing}");

        let descending = parse_touchstone("# GHz S DB R 50\n3.3 0 0 1 0 0 0 0 0\n3.2 0 0 1 0 0 0 0 0\n").unwrap_err();
        assert!(matches!(descending, Error::Touchstone { line: 3, .. }), "{descending}");

        let columns = parse_touchstone("# GHz S DB R 50\n3.3 0 0 1 0 0 0 0\n").unwrap_err();
        assert!(columns.to_string().contains("9 columns"), "{columns}");

        let token = parse_touchstone("# GHz S XY R 50\n").unwrap_err();
        assert!(token.to_string().contains("unsupported format token"), "{token}");

        let v2 = parse_touchstone("[Version] 2.0\n# GHz S DB R 50\n").unwrap_err();
        assert!(v2.to_string().contains("v2"), "{v2}");

        assert!(parse_touchstone("# GHz Y DB R 50\n").is_err());
        assert!(parse_touchstone("# GHz S DB R 50\n").is_err());
    }

    #[test]
    fn gain_lookup() {
        let table = GainTable::new(vec![3.0e9, 3.2e9, 3.6e9], vec![18.0, 20.0, 16.0]).unwrap();
        assert_eq!(table.gain_at(3.2e9).unwrap(), 20.0);
        assert!((table.gain_at(3.1e9).unwrap() - 19.0).abs() < 1e-12);
        assert!(matches!(table.gain_at(2.9e9), Err(Error::OutOfTableRange { .. })));
        assert!(table.gain_at(3.7e9).is_err());
        assert!(GainTable::new(vec![1.0, 1.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn param_table_lookup() {
        let csv = "freq_hz,temp_degc,nf_db\n\
                   1e9,-40,1\n1e9,25,2\n1e9,85,3\n\
                   2e9,-40,2\n2e9,25,3\n2e9,85,4\n\
                   3e9,-40,3\n3e9,25,4\n3e9,85,5\n";
        let t = load_param_table(csv).unwrap();
        assert_eq!(t.freq_hz, vec![1e9, 2e9, 3e9]);
        assert_eq!(t.temp_degc.as_deref(), Some(&[-40.0, 25.0, 85.0][..]));
        assert_eq!(t.lookup("nf_db", 3e9, Some(85.0)).unwrap(), 5.0);
        assert_eq!(t.lookup("nf_db", 1e9, Some(-40.0)).unwrap(), 1.0);
        assert!(t.lookup("nf_db", 1e9, None).is_err());
        assert!(t.lookup("oip3", 1e9, Some(25.0)).is_err());
    }

    #[test]
    fn bilinear_center_is_corner_average() {
        let csv = "freq_hz,temp_degc,g\n0,0,1\n0,10,3\n10,0,5\n10,10,11\n";
        let t = load_param_table(csv).unwrap();
        let centre = t.lookup("g", 5.0, Some(5.0)).unwrap();
        assert!((centre - (1.0 + 3.0 + 5.0 + 11.0) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn param_table_errors() {
        let ragged = load_param_table("freq_hz,nf_db\n1e9,1\n2e9\n").unwrap_err();
        assert!(matches!(ragged, Error::Table { line: 3, .. }), "{ragged}");
        assert!(ragged.to_string().contains("ragged"));

        let nan = load_param_table("freq_hz,nf_db\n1e9,abc\n").unwrap_err();
        assert!(nan.to_string().contains("non-numeric"), "{nan}");

        let dup = load_param_table("freq_hz,nf_db\n1e9,1\n1e9,2\n").unwrap_err();
        assert!(dup.to_string().contains("duplicate"), "{dup}");

        let holes = load_param_table("freq_hz,temp_degc,g\n0,0,1\n0,10,3\n10,0,5\n").unwrap_err();
        assert!(holes.to_string().contains("rectangular"), "{holes}");
    }

    #[test]
    fn frequency_only_table_becomes_gain_table() {
        let t = load_param_table("freq_hz,gain_db\n3.1e9,20\n3.5e9,16\n").unwrap();
        let g = t.gain_table("gain_db").unwrap();
        assert!((g.gain_at(3.3e9).unwrap() - 18.0).abs() < 1e-12);
    }
}
