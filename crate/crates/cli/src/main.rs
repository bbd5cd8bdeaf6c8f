use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rxchain::cascade::{bottleneck_report, resolve_chain, rows_to_csv, CascadeResult, NoiseModel};
use rxchain::intermod::{frequency_plan_table, im3_level, in_band, mixer_spur_table, spurs_to_csv, two_tone_products};
use rxchain::model::{Chain, OperatingPoint};
use rxchain::sweeps::{
    calibrate_attenuator_at, flattening_target, monte_carlo, plot_csv, run_sweep, to_csv, worst_case, InterfererGrid,
    SweepGrid,
};
use rxchain::twotone::{design_nonlinearity, extract_ip3, simulate_two_tone, Ip3Estimate, SampleGrid};
use rxchain::{analyze, Error, Level};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Receive-chain budget analysis, sweeps, spur planning and two-tone
/// verification. Frequencies are in Hz (scientific notation accepted),
/// powers in dBm, temperatures in °C.
#[derive(Parser)]
#[command(name = "rxchain", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a chain file and list every violated rule.
    Validate {
        #[arg(long)]
        chain: PathBuf,
    },
    /// Totals and cumulative budget at one operating point.
    Analyze(PointArgs),
    /// Cumulative budget with per-stage IIP3 contributions.
    Budget(PointArgs),
    /// Evaluate a frequency × temperature × power (× interferer) grid.
    Sweep(SweepArgs),
    /// Frequency plan and mixer spur table at one RF frequency.
    Spurs(SpurArgs),
    /// Per-frequency adjustable-attenuator settings that flatten the gain.
    Calibrate(CalibrateArgs),
    /// Two-tone time-domain check of the closed-form IM3 and IP3 math.
    #[command(name = "verify-im3")]
    VerifyIm3(VerifyArgs),
    /// Nominal and ± tolerance gain corners.
    #[command(name = "worst-case")]
    WorstCase(PointArgs),
    /// Tolerance Monte Carlo summary.
    #[command(name = "monte-carlo")]
    MonteCarlo(MonteCarloArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct OutputArgs {
    /// Structured output format. Without --out the structured output
    /// replaces the text summary on stdout.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write structured output here (format inferred from a .json
    /// extension unless --format is given).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ChainArgs {
    #[arg(long)]
    chain: PathBuf,
    /// Adjustable attenuator setting, dB.
    #[arg(long, allow_negative_numbers = true)]
    atten: Option<f64>,
    /// Noise bandwidth, Hz (default: the chain's passband).
    #[arg(long)]
    bw: Option<f64>,
}

#[derive(Args)]
struct PointArgs {
    #[command(flatten)]
    chain: ChainArgs,
    #[arg(long)]
    freq: f64,
    #[arg(long, default_value_t = 25.0, allow_negative_numbers = true)]
    temp: f64,
    #[arg(long, default_value_t = -32.0, allow_negative_numbers = true)]
    pin: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    chain: ChainArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [3.1e9, 3.3e9, 3.5e9])]
    freqs: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-40.0, 25.0, 85.0])]
    temps: Vec<f64>,
    /// Input powers, dBm (default −122…−32 in 10 dB steps).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    powers: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1e6)]
    interferer_offset: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-92.0, -82.0, -32.0])]
    interferer_levels: Vec<f64>,
    /// Sweep without an interferer.
    #[arg(long)]
    no_interferer: bool,
    /// Also write long-format plot data (CSV) here.
    #[arg(long)]
    plot_out: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SpurArgs {
    #[arg(long)]
    chain: PathBuf,
    #[arg(long)]
    freq: f64,
    /// Which conversion to tabulate: 1 (RF→IF1) or 2 (IF1→IF2).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    mixer: u8,
    #[arg(long, default_value_t = 5)]
    max_m: u32,
    #[arg(long, default_value_t = 5)]
    max_n: u32,
    /// Also list two-tone products of these tones against the RF passband.
    #[arg(long, value_delimiter = ',')]
    tones: Option<Vec<f64>>,
    #[arg(long, default_value_t = 3)]
    max_order: u32,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    chain: PathBuf,
    #[arg(long)]
    bw: Option<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [3.1e9, 3.3e9, 3.5e9])]
    freqs: Vec<f64>,
    /// Target gain, dB (default: the lowest gain across --freqs at 0 dB
    /// attenuation).
    #[arg(long, allow_negative_numbers = true)]
    target: Option<f64>,
    #[arg(long, default_value_t = 25.0, allow_negative_numbers = true)]
    temp: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    gain: f64,
    #[arg(long, allow_negative_numbers = true)]
    oip3: f64,
    /// Per-tone drive levels, dBm, ascending; IP3 is extracted from the
    /// lowest and highest.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-40.0, -30.0])]
    drive: Vec<f64>,
    #[arg(long, default_value_t = 60e6)]
    f1: f64,
    #[arg(long, default_value_t = 61e6)]
    f2: f64,
    #[arg(long, default_value_t = 1.024e9)]
    sample_rate: f64,
    #[arg(long, default_value_t = 1 << 20)]
    samples: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct MonteCarloArgs {
    #[command(flatten)]
    point: PointArgs,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long)]
    seed: u64,
}

struct Emit {
    summary: String,
    csv: String,
    json: String,
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn emit(output: &OutputArgs, e: Emit) -> Result<()> {
    let pick = |f: Format| match f {
        Format::Csv => &e.csv,
        Format::Json => &e.json,
    };
    match (&output.out, output.format) {
        (Some(path), fmt) => {
            let fmt = fmt.unwrap_or(if path.extension().is_some_and(|x| x == "json") {
                Format::Json
            } else {
                Format::Csv
            });
            write_file(path, pick(fmt))?;
            stdout(&format!("{}wrote {}\n", e.summary, path.display()))
        }
        (None, Some(fmt)) => stdout(pick(fmt)),
        (None, None) => stdout(&e.summary),
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn stdout(text: &str) -> Result<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

/// Error text with each distinct cause once.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = e.to_string();
    for cause in e.chain().skip(1) {
        let c = cause.to_string();
        if !msg.contains(&c) {
            msg = format!("{msg}: {c}");
        }
    }
    msg
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn load_chain(args: &ChainArgs) -> Result<(Chain, NoiseModel)> {
    let mut chain = Chain::load(&args.chain)?;
    if let Some(a) = args.atten {
        chain = chain.with_attenuator_setting(a)?;
    }
    let model = noise_model(&chain, args.bw)?;
    Ok((chain, model))
}

fn noise_model(chain: &Chain, bw: Option<f64>) -> Result<NoiseModel> {
    Ok(match bw {
        Some(bw) => NoiseModel::new(bw)?,
        None => NoiseModel::for_chain(chain),
    })
}

fn point_of(a: &PointArgs) -> OperatingPoint {
    OperatingPoint::new(a.freq, a.temp, a.pin)
}

fn totals_text(r: &CascadeResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "total gain    {:>9.2} dB", r.total_gain_db);
    let _ = writeln!(s, "noise figure  {:>9.3} dB", r.total_nf_db);
    let _ = writeln!(s, "IIP3          {:>9.2} dBm", r.total_iip3_dbm);
    let _ = writeln!(s, "OIP3          {:>9.2} dBm", r.total_oip3_dbm);
    let _ = writeln!(s, "noise floor   {:>9.2} dBm", r.noise_floor_dbm);
    let _ = writeln!(s, "SFDR          {:>9.2} dB", r.sfdr_db);
    let _ = writeln!(s, "output power  {:>9.2} dBm", r.output_power_dbm);
    s
}

fn rows_text(r: &CascadeResult) -> String {
    let mut s = format!(
        "{:<12} {:>9} {:>8} {:>10} {:>9}\n",
        "stage", "gain dB", "NF dB", "IIP3 dBm", "SFDR dB"
    );
    for row in &r.rows {
        let _ = writeln!(
            s,
            "{:<12} {:>9.2} {:>8.3} {:>10.2} {:>9.2}",
            row.label, row.cum_gain_db, row.cum_nf_db, row.cum_iip3_dbm, row.cum_sfdr_db
        );
    }
    s
}

fn header(chain: &Chain, p: &OperatingPoint) -> String {
    format!("chain: {}\npoint: {p}\n", chain.name)
}

fn validate(path: &Path) -> Result<()> {
    match Chain::load(path) {
        Ok(c) => {
            println!("valid: '{}', {} stages", c.name, c.stages.len());
            Ok(())
        }
        Err(Error::InvalidChain(vs)) => {
            println!("invalid: {} violation(s)", vs.len());
            for v in &vs {
                println!("  {v}");
            }
            bail!("{} is not a valid chain", path.display())
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_analyze(a: &PointArgs) -> Result<()> {
    let (chain, model) = load_chain(&a.chain)?;
    let p = point_of(a);
    let r = analyze(&chain, &p, &model)?;
    let summary = format!("{}\n{}\n{}", header(&chain, &p), totals_text(&r), rows_text(&r));
    emit(
        &a.output,
        Emit {
            summary,
            csv: rows_to_csv(&r)?,
            json: json(&r)?,
        },
    )
}

fn cmd_budget(a: &PointArgs) -> Result<()> {
    let (chain, model) = load_chain(&a.chain)?;
    let p = point_of(a);
    let r = analyze(&chain, &p, &model)?;
    let contributions = bottleneck_report(&resolve_chain(&chain, &p)?)?;
    let mut summary = format!("{}\n{}\nIIP3 contributions\n", header(&chain, &p), rows_text(&r));
    for c in &contributions {
        let _ = writeln!(summary, "  {:<12} {:>6.1} %", c.label, 100.0 * c.share);
    }
    #[derive(Serialize)]
    struct Budget<'a> {
        result: &'a CascadeResult,
        contributions: &'a [rxchain::cascade::Contribution],
    }
    let doc = Budget {
        result: &r,
        contributions: &contributions,
    };
    emit(
        &a.output,
        Emit {
            summary,
            csv: rows_to_csv(&r)?,
            json: json(&doc)?,
        },
    )
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let (chain, model) = load_chain(&a.chain)?;
    let defaults = SweepGrid::default();
    let grid = SweepGrid {
        freqs_hz: a.freqs.clone(),
        temps_degc: a.temps.clone(),
        powers_dbm: a.powers.clone().unwrap_or(defaults.powers_dbm),
        interferer: (!a.no_interferer).then(|| InterfererGrid {
            offset_hz: a.interferer_offset,
            levels_dbm: a.interferer_levels.clone(),
        }),
    };
    let rows = run_sweep(&chain, &grid, &model)?;
    let mut summary = format!("chain: {}\n{} rows\n\n", chain.name, rows.len());
    let _ = writeln!(
        summary,
        "{:>14} {:>8} {:>9} {:>8} {:>9}",
        "freq Hz", "temp °C", "gain dB", "NF dB", "SFDR dB"
    );
    for r in rows.iter().filter(|r| {
        r.p_in_dbm == grid.powers_dbm[0] && r.interferer_dbm == grid.interferer.as_ref().map(|i| i.levels_dbm[0])
    }) {
        let _ = writeln!(
            summary,
            "{:>14} {:>8} {:>9.2} {:>8.3} {:>9.2}",
            r.rf_hz, r.temp_degc, r.total_gain_db, r.total_nf_db, r.sfdr_db
        );
    }
    if let Some(path) = &a.plot_out {
        write_file(path, &plot_csv(&rows)?)?;
        let _ = writeln!(summary, "wrote plot data {}", path.display());
    }
    emit(
        &a.output,
        Emit {
            summary,
            csv: to_csv(&rows)?,
            json: json(&rows)?,
        },
    )
}

fn cmd_spurs(a: &SpurArgs) -> Result<()> {
    let chain = Chain::load(&a.chain)?;
    let plan = chain.plan.as_ref().context("chain has no frequency plan")?;
    plan.check_rf(a.freq)?;
    let t = frequency_plan_table(plan, a.freq)?;
    let (sig, lo, center) = match a.mixer {
        1 => (t.rf_hz, t.lo1_hz, t.if1_hz),
        _ => (t.if1_hz, t.lo2_hz, t.if2_hz),
    };
    let spurs = mixer_spur_table(sig, lo, a.max_m, a.max_n, center, plan.passband_hz)?;
    let mut summary = String::new();
    let _ = writeln!(summary, "RF      {:>14} Hz", t.rf_hz);
    let _ = writeln!(summary, "LO1     {:>14} Hz", t.lo1_hz);
    let _ = writeln!(summary, "IF1     {:>14} Hz", t.if1_hz);
    let _ = writeln!(summary, "image1  {:>14} Hz", t.image1_hz);
    let _ = writeln!(summary, "LO2     {:>14} Hz", t.lo2_hz);
    let _ = writeln!(summary, "IF2     {:>14} Hz", t.if2_hz);
    let _ = writeln!(summary, "image2  {:>14} Hz", t.image2_hz);
    let _ = writeln!(
        summary,
        "\nmixer {} spurs (m ≤ {}, n ≤ {}) in the {} Hz band at {} Hz:",
        a.mixer, a.max_m, a.max_n, plan.passband_hz, center
    );
    for s in spurs.iter().filter(|s| s.product.in_band) {
        let tag = if s.desired { " (desired)" } else { "" };
        let _ = writeln!(
            summary,
            "  m={:<2} n={:<3} {:>14} Hz{tag}",
            s.product.m, s.product.n, s.product.freq_hz
        );
    }
    if let Some(tones) = &a.tones {
        if tones.len() != 2 {
            bail!("--tones takes exactly two frequencies, got {}", tones.len());
        }
        let products = in_band(
            &two_tone_products(tones[0], tones[1], a.max_order)?,
            a.freq,
            plan.passband_hz,
        )?;
        let _ = writeln!(summary, "\ntwo-tone products in band at {} Hz:", a.freq);
        for p in products.iter().filter(|p| p.in_band) {
            let _ = writeln!(summary, "  order {} m={} n={} {:>14} Hz", p.order, p.m, p.n, p.freq_hz);
        }
    }
    #[derive(Serialize)]
    struct Spurs<'a> {
        plan: &'a rxchain::intermod::PlanFrequencies,
        spurs: &'a [rxchain::intermod::SpurEntry],
    }
    let doc = Spurs {
        plan: &t,
        spurs: &spurs,
    };
    emit(
        &a.output,
        Emit {
            summary,
            csv: spurs_to_csv(&spurs)?,
            json: json(&doc)?,
        },
    )
}

fn cmd_calibrate(a: &CalibrateArgs) -> Result<()> {
    let chain = Chain::load(&a.chain)?;
    let model = noise_model(&chain, a.bw)?;
    let target = match a.target {
        Some(t) => t,
        None => flattening_target(&chain, &a.freqs, a.temp, &model)?,
    };
    let table = calibrate_attenuator_at(&chain, &a.freqs, target, &model, a.temp)?;
    let mut summary = format!("chain: {}\ntarget gain {target:.2} dB at {} °C\n\n", chain.name, a.temp);
    let _ = writeln!(
        summary,
        "{:>14} {:>10} {:>10} {:>9}",
        "freq Hz", "setting dB", "gain dB", "error dB"
    );
    for e in &table {
        let _ = writeln!(
            summary,
            "{:>14} {:>10.1} {:>10.3} {:>9.3}",
            e.freq_hz, e.setting_db, e.achieved_gain_db, e.error_db
        );
    }
    emit(
        &a.output,
        Emit {
            summary,
            csv: to_csv(&table)?,
            json: json(&table)?,
        },
    )
}

#[derive(Serialize)]
struct VerifyRow {
    drive_dbm: f64,
    fundamental_out_dbm: f64,
    im3_low_out_dbm: f64,
    im3_high_out_dbm: f64,
    im3_predicted_out_dbm: f64,
}

#[derive(Serialize)]
struct VerifyReport {
    gain_db: f64,
    configured_oip3_dbm: f64,
    configured_iip3_dbm: f64,
    rows: Vec<VerifyRow>,
    extracted: Ip3Estimate,
}

fn cmd_verify(a: &VerifyArgs) -> Result<()> {
    if a.drive.len() < 2 {
        bail!("--drive needs at least two levels");
    }
    let model = design_nonlinearity(a.gain, a.oip3)?;
    let iip3 = a.oip3 - a.gain;
    let grid = SampleGrid {
        sample_rate_hz: a.sample_rate,
        num_samples: a.samples,
    };
    let meas = a
        .drive
        .iter()
        .map(|&p| simulate_two_tone(&model, a.f1, a.f2, p, grid))
        .collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<VerifyRow> = a
        .drive
        .iter()
        .zip(&meas)
        .map(|(&p, m)| {
            let (low, _) = im3_level(p, p, iip3)?;
            Ok(VerifyRow {
                drive_dbm: p,
                fundamental_out_dbm: m.fundamental_dbm(),
                im3_low_out_dbm: m.im3_low.power_dbm,
                im3_high_out_dbm: m.im3_high.power_dbm,
                im3_predicted_out_dbm: low + a.gain,
            })
        })
        .collect::<Result<_, Error>>()?;
    let (lo, hi) = (0, a.drive.len() - 1);
    let est = extract_ip3(&meas[lo], &meas[hi], a.drive[lo], a.drive[hi], a.gain)?;

    let mut s = format!("model: gain {} dB, OIP3 {} dBm (IIP3 {} dBm)\n\n", a.gain, a.oip3, iip3);
    let _ = writeln!(
        s,
        "{:>9} {:>12} {:>12} {:>12} {:>12} {:>8}",
        "drive", "fund out", "IM3 pred", "IM3 low", "IM3 high", "delta"
    );
    for r in &rows {
        let _ = writeln!(
            s,
            "{:>9.2} {:>12.3} {:>12.3} {:>12.3} {:>12.3} {:>8.4}",
            r.drive_dbm,
            r.fundamental_out_dbm,
            r.im3_predicted_out_dbm,
            r.im3_low_out_dbm,
            r.im3_high_out_dbm,
            0.5 * (r.im3_low_out_dbm + r.im3_high_out_dbm) - r.im3_predicted_out_dbm
        );
    }
    let _ = writeln!(
        s,
        "\nIM3 slope {:.4} dB/dB, fundamental slope {:.4} dB/dB",
        est.im3_slope, est.fundamental_slope
    );
    let _ = writeln!(
        s,
        "IIP3 extracted {:.3} dBm, configured {:.3} dBm, delta {:.4} dB",
        est.iip3_dbm,
        iip3,
        est.iip3_dbm - iip3
    );
    let _ = writeln!(
        s,
        "OIP3 extracted {:.3} dBm, configured {:.3} dBm, delta {:.4} dB",
        est.oip3_dbm,
        a.oip3,
        est.oip3_dbm - a.oip3
    );

    let report = VerifyReport {
        gain_db: a.gain,
        configured_oip3_dbm: a.oip3,
        configured_iip3_dbm: iip3,
        rows,
        extracted: est,
    };
    let csv = to_csv(&report.rows)?;
    emit(
        &a.output,
        Emit {
            summary: s,
            csv,
            json: json(&report)?,
        },
    )
}

fn cmd_worst_case(a: &PointArgs) -> Result<()> {
    let (chain, model) = load_chain(&a.chain)?;
    let p = point_of(a);
    let w = worst_case(&chain, &p, &model)?;
    let mut s = header(&chain, &p);
    let _ = writeln!(
        s,
        "\n{:<9} {:>9} {:>8} {:>10} {:>9}",
        "corner", "gain dB", "NF dB", "IIP3 dBm", "SFDR dB"
    );
    #[derive(Serialize)]
    struct Corner {
        corner: &'static str,
        gain_db: f64,
        nf_db: f64,
        iip3_dbm: Level,
        sfdr_db: Level,
    }
    let corners: Vec<Corner> = [
        ("min-gain", &w.min_gain),
        ("nominal", &w.nominal),
        ("max-gain", &w.max_gain),
    ]
    .into_iter()
    .map(|(corner, r)| Corner {
        corner,
        gain_db: r.total_gain_db,
        nf_db: r.total_nf_db,
        iip3_dbm: r.total_iip3_dbm,
        sfdr_db: r.sfdr_db,
    })
    .collect();
    for c in &corners {
        let _ = writeln!(
            s,
            "{:<9} {:>9.2} {:>8.3} {:>10.2} {:>9.2}",
            c.corner, c.gain_db, c.nf_db, c.iip3_dbm, c.sfdr_db
        );
    }
    emit(
        &a.output,
        Emit {
            summary: s,
            csv: to_csv(&corners)?,
            json: json(&w)?,
        },
    )
}

fn cmd_monte_carlo(a: &MonteCarloArgs) -> Result<()> {
    let (chain, model) = load_chain(&a.point.chain)?;
    let p = point_of(&a.point);
    let m = monte_carlo(&chain, &p, &model, a.trials, a.seed)?;
    let mut s = format!("{}trials {}, seed {}\n\n", header(&chain, &p), m.trials, m.seed);
    let _ = writeln!(
        s,
        "{:<9} {:>10} {:>8} {:>10} {:>10}",
        "metric", "mean", "std", "min", "max"
    );
    #[derive(Serialize)]
    struct Line {
        metric: &'static str,
        mean: f64,
        std: f64,
        min: f64,
        max: f64,
    }
    let lines: Vec<Line> = [
        ("gain_db", Some(m.gain_db)),
        ("nf_db", Some(m.nf_db)),
        ("iip3_dbm", m.iip3_dbm),
        ("sfdr_db", m.sfdr_db),
    ]
    .into_iter()
    .filter_map(|(metric, v)| {
        v.map(|v| Line {
            metric,
            mean: v.mean,
            std: v.std,
            min: v.min,
            max: v.max,
        })
    })
    .collect();
    for l in &lines {
        let _ = writeln!(
            s,
            "{:<9} {:>10.3} {:>8.4} {:>10.3} {:>10.3}",
            l.metric, l.mean, l.std, l.min, l.max
        );
    }
    emit(
        &a.point.output,
        Emit {
            summary: s,
            csv: to_csv(&lines)?,
            json: json(&m)?,
        },
    )
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Validate { chain } => validate(chain),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Budget(a) => cmd_budget(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Spurs(a) => cmd_spurs(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::VerifyIm3(a) => cmd_verify(a),
        Command::WorstCase(a) => cmd_worst_case(a),
        Command::MonteCarlo(a) => cmd_monte_carlo(a),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(1)
        }
    }
}
