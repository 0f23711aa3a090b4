//! Command implementations behind the `coil-link` binary.

use std::ffi::OsString;
use std::io::{self, IsTerminal, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use coil_link::link_model::{pte_of_scenario, z11, zeq_rational, zpri, AlphaCapacitance};
use coil_link::lsk::{
    detune_solve_with, flip_threshold_with, sweep_coupling_with, KRange, SweepScale, DEFAULT_SAMPLES,
};
use coil_link::par::Execution;
use coil_link::scenario_file::{parse_scenario_file, parse_si, ScenarioConfig, ScenarioError};
use coil_link::table::{Cell, ResultTable};
use coil_link::transient::{decode_lsk, envelope, parse_bits, simulate};
use coil_link::{LinkError, LinkScenario, LoadState, Preset};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Computation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Computation(_) => 3,
        }
    }
}

impl From<LinkError> for CliError {
    fn from(e: LinkError) -> Self {
        match e {
            LinkError::Domain(_) | LinkError::InvalidConfig(_) | LinkError::SingularInductance(_) => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Computation(e.to_string()),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Io { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "coil-link", version, about = "Inductive link and LSK uplink analysis")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Scenario file (key = value with [section] headers).
    #[arg(long, global = true, value_name = "FILE", conflicts_with = "preset")]
    pub scenario: Option<PathBuf>,

    /// Built-in coil preset.
    #[arg(long, global = true, value_parser = parse_preset)]
    pub preset: Option<Preset>,

    /// Secondary parasitic capacitance, e.g. 12p.
    #[arg(long, global = true, value_name = "VALUE", value_parser = parse_quantity, allow_hyphen_values = true)]
    pub cp: Option<f64>,

    /// Fabrication error of C_s1 in percent.
    #[arg(long = "cs1-error", global = true, value_name = "PCT", value_parser = parse_percent, allow_hyphen_values = true)]
    pub cs1_error: Option<f64>,

    /// Primary series capacitor, e.g. 17.03p.
    #[arg(long, global = true, value_name = "VALUE", value_parser = parse_quantity, allow_hyphen_values = true)]
    pub cs1: Option<f64>,

    /// Coupling value, or MIN:MAX for range commands.
    #[arg(long, global = true, value_name = "VALUE|RANGE", value_parser = parse_coupling, allow_hyphen_values = true)]
    pub k: Option<Coupling>,

    /// Output CSV path; stdout when absent.
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,

    /// Also write a line chart next to the CSV.
    #[arg(long, global = true, requires = "out")]
    pub svg: bool,

    /// Evaluate sweeps on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Power transfer efficiency per preset.
    Pte {
        #[arg(long, value_enum, default_value_t = AlphaMode::Effective)]
        alpha_cap: AlphaMode,
    },
    /// Z11, Zeq and Zpri for both load states.
    Impedance {
        /// Evaluation frequency in Hz; defaults to the drive frequency.
        #[arg(long, value_parser = parse_quantity, allow_hyphen_values = true)]
        freq: Option<f64>,
    },
    /// delta_zpri and delta_i1 across a coupling range.
    SweepK {
        #[arg(long)]
        points: Option<usize>,
        #[arg(long, value_enum)]
        scale: Option<ScaleArg>,
    },
    /// Coupling at which the LSK polarity flips.
    FlipThreshold {
        #[arg(long)]
        points: Option<usize>,
    },
    /// Smallest C_s1 detune keeping the polarity over the range.
    Detune {
        /// Required worst-case current margin in amperes.
        #[arg(long, value_parser = parse_quantity, default_value = "0", allow_hyphen_values = true)]
        margin: f64,
    },
    /// Time-domain trace of the switched link.
    Transient {
        #[arg(long)]
        pattern: Option<String>,
        /// Keep every Nth sample.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        stride: u64,
    },
    /// Envelope decode of the switched link.
    Decode {
        #[arg(long)]
        pattern: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlphaMode {
    Effective,
    Bare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    Value(f64),
    Range(f64, f64),
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse()
}

fn parse_quantity(s: &str) -> Result<f64, String> {
    parse_si(s).ok_or_else(|| format!("'{s}' is not a number"))
}

fn parse_percent(s: &str) -> Result<f64, String> {
    let body = s.trim().trim_end_matches('%');
    body.parse::<f64>()
        .map(|p| p / 100.0)
        .map_err(|_| format!("'{s}' is not a percentage"))
}

fn parse_coupling(s: &str) -> Result<Coupling, String> {
    match s.split_once(':') {
        Some((a, b)) => Ok(Coupling::Range(parse_quantity(a)?, parse_quantity(b)?)),
        None => parse_quantity(s).map(Coupling::Value),
    }
}

/// Output of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub table: ResultTable,
    /// Columns `(x, y)` of the series drawn by `--svg`.
    pub chart: Option<(usize, usize)>,
    pub title: String,
    pub notes: Vec<String>,
}

struct Context {
    config: ScenarioConfig,
    preset: Option<Preset>,
    from_file: bool,
    exec: Execution,
}

impl Context {
    fn new(common: &CommonArgs) -> Result<Self, CliError> {
        let (mut config, from_file) = match &common.scenario {
            Some(path) => (parse_scenario_file(path)?, true),
            None => (ScenarioConfig::from_preset(common.preset.unwrap_or(Preset::Flat)), false),
        };
        if let Some(c_s1) = common.cs1 {
            config.scenario.primary_tank.c_s1 = c_s1;
        }
        if let Some(c_p) = common.cp {
            config.scenario.secondary_tank.c_p = c_p;
            config.mismatch.c_p_override = c_p;
        }
        if let Some(err) = common.cs1_error {
            config.mismatch.c_s1_relative_error = err;
        }
        match common.k {
            Some(Coupling::Value(k)) => config.scenario.coupling = k,
            Some(Coupling::Range(lo, hi)) => {
                config.sweep.k_min = lo;
                config.sweep.k_max = hi;
            }
            None => {}
        }
        config.scenario.validate()?;
        config.mismatch.validate()?;
        Ok(Self {
            config,
            preset: common.preset,
            from_file,
            exec: if common.sequential {
                Execution::Sequential
            } else {
                Execution::default()
            },
        })
    }

    /// Scenario with the mismatch applied, for single-point commands.
    fn effective(&self) -> LinkScenario {
        self.config.mismatch.apply(&self.config.scenario)
    }

    fn range(&self) -> Result<KRange, CliError> {
        Ok(KRange::new(self.config.sweep.k_min, self.config.sweep.k_max)?)
    }
}

fn require_point(common: &CommonArgs, command: &str) -> Result<(), CliError> {
    if let Some(Coupling::Range(..)) = common.k {
        return Err(CliError::Usage(format!("{command} takes a single --k value, not a range")));
    }
    Ok(())
}

fn require_range(common: &CommonArgs, command: &str) -> Result<(), CliError> {
    if let Some(Coupling::Value(_)) = common.k {
        return Err(CliError::Usage(format!("{command} takes a --k range MIN:MAX")));
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<Report, CliError> {
    let common = &cli.common;
    let ctx = Context::new(common)?;
    match &cli.command {
        Command::Pte { alpha_cap } => {
            require_point(common, "pte")?;
            pte_table(common, &ctx, *alpha_cap)
        }
        Command::Impedance { freq } => {
            require_point(common, "impedance")?;
            impedance_table(&ctx, *freq)
        }
        Command::SweepK { points, scale } => {
            require_range(common, "sweep-k")?;
            sweep_table(&ctx, *points, *scale)
        }
        Command::FlipThreshold { points } => {
            require_range(common, "flip-threshold")?;
            flip_table(&ctx, *points)
        }
        Command::Detune { margin } => {
            require_range(common, "detune")?;
            detune_table(&ctx, *margin)
        }
        Command::Transient { pattern, stride } => {
            require_point(common, "transient")?;
            transient_table(ctx, pattern.as_deref(), *stride as usize)
        }
        Command::Decode { pattern } => {
            require_point(common, "decode")?;
            decode_table(ctx, pattern.as_deref())
        }
    }
}

fn pte_table(common: &CommonArgs, ctx: &Context, mode: AlphaMode) -> Result<Report, CliError> {
    let alpha_cap = match mode {
        AlphaMode::Effective => AlphaCapacitance::Effective,
        AlphaMode::Bare => AlphaCapacitance::Bare,
    };
    let mut rows: Vec<(String, LinkScenario)> = Vec::new();
    if ctx.from_file || ctx.preset.is_some() {
        let label = ctx.preset.map_or("scenario", |p| p.name());
        rows.push((label.to_string(), ctx.effective()));
    } else {
        for preset in Preset::ALL {
            let sub = CommonArgs {
                preset: Some(preset),
                scenario: None,
                out: None,
                svg: false,
                ..*common
            };
            rows.push((preset.name().to_string(), Context::new(&sub)?.effective()));
        }
    }

    let mut table = ResultTable::new(["preset", "coupling", "q1", "q2", "alpha", "eta"]);
    for (label, s) in rows {
        let d = s.derived(LoadState::Light, alpha_cap);
        let eta = pte_of_scenario(&s, LoadState::Light, alpha_cap)?;
        table.push(vec![
            label.into(),
            s.coupling.into(),
            d.q1.into(),
            d.q2.into(),
            d.alpha.into(),
            eta.into(),
        ]);
    }
    Ok(Report {
        table,
        chart: None,
        title: "power transfer efficiency".into(),
        notes: Vec::new(),
    })
}

fn impedance_table(ctx: &Context, freq: Option<f64>) -> Result<Report, CliError> {
    let s = ctx.effective();
    let f = freq.unwrap_or(s.primary_tank.drive_frequency);
    if !(f > 0.0 && f.is_finite()) {
        return Err(CliError::Validation(format!("freq must be positive, got {f}")));
    }
    let w = 2.0 * std::f64::consts::PI * f;
    let mut table = ResultTable::new([
        "frequency",
        "load",
        "z11_re",
        "z11_im",
        "zeq_re",
        "zeq_im",
        "zpri_re",
        "zpri_im",
        "i1_magnitude",
    ]);
    let z1 = z11(w, &s);
    for load in LoadState::BOTH {
        let zeq = zeq_rational(w, &s, load);
        let zp = zpri(w, &s, load);
        if !(zp.norm() > 0.0) {
            return Err(LinkError::DegenerateImpedance(zp.norm()).into());
        }
        table.push(vec![
            f.into(),
            load.name().into(),
            z1.re.into(),
            z1.im.into(),
            zeq.re.into(),
            zeq.im.into(),
            zp.re.into(),
            zp.im.into(),
            (s.primary_tank.source_amplitude / zp.norm()).into(),
        ]);
    }
    Ok(Report {
        table,
        chart: None,
        title: "primary impedance".into(),
        notes: Vec::new(),
    })
}

fn sweep_table(ctx: &Context, points: Option<usize>, scale: Option<ScaleArg>) -> Result<Report, CliError> {
    let mut spec = ctx.config.sweep;
    if let Some(p) = points {
        spec.points = p;
    }
    match scale {
        Some(ScaleArg::Linear) => spec.scale = SweepScale::Linear,
        Some(ScaleArg::Log) => spec.scale = SweepScale::Log,
        None => {}
    }
    let result = sweep_coupling_with(&ctx.config.scenario, &ctx.config.mismatch, &spec, ctx.exec)?;
    let mut table = ResultTable::new([
        "k",
        "delta_zpri_re",
        "delta_zpri_im",
        "delta_zpri_magnitude_difference",
        "delta_i1",
    ]);
    for r in &result.rows {
        table.push(vec![
            r.k.into(),
            r.delta_zpri.re.into(),
            r.delta_zpri.im.into(),
            r.delta_zpri_magnitude_difference.into(),
            r.delta_i1.into(),
        ]);
    }
    Ok(Report {
        table,
        chart: Some((0, 4)),
        title: "delta_i1 versus coupling".into(),
        notes: vec![format!("delta_i1 changes sign {} time(s)", result.sign_changes())],
    })
}

fn flip_table(ctx: &Context, points: Option<usize>) -> Result<Report, CliError> {
    let found = flip_threshold_with(
        &ctx.config.scenario,
        &ctx.config.mismatch,
        ctx.range()?,
        points.unwrap_or(DEFAULT_SAMPLES),
        ctx.exec,
    )?;
    let mut table = ResultTable::new(["k", "sign_changes", "status"]);
    let mut notes = Vec::new();
    match found {
        Some(t) => {
            if t.is_multiple() {
                notes.push(format!("warning: {} sign changes, reporting the lowest", t.sign_changes));
            }
            table.push(vec![t.k.into(), Cell::Int(t.sign_changes as i64), "flip".into()]);
        }
        None => table.push(vec![Cell::Empty, Cell::Int(0), "no_flip".into()]),
    }
    Ok(Report {
        table,
        chart: None,
        title: "flip threshold".into(),
        notes,
    })
}

fn detune_table(ctx: &Context, margin: f64) -> Result<Report, CliError> {
    let sol = detune_solve_with(&ctx.config.scenario, &ctx.config.mismatch, ctx.range()?, margin, ctx.exec)?;
    let mut table = ResultTable::new([
        "margin",
        "c_s1_solved",
        "relative_detune",
        "flip_free_range_k_min",
        "flip_free_range_k_max",
        "margin_achieved",
        "zero_detune_sufficient",
    ]);
    table.push(vec![
        margin.into(),
        sol.c_s1_solved.into(),
        sol.relative_detune.into(),
        sol.flip_free_range.0.into(),
        sol.flip_free_range.1.into(),
        sol.margin_achieved.into(),
        sol.zero_detune_sufficient.into(),
    ]);
    Ok(Report {
        table,
        chart: None,
        title: "primary detune".into(),
        notes: Vec::new(),
    })
}

fn apply_pattern(config: &mut ScenarioConfig, pattern: Option<&str>) -> Result<(), CliError> {
    if let Some(p) = pattern {
        config.transient.sw_pattern = parse_bits(p)?;
        let end = config.transient.decode_end();
        if config.transient.duration < end {
            config.transient.duration = end;
        }
    }
    Ok(())
}

fn transient_table(mut ctx: Context, pattern: Option<&str>, stride: usize) -> Result<Report, CliError> {
    apply_pattern(&mut ctx.config, pattern)?;
    let trace = simulate(&ctx.effective(), &ctx.config.transient)?;
    let mut table = ResultTable::new(["t", "i1", "i2", "v_c1", "v_c2", "sw"]);
    for s in trace.samples.iter().step_by(stride) {
        table.push(vec![
            s.t.into(),
            s.i1.into(),
            s.i2.into(),
            s.v_c1.into(),
            s.v_c2.into(),
            Cell::Int(s.sw as i64),
        ]);
    }
    Ok(Report {
        table,
        chart: Some((0, 1)),
        title: "primary current".into(),
        notes: Vec::new(),
    })
}

fn decode_table(mut ctx: Context, pattern: Option<&str>) -> Result<Report, CliError> {
    apply_pattern(&mut ctx.config, pattern)?;
    let s = ctx.effective();
    let cfg = &ctx.config.transient;
    let trace = simulate(&s, cfg)?;
    let env = envelope(&trace, s.primary_tank.drive_frequency)?;
    let result = decode_lsk(&env, cfg)?;
    let mut table = ResultTable::new([
        "bit",
        "sw",
        "bits",
        "per_bit_envelope_means",
        "threshold",
        "polarity_flipped",
    ]);
    for (j, mean) in result.per_bit_envelope_means.iter().enumerate() {
        table.push(vec![
            Cell::Int(j as i64),
            Cell::Int(cfg.sw_pattern[j] as i64),
            Cell::Int(result.bits[j] as i64),
            (*mean).into(),
            result.threshold.into(),
            result.polarity_flipped.into(),
        ]);
    }
    Ok(Report {
        table,
        chart: Some((0, 3)),
        title: "per-bit envelope".into(),
        notes: vec![format!("polarity_flipped = {}", result.polarity_flipped)],
    })
}

fn chart_path(out: &Path) -> PathBuf {
    out.with_extension("svg")
}

fn write_report(report: &Report, common: &CommonArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let io_err = |e: &dyn std::fmt::Display| CliError::Computation(format!("write failed: {e}"));
    match &common.out {
        Some(path) => {
            let file = std::fs::File::create(path)
                .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", path.display())))?;
            report.table.write_csv(io::BufWriter::new(file)).map_err(|e| io_err(&e))?;
        }
        None => report.table.write_csv(&mut *stdout).map_err(|e| io_err(&e))?,
    }
    if common.svg {
        let out = common.out.as_deref().expect("clap requires --out with --svg");
        let svg = report.chart.and_then(|(x, y)| {
            let mut series = ResultTable::new([report.table.headers[x].clone(), report.table.headers[y].clone()]);
            for row in &report.table.rows {
                series.push(vec![row[x].clone(), row[y].clone()]);
            }
            coil_link::svg::render_chart(&series, &report.title)
        });
        match svg {
            Some(text) => {
                let path = chart_path(out);
                std::fs::write(&path, text)
                    .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
            }
            None => warn("this command has no series to chart; no SVG written"),
        }
    }
    Ok(())
}

fn use_color() -> bool {
    std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty()) && io::stderr().is_terminal()
}

fn warn(message: &str) {
    if use_color() {
        eprintln!("\x1b[33mwarning:\x1b[0m {message}");
    } else {
        eprintln!("warning: {message}");
    }
}

fn report_error(e: &CliError) {
    if use_color() {
        eprintln!("\x1b[31merror:\x1b[0m {e}");
    } else {
        eprintln!("error: {e}");
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let outcome = execute(&cli).and_then(|report| {
        for note in &report.notes {
            match note.strip_prefix("warning: ") {
                Some(rest) => warn(rest),
                None => eprintln!("{note}"),
            }
        }
        write_report(&report, &cli.common, stdout)
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            report_error(&e);
            e.exit_code()
        }
    }
}
