//! `chrono-squid` command-line front end.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | configuration, usage, or I/O error |
//! | 2 | design contains infeasible cells |
//! | 3 | no cell of the design is feasible |
//! | 4 | a horizon lies on the geodesic path |
//! | 5 | simulated time-of-flight off by more than [`TOF_TOLERANCE`] |
//! | 6 | cells too close to the critical flux for the inductance cap |

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::designer::{
    critical_proximity, design_array, feasibility_window, figure1_curve, safe_window, ArrayDesign,
    DesignError, Window,
};
use crate::lattice::{self, LatticeError, PulseSpec, TimeOfFlight};
use crate::spacetime::{self, SpacetimeError, TripReport};
use crate::squid::Branch;

pub const OUT_ENV: &str = "CHRONO_SQUID_OUT";
/// Largest relative time-of-flight error `simulate` accepts.
pub const TOF_TOLERANCE: f64 = 0.05;
pub const DEFAULT_FIGURE_POINTS: usize = 200;
const HORIZON_GRID_POINTS: usize = 4097;

#[derive(Debug, Parser)]
#[command(name = "chrono-squid", version, about = "Flux design and verification for SQUID-array spacetime simulators")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (default: config out_dir, then $CHRONO_SQUID_OUT, then ".").
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct LayoutArgs {
    /// Design window in units of a, e.g. --window=-1.26:-1.0
    #[arg(long, value_name = "MIN:MAX", allow_hyphen_values = true, value_parser = parse_window)]
    pub window: Option<(f64, f64)>,
    /// Number of SQUID cells in the window.
    #[arg(long, value_name = "N")]
    pub cells: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-cell flux design: design.csv and feasibility.json.
    Design(LayoutArgs),
    /// One-way and round-trip null geodesic times between two positions.
    Geodesics {
        #[arg(long, allow_negative_numbers = true, value_name = "X")]
        x1: f64,
        #[arg(long, allow_negative_numbers = true, value_name = "X")]
        x2: f64,
    },
    /// External flux versus position for the cubic profile: figure1.csv.
    Figure1 {
        #[arg(long, default_value_t = DEFAULT_FIGURE_POINTS, value_name = "N")]
        points: usize,
    },
    /// Lattice time-of-flight check of a design: probes.csv and tof.json.
    Simulate(LayoutArgs),
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("expected MIN:MAX, got {s:?}"))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok((num(lo)?, num(hi)?))
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("design has {count} infeasible cells")]
    Infeasible { count: usize },
    #[error(transparent)]
    Design(DesignError),
    #[error(transparent)]
    Spacetime(SpacetimeError),
    #[error(transparent)]
    Lattice(LatticeError),
    #[error("time-of-flight relative error {0:e} exceeds {TOF_TOLERANCE}")]
    TofTolerance(f64),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::Io { .. } => 1,
            CliError::Infeasible { .. } | CliError::Lattice(LatticeError::InfeasibleCells(_)) => 2,
            CliError::Design(DesignError::EmptyDesign) => 3,
            CliError::Spacetime(SpacetimeError::HorizonInPath { .. }) => 4,
            CliError::TofTolerance(_) => 5,
            CliError::Lattice(LatticeError::CriticalCells { .. }) => 6,
            CliError::Design(_) | CliError::Spacetime(_) | CliError::Lattice(_) => 1,
        }
    }
}

impl From<DesignError> for CliError {
    fn from(e: DesignError) -> Self {
        match e {
            DesignError::Spacetime(s) => CliError::Spacetime(s),
            other => CliError::Design(other),
        }
    }
}

impl From<SpacetimeError> for CliError {
    fn from(e: SpacetimeError) -> Self {
        CliError::Spacetime(e)
    }
}

impl From<LatticeError> for CliError {
    fn from(e: LatticeError) -> Self {
        match e {
            LatticeError::Spacetime(s) => CliError::Spacetime(s),
            other => CliError::Lattice(other),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |e| CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    }
}

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn branch_name(b: Branch) -> &'static str {
    match b {
        Branch::CosPositive => "cos_positive",
        Branch::CosNegative => "cos_negative",
    }
}

/// Resolved inputs for one invocation.
struct Context {
    config: RunConfig,
    out_dir: PathBuf,
}

impl Context {
    fn new(cli: &Cli, env_out: Option<PathBuf>) -> Result<Self, CliError> {
        let config = match &cli.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let out_dir = cli
            .out
            .clone()
            .or_else(|| config.out_dir.clone())
            .or(env_out)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(Self { config, out_dir })
    }

    fn apply_layout(&mut self, args: &LayoutArgs) {
        if let Some((lo, hi)) = args.window {
            self.config.design.window = [lo, hi];
        }
        if let Some(n) = args.cells {
            self.config.design.cells = n;
        }
    }

    fn create(&self, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
        fs::create_dir_all(&self.out_dir).map_err(io_err(&self.out_dir))?;
        let path = self.out_dir.join(name);
        let file = File::create(&path).map_err(io_err(&path))?;
        Ok((path, BufWriter::new(file)))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let (path, mut w) = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io {
            path: path.clone(),
            source: e.into(),
        })?;
        writeln!(w).and_then(|_| w.flush()).map_err(io_err(&path))?;
        Ok(path)
    }
}

#[derive(Debug, Serialize)]
struct FeasibilitySummary {
    window: Window,
    cells: usize,
    feasible_cells: usize,
    infeasible_cells: Vec<usize>,
    branch: &'static str,
    search_window: Window,
    feasibility_windows: Vec<Window>,
    margin_delta: f64,
    safe_window: Option<Window>,
    critical_proximity_count: usize,
    critical_proximity_fraction: f64,
}

fn write_design_csv(ctx: &Context, design: &ArrayDesign) -> Result<PathBuf, CliError> {
    let (path, w) = ctx.create("design.csv")?;
    let mut out = csv::Writer::from_writer(w);
    let mut rows = || -> csv::Result<()> {
        out.write_record([
            "index",
            "x_over_a",
            "c_tilde",
            "flux_over_phi0",
            "inductance_H",
            "critical_flag",
            "feasible_flag",
        ])?;
        for c in &design.cells {
            out.write_record([
                c.index.to_string(),
                float(c.position),
                float(c.target_speed),
                c.flux.map(|f| float(f.value())).unwrap_or_default(),
                c.inductance.map(float).unwrap_or_default(),
                u8::from(c.critical).to_string(),
                u8::from(c.feasible).to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    };
    rows().map_err(csv_err(&path))?;
    Ok(path)
}

fn cmd_design(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let request = cfg.design_request()?;
    let design = design_array(&request)?;
    let search = cfg.search_window()?;
    let proximity = critical_proximity(&design, cfg.design.margin_delta)?;
    let safe = match safe_window(&request.profile, search, cfg.design.margin_delta) {
        Ok(w) => Some(w),
        Err(DesignError::EmptyWindow) => None,
        Err(e) => return Err(e.into()),
    };
    let infeasible: Vec<usize> = design
        .cells
        .iter()
        .filter(|c| !c.feasible)
        .map(|c| c.index)
        .collect();
    let summary = FeasibilitySummary {
        window: design.window,
        cells: design.cells.len(),
        feasible_cells: design.feasible_count(),
        infeasible_cells: infeasible.clone(),
        branch: branch_name(design.branch),
        search_window: search,
        feasibility_windows: feasibility_window(&request.profile, search),
        margin_delta: cfg.design.margin_delta,
        safe_window: safe,
        critical_proximity_count: proximity.count,
        critical_proximity_fraction: proximity.fraction,
    };
    let csv_path = write_design_csv(ctx, &design)?;
    let json_path = ctx.write_json("feasibility.json", &summary)?;
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    if infeasible.is_empty() {
        Ok(())
    } else {
        Err(CliError::Infeasible {
            count: infeasible.len(),
        })
    }
}

#[derive(Debug, Serialize)]
struct GeodesicSummary {
    #[serde(flatten)]
    trip: TripReport,
    one_way_time_s: f64,
    round_trip_time_s: f64,
    scale_a_m: f64,
    base_speed_m_per_s: f64,
    horizons: Vec<f64>,
}

fn cmd_geodesics(ctx: &Context, x1: f64, x2: f64) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let profile = cfg.profile()?;
    let params = cfg.params()?;
    let scale_a = cfg.scale_a()?;
    let search = cfg.search_window()?;
    let horizons = spacetime::find_horizons(
        &profile,
        (search.lo.min(x1.min(x2)), search.hi.max(x1.max(x2))),
        HORIZON_GRID_POINTS,
    );
    let trip = spacetime::round_trip_time(&profile, x1, x2)?;
    let seconds = scale_a / params.base_speed();
    let summary = GeodesicSummary {
        one_way_time_s: trip.one_way_time * seconds,
        round_trip_time_s: trip.round_trip_time * seconds,
        trip,
        scale_a_m: scale_a,
        base_speed_m_per_s: params.base_speed(),
        horizons,
    };
    let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Usage(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn cmd_figure1(ctx: &Context, points: usize) -> Result<(), CliError> {
    let rows = figure1_curve(points)?;
    let (path, w) = ctx.create("figure1.csv")?;
    let mut out = csv::Writer::from_writer(w);
    let mut write = || -> csv::Result<()> {
        out.write_record(["x_over_a", "flux_pi", "threshold"])?;
        for r in &rows {
            out.write_record([float(r.x_over_a), float(r.flux_pi), float(r.threshold)])?;
        }
        out.flush()?;
        Ok(())
    };
    write().map_err(csv_err(&path))?;
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct SimulationSummary {
    #[serde(flatten)]
    tof: TimeOfFlight,
    design_cells: usize,
    padding_cells: usize,
    continuum_delay: f64,
    continuum_relative_error: f64,
    carrier_angular_frequency: f64,
    envelope_width: f64,
}

/// Padding (per side) that keeps boundary echoes out of the probe gates for
/// the default pulse shape scaled by `carrier_scale`.
fn auto_padding(design: &ArrayDesign, carrier_scale: f64) -> usize {
    let (min, max) = design
        .cells
        .iter()
        .filter_map(|c| c.inductance)
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), l| (lo.min(l), hi.max(l)));
    let ratio = if min.is_finite() { (max / min).sqrt() } else { 1.0 };
    (100.0 * ratio / carrier_scale).ceil() as usize + 16
}

fn cmd_simulate(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    cfg.validate()?;
    let request = cfg.design_request()?;
    let design = design_array(&request)?;
    let params = cfg.params()?;
    let l = &cfg.lattice;
    let padding = l.padding.unwrap_or_else(|| auto_padding(&design, l.carrier_scale));
    let spec = lattice::build_lattice(&design, &params, padding, l.boundary, l.cfl)?;

    let injection = padding.saturating_sub(8).max(1);
    let mut pulse = PulseSpec::recommended(&spec, injection);
    pulse.carrier_angular_frequency *= l.carrier_scale;
    pulse.envelope_width /= l.carrier_scale;
    pulse.amplitude = l.amplitude;

    let (a, b) = (spec.graded.start, spec.graded.end);
    let tof = lattice::run_time_of_flight(&spec, &pulse, a, b)?;
    let continuum = lattice::continuum_delay(&request.profile, &design, &spec, &params, a, b)?;

    let (probe_path, w) = ctx.create("probes.csv")?;
    tof.write_probe_csv(w).map_err(csv_err(&probe_path))?;
    let relative_error = tof.relative_error;
    let summary = SimulationSummary {
        continuum_relative_error: ((tof.measured_delay - continuum) / continuum).abs(),
        tof,
        design_cells: design.cells.len(),
        padding_cells: padding,
        continuum_delay: continuum,
        carrier_angular_frequency: pulse.carrier_angular_frequency,
        envelope_width: pulse.envelope_width,
    };
    let json_path = ctx.write_json("tof.json", &summary)?;
    println!(
        "relative_error {relative_error:e}; wrote {} and {}",
        probe_path.display(),
        json_path.display()
    );
    if relative_error <= TOF_TOLERANCE {
        Ok(())
    } else {
        Err(CliError::TofTolerance(relative_error))
    }
}

pub fn execute(cli: &Cli, env_out: Option<PathBuf>) -> Result<(), CliError> {
    let mut ctx = Context::new(cli, env_out)?;
    match &cli.command {
        Command::Design(layout) => {
            ctx.apply_layout(layout);
            ctx.config.validate()?;
            cmd_design(&ctx)
        }
        Command::Geodesics { x1, x2 } => cmd_geodesics(&ctx, *x1, *x2),
        Command::Figure1 { points } => cmd_figure1(&ctx, *points),
        Command::Simulate(layout) => {
            ctx.apply_layout(layout);
            cmd_simulate(&ctx)
        }
    }
}

/// Parse `args`, run, and return the process exit code.
pub fn run<I, T>(args: I, env_out: Option<PathBuf>) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli, env_out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_flag_parses_negatives() {
        let cli = Cli::try_parse_from(["chrono-squid", "design", "--window", "-1.26:-1.0", "--cells", "8"])
            .unwrap();
        match cli.command {
            Command::Design(l) => {
                assert_eq!(l.window, Some((-1.26, -1.0)));
                assert_eq!(l.cells, Some(8));
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_window("1.0").is_err());
        assert!(parse_window("a:1").is_err());
    }

    #[test]
    fn geodesic_flags_accept_negatives() {
        let cli = Cli::try_parse_from(["chrono-squid", "geodesics", "--x1", "-1.2", "--x2", "-1.0"]).unwrap();
        assert!(matches!(cli.command, Command::Geodesics { x1, x2 } if x1 == -1.2 && x2 == -1.0));
    }

    #[test]
    fn exit_codes_partition_errors() {
        assert_eq!(CliError::Usage(String::new()).exit_code(), 1);
        assert_eq!(CliError::Infeasible { count: 1 }.exit_code(), 2);
        assert_eq!(CliError::from(DesignError::EmptyDesign).exit_code(), 3);
        let h = SpacetimeError::HorizonInPath { x1: -1.0, x2: 1.0, at: 0.0 };
        assert_eq!(CliError::from(DesignError::Spacetime(h.clone())).exit_code(), 4);
        assert_eq!(CliError::from(h).exit_code(), 4);
        assert_eq!(CliError::TofTolerance(0.1).exit_code(), 5);
        let c = LatticeError::CriticalCells { cells: vec![0], cap: 1.0 };
        assert_eq!(CliError::from(c).exit_code(), 6);
    }

    #[test]
    fn float_has_seventeen_digits() {
        assert_eq!(float(0.1), "1.0000000000000001e-1");
        assert_eq!(float(-2.0), "-2.0000000000000000e0");
    }
}
