//! Per-SQUID flux designs for a target speed profile.
//!
//! A profile can only be realized where `0 < c̃ ≤ 1`: the array cannot
//! propagate faster than its zero-flux speed, and it cannot propagate
//! backwards at all. Near `c̃ → 0` the required flux approaches `φ₀/2` and
//! the SQUID inductance diverges, so cells there are flagged as critical.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::roots;
use crate::spacetime::{metric_speed, SpacetimeError, SpeedProfile};
use crate::squid::{
    flux_for_speed, squid_inductance, Branch, FluxRatio, PhaseAssumption, SquidError, SquidParams,
};

/// Default flux margin around `φ₀/2` below which a cell counts as critical.
pub const DEFAULT_MARGIN_DELTA: f64 = 0.05;
/// Grid nodes used to bracket feasibility boundaries before bisection.
pub const FEASIBILITY_GRID_POINTS: usize = 4097;

const BOUNDARY_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error("window [{lo}, {hi}] is empty")]
    InvalidWindow { lo: f64, hi: f64 },
    #[error("cell count must be at least 1")]
    NoCells,
    #[error("margin {0} outside (0, 1/2)")]
    InvalidMargin(f64),
    #[error("no cell of the design is feasible")]
    EmptyDesign,
    #[error("no point satisfies the flux margin")]
    EmptyWindow,
    #[error("figure needs at least two points")]
    TooFewPoints,
    #[error(transparent)]
    Spacetime(#[from] SpacetimeError),
    #[error(transparent)]
    Squid(#[from] SquidError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self, DesignError> {
        if lo < hi && lo.is_finite() && hi.is_finite() {
            Ok(Self { lo, hi })
        } else {
            Err(DesignError::InvalidWindow { lo, hi })
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, other: &Window) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

impl From<Window> for (f64, f64) {
    fn from(w: Window) -> Self {
        (w.lo, w.hi)
    }
}

/// Region of the cubic profile that maps onto a physical flux:
/// `[−2^{1/3}, 0)`.
pub fn cubic_feasible_window() -> Window {
    Window {
        lo: -(2f64.cbrt()),
        hi: 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchPolicy {
    ForceCosPositive,
    ForceCosNegative,
    /// `CosNegative`: flux runs continuously from `φ₀` at `c̃ = 1` down toward
    /// `φ₀/2` at the horizon.
    #[default]
    Auto,
}

impl BranchPolicy {
    pub fn branch(self) -> Branch {
        match self {
            BranchPolicy::ForceCosPositive => Branch::CosPositive,
            BranchPolicy::ForceCosNegative | BranchPolicy::Auto => Branch::CosNegative,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DesignRequest {
    pub profile: SpeedProfile,
    pub window: Window,
    pub cell_count: usize,
    pub params: SquidParams,
    pub branch_policy: BranchPolicy,
    pub margin_delta: f64,
    pub phase: PhaseAssumption,
}

impl DesignRequest {
    pub fn new(profile: SpeedProfile, window: Window, cell_count: usize, params: SquidParams) -> Self {
        Self {
            profile,
            window,
            cell_count,
            params,
            branch_policy: BranchPolicy::Auto,
            margin_delta: DEFAULT_MARGIN_DELTA,
            phase: PhaseAssumption::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellDesign {
    pub index: usize,
    /// Cell centre in units of `a`.
    pub position: f64,
    pub target_speed: f64,
    pub speed_sq: f64,
    pub flux: Option<FluxRatio>,
    /// Henries.
    pub inductance: Option<f64>,
    pub critical: bool,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArrayDesign {
    pub window: Window,
    pub cell_width: f64,
    pub branch: Branch,
    pub margin_delta: f64,
    pub cells: Vec<CellDesign>,
}

impl ArrayDesign {
    pub fn feasible_cells(&self) -> impl Iterator<Item = &CellDesign> {
        self.cells.iter().filter(|c| c.feasible)
    }

    pub fn feasible_count(&self) -> usize {
        self.feasible_cells().count()
    }

    pub fn all_feasible(&self) -> bool {
        self.cells.iter().all(|c| c.feasible)
    }
}

fn realizable(profile: &SpeedProfile, x: f64) -> bool {
    match metric_speed(profile, x) {
        Ok(c) => c > 0.0 && c * c <= 1.0,
        Err(_) => false,
    }
}

/// Maximal runs of the predicate over `search`, boundaries refined by
/// bisection.
fn predicate_windows<P>(pred: P, search: Window, grid_points: usize) -> Vec<Window>
where
    P: Fn(f64) -> bool,
{
    let xs = roots::grid(search.lo, search.hi, grid_points);
    let inside: Vec<bool> = xs.iter().map(|&x| pred(x)).collect();
    let mut windows = Vec::new();
    let mut start: Option<f64> = None;
    for i in 0..xs.len() {
        match (start, inside[i]) {
            (None, true) => {
                start = Some(if i == 0 {
                    xs[0]
                } else {
                    roots::bisect_predicate(&pred, xs[i], xs[i - 1], BOUNDARY_TOL)
                });
            }
            (Some(lo), false) => {
                let hi = roots::bisect_predicate(&pred, xs[i - 1], xs[i], BOUNDARY_TOL);
                windows.push(Window { lo, hi });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(lo) = start {
        windows.push(Window {
            lo,
            hi: xs[xs.len() - 1],
        });
    }
    windows
}

/// Maximal sub-windows of `search` where `0 < c̃` and `c̃² ≤ 1`. A boundary
/// at a horizon is reported as the last realizable point before it.
pub fn feasibility_window(profile: &SpeedProfile, search: Window) -> Vec<Window> {
    feasibility_window_with(profile, search, FEASIBILITY_GRID_POINTS)
}

pub fn feasibility_window_with(
    profile: &SpeedProfile,
    search: Window,
    grid_points: usize,
) -> Vec<Window> {
    let Some((lo, hi)) = profile.clip(search.into()) else {
        return Vec::new();
    };
    predicate_windows(|x| realizable(profile, x), Window { lo, hi }, grid_points)
}

/// Map a profile onto one SQUID per cell, sampled at the cell centres.
pub fn design_array(request: &DesignRequest) -> Result<ArrayDesign, DesignError> {
    let window = Window::new(request.window.lo, request.window.hi)?;
    if request.cell_count == 0 {
        return Err(DesignError::NoCells);
    }
    check_margin(request.margin_delta)?;
    request.params.validate()?;

    let branch = request.branch_policy.branch();
    let width = window.width() / request.cell_count as f64;
    let cells = (0..request.cell_count)
        .map(|index| {
            let position = window.lo + (index as f64 + 0.5) * width;
            let target_speed = metric_speed(&request.profile, position)?;
            let speed_sq = target_speed * target_speed;
            let mut cell = CellDesign {
                index,
                position,
                target_speed,
                speed_sq,
                flux: None,
                inductance: None,
                critical: false,
                feasible: false,
            };
            if target_speed > 0.0 && speed_sq <= 1.0 {
                let flux = flux_for_speed(speed_sq, branch)?;
                cell.flux = Some(flux);
                cell.critical = (flux.value() - 0.5).abs() < request.margin_delta;
                match squid_inductance(&request.params, flux, request.phase) {
                    Ok(l) => {
                        cell.inductance = Some(l);
                        cell.feasible = true;
                    }
                    Err(SquidError::CriticalFlux { .. }) => cell.critical = true,
                    Err(e) => return Err(e.into()),
                }
            }
            Ok(cell)
        })
        .collect::<Result<Vec<_>, DesignError>>()?;

    if cells.iter().all(|c| !c.feasible) {
        return Err(DesignError::EmptyDesign);
    }
    Ok(ArrayDesign {
        window,
        cell_width: width,
        branch,
        margin_delta: request.margin_delta,
        cells,
    })
}

fn check_margin(delta: f64) -> Result<(), DesignError> {
    if delta > 0.0 && delta < 0.5 {
        Ok(())
    } else {
        Err(DesignError::InvalidMargin(delta))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalProximity {
    pub count: usize,
    /// `count` over the number of feasible cells.
    pub fraction: f64,
    pub positions: Vec<f64>,
}

/// Feasible cells whose flux lies within `delta` of `φ₀/2`.
pub fn critical_proximity(design: &ArrayDesign, delta: f64) -> Result<CriticalProximity, DesignError> {
    check_margin(delta)?;
    let feasible = design.feasible_count();
    let positions: Vec<f64> = design
        .feasible_cells()
        .filter(|c| c.flux.is_some_and(|f| (f.value() - 0.5).abs() < delta))
        .map(|c| c.position)
        .collect();
    Ok(CriticalProximity {
        count: positions.len(),
        fraction: if feasible == 0 {
            0.0
        } else {
            positions.len() as f64 / feasible as f64
        },
        positions,
    })
}

/// Widest sub-window of `search` where the `CosNegative` flux stays at least
/// `delta_f` above `φ₀/2`.
pub fn safe_window(profile: &SpeedProfile, search: Window, delta_f: f64) -> Result<Window, DesignError> {
    check_margin(delta_f)?;
    let Some((lo, hi)) = profile.clip(search.into()) else {
        return Err(DesignError::EmptyWindow);
    };
    let safe = |x: f64| {
        realizable(profile, x)
            && metric_speed(profile, x)
                .ok()
                .and_then(|c| flux_for_speed(c * c, Branch::CosNegative).ok())
                .is_some_and(|f| f.value() >= 0.5 + delta_f)
    };
    // Scanning inside each feasible run keeps its endpoints on the grid, so
    // safe slivers hugging a feasibility boundary are not stepped over.
    feasibility_window(profile, Window { lo, hi })
        .into_iter()
        .flat_map(|fw| predicate_windows(safe, fw, FEASIBILITY_GRID_POINTS))
        .max_by(|a, b| a.width().total_cmp(&b.width()))
        .ok_or(DesignError::EmptyWindow)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Figure1Row {
    pub x_over_a: f64,
    /// `π φ_ext / φ₀`.
    pub flux_pi: f64,
    pub threshold: f64,
}

/// External flux `π φ_ext / φ₀` of the cubic profile on the `CosNegative`
/// branch, sampled uniformly over `[−2^{1/3}, 0)`.
pub fn figure1_curve(point_count: usize) -> Result<Vec<Figure1Row>, DesignError> {
    if point_count < 2 {
        return Err(DesignError::TooFewPoints);
    }
    let profile = SpeedProfile::Cubic { scale_a: 1.0 };
    let window = cubic_feasible_window();
    let step = window.width() / point_count as f64;
    (0..point_count)
        .map(|i| {
            let x = window.lo + step * i as f64;
            let c = metric_speed(&profile, x)?;
            let f = flux_for_speed(c * c, Branch::CosNegative)?;
            Ok(Figure1Row {
                x_over_a: x,
                flux_pi: PI * f.value(),
                threshold: PI / 2.0,
            })
        })
        .collect()
}
