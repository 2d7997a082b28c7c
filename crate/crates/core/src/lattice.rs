//! Leapfrog time-domain solver for the discrete LC ladder.
//!
//! The array is modelled as a series-L / shunt-C ladder: branch `k` carries
//! the SQUID inductance `L_k` between nodes `k` and `k + 1`, and every node
//! has the cell capacitance `C_s` to ground. `N` branches give `N + 1` nodes.
//! Currents live on half steps and voltages on whole steps:
//!
//! ```text
//! I_k  ← I_k + (Δt / L_k) (V_k − V_{k+1})
//! V_j  ← V_j + (Δt / C_s) (I_{j−1} − I_j)
//! ```
//!
//! A pulse launched into the ladder is timed at two probe nodes and the delay
//! compared with `Σ √(L_k C_s)`, the discrete form of `∫ dx / c(x)`.

use std::io::Write;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::designer::ArrayDesign;
use crate::spacetime::{self, SpacetimeError, SpeedProfile};
use crate::squid::SquidParams;

pub const DEFAULT_CFL_FACTOR: f64 = 0.5;
/// Default cap on a cell inductance, in multiples of the zero-flux value.
pub const DEFAULT_INDUCTANCE_CAP_RATIO: f64 = 1e3;
/// Any node voltage above this multiple of the source amplitude is a blowup.
pub const BLOWUP_RATIO: f64 = 1e12;
/// Carrier limit as a fraction of the smallest cell cutoff `2 / √(L C)`.
pub const DISPERSION_GUARD: f64 = 0.1;
pub const MIN_PROBE_SEPARATION: usize = 16;
/// Probe energy at `b` below this fraction of that at `a` means no arrival.
pub const ARRIVAL_ENERGY_RATIO: f64 = 1e-6;
/// Half-width of the timing gate around each probe's peak, in envelope widths.
pub const GATE_WIDTHS: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("design cells {0:?} are infeasible")]
    InfeasibleCells(Vec<usize>),
    #[error(
        "{} cells from index {} exceed the inductance cap {cap:e} H (flux too close to the critical value)",
        cells.len(),
        cells.first().copied().unwrap_or_default()
    )]
    CriticalCells { cells: Vec<usize>, cap: f64 },
    #[error("invalid lattice: {0}")]
    InvalidSpec(String),
    #[error("time step {dt:e} s exceeds the CFL limit {limit:e} s")]
    CflViolation { dt: f64, limit: f64 },
    #[error("invalid pulse: {0}")]
    InvalidPulse(String),
    #[error("carrier {carrier:e} rad/s exceeds the dispersion guard {limit:e} rad/s")]
    DispersionGuard { carrier: f64, limit: f64 },
    #[error("invalid probes: {0}")]
    InvalidProbes(String),
    #[error("numerical blowup at step {step}")]
    NumericalBlowup { step: usize },
    #[error("pulse did not reach probe {probe}")]
    NoArrival { probe: usize },
    #[error("padding too short: boundary reflections would overlap the probe gates ({0})")]
    InsufficientPadding(String),
    #[error(transparent)]
    Spacetime(#[from] SpacetimeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Resistor `√(L_end / C_s)` to ground at both end nodes.
    #[default]
    MatchedTermination,
    /// Open ends.
    Reflective,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeSpec {
    /// Henries, one per branch.
    pub cell_inductances: Vec<f64>,
    /// Farads, at every node.
    pub cell_capacitance: f64,
    /// Meters.
    pub cell_length: f64,
    /// Seconds.
    pub time_step: f64,
    pub cfl_factor: f64,
    pub boundary: Boundary,
    pub inductance_cap: f64,
    /// Branches that come from the design (the rest is padding).
    pub graded: Range<usize>,
}

impl LatticeSpec {
    /// Ladder with the time step set from the CFL rule on the smallest cell.
    pub fn new(
        cell_inductances: Vec<f64>,
        cell_capacitance: f64,
        cell_length: f64,
        boundary: Boundary,
        cfl_factor: f64,
        inductance_cap: f64,
    ) -> Result<Self, LatticeError> {
        if cell_inductances.is_empty() {
            return Err(LatticeError::InvalidSpec("no cells".into()));
        }
        if !(cfl_factor > 0.0 && cfl_factor <= 1.0) {
            return Err(LatticeError::InvalidSpec(format!(
                "CFL factor {cfl_factor} outside (0, 1]"
            )));
        }
        let n = cell_inductances.len();
        let mut spec = Self {
            cell_inductances,
            cell_capacitance,
            cell_length,
            time_step: 0.0,
            cfl_factor,
            boundary,
            inductance_cap,
            graded: 0..n,
        };
        spec.time_step = cfl_factor * spec.cfl_limit();
        spec.validate()?;
        Ok(spec)
    }

    pub fn uniform(
        cells: usize,
        inductance: f64,
        cell_capacitance: f64,
        cell_length: f64,
        boundary: Boundary,
    ) -> Result<Self, LatticeError> {
        Self::new(
            vec![inductance; cells],
            cell_capacitance,
            cell_length,
            boundary,
            DEFAULT_CFL_FACTOR,
            inductance * DEFAULT_INDUCTANCE_CAP_RATIO,
        )
    }

    pub fn cells(&self) -> usize {
        self.cell_inductances.len()
    }

    pub fn nodes(&self) -> usize {
        self.cells() + 1
    }

    pub fn min_inductance(&self) -> f64 {
        self.cell_inductances.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `√(L_min C_s)`.
    pub fn cfl_limit(&self) -> f64 {
        (self.min_inductance() * self.cell_capacitance).sqrt()
    }

    /// Propagation time across branch `k`, `√(L_k C_s)`.
    pub fn cell_delay(&self, k: usize) -> f64 {
        (self.cell_inductances[k] * self.cell_capacitance).sqrt()
    }

    /// `Σ √(L_k C_s)` from node `a` to node `b`, negative when `b < a`.
    pub fn predicted_delay(&self, a: usize, b: usize) -> f64 {
        let (lo, hi) = (a.min(b), a.max(b));
        let sum: f64 = (lo..hi).map(|k| self.cell_delay(k)).sum();
        if b >= a {
            sum
        } else {
            -sum
        }
    }

    pub fn validate(&self) -> Result<(), LatticeError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.cell_capacitance) || !positive(self.cell_length) {
            return Err(LatticeError::InvalidSpec(
                "capacitance and cell length must be positive".into(),
            ));
        }
        if let Some(k) = self.cell_inductances.iter().position(|&l| !positive(l)) {
            return Err(LatticeError::InvalidSpec(format!(
                "cell {k} has non-positive inductance"
            )));
        }
        let over: Vec<usize> = self
            .cell_inductances
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > self.inductance_cap)
            .map(|(k, _)| k)
            .collect();
        if !over.is_empty() {
            return Err(LatticeError::CriticalCells {
                cells: over,
                cap: self.inductance_cap,
            });
        }
        let limit = self.cfl_factor * self.cfl_limit();
        if self.time_step.is_nan() || self.time_step <= 0.0 || self.time_step > limit * (1.0 + 1e-12) {
            return Err(LatticeError::CflViolation {
                dt: self.time_step,
                limit,
            });
        }
        if self.graded.end > self.cells() || self.graded.start > self.graded.end {
            return Err(LatticeError::InvalidSpec("graded range out of bounds".into()));
        }
        Ok(())
    }
}

/// Ladder for a design, padded on each side with copies of the end cells.
pub fn build_lattice(
    design: &ArrayDesign,
    params: &SquidParams,
    padding_cells: usize,
    boundary: Boundary,
    cfl_factor: f64,
) -> Result<LatticeSpec, LatticeError> {
    build_lattice_with_cap(
        design,
        params,
        padding_cells,
        boundary,
        cfl_factor,
        DEFAULT_INDUCTANCE_CAP_RATIO * params.zero_flux_inductance(),
    )
}

pub fn build_lattice_with_cap(
    design: &ArrayDesign,
    params: &SquidParams,
    padding_cells: usize,
    boundary: Boundary,
    cfl_factor: f64,
    inductance_cap: f64,
) -> Result<LatticeSpec, LatticeError> {
    let infeasible: Vec<usize> = design
        .cells
        .iter()
        .filter(|c| !c.feasible && !c.critical)
        .map(|c| c.index)
        .collect();
    if !infeasible.is_empty() {
        return Err(LatticeError::InfeasibleCells(infeasible));
    }
    // Cells refused by the inductance law itself sit at the divergence.
    let critical: Vec<usize> = design
        .cells
        .iter()
        .filter(|c| c.inductance.is_none_or(|l| l > inductance_cap))
        .map(|c| c.index)
        .collect();
    if !critical.is_empty() {
        return Err(LatticeError::CriticalCells {
            cells: critical,
            cap: inductance_cap,
        });
    }
    let graded: Vec<f64> = design.cells.iter().filter_map(|c| c.inductance).collect();
    let first = graded[0];
    let last = graded[graded.len() - 1];
    let mut inductances = Vec::with_capacity(graded.len() + 2 * padding_cells);
    inductances.extend(std::iter::repeat_n(first, padding_cells));
    inductances.extend_from_slice(&graded);
    inductances.extend(std::iter::repeat_n(last, padding_cells));

    let mut spec = LatticeSpec::new(
        inductances,
        params.cell_capacitance,
        params.cell_length,
        boundary,
        cfl_factor,
        inductance_cap,
    )?;
    spec.graded = padding_cells..padding_cells + graded.len();
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    pub node_voltages: Vec<f64>,
    pub branch_currents: Vec<f64>,
    pub step_index: usize,
    /// Voltage scale for the blowup check.
    pub amplitude_scale: f64,
}

impl LatticeState {
    pub fn zeros(spec: &LatticeSpec) -> Self {
        Self {
            node_voltages: vec![0.0; spec.nodes()],
            branch_currents: vec![0.0; spec.cells()],
            step_index: 0,
            amplitude_scale: 1.0,
        }
    }

    fn check_shape(&self, spec: &LatticeSpec) -> Result<(), LatticeError> {
        if self.node_voltages.len() != spec.nodes() || self.branch_currents.len() != spec.cells() {
            return Err(LatticeError::InvalidSpec(format!(
                "state has {} nodes / {} branches, lattice has {} / {}",
                self.node_voltages.len(),
                self.branch_currents.len(),
                spec.nodes(),
                spec.cells()
            )));
        }
        Ok(())
    }

    /// One leapfrog step in place; `injection` adds a current (amperes) into
    /// a node during the voltage half of the step.
    pub fn advance(
        &mut self,
        spec: &LatticeSpec,
        injection: Option<(usize, f64)>,
    ) -> Result<(), LatticeError> {
        let dt = spec.time_step;
        let v = &mut self.node_voltages;
        let i = &mut self.branch_currents;
        for (k, current) in i.iter_mut().enumerate() {
            *current += dt / spec.cell_inductances[k] * (v[k] - v[k + 1]);
        }

        let kc = dt / spec.cell_capacitance;
        let last = v.len() - 1;
        for j in 1..last {
            v[j] += kc * (i[j - 1] - i[j]);
        }
        let (left_in, right_in) = (-i[0], i[last - 1]);
        match spec.boundary {
            Boundary::Reflective => {
                v[0] += kc * left_in;
                v[last] += kc * right_in;
            }
            Boundary::MatchedTermination => {
                // Trapezoidal resistor current keeps the end update stable.
                let n = spec.cells();
                for (node, inflow, l) in [
                    (0, left_in, spec.cell_inductances[0]),
                    (last, right_in, spec.cell_inductances[n - 1]),
                ] {
                    let r = (l / spec.cell_capacitance).sqrt();
                    let alpha = dt / (2.0 * r * spec.cell_capacitance);
                    v[node] = ((1.0 - alpha) * v[node] + kc * inflow) / (1.0 + alpha);
                }
            }
        }
        if let Some((node, current)) = injection {
            v[node] += kc * current;
        }

        self.step_index += 1;
        let limit = BLOWUP_RATIO * self.amplitude_scale;
        if v.iter().any(|x| x.is_nan() || x.abs() > limit) {
            return Err(LatticeError::NumericalBlowup {
                step: self.step_index,
            });
        }
        Ok(())
    }

    /// Energy conserved exactly by the leapfrog update:
    /// `Σ C V²/2 + Σ L I⁻ I⁺/2`, with `I⁻`, `I⁺` the currents half a step
    /// before and after the current voltages.
    pub fn discrete_energy(&self, spec: &LatticeSpec) -> f64 {
        let v = &self.node_voltages;
        let electric: f64 = v.iter().map(|x| 0.5 * spec.cell_capacitance * x * x).sum();
        let magnetic: f64 = self
            .branch_currents
            .iter()
            .enumerate()
            .map(|(k, &before)| {
                let l = spec.cell_inductances[k];
                let after = before + spec.time_step / l * (v[k] - v[k + 1]);
                0.5 * l * before * after
            })
            .sum();
        electric + magnetic
    }
}

/// Advance a copy of `state` by one step with no source.
pub fn step(state: &LatticeState, spec: &LatticeSpec) -> Result<LatticeState, LatticeError> {
    state.check_shape(spec)?;
    let mut next = state.clone();
    next.advance(spec, None)?;
    Ok(next)
}

/// Gaussian-envelope pulse injected as a soft current source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    /// rad/s; zero gives a baseband Gaussian.
    pub carrier_angular_frequency: f64,
    /// Standard deviation of the envelope, seconds.
    pub envelope_width: f64,
    /// Volts, approximate amplitude of each launched wave.
    pub amplitude: f64,
    pub injection_cell: usize,
}

impl PulseSpec {
    /// Carrier at the dispersion guard with an envelope of three carrier
    /// periods over 2π, i.e. narrowband enough to carry no DC.
    pub fn recommended(spec: &LatticeSpec, injection_cell: usize) -> Self {
        let carrier = dispersion_report(spec).recommended_max_carrier;
        Self {
            carrier_angular_frequency: carrier,
            envelope_width: 3.0 / carrier,
            amplitude: 1e-3,
            injection_cell,
        }
    }

    /// Source start offset: the envelope peak is this long after `t = 0`.
    pub fn peak_time(&self) -> f64 {
        GATE_WIDTHS * self.envelope_width
    }

    fn gate(&self) -> f64 {
        GATE_WIDTHS * self.envelope_width
    }

    fn validate(&self, spec: &LatticeSpec) -> Result<(), LatticeError> {
        if !(self.envelope_width > 0.0 && self.envelope_width.is_finite()) {
            return Err(LatticeError::InvalidPulse("envelope width must be positive".into()));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(LatticeError::InvalidPulse("amplitude must be positive".into()));
        }
        if self.carrier_angular_frequency.is_nan() || self.carrier_angular_frequency < 0.0 {
            return Err(LatticeError::InvalidPulse("carrier must be non-negative".into()));
        }
        if self.injection_cell == 0 || self.injection_cell >= spec.cells() {
            return Err(LatticeError::InvalidPulse(format!(
                "injection node {} not interior",
                self.injection_cell
            )));
        }
        let limit = dispersion_report(spec).recommended_max_carrier;
        if self.carrier_angular_frequency > limit * (1.0 + 1e-12) {
            return Err(LatticeError::DispersionGuard {
                carrier: self.carrier_angular_frequency,
                limit,
            });
        }
        Ok(())
    }

    /// Source current at time `t`.
    fn current(&self, spec: &LatticeSpec, t: f64) -> f64 {
        let l = spec.cell_inductances[self.injection_cell.min(spec.cells() - 1)];
        let impedance = (l / spec.cell_capacitance).sqrt();
        // A node source splits into two waves of voltage Z I / 2.
        let peak = 2.0 * self.amplitude / impedance;
        let s = (t - self.peak_time()) / self.envelope_width;
        peak * (-0.5 * s * s).exp() * (self.carrier_angular_frequency * (t - self.peak_time())).cos()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeSample {
    pub step: usize,
    pub time_s: f64,
    pub voltage_a: f64,
    pub voltage_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeOfFlight {
    pub probe_a: usize,
    pub probe_b: usize,
    /// Seconds; centroid at `b` minus centroid at `a`.
    pub measured_delay: f64,
    /// Seconds; `Σ √(L_k C_s)` between the probes.
    pub predicted_delay: f64,
    pub relative_error: f64,
    pub cells: usize,
    pub dt: f64,
    pub steps: usize,
    #[serde(skip)]
    pub record: Vec<ProbeSample>,
}

impl TimeOfFlight {
    pub fn write_probe_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "time_s", "voltage_a", "voltage_b"])?;
        for s in &self.record {
            w.write_record([
                s.step.to_string(),
                format!("{:.16e}", s.time_s),
                format!("{:.16e}", s.voltage_a),
                format!("{:.16e}", s.voltage_b),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Energy-weighted arrival time of `v²` inside `±gate` around its peak.
fn gated_centroid(times: &[f64], v: &[f64], gate: f64) -> f64 {
    let peak = v
        .iter()
        .enumerate()
        .max_by(|a, b| (a.1 * a.1).total_cmp(&(b.1 * b.1)))
        .map(|(k, _)| times[k])
        .unwrap_or(0.0);
    let (mut num, mut den) = (0.0, 0.0);
    for (&t, &x) in times.iter().zip(v) {
        if (t - peak).abs() <= gate {
            num += t * x * x;
            den += x * x;
        }
    }
    num / den
}

/// Launch `pulse`, record voltages at both probes, and compare the
/// centroid delay with `Σ √(L_k C_s)`.
pub fn run_time_of_flight(
    spec: &LatticeSpec,
    pulse: &PulseSpec,
    probe_a: usize,
    probe_b: usize,
) -> Result<TimeOfFlight, LatticeError> {
    spec.validate()?;
    pulse.validate(spec)?;
    let graded_nodes = spec.graded.start..=spec.graded.end;
    for p in [probe_a, probe_b] {
        if !graded_nodes.contains(&p) {
            return Err(LatticeError::InvalidProbes(format!(
                "probe {p} outside graded nodes {graded_nodes:?}"
            )));
        }
    }
    if probe_a.abs_diff(probe_b) < MIN_PROBE_SEPARATION {
        return Err(LatticeError::InvalidProbes(format!(
            "probes {probe_a} and {probe_b} closer than {MIN_PROBE_SEPARATION} cells"
        )));
    }
    let (near, far) = (probe_a.min(probe_b), probe_a.max(probe_b));
    if pulse.injection_cell >= near {
        return Err(LatticeError::InvalidProbes(
            "injection must lie left of both probes".into(),
        ));
    }

    let gate = pulse.gate();
    let left_echo = 2.0 * spec.predicted_delay(0, pulse.injection_cell);
    let right_echo = 2.0 * spec.predicted_delay(far, spec.cells());
    if left_echo <= 2.0 * gate || right_echo <= 2.0 * gate {
        return Err(LatticeError::InsufficientPadding(format!(
            "echo lags {left_echo:e} s / {right_echo:e} s vs gate {gate:e} s"
        )));
    }

    let duration = pulse.peak_time() + spec.predicted_delay(pulse.injection_cell, far) + 2.0 * gate;
    let steps = (duration / spec.time_step).ceil() as usize;
    let dt = spec.time_step;

    let mut state = LatticeState::zeros(spec);
    state.amplitude_scale = pulse.amplitude;
    let mut record = Vec::with_capacity(steps + 1);
    record.push(ProbeSample {
        step: 0,
        time_s: 0.0,
        voltage_a: 0.0,
        voltage_b: 0.0,
    });
    for n in 0..steps {
        let t_half = (n as f64 + 0.5) * dt;
        let source = pulse.current(spec, t_half);
        state.advance(spec, Some((pulse.injection_cell, source)))?;
        record.push(ProbeSample {
            step: n + 1,
            time_s: (n + 1) as f64 * dt,
            voltage_a: state.node_voltages[probe_a],
            voltage_b: state.node_voltages[probe_b],
        });
    }

    let times: Vec<f64> = record.iter().map(|s| s.time_s).collect();
    let va: Vec<f64> = record.iter().map(|s| s.voltage_a).collect();
    let vb: Vec<f64> = record.iter().map(|s| s.voltage_b).collect();
    let energy = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    if energy(&vb) < ARRIVAL_ENERGY_RATIO * energy(&va) {
        return Err(LatticeError::NoArrival { probe: probe_b });
    }
    if energy(&va) < ARRIVAL_ENERGY_RATIO * energy(&vb) {
        return Err(LatticeError::NoArrival { probe: probe_a });
    }

    let measured = gated_centroid(&times, &vb, gate) - gated_centroid(&times, &va, gate);
    let predicted = spec.predicted_delay(probe_a, probe_b);
    Ok(TimeOfFlight {
        probe_a,
        probe_b,
        measured_delay: measured,
        predicted_delay: predicted,
        relative_error: ((measured - predicted) / predicted).abs(),
        cells: spec.cells(),
        dt,
        steps,
        record,
    })
}

/// Continuum prediction `(a / c₀) ∫ dx̂ / c̃` in seconds between two lattice
/// nodes of a padded design, with `a` implied by one cell per `ε`.
pub fn continuum_delay(
    profile: &SpeedProfile,
    design: &ArrayDesign,
    spec: &LatticeSpec,
    params: &SquidParams,
    probe_a: usize,
    probe_b: usize,
) -> Result<f64, LatticeError> {
    let position = |node: usize| {
        design.window.lo + (node as f64 - spec.graded.start as f64) * design.cell_width
    };
    let dimensionless = spacetime::elapsed_time(profile, position(probe_a), position(probe_b))?;
    let scale_a = params.cell_length / design.cell_width;
    Ok(dimensionless * scale_a / params.base_speed())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionReport {
    /// rad/s, `2 / √(L_k C_s)` per cell.
    pub cutoffs: Vec<f64>,
    pub min_cutoff: f64,
    pub min_cutoff_cell: usize,
    pub recommended_max_carrier: f64,
}

pub fn dispersion_report(spec: &LatticeSpec) -> DispersionReport {
    let cutoffs: Vec<f64> = (0..spec.cells()).map(|k| 2.0 / spec.cell_delay(k)).collect();
    let (min_cutoff_cell, min_cutoff) = cutoffs
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0, f64::INFINITY));
    DispersionReport {
        cutoffs,
        min_cutoff,
        min_cutoff_cell,
        recommended_max_carrier: DISPERSION_GUARD * min_cutoff,
    }
}
