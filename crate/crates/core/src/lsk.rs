//! Load-shift-keying robustness analysis.
//!
//! The uplink is read from the primary current amplitude. A healthy link draws
//! more current when the secondary is heavily loaded (`delta_i1 < 0`); when the
//! secondary tank is mistuned by parasitic capacitance the sign can invert at
//! weak coupling, which flips every decoded bit. This module sweeps that sign
//! over coupling, locates the flip threshold and solves for the primary
//! capacitor detune that removes it.

use crate::error::{LinkError, Result};
use crate::link_model::{zpri, ComplexValue, LinkScenario, LoadState};
use crate::par::{map_indexed, Execution};

/// Bracket width for the flip-threshold bisection, in units of k.
pub const FLIP_TOLERANCE: f64 = 1e-5;
/// Coupling samples used to bracket sign changes and to verify detune margins.
pub const DEFAULT_SAMPLES: usize = 200;
/// Grid step of the detune search.
pub const DETUNE_GRID_STEP: f64 = 0.0005;
/// Most negative detune the solver will consider.
pub const DETUNE_LIMIT: f64 = -0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepScale {
    #[default]
    Linear,
    Log,
}

impl SweepScale {
    pub fn name(self) -> &'static str {
        match self {
            SweepScale::Linear => "linear",
            SweepScale::Log => "log",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub k_min: f64,
    pub k_max: f64,
    pub points: usize,
    pub scale: SweepScale,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            k_min: 0.01,
            k_max: 0.2,
            points: DEFAULT_SAMPLES,
            scale: SweepScale::Linear,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        KRange::new(self.k_min, self.k_max)?;
        if self.points < 2 {
            return Err(LinkError::InvalidConfig(format!(
                "sweep needs at least 2 points, got {}",
                self.points
            )));
        }
        if self.scale == SweepScale::Log && self.k_min <= 0.0 {
            return Err(LinkError::InvalidConfig("log sweep needs k_min > 0".into()));
        }
        Ok(())
    }

    pub fn range(&self) -> KRange {
        KRange {
            min: self.k_min,
            max: self.k_max,
        }
    }

    /// Abscissa of sample `i`; endpoints are hit exactly.
    pub fn k_at(&self, i: usize) -> f64 {
        let last = self.points - 1;
        if i == 0 {
            return self.k_min;
        }
        if i == last {
            return self.k_max;
        }
        let t = i as f64 / last as f64;
        match self.scale {
            SweepScale::Linear => self.k_min + t * (self.k_max - self.k_min),
            SweepScale::Log => (self.k_min.ln() + t * (self.k_max.ln() - self.k_min.ln())).exp(),
        }
    }
}

/// Closed coupling interval inside `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KRange {
    pub min: f64,
    pub max: f64,
}

impl KRange {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(0.0 <= min && min < max && max < 1.0) {
            return Err(LinkError::InvalidConfig(format!(
                "coupling range must satisfy 0 <= k_min < k_max < 1, got [{min}, {max}]"
            )));
        }
        Ok(Self { min, max })
    }

    fn linear(&self, points: usize) -> SweepSpec {
        SweepSpec {
            k_min: self.min,
            k_max: self.max,
            points,
            scale: SweepScale::Linear,
        }
    }
}

/// Component mismatch applied on top of a scenario template.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MismatchSpec {
    pub c_p_override: f64,
    /// Relative error of C_s1 against the template value, e.g. `0.01` for 1% high.
    pub c_s1_relative_error: f64,
}

impl MismatchSpec {
    /// No primary error; parasitic capacitance taken from the template.
    pub fn none(template: &LinkScenario) -> Self {
        Self {
            c_p_override: template.secondary_tank.c_p,
            c_s1_relative_error: 0.0,
        }
    }

    pub fn with_parasitic(c_p: f64) -> Self {
        Self {
            c_p_override: c_p,
            c_s1_relative_error: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_p_override >= 0.0 && self.c_p_override.is_finite()) {
            return Err(LinkError::InvalidConfig(format!(
                "c_p_override must be >= 0, got {}",
                self.c_p_override
            )));
        }
        if !(self.c_s1_relative_error.abs() < 0.5) {
            return Err(LinkError::InvalidConfig(format!(
                "|c_s1_relative_error| must be < 0.5, got {}",
                self.c_s1_relative_error
            )));
        }
        Ok(())
    }

    pub fn apply(&self, template: &LinkScenario) -> LinkScenario {
        let mut s = template.clone();
        s.secondary_tank.c_p = self.c_p_override;
        s.primary_tank.c_s1 = template.primary_tank.c_s1 * (1.0 + self.c_s1_relative_error);
        s
    }
}

/// Change of primary impedance between light and heavy load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaZpri {
    /// `Zpri(light) - Zpri(heavy)`.
    pub complex: ComplexValue,
    /// `|Zpri(light)| - |Zpri(heavy)|`.
    pub magnitude_difference: f64,
}

pub fn delta_zpri(scenario: &LinkScenario) -> DeltaZpri {
    let w = scenario.omega();
    let light = zpri(w, scenario, LoadState::Light);
    let heavy = zpri(w, scenario, LoadState::Heavy);
    DeltaZpri {
        complex: light - heavy,
        magnitude_difference: light.norm() - heavy.norm(),
    }
}

/// `|I1(light)| - |I1(heavy)|`; negative for a correctly-polarised uplink.
pub fn delta_i1(scenario: &LinkScenario) -> f64 {
    let w = scenario.omega();
    let v = scenario.primary_tank.source_amplitude;
    // Re(Zpri) >= R_s1 > 0, so the division is always defined.
    let light = v / zpri(w, scenario, LoadState::Light).norm();
    let heavy = v / zpri(w, scenario, LoadState::Heavy).norm();
    light - heavy
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub k: f64,
    pub delta_zpri: ComplexValue,
    pub delta_zpri_magnitude_difference: f64,
    pub delta_i1: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Number of sign changes of `delta_i1` between consecutive nonzero rows.
    pub fn sign_changes(&self) -> usize {
        count_sign_changes(self.rows.iter().map(|r| r.delta_i1))
    }
}

fn count_sign_changes(values: impl Iterator<Item = f64>) -> usize {
    let mut last = 0.0f64;
    let mut changes = 0;
    for v in values.filter(|v| *v != 0.0) {
        if last != 0.0 && (last > 0.0) != (v > 0.0) {
            changes += 1;
        }
        last = v;
    }
    changes
}

pub fn sweep_coupling(
    template: &LinkScenario,
    mismatch: &MismatchSpec,
    spec: &SweepSpec,
) -> Result<SweepResult> {
    sweep_coupling_with(template, mismatch, spec, Execution::default())
}

pub fn sweep_coupling_with(
    template: &LinkScenario,
    mismatch: &MismatchSpec,
    spec: &SweepSpec,
    exec: Execution,
) -> Result<SweepResult> {
    spec.validate()?;
    mismatch.validate()?;
    let base = mismatch.apply(template);
    let rows = map_indexed(spec.points, exec, |i| {
        let k = spec.k_at(i);
        let s = base.with_coupling(k);
        let dz = delta_zpri(&s);
        SweepRow {
            k,
            delta_zpri: dz.complex,
            delta_zpri_magnitude_difference: dz.magnitude_difference,
            delta_i1: delta_i1(&s),
        }
    });
    Ok(SweepResult { rows })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipThreshold {
    /// Smallest coupling at which `delta_i1` changes sign.
    pub k: f64,
    /// Number of sign changes detected across the range.
    pub sign_changes: usize,
}

impl FlipThreshold {
    pub fn is_multiple(&self) -> bool {
        self.sign_changes > 1
    }
}

/// Locates the coupling at which the uplink polarity flips, or `None` if
/// `delta_i1` keeps one sign across `k_range`.
pub fn flip_threshold(
    template: &LinkScenario,
    mismatch: &MismatchSpec,
    k_range: KRange,
) -> Result<Option<FlipThreshold>> {
    flip_threshold_with(template, mismatch, k_range, DEFAULT_SAMPLES, Execution::default())
}

pub fn flip_threshold_with(
    template: &LinkScenario,
    mismatch: &MismatchSpec,
    k_range: KRange,
    samples: usize,
    exec: Execution,
) -> Result<Option<FlipThreshold>> {
    let spec = k_range.linear(samples);
    spec.validate()?;
    mismatch.validate()?;
    let base = mismatch.apply(template);
    let f = |k: f64| delta_i1(&base.with_coupling(k));
    let values = map_indexed(samples, exec, |i| {
        let k = spec.k_at(i);
        (k, f(k))
    });

    let mut bracket = None;
    let mut last: Option<(f64, f64)> = None;
    let mut changes = 0;
    for &(k, v) in values.iter().filter(|(_, v)| *v != 0.0) {
        if let Some((k_prev, v_prev)) = last {
            if (v_prev > 0.0) != (v > 0.0) {
                changes += 1;
                if bracket.is_none() {
                    bracket = Some((k_prev, v_prev, k));
                }
            }
        }
        last = Some((k, v));
    }

    Ok(bracket.map(|(lo, v_lo, hi)| FlipThreshold {
        k: bisect(f, lo, v_lo, hi, FLIP_TOLERANCE),
        sign_changes: changes,
    }))
}

/// Midpoint of a bracket narrower than `tol` around a sign change of `f`.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, f_lo: f64, mut hi: f64, tol: f64) -> f64 {
    let lo_positive = f_lo > 0.0;
    while hi - lo >= tol {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        if v == 0.0 {
            return mid;
        }
        if (v > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetuneSolution {
    pub c_s1_solved: f64,
    /// Detune relative to the designed C_s1; always negative.
    pub relative_detune: f64,
    pub flip_free_range: (f64, f64),
    /// Worst-case `-delta_i1` over the sampled range, in amperes.
    pub margin_achieved: f64,
    /// The template already met the margin without detuning; the first grid
    /// step is reported.
    pub zero_detune_sufficient: bool,
}

/// Finds the smallest downward detune of C_s1 for which `delta_i1 <= -margin`
/// at every sampled coupling in `k_range`.
pub fn detune_solve(
    template: &LinkScenario,
    mismatch: &MismatchSpec,
    k_range: KRange,
    margin: f64,
) -> Result<DetuneSolution> {
    detune_solve_with(template, mismatch, k_range, margin, Execution::default())
}

pub fn detune_solve_with(
    template: &LinkScenario,
    mismatch: &MismatchSpec,
    k_range: KRange,
    margin: f64,
    exec: Execution,
) -> Result<DetuneSolution> {
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(LinkError::InvalidConfig(format!("margin must be >= 0, got {margin}")));
    }
    mismatch.validate()?;
    let spec = k_range.linear(DEFAULT_SAMPLES);
    spec.validate()?;

    let base = mismatch.apply(template);
    let designed = base.designed_c_s1();
    let error = 1.0 + mismatch.c_s1_relative_error;
    let c_s1_for = |delta: f64| designed * (1.0 + delta) * error;

    // Largest delta_i1 over the sampled couplings for a given detune.
    let worst = |delta: f64| {
        let mut s = base.clone();
        s.primary_tank.c_s1 = c_s1_for(delta);
        (0..spec.points)
            .map(|i| delta_i1(&s.with_coupling(spec.k_at(i))))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let feasible = |delta: f64| worst(delta) <= -margin;

    let solution = |delta: f64, zero: bool| {
        DetuneSolution {
            c_s1_solved: c_s1_for(delta),
            relative_detune: delta,
            flip_free_range: (k_range.min, k_range.max),
            margin_achieved: -worst(delta),
            zero_detune_sufficient: zero,
        }
    };

    if feasible(0.0) {
        return Ok(solution(-DETUNE_GRID_STEP, true));
    }

    let steps = (DETUNE_LIMIT / -DETUNE_GRID_STEP).round() as usize;
    let grid = map_indexed(steps, exec, |i| {
        let delta = -DETUNE_GRID_STEP * (i + 1) as f64;
        (delta, feasible(delta))
    });
    let Some(first) = grid.iter().position(|&(_, ok)| ok) else {
        return Err(LinkError::Unsolvable {
            min_detune: DETUNE_LIMIT,
            margin,
            k_min: k_range.min,
            k_max: k_range.max,
        });
    };

    // The boundary lies between the last infeasible grid point and the first
    // feasible one; refine and keep the feasible side.
    let mut outer = grid[first].0;
    let mut inner = if first == 0 { 0.0 } else { grid[first - 1].0 };
    while inner - outer > 1e-9 {
        let mid = 0.5 * (inner + outer);
        if feasible(mid) {
            outer = mid;
        } else {
            inner = mid;
        }
    }
    Ok(solution(outer, false))
}
