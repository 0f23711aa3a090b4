//! Fixed-step time-domain simulation of the switched coupled-RLC link, plus
//! envelope extraction and LSK decoding of the primary current.
//!
//! States are `(i1, i2, v_c1, v_c2)`:
//!
//! ```text
//! V_s = R_s1*i1 + v_c1 + L1*di1/dt + M*di2/dt
//!   0 = R_s2*i2 + v_c2 + L2*di2/dt + M*di1/dt
//! C_s1*dv_c1/dt = i1
//!   C2*dv_c2/dt = i2 - v_c2/R_eff
//! ```
//!
//! The trapezoidal update is precomputed once per load state, so a step is a
//! single 4x4 matrix-vector product.

use nalgebra::{Matrix4, Vector4};

use crate::error::{LinkError, Result};
use crate::link_model::{LinkScenario, LoadState};

/// Default integrator resolution in samples per carrier period.
pub const STEPS_PER_PERIOD: f64 = 200.0;
pub const DEFAULT_SETTLE_TIME: f64 = 20e-6;
pub const DEFAULT_BIT_PERIOD: f64 = 5e-6;
pub const DEFAULT_DURATION: f64 = 60e-6;
/// A state exceeding this multiple of its median per-period peak is reported
/// as a numerical instability.
pub const INSTABILITY_RATIO: f64 = 1e6;
/// Minimum envelope swing, relative to its mean, for a decode to be trusted.
pub const MIN_RELATIVE_SWING: f64 = 0.01;
/// Leading fraction of each bit skipped by the decoder while the switching
/// transient rings down.
pub const BIT_GUARD_FRACTION: f64 = 0.5;

const STATE_NAMES: [&str; 4] = ["i1", "i2", "v_c1", "v_c2"];

#[derive(Debug, Clone, PartialEq)]
pub struct TransientConfig {
    pub time_step: f64,
    pub duration: f64,
    pub bit_period: f64,
    /// Switch drive, one entry per bit; `true` shunts R_sw (heavy load).
    pub sw_pattern: Vec<bool>,
    /// Time before the first bit; the switch stays open and decoding ignores it.
    pub settle_time: f64,
}

impl TransientConfig {
    pub fn for_carrier(carrier_frequency: f64) -> Self {
        Self {
            time_step: 1.0 / (carrier_frequency * STEPS_PER_PERIOD),
            duration: DEFAULT_DURATION,
            bit_period: DEFAULT_BIT_PERIOD,
            sw_pattern: parse_bits("10110010").expect("valid literal"),
            settle_time: DEFAULT_SETTLE_TIME,
        }
    }

    pub fn validate(&self, carrier_frequency: f64) -> Result<()> {
        for (name, v) in [
            ("time_step", self.time_step),
            ("duration", self.duration),
            ("bit_period", self.bit_period),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LinkError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.settle_time >= 0.0) {
            return Err(LinkError::InvalidConfig("settle_time must be >= 0".into()));
        }
        let period = 1.0 / carrier_frequency;
        // small slack so that period/100 itself is accepted
        if self.time_step > period / 100.0 * (1.0 + 1e-12) {
            return Err(LinkError::InvalidConfig(format!(
                "time_step {:e} s exceeds carrier period / 100 = {:e} s",
                self.time_step,
                period / 100.0
            )));
        }
        let needed = self.decode_end();
        if self.duration < needed * (1.0 - 1e-12) {
            return Err(LinkError::InvalidConfig(format!(
                "duration {:e} s is shorter than settle_time + bits * bit_period = {needed:e} s",
                self.duration
            )));
        }
        Ok(())
    }

    pub fn decode_end(&self) -> f64 {
        self.settle_time + self.bit_period * self.sw_pattern.len() as f64
    }

    /// Switch level at time `t`.
    pub fn switch_at(&self, t: f64) -> bool {
        if t < self.settle_time {
            return false;
        }
        let idx = ((t - self.settle_time) / self.bit_period).floor() as usize;
        self.sw_pattern.get(idx).copied().unwrap_or(false)
    }
}

pub fn parse_bits(text: &str) -> Result<Vec<bool>> {
    text.chars()
        .filter(|c| !c.is_whitespace() && *c != '_')
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(LinkError::InvalidConfig(format!("bit pattern may only hold 0/1, found '{other}'"))),
        })
        .collect()
}

pub fn format_bits(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CircuitState {
    pub i1: f64,
    pub i2: f64,
    pub v_c1: f64,
    pub v_c2: f64,
}

impl CircuitState {
    fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.i1, self.i2, self.v_c1, self.v_c2)
    }

    fn from_vector(v: &Vector4<f64>) -> Self {
        Self {
            i1: v[0],
            i2: v[1],
            v_c1: v[2],
            v_c2: v[3],
        }
    }
}

/// Linear system `dx/dt = a*x + b*V_source` for one load state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: Matrix4<f64>,
    pub b: Vector4<f64>,
    l1: f64,
    l2: f64,
    m: f64,
    c1: f64,
    c2: f64,
}

impl StateSpace {
    /// Magnetic plus electric stored energy in joules.
    pub fn stored_energy(&self, x: &CircuitState) -> f64 {
        0.5 * (self.l1 * x.i1 * x.i1 + 2.0 * self.m * x.i1 * x.i2 + self.l2 * x.i2 * x.i2)
            + 0.5 * (self.c1 * x.v_c1 * x.v_c1 + self.c2 * x.v_c2 * x.v_c2)
    }

    /// True when the two loops share no terms.
    pub fn is_decoupled(&self) -> bool {
        self.a[(0, 1)] == 0.0
            && self.a[(0, 3)] == 0.0
            && self.a[(1, 0)] == 0.0
            && self.a[(1, 2)] == 0.0
            && self.b[1] == 0.0
    }
}

pub fn build_state_space(scenario: &LinkScenario, load: LoadState) -> Result<StateSpace> {
    let k = scenario.coupling;
    if !(k < 1.0) {
        return Err(LinkError::SingularInductance(k));
    }
    let l1 = scenario.primary_coil.inductance;
    let l2 = scenario.secondary_coil.inductance;
    let r1 = scenario.primary_coil.series_resistance;
    let r2 = scenario.secondary_coil.series_resistance;
    let c1 = scenario.primary_tank.c_s1;
    let c2 = scenario.secondary_tank.c2();
    let r_eff = scenario.secondary_tank.effective_load(load);
    let m = scenario.mutual_inductance();
    let det = l1 * l2 - m * m;
    if !(det > 0.0) {
        return Err(LinkError::SingularInductance(k));
    }

    // [di1, di2] = L^-1 * [V - R1 i1 - v_c1, -R2 i2 - v_c2]
    #[rustfmt::skip]
    let a = Matrix4::new(
        -l2 * r1 / det,  m * r2 / det,  -l2 / det,  m / det,
         m * r1 / det,  -l1 * r2 / det,  m / det,  -l1 / det,
         1.0 / c1,       0.0,            0.0,       0.0,
         0.0,            1.0 / c2,       0.0,      -1.0 / (r_eff * c2),
    );
    let b = Vector4::new(l2 / det, -m / det, 0.0, 0.0);
    Ok(StateSpace {
        a,
        b,
        l1,
        l2,
        m,
        c1,
        c2,
    })
}

#[derive(Debug, Clone)]
struct Discrete {
    phi: Matrix4<f64>,
    gamma: Vector4<f64>,
}

impl Discrete {
    fn trapezoidal(ss: &StateSpace, h: f64) -> Result<Self> {
        let id = Matrix4::<f64>::identity();
        let lhs = id - ss.a * (0.5 * h);
        let inv = lhs
            .try_inverse()
            .ok_or_else(|| LinkError::InvalidConfig("trapezoidal system matrix is singular".into()))?;
        Ok(Self {
            phi: inv * (id + ss.a * (0.5 * h)),
            gamma: inv * ss.b * (0.5 * h),
        })
    }
}

fn prewarped_step(omega: f64, h: f64) -> f64 {
    2.0 / omega * (0.5 * omega * h).tan()
}

/// Trapezoidal-rule stepper for both load states of one scenario.
///
/// The discretisation uses the step prewarped at the carrier,
/// `(2/w) tan(w h / 2)`, so a sampled sinusoidal steady state at the drive
/// frequency matches the phasor solution instead of a slightly shifted one.
#[derive(Debug, Clone)]
pub struct Integrator {
    time_step: f64,
    omega: f64,
    source_amplitude: f64,
    light: Discrete,
    heavy: Discrete,
    energy_model: StateSpace,
}

impl Integrator {
    pub fn new(scenario: &LinkScenario, time_step: f64) -> Result<Self> {
        if !(time_step > 0.0 && time_step.is_finite()) {
            return Err(LinkError::InvalidConfig(format!("time_step must be positive, got {time_step}")));
        }
        let omega = scenario.omega();
        if omega * time_step >= std::f64::consts::PI {
            return Err(LinkError::InvalidConfig(format!(
                "time_step {time_step:e} s is at least half a carrier period"
            )));
        }
        let warped = prewarped_step(omega, time_step);
        let light = build_state_space(scenario, LoadState::Light)?;
        let heavy = build_state_space(scenario, LoadState::Heavy)?;
        Ok(Self {
            time_step,
            omega,
            source_amplitude: scenario.primary_tank.source_amplitude,
            light: Discrete::trapezoidal(&light, warped)?,
            heavy: Discrete::trapezoidal(&heavy, warped)?,
            energy_model: light,
        })
    }

    pub fn with_source_amplitude(mut self, volts: f64) -> Self {
        self.source_amplitude = volts;
        self
    }

    pub fn time_step(&self) -> f64 {
        self.time_step
    }

    pub fn source(&self, t: f64) -> f64 {
        self.source_amplitude * (self.omega * t).sin()
    }

    pub fn stored_energy(&self, x: &CircuitState) -> f64 {
        self.energy_model.stored_energy(x)
    }

    /// Advances from `t` to `t + time_step` with `load` held over the step.
    pub fn step(&self, x: &CircuitState, t: f64, load: LoadState) -> CircuitState {
        let d = match load {
            LoadState::Light => &self.light,
            LoadState::Heavy => &self.heavy,
        };
        let u = self.source(t) + self.source(t + self.time_step);
        CircuitState::from_vector(&(d.phi * x.to_vector() + d.gamma * u))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub t: f64,
    pub i1: f64,
    pub i2: f64,
    pub v_c1: f64,
    pub v_c2: f64,
    pub sw: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub samples: Vec<TraceSample>,
}

/// Tracks per-period peaks of each state and flags runaway growth.
struct InstabilityGuard {
    period: f64,
    next_check: f64,
    current: [f64; 4],
    history: [Vec<f64>; 4],
}

impl InstabilityGuard {
    fn new(period: f64) -> Self {
        Self {
            period,
            next_check: period,
            current: [0.0; 4],
            history: Default::default(),
        }
    }

    fn observe(&mut self, t: f64, x: &CircuitState) -> Result<()> {
        let values = [x.i1, x.i2, x.v_c1, x.v_c2];
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(LinkError::Instability {
                    state: STATE_NAMES[i],
                    value: *v,
                    time: t,
                });
            }
            self.current[i] = self.current[i].max(v.abs());
        }
        if t < self.next_check {
            return Ok(());
        }
        self.next_check += self.period;
        for i in 0..4 {
            let peak = std::mem::take(&mut self.current[i]);
            let hist = &mut self.history[i];
            if !hist.is_empty() {
                let median = hist[hist.len() / 2];
                if median > 0.0 && peak > INSTABILITY_RATIO * median {
                    return Err(LinkError::Instability {
                        state: STATE_NAMES[i],
                        value: peak,
                        time: t,
                    });
                }
            }
            let pos = hist.partition_point(|&p| p < peak);
            hist.insert(pos, peak);
        }
        Ok(())
    }
}

/// Integrates from rest with the load chosen by `schedule(t)` for each step.
pub fn simulate_schedule(
    scenario: &LinkScenario,
    time_step: f64,
    duration: f64,
    schedule: impl Fn(f64) -> LoadState,
) -> Result<Trace> {
    let integrator = Integrator::new(scenario, time_step)?;
    let steps = (duration / time_step).round() as usize;
    let mut guard = InstabilityGuard::new(1.0 / scenario.primary_tank.drive_frequency);
    let mut samples = Vec::with_capacity(steps + 1);
    let mut x = CircuitState::default();
    let mut load = schedule(0.5 * time_step);
    let record = |t: f64, x: &CircuitState, load: LoadState| TraceSample {
        t,
        i1: x.i1,
        i2: x.i2,
        v_c1: x.v_c1,
        v_c2: x.v_c2,
        sw: load == LoadState::Heavy,
    };
    samples.push(record(0.0, &x, load));
    for n in 0..steps {
        let t = n as f64 * time_step;
        load = schedule(t + 0.5 * time_step);
        x = integrator.step(&x, t, load);
        let t_next = (n + 1) as f64 * time_step;
        guard.observe(t_next, &x)?;
        samples.push(record(t_next, &x, load));
    }
    Ok(Trace { samples })
}

/// Runs the switched link: light load until `settle_time`, then one bit of
/// `sw_pattern` per `bit_period` (high = heavy), light again afterwards.
pub fn simulate(scenario: &LinkScenario, config: &TransientConfig) -> Result<Trace> {
    config.validate(scenario.primary_tank.drive_frequency)?;
    simulate_schedule(scenario, config.time_step, config.duration, |t| {
        LoadState::from_switch(config.switch_at(t))
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopePoint {
    /// Centre of the carrier period.
    pub t: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Envelope {
    pub points: Vec<EnvelopePoint>,
}

/// Peak `|i1|` within each full carrier period of the trace.
pub fn envelope(trace: &Trace, carrier_frequency: f64) -> Result<Envelope> {
    if !(carrier_frequency > 0.0) {
        return Err(LinkError::InvalidConfig("carrier frequency must be positive".into()));
    }
    let (Some(first), Some(last)) = (trace.samples.first(), trace.samples.last()) else {
        return Err(LinkError::InsufficientData("empty trace".into()));
    };
    let period = 1.0 / carrier_frequency;
    let t0 = first.t;
    let periods = ((last.t - t0) / period * (1.0 + 1e-12)).floor() as usize;
    if periods < 2 {
        return Err(LinkError::InsufficientData(format!(
            "trace spans {:.3} carrier periods, need at least 2",
            (last.t - t0) / period
        )));
    }

    let mut points = Vec::with_capacity(periods);
    let mut samples = trace.samples.iter().peekable();
    for m in 0..periods {
        let end = t0 + (m + 1) as f64 * period;
        let mut peak = 0.0f64;
        while let Some(s) = samples.next_if(|s| s.t < end) {
            peak = peak.max(s.i1.abs());
        }
        points.push(EnvelopePoint {
            t: t0 + (m as f64 + 0.5) * period,
            amplitude: peak,
        });
    }
    Ok(Envelope { points })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub bits: Vec<bool>,
    /// Decoded bits are the complement of the switch drive.
    pub polarity_flipped: bool,
    pub threshold: f64,
    pub per_bit_envelope_means: Vec<f64>,
}

/// Slices the envelope into bit windows after `settle_time` and thresholds
/// each window's mean at the midpoint of the extreme means. Only the
/// trailing part of each bit (after [`BIT_GUARD_FRACTION`]) is averaged.
pub fn decode_lsk(envelope: &Envelope, config: &TransientConfig) -> Result<DecodeResult> {
    if config.sw_pattern.is_empty() {
        return Err(LinkError::InsufficientData("empty switch pattern".into()));
    }
    let mut means = Vec::with_capacity(config.sw_pattern.len());
    for j in 0..config.sw_pattern.len() {
        let bit_start = config.settle_time + j as f64 * config.bit_period;
        let start = bit_start + BIT_GUARD_FRACTION * config.bit_period;
        let end = bit_start + config.bit_period;
        let (sum, n) = envelope
            .points
            .iter()
            .filter(|p| p.t >= start && p.t < end)
            .fold((0.0, 0usize), |(s, n), p| (s + p.amplitude, n + 1));
        if n == 0 {
            return Err(LinkError::InsufficientData(format!(
                "no envelope samples in bit {j} ([{start:e}, {end:e}) s)"
            )));
        }
        means.push(sum / n as f64);
    }

    let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let avg = means.iter().sum::<f64>() / means.len() as f64;
    if !(hi - lo >= MIN_RELATIVE_SWING * avg) {
        return Err(LinkError::Indeterminate(format!(
            "envelope swing {:.3e} A is below {}% of its mean {avg:.3e} A",
            hi - lo,
            MIN_RELATIVE_SWING * 100.0
        )));
    }
    let threshold = 0.5 * (lo + hi);
    let bits: Vec<bool> = means.iter().map(|&m| m > threshold).collect();

    let polarity_flipped = if bits == config.sw_pattern {
        false
    } else if bits.iter().zip(&config.sw_pattern).all(|(b, s)| b != s) {
        true
    } else {
        return Err(LinkError::Indeterminate(format!(
            "decoded {} matches neither the pattern {} nor its complement",
            format_bits(&bits),
            format_bits(&config.sw_pattern)
        )));
    };

    Ok(DecodeResult {
        bits,
        polarity_flipped,
        threshold,
        per_bit_envelope_means: means,
    })
}

/// Mean envelope over `[from, to)`.
pub fn mean_amplitude(envelope: &Envelope, from: f64, to: f64) -> Option<f64> {
    let (sum, n) = envelope
        .points
        .iter()
        .filter(|p| p.t >= from && p.t < to)
        .fold((0.0, 0usize), |(s, n), p| (s + p.amplitude, n + 1));
    (n > 0).then(|| sum / n as f64)
}
