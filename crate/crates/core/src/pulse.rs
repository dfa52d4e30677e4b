//! Gaussian-monocycle synthesis and elementary waveform algebra.
//!
//! The transmitted pulse is the n-th derivative of a Gaussian (order 2 by
//! default), truncated to a finite support `(0, Tw)` and normalized to unit
//! energy. The Gaussian width is not a free parameter: it is solved so that
//! the pulse amplitude at the support edges is exactly 1e-4 of the peak,
//! which makes the truncation rule deterministic and testable.

use crate::error::{Result, SimError};

/// Edge amplitude relative to the peak at the support boundaries.
const EDGE_RATIO: f64 = 1e-4;

/// Relative tolerance used when snapping times onto the sample grid.
const GRID_TOL: f64 = 1e-6;

/// A uniformly sampled real-valued waveform.
///
/// `dt` is the sample interval in nanoseconds and `t0` the time of the first
/// sample. Waveform arithmetic requires both operands to share the same `dt`
/// and to sit on the same global sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWaveform {
    samples: Vec<f64>,
    dt: f64,
    t0: f64,
}

impl SampledWaveform {
    pub fn new(samples: Vec<f64>, dt: f64, t0: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(SimError::config(format!(
                "sample interval must be positive and finite, got {dt}"
            )));
        }
        if samples.is_empty() {
            return Err(SimError::config("waveform must contain at least one sample"));
        }
        Ok(Self { samples, dt, t0 })
    }

    pub fn zeros(len: usize, dt: f64, t0: f64) -> Result<Self> {
        Self::new(vec![0.0; len], dt, t0)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Total extent `len * dt` in nanoseconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }

    /// Time just past the last sample.
    pub fn end_time(&self) -> f64 {
        self.t0 + self.duration()
    }

    /// Signal energy `sum(s^2) * dt`.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum::<f64>() * self.dt
    }

    /// Returns a copy scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * factor).collect(),
            dt: self.dt,
            t0: self.t0,
        }
    }

    /// Returns a copy shifted in time by `offset` nanoseconds.
    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            samples: self.samples.clone(),
            dt: self.dt,
            t0: self.t0 + offset,
        }
    }

    /// Adds `scale * other` into `self` at sample offset `at`.
    /// Samples of `other` falling past the end of `self` are dropped.
    pub fn add_scaled_at(&mut self, other: &SampledWaveform, at: usize, scale: f64) -> Result<()> {
        if other.dt != self.dt {
            return Err(SimError::config(format!(
                "sample interval mismatch: {} vs {}",
                self.dt, other.dt
            )));
        }
        let n = self.samples.len();
        for (j, v) in other.samples.iter().enumerate() {
            let k = at + j;
            if k < n {
                self.samples[k] += scale * v;
            }
        }
        Ok(())
    }

    /// Index of the grid-aligned time `t`; errors when `t` is off the grid.
    pub fn grid_index(&self, t: f64) -> Result<i64> {
        grid_steps(t - self.t0, self.dt)
    }
}

/// Number of grid steps spanned by `x`, requiring `x` to be an (almost) exact
/// multiple of `dt`.
pub(crate) fn grid_steps(x: f64, dt: f64) -> Result<i64> {
    let ratio = x / dt;
    let k = ratio.round();
    if (ratio - k).abs() > GRID_TOL * ratio.abs().max(1.0) {
        return Err(SimError::config(format!(
            "time {x} ns is not aligned to the {dt} ns sample grid"
        )));
    }
    Ok(k as i64)
}

/// Specification of the transmitted monocycle.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSpec {
    /// Gaussian derivative order (>= 1); 2 gives the classic UWB monocycle.
    pub derivative_order: u32,
    /// Pulse support width Tw in nanoseconds.
    pub width: f64,
    /// Sample interval in nanoseconds; `width / dt` must be an integer.
    pub dt: f64,
}

impl Default for PulseSpec {
    fn default() -> Self {
        Self {
            derivative_order: 2,
            width: crate::modem::DEFAULT_TW,
            dt: crate::DEFAULT_DT,
        }
    }
}

impl PulseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.derivative_order < 1 {
            return Err(SimError::config("pulse derivative order must be >= 1"));
        }
        if !(self.width > 0.0) || !(self.dt > 0.0) {
            return Err(SimError::config("pulse width and dt must be positive"));
        }
        let steps = grid_steps(self.width, self.dt)
            .map_err(|_| SimError::config(format!(
                "pulse width {} ns is not an integer number of {} ns samples",
                self.width, self.dt
            )))?;
        if steps < 2 {
            return Err(SimError::config("pulse must span at least two samples"));
        }
        Ok(())
    }
}

/// Probabilists' Hermite polynomial He_n(u) by recurrence.
fn hermite(order: u32, u: f64) -> f64 {
    let mut h_prev = 1.0;
    if order == 0 {
        return h_prev;
    }
    let mut h = u;
    for k in 1..order {
        let next = u * h - k as f64 * h_prev;
        h_prev = h;
        h = next;
    }
    h
}

/// Shape of the n-th Gaussian derivative in normalized time u = t / sigma.
fn derivative_shape(order: u32, u: f64) -> f64 {
    hermite(order, u) * (-0.5 * u * u).exp()
}

/// Peak magnitude of the derivative shape over u >= 0.
fn shape_peak(order: u32) -> f64 {
    let umax = (4.0 * order as f64 + 2.0).sqrt() + 6.0;
    let steps = 200_000;
    let mut peak = 0.0f64;
    for i in 0..=steps {
        let u = umax * i as f64 / steps as f64;
        peak = peak.max(derivative_shape(order, u).abs());
    }
    peak
}

/// Largest u at which the shape magnitude equals `EDGE_RATIO` times the peak.
fn boundary_u(order: u32) -> f64 {
    let target = EDGE_RATIO * shape_peak(order);
    let umax = (4.0 * order as f64 + 2.0).sqrt() + 6.0;
    // Walk inward from the far tail until the envelope reaches the target,
    // then bisect inside the bracketing step.
    let step = 1e-3;
    let mut hi = umax;
    while hi > 0.0 && derivative_shape(order, hi).abs() < target {
        hi -= step;
    }
    let mut lo = hi;
    let mut hi = hi + step;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if derivative_shape(order, mid).abs() >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Synthesizes the unit-energy Gaussian-derivative monocycle described by
/// `spec`, supported on `(0, Tw)` with `t0 = 0`.
pub fn gaussian_monocycle(spec: &PulseSpec) -> Result<SampledWaveform> {
    spec.validate()?;
    let n = grid_steps(spec.width, spec.dt)? as usize;
    let ub = boundary_u(spec.derivative_order);
    let sigma = 0.5 * spec.width / ub;
    let center = 0.5 * spec.width;

    let mut samples: Vec<f64> = (0..n)
        .map(|k| {
            let u = (k as f64 * spec.dt - center) / sigma;
            derivative_shape(spec.derivative_order, u)
        })
        .collect();

    // Orient the pulse so its largest excursion is positive.
    let peak = samples
        .iter()
        .cloned()
        .max_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap())
        .unwrap_or(0.0);
    if peak < 0.0 {
        for s in &mut samples {
            *s = -*s;
        }
    }

    let energy: f64 = samples.iter().map(|s| s * s).sum::<f64>() * spec.dt;
    if energy <= 0.0 {
        return Err(SimError::internal("degenerate pulse energy"));
    }
    let norm = energy.sqrt().recip();
    for s in &mut samples {
        *s *= norm;
    }

    SampledWaveform::new(samples, spec.dt, 0.0)
}

/// Signal energy of `w`.
pub fn energy(w: &SampledWaveform) -> f64 {
    w.energy()
}

/// Riemann-sum correlation of `a` and `b` over the absolute-time window
/// `[t_start, t_end)`.
///
/// Samples outside either waveform's extent contribute zero (waveforms are
/// zero outside their support), so the window may exceed the overlap region;
/// an inverted or empty window is rejected.
pub fn correlate(a: &SampledWaveform, b: &SampledWaveform, window: (f64, f64)) -> Result<f64> {
    let (t_start, t_end) = window;
    if a.dt != b.dt {
        return Err(SimError::config(format!(
            "sample interval mismatch: {} vs {}",
            a.dt, b.dt
        )));
    }
    let dt = a.dt;
    let k_start = grid_steps(t_start, dt)?;
    let k_end = grid_steps(t_end, dt)?;
    if k_end <= k_start {
        return Err(SimError::config("correlation window is empty"));
    }
    let a0 = grid_steps(a.t0, dt)?;
    let b0 = grid_steps(b.t0, dt)?;

    let mut acc = 0.0;
    for k in k_start..k_end {
        let ia = k - a0;
        let ib = k - b0;
        if ia < 0 || ib < 0 {
            continue;
        }
        let (ia, ib) = (ia as usize, ib as usize);
        if ia >= a.samples.len() || ib >= b.samples.len() {
            continue;
        }
        acc += a.samples[ia] * b.samples[ib];
    }
    Ok(acc * dt)
}
