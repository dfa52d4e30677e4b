//! Monte-Carlo bit-error-rate estimation.
//!
//! A sweep evaluates a grid of SNR points. Each point loops over bursts of
//! `burst_bits` data bits: draw channel realizations according to the
//! coherence policy, synthesize the received waveform (inter-symbol and
//! inter-pulse interference arise naturally because frame responses overlap),
//! add white Gaussian noise scaled to the target Eb/N0, demodulate, and
//! accumulate error counts until `min_errors` errors or `max_bits` trials.
//!
//! SNR is defined as Eb/N0 at the receiver with the channel energy
//! normalized to one. Eb counts every transmitted pulse of a bit, so the
//! conventional TR scheme pays its reference-pulse overhead here.
//!
//! Determinism: every burst consumes a stream derived only from (seed,
//! point index, burst index), and bursts are processed in fixed-size chunks,
//! so results are byte-identical regardless of worker count or scheduling.

use rayon::prelude::*;

use crate::channel::{discretize, draw_realization, ChannelParams, ChannelRealization};
use crate::error::{Result, SimError};
use crate::modem::{
    build_dtr_signal, build_sr_signal, build_tr_signal, encode_differential, BitBlock, FrameConfig,
    Modulation, Scheme, DEFAULT_M_INIT,
};
use crate::pulse::{gaussian_monocycle, PulseSpec, SampledWaveform};
use crate::receivers::{
    dtr_demodulate, rake_demodulate, sr_demodulate, tr_demodulate, DecisionTrace, RakeSelection,
    SrTemplate,
};

pub use crate::stream::RandomStream;

/// How long one channel realization stays valid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoherencePolicy {
    /// One realization for the whole burst.
    Static,
    /// Redraw every `n` symbols.
    PerSymbols(u32),
}

impl CoherencePolicy {
    pub fn name(self) -> String {
        match self {
            CoherencePolicy::Static => "static".to_string(),
            CoherencePolicy::PerSymbols(1) => "per-symbol".to_string(),
            CoherencePolicy::PerSymbols(n) => format!("per-{n}-symbols"),
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "static" => Some(CoherencePolicy::Static),
            "per-symbol" => Some(CoherencePolicy::PerSymbols(1)),
            "per-2-symbols" => Some(CoherencePolicy::PerSymbols(2)),
            _ => {
                let n: Option<u32> = name
                    .strip_prefix("per-")
                    .and_then(|s| s.strip_suffix("-symbols"))
                    .and_then(|s| s.parse().ok());
                n.filter(|&n| n >= 1).map(CoherencePolicy::PerSymbols)
            }
        }
    }
}

/// Reference delay used by the DTR receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DtrDelay {
    /// One frame: the previous frame's pulse is the reference (default).
    FrameTime,
    /// The intra-frame spacing Td.
    Td,
}

/// Channel selection for a link.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSpec {
    /// Single unit tap: additive white Gaussian noise only.
    Awgn,
    /// A named multipath preset or custom parameter set, redrawn per the
    /// coherence policy.
    Preset { name: String, params: ChannelParams },
    /// A fixed externally supplied realization (always static).
    Fixed(ChannelRealization),
}

impl ChannelSpec {
    pub fn preset(name: &str) -> Option<Self> {
        if name == "awgn" {
            return Some(ChannelSpec::Awgn);
        }
        ChannelParams::by_name(name).map(|params| ChannelSpec::Preset {
            name: name.to_string(),
            params,
        })
    }

    pub fn label(&self) -> String {
        match self {
            ChannelSpec::Awgn => "awgn".to_string(),
            ChannelSpec::Preset { name, .. } => name.clone(),
            ChannelSpec::Fixed(ch) => format!("fixed:{}", ch.model),
        }
    }

    /// Ensemble 99%-energy span of the preset, used only to default
    /// integration windows (measured over 10k realizations, seed 1; any value
    /// above the frame duration is equivalent because the window is capped
    /// at the frame).
    fn nominal_span(&self) -> f64 {
        match self {
            ChannelSpec::Awgn => 0.0,
            ChannelSpec::Preset { name, .. } => match name.as_str() {
                "cm1" => 25.2,
                "cm2" => 37.7,
                "cm3" => 65.9,
                "cm4" => 116.1,
                _ => f64::INFINITY,
            },
            ChannelSpec::Fixed(ch) => ch.last_delay(),
        }
    }
}

/// Full description of one BER experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub scheme: Scheme,
    pub channel: ChannelSpec,
    /// SNR grid in dB (Eb/N0).
    pub snr_grid_db: Vec<f64>,
    /// Trial budget per point.
    pub max_bits: u64,
    /// Stop a point early once this many errors accumulated.
    pub min_errors: u64,
    pub seed: u64,
    /// Pulses per bit.
    pub ns: usize,
    /// Sample interval (ns).
    pub dt: f64,
    /// Integration window override (ns); defaults per scheme and channel.
    pub t_int: Option<f64>,
    /// Channel redraw policy; defaults per scheme.
    pub coherence: Option<CoherencePolicy>,
    /// Enable the optional differential post-decoding stage of the SR
    /// receiver.
    pub sr_differential: bool,
    pub dtr_delay: DtrDelay,
    /// Apply the lognormal shadowing factor to the received waveform
    /// (off by default so Eb/N0 stays exact).
    pub apply_shadowing: bool,
    /// Finger counts for the selective / partial Rake schemes.
    pub lb: usize,
    pub lp: usize,
    /// Bits per simulated burst.
    pub burst_bits: usize,
}

pub const DEFAULT_MAX_BITS: u64 = 200_000;
pub const DEFAULT_MIN_ERRORS: u64 = 100;
pub const DEFAULT_BURST_BITS: usize = 200;
pub const DEFAULT_LB: usize = 5;
pub const DEFAULT_LP: usize = 5;

impl LinkConfig {
    pub fn new(scheme: Scheme, channel: ChannelSpec) -> Self {
        Self {
            scheme,
            channel,
            snr_grid_db: vec![],
            max_bits: DEFAULT_MAX_BITS,
            min_errors: DEFAULT_MIN_ERRORS,
            seed: 0,
            ns: crate::modem::DEFAULT_NS,
            dt: crate::DEFAULT_DT,
            t_int: None,
            coherence: None,
            sr_differential: false,
            dtr_delay: DtrDelay::FrameTime,
            apply_shadowing: false,
            lb: DEFAULT_LB,
            lp: DEFAULT_LP,
            burst_bits: DEFAULT_BURST_BITS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_grid_db.is_empty() {
            return Err(SimError::config("snr grid must be non-empty"));
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(SimError::config("snr grid values must be finite"));
        }
        if self.max_bits < 10 * self.min_errors {
            return Err(SimError::config(format!(
                "bits budget {} must be at least 10x min-errors {}",
                self.max_bits, self.min_errors
            )));
        }
        if self.min_errors == 0 {
            return Err(SimError::config("min-errors must be positive"));
        }
        if self.burst_bits < 2 {
            return Err(SimError::config("burst size must be at least 2 bits"));
        }
        if let ChannelSpec::Preset { params, .. } = &self.channel {
            params.validate()?;
        }
        Ok(())
    }

    /// Scheme-default coherence policy. The differential receiver assumes the
    /// channel holds for two consecutive symbols; the self-reference receiver
    /// only needs one.
    pub fn default_coherence(scheme: Scheme) -> CoherencePolicy {
        match scheme {
            Scheme::Dtr => CoherencePolicy::PerSymbols(2),
            _ => CoherencePolicy::PerSymbols(1),
        }
    }

    pub fn effective_coherence(&self) -> CoherencePolicy {
        match &self.channel {
            // A fixed tap list never changes; redrawing the AWGN unit tap
            // would be a no-op.
            ChannelSpec::Awgn | ChannelSpec::Fixed(_) => CoherencePolicy::Static,
            _ => self.coherence.unwrap_or(Self::default_coherence(self.scheme)),
        }
    }
}

/// One measured BER point.
#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub snr_db: f64,
    pub errors: u64,
    pub trials: u64,
    /// Error-rate estimate; for censored points this is the Wilson upper
    /// bound rather than the (unreliable) raw ratio.
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Set when the point exhausted `max_bits` before reaching `min_errors`.
    pub censored: bool,
}

impl BerPoint {
    pub fn from_counts(snr_db: f64, errors: u64, trials: u64, min_errors: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(errors, trials);
        let censored = errors < min_errors;
        let ber = if censored {
            ci_high
        } else {
            errors as f64 / trials as f64
        };
        Self {
            snr_db,
            errors,
            trials,
            ber,
            ci_low,
            ci_high,
            censored,
        }
    }
}

/// 95% Wilson score interval for a binomial proportion.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Converts an Eb/N0 target in dB to a noise spectral density.
pub fn snr_to_n0(snr_db: f64, eb: f64) -> f64 {
    eb / 10f64.powf(snr_db / 10.0)
}

/// Adds white Gaussian noise with spectral density `n0` (per-sample variance
/// `n0 / (2 dt)`).
pub fn awgn_add(w: &SampledWaveform, n0: f64, rng: &mut RandomStream) -> Result<SampledWaveform> {
    if n0 < 0.0 || !n0.is_finite() {
        return Err(SimError::config(format!("noise density must be non-negative, got {n0}")));
    }
    let mut out = w.clone();
    if n0 > 0.0 {
        let sigma = (n0 / (2.0 * w.dt())).sqrt();
        for s in out.samples_mut() {
            *s += sigma * rng.normal();
        }
    }
    Ok(out)
}

/// Everything derived from a [`LinkConfig`] that stays constant over a sweep.
#[derive(Debug, Clone)]
struct ResolvedLink {
    scheme: Scheme,
    channel: ChannelSpec,
    frame: FrameConfig,
    pulse: SampledWaveform,
    policy: CoherencePolicy,
    /// Discretization span of channel realizations (ns).
    span: f64,
    /// Transmitted (and, with unit channel energy, received) energy per bit.
    eb: f64,
    sr_gate: Option<SrTemplate>,
    sr_differential: bool,
    dtr_delay_ns: f64,
    apply_shadowing: bool,
    lb: usize,
    lp: usize,
    burst_bits: usize,
    dt: f64,
}

fn resolve(cfg: &LinkConfig) -> Result<ResolvedLink> {
    let dt = cfg.dt;
    let pulse = gaussian_monocycle(&PulseSpec {
        derivative_order: 2,
        width: crate::modem::DEFAULT_TW,
        dt,
    })?;

    let mut frame = FrameConfig::defaults_for(cfg.scheme);
    frame.ns = cfg.ns;
    // Default integration window: the channel span capped at the frame
    // (conventional TR additionally caps at Td so the reference window stays
    // clear of its own data pulse).
    let nominal = cfg.channel.nominal_span().max(frame.tw);
    let cap = if cfg.scheme == Scheme::Tr { frame.td } else { frame.tf };
    frame.t_int = cfg.t_int.unwrap_or_else(|| nominal.min(cap));
    frame.validate(dt)?;

    let span = match &cfg.channel {
        ChannelSpec::Awgn => dt,
        ChannelSpec::Preset { params, .. } => params.max_span,
        ChannelSpec::Fixed(ch) => ch.last_delay() + dt,
    };

    let eb = cfg.scheme.pulses_per_frame() as f64 * cfg.ns as f64 * pulse.energy();

    let sr_gate = if cfg.scheme == Scheme::Sr {
        Some(SrTemplate::new(&pulse, frame.tw, frame.t_int)?)
    } else {
        None
    };

    let dtr_delay_ns = match cfg.dtr_delay {
        DtrDelay::FrameTime => frame.tf,
        DtrDelay::Td => frame.td,
    };

    Ok(ResolvedLink {
        scheme: cfg.scheme,
        channel: cfg.channel.clone(),
        frame,
        pulse,
        policy: cfg.effective_coherence(),
        span,
        eb,
        sr_gate,
        sr_differential: cfg.sr_differential,
        dtr_delay_ns,
        apply_shadowing: cfg.apply_shadowing,
        lb: cfg.lb,
        lp: cfg.lp,
        burst_bits: cfg.burst_bits,
        dt,
    })
}

/// Dense convolution of a discrete channel with the pulse shape.
fn pulse_response(gains: &[f64], pulse: &[f64], scale: f64) -> Vec<f64> {
    let mut out = vec![0.0; gains.len() + pulse.len() - 1];
    for (k, &g) in gains.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let gs = g * scale;
        for (j, &p) in pulse.iter().enumerate() {
            out[k + j] += gs * p;
        }
    }
    out
}

struct BurstChannels {
    realizations: Vec<ChannelRealization>,
    /// Per-block frame response (channel convolved with the pulse).
    responses: Vec<Vec<f64>>,
    symbols_per_block: usize,
}

fn draw_burst_channels(res: &ResolvedLink, rng: &mut RandomStream) -> Result<BurstChannels> {
    let symbols = res.burst_bits;
    let symbols_per_block = match res.policy {
        CoherencePolicy::Static => symbols,
        CoherencePolicy::PerSymbols(n) => n as usize,
    };
    let n_blocks = symbols.div_ceil(symbols_per_block);

    let mut realizations = Vec::with_capacity(n_blocks);
    for _ in 0..n_blocks {
        let ch = match &res.channel {
            ChannelSpec::Awgn => ChannelRealization::unit(),
            ChannelSpec::Fixed(ch) => ch.clone(),
            ChannelSpec::Preset { params, .. } => draw_realization(params, rng)?,
        };
        realizations.push(ch);
    }

    let mut responses = Vec::with_capacity(n_blocks);
    for ch in &realizations {
        let disc = discretize(ch, res.dt, res.span)?;
        let scale = if res.apply_shadowing { ch.shadowing } else { 1.0 };
        responses.push(pulse_response(&disc.gains, res.pulse.samples(), scale));
    }

    Ok(BurstChannels {
        realizations,
        responses,
        symbols_per_block,
    })
}

fn axpy(dst: &mut [f64], src: &[f64], scale: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += scale * s;
    }
}

/// Synthesizes the noiseless received burst by stamping each frame's channel
/// response; equivalent to transmitting the modulated pulse train through the
/// per-block channels.
fn synthesize_received(res: &ResolvedLink, bits: &BitBlock, ch: &BurstChannels) -> Result<SampledWaveform> {
    let fs = res.frame.frame_samples(res.dt);
    let n_frames = bits.len() * res.frame.ns;
    let resp_len = ch.responses[0].len();
    let mut rx = vec![0.0; n_frames * fs + resp_len + fs];

    let block_of = |frame: usize| ((frame / res.frame.ns) / ch.symbols_per_block).min(ch.responses.len() - 1);

    match res.scheme.modulation() {
        Modulation::Antipodal => {
            for i in 0..n_frames {
                let b = bits.bits()[i / res.frame.ns] as f64;
                let resp = &ch.responses[block_of(i)];
                axpy(&mut rx[i * fs..i * fs + resp_len], resp, b);
            }
        }
        Modulation::Differential => {
            let m = encode_differential(bits, res.frame.ns, DEFAULT_M_INIT);
            for i in 0..n_frames {
                let resp = &ch.responses[block_of(i)];
                axpy(&mut rx[i * fs..i * fs + resp_len], resp, m[i] as f64);
            }
        }
        Modulation::TwoPulse => {
            let td = (res.frame.td / res.dt).round() as usize;
            for i in 0..n_frames {
                let b = bits.bits()[i / res.frame.ns] as f64;
                let resp = &ch.responses[block_of(i)];
                axpy(&mut rx[i * fs..i * fs + resp_len], resp, 1.0);
                axpy(&mut rx[i * fs + td..i * fs + td + resp_len], resp, b);
            }
        }
    }

    SampledWaveform::new(rx, res.dt, 0.0)
}

fn demodulate(
    res: &ResolvedLink,
    rx: &SampledWaveform,
    ch: &BurstChannels,
    n_bits: usize,
) -> Result<DecisionTrace> {
    match res.scheme {
        Scheme::ARake => rake_demodulate(
            rx,
            &ch.realizations,
            ch.symbols_per_block,
            RakeSelection::All,
            &res.pulse,
            &res.frame,
            n_bits,
        ),
        Scheme::SRake => rake_demodulate(
            rx,
            &ch.realizations,
            ch.symbols_per_block,
            RakeSelection::Strongest(res.lb),
            &res.pulse,
            &res.frame,
            n_bits,
        ),
        Scheme::PRake => rake_demodulate(
            rx,
            &ch.realizations,
            ch.symbols_per_block,
            RakeSelection::Earliest(res.lp),
            &res.pulse,
            &res.frame,
            n_bits,
        ),
        Scheme::Dtr => dtr_demodulate(rx, &res.frame, res.dtr_delay_ns, n_bits),
        Scheme::Tr => tr_demodulate(rx, &res.frame, n_bits),
        Scheme::Sr => sr_demodulate(
            rx,
            &res.frame,
            res.sr_gate.as_ref().expect("sr gate resolved"),
            n_bits,
            res.sr_differential,
        ),
    }
}

/// Runs one burst; returns (errors, counted trials).
fn run_burst(res: &ResolvedLink, snr_db: f64, stream: &RandomStream) -> Result<(u64, u64)> {
    let mut bits_rng = stream.split(0);
    let mut chan_rng = stream.split(1);
    let mut noise_rng = stream.split(2);

    let bits = BitBlock::random(res.burst_bits, &mut bits_rng)?;
    let channels = draw_burst_channels(res, &mut chan_rng)?;
    let mut rx = synthesize_received(res, &bits, &channels)?;

    let n0 = snr_to_n0(snr_db, res.eb);
    if n0 > 0.0 {
        let sigma = (n0 / (2.0 * res.dt)).sqrt();
        for s in rx.samples_mut() {
            *s += sigma * noise_rng.normal();
        }
    }

    let trace = demodulate(res, &rx, &channels, bits.len())?;
    let mut errors = 0u64;
    for (j, (&d, &b)) in trace.decisions.iter().zip(bits.bits()).enumerate() {
        if j >= trace.discarded_prefix && d != b {
            errors += 1;
        }
    }
    let trials = (bits.len() - trace.discarded_prefix) as u64;
    Ok((errors, trials))
}

/// Bursts evaluated per parallel chunk. Fixed so the stopping rule (checked
/// between chunks) does not depend on the worker count.
const BURST_CHUNK: u64 = 16;

fn run_point_resolved(res: &ResolvedLink, cfg: &LinkConfig, snr_db: f64, stream: &RandomStream) -> Result<BerPoint> {
    let mut errors = 0u64;
    let mut trials = 0u64;
    let mut next_burst = 0u64;
    while errors < cfg.min_errors && trials < cfg.max_bits {
        let chunk: Vec<u64> = (next_burst..next_burst + BURST_CHUNK).collect();
        next_burst += BURST_CHUNK;
        let outcomes: Result<Vec<(u64, u64)>> = chunk
            .par_iter()
            .map(|&b| run_burst(res, snr_db, &stream.split(b)))
            .collect();
        for (e, t) in outcomes? {
            errors += e;
            trials += t;
        }
    }
    Ok(BerPoint::from_counts(snr_db, errors, trials, cfg.min_errors))
}

/// Measures one SNR point.
pub fn run_ber_point(cfg: &LinkConfig, snr_db: f64, stream: &RandomStream) -> Result<BerPoint> {
    let mut probe = cfg.clone();
    if probe.snr_grid_db.is_empty() {
        probe.snr_grid_db = vec![snr_db];
    }
    probe.validate()?;
    let res = resolve(cfg)?;
    run_point_resolved(&res, cfg, snr_db, stream)
}

/// Evaluates the whole SNR grid. Point `i` always consumes the stream
/// `root.split(i)`, so per-point results are independent of evaluation order;
/// the returned list is sorted by SNR.
pub fn run_sweep(cfg: &LinkConfig) -> Result<Vec<BerPoint>> {
    cfg.validate()?;
    let res = resolve(cfg)?;
    let root = RandomStream::from_seed(cfg.seed);
    let mut points = Vec::with_capacity(cfg.snr_grid_db.len());
    for (i, &snr) in cfg.snr_grid_db.iter().enumerate() {
        points.push(run_point_resolved(&res, cfg, snr, &root.split(i as u64))?);
    }
    points.sort_by(|a, b| a.snr_db.partial_cmp(&b.snr_db).unwrap());
    Ok(points)
}

/// One fully traced burst (for waveform dumps and inspection): transmitted
/// waveform, received waveform after channel and optional noise, and the
/// decision trace.
#[derive(Debug, Clone)]
pub struct BurstSim {
    pub tx: SampledWaveform,
    pub rx: SampledWaveform,
    pub trace: DecisionTrace,
    pub bits: BitBlock,
    pub eb: f64,
}

/// Simulates one burst with explicit bits; `snr_db = None` keeps it
/// noiseless.
pub fn simulate_burst(
    cfg: &LinkConfig,
    bits: &BitBlock,
    snr_db: Option<f64>,
    stream: &RandomStream,
) -> Result<BurstSim> {
    let mut res = resolve(cfg)?;
    res.burst_bits = bits.len();
    let mut chan_rng = stream.split(1);
    let mut noise_rng = stream.split(2);

    let channels = draw_burst_channels(&res, &mut chan_rng)?;
    let mut rx = synthesize_received(&res, bits, &channels)?;
    if let Some(snr) = snr_db {
        let n0 = snr_to_n0(snr, res.eb);
        rx = awgn_add(&rx, n0, &mut noise_rng)?;
    }

    let tx = match res.scheme.modulation() {
        Modulation::Antipodal => build_sr_signal(bits, &res.frame, &res.pulse)?,
        Modulation::Differential => build_dtr_signal(bits, &res.frame, &res.pulse)?,
        Modulation::TwoPulse => build_tr_signal(bits, &res.frame, &res.pulse)?,
    };

    let trace = demodulate(&res, &rx, &channels, bits.len())?;
    Ok(BurstSim {
        tx,
        rx,
        trace,
        bits: bits.clone(),
        eb: res.eb,
    })
}
