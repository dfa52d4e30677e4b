//! Bit-to-waveform mapping for the supported signaling schemes.
//!
//! Three transmitter families exist:
//! - antipodal: one pulse per frame whose polarity is the data bit directly
//!   (used by the self-reference scheme and as input to the Rake receivers);
//! - differential: one pulse per frame with polarity `m_i = m_{i-1} * b`,
//!   so consecutive frames carry the reference relationship;
//! - two-pulse: an unmodulated reference pulse at the frame start plus a
//!   bit-modulated data pulse `Td` later (conventional transmitted
//!   reference).

use crate::error::{Result, SimError};
use crate::pulse::{grid_steps, SampledWaveform};
use crate::stream::RandomStream;
use rand::RngCore;

/// Default pulse width Tw (ns).
pub const DEFAULT_TW: f64 = 0.7;
/// Default frame duration for the self-reference scheme (ns).
pub const DEFAULT_TF_SR: f64 = 5.375;
/// Default frame duration for differential / conventional TR and the Rake
/// baselines (ns).
pub const DEFAULT_TF_DTR: f64 = 10.75;
/// Default reference-to-data spacing inside a TR frame (ns).
pub const DEFAULT_TD: f64 = 8.75;
/// Default pulses per bit. Several frames per bit keep the differential
/// receiver's integrate-and-dump effective when the channel redraws every
/// two symbols (with a single frame per bit every other reference pair
/// straddles a redraw boundary and the scheme degenerates).
pub const DEFAULT_NS: usize = 4;
/// Differential seed m_{-1}; the first decoded bit of a differential burst
/// is discarded from error counting, so the seed choice is arbitrary.
pub const DEFAULT_M_INIT: i8 = 1;

/// Receiver scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ARake,
    SRake,
    PRake,
    Tr,
    Dtr,
    Sr,
}

/// Transmitter family behind each receiver scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modulation {
    Antipodal,
    Differential,
    TwoPulse,
}

impl Scheme {
    pub fn modulation(self) -> Modulation {
        match self {
            Scheme::ARake | Scheme::SRake | Scheme::PRake | Scheme::Sr => Modulation::Antipodal,
            Scheme::Dtr => Modulation::Differential,
            Scheme::Tr => Modulation::TwoPulse,
        }
    }

    /// Pulses transmitted per frame.
    pub fn pulses_per_frame(self) -> usize {
        match self.modulation() {
            Modulation::TwoPulse => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::ARake => "arake",
            Scheme::SRake => "srake",
            Scheme::PRake => "prake",
            Scheme::Tr => "tr",
            Scheme::Dtr => "dtr",
            Scheme::Sr => "sr",
        }
    }

    pub fn by_name(name: &str) -> Option<Scheme> {
        match name {
            "arake" => Some(Scheme::ARake),
            "srake" => Some(Scheme::SRake),
            "prake" => Some(Scheme::PRake),
            "tr" => Some(Scheme::Tr),
            "dtr" => Some(Scheme::Dtr),
            "sr" => Some(Scheme::Sr),
            _ => None,
        }
    }
}

/// Frame timing for one scheme: frame duration, intra-frame reference delay
/// (TR only), pulses per bit, pulse width and integration window, all in ns.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameConfig {
    pub scheme: Scheme,
    pub tf: f64,
    pub td: f64,
    pub ns: usize,
    pub tw: f64,
    pub t_int: f64,
}

impl FrameConfig {
    /// Standard timings for `scheme`; the integration window defaults to the
    /// frame duration and is normally narrowed by the engine.
    pub fn defaults_for(scheme: Scheme) -> Self {
        let tf = match scheme {
            Scheme::Sr => DEFAULT_TF_SR,
            _ => DEFAULT_TF_DTR,
        };
        Self {
            scheme,
            tf,
            td: DEFAULT_TD,
            ns: DEFAULT_NS,
            tw: DEFAULT_TW,
            t_int: tf,
        }
    }

    pub fn validate(&self, dt: f64) -> Result<()> {
        if self.ns < 1 {
            return Err(SimError::config("ns (pulses per bit) must be >= 1"));
        }
        if !(self.tw > 0.0) || self.tw > self.tf {
            return Err(SimError::config(format!(
                "pulse width {} ns must be positive and no longer than the frame {} ns",
                self.tw, self.tf
            )));
        }
        if !(self.t_int > 0.0) || self.t_int > self.tf + 1e-12 {
            return Err(SimError::config(format!(
                "integration window {} ns must lie in (0, Tf = {} ns]",
                self.t_int, self.tf
            )));
        }
        if self.scheme == Scheme::Tr && (self.td < self.tw || self.td + self.tw > self.tf) {
            return Err(SimError::config(format!(
                "TR spacing Td = {} ns must satisfy Tw <= Td and Td + Tw <= Tf",
                self.td
            )));
        }
        for (name, v) in [
            ("tf", self.tf),
            ("td", self.td),
            ("tw", self.tw),
            ("tint", self.t_int),
        ] {
            grid_steps(v, dt).map_err(|_| {
                SimError::config(format!("{name} = {v} ns is not a multiple of dt = {dt} ns"))
            })?;
        }
        Ok(())
    }

    pub fn frame_samples(&self, dt: f64) -> usize {
        (self.tf / dt).round() as usize
    }

    pub fn window_samples(&self, dt: f64) -> usize {
        (self.t_int / dt).round() as usize
    }

    /// Signaling duration of `n_bits` (frame time only, without the trailing
    /// pulse tail).
    pub fn burst_duration(&self, n_bits: usize) -> f64 {
        self.ns as f64 * n_bits as f64 * self.tf
    }
}

/// A block of antipodal data bits, each +1 or -1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitBlock(Vec<i8>);

impl BitBlock {
    pub fn new(bits: Vec<i8>) -> Result<Self> {
        if bits.is_empty() {
            return Err(SimError::config("bit block must be non-empty"));
        }
        if bits.iter().any(|&b| b != 1 && b != -1) {
            return Err(SimError::config("bits must be +1 or -1"));
        }
        Ok(Self(bits))
    }

    /// Equiprobable random bits.
    pub fn random(n: usize, rng: &mut RandomStream) -> Result<Self> {
        if n == 0 {
            return Err(SimError::config("bit block must be non-empty"));
        }
        Ok(Self(
            (0..n)
                .map(|_| if rng.next_u32() & 1 == 0 { 1 } else { -1 })
                .collect(),
        ))
    }

    pub fn bits(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Differentially encodes `bits` with `ns` frames per bit:
/// `m_i = m_{i-1} * b_{floor(i / ns)}`, starting from `m_init`.
pub fn encode_differential(bits: &BitBlock, ns: usize, m_init: i8) -> Vec<i8> {
    let mut out = Vec::with_capacity(bits.len() * ns);
    let mut m = m_init;
    for &b in bits.bits() {
        for _ in 0..ns {
            m *= b;
            out.push(m);
        }
    }
    out
}

fn pulse_train(
    polarities: &[i8],
    cfg: &FrameConfig,
    pulse: &SampledWaveform,
) -> Result<SampledWaveform> {
    cfg.validate(pulse.dt())?;
    let fs = cfg.frame_samples(pulse.dt());
    let tail = (cfg.tw / pulse.dt()).round() as usize;
    let mut out = SampledWaveform::zeros(polarities.len() * fs + tail, pulse.dt(), 0.0)?;
    for (i, &m) in polarities.iter().enumerate() {
        out.add_scaled_at(pulse, i * fs, m as f64)?;
    }
    Ok(out)
}

/// Differential transmitter: one pulse per frame with polarity `m_i`.
pub fn build_dtr_signal(
    bits: &BitBlock,
    cfg: &FrameConfig,
    pulse: &SampledWaveform,
) -> Result<SampledWaveform> {
    if cfg.scheme.modulation() != Modulation::Differential {
        return Err(SimError::config(format!(
            "build_dtr_signal requires a differential scheme, got {}",
            cfg.scheme.name()
        )));
    }
    let m = encode_differential(bits, cfg.ns, DEFAULT_M_INIT);
    pulse_train(&m, cfg, pulse)
}

/// Antipodal transmitter: one pulse per frame, polarity equal to the data
/// bit. No reference pulse and no differential encoding.
pub fn build_sr_signal(
    bits: &BitBlock,
    cfg: &FrameConfig,
    pulse: &SampledWaveform,
) -> Result<SampledWaveform> {
    if cfg.scheme.modulation() != Modulation::Antipodal {
        return Err(SimError::config(format!(
            "build_sr_signal requires an antipodal scheme, got {}",
            cfg.scheme.name()
        )));
    }
    let pol: Vec<i8> = bits
        .bits()
        .iter()
        .flat_map(|&b| std::iter::repeat(b).take(cfg.ns))
        .collect();
    pulse_train(&pol, cfg, pulse)
}

/// Conventional TR transmitter: an unmodulated reference pulse at the frame
/// start and a bit-modulated pulse `Td` later.
pub fn build_tr_signal(
    bits: &BitBlock,
    cfg: &FrameConfig,
    pulse: &SampledWaveform,
) -> Result<SampledWaveform> {
    if cfg.scheme.modulation() != Modulation::TwoPulse {
        return Err(SimError::config(format!(
            "build_tr_signal requires the TR scheme, got {}",
            cfg.scheme.name()
        )));
    }
    cfg.validate(pulse.dt())?;
    let fs = cfg.frame_samples(pulse.dt());
    let td = (cfg.td / pulse.dt()).round() as usize;
    let tail = (cfg.tw / pulse.dt()).round() as usize;
    let n_frames = bits.len() * cfg.ns;
    let mut out = SampledWaveform::zeros(n_frames * fs + td + tail, pulse.dt(), 0.0)?;
    for i in 0..n_frames {
        let b = bits.bits()[i / cfg.ns];
        out.add_scaled_at(pulse, i * fs, 1.0)?;
        out.add_scaled_at(pulse, i * fs + td, b as f64)?;
    }
    Ok(out)
}
