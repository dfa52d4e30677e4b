//! Saleh-Valenzuela multipath channel generation and application.
//!
//! Channel realizations follow the clustered double-exponential model adopted
//! by the IEEE 802.15.3a study group: rays arrive in Poisson clusters, tap
//! magnitudes are lognormal around a double-exponential mean-power profile,
//! and an independent lognormal shadowing term is kept separate from the
//! (energy-normalized) tap list. The four standard presets CM1-CM4 are
//! built in.
//!
//! Tap polarity is configurable. The autocorrelation receivers in this crate
//! compare each frame against a rectified replica of itself, which makes the
//! detector sensitive to the sign structure of the channel; the presets
//! therefore default to all-positive (plain lognormal) amplitudes, with
//! equiprobable random inversion available via [`Polarity::Random`].

use std::io::{BufRead, Write};

use crate::error::{Result, SimError};
use crate::pulse::SampledWaveform;
use crate::stream::RandomStream;

/// Tap polarity convention for generated realizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    /// All taps positive (plain lognormal amplitudes).
    Positive,
    /// Each tap independently inverted with probability 1/2.
    Random,
}

/// Cluster/ray arrival and fading parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    /// Cluster arrival rate Lambda (1/ns).
    pub cluster_rate: f64,
    /// Ray arrival rate lambda within a cluster (1/ns).
    pub ray_rate: f64,
    /// Cluster power decay constant Gamma (ns).
    pub cluster_decay: f64,
    /// Ray power decay constant gamma (ns).
    pub ray_decay: f64,
    /// Cluster lognormal fading std dev (dB).
    pub cluster_sigma_db: f64,
    /// Ray lognormal fading std dev (dB).
    pub ray_sigma_db: f64,
    /// Lognormal shadowing std dev (dB).
    pub shadowing_sigma_db: f64,
    /// Hard truncation of the realization (ns).
    pub max_span: f64,
    pub polarity: Polarity,
}

impl ChannelParams {
    /// Residential line-of-sight preset (CM1).
    pub fn cm1() -> Self {
        Self::preset(0.0233, 2.5, 7.1, 4.3, 200.0)
    }

    /// Residential non-line-of-sight preset (CM2).
    pub fn cm2() -> Self {
        Self::preset(0.4, 0.5, 5.5, 6.7, 200.0)
    }

    /// Office non-line-of-sight preset (CM3).
    pub fn cm3() -> Self {
        Self::preset(0.0667, 2.1, 14.0, 7.9, 200.0)
    }

    /// Extreme non-line-of-sight preset (CM4).
    pub fn cm4() -> Self {
        Self::preset(0.0667, 2.1, 24.0, 12.0, 300.0)
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "cm1" => Some(Self::cm1()),
            "cm2" => Some(Self::cm2()),
            "cm3" => Some(Self::cm3()),
            "cm4" => Some(Self::cm4()),
            _ => None,
        }
    }

    fn preset(cluster_rate: f64, ray_rate: f64, cluster_decay: f64, ray_decay: f64, span: f64) -> Self {
        Self {
            cluster_rate,
            ray_rate,
            cluster_decay,
            ray_decay,
            cluster_sigma_db: 3.3941,
            ray_sigma_db: 3.3941,
            shadowing_sigma_db: 3.0,
            max_span: span,
            polarity: Polarity::Positive,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cluster rate", self.cluster_rate),
            ("ray rate", self.ray_rate),
            ("cluster decay", self.cluster_decay),
            ("ray decay", self.ray_decay),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SimError::config(format!("channel {name} must be positive, got {v}")));
            }
        }
        if self.cluster_sigma_db < 0.0 || self.ray_sigma_db < 0.0 || self.shadowing_sigma_db < 0.0 {
            return Err(SimError::config("fading std devs must be non-negative"));
        }
        if self.max_span < 10.0 * self.cluster_decay {
            return Err(SimError::config(format!(
                "max_span {} ns must cover at least ten cluster decay constants ({} ns)",
                self.max_span,
                10.0 * self.cluster_decay
            )));
        }
        Ok(())
    }
}

/// One multipath component: arrival delay (ns) and signed amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub delay: f64,
    pub amplitude: f64,
}

/// A single channel draw: energy-normalized tap list plus shadowing factor.
///
/// `shadowing` is a linear scale factor stored separately; the tap energies
/// always sum to one so that receiver SNR bookkeeping stays unambiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub taps: Vec<Tap>,
    pub shadowing: f64,
    pub model: String,
    pub seed: u64,
}

impl ChannelRealization {
    /// Single unit tap at delay zero (ideal AWGN-only link).
    pub fn unit() -> Self {
        Self {
            taps: vec![Tap { delay: 0.0, amplitude: 1.0 }],
            shadowing: 1.0,
            model: "awgn".to_string(),
            seed: 0,
        }
    }

    pub fn tap_energy(&self) -> f64 {
        self.taps.iter().map(|t| t.amplitude * t.amplitude).sum()
    }

    pub fn last_delay(&self) -> f64 {
        self.taps.last().map(|t| t.delay).unwrap_or(0.0)
    }
}

/// Draws one realization from `params`.
///
/// The first cluster arrives at t = 0 and the first ray of every cluster at
/// the cluster time, matching the usual convention that the time origin is
/// the first arrival. Cluster and ray inter-arrival times are exponential;
/// magnitudes are lognormal with a per-cluster and a per-ray term whose mean
/// is corrected so the expected tap power follows
/// `exp(-T/Gamma) * exp(-tau/gamma)`. Taps past `max_span` are dropped and
/// the remaining energies are normalized to unit total.
pub fn draw_realization(params: &ChannelParams, rng: &mut RandomStream) -> Result<ChannelRealization> {
    params.validate()?;
    let ln10 = std::f64::consts::LN_10;
    let sigma_sq_db = params.cluster_sigma_db.powi(2) + params.ray_sigma_db.powi(2);
    let mean_offset_db = sigma_sq_db * ln10 / 20.0;

    let mut taps: Vec<Tap> = Vec::with_capacity(256);
    let mut t_cluster = 0.0;
    while t_cluster <= params.max_span {
        let cluster_fade_db = params.cluster_sigma_db * rng.normal();
        let mut tau = 0.0;
        while t_cluster + tau <= params.max_span {
            let mean_db = -10.0 * (t_cluster / params.cluster_decay + tau / params.ray_decay) / ln10
                - mean_offset_db;
            let amp_db = mean_db + cluster_fade_db + params.ray_sigma_db * rng.normal();
            let mut amplitude = 10f64.powf(amp_db / 20.0);
            if params.polarity == Polarity::Random {
                amplitude *= rng.sign();
            }
            taps.push(Tap {
                delay: t_cluster + tau,
                amplitude,
            });
            tau += rng.exponential(params.ray_rate)?;
        }
        t_cluster += rng.exponential(params.cluster_rate)?;
    }

    taps.sort_by(|a, b| a.delay.partial_cmp(&b.delay).unwrap());
    // Merge taps landing on exactly the same delay so delays stay strictly
    // increasing.
    let mut merged: Vec<Tap> = Vec::with_capacity(taps.len());
    for tap in taps {
        match merged.last_mut() {
            Some(last) if last.delay == tap.delay => last.amplitude += tap.amplitude,
            _ => merged.push(tap),
        }
    }

    let total: f64 = merged.iter().map(|t| t.amplitude * t.amplitude).sum();
    if total <= 0.0 {
        return Err(SimError::internal("channel realization carries no energy"));
    }
    let norm = total.sqrt().recip();
    for tap in &mut merged {
        tap.amplitude *= norm;
    }

    let shadowing = 10f64.powf(params.shadowing_sigma_db * rng.normal() / 20.0);
    Ok(ChannelRealization {
        taps: merged,
        shadowing,
        model: "custom".to_string(),
        seed: 0,
    })
}

/// Tapped-delay-line form of a realization on the sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteChannel {
    pub gains: Vec<f64>,
    pub dt: f64,
    /// Set when taps beyond `span` were dropped during binning.
    pub truncated: bool,
}

/// Bins each tap into the nearest sample of a `span`-long gain vector.
/// Coincident taps sum; taps past `span` set the truncation flag.
pub fn discretize(ch: &ChannelRealization, dt: f64, span: f64) -> Result<DiscreteChannel> {
    if !(dt > 0.0) || !(span > 0.0) {
        return Err(SimError::config("discretization dt and span must be positive"));
    }
    let bins = (span / dt).round().max(1.0) as usize;
    let mut gains = vec![0.0; bins];
    let mut truncated = false;
    for tap in &ch.taps {
        let bin = (tap.delay / dt).round() as usize;
        if bin >= bins {
            truncated = true;
            continue;
        }
        gains[bin] += tap.amplitude;
    }
    Ok(DiscreteChannel { gains, dt, truncated })
}

/// Convolves `w` with the tapped delay line, scaled by `shadowing`.
/// Output length is `len(w) + len(gains) - 1`.
pub fn apply(taps: &DiscreteChannel, w: &SampledWaveform, shadowing: f64) -> Result<SampledWaveform> {
    if taps.dt != w.dt() {
        return Err(SimError::config(format!(
            "channel grid {} ns does not match waveform grid {} ns",
            taps.dt,
            w.dt()
        )));
    }
    let out_len = w.len() + taps.gains.len() - 1;
    let mut out = vec![0.0; out_len];
    let src = w.samples();
    for (k, &g) in taps.gains.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let g = g * shadowing;
        for (j, &s) in src.iter().enumerate() {
            out[k + j] += g * s;
        }
    }
    SampledWaveform::new(out, w.dt(), w.t0())
}

/// Ensemble delay-dispersion statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    /// Energy-weighted mean excess delay (ns).
    pub mean_excess_delay: f64,
    /// Energy-weighted RMS delay spread (ns).
    pub rms_delay_spread: f64,
    /// Mean number of taps within 10 dB of the strongest.
    pub np_10db: f64,
    /// Mean number of strongest taps capturing 85% of the energy.
    pub energy_capture_85: f64,
    /// Mean span containing 99% of the energy (ns).
    pub t_mds: f64,
}

/// Computes per-realization statistics and averages them over the ensemble.
pub fn stats(realizations: &[ChannelRealization]) -> Result<ChannelStats> {
    if realizations.is_empty() {
        return Err(SimError::config("channel statistics require at least one realization"));
    }
    let mut acc = [0.0f64; 5];
    for ch in realizations {
        let energies: Vec<f64> = ch.taps.iter().map(|t| t.amplitude * t.amplitude).collect();
        let total: f64 = energies.iter().sum();
        let tau_m: f64 = ch
            .taps
            .iter()
            .zip(&energies)
            .map(|(t, e)| t.delay * e)
            .sum::<f64>()
            / total;
        let var: f64 = ch
            .taps
            .iter()
            .zip(&energies)
            .map(|(t, e)| (t.delay - tau_m).powi(2) * e)
            .sum::<f64>()
            / total;

        let peak = energies.iter().cloned().fold(0.0f64, f64::max);
        let np10 = energies.iter().filter(|&&e| e >= peak / 10.0).count();

        let mut sorted = energies.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut cum = 0.0;
        let mut np85 = sorted.len();
        for (i, e) in sorted.iter().enumerate() {
            cum += e;
            if cum >= 0.85 * total {
                np85 = i + 1;
                break;
            }
        }

        let mut cum = 0.0;
        let mut t_mds = ch.last_delay();
        for (tap, e) in ch.taps.iter().zip(&energies) {
            cum += e;
            if cum >= 0.99 * total {
                t_mds = tap.delay;
                break;
            }
        }

        acc[0] += tau_m;
        acc[1] += var.max(0.0).sqrt();
        acc[2] += np10 as f64;
        acc[3] += np85 as f64;
        acc[4] += t_mds;
    }
    let n = realizations.len() as f64;
    Ok(ChannelStats {
        mean_excess_delay: acc[0] / n,
        rms_delay_spread: acc[1] / n,
        np_10db: acc[2] / n,
        energy_capture_85: acc[3] / n,
        t_mds: acc[4] / n,
    })
}

/// Writes a realization in the plain-text interchange format: one header line
/// `model seed shadowing`, then one `delay amplitude` pair per line with
/// delays printed to six decimal places.
pub fn write_realization<W: Write>(ch: &ChannelRealization, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{} {} {:e}", ch.model, ch.seed, ch.shadowing)?;
    for tap in &ch.taps {
        writeln!(out, "{:.6} {:e}", tap.delay, tap.amplitude)?;
    }
    Ok(())
}

/// Parses the format produced by [`write_realization`].
pub fn read_realization<R: BufRead>(input: &mut R) -> Result<ChannelRealization> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| SimError::config("channel file is empty"))?
        .map_err(|e| SimError::config(format!("channel file read failed: {e}")))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(SimError::config(
            "channel file header must be `model seed shadowing`",
        ));
    }
    let model = fields[0].to_string();
    let seed: u64 = fields[1]
        .parse()
        .map_err(|_| SimError::config(format!("invalid seed `{}` in channel file", fields[1])))?;
    let shadowing: f64 = fields[2]
        .parse()
        .map_err(|_| SimError::config(format!("invalid shadowing `{}` in channel file", fields[2])))?;

    let mut taps = Vec::new();
    for line in lines {
        let line = line.map_err(|e| SimError::config(format!("channel file read failed: {e}")))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = trimmed.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(SimError::config(format!(
                "channel tap line must be `delay amplitude`, got `{trimmed}`"
            )));
        }
        let delay: f64 = parts[0]
            .parse()
            .map_err(|_| SimError::config(format!("invalid delay `{}`", parts[0])))?;
        let amplitude: f64 = parts[1]
            .parse()
            .map_err(|_| SimError::config(format!("invalid amplitude `{}`", parts[1])))?;
        taps.push(Tap { delay, amplitude });
    }
    if taps.is_empty() {
        return Err(SimError::config("channel file contains no taps"));
    }
    for pair in taps.windows(2) {
        if pair[1].delay <= pair[0].delay {
            return Err(SimError::config("channel tap delays must be strictly increasing"));
        }
    }
    if taps[0].delay < 0.0 {
        return Err(SimError::config("channel tap delays must be non-negative"));
    }
    Ok(ChannelRealization {
        taps,
        shadowing,
        model,
        seed,
    })
}
