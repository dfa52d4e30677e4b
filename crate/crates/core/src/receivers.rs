//! Demodulators: coherent Rake combiners (all / strongest / earliest paths),
//! the conventional transmitted-reference correlator, the differential TR
//! autocorrelation receiver, and the self-reference receiver that correlates
//! each frame against a rectified, gated replica of itself.
//!
//! All receivers assume perfect frame timing: the received waveform starts at
//! t = 0 and frame `i` occupies `[i*Tf, (i+1)*Tf)`. Decision statistics are
//! integrated over the first `T_int` nanoseconds of each frame and combined
//! over the `Ns` frames of a bit by an integrate-and-dump stage.

use crate::channel::ChannelRealization;
use crate::error::{Result, SimError};
use crate::modem::{FrameConfig, Scheme, DEFAULT_M_INIT};
use crate::pulse::{grid_steps, SampledWaveform};

/// Per-burst demodulation record: raw per-frame correlator outputs, per-bit
/// statistics after the integrate-and-dump stage, and the decided bits.
///
/// `decisions` always covers every transmitted bit; the first
/// `discarded_prefix` entries are reference bootstrap bits that error
/// counting must skip (differential schemes discard one).
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTrace {
    pub frame_stats: Vec<f64>,
    pub bit_stats: Vec<f64>,
    pub decisions: Vec<i8>,
    pub discarded_prefix: usize,
}

fn sign_of(x: f64) -> i8 {
    if x < 0.0 {
        -1
    } else {
        1
    }
}

/// Gating waveform for the self-reference receiver: the transmitted
/// monocycle over `(0, Tw)`, exactly one over `[Tw, T_int)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SrTemplate {
    gate: Vec<f64>,
    dt: f64,
}

impl SrTemplate {
    pub fn new(pulse: &SampledWaveform, tw: f64, t_int: f64) -> Result<Self> {
        let dt = pulse.dt();
        let tw_samples = grid_steps(tw, dt)? as usize;
        let window = grid_steps(t_int, dt)? as usize;
        if window == 0 {
            return Err(SimError::config("integration window must span at least one sample"));
        }
        if tw_samples > pulse.len() {
            return Err(SimError::config("gate pulse shorter than Tw"));
        }
        let mut gate = vec![1.0; window];
        for k in 0..tw_samples.min(window) {
            gate[k] = pulse.samples()[k];
        }
        Ok(Self { gate, dt })
    }

    pub fn gate(&self) -> &[f64] {
        &self.gate
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Reference waveform for one frame segment: `|segment| * gate`.
    pub fn reference(&self, segment: &[f64]) -> Vec<f64> {
        segment
            .iter()
            .zip(&self.gate)
            .map(|(r, q)| r.abs() * q)
            .collect()
    }
}

/// Integrate-and-dump over the `ns` frames of each bit (modelled as the mean
/// of the per-frame statistics).
pub fn lowpass_integrate(frame_stats: &[f64], ns: usize) -> Result<Vec<f64>> {
    if ns == 0 {
        return Err(SimError::internal("ns must be positive"));
    }
    if frame_stats.len() % ns != 0 {
        return Err(SimError::internal(format!(
            "{} frame statistics do not divide into bits of {} frames",
            frame_stats.len(),
            ns
        )));
    }
    Ok(frame_stats
        .chunks(ns)
        .map(|c| c.iter().sum::<f64>() / ns as f64)
        .collect())
}

/// Rake finger selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RakeSelection {
    /// Combine every resolvable path.
    All,
    /// Combine the instantaneously strongest `L` paths.
    Strongest(usize),
    /// Combine the first-arriving `L` paths.
    Earliest(usize),
}

/// Indices of the taps a selection keeps.
pub fn select_taps(ch: &ChannelRealization, selection: RakeSelection) -> Result<Vec<usize>> {
    let n_taps = ch.taps.len();
    match selection {
        RakeSelection::All => Ok((0..n_taps).collect()),
        RakeSelection::Strongest(l) => {
            if l < 1 || l > n_taps {
                return Err(SimError::config(format!(
                    "strongest-path count {l} out of range 1..={n_taps}"
                )));
            }
            let mut idx: Vec<usize> = (0..n_taps).collect();
            idx.sort_by(|&a, &b| {
                ch.taps[b]
                    .amplitude
                    .abs()
                    .partial_cmp(&ch.taps[a].amplitude.abs())
                    .unwrap()
            });
            idx.truncate(l);
            Ok(idx)
        }
        RakeSelection::Earliest(l) => {
            if l < 1 || l > n_taps {
                return Err(SimError::config(format!(
                    "earliest-path count {l} out of range 1..={n_taps}"
                )));
            }
            Ok((0..l).collect())
        }
    }
}

/// Path energy captured by a selection: the sum of the selected taps'
/// squared amplitudes. Exactly non-decreasing in the finger count (the
/// superposed waveform's energy is not, because overlapping pulses add
/// signed cross terms).
pub fn captured_energy(ch: &ChannelRealization, selection: RakeSelection) -> Result<f64> {
    let keep = select_taps(ch, selection)?;
    Ok(keep.iter().map(|&k| ch.taps[k].amplitude.powi(2)).sum())
}

/// Builds one correlation template per channel block: the selected taps
/// convolved with the pulse, truncated to the integration window.
pub fn rake_templates(
    channels: &[ChannelRealization],
    selection: RakeSelection,
    pulse: &SampledWaveform,
    t_int: f64,
) -> Result<Vec<Vec<f64>>> {
    let dt = pulse.dt();
    let window = grid_steps(t_int, dt)? as usize;
    let mut templates = Vec::with_capacity(channels.len());
    for ch in channels {
        let keep = select_taps(ch, selection)?;
        let mut tmpl = vec![0.0; window];
        for &k in &keep {
            let tap = ch.taps[k];
            let bin = (tap.delay / dt).round() as usize;
            for (j, &p) in pulse.samples().iter().enumerate() {
                let idx = bin + j;
                if idx < window {
                    tmpl[idx] += tap.amplitude * p;
                }
            }
        }
        templates.push(tmpl);
    }
    Ok(templates)
}

/// Energy captured by a template (dt-weighted).
pub fn template_energy(template: &[f64], dt: f64) -> f64 {
    template.iter().map(|v| v * v).sum::<f64>() * dt
}

fn check_received(received: &SampledWaveform, cfg: &FrameConfig, n_bits: usize) -> Result<(usize, usize, usize)> {
    if received.t0() != 0.0 {
        return Err(SimError::config("received waveform must start at t = 0"));
    }
    cfg.validate(received.dt())?;
    let fs = cfg.frame_samples(received.dt());
    let window = cfg.window_samples(received.dt());
    let n_frames = n_bits * cfg.ns;
    if n_frames == 0 {
        return Err(SimError::config("burst must contain at least one bit"));
    }
    let needed = (n_frames - 1) * fs + window;
    if received.len() < needed {
        return Err(SimError::config(format!(
            "received waveform too short: {} samples, need {needed}",
            received.len()
        )));
    }
    Ok((fs, window, n_frames))
}

/// Coherent Rake demodulation with perfect channel knowledge.
///
/// `channels` holds one realization per coherence block and
/// `symbols_per_block` says how many consecutive symbols share a block (use
/// `n_bits` with a single realization for a static channel). The transmitted
/// burst is assumed antipodal (bit polarity directly on the pulses).
pub fn rake_demodulate(
    received: &SampledWaveform,
    channels: &[ChannelRealization],
    symbols_per_block: usize,
    selection: RakeSelection,
    pulse: &SampledWaveform,
    cfg: &FrameConfig,
    n_bits: usize,
) -> Result<DecisionTrace> {
    if channels.is_empty() || symbols_per_block == 0 {
        return Err(SimError::config("Rake demodulation requires channel knowledge"));
    }
    let (fs, window, n_frames) = check_received(received, cfg, n_bits)?;
    let templates = rake_templates(channels, selection, pulse, cfg.t_int)?;
    let dt = received.dt();
    let rx = received.samples();

    let mut frame_stats = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let block = ((i / cfg.ns) / symbols_per_block).min(templates.len() - 1);
        let tmpl = &templates[block];
        let base = i * fs;
        let acc: f64 = rx[base..base + window]
            .iter()
            .zip(tmpl)
            .map(|(r, t)| r * t)
            .sum();
        frame_stats.push(acc * dt);
    }

    let bit_stats = lowpass_integrate(&frame_stats, cfg.ns)?;
    let decisions: Vec<i8> = bit_stats.iter().map(|&y| sign_of(y)).collect();
    Ok(DecisionTrace {
        frame_stats,
        bit_stats,
        decisions,
        discarded_prefix: 0,
    })
}

pub fn arake_demodulate(
    received: &SampledWaveform,
    channels: &[ChannelRealization],
    symbols_per_block: usize,
    pulse: &SampledWaveform,
    cfg: &FrameConfig,
    n_bits: usize,
) -> Result<DecisionTrace> {
    rake_demodulate(received, channels, symbols_per_block, RakeSelection::All, pulse, cfg, n_bits)
}

pub fn srake_demodulate(
    received: &SampledWaveform,
    channels: &[ChannelRealization],
    symbols_per_block: usize,
    lb: usize,
    pulse: &SampledWaveform,
    cfg: &FrameConfig,
    n_bits: usize,
) -> Result<DecisionTrace> {
    rake_demodulate(
        received,
        channels,
        symbols_per_block,
        RakeSelection::Strongest(lb),
        pulse,
        cfg,
        n_bits,
    )
}

pub fn prake_demodulate(
    received: &SampledWaveform,
    channels: &[ChannelRealization],
    symbols_per_block: usize,
    lp: usize,
    pulse: &SampledWaveform,
    cfg: &FrameConfig,
    n_bits: usize,
) -> Result<DecisionTrace> {
    rake_demodulate(
        received,
        channels,
        symbols_per_block,
        RakeSelection::Earliest(lp),
        pulse,
        cfg,
        n_bits,
    )
}

/// Differential TR autocorrelation receiver.
///
/// Frame `i >= 1` is correlated against the waveform delayed by `delay` ns
/// (normally one frame, so the previous pulse acts as the reference). Frame 0
/// has no reference; the first bit is decided but flagged as discarded.
pub fn dtr_demodulate(
    received: &SampledWaveform,
    cfg: &FrameConfig,
    delay: f64,
    n_bits: usize,
) -> Result<DecisionTrace> {
    let (fs, window, n_frames) = check_received(received, cfg, n_bits)?;
    let dt = received.dt();
    let d = grid_steps(delay, dt)? as i64;
    if d <= 0 || d > fs as i64 {
        return Err(SimError::config(format!(
            "DTR delay {delay} ns must lie in (0, Tf] on the sample grid"
        )));
    }
    let d = d as usize;
    let rx = received.samples();

    let mut frame_stats = vec![0.0; n_frames];
    for i in 1..n_frames {
        let base = i * fs;
        let acc: f64 = rx[base..base + window]
            .iter()
            .zip(&rx[base - d..base - d + window])
            .map(|(cur, refr)| cur * refr)
            .sum();
        frame_stats[i] = acc * dt;
    }

    let bit_stats = lowpass_integrate(&frame_stats, cfg.ns)?;
    let decisions: Vec<i8> = bit_stats.iter().map(|&y| sign_of(y)).collect();
    Ok(DecisionTrace {
        frame_stats,
        bit_stats,
        decisions,
        discarded_prefix: 1,
    })
}

/// Conventional TR receiver: correlates the reference segment at the frame
/// start with the data segment `Td` later.
pub fn tr_demodulate(received: &SampledWaveform, cfg: &FrameConfig, n_bits: usize) -> Result<DecisionTrace> {
    if cfg.scheme != Scheme::Tr {
        return Err(SimError::config(format!(
            "tr_demodulate requires the TR scheme, got {}",
            cfg.scheme.name()
        )));
    }
    let (fs, window, n_frames) = check_received(received, cfg, n_bits)?;
    let dt = received.dt();
    let td = grid_steps(cfg.td, dt)? as usize;
    let rx = received.samples();
    if (n_frames - 1) * fs + td + window > rx.len() {
        return Err(SimError::config("received waveform too short for the TR data window"));
    }

    let mut frame_stats = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let base = i * fs;
        let acc: f64 = rx[base..base + window]
            .iter()
            .zip(&rx[base + td..base + td + window])
            .map(|(refr, data)| refr * data)
            .sum();
        frame_stats.push(acc * dt);
    }

    let bit_stats = lowpass_integrate(&frame_stats, cfg.ns)?;
    let decisions: Vec<i8> = bit_stats.iter().map(|&y| sign_of(y)).collect();
    Ok(DecisionTrace {
        frame_stats,
        bit_stats,
        decisions,
        discarded_prefix: 0,
    })
}

/// Self-reference receiver.
///
/// Each frame is correlated against its own rectified, gated copy:
/// `y_i = integral r_i(t) * |r_i(t)| * q(t) dt` over the integration window,
/// where `q` is the [`SrTemplate`] gate. The reference is built from the same
/// frame being detected, so no delay line and no cross-frame coherence are
/// required. With `differential` set, an optional post-decoding stage treats
/// the per-bit signs as differentially encoded (first bit discarded).
pub fn sr_demodulate(
    received: &SampledWaveform,
    cfg: &FrameConfig,
    template: &SrTemplate,
    n_bits: usize,
    differential: bool,
) -> Result<DecisionTrace> {
    if cfg.scheme != Scheme::Sr {
        return Err(SimError::config(format!(
            "sr_demodulate requires the SR scheme, got {}",
            cfg.scheme.name()
        )));
    }
    if template.dt != received.dt() {
        return Err(SimError::config(format!(
            "gate grid {} ns does not match received grid {} ns",
            template.dt,
            received.dt()
        )));
    }
    let (fs, window, n_frames) = check_received(received, cfg, n_bits)?;
    if template.gate.len() != window {
        return Err(SimError::config(format!(
            "gate length {} does not match the {}-sample integration window",
            template.gate.len(),
            window
        )));
    }
    let dt = received.dt();
    let rx = received.samples();

    let mut frame_stats = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let base = i * fs;
        let acc: f64 = rx[base..base + window]
            .iter()
            .zip(&template.gate)
            .map(|(r, q)| r * r.abs() * q)
            .sum();
        frame_stats.push(acc * dt);
    }

    let bit_stats = lowpass_integrate(&frame_stats, cfg.ns)?;
    let (decisions, discarded) = if differential {
        let m: Vec<i8> = bit_stats.iter().map(|&y| sign_of(y)).collect();
        let mut dec = Vec::with_capacity(n_bits);
        for j in 0..n_bits {
            let prev = if j == 0 { DEFAULT_M_INIT } else { m[j - 1] };
            dec.push(m[j] * prev);
        }
        (dec, 1)
    } else {
        (bit_stats.iter().map(|&y| sign_of(y)).collect(), 0)
    };

    Ok(DecisionTrace {
        frame_stats,
        bit_stats,
        decisions,
        discarded_prefix: discarded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply, discretize, draw_realization, ChannelParams, ChannelRealization};
    use crate::modem::{build_dtr_signal, build_sr_signal, build_tr_signal, BitBlock, FrameConfig};
    use crate::pulse::{gaussian_monocycle, PulseSpec};
    use crate::stream::RandomStream;

    fn pulse() -> SampledWaveform {
        gaussian_monocycle(&PulseSpec::default()).unwrap()
    }

    fn unit_channel() -> ChannelRealization {
        ChannelRealization::unit()
    }

    /// Builds a noiseless received burst over a static channel.
    fn received(
        bits: &BitBlock,
        cfg: &FrameConfig,
        ch: &ChannelRealization,
        span: f64,
    ) -> SampledWaveform {
        let p = pulse();
        let tx = match cfg.scheme.modulation() {
            crate::modem::Modulation::Antipodal => build_sr_signal(bits, cfg, &p).unwrap(),
            crate::modem::Modulation::Differential => build_dtr_signal(bits, cfg, &p).unwrap(),
            crate::modem::Modulation::TwoPulse => build_tr_signal(bits, cfg, &p).unwrap(),
        };
        let d = discretize(ch, p.dt(), span).unwrap();
        apply(&d, &tx, 1.0).unwrap()
    }

    fn sr_cfg(ns: usize) -> FrameConfig {
        FrameConfig { ns, ..FrameConfig::defaults_for(Scheme::Sr) }
    }

    #[test]
    fn arake_decodes_noiseless_single_tap() {
        let p = pulse();
        let mut cfg = FrameConfig { ns: 1, ..FrameConfig::defaults_for(Scheme::ARake) };
        cfg.t_int = cfg.tw;
        let bits = BitBlock::new(vec![1, -1]).unwrap();
        let ch = unit_channel();
        let rx = received(&bits, &cfg, &ch, 1.0);
        let trace = arake_demodulate(&rx, &[ch], bits.len(), &p, &cfg, bits.len()).unwrap();
        assert_eq!(trace.decisions, vec![1, -1]);
        // Matched filter on a unit-energy pulse: statistic equals +-1.
        assert!((trace.bit_stats[0] - 1.0).abs() < 1e-9);
        assert!((trace.bit_stats[1] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn arake_is_error_free_on_isi_free_multipath() {
        let p = pulse();
        let params = ChannelParams::cm1();
        let mut rng = RandomStream::from_seed(77);
        let ch = draw_realization(&params, &mut rng).unwrap();
        // Frame far longer than the channel span: no ISI.
        let cfg = FrameConfig {
            scheme: Scheme::ARake,
            tf: 256.0,
            td: DEFAULT_TD_TEST,
            ns: 1,
            tw: 0.7,
            t_int: 224.0,
        };
        let mut rng_bits = RandomStream::from_seed(78);
        let bits = BitBlock::random(100, &mut rng_bits).unwrap();
        let rx = received(&bits, &cfg, &ch, params.max_span);
        let trace = arake_demodulate(&rx, &[ch], bits.len(), &p, &cfg, bits.len()).unwrap();
        let errors = trace
            .decisions
            .iter()
            .zip(bits.bits())
            .filter(|(d, b)| d != b)
            .count();
        assert_eq!(errors, 0);
    }

    const DEFAULT_TD_TEST: f64 = 8.75;

    #[test]
    fn srake_with_all_taps_matches_arake() {
        let p = pulse();
        let params = ChannelParams::cm1();
        let mut rng = RandomStream::from_seed(5);
        let ch = draw_realization(&params, &mut rng).unwrap();
        let cfg = FrameConfig { ns: 1, ..FrameConfig::defaults_for(Scheme::SRake) };
        let mut rng_bits = RandomStream::from_seed(6);
        let bits = BitBlock::random(20, &mut rng_bits).unwrap();
        let rx = received(&bits, &cfg, &ch, params.max_span);

        let all = arake_demodulate(&rx, &[ch.clone()], bits.len(), &p, &cfg, bits.len()).unwrap();
        let lb = ch.taps.len();
        let sel = srake_demodulate(&rx, &[ch.clone()], bits.len(), lb, &p, &cfg, bits.len()).unwrap();
        assert_eq!(all.decisions, sel.decisions);

        // Single-tap channel: earliest-1 equals ARake.
        let single = unit_channel();
        let rx1 = received(&bits, &cfg, &single, 1.0);
        let a = arake_demodulate(&rx1, &[single.clone()], bits.len(), &p, &cfg, bits.len()).unwrap();
        let pr = prake_demodulate(&rx1, &[single], bits.len(), 1, &p, &cfg, bits.len()).unwrap();
        assert_eq!(a.decisions, pr.decisions);
    }

    #[test]
    fn rake_selection_energy_is_monotone() {
        let params = ChannelParams::cm1();
        let mut rng = RandomStream::from_seed(19);
        for _ in 0..10 {
            let ch = draw_realization(&params, &mut rng).unwrap();
            let counts = [1usize, 4, ch.taps.len()];
            let mut prev_s = -1.0;
            let mut prev_p = -1.0;
            for &l in &counts {
                let e_s = captured_energy(&ch, RakeSelection::Strongest(l)).unwrap();
                assert!(e_s >= prev_s - 1e-12);
                prev_s = e_s;

                let e_p = captured_energy(&ch, RakeSelection::Earliest(l)).unwrap();
                assert!(e_p >= prev_p - 1e-12);
                prev_p = e_p;
            }
            // Every finger counted: the full selection captures all the
            // (normalized) channel energy.
            assert!((prev_s - 1.0).abs() < 1e-9);
            assert!((prev_p - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rake_selection_range_is_validated() {
        let p = pulse();
        let ch = unit_channel();
        assert!(rake_templates(&[ch.clone()], RakeSelection::Strongest(2), &p, 0.7).is_err());
        assert!(rake_templates(&[ch.clone()], RakeSelection::Earliest(0), &p, 0.7).is_err());
        assert!(rake_templates(&[ch], RakeSelection::Strongest(1), &p, 0.7).is_ok());
    }

    #[test]
    fn dtr_decodes_noiseless_single_tap_pairs() {
        let cfg = FrameConfig { ns: 1, ..FrameConfig::defaults_for(Scheme::Dtr) };
        let ch = unit_channel();

        // bits (+1, +1): consecutive pulses identical, y_1 = +energy.
        let bits = BitBlock::new(vec![1, 1]).unwrap();
        let rx = received(&bits, &cfg, &ch, 1.0);
        let trace = dtr_demodulate(&rx, &cfg, cfg.tf, bits.len()).unwrap();
        assert!((trace.frame_stats[1] - 1.0).abs() < 1e-9);
        assert_eq!(trace.decisions[1], 1);
        assert_eq!(trace.discarded_prefix, 1);

        // bits (+1, -1): antipodal pair, y_1 = -energy.
        let bits = BitBlock::new(vec![1, -1]).unwrap();
        let rx = received(&bits, &cfg, &ch, 1.0);
        let trace = dtr_demodulate(&rx, &cfg, cfg.tf, bits.len()).unwrap();
        assert!((trace.frame_stats[1] + 1.0).abs() < 1e-9);
        assert_eq!(trace.decisions[1], -1);
    }

    #[test]
    fn dtr_is_error_free_on_isi_free_multipath() {
        let params = ChannelParams::cm1();
        let mut rng = RandomStream::from_seed(101);
        let ch = draw_realization(&params, &mut rng).unwrap();
        let cfg = FrameConfig {
            scheme: Scheme::Dtr,
            tf: 256.0,
            td: 8.75,
            ns: 1,
            tw: 0.7,
            t_int: 224.0,
        };
        let mut rng_bits = RandomStream::from_seed(102);
        let bits = BitBlock::random(100, &mut rng_bits).unwrap();
        let rx = received(&bits, &cfg, &ch, params.max_span);
        let trace = dtr_demodulate(&rx, &cfg, cfg.tf, bits.len()).unwrap();
        let errors = trace
            .decisions
            .iter()
            .zip(bits.bits())
            .enumerate()
            .skip(trace.discarded_prefix)
            .filter(|(_, (d, b))| d != b)
            .count();
        assert_eq!(errors, 0);
    }

    #[test]
    fn dtr_rejects_off_grid_or_out_of_range_delay() {
        let cfg = FrameConfig { ns: 1, ..FrameConfig::defaults_for(Scheme::Dtr) };
        let bits = BitBlock::new(vec![1, 1]).unwrap();
        let rx = received(&bits, &cfg, &unit_channel(), 1.0);
        assert!(dtr_demodulate(&rx, &cfg, 0.0107, bits.len()).is_err());
        assert!(dtr_demodulate(&rx, &cfg, cfg.tf + 1.0, bits.len()).is_err());
    }

    #[test]
    fn tr_statistic_follows_the_bit() {
        let cfg = FrameConfig {
            ns: 1,
            t_int: 0.7,
            ..FrameConfig::defaults_for(Scheme::Tr)
        };
        for b in [1i8, -1] {
            let bits = BitBlock::new(vec![b]).unwrap();
            let rx = received(&bits, &cfg, &unit_channel(), 1.0);
            let trace = tr_demodulate(&rx, &cfg, bits.len()).unwrap();
            assert_eq!(trace.decisions[0], b);
            assert!(trace.bit_stats[0] * b as f64 > 0.0);
        }
    }

    #[test]
    fn sr_reference_is_rectified_and_sign_invariant() {
        let p = pulse();
        let cfg = sr_cfg(1);
        let template = SrTemplate::new(&p, cfg.tw, cfg.t_int).unwrap();
        let window = cfg.window_samples(p.dt());

        let plus = received(&BitBlock::new(vec![1]).unwrap(), &cfg, &unit_channel(), 1.0);
        let minus = received(&BitBlock::new(vec![-1]).unwrap(), &cfg, &unit_channel(), 1.0);
        let seg_plus = &plus.samples()[..window];
        let seg_minus = &minus.samples()[..window];

        let ref_plus = template.reference(seg_plus);
        let ref_minus = template.reference(seg_minus);
        // The reference ignores the data sign entirely.
        for (a, b) in ref_plus.iter().zip(&ref_minus) {
            assert_eq!(a, b);
        }
        // And matches |r| * q sample by sample.
        for (k, r) in seg_minus.iter().enumerate() {
            assert_eq!(ref_minus[k], r.abs() * template.gate()[k]);
        }
        // Where the gate is flat (past Tw) the reference is non-negative.
        let tw_samples = (cfg.tw / p.dt()).round() as usize;
        assert!(ref_minus[tw_samples..].iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn sr_statistics_flip_sign_with_the_bit() {
        let p = pulse();
        let cfg = sr_cfg(1);
        let template = SrTemplate::new(&p, cfg.tw, cfg.t_int).unwrap();
        let plus = received(&BitBlock::new(vec![1]).unwrap(), &cfg, &unit_channel(), 1.0);
        let minus = received(&BitBlock::new(vec![-1]).unwrap(), &cfg, &unit_channel(), 1.0);
        let y_plus = sr_demodulate(&plus, &cfg, &template, 1, false).unwrap().bit_stats[0];
        let y_minus = sr_demodulate(&minus, &cfg, &template, 1, false).unwrap().bit_stats[0];
        assert!(y_plus > 0.0);
        assert!((y_plus + y_minus).abs() < 1e-12);
    }

    #[test]
    fn sr_beats_the_inverted_decision_rule_under_isi() {
        let params = ChannelParams::cm1();
        let mut rng = RandomStream::from_seed(301);
        let ch = draw_realization(&params, &mut rng).unwrap();
        let p = pulse();
        let cfg = sr_cfg(1);
        let template = SrTemplate::new(&p, cfg.tw, cfg.t_int).unwrap();
        let mut rng_bits = RandomStream::from_seed(302);
        let bits = BitBlock::random(100, &mut rng_bits).unwrap();
        let rx = received(&bits, &cfg, &ch, params.max_span);
        let trace = sr_demodulate(&rx, &cfg, &template, bits.len(), false).unwrap();
        let errors = trace
            .decisions
            .iter()
            .zip(bits.bits())
            .filter(|(d, b)| d != b)
            .count();
        let flipped = bits.len() - errors;
        assert!(
            errors < flipped,
            "errors {errors} not below inverted rule {flipped}"
        );
    }

    #[test]
    fn negating_the_waveform_negates_antipodal_statistics() {
        let p = pulse();
        let params = ChannelParams::cm1();
        let mut rng = RandomStream::from_seed(401);
        let mut noise = RandomStream::from_seed(402);
        for trial in 0..100 {
            let ch = draw_realization(&params, &mut rng).unwrap();
            let mut bits_rng = RandomStream::from_seed(500 + trial);
            let bits = BitBlock::random(4, &mut bits_rng).unwrap();

            let sr = sr_cfg(1);
            let mut rx = received(&bits, &sr, &ch, params.max_span);
            for s in rx.samples_mut() {
                *s += 0.05 * noise.normal();
            }
            let template = SrTemplate::new(&p, sr.tw, sr.t_int).unwrap();
            let y = sr_demodulate(&rx, &sr, &template, bits.len(), false).unwrap();
            let y_neg = sr_demodulate(&rx.scaled(-1.0), &sr, &template, bits.len(), false).unwrap();
            for (a, b) in y.frame_stats.iter().zip(&y_neg.frame_stats) {
                assert!((a + b).abs() < 1e-12);
            }

            let rake_cfg = FrameConfig { ns: 1, ..FrameConfig::defaults_for(Scheme::ARake) };
            let rxr = {
                let mut w = received(&bits, &rake_cfg, &ch, params.max_span);
                for s in w.samples_mut() {
                    *s += 0.05 * noise.normal();
                }
                w
            };
            let t = arake_demodulate(&rxr, &[ch.clone()], bits.len(), &p, &rake_cfg, bits.len()).unwrap();
            let t_neg =
                arake_demodulate(&rxr.scaled(-1.0), &[ch.clone()], bits.len(), &p, &rake_cfg, bits.len())
                    .unwrap();
            for (a, b) in t.frame_stats.iter().zip(&t_neg.frame_stats) {
                assert!((a + b).abs() < 1e-12);
            }

            // The differential product statistic is sign-invariant instead.
            let dtr = FrameConfig { ns: 1, ..FrameConfig::defaults_for(Scheme::Dtr) };
            let rxd = {
                let mut w = received(&bits, &dtr, &ch, params.max_span);
                for s in w.samples_mut() {
                    *s += 0.05 * noise.normal();
                }
                w
            };
            let d = dtr_demodulate(&rxd, &dtr, dtr.tf, bits.len()).unwrap();
            let d_neg = dtr_demodulate(&rxd.scaled(-1.0), &dtr, dtr.tf, bits.len()).unwrap();
            for (a, b) in d.frame_stats.iter().zip(&d_neg.frame_stats) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sr_errors_stay_local_and_dtr_spreads_to_two_bits() {
        let params = ChannelParams::cm1();
        let mut rng = RandomStream::from_seed(601);
        let ch = draw_realization(&params, &mut rng).unwrap();
        let p = pulse();
        let mut bits_rng = RandomStream::from_seed(602);
        let bits = BitBlock::random(24, &mut bits_rng).unwrap();

        // Self-reference: flipping one frame's samples can only change the
        // bit owning that frame.
        let sr = sr_cfg(2);
        let template = SrTemplate::new(&p, sr.tw, sr.t_int).unwrap();
        let rx = received(&bits, &sr, &ch, params.max_span);
        let baseline = sr_demodulate(&rx, &sr, &template, bits.len(), false).unwrap();
        let fs = sr.frame_samples(p.dt());
        for &frame in &[3usize, 10, 17] {
            let mut perturbed = rx.clone();
            for s in &mut perturbed.samples_mut()[frame * fs..(frame + 1) * fs] {
                *s = -*s;
            }
            let t = sr_demodulate(&perturbed, &sr, &template, bits.len(), false).unwrap();
            let changed: Vec<usize> = t
                .decisions
                .iter()
                .zip(&baseline.decisions)
                .enumerate()
                .filter(|(_, (a, b))| a != b)
                .map(|(j, _)| j)
                .collect();
            assert!(
                changed.iter().all(|&j| j == frame / sr.ns),
                "sr perturbation of frame {frame} changed bits {changed:?}"
            );
        }

        // Differential TR: the same perturbation may touch at most the owner
        // bit and its successor (the frame serves as the next reference).
        let dtr = FrameConfig { ns: 2, ..FrameConfig::defaults_for(Scheme::Dtr) };
        let rx = received(&bits, &dtr, &ch, params.max_span);
        let baseline = dtr_demodulate(&rx, &dtr, dtr.tf, bits.len()).unwrap();
        let fs = dtr.frame_samples(p.dt());
        for &frame in &[4usize, 9, 15] {
            let mut perturbed = rx.clone();
            for s in &mut perturbed.samples_mut()[frame * fs..(frame + 1) * fs] {
                *s = -*s;
            }
            let t = dtr_demodulate(&perturbed, &dtr, dtr.tf, bits.len()).unwrap();
            let owner = frame / dtr.ns;
            let next = (frame + 1) / dtr.ns;
            let changed: Vec<usize> = t
                .decisions
                .iter()
                .zip(&baseline.decisions)
                .enumerate()
                .filter(|(_, (a, b))| a != b)
                .map(|(j, _)| j)
                .collect();
            assert!(
                changed.iter().all(|&j| j == owner || j == next),
                "dtr perturbation of frame {frame} changed bits {changed:?}"
            );
        }
    }

    #[test]
    fn lowpass_integrate_means_frames() {
        assert_eq!(lowpass_integrate(&[1.0, 3.0], 2).unwrap(), vec![2.0]);
        assert_eq!(
            lowpass_integrate(&[1.0, 2.0, 3.0], 1).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
        let mut rng = RandomStream::from_seed(9);
        let vals: Vec<f64> = (0..32).map(|_| rng.normal()).collect();
        let out = lowpass_integrate(&vals, 4).unwrap();
        for (j, o) in out.iter().enumerate() {
            let mean = vals[4 * j..4 * (j + 1)].iter().sum::<f64>() / 4.0;
            assert!((o - mean).abs() < 1e-12);
        }
        assert!(lowpass_integrate(&[1.0, 2.0, 3.0], 2).is_err());
    }

    #[test]
    fn sr_gate_shape() {
        let p = pulse();
        let template = SrTemplate::new(&p, 0.7, 5.375).unwrap();
        let tw_samples = (0.7 / p.dt()).round() as usize;
        assert_eq!(template.gate().len(), (5.375 / p.dt()).round() as usize);
        for k in 0..tw_samples {
            assert_eq!(template.gate()[k], p.samples()[k]);
        }
        assert!(template.gate()[tw_samples..].iter().all(|&q| q == 1.0));
    }

    #[test]
    fn sr_rejects_mismatched_gate() {
        let p = pulse();
        let cfg = sr_cfg(1);
        let bits = BitBlock::new(vec![1]).unwrap();
        let rx = received(&bits, &cfg, &unit_channel(), 1.0);
        let wrong = SrTemplate::new(&p, cfg.tw, cfg.t_int - 0.025).unwrap();
        assert!(sr_demodulate(&rx, &cfg, &wrong, 1, false).is_err());
    }
}
