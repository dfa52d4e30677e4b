//! Configuration assembly: flat key=value config files, flag overrides, SNR
//! grid parsing, and the run manifest (which is itself a valid config file).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use uwbsim_core::channel::{read_realization, ChannelParams, Polarity};
use uwbsim_core::engine::{ChannelSpec, CoherencePolicy, DtrDelay, LinkConfig};
use uwbsim_core::modem::Scheme;

/// Keys accepted in config files (the long CLI flag names).
pub const KNOWN_KEYS: &[&str] = &[
    "scheme",
    "channel",
    "snr",
    "bits",
    "min-errors",
    "ns",
    "dt",
    "tint",
    "seed",
    "coherence",
    "sr-diff",
    "dtr-delay",
    "lb",
    "lp",
    "shadowing",
    "polarity",
    "out",
];

/// Parses a flat `key = value` config file. `#` starts a comment; unknown
/// keys are rejected by name.
pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{}:{}: expected `key = value`", path.display(), lineno + 1))?;
        let key = key.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            bail!("{}:{}: unknown config key `{key}`", path.display(), lineno + 1);
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

/// Parses an SNR grid: either `start:step:stop` or a comma-separated list.
pub fn parse_snr(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            bail!("snr range must be start:step:stop, got `{spec}`");
        }
        let start: f64 = parts[0].parse().map_err(|_| anyhow!("snr: invalid start `{}`", parts[0]))?;
        let step: f64 = parts[1].parse().map_err(|_| anyhow!("snr: invalid step `{}`", parts[1]))?;
        let stop: f64 = parts[2].parse().map_err(|_| anyhow!("snr: invalid stop `{}`", parts[2]))?;
        if !step.is_finite() || step <= 0.0 {
            bail!("snr: step must be positive, got {step}");
        }
        if stop < start {
            bail!("snr: stop {stop} is below start {start}");
        }
        let n = ((stop - start) / step).round() as usize;
        let mut grid: Vec<f64> = (0..=n).map(|i| start + step * i as f64).collect();
        if let Some(last) = grid.last_mut() {
            if (*last - stop).abs() < 1e-9 {
                *last = stop;
            }
        }
        grid.retain(|&v| v <= stop + 1e-9);
        Ok(grid)
    } else {
        spec.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| anyhow!("snr: invalid value `{s}`"))
            })
            .collect()
    }
}

pub fn parse_on_off(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" => Ok(true),
        "off" => Ok(false),
        _ => bail!("{key}: expected on|off, got `{value}`"),
    }
}

pub fn parse_channel(value: &str, polarity: Polarity) -> Result<ChannelSpec> {
    if let Some(path) = value.strip_prefix("file:") {
        let file = fs::File::open(path).with_context(|| format!("channel: cannot open {path}"))?;
        let mut reader = std::io::BufReader::new(file);
        let ch = read_realization(&mut reader).map_err(|e| anyhow!("channel: {e}"))?;
        return Ok(ChannelSpec::Fixed(ch));
    }
    if value == "awgn" {
        return Ok(ChannelSpec::Awgn);
    }
    let mut params = ChannelParams::by_name(value)
        .ok_or_else(|| anyhow!("channel: expected awgn|cm1|cm2|cm3|cm4|file:<path>, got `{value}`"))?;
    params.polarity = polarity;
    Ok(ChannelSpec::Preset {
        name: value.to_string(),
        params,
    })
}

pub fn parse_polarity(value: &str) -> Result<Polarity> {
    match value {
        "positive" => Ok(Polarity::Positive),
        "random" => Ok(Polarity::Random),
        _ => bail!("polarity: expected positive|random, got `{value}`"),
    }
}

pub fn parse_scheme(value: &str) -> Result<Scheme> {
    Scheme::by_name(value)
        .ok_or_else(|| anyhow!("scheme: expected arake|srake|prake|tr|dtr|sr, got `{value}`"))
}

pub fn parse_coherence(value: &str) -> Result<CoherencePolicy> {
    CoherencePolicy::by_name(value)
        .ok_or_else(|| anyhow!("coherence: expected per-symbol|per-2-symbols|static, got `{value}`"))
}

pub fn parse_dtr_delay(value: &str) -> Result<DtrDelay> {
    match value {
        "tf" => Ok(DtrDelay::FrameTime),
        "td" => Ok(DtrDelay::Td),
        _ => bail!("dtr-delay: expected tf|td, got `{value}`"),
    }
}

/// Flag values from the command line; `None` means "not given".
#[derive(Debug, Default, Clone)]
pub struct SweepOverrides {
    pub scheme: Option<String>,
    pub channel: Option<String>,
    pub snr: Option<String>,
    pub bits: Option<u64>,
    pub min_errors: Option<u64>,
    pub ns: Option<usize>,
    pub dt: Option<f64>,
    pub tint: Option<f64>,
    pub seed: Option<u64>,
    pub coherence: Option<String>,
    pub sr_diff: Option<String>,
    pub dtr_delay: Option<String>,
    pub lb: Option<usize>,
    pub lp: Option<usize>,
    pub shadowing: Option<String>,
    pub polarity: Option<String>,
    pub out: Option<String>,
}

/// Resolved sweep setup: the link configuration plus output location and the
/// raw key=value view used for the manifest.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub link: LinkConfig,
    pub out_dir: String,
    pub keys: BTreeMap<String, String>,
}

/// Merges config-file values and flag overrides (flags win) into a validated
/// [`LinkConfig`].
pub fn build_run(file: &BTreeMap<String, String>, flags: &SweepOverrides) -> Result<ResolvedRun> {
    let pick = |flag: &Option<String>, key: &str| -> Option<String> {
        flag.clone().or_else(|| file.get(key).cloned())
    };
    let pick_parsed = |flag: Option<String>, key: &'static str| -> Result<Option<String>> {
        Ok(flag.or_else(|| file.get(key).cloned()))
    };

    let scheme_str = pick(&flags.scheme, "scheme").ok_or_else(|| anyhow!("scheme: missing (no flag and no config entry)"))?;
    let scheme = parse_scheme(&scheme_str)?;

    let polarity_str = pick(&flags.polarity, "polarity").unwrap_or_else(|| "positive".into());
    let polarity = parse_polarity(&polarity_str)?;

    let channel_str = pick(&flags.channel, "channel").ok_or_else(|| anyhow!("channel: missing (no flag and no config entry)"))?;
    let channel = parse_channel(&channel_str, polarity)?;

    let snr_str = pick(&flags.snr, "snr").ok_or_else(|| anyhow!("snr: missing (no flag and no config entry)"))?;
    let snr_grid = parse_snr(&snr_str)?;

    let mut link = LinkConfig::new(scheme, channel);
    link.snr_grid_db = snr_grid;

    let parse_num = |s: &str, key: &str| -> Result<f64> {
        s.parse::<f64>().map_err(|_| anyhow!("{key}: invalid number `{s}`"))
    };

    if let Some(v) = flags.bits.map(|v| v.to_string()).or_else(|| file.get("bits").cloned()) {
        link.max_bits = v.parse().map_err(|_| anyhow!("bits: invalid count `{v}`"))?;
    }
    if let Some(v) = flags
        .min_errors
        .map(|v| v.to_string())
        .or_else(|| file.get("min-errors").cloned())
    {
        link.min_errors = v.parse().map_err(|_| anyhow!("min-errors: invalid count `{v}`"))?;
    }
    if let Some(v) = flags.ns.map(|v| v.to_string()).or_else(|| file.get("ns").cloned()) {
        link.ns = v.parse().map_err(|_| anyhow!("ns: invalid count `{v}`"))?;
        if link.ns == 0 {
            bail!("ns: must be at least 1");
        }
    }
    if let Some(v) = flags.dt.map(|v| v.to_string()).or_else(|| file.get("dt").cloned()) {
        link.dt = parse_num(&v, "dt")?;
        if link.dt <= 0.0 {
            bail!("dt: must be positive");
        }
    }
    if let Some(v) = flags.tint.map(|v| v.to_string()).or_else(|| file.get("tint").cloned()) {
        link.t_int = Some(parse_num(&v, "tint")?);
    }
    if let Some(v) = flags.seed.map(|v| v.to_string()).or_else(|| file.get("seed").cloned()) {
        link.seed = v.parse().map_err(|_| anyhow!("seed: invalid u64 `{v}`"))?;
    }
    if let Some(v) = pick_parsed(flags.coherence.clone(), "coherence")? {
        link.coherence = Some(parse_coherence(&v)?);
    }
    if let Some(v) = pick_parsed(flags.sr_diff.clone(), "sr-diff")? {
        link.sr_differential = parse_on_off("sr-diff", &v)?;
    }
    if let Some(v) = pick_parsed(flags.dtr_delay.clone(), "dtr-delay")? {
        link.dtr_delay = parse_dtr_delay(&v)?;
    }
    if let Some(v) = flags.lb.map(|v| v.to_string()).or_else(|| file.get("lb").cloned()) {
        link.lb = v.parse().map_err(|_| anyhow!("lb: invalid count `{v}`"))?;
    }
    if let Some(v) = flags.lp.map(|v| v.to_string()).or_else(|| file.get("lp").cloned()) {
        link.lp = v.parse().map_err(|_| anyhow!("lp: invalid count `{v}`"))?;
    }
    if let Some(v) = pick_parsed(flags.shadowing.clone(), "shadowing")? {
        link.apply_shadowing = parse_on_off("shadowing", &v)?;
    }

    link.validate().map_err(|e| anyhow!("{e}"))?;

    let out_dir = pick(&flags.out, "out").unwrap_or_else(|| "out".into());

    // Fully resolved key view for the manifest: every knob explicit.
    let mut keys = BTreeMap::new();
    keys.insert("scheme".into(), scheme.name().to_string());
    keys.insert("channel".into(), channel_str.clone());
    keys.insert(
        "snr".into(),
        link.snr_grid_db
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(","),
    );
    keys.insert("bits".into(), link.max_bits.to_string());
    keys.insert("min-errors".into(), link.min_errors.to_string());
    keys.insert("ns".into(), link.ns.to_string());
    keys.insert("dt".into(), format!("{}", link.dt));
    if let Some(t) = link.t_int {
        keys.insert("tint".into(), format!("{t}"));
    }
    keys.insert("seed".into(), link.seed.to_string());
    keys.insert("coherence".into(), link.effective_coherence().name());
    keys.insert("sr-diff".into(), if link.sr_differential { "on" } else { "off" }.into());
    keys.insert(
        "dtr-delay".into(),
        match link.dtr_delay {
            DtrDelay::FrameTime => "tf",
            DtrDelay::Td => "td",
        }
        .into(),
    );
    keys.insert("lb".into(), link.lb.to_string());
    keys.insert("lp".into(), link.lp.to_string());
    keys.insert("shadowing".into(), if link.apply_shadowing { "on" } else { "off" }.into());
    keys.insert("polarity".into(), polarity_str);
    keys.insert("out".into(), out_dir.clone());

    Ok(ResolvedRun { link, out_dir, keys })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_range_arithmetic() {
        let grid = parse_snr("0:2:20").unwrap();
        assert_eq!(grid.len(), 11);
        assert_eq!(grid[0], 0.0);
        assert_eq!(grid[10], 20.0);

        let single = parse_snr("10:2:10").unwrap();
        assert_eq!(single, vec![10.0]);

        let list = parse_snr("1,3.5,9").unwrap();
        assert_eq!(list, vec![1.0, 3.5, 9.0]);
    }

    #[test]
    fn snr_rejects_bad_ranges() {
        assert!(parse_snr("10:-2:0").is_err());
        assert!(parse_snr("10:0:12").is_err());
        assert!(parse_snr("12:2:10").is_err());
        assert!(parse_snr("a:2:10").is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let mut file = BTreeMap::new();
        file.insert("scheme".to_string(), "dtr".to_string());
        file.insert("channel".to_string(), "awgn".to_string());
        file.insert("snr".to_string(), "0:2:4".to_string());
        file.insert("seed".to_string(), "5".to_string());

        let flags = SweepOverrides {
            seed: Some(9),
            ..Default::default()
        };
        let run = build_run(&file, &flags).unwrap();
        assert_eq!(run.link.seed, 9);
        assert_eq!(run.link.scheme, Scheme::Dtr);
        assert_eq!(run.link.snr_grid_db.len(), 3);
    }

    #[test]
    fn defaults_resolve_for_dtr() {
        let mut file = BTreeMap::new();
        file.insert("scheme".into(), "dtr".into());
        file.insert("channel".into(), "cm1".into());
        file.insert("snr".into(), "8:2:10".into());
        let run = build_run(&file, &SweepOverrides::default()).unwrap();
        assert_eq!(run.keys["dtr-delay"], "tf");
        assert_eq!(run.keys["polarity"], "positive");
        assert_eq!(run.keys["shadowing"], "off");
    }
}
