//! Command-line front end: SNR sweeps with CSV/SVG output, channel-statistics
//! reports, and single-burst waveform dumps.

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{
    build_run, parse_channel, parse_config_file, parse_polarity, parse_scheme, ResolvedRun,
    SweepOverrides,
};
use uwbsim_core::channel::{draw_realization, stats, Polarity};
use uwbsim_core::engine::{run_sweep, simulate_burst, BerPoint, ChannelSpec, LinkConfig, RandomStream};
use uwbsim_core::modem::BitBlock;
use uwbsim_core::report;

#[derive(Parser)]
#[command(
    name = "uwbsim",
    version,
    about = "Impulse-radio UWB link-level Monte-Carlo simulator",
    args_conflicts_with_subcommands = true
)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// Default subcommand: sweep.
    #[command(flatten)]
    sweep: SweepArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Run a BER-vs-SNR sweep and write CSV, SVG and a manifest (default).
    Sweep(SweepArgs),
    /// Print ensemble delay-spread statistics for a channel preset.
    Chanstats(ChanstatsArgs),
    /// Write one burst's tx/rx waveforms and decision trace as text.
    DumpWaveform(DumpArgs),
}

#[derive(Args, Default)]
struct SweepArgs {
    /// Flat key=value config file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Receiver scheme: arake|srake|prake|tr|dtr|sr.
    #[arg(long)]
    scheme: Option<String>,
    /// Channel: awgn|cm1|cm2|cm3|cm4|file:<path>.
    #[arg(long)]
    channel: Option<String>,
    /// SNR grid in dB: start:step:stop or comma list.
    #[arg(long)]
    snr: Option<String>,
    /// Trial budget per SNR point.
    #[arg(long)]
    bits: Option<u64>,
    /// Stop a point once this many errors accumulated.
    #[arg(long = "min-errors")]
    min_errors: Option<u64>,
    /// Pulses per bit.
    #[arg(long)]
    ns: Option<usize>,
    /// Sample interval in ns.
    #[arg(long)]
    dt: Option<f64>,
    /// Integration window in ns (defaults per scheme/channel).
    #[arg(long)]
    tint: Option<f64>,
    /// Experiment seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Channel redraw policy: per-symbol|per-2-symbols|static.
    #[arg(long)]
    coherence: Option<String>,
    /// Differential post-decoding stage of the SR receiver: on|off.
    #[arg(long = "sr-diff")]
    sr_diff: Option<String>,
    /// DTR reference delay: tf (one frame) or td.
    #[arg(long = "dtr-delay")]
    dtr_delay: Option<String>,
    /// Fingers for the selective Rake.
    #[arg(long)]
    lb: Option<usize>,
    /// Fingers for the partial Rake.
    #[arg(long)]
    lp: Option<usize>,
    /// Apply lognormal shadowing to the received waveform: on|off.
    #[arg(long)]
    shadowing: Option<String>,
    /// Tap polarity of generated channels: positive|random.
    #[arg(long)]
    polarity: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ChanstatsArgs {
    /// Channel preset: cm1|cm2|cm3|cm4 (or awgn).
    #[arg(long)]
    channel: String,
    /// Number of realizations.
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Tap polarity: positive|random.
    #[arg(long, default_value = "positive")]
    polarity: String,
}

#[derive(Args)]
struct DumpArgs {
    /// Receiver scheme: arake|srake|prake|tr|dtr|sr.
    #[arg(long)]
    scheme: String,
    /// Comma-separated bits, e.g. +1,-1,-1.
    #[arg(long)]
    bits: String,
    /// Channel: awgn|cm1|cm2|cm3|cm4|file:<path>.
    #[arg(long, default_value = "awgn")]
    channel: String,
    /// Eb/N0 in dB; omit for a noiseless burst.
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pulses per bit.
    #[arg(long)]
    ns: Option<usize>,
    /// Integration window in ns.
    #[arg(long)]
    tint: Option<f64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Some(Command::Sweep(args)) => cmd_sweep(args),
        Some(Command::Chanstats(args)) => cmd_chanstats(args),
        Some(Command::DumpWaveform(args)) => cmd_dump(args),
        None => cmd_sweep(cli.sweep),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn overrides_from(args: &SweepArgs) -> SweepOverrides {
    SweepOverrides {
        scheme: args.scheme.clone(),
        channel: args.channel.clone(),
        snr: args.snr.clone(),
        bits: args.bits,
        min_errors: args.min_errors,
        ns: args.ns,
        dt: args.dt,
        tint: args.tint,
        seed: args.seed,
        coherence: args.coherence.clone(),
        sr_diff: args.sr_diff.clone(),
        dtr_delay: args.dtr_delay.clone(),
        lb: args.lb,
        lp: args.lp,
        shadowing: args.shadowing.clone(),
        polarity: args.polarity.clone(),
        out: args.out.as_ref().map(|p| p.display().to_string()),
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let file_map = match &args.config {
        Some(path) => parse_config_file(path)?,
        None => Default::default(),
    };
    let run = build_run(&file_map, &overrides_from(&args))?;

    let points = run_sweep(&run.link).map_err(|e| anyhow!("{e}"))?;
    for p in &points {
        println!(
            "snr={:>6.2} dB  ber={:.3e}  ci95=[{:.3e}, {:.3e}]  errors={} trials={}{}",
            p.snr_db,
            p.ber,
            p.ci_low,
            p.ci_high,
            p.errors,
            p.trials,
            if p.censored { "  (censored: upper bound)" } else { "" }
        );
    }

    write_outputs(&run, &points)?;
    Ok(())
}

fn write_outputs(run: &ResolvedRun, points: &[BerPoint]) -> Result<()> {
    let dir = Path::new(&run.out_dir);
    fs::create_dir_all(dir).with_context(|| format!("cannot create output dir {}", dir.display()))?;

    let csv_path = dir.join("results.csv");
    fs::write(&csv_path, report::format_csv(points))
        .with_context(|| format!("cannot write {}", csv_path.display()))?;

    let title = format!(
        "{} over {}",
        run.keys["scheme"],
        run.keys["channel"]
    );
    let svg_path = dir.join("ber_curve.svg");
    fs::write(&svg_path, report::render_svg(points, &title))
        .with_context(|| format!("cannot write {}", svg_path.display()))?;

    let manifest_path = dir.join("manifest.txt");
    fs::write(&manifest_path, render_manifest(run))
        .with_context(|| format!("cannot write {}", manifest_path.display()))?;

    println!(
        "wrote {}, {}, {}",
        csv_path.display(),
        svg_path.display(),
        manifest_path.display()
    );
    Ok(())
}

/// The manifest is a valid config file (comments plus key=value lines), so a
/// run can be reproduced with `uwbsim sweep --config <manifest>`.
fn render_manifest(run: &ResolvedRun) -> String {
    let mut out = String::new();
    out.push_str("# uwbsim run manifest\n");
    out.push_str(&format!("# version: {}\n", env!("CARGO_PKG_VERSION")));
    out.push_str(&format!("# created: {}\n", chrono::Utc::now().to_rfc3339()));
    out.push_str("# outputs: results.csv ber_curve.svg\n");
    let frame = uwbsim_core::modem::FrameConfig::defaults_for(run.link.scheme);
    out.push_str(&format!("# tf = {}\n", frame.tf));
    out.push_str(&format!("# td = {}\n", frame.td));
    out.push_str(&format!("# tw = {}\n", frame.tw));
    out.push_str("# rerun: uwbsim sweep --config <this file> [--out <new dir>]\n");
    for (key, value) in &run.keys {
        out.push_str(&format!("{key} = {value}\n"));
    }
    out
}

fn cmd_chanstats(args: ChanstatsArgs) -> Result<()> {
    if args.n == 0 {
        bail!("n: must draw at least one realization");
    }
    let polarity = parse_polarity(&args.polarity)?;
    let spec = parse_channel(&args.channel, polarity)?;
    let root = RandomStream::from_seed(args.seed);

    let realizations: Vec<_> = match &spec {
        ChannelSpec::Awgn => vec![uwbsim_core::channel::ChannelRealization::unit(); args.n],
        ChannelSpec::Fixed(ch) => vec![ch.clone(); args.n],
        ChannelSpec::Preset { params, .. } => {
            let mut out = Vec::with_capacity(args.n);
            for i in 0..args.n {
                let mut rng = root.split(i as u64);
                out.push(draw_realization(params, &mut rng).map_err(|e| anyhow!("{e}"))?);
            }
            out
        }
    };

    let s = stats(&realizations).map_err(|e| anyhow!("{e}"))?;
    println!("{}", report::format_chanstats(&args.channel, args.n, args.seed, &s));
    Ok(())
}

fn parse_bits(spec: &str) -> Result<BitBlock> {
    let bits: Result<Vec<i8>> = spec
        .split(',')
        .map(|tok| match tok.trim() {
            "+1" | "1" => Ok(1i8),
            "-1" => Ok(-1i8),
            other => bail!("bits: expected +1 or -1, got `{other}`"),
        })
        .collect();
    BitBlock::new(bits?).map_err(|e| anyhow!("{e}"))
}

fn cmd_dump(args: DumpArgs) -> Result<()> {
    let scheme = parse_scheme(&args.scheme)?;
    let channel = parse_channel(&args.channel, Polarity::Positive)?;
    let bits = parse_bits(&args.bits)?;

    let mut link = LinkConfig::new(scheme, channel);
    link.snr_grid_db = vec![args.snr.unwrap_or(10.0)];
    if let Some(ns) = args.ns {
        link.ns = ns;
    }
    link.t_int = args.tint.or(link.t_int);

    let stream = RandomStream::from_seed(args.seed);
    let sim = simulate_burst(&link, &bits, args.snr, &stream).map_err(|e| anyhow!("{e}"))?;

    let mut text = String::new();
    text.push_str("# uwbsim waveform dump\n");
    text.push_str(&format!(
        "# scheme={} channel={} bits={} snr={} seed={} ns={}\n",
        args.scheme,
        args.channel,
        args.bits,
        args.snr.map_or("none".into(), |s| s.to_string()),
        args.seed,
        link.ns
    ));
    text.push_str(&format!(
        "# frames: {}  eb: {:.6}\n",
        bits.len() * link.ns,
        sim.eb
    ));
    text.push_str("# t_ns tx rx\n");
    let n = sim.tx.len().max(sim.rx.len());
    for k in 0..n {
        let t = k as f64 * sim.rx.dt();
        let tx = sim.tx.samples().get(k).copied().unwrap_or(0.0);
        let rx = sim.rx.samples().get(k).copied().unwrap_or(0.0);
        text.push_str(&format!("{t:.6} {tx:.9e} {rx:.9e}\n"));
    }
    text.push_str(&format!(
        "# frame_stats: {}\n",
        join_floats(&sim.trace.frame_stats)
    ));
    text.push_str(&format!("# bit_stats: {}\n", join_floats(&sim.trace.bit_stats)));
    text.push_str(&format!(
        "# decisions: {}\n",
        sim.trace
            .decisions
            .iter()
            .map(|d| format!("{d:+}"))
            .collect::<Vec<_>>()
            .join(",")
    ));
    text.push_str(&format!("# discarded_prefix: {}\n", sim.trace.discarded_prefix));

    match &args.out {
        Some(path) => {
            let mut f = fs::File::create(path)
                .with_context(|| format!("cannot write {}", path.display()))?;
            f.write_all(text.as_bytes())?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn join_floats(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.6e}"))
        .collect::<Vec<_>>()
        .join(",")
}
