//! Result serialization: the stable CSV schema, a minimal self-contained SVG
//! curve plot, and the run manifest / channel-statistics text formats.
//!
//! The CSV schema is fixed: header
//! `snr_db,errors,trials,ber,ci_low,ci_high,censored`, one row per point,
//! floats printed with 10 significant digits. Reruns of the same manifest
//! produce byte-identical files.

use crate::channel::ChannelStats;
use crate::engine::BerPoint;

fn fmt10(x: f64) -> String {
    format!("{x:.9e}")
}

/// Renders the result table in the stable CSV schema.
pub fn format_csv(points: &[BerPoint]) -> String {
    let mut out = String::from("snr_db,errors,trials,ber,ci_low,ci_high,censored\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt10(p.snr_db),
            p.errors,
            p.trials,
            fmt10(p.ber),
            fmt10(p.ci_low),
            fmt10(p.ci_high),
            if p.censored { 1 } else { 0 }
        ));
    }
    out
}

/// One-line summary of ensemble channel statistics.
pub fn format_chanstats(model: &str, n: usize, seed: u64, s: &ChannelStats) -> String {
    format!(
        "model={model} n={n} seed={seed} tau_m={:.4}ns tau_rms={:.4}ns np10db={:.2} np85={:.2} t_mds={:.3}ns",
        s.mean_excess_delay, s.rms_delay_spread, s.np_10db, s.energy_capture_85, s.t_mds
    )
}

/// Minimal log-scale BER plot with 95% confidence whiskers. Censored points
/// are drawn as open downward markers (the value is an upper bound).
pub fn render_svg(points: &[BerPoint], title: &str) -> String {
    const W: f64 = 720.0;
    const H: f64 = 480.0;
    const ML: f64 = 70.0;
    const MR: f64 = 20.0;
    const MT: f64 = 30.0;
    const MB: f64 = 50.0;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    if points.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }

    let x_min = points.iter().map(|p| p.snr_db).fold(f64::INFINITY, f64::min);
    let x_max = points.iter().map(|p| p.snr_db).fold(f64::NEG_INFINITY, f64::max);
    let x_span = (x_max - x_min).max(1e-9);

    // Log-y range: from the smallest positive value (BER or CI edge) down to
    // its decade, up to 10^0.
    let mut y_floor: f64 = 1e-1;
    for p in points {
        for v in [p.ber, p.ci_low] {
            if v > 0.0 {
                y_floor = y_floor.min(v);
            }
        }
    }
    let dec_lo = y_floor.log10().floor().min(-1.0);
    let dec_hi = 0.0;

    let x_of = |snr: f64| ML + (snr - x_min) / x_span * (W - ML - MR);
    let y_of = |ber: f64| {
        let l = ber.max(10f64.powf(dec_lo)).log10().min(dec_hi);
        MT + (dec_hi - l) / (dec_hi - dec_lo) * (H - MT - MB)
    };

    // Decade grid lines and labels.
    let mut d = dec_lo as i64;
    while d <= dec_hi as i64 {
        let y = y_of(10f64.powi(d as i32));
        svg.push_str(&format!(
            "<line x1=\"{ML}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\n",
            W - MR
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\" fill=\"#444\">1e{d}</text>\n",
            ML - 6.0,
            y + 4.0
        ));
        d += 1;
    }

    // X ticks at every measured SNR.
    for p in points {
        let x = x_of(p.snr_db);
        svg.push_str(&format!(
            "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#ddd\"/>\n",
            MT,
            H - MB
        ));
        svg.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\" fill=\"#444\">{}</text>\n",
            H - MB + 16.0,
            p.snr_db
        ));
    }

    // Axes and labels.
    svg.push_str(&format!(
        "<rect x=\"{ML}\" y=\"{MT}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"#333\"/>\n",
        W - ML - MR,
        H - MT - MB
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" fill=\"#000\">Eb/N0 (dB)</text>\n",
        ML + (W - ML - MR) / 2.0,
        H - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" fill=\"#000\" transform=\"rotate(-90 14 {:.1})\">BER</text>\n",
        14.0,
        MT + (H - MT - MB) / 2.0,
        MT + (H - MT - MB) / 2.0
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" fill=\"#000\">{title}</text>\n",
        ML + (W - ML - MR) / 2.0,
        18.0
    ));

    // Confidence whiskers.
    for p in points {
        let x = x_of(p.snr_db);
        let y_lo = y_of(p.ci_low.max(10f64.powf(dec_lo)));
        let y_hi = y_of(p.ci_high);
        svg.push_str(&format!(
            "<line x1=\"{x:.1}\" y1=\"{y_hi:.1}\" x2=\"{x:.1}\" y2=\"{y_lo:.1}\" stroke=\"#888\"/>\n"
        ));
        for y in [y_lo, y_hi] {
            svg.push_str(&format!(
                "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#888\"/>\n",
                x - 3.0,
                x + 3.0
            ));
        }
    }

    // Curve through measured (non-censored) points.
    let solid: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| !p.censored)
        .map(|p| (x_of(p.snr_db), y_of(p.ber)))
        .collect();
    if solid.len() >= 2 {
        let path: Vec<String> = solid.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>\n",
            path.join(" ")
        ));
    }
    for p in points {
        let x = x_of(p.snr_db);
        let y = y_of(p.ber);
        if p.censored {
            svg.push_str(&format!(
                "<path d=\"M {:.1} {:.1} L {:.1} {:.1} L {:.1} {:.1} Z\" fill=\"none\" stroke=\"#1f77b4\"/>\n",
                x - 4.0,
                y - 3.0,
                x + 4.0,
                y - 3.0,
                x,
                y + 4.0
            ));
        } else {
            svg.push_str(&format!(
                "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"3\" fill=\"#1f77b4\"/>\n"
            ));
        }
    }

    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(snr: f64, errors: u64, trials: u64) -> BerPoint {
        BerPoint::from_counts(snr, errors, trials, 10)
    }

    #[test]
    fn csv_schema_is_stable() {
        let points = vec![point(4.0, 120, 10_000), point(8.0, 3, 50_000)];
        let csv = format_csv(&points);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "snr_db,errors,trials,ber,ci_low,ci_high,censored");
        assert!(lines[1].starts_with("4.000000000e0,120,10000,1.200000000e-2,"));
        assert!(lines[1].ends_with(",0"));
        // Censored row: flag set and the ber column carries the upper bound.
        let fields: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(fields[6], "1");
        assert_eq!(fields[3], fields[5]);
    }

    #[test]
    fn csv_is_reproducible() {
        let points = vec![point(4.0, 120, 10_000)];
        assert_eq!(format_csv(&points), format_csv(&points));
    }

    #[test]
    fn svg_contains_curve_and_whiskers() {
        let points = vec![point(4.0, 500, 10_000), point(8.0, 50, 10_000), point(12.0, 2, 10_000)];
        let svg = render_svg(&points, "test");
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("circle"));
        assert!(svg.contains("</svg>"));
    }
}
