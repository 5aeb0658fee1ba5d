//! Text renderings of evaluation results: curve CSV, summary tables, SVG.

use std::fmt::Write as _;

use crate::evaluation::{reference_fppi, EvalReport};
use crate::simulation::SweepRow;

/// Formats `x` like C's `%.{digits}g`: `digits` significant digits, trailing
/// zeros dropped, scientific notation outside `[1e-4, 10^digits)`.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("`{:e}` output has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One CSV row per curve point of every (variant, threshold) cell.
pub fn curves_csv(report: &EvalReport) -> String {
    let mut out = String::from("variant,iou_thresh,score_thresh,fppi,miss_rate\n");
    for r in &report.results {
        for p in &r.curve {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.variant.tag(),
                fmt_sig(r.iou_thresh, 9),
                fmt_sig(p.score_thresh, 9),
                fmt_sig(p.fppi, 9),
                fmt_sig(p.miss_rate, 9)
            );
        }
    }
    out
}

/// Log-average miss rates, one row per (variant, threshold).
pub fn summary_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "frames: {}  evaluable: {}  ignored: {}", report.frames, report.evaluable, report.ignored);
    let _ = writeln!(out, "{:<6} {:>10} {:>8} {:>10}", "metric", "IoU thresh", "MR (%)", "MR");
    for r in &report.results {
        let _ = writeln!(
            out,
            "{:<6} {:>10.2} {:>8.2} {:>10.6}",
            format!("MR^{}", r.variant.tag()),
            r.iou_thresh,
            100.0 * r.log_average_mr,
            r.log_average_mr
        );
    }
    out
}

/// Shift sweep as a table keyed by `dx`, MR^M (%) per detector and threshold.
pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    let Some(first) = rows.first() else {
        return out;
    };
    let _ = write!(out, "{:>6}", "dx");
    for cell in &first.cells {
        for (t, _) in &cell.mr {
            let _ = write!(out, " {:>18}", format!("{}@{:.2}", cell.label, t));
        }
    }
    out.push('\n');
    for row in rows {
        let _ = write!(out, "{:>6}", fmt_sig(row.dx, 6));
        for cell in &row.cells {
            for (_, mr) in &cell.mr {
                let _ = write!(out, " {:>18.2}", 100.0 * mr);
            }
        }
        out.push('\n');
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("dx,detector,iou_thresh,mr_m\n");
    for row in rows {
        for cell in &row.cells {
            for (t, mr) in &cell.mr {
                let _ = writeln!(out, "{},{},{},{}", fmt_sig(row.dx, 9), cell.label, fmt_sig(*t, 9), fmt_sig(*mr, 9));
            }
        }
    }
    out
}

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 420.0;
const MARGIN: f64 = 50.0;
const LOG_X_MIN: f64 = -3.0;
const LOG_X_MAX: f64 = 1.0;
const COLORS: [&str; 6] = ["#1f77b4", "#2ca02c", "#d62728", "#9467bd", "#ff7f0e", "#8c564b"];

fn sx(fppi: f64) -> f64 {
    let lx = fppi.max(10f64.powf(LOG_X_MIN)).log10().min(LOG_X_MAX);
    MARGIN + (lx - LOG_X_MIN) / (LOG_X_MAX - LOG_X_MIN) * (SVG_W - 2.0 * MARGIN)
}

fn sy(mr: f64) -> f64 {
    SVG_H - MARGIN - mr.clamp(0.0, 1.0) * (SVG_H - 2.0 * MARGIN)
}

/// Static miss-rate vs FPPI plot on a log FPPI axis with the nine reference
/// FPPI values drawn as gridlines.
pub fn curves_svg(report: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for r in reference_fppi() {
        let x = sx(r);
        let _ =
            writeln!(s, r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/>"##, sy(1.0), sy(0.0));
    }
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        SVG_W - 2.0 * MARGIN,
        SVG_H - 2.0 * MARGIN
    );
    for e in [-3, -2, -1, 0, 1] {
        let x = sx(10f64.powi(e));
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{e}</text>"#, SVG_H - MARGIN + 15.0);
    }
    for k in 0..=4 {
        let m = k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{m:.2}</text>"#, MARGIN - 5.0, sy(m) + 4.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">false positives per image</text>"#,
        SVG_W / 2.0,
        SVG_H - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" transform="rotate(-90 14 {:.2})" text-anchor="middle">miss rate</text>"#,
        SVG_H / 2.0,
        SVG_H / 2.0
    );
    for (i, r) in report.results.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        // staircase: miss rate holds until the next FPPI is reached
        let mut pts = Vec::new();
        let mut prev: Option<(f64, f64)> = None;
        for p in &r.curve {
            if let Some((_, m)) = prev {
                pts.push(format!("{:.2},{:.2}", sx(p.fppi), sy(m)));
            }
            pts.push(format!("{:.2},{:.2}", sx(p.fppi), sy(p.miss_rate)));
            prev = Some((p.fppi, p.miss_rate));
        }
        if let Some((_, m)) = prev {
            pts.push(format!("{:.2},{:.2}", sx(10f64.powf(LOG_X_MAX)), sy(m)));
        }
        let _ =
            writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let ly = MARGIN + 14.0 * (i as f64 + 1.0);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{ly:.2}" fill="{color}" text-anchor="end">MR^{}@{}: {:.2}%</text>"#,
            SVG_W - MARGIN - 6.0,
            r.variant.tag(),
            fmt_sig(r.iou_thresh, 3),
            100.0 * r.log_average_mr
        );
    }
    s.push_str("</svg>\n");
    s
}
