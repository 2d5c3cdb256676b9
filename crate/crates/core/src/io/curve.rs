use std::fmt::Write as _;

use crate::enbcds::EnbcdsCurve;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CurveError {
    #[error("curve needs at least 2 samples, got {0}")]
    EmptyCurve(usize),
    #[error("malformed curve csv: {0}")]
    Malformed(String),
}

/// Curve as CSV or SVG. Equivalent to [`emit_curve_marked`] without a marker.
pub fn emit_curve(curve: &EnbcdsCurve<f64>, format: Format) -> Result<Vec<u8>, CurveError> {
    emit_curve_marked(curve, format, None)
}

/// As [`emit_curve`]; `actual` is an `(s, enbcds)` point drawn as a second
/// marker in SVG output and ignored in CSV.
pub fn emit_curve_marked(
    curve: &EnbcdsCurve<f64>,
    format: Format,
    actual: Option<(f64, f64)>,
) -> Result<Vec<u8>, CurveError> {
    if curve.samples.len() < 2 {
        return Err(CurveError::EmptyCurve(curve.samples.len()));
    }
    Ok(match format {
        Format::Csv => csv_bytes(curve),
        Format::Svg => svg(curve, actual).into_bytes(),
    })
}

fn csv_bytes(curve: &EnbcdsCurve<f64>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    let io = "writing to memory cannot fail";
    w.write_record(["s", "enbcds"]).expect(io);
    for &(s, v) in &curve.samples {
        w.write_record([s.to_string(), v.to_string()]).expect(io);
    }
    w.write_record([
        format!("# s_star={}", curve.s_star),
        format!("peak={}", curve.peak_value),
    ])
    .expect(io);
    w.into_inner().expect(io)
}

/// `(s, enbcds)` samples and the `(s_star, peak)` comment row, if present.
pub type ParsedCurve = (Vec<(f64, f64)>, Option<(f64, f64)>);

/// Samples and the `(s_star, peak)` comment row of a CSV written by [`emit_curve`].
pub fn parse_curve_csv(bytes: &[u8]) -> Result<ParsedCurve, CurveError> {
    let bad = |m: String| CurveError::Malformed(m);
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = r.headers().map_err(|e| bad(e.to_string()))?;
    if header != vec!["s", "enbcds"] {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let num = |f: &str| f.trim().parse::<f64>().map_err(|e| bad(format!("{f:?}: {e}")));
    let mut samples = Vec::new();
    let mut peak = None;
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let (a, b) = (&rec[0], &rec[1]);
        if let Some(s) = a.strip_prefix("# s_star=") {
            let v = b.strip_prefix("peak=").ok_or_else(|| bad(b.to_string()))?;
            peak = Some((num(s)?, num(v)?));
        } else {
            samples.push((num(a)?, num(b)?));
        }
    }
    Ok((samples, peak))
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn svg(curve: &EnbcdsCurve<f64>, actual: Option<(f64, f64)>) -> String {
    let s_max = curve.samples.iter().map(|p| p.0).fold(0.0, f64::max);
    let mut v_lo = curve.samples.iter().map(|p| p.1).fold(0.0, f64::min);
    let mut v_hi = curve.samples.iter().map(|p| p.1).fold(0.0, f64::max);
    if let Some((_, v)) = actual {
        v_lo = v_lo.min(v);
        v_hi = v_hi.max(v);
    }
    if v_hi <= v_lo {
        v_hi = v_lo + 1.0;
    }
    let x = |s: f64| LEFT + (W - LEFT - RIGHT) * if s_max > 0.0 { s / s_max } else { 0.0 };
    let y = |v: f64| TOP + (H - TOP - BOTTOM) * (v_hi - v) / (v_hi - v_lo);

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(out, "<title>ENBCDS for {}</title>", escape(&curve.gdf));
    let v0 = curve.samples[0].1;
    let _ = writeln!(
        out,
        "<desc>s_star={} peak={} enbcds_at_0={}</desc>",
        curve.s_star, curve.peak_value, v0
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let (x0, x1) = (x(0.0), x(s_max));
    let (yt, yb) = (y(v_hi), y(v_lo));
    let _ = writeln!(
        out,
        r#"<path id="axes" d="M {x0:.2} {yt:.2} L {x0:.2} {yb:.2} L {x1:.2} {yb:.2}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r##"<line id="zero-line" x1="{x0:.2}" y1="{z:.2}" x2="{x1:.2}" y2="{z:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
        z = y(0.0)
    );
    let points: Vec<String> = curve
        .samples
        .iter()
        .map(|&(s, v)| format!("{:.2},{:.2}", x(s), y(v)))
        .collect();
    let _ = writeln!(
        out,
        r##"<polyline id="curve" points="{}" fill="none" stroke="#1f5fa8" stroke-width="2"/>"##,
        points.join(" ")
    );
    let (px, py) = (x(curve.s_star), y(curve.peak_value));
    let _ = writeln!(
        out,
        r##"<circle id="peak-marker" cx="{px:.2}" cy="{py:.2}" r="5" fill="#c0392b"><title>s*={} ENBCDS={}</title></circle>"##,
        curve.s_star, curve.peak_value
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">s*</text>"#,
        px + 7.0,
        py - 7.0
    );
    if let Some((sa, va)) = actual {
        let (ax, ay) = (x(sa), y(va));
        let _ = writeln!(
            out,
            r##"<circle id="actual-marker" cx="{ax:.2}" cy="{ay:.2}" r="5" fill="none" stroke="#27ae60" stroke-width="2"><title>s^A={sa} ENBCDS={va}</title></circle>"##
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">s^A</text>"#,
            ax + 7.0,
            ay + 14.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">cyber-defense spend s (0 to {s_max})</text>"#,
        (x0 + x1) / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        out,
        r#"<text x="15" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 15 {:.2})">ENBCDS</text>"#,
        (yt + yb) / 2.0,
        (yt + yb) / 2.0
    );
    out.push_str("</svg>\n");
    out
}
