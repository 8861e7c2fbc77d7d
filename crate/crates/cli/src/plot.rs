//! Standalone SVG rendering of the CSV outputs.
//!
//! The layout is chosen from the header: `x,y,theta[,covered]` is an angle
//! field, any other `x,y,<name>` a scalar field such as an error or residual,
//! `t,leaf,closed,x,y` a curve family, `t,s,x,y` a reconstructed sheet.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlotStyle {
    pub width_px: u32,
    /// Data units; `None` picks 0.4% of the larger extent.
    pub stroke_width: Option<f64>,
}

impl Default for PlotStyle {
    fn default() -> Self {
        Self { width_px: 800, stroke_width: None }
    }
}

struct Polyline {
    t: f64,
    closed: bool,
    points: Vec<(f64, f64)>,
}

struct FieldNode {
    x: f64,
    y: f64,
    theta: f64,
    covered: bool,
}

#[derive(Clone, Copy, PartialEq)]
enum Shade {
    /// Hue from the angle mod π.
    Angle,
    /// Gray level from |value| relative to the largest one.
    Magnitude,
}

enum Plot {
    Field(Vec<FieldNode>, Shade),
    Curves(Vec<Polyline>),
}

fn parse_err(path: &str, msg: String) -> CliError {
    CliError::Input { path: path.into(), msg }
}

fn parse(text: &str, name: &str) -> Result<Plot, CliError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(name, format!("row 1: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let cols: Vec<&str> = header.iter().map(String::as_str).collect();
    let kind = match cols.as_slice() {
        ["x", "y", "theta"] | ["x", "y", "theta", "covered"] => 0,
        ["x", "y", _] => 3,
        ["t", "leaf", "closed", "x", "y"] => 1,
        ["t", "s", "x", "y"] => 2,
        _ => return Err(parse_err(name, format!("row 1: unrecognised header {}", header.join(",")))),
    };
    let mut nodes = Vec::new();
    let mut lines: Vec<Polyline> = Vec::new();
    let mut key: Option<(u64, String)> = None;
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| parse_err(name, format!("row {row}: {e}")))?;
        if rec.len() != cols.len() {
            return Err(parse_err(name, format!("row {row}: expected {} fields, found {}", cols.len(), rec.len())));
        }
        let f = |c: usize| -> Result<f64, CliError> {
            let s = rec[c].trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(name, format!("row {row}: column {} is not a finite number: {s:?}", cols[c])))
        };
        match kind {
            0 | 3 => {
                let covered = if cols.len() == 4 {
                    match rec[3].trim() {
                        "1" => true,
                        "0" => false,
                        s => return Err(parse_err(name, format!("row {row}: covered must be 0 or 1, got {s:?}"))),
                    }
                } else {
                    true
                };
                nodes.push(FieldNode { x: f(0)?, y: f(1)?, theta: f(2)?, covered });
            }
            _ => {
                let t = f(0)?;
                let (id, closed, x, y) = if kind == 1 {
                    let closed = match rec[2].trim() {
                        "1" => true,
                        "0" => false,
                        s => return Err(parse_err(name, format!("row {row}: closed must be 0 or 1, got {s:?}"))),
                    };
                    (rec[1].trim().to_string(), closed, f(3)?, f(4)?)
                } else {
                    f(1)?;
                    (String::new(), false, f(2)?, f(3)?)
                };
                let this = (t.to_bits(), id);
                if key.as_ref() != Some(&this) {
                    lines.push(Polyline { t, closed, points: Vec::new() });
                    key = Some(this);
                }
                lines.last_mut().expect("pushed above").points.push((x, y));
            }
        }
    }
    Ok(match kind {
        0 => Plot::Field(nodes, Shade::Angle),
        3 => Plot::Field(nodes, Shade::Magnitude),
        _ => Plot::Curves(lines),
    })
}

fn fmt(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn bbox(points: impl Iterator<Item = (f64, f64)>) -> Option<[f64; 4]> {
    points.fold(None, |b, (x, y)| {
        Some(match b {
            None => [x, x, y, y],
            Some([x0, x1, y0, y1]) => [x0.min(x), x1.max(x), y0.min(y), y1.max(y)],
        })
    })
}

fn hue_color(hue: f64) -> String {
    format!("hsl({},70%,50%)", fmt(hue.rem_euclid(360.0)))
}

/// Opens the document with the data box `[x0, x1] x [y0, y1]` padded by
/// `pad`; content goes in a group that flips `y` upward.
fn open_svg(out: &mut String, b: [f64; 4], pad: f64, width_px: u32) {
    let [x0, x1, y0, y1] = b;
    let (w, h) = (x1 - x0 + 2.0 * pad, y1 - y0 + 2.0 * pad);
    let height_px = ((width_px as f64) * h / w).round().max(1.0) as u32;
    let (vx, vy) = (x0 - pad, -(y1 + pad));
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width_px}" height="{height_px}" viewBox="{} {} {} {}">"#,
        fmt(vx),
        fmt(vy),
        fmt(w),
        fmt(h)
    );
    let _ = writeln!(out, r#"<rect x="{}" y="{}" width="{}" height="{}" fill="white"/>"#, fmt(vx), fmt(vy), fmt(w), fmt(h));
    out.push_str("<g transform=\"scale(1,-1)\">\n");
}

fn close_svg(out: &mut String) {
    out.push_str("</g>\n</svg>\n");
}

fn render_field(nodes: &[FieldNode], shade: Shade, style: PlotStyle) -> String {
    let mut out = String::new();
    let Some(b) = bbox(nodes.iter().map(|n| (n.x, n.y))) else {
        open_svg(&mut out, [0.0, 1.0, 0.0, 1.0], 0.0, style.width_px);
        close_svg(&mut out);
        return out;
    };
    let mut xs: Vec<f64> = nodes.iter().map(|n| n.x).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let cell = xs.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let cell = if cell.is_finite() { cell } else { 1.0 };
    open_svg(&mut out, b, 0.5 * cell, style.width_px);
    let top = nodes.iter().map(|n| n.theta.abs()).fold(0.0, f64::max);
    for n in nodes {
        let fill = match shade {
            _ if !n.covered => "#888888".into(),
            Shade::Angle => hue_color(n.theta.rem_euclid(PI) / PI * 360.0),
            Shade::Magnitude => {
                let u = if top > 0.0 { n.theta.abs() / top } else { 0.0 };
                format!("hsl(0,0%,{}%)", fmt(100.0 * (1.0 - u)))
            }
        };
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="{c}" height="{c}" fill="{fill}"/>"#,
            fmt(n.x - 0.5 * cell),
            fmt(n.y - 0.5 * cell),
            c = fmt(cell)
        );
    }
    close_svg(&mut out);
    out
}

fn render_curves(lines: &[Polyline], style: PlotStyle) -> String {
    let mut out = String::new();
    let Some(b) = bbox(lines.iter().flat_map(|l| l.points.iter().copied())) else {
        open_svg(&mut out, [0.0, 1.0, 0.0, 1.0], 0.0, style.width_px);
        close_svg(&mut out);
        return out;
    };
    let extent = (b[1] - b[0]).max(b[3] - b[2]).max(1e-12);
    let sw = style.stroke_width.unwrap_or(0.004 * extent);
    open_svg(&mut out, b, sw, style.width_px);
    let (t0, t1) = lines.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, z), l| (a.min(l.t), z.max(l.t)));
    for l in lines {
        // blue at the first time, red at the last
        let u = if t1 > t0 { (l.t - t0) / (t1 - t0) } else { 0.0 };
        let mut d = String::new();
        for (k, (x, y)) in l.points.iter().enumerate() {
            let _ = write!(d, "{}{} {}", if k == 0 { "M" } else { " L" }, fmt(*x), fmt(*y));
        }
        if l.closed {
            d.push_str(" Z");
        }
        let _ = writeln!(
            out,
            r#"<path d="{d}" fill="none" stroke="{}" stroke-width="{}" stroke-linejoin="round"/>"#,
            hue_color(240.0 * (1.0 - u)),
            fmt(sw)
        );
    }
    close_svg(&mut out);
    out
}

/// Renders CSV text; `name` only labels errors.
pub fn render_csv(text: &str, name: &str, style: PlotStyle) -> Result<String, CliError> {
    Ok(match parse(text, name)? {
        Plot::Field(nodes, shade) => render_field(&nodes, shade, style),
        Plot::Curves(lines) => render_curves(&lines, style),
    })
}

pub fn render_file(path: &Path, style: PlotStyle) -> Result<String, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| parse_err(&path.display().to_string(), format!("cannot read: {e}")))?;
    render_csv(&text, &path.display().to_string(), style)
}
