//! Hand-rolled SVG line charts: log–log rate charts with a reference slope
//! line, and log-x envelope charts with horizontal bands. No chart crate,
//! fixed-precision coordinates, deterministic output.

const WIDTH: f64 = 880.0;
const HEIGHT: f64 = 560.0;
const MARGIN_L: f64 = 72.0;
const MARGIN_R: f64 = 180.0;
const MARGIN_T: f64 = 48.0;
const MARGIN_B: f64 = 56.0;

const PALETTE: [&str; 8] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];

/// A reference line of fixed slope in log–log space, anchored at a data
/// point.
pub struct ReferenceLine {
    pub slope: f64,
    pub anchor: (f64, f64),
    pub label: String,
}

/// One polyline in data space.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn sx(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn sy(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_B
            - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// Log–log chart: one polyline per series plus an optional slope reference.
/// Non-positive values are clamped to the smallest positive magnitude seen.
pub fn log_log_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], reference: Option<&ReferenceLine>) -> String {
    let mut floor = f64::INFINITY;
    for s in series {
        for &(_, y) in &s.points {
            if y.abs() > 0.0 {
                floor = floor.min(y.abs());
            }
        }
    }
    if !floor.is_finite() {
        floor = 1e-12;
    }
    let logged: Vec<Series> = series
        .iter()
        .map(|s| Series {
            label: s.label.clone(),
            points: s
                .points
                .iter()
                .map(|&(x, y)| (x.log10(), y.abs().max(floor).log10()))
                .collect(),
        })
        .collect();
    let ref_logged = reference.map(|r| {
        (r.slope, (r.anchor.0.log10(), r.anchor.1.abs().max(floor).log10()), r.label.clone())
    });

    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in &logged {
        for &(x, y) in &s.points {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if let Some((slope, (ax, ay), _)) = &ref_logged {
        for x in [x_min, x_max] {
            let y = ay + slope * (x - ax);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    let pad = ((y_max - y_min) * 0.08).max(0.1);
    let frame = Frame { x_min, x_max, y_min: y_min - pad, y_max: y_max + pad };

    let mut svg = svg_open(title);
    axes(&mut svg, &frame, x_label, y_label, true, true);
    if let Some((slope, (ax, ay), label)) = &ref_logged {
        let y0 = ay + slope * (frame.x_min - ax);
        let y1 = ay + slope * (frame.x_max - ax);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#444444\" stroke-width=\"1.5\" stroke-dasharray=\"7,4\"/>\n",
            fmt(frame.sx(frame.x_min)),
            fmt(frame.sy(y0)),
            fmt(frame.sx(frame.x_max)),
            fmt(frame.sy(y1))
        ));
        legend_entry(&mut svg, series.len(), "#444444", label, true);
    }
    polylines(&mut svg, &frame, &logged);
    svg.push_str("</svg>\n");
    svg
}

/// Log-x, linear-y chart with horizontal reference lines (band edges,
/// envelope targets).
pub fn envelope_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    h_lines: &[(String, f64)],
) -> String {
    let logged: Vec<Series> = series
        .iter()
        .map(|s| Series {
            label: s.label.clone(),
            points: s.points.iter().map(|&(x, y)| (x.log10(), y)).collect(),
        })
        .collect();
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in &logged {
        for &(x, y) in &s.points {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    for (_, y) in h_lines {
        y_min = y_min.min(*y);
        y_max = y_max.max(*y);
    }
    let pad = ((y_max - y_min) * 0.08).max(1e-6);
    let frame = Frame { x_min, x_max, y_min: y_min - pad, y_max: y_max + pad };

    let mut svg = svg_open(title);
    axes(&mut svg, &frame, x_label, y_label, true, false);
    for (idx, (label, y)) in h_lines.iter().enumerate() {
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#555555\" stroke-width=\"1\" stroke-dasharray=\"4,4\"/>\n",
            fmt(frame.sx(frame.x_min)),
            fmt(frame.sy(*y)),
            fmt(frame.sx(frame.x_max)),
            fmt(frame.sy(*y))
        ));
        legend_entry(&mut svg, series.len() + idx, "#555555", label, true);
    }
    polylines(&mut svg, &frame, &logged);
    svg.push_str("</svg>\n");
    svg
}

fn svg_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>\n\
         <text x=\"{}\" y=\"28\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        fmt((WIDTH - MARGIN_R + MARGIN_L) / 2.0),
        escape(title)
    )
}

fn axes(svg: &mut String, frame: &Frame, x_label: &str, y_label: &str, x_log: bool, y_log: bool) {
    let x0 = MARGIN_L;
    let x1 = WIDTH - MARGIN_R;
    let y0 = HEIGHT - MARGIN_B;
    let y1 = MARGIN_T;
    svg.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"#000000\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"#000000\"/>\n"
    ));
    // x ticks
    for (pos, label) in ticks(frame.x_min, frame.x_max, x_log) {
        let sx = frame.sx(pos);
        svg.push_str(&format!(
            "<line x1=\"{sx}\" y1=\"{y0}\" x2=\"{sx}\" y2=\"{}\" stroke=\"#000000\"/>\n\
             <text x=\"{sx}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{label}</text>\n",
            fmt(y0 + 5.0),
            fmt(y0 + 18.0),
            sx = fmt(sx),
        ));
    }
    // y ticks
    for (pos, label) in ticks(frame.y_min, frame.y_max, y_log) {
        let sy = frame.sy(pos);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{sy}\" x2=\"{x0}\" y2=\"{sy}\" stroke=\"#000000\"/>\n\
             <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{label}</text>\n",
            fmt(x0 - 5.0),
            fmt(x0 - 8.0),
            fmt(sy + 4.0),
            sy = fmt(sy),
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
        fmt((x0 + x1) / 2.0),
        fmt(HEIGHT - 14.0),
        escape(x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"20\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 20 {})\">{}</text>\n",
        fmt((y0 + y1) / 2.0),
        fmt((y0 + y1) / 2.0),
        escape(y_label)
    ));
}

/// Tick positions with labels. Log axes tick at integer exponents; linear
/// axes use a fixed five-way split.
fn ticks(min: f64, max: f64, log: bool) -> Vec<(f64, String)> {
    let mut out = Vec::new();
    if log {
        let lo = min.ceil() as i64;
        let hi = max.floor() as i64;
        for e in lo..=hi {
            out.push((e as f64, format!("1e{e}")));
        }
        if out.is_empty() {
            out.push((min, format!("1e{:.1}", min)));
            out.push((max, format!("1e{:.1}", max)));
        }
    } else {
        for step in 0..=5 {
            let pos = min + (max - min) * step as f64 / 5.0;
            out.push((pos, format!("{pos:.3}")));
        }
    }
    out
}

fn polylines(svg: &mut String, frame: &Frame, series: &[Series]) {
    for (idx, s) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let coords: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{},{}", fmt(frame.sx(x)), fmt(frame.sy(y))))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            coords.join(" ")
        ));
        legend_entry(svg, idx, color, &s.label, false);
    }
}

fn legend_entry(svg: &mut String, slot: usize, color: &str, label: &str, dashed: bool) {
    let y = MARGIN_T + 16.0 * slot as f64 + 8.0;
    let x = WIDTH - MARGIN_R + 12.0;
    let dash = if dashed { " stroke-dasharray=\"6,3\"" } else { "" };
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"2\"{dash}/>\n\
         <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
        fmt(x),
        fmt(y),
        fmt(x + 22.0),
        fmt(y),
        fmt(x + 28.0),
        fmt(y + 4.0),
        escape(label)
    ));
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_is_deterministic_and_well_formed() {
        let series = vec![Series {
            label: "seed 1".to_string(),
            points: vec![(16.0, 10.0), (32.0, 44.0), (64.0, 160.0)],
        }];
        let reference =
            ReferenceLine { slope: 2.0, anchor: (16.0, 10.0), label: "n^2".to_string() };
        let a = log_log_chart("t", "n", "|sum|", &series, Some(&reference));
        let b = log_log_chart("t", "n", "|sum|", &series, Some(&reference));
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.ends_with("</svg>\n"));
        assert!(a.contains("polyline"));
        assert!(a.contains("n^2"));
    }

    #[test]
    fn envelope_chart_draws_bands() {
        let series = vec![Series {
            label: "seed 1".to_string(),
            points: vec![(1000.0, 0.2), (2000.0, -0.1), (4000.0, 0.3)],
        }];
        let svg = envelope_chart(
            "envelope",
            "n",
            "statistic",
            &series,
            &[("+sqrt(V)".to_string(), 0.577), ("-sqrt(V)".to_string(), -0.577)],
        );
        assert!(svg.contains("stroke-dasharray=\"4,4\""));
        assert!(svg.matches("<polyline").count() == 1);
    }
}
