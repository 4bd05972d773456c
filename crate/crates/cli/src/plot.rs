//! Static SVG figures built directly from trace and result data.

use std::fmt::Write as _;

const PALETTE: [&str; 7] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#7f7f7f"];
const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 220.0;
const MARGIN: f64 = 48.0;

pub struct Series<'a> {
    pub name: &'a str,
    pub values: Vec<f64>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn finite_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn header(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xr: (f64, f64),
    yr: (f64, f64),
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        self.x0 + (v - self.xr.0) / (self.xr.1 - self.xr.0) * self.w
    }

    fn y(&self, v: f64) -> f64 {
        self.y0 + self.h - (v - self.yr.0) / (self.yr.1 - self.yr.0) * self.h
    }

    fn axes(&self, out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        let (x0, y0, w, h) = (self.x0, self.y0, self.w, self.h);
        let _ = writeln!(out, "<rect x=\"{x0:.1}\" y=\"{y0:.1}\" width=\"{w:.1}\" height=\"{h:.1}\" fill=\"none\" stroke=\"#444\"/>");
        let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"12\">{}</text>", x0 + w / 2.0, y0 - 8.0, esc(title));
        let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>", x0 + w / 2.0, y0 + h + 30.0, esc(xlabel));
        let _ = writeln!(
            out,
            "<text transform=\"translate({:.1},{:.1}) rotate(-90)\" text-anchor=\"middle\">{}</text>",
            x0 - 36.0,
            y0 + h / 2.0,
            esc(ylabel)
        );
        for (v, anchor) in [(self.yr.0, "end"), (self.yr.1, "end")] {
            let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"{anchor}\">{}</text>", x0 - 4.0, self.y(v) + 4.0, tick(v));
        }
        for v in [self.xr.0, self.xr.1] {
            let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>", self.x(v), y0 + h + 14.0, tick(v));
        }
        if self.yr.0 < 0.0 && self.yr.1 > 0.0 {
            let y = self.y(0.0);
            let _ = writeln!(out, "<line x1=\"{x0:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#bbb\"/>", x0 + w);
        }
    }
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn legend(out: &mut String, x: f64, y: f64, names: &[&str]) {
    for (i, name) in names.iter().enumerate() {
        let yy = y + 14.0 * i as f64;
        let _ = writeln!(out, "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"10\" height=\"3\" fill=\"{}\"/>", yy - 4.0, PALETTE[i % PALETTE.len()]);
        let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{yy:.1}\">{}</text>", x + 14.0, esc(name));
    }
}

fn polyline(out: &mut String, frame: &Frame, x: &[f64], y: &[f64], color: &str) {
    let mut pts = String::new();
    for (a, b) in x.iter().zip(y) {
        if b.is_finite() {
            let _ = write!(pts, "{:.2},{:.2} ", frame.x(*a), frame.y(*b));
        }
    }
    let _ = writeln!(out, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\" points=\"{}\"/>", pts.trim_end());
}

/// A grid of line-chart panels sharing the x axis.
pub fn panels(title: &str, x: &[f64], xlabel: &str, ylabel: &str, panels: &[(String, Vec<Series<'_>>)], columns: usize) -> String {
    let columns = columns.max(1);
    let rows = panels.len().div_ceil(columns);
    let cell_w = PANEL_W + MARGIN + 90.0;
    let cell_h = PANEL_H + MARGIN + 30.0;
    let (width, height) = (cell_w * columns as f64, cell_h * rows as f64 + 30.0);
    let mut out = header(width, height);
    let _ = writeln!(out, "<text x=\"{:.1}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>", width / 2.0, esc(title));
    let xr = finite_range(x.iter().copied());
    for (k, (name, series)) in panels.iter().enumerate() {
        let (r, c) = (k / columns, k % columns);
        let frame = Frame {
            x0: c as f64 * cell_w + MARGIN,
            y0: 30.0 + r as f64 * cell_h + 24.0,
            w: PANEL_W,
            h: PANEL_H,
            xr,
            yr: finite_range(series.iter().flat_map(|s| s.values.iter().copied())),
        };
        frame.axes(&mut out, name, xlabel, ylabel);
        for (i, s) in series.iter().enumerate() {
            polyline(&mut out, &frame, x, &s.values, PALETTE[i % PALETTE.len()]);
        }
        let names: Vec<&str> = series.iter().map(|s| s.name).collect();
        legend(&mut out, frame.x0 + PANEL_W + 8.0, frame.y0 + 10.0, &names);
    }
    out.push_str("</svg>\n");
    out
}

/// Five-number summaries drawn as box plots.
pub fn boxplot(title: &str, ylabel: &str, boxes: &[(String, [f64; 5])]) -> String {
    let width = MARGIN * 2.0 + 70.0 * boxes.len().max(1) as f64;
    let height = PANEL_H + 110.0;
    let mut out = header(width, height);
    let frame = Frame {
        x0: MARGIN,
        y0: 40.0,
        w: width - 2.0 * MARGIN,
        h: PANEL_H,
        xr: (0.0, boxes.len().max(1) as f64),
        yr: finite_range(boxes.iter().flat_map(|b| b.1)),
    };
    frame.axes(&mut out, title, "", ylabel);
    for (i, (name, [min, q1, med, q3, max])) in boxes.iter().enumerate() {
        let cx = frame.x(i as f64 + 0.5);
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(out, "<line x1=\"{cx:.1}\" y1=\"{:.1}\" x2=\"{cx:.1}\" y2=\"{:.1}\" stroke=\"{color}\"/>", frame.y(*min), frame.y(*max));
        let (top, bottom) = (frame.y(*q3), frame.y(*q1));
        let _ = writeln!(
            out,
            "<rect x=\"{:.1}\" y=\"{top:.1}\" width=\"30\" height=\"{:.1}\" fill=\"white\" stroke=\"{color}\"/>",
            cx - 15.0,
            (bottom - top).max(0.5)
        );
        let ym = frame.y(*med);
        let _ = writeln!(out, "<line x1=\"{:.1}\" y1=\"{ym:.1}\" x2=\"{:.1}\" y2=\"{ym:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>", cx - 15.0, cx + 15.0);
        let _ = writeln!(
            out,
            "<text transform=\"translate({cx:.1},{:.1}) rotate(35)\">{}</text>",
            frame.y0 + frame.h + 12.0,
            esc(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Grouped bar chart: one group per category, one bar per series.
pub fn grouped_bars(title: &str, ylabel: &str, categories: &[String], series: &[Series<'_>]) -> String {
    let group_w = 18.0 * series.len().max(1) as f64 + 16.0;
    let width = MARGIN * 2.0 + group_w * categories.len().max(1) as f64 + 110.0;
    let height = PANEL_H + 120.0;
    let mut out = header(width, height);
    let top = series.iter().flat_map(|s| s.values.iter().copied()).filter(|v| v.is_finite()).fold(0.0, f64::max);
    let frame = Frame {
        x0: MARGIN + 10.0,
        y0: 40.0,
        w: group_w * categories.len().max(1) as f64,
        h: PANEL_H,
        xr: (0.0, categories.len().max(1) as f64),
        yr: (0.0, if top > 0.0 { top * 1.05 } else { 1.0 }),
    };
    frame.axes(&mut out, title, "", ylabel);
    for (g, cat) in categories.iter().enumerate() {
        let gx = frame.x(g as f64) + 8.0;
        for (i, s) in series.iter().enumerate() {
            let v = s.values.get(g).copied().unwrap_or(0.0);
            if !v.is_finite() {
                continue;
            }
            let y = frame.y(v);
            let _ = writeln!(
                out,
                "<rect x=\"{:.1}\" y=\"{y:.1}\" width=\"16\" height=\"{:.1}\" fill=\"{}\"/>",
                gx + 18.0 * i as f64,
                frame.y0 + frame.h - y,
                PALETTE[i % PALETTE.len()]
            );
        }
        let _ = writeln!(
            out,
            "<text transform=\"translate({:.1},{:.1}) rotate(35)\">{}</text>",
            gx,
            frame.y0 + frame.h + 12.0,
            esc(cat)
        );
    }
    let names: Vec<&str> = series.iter().map(|s| s.name).collect();
    legend(&mut out, frame.x0 + frame.w + 12.0, frame.y0 + 10.0, &names);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documents_are_well_formed_and_escape_text() {
        let x = [0.0, 1.0, 2.0];
        let svg = panels("a<b", &x, "t", "y", &[("p".into(), vec![Series { name: "s", values: vec![1.0, f64::NAN, 3.0] }])], 2);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a&lt;b"));
        let b = boxplot("b", "rad", &[("hip".into(), [-1.0, -0.5, 0.0, 0.5, 1.0])]);
        assert_eq!(b.matches("<rect").count(), 3);
        let g = grouped_bars("g", "N", &["x".into(), "y".into()], &[Series { name: "a", values: vec![1.0, 2.0] }]);
        assert!(g.contains("</svg>"));
    }
}
