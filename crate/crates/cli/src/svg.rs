//! Minimal static SVG plots: scatter, line curves and histograms.

use std::fmt::Write as _;

const W: f64 = 480.0;
const H: f64 = 360.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

#[derive(Clone, Copy, Debug)]
pub struct Frame {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Frame {
    pub fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it
                .filter(|v| v.is_finite())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        Self {
            x: span(&mut xs.clone()),
            y: span(&mut ys.clone()),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * MARGIN)
    }
}

pub struct Plot {
    frame: Frame,
    body: String,
    legend: Vec<(String, &'static str)>,
}

impl Plot {
    pub fn new(frame: Frame, title: &str, xlabel: &str, ylabel: &str) -> Self {
        let mut body = String::new();
        let (x0, x1, y0, y1) = (MARGIN, W - MARGIN, H - MARGIN, MARGIN);
        let _ = write!(
            body,
            r##"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
            x1 - x0,
            y0 - y1
        );
        let _ = write!(
            body,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            W / 2.0,
            escape(title)
        );
        let _ = write!(
            body,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
            W / 2.0,
            H - 10.0,
            escape(xlabel)
        );
        let _ = write!(
            body,
            r#"<text x="14" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            escape(ylabel)
        );
        for (v, anchor, xp, yp) in [
            (frame.x.0, "start", x0, y0 + 14.0),
            (frame.x.1, "end", x1, y0 + 14.0),
        ] {
            let _ = write!(
                body,
                r#"<text x="{xp}" y="{yp}" text-anchor="{anchor}" font-size="10">{}</text>"#,
                tick(v)
            );
        }
        for (v, yp) in [(frame.y.0, y0), (frame.y.1, y1 + 10.0)] {
            let _ = write!(
                body,
                r#"<text x="{}" y="{yp}" text-anchor="end" font-size="10">{}</text>"#,
                x0 - 4.0,
                tick(v)
            );
        }
        Self {
            frame,
            body,
            legend: Vec::new(),
        }
    }

    fn color(&self, series: usize) -> &'static str {
        COLORS[series % COLORS.len()]
    }

    pub fn points(&mut self, pts: &[[f64; 2]], series: usize, label: &str, radius: f64) {
        let c = self.color(series);
        for p in pts {
            let _ = write!(
                self.body,
                r#"<circle cx="{:.2}" cy="{:.2}" r="{radius}" fill="{c}" fill-opacity="0.5"/>"#,
                self.frame.px(p[0]),
                self.frame.py(p[1])
            );
        }
        self.legend.push((label.to_string(), c));
    }

    pub fn markers(&mut self, pts: &[[f64; 2]], label: &str) {
        for p in pts {
            let _ = write!(
                self.body,
                r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#000"/>"##,
                self.frame.px(p[0]),
                self.frame.py(p[1])
            );
        }
        self.legend.push((label.to_string(), "#000"));
    }

    pub fn line(&mut self, pts: &[[f64; 2]], series: usize, label: &str) {
        let c = self.color(series);
        let path: Vec<String> = pts
            .iter()
            .filter(|p| p[0].is_finite() && p[1].is_finite())
            .map(|p| format!("{:.2},{:.2}", self.frame.px(p[0]), self.frame.py(p[1])))
            .collect();
        let _ = write!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#,
            path.join(" ")
        );
        self.legend.push((label.to_string(), c));
    }

    pub fn bars(&mut self, edges: &[f64], heights: &[f64], series: usize, label: &str) {
        let c = self.color(series);
        for (i, h) in heights.iter().enumerate() {
            let (x0, x1) = (self.frame.px(edges[i]), self.frame.px(edges[i + 1]));
            // bars grow from zero when zero is in view, else from the bottom edge
            let zero = 0.0_f64.clamp(self.frame.y.0, self.frame.y.1);
            let (a, b) = (self.frame.py(*h), self.frame.py(zero));
            let _ = write!(
                self.body,
                r#"<rect x="{x0:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{c}" fill-opacity="0.4"/>"#,
                a.min(b),
                (x1 - x0).max(0.0),
                (a - b).abs()
            );
        }
        self.legend.push((label.to_string(), c));
    }

    pub fn finish(mut self) -> String {
        for (i, (label, c)) in self.legend.iter().enumerate() {
            let y = MARGIN + 14.0 + 14.0 * i as f64;
            let _ = write!(
                self.body,
                r#"<rect x="{}" y="{}" width="10" height="10" fill="{c}"/><text x="{}" y="{}" font-size="11">{}</text>"#,
                W - MARGIN - 120.0,
                y - 9.0,
                W - MARGIN - 105.0,
                y,
                escape(label)
            );
        }
        format!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif">{}</svg>
"#,
            self.body
        )
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
