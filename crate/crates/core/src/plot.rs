//! Minimal SVG phase portraits.

use std::fmt::Write as _;

use crate::phase::PhasePoint;

const W: f64 = 480.0;
const H: f64 = 480.0;
const PAD: f64 = 48.0;

#[derive(Debug, Clone, Copy)]
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * PAD)
    }
}

/// Horizontal axis is `q₁`, vertical is `p₁`.
#[derive(Debug, Default, Clone)]
pub struct PhasePortrait {
    title: String,
    inputs: Vec<(f64, f64)>,
    labels: Vec<(f64, f64)>,
    curves: Vec<(Vec<(f64, f64)>, &'static str, bool)>,
}

fn qp(x: &PhasePoint) -> (f64, f64) {
    (x.q()[0], x.p()[0])
}

impl PhasePortrait {
    pub fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            ..Self::default()
        }
    }

    /// Training pairs: inputs as open circles, labels as filled dots, joined
    /// by dashed connectors.
    pub fn training_pairs<'a>(
        mut self,
        pairs: impl IntoIterator<Item = (&'a PhasePoint, &'a PhasePoint)>,
    ) -> Self {
        for (x, y) in pairs {
            self.inputs.push(qp(x));
            self.labels.push(qp(y));
        }
        self
    }

    pub fn curve(mut self, pts: &[PhasePoint], color: &'static str, dashed: bool) -> Self {
        self.curves
            .push((pts.iter().map(qp).collect(), color, dashed));
        self
    }

    fn frame(&self) -> Frame {
        let all = self
            .inputs
            .iter()
            .chain(&self.labels)
            .chain(self.curves.iter().flat_map(|c| c.0.iter()))
            .filter(|(a, b)| a.is_finite() && b.is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for &(x, y) in all {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            return Frame {
                x0: -1.0,
                x1: 1.0,
                y0: -1.0,
                y1: 1.0,
            };
        }
        let mx = ((x1 - x0) * 0.05).max(1e-3);
        let my = ((y1 - y0) * 0.05).max(1e-3);
        Frame {
            x0: x0 - mx,
            x1: x1 + mx,
            y0: y0 - my,
            y1: y1 + my,
        }
    }

    pub fn to_svg(&self) -> String {
        let f = self.frame();
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            W - 2.0 * PAD,
            H - 2.0 * PAD
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            W / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">q</text>"#,
            W / 2.0,
            H - 12.0
        );
        let _ = writeln!(s, r#"<text x="14" y="{}" font-size="12">p</text>"#, H / 2.0);
        for (v, anchor) in [(f.x0, "start"), (f.x1, "end")] {
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{}" text-anchor="{anchor}" font-size="10">{v:.2}</text>"#,
                f.px(v),
                H - PAD + 14.0
            );
        }
        for v in [f.y0, f.y1] {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{:.1}" text-anchor="end" font-size="10">{v:.2}</text>"#,
                PAD - 4.0,
                f.py(v) + 3.0
            );
        }
        for (a, b) in self.inputs.iter().zip(&self.labels) {
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888" stroke-dasharray="3,3"/>"##,
                f.px(a.0),
                f.py(a.1),
                f.px(b.0),
                f.py(b.1)
            );
        }
        for &(x, y) in &self.inputs {
            let _ = writeln!(
                s,
                r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="none" stroke="#1f77b4"/>"##,
                f.px(x),
                f.py(y)
            );
        }
        for &(x, y) in &self.labels {
            let _ = writeln!(
                s,
                r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="#ff9f1c"/>"##,
                f.px(x),
                f.py(y)
            );
        }
        for (pts, color, dashed) in &self.curves {
            let path: Vec<String> = pts
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
                .collect();
            let dash = if *dashed {
                r#" stroke-dasharray="6,4""#
            } else {
                ""
            };
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                path.join(" ")
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
