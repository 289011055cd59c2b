//! Standalone SVG figures.

use std::fmt::Write as _;

use crate::training::TrainingHistory;

const W: f64 = 480.0;
const H: f64 = 360.0;
const PAD: f64 = 48.0;

fn frame(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>) -> Axis {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return Axis { lo: 0.0, hi: 1.0 };
        }
        if hi - lo < 1e-12 {
            hi = lo + 1.0;
        }
        Axis { lo, hi }
    }

    fn x(&self, v: f64) -> f64 {
        PAD + (v - self.lo) / (self.hi - self.lo) * (W - 2.0 * PAD)
    }

    fn y(&self, v: f64) -> f64 {
        H - PAD - (v - self.lo) / (self.hi - self.lo) * (H - 2.0 * PAD)
    }
}

fn labels(s: &mut String, x: &Axis, y: &Axis, xlabel: &str, ylabel: &str) {
    let _ = writeln!(s, r#"<text x="{PAD}" y="{}">{:.2}</text>"#, H - PAD + 16.0, x.lo);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{:.2}</text>"#,
        W - PAD,
        H - PAD + 16.0,
        x.hi
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.2}</text>"#, PAD - 4.0, H - PAD, y.lo);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.2}</text>"#, PAD - 4.0, PAD + 10.0, y.hi);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
}

/// Predicted against gold scores on fixed `[−3, 3]` axes.
pub fn scatter_svg(title: &str, preds: &[f64], golds: &[f64]) -> String {
    let axis = Axis { lo: -3.0, hi: 3.0 };
    let mut s = frame(title);
    let _ = writeln!(
        s,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#bbb"/>"##,
        axis.x(-3.0),
        axis.y(-3.0),
        axis.x(3.0),
        axis.y(3.0)
    );
    for (p, g) in preds.iter().zip(golds) {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="#1f77b4" fill-opacity="0.6"/>"##,
            axis.x(g.clamp(-3.0, 3.0)),
            axis.y(p.clamp(-3.0, 3.0))
        );
    }
    labels(&mut s, &axis, &axis, "gold score", "predicted score");
    s.push_str("</svg>\n");
    s
}

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Per-task training (solid) and validation (dashed) loss curves.
pub fn loss_curves_svg(title: &str, history: &TrainingHistory) -> String {
    type Pick = fn(&crate::training::LossBreakdown) -> Option<f64>;
    let series: [(&str, Pick); 3] = [
        ("score MAE", |b| Some(b.main)),
        ("polarity BCE", |b| b.polarity),
        ("intensity CCE", |b| b.intensity),
    ];
    let n = history.epochs.len();
    let x = Axis {
        lo: 1.0,
        hi: (n.max(2)) as f64,
    };
    let y = Axis::fit(history.epochs.iter().flat_map(|e| {
        series
            .iter()
            .flat_map(move |(_, f)| [f(&e.train), f(&e.validation)])
            .flatten()
    }));
    let mut s = frame(title);
    let mut legend = 0;
    for (i, (name, pick)) in series.iter().enumerate() {
        for (dash, val) in [("", false), (r#" stroke-dasharray="5 3""#, true)] {
            let pts: Vec<String> = history
                .epochs
                .iter()
                .filter_map(|e| {
                    let b = if val { &e.validation } else { &e.train };
                    pick(b).map(|v| format!("{:.2},{:.2}", x.x(e.epoch as f64), y.y(v)))
                })
                .collect();
            if pts.is_empty() {
                continue;
            }
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{}" stroke-width="1.5"{dash} points="{}"/>"#,
                COLORS[i],
                pts.join(" ")
            );
            if !val {
                let _ = writeln!(
                    s,
                    r#"<text x="{}" y="{}" fill="{}">{}</text>"#,
                    W - PAD - 110.0,
                    PAD + 16.0 + 14.0 * legend as f64,
                    COLORS[i],
                    name
                );
                legend += 1;
            }
        }
    }
    let _ = writeln!(
        s,
        r#"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black" stroke-dasharray="2 2"/>"#,
        x.x(history.best_epoch as f64),
        PAD,
        H - PAD
    );
    labels(&mut s, &x, &y, "epoch (dashed: validation)", "loss");
    s.push_str("</svg>\n");
    s
}
