//! Minimal SVG line charts.

use std::fmt::Write as _;

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const W: f64 = 640.0;
const H: f64 = 440.0;
const PAD: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
    log_x: bool,
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        let x = if self.log_x { x.log10() } else { x };
        PAD + (x - self.x.0) / (self.x.1 - self.x.0).max(1e-300) * (W - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD - (y.log10() - self.y.0) / (self.y.1 - self.y.0).max(1e-300) * (H - 2.0 * PAD)
    }
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo.is_finite() && hi > lo {
        (lo, hi)
    } else if lo.is_finite() {
        (lo - 0.5, lo + 0.5)
    } else {
        (0.0, 1.0)
    }
}

/// Chart with a logarithmic y axis. With `log_x` the x axis is logarithmic too
/// and each entry of `guides` adds a dashed reference line of that slope.
pub fn chart(title: &str, x_label: &str, y_label: &str, series: &[Series], log_x: bool, guides: &[f64]) -> String {
    let pts = || {
        series
            .iter()
            .flat_map(|s| s.points.iter())
            .filter(|p| p.1 > 0.0 && p.1.is_finite() && (!log_x || p.0 > 0.0))
    };
    let ax = Axes {
        x: range(pts().map(|p| if log_x { p.0.log10() } else { p.0 })),
        y: range(pts().map(|p| p.1.log10())),
        log_x,
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{title}</text>"#, W / 2.0);
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#, W / 2.0, H - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{y_label}</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (v, anchor) in [(ax.y.0, H - PAD), (ax.y.1, PAD)] {
        let _ = writeln!(s, r#"<text x="{}" y="{anchor}" text-anchor="end">{:.1e}</text>"#, PAD - 4.0, 10f64.powf(v));
    }
    for (v, anchor) in [(ax.x.0, PAD), (ax.x.1, W - PAD)] {
        let shown = if log_x { 10f64.powf(v) } else { v };
        let _ = writeln!(s, r#"<text x="{anchor}" y="{}" text-anchor="middle">{shown:.3e}</text>"#, H - PAD + 16.0);
    }
    if log_x {
        let (x0, y0) = (ax.x.1, ax.y.1);
        for (k, slope) in guides.iter().enumerate() {
            let x1 = ax.x.0;
            let y1 = y0 - slope * (x0 - x1);
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888" stroke-dasharray="5,4"/>"##,
                ax.px(10f64.powf(x0)),
                ax.py(10f64.powf(y0)),
                ax.px(10f64.powf(x1)),
                ax.py(10f64.powf(y1))
            );
            let _ = writeln!(
                s,
                r##"<text x="{}" y="{}" fill="#888">slope {slope}</text>"##,
                W - PAD - 70.0,
                PAD + 16.0 * (k as f64 + 1.0)
            );
        }
    }
    let _ = writeln!(s, r#"<clipPath id="plot"><rect x="{PAD}" y="{PAD}" width="{}" height="{}"/></clipPath>"#, W - 2.0 * PAD, H - 2.0 * PAD);
    for (k, ser) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let path: Vec<String> = ser
            .points
            .iter()
            .filter(|p| p.1 > 0.0 && p.1.is_finite() && (!log_x || p.0 > 0.0))
            .map(|&(x, y)| format!("{:.2},{:.2}", ax.px(x), ax.py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline clip-path="url(#plot)" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        if log_x {
            for p in &path {
                let (x, y) = p.split_once(',').expect("formatted pair");
                let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#);
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            PAD + 8.0,
            PAD + 16.0 * (k as f64 + 1.0),
            ser.label
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_contains_every_series() {
        let series = vec![
            Series {
                label: "a".into(),
                points: vec![(0.1, 0.2), (0.05, 0.1)],
            },
            Series {
                label: "b".into(),
                points: vec![(0.1, 0.0), (0.05, 0.01)],
            },
        ];
        let svg = chart("t", "h", "err", &series, true, &[1.0]);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("slope 1"));
    }
}
