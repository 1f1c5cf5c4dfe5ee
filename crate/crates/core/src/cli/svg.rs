use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 320.0;
const PAD_L: f64 = 70.0;
const PAD_R: f64 = 20.0;
const PAD_T: f64 = 30.0;
const PAD_B: f64 = 40.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub series: Vec<Series>,
    pub markers: Vec<(f64, f64)>,
}

fn extent(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn panel(out: &mut String, p: &Panel, top: f64) {
    let all = || p.series.iter().flat_map(|s| s.points.iter()).chain(p.markers.iter());
    let (x0, x1) = extent(all().map(|q| q.0));
    let (y0, y1) = extent(all().map(|q| q.1));
    let sx = |x: f64| PAD_L + (x - x0) / (x1 - x0) * (W - PAD_L - PAD_R);
    let sy = |y: f64| top + PAD_T + (y1 - y) / (y1 - y0) * (H - PAD_T - PAD_B);
    let bottom = top + H - PAD_B;
    let _ = writeln!(
        out,
        r##"<text x="{}" y="{}" font-size="14" text-anchor="middle">{}</text>"##,
        W / 2.0,
        top + 18.0,
        xml(&p.title)
    );
    let _ = writeln!(
        out,
        r##"<rect x="{PAD_L}" y="{}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        top + PAD_T,
        W - PAD_L - PAD_R,
        H - PAD_T - PAD_B
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let _ = writeln!(
            out,
            r##"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"##,
            sx(xv),
            bottom + 14.0,
            tick(xv)
        );
        let _ = writeln!(
            out,
            r##"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"##,
            PAD_L - 4.0,
            sy(yv) + 3.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        out,
        r##"<text x="{}" y="{}" font-size="11" text-anchor="middle">{}</text>"##,
        W / 2.0,
        bottom + 32.0,
        xml(&p.x_label)
    );
    if y0 < 0.0 && y1 > 0.0 {
        let _ = writeln!(
            out,
            r##"<line x1="{PAD_L}" y1="{:.1}" x2="{}" y2="{:.1}" stroke="#bbb"/>"##,
            sy(0.0),
            W - PAD_R,
            sy(0.0)
        );
    }
    for (i, s) in p.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|q| q.0.is_finite() && q.1.is_finite())
            .map(|q| format!("{:.2},{:.2}", sx(q.0), sy(q.1)))
            .collect();
        let dash = if s.dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(
            out,
            r##"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"##,
            pts.join(" ")
        );
        let _ = writeln!(
            out,
            r##"<text x="{}" y="{:.1}" font-size="10" fill="{color}">{}</text>"##,
            PAD_L + 8.0,
            top + PAD_T + 14.0 + 12.0 * i as f64,
            xml(&s.label)
        );
    }
    for &(x, y) in &p.markers {
        if x.is_finite() && y.is_finite() {
            let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#000"/>"##, sx(x), sy(y));
        }
    }
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Stacked line charts.
pub fn render(panels: &[Panel]) -> String {
    let height = H * panels.len().max(1) as f64;
    let mut out = format!(
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{height}" viewBox="0 0 {W} {height}" font-family="sans-serif">
<rect width="100%" height="100%" fill="#fff"/>
"##
    );
    for (i, p) in panels.iter().enumerate() {
        panel(&mut out, p, H * i as f64);
    }
    out.push_str("</svg>\n");
    out
}
