//! Minimal hand-written SVG charts. No layout engine, just fixed margins.

use std::fmt::Write as _;

const W: f64 = 720.0;
const H: f64 = 400.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    s
}

struct Scale {
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, a: f64, b: f64) -> Self {
        let (lo, hi) = if hi - lo < 1e-12 { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
        Scale { lo, hi, a, b }
    }

    fn map(&self, v: f64) -> f64 {
        self.a + (v - self.lo) / (self.hi - self.lo) * (self.b - self.a)
    }
}

fn y_axis(s: &mut String, ys: &Scale, x0: f64, x1: f64) {
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{}" x2="{x0}" y2="{}" stroke="black"/>"#, ys.a, ys.b);
    for i in 0..=4 {
        let v = ys.lo + (ys.hi - ys.lo) * i as f64 / 4.0;
        let y = ys.map(v);
        let _ = writeln!(s, r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#dddddd"/>"##);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 4.0, y + 4.0, tick(v));
    }
}

fn tick(v: f64) -> String {
    let r = format!("{v:.3}");
    let r = r.trim_end_matches('0').trim_end_matches('.');
    if r == "-0" { "0".into() } else { r.to_string() }
}

fn legend(s: &mut String, entries: &[(String, &str, bool)]) {
    let x = W - MARGIN_R + 12.0;
    for (i, (label, color, dashed)) in entries.iter().enumerate() {
        let y = MARGIN_T + 14.0 + 16.0 * i as f64;
        let dash = if *dashed { r#" stroke-dasharray="4,3""# } else { "" };
        let _ = writeln!(
            s,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"{dash}/>"#,
            x + 18.0
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x + 22.0, y + 4.0, escape(label));
    }
}

/// Grouped bars of initial vs targeted weight per control unit.
pub fn weight_bars(ids: &[String], initial: &[f64], targeted: &[f64], title: &str) -> String {
    let mut s = header(title);
    let n = ids.len().min(initial.len()).min(targeted.len());
    let top = initial.iter().chain(targeted).fold(0.0f64, |m, &v| m.max(v)).max(1e-9);
    let ys = Scale::new(0.0, top, H - MARGIN_B, MARGIN_T);
    let (x0, x1) = (MARGIN_L, W - MARGIN_R);
    y_axis(&mut s, &ys, x0, x1);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{}" x2="{x1}" y2="{}" stroke="black"/>"#, ys.a, ys.a);
    let group = (x1 - x0) / n.max(1) as f64;
    let bar = group * 0.35;
    for i in 0..n {
        let gx = x0 + group * i as f64 + group * 0.15;
        for (k, v) in [initial[i], targeted[i]].into_iter().enumerate() {
            let y = ys.map(v);
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{y:.2}" width="{bar:.2}" height="{:.2}" fill="{}"/>"#,
                gx + bar * k as f64,
                ys.a - y,
                PALETTE[k]
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            gx + bar,
            ys.a + 14.0,
            escape(&ids[i])
        );
    }
    legend(&mut s, &[("initial".into(), PALETTE[0], false), ("targeted".into(), PALETTE[1], false)]);
    s.push_str("</svg>\n");
    s
}

/// Treated trajectory (black), controls (grey), post-period counterfactuals
/// (colored, dashed) and a dashed vertical marker at the treatment time.
pub fn trajectory(
    treated: &[f64],
    controls: &[Vec<f64>],
    counterfactuals: &[(String, Vec<(usize, f64)>)],
    t0: usize,
    title: &str,
) -> String {
    let mut s = header(title);
    let t = treated.len().max(2);
    let all = treated
        .iter()
        .chain(controls.iter().flatten())
        .chain(counterfactuals.iter().flat_map(|c| c.1.iter().map(|p| &p.1)))
        .copied()
        .filter(|v| v.is_finite());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) };
    let ys = Scale::new(lo, hi, H - MARGIN_B, MARGIN_T);
    let xs = Scale::new(0.0, (t - 1) as f64, MARGIN_L, W - MARGIN_R);
    y_axis(&mut s, &ys, MARGIN_L, W - MARGIN_R);
    let _ = writeln!(s, r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, xs.a, ys.a, xs.b, ys.a);
    for i in 0..=4 {
        let p = ((t - 1) as f64 * i as f64 / 4.0).round();
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            xs.map(p),
            ys.a + 14.0,
            p as usize + 1
        );
    }
    let path = |pts: &mut dyn Iterator<Item = (f64, f64)>| -> String {
        let mut d = String::new();
        for (k, (x, y)) in pts.enumerate() {
            let _ = write!(d, "{}{:.2},{:.2} ", if k == 0 { "M" } else { "L" }, xs.map(x), ys.map(y));
        }
        d.trim_end().to_string()
    };
    for c in controls {
        let d = path(&mut c.iter().enumerate().map(|(i, v)| (i as f64, *v)));
        let _ = writeln!(s, r##"<path d="{d}" fill="none" stroke="#bbbbbb" stroke-width="1"/>"##);
    }
    let d = path(&mut treated.iter().enumerate().map(|(i, v)| (i as f64, *v)));
    let _ = writeln!(s, r#"<path d="{d}" fill="none" stroke="black" stroke-width="2"/>"#);
    let mut entries = vec![("treated".to_string(), "black", false), ("controls".to_string(), "#bbbbbb", false)];
    for (k, (label, pts)) in counterfactuals.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let d = path(&mut pts.iter().map(|(p, v)| (*p as f64, *v)));
        let _ = writeln!(
            s,
            r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="2" stroke-dasharray="4,3"/>"#
        );
        entries.push((label.clone(), color, true));
    }
    // Marker halfway between the last pre period and the first post period.
    let xm = xs.map(t0 as f64 - 0.5);
    let _ = writeln!(
        s,
        r#"<line x1="{xm:.2}" y1="{}" x2="{xm:.2}" y2="{}" stroke="black" stroke-dasharray="6,4"/>"#,
        ys.a, ys.b
    );
    legend(&mut s, &entries);
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bars_are_well_formed() {
        let ids = vec!["a".to_string(), "b<c".to_string()];
        let s = weight_bars(&ids, &[0.4, 0.6], &[0.5, 0.5], "w & t");
        assert!(s.starts_with("<?xml"));
        assert!(s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<rect x=").count(), 4);
        assert!(s.contains("b&lt;c") && s.contains("w &amp; t"));
    }

    #[test]
    fn trajectory_has_marker() {
        let s = trajectory(&[1.0, 2.0, 3.0], &[vec![1.0, 1.5, 2.0]], &[("TSC".into(), vec![(2, 2.5)])], 2, "x");
        assert!(s.contains("stroke-dasharray=\"6,4\""));
        assert_eq!(s.matches("<path").count(), 3);
    }
}
