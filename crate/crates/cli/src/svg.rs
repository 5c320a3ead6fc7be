use std::fmt::Write;

use crate::report::RunReport;

const SIZE: f64 = 640.0;
const MARGIN: f64 = 56.0;
const BAND_COLORS: [&str; 6] = ["#c0392b", "#2471a3", "#229954", "#b7950b", "#7d3c98", "#566573"];
const UNASSIGNED: &str = "#909497";

fn color(band: Option<usize>) -> &'static str {
    band.map_or(UNASSIGNED, |k| BAND_COLORS[k.min(BAND_COLORS.len() - 1)])
}

/// Scatter of the resonances at `n` (all engines) over the predicted annuli and
/// the unit circle. Output is a pure function of the report.
pub fn plot_spectrum(report: &RunReport, n: usize) -> String {
    let entries: Vec<_> = report.spectra.iter().filter(|e| e.n == n).collect();
    let mut extent: f64 = 1.0;
    for e in &entries {
        extent = e.resonances.items.iter().map(|r| r.z.norm()).fold(extent, f64::max);
        extent = e.predictions.iter().map(|p| p.r_plus).filter(|r| r.is_finite()).fold(extent, f64::max);
    }
    let extent = 1.1 * extent;
    let c = SIZE / 2.0;
    let scale = (SIZE / 2.0 - MARGIN) / extent;
    let px = |x: f64| c + x * scale;
    let py = |y: f64| c - y * scale;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, "<desc>config_hash={} N={n}</desc>", report.config_hash);
    let _ = writeln!(s, r##"<rect width="{SIZE}" height="{SIZE}" fill="#ffffff"/>"##);
    let _ = writeln!(s, r#"<text x="{c}" y="24" text-anchor="middle" font-size="14">Resonances, N = {n}, V = {}</text>"#, xml_escape(&report.config.potential.tag()));

    // axes
    let lo = MARGIN / 2.0;
    let hi = SIZE - MARGIN / 2.0;
    let _ = writeln!(s, r##"<line x1="{lo}" y1="{c}" x2="{hi}" y2="{c}" stroke="#000000" stroke-width="0.8"/>"##);
    let _ = writeln!(s, r##"<line x1="{c}" y1="{lo}" x2="{c}" y2="{hi}" stroke="#000000" stroke-width="0.8"/>"##);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">Re z</text>"#, hi, c - 6.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}">Im z</text>"#, c + 6.0, lo + 10.0);
    for t in [-1.0, 1.0] {
        let _ = writeln!(s, r##"<line x1="{0:.3}" y1="{1:.3}" x2="{0:.3}" y2="{2:.3}" stroke="#000000"/>"##, px(t), c - 4.0, c + 4.0);
        let _ = writeln!(s, r#"<text x="{:.3}" y="{:.3}" text-anchor="middle">{t}</text>"#, px(t), c + 18.0);
        let _ = writeln!(s, r##"<line x1="{1:.3}" y1="{0:.3}" x2="{2:.3}" y2="{0:.3}" stroke="#000000"/>"##, py(t), c - 4.0, c + 4.0);
    }

    // unit circle and predicted annuli
    let _ = writeln!(s, r##"<circle cx="{c}" cy="{c}" r="{:.3}" fill="none" stroke="#000000" stroke-width="1"/>"##, scale);
    let mut preds: Vec<_> = entries.iter().flat_map(|e| e.predictions.iter().copied()).collect();
    preds.sort_by_key(|p| (p.k, p.r_minus.to_bits(), p.r_plus.to_bits()));
    preds.dedup();
    for p in &preds {
        let col = color(Some(p.k));
        if (p.r_plus - p.r_minus).abs() * scale > 0.5 {
            let mid = 0.5 * (p.r_plus + p.r_minus) * scale;
            let w = (p.r_plus - p.r_minus) * scale;
            let _ = writeln!(s, r#"<circle cx="{c}" cy="{c}" r="{mid:.3}" fill="none" stroke="{col}" stroke-opacity="0.18" stroke-width="{w:.3}"/>"#);
        }
        let radii = if p.r_minus == p.r_plus { vec![p.r_minus] } else { vec![p.r_minus, p.r_plus] };
        for r in radii {
            let _ = writeln!(s, r#"<circle cx="{c}" cy="{c}" r="{:.3}" fill="none" stroke="{col}" stroke-dasharray="4 3" stroke-width="0.8"/>"#, r * scale);
        }
    }

    // points: matrix engine as dots, determinant engine as crosses
    for e in &entries {
        for r in &e.resonances.items {
            let (x, y) = (px(r.z.re), py(r.z.im));
            let col = color(r.band);
            if e.engine == "determinant" {
                let d = 3.5;
                let _ = writeln!(s, r#"<path d="M{:.3} {:.3}L{:.3} {:.3}M{:.3} {:.3}L{:.3} {:.3}" stroke="{col}" stroke-width="1.4"/>"#, x - d, y - d, x + d, y + d, x - d, y + d, x + d, y - d);
            } else {
                let _ = writeln!(s, r#"<circle cx="{x:.3}" cy="{y:.3}" r="2.8" fill="{col}"/>"#);
            }
        }
    }

    // legend
    let mut ly = SIZE - 14.0 * (preds.len() as f64 + 2.0);
    let _ = writeln!(s, r#"<text x="8" y="{ly:.1}">● matrix engine   ✕ determinant engine</text>"#);
    for p in &preds {
        ly += 14.0;
        let _ = writeln!(s, r#"<text x="8" y="{ly:.1}" fill="{}">band {}: r− = {:.6}, r+ = {:.6}</text>"#, color(Some(p.k)), p.k, p.r_minus, p.r_plus);
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
