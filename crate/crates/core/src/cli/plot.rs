use std::fmt::Write as _;

use crate::rdf::RdfVector;

/// Self-contained SVG line plot of one or more RDFs sharing an r axis.
pub fn rdf_svg(series: &[(&str, &RdfVector)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let r_max = series.iter().map(|(_, g)| g.r_max).fold(0.0, f64::max).max(1e-12);
    let g_max = series
        .iter()
        .flat_map(|(_, g)| g.values.iter().copied())
        .fold(1.0, f64::max)
        * 1.05;
    let x = |r: f64| M + (W - 2.0 * M) * r / r_max;
    let y = |g: f64| H - M - (H - 2.0 * M) * g / g_max;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{M} {M} V{} H{}" fill="none" stroke="black"/>"#,
        H - M,
        W - M
    );
    let _ = writeln!(
        s,
        r##"<line x1="{M}" x2="{}" y1="{:.2}" y2="{:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
        W - M,
        y(1.0),
        y(1.0)
    );
    for i in 0..=4 {
        let r = r_max * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" font-size="12" text-anchor="middle">{r:.2}</text>"#,
            x(r),
            H - M + 18.0
        );
        let g = g_max * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" font-size="12" text-anchor="end">{g:.1}</text>"#,
            M - 6.0,
            y(g) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">r</text>"#,
        W / 2.0,
        H - 10.0
    );
    let _ = writeln!(s, r#"<text x="14" y="{}" font-size="14">g(r)</text>"#, H / 2.0);
    for (i, (label, g)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = g
            .r_centers()
            .iter()
            .zip(&g.values)
            .map(|(r, v)| format!("{:.2},{:.2}", x(*r), y(*v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" fill="{color}">{}</text>"#,
            W - M - 120.0,
            M + 16.0 * (i as f64 + 1.0),
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
