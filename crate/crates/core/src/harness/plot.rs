//! Static SVG line charts of sweep summaries.

use std::fmt::Write;

use super::{SchemeId, SummaryRow};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: [f64; 4] = [40.0, 130.0, 55.0, 70.0]; // top, right, bottom, left
const COLORS: [&str; 5] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Renders one chart; points with non-finite coordinates are skipped.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let finite = |p: &&(f64, f64)| p.0.is_finite() && p.1.is_finite();
    let (x0, x1) = padded_range(series.iter().flat_map(|s| s.points.iter().filter(finite).map(|p| p.0)));
    let (y0, y1) = padded_range(series.iter().flat_map(|s| s.points.iter().filter(finite).map(|p| p.1)));
    let [top, right, bottom, left] = MARGIN;
    let pw = WIDTH - left - right;
    let ph = HEIGHT - top - bottom;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        left + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let _ = writeln!(
            s,
            r##"<line x1="{0:.1}" y1="{1}" x2="{0:.1}" y2="{2}" stroke="#ddd"/><text x="{0:.1}" y="{3}" text-anchor="middle">{4:.3}</text>"##,
            sx(xv),
            top,
            top + ph,
            top + ph + 16.0,
            xv
        );
        let _ = writeln!(
            s,
            r##"<line x1="{0}" y1="{1:.1}" x2="{2}" y2="{1:.1}" stroke="#ddd"/><text x="{3}" y="{4:.1}" text-anchor="end">{5:.3}</text>"##,
            left,
            sy(yv),
            left + pw,
            left - 6.0,
            sy(yv) + 4.0,
            yv
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        top + ph / 2.0,
        escape(y_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .filter(finite)
            .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        for p in &pts {
            let (x, y) = p.split_once(',').unwrap_or(("0", "0"));
            let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#);
        }
        let ly = top + 10.0 + 18.0 * i as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// `(file name, svg)` for the BMI, failed-run and k̄ panels of a sweep
/// over `param` (`cd`, `hv`, ...).
pub fn summary_charts(rows: &[SummaryRow], param: &str, unit: &str) -> Vec<(String, String)> {
    let mut schemes: Vec<SchemeId> = Vec::new();
    for r in rows {
        if !schemes.contains(&r.scheme) {
            schemes.push(r.scheme);
        }
    }
    let pick = |f: &dyn Fn(&SummaryRow) -> f64| -> Vec<Series> {
        schemes
            .iter()
            .map(|&s| Series {
                label: s.name().to_string(),
                points: rows.iter().filter(|r| r.scheme == s).map(|r| (r.sweep_value, f(r))).collect(),
            })
            .collect()
    };
    let x_label = format!("{param} [{unit}]");
    vec![
        (
            format!("bmi_vs_{param}.svg"),
            line_chart("final BMI", &x_label, "BMI [bit/symbol]", &pick(&|r| r.final_bmi_mean)),
        ),
        (
            format!("failed_vs_{param}.svg"),
            line_chart("failed runs", &x_label, "failed [%]", &pick(&|r| r.failed_pct)),
        ),
        (
            format!("kbar_vs_{param}.svg"),
            line_chart("mean frame index", &x_label, "k", &pick(&|r| r.k_bar.unwrap_or(f64::NAN))),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_every_series() {
        let rows: Vec<SummaryRow> = [(0.0, SchemeId::Cma, 10.0), (1.0, SchemeId::Cma, 20.0), (0.0, SchemeId::VaeBatch, 0.0)]
            .iter()
            .map(|&(v, s, f)| SummaryRow {
                sweep_value: v,
                scheme: s,
                failed_pct: f,
                k_bar: None,
                final_bmi_mean: 5.5,
            })
            .collect();
        let charts = summary_charts(&rows, "cd", "km");
        let names: Vec<&str> = charts.iter().map(|c| c.0.as_str()).collect();
        assert_eq!(names, ["bmi_vs_cd.svg", "failed_vs_cd.svg", "kbar_vs_cd.svg"]);
        for (_, svg) in &charts {
            assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
            assert_eq!(svg.matches("<polyline").count(), 2);
            assert!(!svg.contains("NaN"));
        }
    }
}
