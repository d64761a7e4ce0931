//! Static SVG line plots of one statistic from a report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::report::{RiskReport, Row};
use crate::CliError;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 220.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    /// Statistic to draw; the first one in the report when `None`.
    pub statistic: Option<String>,
}

/// One polyline per `(μ, u)` against `n`, or per `u` against `μ` for
/// reports without `n`. The x axis is logarithmic; the y axis is too when
/// every value is positive.
pub fn emit_plot(report: &RiskReport, spec: &PlotSpec) -> Result<String, CliError> {
    let statistic = match &spec.statistic {
        Some(s) => s.clone(),
        None => report
            .rows
            .first()
            .map(|r| r.statistic.clone())
            .ok_or_else(|| CliError::Config("report has no rows to plot".into()))?,
    };
    let rows: Vec<&Row> = report.rows.iter().filter(|r| r.statistic == statistic).collect();
    if rows.len() < 2 {
        return Err(CliError::Config(format!("need at least two '{statistic}' rows to plot, found {}", rows.len())));
    }
    let by_n = rows.iter().all(|r| r.n.is_some());
    let x_of = |r: &Row| if by_n { r.n.unwrap() as f64 } else { r.mu };
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in &rows {
        let key = if by_n {
            format!("mu={} u=({}, {})", r.mu, r.u.0, r.u.1)
        } else {
            format!("u=({}, {})", r.u.0, r.u.1)
        };
        series.entry(key).or_default().push((x_of(r), r.value));
    }
    for pts in series.values_mut() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    if rows.iter().any(|r| !(x_of(r) > 0.0) || !r.value.is_finite()) {
        return Err(CliError::Config("plot needs positive x values and finite y values".into()));
    }
    let log_y = rows.iter().all(|r| r.value > 0.0);
    let ty = |v: f64| if log_y { v.log10() } else { v };

    let (mut x0, mut x1) = bounds(rows.iter().map(|r| x_of(r).log10()));
    let (mut y0, mut y1) = bounds(rows.iter().map(|r| ty(r.value)));
    pad(&mut x0, &mut x1);
    pad(&mut y0, &mut y1);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x.log10() - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| TOP + plot_h - (ty(y) - y0) / (y1 - y0) * plot_h;

    let mut svg = String::new();
    let w = &mut svg;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );

    let mut xs: Vec<f64> = rows.iter().map(|r| x_of(r)).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    for x in xs {
        let px = sx(x);
        let _ = writeln!(
            w,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 18.0,
            x
        );
    }
    for k in 0..=4 {
        let t = y0 + (y1 - y0) * k as f64 / 4.0;
        let value = if log_y { 10f64.powf(t) } else { t };
        let py = TOP + plot_h - (t - y0) / (y1 - y0) * plot_h;
        let _ = writeln!(
            w,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{value:.3e}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0,
        if by_n { "n (log scale)" } else { "mu (log scale)" }
    );
    let _ = writeln!(
        w,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(&statistic),
        if log_y { " (log scale)" } else { "" }
    );

    for (i, (label, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            w,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        for &(x, y) in pts {
            let _ = writeln!(w, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, sx(x), sy(y));
        }
        let ly = TOP + 12.0 + 16.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            w,
            r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{ly:.2}">{}</text>"#,
            ly - 4.0,
            lx + 20.0,
            ly - 4.0,
            lx + 25.0,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn pad(lo: &mut f64, hi: &mut f64) {
    let span = *hi - *lo;
    let margin = if span > 0.0 { 0.05 * span } else { 0.5 };
    *lo -= margin;
    *hi += margin;
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::resolve;

    fn report(rows: &[(Option<u32>, f64, f64)]) -> RiskReport {
        let cfg = resolve("convergence", &Default::default(), &Default::default()).unwrap();
        let mut r = RiskReport::new(&cfg, &[]);
        for &(n, u_x, v) in rows {
            r.rows.push(Row {
                n,
                mu: 0.75,
                u: (u_x, 0.0),
                statistic: "forward".into(),
                value: v,
                error_bound: 0.0,
                extra: vec![],
            });
        }
        r
    }

    #[test]
    fn one_polyline_per_u() {
        let r = report(&[(Some(16), 1.0, 0.1), (Some(64), 1.0, 0.02), (Some(16), 0.0, 0.05), (Some(64), 0.0, 0.01)]);
        let svg = emit_plot(&r, &PlotSpec { statistic: None }).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("u=(1, 0)"));
        assert_eq!(svg, emit_plot(&r, &PlotSpec { statistic: Some("forward".into()) }).unwrap());
    }

    #[test]
    fn too_few_rows_is_an_error() {
        assert!(emit_plot(&report(&[]), &PlotSpec { statistic: None }).is_err());
        assert!(emit_plot(&report(&[(Some(16), 0.0, 0.1)]), &PlotSpec { statistic: None }).is_err());
        let r = report(&[(Some(16), 1.0, 0.1), (Some(64), 1.0, 0.02)]);
        assert!(emit_plot(&r, &PlotSpec { statistic: Some("tv".into()) }).is_err());
    }

    #[test]
    fn linear_y_when_values_touch_zero() {
        let r = report(&[(Some(16), 1.0, 0.0), (Some(64), 1.0, 0.5)]);
        let svg = emit_plot(&r, &PlotSpec { statistic: None }).unwrap();
        assert!(!svg.contains("forward (log scale)"));
    }
}
