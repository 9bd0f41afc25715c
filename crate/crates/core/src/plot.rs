//! Log-log SVG plots of mean MSE against n.

use std::fmt::Write as _;

use crate::analysis::{fit_loglog_unchecked, LogLogFit};
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = [
    "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf",
];

/// A reference curve `(n, value)`, drawn up to a vertical shift.
#[derive(Clone, Debug, PartialEq)]
pub struct Overlay {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plot {
    pub svg: String,
    pub fit: LogLogFit,
    pub annotation: String,
}

pub fn slope_annotation(fit: &LogLogFit) -> String {
    format!("slope = {:.4}", fit.slope)
}

/// Scatter of `(log10 n, log10 mse)` with its least squares line. Each
/// overlay is shifted to meet the fitted line at its smallest `n`.
pub fn render_loglog(title: &str, points: &[(f64, f64)], overlays: &[Overlay]) -> Result<Plot> {
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 2 {
        return Err(Error::invalid("plot needs at least two distinct n"));
    }
    let fit = fit_loglog_unchecked(points)?;
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.log10(), y.log10())).collect();

    let mut curves = Vec::new();
    for o in overlays {
        let Some(&(x0, y0)) = o.points.iter().min_by(|a, b| a.0.total_cmp(&b.0)) else {
            continue;
        };
        if !(x0 > 0.0 && y0 > 0.0) || o.points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
            return Err(Error::invalid(format!(
                "overlay `{}` has nonpositive values",
                o.name
            )));
        }
        let shift = fit.predict_log(x0.log10()) - y0.log10();
        let mut c: Vec<(f64, f64)> = o
            .points
            .iter()
            .map(|(x, y)| (x.log10(), y.log10() + shift))
            .collect();
        c.sort_by(|a, b| a.0.total_cmp(&b.0));
        curves.push((o.name.as_str(), c));
    }

    let (xmin, xmax) = (xs[0].log10(), xs[xs.len() - 1].log10());
    let fit_ends = [(xmin, fit.predict_log(xmin)), (xmax, fit.predict_log(xmax))];
    let all_y = logs
        .iter()
        .chain(&fit_ends)
        .chain(curves.iter().flat_map(|(_, c)| c.iter()))
        .map(|p| p.1);
    let (ymin, ymax) = all_y.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| {
        (a.min(y), b.max(y))
    });
    let pad_x = 0.05 * (xmax - xmin);
    let pad_y = 0.05 * (ymax - ymin).max(1e-6);
    let (x0, x1) = (xmin - pad_x, xmax + pad_x);
    let (y0, y1) = (ymin - pad_y, ymax + pad_y);
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * (WIDTH - LEFT - RIGHT);
    let py = |y: f64| HEIGHT - BOTTOM - (y - y0) / (y1 - y0) * (HEIGHT - TOP - BOTTOM);

    let annotation = slope_annotation(&fit);
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    )
    .unwrap();
    // axes and ticks
    let (bx, by) = (px(x0), py(y0));
    writeln!(
        s,
        r#"<path d="M{bx:.2} {:.2} L{bx:.2} {by:.2} L{:.2} {by:.2}" stroke="black" fill="none"/>"#,
        py(y1),
        px(x1)
    )
    .unwrap();
    for t in 0..=4 {
        let f = t as f64 / 4.0;
        let (xv, yv) = (xmin + f * (xmax - xmin), ymin + f * (ymax - ymin));
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xv:.2}</text>"#,
            px(xv),
            by + 18.0
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{yv:.2}</text>"#,
            bx - 6.0,
            py(yv) + 4.0
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">log10(n)</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 10.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">log10(MSE)</text>"#,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        (TOP + HEIGHT - BOTTOM) / 2.0
    )
    .unwrap();

    for (i, (name, c)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let d: Vec<String> = c
            .iter()
            .enumerate()
            .map(|(k, &(x, y))| {
                format!(
                    "{}{:.2} {:.2}",
                    if k == 0 { "M" } else { "L" },
                    px(x),
                    py(y)
                )
            })
            .collect();
        writeln!(
            s,
            r#"<path class="overlay" d="{}" stroke="{color}" stroke-dasharray="6 4" fill="none"/>"#,
            d.join(" ")
        )
        .unwrap();
        let ly = TOP + 36.0 + 16.0 * i as f64;
        writeln!(
            s,
            r#"<text x="{:.2}" y="{ly:.2}" fill="{color}">{}</text>"#,
            LEFT + 12.0,
            escape(name)
        )
        .unwrap();
    }
    writeln!(
        s,
        r##"<path class="fit" d="M{:.2} {:.2} L{:.2} {:.2}" stroke="#1f77b4" fill="none"/>"##,
        px(fit_ends[0].0),
        py(fit_ends[0].1),
        px(fit_ends[1].0),
        py(fit_ends[1].1)
    )
    .unwrap();
    for &(x, y) in &logs {
        writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="black"/>"#,
            px(x),
            py(y)
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}">{annotation}</text>"#,
        LEFT + 12.0,
        TOP + 16.0
    )
    .unwrap();
    s.push_str("</svg>\n");
    Ok(Plot {
        svg: s,
        fit,
        annotation,
    })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
