use std::fmt::Write as _;
use std::path::Path;

use super::report::{write_text, CellSummary, ExperimentReport};
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1b6ca8", "#d1495b", "#2e933c", "#8e5572", "#edae49", "#444444"];

struct Series {
    label: String,
    points: Vec<(f64, f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders per-cell means as an SVG document: one polyline per front-end,
/// with whiskers of one standard deviation. The x axis is the split when
/// the cells carry one, the receptive field otherwise.
pub fn render_svg(report: &ExperimentReport) -> Result<String> {
    let cells = report.cells();
    if cells.is_empty() {
        return Err(Error::Invalid("nothing to plot".into()));
    }
    let by_split = cells.iter().all(|c| c.split.is_some());
    let x_of = |c: &CellSummary| -> f64 {
        if by_split {
            (c.split.unwrap_or(1) as f64).log2()
        } else {
            c.receptive_field as f64
        }
    };
    let datasets: Vec<&str> = cells.iter().fold(Vec::new(), |mut v, c| {
        if !v.contains(&c.dataset.as_str()) {
            v.push(&c.dataset);
        }
        v
    });
    let mut series: Vec<Series> = Vec::new();
    for c in &cells {
        let label = if datasets.len() > 1 {
            format!("{}/{}", c.dataset, c.frontend)
        } else {
            c.frontend.to_string()
        };
        let point = (x_of(c), c.mean, c.std);
        match series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push(point),
            None => series.push(Series {
                label,
                points: vec![point],
            }),
        }
    }
    for s in &mut series {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    let mut ticks: Vec<(f64, String)> = Vec::new();
    for c in &cells {
        let x = x_of(c);
        if ticks.iter().any(|(t, _)| *t == x) {
            continue;
        }
        let label = match c.split {
            Some(split) if by_split => format!("{split} ({})", c.train_size),
            _ => c.receptive_field.to_string(),
        };
        ticks.push((x, label));
    }
    ticks.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (x_min, x_max) = (ticks[0].0, ticks[ticks.len() - 1].0);
    let span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| {
        if x_max > x_min {
            LEFT + (x - x_min) / span * plot_w
        } else {
            LEFT + plot_w / 2.0
        }
    };
    let py = |y: f64| TOP + (1.0 - y.clamp(0.0, 1.0)) * plot_h;

    let mut svg = String::new();
    let w = &mut svg;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (LEFT, LEFT + plot_w, TOP, TOP + plot_h);
    let _ = writeln!(w, r#"<g class="axes" stroke="black" stroke-width="1">"#);
    let _ = writeln!(w, r#"<line x1="{x0:.2}" y1="{y1:.2}" x2="{x1:.2}" y2="{y1:.2}"/>"#);
    let _ = writeln!(w, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}"/>"#);
    let _ = writeln!(w, "</g>");
    for (x, label) in &ticks {
        let x = px(*x);
        let _ = writeln!(
            w,
            r#"<line x1="{x:.2}" y1="{y1:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y1 + 5.0,
            y1 + 20.0,
            escape(label)
        );
    }
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let y = py(v);
        let _ = writeln!(
            w,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0
        );
    }
    let x_title = if by_split { "split" } else { "context size" };
    let _ = writeln!(
        w,
        r#"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle">{x_title}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        w,
        r#"<text class="y-label" x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">accuracy</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let _ = writeln!(w, r#"<g class="series" data-label="{}" stroke="{color}" fill="{color}">"#, escape(&s.label));
        if s.points.len() > 1 {
            let pts: Vec<String> = s.points.iter().map(|&(x, y, _)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            let _ = writeln!(w, r#"<polyline fill="none" stroke-width="2" points="{}"/>"#, pts.join(" "));
        }
        for &(x, y, sd) in &s.points {
            let (cx, cy) = (px(x), py(y));
            let _ = writeln!(
                w,
                r#"<line class="whisker" x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}"/><circle cx="{cx:.2}" cy="{cy:.2}" r="3"/>"#,
                py(y + sd),
                py(y - sd)
            );
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let _ = writeln!(
            w,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke-width="2"/><text x="{:.2}" y="{:.2}" stroke="none">{}</text>"#,
            x1 + 15.0,
            x1 + 35.0,
            x1 + 40.0,
            ly + 4.0,
            escape(&s.label)
        );
        let _ = writeln!(w, "</g>");
    }
    let _ = writeln!(w, "</svg>");
    Ok(svg)
}

pub fn emit_plot(report: &ExperimentReport, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &render_svg(report)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::report::ResultRow;
    use crate::frontend::FrontEndKind;

    fn row(frontend: FrontEndKind, config: &str, rf: usize, split: Option<usize>, seed: u64, accuracy: f64) -> ResultRow {
        ResultRow {
            experiment: "x".into(),
            dataset: "d".into(),
            frontend,
            config: config.into(),
            receptive_field: rf,
            split,
            fold: None,
            seed,
            accuracy,
            evaluated: 10,
            train_size: split.map_or(100, |s| 6 * s),
        }
    }

    #[test]
    fn one_polyline_per_frontend() {
        let mut rows = Vec::new();
        for f in FrontEndKind::ALL {
            for (c, rf) in [("C1", 1), ("C2", 9), ("C3", 21), ("C4", 21), ("C5", 61)] {
                rows.push(row(f, c, rf, None, 0, 0.5));
            }
        }
        let svg = render_svg(&ExperimentReport { rows, notes: vec![] }).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(svg.contains(">context size<") && svg.contains(">accuracy<"));
        let first = svg.split("<polyline").nth(1).unwrap();
        let points = first.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(points.split(' ').count(), 5);
    }

    #[test]
    fn single_cell_has_no_segment() {
        let svg = render_svg(&ExperimentReport {
            rows: vec![row(FrontEndKind::Allo, "C5", 61, None, 0, 0.9)],
            notes: vec![],
        })
        .unwrap();
        assert_eq!(svg.matches("<polyline").count(), 0);
        assert_eq!(svg.matches("<circle").count(), 1);
    }

    #[test]
    fn split_axis_labels_training_size() {
        let rows = [32, 64].iter().map(|&s| row(FrontEndKind::Allo, "C5", 61, Some(s), 0, 0.8)).collect();
        let svg = render_svg(&ExperimentReport { rows, notes: vec![] }).unwrap();
        assert!(svg.contains(">split<"));
        assert!(svg.contains(">32 (192)<"));
    }

    #[test]
    fn empty_report_is_an_error() {
        assert!(render_svg(&ExperimentReport::default()).is_err());
    }
}
