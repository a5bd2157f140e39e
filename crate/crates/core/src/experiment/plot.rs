//! Hand-written SVG line charts. Output depends only on the input values,
//! so identical data produce identical bytes.
//!
//! Axis mapping for a panel whose top edge is at `y0`:
//!
//! ```text
//! px = LEFT + (x − x_min) / (x_max − x_min) · PLOT_W     (LEFT + PLOT_W/2 if x_max = x_min)
//! py = y0 + TOP + (1 − v) · PLOT_H                        (value axis fixed to [0, 1])
//! ```

use std::fmt::Write as _;

use super::table::{IterationSeries, MetricsTable};

pub const WIDTH: f64 = 640.0;
pub const PANEL_HEIGHT: f64 = 400.0;
pub const LEFT: f64 = 60.0;
pub const RIGHT: f64 = 140.0;
pub const TOP: f64 = 30.0;
pub const BOTTOM: f64 = 40.0;
pub const PLOT_W: f64 = WIDTH - LEFT - RIGHT;
pub const PLOT_H: f64 = PANEL_HEIGHT - TOP - BOTTOM;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub color: String,
    /// (iteration, value) pairs.
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub series: Vec<Series>,
}

/// Shared x range over every series of every panel, `None` when empty.
fn x_range(panels: &[Panel]) -> Option<(f64, f64)> {
    let xs = panels
        .iter()
        .flat_map(|p| &p.series)
        .flat_map(|s| s.points.iter().map(|p| p.0));
    xs.fold(None, |acc, x| match acc {
        None => Some((x, x)),
        Some((lo, hi)) => Some((lo.min(x), hi.max(x))),
    })
}

pub fn map_x(x: f64, range: (f64, f64)) -> f64 {
    let (lo, hi) = range;
    if hi > lo {
        LEFT + (x - lo) / (hi - lo) * PLOT_W
    } else {
        LEFT + PLOT_W / 2.0
    }
}

pub fn map_y(v: f64, panel_top: f64) -> f64 {
    panel_top + TOP + (1.0 - v) * PLOT_H
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders panels stacked vertically, sharing one x range.
pub fn render(panels: &[Panel]) -> String {
    let height = PANEL_HEIGHT * panels.len().max(1) as f64;
    let range = x_range(panels);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{height}" fill="white"/>"#);
    for (pi, panel) in panels.iter().enumerate() {
        let top = pi as f64 * PANEL_HEIGHT;
        let (x0, x1) = (LEFT, LEFT + PLOT_W);
        let (y_top, y_bot) = (top + TOP, top + TOP + PLOT_H);
        let _ = writeln!(s, r#"<g class="panel">"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{}</text>"#,
            LEFT + PLOT_W / 2.0,
            top + TOP - 10.0,
            escape(&panel.title)
        );
        let _ = writeln!(
            s,
            r#"<path d="M{x0:.2},{y_top:.2} L{x0:.2},{y_bot:.2} L{x1:.2},{y_bot:.2}" fill="none" stroke="black"/>"#
        );
        for i in 0..=4 {
            let v = i as f64 / 4.0;
            let y = map_y(v, top);
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/><line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"##,
                x0 - 4.0,
                x0 - 6.0,
                y + 4.0
            );
        }
        if let Some((lo, hi)) = range {
            for x in if hi > lo { vec![lo, hi] } else { vec![lo] } {
                let px = map_x(x, (lo, hi));
                let _ = writeln!(
                    s,
                    r#"<line x1="{px:.2}" y1="{y_bot:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{x}</text>"#,
                    y_bot + 4.0,
                    y_bot + 16.0
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">iteration</text>"#,
            LEFT + PLOT_W / 2.0,
            y_bot + 32.0
        );
        for (si, series) in panel.series.iter().enumerate() {
            let dash = if series.dashed { r#" stroke-dasharray="4,3""# } else { "" };
            if let (Some(range), false) = (range, series.points.is_empty()) {
                let pts: Vec<String> = series
                    .points
                    .iter()
                    .map(|&(x, v)| format!("{:.2},{:.2}", map_x(x, range), map_y(v, top)))
                    .collect();
                let _ = writeln!(
                    s,
                    r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
                    pts.join(" "),
                    series.color
                );
            }
            let ly = y_top + 14.0 * si as f64 + 6.0;
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}">{}</text>"#,
                x1 + 10.0,
                x1 + 28.0,
                series.color,
                x1 + 32.0,
                ly + 4.0,
                escape(&series.label)
            );
        }
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

fn points(iterations: &[usize], values: &[f64]) -> Vec<(f64, f64)> {
    iterations.iter().zip(values).map(|(&i, &v)| (i as f64, v)).collect()
}

/// Training-curve panel: one line per reward plus a dashed nd_fraction line.
pub fn training_panel(title: &str, series: &IterationSeries, reward_names: &[String]) -> Panel {
    let mut out: Vec<Series> = series
        .means
        .iter()
        .enumerate()
        .map(|(j, m)| Series {
            label: reward_names
                .get(j)
                .cloned()
                .unwrap_or_else(|| format!("mean_r{}", j + 1)),
            color: color(j).to_string(),
            points: points(&series.iterations, m),
            dashed: false,
        })
        .collect();
    out.push(Series {
        label: "nd_fraction".into(),
        color: "#000000".into(),
        points: points(&series.iterations, &series.nd_fraction),
        dashed: true,
    });
    Panel {
        title: title.to_string(),
        series: out,
    }
}

/// SVG for one metrics table.
pub fn plot_table(table: &MetricsTable, title: &str) -> String {
    render(&[training_panel(title, &table.per_iteration(), &[])])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_panel_still_has_axes() {
        let svg = render(&[Panel {
            title: "t".into(),
            series: vec![],
        }]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("<path d=\"M60.00,30.00 L60.00,360.00 L500.00,360.00\""));
        assert!(!svg.contains("polyline"));
    }

    #[test]
    fn mapping_corners() {
        assert_eq!(map_x(0.0, (0.0, 10.0)), LEFT);
        assert_eq!(map_x(10.0, (0.0, 10.0)), LEFT + PLOT_W);
        assert_eq!(map_x(3.0, (3.0, 3.0)), LEFT + PLOT_W / 2.0);
        assert_eq!(map_y(1.0, 0.0), TOP);
        assert_eq!(map_y(0.0, PANEL_HEIGHT), PANEL_HEIGHT + TOP + PLOT_H);
    }

    #[test]
    fn labels_are_escaped() {
        let svg = render(&[Panel {
            title: "a<b".into(),
            series: vec![],
        }]);
        assert!(svg.contains("a&lt;b"));
    }
}
