//! Deterministic SVG line charts of trajectories.
//!
//! Output depends only on the inputs: fixed 960x540 viewport, fixed palette,
//! coordinates printed with two decimals and no timestamps.

use std::fmt::Write;

use chrono::Days;
use epicontrol_core::Trajectory;
use thiserror::Error;

pub const WIDTH: f64 = 960.0;
pub const HEIGHT: f64 = 540.0;

const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 190.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 45.0;
const PANEL_GAP: f64 = 55.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChartError {
    #[error("nothing to plot")]
    Empty,
    #[error("series {0:?} does not share the grid of the first series")]
    GridMismatch(String),
    #[error("series {0:?} has fewer than two samples")]
    TooShort(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Panel {
    Cumulative,
    Daily,
}

impl Panel {
    fn title(self) -> &'static str {
        match self {
            Panel::Cumulative => "Cumulative cases",
            Panel::Daily => "Daily cases",
        }
    }

    fn values(self, t: &Trajectory) -> &[f64] {
        match self {
            Panel::Cumulative => &t.cumulative,
            Panel::Daily => &t.daily,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LabeledTrajectory {
    pub label: String,
    pub trajectory: Trajectory,
    /// Dotted line, used for observed data.
    pub dotted: bool,
}

impl LabeledTrajectory {
    pub fn new(label: impl Into<String>, trajectory: Trajectory) -> Self {
        LabeledTrajectory {
            label: label.into(),
            trajectory,
            dotted: false,
        }
    }

    pub fn dotted(mut self) -> Self {
        self.dotted = true;
        self
    }
}

#[derive(Debug, Clone)]
pub struct ChartStyle {
    pub title: String,
    /// Stacked top to bottom.
    pub panels: Vec<Panel>,
}

impl ChartStyle {
    pub fn new(title: impl Into<String>, panels: Vec<Panel>) -> Self {
        ChartStyle {
            title: title.into(),
            panels,
        }
    }
}

impl Default for ChartStyle {
    fn default() -> Self {
        ChartStyle::new("", vec![Panel::Daily, Panel::Cumulative])
    }
}

/// Step from {1, 2, 5} x 10^k giving about `target` intervals over `span`.
fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let magnitude = 10f64.powf(raw.log10().floor());
    let residual = raw / magnitude;
    let nice = if residual <= 1.0 {
        1.0
    } else if residual <= 2.0 {
        2.0
    } else if residual <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * magnitude
}

fn tick_label(value: f64, step: f64) -> String {
    let decimals = if step >= 1.0 {
        0
    } else {
        (-step.log10().floor()) as usize
    };
    let text = format!("{value:.decimals$}");
    if text.starts_with('-') && text[1..].chars().all(|c| c == '0' || c == '.') {
        text[1..].to_owned()
    } else {
        text
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Frame {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    y_max: f64,
    y_min: f64,
    last_index: f64,
}

impl Frame {
    fn x(&self, index: usize) -> f64 {
        self.left + self.width * index as f64 / self.last_index
    }

    fn y(&self, value: f64) -> f64 {
        self.top + self.height * (self.y_max - value) / (self.y_max - self.y_min)
    }
}

pub fn emit_svg(series: &[LabeledTrajectory], style: &ChartStyle) -> Result<String, ChartError> {
    let first = series.first().ok_or(ChartError::Empty)?;
    if style.panels.is_empty() {
        return Err(ChartError::Empty);
    }
    for s in series {
        if s.trajectory.len() < 2 {
            return Err(ChartError::TooShort(s.label.clone()));
        }
        if !s.trajectory.same_grid(&first.trajectory) {
            return Err(ChartError::GridMismatch(s.label.clone()));
        }
    }
    let grid = &first.trajectory;
    let n = grid.len();

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(
        svg,
        r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##
    );
    if !style.title.is_empty() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="28" font-size="18" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / 2.0,
            escape(&style.title)
        );
    }

    let panels = style.panels.len() as f64;
    let plot_width = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let panel_height = (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM - PANEL_GAP * (panels - 1.0)) / panels;

    // x ticks on whole days, same for every panel
    let x_step = nice_step((n - 1) as f64 * grid.step, 6).max(1.0);
    let x_ticks: Vec<usize> = (0..n)
        .filter(|&i| {
            let t = grid.time(i);
            (t / x_step).fract() == 0.0
        })
        .collect();

    for (p, &panel) in style.panels.iter().enumerate() {
        let top = MARGIN_TOP + p as f64 * (panel_height + PANEL_GAP);
        let (lo, hi) = series
            .iter()
            .flat_map(|s| panel.values(&s.trajectory).iter().copied())
            .fold((0.0f64, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        let y_step = nice_step(if hi > lo { hi - lo } else { 1.0 }, 5);
        let y_min = (lo / y_step).floor() * y_step;
        let mut y_max = (hi / y_step).ceil() * y_step;
        if y_max <= y_min {
            y_max = y_min + y_step;
        }
        let frame = Frame {
            left: MARGIN_LEFT,
            top,
            width: plot_width,
            height: panel_height,
            y_max,
            y_min,
            last_index: (n - 1) as f64,
        };

        let _ = writeln!(svg, r#"<g class="panel" data-panel="{}">"#, p);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="13" font-weight="bold">{}</text>"#,
            frame.left,
            top - 8.0,
            panel.title()
        );

        // y grid and labels
        let ticks = ((y_max - y_min) / y_step).round() as i64;
        for k in 0..=ticks {
            let value = y_min + k as f64 * y_step;
            let y = frame.y(value);
            let _ = writeln!(
                svg,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e5e5e5" stroke-width="1"/>"##,
                frame.left,
                frame.left + frame.width
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
                frame.left - 6.0,
                y + 4.0,
                tick_label(value, y_step)
            );
        }

        // x ticks labelled with calendar dates
        let bottom = top + panel_height;
        for &i in &x_ticks {
            let x = frame.x(i);
            let date = grid.t0_epoch + Days::new(grid.time(i) as u64);
            let _ = writeln!(
                svg,
                r##"<line x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333333" stroke-width="1"/>"##,
                bottom + 4.0
            );
            let _ = writeln!(
                svg,
                r#"<text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
                bottom + 16.0,
                date.format("%d %b %Y")
            );
        }

        // axes
        let _ = writeln!(
            svg,
            r##"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="#333333" stroke-width="1"/>"##,
            frame.left, top, bottom
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{0:.2}" y1="{1:.2}" x2="{2:.2}" y2="{1:.2}" stroke="#333333" stroke-width="1"/>"##,
            frame.left,
            bottom,
            frame.left + frame.width
        );

        for (k, s) in series.iter().enumerate() {
            let mut points = String::new();
            for (i, &v) in panel.values(&s.trajectory).iter().enumerate() {
                if i > 0 {
                    points.push(' ');
                }
                let _ = write!(points, "{:.2},{:.2}", frame.x(i), frame.y(v));
            }
            let dash = if s.dotted {
                r#" stroke-dasharray="2,3""#
            } else {
                ""
            };
            let _ = writeln!(
                svg,
                r#"<polyline data-series="{k}" fill="none" stroke="{}" stroke-width="2"{dash} points="{points}"/>"#,
                PALETTE[k % PALETTE.len()]
            );
        }
        let _ = writeln!(svg, "</g>");
    }

    // legend
    let legend_x = WIDTH - MARGIN_RIGHT + 20.0;
    for (k, s) in series.iter().enumerate() {
        let y = MARGIN_TOP + 10.0 + 22.0 * k as f64;
        let dash = if s.dotted {
            r#" stroke-dasharray="2,3""#
        } else {
            ""
        };
        let _ = writeln!(
            svg,
            r#"<line x1="{legend_x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="3"{dash}/>"#,
            legend_x + 24.0,
            PALETTE[k % PALETTE.len()]
        );
        let _ = writeln!(
            svg,
            r#"<text class="legend" x="{:.2}" y="{:.2}" font-size="12">{}</text>"#,
            legend_x + 30.0,
            y + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
