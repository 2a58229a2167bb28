//! Dependency-free SVG 1.1 rendering.
//!
//! Charts are byte-stable: coordinates print with two decimals, data values
//! embed in `data-*` attributes with twelve, and every iteration order is
//! fixed. Error bars span +-1 standard deviation. Heatmaps paint dark cells
//! where the two distributions are NOT significantly different.

use super::ReportError;
use crate::metrics::MetricSeries;
use crate::stats::SignificanceMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartKind {
    LineWithErrorBars,
    DualAxisLine,
    Heatmap,
    AdjacencyMatrix,
}

#[derive(Debug, Clone)]
pub struct ChartSpec {
    pub kind: ChartKind,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
}

#[derive(Debug, Clone)]
pub enum ChartData<'a> {
    /// One or more mean/std series sharing the y axis.
    Series(Vec<&'a MetricSeries>),
    /// Two series with independent y scales.
    DualAxis {
        left: &'a MetricSeries,
        right: &'a MetricSeries,
    },
    /// Pairwise significance grid.
    Significance(&'a SignificanceMatrix),
    /// Labeled square matrix of similarities in [-1, 1], row-major.
    Matrix {
        labels: &'a [String],
        values: &'a [f64],
    },
}

const WIDTH: f64 = 880.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 80.0;
const MARGIN_T: f64 = 48.0;
const MARGIN_B: f64 = 64.0;

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
const DARK_CELL: &str = "#3a3a3a";
const LIGHT_CELL: &str = "#e8e8e8";

fn fx(v: f64) -> String {
    format!("{v:.2}")
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Scale {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Scale {
    fn map(&self, v: f64) -> f64 {
        if self.hi == self.lo {
            return (self.px_lo + self.px_hi) / 2.0;
        }
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }

    fn ticks(&self, count: usize) -> Vec<f64> {
        (0..=count)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / count as f64)
            .collect()
    }
}

fn y_scale_of(series: &[&MetricSeries]) -> Scale {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in series {
        for p in &s.points {
            if let Some(m) = p.mean {
                let sd = p.std.unwrap_or(0.0);
                lo = lo.min(m - sd);
                hi = hi.max(m + sd);
            }
        }
    }
    if !lo.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    if lo == hi {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = (hi - lo) * 0.05;
    Scale {
        lo: lo - pad,
        hi: hi + pad,
        px_lo: HEIGHT - MARGIN_B,
        px_hi: MARGIN_T,
    }
}

fn x_scale_of(series: &[&MetricSeries]) -> Option<Scale> {
    let mut lo = i32::MAX;
    let mut hi = i32::MIN;
    for s in series {
        for p in &s.points {
            lo = lo.min(p.year);
            hi = hi.max(p.year);
        }
    }
    if lo > hi {
        return None;
    }
    let (lo, hi) = (f64::from(lo), f64::from(hi));
    let (lo, hi) = if lo == hi { (lo - 1.0, hi + 1.0) } else { (lo, hi) };
    Some(Scale {
        lo,
        hi,
        px_lo: MARGIN_L,
        px_hi: WIDTH - MARGIN_R,
    })
}

fn open_svg(out: &mut String, title: &str) {
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"26\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n",
        fx(WIDTH / 2.0),
        esc(title)
    ));
}

fn axis_labels(out: &mut String, x_label: &str, y_label: &str) {
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
        fx((MARGIN_L + WIDTH - MARGIN_R) / 2.0),
        fx(HEIGHT - 16.0),
        esc(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 18 {})\">{}</text>\n",
        fx((MARGIN_T + HEIGHT - MARGIN_B) / 2.0),
        fx((MARGIN_T + HEIGHT - MARGIN_B) / 2.0),
        esc(y_label)
    ));
}

fn frame_and_x_axis(out: &mut String, xs: &Scale, years: &[i32]) {
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        fx(MARGIN_L),
        fx(HEIGHT - MARGIN_B),
        fx(WIDTH - MARGIN_R),
        fx(HEIGHT - MARGIN_B)
    ));
    let step = (years.len() / 8).max(1);
    for (i, y) in years.iter().enumerate() {
        if i % step != 0 && i != years.len() - 1 {
            continue;
        }
        let px = xs.map(f64::from(*y));
        out.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n",
            fx(px),
            fx(HEIGHT - MARGIN_B),
            fx(HEIGHT - MARGIN_B + 5.0)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">{}</text>\n",
            fx(px),
            fx(HEIGHT - MARGIN_B + 18.0),
            y
        ));
    }
}

fn y_axis(out: &mut String, ys: &Scale, x_px: f64, anchor: &str, color: &str) {
    out.push_str(&format!(
        "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"{color}\"/>\n",
        fx(x_px),
        fx(MARGIN_T),
        fx(HEIGHT - MARGIN_B)
    ));
    for t in ys.ticks(5) {
        let py = ys.map(t);
        let (tick_to, label_x) = if anchor == "end" {
            (x_px - 5.0, x_px - 8.0)
        } else {
            (x_px + 5.0, x_px + 8.0)
        };
        out.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{color}\"/>\n",
            fx(x_px),
            fx(py),
            fx(tick_to)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"{anchor}\" font-family=\"sans-serif\" font-size=\"10\" fill=\"{color}\">{:.4}</text>\n",
            fx(label_x),
            fx(py + 3.0),
            t
        ));
    }
}

fn draw_series(out: &mut String, s: &MetricSeries, xs: &Scale, ys: &Scale, color: &str) {
    let defined: Vec<(i32, f64, f64)> = s
        .points
        .iter()
        .filter_map(|p| p.mean.map(|m| (p.year, m, p.std.unwrap_or(0.0))))
        .collect();
    if defined.len() >= 2 {
        let pts: Vec<String> = defined
            .iter()
            .map(|(y, m, _)| format!("{},{}", fx(xs.map(f64::from(*y))), fx(ys.map(*m))))
            .collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" data-series=\"{}\"/>\n",
            pts.join(" "),
            esc(&s.metric)
        ));
    }
    for (year, mean, std) in &defined {
        let px = xs.map(f64::from(*year));
        let py = ys.map(*mean);
        if *std > 0.0 {
            let y1 = ys.map(*mean + *std);
            let y2 = ys.map(*mean - *std);
            out.push_str(&format!(
                "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"{color}\" stroke-width=\"1\" class=\"errorbar\" data-series=\"{3}\" data-year=\"{year}\"/>\n",
                fx(px),
                fx(y1),
                fx(y2),
                esc(&s.metric)
            ));
            for yy in [y1, y2] {
                out.push_str(&format!(
                    "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{color}\" stroke-width=\"1\"/>\n",
                    fx(px - 3.0),
                    fx(yy),
                    fx(px + 3.0)
                ));
            }
        }
        out.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"{color}\" class=\"point\" data-series=\"{}\" data-year=\"{year}\" data-mean=\"{mean:.12}\"/>\n",
            fx(px),
            fx(py),
            esc(&s.metric)
        ));
    }
}

fn legend(out: &mut String, names: &[(&str, &str)]) {
    for (i, (name, color)) in names.iter().enumerate() {
        let y = MARGIN_T + 14.0 * i as f64;
        out.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n",
            fx(MARGIN_L + 8.0),
            fx(y)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">{}</text>\n",
            fx(MARGIN_L + 22.0),
            fx(y + 9.0),
            esc(name)
        ));
    }
}

fn all_years(series: &[&MetricSeries]) -> Vec<i32> {
    let mut years: Vec<i32> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.year))
        .collect();
    years.sort_unstable();
    years.dedup();
    years
}

fn render_line_chart(spec: &ChartSpec, series: &[&MetricSeries]) -> Result<String, ReportError> {
    if series.is_empty() || series.iter().all(|s| s.defined().is_empty()) {
        return Err(ReportError::EmptyData);
    }
    let xs = x_scale_of(series).ok_or(ReportError::EmptyData)?;
    let ys = y_scale_of(series);
    let years = all_years(series);
    let mut out = String::new();
    open_svg(&mut out, &spec.title);
    frame_and_x_axis(&mut out, &xs, &years);
    y_axis(&mut out, &ys, MARGIN_L, "end", "black");
    axis_labels(&mut out, &spec.x_label, &spec.y_label);
    let mut names = Vec::new();
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        draw_series(&mut out, s, &xs, &ys, color);
        names.push((s.metric.as_str(), color));
    }
    if series.len() > 1 {
        legend(&mut out, &names);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn render_dual_axis(
    spec: &ChartSpec,
    left: &MetricSeries,
    right: &MetricSeries,
) -> Result<String, ReportError> {
    if left.defined().is_empty() && right.defined().is_empty() {
        return Err(ReportError::EmptyData);
    }
    let both = [left, right];
    let xs = x_scale_of(&both).ok_or(ReportError::EmptyData)?;
    let years = all_years(&both);
    let ys_left = y_scale_of(&[left]);
    let ys_right = y_scale_of(&[right]);
    let mut out = String::new();
    open_svg(&mut out, &spec.title);
    frame_and_x_axis(&mut out, &xs, &years);
    y_axis(&mut out, &ys_left, MARGIN_L, "end", PALETTE[0]);
    y_axis(&mut out, &ys_right, WIDTH - MARGIN_R, "start", PALETTE[1]);
    axis_labels(&mut out, &spec.x_label, &spec.y_label);
    draw_series(&mut out, left, &xs, &ys_left, PALETTE[0]);
    draw_series(&mut out, right, &xs, &ys_right, PALETTE[1]);
    legend(
        &mut out,
        &[(left.metric.as_str(), PALETTE[0]), (right.metric.as_str(), PALETTE[1])],
    );
    out.push_str("</svg>\n");
    Ok(out)
}

fn grid_geometry(n: usize) -> (f64, f64, f64) {
    let side = (HEIGHT - MARGIN_T - MARGIN_B).min(WIDTH - MARGIN_L - MARGIN_R);
    let cell = side / n as f64;
    (MARGIN_L, MARGIN_T, cell)
}

fn render_heatmap(spec: &ChartSpec, m: &SignificanceMatrix) -> Result<String, ReportError> {
    let n = m.len();
    if n == 0 {
        return Err(ReportError::EmptyData);
    }
    let (x0, y0, cell) = grid_geometry(n);
    let mut out = String::new();
    open_svg(&mut out, &spec.title);
    for i in 0..n {
        for j in 0..n {
            let r = m.cell(i, j);
            let dark = r.p_value >= m.alpha;
            let (fill, class) = if dark {
                (DARK_CELL, "nonsig")
            } else {
                (LIGHT_CELL, "sig")
            };
            out.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{fill}\" class=\"{class}\" stroke=\"white\" stroke-width=\"0.5\" data-row=\"{}\" data-col=\"{}\" data-d=\"{:.12}\" data-p=\"{:.12}\"/>\n",
                fx(x0 + j as f64 * cell),
                fx(y0 + i as f64 * cell),
                fx(cell),
                fx(cell),
                esc(&m.labels[i]),
                esc(&m.labels[j]),
                r.statistic,
                r.p_value
            ));
        }
    }
    let step = (n / 16).max(1);
    for (i, label) in m.labels.iter().enumerate() {
        if i % step != 0 {
            continue;
        }
        let mid = i as f64 * cell + cell / 2.0;
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"9\">{}</text>\n",
            fx(x0 - 4.0),
            fx(y0 + mid + 3.0),
            esc(label)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"9\">{}</text>\n",
            fx(x0 + mid),
            fx(y0 + n as f64 * cell + 12.0),
            esc(label)
        ));
    }
    axis_labels(&mut out, &spec.x_label, &spec.y_label);
    out.push_str("</svg>\n");
    Ok(out)
}

fn render_matrix(spec: &ChartSpec, labels: &[String], values: &[f64]) -> Result<String, ReportError> {
    let n = labels.len();
    if n == 0 || values.len() != n * n {
        return Err(ReportError::EmptyData);
    }
    let (x0, y0, cell) = grid_geometry(n);
    let mut out = String::new();
    open_svg(&mut out, &spec.title);
    for i in 0..n {
        for j in 0..n {
            let v = values[i * n + j];
            // Map [-1, 1] to light..dark.
            let shade = (235.0 - 215.0 * ((v + 1.0) / 2.0)).round() as u8;
            out.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"rgb({shade},{shade},{shade})\" class=\"cell\" data-row=\"{}\" data-col=\"{}\" data-value=\"{v:.12}\"/>\n",
                fx(x0 + j as f64 * cell),
                fx(y0 + i as f64 * cell),
                fx(cell),
                fx(cell),
                esc(&labels[i]),
                esc(&labels[j])
            ));
        }
    }
    axis_labels(&mut out, &spec.x_label, &spec.y_label);
    out.push_str("</svg>\n");
    Ok(out)
}

/// Renders a chart to an SVG document. The data variant must match the spec
/// kind; empty data is an error.
pub fn render_chart(spec: &ChartSpec, data: &ChartData) -> Result<String, ReportError> {
    match (spec.kind, data) {
        (ChartKind::LineWithErrorBars, ChartData::Series(series)) => {
            render_line_chart(spec, series)
        }
        (ChartKind::DualAxisLine, ChartData::DualAxis { left, right }) => {
            render_dual_axis(spec, left, right)
        }
        (ChartKind::Heatmap, ChartData::Significance(m)) => render_heatmap(spec, m),
        (ChartKind::AdjacencyMatrix, ChartData::Matrix { labels, values }) => {
            render_matrix(spec, labels, values)
        }
        _ => Err(ReportError::KindMismatch(format!("{:?}", spec.kind))),
    }
}
