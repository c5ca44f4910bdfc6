//! Line charts rendered straight to SVG from a result CSV.
//!
//! The first column is the x axis; every other column except `ratio` is a
//! series. The y axis switches to log10 when all values are positive and
//! span more than two decades.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChartError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}, column {column}: {value:?} is not a number")]
    NotANumber { row: usize, column: String, value: String },
    #[error("nothing to plot: {0}")]
    Empty(&'static str),
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 160.0;
const MARGIN_Y: f64 = 40.0;
const COLORS: [&str; 4] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd"];

struct Series {
    name: String,
    points: Vec<(f64, f64)>,
}

fn parse(csv_text: &str) -> Result<(String, Vec<Series>), ChartError> {
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.len() < 2 {
        return Err(ChartError::Empty("need an x column and at least one series"));
    }
    let columns: Vec<usize> = (1..headers.len()).filter(|&i| &headers[i] != "ratio").collect();
    let mut series: Vec<Series> =
        columns.iter().map(|&i| Series { name: headers[i].to_owned(), points: Vec::new() }).collect();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let num = |i: usize| {
            record[i].trim().parse::<f64>().map_err(|_| ChartError::NotANumber {
                row: row + 1,
                column: headers[i].to_owned(),
                value: record[i].to_owned(),
            })
        };
        let x = num(0)?;
        for (s, &i) in series.iter_mut().zip(&columns) {
            s.points.push((x, num(i)?));
        }
    }
    if series.iter().all(|s| s.points.is_empty()) {
        return Err(ChartError::Empty("no rows"));
    }
    Ok((headers[0].to_owned(), series))
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64> + Clone, allow_log: bool) -> Self {
        let lo = values.clone().fold(f64::INFINITY, f64::min);
        let hi = values.fold(f64::NEG_INFINITY, f64::max);
        let log = allow_log && lo > 0.0 && hi / lo > 100.0;
        let (lo, hi) = if log { (lo.log10().floor(), hi.log10().ceil()) } else { (lo, hi) };
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 1.0, hi + 1.0) };
        Axis { lo, hi, log }
    }

    /// Position in [0, 1].
    fn unit(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            (self.lo as i32..=self.hi as i32).map(|e| (10f64.powi(e), format!("1e{e}"))).collect()
        } else {
            (0..=4)
                .map(|i| {
                    let v = self.lo + (self.hi - self.lo) * i as f64 / 4.0;
                    (v, format!("{v:.3e}"))
                })
                .collect()
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the CSV as a standalone SVG document.
pub fn render_svg(csv_text: &str, title: &str) -> Result<String, ChartError> {
    let (x_name, series) = parse(csv_text)?;
    let all = || series.iter().flat_map(|s| s.points.iter());
    let xa = Axis::new(all().map(|p| p.0), false);
    let ya = Axis::new(all().map(|p| p.1), true);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - 2.0 * MARGIN_Y;
    let px = |x: f64| MARGIN_LEFT + xa.unit(x) * plot_w;
    let py = |y: f64| MARGIN_Y + (1.0 - ya.unit(y)) * plot_h;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(svg, r#"<text x="{}" y="20" font-size="14" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(title))
        .unwrap();
    let (x0, x1, y0, y1) = (MARGIN_LEFT, MARGIN_LEFT + plot_w, MARGIN_Y, MARGIN_Y + plot_h);
    writeln!(svg, r#"<path d="M{x0} {y0} L{x0} {y1} L{x1} {y1}" stroke="black" fill="none"/>"#).unwrap();
    for (v, label) in ya.ticks() {
        let y = py(v);
        writeln!(svg, r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#, x0 - 4.0).unwrap();
        writeln!(svg, r#"<text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#, x0 - 6.0, y + 4.0).unwrap();
    }
    for (v, label) in xa.ticks() {
        let x = px(v);
        writeln!(svg, r#"<line x1="{x:.2}" y1="{y1}" x2="{x:.2}" y2="{}" stroke="black"/>"#, y1 + 4.0).unwrap();
        writeln!(svg, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{label}</text>"#, y1 + 16.0).unwrap();
    }
    writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 6.0,
        escape(&x_name)
    )
    .unwrap();
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        writeln!(svg, r#"<polyline points="{}" stroke="{color}" stroke-width="2" fill="none"/>"#, points.join(" "))
            .unwrap();
        let ly = MARGIN_Y + 16.0 * i as f64;
        writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            x1 + 10.0,
            x1 + 30.0
        )
        .unwrap();
        writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, x1 + 34.0, ly + 4.0, escape(&s.name)).unwrap();
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "sweep_value,fl_seconds,llm_twin_seconds,ratio\n1,100,1,0.01\n2,200,1,0.005\n";

    #[test]
    fn renders_one_polyline_per_series() {
        let svg = render_svg(CSV, "t").unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("fl_seconds") && svg.contains("llm_twin_seconds"));
        assert!(!svg.contains(">ratio<"));
        assert!(svg.contains("1e0") && svg.contains("1e3"));
    }

    #[test]
    fn output_is_a_pure_function_of_input() {
        assert_eq!(render_svg(CSV, "t").unwrap(), render_svg(CSV, "t").unwrap());
        assert_ne!(render_svg(CSV, "t").unwrap(), render_svg(&CSV.replace("200", "300"), "t").unwrap());
    }

    #[test]
    fn flat_series_and_bad_input() {
        assert!(render_svg("x,y\n1,5\n2,5\n", "flat").is_ok());
        assert!(matches!(render_svg("x,y\n1,abc\n", "t"), Err(ChartError::NotANumber { row: 1, .. })));
        assert!(matches!(render_svg("x\n1\n", "t"), Err(ChartError::Empty(_))));
        assert!(matches!(render_svg("x,y\n", "t"), Err(ChartError::Empty(_))));
    }
}
