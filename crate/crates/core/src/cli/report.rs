//! CSV tables and single-series SVG charts.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

/// One cell of a report row.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Real(x) => format_real(*x),
            Cell::Int(k) => k.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<usize> for Cell {
    fn from(k: usize) -> Self {
        Cell::Int(k as i64)
    }
}

impl From<u64> for Cell {
    fn from(k: u64) -> Self {
        Cell::Int(k as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Text(b.to_string())
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// 17 significant digits, `.` as decimal point.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// Fixed-schema table for one experiment family.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub experiment: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(experiment: &str, columns: &[&'static str]) -> Self {
        Self {
            experiment: experiment.to_string(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for {}", self.experiment);
        self.rows.push(row);
    }
}

/// Writes `# schema` comment, header and rows.
pub fn emit_csv(table: &Table, path: &Path) -> io::Result<()> {
    let mut out = format!("# resolvent-lab schema {SCHEMA_VERSION} experiment={}\n", table.experiment).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(&table.columns)?;
        for row in &table.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
    }
    fs::write(path, out)
}

/// A single `(x, y)` series.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
    pub log_log: bool,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const PAD: f64 = 50.0;

pub fn render_svg(series: &Series) -> String {
    let tf = |v: f64| if series.log_log { v.log10() } else { v };
    let pts: Vec<(f64, f64)> = series
        .points
        .iter()
        .filter(|(x, y)| !series.log_log || (*x > 0.0 && *y > 0.0))
        .map(|&(x, y)| (tf(x), tf(y)))
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if pts.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * PAD);
    let sy = |y: f64| HEIGHT - PAD - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * PAD);
    let mut poly = String::with_capacity(pts.len() * 16);
    for (k, &(x, y)) in pts.iter().enumerate() {
        if k > 0 {
            poly.push(' ');
        }
        let _ = write!(poly, "{:.2},{:.2}", sx(x), sy(y));
    }
    let axis = |lo: f64, hi: f64| {
        if series.log_log {
            (format!("1e{lo:.1}"), format!("1e{hi:.1}"))
        } else {
            (format!("{lo:.3e}"), format!("{hi:.3e}"))
        }
    };
    let (xl, xh) = axis(x0, x1);
    let (yl, yh) = axis(y0, y1);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<title>{}</title>"#, escape(&series.title));
    let _ = writeln!(
        svg,
        r##"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="#888"/>"##,
        WIDTH - 2.0 * PAD,
        HEIGHT - 2.0 * PAD
    );
    let _ = writeln!(
        svg,
        r##"<polyline fill="none" stroke="#1f5fa8" stroke-width="1.5" points="{poly}"/>"##
    );
    let text = |svg: &mut String, x: f64, y: f64, anchor: &str, s: &str| {
        let _ = writeln!(
            svg,
            r#"<text x="{x:.1}" y="{y:.1}" font-size="11" font-family="sans-serif" text-anchor="{anchor}">{}</text>"#,
            escape(s)
        );
    };
    text(&mut svg, PAD, HEIGHT - PAD + 15.0, "start", &xl);
    text(&mut svg, WIDTH - PAD, HEIGHT - PAD + 15.0, "end", &xh);
    text(&mut svg, PAD - 4.0, HEIGHT - PAD, "end", &yl);
    text(&mut svg, PAD - 4.0, PAD + 4.0, "end", &yh);
    text(&mut svg, WIDTH / 2.0, HEIGHT - 12.0, "middle", &series.x_label);
    text(&mut svg, 12.0, HEIGHT / 2.0, "start", &series.y_label);
    text(&mut svg, WIDTH / 2.0, 24.0, "middle", &series.title);
    svg.push_str("</svg>\n");
    svg
}

pub fn emit_svg(series: &Series, path: &Path) -> io::Result<()> {
    fs::write(path, render_svg(series))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
