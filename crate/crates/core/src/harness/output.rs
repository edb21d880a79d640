//! Experiment reports, CSV sample tables and static SVG plots.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One CSV row: a value tied to `(experiment, seed)` and optionally to a
/// radius and a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub experiment: String,
    pub seed: u64,
    pub r: Option<f64>,
    pub t: Option<f64>,
    pub value: f64,
    pub statistic_kind: String,
}

/// PASS/FAIL outcome of one acceptance item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }

    /// A failed check whose computation itself errored.
    pub fn errored(name: impl Into<String>, err: &Error) -> Self {
        Self::new(name, false, format!("error: {err}"))
    }

    pub fn label(&self) -> &'static str {
        if self.pass {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

/// Named numeric table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub config: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub verdicts: Vec<Verdict>,
    pub tables: Vec<Table>,
    pub provenance: Provenance,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        !self.verdicts.is_empty() && self.verdicts.iter().all(|v| v.pass)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    /// One `PASS|FAIL name: detail` line per verdict.
    pub fn summary(&self) -> String {
        let mut s = format!("{} (config {})\n", self.experiment, &self.provenance.config_hash[..12]);
        for v in &self.verdicts {
            let _ = writeln!(s, "  {} {}: {}", v.label(), v.name, v.detail);
        }
        s
    }
}

/// Static plot description.
#[derive(Debug, Clone, PartialEq)]
pub enum Plot {
    /// Points on log-log axes with the fitted line and the predicted slope
    /// drawn through the same intercept.
    LogLogFit {
        title: String,
        x: Vec<f64>,
        y: Vec<f64>,
        slope: f64,
        intercept: f64,
        predicted: f64,
    },
    /// Empirical distribution functions of several samples.
    Ecdf { title: String, series: Vec<(String, Vec<f64>)> },
}

/// Everything one experiment run produces.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub rows: Vec<SampleRow>,
    pub plots: Vec<(String, Plot)>,
}

impl ExperimentOutput {
    /// Writes `samples.csv`, `report.json`, `report.txt` and one SVG per plot
    /// into `dir/<experiment>/`; returns the written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let dir = dir.join(&self.report.experiment);
        fs::create_dir_all(&dir)?;
        let mut written = Vec::new();
        let csv_path = dir.join("samples.csv");
        write_csv(&csv_path, &self.rows)?;
        written.push(csv_path);
        let json = serde_json::to_string_pretty(&self.report).map_err(|e| Error::Io(e.to_string()))?;
        let json_path = dir.join("report.json");
        fs::write(&json_path, json)?;
        written.push(json_path);
        let txt_path = dir.join("report.txt");
        fs::write(&txt_path, self.report.summary())?;
        written.push(txt_path);
        for (name, plot) in &self.plots {
            let path = dir.join(format!("{name}.svg"));
            fs::write(&path, render_svg(plot))?;
            written.push(path);
        }
        Ok(written)
    }
}

pub fn write_csv(path: &Path, rows: &[SampleRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(["experiment", "seed", "r", "t", "value", "statistic_kind"])?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<SampleRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Reads every `*/report.json` directly below `dir`, sorted by experiment.
pub fn read_reports(dir: &Path) -> Result<Vec<ExperimentReport>> {
    let mut reports = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path().join("report.json");
        if path.is_file() {
            let text = fs::read_to_string(&path)?;
            reports.push(serde_json::from_str::<ExperimentReport>(&text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?);
        }
    }
    reports.sort_by(|a, b| a.experiment.cmp(&b.experiment));
    Ok(reports)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let (x0, x1) = bounds(xs);
        let (y0, y1) = bounds(ys);
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn bounds(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v.filter(|x| x.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-12);
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(svg: &mut String, frame: &Frame, title: &str, xlabel: &str, ylabel: &str) {
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(svg, r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#, r - l, b - t);
    let _ = writeln!(svg, r#"<text x="{}" y="30" text-anchor="middle" font-size="16">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, WIDTH / 2.0, HEIGHT - 15.0, escape(xlabel));
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 15 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel)
    );
    for k in 0..=4 {
        let fx = frame.x0 + (frame.x1 - frame.x0) * k as f64 / 4.0;
        let fy = frame.y0 + (frame.y1 - frame.y0) * k as f64 / 4.0;
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{}" text-anchor="middle" font-size="10">{fx:.3}</text>"#, frame.px(fx), b + 15.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{:.1}" text-anchor="end" font-size="10">{fy:.3}</text>"#, l - 5.0, frame.py(fy) + 3.0);
    }
}

/// Renders a plot as a standalone SVG document.
pub fn render_svg(plot: &Plot) -> String {
    let mut svg = format!(r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#);
    svg.push('\n');
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    match plot {
        Plot::LogLogFit {
            title,
            x,
            y,
            slope,
            intercept,
            predicted,
        } => {
            let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
            let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
            let frame = Frame::new(lx.iter().copied(), ly.iter().copied());
            axes(&mut svg, &frame, title, "log r", "log statistic");
            let (xa, xb) = (frame.x0, frame.x1);
            let mean_x = lx.iter().sum::<f64>() / lx.len().max(1) as f64;
            let fit = |v: f64| intercept + slope * v;
            let pred = |v: f64| fit(mean_x) + predicted * (v - mean_x);
            for (f, color, dash) in [
                (&fit as &dyn Fn(f64) -> f64, COLORS[0], ""),
                (&pred, COLORS[1], r#" stroke-dasharray="6 4""#),
            ] {
                let _ = writeln!(
                    svg,
                    r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}"{dash}/>"#,
                    frame.px(xa),
                    frame.py(f(xa)),
                    frame.px(xb),
                    frame.py(f(xb))
                );
            }
            for (a, b) in lx.iter().zip(&ly) {
                let _ = writeln!(svg, r#"<circle cx="{:.1}" cy="{:.1}" r="4" fill="black"/>"#, frame.px(*a), frame.py(*b));
            }
            legend(&mut svg, &[format!("fit slope {slope:.4}"), format!("predicted {predicted:.4}")]);
        }
        Plot::Ecdf { title, series } => {
            let sorted: Vec<Vec<f64>> = series
                .iter()
                .map(|(_, v)| {
                    let mut v = v.clone();
                    v.sort_by(f64::total_cmp);
                    v
                })
                .collect();
            // clip to the central 98% so heavy tails do not flatten the plot
            let all: Vec<f64> = sorted.iter().flat_map(|v| clip(v)).collect();
            let mut frame = Frame::new(all.iter().copied(), [0.0, 1.0].into_iter());
            frame.y0 = 0.0;
            frame.y1 = 1.0;
            axes(&mut svg, &frame, title, "value", "ECDF");
            for (k, v) in sorted.iter().enumerate() {
                let n = v.len() as f64;
                let step = (v.len() / 400).max(1);
                let pts: Vec<String> = v
                    .iter()
                    .enumerate()
                    .step_by(step)
                    .filter(|(_, x)| **x >= frame.x0 && **x <= frame.x1)
                    .map(|(i, x)| format!("{:.1},{:.1}", frame.px(*x), frame.py((i + 1) as f64 / n)))
                    .collect();
                let _ = writeln!(svg, r#"<polyline fill="none" stroke="{}" points="{}"/>"#, COLORS[k % COLORS.len()], pts.join(" "));
            }
            legend(&mut svg, &series.iter().map(|(l, _)| l.clone()).collect::<Vec<_>>());
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn clip(v: &[f64]) -> Vec<f64> {
    if v.len() < 100 {
        return v.to_vec();
    }
    let lo = v.len() / 100;
    v[lo..v.len() - lo].to_vec()
}

fn legend(svg: &mut String, labels: &[String]) {
    for (k, label) in labels.iter().enumerate() {
        let y = MARGIN + 15.0 + 16.0 * k as f64;
        let _ = writeln!(svg, r#"<rect x="{}" y="{}" width="12" height="3" fill="{}"/>"#, MARGIN + 10.0, y - 4.0, COLORS[k % COLORS.len()]);
        let _ = writeln!(svg, r#"<text x="{}" y="{y}" font-size="11">{}</text>"#, MARGIN + 28.0, escape(label));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: f64, r: Option<f64>) -> SampleRow {
        SampleRow {
            experiment: "flux-scan".into(),
            seed: 7,
            r,
            t: Some(1.0),
            value: v,
            statistic_kind: "energy_flux".into(),
        }
    }

    #[test]
    fn csv_round_trips_with_the_fixed_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let rows = vec![row(0.1, Some(0.2)), row(-3.5e-7, None)];
        write_csv(&path, &rows).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("experiment,seed,r,t,value,statistic_kind\n"));
        assert_eq!(read_csv(&path).unwrap(), rows);
    }

    #[test]
    fn svg_documents_are_well_formed() {
        let fit = Plot::LogLogFit {
            title: "scaling <test>".into(),
            x: vec![0.2, 0.1, 0.05],
            y: vec![0.04, 0.01, 0.0025],
            slope: 2.0,
            intercept: 0.0,
            predicted: 2.0,
        };
        let ecdf = Plot::Ecdf {
            title: "ecdf".into(),
            series: vec![("a".into(), (0..500).map(|i| i as f64).collect()), ("b".into(), vec![1.0, 2.0])],
        };
        for p in [fit, ecdf] {
            let s = render_svg(&p);
            assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
            assert!(!s.contains("NaN"));
            assert!(!s.contains("<test>"));
        }
    }

    #[test]
    fn reports_round_trip_through_the_output_directory() {
        let dir = tempfile::tempdir().unwrap();
        let report = ExperimentReport {
            experiment: "limit-law".into(),
            verdicts: vec![Verdict::new("ks", true, "0.01 < 0.05")],
            tables: vec![],
            provenance: Provenance {
                config_hash: "ab".repeat(32),
                seed: 1,
                version: "0".into(),
                config: String::new(),
            },
        };
        let out = ExperimentOutput {
            report: report.clone(),
            rows: vec![],
            plots: vec![],
        };
        out.write(dir.path()).unwrap();
        assert_eq!(read_reports(dir.path()).unwrap(), vec![report]);
    }
}
