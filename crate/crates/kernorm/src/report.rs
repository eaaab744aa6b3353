//! CSV tables and SVG line charts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::ExperimentKind;
use crate::error::{HarnessError, Result};
use crate::experiment::ResultRow;

pub const CSV_HEADER: &str = "experiment,method,n,B,d,alpha,rejection_rate,replicates,mean_elapsed_ms,seed";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Svg,
}

impl Format {
    pub fn parse_list(s: &str) -> Result<Vec<Format>> {
        s.split(',')
            .map(|f| match f.trim().to_ascii_lowercase().as_str() {
                "csv" => Ok(Format::Csv),
                "svg" => Ok(Format::Svg),
                other => Err(HarnessError::Config(format!("unknown format '{other}'"))),
            })
            .collect()
    }
}

/// Six significant digits, shortest decimal form, `.` separator.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return "NA".into();
    }
    let rounded: f64 = format!("{x:.5e}").parse().unwrap_or(x);
    if rounded == 0.0 {
        return "0".into();
    }
    format!("{rounded}")
}

pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let elapsed = r.mean_elapsed_ms.map_or_else(|| "NA".to_string(), sig6);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.experiment,
            r.method.name(),
            r.n,
            r.b,
            r.d,
            sig6(r.alpha),
            sig6(r.rejection_rate),
            r.replicates,
            elapsed,
            r.seed
        );
    }
    out
}

fn write(path: PathBuf, contents: &str) -> Result<PathBuf> {
    std::fs::write(&path, contents).map_err(|e| HarnessError::io(&path, e))?;
    Ok(path)
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes `<name>.csv` and one SVG per experiment label; returns the paths written.
pub fn emit_report(rows: &[ResultRow], out_dir: &Path, formats: &[Format], name: &str) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(HarnessError::Config("no result rows to report".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let mut written = Vec::new();
    if formats.contains(&Format::Csv) {
        written.push(write(out_dir.join(format!("{name}.csv")), &to_csv(rows))?);
    }
    if formats.contains(&Format::Svg) {
        let mut labels: Vec<&str> = Vec::new();
        for r in rows {
            if !labels.contains(&r.experiment.as_str()) {
                labels.push(&r.experiment);
            }
        }
        for label in &labels {
            let panel: Vec<&ResultRow> = rows.iter().filter(|r| r.experiment == *label).collect();
            let file = if labels.len() == 1 {
                format!("{name}.svg")
            } else {
                format!("{name}_{}.svg", file_stem(label.rsplit('/').next().unwrap_or(label)))
            };
            written.push(write(out_dir.join(file), &svg_chart(label, &panel))?);
        }
    }
    Ok(written)
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const COLORS: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool, force: Option<(f64, f64)>) -> Self {
        let (mut lo, mut hi) = force.unwrap_or((f64::INFINITY, f64::NEG_INFINITY));
        if force.is_none() {
            for v in values {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if log {
            lo = lo.max(f64::MIN_POSITIVE).log10().floor();
            hi = hi.max(f64::MIN_POSITIVE).log10().ceil();
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // also catches NaN
        if !(hi > lo) {
            hi = lo + 1.0;
        }
        Axis { lo, hi, log }
    }

    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.max(f64::MIN_POSITIVE).log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            (self.lo as i32..=self.hi as i32).map(|e| 10f64.powi(e)).collect()
        } else {
            (0..=5)
                .map(|k| self.lo + (self.hi - self.lo) * k as f64 / 5.0)
                .collect()
        }
    }
}

fn experiment_kind(label: &str) -> Option<ExperimentKind> {
    let head = label.split('/').next().unwrap_or(label);
    [
        ExperimentKind::Type1VsB,
        ExperimentKind::Type2VsNMean,
        ExperimentKind::Type2VsNCov,
        ExperimentKind::DimStudy,
        ExperimentKind::RealData,
        ExperimentKind::ExecTime,
    ]
    .into_iter()
    .find(|k| k.name() == head)
}

/// Line chart of one panel: one polyline per method (and dimension).
pub fn svg_chart(title: &str, rows: &[&ResultRow]) -> String {
    let kind = experiment_kind(title);
    let sweeps_b = kind.is_some_and(|k| k.sweeps_b());
    let timed = kind == Some(ExperimentKind::ExecTime) && rows.iter().all(|r| r.mean_elapsed_ms.is_some());
    let under_null = rows.iter().all(|r| r.under_null);
    let x_of = |r: &ResultRow| if sweeps_b { r.b as f64 } else { r.n as f64 };
    let y_of = |r: &ResultRow| {
        if timed {
            r.mean_elapsed_ms.unwrap_or(0.0) / 1e3
        } else {
            r.rejection_rate
        }
    };
    let xa = Axis::new(rows.iter().map(|r| x_of(r)), timed, None);
    let ya = if timed {
        Axis::new(rows.iter().map(|r| y_of(r)), true, None)
    } else {
        Axis::new(std::iter::empty(), false, Some((0.0, 1.0)))
    };
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let px = |v: f64| LEFT + xa.frac(v) * pw;
    let py = |v: f64| TOP + (1.0 - ya.frac(v)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">
<rect width="{W}" height="{H}" fill="white"/>
<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{title}</text>
<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#,
        LEFT + pw / 2.0
    );
    for t in xa.ticks() {
        let x = px(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
            TOP,
            TOP + ph,
            TOP + ph + 16.0,
            sig6(t)
        );
    }
    for t in ya.ticks() {
        let y = py(t);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0,
            sig6(t)
        );
    }
    let x_label = if sweeps_b { "B" } else { "n" };
    let y_label = if timed {
        "seconds"
    } else if under_null {
        "Type-I error"
    } else {
        "Type-II error"
    };
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x_label}</text>
<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{y_label}</text>"#,
        LEFT + pw / 2.0,
        H - 12.0,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    if under_null && !timed {
        if let Some(alpha) = rows.first().map(|r| r.alpha) {
            let y = py(alpha);
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#555" stroke-dasharray="6,4"/><text x="{:.1}" y="{:.1}" fill="#555">α = {}</text>"##,
                LEFT + pw,
                LEFT + pw - 4.0,
                y - 4.0,
                sig6(alpha)
            );
        }
    }

    let many_dims = rows.iter().any(|r| r.d != rows[0].d);
    let mut series: Vec<(String, Vec<&ResultRow>)> = Vec::new();
    for r in rows {
        let name = if many_dims {
            format!("{} (d={})", r.method.name(), r.d)
        } else {
            r.method.name().to_string()
        };
        match series.iter_mut().find(|(n, _)| *n == name) {
            Some((_, v)) => v.push(r),
            None => series.push((name, vec![r])),
        }
    }
    for (k, (name, points)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let dash = if many_dims && points[0].d != rows[0].d {
            r#" stroke-dasharray="4,3""#
        } else {
            ""
        };
        let coords: Vec<String> = points
            .iter()
            .map(|r| format!("{:.1},{:.1}", px(x_of(r)), py(y_of(r))))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2"{dash} points="{}"/>"#,
            coords.join(" ")
        );
        for c in &coords {
            let (x, y) = c.split_once(',').unwrap_or(("0", "0"));
            let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#);
        }
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = LEFT + pw + 14.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}">{name}</text>"#,
            lx + 22.0,
            lx + 28.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::MethodKind;

    fn row(experiment: &str, n: usize, rate: f64, elapsed: Option<f64>) -> ResultRow {
        ResultRow {
            experiment: experiment.into(),
            method: MethodKind::Lmmd,
            n,
            b: 250,
            d: 25,
            alpha: 0.05,
            rejection_rate: rate,
            replicates: 200,
            mean_elapsed_ms: elapsed,
            seed: 7,
            under_null: experiment == "Type1VsB",
        }
    }

    #[test]
    fn significant_digits() {
        assert_eq!(sig6(0.046015936), "0.0460159");
        assert_eq!(sig6(0.05), "0.05");
        assert_eq!(sig6(1234567.0), "1234570");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1.0), "1");
    }

    #[test]
    fn single_row_csv() {
        let csv = to_csv(&[row("Type2VsN_Mean", 100, 0.125, None)]);
        assert_eq!(
            csv,
            "experiment,method,n,B,d,alpha,rejection_rate,replicates,mean_elapsed_ms,seed\n\
             Type2VsN_Mean,LMMD,100,250,25,0.05,0.125,200,NA,7\n"
        );
    }

    #[test]
    fn type1_chart_has_alpha_line() {
        let r = [row("Type1VsB", 500, 0.04, None)];
        let svg = svg_chart("Type1VsB", &r.iter().collect::<Vec<_>>());
        assert!(svg.contains("stroke-dasharray=\"6,4\""));
        assert!(svg.contains("α = 0.05"));
    }

    #[test]
    fn exec_time_chart_is_log_log() {
        let r = [
            row("ExecTime", 500, 0.0, Some(40.0)),
            row("ExecTime", 2000, 0.0, Some(640.0)),
        ];
        let svg = svg_chart("ExecTime", &r.iter().collect::<Vec<_>>());
        assert!(svg.contains(">seconds<"));
        // decade ticks on both axes
        assert!(svg.contains(">100<") && svg.contains(">1000<") && svg.contains(">0.01<"));
    }
}
