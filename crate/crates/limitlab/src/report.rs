//! Report files, their parsers, and the acceptance verdict.
//!
//! `metrics.csv`: `eps,status,M1,...,M6`, one row per ε in sweep order;
//! failed ε have status `failed` and empty metric fields.
//! `monitors.csv`: `eps,name,power,raw,normalized`.
//! `decay.csv`: `eps,T,I,T_cross,flag`.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use limitlab_core::acoustics::fit_slope;
use limitlab_core::{Error, Result};

use crate::config::{Acceptance, SweepConfig};
use crate::metrics::MetricRecord;
use crate::sweep::SweepReport;

pub const METRICS_HEADER: &str = "eps,status,M1,M2,M3,M4,M5,M6";
pub const MONITORS_HEADER: &str = "eps,name,power,raw,normalized";
pub const DECAY_HEADER: &str = "eps,T,I,T_cross,flag";

/// Metrics whose decrease the limit study requires.
pub const TRACKED: [&str; 4] = ["M2", "M4", "M5", "M6"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricRow {
    pub eps: f64,
    /// `None` for a failed ε.
    pub values: Option<[f64; 6]>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonitorRow {
    pub eps: f64,
    pub name: String,
    pub power: i32,
    pub raw: f64,
    pub normalized: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayRow {
    pub eps: f64,
    pub t_end: f64,
    pub integral: f64,
    pub t_cross: f64,
    pub contaminated: bool,
}

/// Everything the verdict depends on, as written to or read from disk.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Tables {
    pub metrics: Vec<MetricRow>,
    pub monitors: Vec<MonitorRow>,
    pub decay: Vec<DecayRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub checks: Vec<Check>,
    pub has_data: bool,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.has_data && self.checks.iter().all(|c| c.passed)
    }

    /// 0 when every threshold holds, 1 when one fails, 2 without data.
    pub fn exit_code(&self) -> i32 {
        if !self.has_data {
            2
        } else if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

fn fmt(x: f64) -> String {
    format!("{x:e}")
}

impl Tables {
    pub fn from_report(report: &SweepReport) -> Self {
        let metrics = report
            .outcomes
            .iter()
            .map(|o| MetricRow { eps: o.eps, values: o.result.as_ref().ok().map(|r| r.metrics.values()) })
            .collect();
        let monitors = report
            .outcomes
            .iter()
            .filter_map(|o| o.result.as_ref().ok())
            .flat_map(|r| {
                r.bounds.monitors.iter().map(|m| MonitorRow {
                    eps: r.bounds.eps,
                    name: m.name.to_string(),
                    power: m.power,
                    raw: m.raw,
                    normalized: m.normalized,
                })
            })
            .collect();
        let decay = match &report.decay {
            Some(Ok(d)) => d
                .results
                .iter()
                .map(|r| DecayRow {
                    eps: r.eps,
                    t_end: r.t_end,
                    integral: r.integral,
                    t_cross: r.t_cross,
                    contaminated: r.contaminated,
                })
                .collect(),
            _ => vec![],
        };
        Tables { metrics, monitors, decay }
    }

    pub fn metrics_csv(&self) -> String {
        let mut s = format!("{METRICS_HEADER}\n");
        for r in &self.metrics {
            match r.values {
                Some(v) => {
                    let vals: Vec<String> = v.iter().map(|x| fmt(*x)).collect();
                    let _ = writeln!(s, "{},ok,{}", fmt(r.eps), vals.join(","));
                }
                None => {
                    let _ = writeln!(s, "{},failed,,,,,,", fmt(r.eps));
                }
            }
        }
        s
    }

    pub fn monitors_csv(&self) -> String {
        let mut s = format!("{MONITORS_HEADER}\n");
        for m in &self.monitors {
            let _ = writeln!(s, "{},{},{},{},{}", fmt(m.eps), m.name, m.power, fmt(m.raw), fmt(m.normalized));
        }
        s
    }

    pub fn decay_csv(&self) -> String {
        let mut s = format!("{DECAY_HEADER}\n");
        for d in &self.decay {
            let flag = if d.contaminated { "contaminated" } else { "ok" };
            let _ = writeln!(s, "{},{},{},{},{flag}", fmt(d.eps), fmt(d.t_end), fmt(d.integral), fmt(d.t_cross));
        }
        s
    }

    /// Evaluates every acceptance threshold on the tables.
    pub fn verdict(&self, acc: &Acceptance) -> Verdict {
        let ok: Vec<(f64, [f64; 6])> = self.metrics.iter().filter_map(|r| r.values.map(|v| (r.eps, v))).collect();
        let mut checks = Vec::new();
        let failed: Vec<String> = self.metrics.iter().filter(|r| r.values.is_none()).map(|r| fmt(r.eps)).collect();
        checks.push(Check {
            name: "complete".into(),
            passed: failed.is_empty(),
            detail: if failed.is_empty() { "every eps finished".into() } else { format!("failed eps: {}", failed.join(" ")) },
        });
        for name in TRACKED {
            let i = MetricRecord::NAMES.iter().position(|n| *n == name).expect("tracked metric");
            let v: Vec<f64> = ok.iter().map(|(_, m)| m[i]).collect();
            checks.push(monotone_check(name, &v, acc.min_factor));
        }
        let mut names: Vec<&str> = self.monitors.iter().map(|m| m.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        for name in names {
            let vals: Vec<f64> = self.monitors.iter().filter(|m| m.name == name).map(|m| m.normalized.abs()).collect();
            let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
            let spread = if hi == 0.0 { 1.0 } else if lo > 0.0 { hi / lo } else { f64::INFINITY };
            checks.push(Check {
                name: format!("monitor {name}"),
                passed: spread.is_finite() && spread < acc.max_monitor_spread,
                detail: format!("max/min of normalized values {spread:.3}"),
            });
        }
        if !self.decay.is_empty() {
            let contaminated: Vec<String> = self.decay.iter().filter(|d| d.contaminated).map(|d| fmt(d.eps)).collect();
            checks.push(Check {
                name: "decay crossing time".into(),
                passed: contaminated.is_empty(),
                detail: if contaminated.is_empty() { "T below T_cross for every eps".into() } else { format!("contaminated eps: {}", contaminated.join(" ")) },
            });
            let eps: Vec<f64> = self.decay.iter().map(|d| d.eps).collect();
            let vals: Vec<f64> = self.decay.iter().map(|d| d.integral).collect();
            let (passed, detail) = match fit_slope(&eps, &vals) {
                Ok(f) => (f.slope >= acc.decay_slope[0] && f.slope <= acc.decay_slope[1], format!("slope {:.4}", f.slope)),
                Err(e) => (false, e.to_string()),
            };
            checks.push(Check { name: "decay slope".into(), passed, detail });
        }
        Verdict { checks, has_data: !ok.is_empty() }
    }
}

/// Strict decrease over consecutive entries and a total drop by `min_factor`.
pub fn monotone_check(name: &str, v: &[f64], min_factor: f64) -> Check {
    if v.len() < 2 {
        let passed = min_factor <= 1.0;
        return Check { name: name.into(), passed, detail: format!("{} value(s), no trend", v.len()) };
    }
    if let Some(i) = (1..v.len()).find(|&i| !(v[i] < v[i - 1])) {
        return Check {
            name: name.into(),
            passed: false,
            detail: format!("not decreasing at step {i}: {:e} -> {:e}", v[i - 1], v[i]),
        };
    }
    let factor = v[0] / v[v.len() - 1];
    Check {
        name: name.into(),
        passed: factor >= min_factor,
        detail: format!("decreasing, total factor {factor:.3} (need {min_factor})"),
    }
}

fn split_row(line: &str, n: usize, lineno: usize) -> Result<Vec<&str>> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != n {
        return Err(Error::Parse(format!("line {lineno}: expected {n} fields, got {}", f.len())));
    }
    Ok(f)
}

fn num(s: &str, lineno: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("line {lineno}: `{s}` is not a number")))
}

fn body<'a>(text: &'a str, header: &str) -> Result<impl Iterator<Item = (usize, &'a str)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == header => Ok(lines.filter(|(_, l)| !l.trim().is_empty()).map(|(i, l)| (i + 1, l))),
        _ => Err(Error::Parse(format!("missing header `{header}`"))),
    }
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricRow>> {
    let mut out = Vec::new();
    for (n, line) in body(text, METRICS_HEADER)? {
        let f = split_row(line, 8, n)?;
        let eps = num(f[0], n)?;
        let values = match f[1] {
            "ok" => {
                let mut v = [0.0; 6];
                for (k, x) in f[2..].iter().enumerate() {
                    v[k] = num(x, n)?;
                }
                Some(v)
            }
            "failed" => None,
            s => return Err(Error::Parse(format!("line {n}: unknown status `{s}`"))),
        };
        out.push(MetricRow { eps, values });
    }
    Ok(out)
}

pub fn parse_monitors_csv(text: &str) -> Result<Vec<MonitorRow>> {
    let mut out = Vec::new();
    for (n, line) in body(text, MONITORS_HEADER)? {
        let f = split_row(line, 5, n)?;
        let power = f[2].trim().parse().map_err(|_| Error::Parse(format!("line {n}: bad power `{}`", f[2])))?;
        out.push(MonitorRow { eps: num(f[0], n)?, name: f[1].to_string(), power, raw: num(f[3], n)?, normalized: num(f[4], n)? });
    }
    Ok(out)
}

pub fn parse_decay_csv(text: &str) -> Result<Vec<DecayRow>> {
    let mut out = Vec::new();
    for (n, line) in body(text, DECAY_HEADER)? {
        let f = split_row(line, 5, n)?;
        let contaminated = match f[4] {
            "ok" => false,
            "contaminated" => true,
            s => return Err(Error::Parse(format!("line {n}: unknown flag `{s}`"))),
        };
        out.push(DecayRow { eps: num(f[0], n)?, t_end: num(f[1], n)?, integral: num(f[2], n)?, t_cross: num(f[3], n)?, contaminated });
    }
    Ok(out)
}

/// Log-log plot of the metrics against ε.
pub fn metrics_svg(rows: &[MetricRow]) -> String {
    const W: f64 = 560.0;
    const H: f64 = 400.0;
    const PAD: f64 = 60.0;
    const COLORS: [&str; 6] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];
    let pts: Vec<(f64, [f64; 6])> = rows.iter().filter_map(|r| r.values.map(|v| (r.eps, v))).collect();
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"11\">\n");
    let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let positive = |x: f64| x > 0.0 && x.is_finite();
    let xs: Vec<f64> = pts.iter().map(|p| p.0.log10()).collect();
    let ys: Vec<f64> = pts.iter().flat_map(|p| p.1.iter().copied().filter(|&v| positive(v)).map(f64::log10)).collect();
    if xs.is_empty() || ys.is_empty() {
        s.push_str("<text x=\"20\" y=\"30\">no data</text>\n</svg>\n");
        return s;
    }
    let range = |v: &[f64]| {
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        if hi - lo < 1e-12 { (lo - 0.5, hi + 0.5) } else { (lo, hi) }
    };
    let (x0, x1) = range(&xs);
    let (y0, y1) = range(&ys);
    let px = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let _ = writeln!(s, "<line x1=\"{PAD}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>", H - PAD, W - PAD, H - PAD);
    let _ = writeln!(s, "<line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{}\" stroke=\"black\"/>", H - PAD);
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\">log10 eps</text>", W / 2.0 - 20.0, H - 20.0);
    let _ = writeln!(s, "<text x=\"10\" y=\"{}\" transform=\"rotate(-90 10 {})\">log10 metric</text>", H / 2.0, H / 2.0);
    for (m, name) in MetricRecord::NAMES.iter().enumerate() {
        let line: Vec<String> = pts
            .iter()
            .filter(|p| positive(p.1[m]))
            .map(|p| format!("{:.2},{:.2}", px(p.0.log10()), py(p.1[m].log10())))
            .collect();
        if line.is_empty() {
            continue;
        }
        let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"{}\" points=\"{}\"/>", COLORS[m], line.join(" "));
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" fill=\"{}\">{name}</text>", W - PAD + 8.0, PAD + 14.0 * m as f64, COLORS[m]);
    }
    s.push_str("</svg>\n");
    s
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Formats {
    pub svg: bool,
}

/// Writes every report file into `dir` and returns the verdict.
pub fn emit_report(report: &SweepReport, cfg: &SweepConfig, dir: &Path, formats: Formats) -> Result<Verdict> {
    std::fs::create_dir_all(dir)?;
    let tables = Tables::from_report(report);
    let verdict = tables.verdict(&cfg.acceptance);
    std::fs::write(dir.join("metrics.csv"), tables.metrics_csv())?;
    std::fs::write(dir.join("monitors.csv"), tables.monitors_csv())?;
    std::fs::write(dir.join("decay.csv"), tables.decay_csv())?;
    std::fs::write(dir.join("geometry.json"), to_json(&report.geometry)?)?;
    std::fs::write(dir.join("summary.json"), to_json(&Summary { report, verdict: &verdict })?)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    if formats.svg {
        std::fs::write(dir.join("metrics.svg"), metrics_svg(&tables.metrics))?;
    }
    Ok(verdict)
}

#[derive(Serialize)]
struct Summary<'a> {
    report: &'a SweepReport,
    verdict: &'a Verdict,
}

pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Parse(e.to_string()))
}

/// Reads the tables of a report directory back and re-evaluates them
/// against the thresholds of its `config.toml`.
pub fn reevaluate(dir: &Path) -> Result<(Tables, Verdict)> {
    let cfg = SweepConfig::load(&dir.join("config.toml"))?;
    let metrics = parse_metrics_csv(&std::fs::read_to_string(dir.join("metrics.csv"))?)?;
    let monitors = parse_monitors_csv(&std::fs::read_to_string(dir.join("monitors.csv"))?)?;
    let decay_path = dir.join("decay.csv");
    let decay = if decay_path.exists() { parse_decay_csv(&std::fs::read_to_string(decay_path)?)? } else { vec![] };
    let tables = Tables { metrics, monitors, decay };
    let verdict = tables.verdict(&cfg.acceptance);
    Ok((tables, verdict))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(eps: f64, m: [f64; 6]) -> MetricRow {
        MetricRow { eps, values: Some(m) }
    }

    fn passing() -> Tables {
        let metrics = [0.5, 0.25, 0.125]
            .iter()
            .map(|&e| row(e, [e, 2.0 * e, 1.0, 3.0 * e, e, e]))
            .collect();
        let monitors = [0.5, 0.25, 0.125]
            .iter()
            .map(|&e| MonitorRow { eps: e, name: "kinetic".into(), power: 0, raw: 1.0 + e, normalized: 1.0 + e })
            .collect();
        Tables { metrics, monitors, decay: vec![] }
    }

    #[test]
    fn csv_round_trips() {
        let mut t = passing();
        t.metrics.push(MetricRow { eps: 0.0625, values: None });
        t.decay = vec![DecayRow { eps: 0.25, t_end: 0.1, integral: 0.02, t_cross: 0.3, contaminated: false }];
        assert_eq!(parse_metrics_csv(&t.metrics_csv()).unwrap(), t.metrics);
        assert_eq!(parse_monitors_csv(&t.monitors_csv()).unwrap(), t.monitors);
        assert_eq!(parse_decay_csv(&t.decay_csv()).unwrap(), t.decay);
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(parse_metrics_csv("").is_err());
        assert!(parse_metrics_csv("eps\n").is_err());
        assert!(parse_metrics_csv(&format!("{METRICS_HEADER}\n0.5,ok,1,2\n")).is_err());
        assert!(parse_metrics_csv(&format!("{METRICS_HEADER}\n0.5,weird,,,,,,\n")).is_err());
        assert!(parse_metrics_csv(&format!("{METRICS_HEADER}\n0.5,ok,1,2,x,4,5,6\n")).is_err());
        assert!(parse_monitors_csv(&format!("{MONITORS_HEADER}\n0.5,a,1.5,1,1\n")).is_err());
        assert!(parse_decay_csv(&format!("{DECAY_HEADER}\n0.5,1,1,1,maybe\n")).is_err());
    }

    #[test]
    fn verdict_codes() {
        let acc = Acceptance::default();
        assert_eq!(passing().verdict(&acc).exit_code(), 0);
        assert_eq!(Tables::default().verdict(&acc).exit_code(), 2);
        let mut t = passing();
        t.metrics[2].values.as_mut().unwrap()[3] = 10.0;
        let v = t.verdict(&acc);
        assert_eq!(v.exit_code(), 1);
        assert_eq!(v.failures()[0].name, "M4");
        let mut t = passing();
        t.metrics.push(MetricRow { eps: 0.0625, values: None });
        assert_eq!(t.verdict(&acc).failures()[0].name, "complete");
        let mut t = passing();
        t.monitors[0].normalized = 100.0;
        assert_eq!(t.verdict(&acc).exit_code(), 1);
    }

    #[test]
    fn monotone_check_is_strict_per_pair() {
        assert!(monotone_check("M", &[4.0, 2.0, 1.0], 1.5).passed);
        assert!(!monotone_check("M", &[4.0, 2.0, 2.0], 1.5).passed);
        assert!(!monotone_check("M", &[4.0, 5.0, 1.0], 1.5).passed);
        assert!(!monotone_check("M", &[1.2, 1.1, 1.0], 1.5).passed);
        assert!(!monotone_check("M", &[f64::NAN, 1.0], 1.5).passed);
    }

    #[test]
    fn decay_checks() {
        let mut t = passing();
        t.decay = [0.25, 0.125, 0.0625]
            .iter()
            .map(|&e| DecayRow { eps: e, t_end: e, integral: 3.0 * e, t_cross: 2.0 * e, contaminated: false })
            .collect();
        assert!(t.verdict(&Acceptance::default()).passed());
        t.decay[2].integral = 3.0 * 0.0625f64.powi(2);
        assert!(!t.verdict(&Acceptance::default()).passed());
    }

    #[test]
    fn svg_is_well_formed() {
        let s = metrics_svg(&passing().metrics);
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert_eq!(s.matches("<polyline").count(), 6);
        assert!(metrics_svg(&[]).contains("no data"));
    }
}
