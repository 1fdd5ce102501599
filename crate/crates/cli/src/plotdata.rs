//! Whitespace-delimited data files for external plotting tools.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use weakdep::bedistance::BEEstimate;
use weakdep::dependence::{DependenceProfile, SurrogateEstimate};
use weakdep::rates::MIN_FIT_POINTS;

/// One curve: log-log-ready rows plus the rows that were held back.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
    pub censored: Vec<(Vec<f64>, String)>,
}

impl Curve {
    fn new(name: impl Into<String>, columns: Vec<&'static str>) -> Self {
        Self {
            name: name.into(),
            columns,
            rows: Vec::new(),
            censored: Vec::new(),
        }
    }

    /// Keep the row if every value is positive and finite, else censor it.
    fn push(&mut self, row: Vec<f64>, reason_if_censored: &str) {
        if row.iter().all(|v| *v > 0.0 && v.is_finite()) {
            self.rows.push(row);
        } else {
            self.censored.push((row, reason_if_censored.into()));
        }
    }
}

/// `n delta low high`; Monte Carlo points within their band of zero are censored,
/// matching the rate fit.
pub fn rate_curve(name: impl Into<String>, estimates: &[BEEstimate]) -> Curve {
    let mut c = Curve::new(name, vec!["n", "delta", "low", "high"]);
    for e in estimates {
        let row = vec![e.n as f64, e.delta, e.low, e.high];
        let below_band = e.halfwidth() > 0.0 && e.delta <= e.halfwidth();
        if below_band {
            c.censored.push((row, "below band half-width".into()));
        } else {
            // the lower end may sit at zero; a log axis cannot show it
            let low = if e.low > 0.0 { e.low } else { e.delta };
            c.push(vec![e.n as f64, e.delta, low, e.high], "zero estimate");
        }
    }
    c
}

/// `l theta_prime theta_star`.
pub fn profile_curve(profile: &DependenceProfile) -> Curve {
    let mut c = Curve::new("depcoef", vec!["l", "theta_prime", "theta_star"]);
    for e in &profile.entries {
        c.push(vec![e.l as f64, e.theta_prime, e.theta_star], "zero coefficient");
    }
    c
}

/// `k value low high` with a two-stderr band.
pub fn surrogate_curve(estimates: &[SurrogateEstimate]) -> Curve {
    let mut c = Curve::new("surrogate", vec!["k", "value", "low", "high"]);
    for s in estimates {
        let low = (s.value - 2.0 * s.stderr).max(0.0);
        let low = if low > 0.0 { low } else { s.value };
        c.push(vec![s.k as f64, s.value, low, s.value + 2.0 * s.stderr], "zero estimate");
    }
    c
}

fn render(columns: &[&str], rows: &[Vec<f64>], extra_header: &str, reasons: Option<&[String]>) -> String {
    let mut out = String::new();
    if !extra_header.is_empty() {
        let _ = writeln!(out, "# {extra_header}");
    }
    let mut head = columns.join(" ");
    if reasons.is_some() {
        head.push_str(" reason");
    }
    let _ = writeln!(out, "# {head}");
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        if let Some(r) = reasons {
            out.push(' ');
            out.push_str(&r[i].replace(' ', "-"));
        }
        out.push('\n');
    }
    out
}

/// Write `<name>.dat` for the kept rows and `<name>.censored.dat` for the
/// censored ones. Empty parts produce no file; a curve with nothing to plot
/// produces a warning.
pub fn emit_plotdata(dir: &Path, curves: &[Curve], warnings: &mut Vec<String>) -> std::io::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if curves.iter().all(|c| c.rows.is_empty() && c.censored.is_empty()) {
        warnings.push("no results to plot; no plot-data files written".into());
        return Ok(written);
    }
    for c in curves {
        if c.rows.is_empty() {
            warnings.push(format!("{}: no positive rows to plot", c.name));
        } else {
            if c.columns[0] == "n" && c.rows.len() < MIN_FIT_POINTS {
                warnings.push(format!("{}: only {} plottable points", c.name, c.rows.len()));
            }
            let path = dir.join(format!("{}.dat", c.name));
            std::fs::write(&path, render(&c.columns, &c.rows, &c.name, None))?;
            written.push(path);
        }
        if !c.censored.is_empty() {
            let rows: Vec<Vec<f64>> = c.censored.iter().map(|(r, _)| r.clone()).collect();
            let reasons: Vec<String> = c.censored.iter().map(|(_, r)| r.clone()).collect();
            let path = dir.join(format!("{}.censored.dat", c.name));
            let header = format!("{} (censored rows)", c.name);
            std::fs::write(&path, render(&c.columns, &rows, &header, Some(&reasons)))?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_results_write_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut warnings = Vec::new();
        let files = emit_plotdata(dir.path(), &[], &mut warnings).unwrap();
        assert!(files.is_empty());
        assert_eq!(warnings.len(), 1);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn zero_rows_go_to_the_sidecar() {
        let mut c = Curve::new("x", vec!["l", "a", "b"]);
        c.push(vec![1.0, 0.5, 0.7], "zero");
        c.push(vec![2.0, 0.0, 0.1], "zero coefficient");
        let dir = tempfile::tempdir().unwrap();
        let mut warnings = Vec::new();
        let files = emit_plotdata(dir.path(), &[c], &mut warnings).unwrap();
        assert_eq!(files.len(), 2);
        let main = std::fs::read_to_string(dir.path().join("x.dat")).unwrap();
        assert_eq!(main, "# x\n# l a b\n1 0.5 0.7\n");
        let side = std::fs::read_to_string(dir.path().join("x.censored.dat")).unwrap();
        assert!(side.ends_with("2 0 0.1 zero-coefficient\n"));
    }
}
