//! Tabular results with provenance headers and deterministic CSV emission.

use crate::error::{NelsonError, Result};
use crate::verify::BoundReport;
use std::path::Path;

/// A named table of f64 rows. The CSV rendering has two parts: a provenance
/// header of `#`-prefixed comment lines (config hash, tool version, wall-clock
/// timestamp) and the body (column header row plus data rows). The body is a
/// pure function of the inputs — reruns with the same configuration and seed
/// produce byte-identical bodies — while the header may differ in timestamp.
#[derive(Debug, Clone)]
pub struct ResultTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub config_hash: String,
    pub notes: Vec<String>,
}

impl ResultTable {
    pub fn new(name: &str, columns: &[&str], config_hash: &str) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            config_hash: config_hash.to_string(),
            notes: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    /// All numbers in scientific notation with 17 significant digits, enough
    /// to round-trip an f64 exactly.
    pub fn body(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn header(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# table: {}\n", self.name));
        out.push_str(&format!("# config: {}\n", self.config_hash));
        out.push_str(&format!(
            "# tool: nelson {}\n",
            env!("CARGO_PKG_VERSION")
        ));
        out.push_str(&format!("# generated: {}\n", unix_timestamp()));
        for note in &self.notes {
            out.push_str(&format!("# note: {note}\n"));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        format!("{}{}", self.header(), self.body())
    }

    pub fn write_csv(&self, dir: &Path) -> Result<std::path::PathBuf> {
        std::fs::create_dir_all(dir)?;
        let short = &self.config_hash[..8.min(self.config_hash.len())];
        let path = dir.join(format!("{}_{}.csv", self.name, short));
        std::fs::write(&path, self.to_csv())?;
        Ok(path)
    }
}

fn unix_timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Strip `#` comment lines; used to compare reruns for determinism.
pub fn csv_body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

/// One row per sampled parameter value, with the fitted constants and the
/// verdict appended as notes.
pub fn bound_report_table(rep: &BoundReport, config_hash: &str) -> ResultTable {
    let mut t = ResultTable::new(&rep.name, &["parameter", "value"], config_hash);
    for &(p, v) in &rep.rows {
        t.push_row(vec![p, v]);
    }
    for (name, val) in &rep.fitted {
        t.notes.push(format!("fitted {name} = {val:.6e}"));
    }
    t.notes.push(format!("max_violation = {:.6e}", rep.max_violation));
    if let Some(loc) = &rep.violation_location {
        t.notes.push(format!("violation_location = {loc}"));
    }
    if let Some(r) = rep.stability_ratio {
        t.notes.push(format!("stability_ratio = {r:.6e}"));
    }
    t.notes
        .push(format!("passed = {}", if rep.passed { "true" } else { "false" }));
    for n in &rep.notes {
        t.notes.push(n.clone());
    }
    t
}

/// Emit a gnuplot script next to a CSV so `gnuplot <script>` renders it.
pub fn gnuplot_script(csv_path: &Path) -> Result<std::path::PathBuf> {
    let text = std::fs::read_to_string(csv_path)?;
    let body = csv_body(&text);
    let mut lines = body.lines();
    let header = lines
        .next()
        .ok_or_else(|| NelsonError::InvalidParameter("empty CSV".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 2 {
        return Err(NelsonError::InvalidParameter(
            "CSV needs at least two columns to plot".into(),
        ));
    }
    let stem = csv_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("plot");
    let script_path = csv_path.with_extension("gp");
    let png = csv_path.with_extension("png");
    let mut script = String::new();
    script.push_str("set datafile separator ','\n");
    script.push_str("set datafile commentschars '#'\n");
    script.push_str("set key autotitle columnhead\n");
    script.push_str(&format!("set xlabel '{}'\n", cols[0]));
    script.push_str("set grid\n");
    script.push_str(&format!("set terminal pngcairo size 900,600\n"));
    script.push_str(&format!("set output '{}'\n", png.display()));
    script.push_str(&format!("set title '{stem}'\n"));
    let plots: Vec<String> = (2..=cols.len())
        .map(|c| {
            format!(
                "'{}' using 1:{} with linespoints",
                csv_path.display(),
                c
            )
        })
        .collect();
    script.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    std::fs::write(&script_path, script)?;
    Ok(script_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn body_is_deterministic_and_full_precision() {
        let mut t = ResultTable::new("demo", &["x", "y"], "abcd1234");
        t.push_row(vec![1.0, std::f64::consts::PI]);
        t.push_row(vec![2.0, 1.0 / 3.0]);
        let b1 = t.body();
        let b2 = t.body();
        assert_eq!(b1, b2);
        assert!(b1.contains("3.1415926535897931e0"));
        // round-trip check
        let val: f64 = b1
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .nth(1)
            .unwrap()
            .parse()
            .unwrap();
        assert_eq!(val, std::f64::consts::PI);
    }

    #[test]
    fn header_stripping() {
        let mut t = ResultTable::new("demo", &["x"], "abcd1234");
        t.push_row(vec![1.0]);
        let full = t.to_csv();
        assert!(full.starts_with("# table: demo"));
        assert_eq!(csv_body(&full), t.body());
    }

    #[test]
    fn writes_named_csv_and_gnuplot_pair() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = ResultTable::new("sweep", &["sigma", "energy"], "deadbeefcafe");
        t.push_row(vec![0.5, -1.0]);
        t.push_row(vec![0.25, -1.1]);
        let p = t.write_csv(dir.path()).unwrap();
        assert_eq!(
            p.file_name().unwrap().to_str().unwrap(),
            "sweep_deadbeef.csv"
        );
        let gp = gnuplot_script(&p).unwrap();
        let text = std::fs::read_to_string(gp).unwrap();
        assert!(text.contains("using 1:2"));
    }
}
