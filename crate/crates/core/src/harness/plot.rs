use std::io::Write;

use super::{HarnessError, ResultRow, SweepValue};

pub const PLOT_HEADER: &str = "series\tx\tmean\tstderr\tn";

/// Mean delay over seeds at one x value of one series.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesPoint {
    pub series: String,
    pub x: String,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`; 0 for a single seed.
    pub stderr: f64,
    pub n: usize,
}

fn x_label(v: &SweepValue) -> String {
    match v {
        SweepValue::None => "0".into(),
        other => other.label(),
    }
}

/// Groups successful rows by (mode, x) in order of first appearance.
pub fn aggregate(rows: &[ResultRow]) -> Vec<SeriesPoint> {
    let mut groups: Vec<(String, String, Vec<f64>)> = Vec::new();
    for r in rows {
        let Some(d) = r.avg_delay_ms else { continue };
        let (series, x) = (r.mode.to_string(), x_label(&r.sweep));
        match groups.iter_mut().find(|(s, xx, _)| *s == series && *xx == x) {
            Some((_, _, v)) => v.push(d),
            None => groups.push((series, x, vec![d])),
        }
    }
    groups
        .into_iter()
        .map(|(series, x, v)| {
            let n = v.len();
            let mean = v.iter().sum::<f64>() / n as f64;
            let stderr = if n > 1 {
                let var = v.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            SeriesPoint { series, x, mean, stderr, n }
        })
        .collect()
}

/// Writes the tab-separated series for `figure_id`: a `# figure` comment,
/// the header and one line per (series, x).
pub fn emit_plot_data<W: Write>(rows: &[ResultRow], figure_id: &str, mut out: W) -> Result<(), HarnessError> {
    let points = aggregate(rows);
    if points.is_empty() {
        return Err(HarnessError::EmptyRows);
    }
    writeln!(out, "# figure {figure_id}")?;
    writeln!(out, "{PLOT_HEADER}")?;
    for p in points {
        writeln!(out, "{}\t{}\t{}\t{}\t{}", p.series, p.x, p.mean, p.stderr, p.n)?;
    }
    Ok(())
}
