//! Per-evaluation metric rows, CSV round-tripping and an SVG line chart.

use super::HarnessError;
use std::fmt::Write as _;
use std::path::Path;

pub const CSV_SCHEMA: &str = "v1";
pub const CSV_HEADER: [&str; 10] = [
    "schema",
    "step",
    "e_l",
    "h_total",
    "alpha",
    "train_return",
    "test_return_median",
    "success_rate",
    "end_step_hist",
    "samples_per_step",
];

/// One evaluation point. Histograms cover training episodes since the
/// previous row and are indexed by interaction step `1..=e_max`.
/// Equality compares floats by bit pattern, so NaN placeholders match.
#[derive(Clone, Debug)]
pub struct MetricRow {
    pub step: u64,
    pub e_l: usize,
    /// Last entropy reading, NaN before the first update.
    pub h_total: f64,
    /// Last trend slope, NaN before the first fit.
    pub alpha: f64,
    /// Mean training return of episodes finished in the interval, NaN if none.
    pub train_return: f64,
    pub test_return_median: f64,
    pub success_rate: f64,
    pub end_step_hist: Vec<u64>,
    pub samples_per_step: Vec<u64>,
}

impl PartialEq for MetricRow {
    fn eq(&self, o: &Self) -> bool {
        let floats = |r: &Self| [r.h_total, r.alpha, r.train_return, r.test_return_median, r.success_rate].map(f64::to_bits);
        self.step == o.step
            && self.e_l == o.e_l
            && floats(self) == floats(o)
            && self.end_step_hist == o.end_step_hist
            && self.samples_per_step == o.samples_per_step
    }
}

/// Everything a run produces. Replaying the same config and seed gives an
/// identical log.
#[derive(Clone, Debug, PartialEq)]
pub struct RunLog {
    pub config: String,
    pub seed: u64,
    /// Word position of each named random stream at the end of the run.
    pub rng_states: Vec<(String, u128)>,
    pub rows: Vec<MetricRow>,
    pub checksum: String,
    pub episodes: u64,
    pub updates: u64,
    pub window: Option<usize>,
    pub diverged: Option<String>,
}

impl RunLog {
    /// Equality of everything except the config snapshot.
    pub fn same_outcome(&self, other: &RunLog) -> bool {
        RunLog {
            config: String::new(),
            ..self.clone()
        } == RunLog {
            config: String::new(),
            ..other.clone()
        }
    }

    /// Plain-text summary written next to the CSV.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "episodes = {}", self.episodes);
        let _ = writeln!(s, "updates = {}", self.updates);
        let _ = writeln!(s, "window = {}", self.window.map_or("never".into(), |w| w.to_string()));
        let _ = writeln!(s, "checksum = {}", self.checksum);
        for (name, pos) in &self.rng_states {
            let _ = writeln!(s, "rng.{name} = {pos}");
        }
        if let Some(d) = &self.diverged {
            let _ = writeln!(s, "diverged = {d}");
        }
        s
    }
}

fn join_hist(h: &[u64]) -> String {
    h.iter().map(u64::to_string).collect::<Vec<_>>().join(";")
}

fn split_hist(s: &str) -> Result<Vec<u64>, HarnessError> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';').map(|v| v.parse().map_err(|_| HarnessError::Csv(format!("bad histogram entry '{v}'")))).collect()
}

pub fn csv_string(rows: &[MetricRow]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| HarnessError::Csv(e.to_string());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            CSV_SCHEMA.to_string(),
            r.step.to_string(),
            r.e_l.to_string(),
            r.h_total.to_string(),
            r.alpha.to_string(),
            r.train_return.to_string(),
            r.test_return_median.to_string(),
            r.success_rate.to_string(),
            join_hist(&r.end_step_hist),
            join_hist(&r.samples_per_step),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Csv(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| HarnessError::Csv(e.to_string()))
}

pub fn parse_csv(text: &str) -> Result<Vec<MetricRow>, HarnessError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| HarnessError::Csv(e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(HarnessError::Csv(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| HarnessError::Csv(e.to_string()))?;
        if &rec[0] != CSV_SCHEMA {
            return Err(HarnessError::Csv(format!("unsupported schema '{}'", &rec[0])));
        }
        let f = |i: usize| rec[i].parse::<f64>().map_err(|_| HarnessError::Csv(format!("bad number '{}' in {}", &rec[i], CSV_HEADER[i])));
        rows.push(MetricRow {
            step: rec[1].parse().map_err(|_| HarnessError::Csv(format!("bad step '{}'", &rec[1])))?,
            e_l: rec[2].parse().map_err(|_| HarnessError::Csv(format!("bad e_l '{}'", &rec[2])))?,
            h_total: f(3)?,
            alpha: f(4)?,
            train_return: f(5)?,
            test_return_median: f(6)?,
            success_rate: f(7)?,
            end_step_hist: split_hist(&rec[8])?,
            samples_per_step: split_hist(&rec[9])?,
        });
    }
    Ok(rows)
}

pub fn emit_csv(rows: &[MetricRow], path: &Path) -> Result<(), HarnessError> {
    std::fs::write(path, csv_string(rows)?).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

/// Line chart of median test return (left axis) and the episode-length
/// limit (right axis) against training steps.
pub fn plot_svg(rows: &[MetricRow], e_max: usize) -> String {
    const W: f64 = 640.0;
    const H: f64 = 360.0;
    const PAD: f64 = 50.0;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    let max_step = rows.iter().map(|r| r.step).max().unwrap_or(0).max(1) as f64;
    let returns: Vec<f64> = rows.iter().map(|r| r.test_return_median).filter(|v| v.is_finite()).collect();
    let lo = returns.iter().cloned().fold(0.0_f64, f64::min);
    let hi = returns.iter().cloned().fold(lo + 1.0, f64::max);
    let x = |step: u64| PAD + (W - 2.0 * PAD) * step as f64 / max_step;
    let y = |v: f64, lo: f64, hi: f64| H - PAD - (H - 2.0 * PAD) * (v - lo) / (hi - lo);
    let line = |pts: Vec<(f64, f64)>, color: &str| {
        let d: Vec<String> = pts.iter().map(|(px, py)| format!("{px:.1},{py:.1}")).collect();
        format!(r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, d.join(" "))
    };
    let ret_pts = rows
        .iter()
        .filter(|r| r.test_return_median.is_finite())
        .map(|r| (x(r.step), y(r.test_return_median, lo, hi)))
        .collect();
    let el_pts = rows.iter().map(|r| (x(r.step), y(r.e_l as f64, 0.0, e_max.max(1) as f64))).collect();
    let _ = writeln!(s, "{}", line(ret_pts, "steelblue"));
    let _ = writeln!(s, "{}", line(el_pts, "darkorange"));
    let _ = writeln!(s, r#"<text x="{PAD}" y="{}" font-size="12">{lo:.1}</text>"#, H - PAD + 14.0);
    let _ = writeln!(s, r#"<text x="4" y="{}" font-size="12">{hi:.1}</text>"#, PAD + 4.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12">step {max_step}</text>"#, W - PAD - 60.0, H - PAD + 28.0);
    let _ = writeln!(s, r#"<text x="{}" y="20" font-size="12" fill="steelblue">median test return</text>"#, PAD);
    let _ = writeln!(s, r#"<text x="{}" y="20" font-size="12" fill="darkorange">episode length limit (max {e_max})</text>"#, PAD + 180.0);
    s.push_str("</svg>\n");
    s
}

pub fn emit_plot(rows: &[MetricRow], e_max: usize, path: &Path) -> Result<(), HarnessError> {
    std::fs::write(path, plot_svg(rows, e_max)).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(step: u64) -> MetricRow {
        MetricRow {
            step,
            e_l: 25,
            h_total: 123.456789012345,
            alpha: -1e-7,
            train_return: f64::NAN,
            test_return_median: -2.5,
            success_rate: 0.125,
            end_step_hist: vec![0, 3, 1],
            samples_per_step: vec![4, 4, 1],
        }
    }

    fn same(a: &MetricRow, b: &MetricRow) -> bool {
        let f = |x: f64, y: f64| x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan());
        a.step == b.step
            && a.e_l == b.e_l
            && f(a.h_total, b.h_total)
            && f(a.alpha, b.alpha)
            && f(a.train_return, b.train_return)
            && f(a.test_return_median, b.test_return_median)
            && f(a.success_rate, b.success_rate)
            && a.end_step_hist == b.end_step_hist
            && a.samples_per_step == b.samples_per_step
    }

    #[test]
    fn empty_log_is_header_only() {
        let s = csv_string(&[]).unwrap();
        assert_eq!(s, format!("{}\n", CSV_HEADER.join(",")));
        assert!(parse_csv(&s).unwrap().is_empty());
    }

    #[test]
    fn rows_round_trip_bit_exactly() {
        let mut rows = vec![row(0), row(10_000)];
        rows[1].h_total = 0.1 + 0.2;
        rows[1].end_step_hist.clear();
        let back = parse_csv(&csv_string(&rows).unwrap()).unwrap();
        assert_eq!(back.len(), 2);
        assert!(rows.iter().zip(&back).all(|(a, b)| same(a, b)));
    }

    #[test]
    fn rejects_foreign_csv() {
        assert!(parse_csv("a,b\n1,2\n").is_err());
        let s = csv_string(&[row(0)]).unwrap().replace("\nv1,", "\nv9,");
        assert!(parse_csv(&s).is_err());
    }

    #[test]
    fn plot_is_well_formed_svg() {
        let svg = plot_svg(&[row(0), row(5)], 100);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(plot_svg(&[], 10).contains("</svg>"));
    }

    #[test]
    fn unwritable_path_is_an_error() {
        let p = Path::new("/nonexistent-dir/x/metrics.csv");
        assert!(matches!(emit_csv(&[], p), Err(HarnessError::Io(_))));
    }
}
