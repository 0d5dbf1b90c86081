//! Benchmark harness: accuracy-table ingestion, tie-aware rank correlations,
//! and selection reports.
//!
//! Tables are user-supplied (the repo ships only tiny synthetic fixtures).
//! CSV header: `arch_id,encoding,<dataset>[,<dataset>...]`, UTF-8, `.`
//! decimals. JSON: `{"schema": 1, "records": [...]}` or a bare record array.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::parse::SCHEMA_VERSION;

/// One benchmark row: an architecture and its test accuracy per dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub arch_id: String,
    pub encoding: String,
    /// Dataset name -> test accuracy in percent, finite, within [0, 100].
    pub metrics: BTreeMap<String, f64>,
}

/// Correlation and selection statistics for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub dataset: String,
    pub n: usize,
    pub spearman: f64,
    pub kendall: f64,
    pub argmax_arch: String,
    pub argmax_acc: f64,
    /// Accuracy rank of the argmax-proxy architecture, 1 = best; equal
    /// accuracies share the better rank.
    pub argmax_rank: usize,
    pub k: usize,
    /// Mean accuracy of the k highest-proxy architectures.
    pub topk_mean: f64,
}

/// Table formats for [`load_records`] and [`emit_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Json,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("row {row}, column {column}: bad accuracy value {value:?}")]
    BadNumber {
        row: usize,
        column: String,
        value: String,
    },
    #[error("missing column {name:?} (header must start arch_id,encoding,<dataset>...)")]
    MissingColumn { name: &'static str },
    #[error("duplicate arch_id values: {}", format_duplicates(.duplicates))]
    DuplicateIds {
        duplicates: Vec<(String, Vec<usize>)>,
    },
    #[error("records missing a score: {}", ids.join(", "))]
    MissingScores { ids: Vec<String> },
    #[error("records missing dataset {dataset:?}: {}", ids.join(", "))]
    MissingMetric { dataset: String, ids: Vec<String> },
    #[error("k = {k} exceeds table size {n}")]
    BadK { k: usize, n: usize },
    #[error(transparent)]
    Correlation(#[from] CorrelationError),
}

fn format_duplicates(dups: &[(String, Vec<usize>)]) -> String {
    dups.iter()
        .map(|(id, rows)| format!("{id} (rows {rows:?})"))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorrelationError {
    #[error("length mismatch: {x} vs {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("need at least 2 observations, got {0}")]
    TooShort(usize),
    #[error("correlation undefined: a sequence has zero rank variance")]
    Undefined,
    #[error("sequences must be finite")]
    NonFinite,
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

/// Loads and validates benchmark records. Duplicate `arch_id`s, missing
/// columns, and unparsable or non-finite accuracies are reported with row
/// numbers (1-based, header excluded).
pub fn load_records(path: &Path, format: TableFormat) -> Result<Vec<BenchmarkRecord>, BenchError> {
    let records = match format {
        TableFormat::Csv => load_csv(path)?,
        TableFormat::Json => load_json(path)?,
    };
    check_records(path, &records)?;
    Ok(records)
}

fn load_csv(path: &Path) -> Result<Vec<BenchmarkRecord>, BenchError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_to_bench_error(e, path))?;
    let headers = reader
        .headers()
        .map_err(|e| csv_to_bench_error(e, path))?
        .clone();
    if headers.get(0) != Some("arch_id") {
        return Err(BenchError::MissingColumn { name: "arch_id" });
    }
    if headers.get(1) != Some("encoding") {
        return Err(BenchError::MissingColumn { name: "encoding" });
    }
    let datasets: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
    if datasets.is_empty() {
        return Err(BenchError::Malformed {
            path: path.into(),
            message: "no dataset columns after arch_id,encoding".into(),
        });
    }

    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| csv_to_bench_error(e, path))?;
        let rownum = i + 1;
        let arch_id = row.get(0).unwrap_or("").to_string();
        let encoding = row.get(1).unwrap_or("").to_string();
        let mut metrics = BTreeMap::new();
        for (d, name) in datasets.iter().enumerate() {
            let raw = row.get(d + 2).ok_or_else(|| BenchError::Malformed {
                path: path.into(),
                message: format!("row {rownum}: missing value for column {name}"),
            })?;
            let value = parse_accuracy(raw, rownum, name)?;
            metrics.insert(name.clone(), value);
        }
        out.push(BenchmarkRecord {
            arch_id,
            encoding,
            metrics,
        });
    }
    Ok(out)
}

fn parse_accuracy(raw: &str, row: usize, column: &str) -> Result<f64, BenchError> {
    let bad = || BenchError::BadNumber {
        row,
        column: column.to_string(),
        value: raw.to_string(),
    };
    let value: f64 = raw.trim().parse().map_err(|_| bad())?;
    if !value.is_finite() || !(0.0..=100.0).contains(&value) {
        return Err(bad());
    }
    Ok(value)
}

fn csv_to_bench_error(e: csv::Error, path: &Path) -> BenchError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(source) => BenchError::Io {
                path: path.into(),
                source,
            },
            other => BenchError::Malformed {
                path: path.into(),
                message: format!("{other:?}"),
            },
        }
    } else {
        BenchError::Malformed {
            path: path.into(),
            message: e.to_string(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RecordsDoc {
    schema: u64,
    records: Vec<BenchmarkRecord>,
}

fn load_json(path: &Path) -> Result<Vec<BenchmarkRecord>, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.into(),
        source,
    })?;
    // Either the versioned wrapper or a bare array.
    let records = if text.trim_start().starts_with('[') {
        serde_json::from_str::<Vec<BenchmarkRecord>>(&text).map_err(|e| BenchError::Malformed {
            path: path.into(),
            message: e.to_string(),
        })?
    } else {
        let doc: RecordsDoc = serde_json::from_str(&text).map_err(|e| BenchError::Malformed {
            path: path.into(),
            message: e.to_string(),
        })?;
        doc.records
    };
    for (i, r) in records.iter().enumerate() {
        for (name, &v) in &r.metrics {
            if !v.is_finite() || !(0.0..=100.0).contains(&v) {
                return Err(BenchError::BadNumber {
                    row: i + 1,
                    column: name.clone(),
                    value: v.to_string(),
                });
            }
        }
    }
    Ok(records)
}

fn check_records(path: &Path, records: &[BenchmarkRecord]) -> Result<(), BenchError> {
    let mut seen: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        seen.entry(&r.arch_id).or_default().push(i + 1);
        if r.arch_id.is_empty() {
            return Err(BenchError::Malformed {
                path: path.into(),
                message: format!("row {}: empty arch_id", i + 1),
            });
        }
    }
    let mut duplicates: Vec<(String, Vec<usize>)> = seen
        .into_iter()
        .filter(|(_, rows)| rows.len() > 1)
        .map(|(id, rows)| (id.to_string(), rows))
        .collect();
    if !duplicates.is_empty() {
        duplicates.sort();
        return Err(BenchError::DuplicateIds { duplicates });
    }
    Ok(())
}

/// Writes records as the versioned JSON document.
pub fn save_records_json(records: &[BenchmarkRecord], path: &Path) -> Result<(), BenchError> {
    let doc = RecordsDoc {
        schema: SCHEMA_VERSION,
        records: records.to_vec(),
    };
    let text = serde_json::to_string_pretty(&doc).expect("records serialize");
    std::fs::write(path, text).map_err(|source| BenchError::Io {
        path: path.into(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Rank correlations
// ---------------------------------------------------------------------------

fn check_pair(xs: &[f64], ys: &[f64]) -> Result<(), CorrelationError> {
    if xs.len() != ys.len() {
        return Err(CorrelationError::LengthMismatch {
            x: xs.len(),
            y: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(CorrelationError::TooShort(xs.len()));
    }
    if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
        return Err(CorrelationError::NonFinite);
    }
    Ok(())
}

/// Fractional (average) ranks, 1-based: tied values share the mean of the
/// positions they occupy.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) share rank mean of (i+1)..=(j+1).
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = shared;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rho: Pearson correlation of the fractional rank vectors.
/// Undefined (error) when either sequence has zero rank variance.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, CorrelationError> {
    check_pair(xs, ys)?;
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for i in 0..rx.len() {
        let a = rx[i] - mx;
        let b = ry[i] - my;
        num += a * b;
        dx += a * a;
        dy += b * b;
    }
    if dx == 0.0 || dy == 0.0 {
        return Err(CorrelationError::Undefined);
    }
    Ok(num / (dx * dy).sqrt())
}

/// Kendall's tau-b with tie correction:
/// `(C - D) / sqrt((n0 - n1)(n0 - n2))`, discordant pairs counted by
/// merge-sort swap counting.
pub fn kendall(xs: &[f64], ys: &[f64]) -> Result<f64, CorrelationError> {
    check_pair(xs, ys)?;
    let n = xs.len();
    let mut pairs: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let pair_count = |run: u64| run * (run.saturating_sub(1)) / 2;

    // Tie counts over x and joint (x, y) runs.
    let mut tied_x = 0u64;
    let mut tied_xy = 0u64;
    {
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && pairs[j + 1].0 == pairs[i].0 {
                j += 1;
            }
            tied_x += pair_count((j - i + 1) as u64);
            let mut a = i;
            while a <= j {
                let mut b = a;
                while b < j && pairs[b + 1].1 == pairs[a].1 {
                    b += 1;
                }
                tied_xy += pair_count((b - a + 1) as u64);
                a = b + 1;
            }
            i = j + 1;
        }
    }

    // Discordant pairs = swaps needed to sort the y sequence.
    let mut ys_sorted: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let swaps = merge_count(&mut ys_sorted);

    // Tie counts over y.
    let mut tied_y = 0u64;
    {
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && ys_sorted[j + 1] == ys_sorted[i] {
                j += 1;
            }
            tied_y += pair_count((j - i + 1) as u64);
            i = j + 1;
        }
    }

    let n0 = pair_count(n as u64) as f64;
    let n1 = tied_x as f64;
    let n2 = tied_y as f64;
    let denom = (n0 - n1) * (n0 - n2);
    if denom <= 0.0 {
        return Err(CorrelationError::Undefined);
    }
    let con_minus_dis = n0 - n1 - n2 + tied_xy as f64 - 2.0 * swaps as f64;
    Ok((con_minus_dis / denom.sqrt()).clamp(-1.0, 1.0))
}

/// Stable merge sort counting inversions (equal elements are not inverted).
fn merge_count(values: &mut [f64]) -> u64 {
    let n = values.len();
    if n < 2 {
        return 0;
    }
    let mut buf = values.to_vec();
    let mut swaps = 0u64;
    let mut width = 1;
    while width < n {
        let mut lo = 0;
        while lo + width < n {
            let mid = lo + width;
            let hi = (mid + width).min(n);
            let (mut i, mut j, mut k) = (lo, mid, lo);
            while i < mid || j < hi {
                if i < mid && (j >= hi || values[i] <= values[j]) {
                    buf[k] = values[i];
                    i += 1;
                } else {
                    swaps += (mid - i) as u64;
                    buf[k] = values[j];
                    j += 1;
                }
                k += 1;
            }
            values[lo..hi].copy_from_slice(&buf[lo..hi]);
            lo = hi;
        }
        width *= 2;
    }
    swaps
}

// ---------------------------------------------------------------------------
// Ranking reports
// ---------------------------------------------------------------------------

/// Builds the per-dataset report: correlations between proxy scores and
/// accuracies, the argmax-proxy selection and its accuracy rank, and the
/// top-k mean accuracy. Score ties at the argmax and at the top-k boundary
/// break by ascending `arch_id`, so the report is invariant under record
/// permutation.
pub fn rank_report(
    records: &[BenchmarkRecord],
    scores: &HashMap<String, f64>,
    dataset: &str,
    k: usize,
) -> Result<RankingReport, BenchError> {
    let missing_scores: Vec<String> = records
        .iter()
        .filter(|r| !scores.contains_key(&r.arch_id))
        .map(|r| r.arch_id.clone())
        .collect();
    if !missing_scores.is_empty() {
        return Err(BenchError::MissingScores {
            ids: missing_scores,
        });
    }
    let missing_metric: Vec<String> = records
        .iter()
        .filter(|r| !r.metrics.contains_key(dataset))
        .map(|r| r.arch_id.clone())
        .collect();
    if !missing_metric.is_empty() {
        return Err(BenchError::MissingMetric {
            dataset: dataset.to_string(),
            ids: missing_metric,
        });
    }
    let n = records.len();
    if k > n {
        return Err(BenchError::BadK { k, n });
    }

    let xs: Vec<f64> = records.iter().map(|r| scores[&r.arch_id]).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.metrics[dataset]).collect();
    let rho = spearman(&xs, &ys)?;
    let tau = kendall(&xs, &ys)?;

    // Argmax by (score desc, arch_id asc).
    let best = records
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| {
            xs[*i]
                .total_cmp(&xs[*j])
                .then_with(|| b.arch_id.cmp(&a.arch_id))
        })
        .map(|(_, r)| r)
        .expect("records checked non-empty by spearman");
    let argmax_acc = best.metrics[dataset];
    let argmax_rank = 1 + ys.iter().filter(|&&a| a > argmax_acc).count();

    // Top-k by the same ordering.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        xs[b]
            .total_cmp(&xs[a])
            .then_with(|| records[a].arch_id.cmp(&records[b].arch_id))
    });
    let topk_mean = if k == 0 {
        0.0
    } else {
        order[..k].iter().map(|&i| ys[i]).sum::<f64>() / k as f64
    };

    Ok(RankingReport {
        dataset: dataset.to_string(),
        n,
        spearman: rho,
        kendall: tau,
        argmax_arch: best.arch_id.clone(),
        argmax_acc,
        argmax_rank,
        k,
        topk_mean,
    })
}

/// Report output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReportFormat::Json => write!(f, "json"),
            ReportFormat::Csv => write!(f, "csv"),
        }
    }
}

/// Writes a report with stable field order. The CSV layout is one
/// `metric,value` row per field; both formats round-trip through
/// [`load_report`].
pub fn emit_report(
    report: &RankingReport,
    path: &Path,
    format: ReportFormat,
) -> Result<(), BenchError> {
    let text = render_report(report, format);
    let mut file = std::fs::File::create(path).map_err(|source| BenchError::Io {
        path: path.into(),
        source,
    })?;
    file.write_all(text.as_bytes())
        .map_err(|source| BenchError::Io {
            path: path.into(),
            source,
        })
}

/// Renders a report to text without touching the filesystem.
pub fn render_report(report: &RankingReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            serde_json::to_string_pretty(report).expect("report serialization cannot fail")
        }
        ReportFormat::Csv => {
            let mut s = String::from("metric,value\n");
            s.push_str(&format!("dataset,{}\n", report.dataset));
            s.push_str(&format!("n,{}\n", report.n));
            s.push_str(&format!("spearman,{:?}\n", report.spearman));
            s.push_str(&format!("kendall,{:?}\n", report.kendall));
            s.push_str(&format!("argmax_arch,{}\n", report.argmax_arch));
            s.push_str(&format!("argmax_acc,{:?}\n", report.argmax_acc));
            s.push_str(&format!("argmax_rank,{}\n", report.argmax_rank));
            s.push_str(&format!("k,{}\n", report.k));
            s.push_str(&format!("topk_mean,{:?}\n", report.topk_mean));
            s
        }
    }
}

/// Reads a report back; the inverse of [`emit_report`] for both formats.
pub fn load_report(path: &Path, format: ReportFormat) -> Result<RankingReport, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.into(),
        source,
    })?;
    match format {
        ReportFormat::Json => serde_json::from_str(&text).map_err(|e| BenchError::Malformed {
            path: path.into(),
            message: e.to_string(),
        }),
        ReportFormat::Csv => {
            let mut fields: HashMap<&str, &str> = HashMap::new();
            for line in text.lines().skip(1) {
                if let Some((key, value)) = line.split_once(',') {
                    fields.insert(key, value);
                }
            }
            let get = |k: &str| {
                fields.get(k).copied().ok_or_else(|| BenchError::Malformed {
                    path: path.into(),
                    message: format!("missing metric row {k:?}"),
                })
            };
            let parse_f = |k: &str| -> Result<f64, BenchError> {
                get(k)?.parse().map_err(|_| BenchError::Malformed {
                    path: path.into(),
                    message: format!("bad number in metric row {k:?}"),
                })
            };
            let parse_u = |k: &str| -> Result<usize, BenchError> {
                get(k)?.parse().map_err(|_| BenchError::Malformed {
                    path: path.into(),
                    message: format!("bad integer in metric row {k:?}"),
                })
            };
            Ok(RankingReport {
                dataset: get("dataset")?.to_string(),
                n: parse_u("n")?,
                spearman: parse_f("spearman")?,
                kendall: parse_f("kendall")?,
                argmax_arch: get("argmax_arch")?.to_string(),
                argmax_acc: parse_f("argmax_acc")?,
                argmax_rank: parse_u("argmax_rank")?,
                k: parse_u("k")?,
                topk_mean: parse_f("topk_mean")?,
            })
        }
    }
}
