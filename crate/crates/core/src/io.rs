//! File formats: wide price CSV, spin CSV, model JSON, windowed-series CSV
//! with a JSON metadata header, and tree/degree JSON.
//!
//! Floats are serialized in the shortest form that parses back to the same
//! bits, so every numeric output round-trips exactly.

use crate::analytics::{SeriesKind, TimeSeriesReport};
use crate::error::{CoreError, CoreResult};
use crate::exact::CouplingModel;
use crate::graph::{PowerLawFit, Tree};
use crate::spin::{PriceSeries, SpinMatrix, WindowSpec};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

/// Outcome of price ingestion: which dates were dropped for missing data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub dropped_dates: Vec<String>,
    pub first_date: String,
    pub last_date: String,
    pub labels: Vec<String>,
}

/// Reads the wide price CSV `date,<label>_open,<label>_close,...`.
///
/// Rows with any missing (empty) value are dropped and reported; malformed
/// numbers are line-numbered errors.
pub fn read_price_csv<R: Read>(reader: R) -> CoreResult<(PriceSeries, IngestReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CoreError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let mut cols = headers.iter();
    match cols.next() {
        Some("date") => {}
        other => {
            return Err(CoreError::Parse {
                line: 1,
                message: format!("first column must be 'date', found {other:?}"),
            })
        }
    }
    let mut open_col: BTreeMap<String, usize> = BTreeMap::new();
    let mut close_col: BTreeMap<String, usize> = BTreeMap::new();
    let mut label_order: Vec<String> = Vec::new();
    for (idx, name) in headers.iter().enumerate().skip(1) {
        if let Some(label) = name.strip_suffix("_open") {
            if !close_col.contains_key(label) && !open_col.contains_key(label) {
                label_order.push(label.to_string());
            }
            if open_col.insert(label.to_string(), idx).is_some() {
                return Err(CoreError::Parse {
                    line: 1,
                    message: format!("duplicate column {name}"),
                });
            }
        } else if let Some(label) = name.strip_suffix("_close") {
            if !close_col.contains_key(label) && !open_col.contains_key(label) {
                label_order.push(label.to_string());
            }
            if close_col.insert(label.to_string(), idx).is_some() {
                return Err(CoreError::Parse {
                    line: 1,
                    message: format!("duplicate column {name}"),
                });
            }
        } else {
            return Err(CoreError::Parse {
                line: 1,
                message: format!(
                    "column {name} must end in _open or _close"
                ),
            });
        }
    }
    for label in &label_order {
        if !open_col.contains_key(label) || !close_col.contains_key(label) {
            return Err(CoreError::Parse {
                line: 1,
                message: format!("label {label} is missing one of its _open/_close columns"),
            });
        }
    }
    if label_order.is_empty() {
        return Err(CoreError::Parse {
            line: 1,
            message: "no asset columns found".into(),
        });
    }

    let mut dates = Vec::new();
    let mut open_rows: Vec<Vec<f64>> = Vec::new();
    let mut close_rows: Vec<Vec<f64>> = Vec::new();
    let mut dropped = Vec::new();
    let mut rows_read = 0usize;
    for (row_idx, record) in rdr.records().enumerate() {
        let line = row_idx + 2;
        let record = record.map_err(|e| CoreError::Parse {
            line,
            message: e.to_string(),
        })?;
        rows_read += 1;
        if record.len() != headers.len() {
            return Err(CoreError::Parse {
                line,
                message: format!(
                    "expected {} fields, found {}",
                    headers.len(),
                    record.len()
                ),
            });
        }
        let date = record.get(0).unwrap_or("").to_string();
        if record.iter().skip(1).any(|f| f.is_empty()) {
            dropped.push(date);
            continue;
        }
        let parse = |idx: usize| -> CoreResult<f64> {
            let field = record.get(idx).unwrap();
            field.parse::<f64>().map_err(|_| CoreError::Parse {
                line,
                message: format!("'{field}' is not a number (column {})", &headers[idx]),
            })
        };
        let mut open_row = Vec::with_capacity(label_order.len());
        let mut close_row = Vec::with_capacity(label_order.len());
        for label in &label_order {
            open_row.push(parse(open_col[label])?);
            close_row.push(parse(close_col[label])?);
        }
        dates.push(date);
        open_rows.push(open_row);
        close_rows.push(close_row);
    }
    if dates.is_empty() {
        return Err(CoreError::InsufficientData(
            "no complete price rows in the input".into(),
        ));
    }
    let t = dates.len();
    let n = label_order.len();
    let open = DMatrix::from_fn(t, n, |r, c| open_rows[r][c]);
    let close = DMatrix::from_fn(t, n, |r, c| close_rows[r][c]);
    let report = IngestReport {
        rows_read,
        rows_kept: t,
        dropped_dates: dropped,
        first_date: dates[0].clone(),
        last_date: dates[t - 1].clone(),
        labels: label_order.clone(),
    };
    let series = PriceSeries::new(label_order, dates, open, close)?;
    Ok((series, report))
}

/// Writes the spin CSV `date,<label>,...` with entries `1` or `-1`.
/// Matrices without dates get the row index as the date column.
pub fn write_spin_csv<W: Write>(writer: W, spins: &SpinMatrix) -> CoreResult<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["date".to_string()];
    header.extend(spins.labels().iter().cloned());
    w.write_record(&header)
        .map_err(|e| CoreError::InvalidInput(e.to_string()))?;
    for t in 0..spins.num_days() {
        let date = match spins.dates() {
            Some(d) => d[t].clone(),
            None => t.to_string(),
        };
        let mut record = vec![date];
        for c in 0..spins.num_assets() {
            record.push(if spins.spins()[(t, c)] > 0 { "1" } else { "-1" }.to_string());
        }
        w.write_record(&record)
            .map_err(|e| CoreError::InvalidInput(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a spin CSV produced by [`write_spin_csv`].
pub fn read_spin_csv<R: Read>(reader: R) -> CoreResult<SpinMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CoreError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.get(0) != Some("date") {
        return Err(CoreError::Parse {
            line: 1,
            message: "first column must be 'date'".into(),
        });
    }
    let labels: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    if labels.is_empty() {
        return Err(CoreError::Parse {
            line: 1,
            message: "no asset columns found".into(),
        });
    }
    let mut dates = Vec::new();
    let mut rows: Vec<Vec<i8>> = Vec::new();
    for (row_idx, record) in rdr.records().enumerate() {
        let line = row_idx + 2;
        let record = record.map_err(|e| CoreError::Parse {
            line,
            message: e.to_string(),
        })?;
        if record.len() != labels.len() + 1 {
            return Err(CoreError::Parse {
                line,
                message: format!(
                    "expected {} fields, found {}",
                    labels.len() + 1,
                    record.len()
                ),
            });
        }
        dates.push(record.get(0).unwrap().to_string());
        let mut row = Vec::with_capacity(labels.len());
        for field in record.iter().skip(1) {
            match field {
                "1" => row.push(1i8),
                "-1" => row.push(-1i8),
                other => {
                    return Err(CoreError::Parse {
                        line,
                        message: format!("spin entry must be 1 or -1, found '{other}'"),
                    })
                }
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CoreError::InsufficientData("no spin rows in the input".into()));
    }
    let t = rows.len();
    let n = labels.len();
    let m = DMatrix::from_fn(t, n, |r, c| rows[r][c]);
    SpinMatrix::new(labels, m, Some(dates))
}

/// Wire form of a coupling model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelJson {
    pub labels: Vec<String>,
    /// Row-major coupling matrix.
    #[serde(rename = "J")]
    pub couplings: Vec<Vec<f64>>,
    #[serde(rename = "h")]
    pub fields: Vec<f64>,
    pub diagonal_meaningful: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

impl ModelJson {
    pub fn from_model(model: &CouplingModel, warnings: &[String]) -> Self {
        let n = model.len();
        let couplings = (0..n)
            .map(|i| (0..n).map(|j| model.couplings()[(i, j)]).collect())
            .collect();
        ModelJson {
            labels: model.labels().to_vec(),
            couplings,
            fields: model.fields().iter().copied().collect(),
            diagonal_meaningful: model.diagonal_meaningful(),
            warnings: warnings.to_vec(),
            meta: None,
        }
    }

    pub fn into_model(self) -> CoreResult<CouplingModel> {
        let n = self.fields.len();
        if self.couplings.len() != n || self.couplings.iter().any(|row| row.len() != n) {
            return Err(CoreError::DimensionMismatch(
                "model JSON coupling matrix is not square against h".into(),
            ));
        }
        let couplings = DMatrix::from_fn(n, n, |i, j| self.couplings[i][j]);
        let fields = DVector::from_vec(self.fields);
        if self.diagonal_meaningful {
            CouplingModel::with_meaningful_diagonal(self.labels, couplings, fields)
        } else {
            CouplingModel::new(self.labels, couplings, fields)
        }
    }
}

pub fn write_model_json<W: Write>(writer: W, model: &ModelJson) -> CoreResult<()> {
    serde_json::to_writer_pretty(writer, model)?;
    Ok(())
}

pub fn read_model_json<R: Read>(reader: R) -> CoreResult<ModelJson> {
    Ok(serde_json::from_reader(reader)?)
}

/// Metadata line carried at the top of a series CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub kind: String,
    pub width: usize,
    pub shift: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default)]
    pub smoothed_half_width: Option<usize>,
    #[serde(default)]
    pub normalized: bool,
    #[serde(default)]
    pub degenerate_normalization: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

/// Writes `# {json}` followed by `window_start,value` rows; gaps are empty
/// fields.
pub fn write_series_csv<W: Write>(
    mut writer: W,
    report: &TimeSeriesReport,
    meta: &SeriesMeta,
) -> CoreResult<()> {
    writeln!(writer, "# {}", serde_json::to_string(meta)?)?;
    writeln!(writer, "window_start,value")?;
    for (idx, value) in report.values.iter().enumerate() {
        let start = match &report.start_dates {
            Some(dates) => dates[idx].clone(),
            None => report.window_starts[idx].to_string(),
        };
        match value {
            Some(v) => writeln!(writer, "{start},{v}")?,
            None => writeln!(writer, "{start},")?,
        }
    }
    Ok(())
}

/// A parsed series file: the metadata header plus the rows.
#[derive(Debug, Clone)]
pub struct SeriesFile {
    pub meta: SeriesMeta,
    pub rows: Vec<(String, Option<f64>)>,
}

impl SeriesFile {
    pub fn kind(&self) -> CoreResult<SeriesKind> {
        SeriesKind::parse(&self.meta.kind).ok_or_else(|| CoreError::InvalidInput(format!(
            "unknown series kind {}",
            self.meta.kind
        )))
    }

    pub fn spec(&self) -> CoreResult<WindowSpec> {
        WindowSpec::new(self.meta.width, self.meta.shift)
    }
}

/// Reads a series CSV produced by [`write_series_csv`] losslessly.
pub fn read_series_csv<R: Read>(reader: R) -> CoreResult<SeriesFile> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines
        .next()
        .ok_or_else(|| CoreError::InsufficientData("empty series file".into()))?
        .map_err(CoreError::Io)?;
    let json = header.strip_prefix("# ").ok_or_else(|| CoreError::Parse {
        line: 1,
        message: "expected '# {json}' metadata header".into(),
    })?;
    let meta: SeriesMeta = serde_json::from_str(json)?;
    let columns = lines
        .next()
        .ok_or_else(|| CoreError::Parse {
            line: 2,
            message: "missing column header".into(),
        })?
        .map_err(CoreError::Io)?;
    if columns != "window_start,value" {
        return Err(CoreError::Parse {
            line: 2,
            message: format!("expected 'window_start,value', found '{columns}'"),
        });
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line.map_err(CoreError::Io)?;
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 3;
        let (start, value) = line.split_once(',').ok_or_else(|| CoreError::Parse {
            line: lineno,
            message: "expected 'window_start,value'".into(),
        })?;
        let value = if value.is_empty() {
            None
        } else {
            Some(value.parse::<f64>().map_err(|_| CoreError::Parse {
                line: lineno,
                message: format!("'{value}' is not a number"),
            })?)
        };
        rows.push((start.to_string(), value));
    }
    Ok(SeriesFile { meta, rows })
}

/// JSON adjacency form of a tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeJson {
    pub nodes: Vec<String>,
    pub edges: Vec<TreeEdgeJson>,
    pub length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeEdgeJson {
    pub source: String,
    pub target: String,
    pub weight: f64,
}

impl TreeJson {
    pub fn from_tree(tree: &Tree) -> Self {
        let mut edges: Vec<_> = tree.edges().to_vec();
        edges.sort_by(|x, y| x.a.cmp(&y.a).then(x.b.cmp(&y.b)));
        TreeJson {
            nodes: tree.labels().to_vec(),
            edges: edges
                .iter()
                .map(|e| TreeEdgeJson {
                    source: tree.labels()[e.a].clone(),
                    target: tree.labels()[e.b].clone(),
                    weight: e.weight,
                })
                .collect(),
            length: tree.length(),
            meta: None,
        }
    }
}

/// Degree frequencies plus the optional fit, as written by the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegreesJson {
    /// Pairs `[degree, count]`.
    pub frequencies: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_law: Option<PowerLawJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerLawJson {
    pub alpha: f64,
    pub alpha_std_err: f64,
    pub r2: f64,
    pub points_used: usize,
}

impl From<&PowerLawFit> for PowerLawJson {
    fn from(fit: &PowerLawFit) -> Self {
        PowerLawJson {
            alpha: fit.alpha,
            alpha_std_err: fit.alpha_std_err,
            r2: fit.r2,
            points_used: fit.points_used,
        }
    }
}

impl DegreesJson {
    pub fn frequency_map(&self) -> BTreeMap<usize, usize> {
        self.frequencies.iter().copied().collect()
    }

    pub fn from_map(map: &BTreeMap<usize, usize>) -> Self {
        DegreesJson {
            frequencies: map.iter().map(|(&d, &c)| (d, c)).collect(),
            power_law: None,
            meta: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::make_synthetic_model;
    use approx::assert_abs_diff_eq;

    #[test]
    fn price_csv_happy_path_and_drops() {
        let csv = "date,X_open,X_close,Y_open,Y_close\n\
                   2020-01-01,10,11,5,4\n\
                   2020-01-02,10,,5,6\n\
                   2020-01-03,10,9.5,5,5\n";
        let (series, report) = read_price_csv(csv.as_bytes()).unwrap();
        assert_eq!(series.num_days(), 2);
        assert_eq!(report.rows_read, 3);
        assert_eq!(report.dropped_dates, vec!["2020-01-02".to_string()]);
        assert_eq!(report.first_date, "2020-01-01");
        assert_eq!(series.labels(), &["X".to_string(), "Y".to_string()]);
        assert_abs_diff_eq!(series.close()[(1, 0)], 9.5);
    }

    #[test]
    fn price_csv_bad_number_is_line_numbered() {
        let csv = "date,X_open,X_close\n2020-01-01,10,eleven\n";
        match read_price_csv(csv.as_bytes()).unwrap_err() {
            CoreError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn price_csv_rejects_unpaired_columns() {
        let csv = "date,X_open\n2020-01-01,10\n";
        assert!(read_price_csv(csv.as_bytes()).is_err());
    }

    #[test]
    fn spin_csv_round_trip_is_byte_exact() {
        let spins = SpinMatrix::from_rows(
            vec!["AEX".into(), "DAX".into()],
            &[vec![1, -1], vec![-1, -1], vec![1, 1]],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_spin_csv(&mut buf, &spins).unwrap();
        let parsed = read_spin_csv(buf.as_slice()).unwrap();
        assert_eq!(parsed.spins(), spins.spins());
        let mut buf2 = Vec::new();
        write_spin_csv(&mut buf2, &parsed).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn spin_csv_rejects_other_tokens() {
        let csv = "date,X\n0,2\n";
        assert!(read_spin_csv(csv.as_bytes()).is_err());
    }

    #[test]
    fn model_json_round_trip_preserves_bits() {
        let model = make_synthetic_model(4, 0.3, 0.1, 5).unwrap();
        let json = ModelJson::from_model(&model, &[]);
        let mut buf = Vec::new();
        write_model_json(&mut buf, &json).unwrap();
        let parsed = read_model_json(buf.as_slice()).unwrap().into_model().unwrap();
        assert_eq!(parsed.couplings(), model.couplings());
        assert_eq!(parsed.fields(), model.fields());
        assert_eq!(parsed.labels(), model.labels());
    }

    #[test]
    fn series_csv_round_trip_with_gaps() {
        use crate::analytics::SeriesKind;
        use crate::spin::WindowSpec;
        let report = TimeSeriesReport {
            kind: SeriesKind::MfEntropy,
            spec: WindowSpec::new(3, 1).unwrap(),
            window_starts: vec![0, 1, 2],
            start_dates: None,
            values: vec![Some(0.125), None, Some(-3.5e-7)],
            degenerate_normalization: false,
        };
        let meta = SeriesMeta {
            kind: report.kind.name().to_string(),
            width: 3,
            shift: 1,
            method: Some("rplm".into()),
            smoothed_half_width: None,
            normalized: false,
            degenerate_normalization: false,
            meta: None,
        };
        let mut buf = Vec::new();
        write_series_csv(&mut buf, &report, &meta).unwrap();
        let parsed = read_series_csv(buf.as_slice()).unwrap();
        assert_eq!(parsed.rows.len(), 3);
        assert_eq!(parsed.rows[0], ("0".to_string(), Some(0.125)));
        assert_eq!(parsed.rows[1], ("1".to_string(), None));
        assert_eq!(parsed.rows[2].1, Some(-3.5e-7));
        assert_eq!(parsed.kind().unwrap(), SeriesKind::MfEntropy);
        assert_eq!(parsed.spec().unwrap(), WindowSpec::new(3, 1).unwrap());
    }

    #[test]
    fn degrees_json_round_trip() {
        let mut map = BTreeMap::new();
        map.insert(1, 32);
        map.insert(2, 8);
        let json = DegreesJson::from_map(&map);
        let text = serde_json::to_string(&json).unwrap();
        let parsed: DegreesJson = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed.frequency_map(), map);
    }
}
