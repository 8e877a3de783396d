//! Training-set ingestion: embedding and probability matrices, label and
//! score files, and derived per-example confidences.
//!
//! All numeric inputs are validated on the way in. Non-finite values are
//! rejected rather than skipped, so every structure handed to the rest of the
//! crate is known to be clean.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MATRIX_MAGIC: [u8; 4] = *b"NBPR";
pub const MATRIX_VERSION: u32 = 1;

/// Tolerance on the row sums of probability matrices.
pub const PROB_SUM_TOL: f64 = 1e-5;

/// Probabilities are floored at this value before taking logarithms.
pub const LOSS_PROB_FLOOR: f64 = 1e-12;

/// Dense row-major `f32` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::malformed(
                "matrix",
                format!("{} values cannot fill {rows}x{cols}", data.len()),
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "matrix".into(),
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::RowLength {
                    context: "matrix".into(),
                    row: i,
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        // chunks_exact panics on a zero chunk size
        (0..self.rows).map(move |i| self.row(i))
    }

    /// Copy of the rows selected by `order`, in that order.
    pub fn select_rows(&self, order: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(order.len() * self.cols);
        for &i in order {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: order.len(),
            cols: self.cols,
            data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixFormat {
    Binary,
    Csv,
}

impl MatrixFormat {
    /// Guess from the file extension; anything other than `.csv` is binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => MatrixFormat::Csv,
            _ => MatrixFormat::Binary,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_binary_matrix<R: Read>(mut reader: R, context: &str) -> Result<Matrix> {
    let mut header = [0u8; 20];
    reader.read_exact(&mut header).map_err(|_| {
        Error::malformed(context, "file is shorter than the 20-byte header")
    })?;
    let magic: [u8; 4] = header[0..4].try_into().unwrap();
    if magic != MATRIX_MAGIC {
        return Err(Error::BadMagic {
            context: context.into(),
            expected: MATRIX_MAGIC,
            found: magic,
        });
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != MATRIX_VERSION {
        return Err(Error::BadVersion {
            context: context.into(),
            version,
        });
    }
    let rows = u64::from_le_bytes(header[8..16].try_into().unwrap());
    let cols = u32::from_le_bytes(header[16..20].try_into().unwrap()) as usize;
    let rows = usize::try_from(rows)
        .map_err(|_| Error::malformed(context, format!("row count {rows} is too large")))?;
    let expected_bytes = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::malformed(context, "header dimensions overflow"))?;

    let mut payload = Vec::new();
    reader
        .read_to_end(&mut payload)
        .map_err(|e| Error::malformed(context, e.to_string()))?;
    if payload.len() != expected_bytes {
        return Err(Error::malformed(
            context,
            format!(
                "payload has {} bytes, header ({rows}x{cols}) implies {expected_bytes}",
                payload.len()
            ),
        ));
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: context.into(),
            row: pos / cols.max(1),
            col: pos % cols.max(1),
        });
    }
    Ok(Matrix { rows, cols, data })
}

pub fn write_binary_matrix<W: Write>(mut writer: W, matrix: &Matrix) -> io::Result<()> {
    let cols = u32::try_from(matrix.cols)
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "too many columns"))?;
    writer.write_all(&MATRIX_MAGIC)?;
    writer.write_all(&MATRIX_VERSION.to_le_bytes())?;
    writer.write_all(&(matrix.rows as u64).to_le_bytes())?;
    writer.write_all(&cols.to_le_bytes())?;
    let mut buf = Vec::with_capacity(matrix.data.len() * 4);
    for v in &matrix.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    writer.write_all(&buf)?;
    writer.flush()
}

/// Parses header-less comma-separated rows. Blank lines are ignored.
pub fn parse_csv_matrix(text: &str, context: &str) -> Result<Matrix> {
    let mut cols = None;
    let mut rows = 0usize;
    let mut data = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let start = data.len();
        for (col, field) in line.split(',').enumerate() {
            let v: f32 = field.trim().parse().map_err(|_| {
                Error::malformed(
                    context,
                    format!("line {}: cannot parse {:?} as a number", lineno + 1, field.trim()),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: context.into(),
                    row: rows,
                    col,
                });
            }
            data.push(v);
        }
        let found = data.len() - start;
        match cols {
            None => cols = Some(found),
            Some(expected) if expected != found => {
                return Err(Error::RowLength {
                    context: context.into(),
                    row: rows,
                    expected,
                    found,
                })
            }
            _ => {}
        }
        rows += 1;
    }
    Ok(Matrix {
        rows,
        cols: cols.unwrap_or(0),
        data,
    })
}

pub fn format_csv_matrix(matrix: &Matrix) -> String {
    let mut out = String::new();
    for row in matrix.iter_rows() {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Reads an embedding or probability matrix from disk.
pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<Matrix> {
    let context = path.display().to_string();
    match format {
        MatrixFormat::Binary => {
            let file = fs::File::open(path).map_err(io_err(path))?;
            read_binary_matrix(io::BufReader::new(file), &context)
        }
        MatrixFormat::Csv => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            parse_csv_matrix(&text, &context)
        }
    }
}

pub fn load_embeddings(path: &Path, format: MatrixFormat) -> Result<Matrix> {
    load_matrix(path, format)
}

pub fn write_matrix(path: &Path, format: MatrixFormat, matrix: &Matrix) -> Result<()> {
    match format {
        MatrixFormat::Binary => {
            let file = fs::File::create(path).map_err(io_err(path))?;
            write_binary_matrix(io::BufWriter::new(file), matrix).map_err(io_err(path))
        }
        MatrixFormat::Csv => fs::write(path, format_csv_matrix(matrix)).map_err(io_err(path)),
    }
}

fn parse_lines<T: FromStr>(text: &str, context: &str, what: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(lineno, l)| {
            l.trim().parse::<T>().map_err(|_| {
                Error::malformed(
                    context,
                    format!("line {}: {:?} is not {what}", lineno + 1, l.trim()),
                )
            })
        })
        .collect()
}

pub fn parse_labels(text: &str, context: &str) -> Result<Vec<usize>> {
    parse_lines(text, context, "a non-negative integer")
}

pub fn parse_scores(text: &str, context: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = parse_lines(text, context, "a real number")?;
    if let Some(row) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: context.into(),
            row,
            col: 0,
        });
    }
    Ok(values)
}

pub fn load_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_labels(&text, &path.display().to_string())
}

pub fn load_scores(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_scores(&text, &path.display().to_string())
}

/// One value per line; used for labels, indices and scores alike.
pub fn write_lines<T: ToString>(path: &Path, values: &[T]) -> Result<()> {
    let mut out = String::with_capacity(values.len() * 8);
    for v in values {
        out.push_str(&v.to_string());
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Checks every row is a probability vector.
pub fn validate_probabilities(probabilities: &Matrix) -> Result<()> {
    for (row, p) in probabilities.iter_rows().enumerate() {
        if let Some(v) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidProbability {
                row,
                message: format!("entry {v} outside [0, 1]"),
            });
        }
        let sum: f64 = p.iter().map(|&v| v as f64).sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidProbability {
                row,
                message: format!("row sums to {sum}"),
            });
        }
    }
    Ok(())
}

fn validate_labels(labels: &[usize], num_classes: usize) -> Result<()> {
    match labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
        Some((index, &label)) => Err(Error::LabelOutOfRange {
            index,
            label,
            num_classes,
        }),
        None => Ok(()),
    }
}

/// The universe to prune.
///
/// Noisy labels are optional because label-free selectors (uniform,
/// k-center) can run on embeddings alone; when absent `num_classes` is 0.
#[derive(Debug, Clone)]
pub struct Dataset {
    embeddings: Matrix,
    noisy_labels: Option<Vec<usize>>,
    num_classes: usize,
    probabilities: Option<Matrix>,
    ground_truth_labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(
        embeddings: Matrix,
        noisy_labels: Option<Vec<usize>>,
        num_classes: Option<usize>,
        probabilities: Option<Matrix>,
        ground_truth_labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        let m = embeddings.rows();
        for (row, r) in embeddings.iter_rows().enumerate() {
            if r.iter().all(|&v| v == 0.0) {
                return Err(Error::ZeroNorm { row });
            }
        }
        if let Some(p) = &probabilities {
            if p.rows() != m {
                return Err(Error::LengthMismatch {
                    what: "probabilities".into(),
                    expected: m,
                    found: p.rows(),
                });
            }
            validate_probabilities(p)?;
        }
        let inferred = noisy_labels
            .iter()
            .chain(ground_truth_labels.iter())
            .flat_map(|l| l.iter().map(|&v| v + 1))
            .max()
            .unwrap_or(0)
            .max(probabilities.as_ref().map_or(0, |p| p.cols()));
        let num_classes = num_classes.unwrap_or(inferred);
        for (what, labels) in [("noisy labels", &noisy_labels), ("ground-truth labels", &ground_truth_labels)] {
            if let Some(labels) = labels {
                if labels.len() != m {
                    return Err(Error::LengthMismatch {
                        what: what.into(),
                        expected: m,
                        found: labels.len(),
                    });
                }
                validate_labels(labels, num_classes)?;
            }
        }
        if ground_truth_labels.is_some() && noisy_labels.is_none() {
            return Err(Error::InvalidArgument(
                "ground-truth labels given without noisy labels".into(),
            ));
        }
        Ok(Self {
            embeddings,
            noisy_labels,
            num_classes,
            probabilities,
            ground_truth_labels,
        })
    }

    pub fn len(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn embeddings(&self) -> &Matrix {
        &self.embeddings
    }

    pub fn noisy_labels(&self) -> Option<&[usize]> {
        self.noisy_labels.as_deref()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn probabilities(&self) -> Option<&Matrix> {
        self.probabilities.as_ref()
    }

    pub fn ground_truth_labels(&self) -> Option<&[usize]> {
        self.ground_truth_labels.as_deref()
    }

    /// Indices whose noisy label differs from the ground truth.
    pub fn noisy_indices(&self) -> Option<Vec<usize>> {
        let noisy = self.noisy_labels.as_ref()?;
        let truth = self.ground_truth_labels.as_ref()?;
        Some(
            noisy
                .iter()
                .zip(truth)
                .enumerate()
                .filter(|(_, (a, b))| a != b)
                .map(|(i, _)| i)
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceMetric {
    MaxProb,
    DiffProb,
    External,
}

impl FromStr for ConfidenceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max_prob" => Ok(Self::MaxProb),
            "diff_prob" => Ok(Self::DiffProb),
            "external" => Ok(Self::External),
            other => Err(Error::InvalidArgument(format!(
                "unknown confidence metric {other:?} (expected max_prob, diff_prob or external)"
            ))),
        }
    }
}

/// Per-example confidence in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceVector {
    values: Vec<f64>,
    metric: ConfidenceMetric,
}

impl ConfidenceVector {
    pub fn new(values: Vec<f64>, metric: ConfidenceMetric) -> Result<Self> {
        if let Some((row, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || !(0.0..=1.0).contains(*v))
        {
            return Err(Error::malformed(
                "confidence",
                format!("value {v} at position {row} is outside [0, 1]"),
            ));
        }
        Ok(Self { values, metric })
    }

    /// Confidences supplied by the caller, e.g. read from a score file.
    pub fn external(values: Vec<f64>) -> Result<Self> {
        Self::new(values, ConfidenceMetric::External)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn metric(&self) -> ConfidenceMetric {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Largest and second-largest entries of a row (second is 0 for one column).
pub(crate) fn top_two(row: &[f32]) -> (f64, f64) {
    let mut first = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &v in row {
        let v = v as f64;
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    (first, second.max(0.0))
}

pub fn compute_confidence(
    probabilities: &Matrix,
    metric: ConfidenceMetric,
) -> Result<ConfidenceVector> {
    validate_probabilities(probabilities)?;
    let values = match metric {
        ConfidenceMetric::MaxProb => probabilities
            .iter_rows()
            .map(|r| top_two(r).0)
            .collect(),
        ConfidenceMetric::DiffProb => {
            if probabilities.cols() < 2 {
                return Err(Error::InvalidArgument(
                    "diff_prob needs at least two classes".into(),
                ));
            }
            probabilities
                .iter_rows()
                .map(|r| {
                    let (a, b) = top_two(r);
                    (a - b).max(0.0)
                })
                .collect()
        }
        ConfidenceMetric::External => {
            return Err(Error::InvalidArgument(
                "external confidences are read from a file, not derived".into(),
            ))
        }
    };
    ConfidenceVector::new(values, metric)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxScoreKind {
    Loss,
    ForgettingEvents,
    GradNorm,
    SspPrototypicality,
}

/// Per-example scores consumed by the ranking baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxScores {
    pub values: Vec<f64>,
    pub kind: AuxScoreKind,
}

impl AuxScores {
    pub fn new(values: Vec<f64>, kind: AuxScoreKind) -> Result<Self> {
        if let Some(row) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "scores".into(),
                row,
                col: 0,
            });
        }
        Ok(Self { values, kind })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Cross-entropy of each example against its noisy label.
pub fn compute_small_loss_scores(probabilities: &Matrix, noisy_labels: &[usize]) -> Result<AuxScores> {
    validate_probabilities(probabilities)?;
    if noisy_labels.len() != probabilities.rows() {
        return Err(Error::LengthMismatch {
            what: "noisy labels".into(),
            expected: probabilities.rows(),
            found: noisy_labels.len(),
        });
    }
    validate_labels(noisy_labels, probabilities.cols())?;
    let values = probabilities
        .iter_rows()
        .zip(noisy_labels)
        .map(|(p, &y)| -(p[y] as f64).max(LOSS_PROB_FLOOR).ln())
        .collect();
    AuxScores::new(values, AuxScoreKind::Loss)
}
