//! Confusion-matrix and timing tabulation plus CSV report emission.
//!
//! All floats render with 6 significant digits, `.` decimal separator,
//! LF line endings, so identical inputs produce byte-identical files.

use std::fs;
use std::io;
use std::path::Path;

use super::AnalysisError;

/// Format with 6 significant digits.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0.000000".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = 5 - magnitude;
    if decimals >= 0 {
        format!("{:.*}", decimals as usize, x)
    } else {
        let scale = 10f64.powi(-decimals);
        format!("{:.0}", (x / scale).round() * scale)
    }
}

/// Square tally of true vs predicted classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let n = labels.len();
        Self {
            labels,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn from_pairs<T, P>(labels: &[String], pairs: &[(T, P)]) -> Result<Self, AnalysisError>
    where
        T: AsRef<str>,
        P: AsRef<str>,
    {
        let mut matrix = Self::new(labels.to_vec());
        for (true_label, predicted) in pairs {
            matrix.record(true_label.as_ref(), predicted.as_ref())?;
        }
        Ok(matrix)
    }

    fn index_of(&self, label: &str) -> Result<usize, AnalysisError> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| AnalysisError::LabelMismatch {
                label: label.to_string(),
            })
    }

    pub fn record(&mut self, true_label: &str, predicted: &str) -> Result<(), AnalysisError> {
        let row = self.index_of(true_label)?;
        let col = self.index_of(predicted)?;
        self.counts[row][col] += 1;
        Ok(())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn count(&self, true_label: &str, predicted: &str) -> Result<u64, AnalysisError> {
        Ok(self.counts[self.index_of(true_label)?][self.index_of(predicted)?])
    }

    pub fn row_sum(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    /// Per-class accuracy: diagonal over row sum. Classes with no trials
    /// report 0.
    pub fn accuracy(&self, class: usize) -> f64 {
        let total = self.row_sum(class);
        if total == 0 {
            0.0
        } else {
            self.counts[class][class] as f64 / total as f64
        }
    }

    pub fn overall_accuracy(&self) -> f64 {
        let total: u64 = (0..self.labels.len()).map(|c| self.row_sum(c)).sum();
        if total == 0 {
            return 0.0;
        }
        let correct: u64 = (0..self.labels.len()).map(|c| self.counts[c][c]).sum();
        correct as f64 / total as f64
    }

    pub fn total_trials(&self) -> u64 {
        (0..self.labels.len()).map(|c| self.row_sum(c)).sum()
    }

    pub fn correct_trials(&self) -> u64 {
        (0..self.labels.len()).map(|c| self.counts[c][c]).sum()
    }
}

/// One recognition trial: truth, prediction, and how long it took.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub true_label: String,
    pub predicted: String,
    pub duration_s: f64,
}

/// Per-class timing quartiles.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTiming {
    pub label: String,
    pub count: usize,
    pub q1_s: f64,
    pub median_s: f64,
    pub q3_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialTiming {
    pub classes: Vec<ClassTiming>,
}

impl TrialTiming {
    pub fn empty() -> Self {
        Self::default()
    }
}

fn lower_median(sorted: &[f64]) -> f64 {
    sorted[(sorted.len() - 1) / 2]
}

/// Quartiles under the lower-median convention: the median splits the
/// sorted data into halves (middle element excluded when the count is
/// odd) and each quartile is the lower median of its half. Degenerate
/// halves fall back to the median itself.
fn quartiles(sorted: &[f64]) -> (f64, f64, f64) {
    let n = sorted.len();
    let median = lower_median(sorted);
    let lower = &sorted[..n / 2];
    let upper = &sorted[n.div_ceil(2)..];
    let q1 = if lower.is_empty() { median } else { lower_median(lower) };
    let q3 = if upper.is_empty() { median } else { lower_median(upper) };
    (q1, median, q3)
}

/// Tally trials into a confusion matrix and per-class timing statistics.
/// Every trial label must come from `labels`; durations must be positive.
pub fn tabulate(
    labels: &[String],
    trials: &[Trial],
) -> Result<(ConfusionMatrix, TrialTiming), AnalysisError> {
    let mut matrix = ConfusionMatrix::new(labels.to_vec());
    for (index, trial) in trials.iter().enumerate() {
        if !(trial.duration_s > 0.0) {
            return Err(AnalysisError::NonPositiveDuration {
                index,
                value: trial.duration_s,
            });
        }
        matrix.record(&trial.true_label, &trial.predicted)?;
    }
    let mut classes = Vec::new();
    for label in labels {
        let mut durations: Vec<f64> = trials
            .iter()
            .filter(|t| &t.true_label == label)
            .map(|t| t.duration_s)
            .collect();
        if durations.is_empty() {
            continue;
        }
        durations.sort_by(f64::total_cmp);
        let (q1_s, median_s, q3_s) = quartiles(&durations);
        classes.push(ClassTiming {
            label: label.clone(),
            count: durations.len(),
            q1_s,
            median_s,
            q3_s,
        });
    }
    Ok((matrix, TrialTiming { classes }))
}

/// Render the confusion matrix as CSV with a label header row and
/// column.
pub fn confusion_csv(matrix: &ConfusionMatrix) -> String {
    let mut out = String::new();
    out.push(',');
    out.push_str(&matrix.labels().join(","));
    out.push('\n');
    for (row, label) in matrix.labels().iter().enumerate() {
        out.push_str(label);
        for col in 0..matrix.labels().len() {
            out.push(',');
            out.push_str(&matrix.counts[row][col].to_string());
        }
        out.push('\n');
    }
    out
}

pub fn accuracy_csv(matrix: &ConfusionMatrix) -> String {
    let mut out = String::from("label,trials,correct,accuracy\n");
    for (class, label) in matrix.labels().iter().enumerate() {
        out.push_str(&format!(
            "{label},{},{},{}\n",
            matrix.row_sum(class),
            matrix.counts[class][class],
            format_sig6(matrix.accuracy(class)),
        ));
    }
    out.push_str(&format!(
        "overall,{},{},{}\n",
        matrix.total_trials(),
        matrix.correct_trials(),
        format_sig6(matrix.overall_accuracy()),
    ));
    out
}

pub fn timing_csv(timing: &TrialTiming) -> String {
    let mut out = String::from("label,count,q1_s,median_s,q3_s\n");
    for class in &timing.classes {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            class.label,
            class.count,
            format_sig6(class.q1_s),
            format_sig6(class.median_s),
            format_sig6(class.q3_s),
        ));
    }
    out
}

/// Write `confusion.csv`, `accuracy.csv`, and `timing.csv` into `dir`.
pub fn emit_report(
    matrix: &ConfusionMatrix,
    timing: &TrialTiming,
    dir: &Path,
) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("confusion.csv"), confusion_csv(matrix))?;
    fs::write(dir.join("accuracy.csv"), accuracy_csv(matrix))?;
    fs::write(dir.join("timing.csv"), timing_csv(timing))?;
    Ok(())
}
