//! Attribute datasets: parsing, validation, and the two built-in reference
//! tables used throughout the test suite.
//!
//! A dataset is a list of named entities, each with strictly positive
//! "input" attributes (more is worse: resources consumed) and non-negative
//! "output" attributes (more is better: results produced). The CSV format is
//! self-describing: column roles are declared in the header, e.g.
//!
//! ```text
//! dmu,input:Doctors,input:Nurses,output:Outpatients,output:Inpatients
//! A,3008,20980,97775,101225
//! ```

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("empty input: a header row is required")]
    MissingHeader,
    #[error("line 1: first header column must be `dmu`, found `{found}`")]
    BadLeadingColumn { found: String },
    #[error("line 1: column {index} `{found}` must be `input:<label>` or `output:<label>`")]
    BadColumnHeader { index: usize, found: String },
    #[error("header declares no input columns")]
    NoInputColumns,
    #[error("header declares no output columns")]
    NoOutputColumns,
    #[error("no data rows after the header")]
    EmptyBody,
    #[error("line {line}: expected {expected} cells, found {found}")]
    RowWidth {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column `{column}`: cannot parse `{cell}` as a number")]
    NonNumeric {
        line: usize,
        column: String,
        cell: String,
    },
    #[error("line {line}: duplicate entity name `{name}`")]
    DuplicateName { line: usize, name: String },
    #[error("line {line}, column `{column}`: input value {value} must be strictly positive")]
    NonPositiveInput {
        line: usize,
        column: String,
        value: f64,
    },
    #[error("line {line}, column `{column}`: negative output value {value}")]
    NegativeOutput {
        line: usize,
        column: String,
        value: f64,
    },
    #[error("unknown built-in dataset `{name}` (available: hospital14, bowlin15)")]
    UnknownBuiltin { name: String },
    #[error("inconsistent dataset shape: {0}")]
    Shape(String),
}

/// Named entities with an n×m input matrix and an n×s output matrix.
///
/// Immutable after construction; cheap to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    input_labels: Vec<String>,
    output_labels: Vec<String>,
    /// Row-major, one row per entity, `m` values each.
    inputs: Vec<Vec<f64>>,
    /// Row-major, one row per entity, `s` values each.
    outputs: Vec<Vec<f64>>,
}

/// Outcome of [`Dataset::validate`]: fatal violations and advisory warnings.
///
/// A dataset whose report has a non-empty `errors` list must not be handed
/// to the scoring or fitting modules.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }
}

impl Dataset {
    /// Assemble a dataset from parts. Only shape consistency is enforced
    /// here; value-level checks live in [`Dataset::validate`] so that a
    /// report can be produced for bad data.
    pub fn new(
        names: Vec<String>,
        input_labels: Vec<String>,
        output_labels: Vec<String>,
        inputs: Vec<Vec<f64>>,
        outputs: Vec<Vec<f64>>,
    ) -> Result<Self, DataError> {
        if names.is_empty() {
            return Err(DataError::Shape("no entities".into()));
        }
        if input_labels.is_empty() {
            return Err(DataError::NoInputColumns);
        }
        if output_labels.is_empty() {
            return Err(DataError::NoOutputColumns);
        }
        if inputs.len() != names.len() || outputs.len() != names.len() {
            return Err(DataError::Shape(format!(
                "{} names but {} input rows and {} output rows",
                names.len(),
                inputs.len(),
                outputs.len()
            )));
        }
        if let Some(row) = inputs.iter().find(|r| r.len() != input_labels.len()) {
            return Err(DataError::Shape(format!(
                "input row of width {} does not match {} input labels",
                row.len(),
                input_labels.len()
            )));
        }
        if let Some(row) = outputs.iter().find(|r| r.len() != output_labels.len()) {
            return Err(DataError::Shape(format!(
                "output row of width {} does not match {} output labels",
                row.len(),
                output_labels.len()
            )));
        }
        Ok(Self {
            names,
            input_labels,
            output_labels,
            inputs,
            outputs,
        })
    }

    /// Parse the self-describing CSV format. Header is mandatory; the first
    /// column must be `dmu` and every other column `input:<label>` or
    /// `output:<label>`. Cells must be plain numbers (`.` decimal mark, no
    /// thousands separators). Every violation is reported with its line and
    /// column.
    pub fn parse_csv(text: &str) -> Result<Self, DataError> {
        // Spreadsheet exports often lead with a BOM.
        let text = text.strip_prefix('\u{feff}').unwrap_or(text);
        let mut lines = text
            .lines()
            .map(str::trim_end)
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(DataError::MissingHeader)?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.is_empty() || cols[0] != "dmu" {
            return Err(DataError::BadLeadingColumn {
                found: cols.first().unwrap_or(&"").to_string(),
            });
        }

        // Column index -> (is_input, position within its block).
        let mut roles = Vec::with_capacity(cols.len() - 1);
        let mut input_labels = Vec::new();
        let mut output_labels = Vec::new();
        for (idx, col) in cols.iter().enumerate().skip(1) {
            let label = if let Some(label) = col.strip_prefix("input:") {
                roles.push((true, input_labels.len()));
                input_labels.push(label.trim().to_string());
                label
            } else if let Some(label) = col.strip_prefix("output:") {
                roles.push((false, output_labels.len()));
                output_labels.push(label.trim().to_string());
                label
            } else {
                return Err(DataError::BadColumnHeader {
                    index: idx,
                    found: col.to_string(),
                });
            };
            if label.trim().is_empty() {
                return Err(DataError::BadColumnHeader {
                    index: idx,
                    found: col.to_string(),
                });
            }
        }
        if input_labels.is_empty() {
            return Err(DataError::NoInputColumns);
        }
        if output_labels.is_empty() {
            return Err(DataError::NoOutputColumns);
        }

        let mut names: Vec<String> = Vec::new();
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        for (line_idx, line) in lines {
            let line_no = line_idx + 1; // 1-based, header is line 1
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != cols.len() {
                return Err(DataError::RowWidth {
                    line: line_no,
                    expected: cols.len(),
                    found: cells.len(),
                });
            }
            let name = cells[0].to_string();
            if names.contains(&name) {
                return Err(DataError::DuplicateName {
                    line: line_no,
                    name,
                });
            }
            let mut in_row = vec![0.0; input_labels.len()];
            let mut out_row = vec![0.0; output_labels.len()];
            for (cell_idx, cell) in cells.iter().enumerate().skip(1) {
                let column = cols[cell_idx].to_string();
                let value: f64 = cell.parse().map_err(|_| DataError::NonNumeric {
                    line: line_no,
                    column: column.clone(),
                    cell: cell.to_string(),
                })?;
                if !value.is_finite() {
                    return Err(DataError::NonNumeric {
                        line: line_no,
                        column,
                        cell: cell.to_string(),
                    });
                }
                let (is_input, pos) = roles[cell_idx - 1];
                if is_input {
                    if value <= 0.0 {
                        return Err(DataError::NonPositiveInput {
                            line: line_no,
                            column,
                            value,
                        });
                    }
                    in_row[pos] = value;
                } else {
                    if value < 0.0 {
                        return Err(DataError::NegativeOutput {
                            line: line_no,
                            column,
                            value,
                        });
                    }
                    out_row[pos] = value;
                }
            }
            names.push(name);
            inputs.push(in_row);
            outputs.push(out_row);
        }
        if names.is_empty() {
            return Err(DataError::EmptyBody);
        }
        Self::new(names, input_labels, output_labels, inputs, outputs)
    }

    /// One of the two embedded reference datasets: `hospital14` (14 general
    /// hospitals, 2 inputs / 2 outputs) or `bowlin15` (15 test hospitals,
    /// single cost input / 3 outputs).
    pub fn builtin(name: &str) -> Result<Self, DataError> {
        match name {
            "hospital14" => {
                let names = HOSPITAL14.iter().map(|r| r.0.to_string()).collect();
                let inputs = HOSPITAL14.iter().map(|r| r.1.to_vec()).collect();
                let outputs = HOSPITAL14.iter().map(|r| r.2.to_vec()).collect();
                Self::new(
                    names,
                    vec!["Doctors".into(), "Nurses".into()],
                    vec!["Outpatients".into(), "Inpatients".into()],
                    inputs,
                    outputs,
                )
            }
            "bowlin15" => {
                let names = BOWLIN15.iter().map(|r| r.0.to_string()).collect();
                let inputs = BOWLIN15.iter().map(|r| vec![r.2]).collect();
                let outputs = BOWLIN15.iter().map(|r| r.1.to_vec()).collect();
                Self::new(
                    names,
                    vec!["Cost".into()],
                    vec!["TU".into(), "RP".into(), "SP".into()],
                    inputs,
                    outputs,
                )
            }
            other => Err(DataError::UnknownBuiltin {
                name: other.to_string(),
            }),
        }
    }

    /// Check the value-level invariants. Violations are fatal errors; low
    /// frontier discrimination (n < m + s + 1) is only a warning because the
    /// method still runs, it just separates entities poorly.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let mut seen: Vec<&str> = Vec::new();
        for (i, name) in self.names.iter().enumerate() {
            if seen.contains(&name.as_str()) {
                report
                    .errors
                    .push(format!("entity {i}: duplicate name `{name}`"));
            }
            seen.push(name);
        }
        for (i, row) in self.inputs.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v <= 0.0 {
                    report.errors.push(format!(
                        "entity `{}`, input `{}`: value {} must be strictly positive",
                        self.names[i], self.input_labels[j], v
                    ));
                }
            }
        }
        for (i, row) in self.outputs.iter().enumerate() {
            let mut any_positive = false;
            for (r, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    report.errors.push(format!(
                        "entity `{}`, output `{}`: value {} must be non-negative",
                        self.names[i], self.output_labels[r], v
                    ));
                } else if v > 0.0 {
                    any_positive = true;
                }
            }
            if !any_positive {
                report
                    .errors
                    .push(format!("entity `{}`: all outputs are zero", self.names[i]));
            }
        }
        let (n, m, s) = (self.n_entities(), self.n_inputs(), self.n_outputs());
        if n < m + s + 1 {
            report.warnings.push(format!(
                "only {n} entities for {m} inputs + {s} outputs: expect poor discrimination \
                 (many frontier scores of 1)"
            ));
        }
        report
    }

    pub fn n_entities(&self) -> usize {
        self.names.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.input_labels.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.output_labels.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn input_labels(&self) -> &[String] {
        &self.input_labels
    }

    pub fn output_labels(&self) -> &[String] {
        &self.output_labels
    }

    /// Input labels followed by output labels.
    pub fn column_labels(&self) -> Vec<String> {
        self.input_labels
            .iter()
            .chain(self.output_labels.iter())
            .cloned()
            .collect()
    }

    pub fn input_row(&self, entity: usize) -> &[f64] {
        &self.inputs[entity]
    }

    pub fn output_row(&self, entity: usize) -> &[f64] {
        &self.outputs[entity]
    }

    pub fn input_rows(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn output_rows(&self) -> &[Vec<f64>] {
        &self.outputs
    }

    /// Column means of the inputs, used as the gauge anchor by the fitter.
    pub fn input_column_means(&self) -> Vec<f64> {
        let m = self.n_inputs();
        let mut means = vec![0.0; m];
        for row in &self.inputs {
            for (j, &v) in row.iter().enumerate() {
                means[j] += v;
            }
        }
        let n = self.n_entities() as f64;
        means.iter_mut().for_each(|v| *v /= n);
        means
    }

    /// Column maxima, used for internal rescaling by the numeric modules.
    pub fn input_column_maxima(&self) -> Vec<f64> {
        columnwise_max(&self.inputs, self.n_inputs())
    }

    pub fn output_column_maxima(&self) -> Vec<f64> {
        columnwise_max(&self.outputs, self.n_outputs())
    }
}

fn columnwise_max(rows: &[Vec<f64>], width: usize) -> Vec<f64> {
    let mut maxima = vec![f64::NEG_INFINITY; width];
    for row in rows {
        for (j, &v) in row.iter().enumerate() {
            if v > maxima[j] {
                maxima[j] = v;
            }
        }
    }
    maxima
}

/// 14 general hospitals: (name, [doctors, nurses], [outpatients, inpatients]).
const HOSPITAL14: &[(&str, [f64; 2], [f64; 2])] = &[
    ("A", [3008.0, 20980.0], [97775.0, 101225.0]),
    ("B", [3985.0, 25643.0], [135871.0, 130580.0]),
    ("C", [4324.0, 26978.0], [133655.0, 168473.0]),
    ("D", [3534.0, 25361.0], [46243.0, 100407.0]),
    ("E", [8836.0, 40796.0], [176661.0, 215616.0]),
    ("F", [5376.0, 37562.0], [182576.0, 217615.0]),
    ("G", [4982.0, 33088.0], [98880.0, 167278.0]),
    ("H", [4775.0, 39122.0], [136701.0, 193393.0]),
    ("I", [8046.0, 42958.0], [225138.0, 256575.0]),
    ("J", [8554.0, 48955.0], [257370.0, 312877.0]),
    ("K", [6147.0, 45514.0], [165274.0, 227099.0]),
    ("L", [8366.0, 55140.0], [203989.0, 321623.0]),
    ("M", [13479.0, 68037.0], [174270.0, 341743.0]),
    ("N", [21808.0, 78302.0], [322990.0, 487539.0]),
];

/// 15 test hospitals: (name, [teaching units, regular patients, severe
/// patients], cost in $'000). Two output rows are deliberate duplicates of
/// efficient counterparts (H8 of H4, H14 of H12); the table is reproduced
/// verbatim.
const BOWLIN15: &[(&str, [f64; 3], f64)] = &[
    ("H1", [50.0, 3000.0, 2000.0], 775.5),
    ("H2", [50.0, 2000.0, 3000.0], 816.6),
    ("H3", [100.0, 2000.0, 3000.0], 841.6),
    ("H4", [100.0, 3000.0, 2000.0], 800.5),
    ("H5", [50.0, 3000.0, 3000.0], 950.3),
    ("H6", [100.0, 2000.0, 5000.0], 1191.05),
    ("H7", [50.0, 10000.0, 2000.0], 1711.3),
    ("H8", [100.0, 3000.0, 2000.0], 884.75),
    ("H9", [50.0, 2000.0, 3000.0], 841.6),
    ("H10", [100.0, 10000.0, 2000.0], 2036.3),
    ("H11", [50.0, 5000.0, 3000.0], 1362.6),
    ("H12", [100.0, 3000.0, 3000.0], 1070.0),
    ("H13", [50.0, 4000.0, 5000.0], 1491.1),
    ("H14", [100.0, 3000.0, 3000.0], 1070.0),
    ("H15", [50.0, 3000.0, 2000.0], 898.7),
];

/// True cost weights behind the bowlin15 table: efficient cost =
/// 0.5·TU + 0.13368·RP + 0.17474·SP.
pub const BOWLIN15_TRUE_WEIGHTS: [f64; 3] = [0.5, 0.13368, 0.17474];
