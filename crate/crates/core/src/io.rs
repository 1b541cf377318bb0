//! CSV ingestion and the versioned model file.

use crate::bench::BenchResult;
use crate::data::{MaskedDataset, VariableSpec};
use crate::error::{Error, Result};
use crate::estimator::{FitConfig, FitResult, SelectKResult};
use crate::model::MixtureParams;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

/// Lossless double formatting: 17 significant digits.
pub fn format_real(x: f64) -> String {
    format!("{:.16e}", x)
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub has_header: bool,
    /// Tokens read as a missing cell (after trimming).
    pub missing_tokens: Vec<String>,
    /// Columns forced categorical even when every cell is numeric.
    pub force_categorical: Vec<usize>,
    /// Columns that must parse numerically; a bad cell is an error instead
    /// of silently turning the column categorical.
    pub force_continuous: Vec<usize>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            has_header: false,
            missing_tokens: vec!["".into(), "NA".into(), "?".into()],
            force_categorical: Vec::new(),
            force_continuous: Vec::new(),
        }
    }
}

/// Column name plus, for categorical columns, the level tokens in
/// first-appearance order (the code of a level is its position).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub levels: Option<Vec<String>>,
}

pub fn read_csv_path(path: &Path, options: &CsvOptions) -> Result<(MaskedDataset, Vec<ColumnSchema>)> {
    read_csv(fs::File::open(path)?, options)
}

/// Parses a rectangular table. Numeric columns become continuous variables;
/// columns with any non-numeric observed token (or listed in
/// `force_categorical`) become categorical with first-appearance coding.
pub fn read_csv<R: Read>(reader: R, options: &CsvOptions) -> Result<(MaskedDataset, Vec<ColumnSchema>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<String>> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        rows.push(record.iter().map(|f| f.to_string()).collect());
    }
    let header_lines = usize::from(options.has_header);
    let names: Vec<String> = if options.has_header {
        if rows.is_empty() {
            return Err(Error::Parse {
                line: 1,
                col: 1,
                message: "header requested but the file is empty".into(),
            });
        }
        rows.remove(0)
    } else {
        Vec::new()
    };
    if rows.is_empty() {
        return Err(Error::Parse {
            line: header_lines + 1,
            col: 1,
            message: "no data rows".into(),
        });
    }
    let d = if options.has_header { names.len() } else { rows[0].len() };
    for (i, row) in rows.iter().enumerate() {
        if row.len() != d {
            return Err(Error::Parse {
                line: i + 1 + header_lines,
                col: row.len().min(d) + 1,
                message: format!("expected {d} fields, found {}", row.len()),
            });
        }
    }
    let names: Vec<String> = if options.has_header {
        names
    } else {
        (0..d).map(|j| format!("col{j}")).collect()
    };
    let missing = |tok: &str| options.missing_tokens.iter().any(|m| m == tok);

    // 0 = continuous, 1 = categorical
    let mut is_cat = vec![false; d];
    for j in 0..d {
        if options.force_categorical.contains(&j) {
            is_cat[j] = true;
        } else if !options.force_continuous.contains(&j) {
            is_cat[j] = rows
                .iter()
                .any(|row| !missing(&row[j]) && row[j].parse::<f64>().is_err());
        }
    }

    let n = rows.len();
    let mut values = vec![f64::NAN; n * d];
    let mut mask = vec![false; n * d];
    let mut levels: Vec<Vec<String>> = vec![Vec::new(); d];
    let mut level_codes: Vec<HashMap<String, usize>> = vec![HashMap::new(); d];
    for (i, row) in rows.iter().enumerate() {
        for j in 0..d {
            let tok = &row[j];
            if missing(tok) {
                continue;
            }
            mask[i * d + j] = true;
            values[i * d + j] = if is_cat[j] {
                let next = levels[j].len();
                let code = *level_codes[j].entry(tok.clone()).or_insert_with(|| {
                    levels[j].push(tok.clone());
                    next
                });
                code as f64
            } else {
                tok.parse::<f64>().map_err(|e| Error::Parse {
                    line: i + 1 + header_lines,
                    col: j + 1,
                    message: format!("cannot parse '{tok}' as a number: {e}"),
                })?
            };
        }
    }
    let specs: Vec<VariableSpec> = (0..d)
        .map(|j| {
            if is_cat[j] {
                VariableSpec::categorical(levels[j].len())
            } else {
                VariableSpec::continuous()
            }
        })
        .collect();
    let schema: Vec<ColumnSchema> = (0..d)
        .map(|j| ColumnSchema {
            name: names[j].clone(),
            levels: is_cat[j].then(|| levels[j].clone()),
        })
        .collect();
    let data = MaskedDataset::new(values, mask, specs, n, d)?;
    Ok((data, schema))
}

/// Writes the dataset without header; missing cells become empty fields,
/// categorical cells integer codes, continuous cells 17-digit reals.
pub fn write_data_csv<W: Write>(w: W, data: &MaskedDataset) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for i in 0..data.n() {
        let row: Vec<String> = (0..data.d())
            .map(|j| match data.value(i, j) {
                None => String::new(),
                Some(x) if data.var_specs()[j].is_continuous() => format_real(x),
                Some(x) => format!("{}", x as usize),
            })
            .collect();
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// One label per line; missing labels become "NA".
pub fn write_labels_csv<W: Write>(w: W, labels: &[Option<usize>]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for l in labels {
        let field = match l {
            Some(z) => z.to_string(),
            None => "NA".into(),
        };
        wtr.write_record([field])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_labels_csv<R: Read>(reader: R, missing_tokens: &[String]) -> Result<Vec<Option<usize>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut labels = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let tok = record.get(0).unwrap_or("");
        if missing_tokens.iter().any(|m| m == tok) {
            labels.push(None);
        } else {
            let z = tok.parse::<usize>().map_err(|e| Error::Parse {
                line: i + 1,
                col: 1,
                message: format!("cannot parse label '{tok}': {e}"),
            })?;
            labels.push(Some(z));
        }
    }
    Ok(labels)
}

/// Benchmark rows under the stable header
/// `scenario,method,replicate,ari,misclassification,seconds`; failed
/// replicates leave their score fields empty.
pub fn write_bench_csv<W: Write>(w: W, result: &BenchResult) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["scenario", "method", "replicate", "ari", "misclassification", "seconds"])?;
    for row in &result.rows {
        wtr.write_record([
            row.scenario.clone(),
            row.method.to_string(),
            row.replicate.to_string(),
            row.ari.map(format_real).unwrap_or_default(),
            row.misclassification.map(format_real).unwrap_or_default(),
            format_real(row.seconds),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Model-order table under `k,loglik,message`.
pub fn write_select_k_csv<W: Write>(w: W, result: &SelectKResult) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["k", "loglik", "message"])?;
    for c in &result.table {
        wtr.write_record([
            c.k.to_string(),
            c.loglik.map(format_real).unwrap_or_default(),
            c.message.clone().unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitMetadata {
    pub config: FitConfig,
    pub loglik: f64,
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    pub best_start: usize,
    pub warnings: Vec<String>,
}

/// Everything needed to reuse a fitted model: parameters, the variable
/// specs (with standardization records) of the training data, and the fit
/// provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub params: MixtureParams,
    pub var_specs: Vec<VariableSpec>,
    pub fit: FitMetadata,
}

impl ModelFile {
    pub fn from_fit(result: &FitResult, config: &FitConfig, var_specs: &[VariableSpec]) -> Self {
        ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            params: result.params.clone(),
            var_specs: var_specs.to_vec(),
            fit: FitMetadata {
                config: config.clone(),
                loglik: result.loglik(),
                loglik_trace: result.loglik_trace.clone(),
                converged: result.converged,
                best_start: result.best_start,
                warnings: result.warnings.clone(),
            },
        }
    }
}

pub fn write_model(path: &Path, model: &ModelFile) -> Result<()> {
    let text = serde_json::to_string_pretty(model)?;
    fs::write(path, text)?;
    Ok(())
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u32,
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    let text = fs::read_to_string(path)?;
    let probe: VersionProbe = serde_json::from_str(&text)?;
    if probe.schema_version > MODEL_SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            found: probe.schema_version,
            supported: MODEL_SCHEMA_VERSION,
        });
    }
    let model: ModelFile = serde_json::from_str(&text)?;
    let params = model
        .params
        .revalidated()
        .map_err(|e| Error::InvalidModel(e.to_string()))?;
    Ok(ModelFile { params, ..model })
}
