use std::fs::File;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::estimators::MIN_SAMPLES;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Recipe {
    Independent,
    Linear,
    Quadratic,
    Sine,
}

impl std::str::FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(Recipe::Independent),
            "linear" => Ok(Recipe::Linear),
            "quadratic" => Ok(Recipe::Quadratic),
            "sine" => Ok(Recipe::Sine),
            other => Err(Error::Config(format!("unknown recipe {other:?}"))),
        }
    }
}

/// Where a dataset came from; enough to rebuild it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DataSource {
    File {
        path: PathBuf,
        has_header: bool,
    },
    Synthetic {
        recipe: Recipe,
        n: usize,
        noise_sd: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub table: DataMatrix,
    pub columns: Vec<String>,
    pub source: DataSource,
    /// Rows dropped during ingestion for missing or non-numeric values.
    pub dropped_rows: usize,
}

/// What to do with a cell that is present but not a number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NonNumeric {
    /// Fail, naming the column.
    #[default]
    Reject,
    /// Drop the row and count it.
    DropRow,
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty()
        || ["na", "nan", "null", "?"]
            .iter()
            .any(|m| cell.eq_ignore_ascii_case(m))
}

/// Reads a numeric CSV file. Rows with missing or non-finite cells are
/// dropped and counted; other non-numeric cells follow `policy`.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool, policy: NonNumeric) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut columns: Vec<String> = if has_header {
        reader.headers()?.iter().map(str::to_string).collect()
    } else {
        Vec::new()
    };
    let mut values = Vec::new();
    let mut rows = 0usize;
    let mut dropped = 0usize;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        if columns.is_empty() {
            columns = (1..=record.len()).map(|i| format!("c{i}")).collect();
        }
        let mut parsed = Vec::with_capacity(record.len());
        let mut keep = true;
        for (j, cell) in record.iter().enumerate() {
            if is_missing(cell) {
                keep = false;
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => parsed.push(v),
                Ok(_) => keep = false,
                Err(_) => match policy {
                    NonNumeric::Reject => {
                        return Err(Error::Data(format!(
                            "column {:?} has non-numeric value {cell:?} (record {})",
                            columns[j],
                            line + 1
                        )))
                    }
                    NonNumeric::DropRow => keep = false,
                },
            }
        }
        if keep {
            values.extend(parsed);
            rows += 1;
        } else {
            dropped += 1;
        }
    }
    if rows == 0 {
        return Err(Error::Data(format!("{} has no usable rows", path.display())));
    }
    Ok(Dataset {
        table: DataMatrix::new(rows, columns.len(), values)?,
        columns,
        source: DataSource::File {
            path: path.to_path_buf(),
            has_header,
        },
        dropped_rows: dropped,
    })
}

/// Writes the table with a header row; reals use the shortest representation
/// that parses back to the same value.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&ds.columns)?;
    for row in ds.table.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `1..=j` go to X, the rest to Y.
pub fn split_features(ds: &Dataset, j: usize) -> Result<(DataMatrix, DataMatrix)> {
    let d = ds.table.d();
    if j == 0 || j >= d {
        return Err(Error::Config(format!(
            "split index {j} must be in 1..{d} for {d} columns"
        )));
    }
    Ok((ds.table.select_columns(0..j)?, ds.table.select_columns(j..d)?))
}

/// Two-column `(x, y)` sample with `x ~ N(0, 1)`.
pub fn synth_dataset(recipe: Recipe, n: usize, noise_sd: f64, seed: u64) -> Result<Dataset> {
    if n < MIN_SAMPLES {
        return Err(Error::SampleSize {
            n,
            min: MIN_SAMPLES,
        });
    }
    if !(noise_sd.is_finite() && noise_sd >= 0.0) {
        return Err(Error::Config(format!("noise sd must be >= 0, got {noise_sd}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut values = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let x: f64 = rng.sample(StandardNormal);
        let e: f64 = rng.sample(StandardNormal);
        let y = match recipe {
            Recipe::Independent => e,
            Recipe::Linear => x + noise_sd * e,
            Recipe::Quadratic => x * x + noise_sd * e,
            Recipe::Sine => (4.0 * x).sin() + noise_sd * e,
        };
        values.push(x);
        values.push(y);
    }
    Ok(Dataset {
        table: DataMatrix::new(n, 2, values)?,
        columns: vec!["x".into(), "y".into()],
        source: DataSource::Synthetic {
            recipe,
            n,
            noise_sd,
            seed,
        },
        dropped_rows: 0,
    })
}

impl DataSource {
    /// Rebuilds the dataset this source describes.
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::File { path, has_header } => load_csv(path, *has_header, NonNumeric::Reject),
            DataSource::Synthetic {
                recipe,
                n,
                noise_sd,
                seed,
            } => synth_dataset(*recipe, *n, *noise_sd, *seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::unbiased_dcorr;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_named_columns() {
        let f = write_tmp("a,b,c\n1,2,3\n4,5,6\n");
        let ds = load_csv(f.path(), true, NonNumeric::Reject).unwrap();
        assert_eq!(ds.columns, vec!["a", "b", "c"]);
        assert_eq!(ds.table.n(), 2);
        assert_eq!(ds.table.row(1), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn text_row_follows_policy() {
        let f = write_tmp("1,2,3\na,b,c\n4,5,6\n");
        let err = load_csv(f.path(), false, NonNumeric::Reject).unwrap_err();
        assert!(err.to_string().contains("\"c1\""), "{err}");
        let ds = load_csv(f.path(), false, NonNumeric::DropRow).unwrap();
        assert_eq!(ds.table.n(), 2);
        assert_eq!(ds.dropped_rows, 1);
    }

    #[test]
    fn missing_cells_drop_rows() {
        let f = write_tmp("x,y\n1,2\n,3\n4,NaN\n5,inf\n6,7\n");
        let ds = load_csv(f.path(), true, NonNumeric::Reject).unwrap();
        assert_eq!(ds.table.values(), &[1.0, 2.0, 6.0, 7.0]);
        assert_eq!(ds.dropped_rows, 3);
        let empty = write_tmp("x,y\n,\n");
        assert!(matches!(
            load_csv(empty.path(), true, NonNumeric::Reject),
            Err(Error::Data(_))
        ));
        assert!(load_csv("/nonexistent/file.csv", true, NonNumeric::Reject).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let ds = synth_dataset(Recipe::Sine, 25, 0.3, 4).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_csv(&ds, f.path()).unwrap();
        let back = load_csv(f.path(), true, NonNumeric::Reject).unwrap();
        assert_eq!(back.table, ds.table);
        assert_eq!(back.columns, ds.columns);
    }

    #[test]
    fn split_ranges() {
        let table = DataMatrix::new(4, 5, (0..20).map(f64::from).collect()).unwrap();
        let ds = Dataset {
            table,
            columns: (0..5).map(|i| i.to_string()).collect(),
            source: DataSource::File {
                path: "mem".into(),
                has_header: true,
            },
            dropped_rows: 0,
        };
        let (x, y) = split_features(&ds, 2).unwrap();
        assert_eq!((x.d(), y.d()), (2, 3));
        assert_eq!(split_features(&ds, 4).unwrap().1.d(), 1);
        assert!(split_features(&ds, 0).is_err());
        assert!(split_features(&ds, 5).is_err());
    }

    #[test]
    fn synthetic_dependence_levels() {
        let ind = synth_dataset(Recipe::Independent, 2000, 1.0, 1).unwrap();
        let (x, y) = split_features(&ind, 1).unwrap();
        assert!(unbiased_dcorr(&x, &y).unwrap() < 0.1);
        let lin = synth_dataset(Recipe::Linear, 500, 0.0, 1).unwrap();
        let (x, y) = split_features(&lin, 1).unwrap();
        assert!(unbiased_dcorr(&x, &y).unwrap() > 0.95);
        assert_eq!(
            synth_dataset(Recipe::Quadratic, 50, 0.5, 9).unwrap(),
            synth_dataset(Recipe::Quadratic, 50, 0.5, 9).unwrap()
        );
    }
}
