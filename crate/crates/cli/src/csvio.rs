//! CSV ingestion and emission. Comma-delimited, UTF-8, header row, `.`
//! decimal separator; missing values are empty fields.

use std::path::Path;

use rdbound::Dataset;

use crate::config::ColumnMap;
use crate::CliError;

fn parse_cell(cell: &str, column: &str, row: usize) -> Result<f64, CliError> {
    let trimmed = cell.trim();
    if trimmed.is_empty() {
        return Ok(f64::NAN);
    }
    trimmed.parse::<f64>().map_err(|_| {
        CliError::Data(format!(
            "unparseable numeric cell `{trimmed}` in column `{column}` at data row {row}"
        ))
    })
}

/// Load a raw dataset from CSV using the column mapping. The group column
/// is attached when present in the header. Validation and normalization
/// happen downstream.
pub fn load_csv(path: &Path, mapping: &ColumnMap) -> Result<Dataset, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("open {}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| CliError::Data(format!("read header: {e}")))?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &str| {
        find(name).ok_or_else(|| CliError::Data(format!("missing mapped column `{name}`")))
    };

    let iy = required(&mapping.y)?;
    let ix1 = required(&mapping.x1)?;
    let ix2 = required(&mapping.x2)?;
    let it = required(&mapping.t)?;
    let igroup = find(&mapping.group);

    let mut y = Vec::new();
    let mut x1 = Vec::new();
    let mut x2 = Vec::new();
    let mut t = Vec::new();
    let mut group = igroup.map(|_| Vec::new());

    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(format!("read row {row}: {e}")))?;
        y.push(parse_cell(&record[iy], &mapping.y, row)?);
        x1.push(parse_cell(&record[ix1], &mapping.x1, row)?);
        x2.push(parse_cell(&record[ix2], &mapping.x2, row)?);
        t.push(parse_cell(&record[it], &mapping.t, row)?);
        if let (Some(g), Some(idx)) = (group.as_mut(), igroup) {
            g.push(record[idx].trim().to_string());
        }
    }

    Dataset::from_columns(y, x1, x2, t, group).map_err(|e| CliError::Data(e.to_string()))
}

/// Write a dataset in the same schema the loader reads. Floats use the
/// shortest round-trip representation, so reload reproduces the numbers
/// exactly.
pub fn write_csv(ds: &Dataset, path: &Path, mapping: &ColumnMap) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::Data(format!("create {}: {e}", path.display())))?;
    let has_group = ds.group_labels().is_some();
    let mut header = vec![
        mapping.y.as_str(),
        mapping.x1.as_str(),
        mapping.x2.as_str(),
        mapping.t.as_str(),
    ];
    if has_group {
        header.push(mapping.group.as_str());
    }
    writer
        .write_record(&header)
        .map_err(|e| CliError::Data(e.to_string()))?;
    for i in 0..ds.n() {
        let mut record = vec![
            ds.y()[i].to_string(),
            ds.x1()[i].to_string(),
            ds.x2()[i].to_string(),
            ds.t()[i].to_string(),
        ];
        if has_group {
            record.push(ds.group_of(i).unwrap_or("").to_string());
        }
        writer
            .write_record(&record)
            .map_err(|e| CliError::Data(e.to_string()))?;
    }
    writer.flush().map_err(|e| CliError::Data(e.to_string()))?;
    Ok(())
}
