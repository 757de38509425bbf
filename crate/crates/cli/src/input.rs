use std::path::Path;

use signcov::linalg::Observations;

use crate::CliError;

/// Reads a numeric CSV. The first record is a header when none of its fields
/// parses as a number; after that every field must be a finite number.
pub fn read_observations(path: &Path) -> Result<Observations, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::input(format!("cannot open {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file);

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(k as u64 + 1, |p| p.line());
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if rows.is_empty() && k == 0 && record.iter().all(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (col, field) in record.iter().enumerate() {
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(CliError::input(format!(
                        "{}: line {line}, column {}: {field:?} is not a finite number",
                        path.display(),
                        col + 1
                    )))
                }
            }
        }
        rows.push(row);
    }

    if rows.len() < 2 {
        return Err(CliError::input(format!("{}: need at least 2 data rows, found {}", path.display(), rows.len())));
    }
    if rows[0].len() < 2 {
        return Err(CliError::input(format!("{}: need at least 2 columns, found {}", path.display(), rows[0].len())));
    }
    Ok(Observations::from_rows(&rows)?)
}

pub fn parse_point(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::input(format!("--fixed: {f:?} is not a finite number")))
        })
        .collect()
}
