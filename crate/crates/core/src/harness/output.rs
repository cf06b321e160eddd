//! CSV and JSON writers for experiment artifacts.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

/// Writes a header row and numeric rows.
pub fn write_csv<I, R>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.as_ref().iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn columns(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/a.csv");
        write_csv(&path, &columns(&["x", "y"]), [[0.5, 1.0], [2.0, -3.25]]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "x,y\n0.5,1\n2,-3.25\n");
        let mut r = csv::Reader::from_path(&path).unwrap();
        let rows: Vec<Vec<f64>> = r
            .records()
            .map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows, vec![vec![0.5, 1.0], vec![2.0, -3.25]]);
        let jpath = dir.path().join("b.json");
        write_json(&jpath, &serde_json::json!({"k": 1})).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(jpath).unwrap()).unwrap();
        assert_eq!(v["k"], 1);
    }
}
