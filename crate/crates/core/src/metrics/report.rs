//! Report serialization: scores as JSON with the run-config echo,
//! matrices as CSV, heatmaps additionally as binary grayscale PGM images
//! (negative differences darker than the 128 background, positive
//! lighter).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::CoreError;

use super::f1::MetricsReport;

#[derive(Serialize)]
struct ScoresFile<'a> {
    config: &'a serde_json::Value,
    macro_f1: f64,
    micro_f1: f64,
    weighted_f1: f64,
    n_examples: usize,
}

pub fn write_scores_json(
    path: &Path,
    report: &MetricsReport,
    config_echo: &serde_json::Value,
) -> Result<(), CoreError> {
    let payload = ScoresFile {
        config: config_echo,
        macro_f1: report.macro_f1,
        micro_f1: report.micro_f1,
        weighted_f1: report.weighted_f1,
        n_examples: report.n_examples,
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &payload)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn write_per_class_csv(
    path: &Path,
    report: &MetricsReport,
    class_names: &[String],
) -> Result<(), CoreError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "class,name,precision,recall,f1,support")?;
    for (i, stats) in report.per_class.iter().enumerate() {
        let name = class_names.get(i).map(String::as_str).unwrap_or("");
        writeln!(
            w,
            "{i},{name},{},{},{},{}",
            stats.precision, stats.recall, stats.f1, stats.support
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_count_matrix_csv(path: &Path, matrix: &[Vec<usize>]) -> Result<(), CoreError> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in matrix {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix_csv(path: &Path, matrix: &[Vec<f64>]) -> Result<(), CoreError> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in matrix {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Binary (P5) grayscale image of a signed matrix: 0 maps to gray 128,
/// the largest magnitude to full black/white. NaN cells render as the
/// background gray.
pub fn write_pgm(path: &Path, matrix: &[Vec<f64>], comment: &str) -> Result<(), CoreError> {
    let rows = matrix.len();
    let cols = matrix.first().map_or(0, |r| r.len());
    let peak = matrix
        .iter()
        .flatten()
        .filter(|v| v.is_finite())
        .fold(0.0f64, |m, &v| m.max(v.abs()));

    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "P5")?;
    if !comment.is_empty() {
        for line in comment.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    writeln!(w, "{cols} {rows}")?;
    writeln!(w, "255")?;
    let mut bytes = Vec::with_capacity(rows * cols);
    for row in matrix {
        for &v in row {
            let pixel = if !v.is_finite() || peak == 0.0 {
                128.0
            } else {
                128.0 + (v / peak) * 127.0
            };
            bytes.push(pixel.round().clamp(0.0, 255.0) as u8);
        }
    }
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::f1::f1_scores;

    #[test]
    fn scores_json_embeds_config() {
        let report = f1_scores(&[0, 1], &[0, 1], 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.json");
        let echo = serde_json::json!({"seed": 7});
        write_scores_json(&path, &report, &echo).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["config"]["seed"], 7);
        assert_eq!(parsed["micro_f1"], 1.0);
    }

    #[test]
    fn pgm_has_expected_header_and_size() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        let matrix = vec![vec![0.0, 1.0], vec![-1.0, f64::NAN]];
        write_pgm(&path, &matrix, "test").unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let text = String::from_utf8_lossy(&bytes[..20]);
        assert!(text.starts_with("P5\n# test\n2 2\n255\n"), "{text}");
        assert_eq!(bytes.len(), "P5\n# test\n2 2\n255\n".len() + 4);
        let pixels = &bytes[bytes.len() - 4..];
        assert_eq!(pixels[0], 128);
        assert_eq!(pixels[1], 255);
        assert_eq!(pixels[2], 1);
        assert_eq!(pixels[3], 128);
    }
}
