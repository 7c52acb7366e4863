//! Feature matrices on disk: `id,label,f0001,...,f1000`, one row per
//! sample, label as the class index, values with 9 significant digits
//! (enough to round-trip any `f32`).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use cxr_core::class::Class;
use cxr_core::features::FEATURE_DIM;
use cxr_core::FeatureMatrix;

use crate::error::CliError;

fn header(dim: usize) -> Vec<String> {
    let mut h = vec!["id".to_string(), "label".to_string()];
    h.extend((1..=dim).map(|i| format!("f{i:04}")));
    h
}

pub fn write_features<W: Write>(w: W, fm: &FeatureMatrix) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Data(format!("writing features: {e}"));
    let mut w = csv::Writer::from_writer(w);
    w.write_record(header(fm.dim())).map_err(io)?;
    let mut rec = Vec::with_capacity(fm.dim() + 2);
    for (i, row) in fm.rows().enumerate() {
        rec.clear();
        rec.push(fm.ids()[i].clone());
        rec.push(fm.labels()[i].to_string());
        rec.extend(row.iter().map(|v| format!("{v:.8e}")));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Data(format!("writing features: {e}")))
}

pub fn read_features<R: Read>(r: R) -> Result<FeatureMatrix, CliError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let at = |line: u64, msg: String| CliError::Data(format!("feature file line {line}: {msg}"));
    let head: Vec<String> = rdr
        .headers()
        .map_err(|e| at(1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if head != header(FEATURE_DIM) {
        return Err(at(
            1,
            format!("header must be id,label,f0001..f{FEATURE_DIM:04} ({} columns found)", head.len()),
        ));
    }
    let mut fm = FeatureMatrix::new(FEATURE_DIM);
    let mut values = Vec::with_capacity(FEATURE_DIM);
    for record in rdr.records() {
        let record = record.map_err(|e| at(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let label: usize = record[1]
            .parse()
            .ok()
            .filter(|&l| l < Class::COUNT)
            .ok_or_else(|| at(line, format!("label {:?} is not a class index", &record[1])))?;
        values.clear();
        for (j, field) in record.iter().skip(2).enumerate() {
            let v: f32 = field
                .parse()
                .map_err(|_| at(line, format!("column f{:04}: {field:?} is not a number", j + 1)))?;
            if !v.is_finite() {
                return Err(at(line, format!("column f{:04} is not finite", j + 1)));
            }
            values.push(v);
        }
        fm.push_row(&record[0], label, &values).map_err(|e| at(line, e.to_string()))?;
    }
    Ok(fm)
}

pub fn save_features(path: &Path, fm: &FeatureMatrix) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::data(path.display(), e))?;
    write_features(BufWriter::new(file), fm)
}

pub fn load_features(path: &Path) -> Result<FeatureMatrix, CliError> {
    let file = File::open(path).map_err(|e| CliError::data(path.display(), e))?;
    read_features(BufReader::new(file)).map_err(|e| CliError::data(path.display(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FeatureMatrix {
        let mut fm = FeatureMatrix::new(FEATURE_DIM);
        let a: Vec<f32> = (0..FEATURE_DIM).map(|i| (i as f32 * 0.731).sin() * 1e3).collect();
        let b: Vec<f32> = (0..FEATURE_DIM).map(|i| f32::MIN_POSITIVE * i as f32 - 1e-30).collect();
        fm.push_row("covid/a,1.png", 0, &a).unwrap();
        fm.push_row("vp/b.png", 2, &b).unwrap();
        fm
    }

    #[test]
    fn round_trip_is_exact() {
        let mut buf = Vec::new();
        write_features(&mut buf, &sample()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("id,label,f0001,f0002,"));
        assert!(text.lines().next().unwrap().ends_with(",f1000"));
        let back = read_features(&buf[..]).unwrap();
        assert_eq!(back, sample());
    }

    #[test]
    fn nine_significant_digits() {
        let mut fm = FeatureMatrix::new(FEATURE_DIM);
        let mut row = vec![0.0; FEATURE_DIM];
        row[0] = 0.1;
        fm.push_row("x", 1, &row).unwrap();
        let mut buf = Vec::new();
        write_features(&mut buf, &fm).unwrap();
        let line = String::from_utf8(buf).unwrap().lines().nth(1).unwrap().to_string();
        assert!(line.starts_with("x,1,1.00000001e-1,0.00000000e0,"), "{}", &line[..40]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let mut buf = Vec::new();
        write_features(&mut buf, &sample()).unwrap();
        let mut text = String::from_utf8(buf).unwrap();
        text = text.replacen(",2,", ",7,", 1);
        let err = read_features(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("label"), "{err}");

        let short = "id,label,f0001\nx,0,1.0\n";
        assert!(read_features(short.as_bytes()).unwrap_err().to_string().contains("line 1"));

        let mut buf = Vec::new();
        write_features(&mut buf, &sample()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let bad = text.replacen("e0,", "zz,", 1);
        let err = read_features(bad.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("not a number"), "{err}");
    }
}
