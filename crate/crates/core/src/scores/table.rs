use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{class_normalize, El2nPolicy, ScoreError, ScoreKind};
use crate::numfmt::{parse_opt, sig9};

const COLUMNS: [&str; 6] = ["example_id", "label", "pvi", "el2n", "vog_raw", "vog_norm"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub example_id: String,
    pub label: usize,
    /// Bits; negative means hard.
    pub pvi: Option<f64>,
    pub el2n: f64,
    pub vog_raw: Option<f64>,
    /// Class-normalized VoG.
    pub vog_norm: Option<f64>,
}

impl ScoreRow {
    pub fn get(&self, kind: ScoreKind) -> Option<f64> {
        match kind {
            ScoreKind::Pvi => self.pvi,
            ScoreKind::El2n => Some(self.el2n),
            ScoreKind::Vog => self.vog_norm,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ScoreMeta {
    /// Number of runs averaged; 0 when read back from CSV.
    pub runs: usize,
    pub el2n_policy: El2nPolicy,
    /// Probabilities that fell below the floor before taking log2.
    pub clamped_probabilities: usize,
    /// Classes whose raw VoG had zero spread (normalized to 0).
    pub degenerate_vog_classes: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
    pub meta: ScoreMeta,
}

impl ScoreTable {
    pub fn has(&self, kind: ScoreKind) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.get(kind).is_some())
    }

    pub fn by_id(&self) -> HashMap<&str, &ScoreRow> {
        self.rows.iter().map(|r| (r.example_id.as_str(), r)).collect()
    }

    /// Fill `vog_norm` from `vog_raw`, z-scoring within gold-label classes.
    pub fn normalize_vog(&mut self) {
        if self.rows.iter().any(|r| r.vog_raw.is_none()) {
            self.rows.iter_mut().for_each(|r| r.vog_norm = None);
            return;
        }
        let raw: Vec<f64> = self.rows.iter().map(|r| r.vog_raw.unwrap()).collect();
        let labels: Vec<usize> = self.rows.iter().map(|r| r.label).collect();
        let (norm, degenerate) = class_normalize(&raw, &labels);
        for label in &degenerate {
            log::warn!("VoG class {label} has no spread; its normalized scores are set to 0");
        }
        for (row, z) in self.rows.iter_mut().zip(norm) {
            row.vog_norm = Some(z);
        }
        self.meta.degenerate_vog_classes = degenerate;
    }

    /// CSV text; `header_line` (e.g. a provenance comment) is written first when given.
    pub fn to_csv(&self, header_line: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(line) = header_line {
            out.push_str(line);
        }
        out.push_str(&COLUMNS.join(","));
        out.push('\n');
        let opt = |x: Option<f64>| x.map(sig9).unwrap_or_default();
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        for r in &self.rows {
            writer
                .write_record([
                    r.example_id.clone(),
                    r.label.to_string(),
                    opt(r.pvi),
                    sig9(r.el2n),
                    opt(r.vog_raw),
                    opt(r.vog_norm),
                ])
                .expect("writing to memory");
        }
        out.push_str(&String::from_utf8(writer.into_inner().expect("in-memory writer")).expect("utf-8"));
        out
    }
}

pub fn write_score_table(table: &ScoreTable, path: &Path, header_line: Option<&str>) -> Result<(), ScoreError> {
    fs::write(path, table.to_csv(header_line)).map_err(|source| ScoreError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Read a score CSV; lines starting with `#` are ignored.
pub fn read_score_table(path: &Path) -> Result<ScoreTable, ScoreError> {
    let bytes = fs::read(path).map_err(|source| ScoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let parse_err = |line: u64, message: String| ScoreError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(bytes.as_slice());
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.iter().ne(COLUMNS.iter().copied()) {
        return Err(parse_err(1, format!("expected columns {}", COLUMNS.join(","))));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let num = |i: usize| parse_opt(&record[i]).map_err(|e| parse_err(line, format!("{}: {e}", COLUMNS[i])));
        rows.push(ScoreRow {
            example_id: record[0].to_string(),
            label: record[1]
                .parse()
                .map_err(|_| parse_err(line, "label is not a class index".into()))?,
            pvi: num(2)?,
            el2n: num(3)?.ok_or_else(|| parse_err(line, "el2n is required".into()))?,
            vog_raw: num(4)?,
            vog_norm: num(5)?,
        });
    }
    Ok(ScoreTable {
        rows,
        meta: ScoreMeta::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_keeps_nine_digits() {
        let mut table = ScoreTable {
            rows: vec![
                ScoreRow {
                    example_id: "e,1".into(),
                    label: 1,
                    pvi: Some(-6.196712345678),
                    el2n: 1.41035,
                    vog_raw: Some(0.012),
                    vog_norm: None,
                },
                ScoreRow {
                    example_id: "e2".into(),
                    label: 0,
                    pvi: None,
                    el2n: 0.0,
                    vog_raw: Some(0.5),
                    vog_norm: None,
                },
            ],
            meta: ScoreMeta::default(),
        };
        table.normalize_vog();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        write_score_table(&table, &path, Some("# provenance\n")).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"e,1\",1,-6.19671235,1.41035,0.012,0\n"));
        let back = read_score_table(&path).unwrap();
        assert_eq!(back.rows.len(), 2);
        assert_eq!(back.rows[1].pvi, None);
        assert_eq!(back.to_csv(Some("# provenance\n")), text);
    }
}
