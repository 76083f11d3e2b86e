use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CorpusError, DatasetManifest, Example, Split};

const HEADER: [&str; 4] = ["id", "text", "label", "source"];

#[derive(Serialize, Deserialize)]
struct Sidecar {
    labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<Split>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<serde_json::Value>,
}

/// `data.csv` → `data.labels.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv_path.with_file_name(format!("{stem}.labels.json"))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest, CorpusError> {
    let sidecar_file = sidecar_path(path);
    let sidecar_bytes = fs::read(&sidecar_file).map_err(io_err(&sidecar_file))?;
    let sidecar: Sidecar =
        serde_json::from_slice(&sidecar_bytes).map_err(|e| CorpusError::Sidecar {
            path: sidecar_file.clone(),
            message: e.to_string(),
        })?;

    let bytes = fs::read(path).map_err(io_err(path))?;
    let parse_err = |line: u64, message: String| CorpusError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(bytes.as_slice());

    let header = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(parse_err(
            1,
            format!("expected header {:?}, found {:?}", HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }

    let mut examples = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let label: usize = record[2]
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("label {:?} is not a class index", &record[2])))?;
        if label >= sidecar.labels.len() {
            return Err(CorpusError::LabelOutOfRange {
                label,
                n_labels: sidecar.labels.len(),
                line,
            });
        }
        if !seen.insert(record[0].to_string()) {
            return Err(CorpusError::DuplicateId {
                id: record[0].to_string(),
                line,
            });
        }
        examples.push(Example {
            id: record[0].to_string(),
            text: record[1].to_string(),
            label,
            source: Some(record[3].to_string()).filter(|s| !s.is_empty()),
        });
    }

    Ok(DatasetManifest::new(examples, sidecar.labels)?
        .with_split(sidecar.split)
        .with_provenance(sidecar.provenance))
}

/// Canonical form: minimal quoting, LF terminators, pretty-printed sidecar.
pub fn save_manifest(manifest: &DatasetManifest, path: &Path) -> Result<(), CorpusError> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(Vec::new());
    let write_err = |e: csv::Error| CorpusError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    };
    writer.write_record(HEADER).map_err(write_err)?;
    for ex in manifest.examples() {
        let label = ex.label.to_string();
        writer
            .write_record([
                ex.id.as_str(),
                ex.text.as_str(),
                label.as_str(),
                ex.source.as_deref().unwrap_or(""),
            ])
            .map_err(write_err)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| write_err(csv::Error::from(e.into_error())))?;
    fs::write(path, bytes).map_err(io_err(path))?;

    let sidecar = Sidecar {
        labels: manifest.label_names().to_vec(),
        split: manifest.split(),
        provenance: manifest.provenance().cloned(),
    };
    let mut json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    json.push('\n');
    let sidecar_file = sidecar_path(path);
    fs::write(&sidecar_file, json).map_err(io_err(&sidecar_file))
}
