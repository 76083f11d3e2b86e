//! The `.ddlog` binary format.
//!
//! ```text
//! offset  size  content
//! 0       4     magic "DDL1"
//! 4       4     JSON header length H, u32 little-endian
//! 8       H     JSON header (UTF-8)
//! 8+H     ...   N_c checkpoint blocks, then one null block if has_null
//! ```
//!
//! Checkpoint block `c` holds `n * K` f32 probabilities (example-major within
//! the block) followed by `n * d` f32 gradients when `grad_dim` is set. The
//! null block holds `n` f32 gold-label null probabilities. Every block is
//! followed by its CRC-32 (IEEE) as a little-endian u32. All floats are
//! little-endian IEEE-754 binary32. See `docs/ddlog-format.md` for a worked
//! byte-level example.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DynamicsError, ExampleDynamics, RunDynamics};

pub const MAGIC: &[u8; 4] = b"DDL1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct LogHeader {
    pub format_version: u32,
    pub run_id: String,
    pub seed: u64,
    pub n_checkpoints: usize,
    pub n_classes: usize,
    pub grad_dim: Option<usize>,
    pub has_null: bool,
    pub examples: Vec<HeaderExample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HeaderExample {
    pub id: String,
    pub label: usize,
}

fn block_len(header: &LogHeader) -> usize {
    header.examples.len() * (header.n_classes + header.grad_dim.unwrap_or(0))
}

fn push_block(out: &mut Vec<u8>, floats: impl Iterator<Item = f32>) {
    let start = out.len();
    for x in floats {
        out.extend_from_slice(&x.to_le_bytes());
    }
    let crc = crc32fast::hash(&out[start..]);
    out.extend_from_slice(&crc.to_le_bytes());
}

pub fn to_bytes(run: &RunDynamics) -> Vec<u8> {
    let header = LogHeader {
        format_version: FORMAT_VERSION,
        run_id: run.run_id.clone(),
        seed: run.seed,
        n_checkpoints: run.n_checkpoints,
        n_classes: run.n_classes,
        grad_dim: run.grad_dim,
        has_null: run.has_null,
        examples: run
            .examples
            .iter()
            .map(|e| HeaderExample {
                id: e.example_id.clone(),
                label: e.label,
            })
            .collect(),
        provenance: run.provenance.clone(),
    };
    let json = serde_json::to_vec(&header).expect("log header serializes");
    let mut out = Vec::with_capacity(8 + json.len() + run.n_checkpoints * (block_len(&header) * 4 + 4));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);

    let k = run.n_classes;
    for c in 0..run.n_checkpoints {
        let probs = run
            .examples
            .iter()
            .flat_map(|e| e.probs_at(c, k).iter().copied());
        match run.grad_dim {
            Some(d) => {
                let grads = run.examples.iter().flat_map(|e| {
                    e.grad_at(c, d)
                        .expect("grad_dim set implies gradients on every example")
                        .iter()
                        .copied()
                });
                push_block(&mut out, probs.chain(grads));
            }
            None => push_block(&mut out, probs),
        }
    }
    if run.has_null {
        push_block(
            &mut out,
            run.examples
                .iter()
                .map(|e| e.null_prob.expect("has_null implies a null probability on every example")),
        );
    }
    out
}

/// Parse the fixed prefix and JSON header; returns the header and the offset of block 0.
pub fn parse_header(bytes: &[u8]) -> Result<(LogHeader, usize), DynamicsError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(DynamicsError::BadMagic);
    }
    if bytes.len() < 8 {
        return Err(DynamicsError::Truncated {
            expected: 8,
            found: bytes.len(),
        });
    }
    let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let body = bytes.get(8..8 + header_len).ok_or(DynamicsError::Truncated {
        expected: 8 + header_len,
        found: bytes.len(),
    })?;
    let raw: serde_json::Value =
        serde_json::from_slice(body).map_err(|e| DynamicsError::Header(e.to_string()))?;
    let version = raw
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| DynamicsError::Header("missing format_version".into()))?;
    if version != FORMAT_VERSION as u64 {
        return Err(DynamicsError::VersionMismatch {
            found: version as u32,
            expected: FORMAT_VERSION,
        });
    }
    let header: LogHeader =
        serde_json::from_value(raw).map_err(|e| DynamicsError::Header(e.to_string()))?;
    if header.n_checkpoints == 0 {
        return Err(DynamicsError::Header("n_checkpoints must be at least 1".into()));
    }
    if header.n_classes == 0 {
        return Err(DynamicsError::Header("n_classes must be at least 1".into()));
    }
    if header.grad_dim == Some(0) {
        return Err(DynamicsError::Header("grad_dim must be at least 1 when present".into()));
    }
    Ok((header, 8 + header_len))
}

pub fn from_bytes(bytes: &[u8]) -> Result<RunDynamics, DynamicsError> {
    let (header, mut offset) = parse_header(bytes)?;
    let n = header.examples.len();
    let per_block = block_len(&header) * 4 + 4;
    let n_blocks = header.n_checkpoints + usize::from(header.has_null);
    let expected = offset + header.n_checkpoints * per_block + usize::from(header.has_null) * (n * 4 + 4);
    if bytes.len() < expected {
        return Err(DynamicsError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(DynamicsError::TrailingBytes(bytes.len() - expected));
    }

    let mut read_block = |block: usize, n_floats: usize| -> Result<Vec<f32>, DynamicsError> {
        let data = &bytes[offset..offset + n_floats * 4];
        let stored = u32::from_le_bytes(bytes[offset + n_floats * 4..offset + n_floats * 4 + 4].try_into().unwrap());
        if crc32fast::hash(data) != stored {
            return Err(DynamicsError::Checksum { block });
        }
        offset += n_floats * 4 + 4;
        Ok(data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };

    let k = header.n_classes;
    let mut examples: Vec<ExampleDynamics> = header
        .examples
        .iter()
        .map(|e| ExampleDynamics {
            example_id: e.id.clone(),
            label: e.label,
            probs: Vec::with_capacity(header.n_checkpoints * k),
            grads: header
                .grad_dim
                .map(|d| Vec::with_capacity(header.n_checkpoints * d)),
            null_prob: None,
        })
        .collect();
    for c in 0..header.n_checkpoints {
        let block = read_block(c, block_len(&header))?;
        let (probs, grads) = block.split_at(n * k);
        for (i, ex) in examples.iter_mut().enumerate() {
            ex.probs.extend_from_slice(&probs[i * k..(i + 1) * k]);
            if let (Some(d), Some(g)) = (header.grad_dim, ex.grads.as_mut()) {
                g.extend_from_slice(&grads[i * d..(i + 1) * d]);
            }
        }
    }
    if header.has_null {
        let block = read_block(n_blocks - 1, n)?;
        for (ex, p) in examples.iter_mut().zip(block) {
            ex.null_prob = Some(p);
        }
    }

    Ok(RunDynamics {
        run_id: header.run_id,
        seed: header.seed,
        n_checkpoints: header.n_checkpoints,
        n_classes: k,
        grad_dim: header.grad_dim,
        has_null: header.has_null,
        examples,
        provenance: header.provenance,
    })
}

pub fn write_log(run: &RunDynamics, path: &Path) -> Result<(), DynamicsError> {
    fs::write(path, to_bytes(run)).map_err(|source| DynamicsError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_log(path: &Path) -> Result<RunDynamics, DynamicsError> {
    let bytes = fs::read(path).map_err(|source| DynamicsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_bytes(&bytes)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn three_example_run(grads: bool, null: bool) -> RunDynamics {
        let probs = [[0.9f32, 0.1, 0.8, 0.2], [0.3, 0.7, 0.25, 0.75], [0.5, 0.5, 0.6, 0.4]];
        RunDynamics {
            run_id: "r0".into(),
            seed: 7,
            n_checkpoints: 2,
            n_classes: 2,
            grad_dim: grads.then_some(3),
            has_null: null,
            examples: probs
                .iter()
                .enumerate()
                .map(|(i, p)| ExampleDynamics {
                    example_id: format!("e{i}"),
                    label: i % 2,
                    probs: p.to_vec(),
                    grads: grads.then(|| (0..6).map(|j| (i * 6 + j) as f32 * 0.5 - 2.0).collect()),
                    null_prob: null.then_some(if i % 2 == 0 { 0.75 } else { 0.25 }),
                })
                .collect(),
            provenance: Some(serde_json::json!({"tool": "test"})),
        }
    }

    #[test]
    fn round_trip_equality_and_bytes() {
        for (g, n) in [(true, true), (false, true), (true, false), (false, false)] {
            let run = three_example_run(g, n);
            let bytes = to_bytes(&run);
            let back = from_bytes(&bytes).unwrap();
            assert_eq!(back, run);
            assert_eq!(to_bytes(&back), bytes);
        }
    }

    #[test]
    fn flipped_tensor_byte_fails_checksum() {
        let bytes = to_bytes(&three_example_run(true, true));
        let (_, offset) = parse_header(&bytes).unwrap();
        for block in 0..3 {
            let mut corrupt = bytes.clone();
            let block_bytes = 3 * (2 + 3) * 4 + 4;
            let pos = if block < 2 { offset + block * block_bytes + 5 } else { offset + 2 * block_bytes + 1 };
            corrupt[pos] ^= 0x10;
            match from_bytes(&corrupt) {
                Err(DynamicsError::Checksum { block: b }) => assert_eq!(b, block),
                other => panic!("expected checksum error, got {other:?}"),
            }
        }
    }

    #[test]
    fn missing_block_is_truncation() {
        let bytes = to_bytes(&three_example_run(true, false));
        // Re-stamp the header with N_c = 3 while only 2 blocks follow.
        let (_, offset) = parse_header(&bytes).unwrap();
        let mut header_json = serde_json::to_value(parse_header(&bytes).unwrap().0).unwrap();
        header_json["n_checkpoints"] = 3.into();
        let json = serde_json::to_vec(&header_json).unwrap();
        let mut forged = MAGIC.to_vec();
        forged.extend_from_slice(&(json.len() as u32).to_le_bytes());
        forged.extend_from_slice(&json);
        forged.extend_from_slice(&bytes[offset..]);
        assert!(matches!(from_bytes(&forged), Err(DynamicsError::Truncated { .. })));
        assert!(matches!(
            from_bytes(&bytes[..bytes.len() - 1]),
            Err(DynamicsError::Truncated { .. })
        ));
    }

    #[test]
    fn version_and_magic_are_checked() {
        let bytes = to_bytes(&three_example_run(false, false));
        let mut bad = bytes.clone();
        bad[3] = b'9';
        assert!(matches!(from_bytes(&bad), Err(DynamicsError::BadMagic)));

        let (header, offset) = parse_header(&bytes).unwrap();
        let mut v = serde_json::to_value(header).unwrap();
        v["format_version"] = 2.into();
        let json = serde_json::to_vec(&v).unwrap();
        let mut forged = MAGIC.to_vec();
        forged.extend_from_slice(&(json.len() as u32).to_le_bytes());
        forged.extend_from_slice(&json);
        forged.extend_from_slice(&bytes[offset..]);
        assert!(matches!(
            from_bytes(&forged),
            Err(DynamicsError::VersionMismatch { found: 2, expected: 1 })
        ));

        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(from_bytes(&extra), Err(DynamicsError::TrailingBytes(1))));
    }
}
