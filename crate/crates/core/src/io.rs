//! Binary field files, JSON sidecars and run manifests.
//!
//! A field file is a 64-byte little-endian header followed by the samples as
//! interleaved `(re, im)` pairs in either `f32` or `f64`:
//!
//! ```text
//! 0..8    magic "ZKFIELD\0"
//! 8       format version (1)
//! 9       kind: 0 spatial field, 1 space-time field
//! 10      dtype: 0 complex64, 1 complex128
//! 11      time representation: 0 physical, 1 spectral
//! 12      space representation
//! 13      spatial size policy: 0 power of two, 1 smooth
//! 16..20  d (u32)
//! 20..24  n (u32)
//! 24..32  nt (u64)
//! 32..40  box length (f64)
//! 40..56  t_span (f64, f64)
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::grid::{Field, Grid, GridBuilder, GridError, Repr, SpacetimeField, C64};

pub const MAGIC: &[u8; 8] = b"ZKFIELD\0";
pub const HEADER_LEN: usize = 64;
const VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a field file (bad magic)")]
    BadMagic,
    #[error("malformed header: {0}")]
    Header(String),
    #[error("payload has {found} bytes, header implies {expected}")]
    Truncated { expected: usize, found: usize },
    #[error("expected a {expected} field, file holds a {found} field")]
    Kind {
        expected: &'static str,
        found: &'static str,
    },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    Complex64,
    Complex128,
}

impl Dtype {
    fn code(self) -> u8 {
        match self {
            Dtype::Complex64 => 0,
            Dtype::Complex128 => 1,
        }
    }
    fn from_code(c: u8) -> Result<Self, IoError> {
        match c {
            0 => Ok(Dtype::Complex64),
            1 => Ok(Dtype::Complex128),
            _ => Err(IoError::Header(format!("unknown dtype {c}"))),
        }
    }
    pub fn bytes_per_sample(self) -> usize {
        match self {
            Dtype::Complex64 => 8,
            Dtype::Complex128 => 16,
        }
    }
}

/// Decoded header, also written as the JSON sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub kind: String,
    pub dtype: Dtype,
    pub d: usize,
    pub n: usize,
    pub nt: usize,
    pub box_length: f64,
    pub t_span: (f64, f64),
    pub time_repr: Option<Repr>,
    pub space_repr: Repr,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config_hash: Option<String>,
    pub sha256: String,
}

fn repr_code(r: Repr) -> u8 {
    match r {
        Repr::Physical => 0,
        Repr::Spectral => 1,
    }
}

fn repr_from(c: u8) -> Result<Repr, IoError> {
    match c {
        0 => Ok(Repr::Physical),
        1 => Ok(Repr::Spectral),
        _ => Err(IoError::Header(format!("unknown representation {c}"))),
    }
}

fn header(grid: &Grid, spacetime: bool, dtype: Dtype, time: Repr, space: Repr) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[..8].copy_from_slice(MAGIC);
    h[8] = VERSION;
    h[9] = spacetime as u8;
    h[10] = dtype.code();
    h[11] = repr_code(time);
    h[12] = repr_code(space);
    h[13] = (!grid.n().is_power_of_two()) as u8;
    h[16..20].copy_from_slice(&(grid.dim() as u32).to_le_bytes());
    h[20..24].copy_from_slice(&(grid.n() as u32).to_le_bytes());
    h[24..32].copy_from_slice(&(grid.nt() as u64).to_le_bytes());
    h[32..40].copy_from_slice(&grid.box_length().to_le_bytes());
    h[40..48].copy_from_slice(&grid.t_span().0.to_le_bytes());
    h[48..56].copy_from_slice(&grid.t_span().1.to_le_bytes());
    h
}

struct Header {
    spacetime: bool,
    dtype: Dtype,
    time: Repr,
    space: Repr,
    grid: Grid,
}

fn parse_header(bytes: &[u8]) -> Result<Header, IoError> {
    if bytes.len() < HEADER_LEN {
        return Err(IoError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    if &bytes[..8] != MAGIC {
        return Err(IoError::BadMagic);
    }
    if bytes[8] != VERSION {
        return Err(IoError::Header(format!("unsupported version {}", bytes[8])));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let f64_at = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    let nt = u64::from_le_bytes(bytes[24..32].try_into().unwrap()) as usize;
    let mut b = GridBuilder::new(u32_at(16), u32_at(20))
        .box_length(f64_at(32))
        .time(nt, (f64_at(40), f64_at(48)))
        .budget_bytes(u64::MAX);
    if bytes[13] == 1 {
        b = b.smooth_spatial_sizes();
    }
    Ok(Header {
        spacetime: bytes[9] == 1,
        dtype: Dtype::from_code(bytes[10])?,
        time: repr_from(bytes[11])?,
        space: repr_from(bytes[12])?,
        grid: b.build()?,
    })
}

fn encode_samples(out: &mut Vec<u8>, data: &[C64], dtype: Dtype) {
    out.reserve(data.len() * dtype.bytes_per_sample());
    for z in data {
        match dtype {
            Dtype::Complex64 => {
                out.extend_from_slice(&(z.re as f32).to_le_bytes());
                out.extend_from_slice(&(z.im as f32).to_le_bytes());
            }
            Dtype::Complex128 => {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
    }
}

fn decode_samples(bytes: &[u8], len: usize, dtype: Dtype) -> Result<Vec<C64>, IoError> {
    let expected = len * dtype.bytes_per_sample();
    if bytes.len() != expected {
        return Err(IoError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    Ok(match dtype {
        Dtype::Complex64 => bytes
            .chunks_exact(8)
            .map(|c| {
                C64::new(
                    f32::from_le_bytes(c[..4].try_into().unwrap()) as f64,
                    f32::from_le_bytes(c[4..].try_into().unwrap()) as f64,
                )
            })
            .collect(),
        Dtype::Complex128 => bytes
            .chunks_exact(16)
            .map(|c| {
                C64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect(),
    })
}

pub fn encode_field(f: &Field, dtype: Dtype) -> Vec<u8> {
    let mut out = header(f.grid(), false, dtype, Repr::Physical, f.repr()).to_vec();
    encode_samples(&mut out, f.data(), dtype);
    out
}

pub fn encode_spacetime(f: &SpacetimeField, dtype: Dtype) -> Vec<u8> {
    let mut out = header(f.grid(), true, dtype, f.time_repr(), f.space_repr()).to_vec();
    encode_samples(&mut out, f.data(), dtype);
    out
}

fn kind_name(spacetime: bool) -> &'static str {
    if spacetime {
        "space-time"
    } else {
        "spatial"
    }
}

pub fn decode_field(bytes: &[u8]) -> Result<Field, IoError> {
    let h = parse_header(bytes)?;
    if h.spacetime {
        return Err(IoError::Kind {
            expected: "spatial",
            found: "space-time",
        });
    }
    let grid = Arc::new(h.grid);
    let data = decode_samples(&bytes[HEADER_LEN..], grid.spatial_len(), h.dtype)?;
    Ok(Field::from_vec(&grid, data, h.space)?)
}

pub fn decode_spacetime(bytes: &[u8]) -> Result<SpacetimeField, IoError> {
    let h = parse_header(bytes)?;
    if !h.spacetime {
        return Err(IoError::Kind {
            expected: "space-time",
            found: "spatial",
        });
    }
    let grid = Arc::new(h.grid);
    let data = decode_samples(&bytes[HEADER_LEN..], grid.spacetime_len(), h.dtype)?;
    Ok(SpacetimeField::from_vec(&grid, data, h.time, h.space)?)
}

/// Header of an encoded field without decoding the payload.
pub fn read_meta(bytes: &[u8]) -> Result<FieldMeta, IoError> {
    let h = parse_header(bytes)?;
    let g = &h.grid;
    let samples = if h.spacetime {
        g.spacetime_len()
    } else {
        g.spatial_len()
    };
    Ok(FieldMeta {
        kind: kind_name(h.spacetime).into(),
        dtype: h.dtype,
        d: g.dim(),
        n: g.n(),
        nt: g.nt(),
        box_length: g.box_length(),
        t_span: g.t_span(),
        time_repr: h.spacetime.then_some(h.time),
        space_repr: h.space,
        samples,
        config_hash: None,
        sha256: sha256_hex(bytes),
    })
}

/// Write `bytes` to `path` and a `<path>.json` sidecar; returns both paths.
pub fn write_encoded(
    path: &Path,
    bytes: &[u8],
    config_hash: Option<&str>,
) -> Result<(PathBuf, PathBuf), IoError> {
    let mut meta = read_meta(bytes)?;
    meta.config_hash = config_hash.map(str::to_owned);
    fs::write(path, bytes)?;
    let side = sidecar_path(path);
    write_json(&side, &meta)?;
    Ok((path.to_path_buf(), side))
}

pub fn write_field(
    path: &Path,
    f: &Field,
    dtype: Dtype,
    config_hash: Option<&str>,
) -> Result<(PathBuf, PathBuf), IoError> {
    write_encoded(path, &encode_field(f, dtype), config_hash)
}

pub fn write_spacetime(
    path: &Path,
    f: &SpacetimeField,
    dtype: Dtype,
    config_hash: Option<&str>,
) -> Result<(PathBuf, PathBuf), IoError> {
    write_encoded(path, &encode_spacetime(f, dtype), config_hash)
}

pub fn read_field(path: &Path) -> Result<Field, IoError> {
    decode_field(&fs::read(path)?)
}

pub fn read_spacetime(path: &Path) -> Result<SpacetimeField, IoError> {
    decode_spacetime(&fs::read(path)?)
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// Content hash in the style of a git blob id, with SHA-256.
pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Record of one command run: what was asked, what was read, what was written.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    pub summary: serde_json::Value,
}

impl Manifest {
    pub fn new(command: &str, config: BTreeMap<String, String>) -> Self {
        Manifest {
            command: command.into(),
            config_hash: config_hash(command, &config),
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            exit_code: 0,
            error: None,
            summary: serde_json::Value::Null,
        }
    }

    /// Hash an input file with [`blob_hash`]; paths are recorded as given.
    pub fn add_input(&mut self, path: &Path) -> Result<(), IoError> {
        let bytes = fs::read(path)?;
        self.inputs.push(FileEntry {
            path: path.display().to_string(),
            bytes: bytes.len() as u64,
            sha256: blob_hash(&bytes),
        });
        Ok(())
    }

    /// Record an output file relative to `root`.
    pub fn add_output(&mut self, root: &Path, path: &Path) -> Result<(), IoError> {
        let bytes = fs::read(path)?;
        let rel = path.strip_prefix(root).unwrap_or(path);
        self.outputs.push(FileEntry {
            path: rel.display().to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }
}

/// SHA-256 over the command and the sorted `key=value` lines.
pub fn config_hash(command: &str, sorted: &BTreeMap<String, String>) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update(b"\n");
    for (k, v) in sorted {
        h.update(format!("{k}={v}\n").as_bytes());
    }
    hex(&h.finalize())
}
