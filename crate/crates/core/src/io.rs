//! File formats: 16-bit PGM depth images (millimeters, 0 = no data), 8-bit
//! PGM masks and pretty-printed JSON documents.
//!
//! PGM carries no registration, so the writer stores pixel pitch and origin
//! in a header comment (`# dlo pitch <m> origin <x> <y> <z>`). Readers fall
//! back to a 1 mm pitch at the world origin when the comment is absent.

use crate::geometry::{DepthImage, GridImage, Mask, Point3};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl IoError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, msg: impl Into<String>) -> Self {
        IoError::Format {
            path: path.to_path_buf(),
            msg: msg.into(),
        }
    }
}

fn header<T>(img: &GridImage<T>, maxval: u32) -> String {
    format!(
        "P5\n# dlo pitch {} origin {} {} {}\n{} {}\n{}\n",
        img.pitch, img.origin[0], img.origin[1], img.origin[2], img.width, img.height, maxval
    )
}

pub fn encode_depth_pgm(img: &DepthImage) -> Vec<u8> {
    let mut out = header(img, 65535).into_bytes();
    out.reserve(img.values.len() * 2);
    for &d in &img.values {
        let mm = if d > 0.0 {
            (d * 1000.0).round().clamp(0.0, 65535.0) as u16
        } else {
            0
        };
        out.extend_from_slice(&mm.to_be_bytes());
    }
    out
}

pub fn encode_mask_pgm(mask: &Mask) -> Vec<u8> {
    let mut out = header(mask, 255).into_bytes();
    out.extend(mask.values.iter().map(|&v| if v { 255u8 } else { 0 }));
    out
}

struct Parsed<'a> {
    width: usize,
    height: usize,
    maxval: u32,
    pitch: f64,
    origin: Point3,
    data: &'a [u8],
}

fn parse_pgm(bytes: &[u8]) -> Result<Parsed<'_>, String> {
    let mut pos = 0;
    let mut tokens: Vec<String> = Vec::new();
    let mut pitch = 0.001;
    let mut origin = Point3::origin();
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos >= bytes.len() {
            return Err("truncated PGM header".into());
        }
        if bytes[pos] == b'#' {
            let end = bytes[pos..]
                .iter()
                .position(|&b| b == b'\n')
                .map_or(bytes.len(), |e| pos + e);
            let line = String::from_utf8_lossy(&bytes[pos + 1..end]);
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() == 7 && f[0] == "dlo" && f[1] == "pitch" && f[3] == "origin" {
                let num = |s: &str| {
                    s.parse::<f64>()
                        .map_err(|e| format!("bad header number {s}: {e}"))
                };
                pitch = num(f[2])?;
                origin = Point3::new(num(f[4])?, num(f[5])?, num(f[6])?);
            }
            pos = end;
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates header and raster
    pos += 1;
    if tokens[0] != "P5" {
        return Err(format!("unsupported magic {}", tokens[0]));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|e| format!("bad header field {s}: {e}"))
    };
    let (width, height, maxval) = (
        parse(&tokens[1])?,
        parse(&tokens[2])?,
        parse(&tokens[3])? as u32,
    );
    if !(pitch > 0.0) {
        return Err("pitch must be positive".into());
    }
    Ok(Parsed {
        width,
        height,
        maxval,
        pitch,
        origin,
        data: bytes.get(pos..).unwrap_or(&[]),
    })
}

pub fn decode_depth_pgm(bytes: &[u8]) -> Result<DepthImage, String> {
    let p = parse_pgm(bytes)?;
    let n = p.width * p.height;
    let values: Vec<f64> = if p.maxval > 255 {
        if p.data.len() < 2 * n {
            return Err("truncated raster".into());
        }
        p.data[..2 * n]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / 1000.0)
            .collect()
    } else {
        if p.data.len() < n {
            return Err("truncated raster".into());
        }
        p.data[..n].iter().map(|&v| v as f64 / 1000.0).collect()
    };
    GridImage::from_values(p.width, p.height, p.pitch, p.origin, values).map_err(|e| e.to_string())
}

pub fn decode_mask_pgm(bytes: &[u8]) -> Result<Mask, String> {
    let p = parse_pgm(bytes)?;
    let n = p.width * p.height;
    let step = if p.maxval > 255 { 2 } else { 1 };
    if p.data.len() < step * n {
        return Err("truncated raster".into());
    }
    let values = p.data[..step * n]
        .chunks_exact(step)
        .map(|c| c.iter().any(|&b| b != 0))
        .collect();
    GridImage::from_values(p.width, p.height, p.pitch, p.origin, values).map_err(|e| e.to_string())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(|e| IoError::io(path, e))
}

pub fn write_depth_pgm(path: &Path, img: &DepthImage) -> Result<(), IoError> {
    write_bytes(path, &encode_depth_pgm(img))
}

pub fn read_depth_pgm(path: &Path) -> Result<DepthImage, IoError> {
    decode_depth_pgm(&read_bytes(path)?).map_err(|m| IoError::format(path, m))
}

pub fn write_mask_pgm(path: &Path, mask: &Mask) -> Result<(), IoError> {
    write_bytes(path, &encode_mask_pgm(mask))
}

pub fn read_mask_pgm(path: &Path) -> Result<Mask, IoError> {
    decode_mask_pgm(&read_bytes(path)?).map_err(|m| IoError::format(path, m))
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), IoError> {
    write_bytes(path, to_json_string(value).as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| IoError::format(path, e.to_string()))
}
