//! File formats.
//!
//! Feature maps are stored one level per file: a single JSON header line
//! `{"h":..,"w":..,"c":..,"stride":..}` followed by `h·w·c` little-endian
//! `f32` values in row-major `[row][col][channel]` order. A pyramid is a
//! manifest `{"levels": ["level0.bin", ...]}` whose paths are relative to
//! the manifest's directory.

use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polyalign::{FeatureMap, FeaturePyramid};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))
}

/// Writes `value` as pretty JSON followed by a newline, creating parent
/// directories as needed.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// One compact JSON document per line.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut bytes = Vec::new();
    for r in records {
        serde_json::to_writer(&mut bytes, r).map_err(|e| Error::format(path, e.to_string()))?;
        bytes.push(b'\n');
    }
    write_bytes(path, &bytes)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::format(path, format!("line {}: {e}", n + 1)))?,
        );
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct MapHeader {
    h: usize,
    w: usize,
    c: usize,
    stride: f64,
}

pub fn encode_feature_map(map: &FeatureMap) -> Vec<u8> {
    let header = MapHeader {
        h: map.height(),
        w: map.width(),
        c: map.channels(),
        stride: map.stride(),
    };
    let mut bytes = serde_json::to_vec(&header).expect("header serializes");
    bytes.push(b'\n');
    bytes.reserve(map.data().len() * 4);
    for v in map.data() {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    bytes
}

pub fn decode_feature_map(bytes: &[u8], origin: &Path) -> Result<FeatureMap> {
    let mut reader = BufReader::new(bytes);
    let mut line = Vec::new();
    reader
        .read_until(b'\n', &mut line)
        .map_err(|e| Error::io(origin, e))?;
    let header: MapHeader = serde_json::from_slice(&line)
        .map_err(|e| Error::format(origin, format!("bad header: {e}")))?;
    let mut payload = Vec::new();
    reader
        .read_to_end(&mut payload)
        .map_err(|e| Error::io(origin, e))?;
    let expected = header.h * header.w * header.c * 4;
    if payload.len() != expected {
        return Err(Error::format(
            origin,
            format!("expected {expected} payload bytes, found {}", payload.len()),
        ));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    FeatureMap::new(header.h, header.w, header.c, header.stride, data)
        .map_err(|e| Error::format(origin, e.to_string()))
}

pub fn write_feature_map(path: &Path, map: &FeatureMap) -> Result<()> {
    write_bytes(path, &encode_feature_map(map))
}

pub fn read_feature_map(path: &Path) -> Result<FeatureMap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_feature_map(&bytes, path)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PyramidManifest {
    pub levels: Vec<String>,
}

/// Writes `level{i}.bin` files and `manifest.json` into `dir`.
pub fn save_pyramid(dir: &Path, pyramid: &FeaturePyramid) -> Result<()> {
    let mut names = Vec::new();
    for (i, level) in pyramid.levels().iter().enumerate() {
        let name = format!("level{i}.bin");
        write_feature_map(&dir.join(&name), level)?;
        names.push(name);
    }
    write_json(&dir.join("manifest.json"), &PyramidManifest { levels: names })
}

pub fn load_pyramid(manifest: &Path) -> Result<FeaturePyramid> {
    let m: PyramidManifest = read_json(manifest)?;
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let levels = m
        .levels
        .iter()
        .map(|name| read_feature_map(&dir.join(name)))
        .collect::<Result<Vec<_>>>()?;
    FeaturePyramid::new(levels).map_err(|e| Error::format(manifest, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_map_header_and_payload() {
        let m = FeatureMap::from_fn(2, 3, 2, 4.0, |x, y, c| x + 10.0 * y + c as f64).unwrap();
        let bytes = encode_feature_map(&m);
        let nl = bytes.iter().position(|b| *b == b'\n').unwrap();
        assert_eq!(&bytes[..nl], br#"{"h":2,"w":3,"c":2,"stride":4.0}"#);
        assert_eq!(bytes.len() - nl - 1, 2 * 3 * 2 * 4);
        // first value: x = 2, y = 2, c = 0
        assert_eq!(f32::from_le_bytes(bytes[nl + 1..nl + 5].try_into().unwrap()), 22.0);
        let back = decode_feature_map(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn truncated_payload_is_a_format_error() {
        let m = FeatureMap::from_fn(2, 2, 1, 1.0, |_, _, _| 1.0).unwrap();
        let mut bytes = encode_feature_map(&m);
        bytes.pop();
        assert!(matches!(decode_feature_map(&bytes, Path::new("x")), Err(Error::Format { .. })));
    }

    #[test]
    fn pyramid_round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let a = FeatureMap::from_fn(8, 8, 3, 4.0, |x, _, _| x).unwrap();
        let b = FeatureMap::from_fn(4, 4, 3, 8.0, |_, y, _| y).unwrap();
        let p = FeaturePyramid::new(vec![a, b]).unwrap();
        save_pyramid(dir.path(), &p).unwrap();
        assert_eq!(load_pyramid(&dir.path().join("manifest.json")).unwrap(), p);
        assert!(matches!(
            load_pyramid(&dir.path().join("missing.json")),
            Err(Error::Io { .. })
        ));
    }
}
