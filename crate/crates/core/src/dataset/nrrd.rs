//! Minimal NRRD codec for cubic uint8 occupancy volumes.

use super::DatasetError;
use crate::geometry::VoxelGrid;

pub fn write_nrrd(grid: &VoxelGrid) -> Vec<u8> {
    let n = grid.resolution();
    let header = format!("NRRD0004\ntype: uint8\ndimension: 3\nsizes: {n} {n} {n}\nencoding: raw\n\n");
    let mut out = Vec::with_capacity(header.len() + grid.occupancy().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(grid.occupancy());
    out
}

fn field_error(field: &str, message: impl Into<String>) -> DatasetError {
    DatasetError::Nrrd { field: field.to_string(), message: message.into() }
}

/// Reads a raw uint8 3-D NRRD with equal sizes. Unknown header fields and
/// `#` comments are ignored.
pub fn read_nrrd(bytes: &[u8]) -> Result<VoxelGrid, DatasetError> {
    let mut pos = 0;
    let mut next_line = || -> Option<&[u8]> {
        if pos >= bytes.len() {
            return None;
        }
        let end = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |i| pos + i);
        let line = &bytes[pos..end];
        pos = end + 1;
        Some(line)
    };

    let magic = next_line().ok_or_else(|| field_error("magic", "empty file"))?;
    if !(magic.starts_with(b"NRRD000") && magic.len() == 8) {
        return Err(field_error("magic", format!("expected NRRD000x, got {:?}", String::from_utf8_lossy(magic))));
    }
    let (mut kind, mut dimension, mut sizes, mut encoding) = (None, None, None, None);
    loop {
        let line = next_line().ok_or_else(|| field_error("header", "missing blank line before data"))?;
        let line = std::str::from_utf8(line).map_err(|_| field_error("header", "header is not UTF-8"))?;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.is_empty() {
            break;
        }
        if line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            continue;
        };
        let value = value.trim_start_matches('=').trim().to_string();
        match key.trim() {
            "type" => kind = Some(value),
            "dimension" => dimension = Some(value),
            "sizes" => sizes = Some(value),
            "encoding" => encoding = Some(value),
            _ => {}
        }
    }
    match kind.as_deref() {
        Some("uint8" | "uchar" | "unsigned char" | "uint8_t") => {}
        Some(other) => return Err(field_error("type", format!("unsupported type `{other}`"))),
        None => return Err(field_error("type", "missing")),
    }
    match dimension.as_deref() {
        Some("3") => {}
        Some(other) => return Err(field_error("dimension", format!("unsupported dimension `{other}`"))),
        None => return Err(field_error("dimension", "missing")),
    }
    match encoding.as_deref() {
        Some("raw") => {}
        Some(other) => return Err(field_error("encoding", format!("unsupported encoding `{other}`"))),
        None => return Err(field_error("encoding", "missing")),
    }
    let sizes = sizes.ok_or_else(|| field_error("sizes", "missing"))?;
    let dims: Vec<usize> = sizes
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| field_error("sizes", format!("bad size `{s}`"))))
        .collect::<Result<_, _>>()?;
    let n = match dims[..] {
        [a, b, c] if a == b && b == c && a > 0 => a,
        _ => return Err(field_error("sizes", format!("expected three equal positive sizes, got `{sizes}`"))),
    };
    let payload = &bytes[pos.min(bytes.len())..];
    let expected = n * n * n;
    if payload.len() != expected {
        return Err(DatasetError::NrrdSize { expected, actual: payload.len() });
    }
    VoxelGrid::from_occupancy(n, payload.to_vec()).map_err(|e| field_error("data", e.to_string()))
}
