//! File IO: `.sct` tensors, `SCW1` weights, 8-bit PGM frames and `.meta` sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use sci_core::denoise::NetworkWeights;
use sci_core::tensor::sct::{self, Tensor};
use sci_core::{DataCube, Frame2D};

use crate::error::{AppError, AppResult};

fn read_bytes(path: &Path) -> AppResult<Vec<u8>> {
    fs::read(path).map_err(|e| AppError::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> AppResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| AppError::io(path, e))
}

fn format_err(path: &Path, message: impl Into<String>) -> AppError {
    AppError::Format { path: path.to_path_buf(), message: message.into() }
}

pub fn read_tensor(path: &Path) -> AppResult<Tensor> {
    Ok(sct::decode(&read_bytes(path)?)?)
}

fn is_pgm(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

/// A rank-3 `.sct` file. A rank-2 file or a PGM image loads as one band.
pub fn read_cube(path: &Path) -> AppResult<DataCube> {
    if is_pgm(path) {
        return Ok(DataCube::from_slices(&[read_pgm(path)?])?);
    }
    match read_tensor(path)? {
        Tensor::Cube(c) => Ok(c),
        Tensor::Frame(f) => Ok(DataCube::from_slices(&[f])?),
        Tensor::Other(t) => Err(format_err(path, format!("expected rank 2 or 3, found dims {:?}", t.dims))),
    }
}

/// A rank-2 `.sct` file or a PGM image.
pub fn read_frame(path: &Path) -> AppResult<Frame2D> {
    if is_pgm(path) {
        return read_pgm(path);
    }
    match read_tensor(path)? {
        Tensor::Frame(f) => Ok(f),
        Tensor::Cube(c) if c.bands() == 1 => Ok(c.slice(0)),
        Tensor::Cube(c) => Err(format_err(path, format!("expected a frame, found a cube with dims {:?}", c.dims()))),
        Tensor::Other(t) => Err(format_err(path, format!("expected rank 2, found dims {:?}", t.dims))),
    }
}

/// Stacks several frames (PGM or `.sct`) into a cube, one band per file.
pub fn read_frames(paths: &[PathBuf]) -> AppResult<DataCube> {
    let frames = paths.iter().map(|p| read_frame(p)).collect::<AppResult<Vec<_>>>()?;
    Ok(DataCube::from_slices(&frames)?)
}

pub fn write_cube(path: &Path, cube: &DataCube) -> AppResult<()> {
    write_bytes(path, &sct::encode_cube(cube)?)
}

pub fn write_frame(path: &Path, frame: &Frame2D) -> AppResult<()> {
    write_bytes(path, &sct::encode_frame(frame)?)
}

pub fn read_weights(path: &Path) -> AppResult<NetworkWeights> {
    Ok(NetworkWeights::decode(&read_bytes(path)?)?)
}

pub fn write_weights(path: &Path, w: &NetworkWeights) -> AppResult<()> {
    write_bytes(path, &w.encode()?)
}

pub fn read_pgm(path: &Path) -> AppResult<Frame2D> {
    parse_pgm(&read_bytes(path)?).map_err(|m| format_err(path, m))
}

/// Parses binary (P5) or ASCII (P2) PGM with `maxval ≤ 255`; values are
/// scaled to `[0, 1]`. Image rows become `i`, columns `j`.
pub fn parse_pgm(bytes: &[u8]) -> Result<Frame2D, String> {
    let mut pos = 0;
    let mut token = || -> Result<String, String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("unexpected end of header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    let num = |s: String| s.parse::<usize>().map_err(|_| format!("bad header field {s:?}"));
    let width = num(token()?)?;
    let height = num(token()?)?;
    let maxval = num(token()?)?;
    if maxval == 0 || maxval > 255 {
        return Err(format!("only 8-bit PGM is supported (maxval {maxval})"));
    }
    let count = width * height;
    let scale = maxval as f64;
    let data: Vec<f64> = match magic.as_str() {
        "P5" => {
            let start = pos + 1;
            let raw = bytes.get(start..start + count).ok_or_else(|| format!("expected {count} pixel bytes"))?;
            raw.iter().map(|&v| v as f64 / scale).collect()
        }
        "P2" => (0..count).map(|_| Ok(num(token()?)? as f64 / scale)).collect::<Result<_, String>>()?,
        other => return Err(format!("unsupported PGM magic {other:?}")),
    };
    Frame2D::from_vec(height, width, data).map_err(|e| e.to_string())
}

/// Writes `key=value` lines.
pub fn write_meta(path: &Path, entries: &[(String, String)]) -> AppResult<()> {
    let text: String = entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    write_bytes(path, text.as_bytes())
}

pub fn read_meta(path: &Path) -> AppResult<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    parse_key_values(&text).map_err(|m| format_err(path, m))
}

/// `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>, String> {
    text.lines()
        .enumerate()
        .map(|(n, l)| (n, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(n, l)| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| format!("line {}: expected key=value, got {l:?}", n + 1))
        })
        .collect()
}

/// `<path>.meta`, keeping the original extension.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_binary_and_ascii() {
        let mut p5 = b"P5\n# c\n3 2\n255\n".to_vec();
        p5.extend_from_slice(&[0, 51, 255, 102, 153, 204]);
        let f = parse_pgm(&p5).unwrap();
        assert_eq!(f.dims(), (2, 3));
        assert_eq!(f.get(0, 2), 1.0);
        assert_eq!(f.get(1, 0), 0.4);
        let p2 = parse_pgm(b"P2 3 2 255\n0 51 255\n102 153 204\n").unwrap();
        assert_eq!(p2, f);
        assert!(parse_pgm(b"P5 1 1 65535\n\0\0").is_err());
        assert!(parse_pgm(b"P6 1 1 255\n\0").is_err());
        assert!(parse_pgm(b"P5 2 2 255\n\0").is_err());
    }

    #[test]
    fn key_values() {
        let kv = parse_key_values("# c\n a = 1 \n\nb=x=y\n").unwrap();
        assert_eq!(kv, vec![("a".into(), "1".into()), ("b".into(), "x=y".into())]);
        assert!(parse_key_values("novalue").is_err());
    }

    #[test]
    fn sidecar_keeps_extension() {
        assert_eq!(sidecar_path(Path::new("out/y.sct")), PathBuf::from("out/y.sct.meta"));
    }
}
