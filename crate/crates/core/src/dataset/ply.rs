//! Minimal binary little-endian PLY codec for point clouds with `x y z intensity` float
//! vertices. Vertex order is preserved in both directions.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::LidarPoint;
use crate::geometry::Vec3;

#[derive(Debug, Error)]
pub enum PlyError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed PLY header: {0}")]
    Header(String),
    #[error("PLY body truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}

pub fn write_ply(path: &Path, points: &[LidarPoint]) -> Result<(), PlyError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_ply_to(&mut w, points)?;
    w.flush()?;
    Ok(())
}

pub fn write_ply_to<W: Write>(w: &mut W, points: &[LidarPoint]) -> io::Result<()> {
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nproperty float intensity\nend_header\n",
        points.len()
    )?;
    for p in points {
        for v in [p.position.x, p.position.y, p.position.z, p.intensity] {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_ply(path: &Path) -> Result<Vec<LidarPoint>, PlyError> {
    read_ply_from(BufReader::new(File::open(path)?))
}

pub fn read_ply_from<R: BufRead>(mut r: R) -> Result<Vec<LidarPoint>, PlyError> {
    let mut line = String::new();
    let next_line = |r: &mut R, line: &mut String| -> Result<(), PlyError> {
        line.clear();
        if r.read_line(line)? == 0 {
            return Err(PlyError::Header("unexpected end of file".into()));
        }
        Ok(())
    };

    next_line(&mut r, &mut line)?;
    if line.trim_end() != "ply" {
        return Err(PlyError::Header("missing `ply` magic".into()));
    }

    let mut count: Option<usize> = None;
    let mut props: Vec<String> = Vec::new();
    let mut in_vertex = false;
    loop {
        next_line(&mut r, &mut line)?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["end_header"] => break,
            ["format", fmt, _] => {
                if *fmt != "binary_little_endian" {
                    return Err(PlyError::Header(format!("unsupported format `{fmt}`")));
                }
            }
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", "vertex", n] => {
                count = Some(n.parse().map_err(|_| PlyError::Header(format!("bad vertex count `{n}`")))?);
                in_vertex = true;
            }
            ["element", name, n] => {
                if *n != "0" {
                    return Err(PlyError::Header(format!("unsupported element `{name}`")));
                }
                in_vertex = false;
            }
            ["property", ty, name] if in_vertex => {
                if !matches!(*ty, "float" | "float32") {
                    return Err(PlyError::Header(format!("property `{name}` has unsupported type `{ty}`")));
                }
                props.push(name.to_string());
            }
            ["property", ..] => {}
            _ => return Err(PlyError::Header(format!("unexpected line `{}`", line.trim_end()))),
        }
    }

    let count = count.ok_or_else(|| PlyError::Header("no vertex element".into()))?;
    let idx = |name: &str| props.iter().position(|p| p == name);
    let (ix, iy, iz) = match (idx("x"), idx("y"), idx("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(PlyError::Header("vertex needs x, y and z".into())),
    };
    let ii = idx("intensity");

    let stride = props.len() * 4;
    let expected = count * stride;
    let mut body = Vec::with_capacity(expected);
    r.take(expected as u64).read_to_end(&mut body)?;
    if body.len() < expected {
        return Err(PlyError::Truncated { expected, found: body.len() });
    }

    let field = |rec: &[u8], i: usize| f32::from_le_bytes(rec[i * 4..i * 4 + 4].try_into().unwrap()) as f64;
    Ok(body
        .chunks_exact(stride)
        .map(|rec| {
            LidarPoint::new(
                Vec3::new(field(rec, ix), field(rec, iy), field(rec, iz)),
                ii.map_or(0.0, |i| field(rec, i)),
            )
        })
        .collect())
}
