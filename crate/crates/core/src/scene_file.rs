//! Particle interchange files.
//!
//! Binary layout, all little-endian:
//!
//! | bytes | field |
//! |-------|-------|
//! | 4     | magic `UTSP` |
//! | 4     | `u32` format version (1) |
//! | 8     | `u64` particle count |
//! | 4     | `u32` spherical-harmonic degree of the coefficients (0..=3) |
//! | 472 × count | per particle, 59 `f64`: mean xyz, quaternion wxyz, scale xyz, opacity, 16 RGB radiance triples |
//!
//! The text variant has a header line `utsplat-scene <version> <count>
//! <sh_degree>` followed by one line per particle holding the same 59 values,
//! whitespace separated, printed in shortest round-trip form. Lines starting
//! with `#` are ignored.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{Vector3, Vector4};

use crate::particles::{GaussianParticle, RadianceCoeffs, SH_COEFFS};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"UTSP";
pub const FORMAT_VERSION: u32 = 1;
pub const TEXT_TAG: &str = "utsplat-scene";
/// `f64` values per particle record.
pub const RECORD_LEN: usize = 3 + 4 + 3 + 1 + 3 * SH_COEFFS;

fn record(p: &GaussianParticle) -> [f64; RECORD_LEN] {
    let mut r = [0.0; RECORD_LEN];
    r[0..3].copy_from_slice(p.mean.as_slice());
    r[3..7].copy_from_slice(p.rotation().as_slice());
    r[7..10].copy_from_slice(p.scale().as_slice());
    r[10] = p.opacity();
    for (k, c) in p.radiance.coeffs.iter().enumerate() {
        r[11 + 3 * k..14 + 3 * k].copy_from_slice(c.as_slice());
    }
    r
}

fn from_record(r: &[f64], index: usize) -> Result<GaussianParticle> {
    let mut radiance = RadianceCoeffs::zeros();
    for (k, c) in radiance.coeffs.iter_mut().enumerate() {
        *c = Vector3::from_column_slice(&r[11 + 3 * k..14 + 3 * k]);
    }
    GaussianParticle::from_stored(
        Vector3::from_column_slice(&r[0..3]),
        Vector4::from_column_slice(&r[3..7]),
        Vector3::from_column_slice(&r[7..10]),
        r[10],
        radiance,
    )
    .map_err(|e| Error::Format(format!("particle {index}: {e}")))
}

/// Highest degree with a nonzero coefficient.
pub fn sh_degree_of(scene: &[GaussianParticle]) -> u32 {
    let used = |k: usize| scene.iter().any(|p| p.radiance.coeffs[k] != Vector3::zeros());
    match (1..SH_COEFFS).rev().find(|&k| used(k)) {
        None => 0,
        Some(k) if k < 4 => 1,
        Some(k) if k < 9 => 2,
        Some(_) => 3,
    }
}

fn check_header(version: u32, sh_degree: u32) -> Result<()> {
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    if sh_degree > 3 {
        return Err(Error::Format(format!(
            "spherical-harmonic degree {sh_degree} exceeds 3"
        )));
    }
    Ok(())
}

pub fn write_binary<W: Write>(scene: &[GaussianParticle], mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(scene.len() as u64).to_le_bytes())?;
    w.write_all(&sh_degree_of(scene).to_le_bytes())?;
    for p in scene {
        for v in record(p) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_array<R: Read, const N: usize>(r: &mut R, what: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("file truncated while reading {what}")),
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Vec<GaussianParticle>> {
    let magic: [u8; 4] = read_array(&mut r, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, not a binary scene file")));
    }
    let version = u32::from_le_bytes(read_array(&mut r, "version")?);
    let count = u64::from_le_bytes(read_array(&mut r, "particle count")?);
    let sh_degree = u32::from_le_bytes(read_array(&mut r, "SH degree")?);
    check_header(version, sh_degree)?;
    let mut scene = Vec::new();
    let mut rec = [0.0; RECORD_LEN];
    for i in 0..count as usize {
        for v in rec.iter_mut() {
            *v = f64::from_le_bytes(read_array(&mut r, &format!("particle {i}"))?);
        }
        scene.push(from_record(&rec, i)?);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format(format!("trailing bytes after {count} particles")));
    }
    Ok(scene)
}

pub fn write_text<W: Write>(scene: &[GaussianParticle], mut w: W) -> Result<()> {
    writeln!(w, "{TEXT_TAG} {FORMAT_VERSION} {} {}", scene.len(), sh_degree_of(scene))?;
    writeln!(w, "# mean(3) quaternion_wxyz(4) scale(3) opacity sh_rgb(48)")?;
    for p in scene {
        let line: Vec<String> = record(p).iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_text<R: BufRead>(r: R) -> Result<Vec<GaussianParticle>> {
    let mut lines = r
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty() && !l.starts_with('#')));
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Format("empty text scene file".into()))?;
    let header = header?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let parse_u = |s: &str, what: &str| {
        s.parse::<u64>()
            .map_err(|_| Error::Format(format!("header field {what}: expected an integer, got {s:?}")))
    };
    if fields.len() != 4 || fields[0] != TEXT_TAG {
        return Err(Error::Format(format!(
            "expected header `{TEXT_TAG} <version> <count> <sh_degree>`, got {header:?}"
        )));
    }
    let version = parse_u(fields[1], "version")? as u32;
    let count = parse_u(fields[2], "count")? as usize;
    let sh_degree = parse_u(fields[3], "sh_degree")? as u32;
    check_header(version, sh_degree)?;

    let mut scene = Vec::with_capacity(count);
    for (lineno, line) in lines {
        let line = line?;
        let values = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
        if values.len() != RECORD_LEN {
            return Err(Error::Format(format!(
                "line {}: expected {RECORD_LEN} values, got {}",
                lineno + 1,
                values.len()
            )));
        }
        scene.push(from_record(&values, scene.len())?);
    }
    if scene.len() != count {
        return Err(Error::Format(format!(
            "header declares {count} particles, found {}",
            scene.len()
        )));
    }
    Ok(scene)
}

fn is_text(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("txt"))
}

/// Writes `scene`, as text if the path ends in `.txt` and binary otherwise.
pub fn save(path: &Path, scene: &[GaussianParticle]) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    if is_text(path) {
        write_text(scene, w)
    } else {
        write_binary(scene, w)
    }
}

/// Reads a scene written by [`save`]; the format follows the extension.
pub fn load(path: &Path) -> Result<Vec<GaussianParticle>> {
    let r = BufReader::new(File::open(path)?);
    if is_text(path) {
        read_text(r)
    } else {
        read_binary(r)
    }
}
