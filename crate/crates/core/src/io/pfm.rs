//! Portable float map reader/writer. Grayscale "Pf" only, little-endian
//! (negative scale), rows stored bottom-to-top per the format convention.
//! Samples are f32 on disk; the round trip is bit-exact for
//! f32-representable values.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;

const MAX_DIM: usize = 1 << 20;

pub fn write_pfm(path: &Path, grid: &Grid) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write!(w, "Pf\n{} {}\n-1.0\n", grid.width, grid.height)?;
    // bottom row first
    for y in (0..grid.height).rev() {
        for x in 0..grid.width {
            w.write_all(&(grid.at(x, y) as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_pfm(path: &Path) -> Result<Grid> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);

    let header = read_token_line(&mut r)?;
    if header.trim() != "Pf" {
        return Err(Error::Format(format!(
            "{}: expected grayscale PFM header 'Pf', got {:?}",
            path.display(),
            header.trim()
        )));
    }
    let dims = read_token_line(&mut r)?;
    let mut parts = dims.split_whitespace();
    let width: usize = parse_dim(parts.next(), path)?;
    let height: usize = parse_dim(parts.next(), path)?;
    if parts.next().is_some() {
        return Err(Error::Format(format!(
            "{}: malformed dimension line",
            path.display()
        )));
    }
    if width == 0 || height == 0 || width > MAX_DIM || height > MAX_DIM || width
        .checked_mul(height)
        .map_or(true, |n| n > MAX_DIM * 64)
    {
        return Err(Error::Format(format!(
            "{}: dimensions {}x{} out of range",
            path.display(),
            width,
            height
        )));
    }
    let scale_line = read_token_line(&mut r)?;
    let scale: f32 = scale_line
        .trim()
        .parse()
        .map_err(|_| Error::Format(format!("{}: bad scale field", path.display())))?;
    if scale >= 0.0 {
        return Err(Error::Format(format!(
            "{}: big-endian PFM not supported (scale {scale})",
            path.display()
        )));
    }

    let mut bytes = vec![0u8; width * height * 4];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::Format(format!("{}: truncated sample data", path.display())))?;

    let mut grid = Grid::new(width, height);
    let mut i = 0;
    for y in (0..height).rev() {
        for x in 0..width {
            let v = f32::from_le_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]);
            grid.set(x, y, v as f64);
            i += 4;
        }
    }
    Ok(grid)
}

fn parse_dim(tok: Option<&str>, path: &Path) -> Result<usize> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Format(format!("{}: bad dimension field", path.display())))
}

fn read_token_line<R: BufRead>(r: &mut R) -> Result<String> {
    let mut line = String::new();
    let n = r.read_line(&mut line)?;
    if n == 0 {
        return Err(Error::Format("unexpected end of PFM header".into()));
    }
    Ok(line)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pfm");
        let mut g = Grid::new(5, 3);
        let mut state = 0x9e3779b9u32;
        for v in &mut g.data {
            state = state.wrapping_mul(1664525).wrapping_add(1013904223);
            *v = f32::from_bits(0x3f000000 | (state >> 10)) as f64;
        }
        g.set(2, 1, f64::NAN);
        write_pfm(&path, &g).unwrap();
        let back = read_pfm(&path).unwrap();
        for (a, b) in g.data.iter().zip(&back.data) {
            assert_eq!((*a as f32).to_bits(), (*b as f32).to_bits());
        }
    }

    #[test]
    fn hand_written_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fix.pfm");
        let mut bytes = b"Pf\n2 2\n-1.0\n".to_vec();
        // bottom row (2,3) then top row (0,1)
        for v in [2.0f32, 3.0, 0.0, 1.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&path, bytes).unwrap();
        let g = read_pfm(&path).unwrap();
        assert_eq!(g.data, vec![0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn malformed_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pfm");
        std::fs::write(&path, b"PF\n2 2\n-1.0\n").unwrap();
        assert!(read_pfm(&path).is_err());
        std::fs::write(&path, b"Pf\n2 999999999999 1\n-1.0\n").unwrap();
        assert!(read_pfm(&path).is_err());
        std::fs::write(&path, b"Pf\n2 2\n-1.0\n\x00\x00").unwrap();
        assert!(read_pfm(&path).is_err());
    }
}
