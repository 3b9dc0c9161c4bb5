//! File formats: 16-bit PGM, plain CSV grids, and sinogram CSV.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{Image, Sinogram};
use crate::Real;

/// Binary 16-bit graymap with linear windowing of `[lo, hi]` onto `0..=65535`.
pub fn write_pgm16<T: Real>(path: impl AsRef<Path>, img: &Image<T>, lo: T, hi: T) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write!(w, "P5\n{} {}\n65535\n", img.width, img.height)?;
    let span = (hi - lo).as_f64();
    for &v in &img.data {
        let t = if span > 0.0 {
            ((v - lo).as_f64() / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let q = (t * 65535.0).round() as u16;
        w.write_all(&q.to_be_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a binary 16-bit graymap back as raw levels.
pub fn read_pgm16(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u16>)> {
    let bytes = std::fs::read(path)?;
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse("truncated PGM header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "65535" {
        return Err(Error::Parse(format!("unsupported PGM header {fields:?}")));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|e| Error::Parse(format!("PGM dimension {s:?}: {e}")))
    };
    let (w, h) = (parse(&fields[1])?, parse(&fields[2])?);
    let body = &bytes[pos..];
    if body.len() != 2 * w * h {
        return Err(Error::Parse("PGM body length mismatch".into()));
    }
    let px = body
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok((w, h, px))
}

/// One CSV line per image row.
pub fn write_image_csv<T: Real>(path: impl AsRef<Path>, img: &Image<T>) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for row in img.data.chunks(img.width) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_image_csv(path: impl AsRef<Path>) -> Result<Image<f64>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut data = Vec::new();
    let mut width = None;
    let mut height = 0;
    for line in f.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse("ragged image CSV".into()));
            }
            _ => {}
        }
        data.extend(row);
        height += 1;
    }
    Image::from_vec(width.unwrap_or(0), height, data)
}

pub const SINOGRAM_CSV_HEADER: &str = "angle_index,ray_index,count";

pub fn write_sinogram_csv<T: Real>(path: impl AsRef<Path>, d: &Sinogram<T>) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{SINOGRAM_CSV_HEADER}")?;
    for a in 0..d.n_angles {
        for r in 0..d.n_rays {
            writeln!(w, "{a},{r},{}", d.get(a, r))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_sinogram_csv(path: impl AsRef<Path>) -> Result<Sinogram<f64>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut lines = f.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == SINOGRAM_CSV_HEADER => {}
        _ => return Err(Error::Parse("missing sinogram CSV header".into())),
    }
    let mut triples = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("bad sinogram row {line:?}")));
        }
        let bad = |e: String| Error::Parse(format!("{line:?}: {e}"));
        let a: usize = parts[0].trim().parse().map_err(|e| bad(format!("{e}")))?;
        let r: usize = parts[1].trim().parse().map_err(|e| bad(format!("{e}")))?;
        let v: f64 = parts[2].trim().parse().map_err(|e| bad(format!("{e}")))?;
        triples.push((a, r, v));
    }
    let n_angles = triples.iter().map(|t| t.0 + 1).max().unwrap_or(0);
    let n_rays = triples.iter().map(|t| t.1 + 1).max().unwrap_or(0);
    if triples.len() != n_angles * n_rays {
        return Err(Error::Parse("sinogram CSV is not a full grid".into()));
    }
    let mut data = vec![0.0; n_angles * n_rays];
    for (a, r, v) in triples {
        data[a * n_rays + r] = v;
    }
    Sinogram::from_vec(n_angles, n_rays, data)
}
