//! Pre-extracted feature files.
//!
//! Binary layout (little endian): `b"SGNF"`, `u32` version (1), `u32` id
//! length, id bytes (UTF-8), `u32` M, `u32` d_a, `u32` d_m, then M rows of
//! `d_a + d_m` `f32`. Text layout: a header line `video_id M d_a d_m`
//! followed by M lines of whitespace-separated decimals.

use std::fs;
use std::path::Path;

use ndarray::{Array2, Axis};

use crate::datamodel::VideoFeatures;
use crate::error::{Result, SgnError};
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"SGNF";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureFormat {
    Binary,
    Text,
}

/// File contents before resampling.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFeatures {
    pub video_id: String,
    pub d_a: usize,
    pub d_m: usize,
    pub frames: Array2<f32>,
}

/// Source frame for each of `n` output frames: `floor(i * m / n)`.
pub fn resample_indices(m: usize, n: usize) -> Vec<usize> {
    (0..n).map(|i| i * m / n).collect()
}

pub fn write_features<T: Scalar>(path: &Path, video: &VideoFeatures<T>, format: FeatureFormat) -> Result<()> {
    let frames = video.frames();
    let bytes = match format {
        FeatureFormat::Binary => {
            let mut out = Vec::with_capacity(28 + video.video_id.len() + frames.len() * 4);
            out.extend_from_slice(MAGIC);
            out.extend_from_slice(&VERSION.to_le_bytes());
            out.extend_from_slice(&(video.video_id.len() as u32).to_le_bytes());
            out.extend_from_slice(video.video_id.as_bytes());
            for v in [frames.nrows(), video.d_a(), video.d_m()] {
                out.extend_from_slice(&(v as u32).to_le_bytes());
            }
            for &v in frames.iter() {
                out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
            }
            out
        }
        FeatureFormat::Text => {
            let mut s = format!("{} {} {} {}\n", video.video_id, frames.nrows(), video.d_a(), video.d_m());
            for row in frames.rows() {
                let line: Vec<String> = row.iter().map(|v| format!("{}", v.as_f64() as f32)).collect();
                s.push_str(&line.join(" "));
                s.push('\n');
            }
            s.into_bytes()
        }
    };
    fs::write(path, bytes).map_err(|e| SgnError::io(path, e))
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| SgnError::Data("truncated feature file".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

fn parse_binary(buf: &[u8]) -> Result<RawFeatures> {
    let mut c = Cursor { buf, pos: 4 };
    let version = c.u32()?;
    if version != VERSION {
        return Err(SgnError::Data(format!("unsupported feature file version {version}")));
    }
    let id_len = c.u32()? as usize;
    let video_id = std::str::from_utf8(c.take(id_len)?)
        .map_err(|_| SgnError::Data("video id is not UTF-8".into()))?
        .to_string();
    let m = c.u32()? as usize;
    let d_a = c.u32()? as usize;
    let d_m = c.u32()? as usize;
    let n = m
        .checked_mul(d_a + d_m)
        .ok_or_else(|| SgnError::Data("feature header overflows".into()))?;
    let data = c.take(n.checked_mul(4).ok_or_else(|| SgnError::Data("feature header overflows".into()))?)?;
    if c.pos != buf.len() {
        return Err(SgnError::Data("trailing bytes after feature rows".into()));
    }
    let values: Vec<f32> = data
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
        .collect();
    let frames = Array2::from_shape_vec((m, d_a + d_m), values).map_err(|e| SgnError::Data(e.to_string()))?;
    Ok(RawFeatures {
        video_id,
        d_a,
        d_m,
        frames,
    })
}

fn parse_text(text: &str) -> Result<RawFeatures> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| SgnError::Data("empty feature file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(SgnError::Data(format!("malformed feature header {header:?}")));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| SgnError::Data(format!("malformed feature header {header:?}")))
    };
    let (m, d_a, d_m) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    let width = d_a + d_m;
    let mut values = Vec::with_capacity(m * width);
    let mut rows = 0;
    for line in lines {
        let before = values.len();
        for tok in line.split_whitespace() {
            let v: f32 = tok
                .parse()
                .map_err(|_| SgnError::Data(format!("bad feature value {tok:?}")))?;
            values.push(v);
        }
        if values.len() - before != width {
            return Err(SgnError::Data(format!("feature row {rows} has {} values, expected {width}", values.len() - before)));
        }
        rows += 1;
    }
    if rows != m {
        return Err(SgnError::Data(format!("header declares {m} rows, file has {rows}")));
    }
    let frames = Array2::from_shape_vec((m, width), values).map_err(|e| SgnError::Data(e.to_string()))?;
    Ok(RawFeatures {
        video_id: fields[0].to_string(),
        d_a,
        d_m,
        frames,
    })
}

/// Reads a feature file in either layout without resampling.
pub fn read_features(path: &Path) -> Result<RawFeatures> {
    let buf = fs::read(path).map_err(|e| SgnError::io(path, e))?;
    let raw = if buf.starts_with(MAGIC) {
        parse_binary(&buf)?
    } else {
        let text = std::str::from_utf8(&buf).map_err(|_| SgnError::Data("feature file is neither binary nor text".into()))?;
        parse_text(text)?
    };
    if raw.frames.iter().any(|v| !v.is_finite()) {
        return Err(SgnError::Data(format!("{}: non-finite feature value", path.display())));
    }
    if raw.frames.nrows() == 0 {
        return Err(SgnError::Data(format!("{}: no frames", path.display())));
    }
    Ok(raw)
}

/// Loads a feature file and resamples it to `n_frames` rows.
pub fn load_features<T: Scalar>(path: &Path, n_frames: usize, d_a: usize, d_m: usize) -> Result<VideoFeatures<T>> {
    let raw = read_features(path)?;
    if raw.d_a != d_a || raw.d_m != d_m {
        return Err(SgnError::Data(format!(
            "{}: feature widths ({}, {}) do not match the configuration ({d_a}, {d_m})",
            path.display(),
            raw.d_a,
            raw.d_m
        )));
    }
    let idx = resample_indices(raw.frames.nrows(), n_frames);
    let frames = raw.frames.select(Axis(0), &idx).mapv(|v| T::lit(v as f64));
    VideoFeatures::new(raw.video_id, frames, d_a, d_m)
}
