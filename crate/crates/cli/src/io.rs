//! Sample files: plain text/CSV and PGM images.
//!
//! Text samples hold one value per line (or comma-separated rows, read as a
//! matrix). Lines starting with `#` are comments; `# looks: L` declares the
//! number of looks. PGM images (P2 or P5, 8 or 16 bit) map gray levels to
//! intensities through `# speckle-scale: slope offset` (intensity =
//! slope·level + offset, default `1 0`) and may declare `# speckle-looks: L`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use speckle::Sample;

use crate::CliError;

/// Rectangular window of an image, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionSelector {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl FromStr for RegionSelector {
    type Err = String;

    /// `x,y,width,height`.
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|e| format!("bad region component '{p}': {e}")))
            .collect::<Result<_, _>>()?;
        let [x, y, width, height] = parts[..] else {
            return Err(format!("region must be x,y,width,height, got '{s}'"));
        };
        if width == 0 || height == 0 {
            return Err("region width and height must be positive".into());
        }
        Ok(RegionSelector { x, y, width, height })
    }
}

/// Values read from a file, row-major when they form a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub values: Vec<f64>,
    /// `(width, height)` when the file is an image or a rectangular table.
    pub shape: Option<(usize, usize)>,
    pub looks: Option<f64>,
}

impl Dataset {
    pub fn select(&self, region: Option<RegionSelector>) -> Result<Vec<f64>, CliError> {
        let Some(r) = region else { return Ok(self.values.clone()) };
        let Some((w, h)) = self.shape else {
            return Err(CliError::Input("a region needs an image or a rectangular table".into()));
        };
        if r.x + r.width > w || r.y + r.height > h {
            return Err(CliError::Input(format!(
                "region {}x{} at ({}, {}) exceeds the {w}x{h} image",
                r.width, r.height, r.x, r.y
            )));
        }
        let mut out = Vec::with_capacity(r.width * r.height);
        for row in r.y..r.y + r.height {
            out.extend_from_slice(&self.values[row * w + r.x..row * w + r.x + r.width]);
        }
        Ok(out)
    }

    pub fn sample(&self, region: Option<RegionSelector>) -> Result<Sample, CliError> {
        let values = self.select(region)?;
        if values.is_empty() {
            return Err(CliError::Input("no observations".into()));
        }
        Sample::new(values).map_err(|e| CliError::Input(e.to_string()))
    }
}

fn parse_looks(text: &str) -> Result<f64, CliError> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|l| l.is_finite() && *l >= 1.0)
        .ok_or_else(|| CliError::Input(format!("bad looks declaration '{}'", text.trim())))
}

pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        read_pgm(&bytes).map_err(|e| match e {
            CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
            other => other,
        })
    } else {
        let text = String::from_utf8(bytes).map_err(|_| CliError::Input(format!("{} is not UTF-8 text", path.display())))?;
        read_text(&text).map_err(|e| match e {
            CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

pub fn read_text(text: &str) -> Result<Dataset, CliError> {
    let mut values = Vec::new();
    let mut looks = None;
    let mut widths = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(rest) = comment.trim().strip_prefix("looks:") {
                looks = Some(parse_looks(rest)?);
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let before = values.len();
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| CliError::Input(format!("line {}: cannot parse '{}' as a number", lineno + 1, field.trim())))?;
            values.push(v);
        }
        widths.push(values.len() - before);
    }
    if values.is_empty() {
        return Err(CliError::Input("file holds no observations".into()));
    }
    let shape = match widths.first() {
        Some(&w) if w > 1 && widths.iter().all(|&x| x == w) => Some((w, widths.len())),
        _ => None,
    };
    Ok(Dataset { values, shape, looks })
}

struct PgmHeader {
    width: usize,
    height: usize,
    maxval: u32,
    slope: f64,
    offset: f64,
    looks: Option<f64>,
    data_start: usize,
}

fn pgm_header(bytes: &[u8]) -> Result<PgmHeader, CliError> {
    let mut pos = 2;
    let mut fields = Vec::new();
    let (mut slope, mut offset, mut looks) = (1.0, 0.0, None);
    while fields.len() < 3 {
        match bytes.get(pos) {
            None => return Err(CliError::Input("truncated PGM header".into())),
            Some(b'#') => {
                let end = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |e| pos + e);
                let comment = String::from_utf8_lossy(&bytes[pos + 1..end]).trim().to_string();
                if let Some(rest) = comment.strip_prefix("speckle-scale:") {
                    let nums: Vec<f64> = rest.split_whitespace().filter_map(|t| t.parse().ok()).collect();
                    let [s, o] = nums[..] else {
                        return Err(CliError::Input(format!("bad speckle-scale comment '{comment}'")));
                    };
                    if !(s > 0.0 && s.is_finite() && o.is_finite()) {
                        return Err(CliError::Input(format!("bad speckle-scale comment '{comment}'")));
                    }
                    (slope, offset) = (s, o);
                } else if let Some(rest) = comment.strip_prefix("speckle-looks:") {
                    looks = Some(parse_looks(rest)?);
                }
                pos = end;
            }
            Some(b) if b.is_ascii_whitespace() => pos += 1,
            Some(_) => {
                let end = bytes[pos..].iter().position(|b| b.is_ascii_whitespace()).map_or(bytes.len(), |e| pos + e);
                let token = std::str::from_utf8(&bytes[pos..end]).unwrap_or("");
                let v: u32 = token.parse().map_err(|_| CliError::Input(format!("bad PGM header field '{token}'")))?;
                fields.push(v);
                pos = end;
            }
        }
    }
    let (width, height, maxval) = (fields[0] as usize, fields[1] as usize, fields[2]);
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(CliError::Input(format!("unsupported PGM geometry {width}x{height}, maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from binary data.
    Ok(PgmHeader { width, height, maxval, slope, offset, looks, data_start: pos + 1 })
}

pub fn read_pgm(bytes: &[u8]) -> Result<Dataset, CliError> {
    let h = pgm_header(bytes)?;
    let count = h.width * h.height;
    let levels: Vec<u32> = if bytes.starts_with(b"P5") {
        let wide = h.maxval > 255;
        let need = count * if wide { 2 } else { 1 };
        let data = bytes.get(h.data_start..h.data_start + need).ok_or_else(|| CliError::Input("truncated PGM raster".into()))?;
        if wide {
            data.chunks_exact(2).map(|c| u32::from(u16::from_be_bytes([c[0], c[1]]))).collect()
        } else {
            data.iter().map(|&b| u32::from(b)).collect()
        }
    } else {
        let text = String::from_utf8_lossy(&bytes[h.data_start.min(bytes.len())..]);
        let mut out = Vec::with_capacity(count);
        for token in text.split_whitespace().take(count) {
            out.push(token.parse().map_err(|_| CliError::Input(format!("bad PGM gray level '{token}'")))?);
        }
        if out.len() < count {
            return Err(CliError::Input("truncated PGM raster".into()));
        }
        out
    };
    if let Some(bad) = levels.iter().find(|&&v| v > h.maxval) {
        return Err(CliError::Input(format!("gray level {bad} exceeds maxval {}", h.maxval)));
    }
    let values = levels.iter().map(|&v| h.slope * f64::from(v) + h.offset).collect();
    Ok(Dataset { values, shape: Some((h.width, h.height)), looks: h.looks })
}

/// Shortest representation that parses back to the same double.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x == 0.0 || (1e-5..1e16).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn sample_csv(values: &[f64], width: Option<usize>, looks: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# looks: {}", fmt_f64(looks));
    match width {
        Some(w) => {
            for row in values.chunks(w) {
                let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
                out.push_str(&line.join(","));
                out.push('\n');
            }
        }
        None => {
            for &v in values {
                out.push_str(&fmt_f64(v));
                out.push('\n');
            }
        }
    }
    out
}

/// 16-bit binary PGM with a linear scale chosen so the largest value maps to
/// the top gray level. Levels are at least 1 so every pixel stays positive.
pub fn sample_pgm(values: &[f64], width: usize, height: usize, looks: f64) -> Vec<u8> {
    let top = values.iter().cloned().fold(0.0, f64::max);
    let slope = top / 65535.0;
    let mut out = format!(
        "P5\n# speckle-scale: {} 0\n# speckle-looks: {}\n{width} {height}\n65535\n",
        fmt_f64(slope),
        fmt_f64(looks)
    )
    .into_bytes();
    for &v in values {
        let level = (v / slope).round().clamp(1.0, 65535.0) as u16;
        out.extend_from_slice(&level.to_be_bytes());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_with_comments_and_matrix() {
        let d = read_text("# looks: 3.2\n1,2,3\n4,5,6\n").unwrap();
        assert_eq!(d.looks, Some(3.2));
        assert_eq!(d.shape, Some((3, 2)));
        let r = RegionSelector { x: 1, y: 0, width: 2, height: 2 };
        assert_eq!(d.select(Some(r)).unwrap(), vec![2.0, 3.0, 5.0, 6.0]);
        assert!(d.select(Some(RegionSelector { x: 2, y: 0, width: 2, height: 1 })).is_err());
        assert!(read_text("# only a comment\n").is_err());
        assert!(read_text("1\nabc\n").is_err());
    }

    #[test]
    fn pgm_round_trip() {
        let values = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
        let bytes = sample_pgm(&values, 3, 2, 8.0);
        let d = read_pgm(&bytes).unwrap();
        assert_eq!(d.shape, Some((3, 2)));
        assert_eq!(d.looks, Some(8.0));
        for (a, b) in d.values.iter().zip(values) {
            assert!((a - b).abs() <= 16.0 / 65535.0);
        }
        let ascii = b"P2\n# speckle-scale: 0.5 1\n2 1\n255\n0 10\n";
        assert_eq!(read_pgm(ascii).unwrap().values, vec![1.0, 6.0]);
        let eight = b"P5\n2 1\n255\n\x01\x02";
        assert_eq!(read_pgm(eight).unwrap().values, vec![1.0, 2.0]);
        assert!(read_pgm(b"P5\n2 2\n255\n\x01").is_err());
    }

    #[test]
    fn number_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 6.02e23, 123456.789, 5e-324, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            assert_eq!(fmt_f64(s.parse().unwrap()), s);
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }
}
