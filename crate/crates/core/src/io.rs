//! Point-cloud files.
//!
//! CSV: a header line `# n=<n> d=<d> weighted=<0|1>`, then one comma-separated
//! row per point (`n` coordinates, then the weight when weighted).
//!
//! Binary: a 16-byte header (magic `RFP0` unweighted / `RFP1` weighted, then
//! `n`, `d`, `count` as little-endian `u32`), then `count` rows of
//! little-endian `f64` with the same layout as a CSV row.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cloud::{Normalization, PointCloud};
use crate::error::{Error, Result};

const MAGIC_PLAIN: &[u8; 4] = b"RFP0";
const MAGIC_WEIGHTED: &[u8; 4] = b"RFP1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Binary,
}

impl Format {
    /// `.bin` / `.rfp` are binary, everything else CSV.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("rfp") => Format::Binary,
            _ => Format::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Header {
    n: usize,
    d: usize,
    weighted: bool,
}

fn parse_header(line: &str) -> Result<Header> {
    let body = line
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::Input("missing header line `# n=<n> d=<d> weighted=<0|1>`".into()))?;
    let (mut n, mut d, mut weighted) = (None, None, false);
    for field in body.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::Input(format!("malformed header field `{field}`")))?;
        let parse = |v: &str| v.parse::<usize>().map_err(|_| Error::Input(format!("malformed header field `{field}`")));
        match key {
            "n" => n = Some(parse(value)?),
            "d" => d = Some(parse(value)?),
            "weighted" => match value {
                "0" => weighted = false,
                "1" => weighted = true,
                _ => return Err(Error::Input(format!("weighted must be 0 or 1, got `{value}`"))),
            },
            _ => return Err(Error::Input(format!("unknown header field `{key}`"))),
        }
    }
    match (n, d) {
        (Some(n), Some(d)) if n >= 1 && d >= 1 && d <= n => Ok(Header { n, d, weighted }),
        (Some(n), Some(d)) => Err(Error::Input(format!("header needs 1 <= d <= n, got n={n} d={d}"))),
        _ => Err(Error::Input("header must declare n and d".into())),
    }
}

fn split_rows(coords: Vec<f64>, header: Header) -> Result<PointCloud> {
    let width = header.n + header.weighted as usize;
    if coords.is_empty() {
        return Err(Error::Input("file contains no points".into()));
    }
    if !header.weighted {
        return PointCloud::new(header.n, header.d, coords, None);
    }
    let count = coords.len() / width;
    let mut xs = Vec::with_capacity(count * header.n);
    let mut ws = Vec::with_capacity(count);
    for row in coords.chunks_exact(width) {
        xs.extend_from_slice(&row[..header.n]);
        ws.push(row[header.n]);
    }
    PointCloud::new(header.n, header.d, xs, Some(ws))
}

pub fn read_csv<R: Read>(reader: R) -> Result<PointCloud> {
    let mut lines = BufReader::new(reader).lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, line)) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break parse_header(&line)?;
                }
            }
            None => return Err(Error::Input("empty file".into())),
        }
    };
    let width = header.n + header.weighted as usize;
    let mut values = Vec::new();
    for (index, line) in lines {
        let line = line?;
        let row = index + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let before = values.len();
        for field in trimmed.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Input(format!("row {row}: cannot parse `{}`", field.trim())))?;
            if !v.is_finite() {
                return Err(Error::Input(format!("row {row}: non-finite value `{}`", field.trim())));
            }
            values.push(v);
        }
        if values.len() - before != width {
            return Err(Error::Input(format!(
                "row {row}: expected {width} columns, found {}",
                values.len() - before
            )));
        }
    }
    split_rows(values, header)
}

/// Writes with the shortest representation that parses back to the same `f64`.
pub fn write_csv<W: Write>(cloud: &PointCloud, writer: W) -> Result<()> {
    let mut out = BufWriter::new(writer);
    writeln!(out, "# n={} d={} weighted={}", cloud.n(), cloud.d(), cloud.is_weighted() as u8)?;
    let mut line = String::new();
    for i in 0..cloud.len() {
        line.clear();
        for (j, v) in cloud.point(i).iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            write!(line, "{v}").expect("writing to a String");
        }
        if let Some(w) = cloud.weights() {
            write!(line, ",{}", w[i]).expect("writing to a String");
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_binary<R: Read>(mut reader: R) -> Result<PointCloud> {
    let mut head = [0u8; 16];
    reader.read_exact(&mut head).map_err(|_| Error::Input("binary file shorter than its 16-byte header".into()))?;
    let weighted = match &head[..4] {
        m if m == MAGIC_PLAIN => false,
        m if m == MAGIC_WEIGHTED => true,
        _ => return Err(Error::Input("bad magic: expected RFP0 or RFP1".into())),
    };
    let word = |i: usize| u32::from_le_bytes(head[i..i + 4].try_into().expect("4 bytes")) as usize;
    let (n, d, count) = (word(4), word(8), word(12));
    if n == 0 || d == 0 || d > n {
        return Err(Error::Input(format!("header needs 1 <= d <= n, got n={n} d={d}")));
    }
    let width = n + weighted as usize;
    let expected = count
        .checked_mul(width)
        .and_then(|v| v.checked_mul(8))
        .ok_or_else(|| Error::Input("point count overflows".into()))?;
    let mut body = Vec::with_capacity(expected);
    reader.read_to_end(&mut body)?;
    if body.len() != expected {
        return Err(Error::Input(format!(
            "header declares {count} points ({expected} bytes), body has {} bytes",
            body.len()
        )));
    }
    let mut values = Vec::with_capacity(count * width);
    for (k, chunk) in body.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        if !v.is_finite() {
            return Err(Error::Input(format!("row {}: non-finite value", k / width + 1)));
        }
        values.push(v);
    }
    split_rows(values, Header { n, d, weighted })
}

pub fn write_binary<W: Write>(cloud: &PointCloud, writer: W) -> Result<()> {
    let count = u32::try_from(cloud.len()).map_err(|_| Error::InvalidParameter("too many points for the binary format".into()))?;
    let mut out = BufWriter::new(writer);
    out.write_all(if cloud.is_weighted() { MAGIC_WEIGHTED } else { MAGIC_PLAIN })?;
    out.write_all(&(cloud.n() as u32).to_le_bytes())?;
    out.write_all(&(cloud.d() as u32).to_le_bytes())?;
    out.write_all(&count.to_le_bytes())?;
    for i in 0..cloud.len() {
        for v in cloud.point(i) {
            out.write_all(&v.to_le_bytes())?;
        }
        if let Some(w) = cloud.weights() {
            out.write_all(&w[i].to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a cloud without normalizing it.
pub fn read_cloud(path: &Path, format: Format) -> Result<PointCloud> {
    let file = fs::File::open(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    match format {
        Format::Csv => read_csv(file),
        Format::Binary => read_binary(file),
    }
}

pub fn write_cloud(cloud: &PointCloud, path: &Path, format: Format) -> Result<()> {
    let file = fs::File::create(path)?;
    match format {
        Format::Csv => write_csv(cloud, file),
        Format::Binary => write_binary(cloud, file),
    }
}

/// Reads a cloud and normalizes it into the closed unit ball.
pub fn ingest(path: &Path, format: Format) -> Result<(PointCloud, Normalization)> {
    Ok(read_cloud(path, format)?.normalized())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(weighted: bool) -> PointCloud {
        let coords: Vec<f64> = (0..60).map(|i| ((i * 37 % 17) as f64 / 7.0).sin() * 3.1 + 0.1 * i as f64).collect();
        let weights = weighted.then(|| (0..20).map(|i| 0.5 + i as f64 / 40.0).collect());
        PointCloud::new(3, 2, coords, weights).unwrap()
    }

    #[test]
    fn weighted_csv_with_two_coordinates() {
        let text = "# n=2 d=1 weighted=1\n0.0,0.0,1.0\n0.5,0.0,2.0\n1.0,0.0,1.0\n";
        let cloud = read_csv(text.as_bytes()).unwrap();
        assert_eq!((cloud.n(), cloud.d(), cloud.len()), (2, 1, 3));
        assert_eq!(cloud.weights().unwrap(), &[1.0, 2.0, 1.0]);
    }

    #[test]
    fn nan_row_is_rejected_with_its_number() {
        let text = "# n=2 d=1 weighted=0\n0,0\n1,NaN\n";
        let err = read_csv(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("row 3"), "{err}");
        let text = "# n=2 d=1 weighted=0\n0,0\n1,0\ninf,2\n";
        assert!(read_csv(text.as_bytes()).unwrap_err().to_string().contains("row 4"));
    }

    #[test]
    fn malformed_inputs_are_input_errors() {
        for text in ["", "0,0\n", "# n=2 d=3 weighted=0\n0,0\n", "# n=2 d=1 weighted=0\n", "# n=2 d=1 weighted=0\n1,2,3\n"] {
            assert!(matches!(read_csv(text.as_bytes()), Err(Error::Input(_))), "{text:?}");
        }
        assert!(matches!(read_binary(&b"RFPX\0\0\0\0"[..]), Err(Error::Input(_))));
    }

    #[test]
    fn round_trips_are_exact() {
        for weighted in [false, true] {
            let cloud = sample(weighted);
            for format in [Format::Csv, Format::Binary] {
                let mut buf = Vec::new();
                match format {
                    Format::Csv => write_csv(&cloud, &mut buf).unwrap(),
                    Format::Binary => write_binary(&cloud, &mut buf).unwrap(),
                }
                let back = match format {
                    Format::Csv => read_csv(&buf[..]).unwrap(),
                    Format::Binary => read_binary(&buf[..]).unwrap(),
                };
                assert_eq!(back.coords(), cloud.coords());
                assert_eq!(back.weights(), cloud.weights());
                assert_eq!((back.n(), back.d()), (3, 2));
            }
        }
    }

    #[test]
    fn ingest_normalizes_and_records_the_transform() {
        let dir = tempfile::tempdir().unwrap();
        let cloud = sample(false);
        for (name, format) in [("c.csv", Format::Csv), ("c.bin", Format::Binary)] {
            let path = dir.path().join(name);
            write_cloud(&cloud, &path, format).unwrap();
            assert_eq!(Format::from_path(&path), format);
            let (normalized, map) = ingest(&path, format).unwrap();
            for i in 0..cloud.len() {
                let y = normalized.point(i);
                assert!(y.iter().map(|v| v * v).sum::<f64>() <= 1.0 + 1e-15);
                let x = map.invert(y);
                for (a, b) in x.iter().zip(cloud.point(i)) {
                    assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0));
                }
            }
        }
    }
}
