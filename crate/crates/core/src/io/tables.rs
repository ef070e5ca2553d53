use std::path::Path;

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};
use crate::keypoint::{Ellipse, Keypoint};
use crate::matches::{Match, MatchSet};

use super::write_atomic;

pub const DISTANCE_MAGIC: &[u8; 4] = b"CTXD";
pub const DISTANCE_VERSION: u32 = 1;

fn reader(path: &Path, header: bool) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, format!("{other:?}")),
    }
}

fn field<T: std::str::FromStr>(path: &Path, line: u64, rec: &csv::StringRecord, k: usize) -> Result<Option<T>> {
    match rec.get(k) {
        None | Some("") => Ok(None),
        Some(s) => s
            .parse()
            .map(Some)
            .map_err(|_| Error::parse(path, format!("line {line}: bad value '{s}' in column {}", k + 1))),
    }
}

fn to_bytes(path: &Path, w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner()
        .map_err(|e| Error::invalid(format!("cannot write {}: {e}", path.display())))
}

/// Reads `x,y[,a,b,c[,scale]]` rows after a header line.
pub fn read_keypoints(path: &Path) -> Result<Vec<Keypoint>> {
    let mut out = Vec::new();
    for rec in reader(path, true)?.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::parse(path, format!("line {line}: missing {name}")))
        };
        let x = need(field(path, line, &rec, 0)?, "x")?;
        let y = need(field(path, line, &rec, 1)?, "y")?;
        let shape: [Option<f64>; 3] = [
            field(path, line, &rec, 2)?,
            field(path, line, &rec, 3)?,
            field(path, line, &rec, 4)?,
        ];
        let ellipse = match shape {
            [Some(a), Some(b), Some(c)] => Some(
                Ellipse::new(a, b, c).map_err(|e| Error::parse(path, format!("line {line}: {e}")))?,
            ),
            [None, None, None] => None,
            _ => return Err(Error::parse(path, format!("line {line}: incomplete ellipse"))),
        };
        let kp = Keypoint {
            x,
            y,
            ellipse,
            scale: field(path, line, &rec, 5)?,
        };
        kp.validate().map_err(|e| Error::parse(path, format!("line {line}: {e}")))?;
        out.push(kp);
    }
    Ok(out)
}

pub fn write_keypoints(path: &Path, keypoints: &[Keypoint]) -> Result<()> {
    let with_shape = keypoints.iter().any(|k| k.ellipse.is_some());
    let with_scale = keypoints.iter().any(|k| k.scale.is_some());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["x", "y"];
    if with_shape || with_scale {
        header.extend(["a", "b", "c"]);
    }
    if with_scale {
        header.push("scale");
    }
    let fail = |e: csv::Error| Error::invalid(format!("cannot write {}: {e}", path.display()));
    w.write_record(&header).map_err(fail)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    for k in keypoints {
        let mut row = vec![k.x.to_string(), k.y.to_string()];
        if with_shape || with_scale {
            row.push(opt(k.ellipse.map(|e| e.a)));
            row.push(opt(k.ellipse.map(|e| e.b)));
            row.push(opt(k.ellipse.map(|e| e.c)));
        }
        if with_scale {
            row.push(opt(k.scale));
        }
        w.write_record(&row).map_err(fail)?;
    }
    write_atomic(path, &to_bytes(path, w)?)
}

/// Reads `i,j,score` rows after a header line.
pub fn read_matches(path: &Path) -> Result<MatchSet> {
    let mut out = MatchSet::new();
    for rec in reader(path, true)?.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let i: Option<usize> = field(path, line, &rec, 0)?;
        let j: Option<usize> = field(path, line, &rec, 1)?;
        let score: Option<f64> = field(path, line, &rec, 2)?;
        match (i, j, score) {
            (Some(i), Some(j), Some(s)) if s.is_finite() => out.push(Match::new(i, j, s)),
            _ => return Err(Error::parse(path, format!("line {line}: expected i,j,score"))),
        }
    }
    Ok(out)
}

pub fn write_matches(path: &Path, matches: &MatchSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::invalid(format!("cannot write {}: {e}", path.display()));
    w.write_record(["i", "j", "score"]).map_err(fail)?;
    for m in matches {
        w.write_record([m.i.to_string(), m.j.to_string(), m.score.to_string()])
            .map_err(fail)?;
    }
    write_atomic(path, &to_bytes(path, w)?)
}

/// Reads a distance matrix, binary if the file starts with the magic bytes
/// and CSV (one row per line, no header) otherwise.
pub fn read_distances(path: &Path) -> Result<DistanceMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(DISTANCE_MAGIC) {
        return parse_binary(path, &bytes);
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(path, format!("line {line}: bad distance '{s}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    DistanceMatrix::from_rows(&rows).map_err(|e| Error::parse(path, e.to_string()))
}

fn parse_binary(path: &Path, bytes: &[u8]) -> Result<DistanceMatrix> {
    let bad = |msg: &str| Error::parse(path, msg.to_string());
    if bytes.len() < 24 {
        return Err(bad("truncated header"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != DISTANCE_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let m = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes"));
    let count = n
        .checked_mul(m)
        .and_then(|c| usize::try_from(c).ok())
        .ok_or_else(|| bad("matrix too large"))?;
    let body = &bytes[24..];
    if Some(body.len()) != count.checked_mul(8) {
        return Err(bad(&format!("expected {count} values, found {} bytes", body.len())));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    DistanceMatrix::new(n as usize, m as usize, values).map_err(|e| Error::parse(path, e.to_string()))
}

pub fn write_distances_binary(path: &Path, d: &DistanceMatrix) -> Result<()> {
    let mut bytes = Vec::with_capacity(24 + 8 * d.values().len());
    bytes.extend_from_slice(DISTANCE_MAGIC);
    bytes.extend_from_slice(&DISTANCE_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(d.rows() as u64).to_le_bytes());
    bytes.extend_from_slice(&(d.cols() as u64).to_le_bytes());
    for v in d.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &bytes)
}

pub fn write_distances_csv(path: &Path, d: &DistanceMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::invalid(format!("cannot write {}: {e}", path.display()));
    for i in 0..d.rows() {
        w.write_record(d.row(i).iter().map(|v| v.to_string())).map_err(fail)?;
    }
    write_atomic(path, &to_bytes(path, w)?)
}
