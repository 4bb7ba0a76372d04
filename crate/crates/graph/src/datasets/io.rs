//! Binary container ("GDS1") and JSON-lines mirror for graph collections.
//!
//! Binary layout, little-endian: magic `GDS1`, `u32` version, `u64` graph
//! count, then per graph `u32 n`, `u32 m` and `m` pairs of `u16` node ids in
//! sorted edge order.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Family;
use crate::graph::Graph;

pub const GDS_MAGIC: &[u8; 4] = b"GDS1";
pub const GDS_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed header: expected {HEADER_LEN} bytes, found {0}")]
    Header(usize),
    #[error("bad magic: expected GDS1")]
    BadMagic,
    #[error("unsupported version {found} (expected {GDS_VERSION})")]
    Version { found: u32 },
    #[error("truncated payload at graph {graph}")]
    Truncated { graph: u64 },
    #[error("trailing bytes after the last graph")]
    TrailingBytes,
    #[error("invalid graph {graph}: {reason}")]
    InvalidGraph { graph: u64, reason: String },
    #[error("graph with {0} nodes does not fit 16-bit node ids")]
    TooLarge(usize),
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),
    #[error("gave up generating a {family:?} graph after {attempts} rejections")]
    RejectionLimit { family: Family, attempts: usize },
    #[error("malformed JSON line {line}: {reason}")]
    Json { line: usize, reason: String },
}

pub fn write_gds(graphs: &[Graph]) -> Result<Vec<u8>, DatasetError> {
    let mut out = Vec::with_capacity(HEADER_LEN + graphs.iter().map(|g| 8 + 4 * g.num_edges()).sum::<usize>());
    out.extend_from_slice(GDS_MAGIC);
    out.extend_from_slice(&GDS_VERSION.to_le_bytes());
    out.extend_from_slice(&(graphs.len() as u64).to_le_bytes());
    for g in graphs {
        if g.n() > u16::MAX as usize + 1 {
            return Err(DatasetError::TooLarge(g.n()));
        }
        out.extend_from_slice(&(g.n() as u32).to_le_bytes());
        out.extend_from_slice(&(g.num_edges() as u32).to_le_bytes());
        for &(a, b) in g.edges() {
            out.extend_from_slice(&(a as u16).to_le_bytes());
            out.extend_from_slice(&(b as u16).to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Option<[u8; N]> {
        let chunk = self.bytes.get(self.pos..self.pos + N)?;
        self.pos += N;
        chunk.try_into().ok()
    }
}

pub fn read_gds(bytes: &[u8]) -> Result<Vec<Graph>, DatasetError> {
    if bytes.len() < HEADER_LEN {
        return Err(DatasetError::Header(bytes.len()));
    }
    if &bytes[..4] != GDS_MAGIC {
        return Err(DatasetError::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != GDS_VERSION {
        return Err(DatasetError::Version { found: version });
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let mut cur = Cursor { bytes, pos: HEADER_LEN };
    let mut graphs = Vec::new();
    for gi in 0..count {
        let truncated = DatasetError::Truncated { graph: gi };
        let n = cur.take::<4>().map(u32::from_le_bytes).ok_or(truncated)? as usize;
        let m = cur.take::<4>().map(u32::from_le_bytes).ok_or(DatasetError::Truncated { graph: gi })? as usize;
        if bytes.len() - cur.pos < 4 * m {
            return Err(DatasetError::Truncated { graph: gi });
        }
        let mut edges = Vec::with_capacity(m);
        for _ in 0..m {
            let a = u16::from_le_bytes(cur.take::<2>().expect("length checked")) as usize;
            let b = u16::from_le_bytes(cur.take::<2>().expect("length checked")) as usize;
            edges.push((a, b));
        }
        let g = Graph::new(n, edges).map_err(|e| DatasetError::InvalidGraph { graph: gi, reason: e.to_string() })?;
        graphs.push(g);
    }
    if cur.pos != bytes.len() {
        return Err(DatasetError::TrailingBytes);
    }
    Ok(graphs)
}

pub fn save_gds(path: &Path, graphs: &[Graph]) -> Result<(), DatasetError> {
    fs::write(path, write_gds(graphs)?)?;
    Ok(())
}

pub fn load_gds(path: &Path) -> Result<Vec<Graph>, DatasetError> {
    read_gds(&fs::read(path)?)
}

#[derive(Serialize, Deserialize)]
struct JsonGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

pub fn save_jsonl(path: &Path, graphs: &[Graph]) -> Result<(), DatasetError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for g in graphs {
        let line = JsonGraph { n: g.n(), edges: g.edges().to_vec() };
        serde_json::to_writer(&mut w, &line).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_jsonl(path: &Path) -> Result<Vec<Graph>, DatasetError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut graphs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: JsonGraph =
            serde_json::from_str(&line).map_err(|e| DatasetError::Json { line: i + 1, reason: e.to_string() })?;
        let g = Graph::new(parsed.n, parsed.edges)
            .map_err(|e| DatasetError::Json { line: i + 1, reason: e.to_string() })?;
        graphs.push(g);
    }
    Ok(graphs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_bytes() {
        let graphs = vec![Graph::complete(4), Graph::empty(2), Graph::path(7)];
        let bytes = write_gds(&graphs).unwrap();
        assert_eq!(read_gds(&bytes).unwrap(), graphs);
        assert_eq!(write_gds(&read_gds(&bytes).unwrap()).unwrap(), bytes);
    }

    #[test]
    fn distinct_errors() {
        assert!(matches!(read_gds(&[]), Err(DatasetError::Header(0))));
        let mut bytes = write_gds(&[Graph::path(3)]).unwrap();
        let mut flipped = bytes.clone();
        flipped[0] ^= 0xFF;
        let err = read_gds(&flipped).unwrap_err();
        assert!(matches!(err, DatasetError::BadMagic));
        assert!(err.to_string().contains("bad magic"));
        let mut versioned = bytes.clone();
        versioned[4] = 9;
        assert!(matches!(read_gds(&versioned), Err(DatasetError::Version { found: 9 })));
        bytes.pop();
        assert!(matches!(read_gds(&bytes), Err(DatasetError::Truncated { graph: 0 })));
    }
}
