//! Thresholded cosine-similarity neighborhoods.
//!
//! Every example is linked to every other example whose cosine similarity
//! reaches the threshold `tau`, with the similarity kept as the edge weight.
//! Each example is also its own neighbor with weight 1.
//!
//! The build is exact and all-pairs. Rows are L2-normalized once, then each
//! row block is compared against the rows after it; the lower triangle is
//! filled by mirroring, so `weight(i, j)` and `weight(j, i)` are the same
//! float. The dot product uses a fixed accumulation order, which makes the
//! result independent of how many threads ran the build.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::dataset::Matrix;
use crate::error::{Error, Result};

pub const GRAPH_MAGIC: [u8; 4] = *b"NBGR";
pub const GRAPH_VERSION: u32 = 1;

pub const DEFAULT_BLOCK_SIZE: usize = 1024;
pub const DEFAULT_EDGE_CAP: u64 = 2_000_000_000;

/// Rows sampled when predicting the edge count ahead of a build.
const EDGE_PROBE_ROWS: usize = 64;

/// Sparse symmetric neighbor structure in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    tau: f64,
    offsets: Vec<usize>,
    indices: Vec<u32>,
    weights: Vec<f32>,
}

impl NeighborGraph {
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Always true: every example is its own neighbor with weight 1.
    pub fn self_included(&self) -> bool {
        true
    }

    /// Directed edge count, self edges included.
    pub fn num_edges(&self) -> usize {
        self.indices.len()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn neighbor_indices(&self, i: usize) -> &[u32] {
        &self.indices[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn neighbor_weights(&self, i: usize) -> &[f32] {
        &self.weights[self.offsets[i]..self.offsets[i + 1]]
    }

    /// `(neighbor, weight)` pairs in ascending neighbor order.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f32)> + '_ {
        self.neighbor_indices(i)
            .iter()
            .zip(self.neighbor_weights(i))
            .map(|(&j, &w)| (j as usize, w))
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f32> {
        let idx = self.neighbor_indices(i);
        idx.binary_search(&(j as u32))
            .ok()
            .map(|p| self.neighbor_weights(i)[p])
    }

    /// Builds a graph from per-row neighbor lists; rows must already be
    /// sorted by index, symmetric, and contain their self edge.
    pub fn from_adjacency(tau: f64, rows: Vec<Vec<(u32, f32)>>) -> Result<Self> {
        validate_tau(tau)?;
        let m = rows.len();
        let mut offsets = Vec::with_capacity(m + 1);
        offsets.push(0);
        let total: usize = rows.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        for (i, row) in rows.into_iter().enumerate() {
            let mut prev = None;
            let mut has_self = false;
            for (j, w) in row {
                if j as usize >= m {
                    return Err(Error::malformed("graph", format!("row {i}: neighbor {j} out of range")));
                }
                if prev.is_some_and(|p| p >= j) {
                    return Err(Error::malformed("graph", format!("row {i}: neighbors not strictly ascending")));
                }
                if !w.is_finite() {
                    return Err(Error::NonFinite { context: "graph".into(), row: i, col: j as usize });
                }
                has_self |= j as usize == i;
                prev = Some(j);
                indices.push(j);
                weights.push(w);
            }
            if !has_self {
                return Err(Error::malformed("graph", format!("row {i}: missing self edge")));
            }
            offsets.push(indices.len());
        }
        Ok(Self {
            tau,
            offsets,
            indices,
            weights,
        })
    }
}

fn validate_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau > -1.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("tau {tau} must lie in (-1, 1]")))
    }
}

/// Dot product with a fixed summation order: eight interleaved partial sums
/// folded left to right, then the tail.
#[inline]
fn dot(u: &[f32], v: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let cu = u.chunks_exact(8);
    let cv = v.chunks_exact(8);
    let (tu, tv) = (cu.remainder(), cv.remainder());
    for (a, b) in cu.zip(cv) {
        for k in 0..8 {
            acc[k] += a[k] * b[k];
        }
    }
    let mut s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (a, b) in tu.iter().zip(tv) {
        s += a * b;
    }
    s
}

fn norm(u: &[f32]) -> f64 {
    u.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
}

/// Cosine of the angle between two vectors, clamped to `[-1, 1]`.
pub fn cosine_similarity(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::InvalidArgument(format!(
            "vector lengths differ ({} vs {})",
            u.len(),
            v.len()
        )));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 {
        return Err(Error::ZeroNorm { row: 0 });
    }
    if nv == 0.0 {
        return Err(Error::ZeroNorm { row: 1 });
    }
    let d: f64 = u.iter().zip(v).map(|(&a, &b)| a as f64 * b as f64).sum();
    Ok((d / (nu * nv)).clamp(-1.0, 1.0))
}

/// Unit-norm copy of the embedding rows.
pub fn normalize_rows(embeddings: &Matrix) -> Result<Matrix> {
    let d = embeddings.cols();
    let mut data = Vec::with_capacity(embeddings.as_slice().len());
    for (row, r) in embeddings.iter_rows().enumerate() {
        let n = norm(r);
        if n == 0.0 {
            return Err(Error::ZeroNorm { row });
        }
        data.extend(r.iter().map(|&x| (x as f64 / n) as f32));
    }
    Matrix::new(embeddings.rows(), d, data)
}

/// Similarity of two unit rows as stored in the graph.
///
/// Bitwise-equal rows get exactly 1; distinct rows are kept strictly below 1
/// so a threshold of 1 links duplicates only.
#[inline]
fn pair_similarity(u: &[f32], v: &[f32]) -> f32 {
    let s = dot(u, v);
    if s >= 0.999 {
        if u == v {
            return 1.0;
        }
        return s.min(1.0f32.next_down());
    }
    s.max(-1.0)
}

#[derive(Debug, Clone, Copy)]
pub struct GraphBuilder {
    pub block_size: usize,
    pub edge_cap: u64,
}

impl Default for GraphBuilder {
    fn default() -> Self {
        Self {
            block_size: DEFAULT_BLOCK_SIZE,
            edge_cap: DEFAULT_EDGE_CAP,
        }
    }
}

impl GraphBuilder {
    pub fn block_size(mut self, rows: usize) -> Self {
        self.block_size = rows.max(1);
        self
    }

    pub fn edge_cap(mut self, cap: u64) -> Self {
        self.edge_cap = cap;
        self
    }

    /// Estimated directed edge count (self edges included), from a fixed
    /// evenly spaced sample of rows.
    pub fn predict_edges(&self, unit: &Matrix, tau: f64) -> u64 {
        let m = unit.rows();
        if m == 0 {
            return 0;
        }
        let probes = m.min(EDGE_PROBE_ROWS);
        let counted: u64 = (0..probes)
            .into_par_iter()
            .map(|k| {
                let i = k * m / probes;
                let ri = unit.row(i);
                unit.iter_rows()
                    .filter(|rj| pair_similarity(ri, rj) as f64 >= tau)
                    .count() as u64
            })
            .sum();
        (counted as f64 / probes as f64 * m as f64).ceil() as u64
    }

    pub fn build(&self, embeddings: &Matrix, tau: f64) -> Result<NeighborGraph> {
        validate_tau(tau)?;
        let unit = normalize_rows(embeddings)?;
        let m = unit.rows();
        if m > u32::MAX as usize {
            return Err(Error::Guard(format!("{m} rows exceed the 32-bit index range")));
        }
        let predicted = self.predict_edges(&unit, tau);
        if predicted > self.edge_cap {
            return Err(Error::Guard(format!(
                "predicted {predicted} edges at tau={tau} exceeds the cap of {}; raise tau",
                self.edge_cap
            )));
        }

        let block = self.block_size.max(1);
        let starts: Vec<usize> = (0..m).step_by(block).collect();
        // upper[i] holds (j, w) for j > i
        let upper: Vec<Vec<(u32, f32)>> = starts
            .par_iter()
            .flat_map_iter(|&lo| {
                let hi = (lo + block).min(m);
                let mut rows: Vec<Vec<(u32, f32)>> = vec![Vec::new(); hi - lo];
                let mut col_lo = lo;
                while col_lo < m {
                    let col_hi = (col_lo + block).min(m);
                    for i in lo..hi {
                        let ri = unit.row(i);
                        let out = &mut rows[i - lo];
                        for j in col_lo.max(i + 1)..col_hi {
                            let w = pair_similarity(ri, unit.row(j));
                            if w as f64 >= tau {
                                out.push((j as u32, w));
                            }
                        }
                    }
                    col_lo = col_hi;
                }
                rows
            })
            .collect();

        let total: u64 = m as u64 + 2 * upper.iter().map(|r| r.len() as u64).sum::<u64>();
        if total > self.edge_cap {
            return Err(Error::Guard(format!(
                "graph at tau={tau} has {total} edges, over the cap of {}; raise tau",
                self.edge_cap
            )));
        }

        let mut lower: Vec<Vec<(u32, f32)>> = vec![Vec::new(); m];
        for (i, row) in upper.iter().enumerate() {
            for &(j, w) in row {
                lower[j as usize].push((i as u32, w));
            }
        }
        let mut offsets = Vec::with_capacity(m + 1);
        let mut indices = Vec::with_capacity(total as usize);
        let mut weights = Vec::with_capacity(total as usize);
        offsets.push(0);
        for (i, (lo, up)) in lower.into_iter().zip(upper).enumerate() {
            for (j, w) in lo.into_iter().chain(std::iter::once((i as u32, 1.0))).chain(up) {
                indices.push(j);
                weights.push(w);
            }
            offsets.push(indices.len());
        }
        Ok(NeighborGraph {
            tau,
            offsets,
            indices,
            weights,
        })
    }
}

/// Exact thresholded graph with default block size and edge cap.
pub fn build_graph(embeddings: &Matrix, tau: f64) -> Result<NeighborGraph> {
    GraphBuilder::default().build(embeddings, tau)
}

pub fn write_graph<W: Write>(mut writer: W, graph: &NeighborGraph) -> io::Result<()> {
    writer.write_all(&GRAPH_MAGIC)?;
    writer.write_all(&GRAPH_VERSION.to_le_bytes())?;
    writer.write_all(&(graph.len() as u64).to_le_bytes())?;
    writer.write_all(&graph.tau.to_le_bytes())?;
    for i in 0..graph.len() {
        writer.write_all(&(graph.degree(i) as u32).to_le_bytes())?;
        for (j, w) in graph.neighbors(i) {
            writer.write_all(&(j as u32).to_le_bytes())?;
            writer.write_all(&w.to_le_bytes())?;
        }
    }
    writer.flush()
}

pub fn read_graph<R: Read>(mut reader: R, context: &str) -> Result<NeighborGraph> {
    let short = |_| Error::malformed(context, "unexpected end of file");
    let mut header = [0u8; 24];
    reader.read_exact(&mut header).map_err(short)?;
    let magic: [u8; 4] = header[0..4].try_into().unwrap();
    if magic != GRAPH_MAGIC {
        return Err(Error::BadMagic {
            context: context.into(),
            expected: GRAPH_MAGIC,
            found: magic,
        });
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != GRAPH_VERSION {
        return Err(Error::BadVersion {
            context: context.into(),
            version,
        });
    }
    let m = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let tau = f64::from_le_bytes(header[16..24].try_into().unwrap());
    let mut rows = Vec::with_capacity(m.min(1 << 24));
    let mut word = [0u8; 4];
    for _ in 0..m {
        reader.read_exact(&mut word).map_err(short)?;
        let count = u32::from_le_bytes(word) as usize;
        let mut pairs = vec![0u8; count * 8];
        reader.read_exact(&mut pairs).map_err(short)?;
        rows.push(
            pairs
                .chunks_exact(8)
                .map(|p| {
                    (
                        u32::from_le_bytes(p[0..4].try_into().unwrap()),
                        f32::from_le_bytes(p[4..8].try_into().unwrap()),
                    )
                })
                .collect(),
        );
    }
    let mut rest = [0u8; 1];
    if reader.read(&mut rest).map_err(short)? != 0 {
        return Err(Error::malformed(context, "trailing bytes after last row"));
    }
    NeighborGraph::from_adjacency(tau, rows)
}

pub fn save_graph(path: &Path, graph: &NeighborGraph) -> Result<()> {
    let to_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(to_err)?;
    write_graph(io::BufWriter::new(file), graph).map_err(to_err)
}

pub fn load_graph(path: &Path) -> Result<NeighborGraph> {
    let file = fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_graph(io::BufReader::new(file), &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f32]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let s = cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-8);
        assert!(matches!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroNorm { .. })
        ));
    }

    #[test]
    fn tiny_instance_neighbors() {
        let g = build_graph(&mat(&[&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]), 0.5).unwrap();
        assert_eq!(g.neighbors(0).collect::<Vec<_>>(), vec![(0, 1.0), (1, 1.0)]);
        assert_eq!(g.neighbors(1).collect::<Vec<_>>(), vec![(0, 1.0), (1, 1.0)]);
        assert_eq!(g.neighbors(2).collect::<Vec<_>>(), vec![(2, 1.0)]);
    }

    #[test]
    fn tau_one_keeps_duplicates_only() {
        let g = build_graph(
            &mat(&[&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0001], &[3.0, -1.0]]),
            1.0,
        )
        .unwrap();
        assert_eq!(g.neighbor_indices(0), &[0, 1]);
        assert_eq!(g.neighbor_indices(2), &[2]);
        assert_eq!(g.neighbor_indices(3), &[3]);
    }

    #[test]
    fn single_row() {
        let g = build_graph(&mat(&[&[0.3, 0.4]]), 0.9).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.neighbors(0).collect::<Vec<_>>(), vec![(0, 1.0)]);
    }

    #[test]
    fn zero_norm_row_is_reported() {
        let err = build_graph(&mat(&[&[1.0, 0.0], &[0.0, 0.0]]), 0.5).unwrap_err();
        assert!(matches!(err, Error::ZeroNorm { row: 1 }));
    }

    #[test]
    fn tau_out_of_range() {
        let e = mat(&[&[1.0, 0.0]]);
        assert!(build_graph(&e, -1.0).is_err());
        assert!(build_graph(&e, 1.5).is_err());
        assert!(build_graph(&e, f64::NAN).is_err());
    }

    #[test]
    fn edge_cap_guard() {
        let e = mat(&[&[1.0, 0.0], &[1.0, 0.1], &[1.0, 0.2]]);
        let err = GraphBuilder::default().edge_cap(5).build(&e, 0.0).unwrap_err();
        assert!(matches!(err, Error::Guard(_)));
        assert!(GraphBuilder::default().edge_cap(9).build(&e, 0.0).is_ok());
    }

    #[test]
    fn block_size_does_not_change_graph() {
        let rows: Vec<Vec<f32>> = (0..37)
            .map(|i| vec![(i as f32 * 0.37).sin(), (i as f32 * 0.11).cos(), 0.2])
            .collect();
        let e = Matrix::from_rows(&rows).unwrap();
        let a = GraphBuilder::default().block_size(1).build(&e, 0.6).unwrap();
        let b = GraphBuilder::default().block_size(5).build(&e, 0.6).unwrap();
        let c = GraphBuilder::default().build(&e, 0.6).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn cache_round_trip_and_corruption() {
        let g = build_graph(&mat(&[&[1.0, 0.0], &[0.9, 0.1], &[0.0, 1.0]]), 0.5).unwrap();
        let mut buf = Vec::new();
        write_graph(&mut buf, &g).unwrap();
        assert_eq!(&buf[..4], b"NBGR");
        assert_eq!(read_graph(&buf[..], "t").unwrap(), g);
        assert!(read_graph(&buf[..buf.len() - 2], "t").is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_graph(&extra[..], "t").is_err());
    }
}
