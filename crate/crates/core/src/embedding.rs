//! Resistive embeddings: exact (`m`-dimensional) and JL-sketched
//! (`k`-dimensional), their stationary-weighted mean, and random rotations.
//!
//! The exact embedding of node `v` is `r_v = C^{1/2} B L† 1_v`, so that
//! `‖r_u − r_v‖² = Res(u, v)`. The sketch replaces it by `Π r_v / √k` with a
//! Gaussian `Π`. Row `i` of `Π` is regenerated on demand from
//! `(seed, i)`, so the `k × m` matrix is never stored and the sketch is
//! independent of the order in which rows are processed.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binfmt;
use crate::error::{AffinityError, Result};
use crate::graph::{Graph, StationaryDistribution};
use crate::lapsolve::{dense_pseudoinverse_capped, project_in_place, LaplacianSolver, SolverConfig};

/// Default JL constant `c` in `k = ⌈c·ln(mn)/ε²⌉`.
pub const DEFAULT_JL_CONSTANT: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Exact,
    Sketched,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResistiveEmbedding {
    num_nodes: usize,
    dim: usize,
    /// Row-major `num_nodes × dim`.
    data: Vec<f64>,
    pub kind: EmbeddingKind,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub jl_constant: Option<f64>,
    /// `Σ_u π_u r_u`.
    pub mean: Vec<f64>,
}

impl ResistiveEmbedding {
    /// Wraps raw vectors; the mean is computed from `pi`.
    pub fn from_parts(
        num_nodes: usize,
        dim: usize,
        data: Vec<f64>,
        kind: EmbeddingKind,
        pi: &StationaryDistribution,
    ) -> Result<Self> {
        if data.len() != num_nodes * dim {
            return Err(AffinityError::DimensionMismatch { expected: num_nodes * dim, got: data.len() });
        }
        let mut e = ResistiveEmbedding {
            num_nodes,
            dim,
            data,
            kind,
            epsilon: None,
            seed: None,
            jl_constant: None,
            mean: Vec::new(),
        };
        e.mean = embedding_mean(&e, pi)?;
        Ok(e)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector(&self, u: usize) -> &[f64] {
        &self.data[u * self.dim..(u + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `‖e[u] − e[v]‖²`.
    pub fn squared_distance(&self, u: usize, v: usize) -> f64 {
        self.vector(u).iter().zip(self.vector(v)).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// `2M·⟨e[v] − e[u], e[v] − mean⟩`, the hitting time `u → v` when the
    /// embedding is exact.
    pub fn hitting_time_form(&self, total_weight: f64, u: usize, v: usize) -> f64 {
        if u == v {
            return 0.0;
        }
        let (ru, rv) = (self.vector(u), self.vector(v));
        let ip: f64 = (0..self.dim).map(|i| (rv[i] - ru[i]) * (rv[i] - self.mean[i])).sum();
        2.0 * total_weight * ip
    }
}

/// Exact embedding from the dense pseudoinverse. Vector coordinates follow
/// the graph's edge order.
pub fn exact_embedding(g: &Graph, cfg: &SolverConfig) -> Result<ResistiveEmbedding> {
    let pinv = dense_pseudoinverse_capped(g, cfg.oracle_cap)?;
    let n = g.num_nodes();
    let m = g.num_edges();
    let mut data = vec![0.0; n * m];
    for (idx, e) in g.edges().iter().enumerate() {
        let s = e.w.sqrt();
        for v in 0..n {
            data[v * m + idx] = s * (pinv.entry(e.u, v) - pinv.entry(e.v, v));
        }
    }
    ResistiveEmbedding::from_parts(n, m, data, EmbeddingKind::Exact, &g.stationary_distribution())
}

/// Sketch dimension `k = ⌈c·ln(m·n)/ε²⌉`, at least 1.
///
/// `m·n` is clamped below at 2 so that edgeless or single-node graphs still
/// get a positive dimension.
pub fn jl_dimension(n: usize, m: usize, epsilon: f64, c: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(AffinityError::InvalidConfig(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(AffinityError::InvalidConfig(format!("JL constant must be positive, got {c}")));
    }
    let mn = (m as f64 * n as f64).max(2.0);
    Ok(((c * mn.ln() / (epsilon * epsilon)).ceil() as usize).max(1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SketchParams {
    pub epsilon: f64,
    pub seed: u64,
    pub jl_constant: f64,
}

impl SketchParams {
    pub fn new(epsilon: f64, seed: u64) -> Self {
        SketchParams { epsilon, seed, jl_constant: DEFAULT_JL_CONSTANT }
    }
}

/// Work done by one sketch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SketchStats {
    pub dim: usize,
    pub solves: usize,
    pub total_iterations: usize,
    pub dense: bool,
}

/// Generator for row `row` of `Π`; depends only on `(seed, row)`.
fn row_rng(seed: u64, row: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(row as u64);
    rng
}

/// `z = Bᵀ C^{1/2} πᵢ / √k` for row `i` of `Π`.
fn sketch_rhs(g: &Graph, seed: u64, row: usize, scale: f64, z: &mut [f64]) {
    z.iter_mut().for_each(|x| *x = 0.0);
    let mut rng = row_rng(seed, row);
    for e in g.edges() {
        let gauss: f64 = rng.sample(StandardNormal);
        let s = scale * e.w.sqrt() * gauss;
        z[e.u] += s;
        z[e.v] -= s;
    }
}

// rows per batch: bounds the transient memory at BATCH·n
const BATCH: usize = 64;

pub fn sketched_embedding(g: &Graph, params: &SketchParams, cfg: &SolverConfig) -> Result<ResistiveEmbedding> {
    sketched_embedding_with_stats(g, params, cfg).map(|(e, _)| e)
}

/// Sketched embedding `r̂_v = Π C^{1/2} B L† 1_v / √k`, computed with `k`
/// Laplacian solves `L y_i = Bᵀ C^{1/2} πᵢ / √k`; node `v`'s vector is
/// `(y_1[v], …, y_k[v])`.
pub fn sketched_embedding_with_stats(
    g: &Graph,
    params: &SketchParams,
    cfg: &SolverConfig,
) -> Result<(ResistiveEmbedding, SketchStats)> {
    let n = g.num_nodes();
    let k = jl_dimension(n, g.num_edges(), params.epsilon, params.jl_constant)?;
    let cfg = cfg.tightened(1e-8_f64.min(params.epsilon / 10.0));
    let solver = LaplacianSolver::new(g, cfg)?;
    let scale = 1.0 / (k as f64).sqrt();
    let seed = params.seed;
    let mut data = vec![0.0; n * k];
    let mut stats = SketchStats { dim: k, solves: k, total_iterations: 0, dense: solver.is_dense() };

    if let Some(pinv) = solver.pseudoinverse() {
        // dense path: Y = L† Z, one block of columns at a time
        let block = 512.min(k);
        let mut z = vec![0.0; n];
        for start in (0..k).step_by(block) {
            let cols = block.min(k - start);
            let mut zmat = DMatrix::<f64>::zeros(n, cols);
            for c in 0..cols {
                sketch_rhs(g, seed, start + c, scale, &mut z);
                zmat.column_mut(c).copy_from_slice(&z);
            }
            let y = &pinv.matrix * zmat;
            for c in 0..cols {
                let mut col: Vec<f64> = y.column(c).iter().copied().collect();
                project_in_place(g, &mut col);
                for v in 0..n {
                    data[v * k + start + c] = col[v];
                }
            }
        }
    } else {
        for start in (0..k).step_by(BATCH) {
            let end = (start + BATCH).min(k);
            let solved: Vec<(usize, Vec<f64>, usize)> = (start..end)
                .into_par_iter()
                .map(|row| {
                    let mut z = vec![0.0; n];
                    sketch_rhs(g, seed, row, scale, &mut z);
                    solver
                        .solve_counted(&z)
                        .map(|o| (row, o.x, o.iterations))
                        .map_err(|e| AffinityError::SketchRow { row, source: Box::new(e) })
                })
                .collect::<Result<_>>()?;
            for (row, y, iters) in solved {
                stats.total_iterations += iters;
                for v in 0..n {
                    data[v * k + row] = y[v];
                }
            }
        }
    }

    let mut e = ResistiveEmbedding::from_parts(n, k, data, EmbeddingKind::Sketched, &g.stationary_distribution())?;
    e.epsilon = Some(params.epsilon);
    e.seed = Some(params.seed);
    e.jl_constant = Some(params.jl_constant);
    Ok((e, stats))
}

/// `Σ_u π_u·e[u]`.
pub fn embedding_mean(e: &ResistiveEmbedding, pi: &StationaryDistribution) -> Result<Vec<f64>> {
    if pi.len() != e.num_nodes {
        return Err(AffinityError::DimensionMismatch { expected: e.num_nodes, got: pi.len() });
    }
    let mut mean = vec![0.0; e.dim];
    for (u, &p) in pi.pi.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (m, x) in mean.iter_mut().zip(e.vector(u)) {
            *m += p * x;
        }
    }
    Ok(mean)
}

/// A proper rotation (orthogonal, determinant +1).
#[derive(Debug, Clone, PartialEq)]
pub struct RotationMatrix {
    pub matrix: DMatrix<f64>,
    pub seed: u64,
}

impl RotationMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d).map(|i| (0..d).map(|j| self.matrix[(i, j)] * x[j]).sum()).collect()
    }

    /// `max |QᵀQ − I|`.
    pub fn orthogonality_error(&self) -> f64 {
        let prod = self.matrix.transpose() * &self.matrix;
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[(i, j)] - want).abs());
            }
        }
        worst
    }
}

/// Haar-distributed rotation: QR of a Gaussian matrix with the sign of
/// `R`'s diagonal folded into `Q`, then column 0 flipped if `det Q < 0`.
pub fn random_rotation(dim: usize, seed: u64) -> Result<RotationMatrix> {
    if dim == 0 {
        return Err(AffinityError::InvalidConfig("rotation dimension must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = DMatrix::<f64>::from_fn(dim, dim, |_, _| rng.sample(StandardNormal));
    let qr = gauss.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.clone().lu().determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    Ok(RotationMatrix { matrix: q, seed })
}

/// Applies `U` to every vector and to the mean.
pub fn rotate_embedding(e: &ResistiveEmbedding, rot: &RotationMatrix) -> Result<ResistiveEmbedding> {
    if rot.dim() != e.dim {
        return Err(AffinityError::DimensionMismatch { expected: e.dim, got: rot.dim() });
    }
    let mut data = Vec::with_capacity(e.data.len());
    for u in 0..e.num_nodes {
        data.extend(rot.apply(e.vector(u)));
    }
    Ok(ResistiveEmbedding { data, mean: rot.apply(&e.mean), ..e.clone() })
}

#[derive(Serialize, Deserialize)]
struct EmbeddingDoc {
    nodes: usize,
    dim: usize,
    kind: EmbeddingKind,
    epsilon: Option<f64>,
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    jl_constant: Option<f64>,
    vectors: Vec<Vec<f64>>,
    #[serde(default)]
    mean: Vec<f64>,
}

/// Writes `{nodes, dim, kind, epsilon, seed, vectors, mean}`.
pub fn write_embedding_json<W: Write>(e: &ResistiveEmbedding, w: W) -> Result<()> {
    let doc = EmbeddingDoc {
        nodes: e.num_nodes,
        dim: e.dim,
        kind: e.kind,
        epsilon: e.epsilon,
        seed: e.seed,
        jl_constant: e.jl_constant,
        vectors: (0..e.num_nodes).map(|u| e.vector(u).to_vec()).collect(),
        mean: e.mean.clone(),
    };
    serde_json::to_writer(w, &doc)?;
    Ok(())
}

pub fn read_embedding_json<R: Read>(r: R) -> Result<ResistiveEmbedding> {
    let doc: EmbeddingDoc = serde_json::from_reader(r)?;
    if doc.vectors.len() != doc.nodes || doc.vectors.iter().any(|v| v.len() != doc.dim) {
        return Err(AffinityError::Format("vector table does not match nodes × dim".into()));
    }
    Ok(ResistiveEmbedding {
        num_nodes: doc.nodes,
        dim: doc.dim,
        data: doc.vectors.concat(),
        kind: doc.kind,
        epsilon: doc.epsilon,
        seed: doc.seed,
        jl_constant: doc.jl_constant,
        mean: doc.mean,
    })
}

/// Raw `RESE` export of the vectors (metadata other than the kind flag is
/// not carried).
pub fn write_embedding_binary<W: Write>(e: &ResistiveEmbedding, w: W) -> Result<()> {
    let flags = if e.kind == EmbeddingKind::Sketched { binfmt::FLAG_SKETCHED } else { 0 };
    binfmt::write_matrix(w, e.num_nodes, e.dim, flags, &e.data)
}

/// Reads a `RESE` file; the mean is recomputed from `pi`.
pub fn read_embedding_binary<R: Read>(r: R, pi: &StationaryDistribution) -> Result<ResistiveEmbedding> {
    let m = binfmt::read_matrix(r)?;
    let kind = if m.flags & binfmt::FLAG_SKETCHED != 0 { EmbeddingKind::Sketched } else { EmbeddingKind::Exact };
    ResistiveEmbedding::from_parts(m.rows, m.dim, m.data, kind, pi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Graph {
        Graph::new(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap()
    }

    fn path3() -> Graph {
        Graph::new(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn exact_examples() {
        let cfg = SolverConfig::default();
        let e = exact_embedding(&Graph::new(2, &[(0, 1, 1.0)]).unwrap(), &cfg).unwrap();
        assert_eq!(e.dim(), 1);
        assert!(((e.vector(0)[0] - e.vector(1)[0]).abs() - 1.0).abs() < 1e-14);
        assert!((e.squared_distance(0, 1) - 1.0).abs() < 1e-14);

        let e = exact_embedding(&triangle(), &cfg).unwrap();
        assert!((e.squared_distance(0, 1) - 2.0 / 3.0).abs() < 1e-12);

        let e = exact_embedding(&path3(), &cfg).unwrap();
        assert!((e.squared_distance(0, 2) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exact_embedding_cap() {
        let cfg = SolverConfig { oracle_cap: 2, ..Default::default() };
        assert!(matches!(exact_embedding(&triangle(), &cfg), Err(AffinityError::AboveOracleCap { .. })));
    }

    #[test]
    fn jl_dimension_examples() {
        // c·ln(mn)/ε² = 400·ln(5e6) = 6169.979…
        assert_eq!(jl_dimension(1000, 5000, 0.1, 4.0).unwrap(), 6170);
        // 16·ln 2 = 11.09…
        assert_eq!(jl_dimension(2, 1, 0.5, 4.0).unwrap(), 12);
        let k1 = jl_dimension(2, 1, 0.5, 4.0).unwrap();
        let k2 = jl_dimension(2, 1, 0.25, 4.0).unwrap();
        assert!(k2 <= 4 * k1 && k2 + 3 >= 4 * k1);
        assert!(jl_dimension(10, 10, 1.0, 4.0).is_err());
        assert!(jl_dimension(10, 10, 0.5, 0.0).is_err());
    }

    #[test]
    fn mean_examples() {
        let cfg = SolverConfig::default();
        let e = exact_embedding(&triangle(), &cfg).unwrap();
        assert!(e.mean.iter().all(|x| x.abs() < 1e-9));
        let e = exact_embedding(&Graph::new(2, &[(0, 1, 1.0)]).unwrap(), &cfg).unwrap();
        assert!(e.mean.iter().all(|x| x.abs() < 1e-12));

        let g = path3();
        let e = exact_embedding(&g, &cfg).unwrap();
        let want: Vec<f64> =
            (0..e.dim()).map(|i| 0.25 * e.vector(0)[i] + 0.5 * e.vector(1)[i] + 0.25 * e.vector(2)[i]).collect();
        for (a, b) in e.mean.iter().zip(&want) {
            assert!((a - b).abs() < 1e-15);
        }
        let bad = StationaryDistribution { pi: vec![1.0] };
        assert!(embedding_mean(&e, &bad).is_err());
    }

    #[test]
    fn sketch_is_deterministic() {
        let g = triangle();
        let p = SketchParams::new(0.3, 17);
        let cfg = SolverConfig::default();
        let a = sketched_embedding(&g, &p, &cfg).unwrap();
        let b = sketched_embedding(&g, &p, &cfg).unwrap();
        assert_eq!(a.data(), b.data());
        let c = sketched_embedding(&g, &SketchParams::new(0.3, 18), &cfg).unwrap();
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn sketch_dense_and_iterative_paths_agree() {
        let g = Graph::new(5, &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5), (3, 4, 1.0), (0, 4, 3.0), (1, 3, 1.0)]).unwrap();
        let p = SketchParams::new(0.4, 3);
        let cfg = SolverConfig::default();
        let (a, sa) = sketched_embedding_with_stats(&g, &p, &cfg.dense_only()).unwrap();
        let (b, sb) = sketched_embedding_with_stats(&g, &p, &cfg.iterative_only()).unwrap();
        assert!(sa.dense && !sb.dense);
        assert_eq!(sa.solves, sa.dim);
        assert!(sb.total_iterations > 0);
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn triangle_sketch_median_concentrates() {
        let g = triangle();
        let cfg = SolverConfig::default();
        let mut vals: Vec<f64> = (0..50)
            .map(|s| sketched_embedding(&g, &SketchParams::new(0.1, s), &cfg).unwrap().squared_distance(0, 1))
            .collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = 0.5 * (vals[24] + vals[25]);
        assert!((0.9 * 2.0 / 3.0..=1.1 * 2.0 / 3.0).contains(&median), "{median}");
    }

    #[test]
    fn rotation_examples() {
        let r = random_rotation(1, 5).unwrap();
        assert_eq!(r.matrix[(0, 0)], 1.0);
        for (dim, seed) in [(2, 0), (3, 1), (7, 2), (20, 3)] {
            let r = random_rotation(dim, seed).unwrap();
            assert!(r.orthogonality_error() <= 1e-10);
            assert!((r.matrix.clone().lu().determinant() - 1.0).abs() < 1e-9);
        }
        assert!(random_rotation(0, 0).is_err());

        let g = Graph::new(4, &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0), (0, 2, 0.5)]).unwrap();
        let e = exact_embedding(&g, &SolverConfig::default()).unwrap();
        let rot = random_rotation(e.dim(), 9).unwrap();
        let re = rotate_embedding(&e, &rot).unwrap();
        for u in 0..4 {
            for v in 0..4 {
                assert!((e.squared_distance(u, v) - re.squared_distance(u, v)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn export_round_trips() {
        let g = path3();
        let e = sketched_embedding(&g, &SketchParams::new(0.5, 1), &SolverConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_embedding_json(&e, &mut buf).unwrap();
        let back = read_embedding_json(&buf[..]).unwrap();
        assert_eq!(back, e);

        let mut buf = Vec::new();
        write_embedding_binary(&e, &mut buf).unwrap();
        let back = read_embedding_binary(&buf[..], &g.stationary_distribution()).unwrap();
        assert_eq!(back.data(), e.data());
        assert_eq!(back.kind, EmbeddingKind::Sketched);
    }
}
