//! Laplacian systems `L x = b`, i.e. application of the pseudoinverse `L†`.
//!
//! Small graphs go through a dense eigendecomposition; large graphs use
//! Jacobi-preconditioned conjugate gradients on the system projected
//! orthogonally to the component indicators. The backend is chosen once per
//! [`LaplacianSolver`] and reused across right-hand sides.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{AffinityError, Result};
use crate::graph::Graph;

/// Largest graph the dense oracles (pseudoinverse, exact embedding) accept.
pub const DEFAULT_ORACLE_CAP: usize = 2048;

/// Relative eigenvalue cutoff for the pseudoinverse rank decision.
pub const EIGEN_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Graphs with fewer nodes than this use the dense path.
    pub dense_threshold: usize,
    /// Target for `‖L x − b‖ / ‖b‖` on the iterative path.
    pub rel_tolerance: f64,
    /// Iteration cap; `None` means `10·√n + 200`.
    pub max_iterations: Option<usize>,
    /// Largest node count accepted by dense oracles.
    pub oracle_cap: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { dense_threshold: 512, rel_tolerance: 1e-8, max_iterations: None, oracle_cap: DEFAULT_ORACLE_CAP }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance < 1.0) {
            return Err(AffinityError::InvalidConfig(format!(
                "rel_tolerance must lie in (0, 1), got {}",
                self.rel_tolerance
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(AffinityError::InvalidConfig("max_iterations must be at least 1".into()));
        }
        Ok(())
    }

    /// Iteration cap resolved for a graph with `n` nodes.
    pub fn iteration_cap(&self, n: usize) -> usize {
        self.max_iterations.unwrap_or_else(|| (10.0 * (n as f64).sqrt()).ceil() as usize + 200)
    }

    /// Same config with the tolerance tightened to at most `tol`.
    pub fn tightened(&self, tol: f64) -> Self {
        SolverConfig { rel_tolerance: self.rel_tolerance.min(tol), ..*self }
    }

    /// Forces the iterative path regardless of graph size.
    pub fn iterative_only(&self) -> Self {
        SolverConfig { dense_threshold: 0, ..*self }
    }

    /// Forces the dense path up to the oracle cap.
    pub fn dense_only(&self) -> Self {
        SolverConfig { dense_threshold: usize::MAX, ..*self }
    }
}

/// Subtracts the per-component mean of `b`.
pub fn project_out_nullspace(g: &Graph, b: &[f64]) -> Result<Vec<f64>> {
    g.check_len(b.len())?;
    let mut out = b.to_vec();
    project_in_place(g, &mut out);
    Ok(out)
}

pub(crate) fn project_in_place(g: &Graph, x: &mut [f64]) {
    if g.is_connected() {
        let n = x.len();
        if n == 0 {
            return;
        }
        let mean = x.iter().sum::<f64>() / n as f64;
        x.iter_mut().for_each(|v| *v -= mean);
        return;
    }
    for comp in g.components() {
        let mean = comp.iter().map(|&u| x[u]).sum::<f64>() / comp.len() as f64;
        for &u in comp {
            x[u] -= mean;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Outcome of one iterative solve.
#[derive(Debug, Clone)]
pub struct PcgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Preconditioned conjugate gradients for a symmetric positive
/// (semi)definite operator.
///
/// `project` is applied to the preconditioned residual and to the iterate
/// every step; for singular systems it must be the orthogonal projector onto
/// the range of `apply`. Convergence is confirmed on the true residual.
pub fn pcg<A, P>(
    apply: A,
    inv_diag: &[f64],
    b: &[f64],
    rel_tolerance: f64,
    max_iterations: usize,
    project: P,
) -> Result<PcgOutcome>
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&mut [f64]),
{
    let n = b.len();
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(PcgOutcome { x, iterations: 0, rel_residual: 0.0 });
    }
    let target = rel_tolerance * b_norm;
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(ri, di)| ri * di).collect();
    project(&mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    let mut rel_residual = 1.0;

    while iterations < max_iterations {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        project(&mut x);
        iterations += 1;

        if norm(&r) <= target {
            // recurrence residual drifts; recheck against the true one
            apply(&x, &mut ap);
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
            let true_norm = norm(&r);
            rel_residual = true_norm / b_norm;
            if true_norm <= target {
                return Ok(PcgOutcome { x, iterations, rel_residual });
            }
            // restart from the corrected residual
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            project(&mut z);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }

        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        project(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    apply(&x, &mut ap);
    let true_norm = (0..n).map(|i| (b[i] - ap[i]).powi(2)).sum::<f64>().sqrt();
    rel_residual = rel_residual.min(true_norm / b_norm);
    if true_norm <= target {
        return Ok(PcgOutcome { x, iterations, rel_residual: true_norm / b_norm });
    }
    Err(AffinityError::NonConvergence { iterations, residual: rel_residual })
}

/// Dense Moore–Penrose pseudoinverse of the Laplacian.
#[derive(Debug, Clone)]
pub struct DensePseudoinverse {
    pub matrix: DMatrix<f64>,
}

impl DensePseudoinverse {
    pub fn apply(&self, b: &[f64]) -> Vec<f64> {
        let n = self.matrix.nrows();
        let mut out = vec![0.0; n];
        for (j, &bj) in b.iter().enumerate() {
            if bj == 0.0 {
                continue;
            }
            let col = self.matrix.column(j);
            for i in 0..n {
                out[i] += col[i] * bj;
            }
        }
        out
    }

    pub fn entry(&self, u: usize, v: usize) -> f64 {
        self.matrix[(u, v)]
    }
}

/// `L†` via symmetric eigendecomposition, capped at [`DEFAULT_ORACLE_CAP`] nodes.
pub fn dense_pseudoinverse(g: &Graph) -> Result<DensePseudoinverse> {
    dense_pseudoinverse_capped(g, DEFAULT_ORACLE_CAP)
}

pub fn dense_pseudoinverse_capped(g: &Graph, cap: usize) -> Result<DensePseudoinverse> {
    let n = g.num_nodes();
    if n > cap {
        return Err(AffinityError::AboveOracleCap { n, cap });
    }
    if g.num_edges() == 0 {
        return Ok(DensePseudoinverse { matrix: DMatrix::zeros(n, n) });
    }
    let eig = SymmetricEigen::new(g.dense_laplacian());
    let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let cutoff = EIGEN_CUTOFF * lambda_max;
    let zeroed = eig.eigenvalues.iter().filter(|&&l| l <= cutoff).count();
    if zeroed != g.num_components() {
        return Err(AffinityError::RankMismatch { zeroed, components: g.num_components() });
    }
    let mut scaled = eig.eigenvectors.clone();
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let s = if l > cutoff { 1.0 / l } else { 0.0 };
        scaled.column_mut(j).scale_mut(s);
    }
    let mut matrix = &scaled * eig.eigenvectors.transpose();
    // exact symmetry
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (matrix[(i, j)] + matrix[(j, i)]);
            matrix[(i, j)] = avg;
            matrix[(j, i)] = avg;
        }
    }
    Ok(DensePseudoinverse { matrix })
}

enum Backend {
    Dense(DensePseudoinverse),
    Iterative { inv_diag: Vec<f64>, max_iterations: usize },
}

/// A Laplacian solver bound to one graph.
pub struct LaplacianSolver<'g> {
    graph: &'g Graph,
    cfg: SolverConfig,
    backend: Backend,
}

impl<'g> LaplacianSolver<'g> {
    pub fn new(graph: &'g Graph, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let n = graph.num_nodes();
        let backend = if n < cfg.dense_threshold && n <= cfg.oracle_cap {
            Backend::Dense(dense_pseudoinverse_capped(graph, cfg.oracle_cap)?)
        } else {
            let inv_diag = graph.degrees().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 }).collect();
            Backend::Iterative { inv_diag, max_iterations: cfg.iteration_cap(n) }
        };
        Ok(LaplacianSolver { graph, cfg, backend })
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.backend, Backend::Dense(_))
    }

    pub fn pseudoinverse(&self) -> Option<&DensePseudoinverse> {
        match &self.backend {
            Backend::Dense(p) => Some(p),
            Backend::Iterative { .. } => None,
        }
    }

    /// `L† b`, after projecting `b` out of the nullspace.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.solve_counted(b).map(|o| o.x)
    }

    /// Like [`solve`](Self::solve) but also reports the iteration count
    /// (zero on the dense path).
    pub fn solve_counted(&self, b: &[f64]) -> Result<PcgOutcome> {
        let g = self.graph;
        let rhs = project_out_nullspace(g, b)?;
        match &self.backend {
            Backend::Dense(pinv) => {
                let mut x = pinv.apply(&rhs);
                project_in_place(g, &mut x);
                let lx = g.apply_laplacian(&x)?;
                let b_norm = norm(&rhs);
                let res = (0..rhs.len()).map(|i| (lx[i] - rhs[i]).powi(2)).sum::<f64>().sqrt();
                let rel_residual = if b_norm > 0.0 { res / b_norm } else { 0.0 };
                Ok(PcgOutcome { x, iterations: 0, rel_residual })
            }
            Backend::Iterative { inv_diag, max_iterations } => pcg(
                |x, y| g.apply_laplacian_into(x, y),
                inv_diag,
                &rhs,
                self.cfg.rel_tolerance,
                *max_iterations,
                |x| project_in_place(g, x),
            ),
        }
    }
}

/// One-shot `L† b`.
pub fn solve_laplacian(g: &Graph, b: &[f64], cfg: &SolverConfig) -> Result<Vec<f64>> {
    LaplacianSolver::new(g, *cfg)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Graph {
        Graph::new(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap()
    }

    #[test]
    fn projection_examples() {
        let g = triangle();
        assert!(project_out_nullspace(&g, &[1.0; 3]).unwrap().iter().all(|v| v.abs() < 1e-15));
        let e = Graph::new(2, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(project_out_nullspace(&e, &[1.0, 0.0]).unwrap(), vec![0.5, -0.5]);
        let two = Graph::new(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert_eq!(project_out_nullspace(&two, &[2.0, 0.0, 4.0, 0.0]).unwrap(), vec![1.0, -1.0, 2.0, -2.0]);
        assert!(matches!(project_out_nullspace(&two, &[1.0]), Err(AffinityError::DimensionMismatch { .. })));
    }

    #[test]
    fn solve_examples_both_paths() {
        let e = Graph::new(2, &[(0, 1, 1.0)]).unwrap();
        let t = triangle();
        for cfg in [SolverConfig::default().dense_only(), SolverConfig::default().iterative_only()] {
            let x = solve_laplacian(&e, &[1.0, -1.0], &cfg).unwrap();
            assert!((x[0] - 0.5).abs() < 1e-12 && (x[1] + 0.5).abs() < 1e-12);

            let x = solve_laplacian(&t, &[1.0, -1.0, 0.0], &cfg).unwrap();
            assert!((x[0] - x[1] - 2.0 / 3.0).abs() < 1e-9);

            let x = solve_laplacian(&t, &[1.0, 1.0, 1.0], &cfg).unwrap();
            assert!(x.iter().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn pseudoinverse_examples() {
        let e = Graph::new(2, &[(0, 1, 1.0)]).unwrap();
        let p = dense_pseudoinverse(&e).unwrap();
        for (i, j, want) in [(0, 0, 0.25), (0, 1, -0.25), (1, 0, -0.25), (1, 1, 0.25)] {
            assert!((p.entry(i, j) - want).abs() < 1e-14);
        }

        let p = dense_pseudoinverse(&triangle()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 2.0 / 9.0 } else { -1.0 / 9.0 };
                assert!((p.entry(i, j) - want).abs() < 1e-14);
            }
        }
        // L L† = I − J/3
        let prod = triangle().dense_laplacian() * &p.matrix;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 2.0 / 3.0 } else { -1.0 / 3.0 };
                assert!((prod[(i, j)] - want).abs() < 1e-13);
            }
        }

        let empty = Graph::new(4, &[]).unwrap();
        assert!(dense_pseudoinverse(&empty).unwrap().matrix.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pseudoinverse_cap() {
        let g = Graph::new(10, &[(0, 1, 1.0)]).unwrap();
        assert!(matches!(dense_pseudoinverse_capped(&g, 5), Err(AffinityError::AboveOracleCap { n: 10, cap: 5 })));
    }

    #[test]
    fn non_convergence_reports_residual() {
        let edges: Vec<_> = (0..199).map(|i| (i, i + 1, 1.0)).collect();
        let g = Graph::new(200, &edges).unwrap();
        let cfg = SolverConfig { max_iterations: Some(3), ..SolverConfig::default().iterative_only() };
        let mut b = vec![0.0; 200];
        b[0] = 1.0;
        b[199] = -1.0;
        match solve_laplacian(&g, &b, &cfg) {
            Err(AffinityError::NonConvergence { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 1e-8);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig { rel_tolerance: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { max_iterations: Some(0), ..Default::default() };
        assert!(bad.validate().is_err());
        assert_eq!(SolverConfig::default().iteration_cap(100), 300);
    }

    #[test]
    fn disconnected_iterative_solution_orthogonal() {
        let g = Graph::new(6, &[(0, 1, 1.0), (1, 2, 2.0), (3, 4, 1.0), (4, 5, 0.5), (3, 5, 1.0)]).unwrap();
        let b = [1.0, 0.0, -3.0, 2.0, 0.5, 0.0];
        let x = solve_laplacian(&g, &b, &SolverConfig::default().iterative_only()).unwrap();
        for comp in g.components() {
            let s: f64 = comp.iter().map(|&u| x[u]).sum();
            assert!(s.abs() < 1e-12);
        }
        let y = solve_laplacian(&g, &b, &SolverConfig::default().dense_only()).unwrap();
        for (a, c) in x.iter().zip(&y) {
            assert!((a - c).abs() < 1e-8);
        }
    }
}
