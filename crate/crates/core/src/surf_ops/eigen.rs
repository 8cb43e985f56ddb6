//! Generalized symmetric eigenproblem `L φ = λ M φ` with diagonal `M`.
//!
//! Small problems go through a dense symmetric solve of
//! `M^{-1/2} L M^{-1/2}`. Large ones use shift-invert subspace iteration with
//! Rayleigh-Ritz projection, backed by an envelope Cholesky factorization of
//! `L - σM` under reverse Cuthill-McKee ordering.

use std::collections::VecDeque;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Above this vertex count `EigenSolver::Auto` switches to the iterative path.
pub const DENSE_LIMIT: usize = 6000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenSolver {
    #[default]
    Auto,
    Dense,
    ShiftInvert,
}

pub(crate) struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

pub(crate) fn solve(l: &CsrMatrix, mass: &[f64], k: usize, solver: EigenSolver) -> Result<EigenPairs> {
    let n = mass.len();
    let use_dense = match solver {
        EigenSolver::Auto => n <= DENSE_LIMIT,
        EigenSolver::Dense => true,
        EigenSolver::ShiftInvert => false,
    };
    let mut pairs = if use_dense || k * 2 + 8 >= n {
        dense(l, mass, k)?
    } else {
        shift_invert(l, mass, k)?
    };
    fix_signs(&mut pairs.vectors, mass);
    Ok(pairs)
}

fn dense(l: &CsrMatrix, mass: &[f64], k: usize) -> Result<EigenPairs> {
    let n = mass.len();
    let s: Vec<f64> = mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut c = l.to_dense();
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] *= s[i] * s[j];
        }
    }
    // symmetrize away roundoff so the solver sees an exactly symmetric matrix
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(c, f64::EPSILON, 0)
        .ok_or_else(|| Error::NoConvergence("dense symmetric eigensolver".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut vectors = DMatrix::zeros(n, k);
    let mut values = Vec::with_capacity(k);
    for (col, &src) in order.iter().take(k).enumerate() {
        values.push(eig.eigenvalues[src]);
        for i in 0..n {
            vectors[(i, col)] = eig.eigenvectors[(i, src)] * s[i];
        }
    }
    Ok(EigenPairs { values, vectors })
}

/// Makes each column's mass-weighted sum positive (or, failing that, its
/// largest-magnitude entry), so results do not depend on solver sign choices.
fn fix_signs(vectors: &mut DMatrix<f64>, mass: &[f64]) {
    for mut col in vectors.column_iter_mut() {
        let weighted: f64 = col.iter().zip(mass).map(|(v, m)| v * m).sum();
        let scale: f64 = col.iter().zip(mass).map(|(v, m)| (v * m).abs()).sum();
        let flip = if weighted.abs() > 1e-8 * scale {
            weighted < 0.0
        } else {
            let imax = col.iamax();
            col[imax] < 0.0
        };
        if flip {
            col.neg_mut();
        }
    }
}

const MAX_ITERS: usize = 400;
const RESIDUAL_TOL: f64 = 1e-10;

fn shift_invert(l: &CsrMatrix, mass: &[f64], k: usize) -> Result<EigenPairs> {
    let n = mass.len();
    let s: Vec<f64> = mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let trace_ratio = (0..n).map(|i| l.get(i, i) / mass[i]).sum::<f64>() / n as f64;
    let sigma = -1e-3 * trace_ratio / n as f64;
    let shifted = {
        let mut t = Vec::with_capacity(l.nnz());
        for r in 0..n {
            for (c, v) in l.row(r) {
                t.push((r, c, v));
            }
            t.push((r, r, -sigma * mass[r]));
        }
        CsrMatrix::from_triplets(n, n, t)
    };
    let chol = EnvelopeCholesky::factor(&shifted)?;

    // symmetric operator C = S L S with S = M^{-1/2}
    let apply_c = |x: &[f64]| -> Vec<f64> {
        let sx: Vec<f64> = x.iter().zip(&s).map(|(a, b)| a * b).collect();
        let lx = l.mul_vec(&sx);
        lx.iter().zip(&s).map(|(a, b)| a * b).collect()
    };
    // (C - σI)^{-1} = M^{1/2} (L - σM)^{-1} M^{1/2}
    let apply_inv = |x: &[f64]| -> Vec<f64> {
        let b: Vec<f64> = x.iter().zip(mass).map(|(a, m)| a * m.sqrt()).collect();
        let y = chol.solve(&b);
        y.iter().zip(mass).map(|(a, m)| a * m.sqrt()).collect()
    };

    let p = (2 * k).max(k + 16).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>() - 0.5);
    x = x.qr().q();

    for _ in 0..MAX_ITERS {
        let cols: Vec<Vec<f64>> = (0..p)
            .into_par_iter()
            .map(|j| apply_inv(x.column(j).as_slice()))
            .collect();
        let y = DMatrix::from_fn(n, p, |i, j| cols[j][i]);
        let q = y.qr().q();
        let cq: Vec<Vec<f64>> = (0..p)
            .into_par_iter()
            .map(|j| apply_c(q.column(j).as_slice()))
            .collect();
        let cq = DMatrix::from_fn(n, p, |i, j| cq[j][i]);
        let h = q.transpose() * &cq;
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let rot = DMatrix::from_fn(p, p, |i, j| eig.eigenvectors[(i, order[j])]);
        let theta: Vec<f64> = order.iter().map(|&o| eig.eigenvalues[o]).collect();
        x = &q * &rot;
        let cx = &cq * &rot;

        let converged = (0..k).all(|j| {
            let r = cx.column(j) - x.column(j) * theta[j];
            r.amax() <= RESIDUAL_TOL * theta[j].abs().max(1.0)
        });
        if converged {
            let vectors = DMatrix::from_fn(n, k, |i, j| x[(i, j)] * s[i]);
            return Ok(EigenPairs {
                values: theta[..k].to_vec(),
                vectors,
            });
        }
    }
    Err(Error::NoConvergence(format!(
        "shift-invert subspace iteration did not converge in {MAX_ITERS} iterations (k = {k}, V = {n})"
    )))
}

/// Cholesky factor stored row-wise over the matrix envelope, under a
/// reverse Cuthill-McKee permutation.
pub(crate) struct EnvelopeCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl EnvelopeCholesky {
    pub(crate) fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.rows();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (old_r, &r) in inv.iter().enumerate() {
            for (old_c, _) in a.row(old_r) {
                let c = inv[old_c];
                if c < r {
                    first[r] = first[r].min(c);
                }
            }
        }
        let mut offsets = vec![0; n + 1];
        for r in 0..n {
            offsets[r + 1] = offsets[r] + (r - first[r] + 1);
        }
        let mut values = vec![0.0; offsets[n]];
        for (old_r, &r) in inv.iter().enumerate() {
            for (old_c, v) in a.row(old_r) {
                let c = inv[old_c];
                if c <= r {
                    values[offsets[r] + c - first[r]] += v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let start = fi.max(fj);
                let mut sum = values[offsets[i] + j - fi];
                let ri = &values[offsets[i] + start - fi..offsets[i] + j - fi];
                let rj = &values[offsets[j] + start - fj..offsets[j] + j - fj];
                sum -= ri.iter().zip(rj).map(|(a, b)| a * b).sum::<f64>();
                values[offsets[i] + j - fi] = sum / values[offsets[j + 1] - 1];
            }
            let row = &values[offsets[i]..offsets[i + 1] - 1];
            let d = values[offsets[i + 1] - 1] - row.iter().map(|v| v * v).sum::<f64>();
            if !(d > 0.0) {
                return Err(Error::NoConvergence(format!(
                    "shifted Laplacian is not positive definite at pivot {i}"
                )));
            }
            values[offsets[i + 1] - 1] = d.sqrt();
        }
        Ok(EnvelopeCholesky {
            perm,
            first,
            offsets,
            values,
        })
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.offsets[i]..self.offsets[i + 1] - 1];
            let s: f64 = row.iter().zip(&y[fi..i]).map(|(a, b)| a * b).sum();
            y[i] = (y[i] - s) / self.values[self.offsets[i + 1] - 1];
        }
        for i in (0..n).rev() {
            y[i] /= self.values[self.offsets[i + 1] - 1];
            let fi = self.first[i];
            let yi = y[i];
            let row = &self.values[self.offsets[i]..self.offsets[i + 1] - 1];
            for (k, v) in row.iter().enumerate() {
                y[fi + k] -= v * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.rows();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|r| a.row(r).map(|(c, _)| c).filter(|&c| c != r).collect())
        .collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (degree[v], v));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(seed, &adj, &degree);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&u| !visited[u]).collect();
            next.sort_by_key(|&u| (degree[u], u));
            for u in next {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(seed: usize, adj: &[Vec<usize>], degree: &[usize]) -> usize {
    let mut current = seed;
    let mut best_ecc = 0;
    for _ in 0..8 {
        let levels = bfs_levels(current, adj);
        let ecc = levels.iter().filter_map(|l| *l).max().unwrap_or(0);
        if ecc <= best_ecc && best_ecc > 0 {
            break;
        }
        best_ecc = ecc;
        let far = levels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == Some(ecc))
            .min_by_key(|(v, _)| (degree[*v], *v))
            .map(|(v, _)| v)
            .unwrap_or(current);
        if far == current {
            break;
        }
        current = far;
    }
    current
}

fn bfs_levels(start: usize, adj: &[Vec<usize>]) -> Vec<Option<usize>> {
    let mut levels = vec![None; adj.len()];
    levels[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        let lv = levels[v].unwrap();
        for &u in &adj[v] {
            if levels[u].is_none() {
                levels[u] = Some(lv + 1);
                queue.push_back(u);
            }
        }
    }
    levels
}
