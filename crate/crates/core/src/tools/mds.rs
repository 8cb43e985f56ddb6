//! Classical (Torgerson) multidimensional scaling.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-9;

/// Embeds a distance matrix in `dims` dimensions.
///
/// Double-centers `-D²/2`, keeps the `dims` largest eigenpairs and scales
/// each eigenvector by the square root of its eigenvalue, negative
/// eigenvalues clamped to zero. Each coordinate column is sign-normalized so
/// its largest-magnitude entry is positive.
pub fn mds_project(distances: &DMatrix<f64>, dims: usize) -> Result<DMatrix<f64>> {
    let n = distances.nrows();
    if distances.ncols() != n {
        return Err(Error::invalid(format!(
            "distance matrix must be square, got {}x{}",
            n,
            distances.ncols()
        )));
    }
    if n == 0 {
        return Err(Error::Empty("distance matrix is empty".into()));
    }
    if dims == 0 || dims > n {
        return Err(Error::invalid(format!("dims must be in 1..={n}, got {dims}")));
    }
    let scale = distances.amax().max(1.0);
    for i in 0..n {
        if distances[(i, i)].abs() > SYMMETRY_TOL * scale {
            return Err(Error::invalid(format!("distance matrix has nonzero diagonal at {i}")));
        }
        for j in 0..i {
            let (a, b) = (distances[(i, j)], distances[(j, i)]);
            if !a.is_finite() || (a - b).abs() > SYMMETRY_TOL * scale {
                return Err(Error::invalid(format!("distance matrix is not symmetric at ({i}, {j})")));
            }
            if a < 0.0 {
                return Err(Error::invalid(format!("negative distance at ({i}, {j})")));
            }
        }
    }
    if distances.iter().all(|&d| d == 0.0) {
        return Ok(DMatrix::zeros(n, dims));
    }

    let sq = distances.map(|d| d * d);
    let row_mean: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let total_mean = row_mean.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| {
        let v = -0.5 * (sq[(i, j)] - row_mean[i] - row_mean[j] + total_mean);
        let w = -0.5 * (sq[(j, i)] - row_mean[j] - row_mean[i] + total_mean);
        0.5 * (v + w)
    });
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    if eig.eigenvalues[order[0]] <= 0.0 {
        return Err(Error::Degenerate("no positive eigenvalue in the centered Gram matrix".into()));
    }
    let mut coords = DMatrix::zeros(n, dims);
    for (c, &src) in order.iter().take(dims).enumerate() {
        let s = eig.eigenvalues[src].max(0.0).sqrt();
        let col = eig.eigenvectors.column(src);
        let flip = if col[col.iamax()] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            coords[(i, c)] = flip * s * col[i];
        }
    }
    Ok(coords)
}

/// Euclidean distance matrix between the rows of `points`.
pub fn pairwise_distances(points: &DMatrix<f64>) -> DMatrix<f64> {
    let n = points.nrows();
    DMatrix::from_fn(n, n, |i, j| (points.row(i) - points.row(j)).norm())
}
