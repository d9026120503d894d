//! Symmetric-matrix helpers on top of `nalgebra`.

use nalgebra::{DMatrix, SymmetricEigen};

pub type Matrix = DMatrix<f64>;

/// Eigenvalues are clamped to this magnitude before exponentiation.
pub const EXP_CLAMP: f64 = 700.0;

/// Averages `m` with its transpose to wash out rounding asymmetry.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

pub fn max_asymmetry(m: &Matrix) -> f64 {
    (m - m.transpose()).amax()
}

pub fn eigenvalues(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn lambda_max(m: &Matrix) -> f64 {
    eigenvalues(m).last().copied().unwrap_or(0.0)
}

pub fn lambda_min(m: &Matrix) -> f64 {
    eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// `f(M) = V diag(f(λ)) Vᵀ` for symmetric `M`.
pub fn map_spectrum(m: &Matrix, f: impl Fn(f64) -> f64) -> Matrix {
    let n = m.nrows();
    if n == 0 {
        return Matrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let fl = f(lam);
        scaled.column_mut(k).scale_mut(fl);
    }
    symmetrize(&(scaled * v.transpose()))
}

/// Matrix exponential of a symmetric matrix.
pub fn expm_sym(m: &Matrix) -> Matrix {
    map_spectrum(m, |x| x.clamp(-EXP_CLAMP, EXP_CLAMP).exp())
}

/// `tr(e^M)` without forming the exponential.
pub fn trace_exp(m: &Matrix) -> f64 {
    eigenvalues(m)
        .into_iter()
        .map(|x| x.clamp(-EXP_CLAMP, EXP_CLAMP).exp())
        .sum()
}

/// Square root of a PSD matrix; tiny negative eigenvalues are treated as 0.
pub fn sqrt_psd(m: &Matrix) -> Matrix {
    map_spectrum(m, |x| x.max(0.0).sqrt())
}

pub fn identity(d: usize) -> Matrix {
    Matrix::identity(d, d)
}

/// Orthonormal basis of the complement of the all-ones vector, as the
/// columns of an `n × (n-1)` Helmert matrix.
pub fn ones_complement_basis(n: usize) -> Matrix {
    let mut q = Matrix::zeros(n, n.saturating_sub(1));
    for k in 1..n {
        let norm = ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            q[(i, k - 1)] = 1.0 / norm;
        }
        q[(k, k - 1)] = -(k as f64) / norm;
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_diagonal() {
        let m = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 1.0, -2.0]));
        let e = expm_sym(&m);
        assert!((e[(1, 1)] - 1f64.exp()).abs() < 1e-12);
        assert!((e[(2, 2)] - (-2f64).exp()).abs() < 1e-12);
        assert!(e[(0, 1)].abs() < 1e-14);
        assert!((trace_exp(&m) - e.trace()).abs() < 1e-12);
    }

    #[test]
    fn expm_matches_series_on_small_matrix() {
        let m = Matrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, -0.2]);
        let mut series = identity(2);
        let mut term = identity(2);
        for k in 1..30 {
            term = &term * &m / k as f64;
            series += &term;
        }
        assert!((expm_sym(&m) - series).amax() < 1e-13);
    }

    #[test]
    fn expm_clamps_huge_eigenvalues() {
        let m = Matrix::from_diagonal_element(2, 2, 1e6);
        assert!(expm_sym(&m).iter().all(|x| x.is_finite()));
    }

    #[test]
    fn sqrt_squares_back() {
        let a = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let r = sqrt_psd(&a);
        assert!((&r * &r - a).amax() < 1e-12);
    }

    #[test]
    fn helmert_basis_is_orthonormal_and_orthogonal_to_ones() {
        for n in 1..7 {
            let q = ones_complement_basis(n);
            let gram = q.transpose() * &q;
            assert!((gram - identity(n - 1)).amax() < 1e-12);
            let ones = Matrix::from_element(1, n, 1.0);
            assert!((ones * &q).amax() < 1e-12);
        }
    }
}
