//! Central finite differences with the step rule `h = cbrt(eps) * max(1, |u_i|)`.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

/// Componentwise central-difference step.
pub fn fd_step(u: f64) -> f64 {
    f64::EPSILON.cbrt() * u.abs().max(1.0)
}

/// Central-difference gradient of a scalar function.
pub fn central_gradient<F>(f: F, u: &[f64]) -> Result<DVector<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut out = DVector::zeros(u.len());
    let mut probe = u.to_vec();
    for i in 0..u.len() {
        let h = fd_step(u[i]);
        probe[i] = u[i] + h;
        let up = f(&probe)?;
        probe[i] = u[i] - h;
        let down = f(&probe)?;
        probe[i] = u[i];
        out[i] = (up - down) / (2.0 * h);
    }
    Ok(out)
}

/// Central-difference Jacobian `J[(i, j)] = d g_i / d u_j` of a vector map.
pub fn central_jacobian<F>(g: F, u: &[f64]) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<DVector<f64>>,
{
    let mut probe = u.to_vec();
    let mut cols = Vec::with_capacity(u.len());
    for j in 0..u.len() {
        let h = fd_step(u[j]);
        probe[j] = u[j] + h;
        let up = g(&probe)?;
        probe[j] = u[j] - h;
        let down = g(&probe)?;
        probe[j] = u[j];
        cols.push((up - down) / (2.0 * h));
    }
    let rows = cols.first().map_or(0, |c| c.len());
    Ok(DMatrix::from_fn(rows, u.len(), |i, j| cols[j][i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_of_cubic() {
        let g = central_gradient(|u| Ok(u[0].powi(3) + u[0] * u[1]), &[2.0, -1.0]).unwrap();
        assert!((g[0] - 11.0).abs() < 1e-8);
        assert!((g[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn jacobian_of_linear_map_is_exact() {
        let j = central_jacobian(
            |u| Ok(DVector::from_vec(vec![2.0 * u[0] + u[1], -u[1]])),
            &[0.5, 3.0],
        )
        .unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, -1.0]);
        assert!((j - expected).abs().max() < 1e-9);
    }
}
