//! Legendre submanifolds generated by `psi(x)` or `phi(p)`, deficit
//! functions, and control manifolds.
//!
//! Submanifolds are represented by their generating potential and the
//! embedding rule; membership is decided from the deficit and the gradient
//! constraint, never from stored point clouds.

use crate::chart::{p_index, x_index, z_index, CoVector, ContactPoint, TangentVector};
use crate::error::{Error, Result};
use crate::potential::{Potential, SharedPotential};

/// Tolerance for [`LegendreEmbedding::contains`].
pub const MEMBERSHIP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingKind {
    /// `p = grad psi(x)`, `z = psi(x)`.
    FromPsi,
    /// `x = grad phi(p)`, `z = p . grad phi(p) - phi(p)`.
    FromPhi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlKind {
    /// Chart `(x, z)` with `p = grad psi(x)`.
    BPsi,
    /// Chart `(p, z)` with `x = grad phi(p)`.
    BPhi,
}

/// Value of `Delta_psi` or `Delta_phi` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeficitValue {
    pub delta: f64,
}

fn check_dim(pot: &dyn Potential, n: usize) -> Result<()> {
    if pot.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: pot.dim(),
            found: n,
        });
    }
    Ok(())
}

/// `(x, grad psi(x), psi(x))`.
pub fn embed_from_psi(psi: &dyn Potential, x: &[f64]) -> Result<ContactPoint> {
    let g = psi.gradient(x)?;
    ContactPoint::new(x, g.as_slice(), psi.value(x)?)
}

/// `(grad phi(p), p, p . grad phi(p) - phi(p))`.
pub fn embed_from_phi(phi: &dyn Potential, p: &[f64]) -> Result<ContactPoint> {
    let g = phi.gradient(p)?;
    let z = g.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() - phi.value(p)?;
    ContactPoint::new(g.as_slice(), p, z)
}

/// `Delta_psi = psi(x) - z`.
pub fn deficit_psi(psi: &dyn Potential, pt: &ContactPoint) -> Result<DeficitValue> {
    check_dim(psi, pt.n())?;
    Ok(DeficitValue {
        delta: psi.value(pt.x())? - pt.z(),
    })
}

/// `Delta_phi = x . p - phi(p) - z`.
pub fn deficit_phi(phi: &dyn Potential, pt: &ContactPoint) -> Result<DeficitValue> {
    check_dim(phi, pt.n())?;
    let xp: f64 = pt.x().iter().zip(pt.p()).map(|(a, b)| a * b).sum();
    Ok(DeficitValue {
        delta: xp - phi.value(pt.p())? - pt.z(),
    })
}

/// Pushforwards `X_j = d/dx^j + psi_jb d/dp_b + psi_j d/dz` of the coordinate
/// basis of the psi-submanifold at base point `x`.
pub fn pushforward_basis_psi(psi: &dyn Potential, x: &[f64]) -> Result<Vec<TangentVector>> {
    let n = psi.dim();
    let g = psi.gradient(x)?;
    let h = psi.hessian(x)?;
    Ok((0..n)
        .map(|j| {
            let mut data = vec![0.0; 2 * n + 1];
            data[x_index(j)] = 1.0;
            for b in 0..n {
                data[p_index(n, b)] = h[(j, b)];
            }
            data[z_index(n)] = g[j];
            TangentVector::from_flat_unchecked(data)
        })
        .collect())
}

/// Pushforwards `Y^i = phi^ib d/dx^b + d/dp_i + p_b phi^ib d/dz` of the
/// coordinate basis of the phi-submanifold at base point `p`.
pub fn pushforward_basis_phi(phi: &dyn Potential, p: &[f64]) -> Result<Vec<TangentVector>> {
    let n = phi.dim();
    let h = phi.hessian(p)?;
    Ok((0..n)
        .map(|i| {
            let mut data = vec![0.0; 2 * n + 1];
            let mut zc = 0.0;
            for b in 0..n {
                data[x_index(b)] = h[(i, b)];
                zc += p[b] * h[(i, b)];
            }
            data[p_index(n, i)] = 1.0;
            data[z_index(n)] = zc;
            TangentVector::from_flat_unchecked(data)
        })
        .collect())
}

/// Dually flat coordinates `(theta, eta) = (x, grad psi(x))` on the
/// psi-submanifold.
pub fn dual_coordinates(psi: &dyn Potential, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let eta = psi.gradient(x)?;
    Ok((x.to_vec(), eta.as_slice().to_vec()))
}

/// A Legendre submanifold given by its generating potential.
#[derive(Debug, Clone)]
pub struct LegendreEmbedding {
    pub kind: EmbeddingKind,
    pub potential: SharedPotential,
}

impl LegendreEmbedding {
    pub fn from_psi(psi: SharedPotential) -> Self {
        Self {
            kind: EmbeddingKind::FromPsi,
            potential: psi,
        }
    }

    pub fn from_phi(phi: SharedPotential) -> Self {
        Self {
            kind: EmbeddingKind::FromPhi,
            potential: phi,
        }
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    pub fn embed(&self, base: &[f64]) -> Result<ContactPoint> {
        match self.kind {
            EmbeddingKind::FromPsi => embed_from_psi(self.potential.as_ref(), base),
            EmbeddingKind::FromPhi => embed_from_phi(self.potential.as_ref(), base),
        }
    }

    pub fn pushforward_basis(&self, base: &[f64]) -> Result<Vec<TangentVector>> {
        match self.kind {
            EmbeddingKind::FromPsi => pushforward_basis_psi(self.potential.as_ref(), base),
            EmbeddingKind::FromPhi => pushforward_basis_phi(self.potential.as_ref(), base),
        }
    }

    pub fn deficit(&self, pt: &ContactPoint) -> Result<DeficitValue> {
        match self.kind {
            EmbeddingKind::FromPsi => deficit_psi(self.potential.as_ref(), pt),
            EmbeddingKind::FromPhi => deficit_phi(self.potential.as_ref(), pt),
        }
    }

    /// The base coordinates of `pt` on this submanifold (`x` or `p`).
    pub fn base_of<'a>(&self, pt: &'a ContactPoint) -> &'a [f64] {
        match self.kind {
            EmbeddingKind::FromPsi => pt.x(),
            EmbeddingKind::FromPhi => pt.p(),
        }
    }

    /// Differentials `d Psi_0, d Psi_1, ..., d Psi_n` of the defining
    /// constraints, evaluated at `pt`.
    ///
    /// For psi: `Psi_0 = z - psi(x)`, `Psi_j = p_j - psi_j(x)`.
    /// For phi: `Psi_0 = z - (p . grad phi - phi)`, `Psi_i = x^i - phi^i(p)`.
    pub fn constraint_differentials(&self, pt: &ContactPoint) -> Result<Vec<CoVector>> {
        let n = pt.n();
        check_dim(self.potential.as_ref(), n)?;
        let mut out = Vec::with_capacity(n + 1);
        match self.kind {
            EmbeddingKind::FromPsi => {
                let g = self.potential.gradient(pt.x())?;
                let h = self.potential.hessian(pt.x())?;
                let mut d0 = vec![0.0; 2 * n + 1];
                d0[z_index(n)] = 1.0;
                for j in 0..n {
                    d0[x_index(j)] = -g[j];
                }
                out.push(CoVector::from_flat_unchecked(d0));
                for j in 0..n {
                    let mut dj = vec![0.0; 2 * n + 1];
                    dj[p_index(n, j)] = 1.0;
                    for b in 0..n {
                        dj[x_index(b)] = -h[(j, b)];
                    }
                    out.push(CoVector::from_flat_unchecked(dj));
                }
            }
            EmbeddingKind::FromPhi => {
                let h = self.potential.hessian(pt.p())?;
                let mut d0 = vec![0.0; 2 * n + 1];
                d0[z_index(n)] = 1.0;
                for b in 0..n {
                    d0[p_index(n, b)] = -(0..n).map(|i| pt.p()[i] * h[(i, b)]).sum::<f64>();
                }
                out.push(CoVector::from_flat_unchecked(d0));
                for i in 0..n {
                    let mut di = vec![0.0; 2 * n + 1];
                    di[x_index(i)] = 1.0;
                    for b in 0..n {
                        di[p_index(n, b)] = -h[(i, b)];
                    }
                    out.push(CoVector::from_flat_unchecked(di));
                }
            }
        }
        Ok(out)
    }

    /// Largest of `|Delta|` and the gradient-constraint residual.
    pub fn membership_residual(&self, pt: &ContactPoint) -> Result<f64> {
        let delta = self.deficit(pt)?.delta.abs();
        let grad = match self.kind {
            EmbeddingKind::FromPsi => {
                let g = self.potential.gradient(pt.x())?;
                g.iter()
                    .zip(pt.p())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            }
            EmbeddingKind::FromPhi => {
                let g = self.potential.gradient(pt.p())?;
                g.iter()
                    .zip(pt.x())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            }
        };
        Ok(delta.max(grad))
    }

    pub fn contains(&self, pt: &ContactPoint) -> Result<bool> {
        Ok(self.membership_residual(pt)? <= MEMBERSHIP_TOL)
    }
}

/// The `(n+1)`-dimensional surface `p = grad psi(x)` (or `x = grad phi(p)`)
/// with `z` free.
#[derive(Debug, Clone)]
pub struct ControlManifold {
    pub kind: ControlKind,
    pub potential: SharedPotential,
}

impl ControlManifold {
    pub fn b_psi(psi: SharedPotential) -> Self {
        Self {
            kind: ControlKind::BPsi,
            potential: psi,
        }
    }

    pub fn b_phi(phi: SharedPotential) -> Self {
        Self {
            kind: ControlKind::BPhi,
            potential: phi,
        }
    }

    /// Dimension `n + 1` of the control manifold.
    pub fn dim(&self) -> usize {
        self.potential.dim() + 1
    }

    pub fn point(&self, base: &[f64], z: f64) -> Result<ContactPoint> {
        control_point(self, base, z)
    }
}

/// Embeds `(base, z)` of a control manifold into the contact chart.
pub fn control_point(cm: &ControlManifold, base: &[f64], z: f64) -> Result<ContactPoint> {
    let g = cm.potential.gradient(base)?;
    match cm.kind {
        ControlKind::BPsi => ContactPoint::new(base, g.as_slice(), z),
        ControlKind::BPhi => ContactPoint::new(g.as_slice(), base, z),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::contact_form_eval;
    use crate::potential::{builtin_spin, LegendreDual, Quadratic};
    use std::f64::consts::LN_2;
    use std::sync::Arc;

    #[test]
    fn embed_psi_examples() {
        let spin = builtin_spin();
        let pt = embed_from_psi(&spin, &[0.0]).unwrap();
        assert_eq!(pt.as_slice(), &[0.0, 0.0, LN_2]);
        let q = Quadratic::identity(2);
        let pt = embed_from_psi(&q, &[1.0, 2.0]).unwrap();
        assert_eq!(pt.as_slice(), &[1.0, 2.0, 1.0, 2.0, 2.5]);
        for v in pushforward_basis_psi(&q, &[1.0, 2.0]).unwrap() {
            assert!(contact_form_eval(&pt, &v).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn embed_phi_examples() {
        let q = Quadratic::identity(2);
        let pt = embed_from_phi(&q, &[1.0, 0.0]).unwrap();
        assert_eq!(pt.as_slice(), &[1.0, 0.0, 1.0, 0.0, 0.5]);
        for v in pushforward_basis_phi(&q, &[1.0, 0.0]).unwrap() {
            assert!(contact_form_eval(&pt, &v).unwrap().abs() < 1e-10);
        }
        let phi = LegendreDual::new(Arc::new(builtin_spin()));
        let pt = embed_from_phi(&phi, &[0.0]).unwrap();
        let other = embed_from_psi(&builtin_spin(), &[0.0]).unwrap();
        assert!(pt.max_abs_diff(&other) < 1e-15);
        assert!((pt.z() - LN_2).abs() < 1e-15);
    }

    #[test]
    fn deficit_examples() {
        let spin = builtin_spin();
        let on = embed_from_psi(&spin, &[0.7]).unwrap();
        assert_eq!(deficit_psi(&spin, &on).unwrap().delta, 0.0);
        let origin = ContactPoint::new(&[0.0], &[0.0], 0.0).unwrap();
        assert!((deficit_psi(&spin, &origin).unwrap().delta - LN_2).abs() < 1e-15);
        let q = Quadratic::identity(1);
        let pt = ContactPoint::new(&[1.0], &[0.0], 0.0).unwrap();
        assert_eq!(deficit_psi(&q, &pt).unwrap().delta, 0.5);

        let q2 = Quadratic::identity(2);
        let on = embed_from_phi(&q2, &[1.0, 0.0]).unwrap();
        assert_eq!(deficit_phi(&q2, &on).unwrap().delta, 0.0);
        let pt = ContactPoint::new(&[2.0], &[1.0], 0.0).unwrap();
        assert_eq!(deficit_phi(&q, &pt).unwrap().delta, 1.5);
        let phi = LegendreDual::new(Arc::new(builtin_spin()));
        assert!((deficit_phi(&phi, &origin).unwrap().delta - LN_2).abs() < 1e-15);

        assert!(deficit_psi(&q2, &origin).is_err());
    }

    #[test]
    fn pushforward_examples() {
        let q = Quadratic::identity(1);
        assert_eq!(
            pushforward_basis_psi(&q, &[0.0]).unwrap()[0].as_slice(),
            &[1.0, 1.0, 0.0]
        );
        let spin = builtin_spin();
        assert_eq!(
            pushforward_basis_psi(&spin, &[0.0]).unwrap()[0].as_slice(),
            &[1.0, 1.0, 0.0]
        );
    }

    #[test]
    fn dual_coordinate_examples() {
        let (theta, eta) = dual_coordinates(&builtin_spin(), &[0.4]).unwrap();
        assert_eq!(theta, vec![0.4]);
        assert!((eta[0] - 0.4f64.tanh()).abs() < 1e-16);
        let q = Quadratic::diagonal(&[2.0, 5.0]).unwrap();
        let (_, eta) = dual_coordinates(&q, &[1.0, -1.0]).unwrap();
        assert_eq!(eta, vec![2.0, -5.0]);
    }

    #[test]
    fn control_point_examples() {
        let cm = ControlManifold::b_psi(Arc::new(builtin_spin()));
        let pt = control_point(&cm, &[0.0], 7.0).unwrap();
        assert_eq!(pt.as_slice(), &[0.0, 0.0, 7.0]);
        let x = [0.3];
        let pt = control_point(&cm, &x, 0.1).unwrap();
        let psi = builtin_spin();
        let d = deficit_psi(&psi, &pt).unwrap().delta;
        assert!((d - (psi.value(&x).unwrap() - 0.1)).abs() < 1e-16);
        let pt = control_point(&cm, &x, psi.value(&x).unwrap()).unwrap();
        assert_eq!(pt, embed_from_psi(&psi, &x).unwrap());

        let cm = ControlManifold::b_phi(Arc::new(Quadratic::diagonal(&[2.0]).unwrap()));
        assert_eq!(
            cm.point(&[1.5], -1.0).unwrap().as_slice(),
            &[3.0, 1.5, -1.0]
        );
        assert_eq!(cm.dim(), 2);
    }

    #[test]
    fn membership_and_constraints() {
        let emb = LegendreEmbedding::from_psi(Arc::new(builtin_spin()));
        let on = emb.embed(&[0.2]).unwrap();
        assert!(emb.contains(&on).unwrap());
        let off = ContactPoint::new(&[0.2], &[0.0], on.z()).unwrap();
        assert!(!emb.contains(&off).unwrap());
        let basis = emb.pushforward_basis(&[0.2]).unwrap();
        for d in emb.constraint_differentials(&on).unwrap() {
            assert!(d.apply(&basis[0]).unwrap().abs() < 1e-15);
        }
    }
}
