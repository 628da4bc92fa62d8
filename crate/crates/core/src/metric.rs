//! The Mrugala metric `G = dx^a (x)_s dp_a + lambda (x) lambda` on the
//! contact chart, its Levi-Civita connection, and the identities relating it
//! to Legendre submanifolds, control manifolds and relaxation flows.
//!
//! `G` is pseudo-Riemannian with signature `(n + 1, n)`. Its components
//! depend on `p` only, so all partial derivatives are analytic.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::chart::{p_index, x_index, z_index, ChartDim, CoVector, ContactPoint, TangentVector};
use crate::dynamics::{
    ContactFlow, ContactHamiltonian, Polynomial, RelaxationFlow, RelaxationSide,
};
use crate::error::{Error, Result};
use crate::legendre::{
    control_point, pushforward_basis_phi, pushforward_basis_psi, ControlKind, ControlManifold,
    EmbeddingKind,
};
use crate::numdiff::fd_step;
use crate::potential::Potential;

/// Points with `hhat` below this are treated as on the attractor.
pub const ATTRACTOR_TOL: f64 = 1e-10;
/// Laplace-Beltrami stencil step.
pub const LB_STEP: f64 = 1e-4;
/// Smallest `|det g|` accepted by [`laplace_beltrami`].
pub const LB_MIN_DET: f64 = 1e-14;

/// Metric components, inverse and analytic first derivatives at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricAtPoint {
    pub n: usize,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    /// `dg[c][(a, b)] = d g_ab / d u^c`.
    pub dg: Vec<DMatrix<f64>>,
}

impl MetricAtPoint {
    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    pub fn eval(&self, v: &TangentVector, w: &TangentVector) -> f64 {
        let (v, w) = (v.as_slice(), w.as_slice());
        let mut s = 0.0;
        for a in 0..v.len() {
            for b in 0..w.len() {
                s += self.g[(a, b)] * v[a] * w[b];
            }
        }
        s
    }

    pub fn lower(&self, v: &TangentVector) -> CoVector {
        let out = &self.g * DVector::from_column_slice(v.as_slice());
        CoVector::from_flat_unchecked(out.as_slice().to_vec())
    }

    pub fn raise(&self, w: &CoVector) -> TangentVector {
        let out = &self.g_inv * DVector::from_column_slice(w.as_slice());
        TangentVector::from_flat_unchecked(out.as_slice().to_vec())
    }

    /// `max |g g_inv - I|`.
    pub fn inverse_residual(&self) -> f64 {
        (&self.g * &self.g_inv - DMatrix::identity(self.dim(), self.dim()))
            .abs()
            .max()
    }

    /// Numbers of positive and negative eigenvalues.
    pub fn signature(&self) -> (usize, usize) {
        let eig = SymmetricEigen::new(self.g.clone());
        let neg = eig.eigenvalues.iter().filter(|&&l| l < 0.0).count();
        (self.dim() - neg, neg)
    }
}

/// The Mrugala metric at `pt`.
pub fn mrugala_metric(pt: &ContactPoint) -> Result<MetricAtPoint> {
    if !pt.is_finite() {
        return Err(Error::NonFinite("metric base point"));
    }
    let n = pt.n();
    let dim = 2 * n + 1;
    let p = pt.p();
    let z = z_index(n);
    let mut g = DMatrix::zeros(dim, dim);
    let mut g_inv = DMatrix::zeros(dim, dim);
    let mut dg = vec![DMatrix::zeros(dim, dim); dim];
    g[(z, z)] = 1.0;
    g_inv[(z, z)] = 1.0;
    for a in 0..n {
        let (xa, pa) = (x_index(a), p_index(n, a));
        for b in 0..n {
            g[(xa, x_index(b))] = p[a] * p[b];
        }
        g[(xa, pa)] = 0.5;
        g[(pa, xa)] = 0.5;
        g[(xa, z)] = -p[a];
        g[(z, xa)] = -p[a];

        g_inv[(xa, pa)] = 2.0;
        g_inv[(pa, xa)] = 2.0;
        g_inv[(pa, z)] = 2.0 * p[a];
        g_inv[(z, pa)] = 2.0 * p[a];

        let dpc = &mut dg[pa];
        for b in 0..n {
            dpc[(xa, x_index(b))] += p[b];
            dpc[(x_index(b), xa)] += p[b];
        }
        dpc[(xa, z)] = -1.0;
        dpc[(z, xa)] = -1.0;
    }
    Ok(MetricAtPoint { n, g, g_inv, dg })
}

/// `G(v, .)`.
pub fn metric_dual(pt: &ContactPoint, v: &TangentVector) -> Result<CoVector> {
    same_dim(pt, v.n())?;
    Ok(mrugala_metric(pt)?.lower(v))
}

/// The vector `v` with `G(v, .) = w`.
pub fn metric_dual_inv(pt: &ContactPoint, w: &CoVector) -> Result<TangentVector> {
    same_dim(pt, w.n())?;
    Ok(mrugala_metric(pt)?.raise(w))
}

fn same_dim(pt: &ContactPoint, n: usize) -> Result<()> {
    if pt.n() != n {
        return Err(Error::DimensionMismatch {
            expected: pt.n(),
            found: n,
        });
    }
    Ok(())
}

/// Christoffel symbols of the second kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    /// `Gamma^c_ab`.
    pub fn get(&self, c: usize, a: usize, b: usize) -> f64 {
        self.data[(c * self.dim + a) * self.dim + b]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// `Gamma^c_ab = 1/2 g^cd (d_a g_db + d_b g_da - d_d g_ab)`.
pub fn christoffel_from(m: &MetricAtPoint) -> Christoffel {
    let dim = m.dim();
    let mut lowered = vec![0.0; dim * dim * dim];
    for d in 0..dim {
        for a in 0..dim {
            for b in 0..dim {
                lowered[(d * dim + a) * dim + b] =
                    0.5 * (m.dg[a][(d, b)] + m.dg[b][(d, a)] - m.dg[d][(a, b)]);
            }
        }
    }
    let mut data = vec![0.0; dim * dim * dim];
    for c in 0..dim {
        for d in 0..dim {
            let gi = m.g_inv[(c, d)];
            if gi == 0.0 {
                continue;
            }
            for ab in 0..dim * dim {
                data[c * dim * dim + ab] += gi * lowered[d * dim * dim + ab];
            }
        }
    }
    Christoffel { dim, data }
}

pub fn christoffel(pt: &ContactPoint) -> Result<Christoffel> {
    Ok(christoffel_from(&mrugala_metric(pt)?))
}

/// Largest component of `nabla_c g_ab = d_c g_ab - Gamma^d_ca g_db - Gamma^d_cb g_ad`.
pub fn metric_compatibility_residual(pt: &ContactPoint) -> Result<f64> {
    let m = mrugala_metric(pt)?;
    let gam = christoffel_from(&m);
    let dim = m.dim();
    let mut worst: f64 = 0.0;
    for c in 0..dim {
        for a in 0..dim {
            for b in 0..dim {
                let mut v = m.dg[c][(a, b)];
                for d in 0..dim {
                    v -= gam.get(d, c, a) * m.g[(d, b)] + gam.get(d, c, b) * m.g[(a, d)];
                }
                worst = worst.max(v.abs());
            }
        }
    }
    Ok(worst)
}

/// Coordinate vector fields used in the Killing and geodesic identities
/// (indices are zero-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ChartField {
    /// `d/dz`.
    Reeb,
    /// `P^a = d/dp_a`.
    P(usize),
    /// `L_a = d/dx^a + p_a d/dz`.
    L(usize),
    /// `Q_l^k = p_l d/dp_k - x^k d/dx^l`.
    Q { k: usize, l: usize },
    /// `A^a = d/dp_a + x^a d/dz`.
    A(usize),
    /// `B_a = -d/dx^a`.
    B(usize),
    /// `x^a d/dx^a`, which is not Killing.
    EulerX(usize),
}

impl fmt::Display for ChartField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChartField::Reeb => write!(f, "R"),
            ChartField::P(a) => write!(f, "P^{}", a + 1),
            ChartField::L(a) => write!(f, "L_{}", a + 1),
            ChartField::Q { k, l } => write!(f, "Q_{}^{}", l + 1, k + 1),
            ChartField::A(a) => write!(f, "A^{}", a + 1),
            ChartField::B(a) => write!(f, "B_{}", a + 1),
            ChartField::EulerX(a) => write!(f, "x{0}d/dx{0}", a + 1),
        }
    }
}

impl ChartField {
    /// Every Killing field in dimension `n`.
    pub fn killing_fields(n: usize) -> Vec<ChartField> {
        let mut out = vec![ChartField::Reeb];
        for k in 0..n {
            for l in 0..n {
                out.push(ChartField::Q { k, l });
            }
        }
        out.extend((0..n).map(ChartField::A));
        out.extend((0..n).map(ChartField::B));
        out
    }

    /// Every geodesic field in dimension `n`.
    pub fn geodesic_fields(n: usize) -> Vec<ChartField> {
        let mut out = vec![ChartField::Reeb];
        out.extend((0..n).map(ChartField::P));
        out.extend((0..n).map(ChartField::L));
        out
    }

    fn check(&self, n: usize) -> Result<()> {
        let idx = match *self {
            ChartField::Reeb => 0,
            ChartField::Q { k, l } => k.max(l),
            ChartField::P(a)
            | ChartField::L(a)
            | ChartField::A(a)
            | ChartField::B(a)
            | ChartField::EulerX(a) => a,
        };
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, dim: n });
        }
        Ok(())
    }

    pub fn components(&self, pt: &ContactPoint) -> Result<TangentVector> {
        let n = pt.n();
        self.check(n)?;
        let mut v = vec![0.0; 2 * n + 1];
        match *self {
            ChartField::Reeb => v[z_index(n)] = 1.0,
            ChartField::P(a) => v[p_index(n, a)] = 1.0,
            ChartField::L(a) => {
                v[x_index(a)] = 1.0;
                v[z_index(n)] = pt.p()[a];
            }
            ChartField::Q { k, l } => {
                v[p_index(n, k)] += pt.p()[l];
                v[x_index(l)] -= pt.x()[k];
            }
            ChartField::A(a) => {
                v[p_index(n, a)] = 1.0;
                v[z_index(n)] = pt.x()[a];
            }
            ChartField::B(a) => v[x_index(a)] = -1.0,
            ChartField::EulerX(a) => v[x_index(a)] = pt.x()[a],
        }
        Ok(TangentVector::from_flat_unchecked(v))
    }

    /// `J[(c, a)] = d V^c / d u^a`.
    pub fn jacobian(&self, pt: &ContactPoint) -> Result<DMatrix<f64>> {
        let n = pt.n();
        self.check(n)?;
        let mut j = DMatrix::zeros(2 * n + 1, 2 * n + 1);
        match *self {
            ChartField::Reeb | ChartField::P(_) | ChartField::B(_) => {}
            ChartField::L(a) => j[(z_index(n), p_index(n, a))] = 1.0,
            ChartField::Q { k, l } => {
                j[(p_index(n, k), p_index(n, l))] += 1.0;
                j[(x_index(l), x_index(k))] -= 1.0;
            }
            ChartField::A(a) => j[(z_index(n), x_index(a))] = 1.0,
            ChartField::EulerX(a) => j[(x_index(a), x_index(a))] = 1.0,
        }
        Ok(j)
    }

    /// The contact Hamiltonian generating the field, when it is Killing.
    pub fn hamiltonian(&self, dim: ChartDim) -> Result<Option<ContactHamiltonian>> {
        let n = dim.n();
        self.check(n)?;
        let poly = match *self {
            ChartField::Reeb => return Ok(Some(ContactHamiltonian::constant(dim, 1.0))),
            ChartField::Q { k, l } => Polynomial::monomial(dim, 1.0, &[x_index(k), p_index(n, l)])?,
            ChartField::A(a) => Polynomial::monomial(dim, 1.0, &[x_index(a)])?,
            ChartField::B(a) => Polynomial::monomial(dim, 1.0, &[p_index(n, a)])?,
            ChartField::P(_) | ChartField::L(_) | ChartField::EulerX(_) => return Ok(None),
        };
        Ok(Some(ContactHamiltonian::from_polynomial(poly)))
    }
}

/// `(nabla_Z V)^c = Z^a (d_a V^c + Gamma^c_ab V^b)`.
pub fn covariant_derivative_vector(
    gam: &Christoffel,
    z: &[f64],
    v: &[f64],
    jac: &DMatrix<f64>,
) -> Vec<f64> {
    let dim = gam.dim();
    (0..dim)
        .map(|c| {
            let mut s = 0.0;
            for a in 0..dim {
                if z[a] == 0.0 {
                    continue;
                }
                let mut t = jac[(c, a)];
                for b in 0..dim {
                    t += gam.get(c, a, b) * v[b];
                }
                s += z[a] * t;
            }
            s
        })
        .collect()
}

/// `(nabla_Z w)_b = Z^a (d_a w_b - Gamma^d_ab w_d)` with `dw[(a, b)] = d_a w_b`.
pub fn covariant_derivative_covector(
    gam: &Christoffel,
    z: &[f64],
    w: &[f64],
    dw: &DMatrix<f64>,
) -> Vec<f64> {
    let dim = gam.dim();
    (0..dim)
        .map(|b| {
            let mut s = 0.0;
            for a in 0..dim {
                if z[a] == 0.0 {
                    continue;
                }
                let mut t = dw[(a, b)];
                for d in 0..dim {
                    t -= gam.get(d, a, b) * w[d];
                }
                s += z[a] * t;
            }
            s
        })
        .collect()
}

/// `(iota_Z dw)_b = Z^a (d_a w_b - d_b w_a)`.
pub fn interior_exterior_derivative(z: &[f64], dw: &DMatrix<f64>) -> Vec<f64> {
    let dim = z.len();
    (0..dim)
        .map(|b| (0..dim).map(|a| z[a] * (dw[(a, b)] - dw[(b, a)])).sum())
        .collect()
}

/// Max component of `nabla_V V`.
pub fn geodesic_residual(pt: &ContactPoint, field: ChartField) -> Result<f64> {
    let gam = christoffel(pt)?;
    let v = field.components(pt)?;
    let acc = covariant_derivative_vector(&gam, v.as_slice(), v.as_slice(), &field.jacobian(pt)?);
    Ok(acc.iter().fold(0.0, |m, c| m.max(c.abs())))
}

/// `(L_V G)_ab = V^c d_c g_ab + g_cb d_a V^c + g_ac d_b V^c`.
pub fn lie_derivative_metric(pt: &ContactPoint, field: ChartField) -> Result<DMatrix<f64>> {
    let m = mrugala_metric(pt)?;
    let v = field.components(pt)?;
    let j = field.jacobian(pt)?;
    let dim = m.dim();
    let mut out = DMatrix::zeros(dim, dim);
    for (c, vc) in v.as_slice().iter().enumerate() {
        if *vc != 0.0 {
            out += &m.dg[c] * *vc;
        }
    }
    let gj = &m.g * &j;
    out += gj.transpose() + &gj;
    Ok(out)
}

/// Max component of `L_V G`.
pub fn killing_residual(pt: &ContactPoint, field: ChartField) -> Result<f64> {
    Ok(lie_derivative_metric(pt, field)?.abs().max())
}

/// `V^flat` and its partials `d_a V_b = d_a g_bc V^c + g_bc d_a V^c`.
fn flat_with_derivative(
    m: &MetricAtPoint,
    v: &[f64],
    j: &DMatrix<f64>,
) -> (Vec<f64>, DMatrix<f64>) {
    let dim = m.dim();
    let vv = DVector::from_column_slice(v);
    let flat = (&m.g * &vv).as_slice().to_vec();
    let mut dw = (&m.g * j).transpose();
    for a in 0..dim {
        let col = &m.dg[a] * &vv;
        for b in 0..dim {
            dw[(a, b)] += col[b];
        }
    }
    (flat, dw)
}

/// Max component of `nabla_Z K^flat - 1/2 iota_Z dK^flat`.
pub fn killing_flat_identity_residual(
    pt: &ContactPoint,
    field: ChartField,
    z: &TangentVector,
) -> Result<f64> {
    same_dim(pt, z.n())?;
    let m = mrugala_metric(pt)?;
    let gam = christoffel_from(&m);
    let v = field.components(pt)?;
    let (flat, dw) = flat_with_derivative(&m, v.as_slice(), &field.jacobian(pt)?);
    let lhs = covariant_derivative_covector(&gam, z.as_slice(), &flat, &dw);
    let rhs = interior_exterior_derivative(z.as_slice(), &dw);
    Ok(lhs
        .iter()
        .zip(&rhs)
        .fold(0.0, |acc, (l, r)| acc.max((l - 0.5 * r).abs())))
}

/// A `G`-orthonormal frame `X_a` with signs `eta_a = G(X_a, X_a)`.
pub fn orthonormal_frame(pt: &ContactPoint) -> Result<(Vec<TangentVector>, Vec<f64>)> {
    let m = mrugala_metric(pt)?;
    let eig = SymmetricEigen::new(m.g.clone());
    let mut frame = Vec::with_capacity(m.dim());
    let mut eta = Vec::with_capacity(m.dim());
    for (a, &l) in eig.eigenvalues.iter().enumerate() {
        if l.abs() < 1e-300 {
            return Err(Error::SingularMatrix("metric eigenvalue"));
        }
        let col = eig.eigenvectors.column(a) / l.abs().sqrt();
        frame.push(TangentVector::from_flat_unchecked(col.as_slice().to_vec()));
        eta.push(l.signum());
    }
    Ok((frame, eta))
}

/// `eta^ab iota_{X_b} nabla_{X_a} K^flat`, the co-derivative of `K^flat`.
pub fn killing_coderivative(pt: &ContactPoint, field: ChartField) -> Result<f64> {
    let m = mrugala_metric(pt)?;
    let gam = christoffel_from(&m);
    let v = field.components(pt)?;
    let (flat, dw) = flat_with_derivative(&m, v.as_slice(), &field.jacobian(pt)?);
    let (frame, eta) = orthonormal_frame(pt)?;
    let mut s = 0.0;
    for (xa, e) in frame.iter().zip(&eta) {
        let nab = covariant_derivative_covector(&gam, xa.as_slice(), &flat, &dw);
        s += e * nab
            .iter()
            .zip(xa.as_slice())
            .map(|(w, x)| w * x)
            .sum::<f64>();
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InducedKind {
    BPsi,
    BPhi,
    APsi,
    APhi,
}

/// Components of a pulled-back metric in the natural chart of the surface.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedMetric {
    pub which: InducedKind,
    pub g: DMatrix<f64>,
}

impl InducedMetric {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }
}

fn gram(m: &MetricAtPoint, vs: &[TangentVector]) -> DMatrix<f64> {
    DMatrix::from_fn(vs.len(), vs.len(), |i, j| m.eval(&vs[i], &vs[j]))
}

/// `G` evaluated on the pushforward basis of a Legendre submanifold. It
/// equals the Hessian of the generating potential.
pub fn pullback_legendre_metric(
    potential: &dyn Potential,
    kind: EmbeddingKind,
    base: &[f64],
) -> Result<InducedMetric> {
    let (pt, basis, which) = match kind {
        EmbeddingKind::FromPsi => (
            crate::legendre::embed_from_psi(potential, base)?,
            pushforward_basis_psi(potential, base)?,
            InducedKind::APsi,
        ),
        EmbeddingKind::FromPhi => (
            crate::legendre::embed_from_phi(potential, base)?,
            pushforward_basis_phi(potential, base)?,
            InducedKind::APhi,
        ),
    };
    Ok(InducedMetric {
        which,
        g: gram(&mrugala_metric(&pt)?, &basis),
    })
}

/// Max deviation of the pulled-back metric from the potential's Hessian.
pub fn pullback_hessian_residual(
    potential: &dyn Potential,
    kind: EmbeddingKind,
    base: &[f64],
) -> Result<f64> {
    let pulled = pullback_legendre_metric(potential, kind, base)?;
    Ok((pulled.g - potential.hessian(base)?).abs().max())
}

fn induced_kind(cm: &ControlManifold) -> InducedKind {
    match cm.kind {
        ControlKind::BPsi => InducedKind::BPsi,
        ControlKind::BPhi => InducedKind::BPhi,
    }
}

/// Closed-form induced metric on a control manifold in the chart
/// `(base, z)`: `[[H + q q^T, -q], [-q^T, 1]]` with `H` the Hessian and
/// `q = grad psi` (psi side) or `q = H p` (phi side).
pub fn control_metric(cm: &ControlManifold, base: &[f64]) -> Result<InducedMetric> {
    let n = cm.potential.dim();
    let h = cm.potential.hessian(base)?;
    let q = match cm.kind {
        ControlKind::BPsi => cm.potential.gradient(base)?,
        ControlKind::BPhi => &h * DVector::from_column_slice(base),
    };
    let g = DMatrix::from_fn(n + 1, n + 1, |a, b| match (a < n, b < n) {
        (true, true) => h[(a, b)] + q[a] * q[b],
        (true, false) => -q[a],
        (false, true) => -q[b],
        (false, false) => 1.0,
    });
    Ok(InducedMetric {
        which: induced_kind(cm),
        g,
    })
}

/// Pushforwards of the chart vectors `d/dbase^a`, `d/dz` of a control manifold.
pub fn control_tangent_basis(cm: &ControlManifold, base: &[f64]) -> Result<Vec<TangentVector>> {
    let n = cm.potential.dim();
    let h = cm.potential.hessian(base)?;
    let mut out = Vec::with_capacity(n + 1);
    for a in 0..n {
        let mut v = vec![0.0; 2 * n + 1];
        match cm.kind {
            ControlKind::BPsi => {
                v[x_index(a)] = 1.0;
                for b in 0..n {
                    v[p_index(n, b)] = h[(a, b)];
                }
            }
            ControlKind::BPhi => {
                v[p_index(n, a)] = 1.0;
                for b in 0..n {
                    v[x_index(b)] = h[(a, b)];
                }
            }
        }
        out.push(TangentVector::from_flat_unchecked(v));
    }
    let mut v = vec![0.0; 2 * n + 1];
    v[z_index(n)] = 1.0;
    out.push(TangentVector::from_flat_unchecked(v));
    Ok(out)
}

/// Induced metric obtained as `J^T G J` from the embedding.
pub fn control_metric_pullback(
    cm: &ControlManifold,
    base: &[f64],
    z: f64,
) -> Result<InducedMetric> {
    let pt = control_point(cm, base, z)?;
    let basis = control_tangent_basis(cm, base)?;
    Ok(InducedMetric {
        which: induced_kind(cm),
        g: gram(&mrugala_metric(&pt)?, &basis),
    })
}

/// Restriction of the control-manifold metric to its Legendre submanifold
/// (`z = psi(x)` or `z = p . grad phi - phi`), in the base chart.
pub fn control_to_legendre_metric(cm: &ControlManifold, base: &[f64]) -> Result<InducedMetric> {
    let n = cm.potential.dim();
    let outer = control_metric(cm, base)?;
    let grad = cm.potential.gradient(base)?;
    let dz = match cm.kind {
        ControlKind::BPsi => grad,
        ControlKind::BPhi => cm.potential.hessian(base)? * DVector::from_column_slice(base),
    };
    let mut j = DMatrix::zeros(n + 1, n);
    for a in 0..n {
        j[(a, a)] = 1.0;
        j[(n, a)] = dz[a];
    }
    let which = match cm.kind {
        ControlKind::BPsi => InducedKind::APsi,
        ControlKind::BPhi => InducedKind::APhi,
    };
    Ok(InducedMetric {
        which,
        g: j.transpose() * outer.g * j,
    })
}

type ScalarFn = Arc<dyn Fn(&[f64], f64) -> Result<f64> + Send + Sync>;
type GradientFn = Arc<dyn Fn(&[f64], f64) -> Result<Vec<f64>> + Send + Sync>;

/// A scalar field on a control manifold in the chart `(base, z)`. The
/// gradient is analytic when supplied and central differences otherwise.
#[derive(Clone)]
pub struct ControlScalar {
    value: ScalarFn,
    gradient: Option<GradientFn>,
}

impl fmt::Debug for ControlScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlScalar")
            .field("analytic_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl ControlScalar {
    pub fn new<F>(value: F) -> Self
    where
        F: Fn(&[f64], f64) -> Result<f64> + Send + Sync + 'static,
    {
        Self {
            value: Arc::new(value),
            gradient: None,
        }
    }

    pub fn with_gradient<G>(mut self, gradient: G) -> Self
    where
        G: Fn(&[f64], f64) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    /// The deficit restricted to `cm`: `psi(x) - z` on `B_psi`,
    /// `p . grad phi(p) - phi(p) - z` on `B_phi`.
    pub fn deficit(cm: &ControlManifold) -> Self {
        let pot = Arc::clone(&cm.potential);
        let pot_g = Arc::clone(&cm.potential);
        match cm.kind {
            ControlKind::BPsi => {
                Self::new(move |x, z| Ok(pot.value(x)? - z)).with_gradient(move |x, _| {
                    let mut g = pot_g.gradient(x)?.as_slice().to_vec();
                    g.push(-1.0);
                    Ok(g)
                })
            }
            ControlKind::BPhi => Self::new(move |p, z| {
                let g = pot.gradient(p)?;
                Ok(g.dot(&DVector::from_column_slice(p)) - pot.value(p)? - z)
            })
            .with_gradient(move |p, _| {
                let h = pot_g.hessian(p)?;
                let mut g = (h * DVector::from_column_slice(p)).as_slice().to_vec();
                g.push(-1.0);
                Ok(g)
            }),
        }
    }

    pub fn value(&self, base: &[f64], z: f64) -> Result<f64> {
        (self.value)(base, z)
    }

    pub fn gradient(&self, base: &[f64], z: f64) -> Result<Vec<f64>> {
        if let Some(g) = &self.gradient {
            return g(base, z);
        }
        let mut u: Vec<f64> = base.to_vec();
        u.push(z);
        let mut out = Vec::with_capacity(u.len());
        let last = u.len() - 1;
        for i in 0..u.len() {
            let h = fd_step(u[i]);
            let mut up = u.clone();
            up[i] += h;
            let mut down = u.clone();
            down[i] -= h;
            let fp = (self.value)(&up[..last], up[last])?;
            let fm = (self.value)(&down[..last], down[last])?;
            out.push((fp - fm) / (2.0 * h));
        }
        Ok(out)
    }
}

/// `sqrt|det g| g^ab d_b f` at `(base, z)`.
fn lb_flux(cm: &ControlManifold, f: &ControlScalar, base: &[f64], z: f64) -> Result<Vec<f64>> {
    let g = control_metric(cm, base)?.g;
    let det = g.determinant();
    if !(det.abs() > LB_MIN_DET) {
        return Err(Error::NearSingularMetric(det));
    }
    let inv = g.try_inverse().ok_or(Error::NearSingularMetric(det))?;
    let df = DVector::from_vec(f.gradient(base, z)?);
    Ok((inv * df * det.abs().sqrt()).as_slice().to_vec())
}

/// Coordinate Laplace-Beltrami operator
/// `(1/sqrt|g|) d_a (sqrt|g| g^ab d_b f)` of the induced control-manifold
/// metric. The metric is analytic; the outer divergence uses central
/// differences with one Richardson extrapolation.
pub fn laplace_beltrami(
    cm: &ControlManifold,
    f: &ControlScalar,
    base: &[f64],
    z: f64,
) -> Result<f64> {
    let n = cm.potential.dim();
    if base.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: base.len(),
        });
    }
    let g = control_metric(cm, base)?.g;
    let det = g.determinant();
    if !(det.abs() > LB_MIN_DET) {
        return Err(Error::NearSingularMetric(det));
    }
    let mut u: Vec<f64> = base.to_vec();
    u.push(z);
    let central = |a: usize, h: f64| -> Result<f64> {
        let mut up = u.clone();
        up[a] += h;
        let mut down = u.clone();
        down[a] -= h;
        let fp = lb_flux(cm, f, &up[..n], up[n])?[a];
        let fm = lb_flux(cm, f, &down[..n], down[n])?[a];
        Ok((fp - fm) / (2.0 * h))
    };
    let mut div = 0.0;
    for a in 0..=n {
        let coarse = central(a, LB_STEP)?;
        let fine = central(a, 0.5 * LB_STEP)?;
        div += (4.0 * fine - coarse) / 3.0;
    }
    Ok(div / det.abs().sqrt())
}

/// Tangent vectors `Y_j` of the psi side (`d/dx^j + psi_jb d/dp_b + psi_j d/dz`,
/// evaluated at `x` of `pt`) or `Y^i` of the phi side
/// (`phi^ib d/dx^b + d/dp_i + p_b phi^ib d/dz`, at `p` of `pt`).
pub fn tangent_basis(
    potential: &dyn Potential,
    kind: EmbeddingKind,
    pt: &ContactPoint,
) -> Result<Vec<TangentVector>> {
    match kind {
        EmbeddingKind::FromPsi => pushforward_basis_psi(potential, pt.x()),
        EmbeddingKind::FromPhi => pushforward_basis_phi(potential, pt.p()),
    }
}

/// Metric quantities along a relaxation flow, computed and in closed form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharacterizationReport {
    pub side: RelaxationSide,
    pub h: f64,
    pub g_xh_r: f64,
    pub g_xh_xh: f64,
    /// `X_h / |X_h|`.
    pub u: Vec<f64>,
    /// `nabla_U R^flat` from the Christoffel symbols.
    pub nabla_u_rflat: Vec<f64>,
    pub nabla_u_rflat_closed: Vec<f64>,
    /// `1/2 iota_U d lambda`.
    pub half_iota_u_dlambda: Vec<f64>,
    pub g_y_r: Vec<f64>,
    pub g_y_r_closed: Vec<f64>,
    pub g_u_y: Vec<f64>,
    pub g_u_y_closed: Vec<f64>,
    pub g_y_y: Vec<Vec<f64>>,
    pub g_y_y_closed: Vec<Vec<f64>>,
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

impl CharacterizationReport {
    /// `|G(X_h, R) - h|` and `|G(X_h, X_h) - h^2|`.
    pub fn norm_residual(&self) -> f64 {
        (self.g_xh_r - self.h)
            .abs()
            .max((self.g_xh_xh - self.h * self.h).abs())
    }

    /// Christoffel-based `nabla_U R^flat` against both closed forms.
    pub fn connection_residual(&self) -> f64 {
        max_diff(&self.nabla_u_rflat, &self.nabla_u_rflat_closed)
            .max(max_diff(&self.nabla_u_rflat, &self.half_iota_u_dlambda))
    }

    pub fn inner_product_residual(&self) -> f64 {
        let yy = self
            .g_y_y
            .iter()
            .zip(&self.g_y_y_closed)
            .fold(0.0_f64, |m, (a, b)| m.max(max_diff(a, b)));
        yy.max(max_diff(&self.g_u_y, &self.g_u_y_closed))
            .max(max_diff(&self.g_y_r, &self.g_y_r_closed))
    }

    pub fn max_residual(&self) -> f64 {
        self.norm_residual()
            .max(self.connection_residual())
            .max(self.inner_product_residual())
    }
}

/// Evaluates the metric characterization of a relaxation flow at `pt`.
///
/// Refuses points with `hhat < ATTRACTOR_TOL`, where `U_h` is undefined.
pub fn characterization_report(
    flow: &RelaxationFlow,
    pt: &ContactPoint,
) -> Result<CharacterizationReport> {
    let n = pt.n();
    let diag = flow.diagnostics(pt)?;
    let h = diag.h;
    if !(h >= ATTRACTOR_TOL) {
        return Err(Error::OnAttractor(h));
    }
    let slope = flow.hhat.derivative(diag.delta);
    let m = mrugala_metric(pt)?;
    let gam = christoffel_from(&m);
    let xh = flow.field(pt)?;
    let reeb = ChartField::Reeb.components(pt)?;
    let g_xh_r = m.eval(&xh, &reeb);
    let g_xh_xh = m.eval(&xh, &xh);
    let norm = g_xh_xh.abs().sqrt();
    let u: Vec<f64> = xh.as_slice().iter().map(|c| c / norm).collect();
    let uv = TangentVector::from_flat_unchecked(u.clone());

    let (rflat, drflat) =
        flat_with_derivative(&m, reeb.as_slice(), &DMatrix::zeros(2 * n + 1, 2 * n + 1));
    let nabla = covariant_derivative_covector(&gam, &u, &rflat, &drflat);
    let half_iota: Vec<f64> = interior_exterior_derivative(&u, &drflat)
        .iter()
        .map(|c| 0.5 * c)
        .collect();

    let kind = match flow.side {
        RelaxationSide::Psi => EmbeddingKind::FromPsi,
        RelaxationSide::Phi => EmbeddingKind::FromPhi,
    };
    let pot = flow.potential.as_ref();
    let ys = tangent_basis(pot, kind, pt)?;
    let g_y_r: Vec<f64> = ys.iter().map(|y| m.eval(y, &reeb)).collect();
    let g_u_y: Vec<f64> = ys.iter().map(|y| m.eval(&uv, y)).collect();
    let g_y_y: Vec<Vec<f64>> = ys
        .iter()
        .map(|a| ys.iter().map(|b| m.eval(a, b)).collect())
        .collect();

    let mut nabla_closed = vec![0.0; 2 * n + 1];
    let (g_y_r_closed, g_u_y_closed, g_y_y_closed) = match flow.side {
        RelaxationSide::Psi => {
            let grad = pot.gradient(pt.x())?;
            let hess = pot.hessian(pt.x())?;
            let gap: Vec<f64> = (0..n).map(|j| grad[j] - pt.p()[j]).collect();
            for j in 0..n {
                nabla_closed[x_index(j)] = -0.5 * gap[j] * slope / h;
            }
            let uy = gap.iter().map(|g| g * (1.0 + slope / (2.0 * h))).collect();
            let yy = (0..n)
                .map(|a| (0..n).map(|b| hess[(a, b)] + gap[a] * gap[b]).collect())
                .collect();
            (gap, uy, yy)
        }
        RelaxationSide::Phi => {
            let grad = pot.gradient(pt.p())?;
            let hess = pot.hessian(pt.p())?;
            let gap: Vec<f64> = (0..n).map(|i| grad[i] - pt.x()[i]).collect();
            for i in 0..n {
                nabla_closed[p_index(n, i)] = 0.5 * gap[i] * slope / h;
            }
            let uy = gap.iter().map(|g| 0.5 * g * slope / h).collect();
            let yy = (0..n)
                .map(|a| (0..n).map(|b| hess[(a, b)]).collect())
                .collect();
            (vec![0.0; n], uy, yy)
        }
    };

    Ok(CharacterizationReport {
        side: flow.side,
        h,
        g_xh_r,
        g_xh_xh,
        u,
        nabla_u_rflat: nabla,
        nabla_u_rflat_closed: nabla_closed,
        half_iota_u_dlambda: half_iota,
        g_y_r,
        g_y_r_closed,
        g_u_y,
        g_u_y_closed,
        g_y_y,
        g_y_y_closed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{contact_form, contact_form_eval};
    use crate::dynamics::{contact_vector_field, HHatProfile};
    use crate::legendre::embed_from_psi;
    use crate::potential::{builtin_spin, LegendreDual, Quadratic, SharedPotential};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut ChaCha8Rng, n: usize) -> ContactPoint {
        let data = (0..2 * n + 1).map(|_| rng.gen_range(-2.0..2.0)).collect();
        ContactPoint::from_flat(data).unwrap()
    }

    fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> TangentVector {
        TangentVector::from_flat((0..2 * n + 1).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap()
    }

    #[test]
    fn metric_at_origin_momentum() {
        let pt = ContactPoint::new(&[0.7], &[0.0], -1.0).unwrap();
        let m = mrugala_metric(&pt).unwrap();
        let expected =
            DMatrix::from_row_slice(3, 3, &[0.0, 0.5, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(m.g, expected);
        assert_eq!(m.signature(), (2, 1));
    }

    #[test]
    fn metric_invariants_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=3 {
            for _ in 0..50 {
                let pt = random_point(&mut rng, n);
                let m = mrugala_metric(&pt).unwrap();
                assert_eq!(m.g, m.g.transpose());
                assert!(m.inverse_residual() < 1e-12);
                assert_eq!(m.signature(), (n + 1, n));
                let v = random_vector(&mut rng, n);
                let r = ChartField::Reeb.components(&pt).unwrap();
                assert!((m.eval(&v, &r) - contact_form_eval(&pt, &v).unwrap()).abs() < 1e-12);
                assert!(m.raise(&m.lower(&v)).max_abs_diff(&v) < 1e-12);
                // FD of the analytic derivatives
                for c in 0..2 * n + 1 {
                    let h = 1e-6;
                    let mut up = pt.as_slice().to_vec();
                    up[c] += h;
                    let mut dn = pt.as_slice().to_vec();
                    dn[c] -= h;
                    let gu = mrugala_metric(&ContactPoint::from_flat(up).unwrap())
                        .unwrap()
                        .g;
                    let gd = mrugala_metric(&ContactPoint::from_flat(dn).unwrap())
                        .unwrap()
                        .g;
                    assert!(((gu - gd) / (2.0 * h) - &m.dg[c]).abs().max() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn duals_of_reeb_and_p() {
        let pt = ContactPoint::new(&[0.2, -0.4], &[1.5, -0.5], 0.3).unwrap();
        let r = ChartField::Reeb.components(&pt).unwrap();
        assert!(
            metric_dual(&pt, &r)
                .unwrap()
                .max_abs_diff(&contact_form(&pt))
                < 1e-15
        );
        let p1 = ChartField::P(0).components(&pt).unwrap();
        let w = metric_dual(&pt, &p1).unwrap();
        assert_eq!(w.as_slice(), &[0.5, 0.0, 0.0, 0.0, 0.0]);
        let back = metric_dual_inv(&pt, &w).unwrap();
        assert!(back.max_abs_diff(&p1) < 1e-12);
    }

    #[test]
    fn connection_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 1..=2 {
            for _ in 0..20 {
                let pt = random_point(&mut rng, n);
                let gam = christoffel(&pt).unwrap();
                for c in 0..2 * n + 1 {
                    for a in 0..2 * n + 1 {
                        for b in 0..2 * n + 1 {
                            assert_eq!(gam.get(c, a, b), gam.get(c, b, a));
                        }
                    }
                }
                assert!(metric_compatibility_residual(&pt).unwrap() < 1e-10);
                for f in ChartField::geodesic_fields(n) {
                    assert!(geodesic_residual(&pt, f).unwrap() < 1e-10, "{f}");
                }
            }
        }
    }

    #[test]
    fn killing_fields_and_hamiltonians() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=2 {
            let dim = ChartDim::new(n).unwrap();
            for _ in 0..20 {
                let pt = random_point(&mut rng, n);
                for f in ChartField::killing_fields(n) {
                    assert!(killing_residual(&pt, f).unwrap() <= 1e-12, "{f}");
                    let h = f.hamiltonian(dim).unwrap().unwrap();
                    let xh = contact_vector_field(&h, &pt).unwrap();
                    assert!(xh.max_abs_diff(&f.components(&pt).unwrap()) < 1e-12, "{f}");
                    assert!(killing_coderivative(&pt, f).unwrap().abs() < 1e-9, "{f}");
                    let z = random_vector(&mut rng, n);
                    assert!(
                        killing_flat_identity_residual(&pt, f, &z).unwrap() < 1e-8,
                        "{f}"
                    );
                }
            }
        }
        let pt = ContactPoint::new(&[0.8], &[0.6], 0.1).unwrap();
        assert_eq!(killing_residual(&pt, ChartField::Reeb).unwrap(), 0.0);
        assert!(killing_residual(&pt, ChartField::EulerX(0)).unwrap() > 1e-3);
        assert!(ChartField::P(3).components(&pt).is_err());
    }

    #[test]
    fn legendre_pullbacks_are_hessians() {
        let spin = builtin_spin();
        let m = pullback_legendre_metric(&spin, EmbeddingKind::FromPsi, &[0.0]).unwrap();
        assert!((m.g[(0, 0)] - 1.0).abs() < 1e-15);
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let q = Quadratic::new(a.clone()).unwrap();
        for base in [[0.0, 0.0], [1.0, -2.0], [-0.5, 3.0]] {
            let m = pullback_legendre_metric(&q, EmbeddingKind::FromPsi, &base).unwrap();
            assert!((m.g - &a).abs().max() < 1e-12);
            assert!(pullback_hessian_residual(&q, EmbeddingKind::FromPhi, &base).unwrap() < 1e-12);
        }
    }

    #[test]
    fn control_metric_examples() {
        let q = ControlManifold::b_psi(Arc::new(Quadratic::identity(1)));
        let m = control_metric(&q, &[0.0]).unwrap();
        assert_eq!(m.g, DMatrix::identity(2, 2));
        let spin = ControlManifold::b_psi(Arc::new(builtin_spin()));
        let m = control_metric(&spin, &[1.0]).unwrap();
        let (t, s2) = (1.0f64.tanh(), 1.0 / 1.0f64.cosh().powi(2));
        let expected = DMatrix::from_row_slice(2, 2, &[s2 + t * t, -t, -t, 1.0]);
        assert!((m.g - expected).abs().max() < 1e-15);
        let pot: SharedPotential =
            Arc::new(Quadratic::new(DMatrix::from_row_slice(2, 2, &[1.5, 0.2, 0.2, 0.7])).unwrap());
        for cm in [
            ControlManifold::b_psi(pot.clone()),
            ControlManifold::b_phi(pot.clone()),
        ] {
            let base = [0.4, -1.1];
            let a = control_metric(&cm, &base).unwrap();
            let b = control_metric_pullback(&cm, &base, 0.7).unwrap();
            assert!((a.g.clone() - b.g).abs().max() < 1e-12);
            assert!((a.g.determinant() - pot.hessian(&base).unwrap().determinant()).abs() < 1e-12);
            let leg = control_to_legendre_metric(&cm, &base).unwrap();
            assert!((leg.g - pot.hessian(&base).unwrap()).abs().max() < 1e-12);
        }
    }

    #[test]
    fn deficits_are_harmonic() {
        let spin = ControlManifold::b_psi(Arc::new(builtin_spin()));
        let f = ControlScalar::deficit(&spin);
        for (x, z) in [(0.0, 0.0), (0.7, -0.3), (-1.2, 1.5)] {
            assert!(laplace_beltrami(&spin, &f, &[x], z).unwrap().abs() < 1e-4);
        }
        let dual: SharedPotential = Arc::new(Quadratic::diagonal(&[2.0, 0.5]).unwrap().conjugate());
        let cm = ControlManifold::b_phi(dual);
        let f = ControlScalar::deficit(&cm);
        assert!(laplace_beltrami(&cm, &f, &[0.3, -0.8], 0.4).unwrap().abs() < 1e-4);
        let z2 = ControlScalar::new(|_, z| Ok(z * z));
        let lb = laplace_beltrami(&spin, &z2, &[0.5], 1.0).unwrap();
        // 2 cosh^2(x) (1 + z) for the spin control manifold
        assert!(
            (lb - 2.0 * 0.5f64.cosh().powi(2) * 2.0).abs() < 1e-5,
            "{lb}"
        );
    }

    #[test]
    fn spin_dual_control_manifold_is_harmonic() {
        let dual: SharedPotential =
            Arc::new(LegendreDual::new(Arc::new(builtin_spin())).with_domain(
                crate::potential::Domain::OpenBox {
                    lower: vec![-1.0],
                    upper: vec![1.0],
                },
            ));
        let cm = ControlManifold::b_phi(dual);
        let f = ControlScalar::deficit(&cm);
        assert!(laplace_beltrami(&cm, &f, &[0.3], 0.2).unwrap().abs() < 1e-4);
    }

    #[test]
    fn tangent_basis_properties() {
        let q = Quadratic::identity(1);
        let pt = embed_from_psi(&q, &[0.0]).unwrap();
        let y = tangent_basis(&q, EmbeddingKind::FromPsi, &pt).unwrap();
        assert_eq!(y[0].as_slice(), &[1.0, 1.0, 0.0]);
        let psi: SharedPotential =
            Arc::new(Quadratic::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap());
        let emb = crate::legendre::LegendreEmbedding::from_psi(psi.clone());
        let pt = emb.embed(&[0.3, -0.6]).unwrap();
        let ys = tangent_basis(psi.as_ref(), EmbeddingKind::FromPsi, &pt).unwrap();
        let dpsi = emb.constraint_differentials(&pt).unwrap();
        for y in &ys {
            assert!(contact_form_eval(&pt, y).unwrap().abs() < 1e-12);
            for d in &dpsi {
                assert!(d.apply(y).unwrap().abs() < 1e-10);
            }
        }
        // Y^a = S^ab Y_b with S the inverse Hessian
        let phi = Quadratic::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]))
            .unwrap()
            .conjugate();
        let yphi = tangent_basis(&phi, EmbeddingKind::FromPhi, &pt).unwrap();
        let s = phi.hessian(pt.p()).unwrap();
        for a in 0..2 {
            let combo: Vec<f64> = (0..5)
                .map(|c| s[(a, 0)] * ys[0].as_slice()[c] + s[(a, 1)] * ys[1].as_slice()[c])
                .collect();
            assert!(max_diff(&combo, yphi[a].as_slice()) < 1e-12);
        }
    }

    #[test]
    fn characterization_on_both_sides() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spin: SharedPotential = Arc::new(builtin_spin());
        let hhat = HHatProfile::polynomial(vec![1.2, 0.3]).unwrap();
        let psi_flow = RelaxationFlow::psi(spin.clone(), hhat.clone());
        for _ in 0..100 {
            let x = rng.gen_range(-2.0..2.0);
            let pt = ContactPoint::new(
                &[x],
                &[rng.gen_range(-1.0..1.0)],
                spin.value(&[x]).unwrap() - rng.gen_range(0.1..2.0),
            )
            .unwrap();
            let r = characterization_report(&psi_flow, &pt).unwrap();
            assert!(r.norm_residual() < 1e-10);
            assert!(r.connection_residual() < 1e-8);
            assert!(r.inner_product_residual() < 1e-10);
        }
        let cm = ControlManifold::b_psi(spin.clone());
        let r = characterization_report(&psi_flow, &cm.point(&[0.4], -1.0).unwrap()).unwrap();
        assert!(r.g_y_r[0].abs() < 1e-15);

        let q: SharedPotential = Arc::new(Quadratic::diagonal(&[0.5, 2.0]).unwrap());
        let phi_flow = RelaxationFlow::phi(q.clone(), hhat.clone());
        for _ in 0..50 {
            let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let xp = x[0] * p[0] + x[1] * p[1];
            let pt = ContactPoint::new(&x, &p, xp - q.value(&p).unwrap() - rng.gen_range(0.1..2.0))
                .unwrap();
            let r = characterization_report(&phi_flow, &pt).unwrap();
            assert!(r.max_residual() < 1e-8, "{r:?}");
            assert!(r.g_y_r.iter().all(|v| v.abs() < 1e-12));
        }

        let on = embed_from_psi(spin.as_ref(), &[0.2]).unwrap();
        assert!(matches!(
            characterization_report(&psi_flow, &on),
            Err(Error::OnAttractor(_))
        ));
        // null length of X_h on the submanifold
        let xh = psi_flow.field(&on).unwrap();
        assert!(mrugala_metric(&on).unwrap().eval(&xh, &xh).abs() < 1e-15);
    }
}
