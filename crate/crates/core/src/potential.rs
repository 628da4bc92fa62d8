//! Strictly convex generating functions and the numerical total Legendre
//! transform.
//!
//! A [`Potential`] plays the role of `psi(x)` or `phi(p)` depending on which
//! side of the duality it is used on. Strict convexity is the caller's
//! obligation; [`validate_convexity`] checks it at sample points only.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numdiff::{central_jacobian, fd_step};

/// Where a potential may be evaluated.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    All,
    /// Open box `lower < u < upper`, componentwise.
    OpenBox {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
}

impl Domain {
    pub fn contains(&self, u: &[f64]) -> bool {
        match self {
            Domain::All => u.iter().all(|v| v.is_finite()),
            Domain::OpenBox { lower, upper } => u
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (lo, hi))| v.is_finite() && lo < v && v < hi),
        }
    }

    /// A point known to lie inside the domain, used as the default Newton start.
    pub fn interior_point(&self, n: usize) -> Vec<f64> {
        match self {
            Domain::All => vec![0.0; n],
            Domain::OpenBox { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(lo, hi)| match (lo.is_finite(), hi.is_finite()) {
                    (true, true) => 0.5 * (lo + hi),
                    (true, false) => {
                        if *lo < 0.0 {
                            0.0
                        } else {
                            lo + 1.0
                        }
                    }
                    (false, true) => {
                        if *hi > 0.0 {
                            0.0
                        } else {
                            hi - 1.0
                        }
                    }
                    (false, false) => 0.0,
                })
                .collect(),
        }
    }
}

/// A smooth, strictly convex function of `n` variables.
pub trait Potential: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn domain(&self) -> &Domain;
    fn value(&self, u: &[f64]) -> Result<f64>;
    fn gradient(&self, u: &[f64]) -> Result<DVector<f64>>;
    fn hessian(&self, u: &[f64]) -> Result<DMatrix<f64>>;

    /// Dimension and domain check shared by the evaluators.
    fn check_arg(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: u.len(),
            });
        }
        if !self.domain().contains(u) {
            return Err(Error::DomainViolation(u.to_vec()));
        }
        Ok(())
    }
}

pub type SharedPotential = Arc<dyn Potential>;

/// `psi(x) = 1/2 x^T A x`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    a: DMatrix<f64>,
    domain: Domain,
}

impl Quadratic {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() == 0 || a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows().max(1),
                found: a.ncols(),
            });
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("quadratic matrix"));
        }
        let asym = (&a - a.transpose()).abs().max();
        if asym > 1e-12 {
            return Err(Error::NotSymmetric(asym));
        }
        if a.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self {
            a,
            domain: Domain::All,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            a: DMatrix::identity(n, n),
            domain: Domain::All,
        }
    }

    pub fn diagonal(d: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Closed-form conjugate `1/2 p^T A^{-1} p`.
    pub fn conjugate(&self) -> Self {
        let inv = self
            .a
            .clone()
            .cholesky()
            .expect("validated at construction")
            .inverse();
        Self {
            a: 0.5 * (&inv + inv.transpose()),
            domain: Domain::All,
        }
    }
}

impl Potential for Quadratic {
    fn name(&self) -> &str {
        "quadratic"
    }
    fn dim(&self) -> usize {
        self.a.nrows()
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn value(&self, u: &[f64]) -> Result<f64> {
        self.check_arg(u)?;
        let v = DVector::from_column_slice(u);
        Ok(0.5 * v.dot(&(&self.a * &v)))
    }
    fn gradient(&self, u: &[f64]) -> Result<DVector<f64>> {
        self.check_arg(u)?;
        Ok(&self.a * DVector::from_column_slice(u))
    }
    fn hessian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        self.check_arg(u)?;
        Ok(self.a.clone())
    }
}

/// Cumulant of a single free spin: `psi(x) = ln cosh x + ln 2`.
#[derive(Debug, Clone)]
pub struct Spin {
    domain: Domain,
}

impl Default for Spin {
    fn default() -> Self {
        Self {
            domain: Domain::All,
        }
    }
}

impl Potential for Spin {
    fn name(&self) -> &str {
        "spin"
    }
    fn dim(&self) -> usize {
        1
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn value(&self, u: &[f64]) -> Result<f64> {
        self.check_arg(u)?;
        // ln(2 cosh x) = |x| + ln(1 + e^{-2|x|})
        let a = u[0].abs();
        Ok(a + (-2.0 * a).exp().ln_1p())
    }
    fn gradient(&self, u: &[f64]) -> Result<DVector<f64>> {
        self.check_arg(u)?;
        Ok(DVector::from_element(1, u[0].tanh()))
    }
    fn hessian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        self.check_arg(u)?;
        let sech = 1.0 / u[0].cosh();
        Ok(DMatrix::from_element(1, 1, sech * sech))
    }
}

/// Closed-form conjugate of [`Spin`]:
/// `phi(p) = 1/2 [(1 + p) ln(1 + p) + (1 - p) ln(1 - p)] - ln 2` on `(-1, 1)`.
#[derive(Debug, Clone)]
pub struct SpinConjugate {
    domain: Domain,
}

impl Default for SpinConjugate {
    fn default() -> Self {
        Self {
            domain: Domain::OpenBox {
                lower: vec![-1.0],
                upper: vec![1.0],
            },
        }
    }
}

impl Potential for SpinConjugate {
    fn name(&self) -> &str {
        "spin-conjugate"
    }
    fn dim(&self) -> usize {
        1
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn value(&self, u: &[f64]) -> Result<f64> {
        self.check_arg(u)?;
        let p = u[0];
        Ok(0.5 * ((1.0 + p) * p.ln_1p() + (1.0 - p) * (-p).ln_1p()) - std::f64::consts::LN_2)
    }
    fn gradient(&self, u: &[f64]) -> Result<DVector<f64>> {
        self.check_arg(u)?;
        Ok(DVector::from_element(1, u[0].atanh()))
    }
    fn hessian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        self.check_arg(u)?;
        Ok(DMatrix::from_element(1, 1, 1.0 / (1.0 - u[0] * u[0])))
    }
}

pub fn builtin_quadratic(a: DMatrix<f64>) -> Result<Quadratic> {
    Quadratic::new(a)
}

pub fn builtin_spin() -> Spin {
    Spin::default()
}

/// Newton settings for the Legendre solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    /// Stop once `||grad psi(x) - p||_inf <= tolerance`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Step halvings tried before giving up on an iteration.
    pub max_backtracks: usize,
}

const MAX_STEP_SCALE: f64 = 10.0;

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations: 100,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendreSolveReport {
    pub x_star: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
    pub converged: bool,
    /// Residual after the initial guess and after every accepted step.
    pub residual_history: Vec<f64>,
}

fn residual(psi: &dyn Potential, x: &[f64], p: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let r = psi.gradient(x)? - p;
    let norm = r.amax();
    Ok((r, norm))
}

fn newton_direction(h: DMatrix<f64>, r: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = h.clone().cholesky() {
        return Ok(-ch.solve(r));
    }
    h.lu()
        .solve(&(-r))
        .ok_or(Error::SingularMatrix("Legendre Newton step"))
}

/// Total Legendre transform `phi(p) = sup_x [x . p - psi(x)]` with default settings.
pub fn legendre_transform(
    psi: &dyn Potential,
    p: &[f64],
    guess: Option<&[f64]>,
) -> Result<(f64, LegendreSolveReport)> {
    legendre_transform_with(psi, p, guess, &NewtonSettings::default())
}

/// Solves `grad psi(x) = p` by damped Newton (backtracking on the residual
/// norm) and returns `phi(p) = x_* . p - psi(x_*)`.
///
/// Steps that would leave the domain of `psi` are shrunk; if no shrunk step
/// stays inside, the solve fails with [`Error::DomainEscape`].
pub fn legendre_transform_with(
    psi: &dyn Potential,
    p: &[f64],
    guess: Option<&[f64]>,
    settings: &NewtonSettings,
) -> Result<(f64, LegendreSolveReport)> {
    let n = psi.dim();
    if p.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: p.len(),
        });
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Legendre transform argument"));
    }
    let target = DVector::from_column_slice(p);
    let mut x = match guess {
        Some(g) if g.len() == n && psi.domain().contains(g) => g.to_vec(),
        Some(g) if g.len() != n => {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: g.len(),
            })
        }
        _ => psi.domain().interior_point(n),
    };
    let objective = |x: &[f64]| -> Result<f64> {
        Ok(x.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() - psi.value(x)?)
    };
    let (mut r, mut res) = residual(psi, &x, &target)?;
    let mut f = objective(&x)?;
    let mut history = vec![res];
    let mut iterations = 0;

    while res > settings.tolerance {
        if iterations == settings.max_iterations {
            return Err(Error::NonConvergence {
                iterations,
                residual: res,
            });
        }
        iterations += 1;
        // A singular Hessian means p is outside the reachable gradient range.
        let mut step =
            newton_direction(psi.hessian(&x)?, &r).map_err(|_| Error::NonConvergence {
                iterations,
                residual: res,
            })?;
        // Near-flat directions produce enormous steps; cap them so that
        // backtracking can reach a useful length.
        let cap = MAX_STEP_SCALE * (1.0 + x.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
        let len = step.amax();
        if len > cap {
            step *= cap / len;
        }
        let slope = -r.dot(&step);
        let mut alpha = 1.0;
        let mut accepted = None;
        let mut inside_seen = false;
        for _ in 0..=settings.max_backtracks {
            let trial: Vec<f64> = x
                .iter()
                .zip(step.iter())
                .map(|(xi, si)| xi + alpha * si)
                .collect();
            if psi.domain().contains(&trial) {
                inside_seen = true;
                let (tr, tres) = residual(psi, &trial, &target)?;
                let tf = objective(&trial)?;
                // Armijo ascent of the concave objective `x . p - psi(x)`
                // together with a nonincreasing residual; the objective test
                // allows for rounding once the gain is below machine precision.
                let slack = 4.0 * f64::EPSILON * f.abs().max(1.0);
                if tres <= res && tf - f >= 1e-4 * alpha * slope - slack {
                    accepted = Some((trial, tr, tres, tf));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((nx, nr, nres, nf)) => {
                x = nx;
                r = nr;
                res = nres;
                f = nf;
                history.push(res);
            }
            None if !inside_seen => return Err(Error::DomainEscape { iterations }),
            None => {
                return Err(Error::NonConvergence {
                    iterations,
                    residual: res,
                })
            }
        }
    }

    // One polishing step: kept only if it does not increase the residual.
    if res > 0.0 {
        if let Ok(step) = newton_direction(psi.hessian(&x)?, &r) {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(xi, si)| xi + si).collect();
            if psi.domain().contains(&trial) {
                if let Ok((_, tres)) = residual(psi, &trial, &target) {
                    if tres <= res {
                        x = trial;
                        res = tres;
                        history.push(res);
                    }
                }
            }
        }
    }

    let value = DVector::from_column_slice(&x).dot(&target) - psi.value(&x)?;
    Ok((
        value,
        LegendreSolveReport {
            x_star: x,
            iterations,
            residual_norm: res,
            converged: true,
            residual_history: history,
        },
    ))
}

/// Maximizer `x_*(p)` of the Legendre transform.
pub fn legendre_argmax(
    psi: &dyn Potential,
    p: &[f64],
    guess: Option<&[f64]>,
) -> Result<DVector<f64>> {
    let (_, report) = legendre_transform(psi, p, guess)?;
    Ok(DVector::from_vec(report.x_star))
}

/// `|| Hess psi(x_*) . Hess phi(p) - I ||_max`, with `Hess phi` taken as the
/// central-difference Jacobian of `x_*(p)`.
pub fn hessian_inverse_duality_check(psi: &dyn Potential, p: &[f64]) -> Result<f64> {
    let (_, report) = legendre_transform(psi, p, None)?;
    let x_star = report.x_star;
    let h_psi = psi.hessian(&x_star)?;
    let h_phi = central_jacobian(|q| legendre_argmax(psi, q, Some(&x_star)), p)?;
    let n = psi.dim();
    Ok((h_psi * h_phi - DMatrix::<f64>::identity(n, n)).abs().max())
}

/// Numerical conjugate `phi = L[psi]` evaluated through Newton solves.
///
/// The gradient is the maximizer `x_*(p)`; the Hessian is the inverse of the
/// primal Hessian at `x_*`.
#[derive(Debug, Clone)]
pub struct LegendreDual {
    primal: SharedPotential,
    domain: Domain,
    name: String,
}

impl LegendreDual {
    pub fn new(primal: SharedPotential) -> Self {
        let name = format!("dual:{}", primal.name());
        Self {
            primal,
            domain: Domain::All,
            name,
        }
    }

    /// Restricts the dual to the (known) range of the primal gradient.
    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn primal(&self) -> &SharedPotential {
        &self.primal
    }
}

impl Potential for LegendreDual {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.primal.dim()
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn value(&self, u: &[f64]) -> Result<f64> {
        self.check_arg(u)?;
        Ok(legendre_transform(self.primal.as_ref(), u, None)?.0)
    }
    fn gradient(&self, u: &[f64]) -> Result<DVector<f64>> {
        self.check_arg(u)?;
        legendre_argmax(self.primal.as_ref(), u, None)
    }
    fn hessian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        self.check_arg(u)?;
        let x = legendre_argmax(self.primal.as_ref(), u, None)?;
        let h = self.primal.hessian(x.as_slice())?;
        let inv = h
            .try_inverse()
            .ok_or(Error::SingularMatrix("primal Hessian"))?;
        Ok(0.5 * (&inv + inv.transpose()))
    }
}

/// Checks Hessian symmetry (1e-12) and positive definiteness at `samples`.
pub fn validate_convexity(psi: &dyn Potential, samples: &[Vec<f64>]) -> Result<()> {
    for u in samples {
        let h = psi.hessian(u)?;
        let asym = (&h - h.transpose()).abs().max();
        if asym > 1e-12 {
            return Err(Error::NotSymmetric(asym));
        }
        if h.cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }
    }
    Ok(())
}

/// Largest relative error between the analytic gradient and central differences.
pub fn gradient_check(psi: &dyn Potential, u: &[f64]) -> Result<f64> {
    let g = psi.gradient(u)?;
    let mut probe = u.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..u.len() {
        let h = fd_step(u[i]);
        probe[i] = u[i] + h;
        let up = psi.value(&probe)?;
        probe[i] = u[i] - h;
        let down = psi.value(&probe)?;
        probe[i] = u[i];
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - g[i]).abs() / g[i].abs().max(1.0));
    }
    Ok(worst)
}

/// Name plus parameters, as accepted by the command line and config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PotentialSpec {
    pub name: String,
    /// Diagonal of `A` for `quadratic`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diag: Option<Vec<f64>>,
    /// Full matrix `A` for `quadratic` (row major).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
}

impl PotentialSpec {
    pub fn named(name: &str) -> Self {
        Self {
            name: name.to_string(),
            ..Self::default()
        }
    }
}

pub const REGISTRY_NAMES: &[&str] = &["quadratic", "spin", "spin-dual"];

/// Looks up a potential by name.
///
/// `quadratic` takes `diag` or `matrix` (defaults to the 1x1 identity),
/// `spin` takes nothing, `spin-dual` is the numerical conjugate of `spin` on
/// `(-1, 1)`.
pub fn build_potential(spec: &PotentialSpec) -> Result<SharedPotential> {
    match spec.name.as_str() {
        "quadratic" => {
            let q = match (&spec.diag, &spec.matrix) {
                (Some(_), Some(_)) => {
                    return Err(Error::InvalidArgument(
                        "quadratic takes either `diag` or `matrix`, not both".into(),
                    ))
                }
                (Some(d), None) => Quadratic::diagonal(d)?,
                (None, Some(rows)) => {
                    let n = rows.len();
                    if rows.iter().any(|r| r.len() != n) {
                        return Err(Error::InvalidArgument(
                            "quadratic `matrix` must be square".into(),
                        ));
                    }
                    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                    Quadratic::new(DMatrix::from_row_slice(n, n, &flat))?
                }
                (None, None) => Quadratic::identity(1),
            };
            Ok(Arc::new(q))
        }
        "spin" => Ok(Arc::new(builtin_spin())),
        "spin-dual" => Ok(Arc::new(
            LegendreDual::new(Arc::new(builtin_spin())).with_domain(Domain::OpenBox {
                lower: vec![-1.0],
                upper: vec![1.0],
            }),
        )),
        other => Err(Error::InvalidArgument(format!(
            "unknown potential `{other}` (known: {})",
            REGISTRY_NAMES.join(", ")
        ))),
    }
}
