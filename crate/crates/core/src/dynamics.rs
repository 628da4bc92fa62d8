//! Contact Hamiltonian vector fields and relaxation flows toward Legendre
//! submanifolds.
//!
//! For a contact Hamiltonian `h(x, p, z)` the field is
//!
//! ```text
//! dx^a/dt = -dh/dp_a
//! dp_a/dt =  dh/dx^a + p_a dh/dz
//! dz/dt   =  h - p_a dh/dp_a
//! ```
//!
//! The relaxation Hamiltonians are `h = hhat(Delta)` with `Delta` one of the
//! two deficit functions. Their flows freeze `x` (psi side) or `p` (phi
//! side) and drive `Delta` to zero with `h` as a Lyapunov function, since
//! `dh/dt = -hhat * dhhat/dDelta`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chart::{
    contact_form_eval, p_index, x_index, z_index, ChartDim, ContactPoint, TangentVector,
};
use crate::error::{Error, Result};
use crate::legendre::{deficit_phi, deficit_psi, LegendreEmbedding};
use crate::numdiff::fd_step;
use crate::potential::{Potential, SharedPotential};

/// Default RK4 step.
pub const DEFAULT_DT: f64 = 1e-3;
/// Default tolerance for step-doubling refinement.
pub const DEFAULT_RTOL: f64 = 1e-9;
/// `hhat` may dip this far below zero (roundoff at the attractor) before the
/// point counts as outside the relaxation domain.
pub const DOMAIN_SLACK: f64 = 1e-12;
/// Analytic and numerical `dh/dt` disagreeing by more than this flag a step.
pub const DHDT_FLAG_TOL: f64 = 1e-5;

/// Partial derivatives `(dh/dx, dh/dp, dh/dz)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partials {
    pub dx: Vec<f64>,
    pub dp: Vec<f64>,
    pub dz: f64,
}

impl Partials {
    pub fn max_abs_diff(&self, other: &Partials) -> f64 {
        self.dx
            .iter()
            .zip(&other.dx)
            .chain(self.dp.iter().zip(&other.dp))
            .map(|(a, b)| (a - b).abs())
            .fold((self.dz - other.dz).abs(), f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HamiltonianKind {
    General,
    RelaxPsi,
    RelaxPhi,
}

type ValueFn = Arc<dyn Fn(&ContactPoint) -> Result<f64> + Send + Sync>;
type PartialsFn = Arc<dyn Fn(&ContactPoint) -> Result<Partials> + Send + Sync>;

/// A scalar field `h(x, p, z)` with analytic or finite-difference partials.
#[derive(Clone)]
pub struct ContactHamiltonian {
    dim: ChartDim,
    kind: HamiltonianKind,
    value: ValueFn,
    partials: Option<PartialsFn>,
}

impl fmt::Debug for ContactHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ContactHamiltonian")
            .field("dim", &self.dim)
            .field("kind", &self.kind)
            .field("analytic_partials", &self.partials.is_some())
            .finish()
    }
}

impl ContactHamiltonian {
    /// A general Hamiltonian; partials fall back to central differences.
    pub fn new<F>(dim: ChartDim, value: F) -> Self
    where
        F: Fn(&ContactPoint) -> Result<f64> + Send + Sync + 'static,
    {
        Self {
            dim,
            kind: HamiltonianKind::General,
            value: Arc::new(value),
            partials: None,
        }
    }

    pub fn with_partials<F>(mut self, partials: F) -> Self
    where
        F: Fn(&ContactPoint) -> Result<Partials> + Send + Sync + 'static,
    {
        self.partials = Some(Arc::new(partials));
        self
    }

    pub fn constant(dim: ChartDim, c: f64) -> Self {
        let n = dim.n();
        Self::new(dim, move |_| Ok(c)).with_partials(move |_| {
            Ok(Partials {
                dx: vec![0.0; n],
                dp: vec![0.0; n],
                dz: 0.0,
            })
        })
    }

    pub fn from_polynomial(poly: Polynomial) -> Self {
        let dim = poly.dim();
        let poly = Arc::new(poly);
        let pv = Arc::clone(&poly);
        Self::new(dim, move |pt| pv.value(pt)).with_partials(move |pt| poly.partials(pt))
    }

    /// `h = hhat(psi(x) - z)`.
    pub fn relax_psi(psi: SharedPotential, hhat: HHatProfile) -> Result<Self> {
        let dim = ChartDim::new(psi.dim())?;
        let (psi_v, hhat_v) = (Arc::clone(&psi), hhat.clone());
        let mut h = Self::new(dim, move |pt| {
            Ok(hhat_v.value(deficit_psi(psi_v.as_ref(), pt)?.delta))
        })
        .with_partials(move |pt| {
            let slope = hhat.derivative(deficit_psi(psi.as_ref(), pt)?.delta);
            let g = psi.gradient(pt.x())?;
            Ok(Partials {
                dx: g.iter().map(|gi| slope * gi).collect(),
                dp: vec![0.0; pt.n()],
                dz: -slope,
            })
        });
        h.kind = HamiltonianKind::RelaxPsi;
        Ok(h)
    }

    /// `h = hhat(x . p - phi(p) - z)`.
    pub fn relax_phi(phi: SharedPotential, hhat: HHatProfile) -> Result<Self> {
        let dim = ChartDim::new(phi.dim())?;
        let (phi_v, hhat_v) = (Arc::clone(&phi), hhat.clone());
        let mut h = Self::new(dim, move |pt| {
            Ok(hhat_v.value(deficit_phi(phi_v.as_ref(), pt)?.delta))
        })
        .with_partials(move |pt| {
            let slope = hhat.derivative(deficit_phi(phi.as_ref(), pt)?.delta);
            let g = phi.gradient(pt.p())?;
            Ok(Partials {
                dx: pt.p().iter().map(|p| slope * p).collect(),
                dp: pt
                    .x()
                    .iter()
                    .zip(g.iter())
                    .map(|(x, gi)| slope * (x - gi))
                    .collect(),
                dz: -slope,
            })
        });
        h.kind = HamiltonianKind::RelaxPhi;
        Ok(h)
    }

    pub fn dim(&self) -> ChartDim {
        self.dim
    }

    pub fn kind(&self) -> HamiltonianKind {
        self.kind
    }

    pub fn has_analytic_partials(&self) -> bool {
        self.partials.is_some()
    }

    pub fn value(&self, pt: &ContactPoint) -> Result<f64> {
        self.check(pt)?;
        (self.value)(pt)
    }

    /// Analytic partials when supplied, central differences otherwise.
    pub fn partials(&self, pt: &ContactPoint) -> Result<Partials> {
        self.check(pt)?;
        match &self.partials {
            Some(f) => f(pt),
            None => self.fd_partials(pt),
        }
    }

    /// Central-difference partials, regardless of analytic availability.
    pub fn fd_partials(&self, pt: &ContactPoint) -> Result<Partials> {
        self.check(pt)?;
        let n = pt.n();
        let mut probe = pt.as_slice().to_vec();
        let mut grad = vec![0.0; 2 * n + 1];
        for i in 0..probe.len() {
            let u = probe[i];
            let h = fd_step(u);
            probe[i] = u + h;
            let up = (self.value)(&ContactPoint::from_flat_unchecked(probe.clone()))?;
            probe[i] = u - h;
            let down = (self.value)(&ContactPoint::from_flat_unchecked(probe.clone()))?;
            probe[i] = u;
            grad[i] = (up - down) / (2.0 * h);
        }
        Ok(Partials {
            dx: grad[..n].to_vec(),
            dp: grad[n..2 * n].to_vec(),
            dz: grad[2 * n],
        })
    }

    fn check(&self, pt: &ContactPoint) -> Result<()> {
        if pt.n() != self.dim.n() {
            return Err(Error::DimensionMismatch {
                expected: self.dim.n(),
                found: pt.n(),
            });
        }
        Ok(())
    }
}

/// One monomial `coeff * prod_i u_i^{powers_i}` over the flat coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

/// Polynomial in the `2n + 1` chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    n: usize,
    terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn new(dim: ChartDim, terms: Vec<Monomial>) -> Result<Self> {
        if let Some(t) = terms.iter().find(|t| t.powers.len() != dim.ambient()) {
            return Err(Error::DimensionMismatch {
                expected: dim.ambient(),
                found: t.powers.len(),
            });
        }
        Ok(Self { n: dim.n(), terms })
    }

    /// `coeff * u_i * u_j` style helper: sum of single-term monomials.
    pub fn monomial(dim: ChartDim, coeff: f64, factors: &[usize]) -> Result<Self> {
        let mut powers = vec![0; dim.ambient()];
        for &i in factors {
            if i >= dim.ambient() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    dim: dim.ambient(),
                });
            }
            powers[i] += 1;
        }
        Self::new(dim, vec![Monomial { coeff, powers }])
    }

    /// Random polynomial with `terms` monomials of total degree at most
    /// `max_degree` and coefficients in `[-1, 1]`.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        dim: ChartDim,
        terms: usize,
        max_degree: u32,
    ) -> Self {
        let terms = (0..terms)
            .map(|_| {
                let mut powers = vec![0u32; dim.ambient()];
                let degree = rng.gen_range(0..=max_degree);
                for _ in 0..degree {
                    powers[rng.gen_range(0..dim.ambient())] += 1;
                }
                Monomial {
                    coeff: rng.gen_range(-1.0..1.0),
                    powers,
                }
            })
            .collect();
        Self { n: dim.n(), terms }
    }

    pub fn dim(&self) -> ChartDim {
        ChartDim::new(self.n).expect("n >= 1")
    }

    pub fn value(&self, pt: &ContactPoint) -> Result<f64> {
        let u = pt.as_slice();
        Ok(self
            .terms
            .iter()
            .map(|t| {
                t.coeff
                    * t.powers
                        .iter()
                        .zip(u)
                        .map(|(&k, v)| v.powi(k as i32))
                        .product::<f64>()
            })
            .sum())
    }

    pub fn gradient(&self, pt: &ContactPoint) -> Vec<f64> {
        let u = pt.as_slice();
        let mut g = vec![0.0; u.len()];
        for t in &self.terms {
            for i in 0..u.len() {
                if t.powers[i] == 0 {
                    continue;
                }
                let mut term = t.coeff * t.powers[i] as f64;
                for (j, (&k, v)) in t.powers.iter().zip(u).enumerate() {
                    let k = if j == i { k - 1 } else { k };
                    term *= v.powi(k as i32);
                }
                g[i] += term;
            }
        }
        g
    }

    pub fn partials(&self, pt: &ContactPoint) -> Result<Partials> {
        let n = self.n;
        let g = self.gradient(pt);
        Ok(Partials {
            dx: g[..n].to_vec(),
            dp: g[n..2 * n].to_vec(),
            dz: g[2 * n],
        })
    }
}

/// Field components from partials, following the contact Hamiltonian equations.
fn field_from_partials(pt: &ContactPoint, h: f64, d: &Partials) -> TangentVector {
    let n = pt.n();
    let mut data = vec![0.0; 2 * n + 1];
    let mut p_dhdp = 0.0;
    for a in 0..n {
        data[x_index(a)] = -d.dp[a];
        data[p_index(n, a)] = d.dx[a] + pt.p()[a] * d.dz;
        p_dhdp += pt.p()[a] * d.dp[a];
    }
    data[z_index(n)] = h - p_dhdp;
    TangentVector::from_flat_unchecked(data)
}

/// The contact Hamiltonian vector field `X_h` at `pt`.
pub fn contact_vector_field(h: &ContactHamiltonian, pt: &ContactPoint) -> Result<TangentVector> {
    let v = h.value(pt)?;
    let d = h.partials(pt)?;
    let out = field_from_partials(pt, v, &d);
    if !out.is_finite() {
        return Err(Error::NonFinite("contact vector field"));
    }
    Ok(out)
}

/// Relaxation profile `hhat(Delta)`.
#[derive(Clone)]
pub enum HHatProfile {
    /// `hhat = gamma_1 Delta + gamma_2 Delta^2 + ...` with `gamma_1 > 0`.
    Polynomial(Vec<f64>),
    /// User-supplied profile valid on `interval`.
    Custom {
        value: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        derivative: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        interval: (f64, f64),
    },
}

impl fmt::Debug for HHatProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HHatProfile::Polynomial(c) => f.debug_tuple("Polynomial").field(c).finish(),
            HHatProfile::Custom { interval, .. } => f
                .debug_struct("Custom")
                .field("interval", interval)
                .finish_non_exhaustive(),
        }
    }
}

impl HHatProfile {
    pub fn linear(gamma: f64) -> Result<Self> {
        Self::polynomial(vec![gamma])
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        match coeffs.first() {
            None => Err(Error::InvalidProfile("at least gamma_1 is required".into())),
            Some(_) if coeffs.iter().any(|c| !c.is_finite()) => {
                Err(Error::InvalidProfile("coefficients must be finite".into()))
            }
            Some(&g1) if g1 <= 0.0 => Err(Error::InvalidProfile(format!(
                "gamma_1 = {g1} but the relaxation domain requires gamma_1 > 0 (dhhat/dDelta > 0 at Delta = 0)"
            ))),
            Some(_) => Ok(HHatProfile::Polynomial(coeffs)),
        }
    }

    /// Validates `hhat(0) = 0`, `hhat > 0` and `dhhat/dDelta > 0` on samples of
    /// `interval` (the nonnegative part, where the flow is defined).
    pub fn custom<F, D>(value: F, derivative: D, interval: (f64, f64)) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let (lo, hi) = interval;
        if !(lo <= 0.0 && 0.0 < hi) {
            return Err(Error::InvalidProfile(
                "interval must contain [0, hi) with hi > 0".into(),
            ));
        }
        if value(0.0).abs() > 1e-14 {
            return Err(Error::InvalidProfile(format!(
                "hhat(0) = {} is not zero",
                value(0.0)
            )));
        }
        let top = if hi.is_finite() { hi } else { 10.0 };
        for k in 1..=200 {
            let d = top * k as f64 / 200.0 * (1.0 - 1e-9);
            if !(value(d) > 0.0) || !(derivative(d) > 0.0) {
                return Err(Error::InvalidProfile(format!(
                    "profile violates hhat > 0 or dhhat/dDelta > 0 at Delta = {d}"
                )));
            }
        }
        if !(derivative(0.0) > 0.0) {
            return Err(Error::InvalidProfile(
                "dhhat/dDelta must be positive at 0".into(),
            ));
        }
        Ok(HHatProfile::Custom {
            value: Arc::new(value),
            derivative: Arc::new(derivative),
            interval,
        })
    }

    pub fn value(&self, delta: f64) -> f64 {
        match self {
            HHatProfile::Polynomial(c) => c.iter().rev().fold(0.0, |acc, g| (acc + g) * delta),
            HHatProfile::Custom { value, .. } => value(delta),
        }
    }

    pub fn derivative(&self, delta: f64) -> f64 {
        match self {
            HHatProfile::Polynomial(c) => c
                .iter()
                .enumerate()
                .rev()
                .fold(0.0, |acc, (k, g)| acc * delta + (k as f64 + 1.0) * g),
            HHatProfile::Custom { derivative, .. } => derivative(delta),
        }
    }

    /// Leading coefficient `gamma_1 = dhhat/dDelta (0)`.
    pub fn gamma1(&self) -> f64 {
        match self {
            HHatProfile::Polynomial(c) => c[0],
            HHatProfile::Custom { derivative, .. } => derivative(0.0),
        }
    }

    /// `hhat(Delta) >= 0` and `dhhat/dDelta > 0`, with [`DOMAIN_SLACK`].
    pub fn in_domain(&self, delta: f64) -> bool {
        if let HHatProfile::Custom { interval, .. } = self {
            if delta < interval.0 - DOMAIN_SLACK || delta > interval.1 {
                return false;
            }
        }
        self.value(delta) >= -DOMAIN_SLACK && self.derivative(delta) > 0.0
    }
}

impl FromStr for HHatProfile {
    type Err = Error;

    /// `"gamma:1"` or `"gamma:1,0.05,..."` for `gamma_1, gamma_2, ...`.
    fn from_str(s: &str) -> Result<Self> {
        let body = s.trim().strip_prefix("gamma:").ok_or_else(|| {
            Error::InvalidProfile(format!("expected `gamma:<g1>[,<g2>...]`, got `{s}`"))
        })?;
        let coeffs = body
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidProfile(format!("bad coefficient `{t}` in `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::polynomial(coeffs)
    }
}

/// Per-step record stored along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub h: f64,
    /// Deficit; NaN for flows that are not relaxation flows.
    pub delta: f64,
    /// Analytic `dh/dt = h * dh/dz`.
    pub dhdt: f64,
}

/// A vector field that can be integrated, with its diagnostics.
pub trait ContactFlow: Send + Sync {
    fn dim(&self) -> usize;
    fn field(&self, pt: &ContactPoint) -> Result<TangentVector>;
    fn diagnostics(&self, pt: &ContactPoint) -> Result<StepDiagnostics>;
    /// Whether `pt` lies where the flow is defined.
    fn in_domain(&self, _pt: &ContactPoint) -> Result<bool> {
        Ok(true)
    }
}

impl ContactFlow for ContactHamiltonian {
    fn dim(&self) -> usize {
        self.dim.n()
    }
    fn field(&self, pt: &ContactPoint) -> Result<TangentVector> {
        contact_vector_field(self, pt)
    }
    fn diagnostics(&self, pt: &ContactPoint) -> Result<StepDiagnostics> {
        let h = self.value(pt)?;
        let dz = self.partials(pt)?.dz;
        Ok(StepDiagnostics {
            h,
            delta: f64::NAN,
            dhdt: h * dz,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelaxationSide {
    Psi,
    Phi,
}

/// Relaxation toward the Legendre submanifold generated by a potential.
#[derive(Debug, Clone)]
pub struct RelaxationFlow {
    pub side: RelaxationSide,
    pub potential: SharedPotential,
    pub hhat: HHatProfile,
}

impl RelaxationFlow {
    pub fn psi(psi: SharedPotential, hhat: HHatProfile) -> Self {
        Self {
            side: RelaxationSide::Psi,
            potential: psi,
            hhat,
        }
    }

    pub fn phi(phi: SharedPotential, hhat: HHatProfile) -> Self {
        Self {
            side: RelaxationSide::Phi,
            potential: phi,
            hhat,
        }
    }

    pub fn deficit(&self, pt: &ContactPoint) -> Result<f64> {
        Ok(match self.side {
            RelaxationSide::Psi => deficit_psi(self.potential.as_ref(), pt)?.delta,
            RelaxationSide::Phi => deficit_phi(self.potential.as_ref(), pt)?.delta,
        })
    }

    /// The same flow as a generic contact Hamiltonian.
    pub fn hamiltonian(&self) -> Result<ContactHamiltonian> {
        match self.side {
            RelaxationSide::Psi => {
                ContactHamiltonian::relax_psi(self.potential.clone(), self.hhat.clone())
            }
            RelaxationSide::Phi => {
                ContactHamiltonian::relax_phi(self.potential.clone(), self.hhat.clone())
            }
        }
    }

    pub fn embedding(&self) -> LegendreEmbedding {
        match self.side {
            RelaxationSide::Psi => LegendreEmbedding::from_psi(self.potential.clone()),
            RelaxationSide::Phi => LegendreEmbedding::from_phi(self.potential.clone()),
        }
    }
}

impl ContactFlow for RelaxationFlow {
    fn dim(&self) -> usize {
        self.potential.dim()
    }
    fn field(&self, pt: &ContactPoint) -> Result<TangentVector> {
        match self.side {
            RelaxationSide::Psi => relaxation_field_psi(self.potential.as_ref(), &self.hhat, pt),
            RelaxationSide::Phi => relaxation_field_phi(self.potential.as_ref(), &self.hhat, pt),
        }
    }
    fn diagnostics(&self, pt: &ContactPoint) -> Result<StepDiagnostics> {
        let delta = self.deficit(pt)?;
        let h = self.hhat.value(delta);
        Ok(StepDiagnostics {
            h,
            delta,
            dhdt: -h * self.hhat.derivative(delta),
        })
    }
    fn in_domain(&self, pt: &ContactPoint) -> Result<bool> {
        Ok(self.hhat.in_domain(self.deficit(pt)?))
    }
}

/// `dx = 0`, `dp_j = (psi_j - p_j) hhat'`, `dz = hhat`.
pub fn relaxation_field_psi(
    psi: &dyn Potential,
    hhat: &HHatProfile,
    pt: &ContactPoint,
) -> Result<TangentVector> {
    let n = pt.n();
    let delta = deficit_psi(psi, pt)?.delta;
    let slope = hhat.derivative(delta);
    let g = psi.gradient(pt.x())?;
    let mut data = vec![0.0; 2 * n + 1];
    for j in 0..n {
        data[p_index(n, j)] = (g[j] - pt.p()[j]) * slope;
    }
    data[z_index(n)] = hhat.value(delta);
    Ok(TangentVector::from_flat_unchecked(data))
}

/// `dx^i = (phi^i - x^i) hhat'`, `dp = 0`, `dz = hhat + (phi^i - x^i) p_i hhat'`.
pub fn relaxation_field_phi(
    phi: &dyn Potential,
    hhat: &HHatProfile,
    pt: &ContactPoint,
) -> Result<TangentVector> {
    let n = pt.n();
    let delta = deficit_phi(phi, pt)?.delta;
    let slope = hhat.derivative(delta);
    let g = phi.gradient(pt.p())?;
    let mut data = vec![0.0; 2 * n + 1];
    let mut dz = hhat.value(delta);
    for i in 0..n {
        let gap = g[i] - pt.x()[i];
        data[x_index(i)] = gap * slope;
        dz += gap * pt.p()[i] * slope;
    }
    data[z_index(n)] = dz;
    Ok(TangentVector::from_flat_unchecked(data))
}

/// Time-stamped states with per-step diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<ContactPoint>,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&ContactPoint> {
        self.points.last()
    }

    pub fn is_consistent(&self) -> bool {
        self.points.len() == self.times.len()
            && self.diagnostics.len() == self.times.len()
            && self.times.windows(2).all(|w| w[1] > w[0])
    }

    pub fn csv_header(n: usize) -> String {
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=n).map(|i| format!("x{i}")));
        cols.extend((1..=n).map(|i| format!("p{i}")));
        cols.extend(["z", "h", "delta", "dhdt"].map(String::from));
        cols.join(",")
    }

    /// Writes `t,x1..xn,p1..pn,z,h,delta,dhdt`, 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.points.first().map_or(1, |p| p.n());
        writeln!(w, "{}", Self::csv_header(n))?;
        for ((t, pt), d) in self.times.iter().zip(&self.points).zip(&self.diagnostics) {
            write!(w, "{t:.16e}")?;
            for v in pt.as_slice() {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w, ",{:.16e},{:.16e},{:.16e}", d.h, d.delta, d.dhdt)?;
        }
        Ok(())
    }
}

fn step_count(t_end: f64, dt: f64) -> usize {
    let raw = t_end / dt;
    let rounded = raw.round();
    if (raw - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        (rounded as usize).max(1)
    } else {
        raw.ceil() as usize
    }
}

fn axpy(y: &[f64], a: f64, x: &TangentVector) -> ContactPoint {
    ContactPoint::from_flat_unchecked(
        y.iter()
            .zip(x.as_slice())
            .map(|(yi, xi)| yi + a * xi)
            .collect(),
    )
}

fn rk4_step<F: ContactFlow + ?Sized>(flow: &F, pt: &ContactPoint, h: f64) -> Result<ContactPoint> {
    let y = pt.as_slice();
    let k1 = flow.field(pt)?;
    let k2 = flow.field(&axpy(y, 0.5 * h, &k1))?;
    let k3 = flow.field(&axpy(y, 0.5 * h, &k2))?;
    let k4 = flow.field(&axpy(y, h, &k3))?;
    let next = (0..y.len())
        .map(|i| {
            y[i] + h / 6.0
                * (k1.as_slice()[i]
                    + 2.0 * k2.as_slice()[i]
                    + 2.0 * k3.as_slice()[i]
                    + k4.as_slice()[i])
        })
        .collect();
    Ok(ContactPoint::from_flat_unchecked(next))
}

/// Fixed-step RK4 from `pt0` to `t_end`; the last step is shortened if
/// `t_end` is not a multiple of `dt`.
///
/// Aborts with [`Error::NumericalBlowup`] on non-finite states and with
/// [`Error::DomainExit`] when a state leaves the flow's domain.
pub fn integrate<F: ContactFlow + ?Sized>(
    flow: &F,
    pt0: &ContactPoint,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive and finite, got {dt}"
        )));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "t_end must be positive and finite, got {t_end}"
        )));
    }
    if pt0.n() != flow.dim() {
        return Err(Error::DimensionMismatch {
            expected: flow.dim(),
            found: pt0.n(),
        });
    }
    if !flow.in_domain(pt0)? {
        return Err(Error::DomainExit { step: 0, t: 0.0 });
    }
    let steps = step_count(t_end, dt);
    let mut times = Vec::with_capacity(steps + 1);
    let mut points = Vec::with_capacity(steps + 1);
    let mut diagnostics = Vec::with_capacity(steps + 1);
    times.push(0.0);
    diagnostics.push(flow.diagnostics(pt0)?);
    points.push(pt0.clone());
    let mut current = pt0.clone();
    for k in 1..=steps {
        let t_prev = (k - 1) as f64 * dt;
        let t = if k == steps { t_end } else { k as f64 * dt };
        let next = rk4_step(flow, &current, t - t_prev)?;
        if !next.is_finite() {
            return Err(Error::NumericalBlowup { step: k });
        }
        if !flow.in_domain(&next)? {
            return Err(Error::DomainExit { step: k, t });
        }
        diagnostics.push(flow.diagnostics(&next)?);
        times.push(t);
        points.push(next.clone());
        current = next;
    }
    Ok(Trajectory {
        times,
        points,
        diagnostics,
    })
}

/// Step-doubling refinement: halves `dt` until the endpoints at `dt` and
/// `dt/2` agree to `rtol` (relative to `max(1, |value|)`). Returns the finer
/// trajectory and its step.
pub fn integrate_adaptive<F: ContactFlow + ?Sized>(
    flow: &F,
    pt0: &ContactPoint,
    t_end: f64,
    dt: f64,
    rtol: f64,
) -> Result<(Trajectory, f64)> {
    const MAX_HALVINGS: usize = 16;
    let mut coarse = integrate(flow, pt0, t_end, dt)?;
    let mut dt = dt;
    for _ in 0..MAX_HALVINGS {
        let fine = integrate(flow, pt0, t_end, 0.5 * dt)?;
        let (a, b) = (
            coarse.last().expect("nonempty"),
            fine.last().expect("nonempty"),
        );
        let err = a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(u, v)| (u - v).abs() / v.abs().max(1.0))
            .fold(0.0, f64::max);
        dt *= 0.5;
        if err < rtol {
            return Ok((fine, dt));
        }
        coarse = fine;
    }
    Err(Error::NonConvergence {
        iterations: MAX_HALVINGS,
        residual: f64::NAN,
    })
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidProfile(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    Ok(())
}

/// Exact solution of the psi-flow for `hhat = gamma Delta`.
pub fn closed_form_psi(
    psi: &dyn Potential,
    gamma: f64,
    pt0: &ContactPoint,
    t: f64,
) -> Result<ContactPoint> {
    check_gamma(gamma)?;
    let target = crate::legendre::embed_from_psi(psi, pt0.x())?;
    relax_toward(pt0, &target, gamma, t)
}

/// Exact solution of the phi-flow for `hhat = gamma Delta`.
pub fn closed_form_phi(
    phi: &dyn Potential,
    gamma: f64,
    pt0: &ContactPoint,
    t: f64,
) -> Result<ContactPoint> {
    check_gamma(gamma)?;
    let target = crate::legendre::embed_from_phi(phi, pt0.p())?;
    relax_toward(pt0, &target, gamma, t)
}

/// `target + (pt0 - target) e^{-gamma t}` componentwise.
fn relax_toward(
    pt0: &ContactPoint,
    target: &ContactPoint,
    gamma: f64,
    t: f64,
) -> Result<ContactPoint> {
    let decay = (-gamma * t).exp();
    let data = pt0
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(a, eq)| eq + (a - eq) * decay)
        .collect();
    ContactPoint::from_flat(data)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovRecord {
    pub t: f64,
    pub h: f64,
    /// `-hhat * dhhat/dDelta`.
    pub dhdt_analytic: f64,
    /// Three-point difference of sampled `h` (centered in the interior).
    pub dhdt_numeric: f64,
    /// Analytic and numerical rates disagree by more than [`DHDT_FLAG_TOL`].
    pub flagged: bool,
}

/// Lyapunov function `h = hhat(Delta)` and its rate along `traj`.
pub fn lyapunov_diagnostics(
    flow: &RelaxationFlow,
    traj: &Trajectory,
) -> Result<Vec<LyapunovRecord>> {
    let hs = traj
        .points
        .iter()
        .map(|pt| Ok(flow.hhat.value(flow.deficit(pt)?)))
        .collect::<Result<Vec<f64>>>()?;
    let m = hs.len();
    let mut out = Vec::with_capacity(m);
    for k in 0..m {
        let delta = flow.deficit(&traj.points[k])?;
        let analytic = -flow.hhat.value(delta) * flow.hhat.derivative(delta);
        let numeric = match m {
            1 => analytic,
            2 => (hs[1] - hs[0]) / (traj.times[1] - traj.times[0]),
            _ => {
                let c = k.clamp(1, m - 2);
                three_point_derivative(
                    &traj.times[c - 1..=c + 1],
                    &hs[c - 1..=c + 1],
                    traj.times[k],
                )
            }
        };
        out.push(LyapunovRecord {
            t: traj.times[k],
            h: hs[k],
            dhdt_analytic: analytic,
            dhdt_numeric: numeric,
            flagged: (analytic - numeric).abs() > DHDT_FLAG_TOL,
        });
    }
    Ok(out)
}

/// Derivative at `t` of the quadratic through three samples.
fn three_point_derivative(ts: &[f64], ys: &[f64], t: f64) -> f64 {
    let (t0, t1, t2) = (ts[0], ts[1], ts[2]);
    ys[0] * (2.0 * t - t1 - t2) / ((t0 - t1) * (t0 - t2))
        + ys[1] * (2.0 * t - t0 - t2) / ((t1 - t0) * (t1 - t2))
        + ys[2] * (2.0 * t - t0 - t1) / ((t2 - t0) * (t2 - t1))
}

/// `true` when `h` is nonnegative and strictly decreasing at every step.
pub fn is_strict_lyapunov(records: &[LyapunovRecord]) -> bool {
    records.iter().all(|r| r.h >= -DOMAIN_SLACK) && records.windows(2).all(|w| w[1].h < w[0].h)
}

/// Tangency residual of `X_h` at the embedded point over `base`:
/// the largest of `|lambda(X_h)|` and `|d Psi_k (X_h)|`.
pub fn tangency_residual(
    emb: &LegendreEmbedding,
    h: &ContactHamiltonian,
    base: &[f64],
) -> Result<f64> {
    let pt = emb.embed(base)?;
    let v = contact_vector_field(h, &pt)?;
    let mut worst = contact_form_eval(&pt, &v)?.abs();
    for d in emb.constraint_differentials(&pt)? {
        worst = worst.max(d.apply(&v)?.abs());
    }
    Ok(worst)
}
