//! Exponential families on finite state spaces and the free spin.
//!
//! A family `P_theta(i) = exp(C_i + theta . F_i - psi(theta))` has the
//! cumulant `psi` as a strictly convex potential, so it plugs directly into
//! the Legendre and relaxation machinery. All expectations are exact sums.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::sync::Arc;

use crate::chart::ContactPoint;
use crate::dynamics::{integrate, HHatProfile, RelaxationFlow, DEFAULT_DT};
use crate::error::{Error, Result};
use crate::potential::{builtin_spin, legendre_transform, Domain, Potential};

/// `exp(C_i + theta . F_i - psi(theta))` over finitely many states.
#[derive(Debug, Clone)]
pub struct FiniteExponentialFamily {
    name: String,
    base: Vec<f64>,
    stats: Vec<Vec<f64>>,
    n: usize,
    domain: Domain,
}

impl FiniteExponentialFamily {
    /// `base[i] = C_i`, `stats[i] = F(i)`. The statistics must affinely span
    /// `R^n`, otherwise the Fisher matrix is singular.
    pub fn new(name: &str, base: Vec<f64>, stats: Vec<Vec<f64>>) -> Result<Self> {
        if stats.len() < 2 || base.len() != stats.len() {
            return Err(Error::InvalidArgument(format!(
                "need at least two states with one base value each, got {} states and {} base values",
                stats.len(),
                base.len()
            )));
        }
        let n = stats[0].len();
        if n == 0 {
            return Err(Error::ZeroDimension);
        }
        if let Some(s) = stats.iter().find(|s| s.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: s.len(),
            });
        }
        if base
            .iter()
            .chain(stats.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("family data"));
        }
        let fam = Self {
            name: name.to_string(),
            base,
            stats,
            n,
            domain: Domain::All,
        };
        let g = fam.fisher_matrix(&vec![0.0; n])?;
        if g.cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(fam)
    }

    /// States `sigma = +1, -1` with `F = sigma`, `C = 0`; the cumulant is
    /// `ln cosh theta + ln 2`.
    pub fn spin() -> Self {
        Self::new("spin-family", vec![0.0, 0.0], vec![vec![1.0], vec![-1.0]])
            .expect("valid spin family")
    }

    /// States are `(E, N)` pairs with `F = (E, N)` and `C = 0`, so that
    /// `E[ln P]` is minus the entropy.
    pub fn grand_canonical(states: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            "grand-canonical",
            vec![0.0; states.len()],
            states.iter().map(|&(e, n)| vec![e, n]).collect(),
        )
    }

    pub fn num_states(&self) -> usize {
        self.stats.len()
    }

    pub fn statistics(&self, i: usize) -> &[f64] {
        &self.stats[i]
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: theta.len(),
            });
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("natural parameter"));
        }
        Ok(())
    }

    fn exponents(&self, theta: &[f64]) -> Vec<f64> {
        self.base
            .iter()
            .zip(&self.stats)
            .map(|(c, f)| c + f.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    /// Log-sum-exp cumulant.
    pub fn cumulant(&self, theta: &[f64]) -> Result<f64> {
        self.check_theta(theta)?;
        let e = self.exponents(theta);
        let m = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(m + e.iter().map(|v| (v - m).exp()).sum::<f64>().ln())
    }

    pub fn probabilities(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let psi = self.cumulant(theta)?;
        Ok(self
            .exponents(theta)
            .iter()
            .map(|e| (e - psi).exp())
            .collect())
    }

    pub fn log_probabilities(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let psi = self.cumulant(theta)?;
        Ok(self.exponents(theta).iter().map(|e| e - psi).collect())
    }

    /// `E_theta[f(i)]` by exact summation.
    pub fn expectation<F: Fn(usize) -> f64>(&self, theta: &[f64], f: F) -> Result<f64> {
        Ok(self
            .probabilities(theta)?
            .iter()
            .enumerate()
            .map(|(i, p)| p * f(i))
            .sum())
    }

    /// `eta = E[F]`.
    pub fn mean(&self, theta: &[f64]) -> Result<DVector<f64>> {
        let probs = self.probabilities(theta)?;
        let mut eta = DVector::zeros(self.n);
        for (p, f) in probs.iter().zip(&self.stats) {
            for a in 0..self.n {
                eta[a] += p * f[a];
            }
        }
        Ok(eta)
    }

    /// Scores `d ln P(i) / d theta^a = F_a(i) - eta_a`, one row per state.
    pub fn scores(&self, theta: &[f64]) -> Result<Vec<Vec<f64>>> {
        let eta = self.mean(theta)?;
        Ok(self
            .stats
            .iter()
            .map(|f| (0..self.n).map(|a| f[a] - eta[a]).collect())
            .collect())
    }

    /// `g_ab = E[s_a s_b]`.
    pub fn fisher_matrix(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        let probs = self.probabilities(theta)?;
        let s = self.scores(theta)?;
        Ok(DMatrix::from_fn(self.n, self.n, |a, b| {
            probs.iter().zip(&s).map(|(p, si)| p * si[a] * si[b]).sum()
        }))
    }

    /// `kappa_abc = E[s_a s_b s_c]`, flattened as `(a * n + b) * n + c`.
    pub fn third_cumulant(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let probs = self.probabilities(theta)?;
        let s = self.scores(theta)?;
        let n = self.n;
        let mut k = vec![0.0; n * n * n];
        for (p, si) in probs.iter().zip(&s) {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        k[(a * n + b) * n + c] += p * si[a] * si[b] * si[c];
                    }
                }
            }
        }
        Ok(k)
    }

    /// `-sum_i P_i ln P_i`.
    pub fn entropy(&self, theta: &[f64]) -> Result<f64> {
        let lp = self.log_probabilities(theta)?;
        Ok(-lp.iter().map(|l| l.exp() * l).sum::<f64>())
    }
}

impl Potential for FiniteExponentialFamily {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn value(&self, u: &[f64]) -> Result<f64> {
        self.cumulant(u)
    }
    fn gradient(&self, u: &[f64]) -> Result<DVector<f64>> {
        self.mean(u)
    }
    /// Raw second moments minus `eta eta^T`.
    fn hessian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        let probs = self.probabilities(u)?;
        let eta = self.mean(u)?;
        Ok(DMatrix::from_fn(self.n, self.n, |a, b| {
            probs
                .iter()
                .zip(&self.stats)
                .map(|(p, f)| p * f[a] * f[b])
                .sum::<f64>()
                - eta[a] * eta[b]
        }))
    }
}

/// Coefficients of an alpha-connection at `theta`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaConnection {
    pub n: usize,
    pub alpha: f64,
    /// `Gamma_abc`, flattened as `(a * n + b) * n + c`.
    pub lower: Vec<f64>,
    /// `Gamma^c_ab = g^cd Gamma_abd`, flattened as `(c * n + a) * n + b`.
    pub upper: Vec<f64>,
}

impl AlphaConnection {
    pub fn lower(&self, a: usize, b: usize, c: usize) -> f64 {
        self.lower[(a * self.n + b) * self.n + c]
    }

    pub fn upper(&self, c: usize, a: usize, b: usize) -> f64 {
        self.upper[(c * self.n + a) * self.n + b]
    }
}

/// `Gamma_abc = E[(d_a d_b ln P + (1 - alpha)/2 s_a s_b) s_c]` by exact
/// summation over states.
pub fn alpha_connection(
    fam: &FiniteExponentialFamily,
    theta: &[f64],
    alpha: f64,
) -> Result<AlphaConnection> {
    let n = fam.n;
    let probs = fam.probabilities(theta)?;
    let s = fam.scores(theta)?;
    // d_a d_b ln P = -psi_ab for every state
    let hess = fam.hessian(theta)?;
    let g = fam.fisher_matrix(theta)?;
    let g_inv = g
        .cholesky()
        .ok_or(Error::SingularMatrix("Fisher matrix"))?
        .inverse();
    let w = 0.5 * (1.0 - alpha);
    let mut lower = vec![0.0; n * n * n];
    for (p, si) in probs.iter().zip(&s) {
        for a in 0..n {
            for b in 0..n {
                let inner = -hess[(a, b)] + w * si[a] * si[b];
                for c in 0..n {
                    lower[(a * n + b) * n + c] += p * inner * si[c];
                }
            }
        }
    }
    let mut upper = vec![0.0; n * n * n];
    for c in 0..n {
        for a in 0..n {
            for b in 0..n {
                upper[(c * n + a) * n + b] = (0..n)
                    .map(|d| g_inv[(c, d)] * lower[(a * n + b) * n + d])
                    .sum();
            }
        }
    }
    Ok(AlphaConnection {
        n,
        alpha,
        lower,
        upper,
    })
}

/// Largest coefficient of the `alpha = -1` connection expressed in the
/// expectation coordinates `eta`, using the transformation law
/// `Gamma'^k_ij = (dtheta^a/deta_i)(dtheta^b/deta_j)(deta_k/dtheta^c) Gamma^c_ab
///  + (deta_k/dtheta^c) d^2 theta^c / deta_i deta_j`.
pub fn eta_flatness_residual(fam: &FiniteExponentialFamily, theta: &[f64]) -> Result<f64> {
    let n = fam.n;
    let conn = alpha_connection(fam, theta, -1.0)?;
    let g = fam.fisher_matrix(theta)?;
    let g_inv = g
        .clone()
        .cholesky()
        .ok_or(Error::SingularMatrix("Fisher matrix"))?
        .inverse();
    let kappa = fam.third_cumulant(theta)?;
    // d g_inv / d theta^d = -g_inv (d_d g) g_inv with d_d g_ab = kappa_abd
    let dginv: Vec<DMatrix<f64>> = (0..n)
        .map(|d| {
            let dg = DMatrix::from_fn(n, n, |a, b| kappa[(a * n + b) * n + d]);
            -(&g_inv * dg * &g_inv)
        })
        .collect();
    let mut worst: f64 = 0.0;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut v = 0.0;
                for c in 0..n {
                    let mut first = 0.0;
                    for a in 0..n {
                        for b in 0..n {
                            first += g_inv[(a, i)] * g_inv[(b, j)] * conn.upper(c, a, b);
                        }
                    }
                    // d^2 theta^c / deta_i deta_j = d g_inv_ci / deta_j
                    let second: f64 = (0..n).map(|d| dginv[d][(c, i)] * g_inv[(d, j)]).sum();
                    v += g[(k, c)] * (first + second);
                }
                worst = worst.max(v.abs());
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualFlatReport {
    pub theta: Vec<f64>,
    pub eta: Vec<f64>,
    /// `phi(eta)` from the numerical Legendre transform.
    pub phi: f64,
    /// `E[ln P] - E[C]` by exact summation.
    pub expected_log_p_minus_c: f64,
    /// Maximizer of the transform; should reproduce `theta`.
    pub theta_recovered: Vec<f64>,
    pub residual: f64,
}

pub fn dual_flat_report(fam: &FiniteExponentialFamily, theta: &[f64]) -> Result<DualFlatReport> {
    let eta = fam.mean(theta)?;
    let (phi, solve) = legendre_transform(fam, eta.as_slice(), Some(theta))?;
    let lp = fam.log_probabilities(theta)?;
    let direct = fam.expectation(theta, |i| lp[i] - fam.base[i])?;
    Ok(DualFlatReport {
        theta: theta.to_vec(),
        eta: eta.as_slice().to_vec(),
        phi,
        expected_log_p_minus_c: direct,
        theta_recovered: solve.x_star,
        residual: (phi - direct).abs(),
    })
}

/// Occupation probabilities of a single spin at inverse-temperature-scaled
/// field `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpinState {
    pub p_plus: f64,
    pub p_minus: f64,
    pub theta: f64,
}

impl SpinState {
    pub fn new(p_plus: f64, p_minus: f64, theta: f64) -> Result<Self> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !(ok(p_plus)
            && ok(p_minus)
            && (p_plus + p_minus - 1.0).abs() <= 1e-12
            && theta.is_finite())
        {
            return Err(Error::InvalidArgument(format!(
                "spin probabilities ({p_plus}, {p_minus}) must lie in [0, 1] and sum to 1"
            )));
        }
        Ok(Self {
            p_plus,
            p_minus,
            theta,
        })
    }

    /// State with mean spin `sigma` in `[-1, 1]`.
    pub fn from_mean(sigma: f64, theta: f64) -> Result<Self> {
        Self::new(0.5 * (1.0 + sigma), 0.5 * (1.0 - sigma), theta)
    }

    /// `P(sigma) = e^{sigma theta} / (2 cosh theta)`.
    pub fn canonical(theta: f64) -> Self {
        let t = theta.tanh();
        Self {
            p_plus: 0.5 * (1.0 + t),
            p_minus: 0.5 * (1.0 - t),
            theta,
        }
    }

    pub fn mean_sigma(&self) -> f64 {
        self.p_plus - self.p_minus
    }
}

/// `W(sigma -> -sigma) = gamma'/2 (1 - sigma tanh theta)`.
pub fn transition_rate(sigma: f64, theta: f64, gamma_prime: f64) -> f64 {
    0.5 * gamma_prime * (1.0 - sigma * theta.tanh())
}

/// `|W(+ -> -) P(+) - W(- -> +) P(-)|` at the canonical distribution.
pub fn detailed_balance_residual(theta: f64, gamma_prime: f64) -> f64 {
    let s = SpinState::canonical(theta);
    (transition_rate(1.0, theta, gamma_prime) * s.p_plus
        - transition_rate(-1.0, theta, gamma_prime) * s.p_minus)
        .abs()
}

/// `dP(+)/dt`; `dP(-)/dt` is its negative.
fn master_rhs(p_plus: f64, p_minus: f64, theta: f64, gamma_prime: f64) -> f64 {
    -transition_rate(1.0, theta, gamma_prime) * p_plus
        + transition_rate(-1.0, theta, gamma_prime) * p_minus
}

/// One RK4 step of the two-state master equation.
pub fn master_equation_step(s: &SpinState, gamma_prime: f64, dt: f64) -> Result<SpinState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let f = |pp: f64, pm: f64| master_rhs(pp, pm, s.theta, gamma_prime);
    let k1 = f(s.p_plus, s.p_minus);
    let k2 = f(s.p_plus + 0.5 * dt * k1, s.p_minus - 0.5 * dt * k1);
    let k3 = f(s.p_plus + 0.5 * dt * k2, s.p_minus - 0.5 * dt * k2);
    let k4 = f(s.p_plus + dt * k3, s.p_minus - dt * k3);
    let delta = dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    Ok(SpinState {
        p_plus: s.p_plus + delta,
        p_minus: s.p_minus - delta,
        theta: s.theta,
    })
}

/// Rate of `<sigma>` implied by the master equation at `s`.
pub fn master_mean_rate(s: &SpinState, gamma_prime: f64) -> f64 {
    2.0 * master_rhs(s.p_plus, s.p_minus, s.theta, gamma_prime)
}

/// `d<sigma>/dt = gamma' (tanh theta - <sigma>)`.
pub fn kinetic_model_rhs(sigma_avg: f64, theta: f64, gamma_prime: f64) -> f64 {
    gamma_prime * (theta.tanh() - sigma_avg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpinRow {
    pub t: f64,
    pub p_contact: f64,
    pub sigma_master: f64,
    pub z: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpinEquivalence {
    pub rows: Vec<SpinRow>,
    pub max_deviation: f64,
}

impl SpinEquivalence {
    pub const CSV_HEADER: &'static str = "t,p_contact,sigma_master,z,deviation";

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.t, r.p_contact, r.sigma_master, r.z, r.deviation
            )?;
        }
        Ok(())
    }
}

/// Runs the contact relaxation flow of the spin potential (`x = theta`
/// fixed, `z_0 = 0`, `hhat = gamma Delta`) alongside the master equation
/// with `gamma' = gamma`, both with RK4 at the default step.
pub fn spin_equivalence_check(
    gamma: f64,
    p0: f64,
    theta: f64,
    t_end: f64,
) -> Result<SpinEquivalence> {
    spin_equivalence_check_with(gamma, p0, theta, t_end, DEFAULT_DT)
}

pub fn spin_equivalence_check_with(
    gamma: f64,
    p0: f64,
    theta: f64,
    t_end: f64,
    dt: f64,
) -> Result<SpinEquivalence> {
    let hhat = HHatProfile::linear(gamma)?;
    let mut master = SpinState::from_mean(p0, theta)?;
    let flow = RelaxationFlow::psi(Arc::new(builtin_spin()), hhat);
    let traj = integrate(&flow, &ContactPoint::new(&[theta], &[p0], 0.0)?, t_end, dt)?;
    let mut rows = Vec::with_capacity(traj.len());
    let mut max_deviation: f64 = 0.0;
    for (k, (t, pt)) in traj.times.iter().zip(&traj.points).enumerate() {
        if k > 0 {
            master = master_equation_step(&master, gamma, t - traj.times[k - 1])?;
        }
        let deviation = (pt.p()[0] - master.mean_sigma()).abs();
        max_deviation = max_deviation.max(deviation);
        rows.push(SpinRow {
            t: *t,
            p_contact: pt.p()[0],
            sigma_master: master.mean_sigma(),
            z: pt.z(),
            deviation,
        });
    }
    Ok(SpinEquivalence {
        rows,
        max_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn toy() -> FiniteExponentialFamily {
        FiniteExponentialFamily::new(
            "toy",
            vec![0.1, -0.3, 0.0, 0.4],
            vec![
                vec![0.0, 1.0],
                vec![1.0, -1.0],
                vec![2.0, 0.5],
                vec![-1.0, 2.0],
            ],
        )
        .unwrap()
    }

    #[test]
    fn spin_family_matches_spin_potential() {
        let fam = FiniteExponentialFamily::spin();
        let spin = builtin_spin();
        for th in [-3.0, -0.4, 0.0, 1.0, 2.5] {
            assert!((fam.value(&[th]).unwrap() - spin.value(&[th]).unwrap()).abs() < 1e-14);
            assert!((fam.mean(&[th]).unwrap()[0] - th.tanh()).abs() < 1e-15);
            let p = fam.probabilities(&[th]).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
        assert!((fam.fisher_matrix(&[0.0]).unwrap()[(0, 0)] - 1.0).abs() < 1e-15);
        let g1 = fam.fisher_matrix(&[1.0]).unwrap()[(0, 0)];
        assert!((g1 - 1.0 / 1.0f64.cosh().powi(2)).abs() < 1e-15);
        assert!((g1 - 0.41997).abs() < 1e-5);
    }

    #[test]
    fn fisher_equals_hessian() {
        let fam = toy();
        for th in [[0.0, 0.0], [0.7, -1.2], [-2.0, 0.3]] {
            let g = fam.fisher_matrix(&th).unwrap();
            assert!((g - fam.hessian(&th).unwrap()).abs().max() < 1e-12);
        }
    }

    #[test]
    fn alpha_connection_examples() {
        let fam = FiniteExponentialFamily::spin();
        for th in [0.0, 0.7, -1.3] {
            let t: f64 = th;
            let psi3 = -2.0 * t.tanh() / t.cosh().powi(2);
            let e = alpha_connection(&fam, &[th], -1.0).unwrap();
            assert!((e.lower(0, 0, 0) - psi3).abs() < 1e-12);
            let half = alpha_connection(&fam, &[th], 0.0).unwrap();
            assert!((half.lower(0, 0, 0) - 0.5 * psi3).abs() < 1e-12);
            let m = alpha_connection(&fam, &[th], 1.0).unwrap();
            assert!(m.upper.iter().all(|v| v.abs() < 1e-12));
        }
        let fam = toy();
        let c = alpha_connection(&fam, &[0.2, -0.5], 0.3).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                for k in 0..2 {
                    assert_eq!(c.lower(a, b, k), c.lower(b, a, k));
                }
            }
        }
        assert!(eta_flatness_residual(&fam, &[0.2, -0.5]).unwrap() < 1e-10);
        assert!(eta_flatness_residual(&FiniteExponentialFamily::spin(), &[0.9]).unwrap() < 1e-12);
    }

    #[test]
    fn dual_flat_examples() {
        let spin = FiniteExponentialFamily::spin();
        let r = dual_flat_report(&spin, &[0.0]).unwrap();
        assert_eq!(r.eta, vec![0.0]);
        assert!((r.phi + LN_2).abs() < 1e-12);
        assert!((r.expected_log_p_minus_c + LN_2).abs() < 1e-14);
        let r = dual_flat_report(&spin, &[0.8]).unwrap();
        assert!((r.eta[0] - 0.8f64.tanh()).abs() < 1e-15);
        assert!(r.residual < 1e-10);

        let gc = FiniteExponentialFamily::grand_canonical(&[
            (0.0, 0.0),
            (1.0, 1.0),
            (2.5, 1.0),
            (3.0, 2.0),
            (4.0, 2.0),
        ])
        .unwrap();
        let th = [-0.8, 0.4];
        let r = dual_flat_report(&gc, &th).unwrap();
        assert!(r.residual < 1e-10);
        assert!((r.phi + gc.entropy(&th).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn master_equation_examples() {
        let th = 0.6;
        let can = SpinState::canonical(th);
        let next = master_equation_step(&can, 1.3, 0.01).unwrap();
        assert!((next.p_plus - can.p_plus).abs() < 1e-12);
        assert!(detailed_balance_residual(th, 1.3) < 1e-14);

        let mut s = SpinState::from_mean(0.5, 0.0).unwrap();
        for _ in 0..1000 {
            s = master_equation_step(&s, 1.0, 1e-3).unwrap();
            assert!((s.p_plus + s.p_minus - 1.0).abs() < 1e-13);
        }
        assert!((s.mean_sigma() - 0.5 * (-1.0f64).exp()).abs() < 1e-12);
        assert!((s.mean_sigma() - 0.18394).abs() < 1e-5);
    }

    #[test]
    fn kinetic_model_examples() {
        assert_eq!(kinetic_model_rhs(0.5f64.tanh(), 0.5, 3.0), 0.0);
        assert_eq!(kinetic_model_rhs(1.0, 0.0, 2.0), -2.0);
        for (sig, th, g) in [(0.3, -0.2, 1.0), (-0.9, 1.5, 0.4)] {
            let s = SpinState::from_mean(sig, th).unwrap();
            assert!((master_mean_rate(&s, g) - kinetic_model_rhs(sig, th, g)).abs() < 1e-12);
        }
    }

    #[test]
    fn spin_equivalence_examples() {
        let th: f64 = 0.5;
        let still = spin_equivalence_check(1.0, th.tanh(), th, 2.0).unwrap();
        assert!(still.max_deviation < 1e-15);
        let run = spin_equivalence_check(1.0, -0.2, 0.5, 10.0).unwrap();
        assert!(run.max_deviation <= 1e-8);
        let last = run.rows.last().unwrap();
        assert!((last.z - (th.cosh().ln() + LN_2)).abs() < 1e-4);
        assert!(SpinState::from_mean(1.5, 0.0).is_err());
    }
}
