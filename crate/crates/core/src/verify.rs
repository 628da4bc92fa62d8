//! Seeded identity suites with machine-readable reports.
//!
//! Every check draws its samples from its own ChaCha stream, seeded from the
//! suite seed and the check name, so reports are reproducible regardless of
//! how the checks are scheduled across threads.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chart::{
    contact_form_eval, d_lambda_contract, d_lambda_eval, p_index, reeb_field, volume_form_value,
    x_index, ChartDim, CoVector, ContactPoint, TangentVector,
};
use crate::dynamics::{
    closed_form_phi, closed_form_psi, contact_vector_field, integrate, lyapunov_diagnostics,
    tangency_residual, ContactFlow, ContactHamiltonian, HHatProfile, Polynomial, RelaxationFlow,
    DEFAULT_DT,
};
use crate::error::{Error, Result};
use crate::legendre::{
    control_point, embed_from_phi, embed_from_psi, pushforward_basis_phi, pushforward_basis_psi,
    ControlManifold, EmbeddingKind, LegendreEmbedding,
};
use crate::metric::{
    characterization_report, christoffel, control_metric, control_metric_pullback,
    control_to_legendre_metric, geodesic_residual, killing_coderivative,
    killing_flat_identity_residual, killing_residual, laplace_beltrami,
    metric_compatibility_residual, metric_dual, mrugala_metric, pullback_hessian_residual,
    tangent_basis, ChartField, ControlScalar,
};
use crate::potential::{
    builtin_spin, gradient_check, hessian_inverse_duality_check, legendre_transform, Domain,
    LegendreDual, Potential, Quadratic, SharedPotential, SpinConjugate,
};
use crate::statmech::{
    alpha_connection, detailed_balance_residual, dual_flat_report, eta_flatness_residual,
    kinetic_model_rhs, master_equation_step, master_mean_rate, spin_equivalence_check,
    FiniteExponentialFamily, SpinState,
};

/// Environment variable capping the worker threads of a verification run.
pub const THREADS_ENV: &str = "CONTACT_RELAX_THREADS";
/// Sample count of the metric identity checks.
pub const METRIC_POINTS: usize = 1000;
/// Sample count of the remaining pointwise checks.
pub const POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Chart,
    Potential,
    Legendre,
    Dynamics,
    Metric,
    Statmech,
    All,
}

impl Suite {
    pub const NAMES: &'static [&'static str] = &[
        "chart",
        "potential",
        "legendre",
        "dynamics",
        "metric",
        "statmech",
        "all",
    ];

    fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Suite::Chart => "chart",
            Suite::Potential => "potential",
            Suite::Legendre => "legendre",
            Suite::Dynamics => "dynamics",
            Suite::Metric => "metric",
            Suite::Statmech => "statmech",
            Suite::All => "all",
        };
        f.write_str(s)
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "chart" => Suite::Chart,
            "potential" => Suite::Potential,
            "legendre" => Suite::Legendre,
            "dynamics" => Suite::Dynamics,
            "metric" => Suite::Metric,
            "statmech" => Suite::Statmech,
            "all" => Suite::All,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown suite `{other}`; expected one of {}",
                    Suite::NAMES.join(", ")
                )))
            }
        })
    }
}

/// One line of a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: String,
    /// Largest residual over the samples; for lower-bound checks (names
    /// ending in `_exceeds`) the smallest value instead.
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suite: String,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub overall_pass: bool,
}

impl VerifyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

#[derive(Clone, Copy)]
enum Bound {
    AtMost,
    AtLeast,
}

type CheckFn = fn(&mut ChaCha8Rng) -> Result<f64>;

struct Check {
    suite: Suite,
    name: &'static str,
    tolerance: f64,
    bound: Bound,
    run: CheckFn,
}

const fn at_most(suite: Suite, name: &'static str, tolerance: f64, run: CheckFn) -> Check {
    Check {
        suite,
        name,
        tolerance,
        bound: Bound::AtMost,
        run,
    }
}

const fn at_least(suite: Suite, name: &'static str, tolerance: f64, run: CheckFn) -> Check {
    Check {
        suite,
        name,
        tolerance,
        bound: Bound::AtLeast,
        run,
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

impl Check {
    fn evaluate(&self, seed: u64) -> CheckResult {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(self.name));
        let value = (self.run)(&mut rng).unwrap_or(f64::INFINITY);
        let pass = match self.bound {
            Bound::AtMost => value <= self.tolerance,
            Bound::AtLeast => value > self.tolerance && value.is_finite(),
        };
        CheckResult {
            check: format!("{}/{}", self.suite, self.name),
            max_residual: value,
            tolerance: self.tolerance,
            pass,
        }
    }
}

/// Thread cap from [`THREADS_ENV`], if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()?
        .trim()
        .parse::<usize>()
        .ok()
        .filter(|&n| n > 0)
}

/// Runs every check of `suite` with the given seed.
pub fn run_suite(suite: Suite, seed: u64) -> Result<VerifyReport> {
    let checks: Vec<&Check> = CHECKS.iter().filter(|c| suite.includes(c.suite)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_cap().unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let results: Vec<CheckResult> =
        pool.install(|| checks.par_iter().map(|c| c.evaluate(seed)).collect());
    let overall_pass = results.iter().all(|r| r.pass);
    Ok(VerifyReport {
        suite: suite.to_string(),
        seed,
        checks: results,
        overall_pass,
    })
}

/// Names of the checks in `suite`, in report order.
pub fn check_names(suite: Suite) -> Vec<String> {
    CHECKS
        .iter()
        .filter(|c| suite.includes(c.suite))
        .map(|c| format!("{}/{}", c.suite, c.name))
        .collect()
}

static CHECKS: &[Check] = &[
    at_most(
        Suite::Chart,
        "volume_form_standard_frame",
        1e-15,
        chart_volume_standard,
    ),
    at_most(
        Suite::Chart,
        "volume_form_alternating",
        1e-12,
        chart_volume_alternating,
    ),
    at_most(Suite::Chart, "reeb_field_identities", 1e-15, chart_reeb),
    at_most(
        Suite::Chart,
        "d_lambda_antisymmetry",
        1e-15,
        chart_dlambda_antisym,
    ),
    at_most(
        Suite::Chart,
        "contact_hamiltonian_defining_identities",
        1e-10,
        chart_hamiltonian_identities,
    ),
    at_most(
        Suite::Potential,
        "gradient_vs_finite_differences",
        1e-6,
        potential_gradients,
    ),
    at_most(
        Suite::Potential,
        "hessian_symmetric_positive_definite",
        1e-12,
        potential_hessians,
    ),
    at_most(
        Suite::Potential,
        "biconjugation_round_trip",
        1e-8,
        potential_biconjugation,
    ),
    at_most(
        Suite::Potential,
        "young_fenchel_inequality",
        1e-8,
        potential_young_fenchel,
    ),
    at_most(
        Suite::Potential,
        "young_fenchel_equality",
        1e-8,
        potential_young_fenchel_equality,
    ),
    at_most(
        Suite::Potential,
        "hessian_inverse_duality",
        1e-8,
        potential_hessian_duality,
    ),
    at_most(
        Suite::Legendre,
        "deficit_vanishes_on_submanifold",
        1e-12,
        legendre_deficits,
    ),
    at_most(
        Suite::Legendre,
        "contact_form_pullback_vanishes",
        1e-10,
        legendre_pullback,
    ),
    at_most(
        Suite::Legendre,
        "constraints_annihilate_tangents",
        1e-10,
        legendre_constraints,
    ),
    at_most(
        Suite::Legendre,
        "embedding_coincidence",
        1e-8,
        legendre_coincidence,
    ),
    at_most(
        Suite::Legendre,
        "pushforward_relation",
        1e-8,
        legendre_pushforward_relation,
    ),
    at_most(
        Suite::Legendre,
        "control_manifold_constraint",
        1e-12,
        legendre_control,
    ),
    at_most(
        Suite::Dynamics,
        "closed_form_vs_rk4",
        1e-8,
        dynamics_closed_form,
    ),
    at_most(
        Suite::Dynamics,
        "attractor_bound_excess",
        1e-3,
        dynamics_attractor,
    ),
    at_most(
        Suite::Dynamics,
        "lyapunov_violations",
        0.0,
        dynamics_lyapunov,
    ),
    at_most(
        Suite::Dynamics,
        "dhdt_analytic_vs_numeric",
        1e-5,
        dynamics_dhdt,
    ),
    at_most(
        Suite::Dynamics,
        "frozen_coordinates",
        1e-12,
        dynamics_frozen,
    ),
    at_most(
        Suite::Dynamics,
        "tangency_on_submanifold",
        1e-12,
        dynamics_tangency,
    ),
    at_most(
        Suite::Dynamics,
        "specialized_vs_generic_field",
        1e-12,
        dynamics_generic,
    ),
    at_most(Suite::Metric, "signature_mismatches", 0.0, metric_signature),
    at_most(Suite::Metric, "inverse", 1e-12, metric_inverse),
    at_most(
        Suite::Metric,
        "reeb_dual_is_contact_form",
        1e-12,
        metric_reeb_dual,
    ),
    at_most(
        Suite::Metric,
        "christoffel_symmetry",
        0.0,
        metric_christoffel_symmetry,
    ),
    at_most(Suite::Metric, "metric_compatibility", 1e-10, metric_compat),
    at_most(Suite::Metric, "killing_q_r_a_b", 1e-10, metric_killing),
    at_least(
        Suite::Metric,
        "killing_negative_control_exceeds",
        1e-3,
        metric_killing_negative,
    ),
    at_most(
        Suite::Metric,
        "killing_fields_are_hamiltonian",
        1e-12,
        metric_killing_hamiltonian,
    ),
    at_most(Suite::Metric, "geodesic_r_p_l", 1e-10, metric_geodesics),
    at_most(
        Suite::Metric,
        "relaxation_field_norms",
        1e-10,
        metric_relaxation_norms,
    ),
    at_most(Suite::Metric, "null_on_submanifold", 1e-12, metric_null),
    at_most(
        Suite::Metric,
        "pullback_equals_hessian",
        1e-10,
        metric_pullback,
    ),
    at_most(
        Suite::Metric,
        "killing_coderivative",
        1e-9,
        metric_coderivative,
    ),
    at_most(
        Suite::Metric,
        "killing_flat_covariant_derivative",
        1e-8,
        metric_flat_identity,
    ),
    at_most(
        Suite::Metric,
        "control_metric_vs_pullback",
        1e-12,
        metric_control,
    ),
    at_most(
        Suite::Metric,
        "control_metric_restricts_to_hessian",
        1e-12,
        metric_commuting,
    ),
    at_most(Suite::Metric, "harmonic_deficits", 1e-4, metric_harmonic),
    at_least(
        Suite::Metric,
        "harmonic_negative_control_exceeds",
        1e-2,
        metric_harmonic_negative,
    ),
    at_most(
        Suite::Metric,
        "characterization_connection",
        1e-8,
        metric_char_connection,
    ),
    at_most(
        Suite::Metric,
        "characterization_inner_products",
        1e-10,
        metric_char_inner,
    ),
    at_most(
        Suite::Metric,
        "tangent_basis_annihilates_constraints",
        1e-10,
        metric_tangent_basis,
    ),
    at_most(Suite::Statmech, "normalization", 1e-14, stat_normalization),
    at_most(
        Suite::Statmech,
        "fisher_equals_cumulant_hessian",
        1e-12,
        stat_fisher,
    ),
    at_most(Suite::Statmech, "alpha_one_vanishes", 1e-12, stat_alpha_one),
    at_most(
        Suite::Statmech,
        "alpha_minus_one_flat_in_eta",
        1e-10,
        stat_alpha_minus_one,
    ),
    at_most(
        Suite::Statmech,
        "spin_alpha_connection_closed_form",
        1e-12,
        stat_spin_alpha,
    ),
    at_most(
        Suite::Statmech,
        "dual_potential_is_expected_log_probability",
        1e-10,
        stat_dual_flat,
    ),
    at_most(Suite::Statmech, "eta_round_trip", 1e-8, stat_eta_round_trip),
    at_most(
        Suite::Statmech,
        "detailed_balance",
        1e-14,
        stat_detailed_balance,
    ),
    at_most(
        Suite::Statmech,
        "master_equation_stationary",
        1e-12,
        stat_stationary,
    ),
    at_most(
        Suite::Statmech,
        "kinetic_model_matches_master_equation",
        1e-12,
        stat_kinetic,
    ),
    at_most(
        Suite::Statmech,
        "contact_flow_vs_master_equation",
        1e-8,
        stat_equivalence,
    ),
    at_most(Suite::Statmech, "spin_z_channel", 1e-8, stat_z_channel),
];

// ---- sampling helpers ----

fn uniform(rng: &mut ChaCha8Rng, k: usize, r: f64) -> Vec<f64> {
    (0..k).map(|_| rng.gen_range(-r..r)).collect()
}

fn random_point(rng: &mut ChaCha8Rng, n: usize, r: f64) -> ContactPoint {
    ContactPoint::from_flat(uniform(rng, 2 * n + 1, r)).expect("finite sample")
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize, r: f64) -> TangentVector {
    TangentVector::from_flat(uniform(rng, 2 * n + 1, r)).expect("finite sample")
}

/// `B^T B + I/2` with `B` uniform in `[-1, 1]`.
fn random_quadratic(rng: &mut ChaCha8Rng, n: usize) -> Quadratic {
    let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    Quadratic::new(b.transpose() * &b + DMatrix::identity(n, n) * 0.5).expect("SPD by construction")
}

fn cycle_dim(i: usize) -> usize {
    1 + i % 3
}

fn fold_max<I: IntoIterator<Item = Result<f64>>>(it: I) -> Result<f64> {
    let mut m: f64 = 0.0;
    for v in it {
        let v = v?;
        if v.is_nan() {
            return Ok(f64::INFINITY);
        }
        m = m.max(v);
    }
    Ok(m)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn spin() -> SharedPotential {
    Arc::new(builtin_spin())
}

fn spin_conjugate() -> SharedPotential {
    Arc::new(SpinConjugate::default())
}

fn numeric_spin_dual() -> SharedPotential {
    Arc::new(LegendreDual::new(spin()).with_domain(Domain::OpenBox {
        lower: vec![-1.0],
        upper: vec![1.0],
    }))
}

/// A point with positive psi-deficit `Delta in [0.1, 1]` above a random base.
fn off_psi(rng: &mut ChaCha8Rng, psi: &dyn Potential, x: &[f64]) -> Result<ContactPoint> {
    let n = psi.dim();
    let p = uniform(rng, n, 1.0);
    let z = psi.value(x)? - rng.gen_range(0.1..1.0);
    ContactPoint::new(x, &p, z)
}

/// A point with positive phi-deficit `Delta in [0.1, 1]` above a random base.
fn off_phi(rng: &mut ChaCha8Rng, phi: &dyn Potential, p: &[f64]) -> Result<ContactPoint> {
    let n = phi.dim();
    let x = uniform(rng, n, 1.0);
    let xp: f64 = x.iter().zip(p).map(|(a, b)| a * b).sum();
    let z = xp - phi.value(p)? - rng.gen_range(0.1..1.0);
    ContactPoint::new(&x, p, z)
}

// ---- chart ----

fn chart_volume_standard(_: &mut ChaCha8Rng) -> Result<f64> {
    fold_max((1..=3).map(|n| {
        let d = ChartDim::new(n)?;
        let mut frame = Vec::new();
        for a in 0..n {
            frame.push(TangentVector::basis(d, x_index(a))?);
            frame.push(TangentVector::basis(d, p_index(n, a))?);
        }
        frame.push(reeb_field(d));
        Ok((volume_form_value(&frame)? - 1.0).abs())
    }))
}

fn chart_volume_alternating(rng: &mut ChaCha8Rng) -> Result<f64> {
    fold_max((0..POINTS).map(|i| {
        let n = cycle_dim(i);
        let mut frame: Vec<TangentVector> =
            (0..2 * n + 1).map(|_| random_vector(rng, n, 1.0)).collect();
        let v = volume_form_value(&frame)?;
        frame.swap(0, 2 * n);
        Ok((volume_form_value(&frame)? + v).abs())
    }))
}

fn chart_reeb(rng: &mut ChaCha8Rng) -> Result<f64> {
    fold_max((0..POINTS).map(|i| {
        let n = cycle_dim(i);
        let pt = random_point(rng, n, 3.0);
        let r = reeb_field(pt.dim());
        let contracted = d_lambda_contract(&r);
        Ok((contact_form_eval(&pt, &r)? - 1.0).abs().max(
            contracted
                .as_slice()
                .iter()
                .fold(0.0, |m, c| m.max(c.abs())),
        ))
    }))
}

fn chart_dlambda_antisym(rng: &mut ChaCha8Rng) -> Result<f64> {
    fold_max((0..POINTS).map(|i| {
        let n = cycle_dim(i);
        let (v, w) = (random_vector(rng, n, 2.0), random_vector(rng, n, 2.0));
        Ok((d_lambda_eval(&v, &w)? + d_lambda_eval(&w, &v)?).abs())
    }))
}

/// `iota_X lambda = h` and `iota_X d lambda = -(dh - (Rh) lambda)`.
fn chart_hamiltonian_identities(rng: &mut ChaCha8Rng) -> Result<f64> {
    fold_max((0..POINTS).map(|i| {
        let n = cycle_dim(i);
        let dim = ChartDim::new(n)?;
        let h = ContactHamiltonian::from_polynomial(Polynomial::random(rng, dim, 4, 3));
        let pt = random_point(rng, n, 1.0);
        let x = contact_vector_field(&h, &pt)?;
        let hv = h.value(&pt)?;
        let d = h.partials(&pt)?;
        let mut rhs = vec![0.0; 2 * n + 1];
        for a in 0..n {
            rhs[x_index(a)] = -(d.dx[a] + d.dz * pt.p()[a]);
            rhs[p_index(n, a)] = -d.dp[a];
        }
        let lhs = d_lambda_contract(&x);
        Ok((contact_form_eval(&pt, &x)? - hv)
            .abs()
            .max(max_abs_diff(lhs.as_slice(), &rhs)))
    }))
}

// ---- potential ----

fn potential_gradients(rng: &mut ChaCha8Rng) -> Result<f64> {
    let s = builtin_spin();
    let q = random_quadratic(rng, 3);
    fold_max((0..POINTS).map(|i| {
        if i % 2 == 0 {
            gradient_check(&s, &uniform(rng, 1, 5.0))
        } else {
            gradient_check(&q, &uniform(rng, 3, 5.0))
        }
    }))
}

fn potential_hessians(rng: &mut ChaCha8Rng) -> Result<f64> {
    let pots: Vec<SharedPotential> =
        vec![spin(), Arc::new(random_quadratic(rng, 3)), spin_conjugate()];
    fold_max((0..POINTS).map(|i| {
        let pot = &pots[i % pots.len()];
        let r = if pot.name() == "spin-conjugate" {
            0.99
        } else {
            5.0
        };
        let h = pot.hessian(&uniform(rng, pot.dim(), r))?;
        if h.clone().cholesky().is_none() {
            return Ok(f64::INFINITY);
        }
        Ok((&h - h.transpose()).abs().max())
    }))
}

/// `L[L[psi]](x_*) = psi(x_*)` with both transforms computed by Newton.
fn potential_biconjugation(rng: &mut ChaCha8Rng) -> Result<f64> {
    let s = spin();
    let q: SharedPotential = Arc::new(random_quadratic(rng, 2));
    let cases: Vec<(SharedPotential, SharedPotential, f64)> = vec![
        (s.clone(), numeric_spin_dual(), 0.9),
        (q.clone(), Arc::new(LegendreDual::new(q.clone())), 2.0),
    ];
    fold_max((0..40).map(|i| {
        let (psi, phi, r) = &cases[i % 2];
        let p = uniform(rng, psi.dim(), *r);
        let (_, solve) = legendre_transform(psi.as_ref(), &p, None)?;
        let (back, _) = legendre_transform(phi.as_ref(), &solve.x_star, Some(&p))?;
        Ok((back - psi.value(&solve.x_star)?).abs())
    }))
}

fn potential_young_fenchel(rng: &mut ChaCha8Rng) -> Result<f64> {
    let q = random_quadratic(rng, 2);
    let qc = q.conjugate();
    let sc = SpinConjugate::default();
    let s = builtin_spin();
    fold_max((0..POINTS).map(|i| {
        let gap = if i % 2 == 0 {
            let (x, p) = (uniform(rng, 1, 4.0), uniform(rng, 1, 0.99));
            s.value(&x)? + sc.value(&p)? - x[0] * p[0]
        } else {
            let (x, p) = (uniform(rng, 2, 3.0), uniform(rng, 2, 3.0));
            q.value(&x)? + qc.value(&p)? - (x[0] * p[0] + x[1] * p[1])
        };
        Ok((-gap).max(0.0))
    }))
}

fn potential_young_fenchel_equality(rng: &mut ChaCha8Rng) -> Result<f64> {
    let q: SharedPotential = Arc::new(random_quadratic(rng, 2));
    let pots = [spin(), q];
    fold_max((0..40).map(|i| {
        let psi = &pots[i % 2];
        let x = uniform(rng, psi.dim(), 2.0);
        let p = psi.gradient(&x)?;
        let (phi, _) = legendre_transform(psi.as_ref(), p.as_slice(), None)?;
        let xp: f64 = x.iter().zip(p.iter()).map(|(a, b)| a * b).sum();
        Ok((psi.value(&x)? + phi - xp).abs())
    }))
}

fn potential_hessian_duality(rng: &mut ChaCha8Rng) -> Result<f64> {
    let q = random_quadratic(rng, 2);
    let s = builtin_spin();
    fold_max((0..40).map(|i| {
        if i % 2 == 0 {
            hessian_inverse_duality_check(&s, &uniform(rng, 1, 0.5))
        } else {
            hessian_inverse_duality_check(&q, &uniform(rng, 2, 2.0))
        }
    }))
}

// ---- legendre ----

fn legendre_cases(rng: &mut ChaCha8Rng) -> Vec<(LegendreEmbedding, f64)> {
    let q: SharedPotential = Arc::new(random_quadratic(rng, 2));
    vec![
        (LegendreEmbedding::from_psi(spin()), 3.0),
        (LegendreEmbedding::from_psi(q.clone()), 2.0),
        (LegendreEmbedding::from_phi(spin_conjugate()), 0.95),
        (
            LegendreEmbedding::from_phi(Arc::new(random_quadratic(rng, 3))),
            2.0,
        ),
    ]
}

fn legendre_deficits(rng: &mut ChaCha8Rng) -> Result<f64> {
    let cases = legendre_cases(rng);
    fold_max((0..POINTS).map(|i| {
        let (emb, r) = &cases[i % cases.len()];
        let pt = emb.embed(&uniform(rng, emb.dim(), *r))?;
        Ok(emb.deficit(&pt)?.delta.abs())
    }))
}

fn legendre_pullback(rng: &mut ChaCha8Rng) -> Result<f64> {
    let cases = legendre_cases(rng);
    fold_max((0..POINTS).map(|i| {
        let (emb, r) = &cases[i % cases.len()];
        let base = uniform(rng, emb.dim(), *r);
        let pt = emb.embed(&base)?;
        fold_max(
            emb.pushforward_basis(&base)?
                .iter()
                .map(|v| Ok(contact_form_eval(&pt, v)?.abs())),
        )
    }))
}

fn legendre_constraints(rng: &mut ChaCha8Rng) -> Result<f64> {
    let cases = legendre_cases(rng);
    fold_max((0..POINTS).map(|i| {
        let (emb, r) = &cases[i % cases.len()];
        let base = uniform(rng, emb.dim(), *r);
        let pt = emb.embed(&base)?;
        let basis = emb.pushforward_basis(&base)?;
        let ds: Vec<CoVector> = emb.constraint_differentials(&pt)?;
        fold_max(
            ds.iter()
                .flat_map(|d| basis.iter().map(move |v| Ok(d.apply(v)?.abs()))),
        )
    }))
}

/// The psi-embedding at `x` equals the phi-embedding at `grad psi(x)` with
/// `phi` the numerical conjugate.
fn legendre_coincidence(rng: &mut ChaCha8Rng) -> Result<f64> {
    let q: SharedPotential = Arc::new(random_quadratic(rng, 2));
    let cases = [
        (spin(), numeric_spin_dual(), 2.0),
        (
            q.clone(),
            Arc::new(LegendreDual::new(q.clone())) as SharedPotential,
            2.0,
        ),
    ];
    fold_max((0..40).map(|i| {
        let (psi, phi, r) = &cases[i % 2];
        let x = uniform(rng, psi.dim(), *r);
        let a = embed_from_psi(psi.as_ref(), &x)?;
        let b = embed_from_phi(phi.as_ref(), psi.gradient(&x)?.as_slice())?;
        Ok(a.max_abs_diff(&b))
    }))
}

/// `Y^a = S^ab X_b` with `S` the Hessian of the numerical conjugate.
fn legendre_pushforward_relation(rng: &mut ChaCha8Rng) -> Result<f64> {
    let q: SharedPotential = Arc::new(random_quadratic(rng, 2));
    let cases = [
        (spin(), numeric_spin_dual(), 2.0),
        (
            q.clone(),
            Arc::new(LegendreDual::new(q.clone())) as SharedPotential,
            2.0,
        ),
    ];
    fold_max((0..40).map(|i| {
        let (psi, phi, r) = &cases[i % 2];
        let n = psi.dim();
        let x = uniform(rng, n, *r);
        let p = psi.gradient(&x)?;
        let xs = pushforward_basis_psi(psi.as_ref(), &x)?;
        let ys = pushforward_basis_phi(phi.as_ref(), p.as_slice())?;
        let s = phi.hessian(p.as_slice())?;
        fold_max((0..n).map(|a| {
            let combo: Vec<f64> = (0..2 * n + 1)
                .map(|c| (0..n).map(|b| s[(a, b)] * xs[b].as_slice()[c]).sum())
                .collect();
            Ok(max_abs_diff(&combo, ys[a].as_slice()))
        }))
    }))
}

fn legendre_control(rng: &mut ChaCha8Rng) -> Result<f64> {
    let q: SharedPotential = Arc::new(random_quadratic(rng, 2));
    let cms = [
        ControlManifold::b_psi(spin()),
        ControlManifold::b_phi(q.clone()),
        ControlManifold::b_psi(q),
    ];
    fold_max((0..POINTS).map(|i| {
        let cm = &cms[i % cms.len()];
        let base = uniform(rng, cm.dim() - 1, 2.0);
        let z = rng.gen_range(-2.0..2.0);
        let pt = control_point(cm, &base, z)?;
        let g = cm.potential.gradient(&base)?;
        let other = match cm.kind {
            crate::legendre::ControlKind::BPsi => pt.p(),
            crate::legendre::ControlKind::BPhi => pt.x(),
        };
        Ok(max_abs_diff(g.as_slice(), other).max((pt.z() - z).abs()))
    }))
}

// ---- dynamics ----

const T_END: f64 = 10.0;
const GAMMAS: [f64; 3] = [0.5, 1.0, 2.0];

/// RK4 against the exponential closed forms at every step.
fn dynamics_closed_form(rng: &mut ChaCha8Rng) -> Result<f64> {
    let q: SharedPotential = Arc::new(random_quadratic(rng, 2));
    let mut jobs = Vec::new();
    for &gamma in &GAMMAS {
        for k in 0..2 {
            let psi = if k == 0 { spin() } else { q.clone() };
            let x = uniform(rng, psi.dim(), 2.0);
            jobs.push((true, psi.clone(), gamma, off_psi(rng, psi.as_ref(), &x)?));
            let phi = if k == 0 { spin_conjugate() } else { q.clone() };
            let r = if k == 0 { 0.9 } else { 2.0 };
            let p = uniform(rng, phi.dim(), r);
            jobs.push((false, phi.clone(), gamma, off_phi(rng, phi.as_ref(), &p)?));
        }
    }
    let results: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|(psi_side, pot, gamma, pt0)| {
            let hhat = HHatProfile::linear(*gamma)?;
            let flow = if *psi_side {
                RelaxationFlow::psi(pot.clone(), hhat)
            } else {
                RelaxationFlow::phi(pot.clone(), hhat)
            };
            let traj = integrate(&flow, pt0, T_END, DEFAULT_DT)?;
            fold_max(traj.times.iter().zip(&traj.points).map(|(t, pt)| {
                let exact = if *psi_side {
                    closed_form_psi(pot.as_ref(), *gamma, pt0, *t)?
                } else {
                    closed_form_phi(pot.as_ref(), *gamma, pt0, *t)?
                };
                Ok(pt.max_abs_diff(&exact))
            }))
        })
        .collect();
    fold_max(results)
}

/// `max(Delta(T) / (Delta(0) e^{-gamma_1 T}) - 1, 0)` for
/// `hhat = gamma_1 Delta + gamma_2 Delta^2`.
fn dynamics_attractor(rng: &mut ChaCha8Rng) -> Result<f64> {
    let q: SharedPotential = Arc::new(random_quadratic(rng, 2));
    let mut jobs = Vec::new();
    for i in 0..8 {
        let psi = if i % 2 == 0 { spin() } else { q.clone() };
        let g1 = rng.gen_range(0.5..2.0);
        let g2 = if i % 4 == 3 {
            -2e-4
        } else {
            rng.gen_range(0.0..0.1)
        };
        let x = uniform(rng, psi.dim(), 2.0);
        jobs.push((psi.clone(), g1, g2, off_psi(rng, psi.as_ref(), &x)?));
    }
    let results: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|(psi, g1, g2, pt0)| {
            let flow = RelaxationFlow::psi(psi.clone(), HHatProfile::polynomial(vec![*g1, *g2])?);
            let traj = integrate(&flow, pt0, T_END, DEFAULT_DT)?;
            let d0 = traj.diagnostics[0].delta;
            let dt = traj.diagnostics.last().expect("nonempty").delta;
            Ok((dt / (d0 * (-g1 * T_END).exp()) - 1.0).max(0.0))
        })
        .collect();
    fold_max(results)
}

/// Steps where `h` fails to decrease, plus steps whose rates disagree.
fn dynamics_lyapunov(rng: &mut ChaCha8Rng) -> Result<f64> {
    let (flow, traj) = lyapunov_sample(rng)?;
    let recs = lyapunov_diagnostics(&flow, &traj)?;
    let bad = recs.windows(2).filter(|w| !(w[1].h < w[0].h)).count()
        + recs.iter().filter(|r| r.h < 0.0).count();
    Ok(bad as f64)
}

fn lyapunov_sample(rng: &mut ChaCha8Rng) -> Result<(RelaxationFlow, crate::dynamics::Trajectory)> {
    let psi: SharedPotential = Arc::new(random_quadratic(rng, 2));
    let hhat = HHatProfile::polynomial(vec![rng.gen_range(0.5..2.0), rng.gen_range(0.0..0.1)])?;
    let flow = RelaxationFlow::psi(psi.clone(), hhat);
    let pt0 = {
        let b = uniform(rng, 2, 2.0);
        off_psi(rng, psi.as_ref(), &b)?
    };
    let traj = integrate(&flow, &pt0, T_END, DEFAULT_DT)?;
    Ok((flow, traj))
}

fn dynamics_dhdt(rng: &mut ChaCha8Rng) -> Result<f64> {
    let (flow, traj) = lyapunov_sample(rng)?;
    let recs = lyapunov_diagnostics(&flow, &traj)?;
    fold_max(
        recs.iter()
            .map(|r| Ok((r.dhdt_analytic - r.dhdt_numeric).abs())),
    )
}

fn dynamics_frozen(rng: &mut ChaCha8Rng) -> Result<f64> {
    let q: SharedPotential = Arc::new(random_quadratic(rng, 2));
    let hhat = HHatProfile::linear(rng.gen_range(0.5..2.0))?;
    let psi_flow = RelaxationFlow::psi(spin(), hhat.clone());
    let pt0 = {
        let b = uniform(rng, 1, 2.0);
        off_psi(rng, &builtin_spin(), &b)?
    };
    let a = integrate(&psi_flow, &pt0, T_END, DEFAULT_DT)?;
    let x_drift = fold_max(a.points.iter().map(|pt| Ok(max_abs_diff(pt.x(), pt0.x()))))?;
    let phi_flow = RelaxationFlow::phi(q.clone(), hhat);
    let pt1 = {
        let b = uniform(rng, 2, 2.0);
        off_phi(rng, q.as_ref(), &b)?
    };
    let b = integrate(&phi_flow, &pt1, T_END, DEFAULT_DT)?;
    let p_drift = fold_max(b.points.iter().map(|pt| Ok(max_abs_diff(pt.p(), pt1.p()))))?;
    Ok(x_drift.max(p_drift))
}

fn dynamics_tangency(rng: &mut ChaCha8Rng) -> Result<f64> {
    let q: SharedPotential = Arc::new(random_quadratic(rng, 2));
    let hhat = HHatProfile::polynomial(vec![1.0, 0.05])?;
    let cases = [
        (
            LegendreEmbedding::from_psi(spin()),
            ContactHamiltonian::relax_psi(spin(), hhat.clone())?,
            3.0,
        ),
        (
            LegendreEmbedding::from_phi(q.clone()),
            ContactHamiltonian::relax_phi(q.clone(), hhat.clone())?,
            2.0,
        ),
        (
            LegendreEmbedding::from_psi(q.clone()),
            ContactHamiltonian::relax_psi(q.clone(), hhat)?,
            2.0,
        ),
    ];
    fold_max((0..POINTS).map(|i| {
        let (emb, h, r) = &cases[i % cases.len()];
        tangency_residual(emb, h, &uniform(rng, emb.dim(), *r))
    }))
}

fn dynamics_generic(rng: &mut ChaCha8Rng) -> Result<f64> {
    let q: SharedPotential = Arc::new(random_quadratic(rng, 2));
    let hhat = HHatProfile::polynomial(vec![1.3, 0.07])?;
    let flows = [
        RelaxationFlow::psi(q.clone(), hhat.clone()),
        RelaxationFlow::phi(q.clone(), hhat),
    ];
    let hams = [flows[0].hamiltonian()?, flows[1].hamiltonian()?];
    fold_max((0..POINTS).map(|i| {
        let k = i % 2;
        let pt = random_point(rng, 2, 1.5);
        Ok(flows[k]
            .field(&pt)?
            .max_abs_diff(&contact_vector_field(&hams[k], &pt)?))
    }))
}

// ---- metric ----

fn metric_points(rng: &mut ChaCha8Rng) -> Vec<ContactPoint> {
    (0..METRIC_POINTS)
        .map(|i| random_point(rng, cycle_dim(i), 2.0))
        .collect()
}

fn metric_signature(rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut bad = 0usize;
    for pt in metric_points(rng) {
        let (pos, neg) = mrugala_metric(&pt)?.signature();
        if neg != pt.n() || pos != pt.n() + 1 {
            bad += 1;
        }
    }
    Ok(bad as f64)
}

fn metric_inverse(rng: &mut ChaCha8Rng) -> Result<f64> {
    fold_max(
        metric_points(rng)
            .iter()
            .map(|pt| Ok(mrugala_metric(pt)?.inverse_residual())),
    )
}

fn metric_reeb_dual(rng: &mut ChaCha8Rng) -> Result<f64> {
    fold_max(metric_points(rng).iter().map(|pt| {
        let w = metric_dual(pt, &reeb_field(pt.dim()))?;
        Ok(w.max_abs_diff(&crate::chart::contact_form(pt)))
    }))
}

fn metric_christoffel_symmetry(rng: &mut ChaCha8Rng) -> Result<f64> {
    fold_max(metric_points(rng).iter().take(POINTS).map(|pt| {
        let g = christoffel(pt)?;
        let d = g.dim();
        let mut worst: f64 = 0.0;
        for c in 0..d {
            for a in 0..d {
                for b in 0..d {
                    worst = worst.max((g.get(c, a, b) - g.get(c, b, a)).abs());
                }
            }
        }
        Ok(worst)
    }))
}

fn metric_compat(rng: &mut ChaCha8Rng) -> Result<f64> {
    fold_max(metric_points(rng).iter().map(metric_compatibility_residual))
}

fn metric_killing(rng: &mut ChaCha8Rng) -> Result<f64> {
    fold_max(metric_points(rng).iter().flat_map(|pt| {
        ChartField::killing_fields(pt.n())
            .into_iter()
            .map(move |f| killing_residual(pt, f))
    }))
}

fn metric_killing_negative(rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut least = f64::INFINITY;
    for pt in metric_points(rng) {
        least = least.min(killing_residual(&pt, ChartField::EulerX(0))?);
    }
    Ok(least)
}

fn metric_killing_hamiltonian(rng: &mut ChaCha8Rng) -> Result<f64> {
    fold_max(metric_points(rng).iter().flat_map(|pt| {
        ChartField::killing_fields(pt.n())
            .into_iter()
            .map(move |f| {
                let h = f
                    .hamiltonian(pt.dim())?
                    .ok_or(Error::InvalidArgument(format!("{f} has no Hamiltonian")))?;
                Ok(contact_vector_field(&h, pt)?.max_abs_diff(&f.components(pt)?))
            })
    }))
}

fn metric_geodesics(rng: &mut ChaCha8Rng) -> Result<f64> {
    fold_max(metric_points(rng).iter().flat_map(|pt| {
        ChartField::geodesic_fields(pt.n())
            .into_iter()
            .map(move |f| geodesic_residual(pt, f))
    }))
}

/// Relaxation flows of both sides on spin and random quadratics, evaluated
/// at points off the attractor.
fn relaxation_samples(
    rng: &mut ChaCha8Rng,
    count: usize,
) -> Result<Vec<(RelaxationFlow, ContactPoint)>> {
    let hhat = HHatProfile::polynomial(vec![rng.gen_range(0.5..2.0), rng.gen_range(0.0..0.1)])?;
    let q2: SharedPotential = Arc::new(random_quadratic(rng, 2));
    let q3: SharedPotential = Arc::new(random_quadratic(rng, 3));
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let sample = match i % 4 {
            0 => (RelaxationFlow::psi(spin(), hhat.clone()), {
                let b = uniform(rng, 1, 2.0);
                off_psi(rng, &builtin_spin(), &b)?
            }),
            1 => (RelaxationFlow::psi(q3.clone(), hhat.clone()), {
                let b = uniform(rng, 3, 2.0);
                off_psi(rng, q3.as_ref(), &b)?
            }),
            2 => (RelaxationFlow::phi(spin_conjugate(), hhat.clone()), {
                let p = uniform(rng, 1, 0.9);
                off_phi(rng, &SpinConjugate::default(), &p)?
            }),
            _ => (RelaxationFlow::phi(q2.clone(), hhat.clone()), {
                let b = uniform(rng, 2, 2.0);
                off_phi(rng, q2.as_ref(), &b)?
            }),
        };
        out.push(sample);
    }
    Ok(out)
}

fn metric_relaxation_norms(rng: &mut ChaCha8Rng) -> Result<f64> {
    fold_max(
        relaxation_samples(rng, METRIC_POINTS)?
            .iter()
            .map(|(flow, pt)| Ok(characterization_report(flow, pt)?.norm_residual())),
    )
}

fn metric_null(rng: &mut ChaCha8Rng) -> Result<f64> {
    fold_max(relaxation_samples(rng, POINTS)?.iter().map(|(flow, pt)| {
        let emb = flow.embedding();
        let on = emb.embed(emb.base_of(pt))?;
        let xh = flow.field(&on)?;
        Ok(mrugala_metric(&on)?.eval(&xh, &xh).abs())
    }))
}

fn metric_pullback(rng: &mut ChaCha8Rng) -> Result<f64> {
    let q: Vec<Quadratic> = (1..=3).map(|n| random_quadratic(rng, n)).collect();
    fold_max((0..METRIC_POINTS).map(|i| match i % 4 {
        0 => pullback_hessian_residual(
            &builtin_spin(),
            EmbeddingKind::FromPsi,
            &uniform(rng, 1, 3.0),
        ),
        1 => pullback_hessian_residual(
            &SpinConjugate::default(),
            EmbeddingKind::FromPhi,
            &uniform(rng, 1, 0.95),
        ),
        2 => {
            let qq = &q[i % 3];
            pullback_hessian_residual(qq, EmbeddingKind::FromPsi, &uniform(rng, qq.dim(), 2.0))
        }
        _ => {
            let qq = &q[i % 3];
            pullback_hessian_residual(qq, EmbeddingKind::FromPhi, &uniform(rng, qq.dim(), 2.0))
        }
    }))
}

fn metric_coderivative(rng: &mut ChaCha8Rng) -> Result<f64> {
    fold_max(metric_points(rng).iter().take(POINTS).flat_map(|pt| {
        ChartField::killing_fields(pt.n())
            .into_iter()
            .map(move |f| Ok(killing_coderivative(pt, f)?.abs()))
    }))
}

fn metric_flat_identity(rng: &mut ChaCha8Rng) -> Result<f64> {
    let pts = metric_points(rng);
    let zs: Vec<TangentVector> = pts
        .iter()
        .map(|pt| random_vector(rng, pt.n(), 1.0))
        .collect();
    fold_max(pts.iter().zip(&zs).flat_map(|(pt, z)| {
        ChartField::killing_fields(pt.n())
            .into_iter()
            .map(move |f| killing_flat_identity_residual(pt, f, z))
    }))
}

fn control_cases(rng: &mut ChaCha8Rng) -> Vec<(ControlManifold, f64)> {
    let q: SharedPotential = Arc::new(random_quadratic(rng, 2));
    vec![
        (ControlManifold::b_psi(spin()), 2.0),
        (ControlManifold::b_psi(q.clone()), 2.0),
        (ControlManifold::b_phi(spin_conjugate()), 0.9),
        (
            ControlManifold::b_phi(Arc::new(
                q.as_ref()
                    .hessian(&[0.0, 0.0])
                    .map(|h| Quadratic::new(h).expect("SPD"))
                    .expect("hessian")
                    .conjugate(),
            )),
            2.0,
        ),
    ]
}

fn metric_control(rng: &mut ChaCha8Rng) -> Result<f64> {
    let cases = control_cases(rng);
    fold_max((0..POINTS).map(|i| {
        let (cm, r) = &cases[i % cases.len()];
        let base = uniform(rng, cm.dim() - 1, *r);
        let z = rng.gen_range(-2.0..2.0);
        let a = control_metric(cm, &base)?.g;
        let b = control_metric_pullback(cm, &base, z)?.g;
        Ok((a - b).abs().max())
    }))
}

fn metric_commuting(rng: &mut ChaCha8Rng) -> Result<f64> {
    let cases = control_cases(rng);
    fold_max((0..POINTS).map(|i| {
        let (cm, r) = &cases[i % cases.len()];
        let base = uniform(rng, cm.dim() - 1, *r);
        let g = control_to_legendre_metric(cm, &base)?.g;
        Ok((g - cm.potential.hessian(&base)?).abs().max())
    }))
}

fn metric_harmonic(rng: &mut ChaCha8Rng) -> Result<f64> {
    let cases = control_cases(rng);
    let fs: Vec<ControlScalar> = cases
        .iter()
        .map(|(cm, _)| ControlScalar::deficit(cm))
        .collect();
    fold_max((0..POINTS).map(|i| {
        let k = i % cases.len();
        let (cm, r) = &cases[k];
        let base = uniform(rng, cm.dim() - 1, *r);
        Ok(laplace_beltrami(cm, &fs[k], &base, rng.gen_range(-2.0..2.0))?.abs())
    }))
}

fn metric_harmonic_negative(rng: &mut ChaCha8Rng) -> Result<f64> {
    let cases = control_cases(rng);
    let f = ControlScalar::new(|_, z| Ok(z * z));
    let mut least = f64::INFINITY;
    for i in 0..POINTS {
        let (cm, r) = &cases[i % cases.len()];
        let base = uniform(rng, cm.dim() - 1, *r);
        least = least.min(laplace_beltrami(cm, &f, &base, rng.gen_range(0.1..2.0))?.abs());
    }
    Ok(least)
}

fn metric_char_connection(rng: &mut ChaCha8Rng) -> Result<f64> {
    fold_max(
        relaxation_samples(rng, POINTS)?
            .iter()
            .map(|(flow, pt)| Ok(characterization_report(flow, pt)?.connection_residual())),
    )
}

fn metric_char_inner(rng: &mut ChaCha8Rng) -> Result<f64> {
    fold_max(
        relaxation_samples(rng, POINTS)?
            .iter()
            .map(|(flow, pt)| Ok(characterization_report(flow, pt)?.inner_product_residual())),
    )
}

fn metric_tangent_basis(rng: &mut ChaCha8Rng) -> Result<f64> {
    fold_max(relaxation_samples(rng, POINTS)?.iter().map(|(flow, pt)| {
        let emb = flow.embedding();
        let on = emb.embed(emb.base_of(pt))?;
        let ys = tangent_basis(flow.potential.as_ref(), emb.kind, &on)?;
        let ds = emb.constraint_differentials(&on)?;
        let mut worst: f64 = 0.0;
        for y in &ys {
            worst = worst.max(contact_form_eval(&on, y)?.abs());
            for d in &ds {
                worst = worst.max(d.apply(y)?.abs());
            }
        }
        Ok(worst)
    }))
}

// ---- statmech ----

fn families() -> Vec<FiniteExponentialFamily> {
    vec![
        FiniteExponentialFamily::spin(),
        FiniteExponentialFamily::new(
            "four-state",
            vec![0.1, -0.3, 0.0, 0.4],
            vec![
                vec![0.0, 1.0],
                vec![1.0, -1.0],
                vec![2.0, 0.5],
                vec![-1.0, 2.0],
            ],
        )
        .expect("valid family"),
        FiniteExponentialFamily::grand_canonical(&[
            (0.0, 0.0),
            (1.0, 1.0),
            (2.5, 1.0),
            (3.0, 2.0),
            (4.5, 2.0),
            (5.0, 3.0),
        ])
        .expect("valid family"),
    ]
}

fn family_samples(rng: &mut ChaCha8Rng) -> Vec<(FiniteExponentialFamily, Vec<f64>)> {
    let fams = families();
    (0..POINTS)
        .map(|i| {
            let f = fams[i % fams.len()].clone();
            let th = uniform(rng, f.dim(), 1.5);
            (f, th)
        })
        .collect()
}

fn stat_normalization(rng: &mut ChaCha8Rng) -> Result<f64> {
    fold_max(
        family_samples(rng)
            .iter()
            .map(|(f, th)| Ok((f.probabilities(th)?.iter().sum::<f64>() - 1.0).abs())),
    )
}

fn stat_fisher(rng: &mut ChaCha8Rng) -> Result<f64> {
    fold_max(
        family_samples(rng)
            .iter()
            .map(|(f, th)| Ok((f.fisher_matrix(th)? - f.hessian(th)?).abs().max())),
    )
}

fn stat_alpha_one(rng: &mut ChaCha8Rng) -> Result<f64> {
    fold_max(family_samples(rng).iter().map(|(f, th)| {
        Ok(alpha_connection(f, th, 1.0)?
            .upper
            .iter()
            .fold(0.0, |m: f64, v| m.max(v.abs())))
    }))
}

fn stat_alpha_minus_one(rng: &mut ChaCha8Rng) -> Result<f64> {
    fold_max(
        family_samples(rng)
            .iter()
            .map(|(f, th)| eta_flatness_residual(f, th)),
    )
}

/// `Gamma_111 = (1 - alpha)/2 psi'''` with `psi''' = -2 sech^2 tanh`.
fn stat_spin_alpha(rng: &mut ChaCha8Rng) -> Result<f64> {
    let fam = FiniteExponentialFamily::spin();
    fold_max((0..POINTS).map(|_| {
        let th: f64 = rng.gen_range(-3.0..3.0);
        let alpha = rng.gen_range(-2.0..2.0);
        let psi3 = -2.0 * th.tanh() / th.cosh().powi(2);
        Ok(
            (alpha_connection(&fam, &[th], alpha)?.lower(0, 0, 0) - 0.5 * (1.0 - alpha) * psi3)
                .abs(),
        )
    }))
}

fn stat_dual_flat(rng: &mut ChaCha8Rng) -> Result<f64> {
    fold_max(
        family_samples(rng)
            .iter()
            .take(60)
            .map(|(f, th)| Ok(dual_flat_report(f, th)?.residual)),
    )
}

fn stat_eta_round_trip(rng: &mut ChaCha8Rng) -> Result<f64> {
    fold_max(family_samples(rng).iter().take(60).map(|(f, th)| {
        let r = dual_flat_report(f, th)?;
        Ok(max_abs_diff(&r.theta_recovered, th))
    }))
}

fn stat_detailed_balance(rng: &mut ChaCha8Rng) -> Result<f64> {
    fold_max((0..POINTS).map(|_| {
        Ok(detailed_balance_residual(
            rng.gen_range(-3.0..3.0),
            rng.gen_range(0.1..3.0),
        ))
    }))
}

fn stat_stationary(rng: &mut ChaCha8Rng) -> Result<f64> {
    fold_max((0..POINTS).map(|_| {
        let s = SpinState::canonical(rng.gen_range(-3.0..3.0));
        let next = master_equation_step(&s, rng.gen_range(0.1..3.0), 0.01)?;
        Ok((next.p_plus - s.p_plus)
            .abs()
            .max((next.p_minus - s.p_minus).abs()))
    }))
}

fn stat_kinetic(rng: &mut ChaCha8Rng) -> Result<f64> {
    fold_max((0..POINTS).map(|_| {
        let (sig, th, g) = (
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(0.1..3.0),
        );
        let s = SpinState::from_mean(sig, th)?;
        Ok((master_mean_rate(&s, g) - kinetic_model_rhs(sig, th, g)).abs())
    }))
}

fn equivalence_params(rng: &mut ChaCha8Rng) -> Vec<(f64, f64, f64)> {
    (0..20)
        .map(|_| {
            (
                rng.gen_range(0.5..2.0),
                rng.gen_range(-0.95..0.95),
                rng.gen_range(-2.0..2.0),
            )
        })
        .collect()
}

fn stat_equivalence(rng: &mut ChaCha8Rng) -> Result<f64> {
    let params = equivalence_params(rng);
    let results: Vec<Result<f64>> = params
        .par_iter()
        .map(|&(g, p0, th)| Ok(spin_equivalence_check(g, p0, th, T_END)?.max_deviation))
        .collect();
    fold_max(results)
}

/// `z(t) = psi(theta) + (z_0 - psi(theta)) e^{-gamma t}` with `z_0 = 0`.
fn stat_z_channel(rng: &mut ChaCha8Rng) -> Result<f64> {
    let params = equivalence_params(rng);
    let results: Vec<Result<f64>> = params
        .par_iter()
        .take(6)
        .map(|&(g, p0, th)| {
            let run = spin_equivalence_check(g, p0, th, T_END)?;
            let psi = builtin_spin().value(&[th])?;
            fold_max(
                run.rows
                    .iter()
                    .map(|r| Ok((r.z - psi * (1.0 - (-g * r.t).exp())).abs())),
            )
        })
        .collect();
    fold_max(results)
}
