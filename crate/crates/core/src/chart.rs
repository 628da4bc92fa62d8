//! Darboux chart of the contact manifold.
//!
//! Every point, tangent vector and covector is stored as one flat array in
//! the order `(x_1..x_n, p_1..p_n, z)`. All other modules index coordinates
//! through [`x_index`], [`p_index`] and [`z_index`].
//!
//! The contact form is `lambda = dz - p_a dx^a` ([`CONTACT_FORM_SIGN`] is the
//! coefficient in front of `p_a dx^a`), so `d lambda = dx^a ^ dp_a` and the
//! Reeb field is `d/dz`.

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Coefficient of `p_a dx^a` in the contact form `lambda = dz + SIGN p_a dx^a`.
pub const CONTACT_FORM_SIGN: f64 = -1.0;

/// Number of conjugate pairs `n`; the ambient dimension is `2n + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChartDim(usize);

impl ChartDim {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Self(n))
    }

    pub fn n(self) -> usize {
        self.0
    }

    pub fn ambient(self) -> usize {
        2 * self.0 + 1
    }
}

#[inline]
pub fn x_index(a: usize) -> usize {
    a
}

#[inline]
pub fn p_index(n: usize, a: usize) -> usize {
    n + a
}

#[inline]
pub fn z_index(n: usize) -> usize {
    2 * n
}

fn check_block(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

macro_rules! flat_coords {
    ($(#[$meta:meta])* $name:ident, $shadow:ident, $xk:ident, $pk:ident, $zk:ident, $what:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            n: usize,
            data: Vec<f64>,
        }

        impl $name {
            /// Builds from the three blocks; rejects mismatched or non-finite input.
            pub fn new($xk: &[f64], $pk: &[f64], $zk: f64) -> Result<Self> {
                let n = $xk.len();
                if n == 0 {
                    return Err(Error::ZeroDimension);
                }
                check_block(n, $pk.len())?;
                let mut data = Vec::with_capacity(2 * n + 1);
                data.extend_from_slice($xk);
                data.extend_from_slice($pk);
                data.push($zk);
                Self::from_flat(data)
            }

            /// Builds from a flat `(x, p, z)` array of odd length `2n + 1`.
            pub fn from_flat(data: Vec<f64>) -> Result<Self> {
                if data.len() < 3 || data.len() % 2 == 0 {
                    return Err(Error::DimensionMismatch {
                        expected: 2 * (data.len() / 2).max(1) + 1,
                        found: data.len(),
                    });
                }
                if data.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite($what));
                }
                Ok(Self { n: data.len() / 2, data })
            }

            pub(crate) fn from_flat_unchecked(data: Vec<f64>) -> Self {
                debug_assert!(data.len() % 2 == 1);
                Self { n: data.len() / 2, data }
            }

            pub fn zeros(dim: ChartDim) -> Self {
                Self { n: dim.n(), data: vec![0.0; dim.ambient()] }
            }

            pub fn n(&self) -> usize {
                self.n
            }

            pub fn dim(&self) -> ChartDim {
                ChartDim(self.n)
            }

            pub fn $xk(&self) -> &[f64] {
                &self.data[..self.n]
            }

            pub fn $pk(&self) -> &[f64] {
                &self.data[self.n..2 * self.n]
            }

            pub fn $zk(&self) -> f64 {
                self.data[2 * self.n]
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.data
            }

            pub fn into_vec(self) -> Vec<f64> {
                self.data
            }

            pub fn is_finite(&self) -> bool {
                self.data.iter().all(|v| v.is_finite())
            }

            /// Largest componentwise absolute difference.
            pub fn max_abs_diff(&self, other: &Self) -> f64 {
                self.data
                    .iter()
                    .zip(&other.data)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            }
        }

        #[derive(Serialize, Deserialize)]
        struct $shadow {
            $xk: Vec<f64>,
            $pk: Vec<f64>,
            $zk: f64,
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                $shadow {
                    $xk: self.$xk().to_vec(),
                    $pk: self.$pk().to_vec(),
                    $zk: self.$zk(),
                }
                .serialize(s)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let raw = $shadow::deserialize(d)?;
                $name::new(&raw.$xk, &raw.$pk, raw.$zk).map_err(serde::de::Error::custom)
            }
        }
    };
}

flat_coords!(
    /// A point `(x, p, z)` of the `(2n+1)`-dimensional chart.
    ContactPoint, ContactPointRepr, x, p, z, "contact point"
);
flat_coords!(
    /// Tangent vector with components on `(d/dx, d/dp, d/dz)`.
    TangentVector, TangentVectorRepr, dx, dp, dz, "tangent vector"
);
flat_coords!(
    /// One-form with coefficients on `(dx, dp, dz)`.
    CoVector, CoVectorRepr, cx, cp, cz, "covector"
);

impl TangentVector {
    /// Coordinate basis vector with a single unit component at flat index `i`.
    pub fn basis(dim: ChartDim, i: usize) -> Result<Self> {
        if i >= dim.ambient() {
            return Err(Error::IndexOutOfRange {
                index: i,
                dim: dim.ambient(),
            });
        }
        let mut data = vec![0.0; dim.ambient()];
        data[i] = 1.0;
        Ok(Self::from_flat_unchecked(data))
    }
}

impl CoVector {
    /// Pairing `omega(v)`.
    pub fn apply(&self, v: &TangentVector) -> Result<f64> {
        check_block(self.n, v.n)?;
        Ok(self.data.iter().zip(&v.data).map(|(a, b)| a * b).sum())
    }
}

/// `lambda(v) = v.dz - p . v.dx` at `pt`.
pub fn contact_form_eval(pt: &ContactPoint, v: &TangentVector) -> Result<f64> {
    check_block(pt.n(), v.n())?;
    let pairing: f64 = pt.p().iter().zip(v.dx()).map(|(p, dx)| p * dx).sum();
    Ok(v.dz() + CONTACT_FORM_SIGN * pairing)
}

/// Coefficients of `lambda` at `pt`: `(cx, cp, cz) = (-p, 0, 1)`.
pub fn contact_form(pt: &ContactPoint) -> CoVector {
    let n = pt.n();
    let mut data = vec![0.0; 2 * n + 1];
    for a in 0..n {
        data[x_index(a)] = CONTACT_FORM_SIGN * pt.p()[a];
    }
    data[z_index(n)] = 1.0;
    CoVector::from_flat_unchecked(data)
}

/// `d lambda (v, w) = sum_a (v.dx_a w.dp_a - w.dx_a v.dp_a)`.
///
/// The value does not depend on the base point since `d lambda` has constant
/// coefficients in Darboux coordinates.
pub fn d_lambda_eval(v: &TangentVector, w: &TangentVector) -> Result<f64> {
    check_block(v.n(), w.n())?;
    Ok((0..v.n())
        .map(|a| v.dx()[a] * w.dp()[a] - w.dx()[a] * v.dp()[a])
        .sum())
}

/// Interior product `iota_v d lambda`, as a covector.
pub fn d_lambda_contract(v: &TangentVector) -> CoVector {
    let n = v.n();
    let mut data = vec![0.0; 2 * n + 1];
    for a in 0..n {
        data[x_index(a)] = -v.dp()[a];
        data[p_index(n, a)] = v.dx()[a];
    }
    CoVector::from_flat_unchecked(data)
}

/// The Reeb field `d/dz`.
pub fn reeb_field(dim: ChartDim) -> TangentVector {
    let mut data = vec![0.0; dim.ambient()];
    data[z_index(dim.n())] = 1.0;
    TangentVector::from_flat_unchecked(data)
}

/// `lambda ^ (d lambda)^n / n!` evaluated on `2n + 1` vectors.
///
/// With the `1/n!` normalization the form equals
/// `dz ^ dx^1 ^ dp_1 ^ ... ^ dx^n ^ dp_n`, so it is the determinant of the
/// component matrix with rows ordered `(z, x_1, p_1, ..., x_n, p_n)`. The
/// frame `(d/dx, d/dp, d/dz)` for `n = 1` evaluates to `+1`.
pub fn volume_form_value(vectors: &[TangentVector]) -> Result<f64> {
    let first = vectors.first().ok_or(Error::WrongFrameCount {
        expected: 3,
        found: 0,
    })?;
    let n = first.n();
    let dim = 2 * n + 1;
    if vectors.len() != dim {
        return Err(Error::WrongFrameCount {
            expected: dim,
            found: vectors.len(),
        });
    }
    for v in vectors {
        check_block(n, v.n())?;
    }
    let mut rows = Vec::with_capacity(dim);
    rows.push(z_index(n));
    for a in 0..n {
        rows.push(x_index(a));
        rows.push(p_index(n, a));
    }
    let m = DMatrix::from_fn(dim, dim, |r, c| vectors[c].as_slice()[rows[r]]);
    Ok(m.determinant())
}
