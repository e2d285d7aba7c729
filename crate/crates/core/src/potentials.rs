//! Radial interaction potentials with a gradient kink at the origin.
//!
//! Every potential here is even, vanishes at the origin, has a bounded
//! gradient (`|∇W| ≤ w_inf`) and is `lambda`-convex. The velocity field of
//! the aggregation equation is built from the *hatted* gradient, which is
//! `∇W(x)` away from the origin and exactly zero at it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{norm, norm2, Point, Real};

/// Shape of the radial profile `W(x) = φ(|x|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialKind<T> {
    /// `φ(r) = 1 - exp(-a r)`.
    Morse { a: T },
    /// `φ(r) = r`.
    AbsoluteValue,
    /// Morse profile with the quadratic cap of radius `eps` at the origin.
    QuadraticCappedMorse { a: T, eps: T },
    /// `|x|` with the quadratic cap of radius `eps` at the origin.
    CappedAbs { eps: T },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potential<T> {
    kind: PotentialKind<T>,
    lambda: T,
    w_inf: T,
    /// Value of the capped profile at the origin, subtracted so `W(0) = 0`.
    offset: T,
}

impl<T: Real> Potential<T> {
    pub fn morse(a: T) -> Result<Self> {
        if !(a > T::zero()) || !a.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Morse rate must be positive and finite, got {a}"
            )));
        }
        Ok(Potential {
            kind: PotentialKind::Morse { a },
            lambda: -(a * a),
            w_inf: a,
            offset: T::zero(),
        })
    }

    pub fn absolute_value() -> Self {
        Potential {
            kind: PotentialKind::AbsoluteValue,
            lambda: T::zero(),
            w_inf: T::one(),
            offset: T::zero(),
        }
    }

    pub fn kind(&self) -> PotentialKind<T> {
        self.kind
    }

    /// Convexity modulus.
    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// Uniform bound on the gradient norm.
    pub fn w_inf(&self) -> T {
        self.w_inf
    }

    /// `(lambda, w_inf)`, the tightest constants for the built-in kinds.
    pub fn constants(&self) -> (T, T) {
        (self.lambda, self.w_inf)
    }

    pub fn is_mollified(&self) -> bool {
        matches!(
            self.kind,
            PotentialKind::QuadraticCappedMorse { .. } | PotentialKind::CappedAbs { .. }
        )
    }

    /// Radius of the quadratic cap, if any.
    pub fn cap_radius(&self) -> Option<T> {
        match self.kind {
            PotentialKind::QuadraticCappedMorse { eps, .. } | PotentialKind::CappedAbs { eps } => {
                Some(eps)
            }
            _ => None,
        }
    }

    /// C¹ approximation that replaces the profile on `[0, eps]` by the
    /// quadratic matching value and slope at `eps` and with zero slope at 0.
    ///
    /// Gradients are unchanged outside `B(0, eps)` and never larger in norm
    /// inside it; `lambda` and `w_inf` carry over.
    pub fn mollify(&self, eps: T) -> Result<Self> {
        if !(eps > T::zero()) || !eps.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mollification radius must be positive, got {eps}"
            )));
        }
        let kind = match self.kind {
            PotentialKind::Morse { a } => PotentialKind::QuadraticCappedMorse { a, eps },
            PotentialKind::AbsoluteValue => PotentialKind::CappedAbs { eps },
            _ => {
                return Err(Error::InvalidArgument(
                    "potential is already mollified".to_string(),
                ))
            }
        };
        let mut p = Potential {
            kind,
            lambda: self.lambda,
            w_inf: self.w_inf,
            offset: T::zero(),
        };
        p.offset = p.raw_profile(T::zero()).0;
        Ok(p)
    }

    /// Base (uncapped) profile and its derivative at `r ≥ 0`.
    #[inline]
    fn base_profile(&self, r: T) -> (T, T) {
        match self.kind {
            PotentialKind::Morse { a } | PotentialKind::QuadraticCappedMorse { a, .. } => {
                let e = (-a * r).exp();
                (-(-a * r).exp_m1(), a * e)
            }
            PotentialKind::AbsoluteValue | PotentialKind::CappedAbs { .. } => (r, T::one()),
        }
    }

    #[inline]
    fn base_slope(&self, r: T) -> T {
        match self.kind {
            PotentialKind::Morse { a } | PotentialKind::QuadraticCappedMorse { a, .. } => a * (-a * r).exp(),
            PotentialKind::AbsoluteValue | PotentialKind::CappedAbs { .. } => T::one(),
        }
    }

    fn raw_slope(&self, r: T) -> T {
        match self.cap_radius() {
            Some(eps) if r < eps => self.base_slope(eps) / eps * r,
            _ => self.base_slope(r),
        }
    }

    /// Profile before the origin offset is removed.
    fn raw_profile(&self, r: T) -> (T, T) {
        match self.cap_radius() {
            Some(eps) if r < eps => {
                let (phi_e, slope_e) = self.base_profile(eps);
                let half = T::lit(0.5);
                let curv = slope_e / eps;
                (phi_e - half * slope_e * eps + half * curv * r * r, curv * r)
            }
            _ => self.base_profile(r),
        }
    }

    /// `φ(r)` and `φ'(r)` of the radial profile, `r ≥ 0`.
    #[inline]
    pub fn profile(&self, r: T) -> (T, T) {
        let (v, d) = self.raw_profile(r);
        (v - self.offset, d)
    }

    /// Radial derivative `φ'(r)`; zero at `r = 0`.
    #[inline]
    pub fn radial_derivative(&self, r: T) -> T {
        if r == T::zero() {
            T::zero()
        } else {
            self.raw_profile(r).1
        }
    }

    #[inline]
    pub fn eval(&self, x: Point<T>) -> T {
        self.profile(norm(x)).0
    }

    /// Hatted gradient: `∇W(x)` for `x ≠ 0`, exactly zero at the origin.
    #[inline]
    pub fn grad_hat(&self, x: Point<T>) -> Point<T> {
        let r = norm2(x).sqrt();
        if r == T::zero() {
            return [T::zero(), T::zero()];
        }
        let g = self.raw_slope(r) / r;
        [g * x[0], g * x[1]]
    }
}

/// Serialized form used in run configurations,
/// e.g. `{"kind": "morse", "a": 5.0}` or `{"kind": "abs", "mollify_eps": 0.01}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub kind: PotentialName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mollify_eps: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialName {
    Morse,
    Abs,
}

impl PotentialSpec {
    pub fn morse(a: f64) -> Self {
        PotentialSpec {
            kind: PotentialName::Morse,
            a: Some(a),
            mollify_eps: None,
        }
    }

    pub fn abs() -> Self {
        PotentialSpec {
            kind: PotentialName::Abs,
            a: None,
            mollify_eps: None,
        }
    }

    pub fn build<T: Real>(&self) -> Result<Potential<T>> {
        let base = match self.kind {
            PotentialName::Morse => {
                let a = self
                    .a
                    .ok_or_else(|| Error::config("potential.a", "required for kind `morse`"))?;
                Potential::morse(T::lit(a))
                    .map_err(|e| Error::config("potential.a", e.to_string()))?
            }
            PotentialName::Abs => {
                if self.a.is_some() {
                    return Err(Error::config("potential.a", "not used by kind `abs`"));
                }
                Potential::absolute_value()
            }
        };
        match self.mollify_eps {
            Some(eps) => base
                .mollify(T::lit(eps))
                .map_err(|e| Error::config("potential.mollify_eps", e.to_string())),
            None => Ok(base),
        }
    }

    /// Parses the CLI shorthand `morse:5` / `abs`.
    pub fn parse_short(s: &str) -> Result<Self> {
        let mut parts = s.splitn(2, ':');
        let name = parts.next().unwrap_or_default();
        let arg = parts.next();
        match (name, arg) {
            ("abs", None) => Ok(PotentialSpec::abs()),
            ("morse", Some(a)) => a
                .parse::<f64>()
                .map(PotentialSpec::morse)
                .map_err(|_| Error::InvalidArgument(format!("bad Morse rate `{a}`"))),
            _ => Err(Error::InvalidArgument(format!(
                "unknown potential `{s}` (expected `abs` or `morse:<a>`)"
            ))),
        }
    }
}
