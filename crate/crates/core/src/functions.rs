//! The decaying profiles `p` and `q` and the construction constant `c0`.
//!
//! Everything is evaluated through the shifted argument `s = t + c0`. The
//! unshifted profiles `p0`, `q0` and their derivatives take `s` directly;
//! the [`ConstructionParams`] methods take `t` and enforce the domain
//! `t >= -1`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kv::KvDoc;

/// Lower bound on `c0` that makes `q0` decreasing on the whole domain.
pub const C0_MIN: f64 = 82.0;

pub const DEFAULT_QUAD_TOL: f64 = 1e-9;
pub const DEFAULT_ODE_REL_TOL: f64 = 1e-9;
pub const DEFAULT_ODE_ABS_TOL: f64 = 1e-12;

/// `s^{-1/2}`.
#[inline]
pub fn p0(s: f64) -> f64 {
    1.0 / s.sqrt()
}

/// `s^{-1/2} + s^{-3/4} sin(s^{1/4})`.
#[inline]
pub fn q0(s: f64) -> f64 {
    let r2 = s.sqrt();
    let u = r2.sqrt();
    1.0 / r2 + u.sin() / (r2 * u)
}

/// Closed-form derivative of [`q0`].
#[inline]
pub fn q0_prime(s: f64) -> f64 {
    let r2 = s.sqrt();
    let u = r2.sqrt();
    let (sin_u, cos_u) = u.sin_cos();
    let s32 = s * r2;
    -0.5 / s32 - 0.75 * sin_u / (s32 * u) + 0.25 * cos_u / s32
}

/// Closed-form second derivative of [`q0`], kept in its five-term form.
#[inline]
pub fn q0_second(s: f64) -> f64 {
    let r2 = s.sqrt();
    let u = r2.sqrt();
    let (sin_u, cos_u) = u.sin_cos();
    let s52 = s * s * r2;
    let s114 = s52 * u;
    let s94 = s * s * u;
    0.75 / s52 + 21.0 / 16.0 * sin_u / s114
        - 3.0 / 16.0 * cos_u / s52
        - 0.375 * cos_u / s52
        - sin_u / (16.0 * s94)
}

/// `(2k pi + pi/2)^4`.
pub fn c0_for_k(k: u64) -> f64 {
    let base = (2.0 * k as f64 + 0.5) * PI;
    let sq = base * base;
    sq * sq
}

/// Parameters of one instance of the counterexample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstructionParams {
    pub k: u64,
    pub c0: f64,
    /// `q(-1)`; upper end of the core domain of `g`.
    pub rho: f64,
    pub delta: f64,
    pub quad_tol: f64,
    pub ode_rel_tol: f64,
    pub ode_abs_tol: f64,
}

/// Picks the smallest `k` such that `c0 = (2k pi + pi/2)^4` satisfies
/// `c0 >= 82`, `1/sqrt(c0 - 1) < delta` and `q(-1) < delta`.
pub fn choose_c0(delta: f64) -> Result<ConstructionParams> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "delta must be positive and finite, got {delta}"
        )));
    }
    // All three constraints are monotone in k, so start just below the
    // analytic threshold of the second one and scan upward.
    let need = 1.0 / (delta * delta) + 1.0;
    let k_lower = ((need.sqrt().sqrt() / PI - 0.5) / 2.0).floor();
    let mut k = if k_lower.is_finite() && k_lower > 1.0 {
        k_lower as u64 - 1
    } else {
        0
    };
    loop {
        let c0 = c0_for_k(k);
        if !c0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "delta = {delta} requires c0 beyond double range"
            )));
        }
        if c0 >= C0_MIN && 1.0 / (c0 - 1.0).sqrt() < delta && q0(c0 - 1.0) < delta {
            return ConstructionParams::from_k(k, delta);
        }
        k += 1;
    }
}

impl ConstructionParams {
    /// Builds the parameter set for a given `k` with default tolerances.
    pub fn from_k(k: u64, delta: f64) -> Result<Self> {
        let c0 = c0_for_k(k);
        if c0 < C0_MIN {
            return Err(Error::InvalidParameter(format!(
                "k = {k} gives c0 = {c0} < {C0_MIN}"
            )));
        }
        let params = Self {
            k,
            c0,
            rho: q0(c0 - 1.0),
            delta,
            quad_tol: DEFAULT_QUAD_TOL,
            ode_rel_tol: DEFAULT_ODE_REL_TOL,
            ode_abs_tol: DEFAULT_ODE_ABS_TOL,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("c0", self.c0),
            ("rho", self.rho),
            ("delta", self.delta),
            ("quad_tol", self.quad_tol),
            ("ode_rel_tol", self.ode_rel_tol),
            ("ode_abs_tol", self.ode_abs_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.c0 < C0_MIN {
            return Err(Error::InvalidParameter(format!(
                "c0 = {} is below {C0_MIN}",
                self.c0
            )));
        }
        Ok(())
    }

    #[inline]
    fn shift(&self, t: f64) -> Result<f64> {
        if t >= -1.0 {
            Ok(t + self.c0)
        } else {
            Err(Error::Domain { t })
        }
    }

    pub fn p(&self, t: f64) -> Result<f64> {
        self.shift(t).map(p0)
    }

    pub fn q(&self, t: f64) -> Result<f64> {
        self.shift(t).map(q0)
    }

    pub fn q_prime(&self, t: f64) -> Result<f64> {
        self.shift(t).map(q0_prime)
    }

    pub fn q_second(&self, t: f64) -> Result<f64> {
        self.shift(t).map(q0_second)
    }

    /// Upper bound `2/sqrt(c0)` on the first-term running integral.
    pub fn first_term_bound(&self) -> f64 {
        2.0 / self.c0.sqrt()
    }

    /// `c0^{1/4}`, i.e. `2k pi + pi/2` up to rounding.
    pub fn u0(&self) -> f64 {
        self.c0.sqrt().sqrt()
    }

    pub fn to_kv(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        doc.push("k", self.k.to_string());
        doc.push_real("c0", self.c0);
        doc.push_real("rho", self.rho);
        doc.push_real("delta", self.delta);
        doc.push_real("quad_tol", self.quad_tol);
        doc.push_real("ode_rel_tol", self.ode_rel_tol);
        doc.push_real("ode_abs_tol", self.ode_abs_tol);
        doc
    }

    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        let params = Self {
            k: doc.uint("k")?,
            c0: doc.real("c0")?,
            rho: doc.real("rho")?,
            delta: doc.real("delta")?,
            quad_tol: doc.real("quad_tol")?,
            ode_rel_tol: doc.real("ode_rel_tol")?,
            ode_abs_tol: doc.real("ode_abs_tol")?,
        };
        params.validate()?;
        Ok(params)
    }
}
