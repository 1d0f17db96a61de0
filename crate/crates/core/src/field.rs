//! The vector fields `f`, `g` and `sigma`.
//!
//! `g` is defined on `(0, rho)` as `q' ∘ q^{-1}`, set to zero at the
//! origin, continued past `r* = rho (1 - 1e-3)` by a C¹ quadratic tail and
//! reflected to an odd function on the real line.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{q0, q0_prime, q0_second, ConstructionParams};
use crate::kv::KvDoc;

/// Relative offset of the tail junction below `rho`.
pub const TAIL_OFFSET: f64 = 1e-3;
pub const DEFAULT_INVERSION_TOL: f64 = 1e-12;
pub const DEFAULT_STIFFNESS: f64 = 1.0;

/// Bisection stops once the bracket is this narrow relative to its upper end.
const BISECTION_REL_WIDTH: f64 = 1e-12;
const MAX_DOUBLINGS: usize = 2048;
/// Below this magnitude `q^{-1}(r)` would overflow; `g` is replaced by its
/// cubic asymptote, which underflows to zero there anyway.
const TINY_R: f64 = 1e-100;

/// `f(x) = -x^3 / 2`.
#[inline]
pub fn f_field(x: f64) -> f64 {
    -0.5 * x * x * x
}

#[inline]
pub fn f_field_prime(x: f64) -> f64 {
    -1.5 * x * x
}

/// Solves `q0(s) = r` for `s` in `[c0 - 1, inf)`.
///
/// The bracket starts at `[c0 - 1, c0 + 1]` and its upper end is pushed out
/// geometrically in `t` until `q0(hi) < r`. Bisection then narrows it to a
/// relative width of `1e-12`, followed by one secant step.
pub fn invert_q_shifted(r: f64, c0: f64) -> Result<f64> {
    let rho = q0(c0 - 1.0);
    if !(r > 0.0 && r < rho) {
        return Err(Error::InversionDomain { r, rho });
    }
    let mut lo = c0 - 1.0;
    let mut step = 1.0;
    let mut hi = c0 + step;
    let mut doublings = 0;
    while q0(hi) >= r {
        lo = hi;
        step *= 2.0;
        hi = c0 + step;
        doublings += 1;
        if doublings > MAX_DOUBLINGS || !hi.is_finite() {
            return Err(Error::BracketNotFound { r, doublings });
        }
    }
    // invariant: q0(lo) >= r > q0(hi)
    while hi - lo > BISECTION_REL_WIDTH * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if q0(mid) >= r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (f_lo, f_hi) = (q0(lo) - r, q0(hi) - r);
    let mut best = if f_lo.abs() <= f_hi.abs() {
        (lo, f_lo)
    } else {
        (hi, f_hi)
    };
    if f_lo != f_hi {
        let sec = lo - f_lo * (hi - lo) / (f_hi - f_lo);
        if sec >= lo && sec <= hi {
            let f_sec = q0(sec) - r;
            if f_sec.abs() < best.1.abs() {
                best = (sec, f_sec);
            }
        }
    }
    Ok(best.0)
}

/// Immutable description of `g` for one parameter set.
#[derive(Debug, Clone)]
pub struct FieldTable {
    pub params: ConstructionParams,
    /// Tail junction `r*`.
    pub tail_anchor: f64,
    /// `g(r*)`.
    pub tail_value: f64,
    /// `g'(r*)`.
    pub tail_slope: f64,
    /// Curvature of the quadratic tail.
    pub tail_curvature: f64,
    pub inversion_tol: f64,
    table: Option<HermiteTable>,
}

impl FieldTable {
    pub fn new(params: ConstructionParams) -> Result<Self> {
        params.validate()?;
        let rho = params.rho;
        let anchor = rho * (1.0 - TAIL_OFFSET);
        let s_anchor = invert_q_shifted(anchor, params.c0)?;
        let value = q0_prime(s_anchor);
        let slope = q0_second(s_anchor) / q0_prime(s_anchor);
        // Keep the tail strictly negative: its maximum is
        // value + slope^2 / (4 curvature) when the slope is positive.
        let curvature = (value.abs() / (rho * rho)).max(slope * slope / (2.0 * value.abs()));
        Ok(Self {
            params,
            tail_anchor: anchor,
            tail_value: value,
            tail_slope: slope,
            tail_curvature: curvature,
            inversion_tol: DEFAULT_INVERSION_TOL,
            table: None,
        })
    }

    /// Same field, with core evaluations served from a Hermite table on
    /// `u = s^{1/4}` knots spaced `du` apart up to `u_max`.
    pub fn with_table(params: ConstructionParams, du: f64, u_max: f64) -> Result<Self> {
        let mut field = Self::new(params)?;
        field.table = Some(HermiteTable::build(&field, du, u_max)?);
        Ok(field)
    }

    pub fn table(&self) -> Option<&HermiteTable> {
        self.table.as_ref()
    }

    pub fn rho(&self) -> f64 {
        self.params.rho
    }

    /// `q^{-1}(r)` on `(0, rho)`, returned as a time `t > -1`.
    pub fn phi(&self, r: f64) -> Result<f64> {
        let s = invert_q_shifted(r, self.params.c0)?;
        let t = s - self.params.c0;
        let resid = (q0(s) - r).abs();
        if resid > self.inversion_tol * r {
            // Bisection to machine resolution cannot get closer than this.
            let floor = 8.0 * f64::EPSILON * r;
            if resid > floor {
                return Err(Error::BracketNotFound { r, doublings: 0 });
            }
        }
        Ok(t)
    }

    /// `g` on `[0, rho)` by direct inversion.
    pub fn g_core(&self, r: f64) -> Result<f64> {
        if r == 0.0 {
            return Ok(0.0);
        }
        if r > 0.0 && r < TINY_R {
            return Ok(-0.5 * r * r * r);
        }
        let s = invert_q_shifted(r, self.params.c0)?;
        Ok(q0_prime(s))
    }

    /// `g'` on `[0, rho)` through the composed closed forms `q''(phi) / q'(phi)`.
    pub fn g_prime_core(&self, r: f64) -> Result<f64> {
        if r == 0.0 {
            return Ok(0.0);
        }
        if r > 0.0 && r < TINY_R {
            return Ok(-1.5 * r * r);
        }
        let s = invert_q_shifted(r, self.params.c0)?;
        Ok(q0_second(s) / q0_prime(s))
    }

    fn tail(&self, r: f64) -> f64 {
        let d = r - self.tail_anchor;
        self.tail_value + self.tail_slope * d - self.tail_curvature * d * d
    }

    fn tail_prime(&self, r: f64) -> f64 {
        let d = r - self.tail_anchor;
        self.tail_slope - 2.0 * self.tail_curvature * d
    }

    fn positive_branch(&self, r: f64) -> f64 {
        if r > self.tail_anchor {
            return self.tail(r);
        }
        if let Some(table) = &self.table {
            if let Some(v) = table.eval(r) {
                return v;
            }
        }
        // r in [0, r*] lies inside (0, rho), so inversion cannot fail.
        self.g_core(r).unwrap_or(0.0)
    }

    /// `g` on the whole real line.
    pub fn g(&self, r: f64) -> f64 {
        if r >= 0.0 {
            self.positive_branch(r)
        } else {
            -self.positive_branch(-r)
        }
    }

    /// `g'` on the whole real line (even function).
    pub fn g_prime(&self, r: f64) -> f64 {
        let a = r.abs();
        if a > self.tail_anchor {
            self.tail_prime(a)
        } else {
            self.g_prime_core(a).unwrap_or(0.0)
        }
    }
}

/// Cubic Hermite table of `(r, g, g')` built from forward evaluations at
/// knots uniform in `u = s^{1/4}`.
#[derive(Debug, Clone)]
pub struct HermiteTable {
    /// Ascending in `r`.
    r: Vec<f64>,
    g: Vec<f64>,
    dg: Vec<f64>,
}

impl HermiteTable {
    pub fn build(field: &FieldTable, du: f64, u_max: f64) -> Result<Self> {
        let c0 = field.params.c0;
        let s_anchor = invert_q_shifted(field.tail_anchor, c0)?;
        let u_anchor = s_anchor.sqrt().sqrt();
        if !(du > 0.0) || !(u_max > u_anchor + du) {
            return Err(Error::InvalidParameter(format!(
                "table needs du > 0 and u_max > {u_anchor}; got du = {du}, u_max = {u_max}"
            )));
        }
        let n = ((u_max - u_anchor) / du).ceil() as usize;
        let mut knots: Vec<(f64, f64, f64)> = Vec::with_capacity(n + 1);
        // The anchor itself is the first knot so the table ends exactly at r*.
        knots.push((field.tail_anchor, field.tail_value, field.tail_slope));
        for i in 1..=n {
            let u = u_anchor + i as f64 * du;
            let s = (u * u) * (u * u);
            let gp = q0_prime(s);
            knots.push((q0(s), gp, q0_second(s) / gp));
        }
        knots.reverse();
        let mut table = Self {
            r: Vec::with_capacity(knots.len()),
            g: Vec::with_capacity(knots.len()),
            dg: Vec::with_capacity(knots.len()),
        };
        for (r, g, dg) in knots {
            table.r.push(r);
            table.g.push(g);
            table.dg.push(dg);
        }
        debug_assert!(table.r.windows(2).all(|w| w[0] < w[1]));
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn r_min(&self) -> f64 {
        self.r[0]
    }

    pub fn r_max(&self) -> f64 {
        self.r[self.r.len() - 1]
    }

    /// Rows `(r, g, g')` in ascending `r`.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.r.len()).map(|i| (self.r[i], self.g[i], self.dg[i]))
    }

    /// Interpolated `g(r)`, or `None` outside the knot range.
    pub fn eval(&self, r: f64) -> Option<f64> {
        if !(r >= self.r_min() && r <= self.r_max()) {
            return None;
        }
        let i = match self.r.partition_point(|&x| x <= r) {
            0 => 0,
            p if p >= self.r.len() => self.r.len() - 2,
            p => p - 1,
        };
        let (r0, r1) = (self.r[i], self.r[i + 1]);
        let h = r1 - r0;
        let th = (r - r0) / h;
        let th2 = th * th;
        let om = 1.0 - th;
        let h00 = (1.0 + 2.0 * th) * om * om;
        let h10 = th * om * om;
        let h01 = th2 * (3.0 - 2.0 * th);
        let h11 = th2 * (th - 1.0);
        Some(h00 * self.g[i] + h10 * h * self.dg[i] + h01 * self.g[i + 1] + h11 * h * self.dg[i + 1])
    }
}

/// The saturation `sigma` with a dead zone `|r| <= 1 + M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaSpec {
    pub m: f64,
    pub threshold: f64,
    pub stiffness: f64,
}

pub fn build_sigma(m: f64, stiffness: f64) -> Result<SigmaSpec> {
    if !(m >= 0.0 && m.is_finite()) {
        return Err(Error::InvalidParameter(format!("M must be >= 0, got {m}")));
    }
    if !(stiffness > 0.0 && stiffness.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "stiffness must be positive, got {stiffness}"
        )));
    }
    Ok(SigmaSpec {
        m,
        threshold: 1.0 + m,
        stiffness,
    })
}

impl SigmaSpec {
    pub fn to_kv(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        doc.push_real("m", self.m);
        doc.push_real("threshold", self.threshold);
        doc.push_real("stiffness", self.stiffness);
        doc
    }

    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        let sigma = build_sigma(doc.real("m")?, doc.real("stiffness")?)?;
        if let Some(t) = doc.get("threshold") {
            let t: f64 = t.parse().map_err(|_| Error::Parse(format!("threshold: {t}")))?;
            if t != sigma.threshold {
                return Err(Error::Parse(format!("threshold {t} != 1 + m = {}", sigma.threshold)));
            }
        }
        Ok(sigma)
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        let excess = r.abs() - self.threshold;
        if excess <= 0.0 {
            0.0
        } else {
            self.stiffness * excess * excess * r.signum()
        }
    }

    #[inline]
    pub fn derivative(&self, r: f64) -> f64 {
        let excess = r.abs() - self.threshold;
        if excess <= 0.0 {
            0.0
        } else {
            2.0 * self.stiffness * excess
        }
    }
}

/// One row of the C¹-at-zero evidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C1Row {
    pub r: f64,
    pub phi: f64,
    pub g: f64,
    /// `g(r) / r`.
    pub secant: f64,
    /// `q''(phi(r)) / q'(phi(r))`.
    pub g_prime: f64,
    /// `|g'(r)| * phi(r)^{3/4}`.
    pub scaled_g_prime: f64,
    /// `|g(r)| / r^3`.
    pub cubic_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C1Report {
    pub rows: Vec<C1Row>,
    pub secant_monotone: bool,
    /// Fitted constant in `|g'(r)| <= L phi(r)^{-3/4}`.
    pub envelope_constant: f64,
    pub last_secant: f64,
    pub last_g_prime: f64,
    /// `sup |g'|` over each decade `(10^{-k-1}, 10^{-k}]` of the grid, in grid order.
    pub g_prime_decade_sup: Vec<f64>,
    /// The decade suprema strictly decrease.
    pub g_prime_vanishing: bool,
    pub passed: bool,
}

/// Geometric grid from `hi` down to `lo` with `per_decade` points per decade.
pub fn geometric_grid(hi: f64, lo: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = (decades * per_decade as f64).round() as usize;
    (0..=n)
        .map(|i| hi * 10f64.powf(-(i as f64) / per_decade as f64))
        .collect()
}

/// Evidence that `g` is differentiable at zero with `g'(0) = 0` and that
/// `g'` is continuous there. `r_grid` must decrease toward zero.
pub fn verify_g_c1_at_zero(field: &FieldTable, r_grid: &[f64]) -> Result<C1Report> {
    if r_grid.len() < 2 || r_grid.windows(2).any(|w| !(w[1] < w[0])) || r_grid[r_grid.len() - 1] <= 0.0 {
        return Err(Error::InvalidParameter(
            "r_grid must be a positive decreasing sequence of length >= 2".into(),
        ));
    }
    let mut rows = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let phi = field.phi(r)?;
        let g = field.g_core(r)?;
        let g_prime = field.g_prime_core(r)?;
        rows.push(C1Row {
            r,
            phi,
            g,
            secant: g / r,
            g_prime,
            scaled_g_prime: g_prime.abs() * phi.powf(0.75),
            cubic_ratio: g.abs() / (r * r * r),
        });
    }
    let secant_monotone = rows
        .windows(2)
        .all(|w| w[1].secant.abs() < w[0].secant.abs());
    let envelope_constant = rows.iter().map(|r| r.scaled_g_prime).fold(0.0, f64::max);
    let last = rows[rows.len() - 1];
    // g' oscillates in sign, so decay is judged on decade suprema.
    let mut g_prime_decade_sup: Vec<f64> = Vec::new();
    let mut decade = None;
    for row in &rows {
        let d = (-row.r.log10() - 1e-9).ceil() as i64;
        if decade == Some(d) {
            let top = g_prime_decade_sup.last_mut().expect("decade opened");
            *top = top.max(row.g_prime.abs());
        } else {
            g_prime_decade_sup.push(row.g_prime.abs());
            decade = Some(d);
        }
    }
    let g_prime_vanishing = g_prime_decade_sup.windows(2).all(|w| w[1] < w[0]);
    let passed = secant_monotone
        && last.secant.abs() < 1e-3
        && last.g_prime.abs() < 1e-3
        && g_prime_vanishing
        && envelope_constant.is_finite();
    Ok(C1Report {
        rows,
        secant_monotone,
        envelope_constant,
        last_secant: last.secant,
        last_g_prime: last.g_prime,
        g_prime_decade_sup,
        g_prime_vanishing,
        passed,
    })
}

/// Mismatch of the one-sided derivatives of `g` at the tail anchor,
/// measured with second-order one-sided differences. Returns
/// `(left, right, relative_mismatch)`.
pub fn tail_junction_mismatch(field: &FieldTable) -> (f64, f64, f64) {
    let r = field.tail_anchor;
    let h = 1e-6 * r;
    let g = |x: f64| field.g(x);
    let left = (3.0 * g(r) - 4.0 * g(r - h) + g(r - 2.0 * h)) / (2.0 * h);
    let right = (-3.0 * g(r) + 4.0 * g(r + h) - g(r + 2.0 * h)) / (2.0 * h);
    let scale = left.abs().max(right.abs());
    (left, right, (left - right).abs() / scale)
}

/// Grid over which `M = sup |H_{a,b}(T)|` is estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MGrid {
    /// Points per axis on the closed square `[-1, 1]^2`.
    pub n_ab: usize,
    pub t_max: f64,
    /// Samples per `u`-period in addition to the extremum schedule.
    pub per_period: usize,
}

impl MGrid {
    /// The shortest horizon covering one full period for every `b`.
    pub fn min_horizon(params: &ConstructionParams) -> f64 {
        let u = params.u0() + 2.0 * PI;
        (u * u) * (u * u) - params.c0
    }

    pub fn default_for(params: &ConstructionParams) -> Self {
        let u = params.u0() + 4.0 * 2.0 * PI;
        Self {
            n_ab: 21,
            t_max: (u * u) * (u * u) - params.c0,
            per_period: 64,
        }
    }
}

/// Safety factor applied to the grid maximum of `|H|`.
pub const M_SAFETY: f64 = 1.1;

/// Grid estimate of `M`, inflated by 10%.
pub fn estimate_m(params: &ConstructionParams, grid: &MGrid) -> Result<f64> {
    let required = MGrid::min_horizon(params);
    if !(grid.t_max >= required) {
        return Err(Error::GridSpec {
            t_max: grid.t_max,
            required,
        });
    }
    if grid.n_ab < 2 || grid.per_period < 4 {
        return Err(Error::InvalidParameter(
            "M grid needs n_ab >= 2 and per_period >= 4".into(),
        ));
    }
    let axis: Vec<f64> = (0..grid.n_ab)
        .map(|i| -1.0 + 2.0 * i as f64 / (grid.n_ab - 1) as f64)
        .collect();
    let mut sup: f64 = 0.0;
    for &b in &axis {
        let times = crate::oscillation::sample_schedule(params, b, grid.t_max, grid.per_period);
        for &a in &axis {
            for &t in &times {
                sup = sup.max(crate::oscillation::h_semianalytic_closed(params, a, b, t).abs());
            }
        }
    }
    Ok(M_SAFETY * sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::choose_c0;

    fn field() -> FieldTable {
        FieldTable::new(choose_c0(1.0).unwrap()).unwrap()
    }

    #[test]
    fn f_values() {
        assert_eq!(f_field(2.0), -4.0);
        assert_eq!(f_field(0.0), 0.0);
    }

    #[test]
    fn phi_round_trips() {
        let fld = field();
        let p = fld.params;
        let t = fld.phi(p.q(5.0).unwrap()).unwrap();
        assert!((t - 5.0).abs() < 1e-9, "t = {t}");
        let t = fld.phi(p.q(0.0).unwrap()).unwrap();
        assert!(t.abs() < 1e-9, "t = {t}");
    }

    #[test]
    fn phi_domain_errors() {
        let fld = field();
        assert!(matches!(fld.phi(0.0), Err(Error::InversionDomain { .. })));
        assert!(matches!(fld.phi(-1e-3), Err(Error::InversionDomain { .. })));
        assert!(matches!(fld.phi(fld.rho()), Err(Error::InversionDomain { .. })));
    }

    #[test]
    fn phi_grows_like_inverse_square() {
        let fld = field();
        let l0 = geometric_grid(1e-2, 1e-4, 10)
            .into_iter()
            .map(|r| fld.phi(r).unwrap() * r * r)
            .fold(f64::INFINITY, f64::min);
        assert!(l0 > 0.5, "L0 = {l0}");
    }

    #[test]
    fn g_core_reproduces_q_prime() {
        let fld = field();
        let p = fld.params;
        let g = fld.g_core(p.q(0.0).unwrap()).unwrap();
        let qp = p.q_prime(0.0).unwrap();
        assert!(((g - qp) / qp).abs() < 1e-9);
        assert!((g + 2.537e-6).abs() < 1e-9);
        assert_eq!(fld.g_core(0.0).unwrap(), 0.0);
    }

    #[test]
    fn g_vanishes_cubically() {
        let fld = field();
        for r in geometric_grid(1e-2, 1e-4, 10) {
            let ratio = fld.g_core(r).unwrap().abs() / r.powi(3);
            assert!(ratio > 0.1 && ratio < 1.0, "r = {r}: {ratio}");
        }
    }

    #[test]
    fn g_is_odd_and_restoring() {
        let fld = field();
        assert_eq!(fld.g(0.0), 0.0);
        for i in 1..400 {
            let r = 1e-5 * 1.05f64.powi(i);
            assert_eq!(fld.g(-r), -fld.g(r));
            assert!(r * fld.g(r) < 0.0, "r = {r}");
        }
    }

    #[test]
    fn tail_is_c1_at_anchor() {
        let fld = field();
        let (_, _, rel) = tail_junction_mismatch(&fld);
        assert!(rel < 1e-6, "mismatch {rel}");
        let direct = fld.g_core(fld.tail_anchor).unwrap();
        assert!((direct - fld.tail_value).abs() <= 1e-12 * direct.abs());
    }

    #[test]
    fn tail_is_proper() {
        let fld = field();
        assert!(fld.g(10.0) < fld.g(1.0) && fld.g(1.0) < 0.0);
        assert!(fld.g(1e3) < -1e3);
    }

    #[test]
    fn c1_at_zero_report() {
        let fld = field();
        let grid = geometric_grid(1e-2, 1e-6, 2);
        let rep = verify_g_c1_at_zero(&fld, &grid).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rep.rows[rep.rows.len() - 1].secant.abs() < rep.rows[0].secant.abs());
        assert!(rep.last_g_prime.abs() < 1e-3);
    }

    #[test]
    fn c1_rejects_bad_grid() {
        let fld = field();
        assert!(verify_g_c1_at_zero(&fld, &[1e-3, 1e-2]).is_err());
        assert!(verify_g_c1_at_zero(&fld, &[1e-3]).is_err());
    }

    #[test]
    fn composed_derivative_matches_difference_quotient() {
        let fld = field();
        for r in [1e-3, 4e-3, 1e-2, 0.015] {
            let h = 1e-5 * r;
            let fd = (fld.g_core(r + h).unwrap() - fld.g_core(r - h).unwrap()) / (2.0 * h);
            let exact = fld.g_prime_core(r).unwrap();
            assert!((fd - exact).abs() < 1e-6 * exact.abs().max(1e-3 * r * r), "r = {r}: {fd} vs {exact}");
        }
    }

    #[test]
    fn table_matches_direct_inversion() {
        let p = choose_c0(1.0).unwrap();
        let direct = FieldTable::new(p).unwrap();
        let tabled = FieldTable::with_table(p, 0.02, 40.0).unwrap();
        let tab = tabled.table().unwrap();
        let (lo, hi) = (tab.r_min(), tab.r_max());
        let mut worst: f64 = 0.0;
        for i in 0..=2000 {
            let r = lo * (hi / lo).powf(i as f64 / 2000.0);
            let a = direct.g(r);
            let b = tabled.g(r);
            worst = worst.max((a - b).abs() / a.abs());
        }
        assert!(worst < 1e-8, "relative deviation {worst}");
        // Outside the table the two agree exactly.
        assert_eq!(direct.g(0.5 * lo), tabled.g(0.5 * lo));
        assert_eq!(direct.g(1.0), tabled.g(1.0));
    }

    #[test]
    fn sigma_shape() {
        let s = build_sigma(4.0, 1.0).unwrap();
        assert_eq!(s.eval(0.0), 0.0);
        assert_eq!(s.eval(5.0), 0.0);
        assert_eq!(s.derivative(5.0), 0.0);
        assert_eq!(s.eval(6.0), 1.0);
        assert_eq!(s.eval(-6.0), -1.0);
        let h = 1e-7;
        assert!(((s.eval(5.0 + h) - s.eval(5.0)) / h).abs() < 1e-6);
        assert!(s.eval(1e3) > 1e5);
        assert!(build_sigma(-1.0, 1.0).is_err());
        assert!(build_sigma(1.0, 0.0).is_err());
    }

    #[test]
    fn sigma_kv_round_trip() {
        let s = build_sigma(4.4357, 1.0).unwrap();
        let doc = KvDoc::parse(&s.to_kv().render()).unwrap();
        assert_eq!(SigmaSpec::from_kv(&doc).unwrap(), s);
        let mut bad = KvDoc::new();
        bad.push_real("m", 1.0);
        bad.push_real("threshold", 3.0);
        bad.push_real("stiffness", 1.0);
        assert!(SigmaSpec::from_kv(&bad).is_err());
    }

    #[test]
    fn m_estimate_for_k1() {
        let p = choose_c0(1.0).unwrap();
        let m = estimate_m(&p, &MGrid::default_for(&p)).unwrap();
        assert!((4.0..=9.0).contains(&m), "M = {m}");
        assert!(m >= 0.5 - p.first_term_bound());
        let short = MGrid {
            t_max: 10.0,
            ..MGrid::default_for(&p)
        };
        assert!(matches!(estimate_m(&p, &short), Err(Error::GridSpec { .. })));
    }
}
