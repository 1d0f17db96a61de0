//! `H_{a,b}(T) = ∫_0^T (p(t+a) - q(t+b)) dt`, computed two ways.
//!
//! The quadrature route integrates the raw integrand. The semianalytic
//! route splits it into the non-oscillating first term, which has the exact
//! antiderivative `2 sqrt(t + c0 + a) - 2 sqrt(t + c0 + b)`, and the
//! oscillating term, which after `u = (t + c0 + b)^{1/4}` (so `dt = 4u^3 du`)
//! integrates to `4 (cos u_T - cos u_0)`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{p0, q0, ConstructionParams};
use crate::quadrature;

/// Factor of the cosine term implied by the Jacobian `dt = 4u^3 du`.
pub const COSINE_FACTOR: f64 = 4.0;

/// Uniform samples per `u`-period used alongside the extremum schedule.
pub const SAMPLES_PER_PERIOD: usize = 64;

fn check_ab(a: f64, b: f64) -> Result<()> {
    if !(a.abs() < 1.0 && b.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "a and b must lie in (-1, 1), got a = {a}, b = {b}"
        )));
    }
    Ok(())
}

fn check_t(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "T must be finite and >= 0, got {t}"
        )));
    }
    Ok(())
}

/// The integrand `p(t+a) - q(t+b)`.
#[inline]
pub fn integrand(params: &ConstructionParams, a: f64, b: f64, t: f64) -> f64 {
    p0(t + params.c0 + a) - q0(t + params.c0 + b)
}

/// Adaptive quadrature of the raw integrand to `params.quad_tol`.
pub fn h_quadrature(params: &ConstructionParams, a: f64, b: f64, t: f64) -> Result<f64> {
    check_ab(a, b)?;
    check_t(t)?;
    let q = quadrature::integrate(|s| integrand(params, a, b, s), 0.0, t, params.quad_tol)?;
    Ok(q.value)
}

#[inline]
fn inv_sqrt_sum(x: f64, y: f64) -> f64 {
    1.0 / (x.sqrt() + y.sqrt())
}

/// Running integral of the first term, `∫_0^T (p(t+a) - p(t+b)) dt`, in a
/// cancellation-free form.
#[inline]
pub fn first_term(params: &ConstructionParams, a: f64, b: f64, t: f64) -> f64 {
    let c0 = params.c0;
    2.0 * (a - b) * (inv_sqrt_sum(t + c0 + a, t + c0 + b) - inv_sqrt_sum(c0 + a, c0 + b))
}

/// `lim_{T -> inf}` of [`first_term`].
#[inline]
pub fn first_term_limit(params: &ConstructionParams, a: f64, b: f64) -> f64 {
    -2.0 * (a - b) * inv_sqrt_sum(params.c0 + a, params.c0 + b)
}

/// Majorant of `|first_term(inf) - first_term(T)|` from
/// `|integrand| <= |b - a| / (2 (t + c0 - 1)^{3/2})`.
#[inline]
pub fn first_term_tail_bound(params: &ConstructionParams, a: f64, b: f64, t: f64) -> f64 {
    (b - a).abs() / (t + params.c0 - 1.0).sqrt()
}

/// `u = (t + c0 + b)^{1/4}`.
#[inline]
pub fn u_of(params: &ConstructionParams, b: f64, t: f64) -> f64 {
    (t + params.c0 + b).sqrt().sqrt()
}

/// Inverse of [`u_of`].
#[inline]
pub fn t_of(params: &ConstructionParams, b: f64, u: f64) -> f64 {
    (u * u) * (u * u) - params.c0 - b
}

/// `-∫_0^T s^{-3/4} sin(s^{1/4}) dt` with `s = t + c0 + b`.
#[inline]
pub fn cosine_term(params: &ConstructionParams, b: f64, t: f64) -> f64 {
    COSINE_FACTOR * (u_of(params, b, t).cos() - u_of(params, b, 0.0).cos())
}

/// Semianalytic `H` without argument checks; also valid on the closed
/// square `|a|, |b| <= 1`.
#[inline]
pub fn h_semianalytic_closed(params: &ConstructionParams, a: f64, b: f64, t: f64) -> f64 {
    first_term(params, a, b, t) + cosine_term(params, b, t)
}

pub fn h_semianalytic(params: &ConstructionParams, a: f64, b: f64, t: f64) -> Result<f64> {
    check_ab(a, b)?;
    check_t(t)?;
    Ok(h_semianalytic_closed(params, a, b, t))
}

/// Cosine-term factor recovered from quadrature alone: `H_{0,0}(T)` at the
/// first cosine extremum after one full period, divided by
/// `cos u_T - cos u_0`.
pub fn fitted_cosine_factor(params: &ConstructionParams) -> Result<f64> {
    let u0 = u_of(params, 0.0, 0.0);
    let m = ((u0 + PI) / PI).ceil();
    let t = t_of(params, 0.0, m * PI);
    let h = h_quadrature(params, 0.0, 0.0, t)?;
    Ok(h / ((m * PI).cos() - u0.cos()))
}

/// Times in `(0, t_max]` at which `cos u_T = ±1`, i.e. `T_m = (m pi)^4 - c0 - b`.
pub fn extremum_times(params: &ConstructionParams, b: f64, t_max: f64) -> Vec<f64> {
    let u_lo = u_of(params, b, 0.0);
    let u_hi = u_of(params, b, t_max);
    let first = (u_lo / PI).floor() as i64;
    let last = (u_hi / PI).ceil() as i64;
    (first..=last)
        .map(|m| t_of(params, b, m as f64 * PI))
        .filter(|&t| t > 0.0 && t <= t_max)
        .collect()
}

/// Extremum schedule merged with a uniform `u`-grid of `per_period` points
/// per period, sorted and deduplicated.
pub fn sample_schedule(params: &ConstructionParams, b: f64, t_max: f64, per_period: usize) -> Vec<f64> {
    let mut times = extremum_times(params, b, t_max);
    let u_lo = u_of(params, b, 0.0);
    let du = 2.0 * PI / per_period as f64;
    let mut j = 1usize;
    loop {
        let t = t_of(params, b, u_lo + j as f64 * du);
        if !(t <= t_max) {
            break;
        }
        if t > 0.0 {
            times.push(t);
        }
        j += 1;
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

/// Horizon covering `n_periods` full `u`-periods from `T = 0`.
pub fn horizon(params: &ConstructionParams, b: f64, n_periods: f64) -> f64 {
    t_of(params, b, u_of(params, b, 0.0) + 2.0 * PI * n_periods)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillationReport {
    pub a: f64,
    pub b: f64,
    pub t_max: f64,
    pub limsup_est: f64,
    pub liminf_est: f64,
    pub sup_abs: f64,
    /// Tail majorant of the first term after the earliest extremum sample.
    pub uncertainty: f64,
    /// Largest `|first_term|` seen on the schedule.
    pub first_term_max: f64,
    pub first_term_bound_check: bool,
    /// Largest `|H_quadrature - H_semianalytic|` on the extremum schedule.
    pub method_agreement: f64,
    pub samples: usize,
}

impl OscillationReport {
    pub fn gap(&self) -> f64 {
        self.limsup_est - self.liminf_est
    }

    /// Pass condition: gap at least one, limsup above 1/4,
    /// liminf below -1/4.
    pub fn passes(&self) -> bool {
        self.gap() >= 1.0 && self.limsup_est > 0.25 && self.liminf_est < -0.25
    }
}

/// Estimates `limsup` and `liminf` of `H_{a,b}` over `n_periods` periods.
pub fn oscillation_extremes(
    params: &ConstructionParams,
    a: f64,
    b: f64,
    n_periods: usize,
) -> Result<OscillationReport> {
    check_ab(a, b)?;
    if n_periods < 2 {
        return Err(Error::InvalidParameter(format!(
            "n_periods must be >= 2, got {n_periods}"
        )));
    }
    let t_max = horizon(params, b, n_periods as f64);
    let extrema = extremum_times(params, b, t_max);
    let times = sample_schedule(params, b, t_max, SAMPLES_PER_PERIOD);
    let bound = params.first_term_bound();
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    let mut sup_abs: f64 = 0.0;
    let mut first_max: f64 = 0.0;
    for &t in &times {
        let h = h_semianalytic_closed(params, a, b, t);
        hi = hi.max(h);
        lo = lo.min(h);
        sup_abs = sup_abs.max(h.abs());
        first_max = first_max.max(first_term(params, a, b, t).abs());
    }
    let mut agreement: f64 = 0.0;
    for &t in &extrema {
        let quad = h_quadrature(params, a, b, t)?;
        agreement = agreement.max((quad - h_semianalytic_closed(params, a, b, t)).abs());
    }
    let uncertainty = extrema
        .first()
        .map(|&t| first_term_tail_bound(params, a, b, t))
        .unwrap_or(f64::INFINITY);
    Ok(OscillationReport {
        a,
        b,
        t_max,
        limsup_est: hi,
        liminf_est: lo,
        sup_abs,
        uncertainty,
        first_term_max: first_max,
        first_term_bound_check: first_max <= bound + 1e-9,
        method_agreement: agreement,
        samples: times.len(),
    })
}

/// Checks `sup |H| <= 2/sqrt(c0) + 4 (1 + |cos u_0|)` on the sample schedule
/// up to `t_max`. Returns `(passed, sup_abs)`.
pub fn verify_boundedness(params: &ConstructionParams, a: f64, b: f64, t_max: f64) -> Result<(bool, f64)> {
    check_ab(a, b)?;
    let required = horizon(params, b, 1.0);
    if !(t_max >= required) {
        return Err(Error::GridSpec { t_max, required });
    }
    let sup = sample_schedule(params, b, t_max, SAMPLES_PER_PERIOD)
        .into_iter()
        .map(|t| h_semianalytic_closed(params, a, b, t).abs())
        .fold(0.0, f64::max);
    let amplitude = COSINE_FACTOR * (1.0 + u_of(params, b, 0.0).cos().abs());
    let bound = params.first_term_bound() + amplitude + 1e-9;
    Ok((sup <= bound, sup))
}

/// Uniform axis of `n` points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// [`oscillation_extremes`] over `axis × axis`, ordered by `(a, b)`.
pub fn oscillation_sweep(params: &ConstructionParams, axis: &[f64], n_periods: usize) -> Result<Vec<OscillationReport>> {
    let cells: Vec<(f64, f64)> = axis
        .iter()
        .flat_map(|&a| axis.iter().map(move |&b| (a, b)))
        .collect();
    cells
        .par_iter()
        .map(|&(a, b)| oscillation_extremes(params, a, b, n_periods))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::choose_c0;

    fn k1() -> ConstructionParams {
        choose_c0(1.0).unwrap()
    }

    #[test]
    fn empty_integral() {
        let p = k1();
        assert_eq!(h_quadrature(&p, 0.3, -0.2, 0.0).unwrap(), 0.0);
        assert_eq!(h_semianalytic(&p, 0.3, -0.2, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_case_matches_cosine_closed_form() {
        let p = k1();
        for t in [1e3, 1e4, 1e5] {
            let quad = h_quadrature(&p, 0.0, 0.0, t).unwrap();
            let closed = 4.0 * (t + p.c0).powf(0.25).cos() - 4.0 * p.c0.powf(0.25).cos();
            assert!((quad - closed).abs() < p.quad_tol, "T = {t}: {quad} vs {closed}");
        }
        assert!(p.u0().cos().abs() < 1e-14);
    }

    #[test]
    fn fitted_factor_is_four() {
        let f = fitted_cosine_factor(&k1()).unwrap();
        assert!((f - 4.0).abs() < 1e-8, "factor {f}");
    }

    #[test]
    fn first_term_vanishes_for_equal_shifts() {
        let p = k1();
        assert_eq!(first_term(&p, 0.4, 0.4, 1e5), 0.0);
        assert_eq!(first_term_limit(&p, -0.7, -0.7), 0.0);
    }

    #[test]
    fn first_term_matches_its_quadrature() {
        let p = k1();
        let (a, b, t) = (0.5, -0.5, 3e5);
        let quad = quadrature::integrate(|s| p0(s + p.c0 + a) - p0(s + p.c0 + b), 0.0, t, 1e-12)
            .unwrap()
            .value;
        assert!((quad - first_term(&p, a, b, t)).abs() < 1e-12);
        assert!(first_term(&p, 0.5, 0.5, t).abs() <= p.first_term_bound());
    }

    #[test]
    fn argument_checks() {
        let p = k1();
        assert!(h_quadrature(&p, 1.0, 0.0, 1.0).is_err());
        assert!(h_semianalytic(&p, 0.0, -1.0, 1.0).is_err());
        assert!(h_semianalytic(&p, 0.0, 0.0, -1.0).is_err());
        assert!(oscillation_extremes(&p, 0.0, 0.0, 1).is_err());
    }

    #[test]
    fn symmetric_extremes_near_four() {
        let p = k1();
        let rep = oscillation_extremes(&p, 0.0, 0.0, 4).unwrap();
        assert!((rep.limsup_est - 4.0).abs() < 1e-9, "{rep:?}");
        assert!((rep.liminf_est + 4.0).abs() < 1e-9, "{rep:?}");
        assert!(rep.passes());
        assert!(rep.method_agreement < 10.0 * p.quad_tol);
    }

    #[test]
    fn extremum_schedule_is_increasing_and_quartic() {
        let p = k1();
        let ts = extremum_times(&p, 0.3, horizon(&p, 0.3, 4.0));
        assert!(ts.len() >= 8);
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
        let gaps: Vec<f64> = ts.windows(3).map(|w| w[2] - w[0]).collect();
        assert!(gaps.windows(2).all(|w| w[0] < w[1]));
        for &t in &ts {
            assert!(u_of(&p, 0.3, t).cos().abs() > 1.0 - 1e-12);
        }
    }

    #[test]
    fn midpoint_offset_bound() {
        let p = k1();
        for b in linspace(-0.999, 0.999, 201) {
            assert!(u_of(&p, b, 0.0).cos().abs() <= 0.5);
        }
    }

    #[test]
    fn boundedness_examples() {
        let p = k1();
        let t_max = horizon(&p, 0.0, 4.0);
        let (ok, sup) = verify_boundedness(&p, 0.0, 0.0, t_max).unwrap();
        assert!(ok && sup <= 4.0 + 1e-6, "sup = {sup}");
        let (ok, sup) = verify_boundedness(&p, 0.9, -0.9, horizon(&p, -0.9, 4.0)).unwrap();
        assert!(ok && sup <= 4.0 * 1.5 + p.first_term_bound());
        assert!(matches!(verify_boundedness(&p, 0.0, 0.0, 10.0), Err(Error::GridSpec { .. })));
    }

    #[test]
    fn m_dominates_first_peak() {
        let p = k1();
        let m = crate::field::estimate_m(&p, &crate::field::MGrid::default_for(&p)).unwrap();
        let t_peak = (3.5 * PI).powi(4) - p.c0;
        assert!(m >= h_semianalytic(&p, 0.0, 0.0, t_peak).unwrap().abs());
        let rep = oscillation_extremes(&p, -0.9, 0.9, 4).unwrap();
        assert!(rep.sup_abs <= m);
    }
}
