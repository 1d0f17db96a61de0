//! Adaptive Dormand–Prince 5(4) integration with cubic Hermite dense output.

use crate::error::{Error, Result};
use crate::quadrature;
use crate::sum::NeumaierSum;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
/// Steps shorter than this fraction of the horizon signal stiffness.
const UNDERFLOW_FRACTION: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrateOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Increasing output times in `[0, t_end]`. `None` samples every
    /// accepted step.
    pub sample_times: Option<Vec<f64>>,
    pub max_step: f64,
    pub max_steps: usize,
}

impl IntegrateOptions {
    pub fn new(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            sample_times: None,
            max_step: f64::INFINITY,
            max_steps: 50_000_000,
        }
    }

    pub fn with_samples(mut self, times: Vec<f64>) -> Self {
        self.sample_times = Some(times);
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Largest scaled error norm among accepted steps (`<= 1`).
    pub max_error_estimate: f64,
}

/// Accepted step points with states and derivatives, enough to rebuild the
/// piecewise cubic Hermite interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOutput {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    derivs: Vec<f64>,
}

impl DenseOutput {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            times: Vec::new(),
            states: Vec::new(),
            derivs: Vec::new(),
        }
    }

    fn push(&mut self, t: f64, y: &[f64], f: &[f64]) {
        self.times.push(t);
        self.states.extend_from_slice(y);
        self.derivs.extend_from_slice(f);
    }

    pub fn knots(&self) -> &[f64] {
        &self.times
    }

    pub fn state_at_knot(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    fn deriv_at_knot(&self, i: usize) -> &[f64] {
        &self.derivs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn span(&self) -> (f64, f64) {
        (self.times[0], self.times[self.times.len() - 1])
    }

    /// Interpolated component `k` at time `t`; `None` outside the span.
    pub fn component(&self, t: f64, k: usize) -> Option<f64> {
        let (t0, t1) = self.span();
        if !(t >= t0 && t <= t1) || k >= self.dim {
            return None;
        }
        let i = self.times.partition_point(|&x| x <= t);
        if i > 0 && self.times[i - 1] == t {
            return Some(self.state_at_knot(i - 1)[k]);
        }
        let i = i.clamp(1, self.times.len() - 1) - 1;
        Some(hermite(
            self.times[i],
            self.times[i + 1],
            self.state_at_knot(i)[k],
            self.state_at_knot(i + 1)[k],
            self.deriv_at_knot(i)[k],
            self.deriv_at_knot(i + 1)[k],
            t,
        ))
    }

    pub fn eval(&self, t: f64) -> Option<Vec<f64>> {
        (0..self.dim).map(|k| self.component(t, k)).collect()
    }

    fn project(&self, comps: &[usize]) -> Self {
        let pick = |v: &[f64]| -> Vec<f64> {
            v.chunks_exact(self.dim).flat_map(|row| comps.iter().map(move |&k| row[k])).collect()
        };
        Self {
            dim: comps.len(),
            times: self.times.clone(),
            states: pick(&self.states),
            derivs: pick(&self.derivs),
        }
    }
}

#[inline]
fn hermite(t0: f64, t1: f64, y0: f64, y1: f64, f0: f64, f1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    let th = (t - t0) / h;
    let om = 1.0 - th;
    let th2 = th * th;
    (1.0 + 2.0 * th) * om * om * y0 + th * om * om * h * f0 + th2 * (3.0 - 2.0 * th) * y1
        + th2 * (th - 1.0) * h * f1
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub times: Vec<f64>,
    /// Row-major, `times.len() × dim`.
    states: Vec<f64>,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub stats: StepStats,
    pub dense: DenseOutput,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn component(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().skip(k).step_by(self.dim).copied()
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// The trajectory restricted to the listed components, in that order.
    pub fn project(&self, comps: &[usize]) -> Result<Trajectory> {
        if comps.iter().any(|&k| k >= self.dim) {
            return Err(Error::InvalidParameter(format!("component out of range for dimension {}", self.dim)));
        }
        Ok(Trajectory {
            dim: comps.len(),
            times: self.times.clone(),
            states: self.states.chunks_exact(self.dim).flat_map(|row| comps.iter().map(move |&k| row[k])).collect(),
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            stats: self.stats,
            dense: self.dense.project(comps),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.times
            .iter()
            .copied()
            .zip(self.states.chunks_exact(self.dim))
    }
}

fn validate(opts: &IntegrateOptions, x0: &[f64], t_end: f64) -> Result<()> {
    if x0.is_empty() {
        return Err(Error::InvalidParameter("state dimension must be >= 1".into()));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("t_end must be positive, got {t_end}")));
    }
    if !(opts.rel_tol > 0.0 && opts.abs_tol > 0.0) {
        return Err(Error::InvalidParameter("tolerances must be positive".into()));
    }
    if !(opts.max_step > 0.0) {
        return Err(Error::InvalidParameter("max_step must be positive".into()));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { t: 0.0 });
    }
    if let Some(ts) = &opts.sample_times {
        if ts.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("sample times must be strictly increasing".into()));
        }
        if ts.first().is_some_and(|&t| t < 0.0) || ts.last().is_some_and(|&t| t > t_end) {
            return Err(Error::InvalidParameter("sample times must lie in [0, t_end]".into()));
        }
    }
    Ok(())
}

#[inline]
fn error_norm(y0: &[f64], y1: &[f64], err: &[f64], rel: f64, abs: f64) -> f64 {
    let mut norm: f64 = 0.0;
    for i in 0..y0.len() {
        let sc = abs.max(rel * y0[i].abs().max(y1[i].abs()));
        norm = norm.max(err[i].abs() / sc);
    }
    norm
}

/// Integrates the autonomous system `x' = field(x)` from `t = 0` to `t_end`.
///
/// Each accepted step satisfies `|local error_i| <= max(abs_tol, rel_tol |x_i|)`
/// according to the embedded estimate. When `sample_times` are given, steps
/// are clipped to land on them exactly; otherwise every accepted step is
/// recorded. The first sample is always `t = 0`.
pub fn integrate<F>(field: F, x0: &[f64], t_end: f64, opts: &IntegrateOptions) -> Result<Trajectory>
where
    F: Fn(&[f64], &mut [f64]),
{
    validate(opts, x0, t_end)?;
    let n = x0.len();
    let (rel, abs) = (opts.rel_tol, opts.abs_tol);
    let mut stats = StepStats::default();

    let mut y = x0.to_vec();
    let mut k1 = vec![0.0; n];
    field(&y, &mut k1);
    stats.evaluations += 1;
    if k1.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { t: 0.0 });
    }

    let mut dense = DenseOutput::new(n);
    dense.push(0.0, &y, &k1);

    let samples: &[f64] = opts.sample_times.as_deref().unwrap_or(&[]);
    let mut times = vec![0.0];
    let mut states = y.clone();
    let mut next_sample = samples.iter().position(|&t| t > 0.0).unwrap_or(samples.len());

    // One-evaluation starting step.
    let d0 = y.iter().map(|v| v.abs() / abs.max(rel * v.abs())).fold(0.0, f64::max);
    let d1 = k1.iter().zip(&y).map(|(f, v)| f.abs() / abs.max(rel * v.abs())).fold(0.0, f64::max);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(opts.max_step).min(t_end);

    let mut t = NeumaierSum::new(0.0);
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut last_rejected = false;
    let mut last_nonfinite = false;

    loop {
        let t_now = t.value();
        if t_now >= t_end {
            break;
        }
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::StepUnderflow { t: t_now, h });
        }
        let remaining = t_end - t_now;
        let final_step = h >= remaining;
        if final_step {
            h = remaining;
        }
        let mut clip = None;
        if let Some(&ts) = samples.get(next_sample) {
            if ts < t_now + h && ts < t_end {
                clip = Some((ts, h));
                h = ts - t_now;
            }
        }
        if h < UNDERFLOW_FRACTION * t_end && !final_step && clip.is_none() {
            return Err(if last_nonfinite {
                Error::NonFinite { t: t_now }
            } else {
                Error::StepUnderflow { t: t_now, h }
            });
        }

        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        field(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        field(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        field(&tmp, &mut k4);
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        field(&tmp, &mut k5);
        for i in 0..n {
            tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        field(&tmp, &mut k6);
        for i in 0..n {
            y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        field(&y_new, &mut k7);
        stats.evaluations += 6;
        for i in 0..n {
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }

        let norm = error_norm(&y, &y_new, &err, rel, abs);
        if !norm.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            // Shrink and retry; a genuinely divergent field ends in underflow.
            stats.rejected += 1;
            h *= MIN_FACTOR;
            last_rejected = true;
            last_nonfinite = true;
            continue;
        }
        last_nonfinite = false;
        if norm <= 1.0 {
            let t0 = t_now;
            if let Some((ts, _)) = clip {
                t = NeumaierSum::new(ts);
            } else if final_step {
                t = NeumaierSum::new(t_end);
            } else {
                t.add(h);
            }
            let t1 = t.value();
            stats.accepted += 1;
            stats.max_error_estimate = stats.max_error_estimate.max(norm);

            if opts.sample_times.is_some() {
                while next_sample < samples.len() && samples[next_sample] <= t1 {
                    let ts = samples[next_sample];
                    if ts == t1 {
                        states.extend_from_slice(&y_new);
                    } else {
                        for i in 0..n {
                            states.push(hermite(t0, t1, y[i], y_new[i], k1[i], k7[i], ts));
                        }
                    }
                    times.push(ts);
                    next_sample += 1;
                }
            } else {
                times.push(t1);
                states.extend_from_slice(&y_new);
            }
            dense.push(t1, &y_new, &k7);

            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            let mut factor = if norm == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * norm.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            if last_rejected {
                factor = factor.min(1.0);
            }
            last_rejected = false;
            h = (h * factor).min(opts.max_step);
            if let Some((_, proposed)) = clip {
                h = h.max(proposed);
            }
        } else {
            stats.rejected += 1;
            h *= (SAFETY * norm.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
            last_rejected = true;
        }
    }

    Ok(Trajectory {
        dim: n,
        times,
        states,
        rel_tol: rel,
        abs_tol: abs,
        stats,
        dense,
    })
}

/// `∫_0^T signal(t) dt` by adaptive quadrature with compensated summation.
/// `breakpoints` (e.g. integrator knots) are integrated piecewise, with the
/// tolerance shared in proportion to piece length.
pub fn running_integral<F: Fn(f64) -> f64>(signal: F, t: f64, tol: f64, breakpoints: &[f64]) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("T must be >= 0, got {t}")));
    }
    let mut edges = vec![0.0];
    edges.extend(breakpoints.iter().copied().filter(|&b| b > 0.0 && b < t));
    edges.push(t);
    let mut acc = NeumaierSum::default();
    for w in edges.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let piece_tol = (tol * (w[1] - w[0]) / t).max(f64::MIN_POSITIVE);
        acc.add(quadrature::integrate(&signal, w[0], w[1], piece_tol)?.value);
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field() {
        let traj = integrate(|_, d| d[0] = 0.0, &[7.0], 100.0, &IntegrateOptions::new(1e-9, 1e-12)).unwrap();
        assert!(traj.component(0).all(|v| v == 7.0));
        assert!(traj.stats.accepted >= 1);
        assert_eq!(traj.times[0], 0.0);
    }

    #[test]
    fn exponential_decay() {
        let opts = IntegrateOptions::new(1e-10, 1e-14).with_samples(vec![0.0, 0.5, 1.0, 2.0]);
        let traj = integrate(|y, d| d[0] = -y[0], &[1.0], 2.0, &opts).unwrap();
        assert_eq!(traj.times, vec![0.0, 0.5, 1.0, 2.0]);
        for (t, y) in traj.iter() {
            assert!((y[0] - (-t).exp()).abs() < 1e-9, "t = {t}: {}", y[0] - (-t).exp());
        }
    }

    #[test]
    fn harmonic_oscillator_energy() {
        let traj = integrate(
            |y, d| {
                d[0] = y[1];
                d[1] = -y[0];
            },
            &[1.0, 0.0],
            20.0,
            &IntegrateOptions::new(1e-10, 1e-12),
        )
        .unwrap();
        let end = traj.last_state();
        assert!((end[0] - 20f64.cos()).abs() < 1e-8);
        assert!((end[1] + 20f64.sin()).abs() < 1e-8);
        assert_eq!(*traj.times.last().unwrap(), 20.0);
    }

    #[test]
    fn dense_output_hits_knots_exactly() {
        let traj = integrate(|y, d| d[0] = -y[0] * y[0], &[1.0], 50.0, &IntegrateOptions::new(1e-8, 1e-12)).unwrap();
        for (i, &t) in traj.dense.knots().iter().enumerate() {
            assert_eq!(traj.dense.component(t, 0).unwrap(), traj.dense.state_at_knot(i)[0]);
        }
        assert!(traj.dense.component(51.0, 0).is_none());
    }

    #[test]
    fn rejects_bad_inputs() {
        let opts = IntegrateOptions::new(1e-9, 1e-12);
        assert!(integrate(|_, d| d[0] = 0.0, &[1.0], 0.0, &opts).is_err());
        assert!(integrate(|_, d| d[0] = 0.0, &[f64::NAN], 1.0, &opts).is_err());
        let bad = opts.clone().with_samples(vec![0.5, 0.2]);
        assert!(integrate(|_, d| d[0] = 0.0, &[1.0], 1.0, &bad).is_err());
        let late = opts.with_samples(vec![2.0]);
        assert!(integrate(|_, d| d[0] = 0.0, &[1.0], 1.0, &late).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        // x' = x^2 from 1 blows up at t = 1.
        let res = integrate(|y, d| d[0] = y[0] * y[0], &[1.0], 2.0, &IntegrateOptions::new(1e-8, 1e-10));
        assert!(matches!(res, Err(Error::StepUnderflow { .. }) | Err(Error::NonFinite { .. })));
    }

    #[test]
    fn running_integral_of_constant() {
        let v = running_integral(|_| 1.0, 1e6, 1e-9, &[]).unwrap();
        assert!((v - 1e6).abs() < 1e-6);
        let v = running_integral(|_| 1.0, 1e6, 1e-9, &[1.0, 10.0, 5e5]).unwrap();
        assert!((v - 1e6).abs() < 1e-6);
    }

    #[test]
    fn projection_keeps_selected_components() {
        let traj = integrate(
            |y, d| {
                d[0] = -y[0];
                d[1] = 2.0;
            },
            &[1.0, 0.0],
            3.0,
            &IntegrateOptions::new(1e-9, 1e-12),
        )
        .unwrap();
        let p = traj.project(&[1]).unwrap();
        assert_eq!(p.dim, 1);
        assert!(p.component(0).eq(traj.component(1)));
        assert_eq!(p.dense.component(1.5, 0), traj.dense.component(1.5, 1));
        assert!(traj.project(&[2]).is_err());
    }

    #[test]
    fn deterministic() {
        let run = || integrate(|y, d| d[0] = -0.5 * y[0].powi(3), &[0.3], 1e4, &IntegrateOptions::new(1e-9, 1e-12)).unwrap();
        assert_eq!(run(), run());
    }
}
