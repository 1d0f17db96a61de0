//! Verification suites: each bundles a family of checks into a report with
//! named pass/fail entries and the tabular evidence behind them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::field::{geometric_grid, tail_junction_mismatch, verify_g_c1_at_zero, C1Report, FieldTable};
use crate::functions::{p0, q0, ConstructionParams};
use crate::kv::fmt_real;
use crate::monotone::{
    base_point, check_boundedness, check_cooperativity, check_order_preservation, dead_zone_reentry, OmegaSchedule,
    StateBox, SystemInstance, XyWindow, DEFAULT_PERIODS,
};
use crate::ode::{integrate, IntegrateOptions};
use crate::oscillation::{
    self, fitted_cosine_factor, h_quadrature, h_semianalytic, oscillation_sweep, linspace, OscillationReport,
    COSINE_FACTOR, SAMPLES_PER_PERIOD,
};
use crate::output::{CsvTable, Heatmap};
use crate::quadrature;
use crate::sum::NeumaierSum;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    /// How `value` relates to `threshold`, e.g. `<=`.
    pub relation: String,
}

impl Check {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self::new(name, value <= threshold, value, threshold, "<=")
    }

    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self::new(name, value >= threshold, value, threshold, ">=")
    }

    pub fn above(name: &str, value: f64, threshold: f64) -> Self {
        Self::new(name, value > threshold, value, threshold, ">")
    }

    pub fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self::new(name, value < threshold, value, threshold, "<")
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Self::new(name, ok, if ok { 1.0 } else { 0.0 }, 1.0, "==")
    }

    fn new(name: &str, passed: bool, value: f64, threshold: f64, relation: &str) -> Self {
        Self {
            name: name.to_string(),
            passed: passed && !value.is_nan(),
            value,
            threshold,
            relation: relation.to_string(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {} {} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            fmt_real(self.value),
            self.relation,
            fmt_real(self.threshold)
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub details: serde_json::Value,
    /// Named CSV tables, written next to `report.json`.
    #[serde(skip)]
    pub tables: Vec<(String, CsvTable)>,
    /// Named heatmaps, written as SVG with a sidecar CSV.
    #[serde(skip)]
    pub heatmaps: Vec<(String, Heatmap)>,
}

impl SuiteReport {
    fn new(suite: &str, checks: Vec<Check>, details: serde_json::Value) -> Self {
        Self {
            suite: suite.to_string(),
            passed: checks.iter().all(|c| c.passed),
            checks,
            details,
            tables: Vec::new(),
            heatmaps: Vec::new(),
        }
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn details<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

/// `∫_0^T (p(t+a) - p(t+b)) dt` at each of the increasing `times`, by
/// quadrature over consecutive intervals.
pub fn first_term_running(params: &ConstructionParams, a: f64, b: f64, times: &[f64]) -> Result<Vec<f64>> {
    let c0 = params.c0;
    let f = |t: f64| p0(t + c0 + a) - p0(t + c0 + b);
    let tol = params.quad_tol / times.len().max(1) as f64;
    let mut acc = NeumaierSum::new(0.0);
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        acc.add(quadrature::integrate(f, prev, t, tol)?.value);
        out.push(acc.value());
        prev = t;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationOptions {
    pub grid: usize,
    pub extent: f64,
    pub n_periods: usize,
    pub n_oracle: usize,
    pub t_oracle_max: f64,
    pub seed: u64,
}

impl Default for OscillationOptions {
    fn default() -> Self {
        Self {
            grid: 9,
            extent: 0.9,
            n_periods: DEFAULT_PERIODS,
            n_oracle: 50,
            t_oracle_max: 1e6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OraclePoint {
    pub a: f64,
    pub b: f64,
    pub t: f64,
    pub quadrature: f64,
    pub semianalytic: f64,
}

/// Oscillation of `H_{a,b}`: method agreement, the first-term bound and the
/// limsup/liminf gap over an `(a, b)` grid.
pub fn oscillation_suite(params: &ConstructionParams, opts: &OscillationOptions) -> Result<SuiteReport> {
    let axis = linspace(-opts.extent, opts.extent, opts.grid);
    let cells = oscillation_sweep(params, &axis, opts.n_periods)?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let draws: Vec<(f64, f64, f64)> = (0..opts.n_oracle)
        .map(|_| {
            (
                rng.gen_range(-0.99..0.99),
                rng.gen_range(-0.99..0.99),
                rng.gen_range(0.0..=opts.t_oracle_max),
            )
        })
        .collect();
    let oracle: Vec<OraclePoint> = draws
        .par_iter()
        .map(|&(a, b, t)| {
            Ok(OraclePoint {
                a,
                b,
                t,
                quadrature: h_quadrature(params, a, b, t)?,
                semianalytic: h_semianalytic(params, a, b, t)?,
            })
        })
        .collect::<Result<_>>()?;
    let oracle_err = oracle
        .iter()
        .map(|p| (p.quadrature - p.semianalytic).abs())
        .fold(0.0, f64::max);

    let running: Vec<f64> = cells
        .par_iter()
        .map(|c| {
            let horizon = oscillation::horizon(params, c.b, opts.n_periods as f64);
            let times = oscillation::sample_schedule(params, c.b, horizon, SAMPLES_PER_PERIOD);
            let vals = first_term_running(params, c.a, c.b, &times)?;
            Ok(vals.into_iter().map(f64::abs).fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    let running_max = running.iter().copied().fold(0.0, f64::max);

    let min_gap = cells.iter().map(OscillationReport::gap).fold(f64::INFINITY, f64::min);
    let min_sup = cells.iter().map(|c| c.limsup_est).fold(f64::INFINITY, f64::min);
    let max_inf = cells.iter().map(|c| c.liminf_est).fold(f64::NEG_INFINITY, f64::max);
    let agreement = cells.iter().map(|c| c.method_agreement).fold(0.0, f64::max);
    let factor = fitted_cosine_factor(params)?;

    let checks = vec![
        Check::at_most("oracle_agreement", oracle_err, 1e-8),
        Check::at_most("extremum_agreement", agreement, 1e-8),
        Check::at_most("cosine_factor_fit", (factor - COSINE_FACTOR).abs(), 1e-6),
        Check::at_most("first_term_bound", running_max, params.first_term_bound() + 1e-9),
        Check::at_least("min_gap", min_gap, 1.0),
        Check::above("min_limsup", min_sup, 0.25),
        Check::below("max_liminf", max_inf, -0.25),
    ];

    let mut grid = CsvTable::new(&[
        "a",
        "b",
        "limsup_est",
        "liminf_est",
        "gap",
        "uncertainty",
        "first_term_running_max",
        "method_agreement",
    ]);
    for (c, r) in cells.iter().zip(&running) {
        grid.push_reals(&[c.a, c.b, c.limsup_est, c.liminf_est, c.gap(), c.uncertainty, *r, c.method_agreement]);
    }
    let mut oracle_table = CsvTable::new(&["a", "b", "t", "quadrature", "semianalytic", "abs_diff"]);
    for p in &oracle {
        oracle_table.push_reals(&[p.a, p.b, p.t, p.quadrature, p.semianalytic, (p.quadrature - p.semianalytic).abs()]);
    }
    let n = axis.len();
    let heatmap = Heatmap {
        title: "limsup - liminf of H over (a, b)".into(),
        x_label: "a".into(),
        y_label: "b".into(),
        xs: axis.clone(),
        ys: axis.clone(),
        values: (0..n).map(|i| (0..n).map(|j| cells[i * n + j].gap()).collect()).collect(),
    };

    let mut report = SuiteReport::new(
        "lemma1",
        checks,
        serde_json::json!({
            "c0": params.c0,
            "cosine_factor": factor,
            "first_term_bound": params.first_term_bound(),
            "grid": cells,
        }),
    );
    report.tables.push(("oscillation_grid".into(), grid));
    report.tables.push(("oracle_points".into(), oracle_table));
    report.heatmaps.push(("oscillation_heatmap".into(), heatmap));
    Ok(report)
}

/// Largest relative deviation of the Hermite table from direct inversion,
/// at knot midpoints.
pub fn table_deviation(params: &ConstructionParams) -> Result<(f64, FieldTable)> {
    let tabled = FieldTable::with_table(*params, crate::monotone::TABLE_DU, params.u0() + crate::monotone::TABLE_U_SPAN)?;
    let direct = FieldTable::new(*params)?;
    let rows: Vec<(f64, f64, f64)> = tabled.table().map(|t| t.rows().collect()).unwrap_or_default();
    let worst = rows
        .windows(2)
        .map(|w| {
            let r = 0.5 * (w[0].0 + w[1].0);
            let exact = direct.g(r);
            ((tabled.g(r) - exact) / exact).abs()
        })
        .fold(0.0, f64::max);
    Ok((worst, tabled))
}

/// `g` near zero and at the tail junction, plus table accuracy.
pub fn g_suite(params: &ConstructionParams) -> Result<SuiteReport> {
    let field = FieldTable::new(*params)?;
    let grid = geometric_grid(1e-2, 1e-6, 2);
    let c1: C1Report = verify_g_c1_at_zero(&field, &grid)?;
    let (left, right, junction) = tail_junction_mismatch(&field);
    let round_trip = field.phi(q0(params.c0))?.abs();
    let odd = [1e-6, 1e-4, 1e-2, 0.5 * params.rho, 2.0 * params.rho]
        .iter()
        .map(|&r| (field.g(r) + field.g(-r)).abs())
        .fold(0.0, f64::max);
    let (table_dev, tabled) = table_deviation(params)?;

    let checks = vec![
        Check::flag("secant_monotone", c1.secant_monotone),
        Check::below("last_secant", c1.last_secant.abs(), 1e-3),
        Check::below("last_g_prime", c1.last_g_prime.abs(), 1e-3),
        Check::flag("g_prime_decade_sup_decreasing", c1.g_prime_vanishing),
        Check::below("junction_mismatch", junction, 1e-6),
        Check::at_most("inversion_round_trip", round_trip, 1e-9),
        Check::at_most("odd_symmetry", odd, 0.0),
        Check::at_most("table_relative_error", table_dev, 1e-8),
    ];

    let mut rows = CsvTable::new(&["r", "phi", "g", "secant", "g_prime", "scaled_g_prime", "cubic_ratio"]);
    for r in &c1.rows {
        rows.push_reals(&[r.r, r.phi, r.g, r.secant, r.g_prime, r.scaled_g_prime, r.cubic_ratio]);
    }
    let mut report = SuiteReport::new(
        "g",
        checks,
        serde_json::json!({
            "c1": details(&c1),
            "tail_anchor": field.tail_anchor,
            "junction_left": left,
            "junction_right": right,
        }),
    );
    report.tables.push(("g_near_zero".into(), rows));
    report.tables.push(("g_table".into(), g_table_csv(&tabled)));
    Ok(report)
}

/// The Hermite knots `(r, g, g')` as a table; empty without a table.
pub fn g_table_csv(field: &FieldTable) -> CsvTable {
    let mut table = CsvTable::new(&["r", "g", "g_prime"]);
    if let Some(t) = field.table() {
        for (r, g, dg) in t.rows() {
            table.push_reals(&[r, g, dg]);
        }
    }
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityRow {
    /// `"x"` for `x' = f(x)` against `p`, `"y"` for `y' = g(y)` against `q`.
    pub equation: &'static str,
    pub sign: f64,
    pub shift: f64,
    pub max_abs_error: f64,
}

/// Integrates `x' = f(x)` from `±p(a)` and `y' = g(y)` from `±q(b)` and
/// compares against `±p(t + a)` and `±q(t + b)`.
pub fn solutions(params: &ConstructionParams, t_end: f64, n_samples: usize) -> Result<SuiteReport> {
    let field = FieldTable::new(*params)?;
    let samples = linspace(0.0, t_end, n_samples.max(2));
    let opts = IntegrateOptions::new(params.ode_rel_tol, params.ode_abs_tol).with_samples(samples);
    let c0 = params.c0;
    let mut cases = Vec::new();
    for equation in ["x", "y"] {
        for sign in [1.0, -1.0] {
            for shift in [-0.9, 0.0, 0.9] {
                cases.push((equation, sign, shift));
            }
        }
    }
    let rows: Vec<IdentityRow> = cases
        .par_iter()
        .map(|&(equation, sign, shift)| {
            let exact = |t: f64| {
                sign * if equation == "x" {
                    p0(t + shift + c0)
                } else {
                    q0(t + shift + c0)
                }
            };
            let traj = if equation == "x" {
                integrate(|s, d| d[0] = crate::field::f_field(s[0]), &[exact(0.0)], t_end, &opts)?
            } else {
                integrate(|s, d| d[0] = field.g(s[0]), &[exact(0.0)], t_end, &opts)?
            };
            let max_abs_error = traj.iter().map(|(t, s)| (s[0] - exact(t)).abs()).fold(0.0, f64::max);
            Ok(IdentityRow {
                equation,
                sign,
                shift,
                max_abs_error,
            })
        })
        .collect::<Result<_>>()?;
    let worst = |eq: &str| {
        rows.iter()
            .filter(|r| r.equation == eq)
            .map(|r| r.max_abs_error)
            .fold(0.0, f64::max)
    };
    let checks = vec![
        Check::at_most("x_identity", worst("x"), 1e-7),
        Check::at_most("y_identity", worst("y"), 1e-7),
    ];
    let mut table = CsvTable::new(&["equation", "sign", "shift", "max_abs_error"]);
    for r in &rows {
        table.push(vec![r.equation.into(), fmt_real(r.sign), fmt_real(r.shift), fmt_real(r.max_abs_error)]);
    }
    let mut report = SuiteReport::new("solutions", checks, serde_json::json!({ "t_end": t_end, "rows": rows }));
    report.tables.push(("solutions".into(), table));
    Ok(report)
}

/// Ordered pairs `lower <= upper` with planar parts in the window and
/// `|z| < 1`.
pub fn random_ordered_pairs(system: &SystemInstance, n: usize, seed: u64) -> Vec<([f64; 3], [f64; 3])> {
    let w = XyWindow::new(&system.params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |lo: f64, hi: f64| {
        let (a, b) = (rng.gen_range(lo..hi), rng.gen_range(lo..hi));
        (a.min(b), a.max(b))
    };
    let shrink = |lo: f64, hi: f64| (lo + 1e-3 * (hi - lo), hi - 1e-3 * (hi - lo));
    let (xl, xh) = shrink(w.x_lo, w.x_hi);
    let (yl, yh) = shrink(w.y_lo, w.y_hi);
    (0..n)
        .map(|_| {
            let x = draw(xl, xh);
            let y = draw(yl, yh);
            let z = draw(-0.999, 0.999);
            ([x.0, y.0, z.0], [x.1, y.1, z.1])
        })
        .collect()
}

/// Cooperativity of the Jacobian and order preservation of the flow.
pub fn cooperativity(system: &SystemInstance, n: usize, n_pairs: usize, t_end: f64, seed: u64) -> Result<SuiteReport> {
    let coop = check_cooperativity(system, &StateBox::default_for(system), n, seed)?;
    let (base_x, base_y) = base_point(&system.params);
    let mut pairs = vec![
        ([base_x, base_y, 0.0], [base_x, base_y, 0.0]),
        ([base_x, base_y, 0.0], [base_x, base_y, 0.5]),
    ];
    pairs.extend(random_ordered_pairs(system, n_pairs, seed));
    let order = check_order_preservation(system, &pairs, t_end, 201, system.slack())?;
    let worst_order = order.rows.iter().map(|r| r.max_violation).fold(f64::NEG_INFINITY, f64::max);
    let checks = vec![
        Check::at_least("min_off_diagonal", coop.min_off_diagonal, -1e-8),
        Check::at_most("decoupled_entries", coop.max_decoupled_entry, 0.0),
        Check::at_most(
            "coupling_unit",
            (coop.coupling_range.0 - 1.0).abs().max((coop.coupling_range.1 - 1.0).abs()),
            1e-6,
        ),
        Check::at_most("order_violation", worst_order, order.slack),
    ];
    let mut table = CsvTable::new(&["x_lo", "y_lo", "z_lo", "x_hi", "y_hi", "z_hi", "max_violation"]);
    for r in &order.rows {
        table.push_reals(&[r.lower[0], r.lower[1], r.lower[2], r.upper[0], r.upper[1], r.upper[2], r.max_violation]);
    }
    let mut report = SuiteReport::new(
        "cooperativity",
        checks,
        serde_json::json!({ "jacobian": details(&coop), "order_t_end": t_end, "order": details(&order) }),
    );
    report.tables.push(("order_pairs".into(), table));
    Ok(report)
}

/// Neighbourhood starts on a grid over the window and `z ∈ {-0.9, 0, 0.9}`.
pub fn neighborhood_grid(system: &SystemInstance) -> Vec<[f64; 3]> {
    let w = XyWindow::new(&system.params);
    let inner = |lo: f64, hi: f64| linspace(lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo), 3);
    let mut grid = Vec::new();
    for &x in &inner(w.x_lo, w.x_hi) {
        for &y in &inner(w.y_lo, w.y_hi) {
            for z in [-0.9, 0.0, 0.9] {
                grid.push([x, y, z]);
            }
        }
    }
    grid
}

/// `|z| <= 1 + M` from the neighbourhood, return from above the dead zone
/// and the equilibria on the `z`-axis.
pub fn boundedness(system: &SystemInstance) -> Result<SuiteReport> {
    let (bx, by) = base_point(&system.params);
    let thr = system.sigma.threshold;
    let horizon = OmegaSchedule::new(&system.params, 0.0, DEFAULT_PERIODS).horizon;
    let grid = neighborhood_grid(system);
    let inside = check_boundedness(system, &grid, horizon)?;
    let outside_starts = [[bx, by, thr + 5.0], [bx, by, -thr - 5.0], [0.1, -0.1, thr + 1.0]];
    let outside = check_boundedness(system, &outside_starts, horizon)?;
    let reentry = dead_zone_reentry(system, [bx, by, thr + 5.0], horizon)?;
    let mut equilibrium_drift: f64 = 0.0;
    for zeta in [-thr, -1.0, 0.0, 0.5 * thr, thr] {
        let traj = system.integrate([0.0, 0.0, zeta], horizon, None)?;
        for (_, s) in traj.iter() {
            equilibrium_drift = equilibrium_drift.max(s[0].abs()).max(s[1].abs()).max((s[2] - zeta).abs());
        }
    }
    let max_z = inside.rows.iter().map(|r| r.max_abs[2]).fold(0.0, f64::max);
    let checks = vec![
        Check::at_most("neighborhood_max_abs_z", max_z, thr + system.epsilon_margin()),
        Check::flag("outside_bounded", outside.passed),
        Check::flag("reentry", reentry.reentry_time.is_some()),
        Check::flag("decreasing_before_reentry", reentry.decreasing_before),
        Check::at_most("equilibrium_drift", equilibrium_drift, 0.0),
    ];
    let mut table = CsvTable::new(&["x0", "y0", "z0", "in_neighborhood", "max_abs_x", "max_abs_y", "max_abs_z", "bound"]);
    for r in inside.rows.iter().chain(&outside.rows) {
        table.push(vec![
            fmt_real(r.x0[0]),
            fmt_real(r.x0[1]),
            fmt_real(r.x0[2]),
            r.in_neighborhood.to_string(),
            fmt_real(r.max_abs[0]),
            fmt_real(r.max_abs[1]),
            fmt_real(r.max_abs[2]),
            fmt_real(r.bound),
        ]);
    }
    let mut report = SuiteReport::new(
        "boundedness",
        checks,
        serde_json::json!({
            "threshold": thr,
            "horizon": horizon,
            "reentry": details(&reentry),
        }),
    );
    report.tables.push(("boundedness".into(), table));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::choose_c0;

    #[test]
    fn check_lines() {
        assert!(Check::at_most("a", 1.0, 1.0).passed);
        assert!(!Check::below("a", 1.0, 1.0).passed);
        assert!(!Check::at_least("nan", f64::NAN, 0.0).passed);
        assert!(Check::flag("f", true).line().starts_with("PASS f: "));
    }

    #[test]
    fn first_term_running_matches_closed_form() {
        let p = choose_c0(1.0).unwrap();
        let times = [10.0, 1e3, 1e5, 1e6];
        let vals = first_term_running(&p, 0.5, -0.7, &times).unwrap();
        for (t, v) in times.iter().zip(vals) {
            assert!((v - oscillation::first_term(&p, 0.5, -0.7, *t)).abs() < 1e-9);
        }
    }

    #[test]
    fn ordered_pairs_are_ordered_and_in_window() {
        let p = choose_c0(1.0).unwrap();
        let sys = SystemInstance::build(p).unwrap();
        let w = XyWindow::new(&p);
        for (lo, hi) in random_ordered_pairs(&sys, 50, 3) {
            assert!((0..3).all(|k| lo[k] <= hi[k]));
            assert!(w.contains(lo[0], lo[1]) && w.contains(hi[0], hi[1]));
        }
    }
}
