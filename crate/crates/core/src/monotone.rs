//! The assembled system `x' = f(x)`, `y' = g(y)`, `z' = x + y - sigma(z)`,
//! its omega-limit estimates and the dichotomy certificate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{build_sigma, estimate_m, f_field, FieldTable, MGrid, SigmaSpec, DEFAULT_STIFFNESS};
use crate::functions::{p0, q0, ConstructionParams};
use crate::ode::{integrate, IntegrateOptions, Trajectory};
use crate::oscillation::{self, first_term_tail_bound, SAMPLES_PER_PERIOD};

/// Default number of `u`-periods for omega estimation.
pub const DEFAULT_PERIODS: usize = 4;

/// Knot spacing and extent of the optional Hermite table for `g`.
pub const TABLE_DU: f64 = 0.01;
pub const TABLE_U_SPAN: f64 = 64.0;

#[derive(Debug, Clone)]
pub struct SystemInstance {
    pub params: ConstructionParams,
    pub field: FieldTable,
    pub sigma: SigmaSpec,
}

impl SystemInstance {
    pub fn new(params: ConstructionParams, field: FieldTable, sigma: SigmaSpec) -> Self {
        Self { params, field, sigma }
    }

    /// Builds `g` by direct inversion, estimates `M` on the default grid and
    /// uses the default `sigma` stiffness.
    pub fn build(params: ConstructionParams) -> Result<Self> {
        let field = FieldTable::new(params)?;
        Self::with_field(params, field)
    }

    /// Like [`SystemInstance::build`] but serves `g` from a Hermite table.
    pub fn build_tabled(params: ConstructionParams) -> Result<Self> {
        let field = FieldTable::with_table(params, TABLE_DU, params.u0() + TABLE_U_SPAN)?;
        Self::with_field(params, field)
    }

    fn with_field(params: ConstructionParams, field: FieldTable) -> Result<Self> {
        let m = estimate_m(&params, &MGrid::default_for(&params))?;
        let sigma = build_sigma(m, DEFAULT_STIFFNESS)?;
        Ok(Self::new(params, field, sigma))
    }

    #[inline]
    pub fn rhs(&self, s: &[f64], d: &mut [f64]) {
        d[0] = f_field(s[0]);
        d[1] = self.field.g(s[1]);
        d[2] = s[0] + s[1] - self.sigma.eval(s[2]);
    }

    /// Central finite-difference Jacobian, `jac[i][j] = ∂F_i/∂s_j`.
    pub fn jacobian_fd(&self, s: [f64; 3]) -> [[f64; 3]; 3] {
        let mut jac = [[0.0; 3]; 3];
        for j in 0..3 {
            let h = 1e-7 * s[j].abs().max(1e-3);
            let (mut sp, mut sm) = (s, s);
            sp[j] += h;
            sm[j] -= h;
            let (mut fp, mut fm) = ([0.0; 3], [0.0; 3]);
            self.rhs(&sp, &mut fp);
            self.rhs(&sm, &mut fm);
            for i in 0..3 {
                jac[i][j] = (fp[i] - fm[i]) / (sp[j] - sm[j]);
            }
        }
        jac
    }

    pub fn options(&self) -> IntegrateOptions {
        IntegrateOptions::new(self.params.ode_rel_tol, self.params.ode_abs_tol)
    }

    pub fn integrate(&self, x0: [f64; 3], t_end: f64, samples: Option<Vec<f64>>) -> Result<Trajectory> {
        let mut opts = self.options();
        opts.sample_times = samples;
        integrate(|s, d| self.rhs(s, d), &x0, t_end, &opts)
    }

    /// Integrates `(x, y, z1)` and `(x, y, z2)` as one system `(x, y, z1, z2)`
    /// so that both `z` equations see the same `(x, y)` drive at every stage.
    pub fn integrate_pair(&self, xy: (f64, f64), z1: f64, z2: f64, t_end: f64, samples: Option<Vec<f64>>) -> Result<(Trajectory, Trajectory)> {
        let mut opts = self.options();
        opts.sample_times = samples;
        let field = |s: &[f64], d: &mut [f64]| {
            d[0] = f_field(s[0]);
            d[1] = self.field.g(s[1]);
            let drive = s[0] + s[1];
            d[2] = drive - self.sigma.eval(s[2]);
            d[3] = drive - self.sigma.eval(s[3]);
        };
        let joint = integrate(field, &[xy.0, xy.1, z1, z2], t_end, &opts)?;
        Ok((joint.project(&[0, 1, 2])?, joint.project(&[0, 1, 3])?))
    }

    /// Slack used for order and translate checks.
    pub fn slack(&self) -> f64 {
        10.0 * self.params.ode_abs_tol
    }

    /// Numerical margin on the dead-zone bound.
    pub fn epsilon_margin(&self) -> f64 {
        1e-6 + 10.0 * self.params.ode_abs_tol
    }
}

/// The open window of initial `(x, y)` whose solutions are `p(t + a)` and
/// `-q(t + b)` with `a, b ∈ (-1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XyWindow {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl XyWindow {
    pub fn new(params: &ConstructionParams) -> Self {
        let c0 = params.c0;
        Self {
            x_lo: p0(c0 + 1.0),
            x_hi: p0(c0 - 1.0),
            y_lo: -q0(c0 - 1.0),
            y_hi: -q0(c0 + 1.0),
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x > self.x_lo && x < self.x_hi && y > self.y_lo && y < self.y_hi
    }
}

/// Centre `(1/sqrt(c0), -q(0))` of the genericity ball.
pub fn base_point(params: &ConstructionParams) -> (f64, f64) {
    (p0(params.c0), -q0(params.c0))
}

/// Radius of the genericity ball and the four gaps it is the minimum of.
pub fn delta1(params: &ConstructionParams) -> (f64, [f64; 4]) {
    let c0 = params.c0;
    let gaps = [
        p0(c0 - 1.0) - p0(c0),
        p0(c0) - p0(c0 + 1.0),
        q0(c0 - 1.0) - q0(c0),
        q0(c0) - q0(c0 + 1.0),
    ];
    (gaps.iter().copied().fold(f64::INFINITY, f64::min), gaps)
}

/// Time shifts `(a, b)` with `x0 = p(a)`, `y0 = -q(b)`, when the point is in
/// the window.
pub fn shifts_for(system: &SystemInstance, x0: f64, y0: f64) -> Option<(f64, f64)> {
    let window = XyWindow::new(&system.params);
    if !window.contains(x0, y0) {
        return None;
    }
    let a = 1.0 / (x0 * x0) - system.params.c0;
    let b = system.field.phi(-y0).ok()?;
    Some((a, b))
}

/// Sample times for omega estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaSchedule {
    pub times: Vec<f64>,
    pub burn_in: f64,
    pub horizon: f64,
}

impl OmegaSchedule {
    /// Extremum schedule for shift `b` over `n_periods` periods, with a
    /// burn-in of one period.
    pub fn new(params: &ConstructionParams, b: f64, n_periods: usize) -> Self {
        let horizon = oscillation::horizon(params, b, n_periods as f64);
        let mut times = vec![0.0];
        times.extend(oscillation::sample_schedule(params, b, horizon, SAMPLES_PER_PERIOD));
        Self {
            times,
            burn_in: oscillation::horizon(params, b, 1.0),
            horizon,
        }
    }

    /// Schedule for a given initial point; `b = 0` outside the window.
    pub fn for_point(system: &SystemInstance, x0: [f64; 3], n_periods: usize) -> Self {
        let b = shifts_for(system, x0[0], x0[1]).map_or(0.0, |(_, b)| b);
        Self::new(&system.params, b, n_periods)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaEstimate {
    pub z_lo: f64,
    pub z_hi: f64,
    pub x_final: f64,
    pub y_final: f64,
    /// `|x| <= p(t - 1)` and `|y| <= q(t - 1)` at every sample, up to
    /// integration error.
    pub envelope_ok: bool,
    /// `|x|`, `|y|` non-increasing along the samples.
    pub decay_monotone: bool,
    pub decay_confirmed: bool,
    pub horizon: f64,
    pub burn_in: f64,
    pub uncertainty: f64,
    pub max_abs_z: f64,
    pub left_dead_zone: bool,
}

/// Omega estimate from an already integrated trajectory sampled on `schedule`.
pub fn omega_from_trajectory(system: &SystemInstance, traj: &Trajectory, schedule: &OmegaSchedule) -> OmegaEstimate {
    let params = &system.params;
    let x0 = traj.state(0);
    let mut z_lo = f64::INFINITY;
    let mut z_hi = f64::NEG_INFINITY;
    let mut max_abs_z: f64 = 0.0;
    let mut envelope_ok = true;
    let mut decay_monotone = true;
    let mut prev = (x0[0].abs(), x0[1].abs());
    // Integration error allowance on comparisons that hold with equality at the window edge.
    let slack = |v: f64| system.slack() + 10.0 * params.ode_rel_tol * v;
    for (t, s) in traj.iter() {
        max_abs_z = max_abs_z.max(s[2].abs());
        if t >= schedule.burn_in {
            z_lo = z_lo.min(s[2]);
            z_hi = z_hi.max(s[2]);
        }
        let (ax, ay) = (s[0].abs(), s[1].abs());
        let (px, qy) = (p0(t - 1.0 + params.c0), q0(t - 1.0 + params.c0));
        if ax > px + slack(px) || ay > qy + slack(qy) {
            envelope_ok = false;
        }
        if ax > prev.0 + slack(ax) || ay > prev.1 + slack(ay) {
            decay_monotone = false;
        }
        prev = (ax, ay);
    }
    let last = traj.last_state();
    let tail = shifts_for(system, x0[0], x0[1])
        .map_or(0.0, |(a, b)| first_term_tail_bound(params, a, b, schedule.burn_in));
    OmegaEstimate {
        z_lo,
        z_hi,
        x_final: last[0],
        y_final: last[1],
        envelope_ok,
        decay_monotone,
        decay_confirmed: envelope_ok && decay_monotone,
        horizon: schedule.horizon,
        burn_in: schedule.burn_in,
        uncertainty: tail + system.epsilon_margin(),
        max_abs_z,
        left_dead_zone: max_abs_z > system.sigma.threshold,
    }
}

/// Integrates from `x0` on `schedule` and estimates the omega-limit set.
pub fn estimate_omega(system: &SystemInstance, x0: [f64; 3], schedule: &OmegaSchedule) -> Result<(OmegaEstimate, Trajectory)> {
    let traj = system.integrate(x0, schedule.horizon, Some(schedule.times.clone()))?;
    Ok((omega_from_trajectory(system, &traj, schedule), traj))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaOrder {
    Equal,
    StrictlyOrdered,
    OverlappingDistinct,
    DisjointUnordered,
}

impl std::fmt::Display for OmegaOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OmegaOrder::Equal => "equal",
            OmegaOrder::StrictlyOrdered => "strictly_ordered",
            OmegaOrder::OverlappingDistinct => "overlapping_distinct",
            OmegaOrder::DisjointUnordered => "disjoint_unordered",
        })
    }
}

/// Compares two omega estimates as `z`-intervals over the origin of the
/// `(x, y)` plane, with their combined uncertainty as tolerance.
pub fn compare_omega(o1: &OmegaEstimate, o2: &OmegaEstimate) -> Result<OmegaOrder> {
    if !(o1.decay_confirmed && o2.decay_confirmed) {
        return Err(Error::Incomparable("(x, y) decay not confirmed".into()));
    }
    let unc = o1.uncertainty + o2.uncertainty;
    Ok(if (o1.z_lo - o2.z_lo).abs() <= unc && (o1.z_hi - o2.z_hi).abs() <= unc {
        OmegaOrder::Equal
    } else if o1.z_hi < o2.z_lo - unc {
        OmegaOrder::StrictlyOrdered
    } else if o2.z_hi < o1.z_lo - unc {
        OmegaOrder::DisjointUnordered
    } else {
        OmegaOrder::OverlappingDistinct
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityProbe {
    pub alpha: f64,
    /// Closest approach `|z(t) - alpha|` after burn-in.
    pub distance: f64,
    /// Number of crossings of `alpha` after burn-in.
    pub crossings: usize,
}

/// For 11 equispaced levels strictly inside `[z_lo, z_hi]`, locates the
/// crossings of `z(t)` through the dense output.
pub fn density_probe(traj: &Trajectory, omega: &OmegaEstimate) -> Vec<DensityProbe> {
    let knots = traj.dense.knots();
    let z = |t: f64| traj.dense.component(t, 2).unwrap_or(f64::NAN);
    (1..=11)
        .map(|j| {
            let alpha = omega.z_lo + (omega.z_hi - omega.z_lo) * j as f64 / 12.0;
            let mut distance = f64::INFINITY;
            let mut crossings = 0;
            for w in knots.windows(2).filter(|w| w[0] >= omega.burn_in) {
                let (mut lo, mut hi) = (w[0], w[1]);
                let (fl, fh) = (z(lo) - alpha, z(hi) - alpha);
                distance = distance.min(fl.abs()).min(fh.abs());
                if fl * fh > 0.0 {
                    continue;
                }
                crossings += 1;
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if (z(mid) - alpha) * fl > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                distance = distance.min((z(0.5 * (lo + hi)) - alpha).abs());
            }
            DensityProbe {
                alpha,
                distance,
                crossings,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomyCertificate {
    pub x0: f64,
    pub y0: f64,
    pub z1: f64,
    pub z2: f64,
    pub a: f64,
    pub b: f64,
    pub omega1: OmegaEstimate,
    pub omega2: OmegaEstimate,
    /// `max |(z2(t) - z1(t)) - (z2(0) - z1(0))|` over the samples.
    pub offset_invariance_residual: f64,
    pub residual_tolerance: f64,
    /// The translation `z2(0) - z1(0)` separating the two omega sets.
    pub distinctness_margin: f64,
    /// `limsup z1 - liminf z2`; positive means the sets overlap.
    pub overlap_margin: f64,
    pub comparison: OmegaOrder,
    pub density: Vec<DensityProbe>,
    pub passed: bool,
}

impl DichotomyCertificate {
    pub fn summary(&self) -> String {
        format!(
            "X1(0) = ({:.6e}, {:.6e}, {:.4}), X2(0) = ({:.6e}, {:.6e}, {:.4})\n\
             omega(X1) z-interval  [{:.6}, {:.6}]\n\
             omega(X2) z-interval  [{:.6}, {:.6}]\n\
             offset invariance residual {:.3e} (tolerance {:.1e})\n\
             distinctness margin {:.6}\n\
             overlap margin {:.6}\n\
             comparison {}\n\
             certified {}\n",
            self.x0,
            self.y0,
            self.z1,
            self.x0,
            self.y0,
            self.z2,
            self.omega1.z_lo,
            self.omega1.z_hi,
            self.omega2.z_lo,
            self.omega2.z_hi,
            self.offset_invariance_residual,
            self.residual_tolerance,
            self.distinctness_margin,
            self.overlap_margin,
            self.comparison,
            self.passed
        )
    }
}

#[derive(Debug, Clone)]
pub struct DichotomyRun {
    pub certificate: DichotomyCertificate,
    pub lower: Trajectory,
    pub upper: Trajectory,
}

/// Integrates `X1(0) = (x, y, z1)` and `X2(0) = (x, y, z2)` and certifies
/// that their omega-limit sets are distinct yet not ordered.
pub fn dichotomy_run(system: &SystemInstance, base_xy: (f64, f64), z1: f64, z2: f64, n_periods: usize) -> Result<DichotomyRun> {
    if !(z1 < z2) {
        return Err(Error::Precondition(format!("need z1 < z2, got z1 = {z1}, z2 = {z2}")));
    }
    if !(z2 - z1 < 1.0) {
        return Err(Error::Precondition(format!("need z2 - z1 < 1, got {}", z2 - z1)));
    }
    if !(z1.abs() < 1.0 && z2.abs() < 1.0) {
        return Err(Error::Precondition("need |z1| < 1 and |z2| < 1".into()));
    }
    let (x0, y0) = base_xy;
    let (a, b) = shifts_for(system, x0, y0).ok_or_else(|| {
        Error::Precondition(format!("(x0, y0) = ({x0}, {y0}) lies outside the construction window"))
    })?;
    let schedule = OmegaSchedule::new(&system.params, b, n_periods);
    let (lower, upper) = system.integrate_pair((x0, y0), z1, z2, schedule.horizon, Some(schedule.times.clone()))?;
    let omega1 = omega_from_trajectory(system, &lower, &schedule);
    let omega2 = omega_from_trajectory(system, &upper, &schedule);
    if omega1.left_dead_zone || omega2.left_dead_zone {
        return Err(Error::DeadZoneExit {
            z: omega1.max_abs_z.max(omega2.max_abs_z),
            threshold: system.sigma.threshold,
        });
    }
    let d = z2 - z1;
    let residual = lower
        .component(2)
        .zip(upper.component(2))
        .map(|(l, u)| ((u - l) - d).abs())
        .fold(0.0, f64::max);
    let comparison = compare_omega(&omega1, &omega2)?;
    let overlap_margin = omega1.z_hi - omega2.z_lo;
    let density = density_probe(&lower, &omega1);
    let residual_tolerance = system.slack();
    let passed = residual <= residual_tolerance
        && d > 0.0
        && overlap_margin > 0.0
        && comparison == OmegaOrder::OverlappingDistinct
        && density.iter().all(|p| p.distance <= 1e-3 && p.crossings >= 1);
    Ok(DichotomyRun {
        certificate: DichotomyCertificate {
            x0,
            y0,
            z1,
            z2,
            a,
            b,
            omega1,
            omega2,
            offset_invariance_residual: residual,
            residual_tolerance,
            distinctness_margin: d,
            overlap_margin,
            comparison,
            density,
            passed,
        },
        lower,
        upper,
    })
}

pub fn dichotomy_report(system: &SystemInstance, base_xy: (f64, f64), z1: f64, z2: f64, n_periods: usize) -> Result<DichotomyCertificate> {
    dichotomy_run(system, base_xy, z1, z2, n_periods).map(|run| run.certificate)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub x0: f64,
    pub y0: f64,
    pub z1: f64,
    pub z2: f64,
    pub overlap_margin: f64,
    pub offset_invariance_residual: f64,
    pub comparison: Option<OmegaOrder>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenericityReport {
    pub delta1: f64,
    pub gaps: [f64; 4],
    pub seed: u64,
    pub pairs: Vec<PairOutcome>,
    pub passed_count: usize,
    pub pass_fraction: f64,
}

/// Random draws for the genericity sweep: `(x0, y0, z1, z2)` with the
/// planar point in the `radius`-ball around [`base_point`].
pub fn draw_pairs(params: &ConstructionParams, radius: f64, n_pairs: usize, seed: u64) -> Vec<(f64, f64, f64, f64)> {
    let (xc, yc) = base_point(params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shrink = 1.0 - 1e-9;
    (0..n_pairs)
        .map(|_| {
            let x = xc + radius * shrink * rng.gen_range(-1.0..1.0);
            let y = yc + radius * shrink * rng.gen_range(-1.0..1.0);
            let d = rng.gen_range(1e-3..1.0 - 1e-3);
            let z1 = rng.gen_range(-1.0 + 1e-3..1.0 - 1e-3 - d);
            (x, y, z1, z1 + d)
        })
        .collect()
}

/// Certifies `n_pairs` random pairs drawn from the `delta1`-ball.
pub fn genericity_sweep(system: &SystemInstance, n_pairs: usize, seed: u64, n_periods: usize) -> Result<GenericityReport> {
    if n_pairs == 0 {
        return Err(Error::InvalidParameter("n_pairs must be >= 1".into()));
    }
    let (radius, gaps) = delta1(&system.params);
    let draws = draw_pairs(&system.params, radius, n_pairs, seed);
    let pairs: Vec<PairOutcome> = draws
        .par_iter()
        .map(|&(x0, y0, z1, z2)| match dichotomy_report(system, (x0, y0), z1, z2, n_periods) {
            Ok(c) => PairOutcome {
                x0,
                y0,
                z1,
                z2,
                overlap_margin: c.overlap_margin,
                offset_invariance_residual: c.offset_invariance_residual,
                comparison: Some(c.comparison),
                passed: c.passed,
            },
            Err(_) => PairOutcome {
                x0,
                y0,
                z1,
                z2,
                overlap_margin: f64::NAN,
                offset_invariance_residual: f64::NAN,
                comparison: None,
                passed: false,
            },
        })
        .collect();
    let passed_count = pairs.iter().filter(|p| p.passed).count();
    Ok(GenericityReport {
        delta1: radius,
        gaps,
        seed,
        pass_fraction: passed_count as f64 / n_pairs as f64,
        passed_count,
        pairs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateBox {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl StateBox {
    /// `[-rho/2, rho/2]^2 × [-M, M]`.
    pub fn default_for(system: &SystemInstance) -> Self {
        let r = 0.5 * system.params.rho;
        let m = system.sigma.m;
        Self {
            lo: [-r, -r, -m],
            hi: [r, r, m],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooperativityReport {
    pub samples: usize,
    pub min_off_diagonal: f64,
    pub worst_point: [f64; 3],
    /// Largest `|∂x'/∂y|, |∂x'/∂z|, |∂y'/∂x|, |∂y'/∂z|`; exactly zero by structure.
    pub max_decoupled_entry: f64,
    /// Range of `∂z'/∂x` and `∂z'/∂y`.
    pub coupling_range: (f64, f64),
    pub passed: bool,
}

/// Finite-difference cooperativity check at `n` random points of `bx`.
pub fn check_cooperativity(system: &SystemInstance, bx: &StateBox, n: usize, seed: u64) -> Result<CooperativityReport> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<[f64; 3]> = (0..n)
        .map(|_| std::array::from_fn(|k| rng.gen_range(bx.lo[k]..=bx.hi[k])))
        .collect();
    let mut min_off = f64::INFINITY;
    let mut worst = points[0];
    let mut decoupled: f64 = 0.0;
    let mut coupling = (f64::INFINITY, f64::NEG_INFINITY);
    for &s in &points {
        let jac = system.jacobian_fd(s);
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                if jac[i][j] < min_off {
                    min_off = jac[i][j];
                    worst = s;
                }
                if i < 2 {
                    decoupled = decoupled.max(jac[i][j].abs());
                } else {
                    coupling = (coupling.0.min(jac[i][j]), coupling.1.max(jac[i][j]));
                }
            }
        }
    }
    Ok(CooperativityReport {
        samples: n,
        min_off_diagonal: min_off,
        worst_point: worst,
        max_decoupled_entry: decoupled,
        coupling_range: coupling,
        passed: min_off >= -1e-8,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderRow {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
    /// Largest `lower_i(t) - upper_i(t)` over samples and components.
    pub max_violation: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    pub rows: Vec<OrderRow>,
    pub slack: f64,
    pub passed: bool,
}

/// Integrates each ordered pair to `t_end` on a common grid of `n_samples`
/// times and checks that the componentwise order persists.
pub fn check_order_preservation(
    system: &SystemInstance,
    pairs: &[([f64; 3], [f64; 3])],
    t_end: f64,
    n_samples: usize,
    slack: f64,
) -> Result<OrderReport> {
    for (lo, hi) in pairs {
        if (0..3).any(|k| lo[k] > hi[k]) {
            return Err(Error::Precondition(format!("pair {lo:?} <= {hi:?} is not ordered")));
        }
    }
    let samples = oscillation::linspace(0.0, t_end, n_samples.max(2));
    let rows: Result<Vec<OrderRow>> = pairs
        .par_iter()
        .map(|&(lower, upper)| {
            let tl = system.integrate(lower, t_end, Some(samples.clone()))?;
            let tu = system.integrate(upper, t_end, Some(samples.clone()))?;
            let mut worst = f64::NEG_INFINITY;
            for i in 0..tl.len() {
                for k in 0..3 {
                    worst = worst.max(tl.state(i)[k] - tu.state(i)[k]);
                }
            }
            Ok(OrderRow {
                lower,
                upper,
                max_violation: worst,
                passed: worst <= slack,
            })
        })
        .collect();
    let rows = rows?;
    let passed = rows.iter().all(|r| r.passed);
    Ok(OrderReport { rows, slack, passed })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundednessRow {
    pub x0: [f64; 3],
    pub in_neighborhood: bool,
    pub max_abs: [f64; 3],
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    pub rows: Vec<BoundednessRow>,
    pub threshold: f64,
    pub passed: bool,
}

/// Bound on `|z|` along a trajectory from `x0`.
///
/// Inside the construction neighbourhood `|z| <= 1 + M`. Elsewhere `z` can
/// only grow while `sigma(z) < |x + y|`, and `|x + y| <= |x0| + |y0|`
/// because both components decay monotonically.
pub fn z_bound(system: &SystemInstance, x0: [f64; 3]) -> (bool, f64) {
    let eps = system.epsilon_margin();
    let thr = system.sigma.threshold;
    let neighborhood = x0[2].abs() < 1.0 && XyWindow::new(&system.params).contains(x0[0], x0[1]);
    if neighborhood {
        (true, thr + eps)
    } else {
        let drive = x0[0].abs() + x0[1].abs();
        let level = thr + (drive / system.sigma.stiffness).sqrt();
        (false, x0[2].abs().max(level) + eps)
    }
}

pub fn check_boundedness(system: &SystemInstance, x0_grid: &[[f64; 3]], t_end: f64) -> Result<BoundednessReport> {
    let rows: Vec<BoundednessRow> = x0_grid
        .par_iter()
        .map(|&x0| {
            let (in_neighborhood, bound) = z_bound(system, x0);
            let schedule = OmegaSchedule::for_point(system, x0, DEFAULT_PERIODS);
            let samples: Vec<f64> = schedule.times.iter().copied().filter(|&t| t <= t_end).collect();
            match system.integrate(x0, t_end, Some(samples)) {
                Ok(traj) => {
                    let mut max_abs = [0.0f64; 3];
                    for (_, s) in traj.iter() {
                        for k in 0..3 {
                            max_abs[k] = max_abs[k].max(s[k].abs());
                        }
                    }
                    let finite = max_abs.iter().all(|v| v.is_finite());
                    BoundednessRow {
                        x0,
                        in_neighborhood,
                        max_abs,
                        bound,
                        passed: finite && max_abs[2] <= bound,
                    }
                }
                Err(_) => BoundednessRow {
                    x0,
                    in_neighborhood,
                    max_abs: [f64::INFINITY; 3],
                    bound,
                    passed: false,
                },
            }
        })
        .collect();
    let passed = rows.iter().all(|r| r.passed);
    Ok(BoundednessReport {
        rows,
        threshold: system.sigma.threshold,
        passed,
    })
}

/// Re-entry evidence for a start above the dead zone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReentryReport {
    pub z0: f64,
    pub reentry_time: Option<f64>,
    /// `z` strictly decreasing at every accepted step before re-entry.
    pub decreasing_before: bool,
}

pub fn dead_zone_reentry(system: &SystemInstance, x0: [f64; 3], t_end: f64) -> Result<ReentryReport> {
    let traj = system.integrate(x0, t_end, None)?;
    let thr = system.sigma.threshold;
    let mut prev = x0[2];
    let mut decreasing = true;
    let mut reentry = None;
    for (t, s) in traj.iter().skip(1) {
        if s[2] <= thr {
            reentry = Some(t);
            break;
        }
        if s[2] >= prev {
            decreasing = false;
        }
        prev = s[2];
    }
    Ok(ReentryReport {
        z0: x0[2],
        reentry_time: reentry,
        decreasing_before: decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::choose_c0;
    use std::sync::OnceLock;

    fn system() -> &'static SystemInstance {
        static SYS: OnceLock<SystemInstance> = OnceLock::new();
        SYS.get_or_init(|| SystemInstance::build(choose_c0(1.0).unwrap()).unwrap())
    }

    fn estimate(z_lo: f64, z_hi: f64) -> OmegaEstimate {
        OmegaEstimate {
            z_lo,
            z_hi,
            x_final: 0.0,
            y_final: 0.0,
            envelope_ok: true,
            decay_monotone: true,
            decay_confirmed: true,
            horizon: 1.0,
            burn_in: 0.0,
            uncertainty: 1e-6,
            max_abs_z: z_lo.abs().max(z_hi.abs()),
            left_dead_zone: false,
        }
    }

    #[test]
    fn compare_examples() {
        let a = estimate(-4.0, 4.0);
        assert_eq!(compare_omega(&a, &a).unwrap(), OmegaOrder::Equal);
        assert_eq!(compare_omega(&a, &estimate(-3.5, 4.5)).unwrap(), OmegaOrder::OverlappingDistinct);
        assert_eq!(compare_omega(&estimate(0.0, 0.0), &estimate(2.0, 3.0)).unwrap(), OmegaOrder::StrictlyOrdered);
        assert_eq!(compare_omega(&estimate(2.0, 3.0), &estimate(0.0, 0.0)).unwrap(), OmegaOrder::DisjointUnordered);
        let mut bad = a;
        bad.decay_confirmed = false;
        assert!(matches!(compare_omega(&a, &bad), Err(Error::Incomparable(_))));
    }

    #[test]
    fn delta1_gaps() {
        let p = choose_c0(1.0).unwrap();
        let (d, gaps) = delta1(&p);
        assert!(gaps.iter().all(|&g| g > 0.0));
        assert_eq!(d, gaps.iter().copied().fold(f64::INFINITY, f64::min));
        let (x, y) = base_point(&p);
        assert!(XyWindow::new(&p).contains(x, y));
        assert!(XyWindow::new(&p).contains(x - d * (1.0 - 1e-9), y + d * (1.0 - 1e-9)));
    }

    #[test]
    fn base_point_has_zero_shifts() {
        let sys = system();
        let (x, y) = base_point(&sys.params);
        let (a, b) = shifts_for(sys, x, y).unwrap();
        assert!(a.abs() < 1e-9 && b.abs() < 1e-9, "a = {a}, b = {b}");
        assert!(shifts_for(sys, 0.0, 0.0).is_none());
    }

    #[test]
    fn equilibrium_omega_is_a_point() {
        let sys = system();
        let schedule = OmegaSchedule::new(&sys.params, 0.0, 2);
        let (o, _) = estimate_omega(sys, [0.0, 0.0, 0.0], &schedule).unwrap();
        assert_eq!((o.z_lo, o.z_hi), (0.0, 0.0));
        assert!(o.decay_confirmed);
    }

    #[test]
    fn base_point_amplitude_and_shift() {
        let sys = system();
        let (x, y) = base_point(&sys.params);
        let schedule = OmegaSchedule::new(&sys.params, 0.0, DEFAULT_PERIODS);
        let (o0, _) = estimate_omega(sys, [x, y, 0.0], &schedule).unwrap();
        let (o3, _) = estimate_omega(sys, [x, y, 0.3], &schedule).unwrap();
        assert!(o0.z_hi - o0.z_lo >= 1.0);
        assert!((o0.z_hi - o0.z_lo - 8.0).abs() < 1e-4, "{o0:?}");
        assert!(((o3.z_lo - o0.z_lo) - 0.3).abs() < 1e-6);
        assert!(((o3.z_hi - o0.z_hi) - 0.3).abs() < 1e-6);
        assert!(o0.decay_confirmed && !o0.left_dead_zone);
    }

    #[test]
    fn dichotomy_preconditions() {
        let sys = system();
        let base = base_point(&sys.params);
        assert!(matches!(dichotomy_report(sys, base, 0.0, 0.0, 2), Err(Error::Precondition(_))));
        assert!(matches!(dichotomy_report(sys, base, -0.5, 0.6, 2), Err(Error::Precondition(_))));
        assert!(matches!(dichotomy_report(sys, base, 0.5, 1.0, 2), Err(Error::Precondition(_))));
        assert!(matches!(dichotomy_report(sys, (0.0, 0.0), 0.0, 0.5, 2), Err(Error::Precondition(_))));
    }

    #[test]
    fn main_certificate() {
        let sys = system();
        let c = dichotomy_report(sys, base_point(&sys.params), 0.0, 0.5, DEFAULT_PERIODS).unwrap();
        assert!(c.passed, "{}", c.summary());
        assert_eq!(c.distinctness_margin, 0.5);
        assert!((c.overlap_margin - 7.5).abs() < 1e-4);
        assert!(c.offset_invariance_residual <= 10.0 * sys.params.ode_abs_tol);
        assert_eq!(c.comparison, OmegaOrder::OverlappingDistinct);
        assert!(c.density.iter().all(|p| p.distance <= 1e-3));
    }

    #[test]
    fn window_edge_still_certifies() {
        let sys = system();
        let w = XyWindow::new(&sys.params);
        let (x, _) = base_point(&sys.params);
        let y = w.y_lo + 1e-12;
        let c = dichotomy_report(sys, (x, y), -0.2, 0.3, DEFAULT_PERIODS).unwrap();
        assert!(c.passed, "{}", c.summary());
    }

    #[test]
    fn sweep_draws_are_deterministic_and_valid() {
        let p = choose_c0(1.0).unwrap();
        let (d, _) = delta1(&p);
        let a = draw_pairs(&p, d, 40, 11);
        assert_eq!(a, draw_pairs(&p, d, 40, 11));
        let (xc, yc) = base_point(&p);
        for (x, y, z1, z2) in a {
            assert!((x - xc).abs() < d && (y - yc).abs() < d);
            assert!(z1 > -1.0 && z2 < 1.0 && z2 > z1 && z2 - z1 < 1.0);
        }
        assert!(genericity_sweep(system(), 0, 0, 2).is_err());
    }

    #[test]
    fn cooperativity_structure() {
        let sys = system();
        let r = check_cooperativity(sys, &StateBox::default_for(sys), 200, 1).unwrap();
        assert!(r.passed);
        assert_eq!(r.max_decoupled_entry, 0.0);
        assert!((r.coupling_range.0 - 1.0).abs() < 1e-6 && (r.coupling_range.1 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn order_rejects_unordered_pairs() {
        let sys = system();
        let pair = ([0.0, 0.0, 1.0], [0.0, 0.0, 0.0]);
        assert!(check_order_preservation(sys, &[pair], 10.0, 5, 0.0).is_err());
        let same = ([0.01, -0.01, 0.2], [0.01, -0.01, 0.2]);
        let r = check_order_preservation(sys, &[same], 1e3, 11, 0.0).unwrap();
        assert_eq!(r.rows[0].max_violation, 0.0);
    }

    #[test]
    fn reentry_from_above() {
        let sys = system();
        let (x, y) = base_point(&sys.params);
        let r = dead_zone_reentry(sys, [x, y, sys.sigma.threshold + 5.0], 1e4).unwrap();
        assert!(r.reentry_time.is_some() && r.decreasing_before);
    }
}
