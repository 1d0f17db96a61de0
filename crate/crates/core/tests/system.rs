use limitset_core::monotone::{
    base_point, check_boundedness, delta1, dichotomy_report, estimate_omega, genericity_sweep, OmegaOrder,
    OmegaSchedule, SystemInstance, DEFAULT_PERIODS,
};
use limitset_core::oscillation::{h_semianalytic, oscillation_extremes};
use limitset_core::suites;
use limitset_core::{choose_c0, Error};
use std::sync::OnceLock;

fn system() -> &'static SystemInstance {
    static SYS: OnceLock<SystemInstance> = OnceLock::new();
    SYS.get_or_init(|| SystemInstance::build(choose_c0(1.0).unwrap()).unwrap())
}

#[test]
fn omega_matches_closed_form_extremes() {
    let sys = system();
    let p = sys.params;
    let (x, y) = base_point(&p);
    let schedule = OmegaSchedule::new(&p, 0.0, DEFAULT_PERIODS);
    let (o, traj) = estimate_omega(sys, [x, y, 0.0], &schedule).unwrap();
    let report = oscillation_extremes(&p, 0.0, 0.0, DEFAULT_PERIODS).unwrap();
    assert!((o.z_hi - report.limsup_est).abs() < 1e-6);
    assert!((o.z_lo - report.liminf_est).abs() < 1e-6);
    for (t, s) in traj.iter() {
        assert!((s[2] - h_semianalytic(&p, 0.0, 0.0, t).unwrap()).abs() < 1e-6, "t = {t}");
    }
}

#[test]
fn tabled_and_direct_systems_agree() {
    let p = choose_c0(1.0).unwrap();
    let tabled = SystemInstance::build_tabled(p).unwrap();
    let base = base_point(&p);
    let c1 = dichotomy_report(system(), base, 0.0, 0.5, DEFAULT_PERIODS).unwrap();
    let c2 = dichotomy_report(&tabled, base, 0.0, 0.5, DEFAULT_PERIODS).unwrap();
    assert!((c1.overlap_margin - c2.overlap_margin).abs() < 1e-6);
    assert!(c2.passed);
}

#[test]
fn offset_near_one_still_overlaps() {
    let sys = system();
    let c = dichotomy_report(sys, base_point(&sys.params), -0.495, 0.495, DEFAULT_PERIODS).unwrap();
    assert!(c.passed);
    assert!(c.overlap_margin >= 0.01);
    assert_eq!(c.comparison, OmegaOrder::OverlappingDistinct);
}

#[test]
fn single_pair_sweep() {
    let g = genericity_sweep(system(), 1, 5, DEFAULT_PERIODS).unwrap();
    assert_eq!(g.passed_count, 1);
    assert_eq!(g.delta1, delta1(&system().params).0);
}

#[test]
fn boundedness_from_the_neighborhood() {
    let sys = system();
    let grid = suites::neighborhood_grid(sys);
    let horizon = OmegaSchedule::new(&sys.params, 0.0, DEFAULT_PERIODS).horizon;
    let r = check_boundedness(sys, &grid, horizon).unwrap();
    assert!(r.passed);
    assert!(r.rows.iter().all(|row| row.in_neighborhood));
}

#[test]
fn suites_pass_at_default_settings() {
    let sys = system();
    let p = sys.params;
    let reports = [
        suites::oscillation_suite(&p, &suites::OscillationOptions::default()).unwrap(),
        suites::g_suite(&p).unwrap(),
        suites::solutions(&p, 1e4, 201).unwrap(),
        suites::cooperativity(sys, 200, 5, 1e5, 0).unwrap(),
        suites::boundedness(sys).unwrap(),
    ];
    for r in &reports {
        let failed: Vec<String> = r.failed().map(|c| c.line()).collect();
        assert!(r.passed, "{}: {failed:?}", r.suite);
    }
}

#[test]
fn non_positive_delta_is_rejected() {
    assert!(matches!(choose_c0(-1.0), Err(Error::InvalidParameter(_))));
}
