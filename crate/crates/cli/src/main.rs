//! `limitset`: construct the system, run the verification suites and
//! certify the dichotomy violation.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 on usage
//! or precondition errors.

mod config;

use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use limitset_core::field::{FieldTable, MGrid};
use limitset_core::kv::fmt_real;
use limitset_core::monotone::{
    base_point, delta1, dichotomy_run, draw_pairs, genericity_sweep, SystemInstance, TABLE_DU, TABLE_U_SPAN,
};
use limitset_core::output::{write_json, write_plot, Band, CsvTable, LinePlot, Series};
use limitset_core::suites::{self, OscillationOptions, SuiteReport};
use limitset_core::{field, Error, Trajectory};

use config::{CommonArgs, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "limitset", version, about = "Cooperative system with non-dichotomous omega-limit sets")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Choose c0, estimate M and write params.kv, sigma.kv and g_table.csv.
    Construct,
    /// Run one verification suite and write report.json with its tables.
    Verify {
        #[arg(value_enum)]
        which: Suite,
        /// Random samples for the cooperativity suite.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Certify one pair X1(0) <= X2(0) differing in z.
    Dichotomy {
        #[arg(long, allow_negative_numbers = true)]
        z1: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        z2: Option<f64>,
    },
    /// Certify random pairs drawn around the base point.
    Sweep {
        #[arg(long, allow_negative_numbers = true)]
        n: Option<i64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    #[value(name = "lemma1")]
    Oscillation,
    G,
    Solutions,
    Cooperativity,
    Boundedness,
}

/// Outcome of a subcommand that ran to completion.
enum Outcome {
    Pass,
    Fail(String),
}

fn usage_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidParameter(_) | Error::Precondition(_) | Error::Parse(_) | Error::Io(_) | Error::Domain { .. }
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = RunConfig::resolve(&cli.common).and_then(|cfg| run(&cli.command, &cfg));
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(e) if usage_error(&e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("check failed: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(command: &Command, cfg: &RunConfig) -> limitset_core::Result<Outcome> {
    match command {
        Command::Construct => construct(cfg),
        Command::Verify { which, n } => verify(cfg, *which, *n),
        Command::Dichotomy { z1, z2 } => dichotomy(cfg, *z1, *z2),
        Command::Sweep { n } => sweep(cfg, *n),
    }
}

fn construct(cfg: &RunConfig) -> limitset_core::Result<Outcome> {
    let p = cfg.params;
    let field = FieldTable::with_table(p, TABLE_DU, p.u0() + TABLE_U_SPAN)?;
    let m = field::estimate_m(&p, &MGrid::default_for(&p))?;
    let sigma = field::build_sigma(m, field::DEFAULT_STIFFNESS)?;
    let out = cfg.ensure_out()?;
    std::fs::write(out.join("params.kv"), p.to_kv().render())?;
    std::fs::write(out.join("sigma.kv"), sigma.to_kv().render())?;
    suites::g_table_csv(&field).write(&out.join("g_table.csv"))?;
    println!("k = {}", p.k);
    println!("c0 = {}", fmt_real(p.c0));
    println!("rho = {}", fmt_real(p.rho));
    println!("M = {}", fmt_real(m));
    Ok(Outcome::Pass)
}

fn write_suite(out: &Path, report: &SuiteReport) -> limitset_core::Result<()> {
    write_json(&out.join("report.json"), report)?;
    for (name, table) in &report.tables {
        table.write(&out.join(format!("{name}.csv")))?;
    }
    for (name, map) in &report.heatmaps {
        write_plot(out, name, &map.render_svg(), &map.sidecar())?;
    }
    Ok(())
}

fn verify(cfg: &RunConfig, which: Suite, n: Option<usize>) -> limitset_core::Result<Outcome> {
    let p = &cfg.params;
    let report = match which {
        Suite::Oscillation => suites::oscillation_suite(
            p,
            &OscillationOptions {
                n_periods: cfg.periods,
                seed: cfg.seed,
                ..Default::default()
            },
        )?,
        Suite::G => suites::g_suite(p)?,
        Suite::Solutions => suites::solutions(p, 1e4, 201)?,
        Suite::Cooperativity => {
            let n = cfg.value(n, "n", Some(1000))?;
            if n == 0 {
                return Err(Error::InvalidParameter("--n must be >= 1".into()));
            }
            suites::cooperativity(&SystemInstance::build(*p)?, n, 20, 1e5, cfg.seed)?
        }
        Suite::Boundedness => suites::boundedness(&SystemInstance::build(*p)?)?,
    };
    write_suite(cfg.ensure_out()?, &report)?;
    for c in &report.checks {
        println!("{}", c.line());
    }
    let failed: Vec<&str> = report.failed().map(|c| c.name.as_str()).collect();
    Ok(if failed.is_empty() {
        Outcome::Pass
    } else {
        Outcome::Fail(format!("{}: {}", report.suite, failed.join(", ")))
    })
}

fn trajectory_csv(traj: &Trajectory) -> CsvTable {
    let mut table = CsvTable::new(&["t", "x", "y", "z"]);
    for (t, s) in traj.iter() {
        table.push_reals(&[t, s[0], s[1], s[2]]);
    }
    table
}

fn dichotomy(cfg: &RunConfig, z1: Option<f64>, z2: Option<f64>) -> limitset_core::Result<Outcome> {
    let z1 = cfg.value(z1, "z1", Some(0.0))?;
    let z2 = cfg.value(z2, "z2", Some(0.5))?;
    let system = SystemInstance::build(cfg.params)?;
    // A seed moves the planar start to a random point of the delta1-ball.
    let base = if cfg.has_seed() {
        let (x, y, _, _) = draw_pairs(&cfg.params, delta1(&cfg.params).0, 1, cfg.seed)[0];
        (x, y)
    } else {
        base_point(&cfg.params)
    };
    let run = dichotomy_run(&system, base, z1, z2, cfg.periods)?;
    let c = &run.certificate;
    let out = cfg.ensure_out()?;
    write_json(&out.join("certificate.json"), c)?;
    trajectory_csv(&run.lower).write(&out.join("trajectory_1.csv"))?;
    trajectory_csv(&run.upper).write(&out.join("trajectory_2.csv"))?;
    let series = |name: &str, traj: &Trajectory| Series {
        name: name.into(),
        points: traj.iter().map(|(t, s)| (t, s[2])).collect(),
    };
    let plot = LinePlot {
        title: "z1(t), z2(t) with omega-limit intervals".into(),
        x_label: "t".into(),
        y_label: "z".into(),
        series: vec![series("z1", &run.lower), series("z2", &run.upper)],
        bands: vec![
            Band {
                name: "omega1".into(),
                lo: c.omega1.z_lo,
                hi: c.omega1.z_hi,
            },
            Band {
                name: "omega2".into(),
                lo: c.omega2.z_lo,
                hi: c.omega2.z_hi,
            },
        ],
    };
    write_plot(out, "dichotomy", &plot.render_svg(), &plot.sidecar())?;
    print!("{}", c.summary());
    Ok(if c.passed {
        Outcome::Pass
    } else {
        Outcome::Fail("dichotomy certificate".into())
    })
}

fn sweep(cfg: &RunConfig, n: Option<i64>) -> limitset_core::Result<Outcome> {
    let n = cfg.value(n, "n", Some(25))?;
    if n < 1 {
        return Err(Error::InvalidParameter(format!("--n must be >= 1, got {n}")));
    }
    let system = SystemInstance::build(cfg.params)?;
    let report = genericity_sweep(&system, n as usize, cfg.seed, cfg.periods)?;
    let out = cfg.ensure_out()?;
    let mut table = CsvTable::new(&[
        "x0",
        "y0",
        "z1",
        "z2",
        "overlap_margin",
        "offset_invariance_residual",
        "comparison",
        "passed",
    ]);
    for p in &report.pairs {
        table.push(vec![
            fmt_real(p.x0),
            fmt_real(p.y0),
            fmt_real(p.z1),
            fmt_real(p.z2),
            fmt_real(p.overlap_margin),
            fmt_real(p.offset_invariance_residual),
            p.comparison.map_or("error".to_string(), |c| c.to_string()),
            p.passed.to_string(),
        ]);
    }
    table.write(&out.join("sweep.csv"))?;
    let summary = serde_json::json!({
        "delta1": report.delta1,
        "gaps": report.gaps,
        "seed": report.seed,
        "pairs": report.pairs.len(),
        "passed": report.passed_count,
        "pass_fraction": report.pass_fraction,
    });
    write_json(&out.join("summary.json"), &summary)?;
    println!("delta1 = {}", fmt_real(report.delta1));
    println!("{}/{} pairs certified", report.passed_count, report.pairs.len());
    Ok(if report.passed_count == report.pairs.len() {
        Outcome::Pass
    } else {
        Outcome::Fail(format!("{}/{} pairs certified", report.passed_count, report.pairs.len()))
    })
}
