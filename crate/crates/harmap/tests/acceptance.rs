//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! ```text
//! cargo test --release -p harmap --test acceptance
//! ```

mod common;

use std::process::ExitCode;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use common::*;
use harmap::census::singularity_census;
use harmap::energy::DiscretizationKind::{self, Nonconforming, Projection};
use harmap::harness::{run_benchmark, solve_level, LevelRow, RunConfig, RunReport};
use harmap::problems::{exact_energy_p2a, volume_integral_energy_p2a, ProblemId};
use harmap::solvers::SolverKind::{self, GradientFlow, TrustRegion};
use harmap::solvers::TrustRegionNorm;

const KINDS: [DiscretizationKind; 2] = [Nonconforming, Projection];

#[derive(Default)]
struct Audit {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Audit {
    fn expect(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn note(&mut self, s: String) {
        self.notes.push(s);
    }

    fn fail(&mut self, s: String) {
        self.failures.push(s);
    }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

/// Every level of a report solved, or the first abort.
fn rows(report: &RunReport) -> Result<&[LevelRow], String> {
    match report.rows.iter().find(|r| r.aborted.is_some()) {
        Some(r) => Err(format!("{} level {} aborted: {}", label(report), r.r, r.aborted.as_deref().unwrap_or(""))),
        None => Ok(&report.rows),
    }
}

fn label(report: &RunReport) -> String {
    let c = &report.config;
    format!("{} {} {} p={}", c.problem, c.discretization, c.solver, c.order)
}

fn run(problem: ProblemId, kind: DiscretizationKind, solver: SolverKind, order: usize, max: u32) -> RunReport {
    let cfg = RunConfig::new(problem, kind, solver).order(order).levels(1, max);
    let start = Instant::now();
    let report = run_benchmark(&cfg).unwrap_or_else(|e| panic!("{problem} {kind} {solver}: {e}"));
    eprintln!("  ran {} r<={max} in {:.1}s", label(&report), start.elapsed().as_secs_f64());
    report
}

fn value(row: &LevelRow, name: &str, v: Option<f64>, audit: &mut Audit) -> f64 {
    v.unwrap_or_else(|| {
        audit.fail(format!("r={} has no {name}", row.r));
        f64::NAN
    })
}

struct Runs {
    tr_p1: Vec<RunReport>,
    tr_p1_quadratic: Vec<RunReport>,
    tr_p2a: Vec<RunReport>,
    tr_p2b: Vec<RunReport>,
    gf: Vec<RunReport>,
}

fn convergence_p1(runs: &Runs, audit: &mut Audit) {
    let energy = [6.38851, 6.38871];
    for (report, e8) in runs.tr_p1.iter().zip(energy) {
        let rows = match rows(report) {
            Ok(r) => r,
            Err(e) => return audit.fail(e),
        };
        for row in rows.iter().filter(|r| r.r >= 6) {
            let l2 = value(row, "EOC L2", row.eoc_l2, audit);
            let h1 = value(row, "EOC H1", row.eoc_h1, audit);
            audit.expect(within(l2, 2.0, 0.05), || format!("{} r={} EOC L2 {l2:.3}", label(report), row.r));
            audit.expect(within(h1, 1.0, 0.02), || format!("{} r={} EOC H1 {h1:.3}", label(report), row.r));
        }
        let e = report.row(8).and_then(|r| r.e).unwrap_or(f64::NAN);
        audit.expect(within(e, e8, 2e-3), || format!("{} E(r=8) {e:.5}, want {e8}", label(report)));
        audit.note(format!("{} E(r=8) {e:.5}", report.config.discretization));
    }
}

fn convergence_p1_quadratic(runs: &Runs, audit: &mut Audit) {
    for report in &runs.tr_p1_quadratic {
        let rows = match rows(report) {
            Ok(r) => r,
            Err(e) => return audit.fail(e),
        };
        for row in rows.iter().filter(|r| r.r == 5 || r.r == 6) {
            let l2 = value(row, "EOC L2", row.eoc_l2, audit);
            let h1 = value(row, "EOC H1", row.eoc_h1, audit);
            audit.expect(within(l2, 3.0, 0.1), || format!("{} r={} EOC L2 {l2:.3}", label(report), row.r));
            audit.expect(within(h1, 2.0, 0.05), || format!("{} r={} EOC H1 {h1:.3}", label(report), row.r));
        }
        let e = report.row(6).and_then(|r| r.e).unwrap_or(f64::NAN);
        audit.expect(within(e, 6.38861, 1e-4), || format!("{} E(r=6) {e:.6}", label(report)));
        audit.note(format!("{} E(r=6) {e:.6}", report.config.discretization));
    }
}

fn hedgehog_3d(runs: &Runs, audit: &mut Audit) {
    let published = [
        [5.30787, 6.27978, 6.93303, 7.29099],
        [7.85756, 7.66993, 7.70757, 7.71713],
    ];
    let exact = exact_energy_p2a();
    for (report, table) in runs.tr_p2a.iter().zip(published) {
        let rows = match rows(report) {
            Ok(r) => r,
            Err(e) => return audit.fail(e),
        };
        let mut last = 0.0;
        for (row, want) in rows.iter().zip(table) {
            let e = value(row, "E", row.e, audit);
            audit.expect(((e - want) / want).abs() <= 1e-2, || {
                format!("{} r={} E {e:.5}, want {want}", label(report), row.r)
            });
            if report.config.discretization == Nonconforming {
                audit.expect(e > last && e < exact, || format!("nc r={} E {e:.5} not increasing below {exact}", row.r));
                last = e;
            }
            if row.r >= 2 {
                let h1 = value(row, "EOC H1", row.eoc_h1, audit);
                audit.expect((0.3..=0.55).contains(&h1), || format!("{} r={} EOC H1 {h1:.3}", label(report), row.r));
            }
        }
        let e4 = report.row(4).and_then(|r| r.e).unwrap_or(f64::NAN);
        audit.note(format!("{} E(r=4) {e4:.5}", report.config.discretization));
    }
}

fn exact_energy(audit: &mut Audit) {
    let e = exact_energy_p2a();
    let oracle = volume_integral_energy_p2a();
    audit.expect(within(e, 7.674124, 5e-6), || format!("closed form {e:.7}"));
    audit.expect(within(e, oracle, 1e-4), || format!("closed form {e:.7} vs volume integral {oracle:.7}"));
    audit.note(format!("{e:.7} vs {oracle:.7}"));
}

fn hedgehog_2d(runs: &Runs, audit: &mut Audit) {
    let energy = [13.12, 13.11];
    for (report, e5) in runs.tr_p2b.iter().zip(energy) {
        let rows = match rows(report) {
            Ok(r) => r,
            Err(e) => return audit.fail(e),
        };
        let mut last = f64::NEG_INFINITY;
        for row in rows.iter().filter(|r| r.r >= 2) {
            let l2 = value(row, "EOC L2", row.eoc_l2, audit);
            audit.expect((0.6..=0.95).contains(&l2), || format!("{} r={} EOC L2 {l2:.3}", label(report), row.r));
            if row.r >= 3 {
                audit.expect(l2 > last, || format!("{} r={} EOC L2 {l2:.3} after {last:.3}", label(report), row.r));
                last = l2;
            }
            if row.r >= 4 {
                let h1 = value(row, "EOC H1", row.eoc_h1, audit);
                audit.expect(h1.abs() <= 0.06, || format!("{} r={} EOC H1 {h1:.3}", label(report), row.r));
            }
        }
        let e = report.row(5).and_then(|r| r.e).unwrap_or(f64::NAN);
        audit.expect(within(e, e5, 0.05), || format!("{} E(r=5) {e:.5}, want {e5}", label(report)));
        audit.note(format!("{} E(r=5) {e:.5}", report.config.discretization));
    }
}

fn constraint_bound(runs: &Runs, audit: &mut Audit) {
    let mut checked = 0;
    for report in &runs.gf {
        let rows = match rows(report) {
            Ok(r) => r,
            Err(e) => {
                audit.fail(e);
                continue;
            }
        };
        for row in rows {
            let max = value(row, "constraint maximum", row.constraint_max, audit);
            let bound = value(row, "constraint bound", row.constraint_bound, audit);
            audit.expect(max <= bound, || format!("{} r={} {max:.3e} > {bound:.3e}", label(report), row.r));
            checked += 1;
        }
        if report.config.problem == ProblemId::P1 {
            for pair in rows.windows(2).filter(|w| w[0].r >= 4) {
                let ratio = pair[0].delta1.unwrap_or(f64::NAN) / pair[1].delta1.unwrap_or(f64::NAN);
                audit.expect((1.5..=2.5).contains(&ratio), || format!("delta1 ratio r={} {ratio:.3}", pair[1].r));
            }
        }
    }
    audit.note(format!("{checked} levels"));
}

fn trust_region_iterations(runs: &Runs, audit: &mut Audit) {
    let mut worst = [0, 0];
    let groups = [(&runs.tr_p1, 5), (&runs.tr_p1_quadratic, 5), (&runs.tr_p2b, 12)];
    for (g, (reports, limit)) in groups.into_iter().enumerate() {
        for report in reports {
            let rows = match rows(report) {
                Ok(r) => r,
                Err(e) => {
                    audit.fail(e);
                    continue;
                }
            };
            for row in rows.iter().filter(|r| r.r >= 2 || limit == 12) {
                let n = row.iters.unwrap_or(usize::MAX);
                audit.expect(n <= limit && row.converged, || {
                    format!("{} r={} {n} iterations, converged {}", label(report), row.r, row.converged)
                });
                let w = &mut worst[(g == 2) as usize];
                *w = (*w).max(n);
            }
        }
    }
    audit.note(format!("max {} (p1), {} (p2b)", worst[0], worst[1]));
}

fn gradient_flow_growth(runs: &Runs, audit: &mut Audit) {
    let published = [1usize, 13, 16, 27, 50, 94, 184, 363];
    let Some(report) = runs.gf.iter().find(|r| r.config.problem == ProblemId::P1) else {
        return audit.fail("no p1 gradient-flow run".into());
    };
    let rows = match rows(report) {
        Ok(r) => r,
        Err(e) => return audit.fail(e),
    };
    let counts: Vec<usize> = rows.iter().map(|r| r.iters.unwrap_or(0)).collect();
    for (r, w) in (5..=7).zip(counts[4..].windows(2)) {
        let ratio = w[1] as f64 / w[0] as f64;
        audit.expect((1.5..=2.5).contains(&ratio), || format!("iterations({})/iterations({r}) {ratio:.3}", r + 1));
    }
    audit.expect(counts.len() == published.len(), || format!("{} levels", counts.len()));
    for ((r, &n), &want) in (1..).zip(&counts).zip(&published) {
        let dev = (n as f64 - want as f64).abs() / want as f64;
        audit.expect(dev <= 0.25, || format!("r={r} {n} iterations, want {want}"));
    }
    audit.note(format!("{counts:?}"));
}

fn singularities(audit: &mut Audit) {
    let mut found_all = Vec::new();
    for kappa in 2..=5 {
        let problem = ProblemId::P3(kappa);
        let cfg = match RunConfig::new(problem, Nonconforming, TrustRegion).levels(3, 3).resolve() {
            Ok(c) => c,
            Err(e) => return audit.fail(format!("{problem}: {e}")),
        };
        let field = match solve_level(&cfg, 3) {
            Ok((_, trace)) => trace.field,
            Err(e) => return audit.fail(format!("{problem}: {e}")),
        };
        let found = match singularity_census(&field) {
            Ok(f) => f,
            Err(e) => return audit.fail(format!("{problem} census: {e}")),
        };
        let degrees: Vec<i32> = found.iter().map(|s| s.degree).collect();
        audit.expect(degrees.len() == kappa as usize && degrees.iter().all(|&d| d == 1), || {
            format!("{problem}: degrees {degrees:?}")
        });
        found_all.push(degrees.len());
    }
    audit.note(format!("nc counts {found_all:?}"));
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn property_suites(runs: &Runs, audit: &mut Audit) {
    let mut record = |name: &str, result: Result<(), String>| {
        if let Err(e) = result {
            audit.fail(format!("{name}: {e}"));
        }
    };
    let derivatives = (small_shape(), kind(), perturbations(), 0.0..0.4f64);
    record(
        "euclidean derivatives",
        runner(24)
            .run(&derivatives, |(s, k, p, a)| check_euclidean_derivatives(s, k, &p, a))
            .map_err(|e| e.to_string()),
    );
    record(
        "riemannian derivatives",
        runner(24)
            .run(&derivatives, |(s, k, p, a)| check_riemannian_derivatives(s, k, &p, a))
            .map_err(|e| e.to_string()),
    );
    record(
        "sphere exp",
        runner(256)
            .run(&(2..=3usize, vec3(1.0), vec3(1.0), 0.0..50.0f64), |(m, x, v, t)| check_sphere_exp(m, x, v, t))
            .map_err(|e| e.to_string()),
    );
    let monomials = (
        1..=3usize,
        0..=6usize,
        prop::array::uniform3(0..=6usize),
        prop::option::of((0..4usize, 1..6usize)),
    );
    record(
        "quadrature",
        runner(256)
            .run(&monomials, |(d, q, e, g)| check_quadrature(d, q, e, g))
            .map_err(|e| e.to_string()),
    );
    let tr = (small_shape(), kind(), any::<bool>(), perturbations(), 0.0..0.8f64);
    record(
        "trust region",
        runner(24)
            .run(&tr, |(s, k, euclidean, p, a)| {
                let norm = if euclidean { TrustRegionNorm::Euclidean } else { TrustRegionNorm::Max };
                check_trust_region(s, k, norm, &p, a)
            })
            .map_err(|e| e.to_string()),
    );
    let gf = (small_shape(), perturbations(), 0.0..0.8f64, 0.01..1.0f64);
    record(
        "gradient flow",
        runner(24)
            .run(&gf, |(s, p, a, tau)| {
                let s = Shape { order: 1, ..s };
                check_gradient_flow(s, &p, a, tau)
            })
            .map_err(|e| e.to_string()),
    );
    let all = runs.tr_p1.iter().chain(&runs.tr_p1_quadratic).chain(&runs.tr_p2a).chain(&runs.tr_p2b).chain(&runs.gf);
    for report in all {
        for row in report.rows.iter().filter(|r| r.energy_monotone == Some(false)) {
            audit.fail(format!("{} r={} energy increased", label(report), row.r));
        }
    }
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let start = Instant::now();
    eprintln!("acceptance: solving benchmark sweeps");
    let runs = Runs {
        tr_p1: KINDS.iter().map(|&k| run(ProblemId::P1, k, TrustRegion, 1, 8)).collect(),
        tr_p1_quadratic: KINDS.iter().map(|&k| run(ProblemId::P1, k, TrustRegion, 2, 8)).collect(),
        tr_p2a: KINDS.iter().map(|&k| run(ProblemId::P2a, k, TrustRegion, 1, 4)).collect(),
        tr_p2b: KINDS.iter().map(|&k| run(ProblemId::P2b, k, TrustRegion, 1, 8)).collect(),
        gf: [
            (ProblemId::P1, 8),
            (ProblemId::P2a, 4),
            (ProblemId::P2b, 8),
            (ProblemId::P3(2), 3),
            (ProblemId::P3(3), 3),
            (ProblemId::P3(4), 3),
            (ProblemId::P3(5), 3),
            (ProblemId::P2aRandom, 4),
        ]
        .into_iter()
        .map(|(p, max)| run(p, Nonconforming, GradientFlow, 1, max))
        .collect(),
    };

    type Check = fn(&Runs, &mut Audit);
    let criteria: [(&str, Check); 10] = [
        ("1  p1 p=1 EOC and energy, r<=8", convergence_p1),
        ("2  p1 p=2 EOC and energy, r<=6", convergence_p1_quadratic),
        ("3  p2a energies and EOC H1, r<=4", hedgehog_3d),
        ("4  p2a exact energy", |_, a| exact_energy(a)),
        ("5  p2b EOC and energy, r<=8", hedgehog_2d),
        ("6  gradient-flow constraint bound, delta1 halving", constraint_bound),
        ("7  trust-region iteration counts", trust_region_iterations),
        ("8  gradient-flow iteration growth", gradient_flow_growth),
        ("9  p3 singularity census, r=3", |_, a| singularities(a)),
        ("10 property suites", property_suites),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let mut audit = Audit::default();
        check(&runs, &mut audit);
        let status = if audit.failures.is_empty() { "PASS" } else { "FAIL" };
        println!("{status} {name}  [{}]", audit.notes.join("; "));
        for f in &audit.failures {
            println!("     {f}");
        }
        failed += !audit.failures.is_empty() as usize;
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.0}s",
        criteria.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
