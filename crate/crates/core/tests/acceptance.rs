//! Acceptance suite. Runs every criterion at full size and prints one
//! PASS/FAIL line per criterion; exits nonzero if any fails.

use std::process::Command;
use std::time::{Duration, Instant};

use bimeixner::nef_family::meixner_table;
use bimeixner::process_sim::{path_rng, simulate_y, simulate_z, StitchConfig, TimeGrid};
use bimeixner::qh_verify::regression::mean_and_se;
use bimeixner::qh_verify::{
    covariance_check, harness_regression, identity_amazing, identity_minivv, qh_params_closed_form,
    qh_params_from_theorem, qvar_regression, MomentCheckReport,
};
use bimeixner::quadrature::{abs_gamma_sq, integrate_with, QuadratureOptions};
use bimeixner::transition_kernel::{
    forward_goodness_of_fit, reversed_goodness_of_fit, reversed_transition_density, KernelContext,
};
use bimeixner::{FamilyKind, FamilySpec, RandomizationLaw};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 1_000_000;
const SEED: u64 = 20_240_601;

/// Collected failures of one criterion.
#[derive(Default)]
struct Tally {
    checks: usize,
    failures: Vec<String>,
}

impl Tally {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    fn moment(&mut self, label: &str, m: &MomentCheckReport) {
        self.check(m.pass, || {
            format!(
                "{label}: estimate {} theory {} z {:.2}",
                m.estimate, m.theory, m.z_score
            )
        });
    }
}

struct Outcome {
    id: usize,
    title: &'static str,
    tally: Tally,
    elapsed: Duration,
    budget: Duration,
}

impl Outcome {
    fn pass(&self) -> bool {
        self.tally.failures.is_empty() && self.elapsed <= self.budget
    }

    fn print(&self) {
        println!(
            "criterion {:>2} {} {} ({} checks, {:.1} s of {} s)",
            self.id,
            if self.pass() { "PASS" } else { "FAIL" },
            self.title,
            self.tally.checks,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs(),
        );
        for f in &self.tally.failures {
            println!("    {f}");
        }
        if self.elapsed > self.budget {
            println!("    over the runtime budget");
        }
    }
}

fn run(id: usize, title: &'static str, budget_s: u64, f: impl FnOnce(&mut Tally)) -> Outcome {
    let start = Instant::now();
    let mut tally = Tally::default();
    let caught = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| f(&mut tally)));
    if let Err(e) = caught {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        tally.failures.push(format!("panicked: {msg}"));
    }
    let out = Outcome {
        id,
        title,
        tally,
        elapsed: start.elapsed(),
        budget: Duration::from_secs(budget_s),
    };
    out.print();
    out
}

fn nb() -> FamilySpec {
    FamilySpec::negative_binomial(0.5).unwrap()
}

/// One stitching configuration per family with enough moments for the
/// variance regression.
fn stitch_configs() -> Vec<(FamilySpec, f64, f64)> {
    vec![
        (FamilySpec::wiener(), 0.5, 1.5),
        (FamilySpec::poisson(), 3.0, 2.0),
        (FamilySpec::gamma(), 3.0, 10.0),
        (nb(), 2.0, 10.0),
        (FamilySpec::hyperbolic_secant(), 1.0, 5.0),
    ]
}

fn theta_grid(family: &FamilySpec) -> Vec<f64> {
    let (lo, hi) = match family.kind() {
        FamilyKind::Wiener | FamilyKind::Poisson => (-5.0, 3.0),
        FamilyKind::Gamma => (-5.0, 0.9),
        FamilyKind::NegativeBinomial => (-5.0, -family.q().unwrap().ln() - 0.1),
        FamilyKind::HyperbolicSecant => (-3.0, 3.0),
    };
    (0..50).map(|i| lo + (hi - lo) * i as f64 / 49.0).collect()
}

fn criterion_1(t: &mut Tally) {
    let families = [
        FamilySpec::wiener(),
        FamilySpec::poisson(),
        FamilySpec::gamma(),
        nb(),
        FamilySpec::negative_binomial(0.9).unwrap(),
        FamilySpec::hyperbolic_secant(),
    ];
    for f in families {
        let worst = theta_grid(&f)
            .into_iter()
            .map(|th| {
                let c = f.cumulants(th).unwrap();
                (c.kappa_double_prime - f.variance_function(c.kappa_prime)).abs()
            })
            .fold(0.0, f64::max);
        t.check(worst <= 1e-10, || format!("{f}: max |kappa'' - V(kappa')| = {worst:e}"));
    }
}

fn admissible_sample(kind: FamilyKind, rng: &mut ChaCha8Rng) -> (f64, f64) {
    match kind {
        FamilyKind::Wiener => (rng.random_range(-5.0..5.0), rng.random_range(0.05..20.0)),
        FamilyKind::Poisson => (rng.random_range(0.05..20.0), rng.random_range(0.05..20.0)),
        FamilyKind::Gamma | FamilyKind::NegativeBinomial => {
            (rng.random_range(0.05..20.0), rng.random_range(1.01..20.0))
        }
        FamilyKind::HyperbolicSecant => (rng.random_range(-5.0..5.0), rng.random_range(0.51..20.0)),
    }
}

fn criterion_2(t: &mut Tally) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let rel = |a: f64, b: f64| if b == 0.0 { a.abs() } else { ((a - b) / b).abs() };
    for f in stitch_configs().into_iter().map(|c| c.0) {
        for _ in 0..20 {
            let (p, r) = admissible_sample(f.kind(), &mut rng);
            let a = qh_params_from_theorem(&f, p, r).unwrap();
            let b = qh_params_closed_form(&f, p, r).unwrap();
            t.check(rel(a.alpha, b.alpha) <= 1e-12 && rel(a.sigma, b.sigma) <= 1e-12, || {
                format!("{f} p={p} r={r}: theorem {a:?} closed form {b:?}")
            });
            t.check(a.gamma == 1.0 + 2.0 * (a.sigma * a.tau).sqrt(), || {
                format!("{f}: gamma relation")
            });
            t.check(a.alpha * a.tau.sqrt() == a.beta * a.sigma.sqrt(), || {
                format!("{f}: alpha/beta relation")
            });
        }
    }
}

fn criterion_3(t: &mut Tally) {
    let points: Vec<(FamilySpec, [(f64, f64); 3])> = vec![
        (FamilySpec::wiener(), [(0.5, 1.5), (-2.0, 0.5), (3.0, 4.0)]),
        (FamilySpec::poisson(), [(3.0, 2.0), (0.5, 1.0), (10.0, 4.0)]),
        (FamilySpec::gamma(), [(3.0, 10.0), (1.0, 6.0), (5.0, 20.0)]),
        (nb(), [(2.0, 10.0), (1.0, 6.0), (0.5, 8.0)]),
        (FamilySpec::hyperbolic_secant(), [(1.0, 5.0), (0.0, 2.0), (-2.0, 3.0)]),
    ];
    for (f, pts) in points {
        let (lo, hi) = f.theta_domain();
        for (p, r) in pts {
            let law = RandomizationLaw::new(f, p, r).unwrap();
            let exact = law.kprime_moments();
            let mut inside = true;
            let km: Vec<f64> = (0..N)
                .map(|i| {
                    let th = law.sample_theta(&mut path_rng(SEED, i as u64));
                    inside &= lo < th && th < hi;
                    f.kappa_prime(th).unwrap()
                })
                .collect();
            t.check(inside, || format!("{f} p={p} r={r}: a draw left the domain"));
            let (mean, se) = mean_and_se(N, |i| km[i]);
            t.moment(
                &format!("{f} p={p} r={r} mean"),
                &MomentCheckReport::new(mean, p / r, se, N),
            );
            let (var, se) = mean_and_se(N, |i| (km[i] - mean).powi(2));
            t.moment(
                &format!("{f} p={p} r={r} variance"),
                &MomentCheckReport::new(var, exact.variance, se, N),
            );
            let q = law.kprime_moments_by_quadrature().unwrap();
            let (em, ev) = (
                ((q.mean - exact.mean) / exact.mean).abs(),
                ((q.variance - exact.variance) / exact.variance).abs(),
            );
            let em = if exact.mean == 0.0 { q.mean.abs() } else { em };
            t.check(em <= 1e-8 && ev <= 1e-8, || {
                format!("{f} p={p} r={r}: quadrature errors {em:e}, {ev:e}")
            });
        }
    }
}

const GRID: [f64; 9] = [0.25, 0.3, 0.5, 0.7, 0.75, 1.0, 1.5, 2.0, 3.0];
const PAIRS: [(f64, f64); 4] = [(0.3, 0.7), (0.5, 2.0), (1.0, 1.0), (1.5, 3.0)];
/// Inside (0,1), inside (1,inf), t = 1, straddling with t != 1.
const HARNESS_TRIPLES: [(f64, f64, f64); 4] = [(0.25, 0.5, 0.75), (1.5, 2.0, 3.0), (0.5, 1.0, 2.0), (0.3, 0.7, 2.0)];
/// Below 1, t = 1, straddling.
const QVAR_TRIPLES: [(f64, f64, f64); 3] = [(0.25, 0.5, 0.75), (0.5, 1.0, 2.0), (0.3, 0.7, 1.5)];

/// Criteria 4 to 6 share one batch per family.
fn criteria_4_to_6() -> Vec<Outcome> {
    let titles = [
        "covariance of the stitched process is min(s, u)",
        "harness regression on four triple configurations",
        "quadratic conditional-variance regression in three regimes",
    ];
    let mut tallies: [Tally; 3] = Default::default();
    let mut worst = [Duration::ZERO; 3];
    let grid = TimeGrid::new(GRID.to_vec()).unwrap();
    for (f, p, r) in stitch_configs() {
        let start = Instant::now();
        let cfg = StitchConfig::new(f, p, r).unwrap();
        let batch = simulate_z(&cfg, &grid, N, SEED).unwrap();
        let sim = start.elapsed();
        let params = qh_params_from_theorem(&f, p, r).unwrap();

        let mut step = |k: usize, body: &mut dyn FnMut(&mut Tally)| {
            let s = Instant::now();
            let res = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| body(&mut tallies[k])));
            if res.is_err() {
                tallies[k].failures.push(format!("{f}: panicked"));
            }
            let spent = sim + s.elapsed();
            worst[k] = worst[k].max(spent);
        };
        step(0, &mut |t| {
            for (m, (s, u)) in covariance_check(&batch, &PAIRS).unwrap().iter().zip(PAIRS) {
                t.moment(&format!("{f} cov({s},{u})"), m);
            }
        });
        step(1, &mut |t| {
            for (s, tt, u) in HARNESS_TRIPLES {
                let rep = harness_regression(&batch, s, tt, u).unwrap();
                t.check(rep.pass, || format!("{f} ({s},{tt},{u}): z {:.2?}", rep.z_scores));
            }
        });
        step(2, &mut |t| {
            for (s, tt, u) in QVAR_TRIPLES {
                let rep = qvar_regression(&batch, s, tt, u, &params).unwrap();
                t.check(rep.pass && rep.dropped.is_empty(), || {
                    format!("{f} ({s},{tt},{u}): z {:.2?} dropped {:?}", rep.z_scores, rep.dropped)
                });
            }
        });
    }
    // budgets are per family: 5, 5 and 10 minutes
    let budgets = [300, 300, 600];
    tallies
        .into_iter()
        .enumerate()
        .map(|(k, tally)| {
            let out = Outcome {
                id: 4 + k,
                title: titles[k],
                tally,
                elapsed: worst[k],
                budget: Duration::from_secs(budgets[k]),
            };
            out.print();
            out
        })
        .collect()
}

fn criterion_7(t: &mut Tally) {
    for (f, p, r) in stitch_configs() {
        let rep = identity_amazing(&f, p, r, 1.0, N, SEED).unwrap();
        t.moment(&format!("{f} amazing (Monte Carlo)"), &rep.monte_carlo);
        t.check(rep.exact.pass, || {
            format!("{f} amazing (quadrature): relative error {:e}", rep.exact.error)
        });
    }
    for (f, theta) in [
        (FamilySpec::poisson(), 0.4),
        (nb(), -0.3),
        (FamilySpec::negative_binomial(0.8).unwrap(), -1.0),
    ] {
        for (tt, u) in [(1.0, 2.0), (0.3, 1.7)] {
            let rep = identity_minivv(&f, theta, tt, u, 0, SEED).unwrap();
            let e = rep.exact.unwrap();
            t.check(e.error <= 1e-10, || {
                format!("{f} minivv t={tt} u={u}: error {:e}", e.error)
            });
        }
    }
    for (f, theta) in [
        (FamilySpec::wiener(), 0.5),
        (FamilySpec::gamma(), -0.5),
        (FamilySpec::hyperbolic_secant(), 0.7),
    ] {
        let rep = identity_minivv(&f, theta, 0.6, 1.5, N, SEED).unwrap();
        for (b, m) in rep.bins.iter().enumerate() {
            t.moment(&format!("{f} minivv bin {b}"), m);
        }
    }
}

fn criterion_8(t: &mut Tally) {
    let alpha = 0.001;
    for (f, p, r, s, tt) in [
        (FamilySpec::poisson(), 2.0, 1.0, 1.0, 2.0),
        (FamilySpec::wiener(), 0.5, 1.5, 0.5, 1.5),
    ] {
        let law = RandomizationLaw::new(f, p, r).unwrap();
        let batch = simulate_y(&law, &TimeGrid::new(vec![s, tt]).unwrap(), 100_000, SEED).unwrap();
        let ctx = KernelContext::new(law, 1e-10).unwrap();
        let fwd = forward_goodness_of_fit(&ctx, &batch, s, tt, alpha).unwrap();
        t.check(fwd.pass, || {
            format!("{f} forward: chi2 {} dof {} p {}", fwd.statistic, fwd.dof, fwd.p_value)
        });
        let rev = reversed_goodness_of_fit(&f, &batch, s, tt, alpha).unwrap();
        t.check(rev.pass, || {
            format!("{f} reversed: chi2 {} dof {} p {}", rev.statistic, rev.dof, rev.p_value)
        });
    }
    // Bayes reversal of the (p, r)-dependent forward kernel equals the
    // untilted bridge for every (p, r)
    // family, (p, r) choices, s, t, y, x values
    type Case = (FamilySpec, [(f64, f64); 2], f64, f64, f64, Vec<f64>);
    let cases: [Case; 2] = [
        (
            FamilySpec::poisson(),
            [(1.0, 2.0), (3.0, 5.0)],
            1.0,
            2.0,
            4.0,
            (0..=4).map(f64::from).collect(),
        ),
        (
            FamilySpec::wiener(),
            [(1.0, 2.0), (-3.0, 5.0)],
            0.5,
            1.5,
            0.8,
            vec![-1.0, 0.0, 0.3, 1.2],
        ),
    ];
    for (f, prs, s, tt, y, xs) in cases {
        for &x in &xs {
            let bridge = reversed_transition_density(&f, tt, y, s, x).unwrap().value;
            for (p, r) in prs {
                let ctx = KernelContext::new(RandomizationLaw::new(f, p, r).unwrap(), 1e-10).unwrap();
                let bayes = ctx.forward_transition_density(0.0, 0.0, s, x).unwrap()
                    * ctx.forward_transition_density(s, x, tt, y).unwrap()
                    / ctx.forward_transition_density(0.0, 0.0, tt, y).unwrap();
                let err = ((bayes - bridge) / bridge).abs();
                t.check(err <= 1e-12, || {
                    format!("{f} p={p} r={r} x={x}: bayes {bayes} bridge {bridge}")
                });
            }
        }
    }
    let b = reversed_transition_density(&FamilySpec::poisson(), 2.0, 4.0, 1.0, 2.0)
        .unwrap()
        .value;
    t.check((b - 0.375).abs() < 1e-14, || format!("binomial thinning: {b}"));
}

fn criterion_9(t: &mut Tally) {
    let f = FamilySpec::hyperbolic_secant();
    for tt in [0.3, 1.0, 2.5] {
        for theta in [0.0, 2.0, -2.0] {
            let c = f.cumulants(theta).unwrap();
            let opts = QuadratureOptions {
                rel_tol: 1e-12,
                abs_tol: 1e-15,
                points: vec![tt * c.kappa_prime],
                scale: (tt * c.kappa_double_prime).sqrt(),
                ..Default::default()
            };
            let mass = integrate_with(
                |x| f.increment_density(theta, tt, x).unwrap(),
                f64::NEG_INFINITY,
                f64::INFINITY,
                &opts,
            )
            .unwrap()
            .value;
            t.check((mass - 1.0).abs() <= 1e-8, || {
                format!("t={tt} theta={theta}: mass {mass}")
            });
        }
    }
    for i in 0..=40 {
        let x = -10.0 + 0.5 * i as f64;
        let px = std::f64::consts::PI * x;
        let exact = if x == 0.0 { 1.0 } else { px / px.sinh() };
        let got = abs_gamma_sq(1.0, x).unwrap();
        t.check(((got - exact) / exact).abs() <= 1e-10, || {
            format!("|Gamma(1+{x}i)|^2 = {got}, expected {exact}")
        });
    }
    // the inverse-CDF table behind the sampler agrees with the density
    let table = meixner_table(1.0, 0.0).unwrap();
    t.check((table.cdf(0.0) - 0.5).abs() < 1e-9, || "table median".into());
}

fn criterion_10(t: &mut Tally) {
    let run = |threads: &str, family: &[&str]| {
        let mut args = vec!["verify-all"];
        args.extend_from_slice(family);
        args.extend_from_slice(&["--paths", "20000", "--seed", "7", "--threads", threads]);
        Command::new(env!("CARGO_BIN_EXE_bimeixner"))
            .args(&args)
            .output()
            .unwrap()
    };
    for family in [
        &["--family", "hyperbolic-secant", "--p", "1", "--r", "5"][..],
        &["--family", "negative-binomial", "--q", "0.5", "--p", "2", "--r", "10"][..],
    ] {
        let (a, b) = (run("1", family), run("8", family));
        t.check(a.status.code() == b.status.code(), || {
            format!("{family:?}: exit codes differ")
        });
        t.check(!a.stdout.is_empty() && a.stdout == b.stdout, || {
            format!("{family:?}: reports differ between 1 and 8 threads")
        });
    }
}

fn main() {
    let mut outcomes = vec![
        run(1, "variance function identity on 50-point theta grids", 1, criterion_1),
        run(
            2,
            "harness parameters: theorem formula against closed forms",
            1,
            criterion_2,
        ),
        run(3, "randomization moments, sampled and by quadrature", 120, criterion_3),
    ];
    outcomes.extend(criteria_4_to_6());
    outcomes.push(run(7, "moment identities", 180, criterion_7));
    outcomes.push(run(8, "forward and reversed transition kernels", 180, criterion_8));
    outcomes.push(run(9, "Meixner density normalization and |Gamma|^2", 30, criterion_9));
    outcomes.push(run(10, "reports identical across thread counts", 600, criterion_10));
    let failed: Vec<usize> = outcomes.iter().filter(|o| !o.pass()).map(|o| o.id).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", outcomes.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
