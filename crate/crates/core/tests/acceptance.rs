//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.

mod common;

use std::io::Write;
use std::time::{Duration, Instant};

use assistgame_core::game::{
    acquisition_expectation, decide, expected_payoffs_probit, expected_payoffs_semiorder, expected_payoffs_with_cost,
    mc_expected_payoffs, select_act, semiorder_branches, AcquisitionKind, Action, CostConfig, DefValue, McSettings,
};
use assistgame_core::gauss::{
    cdf_pdf_integral, expected_abs, expected_winner_utility, pdf_pdf_integral, prob_noisy_dominance, std_cdf, std_pdf,
    truncated_mean, x_cdf_pdf_integral,
};
use assistgame_core::harness::{run_example3, run_fig9, run_honest, ExperimentConfig};
use assistgame_core::rng::{seeded, SimRng};
use assistgame_core::shutdown::{
    check_desiderata, layered_value, lex_compare, lex_value, multi_task_failure, skewed_dataset_demo, LayeredUtility,
    ShutdownAct, ShutdownContext, ShutdownUtility, SkewedDemoConfig,
};
use assistgame_core::world::{
    check_path_independence, choose_pareto, choose_scalar, choose_union_argmax, sample_utility, scalarized_prefer,
    ActGrid, GroundTruthUtility, KernelConfig,
};
use assistgame_core::{BivariateBelief, Method};
use rand::seq::index;
use rand::Rng;

use common::{argmax, cdf, dirac, gauss_expect, integrate, phi, random_belief, TAIL};

type Criterion = (&'static str, Option<Duration>, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Verdict) -> Verdict {
    let start = Instant::now();
    let mut v = f();
    let elapsed = start.elapsed();
    v.detail = format!("{} [{:.1}s]", v.detail, elapsed.as_secs_f64());
    if let Some(limit) = limit {
        if elapsed > limit {
            v.pass = false;
            v.detail += &format!(" over the {}s budget", limit.as_secs());
        }
    }
    v
}

fn oracle_agreement() -> Verdict {
    const N: usize = 1_000_000;
    let mut rng = seeded(101);
    let mut worst = (0.0f64, String::new());
    let mut failures = 0;
    let mut checks = 0;
    for i in 0..50u64 {
        let b = random_belief(&mut rng);
        let sigma = rng.random_range(0.1..2.0);
        let band = rng.random_range(0.1..1.5);
        let eps = band * rng.random_range(0.05..1.0);
        let mc = mc_expected_payoffs(&b, &McSettings::new(sigma, N, 5000 + i).with_semiorder(band, eps)).unwrap();
        let p = expected_payoffs_probit(&b, sigma);
        let semi = expected_payoffs_semiorder(&b, band, eps).unwrap();
        let br = semiorder_branches(&b, band);
        let (lo, hi) = match semi.def_value {
            DefValue::Interval { lo, hi } => (lo, hi),
            DefValue::Scalar(_) => unreachable!(),
        };
        let (vx, vo) = (br.via_x(eps), br.via_o(eps));
        assert_eq!((lo, hi), (vx.min(vo), vx.max(vo)));
        let rows = [
            ("def", p.def_scalar().unwrap(), mc.def),
            ("imm", p.imm_value, mc.imm),
            ("don", p.don_value, mc.don),
            ("semiorder_x", vx, mc.semiorder_x.unwrap()),
            ("semiorder_o", vo, mc.semiorder_o.unwrap()),
            ("dominance", prob_noisy_dominance(&b, sigma), mc.dominance),
            ("winner_utility", expected_winner_utility(&b, sigma), mc.winner_utility),
            ("natural", acquisition_expectation(&b, sigma, AcquisitionKind::Natural), mc.natural),
            ("corporate", acquisition_expectation(&b, sigma, AcquisitionKind::Corporate), mc.dominance),
            ("collaborative", acquisition_expectation(&b, sigma, AcquisitionKind::Collaborative), mc.def),
        ];
        for (name, closed, est) in rows {
            checks += 1;
            let z = est.z_score(closed);
            if z > 3.0 {
                failures += 1;
            }
            if z > worst.0 {
                worst = (z, format!("{name}@{i}"));
            }
        }
    }
    Verdict::new(failures == 0, format!("{checks} checks, {failures} beyond 3 SE, max z {:.2} ({})", worst.0, worst.1))
}

fn gaussian_integrals() -> Verdict {
    const TOL: f64 = 1e-7;
    let mut rng = seeded(202);
    let mut worst = (0.0f64, String::new());
    let mut check = |name: &str, args: [f64; 4], got: f64, want: f64| {
        let err = (got - want).abs() / want.abs().max(1.0);
        if err > worst.0 {
            worst = (err, format!("{name} at {args:?}"));
        }
    };
    for _ in 0..10_000 {
        let a: f64 = rng.random_range(-6.0..6.0);
        let b: f64 = rng.random_range(-6.0..6.0);
        let peak = if b != 0.0 { vec![-a / b] } else { vec![] };
        let ab = [a, b, 0.0, 0.0];
        check("pdf_pdf", ab, pdf_pdf_integral(a, b), gauss_expect(|x| phi(a + b * x), &peak));
        check("cdf_pdf", ab, cdf_pdf_integral(a, b), gauss_expect(|x| cdf(a + b * x), &peak));
        check("x_cdf_pdf", ab, x_cdf_pdf_integral(a, b), gauss_expect(|x| x * cdf(a + b * x), &peak));

        let m: f64 = rng.random_range(-5.0..5.0);
        let s: f64 = rng.random_range(0.05..5.0);
        let bound = |rng: &mut SimRng, inf: f64| {
            if rng.random_bool(0.1) {
                inf
            } else {
                m + s * rng.random_range(-6.0..6.0)
            }
        };
        let (mut lo, mut hi) = (bound(&mut rng, f64::NEG_INFINITY), bound(&mut rng, f64::INFINITY));
        if lo > hi {
            std::mem::swap(&mut lo, &mut hi);
        }
        let density = |x: f64| phi((x - m) / s) / s;
        let (qlo, qhi) = (lo.max(m - TAIL * s), hi.min(m + TAIL * s));
        let want = if qlo < qhi { integrate(|x| x * density(x), qlo, qhi, &[m]) } else { 0.0 };
        check("truncated_mean", [m, s, lo, hi], truncated_mean(m, s, lo, hi).unwrap(), want);
        let want = integrate(|x| x.abs() * density(x), m - TAIL * s, m + TAIL * s, &[0.0, m]);
        check("expected_abs", [m, s, 0.0, 0.0], expected_abs(m, s).unwrap(), want);
    }
    Verdict::new(worst.0 <= TOL, format!("5 x 1e4 arguments, worst error {:.1e} ({})", worst.0, worst.1))
}

fn point(rng: &mut impl Rng, distinct: bool) -> BivariateBelief {
    loop {
        let b = BivariateBelief::point(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        if !distinct || b.mu_x != b.mu_o {
            return b;
        }
    }
}

fn decision_regimes() -> Verdict {
    let mut rng = seeded(303);
    let mut worst_gap = 0.0f64;
    let mut bounded_def = 0;
    let mut rational_not_def = 0;
    for _ in 0..100 {
        let b = point(&mut rng, false);
        let p = expected_payoffs_probit(&b, 0.0);
        worst_gap = worst_gap.max((p.def_scalar().unwrap() - b.mu_x.max(b.mu_o)).abs());

        let b = point(&mut rng, true);
        let sigma = rng.random_range(0.05..3.0);
        bounded_def += usize::from(decide(&expected_payoffs_probit(&b, sigma)).unwrap().action == Action::Def);

        let b = random_belief(&mut rng);
        rational_not_def += usize::from(decide(&expected_payoffs_probit(&b, 0.0)).unwrap().action != Action::Def);
    }
    Verdict::new(
        worst_gap <= 1e-9 && bounded_def == 0 && rational_not_def == 0,
        format!(
            "rational/certain max gap {worst_gap:.1e}; bounded/certain DEF {bounded_def}/100; rational/uncertain non-DEF {rational_not_def}/100"
        ),
    )
}

/// Deferral condition under messaging cost, evaluated from its parts.
fn cost_condition(b: &BivariateBelief, gamma: f64) -> bool {
    let q = (b.k_xx + b.k_oo - 2.0 * b.k_xo).sqrt();
    let d = b.mu_x - b.mu_o;
    let p = std_cdf(d / q);
    let e = (b.k_xx - b.k_xo) / q * std_pdf(-d / q) + (b.k_oo - b.k_xo) / q * std_pdf(d / q);
    let so = b.k_oo.sqrt();
    let beta = gamma * b.mu_o * (1.0 - 2.0 * std_cdf(-b.mu_o / so)) + 2.0 * gamma * so * std_pdf(-b.mu_o / so);
    p * b.mu_x + (1.0 - p) * b.mu_o + e >= beta + b.mu_x.max(b.mu_o)
}

fn messaging_cost() -> Verdict {
    let mut rng = seeded(404);
    let mut certain_def = 0;
    let mut mismatches = 0;
    let mut deferrals = 0;
    for gamma in [0.01, 0.1, 1.0] {
        let cost = CostConfig::new(gamma, 1).unwrap();
        for _ in 0..100 {
            let b = point(&mut rng, true);
            let sigma = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.05..3.0) };
            certain_def +=
                usize::from(decide(&expected_payoffs_with_cost(&b, sigma, &cost)).unwrap().action == Action::Def);

            let b = random_belief(&mut rng);
            let got = decide(&expected_payoffs_with_cost(&b, 0.0, &cost)).unwrap().action;
            let want = if cost_condition(&b, gamma) {
                Action::Def
            } else if b.mu_o >= b.mu_x {
                Action::DoN
            } else {
                Action::Imm
            };
            deferrals += usize::from(want == Action::Def);
            mismatches += usize::from(got != want);
        }
    }
    Verdict::new(
        certain_def == 0 && mismatches == 0,
        format!("certain DEF {certain_def}/300; uncertain mismatches {mismatches}/300 ({deferrals} deferrals)"),
    )
}

fn fig9() -> Verdict {
    let cfg = ExperimentConfig::default();
    let r = run_fig9(&cfg).unwrap();
    let rate = |m| r.method(m).unwrap().pct(Action::Def);
    let (map, laplace, ep) = (rate(Method::Map), rate(Method::Laplace), rate(Method::Ep));
    let failures: usize = r.summary.iter().map(|(_, s)| s.failures).sum();
    let start = Instant::now();
    run_fig9(&cfg.clone().quick()).unwrap();
    let quick = start.elapsed();
    Verdict::new(
        map == 0.0 && laplace > 5.0 && ep > 5.0 && (laplace - ep).abs() <= 15.0 && quick <= Duration::from_secs(60),
        format!(
            "n_sims {} DEF%: MAP {map:.1}, Laplace {laplace:.1}, EP {ep:.1}; fit failures {failures}; quick run {:.1}s",
            cfg.n_sims,
            quick.as_secs_f64()
        ),
    )
}

fn selection() -> Verdict {
    let grid = ActGrid::linspace(1.0, 9.0, 60).unwrap();
    let kernel = KernelConfig::new(1.0, 1.0).unwrap();
    let mut rng = seeded(606);
    let mut misses = 0;
    let mut checks = 0;
    for seed in 0..20 {
        let nu = sample_utility(&kernel, &grid, 1, seed).unwrap();
        let values = nu.row(0);
        let best = argmax(values);
        let post = dirac(values);
        let o = loop {
            let o = rng.random_range(0..values.len());
            if o != best {
                break o;
            }
        };
        let cases = [
            (0.0, AcquisitionKind::Natural),
            (0.0, AcquisitionKind::Collaborative),
            (1.0, AcquisitionKind::Natural),
            (1.0, AcquisitionKind::Corporate),
            (1.0, AcquisitionKind::Collaborative),
        ];
        for (sigma, kind) in cases {
            checks += 1;
            misses += usize::from(select_act(&post, o, sigma, kind).unwrap() != best);
        }
    }
    Verdict::new(misses == 0, format!("{checks} selections, {misses} off the true argmax"))
}

fn scalarization() -> Verdict {
    const DRAWS: usize = 100_000;
    let (t, s): (f64, f64) = (0.5, 400.0);
    let tau = (t * (1.0 - t) / s).sqrt();
    let mut rng = seeded(707);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        // ν(z) − ν(y) = (a, −b): a trade-off whose predicted z-score is r
        let r: f64 = rng.random_range(-2.5..2.5);
        let a: f64 = rng.random_range(0.2..2.0);
        let b = a * (0.5 - r * tau) / (0.5 + r * tau);
        let (nu1, nu2) = ([a, 0.0], [-b, 0.0]);
        let p = cdf((t * a - (1.0 - t) * b) / (tau * (a + b)));
        let wins = (0..DRAWS).filter(|_| scalarized_prefer(0, 1, &nu1, &nu2, t, s, &mut rng).unwrap() == 0).count();
        let se = (p * (1.0 - p) / DRAWS as f64).sqrt();
        worst = worst.max((wins as f64 / DRAWS as f64 - p).abs() / se);
    }
    let mut reversals = 0;
    for _ in 0..20 {
        let nu1 = [rng.random_range(0.01..2.0), 0.0];
        let nu2 = [rng.random_range(0.01..2.0), 0.0];
        reversals += (0..DRAWS).filter(|_| scalarized_prefer(0, 1, &nu1, &nu2, t, s, &mut rng).unwrap() != 0).count();
    }
    Verdict::new(
        worst <= 3.0 && reversals == 0,
        format!("20 trade-off pairs, max |z| {worst:.2}; {reversals} reversals on 20 dominated pairs"),
    )
}

fn orders_match(u: &LayeredUtility) -> bool {
    let n = u.nu2().len();
    let acts: Vec<_> = [false, true].iter().flat_map(|&a| (0..n).map(move |x| ShutdownAct::new(a, x))).collect();
    ShutdownContext::BOTH.iter().all(|&ctx| {
        acts.iter().all(|&p| {
            acts.iter().all(|&q| {
                let layered = layered_value(p, ctx, u).partial_cmp(&layered_value(q, ctx, u)).unwrap();
                let lp = lex_value(p, ctx, 1.0, u.nu2()).unwrap();
                let lq = lex_value(q, ctx, 1.0, u.nu2()).unwrap();
                layered == lex_compare(&lp.layers, &lq.layers).unwrap()
            })
        })
    })
}

fn shutdown_suite() -> Verdict {
    let grid = ActGrid::linspace(1.0, 9.0, 50).unwrap();
    let kernel = KernelConfig::default();
    let mut lex_bad = 0;
    let mut order_bad = 0;
    let mut k_bad = Vec::new();
    let mut skew_bad = 0;
    for seed in 0..20 {
        let nu2 = sample_utility(&kernel, &grid, 1, 900 + seed).unwrap().row(0).to_vec();
        let spread =
            nu2.iter().copied().fold(f64::NEG_INFINITY, f64::max) - nu2.iter().copied().fold(f64::INFINITY, f64::min);
        let lex = ShutdownUtility::lexicographic(nu2.clone()).unwrap();
        let rep = check_desiderata(&lex).unwrap();
        if !(rep.d1 && rep.d2) || multi_task_failure(&lex, 100).unwrap().is_some() {
            lex_bad += 1;
        }
        if !orders_match(&LayeredUtility::new(1.05 * spread, nu2.clone()).unwrap()) {
            order_bad += 1;
        }
        for ratio in [0.5, 1.7, 2.5, 6.3] {
            let gamma = ratio * spread;
            let predicted = (gamma / spread).ceil() as usize;
            let u = ShutdownUtility::Layered(LayeredUtility::new(gamma, nu2.clone()).unwrap());
            let got = multi_task_failure(&u, 100).unwrap();
            if got != Some(predicted) {
                k_bad.push(format!("{ratio}: {got:?} vs {predicted}"));
            }
        }
        for (share, want_d1) in [(0.9, true), (0.1, false)] {
            let r =
                skewed_dataset_demo(&SkewedDemoConfig { n_pairs: 200, shutdown_share: share, nu2: nu2.clone(), seed })
                    .unwrap();
            if r.desiderata.d1 != want_d1 || r.desiderata.d2 == want_d1 {
                skew_bad += 1;
            }
        }
    }
    Verdict::new(
        lex_bad + order_bad + k_bad.len() + skew_bad == 0,
        format!(
            "20 draws: lexicographic failures {lex_bad}, order mismatches {order_bad}, wrong failure k {k_bad:?}, skewed demo misses {skew_bad}/40"
        ),
    )
}

fn honest_message() -> Verdict {
    let r = run_honest(&ExperimentConfig::default()).unwrap();
    let honest = r.honest().unwrap();
    let mut ok = true;
    let mut parts = vec![format!("honest {:.3}", honest.mean)];
    for st in r.strategies.iter().filter(|s| s.flips > 0) {
        ok &= honest.mean >= st.mean - 2.0 * st.se;
        parts.push(format!("{} {:.3}±{:.3}", st.name(), st.mean, st.se));
    }
    Verdict::new(ok, format!("{} games: {}", honest.payoffs.len(), parts.join(", ")))
}

fn choice_suite() -> Verdict {
    let grid = ActGrid::linspace(1.0, 9.0, 40).unwrap();
    let full = sample_utility(&KernelConfig::default(), &grid, 2, 1010).unwrap();
    let mut rng = seeded(1010);
    let pick = index::sample(&mut rng, grid.len(), 10).into_vec();
    let rows: Vec<Vec<f64>> = (0..2).map(|k| pick.iter().map(|&i| full.row(k)[i]).collect()).collect();
    let nu = GroundTruthUtility::new(rows, ActGrid::linspace(0.0, 1.0, 10).unwrap()).unwrap();
    let scalar = |m: &[usize]| choose_scalar(m, nu.row(0));
    let pareto = |m: &[usize]| choose_pareto(m, &nu);
    let union = |m: &[usize]| choose_union_argmax(m, &nu);
    let mut subsets = 0;
    let mut violations = 0;
    for mask in 0u32..1 << 10 {
        if mask.count_ones() != 5 {
            continue;
        }
        let ground: Vec<usize> = (0..10).filter(|b| mask & (1 << b) != 0).collect();
        subsets += 1;
        violations += usize::from(!check_path_independence(&scalar, &ground));
        violations += usize::from(!check_path_independence(&pareto, &ground));
        violations += usize::from(!check_path_independence(&union, &ground));
    }
    let r = run_example3(&ExperimentConfig::default()).unwrap();
    let min_tau = r.min_tau();
    Verdict::new(
        violations == 0 && min_tau >= 0.7,
        format!(
            "{subsets} subsets x 3 choosers, {violations} violations; recovery tau {:?}",
            r.taus.iter().map(|t| format!("{t:.3}")).collect::<Vec<_>>()
        ),
    )
}

#[test]
fn acceptance_criteria() {
    let minute = Duration::from_secs(60);
    let criteria: [Criterion; 10] = [
        ("closed forms agree with Monte Carlo", Some(5 * minute), oracle_agreement),
        ("gaussian integrals match quadrature", Some(minute), gaussian_integrals),
        ("decision regimes without cost", None, decision_regimes),
        ("decision regimes with messaging cost", None, messaging_cost),
        ("approximation comparison over simulated games", Some(30 * minute), fig9),
        ("acquisition selects the true argmax", None, selection),
        ("scalarised comparisons", None, scalarization),
        ("shutdown suite", None, shutdown_suite),
        ("honest messages", None, honest_message),
        ("choice functions and utility recovery", None, choice_suite),
    ];
    let mut failed = Vec::new();
    let _ = writeln!(std::io::stderr().lock());
    for (i, (name, limit, run)) in criteria.into_iter().enumerate() {
        let v = timed(limit, run);
        // written past the test harness capture so the verdicts always show
        let _ = writeln!(
            std::io::stderr().lock(),
            "{} {:>2} {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail
        );
        if !v.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
