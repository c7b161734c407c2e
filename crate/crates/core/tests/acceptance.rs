//! End-to-end acceptance checks. Runs without the libtest harness so that the
//! per-criterion lines are always printed; exits nonzero if any check fails.

use std::time::{Duration, Instant};

use qldev::estimation::*;
use qldev::expfam::{kl_discrete, ExponentialFamily, Halfspace, Side};
use qldev::families::{EquatorialQubitFamily, GaussianFockFamily, StateFamily};
use qldev::linalg::{random, tensor_power, trace, DensityMatrix};
use qldev::measurement::{classical_fisher, distribution, pinching, spectral_pvm, Povm, Pvm};
use qldev::qmetrics::{family_fisher, family_relative_entropy, fidelity, kmb_fisher, limit_table, relative_entropy, rld_fisher, sld_and_fisher};
use qldev::repdecomp::*;
use qldev::stats::stream_rng;
use rand::Rng;

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e(err: qldev::Error) -> String {
    err.to_string()
}

fn criterion_1() -> Check {
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for &r in &[0.3, 0.6, 0.9] {
        let f = EquatorialQubitFamily::new(r).map_err(e)?;
        let jt_cf = 0.5 * r * ((1.0 + r) / (1.0 - r)).ln();
        let rho0 = f.state(0.0).map_err(e)?;
        for k in 0..10 {
            let th = -2.7 + 0.6 * k as f64;
            let rep = family_fisher(&f, th).map_err(e)?;
            let d = relative_entropy(&f.state(th).map_err(e)?, &rho0).map_err(e)?;
            let d_cf = 0.5 * r * (1.0 - th.cos()) * ((1.0 + r) / (1.0 - r)).ln();
            worst.0 = worst.0.max((rep.j_sld - r * r).abs());
            worst.1 = worst.1.max((rep.j_kmb - jt_cf).abs());
            worst.2 = worst.2.max((d - d_cf).abs());
        }
    }
    ensure(worst.0 <= 1e-8 && worst.1 <= 1e-8 && worst.2 <= 1e-10, || format!("max errors {worst:?}"))?;
    Ok(format!("max |ΔJ| {:.1e}, |ΔJ̃| {:.1e}, |ΔD| {:.1e}", worst.0, worst.1, worst.2))
}

fn criterion_2() -> Check {
    let f = GaussianFockFamily::new(1.0, 60).map_err(e)?;
    let grid: Vec<f64> = (0..=8).map(|k| -1.0 + 0.25 * k as f64).collect();
    let (j_cf, jt_cf) = (4.0 / 3.0, 2.0 * 2f64.ln());
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for (i, &th) in grid.iter().enumerate() {
        let rep = family_fisher(&f, th).map_err(e)?;
        worst.0 = worst.0.max((rep.j_sld - j_cf).abs() / j_cf);
        worst.1 = worst.1.max((rep.j_kmb - jt_cf).abs() / jt_cf);
        for (k, &th0) in grid.iter().enumerate() {
            if k == i {
                continue;
            }
            let d = family_relative_entropy(&f, th, th0).map_err(e)?;
            let d_cf = 2f64.ln() * (th - th0).powi(2);
            worst.2 = worst.2.max((d - d_cf).abs() / d_cf);
        }
    }
    ensure(worst.0 <= 1e-3 && worst.1 <= 1e-3 && worst.2 <= 1e-3, || format!("max rel errors {worst:?}"))?;
    Ok(format!("max rel err J {:.1e}, J̃ {:.1e}, D {:.1e}", worst.0, worst.1, worst.2))
}

fn criterion_3() -> Check {
    let f = EquatorialQubitFamily::new(0.5).map_err(e)?;
    let row = limit_table(&f, 0.3, &[1e-3]).map_err(e)?.remove(0);
    let a = (row.two_d - row.j_kmb).abs() / row.j_kmb;
    let b = (row.four_b2 - row.j_sld).abs() / row.j_sld;
    let c = (row.affinity - row.j_sld).abs() / row.j_sld;
    ensure(a <= 0.02 && b <= 0.02 && c <= 0.02, || format!("relative gaps {a:.2e} {b:.2e} {c:.2e}"))?;
    Ok(format!("relative gaps 2D/ε² {a:.1e}, 4b²/ε² {b:.1e}, I/ε² {c:.1e}"))
}

fn random_povm<R: Rng>(dim: usize, outcomes: usize, rng: &mut R) -> Povm {
    let elements = random::povm_elements(dim, outcomes, rng);
    Povm::new(elements, (0..outcomes).map(|i| i as f64).collect()).expect("valid POVM")
}

fn criterion_4() -> Check {
    let mut rng = stream_rng(1004, &[]);
    let mut violations = Vec::new();
    let mut count = 0;
    let mut worst_sld = 0.0f64;
    for d in 2..=4 {
        for k in 0..170 {
            let rho = random::density(d, &mut rng);
            let sigma = random::density(d, &mut rng);
            let b = random::traceless_hermitian(d, &mut rng);
            let (l, j) = sld_and_fisher(&rho, &b).map_err(e)?;
            let jt = kmb_fisher(&rho, &b).map_err(e)?;
            let jr = rld_fisher(&rho, &b).map_err(e)?;
            if j > jt + 1e-9 * (1.0 + jt) || jt > jr + 1e-9 * (1.0 + jr) {
                violations.push(format!("ordering d={d}: {j} {jt} {jr}"));
            }
            let m = random_povm(d, 2 + k % 4, &mut rng);
            let p = distribution(&m, &rho).map_err(e)?.probabilities;
            let q = distribution(&m, &sigma).map_err(e)?.probabilities;
            let bc: f64 = p.iter().zip(&q).map(|(a, b)| (a * b).sqrt()).sum();
            if fidelity(&rho, &sigma).map_err(e)? > bc + 1e-9 {
                violations.push(format!("Fuchs d={d}"));
            }
            if kl_discrete(&p, &q) > relative_entropy(&rho, &sigma).map_err(e)? + 1e-9 {
                violations.push(format!("D^M > D d={d}"));
            }
            let dp: Vec<f64> = m.elements().iter().map(|el| qldev::linalg::trace_product_re(el.matrix(), b.matrix())).collect();
            if classical_fisher(&p, &dp) > j + 1e-9 * (1.0 + j) {
                violations.push(format!("classical Fisher > J d={d}"));
            }
            let sld = spectral_pvm(&l);
            let ps = distribution(sld.as_povm(), &rho).map_err(e)?.probabilities;
            let dps: Vec<f64> = sld
                .as_povm()
                .elements()
                .iter()
                .map(|el| qldev::linalg::trace_product_re(el.matrix(), b.matrix()))
                .collect();
            let rel = (classical_fisher(&ps, &dps) - j).abs() / j;
            worst_sld = worst_sld.max(rel);
            if rel > 1e-8 {
                violations.push(format!("SLD PVM Fisher rel err {rel:.1e}"));
            }
            count += 1;
        }
    }
    ensure(violations.is_empty(), || format!("{} violations, first: {}", violations.len(), violations[0]))?;
    Ok(format!("{count} instances per inequality, 0 violations, SLD PVM max rel err {worst_sld:.1e}"))
}

fn criterion_5() -> Check {
    let mut rng = stream_rng(1005, &[]);
    let f = EquatorialQubitFamily::new(0.5).map_err(e)?;
    let mut min_slack = f64::INFINITY;
    for m in 1..=6 {
        for _ in 0..20 {
            let t0: f64 = rng.random_range(-3.0..3.0);
            let t1: f64 = rng.random_range(-3.0..3.0);
            let d = relative_entropy(&f.state(t0).map_err(e)?, &f.state(t1).map_err(e)?).map_err(e)?;
            let v = sandwich_kl(&f, t0, t1, m).map_err(e)?;
            let mf = m as f64;
            let lo = v - (mf * d - (mf + 1.0).ln());
            let hi = mf * d - v;
            min_slack = min_slack.min(lo).min(hi);
            ensure(lo >= -1e-9 && hi >= -1e-9, || format!("m={m} t0={t0} t1={t1}: value {v}, mD {}", mf * d))?;
        }
    }
    Ok(format!("120 cases, smallest margin {min_slack:.2e}"))
}

fn criterion_6() -> Check {
    let g = GaussianFockFamily::new(1.0, 60).map_err(e)?;
    let n_grid: Vec<usize> = (1..=10).map(|k| 100 * k).collect();
    let cfg = SimulationConfig::new(n_grid, vec![0.2, 0.3, 0.4, 0.5], 1, 0);
    let est = simulate_tail(StrategySpec::GaussianNumber { nbar: 1.0 }, &g, 0.0, &cfg).map_err(e)?;
    let mut worst = 0.0f64;
    for t in &est {
        let k = (t.n as f64 * t.eps * t.eps - 1e-9).ceil();
        worst = worst.max((t.p_hat - 0.5f64.powf(k)).abs());
    }
    ensure(worst <= 1e-12, || format!("number tail error {worst:e}"))?;
    let alpha = rate_curve(&est, &g, 0.0).map_err(e)?.alpha.ok_or("no alpha")?;
    let target = 2f64.ln();
    ensure((alpha - target).abs() <= 0.01 * target, || format!("alpha {alpha} vs {target}"))?;

    let mut cfg = SimulationConfig::new((1..=8).map(|k| 50 * k).collect(), vec![0.5], 100_000, 1006);
    cfg.sampler = Sampler::Tilted;
    let est = simulate_tail(StrategySpec::GaussianHomodyne { nbar: 1.0 }, &g, 0.0, &cfg).map_err(e)?;
    let fit = extract_beta(&est).map_err(e)?;
    let target = 1.0 / 6.0;
    ensure((fit.beta - target).abs() <= 0.1 * target, || format!("homodyne beta {} vs 1/6", fit.beta))?;
    Ok(format!(
        "number tail max err {worst:.1e}, alpha {alpha:.6} vs log 2; homodyne beta {:.4} ± {:.4} vs 0.1667",
        fit.beta, fit.stderr
    ))
}

fn criterion_7() -> Check {
    let f = EquatorialQubitFamily::new(0.8).map_err(e)?;
    let (delta, theta, j) = (0.25, 0.5, 0.64);
    let est = TwoStageEstimator::new(&f, delta, theta).map_err(e)?;
    let mut rng = stream_rng(1007, &[]);
    let (n, trials) = (400usize, 20_000);
    let mut sum_sq = 0.0;
    for _ in 0..trials {
        sum_sq += (est.sample(n, &mut rng).map_err(e)?.estimate - theta).powi(2);
    }
    let ratio = sum_sq / trials as f64 * (1.0 - delta) * n as f64 * j;
    ensure((0.85..=1.15).contains(&ratio), || format!("MSE ratio {ratio}"))?;

    let eps = 0.3;
    let mut cfg = SimulationConfig::new((1..=8).map(|k| 100 * k).collect(), vec![eps], 20_000, 1017);
    cfg.sampler = Sampler::Tilted;
    let tails = simulate_tail(StrategySpec::TwoStage { delta }, &f, theta, &cfg).map_err(e)?;
    let fit = extract_beta(&tails).map_err(e)?;
    let bounds = theoretical_bounds(&f, theta, eps).map_err(e)?;
    let lower = 0.5 * (1.0 - delta) * j * eps * eps / 2.0;
    ensure(fit.beta <= bounds.inf_d + 2.0 * fit.stderr, || {
        format!("beta {} above inf-D {} + 2·{}", fit.beta, bounds.inf_d, fit.stderr)
    })?;
    ensure(fit.beta >= lower, || format!("beta {} below {lower}", fit.beta))?;
    Ok(format!(
        "MSE·(1−δ)nJ {ratio:.4}; beta(0.3) {:.4} ± {:.4} in [{lower:.4}, inf-D {:.4}]",
        fit.beta, fit.stderr, bounds.inf_d
    ))
}

fn criterion_8() -> Check {
    let f = EquatorialQubitFamily::new(0.5).map_err(e)?;
    let (t1, n) = (0.2, 9);
    let law = superefficient_distribution(t1, &f, t1, n).map_err(e)?;
    let miss: f64 = law.iter().filter(|x| x.0 != t1).map(|x| x.1).sum();
    let (_, n2) = superefficient_split(n);
    let c = n2 as f64 * (1.0 - delta_n(n2));
    let rho1 = f.state(t1).map_err(e)?;
    let mut sup = 0.0f64;
    for &(v, _) in law.iter().filter(|x| x.0 != t1) {
        let d = relative_entropy(&f.state(v).map_err(e)?, &rho1).map_err(e)?;
        sup = sup.max((-c * d).exp());
    }
    ensure(miss <= sup + 1e-12, || format!("P(T ≠ θ1) = {miss} above bound {sup}"))?;
    let hit = |n: usize| -> qldev::Result<f64> {
        Ok(superefficient_distribution(t1, &f, t1 + 1.0, n)?
            .iter()
            .filter(|x| x.0 == t1)
            .map(|x| x.1)
            .sum())
    };
    let (h4, h9) = (hit(4).map_err(e)?, hit(9).map_err(e)?);
    ensure(h9 < h4, || format!("P(T = θ1) not decreasing: n=4 {h4}, n=9 {h9}"))?;
    Ok(format!(
        "P(T ≠ θ1 | θ1) {miss:.4} ≤ bound {sup:.4}; far P(T = θ1): n=4 {h4:.4} > n=9 {h9:.4}"
    ))
}

fn criterion_9() -> Check {
    let f = EquatorialQubitFamily::new(0.5).map_err(e)?;
    let theta1 = 0.0;
    let grid = [
        (0.3, 0.6, 0.05),
        (0.3, 0.6, 0.2),
        (0.3, -0.5, 0.1),
        (-0.4, 0.8, 0.3),
        (0.9, 0.1, 0.05),
        (0.9, 1.5, 0.4),
        (1.5, -1.0, 0.15),
        (-1.2, -0.2, 0.25),
        (0.0, 2.0, 0.5),
        (2.5, 0.7, 0.1),
    ];
    let mut tight = f64::INFINITY;
    for &(t0, t2, delta) in &grid {
        let (b1, b2) = lemma8_bounds(&f, t0, theta1, t2, delta, 4).map_err(e)?;
        let (p1, p2) = lemma8_exact(&f, t0, theta1, t2, delta, 4).map_err(e)?;
        ensure(b1 >= p1 - 1e-12 && b2 >= p2 - 1e-12, || {
            format!("(θ0, θ2, δ) = ({t0}, {t2}, {delta}): bounds ({b1}, {b2}) vs exact ({p1}, {p2})")
        })?;
        tight = tight.min(b1 - p1).min(b2 - p2);
    }
    Ok(format!("10 grid points, 0 violations, smallest margin {tight:.2e}"))
}

fn criterion_10() -> Check {
    let b = ExponentialFamily::bernoulli();
    let t0 = [(0.4f64 / 0.6).ln()];
    let hs = Halfspace { index: 0, threshold: 0.6, side: Side::Upper };
    let rate = b.cramer_rate(&t0, hs).map_err(e)?;
    let kl = 0.6 * (0.6f64 / 0.4).ln() + 0.4 * (0.4f64 / 0.6).ln();
    ensure((rate - kl).abs() <= 1e-10, || format!("rate {rate} vs KL {kl}"))?;
    let ns: Vec<u64> = (1..=10).map(|k| 200 * k).collect();
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut w = Vec::new();
    for (i, &n) in ns.iter().enumerate() {
        let mut rng = stream_rng(1010, &[i as u64]);
        let t = b.sample_tail_tilted(&t0, hs, n, 1_000_000, &mut rng).map_err(e)?;
        x.push(n as f64);
        y.push(-t.p_hat.ln());
        w.push((t.p_hat / t.stderr).powi(2));
    }
    let fit = qldev::stats::weighted_line_fit(&x, &y, &w).ok_or("degenerate fit")?;
    ensure((fit.slope - rate).abs() <= 0.1 * rate, || format!("slope {} vs rate {rate}", fit.slope))?;
    Ok(format!("rate − KL {:.1e}; slope {:.5} vs rate {rate:.5}", rate - kl, fit.slope))
}

fn block_diagonal_state<R: Rng>(coarse: &Pvm, rng: &mut R) -> DensityMatrix {
    let a = random::density(coarse.dim(), rng);
    let mut m = a.matrix() * qldev::linalg::cr(0.0);
    for p in coarse.as_povm().elements() {
        m += p.matrix() * a.matrix() * p.matrix();
    }
    let t = trace(&m).re;
    DensityMatrix::new(m / qldev::linalg::cr(t)).expect("valid state")
}

fn criterion_11() -> Check {
    let mut rng = stream_rng(1011, &[]);
    let base_family = EquatorialQubitFamily::new(0.8).map_err(e)?;
    let (mut pyth, mut loss_margin, mut dom) = (0.0f64, f64::INFINITY, f64::INFINITY);
    let mut cases = 0;
    for n in 2..=4 {
        let e_n = qubit_irrep_pvm(n).map_err(e)?;
        let coarse = e_n.to_pvm().map_err(e)?;
        let w = coarse.max_rank() as f64;
        for _ in 0..(if n == 4 { 66 } else { 67 }) {
            let base = base_family.state(rng.random_range(-3.0..3.0)).map_err(e)?;
            let fine = refine_with_density(&e_n, &base, 0.0).map_err(e)?.to_pvm().map_err(e)?;
            let rho = block_diagonal_state(&coarse, &mut rng);
            let sigma = tensor_power(&base, n).map_err(e)?;
            let pr = pinching(&fine, &rho).map_err(e)?;
            let lhs = relative_entropy(&rho, &sigma).map_err(e)?;
            let rhs = relative_entropy(&pr, &sigma).map_err(e)? + relative_entropy(&rho, &pr).map_err(e)?;
            pyth = pyth.max((lhs - rhs).abs());
            let loss = pinching_loss(&coarse, &fine, &rho).map_err(e)?;
            loss_margin = loss_margin.min(w.ln() - loss);
            dom = dom.min(operator_dominance_check(&coarse, &fine, &rho).map_err(e)?);
            cases += 1;
        }
    }
    ensure(pyth <= 1e-9 && loss_margin >= -1e-9 && dom >= -1e-9, || {
        format!("Pythagoras residual {pyth:e}, loss margin {loss_margin:e}, dominance {dom:e}")
    })?;
    Ok(format!(
        "{cases} cases; Pythagoras residual {pyth:.1e}, log w − loss ≥ {loss_margin:.2e}, dominance min-eig {dom:.1e}"
    ))
}

fn criterion_12() -> Check {
    let f = EquatorialQubitFamily::new(0.8).map_err(e)?;
    let mut summary = Vec::new();
    for strategy in [StrategySpec::FixedSld { theta0: 0.5 }, StrategySpec::TwoStage { delta: 0.25 }] {
        let mut runs = Vec::new();
        for workers in [1, 2, 8] {
            let mut cfg = SimulationConfig::new(vec![20, 40, 80], vec![0.2, 0.4], 2_000, 12);
            cfg.workers = Some(workers);
            runs.push(simulate_tail(strategy, &f, 0.5, &cfg).map_err(e)?);
        }
        let hits = |r: &Vec<TailEstimate>| r.iter().map(|t| t.hits).collect::<Vec<_>>();
        ensure(runs.iter().all(|r| r == &runs[0]), || {
            format!("{}: hits differ {:?}", strategy.name(), runs.iter().map(hits).collect::<Vec<_>>())
        })?;
        summary.push(format!("{} {:?}", strategy.name(), hits(&runs[0])));
    }
    Ok(format!("identical for workers 1, 2, 8: {}", summary.join("; ")))
}

fn main() {
    let criteria: [(&str, fn() -> Check, Option<Duration>); 12] = [
        ("Example 1 closed forms", criterion_1, Some(Duration::from_secs(1))),
        ("Example 2 closed forms", criterion_2, Some(Duration::from_secs(10))),
        ("limit relations", criterion_3, None),
        ("inequality suites", criterion_4, Some(Duration::from_secs(60))),
        ("Schur sandwich", criterion_5, Some(Duration::from_secs(30))),
        ("Gaussian exponents", criterion_6, Some(Duration::from_secs(300))),
        ("two-stage estimator", criterion_7, None),
        ("superefficient estimator", criterion_8, None),
        ("Lemma 8 bounds", criterion_9, None),
        ("classical Cramér rate", criterion_10, Some(Duration::from_secs(120))),
        ("pinching suite", criterion_11, None),
        ("determinism", criterion_12, None),
    ];
    let mut failed = 0;
    for (k, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = match (result, limit) {
            (Ok(msg), Some(l)) if elapsed > *l => Err(format!("{msg}; runtime {elapsed:.1?} exceeds {l:?}")),
            (r, _) => r,
        };
        match result {
            Ok(msg) => println!("PASS criterion {:>2} ({name}) [{elapsed:.2?}]: {msg}", k + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {:>2} ({name}) [{elapsed:.2?}]: {msg}", k + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
