//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use walklab_core::ergodic::{
    clt_experiment, coupled_block_replications, correlation, ks_uniform, lil_experiment, mean_and_se,
    monte_carlo_variance, BlockCoupler, BlockKind, CouplingOptions,
};
use walklab_core::lattice::construct_from_polynomial;
use walklab_core::spectral::{
    asymptotic_variance_spectral, fejer_kernel, fejer_series, jackson_coefficients, jackson_kernel, jackson_series,
    jackson_sup_bound, StepDistribution, TestFunction,
};
use walklab_core::torus::{nearest_integer_norm, torus_distance_raw, PointSet, TorusPoint};
use walklab_core::wasserstein::{
    bound_sandwich, exact_w1_circle, exact_wp_grid, lattice_laws, log_log_slope, optimize_upper, rnet_lower_bound,
    solve_transport, BoundRecord, CircleMeasure, DiscreteMeasure, SandwichOptions, ShellTable, SmoothingConstant,
};

const SLACK: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn golden() -> StepDistribution {
    StepDistribution::symmetric(&construct_from_polynomial(&[-1, -1, 1], 1, 1).unwrap().system)
}

fn cubic_rank_two() -> StepDistribution {
    StepDistribution::symmetric(&construct_from_polynomial(&[1, -3, 0, 1], 2, 1).unwrap().system)
}

fn cubic_plane() -> StepDistribution {
    StepDistribution::symmetric(&construct_from_polynomial(&[1, -3, 0, 1], 1, 2).unwrap().system)
}

fn cos_f() -> TestFunction {
    TestFunction::cosine(vec![1], 2f64.sqrt()).unwrap()
}

fn rho() -> f64 {
    (2.0 * PI * golden().alphas()[0][0]).cos()
}

fn dyadic_ks() -> Vec<u64> {
    (4..=14).map(|e| 1u64 << e).collect()
}

fn golden_records() -> Vec<BoundRecord> {
    bound_sandwich(&golden(), &dyadic_ks(), 1.0, &SandwichOptions::default()).unwrap()
}

fn rate_exponent() -> Outcome {
    let start = Instant::now();
    let ks = dyadic_ks();
    let kf: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    let recs = golden_records();
    let exact: Vec<f64> = recs.iter().map(|r| r.exact.unwrap_or(f64::NAN)).collect();
    let golden_slope = log_log_slope(&kf, &exact).unwrap_or(f64::NAN);
    let golden_time = start.elapsed();

    let table = ShellTable::build(&cubic_rank_two(), 1 << 20);
    let upper: Vec<f64> = ks
        .iter()
        .map(|&k| optimize_upper(&table, k, 1.0, SmoothingConstant::Displayed).unwrap().value)
        .collect();
    let cubic_slope = log_log_slope(&kf, &upper).unwrap_or(f64::NAN);
    let pass = (golden_slope + 0.5).abs() <= 0.1 && cubic_slope <= -0.85 && golden_time < Duration::from_secs(120);
    outcome(
        pass,
        format!(
            "golden exact slope {golden_slope:.4} (target -0.5 +- 0.1, {:.1}s); cubic (2,1) upper slope {cubic_slope:.4} (target <= -0.85, H_max 2^20)",
            golden_time.as_secs_f64()
        ),
    )
}

fn sandwich_validity() -> Outcome {
    let start = Instant::now();
    let recs = golden_records();
    let with_exact: Vec<&BoundRecord> = recs.iter().filter(|r| r.exact.is_some()).collect();
    let ordered = with_exact
        .iter()
        .all(|r| r.lower - SLACK <= r.exact.unwrap() && r.exact.unwrap() <= r.upper + SLACK);
    let upper_ok = with_exact.iter().filter(|r| r.upper >= r.exact.unwrap()).count();
    let at_100 = bound_sandwich(&golden(), &[100], 1.0, &SandwichOptions { h_max: 512, ..Default::default() }).unwrap();
    let ratio = at_100[0].upper / at_100[0].exact.unwrap();
    let elapsed = start.elapsed();
    let pass = !with_exact.is_empty()
        && ordered
        && upper_ok == with_exact.len()
        && ratio <= 4.0
        && elapsed < Duration::from_secs(60);
    outcome(
        pass,
        format!(
            "{} records with exact values, ordered: {ordered}, upper >= exact on {upper_ok}/{}; k=100 upper/exact = {ratio:.3}; {:.1}s",
            with_exact.len(),
            with_exact.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn exact_fixtures() -> Outcome {
    let d0 = DiscreteMeasure::dirac(&[0.0]);
    let dh = DiscreteMeasure::dirac(&[0.5]);
    let two = DiscreteMeasure::uniform_on(vec![vec![0.0], vec![0.5]]).unwrap();
    let a = exact_w1_circle(CircleMeasure::Atoms(&d0), CircleMeasure::Haar).unwrap();
    let b = exact_w1_circle(CircleMeasure::Atoms(&two), CircleMeasure::Haar).unwrap();
    let c = exact_w1_circle(CircleMeasure::Atoms(&d0), CircleMeasure::Atoms(&dh)).unwrap();
    let net = PointSet::with_masses(vec![TorusPoint::circle(0.0), TorusPoint::circle(0.5)], vec![0.5, 0.5]).unwrap();
    let r = rnet_lower_bound(&net, 0.25, 1.0, 1).unwrap().value;
    let pass = (a - 0.25).abs() <= 1e-9 && (b - 0.125).abs() <= 1e-9 && (c - 0.5).abs() <= 1e-9 && (r - b).abs() <= 1e-15;
    outcome(
        pass,
        format!("W1(d0,mu) = {a}, W1(unif{{0,1/2}},mu) = {b}, W1(d0,d1/2) = {c}, R-net bound = {r}"),
    )
}

fn kernel_identities() -> Outcome {
    let mut worst_mass: f64 = 0.0;
    for h in 1..=64 {
        let a = jackson_coefficients(h);
        // the trapezoid rule on n > degree points integrates the kernel exactly
        let n = 4 * h;
        let quad = (0..n).map(|j| jackson_kernel(h, j as f64 / n as f64)).sum::<f64>() / n as f64;
        worst_mass = worst_mass.max((a[0] - 1.0).abs()).max((quad - 1.0).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_series: f64 = 0.0;
    for _ in 0..10_000 {
        let h = rng.random_range(1..=64);
        let x: f64 = rng.random();
        let j = (jackson_kernel(h, x) - jackson_series(h, x)).abs();
        let f = (fejer_kernel(h, x) - fejer_series(h, x)).abs();
        worst_series = worst_series.max(j).max(f);
    }
    let f = TestFunction::distance_power(&TorusPoint::circle(0.0), 1.0).unwrap();
    let grid = 1usize << 16;
    let mut sup_report = Vec::new();
    let mut sup_ok = true;
    for h in [4usize, 16, 64] {
        let fh = f.smooth(h).unwrap();
        let sup = (0..grid)
            .map(|j| {
                let x = [j as f64 / grid as f64];
                let exact = nearest_integer_norm(x[0]) - 0.25;
                (exact - fh.eval(&x)).abs()
            })
            .fold(0.0, f64::max);
        let bound = jackson_sup_bound(1, h);
        sup_ok &= sup <= bound;
        sup_report.push(format!("H={h}: {sup:.3e} <= {bound:.3e}"));
    }
    let pass = worst_mass <= 1e-12 && worst_series <= 1e-10 && sup_ok;
    outcome(
        pass,
        format!(
            "max |int K_H - 1| = {worst_mass:.1e}; max |closed form - series| = {worst_series:.1e}; sup |f - f_H|: {}",
            sup_report.join(", ")
        ),
    )
}

fn variance_consistency() -> Outcome {
    let start = Instant::now();
    let nu = golden();
    let f = cos_f();
    let rho = rho();
    let closed = (1.0 + rho) / (1.0 - rho);
    let spectral = asymptotic_variance_spectral(&f, &nu, None).unwrap().value;
    let mc = monte_carlo_variance(&nu, &f, None, 100_000, 2024).unwrap();
    let elapsed = start.elapsed();
    let z = (mc.mean - spectral).abs() / mc.std_err;
    let pass = (spectral - closed).abs() <= 1e-10 && z <= 3.0 && elapsed < Duration::from_secs(60);
    outcome(
        pass,
        format!(
            "spectral C = {spectral:.12} vs closed form {closed:.12}; Monte Carlo {:.5} +- {:.5} (K = {}, {z:.2} SE); {:.1}s",
            mc.mean,
            mc.std_err,
            mc.k_max,
            elapsed.as_secs_f64()
        ),
    )
}

fn clt() -> Outcome {
    let start = Instant::now();
    let report = clt_experiment(&golden(), &cos_f(), 20_000, 2000, 7).unwrap();
    let elapsed = start.elapsed();
    let ks = report.ks_distance.unwrap_or(1.0);
    let pass = ks < 0.05 && elapsed < Duration::from_secs(180);
    outcome(
        pass,
        format!(
            "KS distance {ks:.4} to N(0, {:.6}) over 2000 sums at N = 20000 (band {:.4}); {:.1}s",
            report.sigma2,
            report.ks_band,
            elapsed.as_secs_f64()
        ),
    )
}

fn lil() -> Outcome {
    let start = Instant::now();
    let report = lil_experiment(&golden(), &cos_f(), 1_000_000, 50, 8).unwrap();
    let sigma = report.sigma2.sqrt();
    let lil = report.lil.as_ref().unwrap();
    let in_band = lil.sups.iter().filter(|&&s| (0.3 * sigma..=2.0 * sigma).contains(&s)).count();
    let max = lil.sups.iter().fold(0.0, |m: f64, &s| m.max(s));
    let frac = in_band as f64 / lil.sups.len() as f64;
    let pass = lil.window == (100_000, 1_000_000) && frac >= 0.95 && max <= 4.0 * sigma;
    outcome(
        pass,
        format!(
            "{in_band}/{} per-trial sups in [0.3, 2.0] sigma over N in [1e5, 1e6]; max sup {:.3} sigma; {:.1}s",
            lil.sups.len(),
            max / sigma,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn block_coupling() -> Outcome {
    let nu = golden();
    let f = cos_f();
    let reps = 500;
    let coupler = BlockCoupler::new(&nu, 10_000, CouplingOptions::default()).unwrap();
    let runs = coupled_block_replications(&coupler, &f, reps, 99).unwrap();
    // one W_k* per J block; distinct blocks are independent
    let samples: Vec<f64> = runs.iter().flat_map(|r| r.w_star_first.iter().take(20).copied()).collect();
    let ks = ks_uniform(&samples);
    let threshold = 3.0 / (reps as f64).sqrt();
    let mut worst_corr: f64 = 0.0;
    for i in [0usize, 1, 4, 9, 19] {
        let a: Vec<f64> = runs.iter().map(|r| r.y_star[i]).collect();
        let b: Vec<f64> = runs.iter().map(|r| r.y_star[i + 1]).collect();
        worst_corr = worst_corr.max(correlation(&a, &b).abs());
    }
    // per block length m: mean coupling cost against Delta_m
    let h_blocks: Vec<usize> = coupler
        .blocks
        .blocks
        .iter()
        .filter(|b| b.kind == BlockKind::H)
        .map(|b| b.len())
        .collect();
    let mut cost_ok = true;
    let mut cost_report = Vec::new();
    let mut lengths: Vec<usize> = h_blocks.clone();
    lengths.sort_unstable();
    lengths.dedup();
    for m in lengths {
        let costs: Vec<f64> = runs
            .iter()
            .flat_map(|r| r.h_cost.iter().zip(&h_blocks).filter(|(_, &l)| l == m).map(|(c, _)| *c))
            .collect();
        if costs.is_empty() {
            continue;
        }
        let (mean, se) = mean_and_se(&costs);
        let delta = coupler.coupling(m).unwrap().delta;
        cost_ok &= mean <= delta + 3.0 * se;
        cost_report.push(format!("|H|={m}: {mean:.4} vs {delta:.4} (+3SE {:.4})", 3.0 * se));
    }
    let pass = samples.len() == 10_000 && ks < 0.02 && worst_corr < threshold && cost_ok;
    outcome(
        pass,
        format!(
            "KS of {} pooled W* samples {ks:.4}; max |corr(Y*_i, Y*_i+1)| {worst_corr:.4} < {threshold:.4}; costs {}",
            samples.len(),
            cost_report.join(", ")
        ),
    )
}

/// Random search over 1-Lipschitz potentials for `sup sum phi dm1 - sum phi dm2`.
fn dual_search(pts: &[Vec<f64>], m1: &[f64], m2: &[f64], cost: &dyn Fn(&[f64], &[f64]) -> f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let n = pts.len();
    let dist: Vec<Vec<f64>> = pts.iter().map(|a| pts.iter().map(|b| cost(a, b)).collect()).collect();
    let project = |v: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..n).map(|j| v[j] + dist[i][j]).fold(f64::INFINITY, f64::min)).collect() };
    let value = |phi: &[f64]| -> f64 { (0..n).map(|i| phi[i] * (m1[i] - m2[i])).sum() };
    let mut best = project(&vec![0.0; n]);
    let mut best_val = value(&best);
    let mut max_seen = best_val;
    for it in 0..100_000 {
        let scale = 0.5 * (1.0 - it as f64 / 100_000.0) + 1e-3;
        let cand: Vec<f64> = if it % 10 == 0 {
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
        } else {
            best.iter().map(|v| v + scale * rng.random_range(-1.0..1.0)).collect()
        };
        let phi = project(&cand);
        let val = value(&phi);
        max_seen = max_seen.max(val);
        if val > best_val {
            best_val = val;
            best = phi;
        }
    }
    (best_val, max_seen)
}

fn property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut notes = Vec::new();
    let mut ok = true;

    // metric axioms, d^p metrics and translation invariance
    let mut metric_ok = true;
    for _ in 0..10_000 {
        let d = rng.random_range(1..=3);
        let pt = |rng: &mut ChaCha8Rng| (0..d).map(|_| rng.random::<f64>()).collect::<Vec<f64>>();
        let (x, y, z, a) = (pt(&mut rng), pt(&mut rng), pt(&mut rng), pt(&mut rng));
        let dxy = torus_distance_raw(&x, &y);
        let dyz = torus_distance_raw(&y, &z);
        let dxz = torus_distance_raw(&x, &z);
        metric_ok &= dxy >= 0.0 && dxy == torus_distance_raw(&y, &x) && dxy <= (d as f64).sqrt() / 2.0 + 1e-15;
        for p in [0.3, 0.5, 1.0] {
            metric_ok &= dxz.powf(p) <= dxy.powf(p) + dyz.powf(p) + 1e-12;
        }
        let shift = |v: &[f64]| TorusPoint::new(v.to_vec()).unwrap().translate(&a).unwrap();
        let moved = torus_distance_raw(shift(&x).coords(), shift(&y).coords());
        metric_ok &= (moved - dxy).abs() <= 1e-12;
        metric_ok &= torus_distance_raw(&x, &x) == 0.0;
    }
    ok &= metric_ok;
    notes.push(format!("metric axioms: {metric_ok}"));

    // Hermitian symmetry and |nu_hat| <= 1
    let mut herm_ok = true;
    for nu in [golden(), cubic_rank_two(), cubic_plane()] {
        for _ in 0..2000 {
            let h: Vec<i64> = (0..nu.d()).map(|_| rng.random_range(-500..=500)).collect();
            let neg: Vec<i64> = h.iter().map(|x| -x).collect();
            let v = nu.nu_hat(&h);
            herm_ok &= nu.nu_hat(&neg) == v.conj() && v.norm() <= 1.0 + 1e-12;
        }
        herm_ok &= nu.nu_hat(&vec![0; nu.d()]) == Complex64::new(1.0, 0.0);
    }
    ok &= herm_ok;
    notes.push(format!("hermitian: {herm_ok}"));

    // Delta_k monotone in k
    let mut mono_ok = true;
    for nu in [golden(), cubic_rank_two()] {
        let ks: Vec<u64> = (0..=120).collect();
        let laws = lattice_laws(&nu, &ks, 1_000_000).unwrap();
        let vals: Vec<f64> = laws
            .iter()
            .map(|l| exact_w1_circle(CircleMeasure::Atoms(&l.to_measure(nu.alphas()).unwrap()), CircleMeasure::Haar).unwrap())
            .collect();
        mono_ok &= vals.windows(2).all(|w| w[1] <= w[0] + SLACK);
    }
    ok &= mono_ok;
    notes.push(format!("Delta_k monotone: {mono_ok}"));

    // W_p <= W_1^p, grid transport against the discretized Haar measure
    let mut bridge_ok = true;
    for (nu, grid) in [(golden(), DiscreteMeasure::haar_grid(1, 500)), (cubic_plane(), DiscreteMeasure::haar_grid(2, 24))] {
        for k in [1u64, 4, 16] {
            let law = lattice_laws(&nu, &[k], 1_000_000).unwrap().remove(0);
            let m = law.to_measure(nu.alphas()).unwrap();
            let w1 = exact_wp_grid(&m, &grid, 1.0, 4000).unwrap();
            for p in [0.3, 0.5, 0.8] {
                bridge_ok &= exact_wp_grid(&m, &grid, p, 4000).unwrap() <= w1.powf(p) + SLACK;
            }
        }
    }
    ok &= bridge_ok;
    notes.push(format!("W_p <= W_1^p: {bridge_ok}"));

    // Hölder contraction under smoothing
    let mut holder_ok = true;
    for f in [
        TestFunction::distance_power(&TorusPoint::circle(0.3), 0.5).unwrap(),
        TestFunction::distance_power(&TorusPoint::circle(0.0), 1.0).unwrap(),
        cos_f(),
    ] {
        let q = f.measured_holder_quotient();
        for h in [2usize, 4, 8, 16] {
            holder_ok &= f.smooth(h).unwrap().measured_holder_quotient() <= q + 1e-6;
        }
    }
    ok &= holder_ok;
    notes.push(format!("Hölder contraction: {holder_ok}"));

    // Kantorovich duality spot checks on small instances
    let mut dual_ok = true;
    let mut worst_gap: f64 = 0.0;
    for (d, p) in [(1usize, 1.0), (2, 1.0), (1, 0.5), (2, 0.5)] {
        let n1 = rng.random_range(2..=12);
        let n2 = rng.random_range(2..=12);
        let pts: Vec<Vec<f64>> = (0..n1 + n2).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
        let masses = |n: usize, rng: &mut ChaCha8Rng| {
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect::<Vec<f64>>()
        };
        let a = masses(n1, &mut rng);
        let b = masses(n2, &mut rng);
        let cost = move |x: &[f64], y: &[f64]| torus_distance_raw(x, y).powf(p);
        let primal = solve_transport(&a, &b, |i, j| cost(&pts[i], &pts[n1 + j])).unwrap().cost;
        let mut m1 = a.clone();
        m1.extend(vec![0.0; n2]);
        let mut m2 = vec![0.0; n1];
        m2.extend(b.iter().copied());
        let (best, max_seen) = dual_search(&pts, &m1, &m2, &cost, &mut rng);
        dual_ok &= best >= 0.98 * primal && max_seen <= primal + 1e-12;
        worst_gap = worst_gap.max((primal - best) / primal);
    }
    ok &= dual_ok;
    notes.push(format!("duality: {dual_ok} (worst relative gap {worst_gap:.4})"));

    outcome(ok, notes.join("; "))
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("rate exponent", rate_exponent),
        ("sandwich validity", sandwich_validity),
        ("exact-oracle fixtures", exact_fixtures),
        ("kernel identities", kernel_identities),
        ("variance consistency", variance_consistency),
        ("central limit theorem", clt),
        ("law of the iterated logarithm", lil),
        ("block coupling", block_coupling),
        ("property suites", property_suites),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} [{}] {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
