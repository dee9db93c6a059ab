//! Acceptance criteria, one test per criterion. Each prints a single
//! `criterion N: PASS|FAIL ...` line (run with `--nocapture` to see them).

use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use evt_margin::analytics::{implied_leverage, payoff, trigger_price, LiquidationDay};
use evt_margin::extremes::block_extremes_of;
use evt_margin::gev::{self, Gev};
use evt_margin::margins::{monte_carlo_exceedance, normal_margin, optimal_margin, Side};
use evt_margin::pipeline::{derive_seed, run_pipeline, RunConfig};
use evt_margin::synthetic;

const FREQS: [&str; 5] = ["5min", "30min", "1h", "8h", "1d"];
const KINDS: [&str; 2] = ["standard", "perpetual"];
const PROBS: [f64; 4] = [0.1, 0.05, 0.01, 0.001];

// BitMEX tail fits in percent units, indexed [kind][frequency] as (τ, σ, μ).
const RIGHT: [[(f64, f64, f64); 5]; 2] = [
    [
        (0.3939, 0.2967, 0.4281),
        (0.3643, 0.6119, 0.8947),
        (0.3163, 0.9078, 1.3809),
        (0.2386, 1.7176, 2.7411),
        (0.2097, 2.8115, 4.5184),
    ],
    [
        (0.3845, 0.2938, 0.4265),
        (0.3455, 0.6003, 0.8879),
        (0.2904, 0.8817, 1.3642),
        (0.1948, 1.6229, 2.6731),
        (0.1424, 2.5662, 4.3345),
    ],
];
const LEFT: [[(f64, f64, f64); 5]; 2] = [
    [
        (0.4389, 0.3057, 0.4276),
        (0.4112, 0.6173, 0.8704),
        (0.3326, 0.9149, 1.3417),
        (0.2641, 1.7020, 2.4324),
        (0.2261, 2.6053, 3.6979),
    ],
    [
        (0.4490, 0.3087, 0.4291),
        (0.4311, 0.6294, 0.8768),
        (0.3620, 0.9414, 1.3568),
        (0.3152, 1.7928, 2.4840),
        (0.3102, 2.8165, 3.8108),
    ],
];
const COMMON: [[(f64, f64, f64); 5]; 2] = [
    [
        (0.4165, 0.3012, 0.4278),
        (0.3876, 0.6149, 0.8825),
        (0.3237, 0.9121, 1.3616),
        (0.2447, 1.7242, 2.5891),
        (0.2096, 2.7480, 4.1036),
    ],
    [
        (0.4176, 0.3012, 0.4277),
        (0.3901, 0.6148, 0.8819),
        (0.3272, 0.9118, 1.3601),
        (0.2531, 1.7197, 2.5805),
        (0.2255, 2.7270, 4.0740),
    ],
];

// Reference margins (percent), [kind][frequency][probability].
type Grid = [[[f64; 4]; 5]; 2];
const SHORT_MARGIN: Grid = [
    [
        [1.50, 2.10, 4.29, 11.12],
        [3.03, 4.17, 8.19, 20.01],
        [4.36, 5.85, 10.81, 24.02],
        [7.86, 10.17, 17.12, 32.95],
        [12.60, 16.11, 26.29, 48.19],
    ],
    [
        [1.48, 2.06, 4.14, 10.54],
        [2.93, 4.00, 7.67, 18.05],
        [4.16, 5.52, 9.88, 20.89],
        [7.26, 9.20, 14.76, 26.34],
        [11.14, 13.82, 21.01, 34.50],
    ],
];
const LONG_MARGIN: Grid = [
    [
        [1.60, 2.30, 4.98, 14.17],
        [3.16, 4.46, 9.32, 25.07],
        [4.41, 5.98, 11.30, 25.96],
        [7.66, 10.11, 17.71, 35.93],
        [11.34, 14.73, 24.78, 47.11],
    ],
    [
        [1.63, 2.35, 5.17, 15.03],
        [3.27, 4.67, 10.03, 28.10],
        [4.63, 6.38, 12.50, 30.45],
        [8.36, 11.30, 21.05, 46.98],
        [12.98, 17.55, 32.56, 72.10],
    ],
];
const COMMON_MARGIN: Grid = [
    [
        [1.55, 2.20, 4.62, 12.55],
        [3.09, 4.31, 8.73, 22.37],
        [4.38, 5.91, 11.03, 24.90],
        [7.76, 10.12, 17.26, 33.74],
        [12.55, 15.88, 25.03, 42.91],
    ],
    [
        [1.55, 2.20, 4.63, 12.61],
        [3.10, 4.33, 8.79, 22.63],
        [4.39, 5.94, 11.13, 25.28],
        [7.80, 10.19, 17.55, 34.81],
        [12.07, 15.61, 26.10, 49.39],
    ],
];
// Normal-model margins reported alongside the GEV ones.
const SHORT_NORMAL: Grid = [
    [
        [0.38, 0.49, 0.69, 0.92],
        [0.88, 1.13, 1.60, 2.13],
        [1.21, 1.56, 2.21, 2.94],
        [3.13, 4.05, 5.77, 7.70],
        [5.37, 6.99, 10.02, 13.43],
    ],
    [
        [0.38, 0.49, 0.69, 0.92],
        [0.89, 1.14, 1.61, 2.14],
        [1.23, 1.59, 2.24, 2.98],
        [3.24, 4.17, 5.92, 7.88],
        [5.96, 7.69, 10.94, 14.58],
    ],
];
const LONG_NORMAL: Grid = [
    [
        [0.38, 0.49, 0.69, 0.92],
        [0.89, 1.14, 1.61, 2.14],
        [1.24, 1.59, 2.24, 2.97],
        [3.36, 4.28, 6.00, 7.93],
        [6.06, 7.68, 10.72, 14.12],
    ],
    [
        [0.38, 0.49, 0.69, 0.92],
        [0.89, 1.14, 1.61, 2.14],
        [1.25, 1.60, 2.26, 3.00],
        [3.34, 4.27, 6.02, 7.99],
        [6.24, 7.97, 11.22, 14.86],
    ],
];
// Mean and standard deviation of the price changes, percent, [kind][frequency].
const CHANGE_MEAN: [[f64; 5]; 2] = [[0.00, 0.01, 0.02, 0.12, 0.35], [0.00, 0.00, 0.01, 0.05, 0.14]];
const CHANGE_SD: [[f64; 5]; 2] = [[0.30, 0.69, 0.96, 2.53, 4.46], [0.30, 0.69, 0.97, 2.57, 4.76]];

fn gev_of((t, s, m): (f64, f64, f64)) -> Gev {
    Gev::new(t, s, m).unwrap()
}

fn report(n: u32, ok: bool, elapsed: Duration, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("criterion {n}: {verdict} ({:.2}s) {detail}", elapsed.as_secs_f64());
}

/// All 30 fitted tails with labels.
fn fixtures() -> Vec<(String, Gev)> {
    let mut v = Vec::new();
    for (tail, table) in [("right", &RIGHT), ("left", &LEFT), ("common", &COMMON)] {
        for (k, kind) in KINDS.iter().enumerate() {
            for (f, freq) in FREQS.iter().enumerate() {
                v.push((format!("{kind}_{freq}_{tail}"), gev_of(table[k][f])));
            }
        }
    }
    v
}

#[test]
fn criterion_1_margins_from_tail_fits() {
    let start = Instant::now();
    let mut misses = Vec::new();
    let mut worst: f64 = 0.0;
    let mut cells = 0;
    for (position, params, expected) in [
        ("short", &RIGHT, &SHORT_MARGIN),
        ("long", &LEFT, &LONG_MARGIN),
        ("common", &COMMON, &COMMON_MARGIN),
    ] {
        for k in 0..2 {
            for f in 0..5 {
                let g = gev_of(params[k][f]);
                for (i, &p) in PROBS.iter().enumerate() {
                    let md = optimal_margin(&g, p).unwrap();
                    let err = (md - expected[k][f][i]).abs();
                    cells += 1;
                    worst = worst.max(err);
                    if err > 0.05 {
                        misses.push(format!(
                            "{position}/{}/{}/p={p}: {md:.4} vs {}",
                            KINDS[k], FREQS[f], expected[k][f][i]
                        ));
                    }
                }
            }
        }
    }
    let anchors = [
        (optimal_margin(&gev_of(RIGHT[1][0]), 0.001).unwrap(), 10.54),
        (optimal_margin(&gev_of(LEFT[1][4]), 0.01).unwrap(), 32.56),
        (optimal_margin(&gev_of(RIGHT[0][4]), 0.1).unwrap(), 12.60),
    ];
    let anchors_ok = anchors.iter().all(|(md, e)| (md - e).abs() <= 0.05);
    let elapsed = start.elapsed();
    let ok = misses.is_empty() && anchors_ok && elapsed < Duration::from_secs(1);
    report(
        1,
        ok,
        elapsed,
        &format!(
            "{}/{cells} cells within 0.05, max error {worst:.4}, anchors {}; misses: [{}]",
            cells - misses.len(),
            if anchors_ok { "ok" } else { "off" },
            misses.join("; ")
        ),
    );
    assert!(ok, "cells outside tolerance: {misses:?}");
}

/// z with P(Z > z) = p, by bisection on an independent normal survival
/// function.
fn oracle_upper_z(p: f64) -> f64 {
    let n = Normal::standard();
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if n.sf(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn criterion_2_normal_baseline() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut cases: Vec<(f64, f64, f64)> = (0..2000)
        .map(|_| {
            let p = 10f64.powf(rng.random_range(-6.0..-0.31));
            (rng.random_range(-1.0..1.0), rng.random_range(0.01..10.0), p)
        })
        .collect();
    for k in 0..2 {
        for f in 0..5 {
            for &p in &PROBS {
                cases.push((CHANGE_MEAN[k][f], CHANGE_SD[k][f], p));
            }
        }
    }
    for &(mean, sd, p) in &cases {
        let z = oracle_upper_z(p);
        let short = normal_margin(mean, sd, p, Side::Short).unwrap();
        let long = normal_margin(mean, sd, p, Side::Long).unwrap();
        worst = worst.max((short - (mean + sd * z)).abs());
        worst = worst.max((long - (sd * z - mean)).abs());
    }

    // Comparison with the reported normal margins; informational only.
    let (mut within, mut within_swapped, mut total) = (0, 0, 0);
    for k in 0..2 {
        for f in 0..5 {
            for (i, &p) in PROBS.iter().enumerate() {
                let (m, s) = (CHANGE_MEAN[k][f], CHANGE_SD[k][f]);
                let short = normal_margin(m, s, p, Side::Short).unwrap();
                let long = normal_margin(m, s, p, Side::Long).unwrap();
                total += 2;
                within += ((short - SHORT_NORMAL[k][f][i]).abs() <= 0.35) as usize;
                within += ((long - LONG_NORMAL[k][f][i]).abs() <= 0.35) as usize;
                within_swapped += ((long - SHORT_NORMAL[k][f][i]).abs() <= 0.35) as usize;
                within_swapped += ((short - LONG_NORMAL[k][f][i]).abs() <= 0.35) as usize;
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = worst <= 1e-9 && elapsed < Duration::from_secs(1);
    report(
        2,
        ok,
        elapsed,
        &format!(
            "max |normal_margin - oracle| {worst:.2e} over {} cases; reported normal margins within 0.35: \
             {within}/{total} as labelled, {within_swapped}/{total} with long/short swapped (not asserted)",
            cases.len()
        ),
    );
    assert!(ok, "max deviation {worst:e}");
}

#[test]
fn criterion_3_mle_recovery() {
    let start = Instant::now();
    let truths = [(0.14, 2.57, 4.33), (0.31, 2.82, 3.81), (0.38, 0.29, 0.43)];
    let mut lines = Vec::new();
    let mut ok = true;
    for (i, &(t, s, m)) in truths.iter().enumerate() {
        let g = gev_of((t, s, m));
        let fits: Vec<_> = [1_000usize, 10_000, 100_000]
            .par_iter()
            .map(|&n| gev::fit(&g.sample(n, derive_seed(3, &format!("mle/{i}/{n}")))).unwrap())
            .collect();
        let mid = &fits[1];
        for (est, truth) in [(mid.tau, t), (mid.sigma, s), (mid.mu, m)] {
            ok &= (est - truth).abs() <= 0.03 * truth.abs().max(1.0);
        }
        let se = |f: &gev::GevParams| [f.se_tau.unwrap(), f.se_sigma.unwrap(), f.se_mu.unwrap()];
        let (a, b, c) = (se(&fits[0]), se(&fits[1]), se(&fits[2]));
        let ratios: Vec<f64> = (0..3).flat_map(|j| [a[j] / b[j], b[j] / c[j]]).collect();
        ok &= ratios.iter().all(|r| (2.5..=4.0).contains(r));
        lines.push(format!(
            "({t},{s},{m}) -> ({:.4},{:.4},{:.4}) se ratios [{}]",
            mid.tau,
            mid.sigma,
            mid.mu,
            ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>().join(",")
        ));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(30);
    report(3, ok, elapsed, &lines.join("; "));
    assert!(ok);
}

#[test]
fn criterion_4_monte_carlo_exceedance() {
    let start = Instant::now();
    let jobs: Vec<(String, Gev, f64)> = fixtures()
        .into_iter()
        .flat_map(|(name, g)| PROBS.iter().map(move |&p| (name.clone(), g, p)))
        .collect();
    let results: Vec<(String, f64, f64, f64, bool)> = jobs
        .par_iter()
        .map(|(name, g, p)| {
            let md = optimal_margin(g, *p).unwrap();
            let seed = derive_seed(4, &format!("{name}/{p}"));
            let e = monte_carlo_exceedance(g, md, 1_000_000, seed).unwrap();
            (name.clone(), *p, e.frequency, e.stderr, e.consistent_with(*p, 3.0))
        })
        .collect();
    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.4)
        .map(|(n, p, f, se, _)| format!("{n} p={p}: {f} (se {se:.2e})"))
        .collect();
    let worst_z = results
        .iter()
        .map(|(_, p, f, se, _)| (f - p).abs() / se)
        .fold(0.0, f64::max);
    let elapsed = start.elapsed();
    let ok = failed.is_empty() && elapsed < Duration::from_secs(60);
    report(
        4,
        ok,
        elapsed,
        &format!(
            "{}/{} cells within 3 standard errors, largest deviation {worst_z:.2} se; failures: [{}]",
            results.len() - failed.len(),
            results.len(),
            failed.join("; ")
        ),
    );
    assert!(ok);
}

fn day(open: f64, high: f64, low: f64) -> LiquidationDay {
    LiquidationDay {
        date: NaiveDate::from_ymd_opt(2020, 6, 1).unwrap(),
        open,
        high,
        low,
        close: open,
        volume: 1.0,
        open_interest: 1.0,
        long_liq: 0.0,
        short_liq: 0.0,
    }
}

#[test]
fn criterion_5_property_suite() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = Vec::new();

    for _ in 0..10_000 {
        let f = 10f64.powf(rng.random_range(0.0..5.0));
        let d = rng.random_range(1e-4..0.9999);
        let n = rng.random_range(1.0..1e6);
        let exit = f * rng.random_range(0.01..10.0);
        let long = payoff(Side::Long, n, f, exit).unwrap();
        let short = payoff(Side::Short, n, f, exit).unwrap();
        if long + short != 0.0 {
            failures.push(format!("antisymmetry F={f} exit={exit}"));
        }
        let long_loss = payoff(Side::Long, n, f, f * (1.0 - d)).unwrap().abs();
        let short_loss = payoff(Side::Short, n, f, f * (1.0 + d)).unwrap().abs();
        if !(long_loss > short_loss) {
            failures.push(format!("loss asymmetry F={f} d={d}"));
        }
    }

    let mut trigger_err: f64 = 0.0;
    let mut return_err: f64 = 0.0;
    for _ in 0..10_000 {
        let l = rng.random_range(1.01..99.99);
        let open = 10f64.powf(rng.random_range(0.0..5.0));
        let low = trigger_price(Side::Long, open, l).unwrap();
        let high = trigger_price(Side::Short, open, l).unwrap();
        let (ll, ls) = implied_leverage(&day(open, high, low), 100.0).unwrap();
        trigger_err = trigger_err.max((ll.value - l).abs() / l).max((ls.value - l).abs() / l);
        if ll.at_cap || ls.at_cap {
            failures.push(format!("cap flagged below cap L={l}"));
        }

        // Returns implied by L, on a unit open so low/high carry them exactly.
        let r_min = -1.0 / (l + 1.0);
        let r_max = 1.0 / (l - 1.0);
        let d = day(1.0, 1.0 + r_max, 1.0 + r_min);
        let (ll, ls) = implied_leverage(&d, 100.0).unwrap();
        return_err = return_err.max((ll.value - l).abs() / l).max((ls.value - l).abs() / l);
    }
    if trigger_err > 1e-12 {
        failures.push(format!("leverage/trigger relative error {trigger_err:e}"));
    }
    if return_err > 1e-12 {
        failures.push(format!("leverage/return relative error {return_err:e}"));
    }

    for _ in 0..1_000 {
        let n = rng.random_range(2..=8usize);
        let len = rng.random_range(n..=60);
        let xs: Vec<f64> = (0..len).map(|_| rng.random_range(-10.0..10.0)).collect();
        let be = block_extremes_of(&xs, n).unwrap();
        let blocks = len / n;
        let mut maxima = Vec::new();
        let mut minima = Vec::new();
        for b in 0..blocks {
            let mut hi = f64::NEG_INFINITY;
            let mut lo = f64::INFINITY;
            for j in b * n..(b + 1) * n {
                hi = hi.max(xs[j]);
                lo = lo.min(xs[j]);
            }
            maxima.push(hi);
            minima.push(lo);
        }
        if be.maxima != maxima || be.minima != minima {
            failures.push(format!("brute force mismatch len={len} n={n}"));
        }
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        let nb = block_extremes_of(&neg, n).unwrap();
        if nb.maxima != be.negated_minima() || nb.negated_minima() != be.maxima {
            failures.push(format!("negation symmetry len={len} n={n}"));
        }
    }

    let elapsed = start.elapsed();
    let ok = failures.is_empty() && elapsed < Duration::from_secs(10);
    report(
        5,
        ok,
        elapsed,
        &format!(
            "payoff 10000 draws, leverage roundtrips max relative error {trigger_err:.1e}/{return_err:.1e}, \
             1000 block series; failures: [{}]",
            failures.join("; ")
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_6_end_to_end_determinism() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    synthetic::write_fixture(dir.path(), 50_000, 372, 7).unwrap();
    let cfg = RunConfig::load(dir.path().join("config.toml")).unwrap();
    let a = dir.path().join("run_a");
    let b = dir.path().join("run_b");
    let ma = run_pipeline(&cfg.clone().with_overrides(None, Some(a.clone()))).unwrap();
    let mb = run_pipeline(&cfg.with_overrides(None, Some(b.clone()))).unwrap();

    let mut names: Vec<_> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let mut other: Vec<_> = std::fs::read_dir(&b)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    other.sort();
    let differing: Vec<String> = names
        .iter()
        .filter(|n| std::fs::read(a.join(n)).unwrap() != std::fs::read(b.join(n)).unwrap())
        .map(|n| n.to_string_lossy().into_owned())
        .collect();
    let ok = names == other && differing.is_empty() && ma == mb && names.len() > 10;
    report(
        6,
        ok,
        start.elapsed(),
        &format!("{} files compared, differing: [{}]", names.len(), differing.join(", ")),
    );
    assert!(ok);
}

#[test]
fn criterion_7_desk_scale_note() {
    // Exact summary, parameter and liquidation tables need the original
    // exchange datasets; only the output layout is checked here.
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    synthetic::write_fixture(dir.path(), 50_000, 372, 11).unwrap();
    let cfg = RunConfig::load(dir.path().join("config.toml")).unwrap();
    run_pipeline(&cfg).unwrap();
    let out = cfg.output_path();
    let header = |f: &str| {
        std::fs::read_to_string(out.join(f))
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string()
    };
    let t1 = header("table1.csv");
    let t4 = header("table4.csv");
    let layout = t1.starts_with("Variable,standard_5min")
        && t4 == "Variables,r_min,r_max,long_liq_m,short_liq_m,SI,p_long_pct,p_short_pct,L_long,L_short";
    println!(
        "criterion 7: DOCUMENTED ({:.2}s) values need the original exchange data; table layout {}",
        start.elapsed().as_secs_f64(),
        if layout { "matches" } else { "differs" }
    );
    assert!(layout);
}
