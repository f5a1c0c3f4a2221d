//! Slow, independent reimplementations of the inferential statistics, used
//! to cross-check the library on small seeded instances.
//!
//! Tail probabilities come from direct numerical integration of the
//! densities, not from the continued fractions the library uses.

#![allow(dead_code, clippy::excessive_precision)]

use std::collections::BTreeMap;
use std::f64::consts::PI;

use inboxaudit_core::classify::cohens_kappa;
use inboxaudit_core::stats::special::{beta_inc, gamma_q};
use inboxaudit_core::stats::{
    chi_squared_independence, kruskal_wallis, one_way_anova, pearson, spearman, ContingencyTable,
    Df,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOL: f64 = 1e-9;
pub const INSTANCES: u64 = 24;

// Regularized upper incomplete gamma Q(a, x), 20-digit reference values.
pub const GAMMA_Q: [(f64, f64, f64); 10] = [
    (0.5, 0.1, 0.65472084601857702044),
    (0.5, 2.0, 0.045500263896358414401),
    (1.0, 1.0, 0.3678794411714423216),
    (2.5, 0.7, 0.92431327280166694699),
    (3.0, 5.0, 0.12465201948308114129),
    (7.0, 3.5, 0.93471190297104631327),
    (7.0, 14.0, 0.014227918344261548478),
    (10.0, 25.0, 0.00022147663824878358122),
    (0.25, 0.01, 0.65181354723951595216),
    (50.0, 45.0, 0.75319796559982972729),
];

// Regularized incomplete beta I_x(a, b).
pub const BETA_INC: [(f64, f64, f64, f64); 10] = [
    (0.5, 0.5, 0.3, 0.36901011956554537504),
    (1.0, 1.0, 0.42, 0.42),
    (2.0, 3.0, 0.2, 0.1808),
    (2.0, 3.0, 0.8, 0.9728),
    (3.5, 50.5, 0.05, 0.37749246514285783067),
    (50.5, 3.5, 0.9, 0.14301430975789751053),
    (0.7, 1.9, 0.6, 0.88385224515398185547),
    (10.0, 10.0, 0.5, 0.5),
    (3.5, 0.5, 0.95, 0.563027803698539893),
    (25.0, 5.0, 0.7, 0.037894911252999531274),
];

/// Worst relative error of the special functions over the reference points.
pub fn special_function_error() -> f64 {
    let g = GAMMA_Q
        .iter()
        .map(|&(a, x, want)| ((gamma_q(a, x) - want) / want).abs());
    let b = BETA_INC
        .iter()
        .map(|&(a, b, x, want)| ((beta_inc(a, b, x) - want) / want).abs());
    g.chain(b).fold(0.0, f64::max)
}

/// Γ(d/2) for a positive integer d, exactly by recursion.
fn gamma_half(d: u32) -> f64 {
    let (mut g, mut x) = if d % 2 == 0 {
        (1.0, 1.0)
    } else {
        (PI.sqrt(), 0.5)
    };
    while x + 0.5 < d as f64 / 2.0 {
        g *= x;
        x += 1.0;
    }
    g
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// P(X > x) for X ~ χ²(k), by integrating the density over t = √u.
pub fn chi2_sf_oracle(x: f64, k: u32) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let norm = 2f64.powf(k as f64 / 2.0) * gamma_half(k);
    let dens = |t: f64| 2.0 * t.powi(k as i32 - 1) * (-t * t / 2.0).exp() / norm;
    let lo = x.sqrt();
    let hi = lo + 40.0 + (k as f64).sqrt() * 4.0;
    simpson(dens, lo, hi, 40_000)
}

/// I_x(d1/2, d2/2) by integrating over x = sin²θ, where the integrand is a
/// smooth trigonometric polynomial for integer d1, d2.
pub fn beta_inc_oracle(d1: u32, d2: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let b = gamma_half(d1) * gamma_half(d2) / gamma_half(d1 + d2);
    let f = |th: f64| 2.0 * th.sin().powi(d1 as i32 - 1) * th.cos().powi(d2 as i32 - 1) / b;
    simpson(f, 0.0, x.sqrt().asin(), 40_000)
}

pub fn f_sf_oracle(f: f64, d1: u32, d2: u32) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    beta_inc_oracle(d2, d1, d2 as f64 / (d2 as f64 + d1 as f64 * f))
}

pub fn t_two_sided_oracle(t: f64, df: u32) -> f64 {
    beta_inc_oracle(df, 1, df as f64 / (df as f64 + t * t))
}

/// χ² = N (Σ O² / (R·C) − 1) over rows and columns with nonzero totals.
pub fn chi2_oracle(counts: &[Vec<u64>]) -> (f64, u32) {
    let rows: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<u64> = (0..counts[0].len())
        .map(|j| counts.iter().map(|r| r[j]).sum())
        .collect();
    let n: u64 = rows.iter().sum();
    let mut s = 0.0;
    for (i, r) in counts.iter().enumerate() {
        for (j, &o) in r.iter().enumerate() {
            if rows[i] > 0 && cols[j] > 0 {
                s += (o * o) as f64 / (rows[i] * cols[j]) as f64;
            }
        }
    }
    let r = rows.iter().filter(|&&x| x > 0).count() as u32;
    let c = cols.iter().filter(|&&x| x > 0).count() as u32;
    (n as f64 * (s - 1.0), (r - 1) * (c - 1))
}

/// F from total minus within sums of squares, observation by observation.
pub fn anova_oracle(groups: &[Vec<f64>]) -> (f64, u32, u32) {
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = all.len();
    let grand = all.iter().sum::<f64>() / n as f64;
    let sst: f64 = all.iter().map(|x| (x - grand) * (x - grand)).sum();
    let mut ssw = 0.0;
    for g in groups {
        for x in g {
            let m = g.iter().sum::<f64>() / g.len() as f64;
            ssw += (x - m) * (x - m);
        }
    }
    let (d1, d2) = (groups.len() as u32 - 1, (n - groups.len()) as u32);
    (((sst - ssw) / d1 as f64) / (ssw / d2 as f64), d1, d2)
}

/// Rank = (#less) + (#equal + 1) / 2, by pairwise comparison.
pub fn ranks_oracle(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|x| {
            let less = xs.iter().filter(|y| *y < x).count() as f64;
            let eq = xs.iter().filter(|y| *y == x).count() as f64;
            less + (eq + 1.0) / 2.0
        })
        .collect()
}

/// H = 12/(N(N+1)) Σ nᵢ (R̄ᵢ − (N+1)/2)², divided by the tie correction.
pub fn kw_oracle(groups: &[Vec<f64>]) -> (f64, u32) {
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let ranks = ranks_oracle(&all);
    let n = all.len() as f64;
    let mut h = 0.0;
    let mut at = 0;
    for g in groups {
        let mean_rank = ranks[at..at + g.len()].iter().sum::<f64>() / g.len() as f64;
        h += g.len() as f64 * (mean_rank - (n + 1.0) / 2.0).powi(2);
        at += g.len();
    }
    h *= 12.0 / (n * (n + 1.0));
    let mut mult: BTreeMap<u64, f64> = BTreeMap::new();
    for x in &all {
        *mult.entry(x.to_bits()).or_default() += 1.0;
    }
    let ties: f64 = mult.values().map(|t| t * t * t - t).sum();
    (h / (1.0 - ties / (n * n * n - n)), groups.len() as u32 - 1)
}

pub fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

/// Kappa from the full confusion matrix.
pub fn kappa_oracle(a: &[u8], b: &[u8], k: u8) -> f64 {
    let k = k as usize;
    let mut m = vec![vec![0.0; k]; k];
    for (x, y) in a.iter().zip(b) {
        m[*x as usize][*y as usize] += 1.0;
    }
    let n = a.len() as f64;
    let po = (0..k).map(|i| m[i][i]).sum::<f64>() / n;
    let pe = (0..k)
        .map(|i| m[i].iter().sum::<f64>() * (0..k).map(|j| m[j][i]).sum::<f64>())
        .sum::<f64>()
        / (n * n);
    (po - pe) / (1.0 - pe)
}

fn small_ints(rng: &mut ChaCha8Rng, n: usize, hi: i32) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0..hi) as f64).collect()
}

fn groups(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let g = rng.random_range(2..=4);
    let total = rng.random_range(g + 4..=12);
    let mut sizes = vec![1; g];
    for _ in g..total {
        sizes[rng.random_range(0..g)] += 1;
    }
    sizes.into_iter().map(|s| small_ints(rng, s, 9)).collect()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn df_one(df: Df) -> f64 {
    match df {
        Df::One(d) => d,
        Df::Two(..) => panic!("expected a single df"),
    }
}

/// Worst (statistic, p-value) discrepancy against the oracles for each
/// test over `INSTANCES` seeded inputs with n ≤ 12.
pub fn discrepancies() -> Vec<(&'static str, f64, f64)> {
    let mut out = Vec::new();

    let (mut es, mut ep) = (0.0f64, 0.0f64);
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (r, c) = (rng.random_range(2..=4), rng.random_range(2..=4));
        let counts: Vec<Vec<u64>> = (0..r)
            .map(|_| (0..c).map(|_| rng.random_range(1..12)).collect())
            .collect();
        let labels = |p: &str, k: usize| (0..k).map(|i| format!("{p}{i}")).collect();
        let t = chi_squared_independence(
            &ContingencyTable::new(labels("r", r), labels("c", c), counts.clone()).unwrap(),
        )
        .unwrap();
        let (stat, df) = chi2_oracle(&counts);
        assert_eq!(df_one(t.df), df as f64);
        es = es.max(rel_err(t.statistic, stat));
        ep = ep.max((t.p_value - chi2_sf_oracle(stat, df)).abs());
    }
    out.push(("chi-squared", es, ep));

    let (mut es, mut ep) = (0.0f64, 0.0f64);
    let mut seed = 100;
    let mut done = 0;
    while done < INSTANCES {
        seed += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = groups(&mut rng);
        let (f, d1, d2) = anova_oracle(&g);
        if !f.is_finite() {
            continue;
        }
        let t = one_way_anova(&g).unwrap();
        assert_eq!(t.df, Df::Two(d1 as f64, d2 as f64));
        es = es.max(rel_err(t.statistic, f));
        ep = ep.max((t.p_value - f_sf_oracle(f, d1, d2)).abs());
        done += 1;
    }
    out.push(("one-way anova", es, ep));

    let (mut es, mut ep) = (0.0f64, 0.0f64);
    for seed in 200..200 + INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = groups(&mut rng);
        let (h, df) = kw_oracle(&g);
        let t = kruskal_wallis(&g).unwrap();
        es = es.max(rel_err(t.statistic, h));
        ep = ep.max((t.p_value - chi2_sf_oracle(h, df)).abs());
    }
    out.push(("kruskal-wallis", es, ep));

    for (name, ranked) in [("pearson", false), ("spearman", true)] {
        let (mut es, mut ep) = (0.0f64, 0.0f64);
        for seed in 300..300 + INSTANCES {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(4..=12);
            let x = small_ints(&mut rng, n, 10);
            let y: Vec<f64> = x
                .iter()
                .map(|v| v + rng.random_range(-4..5) as f64)
                .collect();
            let (ox, oy) = if ranked {
                (ranks_oracle(&x), ranks_oracle(&y))
            } else {
                (x.clone(), y.clone())
            };
            let r = pearson_oracle(&ox, &oy);
            if !r.is_finite() || r.abs() > 1.0 - 1e-12 {
                continue;
            }
            let c = if ranked {
                spearman(&x, &y)
            } else {
                pearson(&x, &y)
            }
            .unwrap();
            let df = n as u32 - 2;
            es = es.max((c.r - r).abs());
            ep = ep.max(
                (c.p_value - t_two_sided_oracle(r * (df as f64 / (1.0 - r * r)).sqrt(), df)).abs(),
            );
        }
        out.push((name, es, ep));
    }

    let mut ek = 0.0f64;
    for seed in 400..400 + INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(3..=12);
        let a: Vec<u8> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let b: Vec<u8> = a
            .iter()
            .map(|&x| {
                if rng.random_bool(0.7) {
                    x
                } else {
                    rng.random_range(0..3)
                }
            })
            .collect();
        let want = kappa_oracle(&a, &b, 3);
        if !want.is_finite() {
            continue;
        }
        ek = ek.max((cohens_kappa(&a, &b).unwrap() - want).abs());
    }
    out.push(("cohen kappa", ek, 0.0));
    out
}
