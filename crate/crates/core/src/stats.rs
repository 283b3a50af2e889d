//! Statistical routines: OLS slopes, Spearman correlation, one-way ANOVA,
//! Tukey HSD with Monte Carlo studentized-range p-values, and t-based
//! confidence intervals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ScoreSeries, Skill};

pub const DEFAULT_TUKEY_DRAWS: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeResult {
    pub skill: Skill,
    pub slope: f64,
    pub n_points: usize,
}

/// Least-squares slope of score on session index.
pub fn ols_slope(series: &ScoreSeries) -> Result<SlopeResult> {
    let xs: Vec<f64> = series.points.iter().map(|p| f64::from(p.0)).collect();
    let ys: Vec<f64> = series.points.iter().map(|p| p.1).collect();
    let slope = slope_xy(&xs, &ys)?;
    Ok(SlopeResult {
        skill: series.skill,
        slope,
        n_points: xs.len(),
    })
}

pub fn slope_xy(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument("x and y differ in length".into()));
    }
    if xs.len() < 2 {
        return Err(Error::Undefined(format!("slope needs 2 points, got {}", xs.len())));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx == 0.0 {
        return Err(Error::Undefined("slope with zero x-variance".into()));
    }
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub rho: f64,
    /// Two-sided p-value; `None` when the sample is too small to test.
    pub p_value: Option<f64>,
    pub n: usize,
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("correlation with zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho with a two-sided p-value from the t approximation
/// `t = rho·sqrt((n-2)/(1-rho²))` on `n-2` degrees of freedom.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument("x and y differ in length".into()));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Undefined(format!("correlation needs 2 points, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite value in correlation input".into()));
    }
    let rho = pearson(&average_ranks(x), &average_ranks(y))?;
    let p_value = (n >= 4).then(|| {
        if rho.abs() >= 1.0 {
            0.0
        } else {
            let df = (n - 2) as f64;
            let t = rho * (df / (1.0 - rho * rho)).sqrt();
            student_t_two_sided(t, df)
        }
    });
    Ok(CorrelationResult { rho, p_value, n })
}

/// Exact two-sided permutation p-value for Spearman's rho, enumerating all
/// `n!` orderings of `y`. Limited to `n <= 10`.
pub fn spearman_exact_p(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len();
    if n > 10 {
        return Err(Error::InvalidArgument(format!("exact permutation test limited to n <= 10, got {n}")));
    }
    let observed = spearman(x, y)?.rho.abs();
    let rx = average_ranks(x);
    let mut ry = average_ranks(y);
    let mut hits = 0u64;
    let mut total = 0u64;
    let tol = 1e-12;
    heap_permutations(&mut ry, &mut |perm| {
        total += 1;
        if let Ok(r) = pearson(&rx, perm) {
            if r.abs() >= observed - tol {
                hits += 1;
            }
        }
    });
    Ok(hits as f64 / total as f64)
}

fn heap_permutations(v: &mut [f64], visit: &mut impl FnMut(&[f64])) {
    let n = v.len();
    let mut c = vec![0usize; n];
    visit(v);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                v.swap(0, i);
            } else {
                v.swap(c[i], i);
            }
            visit(v);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub group_i: usize,
    pub group_j: usize,
    /// `mean_j - mean_i`.
    pub mean_diff: f64,
    pub q_stat: f64,
    pub p_adj: f64,
    /// Monte Carlo standard error of `p_adj`.
    pub p_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f_stat: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p_value: f64,
    pub ms_within: f64,
    pub group_means: Vec<f64>,
    pub group_sizes: Vec<usize>,
    pub pairwise: Vec<PairwiseComparison>,
}

pub fn one_way_anova(groups: &[Vec<f64>]) -> Result<AnovaResult> {
    if groups.len() < 2 {
        return Err(Error::Undefined(format!("ANOVA needs 2 groups, got {}", groups.len())));
    }
    if let Some((i, g)) = groups.iter().enumerate().find(|(_, g)| g.len() < 2) {
        return Err(Error::Undefined(format!("group {i} has {} values, need 2", g.len())));
    }
    if groups.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite value in ANOVA input".into()));
    }
    let n_total: usize = groups.iter().map(Vec::len).sum();
    let grand = groups.iter().flatten().sum::<f64>() / n_total as f64;
    let means: Vec<f64> = groups.iter().map(|g| g.iter().sum::<f64>() / g.len() as f64).collect();
    let ssb: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.len() as f64 * (m - grand).powi(2))
        .sum();
    let ssw: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.iter().map(|v| (v - m).powi(2)).sum::<f64>())
        .sum();
    if ssw <= 0.0 {
        return Err(Error::Undefined("ANOVA with zero within-group variance".into()));
    }
    let df_between = groups.len() - 1;
    let df_within = n_total - groups.len();
    let ms_within = ssw / df_within as f64;
    let f_stat = (ssb / df_between as f64) / ms_within;
    Ok(AnovaResult {
        f_stat,
        df_between,
        df_within,
        p_value: f_survival(f_stat, df_between as f64, df_within as f64),
        ms_within,
        group_means: means,
        group_sizes: groups.iter().map(Vec::len).collect(),
        pairwise: Vec::new(),
    })
}

/// Tukey–Kramer `q` for every pair of groups with p-values from a seeded
/// Monte Carlo sample of the studentized range distribution
/// (`k = #groups`, `df = df_within`).
pub fn tukey_hsd(groups: &[Vec<f64>], anova: &AnovaResult, seed: u64, draws: usize) -> Result<Vec<PairwiseComparison>> {
    if groups.len() != anova.group_sizes.len()
        || groups.iter().zip(&anova.group_sizes).any(|(g, &n)| g.len() != n)
    {
        return Err(Error::InvalidArgument("ANOVA result does not match the groups".into()));
    }
    if draws == 0 {
        return Err(Error::InvalidArgument("Monte Carlo draws must be positive".into()));
    }
    let sample = studentized_range_sample(groups.len(), anova.df_within as f64, seed, draws)?;
    Ok(tukey_from_sample(anova, &sample))
}

/// Pairwise Tukey–Kramer comparisons against a sorted studentized-range sample.
pub fn tukey_from_sample(anova: &AnovaResult, sample: &[f64]) -> Vec<PairwiseComparison> {
    let draws = sample.len();
    let k = anova.group_means.len();
    let mut out = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in (i + 1)..k {
            let diff = anova.group_means[j] - anova.group_means[i];
            let se = (anova.ms_within / 2.0
                * (1.0 / anova.group_sizes[i] as f64 + 1.0 / anova.group_sizes[j] as f64))
                .sqrt();
            let q = diff.abs() / se;
            let above = draws - sample.partition_point(|&v| v < q);
            let p = above as f64 / draws as f64;
            out.push(PairwiseComparison {
                group_i: i,
                group_j: j,
                mean_diff: diff,
                q_stat: q,
                p_adj: p,
                p_se: (p * (1.0 - p) / draws as f64).sqrt(),
            });
        }
    }
    out
}

/// Sorted draws of `(max Z - min Z) / sqrt(V / df)` with `k` standard normals
/// `Z` and `V ~ χ²(df)`.
pub fn studentized_range_sample(k: usize, df: f64, seed: u64, draws: usize) -> Result<Vec<f64>> {
    if k < 2 || df.is_nan() || df <= 0.0 {
        return Err(Error::InvalidArgument(format!("studentized range needs k >= 2 and df > 0 (k={k}, df={df})")));
    }
    let chi = ChiSquared::new(df).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<f64> = (0..draws)
        .map(|_| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for _ in 0..k {
                let z: f64 = rng.sample(StandardNormal);
                lo = lo.min(z);
                hi = hi.max(z);
            }
            let v: f64 = chi.sample(&mut rng);
            (hi - lo) / (v / df).sqrt()
        })
        .collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

/// Mean with a two-sided t-based confidence interval.
pub fn mean_ci(values: &[f64], level: f64) -> Result<MeanCi> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Undefined(format!("confidence interval needs 2 values, got {n}")));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let half = student_t_quantile_two_sided(level, (n - 1) as f64) * (var / n as f64).sqrt();
    Ok(MeanCi {
        mean,
        lo: mean - half,
        hi: mean + half,
        n,
    })
}

pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

// ---------------------------------------------------------------------------
// Distribution functions

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=1000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// `P(F > f)` for an F distribution with `(d1, d2)` degrees of freedom.
pub fn f_survival(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    incomplete_beta(d2 / (d2 + d1 * f), d2 / 2.0, d1 / 2.0)
}

/// `P(|T| > |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    incomplete_beta(df / (df + t * t), df / 2.0, 0.5)
}

/// Critical value `t*` with `P(|T| <= t*) = level`.
pub fn student_t_quantile_two_sided(level: f64, df: f64) -> f64 {
    assert!(level > 0.0 && level < 1.0);
    let target = 1.0 - level;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while student_t_two_sided(hi, df) > target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if student_t_two_sided(mid, df) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(points: &[(u32, f64)]) -> ScoreSeries {
        ScoreSeries::new(Skill::Fluency, points.to_vec()).unwrap()
    }

    #[test]
    fn slope_examples() {
        assert_eq!(ols_slope(&series(&[(1, 5.0), (2, 5.0), (3, 5.0)])).unwrap().slope, 0.0);
        assert_eq!(ols_slope(&series(&[(1, 1.0), (2, 2.0), (3, 3.0)])).unwrap().slope, 1.0);
        assert!((ols_slope(&series(&[(1, 1.0), (2, 3.0), (3, 2.0)])).unwrap().slope - 0.5).abs() < 1e-15);
        assert!(ols_slope(&series(&[(1, 1.0)])).is_err());
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn spearman_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &[1.0, 3.0, 2.0, 4.0]).unwrap().rho - 0.8).abs() < 1e-12);
        assert_eq!(spearman(&x, &[2.0, 5.0, 9.0, 100.0]).unwrap().rho, 1.0);
        assert_eq!(spearman(&x, &[4.0, 3.0, 2.0, 1.0]).unwrap().rho, -1.0);
        let small = spearman(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!(small.p_value.is_none());
        assert!(spearman(&x, &[1.0; 4]).is_err());
    }

    #[test]
    fn spearman_exact_permutation() {
        // n = 4: Σd² ∈ {0, 2} gives rho ∈ {1, 0.8} (1 + 3 orderings) and
        // Σd² ∈ {18, 20} mirrors them, so |rho| >= 0.8 for 8 of 24 orderings
        let p = spearman_exact_p(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((p - 8.0 / 24.0).abs() < 1e-12, "{p}");
    }

    #[test]
    fn anova_examples() {
        let a = one_way_anova(&[vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0]]).unwrap();
        assert!((a.f_stat - 1.5).abs() < 1e-12);
        assert_eq!((a.df_between, a.df_within), (1, 4));
        assert!((a.ms_within - 1.0).abs() < 1e-12);

        let same = one_way_anova(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(same.f_stat, 0.0);
        assert_eq!(same.p_value, 1.0);

        let far = one_way_anova(&[vec![0.0, 0.1, 0.2], vec![50.0, 50.1, 50.2]]).unwrap();
        assert!(far.p_value < 1e-3);

        assert!(one_way_anova(&[vec![1.0, 1.0], vec![2.0, 2.0]]).is_err());
        assert!(one_way_anova(&[vec![1.0, 2.0]]).is_err());
        assert!(one_way_anova(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn tukey_examples() {
        let groups = vec![vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0]];
        let a = one_way_anova(&groups).unwrap();
        let pairs = tukey_hsd(&groups, &a, 1, 20_000).unwrap();
        assert!((pairs[0].q_stat - 3f64.sqrt()).abs() < 1e-12);

        let same = vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]];
        let a = one_way_anova(&same).unwrap();
        let pairs = tukey_hsd(&same, &a, 1, 1_000).unwrap();
        assert_eq!(pairs[0].q_stat, 0.0);
        assert_eq!(pairs[0].p_adj, 1.0);
    }

    #[test]
    fn tukey_shifted_group() {
        let groups = vec![
            vec![1.0, 1.2, 0.8, 1.1, 0.9],
            vec![1.0, 1.1, 0.9, 1.2, 0.8],
            vec![5.0, 5.2, 4.8, 5.1, 4.9],
        ];
        let a = one_way_anova(&groups).unwrap();
        let pairs = tukey_hsd(&groups, &a, 7, 50_000).unwrap();
        let sig: Vec<(usize, usize)> = pairs
            .iter()
            .filter(|p| p.p_adj < 0.05)
            .map(|p| (p.group_i, p.group_j))
            .collect();
        assert_eq!(sig, vec![(0, 2), (1, 2)]);
    }

    #[test]
    fn studentized_range_two_groups_matches_t() {
        // with k = 2, Q = sqrt(2)|T|; P(Q > q) = P(|T| > q / sqrt 2)
        let s = studentized_range_sample(2, 10.0, 3, 200_000).unwrap();
        let q = 3.0;
        let mc = (s.len() - s.partition_point(|&v| v < q)) as f64 / s.len() as f64;
        let exact = student_t_two_sided(q / 2f64.sqrt(), 10.0);
        assert!((mc - exact).abs() < 0.005, "{mc} vs {exact}");
    }

    #[test]
    fn distribution_references() {
        // ln Γ(0.5) = ln √π
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
        // t(1) is Cauchy: P(|T| > 1) = 0.5
        assert!((student_t_two_sided(1.0, 1.0) - 0.5).abs() < 1e-14);
        // t(2) closed form: P(|T| > t) = 1 - t / sqrt(2 + t²)
        let t: f64 = 1.7;
        assert!((student_t_two_sided(t, 2.0) - (1.0 - t / (2.0 + t * t).sqrt())).abs() < 1e-13);
        // F(2, d2): P(F > f) = (1 + 2f/d2)^(-d2/2)
        let (f, d2): (f64, f64) = (2.3, 7.0);
        assert!((f_survival(f, 2.0, d2) - (1.0 + 2.0 * f / d2).powf(-d2 / 2.0)).abs() < 1e-13);
        assert!((student_t_quantile_two_sided(0.95, 1.0) - 12.706_204_736_174_7).abs() < 1e-9);
    }

    #[test]
    fn ci_contains_mean() {
        let ci = mean_ci(&[1.0, 2.0, 3.0, 4.0], 0.95).unwrap();
        assert_eq!(ci.mean, 2.5);
        // t*(0.975, 3) = 3.182446305284263, se = sqrt(5/12)/sqrt(... ) = 0.6454972
        let half = 3.182_446_305_284_263 * (5.0f64 / 3.0 / 4.0).sqrt();
        assert!((ci.hi - (2.5 + half)).abs() < 1e-9);
    }
}
