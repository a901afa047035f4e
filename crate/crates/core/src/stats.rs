//! Small statistical toolkit used by the estimators and the test suites:
//! summary statistics, two-sample Kolmogorov–Smirnov, chi-square
//! goodness-of-fit, energy distance, and bootstrap resampling.

use rand::Rng;
use statrs::function::gamma::gamma_ur;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n - 1 denominator).
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

/// Standard error of the sample mean.
pub fn std_err(xs: &[f64]) -> f64 {
    std_dev(xs) / (xs.len() as f64).sqrt()
}

/// Median by sorting a copy; mean of the central pair for even lengths.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if !n.is_multiple_of(2) {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Two-sample Kolmogorov–Smirnov statistic, sup |F_a - F_b|.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "empty KS sample");
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut ia, mut ib) = (0usize, 0usize);
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut stat = 0.0f64;
    while ia < a.len() && ib < b.len() {
        let x = a[ia].min(b[ib]);
        while ia < a.len() && a[ia] <= x {
            ia += 1;
        }
        while ib < b.len() && b[ib] <= x {
            ib += 1;
        }
        fa = ia as f64 / na;
        fb = ib as f64 / nb;
        stat = stat.max((fa - fb).abs());
    }
    let _ = (fa, fb);
    stat
}

/// Asymptotic two-sample KS p-value via the Kolmogorov tail series with the
/// small-sample correction of Stephens.
pub fn ks_p_value(stat: f64, n: usize, m: usize) -> f64 {
    let ne = (n as f64 * m as f64) / (n as f64 + m as f64);
    let sq = ne.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * stat;
    kolmogorov_tail(lambda)
}

/// Q_KS(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2).
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Pearson chi-square statistic against given expected counts.
pub fn chi_square_statistic(observed: &[f64], expected: &[f64]) -> f64 {
    assert_eq!(observed.len(), expected.len());
    observed
        .iter()
        .zip(expected)
        .map(|(o, e)| {
            assert!(*e > 0.0, "expected count must be positive");
            (o - e) * (o - e) / e
        })
        .sum()
}

/// Upper-tail p-value of a chi-square statistic with `df` degrees of freedom.
pub fn chi_square_p(stat: f64, df: f64) -> f64 {
    if stat <= 0.0 {
        return 1.0;
    }
    gamma_ur(df / 2.0, stat / 2.0)
}

/// Chi-square goodness-of-fit p-value for counts against a uniform law over
/// the cells. Degrees of freedom: cells - 1.
pub fn chi_square_uniform_p(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let obs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let exp = vec![expected; counts.len()];
    chi_square_p(chi_square_statistic(&obs, &exp), (counts.len() - 1) as f64)
}

/// Energy distance between two samples of `dim`-dimensional points stored
/// flat. Returns the V-statistic 2 E|X-Y| - E|X-X'| - E|Y-Y'|, which is
/// nonnegative and zero iff the empirical laws coincide.
pub fn energy_distance(a: &[f64], b: &[f64], dim: usize) -> f64 {
    let na = a.len() / dim;
    let nb = b.len() / dim;
    assert!(na > 0 && nb > 0, "empty energy-distance sample");
    let d = |p: &[f64], q: &[f64]| -> f64 {
        p.iter()
            .zip(q)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let mut cross = 0.0;
    for i in 0..na {
        for j in 0..nb {
            cross += d(&a[i * dim..(i + 1) * dim], &b[j * dim..(j + 1) * dim]);
        }
    }
    cross /= (na * nb) as f64;
    let mut within_a = 0.0;
    for i in 0..na {
        for j in 0..na {
            within_a += d(&a[i * dim..(i + 1) * dim], &a[j * dim..(j + 1) * dim]);
        }
    }
    within_a /= (na * na) as f64;
    let mut within_b = 0.0;
    for i in 0..nb {
        for j in 0..nb {
            within_b += d(&b[i * dim..(i + 1) * dim], &b[j * dim..(j + 1) * dim]);
        }
    }
    within_b /= (nb * nb) as f64;
    (2.0 * cross - within_a - within_b).max(0.0)
}

/// Pearson correlation coefficient.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let (ma, mb) = (mean(a), mean(b));
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for (x, y) in a.iter().zip(b) {
        num += (x - ma) * (y - mb);
        da += (x - ma) * (x - ma);
        db += (y - mb) * (y - mb);
    }
    num / (da.sqrt() * db.sqrt())
}

/// One bootstrap resample of indices `0..n` drawn with replacement.
pub fn bootstrap_indices<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}
