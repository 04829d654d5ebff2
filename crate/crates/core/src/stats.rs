//! Small statistical toolbox backing bias verification and test oracles:
//! two-sample KS, proportion z-tests, a 2x2 chi-square, and rank-based AUC.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Survival function of the standard normal.
pub fn normal_sf(z: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("unit normal");
    1.0 - n.cdf(z)
}

/// Two-sided p-value for a z statistic.
pub fn z_two_sided_p(z: f64) -> f64 {
    if !z.is_finite() {
        return 0.0;
    }
    (2.0 * normal_sf(z.abs())).clamp(0.0, 1.0)
}

/// Pooled two-proportion z-test of H0: p_a == p_b. Returns (z, two-sided p).
pub fn two_proportion_z(pos_a: u64, n_a: u64, pos_b: u64, n_b: u64) -> (f64, f64) {
    if n_a == 0 || n_b == 0 {
        return (0.0, 1.0);
    }
    let pa = pos_a as f64 / n_a as f64;
    let pb = pos_b as f64 / n_b as f64;
    let pool = (pos_a + pos_b) as f64 / (n_a + n_b) as f64;
    let var = pool * (1.0 - pool) * (1.0 / n_a as f64 + 1.0 / n_b as f64);
    if var <= 0.0 {
        return if pa == pb { (0.0, 1.0) } else { (f64::INFINITY, 0.0) };
    }
    let z = (pa - pb) / var.sqrt();
    (z, z_two_sided_p(z))
}

/// Delta-method z-test of H0: p_a == c * p_b. Returns (z, two-sided p).
pub fn prevalence_ratio_z(pos_a: u64, n_a: u64, pos_b: u64, n_b: u64, c: f64) -> (f64, f64) {
    if n_a == 0 || n_b == 0 {
        return (0.0, 1.0);
    }
    let pa = pos_a as f64 / n_a as f64;
    let pb = pos_b as f64 / n_b as f64;
    let var = pa * (1.0 - pa) / n_a as f64 + c * c * pb * (1.0 - pb) / n_b as f64;
    if var <= 0.0 {
        return if pa == c * pb { (0.0, 1.0) } else { (f64::INFINITY, 0.0) };
    }
    let z = (pa - c * pb) / var.sqrt();
    (z, z_two_sided_p(z))
}

/// Two-sample Kolmogorov-Smirnov test. Returns (D, asymptotic two-sided p).
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    if xs.is_empty() || ys.is_empty() {
        return (0.0, 1.0);
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(|p, q| p.partial_cmp(q).expect("finite samples"));
    b.sort_by(|p, q| p.partial_cmp(q).expect("finite samples"));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    (d, ks_q(lambda))
}

/// Asymptotic KS tail probability Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2).
fn ks_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-12 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Pearson chi-square independence test for a 2x2 contingency table
/// (rows: group, cols: label). Returns (chi2, p) with 1 degree of freedom.
pub fn chi2_independence_2x2(table: [[u64; 2]; 2]) -> (f64, f64) {
    let row: [f64; 2] = [
        (table[0][0] + table[0][1]) as f64,
        (table[1][0] + table[1][1]) as f64,
    ];
    let col: [f64; 2] = [
        (table[0][0] + table[1][0]) as f64,
        (table[0][1] + table[1][1]) as f64,
    ];
    let total = row[0] + row[1];
    if total == 0.0 || row.contains(&0.0) || col.contains(&0.0) {
        return (0.0, 1.0);
    }
    let mut chi2 = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            let expected = row[r] * col[c] / total;
            let diff = table[r][c] as f64 - expected;
            chi2 += diff * diff / expected;
        }
    }
    let dist = ChiSquared::new(1.0).expect("dof 1");
    (chi2, (1.0 - dist.cdf(chi2)).clamp(0.0, 1.0))
}

/// Rank-based AUC with midranks for ties. Returns 0.5 when a class is absent.
pub fn rank_auc(scores: &[f64], labels: &[bool]) -> f64 {
    assert_eq!(scores.len(), labels.len());
    let npos = labels.iter().filter(|&&l| l).count();
    let nneg = labels.len() - npos;
    if npos == 0 || nneg == 0 {
        return 0.5;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].partial_cmp(&scores[j]).expect("finite scores"));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // midrank of the tie block [i, j], ranks are 1-based
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let npos = npos as f64;
    (rank_sum_pos - npos * (npos + 1.0) / 2.0) / (npos * nneg as f64)
}

/// Median of a slice; averages the two middle elements for even lengths.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Deterministic seed mixer (splitmix64) for deriving per-stage sub-seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_identical_samples_does_not_reject() {
        let xs: Vec<f64> = (0..500).map(|i| i as f64 / 500.0).collect();
        let (d, p) = ks_two_sample(&xs, &xs);
        assert!(d.abs() < 1e-12);
        assert!(p > 0.99);
    }

    #[test]
    fn ks_disjoint_samples_rejects() {
        let xs: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let ys: Vec<f64> = (0..200).map(|i| 1000.0 + i as f64).collect();
        let (d, p) = ks_two_sample(&xs, &ys);
        assert!((d - 1.0).abs() < 1e-12);
        assert!(p < 1e-6);
    }

    #[test]
    fn two_proportion_detects_doubled_rate() {
        let (_, p) = two_proportion_z(200, 10_000, 100, 10_000);
        assert!(p < 0.01);
        let (_, p_eq) = two_proportion_z(100, 10_000, 100, 10_000);
        assert!(p_eq > 0.9);
    }

    #[test]
    fn ratio_test_accepts_true_ratio() {
        let (_, p) = prevalence_ratio_z(200, 10_000, 100, 10_000, 2.0);
        assert!(p > 0.9);
    }

    #[test]
    fn chi2_independent_table_is_quiet() {
        let (chi2, p) = chi2_independence_2x2([[500, 500], [500, 500]]);
        assert!(chi2 < 1e-9);
        assert!(p > 0.99);
    }

    #[test]
    fn auc_perfect_and_random() {
        let scores = [0.1, 0.2, 0.8, 0.9];
        let labels = [false, false, true, true];
        assert!((rank_auc(&scores, &labels) - 1.0).abs() < 1e-12);
        let flipped = [true, true, false, false];
        assert!((rank_auc(&scores, &flipped) - 0.0).abs() < 1e-12);
        let ties = [0.5, 0.5, 0.5, 0.5];
        assert!((rank_auc(&ties, &labels) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn mix_seed_is_stable_and_spreads() {
        assert_eq!(mix_seed(7, 1), mix_seed(7, 1));
        assert_ne!(mix_seed(7, 1), mix_seed(7, 2));
        assert_ne!(mix_seed(7, 1), mix_seed(8, 1));
    }
}
