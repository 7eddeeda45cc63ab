//! Rank aggregation across datasets: fractional ranks, the Friedman
//! statistic and the Nemenyi critical distance.

use serde::Serialize;

use crate::error::{Error, Result};

/// Studentized-range based `q_0.05` for k = 2..=10 methods.
pub const NEMENYI_Q_05: [f64; 9] = [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164];

/// Upper 5% chi-square quantiles for 1..=9 degrees of freedom.
pub const CHI2_CRITICAL_05: [f64; 9] = [3.841, 5.991, 7.815, 9.488, 11.070, 12.592, 14.067, 15.507, 16.919];

/// Below this many datasets the chi-square approximation is unreliable and
/// reports are flagged.
pub const LOW_N: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    methods: Vec<String>,
    datasets: Vec<String>,
    /// `scores[dataset][method]`, higher is better.
    scores: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn new(methods: Vec<String>, datasets: Vec<String>, scores: Vec<Vec<f64>>) -> Result<Self> {
        if methods.is_empty() || datasets.is_empty() {
            return Err(Error::InvalidArgument("score matrix needs methods and datasets".into()));
        }
        if scores.len() != datasets.len() {
            return Err(Error::InvalidArgument(format!(
                "{} score rows for {} datasets",
                scores.len(),
                datasets.len()
            )));
        }
        for (d, row) in datasets.iter().zip(&scores) {
            if row.len() != methods.len() {
                return Err(Error::InvalidArgument(format!(
                    "row {d} has {} scores for {} methods",
                    row.len(),
                    methods.len()
                )));
            }
            if row.iter().any(|s| !s.is_finite()) {
                return Err(Error::InvalidArgument(format!("row {d} has non-finite scores")));
            }
        }
        Ok(ScoreMatrix {
            methods,
            datasets,
            scores,
        })
    }

    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    pub fn datasets(&self) -> &[String] {
        &self.datasets
    }

    pub fn scores(&self) -> &[Vec<f64>] {
        &self.scores
    }

    pub fn k(&self) -> usize {
        self.methods.len()
    }

    pub fn n(&self) -> usize {
        self.datasets.len()
    }
}

/// Fractional ranks of one row: 1 for the highest score, ties share the mean
/// of the positions they span.
pub fn rank_row(row: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
    let mut ranks = vec![0.0; row.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && row[order[j + 1]] == row[order[i]] {
            j += 1;
        }
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = shared;
        }
        i = j + 1;
    }
    ranks
}

pub fn rank_rows(sm: &ScoreMatrix) -> Vec<Vec<f64>> {
    sm.scores.iter().map(|r| rank_row(r)).collect()
}

pub fn average_ranks(ranks: &[Vec<f64>]) -> Vec<f64> {
    let k = ranks.first().map_or(0, Vec::len);
    (0..k)
        .map(|m| ranks.iter().map(|r| r[m]).sum::<f64>() / ranks.len() as f64)
        .collect()
}

/// `q_α(k) · sqrt(k(k+1) / 6N)`; only α = 0.05 and 2 <= k <= 10 are tabulated.
pub fn nemenyi_cd(k: usize, n: usize, alpha: f64) -> Result<f64> {
    if (alpha - 0.05).abs() > 1e-12 {
        return Err(Error::Unsupported(format!(
            "Nemenyi critical values are only tabulated for alpha = 0.05, got {alpha}"
        )));
    }
    if !(2..=10).contains(&k) {
        return Err(Error::Unsupported(format!(
            "Nemenyi test needs 2 <= k <= 10 methods, got {k}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("Nemenyi test needs at least one dataset".into()));
    }
    let q = NEMENYI_Q_05[k - 2];
    Ok(q * ((k * (k + 1)) as f64 / (6.0 * n as f64)).sqrt())
}

/// Index pairs `(a, b)`, `a < b`, whose average ranks differ by more than `cd`.
pub fn significant_pairs(avg_ranks: &[f64], cd: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for a in 0..avg_ranks.len() {
        for b in a + 1..avg_ranks.len() {
            if (avg_ranks[a] - avg_ranks[b]).abs() > cd {
                out.push((a, b));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Friedman {
    pub chi2: f64,
    pub critical: f64,
    pub significant: bool,
    pub low_n: bool,
}

/// `χ²_F = 12N / (k(k+1)) · (Σ R_j² − k(k+1)²/4)` from average ranks.
pub fn friedman_from_ranks(avg_ranks: &[f64], n: usize) -> Result<Friedman> {
    let k = avg_ranks.len();
    if !(2..=10).contains(&k) {
        return Err(Error::Unsupported(format!("Friedman table covers 2 <= k <= 10, got {k}")));
    }
    let kf = k as f64;
    let sum_sq: f64 = avg_ranks.iter().map(|r| r * r).sum();
    let chi2 = 12.0 * n as f64 / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0).powi(2) / 4.0);
    let critical = CHI2_CRITICAL_05[k - 2];
    Ok(Friedman {
        chi2,
        critical,
        significant: chi2 > critical,
        low_n: n < LOW_N,
    })
}

pub fn friedman_statistic(sm: &ScoreMatrix) -> Result<Friedman> {
    friedman_from_ranks(&average_ranks(&rank_rows(sm)), sm.n())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReport {
    pub methods: Vec<String>,
    #[serde(skip)]
    pub datasets: Vec<String>,
    #[serde(skip)]
    pub ranks: Vec<Vec<f64>>,
    pub avg_ranks: Vec<f64>,
    pub n_datasets: usize,
    pub cd: f64,
    pub alpha: f64,
    pub significant_pairs: Vec<[String; 2]>,
    pub friedman_chi2: f64,
    pub friedman_critical: f64,
    pub low_n: bool,
}

impl RankReport {
    pub fn is_significant(&self, a: &str, b: &str) -> bool {
        self.significant_pairs
            .iter()
            .any(|[x, y]| (x == a && y == b) || (x == b && y == a))
    }

    /// Per-dataset ranks as CSV: `dataset_id,<method>...`.
    pub fn ranks_csv(&self) -> String {
        let mut out = String::from("dataset_id");
        for m in &self.methods {
            out.push(',');
            out.push_str(m);
        }
        out.push('\n');
        for (d, row) in self.datasets.iter().zip(&self.ranks) {
            out.push_str(d);
            for r in row {
                out.push(',');
                out.push_str(&r.to_string());
            }
            out.push('\n');
        }
        out
    }
}

pub fn nemenyi_test(sm: &ScoreMatrix, alpha: f64) -> Result<RankReport> {
    let cd = nemenyi_cd(sm.k(), sm.n(), alpha)?;
    let ranks = rank_rows(sm);
    let avg_ranks = average_ranks(&ranks);
    let friedman = friedman_from_ranks(&avg_ranks, sm.n())?;
    let significant_pairs = significant_pairs(&avg_ranks, cd)
        .into_iter()
        .map(|(a, b)| [sm.methods[a].clone(), sm.methods[b].clone()])
        .collect();
    Ok(RankReport {
        methods: sm.methods.clone(),
        datasets: sm.datasets.clone(),
        ranks,
        avg_ranks,
        n_datasets: sm.n(),
        cd,
        alpha,
        significant_pairs,
        friedman_chi2: friedman.chi2,
        friedman_critical: friedman.critical,
        low_n: friedman.low_n,
    })
}

/// Spearman rank correlation (Pearson correlation of fractional ranks).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ra = rank_row(a);
    let rb = rank_row(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(rows: Vec<Vec<f64>>) -> ScoreMatrix {
        let k = rows[0].len();
        ScoreMatrix::new(
            (0..k).map(|m| format!("m{m}")).collect(),
            (0..rows.len()).map(|d| format!("d{d}")).collect(),
            rows,
        )
        .unwrap()
    }

    #[test]
    fn fractional_ranks() {
        assert_eq!(rank_row(&[0.9, 0.8]), vec![1.0, 2.0]);
        assert_eq!(rank_row(&[0.7, 0.7]), vec![1.5, 1.5]);
        assert_eq!(rank_row(&[0.5, 0.9, 0.9]), vec![3.0, 1.5, 1.5]);
    }

    #[test]
    fn critical_distances() {
        assert!((nemenyi_cd(2, 100, 0.05).unwrap() - 0.196).abs() < 1e-3);
        assert!((nemenyi_cd(2, 86, 0.05).unwrap() - 0.2113).abs() < 1e-3);
        assert!((nemenyi_cd(6, 100, 0.05).unwrap() - 0.754).abs() < 1e-3);
        assert!(matches!(nemenyi_cd(11, 100, 0.05), Err(Error::Unsupported(_))));
        assert!(matches!(nemenyi_cd(1, 100, 0.05), Err(Error::Unsupported(_))));
        assert!(matches!(nemenyi_cd(2, 100, 0.1), Err(Error::Unsupported(_))));
    }

    #[test]
    fn cd_monotonicity() {
        for k in 2..=10 {
            for n in 2..200 {
                assert!(nemenyi_cd(k, n + 1, 0.05).unwrap() < nemenyi_cd(k, n, 0.05).unwrap());
                if k < 10 {
                    assert!(nemenyi_cd(k + 1, n, 0.05).unwrap() > nemenyi_cd(k, n, 0.05).unwrap());
                }
            }
        }
    }

    #[test]
    fn identical_columns_are_not_significant() {
        let rep = nemenyi_test(&matrix(vec![vec![0.5, 0.5]; 30]), 0.05).unwrap();
        assert_eq!(rep.avg_ranks, vec![1.5, 1.5]);
        assert!(rep.significant_pairs.is_empty());
    }

    #[test]
    fn near_equal_ranks_are_not_significant() {
        // 55 wins for m1, 45 for m0: average ranks 1.55 / 1.45
        let rows: Vec<Vec<f64>> = (0..100)
            .map(|i| if i < 55 { vec![0.0, 1.0] } else { vec![1.0, 0.0] })
            .collect();
        let rep = nemenyi_test(&matrix(rows), 0.05).unwrap();
        assert!((rep.avg_ranks[0] - 1.55).abs() < 1e-12);
        assert!(rep.significant_pairs.is_empty());
    }

    #[test]
    fn friedman_closed_form() {
        let n = 17;
        let f = friedman_statistic(&matrix(vec![vec![2.0, 1.0]; n])).unwrap();
        assert!((f.chi2 - n as f64).abs() < 1e-9);
        let one = friedman_statistic(&matrix(vec![vec![2.0, 1.0]])).unwrap();
        assert!(one.low_n);
        assert!((one.chi2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn friedman_null_rejection_rate() {
        // With k = 2 the statistic is (wins - losses)^2 / N, so under the null
        // it exceeds 3.841 exactly when |wins - 25| >= 7 out of N = 50.
        let exact_below = 1.0
            - 2.0 * (0..=18u64).map(|i| binomial(50, i)).sum::<f64>() / 2f64.powi(50);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let runs = 4000;
        let below = (0..runs)
            .filter(|_| {
                let rows = (0..50).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
                friedman_statistic(&matrix(rows)).unwrap().chi2 < 3.841
            })
            .count() as f64
            / runs as f64;
        let se = (exact_below * (1.0 - exact_below) / runs as f64).sqrt();
        assert!((below - exact_below).abs() < 4.0 * se, "{below} vs {exact_below}");
        // the large-sample nominal level only holds approximately
        assert!(below > 0.92);
    }

    fn binomial(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn spearman_basics() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn ranks_invariant_under_monotone_maps(row in prop::collection::vec(-1e3f64..1e3, 2..8)) {
            let mapped: Vec<f64> = row.iter().map(|x| (x / 100.0).exp() * 3.0 + 1.0).collect();
            prop_assert_eq!(rank_row(&row), rank_row(&mapped));
        }

        #[test]
        fn rank_sums(rows in prop::collection::vec(prop::collection::vec(0u8..4, 4), 1..20)) {
            let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect();
            let ranks = rank_rows(&matrix(rows));
            for r in &ranks {
                prop_assert!((r.iter().sum::<f64>() - 10.0).abs() < 1e-12);
            }
            prop_assert!((average_ranks(&ranks).iter().sum::<f64>() - 10.0).abs() < 1e-9);
        }
    }
}
