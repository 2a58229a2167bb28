//! Two-sample Kolmogorov-Smirnov testing and significance matrices.
//!
//! D is the supremum gap between the two empirical CDFs, evaluated from the
//! right at every distinct merged point. P-values come from the asymptotic
//! Kolmogorov distribution at lambda = sqrt(n1*n2/(n1+n2)) * D, using the
//! theta-function expansion for small lambda and the alternating series
//! otherwise, iterated to convergence.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("empty sample")]
    EmptySample,
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("need at least 2 labeled samples, got {0}")]
    TooFewSamples(usize),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Outcome of one two-sample test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

fn sorted_copy(xs: &[f64]) -> Result<Vec<f64>, StatsError> {
    if xs.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut v = xs.to_vec();
    v.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(v)
}

/// sup over x of |F_a(x) - F_b(x)| for sorted samples.
fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let n1 = a.len() as f64;
    let n2 = b.len() as f64;
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() || j < b.len() {
        let v = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => x.min(*y),
            (Some(x), None) => *x,
            (None, Some(y)) => *y,
            (None, None) => break,
        };
        while i < a.len() && a[i] == v {
            i += 1;
        }
        while j < b.len() && b[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n1 - j as f64 / n2).abs());
    }
    d
}

const MAX_TERMS: usize = 1000;
const TERM_TOL: f64 = 1e-14;

/// Survival function of the Kolmogorov distribution, Q(lambda).
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // CDF via the theta-function expansion, accurate where the
        // alternating series converges slowly.
        let f = PI * PI / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for j in 1..=MAX_TERMS {
            let k = (2 * j - 1) as f64;
            let term = (-k * k * f).exp();
            sum += term;
            if term < TERM_TOL {
                break;
            }
        }
        let cdf = (2.0 * PI).sqrt() / lambda * sum;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for j in 1..=MAX_TERMS {
            let jf = j as f64;
            let term = (-2.0 * jf * jf * lambda * lambda).exp();
            sum += if j % 2 == 1 { term } else { -term };
            if term < TERM_TOL {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// Two-sample Kolmogorov-Smirnov test with an asymptotic p-value at
/// effective size n1*n2/(n1+n2).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult, StatsError> {
    let sa = sorted_copy(a)?;
    let sb = sorted_copy(b)?;
    let statistic = ks_statistic(&sa, &sb);
    let ne = (sa.len() * sb.len()) as f64 / (sa.len() + sb.len()) as f64;
    let p_value = kolmogorov_sf(ne.sqrt() * statistic);
    Ok(KsResult {
        statistic,
        p_value,
        n1: sa.len(),
        n2: sb.len(),
    })
}

/// Concatenates yearly samples into consecutive buckets of `period` years,
/// aligned to the earliest year present. A trailing partial period keeps its
/// own bucket. Labels are `start-end` (or the bare year for a single-year
/// bucket), covering the observed years.
pub fn pool_periods(
    yearly: &BTreeMap<i32, Vec<f64>>,
    period: usize,
) -> Vec<(String, Vec<f64>)> {
    assert!(period >= 1, "period must be >= 1");
    let Some((&first, _)) = yearly.iter().next() else {
        return Vec::new();
    };
    let mut buckets: BTreeMap<i32, (i32, i32, Vec<f64>)> = BTreeMap::new();
    for (&year, values) in yearly {
        let idx = (year - first).div_euclid(period as i32);
        let entry = buckets
            .entry(idx)
            .or_insert_with(|| (year, year, Vec::new()));
        entry.0 = entry.0.min(year);
        entry.1 = entry.1.max(year);
        entry.2.extend_from_slice(values);
    }
    buckets
        .into_values()
        .map(|(lo, hi, values)| {
            let label = if lo == hi {
                lo.to_string()
            } else {
                format!("{lo}-{hi}")
            };
            (label, values)
        })
        .collect()
}

/// Pairwise KS grid over labeled samples.
#[derive(Debug, Clone)]
pub struct SignificanceMatrix {
    pub labels: Vec<String>,
    /// Row-major n x n; diagonal is D = 0, p = 1.
    pub cells: Vec<KsResult>,
    pub alpha: f64,
}

impl SignificanceMatrix {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn cell(&self, i: usize, j: usize) -> KsResult {
        self.cells[i * self.labels.len() + j]
    }

    /// True when the two distributions differ at the configured level
    /// (p < alpha).
    pub fn is_significant(&self, i: usize, j: usize) -> bool {
        self.cell(i, j).p_value < self.alpha
    }

    /// `D:p` cells with row/column labels.
    pub fn export_csv(&self, path: &Path) -> Result<(), StatsError> {
        self.write_grid(path, |r| format!("{:.12}:{:.12}", r.statistic, r.p_value))
    }

    /// Boolean grid, 1 = significantly different.
    pub fn export_significance_csv(&self, path: &Path) -> Result<(), StatsError> {
        let alpha = self.alpha;
        self.write_grid(path, move |r| u8::from(r.p_value < alpha).to_string())
    }

    fn write_grid<F: Fn(&KsResult) -> String>(
        &self,
        path: &Path,
        fmt: F,
    ) -> Result<(), StatsError> {
        let io_err = |source| StatsError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut w = BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
        let mut header = String::from("label");
        for l in &self.labels {
            header.push(',');
            header.push_str(l);
        }
        writeln!(w, "{header}").map_err(io_err)?;
        for i in 0..self.len() {
            let mut row = self.labels[i].clone();
            for j in 0..self.len() {
                row.push(',');
                row.push_str(&fmt(&self.cell(i, j)));
            }
            writeln!(w, "{row}").map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }
}

/// All pairwise tests over ordered labeled samples.
pub fn ks_matrix(
    samples: &[(String, Vec<f64>)],
    alpha: f64,
) -> Result<SignificanceMatrix, StatsError> {
    let n = samples.len();
    if n < 2 {
        return Err(StatsError::TooFewSamples(n));
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let computed: Vec<KsResult> = pairs
        .par_iter()
        .map(|(i, j)| ks_two_sample(&samples[*i].1, &samples[*j].1))
        .collect::<Result<_, _>>()?;
    let mut cells = vec![
        KsResult {
            statistic: 0.0,
            p_value: 1.0,
            n1: 0,
            n2: 0,
        };
        n * n
    ];
    for (i, (_, s)) in samples.iter().enumerate() {
        cells[i * n + i].n1 = s.len();
        cells[i * n + i].n2 = s.len();
    }
    for ((i, j), r) in pairs.into_iter().zip(computed) {
        cells[i * n + j] = r;
        // Mirror the same struct so D and p are exactly symmetric.
        cells[j * n + i] = KsResult {
            n1: r.n2,
            n2: r.n1,
            ..r
        };
    }
    Ok(SignificanceMatrix {
        labels: samples.iter().map(|(l, _)| l.clone()).collect(),
        cells,
        alpha,
    })
}

/// Spearman rank correlation with average ranks for ties. Returns 0 when
/// either input is constant.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "length mismatch");
    assert!(x.len() >= 2, "need at least 2 observations");
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    /// Independent oracle: evaluate both ECDFs by counting at every merged
    /// point with a full scan.
    fn brute_force_d(a: &[f64], b: &[f64]) -> f64 {
        let mut points: Vec<f64> = a.iter().chain(b).copied().collect();
        points.sort_by(|x, y| x.partial_cmp(y).unwrap());
        points.dedup();
        let mut d = 0.0f64;
        for v in points {
            let fa = a.iter().filter(|x| **x <= v).count() as f64 / a.len() as f64;
            let fb = b.iter().filter(|x| **x <= v).count() as f64 / b.len() as f64;
            d = d.max((fa - fb).abs());
        }
        d
    }

    #[test]
    fn identical_samples_have_zero_statistic() {
        let r = ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn disjoint_supports_have_statistic_one() {
        let r = ks_two_sample(&[0.0, 1.0, 2.0], &[10.0, 11.0, 12.0]).unwrap();
        assert_eq!(r.statistic, 1.0);
    }

    #[test]
    fn shifted_grid_example() {
        let r = ks_two_sample(&[1.0, 2.0, 3.0, 4.0], &[2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_abs_diff_eq!(r.statistic, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(
            r.statistic,
            brute_force_d(&[1.0, 2.0, 3.0, 4.0], &[2.0, 3.0, 4.0, 5.0]),
            epsilon = 1e-15
        );
    }

    #[test]
    fn empty_sample_is_an_error() {
        assert!(matches!(
            ks_two_sample(&[], &[1.0]),
            Err(StatsError::EmptySample)
        ));
        assert!(matches!(
            ks_two_sample(&[1.0], &[f64::NAN]),
            Err(StatsError::NonFinite)
        ));
    }

    #[test]
    fn far_separated_samples_are_significant() {
        let mut rng = crate::seeds::rng(31, &[7]);
        let a: Vec<f64> = (0..100).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..100).map(|_| 10.0 + rng.random_range(-1.0..1.0)).collect();
        let r = ks_two_sample(&a, &b).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert!(r.p_value < 0.05);
        // Verify against the asymptotic formula directly.
        let ne = (100.0f64 * 100.0 / 200.0).sqrt();
        assert_abs_diff_eq!(r.p_value, kolmogorov_sf(ne), epsilon = 1e-15);
    }

    #[test]
    fn statistic_matches_brute_force_on_fuzzed_pairs() {
        let mut rng = crate::seeds::rng(32, &[8]);
        for _ in 0..1000 {
            let n1 = rng.random_range(1..40);
            let n2 = rng.random_range(1..40);
            // Coarse grid values force plenty of ties.
            let a: Vec<f64> = (0..n1)
                .map(|_| f64::from(rng.random_range(-5i32..5)))
                .collect();
            let b: Vec<f64> = (0..n2)
                .map(|_| f64::from(rng.random_range(-5i32..5)) + 0.5)
                .collect();
            let r = ks_two_sample(&a, &b).unwrap();
            let oracle = brute_force_d(&a, &b);
            assert!(
                (r.statistic - oracle).abs() < 1e-12,
                "{:?} vs {oracle}",
                r.statistic
            );
        }
    }

    #[test]
    fn p_value_is_monotone_in_the_statistic() {
        let mut prev = f64::INFINITY;
        for i in 0..=100 {
            let lambda = i as f64 * 0.05;
            let p = kolmogorov_sf(lambda);
            assert!((0.0..=1.0).contains(&p));
            assert!(p <= prev + 1e-15);
            prev = p;
        }
    }

    #[test]
    fn sf_reference_values() {
        // Known Kolmogorov distribution values.
        assert_abs_diff_eq!(kolmogorov_sf(1.0), 0.26999967, epsilon = 1e-7);
        assert_abs_diff_eq!(kolmogorov_sf(1.36), 0.049, epsilon = 5e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn pooling_concatenates_full_periods() {
        let mut yearly = BTreeMap::new();
        for y in 1981..=1985 {
            yearly.insert(y, vec![y as f64; 100]);
        }
        let pooled = pool_periods(&yearly, 5);
        assert_eq!(pooled.len(), 1);
        assert_eq!(pooled[0].0, "1981-1985");
        assert_eq!(pooled[0].1.len(), 500);
    }

    #[test]
    fn trailing_partial_period_keeps_own_bucket() {
        let mut yearly = BTreeMap::new();
        for y in 1981..=1986 {
            yearly.insert(y, vec![1.0, 2.0]);
        }
        let pooled = pool_periods(&yearly, 5);
        assert_eq!(pooled.len(), 2);
        assert_eq!(pooled[0].0, "1981-1985");
        assert_eq!(pooled[1].0, "1986");
        assert_eq!(pooled[1].1.len(), 2);
    }

    #[test]
    fn pooled_mean_is_size_weighted_mean() {
        let mut yearly = BTreeMap::new();
        yearly.insert(1981, vec![1.0; 10]);
        yearly.insert(1982, vec![4.0; 30]);
        let pooled = pool_periods(&yearly, 5);
        let values = &pooled[0].1;
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        assert_abs_diff_eq!(mean, (10.0 * 1.0 + 30.0 * 4.0) / 40.0, epsilon = 1e-12);
    }

    #[test]
    fn matrix_of_identical_samples_is_all_not_significant() {
        let sample = vec![1.0, 2.0, 3.0, 4.0];
        let samples: Vec<(String, Vec<f64>)> = (0..3)
            .map(|i| (format!("y{i}"), sample.clone()))
            .collect();
        let m = ks_matrix(&samples, 0.05).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.cell(i, j).statistic, 0.0);
                assert!(!m.is_significant(i, j));
            }
        }
    }

    #[test]
    fn matrix_statistic_is_exactly_symmetric() {
        let mut rng = crate::seeds::rng(33, &[9]);
        let samples: Vec<(String, Vec<f64>)> = (0..4)
            .map(|i| {
                (
                    format!("y{i}"),
                    (0..50)
                        .map(|_| rng.random_range(0.0..1.0) + i as f64 * 0.1)
                        .collect(),
                )
            })
            .collect();
        let m = ks_matrix(&samples, 0.05).unwrap();
        for i in 0..4 {
            assert_eq!(m.cell(i, i).statistic, 0.0);
            for j in 0..4 {
                assert_eq!(
                    m.cell(i, j).statistic.to_bits(),
                    m.cell(j, i).statistic.to_bits()
                );
                assert_eq!(m.cell(i, j).p_value.to_bits(), m.cell(j, i).p_value.to_bits());
            }
        }
    }

    #[test]
    fn separated_samples_make_significant_matrix_cells() {
        let a: Vec<f64> = (0..100).map(|i| i as f64 * 0.01).collect();
        let b: Vec<f64> = (0..100).map(|i| 10.0 + i as f64 * 0.01).collect();
        let m = ks_matrix(&[("a".into(), a), ("b".into(), b)], 0.05).unwrap();
        assert!(m.is_significant(0, 1));
        assert!(!m.is_significant(0, 0));
    }

    #[test]
    fn matrix_csv_exports() {
        let dir = tempfile::tempdir().unwrap();
        let a: Vec<f64> = (0..20).map(f64::from).collect();
        let b: Vec<f64> = (0..20).map(|i| f64::from(i) + 100.0).collect();
        let m = ks_matrix(&[("a".into(), a), ("b".into(), b)], 0.05).unwrap();
        let p1 = dir.path().join("m.csv");
        let p2 = dir.path().join("m_sig.csv");
        m.export_csv(&p1).unwrap();
        m.export_significance_csv(&p2).unwrap();
        let grid = std::fs::read_to_string(&p2).unwrap();
        assert_eq!(grid, "label,a,b\na,0,1\nb,1,0\n");
        let cells = std::fs::read_to_string(&p1).unwrap();
        assert!(cells.starts_with("label,a,b\n"));
        assert!(cells.contains(':'));
    }

    #[test]
    fn spearman_detects_monotone_trends() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let up: Vec<f64> = x.iter().map(|v| v * v + 1.0).collect();
        let down: Vec<f64> = x.iter().map(|v| -v * 3.0).collect();
        assert_abs_diff_eq!(spearman_rho(&x, &up), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(spearman_rho(&x, &down), -1.0, epsilon = 1e-12);
        assert_eq!(spearman_rho(&x, &[2.0; 20]), 0.0);
    }

    #[test]
    fn spearman_handles_ties() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 1.0, 2.0, 2.0];
        let rho = spearman_rho(&x, &y);
        assert!(rho > 0.8 && rho <= 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn statistic_invariant_under_increasing_transform(
            a in proptest::collection::vec(-50i32..50, 1..30),
            b in proptest::collection::vec(-50i32..50, 1..30),
        ) {
            let af: Vec<f64> = a.iter().map(|v| f64::from(*v)).collect();
            let bf: Vec<f64> = b.iter().map(|v| f64::from(*v)).collect();
            // x -> x^3 is strictly increasing and exact on small integers.
            let at: Vec<f64> = af.iter().map(|v| v * v * v).collect();
            let bt: Vec<f64> = bf.iter().map(|v| v * v * v).collect();
            let d1 = ks_two_sample(&af, &bf).unwrap().statistic;
            let d2 = ks_two_sample(&at, &bt).unwrap().statistic;
            prop_assert!((d1 - d2).abs() < 1e-12);
        }

        #[test]
        fn p_value_is_a_pure_function(
            a in proptest::collection::vec(-100.0f64..100.0, 1..40),
            b in proptest::collection::vec(-100.0f64..100.0, 1..40),
        ) {
            let r1 = ks_two_sample(&a, &b).unwrap();
            let r2 = ks_two_sample(&a, &b).unwrap();
            prop_assert_eq!(r1.p_value.to_bits(), r2.p_value.to_bits());
            prop_assert!((0.0..=1.0).contains(&r1.p_value));
            prop_assert!((0.0..=1.0).contains(&r1.statistic));
        }
    }
}
