//! Two-sample Kolmogorov-Smirnov test on raw observations.

use crate::divergence::{DistanceKind, ReferenceLaw, TestResult};
use crate::g0::Sample;
use crate::specfun::kolmogorov_cdf;

/// Empirical distribution function of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EcdfView {
    sorted: Vec<f64>,
}

impl EcdfView {
    pub fn new(s: &Sample) -> EcdfView {
        let mut sorted = s.values().to_vec();
        sorted.sort_by(f64::total_cmp);
        EcdfView { sorted }
    }

    /// `#{zⱼ ≤ z} / n`.
    pub fn eval(&self, z: f64) -> f64 {
        let count = self.sorted.partition_point(|&v| v <= z);
        count as f64 / self.sorted.len() as f64
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }
}

pub fn ecdf(s: &Sample) -> EcdfView {
    EcdfView::new(s)
}

/// `max |F̂_x - F̂_y|` by a merged sweep. All copies of a tied value are
/// consumed from both samples before the gap is measured.
pub fn ks_distance(x: &EcdfView, y: &EcdfView) -> f64 {
    let (a, b) = (x.sorted(), y.sorted());
    let (m, n) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut best: f64 = 0.0;
    while i < m && j < n {
        let v = a[i].min(b[j]);
        while i < m && a[i] == v {
            i += 1;
        }
        while j < n && b[j] == v {
            j += 1;
        }
        let gap = (i as f64 / m as f64 - j as f64 / n as f64).abs();
        best = best.max(gap);
    }
    // Past the end of one sample the gap can only shrink.
    best
}

pub fn ks_two_sample(x: &Sample, y: &Sample) -> TestResult {
    let (ex, ey) = (ecdf(x), ecdf(y));
    let d = ks_distance(&ex, &ey);
    let (m, n) = (x.len(), y.len());
    let statistic = ((m * n) as f64 / (m + n) as f64).sqrt() * d;
    let p_value = (1.0 - kolmogorov_cdf(statistic).expect("statistic is finite and nonnegative")).clamp(0.0, 1.0);
    TestResult {
        kind: DistanceKind::KolmogorovSmirnov,
        distance: d,
        statistic,
        p_value,
        law: ReferenceLaw::Kolmogorov,
        sizes: (m, n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[f64]) -> Sample {
        Sample::new(v.to_vec()).unwrap()
    }

    #[test]
    fn counting_definition() {
        let e = ecdf(&s(&[3.0, 1.0, 2.0]));
        assert_eq!(e.eval(2.0), 2.0 / 3.0);
        assert_eq!(e.eval(0.5), 0.0);
        assert_eq!(e.eval(3.0), 1.0);
        assert_eq!(ecdf(&s(&[1.0, 1.0, 2.0])).eval(1.0), 2.0 / 3.0);
    }

    #[test]
    fn separated_samples() {
        let r = ks_two_sample(&s(&[1.0, 2.0]), &s(&[3.0, 4.0]));
        assert_eq!(r.distance, 1.0);
        assert_eq!(r.statistic, 1.0);
        assert!((r.p_value - 0.269_999_671_677_354_5).abs() < 1e-12);
        let same = ks_two_sample(&s(&[1.0, 2.0, 5.0]), &s(&[1.0, 2.0, 5.0]));
        assert_eq!((same.distance, same.p_value), (0.0, 1.0));
    }

    #[test]
    fn ties_across_samples() {
        // Both ECDFs jump at 1; no gap should be recorded between the jumps.
        let r = ks_two_sample(&s(&[1.0, 1.0, 2.0]), &s(&[1.0, 3.0]));
        let brute = [1.0, 2.0, 3.0]
            .iter()
            .map(|&z| (ecdf(&s(&[1.0, 1.0, 2.0])).eval(z) - ecdf(&s(&[1.0, 3.0])).eval(z)).abs())
            .fold(0.0, f64::max);
        assert_eq!(r.distance, brute);
    }
}
