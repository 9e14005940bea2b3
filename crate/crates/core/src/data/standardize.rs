/// Welford running mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExpandingStats {
    pub count: usize,
    pub mean: f64,
    m2: f64,
}

impl ExpandingStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn std(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        (self.m2 / (self.count - 1) as f64).sqrt()
    }

    /// Scale used for z-scoring: the sample standard deviation, or 1 when it
    /// is degenerate.
    pub fn scale(&self) -> f64 {
        let s = self.std();
        if s > 1e-12 && s.is_finite() {
            s
        } else {
            1.0
        }
    }

    pub fn z(&self, x: f64) -> f64 {
        (x - self.mean) / self.scale()
    }
}

/// Expanding z-score of one series' features.
///
/// The log-RV block (target and every RV scale) shares the statistics of the
/// daily log-RV so that coefficients between lags stay comparable; every other
/// feature is scaled by its own statistics. Values are standardized with
/// statistics accumulated strictly before the current day.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub warmup: usize,
    pub log_rv: ExpandingStats,
    pub others: Vec<ExpandingStats>,
}

impl Standardizer {
    pub fn new(warmup: usize, n_other: usize) -> Self {
        Standardizer {
            warmup,
            log_rv: ExpandingStats::default(),
            others: vec![ExpandingStats::default(); n_other],
        }
    }

    pub fn ready(&self) -> bool {
        self.log_rv.count >= self.warmup.max(2)
    }

    pub fn z_log_rv(&self, x: f64) -> f64 {
        self.log_rv.z(x)
    }

    pub fn z_other(&self, k: usize, x: f64) -> f64 {
        self.others[k].z(x)
    }

    /// Absorb one day's raw values after they have been used.
    pub fn observe(&mut self, log_rv: f64, others: &[f64]) {
        self.log_rv.push(log_rv);
        for (s, &x) in self.others.iter_mut().zip(others) {
            s.push(x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, -2.0, 8.5, 3.25, 0.0, 7.0];
        let mut s = ExpandingStats::default();
        xs.iter().for_each(|&x| s.push(x));
        let mean = xs.iter().sum::<f64>() / 7.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 6.0;
        assert!((s.mean - mean).abs() < 1e-14);
        assert!((s.std() - var.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn warmup_gate() {
        let mut st = Standardizer::new(3, 1);
        for i in 0..3 {
            assert!(!st.ready());
            st.observe(i as f64, &[1.0]);
        }
        assert!(st.ready());
        assert!((st.z_log_rv(1.0)).abs() < 1e-15);
        // constant feature: unit scale fallback
        assert_eq!(st.z_other(0, 3.0), 2.0);
    }
}
