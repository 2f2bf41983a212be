use serde::Serialize;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub sigma: f64,
    pub samples: u64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        if xs.is_empty() {
            return Self { mean: f64::NAN, sigma: f64::NAN, samples: 0 };
        }
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Self { mean, sigma: (var / n).sqrt(), samples: xs.len() as u64 }
    }

    pub fn proportion(hits: u64, trials: u64) -> Self {
        let mean = hits as f64 / trials as f64;
        Self { mean, sigma: (mean * (1.0 - mean) / trials as f64).sqrt(), samples: trials }
    }

    /// Normal-approximation interval at `z` standard errors.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (self.mean - z * self.sigma, self.mean + z * self.sigma)
    }

    pub fn within(&self, target: f64, z: f64) -> bool {
        (self.mean - target).abs() <= z * self.sigma
    }
}
