use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Ornstein-Uhlenbeck exploration noise, advanced by Euler-Maruyama:
/// `x ← x − θ(x − μ)dt + σ√dt·ξ` with independent standard normal `ξ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuNoise {
    pub theta: f64,
    pub mu: f64,
    pub sigma: f64,
    pub dt: f64,
    pub x: Vec<f64>,
}

impl OuNoise {
    /// A process of dimension `dim` starting at its mean.
    pub fn new(dim: usize, theta: f64, mu: f64, sigma: f64, dt: f64) -> Self {
        assert!(theta > 0.0 && sigma >= 0.0 && dt > 0.0, "invalid OU parameters");
        Self {
            theta,
            mu,
            sigma,
            dt,
            x: vec![mu; dim],
        }
    }

    pub fn reset(&mut self) {
        self.x.fill(self.mu);
    }

    /// Advances one step using the supplied standard normal draws.
    pub fn step_with(&mut self, xi: &[f64]) {
        assert_eq!(xi.len(), self.x.len(), "one draw per component");
        let diffusion = self.sigma * self.dt.sqrt();
        for (x, &z) in self.x.iter_mut().zip(xi) {
            *x = *x - self.theta * (*x - self.mu) * self.dt + diffusion * z;
        }
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let xi: Vec<f64> = (0..self.x.len()).map(|_| rng.sample(StandardNormal)).collect();
        self.step_with(&xi);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_only_steps() {
        let mut n = OuNoise::new(1, 0.15, 1.0, 2.0, 1.0);
        n.x[0] = 0.0;
        n.step_with(&[0.0]);
        assert_eq!(n.x[0], 0.15);

        let mut at_mean = OuNoise::new(3, 0.15, 1.0, 2.0, 1.0);
        at_mean.step_with(&[0.0; 3]);
        assert_eq!(at_mean.x, vec![1.0; 3]);
    }

    #[test]
    fn unit_shock() {
        let mut n = OuNoise::new(1, 0.15, 1.0, 2.0, 1.0);
        n.x[0] = 0.0;
        n.step_with(&[1.0]);
        assert_eq!(n.x[0], 2.15);
    }

    #[test]
    fn reset_returns_to_mean() {
        let mut n = OuNoise::new(2, 0.15, 1.0, 2.0, 1.0);
        n.step_with(&[3.0, -2.0]);
        n.reset();
        assert_eq!(n.x, vec![1.0, 1.0]);
    }
}
