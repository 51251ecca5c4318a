//! Spatial response of a taxel to a nearby grounded conductor.

use crate::registry::Registry;

/// Normalized response `k(d, σ)` with `k(0) = 1`, non-increasing in `d`.
pub trait ResponseKernel: Send + Sync {
    fn name(&self) -> &'static str;
    fn response(&self, distance: f64, sigma: f64) -> f64;
}

/// `exp(−d² / 2σ²)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Gaussian;

impl ResponseKernel for Gaussian {
    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn response(&self, distance: f64, sigma: f64) -> f64 {
        (-(distance * distance) / (2.0 * sigma * sigma)).exp()
    }
}

/// Heavier-tailed `1 / (1 + d² / 2σ²)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Lorentzian;

impl ResponseKernel for Lorentzian {
    fn name(&self) -> &'static str {
        "lorentzian"
    }

    fn response(&self, distance: f64, sigma: f64) -> f64 {
        1.0 / (1.0 + distance * distance / (2.0 * sigma * sigma))
    }
}

/// Linear falloff reaching zero at `3σ`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Cone;

impl ResponseKernel for Cone {
    fn name(&self) -> &'static str {
        "cone"
    }

    fn response(&self, distance: f64, sigma: f64) -> f64 {
        (1.0 - distance / (3.0 * sigma)).max(0.0)
    }
}

pub fn builtin() -> Registry<dyn ResponseKernel> {
    let mut reg: Registry<dyn ResponseKernel> = Registry::new("response kernel");
    reg.register("gaussian", || Box::new(Gaussian));
    reg.register("lorentzian", || Box::new(Lorentzian));
    reg.register("cone", || Box::new(Cone));
    reg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernels_are_normalized_and_decreasing() {
        let reg = builtin();
        for name in reg.names() {
            let k = reg.create(name).unwrap();
            assert_eq!(k.name(), name);
            assert!((k.response(0.0, 4.0) - 1.0).abs() < 1e-15);
            let mut prev = 1.0;
            for i in 1..100 {
                let r = k.response(i as f64 * 0.3, 4.0);
                assert!(r <= prev && r >= 0.0);
                prev = r;
            }
        }
        assert!((Gaussian.response(8.0, 4.0) - (-2.0f64).exp()).abs() < 1e-15);
    }
}
