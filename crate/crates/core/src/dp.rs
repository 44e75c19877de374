//! Update clipping and noise calibration for the Gaussian, Laplace and
//! moments-accountant mechanisms.
//!
//! All three mechanisms share the sensitivity `Δt = 2μϑ/|D|` of one local
//! SGD step with learning rate `μ`, clip norm `ϑ` and local dataset size
//! `|D|`:
//!
//! | mechanism          | scale                                  |
//! |--------------------|----------------------------------------|
//! | Gaussian           | `c = Δt·sqrt(2·ln(1.25/δ)) / ε`        |
//! | Laplace            | `b = Δt / ε`                           |
//! | moments accountant | `c = Δt·sqrt(2·q·T·ln(1/δ)) / ε`       |
//!
//! where `q` is the per-round batch sampling fraction and `T` the number of
//! rounds. Noise is drawn i.i.d. per parameter coordinate.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{check_len, invalid, Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mechanism {
    None,
    Gaussian,
    Laplace,
    MomentsAccountant,
}

impl Mechanism {
    pub const ALL: [Mechanism; 4] = [
        Mechanism::None,
        Mechanism::Gaussian,
        Mechanism::Laplace,
        Mechanism::MomentsAccountant,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::None => "none",
            Mechanism::Gaussian => "gaussian",
            Mechanism::Laplace => "laplace",
            Mechanism::MomentsAccountant => "moments_accountant",
        }
    }

    /// Accepts the canonical names plus `ma` for the moments accountant.
    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "none" => Some(Mechanism::None),
            "gaussian" => Some(Mechanism::Gaussian),
            "laplace" => Some(Mechanism::Laplace),
            "moments_accountant" | "ma" => Some(Mechanism::MomentsAccountant),
            _ => None,
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Calibration inputs for one cluster's perturbation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpConfig {
    pub mechanism: Mechanism,
    /// Per-round privacy budget. `+inf` only with [`Mechanism::None`].
    pub epsilon: f64,
    pub delta: f64,
    pub clip_norm: f64,
    pub learning_rate: f64,
    pub dataset_size: usize,
    /// Batch sampling fraction `q` in `(0, 1]`.
    pub batch_fraction: f64,
    pub max_rounds: usize,
}

impl DpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(invalid("epsilon", "must be positive"));
        }
        if self.epsilon.is_infinite() && self.mechanism != Mechanism::None {
            return Err(invalid("epsilon", "infinite epsilon requires mechanism `none`"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta", "must lie in (0, 1)"));
        }
        if !(self.clip_norm > 0.0 && self.clip_norm.is_finite()) {
            return Err(invalid("clip_norm", "must be positive and finite"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning_rate", "must be positive and finite"));
        }
        if self.dataset_size == 0 {
            return Err(invalid("dataset_size", "must be positive"));
        }
        if !(self.batch_fraction > 0.0 && self.batch_fraction <= 1.0) {
            return Err(invalid("batch_fraction", "must lie in (0, 1]"));
        }
        if self.max_rounds == 0 {
            return Err(invalid("max_rounds", "must be positive"));
        }
        Ok(())
    }

    pub fn sensitivity(&self) -> Result<f64> {
        sensitivity(self.learning_rate, self.clip_norm, self.dataset_size)
    }

    /// The per-coordinate noise scale this configuration calls for.
    pub fn noise_scale(&self) -> Result<NoiseScale> {
        self.validate()?;
        let dt = self.sensitivity()?;
        match self.mechanism {
            Mechanism::None => Ok(NoiseScale::NONE),
            Mechanism::Gaussian => gaussian_sigma(dt, self.epsilon, self.delta),
            Mechanism::Laplace => laplace_scale(dt, self.epsilon),
            Mechanism::MomentsAccountant => ma_sigma(
                dt,
                self.epsilon,
                self.delta,
                self.batch_fraction,
                self.max_rounds,
            ),
        }
    }
}

/// Standard deviation (Gaussian family) or scale `b` (Laplace).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseScale {
    pub value: f64,
    pub mechanism: Mechanism,
}

impl NoiseScale {
    pub const NONE: NoiseScale = NoiseScale {
        value: 0.0,
        mechanism: Mechanism::None,
    };
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(invalid("epsilon", "must be positive and finite"))
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt >= 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(invalid("sensitivity", "must be nonnegative and finite"))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(invalid("delta", "must lie in (0, 1)"))
    }
}

/// Scales `delta` by `min(1, clip_norm / ‖delta‖₂)`. A zero vector is
/// returned unchanged.
pub fn clip_update(delta: &[f64], clip_norm: f64) -> Result<Vec<f64>> {
    if !(clip_norm > 0.0) || clip_norm.is_nan() {
        return Err(invalid("clip_norm", "must be positive"));
    }
    if !delta.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("update"));
    }
    let norm = l2_norm(delta);
    if norm <= clip_norm {
        return Ok(delta.to_vec());
    }
    let factor = clip_norm / norm;
    Ok(delta.iter().map(|v| v * factor).collect())
}

fn l2_norm(v: &[f64]) -> f64 {
    let plain = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    if plain.is_finite() {
        return plain;
    }
    // squares overflowed; rescale by the largest magnitude
    let amax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    amax * libm::sqrt(v.iter().map(|x| (x / amax) * (x / amax)).sum::<f64>())
}

/// `Δt = 2·μ·ϑ / |D|`.
pub fn sensitivity(learning_rate: f64, clip_norm: f64, dataset_size: usize) -> Result<f64> {
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(invalid("learning_rate", "must be positive and finite"));
    }
    if !(clip_norm > 0.0 && clip_norm.is_finite()) {
        return Err(invalid("clip_norm", "must be positive and finite"));
    }
    if dataset_size == 0 {
        return Err(invalid("dataset_size", "must be positive"));
    }
    Ok(2.0 * learning_rate * clip_norm / dataset_size as f64)
}

/// Gaussian-mechanism standard deviation `Δt·sqrt(2·ln(1.25/δ)) / ε`.
pub fn gaussian_sigma(dt: f64, epsilon: f64, delta: f64) -> Result<NoiseScale> {
    check_dt(dt)?;
    check_epsilon(epsilon)?;
    if delta >= 1.25 {
        return Err(Error::Domain(format!(
            "ln(1.25/δ) is nonpositive for δ = {delta}"
        )));
    }
    check_delta(delta)?;
    Ok(NoiseScale {
        value: dt * libm::sqrt(2.0 * libm::log(1.25 / delta)) / epsilon,
        mechanism: Mechanism::Gaussian,
    })
}

/// Laplace scale `b = Δt / ε`.
pub fn laplace_scale(dt: f64, epsilon: f64) -> Result<NoiseScale> {
    check_dt(dt)?;
    check_epsilon(epsilon)?;
    Ok(NoiseScale {
        value: dt / epsilon,
        mechanism: Mechanism::Laplace,
    })
}

/// Moments-accountant standard deviation `Δt·sqrt(2·q·T·ln(1/δ)) / ε`.
pub fn ma_sigma(dt: f64, epsilon: f64, delta: f64, q: f64, rounds: usize) -> Result<NoiseScale> {
    check_dt(dt)?;
    check_epsilon(epsilon)?;
    check_delta(delta)?;
    if !(q > 0.0 && q <= 1.0) {
        return Err(invalid("batch_fraction", "must lie in (0, 1]"));
    }
    if rounds == 0 {
        return Err(invalid("max_rounds", "must be positive"));
    }
    Ok(NoiseScale {
        value: dt * libm::sqrt(2.0 * q * rounds as f64 * libm::log(1.0 / delta)) / epsilon,
        mechanism: Mechanism::MomentsAccountant,
    })
}

/// `dim` i.i.d. draws: `N(0, c²)` for Gaussian and moments accountant,
/// `Laplace(0, b)` for Laplace, zeros for none.
pub fn sample_noise<R: Rng + ?Sized>(
    mechanism: Mechanism,
    scale: &NoiseScale,
    dim: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if dim == 0 {
        return Err(invalid("dim", "must be positive"));
    }
    if scale.mechanism != mechanism {
        return Err(invalid(
            "noise scale",
            format!("scale calibrated for {} used with {}", scale.mechanism, mechanism),
        ));
    }
    if !(scale.value >= 0.0 && scale.value.is_finite()) {
        return Err(invalid("noise scale", "must be nonnegative and finite"));
    }
    let c = scale.value;
    Ok(match mechanism {
        Mechanism::None => vec![0.0; dim],
        Mechanism::Gaussian | Mechanism::MomentsAccountant => (0..dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                c * z
            })
            .collect(),
        // difference of two unit exponentials is standard Laplace
        Mechanism::Laplace => (0..dim)
            .map(|_| {
                let a: f64 = Exp1.sample(rng);
                let b: f64 = Exp1.sample(rng);
                c * (a - b)
            })
            .collect(),
    })
}

/// `γ = θ + α`.
pub fn perturb(params: &ModelParams, noise: &[f64]) -> Result<ModelParams> {
    check_len("noise vector", params.len(), noise.len())?;
    let values = params.values().iter().zip(noise).map(|(w, a)| w + a).collect();
    Ok(params.with_values(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_model, Activation, LayerShape};
    use crate::rng::{stream, Purpose};

    const REF_DT: f64 = 2.0 * 0.0046 / 1470.0;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn clip_examples() {
        assert_eq!(clip_update(&[0.3, 0.4], 1.0).unwrap(), vec![0.3, 0.4]);
        let huge = clip_update(&[3e200, 4e200], 1.0).unwrap();
        assert!((huge[0] - 0.6).abs() < 1e-15 && (huge[1] - 0.8).abs() < 1e-15);
        let c = clip_update(&[3.0, 4.0], 1.0).unwrap();
        assert!((c[0] - 0.6).abs() < 1e-15 && (c[1] - 0.8).abs() < 1e-15);
        assert!(((c[0] * c[0] + c[1] * c[1]).sqrt() - 1.0).abs() < 1e-15);
        assert_eq!(clip_update(&[0.0; 4], 0.1).unwrap(), vec![0.0; 4]);
        assert_eq!(clip_update(&[f64::NAN], 1.0), Err(Error::NonFinite("update")));
        assert!(clip_update(&[1.0], 0.0).is_err());
    }

    #[test]
    fn sensitivity_examples() {
        let dt = sensitivity(0.0046, 1.0, 1470).unwrap();
        assert!(rel(dt, 6.2585e-6) < 1e-4);
        assert_eq!(sensitivity(0.0092, 1.0, 1470).unwrap(), 2.0 * dt);
        assert_eq!(sensitivity(0.0046, 1.0, 2940).unwrap(), dt / 2.0);
        assert!(sensitivity(0.0, 1.0, 10).is_err());
        assert!(sensitivity(0.1, 1.0, 0).is_err());
    }

    #[test]
    fn gaussian_examples() {
        let c = gaussian_sigma(6.2585e-6, 0.5, 1e-5).unwrap();
        assert_eq!(c.mechanism, Mechanism::Gaussian);
        assert!(rel(c.value, 6.064e-5) < 1e-3, "{}", c.value);
        let at = |e| gaussian_sigma(REF_DT, e, 1e-5).unwrap().value;
        assert!(at(50.0) < at(10.0) && at(10.0) < at(0.01));
        assert_eq!(gaussian_sigma(0.0, 0.5, 1e-5).unwrap().value, 0.0);
        assert!(matches!(gaussian_sigma(1.0, 1.0, 1.5), Err(Error::Domain(_))));
        assert!(gaussian_sigma(1.0, 0.0, 1e-5).is_err());
    }

    #[test]
    fn laplace_examples() {
        let b = laplace_scale(6.2585e-6, 0.5).unwrap().value;
        assert!(rel(b, 1.2517e-5) < 1e-12);
        assert_eq!(laplace_scale(REF_DT, 1.0).unwrap().value, REF_DT);
        assert_eq!(
            laplace_scale(REF_DT, 2.0).unwrap().value,
            laplace_scale(REF_DT, 1.0).unwrap().value / 2.0
        );
        assert_eq!(laplace_scale(0.0, 0.3).unwrap().value, 0.0);
    }

    #[test]
    fn ma_examples() {
        let c = ma_sigma(6.2585e-6, 0.5, 1e-5, 1024.0 / 1470.0, 1000).unwrap().value;
        assert!(rel(c, 1.585e-3) < 1e-3, "{c}");
        let c1 = ma_sigma(REF_DT, 0.5, 1e-5, 0.5, 250).unwrap().value;
        let c4 = ma_sigma(REF_DT, 0.5, 1e-5, 0.5, 1000).unwrap().value;
        assert!(rel(c4, 2.0 * c1) < 1e-15);
        let closed = ma_sigma(REF_DT, 0.7, (-1.0f64).exp(), 1.0, 1).unwrap().value;
        assert!(rel(closed, REF_DT * 2f64.sqrt() / 0.7) < 1e-15);
        assert!(ma_sigma(REF_DT, 0.5, 1e-5, 1.5, 10).is_err());
        assert!(ma_sigma(REF_DT, 0.5, 1e-5, 0.5, 0).is_err());
    }

    #[test]
    fn config_dispatch() {
        let mut cfg = DpConfig {
            mechanism: Mechanism::Laplace,
            epsilon: 0.5,
            delta: 1e-5,
            clip_norm: 1.0,
            learning_rate: 0.0046,
            dataset_size: 1470,
            batch_fraction: 1024.0 / 1470.0,
            max_rounds: 1000,
        };
        assert_eq!(cfg.noise_scale().unwrap().value, REF_DT / 0.5);
        cfg.mechanism = Mechanism::None;
        cfg.epsilon = f64::INFINITY;
        assert_eq!(cfg.noise_scale().unwrap(), NoiseScale::NONE);
        cfg.mechanism = Mechanism::Gaussian;
        assert!(cfg.validate().is_err());
        cfg.epsilon = -1.0;
        assert!(matches!(cfg.validate(), Err(Error::InvalidParameter { name: "epsilon", .. })));
    }

    #[test]
    fn none_noise_is_zero() {
        let mut rng = stream(1, Purpose::Noise, 0, 0);
        assert_eq!(sample_noise(Mechanism::None, &NoiseScale::NONE, 7, &mut rng).unwrap(), vec![0.0; 7]);
    }

    #[test]
    fn noise_scale_mismatch() {
        let mut rng = stream(1, Purpose::Noise, 0, 0);
        let s = laplace_scale(1.0, 1.0).unwrap();
        assert!(sample_noise(Mechanism::Gaussian, &s, 3, &mut rng).is_err());
        assert!(sample_noise(Mechanism::Laplace, &s, 0, &mut rng).is_err());
    }

    #[test]
    fn noise_replays_bit_identically() {
        let s = gaussian_sigma(1.0, 1.0, 1e-5).unwrap();
        let a = sample_noise(Mechanism::Gaussian, &s, 64, &mut stream(3, Purpose::Noise, 2, 9)).unwrap();
        let b = sample_noise(Mechanism::Gaussian, &s, 64, &mut stream(3, Purpose::Noise, 2, 9)).unwrap();
        assert_eq!(a, b);
    }

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn gaussian_moments() {
        let s = NoiseScale { value: 1.0, mechanism: Mechanism::Gaussian };
        let xs = sample_noise(Mechanism::Gaussian, &s, 1_000_000, &mut stream(5, Purpose::Noise, 0, 0)).unwrap();
        let (m, v) = moments(&xs);
        assert!(m.abs() < 0.005, "mean {m}");
        assert!((0.995..=1.005).contains(&v.sqrt()), "std {}", v.sqrt());
    }

    #[test]
    fn laplace_moments() {
        let s = NoiseScale { value: 1.0, mechanism: Mechanism::Laplace };
        let xs = sample_noise(Mechanism::Laplace, &s, 1_000_000, &mut stream(6, Purpose::Noise, 0, 0)).unwrap();
        let (m, v) = moments(&xs);
        assert!(m.abs() < 0.01, "mean {m}");
        assert!((2.0 * 0.99..=2.0 * 1.01).contains(&v), "variance {v}");
    }

    #[test]
    fn perturb_roundtrip() {
        let p = init_model(&LayerShape::new(vec![4, 3]).unwrap(), Activation::Relu, 1);
        assert_eq!(perturb(&p, &vec![0.0; p.len()]).unwrap(), p);
        let s = NoiseScale { value: 0.3, mechanism: Mechanism::Gaussian };
        let a = sample_noise(Mechanism::Gaussian, &s, p.len(), &mut stream(1, Purpose::Noise, 0, 0)).unwrap();
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        let back = perturb(&perturb(&p, &a).unwrap(), &neg).unwrap();
        for (x, y) in back.values().iter().zip(p.values()) {
            assert!((x - y).abs() <= 1e-12);
        }
        let g = perturb(&p, &a).unwrap();
        for i in [0, 5, 14] {
            assert_eq!(g.values()[i], p.values()[i] + a[i]);
        }
        assert!(perturb(&p, &[1.0]).is_err());
    }
}
