use crate::model::HyperParameters;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Prior on the log-scale hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaPrior {
    /// Independent normals per component.
    Gaussian { means: [f64; 4], sds: [f64; 4] },
    /// Improper constant density, `log p(θ) = 0`.
    Flat,
}

impl Default for ThetaPrior {
    fn default() -> Self {
        ThetaPrior::Gaussian {
            means: [0.0; 4],
            sds: [3.0; 4],
        }
    }
}

pub fn log_normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * LN_2PI - sd.ln() - 0.5 * z * z
}

pub fn log_prior_theta(theta: &HyperParameters, prior: &ThetaPrior) -> f64 {
    match prior {
        ThetaPrior::Flat => 0.0,
        ThetaPrior::Gaussian { means, sds } => theta
            .to_array()
            .iter()
            .zip(means.iter().zip(sds))
            .map(|(&x, (&m, &s))| log_normal_pdf(x, m, s))
            .sum(),
    }
}
