//! Finite-key secret key length for four-intensity decoy-state BB84.
//!
//! Everything is generic over the scalar type. Counts are integers; all
//! derived quantities are reals of type `T`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KeyRateError {
    #[error("binary entropy is defined on [0, 1], got {0}")]
    EntropyDomain(f64),
    #[error("intensities must satisfy mu > nu > 0 and omega > 0")]
    DegenerateIntensities,
    #[error("pulse probabilities must be positive and sum to 1")]
    InvalidProbabilities,
    #[error("{name} must lie in (0, 1), got {value}")]
    InvalidEpsilon { name: &'static str, value: f64 },
    #[error("error-correction leakage must be finite and non-negative")]
    InvalidLeakage,
    #[error("sampling correction needs n, k > 0, lambda and epsilon in (0, 1), and a log term of at least 0")]
    GammaDomain,
}

/// Source settings and security targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoyParams<T> {
    pub mu: T,
    pub nu: T,
    pub omega: T,
    pub p_mu: T,
    pub p_nu: T,
    pub p_omega: T,
    pub p_0: T,
    pub eps_sec: T,
    pub eps_cor: T,
    /// Bits revealed during error correction.
    pub lambda_ec: T,
}

impl<T: Real> DecoyParams<T> {
    /// Intensities 0.40/0.20/0.40 sent with probabilities 0.60/0.20/0.15,
    /// vacuum 0.05.
    pub fn standard(eps_sec: T, eps_cor: T, lambda_ec: T) -> Self {
        Self {
            mu: T::lit(0.40),
            nu: T::lit(0.20),
            omega: T::lit(0.40),
            p_mu: T::lit(0.60),
            p_nu: T::lit(0.20),
            p_omega: T::lit(0.15),
            p_0: T::lit(0.05),
            eps_sec,
            eps_cor,
            lambda_ec,
        }
    }

    pub fn validate(&self) -> Result<(), KeyRateError> {
        let zero = T::zero();
        if !(self.mu > self.nu && self.nu > zero && self.omega > zero) || !self.mu.is_finite() || !self.omega.is_finite() {
            return Err(KeyRateError::DegenerateIntensities);
        }
        let probabilities = [self.p_mu, self.p_nu, self.p_omega, self.p_0];
        let sum = probabilities.iter().fold(zero, |acc, &p| acc + p);
        let tolerance = T::lit(1e-9).max(T::epsilon() * T::lit(8.0));
        if probabilities.iter().any(|&p| !(p > zero)) || (sum - T::one()).abs() > tolerance {
            return Err(KeyRateError::InvalidProbabilities);
        }
        for (name, value) in [("eps_sec", self.eps_sec), ("eps_cor", self.eps_cor)] {
            if !(value > zero && value < T::one()) {
                return Err(KeyRateError::InvalidEpsilon { name, value: value.to_f64_lossy() });
            }
        }
        if !(self.lambda_ec >= zero) || !self.lambda_ec.is_finite() {
            return Err(KeyRateError::InvalidLeakage);
        }
        Ok(())
    }

    /// `ln(22 / eps_sec)`.
    pub fn beta(&self) -> T {
        (T::lit(22.0) / self.eps_sec).ln()
    }
}

/// Detections per intensity and basis, plus X-basis errors in the ω set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservedCounts {
    pub n_mu_z: u64,
    pub n_nu_z: u64,
    pub n_0_z: u64,
    pub n_mu_x: u64,
    pub n_nu_x: u64,
    pub n_0_x: u64,
    pub m_omega_x: u64,
}

/// `h(x) = -x log2 x - (1 - x) log2 (1 - x)`, with `h(0) = h(1) = 0`.
pub fn binary_entropy<T: Real>(x: T) -> Result<T, KeyRateError> {
    if !(x >= T::zero() && x <= T::one()) {
        return Err(KeyRateError::EntropyDomain(x.to_f64_lossy()));
    }
    let term = |p: T| if p > T::zero() { -p * p.log2() } else { T::zero() };
    Ok(term(x) + term(T::one() - x))
}

/// Bounds on the expected value behind an observation `x`:
/// `(x - β/2 - sqrt(2βx + β²/4), x + β + sqrt(2βx + β²))`, lower clamped at 0.
pub fn chernoff_expected_bounds<T: Real>(x: T, beta: T) -> (T, T) {
    let two = T::lit(2.0);
    let lower = x - beta / two - (two * beta * x + beta * beta / T::lit(4.0)).sqrt();
    let upper = x + beta + (two * beta * x + beta * beta).sqrt();
    (lower.max(T::zero()), upper)
}

/// Bounds on an observation with expected value `x_star`:
/// `(x* - sqrt(2βx*), x* + β/2 + sqrt(2βx* + β²/4))`, lower clamped at 0.
pub fn chernoff_observed_bounds<T: Real>(x_star: T, beta: T) -> (T, T) {
    let two = T::lit(2.0);
    let lower = x_star - (two * beta * x_star).sqrt();
    let upper = x_star + beta / two + (two * beta * x_star + beta * beta / T::lit(4.0)).sqrt();
    (lower.max(T::zero()), upper)
}

/// Upper correction for random sampling without replacement: how far the
/// error rate of `n` items can exceed the rate `lambda` seen in `k` others,
/// except with probability `eps`.
pub fn gamma_upper<T: Real>(n: T, k: T, lambda: T, eps: T) -> Result<T, KeyRateError> {
    let (zero, one, two) = (T::zero(), T::one(), T::lit(2.0));
    if !(n > zero && k > zero && lambda > zero && lambda < one && eps > zero && eps < one) {
        return Err(KeyRateError::GammaDomain);
    }
    let sum = n + k;
    let a = n.max(k);
    let g = sum / (n * k)
        * (sum / (two * T::lit(std::f64::consts::PI) * n * k * lambda * (one - lambda) * eps * eps)).ln();
    if !(g >= zero) {
        return Err(KeyRateError::GammaDomain);
    }
    let numerator = (one - two * lambda) * a * g / sum
        + (a * a * g * g / (sum * sum) + T::lit(4.0) * lambda * (one - lambda) * g).sqrt();
    let denominator = two + two * a * a * g / (sum * sum);
    Ok(numerator / denominator)
}

/// Vacuum and single-photon estimates, as expected values (`*_expected`)
/// and converted to observed lower bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoyEstimates<T> {
    pub beta: T,
    pub s0_zz_expected: T,
    pub s1_zz_expected: T,
    pub s1_xx_expected: T,
    pub t0_xx_lower: T,
    pub t1_xx_upper: T,
    pub s0_zz_lower: T,
    pub s1_zz_lower: T,
    pub s1_xx_lower: T,
}

fn count<T: Real>(c: u64) -> T {
    T::from_u64(c).expect("u64 converts to a float")
}

pub fn decoy_estimates<T: Real>(counts: &ObservedCounts, params: &DecoyParams<T>) -> Result<DecoyEstimates<T>, KeyRateError> {
    params.validate()?;
    let beta = params.beta();
    let DecoyParams { mu, nu, omega, p_mu, p_nu, p_omega, p_0, .. } = *params;
    let lower = |c: u64| chernoff_expected_bounds(count::<T>(c), beta).0;
    let upper = |c: u64| chernoff_expected_bounds(count::<T>(c), beta).1;
    let zero = T::zero();

    let s0_zz_expected = ((-mu).exp() * p_mu + (-nu).exp() * p_nu) * lower(counts.n_0_z) / p_0;

    let denominator = mu * nu - nu * nu;
    let bracket = |n_nu: u64, n_mu: u64, n_0: u64| {
        nu.exp() * lower(n_nu) / p_nu - nu * nu / (mu * mu) * mu.exp() * upper(n_mu) / p_mu
            - (mu * mu - nu * nu) / (mu * mu) * upper(n_0) / p_0
    };
    let s1_zz_expected = (mu * mu * (-mu).exp() * p_mu + mu * nu * (-nu).exp() * p_nu) / denominator
        * bracket(counts.n_nu_z, counts.n_mu_z, counts.n_0_z);
    let s1_xx_expected =
        mu * omega * (-omega).exp() * p_omega / denominator * bracket(counts.n_nu_x, counts.n_mu_x, counts.n_0_x);

    let t0_xx_lower = (-omega).exp() * p_omega / (T::lit(2.0) * p_0) * lower(counts.n_0_x);
    let t1_xx_upper = (count::<T>(counts.m_omega_x) - t0_xx_lower).max(zero);

    let (s0_zz_expected, s1_zz_expected, s1_xx_expected) =
        (s0_zz_expected.max(zero), s1_zz_expected.max(zero), s1_xx_expected.max(zero));
    Ok(DecoyEstimates {
        beta,
        s0_zz_expected,
        s1_zz_expected,
        s1_xx_expected,
        t0_xx_lower,
        t1_xx_upper,
        s0_zz_lower: chernoff_observed_bounds(s0_zz_expected, beta).0,
        s1_zz_lower: chernoff_observed_bounds(s1_zz_expected, beta).0,
        s1_xx_lower: chernoff_observed_bounds(s1_xx_expected, beta).0,
    })
}

/// Conditions under which the phase-error bound fell back to its most
/// pessimistic value or the key length was forced to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Diagnostic {
    /// No X-basis single-photon events can be certified; the key is empty.
    NoSinglePhotonsX,
    /// No Z-basis single-photon events can be certified, so the sampling
    /// correction is undefined; the phase error is taken as 1/2.
    NoSinglePhotonsZ,
    /// No single-photon bit errors remain after subtracting vacuum
    /// contributions. The sampling correction tends to at least 1 as the
    /// observed rate goes to 0, so the phase error is taken as 1/2.
    ZeroErrorRate,
    /// The observed single-photon error rate is 1 or more.
    ErrorRateSaturated,
    /// The sampling correction's log term is negative (sample sizes too
    /// large for the requested failure probability); the phase error is
    /// taken as 1/2.
    SamplingCorrectionUndefined,
    /// The phase-error bound exceeded 1/2 and was clamped.
    PhaseErrorClamped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRateResult<T> {
    pub s0_zz_lower: T,
    pub s1_zz_lower: T,
    pub s1_xx_lower: T,
    pub t1_xx_upper: T,
    /// `t1_xx_upper / s1_xx_lower`, when defined.
    pub error_rate_xx: Option<T>,
    pub phi1_zz_upper: T,
    /// Key length before flooring; may be negative.
    pub ell_raw: T,
    /// `max(0, floor(ell_raw))`.
    pub ell: T,
    pub diagnostics: Vec<Diagnostic>,
}

/// `φ̄ = t̄₁/s̲₁ˣˣ + γᵁ(s̲₁ᶻᶻ, s̲₁ˣˣ, t̄₁/s̲₁ˣˣ, ε_sec/22)`, clamped to
/// `[0, 1/2]`, then
/// `ℓ = s̲₀ + s̲₁ᶻᶻ(1 - h(φ̄)) - λ_EC - log2(2/ε_cor) - 6 log2(22/ε_sec)`.
pub fn key_length<T: Real>(estimates: &DecoyEstimates<T>, params: &DecoyParams<T>) -> Result<KeyRateResult<T>, KeyRateError> {
    params.validate()?;
    let (zero, one, half) = (T::zero(), T::one(), T::lit(0.5));
    let mut diagnostics = Vec::new();
    let base = KeyRateResult {
        s0_zz_lower: estimates.s0_zz_lower,
        s1_zz_lower: estimates.s1_zz_lower,
        s1_xx_lower: estimates.s1_xx_lower,
        t1_xx_upper: estimates.t1_xx_upper,
        error_rate_xx: None,
        phi1_zz_upper: half,
        ell_raw: zero,
        ell: zero,
        diagnostics: Vec::new(),
    };

    if !(estimates.s1_xx_lower > zero) {
        diagnostics.push(Diagnostic::NoSinglePhotonsX);
        return Ok(KeyRateResult { diagnostics, ..base });
    }
    let lambda = estimates.t1_xx_upper / estimates.s1_xx_lower;
    let phi = if !(estimates.s1_zz_lower > zero) {
        diagnostics.push(Diagnostic::NoSinglePhotonsZ);
        half
    } else if lambda <= zero {
        diagnostics.push(Diagnostic::ZeroErrorRate);
        half
    } else if lambda >= one {
        diagnostics.push(Diagnostic::ErrorRateSaturated);
        half
    } else {
        match gamma_upper(estimates.s1_zz_lower, estimates.s1_xx_lower, lambda, params.eps_sec / T::lit(22.0)) {
            Ok(gamma) if lambda + gamma > half => {
                diagnostics.push(Diagnostic::PhaseErrorClamped);
                half
            }
            Ok(gamma) => lambda + gamma,
            Err(_) => {
                diagnostics.push(Diagnostic::SamplingCorrectionUndefined);
                half
            }
        }
    };
    let ell_raw = secret_key_length(estimates.s0_zz_lower, estimates.s1_zz_lower, phi, params)?;
    Ok(KeyRateResult {
        error_rate_xx: Some(lambda),
        phi1_zz_upper: phi,
        ell_raw,
        ell: ell_raw.floor().max(zero),
        diagnostics,
        ..base
    })
}

/// `ℓ = s0 + s1 (1 - h(phi)) - λ_EC - log2(2/ε_cor) - 6 log2(22/ε_sec)`,
/// before flooring.
pub fn secret_key_length<T: Real>(s0: T, s1: T, phi: T, params: &DecoyParams<T>) -> Result<T, KeyRateError> {
    Ok(s0 + s1 * (T::one() - binary_entropy(phi)?)
        - params.lambda_ec
        - (T::lit(2.0) / params.eps_cor).log2()
        - T::lit(6.0) * (T::lit(22.0) / params.eps_sec).log2())
}

/// Estimates and key length in one call.
pub fn compute_key_rate<T: Real>(counts: &ObservedCounts, params: &DecoyParams<T>) -> Result<KeyRateResult<T>, KeyRateError> {
    key_length(&decoy_estimates(counts, params)?, params)
}

/// A common stand-in for error-correction leakage: `f_ec · n_z · h(e_z)`,
/// with `f_ec` typically 1.16.
pub fn error_correction_leakage<T: Real>(n_z: u64, e_z: T, f_ec: T) -> Result<T, KeyRateError> {
    Ok(f_ec * count::<T>(n_z) * binary_entropy(e_z)?)
}

/// A `keyrate` input document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyRateInput<T> {
    pub params: DecoyParams<T>,
    pub counts: ObservedCounts,
}
