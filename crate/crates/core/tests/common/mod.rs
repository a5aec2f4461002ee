//! Independent reference implementations shared by the integration tests
//! and the acceptance harness.
#![allow(dead_code)]

use qba_core::keyrate::{DecoyParams, ObservedCounts};
use twofloat::TwoFloat;

/// Builds the full `p × q` hashing matrix and multiplies.
///
/// Column 0 is the initial state. Each later column copies rows `1..p` of
/// the previous column into rows `0..p-1`; the last row is the parity of
/// the previous column's rows selected by `taps`.
pub fn dense_digest(message: &[bool], init: &[bool], taps: &[bool]) -> Vec<bool> {
    let p = init.len();
    let q = message.len();
    let mut matrix = vec![vec![false; q]; p];
    for (i, &bit) in init.iter().enumerate() {
        matrix[i][0] = bit;
    }
    for j in 1..q {
        for i in 0..p - 1 {
            matrix[i][j] = matrix[i + 1][j - 1];
        }
        matrix[p - 1][j] = (0..p).filter(|&i| taps[i] && matrix[i][j - 1]).count() % 2 == 1;
    }
    (0..p)
        .map(|i| (0..q).filter(|&j| matrix[i][j] && message[j]).count() % 2 == 1)
        .collect()
}

fn tf(x: f64) -> TwoFloat {
    TwoFloat::from(x)
}

fn tmax(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    if a > b {
        a
    } else {
        b
    }
}

fn log2(x: TwoFloat) -> TwoFloat {
    x.ln() / TwoFloat::from(2.0).ln()
}

/// Intermediate and final values of the key-length pipeline.
#[derive(Debug, Clone, Copy)]
pub struct OracleKeyRate {
    pub s0_zz_lower: f64,
    pub s1_zz_lower: f64,
    pub s1_xx_lower: f64,
    pub t1_xx_upper: f64,
    pub phi1_zz_upper: f64,
    pub ell_raw: f64,
}

/// Straight-line transcription of the finite-key formulas in double-double
/// arithmetic. Only meant for inputs where every quantity is strictly
/// inside its domain (no zero single-photon counts, error rate in (0, 1)).
pub fn oracle_key_rate(counts: &ObservedCounts, params: &DecoyParams<f64>) -> OracleKeyRate {
    let zero = tf(0.0);
    let (mu, nu, om) = (tf(params.mu), tf(params.nu), tf(params.omega));
    let (pm, pn, po, p0) = (tf(params.p_mu), tf(params.p_nu), tf(params.p_omega), tf(params.p_0));
    let eps_sec = tf(params.eps_sec);
    let beta = (tf(22.0) / eps_sec).ln();
    let two = tf(2.0);

    let exp_upper = |x: u64| {
        let x = tf(x as f64);
        x + beta + (two * beta * x + beta * beta).sqrt()
    };
    let exp_lower = |x: u64| {
        let x = tf(x as f64);
        tmax(zero, x - beta / two - (two * beta * x + beta * beta / tf(4.0)).sqrt())
    };
    let obs_lower = |x: TwoFloat| tmax(zero, x - (two * beta * x).sqrt());

    let s0_star = tmax(zero, ((-mu).exp() * pm + (-nu).exp() * pn) * exp_lower(counts.n_0_z) / p0);
    let denom = mu * nu - nu * nu;
    let s1zz_star = tmax(
        zero,
        (mu * mu * (-mu).exp() * pm + mu * nu * (-nu).exp() * pn) / denom
            * (nu.exp() * exp_lower(counts.n_nu_z) / pn
                - nu * nu / (mu * mu) * mu.exp() * exp_upper(counts.n_mu_z) / pm
                - (mu * mu - nu * nu) / (mu * mu) * exp_upper(counts.n_0_z) / p0),
    );
    let s1xx_star = tmax(
        zero,
        mu * om * (-om).exp() * po / denom
            * (nu.exp() * exp_lower(counts.n_nu_x) / pn
                - nu * nu / (mu * mu) * mu.exp() * exp_upper(counts.n_mu_x) / pm
                - (mu * mu - nu * nu) / (mu * mu) * exp_upper(counts.n_0_x) / p0),
    );
    let t0 = (-om).exp() * po / (two * p0) * exp_lower(counts.n_0_x);
    let t1 = tmax(zero, tf(counts.m_omega_x as f64) - t0);

    let s0 = obs_lower(s0_star);
    let s1zz = obs_lower(s1zz_star);
    let s1xx = obs_lower(s1xx_star);

    let lambda = t1 / s1xx;
    let (n, k) = (s1zz, s1xx);
    let eps = eps_sec / tf(22.0);
    let a = tmax(n, k);
    let g = (n + k) / (n * k)
        * ((n + k) / (two * TwoFloat::from(std::f64::consts::PI) * n * k * lambda * (tf(1.0) - lambda) * eps * eps)).ln();
    let gamma = ((tf(1.0) - two * lambda) * a * g / (n + k)
        + (a * a * g * g / ((n + k) * (n + k)) + tf(4.0) * lambda * (tf(1.0) - lambda) * g).sqrt())
        / (two + two * a * a * g / ((n + k) * (n + k)));
    let mut phi = lambda + gamma;
    if phi > tf(0.5) {
        phi = tf(0.5);
    }
    let h = -phi * log2(phi) - (tf(1.0) - phi) * log2(tf(1.0) - phi);
    let ell = s0 + s1zz * (tf(1.0) - h)
        - tf(params.lambda_ec)
        - log2(two / tf(params.eps_cor))
        - tf(6.0) * log2(tf(22.0) / eps_sec);

    OracleKeyRate {
        s0_zz_lower: s0.into(),
        s1_zz_lower: s1zz.into(),
        s1_xx_lower: s1xx.into(),
        t1_xx_upper: t1.into(),
        phi1_zz_upper: phi.into(),
        ell_raw: ell.into(),
    }
}

/// A synthetic link: `total` pulses, channel transmittance `eta`, dark
/// yield `y0`, X-basis error rate `e_x`, Z/X basis split 0.9/0.1 for the
/// μ and ν settings and X basis for ω.
pub fn synthetic_counts(total: f64, eta: f64, y0: f64, e_x: f64, params: &DecoyParams<f64>) -> ObservedCounts {
    let gain = |k: f64| 1.0 - (-eta * k).exp() + y0;
    let round = |x: f64| x.round() as u64;
    let (qz, qx) = (0.9, 0.1);
    ObservedCounts {
        n_mu_z: round(total * params.p_mu * qz * gain(params.mu)),
        n_nu_z: round(total * params.p_nu * qz * gain(params.nu)),
        n_0_z: round(total * params.p_0 * qz * y0),
        n_mu_x: round(total * params.p_mu * qx * gain(params.mu)),
        n_nu_x: round(total * params.p_nu * qx * gain(params.nu)),
        n_0_x: round(total * params.p_0 * qx * y0),
        m_omega_x: round(total * params.p_omega * gain(params.omega) * e_x),
    }
}

/// `|a - b| <= tol * max(|a|, |b|)`, with values below `floor` in magnitude
/// compared absolutely.
pub fn close(a: f64, b: f64, tol: f64, floor: f64) -> bool {
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= tol * scale.max(floor)
}

pub const SHIPPED_SCENARIOS: [&str; 5] = ["fig6a", "fig6b", "fig6c-d", "fig6e-f", "attack-n4f2"];

pub fn scenario_text(name: &str) -> String {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.json"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn scenario(name: &str) -> qba_core::ScenarioConfig {
    qba_core::load_scenario(&scenario_text(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}
