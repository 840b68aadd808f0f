//! Closed-form reference values used by the tests and printed by `oracle <name>`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const NAMES: [&str; 7] = [
    "cauchy_decay",
    "cos_periodic",
    "poincare_rate",
    "weak_norm_split",
    "soft_threshold",
    "stationary_heat",
    "chatter_zero",
];

pub fn oracle_names() -> &'static [&'static str] {
    &NAMES
}

/// Named reference values for one oracle.
pub fn oracle(name: &str) -> Result<Vec<(String, f64)>> {
    let v = |k: &str, x: f64| (k.to_string(), x);
    Ok(match name {
        // u' = -u, u(0) = 1, b = 1
        "cauchy_decay" => {
            let n = 1000;
            vec![
                v("u(1)", (-1.0f64).exp()),
                v("backward_euler_n1000", (1.0 + 1.0 / n as f64).powi(-n)),
            ]
        }
        // -u' = u - cos t: u(t) = (cos t + sin t) / 2
        "cos_periodic" => vec![
            v("u(0)", 0.5),
            v("u(pi/2)", 0.5),
            v("u(pi)", -0.5),
            v("max_u", 0.5 * 2f64.sqrt()),
            v("b", 2.0 * PI),
        ],
        // A(u) = u, b = 1
        "poincare_rate" => vec![v("expected_rate", (-1.0f64).exp()), v("stated_rate", (-2.0f64).exp())],
        // h = +1 on [0, b/2], -1 after, b = 1
        "weak_norm_split" => vec![v("weak_norm", 0.5)],
        // prox of tau |.| with tau = 1
        "soft_threshold" => vec![v("prox(1.5)", 0.5), v("prox(-2.25)", -1.25), v("prox(0.3)", 0.0)],
        "stationary_heat" => {
            let u = stationary_heat(49, 1.0, 1.0);
            let mid = u[24];
            vec![v("u(0.5)", mid), v("continuous_u(0.5)", 0.125), v("u(0.02)", u[0])]
        }
        // interval [-1, 1], target 0, delta = 0.1
        "chatter_zero" => vec![v("weak_gap", 0.05), v("half_window", 0.05)],
        other => {
            return Err(Error::config(
                "oracle",
                format!("unknown oracle \"{other}\", expected one of {}", NAMES.join(", ")),
            ))
        }
    })
}

/// Discrete stationary solution of `-u'' = f0` on `(0, extent)` with zero
/// boundary values: the tridiagonal system solved by the Thomas algorithm.
pub fn stationary_heat(nodes: usize, extent: f64, f0: f64) -> Vec<f64> {
    let h = extent / (nodes + 1) as f64;
    let (a, d) = (-1.0 / (h * h), 2.0 / (h * h));
    let mut c = vec![0.0; nodes];
    let mut r = vec![0.0; nodes];
    let mut prev_c = 0.0;
    let mut prev_r = 0.0;
    for i in 0..nodes {
        let m = d - a * prev_c;
        c[i] = a / m;
        r[i] = (f0 - a * prev_r) / m;
        prev_c = c[i];
        prev_r = r[i];
    }
    let mut u = vec![0.0; nodes];
    let mut next = 0.0;
    for i in (0..nodes).rev() {
        u[i] = r[i] - c[i] * next;
        next = u[i];
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_names_resolve() {
        for n in oracle_names() {
            assert!(!oracle(n).unwrap().is_empty());
        }
        assert!(oracle("nope").is_err());
    }

    #[test]
    fn stationary_heat_is_exact_for_quadratics() {
        let u = stationary_heat(49, 1.0, 1.0);
        for (i, ui) in u.iter().enumerate() {
            let z = (i + 1) as f64 / 50.0;
            assert!((ui - z * (1.0 - z) / 2.0).abs() < 1e-13);
        }
    }
}
