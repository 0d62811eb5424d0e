use serde::{Deserialize, Serialize};

/// Robust loss applied to the squared (whitened) norm of a residual block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "scale", rename_all = "lowercase")]
pub enum Loss {
    #[default]
    None,
    /// Cauchy loss with scale in the residual's units (meters for ranges).
    Cauchy(f64),
}

impl Loss {
    /// `(ρ(s), ρ′(s), ρ″(s))` for squared norm `s`.
    pub fn evaluate(&self, s: f64) -> [f64; 3] {
        match *self {
            Loss::None => [s, 1.0, 0.0],
            Loss::Cauchy(c) => cauchy_cost(s, c),
        }
    }
}

/// `ρ(s) = c²·ln(1 + s/c²)` and its first two derivatives in `s`.
pub fn cauchy_cost(s: f64, c: f64) -> [f64; 3] {
    let c2 = c * c;
    let sum = 1.0 + s / c2;
    let inv = 1.0 / sum;
    [c2 * sum.ln(), inv, -inv * inv / c2]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cauchy_values() {
        for c in [0.5, 1.0, 3.0] {
            assert_eq!(cauchy_cost(0.0, c), [0.0, 1.0, -1.0 / (c * c)]);
            let [rho, _, _] = cauchy_cost(c * c, c);
            assert!((rho - c * c * std::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn cauchy_derivatives_match_differences() {
        let c = 0.8;
        let h = 1e-6;
        for s in [0.01, 0.5, 2.0, 40.0] {
            let [_, d1, d2] = cauchy_cost(s, c);
            let fd1 = (cauchy_cost(s + h, c)[0] - cauchy_cost(s - h, c)[0]) / (2.0 * h);
            let fd2 = (cauchy_cost(s + h, c)[1] - cauchy_cost(s - h, c)[1]) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-8);
            assert!((d2 - fd2).abs() < 1e-8);
        }
    }
}
