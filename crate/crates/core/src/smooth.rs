//! Quintic smoothstep and Gauss-Legendre rules shared by several modules.

/// `6τ⁵ - 15τ⁴ + 10τ³` clamped to `[0, 1]`; C² with flat ends.
pub fn smoothstep(tau: f64) -> f64 {
    if tau <= 0.0 {
        0.0
    } else if tau >= 1.0 {
        1.0
    } else {
        tau * tau * tau * (tau * (6.0 * tau - 15.0) + 10.0)
    }
}

/// Derivative of [`smoothstep`].
pub fn smoothstep_derivative(tau: f64) -> f64 {
    if tau <= 0.0 || tau >= 1.0 {
        0.0
    } else {
        30.0 * tau * tau * (tau - 1.0) * (tau - 1.0)
    }
}

/// Cutoff equal to 1 on `[0, lo]`, 0 on `[hi, ∞)` and a smoothstep in between.
pub fn plateau(t: f64, lo: f64, hi: f64) -> f64 {
    1.0 - smoothstep((t - lo) / (hi - lo))
}

/// Derivative of [`plateau`] in `t`.
pub fn plateau_derivative(t: f64, lo: f64, hi: f64) -> f64 {
    -smoothstep_derivative((t - lo) / (hi - lo)) / (hi - lo)
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
