//! One-dimensional quadrature helpers on top of the double-exponential rule.

use quadrature::double_exponential;

/// `∫_a^b f`, with `b = +∞` handled by the substitution `x = a + s/(1-s)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if b.is_infinite() {
        let g = |s: f64| {
            let d = 1.0 - s;
            f(a + s / d) / (d * d)
        };
        return double_exponential::integrate(g, 0.0, 1.0, tol).integral;
    }
    if a == b {
        return 0.0;
    }
    double_exponential::integrate(f, a, b, tol).integral
}

/// `∫ f` over `[breaks[0], breaks[last]]`, split at every interior break so
/// that kinks and jumps sit on panel endpoints.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: f64) -> f64 {
    let panels = breaks.len().saturating_sub(1).max(1) as f64;
    breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| integrate(&f, w[0], w[1], tol / panels))
        .sum()
}
