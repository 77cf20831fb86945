//! Cosine integral.

use num_complex::Complex64;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `Cin(x) = ∫₀ˣ (1 − cos u)/u du = γ + ln x − Ci(x)`.
pub fn cin(x: f64) -> f64 {
    let x = x.abs();
    if x <= 2.0 {
        // Σ_{k≥1} (−1)^{k+1} x^{2k} / (2k (2k)!)
        let x2 = x * x;
        let mut term = 1.0; // x^{2k}/(2k)! at k = 0
        let mut sum = 0.0;
        for k in 1..40 {
            term *= -x2 / ((2 * k - 1) as f64 * (2 * k) as f64);
            let contrib = -term / (2 * k) as f64;
            sum += contrib;
            if contrib.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        EULER_GAMMA + x.ln() - ci(x)
    }
}

/// `Ci(x) = −∫ₓ^∞ cos u / u du` for `x > 0`.
pub fn ci(x: f64) -> f64 {
    assert!(x > 0.0, "Ci is defined here for x > 0");
    if x <= 2.0 {
        return EULER_GAMMA + x.ln() - cin(x);
    }
    // E₁(ix) by modified Lentz continued fraction; Ci(x) = −Re E₁(ix).
    let tiny = 1e-300;
    let mut b = Complex64::new(1.0, x);
    let mut c = Complex64::new(1.0 / tiny, 0.0);
    let mut d = Complex64::new(1.0, 0.0) / b;
    let mut h = d;
    for i in 2..1000 {
        let a = -((i - 1) as f64).powi(2);
        b += 2.0;
        d = Complex64::new(1.0, 0.0) / (d * a + b);
        c = b + a / c;
        let del = c * d;
        h *= del;
        if (del.re - 1.0).abs() + del.im.abs() < 1e-16 {
            break;
        }
    }
    h *= Complex64::new(x.cos(), -x.sin());
    -h.re
}
