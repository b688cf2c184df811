//! Nested adaptive Gauss-Kronrod quadrature for the conjugate evidence.
//! Shared by test targets via `#[path]`.

use statrs::function::gamma::ln_gamma;

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

pub fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive Gauss-Kronrod: bisect the interval with the largest
/// error estimate until the total error is below `rel_tol` of the total.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    let pieces = 16;
    let w = (b - a) / pieces as f64;
    let mut parts: Vec<(f64, f64, f64, f64)> = (0..pieces)
        .map(|k| {
            let (lo, hi) = (a + k as f64 * w, a + (k + 1) as f64 * w);
            let (v, e) = gk15(&f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    for _ in 0..20_000 {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= rel_tol * total.abs() {
            return total;
        }
        let worst = (0..parts.len())
            .max_by(|&i, &j| parts[i].3.total_cmp(&parts[j].3))
            .unwrap();
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    panic!("quadrature did not converge");
}

fn ln_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * (x - mean).powi(2) / var
}

fn ln_scaled_inv_chi2(var: f64, nu: f64, s: f64) -> f64 {
    let h = 0.5 * nu;
    h * (h * s).ln() - ln_gamma(h) - (h + 1.0) * var.ln() - h * s / var
}

/// Evidence of `x` under the conjugate prior, integrating the mean and the
/// log-variance numerically.
pub fn quadrature_log_evidence(x: &[f64], mu0: f64, lambda0: f64, nu0: f64, s0: f64) -> f64 {
    let n = x.len() as f64;
    let xbar = x.iter().sum::<f64>() / n;
    // Subtract a data-only constant so the integrand stays near unit scale.
    let ss: f64 = x.iter().map(|v| (v - xbar).powi(2)).sum();
    let shift =
        -0.5 * n * (2.0 * std::f64::consts::PI).ln() - 0.5 * n * ((ss + nu0 * s0) / (n + nu0)).ln();
    let inner = |var: f64| {
        let sd = (var / (lambda0 + n)).sqrt();
        let lo = xbar.min(mu0) - 40.0 * sd;
        let hi = xbar.max(mu0) + 40.0 * sd;
        integrate(
            |mu| {
                let ll: f64 = x.iter().map(|&v| ln_normal(v, mu, var)).sum();
                (ll + ln_normal(mu, mu0, var / lambda0) - shift).exp()
            },
            lo,
            hi,
            1e-11,
        )
    };
    let outer = integrate(
        |u: f64| {
            let var = u.exp();
            inner(var) * (ln_scaled_inv_chi2(var, nu0, s0) + u).exp()
        },
        -25.0,
        25.0,
        1e-10,
    );
    outer.ln() + shift
}
