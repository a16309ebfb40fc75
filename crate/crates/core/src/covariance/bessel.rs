//! Modified Bessel function of the second kind, real order.
//!
//! Temme's series for small arguments, Steed's continued fraction for large
//! ones, followed by upward recurrence in the order. Accuracy is close to
//! machine precision for the orders used by Matern covariances.

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 10_000;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// K_nu(x) for nu >= 0, x > 0. Returns +inf at x = 0 and 0 once exp(-x)
/// underflows.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    assert!(nu >= 0.0, "order must be nonnegative");
    assert!(x >= 0.0, "argument must be nonnegative");
    if x == 0.0 {
        return f64::INFINITY;
    }

    // Reduce to K_mu, K_{mu+1} with |mu| <= 1/2, then recur upward.
    let n = (nu + 0.5).floor() as usize;
    let mu = nu - n as f64;

    let (mut k_mu, mut k_mu1) = if x <= 2.0 {
        temme_series(mu, x)
    } else {
        steed_cf2(mu, x)
    };

    for i in 1..=n {
        let next = 2.0 * (mu + i as f64) / x * k_mu1 + k_mu;
        k_mu = k_mu1;
        k_mu1 = next;
    }
    k_mu
}

/// Temme's series for K_mu(x) and K_{mu+1}(x), x <= 2, |mu| <= 1/2.
fn temme_series(mu: f64, x: f64) -> (f64, f64) {
    let x2 = 0.5 * x;
    let pi_mu = std::f64::consts::PI * mu;
    let fact = if pi_mu.abs() < 1e-300 {
        1.0
    } else {
        pi_mu / pi_mu.sin()
    };
    let mut d = -x2.ln();
    let mut e = mu * d;
    let fact2 = if e.abs() < 1e-300 { 1.0 } else { e.sinh() / e };
    let (gam1, gam2, gam_pl, gam_mi) = gamma_pair(mu);

    let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
    let mut sum = ff;
    e = e.exp();
    let mut p = 0.5 * e / gam_pl;
    let mut q = 0.5 / (e * gam_mi);
    let mut c = 1.0;
    d = x2 * x2;
    let mut sum1 = p;
    for i in 1..=MAX_ITER {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi - mu * mu);
        c *= d / fi;
        p /= fi - mu;
        q /= fi + mu;
        let del = c * ff;
        sum += del;
        let del1 = c * (p - fi * ff);
        sum1 += del1;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    (sum, sum1 * 2.0 / x)
}

/// Steed's continued fraction CF2 for K_mu(x) and K_{mu+1}(x), x > 2.
fn steed_cf2(mu: f64, x: f64) -> (f64, f64) {
    let a1 = 0.25 - mu * mu;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = delh;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..=MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    let h = a1 * h;
    let k_mu = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k_mu1 = k_mu * (mu + x + 0.5 - h) / x;
    (k_mu, k_mu1)
}

/// Evaluates gam1 = [1/Gamma(1-mu) - 1/Gamma(1+mu)]/(2 mu),
/// gam2 = [1/Gamma(1-mu) + 1/Gamma(1+mu)]/2, together with
/// 1/Gamma(1+mu) and 1/Gamma(1-mu).
fn gamma_pair(mu: f64) -> (f64, f64, f64, f64) {
    let gam_pl = 1.0 / libm::tgamma(1.0 + mu);
    let gam_mi = 1.0 / libm::tgamma(1.0 - mu);
    let gam2 = 0.5 * (gam_mi + gam_pl);
    let gam1 = if mu.abs() < 1e-8 {
        // limit of the difference quotient as mu -> 0
        EULER_GAMMA
    } else {
        (gam_mi - gam_pl) / (2.0 * mu)
    };
    (gam1, gam2, gam_pl, gam_mi)
}
