//! Numerical oracles shared by the integration tests. Nothing here calls
//! into the closed-form engine.

#![allow(dead_code)]

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton iteration on P_n).
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
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
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite Gauss-Legendre over [lo, hi] with `panels` panels of 20 nodes.
pub fn integrate(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    thread_local! {
        static NODES: Vec<(f64, f64)> = gauss_legendre(20);
    }
    NODES.with(|nodes| {
        let h = (hi - lo) / panels as f64;
        let mut total = 0.0;
        for k in 0..panels {
            let a = lo + k as f64 * h;
            let mid = a + 0.5 * h;
            total += nodes.iter().map(|&(x, w)| w * f(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h;
        }
        total
    })
}

/// First-order cluster cumulant function, written out directly.
pub fn kappa1(z: f64, t: f64, a: f64, b: f64) -> f64 {
    if z > t {
        return 0.0;
    }
    if a == b {
        1.0 + a * (t - z)
    } else {
        b / (b - a) + a / (a - b) * ((a - b) * (t - z)).exp()
    }
}

/// Second-order cluster cumulant function by quadrature of the branching
/// recursion: a ∫_0^{t1-z} e^{(a-b)y} κ1(z+y, t1) κ1(z+y, t2) dy.
pub fn kappa2(z: f64, t1: f64, t2: f64, a: f64, b: f64) -> f64 {
    let lo = t1.min(t2);
    integrate(
        &|y| a * ((a - b) * y).exp() * kappa1(z + y, t1, a, b) * kappa1(z + y, t2, a, b),
        0.0,
        lo - z,
        8,
    )
}

/// Second joint cumulant of (X_{t1}, X_{t2}) by nested quadrature.
pub fn cumulant2(t1: f64, t2: f64, a: f64, b: f64, nu: f64) -> f64 {
    let lo = t1.min(t2);
    nu * integrate(
        &|z| kappa2(z, t1, t2, a, b) + kappa1(z, t1, a, b) * kappa1(z, t2, a, b),
        0.0,
        lo,
        8,
    )
}

/// Third-order cluster cumulant function of (t, t, t) by nested quadrature.
pub fn kappa3_diag(z: f64, t: f64, a: f64, b: f64) -> f64 {
    integrate(
        &|y| {
            let w = z + y;
            let k1 = kappa1(w, t, a, b);
            a * ((a - b) * y).exp() * (k1 * k1 * k1 + 3.0 * kappa2(w, t, t, a, b) * k1)
        },
        0.0,
        t - z,
        4,
    )
}

pub fn rel_err(x: f64, y: f64) -> f64 {
    (x - y).abs() / x.abs().max(y.abs()).max(1e-300)
}

/// E[X_t X_T], closed form, transcribed term by term.
pub fn closed_joint_second_moment(a: f64, b: f64, t: f64, tt: f64) -> f64 {
    let e = f64::exp;
    let inner = 2.0 * b.powi(4) * t * e(a * t + b * (t + tt))
        + a * a * b
            * (-e(a * (2.0 * t + tt))
                + e(2.0 * b * t + a * tt)
                + 2.0 * b * t * e(2.0 * a * t + b * tt)
                + 2.0 * b * t * e(b * t + a * (t + tt)))
        + 2.0 * a.powi(3)
            * (e(a * (2.0 * t + tt)) - b * t * e(2.0 * a * t + b * tt) - e(b * t + a * (t + tt)) * (1.0 + b * t))
        - 2.0 * a * b * b
            * (e(2.0 * b * t + a * tt) - 2.0 * e(2.0 * a * t + b * tt) - e(b * t + a * (t + tt))
                + e(a * t + b * (t + tt)) * (2.0 + b * t));
    let first = |s: f64| b * b * s + a * (e((a - b) * s) - b * s - 1.0);
    (0.5 * e(-a * t - b * (t + tt)) * inner + first(t) * first(tt)) / (a - b).powi(4)
}

/// E[X_t^2], closed form, transcribed term by term.
pub fn closed_second_moment(a: f64, b: f64, t: f64) -> f64 {
    let e = f64::exp;
    let sq = (b * b * t + a * (-1.0 + e((a - b) * t) - b * t)).powi(2) / (a - b).powi(4);
    let inner = e(-2.0 * b * t)
        * (2.0 * b.powi(4) * e(2.0 * b * t) * t
            + a * a * b * (-e(2.0 * a * t) + e(2.0 * b * t) + 4.0 * b * e((a + b) * t) * t)
            - 2.0 * a * b * b * (-3.0 * e((a + b) * t) + e(2.0 * b * t) * (3.0 + b * t))
            + 2.0 * a.powi(3) * (e(2.0 * a * t) - e((a + b) * t) * (1.0 + 2.0 * b * t)));
    sq + inner / (2.0 * (a - b).powi(4))
}

/// First moment E[X_t] in closed form.
pub fn first_moment(a: f64, b: f64, nu: f64, t: f64) -> f64 {
    nu * (b * b * t + a * (((a - b) * t).exp() - b * t - 1.0)) / (a - b).powi(2)
}
