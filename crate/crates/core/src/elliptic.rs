//! Elliptic integrals, Jacobi elliptic functions and the scaled Zolotarev
//! rational approximation to the sign function.
//!
//! The Zolotarev coefficients for a small interval edge `ell` are driven by
//! Jacobi functions of modulus `ell' = sqrt(1 - ell^2)`, which is close to 1.
//! Everything here is therefore computed from the complementary modulus
//! directly, never as `1 - (something close to 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported Zolotarev order.
pub const MAX_ORDER: usize = 8;

/// Containment target for the iteration-count predictor: the composed map
/// must send `[1/kappa, 1]` into `[1 - TABLE_THRESHOLD, 1]`.
pub const TABLE_THRESHOLD: f64 = 1e-15;

/// Chebyshev nodes used to guard the single-point containment check.
const GUARD_POINTS: usize = 17;

/// Modulus below which the Landen descent stops and a trigonometric
/// expansion is used.
const LANDEN_BASE: f64 = 1e-8;

/// Complete elliptic integral of the first kind, `K(k)`.
pub fn complete_elliptic_k(k: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::domain(format!("elliptic modulus must lie in [0, 1), got {k}")));
    }
    Ok(k_from_complement(((1.0 - k) * (1.0 + k)).sqrt()))
}

/// `K` evaluated from the complementary modulus `k' = sqrt(1 - k^2)`.
pub(crate) fn k_from_complement(kp: f64) -> f64 {
    std::f64::consts::FRAC_PI_2 / agm(1.0, kp)
}

fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    a
}

/// Jacobi elliptic functions `(sn, cn, dn)` of argument `u` and modulus `k`.
pub fn jacobi_sn_cn_dn(u: f64, k: f64) -> Result<(f64, f64, f64)> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::domain(format!("elliptic modulus must lie in [0, 1), got {k}")));
    }
    if !u.is_finite() {
        return Err(Error::domain("elliptic argument must be finite"));
    }
    Ok(sncndn(u, k, ((1.0 - k) * (1.0 + k)).sqrt()))
}

/// Descending Landen transformation. `kp` must be the complement of `k`.
fn sncndn(u: f64, k: f64, kp: f64) -> (f64, f64, f64) {
    const MAX_DEPTH: usize = 40;
    let mut steps = [(0.0f64, 0.0f64); MAX_DEPTH];
    let (mut k, mut kp, mut u) = (k, kp, u);
    let mut depth = 0;
    while k >= LANDEN_BASE && depth < MAX_DEPTH {
        let k1 = (k / (1.0 + kp)).powi(2);
        let kp1 = 2.0 * kp.sqrt() / (1.0 + kp);
        u /= 1.0 + k1;
        steps[depth] = (k1, kp1);
        depth += 1;
        k = k1;
        kp = kp1;
    }
    let (s, c) = u.sin_cos();
    let t = 0.25 * k * k * (u - s * c);
    let mut sn = s - t * c;
    let mut cn = c + t * s;
    let mut dn = 1.0 - 0.5 * k * k * s * s;
    for &(k1, kp1) in steps[..depth].iter().rev() {
        let s2 = sn * sn;
        let den = 1.0 + k1 * s2;
        // 1 - k1 sn^2 rewritten without cancellation.
        let num_dn = cn * cn + s2 * kp1 * kp1 / (1.0 + k1);
        let next_sn = (1.0 + k1) * sn / den;
        let next_cn = cn * dn / den;
        dn = num_dn / den;
        sn = next_sn;
        cn = next_cn;
    }
    (sn, cn, dn)
}

/// Coefficients of the scaled Zolotarev function of order `r` on `[ell, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZolotarevParams {
    pub r: usize,
    pub ell: f64,
    /// `c_1 < c_2 < ... < c_{2r}`.
    pub c: Vec<f64>,
    /// Partial-fraction weights `a_1..a_r`.
    pub a: Vec<f64>,
    pub m_hat: f64,
    /// `1 - ell`, carried separately because `ell` near 1 cannot hold it.
    dev: f64,
    /// `1 - Z(ell; ell)`.
    edge_dev: f64,
    /// `1 - x_k` at the r interior points where `Z` touches 1.
    touch: Vec<f64>,
}

impl ZolotarevParams {
    /// `1 - ell`, accurate to relative precision even when `ell` rounds to 1.
    pub fn deviation(&self) -> f64 {
        self.dev
    }

    /// `c_{2j-1}` for `j` in `0..r` (zero-based).
    #[inline]
    pub fn odd(&self, j: usize) -> f64 {
        self.c[2 * j]
    }

    /// `c_{2j}` for `j` in `0..r` (zero-based).
    #[inline]
    pub fn even(&self, j: usize) -> f64 {
        self.c[2 * j + 1]
    }

    /// `1 - Z(x)` for `x = 1 - dx`, from the factored form
    /// `M (1 - x) prod (x - x_k)^2 / prod (x^2 + c_{2j-1})`. Relative accuracy
    /// degrades only next to the touching points `x_k`, where the value is
    /// tiny anyway. Use [`ell_update_deviation`] at the edge itself.
    pub fn deviation_at(&self, dx: f64) -> f64 {
        let x = 1.0 - dx;
        let x2 = x * x;
        let mut v = self.m_hat * dx;
        for j in 0..self.r {
            let g = self.touch[j] - dx;
            v *= g * g / (x2 + self.odd(j));
        }
        v
    }
}

/// Builds the order-`r` coefficients for the interval `[ell, 1]`.
pub fn zolotarev_coeffs(r: usize, ell: f64) -> Result<ZolotarevParams> {
    if !(ell > 0.0 && ell < 1.0) {
        return Err(Error::domain(format!("ell must lie in (0, 1), got {ell}")));
    }
    coeffs_from_pair(r, ell, 1.0 - ell)
}

/// Same as [`zolotarev_coeffs`] but takes both `ell` and `dev = 1 - ell`.
/// Whichever of the two is smaller is treated as the accurate one; `dev = 0`
/// (the trivial interval) is accepted.
pub(crate) fn coeffs_from_pair(r: usize, ell: f64, dev: f64) -> Result<ZolotarevParams> {
    if r == 0 || r > MAX_ORDER {
        return Err(Error::UnsupportedOrder(r));
    }
    if !(ell > 0.0 && ell <= 1.0) || !(0.0..=1.0).contains(&dev) {
        return Err(Error::domain(format!("invalid interval edge ell={ell}, 1-ell={dev}")));
    }
    let ell_comp = if dev < 0.5 {
        (dev * (2.0 - dev)).sqrt()
    } else {
        ((1.0 - ell) * (1.0 + ell)).sqrt()
    };
    // K' = K(ell'), whose complement is ell itself.
    let k_prime = k_from_complement(ell);
    let order = (2 * r + 1) as f64;
    let mut c = Vec::with_capacity(2 * r);
    for i in 1..=2 * r {
        let ci = if i <= r {
            let (sn, cn, _) = sncndn(i as f64 * k_prime / order, ell_comp, ell);
            (ell * sn / cn).powi(2)
        } else {
            // sn/cn(K' - v) = cn(v) / (ell sn(v)); avoids cn near the quarter period.
            let v = (2 * r + 1 - i) as f64 * k_prime / order;
            let (sn, cn, _) = sncndn(v, ell_comp, ell);
            (cn / sn).powi(2)
        };
        c.push(ci);
    }
    let mut m_hat = 1.0;
    for j in 0..r {
        m_hat *= (1.0 + c[2 * j]) / (1.0 + c[2 * j + 1]);
    }
    let a = (0..r)
        .map(|j| {
            let cj = c[2 * j];
            let num: f64 = (0..r).map(|k| cj - c[2 * k + 1]).product();
            let den: f64 = (0..r).filter(|&k| k != j).map(|k| cj - c[2 * k]).product();
            -num / den
        })
        .collect();

    // 1 - Z has a simple zero at 1 and double zeros where Z touches 1, at
    // x_k = ell / dn((2k-1) K' / (2r+1)). Writing it in that factored form
    // keeps the edge deviation relatively accurate when it is far below eps.
    let ell2 = ell * ell;
    let mut edge_dev = m_hat * dev;
    let mut touch = Vec::with_capacity(r);
    for k in 1..=r {
        let u_num = 2 * k - 1;
        // gap = x_k - ell, one_minus = 1 - x_k, both free of cancellation.
        let (gap, one_minus) = if 2 * u_num <= 2 * r + 1 {
            let (sn, cn, dn) = sncndn(u_num as f64 * k_prime / order, ell_comp, ell);
            (
                ell * (ell_comp * sn).powi(2) / (dn * (1.0 + dn)),
                (ell_comp * cn).powi(2) / (dn * (dn + ell)),
            )
        } else {
            // x_k = dn(v) with v = K' - u.
            let v = (2 * r + 1 - u_num) as f64 * k_prime / order;
            let (sn, cn, dn) = sncndn(v, ell_comp, ell);
            (
                (ell_comp * cn).powi(2) / (dn + ell),
                (ell_comp * sn).powi(2) / (1.0 + dn),
            )
        };
        edge_dev *= gap * gap / (ell2 + c[2 * k - 2]);
        touch.push(one_minus);
    }

    Ok(ZolotarevParams {
        r,
        ell,
        c,
        a,
        m_hat,
        dev,
        edge_dev,
        touch,
    })
}

/// Product form `M x prod (x^2 + c_{2j}) / (x^2 + c_{2j-1})`.
pub fn zolotarev_eval(x: f64, p: &ZolotarevParams) -> f64 {
    let x2 = x * x;
    let mut v = p.m_hat * x;
    for j in 0..p.r {
        v *= (x2 + p.even(j)) / (x2 + p.odd(j));
    }
    v
}

/// Partial-fraction form `M x (1 + sum a_j / (x^2 + c_{2j-1}))`.
pub fn zolotarev_eval_partial_fraction(x: f64, p: &ZolotarevParams) -> f64 {
    let x2 = x * x;
    let s: f64 = (0..p.r).map(|j| p.a[j] / (x2 + p.odd(j))).sum();
    p.m_hat * x * (1.0 + s)
}

/// Image of the lower interval edge, `Z(ell; ell)`.
pub fn ell_update(p: &ZolotarevParams) -> f64 {
    zolotarev_eval(p.ell, p)
}

/// `1 - Z(ell; ell)` without cancellation.
pub fn ell_update_deviation(p: &ZolotarevParams) -> f64 {
    p.edge_dev
}

/// How the Zolotarev order is picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RPolicy {
    /// Smallest order up to `r_max` predicted to converge in two passes.
    Table,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RChoice {
    pub r: usize,
    pub predicted_iters: usize,
}

/// Number of compositions of the scaled Zolotarev function needed to map
/// `[1/kappa, 1]` into `[1 - 1e-15, 1]`.
pub fn predict_iterations(kappa: f64, r: usize) -> Result<usize> {
    Ok(predict_trajectory(kappa, r)?.len())
}

/// Interval-edge deviations `1 - ell_k` after each composition, up to and
/// including the first one inside the target band.
pub fn predict_trajectory(kappa: f64, r: usize) -> Result<Vec<f64>> {
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(Error::domain(format!("kappa must be finite and >= 1, got {kappa}")));
    }
    if r == 0 || r > MAX_ORDER {
        return Err(Error::UnsupportedOrder(r));
    }
    const MAX_STEPS: usize = 64;
    let mut ell = 1.0 / kappa;
    let mut dev = (kappa - 1.0) / kappa;
    let mut guard = chebyshev_deviations(dev);
    let mut out = Vec::new();
    for _ in 0..MAX_STEPS {
        let p = coeffs_from_pair(r, ell, dev)?;
        let next_ell = ell_update(&p);
        let next_dev = ell_update_deviation(&p);
        for g in guard.iter_mut() {
            *g = p.deviation_at(*g);
        }
        out.push(next_dev);
        ell = next_ell.min(1.0);
        dev = next_dev.max(0.0);
        let inside = |d: f64| d <= TABLE_THRESHOLD && d >= -TABLE_THRESHOLD;
        if inside(dev) && guard.iter().all(|&g| inside(g)) {
            return Ok(out);
        }
    }
    Err(Error::NonConvergence {
        method: "zolotarev predictor",
        iters: MAX_STEPS,
        log: Vec::new(),
    })
}

/// Deviations `1 - x` at Chebyshev nodes of `[ell, 1]`.
fn chebyshev_deviations(dev: f64) -> Vec<f64> {
    (0..GUARD_POINTS)
        .map(|i| {
            let theta = std::f64::consts::PI * (i as f64 + 0.5) / GUARD_POINTS as f64;
            // x = ell + (1 - ell) (1 + cos) / 2, so 1 - x = dev (1 - cos) / 2.
            dev * 0.5 * (1.0 - theta.cos())
        })
        .collect()
}

pub fn choose_r(kappa: f64, r_max: usize, policy: RPolicy) -> Result<RChoice> {
    if !(kappa >= 1.0) {
        return Err(Error::domain(format!("kappa must be >= 1, got {kappa}")));
    }
    match policy {
        RPolicy::Fixed(r) => Ok(RChoice {
            r,
            predicted_iters: predict_iterations(kappa, r)?,
        }),
        RPolicy::Table => {
            if r_max == 0 || r_max > MAX_ORDER {
                return Err(Error::UnsupportedOrder(r_max));
            }
            let mut last = None;
            for r in 1..=r_max {
                let k = predict_iterations(kappa, r)?;
                last = Some(RChoice {
                    r,
                    predicted_iters: k,
                });
                if k <= 2 {
                    break;
                }
            }
            Ok(last.expect("r_max >= 1"))
        }
    }
}
