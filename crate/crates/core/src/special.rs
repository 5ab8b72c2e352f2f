//! Polygamma functions of complex argument and the Hurwitz zeta function at
//! integer order.

use num_complex::Complex64 as C64;

use crate::error::{ Error, Result };

/// Arguments are shifted upward until |z| reaches this threshold before the
/// asymptotic series is applied.
pub const SHIFT_THRESHOLD: f64 = 15.0;

/// Number of Bernoulli terms in the asymptotic series.
pub const ASYMPTOTIC_TERMS: usize = 20;

// B_2, B_4, ..., B_40
const BERNOULLI_EVEN: [f64; ASYMPTOTIC_TERMS] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
    8553103.0 / 6.0,
    -23749461029.0 / 870.0,
    8615841276005.0 / 14322.0,
    -7709321041217.0 / 510.0,
    2577687858367.0 / 6.0,
    -26315271553053477373.0 / 1919190.0,
    2929993913841559.0 / 6.0,
    -261082718496449122051.0 / 13530.0,
];

pub(crate) fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Polygamma function of order `order` (0 = digamma) at complex `z`.
pub fn polygamma(order: u32, z: C64) -> Result<C64> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite polygamma argument {z}")));
    }
    if z.im == 0.0 && z.re <= 0.0 && z.re.fract() == 0.0 {
        return Err(Error::Pole { function: "polygamma", argument: z.to_string() });
    }
    if z.re < -1e6 {
        return Err(Error::InvalidParameter(format!("polygamma argument {z} too far left")));
    }
    let m = order as i32;
    let m_fact = factorial(order);
    // (-1)^m m!
    let recurrence_factor = if order % 2 == 0 { m_fact } else { -m_fact };

    let mut z = z;
    let mut shift = C64::new(0.0, 0.0);
    while z.norm() < SHIFT_THRESHOLD || z.re < 0.5 {
        shift -= recurrence_factor / z.powi(m + 1);
        z += 1.0;
    }

    let inv = z.inv();
    let inv2 = inv * inv;
    let asymptotic = if order == 0 {
        let mut sum = z.ln() - 0.5 * inv;
        let mut p = inv2;
        for (k, b) in BERNOULLI_EVEN.iter().enumerate() {
            let two_k = 2.0 * (k + 1) as f64;
            sum -= p * (b / two_k);
            p *= inv2;
        }
        sum
    } else {
        // (-1)^{m+1} [ (m-1)!/z^m + m!/(2 z^{m+1}) + Σ B_2k (2k+m-1)!/(2k)! / z^{2k+m} ]
        let inv_m = inv.powi(m);
        let mut sum = inv_m * factorial(order - 1) + inv_m * inv * (0.5 * m_fact);
        let mut p = inv_m * inv2;
        for (k, b) in BERNOULLI_EVEN.iter().enumerate() {
            let two_k = 2 * (k as u32 + 1);
            let ratio: f64 = (1..order).map(|j| (two_k + j) as f64).product();
            sum += p * (b * ratio);
            p *= inv2;
        }
        if order % 2 == 1 { sum } else { -sum }
    };
    Ok(asymptotic + shift)
}

/// Hurwitz zeta ζ(m, x) = Σ_{k≥0} (k + x)^{-m} for integer m ≥ 2 and x > 0.
pub fn hurwitz_zeta(m: u32, x: f64) -> Result<f64> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!("Hurwitz zeta order {m} < 2 diverges")));
    }
    if x <= 0.0 {
        return Err(Error::InvalidParameter(format!("Hurwitz zeta needs x > 0, got {x}")));
    }
    let psi = polygamma(m - 1, C64::new(x, 0.0))?.re;
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * psi / factorial(m - 1))
}
