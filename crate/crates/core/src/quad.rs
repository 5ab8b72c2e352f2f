//! Numerical quadrature: Gauss–Legendre rules and adaptive Gauss–Kronrod
//! (7/15-point) subdivision for real and complex integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::ops::{ Add, Mul, Sub };

use num_complex::Complex64 as C64;

use crate::error::{ Error, Result };

/// Values that can be accumulated by the quadrature routines.
pub trait QuadValue:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn magnitude(&self) -> f64 { self.abs() }
}

impl QuadValue for C64 {
    fn magnitude(&self) -> f64 { self.norm() }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1], in
/// ascending node order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Tricomi initial guess, refined by Newton on P_n
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

/// A fixed Gauss–Legendre rule that can be mapped onto arbitrary intervals.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize { self.nodes.len() }

    pub fn is_empty(&self) -> bool { self.nodes.is_empty() }

    /// Nodes and weights mapped onto [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<V, F>(&self, a: f64, b: f64, mut f: F) -> V
    where
        V: QuadValue,
        F: FnMut(f64) -> V,
    {
        self.mapped(a, b).fold(V::default(), |acc, (x, w)| acc + f(x) * w)
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// 7-point Gauss weights, attached to XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<V, F>(f: &mut F, a: f64, b: f64) -> (V, f64)
where
    V: QuadValue,
    F: FnMut(f64) -> V,
{
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(mid - dx) + f(mid + dx);
        kronrod = kronrod + pair * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + pair * WG[j / 2];
        }
    }
    let kronrod = kronrod * half;
    let gauss = gauss * half;
    (kronrod, (kronrod - gauss).magnitude())
}

/// Tolerances and limits for adaptive integration.
#[derive(Copy, Clone, Debug)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_segments: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-10, rel: 1e-12, max_segments: 4000 }
    }
}

struct Segment<V> {
    a: f64,
    b: f64,
    value: V,
    error: f64,
}

impl<V> PartialEq for Segment<V> {
    fn eq(&self, other: &Self) -> bool { self.error == other.error }
}

impl<V> Eq for Segment<V> { }

impl<V> PartialOrd for Segment<V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> { Some(self.cmp(other)) }
}

impl<V> Ord for Segment<V> {
    fn cmp(&self, other: &Self) -> Ordering { self.error.total_cmp(&other.error) }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over [a, b].
///
/// Returns the integral and its error estimate.
pub fn integrate_adaptive<V, F>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<(V, f64)>
where
    V: QuadValue,
    F: FnMut(f64) -> V,
{
    if a == b {
        return Ok((V::default(), 0.0));
    }
    let (value, error) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    loop {
        if !total_err.is_finite() || !total.magnitude().is_finite() {
            return Err(Error::Quadrature {
                lower: a,
                upper: b,
                estimate: total_err,
                tolerance: tol.abs,
            });
        }
        let target = tol.abs.max(tol.rel * total.magnitude());
        if total_err <= target {
            return Ok((total, total_err));
        }
        if heap.len() >= tol.max_segments {
            return Err(Error::Quadrature {
                lower: a,
                upper: b,
                estimate: total_err,
                tolerance: target,
            });
        }
        let worst = heap.pop().expect("heap never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval cannot be split further in double precision
            return Err(Error::Quadrature {
                lower: a,
                upper: b,
                estimate: total_err,
                tolerance: target,
            });
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        total = total - worst.value + v1 + v2;
        total_err = total_err - worst.error + e1 + e2;
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2 });
        // refresh the running error to avoid drift from repeated subtraction
        if heap.len() % 64 == 0 {
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
}

/// Integrate an exponentially decaying integrand over [a, ∞) by summing
/// adaptive panels of width `panel` until the tail is negligible.
///
/// At least `min_extent` of the half-line is always covered.
pub fn integrate_half_line<V, F>(
    mut f: F,
    a: f64,
    panel: f64,
    min_extent: f64,
    tol: Tolerance,
) -> Result<(V, f64)>
where
    V: QuadValue,
    F: FnMut(f64) -> V,
{
    let min_panels = (min_extent / panel).ceil().max(1.0) as usize;
    let panel_tol = Tolerance { abs: tol.abs / 16.0, ..tol };
    let mut total = V::default();
    let mut total_err = 0.0;
    let mut quiet = 0;
    for k in 0..10_000 {
        let lo = a + k as f64 * panel;
        let (v, e) = integrate_adaptive(&mut f, lo, lo + panel, panel_tol)?;
        total = total + v;
        total_err += e;
        if k + 1 >= min_panels {
            if v.magnitude() <= 1e-3 * tol.abs.max(tol.rel * total.magnitude()) {
                quiet += 1;
                if quiet >= 2 {
                    return Ok((total, total_err));
                }
            } else {
                quiet = 0;
            }
        }
    }
    Err(Error::Quadrature { lower: a, upper: f64::INFINITY, estimate: total_err, tolerance: tol.abs })
}
