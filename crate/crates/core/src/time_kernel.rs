//! Temporal machinery of the GCC1(3) scheme.
//!
//! The Hermite cubic basis lives on the reference interval `[0, 1]`: slots 0/2
//! carry values at the left/right end, slots 1/3 carry derivatives scaled by
//! the step length. The Hermite-type quadrature rule is stated on `[-1, 1]`.
//! Both affine maps are owned here so callers never rescale by hand.

use num_rational::Ratio;

use crate::error::{Error, Result};

type Q = Ratio<i64>;

fn q(n: i64, d: i64) -> Q {
    Q::new(n, d)
}

/// Monomial coefficients of the four cubic Hermite basis functions on `[0, 1]`.
///
/// `coeffs[l][k]` multiplies `t^k` in the `l`-th basis function.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteBasis {
    coeffs: [[Q; 4]; 4],
}

impl Default for HermiteBasis {
    fn default() -> Self {
        Self::new()
    }
}

impl HermiteBasis {
    pub fn new() -> Self {
        let z = q(0, 1);
        let one = q(1, 1);
        Self {
            coeffs: [
                // 1 - 3t^2 + 2t^3
                [one, z, q(-3, 1), q(2, 1)],
                // t - 2t^2 + t^3
                [z, one, q(-2, 1), one],
                // 3t^2 - 2t^3
                [z, z, q(3, 1), q(-2, 1)],
                // -t^2 + t^3
                [z, z, q(-1, 1), one],
            ],
        }
    }

    /// Exact rational coefficients of basis function `l`.
    pub fn coefficients(&self, l: usize) -> [Q; 4] {
        self.coeffs[l]
    }

    /// Exact value (`derivative = 0`) or first derivative (`derivative = 1`)
    /// at a rational reference point.
    pub fn eval_exact(&self, l: usize, t: Q, derivative: u8) -> Q {
        let c = &self.coeffs[l];
        match derivative {
            0 => ((c[3] * t + c[2]) * t + c[1]) * t + c[0],
            _ => (c[3] * q(3, 1) * t + c[2] * q(2, 1)) * t + c[1],
        }
    }

    /// Floating-point evaluation via Horner's scheme.
    ///
    /// The integer coefficients make the endpoint values `t = 0` and `t = 1`
    /// exact in binary floating point.
    pub fn eval(&self, l: usize, t: f64, derivative: u8) -> f64 {
        let c = self.float_coeffs(l);
        match derivative {
            0 => ((c[3] * t + c[2]) * t + c[1]) * t + c[0],
            _ => (3.0 * c[3] * t + 2.0 * c[2]) * t + c[1],
        }
    }

    fn float_coeffs(&self, l: usize) -> [f64; 4] {
        let c = &self.coeffs[l];
        [
            ratio_to_f64(c[0]),
            ratio_to_f64(c[1]),
            ratio_to_f64(c[2]),
            ratio_to_f64(c[3]),
        ]
    }

    /// All four basis values at `t`.
    pub fn values(&self, t: f64) -> [f64; 4] {
        [0, 1, 2, 3].map(|l| self.eval(l, t, 0))
    }

    /// All four basis derivatives (with respect to the reference variable) at `t`.
    pub fn derivatives(&self, t: f64) -> [f64; 4] {
        [0, 1, 2, 3].map(|l| self.eval(l, t, 1))
    }
}

pub(crate) fn ratio_to_f64(r: Q) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Evaluates the Hermite basis function `l` (or its derivative) at `t` in `[0, 1]`.
pub fn eval_basis(l: usize, t: f64, derivative: u8) -> Result<f64> {
    if l > 3 {
        return Err(Error::Argument(format!("basis index {l} out of range 0..=3")));
    }
    if derivative > 1 {
        return Err(Error::Argument(format!(
            "derivative order {derivative} not supported (0 or 1)"
        )));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Argument(format!(
            "reference time {t} outside [0, 1]"
        )));
    }
    Ok(HermiteBasis::new().eval(l, t, derivative))
}

/// Hermite-type quadrature on `[-1, 1]` for `k = 3`:
/// `w_L g'(-1) + w_1 g(-1) + w_2 g(1) + w_R g'(1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteQuadratureRule {
    pub w_left: f64,
    pub w_right: f64,
    pub node_weights: Vec<(f64, f64)>,
    pub exact_degree: u32,
}

impl Default for HermiteQuadratureRule {
    fn default() -> Self {
        Self::k3()
    }
}

impl HermiteQuadratureRule {
    /// The `k = 3` rule: nodes `{-1, 1}`, unit node weights, derivative
    /// weights `1/3` and `-1/3`, exact up to degree `2k - 3 = 3`.
    pub fn k3() -> Self {
        Self {
            w_left: 1.0 / 3.0,
            w_right: -1.0 / 3.0,
            node_weights: vec![(-1.0, 1.0), (1.0, 1.0)],
            exact_degree: 3,
        }
    }

    /// Applies the rule on the reference interval `[-1, 1]`.
    pub fn apply_reference(&self, g_left: f64, g_right: f64, dg_left: f64, dg_right: f64) -> f64 {
        self.w_left * dg_left
            + self.node_weights[0].1 * g_left
            + self.node_weights[1].1 * g_right
            + self.w_right * dg_right
    }

    /// Applies the rule on the physical interval `[t0, t0 + tau]` with
    /// derivative samples taken in physical time.
    pub fn apply_interval(
        &self,
        tau: f64,
        g_left: f64,
        g_right: f64,
        dg_left: f64,
        dg_right: f64,
    ) -> f64 {
        let half = 0.5 * tau;
        half * half * self.w_left * dg_left
            + half * (self.node_weights[0].1 * g_left + self.node_weights[1].1 * g_right)
            + half * half * self.w_right * dg_right
    }
}

/// `w_L g'(-1) + g(-1) + g(1) + w_R g'(1)` with the `k = 3` weights.
pub fn hermite_quadrature_k3(g_left: f64, g_right: f64, dg_left: f64, dg_right: f64) -> f64 {
    HermiteQuadratureRule::k3().apply_reference(g_left, g_right, dg_left, dg_right)
}

/// Analytically integrated products of the Hermite basis on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalCouplingTable {
    /// `m[i][j] = ∫ ξ_i ξ_j`.
    pub m: [[f64; 4]; 4],
    /// `s[i] = ∫ ξ_i`.
    pub s: [f64; 4],
    m_exact: [[Q; 4]; 4],
    s_exact: [Q; 4],
}

impl TemporalCouplingTable {
    pub fn m_exact(&self, i: usize, j: usize) -> Q {
        self.m_exact[i][j]
    }

    pub fn s_exact(&self, i: usize) -> Q {
        self.s_exact[i]
    }
}

/// Integrates the Hermite basis products exactly in rational arithmetic.
pub fn coupling_table() -> TemporalCouplingTable {
    let basis = HermiteBasis::new();
    let mut m_exact = [[q(0, 1); 4]; 4];
    let mut s_exact = [q(0, 1); 4];
    for i in 0..4 {
        let ci = basis.coefficients(i);
        s_exact[i] = (0..4).fold(q(0, 1), |acc, a| acc + ci[a] / q(a as i64 + 1, 1));
        for j in 0..4 {
            let cj = basis.coefficients(j);
            let mut acc = q(0, 1);
            for a in 0..4 {
                for b in 0..4 {
                    acc += ci[a] * cj[b] / q((a + b) as i64 + 1, 1);
                }
            }
            m_exact[i][j] = acc;
        }
    }
    let m = m_exact.map(|row| row.map(ratio_to_f64));
    let s = s_exact.map(ratio_to_f64);
    TemporalCouplingTable {
        m,
        s,
        m_exact,
        s_exact,
    }
}

/// Hermite coefficients `(g_0, g_1, g_2, g_3)` of a data function on one interval,
/// with derivative slots already scaled by the step length.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolatedData<T> {
    pub coeffs: [T; 4],
}

impl InterpolatedData<f64> {
    /// Evaluates the interpolant (or its physical time derivative) at reference time `t_hat`.
    pub fn eval(&self, t_hat: f64, tau: f64, derivative: u8) -> f64 {
        let basis = HermiteBasis::new();
        let mut acc = 0.0;
        for l in 0..4 {
            acc += self.coeffs[l] * basis.eval(l, t_hat, derivative);
        }
        if derivative == 1 {
            acc / tau
        } else {
            acc
        }
    }
}

/// Hermite interpolation of `g` on `[t0, t0 + tau]` from values and slopes at both ends.
///
/// `g` returns `(value, time derivative)`.
pub fn hermite_interpolate<F>(g: F, t0: f64, tau: f64) -> Result<InterpolatedData<f64>>
where
    F: Fn(f64) -> (f64, f64),
{
    if !(tau > 0.0) {
        return Err(Error::Argument(format!("step length {tau} must be positive")));
    }
    let (g0, dg0) = g(t0);
    let (g1, dg1) = g(t0 + tau);
    let coeffs = [g0, tau * dg0, g1, tau * dg1];
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Data(format!(
            "non-finite Hermite samples on [{t0}, {}]",
            t0 + tau
        )));
    }
    Ok(InterpolatedData { coeffs })
}
