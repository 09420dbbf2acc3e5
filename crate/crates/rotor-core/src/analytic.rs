//! Closed-form predictions: the infinite square-lattice Green function,
//! defect-matrix determinant limits for adjacent-edge probabilities of the
//! uniform spanning tree, and the resulting dimer/contour correlations for
//! both routing orders.

use crate::error::{Error, Result};
use crate::lattice::RoutingOrder;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;

/// Finite part g_{p,q} of the lattice Green function for the values with
/// known closed forms. The additive infinite constant is dropped; g_{0,0}
/// is 0 by that convention.
pub fn exact_green(p: i64, q: i64) -> Option<f64> {
    let (a, b) = canonical(p, q);
    match (a, b) {
        (0, 0) => Some(0.0),
        (0, 1) => Some(-0.25),
        (0, 2) => Some(-1.0 + 2.0 / PI),
        (0, 3) => Some(-17.0 / 4.0 + 12.0 / PI),
        (1, 1) => Some(-1.0 / PI),
        (1, 2) => Some(0.25 - 2.0 / PI),
        (1, 3) => Some(2.0 - 23.0 / (3.0 * PI)),
        (2, 2) => Some(-4.0 / (3.0 * PI)),
        (2, 3) => Some(-0.25 - 2.0 / (3.0 * PI)),
        (3, 3) => Some(-23.0 / (15.0 * PI)),
        _ => None,
    }
}

/// Maps (p, q) into the canonical octant 0 <= p <= q using the symmetries
/// g_{p,q} = g_{q,p} = g_{-p,q} = g_{p,-q}.
fn canonical(p: i64, q: i64) -> (i64, i64) {
    let (a, b) = (p.abs(), q.abs());
    (a.min(b), a.max(b))
}

/// Integrand of the single-integral Green function representation,
/// (t^p cos(q beta) - 1) / sqrt(y^2 - 1) with y = 2 - cos(beta) and
/// t = y - sqrt(y^2 - 1). Stable near beta = 0 where the expression
/// is a removable 0/0 point.
fn green_integrand(p: i64, q: i64, beta: f64) -> f64 {
    let y = 2.0 - beta.cos();
    // y^2 - 1 = (1 - cos b)(3 - cos b) = 2 sin^2(b/2) (3 - cos b),
    // which avoids cancellation for small beta.
    let s = (beta / 2.0).sin().abs() * (2.0 * (3.0 - beta.cos())).sqrt();
    let t = y - s;
    (t.powi(p as i32) * (q as f64 * beta).cos() - 1.0) / s
}

/// Below this point the integrand is replaced by its second-order Taylor
/// expansion around the removable singularity.
const TAYLOR_CUT: f64 = 1e-4;

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let err = left + right - whole;
    if err.abs() <= 15.0 * tol {
        return Ok(left + right + err / 15.0);
    }
    if depth == 0 {
        return Err(Error::Quadrature {
            requested: tol,
            achieved: err.abs() / 15.0,
        });
    }
    let l = adaptive_simpson(f, a, m, fa, flm, fm, tol / 2.0, depth - 1)?;
    let r = adaptive_simpson(f, m, b, fm, frm, fb, tol / 2.0, depth - 1)?;
    Ok(l + r)
}

/// g_{p,q} by adaptive quadrature with absolute error at most `tol`.
pub fn green(p: i64, q: i64, tol: f64) -> Result<f64> {
    if tol <= 0.0 {
        return Err(Error::Input("quadrature tolerance must be positive".into()));
    }
    let (p, q) = canonical(p, q);
    if p == 0 && q == 0 {
        return Ok(0.0);
    }
    // The integrand is even in beta: integrate [0, pi] and double.
    // Near zero, f(b) = -p + (p^2 - q^2) b / 2 + O(b^2).
    let head = -(p as f64) * TAYLOR_CUT + (p * p - q * q) as f64 * TAYLOR_CUT * TAYLOR_CUT / 4.0;
    let f = |b: f64| green_integrand(p, q, b);
    let (a, b) = (TAYLOR_CUT, PI);
    let tail = adaptive_simpson(&f, a, b, f(a), f(0.5 * (a + b)), f(b), tol * 2.0 * PI, 48)?;
    Ok((head + tail) / (2.0 * PI))
}

/// Green-function evaluator with a cache: exact closed forms where
/// tabulated, quadrature elsewhere.
pub struct GreenKernel {
    tol: f64,
    cache: Mutex<HashMap<(i64, i64), f64>>,
}

impl GreenKernel {
    pub fn new(tol: f64) -> GreenKernel {
        GreenKernel {
            tol,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn value(&self, p: i64, q: i64) -> Result<f64> {
        let key = canonical(p, q);
        if let Some(v) = exact_green(key.0, key.1) {
            return Ok(v);
        }
        if let Some(&v) = self.cache.lock().unwrap().get(&key) {
            return Ok(v);
        }
        let v = green(key.0, key.1, self.tol)?;
        self.cache.lock().unwrap().insert(key, v);
        Ok(v)
    }
}

/// Relative placement of the two adjacent edges e1 = {i0, i1} and
/// e2 = {i0, i2}: at 90 degrees (i1 = i0+(0,1), i2 = i0+(1,0)) or at
/// 180 degrees (i1 = i0+(0,1), i2 = i0+(0,-1)).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    A90,
    B180,
}

/// One defect-matrix computation: the geometry plus the 3x3 Green matrix
/// over the vertices i0, i1, i2.
#[derive(Debug, Clone)]
pub struct DefectCase {
    pub geometry: Geometry,
    pub green_matrix: [[f64; 3]; 3],
}

impl DefectCase {
    pub fn new(geometry: Geometry, kernel: &GreenKernel) -> Result<DefectCase> {
        let offsets: [(i64, i64); 3] = match geometry {
            Geometry::A90 => [(0, 0), (0, 1), (1, 0)],
            Geometry::B180 => [(0, 0), (0, 1), (0, -1)],
        };
        let mut g = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let dp = offsets[i].0 - offsets[j].0;
                let dq = offsets[i].1 - offsets[j].1;
                g[i][j] = kernel.value(dp, dq)?;
            }
        }
        Ok(DefectCase {
            geometry,
            green_matrix: g,
        })
    }
}

/// Probabilities for the two adjacent edges to be present (+) or absent (-)
/// in the uniform spanning tree.
#[derive(Debug, Clone, Copy)]
pub struct PairProbabilities {
    pub pp: f64,
    pub pm: f64,
    pub mp: f64,
    pub mm: f64,
}

impl PairProbabilities {
    pub fn sum(&self) -> f64 {
        self.pp + self.pm + self.mp + self.mm
    }
}

/// B1(eps): both edges carry weight perturbation eps.
fn b1(e: f64) -> [[f64; 3]; 3] {
    [[2.0 * e, -e, -e], [-e, e, 0.0], [-e, 0.0, e]]
}

/// B2(eps): e1 perturbed by eps, e2 removed.
fn b2(e: f64) -> [[f64; 3]; 3] {
    [[e - 1.0, -e, 1.0], [-e, e, 0.0], [1.0, 0.0, -1.0]]
}

/// B3: both edges removed.
fn b3() -> [[f64; 3]; 3] {
    [[-2.0, 1.0, 1.0], [1.0, -1.0, 0.0], [1.0, 0.0, -1.0]]
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn det_i_plus_bg(b: [[f64; 3]; 3], g: &[[f64; 3]; 3]) -> f64 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut s = if i == j { 1.0 } else { 0.0 };
            for (k, row) in g.iter().enumerate() {
                s += b[i][k] * row[j];
            }
            m[i][j] = s;
        }
    }
    det3(m)
}

/// Coefficients (c0, c1, c2) of a quadratic from its values at eps = 1, 2, 3.
/// The determinants are exact polynomials of degree <= 2 in eps, so this
/// interpolation extracts the limits without evaluating at large eps.
fn quadratic_coefficients(d1: f64, d2: f64, d3: f64) -> (f64, f64, f64) {
    let c2 = (d3 - 2.0 * d2 + d1) / 2.0;
    let c1 = d2 - d1 - 3.0 * c2;
    let c0 = d1 - c1 - c2;
    (c0, c1, c2)
}

/// Determinant limits: P(++) is the eps^2 coefficient of det(I + B1 G),
/// P(+-) = P(-+) the eps coefficient of det(I + B2 G), and P(--) is
/// det(I + B3 G) directly.
pub fn pair_probabilities(case: &DefectCase) -> PairProbabilities {
    assert_rows_sum_to_zero();
    let g = &case.green_matrix;
    let (_, _, pp) = quadratic_coefficients(
        det_i_plus_bg(b1(1.0), g),
        det_i_plus_bg(b1(2.0), g),
        det_i_plus_bg(b1(3.0), g),
    );
    let (_, pm, _) = quadratic_coefficients(
        det_i_plus_bg(b2(1.0), g),
        det_i_plus_bg(b2(2.0), g),
        det_i_plus_bg(b2(3.0), g),
    );
    let mm = det_i_plus_bg(b3(), g);
    PairProbabilities { pp, pm, mp: pm, mm }
}

/// Every row of each defect matrix sums to zero; this is what makes the
/// determinant limits independent of the dropped additive constant of the
/// Green function, so it is checked rather than assumed.
fn assert_rows_sum_to_zero() {
    for e in [1.0, 2.0] {
        for b in [b1(e), b2(e), b3()] {
            for row in b {
                let s: f64 = row.iter().sum();
                assert!(s.abs() < 1e-12, "defect matrix row does not sum to zero");
            }
        }
    }
}

/// Predicted pair frequencies at successive tour steps.
#[derive(Debug, Clone, Copy)]
pub struct CorrelationPrediction {
    pub pdd: f64,
    pub pdc: f64,
    pub pcd: f64,
    pub pcc: f64,
}

/// Dimer/contour correlations at two successive moments of the Euler tour
/// in the infinite-lattice limit. Clockwise routing always turns the rotor
/// by 90 degrees, so only the A90 case enters; cross routing alternates
/// 180- and 90-degree turns, giving the average of the two cases.
pub fn predict_correlations(order: RoutingOrder) -> Result<CorrelationPrediction> {
    let kernel = GreenKernel::new(1e-10);
    let a = pair_probabilities(&DefectCase::new(Geometry::A90, &kernel)?);
    let (pdd, pdc) = match order {
        RoutingOrder::Clockwise => (a.pp, a.mp),
        RoutingOrder::Cross => {
            let b = pair_probabilities(&DefectCase::new(Geometry::B180, &kernel)?);
            ((a.pp + b.pp) / 2.0, (a.mp + b.mp) / 2.0)
        }
    };
    Ok(CorrelationPrediction {
        pdd,
        pdc,
        pcd: pdc,
        pcc: pdd,
    })
}

/// Probability that a uniformly sampled unicycle state on the M x N torus
/// is a dimer: the tree-edge density |E_T| / |E| = 1/2 - 1/(2MN).
pub fn predict_dimer_probability(m: usize, n: usize) -> f64 {
    0.5 - 1.0 / (2.0 * (m * n) as f64)
}
