//! Panel-adaptive Gauss–Legendre quadrature.
//!
//! The integrator keeps a worst-first queue of panels; each panel is scored
//! by the difference between a 24-point and a 12-point Gauss–Legendre rule.
//! Callers seed the initial subdivision with breakpoints (peak locations of
//! spiky spectral densities, oscillation periods), which is what makes the
//! near-unit-root covariance integrals converge without false acceptance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::{Error, Result};

const COARSE: usize = 12;
const FINE: usize = 24;

fn legendre_eval(k: usize, x: f64) -> (f64, f64) {
    // three-term recurrence for P_k and its derivative
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=k {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let dp = k as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn legendre_rule(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    for i in 0..k {
        // Chebyshev initial guess, then Newton
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        for _ in 0..60 {
            let (p, dp) = legendre_eval(k, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_eval(k, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn rule(k: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static COARSE_RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static FINE_RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    match k {
        COARSE => COARSE_RULE.get_or_init(|| legendre_rule(COARSE)),
        FINE => FINE_RULE.get_or_init(|| legendre_rule(FINE)),
        _ => unreachable!("only the two paired rules are cached"),
    }
}

fn gl_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, k: usize) -> f64 {
    let (nodes, weights) = rule(k);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl Panel {
    fn new<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Self {
        let fine = gl_panel(f, a, b, FINE);
        let coarse = gl_panel(f, a, b, COARSE);
        Panel { a, b, value: fine, err: (fine - coarse).abs() }
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.partial_cmp(&other.err).unwrap_or(Ordering::Equal)
    }
}

/// Integrate `f` over `[a, b]` to absolute tolerance `abs_tol`.
///
/// `breakpoints` are abscissae where the integrand changes character; they
/// become panel boundaries of the initial subdivision. Points outside
/// `(a, b)` are ignored.
pub fn integrate<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    abs_tol: f64,
    max_panels: usize,
) -> Result<f64> {
    if !(b > a) {
        return Ok(0.0);
    }
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > a && *x < b)
        .collect();
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup_by(|x, y| (*x - *y).abs() <= f64::EPSILON * (x.abs() + y.abs() + 1.0));

    let mut heap = BinaryHeap::new();
    let mut live_err = 0.0f64;
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            let p = Panel::new(f, w[0], w[1]);
            live_err += p.err;
            heap.push(p);
        }
    }

    let width_floor = (b - a) * 1e-15;
    let mut frozen_value = 0.0;
    let mut frozen_err = 0.0;
    while live_err + frozen_err > abs_tol {
        if heap.len() >= max_panels {
            return Err(Error::Numerical(format!(
                "quadrature did not converge: {} panels, residual error {:e} (target {:e})",
                heap.len(),
                live_err + frozen_err,
                abs_tol
            )));
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        live_err -= worst.err;
        if worst.b - worst.a <= width_floor {
            // panel cannot be meaningfully refined; keep its estimate
            frozen_value += worst.value;
            frozen_err += worst.err;
            if frozen_err > abs_tol {
                return Err(Error::Numerical(format!(
                    "quadrature stalled on panels below width floor (error {frozen_err:e})"
                )));
            }
            continue;
        }
        let mid = 0.5 * (worst.a + worst.b);
        let left = Panel::new(f, worst.a, mid);
        let right = Panel::new(f, mid, worst.b);
        live_err += left.err + right.err;
        heap.push(left);
        heap.push(right);
    }
    Ok(frozen_value + heap.iter().map(|p| p.value).sum::<f64>())
}
