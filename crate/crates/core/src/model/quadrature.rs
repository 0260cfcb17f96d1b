//! Composite Gauss–Legendre quadrature on subintervals of `[0, π]`.
//!
//! Integrands handled here are even spectral densities multiplied by
//! trigonometric kernels, so all integrals are folded onto the half circle.
//! Every panel boundary set contains the symbol breakpoints, which keeps
//! jump discontinuities off the interior of any panel.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Composite rule parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub nodes_per_panel: usize,
    /// Number of uniform panels on `[0, π]` before breakpoint splitting.
    pub panels: usize,
    /// Absolute tolerance (relative to the integrand scale) on the
    /// difference between the rule and its panel-doubled refinement.
    pub tolerance: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            nodes_per_panel: 16,
            panels: 64,
            tolerance: 1e-12,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.panels < 8 {
            return Err(Error::validation(
                "quadrature.panels",
                format!("{} < 8", self.panels),
            ));
        }
        if self.nodes_per_panel < 2 {
            return Err(Error::validation(
                "quadrature.nodes_per_panel",
                format!("{} < 2", self.nodes_per_panel),
            ));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::validation("quadrature.tolerance", "must be positive"));
        }
        Ok(())
    }

    /// Panel count large enough that a kernel oscillating at frequency
    /// `max_freq` completes at most about two periods per panel.
    pub(crate) fn panels_for(&self, max_freq: usize) -> usize {
        self.panels.max(max_freq.div_ceil(4))
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on the Legendre polynomial, seeded with the
    /// Tricomi asymptotic guess. Nodes are returned in ascending order.
    pub fn new(order: usize) -> Self {
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let n = order as f64;
        for i in 0..order.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(order, x);
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(order, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        if order % 2 == 1 {
            nodes[order / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: &F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

fn legendre_with_derivative(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if order == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=order {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = order as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Uniform grid of `panels` cells on `[0, π]` merged with `breakpoints`.
pub(crate) fn panel_edges(panels: usize, breakpoints: &[f64]) -> Vec<f64> {
    let mut edges: Vec<f64> = (0..=panels).map(|i| PI * i as f64 / panels as f64).collect();
    edges[panels] = PI;
    for &b in breakpoints {
        if b > 0.0 && b < PI {
            edges.push(b);
        }
    }
    edges.sort_by(f64::total_cmp);
    let min_width = 1e-14;
    edges.dedup_by(|a, b| (*a - *b).abs() < min_width);
    edges
}

/// Integrates several functions of θ over the panels in `edges` at once.
/// `eval(θ, weight, acc)` adds `weight * f_k(θ)` into `acc[k]`; the weight
/// is the reference-interval one and is rescaled per panel afterwards.
pub(crate) fn integrate_many<F>(
    rule: &GaussLegendre,
    edges: &[f64],
    outputs: usize,
    mut eval: F,
) -> Vec<f64>
where
    F: FnMut(f64, f64, &mut [f64]),
{
    // Panel-local partial sums keep the accumulated roundoff near one ulp
    // per panel rather than one per node.
    let mut acc = vec![0.0; outputs];
    let mut local = vec![0.0; outputs];
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        local.fill(0.0);
        for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
            eval(mid + half * x, *wt, &mut local);
        }
        for (g, l) in acc.iter_mut().zip(&local) {
            *g += half * l;
        }
    }
    acc
}

/// Single-function composite integral over `[a, b]` split into `panels`
/// equal cells.
pub fn composite<F: Fn(f64) -> f64>(rule: &GaussLegendre, a: f64, b: f64, panels: usize, f: F) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + h * i as f64;
            let hi = if i + 1 == panels { b } else { lo + h };
            rule.integrate(lo, hi, &f)
        })
        .sum()
}
