//! Gauss-Legendre rules and small quadrature helpers.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Mutex, OnceLock};

use gauss_quad::GaussLegendre;

/// Nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn new(n: usize) -> Self {
        let gl = GaussLegendre::new(NonZeroUsize::new(n.max(1)).unwrap());
        let mut pairs: Vec<(f64, f64)> = gl.as_node_weight_pairs().iter().map(|&(x, w)| (x, w)).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        Rule {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    /// Pushes the mapped nodes and weights of [a, b] onto the output vectors.
    pub fn push_panel(&self, a: f64, b: f64, xs: &mut Vec<f64>, ws: &mut Vec<f64>) {
        let h = 0.5 * (b - a);
        let m = 0.5 * (b + a);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            xs.push(m + h * x);
            ws.push(h * w);
        }
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = 0.5 * (b - a);
        let m = 0.5 * (b + a);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(m + h * x);
        }
        s * h
    }
}

/// The cached n-point rule.
pub fn rule(n: usize) -> &'static Rule {
    static RULES: OnceLock<Mutex<HashMap<usize, &'static Rule>>> = OnceLock::new();
    let mut map = RULES.get_or_init(|| Mutex::new(HashMap::new())).lock().unwrap();
    map.entry(n).or_insert_with(|| Box::leak(Box::new(Rule::new(n))))
}

/// 16-point Gauss-Legendre on [a, b].
pub fn gl16(a: f64, b: f64, f: impl FnMut(f64) -> f64) -> f64 {
    rule(16).integrate(a, b, f)
}

/// Panels on [a, b] refined geometrically towards `a`: the first panel has
/// length `first` and each next one is `ratio` times longer.
pub fn geometric_panels(a: f64, b: f64, first: f64, ratio: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    if !(b > a) {
        return out;
    }
    let mut x = a;
    let mut len = first;
    loop {
        // merge a short remainder into the last panel
        if x + 1.5 * len >= b {
            out.push((x, b));
            return out;
        }
        out.push((x, x + len));
        x += len;
        len *= ratio;
    }
}

/// Panels on [a, b] refined geometrically towards both ends, down to `finest`.
pub fn two_sided_panels(a: f64, b: f64, finest: f64, ratio: f64) -> Vec<(f64, f64)> {
    if !(b > a) {
        return Vec::new();
    }
    let mid = 0.5 * (a + b);
    let left = geometric_panels(a, mid, finest.min(mid - a), ratio);
    let mut out = left.clone();
    for &(l, r) in left.iter().rev() {
        out.push((a + b - r, a + b - l));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials() {
        let r = rule(8);
        let v = r.integrate(0.0, 2.0, |x| x.powi(15));
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-10);
        assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn panels_cover_interval() {
        for (a, b) in [(0.0, 1.0), (-3.0, 10.0), (5.0, 5.5)] {
            let p = two_sided_panels(a, b, 1e-9, 2.0);
            assert!((p[0].0 - a).abs() < 1e-15 && (p.last().unwrap().1 - b).abs() < 1e-12);
            for w in p.windows(2) {
                assert!((w[0].1 - w[1].0).abs() < 1e-12);
                assert!(w[0].1 > w[0].0);
            }
            assert!(p[0].1 - p[0].0 < 1e-8);
            let g = geometric_panels(a, b, 1e-3, 1.5);
            assert!((g.last().unwrap().1 - b).abs() < 1e-15);
        }
    }
}
