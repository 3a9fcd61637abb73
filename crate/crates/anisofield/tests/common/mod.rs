#![allow(dead_code)]

use anisofield::laplace::AxisLaw;
use anisofield::model::{LatticePoint, ModelParams};
use gauss_quad::GaussLegendre;
use std::num::NonZeroUsize;

pub fn laws(p: &ModelParams) -> [AxisLaw; 3] {
    let a = p.alpha();
    [AxisLaw::new(a[0], p.c[0]), AxisLaw::new(a[1], p.c[1]), AxisLaw::new(a[2], p.c[2])]
}

fn gl(n: usize) -> Vec<(f64, f64)> {
    GaussLegendre::new(NonZeroUsize::new(n).unwrap()).as_node_weight_pairs().iter().map(|&(x, w)| (x, w)).collect()
}

fn push(out: &mut Vec<(f64, f64)>, a: f64, b: f64, r: &[(f64, f64)]) {
    let (h, m) = (0.5 * (b - a), 0.5 * (b + a));
    for &(x, w) in r {
        out.push((m + h * x, h * w));
    }
}

/// Nodes for the integral over (edge, +inf) or (-inf, edge) via x = edge +- (e^u - 1).
fn half_line(edge: f64, dir: f64, out: &mut Vec<(f64, f64)>) {
    let r = gl(10);
    let panels = 20;
    let umax = 55.0;
    for i in 0..panels {
        let (a, b) = (umax * i as f64 / panels as f64, umax * (i + 1) as f64 / panels as f64);
        let mut tmp = Vec::new();
        push(&mut tmp, a, b, &r);
        for (u, w) in tmp {
            out.push((edge + dir * (u.exp() - 1.0), w * u.exp()));
        }
    }
}

/// Nodes for an integral over R with kinks at the given points.
fn real_line(kinks: &[f64]) -> Vec<(f64, f64)> {
    let mut k = kinks.to_vec();
    k.sort_by(|a, b| a.partial_cmp(b).unwrap());
    k.dedup();
    let r = gl(12);
    let mut out = Vec::new();
    for w in k.windows(2) {
        push(&mut out, w[0], w[1], &r);
    }
    half_line(k[0], -1.0, &mut out);
    half_line(*k.last().unwrap(), 1.0, &mut out);
    out
}

fn outside(l: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    half_line(l, 1.0, &mut out);
    half_line(-l, -1.0, &mut out);
    out
}

/// Coefficient with the lattice convention extended to real arguments.
fn a_real(p: &ModelParams, s: [f64; 3]) -> f64 {
    let al = p.alpha();
    let x: f64 = (0..3).map(|j| p.c[j] * s[j].abs().max(1.0).powf(al[j])).sum();
    x.powf(-p.nu)
}

/// r(t) = sum over s of a(s) a(s + t): exact sum over the cube |s_j| <= n
/// plus a cubature of the smooth remainder outside the cube.
pub fn r_oracle(p: &ModelParams, t: [i64; 3], n: i64) -> f64 {
    let mut inner = 0.0;
    for i in -n..=n {
        for j in -n..=n {
            for k in -n..=n {
                inner += p.coefficient_plain(LatticePoint::new(i, j, k))
                    * p.coefficient_plain(LatticePoint::new(i + t[0], j + t[1], k + t[2]));
            }
        }
    }
    let l = n as f64 + 0.5;
    let tf = t.map(|x| x as f64);
    let full: Vec<Vec<(f64, f64)>> =
        (0..3).map(|j| real_line(&[-1.0, 1.0, -tf[j] - 1.0, -tf[j] + 1.0, -l, l])).collect();
    let cube: Vec<Vec<(f64, f64)>> = (0..3)
        .map(|j| full[j].iter().copied().filter(|(x, _)| x.abs() < l).collect())
        .collect();
    let out = outside(l);
    let f = |s: [f64; 3]| a_real(p, s) * a_real(p, [s[0] + tf[0], s[1] + tf[1], s[2] + tf[2]]);
    let mut tail = 0.0;
    // |s1| > l, s2 and s3 free
    for &(x, wx) in &out {
        for &(y, wy) in &full[1] {
            for &(z, wz) in &full[2] {
                tail += wx * wy * wz * f([x, y, z]);
            }
        }
    }
    // |s1| < l, |s2| > l, s3 free
    for &(x, wx) in &cube[0] {
        for &(y, wy) in &out {
            for &(z, wz) in &full[2] {
                tail += wx * wy * wz * f([x, y, z]);
            }
        }
    }
    // |s1|, |s2| < l, |s3| > l
    for &(x, wx) in &cube[0] {
        for &(y, wy) in &cube[1] {
            for &(z, wz) in &out {
                tail += wx * wy * wz * f([x, y, z]);
            }
        }
    }
    inner + tail
}
