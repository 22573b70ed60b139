//! Quadrature on the reference triangle `(0,0), (1,0), (0,1)` and on `[0, 1]`.

use alloc::vec::Vec;

use crate::math::{cos, sqrt, Point, PI};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Highest total polynomial degree integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Orbit of a fully symmetric triangle rule, in barycentric coordinates.
/// Weights are normalized to a unit-area triangle.
enum Orbit {
    Centroid(f64),
    Edge { w: f64, a: f64 },
    General { w: f64, a: f64, b: f64 },
}

fn expand(orbits: &[Orbit], degree: usize) -> QuadratureRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut push = |l1: f64, l2: f64, w: f64| {
        points.push([l1, l2]);
        weights.push(0.5 * w);
    };
    for orbit in orbits {
        match *orbit {
            Orbit::Centroid(w) => push(1.0 / 3.0, 1.0 / 3.0, w),
            Orbit::Edge { w, a } => {
                let b = 1.0 - 2.0 * a;
                push(a, a, w);
                push(b, a, w);
                push(a, b, w);
            }
            Orbit::General { w, a, b } => {
                let c = 1.0 - a - b;
                for (x, y) in [(a, b), (b, a), (a, c), (c, a), (b, c), (c, b)] {
                    push(x, y, w);
                }
            }
        }
    }
    QuadratureRule { points, weights, degree }
}

/// Symmetric triangle rule exact to at least `min_degree`.
///
/// Degrees up to 8 use fully symmetric Gauss rules (1, 3, 6, 7 and 16 points);
/// 9 and 10 fall back to a collapsed Gauss-Legendre product rule.
pub fn triangle_rule(min_degree: usize) -> Result<QuadratureRule> {
    match min_degree {
        1 => Ok(expand(&[Orbit::Centroid(1.0)], 1)),
        2 => Ok(expand(&[Orbit::Edge { w: 1.0 / 3.0, a: 1.0 / 6.0 }], 2)),
        3 | 4 => Ok(expand(
            &[
                Orbit::Edge { w: 0.2233815896780114657, a: 0.44594849091596488632 },
                Orbit::Edge { w: 0.10995174365532186764, a: 0.09157621350977074346 },
            ],
            4,
        )),
        5 => {
            let s = sqrt(15.0);
            Ok(expand(
                &[
                    Orbit::Centroid(9.0 / 40.0),
                    Orbit::Edge { w: (155.0 - s) / 1200.0, a: (6.0 - s) / 21.0 },
                    Orbit::Edge { w: (155.0 + s) / 1200.0, a: (6.0 + s) / 21.0 },
                ],
                5,
            ))
        }
        6..=8 => Ok(degree8()),
        9 | 10 => Ok(collapsed_gauss(6, 10)),
        d => Err(Error::UnsupportedDegree(d)),
    }
}

/// The 16-point symmetric rule exact for degree 8.
pub fn degree8() -> QuadratureRule {
    expand(
        &[
            Orbit::Centroid(0.14431560767778716825),
            Orbit::Edge { w: 0.095091634267284624794, a: 0.45929258829272315603 },
            Orbit::Edge { w: 0.10321737053471825028, a: 0.17056930775176020662 },
            Orbit::Edge { w: 0.032458497623198080311, a: 0.050547228317030975458 },
            Orbit::General {
                w: 0.027230314174434994265,
                a: 0.0083947774099576053372,
                b: 0.26311282963463811342,
            },
        ],
        8,
    )
}

/// Gauss-Legendre nodes and weights on `[0, 1]`, by Newton iteration on the
/// Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(0.5 * (1.0 - x));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// Five-point Gauss-Legendre rule on `[0, 1]` (exact to degree 9).
pub fn segment_rule() -> QuadratureRule {
    let r = sqrt(10.0 / 7.0);
    let (x1, x2) = (sqrt(5.0 - 2.0 * r) / 3.0, sqrt(5.0 + 2.0 * r) / 3.0);
    let s70 = sqrt(70.0);
    let (w1, w2) = ((322.0 + 13.0 * s70) / 900.0, (322.0 - 13.0 * s70) / 900.0);
    let raw = [(-x2, w2), (-x1, w1), (0.0, 128.0 / 225.0), (x1, w1), (x2, w2)];
    QuadratureRule {
        points: raw.iter().map(|&(x, _)| [0.5 * (1.0 + x), 0.0]).collect(),
        weights: raw.iter().map(|&(_, w)| 0.5 * w).collect(),
        degree: 9,
    }
}

/// Conical product rule: Gauss-Legendre in both directions of the collapsed
/// square, with the Jacobian `1 - s` folded into the weights.
fn collapsed_gauss(n: usize, degree: usize) -> QuadratureRule {
    let (x, w) = gauss_legendre(n);
    let (s, ws) = gauss_legendre(n + 1);
    let mut points = Vec::with_capacity(n * (n + 1));
    let mut weights = Vec::with_capacity(n * (n + 1));
    for (si, wsi) in s.iter().zip(&ws) {
        for (xj, wj) in x.iter().zip(&w) {
            points.push([xj * (1.0 - si), *si]);
            weights.push(wj * wsi * (1.0 - si));
        }
    }
    QuadratureRule { points, weights, degree }
}
