//! Least-squares fit of `y = a * exp(b * x) + c`.
//!
//! The model is linear in `(a, c)` for fixed `b`, so the search runs over
//! `b` alone: a coarse grid on `[-5, 5]`, each point solved in closed form,
//! then golden-section refinement around the best grid cell.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const B_MIN: f64 = -5.0;
const B_MAX: f64 = 5.0;
const GRID_STEPS: usize = 2000;
const REFINE_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub r_squared: f64,
    pub sse: f64,
    /// Constant data: the fit is `y = mean` and `r_squared` is 0.
    pub degenerate: bool,
}

impl ExpFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.a * (self.b * x).exp() + self.c
    }
}

struct Solve {
    a: f64,
    c: f64,
    sse: f64,
}

/// Closed-form `(a, c)` for a fixed `b`. The basis is evaluated relative to
/// the x that keeps it `<= 1`, then `a` is rescaled, to avoid overflow.
fn solve_linear(xs: &[f64], ys: &[f64], b: f64, ss_tot: f64) -> Solve {
    let x_ref = if b >= 0.0 { xs[xs.len() - 1] } else { xs[0] };
    let f: Vec<f64> = xs.iter().map(|x| (b * (x - x_ref)).exp()).collect();
    let n = xs.len() as f64;
    let fm = f.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let (mut sff, mut sfy, mut sf2) = (0.0, 0.0, 0.0);
    for (fi, yi) in f.iter().zip(ys) {
        sff += (fi - fm) * (fi - fm);
        sfy += (fi - fm) * (yi - ym);
        sf2 += fi * fi;
    }
    if !(sff > 1e-20 * sf2) {
        return Solve {
            a: 0.0,
            c: ym,
            sse: ss_tot,
        };
    }
    let a_scaled = sfy / sff;
    let c = ym - a_scaled * fm;
    let sse = f
        .iter()
        .zip(ys)
        .map(|(fi, yi)| {
            let r = yi - a_scaled * fi - c;
            r * r
        })
        .sum();
    Solve {
        a: a_scaled * (-b * x_ref).exp(),
        c,
        sse,
    }
}

pub fn fit_exponential(xs: &[f64], ys: &[f64]) -> Result<ExpFit> {
    if xs.len() != ys.len() {
        return Err(Error::Validation("fit: xs and ys differ in length".into()));
    }
    if xs.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: xs.len(),
        });
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Validation("fit: xs must be strictly increasing".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Validation("fit: non-finite input".into()));
    }

    let n = ys.len() as f64;
    let ym = ys.iter().sum::<f64>() / n;
    let ss_tot: f64 = ys.iter().map(|y| (y - ym) * (y - ym)).sum();
    if ss_tot == 0.0 {
        return Ok(ExpFit {
            a: 0.0,
            b: 0.0,
            c: ym,
            r_squared: 0.0,
            sse: 0.0,
            degenerate: true,
        });
    }

    let step = (B_MAX - B_MIN) / GRID_STEPS as f64;
    let grid_b = |i: usize| B_MIN + i as f64 * step;
    let sse_at = |b: f64| {
        let s = solve_linear(xs, ys, b, ss_tot).sse;
        if s.is_finite() {
            s
        } else {
            f64::INFINITY
        }
    };

    let best_i = (0..=GRID_STEPS)
        .map(|i| (sse_at(grid_b(i)), i))
        .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
        .map(|(_, i)| i)
        .unwrap();

    let mut lo = grid_b(best_i.saturating_sub(1));
    let mut hi = grid_b((best_i + 1).min(GRID_STEPS));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (sse_at(x1), sse_at(x2));
    while hi - lo > REFINE_RTOL * ((lo + hi) / 2.0).abs().max(1e-3) {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = sse_at(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = sse_at(x2);
        }
    }

    // keep the grid optimum if refinement did not improve on it
    let mut b = (lo + hi) / 2.0;
    let grid_best = grid_b(best_i);
    if sse_at(grid_best) < sse_at(b) {
        b = grid_best;
    }
    let s = solve_linear(xs, ys, b, ss_tot);
    Ok(ExpFit {
        a: s.a,
        b,
        c: s.c,
        r_squared: 1.0 - s.sse / ss_tot,
        sse: s.sse,
        degenerate: false,
    })
}
