//! Bounded derivative-free local search.
//!
//! Coordinate pattern search: probe `x +/- step_j e_j` for every coordinate,
//! move to the best improving probe, halve all steps when a sweep stalls.
//! Probes of one sweep are evaluated as a single batch so callers can
//! amortize posterior computations.

use nalgebra::{DMatrix, DVector};

use crate::bounds::BoxBounds;

#[derive(Debug, Clone)]
pub struct PatternSearchOptions {
    /// Hard cap on sweeps over the coordinates.
    pub max_sweeps: usize,
    /// Stop once every step is below `tol_frac * width`.
    pub tol_frac: f64,
    /// Initial step as a fraction of the box width.
    pub init_step_frac: f64,
}

impl Default for PatternSearchOptions {
    fn default() -> Self {
        PatternSearchOptions {
            max_sweeps: 100,
            tol_frac: 1e-4,
            init_step_frac: 0.25,
        }
    }
}

/// Minimize a batched objective over the box, starting from `x0`.
///
/// The objective receives candidate points as matrix rows and returns one
/// value per row. Returns the best point found and its value; the result
/// never degrades below the start point.
pub fn pattern_search_min<F>(
    objective: &mut F,
    bounds: &BoxBounds,
    x0: &[f64],
    opts: &PatternSearchOptions,
) -> (Vec<f64>, f64)
where
    F: FnMut(&DMatrix<f64>) -> DVector<f64>,
{
    let d = bounds.dim();
    debug_assert_eq!(x0.len(), d);
    let mut x = x0.to_vec();
    bounds.clamp(&mut x);

    let start = DMatrix::from_fn(1, d, |_, j| x[j]);
    let mut best = objective(&start)[0];

    let mut steps: Vec<f64> = (0..d).map(|j| opts.init_step_frac * bounds.width(j)).collect();
    let tols: Vec<f64> = (0..d).map(|j| opts.tol_frac * bounds.width(j)).collect();

    for _ in 0..opts.max_sweeps {
        if steps.iter().zip(&tols).all(|(s, t)| s < t) {
            break;
        }
        // Up to 2d probes; duplicates of the current point are dropped.
        let mut candidates: Vec<Vec<f64>> = Vec::with_capacity(2 * d);
        for j in 0..d {
            for dir in [1.0, -1.0] {
                let mut c = x.clone();
                c[j] = (c[j] + dir * steps[j]).clamp(bounds.lower[j], bounds.upper[j]);
                if c[j] != x[j] {
                    candidates.push(c);
                }
            }
        }
        if candidates.is_empty() {
            break;
        }
        let batch = DMatrix::from_fn(candidates.len(), d, |i, j| candidates[i][j]);
        let values = objective(&batch);
        let (mut arg, mut val) = (usize::MAX, best);
        for (i, v) in values.iter().enumerate() {
            if *v < val {
                val = *v;
                arg = i;
            }
        }
        if arg != usize::MAX {
            x = candidates[arg].clone();
            best = val;
        } else {
            for s in steps.iter_mut() {
                *s *= 0.5;
            }
        }
    }
    (x, best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(center: Vec<f64>) -> impl FnMut(&DMatrix<f64>) -> DVector<f64> {
        move |batch: &DMatrix<f64>| {
            DVector::from_fn(batch.nrows(), |i, _| {
                batch
                    .row(i)
                    .iter()
                    .zip(&center)
                    .map(|(v, c)| (v - c) * (v - c))
                    .sum()
            })
        }
    }

    #[test]
    fn finds_interior_quadratic_minimum() {
        let bounds = BoxBounds::cube(3, -2.0, 2.0).unwrap();
        let center = vec![0.37, -1.21, 0.85];
        let mut f = quadratic(center.clone());
        let (x, v) = pattern_search_min(&mut f, &bounds, &[0.0; 3], &Default::default());
        for (a, c) in x.iter().zip(&center) {
            assert!((a - c).abs() < 1e-3, "{a} vs {c}");
        }
        assert!(v < 1e-6);
    }

    #[test]
    fn respects_bounds_when_minimum_is_outside() {
        let bounds = BoxBounds::cube(2, 0.0, 1.0).unwrap();
        let mut f = quadratic(vec![3.0, -1.0]);
        let (x, _) = pattern_search_min(&mut f, &bounds, &[0.5, 0.5], &Default::default());
        assert!((x[0] - 1.0).abs() < 1e-9);
        assert!(x[1].abs() < 1e-9);
    }

    #[test]
    fn never_returns_worse_than_start() {
        let bounds = BoxBounds::cube(1, -1.0, 1.0).unwrap();
        // Deceptive objective: flat except a spike at the start.
        let mut f = |batch: &DMatrix<f64>| {
            DVector::from_fn(batch.nrows(), |i, _| {
                if batch[(i, 0)].abs() < 1e-12 {
                    -5.0
                } else {
                    1.0
                }
            })
        };
        let (x, v) = pattern_search_min(&mut f, &bounds, &[0.0], &Default::default());
        assert_eq!(x, vec![0.0]);
        assert_eq!(v, -5.0);
    }
}
