use serde::Serialize;

use crate::meanfield::DensitySnapshot;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Wasserstein {
    pub distance: f64,
    /// The density grid was coarser than the requested resolution.
    pub coarse_grid: bool,
}

/// `W1 = int |F_emp - F|` by the trapezoid rule on the union of the sample
/// points and the density grid. `sample` must be sorted.
pub fn wasserstein1(sample: &[f64], density: &DensitySnapshot, max_spacing: f64) -> Wasserstein {
    let n = sample.len() as f64;
    let mut grid: Vec<f64> = Vec::with_capacity(sample.len() + density.x.len());
    let (mut i, mut j) = (0, 0);
    while i < sample.len() || j < density.x.len() {
        let take_sample = j == density.x.len() || (i < sample.len() && sample[i] <= density.x[j]);
        if take_sample {
            grid.push(sample[i]);
            i += 1;
        } else {
            grid.push(density.x[j]);
            j += 1;
        }
    }
    let mut total = 0.0;
    let mut k = 0usize;
    // empirical CDF is right-continuous: count of samples <= x
    let mut emp = |x: f64| {
        while k < sample.len() && sample[k] <= x {
            k += 1;
        }
        k as f64 / n
    };
    let mut prev_x = grid[0];
    let mut prev_emp = emp(prev_x);
    let mut prev_diff = (prev_emp - density.cdf_at(prev_x)).abs();
    for &x in &grid[1..] {
        if x <= prev_x {
            continue;
        }
        // The empirical CDF is constant on (prev_x, x): integrate its gap to
        // the limit CDF with the left value held.
        let left = (prev_emp - density.cdf_at(x)).abs();
        total += 0.5 * (x - prev_x) * (prev_diff + left);
        prev_emp = emp(x);
        prev_diff = (prev_emp - density.cdf_at(x)).abs();
        prev_x = x;
    }
    Wasserstein {
        distance: total,
        coarse_grid: density.max_spacing() > max_spacing,
    }
}

/// `W1` between two sorted samples of equal size: mean absolute difference
/// of order statistics.
pub fn wasserstein1_samples(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "samples must have equal size");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}
