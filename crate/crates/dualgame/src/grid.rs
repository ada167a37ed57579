//! Uniform barycentric grids on probability simplices.
//!
//! A grid of resolution r on Delta(K) is {n / r : n in Z_{>=0}^K, sum n = r}.
//! The l1 covering radius of that grid is certified by greedy rounding: any
//! p in Delta(K) rounds to a grid point within 2*floor(K/2)*ceil(K/2)/(K*r).

/// All points of the resolution-r barycentric grid on Delta(dim).
pub fn simplex_grid(dim: usize, resolution: usize) -> Vec<Vec<f64>> {
    assert!(dim >= 1);
    if dim == 1 {
        return vec![vec![1.0]];
    }
    let r = resolution.max(1);
    let mut out = Vec::new();
    let mut counts = vec![0usize; dim];
    fill(&mut out, &mut counts, 0, r, r);
    out
}

fn fill(out: &mut Vec<Vec<f64>>, counts: &mut Vec<usize>, pos: usize, left: usize, r: usize) {
    if pos == counts.len() - 1 {
        counts[pos] = left;
        out.push(counts.iter().map(|&c| c as f64 / r as f64).collect());
        return;
    }
    for c in 0..=left {
        counts[pos] = c;
        fill(out, counts, pos + 1, left - c, r);
    }
}

/// Certified l1 covering radius of the resolution-r grid on Delta(dim).
pub fn simplex_mesh(dim: usize, resolution: usize) -> f64 {
    if dim <= 1 {
        return 0.0;
    }
    let r = resolution.max(1) as f64;
    let half_down = (dim / 2) as f64;
    let half_up = dim.div_ceil(2) as f64;
    2.0 * half_down * half_up / (dim as f64 * r)
}

/// Sizes of barycentric grids grow as C(r + dim - 1, dim - 1).
pub fn simplex_grid_len(dim: usize, resolution: usize) -> usize {
    if dim == 1 {
        return 1;
    }
    let r = resolution.max(1);
    let mut num: usize = 1;
    let mut den: usize = 1;
    for t in 0..(dim - 1) {
        num *= r + dim - 1 - t;
        den *= t + 1;
    }
    num / den
}

/// Cartesian product of `copies` simplex grids: one strategy row per type.
/// Each element is a flat (copies x dim) row-stochastic matrix.
pub fn product_strategy_grid(copies: usize, dim: usize, resolution: usize) -> Vec<Vec<f64>> {
    let base = simplex_grid(dim, resolution);
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..copies {
        let mut next = Vec::with_capacity(out.len() * base.len());
        for prefix in &out {
            for row in &base {
                let mut combined = prefix.clone();
                combined.extend_from_slice(row);
                next.push(combined);
            }
        }
        out = next;
    }
    out
}

/// Grid of points on the zero-sum cross-section {x : sum_k x_k = 0} of R^K,
/// covering the cube of the given radius in the first K-1 coordinates with
/// `points_per_axis` samples per axis. Functions with the translation
/// property eval(x + c*1) = eval(x) - c are determined by this section.
pub fn cross_section_grid(dim: usize, radius: f64, points_per_axis: usize) -> Vec<Vec<f64>> {
    assert!(dim >= 1);
    if dim == 1 {
        return vec![vec![0.0]];
    }
    let n = points_per_axis.max(2);
    let axis: Vec<f64> = (0..n)
        .map(|t| -radius + 2.0 * radius * t as f64 / (n - 1) as f64)
        .collect();
    let mut out = Vec::new();
    let mut current = vec![0.0; dim - 1];
    fill_section(&mut out, &mut current, 0, &axis, dim);
    out
}

fn fill_section(out: &mut Vec<Vec<f64>>, current: &mut Vec<f64>, pos: usize, axis: &[f64], dim: usize) {
    if pos == dim - 1 {
        let mut point = current.clone();
        let last: f64 = -current.iter().sum::<f64>();
        point.push(last);
        out.push(point);
        return;
    }
    for &v in axis {
        current[pos] = v;
        fill_section(out, current, pos + 1, axis, dim);
    }
}

/// Covering radius in the max norm of `cross_section_grid` over vectors in
/// the section whose first K-1 coordinates lie in the cube.
pub fn cross_section_cover(dim: usize, radius: f64, points_per_axis: usize) -> f64 {
    if dim == 1 {
        return 0.0;
    }
    let n = points_per_axis.max(2);
    let step = 2.0 * radius / (n - 1) as f64;
    (dim - 1) as f64 * step / 2.0
}

/// Default simplex grid resolution by dimension: 16 for K <= 2, 8 for K = 3,
/// 4 beyond.
pub fn default_resolution(dim: usize) -> usize {
    match dim {
        0 | 1 | 2 => 16,
        3 => 8,
        _ => 4,
    }
}
