//! Independent re-implementations used as oracles. None of these call the
//! library routine they check.

use isac_ot::association::DensityField;

/// `-G/U + G/(U K)` with `U` floored at 1e-6.
pub fn score(g: f64, u: f64, k: usize) -> f64 {
    let u = u.max(1e-6);
    -g / u + g / (u * k as f64)
}

/// Exhaustive per-point argmin, lowest index on ties.
pub fn argmin_cell(row: &[f64], masses: &[f64], k: usize) -> usize {
    let mut best = 0;
    for m in 1..row.len() {
        if score(row[m], masses[m], k) < score(row[best], masses[best], k) {
            best = m;
        }
    }
    best
}

pub fn masses_of(labels: &[usize], cells: usize, k: usize) -> Vec<f64> {
    let mut c = vec![0.0; cells];
    for &l in labels {
        c[l] += 1.0;
    }
    c.iter()
        .map(|x| k as f64 * x / labels.len() as f64)
        .collect()
}

/// Mean assigned score with masses taken from the labels.
pub fn association_value(field: &DensityField, labels: &[usize], k: usize) -> f64 {
    let u = masses_of(labels, field.cells, k);
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| score(field.row(i)[l], u[l], k))
        .sum::<f64>()
        / labels.len() as f64
}

/// Relabel by the score argmin with masses from the labels until nothing
/// changes.
pub fn fixed_point(field: &DensityField, mut labels: Vec<usize>, k: usize) -> Vec<usize> {
    for _ in 0..500 {
        let u = masses_of(&labels, field.cells, k);
        let next: Vec<usize> = (0..labels.len())
            .map(|i| argmin_cell(field.row(i), &u, k))
            .collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    labels
}

/// Isotropic Gaussian density in 3D.
pub fn gaussian_pdf(q: [f64; 3], mean: [f64; 3], std: f64) -> f64 {
    let r2: f64 = (0..3).map(|i| (q[i] - mean[i]).powi(2)).sum();
    (-0.5 * r2 / (std * std)).exp() / (2.0 * std::f64::consts::PI * std * std).powf(1.5)
}

/// Midpoint rule over the cube `[0, side]³` on `steps³` cells, accumulating
/// `f` into the bin chosen by `bin(x)`.
pub fn midpoint_bins(
    side: f64,
    steps: usize,
    bins: usize,
    f: impl Fn([f64; 3]) -> f64,
    bin: impl Fn(f64) -> usize,
) -> Vec<f64> {
    let h = side / steps as f64;
    let mut out = vec![0.0; bins];
    for i in 0..steps {
        let x = (i as f64 + 0.5) * h;
        let b = bin(x);
        for j in 0..steps {
            let y = (j as f64 + 0.5) * h;
            for l in 0..steps {
                let z = (l as f64 + 0.5) * h;
                out[b] += f([x, y, z]);
            }
        }
    }
    out
}

/// Sum of `w log2(1 + g p)` over links.
pub fn rate_objective(gains: &[f64], powers: &[f64]) -> f64 {
    gains
        .iter()
        .zip(powers)
        .map(|(g, p)| (1.0 + g * p).log2())
        .sum()
}

/// Best split of `budget` over two unit-weight rate links on a fine line
/// search.
pub fn best_two_link_split(gains: [f64; 2], budget: f64, steps: usize) -> [f64; 2] {
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 0..=steps {
        let x = budget * i as f64 / steps as f64;
        let v = rate_objective(&gains, &[x, budget - x]);
        if v > best.0 {
            best = (v, x);
        }
    }
    [best.1, budget - best.1]
}

/// Central difference of `f` at `x`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}
