//! Small separable filters shared by the matcher and the refiner.

use crate::grid::Grid;

/// Separable Gaussian blur with mirror boundary. `sigma <= 0` is identity.
pub fn gaussian_blur(src: &Grid, sigma: f64) -> Grid {
    if sigma <= 0.0 {
        return src.clone();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    let mut sum = 0.0;
    for i in -radius..=radius {
        let w = (-(i * i) as f64 / (2.0 * sigma * sigma)).exp();
        kernel.push(w);
        sum += w;
    }
    for w in &mut kernel {
        *w /= sum;
    }

    let (w, h) = (src.width, src.height);
    let mut tmp = Grid::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, wk) in kernel.iter().enumerate() {
                let xi = x as isize + k as isize - radius;
                acc += wk * src.at_mirrored(xi, y as isize);
            }
            tmp.set(x, y, acc);
        }
    }
    let mut out = Grid::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, wk) in kernel.iter().enumerate() {
                let yi = y as isize + k as isize - radius;
                acc += wk * tmp.at_mirrored(x as isize, yi);
            }
            out.set(x, y, acc);
        }
    }
    out
}

/// Sobel gradient magnitude (3x3 support, mirror boundary).
pub fn sobel_magnitude(src: &Grid) -> Grid {
    let (w, h) = (src.width, src.height);
    let mut out = Grid::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let s = |dx: isize, dy: isize| src.at_mirrored(x as isize + dx, y as isize + dy);
            let gx = (s(1, -1) + 2.0 * s(1, 0) + s(1, 1)) - (s(-1, -1) + 2.0 * s(-1, 0) + s(-1, 1));
            let gy = (s(-1, 1) + 2.0 * s(0, 1) + s(1, 1)) - (s(-1, -1) + 2.0 * s(0, -1) + s(1, -1));
            out.set(x, y, (gx * gx + gy * gy).sqrt());
        }
    }
    out
}

/// p-th percentile of the samples (nearest-rank), p in [0, 100].
pub fn percentile(data: &[f64], p: f64) -> f64 {
    assert!(!data.is_empty());
    let mut sorted: Vec<f64> = data.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((p / 100.0) * (sorted.len() - 1) as f64).round() as usize;
    sorted[rank.min(sorted.len() - 1)]
}
