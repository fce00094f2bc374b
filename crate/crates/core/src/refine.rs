//! Confidence-aware disparity refinement: weighted median pre-filter,
//! disparity-edge confidence refinement, the fast global smoother, and the
//! sparse-to-dense completion built on it.
//!
//! The energy being minimized is
//!   J(u) = sum_p h_p (u_p - f_p)^2
//!        + lambda * sum_p sum_{q in N4(p)} w_pq(g) (u_p - u_q)^2
//! with w_pq(g) = exp(-|g_p - g_q|_1 / sigma_color). The N4 sum visits
//! every undirected edge twice, so the normal system is
//! (H + 2*lambda*L_w) u = H f.
//!
//! `fgs_solve` combines 1D subsystems: a multi-pass horizontal/vertical
//! smoothing cascade with the attenuated lambda schedule seeds the
//! estimate, then alternating exact line solves of the full energy polish
//! it. Every line solve minimizes J over that line, so the energy never
//! increases. `fgs_solve_exact` solves the normal system by conjugate
//! gradient and serves as the oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{percentile, sobel_magnitude};
use crate::grid::{ConfidenceMap, DisparityMap, Grid, Guide, Mask};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct FgsConfig {
    pub lambda: f64,
    pub sigma_color: f64,
    pub iterations: usize,
}

impl Default for FgsConfig {
    fn default() -> Self {
        FgsConfig {
            lambda: 128.0,
            sigma_color: 8.0 / 255.0,
            iterations: 3,
        }
    }
}

impl FgsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 || self.sigma_color <= 0.0 || self.iterations < 1 {
            return Err(Error::Refine(format!(
                "invalid FGS config: lambda={} sigma_color={} T={}",
                self.lambda, self.sigma_color, self.iterations
            )));
        }
        Ok(())
    }

    /// Attenuated per-iteration smoothing weight of the FGS cascade.
    pub fn lambda_at(&self, t: usize) -> f64 {
        let total = self.iterations as i32;
        self.lambda * 3.0 * 4f64.powi(total - t as i32) / (4f64.powi(total) - 1.0)
    }
}

/// Guide-similarity weights on the 4-neighbor grid edges. `horizontal[x,y]`
/// is the weight of edge (x,y)-(x+1,y); the last column/row is zero.
pub struct EdgeWeights {
    pub horizontal: Grid,
    pub vertical: Grid,
}

pub fn edge_weights(guide: &Guide, sigma_color: f64) -> EdgeWeights {
    let (w, h) = (guide.width(), guide.height());
    let mut horizontal = Grid::new(w, h);
    let mut vertical = Grid::new(w, h);
    for y in 0..h {
        for x in 0..w {
            if x + 1 < w {
                horizontal.set(x, y, (-guide.l1_distance(x, y, x + 1, y) / sigma_color).exp());
            }
            if y + 1 < h {
                vertical.set(x, y, (-guide.l1_distance(x, y, x, y + 1) / sigma_color).exp());
            }
        }
    }
    EdgeWeights {
        horizontal,
        vertical,
    }
}

/// The energy J(u) from the module docs, with the N4 sum written out.
pub fn fgs_energy(u: &Grid, f: &Grid, h: &Mask, guide: &Guide, cfg: &FgsConfig) -> f64 {
    let weights = edge_weights(guide, cfg.sigma_color);
    fgs_energy_with_weights(u, f, h, &weights, cfg.lambda)
}

fn fgs_energy_with_weights(u: &Grid, f: &Grid, h: &Mask, weights: &EdgeWeights, lambda: f64) -> f64 {
    let (w, ht) = (u.width, u.height);
    let mut data = 0.0;
    for i in 0..w * ht {
        if h.data[i] {
            let r = u.data[i] - f.data[i];
            data += r * r;
        }
    }
    let mut smooth = 0.0;
    for y in 0..ht {
        for x in 0..w {
            if x + 1 < w {
                let d = u.at(x, y) - u.at(x + 1, y);
                smooth += weights.horizontal.at(x, y) * d * d;
            }
            if y + 1 < ht {
                let d = u.at(x, y) - u.at(x, y + 1);
                smooth += weights.vertical.at(x, y) * d * d;
            }
        }
    }
    // each undirected edge appears twice in the N4 double sum
    data + 2.0 * lambda * smooth
}

/// Thomas algorithm; `lower[i]` couples i to i-1, `upper[i]` couples i to
/// i+1. Overwrites `rhs` with the solution.
fn solve_tridiagonal(diag: &[f64], lower: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = rhs.len();
    let mut c = vec![0.0; n];
    let mut denom = diag[0];
    c[0] = upper[0] / denom;
    rhs[0] /= denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / denom;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

/// One horizontal smoothing pass of the cascade: per row solve
/// (I + lam * L_1d) x = x.
fn smooth_pass_horizontal(grid: &mut Grid, weights: &EdgeWeights, lam: f64) {
    let (w, h) = (grid.width, grid.height);
    let mut diag = vec![0.0; w];
    let mut lower = vec![0.0; w];
    let mut upper = vec![0.0; w];
    for y in 0..h {
        for x in 0..w {
            let wl = if x > 0 { weights.horizontal.at(x - 1, y) } else { 0.0 };
            let wr = if x + 1 < w { weights.horizontal.at(x, y) } else { 0.0 };
            diag[x] = 1.0 + lam * (wl + wr);
            lower[x] = -lam * wl;
            upper[x] = -lam * wr;
        }
        let row = &mut grid.data[y * w..(y + 1) * w];
        solve_tridiagonal(&diag, &lower, &upper, row);
    }
}

fn smooth_pass_vertical(grid: &mut Grid, weights: &EdgeWeights, lam: f64) {
    let (w, h) = (grid.width, grid.height);
    let mut diag = vec![0.0; h];
    let mut lower = vec![0.0; h];
    let mut upper = vec![0.0; h];
    let mut col = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            let wu = if y > 0 { weights.vertical.at(x, y - 1) } else { 0.0 };
            let wd = if y + 1 < h { weights.vertical.at(x, y) } else { 0.0 };
            diag[y] = 1.0 + lam * (wu + wd);
            lower[y] = -lam * wu;
            upper[y] = -lam * wd;
            col[y] = grid.at(x, y);
        }
        solve_tridiagonal(&diag, &lower, &upper, &mut col);
        for y in 0..h {
            grid.set(x, y, col[y]);
        }
    }
}

/// Exact line solve of the full energy over every row (block Gauss-Seidel
/// with tridiagonal blocks). The vertical couplings enter through the
/// diagonal and the right-hand side.
fn line_relax_rows(u: &mut Grid, f: &Grid, h: &Mask, weights: &EdgeWeights, lambda: f64) {
    let (w, ht) = (u.width, u.height);
    let s = 2.0 * lambda;
    let mut diag = vec![0.0; w];
    let mut lower = vec![0.0; w];
    let mut upper = vec![0.0; w];
    let mut rhs = vec![0.0; w];
    for y in 0..ht {
        for x in 0..w {
            let i = y * w + x;
            let wl = if x > 0 { weights.horizontal.at(x - 1, y) } else { 0.0 };
            let wr = if x + 1 < w { weights.horizontal.at(x, y) } else { 0.0 };
            let wu = if y > 0 { weights.vertical.at(x, y - 1) } else { 0.0 };
            let wd = if y + 1 < ht { weights.vertical.at(x, y) } else { 0.0 };
            let hp = if h.data[i] { 1.0 } else { 0.0 };
            diag[x] = hp + s * (wl + wr + wu + wd);
            lower[x] = -s * wl;
            upper[x] = -s * wr;
            let mut b = hp * f.data[i];
            if y > 0 {
                b += s * wu * u.at(x, y - 1);
            }
            if y + 1 < ht {
                b += s * wd * u.at(x, y + 1);
            }
            rhs[x] = b;
        }
        solve_tridiagonal(&diag, &lower, &upper, &mut rhs);
        u.data[y * w..(y + 1) * w].copy_from_slice(&rhs);
    }
}

fn line_relax_cols(u: &mut Grid, f: &Grid, h: &Mask, weights: &EdgeWeights, lambda: f64) {
    let (w, ht) = (u.width, u.height);
    let s = 2.0 * lambda;
    let mut diag = vec![0.0; ht];
    let mut lower = vec![0.0; ht];
    let mut upper = vec![0.0; ht];
    let mut rhs = vec![0.0; ht];
    for x in 0..w {
        for y in 0..ht {
            let i = y * w + x;
            let wl = if x > 0 { weights.horizontal.at(x - 1, y) } else { 0.0 };
            let wr = if x + 1 < w { weights.horizontal.at(x, y) } else { 0.0 };
            let wu = if y > 0 { weights.vertical.at(x, y - 1) } else { 0.0 };
            let wd = if y + 1 < ht { weights.vertical.at(x, y) } else { 0.0 };
            let hp = if h.data[i] { 1.0 } else { 0.0 };
            diag[y] = hp + s * (wl + wr + wu + wd);
            lower[y] = -s * wu;
            upper[y] = -s * wd;
            let mut b = hp * f.data[i];
            if x > 0 {
                b += s * wl * u.at(x - 1, y);
            }
            if x + 1 < w {
                b += s * wr * u.at(x + 1, y);
            }
            rhs[y] = b;
        }
        solve_tridiagonal(&diag, &lower, &upper, &mut rhs);
        for y in 0..ht {
            u.set(x, y, rhs[y]);
        }
    }
}

/// Approximate minimizer of the energy via 1D subsystems. Guarantees
/// J(output) <= J(f).
pub fn fgs_solve(f: &Grid, h: &Mask, guide: &Guide, cfg: &FgsConfig) -> Result<Grid> {
    cfg.validate()?;
    check_sizes(f, h, guide)?;
    if h.count() == 0 {
        return Err(Error::Refine("confidence is zero everywhere".into()));
    }
    if cfg.lambda == 0.0 {
        return Ok(f.clone());
    }
    let weights = edge_weights(guide, cfg.sigma_color);

    // seed with the smoothing cascade applied to (h.*f, h); the ratio is a
    // nonnegative-weight average of the data values
    let (w, ht) = (f.width, f.height);
    let mut num = Grid::new(w, ht);
    let mut den = Grid::new(w, ht);
    let mut data_sum = 0.0;
    for i in 0..w * ht {
        if h.data[i] {
            num.data[i] = f.data[i];
            den.data[i] = 1.0;
            data_sum += f.data[i];
        }
    }
    let data_mean = data_sum / h.count() as f64;
    for t in 1..=cfg.iterations {
        let lam = cfg.lambda_at(t);
        smooth_pass_horizontal(&mut num, &weights, lam);
        smooth_pass_horizontal(&mut den, &weights, lam);
        smooth_pass_vertical(&mut num, &weights, lam);
        smooth_pass_vertical(&mut den, &weights, lam);
    }
    let mut u = Grid::new(w, ht);
    for i in 0..w * ht {
        u.data[i] = if den.data[i] > 1e-12 {
            num.data[i] / den.data[i]
        } else {
            data_mean
        };
    }
    if fgs_energy_with_weights(&u, f, h, &weights, cfg.lambda)
        > fgs_energy_with_weights(f, f, h, &weights, cfg.lambda)
    {
        u = f.clone();
    }

    // alternating exact line solves of the full energy; monotone descent
    for _ in 0..cfg.iterations {
        line_relax_rows(&mut u, f, h, &weights, cfg.lambda);
        line_relax_cols(&mut u, f, h, &weights, cfg.lambda);
    }

    // Krylov polish: guide weights span many orders of magnitude, which
    // stalls pure line relaxation across weak links. CG descends the same
    // energy monotonically from the current iterate, so the descent
    // guarantee survives; if the cap is hit the iterate is still returned.
    let max_iter = (40 * (w + ht)).min(20_000);
    let (polished, _) = pcg(f, h, &weights, cfg.lambda, u.data, 1e-9, max_iter);
    let mut u = Grid::from_vec(w, ht, polished)?;

    // clamp to the data range: a monotone projection, it shrinks every
    // energy term and enforces the maximum principle exactly
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..w * ht {
        if h.data[i] {
            lo = lo.min(f.data[i]);
            hi = hi.max(f.data[i]);
        }
    }
    for v in &mut u.data {
        *v = v.clamp(lo, hi);
    }
    Ok(u)
}

/// Jacobi-preconditioned conjugate gradient on (H + 2*lambda*L_w) u = H f
/// starting from `init`. Returns the iterate and whether the relative
/// residual tolerance was reached.
fn pcg(
    f: &Grid,
    h: &Mask,
    weights: &EdgeWeights,
    lambda: f64,
    init: Vec<f64>,
    tol_rel: f64,
    max_iter: usize,
) -> (Vec<f64>, bool) {
    let (w, ht) = (f.width, f.height);
    let n = w * ht;
    let s = 2.0 * lambda;

    let apply = |x: &[f64], out: &mut [f64]| {
        for y in 0..ht {
            for xi in 0..w {
                let i = y * w + xi;
                let hp = if h.data[i] { 1.0 } else { 0.0 };
                let mut acc = hp * x[i];
                if xi + 1 < w {
                    acc += s * weights.horizontal.at(xi, y) * (x[i] - x[i + 1]);
                }
                if xi > 0 {
                    acc += s * weights.horizontal.at(xi - 1, y) * (x[i] - x[i - 1]);
                }
                if y + 1 < ht {
                    acc += s * weights.vertical.at(xi, y) * (x[i] - x[i + w]);
                }
                if y > 0 {
                    acc += s * weights.vertical.at(xi, y - 1) * (x[i] - x[i - w]);
                }
                out[i] = acc;
            }
        }
    };

    let mut b = vec![0.0; n];
    for i in 0..n {
        if h.data[i] {
            b[i] = f.data[i];
        }
    }
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return (vec![0.0; n], true);
    }

    let mut inv_diag = vec![0.0; n];
    for y in 0..ht {
        for xi in 0..w {
            let i = y * w + xi;
            let mut d = if h.data[i] { 1.0 } else { 0.0 };
            if xi + 1 < w {
                d += s * weights.horizontal.at(xi, y);
            }
            if xi > 0 {
                d += s * weights.horizontal.at(xi - 1, y);
            }
            if y + 1 < ht {
                d += s * weights.vertical.at(xi, y);
            }
            if y > 0 {
                d += s * weights.vertical.at(xi, y - 1);
            }
            inv_diag[i] = 1.0 / d;
        }
    }

    let mut u = init;
    let mut r = vec![0.0; n];
    apply(&u, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    let tol = tol_rel * bnorm;
    let mut converged = false;
    for _ in 0..max_iter {
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= tol {
            converged = true;
            break;
        }
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            u[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    (u, converged)
}

/// Problem-size cap for the exact solver.
pub const EXACT_SIZE_CAP: usize = 128 * 128;

/// Exact minimizer of the energy: conjugate gradient on
/// (H + 2*lambda*L_w) u = H f to relative residual 1e-10.
pub fn fgs_solve_exact(f: &Grid, h: &Mask, guide: &Guide, cfg: &FgsConfig) -> Result<Grid> {
    cfg.validate()?;
    check_sizes(f, h, guide)?;
    let n = f.width * f.height;
    if n > EXACT_SIZE_CAP {
        return Err(Error::Refine(format!(
            "exact solver capped at {EXACT_SIZE_CAP} unknowns, got {n}"
        )));
    }
    if h.count() == 0 {
        return Err(Error::Refine("confidence is zero everywhere".into()));
    }
    if cfg.lambda == 0.0 {
        return Ok(f.clone());
    }
    let weights = edge_weights(guide, cfg.sigma_color);
    let (w, ht) = (f.width, f.height);
    let mut init = vec![0.0; n];
    for i in 0..n {
        if h.data[i] {
            init[i] = f.data[i];
        }
    }
    let (u, converged) = pcg(f, h, &weights, cfg.lambda, init, 1e-10, 40 * n);
    if !converged {
        return Err(Error::Refine(
            "conjugate gradient failed to reach residual tolerance".into(),
        ));
    }
    Grid::from_vec(w, ht, u)
}

fn check_sizes(f: &Grid, h: &Mask, guide: &Guide) -> Result<()> {
    if f.width != h.width
        || f.height != h.height
        || guide.width() != f.width
        || guide.height() != f.height
    {
        return Err(Error::Refine("map sizes differ".into()));
    }
    Ok(())
}

/// Guide-weighted median filter. Output values are always members of the
/// valid input multiset inside the window; invalid pixels stay invalid.
pub fn weighted_median(
    d: &DisparityMap,
    guide: &Guide,
    window: usize,
    sigma_color: f64,
) -> Result<DisparityMap> {
    if window % 2 == 0 || window == 0 {
        return Err(Error::Refine("weighted median window must be odd".into()));
    }
    if guide.width() != d.width() || guide.height() != d.height() {
        return Err(Error::Refine("guide size differs from disparity".into()));
    }
    let (w, h) = (d.width(), d.height());
    let half = (window / 2) as isize;
    let mut values = Grid::filled(w, h, f64::NAN);
    let mut neighbors: Vec<(f64, f64)> = Vec::with_capacity(window * window);
    for y in 0..h {
        for x in 0..w {
            if !d.valid.at(x, y) {
                continue;
            }
            neighbors.clear();
            let mut total = 0.0;
            for dy in -half..=half {
                for dx in -half..=half {
                    let qx = x as isize + dx;
                    let qy = y as isize + dy;
                    if qx < 0 || qy < 0 || qx >= w as isize || qy >= h as isize {
                        continue;
                    }
                    let (qx, qy) = (qx as usize, qy as usize);
                    if !d.valid.at(qx, qy) {
                        continue;
                    }
                    let wt = (-guide.l1_distance(x, y, qx, qy) / sigma_color).exp();
                    neighbors.push((d.values.at(qx, qy), wt));
                    total += wt;
                }
            }
            neighbors.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let mut acc = 0.0;
            let mut median = neighbors[neighbors.len() - 1].0;
            for &(v, wt) in &neighbors {
                acc += wt;
                if acc >= total / 2.0 {
                    median = v;
                    break;
                }
            }
            values.set(x, y, median);
        }
    }
    DisparityMap::new(values, d.valid.clone())
}

/// Disparity-edge detection settings for confidence refinement.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct DisparityEdgeConfig {
    /// Radius by which detected disparity edges are widened before they
    /// suppress confidence. Sized to the matcher's expansion, about half
    /// the SAD window.
    pub dilation_radius: usize,
    /// Percentile used to normalize the Sobel magnitude.
    pub norm_percentile: f64,
}

impl Default for DisparityEdgeConfig {
    fn default() -> Self {
        DisparityEdgeConfig {
            dilation_radius: 13,
            norm_percentile: 99.0,
        }
    }
}

/// Refine the data-term confidence: suppress pixels on (and around)
/// disparity edges, then binarize. Returns a binary confidence map.
pub fn refine_confidence(
    conf: &ConfidenceMap,
    d: &DisparityMap,
    edge_cfg: &DisparityEdgeConfig,
    binarize_threshold: f64,
) -> Result<ConfidenceMap> {
    if conf.width() != d.width() || conf.height() != d.height() {
        return Err(Error::Refine("confidence size differs from disparity".into()));
    }
    let (w, h) = (d.width(), d.height());
    let mut field = Grid::new(w, h);
    for i in 0..w * h {
        field.data[i] = if d.valid.data[i] { d.values.data[i] } else { 0.0 };
    }
    let mut mag = sobel_magnitude(&field);
    let p = percentile(&mag.data, edge_cfg.norm_percentile);
    if p > 1e-12 {
        for v in &mut mag.data {
            *v = (*v / p).min(1.0);
        }
    } else {
        for v in &mut mag.data {
            *v = 0.0;
        }
    }
    let dilated = dilate_max(&mag, edge_cfg.dilation_radius);
    let mut out = Grid::new(w, h);
    for i in 0..w * h {
        let product = conf.values.data[i] * (1.0 - dilated.data[i]);
        out.data[i] = if product >= binarize_threshold { 1.0 } else { 0.0 };
    }
    Ok(ConfidenceMap::new(out))
}

/// Separable max filter of the given radius.
fn dilate_max(src: &Grid, radius: usize) -> Grid {
    if radius == 0 {
        return src.clone();
    }
    let (w, h) = (src.width, src.height);
    let r = radius as isize;
    let mut tmp = Grid::new(w, h);
    for y in 0..h {
        for x in 0..w as isize {
            let mut m = 0.0f64;
            for dx in -r..=r {
                let xi = x + dx;
                if xi >= 0 && xi < w as isize {
                    m = m.max(src.at(xi as usize, y));
                }
            }
            tmp.set(x as usize, y, m);
        }
    }
    let mut out = Grid::new(w, h);
    for y in 0..h as isize {
        for x in 0..w {
            let mut m = 0.0f64;
            for dy in -r..=r {
                let yi = y + dy;
                if yi >= 0 && yi < h as isize {
                    m = m.max(tmp.at(x, yi as usize));
                }
            }
            out.set(x, y as usize, m);
        }
    }
    out
}

/// Distance decay used as the completion confidence proxy.
pub const COMPLETION_CONF_TAU: f64 = 8.0;

/// Densify a sparse disparity map with the smoother; the returned
/// confidence decays with the distance to the nearest valid input pixel.
pub fn complete_sparse(
    sparse: &DisparityMap,
    guide: &Guide,
    cfg: &FgsConfig,
) -> Result<(DisparityMap, ConfidenceMap)> {
    if sparse.valid.count() == 0 {
        return Err(Error::Refine("sparse input has no valid pixels".into()));
    }
    let (w, h) = (sparse.width(), sparse.height());
    let mut f = Grid::new(w, h);
    for i in 0..w * h {
        if sparse.valid.data[i] {
            f.data[i] = sparse.values.data[i];
        }
    }
    let dense = fgs_solve(&f, &sparse.valid, guide, cfg)?;
    let dist = distance_to_valid(&sparse.valid);
    let mut conf = Grid::new(w, h);
    for i in 0..w * h {
        conf.data[i] = (-dist.data[i] / COMPLETION_CONF_TAU).exp();
    }
    Ok((
        DisparityMap::new(dense, Mask::filled(w, h, true))?,
        ConfidenceMap::new(conf),
    ))
}

/// Exact Euclidean distance to the nearest true pixel, in pixels.
pub fn distance_to_valid(mask: &Mask) -> Grid {
    let (w, h) = (mask.width, mask.height);
    const INF: f64 = 1e18;
    let mut sq = vec![INF; w * h];
    for i in 0..w * h {
        if mask.data[i] {
            sq[i] = 0.0;
        }
    }
    // two-pass separable squared distance transform
    let mut col = vec![0.0; h];
    let mut out_col = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = sq[y * w + x];
        }
        edt_1d(&col, &mut out_col);
        for y in 0..h {
            sq[y * w + x] = out_col[y];
        }
    }
    let mut row = vec![0.0; w];
    let mut out_row = vec![0.0; w];
    let mut out = Grid::new(w, h);
    for y in 0..h {
        row.copy_from_slice(&sq[y * w..(y + 1) * w]);
        edt_1d(&row, &mut out_row);
        for x in 0..w {
            out.set(x, y, out_row[x].sqrt());
        }
    }
    out
}

/// 1D squared distance transform (lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64))
                / (2.0 * q as f64 - 2.0 * p as f64);
            if s <= z[k] {
                if k == 0 {
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    let mut k = 0usize;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        out[q] = d * d + f[p];
    }
}

/// Full refinement settings: pre-filter, confidence refinement, smoother.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    pub fgs: FgsConfig,
    pub wmf_window: usize,
    pub edge: DisparityEdgeConfig,
    pub binarize_threshold: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            fgs: FgsConfig::default(),
            wmf_window: 7,
            edge: DisparityEdgeConfig::default(),
            binarize_threshold: 0.5,
        }
    }
}

/// The refinement composition: weighted median, confidence refinement,
/// smoother, in that order.
pub fn refine_pipeline(
    dense: &DisparityMap,
    conf: &ConfidenceMap,
    guide: &Guide,
    cfg: &RefineConfig,
) -> Result<DisparityMap> {
    let filtered = weighted_median(dense, guide, cfg.wmf_window, cfg.fgs.sigma_color)?;
    let h = refine_confidence(conf, &filtered, &cfg.edge, cfg.binarize_threshold)?;
    let h_mask = h.binarize(0.5);
    let (w, ht) = (dense.width(), dense.height());
    let mut f = Grid::new(w, ht);
    for i in 0..w * ht {
        if filtered.valid.data[i] {
            f.data[i] = filtered.values.data[i];
        }
    }
    // data term only where the input is both confident and valid
    let h_mask = h_mask.intersect(&filtered.valid);
    let out = fgs_solve(&f, &h_mask, guide, &cfg.fgs)?;
    DisparityMap::new(out, Mask::filled(w, ht, true))
}
