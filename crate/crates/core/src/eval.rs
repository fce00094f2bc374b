//! Affine-invariant disparity evaluation and the uncertainty loss.
//!
//! AI(p) fits the affine map beta1*est + beta0 that best matches ground
//! truth over the shared valid pixels, minimizing the Lp norm of the
//! residuals, and reports the mean Lp residual after alignment. p=2 is
//! closed form; p=1 uses iteratively reweighted least squares. The rank
//! metric is 1 - |rho_s| with average-rank tie handling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::DisparityMap;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MetricReport {
    /// Mean |residual| after L1-optimal affine alignment.
    pub ai1: f64,
    /// Mean squared residual after L2-optimal affine alignment.
    pub ai2: f64,
    /// 1 - |spearman rho| between estimate and ground truth.
    pub spearman_one_minus_abs: f64,
    /// Affine gain of the L2 fit.
    pub beta1: f64,
    /// Affine offset of the L2 fit.
    pub beta0: f64,
    /// Number of pixels valid in both maps.
    pub n_pixels: usize,
    /// Set when the estimate (or ground truth) is constant over the valid
    /// set, making the affine fit non-identifiable.
    pub degenerate: bool,
}

fn paired_samples(est: &DisparityMap, gt: &DisparityMap) -> Result<(Vec<f64>, Vec<f64>)> {
    if est.width() != gt.width() || est.height() != gt.height() {
        return Err(Error::Eval("map sizes differ".into()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..est.values.data.len() {
        if est.valid.data[i] && gt.valid.data[i] {
            xs.push(est.values.data[i]);
            ys.push(gt.values.data[i]);
        }
    }
    if xs.len() < 2 {
        return Err(Error::Eval(format!(
            "need at least 2 shared valid pixels, got {}",
            xs.len()
        )));
    }
    Ok((xs, ys))
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&x| x == v[0])
}

/// Weighted least-squares affine fit y ~ b1*x + b0. Returns (b1, b0).
fn affine_lsq(xs: &[f64], ys: &[f64], w: &[f64]) -> (f64, f64) {
    let sw: f64 = w.iter().sum();
    let sx: f64 = xs.iter().zip(w).map(|(x, w)| x * w).sum();
    let sy: f64 = ys.iter().zip(w).map(|(y, w)| y * w).sum();
    let sxx: f64 = xs.iter().zip(w).map(|(x, w)| x * x * w).sum();
    let sxy: f64 = xs.iter().zip(ys).zip(w).map(|((x, y), w)| x * y * w).sum();
    let det = sw * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return (0.0, if sw > 0.0 { sy / sw } else { 0.0 });
    }
    let b1 = (sw * sxy - sx * sy) / det;
    let b0 = (sy - b1 * sx) / sw;
    (b1, b0)
}

/// Affine-invariant error with Lp residual norm, p in {1, 2}.
/// Returns (metric, beta1, beta0, degenerate).
pub fn ai_metric(est: &DisparityMap, gt: &DisparityMap, p: u32) -> Result<(f64, f64, f64, bool)> {
    let (xs, ys) = paired_samples(est, gt)?;
    let n = xs.len() as f64;
    if is_constant(&xs) {
        // gain is non-identifiable; fall back to the offset-only fit
        let (b1, b0, resid): (f64, f64, f64) = match p {
            2 => {
                let b0 = ys.iter().sum::<f64>() / n;
                let r = ys.iter().map(|y| (y - b0) * (y - b0)).sum::<f64>() / n;
                (0.0, b0, r)
            }
            1 => {
                let mut s = ys.clone();
                s.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let b0 = s[s.len() / 2];
                let r = ys.iter().map(|y| (y - b0).abs()).sum::<f64>() / n;
                (0.0, b0, r)
            }
            _ => return Err(Error::Eval(format!("unsupported norm p={p}"))),
        };
        return Ok((resid, b1, b0, true));
    }
    match p {
        2 => {
            let w = vec![1.0; xs.len()];
            let (b1, b0) = affine_lsq(&xs, &ys, &w);
            let resid = xs
                .iter()
                .zip(&ys)
                .map(|(x, y)| {
                    let r = y - (b1 * x + b0);
                    r * r
                })
                .sum::<f64>()
                / n;
            Ok((resid, b1, b0, false))
        }
        1 => {
            // IRLS for the L1-optimal affine fit
            const EPS: f64 = 1e-9;
            const COEF_TOL: f64 = 1e-8;
            const MAX_ITER: usize = 200;
            let mut w = vec![1.0; xs.len()];
            let (mut b1, mut b0) = affine_lsq(&xs, &ys, &w);
            for _ in 0..MAX_ITER {
                for (i, wi) in w.iter_mut().enumerate() {
                    let r = ys[i] - (b1 * xs[i] + b0);
                    *wi = 1.0 / r.abs().max(EPS);
                }
                let (nb1, nb0) = affine_lsq(&xs, &ys, &w);
                let moved = (nb1 - b1).abs() + (nb0 - b0).abs();
                b1 = nb1;
                b0 = nb0;
                if moved < COEF_TOL {
                    break;
                }
            }
            let resid = xs
                .iter()
                .zip(&ys)
                .map(|(x, y)| (y - (b1 * x + b0)).abs())
                .sum::<f64>()
                / n;
            Ok((resid, b1, b0, false))
        }
        _ => Err(Error::Eval(format!("unsupported norm p={p}"))),
    }
}

/// Average ranks (1-based); ties get the mean of the ranks they span.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[idx[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for i in 0..a.len() {
        let da = a[i] - ma;
        let db = b[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if va <= 0.0 || vb <= 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

/// 1 - |rho_s| over the shared valid pixels. Constant inputs give rho = 0,
/// i.e. the metric takes its worst value 1.
pub fn spearman_measure(est: &DisparityMap, gt: &DisparityMap) -> Result<f64> {
    let (xs, ys) = paired_samples(est, gt)?;
    let rx = average_ranks(&xs);
    let ry = average_ranks(&ys);
    Ok(1.0 - pearson(&rx, &ry).abs())
}

/// Mean of sqrt(exp(-s)*(d_hat - d)^2 + 2 s) with s = 2 ln(sigma), over
/// pixels valid in both maps. `sigma` must be positive there.
pub fn uncertainty_loss(
    est: &DisparityMap,
    gt: &DisparityMap,
    sigma: &DisparityMap,
) -> Result<f64> {
    if est.width() != gt.width()
        || est.height() != gt.height()
        || sigma.width() != est.width()
        || sigma.height() != est.height()
    {
        return Err(Error::Eval("map sizes differ".into()));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 0..est.values.data.len() {
        if !(est.valid.data[i] && gt.valid.data[i] && sigma.valid.data[i]) {
            continue;
        }
        let sg = sigma.values.data[i];
        if sg <= 0.0 {
            return Err(Error::Eval("sigma must be positive on valid pixels".into()));
        }
        let s = 2.0 * sg.ln();
        let r = est.values.data[i] - gt.values.data[i];
        let inner = (-s).exp() * r * r + 2.0 * s;
        if inner < 0.0 {
            return Err(Error::Eval(
                "uncertainty loss argument is negative; residuals too small for sigma".into(),
            ));
        }
        sum += inner.sqrt();
        n += 1;
    }
    if n == 0 {
        return Err(Error::Eval("no shared valid pixels".into()));
    }
    Ok(sum / n as f64)
}

/// Evaluate an estimate against ground truth with all scalar metrics.
pub fn evaluate(est: &DisparityMap, gt: &DisparityMap) -> Result<MetricReport> {
    let (ai2, beta1, beta0, degenerate2) = ai_metric(est, gt, 2)?;
    let (ai1, _, _, degenerate1) = ai_metric(est, gt, 1)?;
    let spearman = spearman_measure(est, gt)?;
    let n_pixels = est.valid.intersect(&gt.valid).count();
    Ok(MetricReport {
        ai1,
        ai2,
        spearman_one_minus_abs: spearman,
        beta1,
        beta0,
        n_pixels,
        degenerate: degenerate1 || degenerate2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, Mask};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn map_from(values: Vec<f64>) -> DisparityMap {
        let n = values.len();
        DisparityMap::new(Grid::from_vec(n, 1, values).unwrap(), Mask::filled(n, 1, true))
            .unwrap()
    }

    fn random_map(n: usize, seed: u64) -> DisparityMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        map_from((0..n).map(|_| rng.gen_range(-5.0..5.0)).collect())
    }

    /// Brute-force grid+refine search for the best affine fit.
    fn brute_force_ai(xs: &[f64], ys: &[f64], p: u32) -> f64 {
        let cost = |b1: f64, b0: f64| -> f64 {
            xs.iter()
                .zip(ys)
                .map(|(x, y)| {
                    let r = y - (b1 * x + b0);
                    if p == 2 {
                        r * r
                    } else {
                        r.abs()
                    }
                })
                .sum::<f64>()
                / xs.len() as f64
        };
        let mut best = (0.0, 0.0, f64::INFINITY);
        let mut c1 = 0.0;
        let mut c0 = 0.0;
        let mut span = 8.0;
        for _ in 0..40 {
            for i in -20..=20 {
                for j in -20..=20 {
                    let b1 = c1 + span * i as f64 / 20.0;
                    let b0 = c0 + span * j as f64 / 20.0;
                    let c = cost(b1, b0);
                    if c < best.2 {
                        best = (b1, b0, c);
                    }
                }
            }
            c1 = best.0;
            c0 = best.1;
            span *= 0.5;
        }
        best.2
    }

    /// LAD line through pairs of points; the L1-optimal affine fit passes
    /// through at least two samples.
    fn lad_pair_enumeration(xs: &[f64], ys: &[f64]) -> f64 {
        let n = xs.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                if xs[i] == xs[j] {
                    continue;
                }
                let b1 = (ys[j] - ys[i]) / (xs[j] - xs[i]);
                let b0 = ys[i] - b1 * xs[i];
                let c = xs
                    .iter()
                    .zip(ys)
                    .map(|(x, y)| (y - (b1 * x + b0)).abs())
                    .sum::<f64>()
                    / n as f64;
                if c < best {
                    best = c;
                }
            }
        }
        best
    }

    #[test]
    fn ai2_matches_brute_force() {
        let est = random_map(40, 1);
        let mut gt = random_map(40, 2);
        for i in 0..40 {
            gt.values.data[i] = 1.7 * est.values.data[i] - 0.4 + gt.values.data[i] * 0.3;
        }
        let (ai2, _, _, deg) = ai_metric(&est, &gt, 2).unwrap();
        assert!(!deg);
        let oracle = brute_force_ai(&est.values.data, &gt.values.data, 2);
        assert!((ai2 - oracle).abs() < 1e-6, "{ai2} vs {oracle}");
    }

    #[test]
    fn ai1_matches_pair_enumeration_oracle() {
        for seed in 0..5 {
            let est = random_map(25, 10 + seed);
            let mut gt = random_map(25, 20 + seed);
            for i in 0..25 {
                gt.values.data[i] = -0.8 * est.values.data[i] + 2.0 + gt.values.data[i] * 0.5;
            }
            let (ai1, _, _, _) = ai_metric(&est, &gt, 1).unwrap();
            let oracle = lad_pair_enumeration(&est.values.data, &gt.values.data);
            assert!(
                (ai1 - oracle).abs() <= 1e-4 * oracle.max(1.0),
                "seed {seed}: {ai1} vs {oracle}"
            );
        }
    }

    #[test]
    fn ai_is_affine_invariant() {
        let est = random_map(60, 3);
        let gt = random_map(60, 4);
        let (a2, _, _, _) = ai_metric(&est, &gt, 2).unwrap();
        let (a1, _, _, _) = ai_metric(&est, &gt, 1).unwrap();
        let mut warped = est.clone();
        for v in &mut warped.values.data {
            *v = 3.25 * *v - 17.0;
        }
        let (b2, _, _, _) = ai_metric(&warped, &gt, 2).unwrap();
        let (b1, _, _, _) = ai_metric(&warped, &gt, 1).unwrap();
        assert!((a2 - b2).abs() < 1e-9, "{a2} vs {b2}");
        assert!((a1 - b1).abs() < 1e-6, "{a1} vs {b1}");
    }

    #[test]
    fn perfect_affine_estimate_scores_zero() {
        let gt = random_map(30, 5);
        let mut est = gt.clone();
        for v in &mut est.values.data {
            *v = 0.5 * *v + 3.0;
        }
        let (a2, b1, b0, _) = ai_metric(&est, &gt, 2).unwrap();
        let (a1, _, _, _) = ai_metric(&est, &gt, 1).unwrap();
        assert!(a2 < 1e-18);
        assert!(a1 < 1e-9);
        // recovered map inverts est = 0.5*gt + 3 => gt = 2*est - 6
        assert!((b1 - 2.0).abs() < 1e-9);
        assert!((b0 + 6.0).abs() < 1e-9);
        assert!(spearman_measure(&est, &gt).unwrap() < 1e-12);
    }

    #[test]
    fn constant_estimate_is_degenerate() {
        let est = map_from(vec![2.0; 10]);
        let gt = random_map(10, 6);
        let (_, b1, _, deg) = ai_metric(&est, &gt, 2).unwrap();
        assert!(deg);
        assert_eq!(b1, 0.0);
        let (_, _, _, deg1) = ai_metric(&est, &gt, 1).unwrap();
        assert!(deg1);
        // rank correlation with a constant is defined as zero
        assert_eq!(spearman_measure(&est, &gt).unwrap(), 1.0);
    }

    #[test]
    fn spearman_hand_computed_with_ties() {
        // x: 1,2,2,4 -> ranks 1, 2.5, 2.5, 4
        // y: 10,20,30,30 -> ranks 1, 2, 3.5, 3.5
        let est = map_from(vec![1.0, 2.0, 2.0, 4.0]);
        let gt = map_from(vec![10.0, 20.0, 30.0, 30.0]);
        let rx = [1.0, 2.5, 2.5, 4.0];
        let ry = [1.0, 2.0, 3.5, 3.5];
        let rho = pearson(&rx, &ry);
        let got = spearman_measure(&est, &gt).unwrap();
        assert!((got - (1.0 - rho.abs())).abs() < 1e-12);
        // monotone but nonlinear relation keeps perfect rank score
        let est2 = map_from(vec![1.0, 2.0, 3.0, 4.0]);
        let gt2 = map_from(vec![1.0, 8.0, 27.0, 64.0]);
        assert!(spearman_measure(&est2, &gt2).unwrap() < 1e-12);
        // anti-monotone: |rho| = 1 as well
        let gt3 = map_from(vec![4.0, 3.0, 2.0, 1.0]);
        assert!(spearman_measure(&est2, &gt3).unwrap() < 1e-12);
    }

    #[test]
    fn average_ranks_handles_runs() {
        assert_eq!(
            average_ranks(&[3.0, 1.0, 3.0, 3.0, 0.5]),
            vec![4.0, 2.0, 4.0, 4.0, 1.0]
        );
    }

    #[test]
    fn uncertainty_loss_matches_naive_sum() {
        let est = random_map(50, 7);
        let gt = random_map(50, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sigma = map_from((0..50).map(|_| rng.gen_range(0.8..3.0)).collect());
        let got = uncertainty_loss(&est, &gt, &sigma).unwrap();
        let mut acc = 0.0;
        for i in 0..50 {
            let s = 2.0 * sigma.values.data[i].ln();
            let r = est.values.data[i] - gt.values.data[i];
            acc += ((-s).exp() * r * r + 2.0 * s).sqrt();
        }
        assert!((got - acc / 50.0).abs() < 1e-12);
    }

    #[test]
    fn uncertainty_loss_penalizes_overconfidence() {
        // large residual with tiny sigma must cost more than honest sigma
        let est = map_from(vec![5.0, 5.0]);
        let gt = map_from(vec![0.0, 0.0]);
        let honest = map_from(vec![5.0, 5.0]);
        let overconfident = map_from(vec![1.2, 1.2]);
        let a = uncertainty_loss(&est, &gt, &honest).unwrap();
        let b = uncertainty_loss(&est, &gt, &overconfident).unwrap();
        assert!(b > a);
    }

    #[test]
    fn uncertainty_loss_rejects_nonpositive_sigma() {
        let est = map_from(vec![1.0, 2.0]);
        let gt = map_from(vec![1.0, 2.0]);
        let sigma = map_from(vec![1.0, 0.0]);
        assert!(uncertainty_loss(&est, &gt, &sigma).is_err());
    }

    #[test]
    fn mismatched_sizes_rejected() {
        let a = map_from(vec![1.0, 2.0, 3.0]);
        let b = map_from(vec![1.0, 2.0]);
        assert!(ai_metric(&a, &b, 2).is_err());
        assert!(spearman_measure(&a, &b).is_err());
    }

    #[test]
    fn evaluate_reports_shared_pixel_count() {
        let mut est = random_map(20, 11);
        let gt = random_map(20, 12);
        est.valid.data[3] = false;
        est.values.data[3] = f64::NAN;
        let r = evaluate(&est, &gt).unwrap();
        assert_eq!(r.n_pixels, 19);
        assert!(!r.degenerate);
    }
}
