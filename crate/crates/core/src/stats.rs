//! Level statistics for real and complex spectra.
//!
//! Complex spectra: nearest-neighbour spacings, Gaussian-kernel unfolding,
//! the complex spacing ratio `z = (l_NN - l) / (l_NNN - l)`. Real spectra:
//! polynomial unfolding of the staircase and the adjacent-gap ratio.

use std::sync::OnceLock;

use faer::linalg::solvers::SolveLstsq;
use faer::Mat;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HIST_BINS: usize = 50;
pub const HIST_MAX: f64 = 4.0;
/// Points closer than this times the spectral radius are merged.
pub const DEDUP_REL: f64 = 1e-12;
/// Gaussian bandwidth in units of the mean raw spacing.
pub const UNFOLD_BANDWIDTH: f64 = 4.5;
pub const DEFAULT_POLY_DEGREE: usize = 6;
pub const DEFAULT_GINUE_TERMS: usize = 100;
/// Multiplier on the median `|Im|` nearest-neighbour displacement that sets
/// the default bulk-filter half-width.
pub const BULK_EPS_FACTOR: f64 = 10.0;

/// Reference indicator values.
pub mod reference {
    pub const GINIBRE_MEAN_R: f64 = 0.74;
    pub const GINIBRE_NEG_COS: f64 = 0.24;
    pub const POISSON_2D_MEAN_R: f64 = 0.66;
    pub const POISSON_2D_NEG_COS: f64 = 0.0;
    pub const POISSON_1D_MEAN_R: f64 = 0.386;
    /// Gaussian orthogonal ensemble (time-reversal invariant).
    pub const WIGNER_DYSON_MEAN_R: f64 = 0.53;
    /// Gaussian unitary ensemble.
    pub const GUE_MEAN_R: f64 = 0.60;
}

/// Removes near-duplicate points, keeping the first of each group. Returns
/// the kept points and how many were merged away.
pub fn dedup_eigenvalues(eigs: &[C64]) -> (Vec<C64>, usize) {
    let radius = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tol = DEDUP_REL * radius;
    let mut order: Vec<usize> = (0..eigs.len()).collect();
    order.sort_by(|&a, &b| eigs[a].re.total_cmp(&eigs[b].re));
    let mut dropped = vec![false; eigs.len()];
    for (k, &a) in order.iter().enumerate() {
        if dropped[a] {
            continue;
        }
        for &b in &order[k + 1..] {
            if eigs[b].re - eigs[a].re > tol {
                break;
            }
            if !dropped[b] && (eigs[a] - eigs[b]).norm() <= tol {
                dropped[b] = true;
            }
        }
    }
    let kept: Vec<C64> = eigs
        .iter()
        .zip(&dropped)
        .filter(|(_, &d)| !d)
        .map(|(z, _)| *z)
        .collect();
    let merged = eigs.len() - kept.len();
    (kept, merged)
}

/// Uniform bucket grid over the bounding box of a point set.
struct Grid {
    x0: f64,
    y0: f64,
    cw: f64,
    ch: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<usize>>,
}

impl Grid {
    fn new(points: &[C64]) -> Self {
        let n = points.len();
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for z in points {
            x0 = x0.min(z.re);
            x1 = x1.max(z.re);
            y0 = y0.min(z.im);
            y1 = y1.max(z.im);
        }
        let (w, h) = (x1 - x0, y1 - y0);
        let scale = w.max(h).max(f64::MIN_POSITIVE);
        let flat = 1e-9 * scale;
        let (nx, ny) = if w <= flat && h <= flat {
            (1, 1)
        } else if h <= flat {
            (n.max(1), 1)
        } else if w <= flat {
            (1, n.max(1))
        } else {
            let cell = (w * h / n as f64).sqrt();
            let nx = ((w / cell).ceil() as usize).clamp(1, n);
            let ny = ((h / cell).ceil() as usize).clamp(1, n);
            (nx, ny)
        };
        let cw = if w > 0.0 { w / nx as f64 } else { 1.0 };
        let ch = if h > 0.0 { h / ny as f64 } else { 1.0 };
        let mut grid = Self {
            x0,
            y0,
            cw,
            ch,
            nx,
            ny,
            cells: vec![Vec::new(); nx * ny],
        };
        for (i, z) in points.iter().enumerate() {
            let (cx, cy) = grid.cell_of(*z);
            grid.cells[cy * nx + cx].push(i);
        }
        grid
    }

    fn cell_of(&self, z: C64) -> (usize, usize) {
        let cx = (((z.re - self.x0) / self.cw) as usize).min(self.nx - 1);
        let cy = (((z.im - self.y0) / self.ch) as usize).min(self.ny - 1);
        (cx, cy)
    }
}

/// Indices of the nearest and next-nearest neighbour of every point.
/// Requires at least three points.
pub fn nearest_neighbors(points: &[C64]) -> Result<Vec<(usize, usize)>> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: points.len(),
        });
    }
    let grid = Grid::new(points);
    let step = match (grid.nx > 1, grid.ny > 1) {
        (true, true) => grid.cw.min(grid.ch),
        (true, false) => grid.cw,
        (false, true) => grid.ch,
        (false, false) => f64::INFINITY,
    };
    let out = points
        .par_iter()
        .enumerate()
        .map(|(i, &z)| {
            let (cx, cy) = grid.cell_of(z);
            let mut best = [(f64::INFINITY, usize::MAX); 2];
            let max_ring = grid.nx.max(grid.ny);
            for r in 0..=max_ring {
                let (lo_x, hi_x) = (cx.saturating_sub(r), (cx + r).min(grid.nx - 1));
                let (lo_y, hi_y) = (cy.saturating_sub(r), (cy + r).min(grid.ny - 1));
                for gy in lo_y..=hi_y {
                    for gx in lo_x..=hi_x {
                        let on_ring = gx.abs_diff(cx) == r || gy.abs_diff(cy) == r;
                        if !on_ring {
                            continue;
                        }
                        for &j in &grid.cells[gy * grid.nx + gx] {
                            if j == i {
                                continue;
                            }
                            let d = (points[j] - z).norm();
                            if d < best[0].0 {
                                best[1] = best[0];
                                best[0] = (d, j);
                            } else if d < best[1].0 {
                                best[1] = (d, j);
                            }
                        }
                    }
                }
                // Anything outside ring r is at least r * step away.
                if best[1].1 != usize::MAX && best[1].0 <= r as f64 * step {
                    break;
                }
            }
            (best[0].1, best[1].1)
        })
        .collect();
    Ok(out)
}

/// Exhaustive O(N^2) neighbour search, kept as a reference implementation.
pub fn nearest_neighbors_brute(points: &[C64]) -> Result<Vec<(usize, usize)>> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: points.len(),
        });
    }
    Ok(points
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let mut best = [(f64::INFINITY, usize::MAX); 2];
            for (j, &w) in points.iter().enumerate() {
                if j == i {
                    continue;
                }
                let d = (w - z).norm();
                if d < best[0].0 {
                    best[1] = best[0];
                    best[0] = (d, j);
                } else if d < best[1].0 {
                    best[1] = (d, j);
                }
            }
            (best[0].1, best[1].1)
        })
        .collect())
}

/// Spacings and ratios of one spectrum.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SpacingSample {
    pub raw_spacings: Vec<f64>,
    pub unfolded_spacings: Vec<f64>,
    /// Complex ratios `z_j`; for real spectra the imaginary part is zero.
    pub ratios: Vec<C64>,
    /// Size of the input before merging duplicates.
    pub source_size: usize,
    pub merged: usize,
}

impl SpacingSample {
    pub fn mean_r(&self) -> f64 {
        mean(self.ratios.iter().map(|z| z.norm()))
    }

    /// `-<cos theta>`.
    pub fn neg_mean_cos_theta(&self) -> f64 {
        -mean(self.ratios.iter().map(|z| z.re / z.norm().max(f64::MIN_POSITIVE)))
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Nearest-neighbour distances `s_j = |l_j - l_j^NN|` after merging duplicates.
pub fn complex_nn_spacings(eigs: &[C64]) -> Result<SpacingSample> {
    let (pts, merged) = dedup_eigenvalues(eigs);
    let nn = nearest_neighbors(&pts)?;
    let raw = nn
        .iter()
        .enumerate()
        .map(|(i, &(a, _))| (pts[a] - pts[i]).norm())
        .collect();
    Ok(SpacingSample {
        raw_spacings: raw,
        source_size: eigs.len(),
        merged,
        ..Default::default()
    })
}

/// Gaussian-kernel density `(1/(2 pi sigma^2 N)) sum_k exp(-|l - l_k|^2 / (2 sigma^2))`
/// evaluated at every point of the set.
fn kernel_density(pts: &[C64], sigma: f64) -> Vec<f64> {
    let n = pts.len() as f64;
    let inv2s2 = 1.0 / (2.0 * sigma * sigma);
    let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma * n);
    pts.par_iter()
        .map(|&z| {
            let s: f64 = pts
                .iter()
                .map(|&w| {
                    let e = (z - w).norm_sqr() * inv2s2;
                    if e > 700.0 {
                        0.0
                    } else {
                        (-e).exp()
                    }
                })
                .sum();
            s * norm
        })
        .collect()
}

/// Spacings, unfolded spacings (unit mean) and complex ratios.
pub fn unfold_complex(eigs: &[C64]) -> Result<SpacingSample> {
    let (pts, merged) = dedup_eigenvalues(eigs);
    if pts.len() < 100 {
        log::debug!("unfolding only {} eigenvalues; statistics will be noisy", pts.len());
    }
    let nn = nearest_neighbors(&pts)?;
    let raw: Vec<f64> = nn
        .iter()
        .enumerate()
        .map(|(i, &(a, _))| (pts[a] - pts[i]).norm())
        .collect();
    let mean_s = mean(raw.iter().copied());
    let rho = kernel_density(&pts, UNFOLD_BANDWIDTH * mean_s);
    let mut unfolded: Vec<f64> = raw.iter().zip(&rho).map(|(s, r)| s * r.sqrt()).collect();
    let sbar = mean(unfolded.iter().copied());
    if !(sbar > 0.0) {
        return Err(Error::InvalidInput("unfolded spacings vanish".into()));
    }
    for s in &mut unfolded {
        *s /= sbar;
    }
    let ratios = ratios_from_neighbors(&pts, &nn);
    Ok(SpacingSample {
        raw_spacings: raw,
        unfolded_spacings: unfolded,
        ratios,
        source_size: eigs.len(),
        merged,
    })
}

fn ratios_from_neighbors(pts: &[C64], nn: &[(usize, usize)]) -> Vec<C64> {
    nn.iter()
        .enumerate()
        .map(|(i, &(a, b))| (pts[a] - pts[i]) / (pts[b] - pts[i]))
        .collect()
}

/// Complex spacing ratios without unfolding.
pub fn complex_spacing_ratios(eigs: &[C64]) -> Result<SpacingSample> {
    let (pts, merged) = dedup_eigenvalues(eigs);
    let nn = nearest_neighbors(&pts)?;
    Ok(SpacingSample {
        ratios: ratios_from_neighbors(&pts, &nn),
        source_size: eigs.len(),
        merged,
        ..Default::default()
    })
}

/// Drops eigenvalues with `|Im l| < epsilon_im`. Returns the kept values and
/// the number removed.
pub fn bulk_filter(eigs: &[C64], epsilon_im: f64) -> (Vec<C64>, usize) {
    let kept: Vec<C64> = eigs
        .iter()
        .copied()
        .filter(|z| z.im.abs() >= epsilon_im)
        .collect();
    let removed = eigs.len() - kept.len();
    (kept, removed)
}

/// `BULK_EPS_FACTOR` times the median `|Im(l_NN - l)|`.
pub fn default_bulk_eps(eigs: &[C64]) -> Result<f64> {
    let (pts, _) = dedup_eigenvalues(eigs);
    let nn = nearest_neighbors(&pts)?;
    let mut d: Vec<f64> = nn
        .iter()
        .enumerate()
        .map(|(i, &(a, _))| (pts[a] - pts[i]).im.abs())
        .collect();
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let median = if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    };
    Ok(BULK_EPS_FACTOR * median)
}

/// Chebyshev polynomial fit of the staircase `eta(E_j) = j`.
#[derive(Clone, Debug)]
pub struct StaircaseFit {
    center: f64,
    half_width: f64,
    coeffs: Vec<f64>,
}

impl StaircaseFit {
    fn basis(&self, e: f64) -> (Vec<f64>, Vec<f64>) {
        let x = (e - self.center) / self.half_width;
        let k = self.coeffs.len();
        let mut t = vec![0.0; k];
        let mut dt = vec![0.0; k];
        t[0] = 1.0;
        if k > 1 {
            t[1] = x;
            dt[1] = 1.0;
        }
        for n in 2..k {
            t[n] = 2.0 * x * t[n - 1] - t[n - 2];
            dt[n] = 2.0 * t[n - 1] + 2.0 * x * dt[n - 1] - dt[n - 2];
        }
        (t, dt)
    }

    pub fn eval(&self, e: f64) -> f64 {
        let (t, _) = self.basis(e);
        t.iter().zip(&self.coeffs).map(|(a, b)| a * b).sum()
    }

    pub fn derivative(&self, e: f64) -> f64 {
        let (_, dt) = self.basis(e);
        dt.iter().zip(&self.coeffs).map(|(a, b)| a * b).sum::<f64>() / self.half_width
    }
}

/// Least-squares polynomial fit of the cumulative level count.
pub fn fit_staircase(sorted: &[f64], degree: usize) -> Result<StaircaseFit> {
    let n = sorted.len();
    if n < degree + 2 {
        return Err(Error::TooFewPoints {
            needed: degree + 2,
            got: n,
        });
    }
    if sorted.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("energies must be sorted ascending".into()));
    }
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    let center = 0.5 * (lo + hi);
    let half_width = (0.5 * (hi - lo)).max(f64::MIN_POSITIVE);
    let mut fit = StaircaseFit {
        center,
        half_width,
        coeffs: vec![0.0; degree + 1],
    };
    let a = Mat::<f64>::from_fn(n, degree + 1, |i, k| fit.basis(sorted[i]).0[k]);
    let b = Mat::<f64>::from_fn(n, 1, |i, _| (i + 1) as f64);
    let x = a.qr().solve_lstsq(&b);
    fit.coeffs = (0..=degree).map(|k| x[(k, 0)]).collect();
    Ok(fit)
}

/// Unfolded levels `xi_j = eta_fit(E_j)`. Fails if the fit decreases anywhere
/// on the data range.
pub fn unfold_real(sorted: &[f64], degree: usize) -> Result<Vec<f64>> {
    let fit = fit_staircase(sorted, degree)?;
    let xi: Vec<f64> = sorted.iter().map(|&e| fit.eval(e)).collect();
    let n = sorted.len();
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    let probes = 4 * n.max(256);
    let dense_ok = (0..=probes)
        .map(|k| lo + (hi - lo) * k as f64 / probes as f64)
        .all(|e| fit.derivative(e) >= 0.0);
    if !dense_ok || xi.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::NonMonotoneFit(degree));
    }
    Ok(xi)
}

/// `r_j = min(s_j, s_{j-1}) / max(s_j, s_{j-1})` over adjacent gaps of a sorted
/// sequence. Degenerate gap pairs (both zero) are skipped.
pub fn real_spacing_ratios(sorted: &[f64]) -> Vec<f64> {
    sorted
        .windows(3)
        .filter_map(|w| {
            let (a, b) = (w[1] - w[0], w[2] - w[1]);
            let hi = a.max(b);
            (hi > 0.0).then(|| a.min(b) / hi)
        })
        .collect()
}

pub fn mean_real_ratio(sorted: &[f64]) -> Result<f64> {
    let r = real_spacing_ratios(sorted);
    if r.is_empty() {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: sorted.len(),
        });
    }
    Ok(mean(r.into_iter()))
}

fn check_s(s: f64) -> Result<()> {
    if !(s >= 0.0) {
        return Err(Error::InvalidParameter(format!("spacing must be >= 0, got {s}")));
    }
    Ok(())
}

/// `(pi/2) s exp(-pi s^2 / 4)`: uncorrelated points in the plane.
pub fn reference_p2d(s: f64) -> Result<f64> {
    check_s(s)?;
    let pi = std::f64::consts::PI;
    Ok(0.5 * pi * s * (-0.25 * pi * s * s).exp())
}

/// `exp(-s)`.
pub fn reference_poisson_1d(s: f64) -> Result<f64> {
    check_s(s)?;
    Ok((-s).exp())
}

/// Ginibre spacing law as the truncated product/sum
/// `prod_{k<=K} Gamma(1+k, s^2)/k! * sum_{j<=K} 2 s^{2j+1} e^{-s^2} / Gamma(1+j, s^2)`.
/// Its mean is about 1.143; see [`reference_ginue`] for the unit-mean form.
pub fn reference_ginue_raw(s: f64, terms: usize) -> Result<f64> {
    check_s(s)?;
    if terms < 1 {
        return Err(Error::InvalidParameter("truncation must be >= 1".into()));
    }
    let x = s * s;
    // Poisson weights x^k e^{-x} / k! and their partial sums, which equal
    // the regularized upper incomplete gamma Gamma(1+k, x) / k!.
    let mut pmf = (-x).exp();
    let mut cdf = pmf;
    let mut log_prod = 0.0;
    let mut sum = 0.0;
    for k in 1..=terms {
        pmf *= x / k as f64;
        cdf += pmf;
        log_prod += cdf.ln();
        sum += 2.0 * s * pmf / cdf;
    }
    Ok(log_prod.exp() * sum)
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Mean of the raw truncated Ginibre law, by quadrature.
pub fn ginue_raw_mean(terms: usize) -> f64 {
    let f = |s: f64| s * reference_ginue_raw(s, terms).unwrap_or(0.0);
    simpson(f, 0.0, 8.0, 8000)
}

fn default_ginue_mean() -> f64 {
    static MEAN: OnceLock<f64> = OnceLock::new();
    *MEAN.get_or_init(|| ginue_raw_mean(DEFAULT_GINUE_TERMS))
}

/// Ginibre spacing law rescaled to unit mean, matching unfolded spacings.
pub fn reference_ginue(s: f64) -> Result<f64> {
    let m = default_ginue_mean();
    Ok(m * reference_ginue_raw(m * s, DEFAULT_GINUE_TERMS)?)
}

/// Normalized histogram on uniform bins over `[0, max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub max: f64,
    pub density: Vec<f64>,
    /// Samples outside `[0, max]`, excluded from the normalization.
    pub outside: usize,
}

impl Histogram {
    pub fn new(samples: &[f64], bins: usize, max: f64) -> Self {
        let mut counts = vec![0usize; bins];
        let mut outside = 0;
        for &s in samples {
            if s >= 0.0 && s < max {
                counts[((s / max * bins as f64) as usize).min(bins - 1)] += 1;
            } else if s == max {
                counts[bins - 1] += 1;
            } else {
                outside += 1;
            }
        }
        let inside = samples.len() - outside;
        let width = max / bins as f64;
        let density = counts
            .iter()
            .map(|&c| {
                if inside == 0 {
                    0.0
                } else {
                    c as f64 / (inside as f64 * width)
                }
            })
            .collect();
        Self {
            max,
            density,
            outside,
        }
    }

    pub fn standard(samples: &[f64]) -> Self {
        Self::new(samples, HIST_BINS, HIST_MAX)
    }

    pub fn bins(&self) -> usize {
        self.density.len()
    }

    pub fn width(&self) -> f64 {
        self.max / self.bins() as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let w = self.width();
        (0..self.bins()).map(|k| (k as f64 + 0.5) * w).collect()
    }

    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.width()
    }
}

/// Reference density averaged over each bin of `hist`.
pub fn bin_average(hist: &Histogram, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let w = hist.width();
    (0..hist.bins())
        .map(|k| simpson(&f, k as f64 * w, (k + 1) as f64 * w, 32) / w)
        .collect()
}

/// L1 distance `sum_b |p_b - q_b| * width` between two binned densities.
pub fn distribution_distance(p: &[f64], q: &[f64], width: f64) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    Ok(p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() * width)
}

/// Summary indicators of a spectrum.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StatsSummary {
    pub mean_r: f64,
    /// `-<cos theta>`, complex spectra only.
    pub neg_mean_cos_theta: Option<f64>,
    pub histogram: Histogram,
    pub n_points: usize,
    pub merged: usize,
    pub l1_to_poisson_2d: Option<f64>,
    pub l1_to_ginibre: Option<f64>,
}

impl StatsSummary {
    pub fn from_complex(sample: &SpacingSample) -> Result<Self> {
        let histogram = Histogram::standard(&sample.unfolded_spacings);
        let p2d = bin_average(&histogram, |s| reference_p2d(s).unwrap_or(0.0));
        let gin = bin_average(&histogram, |s| reference_ginue(s).unwrap_or(0.0));
        let w = histogram.width();
        Ok(Self {
            mean_r: sample.mean_r(),
            neg_mean_cos_theta: Some(sample.neg_mean_cos_theta()),
            l1_to_poisson_2d: Some(distribution_distance(&histogram.density, &p2d, w)?),
            l1_to_ginibre: Some(distribution_distance(&histogram.density, &gin, w)?),
            histogram,
            n_points: sample.source_size - sample.merged,
            merged: sample.merged,
        })
    }
}

/// Unfolding, ratios and histogram of a complex spectrum in one call.
pub fn complex_statistics(eigs: &[C64]) -> Result<StatsSummary> {
    StatsSummary::from_complex(&unfold_complex(eigs)?)
}

/// Ratio statistic and unfolded-gap histogram of a real spectrum.
pub fn real_statistics(sorted: &[f64], degree: usize) -> Result<StatsSummary> {
    let xi = unfold_real(sorted, degree)?;
    let gaps: Vec<f64> = xi.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(StatsSummary {
        mean_r: mean_real_ratio(sorted)?,
        neg_mean_cos_theta: None,
        histogram: Histogram::standard(&gaps),
        n_points: sorted.len(),
        merged: 0,
        l1_to_poisson_2d: None,
        l1_to_ginibre: None,
    })
}
