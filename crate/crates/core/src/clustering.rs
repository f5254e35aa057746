//! K-means over RGB pixel values.
//!
//! Fitting runs Lloyd's algorithm from a k-means++ initialisation. Pixels are
//! first collapsed to distinct colors with multiplicities, which leaves the
//! objective unchanged and makes palette-like images cheap to cluster. The
//! distinct colors are kept in sorted order so a fit depends only on the
//! pixel multiset, the seed and the stopping parameters.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::dataset::{Image, LabelMap, Palette};
use crate::error::{Error, Result};
use crate::rng::{self, SeededRng};

pub const DEFAULT_MAX_ITERS: usize = 100;
/// Largest centroid move (RGB units) that still counts as converged.
pub const DEFAULT_TOL: f64 = 0.5;

pub type Rgb = [f64; 3];

/// Result of a K-means fit.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterModel {
    /// Number of centroids actually fitted.
    pub k: usize,
    /// The `k` that was asked for; larger than `k` when the data had fewer
    /// distinct colors.
    pub requested_k: usize,
    pub centroids: Vec<Rgb>,
    /// Sum over pixels of squared distance to the assigned centroid.
    pub inertia: f64,
    pub iterations_run: usize,
    pub seed: u64,
    /// Inertia of each assignment step, ending with the final one.
    pub inertia_history: Vec<f64>,
}

struct Points {
    colors: Vec<Rgb>,
    weights: Vec<f64>,
}

impl Points {
    fn from_pixels(pixels: &[[u8; 3]]) -> Self {
        let mut counts: BTreeMap<[u8; 3], u64> = BTreeMap::new();
        for &p in pixels {
            *counts.entry(p).or_default() += 1;
        }
        let (colors, weights) = counts
            .into_iter()
            .map(|(c, n)| ([c[0] as f64, c[1] as f64, c[2] as f64], n as f64))
            .unzip();
        Points { colors, weights }
    }

    fn len(&self) -> usize {
        self.colors.len()
    }
}

pub fn dist2(a: &Rgb, b: &Rgb) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// Index of the nearest centroid, lowest index on ties, and its squared distance.
pub fn nearest(point: &Rgb, centroids: &[Rgb]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = dist2(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn sample_weighted(rng: &mut SeededRng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if target < acc && w > 0.0 {
            return i;
        }
    }
    // Rounding pushed `target` past the last bucket.
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

fn kmeans_pp(points: &Points, k: usize, rng: &mut SeededRng) -> Vec<Rgb> {
    let first = sample_weighted(rng, &points.weights);
    let mut centroids = vec![points.colors[first]];
    let mut d2: Vec<f64> = points
        .colors
        .iter()
        .map(|p| dist2(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let scores: Vec<f64> = d2.iter().zip(&points.weights).map(|(d, w)| d * w).collect();
        let next = points.colors[sample_weighted(rng, &scores)];
        for (d, p) in d2.iter_mut().zip(&points.colors) {
            *d = d.min(dist2(p, &next));
        }
        centroids.push(next);
    }
    centroids
}

fn assign(points: &Points, centroids: &[Rgb]) -> (Vec<usize>, Vec<f64>, f64) {
    let mut labels = Vec::with_capacity(points.len());
    let mut dists = Vec::with_capacity(points.len());
    let mut inertia = 0.0;
    for (p, w) in points.colors.iter().zip(&points.weights) {
        let (i, d) = nearest(p, centroids);
        labels.push(i);
        dists.push(d);
        inertia += w * d;
    }
    (labels, dists, inertia)
}

fn lloyd(
    points: &Points,
    mut centroids: Vec<Rgb>,
    max_iters: usize,
    tol: f64,
) -> (Vec<Rgb>, f64, usize, Vec<f64>) {
    let k = centroids.len();
    let mut history = Vec::new();
    let mut iterations = 0;
    let (mut labels, mut dists, mut inertia) = assign(points, &centroids);
    history.push(inertia);
    while iterations < max_iters {
        let mut sums = vec![[0.0f64; 3]; k];
        let mut mass = vec![0.0f64; k];
        for ((p, &w), &l) in points.colors.iter().zip(&points.weights).zip(&labels) {
            for ch in 0..3 {
                sums[l][ch] += w * p[ch];
            }
            mass[l] += w;
        }
        let mut updated: Vec<Rgb> = sums
            .iter()
            .zip(&mass)
            .zip(&centroids)
            .map(|((s, &m), old)| if m > 0.0 { [s[0] / m, s[1] / m, s[2] / m] } else { *old })
            .collect();
        // Empty clusters take the point that is farthest from its centroid.
        let mut taken = vec![false; points.len()];
        for c in 0..k {
            if mass[c] > 0.0 {
                continue;
            }
            let far = (0..points.len())
                .filter(|&i| !taken[i])
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if dists[b] >= dists[i] => Some(b),
                    _ => Some(i),
                });
            if let Some(i) = far {
                taken[i] = true;
                updated[c] = points.colors[i];
            }
        }
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| dist2(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = updated;
        iterations += 1;
        let prev = inertia;
        (labels, dists, inertia) = assign(points, &centroids);
        debug_assert!(
            inertia <= prev * (1.0 + 1e-12) + 1e-9,
            "inertia rose from {prev} to {inertia}"
        );
        history.push(inertia);
        if shift < tol {
            break;
        }
    }
    (centroids, inertia, iterations, history)
}

fn check_fit_args(pixels: &[[u8; 3]], k: usize) -> Result<()> {
    if pixels.is_empty() {
        return Err(Error::Data("no pixels to cluster".into()));
    }
    if k == 0 {
        return Err(Error::Parameter("k must be at least 1".into()));
    }
    if k > 256 {
        return Err(Error::Parameter(format!("k = {k} exceeds the 256 labels a label map can hold")));
    }
    Ok(())
}

/// Lloyd's algorithm from a seeded k-means++ start.
///
/// Stops once no centroid moves by `tol` or more, or after `max_iters`
/// updates. If the data has fewer than `k` distinct colors, `k` is reduced to
/// that count and `requested_k` keeps the original value.
pub fn kmeans_fit(
    pixels: &[[u8; 3]],
    k: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<ClusterModel> {
    check_fit_args(pixels, k)?;
    let points = Points::from_pixels(pixels);
    let fitted_k = k.min(points.len());
    let mut rng = rng::seeded(seed);
    let init = kmeans_pp(&points, fitted_k, &mut rng);
    let (centroids, inertia, iterations_run, inertia_history) = lloyd(&points, init, max_iters, tol);
    Ok(ClusterModel {
        k: fitted_k,
        requested_k: k,
        centroids,
        inertia,
        iterations_run,
        seed,
        inertia_history,
    })
}

/// Lloyd's algorithm from caller-supplied initial centroids.
pub fn kmeans_refine(
    pixels: &[[u8; 3]],
    init: Vec<Rgb>,
    max_iters: usize,
    tol: f64,
) -> Result<ClusterModel> {
    check_fit_args(pixels, init.len())?;
    let points = Points::from_pixels(pixels);
    let k = init.len();
    let (centroids, inertia, iterations_run, inertia_history) = lloyd(&points, init, max_iters, tol);
    Ok(ClusterModel {
        k,
        requested_k: k,
        centroids,
        inertia,
        iterations_run,
        seed: 0,
        inertia_history,
    })
}

/// The pixel farthest from its nearest centroid (first such pixel on ties).
pub fn farthest_point(pixels: &[[u8; 3]], centroids: &[Rgb]) -> Option<Rgb> {
    let mut best: Option<(Rgb, f64)> = None;
    for p in pixels {
        let p = [p[0] as f64, p[1] as f64, p[2] as f64];
        let (_, d) = nearest(&p, centroids);
        if best.is_none_or(|(_, bd)| d > bd) {
            best = Some((p, d));
        }
    }
    best.map(|(p, _)| p)
}

/// Labels each pixel with its nearest centroid.
pub fn kmeans_assign(image: &Image, model: &ClusterModel) -> LabelMap {
    let labels = image
        .rgb_iter()
        .map(|px| {
            let p = [px[0] as f64, px[1] as f64, px[2] as f64];
            nearest(&p, &model.centroids).0 as u8
        })
        .collect();
    LabelMap::new(image.width(), image.height(), labels).expect("dimensions from a valid image")
}

/// Where recoloring takes its per-label colors from.
#[derive(Clone, Copy, Debug)]
pub enum ColorSource<'a> {
    Centroids(&'a ClusterModel),
    Palette(&'a Palette),
}

impl ColorSource<'_> {
    pub fn colors(&self) -> Vec<[u8; 3]> {
        match self {
            ColorSource::Centroids(m) => m.centroid_colors(),
            ColorSource::Palette(p) => p.colors(),
        }
    }
}

/// Paints each pixel with `colors[label]`.
pub fn recolor(labels: &LabelMap, colors: &[[u8; 3]]) -> Result<Image> {
    labels.check_classes(colors.len())?;
    let pixels = labels
        .labels()
        .iter()
        .flat_map(|&l| colors[l as usize])
        .collect();
    Image::new(labels.width(), labels.height(), pixels)
}

fn round_channel(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

impl ClusterModel {
    /// Centroids rounded half-up to 8-bit RGB.
    pub fn centroid_colors(&self) -> Vec<[u8; 3]> {
        self.centroids
            .iter()
            .map(|c| [round_channel(c[0]), round_channel(c[1]), round_channel(c[2])])
            .collect()
    }

    /// `k seed iterations inertia` then one `r g b` line per centroid.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} {} {} {:.6}\n",
            self.k, self.seed, self.iterations_run, self.inertia
        );
        for c in &self.centroids {
            let _ = writeln!(out, "{:.6} {:.6} {:.6}", c[0], c[1], c[2]);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Data(format!("cluster model: {msg}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head: Vec<&str> = lines
            .next()
            .ok_or_else(|| bad("empty file".into()))?
            .split_whitespace()
            .collect();
        let [k, seed, iters, inertia] = head[..] else {
            return Err(bad(format!("header needs 4 fields, got {}", head.len())));
        };
        let k: usize = k.parse().map_err(|_| bad(format!("bad k {k:?}")))?;
        let seed: u64 = seed.parse().map_err(|_| bad(format!("bad seed {seed:?}")))?;
        let iterations_run: usize = iters.parse().map_err(|_| bad(format!("bad iterations {iters:?}")))?;
        let inertia: f64 = inertia.parse().map_err(|_| bad(format!("bad inertia {inertia:?}")))?;
        let mut centroids = Vec::with_capacity(k);
        for (i, line) in lines.enumerate() {
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(format!("centroid {i}: {line:?}")))?;
            let [r, g, b] = vals[..] else {
                return Err(bad(format!("centroid {i} needs 3 values")));
            };
            centroids.push([r, g, b]);
        }
        if centroids.len() != k || k == 0 {
            return Err(bad(format!("header says k = {k}, found {} centroids", centroids.len())));
        }
        Ok(ClusterModel {
            k,
            requested_k: k,
            centroids,
            inertia,
            iterations_run,
            seed,
            inertia_history: Vec::new(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}
