//! Unsupervised intensity clustering for bead segmentation: 3-cluster
//! K-means with a threshold rule, and a Gaussian mixture fitted by EM for
//! blurred regions.
//!
//! Both are deterministic: K-means initializes from fixed quantiles and EM
//! starts from the K-means solution.

use crate::error::VisionError;

/// Per-cluster statistics, labeled by ascending mean:
/// dark background, noise/blur, light line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterStat {
    pub mean: f64,
    pub std: f64,
    pub weight: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSummary {
    /// Ascending by mean: [dark, noise, light].
    pub clusters: [ClusterStat; 3],
}

impl ClusterSummary {
    pub fn dark(&self) -> &ClusterStat {
        &self.clusters[0]
    }

    pub fn noise(&self) -> &ClusterStat {
        &self.clusters[1]
    }

    pub fn light(&self) -> &ClusterStat {
        &self.clusters[2]
    }
}

fn distinct_count(pixels: &[f64]) -> usize {
    let mut sorted: Vec<f64> = pixels.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    sorted.dedup();
    sorted.len()
}

/// Lloyd iterations from deterministic quantile initialization
/// (10th/50th/90th percentiles) until the centroids move less than 1e-6 or
/// 100 iterations. An emptied cluster re-seeds from the point farthest
/// from its assigned centroid.
pub fn cluster_kmeans(pixels: &[f64]) -> Result<ClusterSummary, VisionError> {
    const K: usize = 3;
    if distinct_count(pixels) < K {
        return Err(VisionError::TooFewSamples { need: K, got: distinct_count(pixels) });
    }
    let mut sorted: Vec<f64> = pixels.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let quantile = |q: f64| sorted[((q * (sorted.len() - 1) as f64).round()) as usize];
    let mut centroids = [quantile(0.1), quantile(0.5), quantile(0.9)];

    let mut assignment = vec![0usize; pixels.len()];
    for _ in 0..100 {
        // Assign.
        for (i, &p) in pixels.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (k, &c) in centroids.iter().enumerate() {
                let d = (p - c).abs();
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
            assignment[i] = best;
        }
        // Update.
        let mut sums = [0.0f64; K];
        let mut counts = [0usize; K];
        for (i, &p) in pixels.iter().enumerate() {
            sums[assignment[i]] += p;
            counts[assignment[i]] += 1;
        }
        // Deterministic re-seed for emptied clusters: the sample farthest
        // from its current centroid.
        for k in 0..K {
            if counts[k] == 0 {
                let (far_i, _) = pixels
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| (i, (p - centroids[assignment[i]]).abs()))
                    .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
                    .expect("nonempty pixel set");
                sums[assignment[far_i]] -= pixels[far_i];
                counts[assignment[far_i]] -= 1;
                assignment[far_i] = k;
                sums[k] = pixels[far_i];
                counts[k] = 1;
            }
        }
        let mut motion = 0.0f64;
        for k in 0..K {
            let next = sums[k] / counts[k] as f64;
            motion = motion.max((next - centroids[k]).abs());
            centroids[k] = next;
        }
        if motion < 1e-6 {
            break;
        }
    }

    // Final statistics, labeled ascending by mean.
    let mut stats: Vec<ClusterStat> = (0..K)
        .map(|k| {
            let members: Vec<f64> = pixels
                .iter()
                .zip(&assignment)
                .filter(|(_, &a)| a == k)
                .map(|(&p, _)| p)
                .collect();
            let n = members.len() as f64;
            let mean = members.iter().sum::<f64>() / n;
            let var = members.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n;
            ClusterStat {
                mean,
                std: var.sqrt(),
                weight: n / pixels.len() as f64,
                count: members.len(),
            }
        })
        .collect();
    stats.sort_by(|a, b| a.mean.total_cmp(&b.mean));
    Ok(ClusterSummary { clusters: [stats[0], stats[1], stats[2]] })
}

/// Segmentation threshold after K-means: `mu_noise + n * sigma_noise`
/// (pixels above belong to the line). The multiplier is normally within
/// [1, 2.5]; values outside only log a warning.
pub fn threshold_kmeans(summary: &ClusterSummary, n: f64) -> f64 {
    if !(1.0..=2.5).contains(&n) {
        log::warn!("threshold multiplier n = {n} outside the usual [1, 2.5] range");
    }
    summary.noise().mean + n * summary.noise().std
}

/// Gaussian mixture fit.
#[derive(Debug, Clone)]
pub struct GmmResult {
    pub summary: ClusterSummary,
    /// Per-pixel responsibilities for [dark, noise, light].
    pub responsibilities: Vec<[f64; 3]>,
    /// Log-likelihood after each EM iteration.
    pub ll_trace: Vec<f64>,
}

impl GmmResult {
    /// A pixel belongs to the line iff the highest-mean component carries
    /// its maximal responsibility.
    pub fn line_mask(&self) -> Vec<bool> {
        self.responsibilities
            .iter()
            .map(|r| r[2] >= r[0] && r[2] >= r[1])
            .collect()
    }
}

const VAR_FLOOR: f64 = 1e-6;

/// EM for a 3-component Gaussian mixture, initialized from the K-means
/// solution; converges when the log-likelihood gain drops below 1e-8 or
/// after 200 iterations.
pub fn cluster_gmm(pixels: &[f64]) -> Result<GmmResult, VisionError> {
    const K: usize = 3;
    if pixels.len() < 3 * K {
        return Err(VisionError::TooFewSamples { need: 3 * K, got: pixels.len() });
    }
    let init = cluster_kmeans(pixels)?;
    let mut means = [init.clusters[0].mean, init.clusters[1].mean, init.clusters[2].mean];
    let mut vars = [
        (init.clusters[0].std * init.clusters[0].std).max(VAR_FLOOR),
        (init.clusters[1].std * init.clusters[1].std).max(VAR_FLOOR),
        (init.clusters[2].std * init.clusters[2].std).max(VAR_FLOOR),
    ];
    let mut weights = [
        init.clusters[0].weight.max(1e-6),
        init.clusters[1].weight.max(1e-6),
        init.clusters[2].weight.max(1e-6),
    ];

    let n = pixels.len();
    let mut resp = vec![[0.0f64; 3]; n];
    let mut ll_trace = Vec::new();
    let mut prev_ll = f64::NEG_INFINITY;
    for iteration in 0..200 {
        // E step.
        let mut ll = 0.0;
        for (i, &p) in pixels.iter().enumerate() {
            let mut total = 0.0;
            let mut dens = [0.0f64; 3];
            for k in 0..K {
                let d = p - means[k];
                let g = (-0.5 * d * d / vars[k]).exp()
                    / (std::f64::consts::TAU * vars[k]).sqrt();
                dens[k] = weights[k] * g;
                total += dens[k];
            }
            if total <= 0.0 || !total.is_finite() {
                if !total.is_finite() {
                    ll_trace.push(total);
                    return Err(VisionError::NonFiniteLikelihood { iteration, trace: ll_trace });
                }
                // Degenerate point far from all components: uniform blame.
                resp[i] = [1.0 / 3.0; 3];
                ll += f64::MIN_POSITIVE.ln();
            } else {
                for k in 0..K {
                    resp[i][k] = dens[k] / total;
                }
                ll += total.ln();
            }
        }
        if !ll.is_finite() {
            ll_trace.push(ll);
            return Err(VisionError::NonFiniteLikelihood { iteration, trace: ll_trace });
        }
        ll_trace.push(ll);
        if (ll - prev_ll).abs() < 1e-8 {
            break;
        }
        prev_ll = ll;

        // M step.
        for k in 0..K {
            let nk: f64 = resp.iter().map(|r| r[k]).sum();
            if nk <= 1e-12 {
                continue;
            }
            let mean = pixels.iter().zip(&resp).map(|(&p, r)| r[k] * p).sum::<f64>() / nk;
            let var = pixels
                .iter()
                .zip(&resp)
                .map(|(&p, r)| r[k] * (p - mean) * (p - mean))
                .sum::<f64>()
                / nk;
            means[k] = mean;
            vars[k] = var.max(VAR_FLOOR);
            weights[k] = nk / n as f64;
        }
    }

    // Label components ascending by mean and reorder responsibilities.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| means[a].total_cmp(&means[b]));
    let summary = ClusterSummary {
        clusters: [0, 1, 2].map(|i| {
            let k = order[i];
            ClusterStat {
                mean: means[k],
                std: vars[k].sqrt(),
                weight: weights[k],
                count: (weights[k] * n as f64).round() as usize,
            }
        }),
    };
    let responsibilities: Vec<[f64; 3]> =
        resp.into_iter().map(|r| [r[order[0]], r[order[1]], r[order[2]]]).collect();
    Ok(GmmResult { summary, responsibilities, ll_trace })
}
