//! Delayed auto- and cross-correlation structure of a multichannel segment.

use serde::{Deserialize, Serialize};

use super::series::ChannelSeries;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// How each lagged correlation is normalised.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrelationEstimator {
    /// Mean and population standard deviation over the whole segment; the
    /// lag-`d` sum is divided by `T − d`.
    #[default]
    FullSegment,
    /// Pearson correlation of the two overlapping sub-windows at each lag.
    PerLagMeans,
}

/// `(C·C) × (D+1)` matrix: row `i·C + j` holds `r_ij(d)` for `d = 0..=D`.
#[derive(Clone, Debug, PartialEq)]
pub struct FvtcTensor {
    pub channels: usize,
    pub max_delay: usize,
    pub values: Tensor,
    /// Per channel: `true` when the channel had zero variance.
    pub degenerate: Vec<bool>,
}

impl FvtcTensor {
    pub fn get(&self, i: usize, j: usize, d: usize) -> f64 {
        self.values.data()[(i * self.channels + j) * (self.max_delay + 1) + d]
    }

    pub fn any_degenerate(&self) -> bool {
        self.degenerate.iter().any(|&d| d)
    }
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Correlation structure over delays `0..=max_delay`, using only the real
/// (unpadded) frames of `segment`. Zero-variance channels yield zero rows
/// and columns and are flagged.
pub fn compute_fvtc(segment: &ChannelSeries, max_delay: usize, estimator: CorrelationEstimator) -> Result<FvtcTensor> {
    let t = segment.valid_frames();
    if t <= max_delay {
        return Err(Error::invalid(format!(
            "segment has {t} frames, needs more than the maximum delay {max_delay}"
        )));
    }
    let c = segment.channels();
    let cols = max_delay + 1;
    let channels: Vec<&[f64]> = (0..c).map(|i| &segment.channel(i)[..t]).collect();
    let stats: Vec<(f64, f64)> = channels.iter().map(|x| mean_std(x)).collect();
    let degenerate: Vec<bool> = stats.iter().map(|&(_, s)| s == 0.0).collect();
    let mut out = vec![0.0; c * c * cols];

    match estimator {
        CorrelationEstimator::FullSegment => {
            let z: Vec<Vec<f64>> = channels
                .iter()
                .zip(&stats)
                .map(|(x, &(m, s))| {
                    if s == 0.0 {
                        vec![0.0; t]
                    } else {
                        x.iter().map(|v| (v - m) / s).collect()
                    }
                })
                .collect();
            for i in 0..c {
                for j in 0..c {
                    if degenerate[i] || degenerate[j] {
                        continue;
                    }
                    let row = &mut out[(i * c + j) * cols..(i * c + j + 1) * cols];
                    for (d, slot) in row.iter_mut().enumerate() {
                        let n = t - d;
                        let s: f64 = z[i][..n].iter().zip(&z[j][d..]).map(|(a, b)| a * b).sum();
                        *slot = s / n as f64;
                    }
                }
            }
        }
        CorrelationEstimator::PerLagMeans => {
            for i in 0..c {
                for j in 0..c {
                    if degenerate[i] || degenerate[j] {
                        continue;
                    }
                    let row = &mut out[(i * c + j) * cols..(i * c + j + 1) * cols];
                    for (d, slot) in row.iter_mut().enumerate() {
                        let n = t - d;
                        let (a, b) = (&channels[i][..n], &channels[j][d..]);
                        let (ma, sa) = mean_std(a);
                        let (mb, sb) = mean_std(b);
                        if sa == 0.0 || sb == 0.0 {
                            continue;
                        }
                        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n as f64;
                        *slot = cov / (sa * sb);
                    }
                }
            }
        }
    }

    Ok(FvtcTensor {
        channels: c,
        max_delay,
        values: Tensor::new(vec![c * c, cols], out)?,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::series::Modality;

    fn series(rows: &[&[f64]]) -> ChannelSeries {
        let names = (0..rows.len()).map(|i| format!("c{i}")).collect();
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        let values = Tensor::new(vec![rows.len(), rows[0].len()], data).unwrap();
        ChannelSeries::new(Modality::Audio, names, 100.0, values).unwrap()
    }

    #[test]
    fn hand_cases() {
        let s = series(&[&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]]);
        let f = compute_fvtc(&s, 1, CorrelationEstimator::FullSegment).unwrap();
        assert_eq!(f.values.shape(), &[4, 2]);
        assert!((f.get(0, 1, 0) + 1.0).abs() < 1e-15);
        assert!((f.get(0, 0, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((f.get(0, 0, 0) - 1.0).abs() < 1e-15);
        assert!((f.get(1, 1, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_channel_is_flagged() {
        let s = series(&[&[1.0, 2.0, 4.0, 3.0], &[5.0, 5.0, 5.0, 5.0]]);
        let f = compute_fvtc(&s, 2, CorrelationEstimator::FullSegment).unwrap();
        assert_eq!(f.degenerate, vec![false, true]);
        for d in 0..=2 {
            assert_eq!(f.get(0, 1, d), 0.0);
            assert_eq!(f.get(1, 0, d), 0.0);
            assert_eq!(f.get(1, 1, d), 0.0);
        }
        assert!((f.get(0, 0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn too_short_for_delay() {
        let s = series(&[&[1.0, 2.0, 3.0]]);
        assert!(compute_fvtc(&s, 3, CorrelationEstimator::FullSegment).is_err());
        assert!(compute_fvtc(&s, 2, CorrelationEstimator::FullSegment).is_ok());
    }

    #[test]
    fn per_lag_estimator_is_exact_on_lines() {
        let s = series(&[&[1.0, 2.0, 3.0, 4.0, 5.0]]);
        let f = compute_fvtc(&s, 2, CorrelationEstimator::PerLagMeans).unwrap();
        for d in 0..=2 {
            assert!((f.get(0, 0, d) - 1.0).abs() < 1e-12);
        }
    }
}
