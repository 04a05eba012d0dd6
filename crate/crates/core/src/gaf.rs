//! Gramian Angular Summation Field encoding of sliding windows.

use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::Series;
use crate::supervised::split_point;

pub const DEFAULT_WINDOW: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GafImage {
    /// `W × W`, entry `(i, j) = cos(φ_i + φ_j)`.
    pub matrix: Array2<f64>,
    pub window_start: Option<NaiveDate>,
    pub window_end: Option<NaiveDate>,
    pub rescale_min: f64,
    pub rescale_max: f64,
}

impl GafImage {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    /// Writes the matrix as comma-separated rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for row in self.matrix.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// 8-bit grayscale, `[-1, 1]` mapped linearly onto `[0, 255]`.
    pub fn to_pgm(&self) -> Vec<u8> {
        let (h, w) = self.matrix.dim();
        let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
        bytes.extend(self.matrix.iter().map(|v| {
            let x = ((v.clamp(-1.0, 1.0) + 1.0) * 127.5).round();
            x as u8
        }));
        bytes
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_pgm()).map_err(|e| Error::io(path, e))
    }
}

/// Min-max rescaling onto `[-1, 1]`; a constant window maps to all zeros.
pub fn rescale_window(window: &[f64]) -> (Vec<f64>, f64, f64) {
    let lo = window.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled = if hi == lo {
        vec![0.0; window.len()]
    } else {
        window
            .iter()
            // exact at both extremes, where arccos is most sensitive
            .map(|y| (2.0 * (y - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0))
            .collect()
    };
    (scaled, lo, hi)
}

pub fn gaf_encode(window: &[f64]) -> Result<GafImage> {
    let w = window.len();
    if w < 2 {
        return Err(Error::WindowTooShort(w));
    }
    let (scaled, lo, hi) = rescale_window(window);
    let phi: Vec<f64> = scaled.iter().map(|v| v.acos()).collect();
    let mut matrix = Array2::zeros((w, w));
    for i in 0..w {
        for j in i..w {
            let g = (phi[i] + phi[j]).cos();
            matrix[[i, j]] = g;
            matrix[[j, i]] = g;
        }
    }
    Ok(GafImage {
        matrix,
        window_start: None,
        window_end: None,
        rescale_min: lo,
        rescale_max: hi,
    })
}

/// Images with their next-step targets in original series units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSet {
    pub images: Vec<GafImage>,
    pub targets: Vec<f64>,
    pub target_dates: Vec<NaiveDate>,
}

impl ImageSet {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageDataset {
    pub window: usize,
    pub train: ImageSet,
    pub test: ImageSet,
}

/// Every `(window, next value)` pair of `s`, in time order.
pub fn gaf_pairs(s: &Series, window: usize) -> Result<ImageSet> {
    let n = s.len();
    if window < 2 {
        return Err(Error::WindowTooShort(window));
    }
    if n <= window {
        return Err(Error::SeriesTooShort { needed: window, got: n });
    }
    let y = s.values();
    let dates = s.timestamps();
    let mut images = Vec::with_capacity(n - window);
    for t in window..n {
        let mut img = gaf_encode(&y[t - window..t])?;
        img.window_start = Some(dates[t - window]);
        img.window_end = Some(dates[t - 1]);
        images.push(img);
    }
    Ok(ImageSet {
        images,
        targets: y[window..].to_vec(),
        target_dates: dates[window..].to_vec(),
    })
}

/// Windows of length `window` split chronologically with the same row
/// indexing as a lag embedding of order `window`.
pub fn build_image_dataset(s: &Series, window: usize, test_fraction: f64) -> Result<ImageDataset> {
    if s.len() <= window + 10 {
        return Err(Error::SeriesTooShort {
            needed: window + 10,
            got: s.len(),
        });
    }
    if !(test_fraction > 0.0 && test_fraction <= 0.5) {
        return Err(Error::InvalidConfig(format!(
            "test fraction must lie in (0, 0.5], got {test_fraction}"
        )));
    }
    let all = gaf_pairs(s, window)?;
    let split = split_point(all.len(), test_fraction);
    let ImageSet {
        mut images,
        mut targets,
        mut target_dates,
    } = all;
    let test = ImageSet {
        images: images.split_off(split),
        targets: targets.split_off(split),
        target_dates: target_dates.split_off(split),
    };
    Ok(ImageDataset {
        window,
        train: ImageSet {
            images,
            targets,
            target_dates,
        },
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn constant_window() {
        let img = gaf_encode(&[3.0; 5]).unwrap();
        assert!(img.matrix.iter().all(|v| (*v + 1.0).abs() < 1e-15));
        assert_eq!((img.rescale_min, img.rescale_max), (3.0, 3.0));
        // phi = pi/2 for every entry
        assert_abs_diff_eq!((PI / 2.0 + PI / 2.0).cos(), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn endpoint_window() {
        let img = gaf_encode(&[-1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(img.matrix[[0, 0]], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(img.matrix[[0, 1]], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(img.matrix[[1, 0]], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(img.matrix[[1, 1]], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn short_window_rejected() {
        assert!(matches!(gaf_encode(&[1.0]), Err(Error::WindowTooShort(1))));
    }

    #[test]
    fn pair_counting_and_raw_targets() {
        let v: Vec<f64> = (0..25).map(|i| 100.0 + i as f64).collect();
        let s = Series::from_slice("x", &v).unwrap();
        let pairs = gaf_pairs(&s, 20).unwrap();
        assert_eq!(pairs.len(), 5);
        assert_eq!(pairs.targets, v[20..].to_vec());
        assert_eq!(pairs.images[0].window_end, Some(s.timestamps()[19]));
    }

    #[test]
    fn chronological_split() {
        let v: Vec<f64> = (0..80).map(|i| (i as f64 * 0.3).sin()).collect();
        let s = Series::from_slice("x", &v).unwrap();
        let ds = build_image_dataset(&s, 20, 0.2).unwrap();
        assert_eq!(ds.train.len() + ds.test.len(), 60);
        assert_eq!(ds.train.len(), 48);
        assert!(ds.train.target_dates.last() < ds.test.target_dates.first());
        assert!(build_image_dataset(&Series::from_slice("x", &v[..30]).unwrap(), 20, 0.2).is_err());
    }

    #[test]
    fn pgm_header_and_mapping() {
        let img = gaf_encode(&[-1.0, 1.0]).unwrap();
        let pgm = img.to_pgm();
        assert!(pgm.starts_with(b"P5\n2 2\n255\n"));
        assert_eq!(&pgm[pgm.len() - 4..], &[255, 0, 0, 255]);
    }
}
