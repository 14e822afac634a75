//! Reconstruction quality metrics and training losses.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Result, SciError};
use crate::math;
use crate::tensor::DataCube;

/// β weights of the multi-stage loss for stages K, K−1, K−2.
pub const DEFAULT_BETAS: [f64; 3] = [1.0, 0.5, 0.5];

fn same_shape(a: &DataCube, b: &DataCube, what: &str) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(SciError::ShapeMismatch(format!("{what}: {:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

pub fn mse(a: &DataCube, b: &DataCube) -> Result<f64> {
    same_shape(a, b, "mse")?;
    let d = a.distance(b);
    Ok(d * d / a.len() as f64)
}

/// `10·log10(peak²/MSE)`; `+∞` when the inputs are identical.
pub fn psnr(a: &DataCube, b: &DataCube, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(SciError::InvalidConfig(format!("psnr peak must be positive, got {peak}")));
    }
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * math::log10(peak * peak / m))
}

/// `‖x* − v‖₂`.
pub fn rmse_loss(xstar: &DataCube, v: &DataCube) -> Result<f64> {
    same_shape(xstar, v, "rmse_loss")?;
    Ok(xstar.distance(v))
}

/// `β₁‖x*−v⁽ᴷ⁾‖ + β₂‖x*−v⁽ᴷ⁻¹⁾‖ + β₃‖x*−v⁽ᴷ⁻²⁾‖`.
pub fn weighted_loss(xstar: &DataCube, v_k: &DataCube, v_k1: &DataCube, v_k2: &DataCube, betas: [f64; 3]) -> Result<f64> {
    Ok(betas[0] * rmse_loss(xstar, v_k)? + betas[1] * rmse_loss(xstar, v_k1)? + betas[2] * rmse_loss(xstar, v_k2)?)
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Mean SSIM over slices for data in `[0, 1]`.
pub fn ssim(a: &DataCube, b: &DataCube) -> Result<f64> {
    ssim_with_range(a, b, 1.0)
}

/// Gaussian-window SSIM (11×11, σ = 1.5, K₁ = 0.01, K₂ = 0.03) averaged over
/// valid window positions and then over slices. Slices smaller than the
/// window use the largest odd window that fits.
pub fn ssim_with_range(a: &DataCube, b: &DataCube, data_range: f64) -> Result<f64> {
    same_shape(a, b, "ssim")?;
    let (nx, ny, nb) = a.dims();
    let c1 = (SSIM_K1 * data_range) * (SSIM_K1 * data_range);
    let c2 = (SSIM_K2 * data_range) * (SSIM_K2 * data_range);
    let mut win = SSIM_WINDOW.min(nx).min(ny);
    if win % 2 == 0 {
        win -= 1;
    }
    let kernel = gaussian_kernel(win, SSIM_SIGMA);
    let mut total = 0.0;
    for s in 0..nb {
        let x = a.slice_data(s);
        let y = b.slice_data(s);
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(y).map(|(p, q)| p * q).collect();
        let mx = filter_valid(x, nx, ny, &kernel);
        let my = filter_valid(y, nx, ny, &kernel);
        let mxx = filter_valid(&xx, nx, ny, &kernel);
        let myy = filter_valid(&yy, nx, ny, &kernel);
        let mxy = filter_valid(&xy, nx, ny, &kernel);
        let mut acc = 0.0;
        for k in 0..mx.len() {
            let (ux, uy) = (mx[k], my[k]);
            let vx = mxx[k] - ux * ux;
            let vy = myy[k] - uy * uy;
            let cxy = mxy[k] - ux * uy;
            acc += ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
        }
        total += acc / mx.len() as f64;
    }
    Ok(total / nb as f64)
}

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size / 2) as f64;
    let mut k: Vec<f64> = (0..size).map(|i| math::exp(-((i as f64 - c) * (i as f64 - c)) / (2.0 * sigma * sigma))).collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

// separable "valid" correlation of a row-major nx×ny image
fn filter_valid(img: &[f64], nx: usize, ny: usize, k: &[f64]) -> Vec<f64> {
    let w = k.len();
    let (ox, oy) = (nx + 1 - w, ny + 1 - w);
    let mut rows = vec![0.0; nx * oy];
    for i in 0..nx {
        for j in 0..oy {
            rows[i * oy + j] = (0..w).map(|t| k[t] * img[i * ny + j + t]).sum();
        }
    }
    let mut out = vec![0.0; ox * oy];
    for i in 0..ox {
        for j in 0..oy {
            out[i * oy + j] = (0..w).map(|t| k[t] * rows[(i + t) * oy + j]).sum();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn rand_cube(seed: u64) -> DataCube {
        let mut r = rng::seeded(seed);
        DataCube::from_fn(16, 16, 2, |_, _, _| rng::uniform(&mut r, 0.0, 1.0))
    }

    #[test]
    fn identical_inputs() {
        let a = rand_cube(1);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn psnr_closed_forms() {
        let a = rand_cube(2);
        let b = a.map(|v| v + 0.1);
        // MSE = 0.01 exactly up to rounding → 20 dB
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-9);
        assert!(psnr(&a, &b, 0.0).is_err());
    }

    #[test]
    fn ssim_drops_with_noise() {
        let a = rand_cube(3);
        let mut r = rng::seeded(4);
        let noise = DataCube::from_fn(a.nx(), a.ny(), a.bands(), |_, _, _| 0.2 * rng::normal(&mut r));
        let noisy = a.axpy(1.0, &noise);
        let s = ssim(&a, &noisy).unwrap();
        assert!(s < 0.9 && s > 0.0);
        // tiny images fall back to a smaller window
        let t = DataCube::from_fn(4, 5, 1, |i, j, _| (i + j) as f64 / 8.0);
        assert_eq!(ssim(&t, &t).unwrap(), 1.0);
    }

    #[test]
    fn losses() {
        let x = rand_cube(5);
        assert_eq!(rmse_loss(&x, &x).unwrap(), 0.0);
        let mut r = rng::seeded(6);
        let d = DataCube::from_vec(16, 16, 2, rng::normal_vec(&mut r, 512)).unwrap();
        let unit = d.scaled(1.0 / d.norm());
        let v = x.axpy(1.0, &unit);
        let l = weighted_loss(&x, &v, &v, &v, DEFAULT_BETAS).unwrap();
        assert!((l - 2.0).abs() < 1e-12);
        let y = rand_cube(7);
        let direct: f64 = x.as_slice().iter().zip(y.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        assert!((rmse_loss(&x, &y).unwrap() - direct.sqrt()).abs() < 1e-12);
        assert!(rmse_loss(&x, &DataCube::zeros(2, 2, 2)).is_err());
    }
}
