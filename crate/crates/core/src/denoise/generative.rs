//! Generative-function denoisers: `v = g(f)` with `f = argmin ‖x − g(f)‖₂`.
//!
//! Two decoder families are supported. A linear decoder `g(f) = s·Qf` over an
//! orthonormal basis is solved in closed form (`f = Qᵀx/s`). A small MLP
//! decoder is solved by projected gradient descent on the latent box with
//! random restarts, an adaptive step and the best restart kept.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::subspace::SubspaceBasis;
use crate::error::{Result, SciError};
use crate::math;
use crate::rng;
use crate::tensor::DataCube;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Tanh => math::tanh(z),
        }
    }

    // derivative expressed through the pre-activation
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = math::tanh(z);
                1.0 - t * t
            }
        }
    }
}

/// Fully connected layer `a = σ(Wz + b)`, `W` row-major `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(inputs: usize, outputs: usize, weight: Vec<f64>, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if weight.len() != inputs * outputs || bias.len() != outputs {
            return Err(SciError::WeightShapeMismatch(format!(
                "dense layer {inputs}->{outputs} got {} weights and {} biases",
                weight.len(),
                bias.len()
            )));
        }
        Ok(Self { inputs, outputs, weight, bias, activation })
    }

    fn pre_activation(&self, input: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|o| self.bias[o] + math::dot(&self.weight[o * self.inputs..(o + 1) * self.inputs], input))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decoder {
    /// `g(f) = scale·Qf`.
    Linear { basis: SubspaceBasis, scale: f64 },
    /// Stack of dense layers; the last layer's width is `n_x·n_y·B`.
    Mlp { layers: Vec<DenseLayer> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeModel {
    dims: (usize, usize, usize),
    latent_dim: usize,
    decoder: Decoder,
    declared_lipschitz: Option<f64>,
}

impl GenerativeModel {
    pub fn linear(basis: SubspaceBasis, scale: f64) -> Self {
        Self {
            dims: basis.dims(),
            latent_dim: basis.rank(),
            declared_lipschitz: Some(scale.abs()),
            decoder: Decoder::Linear { basis, scale },
        }
    }

    pub fn mlp(dims: (usize, usize, usize), layers: Vec<DenseLayer>) -> Result<Self> {
        let first = layers.first().ok_or_else(|| SciError::WeightShapeMismatch("decoder has no layers".into()))?;
        let latent_dim = first.inputs;
        if latent_dim == 0 {
            return Err(SciError::WeightShapeMismatch("latent dimension must be >= 1".into()));
        }
        for w in layers.windows(2) {
            if w[0].outputs != w[1].inputs {
                return Err(SciError::WeightShapeMismatch(format!(
                    "layer chain breaks: {} outputs feed {} inputs",
                    w[0].outputs, w[1].inputs
                )));
            }
        }
        let out = layers.last().map(|l| l.outputs).unwrap_or(0);
        if out != dims.0 * dims.1 * dims.2 {
            return Err(SciError::WeightShapeMismatch(format!("decoder emits {out} values for cube {dims:?}")));
        }
        Ok(Self { dims, latent_dim, decoder: Decoder::Mlp { layers }, declared_lipschitz: None })
    }

    pub fn with_declared_lipschitz(mut self, l: f64) -> Self {
        self.declared_lipschitz = Some(l);
        self
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn decoder(&self) -> &Decoder {
        &self.decoder
    }

    pub fn declared_lipschitz(&self) -> Option<f64> {
        self.declared_lipschitz
    }

    /// `g(f)` in cube storage order.
    pub fn decode(&self, f: &[f64]) -> Vec<f64> {
        match &self.decoder {
            Decoder::Linear { basis, scale } => basis.synthesize(f).into_iter().map(|v| scale * v).collect(),
            Decoder::Mlp { layers } => {
                let mut a = f.to_vec();
                for l in layers {
                    a = l.pre_activation(&a).into_iter().map(|z| l.activation.apply(z)).collect();
                }
                a
            }
        }
    }

    pub fn decode_cube(&self, f: &[f64]) -> DataCube {
        let (nx, ny, nb) = self.dims;
        DataCube::from_vec(nx, ny, nb, self.decode(f)).expect("decoder width checked at construction")
    }

    /// `½‖x − g(f)‖²` and its gradient with respect to `f`.
    pub fn objective_and_gradient(&self, x: &[f64], f: &[f64]) -> (f64, Vec<f64>) {
        match &self.decoder {
            Decoder::Linear { basis, scale } => {
                let g = self.decode(f);
                let r: Vec<f64> = g.iter().zip(x).map(|(a, b)| a - b).collect();
                let obj = 0.5 * math::dot(&r, &r);
                let grad = basis.coefficients(&r).into_iter().map(|c| scale * c).collect();
                (obj, grad)
            }
            Decoder::Mlp { layers } => {
                let mut pre = Vec::with_capacity(layers.len());
                let mut acts = vec![f.to_vec()];
                for l in layers {
                    let z = l.pre_activation(acts.last().expect("non-empty"));
                    acts.push(z.iter().map(|&v| l.activation.apply(v)).collect());
                    pre.push(z);
                }
                let out = acts.last().expect("non-empty");
                let mut delta: Vec<f64> = out.iter().zip(x).map(|(a, b)| a - b).collect();
                let obj = 0.5 * math::dot(&delta, &delta);
                for (li, l) in layers.iter().enumerate().rev() {
                    for (d, &z) in delta.iter_mut().zip(&pre[li]) {
                        *d *= l.activation.derivative(z);
                    }
                    let mut back = vec![0.0; l.inputs];
                    for o in 0..l.outputs {
                        let row = &l.weight[o * l.inputs..(o + 1) * l.inputs];
                        for (bk, w) in back.iter_mut().zip(row) {
                            *bk += w * delta[o];
                        }
                    }
                    delta = back;
                }
                (obj, delta)
            }
        }
    }
}

/// Settings for the latent-space descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentSettings {
    pub restarts: usize,
    pub step: f64,
    pub steps: usize,
    pub seed: u64,
    /// Box `[-bound, bound]^η` for the latent; `None` leaves it unconstrained.
    pub latent_bound: Option<f64>,
    /// Projected-gradient norm regarded as stationary.
    pub tolerance: f64,
}

impl Default for DescentSettings {
    fn default() -> Self {
        Self { restarts: 8, step: 1e-2, steps: 500, seed: 0, latent_bound: Some(1.0), tolerance: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeProjection {
    pub v: DataCube,
    pub latent: Vec<f64>,
    /// `‖x − g(f)‖₂` at the returned latent.
    pub residual: f64,
    /// `false` when no restart reached the stationarity tolerance; the best
    /// point found is still returned.
    pub converged: bool,
    /// Squared-objective history of the winning restart.
    pub history: Vec<f64>,
}

pub fn generative_project(model: &GenerativeModel, x: &DataCube, settings: &DescentSettings) -> Result<GenerativeProjection> {
    x.ensure_dims(model.dims, "generative projection")?;
    if let Decoder::Linear { basis, scale } = &model.decoder {
        let latent: Vec<f64> = basis.coefficients(x.as_slice()).into_iter().map(|c| c / scale).collect();
        let v = model.decode_cube(&latent);
        let residual = v.distance(x);
        return Ok(GenerativeProjection { v, latent, residual, converged: true, history: vec![0.5 * residual * residual] });
    }

    let eta = model.latent_dim;
    let bound = settings.latent_bound;
    let clamp = |f: &mut [f64]| {
        if let Some(b) = bound {
            for v in f.iter_mut() {
                *v = v.clamp(-b, b);
            }
        }
    };
    let init_range = bound.unwrap_or(1.0);
    let mut best: Option<(f64, Vec<f64>, bool, Vec<f64>)> = None;
    for restart in 0..settings.restarts.max(1) {
        let mut r = rng::seeded(rng::derive_seed(settings.seed, restart as u64));
        let mut f: Vec<f64> = (0..eta).map(|_| rng::uniform(&mut r, -init_range, init_range)).collect();
        let (mut obj, mut grad) = model.objective_and_gradient(x.as_slice(), &f);
        let mut step = settings.step;
        let mut history = vec![obj];
        let mut converged = false;
        for _ in 0..settings.steps {
            let mut cand: Vec<f64> = f.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
            clamp(&mut cand);
            // projected-gradient magnitude at the current point, unit step
            let mut unit: Vec<f64> = f.iter().zip(&grad).map(|(a, g)| a - g).collect();
            clamp(&mut unit);
            let pg = math::dist2(&unit, &f);
            if pg <= settings.tolerance {
                converged = true;
                break;
            }
            let (c_obj, c_grad) = model.objective_and_gradient(x.as_slice(), &cand);
            if c_obj < obj {
                f = cand;
                obj = c_obj;
                grad = c_grad;
                step *= 1.5;
            } else {
                step *= 0.5;
                if step < 1e-300 {
                    converged = true;
                    break;
                }
            }
            history.push(obj);
        }
        if best.as_ref().is_none_or(|b| obj < b.0) {
            best = Some((obj, f, converged, history));
        }
    }
    let (obj, latent, converged, history) = best.expect("at least one restart");
    let v = model.decode_cube(&latent);
    Ok(GenerativeProjection { v, latent, residual: math::sqrt(2.0 * obj), converged, history })
}

/// Largest `‖g(f) − g(f')‖ / ‖f − f'‖` over `samples` random latent pairs in
/// `[-1, 1]^η`; a lower bound on the Lipschitz constant.
pub fn lipschitz_estimate(model: &GenerativeModel, samples: usize, seed: u64) -> Result<f64> {
    if samples < 2 {
        return Err(SciError::InvalidConfig(format!("lipschitz_estimate needs >= 2 samples, got {samples}")));
    }
    let eta = model.latent_dim;
    let mut r = rng::seeded(seed);
    let mut best = 0.0_f64;
    for _ in 0..samples {
        let a: Vec<f64> = (0..eta).map(|_| rng::uniform(&mut r, -1.0, 1.0)).collect();
        let b: Vec<f64> = (0..eta).map(|_| rng::uniform(&mut r, -1.0, 1.0)).collect();
        let den = math::dist2(&a, &b);
        if den == 0.0 {
            continue;
        }
        best = best.max(math::dist2(&model.decode(&a), &model.decode(&b)) / den);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::{finite_diff_check, FD_EPS, KINK_MARGIN};

    fn toy_decoder(seed: u64, eta: usize, hidden: usize, act: Activation) -> GenerativeModel {
        let dims = (2, 3, 1);
        let mut r = rng::seeded(seed);
        let l1 = DenseLayer::new(eta, hidden, rng::normal_vec(&mut r, eta * hidden), rng::normal_vec(&mut r, hidden), act)
            .unwrap();
        let l2 = DenseLayer::new(hidden, 6, rng::normal_vec(&mut r, hidden * 6), rng::normal_vec(&mut r, 6), Activation::Identity)
            .unwrap();
        GenerativeModel::mlp(dims, vec![l1, l2]).unwrap()
    }

    #[test]
    fn linear_projection_matches_normal_equations() {
        let basis = SubspaceBasis::random((3, 3, 2), 4, 1).unwrap();
        let model = GenerativeModel::linear(basis.clone(), 2.0);
        let mut r = rng::seeded(2);
        let x = DataCube::from_vec(3, 3, 2, rng::normal_vec(&mut r, 18)).unwrap();
        let p = generative_project(&model, &x, &DescentSettings::default()).unwrap();
        // normal equations (s²QᵀQ) f = s Qᵀx with QᵀQ = I
        let f_ref: Vec<f64> = basis.coefficients(x.as_slice()).iter().map(|c| c / 2.0).collect();
        for (a, b) in p.latent.iter().zip(&f_ref) {
            assert!((a - b).abs() <= 1e-10);
        }
        let q = basis.project(&x).unwrap();
        assert!(crate::operator::relative_error(p.v.as_slice(), q.as_slice()) <= 1e-10);
    }

    #[test]
    fn in_range_input_has_zero_distortion() {
        let basis = SubspaceBasis::random((4, 4, 1), 3, 5).unwrap();
        let model = GenerativeModel::linear(basis, 1.0);
        let x = model.decode_cube(&[0.3, -0.2, 0.9]);
        let p = generative_project(&model, &x, &DescentSettings::default()).unwrap();
        assert!(p.residual <= 1e-8);

        let mlp = toy_decoder(11, 2, 5, Activation::Tanh);
        let x = mlp.decode_cube(&[0.4, -0.3]);
        let p = generative_project(&mlp, &x, &DescentSettings { steps: 2000, ..Default::default() }).unwrap();
        assert!(p.residual <= 1e-8, "residual {}", p.residual);
    }

    #[test]
    fn descent_objective_is_monotone() {
        let mlp = toy_decoder(12, 3, 6, Activation::Relu);
        let mut r = rng::seeded(13);
        let x = DataCube::from_vec(2, 3, 1, rng::normal_vec(&mut r, 6)).unwrap();
        let p = generative_project(&mlp, &x, &DescentSettings::default()).unwrap();
        for w in p.history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn descent_reaches_latent_grid_optimum() {
        let mlp = toy_decoder(21, 2, 4, Activation::Tanh);
        let mut r = rng::seeded(22);
        let x = DataCube::from_vec(2, 3, 1, rng::normal_vec(&mut r, 6)).unwrap();
        // brute-force grid over [-1, 1]² at resolution 1e-3
        let steps = 2000;
        let mut grid_best = f64::INFINITY;
        for a in 0..=steps {
            for b in 0..=steps {
                let f = [-1.0 + 2.0 * a as f64 / steps as f64, -1.0 + 2.0 * b as f64 / steps as f64];
                let g = mlp.decode(&f);
                grid_best = grid_best.min(math::dist2(&g, x.as_slice()));
            }
        }
        let p = generative_project(&mlp, &x, &DescentSettings::default()).unwrap();
        assert!(p.residual <= grid_best + 1e-3, "descent {} vs grid {}", p.residual, grid_best);
    }

    #[test]
    fn affine_decoder_gradient_matches_finite_differences() {
        let mlp = toy_decoder(31, 3, 5, Activation::Identity);
        let mut r = rng::seeded(32);
        let x = rng::normal_vec(&mut r, 6);
        let err = finite_diff_check(
            |f| mlp.objective_and_gradient(&x, f).0,
            |f| mlp.objective_and_gradient(&x, f).1,
            &[0.2, -0.5, 0.7],
            FD_EPS,
        );
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn relu_decoder_gradient_away_from_kinks() {
        let mlp = toy_decoder(41, 3, 8, Activation::Relu);
        let mut r = rng::seeded(42);
        let x = rng::normal_vec(&mut r, 6);
        let Decoder::Mlp { layers } = mlp.decoder() else { unreachable!() };
        let mut tested = 0;
        for _ in 0..50 {
            let f: Vec<f64> = (0..3).map(|_| rng::uniform(&mut r, -1.0, 1.0)).collect();
            let margin = layers[0].pre_activation(&f).iter().fold(f64::INFINITY, |m, z| m.min(z.abs()));
            if margin < KINK_MARGIN {
                continue;
            }
            let err = finite_diff_check(
                |f| mlp.objective_and_gradient(&x, f).0,
                |f| mlp.objective_and_gradient(&x, f).1,
                &f,
                FD_EPS,
            );
            assert!(err <= 1e-5, "{err}");
            tested += 1;
        }
        assert!(tested > 10);
    }

    #[test]
    fn lipschitz_of_isometry_is_one() {
        let model = GenerativeModel::linear(SubspaceBasis::random((4, 4, 2), 3, 3).unwrap(), 1.0);
        let l = lipschitz_estimate(&model, 1000, 4).unwrap();
        assert!((1.0 - 1e-6..=1.0 + 1e-12).contains(&l), "{l}");
        assert!(lipschitz_estimate(&model, 1, 4).is_err());
    }

    #[test]
    fn lipschitz_is_homogeneous() {
        let basis = SubspaceBasis::random((3, 3, 1), 2, 5).unwrap();
        let l1 = lipschitz_estimate(&GenerativeModel::linear(basis.clone(), 1.0), 500, 6).unwrap();
        let l3 = lipschitz_estimate(&GenerativeModel::linear(basis, 3.0), 500, 6).unwrap();
        assert!((l3 - 3.0 * l1).abs() <= 1e-12);
    }

    #[test]
    fn lipschitz_of_affine_map_brackets_top_singular_value() {
        // W = U diag(2, 1, 0.5) Vᵀ with orthonormal U (6×3) and V (3×3)
        let u = SubspaceBasis::random((2, 3, 1), 3, 7).unwrap();
        let v = SubspaceBasis::random((3, 1, 1), 3, 8).unwrap();
        let s = [2.0, 1.0, 0.5];
        let mut w = vec![0.0; 18];
        for o in 0..6 {
            for i in 0..3 {
                w[o * 3 + i] = (0..3).map(|k| u.column(k)[o] * s[k] * v.column(k)[i]).sum();
            }
        }
        let layer = DenseLayer::new(3, 6, w, vec![0.1; 6], Activation::Identity).unwrap();
        let model = GenerativeModel::mlp((2, 3, 1), vec![layer]).unwrap();
        let l = lipschitz_estimate(&model, 10_000, 9).unwrap();
        assert!((0.9 * 2.0..=2.0 + 1e-12).contains(&l), "{l}");
    }

    #[test]
    fn mlp_shape_chain_checked() {
        let l1 = DenseLayer::new(2, 3, vec![0.0; 6], vec![0.0; 3], Activation::Relu).unwrap();
        let l2 = DenseLayer::new(4, 6, vec![0.0; 24], vec![0.0; 6], Activation::Identity).unwrap();
        assert!(GenerativeModel::mlp((2, 3, 1), vec![l1.clone(), l2]).is_err());
        assert!(GenerativeModel::mlp((2, 2, 1), vec![l1]).is_err());
        assert!(DenseLayer::new(2, 2, vec![0.0; 3], vec![0.0; 2], Activation::Relu).is_err());
    }
}
