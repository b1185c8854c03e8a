//! Voxel grid encoder: stride-1 and stride-3 3-D convolutions, max pooling
//! and one fully connected layer.

use serde::{Deserialize, Serialize};

use super::ops::{l2_normalize, l2_normalize_backward, linear, linear_backward, max_pool_3d, max_pool_3d_backward, relu_backward_in_place, relu_in_place, Conv3dGeom};
use super::params::{ParamSet, TensorSpec};
use super::real::Real;
use super::text::split_pair;
use super::EncoderError;
use crate::geometry::VoxelGrid;

/// Shape encoder layout. The network has `conv_layers` convolutions: the
/// last `head_channels.len()` use stride 3 and the rest are stride-1
/// `stem_channels`-wide layers that keep the resolution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeArch {
    pub resolution: usize,
    pub conv_layers: usize,
    pub stem_channels: usize,
    pub head_channels: Vec<usize>,
    pub head_pads: Vec<usize>,
    pub pool: usize,
    pub out_dim: usize,
}

/// One convolution of the plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvLayerPlan {
    pub c_in: usize,
    pub c_out: usize,
    pub n_in: usize,
    pub n_out: usize,
    pub stride: usize,
    pub pad: usize,
}

const KERNEL: usize = 3;
const HEAD_STRIDE: usize = 3;

impl ShapeArch {
    /// 16³ input, four 4-channel stride-1 layers, stride-3 layers with
    /// 64/128/256 channels and paddings 1/1/2, 2³ max pool, FC 256→128.
    pub fn standard() -> Self {
        Self::with_layers(7)
    }

    /// The standard layout with `conv_layers` convolutions in total.
    pub fn with_layers(conv_layers: usize) -> Self {
        Self {
            resolution: 16,
            conv_layers,
            stem_channels: 4,
            head_channels: vec![64, 128, 256],
            head_pads: vec![1, 1, 2],
            pool: 2,
            out_dim: 128,
        }
    }

    /// Per-layer geometry; fails if the layout cannot reach a valid pooled
    /// output.
    pub fn plan(&self) -> Result<Vec<ConvLayerPlan>, EncoderError> {
        let heads = self.head_channels.len();
        if heads != self.head_pads.len() || self.conv_layers < heads || self.resolution == 0 {
            return Err(EncoderError::Shape(format!(
                "{} convolution layers cannot hold {} stride-{HEAD_STRIDE} layers",
                self.conv_layers, heads
            )));
        }
        let mut layers = Vec::with_capacity(self.conv_layers);
        let (mut n, mut c) = (self.resolution, 1);
        for l in 0..self.conv_layers {
            let head = l.checked_sub(self.conv_layers - heads);
            let (c_out, stride, pad) = match head {
                Some(h) => (self.head_channels[h], HEAD_STRIDE, self.head_pads[h]),
                None => (self.stem_channels, 1, 1),
            };
            if n + 2 * pad < KERNEL {
                return Err(EncoderError::Shape(format!("layer {} input {n}³ is smaller than the kernel", l + 1)));
            }
            let geom = Conv3dGeom { n_in: n, c_in: c, kernel: KERNEL, stride, pad };
            layers.push(ConvLayerPlan { c_in: c, c_out, n_in: n, n_out: geom.n_out(), stride, pad });
            n = geom.n_out();
            c = c_out;
        }
        if n < self.pool {
            return Err(EncoderError::Shape(format!("final activation {n}³ is smaller than the {}³ pool", self.pool)));
        }
        Ok(layers)
    }

    /// Spatial edge after each convolution and then after pooling.
    pub fn spatial_trace(&self) -> Result<Vec<usize>, EncoderError> {
        let plan = self.plan()?;
        let mut trace: Vec<usize> = std::iter::once(self.resolution).chain(plan.iter().map(|p| p.n_out)).collect();
        trace.push(trace.last().copied().unwrap_or(self.resolution) + 1 - self.pool);
        Ok(trace)
    }

    fn flat_dim(&self, plan: &[ConvLayerPlan]) -> usize {
        let last = plan.last().expect("at least one layer");
        (last.n_out + 1 - self.pool).pow(3) * last.c_out
    }

    pub fn tensor_specs(&self) -> Result<Vec<TensorSpec>, EncoderError> {
        let plan = self.plan()?;
        let taps = KERNEL.pow(3);
        let mut specs = Vec::new();
        for (l, p) in plan.iter().enumerate() {
            specs.push(TensorSpec::weight(format!("shape.conv{}.weight", l + 1), vec![p.c_out, p.c_in, KERNEL, KERNEL, KERNEL], p.c_in * taps));
            specs.push(TensorSpec::bias(format!("shape.conv{}.bias", l + 1), p.c_out));
        }
        let flat = self.flat_dim(&plan);
        specs.push(TensorSpec::weight("shape.fc.weight", vec![self.out_dim, flat], flat));
        specs.push(TensorSpec::bias("shape.fc.bias", self.out_dim));
        Ok(specs)
    }

    pub fn param_count(&self) -> Result<usize, EncoderError> {
        let plan = self.plan()?;
        let convs: usize = plan.iter().map(|p| p.c_out * (p.c_in * KERNEL.pow(3) + 1)).sum();
        Ok(convs + self.out_dim * (self.flat_dim(&plan) + 1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeEncoder<T> {
    pub arch: ShapeArch,
    pub params: ParamSet<T>,
}

/// Activations kept for the backward pass of one grid.
#[derive(Debug, Clone)]
pub struct ShapeCache<T> {
    /// Input of every convolution followed by the last convolution output.
    acts: Vec<Vec<T>>,
    pool_arg: Vec<usize>,
    pooled: Vec<T>,
    out: Vec<T>,
    norm: T,
}

impl<T: Real> ShapeEncoder<T> {
    pub fn new(arch: ShapeArch, params: ParamSet<T>) -> Result<Self, EncoderError> {
        if params.specs() != arch.tensor_specs()?.as_slice() {
            return Err(EncoderError::Shape("shape parameters do not match the architecture".into()));
        }
        Ok(Self { arch, params })
    }

    pub fn seeded(arch: ShapeArch, seed: u64) -> Result<Self, EncoderError> {
        let params = ParamSet::seeded(arch.tensor_specs()?, seed);
        Ok(Self { arch, params })
    }

    pub fn cast<U: Real>(&self) -> ShapeEncoder<U> {
        ShapeEncoder { arch: self.arch.clone(), params: self.params.cast() }
    }

    pub fn forward(&self, grid: &VoxelGrid) -> Result<(Vec<T>, ShapeCache<T>), EncoderError> {
        if grid.resolution() != self.arch.resolution {
            return Err(EncoderError::Resolution { expected: self.arch.resolution, actual: grid.resolution() });
        }
        let plan = self.arch.plan()?;
        let mut x: Vec<T> = grid.occupancy().iter().map(|&v| if v != 0 { T::one() } else { T::zero() }).collect();
        let mut acts = Vec::with_capacity(plan.len() + 1);
        for (l, p) in plan.iter().enumerate() {
            let geom = Conv3dGeom { n_in: p.n_in, c_in: p.c_in, kernel: KERNEL, stride: p.stride, pad: p.pad };
            let cols = geom.im2col(&x);
            let mut y = linear(&cols, p.n_out.pow(3), self.params.tensor(2 * l), self.params.tensor(2 * l + 1), geom.col_width(), p.c_out);
            relu_in_place(&mut y);
            acts.push(std::mem::replace(&mut x, y));
        }
        let last = plan.last().expect("nonempty plan");
        let (pooled, pool_arg) = max_pool_3d(&x, last.n_out, last.c_out, self.arch.pool);
        acts.push(x);
        let fc = 2 * plan.len();
        let f = linear(&pooled, 1, self.params.tensor(fc), self.params.tensor(fc + 1), pooled.len(), self.arch.out_dim);
        let (out, norm) = l2_normalize(&f);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(EncoderError::NonFinite("shape embedding".into()));
        }
        Ok((out.clone(), ShapeCache { acts, pool_arg, pooled, out, norm }))
    }

    /// Adds the gradient of `⟨d_out, embedding⟩` to `grads`.
    pub fn backward(&self, cache: &ShapeCache<T>, d_out: &[T], grads: &mut ParamSet<T>) {
        let plan = self.arch.plan().expect("validated at construction");
        let fc = 2 * plan.len();
        let df = l2_normalize_backward(&cache.out, cache.norm, d_out);
        let d_pooled = {
            let (dw, db) = split_pair(grads, fc);
            linear_backward(&cache.pooled, &df, 1, self.params.tensor(fc), cache.pooled.len(), self.arch.out_dim, dw, db, true).expect("dx")
        };
        let mut dx = max_pool_3d_backward(&d_pooled, &cache.pool_arg, cache.acts[plan.len()].len());
        for (l, p) in plan.iter().enumerate().rev() {
            relu_backward_in_place(&mut dx, &cache.acts[l + 1]);
            let geom = Conv3dGeom { n_in: p.n_in, c_in: p.c_in, kernel: KERNEL, stride: p.stride, pad: p.pad };
            let cols = geom.im2col(&cache.acts[l]);
            let (dw, db) = split_pair(grads, 2 * l);
            let dcols = linear_backward(&cols, &dx, p.n_out.pow(3), self.params.tensor(2 * l), geom.col_width(), p.c_out, dw, db, l > 0);
            if let Some(dcols) = dcols {
                dx = geom.col2im(&dcols);
            }
        }
    }
}
