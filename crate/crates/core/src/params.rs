//! Learnable tensors, their canonical names and initialization.

use ndarray::{Array1, Array2};
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::datamodel::{AblationFlags, Config, SgnRng};
use crate::scalar::Scalar;

/// Tensor widths of one model instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub vocab: usize,
    pub d_w: usize,
    pub d_v: usize,
    pub d_h: usize,
    pub d_s: usize,
    pub d_att: usize,
    pub max_len: usize,
    pub enc_layers: usize,
    pub positional: bool,
    /// Attention targets are semantic groups (`true`) or raw frames.
    pub semantic: bool,
}

impl ModelDims {
    pub fn from_config(cfg: &Config, vocab: usize, flags: AblationFlags) -> Self {
        ModelDims {
            vocab,
            d_w: cfg.d_w,
            d_v: cfg.d_v(),
            d_h: cfg.d_h,
            d_s: cfg.d_s(),
            d_att: cfg.d_att(),
            max_len: cfg.max_len,
            enc_layers: cfg.enc_layers,
            positional: cfg.positional,
            semantic: flags.use_semantic_aligner,
        }
    }

    /// Width of one attention target of the decoder.
    pub fn key_dim(&self) -> usize {
        if self.semantic {
            self.d_w + self.d_v
        } else {
            self.d_v
        }
    }

    pub fn lstm_input(&self) -> usize {
        self.key_dim() + self.d_w
    }
}

/// One single-head self-attention layer; projections act as `X · W`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfAttnLayer<T> {
    pub q: Array2<T>,
    pub k: Array2<T>,
    pub v: Array2<T>,
}

/// Additive attention `uᵀ tanh(Wq·q + Wk·k + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveAttn<T> {
    pub u: Array1<T>,
    pub wq: Array2<T>,
    pub wk: Array2<T>,
    pub b: Array1<T>,
}

/// Gate order in the stacked weights: input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell<T> {
    pub w_ih: Array2<T>,
    pub w_hh: Array2<T>,
    pub b: Array1<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub embed: Array2<T>,
    pub pos: Array2<T>,
    pub enc: Vec<SelfAttnLayer<T>>,
    /// Phrase/frame relevance (shared by alignment and the contrastive loss).
    pub align: AdditiveAttn<T>,
    /// Decoder attention over semantic groups (or frames in TA mode).
    pub group: AdditiveAttn<T>,
    pub lstm: LstmCell<T>,
    pub out_w: Array2<T>,
    pub out_b: Array1<T>,
}

pub(crate) fn uniform_mat<T: Scalar>(rows: usize, cols: usize, limit: f64, rng: &mut SgnRng) -> Array2<T> {
    let dist = Uniform::new(-limit, limit).expect("valid range");
    Array2::from_shape_simple_fn((rows, cols), || T::lit(dist.sample(rng)))
}

fn uniform_vec<T: Scalar>(n: usize, limit: f64, rng: &mut SgnRng) -> Array1<T> {
    let dist = Uniform::new(-limit, limit).expect("valid range");
    Array1::from_shape_simple_fn(n, || T::lit(dist.sample(rng)))
}

fn glorot(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl<T: Scalar> AdditiveAttn<T> {
    fn init(d: usize, dq: usize, dk: usize, rng: &mut SgnRng) -> Self {
        AdditiveAttn {
            u: uniform_vec(d, glorot(d, 1), rng),
            wq: uniform_mat(d, dq, glorot(dq, d), rng),
            wk: uniform_mat(d, dk, glorot(dk, d), rng),
            b: Array1::zeros(d),
        }
    }

    fn zeros_like(&self) -> Self {
        AdditiveAttn {
            u: Array1::zeros(self.u.raw_dim()),
            wq: Array2::zeros(self.wq.raw_dim()),
            wk: Array2::zeros(self.wk.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
        }
    }
}

impl<T: Scalar> Params<T> {
    /// Embeddings and positions ~ U(-0.1, 0.1), weights Glorot-uniform,
    /// biases zero except the LSTM forget gate (1).
    pub fn init(dims: &ModelDims, rng: &mut SgnRng) -> Self {
        let d_w = dims.d_w;
        let h = dims.d_h;
        let embed = uniform_mat(dims.vocab, d_w, 0.1, rng);
        let pos = uniform_mat(dims.max_len + 1, d_w, 0.1, rng);
        let enc = (0..dims.enc_layers)
            .map(|_| SelfAttnLayer {
                q: uniform_mat(d_w, d_w, glorot(d_w, d_w), rng),
                k: uniform_mat(d_w, d_w, glorot(d_w, d_w), rng),
                v: uniform_mat(d_w, d_w, glorot(d_w, d_w), rng),
            })
            .collect();
        let align = AdditiveAttn::init(dims.d_s, d_w, dims.d_v, rng);
        let group = AdditiveAttn::init(dims.d_att, h, dims.key_dim(), rng);
        let lim = glorot(dims.lstm_input() + h, 4 * h);
        let mut b = Array1::zeros(4 * h);
        b.slice_mut(ndarray::s![h..2 * h]).fill(T::one());
        let lstm = LstmCell {
            w_ih: uniform_mat(4 * h, dims.lstm_input(), lim, rng),
            w_hh: uniform_mat(4 * h, h, lim, rng),
            b,
        };
        let out_w = uniform_mat(dims.vocab, h, glorot(h, dims.vocab), rng);
        let out_b = Array1::zeros(dims.vocab);
        Params {
            embed,
            pos,
            enc,
            align,
            group,
            lstm,
            out_w,
            out_b,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Params {
            embed: Array2::zeros(self.embed.raw_dim()),
            pos: Array2::zeros(self.pos.raw_dim()),
            enc: self
                .enc
                .iter()
                .map(|l| SelfAttnLayer {
                    q: Array2::zeros(l.q.raw_dim()),
                    k: Array2::zeros(l.k.raw_dim()),
                    v: Array2::zeros(l.v.raw_dim()),
                })
                .collect(),
            align: self.align.zeros_like(),
            group: self.group.zeros_like(),
            lstm: LstmCell {
                w_ih: Array2::zeros(self.lstm.w_ih.raw_dim()),
                w_hh: Array2::zeros(self.lstm.w_hh.raw_dim()),
                b: Array1::zeros(self.lstm.b.raw_dim()),
            },
            out_w: Array2::zeros(self.out_w.raw_dim()),
            out_b: Array1::zeros(self.out_b.raw_dim()),
        }
    }

    /// Canonical `(name, shape)` list; the order is stable and used by checkpoints.
    pub fn shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = vec![
            ("embed".to_string(), self.embed.shape().to_vec()),
            ("pos".to_string(), self.pos.shape().to_vec()),
        ];
        for (i, l) in self.enc.iter().enumerate() {
            out.push((format!("enc.{i}.q"), l.q.shape().to_vec()));
            out.push((format!("enc.{i}.k"), l.k.shape().to_vec()));
            out.push((format!("enc.{i}.v"), l.v.shape().to_vec()));
        }
        for (prefix, a) in [("align", &self.align), ("group", &self.group)] {
            out.push((format!("{prefix}.u"), a.u.shape().to_vec()));
            out.push((format!("{prefix}.wq"), a.wq.shape().to_vec()));
            out.push((format!("{prefix}.wk"), a.wk.shape().to_vec()));
            out.push((format!("{prefix}.b"), a.b.shape().to_vec()));
        }
        out.push(("lstm.w_ih".into(), self.lstm.w_ih.shape().to_vec()));
        out.push(("lstm.w_hh".into(), self.lstm.w_hh.shape().to_vec()));
        out.push(("lstm.b".into(), self.lstm.b.shape().to_vec()));
        out.push(("out.w".into(), self.out_w.shape().to_vec()));
        out.push(("out.b".into(), self.out_b.shape().to_vec()));
        out
    }

    /// Flat views in [`Params::shapes`] order.
    pub fn slices(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = vec![slice(&self.embed), slice(&self.pos)];
        for l in &self.enc {
            out.extend([slice(&l.q), slice(&l.k), slice(&l.v)]);
        }
        for a in [&self.align, &self.group] {
            out.extend([slice(&a.u), slice(&a.wq), slice(&a.wk), slice(&a.b)]);
        }
        out.extend([
            slice(&self.lstm.w_ih),
            slice(&self.lstm.w_hh),
            slice(&self.lstm.b),
            slice(&self.out_w),
            slice(&self.out_b),
        ]);
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [T]> {
        let Params {
            embed,
            pos,
            enc,
            align,
            group,
            lstm,
            out_w,
            out_b,
        } = self;
        let mut out: Vec<&mut [T]> = vec![slice_mut(embed), slice_mut(pos)];
        for l in enc.iter_mut() {
            out.extend([slice_mut(&mut l.q), slice_mut(&mut l.k), slice_mut(&mut l.v)]);
        }
        for a in [align, group] {
            out.extend([
                slice_mut(&mut a.u),
                slice_mut(&mut a.wq),
                slice_mut(&mut a.wk),
                slice_mut(&mut a.b),
            ]);
        }
        out.extend([
            slice_mut(&mut lstm.w_ih),
            slice_mut(&mut lstm.w_hh),
            slice_mut(&mut lstm.b),
            slice_mut(out_w),
            slice_mut(out_b),
        ]);
        out
    }

    pub fn len(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for a in self.slices_mut() {
            for x in a.iter_mut() {
                *x *= s;
            }
        }
    }

    pub fn l2_norm(&self) -> T {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|&x| x * x)
            .sum::<T>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|x| x.is_finite()))
    }

    pub fn cast<U: Scalar>(&self) -> Params<U> {
        let mut out = Params::<U> {
            embed: self.embed.mapv(|v| U::lit(v.as_f64())),
            pos: self.pos.mapv(|v| U::lit(v.as_f64())),
            enc: Vec::new(),
            align: cast_attn(&self.align),
            group: cast_attn(&self.group),
            lstm: LstmCell {
                w_ih: self.lstm.w_ih.mapv(|v| U::lit(v.as_f64())),
                w_hh: self.lstm.w_hh.mapv(|v| U::lit(v.as_f64())),
                b: self.lstm.b.mapv(|v| U::lit(v.as_f64())),
            },
            out_w: self.out_w.mapv(|v| U::lit(v.as_f64())),
            out_b: self.out_b.mapv(|v| U::lit(v.as_f64())),
        };
        out.enc = self
            .enc
            .iter()
            .map(|l| SelfAttnLayer {
                q: l.q.mapv(|v| U::lit(v.as_f64())),
                k: l.k.mapv(|v| U::lit(v.as_f64())),
                v: l.v.mapv(|v| U::lit(v.as_f64())),
            })
            .collect();
        out
    }
}

fn cast_attn<T: Scalar, U: Scalar>(a: &AdditiveAttn<T>) -> AdditiveAttn<U> {
    AdditiveAttn {
        u: a.u.mapv(|v| U::lit(v.as_f64())),
        wq: a.wq.mapv(|v| U::lit(v.as_f64())),
        wk: a.wk.mapv(|v| U::lit(v.as_f64())),
        b: a.b.mapv(|v| U::lit(v.as_f64())),
    }
}

fn slice<T, D: ndarray::Dimension>(a: &ndarray::Array<T, D>) -> &[T] {
    a.as_slice().expect("parameters are contiguous")
}

fn slice_mut<T, D: ndarray::Dimension>(a: &mut ndarray::Array<T, D>) -> &mut [T] {
    a.as_slice_mut().expect("parameters are contiguous")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> ModelDims {
        let cfg = Config {
            d_w: 4,
            d_h: 5,
            d_a: 2,
            d_m: 1,
            max_len: 6,
            ..Config::default()
        };
        ModelDims::from_config(&cfg, 9, AblationFlags::FULL)
    }

    #[test]
    fn names_shapes_and_slices_agree() {
        let mut rng = SgnRng::seed_from_u64(0);
        let p = Params::<f64>::init(&dims(), &mut rng);
        let shapes = p.shapes();
        let slices = p.slices();
        assert_eq!(shapes.len(), slices.len());
        for ((name, shape), s) in shapes.iter().zip(&slices) {
            assert_eq!(shape.iter().product::<usize>(), s.len(), "{name}");
        }
        assert!(p.embed.iter().all(|v| v.abs() < 0.1));
        assert_eq!(p.lstm.w_ih.ncols(), 4 + 3 + 4);
    }

    #[test]
    fn init_is_deterministic() {
        let a = Params::<f32>::init(&dims(), &mut SgnRng::seed_from_u64(3));
        let b = Params::<f32>::init(&dims(), &mut SgnRng::seed_from_u64(3));
        assert_eq!(a, b);
    }
}
