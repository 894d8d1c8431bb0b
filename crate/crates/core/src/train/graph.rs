//! Real-valued forward and backward passes mirroring the integer engine's
//! layer order and weight layout.

use crate::network::{Layout, ParamSet};

/// Cached intermediate values of one forward pass.
#[derive(Debug, Default)]
pub(super) struct Tape {
    /// Input of every weighted layer, the frame first.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation output of every weighted layer, head last.
    pre: Vec<Vec<f64>>,
}

pub(super) struct Graph<'a> {
    pub layout: &'a Layout,
    pub slope: f64,
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        x * slope
    }
}

impl Graph<'_> {
    /// Returns the head logit.
    pub fn forward(&self, params: &ParamSet, frame: &[f64], tape: &mut Tape) -> f64 {
        tape.inputs.clear();
        tape.pre.clear();
        let mut x = frame.to_vec();
        let n_dense = self.layout.dense.len();
        for ((g, (h, w)), p) in self.layout.convs.iter().zip(&params.convs) {
            let (ho, wo) = g.output_size(*h, *w).expect("layout validated");
            let k = g.kernel;
            let mut y = vec![0.0; g.out_channels * ho * wo];
            for co in 0..g.out_channels {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let mut acc = p.bias[co];
                        for ci in 0..g.in_channels {
                            for ky in 0..k {
                                let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                                if iy < 0 || iy >= *h as isize {
                                    continue;
                                }
                                for kx in 0..k {
                                    let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                                    if ix < 0 || ix >= *w as isize {
                                        continue;
                                    }
                                    acc += p.weights[((co * g.in_channels + ci) * k + ky) * k + kx]
                                        * x[(ci * h + iy as usize) * w + ix as usize];
                                }
                            }
                        }
                        y[(co * ho + oy) * wo + ox] = acc;
                    }
                }
            }
            let next = y.iter().map(|&v| leaky(v, self.slope)).collect();
            tape.inputs.push(std::mem::replace(&mut x, next));
            tape.pre.push(y);
        }
        for (j, (&(n_in, n_out), p)) in self.layout.dense.iter().zip(&params.dense).enumerate() {
            let y: Vec<f64> = (0..n_out)
                .map(|o| {
                    p.bias[o] + p.weights[o * n_in..(o + 1) * n_in].iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect();
            let next = if j + 1 < n_dense { y.iter().map(|&v| leaky(v, self.slope)).collect() } else { y.clone() };
            tape.inputs.push(std::mem::replace(&mut x, next));
            tape.pre.push(y);
        }
        x[0]
    }

    /// Accumulate `d_logit · ∂logit/∂params` into `grad`, using the weights
    /// the forward pass ran with.
    pub fn backward(&self, params: &ParamSet, tape: &Tape, d_logit: f64, grad: &mut ParamSet) {
        let n_conv = self.layout.convs.len();
        let n_dense = self.layout.dense.len();
        let mut dy = vec![d_logit];
        for j in (0..n_dense).rev() {
            let (n_in, n_out) = self.layout.dense[j];
            let p = &params.dense[j];
            let g = &mut grad.dense[j];
            let x = &tape.inputs[n_conv + j];
            let mut dx = vec![0.0; n_in];
            for (o, &d) in dy.iter().enumerate().take(n_out) {
                if d == 0.0 {
                    continue;
                }
                g.bias[o] += d;
                let row = o * n_in..(o + 1) * n_in;
                for ((gw, &w), (&xi, dxi)) in
                    g.weights[row.clone()].iter_mut().zip(&p.weights[row]).zip(x.iter().zip(dx.iter_mut()))
                {
                    *gw += d * xi;
                    *dxi += d * w;
                }
            }
            dy = self.through_activation(dx, (n_conv + j).checked_sub(1).map(|i| tape.pre[i].as_slice()));
        }
        for l in (0..n_conv).rev() {
            let (g, (h, w)) = &self.layout.convs[l];
            let (h, w) = (*h, *w);
            let (ho, wo) = g.output_size(h, w).expect("layout validated");
            let k = g.kernel;
            let p = &params.convs[l];
            let gr = &mut grad.convs[l];
            let x = &tape.inputs[l];
            let mut dx = vec![0.0; g.in_channels * h * w];
            for co in 0..g.out_channels {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let d = dy[(co * ho + oy) * wo + ox];
                        if d == 0.0 {
                            continue;
                        }
                        gr.bias[co] += d;
                        for ci in 0..g.in_channels {
                            for ky in 0..k {
                                let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                for kx in 0..k {
                                    let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                                    if ix < 0 || ix >= w as isize {
                                        continue;
                                    }
                                    let wi = ((co * g.in_channels + ci) * k + ky) * k + kx;
                                    let xi = (ci * h + iy as usize) * w + ix as usize;
                                    gr.weights[wi] += d * x[xi];
                                    dx[xi] += d * p.weights[wi];
                                }
                            }
                        }
                    }
                }
            }
            dy = self.through_activation(dx, l.checked_sub(1).map(|i| tape.pre[i].as_slice()));
        }
    }

    /// Map a gradient w.r.t. a layer's input back through the activation of
    /// the layer that produced it; the frame has no activation.
    fn through_activation(&self, mut dx: Vec<f64>, prev_pre: Option<&[f64]>) -> Vec<f64> {
        if let Some(pre) = prev_pre {
            for (d, &z) in dx.iter_mut().zip(pre) {
                if z < 0.0 {
                    *d *= self.slope;
                }
            }
        }
        dx
    }
}
