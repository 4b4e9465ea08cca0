//! Numeric kernels: convolution through im2col + GEMM, pooling, resampling.

use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvSpec {
    pub fn same(in_c: usize, out_c: usize, k: usize) -> Self {
        Self { in_c, out_c, k, stride: 1, pad: k / 2 }
    }

    pub fn strided(in_c: usize, out_c: usize, k: usize, stride: usize) -> Self {
        Self { in_c, out_c, k, stride, pad: k / 2 }
    }

    pub fn out_dim(&self, h: usize, w: usize) -> (usize, usize) {
        ((h + 2 * self.pad - self.k) / self.stride + 1, (w + 2 * self.pad - self.k) / self.stride + 1)
    }

    pub fn weight_len(&self) -> usize {
        self.out_c * self.in_c * self.k * self.k
    }

    fn is_pointwise(&self) -> bool {
        self.k == 1 && self.stride == 1 && self.pad == 0
    }
}

/// `c = a * b + beta * c` with row-major operands, optionally transposed.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, beta: f64, c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the slices cover exactly the m*k, k*n and m*n elements the strides address.
    unsafe {
        matrixmultiply::dgemm(m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize, 1);
    }
}

/// Strided `c = a * b + beta * c` where row `i` of `c` starts at `i * rsc`.
#[allow(clippy::too_many_arguments)]
fn gemm_strided(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    rsc: usize,
) {
    assert!(m == 0 || n == 0 || (m - 1) * rsc + n <= c.len());
    assert!(m == 0 || k == 0 || (m - 1) * rsa + (k - 1) * csa < a.len());
    assert!(k == 0 || n == 0 || (k - 1) * rsb + (n - 1) * csb < b.len());
    // SAFETY: the assertions above bound every element the strides address.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            1,
        );
    }
}

/// Output rows per im2col tile, sized to keep a tile near 256 KiB.
fn tile_rows(ckk: usize, wo: usize) -> usize {
    (32768 / (ckk * wo).max(1)).max(1)
}

/// Unfolds output rows `oy0..oy1` into `cols`, laid out `[ckk, (oy1 - oy0) * wo]`.
#[allow(clippy::too_many_arguments)]
fn im2col(x: &[f64], h: usize, w: usize, spec: &ConvSpec, oy0: usize, oy1: usize, wo: usize, cols: &mut [f64]) {
    let (k, stride, pad) = (spec.k, spec.stride, spec.pad as isize);
    let rows = oy1 - oy0;
    for c in 0..spec.in_c {
        let plane = &x[c * h * w..(c + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = &mut cols[((c * k + ki) * k + kj) * rows * wo..][..rows * wo];
                // Output columns whose input column lies inside the image.
                let off = kj as isize - pad;
                let lo = if off >= 0 { 0 } else { ((-off) as usize).div_ceil(stride) };
                let hi = if (w as isize) > off { (((w as isize - off) as usize).div_ceil(stride)).min(wo) } else { 0 };
                for oy in oy0..oy1 {
                    let iy = (oy * stride + ki) as isize - pad;
                    let dst = &mut row[(oy - oy0) * wo..(oy - oy0 + 1) * wo];
                    if iy < 0 || iy >= h as isize || lo >= hi {
                        dst.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                    dst[..lo].fill(0.0);
                    dst[hi..].fill(0.0);
                    let start = (lo as isize * stride as isize + off) as usize;
                    if stride == 1 {
                        dst[lo..hi].copy_from_slice(&src[start..start + hi - lo]);
                    } else {
                        for (d, s) in dst[lo..hi].iter_mut().zip(src[start..].iter().step_by(stride)) {
                            *d = *s;
                        }
                    }
                }
            }
        }
    }
}

fn col2im(cols: &[f64], h: usize, w: usize, spec: &ConvSpec, ho: usize, wo: usize, dx: &mut [f64]) {
    let k = spec.k;
    for c in 0..spec.in_c {
        let plane = &mut dx[c * h * w..(c + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = &cols[((c * k + ki) * k + kj) * ho * wo..][..ho * wo];
                for oy in 0..ho {
                    let iy = (oy * spec.stride + ki) as isize - spec.pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, &g) in row[oy * wo..(oy + 1) * wo].iter().enumerate() {
                        let ix = (ox * spec.stride + kj) as isize - spec.pad as isize;
                        if ix >= 0 && ix < w as isize {
                            dst[ix as usize] += g;
                        }
                    }
                }
            }
        }
    }
}

pub fn conv2d(x: &Tensor, weight: &[f64], bias: &[f64], spec: &ConvSpec) -> Tensor {
    let [n, c, h, w] = x.shape();
    assert_eq!(c, spec.in_c, "conv input channels");
    let (ho, wo) = spec.out_dim(h, w);
    let hw = ho * wo;
    let ckk = spec.in_c * spec.k * spec.k;
    let mut out = Tensor::zeros([n, spec.out_c, ho, wo]);
    let tile = tile_rows(ckk, wo);
    let mut cols = if spec.is_pointwise() { Vec::new() } else { vec![0.0; ckk * tile.min(ho) * wo] };
    for i in 0..n {
        let o = out.item_mut(i);
        for (co, &b) in bias.iter().enumerate() {
            o[co * hw..(co + 1) * hw].fill(b);
        }
        if spec.is_pointwise() {
            gemm(spec.out_c, ckk, hw, weight, false, x.item(i), false, 1.0, o);
            continue;
        }
        for oy0 in (0..ho).step_by(tile) {
            let oy1 = (oy0 + tile).min(ho);
            let len = (oy1 - oy0) * wo;
            im2col(x.item(i), h, w, spec, oy0, oy1, wo, &mut cols);
            gemm_strided(spec.out_c, ckk, len, weight, (ckk, 1), &cols[..ckk * len], (len, 1), 1.0, &mut o[oy0 * wo..], hw);
        }
    }
    out
}

/// Gradient of a convolution. Accumulates into `grads` (weight, bias) when
/// given and returns the gradient with respect to the input.
pub fn conv2d_backward(
    x: &Tensor,
    weight: &[f64],
    gout: &Tensor,
    spec: &ConvSpec,
    mut grads: Option<(&mut [f64], &mut [f64])>,
) -> Tensor {
    let [n, _, h, w] = x.shape();
    let [_, _, ho, wo] = gout.shape();
    let ckk = spec.in_c * spec.k * spec.k;
    let transposed = spec.stride == 1 && 2 * spec.pad + 1 == spec.k && !spec.is_pointwise();
    if transposed {
        accumulate_weight_grads(x, gout, spec, grads);
        // Stride-1 "same" convolutions: the input gradient is the output
        // gradient convolved with the channel-transposed, flipped kernel.
        let k = spec.k;
        let mut flipped = vec![0.0; weight.len()];
        for co in 0..spec.out_c {
            for ci in 0..spec.in_c {
                for ki in 0..k {
                    for kj in 0..k {
                        flipped[((ci * spec.out_c + co) * k + (k - 1 - ki)) * k + (k - 1 - kj)] =
                            weight[((co * spec.in_c + ci) * k + ki) * k + kj];
                    }
                }
            }
        }
        let back = ConvSpec { in_c: spec.out_c, out_c: spec.in_c, ..*spec };
        return conv2d(gout, &flipped, &vec![0.0; spec.in_c], &back);
    }
    let mut dx = Tensor::zeros(x.shape());
    let mut cols = if spec.is_pointwise() { Vec::new() } else { vec![0.0; ckk * ho * wo] };
    let mut dcols = vec![0.0; ckk * ho * wo];
    for i in 0..n {
        let g = gout.item(i);
        if let Some((dw, db)) = grads.as_mut() {
            for (co, d) in db.iter_mut().enumerate() {
                *d += g[co * ho * wo..(co + 1) * ho * wo].iter().sum::<f64>();
            }
            let b_mat = if spec.is_pointwise() {
                x.item(i)
            } else {
                im2col(x.item(i), h, w, spec, 0, ho, wo, &mut cols);
                &cols
            };
            gemm(spec.out_c, ho * wo, ckk, g, false, b_mat, true, 1.0, dw);
        }
        if spec.is_pointwise() {
            gemm(ckk, spec.out_c, ho * wo, weight, true, g, false, 0.0, dx.item_mut(i));
        } else {
            gemm(ckk, spec.out_c, ho * wo, weight, true, g, false, 0.0, &mut dcols);
            col2im(&dcols, h, w, spec, ho, wo, dx.item_mut(i));
        }
    }
    dx
}

fn accumulate_weight_grads(x: &Tensor, gout: &Tensor, spec: &ConvSpec, grads: Option<(&mut [f64], &mut [f64])>) {
    let Some((dw, db)) = grads else { return };
    let [n, _, h, w] = x.shape();
    let [_, _, ho, wo] = gout.shape();
    let hw = ho * wo;
    let ckk = spec.in_c * spec.k * spec.k;
    let tile = tile_rows(ckk, wo);
    let mut cols = vec![0.0; ckk * tile.min(ho) * wo];
    for i in 0..n {
        let g = gout.item(i);
        for (co, d) in db.iter_mut().enumerate() {
            *d += g[co * hw..(co + 1) * hw].iter().sum::<f64>();
        }
        if spec.is_pointwise() {
            gemm(spec.out_c, hw, ckk, g, false, x.item(i), true, 1.0, dw);
            continue;
        }
        for oy0 in (0..ho).step_by(tile) {
            let oy1 = (oy0 + tile).min(ho);
            let len = (oy1 - oy0) * wo;
            im2col(x.item(i), h, w, spec, oy0, oy1, wo, &mut cols);
            gemm_strided(spec.out_c, len, ckk, &g[oy0 * wo..], (hw, 1), &cols[..ckk * len], (1, len), 1.0, dw, ckk);
        }
    }
}

/// 2x2 max pooling, stride 2. Returns the output and the flat input index of
/// each maximum.
pub fn maxpool2(x: &Tensor) -> (Tensor, Vec<usize>) {
    let [n, c, h, w] = x.shape();
    let (ho, wo) = (h / 2, w / 2);
    let mut out = Tensor::zeros([n, c, ho, wo]);
    let mut arg = vec![0; n * c * ho * wo];
    let src = x.data();
    for (p, (o, a)) in out.data_mut().chunks_mut(ho * wo).zip(arg.chunks_mut(ho * wo)).enumerate() {
        let base = p * h * w;
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best = base + 2 * oy * w + 2 * ox;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                    if src[idx] > src[best] {
                        best = idx;
                    }
                }
                o[oy * wo + ox] = src[best];
                a[oy * wo + ox] = best;
            }
        }
    }
    (out, arg)
}

pub fn maxpool2_backward(gout: &Tensor, argmax: &[usize], in_shape: [usize; 4]) -> Tensor {
    let mut dx = Tensor::zeros(in_shape);
    let d = dx.data_mut();
    for (&g, &i) in gout.data().iter().zip(argmax) {
        d[i] += g;
    }
    dx
}

/// Nearest-neighbour 2x upsampling.
pub fn upsample2(x: &Tensor) -> Tensor {
    let [n, c, h, w] = x.shape();
    let mut out = Tensor::zeros([n, c, 2 * h, 2 * w]);
    for (o, s) in out.data_mut().chunks_mut(4 * h * w).zip(x.data().chunks(h * w)) {
        for y in 0..2 * h {
            for xx in 0..2 * w {
                o[y * 2 * w + xx] = s[(y / 2) * w + xx / 2];
            }
        }
    }
    out
}

pub fn upsample2_backward(gout: &Tensor) -> Tensor {
    let [n, c, h2, w2] = gout.shape();
    let (h, w) = (h2 / 2, w2 / 2);
    let mut dx = Tensor::zeros([n, c, h, w]);
    for (d, g) in dx.data_mut().chunks_mut(h * w).zip(gout.data().chunks(h2 * w2)) {
        for y in 0..h2 {
            for x in 0..w2 {
                d[(y / 2) * w + x / 2] += g[y * w2 + x];
            }
        }
    }
    dx
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}
