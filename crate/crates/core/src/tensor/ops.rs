use super::{Tensor, TensorError};

/// Most negative finite float32; the neutral element of `max` on finite data.
pub const MIN_F: f32 = f32::MIN;

/// Border sizes `(top, bottom, left, right)` and the fill value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaddingSpec {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
    pub fill: f32,
}

impl PaddingSpec {
    pub fn new(top: usize, bottom: usize, left: usize, right: usize, fill: f32) -> Self {
        PaddingSpec {
            top,
            bottom,
            left,
            right,
            fill,
        }
    }

    pub fn none() -> Self {
        PaddingSpec::new(0, 0, 0, 0, 0.0)
    }
}

/// Pooling window `(k_h, k_w)` and stride `(s_h, s_w)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolSpec {
    pub kh: usize,
    pub kw: usize,
    pub sh: usize,
    pub sw: usize,
}

impl PoolSpec {
    pub fn new(kh: usize, kw: usize, sh: usize, sw: usize) -> Self {
        PoolSpec { kh, kw, sh, sw }
    }
}

/// Keeps a leading batch-1 dimension when the input had one.
fn image_shape(like: &Tensor, c: usize, h: usize, w: usize) -> Vec<usize> {
    if like.shape().len() == 4 {
        vec![1, c, h, w]
    } else {
        vec![c, h, w]
    }
}

/// Surrounds every channel plane with a border of `spec.fill`.
pub fn pad(input: &Tensor, spec: &PaddingSpec) -> Result<Tensor, TensorError> {
    let (c, h, w) = input.chw()?;
    let oh = h + spec.top + spec.bottom;
    let ow = w + spec.left + spec.right;
    let src = input.data();
    let mut data = vec![spec.fill; c * oh * ow];
    for z in 0..c {
        for x in 0..h {
            let from = (z * h + x) * w;
            let to = (z * oh + x + spec.top) * ow + spec.left;
            data[to..to + w].copy_from_slice(&src[from..from + w]);
        }
    }
    Tensor::new(image_shape(input, c, oh, ow), data)
}

fn pooled_extent(n: usize, k: usize, s: usize) -> usize {
    (n - k) / s + 1
}

/// Max over each `k_h x k_w` window, stepping by the stride, without padding.
pub fn pool(input: &Tensor, spec: &PoolSpec) -> Result<Tensor, TensorError> {
    if spec.kh == 0 || spec.kw == 0 || spec.sh == 0 || spec.sw == 0 {
        return Err(TensorError::InvalidParameter(format!(
            "window and stride must be positive: {spec:?}"
        )));
    }
    let (c, h, w) = input.chw()?;
    if spec.kh > h || spec.kw > w {
        return Err(TensorError::WindowTooLarge {
            window: (spec.kh, spec.kw),
            extent: (h, w),
        });
    }
    let oh = pooled_extent(h, spec.kh, spec.sh);
    let ow = pooled_extent(w, spec.kw, spec.sw);
    let src = input.data();
    let mut data = Vec::with_capacity(c * oh * ow);
    for z in 0..c {
        for x in 0..oh {
            for y in 0..ow {
                let mut acc = MIN_F;
                for dx in 0..spec.kh {
                    let row = (z * h + x * spec.sh + dx) * w + y * spec.sw;
                    for &v in &src[row..row + spec.kw] {
                        if v > acc {
                            acc = v;
                        }
                    }
                }
                data.push(acc);
            }
        }
    }
    Tensor::new(image_shape(input, c, oh, ow), data)
}

fn non_negative(name: &str, v: i64) -> Result<usize, TensorError> {
    usize::try_from(v).map_err(|_| TensorError::InvalidParameter(format!("{name} = {v}")))
}

fn positive(name: &str, v: i64) -> Result<usize, TensorError> {
    match non_negative(name, v)? {
        0 => Err(TensorError::InvalidParameter(format!("{name} = 0"))),
        n => Ok(n),
    }
}

/// Resolved spatial parameters of a `max_pool` call.
pub(crate) struct MaxPoolParams {
    pub pool: PoolSpec,
    pub pad: PaddingSpec,
}

pub(crate) fn max_pool_params(
    rank: usize,
    size: &[i64],
    stride: &[i64],
    dilation: &[i64],
    padding: &[(i64, i64)],
    border: &str,
) -> Result<MaxPoolParams, TensorError> {
    if border != "ignore" {
        return Err(TensorError::UnsupportedBorder(border.to_string()));
    }
    if dilation.iter().any(|&d| d != 1) {
        return Err(TensorError::UnsupportedDilation(dilation.to_vec()));
    }
    for (name, len) in [
        ("size", size.len()),
        ("stride", stride.len()),
        ("dilation", dilation.len()),
        ("padding", padding.len()),
    ] {
        if len != rank {
            return Err(TensorError::InvalidParameter(format!(
                "{name} has {len} entries for a rank-{rank} input"
            )));
        }
    }
    let lead = rank - 2;
    for i in 0..lead {
        if size[i] != 1 || stride[i] != 1 || padding[i] != (0, 0) {
            return Err(TensorError::InvalidParameter(format!(
                "pooling over batch/channel axes is not supported (axis {i})"
            )));
        }
    }
    let pool = PoolSpec::new(
        positive("size", size[lead])?,
        positive("size", size[lead + 1])?,
        positive("stride", stride[lead])?,
        positive("stride", stride[lead + 1])?,
    );
    let pad = PaddingSpec::new(
        non_negative("padding", padding[lead].0)?,
        non_negative("padding", padding[lead].1)?,
        non_negative("padding", padding[lead + 1].0)?,
        non_negative("padding", padding[lead + 1].1)?,
        MIN_F,
    );
    Ok(MaxPoolParams { pool, pad })
}

/// `max_pool` fragment with border `'ignore'`: cells outside the input are
/// skipped, which is the same as padding with `MIN_F` and pooling.
pub fn max_pool(
    input: &Tensor,
    size: &[i64],
    stride: &[i64],
    dilation: &[i64],
    padding: &[(i64, i64)],
    border: &str,
) -> Result<Tensor, TensorError> {
    let (c, h, w) = input.chw()?;
    let MaxPoolParams { pool: k, pad: p } =
        max_pool_params(input.shape().len(), size, stride, dilation, padding, border)?;
    let ph = h + p.top + p.bottom;
    let pw = w + p.left + p.right;
    if k.kh > ph || k.kw > pw {
        return Err(TensorError::WindowTooLarge {
            window: (k.kh, k.kw),
            extent: (ph, pw),
        });
    }
    let oh = pooled_extent(ph, k.kh, k.sh);
    let ow = pooled_extent(pw, k.kw, k.sw);
    let src = input.data();
    let mut data = Vec::with_capacity(c * oh * ow);
    for z in 0..c {
        for x in 0..oh {
            for y in 0..ow {
                let mut acc = MIN_F;
                for dx in 0..k.kh {
                    let Some(ix) = (x * k.sh + dx).checked_sub(p.top).filter(|&i| i < h) else {
                        continue;
                    };
                    for dy in 0..k.kw {
                        let Some(iy) = (y * k.sw + dy).checked_sub(p.left).filter(|&i| i < w)
                        else {
                            continue;
                        };
                        let v = src[(z * h + ix) * w + iy];
                        if v > acc {
                            acc = v;
                        }
                    }
                }
                data.push(acc);
            }
        }
    }
    Tensor::new(image_shape(input, c, oh, ow), data)
}

/// Spatial output size of a convolution; shared with shape inference.
pub(crate) struct ConvGeometry {
    pub out_c: usize,
    pub in_c: usize,
    pub kh: usize,
    pub kw: usize,
    pub sh: usize,
    pub sw: usize,
    pub pad: [usize; 4],
    pub oh: usize,
    pub ow: usize,
}

pub(crate) fn conv_geometry(
    input: &[usize],
    filter: &[usize],
    bias_len: usize,
    stride: &[i64],
    dilation: &[i64],
    padding: &[(i64, i64)],
    groups: i64,
) -> Result<ConvGeometry, TensorError> {
    if groups != 1 {
        return Err(TensorError::UnsupportedGroups(groups));
    }
    if dilation.iter().any(|&d| d != 1) {
        return Err(TensorError::UnsupportedDilation(dilation.to_vec()));
    }
    let (c, h, w) = match input {
        [1, c, h, w] => (*c, *h, *w),
        [c, h, w] => (*c, *h, *w),
        _ => {
            return Err(TensorError::Rank {
                expected: "4 (1,c,h,w)".into(),
                found: input.to_vec(),
            })
        }
    };
    let [out_c, in_c, kh, kw] = filter else {
        return Err(TensorError::Rank {
            expected: "4 (out_c,in_c,k_h,k_w) filter".into(),
            found: filter.to_vec(),
        });
    };
    if *in_c != c {
        return Err(TensorError::ChannelMismatch {
            input: c,
            filter: *in_c,
        });
    }
    if bias_len != *out_c {
        return Err(TensorError::ShapeMismatch(format!(
            "bias has {bias_len} values for {out_c} output channels"
        )));
    }
    if stride.len() != 2 || padding.len() != 2 || dilation.len() != 2 {
        return Err(TensorError::InvalidParameter(
            "conv stride, dilation and padding must have 2 spatial entries".into(),
        ));
    }
    let sh = positive("stride", stride[0])?;
    let sw = positive("stride", stride[1])?;
    let pad = [
        non_negative("padding", padding[0].0)?,
        non_negative("padding", padding[0].1)?,
        non_negative("padding", padding[1].0)?,
        non_negative("padding", padding[1].1)?,
    ];
    let ph = h + pad[0] + pad[1];
    let pw = w + pad[2] + pad[3];
    if *kh > ph || *kw > pw {
        return Err(TensorError::WindowTooLarge {
            window: (*kh, *kw),
            extent: (ph, pw),
        });
    }
    Ok(ConvGeometry {
        out_c: *out_c,
        in_c: c,
        kh: *kh,
        kw: *kw,
        sh,
        sw,
        pad,
        oh: pooled_extent(ph, *kh, sh),
        ow: pooled_extent(pw, *kw, sw),
    })
}

/// Cross-correlation with zero padding, then bias.
///
/// Accumulation order is fixed: for each output channel and output cell, the
/// inner product runs input-channel-major, then kernel row, then kernel
/// column, and the bias is added last.
pub fn conv(
    input: &Tensor,
    filter: &Tensor,
    bias: &Tensor,
    stride: &[i64],
    dilation: &[i64],
    padding: &[(i64, i64)],
    groups: i64,
) -> Result<Tensor, TensorError> {
    let g = conv_geometry(
        input.shape(),
        filter.shape(),
        bias.len(),
        stride,
        dilation,
        padding,
        groups,
    )?;
    let (_, h, w) = input.chw()?;
    let x = input.data();
    let k = filter.data();
    let b = bias.data();
    let mut data = Vec::with_capacity(g.out_c * g.oh * g.ow);
    for oc in 0..g.out_c {
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let mut acc = 0.0f32;
                for ic in 0..g.in_c {
                    for ky in 0..g.kh {
                        let Some(iy) = (oy * g.sh + ky).checked_sub(g.pad[0]).filter(|&i| i < h)
                        else {
                            continue;
                        };
                        for kx in 0..g.kw {
                            let Some(ix) =
                                (ox * g.sw + kx).checked_sub(g.pad[2]).filter(|&i| i < w)
                            else {
                                continue;
                            };
                            acc += x[(ic * h + iy) * w + ix]
                                * k[((oc * g.in_c + ic) * g.kh + ky) * g.kw + kx];
                        }
                    }
                }
                data.push(acc + b[oc]);
            }
        }
    }
    Tensor::new(image_shape(input, g.out_c, g.oh, g.ow), data)
}

pub fn relu(input: &Tensor) -> Tensor {
    Tensor::from_fn(input.shape(), |i| {
        let v = input.data()[i];
        if v > 0.0 {
            v
        } else {
            0.0
        }
    })
}

pub(crate) fn check_axis(axis: i64, rank: usize) -> Result<usize, TensorError> {
    usize::try_from(axis)
        .ok()
        .filter(|&a| a < rank)
        .ok_or(TensorError::AxisOutOfRange { axis, rank })
}

/// `(outer, extent, inner)` strides around `axis`.
fn around(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    (
        shape[..axis].iter().product(),
        shape[axis],
        shape[axis + 1..].iter().product(),
    )
}

/// Exponential normalization along `axis`, stabilized by subtracting the max.
pub fn softmax(input: &Tensor, axis: i64) -> Result<Tensor, TensorError> {
    let axis = check_axis(axis, input.shape().len())?;
    let (outer, n, inner) = around(input.shape(), axis);
    let src = input.data();
    let mut data = vec![0.0f32; src.len()];
    for o in 0..outer {
        for i in 0..inner {
            let at = |j: usize| (o * n + j) * inner + i;
            let max = (0..n).map(|j| src[at(j)]).fold(f32::NEG_INFINITY, f32::max);
            let mut sum = 0.0f32;
            for j in 0..n {
                let e = (src[at(j)] - max).exp();
                data[at(j)] = e;
                sum += e;
            }
            for j in 0..n {
                data[at(j)] /= sum;
            }
        }
    }
    Tensor::new(input.shape().to_vec(), data)
}

pub(crate) fn reshape_target(from: usize, shape: &[i64]) -> Result<Vec<usize>, TensorError> {
    let dims: Option<Vec<usize>> = shape
        .iter()
        .map(|&d| usize::try_from(d).ok().filter(|&d| d > 0))
        .collect();
    match dims {
        Some(d) if !d.is_empty() && d.iter().product::<usize>() == from => Ok(d),
        _ => Err(TensorError::ElementCountMismatch {
            from,
            to: shape.to_vec(),
        }),
    }
}

/// Same elements in the same row-major order under a new shape.
pub fn reshape(input: &Tensor, shape: &[i64]) -> Result<Tensor, TensorError> {
    let dims = reshape_target(input.len(), shape)?;
    Tensor::new(dims, input.data().to_vec())
}

/// `weight · x + bias` with `weight` of shape `(n_out, n_in)`; result `[1, n_out]`.
pub fn linear(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor, TensorError> {
    let [n_out, n_in] = weight.shape() else {
        return Err(TensorError::Rank {
            expected: "2 (n_out, n_in) weight".into(),
            found: weight.shape().to_vec(),
        });
    };
    let (n_out, n_in) = (*n_out, *n_in);
    if input.len() != n_in {
        return Err(TensorError::ShapeMismatch(format!(
            "linear input has {} values, weight expects {n_in}",
            input.len()
        )));
    }
    if bias.len() != n_out {
        return Err(TensorError::ShapeMismatch(format!(
            "bias has {} values for {n_out} outputs",
            bias.len()
        )));
    }
    let x = input.data();
    let wd = weight.data();
    let data = (0..n_out)
        .map(|o| {
            let row = &wd[o * n_in..(o + 1) * n_in];
            let mut acc = 0.0f32;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            acc + bias.data()[o]
        })
        .collect();
    Tensor::new(vec![1, n_out], data)
}

pub(crate) fn concat_shape(shapes: &[&[usize]], axis: i64) -> Result<Vec<usize>, TensorError> {
    let Some(first) = shapes.first() else {
        return Err(TensorError::InvalidParameter("concat of nothing".into()));
    };
    let axis = check_axis(axis, first.len())?;
    let mut out = first.to_vec();
    for s in &shapes[1..] {
        let same_elsewhere = s.len() == first.len()
            && s.iter()
                .zip(first.iter())
                .enumerate()
                .all(|(i, (a, b))| i == axis || a == b);
        if !same_elsewhere {
            return Err(TensorError::ShapeMismatch(format!(
                "cannot concatenate {first:?} with {s:?} along axis {axis}"
            )));
        }
        out[axis] += s[axis];
    }
    Ok(out)
}

pub fn concat(inputs: &[&Tensor], axis: i64) -> Result<Tensor, TensorError> {
    let shapes: Vec<&[usize]> = inputs.iter().map(|t| t.shape()).collect();
    let out_shape = concat_shape(&shapes, axis)?;
    let axis = axis as usize;
    let (outer, _, inner) = around(&out_shape, axis);
    let mut data = Vec::with_capacity(out_shape.iter().product());
    for o in 0..outer {
        for t in inputs {
            let chunk = t.shape()[axis] * inner;
            data.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
        }
    }
    Tensor::new(out_shape, data)
}

pub(crate) fn split_shapes(
    shape: &[usize],
    axis: i64,
    ranges: &[(i64, i64)],
) -> Result<Vec<Vec<usize>>, TensorError> {
    let axis = check_axis(axis, shape.len())?;
    ranges
        .iter()
        .map(|&(a, b)| {
            if a < 0 || b <= a || b as usize > shape[axis] {
                return Err(TensorError::InvalidParameter(format!(
                    "range [{a}, {b}) outside axis of extent {}",
                    shape[axis]
                )));
            }
            let mut s = shape.to_vec();
            s[axis] = (b - a) as usize;
            Ok(s)
        })
        .collect()
}

/// Half-open index ranges along `axis`; ranges may overlap.
pub fn split(input: &Tensor, axis: i64, ranges: &[(i64, i64)]) -> Result<Vec<Tensor>, TensorError> {
    let shapes = split_shapes(input.shape(), axis, ranges)?;
    let axis = axis as usize;
    let (outer, n, inner) = around(input.shape(), axis);
    let src = input.data();
    shapes
        .into_iter()
        .zip(ranges)
        .map(|(shape, &(a, b))| {
            let (a, b) = (a as usize, b as usize);
            let mut data = Vec::with_capacity(shape.iter().product());
            for o in 0..outer {
                data.extend_from_slice(&src[(o * n + a) * inner..(o * n + b) * inner]);
            }
            Tensor::new(shape, data)
        })
        .collect()
}
