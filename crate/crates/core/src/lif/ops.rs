use crate::error::{Error, Result};
use crate::tensor::Matrix;
use crate::topology::SparseMask;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Zero padding that keeps the spatial size (odd kernels).
    Same,
    /// No padding; the output shrinks by `kernel - 1`.
    Valid,
}

/// Geometry of a stride-1 2-D cross-correlation over `channels x height x width` maps.
///
/// The kernel is stored as a matrix with one row per `(in_channel, ky, kx)`
/// (row index `(c * kernel + ky) * kernel + kx`) and one column per output
/// channel, so a connection mask over kernel elements has the same shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvShape {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub height: usize,
    pub width: usize,
    pub padding: Padding,
}

impl ConvShape {
    pub fn validate(&self) -> Result<()> {
        if self.kernel == 0 || self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::invalid("convolution sizes must be positive"));
        }
        match self.padding {
            Padding::Same if self.kernel % 2 == 0 => {
                Err(Error::invalid("same padding needs an odd kernel"))
            }
            Padding::Valid if self.kernel > self.height || self.kernel > self.width => {
                Err(Error::invalid("kernel larger than the input"))
            }
            _ => Ok(()),
        }
    }

    fn pad(&self) -> usize {
        match self.padding {
            Padding::Same => self.kernel / 2,
            Padding::Valid => 0,
        }
    }

    pub fn out_height(&self) -> usize {
        self.height + 2 * self.pad() + 1 - self.kernel
    }

    pub fn out_width(&self) -> usize {
        self.width + 2 * self.pad() + 1 - self.kernel
    }

    pub fn kernel_rows(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.height * self.width
    }

    pub fn output_len(&self) -> usize {
        self.out_channels * self.out_height() * self.out_width()
    }

    /// Visits every `(output position, kernel row, input index)` triple that
    /// lands inside the input.
    #[inline]
    fn for_each_tap(&self, pos: usize, mut f: impl FnMut(usize, usize)) {
        let ow = self.out_width();
        let (oy, ox) = (pos / ow, pos % ow);
        let p = self.pad() as isize;
        let k = self.kernel;
        for c in 0..self.in_channels {
            for ky in 0..k {
                let iy = oy as isize + ky as isize - p;
                if iy < 0 || iy >= self.height as isize {
                    continue;
                }
                for kx in 0..k {
                    let ix = ox as isize + kx as isize - p;
                    if ix < 0 || ix >= self.width as isize {
                        continue;
                    }
                    let input = (c * self.height + iy as usize) * self.width + ix as usize;
                    f((c * k + ky) * k + kx, input);
                }
            }
        }
    }
}

fn check_len(what: &str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            expected: format!("{expected} {what}"),
            actual: actual.to_string(),
        })
    }
}

fn masked(weights: &Matrix, mask: &SparseMask) -> Result<Matrix> {
    mask.check_shape(weights)?;
    let mut w = weights.clone();
    mask.apply(&mut w);
    Ok(w)
}

/// `I = (M ⊙ W)ᵀ x` for one time step.
pub fn masked_dense_forward(x: &[f64], weights: &Matrix, mask: &SparseMask) -> Result<Vec<f64>> {
    check_len("inputs", weights.rows(), x.len())?;
    let w = masked(weights, mask)?;
    let mut out = vec![0.0; w.cols()];
    dense_forward(x, &w, &mut out);
    Ok(out)
}

/// Cross-correlation of `x` with the masked kernel for one time step.
pub fn masked_conv_forward(
    x: &[f64],
    shape: &ConvShape,
    weights: &Matrix,
    mask: &SparseMask,
) -> Result<Vec<f64>> {
    shape.validate()?;
    check_len("inputs", shape.input_len(), x.len())?;
    check_len("kernel rows", shape.kernel_rows(), weights.rows())?;
    check_len("kernel columns", shape.out_channels, weights.cols())?;
    let w = masked(weights, mask)?;
    let mut out = vec![0.0; shape.output_len()];
    conv_forward(x, shape, &w, &mut out);
    Ok(out)
}

/// Adds `Wᵀ x` into `out`, skipping silent inputs.
pub(crate) fn dense_forward(x: &[f64], w: &Matrix, out: &mut [f64]) {
    for (i, &xi) in x.iter().enumerate() {
        if xi != 0.0 {
            for (o, &wij) in out.iter_mut().zip(w.row(i)) {
                *o += xi * wij;
            }
        }
    }
}

/// Adds `x ⊗ g` into `grad_w` and, when given, `W g` into `grad_x`.
pub(crate) fn dense_backward(
    x: &[f64],
    w: &Matrix,
    g: &[f64],
    grad_w: &mut Matrix,
    grad_x: Option<&mut [f64]>,
) {
    for (i, &xi) in x.iter().enumerate() {
        if xi != 0.0 {
            for (gw, &gj) in grad_w.row_mut(i).iter_mut().zip(g) {
                *gw += xi * gj;
            }
        }
    }
    if let Some(gx) = grad_x {
        for (i, gxi) in gx.iter_mut().enumerate() {
            *gxi += w.row(i).iter().zip(g).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

pub(crate) fn conv_forward(x: &[f64], shape: &ConvShape, w: &Matrix, out: &mut [f64]) {
    let positions = shape.out_height() * shape.out_width();
    let mut acc = vec![0.0; shape.out_channels];
    for pos in 0..positions {
        acc.fill(0.0);
        shape.for_each_tap(pos, |row, input| {
            let v = x[input];
            if v != 0.0 {
                for (a, &wv) in acc.iter_mut().zip(w.row(row)) {
                    *a += v * wv;
                }
            }
        });
        for (c, a) in acc.iter().enumerate() {
            out[c * positions + pos] += a;
        }
    }
}

pub(crate) fn conv_backward(
    x: &[f64],
    shape: &ConvShape,
    w: &Matrix,
    g: &[f64],
    grad_w: &mut Matrix,
    mut grad_x: Option<&mut [f64]>,
) {
    let positions = shape.out_height() * shape.out_width();
    let mut g_pos = vec![0.0; shape.out_channels];
    for pos in 0..positions {
        for (c, gp) in g_pos.iter_mut().enumerate() {
            *gp = g[c * positions + pos];
        }
        if g_pos.iter().all(|&v| v == 0.0) {
            continue;
        }
        shape.for_each_tap(pos, |row, input| {
            let v = x[input];
            if v != 0.0 {
                for (gw, &gp) in grad_w.row_mut(row).iter_mut().zip(&g_pos) {
                    *gw += v * gp;
                }
            }
            if let Some(gx) = grad_x.as_deref_mut() {
                gx[input] += w
                    .row(row)
                    .iter()
                    .zip(&g_pos)
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            }
        });
    }
}

/// 2x2 average pooling with stride 2; odd trailing rows and columns are dropped.
pub fn avg_pool2(x: &[f64], channels: usize, height: usize, width: usize) -> Result<Vec<f64>> {
    check_len("inputs", channels * height * width, x.len())?;
    let (oh, ow) = (height / 2, width / 2);
    let mut out = vec![0.0; channels * oh * ow];
    for c in 0..channels {
        for y in 0..oh {
            for xx in 0..ow {
                let at = |dy: usize, dx: usize| x[(c * height + 2 * y + dy) * width + 2 * xx + dx];
                out[(c * oh + y) * ow + xx] = 0.25 * (at(0, 0) + at(0, 1) + at(1, 0) + at(1, 1));
            }
        }
    }
    Ok(out)
}

pub(crate) fn avg_pool2_backward(
    g: &[f64],
    channels: usize,
    height: usize,
    width: usize,
) -> Vec<f64> {
    let (oh, ow) = (height / 2, width / 2);
    let mut gx = vec![0.0; channels * height * width];
    for c in 0..channels {
        for y in 0..oh {
            for xx in 0..ow {
                let share = 0.25 * g[(c * oh + y) * ow + xx];
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    gx[(c * height + 2 * y + dy) * width + 2 * xx + dx] = share;
                }
            }
        }
    }
    gx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    fn naive_conv(x: &[f64], s: &ConvShape, w: &Matrix, mask: &SparseMask) -> Vec<f64> {
        let p = match s.padding {
            Padding::Same => (s.kernel / 2) as isize,
            Padding::Valid => 0,
        };
        let (oh, ow) = (s.out_height(), s.out_width());
        let mut out = vec![0.0; s.out_channels * oh * ow];
        for co in 0..s.out_channels {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0;
                    for ci in 0..s.in_channels {
                        for ky in 0..s.kernel {
                            for kx in 0..s.kernel {
                                let iy = oy as isize + ky as isize - p;
                                let ix = ox as isize + kx as isize - p;
                                if iy < 0
                                    || ix < 0
                                    || iy >= s.height as isize
                                    || ix >= s.width as isize
                                {
                                    continue;
                                }
                                let r = (ci * s.kernel + ky) * s.kernel + kx;
                                if mask.contains(r, co) {
                                    acc += x[(ci * s.height + iy as usize) * s.width + ix as usize]
                                        * w.get(r, co);
                                }
                            }
                        }
                    }
                    out[(co * oh + oy) * ow + ox] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn zero_mask_gives_zero_current() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = random_matrix(6, 4, &mut rng);
        let out = masked_dense_forward(
            &[1.0, 0.5, 0.0, 1.0, 1.0, 0.2],
            &w,
            &SparseMask::empty(6, 4),
        )
        .unwrap();
        assert_eq!(out, vec![0.0; 4]);
    }

    #[test]
    fn one_by_one_identity_kernel() {
        let shape = ConvShape {
            in_channels: 1,
            out_channels: 1,
            kernel: 1,
            height: 1,
            width: 1,
            padding: Padding::Valid,
        };
        let w = Matrix::from_vec(1, 1, vec![0.37]).unwrap();
        let out = masked_conv_forward(&[1.0], &shape, &w, &SparseMask::dense(1, 1)).unwrap();
        assert_eq!(out, vec![0.37]);
    }

    #[test]
    fn conv_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let shape = ConvShape {
                in_channels: rng.gen_range(1..4),
                out_channels: rng.gen_range(1..5),
                kernel: [1, 3, 5][trial % 3],
                height: rng.gen_range(5..9),
                width: rng.gen_range(5..9),
                padding: if trial % 2 == 0 {
                    Padding::Same
                } else {
                    Padding::Valid
                },
            };
            let w = random_matrix(shape.kernel_rows(), shape.out_channels, &mut rng);
            let pairs = (0..shape.kernel_rows())
                .flat_map(|r| (0..shape.out_channels).map(move |c| (r, c)))
                .filter(|_| rng.gen_bool(0.6))
                .collect::<Vec<_>>();
            let mask =
                SparseMask::from_pairs(shape.kernel_rows(), shape.out_channels, pairs).unwrap();
            let x: Vec<f64> = (0..shape.input_len())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            let fast = masked_conv_forward(&x, &shape, &w, &mask).unwrap();
            let slow = naive_conv(&x, &shape, &w, &mask);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn dense_masking_matches_explicit_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = random_matrix(5, 3, &mut rng);
        let mask = SparseMask::from_pairs(5, 3, [(0, 0), (2, 1), (4, 2), (1, 2)]).unwrap();
        let x = [0.2, -1.0, 0.7, 0.0, 1.5];
        let out = masked_dense_forward(&x, &w, &mask).unwrap();
        for j in 0..3 {
            let expected: f64 = (0..5)
                .filter(|&i| mask.contains(i, j))
                .map(|i| x[i] * w.get(i, j))
                .sum();
            assert!((out[j] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn conv_backward_is_the_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let shape = ConvShape {
            in_channels: 2,
            out_channels: 3,
            kernel: 3,
            height: 5,
            width: 4,
            padding: Padding::Same,
        };
        let w = random_matrix(shape.kernel_rows(), 3, &mut rng);
        let x: Vec<f64> = (0..shape.input_len())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let g: Vec<f64> = (0..shape.output_len())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let mut gw = Matrix::zeros(shape.kernel_rows(), 3);
        let mut gx = vec![0.0; shape.input_len()];
        conv_backward(&x, &shape, &w, &g, &mut gw, Some(&mut gx));
        // <g, conv(x, w)> is bilinear: its partials are the adjoints
        let mut y = vec![0.0; shape.output_len()];
        conv_forward(&x, &shape, &w, &mut y);
        let inner: f64 = y.iter().zip(&g).map(|(a, b)| a * b).sum();
        let via_x: f64 = gx.iter().zip(&x).map(|(a, b)| a * b).sum();
        let via_w: f64 = gw
            .as_slice()
            .iter()
            .zip(w.as_slice())
            .map(|(a, b)| a * b)
            .sum();
        assert!((inner - via_x).abs() < 1e-12);
        assert!((inner - via_w).abs() < 1e-12);
    }

    #[test]
    fn pooling_averages_quads() {
        let x: Vec<f64> = (0..16).map(f64::from).collect();
        let out = avg_pool2(&x, 1, 4, 4).unwrap();
        assert_eq!(out, vec![2.5, 4.5, 10.5, 12.5]);
        let gx = avg_pool2_backward(&[4.0, 0.0, 0.0, 0.0], 1, 4, 4);
        assert_eq!(&gx[..2], &[1.0, 1.0]);
        assert_eq!(&gx[4..6], &[1.0, 1.0]);
        assert_eq!(gx.iter().sum::<f64>(), 4.0);
    }

    #[test]
    fn shapes_are_checked() {
        let w = Matrix::zeros(3, 2);
        assert!(masked_dense_forward(&[1.0, 2.0], &w, &SparseMask::dense(3, 2)).is_err());
        assert!(masked_dense_forward(&[1.0, 2.0, 3.0], &w, &SparseMask::dense(2, 2)).is_err());
        let even = ConvShape {
            in_channels: 1,
            out_channels: 1,
            kernel: 2,
            height: 4,
            width: 4,
            padding: Padding::Same,
        };
        assert!(even.validate().is_err());
    }
}
