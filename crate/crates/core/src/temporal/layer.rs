use crate::error::{Error, Result};
use crate::tensor::Matrix;
use crate::topology::SparseMask;

/// Firing threshold of the non-leaky integrate-and-fire neuron.
pub const V_THRESHOLD: f64 = 1.0;

/// Prefixes whose weight sum does not exceed `1 + DENOM_EPS` never fire.
pub const DENOM_EPS: f64 = 1e-9;

/// First-spike times in the z-domain (`z = exp(t)`); `+∞` marks a silent neuron.
#[derive(Clone, Debug, PartialEq)]
pub struct ZSpikeVector(Vec<f64>);

impl ZSpikeVector {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if let Some((k, v)) = z.iter().enumerate().find(|(_, &v)| !(v >= 1.0)) {
            return Err(Error::invalid(format!(
                "z[{k}] = {v} is not a valid spike time"
            )));
        }
        Ok(Self(z))
    }

    pub fn silent(n: usize) -> Self {
        Self(vec![f64::INFINITY; n])
    }

    /// From spike times `t >= 0` (`None` for silent).
    pub fn from_times(times: &[Option<f64>]) -> Result<Self> {
        Self::new(
            times
                .iter()
                .map(|t| t.map_or(f64::INFINITY, f64::exp))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn firing_count(&self) -> usize {
        self.0.iter().filter(|z| z.is_finite()).count()
    }

    /// Spike time `ln z`, or `None` if silent.
    pub fn time(&self, k: usize) -> Option<f64> {
        let z = self.0[k];
        z.is_finite().then(|| z.ln())
    }
}

/// A fully-connected layer of single-spike neurons with a connection mask.
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalLayer {
    pub weights: Matrix,
    pub mask: SparseMask,
}

impl TemporalLayer {
    pub fn new(weights: Matrix, mask: SparseMask) -> Result<Self> {
        mask.check_shape(&weights)?;
        Ok(Self { weights, mask })
    }

    /// Dense layer with every synapse active.
    pub fn dense(weights: Matrix) -> Self {
        let mask = SparseMask::dense(weights.rows(), weights.cols());
        Self { weights, mask }
    }

    pub fn n_pre(&self) -> usize {
        self.weights.rows()
    }

    pub fn n_post(&self) -> usize {
        self.weights.cols()
    }
}

/// The presynaptic spikes that precede each output's first spike.
///
/// Stored as the input firing order plus, per output, the length of the
/// prefix of that order that lies before its spike.
#[derive(Clone, Debug, PartialEq)]
pub struct CausalSet {
    order: Vec<usize>,
    prefix: Vec<usize>,
    denom: Vec<f64>,
}

impl CausalSet {
    /// Finite inputs sorted by ascending `z` (ties by index).
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Number of entries of [`CausalSet::order`] preceding output `j`'s spike.
    pub fn prefix_len(&self, j: usize) -> usize {
        self.prefix[j]
    }

    /// `S_w - 1` over the causal prefix of output `j` (0 for silent outputs).
    pub fn denominator(&self, j: usize) -> f64 {
        self.denom[j]
    }

    /// Connected causal inputs of output `j`, in firing order.
    pub fn members<'a>(
        &'a self,
        j: usize,
        mask: &'a SparseMask,
    ) -> impl Iterator<Item = usize> + 'a {
        self.order[..self.prefix[j]]
            .iter()
            .copied()
            .filter(move |&i| mask.contains(i, j))
    }
}

/// Exact first-spike times of one layer.
///
/// For every output the finite inputs are scanned in firing order; after each
/// group of simultaneous inputs the candidate `z_j = S_wz / (S_w - 1)` is
/// accepted when `S_w > 1` and it falls inside the current inter-spike
/// interval. Outputs without an accepted prefix stay silent.
pub fn forward_layer(
    z_in: &ZSpikeVector,
    layer: &TemporalLayer,
) -> Result<(ZSpikeVector, CausalSet)> {
    forward_layer_with_sums(z_in, layer, None)
}

/// [`forward_layer`] with optional precomputed column sums of the weights,
/// letting a group holding most inputs be summed by complement.
pub(crate) fn forward_layer_with_sums(
    z_in: &ZSpikeVector,
    layer: &TemporalLayer,
    column_sums: Option<&[f64]>,
) -> Result<(ZSpikeVector, CausalSet)> {
    if z_in.len() != layer.n_pre() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} inputs", layer.n_pre()),
            actual: z_in.len().to_string(),
        });
    }
    let z = z_in.as_slice();
    let n_post = layer.n_post();
    let mut order: Vec<usize> = (0..z.len()).filter(|&i| z[i].is_finite()).collect();
    order.sort_by(|&a, &b| z[a].total_cmp(&z[b]).then(a.cmp(&b)));
    let groups = spike_groups(z, &order);
    let dominant = column_sums.and(dominant_group(&groups, z.len()));

    let mut sum_w = vec![0.0; n_post];
    let mut sum_wz = vec![0.0; n_post];
    let mut z_out = vec![f64::INFINITY; n_post];
    let mut prefix = vec![0; n_post];
    let mut denom = vec![0.0; n_post];
    let mut pending: Vec<usize> = (0..n_post).collect();

    for (g, &(start, end)) in groups.iter().enumerate() {
        if pending.is_empty() {
            break;
        }
        let z_group = z[order[start]];
        // resolved outputs keep accumulating; their sums are never read again
        if let (Some(d), Some(sums)) = (dominant, column_sums) {
            if d == g {
                let mut group_sum = sums.to_vec();
                let members = membership(z.len(), &order[start..end]);
                for i in (0..z.len()).filter(|&i| !members[i]) {
                    for (s, &w) in group_sum.iter_mut().zip(layer.weights.row(i)) {
                        *s -= w;
                    }
                }
                for ((sw, swz), &w) in sum_w.iter_mut().zip(sum_wz.iter_mut()).zip(&group_sum) {
                    *sw += w;
                    *swz += w * z_group;
                }
            }
        }
        if dominant != Some(g) || column_sums.is_none() {
            for &i in &order[start..end] {
                let row = layer.weights.row(i);
                for ((sw, swz), &w) in sum_w.iter_mut().zip(sum_wz.iter_mut()).zip(row) {
                    *sw += w;
                    *swz += w * z_group;
                }
            }
        }
        let z_next = groups
            .get(g + 1)
            .map_or(f64::INFINITY, |&(a, _)| z[order[a]]);
        pending.retain(|&j| {
            let s = sum_w[j];
            if s > V_THRESHOLD + DENOM_EPS {
                let candidate = sum_wz[j] / (s - V_THRESHOLD);
                if candidate > z_group && candidate < z_next {
                    z_out[j] = candidate;
                    prefix[j] = end;
                    denom[j] = s - V_THRESHOLD;
                    return false;
                }
            }
            true
        });
    }
    Ok((
        ZSpikeVector(z_out),
        CausalSet {
            order,
            prefix,
            denom,
        },
    ))
}

/// Ranges of `order` holding inputs with equal `z`.
fn spike_groups(z: &[f64], order: &[usize]) -> Vec<(usize, usize)> {
    let mut groups = Vec::new();
    let mut start = 0;
    for k in 1..=order.len() {
        if k == order.len() || z[order[k]] != z[order[start]] {
            groups.push((start, k));
            start = k;
        }
    }
    groups
}

/// The group holding more than half of all inputs, if any.
fn dominant_group(groups: &[(usize, usize)], n_pre: usize) -> Option<usize> {
    groups.iter().position(|&(a, b)| 2 * (b - a) > n_pre)
}

fn membership(n: usize, members: &[usize]) -> Vec<bool> {
    let mut flags = vec![false; n];
    for &i in members {
        flags[i] = true;
    }
    flags
}

/// Dense weight gradient of one layer stored as per-row terms plus one row
/// shared by every row, which keeps updates from inputs that spike together
/// proportional to the rest of the layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradient {
    rows: Matrix,
    shared: Vec<f64>,
}

impl LayerGradient {
    pub fn zeros(n_pre: usize, n_post: usize) -> Self {
        Self {
            rows: Matrix::zeros(n_pre, n_post),
            shared: vec![0.0; n_post],
        }
    }

    pub fn add(&mut self, other: &LayerGradient) {
        self.rows.add_assign(&other.rows);
        for (a, b) in self.shared.iter_mut().zip(&other.shared) {
            *a += b;
        }
    }

    pub fn into_matrix(mut self) -> Matrix {
        for i in 0..self.rows.rows() {
            for (g, s) in self.rows.row_mut(i).iter_mut().zip(&self.shared) {
                *g += s;
            }
        }
        self.rows
    }
}

/// Chains `grad_z_out` through one layer, adding the dense weight gradient
/// (connected or not) into `grad` and, when given, input gradients into
/// `grad_z_in`.
pub(crate) fn accumulate_backward(
    grad_z_out: &[f64],
    z_in: &[f64],
    z_out: &[f64],
    causal: &CausalSet,
    weights: &Matrix,
    grad: &mut LayerGradient,
    mut grad_z_in: Option<&mut [f64]>,
) {
    // dense chain coefficients; an output drops out once the scan passes its prefix
    let n_post = z_out.len();
    let mut coef = vec![0.0; n_post];
    let mut z_live = vec![0.0; n_post];
    let mut expiry: Vec<(usize, usize)> = Vec::new();
    for j in 0..n_post {
        if z_out[j].is_finite() && grad_z_out[j] != 0.0 && causal.prefix[j] > 0 {
            coef[j] = grad_z_out[j] / causal.denom[j];
            z_live[j] = z_out[j];
            expiry.push((causal.prefix[j], j));
        }
    }
    expiry.sort_unstable();
    let order = &causal.order;
    let groups = spike_groups(z_in, order);
    let dominant = dominant_group(&groups, z_in.len());
    let mut update = vec![0.0; n_post];
    let mut next = 0;
    for (g, &(start, end)) in groups.iter().enumerate() {
        while next < expiry.len() && expiry[next].0 <= start {
            coef[expiry[next].1] = 0.0;
            next += 1;
        }
        if next == expiry.len() {
            break;
        }
        let z_group = z_in[order[start]];
        for ((u, &c), &zj) in update.iter_mut().zip(&coef).zip(&z_live) {
            *u = c * (z_group - zj);
        }
        if dominant == Some(g) {
            // shared row adds `update` everywhere; non-members take it back
            for (s, u) in grad.shared.iter_mut().zip(&update) {
                *s += u;
            }
            let members = membership(z_in.len(), &order[start..end]);
            for i in (0..z_in.len()).filter(|&i| !members[i]) {
                for (r, u) in grad.rows.row_mut(i).iter_mut().zip(&update) {
                    *r -= u;
                }
            }
        } else {
            for &i in &order[start..end] {
                for (r, u) in grad.rows.row_mut(i).iter_mut().zip(&update) {
                    *r += u;
                }
            }
        }
        if let Some(gz) = grad_z_in.as_deref_mut() {
            for &i in &order[start..end] {
                gz[i] += coef
                    .iter()
                    .zip(weights.row(i))
                    .map(|(c, w)| c * w)
                    .sum::<f64>();
            }
        }
    }
}

/// Exact gradients of one layer: `∂z_j/∂w_ij = (z_i - z_j)/(S_w - 1)` and
/// `∂z_j/∂z_i = w_ij/(S_w - 1)` for causal inputs, zero otherwise.
/// Weight gradients on masked-out synapses are zero.
pub fn backward_layer(
    grad_z_out: &[f64],
    z_in: &ZSpikeVector,
    z_out: &ZSpikeVector,
    causal: &CausalSet,
    layer: &TemporalLayer,
) -> Result<(Vec<f64>, Matrix)> {
    if grad_z_out.len() != layer.n_post() || z_out.len() != layer.n_post() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} outputs", layer.n_post()),
            actual: grad_z_out.len().to_string(),
        });
    }
    let mut grad_w = LayerGradient::zeros(layer.n_pre(), layer.n_post());
    let mut grad_z = vec![0.0; layer.n_pre()];
    accumulate_backward(
        grad_z_out,
        z_in.as_slice(),
        z_out.as_slice(),
        causal,
        &layer.weights,
        &mut grad_w,
        Some(&mut grad_z),
    );
    let mut grad_w = grad_w.into_matrix();
    layer.mask.apply(&mut grad_w);
    Ok((grad_z, grad_w))
}
