//! Minimal dense-tensor kernel for boundary-MPS sweep contraction.
//!
//! The decoding network is a layered planar graph: columns of tensors whose
//! bonds only connect adjacent columns, without crossings. A [`BoundaryMps`]
//! holds the frontier of the partial contraction as a chain of rank-3 site
//! tensors (left bond, physical leg, right bond). [`BoundaryMps::apply_column`]
//! contracts one column into the frontier, compresses every bond to the bond
//! cap via one right-to-left then one left-to-right [`svd_truncate`] sweep,
//! and rescales each site to unit max-entry, accumulating the residue in
//! `log_scale` so that values like 0.3^121 never underflow.
//!
//! All tensors are real: entries are probabilities and delta-tensor
//! indicators, so no complex arithmetic is needed.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("dims {dims:?} imply {expect} entries, got {got}")]
    ShapeMismatch {
        dims: Vec<usize>,
        expect: usize,
        got: usize,
    },
    #[error("non-finite tensor entry at flat index {0}")]
    NonFinite(usize),
    #[error("contraction pairs extents differ: axis {a_axis} of a has {a_ext}, axis {b_axis} of b has {b_ext}")]
    ExtentMismatch {
        a_axis: usize,
        a_ext: usize,
        b_axis: usize,
        b_ext: usize,
    },
    #[error("axis {axis} out of range for rank-{rank} tensor")]
    AxisOutOfRange { axis: usize, rank: usize },
    #[error("svd_truncate needs a rank-2 tensor, got rank {0}")]
    NotAMatrix(usize),
    #[error("chi must be >= 1")]
    InvalidChi,
    #[error("SVD failed to converge on a {rows}x{cols} matrix (frobenius norm {norm:.3e})")]
    SvdFailed { rows: usize, cols: usize, norm: f64 },
    #[error("column consumed {consumed} sites but the boundary has {available}")]
    ColumnSiteCount { consumed: usize, available: usize },
    #[error("column tensor input extent {got} does not match boundary site extent {want}")]
    PhysicalExtent { got: usize, want: usize },
}

/// A dense real tensor in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self, TensorError> {
        let expect: usize = dims.iter().product();
        if expect != data.len() {
            return Err(TensorError::ShapeMismatch {
                dims,
                expect,
                got: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite(i));
        }
        Ok(DenseTensor { dims, data })
    }

    pub(crate) fn from_parts(dims: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        DenseTensor { dims, data }
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let len = dims.iter().product();
        DenseTensor {
            dims,
            data: vec![0.0; len],
        }
    }

    /// Identity matrix as a rank-2 tensor.
    pub fn eye(n: usize) -> Self {
        let mut t = Self::zeros(vec![n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Reinterpret with new dims of the same total length.
    pub fn reshape(mut self, dims: Vec<usize>) -> Result<Self, TensorError> {
        let expect: usize = dims.iter().product();
        if expect != self.data.len() {
            return Err(TensorError::ShapeMismatch {
                dims,
                expect,
                got: self.data.len(),
            });
        }
        self.dims = dims;
        Ok(self)
    }

    fn strides(dims: &[usize]) -> Vec<usize> {
        let mut strides = vec![1usize; dims.len()];
        for i in (0..dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        strides
    }

    /// Permute axes: output axis i is input axis `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> DenseTensor {
        debug_assert_eq!(perm.len(), self.dims.len());
        let out_dims: Vec<usize> = perm.iter().map(|&a| self.dims[a]).collect();
        let in_strides = Self::strides(&self.dims);
        let out_strides_in: Vec<usize> = perm.iter().map(|&a| in_strides[a]).collect();
        let mut out = vec![0.0; self.data.len()];
        let mut idx = vec![0usize; out_dims.len()];
        let mut src = 0usize;
        for slot in out.iter_mut() {
            *slot = self.data[src];
            // odometer increment over the output index, tracking src offset
            for ax in (0..out_dims.len()).rev() {
                idx[ax] += 1;
                src += out_strides_in[ax];
                if idx[ax] < out_dims[ax] {
                    break;
                }
                src -= out_strides_in[ax] * out_dims[ax];
                idx[ax] = 0;
            }
        }
        DenseTensor {
            dims: out_dims,
            data: out,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }
}

/// Row-major matmul (m x k) * (k x n) via nalgebra, with the row-major data
/// viewed as transposed column-major storage.
fn matmul(a: &[f64], m: usize, k: usize, b: &[f64], n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    if m == 0 || n == 0 || k == 0 {
        return vec![0.0; m * n];
    }
    let a_t = nalgebra::DMatrixView::from_slice(a, k, m);
    let b_t = nalgebra::DMatrixView::from_slice(b, n, k);
    let c_t = b_t * a_t; // (n x m) column-major == (m x n) row-major
    c_t.as_slice().to_vec()
}

/// Contract paired axes of two tensors; remaining axes keep their order,
/// a's free axes before b's.
pub fn contract(
    a: &DenseTensor,
    b: &DenseTensor,
    pairs: &[(usize, usize)],
) -> Result<DenseTensor, TensorError> {
    for &(ai, bi) in pairs {
        if ai >= a.rank() {
            return Err(TensorError::AxisOutOfRange {
                axis: ai,
                rank: a.rank(),
            });
        }
        if bi >= b.rank() {
            return Err(TensorError::AxisOutOfRange {
                axis: bi,
                rank: b.rank(),
            });
        }
        if a.dims[ai] != b.dims[bi] {
            return Err(TensorError::ExtentMismatch {
                a_axis: ai,
                a_ext: a.dims[ai],
                b_axis: bi,
                b_ext: b.dims[bi],
            });
        }
    }
    let a_con: Vec<usize> = pairs.iter().map(|&(ai, _)| ai).collect();
    let b_con: Vec<usize> = pairs.iter().map(|&(_, bi)| bi).collect();
    let a_free: Vec<usize> = (0..a.rank()).filter(|i| !a_con.contains(i)).collect();
    let b_free: Vec<usize> = (0..b.rank()).filter(|i| !b_con.contains(i)).collect();

    let a_perm: Vec<usize> = a_free.iter().chain(&a_con).copied().collect();
    let b_perm: Vec<usize> = b_con.iter().chain(&b_free).copied().collect();
    let ap = a.permute(&a_perm);
    let bp = b.permute(&b_perm);

    let m: usize = a_free.iter().map(|&i| a.dims[i]).product();
    let k: usize = a_con.iter().map(|&i| a.dims[i]).product();
    let n: usize = b_free.iter().map(|&i| b.dims[i]).product();
    let data = matmul(&ap.data, m, k, &bp.data, n);

    let mut dims: Vec<usize> = a_free.iter().map(|&i| a.dims[i]).collect();
    dims.extend(b_free.iter().map(|&i| b.dims[i]));
    if dims.is_empty() {
        dims.push(1);
        return Ok(DenseTensor::from_parts(dims, data));
    }
    Ok(DenseTensor::from_parts(dims, data))
}

/// Result of a truncated SVD: `m ≈ u * diag(s) * vt` with rank <= chi.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: DenseTensor,
    pub s: Vec<f64>,
    pub vt: DenseTensor,
    /// Sum of squared dropped singular values over the sum of all squared
    /// singular values; 0 when nothing was dropped.
    pub discarded_weight: f64,
}

/// Truncated SVD of a matrix-shaped tensor. Keeps at most `chi` singular
/// values (rank cap only, no magnitude floor); singular values are returned
/// in nonincreasing order.
pub fn svd_truncate(m: &DenseTensor, chi: usize) -> Result<TruncatedSvd, TensorError> {
    if m.rank() != 2 {
        return Err(TensorError::NotAMatrix(m.rank()));
    }
    if chi == 0 {
        return Err(TensorError::InvalidChi);
    }
    let (rows, cols) = (m.dims[0], m.dims[1]);
    // row-major data viewed as the transpose in nalgebra's column-major layout
    let mt = DMatrix::from_row_slice(rows, cols, &m.data);
    let norm = mt.norm();
    let svd = nalgebra::SVD::try_new(mt, true, true, f64::EPSILON, 10_000)
        .ok_or(TensorError::SvdFailed { rows, cols, norm })?;
    let u_full = svd.u.as_ref().expect("requested");
    let vt_full = svd.v_t.as_ref().expect("requested");
    let sv = &svd.singular_values;

    // sort singular values descending (nalgebra does not guarantee order)
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).expect("finite singulars"));

    let total: f64 = sv.iter().map(|v| v * v).sum();
    let keep = chi.min(order.len());
    // sum the dropped tail directly; total - kept cancels catastrophically
    // when the tail is below f64 epsilon relative to the total
    let dropped: f64 = order[keep..].iter().map(|&i| sv[i] * sv[i]).sum();
    let discarded_weight = if total > 0.0 { dropped / total } else { 0.0 };

    let mut u = vec![0.0; rows * keep];
    let mut s = Vec::with_capacity(keep);
    let mut vt = vec![0.0; keep * cols];
    for (k, &src) in order[..keep].iter().enumerate() {
        s.push(sv[src]);
        for r in 0..rows {
            u[r * keep + k] = u_full[(r, src)];
        }
        for c in 0..cols {
            vt[k * cols + c] = vt_full[(src, c)];
        }
    }
    Ok(TruncatedSvd {
        u: DenseTensor::from_parts(vec![rows, keep], u),
        s,
        vt: DenseTensor::from_parts(vec![keep, cols], vt),
        discarded_weight,
    })
}

/// One tensor of a column: consumes `n_in` adjacent boundary sites (top to
/// bottom) and emits `n_out` new sites. Index order of `tensor` is all input
/// legs (top to bottom) then all output legs (top to bottom).
#[derive(Debug, Clone)]
pub struct ColumnTensor {
    tensor: DenseTensor,
    n_in: usize,
    n_out: usize,
    in_extents: Vec<usize>,
    out_extents: Vec<usize>,
    /// Exact factorization across the two output legs, precomputed so that
    /// two-output tensors split without a runtime SVD: tensor[in.., o1, o2]
    /// = sum_k head[in.., o1, k] * tail[k, o2].
    split: Option<(DenseTensor, DenseTensor)>,
}

impl ColumnTensor {
    pub fn new(tensor: DenseTensor, n_in: usize, n_out: usize) -> Result<Self, TensorError> {
        if tensor.rank() != n_in + n_out {
            return Err(TensorError::ShapeMismatch {
                dims: tensor.dims.clone(),
                expect: n_in + n_out,
                got: tensor.rank(),
            });
        }
        assert!(n_out <= 2, "column tensors emit at most two legs");
        let in_extents = tensor.dims[..n_in].to_vec();
        let out_extents = tensor.dims[n_in..].to_vec();
        let split = if n_out == 2 {
            Some(Self::factor_outputs(&tensor, n_in)?)
        } else {
            None
        };
        Ok(ColumnTensor {
            tensor,
            n_in,
            n_out,
            in_extents,
            out_extents,
            split,
        })
    }

    /// Exact rank factorization across (in.., o1 | o2), done once at
    /// construction. Singular values below 1e-13 of the largest are exact
    /// zeros of the structured tensors used here (delta and letter-probability
    /// tensors have rank <= 4); dropping them is rank detection, not
    /// truncation.
    fn factor_outputs(tensor: &DenseTensor, n_in: usize) -> Result<(DenseTensor, DenseTensor), TensorError> {
        let o2 = tensor.dims[n_in + 1];
        let lead: usize = tensor.dims[..n_in + 1].iter().product();
        let m = DenseTensor::from_parts(vec![lead, o2], tensor.data.clone());
        let svd = svd_truncate(&m, lead.max(o2))?;
        let cutoff = svd.s.first().copied().unwrap_or(0.0) * 1e-13;
        let rank = svd.s.iter().take_while(|&&v| v > cutoff).count().max(1);
        let mut head = vec![0.0; lead * rank];
        for r in 0..lead {
            for k in 0..rank {
                head[r * rank + k] = svd.u.data[r * svd.s.len() + k] * svd.s[k];
            }
        }
        let mut tail = vec![0.0; rank * o2];
        tail.copy_from_slice(&svd.vt.data[..rank * o2]);
        let mut head_dims = tensor.dims[..n_in + 1].to_vec();
        head_dims.push(rank);
        Ok((
            DenseTensor::from_parts(head_dims, head),
            DenseTensor::from_parts(vec![rank, o2], tail),
        ))
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }
}

/// Boundary matrix product state: the frontier of a column-by-column network
/// contraction. Sites are rank-3 (left bond, physical, right bond); the
/// outermost bonds have extent 1. `log_scale` carries the accumulated
/// natural-log rescaling factor, and `mantissa` the residual scalar once all
/// sites have been consumed.
#[derive(Debug, Clone)]
pub struct BoundaryMps {
    sites: Vec<DenseTensor>,
    log_scale: f64,
    mantissa: f64,
    zero: bool,
}

impl Default for BoundaryMps {
    fn default() -> Self {
        Self::new()
    }
}

impl BoundaryMps {
    /// The empty frontier (scalar 1) that the first column populates.
    pub fn new() -> Self {
        BoundaryMps {
            sites: Vec::new(),
            log_scale: 0.0,
            mantissa: 1.0,
            zero: false,
        }
    }

    pub fn sites(&self) -> &[DenseTensor] {
        &self.sites
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn max_bond(&self) -> usize {
        self.sites.iter().map(|s| s.dims[2]).max().unwrap_or(1)
    }

    /// The contracted value as (mantissa, log_scale), available once every
    /// site has been consumed: value = mantissa * exp(log_scale).
    pub fn scalar(&self) -> Option<(f64, f64)> {
        if self.zero {
            return Some((0.0, 0.0));
        }
        if self.sites.is_empty() {
            Some((self.mantissa, self.log_scale))
        } else {
            None
        }
    }

    /// Natural log of the contracted value; -inf for zero (or truncated to
    /// slightly negative) totals, never NaN.
    pub fn ln_value(&self) -> Option<f64> {
        let (mantissa, log_scale) = self.scalar()?;
        if mantissa > 0.0 {
            Some(mantissa.ln() + log_scale)
        } else {
            Some(f64::NEG_INFINITY)
        }
    }

    /// Contract one column into the boundary, compress every bond to <= chi,
    /// and rescale sites to unit max-entry. Returns the total discarded weight
    /// (sum of per-bond discarded fractions) for diagnostics.
    pub fn apply_column(&mut self, column: &[ColumnTensor], chi: usize) -> Result<f64, TensorError> {
        if chi == 0 {
            return Err(TensorError::InvalidChi);
        }
        if self.zero {
            return Ok(0.0);
        }
        let consumed: usize = column.iter().map(|ct| ct.n_in).sum();
        if consumed != self.sites.len() {
            return Err(TensorError::ColumnSiteCount {
                consumed,
                available: self.sites.len(),
            });
        }

        let old_sites = std::mem::take(&mut self.sites);
        let mut cursor = 0usize;
        let mut new_sites: Vec<DenseTensor> = Vec::with_capacity(old_sites.len() + 2);
        // bond matrix awaiting the next emitted site (from zero-output tensors
        // at the top of the column)
        let mut pending: Option<DenseTensor> = None;

        for ct in column {
            // fold the consumed run into (l, in_1, .., in_k, r)
            let mut run: Option<DenseTensor> = None;
            for site in &old_sites[cursor..cursor + ct.n_in] {
                run = Some(match run {
                    None => site.clone(),
                    Some(acc) => {
                        let last = acc.rank() - 1;
                        contract(&acc, site, &[(last, 0)])?
                    }
                });
            }
            cursor += ct.n_in;
            if let Some(run_t) = &run {
                let got_extents = &run_t.dims[1..run_t.rank() - 1];
                for (&got, &want) in got_extents.iter().zip(&ct.in_extents) {
                    if got != want {
                        return Err(TensorError::PhysicalExtent { got, want });
                    }
                }
            }

            let emitted = match (&run, ct.n_out) {
                (Some(run_t), _) => {
                    // contract input legs of the column tensor with the run's
                    // physical legs
                    let pairs: Vec<(usize, usize)> =
                        (0..ct.n_in).map(|i| (1 + i, i)).collect();
                    match ct.n_out {
                        0 => {
                            // (l, r) bond matrix
                            let m = contract(run_t, &ct.tensor, &pairs)?;
                            absorb_matrix(&mut new_sites, &mut pending, &mut self.mantissa, &mut self.log_scale, m)?;
                            Vec::new()
                        }
                        1 => {
                            let t = contract(run_t, &ct.tensor, &pairs)?; // (l, r, out)
                            vec![t.permute(&[0, 2, 1])]
                        }
                        2 => {
                            let (head, tail) = ct.split.as_ref().expect("precomputed");
                            // head: (in.., o1, k); run_t: (l, in.., r)
                            let h = contract(run_t, head, &pairs)?; // (l, r, o1, k)
                            let l = h.dims[0];
                            let r = h.dims[1];
                            let o1 = h.dims[2];
                            let k = h.dims[3];
                            let site1 = h.permute(&[0, 2, 3, 1]).reshape(vec![l, o1, k * r])?;
                            // site2 = tail ⊗ I_r laid out as (k*r, o2, r)
                            let o2 = tail.dims[1];
                            let mut site2 = vec![0.0; k * r * o2 * r];
                            for ki in 0..k {
                                for ri in 0..r {
                                    for oi in 0..o2 {
                                        site2[((ki * r + ri) * o2 + oi) * r + ri] =
                                            tail.data[ki * o2 + oi];
                                    }
                                }
                            }
                            vec![site1, DenseTensor::from_parts(vec![k * r, o2, r], site2)]
                        }
                        _ => unreachable!(),
                    }
                }
                (None, n_out) => {
                    // no inputs: a fresh block inserted into the chain
                    match n_out {
                        0 => {
                            let m = DenseTensor::from_parts(
                                vec![1, 1],
                                vec![ct.tensor.data[0]],
                            );
                            absorb_matrix(&mut new_sites, &mut pending, &mut self.mantissa, &mut self.log_scale, m)?;
                            Vec::new()
                        }
                        1 => {
                            let e = ct.out_extents[0];
                            vec![DenseTensor::from_parts(vec![1, e, 1], ct.tensor.data.clone())]
                        }
                        2 => {
                            let (head, tail) = ct.split.as_ref().expect("precomputed");
                            let (o1, k) = (head.dims[0], head.dims[1]);
                            let o2 = tail.dims[1];
                            vec![
                                DenseTensor::from_parts(vec![1, o1, k], head.data.clone()),
                                tail.clone().reshape(vec![k, o2, 1])?,
                            ]
                        }
                        _ => unreachable!(),
                    }
                }
            };
            for mut site in emitted {
                if let Some(m) = pending.take() {
                    site = contract(&m, &site, &[(1, 0)])?;
                }
                new_sites.push(site);
            }
        }
        if let Some(m) = pending.take() {
            // nothing emitted after the trailing bond matrix: fold it into the
            // last site or, when the chain is empty, into the scalar
            absorb_trailing(&mut new_sites, &mut self.mantissa, &mut self.log_scale, m)?;
        }
        self.sites = new_sites;

        let mut discarded = 0.0;
        if self.max_bond() > chi {
            discarded = self.compress(chi)?;
        }
        self.rescale()?;
        Ok(discarded)
    }

    /// One right-to-left canonicalization sweep (uncapped) then one
    /// left-to-right truncation sweep capped at chi.
    fn compress(&mut self, chi: usize) -> Result<f64, TensorError> {
        let n = self.sites.len();
        if n == 0 {
            return Ok(0.0);
        }
        // right-to-left: bring to right-canonical form
        for i in (1..n).rev() {
            let site = &self.sites[i];
            let (l, p, r) = (site.dims[0], site.dims[1], site.dims[2]);
            let m = DenseTensor::from_parts(vec![l, p * r], site.data.clone());
            let svd = svd_truncate(&m, l.min(p * r))?;
            let k = svd.s.len();
            self.sites[i] = svd.vt.reshape(vec![k, p, r])?;
            // carry u * diag(s) into the left neighbor
            let mut us = svd.u;
            for row in 0..l {
                for c in 0..k {
                    us.data[row * k + c] *= svd.s[c];
                }
            }
            self.sites[i - 1] = contract(&self.sites[i - 1], &us, &[(2, 0)])?;
        }
        // left-to-right: truncate each bond to chi
        let mut discarded = 0.0;
        for i in 0..n - 1 {
            let site = &self.sites[i];
            let (l, p, r) = (site.dims[0], site.dims[1], site.dims[2]);
            if r <= chi {
                continue;
            }
            let m = DenseTensor::from_parts(vec![l * p, r], site.data.clone());
            let svd = svd_truncate(&m, chi)?;
            discarded += svd.discarded_weight;
            let k = svd.s.len();
            self.sites[i] = svd.u.reshape(vec![l, p, k])?;
            let mut sv = svd.vt;
            for row in 0..k {
                for c in 0..r {
                    sv.data[row * r + c] *= svd.s[row];
                }
            }
            self.sites[i + 1] = contract(&sv, &self.sites[i + 1], &[(1, 0)])?;
        }
        Ok(discarded)
    }

    /// Scale every site to unit max-entry, moving the residue into log_scale.
    /// An exactly zero site collapses the whole contraction to zero.
    fn rescale(&mut self) -> Result<(), TensorError> {
        for site in &mut self.sites {
            let m = site.max_abs();
            if m == 0.0 {
                self.zero = true;
                self.sites.clear();
                return Ok(());
            }
            if !m.is_finite() {
                return Err(TensorError::NonFinite(0));
            }
            site.scale(1.0 / m);
            self.log_scale += m.ln();
        }
        Ok(())
    }
}

fn absorb_matrix(
    new_sites: &mut [DenseTensor],
    pending: &mut Option<DenseTensor>,
    mantissa: &mut f64,
    log_scale: &mut f64,
    m: DenseTensor,
) -> Result<(), TensorError> {
    // compose with anything already pending, then attach to the chain
    let m = match pending.take() {
        Some(prev) => contract(&prev, &m, &[(1, 0)])?,
        None => m,
    };
    if let Some(last) = new_sites.last_mut() {
        *last = contract(last, &m, &[(2, 0)])?;
        Ok(())
    } else if m.dims == [1, 1] {
        fold_scalar(mantissa, log_scale, m.data[0]);
        Ok(())
    } else {
        *pending = Some(m);
        Ok(())
    }
}

fn absorb_trailing(
    new_sites: &mut [DenseTensor],
    mantissa: &mut f64,
    log_scale: &mut f64,
    m: DenseTensor,
) -> Result<(), TensorError> {
    if let Some(last) = new_sites.last_mut() {
        *last = contract(last, &m, &[(2, 0)])?;
    } else {
        debug_assert_eq!(m.dims, vec![1, 1], "outer bonds have extent 1");
        fold_scalar(mantissa, log_scale, m.data[0]);
    }
    Ok(())
}

fn fold_scalar(mantissa: &mut f64, log_scale: &mut f64, v: f64) {
    *mantissa *= v;
    // keep the mantissa in a representable band
    if mantissa.abs() > 0.0 && mantissa.is_finite() {
        let m = mantissa.abs();
        if !(1e-100..=1e100).contains(&m) {
            *log_scale += m.ln();
            *mantissa = mantissa.signum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(rng: &mut ChaCha8Rng, dims: Vec<usize>) -> DenseTensor {
        let len = dims.iter().product();
        let data = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        DenseTensor::new(dims, data).unwrap()
    }

    #[test]
    fn matrix_times_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = rand_tensor(&mut rng, vec![3, 4]);
        let id = DenseTensor::eye(4);
        let out = contract(&a, &id, &[(1, 0)]).unwrap();
        assert_eq!(out.dims(), &[3, 4]);
        for (x, y) in out.data().iter().zip(a.data()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn unit_vector_dot_itself() {
        let e = DenseTensor::new(vec![5], vec![0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let out = contract(&e, &e, &[(0, 0)]).unwrap();
        assert_eq!(out.dims(), &[1]);
        assert!((out.data()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = rand_tensor(&mut rng, vec![3, 4]);
        let b = rand_tensor(&mut rng, vec![4, 5]);
        let out = contract(&a, &b, &[(1, 0)]).unwrap();
        for i in 0..3 {
            for j in 0..5 {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += a.data()[i * 4 + k] * b.data()[k * 5 + j];
                }
                assert!((out.data()[i * 5 + j] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn contract_rejects_extent_mismatch() {
        let a = DenseTensor::zeros(vec![2, 3]);
        let b = DenseTensor::zeros(vec![4, 2]);
        assert!(matches!(
            contract(&a, &b, &[(1, 0)]),
            Err(TensorError::ExtentMismatch { .. })
        ));
    }

    fn reconstruct(svd: &TruncatedSvd) -> DenseTensor {
        let k = svd.s.len();
        let mut us = svd.u.clone();
        let rows = us.dims()[0];
        for r in 0..rows {
            for c in 0..k {
                us.data[r * k + c] *= svd.s[c];
            }
        }
        contract(&us, &svd.vt, &[(1, 0)]).unwrap()
    }

    #[test]
    fn svd_exact_for_low_rank() {
        // rank-2 6x6 matrix, chi=4: no truncation, exact reconstruction
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = rand_tensor(&mut rng, vec![6, 2]);
        let v = rand_tensor(&mut rng, vec![2, 6]);
        let m = contract(&u, &v, &[(1, 0)]).unwrap();
        let svd = svd_truncate(&m, 4).unwrap();
        assert!(svd.discarded_weight < 1e-20);
        let back = reconstruct(&svd);
        for (x, y) in back.data().iter().zip(m.data()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn svd_discarded_weight_of_tiny_singular_value() {
        let m = DenseTensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1e-8]).unwrap();
        let svd = svd_truncate(&m, 1).unwrap();
        assert!((svd.discarded_weight - 1e-16).abs() < 1e-18);
        assert_eq!(svd.s.len(), 1);
        assert!((svd.s[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn svd_singular_values_nonincreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = rand_tensor(&mut rng, vec![7, 5]);
        let svd = svd_truncate(&m, 5).unwrap();
        for w in svd.s.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn truncation_matches_eckart_young() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = rand_tensor(&mut rng, vec![8, 8]);
        let full = svd_truncate(&m, 8).unwrap();
        let trunc = svd_truncate(&m, 4).unwrap();
        let back = reconstruct(&trunc);
        let err2: f64 = back
            .data()
            .iter()
            .zip(m.data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        let best2: f64 = full.s[4..].iter().map(|v| v * v).sum();
        assert!(
            err2 <= best2 * (1.0 + 1e-9) + 1e-12,
            "truncation error {err2} exceeds Eckart-Young bound {best2}"
        );
        let total: f64 = full.s.iter().map(|v| v * v).sum();
        assert!((trunc.discarded_weight - best2 / total).abs() < 1e-10);
    }

    #[test]
    fn svd_rejects_non_matrix_and_zero_chi() {
        let t = DenseTensor::zeros(vec![2, 2, 2]);
        assert!(matches!(svd_truncate(&t, 2), Err(TensorError::NotAMatrix(3))));
        let m = DenseTensor::zeros(vec![2, 2]);
        assert!(matches!(svd_truncate(&m, 0), Err(TensorError::InvalidChi)));
    }

    /// Brute-force oracle for layered networks: contract a sequence of columns
    /// by explicit summation over every leg assignment. Columns use the same
    /// (n_in, n_out) convention as apply_column.
    fn dense_oracle(columns: &[Vec<(DenseTensor, usize, usize)>]) -> f64 {
        // walk nested sums recursively: state = vector over current frontier
        // assignments (little-endian: first site = most significant)
        let mut frontier: Vec<f64> = vec![1.0];
        let mut extents: Vec<usize> = vec![];
        for col in columns {
            let mut new_frontier = vec![];
            // enumerate new frontier assignments
            let out_extents: Vec<usize> = col
                .iter()
                .flat_map(|(t, n_in, _)| t.dims()[*n_in..].iter().copied())
                .collect();
            let new_len: usize = out_extents.iter().product();
            for out_idx in 0..new_len.max(1) {
                // decode new assignment
                let mut rem = out_idx;
                let mut outs = vec![0usize; out_extents.len()];
                for (i, &e) in out_extents.iter().enumerate().rev() {
                    outs[i] = rem % e;
                    rem /= e;
                }
                let mut acc = 0.0;
                for (in_idx, &f) in frontier.iter().enumerate() {
                    if f == 0.0 {
                        continue;
                    }
                    let mut rem = in_idx;
                    let mut ins = vec![0usize; extents.len()];
                    for (i, &e) in extents.iter().enumerate().rev() {
                        ins[i] = rem % e;
                        rem /= e;
                    }
                    let mut prod = f;
                    let (mut ic, mut oc) = (0usize, 0usize);
                    for (t, n_in, n_out) in col {
                        let mut flat = 0usize;
                        for k in 0..*n_in {
                            flat = flat * t.dims()[k] + ins[ic + k];
                        }
                        for k in 0..*n_out {
                            flat = flat * t.dims()[n_in + k] + outs[oc + k];
                        }
                        prod *= t.data()[flat];
                        ic += n_in;
                        oc += n_out;
                    }
                    acc += prod;
                }
                new_frontier.push(acc);
            }
            frontier = new_frontier;
            extents = out_extents;
        }
        assert!(extents.is_empty());
        frontier[0]
    }

    fn run_mps(columns: &[Vec<(DenseTensor, usize, usize)>], chi: usize) -> (f64, f64) {
        let mut mps = BoundaryMps::new();
        let mut discarded = 0.0;
        for col in columns {
            let cts: Vec<ColumnTensor> = col
                .iter()
                .map(|(t, i, o)| ColumnTensor::new(t.clone(), *i, *o).unwrap())
                .collect();
            discarded += mps.apply_column(&cts, chi).unwrap();
        }
        let (m, ls) = mps.scalar().expect("all sites consumed");
        (m * ls.exp(), discarded)
    }

    fn random_network(
        rng: &mut ChaCha8Rng,
        height: usize,
        depth: usize,
        nonneg: bool,
    ) -> Vec<Vec<(DenseTensor, usize, usize)>> {
        // layered network: first column emits `height` legs, middle columns
        // are height x (1-in, 1-out), last column closes every leg
        let mut gen = |dims: Vec<usize>| {
            let len: usize = dims.iter().product();
            let data: Vec<f64> = (0..len)
                .map(|_| {
                    if nonneg {
                        rng.gen_range(0.0..1.0)
                    } else {
                        rng.gen_range(-1.0..1.0)
                    }
                })
                .collect();
            DenseTensor::new(dims, data).unwrap()
        };
        let mut columns = vec![(0..height).map(|_| (gen(vec![2]), 0, 1)).collect::<Vec<_>>()];
        for _ in 0..depth {
            columns.push((0..height).map(|_| (gen(vec![2, 2]), 1, 1)).collect());
        }
        columns.push((0..height).map(|_| (gen(vec![2]), 1, 0)).collect());
        columns
    }

    #[test]
    fn identity_column_leaves_scalar_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let base = random_network(&mut rng, 3, 1, false);
        let mut with_id = base.clone();
        let id_col: Vec<(DenseTensor, usize, usize)> =
            (0..3).map(|_| (DenseTensor::eye(2), 1, 1)).collect();
        with_id.insert(2, id_col);
        let (a, _) = run_mps(&base, 64);
        let (b, _) = run_mps(&with_id, 64);
        assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn uncapped_two_column_network_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let columns = random_network(&mut rng, 4, 0, false);
        let oracle = dense_oracle(&columns);
        let (val, discarded) = run_mps(&columns, usize::MAX);
        assert!(discarded == 0.0);
        assert!(
            (val - oracle).abs() <= 1e-10 * oracle.abs().max(1.0),
            "mps {val} vs oracle {oracle}"
        );
    }

    #[test]
    fn scalar_matches_dense_oracle_on_deeper_network() {
        // <= 20 tensors, exact contraction, relative 1e-8
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let columns = random_network(&mut rng, 4, 2, false); // 4 + 8 + 4 + 4 = 20
        let oracle = dense_oracle(&columns);
        let (val, _) = run_mps(&columns, usize::MAX);
        assert!(
            (val - oracle).abs() <= 1e-8 * oracle.abs().max(1e-30),
            "mps {val} vs oracle {oracle}"
        );
    }

    #[test]
    fn two_output_tensors_split_exactly() {
        // column with a 2-output tensor vs the dense oracle
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let fan = rand_tensor(&mut rng, vec![2, 2]); // 0-in 2-out
        let mid: Vec<(DenseTensor, usize, usize)> = vec![
            (rand_tensor(&mut rng, vec![2, 2, 2]), 1, 2),
            (rand_tensor(&mut rng, vec![2, 2]), 1, 1),
        ];
        let close: Vec<(DenseTensor, usize, usize)> = (0..3)
            .map(|_| (rand_tensor(&mut rng, vec![2]), 1, 0))
            .collect();
        let columns = vec![vec![(fan, 0, 2)], mid, close];
        let oracle = dense_oracle(&columns);
        let (val, _) = run_mps(&columns, usize::MAX);
        assert!((val - oracle).abs() <= 1e-10 * oracle.abs().max(1.0));
    }

    #[test]
    fn truncation_monotone_in_chi() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..5 {
            let columns = random_network(&mut rng, 6, 3, true);
            let (_, d8) = run_mps(&columns, 8);
            let (_, d16) = run_mps(&columns, 16);
            assert!(
                d16 <= d8 + 1e-15,
                "discarded weight should not grow with chi: {d16} vs {d8}"
            );
        }
    }

    #[test]
    fn zero_column_yields_minus_infinity_not_nan() {
        let columns = vec![
            vec![(DenseTensor::new(vec![2], vec![0.0, 0.0]).unwrap(), 0, 1)],
            vec![(DenseTensor::new(vec![2], vec![0.3, 0.7]).unwrap(), 1, 0)],
        ];
        let mut mps = BoundaryMps::new();
        for col in &columns {
            let cts: Vec<ColumnTensor> = col
                .iter()
                .map(|(t, i, o)| ColumnTensor::new(t.clone(), *i, *o).unwrap())
                .collect();
            mps.apply_column(&cts, 16).unwrap();
        }
        let ln = mps.ln_value().unwrap();
        assert!(ln.is_infinite() && ln < 0.0);
        assert!(!ln.is_nan());
    }

    #[test]
    fn log_scale_handles_underflow_scale_products() {
        // 40 sequential scalar factors of 1e-12 would underflow f64 without
        // log-scale accumulation
        let mut columns = vec![vec![(
            DenseTensor::new(vec![2], vec![1e-12, 0.0]).unwrap(),
            0,
            1,
        )]];
        for _ in 0..40 {
            columns.push(vec![(
                DenseTensor::new(vec![2, 2], vec![1e-12, 0.0, 0.0, 1e-12]).unwrap(),
                1,
                1,
            )]);
        }
        columns.push(vec![(DenseTensor::new(vec![2], vec![1.0, 0.0]).unwrap(), 1, 0)]);
        let mut mps = BoundaryMps::new();
        for col in &columns {
            let cts: Vec<ColumnTensor> = col
                .iter()
                .map(|(t, i, o)| ColumnTensor::new(t.clone(), *i, *o).unwrap())
                .collect();
            mps.apply_column(&cts, 4).unwrap();
        }
        let ln = mps.ln_value().unwrap();
        let expect = 41.0 * (1e-12f64).ln();
        assert!((ln - expect).abs() < 1e-6 * expect.abs());
    }
}
