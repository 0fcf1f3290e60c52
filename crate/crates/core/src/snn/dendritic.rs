//! Inter-layer connections: plain weighted sums and dendritic branches with maxout.
//!
//! Each postsynaptic neuron splits its inputs into `d` disjoint branches. A
//! branch sums its weighted inputs; the neuron takes the largest branch sum.
//! The partition is regenerated from a seed, so only the seed is stored.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diff::{kernels, maxout_reduce, CustomOp, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Branch assignment of every (output, input) pair. Branch indices are 0-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BranchMask {
    n_in: usize,
    n_out: usize,
    branches: usize,
    seed: u64,
    /// `[n_out × n_in]`
    assignment: Vec<u8>,
}

/// Builds the branch partition for `n_out` neurons with `n_in` inputs each.
///
/// Per neuron, a seeded shuffle of `0..n_in` is cut into `d` contiguous chunks;
/// chunk `m` feeds branch `m`. When `d` does not divide `n_in` the first
/// `n_in % d` chunks get one extra input.
pub fn build_mask(seed: u64, n_in: usize, n_out: usize, branches: usize) -> Result<BranchMask> {
    if branches == 0 || branches > n_in {
        return Err(Error::config(format!(
            "branch count must lie in [1, {n_in}], got {branches}"
        )));
    }
    if branches > u8::MAX as usize + 1 {
        return Err(Error::config("at most 256 branches are supported"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = n_in / branches;
    let extra = n_in % branches;
    let mut assignment = vec![0u8; n_out * n_in];
    let mut order: Vec<usize> = (0..n_in).collect();
    for j in 0..n_out {
        order.iter_mut().enumerate().for_each(|(i, o)| *o = i);
        order.shuffle(&mut rng);
        let row = &mut assignment[j * n_in..(j + 1) * n_in];
        let mut pos = 0;
        for m in 0..branches {
            let size = base + usize::from(m < extra);
            for &i in &order[pos..pos + size] {
                row[i] = m as u8;
            }
            pos += size;
        }
    }
    Ok(BranchMask {
        n_in,
        n_out,
        branches,
        seed,
        assignment,
    })
}

impl BranchMask {
    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn branches(&self) -> usize {
        self.branches
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Branch feeding input `i` of neuron `j`.
    pub fn branch_of(&self, j: usize, i: usize) -> usize {
        self.assignment[j * self.n_in + i] as usize
    }

    pub fn assignment(&self) -> &[u8] {
        &self.assignment
    }

    /// Input indices of every branch of neuron `j`.
    pub fn branch_sets(&self, j: usize) -> Vec<Vec<usize>> {
        let mut sets = vec![Vec::new(); self.branches];
        for i in 0..self.n_in {
            sets[self.branch_of(j, i)].push(i);
        }
        sets
    }

    /// `weights ⊙ [mask == m]`, row-major `[n_out × n_in]`.
    fn masked(&self, weights: &[f64], m: usize) -> Vec<f64> {
        if self.branches == 1 {
            return weights.to_vec();
        }
        weights
            .iter()
            .zip(&self.assignment)
            .map(|(&w, &b)| if b as usize == m { w } else { 0.0 })
            .collect()
    }
}

/// Dendritic inter-layer connection: one weight per (output, input) pair, like a dense layer.
#[derive(Clone, Debug)]
pub struct DendriticLayer {
    /// `[n_out × n_in]`
    pub weights: Tensor,
    mask: Arc<BranchMask>,
}

impl DendriticLayer {
    pub fn new(weights: Tensor, mask_seed: u64, branches: usize) -> Result<Self> {
        if weights.shape().len() != 2 {
            return Err(Error::config("dendritic weights must be [n_out × n_in]"));
        }
        let mask = build_mask(mask_seed, weights.cols(), weights.rows(), branches)?;
        Ok(DendriticLayer {
            weights,
            mask: Arc::new(mask),
        })
    }

    pub fn mask(&self) -> &Arc<BranchMask> {
        &self.mask
    }

    pub fn n_in(&self) -> usize {
        self.mask.n_in
    }

    pub fn n_out(&self) -> usize {
        self.mask.n_out
    }

    pub fn branches(&self) -> usize {
        self.mask.branches
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len()
    }
}

/// `out_j = w_j · spikes`.
pub fn inter_dense(spikes: &[f64], weights: &Tensor) -> Vec<f64> {
    let (n_out, n_in) = (weights.rows(), weights.cols());
    assert_eq!(spikes.len(), n_in);
    let mut out = vec![0.0; n_out];
    kernels::matmul_wt(spikes, weights.data(), 1, n_in, n_out, &mut out, false);
    out
}

/// `out_j = max_m Σ_{i ∈ branch m} W_ji · spikes_i`.
pub fn inter_dendritic(spikes: &[f64], layer: &DendriticLayer) -> Vec<f64> {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::from_parts(vec![1, spikes.len()], spikes.to_vec()));
    let w = tape.constant(layer.weights.clone());
    let y = dendritic_var(&mut tape, x, w, layer.mask());
    tape.value(y).data().to_vec()
}

/// Batches up to this size skip the masked weight copies.
const SMALL_BATCH: usize = 8;

/// Branch sums: `x [B × n_in]`, `w [n_out × n_in]` → `[B × d × n_out]`.
struct BranchSums(Arc<BranchMask>);

impl CustomOp for BranchSums {
    fn name(&self) -> &'static str {
        "dendritic_branches"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Tensor {
        let (x, w) = (inputs[0], inputs[1]);
        let mask = &self.0;
        let (rows, n_in, n_out, d) = (x.rows(), mask.n_in, mask.n_out, mask.branches);
        assert_eq!(x.cols(), n_in, "dendritic layer: input width mismatch");
        let mut out = vec![0.0; rows * d * n_out];
        if d == 1 {
            kernels::matmul_wt(x.data(), w.data(), rows, n_in, n_out, &mut out, false);
        } else if rows <= SMALL_BATCH {
            let mut acc = vec![0.0; d];
            for (b, xb) in x.data().chunks_exact(n_in).enumerate() {
                for j in 0..n_out {
                    acc.iter_mut().for_each(|v| *v = 0.0);
                    let wj = &w.data()[j * n_in..(j + 1) * n_in];
                    let aj = &mask.assignment[j * n_in..(j + 1) * n_in];
                    for ((&xi, &wi), &a) in xb.iter().zip(wj).zip(aj) {
                        acc[a as usize] += xi * wi;
                    }
                    for (m, &v) in acc.iter().enumerate() {
                        out[(b * d + m) * n_out + j] = v;
                    }
                }
            }
        } else {
            let mut part = vec![0.0; rows * n_out];
            for m in 0..d {
                let wm = mask.masked(w.data(), m);
                kernels::matmul_wt(x.data(), &wm, rows, n_in, n_out, &mut part, false);
                for b in 0..rows {
                    out[(b * d + m) * n_out..(b * d + m + 1) * n_out]
                        .copy_from_slice(&part[b * n_out..(b + 1) * n_out]);
                }
            }
        }
        Tensor::from_parts(vec![rows, d, n_out], out)
    }

    fn backward(
        &self,
        inputs: &[&Tensor],
        _output: &Tensor,
        grad: &[f64],
    ) -> Vec<Option<Vec<f64>>> {
        let (x, w) = (inputs[0], inputs[1]);
        let mask = &self.0;
        let (rows, n_in, n_out, d) = (x.rows(), mask.n_in, mask.n_out, mask.branches);
        let mut dx = vec![0.0; rows * n_in];
        let mut dw = vec![0.0; n_out * n_in];
        let mut gm = vec![0.0; rows * n_out];
        let mut dwm = vec![0.0; n_out * n_in];
        for m in 0..d {
            for b in 0..rows {
                gm[b * n_out..(b + 1) * n_out]
                    .copy_from_slice(&grad[(b * d + m) * n_out..(b * d + m + 1) * n_out]);
            }
            let wm = mask.masked(w.data(), m);
            kernels::matmul_acc(&gm, &wm, rows, n_out, n_in, &mut dx);
            dwm.iter_mut().for_each(|v| *v = 0.0);
            kernels::matmul_tn_acc(&gm, x.data(), rows, n_out, n_in, &mut dwm);
            for ((acc, g), &a) in dw.iter_mut().zip(&dwm).zip(&mask.assignment) {
                if a as usize == m {
                    *acc += g;
                }
            }
        }
        vec![Some(dx), Some(dw)]
    }
}

/// Differentiable dendritic connection: branch sums followed by maxout.
pub fn dendritic_var(tape: &mut Tape, x: Var, w: Var, mask: &Arc<BranchMask>) -> Var {
    let branches = tape.custom(Box::new(BranchSums(Arc::clone(mask))), &[x, w]);
    maxout_reduce(tape, branches)
}
