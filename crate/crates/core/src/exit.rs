//! Multi-edge-type EXIT density evolution over the BEC.
//!
//! The tracked state is `I_EV ∈ [0,1]^{n_e}`, the average extrinsic
//! information on VN→CN edges of each type. One application of the map
//! `f(I_EV, ε)` runs a CN pass with `I_AC = I_EV` followed by a VN pass with
//! `I_AV = I_EC`.
//!
//! Per-node extrinsic functions are evaluated from integer coefficients
//!
//! ```text
//! a_{t,z} = (n_e − t_e) ẽ_{n−t; b−z} − (t_e + 1) ẽ_{n−t−1_e; b−z}
//! ```
//!
//! built once from the information-function tables, where `t_l` counts erased
//! incoming messages of type `l` and `z` erased channel bits. `a_{t,z}` is the
//! number of (socket of type `e`, erasure pattern) pairs whose outgoing message
//! stays erased, so the extrinsic information is one minus the weighted sum
//! over patterns divided by the socket count. The weighted sum is a tensor
//! contraction with one weight vector per axis, evaluated axis by axis.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::ensemble::{CnType, EnsembleSpec, VnType};
use crate::error::{Error, Result};
use crate::inffunc::{InfoFunctionTable, TableCache};

/// Slack allowed before an extrinsic value outside `[0,1]` is treated as a bug.
const RANGE_SLACK: f64 = 1e-9;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 20_000;
pub const DEFAULT_TOL_EPS: f64 = 1e-6;

/// Progress below this per iteration, with the state still far from 1, is a
/// stall at a non-trivial fixed point.
const STALL_STEP: f64 = 1e-13;
const STALL_DEFICIT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitState {
    pub i_ev: Vec<f64>,
    pub iteration: usize,
    pub epsilon: f64,
}

/// Coefficients of one (node type, outgoing edge type) pair, laid out
/// row-major over `(t_1, …, t_{n_e}, z)`.
#[derive(Debug, Clone)]
pub struct ExitCoefficients {
    /// Number of values per axis: `t_l ∈ 0..=n_l`, then `z ∈ 0..=b`.
    dims: Vec<usize>,
    exact: Vec<i64>,
    values: Vec<f64>,
    /// Socket count of the outgoing edge type.
    sockets: usize,
}

impl ExitCoefficients {
    fn build(table: &InfoFunctionTable, e: usize) -> Result<Self> {
        let limits = table.limits();
        let n_e = limits.len();
        let b = table.max_u();
        let q_e = limits[e];
        debug_assert!(q_e >= 1);
        let mut dims: Vec<usize> = limits.iter().map(|&q| q + 1).collect();
        dims[e] = q_e;
        dims.push(b + 1);
        let len: usize = dims.iter().product();
        let mut exact = Vec::with_capacity(len);
        let mut t = vec![0usize; n_e + 1];
        let mut known = vec![0usize; n_e];
        for _ in 0..len {
            for l in 0..n_e {
                known[l] = limits[l] - t[l];
            }
            let u = b - t[n_e];
            let te = t[e] as i128;
            let with = table.get(&known, u) as i128;
            known[e] -= 1;
            let without = table.get(&known, u) as i128;
            let a = (q_e as i128 - te) * with - (te + 1) * without;
            exact.push(i64::try_from(a).map_err(|_| {
                Error::Internal(format!("EXIT coefficient {a} does not fit in 64 bits"))
            })?);
            // advance the mixed-radix counter, last axis fastest
            for axis in (0..=n_e).rev() {
                t[axis] += 1;
                if t[axis] < dims[axis] {
                    break;
                }
                t[axis] = 0;
            }
        }
        let values = exact.iter().map(|&a| a as f64).collect();
        Ok(ExitCoefficients {
            dims,
            exact,
            values,
            sockets: q_e,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Exact coefficient at erased-message counts `t` and erased channel bits `z`.
    pub fn exact(&self, t: &[usize], z: usize) -> i64 {
        let mut idx = 0;
        for (axis, &v) in t.iter().chain(std::iter::once(&z)).enumerate() {
            assert!(v < self.dims[axis], "index out of range on axis {axis}");
            idx = idx * self.dims[axis] + v;
        }
        self.exact[idx]
    }

    pub fn iter_exact(&self) -> impl Iterator<Item = i64> + '_ {
        self.exact.iter().copied()
    }

    /// `1 − (1/n_e) Σ_{t,z} w(t,z) a_{t,z}` with product weights.
    fn evaluate(&self, incoming: &[f64], epsilon: f64, e: usize) -> Result<f64> {
        let n_e = incoming.len();
        let mut weights: Vec<Vec<f64>> = Vec::with_capacity(n_e + 1);
        for (l, &x) in incoming.iter().enumerate() {
            let n = self.dims[l] - 1;
            weights.push(
                (0..=n)
                    .map(|t| (1.0 - x).powi(t as i32) * x.powi((n - t) as i32))
                    .collect(),
            );
        }
        let b = self.dims[n_e] - 1;
        weights.push(
            (0..=b)
                .map(|z| epsilon.powi(z as i32) * (1.0 - epsilon).powi((b - z) as i32))
                .collect(),
        );
        let erased = contract(&self.values, &self.dims, &weights);
        let out = 1.0 - erased / self.sockets as f64;
        if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&out) || !out.is_finite() {
            return Err(Error::Internal(format!(
                "extrinsic value {out} outside [0,1] on edge type {}",
                e + 1
            )));
        }
        Ok(out.clamp(0.0, 1.0))
    }
}

/// Full contraction of a row-major tensor with one weight vector per axis.
fn contract(values: &[f64], dims: &[usize], weights: &[Vec<f64>]) -> f64 {
    let mut cur = values.to_vec();
    let mut next = Vec::with_capacity(cur.len());
    for axis in (0..dims.len()).rev() {
        let d = dims[axis];
        let w = &weights[axis];
        next.clear();
        next.extend(
            cur.chunks_exact(d)
                .map(|chunk| chunk.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()),
        );
        std::mem::swap(&mut cur, &mut next);
    }
    cur[0]
}

/// Precomputed coefficients of one node type, one entry per edge type
/// (`None` where the node has no socket of that type).
#[derive(Debug, Clone)]
struct NodeExit {
    per_edge: Vec<Option<ExitCoefficients>>,
}

impl NodeExit {
    fn new(table: &InfoFunctionTable) -> Result<Self> {
        let per_edge = table
            .limits()
            .iter()
            .enumerate()
            .map(|(e, &q)| {
                (q > 0)
                    .then(|| ExitCoefficients::build(table, e))
                    .transpose()
            })
            .collect::<Result<_>>()?;
        Ok(NodeExit { per_edge })
    }

    fn exit(&self, incoming: &[f64], epsilon: f64, e: usize) -> Result<f64> {
        let c = self.per_edge[e].as_ref().ok_or_else(|| {
            Error::validation(format!("node has no socket of edge type {}", e + 1))
        })?;
        c.evaluate(incoming, epsilon, e)
    }
}

fn check_inputs(incoming: &[f64], n_e: usize) -> Result<()> {
    if incoming.len() != n_e {
        return Err(Error::validation(format!(
            "state has {} components, expected {n_e}",
            incoming.len()
        )));
    }
    if let Some(x) = incoming.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::validation(format!(
            "information value {x} outside [0,1]"
        )));
    }
    Ok(())
}

/// VN extrinsic information on edge type `e` (0-based).
pub fn vn_exit(vn: &VnType, n_e: usize, i_av: &[f64], epsilon: f64, e: usize) -> Result<f64> {
    check_inputs(i_av, n_e)?;
    let table = TableCache::global().vn(vn, n_e)?;
    NodeExit::new(&table)?.exit(i_av, epsilon, e)
}

/// CN extrinsic information on edge type `e` (0-based).
pub fn cn_exit(cn: &CnType, n_e: usize, i_ac: &[f64], e: usize) -> Result<f64> {
    check_inputs(i_ac, n_e)?;
    let table = TableCache::global().cn(cn, n_e)?;
    NodeExit::new(&table)?.exit(i_ac, 1.0, e)
}

/// The CN evaluated as a VN with the same generator whose channel erases
/// every information bit.
pub fn cn_exit_as_vn(cn: &CnType, n_e: usize, i_ac: &[f64], e: usize) -> Result<f64> {
    let as_vn = VnType {
        name: cn.name.clone(),
        generator: cn.generator.clone(),
        puncture: vec![true; cn.h()],
        socket_types: cn.socket_types.clone(),
        count: cn.count,
        min_distance: cn.min_distance,
    };
    vn_exit(&as_vn, n_e, i_ac, 1.0, e)
}

/// EXIT recursion of one ensemble with all coefficients precomputed.
#[derive(Debug, Clone)]
pub struct ExitModel {
    n_e: usize,
    vn: Vec<NodeExit>,
    cn: Vec<NodeExit>,
    lambda: Vec<Vec<f64>>,
    rho: Vec<Vec<f64>>,
    edges: Vec<u64>,
    vn_tables: Vec<Arc<InfoFunctionTable>>,
}

impl ExitModel {
    pub fn new(spec: &EnsembleSpec) -> Result<Self> {
        Self::with_cache(spec, TableCache::global())
    }

    pub fn with_cache(spec: &EnsembleSpec, cache: &TableCache) -> Result<Self> {
        let n_e = spec.num_edge_types();
        let vn_tables = spec
            .vn_types()
            .iter()
            .map(|v| cache.vn(v, n_e))
            .collect::<Result<Vec<_>>>()?;
        let cn = spec
            .cn_types()
            .iter()
            .map(|c| NodeExit::new(&*cache.cn(c, n_e)?))
            .collect::<Result<_>>()?;
        let vn = vn_tables
            .iter()
            .map(|t| NodeExit::new(t))
            .collect::<Result<_>>()?;
        let lambda = (0..spec.vn_types().len())
            .map(|g| (0..n_e).map(|l| spec.lambda_f64(g, l)).collect())
            .collect();
        let rho = (0..spec.cn_types().len())
            .map(|d| (0..n_e).map(|l| spec.rho_f64(d, l)).collect())
            .collect();
        Ok(ExitModel {
            n_e,
            vn,
            cn,
            lambda,
            rho,
            edges: spec.edges_per_type().to_vec(),
            vn_tables,
        })
    }

    pub fn num_edge_types(&self) -> usize {
        self.n_e
    }

    pub fn vn_coefficients(&self, vn: usize, e: usize) -> Option<&ExitCoefficients> {
        self.vn[vn].per_edge[e].as_ref()
    }

    pub fn cn_coefficients(&self, cn: usize, e: usize) -> Option<&ExitCoefficients> {
        self.cn[cn].per_edge[e].as_ref()
    }

    pub fn vn_table(&self, vn: usize) -> &InfoFunctionTable {
        &self.vn_tables[vn]
    }

    /// `I_EC` as a function of `I_AC` (ρ-weighted CN mixture).
    pub fn cn_pass(&self, i_ac: &[f64]) -> Result<Vec<f64>> {
        check_inputs(i_ac, self.n_e)?;
        self.mix(&self.cn, &self.rho, i_ac, 1.0)
    }

    /// `I_EV` as a function of `I_AV` and ε (λ-weighted VN mixture).
    pub fn vn_pass(&self, i_av: &[f64], epsilon: f64) -> Result<Vec<f64>> {
        check_inputs(i_av, self.n_e)?;
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::validation(format!(
                "erasure probability {epsilon} outside [0,1]"
            )));
        }
        self.mix(&self.vn, &self.lambda, i_av, epsilon)
    }

    fn mix(
        &self,
        nodes: &[NodeExit],
        frac: &[Vec<f64>],
        x: &[f64],
        epsilon: f64,
    ) -> Result<Vec<f64>> {
        (0..self.n_e)
            .map(|e| {
                if self.edges[e] == 0 {
                    return Ok(1.0);
                }
                let mut acc = 0.0;
                for (node, w) in nodes.iter().zip(frac) {
                    if w[e] > 0.0 {
                        acc += w[e] * node.exit(x, epsilon, e)?;
                    }
                }
                Ok(acc.clamp(0.0, 1.0))
            })
            .collect()
    }

    /// `f(I_EV, ε)`: CN pass then VN pass.
    pub fn map(&self, i_ev: &[f64], epsilon: f64) -> Result<Vec<f64>> {
        let i_ec = self.cn_pass(i_ev)?;
        self.vn_pass(&i_ec, epsilon)
    }

    pub fn step(&self, state: &ExitState) -> Result<ExitState> {
        Ok(ExitState {
            i_ev: self.map(&state.i_ev, state.epsilon)?,
            iteration: state.iteration + 1,
            epsilon: state.epsilon,
        })
    }

    /// `I⁰_EV(ε) = f(0, ε)`.
    pub fn initial_state(&self, epsilon: f64) -> Result<ExitState> {
        Ok(ExitState {
            i_ev: self.map(&vec![0.0; self.n_e], epsilon)?,
            iteration: 0,
            epsilon,
        })
    }

    pub fn run_to_fixed_point(
        &self,
        epsilon: f64,
        max_iters: usize,
        tol: f64,
        record: bool,
    ) -> Result<ExitRun> {
        if tol <= 0.0 {
            return Err(Error::validation("convergence tolerance must be positive"));
        }
        let mut state = self.initial_state(epsilon)?;
        let mut trajectory = Vec::new();
        loop {
            if record {
                trajectory.push(state.clone());
            }
            let deficit = deficit(&state.i_ev);
            if deficit <= tol {
                return Ok(ExitRun::finish(true, state, trajectory));
            }
            if state.iteration >= max_iters {
                return Ok(ExitRun::finish(false, state, trajectory));
            }
            let next = self.step(&state)?;
            let moved = next
                .i_ev
                .iter()
                .zip(&state.i_ev)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            state = next;
            if moved < STALL_STEP && deficit > STALL_DEFICIT {
                if record {
                    trajectory.push(state.clone());
                }
                return Ok(ExitRun::finish(false, state, trajectory));
            }
        }
    }

    /// Largest ε (to within `tol_eps`) for which density evolution reaches 1.
    pub fn threshold(&self, opts: &ThresholdOptions) -> Result<ThresholdResult> {
        if opts.tol_eps <= 0.0 {
            return Err(Error::validation("threshold tolerance must be positive"));
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut probes = 0;
        let mut de_iterations = 0;
        while (hi - lo) / 2.0 > opts.tol_eps {
            let mid = 0.5 * (lo + hi);
            let run = self.run_to_fixed_point(mid, opts.max_iters, opts.tol_fp, false)?;
            probes += 1;
            de_iterations += run.iterations;
            if run.converged {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(ThresholdResult {
            threshold: 0.5 * (lo + hi),
            half_width: 0.5 * (hi - lo),
            probes,
            de_iterations,
        })
    }

    /// Finite-difference Jacobian of `f` at `at`; `(l, m)` is `∂f_l/∂I_EV,m`.
    /// Central differences in the interior, second-order one-sided
    /// differences within `h` of either boundary.
    pub fn numerical_jacobian(&self, at: &[f64], epsilon: f64, h: f64) -> Result<DMatrix<f64>> {
        if h.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::validation("finite-difference step must be positive"));
        }
        check_inputs(at, self.n_e)?;
        let n = self.n_e;
        let eval = |m: usize, delta: f64| -> Result<Vec<f64>> {
            let mut x = at.to_vec();
            x[m] += delta;
            self.map(&x, epsilon)
        };
        let mut jac = DMatrix::zeros(n, n);
        let centre = self.map(at, epsilon)?;
        for m in 0..n {
            let col: Vec<f64> = if at[m] - h >= 0.0 && at[m] + h <= 1.0 {
                let (p, q) = (eval(m, h)?, eval(m, -h)?);
                (0..n).map(|l| (p[l] - q[l]) / (2.0 * h)).collect()
            } else if at[m] + h > 1.0 {
                let (a, b) = (eval(m, -h)?, eval(m, -2.0 * h)?);
                (0..n)
                    .map(|l| (3.0 * centre[l] - 4.0 * a[l] + b[l]) / (2.0 * h))
                    .collect()
            } else {
                let (a, b) = (eval(m, h)?, eval(m, 2.0 * h)?);
                (0..n)
                    .map(|l| (-3.0 * centre[l] + 4.0 * a[l] - b[l]) / (2.0 * h))
                    .collect()
            };
            for l in 0..n {
                jac[(l, m)] = col[l];
            }
        }
        Ok(jac)
    }
}

/// `max_e (1 − I_e)`.
pub fn deficit(i_ev: &[f64]) -> f64 {
    i_ev.iter().map(|x| 1.0 - x).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExitRun {
    pub converged: bool,
    /// Number of map applications after the initial state.
    pub iterations: usize,
    pub final_state: ExitState,
    pub trajectory: Vec<ExitState>,
}

impl ExitRun {
    fn finish(converged: bool, final_state: ExitState, trajectory: Vec<ExitState>) -> Self {
        ExitRun {
            converged,
            iterations: final_state.iteration,
            final_state,
            trajectory,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThresholdOptions {
    pub tol_eps: f64,
    pub max_iters: usize,
    pub tol_fp: f64,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        ThresholdOptions {
            tol_eps: DEFAULT_TOL_EPS,
            max_iters: DEFAULT_MAX_ITERS,
            tol_fp: DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThresholdResult {
    pub threshold: f64,
    pub half_width: f64,
    pub probes: usize,
    pub de_iterations: usize,
}

/// Convenience wrapper: build the model and bisect.
pub fn threshold(spec: &EnsembleSpec, opts: &ThresholdOptions) -> Result<ThresholdResult> {
    ExitModel::new(spec)?.threshold(opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library;
    use approx::assert_abs_diff_eq;

    #[test]
    fn repetition_closed_form() {
        for q in 2..=4 {
            let spec = library::regular_ldpc(q, 6, 1);
            let vn = &spec.vn_types()[0];
            for &x in &[0.0, 0.1, 0.37, 0.8, 1.0] {
                for &eps in &[0.0, 0.2, 0.5, 0.93, 1.0] {
                    let got = vn_exit(vn, 1, &[x], eps, 0).unwrap();
                    let want = 1.0 - eps * (1.0 - x).powi(q as i32 - 1);
                    assert_abs_diff_eq!(got, want, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn spc_closed_form() {
        for s in 3..=6 {
            let spec = library::regular_ldpc(3, s, 1);
            let cn = &spec.cn_types()[0];
            for &x in &[0.0f64, 0.25, 0.5, 0.9, 1.0] {
                let want = x.powi(s as i32 - 1);
                assert_abs_diff_eq!(cn_exit(cn, 1, &[x], 0).unwrap(), want, epsilon = 1e-14);
                assert_abs_diff_eq!(
                    cn_exit_as_vn(cn, 1, &[x], 0).unwrap(),
                    want,
                    epsilon = 1e-14
                );
            }
        }
    }

    #[test]
    fn mixed_type_spc() {
        let spec = library::example_two_repetition(3, 1);
        let cn = &spec.cn_types()[0];
        let (a, b) = (0.3, 0.7);
        assert_abs_diff_eq!(cn_exit(cn, 2, &[a, b], 0).unwrap(), b * b, epsilon = 1e-14);
        assert_abs_diff_eq!(cn_exit(cn, 2, &[a, b], 1).unwrap(), a * b, epsilon = 1e-14);
    }

    #[test]
    fn all_known_inputs_give_one() {
        let spec = library::example_one_spc(3, 5, 1);
        let model = ExitModel::new(&spec).unwrap();
        for &eps in &[0.01, 0.5, 0.99] {
            assert_eq!(model.map(&[1.0, 1.0], eps).unwrap(), vec![1.0, 1.0]);
        }
    }

    #[test]
    fn reliable_channel() {
        let spec = library::example_one_spc(3, 3, 1);
        let vn = &spec.vn_types()[0];
        assert_eq!(vn_exit(vn, 2, &[0.0, 0.0], 0.0, 0).unwrap(), 1.0);
        let model = ExitModel::new(&spec).unwrap();
        assert_eq!(model.map(&[0.2, 0.6], 0.0).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn unpunctured_zero_pattern_coefficients_vanish() {
        let spec = library::example_two(vec![vec![1, 1, 0, 1], vec![0, 1, 1, 1]], 1).unwrap();
        let model = ExitModel::new(&spec).unwrap();
        let c = model.vn_coefficients(0, 0).unwrap();
        for z in 0..=2 {
            assert_eq!(c.exact(&[0, 0], z), 0);
        }
    }

    #[test]
    fn regular_ldpc_step_matches_scalar() {
        let model = ExitModel::new(&library::regular_ldpc(3, 6, 1)).unwrap();
        let eps = 0.41;
        let mut x = 0.0f64;
        let mut v = vec![0.0];
        for _ in 0..50 {
            x = 1.0 - eps * (1.0 - x.powi(5)).powi(2);
            v = model.map(&v, eps).unwrap();
            assert_abs_diff_eq!(v[0], x, epsilon = 1e-12);
        }
    }

    #[test]
    fn convergence_either_side_of_threshold() {
        let model = ExitModel::new(&library::regular_ldpc(3, 6, 1)).unwrap();
        assert!(
            model
                .run_to_fixed_point(0.3, DEFAULT_MAX_ITERS, DEFAULT_TOL, false)
                .unwrap()
                .converged
        );
        assert!(
            !model
                .run_to_fixed_point(0.5, DEFAULT_MAX_ITERS, DEFAULT_TOL, false)
                .unwrap()
                .converged
        );
        let t = model.threshold(&ThresholdOptions::default()).unwrap();
        assert!((t.threshold - 0.4294).abs() < 1e-3, "{t:?}");
        assert!(t.half_width <= DEFAULT_TOL_EPS);
    }

    #[test]
    fn degenerate_rate_zero_threshold_near_one() {
        let spec = library::irregular_ldpc(&[(2, 1)], &[(2, 1)]).unwrap();
        let t = threshold(&spec, &ThresholdOptions::default()).unwrap();
        assert!(t.threshold > 0.99, "{t:?}");
    }

    #[test]
    fn jacobian_rejects_bad_step() {
        let model = ExitModel::new(&library::regular_ldpc(3, 6, 1)).unwrap();
        assert!(model.numerical_jacobian(&[1.0], 0.3, 0.0).is_err());
        assert!(model.numerical_jacobian(&[1.0], 0.3, -1e-5).is_err());
    }

    #[test]
    fn jacobian_example_one() {
        let model = ExitModel::new(&library::example_one_spc(3, 3, 1)).unwrap();
        let eps = 0.3;
        let j = model.numerical_jacobian(&[1.0, 1.0], eps, 1e-5).unwrap();
        let want = [[0.0, 2.0 * eps], [2.0 * eps, 0.0]];
        for l in 0..2 {
            for m in 0..2 {
                assert_abs_diff_eq!(j[(l, m)], want[l][m], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn trajectory_starts_at_vn_output_of_zero() {
        let model = ExitModel::new(&library::regular_ldpc(3, 6, 1)).unwrap();
        let run = model
            .run_to_fixed_point(0.4, 100, DEFAULT_TOL, true)
            .unwrap();
        assert_abs_diff_eq!(run.trajectory[0].i_ev[0], 0.6, epsilon = 1e-15);
        assert_eq!(run.trajectory[1].iteration, 1);
    }
}
