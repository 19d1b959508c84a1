//! Finite-length simulation: sample a code from the ensemble, erase bits at
//! random, and run iterative local-MAP erasure decoding on the Tanner graph.
//!
//! Edges are numbered by VN socket in node order. Each edge type has its own
//! uniformly random interleaver between the VN and CN sockets of that type.
//! Parallel edges are kept.
//!
//! The decoder runs a flooding schedule. One iteration is a CN pass followed
//! by a VN pass, so iteration `t` (1-based) corresponds to EXIT state `t - 1`.
//! At a node, the outgoing message on socket `j` is known iff column `j` of the
//! local generator lies in the span of the known functionals, not counting the
//! message arriving on `j` itself. At a VN the known channel bits contribute
//! identity functionals.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ensemble::EnsembleSpec;
use crate::error::{Error, Result};
use crate::gf2::XorBasis;

/// Largest number of edges in a sampled graph.
pub const MAX_EDGES: u64 = 1 << 31;
pub const DEFAULT_MAX_ITERS: usize = 1000;
pub const DEFAULT_TRAJECTORY_ITERS: usize = 10;
const WILSON_Z: f64 = 1.96;

#[derive(Debug, Clone)]
struct NodeKind {
    /// Column masks of the local generator.
    columns: Vec<u64>,
    socket_types: Vec<usize>,
    k: usize,
    /// Per local information bit, true when transmitted; empty for CNs.
    sent: Vec<bool>,
}

impl NodeKind {
    fn q(&self) -> usize {
        self.columns.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledCode {
    n_e: usize,
    vn_kinds: Vec<NodeKind>,
    cn_kinds: Vec<NodeKind>,
    vn_type: Vec<u32>,
    /// `vn_offset[v]..vn_offset[v+1]` are the edges of VN `v`.
    vn_offset: Vec<usize>,
    /// First local information bit of each VN in the global bit numbering.
    bit_offset: Vec<usize>,
    cn_type: Vec<u32>,
    cn_offset: Vec<usize>,
    /// Edge attached to each CN socket.
    cn_socket_edge: Vec<u32>,
    edge_type: Vec<u32>,
    /// Per edge type: VN socket `i` of that type meets CN socket `perm[i]`.
    permutations: Vec<Vec<u32>>,
    edge_vn: Vec<u32>,
    edge_cn: Vec<u32>,
    /// Global bit index of each transmitted bit.
    transmitted: Vec<u32>,
    edges_per_type: Vec<u64>,
}

impl PartialEq for NodeKind {
    fn eq(&self, other: &Self) -> bool {
        self.columns == other.columns
            && self.socket_types == other.socket_types
            && self.sent == other.sent
    }
}

impl Eq for NodeKind {}

impl SampledCode {
    pub fn num_edge_types(&self) -> usize {
        self.n_e
    }

    pub fn num_vns(&self) -> usize {
        self.vn_type.len()
    }

    pub fn num_cns(&self) -> usize {
        self.cn_type.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edge_type.len()
    }

    pub fn vn_type(&self, v: usize) -> usize {
        self.vn_type[v] as usize
    }

    pub fn cn_type(&self, c: usize) -> usize {
        self.cn_type[c] as usize
    }

    pub fn vn_edges(&self, v: usize) -> Range<usize> {
        self.vn_offset[v]..self.vn_offset[v + 1]
    }

    /// Edge on each socket of CN `c`, in socket order.
    pub fn cn_edges(&self, c: usize) -> &[u32] {
        &self.cn_socket_edge[self.cn_offset[c]..self.cn_offset[c + 1]]
    }

    pub fn edge_type(&self, e: usize) -> usize {
        self.edge_type[e] as usize
    }

    /// `(vn, cn)` joined by edge `e`.
    pub fn edge_nodes(&self, e: usize) -> (usize, usize) {
        (self.edge_vn[e] as usize, self.edge_cn[e] as usize)
    }

    pub fn permutation(&self, l: usize) -> &[u32] {
        &self.permutations[l]
    }

    pub fn edges_per_type(&self) -> &[u64] {
        &self.edges_per_type
    }

    /// Local information bits over all VNs, punctured ones included.
    pub fn num_bits(&self) -> usize {
        *self.bit_offset.last().unwrap_or(&0)
    }

    /// Codeword length: the transmitted bits.
    pub fn length(&self) -> usize {
        self.transmitted.len()
    }

    pub fn num_punctured(&self) -> usize {
        self.num_bits() - self.length()
    }
}

fn vn_kinds(spec: &EnsembleSpec) -> Vec<NodeKind> {
    spec.vn_types()
        .iter()
        .map(|t| NodeKind {
            columns: t.generator.column_masks(),
            socket_types: t.socket_types.clone(),
            k: t.k(),
            sent: t.puncture.clone(),
        })
        .collect()
}

fn cn_kinds(spec: &EnsembleSpec) -> Vec<NodeKind> {
    spec.cn_types()
        .iter()
        .map(|t| NodeKind {
            columns: t.generator.column_masks(),
            socket_types: t.socket_types.clone(),
            k: t.h(),
            sent: Vec::new(),
        })
        .collect()
}

/// Samples one code with every node count multiplied by `scale`, using a
/// ChaCha8 stream seeded from `seed`.
pub fn sample_code(spec: &EnsembleSpec, scale: u64, seed: u64) -> Result<SampledCode> {
    sample_code_with(spec, scale, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn sample_code_with<R: Rng + ?Sized>(
    spec: &EnsembleSpec,
    scale: u64,
    rng: &mut R,
) -> Result<SampledCode> {
    if scale == 0 {
        return Err(Error::validation("scale must be a positive integer"));
    }
    let total_edges: u64 = spec
        .edges_per_type()
        .iter()
        .try_fold(0u64, |acc, &e| acc.checked_add(e.checked_mul(scale)?))
        .unwrap_or(u64::MAX);
    if total_edges > MAX_EDGES {
        return Err(Error::capacity(
            "sampled edges",
            total_edges as usize,
            MAX_EDGES as usize,
        ));
    }
    let n_e = spec.num_edge_types();
    let vn_kinds = vn_kinds(spec);
    let cn_kinds = cn_kinds(spec);
    let (vn_counts, cn_counts) = spec.scaled_counts(scale);

    let mut vn_type = Vec::new();
    let mut vn_offset = vec![0];
    let mut bit_offset = vec![0];
    let mut edge_type = Vec::with_capacity(total_edges as usize);
    let mut transmitted = Vec::new();
    let mut edge_vn = Vec::with_capacity(total_edges as usize);
    let mut vn_sockets: Vec<Vec<u32>> = vec![Vec::new(); n_e];
    for (g, kind) in vn_kinds.iter().enumerate() {
        for _ in 0..vn_counts[g] {
            let first_bit = *bit_offset.last().unwrap();
            for (i, &sent) in kind.sent.iter().enumerate() {
                if sent {
                    transmitted.push((first_bit + i) as u32);
                }
            }
            for &l in &kind.socket_types {
                vn_sockets[l].push(edge_type.len() as u32);
                edge_type.push(l as u32);
                edge_vn.push(vn_type.len() as u32);
            }
            vn_type.push(g as u32);
            vn_offset.push(edge_type.len());
            bit_offset.push(first_bit + kind.k);
        }
    }

    let mut cn_type = Vec::new();
    let mut cn_offset = vec![0];
    let mut cn_sockets: Vec<Vec<u32>> = vec![Vec::new(); n_e];
    let mut next = 0u32;
    for (d, kind) in cn_kinds.iter().enumerate() {
        for _ in 0..cn_counts[d] {
            for &l in &kind.socket_types {
                cn_sockets[l].push(next);
                next += 1;
            }
            cn_type.push(d as u32);
            cn_offset.push(next as usize);
        }
    }

    let mut cn_socket_edge = vec![0u32; next as usize];
    let mut edge_cn = vec![0u32; edge_type.len()];
    let mut permutations = Vec::with_capacity(n_e);
    for l in 0..n_e {
        let (vs, cs) = (&vn_sockets[l], &cn_sockets[l]);
        if vs.len() != cs.len() {
            return Err(Error::Internal(format!(
                "edge type {}: {} VN sockets against {} CN sockets",
                l + 1,
                vs.len(),
                cs.len()
            )));
        }
        let mut perm: Vec<u32> = (0..vs.len() as u32).collect();
        perm.shuffle(rng);
        for (i, &p) in perm.iter().enumerate() {
            let socket = cs[p as usize] as usize;
            cn_socket_edge[socket] = vs[i];
            edge_cn[vs[i] as usize] = cn_of_socket(&cn_offset, socket);
        }
        permutations.push(perm);
    }

    Ok(SampledCode {
        n_e,
        vn_kinds,
        cn_kinds,
        vn_type,
        vn_offset,
        bit_offset,
        cn_type,
        cn_offset,
        cn_socket_edge,
        edge_type,
        edge_vn,
        edge_cn,
        permutations,
        transmitted,
        edges_per_type: spec.edges_per_type().iter().map(|&e| e * scale).collect(),
    })
}

fn cn_of_socket(cn_offset: &[usize], socket: usize) -> u32 {
    (cn_offset.partition_point(|&o| o <= socket) - 1) as u32
}

/// Message and bit knowledge during decoding. Every flag only ever goes from
/// false to true.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecoderState {
    pub vn_to_cn: Vec<bool>,
    pub cn_to_vn: Vec<bool>,
    /// Per local information bit, punctured bits included.
    pub known_bits: Vec<bool>,
    pub iteration: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DecodeOutcome {
    pub success: bool,
    /// Erased transmitted bits left unresolved.
    pub residual_erasures: usize,
    pub iterations: usize,
}

/// Which outgoing messages a node can send, given which incoming ones are
/// known and the extra functionals it always has.
fn extrinsic(kind: &NodeKind, incoming: &[bool], extra: &[u64]) -> Vec<bool> {
    let mut base = XorBasis::new();
    for &f in extra {
        base.insert(f);
    }
    let mut all = base;
    for (j, &known) in incoming.iter().enumerate() {
        if known {
            all.insert(kind.columns[j]);
        }
    }
    (0..kind.q())
        .map(|j| {
            if !all.contains(kind.columns[j]) {
                return false;
            }
            if !incoming[j] {
                return true;
            }
            let mut others = base;
            for (i, &known) in incoming.iter().enumerate() {
                if known && i != j {
                    others.insert(kind.columns[i]);
                }
            }
            others.contains(kind.columns[j])
        })
        .collect()
}

pub struct Decoder<'a> {
    code: &'a SampledCode,
    channel: Vec<bool>,
    state: DecoderState,
    known_per_type: Vec<u64>,
    vn_dirty: Vec<bool>,
    cn_dirty: Vec<bool>,
}

impl<'a> Decoder<'a> {
    /// `erasures[i]` is true when transmitted bit `i` was erased.
    pub fn new(code: &'a SampledCode, erasures: &[bool]) -> Result<Self> {
        if erasures.len() != code.length() {
            return Err(Error::validation(format!(
                "erasure pattern has {} entries, the code transmits {} bits",
                erasures.len(),
                code.length()
            )));
        }
        let mut channel = vec![false; code.num_bits()];
        for (&bit, &erased) in code.transmitted.iter().zip(erasures) {
            channel[bit as usize] = !erased;
        }
        let n = code.num_edges();
        Ok(Decoder {
            code,
            state: DecoderState {
                vn_to_cn: vec![false; n],
                cn_to_vn: vec![false; n],
                known_bits: channel.clone(),
                iteration: 0,
            },
            channel,
            known_per_type: vec![0; code.n_e],
            vn_dirty: vec![true; code.num_vns()],
            cn_dirty: vec![true; code.num_cns()],
        })
    }

    pub fn state(&self) -> &DecoderState {
        &self.state
    }

    /// Fraction of known VN→CN messages per edge type.
    pub fn known_fractions(&self) -> Vec<f64> {
        self.known_per_type
            .iter()
            .zip(&self.code.edges_per_type)
            .map(|(&k, &e)| if e == 0 { 1.0 } else { k as f64 / e as f64 })
            .collect()
    }

    /// Transmitted bits still unknown.
    pub fn residual_erasures(&self) -> usize {
        self.code
            .transmitted
            .iter()
            .filter(|&&b| !self.state.known_bits[b as usize])
            .count()
    }

    /// One CN pass then one VN pass. Returns whether any message became known.
    pub fn step(&mut self) -> bool {
        let code = self.code;
        let mut progress = false;
        let mut incoming = Vec::new();
        for c in 0..code.num_cns() {
            if !std::mem::take(&mut self.cn_dirty[c]) {
                continue;
            }
            let kind = &code.cn_kinds[code.cn_type(c)];
            let edges = code.cn_edges(c);
            incoming.clear();
            incoming.extend(edges.iter().map(|&e| self.state.vn_to_cn[e as usize]));
            let outgoing = extrinsic(kind, &incoming, &[]);
            for (j, &e) in edges.iter().enumerate() {
                let e = e as usize;
                if outgoing[j] && !self.state.cn_to_vn[e] {
                    self.state.cn_to_vn[e] = true;
                    progress = true;
                    self.vn_dirty[code.edge_vn[e] as usize] = true;
                }
            }
        }
        let mut channel = Vec::new();
        for v in 0..code.num_vns() {
            if !std::mem::take(&mut self.vn_dirty[v]) {
                continue;
            }
            let kind = &code.vn_kinds[code.vn_type(v)];
            let edges = code.vn_edges(v);
            let b0 = code.bit_offset[v];
            channel.clear();
            channel.extend(
                (0..kind.k)
                    .filter(|&i| self.channel[b0 + i])
                    .map(|i| 1u64 << i),
            );
            let incoming = &self.state.cn_to_vn[edges.clone()];
            let mut all = XorBasis::new();
            for &f in &channel {
                all.insert(f);
            }
            for (j, &known) in incoming.iter().enumerate() {
                if known {
                    all.insert(kind.columns[j]);
                }
            }
            for i in 0..kind.k {
                if all.contains(1 << i) {
                    self.state.known_bits[b0 + i] = true;
                }
            }
            let outgoing = extrinsic(kind, incoming, &channel);
            for (j, e) in edges.enumerate() {
                if outgoing[j] && !self.state.vn_to_cn[e] {
                    self.state.vn_to_cn[e] = true;
                    self.known_per_type[code.edge_type(e)] += 1;
                    progress = true;
                    self.cn_dirty[code.edge_cn[e] as usize] = true;
                }
            }
        }
        self.state.iteration += 1;
        progress
    }

    /// Steps until no message changes or `max_iters` iterations have run,
    /// calling `observe` after each iteration.
    pub fn run(&mut self, max_iters: usize, mut observe: impl FnMut(&Self)) -> DecodeOutcome {
        while self.state.iteration < max_iters {
            let progress = self.step();
            observe(self);
            if !progress {
                break;
            }
        }
        let residual_erasures = self.residual_erasures();
        DecodeOutcome {
            success: residual_erasures == 0,
            residual_erasures,
            iterations: self.state.iteration,
        }
    }
}

pub fn decode(code: &SampledCode, erasures: &[bool], max_iters: usize) -> Result<DecodeOutcome> {
    Ok(Decoder::new(code, erasures)?.run(max_iters, |_| {}))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    pub scale: u64,
    pub trials: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Iterations of per-type message-known fractions to average; 0 for none.
    pub trajectory_iters: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            scale: 100,
            trials: 100,
            seed: 0,
            max_iters: DEFAULT_MAX_ITERS,
            trajectory_iters: 0,
        }
    }
}

/// Mean and standard error of the known VN→CN fraction, indexed
/// `[iteration][edge type]` with iteration 0 being the first CN+VN pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryStats {
    pub mean: Vec<Vec<f64>>,
    pub std_error: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub epsilon: f64,
    pub trials: usize,
    pub failures: usize,
    pub residual_bits: u64,
    pub transmitted_bits: u64,
    pub ber: f64,
    pub bler: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<TrajectoryStats>,
}

/// Wilson score interval for `successes` out of `n`.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

struct TrialResult {
    outcome: DecodeOutcome,
    transmitted: usize,
    fractions: Vec<Vec<f64>>,
}

fn trial_rng(seed: u64, eps_index: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((eps_index as u64) << 32) | trial as u64);
    rng
}

fn run_trial(
    spec: &EnsembleSpec,
    epsilon: f64,
    opts: &SweepOptions,
    mut rng: ChaCha8Rng,
) -> Result<TrialResult> {
    let code = sample_code_with(spec, opts.scale, &mut rng)?;
    let erasures: Vec<bool> = (0..code.length())
        .map(|_| rng.random::<f64>() < epsilon)
        .collect();
    let mut decoder = Decoder::new(&code, &erasures)?;
    let mut fractions = Vec::with_capacity(opts.trajectory_iters);
    let outcome = decoder.run(opts.max_iters, |d| {
        if fractions.len() < opts.trajectory_iters {
            fractions.push(d.known_fractions());
        }
    });
    // after a fixpoint the fractions stay put
    while fractions.len() < opts.trajectory_iters {
        fractions.push(decoder.known_fractions());
    }
    Ok(TrialResult {
        outcome,
        transmitted: code.length(),
        fractions,
    })
}

/// Monte Carlo estimate at one channel parameter. `eps_index` selects the
/// random streams so that every grid point of a sweep is independent.
pub fn simulate_point(
    spec: &EnsembleSpec,
    epsilon: f64,
    eps_index: usize,
    opts: &SweepOptions,
) -> Result<SweepPoint> {
    if opts.trials == 0 {
        return Err(Error::validation("trials must be at least 1"));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::validation(format!(
            "epsilon {epsilon} outside [0, 1]"
        )));
    }
    if eps_index > u32::MAX as usize || opts.trials > u32::MAX as usize {
        return Err(Error::capacity(
            "sweep streams",
            opts.trials.max(eps_index),
            u32::MAX as usize,
        ));
    }
    let results: Vec<TrialResult> = (0..opts.trials)
        .into_par_iter()
        .map(|t| run_trial(spec, epsilon, opts, trial_rng(opts.seed, eps_index, t)))
        .collect::<Result<_>>()?;

    let failures = results.iter().filter(|r| !r.outcome.success).count();
    let residual_bits: u64 = results
        .iter()
        .map(|r| r.outcome.residual_erasures as u64)
        .sum();
    let transmitted_bits: u64 = results.iter().map(|r| r.transmitted as u64).sum();
    let (ci_lo, ci_hi) = wilson_interval(failures, opts.trials, WILSON_Z);
    let trajectory = (opts.trajectory_iters > 0).then(|| {
        let n_e = spec.num_edge_types();
        let n = opts.trials as f64;
        let mut mean = vec![vec![0.0; n_e]; opts.trajectory_iters];
        let mut std_error = mean.clone();
        for it in 0..opts.trajectory_iters {
            for l in 0..n_e {
                let xs = results.iter().map(|r| r.fractions[it][l]);
                let m = xs.clone().sum::<f64>() / n;
                let var = if opts.trials > 1 {
                    xs.map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
                } else {
                    0.0
                };
                mean[it][l] = m;
                std_error[it][l] = (var / n).sqrt();
            }
        }
        TrajectoryStats { mean, std_error }
    });
    Ok(SweepPoint {
        epsilon,
        trials: opts.trials,
        failures,
        residual_bits,
        transmitted_bits,
        ber: if transmitted_bits == 0 {
            0.0
        } else {
            residual_bits as f64 / transmitted_bits as f64
        },
        bler: failures as f64 / opts.trials as f64,
        ci_lo,
        ci_hi,
        trajectory,
    })
}

pub fn sweep(
    spec: &EnsembleSpec,
    eps_grid: &[f64],
    opts: &SweepOptions,
) -> Result<Vec<SweepPoint>> {
    eps_grid
        .iter()
        .enumerate()
        .map(|(i, &eps)| simulate_point(spec, eps, i, opts))
        .collect()
}

/// Specs outside the hypotheses of the stability analysis still simulate, but
/// no asymptotic stability prediction applies to them.
pub fn prediction_label(spec: &EnsembleSpec) -> &'static str {
    if spec.classify().stability_eligible() {
        "stability prediction applies"
    } else {
        "no stability prediction"
    }
}
