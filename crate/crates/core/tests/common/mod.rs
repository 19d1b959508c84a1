//! Shared test support: random ensembles and brute-force oracles that do not
//! reuse any of the library's linear algebra.

#![allow(dead_code)]

use met_dgldpc::ensemble::{CnTypeFile, EnsembleSpec, SpecFile, VnTypeFile};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Rank over GF(2) of a list of row bitmasks, by plain row reduction.
pub fn naive_rank(mut rows: Vec<u64>) -> usize {
    let mut rank = 0;
    for bit in 0..64 {
        let Some(p) = (rank..rows.len()).find(|&i| rows[i] >> bit & 1 == 1) else {
            continue;
        };
        rows.swap(rank, p);
        for i in 0..rows.len() {
            if i != rank && rows[i] >> bit & 1 == 1 {
                rows[i] ^= rows[rank];
            }
        }
        rank += 1;
    }
    rank
}

/// Rank of a set of columns of `g` (rows of 0/1 entries).
pub fn rank_of(g: &[Vec<u8>], cols: &[usize], identity: &[usize]) -> usize {
    let rows = g
        .iter()
        .enumerate()
        .map(|(r, row)| {
            let mut m = 0u64;
            for (j, &c) in cols.iter().enumerate() {
                m |= (row[c] as u64) << j;
            }
            for (j, &i) in identity.iter().enumerate() {
                if i == r {
                    m |= 1 << (cols.len() + j);
                }
            }
            m
        })
        .collect();
    naive_rank(rows)
}

/// All codewords `x·G` with their input weight.
pub fn codewords(g: &[Vec<u8>]) -> Vec<(Vec<u8>, usize)> {
    let k = g.len();
    let n = g[0].len();
    (0u64..1 << k)
        .map(|x| {
            let word = (0..n)
                .map(|c| {
                    (0..k)
                        .filter(|&r| x >> r & 1 == 1)
                        .map(|r| g[r][c])
                        .sum::<u8>()
                        % 2
                })
                .collect();
            (word, x.count_ones() as usize)
        })
        .collect()
}

pub fn min_distance(g: &[Vec<u8>]) -> usize {
    codewords(g)
        .iter()
        .map(|(w, _)| w.iter().filter(|&&b| b == 1).count())
        .filter(|&w| w > 0)
        .min()
        .unwrap_or(usize::MAX)
}

/// Number of weight-2 codewords.
pub fn a2(g: &[Vec<u8>]) -> usize {
    codewords(g)
        .iter()
        .filter(|(w, _)| w.iter().filter(|&&b| b == 1).count() == 2)
        .count()
}

/// Weight-2 codewords by input weight, `b[u]`.
pub fn b2_by_input(g: &[Vec<u8>]) -> Vec<usize> {
    let mut b = vec![0; g.len() + 1];
    for (w, u) in codewords(g) {
        if w.iter().filter(|&&x| x == 1).count() == 2 {
            b[u] += 1;
        }
    }
    b
}

/// Exhaustive information-function value: sum of ranks over every choice of
/// `g_l` columns of each type plus `u` identity columns on transmitted bits.
pub fn naive_info(g: &[Vec<u8>], types: &[usize], sent: &[bool], want: &[usize], u: usize) -> u64 {
    let n = types.len();
    let sent_bits: Vec<usize> = (0..g.len()).filter(|&i| sent[i]).collect();
    let mut total = 0;
    for mask in 0u32..1 << n {
        let cols: Vec<usize> = (0..n).filter(|&c| mask >> c & 1 == 1).collect();
        let ok =
            (0..want.len()).all(|l| cols.iter().filter(|&&c| types[c] == l).count() == want[l]);
        if !ok {
            continue;
        }
        for imask in 0u32..1 << sent_bits.len() {
            if imask.count_ones() as usize != u {
                continue;
            }
            let ids: Vec<usize> = (0..sent_bits.len())
                .filter(|&j| imask >> j & 1 == 1)
                .map(|j| sent_bits[j])
                .collect();
            total += rank_of(g, &cols, &ids) as u64;
        }
    }
    total
}

/// Random full-rank `k × n` generator without idle bits.
pub fn random_generator<R: Rng>(rng: &mut R, k: usize, n: usize, min_dist: usize) -> Vec<Vec<u8>> {
    loop {
        let g: Vec<Vec<u8>> = (0..k)
            .map(|_| (0..n).map(|_| rng.random_range(0..2u8)).collect())
            .collect();
        let rows: Vec<u64> = g
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold(0, |m, (c, &b)| m | (b as u64) << c)
            })
            .collect();
        let idle = (0..n).any(|c| g.iter().all(|r| r[c] == 0));
        if idle || naive_rank(rows) != k {
            continue;
        }
        if min_distance(&g) >= min_dist {
            return g;
        }
    }
}

/// Random ensemble that meets every hypothesis of the stability analysis: no
/// puncturing and component distance at least 2.
///
/// A base graph is built first. Each VN type appears once; its sockets are
/// shuffled and cut into groups of 2 to `max_sockets` sockets, each group becoming
/// a CN type. All counts are then `lift`. Socket balance holds by design.
pub fn random_eligible(seed: u64, max_ne: usize, max_sockets: usize) -> EnsembleSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n_e = rng.random_range(1..=max_ne);
        let n_vn = rng.random_range(1..=3);
        let mut vns = Vec::new();
        let mut sockets = Vec::new();
        for i in 0..n_vn {
            let q = rng.random_range(2..=max_sockets.min(6));
            let k = rng.random_range(1..q);
            let g = random_generator(&mut rng, k, q, 2);
            let types: Vec<usize> = (0..q).map(|_| rng.random_range(0..n_e)).collect();
            sockets.extend(types.iter().copied());
            vns.push(VnTypeFile {
                name: format!("v{i}"),
                generator: g,
                puncture: None,
                socket_types: types.iter().map(|t| t + 1).collect(),
                count: 1,
            });
        }
        if (0..n_e).any(|l| !sockets.contains(&l)) {
            continue;
        }
        sockets.shuffle(&mut rng);
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut rest = &sockets[..];
        while !rest.is_empty() {
            let take = rng.random_range(2..=max_sockets).min(rest.len());
            let (head, tail) = rest.split_at(take);
            if head.len() < 2 {
                groups.last_mut().unwrap().extend_from_slice(head);
            } else {
                groups.push(head.to_vec());
            }
            rest = tail;
        }
        if groups.is_empty() || groups.iter().any(|g| g.len() > max_sockets) {
            continue;
        }
        let cns = groups
            .iter()
            .enumerate()
            .map(|(i, types)| {
                let s = types.len();
                let h = rng.random_range(1..s);
                CnTypeFile {
                    name: format!("c{i}"),
                    generator: Some(random_generator(&mut rng, h, s, 2)),
                    parity_check: None,
                    socket_types: types.iter().map(|t| t + 1).collect(),
                    count: 1,
                }
            })
            .collect();
        let lift = rng.random_range(1..=4);
        let mut file = SpecFile {
            edge_types: n_e,
            vn_types: vns,
            cn_types: cns,
        };
        file.vn_types.iter_mut().for_each(|v| v.count = lift);
        file.cn_types.iter_mut().for_each(|c| c.count = lift);
        let spec = EnsembleSpec::from_file(file).expect("random ensemble is valid");
        assert!(spec.classify().stability_eligible());
        return spec;
    }
}

/// Scalar density evolution for an edge-perspective single-type LDPC
/// ensemble given by `(degree, node count)` lists. Returns the erasure
/// probability of VN→CN messages after `iters` iterations.
pub fn scalar_de(vn: &[(usize, u64)], cn: &[(usize, u64)], eps: f64, iters: usize) -> f64 {
    let edges: u64 = vn.iter().map(|&(d, n)| d as u64 * n).sum();
    let lam = |x: f64| {
        vn.iter()
            .map(|&(d, n)| (d as u64 * n) as f64 / edges as f64 * x.powi(d as i32 - 1))
            .sum::<f64>()
    };
    let rho = |x: f64| {
        cn.iter()
            .map(|&(d, n)| (d as u64 * n) as f64 / edges as f64 * x.powi(d as i32 - 1))
            .sum::<f64>()
    };
    let mut x = eps;
    for _ in 0..iters {
        x = eps * lam(1.0 - rho(1.0 - x));
    }
    x
}

/// BP threshold of the scalar recursion by bisection.
pub fn scalar_threshold(vn: &[(usize, u64)], cn: &[(usize, u64)], tol: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if scalar_de(vn, cn, mid, 200_000) < 1e-10 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Root of a continuous increasing `f` on `[lo, hi]` with `f(lo) < 0 < f(hi)`.
pub fn bisect_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn max_abs_diff(a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>) -> f64 {
    (a - b).iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Exhaustive table in one pass over all column and identity subsets, keyed
/// by `(per-type column counts, u)`.
pub fn naive_table(
    g: &[Vec<u8>],
    types: &[usize],
    sent: &[bool],
    n_e: usize,
) -> std::collections::BTreeMap<(Vec<usize>, usize), u64> {
    let n = types.len();
    let sent_bits: Vec<usize> = (0..g.len()).filter(|&i| sent[i]).collect();
    let mut out = std::collections::BTreeMap::new();
    for mask in 0u32..1 << n {
        let cols: Vec<usize> = (0..n).filter(|&c| mask >> c & 1 == 1).collect();
        let mut key = vec![0; n_e];
        for &c in &cols {
            key[types[c]] += 1;
        }
        for imask in 0u32..1 << sent_bits.len() {
            let ids: Vec<usize> = (0..sent_bits.len())
                .filter(|&j| imask >> j & 1 == 1)
                .map(|j| sent_bits[j])
                .collect();
            *out.entry((key.clone(), ids.len())).or_insert(0) += rank_of(g, &cols, &ids) as u64;
        }
    }
    out
}
