//! Multi-type information functions of CNs and multi-type split information
//! functions of VNs.
//!
//! For a component code with generator `G` whose columns are labelled by edge
//! type, the table entry at `(g_1, …, g_{n_e}; u)` is the sum of GF(2) ranks
//! over every matrix made of `g_l` generator columns of each type `l`, plus
//! `u` identity columns restricted to the transmitted information bits
//! (VNs only; `u = 0` for CNs).
//!
//! Tables are built all at once by a depth-first walk over column subsets that
//! extends an XOR basis one column at a time. Once a branch reaches full rank
//! every completion contributes `k`, so the remaining subsets are credited in
//! bulk from precomputed suffix-subset counts.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;

use crate::ensemble::{CnType, VnType};
use crate::error::{Error, Result};
use crate::gf2::{Gf2Matrix, XorBasis, K_MAX, S_MAX};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfoFunctionTable {
    /// Largest admissible `g_l` per edge type (the socket count of that type).
    limits: Vec<usize>,
    /// Largest admissible `u` (the number of transmitted information bits).
    max_u: usize,
    /// Row-major strides: one per edge type, then one for `u`.
    strides: Vec<usize>,
    values: Vec<u64>,
}

impl InfoFunctionTable {
    fn zeroed(limits: Vec<usize>, max_u: usize) -> Self {
        let mut strides = vec![0; limits.len() + 1];
        let mut acc = 1;
        strides[limits.len()] = 1;
        acc *= max_u + 1;
        for l in (0..limits.len()).rev() {
            strides[l] = acc;
            acc *= limits[l] + 1;
        }
        InfoFunctionTable {
            limits,
            max_u,
            strides,
            values: vec![0; acc],
        }
    }

    pub fn limits(&self) -> &[usize] {
        &self.limits
    }

    pub fn max_u(&self) -> usize {
        self.max_u
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn index(&self, g: &[usize], u: usize) -> usize {
        assert_eq!(g.len(), self.limits.len(), "tuple length");
        assert!(u <= self.max_u, "u = {u} beyond {}", self.max_u);
        g.iter()
            .zip(&self.limits)
            .zip(&self.strides)
            .map(|((&gl, &lim), &st)| {
                assert!(gl <= lim, "g_l = {gl} beyond {lim}");
                gl * st
            })
            .sum::<usize>()
            + u
    }

    /// `ẽ_{g;u}`. Panics when `g` or `u` is outside the table.
    pub fn get(&self, g: &[usize], u: usize) -> u64 {
        self.values[self.index(g, u)]
    }

    /// Like [`get`](Self::get) but `None` outside the admissible range.
    pub fn try_get(&self, g: &[usize], u: usize) -> Option<u64> {
        if g.len() != self.limits.len()
            || u > self.max_u
            || g.iter().zip(&self.limits).any(|(a, b)| a > b)
        {
            return None;
        }
        Some(self.get(g, u))
    }

    /// Every `(g, u, value)` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (Vec<usize>, usize, u64)> + '_ {
        (0..self.values.len()).map(move |flat| {
            let mut rest = flat;
            let g = self
                .strides
                .iter()
                .take(self.limits.len())
                .map(|&st| {
                    let v = rest / st;
                    rest %= st;
                    v
                })
                .collect();
            (g, rest, self.values[flat])
        })
    }
}

/// Number of ways to pick `g_l` sockets of every type and `u` channel columns.
pub fn selection_count(limits: &[usize], max_u: usize, g: &[usize], u: usize) -> u64 {
    limits
        .iter()
        .zip(g)
        .map(|(&n, &k)| binomial(n, k))
        .product::<u64>()
        * binomial(max_u, u)
}

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// Core builder: generator columns labelled by type, plus identity columns for
/// the information bits flagged in `channel`.
fn build_table(
    generator: &Gf2Matrix,
    socket_types: &[usize],
    channel: &[bool],
    n_e: usize,
) -> Result<InfoFunctionTable> {
    if generator.rows() > K_MAX {
        return Err(Error::capacity(
            "code dimension (K_MAX)",
            generator.rows(),
            K_MAX,
        ));
    }
    if generator.cols() > S_MAX {
        return Err(Error::capacity(
            "code length (S_MAX)",
            generator.cols(),
            S_MAX,
        ));
    }
    let mut limits = vec![0; n_e];
    for &t in socket_types {
        limits[t] += 1;
    }
    let max_u = channel.iter().filter(|&&b| b).count();
    let mut table = InfoFunctionTable::zeroed(limits, max_u);

    let mut items: Vec<(u64, usize)> = generator
        .column_masks()
        .into_iter()
        .zip(socket_types)
        .map(|(col, &t)| (col, table.strides[t]))
        .collect();
    items.extend(
        channel
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| (1u64 << i, 1)),
    );

    // suffix[d]: (offset, number of subsets of items[d..] landing there).
    let mut suffix: Vec<Vec<(usize, u64)>> = vec![Vec::new(); items.len() + 1];
    let mut dense = vec![0u64; table.values.len()];
    dense[0] = 1;
    suffix[items.len()] = vec![(0, 1)];
    for d in (0..items.len()).rev() {
        let stride = items[d].1;
        for off in (0..dense.len()).rev() {
            if dense[off] != 0 && off + stride < dense.len() {
                dense[off + stride] += dense[off];
            }
        }
        suffix[d] = dense
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(o, &c)| (o, c))
            .collect();
    }

    let full = generator.rows();
    let mut walker = Walker {
        items: &items,
        suffix: &suffix,
        full,
        out: &mut table.values,
    };
    walker.walk(0, XorBasis::new(), 0);
    Ok(table)
}

struct Walker<'a> {
    items: &'a [(u64, usize)],
    suffix: &'a [Vec<(usize, u64)>],
    full: usize,
    out: &'a mut [u64],
}

impl Walker<'_> {
    fn walk(&mut self, depth: usize, basis: XorBasis, idx: usize) {
        if basis.rank() == self.full {
            let k = self.full as u64;
            for &(off, count) in &self.suffix[depth] {
                self.out[idx + off] += k * count;
            }
            return;
        }
        let Some(&(col, stride)) = self.items.get(depth) else {
            self.out[idx] += basis.rank() as u64;
            return;
        };
        self.walk(depth + 1, basis, idx);
        let mut with = basis;
        with.insert(col);
        self.walk(depth + 1, with, idx + stride);
    }
}

/// Multi-type information function table of a CN type.
pub fn cn_table(cn: &CnType, n_e: usize) -> Result<InfoFunctionTable> {
    build_table(&cn.generator, &cn.socket_types, &[], n_e)
}

/// Multi-type split information function table of a VN type.
pub fn vn_table(vn: &VnType, n_e: usize) -> Result<InfoFunctionTable> {
    build_table(&vn.generator, &vn.socket_types, &vn.puncture, n_e)
}

/// Information function of an arbitrary generator with labelled columns and
/// no channel columns.
pub fn code_table(
    generator: &Gf2Matrix,
    socket_types: &[usize],
    n_e: usize,
) -> Result<InfoFunctionTable> {
    build_table(generator, socket_types, &[], n_e)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct TableKey {
    generator: Gf2Matrix,
    socket_types: Vec<usize>,
    channel: Vec<bool>,
    n_e: usize,
}

/// Concurrent memo of tables. Each key is built at most once; concurrent
/// requests for the same key wait for the first builder.
#[derive(Default)]
pub struct TableCache {
    slots: Mutex<HashMap<TableKey, Arc<OnceLock<Arc<InfoFunctionTable>>>>>,
}

impl TableCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn global() -> &'static TableCache {
        static GLOBAL: OnceLock<TableCache> = OnceLock::new();
        GLOBAL.get_or_init(TableCache::new)
    }

    pub fn len(&self) -> usize {
        self.slots.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, key: TableKey) -> Result<Arc<InfoFunctionTable>> {
        if key.generator.rows() > K_MAX {
            return Err(Error::capacity(
                "code dimension (K_MAX)",
                key.generator.rows(),
                K_MAX,
            ));
        }
        if key.generator.cols() > S_MAX {
            return Err(Error::capacity(
                "code length (S_MAX)",
                key.generator.cols(),
                S_MAX,
            ));
        }
        let slot = {
            let mut slots = self.slots.lock().expect("cache lock");
            slots.entry(key.clone()).or_default().clone()
        };
        Ok(slot
            .get_or_init(|| {
                Arc::new(
                    build_table(&key.generator, &key.socket_types, &key.channel, key.n_e)
                        .expect("sizes checked above"),
                )
            })
            .clone())
    }

    pub fn vn(&self, vn: &VnType, n_e: usize) -> Result<Arc<InfoFunctionTable>> {
        self.get(TableKey {
            generator: vn.generator.clone(),
            socket_types: vn.socket_types.clone(),
            channel: vn.puncture.clone(),
            n_e,
        })
    }

    /// CN tables do not depend on the choice of generator, so the key uses
    /// the reduced row echelon form.
    pub fn cn(&self, cn: &CnType, n_e: usize) -> Result<Arc<InfoFunctionTable>> {
        self.get(TableKey {
            generator: cn.generator.rref().0,
            socket_types: cn.socket_types.clone(),
            channel: Vec::new(),
            n_e,
        })
    }
}

/// JSON dump of a table, keyed by 1-based edge types in `g`.
#[derive(Debug, Clone, Serialize)]
pub struct TableDump {
    pub owner: String,
    pub kind: &'static str,
    pub limits: Vec<usize>,
    pub max_u: usize,
    pub entries: Vec<TableEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TableEntry {
    pub g: Vec<usize>,
    pub u: usize,
    pub value: u64,
}

impl InfoFunctionTable {
    pub fn dump(&self, owner: &str, kind: &'static str) -> TableDump {
        TableDump {
            owner: owner.to_string(),
            kind,
            limits: self.limits.clone(),
            max_u: self.max_u,
            entries: self
                .entries()
                .map(|(g, u, value)| TableEntry { g, u, value })
                .collect(),
        }
    }
}
