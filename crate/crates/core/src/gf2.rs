//! Dense linear algebra over GF(2).
//!
//! [`Gf2Matrix`] stores rows as packed `u64` words and is the carrier for every
//! generator and parity-check matrix in the toolkit. Component codes are small
//! (see [`K_MAX`] and [`S_MAX`]), so codeword-level routines work on single-word
//! masks: a codeword is a `u64` whose bit `j` is the symbol at socket `j`, and a
//! column of a generator is a `u64` whose bit `r` is the entry in row `r`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Largest code dimension accepted by any exhaustive enumeration.
pub const K_MAX: usize = 24;
/// Largest code length (socket count) accepted by any exhaustive enumeration.
pub const S_MAX: usize = 24;

const WORD: usize = 64;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Gf2Matrix {
    rows: usize,
    cols: usize,
    stride: usize,
    bits: Vec<u64>,
}

impl Gf2Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = cols.div_ceil(WORD);
        Gf2Matrix {
            rows,
            cols,
            stride,
            bits: vec![0; rows * stride],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// Builds a matrix from 0/1 rows. All rows must have the same length.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::validation(format!(
                    "matrix row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            for (j, &b) in row.iter().enumerate() {
                match b {
                    0 => {}
                    1 => m.set(i, j, true),
                    other => {
                        return Err(Error::validation(format!(
                            "matrix entry ({i},{j}) is {other}, expected 0 or 1"
                        )))
                    }
                }
            }
        }
        Ok(m)
    }

    /// Builds a `rows × cols` matrix from per-row masks (`cols ≤ 64`).
    pub fn from_row_masks(row_masks: &[u64], cols: usize) -> Self {
        assert!(cols <= WORD, "row masks hold at most 64 columns");
        let mut m = Self::zeros(row_masks.len(), cols);
        let keep = low_mask(cols);
        for (i, &r) in row_masks.iter().enumerate() {
            if m.stride > 0 {
                m.bits[i * m.stride] = r & keep;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        assert!(
            r < self.rows && c < self.cols,
            "index ({r},{c}) out of bounds"
        );
        (self.bits[r * self.stride + c / WORD] >> (c % WORD)) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        assert!(
            r < self.rows && c < self.cols,
            "index ({r},{c}) out of bounds"
        );
        let w = &mut self.bits[r * self.stride + c / WORD];
        if value {
            *w |= 1 << (c % WORD);
        } else {
            *w &= !(1 << (c % WORD));
        }
    }

    fn row_words(&self, r: usize) -> &[u64] {
        &self.bits[r * self.stride..(r + 1) * self.stride]
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.get(r, c) as u8).collect())
            .collect()
    }

    /// GF(2) rank by word-level XOR elimination on a private copy.
    pub fn rank(&self) -> usize {
        let mut work = self.bits.clone();
        let stride = self.stride;
        let mut rank = 0;
        for c in 0..self.cols {
            if rank == self.rows {
                break;
            }
            let (w, bit) = (c / WORD, 1u64 << (c % WORD));
            let Some(p) = (rank..self.rows).find(|&r| work[r * stride + w] & bit != 0) else {
                continue;
            };
            if p != rank {
                for k in 0..stride {
                    work.swap(p * stride + k, rank * stride + k);
                }
            }
            for r in rank + 1..self.rows {
                if work[r * stride + w] & bit != 0 {
                    for k in 0..stride {
                        work[r * stride + k] ^= work[rank * stride + k];
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    /// Submatrix made of the given columns, in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.cols];
        for &c in idx {
            if c >= self.cols {
                return Err(Error::validation(format!(
                    "column index {c} out of range for {} columns",
                    self.cols
                )));
            }
            if std::mem::replace(&mut seen[c], true) {
                return Err(Error::validation(format!("duplicate column index {c}")));
            }
        }
        let mut out = Self::zeros(self.rows, idx.len());
        for r in 0..self.rows {
            for (j, &c) in idx.iter().enumerate() {
                if self.get(r, c) {
                    out.set(r, j, true);
                }
            }
        }
        Ok(out)
    }

    /// Rank of the columns in `idx`. Indices are canonicalized to ascending
    /// order first; the result does not depend on their order.
    pub fn rank_of_columns(&self, idx: &[usize]) -> Result<usize> {
        let mut sorted = idx.to_vec();
        sorted.sort_unstable();
        Ok(self.select_columns(&sorted)?.rank())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    t.set(c, r, true);
                }
            }
        }
        t
    }

    /// `self · otherᵀ` over GF(2).
    pub fn mul_transpose(&self, other: &Gf2Matrix) -> Self {
        assert_eq!(self.cols, other.cols, "column counts differ");
        let mut out = Self::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            for j in 0..other.rows {
                let parity = self
                    .row_words(i)
                    .iter()
                    .zip(other.row_words(j))
                    .fold(0u32, |acc, (a, b)| acc ^ ((a & b).count_ones() & 1));
                if parity == 1 {
                    out.set(i, j, true);
                }
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    /// Reduced row echelon form with zero rows removed, together with the
    /// pivot column of each remaining row.
    pub fn rref(&self) -> (Gf2Matrix, Vec<usize>) {
        let mut m = self.clone();
        let stride = m.stride;
        let mut pivots = Vec::new();
        let mut rank = 0;
        for c in 0..m.cols {
            if rank == m.rows {
                break;
            }
            let (w, bit) = (c / WORD, 1u64 << (c % WORD));
            let Some(p) = (rank..m.rows).find(|&r| m.bits[r * stride + w] & bit != 0) else {
                continue;
            };
            if p != rank {
                for k in 0..stride {
                    m.bits.swap(p * stride + k, rank * stride + k);
                }
            }
            for r in 0..m.rows {
                if r != rank && m.bits[r * stride + w] & bit != 0 {
                    for k in 0..stride {
                        m.bits[r * stride + k] ^= m.bits[rank * stride + k];
                    }
                }
            }
            pivots.push(c);
            rank += 1;
        }
        m.bits.truncate(rank * stride);
        m.rows = rank;
        (m, pivots)
    }

    /// A full-row-rank generator of the code whose parity-check matrix is
    /// `self`: `(cols − rank) × cols`, with `G · Hᵀ = 0`. Code positions keep
    /// their column order.
    pub fn generator_from_parity(&self) -> Gf2Matrix {
        let (h, pivots) = self.rref();
        let n = self.cols;
        let mut is_pivot = vec![false; n];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        let free: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
        let mut g = Gf2Matrix::zeros(free.len(), n);
        for (i, &f) in free.iter().enumerate() {
            g.set(i, f, true);
            for (r, &p) in pivots.iter().enumerate() {
                if h.get(r, f) {
                    g.set(i, p, true);
                }
            }
        }
        g
    }

    /// Each column as a bitmask over rows (`rows ≤ 64`).
    pub fn column_masks(&self) -> Vec<u64> {
        assert!(self.rows <= WORD, "column masks hold at most 64 rows");
        (0..self.cols)
            .map(|c| {
                (0..self.rows)
                    .filter(|&r| self.get(r, c))
                    .fold(0u64, |acc, r| acc | (1 << r))
            })
            .collect()
    }

    /// Each row as a bitmask over columns (`cols ≤ 64`).
    pub fn row_masks(&self) -> Vec<u64> {
        assert!(self.cols <= WORD, "row masks hold at most 64 columns");
        (0..self.rows)
            .map(|r| self.row_words(r).first().copied().unwrap_or(0))
            .collect()
    }

    /// Indices of all-zero columns.
    pub fn zero_columns(&self) -> Vec<usize> {
        (0..self.cols)
            .filter(|&c| (0..self.rows).all(|r| !self.get(r, c)))
            .collect()
    }

    pub(crate) fn check_enumerable(&self) -> Result<()> {
        if self.rows > K_MAX {
            return Err(Error::capacity("code dimension (K_MAX)", self.rows, K_MAX));
        }
        if self.cols > S_MAX {
            return Err(Error::capacity("code length (S_MAX)", self.cols, S_MAX));
        }
        Ok(())
    }
}

impl fmt::Debug for Gf2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Gf2Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            let line: String = (0..self.cols)
                .map(|c| if self.get(r, c) { '1' } else { '0' })
                .collect();
            writeln!(f, "  {line}")?;
        }
        write!(f, "]")
    }
}

fn low_mask(n: usize) -> u64 {
    if n >= WORD {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Incremental XOR basis for vectors of at most 64 bits, kept in echelon form
/// keyed by leading bit. Copying it is cheap, which subset enumerations rely on.
#[derive(Clone, Copy)]
pub struct XorBasis {
    by_lead: [u64; WORD],
    rank: u32,
}

impl Default for XorBasis {
    fn default() -> Self {
        Self::new()
    }
}

impl XorBasis {
    pub const fn new() -> Self {
        XorBasis {
            by_lead: [0; WORD],
            rank: 0,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank as usize
    }

    /// Reduces `v` against the basis; zero iff `v` lies in the span.
    pub fn reduce(&self, mut v: u64) -> u64 {
        while v != 0 {
            let lead = 63 - v.leading_zeros() as usize;
            let b = self.by_lead[lead];
            if b == 0 {
                return v;
            }
            v ^= b;
        }
        0
    }

    pub fn contains(&self, v: u64) -> bool {
        self.reduce(v) == 0
    }

    /// Adds `v`; returns true if the rank grew.
    pub fn insert(&mut self, v: u64) -> bool {
        let r = self.reduce(v);
        if r == 0 {
            return false;
        }
        self.by_lead[63 - r.leading_zeros() as usize] = r;
        self.rank += 1;
        true
    }
}

/// Key of a weight-2 ordered socket-pair count: first socket type, second
/// socket type (0-based edge types), and the input weight when the count was
/// taken through a specific encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairKey {
    pub first: usize,
    pub second: usize,
    pub input_weight: Option<usize>,
}

/// Ordered socket-pair counts over the weight-2 codewords of a component code.
pub type Weight2Pairs = BTreeMap<PairKey, u64>;

/// Multiplicities keyed by `(input weight, output weight)`. The input weight
/// is `None` when the code was enumerated as a codebook.
pub type WeightPairEnumerator = BTreeMap<(Option<usize>, usize), u64>;

/// Calls `f(input, codeword)` for every input word of `rows` in Gray-code
/// order, including the zero word.
fn for_each_codeword(rows: &[u64], mut f: impl FnMut(u64, u64)) {
    let k = rows.len();
    let mut input = 0u64;
    let mut word = 0u64;
    f(0, 0);
    for i in 1u64..(1u64 << k) {
        let bit = i.trailing_zeros() as usize;
        input ^= 1 << bit;
        word ^= rows[bit];
        f(input, word);
    }
}

/// Row masks of a basis of the row space (drops dependent rows).
fn basis_rows(g: &Gf2Matrix) -> Vec<u64> {
    g.rref().0.row_masks()
}

/// Weight enumerator of the code generated by `g`.
///
/// With `with_input_weight`, all `2^k` input words are pushed through `g`
/// itself and bucketed by `(input weight, codeword weight)`; otherwise the
/// codebook is enumerated once per codeword.
pub fn weight_enumerator(g: &Gf2Matrix, with_input_weight: bool) -> Result<WeightPairEnumerator> {
    g.check_enumerable()?;
    let rows = if with_input_weight {
        g.row_masks()
    } else {
        basis_rows(g)
    };
    let mut out = WeightPairEnumerator::new();
    for_each_codeword(&rows, |input, word| {
        let u = with_input_weight.then_some(input.count_ones() as usize);
        *out.entry((u, word.count_ones() as usize)).or_insert(0) += 1;
    });
    Ok(out)
}

/// Counts ordered socket pairs supporting weight-2 codewords, bucketed by the
/// edge types of the two sockets (and the input weight, if requested).
///
/// Each weight-2 codeword contributes both orders of its support, so the
/// counts are symmetric in `(first, second)`.
pub fn enumerate_weight2_pairs(
    g: &Gf2Matrix,
    socket_types: &[usize],
    with_input_weight: bool,
) -> Result<Weight2Pairs> {
    g.check_enumerable()?;
    if socket_types.len() != g.cols() {
        return Err(Error::validation(format!(
            "{} socket types given for a code of length {}",
            socket_types.len(),
            g.cols()
        )));
    }
    let rows = if with_input_weight {
        g.row_masks()
    } else {
        basis_rows(g)
    };
    let mut out = Weight2Pairs::new();
    for_each_codeword(&rows, |input, word| {
        if word.count_ones() != 2 {
            return;
        }
        let a = word.trailing_zeros() as usize;
        let b = 63 - word.leading_zeros() as usize;
        let u = with_input_weight.then_some(input.count_ones() as usize);
        let (la, lb) = (socket_types[a], socket_types[b]);
        for (first, second) in [(la, lb), (lb, la)] {
            *out.entry(PairKey {
                first,
                second,
                input_weight: u,
            })
            .or_insert(0) += 1;
        }
    });
    Ok(out)
}

/// Smallest nonzero codeword weight, or `None` for the zero code.
pub fn min_distance(g: &Gf2Matrix) -> Result<Option<usize>> {
    g.check_enumerable()?;
    let mut best: Option<usize> = None;
    for_each_codeword(&basis_rows(g), |_, word| {
        if word != 0 {
            let w = word.count_ones() as usize;
            best = Some(best.map_or(w, |b| b.min(w)));
        }
    });
    Ok(best)
}
