//! Ready-made ensembles used by the tests, the CLI examples and the FFI layer.

use crate::ensemble::{CnTypeFile, EnsembleSpec, SpecFile, VnTypeFile};
use crate::error::Result;

fn repetition(n: usize) -> Vec<Vec<u8>> {
    vec![vec![1; n]]
}

fn vn(name: &str, generator: Vec<Vec<u8>>, socket_types: Vec<usize>, count: u64) -> VnTypeFile {
    VnTypeFile {
        name: name.into(),
        generator,
        puncture: None,
        socket_types,
        count,
    }
}

fn cn_parity(name: &str, h: Vec<Vec<u8>>, socket_types: Vec<usize>, count: u64) -> CnTypeFile {
    CnTypeFile {
        name: name.into(),
        generator: None,
        parity_check: Some(h),
        socket_types,
        count,
    }
}

fn cn_generator(name: &str, g: Vec<Vec<u8>>, socket_types: Vec<usize>, count: u64) -> CnTypeFile {
    CnTypeFile {
        name: name.into(),
        generator: Some(g),
        parity_check: None,
        socket_types,
        count,
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Three edge types, three VN types and two CN types: punctured `(1,1)` VNs,
/// `(2,1)` repetition VNs and `(3,2)` VNs; a two-equation `(4,2)` CN and a
/// `(3,2)` SPC CN. `N = 28`, `K = 8`, `R = 2/7`.
pub fn figure_one_file() -> SpecFile {
    let mut gamma1 = vn("gamma1", vec![vec![1]], vec![1], 4);
    gamma1.puncture = Some(vec![0]);
    SpecFile {
        edge_types: 3,
        vn_types: vec![
            gamma1,
            vn("gamma2", repetition(2), vec![2, 2], 20),
            vn(
                "gamma3",
                vec![vec![1, 0, 1], vec![0, 1, 1]],
                vec![1, 3, 3],
                4,
            ),
        ],
        cn_types: vec![
            cn_parity(
                "delta1",
                vec![vec![1, 1, 0, 0], vec![0, 1, 1, 1]],
                vec![2, 2, 2, 3],
                8,
            ),
            cn_parity("delta2", vec![vec![1, 1, 1]], vec![1, 2, 2], 8),
        ],
    }
}

pub fn figure_one() -> EnsembleSpec {
    EnsembleSpec::from_file(figure_one_file()).expect("figure-one ensemble is valid")
}

/// Two edge types: length-2 repetition VNs with one socket of each type, and
/// two CN types whose sockets are all of type 1 (`cn1`) or all of type 2
/// (`cn2`). Codes are given as generators.
pub fn example_one_file(cn1: Vec<Vec<u8>>, cn2: Vec<Vec<u8>>, scale: u64) -> SpecFile {
    let s1 = cn1.first().map_or(0, Vec::len) as u64;
    let s2 = cn2.first().map_or(0, Vec::len) as u64;
    let n = s1 / gcd(s1, s2) * s2 * scale;
    SpecFile {
        edge_types: 2,
        vn_types: vec![vn("gamma", repetition(2), vec![1, 2], n)],
        cn_types: vec![
            cn_generator("delta1", cn1, vec![1; s1 as usize], n / s1.max(1)),
            cn_generator("delta2", cn2, vec![2; s2 as usize], n / s2.max(1)),
        ],
    }
}

pub fn example_one(cn1: Vec<Vec<u8>>, cn2: Vec<Vec<u8>>, scale: u64) -> Result<EnsembleSpec> {
    EnsembleSpec::from_file(example_one_file(cn1, cn2, scale))
}

/// Generator of the length-`s` single parity-check code.
pub fn spc_generator(s: usize) -> Vec<Vec<u8>> {
    (0..s - 1)
        .map(|i| {
            let mut row = vec![0; s];
            row[i] = 1;
            row[s - 1] = 1;
            row
        })
        .collect()
}

pub fn example_one_spc(s1: usize, s2: usize, scale: u64) -> EnsembleSpec {
    example_one(spc_generator(s1), spc_generator(s2), scale).expect("SPC example is valid")
}

/// Generalized repeat-accumulate ensemble: `(q,k)` VNs generated by `g1`
/// with all sockets of type 1, `q·N` length-2 repetition VNs on type 2, and
/// `q·N` `(3,2)` SPC CNs with sockets `(1,2,2)`.
pub fn example_two_file(g1: Vec<Vec<u8>>, scale: u64) -> SpecFile {
    let q = g1.first().map_or(0, Vec::len);
    let nq = scale * q as u64;
    SpecFile {
        edge_types: 2,
        vn_types: vec![
            vn("gamma1", g1, vec![1; q], scale),
            vn("gamma2", repetition(2), vec![2, 2], nq),
        ],
        cn_types: vec![cn_parity("delta", vec![vec![1, 1, 1]], vec![1, 2, 2], nq)],
    }
}

pub fn example_two(g1: Vec<Vec<u8>>, scale: u64) -> Result<EnsembleSpec> {
    EnsembleSpec::from_file(example_two_file(g1, scale))
}

pub fn example_two_repetition(q: usize, scale: u64) -> EnsembleSpec {
    example_two(repetition(q), scale).expect("repeat-accumulate example is valid")
}

/// Single-edge-type `(dv, dc)`-regular LDPC ensemble.
pub fn regular_ldpc_file(dv: usize, dc: usize, scale: u64) -> SpecFile {
    let g = gcd(dv as u64, dc as u64);
    SpecFile {
        edge_types: 1,
        vn_types: vec![vn("vn", repetition(dv), vec![1; dv], dc as u64 / g * scale)],
        cn_types: vec![cn_parity(
            "cn",
            repetition(dc),
            vec![1; dc],
            dv as u64 / g * scale,
        )],
    }
}

pub fn regular_ldpc(dv: usize, dc: usize, scale: u64) -> EnsembleSpec {
    EnsembleSpec::from_file(regular_ldpc_file(dv, dc, scale)).expect("regular LDPC is valid")
}

/// Single-edge-type irregular LDPC ensemble from `(degree, node count)` lists.
pub fn irregular_ldpc(
    vn_degrees: &[(usize, u64)],
    cn_degrees: &[(usize, u64)],
) -> Result<EnsembleSpec> {
    EnsembleSpec::from_file(SpecFile {
        edge_types: 1,
        vn_types: vn_degrees
            .iter()
            .map(|&(d, n)| vn(&format!("vn{d}"), repetition(d), vec![1; d], n))
            .collect(),
        cn_types: cn_degrees
            .iter()
            .map(|&(d, n)| cn_parity(&format!("cn{d}"), repetition(d), vec![1; d], n))
            .collect(),
    })
}

/// Weight-2 supports on the VN side use only edge type 1 and on the CN side
/// only edge type 2, so `P(ε)·C` vanishes identically.
pub fn disjoint_weight2_example_file() -> SpecFile {
    SpecFile {
        edge_types: 2,
        vn_types: vec![
            vn("rep2", repetition(2), vec![1, 1], 3),
            vn("rep3", repetition(3), vec![2, 2, 2], 2),
        ],
        cn_types: vec![cn_generator(
            "mixed",
            vec![vec![0, 0, 1, 1], vec![1, 1, 1, 0]],
            vec![1, 1, 2, 2],
            3,
        )],
    }
}

pub fn disjoint_weight2_example() -> EnsembleSpec {
    EnsembleSpec::from_file(disjoint_weight2_example_file())
        .expect("disjoint weight-2 example is valid")
}
