//! Independent brute-force oracles shared by the integration tests.
//!
//! Nothing here calls into the code paths it is used to check: energies are
//! summed site by site, generators are filled pair by pair from the Hamming
//! structure, and spectra come from dense nalgebra routines.

#![allow(dead_code)]

use cqmap_core::dynamics::FlipRule;
use cqmap_core::model::ClassicalHamiltonian;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Spin values for configuration `i`, bit 0 = up.
pub fn spins(i: usize, n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| if (i >> j) & 1 == 0 { 1.0 } else { -1.0 })
        .collect()
}

/// `Σ_S c_S Π_{j∈S} σ_j`, multiplying explicit spin values.
pub fn naive_energy(h0: &ClassicalHamiltonian, i: usize) -> f64 {
    let s = spins(i, h0.n());
    h0.coeffs()
        .iter()
        .map(|(&mask, &c)| {
            let mut prod = 1.0;
            for (j, sj) in s.iter().enumerate() {
                if (mask >> j) & 1 == 1 {
                    prod *= sj;
                }
            }
            c * prod
        })
        .sum()
}

pub fn naive_table(h0: &ClassicalHamiltonian) -> Vec<f64> {
    (0..1usize << h0.n()).map(|i| naive_energy(h0, i)).collect()
}

/// Quadratic character sum `c_S = 2^{-N} Σ_i f(i) Π_{j∈S} σ_j(i)`.
pub fn naive_walsh(f: &[f64]) -> Vec<f64> {
    let n = f.len().trailing_zeros() as usize;
    (0..f.len())
        .map(|mask| {
            f.iter()
                .enumerate()
                .map(|(i, &v)| {
                    let s = spins(i, n);
                    let chi: f64 = (0..n)
                        .filter(|j| (mask >> j) & 1 == 1)
                        .map(|j| s[j])
                        .product();
                    v * chi
                })
                .sum::<f64>()
                / f.len() as f64
        })
        .collect()
}

/// Random instance with fields, all pairs, and a few three-body terms.
pub fn random_instance(n: usize, seed: u64) -> ClassicalHamiltonian {
    let mut r = rng(seed);
    let mut terms = Vec::new();
    for j in 0..n {
        terms.push((1u32 << j, r.gen_range(-1.0..1.0)));
        for k in j + 1..n {
            terms.push(((1u32 << j) | (1u32 << k), r.gen_range(-1.0..1.0)));
        }
    }
    for _ in 0..n.min(3) {
        let mut mask = 0u32;
        while mask.count_ones() < 3.min(n as u32) {
            mask |= 1 << r.gen_range(0..n);
        }
        terms.push((mask, r.gen_range(-0.5..0.5)));
    }
    ClassicalHamiltonian::from_coeffs(n, terms).unwrap()
}

pub fn rate(rule: FlipRule, beta: f64, de: f64) -> f64 {
    match rule {
        FlipRule::HeatBath => (-beta * de).exp() / (1.0 + (-beta * de).exp()),
        FlipRule::Metropolis => (-beta * de).exp().min(1.0),
    }
}

/// Dense generator filled entry by entry: `W[a][b]` is the rate of `b → a`
/// whenever `a` and `b` differ in exactly one spin.
pub fn dense_generator(h0: &ClassicalHamiltonian, beta: f64, rule: FlipRule) -> DMatrix<f64> {
    let dim = 1usize << h0.n();
    let e = naive_table(h0);
    let mut w = DMatrix::zeros(dim, dim);
    for a in 0..dim {
        for b in 0..dim {
            if (a ^ b).count_ones() == 1 {
                w[(a, b)] = rate(rule, beta, e[a] - e[b]);
            }
        }
    }
    for b in 0..dim {
        let out: f64 = (0..dim).filter(|&a| a != b).map(|a| w[(a, b)]).sum();
        w[(b, b)] = -out;
    }
    w
}

/// Eigenvalues of a general real matrix from its Schur form, sorted by real part.
pub fn nonsymmetric_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let ev = m.complex_eigenvalues();
    for z in ev.iter() {
        assert!(z.im.abs() < 1e-8, "unexpected complex eigenvalue {z}");
    }
    let mut re: Vec<f64> = ev.iter().map(|z| z.re).collect();
    re.sort_by(f64::total_cmp);
    re
}

pub fn sorted_symmetric_eigen(m: DMatrix<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let eig = SymmetricEigen::new(m);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = idx
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    (vals, vecs)
}

/// Dense transverse-field Hamiltonian `E(σ) - Γ Σ σ^x` built by pair enumeration.
pub fn dense_transverse_field(h0: &ClassicalHamiltonian, gamma: f64) -> DMatrix<f64> {
    let dim = 1usize << h0.n();
    let e = naive_table(h0);
    DMatrix::from_fn(dim, dim, |a, b| {
        if a == b {
            e[a]
        } else if (a ^ b).count_ones() == 1 {
            -gamma
        } else {
            0.0
        }
    })
}

/// Positive ground state of a dense symmetric matrix.
pub fn dense_positive_ground(m: DMatrix<f64>) -> (f64, Vec<f64>) {
    let (vals, vecs) = sorted_symmetric_eigen(m);
    let mut v = vecs[0].clone();
    if v.iter().sum::<f64>() < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    (vals[0], v)
}

/// Two-state relaxation at unit total rate.
pub fn two_state_up(p0_up: f64, t: f64) -> f64 {
    0.5 + (p0_up - 0.5) * (-t).exp()
}
