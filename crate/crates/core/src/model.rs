//! Classical Ising Hamiltonians over `n` spins with arbitrary k-body couplings.
//!
//! A Hamiltonian is stored as its Walsh expansion
//! `E(σ) = Σ_S c_S Π_{j∈S} σ_j`, keyed by the subset bitmask `S`. The
//! coefficients carry the energy's own sign, so a ferromagnetic bond
//! `-J σ_i σ_j` is stored as `c = -J`. Configuration index `i` encodes spin
//! `j` in bit `j`, with bit 0 meaning `σ_j = +1`.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::sci;

/// Largest spin count for which full 2^N tables are allocated.
pub const MAX_SPINS: usize = 30;

/// Tolerance on the normalization of a probability vector.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpinConfiguration {
    index: u32,
    n: u8,
}

impl SpinConfiguration {
    pub fn new(index: usize, n: usize) -> Result<Self> {
        check_spin_count(n)?;
        if index >> n != 0 {
            return Err(Error::validation(format!(
                "configuration index {index} out of range for {n} spins"
            )));
        }
        Ok(Self {
            index: index as u32,
            n: n as u8,
        })
    }

    pub fn index(&self) -> usize {
        self.index as usize
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    /// Spin value of site `j` as ±1.
    pub fn spin(&self, j: usize) -> i8 {
        spin(self.index as usize, j)
    }

    pub fn spins(&self) -> Vec<i8> {
        (0..self.n()).map(|j| self.spin(j)).collect()
    }

    /// Configuration with site `j` flipped.
    pub fn flipped(&self, j: usize) -> Self {
        Self {
            index: self.index ^ (1 << j),
            n: self.n,
        }
    }
}

#[inline]
pub(crate) fn spin(index: usize, j: usize) -> i8 {
    1 - 2 * ((index >> j) & 1) as i8
}

/// Walsh character `χ_S(i) = Π_{j∈S} σ_j(i)`.
#[inline]
pub fn character(mask: usize, index: usize) -> f64 {
    if (mask & index).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

pub(crate) fn check_spin_count(n: usize) -> Result<()> {
    if n == 0 || n > MAX_SPINS {
        return Err(Error::validation(format!(
            "spin count {n} outside 1..={MAX_SPINS}"
        )));
    }
    Ok(())
}

/// Allocates a zeroed table of length `2^n`, reporting allocation failure as a
/// resource error.
pub(crate) fn alloc_table(n: usize) -> Result<Vec<f64>> {
    check_spin_count(n)?;
    let len = 1usize << n;
    let mut v = Vec::new();
    v.try_reserve_exact(len)
        .map_err(|_| Error::Resource(format!("cannot allocate 2^{n} table")))?;
    v.resize(len, 0.0);
    Ok(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalHamiltonian {
    n: usize,
    coeffs: BTreeMap<u32, f64>,
}

impl ClassicalHamiltonian {
    /// Builds a Hamiltonian from `(mask, coefficient)` pairs, summing repeated masks.
    pub fn from_coeffs(n: usize, coeffs: impl IntoIterator<Item = (u32, f64)>) -> Result<Self> {
        check_spin_count(n)?;
        let mut map = BTreeMap::new();
        for (mask, c) in coeffs {
            if (mask as u64) >> n != 0 {
                return Err(Error::validation(format!(
                    "mask {mask:#b} references a site >= {n}"
                )));
            }
            if !c.is_finite() {
                return Err(Error::validation(format!(
                    "non-finite coefficient for mask {mask:#b}"
                )));
            }
            *map.entry(mask).or_insert(0.0) += c;
        }
        map.retain(|_, c| *c != 0.0);
        Ok(Self { n, coeffs: map })
    }

    /// Expands a full energy table into its Walsh coefficients.
    pub fn from_energy_table(table: &EnergyTable) -> Result<Self> {
        let c = walsh_transform(&table.values, Direction::Forward)?;
        Self::from_coeffs(
            table.n,
            c.into_iter().enumerate().map(|(s, v)| (s as u32, v)),
        )
    }

    /// Ring or open chain with `-J σ_j σ_{j+1} - h σ_j`.
    pub fn chain(n: usize, coupling: f64, field: f64, periodic: bool) -> Result<Self> {
        LatticeSpec {
            kind: LatticeKind::Chain,
            size: vec![n],
            periodic,
            coupling,
            field,
        }
        .hamiltonian()
    }

    /// `rows × cols` square lattice, site index `r * cols + c`.
    pub fn grid(
        rows: usize,
        cols: usize,
        coupling: f64,
        field: f64,
        periodic: bool,
    ) -> Result<Self> {
        LatticeSpec {
            kind: LatticeKind::Grid,
            size: vec![rows, cols],
            periodic,
            coupling,
            field,
        }
        .hamiltonian()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &BTreeMap<u32, f64> {
        &self.coeffs
    }

    pub fn coeff(&self, mask: u32) -> f64 {
        self.coeffs.get(&mask).copied().unwrap_or(0.0)
    }

    /// Energy of a single configuration by direct summation.
    pub fn energy(&self, index: usize) -> f64 {
        self.coeffs
            .iter()
            .map(|(&s, &c)| c * character(s as usize, index))
            .sum()
    }

    /// Same model with every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .map(|(&s, &c)| (s, c * factor))
            .filter(|&(_, c)| c != 0.0)
            .collect();
        Self { n: self.n, coeffs }
    }

    /// Writes the `mask,order,coefficient` CSV dump.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "mask,order,coefficient")?;
        for (&s, &c) in &self.coeffs {
            writeln!(w, "{},{},{}", s, s.count_ones(), sci(c))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Chain,
    Grid,
}

fn default_true() -> bool {
    true
}

fn default_coupling() -> f64 {
    1.0
}

/// Convenience ferromagnet: `-J` on every nearest-neighbour bond and `-h` on
/// every site. With periodic wrap-around, bonds produced twice (size 2 along
/// an axis) are summed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub kind: LatticeKind,
    pub size: Vec<usize>,
    #[serde(default = "default_true")]
    pub periodic: bool,
    #[serde(rename = "J", default = "default_coupling")]
    pub coupling: f64,
    #[serde(rename = "h", default)]
    pub field: f64,
}

impl LatticeSpec {
    pub fn dims(&self) -> Result<(usize, usize)> {
        match (self.kind, self.size.as_slice()) {
            (LatticeKind::Chain, &[len]) => Ok((1, len)),
            (LatticeKind::Grid, &[rows, cols]) => Ok((rows, cols)),
            (kind, size) => Err(Error::validation(format!(
                "lattice {kind:?} cannot take size {size:?}"
            ))),
        }
    }

    pub fn n_sites(&self) -> Result<usize> {
        let (r, c) = self.dims()?;
        Ok(r * c)
    }

    fn terms(&self) -> Result<Vec<(u32, f64)>> {
        let (rows, cols) = self.dims()?;
        let n = rows * cols;
        check_spin_count(n)?;
        let mut out = Vec::new();
        let site = |r: usize, c: usize| r * cols + c;
        let mut bond = |a: usize, b: usize| {
            if a != b {
                out.push(((1u32 << a) | (1u32 << b), -self.coupling));
            }
        };
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    bond(site(r, c), site(r, c + 1));
                } else if self.periodic && cols > 1 {
                    bond(site(r, c), site(r, 0));
                }
                if r + 1 < rows {
                    bond(site(r, c), site(r + 1, c));
                } else if self.periodic && rows > 1 {
                    bond(site(r, c), site(0, c));
                }
            }
        }
        if self.field != 0.0 {
            out.extend((0..n).map(|j| (1u32 << j, -self.field)));
        }
        Ok(out)
    }

    pub fn hamiltonian(&self) -> Result<ClassicalHamiltonian> {
        ClassicalHamiltonian::from_coeffs(self.n_sites()?, self.terms()?)
    }

    pub fn geometry(&self) -> Result<SiteGeometry> {
        let (rows, cols) = self.dims()?;
        Ok(SiteGeometry::grid(rows, cols, self.periodic))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSpec {
    pub sites: Vec<usize>,
    pub c: f64,
}

/// JSON model description:
/// `{"n": 4, "terms": [{"sites": [0, 1], "c": -1.0}], "lattice": {...}}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default)]
    pub terms: Vec<TermSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeSpec>,
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::validation(format!("model file: {e}")))
    }

    pub fn spin_count(&self) -> Result<usize> {
        let from_lattice = self.lattice.as_ref().map(|l| l.n_sites()).transpose()?;
        match (self.n, from_lattice) {
            (Some(n), Some(m)) if n != m => Err(Error::validation(format!(
                "n = {n} disagrees with lattice site count {m}"
            ))),
            (Some(n), _) | (None, Some(n)) => Ok(n),
            (None, None) => Err(Error::validation("model needs n or a lattice")),
        }
    }
}

/// Validates a model description and merges its terms.
pub fn build_model(spec: &ModelSpec) -> Result<ClassicalHamiltonian> {
    let n = spec.spin_count()?;
    check_spin_count(n)?;
    let mut seen = BTreeMap::new();
    for term in &spec.terms {
        let mut mask = 0u32;
        for &site in &term.sites {
            if site >= n {
                return Err(Error::validation(format!("site {site} >= n = {n}")));
            }
            if mask & (1 << site) != 0 {
                return Err(Error::validation(format!(
                    "site {site} repeated within term {:?}",
                    term.sites
                )));
            }
            mask |= 1 << site;
        }
        if seen.insert(mask, term.c).is_some() {
            return Err(Error::validation(format!(
                "duplicate subset {:?}",
                term.sites
            )));
        }
    }
    let mut all: Vec<(u32, f64)> = seen.into_iter().collect();
    if let Some(lattice) = &spec.lattice {
        all.extend(lattice.terms()?);
    }
    ClassicalHamiltonian::from_coeffs(n, all)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTable {
    pub n: usize,
    pub values: Vec<f64>,
}

impl EnergyTable {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        check_spin_count(n)?;
        if values.len() != 1 << n {
            return Err(Error::validation(format!(
                "table length {} is not 2^{n}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("energy table has non-finite entries"));
        }
        Ok(Self { n, values })
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Indices within `tol` of the minimum energy.
    pub fn ground_indices(&self, tol: f64) -> Vec<usize> {
        let emin = self.min();
        (0..self.values.len())
            .filter(|&i| self.values[i] - emin <= tol)
            .collect()
    }

    pub fn mean(&self, p: &[f64]) -> f64 {
        self.values.iter().zip(p).map(|(e, q)| e * q).sum()
    }
}

/// Evaluates `E(σ)` on all `2^N` configurations.
pub fn energy_table(h0: &ClassicalHamiltonian) -> Result<EnergyTable> {
    let n = h0.n;
    let mut values = alloc_table(n)?;
    if h0.coeffs.len() > 2 * n {
        for (&s, &c) in &h0.coeffs {
            values[s as usize] = c;
        }
        fwht(&mut values);
    } else {
        for (i, v) in values.iter_mut().enumerate() {
            *v = h0.energy(i);
        }
    }
    Ok(EnergyTable { n, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Unnormalized in-place Walsh–Hadamard butterfly:
/// `f[S] ← Σ_i f[i] χ_S(i)`.
pub fn fwht(values: &mut [f64]) {
    let len = values.len();
    debug_assert!(len.is_power_of_two());
    let mut half = 1;
    while half < len {
        for block in values.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        half *= 2;
    }
}

/// Forward: `c_S = 2^{-N} Σ_i f(i) χ_S(i)`. Inverse: `f(i) = Σ_S c_S χ_S(i)`.
pub fn walsh_transform(values: &[f64], direction: Direction) -> Result<Vec<f64>> {
    if values.is_empty() || !values.len().is_power_of_two() {
        return Err(Error::validation(format!(
            "Walsh transform length {} is not a power of two",
            values.len()
        )));
    }
    let mut out = values.to_vec();
    fwht(&mut out);
    if direction == Direction::Forward {
        let scale = 1.0 / out.len() as f64;
        out.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    n: usize,
    p: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(n: usize, p: Vec<f64>) -> Result<Self> {
        check_spin_count(n)?;
        if p.len() != 1 << n {
            return Err(Error::validation(format!(
                "probability vector length {} is not 2^{n}",
                p.len()
            )));
        }
        if let Some(bad) = p.iter().find(|&&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::validation(format!(
                "invalid probability entry {bad}"
            )));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::validation(format!("probabilities sum to {total}")));
        }
        Ok(Self { n, p })
    }

    /// Wraps a vector produced by an integrator, skipping the strict checks.
    pub(crate) fn from_raw(n: usize, p: Vec<f64>) -> Self {
        Self { n, p }
    }

    pub fn uniform(n: usize) -> Result<Self> {
        let mut p = alloc_table(n)?;
        let w = 1.0 / p.len() as f64;
        p.iter_mut().for_each(|x| *x = w);
        Ok(Self { n, p })
    }

    pub fn point(n: usize, index: usize) -> Result<Self> {
        let mut p = alloc_table(n)?;
        *p.get_mut(index)
            .ok_or_else(|| Error::validation(format!("index {index} out of range")))? = 1.0;
        Ok(Self { n, p })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.p
    }

    pub fn l1_distance(&self, other: &[f64]) -> f64 {
        self.p.iter().zip(other).map(|(a, b)| (a - b).abs()).sum()
    }
}

/// Boltzmann weights `e^{-β E}` normalized, evaluated with a max-shift.
pub fn gibbs_from_table(table: &EnergyTable, beta: f64) -> Result<ProbabilityVector> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::validation(format!(
            "inverse temperature {beta} must be finite and >= 0"
        )));
    }
    let emin = table.min();
    let mut p: Vec<f64> = table
        .values
        .iter()
        .map(|e| (-beta * (e - emin)).exp())
        .collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    Ok(ProbabilityVector { n: table.n, p })
}

pub fn gibbs_distribution(h0: &ClassicalHamiltonian, beta: f64) -> Result<ProbabilityVector> {
    gibbs_from_table(&energy_table(h0)?, beta)
}

/// Site positions used to measure the spatial range of couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteGeometry {
    positions: Vec<[f64; 2]>,
    /// Box lengths for minimum-image distances, when periodic.
    period: Option<[f64; 2]>,
}

impl SiteGeometry {
    pub fn chain(n: usize, periodic: bool) -> Self {
        Self::grid(1, n, periodic)
    }

    pub fn grid(rows: usize, cols: usize, periodic: bool) -> Self {
        let positions = (0..rows * cols)
            .map(|i| [(i % cols) as f64, (i / cols) as f64])
            .collect();
        Self {
            positions,
            period: periodic.then_some([cols as f64, rows as f64]),
        }
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (pa, pb) = (self.positions[a], self.positions[b]);
        let mut d2 = 0.0;
        for axis in 0..2 {
            let mut d = (pa[axis] - pb[axis]).abs();
            if let Some(period) = self.period {
                d = d.min(period[axis] - d);
            }
            d2 += d * d;
        }
        d2.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderStats {
    pub count: usize,
    pub max_abs: f64,
}

/// Histogram of interaction orders `k = |S|` among significant coefficients.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct InteractionProfile {
    pub orders: BTreeMap<u32, OrderStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_pair_range: Option<f64>,
    pub tol: f64,
}

impl InteractionProfile {
    pub fn count(&self, order: u32) -> usize {
        self.orders.get(&order).map_or(0, |s| s.count)
    }

    pub fn max_abs(&self, order: u32) -> f64 {
        self.orders.get(&order).map_or(0.0, |s| s.max_abs)
    }

    pub fn max_order(&self) -> Option<u32> {
        self.orders.keys().next_back().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }
}

/// Relative noise floor applied when no tolerance is given.
pub const DEFAULT_PROFILE_RTOL: f64 = 1e-10;

/// Counts coefficients with `|c_S| > tol` per order. `tol = None` uses
/// `1e-10 · max |c_S|`.
pub fn interaction_profile(
    coeffs: &BTreeMap<u32, f64>,
    tol: Option<f64>,
    geometry: Option<&SiteGeometry>,
) -> Result<InteractionProfile> {
    let tol = match tol {
        Some(t) if t >= 0.0 => t,
        Some(t) => return Err(Error::validation(format!("tolerance {t} must be >= 0"))),
        None => DEFAULT_PROFILE_RTOL * coeffs.values().fold(0.0f64, |m, c| m.max(c.abs())),
    };
    let mut profile = InteractionProfile {
        tol,
        ..Default::default()
    };
    for (&s, &c) in coeffs {
        if c.abs() <= tol {
            continue;
        }
        let stats = profile.orders.entry(s.count_ones()).or_insert(OrderStats {
            count: 0,
            max_abs: 0.0,
        });
        stats.count += 1;
        stats.max_abs = stats.max_abs.max(c.abs());
        if let (Some(g), 2) = (geometry, s.count_ones()) {
            let a = s.trailing_zeros() as usize;
            let b = 31 - s.leading_zeros() as usize;
            let r = g.distance(a, b);
            profile.max_pair_range = Some(profile.max_pair_range.map_or(r, |m: f64| m.max(r)));
        }
    }
    Ok(profile)
}
