//! Spin operators on tensor-product Hilbert spaces and the antiunitary
//! time-reversal operator `exp(-iπ S_y) K`.
//!
//! Basis convention: each site uses the `S_z` eigenbasis ordered by
//! descending magnetic quantum number (`m = s, s-1, …, -s`), and the full
//! space is the lexicographic tensor product with site 0 varying slowest.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, conj, ensure_square, identity, kron, unitary_exp, ComplexMatrix, StateVector};

/// A spin magnitude stored as twice its value, so `Spin(1)` is spin-1/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Spin(u32);

impl Spin {
    pub const HALF: Spin = Spin(1);
    pub const ONE: Spin = Spin(2);

    pub fn from_twice(twice: u32) -> Self {
        Spin(twice)
    }

    /// Accepts `0, 0.5, 1, 1.5, …`.
    pub fn new(s: f64) -> Result<Self> {
        let twice = 2.0 * s;
        if !s.is_finite() || s < 0.0 || (twice - twice.round()).abs() > 1e-12 || twice > u32::MAX as f64 {
            return Err(Error::InvalidSpin(s));
        }
        Ok(Spin(twice.round() as u32))
    }

    pub fn twice(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn multiplicity(self) -> usize {
        self.0 as usize + 1
    }

    pub fn is_half_integer(self) -> bool {
        self.0 % 2 == 1
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_half_integer() {
            write!(f, "{}/2", self.0)
        } else {
            write!(f, "{}", self.0 / 2)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

/// Ordered list of spins defining a tensor-product Hilbert space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinSystem {
    spins: Vec<Spin>,
    dim: usize,
}

impl SpinSystem {
    pub fn new(spins: Vec<Spin>) -> Self {
        let dim = spins.iter().map(|s| s.multiplicity()).product();
        SpinSystem { spins, dim }
    }

    pub fn from_values(values: &[f64]) -> Result<Self> {
        let spins = values.iter().map(|&s| Spin::new(s)).collect::<Result<Vec<_>>>()?;
        Ok(Self::new(spins))
    }

    pub fn spins(&self) -> &[Spin] {
        &self.spins
    }

    pub fn sites(&self) -> usize {
        self.spins.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True when the total spin is half-integer, i.e. `Σ 2sᵢ` is odd.
    pub fn is_half_integer(&self) -> bool {
        self.spins.iter().map(|s| s.twice() as u64).sum::<u64>() % 2 == 1
    }

    pub fn spin(&self, site: usize) -> Result<Spin> {
        self.spins
            .get(site)
            .copied()
            .ok_or(Error::SiteOutOfRange { site, sites: self.spins.len() })
    }

    /// Magnetic quantum numbers (times two) of each site for basis index `index`.
    pub fn twice_m(&self, index: usize) -> Vec<i64> {
        let mut out = vec![0; self.spins.len()];
        let mut rest = index;
        for (k, s) in self.spins.iter().enumerate().rev() {
            let d = s.multiplicity();
            let pos = rest % d;
            rest /= d;
            out[k] = s.twice() as i64 - 2 * pos as i64;
        }
        out
    }

    /// Basis index from per-site twice-m values; inverse of [`Self::twice_m`].
    pub fn index_of(&self, twice_m: &[i64]) -> Option<usize> {
        if twice_m.len() != self.spins.len() {
            return None;
        }
        let mut index = 0;
        for (s, &m) in self.spins.iter().zip(twice_m) {
            let tw = s.twice() as i64;
            if m > tw || m < -tw || (tw - m) % 2 != 0 {
                return None;
            }
            index = index * s.multiplicity() + ((tw - m) / 2) as usize;
        }
        Some(index)
    }
}

impl fmt::Display for SpinSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.spins.iter().map(|s| s.to_string()).collect();
        write!(f, "({})", parts.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinMatrices {
    pub x: ComplexMatrix,
    pub y: ComplexMatrix,
    pub z: ComplexMatrix,
}

impl SpinMatrices {
    pub fn axis(&self, axis: Axis) -> &ComplexMatrix {
        match axis {
            Axis::X => &self.x,
            Axis::Y => &self.y,
            Axis::Z => &self.z,
        }
    }
}

/// `S_x, S_y, S_z` for a single spin, built from the ladder operators.
pub fn spin_matrices(spin: Spin) -> SpinMatrices {
    let d = spin.multiplicity();
    let s = spin.value();
    let m = |k: usize| s - k as f64;

    // S+ |m> = sqrt(s(s+1) - m(m+1)) |m+1>; |m+1> sits one row above |m>.
    let mut raise = ComplexMatrix::zeros(d, d);
    for k in 1..d {
        let mk = m(k);
        raise[(k - 1, k)] = c((s * (s + 1.0) - mk * (mk + 1.0)).sqrt(), 0.0);
    }
    let lower = raise.adjoint();
    let x = (&raise + &lower) * c(0.5, 0.0);
    let y = (&raise - &lower) * c(0.0, -0.5);
    let z = ComplexMatrix::from_fn(d, d, |i, j| if i == j { c(m(i), 0.0) } else { c(0.0, 0.0) });
    SpinMatrices { x, y, z }
}

/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` acting on `site`.
pub fn embed(sys: &SpinSystem, site: usize, op: &ComplexMatrix) -> Result<ComplexMatrix> {
    let spin = sys.spin(site)?;
    ensure_square(op, spin.multiplicity())?;
    let left: usize = sys.spins()[..site].iter().map(|s| s.multiplicity()).product();
    let right: usize = sys.spins()[site + 1..].iter().map(|s| s.multiplicity()).product();
    Ok(kron(&kron(&identity(left), op), &identity(right)))
}

/// Site operator `S_axis` on the full space.
pub fn site_operator(sys: &SpinSystem, site: usize, axis: Axis) -> Result<ComplexMatrix> {
    let spin = sys.spin(site)?;
    embed(sys, site, spin_matrices(spin).axis(axis))
}

/// Total spin component `Σᵢ S_axis⁽ⁱ⁾`.
pub fn total_spin(sys: &SpinSystem, axis: Axis) -> ComplexMatrix {
    let mut total = ComplexMatrix::zeros(sys.dim(), sys.dim());
    for site in 0..sys.sites() {
        total += site_operator(sys, site, axis).expect("site index in range");
    }
    total
}

pub fn total_spin_y(sys: &SpinSystem) -> ComplexMatrix {
    total_spin(sys, Axis::Y)
}

/// Antiunitary operator `u K`, where `K` conjugates amplitudes in the
/// computational basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeReversalOp {
    u: ComplexMatrix,
}

impl TimeReversalOp {
    /// Wraps an arbitrary unitary factor; mostly useful for tests.
    pub fn from_unitary(u: ComplexMatrix) -> Result<Self> {
        ensure_square(&u, u.nrows())?;
        Ok(TimeReversalOp { u })
    }

    pub fn u(&self) -> &ComplexMatrix {
        &self.u
    }

    /// The `K` factor is always present.
    pub fn conjugates(&self) -> bool {
        true
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    /// `Θv = u · conj(v)`.
    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: v.len() });
        }
        Ok(&self.u * v.map(|z| z.conj()))
    }

    /// `Θ A Θ⁻¹ = u · conj(A) · u†`.
    pub fn conjugate(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        ensure_square(a, self.dim())?;
        Ok(&self.u * conj(a) * self.u.adjoint())
    }

    /// `Θ²` is linear: `u · conj(u)`.
    pub fn square(&self) -> ComplexMatrix {
        &self.u * conj(&self.u)
    }
}

/// `Θ = exp(-iπ S_y) K` with `S_y` the total spin.
pub fn time_reversal(sys: &SpinSystem) -> TimeReversalOp {
    let sy = total_spin_y(sys);
    TimeReversalOp { u: unitary_exp(&sy, std::f64::consts::PI) }
}
