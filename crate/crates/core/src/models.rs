//! Concrete spin models: the two-state Landau-Zener problem, a spin-3/2 with
//! quadrupole anisotropy, a spin-1/2 coupled to a spin-1, and a central spin
//! coupled to two spin-1/2 bath spins.
//!
//! Each model exists in operator form (a [`Hamiltonian`] over a
//! [`SpinSystem`]) and in an explicit `A + R t` matrix form over a labelled
//! diabatic basis. The two agree entrywise after the documented basis
//! permutation.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{Hamiltonian, HamiltonianTerm, LinearSweep, SpinFactor, TimePolynomial};
use crate::linalg::{c, ComplexMatrix, StateVector};
use crate::spin::{time_reversal, Axis, Spin, SpinSystem, TimeReversalOp};

/// Ordered diabatic states: `labels[k]` names computational basis state
/// `indices[k]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiabaticBasis {
    labels: Vec<String>,
    indices: Vec<usize>,
}

impl DiabaticBasis {
    pub fn new(labels: Vec<String>, indices: Vec<usize>) -> Result<Self> {
        let n = indices.len();
        if labels.len() != n {
            return Err(Error::InvalidLabels(format!("{} labels for {} basis states", labels.len(), n)));
        }
        let mut seen = vec![false; n];
        for &i in &indices {
            if i >= n || seen[i] {
                return Err(Error::InvalidLabels(format!("indices {indices:?} are not a permutation")));
            }
            seen[i] = true;
        }
        let mut names: Vec<&String> = labels.iter().collect();
        names.sort();
        names.dedup();
        if names.len() != n {
            return Err(Error::InvalidLabels("duplicate labels".into()));
        }
        Ok(DiabaticBasis { labels, indices })
    }

    /// Labels `1..=dim` in computational order.
    pub fn numbered(dim: usize) -> Self {
        DiabaticBasis { labels: (1..=dim).map(|k| k.to_string()).collect(), indices: (0..dim).collect() }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// `M'_{kl} = M_{indices[k], indices[l]}`.
    pub fn reorder(&self, m: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.len(), self.len(), |k, l| m[(self.indices[k], self.indices[l])])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KramersPair {
    /// Position in the diabatic basis.
    pub state: usize,
    pub partner: usize,
    /// `Θ|state⟩ = phase · |partner⟩`.
    pub phase: (f64, f64),
}

/// Partner of every diabatic state under `Θ`. Requires each `Θ|n⟩` to be a
/// single basis vector up to phase.
pub fn kramers_pairs(theta: &TimeReversalOp, basis: &DiabaticBasis) -> Result<Vec<KramersPair>> {
    let n = basis.len();
    if theta.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: theta.dim() });
    }
    let mut position_of = vec![0; n];
    for (k, &i) in basis.indices().iter().enumerate() {
        position_of[i] = k;
    }
    let mut pairs = Vec::with_capacity(n);
    for (state, &index) in basis.indices().iter().enumerate() {
        let mut e = StateVector::zeros(n);
        e[index] = c(1.0, 0.0);
        let image = theta.apply(&e)?;
        let (best, largest) = image
            .iter()
            .enumerate()
            .map(|(i, z)| (i, z.norm()))
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if largest < 1.0 - 1e-10 {
            return Err(Error::NotBasisAligned { index: state, largest });
        }
        let phase = image[best] / largest;
        pairs.push(KramersPair { state, partner: position_of[best], phase: (phase.re, phase.im) });
    }
    Ok(pairs)
}

/// Matrix form of a model in its own labelled basis, together with the map to
/// the operator-form computational basis.
#[derive(Debug, Clone)]
pub struct MatrixForm {
    pub hamiltonian: LinearSweep,
    pub basis: DiabaticBasis,
    /// Row `k` of the matrix form is computational basis state `operator_index[k]`.
    pub operator_index: Vec<usize>,
    pub system: SpinSystem,
}

impl MatrixForm {
    /// `Θ` expressed in the matrix-form basis.
    pub fn time_reversal(&self) -> TimeReversalOp {
        let theta = time_reversal(&self.system);
        let u = theta.u();
        let idx = &self.operator_index;
        let permuted = ComplexMatrix::from_fn(u.nrows(), u.ncols(), |k, l| u[(idx[k], idx[l])]);
        TimeReversalOp::from_unitary(permuted).expect("square permutation")
    }

    /// Diabatic basis labels in the matrix-form order (identity indices).
    pub fn diabatic_basis(&self) -> DiabaticBasis {
        DiabaticBasis { labels: self.basis.labels.clone(), indices: (0..self.basis.len()).collect() }
    }
}

fn sweep(a: ComplexMatrix, slopes: &[f64]) -> LinearSweep {
    let n = slopes.len();
    let r = ComplexMatrix::from_fn(n, n, |i, j| if i == j { c(slopes[i], 0.0) } else { c(0.0, 0.0) });
    LinearSweep::from_matrix_pair(a, r).expect("model matrices are Hermitian")
}

fn real_matrix(n: usize, rows: &[f64]) -> ComplexMatrix {
    ComplexMatrix::from_row_slice(n, n, &rows.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>())
}

/// Accumulates operator-form terms, skipping zero coefficients.
struct TermBuilder {
    terms: Vec<HamiltonianTerm>,
}

impl TermBuilder {
    fn new() -> Self {
        TermBuilder { terms: Vec::new() }
    }

    fn add(&mut self, coeff: TimePolynomial, factors: &[(usize, Axis)]) -> &mut Self {
        if coeff.is_zero() {
            return self;
        }
        let mut merged: Vec<SpinFactor> = Vec::new();
        for &(site, axis) in factors {
            match merged.last_mut() {
                Some(f) if f.site == site && f.axis == axis => f.exponent += 1,
                _ => merged.push(SpinFactor::new(site, axis)),
            }
        }
        self.terms.push(HamiltonianTerm::new(coeff, merged));
        self
    }

    fn constant(&mut self, value: f64, factors: &[(usize, Axis)]) -> &mut Self {
        self.add(TimePolynomial::constant(value), factors)
    }

    fn linear(&mut self, slope: f64, factors: &[(usize, Axis)]) -> &mut Self {
        self.add(TimePolynomial::linear(slope), factors)
    }

    /// `coeff · (v·S)²` on one site, expanded over axis pairs.
    fn quadratic_form(&mut self, coeff: f64, v: [f64; 3], site: usize) -> &mut Self {
        for (a, &va) in Axis::ALL.iter().zip(&v) {
            for (b, &vb) in Axis::ALL.iter().zip(&v) {
                self.constant(coeff * va * vb, &[(site, *a), (site, *b)]);
            }
        }
        self
    }

    fn build(&mut self, sys: SpinSystem) -> Hamiltonian {
        Hamiltonian::new(sys, std::mem::take(&mut self.terms)).expect("model terms reference valid sites")
    }
}

// ---------------------------------------------------------------------------
// Two-state Landau-Zener

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lz2Params {
    pub g: f64,
    pub beta: f64,
}

impl Default for Lz2Params {
    fn default() -> Self {
        Lz2Params { g: 1.0, beta: 1.0 }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter { name: "beta".into(), reason: format!("must be positive, got {beta}") });
    }
    Ok(())
}

/// `βtσ_z + gσ_x`, written with spin-1/2 operators (`σ = 2S`).
pub fn lz_two_state(p: Lz2Params) -> Result<Hamiltonian> {
    check_beta(p.beta)?;
    Ok(TermBuilder::new()
        .linear(2.0 * p.beta, &[(0, Axis::Z)])
        .constant(2.0 * p.g, &[(0, Axis::X)])
        .build(SpinSystem::new(vec![Spin::HALF])))
}

/// Asymptotic flip probability `1 - exp(-πg²/β)`.
pub fn lz_probability(g: f64, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(-(-PI * g * g / beta).exp_m1())
}

pub fn lz_matrix_form(p: Lz2Params) -> Result<MatrixForm> {
    check_beta(p.beta)?;
    let a = real_matrix(2, &[0.0, p.g, p.g, 0.0]);
    Ok(MatrixForm {
        hamiltonian: sweep(a, &[p.beta, -p.beta]),
        basis: DiabaticBasis::new(vec!["up".into(), "down".into()], vec![0, 1])?,
        operator_index: vec![0, 1],
        system: SpinSystem::new(vec![Spin::HALF]),
    })
}

// ---------------------------------------------------------------------------
// Spin-3/2 with quadrupole anisotropy

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Spin32Params {
    pub h1: f64,
    pub h2: f64,
    pub g1: f64,
    pub g2: f64,
    pub phi: f64,
    /// Tilt of the second anisotropy axis out of the xz plane's normal.
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spin32Derived {
    pub beta1: f64,
    pub beta2: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl Spin32Derived {
    pub fn new(p: &Spin32Params) -> Self {
        let (cos2, sin2) = ((2.0 * p.phi).cos(), (2.0 * p.phi).sin());
        let sum = p.g1 + p.g2;
        let diff = p.g1 - p.g2;
        let root3 = 3.0_f64.sqrt();
        Spin32Derived {
            beta1: 1.5 * p.h1 + 27.0 / 8.0 * p.h2,
            beta2: 0.5 * p.h1 + 0.125 * p.h2,
            delta1: 1.5 * sum - 0.75 * diff * cos2,
            delta2: sum + 0.75 * diff * cos2,
            gamma1: root3 / 4.0 * (sum + diff * cos2),
            gamma2: root3 / 2.0 * diff * sin2,
        }
    }
}

/// Spin-3/2 labels in matrix-form order and their computational indices.
pub const SPIN32_LABELS: [&str; 4] = ["3/2", "-3/2", "1/2", "-1/2"];
const SPIN32_INDEX: [usize; 4] = [0, 3, 1, 2];

/// Angle `θ` at which the operator form reproduces the 4×4 matrix form.
pub const SPIN32_MATRIX_THETA: f64 = PI / 2.0;

/// `g1 (n·S)² + h1 t S_z + h2 t S_z³ + g2 (n⊥·S)²` with
/// `n = (cos φ, 0, sin φ)` and `n⊥ = (-sin φ sin θ, cos θ, cos φ sin θ)`.
pub fn spin32_operator_form(p: &Spin32Params) -> Hamiltonian {
    let (sp, cp) = p.phi.sin_cos();
    let (st, ct) = p.theta.sin_cos();
    let n = [cp, 0.0, sp];
    let n_perp = [-sp * st, ct, cp * st];
    TermBuilder::new()
        .quadratic_form(p.g1, n, 0)
        .linear(p.h1, &[(0, Axis::Z)])
        .linear(p.h2, &[(0, Axis::Z), (0, Axis::Z), (0, Axis::Z)])
        .quadratic_form(p.g2, n_perp, 0)
        .build(SpinSystem::new(vec![Spin::from_twice(3)]))
}

/// Dense 4×4 form over `(|3/2⟩, |-3/2⟩, |1/2⟩, |-1/2⟩)`. Equals the
/// operator form at `θ = π/2` ([`SPIN32_MATRIX_THETA`]); `p.theta` is ignored.
pub fn spin32_matrix_form(p: &Spin32Params) -> MatrixForm {
    let d = Spin32Derived::new(p);
    let a = real_matrix(
        4,
        &[
            d.delta1, 0.0, d.gamma2, d.gamma1, //
            0.0, d.delta1, d.gamma1, -d.gamma2, //
            d.gamma2, d.gamma1, d.delta2, 0.0, //
            d.gamma1, -d.gamma2, 0.0, d.delta2,
        ],
    );
    MatrixForm {
        hamiltonian: sweep(a, &[d.beta1, -d.beta1, d.beta2, -d.beta2]),
        basis: spin32_basis(),
        operator_index: SPIN32_INDEX.to_vec(),
        system: SpinSystem::new(vec![Spin::from_twice(3)]),
    }
}

/// Diabatic basis of the operator form, in matrix-form label order.
pub fn spin32_basis() -> DiabaticBasis {
    DiabaticBasis::new(SPIN32_LABELS.iter().map(|s| s.to_string()).collect(), SPIN32_INDEX.to_vec())
        .expect("valid permutation")
}

// ---------------------------------------------------------------------------
// Spin-1/2 coupled to spin-1

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct HalfOneParams {
    pub eps1: f64,
    pub eps2: f64,
    pub g: [f64; 8],
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfOneDerived {
    pub delta1: f64,
    pub delta2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub gamma1: Complex64,
    pub gamma2: Complex64,
    pub gamma3: Complex64,
    pub gamma4: Complex64,
}

impl HalfOneDerived {
    pub fn new(p: &HalfOneParams) -> Self {
        let [g1, g2, g3, g4, g5, g6, g7, g8] = p.g;
        let r = 2.0 * 2.0_f64.sqrt();
        HalfOneDerived {
            delta1: p.eps1 / 2.0 + p.eps2,
            delta2: -p.eps1 / 2.0 + p.eps2,
            beta1: p.h1 / 2.0 + p.h2 + p.h3 / 2.0,
            beta2: p.h1 / 2.0,
            beta3: p.h1 / 2.0 - p.h2 + p.h3 / 2.0,
            // The s_y S_z coupling enters with a phase; real only when g8 = 0.
            gamma1: c(g1 / 2.0, -g8 / 2.0),
            gamma2: c((g2 - g3) / r, -(g4 + g7) / r),
            gamma3: c((g2 + g3) / r, (g7 - g4) / r),
            gamma4: c(g5 / r, -g6 / r),
        }
    }
}

/// `ε1 s_z S_z + ε2 S_z² + g1 s_x S_z + g2 s_x S_x + g3 s_y S_y + g4 s_y S_x
/// + g5 s_z S_x + g6 s_z S_y + g7 s_x S_y + g8 s_y S_z + h1 t s_z + h2 t S_z
/// + h3 t s_z S_z²`; site 0 is the spin-1/2, site 1 the spin-1.
pub fn half_one_operator_form(p: &HalfOneParams) -> Hamiltonian {
    use Axis::{X, Y, Z};
    let [g1, g2, g3, g4, g5, g6, g7, g8] = p.g;
    let (s, l) = (0, 1);
    TermBuilder::new()
        .constant(p.eps1, &[(s, Z), (l, Z)])
        .constant(p.eps2, &[(l, Z), (l, Z)])
        .constant(g1, &[(s, X), (l, Z)])
        .constant(g2, &[(s, X), (l, X)])
        .constant(g3, &[(s, Y), (l, Y)])
        .constant(g4, &[(s, Y), (l, X)])
        .constant(g5, &[(s, Z), (l, X)])
        .constant(g6, &[(s, Z), (l, Y)])
        .constant(g7, &[(s, X), (l, Y)])
        .constant(g8, &[(s, Y), (l, Z)])
        .linear(p.h1, &[(s, Z)])
        .linear(p.h2, &[(l, Z)])
        .linear(p.h3, &[(s, Z), (l, Z), (l, Z)])
        .build(SpinSystem::new(vec![Spin::HALF, Spin::ONE]))
}

/// 6×6 matrix over `(↑1, ↑0, ↑-1, ↓1, ↓0, ↓-1)`, labelled `1…6`.
pub fn half_one_matrix_form(p: &HalfOneParams) -> MatrixForm {
    let d = HalfOneDerived::new(p);
    let z = c(0.0, 0.0);
    let re = |x: f64| c(x, 0.0);
    let (g1, g2, g3, g4) = (d.gamma1, d.gamma2, d.gamma3, d.gamma4);
    #[rustfmt::skip]
    let a = ComplexMatrix::from_row_slice(6, 6, &[
        re(d.delta1), g4,         z,           g1,          g2,          z,
        g4.conj(),    z,          g4,          g3,          z,           g2,
        z,            g4.conj(),  re(d.delta2), z,          g3,          -g1,
        g1.conj(),    g3.conj(),  z,           re(d.delta2), -g4,        z,
        g2.conj(),    z,          g3.conj(),   -g4.conj(),  z,           -g4,
        z,            g2.conj(),  -g1.conj(),  z,           -g4.conj(),  re(d.delta1),
    ]);
    MatrixForm {
        hamiltonian: sweep(a, &[d.beta1, d.beta2, d.beta3, -d.beta3, -d.beta2, -d.beta1]),
        basis: DiabaticBasis::numbered(6),
        operator_index: (0..6).collect(),
        system: SpinSystem::new(vec![Spin::HALF, Spin::ONE]),
    }
}

// ---------------------------------------------------------------------------
// Central spin with two bath spins

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CentralSpinParams {
    pub h1: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub g: [f64; 6],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CentralSpinDerived {
    pub beta: f64,
    pub delta: [f64; 4],
    pub gamma: [f64; 6],
}

impl CentralSpinDerived {
    pub fn new(p: &CentralSpinParams) -> Self {
        let [g1, g2, g3, g4, g5, g6] = p.g;
        let (e1, e2, e3) = (p.eps1 / 4.0, p.eps2 / 4.0, p.eps3 / 4.0);
        CentralSpinDerived {
            beta: p.h1 / 2.0,
            delta: [e1 + e2 + e3, e1 - e2 - e3, -e1 + e2 - e3, -e1 - e2 + e3],
            gamma: [
                (g1 + g2) / 4.0,
                (g4 - g6) / 4.0,
                (g3 - g5) / 4.0,
                (g4 + g6) / 4.0,
                (g1 - g2) / 4.0,
                (g3 + g5) / 4.0,
            ],
        }
    }
}

/// `h1 t s_z + ε1 s_z s1_z + ε2 s_z s2_z + ε3 s1_z s2_z + g1 s_x s1_z +
/// g2 s_x s2_z + g3 s_x s1_x + g4 s_x s2_x + g5 s_y s1_y + g6 s_y s2_y`;
/// site 0 is the central spin.
pub fn central_spin_operator_form(p: &CentralSpinParams) -> Hamiltonian {
    use Axis::{X, Y, Z};
    let [g1, g2, g3, g4, g5, g6] = p.g;
    TermBuilder::new()
        .linear(p.h1, &[(0, Z)])
        .constant(p.eps1, &[(0, Z), (1, Z)])
        .constant(p.eps2, &[(0, Z), (2, Z)])
        .constant(p.eps3, &[(1, Z), (2, Z)])
        .constant(g1, &[(0, X), (1, Z)])
        .constant(g2, &[(0, X), (2, Z)])
        .constant(g3, &[(0, X), (1, X)])
        .constant(g4, &[(0, X), (2, X)])
        .constant(g5, &[(0, Y), (1, Y)])
        .constant(g6, &[(0, Y), (2, Y)])
        .build(SpinSystem::new(vec![Spin::HALF; 3]))
}

/// 8×8 matrix over `(↑↑↑, ↑↑↓, …, ↓↓↓)`, labelled `1…8`.
pub fn central_spin_matrix_form(p: &CentralSpinParams) -> MatrixForm {
    let d = CentralSpinDerived::new(p);
    let [d1, d2, d3, d4] = d.delta;
    let [g1, g2, g3, g4, g5, g6] = d.gamma;
    #[rustfmt::skip]
    let a = real_matrix(8, &[
        d1,  0.0, 0.0, 0.0, g1,  g2,  g3,  0.0,
        0.0, d2,  0.0, 0.0, g4,  g5,  0.0, g3,
        0.0, 0.0, d3,  0.0, g6,  0.0, -g5, g2,
        0.0, 0.0, 0.0, d4,  0.0, g6,  g4,  -g1,
        g1,  g4,  g6,  0.0, d4,  0.0, 0.0, 0.0,
        g2,  g5,  0.0, g6,  0.0, d3,  0.0, 0.0,
        g3,  0.0, -g5, g4,  0.0, 0.0, d2,  0.0,
        0.0, g3,  g2,  -g1, 0.0, 0.0, 0.0, d1,
    ]);
    let b = d.beta;
    MatrixForm {
        hamiltonian: sweep(a, &[b, b, b, b, -b, -b, -b, -b]),
        basis: DiabaticBasis::numbered(8),
        operator_index: (0..8).collect(),
        system: SpinSystem::new(vec![Spin::HALF; 3]),
    }
}

// ---------------------------------------------------------------------------
// Named models and parameters

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ModelKind {
    Lz2,
    Spin32,
    HalfOne,
    CentralSpin,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Lz2, ModelKind::Spin32, ModelKind::HalfOne, ModelKind::CentralSpin];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lz2 => "lz2",
            ModelKind::Spin32 => "spin32",
            ModelKind::HalfOne => "half-one",
            ModelKind::CentralSpin => "central-spin",
        }
    }

    pub fn parameter_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Lz2 => &["g", "beta"],
            ModelKind::Spin32 => &["h1", "h2", "g1", "g2", "phi", "theta"],
            ModelKind::HalfOne => {
                &["eps1", "eps2", "g1", "g2", "g3", "g4", "g5", "g6", "g7", "g8", "h1", "h2", "h3"]
            }
            ModelKind::CentralSpin => &["h1", "eps1", "eps2", "eps3", "g1", "g2", "g3", "g4", "g5", "g6"],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| Error::UnknownModel(s.to_string()))
    }
}

/// A built-in model with concrete parameter values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Model {
    Lz2(Lz2Params),
    Spin32(Spin32Params),
    HalfOne(HalfOneParams),
    CentralSpin(CentralSpinParams),
}

fn indexed(name: &str, prefix: &str, count: usize) -> Option<usize> {
    let k: usize = name.strip_prefix(prefix)?.parse().ok()?;
    (1..=count).contains(&k).then(|| k - 1)
}

impl Model {
    /// Default parameters: all zero except `lz2`'s `g = beta = 1`.
    pub fn defaults(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Lz2 => Model::Lz2(Lz2Params::default()),
            ModelKind::Spin32 => Model::Spin32(Spin32Params::default()),
            ModelKind::HalfOne => Model::HalfOne(HalfOneParams::default()),
            ModelKind::CentralSpin => Model::CentralSpin(CentralSpinParams::default()),
        }
    }

    pub fn with_params<'a>(kind: ModelKind, params: impl IntoIterator<Item = (&'a str, f64)>) -> Result<Self> {
        let mut model = Self::defaults(kind);
        for (name, value) in params {
            model.set(name, value)?;
        }
        model.validate()?;
        Ok(model)
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Lz2(_) => ModelKind::Lz2,
            Model::Spin32(_) => ModelKind::Spin32,
            Model::HalfOne(_) => ModelKind::HalfOne,
            Model::CentralSpin(_) => ModelKind::CentralSpin,
        }
    }

    fn slot(&mut self, name: &str) -> Option<&mut f64> {
        match self {
            Model::Lz2(p) => match name {
                "g" => Some(&mut p.g),
                "beta" => Some(&mut p.beta),
                _ => None,
            },
            Model::Spin32(p) => match name {
                "h1" => Some(&mut p.h1),
                "h2" => Some(&mut p.h2),
                "g1" => Some(&mut p.g1),
                "g2" => Some(&mut p.g2),
                "phi" => Some(&mut p.phi),
                "theta" => Some(&mut p.theta),
                _ => None,
            },
            Model::HalfOne(p) => match name {
                "eps1" => Some(&mut p.eps1),
                "eps2" => Some(&mut p.eps2),
                "h1" => Some(&mut p.h1),
                "h2" => Some(&mut p.h2),
                "h3" => Some(&mut p.h3),
                _ => indexed(name, "g", 8).map(|k| &mut p.g[k]),
            },
            Model::CentralSpin(p) => match name {
                "h1" => Some(&mut p.h1),
                "eps1" => Some(&mut p.eps1),
                "eps2" => Some(&mut p.eps2),
                "eps3" => Some(&mut p.eps3),
                _ => indexed(name, "g", 6).map(|k| &mut p.g[k]),
            },
        }
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::InvalidParameter { name: name.into(), reason: format!("not a finite number: {value}") });
        }
        let model = self.kind().name();
        let slot =
            self.slot(name).ok_or_else(|| Error::UnknownParameter { model: model.into(), name: name.into() })?;
        *slot = value;
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        let mut copy = *self;
        let model = self.kind().name();
        copy.slot(name).map(|v| *v).ok_or_else(|| Error::UnknownParameter { model: model.into(), name: name.into() })
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        self.kind().parameter_names().iter().map(|&n| (n.to_string(), self.get(n).expect("listed name"))).collect()
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Model::Lz2(p) => check_beta(p.beta),
            _ => Ok(()),
        }
    }

    pub fn operator_form(&self) -> Result<Hamiltonian> {
        match self {
            Model::Lz2(p) => lz_two_state(*p),
            Model::Spin32(p) => Ok(spin32_operator_form(p)),
            Model::HalfOne(p) => Ok(half_one_operator_form(p)),
            Model::CentralSpin(p) => Ok(central_spin_operator_form(p)),
        }
    }

    pub fn matrix_form(&self) -> Result<MatrixForm> {
        match self {
            Model::Lz2(p) => lz_matrix_form(*p),
            Model::Spin32(p) => Ok(spin32_matrix_form(p)),
            Model::HalfOne(p) => Ok(half_one_matrix_form(p)),
            Model::CentralSpin(p) => Ok(central_spin_matrix_form(p)),
        }
    }

    /// Diabatic basis for the operator form, labelled as in the matrix form.
    pub fn diabatic_basis(&self) -> DiabaticBasis {
        match self {
            Model::Lz2(_) => DiabaticBasis::new(vec!["up".into(), "down".into()], vec![0, 1]).expect("valid"),
            Model::Spin32(_) => spin32_basis(),
            Model::HalfOne(_) => DiabaticBasis::numbered(6),
            Model::CentralSpin(_) => DiabaticBasis::numbered(8),
        }
    }
}

/// Named parameter sets used by tests and examples.
pub mod presets {
    use super::*;

    /// Half-one levels and Kramers-partner curves over (-6, 6).
    pub fn half_one_reference() -> HalfOneParams {
        HalfOneParams { eps1: 1.0, eps2: 0.2, g: [1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0], h1: 1.0, h2: 0.2, h3: 0.0 }
    }

    /// Central-spin level diagram.
    pub fn central_spin_levels() -> CentralSpinParams {
        CentralSpinParams { h1: 1.0, eps1: 1.0, eps2: 0.5, eps3: 0.1, g: [0.1, 0.0, 0.1, 0.1, 0.0, 0.0] }
    }

    /// Central-spin Kramers-partner curves over (-6, 6).
    pub fn central_spin_reference() -> CentralSpinParams {
        CentralSpinParams { h1: 0.5, eps1: 1.0, eps2: 0.5, eps3: 0.1, g: [1.0, 0.0, 1.0, 0.5, 0.0, 0.0] }
    }

    /// Central-spin coupling sweep base point; `g1 = g3 = g4 = 4 g` is swept.
    pub fn central_spin_coupling_sweep(g: f64) -> CentralSpinParams {
        CentralSpinParams { h1: 2.0, eps1: 2.0, eps2: 1.0, eps3: 0.0, g: [4.0 * g, 0.0, 4.0 * g, 4.0 * g, 0.0, 0.0] }
    }

    /// Central-spin splitting sweep; `ε1 = 4ε, ε2 = 2ε` is swept.
    pub fn central_spin_splitting_sweep(eps: f64) -> CentralSpinParams {
        CentralSpinParams { h1: 2.0, eps1: 4.0 * eps, eps2: 2.0 * eps, eps3: 0.0, g: [1.2, 0.0, 1.2, 1.2, 0.0, 0.0] }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{check_dynamic_symmetry, check_hermitian, check_parity_symmetry, TimeDependent};
    use crate::linalg::{hermitian_defect, max_abs_diff};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn lz_probability_values() {
        assert_eq!(lz_probability(0.0, 1.0).unwrap(), 0.0);
        let g = (2.0_f64.ln() / PI).sqrt();
        assert!(close(lz_probability(g, 1.0).unwrap(), 0.5));
        assert!((lz_probability(1.0, 1.0).unwrap() - 0.9567861).abs() < 1e-7);
        assert!(lz_probability(1.0, 0.0).is_err());
        assert!(lz_two_state(Lz2Params { g: 1.0, beta: -1.0 }).is_err());
    }

    #[test]
    fn spin32_derived_parameters() {
        let d = Spin32Derived::new(&Spin32Params { h1: 1.0, ..Default::default() });
        assert!(close(d.beta1, 1.5) && close(d.beta2, 0.5));

        let d = Spin32Derived::new(&Spin32Params { g1: 1.0, g2: 1.0, ..Default::default() });
        assert!(close(d.delta1, 3.0) && close(d.delta2, 2.0) && close(d.gamma2, 0.0));
        assert!(close(d.gamma1, 3.0_f64.sqrt() / 2.0));

        let d = Spin32Derived::new(&Spin32Params { g1: 1.0, phi: PI / 4.0, ..Default::default() });
        assert!(close(d.delta1, 1.5) && close(d.delta2, 1.0));
        assert!(close(d.gamma2, 3.0_f64.sqrt() / 2.0) && close(d.gamma1, 3.0_f64.sqrt() / 4.0));
    }

    #[test]
    fn half_one_derived_parameters() {
        let d = HalfOneDerived::new(&HalfOneParams { eps1: 1.0, eps2: 0.2, ..Default::default() });
        assert!(close(d.delta1, 0.7) && close(d.delta2, -0.3));
        let d = HalfOneDerived::new(&HalfOneParams { h1: 1.0, h2: 0.2, ..Default::default() });
        assert!(close(d.beta1, 0.7) && close(d.beta2, 0.5) && close(d.beta3, 0.3));

        // Solvable six-state reduction.
        let mut p = presets::half_one_reference();
        p.h2 = 0.0;
        let d = HalfOneDerived::new(&p);
        assert_eq!(d.gamma4, c(0.0, 0.0));
        assert!(close(d.beta1, 0.5) && close(d.beta2, 0.5) && close(d.beta3, 0.5));
    }

    #[test]
    fn central_spin_derived_parameters() {
        let d = CentralSpinDerived::new(&CentralSpinParams { h1: 2.0, ..Default::default() });
        assert!(close(d.beta, 1.0));
        let d = CentralSpinDerived::new(&CentralSpinParams { eps1: 1.0, eps2: 0.5, eps3: 0.1, ..Default::default() });
        let expected = [0.4, 0.1, -0.15, -0.35];
        for (x, e) in d.delta.iter().zip(expected) {
            assert!(close(*x, e), "{:?}", d.delta);
        }
        let d = CentralSpinDerived::new(&presets::central_spin_levels());
        assert!(d.gamma.iter().all(|&x| close(x, 0.025)), "{:?}", d.gamma);
    }

    #[test]
    fn diagonal_spin32_has_no_couplings() {
        let p = Spin32Params { h1: 0.8, h2: -0.3, ..Default::default() };
        let h = spin32_operator_form(&p).evaluate(1.7);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(h[(i, j)].norm(), 0.0);
                }
            }
        }
    }

    #[test]
    fn matrix_forms_match_operator_forms_at_sample_points() {
        let spin32 = Spin32Params { h1: 0.7, h2: -0.4, g1: 1.3, g2: -0.6, phi: 0.9, theta: SPIN32_MATRIX_THETA };
        let mut half_one = presets::half_one_reference();
        half_one.g = [0.3, -0.2, 0.5, 0.7, -0.9, 0.4, 0.6, -0.8];
        half_one.h3 = 0.35;
        let models =
            [Model::Spin32(spin32), Model::HalfOne(half_one), Model::CentralSpin(presets::central_spin_reference())];
        for model in models {
            let op = model.operator_form().unwrap();
            let mf = model.matrix_form().unwrap();
            for t in [-2.0, 0.0, 0.6, 3.1] {
                let reordered = DiabaticBasis::new(mf.basis.labels().to_vec(), mf.operator_index.clone())
                    .unwrap()
                    .reorder(&op.evaluate(t));
                assert!(max_abs_diff(&reordered, &mf.hamiltonian.at(t)) < 1e-12, "{:?} t={t}", model.kind());
            }
        }
    }

    #[test]
    fn kramers_partners_of_each_model() {
        let expect = |model: Model, pairs: &[(usize, usize)]| {
            let op = model.operator_form().unwrap();
            let theta = time_reversal(op.system());
            let found = kramers_pairs(&theta, &model.diabatic_basis()).unwrap();
            for &(a, b) in pairs {
                assert_eq!(found[a].partner, b);
                assert_eq!(found[b].partner, a);
                let (pa, pb) = (c(found[a].phase.0, found[a].phase.1), c(found[b].phase.0, found[b].phase.1));
                // Θ² = -1 on the pair: conj(p_a) * p_b = -1.
                assert!((pa.conj() * pb + c(1.0, 0.0)).norm() < 1e-12);
            }
        };
        expect(Model::Spin32(Spin32Params::default()), &[(0, 1), (2, 3)]);
        expect(Model::HalfOne(HalfOneParams::default()), &[(0, 5), (1, 4), (2, 3)]);
        expect(Model::CentralSpin(CentralSpinParams::default()), &[(0, 7), (1, 6), (2, 5), (3, 4)]);
    }

    #[test]
    fn kramers_pairs_rejects_non_product_basis() {
        let theta = TimeReversalOp::from_unitary(crate::linalg::unitary_exp(
            &ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]),
            PI / 4.0,
        ))
        .unwrap();
        assert!(matches!(
            kramers_pairs(&theta, &DiabaticBasis::numbered(2)),
            Err(Error::NotBasisAligned { .. })
        ));
    }

    #[test]
    fn every_model_is_symmetric_and_hermitian() {
        let grid = [0.0, 0.5, -0.5, 1.0, -1.0, 3.0, -3.0];
        let models = [
            Model::Spin32(Spin32Params { h1: 1.0, h2: 0.3, g1: 1.0, g2: 0.5, phi: 0.7, theta: 0.3 }),
            Model::HalfOne(presets::half_one_reference()),
            Model::CentralSpin(presets::central_spin_reference()),
        ];
        for model in models {
            let h = model.operator_form().unwrap();
            assert!(check_parity_symmetry(&h).pass);
            let theta = time_reversal(h.system());
            assert!(check_dynamic_symmetry(&h, &theta, &grid, 1e-10).unwrap().pass);
            assert!(check_hermitian(&h, &grid).pass);

            let mf = model.matrix_form().unwrap();
            assert!(check_dynamic_symmetry(&mf.hamiltonian, &mf.time_reversal(), &grid, 1e-10).unwrap().pass);
        }
    }

    #[test]
    fn complex_couplings_stay_hermitian() {
        let p = HalfOneParams { g: [0.0, 0.0, 0.0, 0.0, 0.8, -1.1, 0.0, 0.0], h1: 1.0, ..Default::default() };
        let mf = half_one_matrix_form(&p);
        assert!(mf.hamiltonian.at(0.4)[(0, 1)].im != 0.0);
        assert!(hermitian_defect(&mf.hamiltonian.at(0.4)) == 0.0);
    }

    #[test]
    fn named_parameters() {
        let model = Model::with_params(ModelKind::HalfOne, [("eps1", 1.0), ("g8", 2.0)]).unwrap();
        assert_eq!(model.get("g8").unwrap(), 2.0);
        assert_eq!(model.params().len(), 13);
        assert!(matches!(
            Model::with_params(ModelKind::HalfOne, [("g9", 1.0)]),
            Err(Error::UnknownParameter { .. })
        ));
        assert!(Model::with_params(ModelKind::Lz2, [("beta", 0.0)]).is_err());
        assert_eq!("central-spin".parse::<ModelKind>().unwrap(), ModelKind::CentralSpin);
        assert!("spin52".parse::<ModelKind>().is_err());
    }

    #[test]
    fn diabatic_basis_validation() {
        assert!(DiabaticBasis::new(vec!["a".into(), "b".into()], vec![0, 0]).is_err());
        assert!(DiabaticBasis::new(vec!["a".into(), "a".into()], vec![0, 1]).is_err());
        assert!(DiabaticBasis::new(vec!["a".into()], vec![0, 1]).is_err());
        let b = spin32_basis();
        assert_eq!(b.position("-1/2"), Some(3));
    }
}
