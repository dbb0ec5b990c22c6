//! Scattering reports, Kramers-partner no-scattering verification,
//! probability-vs-time curves, adiabatic level diagrams and parameter sweeps.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{check_dynamic_symmetry, symmetric_sample_grid, GridCheck, Hamiltonian, TimeDependent};
use crate::linalg::{c, eigvalsh, ComplexMatrix, StateVector};
use crate::models::{kramers_pairs, DiabaticBasis, KramersPair, MatrixForm, Model};
use crate::propagator::{converge_steps, default_steps, propagate, Convergence, Propagation, TimeGrid};
use crate::spin::{time_reversal, TimeReversalOp};

/// Default tolerance on partner probabilities.
pub const DEFAULT_TOL: f64 = 1e-6;
/// Tolerance used for the `Θ H(t) Θ⁻¹ = H(-t)` pre-check.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Probability change below which step doubling stops.
pub const CONVERGENCE_TOL: f64 = 1e-4;

/// A Hamiltonian together with the data needed to interpret its dynamics:
/// the time-reversal operator in the working basis, the diabatic labelling,
/// and whether the total spin is half-integer.
pub struct ScatteringProblem {
    hamiltonian: Box<dyn TimeDependent>,
    theta: TimeReversalOp,
    basis: DiabaticBasis,
    half_integer: bool,
}

impl ScatteringProblem {
    pub fn new(
        hamiltonian: Box<dyn TimeDependent>,
        theta: TimeReversalOp,
        basis: DiabaticBasis,
        half_integer: bool,
    ) -> Result<Self> {
        let n = hamiltonian.dim();
        for found in [theta.dim(), basis.len()] {
            if found != n {
                return Err(Error::DimensionMismatch { expected: n, found });
            }
        }
        Ok(ScatteringProblem { hamiltonian, theta, basis, half_integer })
    }

    /// Operator-form Hamiltonian in the computational basis.
    pub fn from_hamiltonian(h: Hamiltonian, basis: DiabaticBasis) -> Result<Self> {
        let theta = time_reversal(h.system());
        let half = h.system().is_half_integer();
        Self::new(Box::new(h), theta, basis, half)
    }

    /// Built-in model in operator form, labelled like its matrix form.
    pub fn from_model(model: &Model) -> Result<Self> {
        Self::from_hamiltonian(model.operator_form()?, model.diabatic_basis())
    }

    pub fn from_matrix_form(form: MatrixForm) -> Result<Self> {
        let theta = form.time_reversal();
        let basis = form.diabatic_basis();
        let half = form.system.is_half_integer();
        Self::new(Box::new(form.hamiltonian), theta, basis, half)
    }

    pub fn hamiltonian(&self) -> &dyn TimeDependent {
        self.hamiltonian.as_ref()
    }

    pub fn theta(&self) -> &TimeReversalOp {
        &self.theta
    }

    pub fn basis(&self) -> &DiabaticBasis {
        &self.basis
    }

    pub fn is_half_integer(&self) -> bool {
        self.half_integer
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn dynamic_symmetry(&self, half_interval: f64) -> Result<GridCheck> {
        let grid = symmetric_sample_grid(half_interval, 8);
        check_dynamic_symmetry(self.hamiltonian.as_ref(), &self.theta, &grid, SYMMETRY_TOL)
    }

    pub fn kramers_pairs(&self) -> Result<Vec<KramersPair>> {
        kramers_pairs(&self.theta, &self.basis)
    }

    /// Resolves a label to its position in the diabatic basis.
    pub fn position(&self, label: &str) -> Result<usize> {
        self.basis.position(label).ok_or_else(|| {
            Error::InvalidLabels(format!("unknown state `{label}`; known: {}", self.basis.labels().join(", ")))
        })
    }
}

/// Step-count policy for a propagation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepPolicy {
    /// Steps per half-interval; `None` picks `dt · max‖H‖ ≤ 0.05`.
    pub steps: Option<usize>,
    /// Double the step count until probabilities move by less than 1e-4.
    pub converge: bool,
}

impl StepPolicy {
    pub fn fixed(steps: usize) -> Self {
        StepPolicy { steps: Some(steps), converge: false }
    }

    pub fn converged(initial_steps: usize) -> Self {
        StepPolicy { steps: Some(initial_steps), converge: true }
    }
}

pub fn run_propagation(
    h: &dyn TimeDependent,
    half_interval: f64,
    policy: StepPolicy,
) -> Result<(Propagation, Option<Convergence>)> {
    let steps = policy.steps.unwrap_or_else(|| default_steps(h, half_interval));
    if policy.converge {
        let (p, info) = converge_steps(h, half_interval, steps, CONVERGENCE_TOL, 8)?;
        Ok((p, Some(info)))
    } else {
        Ok((propagate(h, &TimeGrid::symmetric(half_interval, steps)?, None)?, None))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridMeta {
    pub start: f64,
    pub end: f64,
    pub steps: usize,
    pub dt: f64,
}

impl GridMeta {
    pub fn of(grid: &TimeGrid) -> Self {
        GridMeta { start: grid.start(), end: grid.end(), steps: grid.len(), dt: grid.dt() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairVerdict {
    pub from: String,
    pub to: String,
    /// `|⟨Θn|U|n⟩|²`.
    pub probability: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremStatus {
    /// Half-integer total spin and `Θ H(t) Θ⁻¹ = H(-t)` holds.
    Applicable,
    /// Total spin is an integer, so `Θ² = +1` and no zero is implied.
    IntegerSpin,
    /// The Hamiltonian does not have the dynamic symmetry.
    SymmetryViolated,
}

impl TheoremStatus {
    pub fn describe(self) -> &'static str {
        match self {
            TheoremStatus::Applicable => "applicable",
            TheoremStatus::IntegerSpin => "theorem not applicable (integer total spin)",
            TheoremStatus::SymmetryViolated => "dynamic symmetry violated",
        }
    }
}

/// Amplitudes `S_{n'n} = ⟨n'|U|n⟩` between diabatic states.
#[derive(Debug, Clone, Serialize)]
pub struct ScatteringReport {
    pub labels: Vec<String>,
    /// `amplitudes[n'][n]` as `(re, im)`.
    pub amplitudes: Vec<Vec<(f64, f64)>>,
    /// `probabilities[n'][n] = |S_{n'n}|² = P_{n→n'}`.
    pub probabilities: Vec<Vec<f64>>,
    pub kramers_pairs: Vec<KramersPair>,
    pub verdicts: Vec<PairVerdict>,
    pub tolerance: f64,
    pub unitarity_defect: f64,
    pub grid: GridMeta,
}

impl ScatteringReport {
    /// `P_{from→to}` by basis position.
    pub fn probability(&self, from: usize, to: usize) -> f64 {
        self.probabilities[to][from]
    }

    pub fn max_partner_probability(&self) -> f64 {
        self.verdicts.iter().map(|v| v.probability).fold(0.0, f64::max)
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    /// Largest deviation of any row or column sum of `P` from one.
    pub fn stochasticity_defect(&self) -> f64 {
        let n = self.labels.len();
        let mut worst = 0.0_f64;
        for k in 0..n {
            let row: f64 = self.probabilities[k].iter().sum();
            let col: f64 = (0..n).map(|j| self.probabilities[j][k]).sum();
            worst = worst.max((row - 1.0).abs()).max((col - 1.0).abs());
        }
        worst
    }
}

/// Scattering matrix of a finished propagation in the problem's diabatic
/// basis, with partner verdicts at `tol`.
pub fn scattering_matrix(problem: &ScatteringProblem, p: &Propagation, tol: f64) -> Result<ScatteringReport> {
    let basis = problem.basis();
    let s = basis.reorder(&p.u_final);
    let n = basis.len();
    let amplitudes = (0..n).map(|i| (0..n).map(|j| (s[(i, j)].re, s[(i, j)].im)).collect()).collect();
    let probabilities = (0..n).map(|i| (0..n).map(|j| s[(i, j)].norm_sqr()).collect()).collect();
    let pairs = problem.kramers_pairs()?;
    let verdicts = pairs
        .iter()
        .map(|pair| {
            let probability = s[(pair.partner, pair.state)].norm_sqr();
            PairVerdict {
                from: basis.labels()[pair.state].clone(),
                to: basis.labels()[pair.partner].clone(),
                probability,
                pass: probability < tol,
            }
        })
        .collect();
    Ok(ScatteringReport {
        labels: basis.labels().to_vec(),
        amplitudes,
        probabilities,
        kramers_pairs: pairs,
        verdicts,
        tolerance: tol,
        unitarity_defect: p.unitarity_defect,
        grid: GridMeta::of(&p.grid),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub tol: f64,
    pub random_states: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { tol: DEFAULT_TOL, random_states: 10, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RandomStateVerdict {
    /// `|⟨ΘΨ|UΨ⟩|²`.
    pub probability: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremReport {
    pub status: TheoremStatus,
    pub symmetry: GridCheck,
    pub scattering: Option<ScatteringReport>,
    pub random_states: Vec<RandomStateVerdict>,
    pub convergence: Option<Convergence>,
    pub tolerance: f64,
}

impl TheoremReport {
    /// True when the theorem applies and every partner probability is below
    /// the tolerance. Inapplicable cases are not failures.
    pub fn pass(&self) -> bool {
        match self.status {
            TheoremStatus::Applicable => {
                self.scattering.as_ref().is_some_and(|s| s.all_pass()) && self.random_states.iter().all(|r| r.pass)
            }
            TheoremStatus::IntegerSpin => true,
            TheoremStatus::SymmetryViolated => false,
        }
    }

    pub fn max_partner_probability(&self) -> f64 {
        let basis = self.scattering.as_ref().map_or(0.0, |s| s.max_partner_probability());
        self.random_states.iter().map(|r| r.probability).fold(basis, f64::max)
    }
}

/// Normalized state with independent uniform real and imaginary parts.
pub fn random_state(dim: usize, rng: &mut ChaCha8Rng) -> StateVector {
    let v = StateVector::from_fn(dim, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let norm = v.norm();
    v.unscale(norm)
}

/// Checks that every diabatic state has zero amplitude to reach its Kramers
/// partner, and that random superpositions `Ψ` never reach `ΘΨ`.
///
/// A Hamiltonian without the dynamic symmetry is reported as such and is not
/// propagated. Integer total spin is propagated and reported as not
/// applicable.
pub fn verify_no_scattering(
    problem: &ScatteringProblem,
    half_interval: f64,
    policy: StepPolicy,
    opts: &VerifyOptions,
) -> Result<TheoremReport> {
    let symmetry = problem.dynamic_symmetry(half_interval)?;
    if !symmetry.pass {
        return Ok(TheoremReport {
            status: TheoremStatus::SymmetryViolated,
            symmetry,
            scattering: None,
            random_states: Vec::new(),
            convergence: None,
            tolerance: opts.tol,
        });
    }
    let status = if problem.is_half_integer() { TheoremStatus::Applicable } else { TheoremStatus::IntegerSpin };
    let (p, convergence) = run_propagation(problem.hamiltonian(), half_interval, policy)?;
    let mut scattering = scattering_matrix(problem, &p, opts.tol)?;
    if status != TheoremStatus::Applicable {
        for v in &mut scattering.verdicts {
            v.pass = true;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let theta = problem.theta();
    let random_states = (0..opts.random_states)
        .map(|_| {
            let psi = random_state(problem.dim(), &mut rng);
            let partner = theta.apply(&psi)?;
            let evolved = &p.u_final * &psi;
            let probability = partner.dotc(&evolved).norm_sqr();
            Ok(RandomStateVerdict { probability, pass: status != TheoremStatus::Applicable || probability < opts.tol })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TheoremReport { status, symmetry, scattering: Some(scattering), random_states, convergence, tolerance: opts.tol })
}

/// Probability columns sampled at propagation checkpoints.
#[derive(Debug, Clone, Serialize)]
pub struct ProbabilityCurves {
    pub times: Vec<f64>,
    /// `(from, to)` labels for each column.
    pub pairs: Vec<(String, String)>,
    /// `columns[k][i]` is `P_{from→to}` for pair `k` at `times[i]`.
    pub columns: Vec<Vec<f64>>,
}

impl ProbabilityCurves {
    pub fn final_values(&self) -> Vec<f64> {
        self.columns.iter().map(|c| *c.last().expect("at least one checkpoint")).collect()
    }

    pub fn max_values(&self) -> Vec<f64> {
        self.columns.iter().map(|c| c.iter().copied().fold(0.0, f64::max)).collect()
    }
}

/// `|⟨m|U(t, -T)|n⟩|²` for each requested `(n, m)` pair of basis positions,
/// sampled every `stride` steps.
pub fn probability_vs_time(
    problem: &ScatteringProblem,
    grid: &TimeGrid,
    stride: usize,
    pairs: &[(usize, usize)],
) -> Result<ProbabilityCurves> {
    let n = problem.dim();
    if let Some(&(a, b)) = pairs.iter().find(|&&(a, b)| a >= n || b >= n) {
        return Err(Error::InvalidLabels(format!("pair ({a}, {b}) outside a basis of {n} states")));
    }
    let p = propagate(problem.hamiltonian(), grid, Some(stride.max(1)))?;
    let basis = problem.basis();
    let idx = basis.indices();
    let times = p.checkpoints.iter().map(|(t, _)| *t).collect();
    let columns = pairs
        .iter()
        .map(|&(from, to)| p.checkpoints.iter().map(|(_, u)| u[(idx[to], idx[from])].norm_sqr()).collect())
        .collect();
    let labels = pairs.iter().map(|&(a, b)| (basis.labels()[a].clone(), basis.labels()[b].clone())).collect();
    Ok(ProbabilityCurves { times, pairs: labels, columns })
}

/// Kramers-partner pairs `(n, partner)` with `n < partner`.
pub fn partner_pairs(problem: &ScatteringProblem) -> Result<Vec<(usize, usize)>> {
    Ok(problem.kramers_pairs()?.into_iter().filter(|p| p.state < p.partner).map(|p| (p.state, p.partner)).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelDiagram {
    pub times: Vec<f64>,
    /// Ascending eigenvalues at each time.
    pub sorted: Vec<Vec<f64>>,
    /// `branches[k][i]`: branch `k` at `times[i]`, continued across samples.
    pub branches: Vec<Vec<f64>>,
}

/// Instantaneous eigenvalues over `[start, end]`, plus branches continued by
/// matching each sample's eigenvalues to linearly extrapolated predictions.
pub fn level_diagram(h: &dyn TimeDependent, start: f64, end: f64, samples: usize) -> Result<LevelDiagram> {
    if samples < 2 {
        return Err(Error::InvalidGrid("a level diagram needs at least two samples".into()));
    }
    if !(end > start) {
        return Err(Error::InvalidGrid(format!("empty interval [{start}, {end}]")));
    }
    let times: Vec<f64> =
        (0..samples).map(|k| start + (end - start) * k as f64 / (samples - 1) as f64).collect();
    let sorted: Vec<Vec<f64>> = times.iter().map(|&t| eigvalsh(&h.at(t))).collect();
    let n = h.dim();
    let mut branches: Vec<Vec<f64>> = (0..n).map(|k| vec![sorted[0][k]]).collect();
    for (i, values) in sorted.iter().enumerate().skip(1) {
        let predictions: Vec<f64> = branches
            .iter()
            .map(|b| if i >= 2 { 2.0 * b[i - 1] - b[i - 2] } else { b[i - 1] })
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| predictions[a].total_cmp(&predictions[b]));
        for (rank, &branch) in order.iter().enumerate() {
            branches[branch].push(values[rank]);
        }
    }
    Ok(LevelDiagram { times, sorted, branches })
}

/// Largest gap within consecutive eigenvalue pairs `(E0,E1), (E2,E3), …` at
/// time `t`. Zero for a fully Kramers-degenerate spectrum.
pub fn kramers_gap(h: &dyn TimeDependent, t: f64) -> f64 {
    let values = eigvalsh(&h.at(t));
    values.chunks(2).filter(|p| p.len() == 2).map(|p| p[1] - p[0]).fold(0.0, f64::max)
}

/// One swept direction: every target parameter is set to `scale · value`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub targets: Vec<(String, f64)>,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn linspace(targets: Vec<(String, f64)>, start: f64, stop: f64, count: usize) -> Self {
        let values = match count {
            0 => Vec::new(),
            1 => vec![start],
            _ => (0..count).map(|k| start + (stop - start) * k as f64 / (count - 1) as f64).collect(),
        };
        SweepSpec { targets, values }
    }

    /// Parses `key[*scale][+key[*scale]…]=start:stop:count`, e.g.
    /// `g1*4+g3*4+g4*4=0:0.5:20`.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |reason: &str| Error::InvalidParameter { name: "sweep".into(), reason: format!("{reason} in `{text}`") };
        let (lhs, rhs) = text.split_once('=').ok_or_else(|| bad("missing `=`"))?;
        let mut targets = Vec::new();
        for part in lhs.split('+') {
            let part = part.trim();
            let (name, scale) = match part.split_once('*') {
                Some((n, s)) => (n.trim(), s.trim().parse::<f64>().map_err(|_| bad("bad scale"))?),
                None => (part, 1.0),
            };
            if name.is_empty() {
                return Err(bad("empty parameter name"));
            }
            targets.push((name.to_string(), scale));
        }
        let fields: Vec<&str> = rhs.split(':').map(str::trim).collect();
        let [start, stop, count] = fields[..] else {
            return Err(bad("expected start:stop:count"));
        };
        let start: f64 = start.parse().map_err(|_| bad("bad start"))?;
        let stop: f64 = stop.parse().map_err(|_| bad("bad stop"))?;
        let count: usize = count.parse().map_err(|_| bad("bad count"))?;
        if count == 0 {
            return Err(bad("count must be positive"));
        }
        Ok(Self::linspace(targets, start, stop, count))
    }

    pub fn name(&self) -> String {
        self.targets
            .iter()
            .map(|(n, s)| if *s == 1.0 { n.clone() } else { format!("{n}*{s}") })
            .collect::<Vec<_>>()
            .join("+")
    }

    fn apply(&self, base: &Model, value: f64) -> Result<Model> {
        let mut model = *base;
        for (name, scale) in &self.targets {
            model.set(name, scale * value)?;
        }
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    /// Requested `P_{from→to}` in the order of [`SweepResult::pairs`].
    pub probabilities: Vec<f64>,
    pub max_partner_probability: f64,
    pub stochasticity_defect: f64,
    pub unitarity_defect: f64,
    pub convergence: Option<Convergence>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub parameter: String,
    pub pairs: Vec<(String, String)>,
    pub points: Vec<SweepPoint>,
    pub tolerance: f64,
}

impl SweepResult {
    pub fn all_pass(&self) -> bool {
        self.points.iter().all(|p| p.pass)
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub half_interval: f64,
    pub policy: StepPolicy,
    pub tol: f64,
    /// Worker threads; `None` uses the rayon default.
    pub workers: Option<usize>,
}

/// Runs `verify`-style propagations at every sweep value in parallel and
/// collects the requested transition probabilities (labels `(from, to)`).
/// Results are in sweep order regardless of scheduling.
pub fn sweep(base: &Model, spec: &SweepSpec, pairs: &[(String, String)], config: &SweepConfig) -> Result<SweepResult> {
    // Validate names and labels once before spawning work.
    let first = spec.apply(base, spec.values.first().copied().unwrap_or(0.0))?;
    let probe = ScatteringProblem::from_model(&first)?;
    let positions = pairs
        .iter()
        .map(|(a, b)| Ok((probe.position(a)?, probe.position(b)?)))
        .collect::<Result<Vec<_>>>()?;

    let run_point = |value: f64| -> Result<SweepPoint> {
        let model = spec.apply(base, value)?;
        let problem = ScatteringProblem::from_model(&model)?;
        let (p, convergence) = run_propagation(problem.hamiltonian(), config.half_interval, config.policy)?;
        let report = scattering_matrix(&problem, &p, config.tol)?;
        let applies = problem.is_half_integer() && problem.dynamic_symmetry(config.half_interval)?.pass;
        Ok(SweepPoint {
            value,
            probabilities: positions.iter().map(|&(a, b)| report.probability(a, b)).collect(),
            max_partner_probability: report.max_partner_probability(),
            stochasticity_defect: report.stochasticity_defect(),
            unitarity_defect: report.unitarity_defect,
            convergence,
            pass: !applies || report.all_pass(),
        })
    };

    let run_all = || spec.values.par_iter().map(|&v| run_point(v)).collect::<Result<Vec<_>>>();
    let points = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter { name: "workers".into(), reason: e.to_string() })?
            .install(run_all)?,
        None => run_all()?,
    };
    Ok(SweepResult { parameter: spec.name(), pairs: pairs.to_vec(), points, tolerance: config.tol })
}

/// Maximum entry of `|ΘUΘ⁻¹ - U†|`, re-exported for report assembly.
pub fn theta_identity_defect(problem: &ScatteringProblem, p: &Propagation) -> Result<f64> {
    crate::propagator::theta_conjugation_identity(p, problem.theta())
}

/// Dense probability matrix `|U_{mn}|²` reordered to the diabatic basis.
pub fn probability_matrix(problem: &ScatteringProblem, u: &ComplexMatrix) -> ComplexMatrix {
    problem.basis().reorder(u).map(|z| c(z.norm_sqr(), 0.0))
}
