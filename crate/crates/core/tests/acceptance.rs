//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use kramers_lz::analysis::{
    kramers_gap, partner_pairs, probability_vs_time, run_propagation, scattering_matrix, sweep, theta_identity_defect,
    verify_no_scattering, ScatteringProblem, StepPolicy, SweepConfig, SweepSpec, TheoremStatus, VerifyOptions,
};
use kramers_lz::hamiltonian::{check_hermitian, check_parity_symmetry, symmetric_sample_grid};
use kramers_lz::hamspec::{parse, serialize, HamSpecDocument};
use kramers_lz::linalg::{identity, max_abs_diff};
use kramers_lz::models::{
    lz_probability, presets, DiabaticBasis, HalfOneParams, Model, ModelKind, Spin32Params, SPIN32_MATRIX_THETA,
};
use kramers_lz::propagator::{propagate, TimeGrid};
use kramers_lz::spin::{site_operator, time_reversal, Axis, Spin, SpinSystem};
use kramers_lz::{Hamiltonian, HamiltonianTerm, SpinFactor, TimeDependent, TimePolynomial};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed <= limit
}

fn lz_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    let mut parts = Vec::new();
    for g in [1.0, 0.5] {
        let model = Model::with_params(ModelKind::Lz2, [("g", g), ("beta", 1.0)]).unwrap();
        let problem = ScatteringProblem::from_model(&model).unwrap();
        let (p, _) = run_propagation(problem.hamiltonian(), 200.0, StepPolicy::fixed(200_000)).unwrap();
        let report = scattering_matrix(&problem, &p, 1e-6).unwrap();
        let exact = lz_probability(g, 1.0).unwrap();
        let found = report.probability(0, 1);
        worst = worst.max((found - exact).abs());
        parts.push(format!("g={g}: P={found:.7} vs {exact:.7} ({:+.2e})", found - exact));
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-3 && within(elapsed, Duration::from_secs(10)),
        format!("{}, {:.1}s", parts.join(", "), elapsed.as_secs_f64()),
    )
}

fn spin32_zeros() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let mut worst = 0.0_f64;
    let mut all = true;
    for _ in 0..20 {
        let mut draw = || rng.random_range(-2.0..2.0);
        let p = Spin32Params { h1: draw(), h2: draw(), g1: draw(), g2: draw(), phi: draw(), theta: draw() };
        let problem = ScatteringProblem::from_model(&Model::Spin32(p)).unwrap();
        let report = verify_no_scattering(&problem, 50.0, StepPolicy::converged(5_000), &VerifyOptions::default())
            .unwrap();
        let scattering = report.scattering.as_ref().unwrap();
        let p1 = scattering.probability(0, 1);
        let p2 = scattering.probability(2, 3);
        worst = worst.max(p1).max(p2);
        all &= report.status == TheoremStatus::Applicable && p1 < 1e-6 && p2 < 1e-6;
    }
    let elapsed = start.elapsed();
    outcome(
        all && within(elapsed, Duration::from_secs(60)),
        format!("20 draws, max partner P = {worst:.2e}, {:.1}s", elapsed.as_secs_f64()),
    )
}

fn half_one_curves() -> Outcome {
    let start = Instant::now();
    let problem = ScatteringProblem::from_model(&Model::HalfOne(presets::half_one_reference())).unwrap();
    let pairs = partner_pairs(&problem).unwrap();
    let grid = TimeGrid::symmetric(6.0, 60_000).unwrap();
    let curves = probability_vs_time(&problem, &grid, 100, &pairs).unwrap();
    let finals = curves.final_values();
    let peaks = curves.max_values();
    let final_max = finals.iter().copied().fold(0.0, f64::max);
    let peak_min = peaks.iter().copied().fold(f64::INFINITY, f64::min);
    let elapsed = start.elapsed();
    outcome(
        pairs == [(0, 5), (1, 4), (2, 3)]
            && final_max < 1e-6
            && peak_min > 1e-3
            && within(elapsed, Duration::from_secs(10)),
        format!(
            "final max {final_max:.2e}, smallest intermediate peak {peak_min:.2e}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn central_spin_sweeps() -> Outcome {
    let start = Instant::now();
    let mut detail = Vec::new();
    let mut pass = true;

    let problem = ScatteringProblem::from_model(&Model::CentralSpin(presets::central_spin_reference())).unwrap();
    let pairs = partner_pairs(&problem).unwrap();
    let curves = probability_vs_time(&problem, &TimeGrid::symmetric(6.0, 60_000).unwrap(), 100, &pairs).unwrap();
    let final_max = curves.final_values().into_iter().fold(0.0, f64::max);
    pass &= pairs.len() == 4 && final_max < 1e-6;
    detail.push(format!("reference curves final max {final_max:.2e}"));

    let config = SweepConfig { half_interval: 200.0, policy: StepPolicy::fixed(20_000), tol: 1e-6, workers: None };
    let labels = |a: &str, b: &str| vec![(a.to_string(), b.to_string())];

    let base_c = Model::CentralSpin(presets::central_spin_coupling_sweep(0.0));
    let spec_c = SweepSpec::parse("g1*4+g3*4+g4*4=0.05:1:20").unwrap();
    let c = sweep(&base_c, &spec_c, &labels("3", "6"), &config).unwrap();
    let worst_c = c.points.iter().map(|p| p.probabilities[0]).fold(0.0, f64::max);
    pass &= c.points.len() == 20 && worst_c < 1e-6 && c.all_pass();
    detail.push(format!("coupling sweep max P_3_6 {worst_c:.2e}"));

    let base_d = Model::CentralSpin(presets::central_spin_splitting_sweep(0.0));
    let spec_d = SweepSpec::parse("eps1*4+eps2*2=0.1:2:20").unwrap();
    let d = sweep(&base_d, &spec_d, &labels("4", "5"), &config).unwrap();
    let worst_d = d.points.iter().map(|p| p.probabilities[0]).fold(0.0, f64::max);
    pass &= d.points.len() == 20 && worst_d < 1e-6 && d.all_pass();
    detail.push(format!("splitting sweep max P_4_5 {worst_d:.2e}"));

    let elapsed = start.elapsed();
    detail.push(format!("{:.1}s", elapsed.as_secs_f64()));
    outcome(pass && within(elapsed, Duration::from_secs(120)), detail.join(", "))
}

fn algebraic_identities() -> Outcome {
    let mut worst_sq = 0.0_f64;
    let mut worst_conj = 0.0_f64;
    let systems: [&[f64]; 6] = [&[0.5], &[1.0], &[1.5], &[0.5, 1.0], &[0.5, 0.5], &[0.5, 0.5, 0.5]];
    for values in systems {
        let sys = SpinSystem::from_values(values).unwrap();
        let theta = time_reversal(&sys);
        let sign = if sys.is_half_integer() { -1.0 } else { 1.0 };
        let expected = identity(sys.dim()).scale(sign);
        worst_sq = worst_sq.max(max_abs_diff(&theta.square(), &expected));
        for site in 0..sys.sites() {
            for axis in Axis::ALL {
                let s = site_operator(&sys, site, axis).unwrap();
                worst_conj = worst_conj.max(max_abs_diff(&theta.conjugate(&s).unwrap(), &(-&s)));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_forms = 0.0_f64;
    for _ in 0..20 {
        let mut draw = || rng.random_range(-2.0..2.0);
        let spin32 = Spin32Params { h1: draw(), h2: draw(), g1: draw(), g2: draw(), phi: draw(), theta: SPIN32_MATRIX_THETA };
        let half_one = HalfOneParams {
            eps1: draw(),
            eps2: draw(),
            g: std::array::from_fn(|_| draw()),
            h1: draw(),
            h2: draw(),
            h3: draw(),
        };
        let mut central = presets::central_spin_levels();
        central.h1 = draw();
        central.eps1 = draw();
        central.eps2 = draw();
        central.eps3 = draw();
        central.g = std::array::from_fn(|_| draw());
        for model in [Model::Spin32(spin32), Model::HalfOne(half_one), Model::CentralSpin(central)] {
            let op = model.operator_form().unwrap();
            let mf = model.matrix_form().unwrap();
            let relabel = DiabaticBasis::new(mf.basis.labels().to_vec(), mf.operator_index.clone()).unwrap();
            for t in [-3.7, -1.0, 0.0, 0.4, 2.5] {
                worst_forms = worst_forms.max(max_abs_diff(&relabel.reorder(&op.evaluate(t)), &mf.hamiltonian.at(t)));
            }
        }
    }

    let mut worst_unitary = 0.0_f64;
    let runs: [(Model, f64, usize); 4] = [
        (Model::defaults(ModelKind::Lz2), 200.0, 200_000),
        (Model::Spin32(Spin32Params { h1: 1.0, h2: 0.3, g1: 1.0, g2: 0.5, phi: 0.7, theta: 0.0 }), 50.0, 50_000),
        (Model::HalfOne(presets::half_one_reference()), 6.0, 60_000),
        (Model::CentralSpin(presets::central_spin_reference()), 6.0, 60_000),
    ];
    for (model, t, n) in runs {
        let problem = ScatteringProblem::from_model(&model).unwrap();
        let (p, _) = run_propagation(problem.hamiltonian(), t, StepPolicy::fixed(n)).unwrap();
        worst_unitary = worst_unitary.max(p.unitarity_defect);
    }

    outcome(
        worst_sq < 1e-12 && worst_conj < 1e-12 && worst_forms < 1e-12 && worst_unitary < 1e-10,
        format!(
            "Θ² {worst_sq:.1e}, ΘSΘ⁻¹ {worst_conj:.1e}, forms {worst_forms:.1e}, U†U {worst_unitary:.1e}"
        ),
    )
}

fn theta_mechanism() -> Outcome {
    let mut worst_symmetric = 0.0_f64;
    let models = [
        Model::Spin32(Spin32Params { h1: 1.0, h2: 0.3, g1: 1.0, g2: 0.5, phi: 0.7, theta: 0.2 }),
        Model::HalfOne(presets::half_one_reference()),
        Model::CentralSpin(presets::central_spin_reference()),
    ];
    for model in models {
        let problem = ScatteringProblem::from_model(&model).unwrap();
        let p = propagate(problem.hamiltonian(), &TimeGrid::symmetric(6.0, 6_000).unwrap(), None).unwrap();
        worst_symmetric = worst_symmetric.max(theta_identity_defect(&problem, &p).unwrap());
    }

    let sys = SpinSystem::new(vec![Spin::HALF]);
    let broken = Hamiltonian::new(
        sys,
        vec![HamiltonianTerm::new(TimePolynomial::new([(1, 1.0), (0, 1.0)]), vec![SpinFactor::new(0, Axis::Z)])],
    )
    .unwrap();
    let problem = ScatteringProblem::from_hamiltonian(broken, DiabaticBasis::numbered(2)).unwrap();
    let p = propagate(problem.hamiltonian(), &TimeGrid::symmetric(10.0, 10_000).unwrap(), None).unwrap();
    let broken_defect = theta_identity_defect(&problem, &p).unwrap();

    outcome(
        worst_symmetric < 1e-8 && broken_defect > 1e-2,
        format!("symmetric {worst_symmetric:.1e}, broken control {broken_defect:.2e}"),
    )
}

fn kramers_degeneracy() -> Outcome {
    let models = [
        Model::HalfOne(presets::half_one_reference()),
        Model::CentralSpin(presets::central_spin_levels()),
        Model::CentralSpin(presets::central_spin_reference()),
        Model::CentralSpin(presets::central_spin_coupling_sweep(0.5)),
        Model::CentralSpin(presets::central_spin_splitting_sweep(1.0)),
        Model::Spin32(Spin32Params { h1: 1.0, h2: 0.3, g1: 1.0, g2: 0.5, phi: 0.7, theta: 0.0 }),
    ];
    let gap = models
        .iter()
        .map(|m| kramers_gap(&m.operator_form().unwrap(), 0.0))
        .fold(0.0, f64::max);
    outcome(gap < 1e-10, format!("largest pair gap at t=0: {gap:.1e}"))
}

/// Two spin-1/2 with `t (s_z + s_z'/2) + ε s_z s_z' + g s_x s_x'`.
/// Parity-symmetric, but total spin is an integer.
fn integer_spin_control() -> Outcome {
    let sys = SpinSystem::new(vec![Spin::HALF, Spin::HALF]);
    let term = |coeff: TimePolynomial, factors: Vec<SpinFactor>| HamiltonianTerm::new(coeff, factors);
    let h = Hamiltonian::new(
        sys,
        vec![
            term(TimePolynomial::linear(1.0), vec![SpinFactor::new(0, Axis::Z)]),
            term(TimePolynomial::linear(0.5), vec![SpinFactor::new(1, Axis::Z)]),
            term(TimePolynomial::constant(0.3), vec![SpinFactor::new(0, Axis::Z), SpinFactor::new(1, Axis::Z)]),
            term(TimePolynomial::constant(0.8), vec![SpinFactor::new(0, Axis::X), SpinFactor::new(1, Axis::X)]),
        ],
    )
    .unwrap();
    let symmetric = check_parity_symmetry(&h).pass;
    let problem = ScatteringProblem::from_hamiltonian(h, DiabaticBasis::numbered(4)).unwrap();
    let report =
        verify_no_scattering(&problem, 60.0, StepPolicy::fixed(30_000), &VerifyOptions::default()).unwrap();
    let largest = report.scattering.as_ref().map_or(0.0, |s| s.max_partner_probability());
    outcome(
        symmetric && report.symmetry.pass && report.status == TheoremStatus::IntegerSpin && largest > 1e-3,
        format!("largest partner P = {largest:.3}"),
    )
}

fn random_document(rng: &mut ChaCha8Rng) -> HamSpecDocument {
    let sites = rng.random_range(1..=3);
    let spins: Vec<Spin> = (0..sites).map(|_| Spin::from_twice(rng.random_range(1..=4))).collect();
    let system = SpinSystem::new(spins);
    let terms = (0..rng.random_range(0..=5))
        .map(|_| {
            let monomials: Vec<(u32, f64)> =
                (0..rng.random_range(1..=3)).map(|_| (rng.random_range(0..=3), rng.random_range(-5.0..5.0))).collect();
            let factors = (0..rng.random_range(1..=3))
                .map(|_| {
                    let axis = Axis::ALL[rng.random_range(0..3)];
                    SpinFactor::pow(rng.random_range(0..sites), axis, rng.random_range(1..=2))
                })
                .collect();
            HamiltonianTerm::new(TimePolynomial::new(monomials), factors)
        })
        .collect();
    HamSpecDocument::new(system, terms)
}

/// `(label, text, parity verdict, Hermitian verdict)`.
const CORPUS: [(&str, &str, bool, bool); 10] = [
    ("two-state sweep", "spins: 1/2\nterm: 1*t : sz@0\nterm: 1 : sz@0^2\n", true, true),
    ("constant transverse field", "spins: 1/2\nterm: 2*t : sz@0\nterm: 1 : sx@0\n", false, true),
    ("mixed coefficient", "spins: 1/2\nterm: 1 + 1*t : sz@0\n", false, true),
    ("quadrupole", "spins: 1/2, 1\nterm: 0.2 : sz@1^2\nterm: 1*t : sz@0\n", true, true),
    ("exchange", "spins: 1/2, 1\nterm: 1*t : sz@0\nterm: 0.7 : sx@0 sx@1\n", true, true),
    ("odd time coupling", "spins: 3/2\nterm: 0.5*t - 0.1*t^3 : sy@0\n", true, true),
    ("cubic field", "spins: 3/2\nterm: 1*t^3 : sx@0 sz@0^2\n", true, false),
    ("non-Hermitian product", "spins: 1/2\nterm: 1 : sx@0 sy@0\n", true, false),
    ("anticommutator halves", "spins: 1\nterm: 0.5 : sx@0 sz@0\nterm: 0.5 : sz@0 sx@0\n", true, true),
    ("even field", "spins: 1/2, 1/2\nterm: 1*t^2 : sz@0\nterm: 1*t : sz@1\n", false, true),
];

fn parser_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut round_trips = 0;
    for _ in 0..100 {
        let doc = random_document(&mut rng);
        let text = serialize(&doc);
        if let Ok(back) = parse(&text) {
            if back == doc && serialize(&back) == text {
                round_trips += 1;
            }
        }
    }

    let grid = symmetric_sample_grid(3.0, 6);
    let mut correct = 0;
    let mut wrong = Vec::new();
    for (label, text, parity, hermitian) in CORPUS {
        let doc = parse(text).unwrap();
        let h = doc.hamiltonian().unwrap();
        let parity_ok = check_parity_symmetry(&h).pass == parity && doc.symmetry_diagnostics().is_empty() == parity;
        let hermitian_ok = check_hermitian(&h, &grid).pass == hermitian;
        if parity_ok && hermitian_ok {
            correct += 1;
        } else {
            wrong.push(label);
        }
    }
    let mut detail = format!("{round_trips}/100 round trips, {correct}/10 corpus verdicts");
    if !wrong.is_empty() {
        detail.push_str(&format!(" (wrong: {})", wrong.join(", ")));
    }
    outcome(round_trips == 100 && correct == 10, detail)
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("two-state Landau-Zener oracle", lz_oracle),
        ("spin-3/2 partner zeros", spin32_zeros),
        ("spin-1/2 x spin-1 partner curves", half_one_curves),
        ("central-spin zeros and sweeps", central_spin_sweeps),
        ("algebraic identities", algebraic_identities),
        ("ΘUΘ⁻¹ = U† on symmetric grids", theta_mechanism),
        ("Kramers degeneracy at t=0", kramers_degeneracy),
        ("integer-spin negative control", integer_spin_control),
        ("hamspec round trip and static checks", parser_round_trip),
    ];
    let mut failures = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let result = run();
        if !result.pass {
            failures += 1;
        }
        println!("{} {}. {name}: {}", if result.pass { "PASS" } else { "FAIL" }, k + 1, result.detail);
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
