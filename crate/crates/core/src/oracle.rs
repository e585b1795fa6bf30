//! Brute-force check of the closed-form step maps.
//!
//! Two pairs are held as a 16×16 density operator over the qubits
//! `(1_A, 1_B, 2_A, 2_B)`, with `1_A` the most significant bit. The local
//! rotations, bilateral CNOT and target measurements are applied as explicit
//! operators and the kept pair is recovered by partial trace.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::bell::{distill_step, BellDiagonalState, StepOutcome};
use crate::error::{Error, Result};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;
pub const OFF_DIAGONAL_TOL: f64 = 1e-10;
pub const IMAGINARY_TOL: f64 = 1e-12;
pub const BRANCH_TRACE_TOL: f64 = 1e-14;

/// Maximum tolerated closed-form vs oracle deviation.
pub const EQUIVALENCE_TOL: f64 = 1e-10;

const QUBITS: usize = 4;
const PAIR_DIM: usize = 4;
const FULL_DIM: usize = 16;

/// Qubit positions in the two-pair register.
const Q1A: usize = 0;
const Q1B: usize = 1;
const Q2A: usize = 2;
const Q2B: usize = 3;

type CMatrix = DMatrix<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// A validated density operator on one pair (dim 4) or two pairs (dim 16).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: CMatrix,
}

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let dim = m.nrows();
        if m.ncols() != dim || (dim != PAIR_DIM && dim != FULL_DIM) {
            return Err(Error::BadDimension(dim));
        }
        let out = Self { m };
        out.validate()?;
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn trace(&self) -> Complex64 {
        self.m.trace()
    }

    pub fn hermitian_deviation(&self) -> f64 {
        let diff = &self.m - self.m.adjoint();
        diff.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        // Symmetrize so rounding noise does not leak into the eigensolver.
        let herm = (&self.m + self.m.adjoint()) * c(0.5);
        herm.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    fn validate(&self) -> Result<()> {
        let herm = self.hermitian_deviation();
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "hermiticity violated by {herm:e}"
            )));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
        }
        let min = self.min_eigenvalue();
        if min < -PSD_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "smallest eigenvalue {min:e}"
            )));
        }
        Ok(())
    }
}

/// Bell vectors in (Φ⁺, Ψ⁻, Ψ⁺, Φ⁻) order over the computational basis
/// `|00⟩, |01⟩, |10⟩, |11⟩` with Alice's qubit first.
pub fn bell_basis() -> [[f64; 4]; 4] {
    let h = FRAC_1_SQRT_2;
    [
        [h, 0.0, 0.0, h],
        [0.0, h, -h, 0.0],
        [0.0, h, h, 0.0],
        [h, 0.0, 0.0, -h],
    ]
}

/// Columns are the Bell vectors.
fn bell_change_of_basis() -> CMatrix {
    let basis = bell_basis();
    CMatrix::from_fn(PAIR_DIM, PAIR_DIM, |row, col| c(basis[col][row]))
}

pub fn embed(s: &BellDiagonalState) -> DensityMatrix {
    let u = bell_change_of_basis();
    let diag = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        PAIR_DIM,
        s.coefficients().into_iter().map(c),
    ));
    DensityMatrix {
        m: &u * diag * u.adjoint(),
    }
}

/// Matrix elements `⟨βᵢ|m|βⱼ⟩` in the Bell basis.
fn in_bell_basis(m: &CMatrix) -> CMatrix {
    let u = bell_change_of_basis();
    u.adjoint() * m * u
}

/// Largest off-diagonal Bell-basis element as `(row, col, magnitude)`.
fn worst_off_diagonal(bell: &CMatrix) -> (usize, usize, f64) {
    let mut worst = (0, 1, 0.0);
    for i in 0..PAIR_DIM {
        for j in 0..PAIR_DIM {
            if i != j && bell[(i, j)].norm() > worst.2 {
                worst = (i, j, bell[(i, j)].norm());
            }
        }
    }
    worst
}

/// Inverse of [`embed`] for Bell-diagonal matrices.
pub fn bell_coefficients(m: &DensityMatrix) -> Result<BellDiagonalState> {
    if m.dim() != PAIR_DIM {
        return Err(Error::BadDimension(m.dim()));
    }
    let bell = in_bell_basis(&m.m);
    let (row, col, magnitude) = worst_off_diagonal(&bell);
    if magnitude > OFF_DIAGONAL_TOL {
        return Err(Error::NotBellDiagonal {
            row,
            col,
            magnitude,
        });
    }
    let mut coeffs = [0.0; 4];
    for (i, x) in coeffs.iter_mut().enumerate() {
        let z = bell[(i, i)];
        if z.im.abs() > IMAGINARY_TOL {
            return Err(Error::ImaginaryResidue {
                index: i,
                residue: z.im,
            });
        }
        *x = z.re;
    }
    BellDiagonalState::from_array(coeffs)
}

/// Sign convention for the step-(I) rotations: `AlicePlus` applies
/// `Rx(π/2)` on Alice's qubits and `Rx(-π/2)` on Bob's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RotationConvention {
    #[default]
    AlicePlus,
    AliceMinus,
}

impl RotationConvention {
    fn angles(self) -> (f64, f64) {
        match self {
            Self::AlicePlus => (FRAC_PI_2, -FRAC_PI_2),
            Self::AliceMinus => (-FRAC_PI_2, FRAC_PI_2),
        }
    }
}

fn rx(theta: f64) -> CMatrix {
    let (s, co) = (theta / 2.0).sin_cos();
    let off = Complex64::new(0.0, -s);
    CMatrix::from_row_slice(2, 2, &[c(co), off, off, c(co)])
}

fn kron_all(factors: &[CMatrix]) -> CMatrix {
    factors
        .iter()
        .skip(1)
        .fold(factors[0].clone(), |acc, f| acc.kronecker(f))
}

/// Single-qubit rotations for Alice and Bob on a register of `qubits`
/// where even positions are Alice's.
fn local_rotations(qubits: usize, convention: RotationConvention) -> CMatrix {
    let (alice, bob) = convention.angles();
    let factors: Vec<CMatrix> = (0..qubits)
        .map(|q| if q % 2 == 0 { rx(alice) } else { rx(bob) })
        .collect();
    kron_all(&factors)
}

fn bit(index: usize, qubit: usize) -> usize {
    (index >> (QUBITS - 1 - qubit)) & 1
}

fn cnot(control: usize, target: usize) -> CMatrix {
    let mut m = CMatrix::zeros(FULL_DIM, FULL_DIM);
    for input in 0..FULL_DIM {
        let output = if bit(input, control) == 1 {
            input ^ (1 << (QUBITS - 1 - target))
        } else {
            input
        };
        m[(output, input)] = c(1.0);
    }
    m
}

/// Unnormalized state of pair 1 given the target outcome `(x_A, x_B)`.
fn conditioned_pair_one(full: &CMatrix, outcome: (usize, usize)) -> CMatrix {
    let pair_two = (outcome.0 << 1) | outcome.1;
    CMatrix::from_fn(PAIR_DIM, PAIR_DIM, |i, j| {
        full[(i * PAIR_DIM + pair_two, j * PAIR_DIM + pair_two)]
    })
}

/// A post-measurement branch of the full simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub matrix: DensityMatrix,
    /// False when the branch has (numerically) zero probability; `matrix`
    /// is then the LOCC floor placeholder.
    pub reachable: bool,
}

impl Branch {
    fn from_unnormalized(m: CMatrix) -> Result<Self> {
        let tr = m.trace().re;
        if tr < BRANCH_TRACE_TOL {
            return Ok(Self {
                matrix: embed(&BellDiagonalState::locc_floor()),
                reachable: false,
            });
        }
        Ok(Self {
            matrix: DensityMatrix::new(m * c(1.0 / tr))?,
            reachable: true,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullStepOutcome {
    pub p_success: f64,
    pub success: Branch,
    pub failure: Branch,
}

/// One distillation step on `m ⊗ m` simulated gate by gate.
pub fn dejmps_step_full(m: &DensityMatrix, convention: RotationConvention) -> Result<FullStepOutcome> {
    if m.dim() != PAIR_DIM {
        return Err(Error::BadDimension(m.dim()));
    }
    let joint = m.m.kronecker(&m.m);
    let rot = local_rotations(QUBITS, convention);
    let cnots = cnot(Q1B, Q2B) * cnot(Q1A, Q2A);
    let u = cnots * rot;
    let full = &u * joint * u.adjoint();

    let success = conditioned_pair_one(&full, (0, 0)) + conditioned_pair_one(&full, (1, 1));
    let failure = conditioned_pair_one(&full, (0, 1)) + conditioned_pair_one(&full, (1, 0));
    let p_success = success.trace().re;
    Ok(FullStepOutcome {
        p_success,
        success: Branch::from_unnormalized(success)?,
        failure: Branch::from_unnormalized(failure)?,
    })
}

/// Uniform sample from the probability simplex (flat Dirichlet).
pub fn sample_simplex<R: Rng + ?Sized>(rng: &mut R) -> BellDiagonalState {
    let draws: [f64; 4] = std::array::from_fn(|_| -(1.0 - rng.gen::<f64>()).ln());
    let total: f64 = draws.iter().sum();
    BellDiagonalState::from_array(draws.map(|x| x / total)).expect("simplex sample")
}

fn max_abs_diff(x: [f64; 4], y: [f64; 4]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotationReport {
    pub samples: usize,
    pub max_deviation: f64,
    pub passed: bool,
}

/// Checks that the local rotation pair maps `(a, b, c, d)` to `(a, d, c, b)`
/// on random Bell-diagonal states, including off-diagonal leakage.
pub fn verify_rotation_choice(
    samples: usize,
    seed: u64,
    convention: RotationConvention,
) -> RotationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rot = local_rotations(2, convention);
    let mut max_deviation: f64 = 0.0;
    for _ in 0..samples {
        let s = sample_simplex(&mut rng);
        max_deviation = max_deviation.max(rotation_deviation(&s, &rot));
    }
    RotationReport {
        samples,
        max_deviation,
        passed: max_deviation < EQUIVALENCE_TOL,
    }
}

fn rotation_deviation(s: &BellDiagonalState, rot: &CMatrix) -> f64 {
    let rotated = rot * embed(s).m.clone() * rot.adjoint();
    let bell = in_bell_basis(&rotated);
    let [a, b, cc, d] = s.coefficients();
    let diag: [f64; 4] = std::array::from_fn(|i| bell[(i, i)].re);
    let imag = (0..PAIR_DIM).map(|i| bell[(i, i)].im.abs()).fold(0.0, f64::max);
    max_abs_diff(diag, [a, d, cc, b])
        .max(worst_off_diagonal(&bell).2)
        .max(imag)
}

/// Coefficients of a single rotated state, for inspection.
pub fn rotate_coefficients(
    s: &BellDiagonalState,
    convention: RotationConvention,
) -> Result<BellDiagonalState> {
    let rot = local_rotations(2, convention);
    let rotated = DensityMatrix::new(&rot * embed(s).m.clone() * rot.adjoint())?;
    bell_coefficients(&rotated)
}

/// Worst disagreement of a closed-form step against the full simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub samples: usize,
    pub max_p_deviation: f64,
    pub max_success_deviation: f64,
    pub max_failure_deviation: f64,
    pub worst_state: Option<BellDiagonalState>,
}

impl EquivalenceReport {
    pub fn max_deviation(&self) -> f64 {
        self.max_p_deviation
            .max(self.max_success_deviation)
            .max(self.max_failure_deviation)
    }

    pub fn passed(&self) -> bool {
        self.max_deviation() < EQUIVALENCE_TOL
    }
}

/// Deviations of `closed_form` from the oracle on one state.
fn compare_one(
    s: &BellDiagonalState,
    closed: &StepOutcome,
    convention: RotationConvention,
) -> Result<(f64, f64, f64)> {
    let full = dejmps_step_full(&embed(s), convention)?;
    let p_dev = (full.p_success - closed.p_success).abs();
    let succ = bell_coefficients(&full.success.matrix)?;
    let s_dev = max_abs_diff(succ.coefficients(), closed.success_state.coefficients());
    let f_dev = match (full.failure.reachable, closed.failure_reachable) {
        (true, true) => {
            let fail = bell_coefficients(&full.failure.matrix)?;
            max_abs_diff(fail.coefficients(), closed.failure_state.coefficients())
        }
        (false, false) => 0.0,
        _ => 1.0,
    };
    Ok((p_dev, s_dev, f_dev))
}

/// Runs `closed_form` and the oracle side by side on `states`.
pub fn verify_against<I, F>(
    states: I,
    convention: RotationConvention,
    closed_form: F,
) -> Result<EquivalenceReport>
where
    I: IntoIterator<Item = BellDiagonalState>,
    F: Fn(&BellDiagonalState) -> StepOutcome,
{
    let mut report = EquivalenceReport {
        samples: 0,
        max_p_deviation: 0.0,
        max_success_deviation: 0.0,
        max_failure_deviation: 0.0,
        worst_state: None,
    };
    let mut worst = -1.0;
    for s in states {
        let (p, succ, fail) = compare_one(&s, &closed_form(&s), convention)?;
        report.samples += 1;
        report.max_p_deviation = report.max_p_deviation.max(p);
        report.max_success_deviation = report.max_success_deviation.max(succ);
        report.max_failure_deviation = report.max_failure_deviation.max(fail);
        let here = p.max(succ).max(fail);
        if here > worst {
            worst = here;
            report.worst_state = Some(s);
        }
    }
    Ok(report)
}

/// [`distill_step`] against the oracle on `samples` seeded simplex draws.
pub fn verify_closed_form(samples: usize, seed: u64) -> Result<EquivalenceReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states: Vec<_> = (0..samples).map(|_| sample_simplex(&mut rng)).collect();
    verify_against(states, RotationConvention::default(), distill_step)
}
