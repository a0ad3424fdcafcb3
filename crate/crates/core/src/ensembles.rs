//! Seeded generators for circular ensembles and the quantum kicked top, plus
//! the collective z-rotation perturbation.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{SymmetricEigen, QR};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, ComplexMatrix, Provenance, UnitaryOperator, C64};

/// System class of an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Ensemble {
    #[serde(rename = "CUE")]
    Cue,
    #[serde(rename = "COE")]
    Coe,
    #[serde(rename = "QKT")]
    Qkt,
    #[serde(rename = "QKT-oe")]
    QktOe,
}

impl Ensemble {
    /// Dyson index of the ensemble's symmetry class; the kicked top is
    /// time-reversal symmetric and sits in the orthogonal class.
    pub fn beta(self) -> u8 {
        match self {
            Ensemble::Cue => 2,
            Ensemble::Coe | Ensemble::Qkt | Ensemble::QktOe => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Ensemble::Cue => "CUE",
            Ensemble::Coe => "COE",
            Ensemble::Qkt => "QKT",
            Ensemble::QktOe => "QKT-oe",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "CUE" => Some(Ensemble::Cue),
            "COE" => Some(Ensemble::Coe),
            "QKT" => Some(Ensemble::Qkt),
            "QKT-oe" => Some(Ensemble::QktOe),
            _ => None,
        }
    }
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Deterministic generator used for every seeded draw in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn complex_gaussian(rng: &mut ChaCha20Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * FRAC_1_SQRT_2
}

/// Haar-random unitary via Gaussian QR with the phases of `R`'s diagonal
/// moved into `Q`.
pub fn sample_cue(dim: usize, seed: u64) -> Result<UnitaryOperator> {
    if dim < 2 {
        return Err(Error::InvalidArgument(format!(
            "CUE dimension must be at least 2, got {dim}"
        )));
    }
    let mut rng = seeded_rng(seed);
    let z = CMatrix::from_fn(dim, dim, |_, _| complex_gaussian(&mut rng));
    let qr = QR::new(z);
    let r = qr.r();
    let mut q = qr.q();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        let d = r[(j, j)];
        let norm = d.norm();
        let phase = if norm > 0.0 { d / norm } else { C64::new(1.0, 0.0) };
        col *= phase;
    }
    UnitaryOperator::certify(ComplexMatrix::from_matrix(q)?, Provenance::Cue, Some(seed))
}

/// `U U^T`, a complex-symmetric member of the circular orthogonal ensemble
/// when `U` is Haar.
pub fn make_coe(cue: &UnitaryOperator) -> Result<UnitaryOperator> {
    if cue.provenance() != Provenance::Cue {
        return Err(Error::InvalidArgument(format!(
            "COE construction needs a CUE input, got {}",
            cue.provenance()
        )));
    }
    let u = cue.matrix();
    let c = u * u.transpose();
    UnitaryOperator::certify(ComplexMatrix::from_matrix(c)?, Provenance::Coe, cue.seed())
}

/// Haar-random unit vector.
pub fn haar_random_state(dim: usize, seed: u64) -> CVector {
    let mut rng = seeded_rng(seed);
    let v = CVector::from_fn(dim, |_, _| complex_gaussian(&mut rng));
    let norm = v.norm();
    v / C64::new(norm, 0.0)
}

/// Spin quantum number stored as `2j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Spin {
    twice_j: u32,
}

impl Spin {
    pub fn new(j: f64) -> Result<Self> {
        let twice = 2.0 * j;
        if !(twice.is_finite() && twice >= 1.0 && (twice - twice.round()).abs() < 1e-9)
            || twice > u32::MAX as f64 - 1.0
        {
            return Err(Error::InvalidSpin(j));
        }
        Ok(Self {
            twice_j: twice.round() as u32,
        })
    }

    /// The spin whose multiplet has `dim = 2j + 1` states.
    pub fn from_dim(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidSpin((dim as f64 - 1.0) / 2.0));
        }
        Ok(Self {
            twice_j: (dim - 1) as u32,
        })
    }

    pub fn twice_j(self) -> u32 {
        self.twice_j
    }

    pub fn value(self) -> f64 {
        self.twice_j as f64 / 2.0
    }

    pub fn dim(self) -> usize {
        self.twice_j as usize + 1
    }

    pub fn is_integer(self) -> bool {
        self.twice_j % 2 == 0
    }

    /// Magnetic quantum numbers in basis order `j, j-1, ..., -j`.
    pub fn m_values(self) -> impl Iterator<Item = f64> {
        let j = self.value();
        (0..self.dim()).map(move |i| j - i as f64)
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.twice_j / 2)
        } else {
            write!(f, "{}/2", self.twice_j)
        }
    }
}

/// Angular momentum matrices in the `|j, m>` basis, `hbar = 1`.
#[derive(Clone, Debug)]
pub struct AngularMomentumOps {
    pub spin: Spin,
    pub jx: CMatrix,
    pub jy: CMatrix,
    pub jz: CMatrix,
}

pub fn angular_momentum_ops(spin: Spin) -> AngularMomentumOps {
    let n = spin.dim();
    let j = spin.value();
    let m: Vec<f64> = spin.m_values().collect();
    let mut jplus = CMatrix::zeros(n, n);
    // <j, m+1| J+ |j, m>; index i-1 holds m_i + 1
    for i in 1..n {
        jplus[(i - 1, i)] = C64::new((j * (j + 1.0) - m[i] * (m[i] + 1.0)).sqrt(), 0.0);
    }
    let jminus = jplus.adjoint();
    let jx = (&jplus + &jminus) * C64::new(0.5, 0.0);
    let jy = (&jplus - &jminus) * C64::new(0.0, -0.5);
    let jz = CMatrix::from_diagonal(&CVector::from_iterator(
        n,
        m.iter().map(|&x| C64::new(x, 0.0)),
    ));
    AngularMomentumOps { spin, jx, jy, jz }
}

/// `exp(-i angle H)` for Hermitian `h`, through its eigendecomposition.
pub fn hermitian_exp(h: &CMatrix, angle: f64) -> CMatrix {
    let eig = SymmetricEigen::new(h.clone());
    let mut scaled = eig.eigenvectors.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= C64::from_polar(1.0, -angle * eig.eigenvalues[k]);
    }
    scaled * eig.eigenvectors.adjoint()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KickedTopParams {
    pub spin: Spin,
    pub k: f64,
}

/// Kick strength used throughout the experiments; deep in the chaotic regime.
pub const DEFAULT_KICK: f64 = 12.0;

impl KickedTopParams {
    pub fn new(j: f64, k: f64) -> Result<Self> {
        if !k.is_finite() {
            return Err(Error::InvalidArgument(format!("kick strength {k}")));
        }
        Ok(Self {
            spin: Spin::new(j)?,
            k,
        })
    }

    pub fn dim(&self) -> usize {
        self.spin.dim()
    }
}

/// Diagonal of the twist factor `exp(-i k Jz^2 / j)`.
pub fn kick_phases(params: &KickedTopParams) -> Vec<C64> {
    let j = params.spin.value();
    params
        .spin
        .m_values()
        .map(|m| C64::from_polar(1.0, -params.k * m * m / j))
        .collect()
}

/// `U = exp(-i pi Jy / 2) exp(-i k Jz^2 / j)`.
pub fn kicked_top(params: &KickedTopParams) -> Result<UnitaryOperator> {
    let ops = angular_momentum_ops(params.spin);
    let mut u = hermitian_exp(&ops.jy, PI / 2.0);
    for (c, z) in kick_phases(params).into_iter().enumerate() {
        for v in u.column_mut(c).iter_mut() {
            *v *= z;
        }
    }
    UnitaryOperator::certify(ComplexMatrix::from_matrix(u)?, Provenance::Qkt, None)
}

/// Generator of the collective z-rotation `exp(-i delta V)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum PerturbationForm {
    /// `V = sum_j sigma_z^j / 2` on `n_qubits` qubits.
    QubitCollectiveZ { n_qubits: u32 },
    /// `V = Jz` on a spin-`j` multiplet; `twice_j` stores `2j`.
    SpinJz { twice_j: u32 },
    /// `V = |Jz|` restricted to the odd subspace of the y-rotation by pi,
    /// in the basis built by [`odd_subspace`].
    OddSubspaceJz { twice_j: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbationSpec {
    pub form: PerturbationForm,
    pub delta: f64,
}

impl PerturbationForm {
    pub fn qubits_for_dim(dim: usize) -> Result<Self> {
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::InvalidPerturbation(format!(
                "qubit perturbation needs a power-of-two dimension, got {dim}"
            )));
        }
        Ok(PerturbationForm::QubitCollectiveZ {
            n_qubits: dim.trailing_zeros(),
        })
    }

    pub fn spin(spin: Spin) -> Self {
        PerturbationForm::SpinJz {
            twice_j: spin.twice_j(),
        }
    }

    /// Diagonal of the generator in the computational, `|j, m>`, or
    /// odd-subspace basis.
    pub fn generator_eigenvalues(&self) -> Vec<f64> {
        match *self {
            PerturbationForm::QubitCollectiveZ { n_qubits } => (0..1usize << n_qubits)
                .map(|b| (n_qubits as f64 - 2.0 * b.count_ones() as f64) / 2.0)
                .collect(),
            PerturbationForm::SpinJz { twice_j } => Spin { twice_j }.m_values().collect(),
            PerturbationForm::OddSubspaceJz { twice_j } => {
                odd_basis_labels(Spin { twice_j }).iter().map(|m| m.abs()).collect()
            }
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            PerturbationForm::QubitCollectiveZ { n_qubits } => 1usize << n_qubits,
            PerturbationForm::SpinJz { twice_j } => twice_j as usize + 1,
            PerturbationForm::OddSubspaceJz { twice_j } => odd_basis_labels(Spin { twice_j }).len(),
        }
    }
}

fn validate_delta(delta: f64) -> Result<()> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::InvalidPerturbation(format!(
            "delta must be finite and non-negative, got {delta}"
        )));
    }
    Ok(())
}

/// `U_p = exp(-i delta V)`, diagonal in the generator's eigenbasis.
pub fn perturbation_unitary(spec: &PerturbationSpec) -> Result<UnitaryOperator> {
    validate_delta(spec.delta)?;
    let diag: Vec<C64> = spec
        .form
        .generator_eigenvalues()
        .into_iter()
        .map(|lambda| C64::from_polar(1.0, -spec.delta * lambda))
        .collect();
    UnitaryOperator::certify(
        ComplexMatrix::from_diagonal(&diag),
        Provenance::Perturbation,
        None,
    )
}

/// `U_p U` for a perturbation matching `u`'s dimension.
pub fn perturbed_map(u: &UnitaryOperator, spec: &PerturbationSpec) -> Result<UnitaryOperator> {
    let up = perturbation_unitary(spec)?;
    if up.dim() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            actual: up.dim(),
        });
    }
    up.compose(u)
}

/// `N^-1 sum_i lambda_i^2` over the generator's eigenvalues.
pub fn perturbation_generator_variance(form: &PerturbationForm) -> f64 {
    let eig = form.generator_eigenvalues();
    eig.iter().map(|x| x * x).sum::<f64>() / eig.len() as f64
}

/// Odd eigenspace of the pi rotation about y, plus the restricted kicked
/// top acting on it.
#[derive(Clone, Debug)]
pub struct OddSubspace {
    pub spin: Spin,
    /// `N x d` isometry; column `c` pairs `|m>` and `|-m>` for the label
    /// `m = labels[c]`.
    pub projector: CMatrix,
    pub labels: Vec<f64>,
    /// `exp(-i pi Jy)` on the full space.
    pub rotation: CMatrix,
}

impl OddSubspace {
    pub fn dim(&self) -> usize {
        self.projector.ncols()
    }

    /// `P^dagger A P`.
    pub fn restrict(&self, a: &CMatrix) -> CMatrix {
        self.projector.adjoint() * a * &self.projector
    }
}

/// `exp(-i pi Jy)` maps `|m>` to a phase times `|-m>`; the entries on the
/// anti-diagonal are those phases.
pub fn pi_rotation_y(spin: Spin) -> CMatrix {
    let ops = angular_momentum_ops(spin);
    hermitian_exp(&ops.jy, PI)
}

/// Labels `m >= 0` of the odd-subspace basis vectors for `spin`, computed
/// from the exact rotation matrix elements `(-1)^(j - m)`.
fn odd_basis_labels(spin: Spin) -> Vec<f64> {
    // R|m> = (-1)^(j-m) |-m>; a pair (m, -m) carries a -1 eigenvector when
    // the product of its two phases is +1, which holds for integer j.
    if !spin.is_integer() {
        return Vec::new();
    }
    let j = spin.twice_j / 2;
    let mut labels: Vec<f64> = (1..=j).rev().map(|m| m as f64).collect();
    if j % 2 == 1 {
        labels.push(0.0);
    }
    labels
}

const ANTI_DIAGONAL_TOL_PER_DIM: f64 = 1e-9;

/// Builds the odd subspace of `exp(-i pi Jy)` from the numerically computed
/// rotation. Fails with [`Error::DimensionUnexpected`] when the measured
/// dimension is not `j`.
pub fn oe_subspace_projector(spin: Spin) -> Result<OddSubspace> {
    let sub = odd_subspace(spin)?;
    if sub.dim() as f64 != spin.value() {
        return Err(Error::DimensionUnexpected {
            j: spin.value(),
            actual: sub.dim(),
        });
    }
    Ok(sub)
}

/// Like [`oe_subspace_projector`] but accepts whatever dimension the odd
/// eigenspace has (including zero for half-integer `j`).
pub fn odd_subspace(spin: Spin) -> Result<OddSubspace> {
    let n = spin.dim();
    let rotation = pi_rotation_y(spin);
    let tol = ANTI_DIAGONAL_TOL_PER_DIM * n as f64;
    let mut columns: Vec<(f64, CVector)> = Vec::new();
    let m: Vec<f64> = spin.m_values().collect();
    for i in 0..n {
        let partner = n - 1 - i;
        // phases r (|m> -> |-m>) and r' (|-m> -> |m>)
        let r = rotation[(partner, i)];
        let r_back = rotation[(i, partner)];
        if (r.norm() - 1.0).abs() > tol || (r_back.norm() - 1.0).abs() > tol {
            return Err(Error::DecompositionFailed(format!(
                "pi rotation is not anti-diagonal at m = {}",
                m[i]
            )));
        }
        if partner == i {
            if (r + 1.0).norm() < tol {
                let mut v = CVector::zeros(n);
                v[i] = C64::new(1.0, 0.0);
                columns.push((m[i], v));
            }
        } else if partner > i && (r * r_back - 1.0).norm() < tol {
            let mut v = CVector::zeros(n);
            v[i] = C64::new(FRAC_1_SQRT_2, 0.0);
            v[partner] = -r * FRAC_1_SQRT_2;
            columns.push((m[i], v));
        }
    }
    let labels: Vec<f64> = columns.iter().map(|(m, _)| *m).collect();
    debug_assert_eq!(labels, odd_basis_labels(spin));
    let mut projector = CMatrix::zeros(n, columns.len());
    for (c, (_, v)) in columns.iter().enumerate() {
        projector.set_column(c, v);
    }
    Ok(OddSubspace {
        spin,
        projector,
        labels,
        rotation,
    })
}

/// The kicked top restricted to its odd subspace. Checks that the map
/// commutes with the pi rotation before projecting.
pub fn restricted_kicked_top(params: &KickedTopParams) -> Result<(OddSubspace, UnitaryOperator)> {
    let sub = oe_subspace_projector(params.spin)?;
    let u = kicked_top(params)?;
    let n = u.dim();
    let commutator = u.matrix() * &sub.rotation - &sub.rotation * u.matrix();
    let norm = commutator.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if norm > 1e-9 * n as f64 {
        return Err(Error::SymmetryBroken(norm));
    }
    let restricted = sub.restrict(u.matrix());
    let op = UnitaryOperator::certify(
        ComplexMatrix::from_matrix(restricted)?,
        Provenance::QktOe,
        None,
    )?;
    Ok((sub, op))
}

/// Directory of generated maps in the binary matrix format, one file per
/// (provenance, parameters, seed). Cached matrices are re-certified on load.
#[derive(Clone, Debug)]
pub struct OperatorCache {
    dir: PathBuf,
}

impl OperatorCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// File for a key. Characters of `params` outside `[A-Za-z0-9.-]` become `_`.
    pub fn path_for(&self, provenance: Provenance, params: &str, seed: Option<u64>) -> PathBuf {
        let params: String = params
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
            .collect();
        let seed = seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        self.dir.join(format!("{provenance}_{params}_seed-{seed}.fsm"))
    }

    /// Loads the map stored under the key, or builds and stores it.
    pub fn get_or_build<F>(
        &self,
        provenance: Provenance,
        params: &str,
        seed: Option<u64>,
        build: F,
    ) -> Result<UnitaryOperator>
    where
        F: FnOnce() -> Result<UnitaryOperator>,
    {
        let path = self.path_for(provenance, params, seed);
        if path.exists() {
            let m = ComplexMatrix::read_binary(BufReader::new(fs::File::open(&path)?))?;
            return UnitaryOperator::certify(m, provenance, seed);
        }
        let op = build()?;
        fs::create_dir_all(&self.dir)?;
        // concurrent builders of one key each write their own temporary file
        let tmp = path.with_extension(format!(
            "tmp-{}-{:?}",
            std::process::id(),
            std::thread::current().id()
        ));
        {
            let mut w = BufWriter::new(fs::File::create(&tmp)?);
            op.as_complex_matrix().write_binary(&mut w)?;
            w.flush()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(op)
    }
}
