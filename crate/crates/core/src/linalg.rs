//! Dense complex matrices, unitarity certification, and spectral
//! decomposition of unitary operators.
//!
//! Eigenphases follow the convention `U|v_j> = exp(-i phi_j)|v_j>` with
//! `phi_j` in `(-pi, pi]`.

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative tolerance for unitarity certification, scaled by dimension.
pub const UNITARY_TOL_PER_DIM: f64 = 1e-10;
/// Relative tolerance for eigen-reconstruction, scaled by dimension.
pub const RECONSTRUCTION_TOL_PER_DIM: f64 = 1e-9;
/// Eigenphases closer than this are treated as one degenerate cluster.
pub const DEGENERACY_GAP: f64 = 1e-10;

const BINARY_MAGIC: &[u8; 4] = b"FSM1";

/// Maps an angle onto `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    // rem_euclid can land exactly on -pi after the shift only through rounding
    if y <= -PI {
        y += 2.0 * PI;
    }
    y
}

/// Square dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(CMatrix);

impl ComplexMatrix {
    /// Builds a `dim x dim` matrix from row-major entries.
    pub fn from_row_major(dim: usize, entries: &[C64]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                actual: entries.len(),
            });
        }
        Ok(Self(DMatrix::from_row_slice(dim, dim, entries)))
    }

    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        Ok(Self(m))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn row_major(&self) -> Vec<C64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                out.push(self.0[(r, c)]);
            }
        }
        out
    }

    /// Writes the `FSM1` binary form: magic, `u32` dimension, then row-major
    /// `(re, im)` pairs, all little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let dim = u32::try_from(self.dim())
            .map_err(|_| Error::Format("dimension does not fit in u32".into()))?;
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&dim.to_le_bytes())?;
        for z in self.row_major() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Format(format!("bad magic {magic:?}")));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let dim = u32::from_le_bytes(word) as usize;
        if dim == 0 {
            return Err(Error::Format("zero dimension".into()));
        }
        let mut buf = [0u8; 8];
        let mut entries = Vec::with_capacity(dim * dim);
        for _ in 0..dim * dim {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf);
            r.read_exact(&mut buf)?;
            let im = f64::from_le_bytes(buf);
            entries.push(C64::new(re, im));
        }
        Self::from_row_major(dim, &entries)
    }

    pub fn to_json(&self) -> Result<String> {
        let entries = self.row_major();
        let doc = MatrixJson {
            dim: self.dim(),
            re: entries.iter().map(|z| z.re).collect(),
            im: entries.iter().map(|z| z.im).collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MatrixJson = serde_json::from_str(text)?;
        if doc.re.len() != doc.im.len() {
            return Err(Error::Format("re and im arrays differ in length".into()));
        }
        let entries: Vec<C64> = doc
            .re
            .iter()
            .zip(&doc.im)
            .map(|(&re, &im)| C64::new(re, im))
            .collect();
        Self::from_row_major(doc.dim, &entries)
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    dim: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

/// Where a unitary came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    #[serde(rename = "CUE")]
    Cue,
    #[serde(rename = "COE")]
    Coe,
    #[serde(rename = "QKT")]
    Qkt,
    #[serde(rename = "QKT-oe")]
    QktOe,
    #[serde(rename = "perturbation")]
    Perturbation,
    #[serde(rename = "composed")]
    Composed,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Cue => "CUE",
            Provenance::Coe => "COE",
            Provenance::Qkt => "QKT",
            Provenance::QktOe => "QKT-oe",
            Provenance::Perturbation => "perturbation",
            Provenance::Composed => "composed",
        })
    }
}

/// A square matrix whose unitarity has been measured at construction.
#[derive(Clone, Debug)]
pub struct UnitaryOperator {
    matrix: ComplexMatrix,
    provenance: Provenance,
    seed: Option<u64>,
    unitarity_defect: f64,
}

/// Largest column 2-norm of `U^dagger U - I`.
pub fn unitarity_defect(m: &CMatrix) -> f64 {
    let mut g = m.adjoint() * m;
    for i in 0..g.nrows() {
        g[(i, i)] -= C64::new(1.0, 0.0);
    }
    g.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Measures the unitarity defect of `m` and accepts it if the defect is at
/// most `tolerance`.
pub fn certify_unitary(m: ComplexMatrix, tolerance: f64) -> Result<UnitaryOperator> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    let defect = unitarity_defect(m.as_matrix());
    if !(defect <= tolerance) {
        return Err(Error::NonUnitary { defect, tolerance });
    }
    Ok(UnitaryOperator {
        matrix: m,
        provenance: Provenance::Composed,
        seed: None,
        unitarity_defect: defect,
    })
}

impl UnitaryOperator {
    /// Certifies at the default dimension-scaled tolerance.
    pub fn certify(m: ComplexMatrix, provenance: Provenance, seed: Option<u64>) -> Result<Self> {
        let tol = UNITARY_TOL_PER_DIM * m.dim() as f64;
        Ok(certify_unitary(m, tol)?.with_provenance(provenance, seed))
    }

    pub fn with_provenance(mut self, provenance: Provenance, seed: Option<u64>) -> Self {
        self.provenance = provenance;
        self.seed = seed;
        self
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim),
            provenance: Provenance::Composed,
            seed: None,
            unitarity_defect: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        self.matrix.as_matrix()
    }

    pub fn as_complex_matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.unitarity_defect
    }

    /// `self * rhs`, i.e. apply `rhs` first.
    pub fn compose(&self, rhs: &UnitaryOperator) -> Result<UnitaryOperator> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: rhs.dim(),
            });
        }
        let product = self.matrix() * rhs.matrix();
        UnitaryOperator::certify(ComplexMatrix(product), Provenance::Composed, rhs.seed)
    }
}

/// Eigenphases and orthonormal eigenvectors of a unitary.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    phases: Vec<f64>,
    vectors: CMatrix,
    source: Provenance,
    reconstruction_defect: f64,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.phases.len()
    }

    /// Eigenphases in ascending order on `(-pi, pi]`.
    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// Column `j` is the eigenvector belonging to `phases()[j]`.
    pub fn vectors(&self) -> &CMatrix {
        &self.vectors
    }

    pub fn source(&self) -> Provenance {
        self.source
    }

    pub fn reconstruction_defect(&self) -> f64 {
        self.reconstruction_defect
    }

    /// `V diag(exp(-i phi)) V^dagger`.
    pub fn reassemble(&self) -> CMatrix {
        reassemble(&self.vectors, &self.phases)
    }
}

fn reassemble(vectors: &CMatrix, phases: &[f64]) -> CMatrix {
    let mut scaled = vectors.clone();
    for (j, &phi) in phases.iter().enumerate() {
        let z = C64::from_polar(1.0, -phi);
        for v in scaled.column_mut(j).iter_mut() {
            *v *= z;
        }
    }
    scaled * vectors.adjoint()
}

fn max_entry(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigen-decomposes a certified unitary through a complex Schur
/// factorization. For a normal matrix the triangular factor is diagonal up
/// to rounding, so the Schur vectors are the eigenvectors.
pub fn spectral_decompose(u: &UnitaryOperator) -> Result<SpectralDecomposition> {
    let n = u.dim();
    let schur = Schur::try_new(u.matrix().clone(), f64::EPSILON, 100 * n.max(10))
        .ok_or_else(|| Error::DecompositionFailed("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();

    let mut order: Vec<(f64, usize)> = (0..n).map(|j| (wrap_phase(-t[(j, j)].arg()), j)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let phases: Vec<f64> = order.iter().map(|&(p, _)| p).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &(_, src)) in order.iter().enumerate() {
        vectors.set_column(dst, &q.column(src));
    }
    reorthonormalize_clusters(&mut vectors, &phases);

    let tol = RECONSTRUCTION_TOL_PER_DIM * n as f64;
    let vec_defect = unitarity_defect(&vectors);
    if !(vec_defect <= tol) {
        return Err(Error::DecompositionFailed(format!(
            "eigenvector matrix defect {vec_defect:.3e} exceeds {tol:.3e}"
        )));
    }
    let recon = max_entry(&(reassemble(&vectors, &phases) - u.matrix()));
    if !(recon <= tol) {
        return Err(Error::DecompositionFailed(format!(
            "reconstruction defect {recon:.3e} exceeds {tol:.3e}"
        )));
    }
    Ok(SpectralDecomposition {
        phases,
        vectors,
        source: u.provenance(),
        reconstruction_defect: recon,
    })
}

/// Groups sorted phases into runs whose neighbours differ by less than the
/// degeneracy gap, including the wrap from `pi` back to `-pi`.
pub(crate) fn degenerate_clusters(phases: &[f64]) -> Vec<Vec<usize>> {
    let n = phases.len();
    if n == 0 {
        return Vec::new();
    }
    let mut clusters: Vec<Vec<usize>> = vec![vec![0]];
    for j in 1..n {
        if phases[j] - phases[j - 1] < DEGENERACY_GAP {
            clusters.last_mut().unwrap().push(j);
        } else {
            clusters.push(vec![j]);
        }
    }
    if clusters.len() > 1 && phases[0] + 2.0 * PI - phases[n - 1] < DEGENERACY_GAP {
        let last = clusters.pop().unwrap();
        clusters[0].extend(last);
    }
    clusters
}

/// Modified Gram-Schmidt inside each degenerate cluster.
fn reorthonormalize_clusters(vectors: &mut CMatrix, phases: &[f64]) {
    for cluster in degenerate_clusters(phases) {
        if cluster.len() < 2 {
            continue;
        }
        for (a, &ja) in cluster.iter().enumerate() {
            for &jb in &cluster[..a] {
                let proj = vectors.column(jb).dotc(&vectors.column(ja));
                let prev = vectors.column(jb).clone_owned();
                let mut col = vectors.column_mut(ja);
                col -= prev * proj;
            }
            let norm = vectors.column(ja).norm();
            if norm > 0.0 {
                vectors.column_mut(ja).unscale_mut(norm);
            }
        }
    }
}

/// `a_lm = <v'_l | v_m>` between perturbed (rows) and unperturbed (columns)
/// eigenbases.
#[derive(Clone, Debug)]
pub struct OverlapMatrix {
    a: CMatrix,
    phases_unperturbed: Vec<f64>,
    phases_perturbed: Vec<f64>,
}

/// Tolerance on the row and column completeness sums of an overlap matrix.
pub const COMPLETENESS_TOL: f64 = 1e-8;

impl OverlapMatrix {
    /// Builds an overlap matrix from raw parts, checking completeness.
    pub fn from_parts(
        a: CMatrix,
        phases_unperturbed: Vec<f64>,
        phases_perturbed: Vec<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::NotSquare {
                rows: n,
                cols: a.ncols(),
            });
        }
        for len in [phases_unperturbed.len(), phases_perturbed.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: len,
                });
            }
        }
        let out = Self {
            a,
            phases_unperturbed,
            phases_perturbed,
        };
        let worst = out.completeness_defect();
        if worst > COMPLETENESS_TOL {
            return Err(Error::DecompositionFailed(format!(
                "overlap completeness defect {worst:.3e}"
            )));
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn amplitudes(&self) -> &CMatrix {
        &self.a
    }

    pub fn phases_unperturbed(&self) -> &[f64] {
        &self.phases_unperturbed
    }

    pub fn phases_perturbed(&self) -> &[f64] {
        &self.phases_perturbed
    }

    /// `|a_lm|^2`, indexed `(l, m)`.
    pub fn weights(&self) -> DMatrix<f64> {
        self.a.map(|z| z.norm_sqr())
    }

    /// Largest deviation of any row or column sum of `|a_lm|^2` from one.
    pub fn completeness_defect(&self) -> f64 {
        let w = self.weights();
        let cols = w.column_iter().map(|c| (c.sum() - 1.0).abs());
        let rows = w.row_iter().map(|r| (r.sum() - 1.0).abs());
        cols.chain(rows).fold(0.0, f64::max)
    }

    pub fn check_index(&self, m: usize) -> Result<()> {
        if m >= self.dim() {
            return Err(Error::IndexOutOfRange {
                index: m,
                dim: self.dim(),
            });
        }
        Ok(())
    }
}

pub fn overlap_matrix(
    unperturbed: &SpectralDecomposition,
    perturbed: &SpectralDecomposition,
) -> Result<OverlapMatrix> {
    if unperturbed.dim() != perturbed.dim() {
        return Err(Error::DimensionMismatch {
            expected: unperturbed.dim(),
            actual: perturbed.dim(),
        });
    }
    let a = perturbed.vectors().adjoint() * unperturbed.vectors();
    OverlapMatrix::from_parts(
        a,
        unperturbed.phases().to_vec(),
        perturbed.phases().to_vec(),
    )
}
