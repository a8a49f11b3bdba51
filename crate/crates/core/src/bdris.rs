//! Group-connected BD-RIS reflection model.
//!
//! A BD-RIS with `N` elements split into `K` fully connected groups of
//! `N0 = N / K` elements reflects through a block-diagonal matrix
//! `Theta = diag(Theta_1, ..., Theta_K)`. Each block comes from a lossless,
//! reciprocal impedance network with reactance `X_k`:
//!
//! ```text
//! Theta_k = (j X_k + Z0 I)^-1 (j X_k - Z0 I)
//! ```
//!
//! which makes every block unitary and symmetric. Training patterns are the
//! pruned vectorization `v = [1; vec(Theta_1*); ...; vec(Theta_K*)]` of
//! length `N0 N + 1`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const DEFAULT_REFERENCE_IMPEDANCE_OHM: f64 = 50.0;

/// Default tolerance for the unitarity and symmetry checks.
pub const SCATTERING_TOL: f64 = 1e-10;

const INVERSION_RESIDUAL_TOL: f64 = 1e-8;

/// Size and grouping of a BD-RIS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BdRisConfig {
    n_elements: usize,
    n_groups: usize,
    group_size: usize,
    reference_impedance: f64,
}

impl BdRisConfig {
    /// `n_elements` elements in groups of `group_size`, with a 50 ohm reference.
    pub fn new(n_elements: usize, group_size: usize) -> Result<Self> {
        Self::with_reference_impedance(n_elements, group_size, DEFAULT_REFERENCE_IMPEDANCE_OHM)
    }

    pub fn with_reference_impedance(
        n_elements: usize,
        group_size: usize,
        reference_impedance: f64,
    ) -> Result<Self> {
        if n_elements == 0 || group_size == 0 {
            return Err(Error::invalid("element count and group size must be positive"));
        }
        if !n_elements.is_multiple_of(group_size) {
            return Err(Error::invalid(format!(
                "group size {group_size} does not divide element count {n_elements}"
            )));
        }
        if !(reference_impedance > 0.0 && reference_impedance.is_finite()) {
            return Err(Error::invalid(format!(
                "reference impedance must be positive, got {reference_impedance}"
            )));
        }
        Ok(Self {
            n_elements,
            n_groups: n_elements / group_size,
            group_size,
            reference_impedance,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn reference_impedance(&self) -> f64 {
        self.reference_impedance
    }

    /// Length `N0 N + 1` of a training pattern / cascaded channel.
    pub fn trp_len(&self) -> usize {
        self.group_size * self.n_elements + 1
    }
}

/// Per-group real symmetric reactance matrices (ohms).
#[derive(Debug, Clone, PartialEq)]
pub struct ReactanceMatrix {
    blocks: Vec<DMatrix<f64>>,
}

impl ReactanceMatrix {
    pub fn new(blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        check_square_blocks(&blocks)?;
        for (k, b) in blocks.iter().enumerate() {
            if !is_symmetric(b) {
                return Err(Error::invalid(format!("reactance block {k} is not symmetric")));
            }
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    /// Maps every block through the Cayley transform.
    pub fn to_scattering(&self, z0: f64) -> Result<ScatteringMatrix> {
        let blocks = self
            .blocks
            .iter()
            .map(|x| cayley_transform(x, z0))
            .collect::<Result<Vec<_>>>()?;
        assemble_reflection(blocks)
    }
}

/// Block-diagonal BD-RIS reflection matrix, stored by blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix {
    blocks: Vec<DMatrix<C64>>,
}

impl ScatteringMatrix {
    pub fn blocks(&self) -> &[DMatrix<C64>] {
        &self.blocks
    }

    pub fn n_groups(&self) -> usize {
        self.blocks.len()
    }

    pub fn group_size(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.nrows())
    }

    pub fn n_elements(&self) -> usize {
        self.n_groups() * self.group_size()
    }

    /// Dense `N x N` form with zeros outside the diagonal blocks.
    pub fn to_dense(&self) -> DMatrix<C64> {
        let n0 = self.group_size();
        let n = self.n_elements();
        let mut dense = DMatrix::zeros(n, n);
        for (k, block) in self.blocks.iter().enumerate() {
            dense.view_mut((k * n0, k * n0), (n0, n0)).copy_from(block);
        }
        dense
    }

    /// Every block set to `value * I`.
    pub fn scaled_identity(config: &BdRisConfig, value: C64) -> Self {
        let n0 = config.group_size();
        Self {
            blocks: vec![DMatrix::from_diagonal_element(n0, n0, value); config.n_groups()],
        }
    }
}

/// Outcome of [`validate_scattering`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    /// Largest `||Theta_k^H Theta_k - I||_F` over the blocks.
    pub max_unitarity_residual: f64,
    /// Largest `||Theta_k - Theta_k^T||_F` over the blocks.
    pub max_symmetry_residual: f64,
    pub passed: bool,
}

/// Training reflection pattern `[1; vec(Theta_1*); ...; vec(Theta_K*)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrpVector {
    entries: Vec<C64>,
}

impl TrpVector {
    /// Wraps raw entries; the leading entry must be exactly `1`.
    pub fn from_entries(entries: Vec<C64>) -> Result<Self> {
        match entries.first() {
            Some(first) if *first == C64::new(1.0, 0.0) => Ok(Self { entries }),
            Some(first) => Err(Error::invalid(format!(
                "training pattern must start with 1, got {first}"
            ))),
            None => Err(Error::invalid("training pattern is empty")),
        }
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Rebuilds the reflection matrix the pattern was vectorized from.
    pub fn to_scattering(&self, config: &BdRisConfig) -> Result<ScatteringMatrix> {
        if self.len() != config.trp_len() {
            return Err(Error::invalid(format!(
                "pattern length {} does not match configuration length {}",
                self.len(),
                config.trp_len()
            )));
        }
        let n0 = config.group_size();
        let blocks = self.entries[1..]
            .chunks_exact(n0 * n0)
            .map(|chunk| DMatrix::from_iterator(n0, n0, chunk.iter().map(|z| z.conj())))
            .collect();
        assemble_reflection(blocks)
    }
}

/// Cayley map `(jX + z0 I)^-1 (jX - z0 I)` of a real symmetric reactance block.
pub fn cayley_transform(block: &DMatrix<f64>, z0: f64) -> Result<DMatrix<C64>> {
    if !block.is_square() || block.nrows() == 0 {
        return Err(Error::invalid("reactance block must be square and non-empty"));
    }
    if !(z0 > 0.0 && z0.is_finite()) {
        return Err(Error::invalid(format!("reference impedance must be positive, got {z0}")));
    }
    if !is_symmetric(block) {
        return Err(Error::invalid("reactance block is not symmetric"));
    }

    let n0 = block.nrows();
    let jx = block.map(|x| C64::new(0.0, x));
    let shift = DMatrix::from_diagonal_element(n0, n0, C64::new(z0, 0.0));
    let lhs = &jx + &shift;
    let rhs = &jx - &shift;

    let theta = lhs
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular impedance matrix in Cayley transform".into()))?;

    // (jX + z0 I) has eigenvalues j*lambda + z0, so this only trips on
    // overflow or NaN input.
    let residual = (&lhs * &theta - &rhs).norm() / rhs.norm().max(1.0);
    if !(residual <= INVERSION_RESIDUAL_TOL) {
        return Err(Error::Numerical(format!(
            "Cayley transform inversion residual {residual:e} exceeds {INVERSION_RESIDUAL_TOL:e}"
        )));
    }
    Ok(theta)
}

/// Collects per-group blocks into a block-diagonal reflection matrix.
pub fn assemble_reflection(blocks: Vec<DMatrix<C64>>) -> Result<ScatteringMatrix> {
    check_square_blocks(&blocks)?;
    Ok(ScatteringMatrix { blocks })
}

/// Draws `K` independent reactance blocks: i.i.d. `N(0, Z0^2)` entries,
/// symmetrized as `(A + A^T) / 2`.
pub fn random_reactance<R: Rng + ?Sized>(config: &BdRisConfig, rng: &mut R) -> ReactanceMatrix {
    let n0 = config.group_size();
    let normal = Normal::new(0.0, config.reference_impedance()).expect("positive std dev");
    let blocks = (0..config.n_groups())
        .map(|_| {
            let a = DMatrix::<f64>::from_fn(n0, n0, |_, _| normal.sample(rng));
            (&a + a.transpose()) * 0.5
        })
        .collect();
    ReactanceMatrix { blocks }
}

/// Random physically valid reflection matrix.
pub fn random_scattering<R: Rng + ?Sized>(
    config: &BdRisConfig,
    rng: &mut R,
) -> Result<ScatteringMatrix> {
    random_reactance(config, rng).to_scattering(config.reference_impedance())
}

/// Pruned vectorization `[1; vec(Theta_1*); ...]`, column-major within blocks.
pub fn vectorize_trp(theta: &ScatteringMatrix) -> TrpVector {
    let n0 = theta.group_size();
    let mut entries = Vec::with_capacity(n0 * theta.n_elements() + 1);
    entries.push(C64::new(1.0, 0.0));
    for block in &theta.blocks {
        // nalgebra storage is column-major
        entries.extend(block.iter().map(|z| z.conj()));
    }
    TrpVector { entries }
}

pub fn validate_scattering(theta: &ScatteringMatrix, tol: f64) -> ValidationReport {
    let mut max_unitarity_residual = 0.0f64;
    let mut max_symmetry_residual = 0.0f64;
    for block in &theta.blocks {
        let n0 = block.nrows();
        let gram = block.adjoint() * block;
        let unitarity = (gram - DMatrix::<C64>::identity(n0, n0)).norm();
        let symmetry = (block - block.transpose()).norm();
        // NaN residuals must fail
        max_unitarity_residual = if unitarity.is_nan() { f64::NAN } else { max_unitarity_residual.max(unitarity) };
        max_symmetry_residual = if symmetry.is_nan() { f64::NAN } else { max_symmetry_residual.max(symmetry) };
    }
    ValidationReport {
        max_unitarity_residual,
        max_symmetry_residual,
        passed: max_unitarity_residual <= tol && max_symmetry_residual <= tol,
    }
}

fn check_square_blocks<T: nalgebra::Scalar>(blocks: &[DMatrix<T>]) -> Result<usize> {
    let first = blocks
        .first()
        .ok_or_else(|| Error::invalid("at least one block is required"))?;
    let n0 = first.nrows();
    if n0 == 0 {
        return Err(Error::invalid("blocks must be non-empty"));
    }
    for (k, b) in blocks.iter().enumerate() {
        if b.nrows() != n0 || b.ncols() != n0 {
            return Err(Error::invalid(format!(
                "block {k} is {}x{}, expected {n0}x{n0}",
                b.nrows(),
                b.ncols()
            )));
        }
    }
    Ok(n0)
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    if !m.is_square() {
        return false;
    }
    let n = m.nrows();
    (0..n).all(|i| (0..i).all(|j| m[(i, j)] == m[(j, i)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn cayley_scalar_cases() {
        let theta = cayley_transform(&DMatrix::from_element(1, 1, 0.0), 50.0).unwrap();
        assert!((theta[(0, 0)] - c(-1.0, 0.0)).norm() < 1e-15);

        let theta = cayley_transform(&DMatrix::from_element(1, 1, 50.0), 50.0).unwrap();
        assert!((theta[(0, 0)] - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn cayley_matches_direct_inverse() {
        // oracle: explicit inverse via the 2x2 adjugate formula
        let x = DMatrix::from_row_slice(2, 2, &[120.0, -35.5, -35.5, -180.0]);
        let z0 = 50.0;
        let a = [c(z0, 120.0), c(0.0, -35.5), c(0.0, -35.5), c(z0, -180.0)];
        let b = [c(-z0, 120.0), c(0.0, -35.5), c(0.0, -35.5), c(-z0, -180.0)];
        let det = a[0] * a[3] - a[1] * a[2];
        let inv = [a[3] / det, -a[1] / det, -a[2] / det, a[0] / det];
        let expected = [
            inv[0] * b[0] + inv[1] * b[2],
            inv[0] * b[1] + inv[1] * b[3],
            inv[2] * b[0] + inv[3] * b[2],
            inv[2] * b[1] + inv[3] * b[3],
        ];
        let theta = cayley_transform(&x, z0).unwrap();
        for (idx, e) in expected.iter().enumerate() {
            assert!((theta[(idx / 2, idx % 2)] - e).norm() < 1e-14);
        }
        let report = validate_scattering(&assemble_reflection(vec![theta]).unwrap(), SCATTERING_TOL);
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn cayley_rejects_bad_input() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(cayley_transform(&x, 50.0), Err(Error::InvalidInput(_))));
        let x = DMatrix::from_element(1, 1, 1.0);
        assert!(matches!(cayley_transform(&x, 0.0), Err(Error::InvalidInput(_))));
        let x = DMatrix::from_element(1, 1, f64::NAN);
        assert!(cayley_transform(&x, 50.0).is_err());
    }

    #[test]
    fn config_rejects_non_dividing_group() {
        assert!(BdRisConfig::new(6, 4).is_err());
        assert!(BdRisConfig::new(0, 1).is_err());
        assert!(BdRisConfig::with_reference_impedance(4, 2, -1.0).is_err());
        let cfg = BdRisConfig::new(16, 4).unwrap();
        assert_eq!(cfg.n_groups(), 4);
        assert_eq!(cfg.trp_len(), 65);
    }

    #[test]
    fn assemble_diagonal_and_single_group() {
        let theta = assemble_reflection(vec![
            DMatrix::from_element(1, 1, c(-1.0, 0.0)),
            DMatrix::from_element(1, 1, c(0.0, 1.0)),
        ])
        .unwrap();
        let dense = theta.to_dense();
        assert_eq!(dense, DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(-1.0, 0.0), c(0.0, 1.0)])));

        let block = DMatrix::from_fn(4, 4, |i, j| c(i as f64, j as f64));
        let theta = assemble_reflection(vec![block.clone()]).unwrap();
        assert_eq!(theta.to_dense(), block);
    }

    #[test]
    fn assemble_zeroes_off_block_entries() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = BdRisConfig::new(6, 2).unwrap();
        let dense = random_scattering(&cfg, &mut rng).unwrap().to_dense();
        for i in 0..6 {
            for j in 0..6 {
                if i / 2 != j / 2 {
                    assert_eq!(dense[(i, j)], C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn assemble_rejects_mismatched_blocks() {
        let err = assemble_reflection(vec![
            DMatrix::from_element(1, 1, c(1.0, 0.0)),
            DMatrix::from_element(2, 2, c(1.0, 0.0)),
        ]);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
        assert!(assemble_reflection(vec![]).is_err());
    }

    #[test]
    fn random_reactance_is_symmetric_and_deterministic() {
        let cfg = BdRisConfig::new(4, 2).unwrap();
        let a = random_reactance(&cfg, &mut ChaCha8Rng::seed_from_u64(11));
        let b = random_reactance(&cfg, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a, b);
        assert_eq!(a.blocks().len(), 2);
        for block in a.blocks() {
            assert_eq!(block, &block.transpose());
        }
    }

    #[test]
    fn random_reactance_sweep_validates() {
        let cfg = BdRisConfig::new(4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let theta = random_scattering(&cfg, &mut rng).unwrap();
            assert!(validate_scattering(&theta, SCATTERING_TOL).passed);
        }
    }

    #[test]
    fn vectorize_conjugates_in_column_major_order() {
        let theta = assemble_reflection(vec![
            DMatrix::from_element(1, 1, c(-1.0, 0.0)),
            DMatrix::from_element(1, 1, c(0.0, 1.0)),
        ])
        .unwrap();
        let v = vectorize_trp(&theta);
        assert_eq!(v.entries(), &[c(1.0, 0.0), c(-1.0, 0.0), c(0.0, -1.0)]);

        let block = DMatrix::from_row_slice(2, 2, &[c(1.0, 1.0), c(2.0, 2.0), c(3.0, 3.0), c(4.0, 4.0)]);
        let v = vectorize_trp(&assemble_reflection(vec![block]).unwrap());
        assert_eq!(
            v.entries(),
            &[c(1.0, 0.0), c(1.0, -1.0), c(3.0, -3.0), c(2.0, -2.0), c(4.0, -4.0)]
        );
    }

    #[test]
    fn vectorize_identity_is_real_zero_one() {
        let cfg = BdRisConfig::new(8, 4).unwrap();
        let v = vectorize_trp(&ScatteringMatrix::scaled_identity(&cfg, c(1.0, 0.0)));
        assert_eq!(v.len(), cfg.trp_len());
        for z in v.entries() {
            assert_eq!(z.im, 0.0);
            assert!(z.re == 0.0 || z.re == 1.0);
        }
        assert_eq!(v.norm_sqr(), 9.0);
    }

    #[test]
    fn vectorized_norm_is_n_plus_one() {
        let cfg = BdRisConfig::new(16, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let v = vectorize_trp(&random_scattering(&cfg, &mut rng).unwrap());
            assert_eq!(v.len(), 65);
            assert!((v.norm_sqr() - 17.0).abs() < 1e-9);
        }
    }

    #[test]
    fn trp_round_trips_to_scattering() {
        let cfg = BdRisConfig::new(8, 2).unwrap();
        let theta = random_scattering(&cfg, &mut ChaCha8Rng::seed_from_u64(23)).unwrap();
        let back = vectorize_trp(&theta).to_scattering(&cfg).unwrap();
        assert_eq!(back, theta);
        assert!(TrpVector::from_entries(vec![c(0.5, 0.0)]).is_err());
    }

    #[test]
    fn validation_flags_non_unitary_and_asymmetric_blocks() {
        let theta = assemble_reflection(vec![DMatrix::from_row_slice(
            2,
            2,
            &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)],
        )])
        .unwrap();
        let report = validate_scattering(&theta, SCATTERING_TOL);
        assert!(!report.passed);
        assert!(report.max_unitarity_residual >= 3.0);

        let rotation = assemble_reflection(vec![DMatrix::from_row_slice(
            2,
            2,
            &[c(0.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        )])
        .unwrap();
        let report = validate_scattering(&rotation, SCATTERING_TOL);
        assert!(!report.passed);
        assert!(report.max_unitarity_residual < 1e-15);
        assert!(report.max_symmetry_residual > 2.0);
    }

    #[test]
    fn conventional_ris_has_unit_modulus() {
        let cfg = BdRisConfig::new(16, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let theta = random_scattering(&cfg, &mut rng).unwrap();
        for block in theta.blocks() {
            assert!((block[(0, 0)].norm() - 1.0).abs() < 1e-12);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn symmetric_block(n0: usize) -> impl Strategy<Value = DMatrix<f64>> {
            prop::collection::vec(-200.0f64..200.0, n0 * n0).prop_map(move |raw| {
                let a = DMatrix::from_vec(n0, n0, raw);
                (&a + a.transpose()) * 0.5
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]

            #[test]
            fn cayley_output_is_unitary_and_symmetric(
                x in (1usize..=5).prop_flat_map(symmetric_block),
                z0 in 1.0f64..200.0,
            ) {
                let theta = cayley_transform(&x, z0).unwrap();
                let report = validate_scattering(&assemble_reflection(vec![theta]).unwrap(), SCATTERING_TOL);
                prop_assert!(report.passed, "{:?}", report);
            }

            #[test]
            fn vectorization_preserves_energy(seed in any::<u64>(), n0 in prop::sample::select(vec![1usize, 2, 4])) {
                let cfg = BdRisConfig::new(8, n0).unwrap();
                let theta = random_scattering(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
                let v = vectorize_trp(&theta);
                prop_assert!((v.norm_sqr() - 9.0).abs() < 1e-9);
            }
        }
    }
}
