//! Value types for truncated Fock-space states.
//!
//! Single- and two-mode pure states and density operators, tensor products,
//! partial traces, normalization, and truncation-health checks. Two-mode
//! states use one fixed flat-index convention everywhere: mode 1 is the
//! major index, so `|i>_1 |j>_2` sits at flat index `i * dim_2 + j`. All
//! contraction code in the crate assumes (and asserts) this layout.
//!
//! States are immutable after construction and every operation is a pure
//! function, so values can be shared freely across threads.

use nalgebra::{DMatrix, DVector};

use crate::{C64, Result, SimError};

/// Hermiticity tolerance enforced on every density operator.
pub const HERMITICITY_TOL: f64 = 1e-10;

/// Numerical PSD tolerance: eigenvalues above `-PSD_TOL` count as nonnegative.
pub const PSD_TOL: f64 = 1e-9;

/// Truncation policy for one mode: `dim` Fock levels `0..dim-1` plus a guard
/// band used to detect population leaking toward the cutoff.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Truncation {
    /// Number of retained Fock levels.
    pub dim: usize,
    /// Fraction of the highest levels treated as the guard band.
    pub guard_fraction: f64,
    /// Maximum guard-band population of a healthy state.
    pub tail_tol: f64,
}

impl Truncation {
    /// Default guard policy: top 10% of levels, 1e-8 tail tolerance.
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 2, "truncation needs dim >= 2, got {dim}");
        Truncation { dim, guard_fraction: 0.1, tail_tol: 1e-8 }
    }

    /// Custom guard policy.
    pub fn with_guard(dim: usize, guard_fraction: f64, tail_tol: f64) -> Self {
        assert!(dim >= 2, "truncation needs dim >= 2, got {dim}");
        assert!(
            guard_fraction > 0.0 && guard_fraction < 1.0,
            "guard fraction must lie in (0,1), got {guard_fraction}"
        );
        assert!(tail_tol > 0.0, "tail tolerance must be positive");
        Truncation { dim, guard_fraction, tail_tol }
    }

    /// First Fock level belonging to the guard band.
    pub fn guard_start(&self) -> usize {
        let band = (self.guard_fraction * self.dim as f64).ceil() as usize;
        self.dim - band.clamp(1, self.dim - 1)
    }
}

/// Truncation-health report: total population found in the guard band.
#[derive(Clone, Copy, Debug)]
pub struct HealthReport {
    pub guard_population: f64,
    pub healthy: bool,
}

fn health_from_populations(pops: &[f64], trunc: &Truncation) -> HealthReport {
    let guard_population: f64 = pops[trunc.guard_start()..].iter().sum();
    HealthReport { guard_population, healthy: guard_population <= trunc.tail_tol }
}

/// Which mode of a two-mode state an operation addresses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    One,
    Two,
}

/// Single-mode pure state: complex amplitudes over Fock levels `0..dim-1`.
///
/// The squared norm may be below one; heralding returns sub-normalized
/// states whose norm carries the success probability.
#[derive(Clone, Debug)]
pub struct PureState {
    trunc: Truncation,
    amps: DVector<C64>,
}

impl PureState {
    pub fn new(trunc: Truncation, amps: DVector<C64>) -> Self {
        assert_eq!(amps.len(), trunc.dim, "amplitude length must equal dim");
        let n2 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>();
        assert!(n2.is_finite() && n2 <= 1.0 + 1e-9, "pure-state norm^2 out of range: {n2}");
        PureState { trunc, amps }
    }

    /// Vacuum state `|0>`.
    pub fn vacuum(trunc: Truncation) -> Self {
        let mut amps = DVector::zeros(trunc.dim);
        amps[0] = C64::new(1.0, 0.0);
        PureState { trunc, amps }
    }

    /// Fock state `|n>`.
    pub fn fock(trunc: Truncation, n: usize) -> Self {
        assert!(n < trunc.dim, "Fock level {n} outside dim {}", trunc.dim);
        let mut amps = DVector::zeros(trunc.dim);
        amps[n] = C64::new(1.0, 0.0);
        PureState { trunc, amps }
    }

    pub fn trunc(&self) -> &Truncation {
        &self.trunc
    }

    pub fn dim(&self) -> usize {
        self.trunc.dim
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Per-level populations `|c_n|^2`.
    pub fn populations(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Mean photon number (of the normalized state this represents).
    pub fn mean_photon_number(&self) -> f64 {
        let n2 = self.norm_sqr();
        self.amps
            .iter()
            .enumerate()
            .map(|(n, a)| n as f64 * a.norm_sqr())
            .sum::<f64>()
            / n2
    }

    /// Normalize, returning the normalized state and the squared norm.
    pub fn normalize(&self) -> Result<(PureState, f64)> {
        let n2 = self.norm_sqr();
        if n2 <= 0.0 {
            return Err(SimError::ZeroProbabilityHerald("pure state has zero norm".into()));
        }
        let scale = C64::new(1.0 / n2.sqrt(), 0.0);
        Ok((PureState { trunc: self.trunc, amps: &self.amps * scale }, n2))
    }

    pub fn truncation_health(&self) -> HealthReport {
        let pops = self.populations();
        let total: f64 = pops.iter().sum();
        let scaled: Vec<f64> = if total > 0.0 {
            pops.iter().map(|p| p / total).collect()
        } else {
            pops
        };
        health_from_populations(&scaled, &self.trunc)
    }

    /// Outer product `|psi><psi|`.
    pub fn to_density(&self) -> DensityOperator {
        let mat = &self.amps * self.amps.adjoint();
        DensityOperator::new(self.trunc, mat)
    }

    pub fn inner(&self, other: &PureState) -> C64 {
        assert_eq!(self.dim(), other.dim(), "inner product needs equal dims");
        self.amps.dotc(&other.amps)
    }
}

/// Two-mode pure state stored as the amplitude matrix `Psi[i, j]`, mode 1 on
/// rows. Flattening row-major reproduces the crate-wide flat index
/// `i * dim_2 + j`.
#[derive(Clone, Debug)]
pub struct TwoModePureState {
    trunc_a: Truncation,
    trunc_b: Truncation,
    amps: DMatrix<C64>,
}

impl TwoModePureState {
    pub fn new(trunc_a: Truncation, trunc_b: Truncation, amps: DMatrix<C64>) -> Self {
        assert_eq!(amps.nrows(), trunc_a.dim);
        assert_eq!(amps.ncols(), trunc_b.dim);
        let n2 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>();
        assert!(n2.is_finite() && n2 <= 1.0 + 1e-9, "two-mode norm^2 out of range: {n2}");
        TwoModePureState { trunc_a, trunc_b, amps }
    }

    pub fn trunc(&self, mode: Mode) -> &Truncation {
        match mode {
            Mode::One => &self.trunc_a,
            Mode::Two => &self.trunc_b,
        }
    }

    pub fn amplitudes(&self) -> &DMatrix<C64> {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&self) -> Result<(TwoModePureState, f64)> {
        let n2 = self.norm_sqr();
        if n2 <= 0.0 {
            return Err(SimError::ZeroProbabilityHerald("two-mode state has zero norm".into()));
        }
        let scale = C64::new(1.0 / n2.sqrt(), 0.0);
        Ok((
            TwoModePureState {
                trunc_a: self.trunc_a,
                trunc_b: self.trunc_b,
                amps: &self.amps * scale,
            },
            n2,
        ))
    }

    /// Marginal populations of one mode.
    pub fn marginal_populations(&self, mode: Mode) -> Vec<f64> {
        let (da, db) = (self.trunc_a.dim, self.trunc_b.dim);
        match mode {
            Mode::One => (0..da)
                .map(|i| (0..db).map(|j| self.amps[(i, j)].norm_sqr()).sum())
                .collect(),
            Mode::Two => (0..db)
                .map(|j| (0..da).map(|i| self.amps[(i, j)].norm_sqr()).sum())
                .collect(),
        }
    }

    /// Health of one mode's marginal.
    pub fn truncation_health(&self, mode: Mode) -> HealthReport {
        let mut pops = self.marginal_populations(mode);
        let total: f64 = pops.iter().sum();
        if total > 0.0 {
            for p in &mut pops {
                *p /= total;
            }
        }
        health_from_populations(&pops, self.trunc(mode))
    }

    /// Reduced density operator of the kept mode (traces out the other).
    pub fn reduced_density(&self, keep: Mode) -> DensityOperator {
        match keep {
            Mode::One => {
                let mat = &self.amps * self.amps.adjoint();
                DensityOperator::new(self.trunc_a, mat)
            }
            Mode::Two => {
                let mat = self.amps.adjoint() * &self.amps;
                // rho_2[j,j'] = sum_i Psi[i,j] conj(Psi[i,j']) = conj(adjoint product)
                DensityOperator::new(self.trunc_b, mat.map(|z| z.conj()))
            }
        }
    }

    /// Densify into the flat two-mode density operator (small dims only).
    pub fn to_density(&self) -> TwoModeDensityOperator {
        let d = self.trunc_a.dim * self.trunc_b.dim;
        let flat = DVector::from_iterator(d, self.amps.transpose().iter().copied());
        // amps.transpose().iter() walks the transposed matrix column-major,
        // i.e. the original row-major order: flat[i*dim_b + j] = Psi[i,j].
        let mat = &flat * flat.adjoint();
        TwoModeDensityOperator::new(self.trunc_a, self.trunc_b, mat)
    }
}

/// Tensor product of two single-mode pure states, mode 1 major.
pub fn tensor_pure(a: &PureState, b: &PureState) -> TwoModePureState {
    let amps = &a.amps * b.amps.transpose();
    TwoModePureState { trunc_a: a.trunc, trunc_b: b.trunc, amps }
}

/// Single-mode density operator: Hermitian, PSD (within tolerance), trace <= 1.
///
/// Construction re-Hermitizes and asserts the deviation was inside
/// [`HERMITICITY_TOL`]; PSD is checked by [`DensityOperator::validate_psd`]
/// (eigendecomposition) where tests need it rather than on every operation.
#[derive(Clone, Debug)]
pub struct DensityOperator {
    trunc: Truncation,
    mat: DMatrix<C64>,
}

impl DensityOperator {
    pub fn new(trunc: Truncation, mat: DMatrix<C64>) -> Self {
        assert_eq!(mat.nrows(), trunc.dim);
        assert_eq!(mat.ncols(), trunc.dim);
        let mat = hermitize(mat);
        let tr = trace_re(&mat);
        assert!(tr.is_finite() && tr <= 1.0 + 1e-6, "density trace out of range: {tr}");
        DensityOperator { trunc, mat }
    }

    pub fn vacuum(trunc: Truncation) -> Self {
        PureState::vacuum(trunc).to_density()
    }

    pub fn trunc(&self) -> &Truncation {
        &self.trunc
    }

    pub fn dim(&self) -> usize {
        self.trunc.dim
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn trace(&self) -> f64 {
        trace_re(&self.mat)
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.trunc.dim).map(|n| self.mat[(n, n)].re).collect()
    }

    pub fn mean_photon_number(&self) -> f64 {
        let tr = self.trace();
        self.populations()
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum::<f64>()
            / tr
    }

    pub fn normalize(&self) -> Result<(DensityOperator, f64)> {
        let tr = self.trace();
        if tr <= 0.0 {
            return Err(SimError::ZeroProbabilityHerald("density operator has zero trace".into()));
        }
        let mat = self.mat.map(|z| z / tr);
        Ok((DensityOperator { trunc: self.trunc, mat }, tr))
    }

    pub fn truncation_health(&self) -> HealthReport {
        let mut pops = self.populations();
        let total: f64 = pops.iter().sum();
        if total > 0.0 {
            for p in &mut pops {
                *p /= total;
            }
        }
        health_from_populations(&pops, &self.trunc)
    }

    /// Eigenvalue check: smallest eigenvalue must exceed `-PSD_TOL`.
    pub fn validate_psd(&self) -> (bool, f64) {
        let eig = self.mat.clone().symmetric_eigen();
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        (min >= -PSD_TOL, min)
    }

    /// Factor into weighted pure branches `rho = sum_k w_k u_k u_k+`
    /// (unit vectors `u_k`) by pivoted Cholesky, stopping once the residual
    /// trace drops below `rank_tol` of the total. The branches are not
    /// eigenvectors, but any such decomposition is equivalent for the staged
    /// contractions that consume it, and the pivoted factorization is robust
    /// on the nearly-rank-deficient densities heralding produces.
    pub fn factor(&self, rank_tol: f64) -> Vec<(f64, DVector<C64>)> {
        let d = self.trunc.dim;
        let mut resid = self.mat.clone();
        let total: f64 = self.trace().max(f64::MIN_POSITIVE);
        let mut out = Vec::new();
        for _ in 0..d {
            let (mut pivot, mut best) = (0usize, 0.0f64);
            let mut remaining = 0.0;
            for i in 0..d {
                let di = resid[(i, i)].re;
                remaining += di;
                if di > best {
                    best = di;
                    pivot = i;
                }
            }
            if remaining <= rank_tol * total || best <= 0.0 {
                break;
            }
            let col = resid.column(pivot).into_owned();
            let inv_root = 1.0 / best.sqrt();
            let l = col.map(|z| z * inv_root);
            for r in 0..d {
                let lr = l[r];
                if lr.norm_sqr() == 0.0 {
                    continue;
                }
                for c in 0..d {
                    resid[(r, c)] -= lr * l[c].conj();
                }
            }
            let w: f64 = l.iter().map(|z| z.norm_sqr()).sum();
            if w > 0.0 {
                let unit = l.map(|z| z / w.sqrt());
                out.push((w, unit));
            }
        }
        out
    }
}

/// Two-mode density operator on the flat `(i*dim_2 + j)` basis.
#[derive(Clone, Debug)]
pub struct TwoModeDensityOperator {
    trunc_a: Truncation,
    trunc_b: Truncation,
    mat: DMatrix<C64>,
}

impl TwoModeDensityOperator {
    pub fn new(trunc_a: Truncation, trunc_b: Truncation, mat: DMatrix<C64>) -> Self {
        let d = trunc_a.dim * trunc_b.dim;
        assert_eq!(mat.nrows(), d);
        assert_eq!(mat.ncols(), d);
        let mat = hermitize(mat);
        let tr = trace_re(&mat);
        assert!(tr.is_finite() && tr <= 1.0 + 1e-6, "two-mode trace out of range: {tr}");
        TwoModeDensityOperator { trunc_a, trunc_b, mat }
    }

    pub fn trunc(&self, mode: Mode) -> &Truncation {
        match mode {
            Mode::One => &self.trunc_a,
            Mode::Two => &self.trunc_b,
        }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn trace(&self) -> f64 {
        trace_re(&self.mat)
    }

    pub fn normalize(&self) -> Result<(TwoModeDensityOperator, f64)> {
        let tr = self.trace();
        if tr <= 0.0 {
            return Err(SimError::ZeroProbabilityHerald("two-mode density has zero trace".into()));
        }
        let mat = self.mat.map(|z| z / tr);
        Ok((TwoModeDensityOperator { trunc_a: self.trunc_a, trunc_b: self.trunc_b, mat }, tr))
    }

    /// Partial trace keeping the requested mode.
    pub fn partial_trace(&self, keep: Mode) -> DensityOperator {
        let (da, db) = (self.trunc_a.dim, self.trunc_b.dim);
        match keep {
            Mode::One => {
                let mut out = DMatrix::<C64>::zeros(da, da);
                for i in 0..da {
                    for ip in 0..da {
                        let mut acc = C64::new(0.0, 0.0);
                        for j in 0..db {
                            acc += self.mat[(i * db + j, ip * db + j)];
                        }
                        out[(i, ip)] = acc;
                    }
                }
                DensityOperator::new(self.trunc_a, out)
            }
            Mode::Two => {
                let mut out = DMatrix::<C64>::zeros(db, db);
                for j in 0..db {
                    for jp in 0..db {
                        let mut acc = C64::new(0.0, 0.0);
                        for i in 0..da {
                            acc += self.mat[(i * db + j, i * db + jp)];
                        }
                        out[(j, jp)] = acc;
                    }
                }
                DensityOperator::new(self.trunc_b, out)
            }
        }
    }
}

/// Tensor product of two single-mode density operators, mode 1 major.
pub fn tensor_density(a: &DensityOperator, b: &DensityOperator) -> TwoModeDensityOperator {
    let mat = a.mat.kronecker(&b.mat);
    TwoModeDensityOperator { trunc_a: a.trunc, trunc_b: b.trunc, mat }
}

fn hermitize(mat: DMatrix<C64>) -> DMatrix<C64> {
    let dev = (&mat - mat.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(
        dev <= HERMITICITY_TOL,
        "density operator drifted from Hermitian by {dev:.3e} (tol {HERMITICITY_TOL:.0e})"
    );
    let adj = mat.adjoint();
    (mat + adj).map(|z| z * 0.5)
}

fn trace_re(mat: &DMatrix<C64>) -> f64 {
    (0..mat.nrows()).map(|i| mat[(i, i)].re).sum()
}
