//! Builders for mode operators: ladder operators, every Gaussian unitary,
//! the cubic-phase unitary, and the closed-form heralded OPA Kraus operator.
//!
//! All unitaries here are exponentials of anti-Hermitian generators. The
//! generic engine is [`expm_skew`] (eigendecomposition of the Hermitian
//! `-iG`). The specialized builders exploit the band structure of the
//! Gaussian generators instead: a displacement, squeeze, beamsplitter or
//! two-mode squeeze generator decomposes into independent tridiagonal
//! antisymmetric chains, each of which is conjugate (by `diag(i^m)`) to `-i`
//! times a real symmetric tridiagonal matrix. One real eigendecomposition of
//! the unit-strength chain then yields the unitary for *any* parameter value
//! through a phase twist, which is what makes optimizer loops and parameter
//! sweeps cheap. Both routes are tested against each other.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::fock::{HealthReport, PureState, Truncation, TwoModePureState};
use crate::{C64, Result, SimError};

/// Densified two-mode operators are reference implementations; above this
/// single-mode dimension they are refused (the matrix would be dim^2 x dim^2).
pub const DENSE_TWO_MODE_LIMIT: usize = 64;

/// Specification of a unitary to build.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum UnitarySpec {
    /// S(r) = exp[(r/2)(a^2 - a+^2)]; r > 0 squeezes the x quadrature.
    Squeeze(f64),
    /// D(alpha) = exp[alpha a+ - alpha* a].
    Displace(C64),
    /// BS(tau) = exp[acos(sqrt(tau)) (a+ b - a b+)], transmissivity tau.
    Beamsplitter(f64),
    /// U_OPA(kappa) = exp[(kappa/2)(a1 a2 - a1+ a2+)].
    TwoModeSqueeze(f64),
    /// exp[i gamma x^3] with x = a + a+.
    CubicPhase(f64),
}

impl UnitarySpec {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            UnitarySpec::Squeeze(r) => r.is_finite(),
            UnitarySpec::Displace(a) => a.re.is_finite() && a.im.is_finite(),
            UnitarySpec::Beamsplitter(tau) => tau.is_finite() && (0.0..=1.0).contains(tau),
            UnitarySpec::TwoModeSqueeze(k) => k.is_finite() && *k >= 0.0,
            UnitarySpec::CubicPhase(g) => g.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidParameter(format!("unitary spec {self:?}")))
        }
    }
}

/// Dense operator on the truncated single- or two-mode space.
#[derive(Clone, Debug)]
pub struct ModeOperator {
    modes: u8,
    trunc: Truncation,
    matrix: DMatrix<C64>,
}

impl ModeOperator {
    pub fn single(trunc: Truncation, matrix: DMatrix<C64>) -> Self {
        assert_eq!(matrix.nrows(), trunc.dim);
        assert_eq!(matrix.ncols(), trunc.dim);
        ModeOperator { modes: 1, trunc, matrix }
    }

    pub fn two_mode(trunc: Truncation, matrix: DMatrix<C64>) -> Self {
        let d = trunc.dim * trunc.dim;
        assert_eq!(matrix.nrows(), d);
        assert_eq!(matrix.ncols(), d);
        ModeOperator { modes: 2, trunc, matrix }
    }

    pub fn modes(&self) -> u8 {
        self.modes
    }

    pub fn trunc(&self) -> &Truncation {
        &self.trunc
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn adjoint(&self) -> ModeOperator {
        ModeOperator { modes: self.modes, trunc: self.trunc, matrix: self.matrix.adjoint() }
    }

    /// Apply to a single-mode pure state.
    pub fn apply(&self, psi: &PureState) -> PureState {
        assert_eq!(self.modes, 1);
        assert_eq!(self.trunc.dim, psi.dim());
        let amps = &self.matrix * psi.amplitudes();
        PureState::new(*psi.trunc(), amps)
    }

    /// Apply to a two-mode pure state via its flat index.
    pub fn apply_joint(&self, psi: &TwoModePureState) -> TwoModePureState {
        assert_eq!(self.modes, 2);
        let (ta, tb) = (*psi.trunc(crate::fock::Mode::One), *psi.trunc(crate::fock::Mode::Two));
        assert_eq!(self.trunc.dim, ta.dim);
        assert_eq!(self.trunc.dim, tb.dim);
        let (da, db) = (ta.dim, tb.dim);
        let flat = DVector::from_iterator(da * db, psi.amplitudes().transpose().iter().copied());
        let out = &self.matrix * flat;
        let mut amps = DMatrix::zeros(da, db);
        for i in 0..da {
            for j in 0..db {
                amps[(i, j)] = out[i * db + j];
            }
        }
        TwoModePureState::new(ta, tb, amps)
    }

    /// Sandwich a density operator: `M rho M+`.
    pub fn sandwich(&self, rho: &crate::fock::DensityOperator) -> crate::fock::DensityOperator {
        assert_eq!(self.modes, 1);
        assert_eq!(self.trunc.dim, rho.dim());
        let m = &self.matrix * rho.matrix() * self.matrix.adjoint();
        crate::fock::DensityOperator::new(*rho.trunc(), m)
    }

    /// Max deviation of `U+U` from identity on the non-guard subspace.
    pub fn unitarity_defect(&self) -> f64 {
        let gram = self.matrix.adjoint() * &self.matrix;
        let g = self.trunc.guard_start();
        let mut worst = 0.0f64;
        let within = |idx: usize| -> bool {
            if self.modes == 1 {
                idx < g
            } else {
                let d = self.trunc.dim;
                idx / d < g && idx % d < g
            }
        };
        for r in 0..gram.nrows() {
            if !within(r) {
                continue;
            }
            for c in 0..gram.ncols() {
                if !within(c) {
                    continue;
                }
                let expect = if r == c { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                worst = worst.max((gram[(r, c)] - expect).norm());
            }
        }
        worst
    }

    /// Guard-band health of `U|0>` (or `U|0,0>`), the spec's cheap check
    /// that the truncation supports this operator's intended use.
    pub fn health_on_vacuum(&self) -> HealthReport {
        if self.modes == 1 {
            self.apply(&PureState::vacuum(self.trunc)).truncation_health()
        } else {
            let v = PureState::vacuum(self.trunc);
            let joint = crate::fock::tensor_pure(&v, &v);
            let out = self.apply_joint(&joint);
            let h1 = out.truncation_health(crate::fock::Mode::One);
            let h2 = out.truncation_health(crate::fock::Mode::Two);
            HealthReport {
                guard_population: h1.guard_population.max(h2.guard_population),
                healthy: h1.healthy && h2.healthy,
            }
        }
    }
}

/// Annihilation operator `a` with `a|n> = sqrt(n)|n-1>`.
pub fn ladder(trunc: Truncation) -> ModeOperator {
    let d = trunc.dim;
    let mut m = DMatrix::<C64>::zeros(d, d);
    for n in 1..d {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    ModeOperator::single(trunc, m)
}

/// `x = a + a+` as a real symmetric matrix.
pub fn position_matrix(dim: usize) -> DMatrix<f64> {
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for n in 0..dim - 1 {
        let v = ((n + 1) as f64).sqrt();
        m[(n, n + 1)] = v;
        m[(n + 1, n)] = v;
    }
    m
}

/// Generic matrix exponential of an anti-Hermitian generator, via the
/// eigendecomposition of the Hermitian `-iG`.
pub fn expm_skew(generator: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let dev = (generator + generator.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if dev > 1e-10 {
        return Err(SimError::InvalidParameter(format!(
            "generator is not anti-Hermitian (defect {dev:.3e})"
        )));
    }
    let h = generator.map(|z| z * C64::new(0.0, -1.0));
    let h = {
        let adj = h.adjoint();
        (h + adj).map(|z| z * 0.5)
    };
    let eig = h.symmetric_eigen();
    let d = generator.nrows();
    let mut out = DMatrix::<C64>::zeros(d, d);
    // exp(G) = exp(iH) = Q exp(i Lambda) Q+
    let phases: Vec<C64> =
        eig.eigenvalues.iter().map(|&l| C64::new(0.0, l).exp()).collect();
    let mut scaled = eig.eigenvectors.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        for z in col.iter_mut() {
            *z *= phases[k];
        }
    }
    out.gemm(C64::new(1.0, 0.0), &scaled, &eig.eigenvectors.adjoint(), C64::new(0.0, 0.0));
    Ok(out)
}

/// Eigendecomposition of a real symmetric matrix, kept for repeated
/// exponentiation with different parameters.
#[derive(Clone, Debug)]
pub struct RealSymEig {
    pub q: DMatrix<f64>,
    pub lambda: DVector<f64>,
}

impl RealSymEig {
    pub fn new(m: DMatrix<f64>) -> Self {
        let eig = m.symmetric_eigen();
        RealSymEig { q: eig.eigenvectors, lambda: eig.eigenvalues }
    }

    /// `exp(i t M)` as a dense complex matrix.
    pub fn expm_i(&self, t: f64) -> DMatrix<C64> {
        let d = self.q.nrows();
        let mut out = DMatrix::<C64>::zeros(d, d);
        for k in 0..d {
            let ph = C64::new(0.0, t * self.lambda[k]).exp();
            for r in 0..d {
                let qr = self.q[(r, k)];
                if qr == 0.0 {
                    continue;
                }
                for c in 0..d {
                    out[(r, c)] += ph * qr * self.q[(c, k)];
                }
            }
        }
        out
    }

    /// Apply `exp(i t M)` to a complex vector in O(dim^2).
    pub fn apply_expm_i(&self, t: f64, v: &DVector<C64>) -> DVector<C64> {
        let mut w = DVector::<C64>::zeros(v.len());
        // w = Q diag(e^{i t l}) Q^T v
        let mut proj = DVector::<C64>::zeros(v.len());
        for k in 0..self.q.ncols() {
            let mut acc = C64::new(0.0, 0.0);
            for r in 0..v.len() {
                acc += self.q[(r, k)] * v[r];
            }
            proj[k] = acc * C64::new(0.0, t * self.lambda[k]).exp();
        }
        for r in 0..v.len() {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..self.q.ncols() {
                acc += self.q[(r, k)] * proj[k];
            }
            w[r] = acc;
        }
        w
    }
}

/// Exponential machinery for one tridiagonal antisymmetric chain.
///
/// The chain generator `G0` has `G0[m+1, m] = g[m] = -G0[m, m+1]` in chain
/// coordinates; `fock_index` maps chain coordinates onto Fock levels.
/// `exp(t G0)` is recovered from one eigendecomposition of the conjugated
/// real symmetric tridiagonal matrix, for any `t`.
#[derive(Clone, Debug)]
pub struct ChainEig {
    fock_index: Vec<usize>,
    eig: RealSymEig,
}

const I_POW: [C64; 4] = [
    C64::new(1.0, 0.0),
    C64::new(0.0, 1.0),
    C64::new(-1.0, 0.0),
    C64::new(0.0, -1.0),
];

impl ChainEig {
    /// Build from unit-strength sub-diagonal couplings `g` (length s-1) and
    /// the chain-to-Fock index map (length s).
    pub fn new(g: &[f64], fock_index: Vec<usize>) -> Self {
        let s = fock_index.len();
        assert_eq!(g.len() + 1, s);
        // diag(i^m)+ G0 diag(i^m) = -i J with J symmetric tridiagonal.
        let mut j = DMatrix::<f64>::zeros(s, s);
        for m in 0..s - 1 {
            j[(m, m + 1)] = g[m];
            j[(m + 1, m)] = g[m];
        }
        ChainEig { fock_index, eig: RealSymEig::new(j) }
    }

    pub fn len(&self) -> usize {
        self.fock_index.len()
    }

    pub fn fock_index(&self) -> &[usize] {
        &self.fock_index
    }

    /// Scatter `exp(t G0)` into a dense real matrix over the chain.
    pub fn orthogonal(&self, t: f64) -> DMatrix<f64> {
        let s = self.len();
        let q = &self.eig.q;
        // exp(tG0)[r,c] = Re[ i^{r-c} sum_k q[r,k] q[c,k] e^{-i t l_k} ]
        let mut cos_part = DMatrix::<f64>::zeros(s, s);
        let mut sin_part = DMatrix::<f64>::zeros(s, s);
        for k in 0..s {
            let (sn, cs) = (t * self.eig.lambda[k]).sin_cos();
            for r in 0..s {
                let qr = q[(r, k)];
                if qr == 0.0 {
                    continue;
                }
                for c in 0..s {
                    cos_part[(r, c)] += qr * q[(c, k)] * cs;
                    sin_part[(r, c)] += qr * q[(c, k)] * sn;
                }
            }
        }
        let mut out = DMatrix::<f64>::zeros(s, s);
        for r in 0..s {
            for c in 0..s {
                out[(r, c)] = match (4 + r % 4 - c % 4) % 4 {
                    0 => cos_part[(r, c)],
                    1 => sin_part[(r, c)],
                    2 => -cos_part[(r, c)],
                    _ => -sin_part[(r, c)],
                };
            }
        }
        out
    }

    /// Apply `exp(t G0)` to the chain components of a complex vector.
    pub fn apply(&self, t: f64, chain: &mut [C64]) {
        let s = self.len();
        debug_assert_eq!(chain.len(), s);
        let q = &self.eig.q;
        // exp(tG0) = D Q e^{-i t L} Q^T D+ with D = diag(i^m).
        for (m, z) in chain.iter_mut().enumerate() {
            *z *= I_POW[(4 - m % 4) % 4];
        }
        let mut proj = vec![C64::new(0.0, 0.0); s];
        for k in 0..s {
            let mut acc = C64::new(0.0, 0.0);
            for m in 0..s {
                acc += q[(m, k)] * chain[m];
            }
            proj[k] = acc * C64::new(0.0, -t * self.eig.lambda[k]).exp();
        }
        for m in 0..s {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..s {
                acc += q[(m, k)] * proj[k];
            }
            chain[m] = acc * I_POW[m % 4];
        }
    }
}

/// Reusable eigenstructures for the Gaussian unitaries of one truncation:
/// displacements (real and imaginary directions) and squeezes apply in
/// O(dim^2) per parameter value after this one-time O(dim^3) setup.
#[derive(Clone, Debug)]
pub struct GaussianOps {
    trunc: Truncation,
    x_eig: RealSymEig,
    disp_chain: ChainEig,
    squeeze_even: ChainEig,
    squeeze_odd: ChainEig,
}

impl GaussianOps {
    pub fn new(trunc: Truncation) -> Self {
        let d = trunc.dim;
        let x_eig = RealSymEig::new(position_matrix(d));
        // D(c) = exp[c(a+ - a)]: sub-diagonal couplings sqrt(n+1).
        let g: Vec<f64> = (0..d - 1).map(|n| ((n + 1) as f64).sqrt()).collect();
        let disp_chain = ChainEig::new(&g, (0..d).collect());
        // S(r) = exp[(r/2)(a^2 - a+^2)] splits into parity chains with
        // G[m+1, m] = -(1/2) sqrt((f+1)(f+2)) for Fock level f = chain index.
        let even: Vec<usize> = (0..d).step_by(2).collect();
        let odd: Vec<usize> = (1..d).step_by(2).collect();
        let chain_g = |levels: &[usize]| -> Vec<f64> {
            levels
                .windows(2)
                .map(|w| {
                    let f = w[0] as f64;
                    -0.5 * ((f + 1.0) * (f + 2.0)).sqrt()
                })
                .collect()
        };
        let squeeze_even = ChainEig::new(&chain_g(&even), even);
        let squeeze_odd = ChainEig::new(&chain_g(&odd), odd);
        GaussianOps { trunc, x_eig, disp_chain, squeeze_even, squeeze_odd }
    }

    pub fn trunc(&self) -> &Truncation {
        &self.trunc
    }

    /// Apply `D(alpha)` to a vector.
    pub fn apply_displace(&self, alpha: C64, v: &DVector<C64>) -> DVector<C64> {
        let (ar, ai) = (alpha.re, alpha.im);
        // D(ar + i ai) = e^{i ar ai} D(ar) D(i ai); D(i ai) = e^{i ai x}.
        let mut w = if ai != 0.0 { self.x_eig.apply_expm_i(ai, v) } else { v.clone() };
        if ar != 0.0 {
            let mut chain: Vec<C64> = w.iter().copied().collect();
            self.disp_chain.apply(ar, &mut chain);
            w = DVector::from_vec(chain);
        }
        if ar != 0.0 && ai != 0.0 {
            let ph = C64::new(0.0, ar * ai).exp();
            w *= ph;
        }
        w
    }

    /// Apply `S(r)` to a vector.
    pub fn apply_squeeze(&self, r: f64, v: &DVector<C64>) -> DVector<C64> {
        if r == 0.0 {
            return v.clone();
        }
        let mut out = v.clone();
        for chain in [&self.squeeze_even, &self.squeeze_odd] {
            let mut comp: Vec<C64> = chain.fock_index().iter().map(|&f| v[f]).collect();
            chain.apply(r, &mut comp);
            for (m, &f) in chain.fock_index().iter().enumerate() {
                out[f] = comp[m];
            }
        }
        out
    }

    /// Dense `D(alpha)`.
    pub fn displace_matrix(&self, alpha: C64) -> DMatrix<C64> {
        let d = self.trunc.dim;
        let mut m = DMatrix::<C64>::zeros(d, d);
        for c in 0..d {
            let mut e = DVector::<C64>::zeros(d);
            e[c] = C64::new(1.0, 0.0);
            let col = self.apply_displace(alpha, &e);
            m.set_column(c, &col);
        }
        m
    }

    /// Dense `S(r)`.
    pub fn squeeze_matrix(&self, r: f64) -> DMatrix<C64> {
        let d = self.trunc.dim;
        let mut m = DMatrix::<C64>::zeros(d, d);
        for (chain, t) in [(&self.squeeze_even, r), (&self.squeeze_odd, r)] {
            let block = chain.orthogonal(t);
            let idx = chain.fock_index();
            for (mr, &fr) in idx.iter().enumerate() {
                for (mc, &fc) in idx.iter().enumerate() {
                    m[(fr, fc)] = C64::new(block[(mr, mc)], 0.0);
                }
            }
        }
        m
    }

    /// Expectation `<D(alpha)>` on a pure state.
    pub fn displacement_expectation(&self, alpha: C64, psi: &PureState) -> C64 {
        let w = self.apply_displace(alpha, psi.amplitudes());
        psi.amplitudes().dotc(&w)
    }

    /// Expectation `<D(alpha)>` on a density operator, via its spectral
    /// factorization.
    pub fn displacement_expectation_density(
        &self,
        alpha: C64,
        rho: &crate::fock::DensityOperator,
    ) -> C64 {
        let branches = rho.factor(1e-14);
        let mut acc = C64::new(0.0, 0.0);
        for (p, u) in &branches {
            let w = self.apply_displace(alpha, u);
            acc += u.dotc(&w) * *p;
        }
        acc
    }
}

/// Block-diagonal beamsplitter for applying `BS(tau)` to two-mode pure
/// states whose dense `dim^2 x dim^2` form would not fit in memory.
///
/// The generator conserves total photon number `N = n1 + n2`; each block is
/// the exponential of the tridiagonal antisymmetric chain restricted to the
/// truncated anti-diagonal `{|i, N-i>}`. Blocks are the exponential of the
/// *truncated* generator, so applying them agrees with
/// `expm_skew(theta (a+b - ab+))` to machine precision at any dimension.
#[derive(Clone, Debug)]
pub struct BsBlocks {
    dim: usize,
    tau: f64,
    /// Per total photon number N: (first mode-1 index, orthogonal block).
    blocks: Vec<(usize, DMatrix<f64>)>,
}

impl BsBlocks {
    pub fn new(tau: f64, dim: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(SimError::InvalidParameter(format!("transmissivity {tau}")));
        }
        let theta = tau.sqrt().acos();
        let blocks: Vec<(usize, DMatrix<f64>)> = (0..=2 * (dim - 1))
            .into_par_iter()
            .map(|n_tot| {
                let i_min = n_tot.saturating_sub(dim - 1);
                let i_max = n_tot.min(dim - 1);
                let s = i_max - i_min + 1;
                if s == 1 {
                    return (i_min, DMatrix::from_element(1, 1, 1.0));
                }
                // G[i+1, i] = theta sqrt((i+1)(N-i)) from the a+b term.
                let g: Vec<f64> = (i_min..i_max)
                    .map(|i| ((i + 1) as f64 * (n_tot - i) as f64).sqrt())
                    .collect();
                let chain = ChainEig::new(&g, (i_min..=i_max).collect());
                (i_min, chain.orthogonal(theta))
            })
            .collect();
        Ok(BsBlocks { dim, tau, blocks })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Apply to a two-mode pure state (both modes must share `dim`).
    pub fn apply(&self, psi: &TwoModePureState) -> TwoModePureState {
        let ta = *psi.trunc(crate::fock::Mode::One);
        let tb = *psi.trunc(crate::fock::Mode::Two);
        assert_eq!(ta.dim, self.dim, "BsBlocks dim mismatch");
        assert_eq!(tb.dim, self.dim, "BsBlocks needs equal mode dims");
        let a = psi.amplitudes();
        let mut out = DMatrix::<C64>::zeros(self.dim, self.dim);
        for (n_tot, (i_min, block)) in self.blocks.iter().enumerate() {
            let s = block.nrows();
            let mut v = vec![C64::new(0.0, 0.0); s];
            for m in 0..s {
                let i = i_min + m;
                v[m] = a[(i, n_tot - i)];
            }
            for r in 0..s {
                let mut acc = C64::new(0.0, 0.0);
                for c in 0..s {
                    acc += block[(r, c)] * v[c];
                }
                let i = i_min + r;
                out[(i, n_tot - i)] = acc;
            }
        }
        TwoModePureState::new(ta, tb, out)
    }

    /// Apply to the raw amplitude matrix of `psi = u (x) w` given as an
    /// outer product, without forming the input matrix separately.
    pub fn apply_outer(&self, u: &DVector<C64>, w: &DVector<C64>) -> DMatrix<C64> {
        assert_eq!(u.len(), self.dim);
        assert_eq!(w.len(), self.dim);
        let mut out = DMatrix::<C64>::zeros(self.dim, self.dim);
        for (n_tot, (i_min, block)) in self.blocks.iter().enumerate() {
            let s = block.nrows();
            let mut v = vec![C64::new(0.0, 0.0); s];
            for m in 0..s {
                let i = i_min + m;
                v[m] = u[i] * w[n_tot - i];
            }
            for r in 0..s {
                let mut acc = C64::new(0.0, 0.0);
                for c in 0..s {
                    acc += block[(r, c)] * v[c];
                }
                let i = i_min + r;
                out[(i, n_tot - i)] = acc;
            }
        }
        out
    }
}

/// Build a unitary from its spec. Two-mode variants densify and are limited
/// to [`DENSE_TWO_MODE_LIMIT`]; production code paths use [`BsBlocks`] and
/// [`heralded_opa_kraus`] instead.
pub fn build_unitary(spec: UnitarySpec, trunc: Truncation) -> Result<ModeOperator> {
    spec.validate()?;
    let d = trunc.dim;
    match spec {
        UnitarySpec::Squeeze(r) => {
            let ops = GaussianOps::new(trunc);
            Ok(ModeOperator::single(trunc, ops.squeeze_matrix(r)))
        }
        UnitarySpec::Displace(alpha) => {
            let ops = GaussianOps::new(trunc);
            Ok(ModeOperator::single(trunc, ops.displace_matrix(alpha)))
        }
        UnitarySpec::CubicPhase(gamma) => {
            let x = position_matrix(d);
            let x3 = &x * &x * &x;
            let x3 = (&x3 + x3.transpose()).map(|v| v * 0.5);
            let eig = RealSymEig::new(x3);
            Ok(ModeOperator::single(trunc, eig.expm_i(gamma)))
        }
        UnitarySpec::Beamsplitter(tau) => {
            guard_dense(d)?;
            let blocks = BsBlocks::new(tau, d)?;
            let mut m = DMatrix::<C64>::zeros(d * d, d * d);
            for (n_tot, (i_min, block)) in blocks.blocks.iter().enumerate() {
                let s = block.nrows();
                for r in 0..s {
                    let (ir, jr) = (i_min + r, n_tot - (i_min + r));
                    for c in 0..s {
                        let (ic, jc) = (i_min + c, n_tot - (i_min + c));
                        m[(ir * d + jr, ic * d + jc)] = C64::new(block[(r, c)], 0.0);
                    }
                }
            }
            Ok(ModeOperator::two_mode(trunc, m))
        }
        UnitarySpec::TwoModeSqueeze(kappa) => {
            guard_dense(d)?;
            let mut m = DMatrix::<C64>::zeros(d * d, d * d);
            // Blocks conserve n1 - n2 = delta; chain index j is the smaller
            // occupation. G[j+1, j] = -(kappa/2) sqrt((j+1)(j+1+|delta|))
            // from the -a1+ a2+ term.
            for delta in -(d as isize - 1)..=(d as isize - 1) {
                let ad = delta.unsigned_abs();
                let s = d - ad;
                let to_pair = |j: usize| -> (usize, usize) {
                    if delta >= 0 {
                        (j + ad, j)
                    } else {
                        (j, j + ad)
                    }
                };
                if s == 1 {
                    let (i, jj) = to_pair(0);
                    m[(i * d + jj, i * d + jj)] = C64::new(1.0, 0.0);
                    continue;
                }
                let g: Vec<f64> = (0..s - 1)
                    .map(|j| -0.5 * ((j + 1) as f64 * (j + 1 + ad) as f64).sqrt())
                    .collect();
                let chain = ChainEig::new(&g, (0..s).collect());
                let block = chain.orthogonal(kappa);
                for r in 0..s {
                    let (ir, jr) = to_pair(r);
                    for c in 0..s {
                        let (ic, jc) = to_pair(c);
                        m[(ir * d + jr, ic * d + jc)] = C64::new(block[(r, c)], 0.0);
                    }
                }
            }
            Ok(ModeOperator::two_mode(trunc, m))
        }
    }
}

fn guard_dense(dim: usize) -> Result<()> {
    if dim > DENSE_TWO_MODE_LIMIT {
        Err(SimError::DimensionGuard { dim, limit: DENSE_TWO_MODE_LIMIT })
    } else {
        Ok(())
    }
}

/// Closed-form heralded OPA Kraus operator `M_n = <n|_2 U_OPA(kappa) |0>_2`:
///
/// `M_n |j> = (-lambda)^n sech(kappa/2)^(j+1) sqrt(C(j+n, n)) |j+n>`,
/// `lambda = tanh(kappa/2)`.
///
/// `M_n rho M_n+` reproduces the full two-mode construction (tensor a vacuum
/// idler, apply U_OPA, project Pi_n, partial trace) exactly; the whole
/// heralded family satisfies `sum_n M_n+ M_n = 1` before truncation.
pub fn heralded_opa_kraus(kappa: f64, n: usize, trunc: Truncation) -> ModeOperator {
    let d = trunc.dim;
    assert!(n < d, "herald count {n} needs dim > n");
    let lambda = (kappa / 2.0).tanh();
    let sech = 1.0 / (kappa / 2.0).cosh();
    let mut m = DMatrix::<C64>::zeros(d, d);
    // sqrt(C(j+n, n)) built up by the ratio sqrt((j+n)/j).
    let mut root_binom = 1.0f64;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let mut amp = sign * lambda.powi(n as i32) * sech;
    for j in 0..d.saturating_sub(n) {
        if j > 0 {
            root_binom *= (((j + n) as f64) / (j as f64)).sqrt();
            amp *= sech;
        }
        m[(j + n, j)] = C64::new(amp * root_binom, 0.0);
    }
    ModeOperator::single(trunc, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{tensor_pure, Mode};
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn max_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn ladder_basics() {
        let t = Truncation::new(8);
        let a = ladder(t);
        let one = PureState::fock(t, 1);
        let out = a.apply(&one);
        assert_abs_diff_eq!(out.amplitudes()[0].re, 1.0, epsilon = 1e-15);

        let vac = PureState::vacuum(t);
        assert_abs_diff_eq!(a.apply(&vac).norm_sqr(), 0.0, epsilon = 1e-30);

        let five = PureState::fock(t, 5);
        let n_op = a.adjoint().matrix() * a.matrix();
        let exp = five.amplitudes().dotc(&(&n_op * five.amplitudes()));
        assert_abs_diff_eq!(exp.re, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn commutator_is_identity_except_last_entry() {
        let t = Truncation::new(10);
        let a = ladder(t).matrix().clone();
        let comm = &a * a.adjoint() - a.adjoint() * &a;
        for i in 0..9 {
            assert_abs_diff_eq!(comm[(i, i)].re, 1.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(comm[(9, 9)].re, -9.0, epsilon = 1e-12);
    }

    #[test]
    fn expm_skew_zero_is_identity() {
        let g = DMatrix::<C64>::zeros(6, 6);
        let u = expm_skew(&g).unwrap();
        let id = DMatrix::<C64>::identity(6, 6);
        assert!(max_diff(&u, &id) < 1e-14);
    }

    #[test]
    fn expm_skew_diagonal_phases() {
        let d = 7;
        let theta = 0.37;
        let g = DMatrix::<C64>::from_fn(d, d, |r, c| {
            if r == c {
                C64::new(0.0, theta * r as f64)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let u = expm_skew(&g).unwrap();
        for n in 0..d {
            let expect = C64::new(0.0, theta * n as f64).exp();
            assert!((u[(n, n)] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn expm_skew_rejects_non_anti_hermitian() {
        let mut g = DMatrix::<C64>::zeros(4, 4);
        g[(0, 1)] = c(1.0, 0.0);
        assert!(expm_skew(&g).is_err());
    }

    #[test]
    fn squeeze_zero_is_identity() {
        let t = Truncation::new(12);
        let u = build_unitary(UnitarySpec::Squeeze(0.0), t).unwrap();
        assert!(max_diff(u.matrix(), &DMatrix::identity(12, 12)) < 1e-13);
    }

    #[test]
    fn squeeze_matches_generic_expm() {
        let t = Truncation::new(24);
        let r = 0.41;
        let fast = build_unitary(UnitarySpec::Squeeze(r), t).unwrap();
        let a = ladder(t).matrix().clone();
        let gen = (&a * &a - a.adjoint() * a.adjoint()).map(|z| z * 0.5 * r);
        let slow = expm_skew(&gen).unwrap();
        assert!(max_diff(fast.matrix(), &slow) < 1e-11);
    }

    #[test]
    fn squeezed_vacuum_x_variance() {
        // Var(x) of S(r)|0> = e^{-2r} with x = a + a+.
        let t = Truncation::new(60);
        let r = 0.3;
        let u = build_unitary(UnitarySpec::Squeeze(r), t).unwrap();
        let psi = u.apply(&PureState::vacuum(t));
        let x = position_matrix(60).map(|v| c(v, 0.0));
        let xpsi = &x * psi.amplitudes();
        let mean = psi.amplitudes().dotc(&xpsi).re;
        let var = xpsi.dotc(&xpsi).re - mean * mean;
        assert_abs_diff_eq!(var, (-2.0 * r).exp(), epsilon = 1e-9);
    }

    #[test]
    fn squeezed_vacuum_closed_form_coefficients() {
        // S(r)|0> = (cosh r)^{-1/2} sum_n (-tanh r)^n sqrt((2n)!)/(2^n n!) |2n>.
        let t = Truncation::new(40);
        let r = 0.35;
        let u = build_unitary(UnitarySpec::Squeeze(r), t).unwrap();
        let psi = u.apply(&PureState::vacuum(t));
        let mut expect = 1.0 / r.cosh().sqrt();
        let mut level = 0usize;
        let mut m = 0;
        while level < 30 {
            let got = psi.amplitudes()[level];
            assert!(
                (got - c(expect, 0.0)).norm() < 1e-9,
                "level {level}: got {got}, expected {expect}"
            );
            if level + 1 < 40 {
                assert!(psi.amplitudes()[level + 1].norm() < 1e-12, "odd level nonzero");
            }
            m += 1;
            expect *= -r.tanh() * (((2 * m - 1) as f64 * (2 * m) as f64).sqrt()) / (2.0 * m as f64);
            level += 2;
        }
    }

    #[test]
    fn displaced_vacuum_is_coherent_state() {
        let t = Truncation::new(40);
        let alpha = c(0.7, -0.4);
        let u = build_unitary(UnitarySpec::Displace(alpha), t).unwrap();
        let psi = u.apply(&PureState::vacuum(t));
        let mut expect = c((-alpha.norm_sqr() / 2.0).exp(), 0.0);
        for n in 0..30 {
            assert!(
                (psi.amplitudes()[n] - expect).norm() < 1e-10,
                "coherent amplitude mismatch at n={n}"
            );
            expect *= alpha / ((n + 1) as f64).sqrt();
        }
        // <x> of D(a)|0> with real a is 2a.
        let ur = build_unitary(UnitarySpec::Displace(c(0.9, 0.0)), t).unwrap();
        let pr = ur.apply(&PureState::vacuum(t));
        let x = position_matrix(40).map(|v| c(v, 0.0));
        let mean = pr.amplitudes().dotc(&(&x * pr.amplitudes())).re;
        assert_abs_diff_eq!(mean, 1.8, epsilon = 1e-10);
    }

    #[test]
    fn displace_matches_generic_expm() {
        // Compare on the healthy subspace: columns near the cutoff feel the
        // truncation differently in the two routes.
        let t = Truncation::new(24);
        let alpha = c(0.32, 0.57);
        let fast = build_unitary(UnitarySpec::Displace(alpha), t).unwrap();
        let a = ladder(t).matrix().clone();
        let gen = a.adjoint().map(|z| z * alpha) - a.map(|z| z * alpha.conj());
        let slow = expm_skew(&gen).unwrap();
        let mut worst = 0.0f64;
        for r in 0..12 {
            for cc in 0..12 {
                worst = worst.max((fast.matrix()[(r, cc)] - slow[(r, cc)]).norm());
            }
        }
        assert!(worst < 1e-11, "healthy-block mismatch {worst}");
    }

    #[test]
    fn two_mode_squeeze_idler_distribution() {
        // U_OPA(kappa)|0,0> has idler distribution lambda^{2n}(1 - lambda^2).
        let t = Truncation::new(24);
        let kappa = 0.3023;
        let u = build_unitary(UnitarySpec::TwoModeSqueeze(kappa), t).unwrap();
        let joint = tensor_pure(&PureState::vacuum(t), &PureState::vacuum(t));
        let out = u.apply_joint(&joint);
        let lambda: f64 = (kappa / 2.0).tanh();
        let pops = out.marginal_populations(Mode::Two);
        for n in 0..10 {
            let expect = lambda.powi(2 * n as i32) * (1.0 - lambda * lambda);
            assert_abs_diff_eq!(pops[n], expect, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(pops[1], 0.0220, epsilon = 2e-4);
    }

    #[test]
    fn two_mode_squeeze_matches_generic_expm() {
        let t = Truncation::new(10);
        let kappa = 0.52;
        let fast = build_unitary(UnitarySpec::TwoModeSqueeze(kappa), t).unwrap();
        let a = ladder(t).matrix().clone();
        let id = DMatrix::<C64>::identity(10, 10);
        let a1 = a.kronecker(&id);
        let a2 = id.kronecker(&a);
        let gen = (&a1 * &a2 - a1.adjoint() * a2.adjoint()).map(|z| z * 0.5 * kappa);
        let slow = expm_skew(&gen).unwrap();
        assert!(max_diff(fast.matrix(), &slow) < 1e-10);
    }

    #[test]
    fn beamsplitter_tau_one_is_identity() {
        let t = Truncation::new(8);
        let u = build_unitary(UnitarySpec::Beamsplitter(1.0), t).unwrap();
        assert!(max_diff(u.matrix(), &DMatrix::identity(64, 64)) < 1e-13);
    }

    #[test]
    fn beamsplitter_group_property() {
        // Applying BS(1/2) twice equals the tau = 0 beamsplitter (doubled angle).
        let t = Truncation::new(10);
        let half = build_unitary(UnitarySpec::Beamsplitter(0.5), t).unwrap();
        let twice = half.matrix() * half.matrix();
        let swap = build_unitary(UnitarySpec::Beamsplitter(0.0), t).unwrap();
        assert!(max_diff(&twice, swap.matrix()) < 1e-11);
    }

    #[test]
    fn beamsplitter_matches_generic_expm() {
        let t = Truncation::new(9);
        let tau = 0.37;
        let fast = build_unitary(UnitarySpec::Beamsplitter(tau), t).unwrap();
        let a = ladder(t).matrix().clone();
        let id = DMatrix::<C64>::identity(9, 9);
        let a1 = a.kronecker(&id);
        let a2 = id.kronecker(&a);
        let theta = tau.sqrt().acos();
        let gen = (a1.adjoint() * &a2 - &a1 * a2.adjoint()).map(|z| z * theta);
        let slow = expm_skew(&gen).unwrap();
        assert!(max_diff(fast.matrix(), &slow) < 1e-10);
    }

    #[test]
    fn bs_blocks_agree_with_dense() {
        let t = Truncation::new(12);
        let tau = 0.5;
        let dense = build_unitary(UnitarySpec::Beamsplitter(tau), t).unwrap();
        let blocks = BsBlocks::new(tau, 12).unwrap();
        // Deterministic pseudo-random pure state.
        let mut amps = DMatrix::<C64>::zeros(12, 12);
        let mut x = 0.123f64;
        for i in 0..12 {
            for j in 0..12 {
                x = (x * 97.31 + 0.17).fract();
                amps[(i, j)] = c(x - 0.5, (x * 2.0).fract() - 0.5);
            }
        }
        let n: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>();
        amps /= c(n.sqrt(), 0.0);
        let psi = TwoModePureState::new(t, t, amps);
        let fast = blocks.apply(&psi);
        let slow = dense.apply_joint(&psi);
        let diff = max_diff(fast.amplitudes(), slow.amplitudes());
        assert!(diff < 1e-12, "block/dense mismatch {diff}");
    }

    #[test]
    fn cubic_phase_is_unitary_off_guard() {
        let t = Truncation::new(80);
        let u = build_unitary(UnitarySpec::CubicPhase(0.1), t).unwrap();
        assert!(u.unitarity_defect() < 1e-8);
    }

    #[test]
    fn cubic_phase_commutes_with_x_off_guard() {
        let t = Truncation::new(80);
        let u = build_unitary(UnitarySpec::CubicPhase(0.1), t).unwrap();
        let x = position_matrix(80).map(|v| c(v, 0.0));
        let comm = u.matrix() * &x - &x * u.matrix();
        let g = t.guard_start();
        let mut worst = 0.0f64;
        for r in 0..g.min(60) {
            for cidx in 0..g.min(60) {
                worst = worst.max(comm[(r, cidx)].norm());
            }
        }
        assert!(worst < 1e-7, "cubic unitary fails to commute with x: {worst}");
    }

    #[test]
    fn kraus_zero_herald_on_vacuum() {
        let t = Truncation::new(16);
        let kappa = 0.62;
        let m0 = heralded_opa_kraus(kappa, 0, t);
        let out = m0.apply(&PureState::vacuum(t));
        let sech = 1.0 / (kappa / 2.0).cosh();
        assert_abs_diff_eq!(out.amplitudes()[0].re, sech, epsilon = 1e-14);
        assert_abs_diff_eq!(out.norm_sqr(), sech * sech, epsilon = 1e-14);
    }

    #[test]
    fn kraus_at_zero_gain_is_identity_delta() {
        let t = Truncation::new(10);
        let m0 = heralded_opa_kraus(0.0, 0, t);
        assert!(max_diff(m0.matrix(), &DMatrix::identity(10, 10)) < 1e-15);
        let m1 = heralded_opa_kraus(0.0, 1, t);
        assert!(m1.matrix().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn kraus_support_shift() {
        let t = Truncation::new(12);
        let m3 = heralded_opa_kraus(0.8, 3, t);
        let psi = PureState::fock(t, 4);
        let out = m3.apply(&psi);
        for n in 0..12 {
            if n != 7 {
                assert_eq!(out.amplitudes()[n].norm(), 0.0);
            }
        }
        assert!(out.amplitudes()[7].norm() > 0.0);
    }

    #[test]
    fn kraus_completeness_matches_negative_binomial_tail() {
        // sum_n M_n+ M_n is diagonal with entry at level j equal to
        // 1 - P[NegBinom(j+1, lambda^2) >= dim - j], the probability that the
        // herald family truncated at dim misses outcomes. The deficit is
        // below 1e-8 on the lower half of the space for every gain used in
        // the protocols (the guard edge itself saturates for kappa = 0.6190,
        // where the mean herald growth rate matches the guard fraction).
        let t = Truncation::new(30);
        let d = 30usize;
        for &kappa in &[0.1, 0.3023, 0.6190] {
            let lam2 = (kappa / 2.0 as f64).tanh().powi(2);
            let mut sum = DMatrix::<C64>::zeros(d, d);
            for n in 0..d {
                let m = heralded_opa_kraus(kappa, n, t);
                sum += m.matrix().adjoint() * m.matrix();
            }
            for j in 0..d {
                // analytic retained mass: (1-p)^{j+1} sum_{n<=d-1-j} C(j+n,n) p^n
                let mut term = (1.0 - lam2).powi(j as i32 + 1);
                let mut retained = term;
                for n in 1..=(d - 1 - j) {
                    term *= lam2 * (j + n) as f64 / n as f64;
                    retained += term;
                }
                let got = sum[(j, j)].re;
                assert!(
                    (got - retained).abs() < 1e-12,
                    "kappa={kappa} level {j}: diagonal {got} vs analytic {retained}"
                );
                if j <= d / 2 {
                    assert!(
                        (1.0 - got).abs() < 1e-8,
                        "kappa={kappa} level {j}: completeness deficit {}",
                        1.0 - got
                    );
                }
            }
        }
    }

    #[test]
    fn kraus_matches_two_mode_exponential_route() {
        // M_n |psi> vs tensor-vacuum / U_OPA / <n|_2 slice at dim 20, for a
        // seed supported well below the cutoff (the two routes truncate
        // differently at the top of the space).
        let t = Truncation::new(20);
        let seed = {
            let mut amps = DVector::<C64>::zeros(20);
            let mut x = 0.71f64;
            for item in amps.iter_mut().take(8) {
                x = (x * 53.17 + 0.29).fract();
                *item = c(x - 0.5, (x * 3.0).fract() - 0.5);
            }
            let n: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
            PureState::new(t, amps.map(|z| z / n.sqrt()))
        };
        for &kappa in &[0.3023, 0.6190] {
            let u = build_unitary(UnitarySpec::TwoModeSqueeze(kappa), t).unwrap();
            let joint = u.apply_joint(&tensor_pure(&seed, &PureState::vacuum(t)));
            for n in 0..4 {
                let mn = heralded_opa_kraus(kappa, n, t);
                let fast = mn.apply(&seed);
                let slow =
                    DVector::from_iterator(20, (0..20).map(|i| joint.amplitudes()[(i, n)]));
                let diff: f64 =
                    (fast.amplitudes() - &slow).iter().map(|z| z.norm()).fold(0.0, f64::max);
                assert!(diff < 1e-11, "kappa={kappa} n={n}: diff {diff}");
            }
        }
    }

    #[test]
    fn dense_two_mode_guard_refuses_large_dims() {
        let t = Truncation::new(80);
        match build_unitary(UnitarySpec::Beamsplitter(0.5), t) {
            Err(SimError::DimensionGuard { .. }) => {}
            other => panic!("expected dimension guard, got {other:?}"),
        }
    }

    #[test]
    fn gaussian_ops_apply_matches_dense() {
        let t = Truncation::new(30);
        let ops = GaussianOps::new(t);
        let psi = {
            let u = build_unitary(UnitarySpec::Displace(c(0.4, 0.2)), t).unwrap();
            u.apply(&PureState::vacuum(t))
        };
        let alpha = c(-0.3, 0.8);
        let fast = ops.apply_displace(alpha, psi.amplitudes());
        let dense = build_unitary(UnitarySpec::Displace(alpha), t).unwrap();
        let slow = dense.matrix() * psi.amplitudes();
        assert!((fast - slow).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-11);

        let r = -0.4;
        let fast = ops.apply_squeeze(r, psi.amplitudes());
        let dense = build_unitary(UnitarySpec::Squeeze(r), t).unwrap();
        let slow = dense.matrix() * psi.amplitudes();
        assert!((fast - slow).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-11);
    }
}
