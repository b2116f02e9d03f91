//! Ideal reference states the generated states are compared against.

use nalgebra::DVector;

use crate::fock::{PureState, Truncation};
use crate::operators::{build_unitary, GaussianOps, UnitarySpec};
use crate::{C64, Result, SimError};

/// Squeezed vacuum `S(r)|0>` from the closed-form expansion
/// `(cosh r)^{-1/2} sum_n (-tanh r)^n sqrt((2n)!)/(2^n n!) |2n>`.
pub fn squeezed_vacuum(r: f64, trunc: Truncation) -> PureState {
    let d = trunc.dim;
    let mut amps = DVector::<C64>::zeros(d);
    let mut coeff = 1.0 / r.cosh().sqrt();
    let mut level = 0usize;
    let mut m = 0u32;
    while level < d {
        amps[level] = C64::new(coeff, 0.0);
        m += 1;
        coeff *= -r.tanh() * ((2.0 * m as f64 - 1.0) * (2.0 * m as f64)).sqrt()
            / (2.0 * m as f64);
        level += 2;
    }
    // renormalize the truncation remainder away
    let n2: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
    PureState::new(trunc, amps.map(|z| z / n2.sqrt()))
}

/// Coherent state `|alpha>` with amplitudes `e^{-|a|^2/2} a^n / sqrt(n!)`.
pub fn coherent(alpha: C64, trunc: Truncation) -> PureState {
    let d = trunc.dim;
    let mut amps = DVector::<C64>::zeros(d);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..d {
        amps[n] = c;
        c *= alpha / ((n + 1) as f64).sqrt();
    }
    let n2: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
    PureState::new(trunc, amps.map(|z| z / n2.sqrt()))
}

/// Normalized ideal photon-added squeezed state `(a+)^n S(r)|0>`.
pub fn ideal_photon_added_squeezed(r: f64, n: usize, trunc: Truncation) -> PureState {
    let base = squeezed_vacuum(r, trunc);
    let mut amps = base.amplitudes().clone();
    for _ in 0..n {
        let mut next = DVector::<C64>::zeros(trunc.dim);
        for j in 0..trunc.dim - 1 {
            next[j + 1] = amps[j] * ((j + 1) as f64).sqrt();
        }
        amps = next;
    }
    let n2: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
    PureState::new(trunc, amps.map(|z| z / n2.sqrt()))
}

/// Ideal cubic-phase state `e^{i gamma x^3}|0>`.
pub fn ideal_cubic(gamma: f64, trunc: Truncation) -> Result<PureState> {
    let u = build_unitary(UnitarySpec::CubicPhase(gamma), trunc)?;
    let psi = u.apply(&PureState::vacuum(trunc));
    let (psi, _) = psi.normalize()?;
    Ok(psi)
}

/// Photon-number parity of a cat state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CatParity {
    Even,
    Odd,
}

/// Squeezed-cat specification: `N (D(alpha) S(r)|0> +/- D(-alpha) S(r)|0>)`
/// with real displacement along x.
#[derive(Clone, Copy, Debug)]
pub struct CatSpec {
    pub alpha: f64,
    pub r: f64,
    pub parity: CatParity,
}

/// Ideal (squeezed) cat state.
pub fn ideal_cat(spec: &CatSpec, trunc: Truncation) -> Result<PureState> {
    if spec.alpha <= 0.0 {
        return Err(SimError::InvalidParameter(format!("cat amplitude {}", spec.alpha)));
    }
    let ops = GaussianOps::new(trunc);
    ideal_cat_with(&ops, spec)
}

/// Same as [`ideal_cat`] reusing a caller-held [`GaussianOps`], for
/// optimizer loops.
pub fn ideal_cat_with(ops: &GaussianOps, spec: &CatSpec) -> Result<PureState> {
    let trunc = *ops.trunc();
    let sq = ops.apply_squeeze(spec.r, PureState::vacuum(trunc).amplitudes());
    let plus = ops.apply_displace(C64::new(spec.alpha, 0.0), &sq);
    let minus = ops.apply_displace(C64::new(-spec.alpha, 0.0), &sq);
    let raw = match spec.parity {
        CatParity::Even => plus + minus,
        CatParity::Odd => plus - minus,
    };
    let n2: f64 = raw.iter().map(|z| z.norm_sqr()).sum();
    if n2 <= 0.0 {
        return Err(SimError::ZeroProbabilityHerald("cat normalization vanished".into()));
    }
    // exact parity: zero out the opposite-parity dust
    let mut amps = raw.map(|z| z / n2.sqrt());
    for (n, a) in amps.iter_mut().enumerate() {
        let keep = match spec.parity {
            CatParity::Even => n % 2 == 0,
            CatParity::Odd => n % 2 == 1,
        };
        if !keep {
            *a = C64::new(0.0, 0.0);
        }
    }
    let n2: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
    Ok(PureState::new(trunc, amps.map(|z| z / n2.sqrt())))
}

/// GKP logical label.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GkpLogical {
    Zero,
    One,
}

/// Approximate GKP specification: envelope width `Delta` (squeezing
/// `-10 log10(Delta^2)` dB) on the `beta = sqrt(pi)/2` lattice.
#[derive(Clone, Copy, Debug)]
pub struct GkpSpec {
    pub logical: GkpLogical,
    pub delta: f64,
}

impl GkpSpec {
    pub fn from_db(logical: GkpLogical, db: f64) -> Self {
        GkpSpec { logical, delta: 10f64.powf(-db / 20.0) }
    }
}

/// Approximate GKP state: a Gaussian-envelope superposition of displaced
/// squeezed peaks,
/// `N sum_s exp(-(k_s beta Delta)^2 / 2) D(k_s beta) S(-ln Delta)|0>`
/// with `k_s = 2s` (logical 0) or `2s+1` (logical 1). The lattice sum runs
/// until the envelope weight drops below 1e-12.
pub fn ideal_gkp(spec: &GkpSpec, trunc: Truncation) -> Result<PureState> {
    if !(spec.delta > 0.0 && spec.delta <= 1.0) {
        return Err(SimError::InvalidParameter(format!("GKP Delta {}", spec.delta)));
    }
    let beta = std::f64::consts::PI.sqrt() / 2.0;
    let ops = GaussianOps::new(trunc);
    let r = -spec.delta.ln();
    let sq = ops.apply_squeeze(r, PureState::vacuum(trunc).amplitudes());
    let mut total = DVector::<C64>::zeros(trunc.dim);
    let mut s: i64 = 0;
    loop {
        let mut any = false;
        for sign in [1i64, -1] {
            if s == 0 && sign == -1 {
                continue;
            }
            let k = match spec.logical {
                GkpLogical::Zero => 2 * s * sign,
                GkpLogical::One => 2 * s * sign + 1,
            };
            let c = k as f64 * beta;
            let weight = (-(c * spec.delta).powi(2) / 2.0).exp();
            if weight < 1e-12 {
                continue;
            }
            any = true;
            let peak = ops.apply_displace(C64::new(c, 0.0), &sq);
            total += peak.map(|z| z * weight);
        }
        if !any && s > 0 {
            break;
        }
        s += 1;
        if s > 10_000 {
            return Err(SimError::InvalidParameter("GKP lattice sum did not converge".into()));
        }
    }
    let n2: f64 = total.iter().map(|z| z.norm_sqr()).sum();
    if n2 <= 0.0 {
        return Err(SimError::ZeroProbabilityHerald("GKP normalization vanished".into()));
    }
    Ok(PureState::new(trunc, total.map(|z| z / n2.sqrt())))
}
