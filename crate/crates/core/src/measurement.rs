//! Heralding maps and quadrature statistics.
//!
//! PNRD projection and x-homodyne projection both return a
//! [`HeraldedResult`]: the unnormalized conditional state whose trace is the
//! outcome probability (or probability density for the continuous homodyne
//! outcome), together with the normalized state. Discrete probabilities and
//! continuous densities are kept in distinct [`HeraldWeight`] variants so a
//! density is never multiplied into a success probability by accident.

use nalgebra::{DMatrix, DVector};

use crate::fock::{
    DensityOperator, Mode, PureState, Truncation, TwoModeDensityOperator, TwoModePureState,
};
use crate::operators::BsBlocks;
use crate::{C64, Result, SimError};

/// Discrete-probability vs continuous-density bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HeraldWeight {
    /// Probability of a discrete outcome, in `[0, 1]`.
    Probability(f64),
    /// Probability density of a continuous outcome, `>= 0`.
    Density(f64),
}

impl HeraldWeight {
    pub fn value(&self) -> f64 {
        match self {
            HeraldWeight::Probability(p) => *p,
            HeraldWeight::Density(d) => *d,
        }
    }

    /// The discrete probability; panics on a density, which must never enter
    /// a success-probability product.
    pub fn probability(&self) -> f64 {
        match self {
            HeraldWeight::Probability(p) => *p,
            HeraldWeight::Density(_) => {
                panic!("continuous-outcome density used as a discrete probability")
            }
        }
    }
}

/// One heralding event: sub-normalized state, its weight, normalized state.
#[derive(Clone, Debug)]
pub struct HeraldedResult<S> {
    pub unnormalized: S,
    pub weight: HeraldWeight,
    pub normalized: S,
}

/// Project PNRD outcome `n` on one mode of a two-mode pure state.
///
/// Pure inputs never densify: `<n|_2 Psi` is a column slice of the amplitude
/// matrix.
pub fn herald_pnrd(
    state: &TwoModePureState,
    measured: Mode,
    n: usize,
) -> Result<HeraldedResult<PureState>> {
    let keep = match measured {
        Mode::One => Mode::Two,
        Mode::Two => Mode::One,
    };
    let meas_trunc = state.trunc(measured);
    if n >= meas_trunc.dim {
        return Err(SimError::InvalidParameter(format!(
            "herald outcome {n} outside measured-mode dim {}",
            meas_trunc.dim
        )));
    }
    let a = state.amplitudes();
    let kept_trunc = *state.trunc(keep);
    let amps: DVector<C64> = match measured {
        Mode::Two => DVector::from_iterator(a.nrows(), a.column(n).iter().copied()),
        Mode::One => DVector::from_iterator(a.ncols(), a.row(n).iter().copied()),
    };
    let unnormalized = PureState::new(kept_trunc, amps);
    let p = unnormalized.norm_sqr();
    let (normalized, _) = unnormalized
        .normalize()
        .map_err(|_| SimError::ZeroProbabilityHerald(format!("PNRD outcome {n}")))?;
    Ok(HeraldedResult { unnormalized, weight: HeraldWeight::Probability(p), normalized })
}

/// Density-operator variant of [`herald_pnrd`].
pub fn herald_pnrd_density(
    state: &TwoModeDensityOperator,
    measured: Mode,
    n: usize,
) -> Result<HeraldedResult<DensityOperator>> {
    let keep = match measured {
        Mode::One => Mode::Two,
        Mode::Two => Mode::One,
    };
    let meas_trunc = state.trunc(measured);
    if n >= meas_trunc.dim {
        return Err(SimError::InvalidParameter(format!(
            "herald outcome {n} outside measured-mode dim {}",
            meas_trunc.dim
        )));
    }
    let kept = *state.trunc(keep);
    let dk = kept.dim;
    let db = state.trunc(Mode::Two).dim;
    let m = state.matrix();
    let mut out = DMatrix::<C64>::zeros(dk, dk);
    for i in 0..dk {
        for ip in 0..dk {
            out[(i, ip)] = match measured {
                Mode::Two => m[(i * db + n, ip * db + n)],
                Mode::One => m[(n * db + i, n * db + ip)],
            };
        }
    }
    let unnormalized = DensityOperator::new(kept, out);
    let p = unnormalized.trace();
    let (normalized, _) = unnormalized
        .normalize()
        .map_err(|_| SimError::ZeroProbabilityHerald(format!("PNRD outcome {n}")))?;
    Ok(HeraldedResult { unnormalized, weight: HeraldWeight::Probability(p), normalized })
}

/// The x-quadrature functional `<x|n>` for `x = a + a+` (vacuum variance 1):
///
/// `<x|n> = (2 pi)^{-1/4} (2^n n!)^{-1/2} H_n(x / sqrt(2)) e^{-x^2/4}`,
///
/// evaluated with the normalized three-term recurrence
/// `psi_{n+1} = (x psi_n - sqrt(n) psi_{n-1}) / sqrt(n+1)`.
pub fn homodyne_x_functional(x: f64, trunc: Truncation) -> DVector<f64> {
    let d = trunc.dim;
    let mut v = DVector::<f64>::zeros(d);
    let psi0 = (2.0 * std::f64::consts::PI).powf(-0.25) * (-x * x / 4.0).exp();
    v[0] = psi0;
    if d > 1 {
        v[1] = x * psi0;
    }
    for n in 1..d - 1 {
        v[n + 1] = (x * v[n] - (n as f64).sqrt() * v[n - 1]) / ((n + 1) as f64).sqrt();
    }
    v
}

/// Herald the exact outcome `x = 0` of an x-homodyne on one mode of a
/// two-mode pure state. The weight is a probability *density*.
pub fn herald_homodyne_x0(
    state: &TwoModePureState,
    measured: Mode,
) -> Result<HeraldedResult<PureState>> {
    herald_homodyne_at(state, measured, 0.0)
}

/// Same as [`herald_homodyne_x0`] at an arbitrary outcome.
pub fn herald_homodyne_at(
    state: &TwoModePureState,
    measured: Mode,
    x: f64,
) -> Result<HeraldedResult<PureState>> {
    let keep = match measured {
        Mode::One => Mode::Two,
        Mode::Two => Mode::One,
    };
    let kept = *state.trunc(keep);
    let functional = homodyne_x_functional(x, *state.trunc(measured));
    let a = state.amplitudes();
    let amps: DVector<C64> = match measured {
        Mode::Two => DVector::from_fn(a.nrows(), |i, _| {
            let mut acc = C64::new(0.0, 0.0);
            for l in 0..a.ncols() {
                acc += a[(i, l)] * functional[l];
            }
            acc
        }),
        Mode::One => DVector::from_fn(a.ncols(), |j, _| {
            let mut acc = C64::new(0.0, 0.0);
            for l in 0..a.nrows() {
                acc += a[(l, j)] * functional[l];
            }
            acc
        }),
    };
    // Density can exceed 1; normalize first and rescale where legal so the
    // sub-normalized constructor invariant stays intact.
    let density: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
    if density <= 0.0 {
        return Err(SimError::ZeroProbabilityHerald(format!("homodyne outcome x={x}")));
    }
    let normalized = PureState::new(kept, amps.map(|z| z / C64::new(density.sqrt(), 0.0)));
    let unnormalized =
        if density <= 1.0 { PureState::new(kept, amps) } else { normalized.clone() };
    Ok(HeraldedResult { unnormalized, weight: HeraldWeight::Density(density), normalized })
}

/// Integrated-window wrapper: midpoint density times window width, for a
/// finite acceptance window `x in [-eps, eps]`.
pub fn herald_homodyne_window(
    state: &TwoModePureState,
    measured: Mode,
    eps: f64,
) -> Result<HeraldedResult<PureState>> {
    let mut r = herald_homodyne_x0(state, measured)?;
    r.weight = HeraldWeight::Probability((r.weight.value() * 2.0 * eps).min(1.0));
    Ok(r)
}

/// Staged breeding contraction for *mixed* product inputs: one output of
/// `BS(tau)(rho (x) sigma)` is heralded on `x = 0` without ever materializing
/// the dim^2 x dim^2 joint density. Both factors are spectrally decomposed
/// and each pure pair is pushed through the block beamsplitter (peak memory
/// O(dim^2), flops O(rank^2 dim^3)).
pub fn herald_homodyne_x0_product(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    blocks: &BsBlocks,
) -> Result<HeraldedResult<DensityOperator>> {
    let trunc = *rho.trunc();
    assert_eq!(trunc.dim, sigma.trunc().dim, "breeding needs equal dims");
    assert_eq!(trunc.dim, blocks.dim());
    let fa = rho.factor(1e-14);
    let fb = sigma.factor(1e-14);
    let functional = homodyne_x_functional(0.0, trunc);
    let d = trunc.dim;
    // pairs evaluate in parallel; the rank-one updates accumulate in fixed
    // order afterwards so results stay bit-reproducible
    let pairs: Vec<(f64, &nalgebra::DVector<C64>, &nalgebra::DVector<C64>)> = fa
        .iter()
        .flat_map(|(pa, ua)| fb.iter().map(move |(pb, ub)| (pa * pb, ua, ub)))
        .collect();
    let conditioned: Vec<(f64, DVector<C64>)> = {
        use rayon::prelude::*;
        pairs
            .par_iter()
            .map(|(w, ua, ub)| {
                let psi = blocks.apply_outer(ua, ub);
                let mut v = DVector::<C64>::zeros(d);
                for i in 0..d {
                    let mut acc = C64::new(0.0, 0.0);
                    for l in 0..d {
                        acc += psi[(i, l)] * functional[l];
                    }
                    v[i] = acc;
                }
                (*w, v)
            })
            .collect()
    };
    let mut out = DMatrix::<C64>::zeros(d, d);
    for (w, v) in &conditioned {
        let w = C64::new(*w, 0.0);
        for i in 0..d {
            let vi = v[i] * w;
            if vi.norm_sqr() == 0.0 {
                continue;
            }
            for ip in 0..d {
                out[(i, ip)] += vi * v[ip].conj();
            }
        }
    }
    let density: f64 = (0..d).map(|i| out[(i, i)].re).sum();
    if density <= 0.0 {
        return Err(SimError::ZeroProbabilityHerald("homodyne x=0 on bred pair".into()));
    }
    let normalized = DensityOperator::new(trunc, out.map(|z| z / C64::new(density, 0.0)));
    let unnormalized =
        if density <= 1.0 { DensityOperator::new(trunc, out) } else { normalized.clone() };
    Ok(HeraldedResult { unnormalized, weight: HeraldWeight::Density(density), normalized })
}

/// Which quadrature a distribution is taken along.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quadrature {
    X,
    P,
}

/// Evaluation grid for quadrature distributions and Wigner functions.
#[derive(Clone, Copy, Debug)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.max - self.min) / self.step).round() as usize;
        (0..=n).map(|i| self.min + i as f64 * self.step).collect()
    }
}

/// `Pr(q) = <q|rho|q>` sampled on a grid. The p quadrature is handled by the
/// Fock-phase rotation `e^{i pi n/2}` followed by the x functional.
pub fn quadrature_distribution_pure(
    state: &PureState,
    quad: Quadrature,
    grid: &Grid,
) -> Vec<(f64, f64)> {
    let psi = rotate_for(quad, state);
    grid.points()
        .into_iter()
        .map(|q| {
            let f = homodyne_x_functional(q, *state.trunc());
            let mut acc = C64::new(0.0, 0.0);
            for n in 0..state.dim() {
                acc += psi[n] * f[n];
            }
            (q, acc.norm_sqr())
        })
        .collect()
}

/// Density-operator variant of [`quadrature_distribution_pure`].
pub fn quadrature_distribution_density(
    state: &DensityOperator,
    quad: Quadrature,
    grid: &Grid,
) -> Vec<(f64, f64)> {
    let branches = state.factor(1e-14);
    let rotated: Vec<(f64, DVector<C64>)> = branches
        .into_iter()
        .map(|(p, u)| {
            let norm: f64 = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let ps = PureState::new(*state.trunc(), u.map(|z| z / C64::new(norm, 0.0)));
            (p, rotate_for(quad, &ps))
        })
        .collect();
    grid.points()
        .into_iter()
        .map(|q| {
            let f = homodyne_x_functional(q, *state.trunc());
            let mut total = 0.0;
            for (p, psi) in &rotated {
                let mut acc = C64::new(0.0, 0.0);
                for n in 0..state.dim() {
                    acc += psi[n] * f[n];
                }
                total += p * acc.norm_sqr();
            }
            (q, total)
        })
        .collect()
}

fn rotate_for(quad: Quadrature, state: &PureState) -> DVector<C64> {
    match quad {
        Quadrature::X => state.amplitudes().clone(),
        Quadrature::P => {
            let i_pow = [
                C64::new(1.0, 0.0),
                C64::new(0.0, 1.0),
                C64::new(-1.0, 0.0),
                C64::new(0.0, -1.0),
            ];
            DVector::from_fn(state.dim(), |n, _| state.amplitudes()[n] * i_pow[n % 4])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{tensor_density, tensor_pure};
    use crate::operators::{build_unitary, UnitarySpec};
    use approx::assert_abs_diff_eq;

    #[test]
    fn herald_vacuum_on_double_vacuum() {
        let t = Truncation::new(6);
        let joint = tensor_pure(&PureState::vacuum(t), &PureState::vacuum(t));
        let r = herald_pnrd(&joint, Mode::Two, 0).unwrap();
        assert_abs_diff_eq!(r.weight.probability(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.normalized.amplitudes()[0].re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn herald_on_two_mode_squeezed_vacuum_is_schmidt_distribution() {
        let t = Truncation::new(24);
        let kappa = 0.55;
        let u = build_unitary(UnitarySpec::TwoModeSqueeze(kappa), t).unwrap();
        let joint = u.apply_joint(&tensor_pure(&PureState::vacuum(t), &PureState::vacuum(t)));
        let lambda: f64 = (kappa / 2.0).tanh();
        for n in 0..8 {
            let r = herald_pnrd(&joint, Mode::Two, n).unwrap();
            let expect = lambda.powi(2 * n as i32) * (1.0 - lambda * lambda);
            assert_abs_diff_eq!(r.weight.probability(), expect, epsilon = 1e-12);
            // conditional state is |n> on the kept mode
            assert_abs_diff_eq!(r.normalized.amplitudes()[n].norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn herald_pnrd_pure_and_density_paths_agree() {
        let t = Truncation::new(14);
        let kappa = 0.6190;
        let u = build_unitary(UnitarySpec::TwoModeSqueeze(kappa), t).unwrap();
        let seed =
            build_unitary(UnitarySpec::Squeeze(0.3), t).unwrap().apply(&PureState::vacuum(t));
        let joint = u.apply_joint(&tensor_pure(&seed, &PureState::vacuum(t)));
        let dense = joint.to_density();
        for n in [0usize, 1, 2] {
            let fast = herald_pnrd(&joint, Mode::Two, n).unwrap();
            let slow = herald_pnrd_density(&dense, Mode::Two, n).unwrap();
            assert_abs_diff_eq!(
                fast.weight.probability(),
                slow.weight.probability(),
                epsilon = 1e-12
            );
            let fast_rho = fast.normalized.to_density();
            let diff = (fast_rho.matrix() - slow.normalized.matrix())
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(diff < 1e-10, "n={n}: pure/density herald mismatch {diff}");
        }
    }

    #[test]
    fn zero_probability_herald_is_an_error() {
        let t = Truncation::new(6);
        let joint = tensor_pure(&PureState::vacuum(t), &PureState::vacuum(t));
        match herald_pnrd(&joint, Mode::Two, 3) {
            Err(crate::SimError::ZeroProbabilityHerald(_)) => {}
            other => panic!("expected zero-probability error, got {other:?}"),
        }
    }

    #[test]
    fn x_functional_parity_and_odd_zero() {
        let t = Truncation::new(20);
        let f = homodyne_x_functional(0.0, t);
        assert_eq!(f[1], 0.0);
        assert_eq!(f[3], 0.0);
        let fp = homodyne_x_functional(1.3, t);
        let fm = homodyne_x_functional(-1.3, t);
        for n in 0..20 {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert_abs_diff_eq!(fm[n], sign * fp[n], epsilon = 0.0);
        }
    }

    #[test]
    fn x_functional_vacuum_normalization_and_variance() {
        let t = Truncation::new(10);
        let (mut norm, mut var) = (0.0, 0.0);
        let step = 0.01;
        let n_pts = (20.0 / step) as usize;
        for k in 0..=n_pts {
            let x = -10.0 + k as f64 * step;
            let f = homodyne_x_functional(x, t);
            let w = if k == 0 || k == n_pts { 0.5 } else { 1.0 };
            norm += w * f[0] * f[0] * step;
            var += w * x * x * f[0] * f[0] * step;
        }
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(var, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn homodyne_vacuum_pair_density() {
        // vacuum (x) vacuum through BS(1/2), herald x = 0: output vacuum,
        // density |<x=0|0>|^2 = (2 pi)^{-1/2}.
        let t = Truncation::new(16);
        let bs = build_unitary(UnitarySpec::Beamsplitter(0.5), t).unwrap();
        let joint = bs.apply_joint(&tensor_pure(&PureState::vacuum(t), &PureState::vacuum(t)));
        let r = herald_homodyne_x0(&joint, Mode::Two).unwrap();
        let expect = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert_abs_diff_eq!(r.weight.value(), expect, epsilon = 1e-12);
        assert_abs_diff_eq!(r.normalized.amplitudes()[0].norm(), 1.0, epsilon = 1e-10);
        match r.weight {
            HeraldWeight::Density(_) => {}
            _ => panic!("homodyne herald must carry a density"),
        }
    }

    #[test]
    fn homodyne_product_path_matches_pure_path() {
        let t = Truncation::new(18);
        let sq = build_unitary(UnitarySpec::Squeeze(0.4), t).unwrap();
        let psi = sq.apply(&PureState::vacuum(t));
        let bs = build_unitary(UnitarySpec::Beamsplitter(0.5), t).unwrap();
        let joint = bs.apply_joint(&tensor_pure(&psi, &psi));
        let pure = herald_homodyne_x0(&joint, Mode::Two).unwrap();

        let blocks = BsBlocks::new(0.5, 18).unwrap();
        let rho = psi.to_density();
        let mixed = herald_homodyne_x0_product(&rho, &rho, &blocks).unwrap();
        assert_abs_diff_eq!(pure.weight.value(), mixed.weight.value(), epsilon = 1e-12);
        let pure_rho = pure.normalized.to_density();
        let diff = (pure_rho.matrix() - mixed.normalized.matrix())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-10, "pure vs staged product mismatch {diff}");
    }

    #[test]
    fn pnrd_probabilities_sum_to_trace() {
        let t = Truncation::new(20);
        let kappa = 0.5;
        let u = build_unitary(UnitarySpec::TwoModeSqueeze(kappa), t).unwrap();
        let joint = u.apply_joint(&tensor_pure(&PureState::vacuum(t), &PureState::vacuum(t)));
        let egg: f64 = (0..20)
            .filter_map(|n| herald_pnrd(&joint, Mode::Two, n).ok())
            .map(|r| r.weight.probability())
            .sum();
        assert_abs_diff_eq!(egg, joint.norm_sqr(), epsilon = 1e-8);
    }

    #[test]
    fn vacuum_quadrature_distribution_is_unit_gaussian() {
        let t = Truncation::new(12);
        let grid = Grid { min: -6.0, max: 6.0, step: 0.01 };
        for quad in [Quadrature::X, Quadrature::P] {
            let d = quadrature_distribution_pure(&PureState::vacuum(t), quad, &grid);
            let norm: f64 = d.iter().map(|(_, p)| p * 0.01).sum();
            let var: f64 = d.iter().map(|(q, p)| q * q * p * 0.01).sum();
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-6);
            assert_abs_diff_eq!(var, 1.0, epsilon = 1e-5);
        }
    }

    #[test]
    fn density_distribution_matches_pure_for_projector() {
        let t = Truncation::new(16);
        let sq = build_unitary(UnitarySpec::Squeeze(-0.3), t).unwrap();
        let psi = sq.apply(&PureState::vacuum(t));
        let grid = Grid { min: -3.0, max: 3.0, step: 0.5 };
        let a = quadrature_distribution_pure(&psi, Quadrature::P, &grid);
        let b = quadrature_distribution_density(&psi.to_density(), Quadrature::P, &grid);
        for ((_, pa), (_, pb)) in a.iter().zip(&b) {
            assert_abs_diff_eq!(pa, pb, epsilon = 1e-10);
        }
    }

    #[test]
    fn tensor_round_trip_property() {
        // partial_trace(tensor(rho, sigma), 1) = tr(sigma) rho for a few
        // deterministic pseudo-random sub-normalized states.
        let t = Truncation::new(6);
        let mut x = 0.37f64;
        let mut make = |scale: f64, x: &mut f64| {
            let mut v = nalgebra::DVector::<C64>::zeros(6);
            for item in v.iter_mut() {
                *x = (*x * 61.7 + 0.13).fract();
                *item = C64::new(*x - 0.5, (*x * 2.3).fract() - 0.5);
            }
            let n: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            let v = v.map(|z| z * C64::new((scale / n).sqrt(), 0.0));
            DensityOperator::new(t, &v * v.adjoint())
        };
        for _ in 0..4 {
            let rho = make(0.7, &mut x);
            let sigma = make(0.5, &mut x);
            let joint = tensor_density(&rho, &sigma);
            let back = joint.partial_trace(Mode::One);
            let expect = rho.matrix().map(|z| z * sigma.trace());
            let diff = (back.matrix() - expect).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(diff < 1e-12, "round trip failed: {diff}");
        }
    }
}
