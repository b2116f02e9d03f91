//! The generation pipelines: Fock-state preparation, photon addition (OPA
//! and discrete Fock-addition schemes), approximate cubic-phase states (OPA
//! and coherent+Fock schemes), iterative squeezed-cat breeding with optional
//! switch loss and detector imperfections, homodyne GKP breeding, loss
//! thresholds, and the fidelity optimizations that compare each pipeline to
//! its ideal target.

use nalgebra::{DMatrix, DVector};

use crate::channels::{noisy_herald_mixture, noisy_herald_pnrd, pure_loss, DetectorModel};
use crate::fock::{DensityOperator, HealthReport, Mode, PureState, Truncation, TwoModePureState};
use crate::measurement::{
    herald_homodyne_x0, herald_homodyne_x0_product, herald_pnrd, HeraldWeight,
};
use crate::metrics::{
    effective_squeezing_density, effective_squeezing_pure, fidelity_pure, fidelity_pure_mixed,
    squeezing_correction_density, squeezing_correction_pure, SqueezingReport,
};
use crate::operators::{BsBlocks, GaussianOps};
use crate::optimize::{maximize, OptimizationProblem, Tolerances};
use crate::targets::{
    ideal_cat_with, ideal_cubic, ideal_photon_added_squeezed, squeezed_vacuum, CatParity, CatSpec,
};
use crate::{C64, Result, SimError};

/// Generation scheme selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    FockPrep,
    PhotonAddOpa,
    PhotonAddFock,
    CubicOpa,
    CubicFock,
    CatBreed,
    GkpBreed,
}

/// Pure or mixed pipeline state.
#[derive(Clone, Debug)]
pub enum OutputState {
    Pure(PureState),
    Mixed(DensityOperator),
}

impl OutputState {
    pub fn trunc(&self) -> &Truncation {
        match self {
            OutputState::Pure(p) => p.trunc(),
            OutputState::Mixed(m) => m.trunc(),
        }
    }

    pub fn parity(&self) -> f64 {
        match self {
            OutputState::Pure(p) => crate::metrics::parity_pure(p),
            OutputState::Mixed(m) => crate::metrics::parity_density(m),
        }
    }

    pub fn mean_photon_number(&self) -> f64 {
        match self {
            OutputState::Pure(p) => p.mean_photon_number(),
            OutputState::Mixed(m) => m.mean_photon_number(),
        }
    }

    pub fn truncation_health(&self) -> HealthReport {
        match self {
            OutputState::Pure(p) => p.truncation_health(),
            OutputState::Mixed(m) => m.truncation_health(),
        }
    }

    pub fn to_density(&self) -> DensityOperator {
        match self {
            OutputState::Pure(p) => p.to_density(),
            OutputState::Mixed(m) => m.clone(),
        }
    }

    pub fn as_pure(&self) -> Option<&PureState> {
        match self {
            OutputState::Pure(p) => Some(p),
            OutputState::Mixed(_) => None,
        }
    }

    /// Fidelity against a pure target.
    pub fn fidelity_to(&self, target: &PureState) -> f64 {
        match self {
            OutputState::Pure(p) => fidelity_pure(p, target),
            OutputState::Mixed(m) => fidelity_pure_mixed(target, m),
        }
    }
}

/// Truncation-health note attached to a report.
#[derive(Clone, Debug)]
pub struct HealthFlag {
    pub stage: String,
    pub guard_population: f64,
}

/// Fidelity block of a report: the best value and the target parameters it
/// was reached at.
#[derive(Clone, Debug)]
pub struct FidelityReport {
    pub value: f64,
    pub params: Vec<(String, f64)>,
}

/// Structured output of every pipeline.
#[derive(Clone, Debug)]
pub struct ProtocolReport {
    pub scheme: Scheme,
    pub output: OutputState,
    pub round_probabilities: Vec<f64>,
    pub total_probability: f64,
    /// Probability densities of the homodyne heralds (one per breeding
    /// level), kept out of the discrete probability product.
    pub homodyne_densities: Vec<f64>,
    pub generation_rate: Option<f64>,
    pub fidelity: Option<FidelityReport>,
    /// Gaussian corrections applied to the output: (squeeze, displacement).
    pub corrections: Option<(f64, C64)>,
    pub squeezing: Option<SqueezingReport>,
    pub health: Vec<HealthFlag>,
}

impl ProtocolReport {
    fn new(scheme: Scheme, output: OutputState) -> Self {
        ProtocolReport {
            scheme,
            output,
            round_probabilities: Vec::new(),
            total_probability: 1.0,
            homodyne_densities: Vec::new(),
            generation_rate: None,
            fidelity: None,
            corrections: None,
            squeezing: None,
            health: Vec::new(),
        }
    }

    fn flag_health(&mut self, stage: &str, h: HealthReport) {
        if !h.healthy {
            self.health
                .push(HealthFlag { stage: stage.into(), guard_population: h.guard_population });
        }
    }
}

/// `rate = P_tot * clock`.
pub fn generation_rate(p_tot: f64, clock_rate: f64) -> f64 {
    p_tot * clock_rate
}

/// Heralded Fock-state preparation on an OPA/SPDC source seeded with
/// vacuum: the normalized output is exactly `|n>` and the success
/// probability is the Schmidt weight `lambda^{2n} (1 - lambda^2)`,
/// `lambda = tanh(kappa/2)`.
pub fn fock_prep(
    n: usize,
    kappa: f64,
    trunc: Truncation,
) -> Result<crate::measurement::HeraldedResult<PureState>> {
    if n >= trunc.dim {
        return Err(SimError::InvalidParameter(format!("Fock prep n={n} needs dim > n")));
    }
    let lambda = (kappa / 2.0).tanh();
    let p = lambda.powi(2 * n as i32) * (1.0 - lambda * lambda);
    if p <= 0.0 {
        return Err(SimError::ZeroProbabilityHerald(format!("Fock prep n={n}, kappa={kappa}")));
    }
    let normalized = PureState::fock(trunc, n);
    let mut amps = normalized.amplitudes().clone();
    amps[n] *= C64::new(p.sqrt(), 0.0);
    Ok(crate::measurement::HeraldedResult {
        unnormalized: PureState::new(trunc, amps),
        weight: HeraldWeight::Probability(p),
        normalized,
    })
}

/// Noisy Fock preparation: the diagonal signal mixture and total probability
/// when the SPDC idler is read by an imperfect detector.
/// Returns `(weights over true photon number m, P_Fock)` with the weights
/// normalized.
pub fn fock_prep_noisy(
    n: usize,
    kappa: f64,
    model: &DetectorModel,
    dim: usize,
) -> Result<(Vec<f64>, f64)> {
    let lambda = (kappa / 2.0).tanh();
    if model.is_ideal() {
        let p = lambda.powi(2 * n as i32) * (1.0 - lambda * lambda);
        let mut w = vec![0.0; dim];
        w[n] = 1.0;
        return Ok((w, p));
    }
    let params = model.thermal_loss_params()?;
    let q = crate::channels::detector_confusion_row(n, &params, dim);
    let mut weights = vec![0.0f64; dim];
    let mut total = 0.0;
    for (m, w) in weights.iter_mut().enumerate() {
        let pm = lambda.powi(2 * m as i32) * (1.0 - lambda * lambda);
        *w = q[m] * pm;
        total += *w;
    }
    if total <= 0.0 {
        return Err(SimError::ZeroProbabilityHerald(format!("noisy Fock prep n={n}")));
    }
    for w in &mut weights {
        *w /= total;
    }
    Ok((weights, total))
}

/// The two-mode state `U_OPA(kappa) (|psi> (x) |0>)` assembled column by
/// column from the closed-form heralded Kraus family (column `m` is
/// `M_m |psi>`), in O(dim^2).
pub fn opa_two_mode(kappa: f64, seed: &PureState) -> TwoModePureState {
    let trunc = *seed.trunc();
    let d = trunc.dim;
    let lambda = (kappa / 2.0).tanh();
    let sech = 1.0 / (kappa / 2.0).cosh();
    let mut amps = DMatrix::<C64>::zeros(d, d);
    // amp(j, m) = (-lambda)^m sech^{j+1} sqrt(C(j+m, m)); iterate in m.
    for j in 0..d {
        let cj = seed.amplitudes()[j];
        if cj.norm_sqr() == 0.0 {
            continue;
        }
        let mut w = sech.powi(j as i32 + 1);
        for m in 0..d - j {
            if m > 0 {
                w *= -lambda * (((j + m) as f64) / (m as f64)).sqrt();
            }
            amps[(j + m, m)] += cj * w;
        }
    }
    TwoModePureState::new(trunc, trunc, amps)
}

fn herald_round(
    state: &OutputState,
    kappa: f64,
    n: usize,
    detector: &DetectorModel,
) -> Result<(OutputState, f64)> {
    match (state, detector.is_ideal()) {
        (OutputState::Pure(psi), true) => {
            let joint = opa_two_mode(kappa, psi);
            let r = herald_pnrd(&joint, Mode::Two, n)?;
            Ok((OutputState::Pure(r.normalized), r.weight.probability()))
        }
        (OutputState::Pure(psi), false) => {
            let joint = opa_two_mode(kappa, psi);
            let r = noisy_herald_pnrd(&joint, Mode::Two, n, detector)?;
            Ok((OutputState::Mixed(r.normalized), r.weight.probability()))
        }
        (OutputState::Mixed(rho), true) => {
            let m = crate::operators::heralded_opa_kraus(kappa, n, *rho.trunc());
            let out = m.sandwich(rho);
            let p = out.trace();
            let (normalized, _) = out.normalize().map_err(|_| {
                SimError::ZeroProbabilityHerald(format!("OPA herald n={n} on mixed state"))
            })?;
            Ok((OutputState::Mixed(normalized), p))
        }
        (OutputState::Mixed(rho), false) => {
            let params = detector.thermal_loss_params()?;
            let trunc = *rho.trunc();
            let branches: Vec<(f64, Vec<DVector<C64>>)> = rho
                .factor(1e-14)
                .into_iter()
                .map(|(p, u)| {
                    let norm: f64 = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    let seed = PureState::new(trunc, u.map(|z| z / C64::new(norm, 0.0)));
                    let joint = opa_two_mode(kappa, &seed);
                    let slices: Vec<DVector<C64>> = (0..trunc.dim)
                        .map(|m| {
                            DVector::from_iterator(
                                trunc.dim,
                                joint.amplitudes().column(m).iter().copied(),
                            )
                        })
                        .collect();
                    (p * norm * norm, slices)
                })
                .collect();
            let r = noisy_herald_mixture(trunc, &branches, n, &params)?;
            Ok((OutputState::Mixed(r.normalized), r.weight.probability()))
        }
    }
}

/// Photon-added squeezed state from the OPA source: seed `S(r)|0>`, herald
/// `n` photons on the idler.
pub fn photon_add_opa(
    r_seed: f64,
    kappa: f64,
    n: usize,
    trunc: Truncation,
    detector: &DetectorModel,
) -> Result<ProtocolReport> {
    let seed = squeezed_vacuum(r_seed, trunc);
    let seed_health = seed.truncation_health();
    let (out, p) = herald_round(&OutputState::Pure(seed), kappa, n, detector)?;
    let mut report = ProtocolReport::new(Scheme::PhotonAddOpa, out);
    report.flag_health("seed", seed_health);
    let oh = report.output.truncation_health();
    report.flag_health("herald", oh);
    report.round_probabilities.push(p);
    report.total_probability = p;
    Ok(report)
}

/// Coherent-seeded OPA pipeline for approximate cubic-phase states.
pub fn cubic_opa(
    alpha: C64,
    kappa: f64,
    n: usize,
    trunc: Truncation,
) -> Result<ProtocolReport> {
    let seed = crate::targets::coherent(alpha, trunc);
    let seed_health = seed.truncation_health();
    let (out, p) = herald_round(&OutputState::Pure(seed), kappa, n, &DetectorModel::ideal())?;
    let mut report = ProtocolReport::new(Scheme::CubicOpa, out);
    report.flag_health("seed", seed_health);
    let oh = report.output.truncation_health();
    report.flag_health("herald", oh);
    report.round_probabilities.push(p);
    report.total_probability = p;
    Ok(report)
}

/// Discrete photon addition: a heralded Fock state `|n>` interferes with the
/// squeezed seed on `BS(tau)`; the transmitted port heralds vacuum. The total
/// probability includes the Fock preparation.
pub fn photon_add_fock(
    r_seed: f64,
    n: usize,
    kappa_fock: f64,
    tau: f64,
    trunc: Truncation,
    detector: &DetectorModel,
) -> Result<ProtocolReport> {
    let seed = squeezed_vacuum(r_seed, trunc);
    let seed_health = seed.truncation_health();
    let blocks = BsBlocks::new(tau, trunc.dim)?;
    let (fock_weights, p_fock) = fock_prep_noisy(n, kappa_fock, detector, trunc.dim)?;

    let mut report;
    let mut p_herald = 0.0;
    if detector.is_ideal() {
        let joint = blocks.apply(&crate::fock::tensor_pure(&seed, &PureState::fock(trunc, n)));
        let r = herald_pnrd(&joint, Mode::Two, 0)?;
        p_herald = r.weight.probability();
        report = ProtocolReport::new(Scheme::PhotonAddFock, OutputState::Pure(r.normalized));
    } else {
        // mixture over the true Fock occupation of the ancilla
        let d = trunc.dim;
        let mut acc = DMatrix::<C64>::zeros(d, d);
        for (m, &w) in fock_weights.iter().enumerate() {
            if w < 1e-18 {
                continue;
            }
            let joint =
                blocks.apply(&crate::fock::tensor_pure(&seed, &PureState::fock(trunc, m)));
            let r = noisy_herald_pnrd(&joint, Mode::Two, 0, detector)?;
            p_herald += w * r.weight.probability();
            acc += r.unnormalized.matrix().map(|z| z * w);
        }
        if p_herald <= 0.0 {
            return Err(SimError::ZeroProbabilityHerald("Fock-scheme vacuum herald".into()));
        }
        let rho = DensityOperator::new(trunc, acc.map(|z| z / p_herald));
        report = ProtocolReport::new(Scheme::PhotonAddFock, OutputState::Mixed(rho));
    }
    report.flag_health("seed", seed_health);
    let oh = report.output.truncation_health();
    report.flag_health("herald", oh);
    report.round_probabilities = vec![p_fock, p_herald];
    report.total_probability = p_fock * p_herald;
    Ok(report)
}

/// Coherent + Fock cubic-phase scheme: `|alpha>` meets `|n>` on a balanced
/// beamsplitter, heralded on the zero-photon outcome.
pub fn cubic_fock(
    alpha: C64,
    n: usize,
    kappa_fock: f64,
    trunc: Truncation,
) -> Result<ProtocolReport> {
    let seed = crate::targets::coherent(alpha, trunc);
    let seed_health = seed.truncation_health();
    let blocks = BsBlocks::new(0.5, trunc.dim)?;
    let prep = fock_prep(n, kappa_fock, trunc)?;
    let joint = blocks.apply(&crate::fock::tensor_pure(&seed, &prep.normalized));
    let r = herald_pnrd(&joint, Mode::Two, 0)?;
    let p_fock = prep.weight.probability();
    let p0 = r.weight.probability();
    let mut report = ProtocolReport::new(Scheme::CubicFock, OutputState::Pure(r.normalized));
    report.flag_health("seed", seed_health);
    report.round_probabilities = vec![p_fock, p0];
    report.total_probability = p_fock * p0;
    Ok(report)
}

/// Gaussian correction `S(r) D(beta) rho D+(beta) S+(r)`.
pub fn gaussian_correct(state: &OutputState, r: f64, beta: C64) -> OutputState {
    let ops = GaussianOps::new(*state.trunc());
    gaussian_correct_with(&ops, state, r, beta)
}

/// [`gaussian_correct`] with a caller-held operator factory.
pub fn gaussian_correct_with(
    ops: &GaussianOps,
    state: &OutputState,
    r: f64,
    beta: C64,
) -> OutputState {
    match state {
        OutputState::Pure(psi) => {
            let v = ops.apply_displace(beta, psi.amplitudes());
            let v = ops.apply_squeeze(r, &v);
            // unitary application preserves the norm up to truncation dust
            let n2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            let v = if n2 > 1.0 { v.map(|z| z / C64::new(n2.sqrt(), 0.0)) } else { v };
            OutputState::Pure(PureState::new(*psi.trunc(), v))
        }
        OutputState::Mixed(rho) => {
            let trunc = *rho.trunc();
            let branches = rho.factor(1e-14);
            let d = trunc.dim;
            let mut acc = DMatrix::<C64>::zeros(d, d);
            for (p, u) in branches {
                let v = ops.apply_squeeze(r, &ops.apply_displace(beta, &u));
                for rr in 0..d {
                    let vr = v[rr] * C64::new(p, 0.0);
                    for cc in 0..d {
                        acc[(rr, cc)] += vr * v[cc].conj();
                    }
                }
            }
            let tr: f64 = (0..d).map(|i| acc[(i, i)].re).sum();
            if tr > 1.0 {
                acc = acc.map(|z| z / tr);
            }
            OutputState::Mixed(DensityOperator::new(trunc, acc))
        }
    }
}

/// Where the lossy optical switch acts in a multi-round pipeline. Single
/// round schemes (`rounds == 1`) have no switch in the path either way.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SwitchLossPolicy {
    /// Only the feedback re-injections: `rounds - 1` passes.
    FeedbackOnly,
    /// Feedback re-injections plus the final routing out of the loop:
    /// `rounds` passes. This is the default; it tracks the published loss
    /// thresholds far more closely than the feedback-only reading.
    FeedbackAndExit,
}

/// Configuration of the iterative squeezed-cat pipeline.
#[derive(Clone, Copy, Debug)]
pub struct CatBreedConfig {
    pub r_seed: f64,
    pub kappa: f64,
    /// Photons heralded in every round.
    pub herald_n: usize,
    /// Number of successful OPA rounds.
    pub rounds: usize,
    /// Optical-switch transmissivity per pass (`1.0` = lossless).
    pub tau_switch: f64,
    pub loss_policy: SwitchLossPolicy,
    pub detector: DetectorModel,
    pub trunc: Truncation,
}

impl CatBreedConfig {
    pub fn lossless(r_seed: f64, kappa: f64, herald_n: usize, rounds: usize, trunc: Truncation) -> Self {
        CatBreedConfig {
            r_seed,
            kappa,
            herald_n,
            rounds,
            tau_switch: 1.0,
            loss_policy: SwitchLossPolicy::FeedbackAndExit,
            detector: DetectorModel::ideal(),
            trunc,
        }
    }
}

/// Iterative OPA breeding of squeezed-cat states. Seeded with `S(r)|0>`,
/// each round feeds the previous output back into the OPA and heralds
/// `herald_n` photons; the total success probability is the product of the
/// per-round probabilities. With a squeezed-vacuum seed the output parity is
/// `(-1)^(herald_n * rounds)`.
pub fn cat_breed(config: &CatBreedConfig) -> Result<ProtocolReport> {
    if config.rounds == 0 {
        return Err(SimError::InvalidParameter("cat breeding needs rounds >= 1".into()));
    }
    if !(0.0..=1.0).contains(&config.tau_switch) {
        return Err(SimError::InvalidParameter(format!(
            "switch transmissivity {}",
            config.tau_switch
        )));
    }
    let seed = squeezed_vacuum(config.r_seed, config.trunc);
    let mut report = ProtocolReport::new(Scheme::CatBreed, OutputState::Pure(seed.clone()));
    report.flag_health("seed", seed.truncation_health());
    let mut state = OutputState::Pure(seed);
    let mut probs = Vec::with_capacity(config.rounds);
    let lossy = config.rounds > 1 && config.tau_switch < 1.0;
    let switch = |s: &OutputState| -> Result<OutputState> {
        Ok(OutputState::Mixed(pure_loss(&s.to_density(), config.tau_switch)?))
    };
    for round in 1..=config.rounds {
        if round > 1 && lossy {
            state = switch(&state)?;
        }
        let (next, p) =
            herald_round(&state, config.kappa, config.herald_n, &config.detector).map_err(
                |e| match e {
                    SimError::ZeroProbabilityHerald(msg) => {
                        SimError::ZeroProbabilityHerald(format!("round {round}: {msg}"))
                    }
                    other => other,
                },
            )?;
        state = next;
        probs.push(p);
    }
    if lossy && config.loss_policy == SwitchLossPolicy::FeedbackAndExit {
        state = switch(&state)?;
    }
    report.flag_health("bred cat", state.truncation_health());
    report.output = state;
    report.total_probability = probs.iter().product();
    report.round_probabilities = probs;
    Ok(report)
}

/// Number of breeding levels that reproduces the paper's grid states: three
/// rounds of the iterated cat-breeding tree (eight cats per grid state).
/// One round alone leaves the comb at half the stabilizer lattice spacing.
pub const DEFAULT_BREED_LEVELS: usize = 3;

/// Reusable context for GKP breeding at one truncation.
pub struct BreedContext {
    pub blocks: BsBlocks,
    pub ops: GaussianOps,
    /// Breeding-tree depth; level `j` interferes two copies of level
    /// `j - 1`'s output on the balanced beamsplitter.
    pub levels: usize,
}

impl BreedContext {
    pub fn new(trunc: Truncation) -> Result<Self> {
        Self::with_levels(trunc, DEFAULT_BREED_LEVELS)
    }

    pub fn with_levels(trunc: Truncation, levels: usize) -> Result<Self> {
        if levels == 0 {
            return Err(SimError::InvalidParameter("breeding needs at least one level".into()));
        }
        Ok(BreedContext {
            blocks: BsBlocks::new(0.5, trunc.dim)?,
            ops: GaussianOps::new(trunc),
            levels,
        })
    }
}

/// Breed a GKP state from identical squeezed cats: at each level two copies
/// of the previous level interfere on a balanced beamsplitter and one
/// output is heralded on the x-homodyne outcome 0; after the final level
/// the squeezing correction `r_corr = (1/4) ln(Var x / Var p)` sets the
/// lattice spacing. Reports the effective squeezing of both quadratures.
///
/// The cats must carry their interference fringes along x (OPA breeding
/// from a squeezed seed, `r > 0`, produces exactly that orientation).
pub fn gkp_breed(cat: &OutputState, ctx: &BreedContext) -> Result<ProtocolReport> {
    let mut state = cat.clone();
    let mut densities = Vec::with_capacity(ctx.levels);
    for _ in 0..ctx.levels {
        let (next, density) = match &state {
            OutputState::Pure(psi) => {
                let joint = ctx.blocks.apply(&crate::fock::tensor_pure(psi, psi));
                let r = herald_homodyne_x0(&joint, Mode::Two)?;
                (OutputState::Pure(r.normalized), r.weight.value())
            }
            OutputState::Mixed(rho) => {
                let r = herald_homodyne_x0_product(rho, rho, &ctx.blocks)?;
                (OutputState::Mixed(r.normalized), r.weight.value())
            }
        };
        state = next;
        densities.push(density);
    }
    let r_corr = match &state {
        OutputState::Pure(p) => squeezing_correction_pure(p),
        OutputState::Mixed(m) => squeezing_correction_density(m),
    };
    let corrected = gaussian_correct_with(&ctx.ops, &state, r_corr, C64::new(0.0, 0.0));
    let squeezing = match &corrected {
        OutputState::Pure(p) => effective_squeezing_pure(&ctx.ops, p),
        OutputState::Mixed(m) => effective_squeezing_density(&ctx.ops, m),
    };
    let mut report = ProtocolReport::new(Scheme::GkpBreed, corrected);
    report.flag_health("bred GKP", report.output.truncation_health());
    report.homodyne_densities = densities;
    report.corrections = Some((r_corr, C64::new(0.0, 0.0)));
    report.squeezing = Some(squeezing);
    Ok(report)
}

/// Full cat-then-GKP pipeline; the report carries the cat's probability
/// bookkeeping (the homodyne densities are reported separately, never
/// folded into the rate).
pub fn gkp_pipeline(config: &CatBreedConfig, ctx: &BreedContext) -> Result<ProtocolReport> {
    let cat = cat_breed(config)?;
    let mut report = gkp_breed(&cat.output, ctx)?;
    report.round_probabilities = cat.round_probabilities.clone();
    report.total_probability = cat.total_probability;
    report.health.extend(cat.health);
    Ok(report)
}

/// Outcome of a loss-threshold search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LossThreshold {
    /// Maximum tolerable per-round loss (as a fraction, not percent).
    PerRoundLoss(f64),
    /// Single-round schemes have no switch in the path.
    NotApplicable,
    /// Even the lossless pipeline misses the floor.
    NeverAboveThreshold,
}

/// Bisect the per-round switch loss until the effective symmetric GKP
/// squeezing crosses `floor_db`. Loss resolution 1e-4 (0.01%).
pub fn find_loss_threshold(
    config: &CatBreedConfig,
    ctx: &BreedContext,
    floor_db: f64,
) -> Result<LossThreshold> {
    if config.rounds <= 1 {
        return Ok(LossThreshold::NotApplicable);
    }
    let sym_at = |loss: f64| -> Result<f64> {
        let mut c = *config;
        c.tau_switch = 1.0 - loss;
        let rep = gkp_pipeline(&c, ctx)?;
        Ok(rep.squeezing.expect("gkp pipeline reports squeezing").symmetric_db)
    };
    let tol = 1e-4;
    if sym_at(0.0)? < floor_db {
        return Ok(LossThreshold::NeverAboveThreshold);
    }
    // expand until below the floor
    let mut hi = 0.002;
    while sym_at(hi)? >= floor_db {
        hi *= 2.0;
        if hi > 0.5 {
            return Ok(LossThreshold::PerRoundLoss(0.5));
        }
    }
    let mut lo = if hi > 0.002 { hi / 2.0 } else { 0.0 };
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if sym_at(mid)? >= floor_db {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(LossThreshold::PerRoundLoss(0.5 * (lo + hi)))
}

/// Declarative protocol configuration; scheme-specific parameter presence is
/// checked at dispatch. The CLI scenario layer builds these.
#[derive(Clone, Debug)]
pub struct ProtocolConfig {
    pub scheme: Scheme,
    pub kappa: f64,
    /// Squeezed-vacuum seed parameter (photon-add / cat / GKP pipelines).
    pub seed_r: Option<f64>,
    /// Coherent seed (cubic pipelines).
    pub seed_alpha: Option<C64>,
    /// Photons heralded per PNRD event.
    pub herald_n: usize,
    /// OPA rounds (cat/GKP breeding).
    pub rounds: usize,
    /// Fock-addition beamsplitter transmissivity.
    pub tau: Option<f64>,
    pub tau_switch: f64,
    pub loss_policy: SwitchLossPolicy,
    pub detector: DetectorModel,
    pub breed_levels: usize,
    pub clock_rate: Option<f64>,
    pub trunc: Truncation,
}

impl ProtocolConfig {
    pub fn new(scheme: Scheme, kappa: f64, trunc: Truncation) -> Self {
        ProtocolConfig {
            scheme,
            kappa,
            seed_r: None,
            seed_alpha: None,
            herald_n: 0,
            rounds: 1,
            tau: None,
            tau_switch: 1.0,
            loss_policy: SwitchLossPolicy::FeedbackAndExit,
            detector: DetectorModel::ideal(),
            breed_levels: DEFAULT_BREED_LEVELS,
            clock_rate: None,
            trunc: trunc,
        }
    }

    fn require_r(&self) -> Result<f64> {
        self.seed_r.ok_or_else(|| {
            SimError::InvalidParameter(format!("{:?} needs a squeezed seed r", self.scheme))
        })
    }

    fn require_alpha(&self) -> Result<C64> {
        self.seed_alpha.ok_or_else(|| {
            SimError::InvalidParameter(format!("{:?} needs a coherent seed alpha", self.scheme))
        })
    }

    fn cat_config(&self) -> Result<CatBreedConfig> {
        Ok(CatBreedConfig {
            r_seed: self.require_r()?,
            kappa: self.kappa,
            herald_n: self.herald_n,
            rounds: self.rounds,
            tau_switch: self.tau_switch,
            loss_policy: self.loss_policy,
            detector: self.detector,
            trunc: self.trunc,
        })
    }

    /// Run the configured pipeline.
    pub fn run(&self) -> Result<ProtocolReport> {
        let mut report = match self.scheme {
            Scheme::FockPrep => {
                let r = fock_prep(self.herald_n, self.kappa, self.trunc)?;
                let mut rep =
                    ProtocolReport::new(Scheme::FockPrep, OutputState::Pure(r.normalized));
                rep.round_probabilities = vec![r.weight.probability()];
                rep.total_probability = r.weight.probability();
                rep
            }
            Scheme::PhotonAddOpa => photon_add_opa(
                self.require_r()?,
                self.kappa,
                self.herald_n,
                self.trunc,
                &self.detector,
            )?,
            Scheme::PhotonAddFock => photon_add_fock(
                self.require_r()?,
                self.herald_n,
                self.kappa,
                self.tau.ok_or_else(|| {
                    SimError::InvalidParameter("photon_add_fock needs tau".into())
                })?,
                self.trunc,
                &self.detector,
            )?,
            Scheme::CubicOpa => {
                cubic_opa(self.require_alpha()?, self.kappa, self.herald_n, self.trunc)?
            }
            Scheme::CubicFock => {
                cubic_fock(self.require_alpha()?, self.herald_n, self.kappa, self.trunc)?
            }
            Scheme::CatBreed => cat_breed(&self.cat_config()?)?,
            Scheme::GkpBreed => {
                let ctx = BreedContext::with_levels(self.trunc, self.breed_levels)?;
                gkp_pipeline(&self.cat_config()?, &ctx)?
            }
        };
        if let Some(clock) = self.clock_rate {
            report.generation_rate = Some(generation_rate(report.total_probability, clock));
        }
        Ok(report)
    }
}

/// Rotate a state by a quarter period in phase space (`e^{i pi n / 2}`),
/// exchanging the roles of x and p. Used before fidelity comparisons of
/// cats bred from squeezed (`r > 0`) seeds against x-displaced ideal cats.
pub fn rotate_quarter(psi: &PureState) -> PureState {
    let i_pow =
        [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0)];
    let amps = DVector::from_fn(psi.dim(), |n, _| psi.amplitudes()[n] * i_pow[n % 4]);
    PureState::new(*psi.trunc(), amps)
}

/// Maximize fidelity of a photon-added pipeline output against the ideal
/// `(a+)^n S(r2)|0>` over the target squeezing `r2`.
pub fn optimize_photon_added_fidelity(
    output: &OutputState,
    n: usize,
    bounds: (f64, f64),
    start: f64,
) -> Result<FidelityReport> {
    let trunc = *output.trunc();
    let objective = move |params: &[f64]| -> f64 {
        let target = ideal_photon_added_squeezed(params[0], n, trunc);
        output.fidelity_to(&target)
    };
    let problem = OptimizationProblem {
        objective: &objective,
        bounds: vec![bounds],
        starts: vec![vec![start]],
        tolerances: Tolerances { f_tol: 1e-10, x_tol: 1e-7 },
        max_evals: 400,
    };
    let out = maximize(&problem)?;
    Ok(FidelityReport { value: out.best_value, params: vec![("r2".into(), out.best_params[0])] })
}

/// Maximize fidelity of a cubic pipeline output against `e^{i gamma x^3}|0>`
/// over the Gaussian corrections `(r, b)` with `beta = i b` (the optimum
/// displacement is along the imaginary axis for these pipelines; a full
/// complex search is available through `allow_complex`).
pub fn optimize_cubic_fidelity(
    output: &OutputState,
    gamma: f64,
    allow_complex: bool,
) -> Result<FidelityReport> {
    let trunc = *output.trunc();
    let target = ideal_cubic(gamma, trunc)?;
    let ops = GaussianOps::new(trunc);
    let psi = output
        .as_pure()
        .ok_or_else(|| SimError::InvalidParameter("cubic optimization needs a pure state".into()))?
        .clone();

    if allow_complex {
        let objective = move |params: &[f64]| -> f64 {
            let corrected =
                ops.apply_squeeze(params[0], &ops.apply_displace(C64::new(params[2], params[1]), psi.amplitudes()));
            let mut overlap = C64::new(0.0, 0.0);
            for i in 0..corrected.len() {
                overlap += target.amplitudes()[i].conj() * corrected[i];
            }
            overlap.norm_sqr()
        };
        let problem = OptimizationProblem {
            objective: &objective,
            bounds: vec![(-1.5, 1.5), (-4.5, 4.5), (-4.5, 4.5)],
            starts: vec![vec![0.4, 2.5, 0.0], vec![0.4, -2.5, 0.0], vec![0.0, 0.0, 0.0]],
            tolerances: Tolerances { f_tol: 1e-10, x_tol: 1e-7 },
            max_evals: 3000,
        };
        let out = maximize(&problem)?;
        return Ok(FidelityReport {
            value: out.best_value,
            params: vec![
                ("r_corr".into(), out.best_params[0]),
                ("beta_im".into(), out.best_params[1]),
                ("beta_re".into(), out.best_params[2]),
            ],
        });
    }

    let objective = move |params: &[f64]| -> f64 {
        let corrected = ops
            .apply_squeeze(params[0], &ops.apply_displace(C64::new(0.0, params[1]), psi.amplitudes()));
        let mut overlap = C64::new(0.0, 0.0);
        for i in 0..corrected.len() {
            overlap += target.amplitudes()[i].conj() * corrected[i];
        }
        overlap.norm_sqr()
    };
    let problem = OptimizationProblem {
        objective: &objective,
        bounds: vec![(-1.5, 1.5), (-4.5, 4.5)],
        starts: Vec::new(),
        tolerances: Tolerances { f_tol: 1e-10, x_tol: 1e-7 },
        max_evals: 4000,
    };
    // coarse grid seeds both displacement signs
    let mut grid = Vec::new();
    for ir in 0..7 {
        for ib in 0..19 {
            grid.push(vec![-0.3 + 0.25 * ir as f64, -4.0 + ib as f64 * 0.45]);
        }
    }
    let starts = crate::optimize::grid_refine(&problem, &grid, 3)?;
    let problem = OptimizationProblem { starts, ..problem };
    let out = maximize(&problem)?;
    Ok(FidelityReport {
        value: out.best_value,
        params: vec![
            ("r_corr".into(), out.best_params[0]),
            ("beta_im".into(), out.best_params[1]),
        ],
    })
}

/// Maximize fidelity of a bred cat against the ideal squeezed-cat family
/// over `(alpha, r2)`. `rotate` applies the quarter-period rotation first
/// (for `r_seed > 0` cats whose fringes lie along x).
pub fn optimize_cat_fidelity(
    output: &OutputState,
    parity: CatParity,
    rotate: bool,
    bounds_alpha: (f64, f64),
    bounds_r: (f64, f64),
    start: (f64, f64),
) -> Result<FidelityReport> {
    let trunc = *output.trunc();
    let ops = GaussianOps::new(trunc);
    let state = match output {
        OutputState::Pure(p) => {
            OutputState::Pure(if rotate { rotate_quarter(p) } else { p.clone() })
        }
        OutputState::Mixed(m) => {
            if rotate {
                return Err(SimError::InvalidParameter(
                    "rotation before comparison is only wired for pure cats".into(),
                ));
            }
            OutputState::Mixed(m.clone())
        }
    };
    let objective = move |params: &[f64]| -> f64 {
        match ideal_cat_with(&ops, &CatSpec { alpha: params[0], r: params[1], parity }) {
            Ok(target) => state.fidelity_to(&target),
            Err(_) => 0.0,
        }
    };
    let problem = OptimizationProblem {
        objective: &objective,
        bounds: vec![bounds_alpha, bounds_r],
        starts: vec![vec![start.0, start.1]],
        tolerances: Tolerances { f_tol: 1e-9, x_tol: 1e-6 },
        max_evals: 1500,
    };
    let out = maximize(&problem)?;
    Ok(FidelityReport {
        value: out.best_value,
        params: vec![("alpha".into(), out.best_params[0]), ("r2".into(), out.best_params[1])],
    })
}
