use opa_sim::channels::pure_loss;
use opa_sim::fock::Truncation;
use opa_sim::measurement::herald_homodyne_x0_product;
use opa_sim::metrics::*;
use opa_sim::protocols::*;
use opa_sim::C64;

fn main() {
    let t = Truncation::new(170);
    let ctx = BreedContext::new(t).unwrap();
    // hypothesis variants for where switch loss acts, tested on (4,2) at its
    // claimed threshold 1.70% and (1,6) at 0.16%, (3,3) at 1.12%
    for (n, k, db, loss_pct) in [
        (4usize, 2usize, 1.44f64, 1.70f64),
        (3, 3, 1.72, 1.12),
        (1, 6, 2.33, 0.16),
        (1, 7, 2.66, 0.51),
    ] {
        let tau = 1.0 - loss_pct / 100.0;
        // A: between cat rounds only (k-1)
        let mut cfg = CatBreedConfig::lossless(db_to_r(db), 0.7082, n, k, t);
        cfg.tau_switch = tau;
        let a = gkp_pipeline(&cfg, &ctx).unwrap().squeezing.unwrap().symmetric_db;
        // B: A + exit pass through the switch after the final round
        let cat = cat_breed(&cfg).unwrap();
        let lossy_cat = pure_loss(&cat.output.to_density(), tau).unwrap();
        let b_rep = gkp_breed(&OutputState::Mixed(lossy_cat.clone()), &ctx).unwrap();
        let b = b_rep.squeezing.unwrap().symmetric_db;
        // C: B + loss on each intermediate bred state between levels
        let mut state = lossy_cat;
        for _ in 0..3 {
            let r = herald_homodyne_x0_product(&state, &state, &ctx.blocks).unwrap();
            state = pure_loss(&r.normalized, tau).unwrap();
        }
        // final correction on the (over-lossed) output; undo the extra last pass by just correcting anyway
        let r_corr = squeezing_correction_density(&state);
        let corrected = gaussian_correct_with(&ctx.ops, &OutputState::Mixed(state), r_corr, C64::new(0.0, 0.0));
        let c = match &corrected {
            OutputState::Mixed(m) => effective_squeezing_density(&ctx.ops, m).symmetric_db,
            _ => unreachable!(),
        };
        println!("({n},{k}) @ {loss_pct}%: A {a:.3} dB | B {b:.3} dB | C {c:.3} dB  (want 9.75)");
    }
}
