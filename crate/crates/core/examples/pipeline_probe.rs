use torunit::config::{RunConfig, SplitMix64};
use torunit::fixtures;
use torunit::fourier::{build_mu_prime, RationalMeasure};
use std::time::Instant;

fn main() {
    let conj = fixtures::cubic_conjugacy(128);
    let cfg = RunConfig::default();
    // 64 atoms on a fine line: spacing 2^-14 (so 2^-16-separated) keeps
    // entropy in one direction at the scanned box scale.
    let denom = 1u64 << 20;
    let _ = SplitMix64::new(0);
    let step = 1u64 << 6; // 2^-14 in units of 2^-20
    let pts: Vec<Vec<u64>> = (0..64u64)
        .map(|k| vec![(209716 + k * step) % denom, 325511, 471859])
        .collect();
    let mu = RationalMeasure { denom, numerators: pts, weights: vec![1.0/64.0; 64] };
    let t0 = Instant::now();
    let alpha = 6.0 / 48.0;
    match build_mu_prime(&mu, 2f64.powi(-16), alpha, 0.25, &conj, &cfg) {
        Ok(rep) => {
            println!("elapsed: {:?}", t0.elapsed());
            println!("plan: T={} s={} l={} A={} place={} R={:.3} n_bits={}",
                rep.plan.t_step, rep.plan.s, rep.plan.l, rep.plan.a_cap, rep.plan.place, rep.plan.r_scale, rep.plan.n_power_bits);
            println!("nu_mass={:.4} floor={:.4}", rep.nu_mass, rep.mass_floor);
            println!("certificate: L1={:.3e} L2={:.3e} L2paper={:.3e} L3={:.3e} L4={:.3e} L5={:.3e}",
                rep.certificate.l1, rep.certificate.l2, rep.certificate.l2_paper, rep.certificate.l3, rep.certificate.l4, rep.certificate.l5);
            println!("measured_max={:.4e} sum={:.4e} holds={} precond={}",
                rep.certificate.measured_max, rep.certificate.sum_sharp, rep.certificate.holds, rep.certificate.precondition_ok);
            println!("decay: unavg={:.4e} avg={:.4e}", rep.unaveraged_max, rep.averaged_max);
            println!("mahler radius {:.2} budget-scale {:.2}", rep.mahler_radius, rep.mahler_budget);
            println!("support {} materialized {}", rep.support_size, rep.mu_prime.is_some());
        }
        Err(e) => println!("ERROR after {:?}: {e}", t0.elapsed()),
    }
}
