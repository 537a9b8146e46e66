//! The full recovery pipeline on one window: empirical birth law, the
//! "ugly duckling" branch (most surprising surviving lineage relative to the
//! size-biased law), the branch-corrected birth law, and the tilt estimates.

use spinal::estimate::run_pipeline;
use spinal::prob::{l1_distance, special_law, Distribution, TransformFn};
use spinal::tree::simulate_sst;

fn main() {
    let mu = Distribution::new(vec![0.35, 0.4, 0.25]).unwrap();
    let f = TransformFn::new(vec![0.0, 1.0, 3.0]).unwrap();
    let nu = special_law(&mu, &f).unwrap();
    let f_star = f.normalized(&mu).unwrap();

    let tree = simulate_sst(&mu, &f, 125, 31).unwrap();
    println!("truth: mu = {:?}, nu = {:?}", mu.probs(), nu.probs());

    for h in [10, 40, 125] {
        let observed = tree.observe(h).unwrap().with_n_max(mu.n_max()).unwrap();
        let bundle = run_pipeline(&observed).unwrap();

        let err_mu = l1_distance(bundle.mu_star.probs(), mu.probs()).unwrap();
        let err_nu = l1_distance(bundle.nu_hat.probs(), nu.probs()).unwrap();
        let overlap = bundle.true_spine_overlap.unwrap();
        println!(
            "\nh = {h}: window has {} nodes, {} candidate branches",
            bundle.num_observed, bundle.num_candidates
        );
        println!("  chosen branch ends at node {}", bundle.spine_leaf);
        println!("  spine overlap with truth: {overlap:.3}");
        println!("  mu*  = {:?}  (L1 error {err_mu:.4})", bundle.mu_star.probs());
        println!("  nu   = {:?}  (L1 error {err_nu:.4})", bundle.nu_hat.probs());
        println!(
            "  f    = {:?}  vs normalized truth {:?}",
            bundle.f_hat.weights(),
            f_star.weights()
        );
        if !bundle.f_hat_infinite.is_empty() {
            println!("  (tilt flagged infinite at {:?})", bundle.f_hat_infinite);
        }
    }
}
