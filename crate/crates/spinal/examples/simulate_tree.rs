//! Simulate a spinal-structured tree, look at its shape, and round-trip it
//! through both serialization formats.

use spinal::prob::{Distribution, TransformFn};
use spinal::tree::{simulate_gw, simulate_sst, Tree};

fn main() {
    let mu = Distribution::new(vec![0.35, 0.4, 0.25]).unwrap();
    let f = TransformFn::new(vec![0.0, 1.0, 3.0]).unwrap();

    let tree = simulate_sst(&mu, &f, 60, 2024).unwrap();
    println!(
        "spinal tree: {} nodes, generated through depth {}",
        tree.len(),
        tree.generated_to()
    );

    // The spine never dies, so every generation is occupied.
    let mut occupancy = vec![0u32; (tree.max_depth() + 1) as usize];
    for v in 0..tree.len() as u32 {
        occupancy[tree.depth_of(v) as usize] += 1;
    }
    println!("generation sizes (first 12): {:?}", &occupancy[..12]);

    let spine = tree.true_spine(10).unwrap();
    println!("spine through depth 10: {spine:?}");

    // A plain Galton-Watson tree with the same subcritical law dies quickly
    // most of the time.
    let mut extinct = 0;
    for seed in 0..100 {
        let gw = simulate_gw(&mu, 50, seed).unwrap();
        if gw.max_depth() < 50 {
            extinct += 1;
        }
    }
    println!("plain GW with the same law: {extinct}/100 died before depth 50");

    // Round trips are exact in both formats.
    let json = tree.to_json_string();
    let back = Tree::from_json_str(&json).unwrap();
    assert_eq!(back, tree);
    let mut flat = Vec::new();
    tree.write_flat(&mut flat).unwrap();
    assert_eq!(Tree::read_flat(flat.as_slice()).unwrap(), tree);
    println!(
        "round trips exact (json: {} bytes, flat: {} bytes)",
        json.len(),
        flat.len()
    );

    let out = std::env::temp_dir().join("spinal-demo-tree.json");
    std::fs::write(&out, json).unwrap();
    println!("wrote {}", out.display());
}
