// Clean a noisy comparison set down to a minimal partial order.
//
// Run with `cargo run --example graph_cleanup`.

use mkpoe::graph::{build_graph, process_with, ProcessOptions};
use mkpoe::synth::{generate_raw_comparisons, plant_contradictions, reverse_fraction, Taxonomy};

pub fn run() -> mkpoe::Result<()> {
    let tax = Taxonomy::default_tree();
    let labels = tax.items(4);
    let clean = generate_raw_comparisons(&tax, &labels, 1, 1500);

    // 10% reversed edges plus 20 direct contradictions
    let (noisy, _) = reverse_fraction(&clean, 0.10, 2);
    let noisy = plant_contradictions(&noisy, 20, 3);

    let graph = build_graph(&noisy)?;
    if let Some(cycle) = graph.find_cycle() {
        println!("noisy set has a cycle of length {}", cycle.len());
    }

    let (kept, report) = process_with(&noisy, ProcessOptions::full(7))?;
    println!(
        "{} -> {} (contradictions) -> {} (acyclic) -> {} (reduced)",
        report.deduplicated, report.after_contradictions, report.after_acyclic, report.after_reduction
    );
    let reduced = build_graph(&kept)?;
    assert!(reduced.is_acyclic());
    println!("longest chain in the cleaned order: {} edges", reduced.diameter()?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().unwrap();
}
