//! Pairwise one-tailed Z-tests and the resulting best-system cluster.
//!
//!     cargo run -p tqh --example significance

use tqh::{best_cluster, z_test, AccuracyCell, SignificanceConfig};

fn main() -> tqh::Result<()> {
    let cfg = SignificanceConfig::default();
    println!("critical z at {}: {:.4}", cfg.alpha, cfg.critical_z);

    let test = z_test(60, 60, 57, 60, &cfg)?;
    println!("60/60 vs 57/60: z = {:.4}, significant = {}", test.z, test.significant);

    let row: Vec<(String, AccuracyCell)> = [("A", 91), ("B", 88), ("C", 84), ("D", 79)]
        .iter()
        .map(|(s, c)| (s.to_string(), AccuracyCell { correct: *c, total: 100 }))
        .collect();
    for alpha in [0.9, 0.95, 0.99] {
        let cfg = SignificanceConfig::new(alpha)?;
        println!("alpha {alpha}: best systems {:?}", best_cluster(&row, &cfg)?);
    }
    Ok(())
}
