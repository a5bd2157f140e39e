//! Non-dominated selection on a batch of reward vectors.
//!
//! ```text
//! cargo run --release --example pareto_front
//! ```

use pareto_rl::pareto::{dominates, nd_fraction, nd_set, RewardVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> pareto_rl::Result<()> {
    let batch: Vec<RewardVector> = [[1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [0.25, 0.25], [0.5, 0.5]]
        .iter()
        .map(|v| RewardVector::new(v.to_vec()))
        .collect::<pareto_rl::Result<_>>()?;
    let mask = nd_set(&batch)?;
    println!("front of {:?}", batch.iter().map(|r| r.values()).collect::<Vec<_>>());
    println!("  selected {:?} ({} of {})", mask.selected(), mask.count(), mask.batch_size());
    println!("  [0.5,0.5] dominates [0.25,0.25]: {}", dominates(&batch[2], &batch[3])?);
    println!("  duplicates dominate each other: {}", dominates(&batch[2], &batch[4])?);

    // more objectives leave fewer samples dominated
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    println!("\nmean nd_fraction of 100 uniform batches, N = 256");
    for k in 2..=5 {
        let mut sum = 0.0;
        for _ in 0..100 {
            let b: Vec<RewardVector> = (0..256)
                .map(|_| RewardVector::new((0..k).map(|_| rng.random()).collect()))
                .collect::<pareto_rl::Result<_>>()?;
            sum += nd_fraction(&b)?;
        }
        println!("  K = {k}: {:.3}", sum / 100.0);
    }
    Ok(())
}
