//! The categorical prompt-expansion policy: sampling, log-probabilities,
//! the vocabulary file, and a REINFORCE update towards a rewarded token.
//!
//! ```text
//! cargo run --release --example prompt_expansion
//! ```

use pareto_rl::nn::{Adam, AdamConfig};
use pareto_rl::pen::{prepend_reward_tokens, PenConfig, PenPolicy, PromptBundle, Vocabulary};
use pareto_rl::trainer::pen_gradient;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> pareto_rl::Result<()> {
    let config = PenConfig::default();
    let (pen, mut phi) = PenPolicy::init(config)?;
    let vocab = Vocabulary::numbered("exp", config.vocab);
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    let (bundle, lp) = pen.expand(&phi, 5, &mut rng)?;
    let words: Vec<&str> = bundle.expansions.iter().filter_map(|&e| vocab.name(e)).collect();
    println!("condition 5 expanded with {words:?}, log p = {lp:.3}");
    let tagged = prepend_reward_tokens(&bundle, &[3, 1, 3], 4)?;
    println!("with reward identifiers: {:?}", tagged.condition());

    // reward 1 whenever slot 0 picks token 7
    let mut opt = Adam::new(AdamConfig::with_lr(0.05));
    for step in 0..=300 {
        let batch: Vec<PromptBundle> = (0..32)
            .map(|_| pen.expand(&phi, 5, &mut rng).map(|(b, _)| b))
            .collect::<pareto_rl::Result<_>>()?;
        let rewards: Vec<f64> = batch.iter().map(|b| f64::from(b.expansions[0] == 7)).collect();
        if step % 100 == 0 {
            println!("step {step:>3}: P(slot 0 = {}) = {:.3}", vocab.name(7).unwrap_or("?"), pen.slot_probs(&phi, 5, 0)?[7]);
        }
        let refs: Vec<&PromptBundle> = batch.iter().collect();
        phi.zero_grad();
        pen_gradient(&pen, &mut phi, &refs, &rewards, true, true)?;
        opt.step(&mut phi)?;
    }
    print!("\nvocabulary file, first lines:\n{}", vocab.to_text().lines().take(3).map(|l| format!("{l}\n")).collect::<String>());
    Ok(())
}
