//! Properties of forced alignment that hold for any probability matrix.

mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use scribeforge::ctc_align::{forced_align, min_timesteps, Alphabet, ProbMatrix};
use scribeforge::seed::rng_from_seed;

const SYMBOLS: &[char] = &['a', 'b', 'c', 'd'];

/// Random transcript over `SYMBOLS` and a random matrix with room for it.
fn instance(seed: u64) -> (String, Alphabet, ProbMatrix) {
    let mut rng = rng_from_seed(seed);
    let alphabet = Alphabet::new(SYMBOLS.to_vec(), rng.gen_range(0..=SYMBOLS.len())).unwrap();
    let len = rng.gen_range(1..=5);
    let text: String = (0..len).map(|_| SYMBOLS[rng.gen_range(0..SYMBOLS.len())]).collect();
    let n = min_timesteps(&text) + rng.gen_range(0..6);
    let rows: Vec<Vec<f32>> = (0..n).map(|_| common::grid_row(alphabet.num_classes(), 16, true, &mut rng)).collect();
    (text, alphabet, ProbMatrix::from_rows(&rows, rng.gen_range(n..=8 * n)).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn relabeling_classes_leaves_alignment_unchanged(seed in any::<u64>()) {
        let (text, alphabet, probs) = instance(seed);
        let mut order: Vec<usize> = (0..alphabet.num_classes()).collect();
        order.shuffle(&mut rng_from_seed(seed ^ 0xA5A5));
        // New class i is old class order[i].
        let blank = order.iter().position(|&c| c == alphabet.blank_index()).unwrap();
        let symbols = order.iter().filter_map(|&c| alphabet.symbol_of(c)).collect();
        let relabeled = Alphabet::new(symbols, blank).unwrap();
        let permuted = probs.permute_classes(&order).unwrap();

        let a = forced_align(&probs, &text, &alphabet);
        let b = forced_align(&permuted, &text, &relabeled);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.boundaries, b.boundaries);
                prop_assert_eq!(a.path, b.path);
                prop_assert_eq!(a.score, b.score);
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "feasibility differs: {:?} vs {:?}", a.is_ok(), b.is_ok()),
        }
    }

    #[test]
    fn timesteps_are_shared_between_characters_and_blank(seed in any::<u64>()) {
        let (text, alphabet, probs) = instance(seed);
        if let Ok(a) = forced_align(&probs, &text, &alphabet) {
            let blanks = a.path.iter().filter(|&&s| s % 2 == 0).count();
            let held: usize = a.boundaries.iter().map(|b| b.k).sum();
            prop_assert_eq!(held + blanks, probs.timesteps());
            prop_assert!(a.boundaries.iter().all(|b| b.k >= 1));
            prop_assert!(a.boundaries.windows(2).all(|w| w[0].end_px <= w[1].start_px));
            prop_assert!(a.boundaries.last().unwrap().end_px <= probs.source_width());
        }
    }

    #[test]
    fn beats_any_legal_greedy_path(seed in any::<u64>()) {
        // Plant a legal path and make it the per-row argmax.
        let mut rng = rng_from_seed(seed);
        let alphabet = Alphabet::new(SYMBOLS.to_vec(), 0).unwrap();
        let len = rng.gen_range(1..=6);
        let text: String = (0..len).map(|_| SYMBOLS[rng.gen_range(0..SYMBOLS.len())]).collect();
        let mut classes = Vec::new();
        let mut prev = None;
        for c in text.chars() {
            if prev == Some(c) || rng.gen_bool(0.4) {
                classes.extend(std::iter::repeat_n(0, rng.gen_range(1..=2)));
            }
            classes.extend(std::iter::repeat_n(alphabet.class_of(c).unwrap(), rng.gen_range(1..=3)));
            prev = Some(c);
        }
        let rows: Vec<Vec<f32>> = classes
            .iter()
            .map(|&label| {
                let peak = rng.gen_range(0.5f32..0.9);
                let rest = (1.0 - peak) / (alphabet.num_classes() - 1) as f32;
                (0..alphabet.num_classes()).map(|c| if c == label { peak } else { rest }).collect()
            })
            .collect();
        let probs = ProbMatrix::from_rows(&rows, 10 * rows.len()).unwrap();
        let greedy: f64 = rows
            .iter()
            .map(|r| f64::from(r.iter().copied().fold(0.0f32, f32::max)).ln())
            .sum();
        let a = forced_align(&probs, &text, &alphabet).unwrap();
        prop_assert!(a.score >= greedy - 1e-9 * greedy.abs().max(1.0), "{} < {}", a.score, greedy);
        // Per-row maxima bound every path, so the planted path is optimal.
        prop_assert!(a.score <= greedy + 1e-9 * greedy.abs().max(1.0));
    }
}
