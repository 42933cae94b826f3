use std::collections::BTreeSet;

use k5kit::generate::{literal_leaves, random_formula};
use k5kit::prover::decide_with_stats;
use k5kit::{sample_models, Atom, Decision, Formula, FrameClass};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn atoms() -> BTreeSet<Atom> {
    ["p", "q", "r"].iter().map(|a| Atom::new(a).unwrap()).collect()
}

#[test]
fn decisions_agree_with_sampled_models() {
    let leaves = literal_leaves(&["p", "q", "r"]);
    for logic in FrameClass::ALL {
        let models = sample_models(logic, 3, &atoms(), 17, 120).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(logic as u64);
        let (mut valid, mut invalid) = (0, 0);
        for _ in 0..150 {
            let phi: Formula = random_formula(&mut rng, &leaves, 9);
            let (decision, stats) = decide_with_stats(&phi, logic);
            assert!(stats.max_branch <= stats.bound);
            match decision {
                Decision::Valid(_) => {
                    valid += 1;
                    for m in &models {
                        assert!(m.eval(m.root(), &phi).unwrap(), "{logic}: {phi} fails in {m:?}");
                    }
                }
                d @ Decision::Invalid { .. } => {
                    invalid += 1;
                    let w = d.refuting_world().unwrap().to_string();
                    let Decision::Invalid { model, .. } = d else { unreachable!() };
                    assert!(model.is_l_frame(logic));
                    assert!(!model.eval(&w, &phi).unwrap());
                }
            }
        }
        assert!(valid > 0 && invalid > 0, "{logic}: {valid} valid, {invalid} invalid");
    }
}
