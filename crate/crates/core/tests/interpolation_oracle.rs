use k5kit::generate::{literal_leaves, random_formula};
use k5kit::interpolation::{a_interpolant, extract_formula, simplify_syntactic, InterpolantCall};
use k5kit::multiformula::MultiError;
use k5kit::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn equivalent(a: &Formula, b: &Formula) -> bool {
    decide(&Formula::iff(a, b), FrameClass::K5).is_valid()
}

/// The pruned computation agrees with the verbatim one wherever the latter
/// fits under a small cap.
#[test]
fn pruning_preserves_the_interpolant() {
    let leaves = literal_leaves(&["p", "q"]);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let literal = InterpolationOptions {
        prune: false,
        cap: 20_000,
        ..Default::default()
    };
    let (mut compared, mut capped) = (0, 0);
    for i in 0..120 {
        let phi = random_formula(&mut rng, &leaves, 4);
        let lit = Literal::parse(if i % 2 == 0 { "p" } else { "~p" }).unwrap();
        let pruned = uniform_lyndon_interpolant(&phi, &lit).unwrap();
        match a_interpolant(&lit, InterpolantCall::root(&phi), literal) {
            Ok(run) => {
                // the raw verbatim result is too large for the prover
                let verbatim = simplify_syntactic(&extract_formula(&run.result).unwrap());
                assert!(equivalent(&pruned, &verbatim), "forall {lit} {phi}: {pruned} vs {verbatim}");
                compared += 1;
            }
            Err(InterpolationError::Multi(MultiError::CapExceeded { .. })) => capped += 1,
            Err(e) => panic!("forall {lit} {phi}: {e}"),
        }
    }
    assert!(compared > capped, "{compared} compared, {capped} over the cap");
}

#[test]
fn interpolants_avoid_the_literal_and_imply_the_formula() {
    let leaves = literal_leaves(&["p", "q", "r"]);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..150 {
        let phi = random_formula(&mut rng, &leaves, 8);
        for lit in ["p", "~p", "q"].map(|s| Literal::parse(s).unwrap()) {
            let r = uniform_lyndon_interpolant(&phi, &lit).unwrap();
            assert!(!r.literals().contains(&lit), "{r}");
            assert!(r.literals().is_subset(&phi.literals()), "{r}");
            assert!(is_valid(&Formula::implies(&r, phi.clone()), FrameClass::K5));
        }
    }
}

#[test]
fn valid_and_unsatisfiable_formulas_are_fixed_points() {
    let p = Literal::parse("p").unwrap();
    for (text, expect) in [("p | ~p", Formula::Top), ("<>T | []F", Formula::Top), ("p & ~p", Formula::Bottom)] {
        let phi = Formula::parse(text).unwrap();
        let r = uniform_lyndon_interpolant(&phi, &p).unwrap();
        assert!(equivalent(&r, &expect), "{text}: {r}");
    }
}

#[test]
fn quantifier_is_monotone() {
    // ∀p φ implies ∀p ψ whenever φ implies ψ
    let p = Literal::parse("p").unwrap();
    let leaves = literal_leaves(&["p", "q"]);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..60 {
        let phi = random_formula(&mut rng, &leaves, 5);
        let psi = Formula::or(phi.clone(), random_formula(&mut rng, &leaves, 3));
        let a = uniform_lyndon_interpolant(&phi, &p).unwrap();
        let b = uniform_lyndon_interpolant(&psi, &p).unwrap();
        assert!(is_valid(&Formula::implies(&a, b.clone()), FrameClass::K5), "{phi}: {a} / {psi}: {b}");
    }
}

#[test]
fn other_logics_are_rejected() {
    let phi = Formula::parse("p").unwrap();
    let p = Literal::parse("p").unwrap();
    for logic in FrameClass::ALL.into_iter().skip(1) {
        let err = uniform_lyndon_interpolant_in(logic, &phi, &p).unwrap_err();
        assert!(err.to_string().contains("interpolation implemented for K5 only"));
    }
}
