//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use k5kit::generate::{formula_of_height, literal_leaves, random_formula, random_multiformula};
use k5kit::interpolation::{a_interpolant, InterpolantCall, Step};
use k5kit::multiformula::{is_scnf, is_sdnf};
use k5kit::prover::decide_with_stats;
use k5kit::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn f(s: &str) -> Formula {
    Formula::parse(s).unwrap()
}

fn atoms(names: &[&str]) -> BTreeSet<Atom> {
    names.iter().map(|a| Atom::new(a).unwrap()).collect()
}

fn equivalent(a: &Formula, b: &Formula) -> bool {
    decide(&Formula::iff(a, b), FrameClass::K5).is_valid()
}

fn within(start: Instant, budget: Duration) -> Result<(), String> {
    let took = start.elapsed();
    if took > budget {
        return Err(format!("took {took:.2?}, budget {budget:?}"));
    }
    Ok(())
}

fn worked_example() -> Outcome {
    let start = Instant::now();
    let phi = f("~p | <><>(p|q)");
    let r = uniform_lyndon_interpolant(&phi, &Literal::parse("p").unwrap())
        .map_err(|e| e.to_string())?;
    let target = f("~p | <><>q");
    let forward = decide(&Formula::implies(&r, target.clone()), FrameClass::K5).is_valid();
    let back = decide(&Formula::implies(&target, r.clone()), FrameClass::K5).is_valid();
    within(start, Duration::from_secs(5))?;
    if forward && back {
        Ok(format!("R = {r}"))
    } else {
        Err(format!("R = {r} is not equivalent to {target}"))
    }
}

fn trace_checkpoint() -> Outcome {
    let start = Instant::now();
    let phi = f("~p | <><>(p|q)");
    let opts = InterpolationOptions {
        trace: true,
        ..Default::default()
    };
    let run = a_interpolant(&Literal::parse("p").unwrap(), InterpolantCall::root(&phi), opts)
        .map_err(|e| e.to_string())?;
    let trace = run.trace.ok_or("no trace recorded")?;
    let expected = Multiformula::any(
        [
            Multiformula::labeled(Label::Trunk, f("~p")),
            Multiformula::labeled(Label::Bracket(1), f("q")),
            Multiformula::labeled(Label::BracketD, f("q")),
            Multiformula::labeled(Label::DoubleD, f("q")),
        ],
        Label::Trunk,
    );
    let found = trace
        .nodes()
        .iter()
        .any(|n| n.step == Step::Insufficient && n.result.equal_modulo_order(&expected));
    within(start, Duration::from_secs(5))?;
    if found {
        Ok(format!("leaf {}", expected.to_unicode()))
    } else {
        Err(format!("no insufficient leaf equal to {}\n{}", expected.to_unicode(), trace.render()))
    }
}

struct ProverReport {
    soundness: Outcome,
    completeness: Outcome,
    bound: Outcome,
}

/// Criteria 3, 4 and 6 share one corpus.
fn prover_corpus() -> ProverReport {
    let start = Instant::now();
    let leaves = literal_leaves(&["p", "q", "r"]);
    let pool = atoms(&["p", "q", "r"]);
    let (mut valid, mut invalid, mut worst) = (0usize, 0usize, 0f64);
    let mut unsound = Vec::new();
    let mut incomplete = Vec::new();
    let mut over = Vec::new();
    for logic in FrameClass::ALL {
        let models = sample_models(logic, 3, &pool, 1000 + logic as u64, 200).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(logic as u64);
        for _ in 0..1000 {
            let phi = random_formula(&mut rng, &leaves, 12);
            let (decision, stats) = decide_with_stats(&phi, logic);
            if stats.max_branch > stats.bound {
                over.push(format!("{logic}: {phi}"));
            }
            if stats.bound > 0 {
                worst = worst.max(stats.max_branch as f64 / stats.bound as f64);
            }
            match &decision {
                Decision::Valid(_) => {
                    valid += 1;
                    if let Some(m) = models.iter().find(|m| !m.eval(m.root(), &phi).unwrap()) {
                        unsound.push(format!("{logic}: {phi} fails in {m:?}"));
                    }
                }
                Decision::Invalid { model, .. } => {
                    invalid += 1;
                    let w = decision.refuting_world().unwrap_or(model.root());
                    if !model.is_l_frame(logic) || model.eval(w, &phi).unwrap_or(true) {
                        incomplete.push(format!("{logic}: {phi} with {model:?} at {w}"));
                    }
                }
            }
        }
    }
    let budget = within(start, Duration::from_secs(300));
    let verdict = |bad: Vec<String>, ok: String| -> Outcome {
        budget.clone()?;
        match bad.first() {
            None => Ok(ok),
            Some(first) => Err(format!("{} failures, first: {first}", bad.len())),
        }
    };
    ProverReport {
        soundness: verdict(unsound, format!("{valid} valid formulas hold in 200 models each")),
        completeness: verdict(incomplete, format!("{invalid} countermodels verified")),
        bound: verdict(over, format!("largest branch/bound ratio {worst:.3}")),
    }
}

fn differentiation_matrix() -> Outcome {
    use FrameClass::*;
    let rows: [(&str, &str, &[FrameClass]); 5] = [
        ("5", "<>p -> []<>p", &FrameClass::ALL),
        ("t", "[]p -> p", &[S5]),
        ("d", "[]p -> <>p", &[KD5, KD45, S5]),
        ("b", "p -> []<>p", &[KB5, S5]),
        ("4", "[]p -> [][]p", &[K45, KD45, KB5, S5]),
    ];
    for (name, text, expected) in rows {
        let phi = f(text);
        for logic in FrameClass::ALL {
            let decision = decide(&phi, logic);
            let want = expected.contains(&logic);
            match &decision {
                Decision::Valid(_) => {
                    if !want {
                        return Err(format!("axiom {name} proved in {logic}"));
                    }
                }
                Decision::Invalid { model, .. } => {
                    let w = decision.refuting_world().unwrap_or(model.root());
                    if want {
                        return Err(format!("axiom {name} refuted in {logic}"));
                    }
                    if !model.is_l_frame(logic) || model.eval(w, &phi).unwrap_or(true) {
                        return Err(format!("axiom {name} in {logic}: bad countermodel {model:?}"));
                    }
                }
            }
        }
    }
    Ok("30 cells".into())
}

/// 100 formulas over {p, q}, at most 8 connectives.
fn k5_corpus() -> Vec<Formula> {
    let leaves = literal_leaves(&["p", "q"]);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    (0..100).map(|_| random_formula(&mut rng, &leaves, 8)).collect()
}

fn ulip_suite(corpus: &[Formula]) -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    for (i, phi) in corpus.iter().enumerate() {
        for lit in ["p", "~p"].map(|s| Literal::parse(s).unwrap()) {
            let r = uniform_lyndon_interpolant(phi, &lit)
                .map_err(|e| format!("forall {lit} {phi}: {e}"))?;
            let cfg = UlipConfig {
                seed: i as u64,
                ..UlipConfig::default()
            };
            let report = check_ulip(phi, &lit, &r, &cfg);
            if !report.passed() {
                return Err(format!("forall {lit} {phi} = {r}: {}", report.to_json()));
            }
            checked += report.checked;
        }
    }
    within(start, Duration::from_secs(600))?;
    Ok(format!("200 interpolants, {checked} test formulas"))
}

fn vacuous_literal() -> Outcome {
    let leaves = literal_leaves(&["q", "r"]);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..50 {
        let phi = random_formula(&mut rng, &leaves, 8);
        let lit = Literal::parse(if i % 2 == 0 { "p" } else { "~p" }).unwrap();
        let r = uniform_lyndon_interpolant(&phi, &lit).map_err(|e| format!("{phi}: {e}"))?;
        if !equivalent(&r, &phi) {
            return Err(format!("forall {lit} {phi} = {r}"));
        }
    }
    Ok("50 formulas".into())
}

fn uip_wrapper(corpus: &[Formula]) -> Outcome {
    let p = Atom::new("p").unwrap();
    for (i, phi) in corpus.iter().enumerate() {
        let r = uniform_interpolant(phi, &p).map_err(|e| format!("forall p {phi}: {e}"))?;
        let cfg = UlipConfig {
            seed: i as u64,
            ..UlipConfig::default()
        };
        let report = check_uip(phi, &p, &r, &cfg);
        if !report.passed() {
            return Err(format!("forall p {phi} = {r}: {}", report.to_json()));
        }
    }
    Ok("100 interpolants".into())
}

fn normal_form_oracle() -> Outcome {
    let label_pool = [
        Label::Trunk,
        Label::Bracket(1),
        Label::Bracket(2),
        Label::BracketD,
        Label::Double(1),
        Label::DoubleD,
    ];
    let leaves = literal_leaves(&["p", "q"]);
    let models = sample_models(FrameClass::K5, 3, &atoms(&["p", "q"]), 10, 20).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut interpretations = 0usize;
    for _ in 0..500 {
        let k = rng.gen_range(1..=3);
        let labels: Vec<Label> = label_pool.choose_multiple(&mut rng, k).copied().collect();
        let u = random_multiformula(&mut rng, &labels, &leaves, 2, 4);
        let scope = u.labels();
        let dnf = to_sdnf(&u).map_err(|e| e.to_string())?;
        let cnf = to_scnf(&u).map_err(|e| e.to_string())?;
        if !is_sdnf(&dnf, &scope) || !is_scnf(&cnf, &scope) {
            return Err(format!("shape check failed for {}", u.to_unicode()));
        }
        for m in &models {
            for i in Interpretation::enumerate(m, &scope) {
                let want = eval_multi(m, &i, &u).map_err(|e| e.to_string())?;
                let d = eval_multi(m, &i, &dnf).map_err(|e| e.to_string())?;
                let c = eval_multi(m, &i, &cnf).map_err(|e| e.to_string())?;
                if d != want || c != want {
                    return Err(format!("{} disagrees with a normal form", u.to_unicode()));
                }
                interpretations += 1;
            }
        }
    }
    Ok(format!("{interpretations} interpretations"))
}

fn copying_lemma() -> Outcome {
    let leaves = literal_leaves(&["p", "q"]);
    let models = sample_models(FrameClass::K5, 4, &atoms(&["p", "q"]), 11, 100).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut copies = 0;
    for m in &models {
        let cluster = m.cluster();
        let Some(&w) = cluster.choose(&mut rng) else {
            continue;
        };
        let w = m.world_name(w).to_string();
        let root_inside = cluster.contains(&m.root_index());
        for away in [false, true] {
            if away && root_inside {
                continue;
            }
            let (n, c) = copy_world(m, &w, away).map_err(|e| e.to_string())?;
            if !n.is_l_frame(FrameClass::K5) {
                return Err(format!("copy of {w} leaves K5: {n:?}"));
            }
            let z = find_bisim(m, &w, &n, &c, BisimMode::Full)
                .ok_or_else(|| format!("no bisimulation from {w} to {c} in {n:?}"))?;
            if !check_bisim(m, &n, &z).map_err(|e| e.to_string())? {
                return Err(format!("witness rejected for {w}"));
            }
            // the copy agrees with the original on sampled formulas
            for _ in 0..10 {
                let phi = formula_of_height(&mut rng, &leaves, 3);
                if m.eval(&w, &phi).unwrap() != n.eval(&c, &phi).unwrap() {
                    return Err(format!("{phi} separates {w} from its copy"));
                }
            }
            copies += 1;
        }
    }
    Ok(format!("{copies} copies"))
}

fn run(id: usize, name: &str, check: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(check))
        .unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
    report(id, name, outcome, start.elapsed())
}

fn report(id: usize, name: &str, outcome: Outcome, took: Duration) -> bool {
    match outcome {
        Ok(detail) => {
            println!("PASS {id:>2} {name} ({took:.2?}): {detail}");
            true
        }
        Err(detail) => {
            println!("FAIL {id:>2} {name} ({took:.2?}): {detail}");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut ok = true;
    ok &= run(1, "worked interpolation example", worked_example);
    ok &= run(2, "trace checkpoint", trace_checkpoint);
    let start = Instant::now();
    let r = catch_unwind(prover_corpus).unwrap_or_else(|_| ProverReport {
        soundness: Err("panicked".into()),
        completeness: Err("panicked".into()),
        bound: Err("panicked".into()),
    });
    let took = start.elapsed();
    ok &= report(3, "prover soundness sampling", r.soundness, took);
    ok &= report(4, "self-verifying countermodels", r.completeness, took);
    ok &= run(5, "logic differentiation matrix", differentiation_matrix);
    ok &= report(6, "branch size bound", r.bound, took);
    let corpus = k5_corpus();
    ok &= run(7, "uniform Lyndon interpolation suite", || ulip_suite(&corpus));
    ok &= run(8, "vacuous literal", vacuous_literal);
    ok &= run(9, "uniform interpolation wrapper", || uip_wrapper(&corpus));
    ok &= run(10, "normal form oracle", normal_form_oracle);
    ok &= run(11, "copying lemma", copying_lemma);
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
