use std::fs;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use k5kit::interpolation::uniform_lyndon_interpolant_with;
use k5kit::*;
use serde_json::{json, Value};

/// Decision procedures for K5 and its extensions, and uniform Lyndon
/// interpolation for K5.
///
/// Exit status: 0 yes, 1 no, 2 error.
#[derive(Parser)]
#[command(name = "k5kit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Output::Text)]
    output: Output,
    /// Worker threads for sampling checks; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Decide validity of a formula.
    Decide {
        /// k5, kd5, k45, kd45, kb5 or s5.
        #[arg(long)]
        logic: FrameClass,
        /// Print the proof of a valid formula.
        #[arg(long)]
        proof: bool,
        /// Print a countermodel of an invalid formula as JSON.
        #[arg(long)]
        countermodel: bool,
        formula: String,
    },
    /// Compute a uniform (Lyndon) interpolant.
    Interpolate {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        check: CheckArgs,
        /// Also verify the interpolant; exit 1 if a check fails.
        #[arg(long = "check")]
        check_result: bool,
        /// Print every recursive call to stderr.
        #[arg(long)]
        trace: bool,
        formula: String,
    },
    /// Compute the interpolant and print the verification report.
    Verify {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        check: CheckArgs,
        formula: String,
    },
    /// Evaluate a formula at a world of a JSON model.
    ModelEval {
        model: String,
        world: String,
        formula: String,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Target {
    /// Literal to eliminate, `p` or `~p`.
    #[arg(long)]
    literal: Option<String>,
    /// Atom to eliminate in both polarities.
    #[arg(long)]
    atom: Option<String>,
}

#[derive(Args)]
struct CheckArgs {
    /// Interpolation is implemented for k5 only.
    #[arg(long, default_value = "k5")]
    logic: FrameClass,
    /// Test formulas are enumerated up to this many connectives.
    #[arg(long, default_value_t = 3)]
    psi_depth: usize,
    /// Random test formulas on top of the enumerated ones.
    #[arg(long, default_value_t = 200)]
    random_psi: usize,
    /// Sampled models used to discard test formulas.
    #[arg(long, default_value_t = 300)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl CheckArgs {
    fn config(&self) -> UlipConfig {
        UlipConfig {
            psi_connectives: self.psi_depth,
            random_psi: self.random_psi,
            samples: self.samples,
            seed: self.seed,
            ..UlipConfig::default()
        }
    }
}

enum Eliminate {
    Literal(Literal),
    Atom(Atom),
}

impl Eliminate {
    fn from_args(t: &Target) -> Result<Self, String> {
        match (&t.literal, &t.atom) {
            (Some(l), _) => Literal::parse(l)
                .map(Eliminate::Literal)
                .map_err(|e| format!("bad literal '{l}': {e}")),
            (_, Some(a)) => Atom::new(a)
                .map(Eliminate::Atom)
                .map_err(|e| format!("bad atom '{a}': {e}")),
            _ => Err("one of --literal or --atom is required".into()),
        }
    }

    fn name(&self) -> String {
        match self {
            Eliminate::Literal(l) => l.to_string(),
            Eliminate::Atom(a) => a.to_string(),
        }
    }
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

/// One newline-terminated document; maps serialize with sorted keys.
fn print_json(v: &Value) {
    println!("{v}");
}

fn interpolant(
    phi: &Formula,
    target: &Eliminate,
    logic: FrameClass,
    trace: bool,
) -> Result<Formula, Failure> {
    if logic != FrameClass::K5 {
        return Err(InterpolationError::UnsupportedLogic(logic).into());
    }
    let opts = InterpolationOptions {
        trace,
        ..Default::default()
    };
    let lits = match target {
        Eliminate::Literal(l) => vec![l.clone()],
        Eliminate::Atom(a) => vec![Literal::neg(a.clone()), Literal::pos(a.clone())],
    };
    let mut current = phi.clone();
    for lit in lits {
        let (r, run) = uniform_lyndon_interpolant_with(&current, &lit, opts)?;
        if let Some(t) = run.trace {
            eprintln!("forall {lit} {current}");
            eprint!("{}", t.render());
        }
        current = r;
    }
    Ok(current)
}

fn report(phi: &Formula, target: &Eliminate, r: &Formula, cfg: &UlipConfig) -> UlipReport {
    match target {
        Eliminate::Literal(l) => check_ulip(phi, l, r, cfg),
        Eliminate::Atom(a) => check_uip(phi, a, r, cfg),
    }
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let json_out = cli.output == Output::Json;
    match cli.command {
        Command::Decide {
            logic,
            proof,
            countermodel,
            formula,
        } => {
            let phi = parse(&formula)?;
            let decision = decide(&phi, logic);
            match &decision {
                Decision::Valid(tree) => {
                    if json_out {
                        let mut doc = json!({"logic": logic.name(), "result": "valid"});
                        if proof {
                            doc["proof"] = tree.to_json();
                        }
                        print_json(&doc);
                    } else {
                        println!("valid");
                        if proof {
                            print!("{}", tree.to_text());
                        }
                    }
                }
                Decision::Invalid { model, .. } => {
                    let world = decision.refuting_world().unwrap_or(model.root());
                    if json_out {
                        let mut doc = json!({"logic": logic.name(), "result": "invalid", "world": world});
                        if countermodel {
                            doc["model"] = model.to_json_value();
                        }
                        print_json(&doc);
                    } else if countermodel {
                        // still loadable by model-eval, which ignores `world`
                        let mut doc = model.to_json_value();
                        doc["world"] = json!(world);
                        print_json(&doc);
                    } else {
                        println!("invalid at {world}");
                    }
                }
            }
            Ok(decision.is_valid())
        }
        Command::Interpolate {
            target,
            check,
            check_result,
            trace,
            formula,
        } => {
            let target = Eliminate::from_args(&target)?;
            let phi = parse(&formula)?;
            let r = interpolant(&phi, &target, check.logic, trace)?;
            let verdict = check_result.then(|| report(&phi, &target, &r, &check.config()));
            if json_out {
                let mut doc = json!({"eliminated": target.name(), "interpolant": r.to_string()});
                if let Some(v) = &verdict {
                    doc["check"] = v.to_json();
                    doc["passed"] = json!(v.passed());
                }
                print_json(&doc);
            } else {
                println!("{r}");
                if let Some(v) = &verdict {
                    eprintln!("check {}", if v.passed() { "passed" } else { "failed" });
                }
            }
            Ok(verdict.is_none_or(|v| v.passed()))
        }
        Command::Verify {
            target,
            check,
            formula,
        } => {
            let target = Eliminate::from_args(&target)?;
            let phi = parse(&formula)?;
            let r = interpolant(&phi, &target, check.logic, false)?;
            let v = report(&phi, &target, &r, &check.config());
            let mut doc = v.to_json();
            doc["interpolant"] = json!(r.to_string());
            doc["passed"] = json!(v.passed());
            print_json(&doc);
            Ok(v.passed())
        }
        Command::ModelEval {
            model,
            world,
            formula,
        } => {
            let text = fs::read_to_string(&model).map_err(|e| format!("cannot read {model}: {e}"))?;
            let m = KripkeModel::from_json(&text)?;
            let phi = parse(&formula)?;
            let holds = m.eval(&world, &phi)?;
            if json_out {
                print_json(&json!({"holds": holds, "world": world}));
            } else {
                println!("{holds}");
            }
            Ok(holds)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.max(1))
        .build_global()
    {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
