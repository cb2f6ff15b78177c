use std::fmt::{Display, Write as _};
use std::path::Path;
use std::sync::Arc;

use markov_groupoid::amenability::recheck_selection;
use markov_groupoid::group_walk::{
    convolution_power_sweep, folner_measure_direct, folner_measure_test, lazy_walk_z, simple_walk_f2,
};
use markov_groupoid::io::{
    parse_groupoid, parse_measure, parse_object, parse_scalar, parse_system, parse_theta,
    parse_weights, system_to_json,
};
use markov_groupoid::measure::reference_measure;
use markov_groupoid::rwre::{
    empirical_distribution, empirical_total_variation, environment_of, exact_distribution, histogram_csv,
    rwre_tail_report, sample_rwre_path,
};
use markov_groupoid::{
    build_schedule, construct_liouville, fibrewise_report, verify_axioms, verify_certificate, ActionSpec,
    ConstructionCaps, Cyclic, EquivariantOperator, Error, FiniteGroup, FiniteGroupoid, FibrewiseReport, FreeGroup2,
    GroupMeasure, GroupOracle, GroupTable, Integers, ObjectMeasure, Rational, Scalar, ScheduleParams,
    SequenceProvider, Tolerance,
};

use crate::{Arith, Cli, CliError, Command, GroupArgs, LiouvilleArgs, OperatorInput, Output, Provider, RwreCommand};

type R<T> = Result<T, CliError>;

/// Malformed input is a usage error; everything else the library rejects
/// is a domain error.
fn lib(e: Error) -> CliError {
    match e {
        Error::InvalidInput(m) => CliError::Usage(m),
        Error::NotProbability { .. } | Error::NegativeMass { .. } => {
            CliError::Domain(format!("measure is not normalized: {e}"))
        }
        other => CliError::Domain(other.to_string()),
    }
}

fn usage(msg: impl Display) -> CliError {
    CliError::Usage(msg.to_string())
}

fn read(path: &Path) -> R<String> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> R<()> {
    std::fs::write(path, text).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn tolerance<S: Scalar>(cli: &Cli) -> Tolerance {
    if S::EXACT {
        Tolerance::exact()
    } else {
        Tolerance::new(cli.tol)
    }
}

fn load_groupoid(path: &Path) -> R<Arc<FiniteGroupoid>> {
    Ok(Arc::new(parse_groupoid(&read(path)?).map_err(lib)?))
}

fn load_operator<S: Scalar>(
    groupoid: &Arc<FiniteGroupoid>,
    system: &Path,
    tol: Tolerance,
) -> R<EquivariantOperator<S>> {
    let sys = parse_system::<S>(groupoid, &read(system)?).map_err(lib)?;
    EquivariantOperator::from_system(groupoid.clone(), sys, tol).map_err(lib)
}

fn load_kappa<S: Scalar>(text: Option<&str>, objects: usize) -> R<ObjectMeasure<S>> {
    let Some(text) = text else {
        return Ok(ObjectMeasure::ones(objects));
    };
    let w = parse_weights::<S>(text).map_err(lib)?;
    if w.len() != objects {
        return Err(usage(format!("--kappa has {} weights for {objects} objects", w.len())));
    }
    ObjectMeasure::new(w).map_err(|e| usage(format!("--kappa: {e}")))
}

fn load_action(path: &Path) -> R<ActionSpec> {
    load_groupoid(path)?
        .action_spec()
        .ok_or_else(|| usage(format!("{} is not an action groupoid file", path.display())))
}

pub fn run(cli: &Cli) -> R<Output> {
    match cli.arith {
        Arith::Exact => run_with::<Rational>(cli),
        Arith::Float => run_with::<f64>(cli),
    }
}

fn run_with<S: Scalar>(cli: &Cli) -> R<Output> {
    let tol = tolerance::<S>(cli);
    match &cli.command {
        Command::Check { groupoid } => check(groupoid),
        Command::Discrepancy { input, measure, kappa } => {
            discrepancy::<S>(input, measure.as_deref(), kappa.as_deref(), tol)
        }
        Command::Convolve { input, with, power } => convolve::<S>(input, with.as_deref(), *power, tol),
        Command::ConstructLiouville(args) => liouville::<S>(args, tol),
        Command::Boundary { input, mode, horizon, threshold, kappa } => {
            let g = load_groupoid(&input.groupoid)?;
            let op = load_operator::<S>(&g, &input.system, tol)?;
            let kappa = load_kappa::<S>(kappa.as_deref(), g.num_objects())?;
            let report = fibrewise_report(&op, &kappa, *horizon, *mode, *threshold).map_err(lib)?;
            Ok(profile_output(&report))
        }
        Command::GroupSweep { group, probe, horizon, cap } => match parse_group(&group.group)? {
            GroupSpec::Z => sweep::<_, S>(&Integers, group, lazy_walk_z, probe, *horizon, *cap, tol),
            GroupSpec::Zn(n) => {
                let zn = Cyclic::new(n).map_err(lib)?;
                sweep::<_, S>(&zn, group, || uniform_on(0..n), probe, *horizon, *cap, tol)
            }
            GroupSpec::F2 => sweep::<_, S>(&FreeGroup2, group, simple_walk_f2, probe, *horizon, *cap, tol),
        },
        Command::Folner { group, set } => match parse_group(&group.group)? {
            GroupSpec::Z => folner::<_, S>(&Integers, group, lazy_walk_z, set, tol),
            GroupSpec::Zn(n) => {
                let zn = Cyclic::new(n).map_err(lib)?;
                folner::<_, S>(&zn, group, || uniform_on(0..n), set, tol)
            }
            GroupSpec::F2 => folner::<_, S>(&FreeGroup2, group, simple_walk_f2, set, tol),
        },
        Command::Rwre { command } => rwre::<S>(cli, command, tol),
    }
}

fn check(path: &Path) -> R<Output> {
    let g = load_groupoid(path)?;
    let report = verify_axioms(&g);
    let mut data = format!(
        "groupoid: {:?}, {} objects, {} morphisms, largest fibre {}\n",
        g.kind(),
        g.num_objects(),
        g.num_morphisms(),
        g.max_fibre_len()
    );
    data.push_str(&report.to_string());
    let failure = (!report.is_empty())
        .then(|| format!("groupoid axioms fail: {} violation(s)", report.violations.len()));
    Ok(Output { csv: data, report: String::new(), failure })
}

fn discrepancy<S: Scalar>(input: &OperatorInput, measure: Option<&Path>, kappa: Option<&str>, tol: Tolerance) -> R<Output> {
    let g = load_groupoid(&input.groupoid)?;
    let op = load_operator::<S>(&g, &input.system, tol)?;
    let m = match measure {
        Some(path) => parse_measure::<S>(&g, &read(path)?).map_err(lib)?,
        None => reference_measure(&g, &load_kappa::<S>(kappa, g.num_objects())?).map_err(lib)?,
    };
    let mean = op.mean_discrepancy(&m, tol).map_err(lib)?;
    let profile = op.discrepancy_profile();
    let (worst, worst_at) = profile
        .iter()
        .enumerate()
        .fold((S::zero(), 0), |(v, i), (j, d)| if *d > v { (d.clone(), j) } else { (v, i) });
    let mut report = String::new();
    let _ = writeln!(report, "mean discrepancy Delta(m, P) = {mean}");
    let _ = writeln!(report, "largest Delta(g, P) = {worst} at morphism {worst_at}");
    let _ = writeln!(report, "exactly invariant: {}", op.is_exactly_invariant(tol));
    Ok(Output { csv: op.discrepancy_csv(), report, failure: None })
}

fn convolve<S: Scalar>(input: &OperatorInput, with: Option<&Path>, power: usize, tol: Tolerance) -> R<Output> {
    let g = load_groupoid(&input.groupoid)?;
    let mut op = load_operator::<S>(&g, &input.system, tol)?;
    if let Some(path) = with {
        let right = load_operator::<S>(&g, path, tol)?;
        op = op.compose(&right).map_err(lib)?;
    }
    let op = op.power(power);
    let support: usize = op.system().fibres().iter().map(|m| m.support_len()).sum();
    let report = format!("product system: {} fibres, {support} charged morphisms\n", op.system().num_objects());
    Ok(Output { csv: system_to_json(op.system()) + "\n", report, failure: None })
}

fn liouville<S: Scalar>(args: &LiouvilleArgs, tol: Tolerance) -> R<Output> {
    let rational = |flag: &str, text: &str| {
        parse_scalar::<Rational>(text).map_err(|e| usage(format!("--{flag}: {e}")))
    };
    let params = ScheduleParams {
        stages: args.stages,
        epsilon_base: rational("epsilon-base", &args.epsilon_base)?,
        t_base: rational("t-base", &args.t_base)?,
    };
    let schedule = build_schedule(&params).map_err(usage)?;

    let (g, provider) = match (&args.fixture, &args.groupoid) {
        (Some(name), _) if name == "z4" => {
            let g = Arc::new(FiniteGroupoid::from_group(&GroupTable::cyclic(4)));
            (g.clone(), SequenceProvider::<S>::fibre_prefix(g, args.horizon))
        }
        (Some(name), _) => return Err(usage(format!("unknown fixture {name:?} (known: z4)"))),
        (None, Some(path)) => {
            let g = load_groupoid(path)?;
            let provider = match args.provider {
                Provider::Prefix => SequenceProvider::fibre_prefix(g.clone(), args.horizon),
                p => {
                    let system = args
                        .system
                        .as_deref()
                        .ok_or_else(|| usage("--provider powers|cesaro needs --system"))?;
                    let op = load_operator::<S>(&g, system, tol)?;
                    if p == Provider::Powers {
                        SequenceProvider::powers(op, args.horizon)
                    } else {
                        SequenceProvider::cesaro(op, args.horizon)
                    }
                }
            };
            (g, provider)
        }
        (None, None) => return Err(usage("give --fixture or --groupoid")),
    };
    let kappa = load_kappa::<S>(args.kappa.as_deref(), g.num_objects())?;
    let m_hat = reference_measure(&g, &kappa).map_err(lib)?;
    let caps = ConstructionCaps { product_cap: args.product_cap };
    let (p, cert) = construct_liouville(&provider, &m_hat, &schedule, caps, tol).map_err(lib)?;
    let check = verify_certificate(&p, &m_hat, &schedule, &cert, tol);
    let violations = recheck_selection(&provider, &m_hat, &schedule, &cert, tol).map_err(lib)?;

    let mut report = cert.report();
    let _ = writeln!(report, "reference measure: normalized lambda*kappa, {} atoms", m_hat.support_len());
    let _ = writeln!(report, "selection recheck: {} product(s) above epsilon_i", violations.len());
    if check.ok {
        report.push_str("certificate check: every Delta(m, P^k_i) <= 3*epsilon_i + 2*residual\n");
    } else {
        report.push_str("certificate check FAILED\n");
        for d in &check.diffs {
            let _ = writeln!(report, "  {d}");
        }
    }
    if let Some(path) = &args.operator_out {
        write(path, &(system_to_json(p.system()) + "\n"))?;
    }
    let failure = if !check.ok {
        Some(format!("certificate check failed at {} point(s)", check.diffs.len()))
    } else if !violations.is_empty() {
        Some(format!("{} selected product(s) exceed epsilon_i on recheck", violations.len()))
    } else {
        None
    };
    Ok(Output { csv: cert.to_csv(), report, failure })
}

fn profile_output<S: Scalar>(report: &FibrewiseReport<S>) -> Output {
    let mut csv = String::from("object,n,d_n\n");
    for p in &report.per_object {
        for (i, v) in p.values.iter().enumerate() {
            let _ = writeln!(csv, "{},{},{}", p.object.0, i + 1, v);
        }
    }
    Output { csv, report: report.report(), failure: None }
}

enum GroupSpec {
    Z,
    Zn(usize),
    F2,
}

fn parse_group(text: &str) -> R<GroupSpec> {
    match text.trim() {
        "z" => Ok(GroupSpec::Z),
        "f2" => Ok(GroupSpec::F2),
        other => other
            .strip_prefix("zn:")
            .and_then(|n| n.parse().ok())
            .filter(|&n: &usize| n > 0)
            .map(GroupSpec::Zn)
            .ok_or_else(|| usage(format!("unknown group {other:?}; use z, zn:<n> or f2"))),
    }
}

fn uniform_on<S: Scalar>(elements: std::ops::Range<usize>) -> GroupMeasure<usize, S> {
    GroupMeasure::uniform(elements).expect("n > 0")
}

/// `elem:weight,...`; weights are fractions or (float mode) decimals.
fn parse_mu<G: GroupOracle, S: Scalar>(oracle: &G, text: &str) -> R<GroupMeasure<G::Element, S>> {
    let mut mu = GroupMeasure::zero();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (elem, weight) = item
            .rsplit_once(':')
            .ok_or_else(|| usage(format!("measure entry {item:?} is not elem:weight")))?;
        mu.add_mass(oracle.parse_element(elem).map_err(lib)?, parse_scalar::<S>(weight).map_err(lib)?);
    }
    Ok(mu)
}

fn group_measure<G: GroupOracle, S: Scalar>(
    oracle: &G,
    args: &GroupArgs,
    default: impl Fn() -> GroupMeasure<G::Element, S>,
    tol: Tolerance,
) -> R<GroupMeasure<G::Element, S>> {
    let mu = match &args.mu {
        Some(text) => parse_mu(oracle, text)?,
        None => default(),
    };
    mu.check_probability(tol).map_err(lib)?;
    Ok(mu)
}

fn sweep<G: GroupOracle, S: Scalar>(
    oracle: &G,
    args: &GroupArgs,
    default: impl Fn() -> GroupMeasure<G::Element, S>,
    probe: &str,
    horizon: usize,
    cap: usize,
    tol: Tolerance,
) -> R<Output> {
    let mu = group_measure(oracle, args, default, tol)?;
    let probe = oracle.parse_element(probe).map_err(lib)?;
    let sweep = convolution_power_sweep(oracle, &mu, horizon, &probe, cap);
    let mut report = String::new();
    let _ = writeln!(report, "group {}, mu on {} element(s), probe {probe}", oracle.name(), mu.support_len());
    let _ = writeln!(report, "value = Delta(delta_probe, mu^n) = ||probe mu^n - mu^n||");
    if let Some(hit) = sweep.truncated {
        let _ = writeln!(
            report,
            "support cap {} exceeded at n = {} ({} elements); values stop at n = {}",
            hit.cap,
            hit.n,
            hit.size,
            hit.n - 1
        );
    }
    Ok(Output { csv: sweep.to_csv(), report, failure: None })
}

fn folner<G: GroupOracle, S: Scalar>(
    oracle: &G,
    args: &GroupArgs,
    default: impl Fn() -> GroupMeasure<G::Element, S>,
    set: &str,
    tol: Tolerance,
) -> R<Output> {
    let mu = group_measure(oracle, args, default, tol)?;
    let set: Vec<G::Element> = set
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|e| oracle.parse_element(e).map_err(lib))
        .collect::<R<_>>()?;
    let sym = folner_measure_test(oracle, &mu, &set).map_err(lib)?;
    let direct = folner_measure_direct(oracle, &mu, &set).map_err(lib)?;
    let csv = format!("method,value\nsymmetric_difference,{sym}\ndirect,{direct}\n");
    let report = format!(
        "group {}, |A| = {} (after reduction), Delta(mu, chi_A) = sum_g mu(g) |gA sym A| / |A|\n",
        oracle.name(),
        set.iter().map(|g| oracle.canonicalize(g)).collect::<std::collections::BTreeSet<_>>().len()
    );
    let failure = (!sym.approx_eq(&direct, tol)).then(|| format!("the two routes disagree: {sym} vs {direct}"));
    Ok(Output { csv, report, failure })
}

fn rwre<S: Scalar>(cli: &Cli, command: &RwreCommand, tol: Tolerance) -> R<Output> {
    match command {
        RwreCommand::Simulate { env, object, start, steps, samples, paths_log } => {
            let action = load_action(&env.action)?;
            let theta = parse_theta::<S>(&action, &read(&env.theta)?).map_err(lib)?;
            let x = parse_object(object).map_err(lib)?;
            if x.0 >= action.num_objects() {
                return Err(usage(format!("--object {object} out of range ({} points)", action.num_objects())));
            }
            let order = action.group().order();
            if *start >= order {
                return Err(usage(format!("--start {start} outside a group of order {order}")));
            }
            if *samples == 0 {
                return Err(usage("--samples must be positive"));
            }
            let environment = environment_of(&action, &theta, x, tol).map_err(lib)?;
            let oracle = FiniteGroup(action.group().clone());
            let exact = exact_distribution(&oracle, &environment, start, *steps).map_err(lib)?;
            let empirical =
                empirical_distribution(&oracle, &environment, start, *steps, *samples, cli.seed).map_err(lib)?;
            if let Some(path) = paths_log {
                let path_sample = sample_rwre_path(&oracle, &environment, start, *steps, cli.seed).map_err(lib)?;
                let mut log = String::from("seed,stream,step,state\n");
                for (i, s) in path_sample.states.iter().enumerate() {
                    let _ = writeln!(log, "{},{},{},{}", path_sample.seed, path_sample.stream, i, s);
                }
                write(path, &log)?;
            }
            let mut report = String::new();
            let _ = writeln!(
                report,
                "environment env_theta(x{}) on a group of order {order}; start {start}, {steps} steps, {samples} samples, seed {}",
                x.0, cli.seed
            );
            let _ = writeln!(report, "total variation, empirical vs exact law: {}", empirical_total_variation(&empirical, &exact));
            Ok(Output { csv: histogram_csv(&empirical, &exact), report, failure: None })
        }
        RwreCommand::Report { env, mode, horizon, threshold, kappa } => {
            let action = load_action(&env.action)?;
            let theta = parse_theta::<S>(&action, &read(&env.theta)?).map_err(lib)?;
            let kappa = load_kappa::<S>(kappa.as_deref(), action.num_objects())?;
            let report = rwre_tail_report(&action, &theta, &kappa, *horizon, *mode, *threshold, tol).map_err(lib)?;
            Ok(profile_output(&report))
        }
    }
}
