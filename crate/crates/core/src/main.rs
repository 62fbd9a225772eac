use std::path::PathBuf;
use std::process::ExitCode;

use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};

use icebm::io::{load_config, rerun_manifest, run_experiment, ExperimentRegistry, ExperimentSpec, RunManifest};
use icebm::{EbmError, ModelParams, Result};

fn defaults_help() -> String {
    let p = ModelParams::default();
    format!(
        "Default model parameters (override under \"params\" in the config):\n  \
         R={} Q={} s2={} alpha_w={} alpha_s={} K_albedo={}\n  \
         a={} b={} c={} kappa={} K_drift={} X_critical={}\n  \
         A=(b+c)/R={:.6} B=c/R={:.6} A-B={:.6}\n\
         Exit codes: 0 success, 2 configuration error, 3 assumption check failed, 4 numerical abort.",
        p.heat_capacity,
        p.solar,
        p.s2,
        p.alpha_w,
        p.alpha_s,
        p.k_albedo,
        p.a,
        p.b,
        p.c,
        p.kappa,
        p.k_drift,
        p.x_critical,
        p.a_rate(),
        p.b_rate(),
        p.a_rate() - p.b_rate()
    )
}

fn experiment_command(name: &'static str, about: &'static str) -> Command {
    Command::new(name)
        .about(about)
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .value_parser(value_parser!(PathBuf))
                .help("JSON experiment spec; standard defaults fill omitted fields"),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .value_name("DIR")
                .value_parser(value_parser!(PathBuf))
                .help("Output directory [config default: out]"),
        )
        .arg(
            Arg::new("seed")
                .long("seed")
                .value_parser(value_parser!(u64))
                .help("Base seed of every random stream [default: 1]"),
        )
        .arg(
            Arg::new("paths")
                .long("paths")
                .value_parser(value_parser!(usize))
                .help("Ensemble size [default: 1000]"),
        )
        .arg(
            Arg::new("eps")
                .long("eps")
                .value_delimiter(',')
                .value_parser(value_parser!(f64))
                .action(ArgAction::Append)
                .help("Comma-separated epsilon ladder [default: 0.1,0.03,0.01]; a single value sets run.epsilon"),
        )
}

fn cli(registry: &ExperimentRegistry) -> Command {
    let mut cmd = Command::new("icebm")
        .about("Stochastic energy-balance model with a slowly moving ice line")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .after_help(defaults_help());
    for e in registry.iter() {
        cmd = cmd.subcommand(experiment_command(e.name(), e.about()).after_help(defaults_help()));
    }
    cmd.subcommand(
        Command::new("rerun")
            .about("repeat a run from its manifest and compare output digests")
            .arg(
                Arg::new("manifest")
                    .long("manifest")
                    .value_name("FILE")
                    .help("manifest.json written by an earlier run")
                    .required(true)
                    .value_parser(value_parser!(PathBuf)),
            )
            .arg(
                Arg::new("out")
                    .long("out")
                    .value_name("DIR")
                    .help("Directory for the repeated outputs")
                    .required(true)
                    .value_parser(value_parser!(PathBuf)),
            ),
    )
}

fn resolve_spec(kind: &str, m: &ArgMatches) -> Result<ExperimentSpec> {
    let mut spec = match m.get_one::<PathBuf>("config") {
        Some(path) => load_config(path)?,
        None => ExperimentSpec::new(kind),
    };
    spec.kind = kind.to_string();
    if let Some(out) = m.get_one::<PathBuf>("out") {
        spec.output_dir = out.clone();
    }
    if let Some(&seed) = m.get_one::<u64>("seed") {
        spec.run.seed = seed;
    }
    if let Some(&paths) = m.get_one::<usize>("paths") {
        spec.run.n_paths = paths;
    }
    if let Some(eps) = m.get_many::<f64>("eps") {
        let eps: Vec<f64> = eps.copied().collect();
        if let [single] = eps[..] {
            spec.run.epsilon = single;
        }
        spec.options.epsilons = eps;
    }
    Ok(spec)
}

fn execute(registry: &ExperimentRegistry, matches: &ArgMatches) -> Result<()> {
    let (name, sub) = matches.subcommand().expect("subcommand required");
    if name == "rerun" {
        let manifest = RunManifest::load(sub.get_one::<PathBuf>("manifest").unwrap())?;
        let out = sub.get_one::<PathBuf>("out").unwrap();
        let (_, changed) = rerun_manifest(&manifest, out, registry)?;
        if !changed.is_empty() {
            return Err(EbmError::Validation(format!("outputs differ from manifest: {}", changed.join(", "))));
        }
        println!("reproduced {} output(s) in {}", manifest.outputs.len(), out.display());
        return Ok(());
    }
    let spec = resolve_spec(name, sub)?;
    let manifest = run_experiment(&spec, registry)?;
    println!("{}", serde_json::to_string_pretty(&manifest.summary)?);
    println!("wrote {} output(s) and the manifest to {}", manifest.outputs.len(), spec.output_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let registry = ExperimentRegistry::with_builtins();
    let matches = cli(&registry).get_matches();
    match execute(&registry, &matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
