use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::ExperimentSpec;
use crate::averaging::{find_equilibria, stationary_density, tabulate, AveragedModel};
use crate::error::{EbmError, Result};
use crate::grid::LatitudeGrid;
use crate::simulator::{
    convergence_experiment, ergodic_average_experiment, first_passage_monte_carlo, run_ensemble, run_slowfast,
    sobolev_diagnostic, RunConfig,
};
use crate::strategy::Model;
use crate::validation::{validate_assumptions, validate_assumptions_with};

/// Resolved inputs of one experiment plus a record of the files it wrote.
pub struct Context<'a> {
    pub spec: &'a ExperimentSpec,
    pub model: Model,
    dir: &'a Path,
    written: RefCell<Vec<PathBuf>>,
}

impl<'a> Context<'a> {
    pub(crate) fn new(spec: &'a ExperimentSpec, model: Model, dir: &'a Path) -> Self {
        Self {
            spec,
            model,
            dir,
            written: RefCell::new(Vec::new()),
        }
    }

    pub(crate) fn written(&self) -> Vec<PathBuf> {
        self.written.borrow().clone()
    }

    /// Creates `name` in the output directory and hands a buffered writer to `fill`.
    pub fn write_with(&self, name: &str, fill: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        self.written.borrow_mut().push(path.clone());
        let mut out = BufWriter::new(File::create(&path)?);
        fill(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        self.write_with(name, |w| writeln!(w, "{text}"))
    }

    fn tabulate(&self, model: &Model) -> Result<AveragedModel> {
        let o = &self.spec.options;
        tabulate(model, o.n_grid, o.delta, o.hermite_order)
    }

    fn analyzed(&self) -> Result<AveragedModel> {
        let mut m = self.tabulate(&self.model)?;
        m.equilibria = find_equilibria(&m);
        let sd = stationary_density(&m, self.spec.options.anchor)?;
        m.density = Some(sd.density);
        m.log_density = Some(sd.log_density);
        Ok(m)
    }
}

/// One runnable experiment kind; returns a JSON summary for the manifest.
pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;
    fn about(&self) -> &'static str;
    fn run(&self, ctx: &Context) -> Result<Value>;
}

/// Experiments by name.
pub struct ExperimentRegistry {
    table: BTreeMap<&'static str, Box<dyn Experiment>>,
}

impl ExperimentRegistry {
    pub fn empty() -> Self {
        Self { table: BTreeMap::new() }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Validate));
        r.register(Box::new(DriftCurve));
        r.register(Box::new(Equilibria));
        r.register(Box::new(Density));
        r.register(Box::new(Mfpt));
        r.register(Box::new(Simulate));
        r.register(Box::new(Converge));
        r.register(Box::new(Ergodic));
        r.register(Box::new(Sobolev));
        r
    }

    pub fn register(&mut self, e: Box<dyn Experiment>) {
        self.table.insert(e.name(), e);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.table.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Experiment> {
        self.table.values().map(|e| e.as_ref())
    }

    pub fn get(&self, name: &str) -> Result<&dyn Experiment> {
        self.table.get(name).map(|e| e.as_ref()).ok_or_else(|| {
            EbmError::Config(format!("unknown experiment kind '{name}' (known: {})", self.names().join(", ")))
        })
    }
}

impl Default for ExperimentRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

fn num_label(v: f64) -> String {
    format!("{v}").replace('.', "p").replace('-', "m")
}

struct Validate;

impl Experiment for Validate {
    fn name(&self) -> &'static str {
        "validate"
    }

    fn about(&self) -> &'static str {
        "check the structural assumptions numerically"
    }

    fn run(&self, ctx: &Context) -> Result<Value> {
        let report = match ctx.spec.options.kappa_prime {
            Some(k) => validate_assumptions_with(&ctx.model, k),
            None => validate_assumptions(&ctx.model),
        };
        ctx.write_json("validation.json", &report)?;
        if !report.all_passed() {
            return Err(EbmError::Validation(format!("failed: {}", report.failures().join(", "))));
        }
        Ok(json!({
            "all_passed": true,
            "a_minus_b": report.a_minus_b,
            "drift_at_equator": report.drift_at_equator,
            "drift_at_pole": report.drift_at_pole,
        }))
    }
}

struct DriftCurve;

impl Experiment for DriftCurve {
    fn name(&self) -> &'static str {
        "drift-curve"
    }

    fn about(&self) -> &'static str {
        "tabulate the averaged drift and diffusion for each solar constant"
    }

    fn run(&self, ctx: &Context) -> Result<Value> {
        let mut summary = Vec::new();
        for &q in &ctx.spec.options.solar_values {
            let mut model = ctx.model.clone();
            model.params = model.params.with_solar(q);
            model.params.validate()?;
            let m = ctx.tabulate(&model)?;
            ctx.write_with(&format!("drift_curve_Q{}.csv", num_label(q)), |w| {
                writeln!(w, "eta,f_hat,sigma_hat")?;
                for i in 0..m.eta_grid.len() {
                    writeln!(w, "{},{},{}", m.eta_grid[i], m.f_hat[i], m.sigma_hat[i])?;
                }
                Ok(())
            })?;
            summary.push(json!({ "Q": q, "equilibria": find_equilibria(&m) }));
        }
        Ok(Value::Array(summary))
    }
}

struct Equilibria;

impl Experiment for Equilibria {
    fn name(&self) -> &'static str {
        "equilibria"
    }

    fn about(&self) -> &'static str {
        "zeros of the averaged drift and their stability"
    }

    fn run(&self, ctx: &Context) -> Result<Value> {
        let m = ctx.tabulate(&ctx.model)?;
        let eq = find_equilibria(&m);
        let out = json!({
            "equilibria": eq,
            "stable": eq.iter().filter(|e| e.stable).count(),
            "max_difference_quotient": m.max_difference_quotient(),
        });
        ctx.write_json("equilibria.json", &out)?;
        Ok(out)
    }
}

struct Density;

impl Experiment for Density {
    fn name(&self) -> &'static str {
        "density"
    }

    fn about(&self) -> &'static str {
        "stationary density of the averaged ice-line diffusion"
    }

    fn run(&self, ctx: &Context) -> Result<Value> {
        let m = ctx.analyzed()?;
        ctx.write_with("density.csv", |w| m.write_csv(w).map_err(std::io::Error::other))?;
        let out = json!({ "modes": m.density_modes(), "equilibria": m.equilibria });
        ctx.write_json("density.json", &out)?;
        Ok(out)
    }
}

struct Mfpt;

impl Experiment for Mfpt {
    fn name(&self) -> &'static str {
        "mfpt"
    }

    fn about(&self) -> &'static str {
        "mean first-passage times between stable equilibria"
    }

    fn run(&self, ctx: &Context) -> Result<Value> {
        let m = ctx.analyzed()?.analyze()?;
        let o = &ctx.spec.options;
        let mut checks = Vec::new();
        for t in m.mfpt.as_deref().unwrap_or_default() {
            if o.mfpt_paths > 0 {
                let est = first_passage_monte_carlo(
                    &m,
                    t.from,
                    t.to,
                    t.reflecting_at,
                    o.mfpt_dt,
                    o.mfpt_paths,
                    o.mfpt_t_max,
                    ctx.spec.run.seed,
                )?;
                checks.push(est);
            }
        }
        let out = json!({ "passage_times": m.mfpt, "monte_carlo": checks, "equilibria": m.equilibria });
        ctx.write_json("mfpt.json", &out)?;
        Ok(out)
    }
}

struct Simulate;

impl Experiment for Simulate {
    fn name(&self) -> &'static str {
        "simulate"
    }

    fn about(&self) -> &'static str {
        "ensemble of slow-fast paths; trajectory of path 0"
    }

    fn run(&self, ctx: &Context) -> Result<Value> {
        let run = &ctx.spec.run;
        let summary = run_ensemble(&ctx.model, run)?;
        let trace = run_slowfast(&ctx.model, run, 0)?;
        ctx.write_with("trajectory.csv", |w| trace.path.write_csv(w))?;
        if run.snapshot_stride > 0 {
            let grid = LatitudeGrid::uniform(run.n_lat)?;
            ctx.write_with("field_snapshots.csv", |w| trace.write_snapshots_csv(&grid, w))?;
        }
        ctx.write_json("ensemble.json", &json!({ "summary": summary, "run": run }))?;
        if summary.aborted > 0 {
            return Err(EbmError::NonFinite {
                t: run.horizon,
                what: format!("{} of {} paths aborted", summary.aborted, summary.n_paths),
            });
        }
        Ok(serde_json::to_value(&summary)?)
    }
}

struct Converge;

impl Experiment for Converge {
    fn name(&self) -> &'static str {
        "converge"
    }

    fn about(&self) -> &'static str {
        "coupled slow-fast vs averaged sup distance along an epsilon ladder"
    }

    fn run(&self, ctx: &Context) -> Result<Value> {
        let m = ctx.tabulate(&ctx.model)?;
        let o = &ctx.spec.options;
        let r = convergence_experiment(&ctx.model, &m, &ctx.spec.run, &o.epsilons, o.threshold)?;
        ctx.write_json("convergence.json", &r)?;
        Ok(json!({
            "sup_errors": r.sup_errors,
            "exceed_probs": r.exceed_probs,
            "strictly_decreasing_2se": r.strictly_decreasing(2.0),
            "aborted": r.aborted,
        }))
    }
}

struct Ergodic;

impl Experiment for Ergodic {
    fn name(&self) -> &'static str {
        "ergodic"
    }

    fn about(&self) -> &'static str {
        "time-average error of the ice-line drift along frozen paths"
    }

    fn run(&self, ctx: &Context) -> Result<Value> {
        let o = &ctx.spec.options;
        let run = &ctx.spec.run;
        let r = ergodic_average_experiment(
            &ctx.model,
            o.frozen_eta,
            &o.horizons,
            o.ergodic_dt,
            run.n_lat,
            run.n_paths,
            &run.initial_field,
            run.seed,
        )?;
        ctx.write_json("ergodic.json", &r)?;
        Ok(json!({ "errors": r.errors, "exponent": r.exponent }))
    }
}

struct Sobolev;

impl Experiment for Sobolev {
    fn name(&self) -> &'static str {
        "sobolev"
    }

    fn about(&self) -> &'static str {
        "W^{1,2} norms of field snapshots and the sup-norm embedding check"
    }

    fn run(&self, ctx: &Context) -> Result<Value> {
        let mut run: RunConfig = ctx.spec.run.clone();
        if run.snapshot_stride == 0 {
            let (n, _) = run.step_plan(&ctx.model.params);
            run.snapshot_stride = (n / 100).max(1);
        }
        let model = &ctx.model;
        let traces: Vec<_> = (0..run.n_paths as u64)
            .into_par_iter()
            .map(|p| run_slowfast(model, &run, p).map(|t| t.snapshots))
            .collect::<Result<_>>()?;
        let grid = LatitudeGrid::uniform(run.n_lat)?;
        let r = sobolev_diagnostic(&traces, &grid)?;
        ctx.write_with("sobolev_trace.csv", |w| {
            writeln!(w, "t,mean_norm_sq,se,running_max")?;
            for j in 0..r.times.len() {
                writeln!(w, "{},{},{},{}", r.times[j], r.mean_norm_sq[j], r.mean_norm_sq_se[j], r.running_max[j])?;
            }
            Ok(())
        })?;
        ctx.write_json("sobolev.json", &r)?;
        Ok(json!({
            "constant": r.constant,
            "bound_violations": r.bound_violations,
            "plateau": r.plateau,
            "max_mean_norm_sq": r.max_mean_norm_sq,
        }))
    }
}

pub(crate) fn remove_files(files: &[PathBuf]) {
    for f in files {
        let _ = fs::remove_file(f);
    }
}
