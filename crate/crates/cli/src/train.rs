//! Training runs and their artifacts.

use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use reconn_core::architectures::SingularRow;
use reconn_core::losses::{Batch, Loss, LossKind, LossWeights};
use reconn_core::metrics::{self, ErrorReport, GridSpec};
use reconn_core::{checkpoint, Adam, Cutoff, Field, LrSchedule, Problem, ProblemKind, Rng};

use crate::config::{Architecture, Settings};

pub const LOSS_HISTORY: &str = "loss_history.csv";
pub const METRICS: &str = "metrics.json";
pub const CHECKPOINT_DIR: &str = "checkpoint";
pub const GRID_HALF: &str = "grid_half.csv";
pub const GRID_FINAL: &str = "grid_final.csv";
pub const SINGULAR_REPORT: &str = "singular_report.csv";
pub const RESOLVED_CONFIG: &str = "config.resolved.json";

/// What a finished run reports.
#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub seed: u64,
    pub iterations: usize,
    pub param_count: usize,
    pub final_loss: f64,
    pub report: ErrorReport,
    /// Trained singular exponents, one per singular unit.
    pub lambda: Vec<f64>,
    pub lambda_exact: Option<f64>,
    pub wall_seconds: f64,
}

pub fn build_field(s: &Settings, problem: &Problem) -> Result<Field> {
    let cutoff = Cutoff::new(s.cutoff[0], s.cutoff[1]);
    let angular = || s.angular_layers.as_deref().context("missing angular_layers");
    let f = match s.experiment.architecture() {
        Architecture::Classical => Field::classical(&s.layers, s.activation, s.seed)?,
        Architecture::Interface => Field::interface(&s.layers, s.activation, problem.interfaces.clone(), s.seed)?,
        Architecture::Corner => Field::corner(&s.layers, angular()?, &problem.centers, cutoff, s.seed)?,
        Architecture::MaterialVertex => Field::material_vertex(&s.layers, angular()?, cutoff, s.seed)?,
    };
    Ok(f)
}

pub fn build_loss(s: &Settings, problem: &Problem, field: &Field) -> Result<Loss> {
    let loss = match s.experiment.loss() {
        LossKind::Pinns => Loss::pinns(problem, !field.units().is_empty()),
        LossKind::H1Fit => Loss::h1_fit(problem),
    };
    Ok(match &s.weights {
        Some(w) => loss.with_weights(LossWeights(w.clone()))?,
        None => loss,
    })
}

/// Angles at which the singular profile is reported: midpoints of a uniform
/// partition of the angular range of the domain, so interfaces are avoided.
fn report_angles(kind: ProblemKind) -> Vec<f64> {
    let (lo, hi, n) = match kind {
        ProblemKind::LShape => (-PI / 2.0, PI, 300),
        _ => (0.0, 2.0 * PI, 400),
    };
    (0..n).map(|i| lo + (i as f64 + 0.5) * (hi - lo) / n as f64).collect()
}

fn write_singular_report(rows: &[SingularRow], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "theta,phi,flux")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.theta, r.phi, r.flux)?;
    }
    w.flush()?;
    Ok(())
}

fn write_grid(field: &Field, problem: &Problem, grid: GridSpec, path: &Path) -> Result<ErrorReport> {
    let rows = metrics::grid_dump(field, problem, grid)?;
    let mut w = BufWriter::new(File::create(path)?);
    metrics::write_csv(&rows, &mut w)?;
    w.flush()?;
    Ok(metrics::report_from_rows(&rows, grid))
}

/// Trains the configured field, calling `observe(iteration, total)` after
/// every evaluation. Returns the trained field and the last loss.
pub fn train(
    s: &Settings,
    problem: &Problem,
    mut observe: impl FnMut(usize, &Field, &reconn_core::LossValue, f64) -> Result<()>,
) -> Result<(Field, f64)> {
    let mut field = build_field(s, problem)?;
    let loss = build_loss(s, problem, &field)?;
    let schedule = LrSchedule {
        total: s.iterations,
        lr0: s.lr0,
        decay: s.lr_decay,
    };
    let mut adam = Adam::new(field.param_count());
    let mut rng = Rng::new(s.seed, 1);
    let mut last = f64::NAN;
    for it in 0..s.iterations {
        let batch = match loss.kind() {
            LossKind::Pinns => Batch::sample(problem, s.batch, &mut rng, s.stratified),
            LossKind::H1Fit => Batch::interior_only(problem, s.batch[0], &mut rng, s.stratified),
        };
        let v = loss
            .evaluate(&field, problem, &batch, true)
            .with_context(|| format!("evaluating the loss at iteration {it}"))?;
        if !v.total.is_finite() || v.grad.iter().any(|g| !g.is_finite()) {
            bail!("non-finite loss at iteration {it} (total = {})", v.total);
        }
        let lr = schedule.lr_at(it);
        observe(it, &field, &v, lr)?;
        adam.step(field.params_mut().values_mut(), &v.grad, lr)?;
        last = v.total;
    }
    Ok((field, last))
}

/// Runs an experiment and writes every artifact to `s.output_dir`.
pub fn run(s: &Settings) -> Result<Summary> {
    let start = Instant::now();
    let out = &s.output_dir;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join(RESOLVED_CONFIG), serde_json::to_string_pretty(s)?)?;
    let problem = Problem::from_kind(s.experiment.problem())?;
    let grid = GridSpec { n: s.grid };

    let mut history = BufWriter::new(File::create(out.join(LOSS_HISTORY))?);
    let half = s.iterations / 2;
    let mut header_done = false;
    let (field, final_loss) = train(s, &problem, |it, field, v, lr| {
        if !header_done {
            let mut cols = vec!["iteration".to_string(), "lr".into(), "total".into()];
            cols.extend(v.components.iter().map(|c| c.name().to_string()));
            cols.extend(v.components.iter().map(|c| format!("{}_sqrt", c.name())));
            cols.extend((0..field.units().len()).map(|i| format!("lambda{i}")));
            writeln!(history, "{}", cols.join(","))?;
            header_done = true;
        }
        let mut line = format!("{it},{lr},{}", v.total);
        for r in &v.raw {
            line.push_str(&format!(",{r}"));
        }
        for r in v.rooted() {
            line.push_str(&format!(",{r}"));
        }
        for l in field.lambdas() {
            line.push_str(&format!(",{l}"));
        }
        writeln!(history, "{line}")?;
        if it == half && half > 0 {
            write_grid(field, &problem, grid, &out.join(GRID_HALF))?;
        }
        Ok(())
    })?;
    history.flush()?;

    let report = write_grid(&field, &problem, grid, &out.join(GRID_FINAL))?;
    checkpoint::save(&field, &out.join(CHECKPOINT_DIR))?;
    if !field.units().is_empty() {
        let sigma = |t: f64| problem.sigma_at([t.cos(), t.sin()]);
        let rows = field.singular_report(0, &report_angles(problem.kind), &sigma)?;
        write_singular_report(&rows, &out.join(SINGULAR_REPORT))?;
    }
    let summary = Summary {
        experiment: s.experiment.id().to_string(),
        seed: s.seed,
        iterations: s.iterations,
        param_count: field.param_count(),
        final_loss,
        report,
        lambda: field.lambdas(),
        lambda_exact: problem.lambda_exact,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    fs::write(out.join(METRICS), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}
