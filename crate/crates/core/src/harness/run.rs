use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, OptimizerSpec};
use super::trace::{TraceRecord, TraceWriter};
use crate::baselines::BaselineOptimizer;
use crate::error::{Error, Result};
use crate::mixer::{SamState, StepReport};
use crate::problems::GradientOracle;
use crate::rng::{sample_batch, stream_rng, Stream};
use crate::vecops;
use crate::vr::{VrConfig, VrRunner};

/// End-of-run figures. `sfo_calls` counts optimizer gradient work only;
/// the full evaluations made for tracing are in `eval_calls`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub optimizer: String,
    pub iters: usize,
    pub final_loss: f64,
    pub final_grad_norm_sq: f64,
    pub min_grad_norm_sq: f64,
    pub sfo_calls: u64,
    pub eval_calls: u64,
    /// SAM-VR only: `‖∇f‖²` at the uniformly sampled output iterate.
    pub sampled_grad_norm_sq: Option<f64>,
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "optimizer          {}", self.optimizer)?;
        writeln!(f, "iterations         {}", self.iters)?;
        writeln!(f, "final loss         {:.6e}", self.final_loss)?;
        writeln!(f, "final grad_norm_sq {:.6e}", self.final_grad_norm_sq)?;
        writeln!(f, "min grad_norm_sq   {:.6e}", self.min_grad_norm_sq)?;
        if let Some(g) = self.sampled_grad_norm_sq {
            writeln!(f, "sampled grad_norm_sq {g:.6e}")?;
        }
        writeln!(f, "sfo calls          {}", self.sfo_calls)?;
        write!(f, "eval calls         {}", self.eval_calls)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: Summary,
    pub records: Vec<TraceRecord>,
    pub final_x: Vec<f64>,
}

/// `init_scale · N(0, I)` from the init stream, or the origin.
pub fn initial_point(seed: u64, init_scale: f64, dim: usize) -> Vec<f64> {
    if init_scale == 0.0 {
        return vec![0.0; dim];
    }
    let mut rng = stream_rng(seed, Stream::Init);
    (0..dim)
        .map(|_| init_scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

#[derive(Default, Clone, Copy)]
struct Diag {
    alpha: Option<f64>,
    beta: Option<f64>,
    delta_k: Option<f64>,
    lambda_k: Option<f64>,
    fell_back: bool,
}

impl From<&StepReport> for Diag {
    fn from(r: &StepReport) -> Self {
        Diag {
            alpha: Some(r.alpha_used),
            beta: Some(r.beta_used),
            delta_k: Some(r.delta_k),
            lambda_k: r.lambda_k,
            fell_back: r.fell_back,
        }
    }
}

struct Tracer<'o, 'w> {
    oracle: &'o dyn GradientOracle,
    writer: Option<TraceWriter<&'w mut dyn Write>>,
    records: Vec<TraceRecord>,
    start: Option<Instant>,
    eval_calls: u64,
    min_gns: f64,
}

impl Tracer<'_, '_> {
    fn record(&mut self, x: &[f64], iter: usize, epoch: usize, sfo: u64, d: Diag) -> Result<()> {
        let loss = self.oracle.loss(x);
        let g = self.oracle.full_gradient(x);
        self.eval_calls += self.oracle.num_samples() as u64;
        let gns = vecops::norm_sq(&g);
        if !loss.is_finite() || !gns.is_finite() {
            return Err(Error::NonFinite("objective"));
        }
        self.min_gns = self.min_gns.min(gns);
        let rec = TraceRecord {
            iter,
            epoch,
            sfo_calls: sfo,
            loss,
            grad_norm_sq: gns,
            alpha: d.alpha,
            beta: d.beta,
            delta_k: d.delta_k,
            lambda_k: d.lambda_k,
            fell_back: d.fell_back,
            wall_ms: self.start.map(|s| s.elapsed().as_secs_f64() * 1e3),
        };
        if let Some(w) = self.writer.as_mut() {
            w.write(&rec)?;
        }
        self.records.push(rec);
        Ok(())
    }

    fn finish(
        self,
        label: &str,
        iters: usize,
        sfo: u64,
        sampled: Option<f64>,
    ) -> (Summary, Vec<TraceRecord>) {
        let last = self.records.last().expect("iteration 0 is always recorded");
        let summary = Summary {
            optimizer: label.to_string(),
            iters,
            final_loss: last.loss,
            final_grad_norm_sq: last.grad_norm_sq,
            min_grad_norm_sq: self.min_gns,
            sfo_calls: sfo,
            eval_calls: self.eval_calls,
            sampled_grad_norm_sq: sampled,
        };
        (summary, self.records)
    }
}

enum Stepper {
    Baseline {
        x: Vec<f64>,
        opt: Box<dyn BaselineOptimizer>,
    },
    Sam {
        state: SamState,
        fallback: Option<Box<dyn BaselineOptimizer>>,
    },
    Psam {
        state: SamState,
        precond: Box<dyn BaselineOptimizer>,
    },
}

impl Stepper {
    fn x(&self) -> &[f64] {
        match self {
            Stepper::Baseline { x, .. } => x,
            Stepper::Sam { state, .. } | Stepper::Psam { state, .. } => state.x(),
        }
    }

    fn step(&mut self, g: &[f64]) -> Result<Diag> {
        match self {
            Stepper::Baseline { x, opt } => {
                *x = opt.step(x, g)?;
                Ok(Diag::default())
            }
            Stepper::Sam { state, fallback } => {
                let r = vecops::scale(-1.0, g);
                let rep = state.sam_step(&r, fallback.as_deref_mut())?;
                Ok(Diag::from(&rep))
            }
            Stepper::Psam { state, precond } => {
                let r = vecops::scale(-1.0, g);
                let rep = state.psam_step(&r, precond.as_mut())?;
                Ok(Diag::from(&rep))
            }
        }
    }
}

/// Runs one experiment, streaming trace lines to `sink` as they are produced.
///
/// A numerical failure aborts the run with an error; everything written to
/// `sink` up to that point stays valid JSONL.
pub fn run_experiment(cfg: &ExperimentConfig, sink: Option<&mut dyn Write>) -> Result<RunOutput> {
    cfg.validate()?;
    let problem = cfg.problem.build(cfg.seed)?;
    let oracle = problem.oracle.as_ref();
    let t = oracle.num_samples();
    let batch = cfg.budget.batch_size.unwrap_or(t);
    if batch > t {
        return Err(Error::config(
            "budget.batch_size",
            format!("exceeds the number of samples ({t})"),
        ));
    }
    let x0 = initial_point(cfg.seed, cfg.init_scale, oracle.dim());
    let mut tracer = Tracer {
        oracle,
        writer: sink.map(TraceWriter::new),
        records: Vec::new(),
        start: cfg.trace.wall_clock.then(Instant::now),
        eval_calls: 0,
        min_gns: f64::INFINITY,
    };
    let every = cfg.trace.every;
    let label = cfg.optimizer.label();

    if let OptimizerSpec::SamVr {
        mixer,
        fallback,
        vr,
    } = &cfg.optimizer
    {
        let vr_cfg = VrConfig {
            epochs: cfg.budget.epochs.expect("validated"),
            inner: vr.inner,
            batch,
            reset_history: vr.reset_history,
        };
        let total = vr_cfg.epochs * vr_cfg.inner;
        let mut fb = fallback.as_ref().map(|f| f.build());
        let mut runner = VrRunner::new(oracle, mixer.clone(), vr_cfg, x0, cfg.seed)?;
        tracer.record(runner.x(), 0, 0, 0, Diag::default())?;
        let mut iter = 0;
        while let Some(step) = runner.step(fb.as_deref_mut())? {
            iter += 1;
            if !vecops::all_finite(runner.x()) {
                return Err(Error::NonFinite("iterate"));
            }
            if iter % every == 0 || iter == total {
                tracer.record(
                    runner.x(),
                    iter,
                    runner.epoch(),
                    step.sfo_calls,
                    Diag::from(&step.report),
                )?;
            }
        }
        let sampled = vecops::norm_sq(&oracle.full_gradient(runner.sampled_x()));
        tracer.eval_calls += t as u64;
        let final_x = runner.x().to_vec();
        let (summary, records) = tracer.finish(label, iter, runner.sfo_calls(), Some(sampled));
        return Ok(RunOutput {
            summary,
            records,
            final_x,
        });
    }

    let iters = match (cfg.budget.max_iters, cfg.budget.epochs) {
        (Some(n), _) => n,
        (None, Some(e)) => (e * t).div_ceil(batch),
        (None, None) => unreachable!("validated"),
    };
    let mut stepper = match &cfg.optimizer {
        OptimizerSpec::Baseline(b) => Stepper::Baseline {
            x: x0,
            opt: b.build(),
        },
        OptimizerSpec::AdaSam { mixer, fallback } => Stepper::Sam {
            state: SamState::new(mixer.clone(), x0)?,
            fallback: fallback.as_ref().map(|f| f.build()),
        },
        OptimizerSpec::PAdaSam { mixer, precond } => Stepper::Psam {
            state: SamState::new(mixer.clone(), x0)?,
            precond: precond.build(),
        },
        OptimizerSpec::SamVr { .. } => unreachable!("handled above"),
    };
    let mut batch_rng = stream_rng(cfg.seed, Stream::Batch);
    let mut sfo = 0u64;
    tracer.record(stepper.x(), 0, 0, 0, Diag::default())?;
    for iter in 1..=iters {
        let idx = sample_batch(&mut batch_rng, t, batch);
        let g = oracle.minibatch_gradient(stepper.x(), &idx)?;
        sfo += idx.len() as u64;
        if !vecops::all_finite(&g) {
            return Err(Error::NonFinite("gradient"));
        }
        let diag = stepper.step(&g)?;
        if !vecops::all_finite(stepper.x()) {
            return Err(Error::NonFinite("iterate"));
        }
        if iter % every == 0 || iter == iters {
            let epoch = iter * batch / t;
            tracer.record(stepper.x(), iter, epoch, sfo, diag)?;
        }
    }
    let final_x = stepper.x().to_vec();
    let (summary, records) = tracer.finish(label, iters, sfo, None);
    Ok(RunOutput {
        summary,
        records,
        final_x,
    })
}
