//! SVRG-corrected driver for the SAM update (SAM-VR).
//!
//! Each outer epoch takes a full-gradient snapshot at the current point and
//! then runs `inner` SAM steps on the corrected gradient
//! `∇f_K(x) − ∇f_K(x̃) + ∇f(x̃)`. The returned point is drawn uniformly
//! from all pre-update inner iterates by reservoir sampling.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::BaselineOptimizer;
use crate::error::{Error, Result};
use crate::mixer::{MixerConfig, SamState, StepReport};
use crate::problems::GradientOracle;
use crate::rng::{sample_batch, stream_rng, Stream};
use crate::vecops;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VrConfig {
    /// Outer loop count `N`.
    pub epochs: usize,
    /// Inner steps per snapshot `q`.
    pub inner: usize,
    /// Mini-batch size `n`.
    pub batch: usize,
    /// Empty the mixer history at every snapshot.
    #[serde(default)]
    pub reset_history: bool,
}

impl VrConfig {
    pub fn validate(&self, path: &str, samples: Option<usize>) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config(
                format!("{path}.epochs"),
                "must be at least 1",
            ));
        }
        if self.inner == 0 {
            return Err(Error::config(format!("{path}.inner"), "must be at least 1"));
        }
        if self.batch == 0 {
            return Err(Error::config(format!("{path}.batch"), "must be at least 1"));
        }
        if let Some(t) = samples {
            if self.batch > t {
                return Err(Error::config(
                    format!("{path}.batch"),
                    format!("exceeds the number of samples ({t})"),
                ));
            }
        }
        Ok(())
    }

    /// SFO calls of one outer epoch: `T + 2 q n`.
    pub fn sfo_per_epoch(&self, samples: usize) -> u64 {
        (samples + 2 * self.inner * self.batch) as u64
    }
}

/// Full-gradient anchor `(x̃, ∇f(x̃))`.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub x: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Snapshot {
    pub fn take(oracle: &dyn GradientOracle, x: &[f64]) -> Self {
        Snapshot {
            x: x.to_vec(),
            grad: oracle.full_gradient(x),
        }
    }
}

/// `∇f_K(x) − ∇f_K(x̃) + ∇f(x̃)`.
pub fn vr_gradient(
    oracle: &dyn GradientOracle,
    x: &[f64],
    snapshot: &Snapshot,
    batch: &[usize],
) -> Result<Vec<f64>> {
    let mut g = oracle.minibatch_gradient(x, batch)?;
    let anchor = oracle.minibatch_gradient(&snapshot.x, batch)?;
    vecops::axpy(-1.0, &anchor, &mut g);
    vecops::axpy(1.0, &snapshot.grad, &mut g);
    Ok(g)
}

/// One inner step as seen by a caller.
#[derive(Debug, Clone)]
pub struct VrStep {
    pub epoch: usize,
    pub inner: usize,
    /// Cumulative SFO calls, including this epoch's snapshot.
    pub sfo_calls: u64,
    pub report: StepReport,
}

#[derive(Debug, Clone)]
pub struct VrOutcome {
    /// `x̃_N`, the last iterate.
    pub final_x: Vec<f64>,
    /// Uniform draw from `{x_t^k}`, `t < q`, `k < N`.
    pub sampled_x: Vec<f64>,
    pub sfo_calls: u64,
    pub steps: Vec<VrStep>,
}

/// Stepwise SAM-VR, so callers can interleave tracing with the run.
pub struct VrRunner<'o> {
    oracle: &'o dyn GradientOracle,
    cfg: VrConfig,
    sam: SamState,
    snapshot: Option<Snapshot>,
    batch_rng: ChaCha8Rng,
    output_rng: ChaCha8Rng,
    epoch: usize,
    inner: usize,
    sfo_calls: u64,
    seen: u64,
    sampled: Vec<f64>,
}

impl<'o> VrRunner<'o> {
    pub fn new(
        oracle: &'o dyn GradientOracle,
        mixer: MixerConfig,
        cfg: VrConfig,
        x0: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate("vr", Some(oracle.num_samples()))?;
        if x0.len() != oracle.dim() {
            return Err(Error::DimensionMismatch {
                op: "sam-vr initial point",
                expected: oracle.dim(),
                got: x0.len(),
            });
        }
        let sampled = x0.clone();
        Ok(VrRunner {
            oracle,
            cfg,
            sam: SamState::new(mixer, x0)?,
            snapshot: None,
            batch_rng: stream_rng(seed, Stream::Batch),
            output_rng: stream_rng(seed, Stream::VrOutput),
            epoch: 0,
            inner: 0,
            sfo_calls: 0,
            seen: 0,
            sampled,
        })
    }

    pub fn finished(&self) -> bool {
        self.epoch >= self.cfg.epochs
    }

    pub fn x(&self) -> &[f64] {
        self.sam.x()
    }

    pub fn state(&self) -> &SamState {
        &self.sam
    }

    pub fn sfo_calls(&self) -> u64 {
        self.sfo_calls
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn snapshot(&self) -> Option<&Snapshot> {
        self.snapshot.as_ref()
    }

    pub fn sampled_x(&self) -> &[f64] {
        &self.sampled
    }

    /// Runs the next inner step, taking a snapshot first when an epoch starts.
    /// Returns `None` once all epochs are done.
    pub fn step(
        &mut self,
        fallback: Option<&mut (dyn BaselineOptimizer + '_)>,
    ) -> Result<Option<VrStep>> {
        if self.finished() {
            return Ok(None);
        }
        if self.inner == 0 {
            if self.cfg.reset_history && self.epoch > 0 {
                self.sam.clear_history();
            }
            let snap = Snapshot::take(self.oracle, self.sam.x());
            if !vecops::all_finite(&snap.grad) {
                return Err(Error::NonFinite("snapshot gradient"));
            }
            self.snapshot = Some(snap);
            self.sfo_calls += self.oracle.num_samples() as u64;
        }
        self.offer_candidate();

        let t = self.oracle.num_samples();
        let batch = sample_batch(&mut self.batch_rng, t, self.cfg.batch);
        let snap = self.snapshot.as_ref().expect("snapshot taken above");
        let g = vr_gradient(self.oracle, self.sam.x(), snap, &batch)?;
        self.sfo_calls += 2 * batch.len() as u64;
        let r = vecops::scale(-1.0, &g);
        let report = self.sam.sam_step(&r, fallback)?;

        let step = VrStep {
            epoch: self.epoch,
            inner: self.inner,
            sfo_calls: self.sfo_calls,
            report,
        };
        self.inner += 1;
        if self.inner == self.cfg.inner {
            self.inner = 0;
            self.epoch += 1;
        }
        Ok(Some(step))
    }

    /// Reservoir update with the current pre-step iterate.
    fn offer_candidate(&mut self) {
        self.seen += 1;
        if self.seen == 1 || self.output_rng.random_range(0..self.seen) == 0 {
            self.sampled = self.sam.x().to_vec();
        }
    }

    pub fn into_outcome(self, steps: Vec<VrStep>) -> VrOutcome {
        VrOutcome {
            final_x: self.sam.x().to_vec(),
            sampled_x: self.sampled,
            sfo_calls: self.sfo_calls,
            steps,
        }
    }
}

/// Runs all `N·q` inner steps.
pub fn run_sam_vr(
    oracle: &dyn GradientOracle,
    mixer: MixerConfig,
    cfg: VrConfig,
    x0: Vec<f64>,
    seed: u64,
    mut fallback: Option<&mut (dyn BaselineOptimizer + '_)>,
) -> Result<VrOutcome> {
    let mut runner = VrRunner::new(oracle, mixer, cfg, x0, seed)?;
    let mut steps = Vec::new();
    while let Some(step) = runner.step(fallback.as_deref_mut())? {
        steps.push(step);
    }
    Ok(runner.into_outcome(steps))
}
