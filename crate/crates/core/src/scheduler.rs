//! Asynchronous parallel evaluation with posterior-mean hallucination.
//!
//! A single controller owns the dataset and the surrogate. Workers evaluate
//! the objective concurrently and report back over a channel; nothing else
//! is shared. Whenever a worker frees up, the controller assigns it a point
//! immediately rather than waiting for a batch boundary. At most one
//! acquisition-maximizing job (exploit) is in flight at any time; every
//! other slot maximizes the posterior variance (explore), the asynchronous
//! form of the 1 + (B - 1) batch split.
//!
//! Pending evaluations are "hallucinated": the surrogate is refit with the
//! posterior mean standing in for the unknown outcome, which suppresses
//! duplicate assignments. The stand-in row is removed the moment the true
//! value arrives, so only observed data ever reaches the incumbent.

use std::collections::{BTreeMap, VecDeque};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::acquisition::{maximize_acquisition, AcquisitionContext, AcquisitionSpec};
use crate::bounds::BoxBounds;
use crate::dataset::{Dataset, OptMode};
use crate::design::latin_hypercube_seeded;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_for};
use crate::surrogate::{fit_surrogate, retrain_hypers, FittedModel, HyperState, ModelSettings};

/// Outcome of one objective call; the error string travels back to the
/// controller so the job can be marked failed.
pub type EvalResult = std::result::Result<f64, String>;

/// Objective evaluator handed to the workers. Receives the ambient-space
/// point and a per-worker generator (used e.g. for simulated delays).
pub type Evaluator = Arc<dyn Fn(&[f64], &mut rand_chacha::ChaCha8Rng) -> EvalResult + Send + Sync>;

/// Map from the search space to the ambient space (identity when the
/// objective is searched directly).
pub type AmbientMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskKind {
    Exploit,
    Explore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JobStatus {
    Pending,
    Hallucinated,
    Complete,
    Failed,
}

/// One evaluation's lifecycle, as it lands in the trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobRecord {
    /// Completion order, dense from zero.
    pub index: u64,
    pub job_id: u64,
    pub worker_id: usize,
    pub task: TaskKind,
    pub status: JobStatus,
    pub submit_ms: u64,
    pub complete_ms: u64,
    /// Controller time spent retraining and refitting after this completion.
    pub refit_ms: u64,
    /// Inducing points carried by the refit model.
    pub m_inducing: usize,
    pub z: Vec<f64>,
    pub y: Option<f64>,
    pub best_so_far: Option<f64>,
}

impl JobRecord {
    /// Copy with timing fields zeroed, for determinism comparisons.
    pub fn canonicalized(&self) -> JobRecord {
        JobRecord {
            submit_ms: 0,
            complete_ms: 0,
            refit_ms: 0,
            ..self.clone()
        }
    }
}

/// Pool-level knobs; model behavior lives in [`ModelSettings`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoolSettings {
    pub workers: usize,
    /// Number of completed evaluations to collect.
    pub budget: usize,
    pub wallclock: Option<Duration>,
    pub seed: u64,
    pub z_bounds: BoxBounds,
    pub mode: OptMode,
    pub acquisition: AcquisitionSpec,
    /// Multi-start count for the inner acquisition search.
    pub acq_budget: usize,
    /// Size of the space-filling initial design.
    pub init_design: usize,
    pub model: ModelSettings,
}

impl PoolSettings {
    fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::input("at least one worker is required"));
        }
        if self.init_design == 0 {
            return Err(Error::input("the initial design needs at least one point"));
        }
        if self.acq_budget == 0 {
            return Err(Error::input("the acquisition search needs a positive budget"));
        }
        Ok(())
    }
}

/// Retrain at the second completion, then on the configured interval.
fn retrain_due(interval: usize, completed: u64) -> bool {
    if interval == 0 || completed < 2 {
        return false;
    }
    (completed - 2).is_multiple_of(interval as u64)
}

struct PendingJob {
    z: Vec<f64>,
    task: TaskKind,
    worker_id: usize,
    submit_ms: u64,
    status: JobStatus,
    surrogate: Option<f64>,
}

/// An assignment handed to a worker.
#[derive(Debug, Clone)]
pub struct Assignment {
    pub job_id: u64,
    pub z: Vec<f64>,
    pub x: Vec<f64>,
    pub task: TaskKind,
}

/// Controller state machine: owns the data, the surrogate, and the
/// hallucination bookkeeping. Single-threaded by construction; `run_pool`
/// is the only place that talks to workers.
pub struct PoolCore {
    settings: PoolSettings,
    to_ambient: AmbientMap,
    started: Instant,
    init_queue: VecDeque<Vec<f64>>,
    true_data: Dataset,
    pending: BTreeMap<u64, PendingJob>,
    hypers: HyperState,
    model: Option<FittedModel>,
    next_job_id: u64,
    completed: u64,
    failed: u64,
    last_refit_ms: u64,
}

impl PoolCore {
    pub fn new(settings: PoolSettings, to_ambient: AmbientMap) -> Result<Self> {
        settings.validate()?;
        let d = settings.z_bounds.dim();
        let init = latin_hypercube_seeded(
            &settings.z_bounds,
            settings.init_design,
            settings.seed,
            "init",
            0,
        )?;
        let init_queue: VecDeque<Vec<f64>> = (0..init.nrows())
            .map(|i| init.row(i).iter().copied().collect())
            .collect();
        let hypers = HyperState::initial(&settings.model)?;
        Ok(PoolCore {
            to_ambient,
            started: Instant::now(),
            init_queue,
            true_data: Dataset::new(d, settings.mode),
            pending: BTreeMap::new(),
            hypers,
            model: None,
            next_job_id: 0,
            completed: 0,
            failed: 0,
            last_refit_ms: 0,
            settings,
        })
    }

    pub fn completed(&self) -> u64 {
        self.completed
    }

    pub fn outstanding(&self) -> usize {
        self.pending.len()
    }

    pub fn data(&self) -> &Dataset {
        &self.true_data
    }

    pub fn hypers(&self) -> &HyperState {
        &self.hypers
    }

    pub fn settings(&self) -> &PoolSettings {
        &self.settings
    }

    pub fn surrogate_rows(&self) -> usize {
        self.pending.values().filter(|p| p.surrogate.is_some()).count()
    }

    /// Replay completed records (from a checkpoint) into the state.
    pub fn restore(&mut self, records: &[JobRecord], hypers: Option<HyperState>) -> Result<()> {
        for r in records {
            if r.status != JobStatus::Complete {
                continue;
            }
            let y = r
                .y
                .ok_or_else(|| Error::protocol("completed record without a value"))?;
            self.true_data.append(r.z.clone(), y)?;
            self.completed += 1;
            // Consume the matching initial-design entry.
            if self.init_queue.front().is_some_and(|z| *z == r.z) {
                self.init_queue.pop_front();
            }
            self.next_job_id = self.next_job_id.max(r.job_id + 1);
        }
        if let Some(h) = hypers {
            self.hypers = h;
        }
        if !self.true_data.is_empty() {
            self.rebuild_model()?;
        }
        Ok(())
    }

    fn elapsed_ms(&self) -> u64 {
        self.started.elapsed().as_millis() as u64
    }

    fn view(&self) -> Result<Dataset> {
        let mut view = self.true_data.clone();
        for job in self.pending.values() {
            if let Some(mu) = job.surrogate {
                view.append(job.z.clone(), mu)?;
            }
        }
        Ok(view)
    }

    /// Refit the surrogate on the hallucinated view, filling in surrogate
    /// values for any pending job that predates the first model.
    fn rebuild_model(&mut self) -> Result<()> {
        if self.true_data.is_empty() {
            return Ok(());
        }
        loop {
            let view = self.view()?;
            let model = fit_surrogate(
                &view,
                &self.settings.z_bounds,
                &self.settings.model,
                &self.hypers,
                self.completed,
                self.settings.seed,
            )?;
            let missing: Vec<u64> = self
                .pending
                .iter()
                .filter(|(_, j)| j.surrogate.is_none())
                .map(|(id, _)| *id)
                .collect();
            if missing.is_empty() {
                // One stand-in row per pending job, no more and no fewer.
                debug_assert_eq!(self.surrogate_rows(), self.pending.len());
                self.model = Some(model);
                return Ok(());
            }
            for id in missing {
                let job = self.pending.get_mut(&id).expect("pending id");
                let (mu, _) = crate::surrogate::Surrogate::posterior_one(&model, &job.z)?;
                job.surrogate = Some(mu);
                job.status = JobStatus::Hallucinated;
            }
        }
    }

    fn capacity_left(&self) -> bool {
        (self.completed as usize) + self.pending.len() < self.settings.budget
    }

    /// Pick the next point for an idle worker, or `None` when nothing can
    /// be assigned right now (budget covered, or no model yet to propose
    /// from).
    pub fn next_assignment(&mut self, worker_id: usize) -> Result<Option<Assignment>> {
        if !self.capacity_left() {
            return Ok(None);
        }
        let job_id = self.next_job_id;
        let (z, task) = if let Some(z) = self.init_queue.pop_front() {
            (z, TaskKind::Explore)
        } else {
            let Some(model) = self.model.as_ref() else {
                // Bootstrap: nothing observed yet, nothing to propose from.
                return Ok(None);
            };
            // Anchor the improvement scores to the incumbent of the
            // hallucinated view: a stand-in row that predicts better than
            // the true incumbent must not register as pending improvement,
            // or the exploit search locks onto it and keeps resubmitting
            // the same point.
            let mut f_best = self
                .true_data
                .incumbent_value()
                .ok_or_else(|| Error::protocol("model exists without observations"))?;
            for job in self.pending.values() {
                if let Some(mu) = job.surrogate {
                    if self.settings.mode.improves(mu, f_best) {
                        f_best = mu;
                    }
                }
            }
            let view_len = self.true_data.len() + self.surrogate_rows();
            let context = AcquisitionContext {
                f_best,
                n_obs: view_len.max(1),
            };
            // One exploit slot in flight at a time; every other slot runs
            // pure exploration, mirroring the 1 + (B - 1) batch split.
            let exploit_pending = self
                .pending
                .values()
                .any(|j| j.task == TaskKind::Exploit);
            let task = if exploit_pending {
                TaskKind::Explore
            } else {
                TaskKind::Exploit
            };
            let spec = match task {
                TaskKind::Exploit => self.settings.acquisition.clone(),
                TaskKind::Explore => AcquisitionSpec::exploration(self.settings.mode),
            };
            let z = maximize_acquisition(
                model,
                &spec,
                &self.settings.z_bounds,
                &context,
                self.settings.acq_budget,
                derive_seed(self.settings.seed, "acq", job_id),
            )?;
            (z, task)
        };

        self.next_job_id += 1;
        let x = (self.to_ambient)(&z);
        let surrogate = match self.model.as_ref() {
            Some(model) => Some(crate::surrogate::Surrogate::posterior_one(model, &z)?.0),
            None => None,
        };
        let status = if surrogate.is_some() {
            JobStatus::Hallucinated
        } else {
            JobStatus::Pending
        };
        self.pending.insert(
            job_id,
            PendingJob {
                z: z.clone(),
                task,
                worker_id,
                submit_ms: self.elapsed_ms(),
                status,
                surrogate,
            },
        );
        if surrogate.is_some() {
            // Absorb the stand-in row so the next assignment avoids it.
            self.rebuild_model()?;
        }
        Ok(Some(Assignment { job_id, z, x, task }))
    }

    fn take_pending(&mut self, job_id: u64) -> Result<PendingJob> {
        self.pending
            .remove(&job_id)
            .ok_or_else(|| Error::protocol(format!("unknown or already-completed job {job_id}")))
    }

    /// Fold a true observation in: drop the stand-in, append to the data,
    /// retrain on cadence, refit, and emit the trace record.
    pub fn on_complete(&mut self, job_id: u64, y: f64) -> Result<JobRecord> {
        let job = self.take_pending(job_id)?;
        let complete_ms = self.elapsed_ms();
        self.true_data.append(job.z.clone(), y)?;
        self.completed += 1;

        let refit_started = Instant::now();
        if retrain_due(self.settings.model.hyper_interval, self.completed) {
            self.hypers = retrain_hypers(
                &self.true_data,
                &self.settings.z_bounds,
                &self.settings.model,
                &self.hypers,
                self.completed,
                self.settings.seed,
            )?;
        }
        self.rebuild_model()?;
        self.last_refit_ms = refit_started.elapsed().as_millis() as u64;

        Ok(JobRecord {
            index: self.completed - 1,
            job_id,
            worker_id: job.worker_id,
            task: job.task,
            status: JobStatus::Complete,
            submit_ms: job.submit_ms,
            complete_ms,
            refit_ms: self.last_refit_ms,
            m_inducing: self.model.as_ref().map_or(0, FittedModel::num_inducing),
            z: job.z,
            y: Some(y),
            best_so_far: self.true_data.incumbent_value(),
        })
    }

    /// Drop a failed evaluation: remove the stand-in and recycle the slot.
    pub fn on_failure(&mut self, job_id: u64, message: &str) -> Result<JobRecord> {
        let job = self.take_pending(job_id)?;
        let complete_ms = self.elapsed_ms();
        self.failed += 1;
        if job.surrogate.is_some() {
            self.rebuild_model()?;
        }
        let record = JobRecord {
            index: self.completed + self.failed - 1,
            job_id,
            worker_id: job.worker_id,
            task: job.task,
            status: JobStatus::Failed,
            submit_ms: job.submit_ms,
            complete_ms,
            refit_ms: 0,
            m_inducing: self.model.as_ref().map_or(0, FittedModel::num_inducing),
            z: job.z,
            y: None,
            best_so_far: self.true_data.incumbent_value(),
        };
        let attempts = self.completed + self.failed;
        if attempts >= 4 && self.failed * 2 >= attempts {
            let msg = format!(
                "{} of {} evaluations failed (last: {message}); aborting",
                self.failed, attempts
            );
            return Err(Error::Objective(msg));
        }
        Ok(record)
    }
}

struct WorkerJob {
    job_id: u64,
    x: Vec<f64>,
}

struct WorkerResult {
    job_id: u64,
    outcome: EvalResult,
}

/// Run the asynchronous pool until `budget` completions or the wall clock
/// expires. Completed and failed records stream to `observer` in completion
/// order and are also returned.
pub fn run_pool(
    settings: PoolSettings,
    to_ambient: AmbientMap,
    evaluator: Evaluator,
    mut observer: impl FnMut(&JobRecord),
) -> Result<Vec<JobRecord>> {
    let core = PoolCore::new(settings, to_ambient)?;
    drive_pool(core, evaluator, |record, _| observer(record))
}

/// Drive a prepared controller (possibly restored from a checkpoint) with a
/// real worker pool. The observer additionally sees the controller, so
/// callers can snapshot state for checkpoints.
pub fn drive_pool(
    mut core: PoolCore,
    evaluator: Evaluator,
    mut observer: impl FnMut(&JobRecord, &PoolCore),
) -> Result<Vec<JobRecord>> {
    if core.settings.budget == 0 || core.completed() as usize >= core.settings.budget {
        return Ok(Vec::new());
    }
    let workers = core.settings.workers;
    let seed = core.settings.seed;
    let wallclock = core.settings.wallclock;

    let (result_tx, result_rx) = mpsc::channel::<WorkerResult>();
    let mut job_txs = Vec::with_capacity(workers);
    let mut handles = Vec::with_capacity(workers);
    for w in 0..workers {
        let (tx, rx) = mpsc::channel::<WorkerJob>();
        let results = result_tx.clone();
        let eval = evaluator.clone();
        let mut rng = rng_for(seed, "worker", w as u64);
        handles.push(std::thread::spawn(move || {
            while let Ok(job) = rx.recv() {
                let outcome = eval(&job.x, &mut rng);
                if results
                    .send(WorkerResult {
                        job_id: job.job_id,
                        outcome,
                    })
                    .is_err()
                {
                    break;
                }
            }
        }));
        job_txs.push(tx);
    }
    drop(result_tx);

    let started = Instant::now();
    let mut idle: VecDeque<usize> = (0..workers).collect();
    let mut worker_of: BTreeMap<u64, usize> = BTreeMap::new();
    let mut trace = Vec::new();
    let mut out_of_time = false;

    let result = (|| -> Result<()> {
        loop {
            if !out_of_time {
                while let Some(&w) = idle.front() {
                    match core.next_assignment(w)? {
                        Some(assignment) => {
                            idle.pop_front();
                            worker_of.insert(assignment.job_id, w);
                            job_txs[w]
                                .send(WorkerJob {
                                    job_id: assignment.job_id,
                                    x: assignment.x,
                                })
                                .map_err(|_| Error::protocol("worker channel closed early"))?;
                        }
                        None => break,
                    }
                }
            }
            if core.completed() as usize >= core.settings.budget {
                break;
            }
            if core.outstanding() == 0 {
                if out_of_time {
                    break;
                }
                if core.model.is_none() && core.init_queue.is_empty() {
                    return Err(Error::Objective(
                        "no observations collected and nothing left to assign".into(),
                    ));
                }
            }
            match result_rx.recv_timeout(Duration::from_millis(50)) {
                Ok(msg) => {
                    let worker = worker_of
                        .remove(&msg.job_id)
                        .ok_or_else(|| Error::protocol("result for unknown job"))?;
                    let record = match msg.outcome {
                        Ok(y) => core.on_complete(msg.job_id, y)?,
                        Err(e) => {
                            let rec = core.on_failure(msg.job_id, &e);
                            match rec {
                                Ok(r) => r,
                                Err(abort) => {
                                    // The failure record was consumed by the
                                    // abort; surface the abort itself.
                                    return Err(abort);
                                }
                            }
                        }
                    };
                    observer(&record, &core);
                    trace.push(record);
                    idle.push_back(worker);
                }
                Err(mpsc::RecvTimeoutError::Timeout) => {}
                Err(mpsc::RecvTimeoutError::Disconnected) => {
                    return Err(Error::protocol("all workers exited unexpectedly"));
                }
            }
            if let Some(limit) = wallclock {
                if started.elapsed() >= limit {
                    out_of_time = true;
                }
            }
        }
        Ok(())
    })();

    drop(job_txs);
    for h in handles {
        let _ = h.join();
    }
    result.map(|()| trace)
}

/// Plain sequential reference loop: fit, maximize, evaluate, append.
///
/// Shares the seed derivations and the retrain cadence with the pool but
/// none of its machinery; with one worker the pool must reproduce this
/// trace exactly (timing fields aside).
pub fn run_sequential(
    settings: PoolSettings,
    to_ambient: AmbientMap,
    evaluator: Evaluator,
    mut observer: impl FnMut(&JobRecord),
) -> Result<Vec<JobRecord>> {
    settings.validate()?;
    let started = Instant::now();
    let init = latin_hypercube_seeded(
        &settings.z_bounds,
        settings.init_design,
        settings.seed,
        "init",
        0,
    )?;
    let mut init_queue: VecDeque<Vec<f64>> = (0..init.nrows())
        .map(|i| init.row(i).iter().copied().collect())
        .collect();

    let mut data = Dataset::new(settings.z_bounds.dim(), settings.mode);
    let mut hypers = HyperState::initial(&settings.model)?;
    let mut model: Option<FittedModel> = None;
    let mut rng = rng_for(settings.seed, "worker", 0);
    let mut trace: Vec<JobRecord> = Vec::new();

    for job_id in 0..settings.budget as u64 {
        let (z, task) = match init_queue.pop_front() {
            Some(z) => (z, TaskKind::Explore),
            None => {
                let m = model.as_ref().expect("model after first completion");
                let f_best = data.incumbent_value().expect("incumbent");
                let context = AcquisitionContext {
                    f_best,
                    n_obs: data.len(),
                };
                let z = maximize_acquisition(
                    m,
                    &settings.acquisition,
                    &settings.z_bounds,
                    &context,
                    settings.acq_budget,
                    derive_seed(settings.seed, "acq", job_id),
                )?;
                (z, TaskKind::Exploit)
            }
        };
        let submit_ms = started.elapsed().as_millis() as u64;
        let x = (to_ambient)(&z);
        let y = evaluator(&x, &mut rng)
            .map_err(|e| Error::Objective(format!("evaluation failed: {e}")))?;
        data.append(z.clone(), y)?;
        let completed = job_id + 1;

        let refit_started = Instant::now();
        if retrain_due(settings.model.hyper_interval, completed) {
            hypers = retrain_hypers(
                &data,
                &settings.z_bounds,
                &settings.model,
                &hypers,
                completed,
                settings.seed,
            )?;
        }
        model = Some(fit_surrogate(
            &data,
            &settings.z_bounds,
            &settings.model,
            &hypers,
            completed,
            settings.seed,
        )?);

        let record = JobRecord {
            index: job_id,
            job_id,
            worker_id: 0,
            task,
            status: JobStatus::Complete,
            submit_ms,
            complete_ms: started.elapsed().as_millis() as u64,
            refit_ms: refit_started.elapsed().as_millis() as u64,
            m_inducing: model.as_ref().map_or(0, FittedModel::num_inducing),
            z,
            y: Some(y),
            best_so_far: data.incumbent_value(),
        };
        observer(&record);
        trace.push(record);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::AcquisitionKind;

    fn sphere_evaluator() -> Evaluator {
        Arc::new(|x: &[f64], _rng: &mut rand_chacha::ChaCha8Rng| {
            Ok(x.iter().map(|v| v * v).sum::<f64>())
        })
    }

    fn identity_map() -> AmbientMap {
        Arc::new(|z: &[f64]| z.to_vec())
    }

    fn settings(workers: usize, budget: usize, seed: u64) -> PoolSettings {
        PoolSettings {
            workers,
            budget,
            wallclock: None,
            seed,
            z_bounds: BoxBounds::cube(2, -1.0, 1.0).unwrap(),
            mode: OptMode::Minimize,
            acquisition: AcquisitionSpec::new(
                AcquisitionKind::ExpectedImprovement,
                0.1,
                OptMode::Minimize,
            )
            .unwrap(),
            acq_budget: 6,
            init_design: 3,
            model: ModelSettings {
                hyper_interval: 4,
                train_restarts: 2,
                ..Default::default()
            },
        }
    }

    #[test]
    fn budget_zero_gives_empty_trace() {
        let trace = run_pool(
            settings(2, 0, 1),
            identity_map(),
            sphere_evaluator(),
            |_| {},
        )
        .unwrap();
        assert!(trace.is_empty());
    }

    #[test]
    fn exploit_explore_pattern_with_three_slots() {
        // Drive the state machine directly: one completed observation, then
        // three idle slots must receive [Exploit, Explore, Explore].
        let mut s = settings(3, 10, 5);
        s.init_design = 1;
        let mut core = PoolCore::new(s, identity_map()).unwrap();
        let first = core.next_assignment(0).unwrap().unwrap();
        assert_eq!(first.task, TaskKind::Explore, "initial design is space-filling");
        core.on_complete(first.job_id, 0.5).unwrap();

        let tasks: Vec<TaskKind> = (0..3)
            .map(|w| core.next_assignment(w).unwrap().unwrap().task)
            .collect();
        assert_eq!(
            tasks,
            vec![TaskKind::Exploit, TaskKind::Explore, TaskKind::Explore]
        );
        assert_eq!(core.surrogate_rows(), 3);
    }

    #[test]
    fn hallucination_row_count_tracks_pending_jobs() {
        let mut s = settings(2, 10, 6);
        s.init_design = 1;
        let mut core = PoolCore::new(s, identity_map()).unwrap();
        let a = core.next_assignment(0).unwrap().unwrap();
        assert_eq!(core.surrogate_rows(), 0, "no model during bootstrap");
        core.on_complete(a.job_id, 1.0).unwrap();

        let b = core.next_assignment(0).unwrap().unwrap();
        let c = core.next_assignment(1).unwrap().unwrap();
        assert_eq!(core.surrogate_rows(), 2);
        core.on_complete(b.job_id, 0.7).unwrap();
        assert_eq!(core.surrogate_rows(), 1, "completed surrogate removed");
        assert_eq!(core.data().len(), 2);
        core.on_complete(c.job_id, 0.9).unwrap();
        assert_eq!(core.surrogate_rows(), 0);
    }

    #[test]
    fn double_completion_is_a_protocol_error() {
        let mut s = settings(1, 5, 7);
        s.init_design = 1;
        let mut core = PoolCore::new(s, identity_map()).unwrap();
        let a = core.next_assignment(0).unwrap().unwrap();
        core.on_complete(a.job_id, 1.0).unwrap();
        let err = core.on_complete(a.job_id, 1.0).unwrap_err();
        assert!(matches!(err, Error::Protocol(_)));
        assert!(matches!(
            core.on_complete(999, 0.0).unwrap_err(),
            Error::Protocol(_)
        ));
    }

    #[test]
    fn worse_completion_leaves_incumbent() {
        let mut s = settings(1, 5, 8);
        s.init_design = 2;
        let mut core = PoolCore::new(s, identity_map()).unwrap();
        let a = core.next_assignment(0).unwrap().unwrap();
        let r1 = core.on_complete(a.job_id, 0.3).unwrap();
        assert_eq!(r1.best_so_far, Some(0.3));
        let b = core.next_assignment(0).unwrap().unwrap();
        let r2 = core.on_complete(b.job_id, 0.9).unwrap();
        assert_eq!(r2.best_so_far, Some(0.3));
    }

    #[test]
    fn consecutive_explores_avoid_revisits() {
        let mut s = settings(3, 10, 9);
        s.init_design = 2;
        s.z_bounds = BoxBounds::cube(1, -1.0, 1.0).unwrap();
        let mut core = PoolCore::new(s, identity_map()).unwrap();
        let a = core.next_assignment(0).unwrap().unwrap();
        core.on_complete(a.job_id, 0.2).unwrap();
        let b = core.next_assignment(0).unwrap().unwrap();
        core.on_complete(b.job_id, 0.4).unwrap();
        // Two explore slots in the same refresh cycle.
        let _exploit = core.next_assignment(0).unwrap().unwrap();
        let e1 = core.next_assignment(1).unwrap().unwrap();
        let e2 = core.next_assignment(2).unwrap().unwrap();
        assert_eq!(e1.task, TaskKind::Explore);
        assert_eq!(e2.task, TaskKind::Explore);
        let gap = (e1.z[0] - e2.z[0]).abs();
        assert!(gap >= 1e-3 * 2.0, "explore points {:?} vs {:?}", e1.z, e2.z);
    }

    #[test]
    fn single_worker_pool_matches_sequential_reference() {
        let s = settings(1, 8, 11);
        let pool = run_pool(s.clone(), identity_map(), sphere_evaluator(), |_| {}).unwrap();
        let seq = run_sequential(s, identity_map(), sphere_evaluator(), |_| {}).unwrap();
        assert_eq!(pool.len(), seq.len());
        for (a, b) in pool.iter().zip(&seq) {
            let (a, b) = (a.canonicalized(), b.canonicalized());
            assert_eq!(
                serde_json::to_string(&a).unwrap(),
                serde_json::to_string(&b).unwrap()
            );
        }
    }

    #[test]
    fn repeated_single_worker_runs_are_bit_identical() {
        let s = settings(1, 6, 12);
        let a = run_pool(s.clone(), identity_map(), sphere_evaluator(), |_| {}).unwrap();
        let b = run_pool(s, identity_map(), sphere_evaluator(), |_| {}).unwrap();
        let canon = |t: &[JobRecord]| {
            t.iter()
                .map(|r| serde_json::to_string(&r.canonicalized()).unwrap())
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert_eq!(canon(&a), canon(&b));
    }

    #[test]
    fn every_job_lands_in_trace_exactly_once() {
        let s = settings(4, 20, 13);
        let trace = run_pool(s, identity_map(), sphere_evaluator(), |_| {}).unwrap();
        assert_eq!(trace.len(), 20);
        let mut ids: Vec<u64> = trace.iter().map(|r| r.job_id).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 20, "duplicate job ids in trace");
        for r in &trace {
            assert_eq!(r.status, JobStatus::Complete);
        }
        // Completion order is the trace order.
        for w in trace.windows(2) {
            assert!(w[0].complete_ms <= w[1].complete_ms);
            assert!(w[0].index + 1 == w[1].index);
        }
    }

    #[test]
    fn incumbent_is_monotone_over_completions() {
        let s = settings(3, 15, 14);
        let trace = run_pool(s, identity_map(), sphere_evaluator(), |_| {}).unwrap();
        let mut best = f64::INFINITY;
        for r in &trace {
            let b = r.best_so_far.unwrap();
            assert!(b <= best + 1e-15);
            best = b;
        }
    }

    #[test]
    fn failures_recycle_slots_and_too_many_abort() {
        // Every fifth evaluation fails: run survives and still reaches budget.
        let calls = Arc::new(std::sync::atomic::AtomicUsize::new(0));
        let flaky: Evaluator = {
            let calls = calls.clone();
            Arc::new(move |x: &[f64], _| {
                let k = calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if k % 5 == 4 {
                    Err("synthetic failure".into())
                } else {
                    Ok(x.iter().map(|v| v * v).sum())
                }
            })
        };
        let s = settings(2, 8, 15);
        let trace = run_pool(s, identity_map(), flaky, |_| {}).unwrap();
        let complete = trace.iter().filter(|r| r.status == JobStatus::Complete).count();
        assert_eq!(complete, 8);

        // An always-failing objective aborts with a diagnostic.
        let broken: Evaluator = Arc::new(|_: &[f64], _| Err("boom".into()));
        let err = run_pool(settings(2, 8, 16), identity_map(), broken, |_| {}).unwrap_err();
        assert!(matches!(err, Error::Objective(_)), "got {err}");
    }

    #[test]
    fn parallel_workers_cut_wall_time_on_delayed_objectives() {
        use rand::RngExt;
        let delayed: Evaluator = Arc::new(|x: &[f64], rng: &mut rand_chacha::ChaCha8Rng| {
            let ms: f64 = rng.random_range(1.0..30.0);
            std::thread::sleep(Duration::from_secs_f64(ms / 1e3));
            Ok(x.iter().map(|v| v * v).sum())
        });
        let wall = |workers: usize, seed: u64| {
            let mut s = settings(workers, 40, seed);
            s.model.hyper_interval = 10;
            let start = Instant::now();
            run_pool(s, identity_map(), delayed.clone(), |_| {}).unwrap();
            start.elapsed().as_secs_f64()
        };
        for trial in 0..3u64 {
            let w1 = wall(1, 100 + trial);
            let w4 = wall(4, 100 + trial);
            assert!(
                w4 < 0.5 * w1,
                "trial {trial}: 4 workers took {w4:.2}s vs {w1:.2}s"
            );
        }
    }

    #[test]
    fn wallclock_limit_truncates_the_run() {
        let slow: Evaluator = Arc::new(|x: &[f64], _| {
            std::thread::sleep(Duration::from_millis(30));
            Ok(x.iter().map(|v| v * v).sum())
        });
        let mut s = settings(2, 1000, 17);
        s.wallclock = Some(Duration::from_millis(250));
        let start = Instant::now();
        let trace = run_pool(s, identity_map(), slow, |_| {}).unwrap();
        assert!(trace.len() < 1000);
        assert!(!trace.is_empty());
        assert!(start.elapsed() < Duration::from_secs(10));
    }
}
