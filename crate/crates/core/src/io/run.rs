use std::path::Path;
use std::sync::mpsc;
use std::thread;

use super::kb::{KnowledgeBase, RunSummary};
use super::scenario::Scenario;
use crate::sph::{step, SphModel, StepDiagnostics};
use crate::{Error, ParticleTable, Policy, Result, Snapshot, Vec3};

enum Record {
    Snapshot(Snapshot, StepDiagnostics),
    Summary(RunSummary),
    Failure(u64, String),
}

/// Builds the scenario's particles (relative paths resolve against the
/// working directory) and runs it into a new knowledge base at `out_dir`.
pub fn run_simulation(scn: &Scenario, out_dir: impl AsRef<Path>) -> Result<KnowledgeBase> {
    let table = scn.build_table()?;
    run_table(scn, table, out_dir, Policy::default())
}

/// Runs `scn` from an explicit initial table.
///
/// Snapshot files are written on a separate thread from copies of the
/// state, so disk I/O overlaps the next steps. A failure while stepping is
/// recorded in the manifest before the error is returned.
pub fn run_table(scn: &Scenario, mut table: ParticleTable, out_dir: impl AsRef<Path>, policy: Policy) -> Result<KnowledgeBase> {
    scn.validate()?;
    let mut model = SphModel::new(scn.pipeline()?.with_policy(policy));
    let mut kb = KnowledgeBase::create(out_dir, scn)?;

    let (tx, rx) = mpsc::channel::<Record>();
    let writer = thread::spawn(move || -> Result<KnowledgeBase> {
        for rec in rx {
            match rec {
                Record::Snapshot(s, d) => {
                    kb.write_snapshot_with(&s, d)?;
                }
                Record::Summary(s) => kb.set_summary(s)?,
                Record::Failure(step, msg) => kb.record_failure(step, msg)?,
            }
        }
        Ok(kb)
    });

    let outcome = drive(scn, &mut table, &mut model, &tx);
    drop(tx);
    let kb = writer.join().expect("snapshot writer panicked")?;
    outcome.map(|()| kb)
}

fn drive(scn: &Scenario, table: &mut ParticleTable, model: &mut SphModel, tx: &mpsc::Sender<Record>) -> Result<()> {
    // A closed channel means the writer hit an I/O error; stop stepping and
    // let the caller surface it.
    let send = |rec: Record| tx.send(rec).is_ok();
    let fail = |step: u64, err: Error| -> Error {
        let err = match err {
            e @ Error::Numeric { .. } => e,
            e => Error::Numeric {
                step,
                reason: e.to_string(),
            },
        };
        send(Record::Failure(step, err.to_string()));
        err
    };

    if let Err(e) = model.pipeline.density_pass(table) {
        return Err(fail(0, e));
    }
    let initial = StepDiagnostics::measure(table, 0, 0.0, None);
    let scale: f64 = table
        .masses()
        .iter()
        .zip(table.velocities())
        .map(|(m, v)| m * v.norm())
        .sum();
    if !send(Record::Snapshot(Snapshot::new(0, 0.0, table.clone()), initial)) {
        return Ok(());
    }

    let run = &scn.run;
    let mut last = initial;
    let mut result = Ok(());
    for s in 0..run.steps {
        match step(table, model, run.dt, s, last.time) {
            Ok(d) => {
                last = d;
                if d.step % run.snapshot_interval == 0
                    && !send(Record::Snapshot(Snapshot::new(d.step, d.time, table.clone()), d))
                {
                    return Ok(());
                }
            }
            Err(e) => {
                result = Err(fail(s, e));
                break;
            }
        }
    }

    let p0 = Vec3::from(initial.momentum);
    let p1 = Vec3::from(last.momentum);
    let drift = (p1 - p0).norm();
    send(Record::Summary(RunSummary {
        steps_completed: last.step,
        final_time: last.time,
        initial_momentum: initial.momentum,
        final_momentum: last.momentum,
        momentum_drift: drift,
        momentum_scale: scale,
        relative_momentum_drift: (scale > 0.0).then(|| drift / scale),
        min_density: last.min_density,
        max_density: last.max_density,
    }));
    result
}
