//! Worker pool for batch evaluation.
//!
//! Jobs go into a shared queue; `k` worker threads pull from it and write into
//! the result slot of the job's submission index. The returned vector is in
//! submission order whatever the completion order was.

use std::sync::Mutex;
use std::thread;

use crossbeam_channel::unbounded;

use crate::scenario::TestInput;

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationJob {
    pub index: usize,
    pub input: TestInput,
    pub seed: u64,
}

/// Dense jobs `0..inputs.len()` with seeds `seed + index`.
pub fn jobs_for(inputs: &[TestInput], seed: u64) -> Vec<EvaluationJob> {
    inputs
        .iter()
        .enumerate()
        .map(|(index, input)| EvaluationJob {
            index,
            input: input.clone(),
            seed: seed.wrapping_add(index as u64),
        })
        .collect()
}

/// Runs `eval` on every job using `workers` threads and returns the results in
/// submission order. A worker count of 0 is treated as 1.
pub fn evaluate_pool<J, R, F>(jobs: &[J], workers: usize, eval: F) -> Vec<R>
where
    J: Sync,
    R: Send,
    F: Fn(&J) -> R + Sync,
{
    if jobs.is_empty() {
        return Vec::new();
    }
    let workers = workers.clamp(1, jobs.len());
    if workers == 1 {
        return jobs.iter().map(&eval).collect();
    }

    let (tx, rx) = unbounded::<usize>();
    for i in 0..jobs.len() {
        tx.send(i).expect("queue receiver is alive");
    }
    drop(tx);

    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    thread::scope(|scope| {
        for _ in 0..workers {
            let rx = rx.clone();
            let slots = &slots;
            let eval = &eval;
            scope.spawn(move || {
                while let Ok(i) = rx.recv() {
                    let result = eval(&jobs[i]);
                    slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(result);
                }
            });
        }
    });

    slots
        .into_inner()
        .unwrap_or_else(|e| e.into_inner())
        .into_iter()
        .map(|r| r.expect("every queued job produces a result"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    #[test]
    fn empty_job_list() {
        let out: Vec<u32> = evaluate_pool(&[] as &[u32], 4, |j| *j);
        assert!(out.is_empty());
    }

    #[test]
    fn order_is_independent_of_worker_count() {
        let jobs: Vec<u64> = (0..64).collect();
        let eval = |j: &u64| {
            // uneven work so completion order differs from submission order
            thread::sleep(Duration::from_micros((64 - j) * 20));
            j * j + 1
        };
        let one = evaluate_pool(&jobs, 1, eval);
        let eight = evaluate_pool(&jobs, 8, eval);
        assert_eq!(one, eight);
        assert_eq!(one[10], 101);
    }

    #[test]
    fn failures_stay_in_their_slot() {
        let jobs: Vec<i32> = (0..16).collect();
        let out = evaluate_pool(&jobs, 4, |j| if *j == 5 { Err("boom") } else { Ok(*j) });
        for (i, r) in out.iter().enumerate() {
            if i == 5 {
                assert_eq!(*r, Err("boom"));
            } else {
                assert_eq!(*r, Ok(i as i32));
            }
        }
    }

    #[test]
    fn jobs_have_dense_indices_and_offset_seeds() {
        let inputs = vec![TestInput::new(vec![1.0]), TestInput::new(vec![2.0])];
        let jobs = jobs_for(&inputs, 10);
        assert_eq!(jobs[1].index, 1);
        assert_eq!(jobs[1].seed, 11);
    }
}
