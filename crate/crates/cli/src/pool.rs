//! Fixed-size worker pool. Jobs are handed out by index and results come
//! back over a channel; the caller reassembles them in job order.

use std::sync::atomic::{ AtomicUsize, Ordering };
use std::sync::mpsc;
use std::thread;

pub const WORKERS_ENV: &str = "QPROBE_WORKERS";

/// `QPROBE_WORKERS` if set and positive, else the available parallelism.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

pub fn run<J, R, F>(jobs: &[J], workers: usize, work: F) -> Vec<R>
where
    J: Sync,
    R: Send,
    F: Fn(&J) -> R + Sync,
{
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    thread::scope(|scope| {
        for _ in 0..workers.clamp(1, jobs.len().max(1)) {
            let tx = tx.clone();
            let (next, work) = (&next, &work);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                if tx.send((i, work(job))).is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);
    let mut slots: Vec<Option<R>> = (0..jobs.len()).map(|_| None).collect();
    for (i, r) in rx {
        slots[i] = Some(r);
    }
    slots.into_iter().map(|r| r.expect("every job reports back")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_keep_job_order() {
        let jobs: Vec<u64> = (0..50).collect();
        for workers in [1, 3, 16] {
            assert_eq!(run(&jobs, workers, |j| j * j), jobs.iter().map(|j| j * j).collect::<Vec<_>>());
        }
        assert!(run(&Vec::<u64>::new(), 4, |j| *j).is_empty());
    }
}
