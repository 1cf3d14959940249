use nrx_core::eval::{Counts, Executor};

/// Environment variable capping evaluation worker threads.
pub const WORKERS_ENV: &str = "NRX_WORKERS";

/// Runs each round of jobs on scoped threads, one job per worker.
pub struct ThreadExecutor {
    workers: usize,
}

impl ThreadExecutor {
    pub fn new(workers: usize) -> Self {
        Self { workers: workers.max(1) }
    }

    /// `NRX_WORKERS` if set and positive, otherwise the available parallelism.
    pub fn from_env() -> Self {
        let available = std::thread::available_parallelism().map_or(1, |n| n.get());
        let cap = std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0);
        Self::new(cap.unwrap_or(available))
    }

    pub fn workers(&self) -> usize {
        self.workers
    }
}

impl Executor for ThreadExecutor {
    fn width(&self) -> usize {
        self.workers
    }

    fn run(&self, jobs: &[u64], f: &(dyn Fn(u64) -> nrx_core::Result<Counts> + Sync)) -> Vec<nrx_core::Result<Counts>> {
        if self.workers == 1 || jobs.len() <= 1 {
            return jobs.iter().map(|&j| f(j)).collect();
        }
        std::thread::scope(|s| {
            let handles: Vec<_> = jobs.iter().map(|&j| s.spawn(move || f(j))).collect();
            handles.into_iter().map(|h| h.join().expect("evaluation worker panicked")).collect()
        })
    }
}
