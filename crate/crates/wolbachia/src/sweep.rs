//! Parallel sweeps over independent grid cells.
//!
//! All sweeps run on one shared pool whose size is capped by the
//! `WOLBACHIA_THREADS` environment variable. Results come back in grid order,
//! so output never depends on scheduling.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use wolbachia_core::{ModelParameters, PopulationState, Provenance, SeparatrixCurve};

use crate::error::{AppError, AppResult};

pub const THREADS_ENV: &str = "WOLBACHIA_THREADS";

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

pub fn pool() -> &'static ThreadPool {
    static POOL: OnceLock<ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut b = ThreadPoolBuilder::new().thread_name(|i| format!("wolbachia-sweep-{i}"));
        if let Some(n) = thread_cap() {
            b = b.num_threads(n);
        }
        b.build().expect("sweep thread pool")
    })
}

/// Cooperative cancellation flag, checked between grid cells.
#[derive(Debug, Clone, Default)]
pub struct Cancel(Arc<AtomicBool>);

impl Cancel {
    pub fn cancel(&self) {
        self.0.store(true, Ordering::Relaxed);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::Relaxed)
    }
}

/// Applies `f` to every item in parallel, keeping order.
pub fn map<T, R, F>(items: &[T], cancel: &Cancel, f: F) -> AppResult<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    pool().install(|| {
        items
            .par_iter()
            .map(|x| {
                if cancel.is_cancelled() {
                    Err(AppError::Numerical("cancelled".into()))
                } else {
                    Ok(f(x))
                }
            })
            .collect()
    })
}

/// Minimal viable infected population at each `n0`.
pub fn minimal_viable_w(p: &ModelParameters, n0s: &[f64], tol: f64, cancel: &Cancel) -> AppResult<Vec<f64>> {
    map(n0s, cancel, |&n0| wolbachia_core::minimal_viable_w(p, n0, tol))?
        .into_iter()
        .map(|r| r.map_err(AppError::from))
        .collect()
}

/// Bisection separatrix with the grid points solved in parallel.
pub fn separatrix_bisection(
    p: &ModelParameters,
    grid: &[f64],
    tol: f64,
    cancel: &Cancel,
) -> AppResult<SeparatrixCurve> {
    let mut ns = grid.to_vec();
    ns.sort_by(f64::total_cmp);
    ns.dedup();
    let ws = minimal_viable_w(p, &ns, tol, cancel)?;
    let points = ns.into_iter().zip(ws).map(|(n, w)| PopulationState::new(n, w)).collect();
    Ok(SeparatrixCurve::new(points, Provenance::Bisection)?)
}
