//! Small scoped-thread helpers.
//!
//! Work is partitioned by fixed chunk boundaries (never by thread count) and
//! every chunk is computed independently, so results are bitwise identical
//! for any worker count. Reductions that would depend on summation order are
//! kept serial at the call sites.

#[cfg(not(target_arch = "wasm32"))]
use std::sync::atomic::{AtomicUsize, Ordering};
#[cfg(not(target_arch = "wasm32"))]
use std::sync::Mutex;

/// Resolves a configured worker count; 0 means machine parallelism.
pub(crate) fn resolve(threads: usize) -> usize {
    if threads > 0 {
        return threads;
    }
    #[cfg(target_arch = "wasm32")]
    {
        1
    }
    #[cfg(not(target_arch = "wasm32"))]
    {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    }
}

/// Runs `f(chunk_index, chunk)` over consecutive `chunk_len` chunks of `data`.
pub(crate) fn for_each_chunk_mut<T, F>(data: &mut [T], chunk_len: usize, threads: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    assert!(chunk_len > 0);
    let threads = resolve(threads);
    if cfg!(target_arch = "wasm32") || threads <= 1 || data.len() <= chunk_len {
        for (i, c) in data.chunks_mut(chunk_len).enumerate() {
            f(i, c);
        }
        return;
    }
    #[cfg(not(target_arch = "wasm32"))]
    {
        let mut buckets: Vec<Vec<(usize, &mut [T])>> = (0..threads).map(|_| Vec::new()).collect();
        for (j, item) in data.chunks_mut(chunk_len).enumerate() {
            buckets[j % threads].push((j, item));
        }
        let f = &f;
        std::thread::scope(|s| {
            for bucket in buckets {
                s.spawn(move || {
                    for (i, c) in bucket {
                        f(i, c);
                    }
                });
            }
        });
    }
}

/// Maps `f` over `0..n` on a shared work queue and collects results in order.
pub(crate) fn par_map<T, F>(n: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = resolve(threads).min(n.max(1));
    if cfg!(target_arch = "wasm32") || threads <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    #[cfg(target_arch = "wasm32")]
    unreachable!();
    #[cfg(not(target_arch = "wasm32"))]
    {
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
        std::thread::scope(|s| {
            for _ in 0..threads {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= n {
                        break;
                    }
                    let v = f(i);
                    *slots[i].lock().unwrap() = Some(v);
                });
            }
        });
        slots
            .into_iter()
            .map(|m| m.into_inner().unwrap().expect("worker filled every slot"))
            .collect()
    }
}
