//! Order-preserving parallel map bounded by `--jobs`.

use std::thread;

/// Applies `f` to every item on up to `jobs` threads. Results come back
/// in input order, so output is independent of the thread count as long
/// as `f` is.
pub fn map<T: Sync, R: Send, E: Send>(
    jobs: usize,
    items: &[T],
    f: impl Fn(usize, &T) -> Result<R, E> + Sync,
) -> Result<Vec<R>, E> {
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs == 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    let f = &f;
    let parts: Vec<Result<Vec<R>, E>> = thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .enumerate()
            .map(|(c, part)| s.spawn(move || part.iter().enumerate().map(|(i, t)| f(c * chunk + i, t)).collect()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker thread panicked")).collect()
    });
    let mut out = Vec::with_capacity(items.len());
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}
