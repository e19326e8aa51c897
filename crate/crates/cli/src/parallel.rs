//! Minimal fan-out over worker threads for per-forecast work.

/// Maps `f` over `items` on up to `workers` threads, preserving input
/// order in the output.
pub fn par_map<K, T>(workers: usize, items: Vec<K>, f: impl Fn(&K) -> T + Sync) -> Vec<(K, T)>
where
    K: Send,
    T: Send,
{
    if workers <= 1 || items.len() <= 1 {
        return items.into_iter().map(|k| (f(&k), k)).map(|(t, k)| (k, t)).collect();
    }
    let chunk = items.len().div_ceil(workers);
    let chunks: Vec<Vec<K>> = {
        let mut out = Vec::new();
        let mut it = items.into_iter();
        loop {
            let piece: Vec<K> = it.by_ref().take(chunk).collect();
            if piece.is_empty() {
                break;
            }
            out.push(piece);
        }
        out
    };
    let f = &f;
    std::thread::scope(|scope| {
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|piece| {
                scope.spawn(move || {
                    piece
                        .into_iter()
                        .map(|k| {
                            let t = f(&k);
                            (k, t)
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}
