use std::sync::OnceLock;

/// Builds the global worker pool once, honoring the IPA_THREADS cap. Safe
/// to call from every entry point; later calls are no-ops.
pub fn init_thread_pool() {
    static INIT: OnceLock<()> = OnceLock::new();
    INIT.get_or_init(|| {
        if let Ok(raw) = std::env::var("IPA_THREADS") {
            if let Ok(n) = raw.trim().parse::<usize>() {
                if n >= 1 {
                    // Ignore failure: some other code may have built the
                    // pool first, which is fine.
                    let _ = rayon::ThreadPoolBuilder::new()
                        .num_threads(n)
                        .build_global();
                }
            }
        }
    });
}
