#![no_main]
use libfuzzer_sys::fuzz_target;

// Checkpoint headers and tensor records are length-prefixed; hostile
// lengths must fail cleanly without large allocations or panics.
fuzz_target!(|data: &[u8]| {
    let _ = train_harness::read_checkpoint_raw(data);
});
