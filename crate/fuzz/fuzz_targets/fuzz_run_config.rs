#![no_main]
use ipa_cli::config::RunConfig;
use libfuzzer_sys::fuzz_target;

// Run configurations come from user-authored JSON; parsing plus validation
// must never panic, and an accepted config must survive a serialize ->
// reparse -> validate round trip.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = serde_json::from_str::<RunConfig>(text) else { return };
    if cfg.validate().is_ok() {
        let echoed = serde_json::to_string(&cfg).expect("config serializes");
        let again: RunConfig = serde_json::from_str(&echoed).expect("echo reparses");
        assert!(again.validate().is_ok());
        assert_eq!(cfg, again);
    }
});
