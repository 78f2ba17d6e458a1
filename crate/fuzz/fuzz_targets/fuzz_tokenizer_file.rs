#![no_main]
use libfuzzer_sys::fuzz_target;

// The tokenizer file parser must only ever return Ok or Err on arbitrary
// bytes. A successful parse must serialize back and reparse to the same
// tokenizer.
fuzz_target!(|data: &[u8]| {
    if let Ok(tok) = tokenizer_bpe::read_tokenizer(&mut &data[..]) {
        let bytes = tokenizer_bpe::tokenizer_bytes(&tok);
        let again = tokenizer_bpe::read_tokenizer(&mut bytes.as_slice())
            .expect("canonical serialization must reparse");
        assert_eq!(tok, again);
    }
});
