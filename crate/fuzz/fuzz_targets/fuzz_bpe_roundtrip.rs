#![no_main]
use libfuzzer_sys::fuzz_target;
use std::sync::OnceLock;
use tokenizer_bpe::{bpe_train, Tokenizer};

fn tokenizers() -> &'static [Tokenizer; 2] {
    static TOKS: OnceLock<[Tokenizer; 2]> = OnceLock::new();
    TOKS.get_or_init(|| {
        let trained = bpe_train(
            b"the quick brown fox jumps over the lazy dog again and again, \
              now with   extra\twhitespace\nand repeated repeated words",
            320,
        )
        .expect("fixed corpus trains");
        [Tokenizer::byte_level(), trained]
    })
}

// decode(encode(x)) must reproduce any byte string exactly, for both the
// byte-level and a trained tokenizer.
fuzz_target!(|data: &[u8]| {
    for tok in tokenizers() {
        let ids = tok.encode(data);
        let back = tok.decode(&ids).expect("encoded ids decode");
        assert_eq!(back, data);
    }
});
