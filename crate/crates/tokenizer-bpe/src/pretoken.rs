//! Whitespace pre-tokenization. Merges never cross chunk boundaries.

fn is_ws(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c)
}

/// Splits a byte stream into pre-token chunks:
///
/// * a word chunk is a maximal non-whitespace run, taking one immediately
///   preceding space (0x20) with it as a prefix marker;
/// * remaining whitespace runs form their own chunks.
///
/// Concatenating the chunks restores the input exactly.
pub(crate) fn chunks(text: &[u8]) -> impl Iterator<Item = &[u8]> {
    ChunkIter { text, pos: 0 }
}

struct ChunkIter<'a> {
    text: &'a [u8],
    pos: usize,
}

impl<'a> Iterator for ChunkIter<'a> {
    type Item = &'a [u8];

    fn next(&mut self) -> Option<&'a [u8]> {
        let text = self.text;
        if self.pos >= text.len() {
            return None;
        }
        let start = self.pos;
        if is_ws(text[start]) {
            // Whitespace run; stop one byte early if a single space directly
            // precedes a word, so the space travels with the word.
            let mut end = start;
            while end < text.len() && is_ws(text[end]) {
                end += 1;
            }
            if end < text.len() && text[end - 1] == b' ' && end - start > 1 {
                end -= 1;
            } else if end < text.len() && text[end - 1] == b' ' && end - start == 1 {
                // The run is exactly one space before a word: emit the word
                // chunk including the space.
                let mut wend = end;
                while wend < text.len() && !is_ws(text[wend]) {
                    wend += 1;
                }
                self.pos = wend;
                return Some(&text[start..wend]);
            }
            self.pos = end;
            return Some(&text[start..end]);
        }
        // Word run without a leading space.
        let mut end = start;
        while end < text.len() && !is_ws(text[end]) {
            end += 1;
        }
        self.pos = end;
        Some(&text[start..end])
    }
}
