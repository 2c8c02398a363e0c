//! Toy text codec between prompts/references and token ids.
//!
//! There is no trained tokenizer here, so a reversible convention keeps
//! candidates and references in a shared vocabulary: the word `t<n>` maps
//! to token id `n mod vocab_size`, any other word hashes (FNV-1a) into the
//! vocabulary, and generated ids render back as `t<n>` words. Synthetic
//! corpora are emitted directly in `t<n>` form, so for them the mapping
//! round-trips exactly.

/// Token range used by the synthetic corpus generator.
pub const SYNTH_VOCAB: u32 = 256;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x1000_0000_01b3);
    }
    hash
}

fn word_to_id(word: &str, vocab_size: usize) -> u32 {
    if let Some(digits) = word.strip_prefix('t') {
        if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
            if let Ok(n) = digits.parse::<u64>() {
                return (n % vocab_size as u64) as u32;
            }
        }
    }
    (fnv1a(word.as_bytes()) % vocab_size as u64) as u32
}

/// Whitespace-split words to token ids, each reduced into `[0, vocab_size)`.
pub fn encode_text(text: &str, vocab_size: usize) -> Vec<u32> {
    text.split_whitespace()
        .map(|word| word_to_id(word, vocab_size))
        .collect()
}

/// Token ids to `t<n>` words joined by single spaces.
pub fn decode_tokens(ids: &[u32]) -> String {
    let words: Vec<String> = ids.iter().map(|id| format!("t{id}")).collect();
    words.join(" ")
}
