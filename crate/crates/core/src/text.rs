//! Character-based truncation helpers shared by every prompt builder.
//!
//! Lengths are counted in Unicode scalar values, not bytes.

/// Marker inserted between head and tail by [`truncate_middle`].
pub const TRUNCATION_MARKER: &str = "\n...(truncated)\n";

/// Number of characters [`truncate_middle`] may add beyond the cap.
pub const TRUNCATION_OVERHEAD: usize = 16;

/// Keeps the first `max_len / 2` and last `max_len - max_len / 2` characters
/// of an over-long message, joined by [`TRUNCATION_MARKER`].
///
/// Messages of at most `max_len` characters are returned unchanged.
pub fn truncate_middle(message: &str, max_len: usize) -> String {
    let len = message.chars().count();
    if len <= max_len {
        return message.to_string();
    }
    let head = max_len / 2;
    let tail = max_len - head;
    let mut out = String::with_capacity(max_len + TRUNCATION_OVERHEAD);
    out.extend(message.chars().take(head));
    out.push_str(TRUNCATION_MARKER);
    out.extend(message.chars().skip(len - tail));
    out
}

/// Keeps at most `max_len` leading characters.
pub fn truncate_chars(text: &str, max_len: usize) -> String {
    match text.char_indices().nth(max_len) {
        Some((idx, _)) => text[..idx].to_string(),
        None => text.to_string(),
    }
}

/// Keeps at most `max_words` whitespace-separated words, re-joined by single spaces.
pub fn truncate_words(text: &str, max_words: usize) -> String {
    text.split_whitespace().take(max_words).collect::<Vec<_>>().join(" ")
}

pub fn char_len(text: &str) -> usize {
    text.chars().count()
}
