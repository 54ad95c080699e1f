//! Text normalization and tokenization shared by retrieval and summarization.
//!
//! Matching is done on tokens, never on substrings. Text is first NFKC
//! normalized and lowercased, then split on anything that is not alphanumeric.
//! Inside an alphanumeric run a new token starts whenever the script class
//! changes, so `日銀の金融政策` segments as `日銀` / `の` / `金融政策` and
//! `yen安` as `yen` / `安`. This is a deliberately simple CJK rule; swap
//! [`tokenize`] if a real morphological analyzer is available.

use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Script {
    Han,
    Hiragana,
    Katakana,
    Hangul,
    Other,
}

fn script_of(ch: char) -> Script {
    match ch as u32 {
        0x3005 | 0x3007 | 0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF
        | 0x20000..=0x2FFFF => Script::Han,
        0x3041..=0x309F => Script::Hiragana,
        0x30A0..=0x30FF | 0x31F0..=0x31FF => Script::Katakana,
        0x1100..=0x11FF | 0xAC00..=0xD7AF => Script::Hangul,
        _ => Script::Other,
    }
}

fn is_word_char(ch: char) -> bool {
    // The prolonged sound mark is not alphanumeric but belongs to katakana words.
    ch.is_alphanumeric() || ch == 'ー'
}

/// NFKC-normalize and lowercase.
pub fn normalize(text: &str) -> String {
    text.nfkc().flat_map(char::to_lowercase).collect()
}

/// Normalize `text` and split it into index terms.
pub fn tokenize(text: &str) -> Vec<String> {
    let normalized = normalize(text);
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut current_script = None;

    for ch in normalized.chars() {
        if !is_word_char(ch) {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            current_script = None;
            continue;
        }
        let script = script_of(ch);
        if current_script.is_some_and(|s| s != script) && !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
        current.push(ch);
        current_script = Some(script);
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}
