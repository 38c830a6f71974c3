//! Text normalization and tokenization shared by the flow rules, the
//! importer and the BLEU scorer.

use unicode_normalization::UnicodeNormalization;

/// Canonical text form used for identity checks: Unicode NFC, trimmed,
/// inner whitespace runs collapsed to a single space.
pub fn normalize(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    let mut out = String::with_capacity(nfc.len());
    let mut pending_space = false;
    for ch in nfc.chars() {
        if ch.is_whitespace() {
            pending_space = !out.is_empty();
        } else {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            out.push(ch);
        }
    }
    out
}

/// Tokenize for BLEU: NFC normalization, whitespace split, and every
/// punctuation-like character (neither alphanumeric nor whitespace) split
/// into a standalone token. Applied identically to hypotheses and
/// references; BLEU scores are only meaningful under one fixed rule.
pub fn tokenize(text: &str) -> Vec<String> {
    let nfc: String = text.nfc().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in nfc.chars() {
        if ch.is_whitespace() {
            flush(&mut current, &mut tokens);
        } else if ch.is_alphanumeric() {
            current.push(ch);
        } else {
            flush(&mut current, &mut tokens);
            tokens.push(ch.to_string());
        }
    }
    flush(&mut current, &mut tokens);
    tokens
}

fn flush(current: &mut String, tokens: &mut Vec<String>) {
    if !current.is_empty() {
        tokens.push(std::mem::take(current));
    }
}
