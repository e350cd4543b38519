/// Counts sentences: maximal segments ending in `.`, `!` or `?`, plus a
/// trailing unterminated segment when it has content. Runs of terminators
/// (`...`, `?!`) end a single sentence.
pub fn count_sentences(text: &str) -> u64 {
    let mut count = 0;
    let mut has_content = false;
    for c in text.chars() {
        if matches!(c, '.' | '!' | '?') {
            if has_content {
                count += 1;
                has_content = false;
            }
        } else if !c.is_whitespace() {
            has_content = true;
        }
    }
    if has_content {
        count += 1;
    }
    count
}
