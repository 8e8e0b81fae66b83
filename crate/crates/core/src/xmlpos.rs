/// One-based line and character column of a byte offset.
pub(crate) fn line_col(text: &str, offset: u64) -> (usize, usize) {
    let offset = (offset as usize).min(text.len());
    let before = &text.as_bytes()[..offset];
    let line = before.iter().filter(|b| **b == b'\n').count() + 1;
    let col_start = before.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
    let column = String::from_utf8_lossy(&before[col_start..]).chars().count() + 1;
    (line, column)
}

/// Offset of the next non-whitespace byte at or after `offset`.
pub(crate) fn skip_ws(text: &str, mut offset: u64) -> u64 {
    while text.as_bytes().get(offset as usize).is_some_and(|b| b.is_ascii_whitespace()) {
        offset += 1;
    }
    offset
}
