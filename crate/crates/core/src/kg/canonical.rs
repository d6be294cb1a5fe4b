/// Derives the canonical entity id for a display label.
///
/// Letters and digits are lowercased, runs of whitespace, hyphens and
/// underscores collapse to a single `-`, and every other character is
/// dropped. Returns `None` when nothing survives.
pub fn canonical_id(label: &str) -> Option<String> {
    let mut out = String::with_capacity(label.len());
    let mut pending_sep = false;
    for c in label.chars() {
        if c.is_alphanumeric() {
            if pending_sep && !out.is_empty() {
                out.push('-');
            }
            pending_sep = false;
            out.extend(c.to_lowercase().filter(|l| l.is_alphanumeric()));
        } else if c.is_whitespace() || c == '-' || c == '_' {
            pending_sep = true;
        }
    }
    if out.is_empty() {
        None
    } else {
        Some(out)
    }
}

/// True when `id` is already in canonical form.
pub fn is_canonical(id: &str) -> bool {
    canonical_id(id).as_deref() == Some(id)
}
