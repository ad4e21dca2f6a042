use roxmltree::{Document, Node};

/// Escapes text for use inside a double-quoted attribute value.
pub(crate) fn escape_attr(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// 1-based line of a node's start tag.
pub(crate) fn line_of(doc: &Document, node: &Node) -> u32 {
    doc.text_pos_at(node.range().start).row
}

/// Fixed two-decimal rendering used by every emitted document.
pub(crate) fn fixed2(value: f64) -> String {
    let s = format!("{value:.2}");
    // Avoid "-0.00" so output does not depend on the sign of tiny values.
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}
