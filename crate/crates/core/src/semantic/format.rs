use std::collections::HashMap;
use std::fmt::Write as _;

use super::{S2Element, Value};

/// Renders a graph in the bracketed listing style: one header line per
/// element, an optional value block, then each child key with its list.
pub fn format_s2(root: &S2Element) -> String {
    let mut out = String::new();
    element(&mut out, root, 0, 0, true);
    out
}

fn pad(out: &mut String, n: usize) {
    for _ in 0..n {
        out.push(' ');
    }
}

fn element(out: &mut String, e: &S2Element, indent: usize, idx: usize, is_root: bool) {
    pad(out, indent);
    out.push_str("{\n");
    let inner = indent + 4;
    pad(out, inner);
    let _ = write!(
        out,
        "label=[{}], tag=[{}], type=[{}], kind=[{}], key=[{}], idx=[{}]",
        e.label,
        e.tag,
        e.type_name,
        e.kind,
        e.key.map_or("", |k| k.as_str()),
        idx
    );
    if !e.annotations.is_empty() {
        let anns: Vec<_> = e.annotations.iter().map(|a| a.as_str()).collect();
        let _ = write!(out, ", @=[{}]", anns.join(","));
    }
    let _ = writeln!(out, " id=[{}]", e.id);
    if let Some(r) = e.refers_to {
        pad(out, inner);
        let _ = writeln!(out, "<coreference substitution> id=[{r}]");
    }
    if let Some(v) = &e.value {
        pad(out, inner);
        out.push_str("value={\n");
        value_lines(out, v, inner + 4);
        pad(out, inner);
        out.push_str("}\n");
    }
    if is_root && e.children.is_empty() {
        pad(out, inner);
        out.push_str("[CMD_LIST] = [\n");
        pad(out, inner);
        out.push_str("]\n");
    }
    for (key, list) in &e.children {
        pad(out, inner);
        let _ = writeln!(out, "[{}] = [", key.as_str());
        for (i, c) in list.iter().enumerate() {
            element(out, c, inner, i, false);
            pad(out, inner);
            out.push_str(",\n");
        }
        pad(out, inner);
        out.push_str("]\n");
    }
    pad(out, indent);
    out.push_str("}\n");
}

fn value_lines(out: &mut String, v: &Value, indent: usize) {
    match v {
        Value::List(items) => {
            for item in items {
                value_lines(out, item, indent);
            }
        }
        other => {
            pad(out, indent);
            let _ = writeln!(out, "{}", value_entry(other));
        }
    }
}

fn value_entry(v: &Value) -> String {
    match v {
        Value::Number(n) => format!("NUMERIC=[{n:.6}]"),
        Value::All => "NUMERIC=[ALL]".to_string(),
        Value::ThingIds(ids) if ids.is_empty() => "THING_INSTANCE=[0]".to_string(),
        Value::ThingIds(ids) => {
            let parts: Vec<String> = ids.iter().map(u64::to_string).collect();
            format!("THING_INSTANCE=[{}]", parts.join(", "))
        }
        Value::ThingType(t) => format!("THING_TYPE=[{t}]"),
        Value::Text(t) => format!("TEXT=[{t}]"),
        Value::Flag(b) => format!("FLAG=[{b}]"),
        Value::Reference(r) => format!("REFERENCE=[{r}]"),
        Value::List(_) => unreachable!("lists are flattened"),
    }
}

/// Canonical form of a listing for comparisons: trailing whitespace and
/// blank lines dropped, element ids and entity ids renamed in order of
/// first appearance.
pub fn normalize_listing(text: &str) -> String {
    let mut elem: HashMap<String, usize> = HashMap::new();
    let mut thing: HashMap<String, usize> = HashMap::new();
    let mut out = String::new();
    for line in text.lines() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let mut l = rename(line, "id=[", &mut elem, "e");
        if let Some(start) = l.find("THING_INSTANCE=[") {
            let open = start + "THING_INSTANCE=[".len();
            if let Some(close) = l[open..].find(']') {
                let ids: Vec<String> = l[open..open + close]
                    .split(',')
                    .map(|s| {
                        let s = s.trim().to_string();
                        let n = thing.len() + 1;
                        format!("t{}", thing.entry(s).or_insert(n))
                    })
                    .collect();
                l = format!("{}{}{}", &l[..open], ids.join(", "), &l[open + close..]);
            }
        }
        out.push_str(&l);
        out.push('\n');
    }
    out
}

fn rename(line: &str, marker: &str, map: &mut HashMap<String, usize>, prefix: &str) -> String {
    let mut out = String::new();
    let mut rest = line;
    while let Some(i) = rest.find(marker) {
        let (head, tail) = rest.split_at(i + marker.len());
        out.push_str(head);
        let close = tail.find(']').unwrap_or(tail.len());
        let raw = tail[..close].to_string();
        let n = map.len() + 1;
        let id = *map.entry(raw).or_insert(n);
        let _ = write!(out, "{prefix}{id}");
        rest = &tail[close..];
    }
    out.push_str(rest);
    out
}
