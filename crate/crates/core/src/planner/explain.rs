//! Plain-text renderings of groups and plans.

use std::fmt::Write;

use super::tree::{PlanNode, PlanTree, Placement};
use super::Group;

fn placement_text(p: &Placement) -> String {
    match p {
        Placement::Root => "root".into(),
        Placement::Arc => "arc".into(),
        Placement::TypeCheck => "type check".into(),
        Placement::Filter => "filter".into(),
        Placement::Subsumed { by } => format!("subsumed by {by}"),
    }
}

/// One row per group: label, atoms, supporting sources and placement.
pub fn render_groups(groups: &[Group], placements: &[Placement]) -> String {
    let rows: Vec<[String; 4]> = groups
        .iter()
        .enumerate()
        .map(|(i, g)| {
            [
                g.label.clone(),
                g.query_text(),
                g.sources.join(", "),
                placements.get(i).map(placement_text).unwrap_or_default(),
            ]
        })
        .collect();
    let header = ["Group", "Query", "Mapping source", "Placement"];
    let mut widths = header.map(str::len);
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                s.push_str(" | ");
            }
            let pad = widths[i] - c.chars().count();
            s.push_str(c);
            s.extend(std::iter::repeat(' ').take(pad));
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(&header.map(String::from));
    out.push_str(&line(&widths.map(|w| "-".repeat(w))));
    for r in &rows {
        out.push_str(&line(r));
    }
    out
}

fn render_node(tree: &PlanTree, node: &PlanNode, depth: usize, heading: &str, out: &mut String) {
    let ind = "  ".repeat(depth);
    let _ = writeln!(out, "{ind}{heading}");
    let _ = writeln!(out, "{ind}  Ontology: {}", tree.ontology_iri);
    let _ = writeln!(out, "{ind}  Resource: {} ({})", node.chosen_source, node.endpoint);
    let _ = writeln!(out, "{ind}  Ontology terms: {}", node.ontology_terms.join(", "));
    let _ = writeln!(out, "{ind}  Resource elements: {}", node.resource_elements.join(", "));
    for (i, l) in node.xquery_template.pretty().lines().enumerate() {
        let label = if i == 0 { "Xquery: " } else { "        " };
        let _ = writeln!(out, "{ind}  {label}{l}");
    }
    if !node.filter_groups.is_empty() {
        let labels: Vec<&str> = node.filter_groups.iter().map(|&g| tree.groups[g].label.as_str()).collect();
        let _ = writeln!(out, "{ind}  Checks: {}", labels.join(", "));
    }
    for a in &node.children {
        let mut checks: Vec<&str> = a.type_check_group.iter().map(|&g| tree.groups[g].label.as_str()).collect();
        checks.extend(a.filter_groups.iter().map(|&g| tree.groups[g].label.as_str()));
        let dist = a.constant_distance.map_or("-".to_string(), |d| d.to_string());
        let mut h = format!(
            "{} -{}-> {} [{}; stage {}; distance {}{}{}]",
            node.variable,
            a.object_property,
            a.target.variable,
            tree.groups[a.group].label,
            a.stage,
            dist,
            if a.parallel_ok { "; parallel" } else { "" },
            if a.rejoin { "; rejoin" } else { "" },
        );
        if !checks.is_empty() {
            h.push_str(&format!(" checks {}", checks.join(", ")));
        }
        render_node(tree, &a.target, depth + 1, &h, out);
    }
}

/// The plan tree as nested records, one per sub-query.
pub fn render_plan(tree: &PlanTree) -> String {
    let mut out = String::new();
    let heading = format!("{} [root {}]", tree.root.variable, tree.root_group().label);
    render_node(tree, &tree.root, 0, &heading, &mut out);
    out
}
