use std::fmt::Write;

use super::net::PetriNet;

const PALETTE: [&str; 8] = [
    "red",
    "blue",
    "darkgreen",
    "orange",
    "purple",
    "brown",
    "magenta",
    "cyan",
];

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Graphviz text: places are circles annotated with their initial tokens,
/// transitions are bars, arcs carry their weight when it is not 1 and the
/// item colour when the net has several colours.
pub fn export_dot(net: &PetriNet) -> String {
    let coloured = net.colours.len() > 1;
    let colour = |c: usize| PALETTE[c % PALETTE.len()];
    let mut out = String::new();
    let _ = writeln!(out, "digraph {} {{", quote(&net.name));
    let _ = writeln!(out, "  rankdir=TB;");
    for (p, name) in net.places.iter().enumerate() {
        let mut tokens = Vec::new();
        for c in 0..net.colours.len() {
            let n = net.initial.get(p, c);
            if n > 0 {
                tokens.push(if coloured {
                    format!("{n}@{}", net.colours[c])
                } else {
                    n.to_string()
                });
            }
        }
        let label = if tokens.is_empty() {
            name.clone()
        } else {
            format!("{name}\\n{}", tokens.join(" "))
        };
        let periphery = if net.final_places.contains(&p) {
            ", peripheries=2"
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "  {} [shape=circle, label={}{periphery}];",
            quote(&format!("p:{name}")),
            quote(&label)
        );
    }
    for t in &net.transitions {
        let mut attrs = format!(
            "shape=box, height=0.1, style=filled, label={}",
            quote(&t.name)
        );
        match t.item {
            Some(c) if coloured => {
                let _ = write!(attrs, ", fillcolor={}", colour(c));
            }
            _ => attrs.push_str(", fillcolor=black, fontcolor=white"),
        }
        let _ = writeln!(out, "  {} [{attrs}];", quote(&format!("t:{}", t.name)));
    }
    let arc = |out: &mut String, from: String, to: String, weight: u32, c: usize| {
        let mut attrs = Vec::new();
        if weight != 1 {
            attrs.push(format!("label=\"{weight}\""));
        }
        if coloured {
            attrs.push(format!("color={}", colour(c)));
        }
        let attrs = if attrs.is_empty() {
            String::new()
        } else {
            format!(" [{}]", attrs.join(", "))
        };
        let _ = writeln!(out, "  {} -> {}{attrs};", quote(&from), quote(&to));
    };
    for t in &net.transitions {
        let tn = format!("t:{}", t.name);
        for a in &t.inputs {
            arc(
                &mut out,
                format!("p:{}", net.places[a.place]),
                tn.clone(),
                a.weight,
                a.colour,
            );
        }
        for a in &t.outputs {
            arc(
                &mut out,
                tn.clone(),
                format!("p:{}", net.places[a.place]),
                a.weight,
                a.colour,
            );
        }
    }
    out.push_str("}\n");
    out
}
