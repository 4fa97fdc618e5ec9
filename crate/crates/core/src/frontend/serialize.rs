use std::fmt::Write;

use super::ast::{Argument, Instruction, ItemProgram, NnefProgram};

fn ident_list(items: &[String]) -> String {
    if items.is_empty() {
        "( )".to_string()
    } else {
        format!("( {} )", items.join(", "))
    }
}

fn bracketed<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    let parts: Vec<String> = items.iter().map(f).collect();
    format!("[{}]", parts.join(", "))
}

pub fn format_argument(arg: &Argument) -> String {
    match arg {
        Argument::Var(s) | Argument::Item(s) | Argument::Sync(s) => s.clone(),
        Argument::VarList(v) | Argument::ItemList(v) => bracketed(v, Clone::clone),
        Argument::Int(v) => v.to_string(),
        Argument::Float(v) => format!("{v:?}"),
        Argument::IntList(v) => bracketed(v, i64::to_string),
        Argument::TupleList(v) => bracketed(v, |(a, b)| format!("({a}, {b})")),
        Argument::Str(s) => format!("'{s}'"),
    }
}

pub fn format_instruction(inst: &Instruction) -> String {
    let args: Vec<String> = inst
        .op
        .signature()
        .iter()
        .zip(&inst.args)
        .map(|(param, arg)| {
            if param.positional {
                format_argument(arg)
            } else {
                format!("{} = {}", param.name, format_argument(arg))
            }
        })
        .collect();
    format!("{} = {}({});", inst.result, inst.op, args.join(", "))
}

fn body(out: &mut String, instructions: &[Instruction]) {
    out.push_str("{\n");
    for inst in instructions {
        let _ = writeln!(out, "  {}", format_instruction(inst));
    }
    out.push_str("}\n");
}

/// Canonical text of a single-item description.
pub fn serialize_program(p: &NnefProgram) -> String {
    let mut out = format!(
        "graph {}{} -> {}\n",
        p.graph_name,
        ident_list(&p.inputs),
        ident_list(&p.outputs)
    );
    body(&mut out, &p.instructions);
    out
}

/// Canonical text of an item description; the `graphitem` header follows the graph header.
pub fn serialize_item(p: &ItemProgram) -> String {
    let mut out = format!(
        "graph {}{} -> {}\ngraphitem {} {}{} -> {}\n",
        p.graph_name,
        ident_list(&p.graph_inputs),
        ident_list(&p.graph_outputs),
        p.item_id,
        p.node_name,
        ident_list(&p.inputs),
        ident_list(&p.outputs)
    );
    body(&mut out, &p.instructions);
    out
}
