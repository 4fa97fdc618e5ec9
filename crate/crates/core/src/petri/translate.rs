//! Descriptions to nets.
//!
//! A token in a place means the variable is available. A compute
//! instruction becomes a transition taking one token per use of each
//! operand and putting into its result place as many tokens as the result
//! has uses, plus one for graph outputs (which become the final places).
//! Declarations start with one token per use.

use std::collections::{BTreeMap, HashMap};

use super::net::{
    Arc, ColourId, ColouredPetriNet, Marking, PetriNet, PlaceId, Transition, TransitionKind,
};
use super::PetriError;
use crate::frontend::{Instruction, ItemProgram, NnefProgram, Op};

/// Uses of each variable by the compute (and send) instructions of a body.
fn use_counts<'a>(instructions: impl Iterator<Item = &'a Instruction>) -> HashMap<&'a str, u32> {
    let mut uses = HashMap::new();
    for inst in instructions {
        if inst.op.is_compute() || inst.op == Op::SendVar {
            for v in inst.var_inputs() {
                *uses.entry(v).or_insert(0) += 1;
            }
        }
    }
    uses
}

/// Operand places with multiplicities, in first-use order.
fn grouped_inputs(
    vars: Vec<&str>,
    place_of: impl Fn(&str) -> PlaceId,
    colour: ColourId,
) -> Vec<Arc> {
    let mut arcs: Vec<Arc> = Vec::new();
    for v in vars {
        let place = place_of(v);
        match arcs.iter_mut().find(|a| a.place == place) {
            Some(a) => a.weight += 1,
            None => arcs.push(Arc {
                place,
                colour,
                weight: 1,
            }),
        }
    }
    arcs
}

struct Places {
    names: Vec<String>,
    index: HashMap<String, PlaceId>,
}

impl Places {
    fn new() -> Self {
        Places {
            names: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn intern(&mut self, name: &str) -> PlaceId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }
}

/// Net of a single-item description (one colour).
pub fn translate(program: &NnefProgram) -> PetriNet {
    let mut places = Places::new();
    for inst in &program.instructions {
        for v in inst.var_inputs() {
            places.intern(v);
        }
        places.intern(&inst.result);
    }
    for out in &program.outputs {
        places.intern(out);
    }
    let uses = use_counts(program.instructions.iter());
    let is_output = |v: &str| program.outputs.iter().any(|o| o == v);

    let mut transitions = Vec::new();
    let mut initial = Marking::empty(places.names.len(), 1);
    for inst in &program.instructions {
        let result = places.index[&inst.result];
        if inst.op.is_declaration() {
            initial.add(
                result,
                0,
                uses.get(inst.result.as_str()).copied().unwrap_or(0),
            );
            continue;
        }
        let weight = uses.get(inst.result.as_str()).copied().unwrap_or(0)
            + u32::from(is_output(&inst.result));
        transitions.push(Transition {
            name: inst.result.clone(),
            label: inst.op.name().to_string(),
            kind: TransitionKind::Compute,
            item: None,
            inputs: grouped_inputs(inst.var_inputs(), |v| places.index[v], 0),
            outputs: vec![Arc {
                place: result,
                colour: 0,
                weight,
            }],
        });
    }

    let final_places: Vec<PlaceId> = program.outputs.iter().map(|o| places.index[o]).collect();
    let mut final_marking = Marking::empty(places.names.len(), 1);
    for &p in &final_places {
        final_marking.set(p, 0, 1);
    }
    PetriNet {
        name: program.graph_name.clone(),
        places: places.names,
        colours: vec![program.graph_name.clone()],
        transitions,
        initial,
        final_places,
        final_marking,
    }
}

/// Name of the sync transition generated by `send_var` into `sync`.
pub fn sync_transition_name(sync: &str) -> String {
    format!("sync:{sync}")
}

/// Coloured net of a multi-item set: the per-item nets with one colour per
/// item, duplicated declaration places merged by name, `variablesync`
/// generating nothing, `get_var` aliasing the writer's place, and each
/// `send_var` becoming a sync transition that takes one writer-coloured
/// token and returns reader-coloured tokens to the same place.
pub fn translate_multi(items: &[ItemProgram]) -> Result<ColouredPetriNet, PetriError> {
    let colour_of: HashMap<&str, ColourId> = items
        .iter()
        .enumerate()
        .map(|(i, it)| (it.item_id.as_str(), i))
        .collect();

    // sync name -> (writer colour, sent variable)
    let mut sent: HashMap<&str, (ColourId, &str)> = HashMap::new();
    for (c, item) in items.iter().enumerate() {
        for (sync, inst) in item.sends() {
            if let Some((_, data)) = inst.send_var_parts() {
                sent.insert(sync, (c, data));
            }
        }
    }

    // per item: local variable -> place name
    let mut aliases: Vec<HashMap<&str, &str>> = vec![HashMap::new(); items.len()];
    for (c, item) in items.iter().enumerate() {
        for inst in item.gets() {
            let (source, sync) =
                inst.get_var_parts()
                    .ok_or_else(|| PetriError::UnresolvedVarsync {
                        item: item.item_id.clone(),
                        sync: inst.result.clone(),
                    })?;
            let src = *colour_of
                .get(source)
                .ok_or_else(|| PetriError::UnknownSourceItem {
                    item: item.item_id.clone(),
                    source_item: source.to_string(),
                })?;
            if !items[src].declares_sync(sync) {
                return Err(PetriError::UnresolvedVarsync {
                    item: item.item_id.clone(),
                    sync: sync.to_string(),
                });
            }
            let place = match sent.get(sync) {
                Some(&(writer, data)) if writer == src => data,
                _ => inst.result.as_str(),
            };
            aliases[c].insert(&inst.result, place);
        }
    }

    let mut places = Places::new();
    for (c, item) in items.iter().enumerate() {
        for inst in &item.instructions {
            match inst.op {
                Op::VariableSync | Op::SendVar => {}
                _ => {
                    for v in inst.var_inputs() {
                        places.intern(aliases[c].get(v).copied().unwrap_or(v));
                    }
                    let r = inst.result.as_str();
                    places.intern(aliases[c].get(r).copied().unwrap_or(r));
                }
            }
        }
    }
    let n_colours = items.len();
    let mut initial = Marking::empty(places.names.len(), n_colours);
    let mut transitions: Vec<Transition> = Vec::new();
    let mut final_marking = Marking::empty(places.names.len(), n_colours);
    let mut final_places = Vec::new();
    let mut producer: BTreeMap<String, String> = BTreeMap::new();

    for (c, item) in items.iter().enumerate() {
        let uses = use_counts(item.instructions.iter());
        let place_of = |v: &str| places.index[aliases[c].get(v).copied().unwrap_or(v)];
        let is_output = |v: &str| item.graph_outputs.iter().any(|o| o == v);
        for inst in &item.instructions {
            match inst.op {
                Op::External | Op::Variable => {
                    initial.add(
                        place_of(&inst.result),
                        c,
                        uses.get(inst.result.as_str()).copied().unwrap_or(0),
                    );
                }
                Op::VariableSync | Op::GetVar => {}
                Op::SendVar => {
                    let Some((dest, data)) = inst.send_var_parts() else {
                        continue;
                    };
                    let place = place_of(data);
                    let mut outputs = Vec::new();
                    for d in dest {
                        let Some(&reader) = colour_of.get(d.as_str()) else {
                            return Err(PetriError::UnknownSourceItem {
                                item: item.item_id.clone(),
                                source_item: d.clone(),
                            });
                        };
                        let reader_uses =
                            reader_use_count(&items[reader], &inst.result, &item.item_id);
                        if reader_uses > 0 {
                            outputs.push(Arc {
                                place,
                                colour: reader,
                                weight: reader_uses,
                            });
                        }
                    }
                    push_unique(
                        &mut transitions,
                        &mut producer,
                        Transition {
                            name: sync_transition_name(&inst.result),
                            label: "sync".into(),
                            kind: TransitionKind::Sync,
                            item: Some(c),
                            inputs: vec![Arc {
                                place,
                                colour: c,
                                weight: 1,
                            }],
                            outputs,
                        },
                        &item.item_id,
                    )?;
                }
                _ => {
                    let result = place_of(&inst.result);
                    let weight = uses.get(inst.result.as_str()).copied().unwrap_or(0)
                        + u32::from(is_output(&inst.result));
                    if is_output(&inst.result) {
                        final_marking.set(result, c, 1);
                        final_places.push(result);
                    }
                    push_unique(
                        &mut transitions,
                        &mut producer,
                        Transition {
                            name: inst.result.clone(),
                            label: inst.op.name().to_string(),
                            kind: TransitionKind::Compute,
                            item: Some(c),
                            inputs: grouped_inputs(inst.var_inputs(), place_of, c),
                            outputs: vec![Arc {
                                place: result,
                                colour: c,
                                weight,
                            }],
                        },
                        &item.item_id,
                    )?;
                }
            }
        }
    }

    let name = items
        .first()
        .map(|i| i.graph_name.clone())
        .unwrap_or_default();
    Ok(ColouredPetriNet {
        net: PetriNet {
            name,
            places: places.names,
            colours: items.iter().map(|i| i.item_id.clone()).collect(),
            transitions,
            initial,
            final_places,
            final_marking,
        },
    })
}

/// Uses, inside `reader`, of the variable it obtains through `sync` from `writer`.
fn reader_use_count(reader: &ItemProgram, sync: &str, writer: &str) -> u32 {
    let locals: Vec<&str> = reader
        .gets()
        .filter_map(|g| g.get_var_parts().map(|parts| (g, parts)))
        .filter(|(_, (src, s))| *s == sync && *src == writer)
        .map(|(g, _)| g.result.as_str())
        .collect();
    let uses = use_counts(reader.instructions.iter());
    locals
        .iter()
        .map(|l| uses.get(l).copied().unwrap_or(0))
        .sum()
}

fn push_unique(
    transitions: &mut Vec<Transition>,
    producer: &mut BTreeMap<String, String>,
    t: Transition,
    item: &str,
) -> Result<(), PetriError> {
    if let Some(first) = producer.get(&t.name) {
        return Err(PetriError::DuplicateTransition {
            name: t.name,
            items: vec![first.clone(), item.to_string()],
        });
    }
    producer.insert(t.name.clone(), item.to_string());
    transitions.push(t);
    Ok(())
}
