use std::fmt;

use serde::Serialize;

use super::PetriError;

pub type PlaceId = usize;
pub type TransitionId = usize;
pub type ColourId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Arc {
    pub place: PlaceId,
    pub colour: ColourId,
    pub weight: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionKind {
    /// One layer computation.
    Compute,
    /// Hand-over of a shared variable from its writer to its readers.
    Sync,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Transition {
    /// Unique name. Compute transitions are named after the variable they
    /// produce; sync transitions are `sync:<variablesync name>`.
    pub name: String,
    /// Display label (the fragment name, or `sync`).
    pub label: String,
    pub kind: TransitionKind,
    /// Owning item colour, when the net is coloured.
    pub item: Option<ColourId>,
    pub inputs: Vec<Arc>,
    pub outputs: Vec<Arc>,
}

impl Transition {
    pub fn is_sync(&self) -> bool {
        self.kind == TransitionKind::Sync
    }
}

/// Token content of every `(place, colour)` slot.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Marking {
    colours: usize,
    tokens: Vec<u32>,
}

impl Marking {
    pub fn empty(places: usize, colours: usize) -> Self {
        Marking {
            colours,
            tokens: vec![0; places * colours],
        }
    }

    pub fn places(&self) -> usize {
        self.tokens.len() / self.colours.max(1)
    }

    pub fn colours(&self) -> usize {
        self.colours
    }

    pub fn get(&self, place: PlaceId, colour: ColourId) -> u32 {
        self.tokens[place * self.colours + colour]
    }

    pub fn set(&mut self, place: PlaceId, colour: ColourId, count: u32) {
        self.tokens[place * self.colours + colour] = count;
    }

    pub fn add(&mut self, place: PlaceId, colour: ColourId, count: u32) {
        self.tokens[place * self.colours + colour] += count;
    }

    /// Tokens in `place`, all colours together.
    pub fn place_total(&self, place: PlaceId) -> u32 {
        self.tokens[place * self.colours..(place + 1) * self.colours]
            .iter()
            .sum()
    }

    pub fn total(&self) -> u64 {
        self.tokens.iter().map(|&t| t as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.iter().all(|&t| t == 0)
    }

    pub fn slots(&self) -> &[u32] {
        &self.tokens
    }

    fn covers(&self, arcs: &[Arc]) -> bool {
        arcs.iter().all(|a| self.get(a.place, a.colour) >= a.weight)
    }
}

impl fmt::Debug for Marking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut list = f.debug_map();
        for p in 0..self.places() {
            for c in 0..self.colours {
                let n = self.get(p, c);
                if n > 0 {
                    list.entry(&(p, c), &n);
                }
            }
        }
        list.finish()
    }
}

/// Places, transitions with weighted and coloured arcs, and the initial and
/// final markings. A net translated from a single description has exactly
/// one colour.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PetriNet {
    pub name: String,
    pub places: Vec<String>,
    pub colours: Vec<String>,
    pub transitions: Vec<Transition>,
    pub initial: Marking,
    pub final_places: Vec<PlaceId>,
    pub final_marking: Marking,
}

impl PetriNet {
    pub fn place(&self, name: &str) -> Option<PlaceId> {
        self.places.iter().position(|p| p == name)
    }

    pub fn transition(&self, name: &str) -> Option<TransitionId> {
        self.transitions.iter().position(|t| t.name == name)
    }

    pub fn colour(&self, name: &str) -> Option<ColourId> {
        self.colours.iter().position(|c| c == name)
    }

    pub fn is_enabled(&self, marking: &Marking, t: TransitionId) -> bool {
        marking.covers(&self.transitions[t].inputs)
    }

    /// Transitions whose every input arc is covered by `marking`.
    pub fn fireable(&self, marking: &Marking) -> Vec<TransitionId> {
        (0..self.transitions.len())
            .filter(|&t| self.is_enabled(marking, t))
            .collect()
    }

    /// Consumes the input-arc tokens of `t` and produces its output-arc tokens.
    pub fn fire(&self, marking: &Marking, t: TransitionId) -> Result<Marking, PetriError> {
        let tr = self
            .transitions
            .get(t)
            .ok_or_else(|| PetriError::UnknownTransition(t.to_string()))?;
        if !marking.covers(&tr.inputs) {
            return Err(PetriError::NotFireable(tr.name.clone()));
        }
        let mut next = marking.clone();
        for a in &tr.inputs {
            next.tokens[a.place * next.colours + a.colour] -= a.weight;
        }
        for a in &tr.outputs {
            next.add(a.place, a.colour, a.weight);
        }
        Ok(next)
    }

    pub fn is_final(&self, marking: &Marking) -> bool {
        marking == &self.final_marking
    }

    pub fn compute_transitions(&self) -> impl Iterator<Item = (TransitionId, &Transition)> {
        self.transitions
            .iter()
            .enumerate()
            .filter(|(_, t)| !t.is_sync())
    }

    /// Names of the places holding tokens, for reports.
    pub fn describe(&self, marking: &Marking) -> String {
        let mut parts = Vec::new();
        for p in 0..self.places.len() {
            for c in 0..self.colours.len() {
                let n = marking.get(p, c);
                if n == 0 {
                    continue;
                }
                if self.colours.len() == 1 {
                    parts.push(format!("{}:{n}", self.places[p]));
                } else {
                    parts.push(format!("{}[{}]:{n}", self.places[p], self.colours[c]));
                }
            }
        }
        format!("{{{}}}", parts.join(", "))
    }
}

/// A net built from a set of item descriptions: one colour per item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColouredPetriNet {
    pub net: PetriNet,
}

impl ColouredPetriNet {
    pub fn items(&self) -> &[String] {
        &self.net.colours
    }

    pub fn sync_transitions(&self) -> impl Iterator<Item = (TransitionId, &Transition)> {
        self.net
            .transitions
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_sync())
    }

    /// Same places and arcs with every colour folded into one and the sync
    /// transitions removed.
    pub fn erase_colours(&self) -> PetriNet {
        let fold = |arcs: &[Arc]| -> Vec<Arc> {
            let mut out: Vec<Arc> = Vec::new();
            for a in arcs {
                match out.iter_mut().find(|b| b.place == a.place) {
                    Some(b) => b.weight += a.weight,
                    None => out.push(Arc { colour: 0, ..*a }),
                }
            }
            out
        };
        let fold_marking = |m: &Marking| {
            let mut out = Marking::empty(m.places(), 1);
            for p in 0..m.places() {
                out.set(p, 0, m.place_total(p));
            }
            out
        };
        PetriNet {
            name: self.net.name.clone(),
            places: self.net.places.clone(),
            colours: vec![self.net.name.clone()],
            transitions: self
                .net
                .transitions
                .iter()
                .filter(|t| !t.is_sync())
                .map(|t| Transition {
                    item: None,
                    inputs: fold(&t.inputs),
                    outputs: fold(&t.outputs),
                    ..t.clone()
                })
                .collect(),
            initial: fold_marking(&self.net.initial),
            final_places: self.net.final_places.clone(),
            final_marking: fold_marking(&self.net.final_marking),
        }
    }
}

impl std::ops::Deref for ColouredPetriNet {
    type Target = PetriNet;

    fn deref(&self) -> &PetriNet {
        &self.net
    }
}
