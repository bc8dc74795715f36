//! Diagram rewriting: snake removal (normal form), currying and the four
//! named schemes built from them.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagram::{
    validate, BoxTag, Diagram, End, Source, Target, TensorAssignment, Violation, Wire, WordBox,
};
use crate::pregroup::PregroupType;
use crate::tensor::DenseTensor;

#[derive(Debug, Error, PartialEq)]
pub enum RewriteError {
    #[error("invalid diagram: {0:?}")]
    Invalid(Vec<Violation>),
    #[error("cannot curry box {index} (`{name}`) port {port}: {reason}")]
    CurryUnsupported {
        index: usize,
        name: String,
        port: usize,
        reason: &'static str,
    },
    #[error("unknown rewrite scheme `{0}`")]
    UnknownScheme(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewriteScheme {
    Re,
    ReNorm,
    ReNormCur,
    ReNormCurNorm,
}

impl RewriteScheme {
    pub const ALL: [RewriteScheme; 4] = [
        RewriteScheme::Re,
        RewriteScheme::ReNorm,
        RewriteScheme::ReNormCur,
        RewriteScheme::ReNormCurNorm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RewriteScheme::Re => "re",
            RewriteScheme::ReNorm => "re_norm",
            RewriteScheme::ReNormCur => "re_norm_cur",
            RewriteScheme::ReNormCurNorm => "re_norm_cur_norm",
        }
    }
}

impl fmt::Display for RewriteScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RewriteScheme {
    type Err = RewriteError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| RewriteError::UnknownScheme(s.to_string()))
    }
}

/// Applies `scheme`: `re` is the identity, each later scheme appends one
/// pass (normal form, curry, normal form).
pub fn rewrite(d: &Diagram, scheme: RewriteScheme) -> Result<Diagram, RewriteError> {
    let violations = validate(d);
    if !violations.is_empty() {
        return Err(RewriteError::Invalid(violations));
    }
    let out = match scheme {
        RewriteScheme::Re => d.clone(),
        RewriteScheme::ReNorm => normal_form(d),
        RewriteScheme::ReNormCur => curry(&normal_form(d))?,
        RewriteScheme::ReNormCurNorm => normal_form(&curry(&normal_form(d))?),
    };
    Ok(out)
}

/// Drops the marked wires, cups and caps and renumbers every reference.
fn compact(d: &Diagram, drop_wires: &BTreeSet<usize>, drop_cups: &BTreeSet<usize>, drop_caps: &BTreeSet<usize>) -> Diagram {
    let remap = |len: usize, dropped: &BTreeSet<usize>| -> Vec<Option<usize>> {
        let mut next = 0;
        (0..len)
            .map(|i| {
                if dropped.contains(&i) {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect()
    };
    let wire_map = remap(d.wires.len(), drop_wires);
    let cup_map = remap(d.cups.len(), drop_cups);
    let cap_map = remap(d.caps.len(), drop_caps);
    let wires = d
        .wires
        .iter()
        .enumerate()
        .filter(|(i, _)| wire_map[*i].is_some())
        .map(|(_, w)| Wire {
            ty: w.ty,
            source: match w.source {
                Source::Cap { index, end } => Source::Cap { index: cap_map[index].expect("live cap"), end },
                s => s,
            },
            target: match w.target {
                Target::Cup { index, end } => Target::Cup { index: cup_map[index].expect("live cup"), end },
                t => t,
            },
        })
        .collect();
    let pair = |p: &[usize; 2]| [wire_map[p[0]].expect("live wire"), wire_map[p[1]].expect("live wire")];
    Diagram {
        boxes: d.boxes.clone(),
        wires,
        cups: d.cups.iter().enumerate().filter(|(i, _)| cup_map[*i].is_some()).map(|(_, p)| pair(p)).collect(),
        caps: d.caps.iter().enumerate().filter(|(i, _)| cap_map[*i].is_some()).map(|(_, p)| pair(p)).collect(),
        open_wires: d.open_wires.iter().map(|&w| wire_map[w].expect("live wire")).collect(),
    }
}

/// Gives wire `to` a new consumer and updates the consumer's back-reference.
fn retarget(d: &mut Diagram, to: usize, target: Target) {
    d.wires[to].target = target;
    match target {
        Target::Cup { index, end } => d.cups[index][end.index()] = to,
        Target::Open { position } => d.open_wires[position] = to,
        Target::Box { .. } => {}
    }
}

fn resource(d: &mut Diagram, to: usize, source: Source) {
    d.wires[to].source = source;
    if let Source::Cap { index, end } = source {
        d.caps[index][end.index()] = to;
    }
}

/// Finds the first yankable cup/cap pair: a cup one of whose legs is fed by
/// the opposite leg of a cap. Returns `(cup, cap, shared, cup_other, cap_other)`.
fn find_snake(d: &Diagram) -> Option<(usize, usize, usize, usize, usize)> {
    for (ci, cup) in d.cups.iter().enumerate() {
        for end in [End::Left, End::Right] {
            let shared = cup[end.index()];
            if let Source::Cap { index: ki, end: cap_end } = d.wires[shared].source {
                if cap_end == end.other() {
                    let cup_other = cup[end.other().index()];
                    let cap_other = d.caps[ki][end.index()];
                    if cup_other != cap_other {
                        return Some((ci, ki, shared, cup_other, cap_other));
                    }
                }
            }
        }
    }
    None
}

/// Removes cup/cap snakes until none remain, leftmost cup first.
///
/// Each yank fuses the wire entering the cup with the wire leaving the cap;
/// the fused wire keeps the leftmost of the two positions.
pub fn normal_form(d: &Diagram) -> Diagram {
    let mut cur = d.clone();
    while let Some((ci, ki, shared, cup_other, cap_other)) = find_snake(&cur) {
        let source = cur.wires[cup_other].source;
        let target = cur.wires[cap_other].target;
        let (keep, gone) = if cup_other < cap_other { (cup_other, cap_other) } else { (cap_other, cup_other) };
        resource(&mut cur, keep, source);
        retarget(&mut cur, keep, target);
        let drop_wires: BTreeSet<usize> = [shared, gone].into();
        cur = compact(&cur, &drop_wires, &[ci].into(), &[ki].into());
    }
    canonical_order(&cur).unwrap_or(cur)
}

/// Without caps every wire comes from a box port, so ordering wires by
/// `(box, port)` and cups by their left leg gives a layout-independent form.
/// Returns `None` when caps remain or the reordering would break validity.
fn canonical_order(d: &Diagram) -> Option<Diagram> {
    if !d.caps.is_empty() {
        return None;
    }
    let key = |w: &Wire| match w.source {
        Source::Box { index, port } => (index, port),
        Source::Cap { .. } => unreachable!("no caps"),
    };
    let mut order: Vec<usize> = (0..d.wires.len()).collect();
    order.sort_by_key(|&i| key(&d.wires[i]));
    let mut new_of = vec![0; d.wires.len()];
    for (new, &old) in order.iter().enumerate() {
        new_of[old] = new;
    }
    let mut cups: Vec<[usize; 2]> = d.cups.iter().map(|p| p.map(|w| new_of[w])).collect();
    if cups.iter().any(|p| p[0] > p[1]) {
        return None;
    }
    let mut cup_order: Vec<usize> = (0..cups.len()).collect();
    cup_order.sort_by_key(|&c| cups[c][0]);
    let mut cup_of = vec![0; cups.len()];
    for (new, &old) in cup_order.iter().enumerate() {
        cup_of[old] = new;
    }
    cups = cup_order.iter().map(|&c| cups[c]).collect();
    let wires = order
        .iter()
        .map(|&i| {
            let w = &d.wires[i];
            let target = match w.target {
                Target::Cup { index, end } => Target::Cup { index: cup_of[index], end },
                t => t,
            };
            Wire { ty: w.ty, source: w.source, target }
        })
        .collect();
    let out = Diagram {
        boxes: d.boxes.clone(),
        wires,
        cups,
        caps: Vec::new(),
        open_wires: d.open_wires.iter().map(|&w| new_of[w]).collect(),
    };
    validate(&out).is_empty().then_some(out)
}

/// Bends adjoint output wires of word boxes into inputs.
///
/// For each word box, every output port of non-zero adjoint order that is
/// cupped to a plain wire becomes an input consuming that wire directly; the
/// cup disappears. The new domain lists the bent ports in their original
/// order.
pub fn curry(d: &Diagram) -> Result<Diagram, RewriteError> {
    let mut cur = d.clone();
    let outs = d.box_outputs();
    let mut drop_wires = BTreeSet::new();
    let mut drop_cups = BTreeSet::new();

    for (bi, b) in d.boxes.iter().enumerate() {
        if b.tag != BoxTag::Word {
            continue;
        }
        let mut bent = Vec::new();
        let mut partners = Vec::new();
        for (port, &ty) in b.cod.simples().iter().enumerate() {
            if ty.is_plain() {
                continue;
            }
            let Some(w) = outs[bi][port] else { continue };
            let Target::Cup { index: ci, end } = d.wires[w].target else { continue };
            let partner = d.cups[ci][end.other().index()];
            let unsupported = |reason| RewriteError::CurryUnsupported {
                index: bi,
                name: b.name.clone(),
                port,
                reason,
            };
            if !d.wires[partner].ty.is_plain() {
                return Err(unsupported("adjoint wire cupped to another adjoint wire"));
            }
            if matches!(d.wires[partner].source, Source::Box { index, .. } if index == bi) {
                return Err(unsupported("wire cupped to the same box"));
            }
            bent.push(port);
            partners.push(partner);
            drop_wires.insert(w);
            drop_cups.insert(ci);
        }
        if bent.is_empty() {
            continue;
        }
        let dom: PregroupType = PregroupType::new(partners.iter().map(|&p| d.wires[p].ty).collect());
        let kept: Vec<usize> = (0..b.cod.len()).filter(|p| !bent.contains(p)).collect();
        let cod = PregroupType::new(kept.iter().map(|&p| b.cod.simples()[p]).collect());
        for (new_port, &p) in partners.iter().enumerate() {
            cur.wires[p].target = Target::Box { index: bi, port: new_port };
        }
        for (new_port, &old_port) in kept.iter().enumerate() {
            if let Some(w) = outs[bi][old_port] {
                cur.wires[w].source = Source::Box { index: bi, port: new_port };
            }
        }
        cur.boxes[bi] = WordBox {
            name: b.name.clone(),
            dom,
            cod,
            tag: BoxTag::Curried { origin_cod: b.cod.clone(), bent_ports: bent },
        };
    }
    Ok(compact(&cur, &drop_wires, &drop_cups, &BTreeSet::new()))
}

/// Reorders a word-box tensor (indexed by the original codomain) into the
/// curried box's layout: bent ports first, then the remaining outputs.
pub fn bend_tensor(b: &WordBox, original: &DenseTensor) -> DenseTensor {
    match &b.tag {
        BoxTag::Word => original.clone(),
        BoxTag::Curried { origin_cod, bent_ports } => {
            let mut order = bent_ports.clone();
            order.extend((0..origin_cod.len()).filter(|p| !bent_ports.contains(p)));
            original.permute(&order)
        }
    }
}

/// Carries an assignment for `original` over to `curried = curry(original)`.
pub fn bend_assignment(curried: &Diagram, original: &TensorAssignment) -> TensorAssignment {
    TensorAssignment {
        dims: original.dims,
        tensors: curried
            .boxes
            .iter()
            .zip(&original.tensors)
            .map(|(b, t)| bend_tensor(b, t))
            .collect(),
    }
}

/// Replaces wire `w` by a snake: the wire enters a new cup whose other leg
/// comes from a new cap, and the cap's remaining leg continues to the old
/// consumer. The inverse of one yank.
pub fn insert_snake(d: &Diagram, w: usize) -> Diagram {
    let old = &d.wires[w];
    let t = old.ty;
    let cup = d.cups.len();
    let cap = d.caps.len();
    let shift = |x: usize| if x > w { x + 2 } else { x };

    let mut wires = Vec::with_capacity(d.wires.len() + 2);
    for (i, wire) in d.wires.iter().enumerate() {
        if i == w {
            wires.push(Wire { ty: t, source: wire.source, target: Target::Cup { index: cup, end: End::Left } });
            wires.push(Wire {
                ty: t.right(),
                source: Source::Cap { index: cap, end: End::Left },
                target: Target::Cup { index: cup, end: End::Right },
            });
            wires.push(Wire { ty: t, source: Source::Cap { index: cap, end: End::Right }, target: wire.target });
        } else {
            wires.push(wire.clone());
        }
    }
    // The old consumer now hangs off the continuation wire `w + 2`; a cap
    // that produced `w` still produces the first new wire.
    let mut out = Diagram {
        boxes: d.boxes.clone(),
        wires,
        cups: d.cups.iter().map(|p| p.map(|x| if x == w { w + 2 } else { shift(x) })).collect(),
        caps: d.caps.iter().map(|p| p.map(|x| if x == w { w } else { shift(x) })).collect(),
        open_wires: d.open_wires.iter().map(|&x| if x == w { w + 2 } else { shift(x) }).collect(),
    };
    out.cups.push([w, w + 1]);
    out.caps.push([w + 1, w + 2]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::{count_stats, eval_tensor, WireDims};
    use crate::pregroup::{parse_text, Lexicon, SimpleType};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lex() -> Lexicon {
        Lexicon::parse(
            "alice\tn\nbob\tn\nlikes\tn.r@s@n.l\nskillful\tn@n.l\nman\tn\nprepares\tn.r@s@n.l\nsauce\tn\ntasty\tn@n.l\n",
        )
        .unwrap()
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in RewriteScheme::ALL {
            assert_eq!(s.as_str().parse::<RewriteScheme>().unwrap(), s);
        }
        assert!("re_cur".parse::<RewriteScheme>().is_err());
    }

    #[test]
    fn re_is_identity() {
        let d = parse_text("skillful man prepares sauce", &lex()).unwrap();
        assert_eq!(rewrite(&d, RewriteScheme::Re).unwrap(), d);
    }

    #[test]
    fn curry_transitive_sentence() {
        let d = parse_text("Alice likes Bob", &lex()).unwrap();
        let c = rewrite(&d, RewriteScheme::ReNormCur).unwrap();
        assert!(validate(&c).is_empty());
        assert_eq!(c.cups.len(), 0);
        assert_eq!(c.boxes[1].dom.to_string(), "n@n");
        assert_eq!(c.boxes[1].cod.to_string(), "s");
        let st = count_stats(&c);
        assert_eq!((st.n_boxes, st.n_cups, st.max_width), (3, 0, 2));
        assert_eq!(st.open_types, vec![SimpleType::S]);
    }

    #[test]
    fn curry_adjective_sentence_preserves_semantics() {
        let d = parse_text("skillful man prepares tasty sauce", &lex()).unwrap();
        let c = curry(&d).unwrap();
        assert!(validate(&c).is_empty(), "{:?}", validate(&c));
        assert_eq!(c.cups.len(), 0);
        assert_eq!(c.boxes[0].fingerprint(), "n->n");
        assert_eq!(c.boxes[2].fingerprint(), "n@n->s");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = TensorAssignment::random(&d, WireDims::default(), &mut rng);
        let before = eval_tensor(&d, &a).unwrap();
        let after = eval_tensor(&c, &bend_assignment(&c, &a)).unwrap();
        assert!(before.max_abs_diff(&after) < 1e-10);
    }

    #[test]
    fn curry_leaves_adjoint_free_diagrams_alone() {
        let lex = Lexicon::parse("it\ts\n").unwrap();
        let d = parse_text("it", &lex).unwrap();
        assert_eq!(curry(&d).unwrap(), d);
    }

    #[test]
    fn curry_rejects_adjoint_to_adjoint_cup() {
        // n.l.l · n.l: both adjoint.
        let lex = Lexicon::parse("a\tn.l.l\nb\tn.l@s\n").unwrap();
        let d = parse_text("a b", &lex).unwrap();
        assert_eq!(d.cups.len(), 1);
        assert!(matches!(curry(&d), Err(RewriteError::CurryUnsupported { .. })));
    }

    #[test]
    fn snake_is_yanked() {
        let d = parse_text("Alice likes Bob", &lex()).unwrap();
        let snaky = insert_snake(&d, 0);
        assert!(validate(&snaky).is_empty(), "{:?}", validate(&snaky));
        assert_eq!(snaky.wires.len(), d.wires.len() + 2);
        let straight = normal_form(&snaky);
        assert_eq!(straight.wires.len(), snaky.wires.len() - 2);
        assert_eq!(straight, d);
    }

    #[test]
    fn mirrored_snake_is_yanked() {
        // The cap's left leg continues to the output, its right leg (s.l) is
        // cupped against the box's s arriving from the right.
        let s = SimpleType::S;
        let d = Diagram {
            boxes: vec![WordBox::word("x", s.into())],
            wires: vec![
                Wire { ty: s, source: Source::Cap { index: 0, end: End::Left }, target: Target::Open { position: 0 } },
                Wire { ty: s.left(), source: Source::Cap { index: 0, end: End::Right }, target: Target::Cup { index: 0, end: End::Left } },
                Wire { ty: s, source: Source::Box { index: 0, port: 0 }, target: Target::Cup { index: 0, end: End::Right } },
            ],
            cups: vec![[1, 2]],
            caps: vec![[0, 1]],
            open_wires: vec![0],
        };
        assert!(validate(&d).is_empty(), "{:?}", validate(&d));
        let y = normal_form(&d);
        assert!(validate(&y).is_empty());
        assert_eq!(y.wires.len(), 1);
        assert!(y.caps.is_empty() && y.cups.is_empty());
        assert_eq!(y.wires[0].source, Source::Box { index: 0, port: 0 });
        assert_eq!(y.wires[0].target, Target::Open { position: 0 });
        let a = TensorAssignment {
            dims: WireDims::default(),
            tensors: vec![DenseTensor::from_vec(&[2], vec![0.25, -2.0]).unwrap()],
        };
        assert_eq!(eval_tensor(&d, &a).unwrap(), eval_tensor(&y, &a).unwrap());
    }

    #[test]
    fn normal_form_fixpoint_and_idempotent() {
        let d = parse_text("skillful man prepares sauce", &lex()).unwrap();
        assert_eq!(normal_form(&d), d);
        let mut snaky = d.clone();
        for w in [0, 3, 6] {
            snaky = insert_snake(&snaky, w.min(snaky.wires.len() - 1));
        }
        let once = normal_form(&snaky);
        assert_eq!(normal_form(&once), once);
        assert!(once.caps.is_empty());
    }

    #[test]
    fn snakes_preserve_semantics() {
        let d = parse_text("skillful man prepares tasty sauce", &lex()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = TensorAssignment::random(&d, WireDims::default(), &mut rng);
        let expect = eval_tensor(&d, &a).unwrap();
        for w in 0..d.wires.len() {
            let snaky = insert_snake(&d, w);
            assert!(validate(&snaky).is_empty(), "wire {w}: {:?}", validate(&snaky));
            let got = eval_tensor(&snaky, &a).unwrap();
            assert!(got.max_abs_diff(&expect) < 1e-10);
            assert_eq!(normal_form(&snaky), d);
        }
    }
}
