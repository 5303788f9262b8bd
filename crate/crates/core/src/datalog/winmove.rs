use std::collections::{BTreeMap, BTreeSet};

use crate::relcore::{adom, Constant, Fact, Instance};

/// Won positions of the win-move game over `move/2`.
///
/// Alternating fixpoint starting from empty won/lost sets: a position is
/// lost when every move leads to a won position, and won when some move
/// leads to a lost position. Drawn positions are silent.
pub fn winmove(inst: &Instance) -> Instance {
    let positions = adom(inst);
    let mut succ: BTreeMap<&Constant, Vec<&Constant>> = BTreeMap::new();
    for f in inst.relation("move") {
        if let [from, to] = f.args() {
            succ.entry(from).or_default().push(to);
        }
    }
    let no_moves = Vec::new();
    let mut won: BTreeSet<&Constant> = BTreeSet::new();
    let mut lost: BTreeSet<&Constant> = BTreeSet::new();
    loop {
        let next_lost: BTreeSet<&Constant> = positions
            .iter()
            .filter(|p| {
                succ.get(p)
                    .unwrap_or(&no_moves)
                    .iter()
                    .all(|s| won.contains(s))
            })
            .collect();
        let next_won: BTreeSet<&Constant> = positions
            .iter()
            .filter(|p| {
                succ.get(p)
                    .unwrap_or(&no_moves)
                    .iter()
                    .any(|s| next_lost.contains(s))
            })
            .collect();
        if next_lost == lost && next_won == won {
            break;
        }
        lost = next_lost;
        won = next_won;
    }
    won.into_iter()
        .map(|c| Fact::new("won", vec![c.clone()]))
        .collect()
}
