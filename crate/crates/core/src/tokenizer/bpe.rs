use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{TokenId, TokenizerSpec};

#[derive(Clone, Copy)]
struct Symbol {
    id: TokenId,
    prev: Option<usize>,
    next: Option<usize>,
    len: usize,
}

/// Applies the merge rules to one pre-token and appends the resulting ids.
///
/// Lowest rank merges first; among equal ranks the leftmost pair wins.
/// Bytes the vocabulary cannot represent are skipped.
pub(super) fn merge_word(spec: &TokenizerSpec, word: &[u8], out: &mut Vec<TokenId>) {
    let kept: Vec<u8>;
    let word = if word.iter().all(|&b| spec.byte_tokens[b as usize].is_some()) {
        word
    } else {
        kept = word
            .iter()
            .copied()
            .filter(|&b| spec.byte_tokens[b as usize].is_some())
            .collect();
        &kept[..]
    };
    if word.is_empty() {
        return;
    }
    let byte = |b: u8| spec.byte_tokens[b as usize].expect("filtered above");
    if word.len() == 1 {
        out.push(byte(word[0]));
        return;
    }
    let n = word.len();
    let mut symbols: Vec<Symbol> = word
        .iter()
        .enumerate()
        .map(|(i, &b)| Symbol {
            id: byte(b),
            prev: i.checked_sub(1),
            next: (i + 1 < n).then_some(i + 1),
            len: 1,
        })
        .collect();

    // (rank, left position, left id, right id)
    let mut heap: BinaryHeap<Reverse<(u32, usize, TokenId, TokenId)>> = BinaryHeap::new();
    let push_pair = |heap: &mut BinaryHeap<_>, symbols: &[Symbol], left: usize| {
        if let Some(right) = symbols[left].next {
            let (a, b) = (symbols[left].id, symbols[right].id);
            if let Some(&(rank, _)) = spec.merges.get(&(a, b)) {
                heap.push(Reverse((rank, left, a, b)));
            }
        }
    };
    for i in 0..n.saturating_sub(1) {
        push_pair(&mut heap, &symbols, i);
    }

    while let Some(Reverse((_, left, a, b))) = heap.pop() {
        // skip stale entries
        let sym = symbols[left];
        if sym.len == 0 || sym.id != a {
            continue;
        }
        let Some(right) = sym.next else { continue };
        if symbols[right].id != b {
            continue;
        }
        let (_, merged) = spec.merges[&(a, b)];
        let right_sym = symbols[right];
        symbols[left].id = merged;
        symbols[left].len += right_sym.len;
        symbols[left].next = right_sym.next;
        symbols[right].len = 0;
        if let Some(nn) = right_sym.next {
            symbols[nn].prev = Some(left);
        }
        if let Some(p) = symbols[left].prev {
            push_pair(&mut heap, &symbols, p);
        }
        push_pair(&mut heap, &symbols, left);
    }

    let mut cur = Some(0);
    while let Some(i) = cur {
        out.push(symbols[i].id);
        cur = symbols[i].next;
    }
}
