use std::collections::BTreeSet;

const NEIGHBORS: [(isize, isize); 8] = [(-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)];

/// grow-diag-final symmetrization of two directional alignments.
///
/// Both inputs are `(src_idx, tgt_idx)` pairs. Starts from the intersection,
/// grows into union points adjacent (including diagonally) to existing points
/// whenever one of their words is still unaligned, then adds remaining union
/// points from each direction under the same condition.
pub fn grow_diag_final(
    src_len: usize,
    tgt_len: usize,
    s2t: &[(usize, usize)],
    t2s: &[(usize, usize)],
) -> Vec<(usize, usize)> {
    let a: BTreeSet<(usize, usize)> = s2t.iter().copied().collect();
    let b: BTreeSet<(usize, usize)> = t2s.iter().copied().collect();
    let union: BTreeSet<(usize, usize)> = a.union(&b).copied().collect();
    let mut points: BTreeSet<(usize, usize)> = a.intersection(&b).copied().collect();

    let mut src_aligned = vec![false; src_len];
    let mut tgt_aligned = vec![false; tgt_len];
    for &(i, j) in &points {
        src_aligned[i] = true;
        tgt_aligned[j] = true;
    }

    fn add(p: (usize, usize), points: &mut BTreeSet<(usize, usize)>, src_aligned: &mut [bool], tgt_aligned: &mut [bool]) {
        points.insert(p);
        src_aligned[p.0] = true;
        tgt_aligned[p.1] = true;
    }

    loop {
        let mut added = false;
        for i in 0..src_len {
            for j in 0..tgt_len {
                if !points.contains(&(i, j)) {
                    continue;
                }
                for (di, dj) in NEIGHBORS {
                    let (Some(ni), Some(nj)) = (i.checked_add_signed(di), j.checked_add_signed(dj)) else {
                        continue;
                    };
                    if ni >= src_len || nj >= tgt_len {
                        continue;
                    }
                    let p = (ni, nj);
                    if (!src_aligned[ni] || !tgt_aligned[nj]) && union.contains(&p) && !points.contains(&p) {
                        add(p, &mut points, &mut src_aligned, &mut tgt_aligned);
                        added = true;
                    }
                }
            }
        }
        if !added {
            break;
        }
    }

    for direction in [&a, &b] {
        for i in 0..src_len {
            for j in 0..tgt_len {
                let p = (i, j);
                if direction.contains(&p) && !points.contains(&p) && (!src_aligned[i] || !tgt_aligned[j]) {
                    add(p, &mut points, &mut src_aligned, &mut tgt_aligned);
                }
            }
        }
    }
    points.into_iter().collect()
}
