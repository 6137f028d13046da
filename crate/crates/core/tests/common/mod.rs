//! Test-only oracles, kept independent of the library's code paths.

#![allow(dead_code)]

/// Literal transcription of the scanline matching pseudocode, using signed
/// arithmetic and the original nesting. `(xi, yi)` is the I-th point and
/// `(xj, yj)` the J-th point.
pub fn pseudocode_distance(xi: i64, yi: i64, xj: i64, yj: i64, width: i64) -> i64 {
    let mut distance: i64;
    if yi == yj {
        distance = xj - xi;
        if distance < 0 {
            distance *= -1;
        }
    } else if yi > yj {
        if yi - yj == 1 || yi - yj == -1 {
            distance = 0;
        } else if yi - yj == 2 || yi - yj == -2 {
            distance = yi - yj;
        } else {
            distance = (yi - yj) - 2;
            distance = (distance * width) + (width - xj) + xi;
        }
    } else if yi - yj == 1 || yi - yj == -1 {
        distance = 0;
    } else if yi - yj == 2 || yi - yj == -2 {
        distance = yj - yi;
    } else {
        distance = (yj - yi) - 2;
        distance = (distance * width) + (width - xi) + xj;
    }
    distance
}

/// Maximum cardinality matching between two value lists where elements pair
/// iff they differ by at most `tol`. Exhaustive augmenting-path search.
pub fn brute_force_overlap(a: &[u64], b: &[u64], tol: u64) -> usize {
    fn augment(
        u: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for &v in &adj[u] {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            if owner[v].is_none() || augment(owner[v].unwrap(), adj, seen, owner) {
                owner[v] = Some(u);
                return true;
            }
        }
        false
    }
    let adj: Vec<Vec<usize>> = a
        .iter()
        .map(|&x| {
            b.iter()
                .enumerate()
                .filter(|(_, &y)| x.abs_diff(y) <= tol)
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    let mut owner = vec![None; b.len()];
    let mut total = 0;
    for u in 0..a.len() {
        let mut seen = vec![false; b.len()];
        if augment(u, &adj, &mut seen, &mut owner) {
            total += 1;
        }
    }
    total
}

/// Number of 8-connected components of a boolean grid (row-major).
pub fn components(cells: &[bool], width: usize, height: usize) -> Vec<Vec<usize>> {
    let mut label = vec![usize::MAX; cells.len()];
    let mut out = Vec::new();
    for start in 0..cells.len() {
        if !cells[start] || label[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![];
        let mut stack = vec![start];
        label[start] = id;
        while let Some(p) = stack.pop() {
            members.push(p);
            let (x, y) = ((p % width) as i64, (p / width) as i64);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= width as i64 || ny >= height as i64 {
                        continue;
                    }
                    let q = ny as usize * width + nx as usize;
                    if cells[q] && label[q] == usize::MAX {
                        label[q] = id;
                        stack.push(q);
                    }
                }
            }
        }
        out.push(members);
    }
    out
}
