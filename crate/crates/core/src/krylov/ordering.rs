//! Fill-reducing ordering by approximate minimum degree.
//!
//! The elimination is simulated on a quotient graph: eliminated pivots turn
//! into "elements" whose variable lists stand in for the cliques they would
//! create, so memory stays proportional to the input graph. Degrees are the
//! usual approximate external degrees (an upper bound on the true degree),
//! and elements swallowed by a newer element are absorbed.

use std::collections::BTreeSet;

use super::sparse::SparseSym;

/// Returns `perm` with `perm[k]` = original index eliminated at step `k`.
pub fn min_degree(a: &SparseSym) -> Vec<usize> {
    let n = a.dim();
    let mut adj_var: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (r, c, _) in a.lower_entries() {
        if r != c {
            adj_var[r].push(c);
            adj_var[c].push(r);
        }
    }
    for list in &mut adj_var {
        list.sort_unstable();
        list.dedup();
    }
    MinDegree::new(adj_var).run()
}

/// Ordering of the principal submatrix on `keep` induced by `perm`,
/// expressed in positions of `keep`.
///
/// Eliminating a principal submatrix in the induced order creates no fill
/// outside the fill of the full matrix, so one ordering serves several
/// nested blocks.
pub fn induced_ordering(perm: &[usize], keep: &[usize]) -> Vec<usize> {
    let mut pos = vec![usize::MAX; perm.len()];
    for (k, &g) in keep.iter().enumerate() {
        pos[g] = k;
    }
    perm.iter()
        .map(|&g| pos[g])
        .filter(|&k| k != usize::MAX)
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Variable,
    Element,
    Absorbed,
}

struct MinDegree {
    n: usize,
    adj_var: Vec<Vec<usize>>,
    adj_elt: Vec<Vec<usize>>,
    elt_vars: Vec<Vec<usize>>,
    status: Vec<Status>,
    degree: Vec<usize>,
    queue: BTreeSet<(usize, usize)>,
    mark: Vec<usize>,
    stamp: usize,
    ext: Vec<isize>,
    ext_stamp: Vec<usize>,
}

impl MinDegree {
    fn new(adj_var: Vec<Vec<usize>>) -> Self {
        let n = adj_var.len();
        let degree: Vec<usize> = adj_var.iter().map(Vec::len).collect();
        let queue = (0..n).map(|i| (degree[i], i)).collect();
        MinDegree {
            n,
            adj_var,
            adj_elt: vec![Vec::new(); n],
            elt_vars: vec![Vec::new(); n],
            status: vec![Status::Variable; n],
            degree,
            queue,
            mark: vec![0; n],
            stamp: 0,
            ext: vec![0; n],
            ext_stamp: vec![0; n],
        }
    }

    fn next_stamp(&mut self) -> usize {
        self.stamp += 1;
        self.stamp
    }

    fn run(mut self) -> Vec<usize> {
        let mut perm = Vec::with_capacity(self.n);
        let mut remaining = self.n;
        while let Some((_, p)) = self.queue.pop_first() {
            perm.push(p);
            remaining -= 1;
            self.eliminate(p, remaining);
        }
        perm
    }

    fn eliminate(&mut self, p: usize, remaining: usize) {
        // Gather the new element Lp = (A_p ∪ ⋃ L_e) \ {p}.
        let s = self.next_stamp();
        self.mark[p] = s;
        let mut lp = Vec::new();
        for &v in &self.adj_var[p] {
            if self.status[v] == Status::Variable && self.mark[v] != s {
                self.mark[v] = s;
                lp.push(v);
            }
        }
        let elts = std::mem::take(&mut self.adj_elt[p]);
        for &e in &elts {
            if self.status[e] != Status::Element {
                continue;
            }
            for &v in &self.elt_vars[e] {
                if self.status[v] == Status::Variable && self.mark[v] != s {
                    self.mark[v] = s;
                    lp.push(v);
                }
            }
            self.status[e] = Status::Absorbed;
            self.elt_vars[e] = Vec::new();
        }
        self.adj_var[p] = Vec::new();
        self.status[p] = Status::Element;

        // Prune lists of every variable in Lp and attach the new element.
        for &i in &lp {
            let status = &self.status;
            let mark = &self.mark;
            self.adj_var[i].retain(|&v| status[v] == Status::Variable && mark[v] != s);
            self.adj_elt[i].retain(|&e| status[e] == Status::Element);
            self.adj_elt[i].push(p);
        }

        // |L_e \ Lp| for every element touching Lp.
        let es = self.next_stamp();
        for &i in &lp {
            for &e in &self.adj_elt[i] {
                if e == p {
                    continue;
                }
                if self.ext_stamp[e] != es {
                    self.ext_stamp[e] = es;
                    self.ext[e] = self.elt_vars[e].len() as isize;
                }
                self.ext[e] -= 1;
            }
        }

        let lp_len = lp.len();
        for &i in &lp {
            let mut d = self.adj_var[i].len() + lp_len - 1;
            let mut absorbed = Vec::new();
            for &e in &self.adj_elt[i] {
                if e == p {
                    continue;
                }
                let ext = self.ext[e].max(0) as usize;
                if ext == 0 {
                    absorbed.push(e);
                } else {
                    d += ext;
                }
            }
            for e in absorbed {
                // Element entirely inside Lp: its clique is already covered.
                self.status[e] = Status::Absorbed;
                self.elt_vars[e] = Vec::new();
            }
            let d = d.min(remaining.saturating_sub(1));
            self.queue.remove(&(self.degree[i], i));
            self.degree[i] = d;
            self.queue.insert((d, i));
        }
        for &i in &lp {
            let status = &self.status;
            self.adj_elt[i].retain(|&e| status[e] == Status::Element);
        }
        self.elt_vars[p] = lp;
    }
}
