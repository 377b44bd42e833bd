//! Maximum bipartite matching (Kuhn's augmenting paths). Instance sets here
//! are tiny, so the simple O(V·E) algorithm is plenty.

pub struct BipartiteGraph {
    adj: Vec<Vec<usize>>,
    right: usize,
}

impl BipartiteGraph {
    pub fn new(left: usize, right: usize) -> Self {
        BipartiteGraph { adj: vec![Vec::new(); left], right }
    }

    pub fn add_edge(&mut self, l: usize, r: usize) {
        debug_assert!(r < self.right);
        self.adj[l].push(r);
    }

    pub fn max_matching(&self) -> usize {
        let mut matched_right: Vec<Option<usize>> = vec![None; self.right];
        let mut count = 0;
        for l in 0..self.adj.len() {
            let mut used = vec![false; self.adj.len()];
            if self.try_augment(l, &mut used, &mut matched_right) {
                count += 1;
            }
        }
        count
    }

    fn try_augment(
        &self,
        l: usize,
        used: &mut Vec<bool>,
        matched_right: &mut Vec<Option<usize>>,
    ) -> bool {
        if used[l] {
            return false;
        }
        used[l] = true;
        for &r in &self.adj[l] {
            let free = match matched_right[r] {
                None => true,
                Some(prev) => self.try_augment(prev, used, matched_right),
            };
            if free {
                matched_right[r] = Some(l);
                return true;
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_matching() {
        let mut g = BipartiteGraph::new(3, 3);
        for (l, r) in [(0, 0), (0, 1), (1, 1), (2, 2)] {
            g.add_edge(l, r);
        }
        assert_eq!(g.max_matching(), 3);
    }

    #[test]
    fn contended_vertex_limits_matching() {
        let mut g = BipartiteGraph::new(3, 3);
        // everyone wants r=0 only
        for l in 0..3 {
            g.add_edge(l, 0);
        }
        assert_eq!(g.max_matching(), 1);
    }

    #[test]
    fn empty_graph() {
        let g = BipartiteGraph::new(4, 4);
        assert_eq!(g.max_matching(), 0);
    }

    #[test]
    fn augmenting_path_is_found() {
        // l0-r0, l1-{r0,r1}: naive greedy would strand l0 if l1 takes r0
        let mut g = BipartiteGraph::new(2, 2);
        g.add_edge(0, 0);
        g.add_edge(1, 0);
        g.add_edge(1, 1);
        assert_eq!(g.max_matching(), 2);
    }
}
