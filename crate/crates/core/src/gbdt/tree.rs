use serde::{Deserialize, Serialize};

/// Second-order gain of splitting a node into left/right children.
pub fn split_gain(g_left: f64, h_left: f64, g_right: f64, h_right: f64, reg_lambda: f64) -> f64 {
    let g = g_left + g_right;
    let h = h_left + h_right;
    0.5 * (g_left * g_left / (h_left + reg_lambda) + g_right * g_right / (h_right + reg_lambda)
        - g * g / (h + reg_lambda))
}

/// Instances with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TreeNode {
    Leaf {
        weight: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        cover: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { weight } => return *weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if x[*feature] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    /// Depth counted in edges; a lone leaf has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn max_feature(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Split {
                feature,
                left,
                right,
                ..
            } => Some(
                [Some(*feature), left.max_feature(), right.max_feature()]
                    .into_iter()
                    .flatten()
                    .max()
                    .unwrap(),
            ),
        }
    }

    /// Leaves reachable by a hybrid of `x` and `b`, each with the membership
    /// constraints a coalition must satisfy to reach it. Along a path, a
    /// split where `x` and `b` disagree forks into "feature taken from x"
    /// (bit set in the first mask) and "taken from b" (second mask).
    pub(crate) fn hybrid_leaves(&self, x: &[f64], b: &[f64], out: &mut Vec<(u64, u64, f64)>) {
        self.hybrid_walk(x, b, 0, 0, out);
    }

    fn hybrid_walk(
        &self,
        x: &[f64],
        b: &[f64],
        from_x: u64,
        from_b: u64,
        out: &mut Vec<(u64, u64, f64)>,
    ) {
        match self {
            TreeNode::Leaf { weight } => out.push((from_x, from_b, *weight)),
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                let bit = 1u64 << feature;
                let child = |go_left: bool| if go_left { left } else { right };
                let x_left = x[*feature] <= *threshold;
                let b_left = b[*feature] <= *threshold;
                if x_left == b_left || from_x & bit != 0 {
                    child(x_left).hybrid_walk(x, b, from_x, from_b, out);
                } else if from_b & bit != 0 {
                    child(b_left).hybrid_walk(x, b, from_x, from_b, out);
                } else {
                    child(x_left).hybrid_walk(x, b, from_x | bit, from_b, out);
                    child(b_left).hybrid_walk(x, b, from_x, from_b | bit, out);
                }
            }
        }
    }
}

pub(crate) struct TreeParams {
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub reg_lambda: f64,
    pub learning_rate: f64,
}

enum ArenaKind {
    Leaf,
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        left: usize,
        right: usize,
    },
}

struct ArenaNode {
    g: f64,
    h: f64,
    kind: ArenaKind,
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    g_left: f64,
    h_left: f64,
}

#[derive(Clone, Copy, Default)]
struct ScanState {
    g: f64,
    h: f64,
    last: f64,
    seen: bool,
}

const NONE: usize = usize::MAX;

/// Exact greedy, level-wise tree growth over pre-sorted feature columns.
pub(crate) struct TreeBuilder<'a> {
    /// Column-major encoded features.
    pub cols: &'a [Vec<f64>],
    /// Per feature, row indices ordered by (value, row index).
    pub sorted: &'a [Vec<u32>],
    pub params: TreeParams,
}

impl TreeBuilder<'_> {
    /// Grows one tree on `rows` restricted to `features` (ascending). Split
    /// gains are added to `importance`.
    pub fn build(
        &self,
        grad: &[f64],
        hess: &[f64],
        rows: &[usize],
        features: &[usize],
        importance: &mut [f64],
    ) -> TreeNode {
        let n = grad.len();
        let p = &self.params;
        let mut pos = vec![NONE; n];
        let (mut g0, mut h0) = (0.0, 0.0);
        for &i in rows {
            pos[i] = 0;
            g0 += grad[i];
            h0 += hess[i];
        }
        let mut arena = vec![ArenaNode {
            g: g0,
            h: h0,
            kind: ArenaKind::Leaf,
        }];
        let mut open: Vec<usize> = vec![0];
        let mut depth = 0;
        while !open.is_empty() && depth < p.max_depth {
            let mut slot_of = vec![NONE; arena.len()];
            for (s, &node) in open.iter().enumerate() {
                slot_of[node] = s;
            }
            let mut best: Vec<Option<Candidate>> = vec![None; open.len()];
            let mut state = vec![ScanState::default(); open.len()];
            for &f in features {
                state.iter_mut().for_each(|s| *s = ScanState::default());
                let col = &self.cols[f];
                for &i in &self.sorted[f] {
                    let i = i as usize;
                    let node = pos[i];
                    if node == NONE || slot_of[node] == NONE {
                        continue;
                    }
                    let slot = slot_of[node];
                    let v = col[i];
                    let st = &mut state[slot];
                    if st.seen && v > st.last {
                        let parent = &arena[node];
                        let (gl, hl) = (st.g, st.h);
                        let (gr, hr) = (parent.g - gl, parent.h - hl);
                        if hl >= p.min_child_weight && hr >= p.min_child_weight {
                            let gain = split_gain(gl, hl, gr, hr, p.reg_lambda);
                            if best[slot].is_none_or(|b| gain > b.gain) {
                                let mut threshold = 0.5 * (st.last + v);
                                if threshold >= v {
                                    threshold = st.last;
                                }
                                best[slot] = Some(Candidate {
                                    gain,
                                    feature: f,
                                    threshold,
                                    g_left: gl,
                                    h_left: hl,
                                });
                            }
                        }
                    }
                    st.g += grad[i];
                    st.h += hess[i];
                    st.last = v;
                    st.seen = true;
                }
            }

            // Maps a splitting node to its (left, right) arena ids.
            let mut children = vec![(NONE, NONE); arena.len()];
            let mut next_open = Vec::new();
            for (slot, &node) in open.iter().enumerate() {
                let Some(c) = best[slot].filter(|c| c.gain > 0.0) else {
                    continue;
                };
                let (g, h) = (arena[node].g, arena[node].h);
                let left = arena.len();
                arena.push(ArenaNode {
                    g: c.g_left,
                    h: c.h_left,
                    kind: ArenaKind::Leaf,
                });
                arena.push(ArenaNode {
                    g: g - c.g_left,
                    h: h - c.h_left,
                    kind: ArenaKind::Leaf,
                });
                arena[node].kind = ArenaKind::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    gain: c.gain,
                    left,
                    right: left + 1,
                };
                importance[c.feature] += c.gain;
                children[node] = (left, left + 1);
                next_open.push(left);
                next_open.push(left + 1);
            }
            if next_open.is_empty() {
                break;
            }
            for &i in rows {
                let node = pos[i];
                if node == NONE || children[node].0 == NONE {
                    continue;
                }
                if let ArenaKind::Split {
                    feature, threshold, ..
                } = arena[node].kind
                {
                    pos[i] = if self.cols[feature][i] <= threshold {
                        children[node].0
                    } else {
                        children[node].1
                    };
                }
            }
            open = next_open;
            depth += 1;
        }
        to_nested(&arena, 0, p)
    }
}

fn to_nested(arena: &[ArenaNode], id: usize, p: &TreeParams) -> TreeNode {
    let node = &arena[id];
    match node.kind {
        ArenaKind::Leaf => TreeNode::Leaf {
            weight: -node.g / (node.h + p.reg_lambda) * p.learning_rate,
        },
        ArenaKind::Split {
            feature,
            threshold,
            gain,
            left,
            right,
        } => TreeNode::Split {
            feature,
            threshold,
            gain,
            cover: node.h,
            left: Box::new(to_nested(arena, left, p)),
            right: Box::new(to_nested(arena, right, p)),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gain_worked_example() {
        // 0.5 * (16/3 + 36/4 - 4/6)
        let expect = 0.5 * (16.0 / 3.0 + 9.0 - 2.0 / 3.0);
        assert_abs_diff_eq!(
            split_gain(-4.0, 2.0, 6.0, 3.0, 1.0),
            expect,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            split_gain(-4.0, 2.0, 6.0, 3.0, 1.0),
            6.833333333333333,
            epsilon = 1e-4
        );
    }

    #[test]
    fn gain_zero_gradients() {
        assert_eq!(split_gain(0.0, 5.0, 0.0, 7.0, 1.0), 0.0);
    }

    #[test]
    fn gain_symmetric_halves() {
        let (g, h, l) = (3.0, 4.0, 1.0);
        let expect = g * g / (h + l) - 2.0 * g * g / (2.0 * h + l);
        assert_abs_diff_eq!(split_gain(g, h, g, h, l), expect, epsilon = 1e-12);
    }

    fn stump() -> TreeNode {
        TreeNode::Split {
            feature: 0,
            threshold: 0.5,
            gain: 1.0,
            cover: 2.0,
            left: Box::new(TreeNode::Leaf { weight: -1.0 }),
            right: Box::new(TreeNode::Leaf { weight: 1.0 }),
        }
    }

    #[test]
    fn predict_follows_threshold() {
        let t = stump();
        assert_eq!(t.predict(&[0.2]), -1.0);
        assert_eq!(t.predict(&[0.5]), -1.0);
        assert_eq!(t.predict(&[0.7]), 1.0);
        assert_eq!(t.depth(), 1);
        assert_eq!(t.max_feature(), Some(0));
    }

    #[test]
    fn hybrid_leaves_fork_on_disagreement() {
        let t = stump();
        let mut out = Vec::new();
        t.hybrid_leaves(&[0.2], &[0.9], &mut out);
        assert_eq!(out, vec![(1, 0, -1.0), (0, 1, 1.0)]);
        out.clear();
        t.hybrid_leaves(&[0.2], &[0.3], &mut out);
        assert_eq!(out, vec![(0, 0, -1.0)]);
    }

    #[test]
    fn single_instance_leaf_fits_residual() {
        // one row, residual r: gradient -r, hessian 1, lambda 0, lr 1
        let r = 3.25;
        let cols = vec![vec![0.0]];
        let sorted = vec![vec![0u32]];
        let b = TreeBuilder {
            cols: &cols,
            sorted: &sorted,
            params: TreeParams {
                max_depth: 3,
                min_child_weight: 0.0,
                reg_lambda: 0.0,
                learning_rate: 1.0,
            },
        };
        let mut imp = vec![0.0];
        let t = b.build(&[-r], &[1.0], &[0], &[0], &mut imp);
        assert_eq!(t, TreeNode::Leaf { weight: r });
    }

    #[test]
    fn builder_finds_clean_split_with_lowest_threshold_tie() {
        // residuals -1,-1,+1,+1 on x = 0,1,2,3: best split between 1 and 2
        let cols = vec![vec![0.0, 1.0, 2.0, 3.0], vec![5.0, 5.0, 5.0, 5.0]];
        let sorted = vec![vec![0, 1, 2, 3], vec![0, 1, 2, 3]];
        let b = TreeBuilder {
            cols: &cols,
            sorted: &sorted,
            params: TreeParams {
                max_depth: 1,
                min_child_weight: 1.0,
                reg_lambda: 0.0,
                learning_rate: 1.0,
            },
        };
        let grad = [1.0, 1.0, -1.0, -1.0];
        let mut imp = vec![0.0, 0.0];
        let t = b.build(&grad, &[1.0; 4], &[0, 1, 2, 3], &[0, 1], &mut imp);
        match t {
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                assert_eq!(feature, 0);
                assert_eq!(threshold, 1.5);
                assert_eq!(*left, TreeNode::Leaf { weight: -1.0 });
                assert_eq!(*right, TreeNode::Leaf { weight: 1.0 });
            }
            _ => panic!("expected split"),
        }
        assert!(imp[0] > 0.0);
        assert_eq!(imp[1], 0.0);
    }
}
