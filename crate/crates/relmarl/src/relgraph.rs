//! Directed weighted relational networks over agents.
//!
//! An edge `src -> dst` with weight `w` means agent `src` credits agent
//! `dst`'s reward at weight `w` in the team reward. Self-loops are ordinary
//! edges: a graph without an agent's self-loop drops that agent's own
//! reward from the team signal entirely.

use thiserror::Error;

/// One directed edge of a [`RelationalNetwork`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("agent count must be positive")]
    NoAgents,
    #[error("edge {src}->{dst}:{weight} references an agent outside 0..{n_agents}")]
    IndexOutOfRange {
        src: usize,
        dst: usize,
        weight: f64,
        n_agents: usize,
    },
    #[error("edge {src}->{dst}:{weight} has weight outside [0, 1]")]
    WeightOutOfRange { src: usize, dst: usize, weight: f64 },
    #[error("duplicate edge for ordered pair {src}->{dst} (second weight {weight})")]
    DuplicateEdge { src: usize, dst: usize, weight: f64 },
    #[error("network line {line:?} is not `agents = N` or `edge = SRC DST WEIGHT`")]
    Malformed { line: String },
    #[error("network section never declared `agents`")]
    MissingAgentCount,
}

/// Directed weighted graph over agent indices.
///
/// Immutable after construction; edges are held sorted by `(src, dst)` so
/// iteration order (and therefore floating-point summation order) is
/// deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationalNetwork {
    n_agents: usize,
    edges: Vec<Edge>,
}

impl RelationalNetwork {
    /// Validates and canonicalizes an edge list.
    pub fn new(n_agents: usize, edges: Vec<Edge>) -> Result<Self, GraphError> {
        if n_agents == 0 {
            return Err(GraphError::NoAgents);
        }
        let mut edges = edges;
        edges.sort_by_key(|e| (e.src, e.dst));
        for (i, e) in edges.iter().enumerate() {
            if e.src >= n_agents || e.dst >= n_agents {
                return Err(GraphError::IndexOutOfRange {
                    src: e.src,
                    dst: e.dst,
                    weight: e.weight,
                    n_agents,
                });
            }
            if !(0.0..=1.0).contains(&e.weight) || e.weight.is_nan() {
                return Err(GraphError::WeightOutOfRange {
                    src: e.src,
                    dst: e.dst,
                    weight: e.weight,
                });
            }
            if i > 0 && edges[i - 1].src == e.src && edges[i - 1].dst == e.dst {
                return Err(GraphError::DuplicateEdge {
                    src: e.src,
                    dst: e.dst,
                    weight: e.weight,
                });
            }
        }
        Ok(Self { n_agents, edges })
    }

    /// The self-interest graph on `n_agents`: one unit self-loop per agent.
    pub fn self_interest(n_agents: usize) -> Self {
        let edges = (0..n_agents)
            .map(|i| Edge {
                src: i,
                dst: i,
                weight: 1.0,
            })
            .collect();
        Self::new(n_agents, edges).expect("self-interest graph is always valid")
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    /// Edges in canonical `(src, dst)` order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Relationship-weighted team reward: sum over edges of
    /// `weight * rewards[dst]`.
    pub fn team_reward(&self, rewards: &[f64]) -> f64 {
        assert_eq!(
            rewards.len(),
            self.n_agents,
            "reward vector length {} does not match agent count {}",
            rewards.len(),
            self.n_agents
        );
        let mut total = 0.0;
        for e in &self.edges {
            total += e.weight * rewards[e.dst];
        }
        total
    }

    /// True iff the graph is exactly one self-loop of weight 1.0 per agent,
    /// the configuration under which the weighted team reward degenerates
    /// to the plain sum of rewards.
    pub fn is_self_interest(&self) -> bool {
        self.edges.len() == self.n_agents
            && self
                .edges
                .iter()
                .enumerate()
                .all(|(i, e)| e.src == i && e.dst == i && e.weight == 1.0)
    }

    /// Parses a network config fragment of the form
    ///
    /// ```text
    /// agents = 2
    /// edge = 0 0 1.0
    /// edge = 1 1 1.0
    /// edge = 0 1 0.5
    /// ```
    ///
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        let mut n_agents: Option<usize> = None;
        let mut edges = Vec::new();
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| GraphError::Malformed {
                line: raw.to_string(),
            })?;
            match key.trim() {
                "agents" => {
                    n_agents =
                        Some(value.trim().parse().map_err(|_| GraphError::Malformed {
                            line: raw.to_string(),
                        })?);
                }
                "edge" => {
                    let parts: Vec<&str> = value.split_whitespace().collect();
                    if parts.len() != 3 {
                        return Err(GraphError::Malformed {
                            line: raw.to_string(),
                        });
                    }
                    let parse_err = || GraphError::Malformed {
                        line: raw.to_string(),
                    };
                    edges.push(Edge {
                        src: parts[0].parse().map_err(|_| parse_err())?,
                        dst: parts[1].parse().map_err(|_| parse_err())?,
                        weight: parts[2].parse().map_err(|_| parse_err())?,
                    });
                }
                _ => {
                    return Err(GraphError::Malformed {
                        line: raw.to_string(),
                    })
                }
            }
        }
        Self::new(n_agents.ok_or(GraphError::MissingAgentCount)?, edges)
    }

    /// Serializes back to the config fragment format accepted by
    /// [`RelationalNetwork::parse`].
    pub fn to_config_fragment(&self) -> String {
        let mut out = format!("agents = {}\n", self.n_agents);
        for e in &self.edges {
            out.push_str(&format!("edge = {} {} {}\n", e.src, e.dst, e.weight));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn worked_example() -> RelationalNetwork {
        RelationalNetwork::parse("agents = 2\nedge = 0 0 1.0\nedge = 1 1 1.0\nedge = 0 1 0.5")
            .unwrap()
    }

    #[test]
    fn parse_worked_example() {
        let net = worked_example();
        assert_eq!(net.n_agents(), 2);
        assert_eq!(net.edges().len(), 3);
        // Team reward of (10, 4) is 10 + 1.5 * 4.
        assert_eq!(net.team_reward(&[10.0, 4.0]), 16.0);
    }

    #[test]
    fn parse_singleton() {
        let net = RelationalNetwork::parse("agents = 1\nedge = 0 0 1.0").unwrap();
        assert!(net.is_self_interest());
        assert_eq!(net.team_reward(&[3.5]), 3.5);
    }

    #[test]
    fn parse_rejects_out_of_range_index() {
        let err = RelationalNetwork::parse("agents = 2\nedge = 0 3 0.5").unwrap_err();
        assert_eq!(
            err,
            GraphError::IndexOutOfRange {
                src: 0,
                dst: 3,
                weight: 0.5,
                n_agents: 2
            }
        );
    }

    #[test]
    fn parse_rejects_weight_outside_unit_interval() {
        let err = RelationalNetwork::parse("agents = 2\nedge = 0 1 1.5").unwrap_err();
        assert!(matches!(err, GraphError::WeightOutOfRange { .. }));
        let err = RelationalNetwork::parse("agents = 2\nedge = 0 1 -0.1").unwrap_err();
        assert!(matches!(err, GraphError::WeightOutOfRange { .. }));
    }

    #[test]
    fn parse_rejects_duplicate_ordered_pair() {
        let err =
            RelationalNetwork::parse("agents = 2\nedge = 0 1 0.5\nedge = 0 1 0.3").unwrap_err();
        assert_eq!(
            err,
            GraphError::DuplicateEdge {
                src: 0,
                dst: 1,
                weight: 0.3
            }
        );
    }

    #[test]
    fn parse_rejects_garbage_lines() {
        assert!(matches!(
            RelationalNetwork::parse("agents = 2\nedge = 0 1").unwrap_err(),
            GraphError::Malformed { .. }
        ));
        assert_eq!(
            RelationalNetwork::parse("edge = 0 0 1.0").unwrap_err(),
            GraphError::MissingAgentCount
        );
    }

    #[test]
    fn team_reward_self_interest_is_plain_sum() {
        let net = RelationalNetwork::self_interest(2);
        assert_eq!(net.team_reward(&[3.0, -1.0]), 2.0);
    }

    #[test]
    fn team_reward_no_edges_is_zero() {
        let net = RelationalNetwork::new(2, vec![]).unwrap();
        assert_eq!(net.team_reward(&[5.0, 5.0]), 0.0);
    }

    #[test]
    #[should_panic(expected = "reward vector length")]
    fn team_reward_panics_on_length_mismatch() {
        worked_example().team_reward(&[1.0]);
    }

    #[test]
    fn self_interest_detection() {
        assert!(RelationalNetwork::self_interest(2).is_self_interest());
        assert!(!worked_example().is_self_interest());
        let weak_loop = RelationalNetwork::new(
            1,
            vec![Edge {
                src: 0,
                dst: 0,
                weight: 0.9,
            }],
        )
        .unwrap();
        assert!(!weak_loop.is_self_interest());
        // A non-loop edge alone is not self-interest even with count == n.
        let cross = RelationalNetwork::new(
            2,
            vec![
                Edge {
                    src: 0,
                    dst: 1,
                    weight: 1.0,
                },
                Edge {
                    src: 1,
                    dst: 1,
                    weight: 1.0,
                },
            ],
        )
        .unwrap();
        assert!(!cross.is_self_interest());
    }

    #[test]
    fn config_fragment_round_trip() {
        let net = worked_example();
        let again = RelationalNetwork::parse(&net.to_config_fragment()).unwrap();
        assert_eq!(net, again);
    }

    fn arb_network(max_agents: usize) -> impl Strategy<Value = RelationalNetwork> {
        (1..=max_agents)
            .prop_flat_map(|n| {
                let edge = (0..n, 0..n, 0.0f64..=1.0).prop_map(|(src, dst, weight)| Edge {
                    src,
                    dst,
                    weight,
                });
                (Just(n), proptest::collection::vec(edge, 0..=n * n))
            })
            .prop_map(|(n, mut edges)| {
                edges.sort_by_key(|e| (e.src, e.dst));
                edges.dedup_by_key(|e| (e.src, e.dst));
                RelationalNetwork::new(n, edges).unwrap()
            })
    }

    proptest! {
        #[test]
        fn team_reward_is_linear(
            net in arb_network(4),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = net.n_agents();
            let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let mixed: Vec<f64> = r.iter().zip(&q).map(|(x, y)| a * x + b * y).collect();
            let lhs = net.team_reward(&mixed);
            let rhs = a * net.team_reward(&r) + b * net.team_reward(&q);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs().max(rhs.abs())));
        }

        #[test]
        fn self_interest_reduces_to_sum_exactly(n in 1usize..=4, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let net = RelationalNetwork::self_interest(n);
            let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect();
            let sum: f64 = r.iter().sum();
            prop_assert_eq!(net.team_reward(&r), sum);
        }

        #[test]
        fn team_reward_is_permutation_consistent(net in arb_network(4), seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = net.n_agents();
            let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();

            // Relabel agents by a rotation and permute the rewards identically.
            let perm: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
            let edges: Vec<Edge> = net
                .edges()
                .iter()
                .map(|e| Edge { src: perm[e.src], dst: perm[e.dst], weight: e.weight })
                .collect();
            let relabeled = RelationalNetwork::new(n, edges).unwrap();
            let mut r_perm = vec![0.0; n];
            for i in 0..n {
                r_perm[perm[i]] = r[i];
            }
            let lhs = net.team_reward(&r);
            let rhs = relabeled.team_reward(&r_perm);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }
}
