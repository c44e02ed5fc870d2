//! Chlorine transport plants built from a declarative network description.
//!
//! Discretization is plug flow at Courant number one: every pipe segment holds
//! exactly one quality step of water, so the concentration in segment `s`
//! moves to segment `s + 1` each step and decays by `φ = exp(−decay·dt)`.
//! Junctions mix their inflows by flow, tanks are completely stirred, and
//! pumps and valves are one-step pass-throughs without decay. The result is
//! exactly LTI for a fixed hydraulic state.
//!
//! State order: node concentrations in declaration order, then the segments
//! of each link in declaration order (upstream first).
//!
//! Reservoirs are fixed-concentration boundaries. The model is written in
//! deviations from that boundary, so a reservoir's row of `A` is zero: it
//! emits whatever is injected at it and nothing else.

use std::collections::HashMap;
use std::path::Path;

use faer::Mat;
use petgraph::algo::dijkstra;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti_model::StateSpaceModel;
use crate::scalar::Real;

const THREE_NODE_JSON: &str = include_str!("../presets/three_node.json");
const NET1_JSON: &str = include_str!("../presets/net1.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Junction,
    Reservoir,
    Tank,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Pipe,
    Pump,
    Valve,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    pub kind: NodeKind,
    /// m³/s withdrawn (junctions).
    #[serde(default)]
    pub demand: f64,
    /// m³ (tanks).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tank_volume: Option<f64>,
    /// mg/L (reservoirs). Informational: the plant is in deviation form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reservoir_concentration: Option<f64>,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub id: String,
    pub kind: LinkKind,
    pub from: String,
    pub to: String,
    /// m³/s; negative means water moves from `to` to `from`.
    pub flow: f64,
    /// Residence time in quality steps (pumps and valves: 1).
    #[serde(default = "one")]
    pub n_segments: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    #[serde(default)]
    pub name: String,
    pub nodes: Vec<NodeSpec>,
    pub links: Vec<LinkSpec>,
    /// First-order bulk decay, 1/s.
    pub decay_rate: f64,
    /// Quality step, s.
    pub dt: f64,
    /// Nodes with a booster; one input channel each, in order.
    pub boosters: Vec<String>,
    /// Nodes with a sensor; one output channel each, in order.
    pub sensors: Vec<String>,
}

/// Where each element lives in the state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct StateLayout {
    pub n_x: usize,
    /// State index of node `i`.
    pub node: Vec<usize>,
    /// State index of the first (upstream) segment of link `l`.
    pub link_first: Vec<usize>,
    pub labels: Vec<String>,
}

/// A link with its direction resolved from the sign of its flow.
#[derive(Clone, Copy, Debug)]
struct Arc {
    link: usize,
    up: usize,
    down: usize,
    q: f64,
}

pub fn three_node_preset() -> NetworkSpec {
    NetworkSpec::from_json(THREE_NODE_JSON).expect("bundled preset parses")
}

pub fn net1_preset() -> NetworkSpec {
    NetworkSpec::from_json(NET1_JSON).expect("bundled preset parses")
}

/// Looks up a bundled preset by name (`three-node` or `net1`).
pub fn preset(name: &str) -> Result<NetworkSpec> {
    match name {
        "three-node" | "three_node" | "threenode" => Ok(three_node_preset()),
        "net1" => Ok(net1_preset()),
        _ => Err(Error::arg(format!("unknown preset {name:?} (known: three-node, net1)"))),
    }
}

impl NetworkSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn n_u(&self) -> usize {
        self.boosters.len()
    }

    pub fn n_y(&self) -> usize {
        self.sensors.len()
    }

    fn index(&self) -> Result<HashMap<&str, usize>> {
        let mut idx = HashMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if idx.insert(n.id.as_str(), i).is_some() {
                return Err(Error::Network(format!("duplicate node id {:?}", n.id)));
            }
        }
        Ok(idx)
    }

    fn node_of(&self, idx: &HashMap<&str, usize>, id: &str, role: &str) -> Result<usize> {
        idx.get(id)
            .copied()
            .ok_or_else(|| Error::Network(format!("{role} references unknown node {id:?}")))
    }

    fn arcs(&self, idx: &HashMap<&str, usize>) -> Result<Vec<Arc>> {
        let mut out = Vec::with_capacity(self.links.len());
        for (l, link) in self.links.iter().enumerate() {
            let a = self.node_of(idx, &link.from, &format!("link {}", link.id))?;
            let b = self.node_of(idx, &link.to, &format!("link {}", link.id))?;
            let (up, down) = if link.flow >= 0.0 { (a, b) } else { (b, a) };
            out.push(Arc {
                link: l,
                up,
                down,
                q: link.flow.abs(),
            });
        }
        Ok(out)
    }

    fn phi(&self) -> f64 {
        (-self.decay_rate * self.dt).exp()
    }

    pub fn layout(&self) -> StateLayout {
        let mut labels: Vec<String> = self.nodes.iter().map(|n| n.id.clone()).collect();
        let node = (0..self.nodes.len()).collect();
        let mut link_first = Vec::with_capacity(self.links.len());
        for link in &self.links {
            link_first.push(labels.len());
            for s in 0..link.n_segments {
                labels.push(format!("{}[{s}]", link.id));
            }
        }
        StateLayout {
            n_x: labels.len(),
            node,
            link_first,
            labels,
        }
    }

    /// Checks the invariants the builder relies on and returns non-fatal
    /// warnings (boosters that cannot reach a sensor, idle links).
    pub fn validate(&self) -> Result<Vec<String>> {
        let idx = self.index()?;
        if self.nodes.is_empty() {
            return Err(Error::Network("no nodes".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Network("dt must be positive".into()));
        }
        if !(self.decay_rate.is_finite() && self.decay_rate >= 0.0) {
            return Err(Error::Network("decay_rate must be nonnegative".into()));
        }
        if self.boosters.is_empty() || self.sensors.is_empty() {
            return Err(Error::Network("need at least one booster and one sensor".into()));
        }
        for b in &self.boosters {
            self.node_of(&idx, b, "booster")?;
        }
        for s in &self.sensors {
            self.node_of(&idx, s, "sensor")?;
        }
        let mut link_ids = HashMap::new();
        for link in &self.links {
            if link_ids.insert(link.id.as_str(), ()).is_some() {
                return Err(Error::Network(format!("duplicate link id {:?}", link.id)));
            }
            if !link.flow.is_finite() {
                return Err(Error::Network(format!("link {} has a non-finite flow", link.id)));
            }
            if link.n_segments == 0 {
                return Err(Error::Network(format!("link {} needs at least one segment", link.id)));
            }
            if link.kind != LinkKind::Pipe && link.n_segments != 1 {
                return Err(Error::Network(format!(
                    "{:?} {} must have exactly one segment",
                    link.kind, link.id
                )));
            }
        }
        let arcs = self.arcs(&idx)?;
        let mut inflow = vec![0.0; self.nodes.len()];
        let mut outflow = vec![0.0; self.nodes.len()];
        for a in &arcs {
            inflow[a.down] += a.q;
            outflow[a.up] += a.q;
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if !n.demand.is_finite() {
                return Err(Error::Network(format!("node {} has a non-finite demand", n.id)));
            }
            match n.kind {
                NodeKind::Junction => {
                    let (qi, qo) = (inflow[i], outflow[i] + n.demand);
                    let scale = qi.abs().max(qo.abs()).max(f64::MIN_POSITIVE);
                    if (qi - qo).abs() > 1e-9 * scale {
                        return Err(Error::Network(format!(
                            "flow not conserved at junction {}: inflow {qi} vs outflow + demand {qo}",
                            n.id
                        )));
                    }
                }
                NodeKind::Tank => {
                    let v = n.tank_volume.unwrap_or(0.0);
                    if !(v.is_finite() && v > 0.0) {
                        return Err(Error::Network(format!("tank {} needs a positive tank_volume", n.id)));
                    }
                    if inflow[i] * self.dt > v {
                        return Err(Error::Network(format!(
                            "tank {} would exchange more than its volume in one step",
                            n.id
                        )));
                    }
                }
                NodeKind::Reservoir => {}
            }
        }
        let mut warnings: Vec<String> = self
            .links
            .iter()
            .filter(|l| l.flow == 0.0)
            .map(|l| format!("link {} carries no flow", l.id))
            .collect();
        let lags = self.arrival_lags()?;
        for (s, row) in lags.iter().enumerate() {
            for (b, lag) in row.iter().enumerate() {
                if lag.is_none() {
                    warnings.push(format!(
                        "no flow path from booster {} to sensor {}; that channel pair has zero response",
                        self.boosters[b], self.sensors[s]
                    ));
                }
            }
        }
        Ok(warnings)
    }

    /// First nonzero Markov index from each booster to each sensor:
    /// `lags[s][b] = Some(d)` means `h(k)[s, b] = 0` for `k < d` and `> 0`
    /// at `k = d`. Crossing a link with `n` segments costs `n + 1` steps.
    pub fn arrival_lags(&self) -> Result<Vec<Vec<Option<usize>>>> {
        let idx = self.index()?;
        let arcs = self.arcs(&idx)?;
        let mut out = vec![vec![None; self.boosters.len()]; self.sensors.len()];
        for (b, bid) in self.boosters.iter().enumerate() {
            let src = self.node_of(&idx, bid, "booster")?;
            let mut g = DiGraph::<(), usize>::with_capacity(self.nodes.len(), arcs.len());
            let nodes: Vec<NodeIndex> = (0..self.nodes.len()).map(|_| g.add_node(())).collect();
            for a in &arcs {
                // a reservoir passes on only what is injected at it
                let blocked = self.nodes[a.up].kind == NodeKind::Reservoir && a.up != src;
                if a.q > 0.0 && !blocked {
                    g.add_edge(nodes[a.up], nodes[a.down], self.links[a.link].n_segments + 1);
                }
            }
            let dist = dijkstra(&g, nodes[src], None, |e| *e.weight());
            for (s, sid) in self.sensors.iter().enumerate() {
                let t = self.node_of(&idx, sid, "sensor")?;
                out[s][b] = dist.get(&nodes[t]).map(|d| d + 1);
            }
        }
        Ok(out)
    }

    /// Water volume represented by each state, in m³: `q·dt` for a segment,
    /// inflow·dt for a junction, the volume for a tank, 0 for a reservoir.
    /// Concentration times weight is tracked mass.
    pub fn mass_weights(&self) -> Result<Vec<f64>> {
        let idx = self.index()?;
        let arcs = self.arcs(&idx)?;
        let lay = self.layout();
        let mut w = vec![0.0; lay.n_x];
        for a in &arcs {
            if self.nodes[a.down].kind == NodeKind::Junction {
                w[lay.node[a.down]] += a.q * self.dt;
            }
            for s in 0..self.links[a.link].n_segments {
                w[lay.link_first[a.link] + s] = a.q * self.dt;
            }
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if n.kind == NodeKind::Tank {
                w[lay.node[i]] = n.tank_volume.unwrap_or(0.0);
            }
        }
        Ok(w)
    }
}

/// Builds `(A, B, C, D)` for `spec`. See the module docs for the dynamics.
pub fn build_quality_model<T: Real>(spec: &NetworkSpec) -> Result<StateSpaceModel<T>> {
    spec.validate()?;
    let idx = spec.index()?;
    let arcs = spec.arcs(&idx)?;
    let lay = spec.layout();
    let n = lay.n_x;
    let phi = spec.phi();
    let mut a = Mat::<f64>::zeros(n, n);

    let mut q_in = vec![0.0; spec.nodes.len()];
    for arc in &arcs {
        q_in[arc.down] += arc.q;
    }
    for arc in arcs.iter().filter(|a| a.q > 0.0) {
        let link = &spec.links[arc.link];
        let first = lay.link_first[arc.link];
        let last = first + link.n_segments - 1;
        let carry = if link.kind == LinkKind::Pipe { phi } else { 1.0 };
        a[(first, lay.node[arc.up])] = carry;
        for s in 1..link.n_segments {
            a[(first + s, first + s - 1)] = phi;
        }
        let node = &spec.nodes[arc.down];
        let row = lay.node[arc.down];
        match node.kind {
            NodeKind::Junction => a[(row, last)] += phi * arc.q / q_in[arc.down],
            NodeKind::Tank => {
                let v = node.tank_volume.unwrap_or(f64::INFINITY);
                a[(row, last)] += phi * arc.q * spec.dt / v;
            }
            NodeKind::Reservoir => {}
        }
    }
    for (i, node) in spec.nodes.iter().enumerate() {
        if node.kind == NodeKind::Tank {
            let v = node.tank_volume.unwrap_or(f64::INFINITY);
            a[(lay.node[i], lay.node[i])] = phi * (1.0 - q_in[i] * spec.dt / v);
        }
    }

    let mut b = Mat::<T>::zeros(n, spec.n_u());
    for (j, id) in spec.boosters.iter().enumerate() {
        b[(lay.node[spec.node_of(&idx, id, "booster")?], j)] = T::one();
    }
    let mut c = Mat::<T>::zeros(spec.n_y(), n);
    for (i, id) in spec.sensors.iter().enumerate() {
        c[(i, lay.node[spec.node_of(&idx, id, "sensor")?])] = T::one();
    }
    let a = Mat::from_fn(n, n, |i, j| T::of(a[(i, j)]));
    StateSpaceModel::new(a, b, c, Mat::zeros(spec.n_y(), spec.n_u()), T::of(spec.dt))
}
