//! Address clustering by the multi-input heuristic: all addresses funding
//! one transaction are assumed to belong to one owner, and ownership is
//! closed transitively across transactions.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use crate::ledger::{Address, TxId};

use super::graph::TxGraph;

/// Union-find over address indices, path-halving + union by size.
struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> DisjointSets {
        DisjointSets { parent: (0..n).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns true when the two sets were distinct.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// A disjoint partition of every observed address. Cluster ids are the
/// lexicographically smallest member, so naming never depends on insertion
/// order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterSet {
    assignment: BTreeMap<Address, Address>,
    members: BTreeMap<Address, Vec<Address>>,
    /// Which multi-input transactions stitched each cluster together.
    provenance: BTreeMap<Address, Vec<TxId>>,
}

impl ClusterSet {
    /// Partitions `universe` by repeatedly merging each set in `merges`.
    /// Addresses mentioned in `merges` but missing from `universe` are
    /// included anyway; the caller just saves a pass by listing them.
    pub fn from_input_sets<I>(universe: I, merges: &[(TxId, BTreeSet<Address>)]) -> ClusterSet
    where
        I: IntoIterator<Item = Address>,
    {
        let mut index: BTreeMap<Address, usize> = BTreeMap::new();
        let mut order: Vec<Address> = Vec::new();
        let intern = |addr: Address, index: &mut BTreeMap<Address, usize>, order: &mut Vec<Address>| {
            *index.entry(addr).or_insert_with(|| {
                order.push(addr);
                order.len() - 1
            })
        };
        for addr in universe {
            intern(addr, &mut index, &mut order);
        }
        for (_, set) in merges {
            for addr in set {
                intern(*addr, &mut index, &mut order);
            }
        }

        let mut sets = DisjointSets::new(order.len());
        for (_, set) in merges {
            let mut it = set.iter();
            if let Some(first) = it.next() {
                let anchor = index[first];
                for addr in it {
                    sets.union(anchor, index[addr]);
                }
            }
        }

        // Root -> smallest member, in one ordered sweep.
        let mut smallest: BTreeMap<usize, Address> = BTreeMap::new();
        for (addr, &i) in &index {
            let root = sets.find(i);
            smallest.entry(root).or_insert(*addr);
        }

        let mut assignment = BTreeMap::new();
        let mut members: BTreeMap<Address, Vec<Address>> = BTreeMap::new();
        for (addr, &i) in &index {
            let id = smallest[&sets.find(i)];
            assignment.insert(*addr, id);
            members.entry(id).or_default().push(*addr);
        }

        let mut provenance: BTreeMap<Address, Vec<TxId>> = BTreeMap::new();
        for (tx, set) in merges {
            if set.len() < 2 {
                continue;
            }
            let any = set.iter().next().expect("non-empty merge set");
            provenance.entry(assignment[any]).or_default().push(*tx);
        }

        ClusterSet { assignment, members, provenance }
    }

    pub fn from_graph(graph: &TxGraph) -> ClusterSet {
        ClusterSet::from_input_sets(graph.addresses().iter().copied(), &graph.multi_input_sets())
    }

    pub fn cluster_of(&self, addr: &Address) -> Option<Address> {
        self.assignment.get(addr).copied()
    }

    pub fn same_cluster(&self, a: &Address, b: &Address) -> bool {
        match (self.assignment.get(a), self.assignment.get(b)) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        }
    }

    /// Cluster id -> sorted members.
    pub fn clusters(&self) -> &BTreeMap<Address, Vec<Address>> {
        &self.members
    }

    pub fn cluster_count(&self) -> usize {
        self.members.len()
    }

    pub fn address_count(&self) -> usize {
        self.assignment.len()
    }

    /// Transactions whose inputs caused the merges inside one cluster.
    pub fn merged_by(&self, cluster: &Address) -> &[TxId] {
        self.provenance.get(cluster).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "address,cluster_id")?;
        for (addr, id) in &self.assignment {
            writeln!(w, "{},{}", addr.to_hex(), id.to_hex())?;
        }
        Ok(())
    }
}

/// The same partition computed the slow, obviously-correct way: breadth
/// first search on the co-input graph. Quadratic; for tests.
pub fn components_by_bfs(
    universe: &BTreeSet<Address>,
    merges: &[(TxId, BTreeSet<Address>)],
) -> BTreeMap<Address, Address> {
    let mut all: BTreeSet<Address> = universe.clone();
    for (_, set) in merges {
        all.extend(set.iter().copied());
    }

    let mut assignment: BTreeMap<Address, Address> = BTreeMap::new();
    let mut visited: BTreeSet<Address> = BTreeSet::new();
    for start in &all {
        if visited.contains(start) {
            continue;
        }
        let mut component = vec![*start];
        let mut queue = std::collections::VecDeque::from([*start]);
        visited.insert(*start);
        while let Some(cur) = queue.pop_front() {
            for (_, set) in merges {
                if !set.contains(&cur) {
                    continue;
                }
                for next in set {
                    if visited.insert(*next) {
                        component.push(*next);
                        queue.push_back(*next);
                    }
                }
            }
        }
        let id = *component.iter().min().expect("component is non-empty");
        for addr in component {
            assignment.insert(addr, id);
        }
    }
    assignment
}
