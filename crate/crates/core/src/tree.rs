//! Integer-sequence encoding of general binary-tree multiplexers.
//!
//! A multiplexer built from `N_R` routers is written as a sequence of `N_R`
//! integers. The first router is attached to the output, so the first entry
//! is always `1`. Afterwards the open inputs are kept in geometric
//! top-to-bottom order and the `n`-th entry names the open input (1-based)
//! the `n`-th router is plugged into. Each router contributes a transmission
//! port `T` (upper, efficiency `V_t`) and a reflection port `R` (lower,
//! efficiency `V_r`) that take the place of the input it occupies.
//!
//! Different sequences can describe the same tree. Canonical sequences, the
//! ones where each entry is at most one larger than its predecessor, pick one
//! representative per tree, and there are `catalan(N_R)` of them.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest router count the enumerator accepts unless told otherwise.
pub const DEFAULT_ROUTER_CAP: u32 = 15;

/// Integer code of a binary-tree multiplexer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct RouterSequence(Vec<u32>);

impl RouterSequence {
    /// Validates the attachment rule (`entries[0] == 1`, `1 <= entries[n-1] <= n`).
    /// Canonical form is not required.
    pub fn new(entries: Vec<u32>) -> Result<Self> {
        validate_entries(&entries)?;
        Ok(Self(entries))
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn n_routers(&self) -> usize {
        self.0.len()
    }

    /// Every step is a repeat, a `+1` or any decrement.
    pub fn is_canonical(&self) -> bool {
        self.0.windows(2).all(|w| w[1] <= w[0] + 1)
    }

    /// Chain where every router hangs on the reflection port of the previous one.
    pub fn reflection_chain(n_routers: usize) -> Self {
        Self((1..=n_routers as u32).collect())
    }

    /// Chain where every router hangs on the transmission port of the previous one.
    pub fn transmission_chain(n_routers: usize) -> Self {
        Self(vec![1; n_routers])
    }
}

impl std::ops::Deref for RouterSequence {
    type Target = [u32];

    fn deref(&self) -> &[u32] {
        &self.0
    }
}

impl TryFrom<Vec<u32>> for RouterSequence {
    type Error = Error;

    fn try_from(entries: Vec<u32>) -> Result<Self> {
        Self::new(entries)
    }
}

impl From<RouterSequence> for Vec<u32> {
    fn from(seq: RouterSequence) -> Self {
        seq.0
    }
}

impl fmt::Display for RouterSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{e}")?;
        }
        f.write_str("]")
    }
}

impl FromStr for RouterSequence {
    type Err = Error;

    /// Accepts `[1,2,1]`, `1,2,1` or `1 2 1`.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('[').trim_end_matches(']');
        let entries = inner
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<u32>()
                    .map_err(|_| Error::MalformedSequence(format!("`{t}` is not a positive integer")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }
}

fn validate_entries(entries: &[u32]) -> Result<()> {
    if entries.is_empty() {
        return Err(Error::MalformedSequence("empty sequence".into()));
    }
    if entries[0] != 1 {
        return Err(Error::MalformedSequence(format!(
            "first entry must be 1, got {}",
            entries[0]
        )));
    }
    for (idx, &e) in entries.iter().enumerate() {
        let position = idx as u32 + 1;
        if e < 1 || e > position {
            return Err(Error::MalformedSequence(format!(
                "entry {position} is {e}, allowed range is 1..={position}"
            )));
        }
    }
    Ok(())
}

/// Input port of a router.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Port {
    /// Upper input, efficiency `V_t`.
    T,
    /// Lower input, efficiency `V_r`.
    R,
}

/// Where a router's output goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attachment {
    Output,
    Router { router: usize, port: Port },
}

/// An open input of the multiplexer: router index (0-based) and port.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PortRef {
    pub router: usize,
    pub port: Port,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiplexerTree {
    /// Parent of router `n` (0-based), in construction order.
    pub routers: Vec<Attachment>,
    /// The `N_R + 1` multiplexer inputs, top to bottom.
    pub open_ports: Vec<PortRef>,
}

impl MultiplexerTree {
    pub fn n_routers(&self) -> usize {
        self.routers.len()
    }

    /// Exponents of every open port in geometric (top-to-bottom) order.
    ///
    /// Each port's path is walked up to the output, counting reflection
    /// traversals into `j` and transmission traversals into `k`.
    pub fn port_exponents(&self) -> Vec<ArmExponents> {
        self.open_ports
            .iter()
            .map(|leaf| {
                let mut arm = ArmExponents::default();
                arm.push(leaf.port);
                let mut node = leaf.router;
                while let Attachment::Router { router, port } = self.routers[node] {
                    arm.push(port);
                    node = router;
                }
                arm
            })
            .collect()
    }
}

/// Builds the tree encoded by `entries`.
///
/// Router 1 starts at the output with open inputs `[T1, R1]`. Router `n` is
/// attached to the open input at position `entries[n]`, which is replaced in
/// place by `[Tn, Rn]`. Non-canonical sequences are accepted.
pub fn build_tree(entries: &[u32]) -> Result<MultiplexerTree> {
    validate_entries(entries)?;
    Ok(build_unchecked(entries))
}

fn build_unchecked(entries: &[u32]) -> MultiplexerTree {
    let mut routers = Vec::with_capacity(entries.len());
    let mut open_ports = Vec::with_capacity(entries.len() + 1);
    routers.push(Attachment::Output);
    open_ports.push(PortRef { router: 0, port: Port::T });
    open_ports.push(PortRef { router: 0, port: Port::R });
    for (n, &e) in entries.iter().enumerate().skip(1) {
        let slot = (e - 1) as usize;
        let parent = open_ports[slot];
        routers.push(Attachment::Router {
            router: parent.router,
            port: parent.port,
        });
        open_ports[slot] = PortRef { router: n, port: Port::T };
        open_ports.insert(slot + 1, PortRef { router: n, port: Port::R });
    }
    MultiplexerTree { routers, open_ports }
}

/// Symbolic transmission `V_r^j V_t^k` of one multiplexer arm.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct ArmExponents {
    /// Power of `V_r`.
    pub j: u32,
    /// Power of `V_t`.
    pub k: u32,
}

impl ArmExponents {
    pub fn new(j: u32, k: u32) -> Self {
        Self { j, k }
    }

    fn push(&mut self, port: Port) {
        match port {
            Port::R => self.j += 1,
            Port::T => self.k += 1,
        }
    }

    /// Number of routers on the path.
    pub fn depth(&self) -> u32 {
        self.j + self.k
    }

    pub fn swapped(self) -> Self {
        Self { j: self.k, k: self.j }
    }
}

impl fmt::Display for ArmExponents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Vr^{} Vt^{}", self.j, self.k)
    }
}

/// Multiset of arm transmissions, held sorted by `(j, k)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TransmissionSet {
    arms: Vec<ArmExponents>,
}

impl TransmissionSet {
    pub fn from_arms(mut arms: Vec<ArmExponents>) -> Self {
        arms.sort_unstable();
        Self { arms }
    }

    pub fn arms(&self) -> &[ArmExponents] {
        &self.arms
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    /// The set obtained by exchanging the roles of `V_t` and `V_r`.
    pub fn swapped(&self) -> Self {
        Self::from_arms(self.arms.iter().map(|a| a.swapped()).collect())
    }

    /// True for the two chain-like (asymmetric) multiplexers.
    pub fn is_chain(&self) -> bool {
        let n = self.arms.len();
        if n < 2 {
            return false;
        }
        let n_routers = n - 1;
        let t_chain = arm_transmissions(&build_unchecked(&RouterSequence::transmission_chain(n_routers)));
        *self == t_chain || *self == t_chain.swapped()
    }
}

/// Canonical multiset of arm transmissions of `tree`.
pub fn arm_transmissions(tree: &MultiplexerTree) -> TransmissionSet {
    TransmissionSet::from_arms(tree.port_exponents())
}

/// The `n_routers`-th Catalan number in exact integer arithmetic.
pub fn catalan(n_routers: u32) -> Result<u64> {
    if n_routers == 0 {
        return Err(Error::MalformedSequence("catalan needs at least one router".into()));
    }
    // C(2n, n) built incrementally; every partial product is a binomial.
    let n = u64::from(n_routers);
    let mut binom: u64 = 1;
    for k in 1..=n {
        binom = binom
            .checked_mul(n + k)
            .ok_or(Error::Overflow(n_routers))?
            / k;
    }
    Ok(binom / (n + 1))
}

/// Lazy lexicographic stream of canonical router sequences.
#[derive(Debug, Clone)]
pub struct CanonicalSequences {
    current: Option<Vec<u32>>,
}

impl Iterator for CanonicalSequences {
    type Item = RouterSequence;

    fn next(&mut self) -> Option<RouterSequence> {
        let out = self.current.clone()?;
        let seq = self.current.as_mut().expect("checked above");
        // rightmost entry that can still grow; everything after it resets to 1
        let mut pos = seq.len();
        let mut advanced = false;
        while pos > 1 {
            pos -= 1;
            let max = (pos as u32 + 1).min(seq[pos - 1] + 1);
            if seq[pos] < max {
                seq[pos] += 1;
                seq[pos + 1..].iter_mut().for_each(|e| *e = 1);
                advanced = true;
                break;
            }
        }
        if !advanced {
            self.current = None;
        }
        Some(RouterSequence(out))
    }
}

/// Canonical sequences for `n_routers`, capped at [`DEFAULT_ROUTER_CAP`].
pub fn generate_canonical_sequences(n_routers: u32) -> Result<CanonicalSequences> {
    generate_canonical_sequences_capped(n_routers, DEFAULT_ROUTER_CAP)
}

pub fn generate_canonical_sequences_capped(n_routers: u32, cap: u32) -> Result<CanonicalSequences> {
    check_cap(n_routers, cap)?;
    Ok(CanonicalSequences {
        current: Some(vec![1; n_routers as usize]),
    })
}

fn check_cap(n_routers: u32, cap: u32) -> Result<()> {
    if n_routers == 0 {
        return Err(Error::MalformedSequence("at least one router is required".into()));
    }
    if n_routers > cap {
        let count = catalan(n_routers)
            .map(|c| c.to_string())
            .unwrap_or_else(|_| "overflow".into());
        return Err(Error::SizeLimit {
            routers: n_routers,
            cap,
            count,
        });
    }
    Ok(())
}

/// Every sequence satisfying the attachment rule, canonical or not (`n_routers!` of them).
#[derive(Debug, Clone)]
pub struct RawSequences {
    current: Option<Vec<u32>>,
}

impl Iterator for RawSequences {
    type Item = RouterSequence;

    fn next(&mut self) -> Option<RouterSequence> {
        let out = self.current.clone()?;
        let seq = self.current.as_mut().expect("checked above");
        let mut pos = seq.len();
        let mut advanced = false;
        while pos > 1 {
            pos -= 1;
            if seq[pos] < pos as u32 + 1 {
                seq[pos] += 1;
                seq[pos + 1..].iter_mut().for_each(|e| *e = 1);
                advanced = true;
                break;
            }
        }
        if !advanced {
            self.current = None;
        }
        Some(RouterSequence(out))
    }
}

pub fn raw_sequences(n_routers: u32, cap: u32) -> Result<RawSequences> {
    check_cap(n_routers, cap)?;
    Ok(RawSequences {
        current: Some(vec![1; n_routers as usize]),
    })
}

/// A deduplicated structure: its first-seen sequence and its transmission multiset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Structure {
    pub sequence: RouterSequence,
    pub arms: TransmissionSet,
}

/// Keeps the first sequence of every distinct transmission multiset, in stream order.
pub fn dedup_structures<I>(seqs: I) -> Vec<Structure>
where
    I: IntoIterator<Item = RouterSequence>,
{
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for sequence in seqs {
        let arms = arm_transmissions(&build_unchecked(&sequence));
        if let std::collections::hash_map::Entry::Vacant(slot) = seen.entry(arms) {
            out.push(Structure {
                sequence,
                arms: slot.key().clone(),
            });
            slot.insert(());
        }
    }
    out
}

/// Parallel grouping with minimum-index selection. Same output as [`dedup_structures`].
pub fn dedup_structures_parallel(seqs: &[RouterSequence]) -> Vec<Structure> {
    let mut firsts: Vec<(usize, TransmissionSet)> = seqs
        .par_iter()
        .enumerate()
        .map(|(idx, seq)| (idx, arm_transmissions(&build_unchecked(seq))))
        .fold(HashMap::new, |mut acc: HashMap<TransmissionSet, usize>, (idx, set)| {
            acc.entry(set).and_modify(|i| *i = (*i).min(idx)).or_insert(idx);
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (set, idx) in b {
                a.entry(set).and_modify(|i| *i = (*i).min(idx)).or_insert(idx);
            }
            a
        })
        .into_iter()
        .map(|(set, idx)| (idx, set))
        .collect();
    firsts.sort_unstable_by_key(|(idx, _)| *idx);
    firsts
        .into_iter()
        .map(|(idx, arms)| Structure {
            sequence: seqs[idx].clone(),
            arms,
        })
        .collect()
}

/// All distinct structures for `n_routers`, in enumeration order.
pub fn distinct_structures(n_routers: u32) -> Result<Vec<Structure>> {
    Ok(dedup_structures(generate_canonical_sequences(n_routers)?))
}
