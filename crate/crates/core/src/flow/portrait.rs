//! Phase portraits and their combinatorial signatures.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use super::roots::{solve_critical_points, CriticalKind, CriticalPoint};
use super::separatrix::{separatrices, Branch, Limit, Separatrix};
use super::FlowTolerances;
use crate::caustic::Window;
use crate::field::GeneratingFunction;
use crate::geom::Point;

/// Branch end seen from a node or from the window boundary.
pub type BranchRef = (usize, Branch);

/// Limits of all separatrices, with escaping branches grouped by the
/// direction in which they leave to infinity.
///
/// Branches that escape (or reach a node) along the same direction converge
/// too fast for their relative order to be resolved, so neither the order
/// within a group nor the order of arrival at nodes is recorded. Groups are
/// kept in cyclic order, rotated so that the smallest comes first. Two portraits with the same labeling are orbitally equivalent
/// (inside the window) when their signatures are equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Signature {
    pub limits: Vec<(usize, Branch, Limit)>,
    pub exit_order: Vec<Vec<BranchRef>>,
    /// Critical point kinds by id.
    pub kinds: Vec<CriticalKind>,
}

fn rotate_min<T: Ord + Clone>(v: &mut [T]) {
    if let Some(k) = (0..v.len()).min_by(|&a, &b| v[a].cmp(&v[b])) {
        v.rotate_left(k);
    }
}

/// Angular gap, in turns, that separates two escape directions.
const DIRECTION_GAP: f64 = 0.03;

fn grouped_cycle(mut items: Vec<(f64, BranchRef)>) -> Vec<Vec<BranchRef>> {
    items.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut groups: Vec<Vec<BranchRef>> = Vec::new();
    let mut prev: Option<f64> = None;
    for &(a, r) in &items {
        match (prev, groups.last_mut()) {
            (Some(p), Some(g)) if a - p <= DIRECTION_GAP => g.push(r),
            _ => groups.push(vec![r]),
        }
        prev = Some(a);
    }
    if groups.len() > 1 && items[0].0 + 1.0 - items[items.len() - 1].0 <= DIRECTION_GAP {
        let last = groups.pop().unwrap();
        groups[0].extend(last);
    }
    for g in &mut groups {
        g.sort();
    }
    rotate_min(&mut groups);
    groups
}

impl Signature {
    pub fn from_parts(cps: &[CriticalPoint], seps: &[Separatrix]) -> Self {
        let mut limits: Vec<_> = seps.iter().map(|s| (s.saddle_id, s.branch, s.limit)).collect();
        limits.sort();
        let mut exits = Vec::new();
        for s in seps {
            let exit_key = s
                .escape_angle
                .map(|a| (a / std::f64::consts::TAU).rem_euclid(1.0))
                .or(s.exit_parameter);
            if let (Limit::WindowExit, Some(p)) = (s.limit, exit_key) {
                exits.push((p, (s.saddle_id, s.branch)));
            }
        }
        Self {
            limits,
            exit_order: grouped_cycle(exits),
            kinds: cps.iter().map(|c| c.kind).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    /// Re-expresses the signature under new ids (`map[old] = new`) and branch
    /// flips (`flips[old] = (flip unstable, flip stable)`).
    pub fn relabel(&self, map: &[usize], flips: &[(bool, bool)]) -> Signature {
        let branch = |id: usize, b: Branch| {
            let (fu, fs) = flips[id];
            if (b.is_unstable() && fu) || (!b.is_unstable() && fs) {
                b.flipped()
            } else {
                b
            }
        };
        let limit = |l: Limit| match l {
            Limit::Node(n) => Limit::Node(map[n]),
            Limit::Saddle(s) => Limit::Saddle(map[s]),
            other => other,
        };
        let rref = |(id, b): BranchRef| (map[id], branch(id, b));
        let regroup = |cyc: &[Vec<BranchRef>]| {
            let mut out: Vec<Vec<BranchRef>> = cyc
                .iter()
                .map(|g| {
                    let mut g: Vec<_> = g.iter().map(|&r| rref(r)).collect();
                    g.sort();
                    g
                })
                .collect();
            rotate_min(&mut out);
            out
        };
        let mut limits: Vec<_> = self
            .limits
            .iter()
            .map(|&(id, b, l)| (map[id], branch(id, b), limit(l)))
            .collect();
        limits.sort();
        let exit_order = regroup(&self.exit_order);
        let mut kinds = vec![CriticalKind::Degenerate; self.kinds.len()];
        for (old, &k) in self.kinds.iter().enumerate() {
            kinds[map[old]] = k;
        }
        Signature {
            limits,
            exit_order,
            kinds,
        }
    }

    /// Label-free form: the smallest encoding over all relabelings that keep
    /// kinds in place and all branch flips. Equal for orbitally equivalent
    /// portraits regardless of labeling.
    pub fn canonical(&self) -> String {
        let n = self.kinds.len();
        let saddles: Vec<usize> = (0..n).filter(|&i| self.kinds[i] == CriticalKind::Saddle).collect();
        let mut best: Option<String> = None;
        let mut perm_map = vec![0usize; n];
        // Ids are permuted within each kind class.
        let mut classes: BTreeMap<CriticalKind, Vec<usize>> = BTreeMap::new();
        for (i, &k) in self.kinds.iter().enumerate() {
            classes.entry(k).or_default().push(i);
        }
        let class_list: Vec<Vec<usize>> = classes.into_values().collect();
        let mut all_perms: Vec<Vec<Vec<usize>>> = Vec::new();
        for c in &class_list {
            all_perms.push(permutations(c));
        }
        let mut idx = vec![0usize; class_list.len()];
        loop {
            for (ci, c) in class_list.iter().enumerate() {
                for (slot, &old) in c.iter().enumerate() {
                    perm_map[old] = all_perms[ci][idx[ci]][slot];
                }
            }
            for mask in 0..(1usize << (2 * saddles.len())) {
                let mut flips = vec![(false, false); n];
                for (k, &s) in saddles.iter().enumerate() {
                    flips[s] = (mask >> (2 * k) & 1 == 1, mask >> (2 * k + 1) & 1 == 1);
                }
                let enc = self.relabel(&perm_map, &flips).to_string();
                if best.as_ref().is_none_or(|b| enc < *b) {
                    best = Some(enc);
                }
            }
            // Odometer over the per-class permutations.
            let mut k = 0;
            loop {
                if k == idx.len() {
                    return best.unwrap_or_else(|| "∅".to_string());
                }
                idx[k] += 1;
                if idx[k] < all_perms[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

fn kind_code(k: CriticalKind) -> &'static str {
    match k {
        CriticalKind::UnstableNode => "U",
        CriticalKind::Saddle => "S",
        CriticalKind::StableNode => "N",
        CriticalKind::Degenerate => "D",
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.kinds.is_empty() {
            return f.write_str("∅");
        }
        let kinds: String = self.kinds.iter().map(|&k| kind_code(k)).collect();
        write!(f, "{kinds}")?;
        let refs = |v: &[BranchRef]| v.iter().map(|(i, b)| format!("{i}{b}")).collect::<Vec<_>>().join(",");
        if !self.limits.is_empty() {
            let l: Vec<String> = self.limits.iter().map(|(i, b, l)| format!("{i}{b}>{l}")).collect();
            write!(f, "|{}", l.join(";"))?;
        }
        let groups = |c: &[Vec<BranchRef>]| c.iter().map(|g| format!("[{}]", refs(g))).collect::<Vec<_>>().join(",");
        if !self.exit_order.is_empty() {
            write!(f, "|exit({})", groups(&self.exit_order))?;
        }
        Ok(())
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhasePortrait {
    pub x: Point,
    pub critical_points: Vec<CriticalPoint>,
    pub separatrices: Vec<Separatrix>,
    /// Ordered saddle pairs `(i, j)`: an unstable branch of `i` reaches `j`.
    pub connections: Vec<(usize, usize)>,
    /// `(node, saddle)`: a stable branch of the saddle comes from the node.
    pub node_saddle_lines: Vec<(usize, usize)>,
    /// `(saddle, node)`: an unstable branch of the saddle ends at the node.
    pub saddle_node_lines: Vec<(usize, usize)>,
    pub signature: Signature,
    pub on_caustic: bool,
    pub boundary_winding: Option<i32>,
    pub index_consistent: Option<bool>,
    pub max_monotonicity_violation: f64,
    pub max_steps_hit: usize,
}

impl PhasePortrait {
    pub fn saddles(&self) -> impl Iterator<Item = &CriticalPoint> {
        self.critical_points.iter().filter(|c| c.kind == CriticalKind::Saddle)
    }

    pub fn separatrix(&self, saddle: usize, branch: Branch) -> Option<&Separatrix> {
        self.separatrices
            .iter()
            .find(|s| s.saddle_id == saddle && s.branch == branch)
    }
}

pub fn portrait(f: &GeneratingFunction, x: Point, w: &Window, tol: &FlowTolerances) -> PhasePortrait {
    let roots = solve_critical_points(f, x, w, tol);
    let cps = roots.points;
    let on_caustic = cps.iter().any(|c| c.kind == CriticalKind::Degenerate);
    let seps = if on_caustic {
        Vec::new()
    } else {
        separatrices(f, x, &cps, w, tol)
    };
    let mut connections = Vec::new();
    let mut node_saddle_lines = Vec::new();
    let mut saddle_node_lines = Vec::new();
    for s in &seps {
        match (s.branch.is_unstable(), s.limit) {
            (true, Limit::Saddle(j)) => connections.push((s.saddle_id, j)),
            (true, Limit::Node(n)) => saddle_node_lines.push((s.saddle_id, n)),
            (false, Limit::Node(n)) => node_saddle_lines.push((n, s.saddle_id)),
            _ => {}
        }
    }
    for v in [&mut connections, &mut node_saddle_lines, &mut saddle_node_lines] {
        v.sort();
        v.dedup();
    }
    let signature = Signature::from_parts(&cps, &seps);
    PhasePortrait {
        x,
        max_monotonicity_violation: seps.iter().map(|s| s.monotonicity_violation).fold(0.0, f64::max),
        max_steps_hit: seps.iter().filter(|s| s.limit == Limit::MaxSteps).count(),
        critical_points: cps,
        separatrices: seps,
        connections,
        node_saddle_lines,
        saddle_node_lines,
        signature,
        on_caustic,
        boundary_winding: roots.boundary_winding,
        index_consistent: roots.index_consistent,
    }
}

/// Portraits at many base points, computed in parallel, returned in input order.
pub fn portraits(f: &GeneratingFunction, xs: &[Point], w: &Window, tol: &FlowTolerances) -> Vec<PhasePortrait> {
    xs.par_iter().map(|&x| portrait(f, x, w, tol)).collect()
}

/// Dimension of the moduli space of unparametrized gradient lines from
/// `from` to `to`: `u(from) - u(to) - 1`, `u` the unstable dimension.
pub fn moduli_dimension(from: &CriticalPoint, to: &CriticalPoint) -> i32 {
    from.unstable_dimension() - to.unstable_dimension() - 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{elliptic_slice, NormalForm};
    use crate::geom::pt;

    fn window(h: f64) -> Window {
        Window::square(pt(0.0, 0.0), h, 16).unwrap()
    }

    #[test]
    fn hyperbolic_portrait() {
        let f = NormalForm::HyperbolicUmbilic.generating_function();
        let p = portrait(&f, pt(1.0, 1.0), &window(3.0), &FlowTolerances::default());
        assert!(p.connections.is_empty());
        let node = p
            .critical_points
            .iter()
            .find(|c| c.kind == CriticalKind::UnstableNode)
            .unwrap()
            .id;
        let saddles: Vec<usize> = p.saddles().map(|c| c.id).collect();
        assert_eq!(saddles.len(), 2);
        for s in saddles {
            assert!(p.node_saddle_lines.contains(&(node, s)));
        }
        assert!(!p.on_caustic);
        assert!(p.max_monotonicity_violation <= 1e-10);
    }

    #[test]
    fn slice_portrait_has_twelve_records() {
        let f = elliptic_slice(1.0);
        let p = portrait(&f, pt(-0.25, 0.0), &window(4.0), &FlowTolerances::default());
        assert_eq!(p.saddles().count(), 3);
        assert_eq!(p.signature.limits.len(), 12);
        assert_eq!(p.max_steps_hit, 0);
        assert!(p.max_monotonicity_violation <= 1e-10);
    }

    #[test]
    fn empty_portrait() {
        let f = NormalForm::HyperbolicUmbilic.generating_function();
        let p = portrait(&f, pt(1.0, -1.0), &window(3.0), &FlowTolerances::default());
        assert!(p.critical_points.is_empty());
        assert_eq!(p.signature.to_string(), "∅");
        assert_eq!(p.signature.canonical(), "∅");
    }

    #[test]
    fn degenerate_point_flags_caustic() {
        let f = NormalForm::EllipticUmbilic.generating_function();
        let p = portrait(&f, pt(0.0, 0.0), &window(2.0), &FlowTolerances::default());
        assert!(p.on_caustic);
        assert!(p.connections.is_empty());
    }

    #[test]
    fn canonical_is_label_free() {
        let f = elliptic_slice(1.0);
        let p = portrait(&f, pt(-0.25, 0.0), &window(4.0), &FlowTolerances::default());
        let sig = &p.signature;
        // Swap the two saddles off the symmetry axis and flip one of them.
        let mut map: Vec<usize> = (0..4).collect();
        map.swap(2, 3);
        let mut flips = vec![(false, false); 4];
        flips[2] = (true, false);
        let other = sig.relabel(&map, &flips);
        assert_ne!(other.to_string(), sig.to_string());
        assert_eq!(other.canonical(), sig.canonical());
    }

    #[test]
    fn moduli_dimensions() {
        let cp = |e: [f64; 2]| {
            let (morse_index, kind) = super::super::classify(e, 1e-7);
            CriticalPoint {
                id: 0,
                position: pt(0.0, 0.0),
                hessian_eigenvalues: e,
                eigenvectors: [pt(1.0, 0.0), pt(0.0, 1.0)],
                morse_index,
                kind,
            }
        };
        let unode = cp([1.0, 2.0]);
        let saddle = cp([-1.0, 2.0]);
        let snode = cp([-1.0, -2.0]);
        assert_eq!(moduli_dimension(&unode, &saddle), 0);
        assert_eq!(moduli_dimension(&saddle, &saddle), -1);
        assert_eq!(moduli_dimension(&saddle, &snode), 0);
    }
}
