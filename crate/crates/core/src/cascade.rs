//! Cascade realizations on the binary tree.
//!
//! A node is addressed by its depth `d` and its index `i < 2^d` (first path
//! bit most significant). The node carries the split `W(u) = (W0(u), W1(u))`
//! of its interval `[i 2^-d, (i+1) 2^-d)`, drawn from a stream keyed by
//! `(master_seed, replica, d, i)`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{node_key, replica_key, RngStream};
use crate::weights::WeightLaw;

pub const DEFAULT_MAX_DEPTH: u32 = 30;
/// Largest depth accepted by the full-tree traversals.
pub const TRAVERSAL_DEPTH_LIMIT: u32 = 26;
/// Node keys pack the index into 40 bits.
const ADDRESS_DEPTH_LIMIT: u32 = 40;
/// Largest depth for the leaf-mass CSV dump.
pub const CSV_DEPTH_LIMIT: u32 = 16;

/// A vertex `u = u_1 … u_d` of the binary tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct NodePath {
    depth: u32,
    index: u64,
}

impl NodePath {
    pub const ROOT: NodePath = NodePath { depth: 0, index: 0 };

    pub fn new(depth: u32, index: u64) -> Result<Self> {
        if depth > ADDRESS_DEPTH_LIMIT {
            return Err(Error::DepthExceeded { depth: depth as usize, limit: ADDRESS_DEPTH_LIMIT as usize });
        }
        if depth < 64 && index >> depth != 0 {
            return Err(Error::DomainError(format!("index {index} has more than {depth} bits")));
        }
        Ok(Self { depth, index })
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let mut path = Self::ROOT;
        for &b in bits {
            if b > 1 {
                return Err(Error::DomainError(format!("path bit {b} is not 0 or 1")));
            }
            path = path.child(b)?;
        }
        Ok(path)
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn child(&self, bit: u8) -> Result<Self> {
        Self::new(self.depth + 1, (self.index << 1) | bit as u64)
    }

    pub fn parent(&self) -> Option<Self> {
        (self.depth > 0).then(|| Self { depth: self.depth - 1, index: self.index >> 1 })
    }

    /// Bit `u_j`, `1 ≤ j ≤ depth`.
    pub fn bit(&self, j: u32) -> u8 {
        assert!(j >= 1 && j <= self.depth, "bit {j} of a depth-{} path", self.depth);
        ((self.index >> (self.depth - j)) & 1) as u8
    }

    /// `ℓ_u = Σ u_k 2^-k`, exact in floating point.
    pub fn left_endpoint(&self) -> f64 {
        self.index as f64 * (-(self.depth as f64)).exp2()
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.depth == 0 {
            return write!(f, "∅");
        }
        for j in 1..=self.depth {
            write!(f, "{}", self.bit(j))?;
        }
        Ok(())
    }
}

impl FromStr for NodePath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() || s == "∅" {
            return Ok(Self::ROOT);
        }
        let bits: Vec<u8> = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(Error::DomainError(format!("invalid path character {c:?}"))),
            })
            .collect::<Result<_>>()?;
        Self::from_bits(&bits)
    }
}

/// Extremes of `S_v = -ln μ(I_v)` over one level of the tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchingWalkSummary {
    pub depth: u32,
    pub min_s: f64,
    pub max_s: f64,
    pub num_leaves: u64,
}

/// Forces `W0` at chosen nodes; `None` falls back to the law.
pub type WeightOverride = Arc<dyn Fn(u32, u64) -> Option<f64> + Send + Sync>;

/// One realization of the cascade. Weights are never stored: every query
/// recomputes them from the node address, so the realization is a cheap,
/// shareable handle.
#[derive(Clone)]
pub struct CascadeRealization<'a> {
    law: &'a WeightLaw,
    master_seed: u64,
    replica_index: u64,
    max_depth: u32,
    key: u64,
    overrides: Option<WeightOverride>,
}

impl fmt::Debug for CascadeRealization<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CascadeRealization")
            .field("law", &self.law.label())
            .field("master_seed", &self.master_seed)
            .field("replica_index", &self.replica_index)
            .field("max_depth", &self.max_depth)
            .field("overridden", &self.overrides.is_some())
            .finish()
    }
}

impl<'a> CascadeRealization<'a> {
    pub fn new(law: &'a WeightLaw, master_seed: u64, replica_index: u64) -> Self {
        Self {
            law,
            master_seed,
            replica_index,
            max_depth: DEFAULT_MAX_DEPTH,
            key: replica_key(master_seed, replica_index),
            overrides: None,
        }
    }

    pub fn with_max_depth(mut self, max_depth: u32) -> Result<Self> {
        if max_depth > ADDRESS_DEPTH_LIMIT {
            return Err(Error::DepthExceeded { depth: max_depth as usize, limit: ADDRESS_DEPTH_LIMIT as usize });
        }
        self.max_depth = max_depth;
        Ok(self)
    }

    /// Replaces the sampled `W0` wherever `f(depth, index)` returns a value.
    pub fn with_override<F>(mut self, f: F) -> Self
    where
        F: Fn(u32, u64) -> Option<f64> + Send + Sync + 'static,
    {
        self.overrides = Some(Arc::new(f));
        self
    }

    pub fn law(&self) -> &'a WeightLaw {
        self.law
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn replica_index(&self) -> u64 {
        self.replica_index
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    #[inline(always)]
    pub(crate) fn draw(&self, depth: u32, index: u64) -> (f64, f64) {
        if let Some(f) = &self.overrides {
            if let Some(w0) = f(depth, index) {
                return (w0, 1.0 - w0);
            }
        }
        self.law.sample(&mut RngStream::new(node_key(self.key, depth, index)))
    }

    fn check_traversal(&self, n: u32) -> Result<()> {
        let limit = self.max_depth.min(TRAVERSAL_DEPTH_LIMIT);
        if n > limit {
            return Err(Error::DepthExceeded { depth: n as usize, limit: limit as usize });
        }
        Ok(())
    }

    /// `(W0(u), W1(u))`.
    pub fn node_weights(&self, path: NodePath) -> Result<(f64, f64)> {
        if path.depth >= self.max_depth {
            return Err(Error::DepthExceeded { depth: path.depth as usize, limit: self.max_depth as usize - 1 });
        }
        Ok(self.draw(path.depth, path.index))
    }

    /// `μ(I_v) = Π_j W_{v_j}(v|_{j-1})`.
    pub fn leaf_mass(&self, v: NodePath) -> Result<f64> {
        if v.depth > self.max_depth {
            return Err(Error::DepthExceeded { depth: v.depth as usize, limit: self.max_depth as usize });
        }
        let mut mass = 1.0;
        for j in 1..=v.depth {
            let (w0, w1) = self.draw(j - 1, v.index >> (v.depth - j + 1));
            mass *= if v.bit(j) == 0 { w0 } else { w1 };
        }
        Ok(mass)
    }

    /// All `2^n` level-`n` masses in index order.
    pub fn leaf_masses(&self, n: u32) -> Result<Vec<f64>> {
        self.check_traversal(n)?;
        let mut masses = vec![0.0; 1usize << n];
        masses[0] = 1.0;
        for d in 0..n {
            // Backwards so that slot i is read before slots 2i, 2i+1 are written.
            for i in (0..1usize << d).rev() {
                let m = masses[i];
                let (w0, w1) = self.draw(d, i as u64);
                masses[2 * i] = m * w0;
                masses[2 * i + 1] = m * w1;
            }
        }
        Ok(masses)
    }

    /// Writes `path,mass` rows for every node of level `n ≤ 16`.
    pub fn write_leaf_masses_csv<W: Write>(&self, n: u32, out: W) -> Result<()> {
        if n > CSV_DEPTH_LIMIT {
            return Err(Error::DepthExceeded { depth: n as usize, limit: CSV_DEPTH_LIMIT as usize });
        }
        let masses = self.leaf_masses(n)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["path", "mass"]).map_err(csv_err)?;
        for (i, m) in masses.iter().enumerate() {
            let path = NodePath::new(n, i as u64)?;
            w.write_record([path.to_string(), format!("{m:e}")]).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Exact min and max of `S_v` over `|v| = n`.
    pub fn extremal_logmass(&self, n: u32) -> Result<BranchingWalkSummary> {
        Ok(*self.extremal_profile(n)?.last().expect("profile includes depth n"))
    }

    /// `extremal_logmass(d)` for every `d ≤ n` from a single traversal.
    pub fn extremal_profile(&self, n: u32) -> Result<Vec<BranchingWalkSummary>> {
        self.check_traversal(n)?;
        let mut lo = vec![f64::INFINITY; n as usize + 1];
        let mut hi = vec![f64::NEG_INFINITY; n as usize + 1];
        self.extremes_from(0, 0, 0.0, n, &mut lo, &mut hi);
        Ok((0..=n)
            .map(|d| BranchingWalkSummary {
                depth: d,
                min_s: lo[d as usize],
                max_s: hi[d as usize],
                num_leaves: 1u64 << d,
            })
            .collect())
    }

    // Top-down accumulation keeps S_{v b} = fl(S_v + ξ) ≥ S_v, so the
    // extremes are monotone in the depth even after rounding.
    fn extremes_from(&self, d: u32, i: u64, s: f64, n: u32, lo: &mut [f64], hi: &mut [f64]) {
        let k = d as usize;
        lo[k] = lo[k].min(s);
        hi[k] = hi[k].max(s);
        if d == n {
            return;
        }
        let (w0, w1) = self.draw(d, i);
        self.extremes_from(d + 1, 2 * i, s - w0.ln(), n, lo, hi);
        self.extremes_from(d + 1, 2 * i + 1, s - w1.ln(), n, lo, hi);
    }

    /// `(M2_n, sup_{|u|=n} Y(u))` with `Y(u) = Π X(u|_j)^2 / (8 E[W0^2])^n`.
    pub fn m2_and_sup_y(&self, n: u32) -> Result<(f64, f64)> {
        self.check_traversal(n)?;
        let scale = 1.0 / (2.0 * self.law.second_moment()?);
        Ok(self.y_from(0, 0, 1.0, n, scale))
    }

    // Returns (Σ Y, max Y) over the subtree; sums pair up along the tree.
    fn y_from(&self, d: u32, i: u64, y: f64, n: u32, scale: f64) -> (f64, f64) {
        if d == n {
            return (y, y);
        }
        let (w0, w1) = self.draw(d, i);
        let (s0, m0) = self.y_from(d + 1, 2 * i, y * (w0 * w0 * scale), n, scale);
        let (s1, m1) = self.y_from(d + 1, 2 * i + 1, y * (w1 * w1 * scale), n, scale);
        (s0 + s1, m0.max(m1))
    }

    /// `M2_n = (8 E[W0^2])^{-n} Σ_{|u|=n} Π X(u|_j)^2`.
    pub fn martingale_m2(&self, n: u32) -> Result<f64> {
        Ok(self.m2_and_sup_y(n)?.0)
    }

    pub fn sup_y(&self, n: u32) -> Result<f64> {
        Ok(self.m2_and_sup_y(n)?.1)
    }

    /// `F_n(t) = μ_n([0, t])`, where `μ_n` spreads each level-`n` mass
    /// uniformly over its interval.
    pub fn f_eval(&self, n: u32, t: f64) -> Result<f64> {
        self.check_traversal(n)?;
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::DomainError(format!("F_n evaluated at t = {t} outside [0, 1]")));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        if t == 1.0 {
            return Ok(1.0);
        }
        let mut acc = 0.0;
        let mut mass = 1.0;
        let mut index = 0u64;
        let mut left = 0.0;
        let mut width = 1.0;
        for d in 0..n {
            let (w0, w1) = self.draw(d, index);
            width *= 0.5;
            if t >= left + width {
                acc += mass * w0;
                mass *= w1;
                left += width;
                index = 2 * index + 1;
            } else {
                mass *= w0;
                index *= 2;
            }
        }
        Ok((acc + mass * ((t - left) / width)).min(1.0))
    }

    /// A `t` with `|F_n(t) - y| ≤ tol`, by descent through the tree.
    pub fn f_inverse(&self, n: u32, y: f64, tol: f64) -> Result<f64> {
        self.check_traversal(n)?;
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::DomainError(format!("F_n^-1 evaluated at y = {y} outside [0, 1]")));
        }
        if !(tol > 0.0) {
            return Err(Error::ParameterError(format!("tolerance {tol} must be positive")));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        if y == 1.0 {
            return Ok(1.0);
        }
        let mut acc = 0.0;
        let mut mass = 1.0;
        let mut index = 0u64;
        let mut left = 0.0;
        let mut width = 1.0;
        for d in 0..n {
            if mass <= tol {
                // F_n sweeps [acc, acc + mass] over this interval.
                return Ok(left);
            }
            let (w0, w1) = self.draw(d, index);
            width *= 0.5;
            let split = acc + mass * w0;
            if y < split {
                mass *= w0;
                index *= 2;
            } else {
                acc = split;
                mass *= w1;
                left += width;
                index = 2 * index + 1;
            }
        }
        let frac = ((y - acc) / mass).clamp(0.0, 1.0);
        Ok(left + frac * width)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fixed(law: &WeightLaw, w0: f64) -> CascadeRealization<'_> {
        CascadeRealization::new(law, 1, 0).with_override(move |_, _| Some(w0))
    }

    /// W0(∅) = 0.3, W0(0) = 0.4 (so W1(0) = 0.6); every other node samples.
    fn spec_tree(law: &WeightLaw) -> CascadeRealization<'_> {
        CascadeRealization::new(law, 9, 0).with_override(|d, i| match (d, i) {
            (0, 0) => Some(0.3),
            (1, 0) => Some(0.4),
            _ => None,
        })
    }

    #[test]
    fn paths_parse_and_print() {
        let p: NodePath = "0110".parse().unwrap();
        assert_eq!((p.depth(), p.index()), (4, 6));
        assert_eq!(p.to_string(), "0110");
        assert_eq!(p.left_endpoint(), 0.375);
        assert_eq!(p.parent().unwrap().to_string(), "011");
        assert_eq!(NodePath::ROOT.to_string(), "∅");
        assert!("012".parse::<NodePath>().is_err());
        assert!(NodePath::new(2, 4).is_err());
    }

    #[test]
    fn node_weights_are_pure_functions_of_the_address() {
        let law = WeightLaw::uniform();
        let r = CascadeRealization::new(&law, 42, 3);
        let p: NodePath = "10110".parse().unwrap();
        let a = r.node_weights(p).unwrap();
        let _ = r.leaf_masses(8).unwrap();
        let b = r.clone().node_weights(p).unwrap();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1, 1.0 - a.0);
        assert!(a.0 > 0.0 && a.0 < 1.0);
        let other = CascadeRealization::new(&law, 42, 4).node_weights(p).unwrap();
        assert_ne!(a, other);
        let sibling = r.node_weights("10111".parse().unwrap()).unwrap();
        assert_ne!(a, sibling);
    }

    #[test]
    fn depth_limits() {
        let law = WeightLaw::uniform();
        let r = CascadeRealization::new(&law, 1, 0).with_max_depth(5).unwrap();
        assert!(r.node_weights(NodePath::new(4, 0).unwrap()).is_ok());
        assert!(matches!(r.node_weights(NodePath::new(5, 0).unwrap()), Err(Error::DepthExceeded { .. })));
        let r = CascadeRealization::new(&law, 1, 0);
        assert!(matches!(r.extremal_logmass(27), Err(Error::DepthExceeded { .. })));
        assert!(matches!(r.write_leaf_masses_csv(17, Vec::new()), Err(Error::DepthExceeded { .. })));
    }

    #[test]
    fn leaf_mass_examples() {
        let law = WeightLaw::uniform();
        let r = spec_tree(&law);
        assert_abs_diff_eq!(r.leaf_mass("01".parse().unwrap()).unwrap(), 0.18, epsilon = 1e-15);
        assert_eq!(r.leaf_mass("0".parse().unwrap()).unwrap(), 0.3);
        assert_eq!(r.leaf_mass(NodePath::ROOT).unwrap(), 1.0);
    }

    #[test]
    fn leaf_masses_agree_with_single_queries() {
        let law = WeightLaw::symmetric_beta(2.0).unwrap();
        let r = CascadeRealization::new(&law, 5, 1);
        let all = r.leaf_masses(10).unwrap();
        for i in [0u64, 1, 77, 512, 1023] {
            let single = r.leaf_mass(NodePath::new(10, i).unwrap()).unwrap();
            assert_abs_diff_eq!(all[i as usize], single, epsilon = 1e-15 * single.max(1e-300));
        }
        let total: f64 = all.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn extremal_examples() {
        let law = WeightLaw::uniform();
        let r = fixed(&law, 0.3);
        let s = r.extremal_logmass(1).unwrap();
        assert_abs_diff_eq!(s.min_s, -(0.7f64).ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.max_s, -(0.3f64).ln(), epsilon = 1e-15);
        assert_eq!(s.num_leaves, 2);
        let r = CascadeRealization::new(&law, 11, 0);
        let profile = r.extremal_profile(14).unwrap();
        for w in profile.windows(2) {
            assert!(w[1].min_s >= w[0].min_s && w[1].max_s >= w[0].max_s);
        }
        for s in &profile[1..] {
            let level = s.depth as f64 * std::f64::consts::LN_2;
            assert!(s.min_s <= level && level <= s.max_s);
        }
        let masses = r.leaf_masses(14).unwrap();
        let max_mass = masses.iter().cloned().fold(0.0, f64::max);
        assert_abs_diff_eq!(profile[14].min_s, -max_mass.ln(), epsilon = 1e-12);
    }

    #[test]
    fn martingale_examples() {
        let law = WeightLaw::uniform();
        let r = fixed(&law, 0.5);
        assert_abs_diff_eq!(r.martingale_m2(1).unwrap(), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(r.sup_y(1).unwrap(), 0.375, epsilon = 1e-15);
        let r = CascadeRealization::new(&law, 2, 0);
        let (m2, sup) = r.m2_and_sup_y(12).unwrap();
        assert!(m2 > 0.0 && sup <= m2);
    }

    #[test]
    fn homeomorphism_examples() {
        let law = WeightLaw::uniform();
        let r = spec_tree(&law);
        assert_eq!(r.f_eval(1, 0.5).unwrap(), 0.3);
        assert_abs_diff_eq!(r.f_eval(2, 0.25).unwrap(), 0.3 * 0.4, epsilon = 1e-16);
        assert_eq!(r.f_eval(7, 0.0).unwrap(), 0.0);
        assert_eq!(r.f_eval(7, 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(r.f_inverse(1, 0.3, 1e-9).unwrap(), 0.5, epsilon = 1e-9);
        assert_eq!(r.f_inverse(5, 0.0, 1e-9).unwrap(), 0.0);
        assert_eq!(r.f_inverse(5, 1.0, 1e-9).unwrap(), 1.0);
        assert!(matches!(r.f_eval(3, 1.5), Err(Error::DomainError(_))));
    }

    #[test]
    fn homeomorphism_refines_and_inverts() {
        let law = WeightLaw::uniform();
        let r = CascadeRealization::new(&law, 3, 0);
        for i in 0..=64u64 {
            let t = i as f64 / 64.0;
            assert_eq!(r.f_eval(6, t).unwrap(), r.f_eval(9, t).unwrap());
        }
        let mut stream = RngStream::new(17);
        for _ in 0..200 {
            let y = stream.uniform();
            let t = r.f_inverse(12, y, 1e-10).unwrap();
            assert_abs_diff_eq!(r.f_eval(12, t).unwrap(), y, epsilon = 1e-10);
        }
    }

    #[test]
    fn csv_dump() {
        let law = WeightLaw::uniform();
        let r = spec_tree(&law);
        let mut buf = Vec::new();
        r.write_leaf_masses_csv(2, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "path,mass");
        assert!(lines[1].starts_with("00,"));
        assert!(lines[4].starts_with("11,"));
    }
}
