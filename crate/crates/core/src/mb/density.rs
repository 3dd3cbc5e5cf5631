use std::collections::HashMap;

use super::sampling::SamplePoint;
use crate::belief::{MultiBernoulliBelief, ParticleKey};
use crate::error::{Error, Result};

/// Largest number of mutually coupled points the exact assignment sum will
/// handle.
pub const DEFAULT_ASSIGNMENT_CAP: usize = 20;

/// Single-object density of component `component` at a sampled point.
pub trait ComponentDensity {
    fn density(&self, component: usize, point: &SamplePoint) -> f64;
}

impl<F> ComponentDensity for F
where
    F: Fn(usize, &SamplePoint) -> f64,
{
    fn density(&self, component: usize, point: &SamplePoint) -> f64 {
        self(component, point)
    }
}

/// Density evaluator for a resampled (equal-weight) belief: the density of
/// component `i` at a point is the total weight of the particles of `i`
/// that coincide with that point.
///
/// A point drawn from component `i` always coincides with at least its own
/// provenance particle. Resampled copies of one ancestor are pooled, so the
/// value reflects the pre-resampling weight of that ancestor.
#[derive(Debug, Clone)]
pub struct ProvenanceWeights {
    tables: Vec<HashMap<ParticleKey, f64>>,
}

impl ProvenanceWeights {
    pub fn new(belief: &MultiBernoulliBelief) -> Self {
        let tables = belief
            .components()
            .iter()
            .map(|c| {
                let mut t: HashMap<ParticleKey, f64> = HashMap::with_capacity(c.len());
                for p in c.particles() {
                    *t.entry(p.key()).or_insert(0.0) += p.weight;
                }
                t
            })
            .collect();
        Self { tables }
    }
}

impl ComponentDensity for ProvenanceWeights {
    fn density(&self, component: usize, point: &SamplePoint) -> f64 {
        self.tables[component]
            .get(&point.value.key())
            .copied()
            .unwrap_or(0.0)
    }
}

/// Multi-Bernoulli set density at a finite set of points:
///
/// `pi(X) = prod_i (1 - r_i) * sum over injective maps j -> i_j of
///          prod_j r_{i_j} p_{i_j}(x_j) / (1 - r_{i_j})`,
/// and zero when `|X| > M`.
///
/// The sum over injective assignments (a rectangular permanent) is computed
/// exactly. Points and components are first split into connected blocks of
/// the bipartite graph of nonzero terms; the sum factorises over blocks, and
/// each block is handled by a dynamic programme over subsets of its points
/// (components added one at a time). Blocks of more than 20 points (or more
/// than `cap`) use a sparse version of the same programme that discards
/// partial assignments whose best possible completion is negligible. The
/// discarded mass is bounded by `1e-13` times the result, relaxed step by
/// step to `1e-3` while the programme needs more than `2^cap` live states.
/// A block that does not fit at `1e-3` is rejected.
pub fn eval_mb_density<D: ComponentDensity + ?Sized>(
    existences: &[f64],
    points: &[SamplePoint],
    dens: &D,
    cap: usize,
) -> Result<f64> {
    log_mb_density(existences, points, dens, cap).map(f64::exp)
}

/// Natural log of [`eval_mb_density`]; `-inf` for a zero density.
pub fn log_mb_density<D: ComponentDensity + ?Sized>(
    existences: &[f64],
    points: &[SamplePoint],
    dens: &D,
    cap: usize,
) -> Result<f64> {
    PreparedSet::new(existences, points, dens).log_density(cap)
}

/// A point set laid out against a multi-Bernoulli density, ready for exact
/// evaluation or a cheap upper bound.
pub struct PreparedSet {
    log_base: f64,
    rows: Vec<Vec<(usize, f64)>>,
    blocks: Vec<Block>,
    zero: bool,
}

impl PreparedSet {
    pub fn new<D: ComponentDensity + ?Sized>(existences: &[f64], points: &[SamplePoint], dens: &D) -> Self {
        let m = existences.len();
        let log_empty: f64 = existences.iter().map(|r| (1.0 - r).ln()).sum();
        let zero = |log_base| Self {
            log_base,
            rows: Vec::new(),
            blocks: Vec::new(),
            zero: true,
        };
        if points.len() > m {
            return zero(log_empty);
        }
        let odds: Vec<f64> = existences.iter().map(|r| r / (1.0 - r)).collect();

        // Each point's row is scaled by its largest entry; the sum is linear
        // in every row, so the scales come back out as a product.
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(points.len());
        let mut log_scale = 0.0;
        for point in points {
            let mut row = Vec::new();
            let mut max = 0.0f64;
            for (i, &o) in odds.iter().enumerate() {
                if o <= 0.0 {
                    continue;
                }
                let d = dens.density(i, point);
                debug_assert!(d >= 0.0 && d.is_finite(), "density {d} at component {i}");
                let v = o * d;
                if v > 0.0 {
                    row.push((i, v));
                    max = max.max(v);
                }
            }
            if row.is_empty() {
                return zero(log_empty);
            }
            for e in row.iter_mut() {
                e.1 /= max;
            }
            log_scale += max.ln();
            rows.push(row);
        }
        let blocks = blocks(&rows, m);
        let zero = blocks.iter().any(|b| b.points.len() > b.components.len());
        Self {
            log_base: log_empty + log_scale,
            rows,
            blocks,
            zero,
        }
    }

    /// Whether every block has at most `chunk` points, in which case
    /// [`Self::log_upper_bound`] is exact.
    pub fn is_small(&self, chunk: usize) -> bool {
        self.zero || self.blocks.iter().all(|b| b.points.len() <= chunk)
    }

    /// Upper bound on the log density. Blocks larger than `chunk` are split
    /// into chunks of points sharing their best component where possible, and
    /// each chunk may reuse components taken by the others.
    pub fn log_upper_bound(&self, chunk: usize) -> f64 {
        if self.zero {
            return f64::NEG_INFINITY;
        }
        let chunk = chunk.max(1);
        let mut total = self.log_base;
        for block in &self.blocks {
            let mut points = block.points.clone();
            if points.len() > chunk {
                let best = |p: usize| {
                    self.rows[p]
                        .iter()
                        .max_by(|a, b| a.1.total_cmp(&b.1))
                        .map_or(0, |e| e.0)
                };
                points.sort_by_key(|&p| (best(p), p));
            }
            for part in points.chunks(chunk) {
                let sub = Block {
                    points: part.to_vec(),
                    components: block.components.clone(),
                };
                total += log_assignment_sum(&self.rows, &sub);
            }
        }
        total
    }

    pub fn log_density(&self, cap: usize) -> Result<f64> {
        if self.zero {
            return Ok(f64::NEG_INFINITY);
        }
        let mut total = self.log_base;
        for block in &self.blocks {
            total += if block.points.len() <= cap.min(DENSE_LIMIT) {
                log_assignment_sum(&self.rows, block)
            } else {
                log_pruned_assignment_sum(&self.rows, block, cap)?
            };
        }
        Ok(total)
    }
}

struct Block {
    points: Vec<usize>,
    components: Vec<usize>,
}

/// Connected blocks of the point/component graph, in order of first point.
fn blocks(rows: &[Vec<(usize, f64)>], m: usize) -> Vec<Block> {
    let n = rows.len();
    // Union-find over points, joined through shared components.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut owner: Vec<Option<usize>> = vec![None; m];
    for (p, row) in rows.iter().enumerate() {
        for &(c, _) in row {
            match owner[c] {
                None => owner[c] = Some(p),
                Some(q) => {
                    let (a, b) = (find(&mut parent, p), find(&mut parent, q));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut index: Vec<Option<usize>> = vec![None; n];
    let mut out: Vec<Block> = Vec::new();
    for p in 0..n {
        let root = find(&mut parent, p);
        let b = *index[root].get_or_insert_with(|| {
            out.push(Block {
                points: Vec::new(),
                components: Vec::new(),
            });
            out.len() - 1
        });
        out[b].points.push(p);
    }
    for (c, o) in owner.iter().enumerate() {
        if let Some(p) = o {
            let root = find(&mut parent, *p);
            let b = index[root].expect("every point has a block");
            out[b].components.push(c);
        }
    }
    out
}

/// States with the same number of assigned points share a log scale. Before
/// each column a level is rebased when its largest value, or the largest it
/// can receive, leaves `exp(+-LEVEL_RANGE)`.
const LEVEL_RANGE: f64 = 230.0;

struct Levels {
    log: Vec<f64>,
    peak: Vec<f64>,
}

impl Levels {
    fn new(k: usize) -> Self {
        let mut peak = vec![0.0; k + 1];
        peak[0] = 1.0;
        Self {
            log: vec![0.0; k + 1],
            peak,
        }
    }

    /// Rebases levels ahead of a column whose largest entry is `vmax`.
    /// Returns the factors to apply to stored values, if any nonempty level
    /// changed.
    fn prepare(&mut self, vmax: f64) -> Option<Vec<f64>> {
        let lv = vmax.ln();
        let mut factor = vec![1.0; self.log.len()];
        let mut any = false;
        for j in 1..self.log.len() {
            let incoming = self.peak[j - 1].ln() + self.log[j - 1] - self.log[j] + lv;
            let expected = self.peak[j].ln().max(incoming);
            if expected.is_finite() && expected.abs() > LEVEL_RANGE {
                // Partial steps keep the factor finite; later columns finish.
                let shift = expected.max(-700.0);
                self.log[j] += shift;
                if self.peak[j] > 0.0 {
                    factor[j] = (-shift).exp();
                    self.peak[j] *= factor[j];
                    any = true;
                }
            }
        }
        any.then_some(factor)
    }

    /// Column entries in the units of each receiving level.
    fn scaled<T: Copy>(&self, column: &[(T, f64)]) -> Vec<Vec<(T, f64)>> {
        (0..self.log.len())
            .map(|j| match j {
                0 => Vec::new(),
                _ => {
                    let shift = self.log[j - 1] - self.log[j];
                    // Capping only drops contributions of source states far
                    // below their level's scale.
                    column.iter().map(|&(b, v)| (b, (v.ln() + shift).exp().min(1e300))).collect()
                }
            })
            .collect()
    }
}

/// Calls `f` on every `k`-bit mask with `j` bits set.
fn for_each_mask(k: usize, j: usize, mut f: impl FnMut(usize)) {
    if j == 0 {
        f(0);
        return;
    }
    let mut mask = (1usize << j) - 1;
    while mask < 1 << k {
        f(mask);
        let low = mask & mask.wrapping_neg();
        let ripple = mask + low;
        mask = ripple | (((mask ^ ripple) >> 2) / low);
    }
}

fn column_max<T>(column: &[(T, f64)]) -> f64 {
    column.iter().fold(0.0, |m, e| m.max(e.1))
}

/// Log of the sum over injective maps from the block's points into its
/// components of the product of (scaled) entries, by the dense subset
/// programme.
fn log_assignment_sum(rows: &[Vec<(usize, f64)>], block: &Block) -> f64 {
    let k = block.points.len();
    let entries = block_entries(rows, block);
    if k == 1 {
        return entries.iter().flatten().map(|&(_, v)| v).sum::<f64>().ln();
    }
    let columns: Vec<Vec<(usize, f64)>> = entries
        .iter()
        .filter(|c| !c.is_empty())
        .map(|c| c.iter().map(|&(bit, v)| (1usize << bit, v)).collect())
        .collect();
    let full = (1usize << k) - 1;
    let mut dp = vec![0.0f64; full + 1];
    dp[0] = 1.0;
    let mut levels = Levels::new(k);
    for (t, column) in columns.iter().enumerate() {
        if let Some(f) = levels.prepare(column_max(column)) {
            for (j, &fj) in f.iter().enumerate().filter(|e| *e.1 != 1.0) {
                for_each_mask(k, j, |mask| dp[mask] *= fj);
            }
        }
        let scaled = levels.scaled(column);
        // After this column at most t + 1 points are assigned, and a state
        // is only useful if the columns left can still cover its free points.
        let most = (t + 1).min(k);
        let least = k.saturating_sub(columns.len() - t - 1).max(1);
        // Level j reads only level j - 1, so descending levels see states
        // from before this column and each component is used at most once.
        for j in (least..=most).rev() {
            let column = &scaled[j];
            let mut peak = 0.0f64;
            for_each_mask(k, j, |mask| {
                let mut acc = 0.0;
                for &(b, v) in column {
                    if mask & b != 0 {
                        acc += dp[mask ^ b] * v;
                    }
                }
                dp[mask] += acc;
                peak = peak.max(dp[mask]);
            });
            levels.peak[j] = peak;
        }
    }
    dp[full].ln() + levels.log[k]
}

const DENSE_LIMIT: usize = 20;
const DROP_TOLERANCES: [f64; 4] = [1e-13, 1e-9, 1e-6, 1e-3];
const MAJOR_ENTRY: f64 = 1e-6;
const BEAM_WIDTH: usize = 64;

fn block_entries(rows: &[Vec<(usize, f64)>], block: &Block) -> Vec<Vec<(usize, f64)>> {
    let mut local_of = HashMap::with_capacity(block.components.len());
    for (lc, &c) in block.components.iter().enumerate() {
        local_of.insert(c, lc);
    }
    let mut entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); block.components.len()];
    for (lp, &p) in block.points.iter().enumerate() {
        for &(c, v) in &rows[p] {
            entries[local_of[&c]].push((lp, v));
        }
    }
    entries
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

/// Log value of a greedy complete assignment (`-inf` if greedy gets stuck),
/// a lower bound on the log assignment sum.
fn log_greedy_assignment(k: usize, columns: &[Vec<(usize, f64)>]) -> f64 {
    let mut by_point: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
    for (c, col) in columns.iter().enumerate() {
        for &(p, v) in col {
            by_point[p].push((c, v));
        }
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&p| (by_point[p].iter().filter(|e| e.1 >= MAJOR_ENTRY).count(), p));
    let mut used = vec![false; columns.len()];
    let mut value = 0.0;
    for p in order {
        let best = by_point[p]
            .iter()
            .filter(|(c, _)| !used[*c])
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        match best {
            Some(&(c, v)) => {
                used[c] = true;
                value += v.ln();
            }
            None => return f64::NEG_INFINITY,
        }
    }
    value
}

/// Columns grouped by the cluster of points they serve strongly, columns
/// with only negligible entries last.
fn column_order(k: usize, columns: &[Vec<(usize, f64)>]) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..k).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for col in columns {
        let mut major = col.iter().filter(|e| e.1 >= MAJOR_ENTRY).map(|e| e.0);
        if let Some(first) = major.next() {
            for p in major {
                let (a, b) = (find(&mut parent, first), find(&mut parent, p));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut keyed: Vec<(bool, usize, usize)> = columns
        .iter()
        .enumerate()
        .map(|(c, col)| {
            let top = col
                .iter()
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
                .copied();
            match top {
                Some((p, v)) if v >= MAJOR_ENTRY => (false, find(&mut parent, p), c),
                _ => (true, 0, c),
            }
        })
        .collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, _, c)| c).collect()
}

enum Sweep {
    /// Keep only the `width` states with the largest completion bound. The
    /// result sums a subset of all complete assignments: a lower bound.
    Beam { width: usize },
    /// Drop states while their summed completion bounds stay within
    /// `exp(log_budget)`; fail beyond `max_states` live states.
    Certified { log_budget: f64, max_states: usize },
}

/// Log assignment sum over live partial assignments, processed column by
/// column; `None` if a certified sweep outgrows its state limit.
fn sweep(columns: &[&Vec<(usize, f64)>], log_remaining: &[Vec<f64>], k: usize, mode: &Sweep) -> Option<f64> {
    let full: u64 = (1u64 << k) - 1;
    let mut states: Vec<(u64, f64)> = vec![(0, 1.0)];
    let mut levels = Levels::new(k);
    let mut dropped = f64::NEG_INFINITY;
    for (t, col) in columns.iter().enumerate() {
        if let Some(f) = levels.prepare(column_max(col)) {
            states.iter_mut().for_each(|e| e.1 *= f[e.0.count_ones() as usize]);
        }
        let scaled = levels.scaled(col);
        let mut next = states.clone();
        for &(mask, v) in states.iter().filter(|e| e.0 != full) {
            for &(p, a) in &scaled[mask.count_ones() as usize + 1] {
                let b = 1u64 << p;
                if mask & b == 0 {
                    next.push((mask | b, v * a));
                }
            }
        }
        next.sort_by_key(|e| e.0);
        next.dedup_by(|later, kept| {
            if later.0 == kept.0 {
                kept.1 += later.1;
                true
            } else {
                false
            }
        });
        // Completion bounds, as absolute logs.
        let rest = &log_remaining[t + 1];
        let mut bounded: Vec<(f64, u64, f64)> = next
            .into_iter()
            .map(|(mask, v)| {
                let mut bound = v.ln() + levels.log[mask.count_ones() as usize];
                for (p, r) in rest.iter().enumerate() {
                    if mask & (1 << p) == 0 {
                        bound += r;
                    }
                }
                (bound, mask, v)
            })
            .filter(|e| e.0 > f64::NEG_INFINITY)
            .collect();
        bounded.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        match *mode {
            Sweep::Beam { width } => {
                let cut = bounded.len().saturating_sub(width);
                bounded.drain(..cut);
            }
            Sweep::Certified { log_budget, max_states } => {
                let mut cut = 0;
                while cut < bounded.len() && bounded[cut].1 != full {
                    let total = log_add(dropped, bounded[cut].0);
                    if total > log_budget {
                        break;
                    }
                    dropped = total;
                    cut += 1;
                }
                bounded.drain(..cut);
                if bounded.len() > max_states {
                    return None;
                }
            }
        }
        states = bounded.into_iter().map(|(_, mask, v)| (mask, v)).collect();
        states.sort_by_key(|e| e.0);
        levels.peak.fill(0.0);
        for &(mask, v) in &states {
            let j = mask.count_ones() as usize;
            levels.peak[j] = levels.peak[j].max(v);
        }
    }
    let v = states.iter().find(|e| e.0 == full).map_or(0.0, |e| e.1);
    Some(v.ln() + levels.log[k])
}

/// Log assignment sum over live (partial) states only, dropping states
/// whose upper bound on completion fits in the error budget.
fn log_pruned_assignment_sum(rows: &[Vec<(usize, f64)>], block: &Block, cap: usize) -> Result<f64> {
    let k = block.points.len();
    let too_large = || Error::CardinalityTooLarge { size: k, cap };
    if k >= 64 {
        return Err(too_large());
    }
    let max_states = 1usize.checked_shl(cap.min(40) as u32).unwrap_or(usize::MAX);
    let entries = block_entries(rows, block);
    let order = column_order(k, &entries);
    let columns: Vec<&Vec<(usize, f64)>> = order.iter().map(|&c| &entries[c]).collect();

    // remaining[t][p]: total entry of point p over columns t.. (row sums of
    // the yet-unprocessed part bound any completion from above).
    let mut remaining = vec![vec![0.0f64; k]; columns.len() + 1];
    for t in (0..columns.len()).rev() {
        remaining[t] = remaining[t + 1].clone();
        for &(p, v) in columns[t] {
            remaining[t][p] += v;
        }
    }
    let remaining: Vec<Vec<f64>> = remaining.iter().map(|r| r.iter().map(|v| v.ln()).collect()).collect();
    let beam = sweep(&columns, &remaining, k, &Sweep::Beam { width: BEAM_WIDTH }).unwrap_or(f64::NEG_INFINITY);
    let lower = beam.max(log_greedy_assignment(k, &entries));
    let certified = |tol: f64| {
        let mode = Sweep::Certified {
            log_budget: tol.ln() + lower,
            max_states,
        };
        sweep(&columns, &remaining, k, &mode)
    };
    // A block the loosest budget cannot handle is rejected without trying
    // the others.
    let (&loosest, tighter) = DROP_TOLERANCES.split_last().expect("tolerances");
    let fallback = certified(loosest).ok_or_else(too_large)?;
    Ok(tighter.iter().find_map(|&tol| certified(tol)).unwrap_or(fallback))
}
