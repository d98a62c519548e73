//! Sequential measurement evaluation over quadrature nodes.
//!
//! Classical noise only shifts eigenvalues, so every stage keeps one fixed
//! eigenbasis and a node merely relabels eigenvectors into bins. Consecutive
//! measurements whose operators commute exactly share a stage and are
//! resolved by one joint branching.

use num_complex::Complex64;
use rayon::prelude::*;

use super::frame::Representation;
use super::plan::Composition;
use crate::fock::{edge_snap, BinPartition, Spectrum};
use crate::CMatrix;

/// How nonselective steps are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Nonselective {
    /// Apply the Lüders channel in place.
    #[default]
    Lueders,
    /// Branch over outcomes and add the branches.
    Branch,
}

/// Simultaneous eigenbasis of exactly commuting Hermitian matrices, found by
/// refining degenerate clusters one operator at a time.
pub fn joint_eigenbasis(ops: &[CMatrix]) -> Option<(CMatrix, Vec<Vec<f64>>)> {
    let d = ops.first().map_or(0, |o| o.nrows());
    let mut v = CMatrix::identity(d, d);
    let mut clusters: Vec<Vec<usize>> = vec![(0..d).collect()];
    for op in ops {
        let mut next = Vec::new();
        let mut new_v = v.clone();
        for c in &clusters {
            let vc = CMatrix::from_fn(d, c.len(), |r, j| v[(r, c[j])]);
            let sub = vc.adjoint() * op * &vc;
            let spec = Spectrum::of(&sub);
            let rotated = &vc * &spec.vectors;
            for (j, &col) in c.iter().enumerate() {
                new_v.set_column(col, &rotated.column(j));
            }
            let tol = 1e-8 * (1.0 + spec.radius());
            let mut start = 0;
            for j in 1..=c.len() {
                if j == c.len() || spec.values[j] - spec.values[j - 1] > tol {
                    next.push(c[start..j].to_vec());
                    start = j;
                }
            }
        }
        v = new_v;
        clusters = next;
    }
    let vadj = v.adjoint();
    let mut values = Vec::with_capacity(ops.len());
    for op in ops {
        let diag = &vadj * op * &v;
        let scale = 1.0 + diag.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        for r in 0..d {
            for c in 0..d {
                if r != c && diag[(r, c)].norm() > 1e-8 * scale {
                    return None;
                }
            }
        }
        values.push((0..d).map(|i| diag[(i, i)].re).collect());
    }
    Some((v, values))
}

/// One binned measurement of `composition(Phi_p1 + x_p1, ...)`.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub fields: Vec<usize>,
    pub composition: Composition,
    pub bins: BinPartition,
    /// Output slot for selective measurements.
    pub record: Option<usize>,
}

#[derive(Debug, Clone)]
struct Component {
    /// Eigenvalue of each field per eigenvector.
    field_values: Vec<Vec<f64>>,
    /// Parts whose classical shifts apply; empty for a fixed polynomial.
    fields: Vec<usize>,
    composition: Composition,
    bins: BinPartition,
    record: Option<usize>,
}

impl Component {
    fn labels(&self, shifts: &[f64]) -> Vec<usize> {
        let d = self.field_values.first().map_or(0, |v| v.len());
        let mut buf = Vec::with_capacity(self.field_values.len());
        let values: Vec<f64> = (0..d)
            .map(|i| {
                buf.clear();
                if self.fields.is_empty() {
                    buf.extend(self.field_values.iter().map(|v| v[i]));
                } else {
                    buf.extend(self.fields.iter().zip(&self.field_values).map(|(f, v)| v[i] + shifts[*f]));
                }
                self.composition.apply(&buf)
            })
            .collect();
        let snap = edge_snap(values.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        values.iter().map(|&v| self.bins.bin_of_snapped(v, snap)).collect()
    }
}

/// Commuting measurements resolved in one eigenbasis.
#[derive(Debug, Clone)]
struct Stage {
    vectors: CMatrix,
    vectors_adj: CMatrix,
    components: Vec<Component>,
}

/// A measurement sequence with `slot_bins[s]` outcomes per recorded slot.
#[derive(Debug, Clone)]
pub struct Program {
    stages: Vec<Stage>,
    slot_bins: Vec<usize>,
}

impl Program {
    pub fn new(slot_bins: Vec<usize>) -> Self {
        Self { stages: Vec::new(), slot_bins }
    }

    pub fn slot_bins(&self) -> &[usize] {
        &self.slot_bins
    }

    pub fn n_stages(&self) -> usize {
        self.stages.len()
    }

    /// Appends measurements performed in order. They share one stage when all
    /// their fields commute exactly; otherwise each gets its own.
    ///
    /// Fails with the index of a measurement that mixes non-commuting fields
    /// carrying classical noise.
    pub fn push(&mut self, rep: &Representation, group: &[Measurement]) -> Result<(), usize> {
        if group.is_empty() {
            return Ok(());
        }
        let mut all: Vec<usize> = group.iter().flat_map(|m| m.fields.iter().copied()).collect();
        all.sort_unstable();
        all.dedup();
        let ops: Vec<CMatrix> = all.iter().map(|&p| rep.operator(p)).collect();
        if let Some((v, vals)) = joint_eigenbasis(&ops) {
            let components = group
                .iter()
                .map(|m| Component {
                    field_values: m.fields.iter().map(|f| vals[all.binary_search(f).expect("field listed")].clone()).collect(),
                    fields: m.fields.clone(),
                    composition: m.composition,
                    bins: m.bins.clone(),
                    record: m.record,
                })
                .collect();
            self.stages.push(Stage { vectors_adj: v.adjoint(), vectors: v, components });
            return Ok(());
        }
        if group.len() > 1 {
            for (i, m) in group.iter().enumerate() {
                self.push(rep, std::slice::from_ref(m)).map_err(|_| i)?;
            }
            return Ok(());
        }
        // a single measurement over non-commuting fields: symmetrized polynomial
        let m = &group[0];
        if m.fields.iter().any(|&p| !rep.loadings[p].is_empty()) {
            return Err(0);
        }
        let d = rep.dimension();
        let half = Complex64::new(0.5, 0.0);
        let ops: Vec<CMatrix> = m.fields.iter().map(|&p| rep.operator(p)).collect();
        let poly = match m.composition {
            Composition::Linear => ops.iter().fold(CMatrix::zeros(d, d), |a, o| a + o),
            Composition::SumOfSquares => ops.iter().fold(CMatrix::zeros(d, d), |a, o| a + o * o),
            Composition::Product => ops[1..].iter().fold(ops[0].clone(), |a, o| (&a * o + o * &a) * half),
        };
        let spec = Spectrum::of(&poly);
        self.stages.push(Stage {
            vectors_adj: spec.vectors.adjoint(),
            vectors: spec.vectors,
            components: vec![Component {
                field_values: vec![spec.values],
                fields: Vec::new(),
                composition: Composition::Linear,
                bins: m.bins.clone(),
                record: m.record,
            }],
        });
        Ok(())
    }

    fn table_len(&self) -> usize {
        self.slot_bins.iter().product()
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.slot_bins.len()];
        for i in (0..self.slot_bins.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.slot_bins[i + 1];
        }
        s
    }
}

struct NodeRun<'a> {
    program: &'a Program,
    /// `transitions[k] = V_{k-1}^dagger V_k`, eigenbasis of stage `k - 1` to that of stage `k`.
    transitions: &'a [CMatrix],
    shifts: Vec<f64>,
    strides: Vec<usize>,
    mode: Nonselective,
    last_selective: Option<usize>,
}

/// `W[S,:]^dagger r[S,S] W[S,:]` for the eigenvectors `S` of one outcome.
fn carry(r: &CMatrix, w: &CMatrix, rows: &[usize]) -> CMatrix {
    let d = w.ncols();
    let ws = CMatrix::from_fn(rows.len(), d, |i, j| w[(rows[i], j)]);
    let rs = CMatrix::from_fn(rows.len(), rows.len(), |i, j| r[(rows[i], rows[j])]);
    ws.adjoint() * rs * ws
}

/// Eigenvectors grouped by joint outcome: `(table offset, branch key, rows)`.
type Groups = Vec<(usize, Vec<usize>, Vec<usize>)>;

impl NodeRun<'_> {
    fn groups(&self, stage: &Stage) -> Groups {
        let labels: Vec<Vec<usize>> = stage.components.iter().map(|c| c.labels(&self.shifts)).collect();
        let d = stage.vectors.nrows();
        let mut keyed: Vec<(Vec<usize>, usize)> =
            (0..d).map(|i| (labels.iter().map(|l| l[i]).collect(), i)).collect();
        keyed.sort();
        let mut out: Groups = Vec::new();
        for (key, i) in keyed {
            match out.last_mut() {
                Some((_, k, rows)) if *k == key => rows.push(i),
                _ => {
                    let offset = stage
                        .components
                        .iter()
                        .zip(&key)
                        .map(|(c, &l)| c.record.map_or(0, |s| l * self.strides[s]))
                        .sum();
                    out.push((offset, key, vec![i]));
                }
            }
        }
        out
    }

    /// `r` is the state in the eigenbasis of stage `k`.
    fn descend(&self, k: usize, r: CMatrix, index: usize, out: &mut [f64]) {
        // stages after the last selective one preserve the trace
        let last = match self.last_selective {
            Some(last) if k <= last => last,
            _ => {
                out[index] += r.trace().re;
                return;
            }
        };
        let stage = &self.program.stages[k];
        let groups = self.groups(stage);
        if k == last {
            for (offset, _, rows) in &groups {
                out[index + offset] += rows.iter().map(|&i| r[(i, i)].re).sum::<f64>();
            }
            return;
        }
        let w = &self.transitions[k + 1];
        let d = r.nrows();
        // Lüders merges outcomes that differ only in unrecorded labels
        let mut branches: Vec<(usize, Vec<&Vec<usize>>)> = Vec::new();
        for (offset, _, rows) in &groups {
            match branches.iter_mut().find(|b| b.0 == *offset && self.mode == Nonselective::Lueders) {
                Some(b) => b.1.push(rows),
                None => branches.push((*offset, vec![rows])),
            }
        }
        for (offset, parts) in branches {
            let weight: f64 = parts.iter().flat_map(|rows| rows.iter()).map(|&x| r[(x, x)].re).sum();
            if weight == 0.0 {
                continue;
            }
            let mut next = CMatrix::zeros(d, d);
            for rows in parts {
                next += carry(&r, w, rows);
            }
            self.descend(k + 1, next, index + offset, out);
        }
    }
}

const CHUNK: usize = 32;

/// Joint distribution over recorded slots, flat and row-major.
///
/// Nodes are processed in fixed-size chunks whose partial sums are added in
/// chunk order, so the result does not depend on the thread count.
pub fn run(program: &Program, rep: &Representation, mode: Nonselective) -> Vec<f64> {
    let len = program.table_len();
    let strides = program.strides();
    let stages = &program.stages;
    let last_selective = match mode {
        Nonselective::Lueders => stages.iter().rposition(|s| s.components.iter().any(|c| c.record.is_some())),
        // branching visits every stage so the outcome sums are exercised
        Nonselective::Branch => stages.len().checked_sub(1),
    };
    let mut transitions = Vec::with_capacity(stages.len());
    for (k, stage) in stages.iter().enumerate() {
        transitions.push(match k {
            0 => stage.vectors.clone(),
            _ => &stages[k - 1].vectors_adj * &stage.vectors,
        });
    }
    let start = match stages.first() {
        Some(s) => &s.vectors_adj * &rep.initial * &transitions[0],
        None => rep.initial.clone(),
    };
    let n_nodes = rep.n_nodes();
    let n_chunks = n_nodes.div_ceil(CHUNK);
    let partials: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; len];
            let mut local = vec![0.0; len];
            for node in c * CHUNK..((c + 1) * CHUNK).min(n_nodes) {
                let (shifts, w) = rep.node(node);
                let runner =
                    NodeRun { program, transitions: &transitions, shifts, strides: strides.clone(), mode, last_selective };
                local.iter_mut().for_each(|x| *x = 0.0);
                runner.descend(0, start.clone(), 0, &mut local);
                for (a, l) in acc.iter_mut().zip(&local) {
                    *a += w * l;
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; len];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}
