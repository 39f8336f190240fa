//! Neighbor summaries and the per-individual marginalized kernel.

use crate::model::SkmSystem;

use super::{Coupling, Messages};

/// Expected gating factors of every event participant at one step.
///
/// For participant `j` of event `k` (individual `m'`), with
/// `w(x) = alpha_{t-1}(x) * P(y_t | x) * beta_t(x)` taken over the
/// unchanged branch:
///
/// * `tilde = sum_x alpha_{t-1}(x) g(x) P(y_t | x+d) beta_t(x+d) / sum_x w(x)`
/// * `hat   = sum_x w(x) g(x) / sum_x w(x)`
///
/// Non-participants implicitly have `tilde = hat = 1`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NeighborSummaries {
    pub t: usize,
    /// Flat over participants, laid out by `SkmSystem::participant_offsets`.
    pub tilde: Vec<f64>,
    pub hat: Vec<f64>,
    /// Per event: product of all participants' `tilde` / `hat`.
    pub event_tilde: Vec<f64>,
    pub event_hat: Vec<f64>,
    pub total_tilde: f64,
    pub total_hat: f64,
    /// Per participant: `c` times the product of the other participants'
    /// `tilde` / `hat`, i.e. the event's weight seen from that participant.
    pub excl_tilde: Vec<f64>,
    pub excl_hat: Vec<f64>,
    /// Denominators that had to be floored.
    pub degenerate: usize,
}

impl NeighborSummaries {
    /// `tilde` for individual `m` in event `k`, 1 when `m` does not take part.
    pub fn g_tilde(&self, system: &SkmSystem, k: usize, m: usize) -> f64 {
        self.lookup(system, k, m, &self.tilde)
    }

    pub fn g_hat(&self, system: &SkmSystem, k: usize, m: usize) -> f64 {
        self.lookup(system, k, m, &self.hat)
    }

    fn lookup(&self, system: &SkmSystem, k: usize, m: usize, values: &[f64]) -> f64 {
        let off = system.participant_offsets(self.t)[k];
        system.events_at(self.t)[k]
            .participants
            .iter()
            .position(|p| p.individual == m)
            .map_or(1.0, |j| values[off + j])
    }
}

/// Computes summaries for step `t >= 1`. `emission` holds `P(y_t^(m) | x)`
/// laid out `m`-major (`M x S`); `None` hides the step's evidence.
#[cfg(test)]
pub(crate) fn compute_summaries(
    system: &SkmSystem,
    messages: &Messages,
    t: usize,
    floor: f64,
    emission: Option<&[f64]>,
) -> NeighborSummaries {
    let s = system.num_states();
    let m_count = system.num_individuals();
    let offsets = system.participant_offsets(t);
    let total = *offsets.last().unwrap_or(&0);
    let mut out = NeighborSummaries {
        t,
        tilde: Vec::with_capacity(total),
        hat: Vec::with_capacity(total),
        excl_tilde: vec![0.0; total],
        excl_hat: vec![0.0; total],
        event_tilde: Vec::with_capacity(offsets.len().saturating_sub(1)),
        event_hat: Vec::with_capacity(offsets.len().saturating_sub(1)),
        ..Default::default()
    };
    // Per individual: e(x) * beta(x) and the stay-branch normalizer.
    let mut eb = vec![0.0; m_count * s];
    let mut denom = vec![0.0; m_count];
    for m in 0..m_count {
        if system.involvement(t, m).is_empty() {
            continue;
        }
        let alpha = messages.alpha(m, t - 1);
        let beta = messages.beta(m, t);
        let row = &mut eb[m * s..(m + 1) * s];
        let mut d = 0.0;
        for x in 0..s {
            row[x] = beta[x] * emission.map_or(1.0, |e| e[m * s + x]);
            d += alpha[x] * row[x];
        }
        if d < floor {
            d = floor;
            out.degenerate += 1;
        }
        denom[m] = d;
    }
    for ev in system.events_at(t) {
        let c = system.rate_of(ev);
        let mut prod_tilde = 1.0;
        let mut prod_hat = 1.0;
        for p in &ev.participants {
            let m = p.individual;
            let alpha = messages.alpha(m, t - 1);
            let row = &eb[m * s..(m + 1) * s];
            let mut num_tilde = 0.0;
            let mut num_hat = 0.0;
            for x in 0..s {
                let g = p.g[x];
                if g == 0.0 {
                    continue;
                }
                let ag = alpha[x] * g;
                num_hat += ag * row[x];
                if let Some(y) = p.target(x, s) {
                    num_tilde += ag * row[y];
                }
            }
            let (gt, gh) = (num_tilde / denom[m], num_hat / denom[m]);
            out.tilde.push(gt);
            out.hat.push(gh);
            prod_tilde *= gt;
            prod_hat *= gh;
        }
        out.event_tilde.push(c * prod_tilde);
        out.event_hat.push(c * prod_hat);
        out.total_tilde += c * prod_tilde;
        out.total_hat += c * prod_hat;
    }
    for (k, ev) in system.events_at(t).iter().enumerate() {
        let c = system.rate_of(ev);
        let off = offsets[k];
        let n = ev.participants.len();
        // Products over all other participants without dividing.
        for j in 0..n {
            let mut pt = c;
            let mut ph = c;
            for i in 0..n {
                if i != j {
                    pt *= out.tilde[off + i];
                    ph *= out.hat[off + i];
                }
            }
            out.excl_tilde[off + j] = pt;
            out.excl_hat[off + j] = ph;
        }
    }
    out
}

/// Label of a kernel branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    NoEvent,
    Event(usize),
}

/// Visits every nonzero branch `(branch, x_prev, x_curr, weight)` of
/// individual `m`'s marginalized kernel at step `t`. Returns the number of
/// rows whose no-event mass went negative and was clamped to `floor`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn for_each_branch(
    system: &SkmSystem,
    summaries: &NeighborSummaries,
    t: usize,
    m: usize,
    coupling: Coupling,
    floor: f64,
    emit_others: bool,
    mut emit: impl FnMut(Branch, usize, usize, f64),
) -> usize {
    let s = system.num_states();
    let events = system.events_at(t);
    let offsets = system.participant_offsets(t);
    let involvement = system.involvement(t, m);

    // Events not touching m enter only under global coupling, as a constant
    // on every row.
    let other_hat = match coupling {
        Coupling::Local | Coupling::Auto => 0.0,
        Coupling::Global => {
            let mut hat = summaries.total_hat;
            for inv in involvement {
                hat -= summaries.event_hat[inv.event];
            }
            hat
        }
    };

    let mut clamped = 0;
    for a in 0..s {
        let mut no_event = 1.0 - other_hat;
        for inv in involvement {
            let ev = &events[inv.event];
            let p = &ev.participants[inv.participant];
            let g = p.g[a];
            if g == 0.0 {
                continue;
            }
            let slot = offsets[inv.event] + inv.participant;
            no_event -= g * summaries.excl_hat[slot];
            let b = p.target(a, s).expect("validated events stay in range");
            emit(
                Branch::Event(inv.event),
                a,
                b,
                g * summaries.excl_tilde[slot],
            );
        }
        if no_event < 0.0 {
            no_event = floor;
            clamped += 1;
        }
        emit(Branch::NoEvent, a, a, no_event);
        if coupling == Coupling::Global && emit_others {
            for (k, ev) in events.iter().enumerate() {
                if !ev.involves(m) {
                    emit(Branch::Event(k), a, a, summaries.event_tilde[k]);
                }
            }
        }
    }
    clamped
}

/// Dense `S x S` kernel summed over branches; returns the clamp count.
#[cfg(test)]
pub(crate) fn fill_dense_kernel(
    system: &SkmSystem,
    summaries: &NeighborSummaries,
    t: usize,
    m: usize,
    coupling: Coupling,
    floor: f64,
    out: &mut [f64],
) -> usize {
    let s = system.num_states();
    out.iter_mut().for_each(|v| *v = 0.0);
    let mut clamped = 0;
    match coupling {
        Coupling::Local | Coupling::Auto => {
            clamped += for_each_branch(
                system,
                summaries,
                t,
                m,
                coupling,
                floor,
                false,
                |_, a, b, w| {
                    out[a * s + b] += w;
                },
            );
        }
        Coupling::Global => {
            // Avoid the O(V) per-row walk: other events add a constant stay mass.
            let mut other_tilde = summaries.total_tilde;
            for inv in system.involvement(t, m) {
                other_tilde -= summaries.event_tilde[inv.event];
            }
            clamped += for_each_branch(
                system,
                summaries,
                t,
                m,
                Coupling::Global,
                floor,
                false,
                |_, a, b, w| out[a * s + b] += w,
            );
            for a in 0..s {
                out[a * s + a] += other_tilde;
            }
        }
    }
    clamped
}

/// Individual `m`'s marginalized kernel at one step, split by branch.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalKernel {
    pub num_states: usize,
    /// `(branch, S x S weights)`, row = previous state.
    pub branches: Vec<(Branch, Vec<f64>)>,
    pub clamped: usize,
}

impl MarginalKernel {
    pub(crate) fn build(
        system: &SkmSystem,
        summaries: &NeighborSummaries,
        t: usize,
        m: usize,
        coupling: Coupling,
        floor: f64,
    ) -> Self {
        let s = system.num_states();
        let mut branches: Vec<(Branch, Vec<f64>)> = Vec::new();
        let clamped = for_each_branch(
            system,
            summaries,
            t,
            m,
            coupling,
            floor,
            true,
            |br, a, b, w| {
                let idx = match branches.iter().position(|(x, _)| *x == br) {
                    Some(i) => i,
                    None => {
                        branches.push((br, vec![0.0; s * s]));
                        branches.len() - 1
                    }
                };
                branches[idx].1[a * s + b] += w;
            },
        );
        MarginalKernel {
            num_states: s,
            branches,
            clamped,
        }
    }

    /// Sum over branches.
    pub fn dense(&self) -> Vec<f64> {
        let s = self.num_states;
        let mut out = vec![0.0; s * s];
        for (_, w) in &self.branches {
            for (o, v) in out.iter_mut().zip(w) {
                *o += v;
            }
        }
        out
    }

    pub fn branch(&self, branch: Branch) -> Option<&[f64]> {
        self.branches
            .iter()
            .find(|(b, _)| *b == branch)
            .map(|(_, w)| w.as_slice())
    }
}

/// Flat, contiguous copy of the participant structure for the dense-kernel
/// hot path. Slots are numbered globally across steps.
#[derive(Debug, Clone)]
pub(crate) struct KernelPlan {
    s: usize,
    m_count: usize,
    /// First global slot of each step.
    step_base: Vec<usize>,
    /// Per global slot: gating factors (`S`) and target state (`S`, `NONE`
    /// when the event cannot fire from that state).
    g: Vec<f64>,
    target: Vec<u32>,
    individual: Vec<u32>,
    /// Per step: first global event index.
    event_base: Vec<usize>,
    /// Per global event: index into the system's rate table.
    rate_index: Vec<u32>,
    /// Per `(t, m)`: range into `inv_slots` / `inv_events`.
    inv_start: Vec<usize>,
    /// Step-local slot and event index of each involvement.
    inv_slots: Vec<u32>,
    inv_events: Vec<u32>,
}

const NONE: u32 = u32::MAX;

impl KernelPlan {
    pub(crate) fn new(system: &SkmSystem) -> Self {
        let s = system.num_states();
        let m_count = system.num_individuals();
        let horizon = system.horizon();
        let mut plan = KernelPlan {
            s,
            m_count,
            step_base: Vec::with_capacity(horizon + 1),
            g: Vec::new(),
            target: Vec::new(),
            individual: Vec::new(),
            event_base: Vec::with_capacity(horizon + 1),
            rate_index: Vec::new(),
            inv_start: Vec::with_capacity(horizon * m_count + 1),
            inv_slots: Vec::new(),
            inv_events: Vec::new(),
        };
        let mut base = 0;
        for t in 0..horizon {
            plan.step_base.push(base);
            plan.event_base.push(plan.rate_index.len());
            for ev in system.events_at(t) {
                plan.rate_index.push(ev.rate as u32);
                for p in &ev.participants {
                    plan.individual.push(p.individual as u32);
                    for x in 0..s {
                        plan.g.push(p.g[x]);
                        plan.target.push(match p.target(x, s) {
                            Some(y) if p.g[x] != 0.0 => y as u32,
                            _ => NONE,
                        });
                    }
                }
            }
            base += *system.participant_offsets(t).last().unwrap_or(&0);
            for m in 0..m_count {
                plan.inv_start.push(plan.inv_slots.len());
                let offsets = system.participant_offsets(t);
                for inv in system.involvement(t, m) {
                    plan.inv_slots
                        .push((offsets[inv.event] + inv.participant) as u32);
                    plan.inv_events.push(inv.event as u32);
                }
            }
        }
        plan.step_base.push(base);
        plan.event_base.push(plan.rate_index.len());
        plan.inv_start.push(plan.inv_slots.len());
        plan
    }

    /// Same result as `compute_summaries`, reading the flat layout.
    pub(crate) fn summaries(
        &self,
        system: &SkmSystem,
        messages: &Messages,
        t: usize,
        floor: f64,
        emission: Option<&[f64]>,
    ) -> NeighborSummaries {
        let (s, m_count) = (self.s, self.m_count);
        let offsets = system.participant_offsets(t);
        let total = *offsets.last().unwrap_or(&0);
        let n_events = offsets.len().saturating_sub(1);
        let base = self.step_base[t];
        let mut out = NeighborSummaries {
            t,
            tilde: vec![0.0; total],
            hat: vec![0.0; total],
            excl_tilde: vec![0.0; total],
            excl_hat: vec![0.0; total],
            event_tilde: Vec::with_capacity(n_events),
            event_hat: Vec::with_capacity(n_events),
            ..Default::default()
        };
        // Per individual: alpha_{t-1}, e(x) * beta_t(x) and the stay-branch
        // normalizer, gathered contiguously.
        let mut prev = vec![0.0; m_count * s];
        let mut eb = vec![0.0; m_count * s];
        let mut denom = vec![1.0; m_count];
        let involved = &self.inv_start[t * m_count..=(t + 1) * m_count];
        for m in 0..m_count {
            if involved[m] == involved[m + 1] {
                continue;
            }
            let alpha = messages.alpha(m, t - 1);
            let beta = messages.beta(m, t);
            let a_row = &mut prev[m * s..(m + 1) * s];
            let e_row = &mut eb[m * s..(m + 1) * s];
            let mut d = 0.0;
            for x in 0..s {
                a_row[x] = alpha[x];
                e_row[x] = beta[x] * emission.map_or(1.0, |e| e[m * s + x]);
                d += alpha[x] * e_row[x];
            }
            if d < floor {
                d = floor;
                out.degenerate += 1;
            }
            denom[m] = d;
        }
        let g_step = &self.g[base * s..(base + total) * s];
        let tgt_step = &self.target[base * s..(base + total) * s];
        let ind_step = &self.individual[base..base + total];
        for ((((g, tgt), &m), gt), gh) in g_step
            .chunks_exact(s)
            .zip(tgt_step.chunks_exact(s))
            .zip(ind_step)
            .zip(out.tilde.iter_mut())
            .zip(out.hat.iter_mut())
        {
            let m = m as usize;
            let alpha = &prev[m * s..(m + 1) * s];
            let row = &eb[m * s..(m + 1) * s];
            let (mut num_tilde, mut num_hat) = (0.0, 0.0);
            for x in 0..s {
                let y = tgt[x];
                if y == NONE {
                    continue;
                }
                let ag = alpha[x] * g[x];
                num_hat += ag * row[x];
                num_tilde += ag * row[y as usize];
            }
            *gt = num_tilde / denom[m];
            *gh = num_hat / denom[m];
        }
        let rates = system.rates();
        let first = self.event_base[t];
        for (k, &r) in self.rate_index[first..first + n_events].iter().enumerate() {
            let c = rates[r as usize];
            let (lo, hi) = (offsets[k], offsets[k + 1]);
            let (tilde, hat) = (&out.tilde[lo..hi], &out.hat[lo..hi]);
            let (ex_t, ex_h) = (&mut out.excl_tilde[lo..hi], &mut out.excl_hat[lo..hi]);
            let (prod_tilde, prod_hat) = match hi - lo {
                1 => {
                    ex_t[0] = c;
                    ex_h[0] = c;
                    (c * tilde[0], c * hat[0])
                }
                2 => {
                    ex_t[0] = c * tilde[1];
                    ex_h[0] = c * hat[1];
                    ex_t[1] = c * tilde[0];
                    ex_h[1] = c * hat[0];
                    (ex_t[1] * tilde[1], ex_h[1] * hat[1])
                }
                n => {
                    // Products over all other participants without dividing.
                    for j in 0..n {
                        let (mut pt, mut ph) = (c, c);
                        for i in (0..n).filter(|&i| i != j) {
                            pt *= tilde[i];
                            ph *= hat[i];
                        }
                        ex_t[j] = pt;
                        ex_h[j] = ph;
                    }
                    (
                        tilde.iter().fold(c, |acc, v| acc * v),
                        hat.iter().fold(c, |acc, v| acc * v),
                    )
                }
            };
            out.event_tilde.push(prod_tilde);
            out.event_hat.push(prod_hat);
            out.total_tilde += prod_tilde;
            out.total_hat += prod_hat;
        }
        out
    }

    /// Same result as `fill_dense_kernel`, without walking the event structure.
    pub(crate) fn fill(
        &self,
        summaries: &NeighborSummaries,
        t: usize,
        m: usize,
        coupling: Coupling,
        floor: f64,
        out: &mut [f64],
    ) -> usize {
        let s = self.s;
        let i = t * self.m_count + m;
        let range = self.inv_start[i]..self.inv_start[i + 1];
        let slots = &self.inv_slots[range.clone()];
        let base = self.step_base[t];
        let (other_hat, other_tilde) = match coupling {
            Coupling::Local | Coupling::Auto => (0.0, 0.0),
            Coupling::Global => {
                let mut hat = summaries.total_hat;
                let mut tilde = summaries.total_tilde;
                for &k in &self.inv_events[range] {
                    hat -= summaries.event_hat[k as usize];
                    tilde -= summaries.event_tilde[k as usize];
                }
                (hat, tilde)
            }
        };
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut clamped = 0;
        for a in 0..s {
            let mut no_event = 1.0 - other_hat;
            for &slot in slots {
                let j = (base + slot as usize) * s + a;
                let b = self.target[j];
                if b == NONE {
                    continue;
                }
                let g = self.g[j];
                no_event -= g * summaries.excl_hat[slot as usize];
                out[a * s + b as usize] += g * summaries.excl_tilde[slot as usize];
            }
            if no_event < 0.0 {
                no_event = floor;
                clamped += 1;
            }
            out[a * s + a] += no_event;
            if coupling == Coupling::Global {
                out[a * s + a] += other_tilde;
            }
        }
        clamped
    }
}
