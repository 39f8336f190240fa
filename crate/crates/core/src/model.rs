//! Discrete-time stochastic kinetic model: individuals, events and the
//! event-based transition kernel.
//!
//! Time is 0-based. State `x_0` is drawn from the per-individual initial
//! distributions; `events_at(t)` for `t >= 1` governs the transition
//! `x_{t-1} -> x_t`, with hazards evaluated on `x_{t-1}`. At most one event
//! fires per step.

use crate::error::{Result, SkmError};

/// Slack allowed when checking that hazards sum to at most one.
pub const HAZARD_SLACK: f64 = 1e-12;
const NORMALIZATION_TOL: f64 = 1e-9;

/// One individual's role in an event.
#[derive(Debug, Clone, PartialEq)]
pub struct Participant {
    pub individual: usize,
    /// Per-state gating factor `g(x)`.
    pub g: Vec<f64>,
    /// State change applied when the event fires.
    pub delta: i32,
    pub reactants: u32,
    pub products: u32,
}

impl Participant {
    pub fn new(individual: usize, g: Vec<f64>, delta: i32) -> Self {
        Participant {
            individual,
            g,
            delta,
            reactants: delta.min(0).unsigned_abs(),
            products: delta.max(0) as u32,
        }
    }

    /// A participant that gates the hazard but is left unchanged.
    pub fn catalyst(individual: usize, g: Vec<f64>) -> Self {
        Participant {
            individual,
            g,
            delta: 0,
            reactants: 1,
            products: 1,
        }
    }

    /// Target state after the event, if it stays inside `0..num_states`.
    #[inline]
    pub fn target(&self, state: usize, num_states: usize) -> Option<usize> {
        let next = state as i64 + self.delta as i64;
        (next >= 0 && (next as usize) < num_states).then_some(next as usize)
    }
}

/// An event instance. `rate` indexes the shared rate-constant table, so all
/// instances with the same `rate` are tied during learning.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSpec {
    pub rate: usize,
    pub participants: Vec<Participant>,
}

impl EventSpec {
    pub fn new(rate: usize, participants: Vec<Participant>) -> Self {
        EventSpec { rate, participants }
    }

    /// Product of the gating factors on a joint state.
    pub fn gate(&self, x: &[usize]) -> f64 {
        self.participants
            .iter()
            .map(|p| p.g[x[p.individual]])
            .product()
    }

    pub fn involves(&self, m: usize) -> bool {
        self.participants.iter().any(|p| p.individual == m)
    }
}

/// Reference from an individual to one of the events it takes part in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Involvement {
    pub event: usize,
    pub participant: usize,
}

#[derive(Debug, Clone)]
pub struct SkmSystem {
    num_individuals: usize,
    num_states: usize,
    initial: Vec<Vec<f64>>,
    rates: Vec<f64>,
    events: Vec<Vec<EventSpec>>,
    // Derived indices.
    involvement: Vec<Vec<Vec<Involvement>>>,
    participant_offsets: Vec<Vec<usize>>,
}

impl SkmSystem {
    /// Builds and validates a system. `events.len()` is the horizon and
    /// `events[0]` must be empty because no transition leads into `x_0`.
    pub fn new(
        num_individuals: usize,
        num_states: usize,
        initial: Vec<Vec<f64>>,
        rates: Vec<f64>,
        events: Vec<Vec<EventSpec>>,
    ) -> Result<Self> {
        let invalid = |msg: String| Err(SkmError::InvalidModel(msg));
        if num_individuals == 0 || num_states == 0 || events.is_empty() {
            return invalid("M, S and T must all be positive".into());
        }
        if initial.len() != num_individuals {
            return invalid(format!(
                "expected {num_individuals} initial distributions, got {}",
                initial.len()
            ));
        }
        for (m, row) in initial.iter().enumerate() {
            check_distribution(row, num_states)
                .map_err(|e| SkmError::InvalidModel(format!("initial distribution {m}: {e}")))?;
        }
        check_rates(&rates)?;
        if !events[0].is_empty() {
            return invalid("events at t=0 are not allowed".into());
        }
        for (t, step) in events.iter().enumerate() {
            for (k, ev) in step.iter().enumerate() {
                validate_event(ev, t, k, num_individuals, num_states, rates.len())?;
            }
        }

        let mut involvement = Vec::with_capacity(events.len());
        let mut participant_offsets = Vec::with_capacity(events.len());
        for step in &events {
            let mut per_ind = vec![Vec::new(); num_individuals];
            let mut offsets = Vec::with_capacity(step.len() + 1);
            let mut acc = 0;
            for (k, ev) in step.iter().enumerate() {
                offsets.push(acc);
                acc += ev.participants.len();
                for (j, p) in ev.participants.iter().enumerate() {
                    per_ind[p.individual].push(Involvement {
                        event: k,
                        participant: j,
                    });
                }
            }
            offsets.push(acc);
            involvement.push(per_ind);
            participant_offsets.push(offsets);
        }

        Ok(SkmSystem {
            num_individuals,
            num_states,
            initial,
            rates,
            events,
            involvement,
            participant_offsets,
        })
    }

    pub fn num_individuals(&self) -> usize {
        self.num_individuals
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn horizon(&self) -> usize {
        self.events.len()
    }

    pub fn initial(&self, m: usize) -> &[f64] {
        &self.initial[m]
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn rate_of(&self, ev: &EventSpec) -> f64 {
        self.rates[ev.rate]
    }

    pub fn events_at(&self, t: usize) -> &[EventSpec] {
        &self.events[t]
    }

    /// Events (and participant slots) involving individual `m` at step `t`.
    pub fn involvement(&self, t: usize, m: usize) -> &[Involvement] {
        &self.involvement[t][m]
    }

    /// Offset of event `k`'s first participant in a flat per-step layout;
    /// entry `len` is the total participant count at `t`.
    pub fn participant_offsets(&self, t: usize) -> &[usize] {
        &self.participant_offsets[t]
    }

    /// Same structure with a different rate table.
    pub fn with_rates(&self, rates: Vec<f64>) -> Result<Self> {
        if rates.len() != self.rates.len() {
            return Err(SkmError::Dimension(format!(
                "expected {} rates, got {}",
                self.rates.len(),
                rates.len()
            )));
        }
        check_rates(&rates)?;
        let mut next = self.clone();
        next.rates = rates;
        Ok(next)
    }

    pub fn with_initial(&self, initial: Vec<Vec<f64>>) -> Result<Self> {
        SkmSystem::new(
            self.num_individuals,
            self.num_states,
            initial,
            self.rates.clone(),
            self.events.clone(),
        )
    }

    fn check_state(&self, x: &[usize]) -> Result<()> {
        if x.len() != self.num_individuals {
            return Err(SkmError::Dimension(format!(
                "joint state has {} entries, expected {}",
                x.len(),
                self.num_individuals
            )));
        }
        if let Some(bad) = x.iter().find(|&&s| s >= self.num_states) {
            return Err(SkmError::Dimension(format!(
                "state value {bad} outside 0..{}",
                self.num_states
            )));
        }
        Ok(())
    }

    /// Hazard `c_k * prod_m g_k^(m)(x^(m))` of event instance `k` at step `t`.
    pub fn event_hazard(&self, t: usize, x: &[usize], k: usize) -> Result<f64> {
        self.check_state(x)?;
        let ev = self
            .events
            .get(t)
            .and_then(|step| step.get(k))
            .ok_or(SkmError::UnknownEvent { t, event: k })?;
        let h = self.rate_of(ev) * ev.gate(x);
        if h > 1.0 + HAZARD_SLACK {
            return Err(SkmError::HazardOverflow {
                t,
                event: Some(k),
                value: h,
            });
        }
        Ok(h)
    }

    /// Sum of all event hazards at `t`, erroring when it exceeds one.
    pub fn total_hazard(&self, t: usize, x: &[usize]) -> Result<f64> {
        let mut total = 0.0;
        for ev in self.events_at(t) {
            total += self.rate_of(ev) * ev.gate(x);
        }
        if total > 1.0 + HAZARD_SLACK {
            return Err(SkmError::HazardOverflow {
                t,
                event: None,
                value: total,
            });
        }
        Ok(total)
    }

    /// Joint state after event `k` fires on `x`, or `None` if the move
    /// leaves the state space.
    pub fn apply_event(&self, t: usize, x: &[usize], k: usize) -> Option<Vec<usize>> {
        let mut next = x.to_vec();
        for p in &self.events[t][k].participants {
            next[p.individual] = p.target(x[p.individual], self.num_states)?;
        }
        Some(next)
    }

    /// Event-based kernel `P(x_t, v_t | x_{t-1})`; `v = None` is the no-event step.
    pub fn transition_prob(
        &self,
        t: usize,
        prev: &[usize],
        curr: &[usize],
        v: Option<usize>,
    ) -> Result<f64> {
        self.check_state(prev)?;
        self.check_state(curr)?;
        if t == 0 || t >= self.horizon() {
            return Err(SkmError::Dimension(format!(
                "transition step {t} outside 1..{}",
                self.horizon()
            )));
        }
        match v {
            None => {
                let total = self.total_hazard(t, prev)?;
                Ok(if prev == curr {
                    (1.0 - total).max(0.0)
                } else {
                    0.0
                })
            }
            Some(k) => {
                let h = self.event_hazard(t, prev, k)?;
                // Reject overflow anywhere in the step, not just for k.
                self.total_hazard(t, prev)?;
                if h == 0.0 {
                    return Ok(0.0);
                }
                Ok(match self.apply_event(t, prev, k) {
                    Some(next) if next == curr => h,
                    _ => 0.0,
                })
            }
        }
    }
}

fn check_rates(rates: &[f64]) -> Result<()> {
    for (i, &c) in rates.iter().enumerate() {
        if !(0.0..=1.0).contains(&c) {
            return Err(SkmError::InvalidModel(format!(
                "rate constant {i} = {c} outside [0, 1]"
            )));
        }
    }
    Ok(())
}

fn check_distribution(row: &[f64], n: usize) -> std::result::Result<(), String> {
    if row.len() != n {
        return Err(format!("length {} != {n}", row.len()));
    }
    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err("entries must be finite and non-negative".into());
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(format!("sums to {sum}"));
    }
    Ok(())
}

fn validate_event(
    ev: &EventSpec,
    t: usize,
    k: usize,
    num_individuals: usize,
    num_states: usize,
    num_rates: usize,
) -> Result<()> {
    let fail = |msg: String| Err(SkmError::InvalidModel(format!("event {k} at t={t}: {msg}")));
    if ev.rate >= num_rates {
        return fail(format!("rate index {} out of range", ev.rate));
    }
    if ev.participants.is_empty() {
        return fail("no participants".into());
    }
    for (j, p) in ev.participants.iter().enumerate() {
        if p.individual >= num_individuals {
            return fail(format!(
                "individual {} >= M={num_individuals}",
                p.individual
            ));
        }
        if ev.participants[..j]
            .iter()
            .any(|q| q.individual == p.individual)
        {
            return fail(format!("individual {} listed twice", p.individual));
        }
        if p.g.len() != num_states {
            return fail(format!(
                "g table has {} entries, expected {num_states}",
                p.g.len()
            ));
        }
        for (s, &g) in p.g.iter().enumerate() {
            if !g.is_finite() || g < 0.0 {
                return fail(format!("g({s}) = {g} must be finite and non-negative"));
            }
            if g > 0.0 && p.target(s, num_states).is_none() {
                return fail(format!(
                    "individual {} leaves the state space from state {s}",
                    p.individual
                ));
            }
        }
        if p.products as i64 - p.reactants as i64 != p.delta as i64 {
            return fail("products - reactants must equal delta".into());
        }
    }
    Ok(())
}

/// Emission model `P(y | x)` shared by all individuals.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationModel {
    num_states: usize,
    emission: Vec<f64>,
}

impl ObservationModel {
    /// `emission[x][y] = P(y | x)`; rows must be stochastic.
    pub fn new(emission: Vec<Vec<f64>>) -> Result<Self> {
        let n = emission.len();
        if n == 0 {
            return Err(SkmError::InvalidModel("empty emission matrix".into()));
        }
        for (x, row) in emission.iter().enumerate() {
            check_distribution(row, n)
                .map_err(|e| SkmError::InvalidModel(format!("emission row {x}: {e}")))?;
        }
        Ok(ObservationModel {
            num_states: n,
            emission: emission.into_iter().flatten().collect(),
        })
    }

    pub fn identity(num_states: usize) -> Self {
        let mut emission = vec![0.0; num_states * num_states];
        for s in 0..num_states {
            emission[s * num_states + s] = 1.0;
        }
        ObservationModel {
            num_states,
            emission,
        }
    }

    /// Every observation equally likely under every state.
    pub fn uninformative(num_states: usize) -> Self {
        ObservationModel {
            num_states,
            emission: vec![1.0 / num_states as f64; num_states * num_states],
        }
    }

    /// Binary symptom model: `P(y=1|x=1) = sensitivity`, `P(y=0|x=0) = specificity`.
    pub fn binary(sensitivity: f64, specificity: f64) -> Result<Self> {
        ObservationModel::new(vec![
            vec![specificity, 1.0 - specificity],
            vec![1.0 - sensitivity, sensitivity],
        ])
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// `P(y | x)`, or 1 for a missing observation.
    #[inline]
    pub fn likelihood(&self, x: usize, y: Option<usize>) -> f64 {
        match y {
            Some(y) => self.emission[x * self.num_states + y],
            None => 1.0,
        }
    }
}

/// A `T x M` grid of optional observations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observations {
    horizon: usize,
    num_individuals: usize,
    values: Vec<Option<usize>>,
}

impl Observations {
    pub fn missing(horizon: usize, num_individuals: usize) -> Self {
        Observations {
            horizon,
            num_individuals,
            values: vec![None; horizon * num_individuals],
        }
    }

    /// Builds from rows indexed `[t][m]`.
    pub fn from_rows(rows: Vec<Vec<Option<usize>>>) -> Result<Self> {
        let horizon = rows.len();
        let num_individuals = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != num_individuals) {
            return Err(SkmError::Dimension("ragged observation rows".into()));
        }
        Ok(Observations {
            horizon,
            num_individuals,
            values: rows.into_iter().flatten().collect(),
        })
    }

    /// Fully observed grid from a state path.
    pub fn from_states(states: &[Vec<usize>]) -> Self {
        let rows = states
            .iter()
            .map(|r| r.iter().map(|&s| Some(s)).collect())
            .collect();
        Observations::from_rows(rows).expect("state rows are rectangular")
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_individuals(&self) -> usize {
        self.num_individuals
    }

    #[inline]
    pub fn get(&self, t: usize, m: usize) -> Option<usize> {
        self.values[t * self.num_individuals + m]
    }

    pub fn set(&mut self, t: usize, m: usize, y: Option<usize>) {
        self.values[t * self.num_individuals + m] = y;
    }

    pub fn observed_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn check_against(&self, system: &SkmSystem, obs: &ObservationModel) -> Result<()> {
        if self.horizon != system.horizon() || self.num_individuals != system.num_individuals() {
            return Err(SkmError::Dimension(format!(
                "observations are {}x{}, system is {}x{}",
                self.horizon,
                self.num_individuals,
                system.horizon(),
                system.num_individuals()
            )));
        }
        if obs.num_states() != system.num_states() {
            return Err(SkmError::Dimension(
                "emission matrix size differs from the state space".into(),
            ));
        }
        if let Some(y) = self
            .values
            .iter()
            .flatten()
            .find(|&&y| y >= obs.num_states())
        {
            return Err(SkmError::Dimension(format!("observation {y} out of range")));
        }
        Ok(())
    }
}

/// Hidden states, observations and the event sequence of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBundle {
    /// `states[t][m]`.
    pub states: Vec<Vec<usize>>,
    pub observations: Observations,
    /// Event instance fired at each step; `events[0]` is always `None`.
    pub events: Vec<Option<usize>>,
}

/// Outcome of [`path_log_likelihood`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLikelihood {
    pub log_prob: f64,
    /// First step with zero probability, when `log_prob` is `-inf`.
    pub zero_at: Option<usize>,
}

/// Log of the joint probability of states, events and observations.
pub fn path_log_likelihood(
    system: &SkmSystem,
    obs: &ObservationModel,
    bundle: &TrajectoryBundle,
) -> Result<PathLikelihood> {
    let horizon = system.horizon();
    if bundle.states.len() != horizon || bundle.events.len() != horizon {
        return Err(SkmError::Dimension(format!(
            "bundle covers {} steps, system has {horizon}",
            bundle.states.len()
        )));
    }
    bundle.observations.check_against(system, obs)?;
    for row in &bundle.states {
        system.check_state(row)?;
    }

    let mut log_prob = 0.0;
    let mut zero_at = None;
    let mut add = |t: usize, p: f64, log_prob: &mut f64| {
        if p <= 0.0 && zero_at.is_none() {
            zero_at = Some(t);
        }
        *log_prob += p.ln();
    };
    for t in 0..horizon {
        let x = &bundle.states[t];
        let step = if t == 0 {
            (0..system.num_individuals())
                .map(|m| system.initial(m)[x[m]])
                .product()
        } else {
            system.transition_prob(t, &bundle.states[t - 1], x, bundle.events[t])?
        };
        add(t, step, &mut log_prob);
        for (m, &state) in x.iter().enumerate() {
            add(
                t,
                obs.likelihood(state, bundle.observations.get(t, m)),
                &mut log_prob,
            );
        }
    }
    Ok(PathLikelihood {
        log_prob: if zero_at.is_some() {
            f64::NEG_INFINITY
        } else {
            log_prob
        },
        zero_at,
    })
}

/// Draws one realization from the single-event kernel and the emission model.
pub fn sample_trajectory<R: rand::Rng + ?Sized>(
    system: &SkmSystem,
    obs: &ObservationModel,
    rng: &mut R,
) -> Result<TrajectoryBundle> {
    let horizon = system.horizon();
    let m_count = system.num_individuals();
    let mut states = Vec::with_capacity(horizon);
    let mut events = vec![None; horizon];
    let x0: Vec<usize> = (0..m_count)
        .map(|m| sample_index(system.initial(m), rng))
        .collect();
    states.push(x0);
    for t in 1..horizon {
        let prev = &states[t - 1];
        let hazards: Vec<f64> = system
            .events_at(t)
            .iter()
            .map(|ev| system.rate_of(ev) * ev.gate(prev))
            .collect();
        let total: f64 = hazards.iter().sum();
        if total > 1.0 + HAZARD_SLACK {
            return Err(SkmError::HazardOverflow {
                t,
                event: None,
                value: total,
            });
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut fired = None;
        for (k, h) in hazards.iter().enumerate() {
            acc += h;
            if u < acc {
                fired = Some(k);
                break;
            }
        }
        let next = match fired {
            Some(k) => system
                .apply_event(t, prev, k)
                .expect("events with positive hazard stay in range"),
            None => prev.clone(),
        };
        events[t] = fired;
        states.push(next);
    }
    let observations = sample_observations(&states, obs, rng);
    Ok(TrajectoryBundle {
        states,
        observations,
        events,
    })
}

/// Emits one observation per cell.
pub fn sample_observations<R: rand::Rng + ?Sized>(
    states: &[Vec<usize>],
    obs: &ObservationModel,
    rng: &mut R,
) -> Observations {
    let n = obs.num_states();
    let rows = states
        .iter()
        .map(|row| {
            row.iter()
                .map(|&x| {
                    let probs: Vec<f64> = (0..n).map(|y| obs.likelihood(x, Some(y))).collect();
                    Some(sample_index(&probs, rng))
                })
                .collect()
        })
        .collect();
    Observations::from_rows(rows).expect("state rows are rectangular")
}

/// Inverse-CDF draw from a discrete distribution.
pub(crate) fn sample_index<R: rand::Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn indicator(s: usize, on: usize) -> Vec<f64> {
        (0..s).map(|x| if x == on { 1.0 } else { 0.0 }).collect()
    }

    /// Two individuals; susceptible 0 can be infected by infectious 1.
    fn sis_pair(c2: f64) -> SkmSystem {
        let infect = EventSpec::new(
            0,
            vec![
                Participant::new(0, indicator(2, 0), 1),
                Participant::catalyst(1, indicator(2, 1)),
            ],
        );
        SkmSystem::new(
            2,
            2,
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![c2],
            vec![vec![], vec![infect]],
        )
        .unwrap()
    }

    #[test]
    fn infection_hazard_equals_rate() {
        let sys = sis_pair(0.3);
        assert_eq!(sys.event_hazard(1, &[0, 1], 0).unwrap(), 0.3);
        // Zero factor annihilates the product.
        assert_eq!(sys.event_hazard(1, &[1, 1], 0).unwrap(), 0.0);
        assert_eq!(sys.event_hazard(1, &[0, 0], 0).unwrap(), 0.0);
    }

    #[test]
    fn hazard_is_product_of_factors() {
        let ev = EventSpec::new(
            0,
            vec![
                Participant::catalyst(0, vec![1.0, 1.0]),
                Participant::catalyst(1, vec![3.0, 0.0]),
            ],
        );
        let sys = SkmSystem::new(
            2,
            2,
            vec![vec![1.0, 0.0]; 2],
            vec![0.2],
            vec![vec![], vec![ev]],
        )
        .unwrap();
        let h = sys.event_hazard(1, &[1, 0], 0).unwrap();
        assert!((h - 0.6).abs() < 1e-15);
    }

    #[test]
    fn unknown_event_and_overflow() {
        let sys = sis_pair(0.3);
        assert_eq!(
            sys.event_hazard(1, &[0, 1], 5),
            Err(SkmError::UnknownEvent { t: 1, event: 5 })
        );
        let ev = EventSpec::new(0, vec![Participant::catalyst(0, vec![4.0, 4.0])]);
        let sys = SkmSystem::new(
            1,
            2,
            vec![vec![1.0, 0.0]],
            vec![0.5],
            vec![vec![], vec![ev]],
        )
        .unwrap();
        match sys.event_hazard(1, &[0], 0) {
            Err(SkmError::HazardOverflow {
                t: 1,
                event: Some(0),
                ..
            }) => {}
            other => panic!("expected overflow, got {other:?}"),
        }
        assert!(sys.transition_prob(1, &[0], &[0], None).is_err());
    }

    #[test]
    fn empty_step_keeps_state() {
        let sys = SkmSystem::new(1, 2, vec![vec![0.5, 0.5]], vec![], vec![vec![], vec![]]).unwrap();
        assert_eq!(sys.transition_prob(1, &[1], &[1], None).unwrap(), 1.0);
        assert_eq!(sys.transition_prob(1, &[1], &[0], None).unwrap(), 0.0);
    }

    #[test]
    fn sis_pair_kernel() {
        let sys = sis_pair(0.1);
        let p_inf = sys.transition_prob(1, &[0, 1], &[1, 1], Some(0)).unwrap();
        let p_stay = sys.transition_prob(1, &[0, 1], &[0, 1], None).unwrap();
        assert!((p_inf - 0.1).abs() < 1e-15);
        assert!((p_stay - 0.9).abs() < 1e-15);
        // Wrong target under the fired event.
        assert_eq!(
            sys.transition_prob(1, &[0, 1], &[0, 1], Some(0)).unwrap(),
            0.0
        );
    }

    #[test]
    fn rejects_bad_models() {
        // Moves out of range from a state with positive g.
        let ev = EventSpec::new(0, vec![Participant::new(0, vec![1.0, 1.0], 1)]);
        assert!(SkmSystem::new(
            1,
            2,
            vec![vec![1.0, 0.0]],
            vec![0.1],
            vec![vec![], vec![ev]]
        )
        .is_err());
        let ev = EventSpec::new(0, vec![Participant::new(3, vec![1.0, 0.0], 1)]);
        assert!(SkmSystem::new(
            1,
            2,
            vec![vec![1.0, 0.0]],
            vec![0.1],
            vec![vec![], vec![ev]]
        )
        .is_err());
        assert!(SkmSystem::new(1, 2, vec![vec![0.7, 0.7]], vec![], vec![vec![]]).is_err());
        assert!(ObservationModel::new(vec![vec![0.5, 0.6], vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn deterministic_chain_has_zero_log_likelihood() {
        let ev = EventSpec::new(0, vec![Participant::new(0, vec![1.0, 1.0, 0.0], 1)]);
        let sys = SkmSystem::new(
            1,
            3,
            vec![vec![1.0, 0.0, 0.0]],
            vec![1.0],
            vec![vec![], vec![ev.clone()], vec![ev]],
        )
        .unwrap();
        let states = vec![vec![0], vec![1], vec![2]];
        let bundle = TrajectoryBundle {
            observations: Observations::from_states(&states),
            states,
            events: vec![None, Some(0), Some(0)],
        };
        let ll = path_log_likelihood(&sys, &ObservationModel::identity(3), &bundle).unwrap();
        assert_eq!(ll.log_prob, 0.0);
        assert_eq!(ll.zero_at, None);
    }

    #[test]
    fn initial_mass_only() {
        let sys = SkmSystem::new(1, 2, vec![vec![0.5, 0.5]], vec![], vec![vec![], vec![]]).unwrap();
        let states = vec![vec![1], vec![1]];
        let bundle = TrajectoryBundle {
            observations: Observations::from_states(&states),
            states,
            events: vec![None, None],
        };
        let ll = path_log_likelihood(&sys, &ObservationModel::identity(2), &bundle).unwrap();
        assert!((ll.log_prob - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn impossible_step_reports_time() {
        let sys = sis_pair(0.1);
        let states = vec![vec![0, 1], vec![1, 0]];
        let bundle = TrajectoryBundle {
            observations: Observations::missing(2, 2),
            states,
            events: vec![None, Some(0)],
        };
        let ll = path_log_likelihood(&sys, &ObservationModel::identity(2), &bundle).unwrap();
        assert_eq!(ll.log_prob, f64::NEG_INFINITY);
        assert_eq!(ll.zero_at, Some(1));
    }
}
