//! A small stock-and-flow simulation core.
//!
//! Models are built from [`VariableDef`]s, validated once into a
//! [`StockFlowModel`] with a fixed evaluation order for every computed
//! variable, and then advanced one explicit Euler step at a time. Between
//! steps the caller may [`inject`](SimState::inject) values into exogenous
//! variables, which is what lets an external spatial component drive the
//! model in lock-step ("game mode").

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Name reserved for the simulation clock; readable through [`SimState::get`].
pub const TIME: &str = "time";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("model has no variables")]
    Empty,
    #[error("time step must be positive and finite, got {0}")]
    InvalidDt(f64),
    #[error("variable id must be non-empty")]
    EmptyId,
    #[error("`{TIME}` is reserved for the simulation clock")]
    ReservedId,
    #[error("duplicate variable `{0}`")]
    Duplicate(String),
    #[error("`{from}` references unknown variable `{missing}`")]
    Dangling { from: String, missing: String },
    #[error("stock `{stock}` lists `{flow}` as a flow, but it is not a flow variable")]
    NotAFlow { stock: String, flow: String },
    #[error("dependency cycle without a stock: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("exogenous variable `{0}` was read before any value was injected")]
    Uninjected(String),
    #[error("`{0}` is not exogenous and cannot be injected")]
    NotExogenous(String),
    #[error("`{0}` is not a stock")]
    NotAStock(String),
    #[error("unknown variable `{0}`")]
    Unknown(String),
    #[error("non-finite value {value} for `{variable}` at time {time}")]
    NonFinite {
        variable: String,
        value: f64,
        time: f64,
    },
}

pub type Result<T> = std::result::Result<T, EngineError>;

/// Unique name of a model variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VariableId(String);

impl VariableId {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VariableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for VariableId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

type EvalFn = dyn Fn(&[f64], f64) -> f64 + Send + Sync;

/// A pure function of declared inputs and the current time.
///
/// The closure receives the values of `inputs` in declaration order. Only
/// declared inputs are visible, so the dependency graph is always exact.
#[derive(Clone)]
pub struct Expr {
    inputs: Vec<VariableId>,
    eval: Arc<EvalFn>,
}

impl Expr {
    pub fn new<F>(inputs: &[&str], eval: F) -> Self
    where
        F: Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            inputs: inputs.iter().map(|s| VariableId::new(*s)).collect(),
            eval: Arc::new(eval),
        }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(&[], move |_, _| value)
    }

    pub fn inputs(&self) -> &[VariableId] {
        &self.inputs
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Expr")
            .field("inputs", &self.inputs)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum VariableKind {
    Stock {
        init: f64,
        inflows: Vec<VariableId>,
        outflows: Vec<VariableId>,
    },
    Flow(Expr),
    Auxiliary(Expr),
    Constant(f64),
    Exogenous,
}

#[derive(Debug, Clone)]
pub struct VariableDef {
    pub id: VariableId,
    pub kind: VariableKind,
}

impl VariableDef {
    pub fn stock(id: &str, init: f64, inflows: &[&str], outflows: &[&str]) -> Self {
        Self {
            id: id.into(),
            kind: VariableKind::Stock {
                init,
                inflows: inflows.iter().map(|s| VariableId::new(*s)).collect(),
                outflows: outflows.iter().map(|s| VariableId::new(*s)).collect(),
            },
        }
    }

    pub fn flow(id: &str, expr: Expr) -> Self {
        Self {
            id: id.into(),
            kind: VariableKind::Flow(expr),
        }
    }

    pub fn auxiliary(id: &str, expr: Expr) -> Self {
        Self {
            id: id.into(),
            kind: VariableKind::Auxiliary(expr),
        }
    }

    pub fn constant(id: &str, value: f64) -> Self {
        Self {
            id: id.into(),
            kind: VariableKind::Constant(value),
        }
    }

    pub fn exogenous(id: &str) -> Self {
        Self {
            id: id.into(),
            kind: VariableKind::Exogenous,
        }
    }

    fn expr(&self) -> Option<&Expr> {
        match &self.kind {
            VariableKind::Flow(e) | VariableKind::Auxiliary(e) => Some(e),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
struct Computed {
    index: usize,
    inputs: Vec<usize>,
}

#[derive(Debug, Clone)]
struct StockWiring {
    index: usize,
    inflows: Vec<usize>,
    outflows: Vec<usize>,
}

/// A validated stock-and-flow model.
#[derive(Debug, Clone)]
pub struct StockFlowModel {
    defs: Vec<VariableDef>,
    index: HashMap<VariableId, usize>,
    order: Vec<Computed>,
    stocks: Vec<StockWiring>,
    dt: f64,
}

impl StockFlowModel {
    /// Validates `defs` and fixes the evaluation order of flows and
    /// auxiliaries.
    pub fn build(defs: Vec<VariableDef>, dt: f64) -> Result<Self> {
        if defs.is_empty() {
            return Err(EngineError::Empty);
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(EngineError::InvalidDt(dt));
        }
        let mut index = HashMap::with_capacity(defs.len());
        for (i, def) in defs.iter().enumerate() {
            if def.id.as_str().is_empty() {
                return Err(EngineError::EmptyId);
            }
            if def.id.as_str() == TIME {
                return Err(EngineError::ReservedId);
            }
            if index.insert(def.id.clone(), i).is_some() {
                return Err(EngineError::Duplicate(def.id.to_string()));
            }
        }
        let lookup = |from: &VariableId, name: &VariableId| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| EngineError::Dangling {
                    from: from.to_string(),
                    missing: name.to_string(),
                })
        };

        let mut stocks = Vec::new();
        let mut inputs_of: Vec<Vec<usize>> = vec![Vec::new(); defs.len()];
        for (i, def) in defs.iter().enumerate() {
            match &def.kind {
                VariableKind::Stock {
                    inflows, outflows, ..
                } => {
                    let resolve = |list: &[VariableId]| -> Result<Vec<usize>> {
                        list.iter()
                            .map(|f| {
                                let j = lookup(&def.id, f)?;
                                match defs[j].kind {
                                    VariableKind::Flow(_) => Ok(j),
                                    _ => Err(EngineError::NotAFlow {
                                        stock: def.id.to_string(),
                                        flow: f.to_string(),
                                    }),
                                }
                            })
                            .collect()
                    };
                    stocks.push(StockWiring {
                        index: i,
                        inflows: resolve(inflows)?,
                        outflows: resolve(outflows)?,
                    });
                }
                VariableKind::Flow(e) | VariableKind::Auxiliary(e) => {
                    inputs_of[i] = e
                        .inputs()
                        .iter()
                        .map(|name| lookup(&def.id, name))
                        .collect::<Result<_>>()?;
                }
                VariableKind::Constant(_) | VariableKind::Exogenous => {}
            }
        }

        let order = topological_order(&defs, &inputs_of)?
            .into_iter()
            .map(|i| Computed {
                index: i,
                inputs: std::mem::take(&mut inputs_of[i]),
            })
            .collect();

        Ok(Self {
            defs,
            index,
            order,
            stocks,
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    pub fn definitions(&self) -> &[VariableDef] {
        &self.defs
    }

    fn slot(&self, id: &str) -> Result<usize> {
        self.index
            .get(&VariableId::new(id))
            .copied()
            .ok_or_else(|| EngineError::Unknown(id.to_string()))
    }

    /// State at time 0 with no exogenous values injected.
    pub fn init_state(&self) -> Result<SimState> {
        self.init_state_with(&[])
    }

    /// State at time 0 after applying `injections`, with every computed
    /// variable evaluated.
    pub fn init_state_with(&self, injections: &[(&str, f64)]) -> Result<SimState> {
        let mut state = SimState {
            time: 0.0,
            values: self
                .defs
                .iter()
                .map(|d| match d.kind {
                    VariableKind::Stock { init, .. } | VariableKind::Constant(init) => Some(init),
                    _ => None,
                })
                .collect(),
            index: Arc::new(self.index.clone()),
            exogenous: Arc::new(
                self.defs
                    .iter()
                    .map(|d| matches!(d.kind, VariableKind::Exogenous))
                    .collect(),
            ),
        };
        for (id, value) in injections {
            state.inject(id, *value)?;
        }
        self.evaluate(&mut state)?;
        Ok(state)
    }

    /// Re-evaluates every flow and auxiliary from the stocks, constants and
    /// exogenous values currently in `state`.
    pub fn evaluate(&self, state: &mut SimState) -> Result<()> {
        let mut args = Vec::new();
        for c in &self.order {
            args.clear();
            for &j in &c.inputs {
                match state.values[j] {
                    Some(v) => args.push(v),
                    None => return Err(EngineError::Uninjected(self.defs[j].id.to_string())),
                }
            }
            let expr = self.defs[c.index]
                .expr()
                .expect("computed variable has an expression");
            let value = (expr.eval)(&args, state.time);
            if !value.is_finite() {
                return Err(EngineError::NonFinite {
                    variable: self.defs[c.index].id.to_string(),
                    value,
                    time: state.time,
                });
            }
            state.values[c.index] = Some(value);
        }
        Ok(())
    }

    /// One explicit Euler step.
    pub fn step(&self, state: &SimState) -> Result<SimState> {
        self.step_traced(state).map(|t| t.next)
    }

    /// One explicit Euler step, also returning the pre-step evaluation whose
    /// flow values were integrated.
    ///
    /// Flows are evaluated from the pre-step stocks and the exogenous values
    /// injected so far; stocks then move by `dt * (inflows - outflows)` and the
    /// computed variables are re-evaluated at the new time.
    pub fn step_traced(&self, state: &SimState) -> Result<StepTrace> {
        let mut evaluated = state.clone();
        self.evaluate(&mut evaluated)?;

        let mut next = evaluated.clone();
        for s in &self.stocks {
            let inflow: f64 = s.inflows.iter().map(|&f| flow_value(&evaluated, f)).sum();
            let outflow: f64 = s.outflows.iter().map(|&f| flow_value(&evaluated, f)).sum();
            let current = evaluated.values[s.index].expect("stocks are always set");
            let value = current + self.dt * (inflow - outflow);
            if !value.is_finite() {
                return Err(EngineError::NonFinite {
                    variable: self.defs[s.index].id.to_string(),
                    value,
                    time: evaluated.time + self.dt,
                });
            }
            next.values[s.index] = Some(value);
        }
        next.time = evaluated.time + self.dt;
        self.evaluate(&mut next)?;
        Ok(StepTrace { evaluated, next })
    }
}

fn flow_value(state: &SimState, index: usize) -> f64 {
    state.values[index].expect("flows are evaluated before integration")
}

/// Kahn's algorithm over flows and auxiliaries; ties resolve in definition
/// order so the schedule is deterministic.
fn topological_order(defs: &[VariableDef], inputs_of: &[Vec<usize>]) -> Result<Vec<usize>> {
    let computed: Vec<bool> = defs.iter().map(|d| d.expr().is_some()).collect();
    let mut pending = vec![0usize; defs.len()];
    let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); defs.len()];
    for (i, inputs) in inputs_of.iter().enumerate() {
        for &j in inputs {
            if computed[j] {
                pending[i] += 1;
                dependents[j].push(i);
            }
        }
    }
    let mut ready: std::collections::BTreeSet<usize> = (0..defs.len())
        .filter(|&i| computed[i] && pending[i] == 0)
        .collect();
    let mut order = Vec::new();
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for &k in &dependents[i] {
            pending[k] -= 1;
            if pending[k] == 0 {
                ready.insert(k);
            }
        }
    }
    let total = computed.iter().filter(|&&c| c).count();
    if order.len() == total {
        return Ok(order);
    }

    // Every unscheduled node has an unscheduled input; walk inputs until a
    // node repeats to name one concrete cycle.
    let stuck: Vec<bool> = (0..defs.len())
        .map(|i| computed[i] && pending[i] > 0)
        .collect();
    let start = stuck.iter().position(|&s| s).expect("some node is stuck");
    let mut path = vec![start];
    let mut seen = HashMap::from([(start, 0usize)]);
    loop {
        let here = *path.last().unwrap();
        let next = inputs_of[here]
            .iter()
            .copied()
            .find(|&j| stuck[j])
            .expect("stuck node has a stuck input");
        if let Some(&at) = seen.get(&next) {
            let mut cycle: Vec<String> = path[at..]
                .iter()
                .rev()
                .map(|&i| defs[i].id.to_string())
                .collect();
            cycle.push(cycle[0].clone());
            return Err(EngineError::Cycle(cycle));
        }
        seen.insert(next, path.len());
        path.push(next);
    }
}

/// Values of every variable at one point in simulated time.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    time: f64,
    values: Vec<Option<f64>>,
    index: Arc<HashMap<VariableId, usize>>,
    exogenous: Arc<Vec<bool>>,
}

/// Result of [`StockFlowModel::step_traced`].
#[derive(Debug, Clone)]
pub struct StepTrace {
    /// The pre-step state with flows evaluated from the injected inputs.
    pub evaluated: SimState,
    pub next: SimState,
}

impl SimState {
    pub fn time(&self) -> f64 {
        self.time
    }

    fn slot(&self, id: &str) -> Result<usize> {
        self.index
            .get(&VariableId::new(id))
            .copied()
            .ok_or_else(|| EngineError::Unknown(id.to_string()))
    }

    /// Current value of `id`; [`TIME`] reads the clock.
    pub fn get(&self, id: &str) -> Result<f64> {
        if id == TIME {
            return Ok(self.time);
        }
        let i = self.slot(id)?;
        self.values[i].ok_or_else(|| EngineError::Uninjected(id.to_string()))
    }

    /// Sets an exogenous input. The value persists until overwritten.
    pub fn inject(&mut self, id: &str, value: f64) -> Result<()> {
        let i = self.slot(id)?;
        if !self.exogenous[i] {
            return Err(EngineError::NotExogenous(id.to_string()));
        }
        self.values[i] = Some(value);
        Ok(())
    }

    /// Overwrites a stock between steps. Computed variables are stale until
    /// the model re-evaluates the state.
    pub fn set_stock(&mut self, model: &StockFlowModel, id: &str, value: f64) -> Result<()> {
        let i = model.slot(id)?;
        if !matches!(model.defs[i].kind, VariableKind::Stock { .. }) {
            return Err(EngineError::NotAStock(id.to_string()));
        }
        self.values[i] = Some(value);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay_model(gamma: f64, s0: f64) -> StockFlowModel {
        StockFlowModel::build(
            vec![
                VariableDef::stock("S", s0, &[], &["F"]),
                VariableDef::flow("F", Expr::new(&["S"], move |v, _| gamma * v[0])),
            ],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn minimal_model_accumulates_constant_inflow() {
        let model = StockFlowModel::build(
            vec![
                VariableDef::stock("S", 0.0, &["F"], &[]),
                VariableDef::flow("F", Expr::constant(2.0)),
            ],
            1.0,
        )
        .unwrap();
        let mut state = model.init_state().unwrap();
        for _ in 0..3 {
            state = model.step(&state).unwrap();
        }
        assert_eq!(state.get("S").unwrap(), 6.0);
        assert_eq!(state.get(TIME).unwrap(), 3.0);
    }

    #[test]
    fn two_cycle_is_rejected_and_named() {
        let err = StockFlowModel::build(
            vec![
                VariableDef::auxiliary("A", Expr::new(&["B"], |v, _| v[0])),
                VariableDef::auxiliary("B", Expr::new(&["A"], |v, _| v[0])),
            ],
            1.0,
        )
        .unwrap_err();
        match err {
            EngineError::Cycle(path) => {
                assert_eq!(path.len(), 3);
                assert_eq!(path.first(), path.last());
                assert!(path.contains(&"A".to_string()) && path.contains(&"B".to_string()));
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn feedback_through_a_stock_is_legal() {
        assert!(decay_model(0.3, 1.0).len() == 2);
    }

    #[test]
    fn dangling_duplicate_and_bad_dt_are_rejected() {
        let dangling = StockFlowModel::build(
            vec![VariableDef::auxiliary(
                "A",
                Expr::new(&["nope"], |v, _| v[0]),
            )],
            1.0,
        );
        assert_eq!(
            dangling.unwrap_err(),
            EngineError::Dangling {
                from: "A".into(),
                missing: "nope".into()
            }
        );
        let dup = StockFlowModel::build(
            vec![
                VariableDef::constant("c", 1.0),
                VariableDef::constant("c", 2.0),
            ],
            1.0,
        );
        assert_eq!(dup.unwrap_err(), EngineError::Duplicate("c".into()));
        let dt = StockFlowModel::build(vec![VariableDef::constant("c", 1.0)], 0.0);
        assert_eq!(dt.unwrap_err(), EngineError::InvalidDt(0.0));
        assert_eq!(
            StockFlowModel::build(vec![], 1.0).unwrap_err(),
            EngineError::Empty
        );
        let reserved = StockFlowModel::build(vec![VariableDef::constant(TIME, 1.0)], 1.0);
        assert_eq!(reserved.unwrap_err(), EngineError::ReservedId);
        let not_flow = StockFlowModel::build(
            vec![
                VariableDef::stock("S", 0.0, &["c"], &[]),
                VariableDef::constant("c", 1.0),
            ],
            1.0,
        );
        assert!(matches!(
            not_flow.unwrap_err(),
            EngineError::NotAFlow { .. }
        ));
    }

    #[test]
    fn init_evaluates_flows_in_order() {
        let model = decay_model(0.3, 100.0);
        let state = model.init_state().unwrap();
        assert_eq!(state.get("S").unwrap(), 100.0);
        assert_eq!(state.get("F").unwrap(), 30.0);

        let c = StockFlowModel::build(vec![VariableDef::constant("c", 0.3)], 1.0).unwrap();
        assert_eq!(c.init_state().unwrap().get("c").unwrap(), 0.3);
    }

    #[test]
    fn reading_uninjected_exogenous_is_an_error() {
        let model = StockFlowModel::build(
            vec![
                VariableDef::exogenous("D_white"),
                VariableDef::auxiliary("y", Expr::new(&["D_white"], |v, _| 2.0 * v[0])),
            ],
            1.0,
        )
        .unwrap();
        assert_eq!(
            model.init_state().unwrap_err(),
            EngineError::Uninjected("D_white".into())
        );
        let state = model.init_state_with(&[("D_white", 0.625)]).unwrap();
        assert_eq!(state.get("y").unwrap(), 1.25);
    }

    #[test]
    fn injection_contract() {
        let model = StockFlowModel::build(
            vec![
                VariableDef::exogenous("D_white"),
                VariableDef::stock("S", 1.0, &[], &[]),
            ],
            1.0,
        )
        .unwrap();
        let mut state = model.init_state().unwrap();
        assert_eq!(
            state.get("D_white").unwrap_err(),
            EngineError::Uninjected("D_white".into())
        );
        state.inject("D_white", 0.625).unwrap();
        assert_eq!(state.get("D_white").unwrap(), 0.625);
        state.inject("D_white", 0.5).unwrap();
        state.inject("D_white", 0.7).unwrap();
        assert_eq!(state.get("D_white").unwrap(), 0.7);
        assert_eq!(
            state.inject("S", 1.0).unwrap_err(),
            EngineError::NotExogenous("S".into())
        );
        assert_eq!(
            state.inject("zz", 1.0).unwrap_err(),
            EngineError::Unknown("zz".into())
        );
        // sticky across steps
        let next = model.step(&state).unwrap();
        assert_eq!(next.get("D_white").unwrap(), 0.7);
    }

    #[test]
    fn injected_value_drives_the_next_step() {
        let model = StockFlowModel::build(
            vec![
                VariableDef::exogenous("x"),
                VariableDef::stock("S", 0.0, &["F"], &[]),
                VariableDef::flow("F", Expr::new(&["x"], |v, _| v[0])),
            ],
            1.0,
        )
        .unwrap();
        let mut state = model.init_state_with(&[("x", 1.0)]).unwrap();
        state.inject("x", 5.0).unwrap();
        let trace = model.step_traced(&state).unwrap();
        assert_eq!(trace.evaluated.get("F").unwrap(), 5.0);
        assert_eq!(trace.next.get("S").unwrap(), 5.0);
    }

    #[test]
    fn single_euler_step_of_linear_decay() {
        let model = decay_model(0.3, 100.0);
        let state = model.step(&model.init_state().unwrap()).unwrap();
        assert_eq!(state.get("S").unwrap(), 70.0);
        assert_eq!(state.get(TIME).unwrap(), 1.0);
        assert_eq!(
            state.get("Q").unwrap_err(),
            EngineError::Unknown("Q".into())
        );
    }

    #[test]
    fn linear_decay_matches_powers() {
        let model = decay_model(0.3, 1.0);
        let mut state = model.init_state().unwrap();
        let mut expected = 1.0_f64;
        for _ in 1..=20 {
            state = model.step(&state).unwrap();
            // S - 0.3 S and 0.7 S may differ in the last bit
            expected *= 0.7;
            let got = state.get("S").unwrap();
            assert!(
                ((got - expected) / expected).abs() < 1e-14,
                "{got} vs {expected}"
            );
        }
    }

    #[test]
    fn non_finite_values_name_the_variable() {
        let model = StockFlowModel::build(
            vec![
                VariableDef::stock("S", 0.0, &["F"], &[]),
                VariableDef::flow("F", Expr::new(&["S"], |v, _| 1.0 / v[0])),
            ],
            1.0,
        )
        .unwrap();
        match model.init_state().unwrap_err() {
            EngineError::NonFinite { variable, .. } => assert_eq!(variable, "F"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn set_stock_only_touches_stocks() {
        let model = decay_model(0.3, 100.0);
        let mut state = model.init_state().unwrap();
        state.set_stock(&model, "S", 50.0).unwrap();
        model.evaluate(&mut state).unwrap();
        assert_eq!(state.get("F").unwrap(), 15.0);
        assert_eq!(
            state.set_stock(&model, "F", 1.0).unwrap_err(),
            EngineError::NotAStock("F".into())
        );
    }

    #[test]
    fn expressions_see_time() {
        let model = StockFlowModel::build(
            vec![VariableDef::auxiliary(
                "L",
                Expr::new(&[], |_, t| if t < 2.0 { 1.0 } else { 0.9 }),
            )],
            1.0,
        )
        .unwrap();
        let s0 = model.init_state().unwrap();
        let s2 = model.step(&model.step(&s0).unwrap()).unwrap();
        assert_eq!(s0.get("L").unwrap(), 1.0);
        assert_eq!(s2.get("L").unwrap(), 0.9);
    }
}
