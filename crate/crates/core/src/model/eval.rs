use std::collections::{BTreeMap, HashMap};

use super::{Constraint, Model, ModelError};

/// Parameter name → value, covering both free and driven parameters.
pub type Valuation = BTreeMap<String, f64>;

/// Orders constraints so every driven parameter is computed before it is
/// read. Ties resolve by constraint index, which keeps the order stable.
pub(super) fn topological_order(constraints: &[Constraint]) -> Result<Vec<usize>, ModelError> {
    let by_target: HashMap<&str, usize> = constraints
        .iter()
        .enumerate()
        .map(|(i, c)| (c.target.as_str(), i))
        .collect();
    // deps[i]: constraints whose target constraint i reads
    let deps: Vec<Vec<usize>> = constraints
        .iter()
        .map(|c| {
            c.expr
                .references()
                .into_iter()
                .filter_map(|r| by_target.get(r).copied())
                .collect()
        })
        .collect();

    let n = constraints.len();
    let mut pending: Vec<usize> = deps.iter().map(Vec::len).collect();
    let mut dependents = vec![Vec::new(); n];
    for (i, ds) in deps.iter().enumerate() {
        for &d in ds {
            dependents[d].push(i);
        }
    }
    let mut ready: std::collections::BTreeSet<usize> = (0..n).filter(|&i| pending[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for &j in &dependents[i] {
            pending[j] -= 1;
            if pending[j] == 0 {
                ready.insert(j);
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    let stuck: Vec<bool> = (0..n).map(|i| pending[i] > 0).collect();
    let cycle = find_cycle(&deps, &stuck);
    Err(ModelError::Cycle(
        cycle.into_iter().map(|i| constraints[i].target.clone()).collect(),
    ))
}

/// Walks dependency edges among unresolved constraints until a node repeats.
/// Every unresolved node has at least one unresolved dependency, so the walk
/// always closes a cycle.
fn find_cycle(deps: &[Vec<usize>], stuck: &[bool]) -> Vec<usize> {
    let start = stuck.iter().position(|&s| s).expect("at least one stuck constraint");
    let mut seen_at: HashMap<usize, usize> = HashMap::new();
    let mut path = Vec::new();
    let mut cur = start;
    loop {
        if let Some(&at) = seen_at.get(&cur) {
            return path[at..].to_vec();
        }
        seen_at.insert(cur, path.len());
        path.push(cur);
        cur = *deps[cur]
            .iter()
            .find(|&&d| stuck[d])
            .expect("stuck constraint has a stuck dependency");
    }
}

impl Model {
    /// Evaluates every driven parameter in dependency order; free parameters
    /// pass through unchanged.
    pub fn evaluate_params(&self) -> Result<Valuation, ModelError> {
        let mut vals: Valuation = self.free_parameters().map(|p| (p.name.clone(), p.value)).collect();
        for &ci in &self.eval_order {
            let c = &self.constraints[ci];
            let v = c
                .expr
                .eval(&|n: &str| vals.get(n).copied())
                .map_err(|source| ModelError::Evaluation {
                    location: format!("constraint '{}'", c.target),
                    source,
                })?;
            vals.insert(c.target.clone(), v);
        }
        Ok(vals)
    }

    /// Re-evaluates constraints and stores the driven values.
    pub(super) fn refresh_driven(&mut self) -> Result<(), ModelError> {
        let vals = self.evaluate_params()?;
        for p in self.parameters.iter_mut().filter(|p| p.driven) {
            p.value = vals[&p.name];
        }
        Ok(())
    }

    /// Returns a new model with `name` set to `value`, driven parameters
    /// re-evaluated and the revision bumped. `self` is never modified.
    pub fn set_parameter(&self, name: &str, value: f64) -> Result<Model, ModelError> {
        let p = self
            .param(name)
            .ok_or_else(|| ModelError::UnknownParameter(name.to_string()))?;
        if p.driven {
            return Err(ModelError::ParameterDriven(name.to_string()));
        }
        if !(value >= p.min && value <= p.max) {
            return Err(ModelError::OutOfRange {
                name: name.to_string(),
                value,
                min: p.min,
                max: p.max,
            });
        }
        let mut next = self.clone();
        if let Some(slot) = next.parameters.iter_mut().find(|p| p.name == name) {
            slot.value = value;
        }
        next.refresh_driven()?;
        next.revision += 1;
        Ok(next)
    }

    /// |stored driven value − expression value| for every constraint, in
    /// constraint order.
    pub fn constraint_residuals(&self) -> Result<Vec<(String, f64)>, ModelError> {
        let lookup = |n: &str| self.param(n).map(|p| p.value);
        self.constraints
            .iter()
            .map(|c| {
                let target = self.param(&c.target).map(|p| p.value).unwrap_or(f64::NAN);
                let v = c.expr.eval(&lookup).map_err(|source| ModelError::Evaluation {
                    location: format!("constraint '{}'", c.target),
                    source,
                })?;
                Ok((c.target.clone(), (target - v).abs()))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Model;

    fn doc(params: &str, constraints: &str) -> String {
        format!(
            r#"{{"version":1,"units":"mm","parameters":[{params}],"constraints":[{constraints}],
            "features":[{{"id":"s","kind":"sketch","profile":[["0","0"],["10","0"],["10","10"],["0","10"]]}},
                        {{"id":"e","kind":"extrude","sketch":"s","depth":"5","origin":[0,0,0]}}]}}"#
        )
    }

    #[test]
    fn linear_constraint() {
        let m = Model::from_json(&doc(
            r#"{"name":"a","value":2,"min":0,"max":10}"#,
            r#"{"target":"b","expr":"2*a + 1"}"#,
        ))
        .unwrap();
        let v = m.evaluate_params().unwrap();
        assert_eq!(v["a"], 2.0);
        assert_eq!(v["b"], 5.0);
    }

    #[test]
    fn chain_evaluates_in_dependency_order() {
        // declared out of order on purpose
        let m = Model::from_json(&doc(
            r#"{"name":"a","value":1,"min":0,"max":10}"#,
            r#"{"target":"c","expr":"b*b"},{"target":"b","expr":"a+1"}"#,
        ))
        .unwrap();
        assert_eq!(m.evaluation_order(), &[1, 0]);
        let v = m.evaluate_params().unwrap();
        assert_eq!((v["a"], v["b"], v["c"]), (1.0, 2.0, 4.0));
    }

    #[test]
    fn two_cycle_is_reported() {
        let err = Model::from_json(&doc(
            r#"{"name":"x","value":1,"min":0,"max":10}"#,
            r#"{"target":"a","expr":"b"},{"target":"b","expr":"a"}"#,
        ))
        .unwrap_err();
        match err {
            ModelError::Cycle(mut names) => {
                names.sort();
                assert_eq!(names, ["a", "b"]);
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn cycle_behind_acyclic_prefix() {
        let err = Model::from_json(&doc(
            r#"{"name":"x","value":1,"min":0,"max":10}"#,
            r#"{"target":"p","expr":"q + x"},{"target":"q","expr":"r"},{"target":"r","expr":"q*2"}"#,
        ))
        .unwrap_err();
        match err {
            ModelError::Cycle(mut names) => {
                names.sort();
                assert_eq!(names, ["q", "r"]);
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn self_reference_is_a_cycle() {
        let err = Model::from_json(&doc(
            r#"{"name":"x","value":1,"min":0,"max":10}"#,
            r#"{"target":"a","expr":"a + 1"}"#,
        ))
        .unwrap_err();
        assert_eq!(err, ModelError::Cycle(vec!["a".into()]));
    }

    #[test]
    fn division_by_zero_during_set() {
        let m = Model::from_json(&doc(
            r#"{"name":"a","value":1,"min":0,"max":10}"#,
            r#"{"target":"b","expr":"1 / a"}"#,
        ))
        .unwrap();
        let err = m.set_parameter("a", 0.0).unwrap_err();
        assert!(matches!(err, ModelError::Evaluation { .. }), "{err:?}");
        assert_eq!(m.revision, 0);
    }

    #[test]
    fn set_parameter_checks() {
        let m = Model::from_json(&doc(
            r#"{"name":"d","value":10,"min":5,"max":50}"#,
            r#"{"target":"h","expr":"0.5*d + 10"}"#,
        ))
        .unwrap();
        let m2 = m.set_parameter("d", 12.0).unwrap();
        assert_eq!(m2.revision, 1);
        assert_eq!(m2.param("h").unwrap().value, 16.0);
        assert_eq!(m.param("h").unwrap().value, 15.0);
        assert_eq!(m.set_parameter("h", 3.0), Err(ModelError::ParameterDriven("h".into())));
        assert!(matches!(
            m.set_parameter("d", 4.0),
            Err(ModelError::OutOfRange { min, max, .. }) if min == 5.0 && max == 50.0
        ));
        assert_eq!(
            m.set_parameter("zz", 1.0),
            Err(ModelError::UnknownParameter("zz".into()))
        );
        assert!(m.set_parameter("d", f64::NAN).is_err());
    }
}
