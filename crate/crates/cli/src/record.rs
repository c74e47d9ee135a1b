use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
    /// The bound is trivially true at these parameters and was not checked.
    Vacuous,
}

#[derive(Clone, Debug, Serialize)]
pub struct Assertion {
    pub claim: String,
    pub lhs: Value,
    pub rhs: Value,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, Serialize)]
pub struct Record {
    pub command: String,
    pub parameters: Value,
    pub results: Value,
    pub assertions: Vec<Assertion>,
}

impl Record {
    pub fn new(command: &str, parameters: impl Serialize, seed: Option<u64>) -> Self {
        let mut parameters = serde_json::to_value(parameters).unwrap_or(Value::Null);
        if let Value::Object(m) = &mut parameters {
            m.insert("seed".into(), seed.map_or(Value::Null, Value::from));
        }
        Record { command: command.into(), parameters, results: Value::Object(Map::new()), assertions: Vec::new() }
    }

    pub fn set(&mut self, key: &str, v: impl Serialize) {
        if let Value::Object(m) = &mut self.results {
            m.insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
        }
    }

    pub fn check(&mut self, claim: &str, lhs: impl Serialize, rhs: impl Serialize, holds: bool) {
        self.push(claim, lhs, rhs, if holds { Outcome::Pass } else { Outcome::Fail });
    }

    pub fn vacuous(&mut self, claim: &str, lhs: impl Serialize, rhs: impl Serialize) {
        self.push(claim, lhs, rhs, Outcome::Vacuous);
    }

    fn push(&mut self, claim: &str, lhs: impl Serialize, rhs: impl Serialize, outcome: Outcome) {
        self.assertions.push(Assertion {
            claim: claim.into(),
            lhs: serde_json::to_value(lhs).unwrap_or(Value::Null),
            rhs: serde_json::to_value(rhs).unwrap_or(Value::Null),
            outcome,
        });
    }

    pub fn failures(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| a.outcome == Outcome::Fail)
    }

    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn to_json(&self, wall_time_s: f64) -> String {
        #[derive(Serialize)]
        struct Full<'a> {
            #[serde(flatten)]
            rec: &'a Record,
            status: &'static str,
            wall_time_s: f64,
        }
        let full = Full { rec: self, status: if self.passed() { "pass" } else { "fail" }, wall_time_s };
        let mut s = serde_json::to_string_pretty(&full).expect("serializable");
        s.push('\n');
        s
    }

    /// `key,value` rows over every scalar leaf; rationals appear through
    /// their float members.
    pub fn to_csv(&self, wall_time_s: f64) -> String {
        let mut rows = vec!["key,value".to_string()];
        rows.push(format!("command,{}", self.command));
        flatten("parameters", &self.parameters, &mut rows);
        flatten("results", &self.results, &mut rows);
        for (i, a) in self.assertions.iter().enumerate() {
            rows.push(format!("assertions.{i}.claim,{}", quote(&a.claim)));
            flatten(&format!("assertions.{i}.lhs"), &a.lhs, &mut rows);
            flatten(&format!("assertions.{i}.rhs"), &a.rhs, &mut rows);
            rows.push(format!("assertions.{i}.outcome,{}", serde_json::to_value(a.outcome).expect("enum").as_str().unwrap_or("")));
        }
        rows.push(format!("status,{}", if self.passed() { "pass" } else { "fail" }));
        rows.push(format!("wall_time_s,{wall_time_s}"));
        rows.join("\n") + "\n"
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<String>) {
    match v {
        Value::Object(m) if m.contains_key("num") && m.contains_key("den") && m.contains_key("float") => {
            flatten(prefix, &m["float"], rows);
        }
        Value::Object(m) => {
            for (k, x) in m {
                flatten(&format!("{prefix}.{k}"), x, rows);
            }
        }
        Value::Array(xs) => {
            for (i, x) in xs.iter().enumerate() {
                flatten(&format!("{prefix}.{i}"), x, rows);
            }
        }
        Value::String(s) => rows.push(format!("{prefix},{}", quote(s))),
        other => rows.push(format!("{prefix},{other}")),
    }
}
