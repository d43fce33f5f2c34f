use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::{Map, Value};

/// Run summary: inputs, configuration, counts, results, and wall time.
pub struct Summary {
    start: Instant,
    root: Map<String, Value>,
}

impl Summary {
    pub fn new(command: &str, seed: u64) -> Self {
        let mut root = Map::new();
        root.insert("command".into(), command.into());
        root.insert("seed".into(), seed.into());
        for section in ["inputs", "outputs", "config", "counts", "results"] {
            root.insert(section.into(), Value::Object(Map::new()));
        }
        Summary {
            start: Instant::now(),
            root,
        }
    }

    fn section(&mut self, name: &str) -> &mut Map<String, Value> {
        match self.root.get_mut(name) {
            Some(Value::Object(m)) => m,
            _ => unreachable!("sections are created in new"),
        }
    }

    pub fn input(&mut self, name: &str, path: &Path) {
        self.section("inputs").insert(name.into(), path.display().to_string().into());
    }

    pub fn output(&mut self, name: &str, path: &Path) {
        self.section("outputs").insert(name.into(), path.display().to_string().into());
    }

    pub fn config(&mut self, name: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.section("config").insert(name.into(), v);
    }

    pub fn count(&mut self, name: &str, n: usize) {
        self.section("counts").insert(name.into(), n.into());
    }

    pub fn result(&mut self, name: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.section("results").insert(name.into(), v);
    }

    /// Prints the summary to stderr and returns it as JSON.
    pub fn finish(mut self) -> Value {
        let secs = self.start.elapsed().as_secs_f64();
        self.root.insert("wall_time_secs".into(), secs.into());
        let value = Value::Object(self.root);
        let mut lines = Vec::new();
        flatten("", &value, &mut lines);
        for line in lines {
            eprintln!("{line}");
        }
        value
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Object(m) => {
            for (k, child) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, child, out);
            }
        }
        Value::Array(items) if items.len() > 8 => {
            out.push(format!("{prefix} = [{} values]", items.len()));
        }
        other => out.push(format!("{prefix} = {other}")),
    }
}
