//! In-process stand-ins for external tool servers, dispatched by `ToolInvoke`.

use std::collections::BTreeMap;
use std::sync::Arc;

pub type ToolParams = BTreeMap<String, String>;

pub trait SimTool: Send + Sync {
    fn call(&self, params: &ToolParams) -> Result<String, String>;
}

/// Four-function arithmetic over `a`, `b` and `op` parameters.
pub struct Calculator;

impl SimTool for Calculator {
    fn call(&self, params: &ToolParams) -> Result<String, String> {
        let num = |key: &str| -> Result<f64, String> {
            let raw = params.get(key).ok_or_else(|| format!("missing parameter {key}"))?;
            raw.trim()
                .parse::<f64>()
                .map_err(|_| format!("parameter {key} is not a number: {raw}"))
        };
        let (a, b) = (num("a")?, num("b")?);
        let op = params.get("op").map(String::as_str).unwrap_or("+");
        let out = match op {
            "+" | "add" => a + b,
            "-" | "sub" => a - b,
            "*" | "mul" => a * b,
            "/" | "div" => {
                if b == 0.0 {
                    return Err("division by zero".into());
                }
                a / b
            }
            other => return Err(format!("unknown operator {other}")),
        };
        Ok(format!("{out}"))
    }
}

/// Case-insensitive key lookup over named tables from the world spec.
pub struct Lookup {
    tables: BTreeMap<String, BTreeMap<String, String>>,
}

impl Lookup {
    pub fn new(tables: &BTreeMap<String, BTreeMap<String, String>>) -> Self {
        let tables = tables
            .iter()
            .map(|(name, rows)| {
                let rows = rows.iter().map(|(k, v)| (k.to_lowercase(), v.clone())).collect();
                (name.clone(), rows)
            })
            .collect();
        Lookup { tables }
    }
}

impl SimTool for Lookup {
    fn call(&self, params: &ToolParams) -> Result<String, String> {
        let table = params.get("table").ok_or("missing parameter table")?;
        let key = params.get("key").ok_or("missing parameter key")?;
        let rows = self
            .tables
            .get(table)
            .ok_or_else(|| format!("no table named {table}"))?;
        rows.get(&key.to_lowercase())
            .cloned()
            .ok_or_else(|| format!("no entry for {key} in {table}"))
    }
}

#[derive(Clone, Default)]
pub struct ToolRegistry {
    tools: BTreeMap<String, Arc<dyn SimTool>>,
}

impl ToolRegistry {
    /// Calculator plus a lookup tool over the given tables.
    pub fn standard(tables: &BTreeMap<String, BTreeMap<String, String>>) -> Self {
        let mut reg = ToolRegistry::default();
        reg.register("calculator", Arc::new(Calculator));
        reg.register("lookup", Arc::new(Lookup::new(tables)));
        reg
    }

    pub fn register(&mut self, name: &str, tool: Arc<dyn SimTool>) {
        self.tools.insert(name.to_string(), tool);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tools.keys().map(String::as_str)
    }

    pub fn invoke(&self, name: &str, params: &ToolParams) -> Result<String, String> {
        match self.tools.get(name) {
            Some(tool) => tool.call(params),
            None => Err(format!("unknown tool {name}")),
        }
    }
}

impl std::fmt::Debug for ToolRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.tools.keys()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[(&str, &str)]) -> ToolParams {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn calculator_ops() {
        let c = Calculator;
        assert_eq!(c.call(&params(&[("a", "6"), ("b", "7"), ("op", "*")])).unwrap(), "42");
        assert!(c.call(&params(&[("a", "1"), ("b", "0"), ("op", "/")])).is_err());
        assert!(c.call(&params(&[("a", "x"), ("b", "0")])).is_err());
    }

    #[test]
    fn lookup_is_case_insensitive() {
        let mut tables = BTreeMap::new();
        tables.insert("prices".to_string(), params(&[("USB hub", "$42")]));
        let reg = ToolRegistry::standard(&tables);
        let out = reg.invoke("lookup", &params(&[("table", "prices"), ("key", "usb HUB")]));
        assert_eq!(out.unwrap(), "$42");
        assert!(reg.invoke("weather", &ToolParams::new()).is_err());
    }
}
