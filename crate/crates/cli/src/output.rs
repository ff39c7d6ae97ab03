use std::io::Write;

use serde_json::Value;

use crate::Format;

/// One machine-parsable line on stderr: `error: kind=<code> msg="<text>"`.
pub fn error_line(kind: &str, msg: &str) {
    eprintln!("error: kind={kind} msg={msg:?}");
}

/// Ordered key/value table, printed as `key,value` rows or a JSON object.
#[derive(Default)]
pub struct Table(Vec<(String, Value)>);

impl Table {
    pub fn put(&mut self, key: &str, v: impl Into<Value>) -> &mut Self {
        self.0.push((key.to_string(), v.into()));
        self
    }

    pub fn opt(&mut self, key: &str, v: Option<f64>) -> &mut Self {
        self.put(key, v.map_or(Value::Null, Value::from))
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut s = String::from("key,value\n");
                for (k, v) in &self.0 {
                    let cell = match v {
                        Value::String(t) => t.clone(),
                        Value::Null => String::new(),
                        other => other.to_string(),
                    };
                    s.push_str(&format!("{k},{cell}\n"));
                }
                s
            }
            Format::Json => {
                let map: serde_json::Map<String, Value> = self.0.iter().cloned().collect();
                let mut s = serde_json::to_string_pretty(&Value::Object(map)).unwrap_or_default();
                s.push('\n');
                s
            }
        }
    }
}

pub fn print(text: &str) -> std::io::Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()
}

pub fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).unwrap_or_default();
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_renders_both_formats() {
        let mut t = Table::default();
        t.put("b", 2.5).put("a", "x").opt("none", None);
        assert_eq!(t.render(Format::Csv), "key,value\nb,2.5\na,x\nnone,\n");
        let v: Value = serde_json::from_str(&t.render(Format::Json)).unwrap();
        assert_eq!(v["b"], 2.5);
        assert!(v["none"].is_null());
    }
}
