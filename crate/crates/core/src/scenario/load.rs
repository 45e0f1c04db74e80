use std::path::Path;

use serde::Deserialize;
use toml::{Table, Value};

use super::{preset, EvaluationConfig, TestEnvironment, Variant};
use crate::error::{Error, Result};

/// Canonical text form of a configuration.
pub fn to_toml(config: &EvaluationConfig) -> String {
    toml::to_string(config).expect("configuration is always representable as TOML")
}

fn to_table(config: &EvaluationConfig) -> Table {
    match Value::try_from(config).expect("configuration is always representable as TOML") {
        Value::Table(t) => t,
        _ => unreachable!("a struct serializes to a table"),
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "string",
        Value::Integer(_) => "integer",
        Value::Float(_) => "float",
        Value::Boolean(_) => "boolean",
        Value::Datetime(_) => "datetime",
        Value::Array(_) => "array",
        Value::Table(_) => "table",
    }
}

fn merge(base: &mut Table, over: Table, prefix: &str) -> Result<()> {
    for (key, value) in over {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        let Some(slot) = base.get_mut(&key) else {
            return Err(Error::invalid(path, "unknown key"));
        };
        match (slot, value) {
            (Value::Table(b), Value::Table(o)) => merge(b, o, &path)?,
            (Value::Table(_), other) => {
                return Err(Error::invalid(path, format!("expected a table, got {}", type_name(&other))))
            }
            (slot @ Value::Float(_), Value::Integer(i)) => *slot = Value::Float(i as f64),
            (slot, value) => {
                if std::mem::discriminant(slot) != std::mem::discriminant(&value) {
                    return Err(Error::invalid(
                        path,
                        format!("expected {}, got {}", type_name(slot), type_name(&value)),
                    ));
                }
                if let Value::Integer(i) = value {
                    if i < 0 {
                        return Err(Error::invalid(path, "must not be negative"));
                    }
                }
                *slot = value;
            }
        }
    }
    Ok(())
}

fn finish(table: Table) -> Result<EvaluationConfig> {
    let config = EvaluationConfig::deserialize(Value::Table(table))
        .map_err(|e| Error::ConfigSyntax(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

fn selected<T: std::str::FromStr>(file: &Table, key: &str) -> Result<Option<T>> {
    let Some(v) = file.get("scenario").and_then(|s| s.get(key)) else {
        return Ok(None);
    };
    let field = format!("scenario.{key}");
    let s = v
        .as_str()
        .ok_or_else(|| Error::invalid(&field, "expected a string"))?;
    s.parse()
        .map(Some)
        .map_err(|_| Error::invalid(&field, format!("unknown value `{s}`")))
}

/// Parses configuration text on top of a preset.
///
/// The preset is named by `[scenario] environment` and `config_variant` in the
/// text, or by `base` when the text leaves them out. Both must agree when given.
pub fn load_config_str(text: &str, base: Option<(TestEnvironment, Variant)>) -> Result<EvaluationConfig> {
    let file: Table = text.parse().map_err(|e: toml::de::Error| Error::ConfigSyntax(e.to_string()))?;
    let env = selected::<TestEnvironment>(&file, "environment")?;
    let var = selected::<Variant>(&file, "config_variant")?;
    if let (Some((be, bv)), Some(e)) = (base, env) {
        if be != e {
            return Err(Error::invalid("scenario.environment", format!("file names {e}, caller asked for {be}")));
        }
        if let Some(v) = var {
            if v != bv {
                return Err(Error::invalid("scenario.config_variant", format!("file names {v}, caller asked for {bv}")));
            }
        }
    }
    let env = env
        .or(base.map(|b| b.0))
        .ok_or_else(|| Error::invalid("scenario.environment", "no environment selected"))?;
    let var = var.or(base.map(|b| b.1)).unwrap_or(Variant::A);
    let mut table = to_table(&preset(env, var)?);
    merge(&mut table, file, "")?;
    finish(table)
}

/// Reads a configuration file; see [`load_config_str`].
pub fn load_config(path: &Path, base: Option<(TestEnvironment, Variant)>) -> Result<EvaluationConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_config_str(&text, base)
}

/// Applies `section.key=value` overrides. Values use TOML syntax; bare words are
/// taken as strings.
pub fn apply_overrides(config: &EvaluationConfig, overrides: &[(String, String)]) -> Result<EvaluationConfig> {
    let mut table = to_table(config);
    for (key, raw) in overrides {
        if key == "scenario.environment" || key == "scenario.config_variant" {
            return Err(Error::invalid(key, "select a different preset instead of overriding it"));
        }
        let value = match format!("v = {raw}").parse::<Table>() {
            Ok(mut t) => t.remove("v").expect("parsed key is present"),
            Err(_) => Value::String(raw.clone()),
        };
        let mut nested = value;
        for part in key.split('.').rev() {
            if part.is_empty() {
                return Err(Error::invalid(key, "empty path segment"));
            }
            let mut t = Table::new();
            t.insert(part.to_string(), nested);
            nested = Value::Table(t);
        }
        let Value::Table(over) = nested else { unreachable!() };
        merge(&mut table, over, "")?;
    }
    finish(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mmtc_a() -> Option<(TestEnvironment, Variant)> {
        Some((TestEnvironment::UrbanMacroMmtc, Variant::A))
    }

    #[test]
    fn drops_override_keeps_everything_else() {
        let c = load_config_str("[run]\ndrops = 100\n", mmtc_a()).unwrap();
        let mut expect = preset(TestEnvironment::UrbanMacroMmtc, Variant::A).unwrap();
        expect.run.drops = 100;
        assert_eq!(c, expect);
    }

    #[test]
    fn negative_isd_names_field() {
        match load_config_str("[scenario]\nisd = -5\n", mmtc_a()) {
            Err(Error::ConfigInvalid { field, .. }) => assert_eq!(field, "scenario.isd"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_file_is_identity() {
        let c = load_config_str("", mmtc_a()).unwrap();
        assert_eq!(c, preset(TestEnvironment::UrbanMacroMmtc, Variant::A).unwrap());
    }

    #[test]
    fn unknown_key_rejected() {
        match load_config_str("[run]\ndropz = 3\n", mmtc_a()) {
            Err(Error::ConfigInvalid { field, .. }) => assert_eq!(field, "run.dropz"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            load_config_str("[extra]\nx = 1\n", mmtc_a()),
            Err(Error::ConfigInvalid { .. })
        ));
    }

    #[test]
    fn syntax_error_reported() {
        assert!(matches!(load_config_str("[run\n", mmtc_a()), Err(Error::ConfigSyntax(_))));
    }

    #[test]
    fn file_selects_its_own_preset() {
        let c = load_config_str(
            "[scenario]\nenvironment = \"Rural_eMBB\"\nconfig_variant = \"B\"\n",
            None,
        )
        .unwrap();
        assert_eq!(c, preset(TestEnvironment::RuralEmbb, Variant::B).unwrap());
        assert!(load_config_str("[scenario]\nenvironment = \"Rural_eMBB\"\n", mmtc_a()).is_err());
    }

    #[test]
    fn overrides_parse_values() {
        let base = preset(TestEnvironment::UrbanMacroMmtc, Variant::A).unwrap();
        let c = apply_overrides(
            &base,
            &[
                ("run.drops".into(), "7".into()),
                ("scenario.channel_profile".into(), "UMa_B".into()),
                ("antenna.bs.downtilt".into(), "3".into()),
            ],
        )
        .unwrap();
        assert_eq!(c.run.drops, 7);
        assert_eq!(c.scenario.channel_profile, "UMa_B");
        assert_eq!(c.antenna.bs.downtilt, 3.0);
        assert!(apply_overrides(&base, &[("run.nope".into(), "1".into())]).is_err());
    }

    #[test]
    fn integer_for_float_is_coerced_but_not_vice_versa() {
        assert!(load_config_str("[scenario]\nisd = 600\n", mmtc_a()).is_ok());
        assert!(load_config_str("[run]\ndrops = 1.5\n", mmtc_a()).is_err());
    }
}
