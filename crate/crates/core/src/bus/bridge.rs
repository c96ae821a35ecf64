//! Two-dialect bridge. Each topic has a rule mapping dialect-A field names
//! to dialect-B names, optionally with a unit conversion. Only top-level
//! payload fields are renamed; nested values pass through unchanged apart
//! from declared conversions.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{BusError, Dialect, Envelope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Conversion {
    /// Dialect A carries degrees, dialect B radians. Applied to a number or
    /// elementwise to an array of numbers.
    DegreesToRadians,
}

impl Conversion {
    fn apply(self, v: &Value, to: Dialect) -> Value {
        match v {
            Value::Number(n) => {
                let x = n.as_f64().unwrap_or(f64::NAN);
                let y = match (self, to) {
                    (Conversion::DegreesToRadians, Dialect::B) => x.to_radians(),
                    (Conversion::DegreesToRadians, Dialect::A) => x.to_degrees(),
                };
                serde_json::Number::from_f64(y).map_or(Value::Null, Value::Number)
            }
            Value::Array(items) => Value::Array(items.iter().map(|i| self.apply(i, to)).collect()),
            other => other.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMap {
    pub a: String,
    pub b: String,
    pub conversion: Option<Conversion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeRule {
    pub topic: String,
    pub fields: Vec<FieldMap>,
}

impl BridgeRule {
    fn new(topic: &str, fields: &[(&str, &str)]) -> Self {
        Self {
            topic: topic.to_string(),
            fields: fields
                .iter()
                .map(|&(a, b)| FieldMap {
                    a: a.to_string(),
                    b: b.to_string(),
                    conversion: None,
                })
                .collect(),
        }
    }

    fn convert(mut self, b_field: &str, c: Conversion) -> Self {
        for f in &mut self.fields {
            if f.b == b_field {
                f.conversion = Some(c);
            }
        }
        self
    }

    /// Errors unless every A name and every B name appears once.
    pub fn check_bijective(&self) -> Result<(), BusError> {
        let mut a = HashSet::new();
        let mut b = HashSet::new();
        for f in &self.fields {
            for (seen, name) in [(&mut a, &f.a), (&mut b, &f.b)] {
                if !seen.insert(name.as_str()) {
                    return Err(BusError::NotBijective {
                        topic: self.topic.clone(),
                        field: name.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// The rule set covering every topic.
pub fn standard_rules() -> Vec<BridgeRule> {
    use super::*;
    vec![
        BridgeRule::new(
            RAW_INPUT,
            &[
                ("pos", "position"),
                ("quat", "orientation"),
                ("grip_input", "grasp"),
                ("set_origin", "calibrate"),
            ],
        ),
        BridgeRule::new(TARGET_POSE, &[("pos", "position"), ("quat", "orientation")]),
        BridgeRule::new(
            JOINT_STATES,
            &[
                ("joint_names", "name"),
                ("pos_deg", "position_rad"),
                ("vel_deg_s", "velocity_rad_s"),
            ],
        )
        .convert("position_rad", Conversion::DegreesToRadians)
        .convert("velocity_rad_s", Conversion::DegreesToRadians),
        BridgeRule::new(GRIPPER_CMD, &[("aperture_ratio", "aperture_fraction")]),
        BridgeRule::new(
            WORLD_STATE,
            &[
                ("stamp", "time"),
                ("session_phase", "phase"),
                ("phase_time", "phase_elapsed"),
                ("phase_length", "phase_duration"),
                ("objects", "cubes"),
                ("stack_zone", "zone"),
                ("gripper_state", "gripper"),
                ("tool_frame", "control_point"),
            ],
        ),
        BridgeRule::new(
            EVENTS,
            &[
                ("event_type", "kind"),
                ("object_id", "cube_id"),
                ("stamp", "time"),
                ("session_phase", "phase"),
                ("summary", "stats"),
            ],
        ),
        BridgeRule::new(
            HANDSHAKE,
            &[
                ("version", "protocol"),
                ("role", "role"),
                ("dialect", "dialect"),
                ("scene", "scene"),
            ],
        ),
    ]
}

/// Translates an envelope into the other dialect. Sequence number,
/// timestamp and publisher are preserved.
pub fn bridge_translate(envelope: &Envelope, rules: &[BridgeRule]) -> Result<Envelope, BusError> {
    let rule = rules
        .iter()
        .find(|r| r.topic == envelope.topic)
        .ok_or_else(|| BusError::MissingRule(envelope.topic.clone()))?;
    let Value::Object(fields) = &envelope.payload else {
        return Err(BusError::Schema {
            topic: envelope.topic.clone(),
            message: "payload must be an object".into(),
        });
    };
    let to = envelope.dialect.other();
    let mut out = Map::new();
    for (name, value) in fields {
        let map = rule
            .fields
            .iter()
            .find(|f| match envelope.dialect {
                Dialect::A => &f.a == name,
                Dialect::B => &f.b == name,
            })
            .ok_or_else(|| BusError::UnmappedField {
                topic: envelope.topic.clone(),
                field: name.clone(),
            })?;
        let target = match to {
            Dialect::A => &map.a,
            Dialect::B => &map.b,
        };
        let value = match map.conversion {
            Some(c) => c.apply(value, to),
            None => value.clone(),
        };
        out.insert(target.clone(), value);
    }
    Ok(Envelope {
        dialect: to,
        payload: Value::Object(out),
        ..envelope.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bus::{GRIPPER_CMD, JOINT_STATES, TOPICS};
    use serde_json::json;

    fn joint_a(deg: f64) -> Envelope {
        Envelope {
            topic: JOINT_STATES.into(),
            dialect: Dialect::A,
            publisher: "robot".into(),
            seq: 41,
            timestamp: 3.25,
            payload: json!({"joint_names": ["j"], "pos_deg": [deg], "vel_deg_s": [0.0]}),
        }
    }

    #[test]
    fn rules_cover_every_topic_and_are_bijective() {
        let rules = standard_rules();
        for t in TOPICS {
            let r = rules.iter().find(|r| r.topic == t).expect(t);
            r.check_bijective().unwrap();
        }
        let dup = BridgeRule::new("/x", &[("a", "b"), ("c", "b")]);
        assert!(dup.check_bijective().is_err());
    }

    #[test]
    fn degrees_convert_to_radians() {
        let b = bridge_translate(&joint_a(180.0), &standard_rules()).unwrap();
        assert_eq!(b.dialect, Dialect::B);
        assert_eq!((b.seq, b.timestamp), (41, 3.25));
        let rad = b.payload["position_rad"][0].as_f64().unwrap();
        assert!((rad - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn missing_rule_names_topic() {
        let mut e = joint_a(0.0);
        e.topic = "/camera".into();
        assert_eq!(
            bridge_translate(&e, &standard_rules()).unwrap_err(),
            BusError::MissingRule("/camera".into())
        );
    }

    #[test]
    fn unmapped_field_is_an_error() {
        let e = Envelope {
            topic: GRIPPER_CMD.into(),
            dialect: Dialect::B,
            publisher: "p".into(),
            seq: 1,
            timestamp: 0.0,
            payload: json!({"aperture_fraction": 0.5, "extra": 1}),
        };
        assert!(matches!(
            bridge_translate(&e, &standard_rules()),
            Err(BusError::UnmappedField { .. })
        ));
    }
}
