//! Line-oriented `key=value` records for event logs and reports.
//!
//! Fields appear in a fixed order and floats use `{:.16e}`, which
//! round-trips every `f64`.

use std::collections::BTreeMap;
use std::fmt::Write;

use num_complex::Complex64;

use crate::channel::IaChannel;
use crate::collapse::InteractionRecord;
use crate::kinematics::FourMomentum;
use crate::lattice::{Fluctuation, StepEvent, StepRecord};
use crate::particle::ParticleType;
use crate::qstate::{ObjectId, QObject, StateElement};

pub const SCHEMA_VERSION: u32 = 1;

/// `# qftca <kind> v<version>`
pub fn header(kind: &str) -> String {
    format!("# qftca {kind} v{SCHEMA_VERSION}")
}

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn complex(z: Complex64) -> String {
    format!("{},{}", float(z.re), float(z.im))
}

pub fn momentum(p: &FourMomentum) -> String {
    p.components().iter().map(|x| float(*x)).collect::<Vec<_>>().join(",")
}

pub fn types(t: &[ParticleType]) -> String {
    t.iter().map(|t| t.symbol()).collect::<Vec<_>>().join(",")
}

pub fn element(el: &StateElement) -> String {
    format!("{}[p={};s={};x={}]", el.ptype, momentum(&el.p), el.sigma, el.x.cell)
}

fn fluctuation(f: &Option<Fluctuation>) -> String {
    match f {
        None => "none".into(),
        Some(f) => format!("{}:{}+{}:{}", f.position, f.pw1, f.pw2, f.outcome.symbol()),
    }
}

pub fn step_line(r: &StepRecord) -> String {
    let event = match &r.event {
        StepEvent::Quiet => "quiet".to_string(),
        StepEvent::Volatile => "volatile".to_string(),
        StepEvent::NothingDurable => "nothing_durable".to_string(),
        StepEvent::Interaction(rec) => format!("interaction out={}", rec.out_collection.id),
    };
    format!(
        "step={} objects={} norm={} absorbed={} fluct={} event={}",
        r.step,
        r.objects,
        float(r.total_norm),
        r.absorbed_paths,
        fluctuation(&r.fluctuation),
        event
    )
}

pub fn interaction_line(r: &InteractionRecord) -> String {
    let mut s = format!(
        "interaction at={} in={}+{} in_states={};{} channels={} selected={} out={} paths={} truncated={}",
        r.position,
        r.in_refs[0],
        r.in_refs[1],
        element(&r.in_states[0]),
        element(&r.in_states[1]),
        r.channel_count,
        types(&r.selected_out_types),
        r.out_collection.id,
        r.out_collection.paths.len(),
        r.truncated_paths,
    );
    s.push_str(" weights=");
    let w: Vec<String> =
        r.combination_weights.iter().map(|(c, w)| format!("{}:{}", types(c), float(*w))).collect();
    s.push_str(&w.join(";"));
    s.push_str(" discarded=");
    let d: Vec<String> = r.discarded_path_counts.iter().map(|(id, n)| format!("{id}:{n}")).collect();
    s.push_str(&d.join(";"));
    s
}

/// One line per path of every object.
pub fn state_lines(objects: &BTreeMap<ObjectId, QObject>) -> Vec<String> {
    let mut out = Vec::new();
    for q in objects.values() {
        for (i, p) in q.paths.iter().enumerate() {
            let mut line = format!("object={} kind={} path={} amp={}", q.id, q.kind.symbol(), i, complex(p.amplitude));
            for el in &p.elements {
                let _ = write!(line, " {}", element(el));
            }
            out.push(line);
        }
    }
    out
}

pub fn channel_line(c: &IaChannel) -> String {
    format!(
        "channel shape={} ops={} intermediate={} out={} sign={:+}",
        c.shape.index,
        c.describe(),
        c.intermediate_type,
        types(&c.out_types),
        c.sign
    )
}

/// Event log of a run: header, one line per step plus one per interaction,
/// then the final state.
pub fn event_log(records: &[StepRecord], objects: &BTreeMap<ObjectId, QObject>) -> String {
    let mut s = header("evolve");
    s.push('\n');
    for r in records {
        s.push_str(&step_line(r));
        s.push('\n');
        if let StepEvent::Interaction(rec) = &r.event {
            s.push_str(&interaction_line(rec));
            s.push('\n');
        }
    }
    for l in state_lines(objects) {
        s.push_str(&l);
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, f64::MIN_POSITIVE] {
            assert_eq!(float(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(float(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn header_is_versioned() {
        assert_eq!(header("enumerate"), "# qftca enumerate v1");
    }
}
