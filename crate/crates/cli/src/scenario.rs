//! Scenario files: TOML with a `[config]` table, `[[object]]` declarations
//! and per-command sections.
//!
//! ```toml
//! [config]
//! dims = [8, 8, 8]
//! seed = 7
//!
//! [[object]]
//! kind = "particle"
//! type = "e-"
//! momentum = [0.0, 0.0, 2.0]
//! spin = "up"
//! cell = [4, 4, 4]
//!
//! [[object]]
//! kind = "entangled"
//! types = ["e-", "e+"]
//! momenta = [[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]
//! spins = [["up", "down"], ["down", "up"]]
//! cell = [2, 2, 2]
//! ```
//!
//! Object ids are assigned from 1 in declaration order.

use std::path::Path as FsPath;

use serde::Deserialize;

use qftca::channel::RuleTable;
use qftca::lattice::{Boundary, PwRef};
use qftca::qstate::{make_entangled_pair, make_particle_wave};
use qftca::{Coord, FourMomentum, ObjectId, ParticleType, Position, QObject, SimConfig, SpinState, StateElement};

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    mode: Option<String>,
    #[serde(default)]
    config: ConfigSection,
    #[serde(default, rename = "object")]
    objects: Vec<ObjectDecl>,
    interaction: Option<InteractionSection>,
    amplitude: Option<AmplitudeSection>,
    montecarlo: Option<MonteCarloSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigSection {
    dims: Option<Vec<usize>>,
    spacing: Option<f64>,
    timestep: Option<f64>,
    seed: Option<u64>,
    fluct_rate: Option<f64>,
    fluct_amp_power: Option<f64>,
    volatile_prob: Option<f64>,
    max_paths: Option<usize>,
    graining: Option<usize>,
    max_steps: Option<u64>,
    boundary: Option<String>,
    alpha: Option<f64>,
    prune_threshold: Option<f64>,
    on_shell_tol: Option<f64>,
    workers: Option<usize>,
    stop_after_interactions: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ObjectDecl {
    Particle {
        #[serde(rename = "type")]
        ptype: String,
        momentum: [f64; 3],
        spin: String,
        cell: Vec<i64>,
    },
    Entangled {
        types: [String; 2],
        momenta: [[f64; 3]; 2],
        /// `spins[k]` holds both particles' spins on path `k`.
        spins: [[String; 2]; 2],
        cell: Vec<i64>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InteractionSection {
    #[serde(rename = "in")]
    in_types: Option<[String; 2]>,
    /// Replacement vertex rule table, one `a b -> c` per line.
    rules: Option<String>,
    /// `[object, slot]` of the two interacting particle/waves.
    pw1: Option<[usize; 2]>,
    pw2: Option<[usize; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AmplitudeSection {
    sqrt_s: f64,
    theta_deg: f64,
    #[serde(default)]
    phi_deg: f64,
    /// `"physical"`, `"massless"` (m = 1e-6 sqrt s) or a number in MeV.
    mass: Option<toml::Value>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MonteCarloSection {
    trials: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MassChoice {
    Physical,
    Massless,
    Value(f64),
}

#[derive(Debug, Clone)]
pub struct AmplitudeSpec {
    pub sqrt_s: f64,
    pub theta: f64,
    pub phi: f64,
    pub mass: MassChoice,
}

/// Parsed and validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub mode: Option<String>,
    pub config: SimConfig,
    pub objects: Vec<QObject>,
    pub in_types: Option<[ParticleType; 2]>,
    pub rules: RuleTable,
    pub pw1: PwRef,
    pub pw2: PwRef,
    pub amplitude: Option<AmplitudeSpec>,
    pub trials: Option<u64>,
}

fn config_err(m: impl Into<String>) -> CliError {
    CliError::Config(m.into())
}

fn ptype(s: &str) -> Result<ParticleType, CliError> {
    s.parse().map_err(|_| config_err(format!("unknown particle type {s:?}")))
}

fn spin(s: &str) -> Result<SpinState, CliError> {
    SpinState::parse(s).ok_or_else(|| config_err(format!("unknown spin label {s:?}")))
}

fn element(t: ParticleType, p: [f64; 3], s: SpinState, cell: &[i64], tol: f64) -> Result<StateElement, CliError> {
    let p = FourMomentum::on_shell(t.mass(), p);
    Ok(StateElement::with_tolerance(t, p, s, Position::at(Coord(cell.to_vec())), tol)?)
}

impl Scenario {
    pub fn load(path: &FsPath) -> Result<Scenario, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Scenario::parse(&text)
    }

    /// A scenario with only default settings.
    pub fn empty() -> Scenario {
        Scenario::parse("").expect("defaults are valid")
    }

    pub fn parse(text: &str) -> Result<Scenario, CliError> {
        let f: File = toml::from_str(text).map_err(|e| config_err(format!("scenario: {e}")))?;
        let config = build_config(&f.config)?;

        let mut objects = Vec::new();
        for (i, decl) in f.objects.iter().enumerate() {
            let id = ObjectId(i as u64 + 1);
            let tol = config.on_shell_tol;
            let q = match decl {
                ObjectDecl::Particle { ptype: t, momentum, spin: s, cell } => {
                    let el = element(ptype(t)?, *momentum, spin(s)?, cell, tol)?;
                    make_particle_wave(id, el.ptype, el.p, el.sigma, el.x)?
                }
                ObjectDecl::Entangled { types, momenta, spins, cell } => {
                    let (t1, t2) = (ptype(&types[0])?, ptype(&types[1])?);
                    let on = |t, k: usize, path: usize| element(t, momenta[k], spin(&spins[path][k])?, cell, tol);
                    make_entangled_pair(id, (on(t1, 0, 0)?, on(t1, 0, 1)?), (on(t2, 1, 0)?, on(t2, 1, 1)?))?
                }
            };
            for p in &q.paths {
                for el in &p.elements {
                    let inside = el.x.cell.dim() == config.dims.len()
                        && el.x.cell.0.iter().zip(&config.dims).all(|(&c, &d)| c >= 0 && (c as usize) < d);
                    if !inside {
                        return Err(config_err(format!("object {} placed outside the lattice at {}", i + 1, el.x.cell)));
                    }
                }
            }
            objects.push(q);
        }

        let section = f.interaction.as_ref();
        let in_types = match section.and_then(|s| s.in_types.as_ref()) {
            Some([a, b]) => Some([ptype(a)?, ptype(b)?]),
            None => None,
        };
        let rules = match section.and_then(|s| s.rules.as_deref()) {
            Some(text) => RuleTable::parse(text)?,
            None => RuleTable::qed(),
        };
        let pw = |v: Option<[usize; 2]>, default: [usize; 2]| -> Result<PwRef, CliError> {
            let [o, slot] = v.unwrap_or(default);
            let q = o.checked_sub(1).and_then(|k| objects.get(k));
            match q {
                Some(q) if slot < q.slots() => Ok(PwRef { object: q.id, slot, path: 0 }),
                // unresolved defaults only matter to commands that interact
                _ if v.is_none() => Ok(PwRef { object: ObjectId(o as u64), slot, path: 0 }),
                _ => Err(config_err(format!("no particle/wave at object {o} slot {slot}"))),
            }
        };
        let pw1 = pw(section.and_then(|s| s.pw1), [1, 0])?;
        let pw2 = pw(section.and_then(|s| s.pw2), [2, 0])?;

        let amplitude = match &f.amplitude {
            None => None,
            Some(a) => {
                let mass = match &a.mass {
                    None => MassChoice::Physical,
                    Some(toml::Value::String(s)) if s == "physical" => MassChoice::Physical,
                    Some(toml::Value::String(s)) if s == "massless" => MassChoice::Massless,
                    Some(toml::Value::Float(m)) => MassChoice::Value(*m),
                    Some(toml::Value::Integer(m)) => MassChoice::Value(*m as f64),
                    Some(v) => return Err(config_err(format!("amplitude.mass: unsupported value {v}"))),
                };
                Some(AmplitudeSpec {
                    sqrt_s: a.sqrt_s,
                    theta: a.theta_deg.to_radians(),
                    phi: a.phi_deg.to_radians(),
                    mass,
                })
            }
        };

        Ok(Scenario {
            mode: f.mode,
            config,
            objects,
            in_types,
            rules,
            pw1,
            pw2,
            amplitude,
            trials: f.montecarlo.and_then(|m| m.trials),
        })
    }

    /// In-types for channel enumeration: the `[interaction] in` list, else
    /// the two interacting particle/waves.
    pub fn interaction_types(&self) -> Result<[ParticleType; 2], CliError> {
        if let Some(t) = self.in_types {
            return Ok(t);
        }
        let slot_type = |r: &PwRef| {
            self.objects
                .iter()
                .find(|q| q.id == r.object)
                .map(|q| q.paths[0].elements[r.slot].ptype)
        };
        match (slot_type(&self.pw1), slot_type(&self.pw2)) {
            (Some(a), Some(b)) => Ok([a, b]),
            _ => Err(config_err("two in-types needed: set [interaction] in or declare two objects")),
        }
    }
}

fn build_config(c: &ConfigSection) -> Result<SimConfig, CliError> {
    let d = SimConfig::default();
    let boundary = match &c.boundary {
        Some(b) => b.parse::<Boundary>()?,
        None => d.boundary,
    };
    let config = SimConfig {
        dims: c.dims.clone().unwrap_or(d.dims),
        spacing: c.spacing.unwrap_or(d.spacing),
        timestep: c.timestep.unwrap_or(d.timestep),
        seed: c.seed.unwrap_or(d.seed),
        fluct_rate: c.fluct_rate.unwrap_or(d.fluct_rate),
        fluct_amp_power: c.fluct_amp_power.unwrap_or(d.fluct_amp_power),
        volatile_prob: c.volatile_prob.unwrap_or(d.volatile_prob),
        max_paths: c.max_paths.unwrap_or(d.max_paths),
        graining: c.graining.unwrap_or(d.graining),
        max_steps: c.max_steps.unwrap_or(d.max_steps),
        boundary,
        alpha: c.alpha.unwrap_or(d.alpha),
        prune_threshold: c.prune_threshold.unwrap_or(d.prune_threshold),
        on_shell_tol: c.on_shell_tol.unwrap_or(d.on_shell_tol),
        workers: c.workers.unwrap_or(d.workers),
        stop_after_interactions: c.stop_after_interactions.or(d.stop_after_interactions),
    };
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_objects() {
        let s = Scenario::parse(
            r#"
            [config]
            dims = [4, 4, 4]
            seed = 3

            [[object]]
            kind = "particle"
            type = "e-"
            momentum = [0.0, 0.0, 1.0]
            spin = "up"
            cell = [1, 1, 1]

            [[object]]
            kind = "entangled"
            types = ["e-", "e+"]
            momenta = [[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]
            spins = [["up", "down"], ["down", "up"]]
            cell = [2, 2, 2]
            "#,
        )
        .unwrap();
        assert_eq!(s.config.seed, 3);
        assert_eq!(s.config.graining, SimConfig::default().graining);
        assert_eq!(s.objects.len(), 2);
        assert_eq!(s.objects[1].slots(), 2);
        assert_eq!(s.interaction_types().unwrap(), [ParticleType::Electron, ParticleType::Electron]);
    }

    #[test]
    fn rejects_bad_input() {
        let bad = [
            "[config]\nseeed = 1",
            "[config]\ngraining = 0",
            "[config]\nboundary = \"reflect\"",
            "[[object]]\nkind = \"particle\"\ntype = \"quark\"\nmomentum = [0.0, 0.0, 1.0]\nspin = \"up\"\ncell = [0, 0, 0]",
            "[[object]]\nkind = \"particle\"\ntype = \"gamma\"\nmomentum = [0.0, 0.0, 1.0]\nspin = \"up\"\ncell = [0, 0, 0]",
            "[config]\ndims = [2, 2, 2]\n[[object]]\nkind = \"particle\"\ntype = \"e-\"\nmomentum = [0.0, 0.0, 1.0]\nspin = \"up\"\ncell = [0, 0, 9]",
        ];
        for text in bad {
            assert!(matches!(Scenario::parse(text), Err(CliError::Config(_)) | Err(CliError::Core(_))), "{text}");
        }
    }
}
