use std::collections::BTreeMap;
use std::fmt::Write;

use rayon::prelude::*;

use qftca::channel::{enumerate_shapes, instantiate_channels, reduce_equivalent, relative_sign, IaChannel};
use qftca::collapse::{perform_interaction, InteractionRecord};
use qftca::lattice::{PwRef, StepEvent};
use qftca::particle::coupling_from_alpha;
use qftca::qed::{bhabha_ma, bhabha_mb, bhabha_spin_averaged, bhabha_spin_configurations, spin_averaged_m2, BhabhaKinematics};
use qftca::records::{self, float, types};
use qftca::rng::{weighted_index, Domain, StreamKey};
use qftca::stats::chi_square;
use qftca::{Coord, ObjectId, ParticleType, QObject, SystemState};

use crate::scenario::{MassChoice, Scenario};
use crate::CliError;

/// Significance level of the self-test chi-square checks.
pub const SELF_TEST_P_MIN: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Records,
}

/// Command output plus whether its statistical checks held.
#[derive(Debug)]
pub struct Output {
    pub text: String,
    pub checks_passed: bool,
}

impl Output {
    fn plain(text: String) -> Self {
        Output { text, checks_passed: true }
    }
}

fn run_header(kind: &str, s: &Scenario, source: &str) -> String {
    format!("{}\n# scenario={source} seed={}\n", records::header(kind), s.config.seed)
}

fn equivalence_key(c: &IaChannel) -> (ParticleType, [i32; 3], [ParticleType; 2]) {
    let (t, k) = c.propagator_key();
    let mut outs = c.out_types;
    outs.sort();
    (t, k, outs)
}

pub fn enumerate(s: &Scenario, format: Format, source: &str) -> Result<Output, CliError> {
    let [a, b] = s.interaction_types()?;
    let typed = instantiate_channels(a, b, &s.rules)?;
    let reduced = reduce_equivalent(&typed);
    let mut out = run_header("enumerate", s, source);
    let text = format == Format::Text;
    let _ = writeln!(out, "in={}", types(&[a, b]));
    if text {
        out.push_str("\n# shapes\n");
    }
    for shape in enumerate_shapes() {
        let _ = writeln!(out, "shape={} ops={shape}", shape.index);
    }
    if text {
        let _ = writeln!(out, "\n# typed channels ({})", typed.len());
    }
    for c in &typed {
        let _ = writeln!(out, "{}", records::channel_line(c));
    }
    if text {
        let _ = writeln!(out, "\n# equivalence classes ({})", reduced.len());
    }
    for r in &reduced {
        let members: Vec<String> = typed
            .iter()
            .filter(|c| equivalence_key(c) == equivalence_key(r))
            .map(|c| c.shape.index.to_string())
            .collect();
        let _ = writeln!(out, "class rep={} members={} {}", r.shape.index, members.join(","), records::channel_line(r));
    }
    if text {
        out.push_str("\n# relative signs\n");
    }
    for (i, c1) in reduced.iter().enumerate() {
        for c2 in &reduced[i + 1..] {
            if c1.out_types == c2.out_types {
                let _ = writeln!(
                    out,
                    "sign out={} shapes={},{} relative={:+}",
                    types(&c1.out_types),
                    c1.shape.index,
                    c2.shape.index,
                    relative_sign(c1, c2)?
                );
            }
        }
    }
    Ok(Output::plain(out))
}

pub fn amplitude(s: &Scenario, format: Format, source: &str) -> Result<Output, CliError> {
    let spec = s
        .amplitude
        .as_ref()
        .ok_or_else(|| CliError::Config("amplitude needs an [amplitude] section".into()))?;
    let mass = match spec.mass {
        MassChoice::Physical => ParticleType::Electron.mass(),
        MassChoice::Massless => 1e-6 * spec.sqrt_s,
        MassChoice::Value(m) => m,
    };
    let kin = BhabhaKinematics::cm(spec.sqrt_s, spec.theta, spec.phi, mass)?;
    let e = coupling_from_alpha(s.config.alpha);
    let mut out = run_header("amplitude", s, source);
    let _ = writeln!(
        out,
        "kinematics sqrt_s={} theta={} phi={} mass={} s={} t={} u={}",
        float(spec.sqrt_s),
        float(spec.theta),
        float(spec.phi),
        float(mass),
        float(kin.s()),
        float(kin.t()),
        float(kin.u())
    );
    if format == Format::Text {
        out.push_str("\n# spins (e- in, e+ in, e- out, e+ out): M_A, M_B, M = M_A - M_B\n");
    }
    for spins in bhabha_spin_configurations() {
        let ma = bhabha_ma(&kin, &spins, e)?;
        let mb = bhabha_mb(&kin, &spins, e)?;
        let labels: Vec<&str> = spins.iter().map(|x| x.symbol()).collect();
        let _ = writeln!(
            out,
            "spins={} ma={} mb={} m={}",
            labels.join(","),
            records::complex(ma),
            records::complex(mb),
            records::complex(ma - mb)
        );
    }
    let averaged = bhabha_spin_averaged(&kin, e)?;
    let oracle = spin_averaged_m2(kin.s(), kin.t(), kin.u(), e)?;
    if format == Format::Text {
        out.push_str("\n# spin average against the massless Mandelstam formula\n");
    }
    let _ = writeln!(
        out,
        "averaged m2={} oracle={} rel_delta={} m2_over_e4={}",
        float(averaged),
        float(oracle),
        float((averaged - oracle) / oracle),
        float(averaged / e.powi(4))
    );
    Ok(Output::plain(out))
}

fn system(s: &Scenario) -> Result<SystemState, CliError> {
    let mut sys = SystemState::new(s.config.clone())?;
    for q in &s.objects {
        sys.insert_object(q.clone())?;
    }
    Ok(sys)
}

fn objects_of(s: &Scenario) -> BTreeMap<ObjectId, QObject> {
    s.objects.iter().map(|q| (q.id, q.clone())).collect()
}

fn position_of(objects: &BTreeMap<ObjectId, QObject>, r: &PwRef) -> Result<Coord, CliError> {
    objects
        .get(&r.object)
        .map(|q| q.paths[0].elements[r.slot].x.cell.clone())
        .ok_or_else(|| CliError::Config(format!("object {} is not declared", r.object)))
}

fn next_id(objects: &BTreeMap<ObjectId, QObject>) -> ObjectId {
    ObjectId(objects.keys().next_back().map_or(1, |id| id.0 + 1))
}

pub fn scatter(s: &Scenario, _format: Format, source: &str) -> Result<Output, CliError> {
    let mut objects = objects_of(s);
    let at = position_of(&objects, &s.pw1)?;
    let out_id = next_id(&objects);
    let ctx = s.config.interaction_context();
    let mut rng = StreamKey::new(s.config.seed, Domain::Interaction, 0, 0).stream();
    let rec = perform_interaction(&mut objects, s.pw1, s.pw2, &at, out_id, &ctx, &mut rng)?;
    let mut out = run_header("scatter", s, source);
    let _ = writeln!(out, "{}", records::interaction_line(&rec));
    for l in records::state_lines(&objects) {
        let _ = writeln!(out, "{l}");
    }
    Ok(Output::plain(out))
}

/// Result of one Monte Carlo trial.
struct Trial {
    combo: [ParticleType; 2],
    /// Born probability of each out combination in this trial.
    combo_probs: Vec<([ParticleType; 2], f64)>,
    polar_bin: usize,
    polar_probs: Vec<f64>,
    conserved: bool,
    correlated: bool,
}

fn run_trial(s: &Scenario, base: &BTreeMap<ObjectId, QObject>, at: &Coord, trial: u64) -> Result<Trial, CliError> {
    let mut objects = base.clone();
    let ctx = s.config.interaction_context();
    let mut rng = StreamKey::new(s.config.seed, Domain::MonteCarlo, trial, 0).stream();
    let rec = perform_interaction(&mut objects, s.pw1, s.pw2, at, next_id(base), &ctx, &mut rng)?;
    let total: f64 = rec.combination_weights.iter().map(|w| w.1).sum();
    let combo_probs = rec.combination_weights.iter().map(|(c, w)| (*c, w / total)).collect();

    // measure the out collection's direction bin
    let g = s.config.graining;
    let mut polar_probs = vec![0.0; g];
    let w: Vec<f64> = rec.out_collection.paths.iter().map(|p| p.amplitude.norm_sqr()).collect();
    let norm: f64 = w.iter().sum();
    for (wi, bin) in w.iter().zip(&rec.out_bins) {
        polar_probs[bin.0] += wi / norm;
    }
    let mut mrng = StreamKey::new(s.config.seed, Domain::Measurement, trial, 0).stream();
    let k = weighted_index(&w, &mut mrng).ok_or_else(|| CliError::Core(qftca::Error::DegenerateObject("empty out collection".into())))?;

    Ok(Trial {
        combo: rec.selected_out_types,
        combo_probs,
        polar_bin: rec.out_bins[k].0,
        polar_probs,
        conserved: conserves(&rec),
        correlated: partners_consistent(base, &objects, &rec),
    })
}

fn conserves(rec: &InteractionRecord) -> bool {
    let p = rec.in_states[0].p + rec.in_states[1].p;
    let q = rec.in_states[0].ptype.charge() + rec.in_states[1].ptype.charge();
    rec.out_collection.paths.iter().all(|path| path.total_momentum() == p && path.total_charge() == q)
}

/// Every surviving partner keeps exactly the selected path, minus the slot
/// that interacted.
fn partners_consistent(
    before: &BTreeMap<ObjectId, QObject>,
    after: &BTreeMap<ObjectId, QObject>,
    rec: &InteractionRecord,
) -> bool {
    rec.in_refs.iter().all(|r| {
        let old = &before[&r.object];
        match after.get(&r.object) {
            None => old.slots() == 1,
            Some(q) => {
                let mut expected = old.paths[r.path].elements.clone();
                expected.remove(r.slot);
                q.paths.len() == 1 && q.paths[0].elements == expected
            }
        }
    })
}

/// Pearson test over categories, pooling those with expected count below 5.
fn pooled_chi_square(observed: &[u64], expected: &[f64]) -> Option<f64> {
    let n: u64 = observed.iter().sum();
    let (mut obs, mut exp) = (Vec::new(), Vec::new());
    let (mut o_rest, mut e_rest) = (0u64, 0.0);
    for (o, e) in observed.iter().zip(expected) {
        if *e >= 5.0 {
            obs.push(*o);
            exp.push(*e);
        } else {
            o_rest += o;
            e_rest += e;
        }
    }
    if e_rest > 0.0 {
        obs.push(o_rest);
        exp.push(e_rest);
    }
    if obs.len() < 2 {
        return None;
    }
    let probs: Vec<f64> = exp.iter().map(|e| e / n as f64).collect();
    Some(chi_square(&obs, &probs).p_value)
}

pub fn montecarlo(s: &Scenario, format: Format, source: &str, trials: u64) -> Result<Output, CliError> {
    if trials == 0 {
        return Err(CliError::Config("trials must be at least 1".into()));
    }
    let base = objects_of(s);
    let at = position_of(&base, &s.pw1)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(s.config.workers)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let results: Vec<Trial> = pool.install(|| {
        (0..trials).into_par_iter().map(|t| run_trial(s, &base, &at, t)).collect::<Result<Vec<_>, _>>()
    })?;

    let mut combos: Vec<[ParticleType; 2]> = Vec::new();
    for t in &results {
        for (c, _) in &t.combo_probs {
            if !combos.contains(c) {
                combos.push(*c);
            }
        }
    }
    let g = s.config.graining;
    let mut combo_obs = vec![0u64; combos.len()];
    let mut combo_exp = vec![0.0; combos.len()];
    let mut polar_obs = vec![0u64; g];
    let mut polar_exp = vec![0.0; g];
    let (mut conserved, mut correlated) = (0u64, 0u64);
    for t in &results {
        combo_obs[combos.iter().position(|c| *c == t.combo).expect("listed")] += 1;
        for (c, p) in &t.combo_probs {
            combo_exp[combos.iter().position(|x| x == c).expect("listed")] += p;
        }
        polar_obs[t.polar_bin] += 1;
        for (e, p) in polar_exp.iter_mut().zip(&t.polar_probs) {
            *e += p;
        }
        conserved += u64::from(t.conserved);
        correlated += u64::from(t.correlated);
    }
    let combo_p = pooled_chi_square(&combo_obs, &combo_exp);
    let polar_p = pooled_chi_square(&polar_obs, &polar_exp);
    let fmt_p = |p: Option<f64>| p.map_or("n/a".to_string(), float);

    let mut out = run_header("montecarlo", s, source);
    let text = format == Format::Text;
    let _ = writeln!(out, "trials={trials} pw1={} pw2={} at={at}", s.pw1, s.pw2);
    if text {
        out.push_str("\n# out combinations: frequency, predicted\n");
    }
    for (i, c) in combos.iter().enumerate() {
        let _ = writeln!(
            out,
            "combination out={} count={} frequency={} predicted={}",
            types(c),
            combo_obs[i],
            float(combo_obs[i] as f64 / trials as f64),
            float(combo_exp[i] / trials as f64)
        );
    }
    if text {
        out.push_str("\n# measured polar bin of the out collection\n");
    }
    for i in 0..g {
        let _ = writeln!(
            out,
            "polar bin={i} count={} frequency={} predicted={}",
            polar_obs[i],
            float(polar_obs[i] as f64 / trials as f64),
            float(polar_exp[i] / trials as f64)
        );
    }
    if text {
        out.push_str("\n# checks\n");
    }
    let _ = writeln!(out, "chi2 combinations p={} polar p={}", fmt_p(combo_p), fmt_p(polar_p));
    let _ = writeln!(out, "audit conserved={conserved}/{trials} correlation_violations={}", trials - correlated);
    let stats_ok = [combo_p, polar_p].iter().all(|p| p.is_none_or(|p| p > SELF_TEST_P_MIN));
    Ok(Output { text: out, checks_passed: stats_ok && conserved == trials && correlated == trials })
}

pub fn evolve(s: &Scenario, format: Format, source: &str) -> Result<Output, CliError> {
    let mut sys = system(s)?;
    let initial_norm = sys.total_norm();
    let recs = sys.evolve()?;
    let mut counts = BTreeMap::new();
    let mut conserved = 0;
    for r in &recs {
        let kind = match &r.event {
            StepEvent::Quiet => "quiet",
            StepEvent::Volatile => "volatile",
            StepEvent::NothingDurable => "nothing_durable",
            StepEvent::Interaction(rec) => {
                conserved += usize::from(conserves(rec));
                "interaction"
            }
        };
        *counts.entry(kind).or_insert(0usize) += 1;
    }
    let absorbed: usize = recs.iter().map(|r| r.absorbed_paths).sum();
    let mut out = match format {
        Format::Records => {
            let mut log = records::event_log(&recs, &sys.objects);
            log.insert_str(log.find('\n').map_or(0, |i| i + 1), &format!("# scenario={source} seed={}\n", s.config.seed));
            log
        }
        Format::Text => {
            let mut t = run_header("evolve", s, source);
            for r in &recs {
                if let StepEvent::Interaction(rec) = &r.event {
                    let _ = writeln!(t, "step={} {}", r.step, records::interaction_line(rec));
                }
            }
            t
        }
    };
    let events: Vec<String> = counts.iter().map(|(k, v)| format!("{k}:{v}")).collect();
    let freq: Vec<String> =
        counts.iter().map(|(k, v)| format!("{k}:{}", float(*v as f64 / recs.len().max(1) as f64))).collect();
    let _ = writeln!(
        out,
        "# report steps={} objects={} interactions={} absorbed_paths={} norm_initial={} norm_final={}",
        recs.len(),
        sys.objects.len(),
        sys.interactions,
        absorbed,
        float(initial_norm),
        float(sys.total_norm())
    );
    let _ = writeln!(out, "# report events={} frequencies={}", events.join(";"), freq.join(";"));
    let _ = writeln!(out, "# report conserved={conserved}/{}", sys.interactions);
    Ok(Output { text: out, checks_passed: conserved == sys.interactions })
}
