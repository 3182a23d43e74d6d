//! Interaction execution: path selection, the interaction object, channel
//! processing, out-combination selection, merging and collapse.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{instantiate_channels, outcome_grid, reduce_equivalent, IaChannel, RuleTable};
use crate::error::{Error, Result};
use crate::kinematics::{two_body_momentum, FourMomentum};
use crate::lattice::PwRef;
use crate::particle::ParticleType;
use crate::qed::{channel_amplitude, AmplitudeOptions};
use crate::qstate::{
    normalize, truncate_paths, truncation_survivors, Coord, ObjectId, ObjectKind, Path, Position, QObject, SpinState, StateElement,
};

/// Parameters shared by every interaction of a run.
#[derive(Debug, Clone)]
pub struct InteractionContext {
    pub rules: RuleTable,
    pub graining: usize,
    pub amplitude: AmplitudeOptions,
    pub prune_threshold: f64,
    pub max_paths: usize,
}

impl InteractionContext {
    pub fn qed(graining: usize) -> Self {
        InteractionContext {
            rules: RuleTable::qed(),
            graining,
            amplitude: AmplitudeOptions::default(),
            prune_threshold: 1e-14,
            max_paths: usize::MAX,
        }
    }
}

/// Born draw among the paths whose `slot` element sits in `position`.
pub fn select_interacting_path<R: Rng + ?Sized>(
    q: &QObject,
    slot: usize,
    position: &Coord,
    rng: &mut R,
) -> Result<usize> {
    let weights: Vec<f64> = q
        .paths
        .iter()
        .map(|p| match p.elements.get(slot) {
            Some(el) if &el.x.cell == position => p.amplitude.norm_sqr(),
            _ => 0.0,
        })
        .collect();
    crate::rng::weighted_index(&weights, rng).ok_or(Error::Coverage)
}

/// Single-path interaction object holding the two selected in-states.
pub fn form_interaction_object(id: ObjectId, pw1: &StateElement, pw2: &StateElement) -> QObject {
    QObject {
        id,
        kind: ObjectKind::InteractionObject,
        paths: vec![Path::new(vec![pw1.clone(), pw2.clone()], Complex64::new(1.0, 0.0))],
    }
}

/// Interaction object with its out-channels filled in.
#[derive(Debug, Clone)]
pub struct ProcessedInteraction {
    pub ia: QObject,
    pub channels: Vec<IaChannel>,
}

impl ProcessedInteraction {
    /// Distinct out combinations in channel order.
    pub fn out_combinations(&self) -> Vec<[ParticleType; 2]> {
        let mut combos: Vec<[ParticleType; 2]> = Vec::new();
        for c in &self.channels {
            if !combos.contains(&c.out_types) {
                combos.push(c.out_types);
            }
        }
        combos
    }

    /// Channels delivering `combo`.
    pub fn channels_for(&self, combo: [ParticleType; 2]) -> impl Iterator<Item = &IaChannel> {
        self.channels.iter().filter(move |c| c.out_types == combo)
    }

    /// Signed sum over channels of `combo`, one entry per grid point.
    pub fn merged_amplitudes(&self, combo: [ParticleType; 2]) -> Vec<Complex64> {
        let mut merged: Vec<Complex64> = Vec::new();
        for c in self.channels_for(combo) {
            if merged.is_empty() {
                merged = vec![Complex64::new(0.0, 0.0); c.paths.len()];
            }
            debug_assert_eq!(merged.len(), c.paths.len());
            for (m, p) in merged.iter_mut().zip(&c.paths) {
                *m += p.amplitude * f64::from(c.sign);
            }
        }
        merged
    }

    /// `(combo, sum |merged amplitude|^2)` for every combination.
    pub fn combination_weights(&self) -> Vec<([ParticleType; 2], f64)> {
        self.out_combinations()
            .into_iter()
            .map(|c| (c, self.merged_amplitudes(c).iter().map(|a| a.norm_sqr()).sum()))
            .collect()
    }
}

/// Polar axis of the outcome grid: pw1's direction in the centre-of-momentum
/// frame, falling back to z.
pub fn outcome_axis(pw1: &FourMomentum, total: &FourMomentum) -> [f64; 3] {
    let b = total.velocity();
    let cm = pw1.boost([-b[0], -b[1], -b[2]]);
    let n = cm.p3_norm();
    if n > 1e-12 * total.e.abs() {
        [cm.px / n, cm.py / n, cm.pz / n]
    } else {
        [0.0, 0.0, 1.0]
    }
}

/// Step 2: reduced channels for the two in-states, each filled with one
/// path per outcome-grid point and spin assignment.
///
/// Path amplitudes carry the square root of the two-body phase-space
/// measure of their bin, so Born weights of out states are proportional to
/// the differential rate; identical out particles get the usual 1/2.
pub fn process_channels(ia: &QObject, ctx: &InteractionContext) -> Result<ProcessedInteraction> {
    let path = ia
        .paths
        .first()
        .filter(|p| p.elements.len() == 2)
        .ok_or_else(|| Error::Structure("interaction object needs one path of two elements".into()))?;
    let (a, b) = (&path.elements[0], &path.elements[1]);
    let templates = reduce_equivalent(&instantiate_channels(a.ptype, b.ptype, &ctx.rules)?);
    let total = a.p + b.p;
    let axis = outcome_axis(&a.p, &total);
    let cell = a.x.cell.clone();
    let channels = templates
        .into_par_iter()
        .map(|mut c| {
            fill_channel(&mut c, a, b, &total, axis, &cell, ctx)?;
            Ok(c)
        })
        .collect::<Result<Vec<IaChannel>>>()?;
    Ok(ProcessedInteraction { ia: ia.clone(), channels })
}

fn fill_channel(
    c: &mut IaChannel,
    a: &StateElement,
    b: &StateElement,
    total: &FourMomentum,
    axis: [f64; 3],
    cell: &Coord,
    ctx: &InteractionContext,
) -> Result<()> {
    let [t0, t1] = c.out_types;
    // collinear massless in-states: no two-body final state
    if !(total.m2() > 0.0) {
        return Ok(());
    }
    let Some(grid) = outcome_grid(total, (t0, t1), ctx.graining, axis)? else {
        return Ok(());
    };
    let sqrt_s = total.m2().sqrt();
    let pstar = two_body_momentum(sqrt_s, t0.mass(), t1.mass()).unwrap_or(0.0);
    let g = ctx.graining as f64;
    let symmetry = if t0 == t1 { 0.5 } else { 1.0 };
    let weight = (symmetry * pstar / sqrt_s * 4.0 * PI / (g * g)).sqrt();
    let x = Position::at(cell.clone());
    for pt in grid {
        for s0 in SpinState::domain(t0) {
            for s1 in SpinState::domain(t1) {
                let o0 = StateElement::external_unchecked(t0, pt.pb, s0, x.clone());
                let o1 = StateElement::external_unchecked(t1, pt.pc, s1, x.clone());
                let amp = channel_amplitude(c, [a, b], [&o0, &o1], &ctx.amplitude)? * weight;
                c.paths.push(Path::new(vec![o0, o1], amp));
                c.bins.push(pt.bin);
            }
        }
    }
    Ok(())
}

/// Born draw of the out combination from merged signed weights.
pub fn select_out_combination<R: Rng + ?Sized>(p: &ProcessedInteraction, rng: &mut R) -> Result<[ParticleType; 2]> {
    let weights = p.combination_weights();
    let w: Vec<f64> = weights.iter().map(|x| x.1).collect();
    if p.channels.iter().all(|c| c.paths.is_empty()) {
        let el = &p.ia.paths[0].elements;
        let sqrt_s = (el[0].p + el[1].p).m2().max(0.0).sqrt();
        return Err(Error::BelowThreshold { a: el[0].ptype, b: el[1].ptype, sqrt_s });
    }
    let i = crate::rng::weighted_index(&w, rng)
        .ok_or_else(|| Error::DegenerateObject("every out combination has zero weight".into()))?;
    Ok(weights[i].0)
}

/// Merged out collection and the grid bin of each of its paths.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedCollection {
    pub collection: QObject,
    pub bins: Vec<(usize, usize)>,
}

/// Step 3: signed sum over the channels delivering `combo`, pruned below
/// `prune_threshold` and normalized.
pub fn merge_channels(
    p: &ProcessedInteraction,
    combo: [ParticleType; 2],
    id: ObjectId,
    prune_threshold: f64,
) -> Result<MergedCollection> {
    let first = p
        .channels_for(combo)
        .next()
        .ok_or_else(|| Error::Structure(format!("no channel delivers ({}, {})", combo[0], combo[1])))?;
    let merged = p.merged_amplitudes(combo);
    let mut paths = Vec::new();
    let mut bins = Vec::new();
    for ((amp, path), bin) in merged.iter().zip(&first.paths).zip(&first.bins) {
        if amp.norm() >= prune_threshold {
            paths.push(Path::new(path.elements.clone(), *amp));
            bins.push(*bin);
        }
    }
    if paths.is_empty() {
        return Err(Error::DegenerateObject(format!("({}, {}) has no surviving out path", combo[0], combo[1])));
    }
    let collection = normalize(&QObject::new(id, ObjectKind::PwCollection, paths)?)?;
    Ok(MergedCollection { collection, bins })
}

/// Removes the interacting slot of each selection and keeps only the
/// selected path in what survives. Returns `(object, discarded paths)`.
pub fn collapse_in_collections(
    objects: &mut BTreeMap<ObjectId, QObject>,
    selections: &[PwRef],
) -> Result<Vec<(ObjectId, usize)>> {
    let mut discarded = Vec::new();
    for r in selections {
        let q = objects.get_mut(&r.object).ok_or_else(|| Error::Structure(format!("unknown object {}", r.object)))?;
        let len = q.paths.len();
        if r.path >= len {
            return Err(Error::Index { index: r.path, len });
        }
        let mut kept = q.paths.swap_remove(r.path);
        discarded.push((r.object, len - 1));
        kept.elements.remove(r.slot);
        if kept.elements.is_empty() {
            objects.remove(&r.object);
            continue;
        }
        kept.amplitude = Complex64::new(1.0, 0.0);
        q.kind = if kept.elements.len() == 1 { ObjectKind::ParticleWave } else { ObjectKind::PwCollection };
        q.paths = vec![kept];
    }
    Ok(discarded)
}

/// Everything an executed interaction produced.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionRecord {
    pub position: Coord,
    pub in_refs: [PwRef; 2],
    pub in_states: [StateElement; 2],
    pub channel_count: usize,
    pub combination_weights: Vec<([ParticleType; 2], f64)>,
    pub selected_out_types: [ParticleType; 2],
    pub out_collection: QObject,
    pub out_bins: Vec<(usize, usize)>,
    pub truncated_paths: usize,
    pub discarded_path_counts: Vec<(ObjectId, usize)>,
}

/// Steps 1 to 3 followed by collapse, between slot `pw1.slot` of object
/// `pw1.object` and slot `pw2.slot` of `pw2.object` at `position`. The
/// path fields of the references are ignored; interacting paths are
/// redrawn by the Born rule over the paths covering `position`.
///
/// Nothing is modified when an error is returned.
pub fn perform_interaction<R: Rng + ?Sized>(
    objects: &mut BTreeMap<ObjectId, QObject>,
    pw1: PwRef,
    pw2: PwRef,
    position: &Coord,
    out_id: ObjectId,
    ctx: &InteractionContext,
    rng: &mut R,
) -> Result<InteractionRecord> {
    if pw1.object == pw2.object {
        return Err(Error::Structure("an interaction needs two distinct q-objects".into()));
    }
    let lookup = |id: ObjectId| objects.get(&id).ok_or_else(|| Error::Structure(format!("unknown object {id}")));
    let q1 = lookup(pw1.object)?;
    let q2 = lookup(pw2.object)?;
    let r1 = PwRef { path: select_interacting_path(q1, pw1.slot, position, rng)?, ..pw1 };
    let r2 = PwRef { path: select_interacting_path(q2, pw2.slot, position, rng)?, ..pw2 };
    let e1 = q1.paths[r1.path].elements[r1.slot].clone();
    let e2 = q2.paths[r2.path].elements[r2.slot].clone();
    let ia = form_interaction_object(out_id, &e1, &e2);
    let processed = process_channels(&ia, ctx)?;
    let weights = processed.combination_weights();
    let combo = select_out_combination(&processed, rng)?;
    let mut merged = merge_channels(&processed, combo, out_id, ctx.prune_threshold)?;
    let truncated = truncate_bins(&mut merged, ctx.max_paths)?;
    let discarded = collapse_in_collections(objects, &[r1, r2])?;
    objects.insert(out_id, merged.collection.clone());
    Ok(InteractionRecord {
        position: position.clone(),
        in_refs: [r1, r2],
        in_states: [e1, e2],
        channel_count: processed.channels.len(),
        combination_weights: weights,
        selected_out_types: combo,
        out_collection: merged.collection,
        out_bins: merged.bins,
        truncated_paths: truncated,
        discarded_path_counts: discarded,
    })
}

/// [`truncate_paths`] keeping the bin list aligned.
fn truncate_bins(m: &mut MergedCollection, max_paths: usize) -> Result<usize> {
    if m.collection.paths.len() <= max_paths {
        return Ok(0);
    }
    let keep = truncation_survivors(&m.collection, max_paths);
    m.bins = keep.iter().map(|&i| m.bins[i]).collect();
    truncate_paths(&mut m.collection, max_paths)
}
