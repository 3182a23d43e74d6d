use qftca::lattice::{Boundary, StepEvent};
use qftca::qstate::make_particle_wave;
use qftca::records::event_log;
use qftca::{Coord, FourMomentum, ParticleType, Position, SimConfig, SpinState, SystemState};

fn crowded(seed: u64, workers: usize) -> SystemState {
    let config = SimConfig {
        dims: vec![3, 3, 3],
        timestep: 0.5,
        seed,
        fluct_rate: 1.0,
        fluct_amp_power: 1.0,
        volatile_prob: 0.2,
        max_paths: 16,
        graining: 3,
        max_steps: 60,
        boundary: Boundary::Periodic,
        workers,
        ..SimConfig::default()
    };
    let mut s = SystemState::new(config).unwrap();
    let parts = [
        (ParticleType::Electron, [0.0, 0.0, 0.8], [0, 0, 0]),
        (ParticleType::Positron, [0.0, 0.0, -0.8], [0, 0, 0]),
        (ParticleType::Photon, [1.0, 0.0, 0.0], [1, 1, 1]),
        (ParticleType::Electron, [0.0, 0.5, 0.0], [1, 1, 1]),
        (ParticleType::Antimuon, [0.0, 0.0, 30.0], [2, 2, 2]),
        (ParticleType::Photon, [0.0, 0.0, -2.0], [2, 2, 2]),
    ];
    for (t, p, c) in parts {
        let id = s.allocate_id();
        let q = make_particle_wave(
            id,
            t,
            FourMomentum::on_shell(t.mass(), p),
            SpinState::domain(t)[0],
            Position::at(Coord(c.to_vec())),
        )
        .unwrap();
        s.insert_object(q).unwrap();
    }
    s
}

#[test]
fn interactions_keep_the_index_and_norms_consistent() {
    let mut s = crowded(5, 2);
    let mut interactions = 0;
    for _ in 0..60 {
        let r = s.global_update().unwrap();
        s.lattice.audit(&s.objects).unwrap();
        for q in s.objects.values() {
            q.validate().unwrap();
            assert!((q.norm2() - 1.0).abs() < 1e-9, "{} norm {}", q.id, q.norm2());
            assert!(q.paths.len() <= s.config.max_paths);
        }
        if let StepEvent::Interaction(rec) = r.event {
            interactions += 1;
            let qin = rec.in_states[0].ptype.charge() + rec.in_states[1].ptype.charge();
            let pin = rec.in_states[0].p + rec.in_states[1].p;
            for p in &rec.out_collection.paths {
                assert_eq!(p.total_charge(), qin);
                assert_eq!(p.total_momentum(), pin);
            }
        }
    }
    assert!(interactions > 0);
    assert_eq!(interactions, s.interactions);
}

#[test]
fn same_seed_same_log_other_seed_differs() {
    let run = |seed, workers| {
        let mut s = crowded(seed, workers);
        let recs = s.evolve().unwrap();
        event_log(&recs, &s.objects)
    };
    let a = run(21, 1);
    assert_eq!(a, run(21, 4));
    assert_ne!(a, run(22, 1));
}

#[test]
fn stop_after_interactions() {
    let mut s = crowded(3, 1);
    s.config.stop_after_interactions = Some(1);
    s.evolve().unwrap();
    assert_eq!(s.interactions, 1);
}

#[test]
fn rejects_bad_config_and_placement() {
    assert!(SystemState::new(SimConfig { graining: 0, ..SimConfig::default() }).is_err());
    assert!(SystemState::new(SimConfig { volatile_prob: 1.5, ..SimConfig::default() }).is_err());
    let mut s = SystemState::new(SimConfig { dims: vec![2, 2, 2], ..SimConfig::default() }).unwrap();
    let t = ParticleType::Photon;
    let q = make_particle_wave(
        s.allocate_id(),
        t,
        FourMomentum::new(1.0, 0.0, 0.0, 1.0),
        SpinState::Plus,
        Position::at(Coord(vec![0, 0, 5])),
    )
    .unwrap();
    assert!(s.insert_object(q).is_err());
}

#[test]
fn closed_channels_leave_inputs_in_place() {
    use std::collections::BTreeMap;
    use qftca::collapse::{perform_interaction, InteractionContext};
    use qftca::lattice::PwRef;
    use qftca::rng::{Domain, StreamKey};
    use qftca::{Error, ObjectId};

    // two collinear photons: s = 0, no lepton pair can be produced
    let photon = |id, e: f64| {
        make_particle_wave(
            ObjectId(id),
            ParticleType::Photon,
            FourMomentum::new(e, 0.0, 0.0, e),
            SpinState::Plus,
            Position::at(Coord::origin(3)),
        )
        .unwrap()
    };
    let mut objects: BTreeMap<_, _> = [(ObjectId(1), photon(1, 1.0)), (ObjectId(2), photon(2, 3.0))].into();
    let before = objects.clone();
    let mut rng = StreamKey::new(0, Domain::Interaction, 0, 0).stream();
    let r = perform_interaction(
        &mut objects,
        PwRef { object: ObjectId(1), slot: 0, path: 0 },
        PwRef { object: ObjectId(2), slot: 0, path: 0 },
        &Coord::origin(3),
        ObjectId(3),
        &InteractionContext::qed(2),
        &mut rng,
    );
    assert!(matches!(r, Err(Error::BelowThreshold { .. })), "{r:?}");
    assert_eq!(objects, before);
}
