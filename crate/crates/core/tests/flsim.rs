use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tinyfl_core::flsim::learner::{gradient, mse};
use tinyfl_core::flsim::*;
use tinyfl_core::messages::{GlobalModelUpdate, LocalModelUpdate, MessageKind};
use tinyfl_core::EncodingProfile;

fn random_samples(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> Vec<Sample> {
    (0..n)
        .map(|_| Sample {
            input: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            target: rng.random_range(-2.0..2.0),
        })
        .collect()
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let samples = random_samples(&mut rng, 8, 12);
        let model: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = gradient(&model, &samples);
        let h = 1e-5;
        for i in 0..8 {
            let mut plus = model.clone();
            let mut minus = model.clone();
            plus[i] += h;
            minus[i] -= h;
            let fd = (mse(&plus, &samples) - mse(&minus, &samples)) / (2.0 * h);
            let rel = (fd - g[i]).abs() / g[i].abs().max(1e-8);
            assert!(
                rel < 1e-6,
                "component {i}: analytic {} fd {fd} rel {rel}",
                g[i]
            );
        }
    }
}

#[test]
fn noise_free_training_loss_never_increases() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let truth: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
    for batch in [4, 8, 1000] {
        let data = LocalDataset::synthesize(&mut rng, &truth, 60, 0.0);
        let mut c = ClientState::new(0, data, 8);
        c.start_round(&[0.0; 8]);
        let mut prev = c.train_loss;
        for epoch in 0..200 {
            c.train_epoch(0.1, batch);
            assert!(
                c.train_loss <= prev + 1e-24,
                "batch {batch} epoch {epoch}: {} > {prev}",
                c.train_loss
            );
            prev = c.train_loss;
        }
        assert!(prev < 1e-3, "batch {batch}: {prev}");
    }
}

#[test]
fn single_client_average_is_its_model() {
    let cfg = OrchestrationConfig {
        num_clients: 1,
        min_fraction: 1.0,
        rounds: 1,
        min_dataset_size: 0,
        ..Default::default()
    };
    let mut sim = Simulation::new(cfg).unwrap();
    let rec = sim.run_round();
    assert_eq!(rec.report.outcome, RoundOutcome::Aggregated { clients: 1 });
    assert_eq!(
        rec.aggregate.as_deref(),
        Some(sim.client(0).unwrap().model.as_slice())
    );
    assert_eq!(sim.server().global_model, sim.client(0).unwrap().model);
}

#[test]
fn repeated_runs_are_identical() {
    let cfg = OrchestrationConfig {
        num_clients: 6,
        rounds: 4,
        seed: 9,
        ..Default::default()
    };
    assert_eq!(run_simulation(&cfg).unwrap(), run_simulation(&cfg).unwrap());
    let other = OrchestrationConfig {
        seed: 10,
        ..cfg.clone()
    };
    assert_ne!(
        run_simulation(&cfg).unwrap(),
        run_simulation(&other).unwrap()
    );
}

#[test]
fn unreachable_threshold_aborts_every_round() {
    let cfg = OrchestrationConfig {
        num_clients: 2,
        min_fraction: 1.0,
        min_dataset_size: 1_000_000_000,
        ..Default::default()
    };
    let reports = run_simulation(&cfg).unwrap();
    for r in &reports {
        assert_eq!(
            r.outcome,
            RoundOutcome::InsufficientClients(InsufficientClients {
                eligible: 0,
                required: 2
            })
        );
        assert_eq!(r.traffic.bytes_up, 0);
        assert!(r.selected.is_empty());
    }
    // the global model never moves
    assert!(reports
        .windows(2)
        .all(|w| w[0].model_checksum == w[1].model_checksum));
}

#[test]
fn downlink_counts_one_global_per_client_plus_halts() {
    for profile in [EncodingProfile::Compact, EncodingProfile::Verbose] {
        let cfg = OrchestrationConfig {
            num_clients: 5,
            rounds: 3,
            param_count: 1000,
            profile,
            ..Default::default()
        };
        let mut sim = Simulation::new(cfg).unwrap();
        for i in 0..3 {
            let r = sim.run_round().report;
            if i == 0 && profile == EncodingProfile::Compact {
                // the initial zero model fits binary16
                assert_eq!(r.global_message_bytes, 2027);
            }
            assert_eq!(
                r.traffic.bytes_down as usize,
                (5 + r.halt_messages) * r.global_message_bytes
            );
            assert_eq!(r.traffic.messages_down as usize, 5 + r.halt_messages);
            assert!(r.notifications >= r.eligible.len());
        }
    }
}

#[test]
fn multicast_counts_global_once() {
    let cfg = OrchestrationConfig {
        num_clients: 8,
        multicast: true,
        ..Default::default()
    };
    let r = Simulation::new(cfg).unwrap().run_round().report;
    assert_eq!(
        r.traffic.bytes_down as usize,
        (1 + r.halt_messages) * r.global_message_bytes
    );
}

#[test]
fn echo_mismatch_is_excluded() {
    let cfg = OrchestrationConfig {
        num_clients: 4,
        min_fraction: 1.0,
        min_dataset_size: 0,
        faulty_echo_clients: vec![2],
        ..Default::default()
    };
    let mut sim = Simulation::new(cfg).unwrap();
    let rec = sim.run_round();
    assert_eq!(rec.report.echo_mismatches, vec![2]);
    assert_eq!(rec.report.outcome, RoundOutcome::Aggregated { clients: 3 });
    assert!(rec.report.weights.iter().all(|(c, _)| *c != 2));
    let rejected = rec.collected.iter().find(|c| c.client == 2).unwrap();
    assert!(!rejected.accepted);
    assert_eq!(rejected.update.model_round, rec.report.round + 1);
}

#[test]
fn only_faulty_updates_leave_model_unchanged() {
    let cfg = OrchestrationConfig {
        num_clients: 1,
        min_fraction: 1.0,
        min_dataset_size: 0,
        faulty_echo_clients: vec![0],
        ..Default::default()
    };
    let mut sim = Simulation::new(cfg).unwrap();
    let rec = sim.run_round();
    assert_eq!(rec.report.outcome, RoundOutcome::NoValidUpdates);
    assert_eq!(sim.server().global_model, rec.global_before);
    assert_eq!(sim.server().round, 2);
}

#[test]
fn selection_follows_arrival_order() {
    let cfg = OrchestrationConfig {
        num_clients: 10,
        min_fraction: 0.6,
        ..Default::default()
    };
    let mut sim = Simulation::new(cfg).unwrap();
    let r = sim.run_round().report;
    if let RoundOutcome::Aggregated { .. } = r.outcome {
        assert_eq!(r.selected, r.eligible[..6].to_vec());
    }
}

#[test]
fn halted_clients_stop_and_are_reported() {
    // noise makes validation loss drop below training loss for some clients
    let mut seen_halt = false;
    for seed in 0..20 {
        let cfg = OrchestrationConfig {
            num_clients: 6,
            seed,
            noise: 0.5,
            min_dataset_size: 0,
            local_epochs: 10,
            ..Default::default()
        };
        let mut sim = Simulation::new(cfg.clone()).unwrap();
        let r = sim.run_round().report;
        for c in &r.clients {
            if c.halted {
                seen_halt = true;
                assert!(c.val_loss < c.train_loss);
                // stopped before finishing its epochs, or exactly at the end
                assert!(c.samples_seen <= (c.dataset_size * cfg.local_epochs) as u64);
                assert!(r.halted.contains(&c.id));
            }
        }
        assert_eq!(r.halt_messages, r.halted.len());
    }
    assert!(seen_halt);
}

#[test]
fn trace_records_every_message() {
    let cfg = OrchestrationConfig {
        num_clients: 3,
        rounds: 1,
        ..Default::default()
    };
    let mut sim = Simulation::new(cfg).unwrap().with_trace();
    let r = sim.run_round().report;
    let trace = sim.trace();
    assert_eq!(
        trace.len() as u64,
        r.traffic.messages_down + r.traffic.messages_up
    );
    for t in trace {
        match t.kind {
            MessageKind::Global => assert!(GlobalModelUpdate::decode(&t.bytes).is_ok()),
            MessageKind::Local => assert!(LocalModelUpdate::decode(&t.bytes).is_ok()),
            MessageKind::DataSet => assert!(t.bytes.len() <= 28),
        }
    }
}

#[test]
fn lossy_link_is_still_deterministic() {
    let cfg = OrchestrationConfig {
        num_clients: 8,
        drop_rate: 0.2,
        rounds: 3,
        ..Default::default()
    };
    let a = run_simulation(&cfg).unwrap();
    assert_eq!(a, run_simulation(&cfg).unwrap());
    assert!(a
        .iter()
        .any(|r| r.clients.iter().any(|c| !c.reached) || r.notifications > 0));
}
