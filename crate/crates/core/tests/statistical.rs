//! Monte Carlo checks with fixed seeds.

use ncgossip_core::coding::{oracle_decode, BinningCode, Equation, NodeState, OracleOutcome};
use ncgossip_core::linalg::FVector;
use ncgossip_core::netmodel::complete_edges;
use ncgossip_core::rng::{stream, Domain};
use ncgossip_core::{
    Experiment, ExperimentSpec, FieldSpec, GossipMode, JointSource, MessageSetup, ModelSpec,
    ModelVariant, RowSpace, StopRule,
};
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn uninformed_receiver_learns_with_probability_one_minus_inverse_q() {
    for (q, f) in [
        (2u32, FieldSpec::prime(2).unwrap()),
        (16, FieldSpec::new(2, 4).unwrap()),
    ] {
        let trials = 4000;
        let mut rng = stream(q as u64, Domain::Trial, 0);
        let mut fails = 0;
        for _ in 0..trials {
            let d = rng.gen_range(2..=6usize);
            let mu = loop {
                let m = FVector::random(&f, d, &mut rng);
                if !m.is_zero() {
                    break m;
                }
            };
            let perp = RowSpace::spanned_by(f.clone(), d, [&mu[..]])
                .unwrap()
                .orthogonal_complement();
            let mut sender = NodeState::new(0, f.clone(), d, 1);
            while !sender.space().knows(&mu).unwrap() {
                let v = FVector::random(&f, d, &mut rng);
                sender
                    .receive(&ncgossip_core::Packet {
                        coeffs: v,
                        payload: FVector::zero(1),
                    })
                    .unwrap();
            }
            for _ in 0..rng.gen_range(0..d) {
                let v = FVector::random(&f, d, &mut rng);
                sender
                    .receive(&ncgossip_core::Packet {
                        coeffs: v,
                        payload: FVector::zero(1),
                    })
                    .unwrap();
            }
            let mut receiver = NodeState::new(1, f.clone(), d, 1);
            for _ in 0..rng.gen_range(0..d) {
                let v = perp.random_member(&mut rng);
                receiver
                    .receive(&ncgossip_core::Packet {
                        coeffs: v,
                        payload: FVector::zero(1),
                    })
                    .unwrap();
            }
            assert!(!receiver.space().knows(&mu).unwrap());
            receiver.receive(&sender.make_packet(&mut rng)).unwrap();
            fails += !receiver.space().knows(&mu).unwrap() as u32;
        }
        let p = 1.0 / q as f64;
        let sd = (p * (1.0 - p) / trials as f64).sqrt();
        let rate = fails as f64 / trials as f64;
        assert!(rate <= p + 3.0 * sd, "q={q}: {rate}");
        assert!(rate >= p - 4.0 * sd, "q={q}: {rate}");
    }
}

#[test]
fn bin_occupancy_is_uniform() {
    let f = FieldSpec::prime(2).unwrap();
    // h = ⌈40 · (0.1 + 0.01)⌉ = 5 bits, 32 bins; inputs are long enough not to repeat
    let code = BinningCode::new(f, 0, 2, 40, 8, 0.1, 0.01, 77).unwrap();
    assert_eq!(code.h(), 5);
    let mut rng = stream(3, Domain::Source, 0);
    let mut counts = [0u32; 32];
    let draws = 10_000;
    for _ in 0..draws {
        let x: Vec<u32> = (0..40).map(|_| rng.gen_range(0..2)).collect();
        let idx = code.bin_index(&x).unwrap();
        let bin = idx
            .iter()
            .take(5)
            .fold(0usize, |acc, s| acc * 2 + s.value() as usize);
        counts[bin] += 1;
    }
    let expect = draws as f64 / 32.0;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expect).powi(2) / expect)
        .sum();
    let crit = ChiSquared::new(31.0).unwrap().inverse_cdf(0.95);
    assert!(chi2 < crit, "chi2 {chi2} vs {crit}");
}

#[test]
fn edge_markovian_transitions_are_homogeneous() {
    let n = 12;
    let (birth, death) = (0.1, 0.3);
    let model = ModelSpec::new(
        n,
        ModelVariant::EdgeMarkovian {
            p_birth: birth,
            p_death: death,
            initial: complete_edges(n),
        },
        0,
    )
    .unwrap();
    // counts[phase][from_state] = (stays, total)
    let mut counts = [[(0u64, 0u64); 2]; 2];
    for seed in 0..40 {
        let rounds: Vec<_> = model.rounds(seed).take(40).collect();
        for t in 1..rounds.len() {
            let phase = usize::from(t >= 20);
            for u in 0..n as u32 {
                for v in 0..n as u32 {
                    if u == v {
                        continue;
                    }
                    let was = rounds[t - 1].contains((u, v));
                    let now = rounds[t].contains((u, v));
                    let cell = &mut counts[phase][was as usize];
                    cell.0 += (was == now) as u64;
                    cell.1 += 1;
                }
            }
        }
    }
    for phase in counts {
        for (state, expected_stay) in [(0, 1.0 - birth), (1, 1.0 - death)] {
            let (stay, total) = phase[state];
            let p = stay as f64 / total as f64;
            let sd = (expected_stay * (1.0 - expected_stay) / total as f64).sqrt();
            assert!(
                (p - expected_stay).abs() < 4.0 * sd,
                "state {state}: {p} vs {expected_stay}"
            );
        }
    }
}

#[test]
fn map_error_falls_as_equations_accumulate() {
    let f = FieldSpec::prime(2).unwrap();
    let src = JointSource::dsbs(&[Some(0.05)]).unwrap();
    let l = 8;
    let trials = 300;
    let mut rng = stream(11, Domain::Trial, 0);
    let code0 = BinningCode::for_source(f.clone(), &src, 0, l, 1, 0.5, 0).unwrap();
    let h = code0.block_count();
    let mut errors = vec![0u32; h + 1];
    for trial in 0..trials {
        let code = BinningCode::for_source(f.clone(), &src, 0, l, 1, 0.5, trial).unwrap();
        let batch = src.sample_iid(l, &mut rng);
        let blocks = code.blocks(&batch.x[0]).unwrap();
        // nested equation sets: the first j unit equations
        for (j, err) in errors.iter_mut().enumerate() {
            let eqs: Vec<Equation> = (0..j)
                .map(|i| Equation {
                    coeffs: FVector::unit(h, i).0,
                    payload: blocks[i].clone(),
                })
                .collect();
            let out = oracle_decode(&code, &eqs, Some(&batch.y[0]), &src, 0).unwrap();
            *err += (out != OracleOutcome::Decoded(batch.x[0].clone())) as u32;
        }
    }
    assert!(errors.windows(2).all(|w| w[1] <= w[0]), "{errors:?}");
    assert!((errors[h] as f64) < 0.1 * trials as f64, "{errors:?}");
}

fn dsbs_experiment(cross: Vec<Option<f64>>) -> Experiment {
    let n = cross.len();
    let source = JointSource::dsbs(&cross).unwrap();
    Experiment::new(ExperimentSpec {
        field: FieldSpec::prime(2).unwrap(),
        model: ModelSpec::random_phone_call(n, GossipMode::Exchange, 0),
        messages: MessageSetup::Binned {
            source,
            l: 100,
            s_bits: 10,
            delta: 0.1,
        },
        placement: vec![vec![0]],
        stop: StopRule::AllNodes,
        max_rounds: 500,
        trials: 200,
        seed: 8,
        trace_nodes: vec![],
    })
    .unwrap()
}

#[test]
fn better_side_information_decodes_no_later() {
    let n = 16;
    let mixed: Vec<_> = (0..n)
        .map(|v| match v {
            0 => None,
            v if v % 2 == 0 => Some(0.02),
            _ => Some(0.3),
        })
        .collect();
    let upgraded: Vec<_> = (0..n).map(|v| (v > 0).then_some(0.02)).collect();
    let a = dsbs_experiment(mixed);
    let b = dsbs_experiment(upgraded);
    assert!(a.thresholds()[2] < a.thresholds()[1]);
    assert_eq!(a.header_dim(), b.header_dim());

    let ra = a.run_all().unwrap();
    let rb = b.run_all().unwrap();
    let (mut good, mut poor) = (Vec::new(), Vec::new());
    for (x, y) in ra.iter().zip(&rb) {
        for v in 1..n {
            // identical edges and coefficients, so only the bar moved
            assert!(y.decode_round[v].unwrap() <= x.decode_round[v].unwrap());
            if v % 2 == 0 {
                good.push(x.decode_round[v].unwrap());
            } else {
                poor.push(x.decode_round[v].unwrap());
            }
        }
    }
    good.sort_unstable();
    poor.sort_unstable();
    assert!(good[good.len() / 2] < poor[poor.len() / 2]);
}
