use approx::assert_abs_diff_eq;
use cama_core::autodiff::gradcheck::GradCheckConfig;
use cama_core::autodiff::Tape;
use cama_core::gnn::{
    check_model_gradients, evaluate, forward, forward_on_tape, load_checkpoint, logits, predict, save_checkpoint,
    train, Arch, BatchInput, ModelParams, Propagation, Readout, TrainConfig,
};
use cama_core::graph::Graph;
use ndarray::{array, Array2};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn six_node_graph() -> Graph<f64> {
    let edges = vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (0, 3)];
    let x = array![
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [1.0, 0.0, 0.0]
    ];
    Graph::new(0, 6, edges, x, 1).unwrap()
}

fn random_graph(id: usize, n: usize, p: f64, dim: usize, rng: &mut ChaCha8Rng) -> Graph<f64> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    let x = Array2::from_shape_fn((n, dim), |_| rng.random_range(-1.0..1.0));
    Graph::new(id, n, edges, x, 0).unwrap()
}

#[test]
fn loss_gradients_match_finite_differences() {
    let g = six_node_graph();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // a strictly relaxed adjacency exercises the renormalisation gradient
    let relaxed = g.adjacency().mapv(|a| if a > 0.0 { 0.9 } else { rng.random_range(0.05..0.3) });
    for arch in [Arch::Gcn, Arch::Gin0] {
        let params = ModelParams::<f64>::init(arch, 3, 8, 5, 2, 4);
        for adjacency in [g.adjacency(), relaxed.clone()] {
            let report =
                check_model_gradients(&params, &g.features, &adjacency, 1, GradCheckConfig::default()).unwrap();
            assert!(report.passed(), "{arch}: {:?}", report.inputs);
            assert_eq!(report.inputs.len(), 2 + params.tensors().len());
        }
    }
}

#[test]
fn two_node_gcn_by_hand() {
    // Â = [[.5,.5],[.5,.5]], x = [1,2] → Âx = [1.5,1.5] → pooled 3
    let g = Graph::new(0, 2, vec![(0, 1)], array![[1.0], [2.0]], 0).unwrap();
    let mut p = ModelParams::<f64>::init(Arch::Gcn, 1, 1, 1, 2, 0);
    p.layers[0].weights[0] = array![[1.0]];
    p.out_weight = array![[2.0], [-1.0]];
    p.out_bias = array![[0.5, 0.0]];
    let z = logits(&p, &g).unwrap();
    assert_abs_diff_eq!(z[0], 6.5, epsilon = 1e-12);
    assert_abs_diff_eq!(z[1], -3.0, epsilon = 1e-12);
    assert_eq!(predict(&p, &g).unwrap(), 0);
}

#[test]
fn two_node_gin_by_hand() {
    // (A+I)x = [3,3] → relu(3·1 − 1) = 2 → relu(2·0.5) = 1 → pooled 2
    let g = Graph::new(0, 2, vec![(0, 1)], array![[1.0], [2.0]], 0).unwrap();
    let mut p = ModelParams::<f64>::init(Arch::Gin0, 1, 1, 1, 2, 0);
    p.layers[0].weights = vec![array![[1.0]], array![[0.5]]];
    p.layers[0].biases = vec![array![[-1.0]], array![[0.0]]];
    p.out_weight = array![[1.0], [3.0]];
    p.out_bias = array![[0.0, -4.0]];
    let z = logits(&p, &g).unwrap();
    assert_abs_diff_eq!(z[0], 2.0, epsilon = 1e-12);
    assert_abs_diff_eq!(z[1], 2.0, epsilon = 1e-12);
    // tie goes to the smaller class
    assert_eq!(predict(&p, &g).unwrap(), 0);
}

#[test]
fn isolated_nodes_only_see_themselves() {
    // with no edges Â = I, so h = relu(xΘ) and the embedding is a plain sum
    let x = array![[1.0, -2.0], [0.5, 3.0], [-1.0, -1.0]];
    let g = Graph::new(0, 3, Vec::<(usize, usize)>::new(), x.clone(), 0).unwrap();
    let mut p = ModelParams::<f64>::init(Arch::Gcn, 2, 2, 1, 2, 0);
    p.layers[0].weights[0] = array![[1.0, 0.0], [0.0, 1.0]];
    let trace = forward(&p, &g).unwrap();
    assert_eq!(trace.last_hidden(), &x.mapv(|v: f64| v.max(0.0)));
    assert_eq!(trace.graph_embedding(), vec![1.5, 3.0]);
}

#[test]
fn zero_weights_give_the_bias() {
    let g = six_node_graph();
    for arch in [Arch::Gcn, Arch::Gin0] {
        let mut p = ModelParams::<f64>::init(arch, 3, 8, 5, 3, 1);
        for t in p.tensors_mut() {
            t.fill(0.0);
        }
        p.out_bias = array![[0.25, -1.0, 2.0]];
        assert_eq!(logits(&p, &g).unwrap(), vec![0.25, -1.0, 2.0]);
    }
}

#[test]
fn forward_and_logits_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for arch in [Arch::Gcn, Arch::Gin0] {
        let p = ModelParams::<f64>::init(arch, 4, 16, 5, 2, 9);
        for id in 0..10 {
            let g = random_graph(id, 12, 0.25, 4, &mut rng);
            let trace = forward(&p, &g).unwrap();
            assert_eq!(trace.logits(), logits(&p, &g).unwrap());
            assert_eq!(trace.out.hidden.len(), 5);
            assert_eq!(trace.hidden(2).dim(), (12, 16));
        }
    }
}

#[test]
fn batched_logits_match_single_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let graphs: Vec<Graph<f64>> = (0..7).map(|id| random_graph(id, 3 + id, 0.4, 3, &mut rng)).collect();
    let refs: Vec<&Graph<f64>> = graphs.iter().collect();
    for arch in [Arch::Gcn, Arch::Gin0] {
        let p = ModelParams::<f64>::init(arch, 3, 8, 5, 2, 2);
        let batch = BatchInput::new(arch, &refs).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(batch.features.clone());
        let out = forward_on_tape(
            &p,
            &mut tape,
            x,
            &Propagation::Sparse(batch.propagation.clone()),
            &Readout::Segments(batch.offsets.clone()),
            false,
        )
        .unwrap();
        let z = tape.value(out.logits);
        assert_eq!(z.nrows(), 7);
        for (k, g) in graphs.iter().enumerate() {
            for (a, b) in z.row(k).iter().zip(logits(&p, g).unwrap()) {
                assert_abs_diff_eq!(*a, b, epsilon = 1e-10);
            }
        }
    }
}

#[test]
fn rejects_wrong_feature_width() {
    let g = six_node_graph();
    let p = ModelParams::<f64>::init(Arch::Gcn, 4, 8, 2, 2, 0);
    assert!(logits(&p, &g).is_err());
    assert!(evaluate(&p, &[]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn logits_are_permutation_invariant(seed in any::<u64>(), n in 2usize..14, gin in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(0, n, 0.3, 3, &mut rng);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let arch = if gin { Arch::Gin0 } else { Arch::Gcn };
        let p = ModelParams::<f64>::init(arch, 3, 8, 5, 2, seed);
        let a = logits(&p, &g).unwrap();
        let b = logits(&p, &g.permuted(&perm).unwrap()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }
}

fn toy_dataset() -> Vec<Graph<f64>> {
    // class 0: short paths, class 1: larger cliques; one constant feature
    let mut graphs = Vec::new();
    for k in 0..20 {
        let n = if k % 2 == 0 { 3 + k % 3 } else { 6 + k % 3 };
        let x = Array2::ones((n, 1));
        if k % 2 == 0 {
            let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
            graphs.push(Graph::new(k, n, edges, x, 0).unwrap());
        } else {
            let edges: Vec<_> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
            graphs.push(Graph::new(k, n, edges, x, 1).unwrap());
        }
    }
    graphs
}

#[test]
fn training_fits_a_separable_toy_set() {
    let data = toy_dataset();
    let refs: Vec<&Graph<f64>> = data.iter().collect();
    let config = TrainConfig { epochs: 150, lr: 0.05, hidden_dim: 16, num_layers: 2, ..Default::default() };
    for arch in [Arch::Gcn, Arch::Gin0] {
        let out = train(arch, &refs, 2, &config).unwrap();
        assert_eq!(out.losses.len(), 150);
        assert!(out.losses.last().unwrap() < &out.losses[0]);
        assert_eq!(evaluate(&out.params, &refs).unwrap(), 1.0, "{arch}");
        let again = train(arch, &refs, 2, &config).unwrap();
        assert_eq!(out.params, again.params);
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    for arch in [Arch::Gcn, Arch::Gin0] {
        let mut p = ModelParams::<f64>::init(arch, 7, 64, 5, 2, 21);
        p.out_bias = array![[1.0 / 3.0, -2.0e-300]];
        let path = dir.path().join(format!("{arch}.json"));
        save_checkpoint(&p, &path).unwrap();
        let q: ModelParams<f64> = load_checkpoint(&path).unwrap();
        assert_eq!(p, q);
        for (a, b) in p.tensors().iter().zip(q.tensors()) {
            assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"version\": 9}").unwrap();
    assert!(load_checkpoint::<f64>(&bad).is_err());
    let mut p = ModelParams::<f64>::init(Arch::Gcn, 2, 4, 1, 2, 0);
    p.out_bias[[0, 0]] = f64::NAN;
    assert!(save_checkpoint(&p, &dir.path().join("nan.json")).is_err());
}
