use divnet_core::autodiff::{grad_check, Axis};
use divnet_core::ensemble::treenet_loss;
use divnet_core::losses::{assignment_trace, loss_div, loss_matrix};
use divnet_core::model::Parameter;
use divnet_core::{
    Activation, ControlSet, ControlValue, Graph, Model, ModelConfig, NodeId, PairLoss, Tensor,
    TreenetModel,
};
use proptest::prelude::*;

fn mat(rows: usize, cols: usize, v: &[f64]) -> Tensor {
    Tensor::matrix(rows, cols, v[..rows * cols].to_vec()).unwrap()
}

fn vals(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5f64..1.5, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dense_chain_matches_finite_differences(x in vals(6), w in vals(6), b in vals(2), c in vals(3), t in vals(6)) {
        let x = mat(3, 2, &x);
        let c = mat(3, 1, &c);
        let target = mat(3, 2, &t);
        let r = grad_check(
            |g: &mut Graph, p: &[NodeId]| {
                let cn = g.constant(c.clone());
                let h = g.concat_features(p[0], cn)?;
                let z = g.matmul(h, p[1])?;
                let z = g.add_bias(z, p[2])?;
                let a = g.activation(z, Activation::Tanh);
                let s = g.activation(a, Activation::Sigmoid);
                g.sq_error(s, &target)
            },
            &[x, mat(3, 2, &w), Tensor::vector(b)],
            1e-5,
            1e-4,
        )
        .unwrap();
        prop_assert!(r.passed(), "{:?}", r);
    }

    #[test]
    fn pairwise_and_reductions_match_finite_differences(p in vals(8), y in vals(6), scale in 0.1f64..3.0) {
        let labels = mat(3, 2, &y);
        let preds = mat(4, 2, &p);
        let r = grad_check(
            |g: &mut Graph, ps: &[NodeId]| {
                let rows = g.gather_rows(ps[0], &[3, 0, 1, 2])?;
                let m = g.pairwise_sq_error(rows, &labels)?;
                let s = g.sum(m);
                let mean = g.mean(m);
                let mean = g.scale(mean, scale);
                g.add_n(&[s, mean])
            },
            &[preds],
            1e-5,
            1e-4,
        )
        .unwrap();
        prop_assert!(r.passed(), "{:?}", r);
    }

    #[test]
    fn select_min_value_and_routing(v in prop::collection::vec(-10.0f64..10.0, 1..8)) {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = v.iter().map(|&x| g.param(Tensor::scalar(x))).collect();
        let (m, idx) = g.select_min(&ids).unwrap();
        let plain = v.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(g.value(m).item(), plain);
        prop_assert_eq!(idx, v.iter().position(|&x| x == plain).unwrap());
        let (mm, _) = g.select_min(&[m]).unwrap();
        prop_assert_eq!(g.value(mm).item(), plain);
        g.backward(mm).unwrap();
        let nonzero = ids.iter().filter(|&&i| g.grad(i).is_some_and(|t| t.item() != 0.0)).count();
        prop_assert_eq!(nonzero, 1);
    }

    #[test]
    fn select_max_routes_to_one_input(v in prop::collection::vec(-10.0f64..10.0, 1..8)) {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = v.iter().map(|&x| g.param(Tensor::scalar(x))).collect();
        let (m, idx) = g.select_max(&ids).unwrap();
        g.backward(m).unwrap();
        for (i, &id) in ids.iter().enumerate() {
            let gv = g.grad(id).map_or(0.0, |t| t.item());
            prop_assert_eq!(gv != 0.0, i == idx);
        }
    }

    #[test]
    fn backward_leaves_finite_gradients(x in vals(8), seed in 0u64..1000) {
        let model = Model::init(ModelConfig::new(2, 1, &[4, 3], &[3], 3).with_seed(seed)).unwrap();
        let mut g = Graph::new();
        let ps = model.insert_params(&mut g, true);
        let xn = g.constant(mat(4, 2, &x));
        let c = Tensor::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]).unwrap();
        let out = model.build_forward(&mut g, &ps, xn, &c).unwrap();
        let m = g.min_axis(out, Axis::Rows).unwrap();
        let root = g.sum(m);
        g.backward(root).unwrap();
        for &p in &ps {
            let gr = g.grad(p).unwrap();
            prop_assert!(gr.is_finite());
            prop_assert_eq!(gr.shape(), g.value(p).shape());
        }
    }

    #[test]
    fn forward_is_pure(x in vals(6), c in 0usize..3, seed in 0u64..1000) {
        let model = Model::init(ModelConfig::new(2, 2, &[5, 3], &[4], 3).with_seed(seed)).unwrap();
        let x = mat(3, 2, &x);
        let a = model.forward(&ControlValue::Discrete(c), &x).unwrap();
        let b = model.forward(&ControlValue::Discrete(c), &x).unwrap();
        prop_assert_eq!(a.data(), b.data());
    }

    #[test]
    fn output_depends_on_control(x in vals(2), seed in 0u64..1000) {
        let model = Model::init(ModelConfig::new(2, 2, &[5, 3], &[4], 3).with_seed(seed)).unwrap();
        let x = mat(1, 2, &x);
        let h = 1e-5;
        let mut found = false;
        for k in 0..3 {
            let mut plus = vec![1.0, 0.0, 0.0];
            let mut minus = plus.clone();
            plus[k] += h;
            minus[k] -= h;
            let fp = model.forward_rows(&x, &mat(1, 3, &plus)).unwrap();
            let fm = model.forward_rows(&x, &mat(1, 3, &minus)).unwrap();
            found |= fp.data().iter().zip(fm.data()).any(|(a, b)| ((a - b) / (2.0 * h)).abs() > 1e-8);
        }
        prop_assert!(found);
    }

    #[test]
    fn parameter_rebuild_preserves_forward(x in vals(8), seed in 0u64..1000) {
        let model = Model::init(ModelConfig::new(2, 3, &[4], &[4], 2).with_seed(seed)).unwrap();
        let copy = Model::from_parameters(model.config().clone(), model.parameters().to_vec()).unwrap();
        let x = mat(4, 2, &x);
        let a = model.forward_all_controls(&ControlSet::Discrete(2), &x).unwrap();
        let b = copy.forward_all_controls(&ControlSet::Discrete(2), &x).unwrap();
        prop_assert_eq!(a.data(), b.data());
    }

    #[test]
    fn treenet_loss_without_stabilizer_is_diverse_loss(p in vals(8), y in vals(6)) {
        let mut g = Graph::new();
        let pn = g.param(mat(4, 2, &p));
        let labels = mat(3, 2, &y);
        let t = treenet_loss(&mut g, pn, &labels, 0.0).unwrap();
        let m = loss_matrix(&mut g, pn, &labels, PairLoss::SquaredError).unwrap();
        let d = loss_div(&mut g, &m).unwrap();
        prop_assert_eq!(g.value(t).item(), g.value(d).item());
    }

    #[test]
    fn treenet_gradient_reaches_only_winning_members(x in vals(2), y in vals(6), seed in 0u64..1000) {
        let model = TreenetModel::init(ModelConfig::new(2, 2, &[6, 4], &[4], 1).with_seed(seed), 4).unwrap();
        let labels = mat(3, 2, &y);
        let mut g = Graph::new();
        let ps = model.insert_params(&mut g, true);
        let xn = g.constant(mat(1, 2, &x));
        let preds = model.build_forward(&mut g, &ps, xn).unwrap();
        let m = loss_matrix(&mut g, preds, &labels, PairLoss::SquaredError).unwrap();
        let winners = assignment_trace(m.values(&g)).unwrap().column_matches;
        let root = treenet_loss(&mut g, preds, &labels, 0.0).unwrap();
        g.backward(root).unwrap();
        let n_shared = model.shared().len();
        let per = model.members()[0].len();
        for j in 0..4 {
            let touched = ps[n_shared + j * per..n_shared + (j + 1) * per]
                .iter()
                .any(|&p| g.grad(p).is_some_and(|t| t.data().iter().any(|&v| v != 0.0)));
            if !winners.contains(&j) {
                prop_assert!(!touched, "member {} not a winner but has gradient", j);
            }
        }
    }
}

#[test]
fn initialization_is_seeded() {
    let cfg = ModelConfig::new(4, 4, &[4, 8], &[8, 4], 2);
    let a = Model::init(cfg.clone().with_seed(3)).unwrap();
    let b = Model::init(cfg.clone().with_seed(3)).unwrap();
    let c = Model::init(cfg.with_seed(4)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.parameters(), c.parameters());
}

#[test]
fn parameter_count_matches_hand_count() {
    // 4→4, 4→8, (8+2)→8, 8→4, 4→4
    let m = Model::init(ModelConfig::new(4, 4, &[4, 8], &[8, 4], 2)).unwrap();
    let expected = (4 * 4 + 4) + (4 * 8 + 8) + (10 * 8 + 8) + (8 * 4 + 4) + (4 * 4 + 4);
    assert_eq!(m.parameter_count(), expected);
}

#[test]
fn treenet_member_with_zero_head_outputs_its_bias() {
    let mut model = TreenetModel::init(ModelConfig::new(2, 2, &[4, 3], &[3], 1), 3).unwrap();
    let head = &mut model.members_mut()[1];
    let n = head.len();
    for p in head.iter_mut() {
        p.value = Tensor::zeros(p.value.shape());
    }
    head[n - 1] = Parameter {
        name: head[n - 1].name.clone(),
        value: Tensor::vector(vec![0.25, -0.5]),
    };
    let out = model.forward(&mat(2, 2, &[0.1, 0.2, 0.3, 0.4])).unwrap();
    assert_eq!(&out.data()[4..8], &[0.25, -0.5, 0.25, -0.5]);
}
