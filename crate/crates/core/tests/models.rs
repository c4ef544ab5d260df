mod common;

use common::{records, seq, table, tiny_dims};
use transnets_core::corpus::TokenSequence;
use transnets_core::fm::fm_forward;
use transnets_core::models::{
    cnn_text_process, mf_predict, transform, Architecture, Model, ModelDims, ModelKind, PairInput, Regime,
};
use transnets_core::nn::{fc_forward, Activation, Tape, Tensor};

fn concat(parts: &[&Tensor]) -> Vec<f64> {
    parts.iter().flat_map(|t| t.data().to_vec()).collect()
}

fn zero_param(model: &mut Model, name: &str) {
    let id = model.store.find(name).unwrap();
    model.store.get_mut(id).value.fill(0.0);
}

#[test]
fn deepconn_matches_manual_composition() {
    let dims = tiny_dims();
    let model = Model::new(ModelKind::DeepConn, dims, &records(), 3).unwrap();
    let Architecture::DeepConn(net) = &model.arch else {
        panic!()
    };
    let t = table(1, dims.embed_dim);
    let (a, b) = (seq(10, dims.seq_len), seq(11, dims.seq_len));
    let x = cnn_text_process(&a, &net.user.params(&model.store), &t).unwrap();
    let y = cnn_text_process(&b, &net.item.params(&model.store), &t).unwrap();
    let expected = fm_forward(&concat(&[&x, &y]), &net.fm.params(&model.store)).unwrap();
    let input = PairInput {
        user_id: "u1",
        item_id: "i1",
        text_a: &a,
        text_b: &b,
    };
    let got = model.predict(&t, &input).unwrap();
    assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    assert_eq!(net.fm.input_dim(&model.store), 2 * dims.latent);
}

#[test]
fn transnet_source_matches_manual_composition() {
    let dims = tiny_dims();
    let model = Model::new(ModelKind::TransNet, dims, &records(), 4).unwrap();
    let Architecture::TransNet(net) = &model.arch else {
        panic!()
    };
    let t = table(2, dims.embed_dim);
    let (a, b) = (seq(20, dims.seq_len), seq(21, dims.seq_len));
    let x = cnn_text_process(&a, &net.source.user.params(&model.store), &t).unwrap();
    let y = cnn_text_process(&b, &net.source.item.params(&model.store), &t).unwrap();
    let z0 = Tensor::vector(concat(&[&x, &y]));
    let z_l = transform(&z0, &net.source.transform.params(&model.store)).unwrap();
    let expected = fm_forward(z_l.data(), &net.fm_s.params(&model.store)).unwrap();
    let got = model
        .predict(
            &t,
            &PairInput {
                user_id: "u1",
                item_id: "i1",
                text_a: &a,
                text_b: &b,
            },
        )
        .unwrap();
    assert!((got - expected).abs() < 1e-12);

    // eval mode: z_bar_L is z_L itself
    let mut tape = Tape::new(&model.store);
    let out = net.source.forward(&mut tape, &t, &a, &b, &mut Regime::Eval).unwrap();
    assert_eq!(tape.value(out.z_bar), &z_l);
    assert_eq!(tape.value(out.z_l).len(), dims.latent);
    assert_eq!(net.fm_s.input_dim(&model.store), dims.latent);
}

#[test]
fn target_eval_mode_has_no_dropout() {
    let dims = tiny_dims();
    let model = Model::new(ModelKind::TransNet, dims, &records(), 5).unwrap();
    let Architecture::TransNet(net) = &model.arch else {
        panic!()
    };
    let t = table(3, dims.embed_dim);
    let rev = seq(30, dims.seq_len);
    let mut tape = Tape::new(&model.store);
    let out = net.target.forward(&mut tape, &t, &rev, &mut Regime::Eval).unwrap();
    let x = cnn_text_process(&rev, &net.target.cnn.params(&model.store), &t).unwrap();
    assert_eq!(tape.value(out.x_t), &x);
    assert_eq!(x.len(), dims.latent);
    let r = fm_forward(x.data(), &net.target.fm.params(&model.store)).unwrap();
    assert_eq!(tape.scalar(out.r_hat), r);
}

#[test]
fn zero_target_weights_give_a_constant_encoding() {
    let dims = tiny_dims();
    let mut model = Model::new(ModelKind::TransNet, dims, &records(), 6).unwrap();
    zero_param(&mut model, "gamma_t.weight");
    let Architecture::TransNet(net) = &model.arch else {
        panic!()
    };
    let t = table(4, dims.embed_dim);
    let enc = |s: &TokenSequence| cnn_text_process(s, &net.target.cnn.params(&model.store), &t).unwrap();
    let first = enc(&seq(40, dims.seq_len));
    for k in 41..46 {
        assert_eq!(enc(&seq(k, dims.seq_len)), first);
    }
    let tanh_bias: Vec<f64> = vec![0.1f64.tanh(); dims.latent];
    assert_eq!(first.data(), tanh_bias.as_slice());
}

#[test]
fn all_pad_input_is_the_bias_path() {
    let dims = tiny_dims();
    let model = Model::new(ModelKind::DeepConn, dims, &records(), 7).unwrap();
    let Architecture::DeepConn(net) = &model.arch else {
        panic!()
    };
    let t = table(5, dims.embed_dim);
    let p = net.user.params(&model.store);
    let got = cnn_text_process(&TokenSequence::padding(dims.seq_len), &p, &t).unwrap();
    // every window sees zero embeddings, so the max over positions is tanh(b)
    let pooled = Tensor::vector(p.conv_bias.data().iter().map(|b| b.tanh()).collect());
    let expected = fc_forward(&pooled, &p.weight, &p.bias, Activation::Tanh).unwrap();
    assert_eq!(got, expected);
}

#[test]
fn zero_cnn_weights_make_deepconn_input_constant() {
    let dims = tiny_dims();
    let mut model = Model::new(ModelKind::DeepConn, dims, &records(), 8).unwrap();
    for name in ["gamma_a.weight", "gamma_b.weight"] {
        zero_param(&mut model, name);
    }
    let t = table(6, dims.embed_dim);
    let predict = |a: u64, b: u64| {
        let (sa, sb) = (seq(a, dims.seq_len), seq(b, dims.seq_len));
        model
            .predict(
                &t,
                &PairInput {
                    user_id: "u1",
                    item_id: "i1",
                    text_a: &sa,
                    text_b: &sb,
                },
            )
            .unwrap()
    };
    let Architecture::DeepConn(net) = &model.arch else {
        panic!()
    };
    let constant = vec![0.1f64.tanh(); 2 * dims.latent];
    let expected = fm_forward(&constant, &net.fm.params(&model.store)).unwrap();
    assert_eq!(predict(1, 2), expected);
    assert_eq!(predict(3, 4), expected);
}

#[test]
fn transform_widths_and_degenerate_cases() {
    for layers in 1..=4 {
        let dims = ModelDims { layers, ..tiny_dims() };
        let mut model = Model::new(ModelKind::TransNet, dims, &records(), 9).unwrap();
        let z0 = Tensor::vector((0..2 * dims.latent).map(|i| i as f64 * 0.3 - 0.5).collect());
        let Architecture::TransNet(net) = &model.arch else {
            panic!()
        };
        let params = net.source.transform.params(&model.store);
        assert_eq!(params.layers.len(), layers);
        assert_eq!(params.layers[0].0.shape(), &[2 * dims.latent, dims.latent]);
        assert_eq!(transform(&z0, &params).unwrap().len(), dims.latent);
        if layers == 1 {
            let (g, b) = &params.layers[0];
            let mut manual = vec![0.0; dims.latent];
            for (j, out) in manual.iter_mut().enumerate() {
                let s: f64 = (0..2 * dims.latent).map(|i| z0.data()[i] * g.at2(i, j)).sum();
                *out = (s + b.data()[j]).tanh();
            }
            let got = transform(&z0, &params).unwrap();
            for (a, e) in got.data().iter().zip(&manual) {
                assert!((a - e).abs() < 1e-14);
            }
        }
        for l in 0..layers {
            zero_param(&mut model, &format!("transform.{l}.weight"));
        }
        let Architecture::TransNet(net) = &model.arch else {
            panic!()
        };
        let params = net.source.transform.params(&model.store);
        let out = transform(&z0, &params).unwrap();
        assert!(out.data().iter().all(|v| *v == 0.1f64.tanh()));
    }
    assert!(Model::new(
        ModelKind::TransNet,
        ModelDims {
            layers: 0,
            ..tiny_dims()
        },
        &records(),
        0
    )
    .is_err());
}

#[test]
fn full_size_default_widths() {
    let d = ModelDims::default();
    assert_eq!((d.latent, d.layers), (50, 2));
    let recs = records();
    let model = Model::new(
        ModelKind::TransNetExt,
        ModelDims {
            seq_len: 8,
            embed_dim: 4,
            ..d
        },
        &recs,
        0,
    )
    .unwrap();
    let Architecture::TransNetExt(ext) = &model.arch else {
        panic!()
    };
    assert_eq!(ext.fm_se.input_dim(&model.store), 150);
    assert_eq!(model.store.value(ext.omega_users).shape(), &[2, 50]);
    assert_eq!(model.store.value(ext.omega_items).shape(), &[2, 50]);
    let dc = Model::new(
        ModelKind::DeepConn,
        ModelDims {
            seq_len: 8,
            embed_dim: 4,
            ..d
        },
        &recs,
        0,
    )
    .unwrap();
    let Architecture::DeepConn(net) = &dc.arch else {
        panic!()
    };
    assert_eq!(net.fm.input_dim(&dc.store), 100);
}

#[test]
fn text_processors_have_disjoint_parameters() {
    let model = Model::new(ModelKind::TransNet, tiny_dims(), &records(), 10).unwrap();
    let Architecture::TransNet(net) = &model.arch else {
        panic!()
    };
    let a = net.source.user.ids();
    let b = net.source.item.ids();
    let t = net.target.cnn.ids();
    for id in &a {
        assert!(!b.contains(id) && !t.contains(id));
    }
    for id in &b {
        assert!(!t.contains(id));
    }
    let groups = model.param_groups();
    let total: usize = groups.iter().map(|(_, g)| g.len()).sum();
    assert_eq!(total, model.store.len());
    let mut all: Vec<_> = groups.iter().flat_map(|(_, g)| g.clone()).collect();
    all.sort();
    all.dedup();
    assert_eq!(all.len(), model.store.len());
}

#[test]
fn ext_unseen_ids_get_a_stable_random_vector() {
    let dims = tiny_dims();
    let model = Model::new(ModelKind::TransNetExt, dims, &records(), 11).unwrap();
    let Architecture::TransNetExt(ext) = &model.arch else {
        panic!()
    };
    let v1 = ext.unseen_vector(&model.store, true, "stranger");
    let v2 = ext.unseen_vector(&model.store, true, "stranger");
    assert_eq!(v1, v2);
    assert_eq!(v1.len(), dims.latent);
    assert!(v1.data().iter().all(|x| (-1.0..1.0).contains(x)));
    assert_ne!(v1, ext.unseen_vector(&model.store, true, "other"));
    assert_ne!(v1, ext.unseen_vector(&model.store, false, "stranger"));

    let t = table(7, dims.embed_dim);
    let (a, b) = (seq(70, dims.seq_len), seq(71, dims.seq_len));
    let z_l = {
        let mut tape = Tape::new(&model.store);
        let s = ext.source.forward(&mut tape, &t, &a, &b, &mut Regime::Eval).unwrap();
        tape.value(s.z_l).clone()
    };
    let item_row = ext.items.row("i1").unwrap();
    let mut z = v1.data().to_vec();
    z.extend_from_slice(model.store.value(ext.omega_items).row(item_row));
    z.extend_from_slice(z_l.data());
    let expected = fm_forward(&z, &ext.fm_se.params(&model.store)).unwrap();
    let input = PairInput {
        user_id: "stranger",
        item_id: "i1",
        text_a: &a,
        text_b: &b,
    };
    assert_eq!(model.predict(&t, &input).unwrap(), expected);
    assert_eq!(model.predict(&t, &input).unwrap(), expected);
}

#[test]
fn ext_zero_embeddings_reduce_to_the_source_head() {
    let dims = tiny_dims();
    let mut model = Model::new(ModelKind::TransNetExt, dims, &records(), 12).unwrap();
    zero_param(&mut model, "omega_a");
    zero_param(&mut model, "omega_b");
    let Architecture::TransNetExt(ext) = &model.arch else {
        panic!()
    };
    let t = table(8, dims.embed_dim);
    let (a, b) = (seq(80, dims.seq_len), seq(81, dims.seq_len));
    let mut tape = Tape::new(&model.store);
    let s = ext.source.forward(&mut tape, &t, &a, &b, &mut Regime::Eval).unwrap();
    let mut z = vec![0.0; 2 * dims.latent];
    z.extend_from_slice(tape.value(s.z_l).data());
    let expected = fm_forward(&z, &ext.fm_se.params(&model.store)).unwrap();
    let got = model
        .predict(
            &t,
            &PairInput {
                user_id: "u2",
                item_id: "i2",
                text_a: &a,
                text_b: &b,
            },
        )
        .unwrap();
    assert_eq!(got, expected);
}

#[test]
fn mf_matches_the_formula() {
    let dims = ModelDims {
        latent: 4,
        ..tiny_dims()
    };
    let model = Model::new(ModelKind::Mf, dims, &records(), 13).unwrap();
    let Architecture::Mf(mf) = &model.arch else { panic!() };
    let p = mf.params(&model.store);
    assert!((p.mean - 11.0 / 3.0).abs() < 1e-15);
    let t = table(9, 4);
    let pad = TokenSequence::padding(8);
    for (u, i) in [("u1", "i1"), ("u2", "i2"), ("u2", "i1")] {
        let (ur, ir) = (p.users.row(u).unwrap(), p.items.row(i).unwrap());
        let dot: f64 = p
            .user_factors
            .row(ur)
            .iter()
            .zip(p.item_factors.row(ir))
            .map(|(a, b)| a * b)
            .sum();
        let expected = p.mean + p.user_bias.row(ur)[0] + p.item_bias.row(ir)[0] + dot;
        assert!((mf_predict(u, i, &p) - expected).abs() < 1e-15);
        let got = model
            .predict(
                &t,
                &PairInput {
                    user_id: u,
                    item_id: i,
                    text_a: &pad,
                    text_b: &pad,
                },
            )
            .unwrap();
        assert!((got - expected).abs() < 1e-15);
    }
    assert_eq!(mf_predict("nobody", "nothing", &p), p.mean);
}

#[test]
fn mf_with_only_a_mean_predicts_the_mean() {
    let mut model = Model::new(ModelKind::Mf, tiny_dims(), &records(), 14).unwrap();
    for name in ["mf.user_bias", "mf.item_bias", "mf.user_factors", "mf.item_factors"] {
        zero_param(&mut model, name);
    }
    let Architecture::Mf(mf) = &model.arch else { panic!() };
    let p = mf.params(&model.store);
    assert_eq!(mf_predict("u1", "i2", &p), p.mean);
}

#[test]
fn eval_predictions_are_pure() {
    let dims = tiny_dims();
    let t = table(10, dims.embed_dim);
    let (a, b) = (seq(90, dims.seq_len), seq(91, dims.seq_len));
    for kind in ModelKind::ALL {
        let model = Model::new(kind, dims, &records(), 15).unwrap();
        let input = PairInput {
            user_id: "u1",
            item_id: "i2",
            text_a: &a,
            text_b: &b,
        };
        let first = model.predict(&t, &input).unwrap();
        assert_eq!(first.to_bits(), model.predict(&t, &input).unwrap().to_bits(), "{kind}");
    }
}

#[test]
fn from_store_rebinds_the_same_model() {
    let dims = tiny_dims();
    for kind in ModelKind::ALL {
        let model = Model::new(kind, dims, &records(), 16).unwrap();
        let (users, items) = match model.id_spaces() {
            Some((u, i)) => (u.clone(), i.clone()),
            None => Default::default(),
        };
        let again = Model::from_store(kind, dims, model.store.clone(), users, items, 16).unwrap();
        assert_eq!(again, model, "{kind}");
    }
}
