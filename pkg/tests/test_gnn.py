import numpy as np
import pytest

from cidetect.acfg import build_vocabulary
from cidetect.errors import (
    Diverged,
    GraphTooLarge,
    InvalidLabel,
    ShapeMismatch,
)
from cidetect.gnn import (
    ModelConfig,
    clone_params,
    config_from_json,
    config_to_json,
    embed,
    embed_prepared,
    euclidean_distance,
    grad_step,
    init_params,
    init_train_state,
    load_checkpoint,
    pair_loss,
    pair_loss_and_grads,
    prepare_graph,
    prepare_pairs,
    save_checkpoint,
    train_model,
)
from cidetect.labeling import Pattern
from cidetect.pairgen import FunctionPair

from helpers import OPCODE_POOL, diamond, random_acfg


def _tiny_config(**overrides):
    base = dict(
        feature_dim=4,
        node_state_dim=3,
        graph_embedding_dim=4,
        propagation_layers=2,
        encoder_hidden=(4,),
        update_hidden=(4,),
        output_hidden=(4,),
        seed=0,
    )
    base.update(overrides)
    return ModelConfig(**base)


def _tiny_setup(seed=0, n_graphs=8):
    rng = np.random.default_rng(seed)
    graphs = [random_acfg(rng, f"f{i}", OPCODE_POOL[:5], max_nodes=4) for i in range(n_graphs)]
    vocab = build_vocabulary(graphs, max_size=3)
    config = _tiny_config(feature_dim=vocab.feature_dim)
    return graphs, vocab, config


def _make_pair(query, target, label, rng=None):
    return FunctionPair(
        query=query,
        target=target,
        label=label,
        pattern=Pattern.LEAF,
        query_ref=("noinline", "b", query.function_name or "q"),
        target_ref=("inline", "b", target.function_name or "t"),
        bridge="br" if label == 1 else None,
    )


def test_config_validation():
    with pytest.raises(ValueError):
        _tiny_config(feature_dim=0)
    with pytest.raises(ValueError):
        _tiny_config(margin=0.0)
    with pytest.raises(ValueError):
        _tiny_config(propagation_layers=-1)
    with pytest.raises(ValueError):
        _tiny_config(batch_size=0)


def test_config_json_round_trip():
    config = _tiny_config(encoder_hidden=(8, 4))
    assert config_from_json(config_to_json(config)) == config


def test_config_layer_sizes():
    config = _tiny_config(encoder_hidden=(5,), update_hidden=(), output_hidden=(7, 6))
    assert config.encoder_sizes == [(4, 5), (5, 3)]
    assert config.update_sizes == [(9, 3)]
    assert config.output_sizes == [(4, 7), (7, 6), (6, 4)]


def test_init_params_shapes_and_bounds():
    """Every tensor matches the sizes implied by the config; weights stay
    inside the Glorot-uniform limit and biases start at zero."""
    config = _tiny_config()
    params = init_params(config)
    expected_shapes = {}
    for i, (fan_in, fan_out) in enumerate(config.encoder_sizes):
        expected_shapes[f"encoder.{i}.w"] = (fan_out, fan_in)
        expected_shapes[f"encoder.{i}.b"] = (fan_out,)
    d = config.node_state_dim
    for t in range(config.propagation_layers):
        expected_shapes[f"prop.{t}.in.w"] = (d, d)
        expected_shapes[f"prop.{t}.out.w"] = (d, d)
        for i, (fan_in, fan_out) in enumerate(config.update_sizes):
            expected_shapes[f"prop.{t}.update.{i}.w"] = (fan_out, fan_in)
            expected_shapes[f"prop.{t}.update.{i}.b"] = (fan_out,)
    e = config.graph_embedding_dim
    expected_shapes["agg.gate.w"] = (e, d)
    expected_shapes["agg.gate.b"] = (e,)
    expected_shapes["agg.proj.w"] = (e, d)
    expected_shapes["agg.proj.b"] = (e,)
    for i, (fan_in, fan_out) in enumerate(config.output_sizes):
        expected_shapes[f"agg.out.{i}.w"] = (fan_out, fan_in)
        expected_shapes[f"agg.out.{i}.b"] = (fan_out,)

    assert {k: v.shape for k, v in params.items()} == expected_shapes
    for name, tensor in params.items():
        if name.endswith(".b"):
            assert np.all(tensor == 0.0)
        else:
            fan_out, fan_in = tensor.shape if tensor.ndim == 2 else (tensor.shape[0], 1)
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            assert np.max(np.abs(tensor)) <= limit


def test_init_params_deterministic():
    config = _tiny_config(seed=5)
    a = init_params(config)
    b = init_params(config)
    for name in a:
        assert np.array_equal(a[name], b[name])
    c = init_params(_tiny_config(seed=6))
    assert any(not np.array_equal(a[name], c[name]) for name in a)


def test_prepare_graph_features_and_edges():
    graphs, vocab, config = _tiny_setup()
    graph = graphs[0]
    prep = prepare_graph(graph, vocab, config)
    assert prep.features.shape == (len(graph.nodes), vocab.feature_dim)
    index = graph.node_index
    expected = sorted((index[a], index[b]) for a, b in graph.edges)
    got = sorted(zip(prep.src.tolist(), prep.dst.tolist()))
    assert got == expected


def test_prepare_graph_limits():
    graphs, vocab, config = _tiny_setup()
    small = ModelConfig(**{**config_to_json(config), "max_nodes": 1})
    big = max(graphs, key=lambda g: len(g.nodes))
    if len(big.nodes) > 1:
        with pytest.raises(GraphTooLarge):
            prepare_graph(big, vocab, small)
    wrong_dim = _tiny_config(feature_dim=vocab.feature_dim + 3)
    with pytest.raises(ShapeMismatch):
        prepare_graph(graphs[0], vocab, wrong_dim)


def _oracle_embed(prep, params, config):
    """Independent forward pass written against the documented formulas."""
    def mlp(x, prefix, n):
        for i in range(n):
            x = x @ params[f"{prefix}.{i}.w"].T + params[f"{prefix}.{i}.b"]
            if i < n - 1:
                x = np.tanh(x)
        return x

    h = mlp(prep.features, "encoder", len(config.encoder_sizes))
    n = h.shape[0]
    for t in range(config.propagation_layers):
        sum_in = np.zeros_like(h)
        sum_out = np.zeros_like(h)
        for s, d in zip(prep.src.tolist(), prep.dst.tolist()):
            sum_in[d] += h[s]
            sum_out[s] += h[d]
        m_in = sum_in @ params[f"prop.{t}.in.w"].T
        m_out = sum_out @ params[f"prop.{t}.out.w"].T
        z = np.concatenate([h, m_in, m_out], axis=1)
        h = mlp(z, f"prop.{t}.update", len(config.update_sizes))
    gate = 1.0 / (1.0 + np.exp(-(h @ params["agg.gate.w"].T + params["agg.gate.b"])))
    proj = h @ params["agg.proj.w"].T + params["agg.proj.b"]
    pooled = (gate * proj).sum(axis=0, keepdims=True)
    return mlp(pooled, "agg.out", len(config.output_sizes))[0]


def test_embedding_matches_independent_forward():
    graphs, vocab, config = _tiny_setup()
    params = init_params(config)
    for graph in graphs:
        prep = prepare_graph(graph, vocab, config)
        got = embed_prepared(prep, params, config)
        want = _oracle_embed(prep, params, config)
        assert got.shape == (config.graph_embedding_dim,)
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)


def test_embed_convenience_wrapper():
    graphs, vocab, config = _tiny_setup()
    params = init_params(config)
    direct = embed_prepared(prepare_graph(graphs[0], vocab, config), params, config)
    np.testing.assert_array_equal(embed(graphs[0], vocab, params, config), direct)


def test_euclidean_distance():
    a = np.array([0.0, 3.0])
    b = np.array([4.0, 0.0])
    assert euclidean_distance(a, b) == 5.0
    assert euclidean_distance(a, a) == 0.0
    with pytest.raises(ShapeMismatch):
        euclidean_distance(a, np.zeros(3))


def test_pair_loss_values():
    assert pair_loss(0.5, 1, 0.1) == 0.0
    assert pair_loss(1.0, 1, 0.1) == pytest.approx(0.1, abs=0)
    assert pair_loss(0.5, -1, 0.1) == pytest.approx(0.6, abs=0)
    with pytest.raises(InvalidLabel):
        pair_loss(0.5, 0, 0.1)
    with pytest.raises(ValueError):
        pair_loss(0.5, 1, 0.0)


def _fd_check(config, graphs, vocab, label, rel_tol=1e-4, h=1e-5):
    """Central finite differences against the analytic gradients; returns the
    worst relative error or None when the sample sits on a hinge kink."""
    params = init_params(config)
    q = prepare_graph(graphs[0], vocab, config)
    t = prepare_graph(graphs[1], vocab, config)
    e1 = embed_prepared(q, params, config)
    e2 = embed_prepared(t, params, config)
    d = euclidean_distance(e1, e2)
    if abs(config.margin - label * (1.0 - d)) < 1e-6 or d < 1e-9:
        return None
    loss, grads = pair_loss_and_grads(q, t, label, params, config)
    worst = 0.0
    for name, tensor in params.items():
        flat = tensor.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            up = pair_loss(
                euclidean_distance(
                    embed_prepared(q, params, config),
                    embed_prepared(t, params, config),
                ),
                label,
                config.margin,
            )
            flat[k] = orig - h
            down = pair_loss(
                euclidean_distance(
                    embed_prepared(q, params, config),
                    embed_prepared(t, params, config),
                ),
                label,
                config.margin,
            )
            flat[k] = orig
            fd = (up - down) / (2 * h)
            an = grads[name].reshape(-1)[k]
            if abs(fd) < 1e-6 and abs(an) < 1e-6:
                # unused parameter: the difference is rounding noise
                continue
            scale = max(abs(fd), abs(an))
            worst = max(worst, abs(fd - an) / scale)
    assert worst < rel_tol, f"{worst} at label {label}"
    return worst


def test_gradients_match_finite_differences():
    graphs, vocab, config = _tiny_setup(seed=1, n_graphs=2)
    checked = 0
    for label in (1, -1):
        if _fd_check(config, graphs, vocab, label) is not None:
            checked += 1
    assert checked >= 1


def test_inactive_hinge_has_zero_gradients():
    """Once the margin is satisfied the loss is flat, so every gradient is
    exactly zero."""
    graphs, vocab, config = _tiny_setup(seed=2, n_graphs=2)
    params = init_params(config)
    q = prepare_graph(graphs[0], vocab, config)
    t = prepare_graph(graphs[1], vocab, config)
    d = euclidean_distance(
        embed_prepared(q, params, config), embed_prepared(t, params, config)
    )
    # pick the label that deactivates the hinge for this distance
    label = 1 if d < 1.0 - config.margin else -1
    if pair_loss(d, label, config.margin) == 0.0:
        loss, grads = pair_loss_and_grads(q, t, label, params, config)
        assert loss == 0.0
        assert all(np.all(g == 0.0) for g in grads.values())


def test_identical_graphs_give_finite_zero_gradients():
    graphs, vocab, config = _tiny_setup(seed=3, n_graphs=2)
    params = init_params(config)
    q = prepare_graph(graphs[0], vocab, config)
    loss, grads = pair_loss_and_grads(q, q, -1, params, config)
    # d == 0 activates the negative hinge but sits on the distance kink
    assert loss == pytest.approx(config.margin + 1.0)
    assert all(np.all(np.isfinite(g)) for g in grads.values())
    assert all(np.all(g == 0.0) for g in grads.values())


def test_grad_step_reduces_loss_on_fixed_batch():
    graphs, vocab, config = _tiny_setup(seed=4)
    pos = [_make_pair(graphs[0], graphs[1], 1), _make_pair(graphs[2], graphs[3], -1)]
    prepared = prepare_pairs(pos, vocab, config, {})
    state = init_train_state(config)
    first = None
    last = None
    for _ in range(60):
        state, loss = grad_step(prepared, state, config)
        if first is None:
            first = loss
        last = loss
    assert state.step == 60
    assert last < first


def test_grad_step_rejects_empty_batch():
    _, vocab, config = _tiny_setup()
    with pytest.raises(ValueError):
        grad_step([], init_train_state(config), config)


def test_train_model_zero_epochs_returns_init():
    graphs, vocab, config = _tiny_setup(seed=5)
    val = [_make_pair(graphs[0], graphs[1], 1), _make_pair(graphs[2], graphs[3], -1)]
    params, history = train_model([], val, vocab, config, 0, 10)
    assert history == []
    init = init_params(config)
    for name in init:
        np.testing.assert_array_equal(params[name], init[name])


def test_train_model_history_and_determinism():
    graphs, vocab, config = _tiny_setup(seed=6)
    pool = [
        _make_pair(graphs[0], graphs[1], 1),
        _make_pair(graphs[2], graphs[3], -1),
        _make_pair(graphs[4], graphs[5], 1),
        _make_pair(graphs[6], graphs[7], -1),
    ]
    val = pool[:2]
    params_a, history_a = train_model(pool, val, vocab, config, 3, 8)
    params_b, history_b = train_model(pool, val, vocab, config, 3, 8)
    assert history_a == history_b
    assert [sorted(h) for h in history_a] == [["epoch", "train_loss", "val_auc"]] * 3
    for name in params_a:
        np.testing.assert_array_equal(params_a[name], params_b[name])


def test_train_model_diverges_on_huge_learning_rate():
    """An absurd learning rate overflows float64 inside a couple of steps;
    the non-finite state must surface as Diverged, not a silent zero loss."""
    graphs, vocab, config = _tiny_setup(seed=7)
    config = ModelConfig(**{**config_to_json(config), "learning_rate": 1e200})
    pool = [
        _make_pair(graphs[0], graphs[1], 1),
        _make_pair(graphs[2], graphs[3], -1),
    ]
    with pytest.raises(Diverged):
        with np.errstate(over="ignore", invalid="ignore"):
            train_model(pool, pool, vocab, config, 20, 8)


def test_checkpoint_round_trip(tmp_path):
    graphs, vocab, config = _tiny_setup(seed=8)
    params = init_params(config)
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, params, config)
    loaded_params, loaded_config = load_checkpoint(path)
    assert loaded_config == config
    assert set(loaded_params) == set(params)
    for name in params:
        np.testing.assert_array_equal(loaded_params[name], params[name])
    manifest = (tmp_path / "model.ckpt.manifest.txt").read_text(encoding="utf-8")
    for name in params:
        assert name in manifest


def test_checkpoint_rejects_bad_magic(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_bytes(b"NOTACKPT" + b"\x00" * 32)
    with pytest.raises(ValueError):
        load_checkpoint(path)
