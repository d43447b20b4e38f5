"""Graph embedding model with exact hand-written gradients.

Embedding runs in three stages: an encoder MLP lifts bag-of-words node
features to node states, T propagation layers update each state from
directional message sums (separate in/out weights, no biases on message
weights), and a gated-sum aggregator reduces node states to one graph
embedding. Hidden activations are tanh, outputs linear, everything float64.

Training minimizes a margin loss on pair distances,
loss = max(0, margin - label * (1 - distance)), with Adam on analytic
gradients. The backward pass is written out by hand so it can be checked
against finite differences; no autograd framework is involved.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .acfg import AttributedCFG, OpcodeVocabulary, featurize_graph
from .errors import (
    Diverged,
    GraphTooLarge,
    InvalidLabel,
    NonFiniteGradient,
    ShapeMismatch,
)
from .evaluation import auc
from .pairgen import FunctionPair

ModelParams = dict[str, np.ndarray]

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8
_SHUFFLE_TAG = 104729


@dataclass(frozen=True)
class ModelConfig:
    feature_dim: int
    node_state_dim: int = 32
    graph_embedding_dim: int = 128
    propagation_layers: int = 5
    encoder_hidden: tuple[int, ...] = (64,)
    update_hidden: tuple[int, ...] = (64,)
    output_hidden: tuple[int, ...] = (128,)
    margin: float = 0.1
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_nodes: int = 2000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.feature_dim < 1 or self.node_state_dim < 1:
            raise ValueError("dimensions must be positive")
        if self.graph_embedding_dim < 1 or self.propagation_layers < 0:
            raise ValueError("bad embedding dim or layer count")
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.max_nodes < 1:
            raise ValueError("bad optimizer settings")

    @property
    def encoder_sizes(self) -> list[tuple[int, int]]:
        dims = [self.feature_dim, *self.encoder_hidden, self.node_state_dim]
        return list(zip(dims[:-1], dims[1:]))

    @property
    def update_sizes(self) -> list[tuple[int, int]]:
        dims = [3 * self.node_state_dim, *self.update_hidden, self.node_state_dim]
        return list(zip(dims[:-1], dims[1:]))

    @property
    def output_sizes(self) -> list[tuple[int, int]]:
        dims = [
            self.graph_embedding_dim,
            *self.output_hidden,
            self.graph_embedding_dim,
        ]
        return list(zip(dims[:-1], dims[1:]))


def config_to_json(config: ModelConfig) -> dict:
    payload = asdict(config)
    for key in ("encoder_hidden", "update_hidden", "output_hidden"):
        payload[key] = list(payload[key])
    return payload


def config_from_json(payload: dict) -> ModelConfig:
    kwargs = dict(payload)
    for key in ("encoder_hidden", "update_hidden", "output_hidden"):
        kwargs[key] = tuple(kwargs[key])
    return ModelConfig(**kwargs)


# ---------------------------------------------------------------------------
# Parameters

def _glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def _mlp_init(
    params: ModelParams, rng: np.random.Generator, prefix: str,
    sizes: list[tuple[int, int]],
) -> None:
    for i, (fan_in, fan_out) in enumerate(sizes):
        params[f"{prefix}.{i}.w"] = _glorot(rng, fan_out, fan_in)
        params[f"{prefix}.{i}.b"] = np.zeros(fan_out)


def init_params(config: ModelConfig) -> ModelParams:
    """Glorot-uniform weights, zero biases, deterministic in config.seed."""
    rng = np.random.default_rng(config.seed)
    params: ModelParams = {}
    _mlp_init(params, rng, "encoder", config.encoder_sizes)
    d = config.node_state_dim
    for t in range(config.propagation_layers):
        params[f"prop.{t}.in.w"] = _glorot(rng, d, d)
        params[f"prop.{t}.out.w"] = _glorot(rng, d, d)
        _mlp_init(params, rng, f"prop.{t}.update", config.update_sizes)
    e = config.graph_embedding_dim
    params["agg.gate.w"] = _glorot(rng, e, d)
    params["agg.gate.b"] = np.zeros(e)
    params["agg.proj.w"] = _glorot(rng, e, d)
    params["agg.proj.b"] = np.zeros(e)
    _mlp_init(params, rng, "agg.out", config.output_sizes)
    return params


def clone_params(params: ModelParams) -> ModelParams:
    return {name: tensor.copy() for name, tensor in params.items()}


# ---------------------------------------------------------------------------
# MLP forward/backward (tanh hidden layers, linear output)

def _mlp_forward(
    x: np.ndarray, params: ModelParams, prefix: str, n_layers: int
) -> tuple[np.ndarray, list[np.ndarray]]:
    acts = [x]
    for i in range(n_layers):
        z = acts[-1] @ params[f"{prefix}.{i}.w"].T + params[f"{prefix}.{i}.b"]
        acts.append(np.tanh(z) if i < n_layers - 1 else z)
    return acts[-1], acts


def _mlp_backward(
    dy: np.ndarray,
    acts: list[np.ndarray],
    params: ModelParams,
    prefix: str,
    n_layers: int,
    grads: ModelParams,
) -> np.ndarray:
    d = dy
    for i in reversed(range(n_layers)):
        if i < n_layers - 1:
            d = d * (1.0 - acts[i + 1] ** 2)
        grads[f"{prefix}.{i}.w"] += d.T @ acts[i]
        grads[f"{prefix}.{i}.b"] += d.sum(axis=0)
        d = d @ params[f"{prefix}.{i}.w"]
    return d


# ---------------------------------------------------------------------------
# Graph preparation

@dataclass(frozen=True)
class PreparedGraph:
    """Featurized graph: node feature matrix plus positional edge arrays."""

    features: np.ndarray
    src: np.ndarray
    dst: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.features.shape[0]


def prepare_graph(
    graph: AttributedCFG, vocab: OpcodeVocabulary, config: ModelConfig
) -> PreparedGraph:
    if len(graph.nodes) > config.max_nodes:
        raise GraphTooLarge(
            f"{len(graph.nodes)} nodes exceeds the cap of {config.max_nodes}"
        )
    features = featurize_graph(graph, vocab)
    if features.shape[1] != config.feature_dim:
        raise ShapeMismatch(
            f"feature dim {features.shape[1]} != config {config.feature_dim}"
        )
    index = graph.node_index
    src = np.array([index[a] for a, _ in graph.edges], dtype=np.intp)
    dst = np.array([index[b] for _, b in graph.edges], dtype=np.intp)
    return PreparedGraph(features=features, src=src, dst=dst)


# ---------------------------------------------------------------------------
# Forward pass (with tape) and public single-stage ops

def _prop_forward(
    h: np.ndarray,
    src: np.ndarray,
    dst: np.ndarray,
    params: ModelParams,
    config: ModelConfig,
    layer: int,
) -> tuple[np.ndarray, tuple]:
    sum_in = np.zeros_like(h)
    sum_out = np.zeros_like(h)
    if src.size:
        np.add.at(sum_in, dst, h[src])
        np.add.at(sum_out, src, h[dst])
    m_in = sum_in @ params[f"prop.{layer}.in.w"].T
    m_out = sum_out @ params[f"prop.{layer}.out.w"].T
    z = np.concatenate([h, m_in, m_out], axis=1)
    h_next, acts = _mlp_forward(
        z, params, f"prop.{layer}.update", len(config.update_sizes)
    )
    return h_next, (sum_in, sum_out, acts)


def _prop_backward(
    dh_next: np.ndarray,
    tape: tuple,
    src: np.ndarray,
    dst: np.ndarray,
    params: ModelParams,
    config: ModelConfig,
    layer: int,
    grads: ModelParams,
) -> np.ndarray:
    sum_in, sum_out, acts = tape
    d = config.node_state_dim
    dz = _mlp_backward(
        dh_next, acts, params, f"prop.{layer}.update",
        len(config.update_sizes), grads,
    )
    dh = dz[:, :d].copy()
    dm_in = dz[:, d : 2 * d]
    dm_out = dz[:, 2 * d :]
    grads[f"prop.{layer}.in.w"] += dm_in.T @ sum_in
    grads[f"prop.{layer}.out.w"] += dm_out.T @ sum_out
    if src.size:
        dsum_in = dm_in @ params[f"prop.{layer}.in.w"]
        dsum_out = dm_out @ params[f"prop.{layer}.out.w"]
        np.add.at(dh, src, dsum_in[dst])
        np.add.at(dh, dst, dsum_out[src])
    return dh


def _agg_forward(
    h: np.ndarray, params: ModelParams, config: ModelConfig
) -> tuple[np.ndarray, tuple]:
    gate_lin = h @ params["agg.gate.w"].T + params["agg.gate.b"]
    gate = 1.0 / (1.0 + np.exp(-gate_lin))
    proj = h @ params["agg.proj.w"].T + params["agg.proj.b"]
    pooled = (gate * proj).sum(axis=0, keepdims=True)
    out, acts = _mlp_forward(pooled, params, "agg.out", len(config.output_sizes))
    return out[0], (h, gate, proj, acts)


def _agg_backward(
    demb: np.ndarray,
    tape: tuple,
    params: ModelParams,
    config: ModelConfig,
    grads: ModelParams,
) -> np.ndarray:
    h, gate, proj, acts = tape
    dpooled = _mlp_backward(
        demb[None, :], acts, params, "agg.out", len(config.output_sizes), grads
    )
    dgate = dpooled * proj
    dproj = dpooled * gate
    dgate_lin = dgate * gate * (1.0 - gate)
    grads["agg.gate.w"] += dgate_lin.T @ h
    grads["agg.gate.b"] += dgate_lin.sum(axis=0)
    grads["agg.proj.w"] += dproj.T @ h
    grads["agg.proj.b"] += dproj.sum(axis=0)
    return dgate_lin @ params["agg.gate.w"] + dproj @ params["agg.proj.w"]


def _forward_graph(
    prep: PreparedGraph, params: ModelParams, config: ModelConfig
) -> tuple[np.ndarray, dict]:
    h, enc_acts = _mlp_forward(
        prep.features, params, "encoder", len(config.encoder_sizes)
    )
    layer_tapes = []
    for t in range(config.propagation_layers):
        h, tape = _prop_forward(h, prep.src, prep.dst, params, config, t)
        layer_tapes.append(tape)
    emb, agg_tape = _agg_forward(h, params, config)
    return emb, {"enc": enc_acts, "layers": layer_tapes, "agg": agg_tape}


def _backward_graph(
    demb: np.ndarray,
    tape: dict,
    prep: PreparedGraph,
    params: ModelParams,
    config: ModelConfig,
    grads: ModelParams,
) -> None:
    dh = _agg_backward(demb, tape["agg"], params, config, grads)
    for t in reversed(range(config.propagation_layers)):
        dh = _prop_backward(
            dh, tape["layers"][t], prep.src, prep.dst, params, config, t, grads
        )
    _mlp_backward(dh, tape["enc"], params, "encoder", len(config.encoder_sizes), grads)


def encode(
    features: np.ndarray, params: ModelParams, config: ModelConfig
) -> np.ndarray:
    """Lift node feature rows to initial node states."""
    if features.ndim != 2 or features.shape[1] != config.feature_dim:
        raise ShapeMismatch(
            f"expected (n, {config.feature_dim}) features, got {features.shape}"
        )
    out, _ = _mlp_forward(
        np.asarray(features, dtype=np.float64), params, "encoder",
        len(config.encoder_sizes),
    )
    return out


def propagate(
    states: np.ndarray,
    edges: Sequence[tuple[int, int]],
    params: ModelParams,
    config: ModelConfig,
    layer: int,
) -> np.ndarray:
    """One propagation layer over positional edges (row indices)."""
    if states.ndim != 2 or states.shape[1] != config.node_state_dim:
        raise ShapeMismatch(
            f"expected (n, {config.node_state_dim}) states, got {states.shape}"
        )
    if not 0 <= layer < config.propagation_layers:
        raise ValueError(f"layer {layer} out of range")
    edge_array = np.asarray(list(edges), dtype=np.intp).reshape(-1, 2)
    out, _ = _prop_forward(
        np.asarray(states, dtype=np.float64),
        edge_array[:, 0], edge_array[:, 1], params, config, layer,
    )
    return out


def aggregate(
    states: np.ndarray, params: ModelParams, config: ModelConfig
) -> np.ndarray:
    """Gated sum over node states followed by the output MLP."""
    if states.ndim != 2 or states.shape[1] != config.node_state_dim:
        raise ShapeMismatch(
            f"expected (n, {config.node_state_dim}) states, got {states.shape}"
        )
    emb, _ = _agg_forward(np.asarray(states, dtype=np.float64), params, config)
    return emb


def embed_prepared(
    prep: PreparedGraph, params: ModelParams, config: ModelConfig
) -> np.ndarray:
    emb, _ = _forward_graph(prep, params, config)
    return emb


def embed(
    graph: AttributedCFG,
    vocab: OpcodeVocabulary,
    params: ModelParams,
    config: ModelConfig,
) -> np.ndarray:
    return embed_prepared(prepare_graph(graph, vocab, config), params, config)


# ---------------------------------------------------------------------------
# Loss

def euclidean_distance(e1: np.ndarray, e2: np.ndarray) -> float:
    if e1.shape != e2.shape:
        raise ShapeMismatch(f"embedding shapes differ: {e1.shape} vs {e2.shape}")
    return float(np.sqrt(np.sum((e1 - e2) ** 2)))


def pair_loss(distance: float, label: int, margin: float) -> float:
    """max(0, margin - label*(1 - distance)); label +1 pulls below 1-margin,
    label -1 pushes above 1+margin."""
    if label not in (-1, 1):
        raise InvalidLabel(f"label must be -1 or +1, got {label!r}")
    if margin <= 0:
        raise ValueError("margin must be positive")
    return max(0.0, margin - label * (1.0 - distance))


def pair_loss_and_grads(
    query: PreparedGraph,
    target: PreparedGraph,
    label: int,
    params: ModelParams,
    config: ModelConfig,
) -> tuple[float, ModelParams]:
    """Loss for one pair plus exact gradients for every parameter.

    At the hinge kink and at zero distance the subgradient 0 is used.
    """
    if label not in (-1, 1):
        raise InvalidLabel(f"label must be -1 or +1, got {label!r}")
    grads = {name: np.zeros_like(tensor) for name, tensor in params.items()}
    e1, tape1 = _forward_graph(query, params, config)
    e2, tape2 = _forward_graph(target, params, config)
    diff = e1 - e2
    distance = float(np.sqrt(np.sum(diff**2)))
    if not np.isfinite(distance):
        # a NaN distance would otherwise read as an inactive hinge
        raise NonFiniteGradient(f"non-finite pair distance {distance}")
    active = config.margin - label * (1.0 - distance)
    loss = max(0.0, active)
    if active > 0.0 and distance > 0.0:
        dd = float(label)
        de1 = dd * diff / distance
        _backward_graph(de1, tape1, query, params, config, grads)
        _backward_graph(-de1, tape2, target, params, config, grads)
    return loss, grads


# ---------------------------------------------------------------------------
# Optimizer and training loop

@dataclass
class TrainState:
    params: ModelParams
    adam_m: ModelParams
    adam_v: ModelParams
    step: int = 0


def init_train_state(config: ModelConfig) -> TrainState:
    params = init_params(config)
    return TrainState(
        params=params,
        adam_m={k: np.zeros_like(v) for k, v in params.items()},
        adam_v={k: np.zeros_like(v) for k, v in params.items()},
        step=0,
    )


@dataclass(frozen=True)
class PreparedPair:
    query: PreparedGraph
    target: PreparedGraph
    label: int


def prepare_pairs(
    pairs: Sequence[FunctionPair],
    vocab: OpcodeVocabulary,
    config: ModelConfig,
    cache: dict | None = None,
) -> list[PreparedPair]:
    cache = {} if cache is None else cache

    def prep(ref, graph):
        if ref not in cache:
            cache[ref] = prepare_graph(graph, vocab, config)
        return cache[ref]

    return [
        PreparedPair(
            query=prep(p.query_ref, p.query),
            target=prep(p.target_ref, p.target),
            label=p.label,
        )
        for p in pairs
    ]


def _adam_update(
    state: TrainState, grads: ModelParams, config: ModelConfig
) -> TrainState:
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradient(f"non-finite gradient in {name}")
    step = state.step + 1
    lr = config.learning_rate
    new_params: ModelParams = {}
    new_m: ModelParams = {}
    new_v: ModelParams = {}
    bias1 = 1.0 - _ADAM_BETA1**step
    bias2 = 1.0 - _ADAM_BETA2**step
    for name, param in state.params.items():
        g = grads[name]
        m = _ADAM_BETA1 * state.adam_m[name] + (1.0 - _ADAM_BETA1) * g
        v = _ADAM_BETA2 * state.adam_v[name] + (1.0 - _ADAM_BETA2) * g**2
        new_m[name] = m
        new_v[name] = v
        new_params[name] = param - lr * (m / bias1) / (np.sqrt(v / bias2) + _ADAM_EPS)
    return TrainState(params=new_params, adam_m=new_m, adam_v=new_v, step=step)


def grad_step(
    batch: Sequence[FunctionPair | PreparedPair],
    state: TrainState,
    config: ModelConfig,
    vocab: OpcodeVocabulary | None = None,
) -> tuple[TrainState, float]:
    """One Adam update on the mean pair loss of the batch."""
    if not batch:
        raise ValueError("empty batch")
    prepared: list[PreparedPair] = []
    for item in batch:
        if isinstance(item, PreparedPair):
            prepared.append(item)
        else:
            if vocab is None:
                raise ValueError("vocab required to featurize FunctionPair batches")
            prepared.extend(prepare_pairs([item], vocab, config))
    total = {name: np.zeros_like(t) for name, t in state.params.items()}
    loss_sum = 0.0
    for pair in prepared:
        loss, grads = pair_loss_and_grads(
            pair.query, pair.target, pair.label, state.params, config
        )
        loss_sum += loss
        for name, grad in grads.items():
            total[name] += grad
    scale = 1.0 / len(prepared)
    for name in total:
        total[name] *= scale
    new_state = _adam_update(state, total, config)
    return new_state, loss_sum * scale


PairSource = Callable[[int], Sequence[FunctionPair]]


def train_model(
    train_source: PairSource | Sequence[FunctionPair],
    validation_pairs: Sequence[FunctionPair],
    vocab: OpcodeVocabulary,
    config: ModelConfig,
    epochs: int,
    epoch_size: int,
) -> tuple[ModelParams, list[dict]]:
    """Train and return the parameters of the best validation-AUC epoch.

    train_source is either a callable epoch -> pairs (already sized) or a
    fixed pool resampled to epoch_size with replacement per epoch. With zero
    epochs the freshly initialized parameters come back untouched.
    """
    if epochs < 0 or epoch_size < 1:
        raise ValueError("epochs must be >= 0 and epoch_size >= 1")
    state = init_train_state(config)
    history: list[dict] = []
    if epochs == 0:
        return clone_params(state.params), history

    cache: dict = {}
    val_prepared = prepare_pairs(validation_pairs, vocab, config, cache)
    val_labels = [p.label for p in val_prepared]
    best_auc = -np.inf
    best_params = clone_params(state.params)
    for epoch in range(epochs):
        if callable(train_source):
            epoch_pairs = list(train_source(epoch))
        else:
            pool = list(train_source)
            rng = np.random.default_rng([config.seed, _SHUFFLE_TAG, epoch])
            epoch_pairs = [pool[i] for i in rng.integers(len(pool), size=epoch_size)]
        prepared = prepare_pairs(epoch_pairs, vocab, config, cache)
        loss_sum = 0.0
        try:
            for start in range(0, len(prepared), config.batch_size):
                batch = prepared[start : start + config.batch_size]
                state, batch_loss = grad_step(batch, state, config)
                loss_sum += batch_loss * len(batch)
        except NonFiniteGradient as exc:
            raise Diverged(f"epoch {epoch}: {exc}") from exc
        epoch_loss = loss_sum / len(prepared)
        if not np.isfinite(epoch_loss):
            raise Diverged(f"epoch {epoch}: non-finite loss {epoch_loss}")
        val_auc = _validation_auc(val_prepared, val_labels, state.params, config)
        history.append(
            {"epoch": epoch, "train_loss": epoch_loss, "val_auc": val_auc}
        )
        if val_auc > best_auc:
            best_auc = val_auc
            best_params = clone_params(state.params)
    return best_params, history


def _validation_auc(
    prepared: Sequence[PreparedPair],
    labels: Sequence[int],
    params: ModelParams,
    config: ModelConfig,
) -> float:
    # ranking by -distance matches ranking by similarity (monotone transform)
    emb_cache: dict[int, np.ndarray] = {}

    def emb_of(prep: PreparedGraph) -> np.ndarray:
        key = id(prep)
        if key not in emb_cache:
            emb_cache[key] = embed_prepared(prep, params, config)
        return emb_cache[key]

    scores = [
        (-euclidean_distance(emb_of(p.query), emb_of(p.target)), label)
        for p, label in zip(prepared, labels)
    ]
    return auc(scores)


# ---------------------------------------------------------------------------
# Checkpoints

_CKPT_MAGIC = b"CIDETCK1"
_CKPT_VERSION = 1


def save_checkpoint(
    path: Path | str, params: ModelParams, config: ModelConfig
) -> None:
    """Versioned container: JSON header, then raw little-endian float64
    tensors in sorted name order. A text manifest sits alongside for diffing.
    """
    path = Path(path)
    names = sorted(params)
    header = {
        "format_version": _CKPT_VERSION,
        "config": config_to_json(config),
        "tensors": [{"name": n, "shape": list(params[n].shape)} for n in names],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with path.open("wb") as handle:
        handle.write(_CKPT_MAGIC)
        handle.write(struct.pack("<Q", len(header_bytes)))
        handle.write(header_bytes)
        for name in names:
            handle.write(
                np.ascontiguousarray(params[name], dtype="<f8").tobytes()
            )
    manifest = Path(str(path) + ".manifest.txt")
    lines = [
        f"{n} {'x'.join(str(s) for s in params[n].shape)}" for n in names
    ]
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_checkpoint(path: Path | str) -> tuple[ModelParams, ModelConfig]:
    raw = Path(path).read_bytes()
    if raw[: len(_CKPT_MAGIC)] != _CKPT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    offset = len(_CKPT_MAGIC)
    (header_len,) = struct.unpack_from("<Q", raw, offset)
    offset += 8
    header = json.loads(raw[offset : offset + header_len].decode("utf-8"))
    if header["format_version"] != _CKPT_VERSION:
        raise ValueError(f"unsupported checkpoint version {header['format_version']}")
    offset += header_len
    params: ModelParams = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        tensor = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
        params[entry["name"]] = tensor.reshape(shape).astype(np.float64)
        offset += count * 8
    return params, config_from_json(header["config"])
