"""Dense network with batch norm, ReLU and inverted dropout.

Hidden layer ``i``: ``Dense -> BatchNorm -> ReLU -> Dropout(p_i)``. The
output layer is a plain ``Dense``; softmax lives inside the loss (and in
:func:`softmax` for probabilities).

Parameters are kept in an ordered dict keyed ``dense{i}.weight``,
``dense{i}.bias``, ``bn{i}.gamma``, ``bn{i}.beta`` and ``out.weight``,
``out.bias``. Batch-norm running statistics (``bn{i}.moving_mean``,
``bn{i}.moving_var``) are kept apart since they are not trained.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import BatchTooSmall, InvalidParameter, LabelOutOfRange, ShapeMismatch, StaleCache
from .tensor import Rng, matmul


@dataclass(frozen=True)
class MlpConfig:
    input_dim: int = 1568
    hidden_dims: tuple = (1024, 512, 256)
    dropout_rates: tuple = (0.5, 0.4, 0.3)
    output_dim: int = 10
    bn_epsilon: float = 1e-3
    bn_momentum: float = 0.99

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(d) for d in self.hidden_dims))
        object.__setattr__(self, "dropout_rates", tuple(float(p) for p in self.dropout_rates))
        if len(self.hidden_dims) != len(self.dropout_rates):
            raise InvalidParameter("need one dropout rate per hidden layer")
        if min((self.input_dim, self.output_dim) + self.hidden_dims) <= 0:
            raise InvalidParameter("layer widths must be positive")
        if any(not 0.0 <= p < 1.0 for p in self.dropout_rates):
            raise InvalidParameter(f"dropout rates must lie in [0, 1), got {self.dropout_rates}")

    @property
    def layer_dims(self):
        return (self.input_dim,) + self.hidden_dims + (self.output_dim,)

    def to_dict(self):
        d = asdict(self)
        d["hidden_dims"] = list(self.hidden_dims)
        d["dropout_rates"] = list(self.dropout_rates)
        return d


def parameter_shapes(config: MlpConfig) -> dict:
    """Shapes of every trainable tensor, in storage order."""
    shapes = {}
    dims = config.layer_dims
    for i, (fan_in, fan_out) in enumerate(zip(dims[:-2], dims[1:-1])):
        shapes[f"dense{i}.weight"] = (fan_in, fan_out)
        shapes[f"dense{i}.bias"] = (fan_out,)
        shapes[f"bn{i}.gamma"] = (fan_out,)
        shapes[f"bn{i}.beta"] = (fan_out,)
    shapes["out.weight"] = (dims[-2], dims[-1])
    shapes["out.bias"] = (dims[-1],)
    return shapes


def state_shapes(config: MlpConfig) -> dict:
    shapes = {}
    for i, width in enumerate(config.hidden_dims):
        shapes[f"bn{i}.moving_mean"] = (width,)
        shapes[f"bn{i}.moving_var"] = (width,)
    return shapes


def param_count(config: MlpConfig) -> int:
    """Trainable parameters: each Dense contributes in*out + out, each BN 2*out."""
    dims = config.layer_dims
    dense = sum(a * b + b for a, b in zip(dims[:-1], dims[1:]))
    return dense + sum(2 * width for width in config.hidden_dims)


@dataclass
class Model:
    config: MlpConfig
    params: dict
    state: dict
    meta: dict = field(default_factory=dict)

    @property
    def dtype(self):
        return self.params["out.weight"].dtype

    def copy(self) -> "Model":
        return Model(
            self.config,
            {k: v.copy() for k, v in self.params.items()},
            {k: v.copy() for k, v in self.state.items()},
            dict(self.meta),
        )

    def snapshot(self) -> dict:
        return {k: v.copy() for k, v in {**self.params, **self.state}.items()}

    def restore(self, snapshot: dict):
        for k in self.params:
            self.params[k][...] = snapshot[k]
        for k in self.state:
            self.state[k][...] = snapshot[k]

    def astype(self, dtype) -> "Model":
        return Model(
            self.config,
            {k: v.astype(dtype) for k, v in self.params.items()},
            {k: v.astype(dtype) for k, v in self.state.items()},
            dict(self.meta),
        )


def init_model(config: MlpConfig, seed: int, dtype=np.float32) -> Model:
    """Glorot-uniform weights, zero biases and betas, unit gammas, running stats (0, 1)."""
    rng = Rng(seed, "init")
    params = {}
    for name, shape in parameter_shapes(config).items():
        if name.endswith(".weight"):
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            params[name] = rng.child(name).uniform(-limit, limit, shape, dtype)
        elif name.endswith(".gamma"):
            params[name] = np.ones(shape, dtype=dtype)
        else:
            params[name] = np.zeros(shape, dtype=dtype)
    state = {
        name: (np.zeros if name.endswith("mean") else np.ones)(shape, dtype=dtype)
        for name, shape in state_shapes(config).items()
    }
    return Model(config, params, state)


def dropout(a: np.ndarray, rate: float, rng: Rng):
    """Inverted dropout: returns ``(a * scale, scale)`` with ``scale`` in {0, 1/(1-rate)}."""
    keep = rng.bernoulli(1.0 - rate, a.shape)
    scale = keep.astype(a.dtype) * a.dtype.type(1.0 / (1.0 - rate))
    return a * scale, scale


@dataclass
class LayerCache:
    inputs: np.ndarray
    xhat: np.ndarray
    inv_std: np.ndarray
    pre_relu: np.ndarray
    dropout_scale: np.ndarray | None


@dataclass
class ForwardCache:
    mode: str
    layers: list
    last_hidden: np.ndarray
    batch_size: int


def forward(model: Model, batch: np.ndarray, mode: str = "eval", rng: Rng | None = None,
            keep_cache: bool | None = None):
    """Run the network; returns ``(logits, cache)``.

    ``mode="train"`` normalizes with batch statistics, applies dropout
    (drawn from ``rng``), updates the running statistics and always
    returns a cache. ``mode="eval"`` uses running statistics, skips
    dropout and returns a cache only if ``keep_cache`` is set.
    """
    cfg = model.config
    if mode not in ("train", "eval"):
        raise InvalidParameter(f"mode must be 'train' or 'eval', got {mode!r}")
    x = np.asarray(batch, dtype=model.dtype)
    if x.ndim != 2 or x.shape[1] != cfg.input_dim:
        raise ShapeMismatch(f"batch shape {x.shape} does not match input_dim {cfg.input_dim}")
    train = mode == "train"
    if train and len(x) < 2:
        raise BatchTooSmall(f"train-mode batch norm needs at least 2 samples, got {len(x)}")
    if train and rng is None and any(cfg.dropout_rates):
        raise InvalidParameter("train mode with dropout needs an rng")
    if keep_cache is None:
        keep_cache = train
    p, s = model.params, model.state
    eps, mom = cfg.bn_epsilon, cfg.bn_momentum
    layers = []
    h = x
    for i, rate in enumerate(cfg.dropout_rates):
        z = matmul(h, p[f"dense{i}.weight"]) + p[f"dense{i}.bias"]
        if train:
            mean = z.mean(axis=0)
            var = z.var(axis=0)
            inv_std = 1.0 / np.sqrt(var + eps)
            xhat = (z - mean) * inv_std
            s[f"bn{i}.moving_mean"] *= mom
            s[f"bn{i}.moving_mean"] += (1 - mom) * mean
            s[f"bn{i}.moving_var"] *= mom
            s[f"bn{i}.moving_var"] += (1 - mom) * var
        else:
            inv_std = 1.0 / np.sqrt(s[f"bn{i}.moving_var"] + eps)
            xhat = (z - s[f"bn{i}.moving_mean"]) * inv_std
        y = p[f"bn{i}.gamma"] * xhat + p[f"bn{i}.beta"]
        a = np.maximum(y, 0)
        scale = None
        if train and rate > 0:
            a, scale = dropout(a, rate, rng)
        if keep_cache:
            layers.append(LayerCache(h, xhat, inv_std.astype(model.dtype, copy=False), y, scale))
        h = a
    logits = matmul(h, p["out.weight"]) + p["out.bias"]
    cache = ForwardCache(mode, layers, h, len(x)) if keep_cache else None
    return logits, cache


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def loss_softmax_xent(logits: np.ndarray, labels: np.ndarray):
    """Mean sparse categorical cross-entropy and its gradient w.r.t. the logits."""
    labels = np.asarray(labels)
    b, c = logits.shape
    if labels.shape != (b,):
        raise ShapeMismatch(f"{b} logit rows but labels of shape {labels.shape}")
    if b and (labels.min() < 0 or labels.max() >= c):
        raise LabelOutOfRange(f"labels must lie in [0, {c})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    rows = np.arange(b)
    loss = float(-log_probs[rows, labels].mean())
    dlogits = np.exp(log_probs)
    dlogits[rows, labels] -= 1
    dlogits /= b
    return loss, dlogits


def backward(model: Model, cache: ForwardCache, dlogits: np.ndarray, input_grad: bool = False):
    """Gradients of every trainable tensor given ``dL/dlogits``.

    Train-mode caches backpropagate through the batch mean and variance;
    eval-mode caches treat batch norm as the fixed affine map it is at
    inference. With ``input_grad`` the gradient w.r.t. the network input
    is returned as a second value.
    """
    cfg = model.config
    p = model.params
    if (cache.batch_size != dlogits.shape[0] or dlogits.shape[1] != cfg.output_dim
            or len(cache.layers) != len(cfg.hidden_dims)
            or cache.last_hidden.shape[1] != cfg.layer_dims[-2]):
        raise StaleCache("cache does not match this model and gradient")
    grads = {}
    grads["out.weight"] = cache.last_hidden.T @ dlogits
    grads["out.bias"] = dlogits.sum(axis=0)
    upstream = dlogits @ p["out.weight"].T
    b = cache.batch_size
    for i in reversed(range(len(cache.layers))):
        lc = cache.layers[i]
        if lc.dropout_scale is not None:
            upstream = upstream * lc.dropout_scale
        dy = upstream * (lc.pre_relu > 0)
        grads[f"bn{i}.gamma"] = (dy * lc.xhat).sum(axis=0)
        grads[f"bn{i}.beta"] = dy.sum(axis=0)
        dxhat = dy * p[f"bn{i}.gamma"]
        if cache.mode == "train":
            dz = (lc.inv_std / b) * (
                b * dxhat - dxhat.sum(axis=0) - lc.xhat * (dxhat * lc.xhat).sum(axis=0)
            )
        else:
            dz = dxhat * lc.inv_std
        grads[f"dense{i}.weight"] = lc.inputs.T @ dz
        grads[f"dense{i}.bias"] = dz.sum(axis=0)
        if i > 0 or input_grad:
            upstream = dz @ p[f"dense{i}.weight"].T
    ordered = {name: grads[name] for name in p}
    if input_grad:
        return ordered, upstream
    return ordered


def predict_logits(model: Model, features: np.ndarray, batch_size: int = 1024) -> np.ndarray:
    """Eval-mode logits, computed in fixed-size chunks."""
    out = np.empty((len(features), model.config.output_dim), dtype=model.dtype)
    for start in range(0, len(features), batch_size):
        out[start:start + batch_size], _ = forward(model, features[start:start + batch_size], "eval")
    return out
