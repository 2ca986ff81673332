"""Dilated 1-D convolutional regressor with explicit forward/backward passes.

Three valid-padded convolutions over the time axis (features are input
channels), flatten, inverted dropout, and a single linear output unit.
All arithmetic is float64.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .core import AlignedDataset
from .errors import InsufficientDataError, ShapeError, TrainingError
from .rng import derive_seed

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ConvSpec:
    filters: int
    kernel: int
    stride: int = 1
    dilation: int = 1

    def __post_init__(self):
        for name in ("filters", "kernel", "stride", "dilation"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"ConvSpec.{name} must be >= 1")

    @property
    def extent(self) -> int:
        return (self.kernel - 1) * self.dilation + 1

    def out_length(self, length: int) -> int:
        return (length - self.extent) // self.stride + 1


DEFAULT_STACK = (ConvSpec(16, 2, 3, 1), ConvSpec(16, 2, 1, 2), ConvSpec(16, 2, 1, 4))


@dataclass(frozen=True)
class NetworkConfig:
    layers: tuple[ConvSpec, ...] = DEFAULT_STACK
    dropout_rate: float = 0.05
    window: int = 28
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(
            c if isinstance(c, ConvSpec) else ConvSpec(**c) for c in self.layers))
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        self.lengths()

    def lengths(self) -> list[int]:
        """Sequence length after each layer, starting with the input window."""
        out = [self.window]
        for i, spec in enumerate(self.layers):
            nxt = spec.out_length(out[-1]) if out[-1] >= spec.extent else 0
            if nxt < 1:
                raise ShapeError(f"conv layer {i + 1} leaves no output for window {self.window} "
                                 f"(input length {out[-1]}, kernel extent {spec.extent})")
            out.append(nxt)
        return out

    @property
    def flat_size(self) -> int:
        return self.layers[-1].filters * self.lengths()[-1]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    lr: float = 1e-3
    batch_size: int = 16
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0  # decoupled (AdamW); applied to weights, not biases

    def __post_init__(self):
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.epochs < 1 or self.batch_size < 1 or not self.lr > 0 or not self.eps > 0:
            raise ValueError("training hyperparameters must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z, a):
    return (z > 0).astype(float)


def _tanh_grad(z, a):
    return 1.0 - a * a


_ACTIVATIONS = {
    "relu": (_relu, _relu_grad),
    "tanh": (np.tanh, _tanh_grad),
    "linear": (lambda z: z, lambda z, a: np.ones_like(z)),
}


def _tap_index(length_out: int, spec: ConvSpec) -> np.ndarray:
    return (np.arange(length_out) * spec.stride)[:, None] + (np.arange(spec.kernel) * spec.dilation)[None, :]


def conv1d_forward(x, W, b, spec: ConvSpec):
    """Valid strided/dilated correlation. x: (B, C, L), W: (F, C, K) -> (B, F, L_out)."""
    L = x.shape[2]
    L_out = spec.out_length(L) if L >= spec.extent else 0
    if L_out < 1:
        raise ShapeError(f"input length {L} shorter than kernel extent {spec.extent}")
    idx = _tap_index(L_out, spec)
    patches = x[:, :, idx]  # (B, C, L_out, K)
    return np.einsum("bclk,fck->bfl", patches, W) + b[None, :, None], patches


def conv1d_backward(dz, patches, W, spec: ConvSpec, in_length: int):
    dW = np.einsum("bfl,bclk->fck", dz, patches)
    db = dz.sum(axis=(0, 2))
    dpatches = np.einsum("bfl,fck->bclk", dz, W)
    dx = np.zeros((dz.shape[0], W.shape[1], in_length))
    L_out = dz.shape[2]
    base = np.arange(L_out) * spec.stride
    for k in range(spec.kernel):
        # for a fixed tap the positions are distinct, so fancy += is safe
        dx[:, :, base + k * spec.dilation] += dpatches[..., k]
    return dx, dW, db


@dataclass
class Cache:
    version: int
    x: np.ndarray
    pre: list = field(default_factory=list)
    post: list = field(default_factory=list)
    patches: list = field(default_factory=list)
    flat: np.ndarray = None
    mask: np.ndarray = None
    dropped: np.ndarray = None


class ConvNet:
    def __init__(self, config: NetworkConfig, in_channels: int, seed: int = 0, params=None):
        self.config = config
        self.in_channels = int(in_channels)
        self.version = 0
        if params is not None:
            self.params = {k: np.array(v, dtype=float) for k, v in params.items()}
            self._check_param_shapes()
        else:
            self.params = self._init_params(np.random.default_rng(seed))

    def _param_shapes(self) -> dict:
        shapes = {}
        channels = self.in_channels
        for i, spec in enumerate(self.config.layers):
            shapes[f"conv{i + 1}.W"] = (spec.filters, channels, spec.kernel)
            shapes[f"conv{i + 1}.b"] = (spec.filters,)
            channels = spec.filters
        shapes["dense.W"] = (self.config.flat_size,)
        shapes["dense.b"] = ()
        return shapes

    def _check_param_shapes(self):
        expected = self._param_shapes()
        if set(expected) != set(self.params):
            raise ShapeError(f"parameter set mismatch: {sorted(self.params)} vs {sorted(expected)}")
        for k, shape in expected.items():
            if self.params[k].shape != shape:
                raise ShapeError(f"{k}: expected shape {shape}, got {self.params[k].shape}")

    def _init_params(self, rng) -> dict:
        params = {}
        for k, shape in self._param_shapes().items():
            if k.endswith(".b"):
                params[k] = np.zeros(shape)
            elif k.startswith("conv"):
                fan_in = shape[1] * shape[2]
                limit = math.sqrt(6.0 / fan_in)  # He-uniform
                params[k] = rng.uniform(-limit, limit, size=shape)
            else:
                limit = math.sqrt(6.0 / (shape[0] + 1))
                params[k] = rng.uniform(-limit, limit, size=shape)
        return params

    def touch(self):
        self.version += 1

    def forward(self, x, training: bool = False, rng=None, mask=None):
        """Return ``(predictions, cache)`` for a batch of shape (B, C, W).

        With ``training`` set, a dropout mask is drawn from ``rng`` unless an
        explicit ``mask`` (already scaled by 1/(1-rate)) is given.
        """
        x = np.asarray(x, dtype=float)
        if x.ndim != 3:
            raise ShapeError(f"input: expected (batch, channels, length), got shape {x.shape}")
        if x.shape[1] != self.in_channels:
            raise ShapeError(f"conv layer 1: expected {self.in_channels} input channels, got {x.shape[1]}")
        if x.shape[2] != self.config.window:
            raise ShapeError(f"conv layer 1: expected input length {self.config.window}, got {x.shape[2]}")
        act, _ = _ACTIVATIONS[self.config.activation]
        cache = Cache(self.version, x)
        h = x
        for i, spec in enumerate(self.config.layers):
            z, patches = conv1d_forward(h, self.params[f"conv{i + 1}.W"], self.params[f"conv{i + 1}.b"], spec)
            h = act(z)
            cache.pre.append(z)
            cache.post.append(h)
            cache.patches.append(patches)
        flat = h.reshape(h.shape[0], -1)
        cache.flat = flat
        rate = self.config.dropout_rate
        if training and rate > 0:
            if mask is None:
                if rng is None:
                    raise ValueError("training-mode forward needs an rng or an explicit mask")
                mask = (rng.random(flat.shape) >= rate) / (1.0 - rate)
            elif mask.shape != flat.shape:
                raise ShapeError(f"dropout: mask shape {mask.shape} != activations {flat.shape}")
            cache.mask = mask
            flat = flat * mask
        cache.dropped = flat
        out = flat @ self.params["dense.W"] + self.params["dense.b"]
        return out, cache

    def predict(self, x) -> np.ndarray:
        return self.forward(x, training=False)[0]

    def backward(self, cache: Cache, dout) -> dict:
        """Gradients of a scalar loss given dLoss/dPrediction ``dout`` (shape (B,))."""
        if cache.version != self.version:
            raise ValueError("stale cache: parameters changed since the forward pass")
        dout = np.asarray(dout, dtype=float).reshape(-1)
        if dout.shape[0] != cache.x.shape[0]:
            raise ShapeError(f"loss gradient has {dout.shape[0]} entries for batch {cache.x.shape[0]}")
        _, act_grad = _ACTIVATIONS[self.config.activation]
        grads = {
            "dense.W": cache.dropped.T @ dout,
            "dense.b": np.asarray(dout.sum()),
        }
        dflat = np.outer(dout, self.params["dense.W"])
        if cache.mask is not None:
            dflat = dflat * cache.mask
        dh = dflat.reshape(cache.post[-1].shape)
        for i in reversed(range(len(self.config.layers))):
            spec = self.config.layers[i]
            dz = dh * act_grad(cache.pre[i], cache.post[i])
            in_len = cache.x.shape[2] if i == 0 else cache.post[i - 1].shape[2]
            dh, dW, db = conv1d_backward(dz, cache.patches[i], self.params[f"conv{i + 1}.W"], spec, in_len)
            grads[f"conv{i + 1}.W"] = dW
            grads[f"conv{i + 1}.b"] = db
        return grads

    def to_dict(self) -> dict:
        cfg = asdict(self.config)
        return {
            "version": CHECKPOINT_VERSION,
            "config": cfg,
            "in_channels": self.in_channels,
            "shapes": {k: list(v.shape) for k, v in self.params.items()},
            "params": {k: v.tolist() for k, v in self.params.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConvNet":
        if d.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {d.get('version')}")
        cfg = d["config"]
        config = NetworkConfig(tuple(ConvSpec(**c) for c in cfg["layers"]), cfg["dropout_rate"],
                               cfg["window"], cfg["activation"])
        params = {k: np.array(v, dtype=float).reshape(d["shapes"][k]) for k, v in d["params"].items()}
        return cls(config, d["in_channels"], params=params)


def mse_loss(pred, y):
    diff = pred - y
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


@dataclass(frozen=True)
class WindowSet:
    X: np.ndarray  # (N, C, W)
    y: np.ndarray  # (N,)
    target_rows: tuple[int, ...]
    channel_names: tuple[str, ...]


def make_windows(ds: AlignedDataset, window: int, rows=None) -> WindowSet:
    """One sample per target row t >= window: features of rows t-window .. t-1.

    ``rows`` restricts which target rows are produced (each must be >= window).
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    if ds.n <= window:
        raise InsufficientDataError(f"{ds.n} rows cannot fill a window of {window} plus a target")
    targets = list(range(window, ds.n)) if rows is None else [int(r) for r in rows]
    bad = [r for r in targets if r < window or r >= ds.n]
    if bad:
        raise InsufficientDataError(f"rows {bad[:5]} lack a full {window}-day history")
    X = np.stack([ds.X[t - window:t].T for t in targets]) if targets else np.empty((0, ds.p, window))
    return WindowSet(X, ds.y[targets].copy(), tuple(targets), ds.feature_names)


@dataclass
class TrainResult:
    net: ConvNet
    history: list[float]

    def history_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "loss"])
        for i, loss in enumerate(self.history, 1):
            w.writerow([i, repr(float(loss))])
        return buf.getvalue()


def train(net: ConvNet, X, y, cfg: TrainConfig) -> TrainResult:
    """Mini-batch Adam on mean squared error.

    ``history[e]`` is the training-set MSE after epoch ``e`` with dropout
    disabled. Raises TrainingError if the loss stops being finite.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if len(y) < 1:
        raise InsufficientDataError("no training windows")
    rng = np.random.default_rng(cfg.seed)
    m = {k: np.zeros_like(v) for k, v in net.params.items()}
    v = {k: np.zeros_like(p) for k, p in net.params.items()}
    step = 0
    history = []
    n = len(y)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            pred, cache = net.forward(X[idx], training=True, rng=rng)
            loss, dpred = mse_loss(pred, y[idx])
            if not math.isfinite(loss):
                raise TrainingError(f"loss diverged at epoch {epoch}", epoch)
            grads = net.backward(cache, dpred)
            step += 1
            c1 = 1.0 - cfg.beta1 ** step
            c2 = 1.0 - cfg.beta2 ** step
            for k, g in grads.items():
                m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g
                v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g
                p = net.params[k]
                if cfg.weight_decay and k.endswith(".W"):
                    p = p * (1.0 - cfg.lr * cfg.weight_decay)
                net.params[k] = np.asarray(p - cfg.lr * (m[k] / c1) / (np.sqrt(v[k] / c2) + cfg.eps))
            net.touch()
        full = mse_loss(net.predict(X), y)[0]
        if not math.isfinite(full):
            raise TrainingError(f"loss diverged at epoch {epoch}", epoch)
        history.append(full)
    return TrainResult(net, history)


@dataclass
class CnnModel:
    """A trained network plus the scaling learned from the training rows."""

    net: ConvNet
    feature_mean: np.ndarray
    feature_std: np.ndarray
    target_scale: float
    feature_names: tuple[str, ...]
    history: list[float] = field(default_factory=list)

    def _scale(self, X):
        return (X - self.feature_mean[None, :, None]) / self.feature_std[None, :, None]

    def predict_windows(self, X) -> np.ndarray:
        return self.net.predict(self._scale(np.asarray(X, dtype=float))) * self.target_scale

    def to_json(self) -> str:
        d = {
            "model": "dnn",
            "feature_names": list(self.feature_names),
            "feature_mean": self.feature_mean.tolist(),
            "feature_std": self.feature_std.tolist(),
            "target_scale": float(self.target_scale),
            "network": self.net.to_dict(),
        }
        return json.dumps(d) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "CnnModel":
        d = json.loads(text)
        return cls(ConvNet.from_dict(d["network"]), np.array(d["feature_mean"]),
                   np.array(d["feature_std"]), d["target_scale"], tuple(d["feature_names"]))


def fit_cnn(ds: AlignedDataset, train_rows, net_cfg: NetworkConfig = NetworkConfig(),
            train_cfg: TrainConfig = TrainConfig()) -> CnnModel:
    """Standardize features and scale targets on the training rows, then train.

    Features are standardized per channel with the training rows' mean and
    standard deviation; the target is divided by the training maximum.
    """
    train_rows = [int(r) for r in train_rows]
    windows = make_windows(ds, net_cfg.window, [r for r in train_rows if r >= net_cfg.window])
    if len(windows.y) == 0:
        raise InsufficientDataError("no training row has a full history window")
    rows = ds.X[train_rows]
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    scale = float(np.max(np.abs(ds.y[train_rows])))
    scale = scale if scale > 0 else 1.0
    net = ConvNet(net_cfg, ds.p, seed=derive_seed(train_cfg.seed, 1))
    model = CnnModel(net, mean, std, scale, ds.feature_names)
    loop_cfg = replace(train_cfg, seed=derive_seed(train_cfg.seed, 2))
    result = train(net, model._scale(windows.X), windows.y / scale, loop_cfg)
    model.history = result.history
    return model
