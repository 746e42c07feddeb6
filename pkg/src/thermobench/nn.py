"""Feed-forward stress classifier with an auxiliary COP regression head.

The trunk is a stack of ReLU layers with inverted dropout. Two heads read
the last hidden layer: a softmax over the four stress classes and a
softplus unit that predicts COP, which feeds the physics and energy loss
terms. Training uses Adam with decoupled weight decay on weight matrices.
Everything runs in float64.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import N_CLASSES
from .physics import (
    PHYSICS_MODES,
    LossBreakdown,
    LossWeights,
    PhysicsSignals,
    energy_loss,
    energy_loss_grad,
    physics_loss,
    physics_loss_grad,
    total_loss,
)

CHECKPOINT_FORMAT = "thermobench.mlp"
CHECKPOINT_VERSION = 1


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch, message="loss became NaN"):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


@dataclass(frozen=True)
class MlpConfig:
    input_dim: int
    hidden: tuple = (256, 128, 64, 32, 16)
    n_classes: int = N_CLASSES
    dropout: float = 0.3
    weight_decay: float = 1e-4
    aux_head: bool = True
    weights: LossWeights = field(default_factory=LossWeights)
    physics_mode: str = "literal"
    reduction: str = "mean"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if isinstance(self.weights, dict):
            object.__setattr__(self, "weights", LossWeights(**self.weights))
        if self.input_dim < 1 or self.n_classes < 1 or any(h < 1 for h in self.hidden):
            raise ValueError("layer sizes must be >= 1")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.physics_mode not in PHYSICS_MODES:
            raise ValueError(f"physics_mode must be one of {PHYSICS_MODES}")

    @property
    def sizes(self):
        return (self.input_dim, *self.hidden, self.n_classes)

    def to_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


@dataclass(frozen=True)
class TrainHyper:
    epochs: int = 25
    batch_size: int = 256
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.lr <= 0:
            raise ValueError("epochs and batch_size must be >= 1, lr > 0")


def param_count(config: MlpConfig) -> int:
    sizes = config.sizes
    n = sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))
    if config.aux_head:
        last = config.hidden[-1] if config.hidden else config.input_dim
        n += last + 1
    return n


class MlpModel:
    def __init__(self, config: MlpConfig, weights, biases, aux_w=None, aux_b=0.0):
        self.config = config
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        self.aux_w = None if aux_w is None else np.asarray(aux_w, dtype=float)
        self.aux_b = np.array([float(aux_b)]) if aux_w is not None else None
        self._check()

    def _check(self):
        sizes = self.config.sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("layer count does not match config")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[i], sizes[i + 1]) or b.shape != (sizes[i + 1],):
                raise ValueError(f"layer {i} has shape {w.shape}/{b.shape}, "
                                 f"expected ({sizes[i]}, {sizes[i + 1]})")
        if self.config.aux_head:
            if self.aux_w is None or self.aux_w.shape != (sizes[-2],):
                raise ValueError("aux head shape does not match last hidden layer")
        elif self.aux_w is not None:
            raise ValueError("aux head present but disabled in config")

    def parameters(self):
        """Parameter arrays in a fixed order (mutated in place by the optimizer)."""
        ps = []
        for w, b in zip(self.weights, self.biases):
            ps += [w, b]
        if self.aux_w is not None:
            ps += [self.aux_w, self.aux_b]
        return ps

    def decay_mask(self):
        mask = []
        for _ in self.weights:
            mask += [True, False]
        if self.aux_w is not None:
            mask += [True, False]
        return mask

    def n_params(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def copy(self) -> "MlpModel":
        return MlpModel(self.config, [w.copy() for w in self.weights],
                        [b.copy() for b in self.biases],
                        None if self.aux_w is None else self.aux_w.copy(),
                        0.0 if self.aux_b is None else float(self.aux_b[0]))


def init_model(config: MlpConfig, seed=0) -> MlpModel:
    """He-uniform hidden layers, zero biases, zero output layer and aux head."""
    rng = np.random.default_rng(seed)
    sizes = config.sizes
    weights, biases = [], []
    for i in range(len(sizes) - 1):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        if i == len(sizes) - 2:
            w = np.zeros((fan_in, fan_out))
        else:
            limit = math.sqrt(6.0 / fan_in)
            w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        weights.append(w)
        biases.append(np.zeros(fan_out))
    aux_w = np.zeros(sizes[-2]) if config.aux_head else None
    return MlpModel(config, weights, biases, aux_w, 0.0)


def softmax(z):
    # class-major layout: reductions over a handful of columns are slow row-wise
    e = np.array(z.T, order="C")
    e -= e.max(axis=0)
    np.exp(e, out=e)
    e /= e.sum(axis=0)
    return e.T


def softplus(a):
    return np.logaddexp(0.0, a)


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def dropout_masks(model: MlpModel, n_rows: int, rng) -> list:
    keep = 1.0 - model.config.dropout
    return [(rng.random((n_rows, h)) < keep) / keep for h in model.config.hidden]


def _forward(model, X, masks):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.config.input_dim:
        raise ValueError(f"batch has shape {X.shape}, expected (n, {model.config.input_dim})")
    pre, acts = [], [X]
    h = X
    n_hidden = len(model.weights) - 1
    for i in range(n_hidden):
        u = h @ model.weights[i]
        u += model.biases[i]
        h = np.maximum(u, 0.0)
        if masks is not None:
            h *= masks[i]
        pre.append(u)
        acts.append(h)
    logits = h @ model.weights[-1] + model.biases[-1]
    probs = softmax(logits)
    if model.aux_w is not None:
        a = h @ model.aux_w + model.aux_b[0]
        cop = softplus(a)
    else:
        a = cop = None
    return probs, cop, (pre, acts, a)


def forward(model: MlpModel, X, train_mode: bool = False, rng=None, masks=None):
    """Class probabilities and predicted COP (``None`` without the aux head)."""
    if train_mode and masks is None and model.config.dropout > 0:
        if rng is None:
            raise ValueError("train_mode with dropout needs an rng")
        masks = dropout_masks(model, len(X), rng)
    if not train_mode:
        masks = None
    probs, cop, _ = _forward(model, X, masks)
    return probs, cop


def _composite(model, probs, cop, y, signals):
    cfg = model.config
    n = probs.shape[0]
    p_true = probs[np.arange(n), y]
    data = float(-np.mean(np.log(np.maximum(p_true, 1e-300))))
    if cop is not None and signals is not None:
        phys = physics_loss(cop, signals, cfg.physics_mode, cfg.reduction)
        energy = energy_loss(signals.heat_output, signals.power_input, cop, cfg.reduction)
    else:
        phys = energy = 0.0
    if not all(map(math.isfinite, (data, phys, energy))):
        # let the caller decide how to report divergence
        return LossBreakdown(data, phys, energy, math.nan)
    return total_loss(data, phys, energy, cfg.weights)


def loss(model, X, y, signals=None, masks=None) -> LossBreakdown:
    probs, cop, _ = _forward(model, X, masks)
    return _composite(model, probs, cop, np.asarray(y), signals)


def loss_and_grads(model: MlpModel, X, y, signals: PhysicsSignals | None = None, masks=None):
    """Composite loss and gradients aligned with ``model.parameters()``."""
    breakdown, grads, _ = _backprop(model, X, y, signals, masks)
    return breakdown, grads


def _backprop(model, X, y, signals, masks):
    cfg = model.config
    y = np.asarray(y, dtype=np.int64)
    probs, cop, (pre, acts, a) = _forward(model, X, masks)
    breakdown = _composite(model, probs, cop, y, signals)
    n = probs.shape[0]

    dz = probs.copy()
    dz[np.arange(n), y] -= 1.0
    dz /= n
    h_last = acts[-1]
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.weights)
    grads_w[-1] = h_last.T @ dz
    grads_b[-1] = dz.sum(axis=0)
    dh = dz @ model.weights[-1].T

    aux_grads = []
    if model.aux_w is not None:
        if signals is not None:
            w = cfg.weights
            dcop = (w.lambda_physics * physics_loss_grad(cop, signals, cfg.physics_mode, cfg.reduction)
                    + w.lambda_energy * energy_loss_grad(signals.heat_output, signals.power_input,
                                                         cop, cfg.reduction))
        else:
            dcop = np.zeros(n)
        da = dcop * _sigmoid(a)
        aux_grads = [h_last.T @ da, np.array([da.sum()])]
        dh += np.outer(da, model.aux_w)

    for i in range(len(model.weights) - 2, -1, -1):
        du = dh
        du *= pre[i] > 0
        if masks is not None:
            du *= masks[i]
        grads_w[i] = acts[i].T @ du
        grads_b[i] = du.sum(axis=0)
        if i > 0:
            dh = du @ model.weights[i].T

    grads = []
    for gw, gb in zip(grads_w, grads_b):
        grads += [gw, gb]
    return breakdown, grads + aux_grads, probs


def gradient_check(model: MlpModel, X, y, signals=None, masks=None, h=1e-4, floor=1e-6):
    """Max elementwise relative error between analytic and central-difference gradients.

    The relative error of one coordinate is ``|a - n| / max(|a|, |n|, floor)``.
    Parameters are perturbed in place and restored.
    """
    _, grads = loss_and_grads(model, X, y, signals, masks)
    worst = 0.0
    for p, g in zip(model.parameters(), grads):
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = loss(model, X, y, signals, masks).total
            flat[i] = old - h
            down = loss(model, X, y, signals, masks).total
            flat[i] = old
            num = (up - down) / (2 * h)
            err = abs(gflat[i] - num) / max(abs(gflat[i]), abs(num), floor)
            worst = max(worst, err)
    return worst


class Adam:
    def __init__(self, params, hyper: TrainHyper, weight_decay=0.0, decay_mask=None):
        self.params = params
        self.hyper = hyper
        self.weight_decay = weight_decay
        self.decay_mask = decay_mask or [False] * len(params)
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        h = self.hyper
        self.t += 1
        c1 = 1.0 - h.beta1**self.t
        c2 = 1.0 - h.beta2**self.t
        for p, g, m, v, decay in zip(self.params, grads, self.m, self.v, self.decay_mask):
            m *= h.beta1
            m += (1.0 - h.beta1) * g
            v *= h.beta2
            v += (1.0 - h.beta2) * np.square(g)
            denom = np.sqrt(v / c2)
            denom += h.eps
            step = np.divide(m, denom, out=denom)
            step *= h.lr / c1
            if decay and self.weight_decay:
                step += (h.lr * self.weight_decay) * p
            p -= step


def train_step(model, optimizer: Adam, X, y, signals=None, rng=None) -> LossBreakdown:
    """One Adam update on a mini-batch; returns the pre-update loss breakdown."""
    masks = None
    if model.config.dropout > 0 and rng is not None:
        masks = dropout_masks(model, len(X), rng)
    breakdown, grads = loss_and_grads(model, X, y, signals, masks)
    if not math.isfinite(breakdown.total):
        raise FloatingPointError("non-finite loss")
    optimizer.step(grads)
    return breakdown


def evaluate(model, X, y, signals=None, chunk=1024):
    """Eval-mode loss breakdown and accuracy over a full split."""
    n = len(X)
    sums = np.zeros(4)
    correct = 0
    for start in range(0, n, chunk):
        sl = slice(start, min(n, start + chunk))
        s = signals.take(sl) if signals is not None else None
        probs, cop, _ = _forward(model, X[sl], None)
        b = _composite(model, probs, cop, y[sl], s)
        m = sl.stop - sl.start
        sums += m * np.array([b.data, b.physics, b.energy, b.total])
        correct += int(np.sum(np.argmax(probs, axis=1) == y[sl]))
    sums /= n
    return LossBreakdown(*map(float, sums)), correct / n


@dataclass
class TrainHistory:
    epochs: list = field(default_factory=list)
    seconds: float = 0.0

    def to_dict(self):
        return {"epochs": self.epochs, "seconds": self.seconds}


def train(config: MlpConfig, hyper: TrainHyper, X_train, y_train, signals_train=None,
          X_val=None, y_val=None, signals_val=None):
    """Mini-batch training for a fixed number of epochs (no early stopping).

    Returns the final-epoch model and its :class:`TrainHistory`. The same
    ``hyper.seed`` reproduces initialization, shuffling and dropout masks.
    """
    X_train = np.asarray(X_train, dtype=float)
    y_train = np.asarray(y_train, dtype=np.int64)
    if len(X_train) == 0:
        raise ValueError("empty training split")
    if X_val is None or len(X_val) == 0:
        raise ValueError("empty validation split")
    X_val = np.asarray(X_val, dtype=float)
    y_val = np.asarray(y_val, dtype=np.int64)

    init_ss, shuffle_ss, drop_ss = np.random.SeedSequence(hyper.seed).spawn(3)
    model = init_model(config, init_ss)
    shuffle_rng = np.random.default_rng(shuffle_ss)
    drop_rng = np.random.default_rng(drop_ss)
    opt = Adam(model.parameters(), hyper, config.weight_decay, model.decay_mask())
    history = TrainHistory()
    uses_signals = config.aux_head and signals_train is not None

    t0 = time.perf_counter()
    n = len(X_train)
    for epoch in range(hyper.epochs):
        order = shuffle_rng.permutation(n)
        sums = np.zeros(4)
        correct = 0
        for start in range(0, n, hyper.batch_size):
            idx = order[start:start + hyper.batch_size]
            s = signals_train.take(idx) if uses_signals else None
            masks = dropout_masks(model, idx.size, drop_rng) if config.dropout > 0 else None
            yb = y_train[idx]
            b, grads, probs = _backprop(model, X_train[idx], yb, s, masks)
            if not math.isfinite(b.total):
                raise TrainingDiverged(epoch)
            opt.step(grads)
            sums += idx.size * np.array([b.data, b.physics, b.energy, b.total])
            correct += int(np.sum(np.argmax(probs, axis=1) == yb))
        sums /= n
        train_acc = correct / n
        val_b, val_acc = evaluate(model, X_val, y_val, signals_val if uses_signals else None)
        if not math.isfinite(val_b.total):
            raise TrainingDiverged(epoch, "validation loss became NaN")
        history.epochs.append({
            "epoch": epoch + 1,
            "train": dict(zip(("data", "physics", "energy", "total"), map(float, sums))),
            "train_acc": train_acc,
            "val": val_b.to_dict(),
            "val_acc": val_acc,
        })
    history.seconds = max(time.perf_counter() - t0, 1e-9)
    return model, history


def predict_proba(model: MlpModel, X, chunk=8192):
    X = np.asarray(X, dtype=float)
    return np.concatenate([_forward(model, X[i:i + chunk], None)[0]
                           for i in range(0, len(X), chunk)]) if len(X) else \
        np.empty((0, model.config.n_classes))


def predict_cop(model: MlpModel, X):
    return forward(model, np.asarray(X, dtype=float))[1]


def predict(model: MlpModel, X) -> np.ndarray:
    return np.argmax(predict_proba(model, X), axis=1)


def model_blob(model: MlpModel) -> dict:
    """JSON-ready checkpoint: config echo, layer shapes, row-major weights."""
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": model.config.to_dict(),
        "layers": [
            {"shape": list(w.shape), "weight": w.ravel(order="C").tolist(), "bias": b.tolist()}
            for w, b in zip(model.weights, model.biases)
        ],
        "aux": None if model.aux_w is None else {
            "weight": model.aux_w.tolist(), "bias": float(model.aux_b[0])},
    }


def save_checkpoint(model: MlpModel, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(model_blob(model)))
    return path


def model_from_blob(blob) -> MlpModel:
    if blob.get("format") != CHECKPOINT_FORMAT:
        raise ValueError("not an MLP checkpoint")
    if blob.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {blob.get('version')}")
    cfg = dict(blob["config"])
    cfg["weights"] = LossWeights(**cfg["weights"])
    config = MlpConfig(**cfg)
    weights, biases = [], []
    prev = None
    for layer in blob["layers"]:
        rows, cols = layer["shape"]
        if prev is not None and rows != prev:
            raise ValueError(f"layer shape chain broken: {prev} -> {rows}")
        prev = cols
        w = np.asarray(layer["weight"], dtype=float)
        if w.size != rows * cols:
            raise ValueError("weight size does not match declared shape")
        weights.append(w.reshape(rows, cols))
        biases.append(np.asarray(layer["bias"], dtype=float))
    aux = blob.get("aux")
    return MlpModel(config, weights, biases,
                    None if aux is None else aux["weight"],
                    0.0 if aux is None else aux["bias"])


def load_checkpoint(path) -> MlpModel:
    return model_from_blob(json.loads(Path(path).read_text()))
