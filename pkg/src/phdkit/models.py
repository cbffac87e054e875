"""Hypotheses, losses, and the empirical-risk-minimization trainer.

Hypotheses are linear models or small MLPs (leaky-ReLU slope 0.1, optional
batch normalization before each hidden activation) scored by a manual
forward pass; gradients come from hand-written backpropagation validated by
:func:`grad_check`. Training uses Adam with the AMSGrad correction, which
keeps a per-parameter running maximum of the second-moment estimate.

Binary tasks use labels {0, 1} internally; the signed-score convention
(+1 at score >= 0) only appears at the loss boundary.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import ConfigError, ContractError, DegenerateInputError, FormatError, TrainingError
from .numkit import child_rng

BN_EPS = 1e-5
BN_MOMENTUM = 0.9
BLOB_MAGIC = b"PHYP"
BLOB_VERSION = 1


@dataclass(frozen=True)
class Arch:
    """Network shape: empty ``hidden`` means a plain linear model."""

    in_dim: int
    hidden: tuple[int, ...] = ()
    out_dim: int = 1
    batch_norm: bool = False
    negative_slope: float = 0.1

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ContractError(f"bad arch dims in={self.in_dim} out={self.out_dim}")
        if any(w < 1 for w in self.hidden):
            raise ContractError(f"bad hidden widths {self.hidden}")
        object.__setattr__(self, "hidden", tuple(int(w) for w in self.hidden))

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.in_dim, *self.hidden, self.out_dim)

    def param_count(self) -> int:
        ws = self.widths
        n = sum(ws[i] * ws[i + 1] + ws[i + 1] for i in range(len(ws) - 1))
        if self.batch_norm:
            n += 2 * sum(self.hidden)
        return n

    def bn_stat_count(self) -> int:
        return 2 * sum(self.hidden) if self.batch_norm else 0


def linear_arch(in_dim: int, out_dim: int = 1) -> Arch:
    return Arch(in_dim, (), out_dim)


def mlp_arch(in_dim: int, hidden=(64, 64, 64, 64), out_dim: int = 1, batch_norm: bool = True) -> Arch:
    """Desk-scale default mirroring a five-layer fully connected net."""
    return Arch(in_dim, tuple(hidden), out_dim, batch_norm=batch_norm)


@dataclass(frozen=True)
class Hypothesis:
    """A deterministic scoring function: architecture + flat parameters."""

    arch: Arch
    params: np.ndarray
    bn_stats: np.ndarray = field(default_factory=lambda: np.zeros(0))
    seed: int | None = None
    note: str = ""

    def __post_init__(self):
        p = np.asarray(self.params, dtype=np.float64).ravel()
        if p.shape[0] != self.arch.param_count():
            raise ContractError(
                f"parameter count {p.shape[0]} does not match architecture ({self.arch.param_count()})"
            )
        s = np.asarray(self.bn_stats, dtype=np.float64).ravel()
        if s.shape[0] != self.arch.bn_stat_count():
            raise ContractError("batch-norm statistics do not match architecture")
        object.__setattr__(self, "params", p)
        object.__setattr__(self, "bn_stats", s)

    @property
    def k(self) -> int:
        """Number of classes this hypothesis distinguishes."""
        return 2 if self.arch.out_dim == 1 else self.arch.out_dim


def _unpack(arch: Arch, params: np.ndarray):
    """Views (W, b, gamma, beta) per layer; gamma/beta None without BN."""
    ws = arch.widths
    out, off = [], 0
    for i in range(len(ws) - 1):
        fan_in, fan_out = ws[i], ws[i + 1]
        W = params[off : off + fan_in * fan_out].reshape(fan_in, fan_out)
        off += fan_in * fan_out
        b = params[off : off + fan_out]
        off += fan_out
        gamma = beta = None
        if arch.batch_norm and i < len(arch.hidden):
            gamma = params[off : off + fan_out]
            off += fan_out
            beta = params[off : off + fan_out]
            off += fan_out
        out.append((W, b, gamma, beta))
    return out


def _unpack_bn(arch: Arch, bn_stats: np.ndarray):
    out, off = [], 0
    for w in arch.hidden:
        mean = bn_stats[off : off + w]
        var = bn_stats[off + w : off + 2 * w]
        off += 2 * w
        out.append((mean, var))
    return out


def init_params(arch: Arch, seed: int = 0) -> np.ndarray:
    """He-style hidden initialization (adjusted for the leaky-ReLU slope)
    with a zero output layer, so small trainings converge in few epochs."""
    rng = child_rng(seed, 4)
    params = np.zeros(arch.param_count())
    layers = _unpack(arch, params)
    gain = math.sqrt(2.0 / (1.0 + arch.negative_slope**2))
    for i, (W, b, gamma, beta) in enumerate(layers):
        if i < len(arch.hidden):
            W[...] = gain / math.sqrt(W.shape[0]) * rng.standard_normal(W.shape)
        b[...] = 0.0
        if gamma is not None:
            gamma[...] = 1.0
            beta[...] = 0.0
    return params


def init_bn_stats(arch: Arch) -> np.ndarray:
    stats = np.zeros(arch.bn_stat_count())
    for mean, var in _unpack_bn(arch, stats):
        var[...] = 1.0
    return stats


def _forward(arch: Arch, params: np.ndarray, X: np.ndarray, bn_stats: np.ndarray | None,
             training: bool, cache: list | None = None, bn_update: np.ndarray | None = None) -> np.ndarray:
    layers = _unpack(arch, params)
    running = _unpack_bn(arch, bn_stats) if bn_stats is not None and bn_stats.size else None
    updated = _unpack_bn(arch, bn_update) if bn_update is not None and bn_update.size else None
    a = X
    for i, (W, b, gamma, beta) in enumerate(layers):
        z = a @ W + b
        is_hidden = i < len(arch.hidden)
        if is_hidden and arch.batch_norm:
            if training:
                mu = z.mean(axis=0)
                var = z.var(axis=0)
                if updated is not None:
                    updated[i][0][...] = BN_MOMENTUM * updated[i][0] + (1 - BN_MOMENTUM) * mu
                    updated[i][1][...] = BN_MOMENTUM * updated[i][1] + (1 - BN_MOMENTUM) * var
            else:
                mu, var = running[i]
            inv_std = 1.0 / np.sqrt(var + BN_EPS)
            zhat = (z - mu) * inv_std
            out = gamma * zhat + beta
        else:
            zhat = inv_std = None
            out = z
        if is_hidden:
            act = np.where(out > 0, out, arch.negative_slope * out)
        else:
            act = out
        if cache is not None:
            cache.append((a, z, zhat, inv_std, out))
        a = act
    return a


def scores(h: Hypothesis, X) -> np.ndarray:
    """n x k score matrix (k = 1 signed score for binary hypotheses)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != h.arch.in_dim:
        raise ContractError(f"feature dim {X.shape} does not match arch in_dim={h.arch.in_dim}")
    return _forward(h.arch, h.params, X, h.bn_stats, training=False)


def predict(h: Hypothesis, X) -> np.ndarray:
    """Per-row label: argmax of scores; binary tie at score 0 goes to class 1."""
    s = scores(h, X)
    if h.arch.out_dim == 1:
        return (s[:, 0] >= 0).astype(np.int64)
    return np.argmax(s, axis=1).astype(np.int64)


def _backward(arch: Arch, params: np.ndarray, cache: list, dscores: np.ndarray) -> np.ndarray:
    layers = _unpack(arch, params)
    grad = np.zeros_like(params)
    glayers = _unpack(arch, grad)
    delta = dscores
    for i in reversed(range(len(layers))):
        W, b, gamma, beta = layers[i]
        gW, gb, ggamma, gbeta = glayers[i]
        a_in, z, zhat, inv_std, out = cache[i]
        is_hidden = i < len(arch.hidden)
        if is_hidden:
            dout = delta * np.where(out > 0, 1.0, arch.negative_slope)
        else:
            dout = delta
        if is_hidden and arch.batch_norm:
            # Batch-norm backward with batch statistics.
            m = z.shape[0]
            ggamma[...] = np.sum(dout * zhat, axis=0)
            gbeta[...] = np.sum(dout, axis=0)
            dzhat = dout * gamma
            dz = (inv_std / m) * (m * dzhat - dzhat.sum(axis=0) - zhat * np.sum(dzhat * zhat, axis=0))
        else:
            dz = dout
        gW[...] = a_in.T @ dz
        gb[...] = dz.sum(axis=0)
        delta = dz @ W.T
    return grad


def _loss_and_dscores(kind: str, s: np.ndarray, y: np.ndarray, w: np.ndarray) -> tuple[float, np.ndarray]:
    """Weighted surrogate loss and its gradient w.r.t. the score matrix."""
    wsum = float(w.sum())
    if kind == "logistic":
        t = 2.0 * y - 1.0
        margin = t * s[:, 0]
        loss = float(np.sum(w * np.logaddexp(0.0, -margin)) / wsum)
        # d/ds log(1+exp(-t s)) = -t * sigmoid(-t s)
        sig = 1.0 / (1.0 + np.exp(np.clip(margin, -500, 500)))
        ds = np.zeros_like(s)
        ds[:, 0] = -t * sig * w / wsum
        return loss, ds
    if kind == "cross_entropy":
        shifted = s - s.max(axis=1, keepdims=True)
        logz = np.log(np.sum(np.exp(shifted), axis=1))
        logp = shifted[np.arange(s.shape[0]), y] - logz
        loss = float(np.sum(-w * logp) / wsum)
        p = np.exp(shifted - logz[:, None])
        p[np.arange(s.shape[0]), y] -= 1.0
        return loss, p * (w / wsum)[:, None]
    raise ContractError(f"loss kind {kind!r} is not a differentiable training surrogate")


@dataclass(frozen=True)
class LossSpec:
    """Loss selector with its bound M and triangle-inequality flag."""

    kind: str
    rho: float = 0.0
    bound: float = 1.0
    triangle: bool = False

    def __post_init__(self):
        if self.kind not in ("zero_one", "margin", "logistic", "cross_entropy"):
            raise ConfigError(f"unknown loss kind {self.kind!r}")
        if self.kind == "margin" and not self.rho > 0:
            raise ContractError(f"margin loss needs rho > 0, got {self.rho}")
        if self.kind == "zero_one" and not (self.bound == 1.0 and self.triangle):
            raise ConfigError("zero-one loss is bounded by 1 and satisfies the triangle inequality")
        if self.kind == "margin" and self.bound != 1.0:
            raise ConfigError("margin loss is bounded by 1")
        if self.kind in ("logistic", "cross_entropy") and self.triangle:
            raise ConfigError("training surrogates do not satisfy the triangle inequality")


def zero_one() -> LossSpec:
    return LossSpec("zero_one", bound=1.0, triangle=True)


def margin(rho: float) -> LossSpec:
    return LossSpec("margin", rho=rho, bound=1.0, triangle=False)


def logistic() -> LossSpec:
    return LossSpec("logistic", bound=math.inf, triangle=False)


def cross_entropy() -> LossSpec:
    return LossSpec("cross_entropy", bound=math.inf, triangle=False)


def _reference_labels(labeler, D: Dataset) -> np.ndarray:
    if labeler is None:
        if D.y is None:
            raise ContractError("dataset is unlabeled and no labeler hypothesis was given")
        return D.y
    if isinstance(labeler, Hypothesis):
        return predict(labeler, D.X)
    return np.asarray(labeler, dtype=np.int64)


def empirical_risk(h: Hypothesis, labeler, D: Dataset, loss: LossSpec) -> float:
    """Mean loss of h against a labeler (labels, an array, or a hypothesis)."""
    if D.n == 0:
        raise DegenerateInputError("cannot evaluate risk on an empty dataset")
    ref = _reference_labels(labeler, D)
    if loss.kind == "zero_one":
        return float(np.mean(predict(h, D.X) != ref))
    if loss.kind == "margin":
        s = scores(h, D.X)
        if s.shape[1] < 2:
            raise ContractError("margin loss needs a multiclass score matrix (out_dim >= 2)")
        picked = s[np.arange(D.n), ref]
        masked = s.copy()
        masked[np.arange(D.n), ref] = -np.inf
        gap = picked - masked.max(axis=1)
        return float(np.mean(gap <= loss.rho))
    s = scores(h, D.X)
    w = np.ones(D.n)
    if loss.kind == "logistic" and s.shape[1] != 1:
        raise ContractError("logistic loss applies to single-score binary hypotheses")
    val, _ = _loss_and_dscores(loss.kind, s, ref, w)
    return val


def accuracy(h: Hypothesis, D: Dataset) -> float:
    if D.y is None:
        raise ContractError("accuracy needs labels")
    return float(np.mean(predict(h, D.X) == D.y))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 64
    lr: float = 1e-3
    seed: int = 0
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if not self.lr > 0:
            raise ConfigError(f"learning rate must be > 0, got {self.lr}")
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be >= 1, got {self.batch_size}")


class AmsGrad:
    """Adam with the AMSGrad max-of-second-moment correction.

    ``vmax`` is monotone non-decreasing per parameter across steps.
    """

    def __init__(self, dim: int, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(dim)
        self.v = np.zeros(dim)
        self.vmax = np.zeros(dim)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        np.maximum(self.vmax, self.v, out=self.vmax)
        mhat = self.m / (1 - self.beta1**self.t)
        vhat = self.vmax / (1 - self.beta2**self.t)
        params -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def _weight_mask(arch: Arch) -> np.ndarray:
    """True on weight-matrix entries; weight decay skips biases and BN."""
    mask = np.zeros(arch.param_count(), dtype=bool)
    probe = np.zeros(arch.param_count())
    for W, b, gamma, beta in _unpack(arch, probe):
        W[...] = 1.0
    mask[probe != 0] = True
    return mask


def default_surrogate(arch: Arch) -> LossSpec:
    return logistic() if arch.out_dim == 1 else cross_entropy()


def train_erm(D: Dataset, arch: Arch, cfg: TrainConfig, surrogate: LossSpec | None = None,
              sample_weight=None) -> Hypothesis:
    """Seeded minibatch ERM with Adam-AMSGrad; returns a frozen hypothesis."""
    h, _ = train_erm_traced(D, arch, cfg, surrogate, sample_weight)
    return h


def train_erm_traced(D: Dataset, arch: Arch, cfg: TrainConfig, surrogate: LossSpec | None = None,
                     sample_weight=None, metric=None, keep_best: bool = False
                     ) -> tuple[Hypothesis, tuple[float, ...]]:
    """ERM with an optional per-epoch metric trace.

    ``metric`` is called with a snapshot hypothesis after every epoch. With
    ``keep_best`` the returned hypothesis is the best-metric checkpoint and
    the recorded trace is the running minimum (hence non-increasing).
    """
    if D.n == 0:
        raise DegenerateInputError("cannot train on an empty dataset")
    if not D.labeled:
        raise ContractError("train_erm needs a labeled dataset")
    if arch.in_dim != D.d:
        raise ContractError(f"arch in_dim={arch.in_dim} does not match data d={D.d}")
    surrogate = surrogate or default_surrogate(arch)
    if surrogate.kind == "logistic" and arch.out_dim != 1:
        raise ContractError("logistic surrogate needs out_dim == 1")
    if surrogate.kind == "cross_entropy" and arch.out_dim < 2:
        raise ContractError("cross-entropy surrogate needs out_dim >= 2")
    if surrogate.kind in ("zero_one", "margin"):
        raise ContractError(f"{surrogate.kind} is not differentiable; use a training surrogate")
    if surrogate.kind == "cross_entropy" and D.y.size and D.y.max() >= arch.out_dim:
        raise ContractError("labels exceed the architecture's output count")

    w = np.ones(D.n) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    if w.shape != (D.n,):
        raise ContractError("sample_weight length does not match n")

    rng = child_rng(cfg.seed, 5)
    params = init_params(arch, cfg.seed)
    bn_stats = init_bn_stats(arch)
    opt = AmsGrad(params.shape[0], lr=cfg.lr)
    wd_mask = _weight_mask(arch) if cfg.weight_decay > 0 else None

    trace: list[float] = []
    best_val = math.inf
    best_state: tuple[np.ndarray, np.ndarray] | None = None
    for epoch in range(cfg.epochs):
        order = rng.permutation(D.n)
        for start in range(0, D.n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            cache: list = []
            s = _forward(arch, params, D.X[idx], None, training=True, cache=cache, bn_update=bn_stats)
            loss, ds = _loss_and_dscores(surrogate.kind, s, D.y[idx], w[idx])
            if not math.isfinite(loss):
                raise TrainingError("training loss diverged to a non-finite value", epoch=epoch)
            grad = _backward(arch, params, cache, ds)
            if wd_mask is not None:
                grad[wd_mask] += cfg.weight_decay * params[wd_mask]
            opt.step(params, grad)
        if metric is not None:
            snap = Hypothesis(arch, params.copy(), bn_stats.copy(), seed=cfg.seed)
            val = float(metric(snap))
            if keep_best:
                if val < best_val:
                    best_val = val
                    best_state = (params.copy(), bn_stats.copy())
                trace.append(best_val)
            else:
                trace.append(val)
    if not np.all(np.isfinite(params)):
        raise TrainingError("parameters diverged to non-finite values", epoch=cfg.epochs - 1)
    if keep_best and best_state is not None:
        params, bn_stats = best_state
    meta = f"erm {surrogate.kind} epochs={cfg.epochs} batch={cfg.batch_size} lr={cfg.lr} wd={cfg.weight_decay}"
    return Hypothesis(arch, params, bn_stats, seed=cfg.seed, note=meta), tuple(trace)


def full_batch_loss(h: Hypothesis, D: Dataset, surrogate: LossSpec) -> float:
    """Training-surrogate loss of a hypothesis on a whole dataset (inference mode)."""
    s = scores(h, D.X)
    val, _ = _loss_and_dscores(surrogate.kind, s, D.y, np.ones(D.n))
    return val


def grad_check(arch: Arch, loss: LossSpec, probe: Dataset, eps: float = 1e-5, seed: int = 0) -> float:
    """Central finite differences against the analytic gradient.

    Returns the max over parameters of |analytic - numeric| scaled by
    max(1, |analytic| + |numeric|). The probe is evaluated as one batch in
    training mode so batch-norm paths are exercised too.
    """
    if probe.n > 8:
        raise ContractError(f"probe must be small (n <= 8), got n={probe.n}")
    if probe.y is None:
        raise ContractError("probe must be labeled")
    params = init_params(arch, seed)
    y = probe.y
    w = np.ones(probe.n)

    def f(p: np.ndarray) -> float:
        s = _forward(arch, p, probe.X, None, training=True)
        return _loss_and_dscores(loss.kind, s, y, w)[0]

    cache: list = []
    s = _forward(arch, params, probe.X, None, training=True, cache=cache)
    _, ds = _loss_and_dscores(loss.kind, s, y, w)
    analytic = _backward(arch, params, cache, ds)

    worst = 0.0
    for i in range(params.shape[0]):
        p = params.copy()
        p[i] += eps
        hi = f(p)
        p[i] -= 2 * eps
        lo = f(p)
        numeric = (hi - lo) / (2 * eps)
        denom = max(1.0, abs(analytic[i]) + abs(numeric))
        worst = max(worst, abs(analytic[i] - numeric) / denom)
    return worst


# ---------------------------------------------------------------------------
# Handy constructors for exactly specified hypotheses
# ---------------------------------------------------------------------------


def linear_hypothesis(w, b, note: str = "") -> Hypothesis:
    """Binary linear hypothesis with explicit weights and bias."""
    w = np.atleast_1d(np.asarray(w, dtype=np.float64))
    arch = linear_arch(w.shape[0], 1)
    params = np.concatenate([w, [float(b)]])
    return Hypothesis(arch, params, note=note)


def linear_multiclass_hypothesis(W, b, note: str = "") -> Hypothesis:
    """Multiclass linear hypothesis; W is (d, k), b is (k,)."""
    W = np.asarray(W, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    arch = linear_arch(W.shape[0], W.shape[1])
    params = np.concatenate([W.ravel(), b.ravel()])
    return Hypothesis(arch, params, note=note)


def constant_hypothesis(d: int, label: int, k: int = 2) -> Hypothesis:
    """Predicts one class everywhere."""
    if k == 2:
        return linear_hypothesis(np.zeros(d), 1.0 if label == 1 else -1.0, note=f"const {label}")
    b = np.zeros(k)
    b[label] = 1.0
    return linear_multiclass_hypothesis(np.zeros((d, k)), b, note=f"const {label}")


def stump_hypothesis(feature: int, threshold: float, polarity: int, d: int) -> Hypothesis:
    """Decision stump as an exact linear hypothesis.

    Predicts class 1 iff polarity * (x[feature] - threshold) >= 0.
    """
    if polarity not in (-1, 1):
        raise ContractError(f"polarity must be +1 or -1, got {polarity}")
    w = np.zeros(d)
    w[feature] = float(polarity)
    return linear_hypothesis(w, -float(polarity) * float(threshold),
                             note=f"stump f{feature} t={threshold:.6g} p={polarity:+d}")


# ---------------------------------------------------------------------------
# Serialization: binary blob + JSON sidecar
# ---------------------------------------------------------------------------


def save_hypothesis(h: Hypothesis, path) -> None:
    path = str(path)
    with open(path, "wb") as f:
        f.write(BLOB_MAGIC)
        f.write(struct.pack(">III", BLOB_VERSION, h.params.shape[0], h.bn_stats.shape[0]))
        f.write(h.params.astype(">f8").tobytes())
        f.write(h.bn_stats.astype(">f8").tobytes())
    sidecar = {
        "format": "phdkit-hypothesis",
        "version": BLOB_VERSION,
        "arch": {
            "in_dim": h.arch.in_dim,
            "hidden": list(h.arch.hidden),
            "out_dim": h.arch.out_dim,
            "batch_norm": h.arch.batch_norm,
            "negative_slope": h.arch.negative_slope,
        },
        "seed": h.seed,
        "note": h.note,
        "k": h.k,
    }
    with open(path + ".json", "w") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
        f.write("\n")


def load_hypothesis(path) -> Hypothesis:
    path = str(path)
    with open(path + ".json") as f:
        sidecar = json.load(f)
    if sidecar.get("format") != "phdkit-hypothesis":
        raise FormatError(f"{path}.json is not a hypothesis sidecar")
    a = sidecar["arch"]
    arch = Arch(a["in_dim"], tuple(a["hidden"]), a["out_dim"], a["batch_norm"], a["negative_slope"])
    with open(path, "rb") as f:
        buf = f.read()
    if buf[:4] != BLOB_MAGIC:
        raise FormatError(f"bad hypothesis blob magic in {path}", offset=0)
    version, n_params, n_bn = struct.unpack_from(">III", buf, 4)
    if version != BLOB_VERSION:
        raise FormatError(f"unsupported hypothesis blob version {version}")
    need = 16 + 8 * (n_params + n_bn)
    if len(buf) < need:
        raise FormatError(f"truncated hypothesis blob {path}", offset=len(buf))
    params = np.frombuffer(buf, dtype=">f8", count=n_params, offset=16).astype(np.float64)
    bn = np.frombuffer(buf, dtype=">f8", count=n_bn, offset=16 + 8 * n_params).astype(np.float64)
    return Hypothesis(arch, params, bn, seed=sidecar.get("seed"), note=sidecar.get("note", ""))
