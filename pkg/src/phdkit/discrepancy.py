"""Domain discrepancy measures.

Implements the paired-hypotheses discrepancy (the expected loss between two
fixed hypotheses under the target sample) next to the supremum-based rivals
it is compared with: the proxy distance against the constant-one reference,
the source-guided discrepancy, and the full discrepancy distance. On finite
stump classes the suprema are computed exactly by enumeration; for trained
architectures they are estimated adversarially, which is precisely where
complex classes overestimate.

Also houses exact empirical Wasserstein-1 (sorted coupling in 1-D, min-cost
perfect matching otherwise) and the binned L1 distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .data import Dataset
from .errors import CapacityError, ConfigError, ContractError, DegenerateInputError
from .models import (
    Arch,
    Hypothesis,
    LossSpec,
    TrainConfig,
    constant_hypothesis,
    empirical_risk,
    predict,
    scores,
    stump_hypothesis,
    train_erm_traced,
    zero_one,
)
from .numkit import child_rng

W1_ASSIGNMENT_CAP = 512
DISC_CLASS_CAP = 4096
HIST_CELL_CAP = 1 << 24


@dataclass(frozen=True)
class DiscrepancyReport:
    """One discrepancy estimate plus how it was obtained."""

    measure: str
    value: float
    method: str  # closed-form | adversarial | exact-enumeration | assignment
    details: dict = field(default_factory=dict)
    seeds: tuple[int, ...] = ()
    n_source: int | None = None
    n_target: int | None = None

    def __post_init__(self):
        if self.value < -1e-12:
            raise ContractError(f"discrepancy value must be >= 0, got {self.value}")

    def to_dict(self) -> dict:
        return {
            "measure": self.measure,
            "value": self.value,
            "method": self.method,
            "details": dict(sorted(self.details.items())),
            "seeds": list(self.seeds),
            "n_source": self.n_source,
            "n_target": self.n_target,
        }

    @staticmethod
    def csv_header() -> list[str]:
        return ["measure", "value", "method", "n_source", "n_target", "seeds"]

    def csv_row(self) -> list[str]:
        return [
            self.measure,
            repr(self.value),
            self.method,
            "" if self.n_source is None else str(self.n_source),
            "" if self.n_target is None else str(self.n_target),
            ";".join(map(str, self.seeds)),
        ]


# ---------------------------------------------------------------------------
# Finite hypothesis classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StumpClass:
    """Every decision stump distinguishable on a sample, plus both constants.

    Member order is fixed for deterministic tie-breaking: features
    ascending, thresholds ascending, polarity +1 before -1, constants
    (class 1 first) at the end.
    """

    d: int
    features: tuple[int, ...]
    thresholds: tuple[tuple[float, ...], ...]
    include_constants: bool = True

    @classmethod
    def from_data(cls, *sources, features=None) -> "StumpClass":
        mats = [s.X if isinstance(s, Dataset) else np.asarray(s, dtype=np.float64) for s in sources]
        if not mats:
            raise ContractError("need at least one sample to build a stump class")
        X = np.vstack(mats)
        if X.shape[0] == 0:
            raise DegenerateInputError("cannot build a stump class from empty data")
        d = X.shape[1]
        feats = tuple(range(d)) if features is None else tuple(int(f) for f in features)
        ths = []
        for j in feats:
            u = np.unique(X[:, j])
            ths.append(tuple(((u[:-1] + u[1:]) / 2.0).tolist()))
        return cls(d, feats, tuple(ths))

    @property
    def size(self) -> int:
        n = 2 * sum(len(t) for t in self.thresholds)
        return n + (2 if self.include_constants else 0)

    def members(self):
        """(feature, threshold, polarity) triples; constants use feature -1."""
        for j, ths in zip(self.features, self.thresholds):
            for t in ths:
                yield (j, t, 1)
                yield (j, t, -1)
        if self.include_constants:
            yield (-1, math.inf, 1)
            yield (-1, math.inf, -1)

    def hypothesis(self, member) -> Hypothesis:
        j, t, pol = member
        if j < 0:
            return constant_hypothesis(self.d, 1 if pol > 0 else 0)
        return stump_hypothesis(j, t, pol, self.d)

    def hypotheses(self):
        return [self.hypothesis(m) for m in self.members()]

    def prediction_matrix(self, X) -> np.ndarray:
        """Signed predictions, one row per member, entries in {-1, +1}."""
        X = np.asarray(X, dtype=np.float64)
        rows = []
        for j, ths in zip(self.features, self.thresholds):
            if not ths:
                continue
            t = np.asarray(ths)
            plus = np.where(X[:, j][None, :] >= t[:, None], 1, -1).astype(np.int8)
            inter = np.empty((2 * len(ths), X.shape[0]), dtype=np.int8)
            inter[0::2] = plus
            inter[1::2] = -plus
            rows.append(inter)
        if self.include_constants:
            rows.append(np.ones((1, X.shape[0]), dtype=np.int8))
            rows.append(-np.ones((1, X.shape[0]), dtype=np.int8))
        if not rows:
            raise DegenerateInputError("stump class is empty")
        return np.vstack(rows)


class ExplicitClass:
    """A finite class given by explicit hypotheses or a prediction matrix."""

    def __init__(self, hypotheses=None, matrix=None):
        if (hypotheses is None) == (matrix is None):
            raise ContractError("pass exactly one of hypotheses or matrix")
        self._hyps = list(hypotheses) if hypotheses is not None else None
        self._matrix = None if matrix is None else np.asarray(matrix, dtype=np.int8)

    @property
    def size(self) -> int:
        return len(self._hyps) if self._hyps is not None else self._matrix.shape[0]

    def prediction_matrix(self, X) -> np.ndarray:
        if self._matrix is not None:
            if self._matrix.shape[1] != np.asarray(X).shape[0]:
                raise ContractError("explicit matrix width does not match sample size")
            return self._matrix
        out = np.empty((len(self._hyps), np.asarray(X).shape[0]), dtype=np.int8)
        for i, h in enumerate(self._hyps):
            out[i] = np.where(predict(h, X) == 1, 1, -1).astype(np.int8)
        return out


def stump_erm(cls: StumpClass, D: Dataset) -> Hypothesis:
    """Exact zero-one empirical risk minimizer over the stump class."""
    if not D.labeled:
        raise ContractError("stump ERM needs labels")
    if D.n == 0:
        raise DegenerateInputError("cannot fit on an empty dataset")
    y = D.y
    n = D.n
    n1 = int(np.sum(y == 1))
    best_risk, best = 2.0, None
    for j, ths in zip(cls.features, cls.thresholds):
        if not ths:
            continue
        t = np.asarray(ths)
        order = np.argsort(D.X[:, j], kind="stable")
        xs = D.X[order, j]
        ys = y[order]
        pos = np.searchsorted(xs, t, side="left")
        cum1 = np.concatenate([[0], np.cumsum(ys == 1)])
        below1 = cum1[pos]           # labeled 1 but predicted 0 by pol +
        below0 = pos - below1
        # pol +: predicts 1 at x >= t -> errors: 1-labeled below, 0-labeled above
        risk_plus = (below1 + (n - n1 - below0)) / n
        risk_minus = 1.0 - risk_plus
        for risks, pol in ((risk_plus, 1), (risk_minus, -1)):
            i = int(np.argmin(risks))
            if risks[i] < best_risk - 1e-15:
                best_risk, best = float(risks[i]), (j, float(t[i]), pol)
    if cls.include_constants:
        for pol, risk in ((1, (n - n1) / n), (-1, n1 / n)):
            if risk < best_risk - 1e-15:
                best_risk, best = float(risk), (-1, math.inf, pol)
    if best is None:
        best = (-1, math.inf, 1)
    return cls.hypothesis(best)


# ---------------------------------------------------------------------------
# Paired hypotheses discrepancy
# ---------------------------------------------------------------------------


def phd(h1: Hypothesis, h2: Hypothesis, T: Dataset, loss: LossSpec | None = None,
        exclude=None) -> DiscrepancyReport:
    """Empirical loss between two fixed hypotheses on target rows.

    Rows flagged as consumed by semi-supervised training (or listed in
    ``exclude``) are dropped so the estimate only sees unseen data.
    """
    loss = loss or zero_one()
    if T.n == 0:
        raise DegenerateInputError("target dataset is empty")
    keep = np.ones(T.n, dtype=bool)
    if T.consumed is not None:
        keep &= ~T.consumed
    if exclude is not None:
        keep[np.asarray(exclude, dtype=np.int64)] = False
    idx = np.flatnonzero(keep)
    if idx.size == 0:
        raise DegenerateInputError("all target rows are excluded from the discrepancy estimate")
    Tk = T.take(idx)
    value = empirical_risk(h1, h2, Tk, loss)
    return DiscrepancyReport(
        measure="phd",
        value=value,
        method="closed-form",
        details={"loss": loss.kind, "excluded": int(T.n - idx.size)},
        n_target=int(idx.size),
    )


# ---------------------------------------------------------------------------
# Exact suprema on finite classes (zero-one loss)
# ---------------------------------------------------------------------------


def _risk_vs_reference_curves(x: np.ndarray, ref: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Zero-one risk of the pol-+ stump at each threshold against reference labels."""
    n = x.shape[0]
    order = np.argsort(x, kind="stable")
    xs = x[order]
    rs = ref[order]
    pos = np.searchsorted(xs, thresholds, side="left")
    cum1 = np.concatenate([[0], np.cumsum(rs == 1)])
    below1 = cum1[pos]
    below0 = pos - below1
    n1 = cum1[-1]
    return (below1 + (n - n1 - below0)) / n


def _sup_reference_gap(S: Dataset, T: Dataset, cls: StumpClass,
                       ref_s: np.ndarray, ref_t: np.ndarray) -> tuple[float, dict]:
    """sup over the class of |risk_T(h, ref) - risk_S(h, ref)|.

    Polarity flips replace risk by 1 - risk, so the gap is polarity
    invariant; constants are checked separately.
    """
    best, info = -1.0, {}
    for j, ths in zip(cls.features, cls.thresholds):
        if not ths:
            continue
        t = np.asarray(ths)
        gap = np.abs(
            _risk_vs_reference_curves(T.X[:, j], ref_t, t)
            - _risk_vs_reference_curves(S.X[:, j], ref_s, t)
        )
        i = int(np.argmax(gap))
        if gap[i] > best + 1e-15:
            best, info = float(gap[i]), {"feature": j, "threshold": float(t[i]), "polarity": 1}
    if cls.include_constants:
        gap_const = abs(float(np.mean(ref_t == 0)) - float(np.mean(ref_s == 0)))
        if gap_const > best + 1e-15:
            best, info = gap_const, {"feature": -1, "threshold": math.inf, "polarity": 1}
    return best, info


def _require_nonempty(S: Dataset, T: Dataset) -> None:
    if S.n == 0 or T.n == 0:
        raise DegenerateInputError("both samples must be non-empty")


def dh_exact(S: Dataset, T: Dataset, cls: StumpClass) -> DiscrepancyReport:
    """Exact supremum of |risk_T(h, 1) - risk_S(h, 1)| over the stump class."""
    _require_nonempty(S, T)
    ones_s = np.ones(S.n, dtype=np.int64)
    ones_t = np.ones(T.n, dtype=np.int64)
    value, info = _sup_reference_gap(S, T, cls, ones_s, ones_t)
    return DiscrepancyReport("d_H", max(value, 0.0), "exact-enumeration", details=info,
                             n_source=S.n, n_target=T.n)


def sdisc_exact(S: Dataset, T: Dataset, hS: Hypothesis, cls: StumpClass) -> DiscrepancyReport:
    """Exact source-guided discrepancy: reference fixed to hS's predictions."""
    _require_nonempty(S, T)
    ref_s = predict(hS, S.X)
    ref_t = predict(hS, T.X)
    value, info = _sup_reference_gap(S, T, cls, ref_s, ref_t)
    return DiscrepancyReport("s_disc", max(value, 0.0), "exact-enumeration", details=info,
                             n_source=S.n, n_target=T.n)


def disc_exact(S: Dataset, T: Dataset, cls: StumpClass) -> DiscrepancyReport:
    """Exact discrepancy distance: supremum over ordered pairs in the class.

    In one dimension this reduces to the range of the CDF gap. In higher
    dimensions all pairs are enumerated through prediction matrices, which
    caps the workable class size.
    """
    _require_nonempty(S, T)
    if len(cls.features) == 1 and cls.include_constants:
        j = cls.features[0]
        t = np.asarray(cls.thresholds[0]) if cls.thresholds[0] else np.zeros(0)
        if t.size:
            gap = (np.searchsorted(np.sort(T.X[:, j]), t, side="left") / T.n
                   - np.searchsorted(np.sort(S.X[:, j]), t, side="left") / S.n)
        else:
            gap = np.zeros(1)
        hi = max(float(gap.max()), 0.0)
        lo = min(float(gap.min()), 0.0)
        return DiscrepancyReport("disc", hi - lo, "exact-enumeration",
                                 details={"feature": j, "form": "cdf-range"},
                                 n_source=S.n, n_target=T.n)
    if cls.size > DISC_CLASS_CAP:
        raise CapacityError(
            f"class size {cls.size} exceeds the pair-enumeration cap {DISC_CLASS_CAP}; "
            "subsample the data or restrict features"
        )
    Ps = cls.prediction_matrix(S.X).astype(np.float32)
    Pt = cls.prediction_matrix(T.X).astype(np.float32)
    # risk(h,h') = (1 - <p_h, p_h'>/n) / 2 for signed predictions
    Rs = (1.0 - (Ps @ Ps.T) / S.n) / 2.0
    Rt = (1.0 - (Pt @ Pt.T) / T.n) / 2.0
    gap = np.abs(Rt - Rs)
    i, jj = np.unravel_index(int(np.argmax(gap)), gap.shape)
    members = list(cls.members())
    return DiscrepancyReport("disc", float(gap[i, jj]), "exact-enumeration",
                             details={"pair": [list(members[i]), list(members[jj])]},
                             n_source=S.n, n_target=T.n)


# ---------------------------------------------------------------------------
# Adversarial estimation for trained architectures
# ---------------------------------------------------------------------------


def _scan_threshold_gap(score_s: np.ndarray, ref_s: np.ndarray,
                        score_t: np.ndarray, ref_t: np.ndarray) -> float:
    """Best |risk_T - risk_S| over all decision thresholds of a score.

    The witness 1{score >= c} is the scored network with a shifted output
    bias, hence a member of the same class. Thresholds beyond the score
    range reproduce the two constants.
    """
    pooled = np.unique(np.concatenate([score_s, score_t]))
    if pooled.size == 1:
        thresholds = np.array([pooled[0] - 1.0, pooled[0] + 1.0])
    else:
        mids = (pooled[:-1] + pooled[1:]) / 2.0
        thresholds = np.concatenate([[pooled[0] - 1.0], mids, [pooled[-1] + 1.0]])
    gap = np.abs(
        _risk_vs_reference_curves(score_t, ref_t, thresholds)
        - _risk_vs_reference_curves(score_s, ref_s, thresholds)
    )
    return float(gap.max())


def _domain_dataset(S: Dataset, T: Dataset, source_label: int) -> Dataset:
    X = np.vstack([S.X, T.X])
    y = np.concatenate([
        np.full(S.n, source_label, dtype=np.int64),
        np.full(T.n, 1 - source_label, dtype=np.int64),
    ])
    return Dataset(X, y, 2, "domain-pair")


def _split_halves(D: Dataset, rng) -> tuple[Dataset, Dataset]:
    perm = rng.permutation(D.n)
    half = D.n // 2
    return D.take(np.sort(perm[:half])), D.take(np.sort(perm[half:]))


def dh_adv(S: Dataset, T: Dataset, arch: Arch, cfg: TrainConfig,
           eval_mode: str = "insample") -> DiscrepancyReport:
    """Adversarial lower-bound estimate of the proxy distance.

    Trains a domain discriminator toward class 1 on source and class 0 on
    target, evaluates |risk_T(h, 1) - risk_S(h, 1)|, repeats with the sign
    direction swapped, and returns the larger statistic. The default
    evaluates on the training samples, i.e. it estimates the empirical
    supremum on the given samples, which is the quantity that complex
    classes inflate. ``eval_mode="heldout"`` instead reports the statistic
    on held-out halves, estimating the population gap.
    """
    _require_nonempty(S, T)
    if arch.out_dim != 1:
        raise ContractError("domain discrimination needs a single-score architecture")
    if eval_mode not in ("insample", "heldout"):
        raise ConfigError(f"unknown eval_mode {eval_mode!r}")
    if eval_mode == "heldout":
        rng = child_rng(cfg.seed, 6)
        S_fit, S_eval = _split_halves(S, rng)
        T_fit, T_eval = _split_halves(T, rng)
    else:
        S_fit = S_eval = S
        T_fit = T_eval = T

    ones_s = np.ones(S_eval.n, dtype=np.int64)
    ones_t = np.ones(T_eval.n, dtype=np.int64)

    def statistic(h: Hypothesis) -> float:
        # Shifting the output bias keeps the witness inside the class, so
        # the best decision threshold over the scored samples is scanned.
        return _scan_threshold_gap(scores(h, S_eval.X)[:, 0], ones_s,
                                   scores(h, T_eval.X)[:, 0], ones_t)

    stats = {}
    for direction, source_label in (("source-as-1", 1), ("source-as-0", 0)):
        # Every hypothesis visited during training is a valid witness for the
        # supremum lower bound; keep the best-statistic checkpoint.
        h, _ = train_erm_traced(_domain_dataset(S_fit, T_fit, source_label), arch,
                                replace(cfg, seed=cfg.seed + (0 if source_label else 1)),
                                metric=lambda hyp: -statistic(hyp), keep_best=True)
        stats[direction] = statistic(h)
    best = max(stats, key=lambda k: stats[k])
    return DiscrepancyReport("d_H", stats[best], "adversarial",
                             details={"direction": best, **{f"stat_{k}": v for k, v in stats.items()},
                                      "eval_mode": eval_mode},
                             seeds=(cfg.seed,), n_source=S_eval.n, n_target=T_eval.n)


def sdisc_adv(S: Dataset, T: Dataset, hS: Hypothesis, arch: Arch, cfg: TrainConfig,
              eval_mode: str = "insample") -> DiscrepancyReport:
    """Adversarial source-guided discrepancy.

    The discriminator is pushed to copy hS's predictions on one domain and
    their flips on the other (then the roles swap); the reported statistic
    is |risk_T(h, hS) - risk_S(h, hS)| under zero-one loss.
    """
    _require_nonempty(S, T)
    if arch.out_dim != 1 or hS.arch.out_dim != 1:
        raise ContractError("source-guided adversarial estimation is binary only")
    if eval_mode not in ("insample", "heldout"):
        raise ConfigError(f"unknown eval_mode {eval_mode!r}")
    if eval_mode == "heldout":
        rng = child_rng(cfg.seed, 7)
        S_fit, S_eval = _split_halves(S, rng)
        T_fit, T_eval = _split_halves(T, rng)
    else:
        S_fit = S_eval = S
        T_fit = T_eval = T
    ref_sf, ref_tf = predict(hS, S_fit.X), predict(hS, T_fit.X)
    ref_se, ref_te = predict(hS, S_eval.X), predict(hS, T_eval.X)

    def statistic(h: Hypothesis) -> float:
        return _scan_threshold_gap(scores(h, S_eval.X)[:, 0], ref_se,
                                   scores(h, T_eval.X)[:, 0], ref_te)

    stats = {}
    for direction, flip_target in (("agree-on-source", True), ("agree-on-target", False)):
        ys = ref_sf if flip_target else 1 - ref_sf
        yt = 1 - ref_tf if flip_target else ref_tf
        D = Dataset(np.vstack([S_fit.X, T_fit.X]), np.concatenate([ys, yt]), 2, "sdisc-pair")
        h, _ = train_erm_traced(D, arch, replace(cfg, seed=cfg.seed + (0 if flip_target else 1)),
                                metric=lambda hyp: -statistic(hyp), keep_best=True)
        stats[direction] = statistic(h)
    # the two constant hypotheses are always available witnesses
    stats["constant"] = abs(float(np.mean(ref_te == 0)) - float(np.mean(ref_se == 0)))
    best = max(stats, key=lambda k: stats[k])
    return DiscrepancyReport("s_disc", stats[best], "adversarial",
                             details={"direction": best, **{f"stat_{k}": v for k, v in stats.items()},
                                      "eval_mode": eval_mode},
                             seeds=(cfg.seed,), n_source=S_eval.n, n_target=T_eval.n)


# ---------------------------------------------------------------------------
# Wasserstein-1 and histogram L1
# ---------------------------------------------------------------------------


def _w1_1d(a: np.ndarray, b: np.ndarray) -> float:
    a = np.sort(a)
    b = np.sort(b)
    grid = np.sort(np.concatenate([a, b]))
    Fa = np.searchsorted(a, grid, side="right") / a.shape[0]
    Fb = np.searchsorted(b, grid, side="right") / b.shape[0]
    return float(np.sum(np.abs(Fa[:-1] - Fb[:-1]) * np.diff(grid)))


def w1_exact(S: Dataset, T: Dataset, seed: int = 0, cap: int = W1_ASSIGNMENT_CAP) -> DiscrepancyReport:
    """Exact empirical Wasserstein-1 between the two feature samples.

    One-dimensional data uses the CDF-quantile coupling (any sizes). Higher
    dimensions solve an exact min-cost perfect matching on the Euclidean
    cost matrix; unequal sizes are equalized by seeded subsampling of the
    larger sample and the matching size is capped.
    """
    _require_nonempty(S, T)
    if S.d != T.d:
        raise ContractError(f"feature dims differ: {S.d} vs {T.d}")
    if S.d == 1:
        value = _w1_1d(S.X[:, 0], T.X[:, 0])
        return DiscrepancyReport("w1", value, "closed-form", n_source=S.n, n_target=T.n)
    n = min(S.n, T.n)
    if n > cap:
        raise CapacityError(
            f"assignment at n={n} exceeds the cap {cap}; subsample both datasets to at most {cap} rows"
        )
    rng = child_rng(seed, 8)
    Xs = S.X if S.n == n else S.X[np.sort(rng.choice(S.n, n, replace=False))]
    Xt = T.X if T.n == n else T.X[np.sort(rng.choice(T.n, n, replace=False))]
    cost = cdist(Xs, Xt)
    rows, cols = linear_sum_assignment(cost)
    value = float(cost[rows, cols].sum() / n)
    return DiscrepancyReport("w1", value, "assignment", details={"matched": n},
                             seeds=(seed,), n_source=S.n, n_target=T.n)


def l1_hist(S: Dataset, T: Dataset, bins: int = 10) -> float:
    """L1 distance between per-bin frequencies on a shared pooled grid."""
    _require_nonempty(S, T)
    if bins < 1:
        raise ConfigError(f"bins must be >= 1, got {bins}")
    if S.d != T.d:
        raise ContractError(f"feature dims differ: {S.d} vs {T.d}")
    if bins**S.d > HIST_CELL_CAP:
        raise CapacityError(f"{bins}^{S.d} histogram cells exceed the cap; reduce bins or dimensions")
    pooled = np.vstack([S.X, T.X])
    edges = []
    for j in range(S.d):
        lo, hi = pooled[:, j].min(), pooled[:, j].max()
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        edges.append(np.linspace(lo, hi, bins + 1))
    ps, _ = np.histogramdd(S.X, bins=edges)
    pt, _ = np.histogramdd(T.X, bins=edges)
    return float(np.abs(ps / S.n - pt / T.n).sum())
