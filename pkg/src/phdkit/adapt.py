"""Correlation alignment and the multi-source selection harness.

CORAL whitens source features with the source covariance, recolors with the
target covariance, and re-centers on the target mean. Source selection
ranks candidate sources by a discrepancy measure (pair discrepancy with a
self-trained second hypothesis, or exact Wasserstein-1 on raw features),
then trains one classifier on the CORAL-adapted top-K pool.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset, SplitSpec, split
from .discrepancy import phd, w1_exact
from .errors import ConfigError, ContractError
from .models import Arch, TrainConfig, accuracy, train_erm
from .numkit import child_rng, covariance, sym_inv_sqrt, sym_sqrt
from .semisup import SelfTrainConfig, train_self

W1_SUBSAMPLE = 256


def coral(S: Dataset, T: Dataset, ridge: float = 1e-6) -> Dataset:
    """Align source features to target first and second moments.

    X <- (X - mu_s) C_s^(-1/2) C_t^(1/2) + mu_t. Labels pass through.
    """
    if S.n == 0 or T.n == 0:
        raise ContractError("both datasets must be non-empty")
    if S.d != T.d:
        raise ContractError(f"feature dims differ: {S.d} vs {T.d}")
    mu_s = S.X.mean(axis=0)
    mu_t = T.X.mean(axis=0)
    A = sym_inv_sqrt(covariance(S.X), ridge) @ sym_sqrt(covariance(T.X), ridge)
    X = (S.X - mu_s) @ A + mu_t
    return Dataset(X, S.y, S.k, S.domain_tag + "+coral", S.consumed)


def rank_ascending(values) -> tuple[int, ...]:
    """Indices sorted by value ascending; ties broken by source index."""
    values = np.asarray(values, dtype=np.float64)
    return tuple(int(i) for i in np.lexsort((np.arange(values.shape[0]), values)))


@dataclass(frozen=True)
class SelectConfig:
    arch: Arch
    base: TrainConfig = field(default_factory=TrainConfig)
    selftrain: SelfTrainConfig = field(default_factory=SelfTrainConfig)
    eval_frac: float = 0.3
    ridge: float = 1e-6
    w1_subsample: int = W1_SUBSAMPLE
    standardize: bool = True
    """Standardize each dataset by its own moments before hypothesis
    training (the usual preprocessing step). Raw features still feed the
    transport distance, which by definition works on the input space."""

    def __post_init__(self):
        if not 0.0 < self.eval_frac < 1.0:
            raise ConfigError(f"eval_frac must lie in (0,1), got {self.eval_frac}")


def _standardized(D: Dataset, ref: Dataset | None = None) -> Dataset:
    """Shift/scale features by (ref or D)'s per-feature moments."""
    R = ref if ref is not None else D
    mu = R.X.mean(axis=0)
    sd = R.X.std(axis=0)
    sd = np.where(sd < 1e-12, 1.0, sd)
    return Dataset((D.X - mu) / sd, D.y, D.k, D.domain_tag, D.consumed)


@dataclass(frozen=True)
class SelectionOutcome:
    """Ranked sources with the chosen top-K and diagnostic quality numbers."""

    measure: str
    values: tuple[float, ...]
    ranking: tuple[int, ...]
    chosen: tuple[int, ...]
    score: int | None
    accuracy: float | None
    sigma: float | None
    seed: int
    k_select: int

    def to_dict(self) -> dict:
        return {
            "measure": self.measure,
            "values": list(self.values),
            "ranking": list(self.ranking),
            "chosen": list(self.chosen),
            "score": self.score,
            "accuracy": self.accuracy,
            "sigma": self.sigma,
            "seed": self.seed,
            "k_select": self.k_select,
        }


def _subsample(D: Dataset, n: int, rng) -> Dataset:
    if D.n <= n:
        return D
    return D.take(np.sort(rng.choice(D.n, n, replace=False)))


def select_sources(sources, T: Dataset, measure: str, K: int, cfg: SelectConfig, seed: int = 0,
                   clean_flags=None, oracle: Dataset | None = None, sigma: float | None = None,
                   jobs: int = 1) -> SelectionOutcome:
    """Rank sources by discrepancy to the target and evaluate the top-K pool.

    For the pair-discrepancy measure each source trains its own supervised
    hypothesis and a self-trained target-aware one; the discrepancy is their
    disagreement on target rows held out from self-training. The score
    counts clean sources inside the top-K (requires ``clean_flags``); the
    downstream accuracy trains one classifier on the CORAL-adapted chosen
    pool and grades it on oracle-labeled target data. Both are diagnostics.
    """
    sources = list(sources)
    if len(sources) < 2:
        raise ContractError(f"need at least 2 sources, got {len(sources)}")
    if K > len(sources):
        raise ConfigError(f"K={K} exceeds the number of sources {len(sources)}")
    if measure not in ("phd", "w1"):
        raise ConfigError(f"unsupported measure {measure!r}; expected phd or w1")
    if any(not s.labeled for s in sources):
        raise ContractError("all candidate sources must be labeled")

    T_fit, T_eval = split(T.without_labels(), SplitSpec((1.0 - cfg.eval_frac, cfg.eval_frac), seed=seed))

    def value_for(i: int) -> float:
        src = sources[i]
        if measure == "phd":
            if cfg.standardize:
                src = _standardized(src)
                fit = _standardized(T_fit)
                ev = _standardized(T_eval, ref=T_fit)
            else:
                fit, ev = T_fit, T_eval
            h_s = train_erm(src, cfg.arch, replace(cfg.base, seed=seed + 10 * i + 1))
            res = train_self(src, fit, cfg.arch, cfg.selftrain, seed=seed + 10 * i + 2)
            return phd(h_s, res.hypothesis, ev).value
        rng = child_rng(seed, 12, i)
        return w1_exact(_subsample(src, cfg.w1_subsample, rng),
                        _subsample(T_fit, cfg.w1_subsample, rng), seed=seed + i).value

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            values = list(pool.map(value_for, range(len(sources))))
    else:
        values = [value_for(i) for i in range(len(sources))]

    ranking = rank_ascending(values)
    chosen = ranking[:K]
    score = None
    if clean_flags is not None:
        flags = list(clean_flags)
        if len(flags) != len(sources):
            raise ContractError("clean_flags length does not match sources")
        score = int(sum(bool(flags[i]) for i in chosen))

    acc = None
    if oracle is not None:
        if not oracle.labeled:
            raise ContractError("oracle target dataset must be labeled")
        adapted = [coral(sources[i], T_fit, cfg.ridge) for i in chosen]
        pooled = Dataset(
            np.vstack([a.X for a in adapted]),
            np.concatenate([a.y for a in adapted]),
            sources[chosen[0]].k,
            "pooled-selected",
        )
        clf = train_erm(pooled, cfg.arch, replace(cfg.base, seed=seed + 999))
        acc = accuracy(clf, oracle)

    return SelectionOutcome(measure, tuple(float(v) for v in values), ranking, chosen,
                            score, acc, sigma, seed, K)
