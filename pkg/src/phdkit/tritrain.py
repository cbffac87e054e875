"""Asymmetric tri-training viewed as bound minimization.

Two source-trained hypotheses (diversified by bootstrap resampling and
seeds) pseudo-label the target rows they agree on; a third model trains on
that agreement set. On the agreement set the empirical pair discrepancy is
zero by construction, so each round also reports the bound evaluated with
the pair discrepancy on held-out target rows, where it is honestly
estimated.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .bounds import BoundReport, RademacherEstimate, bound_thm4, rademacher
from .data import Dataset
from .errors import ConfigError, ContractError, DegenerateInputError
from .models import (
    Arch,
    Hypothesis,
    TrainConfig,
    accuracy,
    empirical_risk,
    predict,
    train_erm,
    train_erm_traced,
    zero_one,
)
from .numkit import child_rng


@dataclass(frozen=True)
class AgreementSet:
    """Target rows where both hypotheses predict the same label."""

    indices: np.ndarray
    pseudo_labels: np.ndarray
    coverage: float

    @property
    def size(self) -> int:
        return int(self.indices.size)


def build_tpl(h1: Hypothesis, h2: Hypothesis, T: Dataset) -> AgreementSet:
    """Exact agreement filter; empty agreement is coverage 0, not an error."""
    if T.n == 0:
        raise DegenerateInputError("target dataset is empty")
    p1 = predict(h1, T.X)
    p2 = predict(h2, T.X)
    idx = np.flatnonzero(p1 == p2)
    return AgreementSet(idx, p1[idx], float(idx.size) / T.n)


@dataclass(frozen=True)
class TriTrainConfig:
    base: TrainConfig = field(default_factory=TrainConfig)
    pseudo_weight: float = 0.5
    holdout_frac: float = 0.25
    delta: float = 0.05
    rad_draws: int = 8
    emit_bounds: bool = True

    def __post_init__(self):
        if not 0.0 < self.holdout_frac < 1.0:
            raise ConfigError(f"holdout_frac must lie in (0,1), got {self.holdout_frac}")


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    coverage: float
    tpl_size: int
    bound: BoundReport | None
    tpl_risk_trace: tuple[float, ...]
    target_accuracy: float | None
    skipped: bool
    warning: str | None = None


@dataclass(frozen=True)
class TriTrainResult:
    h: Hypothesis
    h1: Hypothesis
    h2: Hypothesis
    rounds: tuple[RoundRecord, ...]

    def csv_rows(self) -> tuple[list[str], list[list[str]]]:
        term_names: list[str] = []
        for r in self.rounds:
            if r.bound is not None:
                for t in r.bound.terms:
                    if t.name not in term_names:
                        term_names.append(t.name)
        header = ["round", "coverage", "tpl_size", *term_names, "bound_total", "target_accuracy"]
        rows = []
        for r in self.rounds:
            vals = {t.name: repr(t.value) for t in r.bound.terms} if r.bound else {}
            rows.append([
                str(r.round_index),
                repr(r.coverage),
                str(r.tpl_size),
                *[vals.get(n, "") for n in term_names],
                "" if r.bound is None else repr(r.bound.total),
                "" if r.target_accuracy is None else repr(r.target_accuracy),
            ])
        return header, rows


def _bootstrap(S: Dataset, rng) -> Dataset:
    return S.take(np.sort(rng.integers(0, S.n, size=S.n)))


def tritrain_round(S: Dataset, T: Dataset, archs, cfg: TriTrainConfig, rounds: int,
                   seed: int = 0, h_t_star: Hypothesis | None = None,
                   rad: RademacherEstimate | None = None,
                   h1: Hypothesis | None = None, h2: Hypothesis | None = None) -> TriTrainResult:
    """Run the agreement/pseudo-label loop for a number of rounds.

    Each round retrains the two labeling hypotheses on their bootstrap
    source samples plus the current agreement set, rebuilds the agreement
    set once, and trains the target model on it keeping the checkpoint with
    the lowest agreement-set risk against h1. The per-round bound uses the
    pair discrepancy on the held-out part of the target sample, never on
    the agreement set.
    """
    if rounds < 1:
        raise ConfigError(f"rounds must be >= 1, got {rounds}")
    if not S.labeled:
        raise ContractError("source must be labeled")
    if isinstance(archs, Arch):
        archs = (archs, archs, archs)
    arch1, arch2, arch_h = archs
    supplied_pair = h1 is not None and h2 is not None

    rng = child_rng(seed, 10)
    boot1 = _bootstrap(S, rng) if not supplied_pair else None
    boot2 = _bootstrap(S, rng) if not supplied_pair else None

    n_hold = max(1, int(round(T.n * cfg.holdout_frac)))
    perm = child_rng(seed, 11).permutation(T.n)
    hold_idx = np.sort(perm[:n_hold])
    pool_idx = np.sort(perm[n_hold:])
    if pool_idx.size == 0:
        raise DegenerateInputError("holdout fraction leaves no target pool")
    T_pool = T.take(pool_idx)
    T_hold = T.take(hold_idx)

    records: list[RoundRecord] = []
    h: Hypothesis | None = None
    tpl = None
    rad_est = rad

    for r in range(rounds):
        if not supplied_pair:
            extra_X = extra_y = None
            if tpl is not None and tpl.size > 0:
                extra_X = T_pool.X[tpl.indices]
                extra_y = tpl.pseudo_labels
            h1 = _train_labeler(boot1, arch1, cfg, seed * 2 + 1, extra_X, extra_y)
            h2 = _train_labeler(boot2, arch2, cfg, seed * 2 + 2, extra_X, extra_y)

        tpl = build_tpl(h1, h2, T_pool)
        if tpl.size > 0:
            # The agreement set satisfies zero pair discrepancy exactly.
            tpl_phd = empirical_risk(h1, h2, T_pool.take(tpl.indices), zero_one())
            if tpl_phd != 0.0:
                raise ContractError(f"agreement set has nonzero pair discrepancy {tpl_phd}")

        if tpl.size == 0:
            records.append(RoundRecord(r, 0.0, 0, None, (), None, skipped=True,
                                       warning="empty agreement set; round skipped"))
            continue

        D_tpl = Dataset(T_pool.X[tpl.indices], tpl.pseudo_labels, S.k, "agreement")
        h1_ref = h1
        metric = lambda hyp: empirical_risk(hyp, h1_ref, D_tpl, zero_one())  # noqa: E731
        h, trace = train_erm_traced(D_tpl, arch_h, replace(cfg.base, seed=seed * 2 + 3 + r),
                                    metric=metric, keep_best=True)

        bound = None
        if cfg.emit_bounds:
            if rad_est is None:
                rad_est = rademacher(T_hold, arch_h, draws=cfg.rad_draws, seed=seed,
                                     train_cfg=replace(cfg.base, epochs=min(cfg.base.epochs, 30)))
            bound = bound_thm4(h, h1, h2, T_hold, rad_est, cfg.delta, h_t_star=h_t_star,
                               oracle_T=T_hold if T_hold.labeled else None)

        acc = accuracy(h, T_hold) if T_hold.labeled else None
        records.append(RoundRecord(r, tpl.coverage, tpl.size, bound, trace, acc, skipped=False))

    if h is None:
        h = h1  # every round skipped: fall back to a source-trained hypothesis
    return TriTrainResult(h, h1, h2, tuple(records))


def _train_labeler(boot: Dataset, arch: Arch, cfg: TriTrainConfig, seed: int,
                   extra_X, extra_y) -> Hypothesis:
    if extra_X is None or len(extra_X) == 0:
        return train_erm(boot, arch, replace(cfg.base, seed=seed))
    X = np.vstack([boot.X, extra_X])
    y = np.concatenate([boot.y, extra_y])
    w = np.concatenate([np.ones(boot.n), np.full(len(extra_X), cfg.pseudo_weight)])
    return train_erm(Dataset(X, y, boot.k, boot.domain_tag), arch,
                     replace(cfg.base, seed=seed), sample_weight=w)
