"""Adaptive penalized loss and the outer loop searching for the Pareto-fair model.

The outer loop alternates inner weighted-SGD runs with an accept/reject test
on validation group risks: a step is kept only if it strictly shrinks the
worst pairwise risk gap and is not dominated by any previously accepted risk
vector. Rejected steps restore the best model, shrink the learning rate and
the multiplier bump, and retry.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from paretofair.data import GroupedDataset
from paretofair.model import MLPClassifier, TrainConfig, sgd_early_stop
from paretofair.risk import (
    InputError,
    ParetoArchive,
    RiskVector,
    archive_insert,
    group_risks,
    max_gap,
)

_EPS = 1e-12


def adaptive_loss(r, mu, c: float) -> float:
    """sum_a [ r_a + mu_a * ((r_a - c)^+)^2 ]."""
    risks = r.risks if isinstance(r, RiskVector) else np.asarray(r, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if mu.shape != risks.shape:
        raise InputError("mu length does not match number of groups")
    if np.any(mu < 0):
        raise InputError("mu entries must be nonnegative")
    excess = np.maximum(risks - c, 0.0)
    return float(np.sum(risks + mu * excess**2))


def group_weights(r_hat, mu, c: float) -> np.ndarray:
    """Per-group sample weights w_a = 1 + 2 mu_a (r_a - c)^+.

    This is the derivative of ``adaptive_loss`` in each risk component, so
    weighting per-sample gradients by it optimizes the adaptive loss.
    """
    risks = r_hat.risks if isinstance(r_hat, RiskVector) else np.asarray(r_hat, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < 0):
        raise InputError("mu entries must be nonnegative")
    return 1.0 + 2.0 * mu * np.maximum(risks - c, 0.0)


@dataclass
class PFHyperparams:
    """Outer-loop settings; ``train`` configures the inner SGD runs."""

    mu_init: float = 1.0
    k: float = 2.0
    gamma0: float = 0.5
    xi: float = 0.85
    zeta: float = 0.85
    lr0: float = 0.1
    max_outer_iters: int = 80
    max_consecutive_rejects: int = 15
    lr_min: float = 1e-6
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.mu_init <= 0:
            raise InputError("mu_init must be positive")
        if self.k <= 1:
            raise InputError("k must be > 1 so that c stays below min group risk")
        if not (self.gamma0 > 0 and 0 < self.xi < 1 and 0 < self.zeta < 1 and self.lr0 > 0):
            raise InputError("need gamma0 > 0, xi and zeta in (0,1), lr0 > 0")


@dataclass
class AdaptiveLossState:
    """Everything the outer loop carries between iterations."""

    mu: np.ndarray
    mu_star: np.ndarray
    c: float
    c_old: float
    gamma: float
    xi: float
    zeta: float
    k: float
    lr: float
    gamma_star: float
    best_params: object
    best_risk: RiskVector | None
    archive: ParetoArchive
    worst_group: int = 0


def init_state(G: int, hp: PFHyperparams, model: MLPClassifier) -> AdaptiveLossState:
    return AdaptiveLossState(
        mu=np.full(G, hp.mu_init),
        mu_star=np.full(G, hp.mu_init),
        c=0.0,
        c_old=0.0,
        gamma=hp.gamma0,
        xi=hp.xi,
        zeta=hp.zeta,
        k=hp.k,
        lr=hp.lr0,
        gamma_star=np.inf,
        best_params=model.get_params(),
        best_risk=None,
        archive=ParetoArchive(),
    )


def pf_step_accept(state: AdaptiveLossState, r_val: RiskVector) -> bool:
    """Accept iff the gap strictly improves and r_val is archive-admissible.

    Updates the archive on acceptance.
    """
    if max_gap(r_val) >= state.gamma_star:
        return False
    accepted, new_archive = archive_insert(state.archive, r_val)
    if accepted:
        state.archive = new_archive
    return accepted


def pf_accept_update(state: AdaptiveLossState, r_val: RiskVector, model: MLPClassifier):
    """Bookkeeping after an accepted step: new best model, c and mu* rescale."""
    state.best_params = model.get_params()
    state.best_risk = r_val
    state.gamma_star = max_gap(r_val)
    state.c_old = state.c
    state.c = float(r_val.risks.min()) / state.k
    num = np.maximum(r_val.risks - state.c_old, 0.0)
    den = np.maximum(r_val.risks - state.c, 0.0)
    ratio = np.where(den > _EPS, num / np.maximum(den, _EPS), 0.0)
    state.mu_star = state.mu * ratio
    state.worst_group = int(np.argmax(r_val.risks))


def pf_reject_update(state: AdaptiveLossState, model: MLPClassifier):
    """Rejected step: decay lr and gamma, restore multipliers and best model."""
    state.lr *= state.zeta
    state.mu = state.mu_star.copy()
    state.gamma *= state.xi
    model.set_params(state.best_params)


def evaluate_risk(model: MLPClassifier, val: GroupedDataset, loss: str = "brier") -> RiskVector:
    probs = model.forward(val.features)
    return group_risks(probs, val.targets, val.groups, loss)


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    accepted: bool
    lr: float
    gamma: float
    c: float
    mu: np.ndarray
    risks: np.ndarray
    max_gap: float


def pareto_fair_optimize(
    train: GroupedDataset,
    val: GroupedDataset,
    model: MLPClassifier,
    hp: PFHyperparams,
    loss: str = "brier",
):
    """Outer optimization loop; returns (best_model, trace).

    The returned model carries the parameters whose validation risk vector
    achieved the smallest max gap while staying non-dominated.
    """
    G = train.num_groups
    if val.num_groups != G:
        raise InputError("validation set must contain every training group")
    state = init_state(G, hp, model)
    trace: list[TraceRow] = []
    consecutive_rejects = 0

    for it in range(hp.max_outer_iters):
        mu = state.mu.copy()
        c = state.c
        cfg = replace(hp.train, lr=state.lr, seed=hp.train.seed + it)
        sgd_early_stop(
            model,
            train,
            val,
            objective=lambda r: adaptive_loss(r, mu, c),
            weight_rule=lambda r: group_weights(r, mu, c),
            config=cfg,
            loss=loss,
        )
        r_val = evaluate_risk(model, val, loss)
        accepted = pf_step_accept(state, r_val)
        if accepted:
            pf_accept_update(state, r_val, model)
            consecutive_rejects = 0
        else:
            pf_reject_update(state, model)
            consecutive_rejects += 1
        # worst group is recomputed every iteration, reject branches included
        state.worst_group = int(np.argmax(r_val.risks))
        state.mu[state.worst_group] *= 1.0 + state.gamma
        trace.append(
            TraceRow(
                iteration=it,
                accepted=accepted,
                lr=state.lr,
                gamma=state.gamma,
                c=state.c,
                mu=state.mu.copy(),
                risks=r_val.risks.copy(),
                max_gap=max_gap(r_val),
            )
        )
        if consecutive_rejects >= hp.max_consecutive_rejects or state.lr < hp.lr_min:
            break

    model.set_params(state.best_params)
    return model, trace


def write_trace_csv(trace, path):
    """One row per outer iteration: iter, accepted, lr, gamma, c, mu_*, r_*, max_gap."""
    if not trace:
        raise InputError("empty trace")
    G = len(trace[0].mu)
    header = ["iter", "accepted", "lr", "gamma", "c"]
    header += [f"mu_{a}" for a in range(G)]
    header += [f"r_{a}" for a in range(G)]
    header += ["max_gap"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in trace:
            rec = [row.iteration, int(row.accepted), repr(row.lr), repr(row.gamma), repr(row.c)]
            rec += [repr(float(v)) for v in row.mu]
            rec += [repr(float(v)) for v in row.risks]
            rec += [repr(row.max_gap)]
            w.writerow(rec)
