"""Gaussian-mixture PHD recursion specialised for box tracking.

Each tracked object is one weighted Gaussian over the state
``(cx, cy, vx, vy)``.  Box width and height ride alongside the Gaussian and are
replaced by the matched detection's extent on every update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import BoundingBox

# Pairs further than this many standard deviations apart are never associated.
GATE_MAHALANOBIS = 4.0
GATE_MIN_LIKELIHOOD = 1e-12
LIKELIHOOD_FLOOR = 1e-300
SENTINEL_MARGIN = 1e6

_LOG_2PI = math.log(2.0 * math.pi)


class BirthRejectedError(ValueError):
    """Raised when a detection's normalised confidence would not survive pruning."""


class CovarianceError(ValueError):
    """Raised when an innovation covariance is not positive definite."""


def _default_F():
    return np.array([[1.0, 0, 1, 0],
                     [0, 1, 0, 1],
                     [0, 0, 1, 0],
                     [0, 0, 0, 1]])


def _default_Q():
    return 0.5 * np.diag([5.0 ** 2, 10.0 ** 2, 5.0 ** 2, 10.0 ** 2])


def _default_P0():
    return np.diag([5.0 ** 2, 10.0 ** 2, 5.0 ** 2, 10.0 ** 2])


def _default_R():
    return np.diag([5.0 ** 2, 10.0 ** 2])


def _default_H():
    return np.array([[1.0, 0, 0, 0],
                     [0, 1, 0, 0]])


@dataclass(frozen=True, eq=False)
class FilterParams:
    """Constant-velocity model matrices and the pruning threshold."""

    F: np.ndarray = field(default_factory=_default_F)
    Q: np.ndarray = field(default_factory=_default_Q)
    P0: np.ndarray = field(default_factory=_default_P0)
    R: np.ndarray = field(default_factory=_default_R)
    H: np.ndarray = field(default_factory=_default_H)
    prune_threshold: float = 0.1

    def __post_init__(self):
        shapes = {"F": (4, 4), "Q": (4, 4), "P0": (4, 4), "R": (2, 2), "H": (2, 4)}
        for name, shape in shapes.items():
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for name in ("Q", "P0", "R"):
            arr = getattr(self, name)
            if not np.allclose(arr, arr.T):
                raise ValueError(f"{name} must be symmetric")
            try:
                np.linalg.cholesky(arr)
            except np.linalg.LinAlgError:
                raise ValueError(f"{name} must be positive definite") from None
        if not 0.0 <= self.prune_threshold < 1.0:
            raise ValueError("prune_threshold must lie in [0, 1)")


@dataclass
class GaussianComponent:
    id: int
    weight: float
    mean: np.ndarray
    covariance: np.ndarray
    extent: tuple
    last_frame: int = 0
    active: bool = True

    @property
    def center(self):
        return (float(self.mean[0]), float(self.mean[1]))

    @property
    def box(self) -> BoundingBox:
        return BoundingBox.from_center(self.mean[0], self.mean[1], *self.extent)

    def copy(self, **changes):
        changes.setdefault("mean", self.mean.copy())
        changes.setdefault("covariance", self.covariance.copy())
        return replace(self, **changes)


def normalize_confidences(confidences, prune_threshold=0.1):
    """Scale one frame's detection scores into birth weights.

    Scores are divided by the frame maximum and clamped to
    ``[prune_threshold + 0.01, 1]`` so every birth outlives the next prune.
    Frames whose scores are all non-positive get 0.5 everywhere.
    """
    conf = np.asarray(confidences, dtype=float)
    if conf.size == 0:
        return conf
    top = conf.max()
    if top <= 0:
        return np.full(conf.shape, 0.5)
    return np.clip(conf / top, prune_threshold + 0.01, 1.0)


def init_component(obs, normalized_confidence, new_id, params=FilterParams(), frame=None):
    """Start a component at the detection centre with zero velocity."""
    if not normalized_confidence > params.prune_threshold:
        raise BirthRejectedError(
            f"birth weight {normalized_confidence} does not exceed the prune "
            f"threshold {params.prune_threshold}")
    cx, cy = obs.box.center
    return GaussianComponent(
        id=new_id,
        weight=float(normalized_confidence),
        mean=np.array([cx, cy, 0.0, 0.0]),
        covariance=params.P0.copy(),
        extent=(obs.box.width, obs.box.height),
        last_frame=obs.frame if frame is None else frame,
        active=True,
    )


def predict(comp, params=FilterParams()):
    F = params.F
    return comp.copy(mean=F @ comp.mean, covariance=params.Q + F @ comp.covariance @ F.T)


def _innovation(comp, z, params):
    H = params.H
    S = params.R + H @ comp.covariance @ H.T
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise CovarianceError(f"innovation covariance is not positive definite:\n{S}") from None
    nu = np.asarray(z, dtype=float) - H @ comp.mean
    return S, L, nu


def _log_density(L, nu):
    # L is the Cholesky factor of S; solve instead of inverting.
    y = np.linalg.solve(L, nu)
    maha2 = float(y @ y)
    log_det = 2.0 * float(np.log(np.diag(L)).sum())
    return -0.5 * (maha2 + log_det + nu.size * _LOG_2PI), maha2


def log_likelihood(comp, z, params=FilterParams()):
    """Return ``(log q, squared Mahalanobis distance)`` of ``z`` under ``comp``."""
    _, L, nu = _innovation(comp, z, params)
    return _log_density(L, nu)


def likelihood(comp, z, params=FilterParams()):
    logq, _ = log_likelihood(comp, z, params)
    return max(math.exp(logq), LIKELIHOOD_FLOOR)


def update(comp, z, obs_extent, params=FilterParams(), frame=None):
    """Kalman correction of a predicted component with the centre ``z``."""
    H = params.H
    S, L, nu = _innovation(comp, z, params)
    P = comp.covariance
    # K = P H^T S^-1 via two triangular solves
    PHt = P @ H.T
    K = np.linalg.solve(L.T, np.linalg.solve(L, PHt.T)).T
    mean = comp.mean + K @ nu
    cov = (np.eye(4) - K @ H) @ P
    cov = 0.5 * (cov + cov.T)
    return comp.copy(
        mean=mean,
        covariance=cov,
        extent=(float(obs_extent[0]), float(obs_extent[1])),
        last_frame=comp.last_frame if frame is None else frame,
        active=True,
    )


def prune(components, prune_threshold=0.1):
    """Drop components lighter than the threshold and renormalise the rest."""
    kept = [c for c in components if c.weight >= prune_threshold]
    total = sum(c.weight for c in kept)
    if total <= 0:
        return []
    return [c.copy(weight=c.weight / total) for c in kept]


def gated_log_weights(log_q, maha2, prior_weights):
    """Normalise per-column posterior weights over the feasible rows.

    ``log_q`` and ``maha2`` are ``(rows, cols)`` arrays.  Returns the
    ``log w`` matrix with ``nan`` on infeasible entries.
    """
    feasible = (maha2 <= GATE_MAHALANOBIS ** 2) & (log_q >= math.log(GATE_MIN_LIKELIHOOD))
    prior = np.log(np.maximum(np.asarray(prior_weights, dtype=float), LIKELIHOOD_FLOOR))
    joint = np.where(feasible, log_q + prior[:, None], -np.inf)
    out = np.full(joint.shape, np.nan)
    for j in range(joint.shape[1]):
        col = joint[:, j]
        ok = feasible[:, j]
        if not ok.any():
            continue
        top = col[ok].max()
        lse = top + math.log(np.exp(col[ok] - top).sum())
        out[ok, j] = col[ok] - lse
    return out


def cost_from_log_weights(log_w):
    """Turn ``log w`` (nan = infeasible) into a cost matrix and its sentinel."""
    cost = -log_w
    feasible = ~np.isnan(cost)
    # -log of a normalised weight is >= 0; clear the -0.0 of certain matches
    cost[feasible] = np.maximum(cost[feasible], 0.0)
    top = cost[feasible].max() if feasible.any() else 0.0
    sentinel = float(top + SENTINEL_MARGIN)
    cost[~feasible] = sentinel
    return cost, sentinel


def association_cost(states, observations, params=FilterParams()):
    """Negative log posterior weight of every (state, observation) pair.

    Returns ``(cost, sentinel)``; gated-out pairs hold ``sentinel``, which is
    larger than every feasible entry.
    """
    n, m = len(states), len(observations)
    if n == 0 or m == 0:
        return np.zeros((n, m)), SENTINEL_MARGIN
    log_q = np.empty((n, m))
    maha2 = np.empty((n, m))
    H = params.H
    for i, comp in enumerate(states):
        S = params.R + H @ comp.covariance @ H.T
        try:
            L = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            raise CovarianceError(f"innovation covariance of component {comp.id} is degenerate") from None
        nu = np.asarray(observations, dtype=float) - H @ comp.mean
        y = np.linalg.solve(L, nu.T)
        maha2[i] = (y * y).sum(axis=0)
        log_det = 2.0 * float(np.log(np.diag(L)).sum())
        log_q[i] = -0.5 * (maha2[i] + log_det + 2 * _LOG_2PI)
    log_w = gated_log_weights(log_q, maha2, [c.weight for c in states])
    return cost_from_log_weights(log_w)
