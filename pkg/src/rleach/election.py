"""Cluster-head election thresholds and epoch bookkeeping."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import KoptMode, Protocol, ScenarioConfig


def epoch_length(p: float) -> int:
    """Rounds per epoch, ceil(1/p); snaps to the integer when 1/p is within rounding of one."""
    inv = 1.0 / p
    nearest = round(inv)
    if abs(inv - nearest) <= 1e-9 * inv:
        return max(1, int(nearest))
    return math.ceil(inv)


def _base_threshold(p: float, r: int) -> float:
    return p / (1.0 - p * (r % epoch_length(p)))


def _clamp01(x: float) -> float:
    return min(max(x, 0.0), 1.0)


def leach_threshold(p: float, r: int, eligible: bool) -> float:
    if not eligible:
        return 0.0
    return _clamp01(_base_threshold(p, r))


def kopt_factor(k_opt: float, mode: KoptMode, n_alive: int) -> float:
    if mode is KoptMode.LITERAL_CLAMP:
        return k_opt
    if mode is KoptMode.NORMALIZED:
        return k_opt / n_alive
    return 1.0


def rleach_threshold(
    p: float,
    r: int,
    eligible: bool,
    e_residual: float,
    e_initial: float,
    k_opt: float,
    mode: KoptMode,
    n_alive: int,
) -> float:
    """LEACH base threshold weighted by the residual-energy fraction and a k_opt factor.

    ``mode`` decides how k_opt enters: as a raw multiplier (LITERAL_CLAMP),
    divided by the alive count (NORMALIZED), or not at all (OFF).
    """
    if not eligible or e_residual <= 0:
        return 0.0
    factor = (e_residual / e_initial) * kopt_factor(k_opt, mode, n_alive)
    return _clamp01(_base_threshold(p, r) * factor)


def compute_k_opt(cfg: ScenarioConfig, mean_d_to_bs: float) -> float:
    """Optimal cluster count sqrt(n/2pi) * sqrt(e_fs/e_mp) * M / dbar^2."""
    if cfg.proto.kopt_override is not None:
        return float(cfg.proto.kopt_override)
    if not mean_d_to_bs > 0:
        raise ValueError(f"mean distance to BS must be positive, got {mean_d_to_bs}")
    r = cfg.radio
    return (
        math.sqrt(cfg.n_nodes / (2 * math.pi))
        * math.sqrt(r.e_fs / r.e_mp)
        * cfg.field_m
        / mean_d_to_bs**2
    )


@dataclass
class EpochState:
    round: int
    epoch_length: int
    served: np.ndarray  # bool mask, True once a node has been CH this epoch

    @classmethod
    def fresh(cls, n: int, p: float) -> "EpochState":
        return cls(round=0, epoch_length=epoch_length(p), served=np.zeros(n, dtype=bool))

    @property
    def served_this_epoch(self) -> set[int]:
        return {int(i) for i in np.flatnonzero(self.served)}

    def begin_round(self, r: int) -> None:
        self.round = r
        if r % self.epoch_length == 0:
            self.served[:] = False

    def eligible(self, node_id: int) -> bool:
        return not self.served[node_id]

    def mark_served(self, ids) -> None:
        self.served[list(ids)] = True

    def forget(self, ids) -> None:
        self.served[list(ids)] = False


def node_thresholds(state, use_leach: bool | None = None) -> np.ndarray:
    """Threshold for every node of ``state`` at its current round; 0 for dead nodes.

    Vectorized form of leach_threshold / rleach_threshold with the same
    floating-point operation order, so results are bitwise identical.
    """
    cfg = state.cfg
    if use_leach is None:
        use_leach = cfg.proto.protocol is Protocol.LEACH
    base = _base_threshold(cfg.proto.p_ch, state.round)
    mask = state.alive & ~state.epoch.served
    if use_leach:
        t = np.full(state.n, _clamp01(base))
    else:
        n_alive = int(state.alive.sum())
        g = kopt_factor(state.k_opt, cfg.proto.kopt_mode, n_alive)
        factor = (state.energy / cfg.e0_joules) * g
        t = np.clip(base * factor, 0.0, 1.0)
        mask &= state.energy > 0
    return np.where(mask, t, 0.0)


def elect_cluster_heads(state, draws, thresholds=None) -> frozenset[int]:
    """Node ids whose draw falls strictly below their threshold.

    ``draws`` holds one value per alive node, in node-id order. Does not
    touch ``state``; the engine records the winners in the epoch state.
    """
    alive_ids = np.flatnonzero(state.alive)
    draws = np.asarray(draws, dtype=float)
    if draws.shape != alive_ids.shape:
        raise ValueError(f"expected {alive_ids.size} draws, got {draws.size}")
    if thresholds is None:
        thresholds = node_thresholds(state)
    won = draws < thresholds[alive_ids]
    return frozenset(int(i) for i in alive_ids[won])
