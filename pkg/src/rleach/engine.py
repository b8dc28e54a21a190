"""Round-based simulation: deployment, set-up, steady state, energy ledger."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import radio
from .election import EpochState, compute_k_opt, elect_cluster_heads, node_thresholds
from .model import Fallback, Node, Position, Protocol, Role, ScenarioConfig, validate_config

log = logging.getLogger(__name__)


def make_rng(seed: int) -> np.random.Generator:
    # PCG64 is numpy's documented, stable 64-bit generator
    return np.random.Generator(np.random.PCG64(seed))


@dataclass
class NetworkState:
    cfg: ScenarioConfig
    pos: np.ndarray  # (n, 2)
    energy: np.ndarray
    alive: np.ndarray
    roles: np.ndarray
    epoch: EpochState
    bs: Position
    k_opt: Optional[float]  # None for LEACH runs without an override
    rng: np.random.Generator
    round: int = 0
    cum_packets_bs: int = 0
    cum_packets_ch: int = 0
    cum_dissipated: float = 0.0

    @property
    def n(self) -> int:
        return len(self.energy)

    @property
    def n_alive(self) -> int:
        return int(self.alive.sum())

    @property
    def nodes(self) -> list[Node]:
        return [
            Node(
                id=i,
                pos=Position(float(self.pos[i, 0]), float(self.pos[i, 1])),
                energy=float(self.energy[i]),
                alive=bool(self.alive[i]),
                role_this_round=Role(int(self.roles[i])),
                ch_eligible=not bool(self.epoch.served[i]),
            )
            for i in range(self.n)
        ]

    def dist_to_bs(self, ids=slice(None)) -> np.ndarray:
        p = self.pos[ids]
        return np.hypot(p[..., 0] - self.bs.x, p[..., 1] - self.bs.y)


@dataclass(frozen=True)
class RoundReport:
    round: int
    alive_before: int
    ch_count: int
    direct_count: int
    packets_to_bs: int
    packets_to_ch: int
    dissipated_j: float
    total_residual_j: float
    deaths: tuple[int, ...]
    cluster_heads: tuple[int, ...]

    @property
    def alive_after(self) -> int:
        return self.alive_before - len(self.deaths)


def place_nodes(cfg: ScenarioConfig, positions=None) -> NetworkState:
    """Deploy ``cfg.n_nodes`` nodes uniformly over the field.

    Placement consumes 2 draws per node (x then y, in id order) from the
    seeded stream. ``positions`` overrides placement for scripted
    scenarios; the stream is then left untouched.
    """
    cfg = validate_config(cfg)
    rng = make_rng(cfg.seed)
    n = cfg.n_nodes
    if positions is None:
        pos = rng.random(2 * n).reshape(n, 2) * cfg.field_m
    else:
        pos = np.array(positions, dtype=float).reshape(n, 2)
    state = NetworkState(
        cfg=cfg,
        pos=pos,
        energy=np.full(n, cfg.e0_joules),
        alive=np.ones(n, dtype=bool),
        roles=np.zeros(n, dtype=np.int8),
        epoch=EpochState.fresh(n, cfg.proto.p_ch),
        bs=cfg.bs,
        k_opt=None,
        rng=rng,
    )
    if cfg.proto.protocol is Protocol.RLEACH or cfg.proto.kopt_override is not None:
        state.k_opt = compute_k_opt(cfg, float(state.dist_to_bs().mean()))
    return state


def assign_clusters(state: NetworkState, chs) -> tuple[np.ndarray, np.ndarray]:
    """Roles for this round and each member's CH id (-1 where not a member).

    Members join the nearest CH; ties go to the lowest CH id.
    """
    roles = np.full(state.n, Role.NONE, dtype=np.int8)
    target = np.full(state.n, -1, dtype=np.int64)
    alive_ids = np.flatnonzero(state.alive)
    ch_ids = np.array(sorted(chs), dtype=np.int64)
    if ch_ids.size == 0:
        if state.cfg.no_ch_fallback is Fallback.DIRECT_TO_BS:
            roles[alive_ids] = Role.DIRECT
        return roles, target
    roles[ch_ids] = Role.CH
    members = alive_ids[roles[alive_ids] != Role.CH]
    if members.size:
        d = _pairwise(state.pos[members], state.pos[ch_ids])
        target[members] = ch_ids[np.argmin(d, axis=1)]
        roles[members] = Role.MEMBER
    return roles, target


def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])


def run_round(state: NetworkState, draws=None) -> tuple[NetworkState, RoundReport]:
    """Advance ``state`` by one round in place and report what happened.

    ``draws`` (one per alive node, id order) replaces the election draws
    from the seeded stream; used by scripted tests.
    """
    alive_before = state.n_alive
    if alive_before == 0:
        raise ValueError("run_round needs at least one alive node")
    cfg = state.cfg
    k = cfg.packet_bits
    rp = cfg.radio
    r = state.round
    state.epoch.begin_round(r)

    # set-up
    # R-LEACH's first round uses the plain LEACH threshold
    use_leach = cfg.proto.protocol is Protocol.LEACH or r == 0
    thresholds = node_thresholds(state, use_leach=use_leach)
    if draws is None:
        draws = state.rng.random(alive_before)
    chs = elect_cluster_heads(state, draws, thresholds)
    state.epoch.mark_served(chs)
    roles, target = assign_clusters(state, chs)
    state.roles = roles

    # steady state: members, then CHs, then direct senders
    cost = np.zeros(state.n)
    members = np.flatnonzero(roles == Role.MEMBER)
    ch_ids = np.flatnonzero(roles == Role.CH)
    direct = np.flatnonzero(roles == Role.DIRECT)
    if members.size:
        d = np.hypot(*(state.pos[members] - state.pos[target[members]]).T)
        cost[members] = radio.tx_energy(rp, k, d)
    if ch_ids.size:
        n_members = np.bincount(target[members], minlength=state.n)[ch_ids]
        cost[ch_ids] = (
            n_members * radio.rx_energy(rp, k)
            + radio.aggregation_energy(rp, k, n_members + 1)
            + radio.tx_energy(rp, k, state.dist_to_bs(ch_ids))
        )
    if direct.size:
        cost[direct] = radio.tx_energy(rp, k, state.dist_to_bs(direct))

    dissipated = 0.0
    for group in (members, ch_ids, direct):
        if group.size:
            paid = np.minimum(cost[group], state.energy[group])
            state.energy[group] -= paid
            dissipated += float(paid.sum())

    # every sender entered the round alive, so each packet counts
    packets_to_ch = int(members.size)
    packets_to_bs = int(ch_ids.size + direct.size)

    dead = np.flatnonzero(state.alive & (state.energy <= 0))
    state.energy[dead] = 0.0
    state.alive[dead] = False
    state.epoch.forget(dead)

    state.cum_packets_bs += packets_to_bs
    state.cum_packets_ch += packets_to_ch
    state.cum_dissipated += dissipated
    state.round = r + 1

    report = RoundReport(
        round=r,
        alive_before=alive_before,
        ch_count=int(ch_ids.size),
        direct_count=int(direct.size),
        packets_to_bs=packets_to_bs,
        packets_to_ch=packets_to_ch,
        dissipated_j=dissipated,
        total_residual_j=float(state.energy.sum()),
        deaths=tuple(int(i) for i in dead),
        cluster_heads=tuple(int(i) for i in ch_ids),
    )
    return state, report


def run_simulation(cfg: ScenarioConfig):
    """Run rounds until every node is dead or ``max_rounds`` is reached."""
    from .metrics import summarize

    state = place_nodes(cfg)
    reports = []
    while state.n_alive > 0 and state.round < state.cfg.max_rounds:
        state, rep = run_round(state)
        reports.append(rep)
    log.debug("seed %d: %d rounds, k_opt=%s", state.cfg.seed, len(reports), state.k_opt)
    return summarize(reports, state.cfg, k_opt=state.k_opt)
