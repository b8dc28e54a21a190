"""Lifetime markers, packet/energy series and paired protocol comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .engine import RoundReport
from .model import ScenarioConfig


@dataclass(frozen=True)
class LifetimeMarkers:
    fnd: Optional[int]
    hnd: Optional[int]
    lnd: Optional[int]

    @property
    def stability_period(self) -> Optional[int]:
        return self.fnd

    @property
    def lifetime_span(self) -> Optional[int]:
        if self.fnd is None or self.lnd is None:
            return None
        return self.lnd - self.fnd


@dataclass(frozen=True)
class RunSummary:
    markers: LifetimeMarkers
    total_packets_bs: int
    total_packets_ch: int
    rounds_series: tuple[RoundReport, ...]
    config_echo: ScenarioConfig
    k_opt: Optional[float] = None


def alive_series(reports: Sequence[RoundReport]) -> list[int]:
    """Alive counts at each round boundary, starting before the first round."""
    if not reports:
        return []
    return [reports[0].alive_before] + [r.alive_after for r in reports]


def lifetime_markers(alive: Sequence[int], n: int) -> LifetimeMarkers:
    """Index of the first boundary with a death, with <= n//2 alive, with none alive."""

    def first(pred) -> Optional[int]:
        return next((i for i, a in enumerate(alive) if pred(a)), None)

    return LifetimeMarkers(
        fnd=first(lambda a: a < n),
        hnd=first(lambda a: a <= n // 2),
        lnd=first(lambda a: a == 0),
    )


def residual_energy_series(reports: Sequence[RoundReport], n: int) -> list[float]:
    """Average residual energy per deployed node at each round boundary.

    The first element is the untouched network; dead nodes count as 0.
    """
    if not reports:
        return []
    initial = reports[0].total_residual_j + reports[0].dissipated_j
    return [initial / n] + [r.total_residual_j / n for r in reports]


def throughput_series(reports: Sequence[RoundReport]) -> list[int]:
    return np.cumsum([r.packets_to_bs for r in reports], dtype=np.int64).tolist()


def summarize(reports: Sequence[RoundReport], cfg: ScenarioConfig, k_opt: Optional[float] = None) -> RunSummary:
    return RunSummary(
        markers=lifetime_markers(alive_series(reports), cfg.n_nodes),
        total_packets_bs=sum(r.packets_to_bs for r in reports),
        total_packets_ch=sum(r.packets_to_ch for r in reports),
        rounds_series=tuple(reports),
        config_echo=cfg,
        k_opt=k_opt,
    )


def energy_auc(summary: RunSummary, horizon: int) -> float:
    """Trapezoid area under the average-residual curve over boundaries 0..horizon.

    Runs that ended earlier are padded with their last value.
    """
    y = residual_energy_series(summary.rounds_series, summary.config_echo.n_nodes)
    if len(y) < horizon + 1:
        y = y + [y[-1] if y else 0.0] * (horizon + 1 - len(y))
    y = np.asarray(y[: horizon + 1])
    return float(np.sum((y[1:] + y[:-1]) / 2))


METRICS = ("fnd", "hnd", "lnd", "packets_bs", "energy_auc")


def _ratio(num, den) -> float:
    if num is None or den is None or den == 0:
        return math.nan
    return num / den


@dataclass(frozen=True)
class ComparisonTable:
    seeds: tuple[int, ...]
    per_seed: tuple[dict, ...]  # seed plus one ratio per metric
    mean: dict
    stderr: dict

    def to_dict(self) -> dict:
        return {"seeds": list(self.seeds), "per_seed": list(self.per_seed), "mean": self.mean, "stderr": self.stderr}


def _strip_protocol(cfg: ScenarioConfig) -> ScenarioConfig:
    return replace(cfg, proto=replace(cfg.proto, protocol=None, kopt_mode=None, kopt_override=None))


def mean_se(values) -> tuple[float, float]:
    v = np.asarray([x for x in values if x is not None and not math.isnan(x)], dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se


def compare_runs(a: Sequence[RunSummary], b: Sequence[RunSummary]) -> ComparisonTable:
    """Per-seed ratios b/a for each metric, with means and standard errors.

    ``a`` is the baseline. Runs are paired by position and must share seed
    and every setting except the protocol knobs. The energy AUC of both
    runs is taken up to the baseline's LND (or its last boundary).
    """
    if not a or not b:
        raise ValueError("compare_runs needs non-empty run lists")
    problems = []
    if len(a) != len(b):
        problems.append(f"run counts differ: {len(a)} vs {len(b)}")
    for i, (ra, rb) in enumerate(zip(a, b)):
        if ra.config_echo.seed != rb.config_echo.seed:
            problems.append(f"pair {i}: seed {ra.config_echo.seed} vs {rb.config_echo.seed}")
        elif _strip_protocol(ra.config_echo) != _strip_protocol(rb.config_echo):
            problems.append(f"pair {i}: configs differ beyond protocol settings")
    if problems:
        raise ValueError("mismatched run pairing: " + "; ".join(problems))

    rows = []
    for ra, rb in zip(a, b):
        horizon = ra.markers.lnd if ra.markers.lnd is not None else len(ra.rounds_series)
        rows.append({
            "seed": ra.config_echo.seed,
            "fnd": _ratio(rb.markers.fnd, ra.markers.fnd),
            "hnd": _ratio(rb.markers.hnd, ra.markers.hnd),
            "lnd": _ratio(rb.markers.lnd, ra.markers.lnd),
            "packets_bs": _ratio(rb.total_packets_bs, ra.total_packets_bs),
            "energy_auc": _ratio(energy_auc(rb, horizon), energy_auc(ra, horizon)),
        })
    mean, se = {}, {}
    for m in METRICS:
        mean[m], se[m] = mean_se(row[m] for row in rows)
    return ComparisonTable(seeds=tuple(r["seed"] for r in rows), per_seed=tuple(rows), mean=mean, stderr=se)
