"""Command line: ``sim run|compare|sweep``.

Config files are JSON with unit-suffixed keys so pJ/nJ magnitudes are
explicit. Every output file carries the resolved configuration, seed(s)
and package version.
"""

from __future__ import annotations

import argparse
import enum
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .engine import run_simulation
from .metrics import (
    ComparisonTable,
    RunSummary,
    alive_series,
    compare_runs,
    mean_se,
    residual_energy_series,
    throughput_series,
)
from .model import (
    CENTER,
    NJ,
    PJ,
    ConfigError,
    Fallback,
    KoptMode,
    Position,
    Protocol,
    ProtocolParams,
    RadioParams,
    ScenarioConfig,
    validate_config,
)

log = logging.getLogger("rleach")

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2

K_OPT_FORMULA = "sqrt(n/(2*pi)) * sqrt(e_fs/e_mp) * M / mean_d_to_bs^2"

# JSON key -> (path in ScenarioConfig, validate_config error name)
_KEY_PATHS = {
    "seed": "seed",
    "n_nodes": "n_nodes",
    "field_m": "field_m",
    "bs_position": "bs_position",
    "packet_bits": "packet_bits",
    "e0_j": "e0_joules",
    "max_rounds": "max_rounds",
    "no_ch_fallback": "no_ch_fallback",
    "e_elec_nj_per_bit": "radio.e_elec",
    "e_fs_pj_per_bit_m2": "radio.e_fs",
    "e_mp_pj_per_bit_m4": "radio.e_mp",
    "e_da_nj_per_bit": "radio.e_da",
    "protocol": "proto.protocol",
    "p_ch": "proto.p_ch",
    "kopt_mode": "proto.kopt_mode",
    "kopt_override": "proto.kopt_override",
}
_UNIT_SCALE = {
    "e_elec_nj_per_bit": NJ,
    "e_fs_pj_per_bit_m2": PJ,
    "e_mp_pj_per_bit_m4": PJ,
    "e_da_nj_per_bit": NJ,
}
_ENUMS = {"protocol": Protocol, "kopt_mode": KoptMode, "no_ch_fallback": Fallback}


class Emit(str, enum.Enum):
    ROUND_CSV = "csv"
    SUMMARY_JSON = "json"
    PLOT_DAT = "dat"


@dataclass(frozen=True)
class RunManifest:
    scenario: ScenarioConfig
    seeds: tuple[int, ...]
    output_dir: Path
    emit: frozenset[Emit] = field(default_factory=lambda: frozenset(Emit))
    jobs: int = 1

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError([("seeds", self.seeds, "must be non-empty")])
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError([("seeds", self.seeds, "must be pairwise distinct")])


# ---------------------------------------------------------------- config I/O


def config_from_dict(doc: dict) -> ScenarioConfig:
    """Build and validate a scenario from a unit-suffixed key mapping."""
    if not isinstance(doc, dict):
        raise ConfigError([("<root>", doc, "config must be a JSON object")])
    errors = []
    unknown = sorted(set(doc) - set(_KEY_PATHS))
    errors += [(k, doc[k], "unknown key") for k in unknown]

    top, radio, proto = {}, {}, {}
    for key, raw in doc.items():
        if key in unknown:
            continue
        value = raw
        if key in _UNIT_SCALE:
            if isinstance(raw, bool) or not isinstance(raw, (int, float)):
                errors.append((key, raw, "must be a number"))
                continue
            value = raw * _UNIT_SCALE[key]
        elif key in _ENUMS:
            try:
                value = _ENUMS[key](str(raw).lower())
            except ValueError:
                errors.append((key, raw, f"must be one of {[e.value for e in _ENUMS[key]]}"))
                continue
        elif key == "bs_position":
            if isinstance(raw, str) and raw.lower() == CENTER:
                value = CENTER
            elif isinstance(raw, (list, tuple)) and len(raw) == 2:
                value = Position(*raw)
            else:
                errors.append((key, raw, "must be 'center' or [x, y]"))
                continue
        path = _KEY_PATHS[key]
        if path.startswith("radio."):
            radio[path[6:]] = value
        elif path.startswith("proto."):
            proto[path[6:]] = value
        else:
            top[path] = value

    cfg = ScenarioConfig(**top, radio=RadioParams(**radio), proto=ProtocolParams(**proto))
    try:
        cfg = validate_config(cfg)
    except ConfigError as exc:
        reverse = {v: k for k, v in _KEY_PATHS.items()}
        errors += [(reverse.get(name, name), value, why) for name, value, why in exc.errors]
    if errors:
        raise ConfigError(errors)
    return cfg


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError([(str(path), None, f"JSON parse error: {exc}")]) from exc
    return config_from_dict(doc)


def config_to_dict(cfg: ScenarioConfig) -> dict:
    """Inverse of config_from_dict; unit-scaled values keep 12 significant digits."""
    cfg = validate_config(cfg)
    out = {}
    for key, path in _KEY_PATHS.items():
        obj = cfg
        for part in path.split("."):
            obj = getattr(obj, part)
        if key in _UNIT_SCALE:
            obj = float(f"{obj / _UNIT_SCALE[key]:.12g}")
        elif isinstance(obj, enum.Enum):
            obj = obj.value
        elif isinstance(obj, Position):
            obj = [obj.x, obj.y]
        out[key] = obj
    return out


# ---------------------------------------------------------------- formatting


def fmt(x: float) -> str:
    """Shortest round-tripping decimal (never exponent) notation."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return np.format_float_positional(float(x), unique=True, trim="-")


def _finite_or_none(x):
    if x is None:
        return None
    return None if isinstance(x, float) and math.isnan(x) else x


def _meta_lines(cfg: ScenarioConfig, seeds: Iterable[int]) -> list[str]:
    return [
        f"# rleach {__version__}",
        f"# seeds: {' '.join(str(s) for s in seeds)}",
        f"# kopt_mode: {cfg.proto.kopt_mode.value}",
        f"# config: {json.dumps(config_to_dict(cfg), sort_keys=True)}",
    ]


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _csv_text(meta: list[str], header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = list(meta)
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(fmt(v) if isinstance(v, (int, float, np.number)) else str(v) for v in row))
    return "\n".join(lines) + "\n"


ROUND_HEADER = (
    "round", "alive", "ch_count", "direct_count", "packets_to_bs_cum", "packets_to_ch_cum",
    "dissipated_j", "total_residual_j", "avg_residual_j",
)


def round_rows(summary: RunSummary) -> list[tuple]:
    """One row per round boundary; row 0 is the freshly deployed network."""
    reports = summary.rounds_series
    cfg = summary.config_echo
    n = cfg.n_nodes
    alive = alive_series(reports) or [n]
    avg = residual_energy_series(reports, n)
    bs_cum = [0] + throughput_series(reports)
    ch_cum = [0] + np.cumsum([r.packets_to_ch for r in reports], dtype=np.int64).tolist()
    rows = [(0, n, 0, 0, 0, 0, 0.0, n * cfg.e0_joules, cfg.e0_joules)]
    for i, rep in enumerate(reports, start=1):
        rows.append((
            i, alive[i], rep.ch_count, rep.direct_count, bs_cum[i], ch_cum[i],
            rep.dissipated_j, rep.total_residual_j, avg[i],
        ))
    return rows


def summary_to_dict(summary: RunSummary) -> dict:
    cfg = summary.config_echo
    m = summary.markers
    return {
        "version": __version__,
        "seed": cfg.seed,
        "config": config_to_dict(cfg),
        "resolved": {
            "bs_position": [cfg.bs.x, cfg.bs.y],
            "kopt_mode": cfg.proto.kopt_mode.value,
            "k_opt": _finite_or_none(summary.k_opt),
            "k_opt_formula": K_OPT_FORMULA if cfg.proto.kopt_override is None else "override",
            "no_ch_fallback": cfg.no_ch_fallback.value,
        },
        "markers": {
            "fnd": m.fnd, "hnd": m.hnd, "lnd": m.lnd,
            "stability_period": m.stability_period, "lifetime_span": m.lifetime_span,
        },
        "total_packets_bs": summary.total_packets_bs,
        "total_packets_ch": summary.total_packets_ch,
        "rounds": [
            {
                "round": r.round, "alive_before": r.alive_before, "ch_count": r.ch_count,
                "direct_count": r.direct_count, "packets_to_bs": r.packets_to_bs,
                "packets_to_ch": r.packets_to_ch, "dissipated_j": r.dissipated_j,
                "total_residual_j": r.total_residual_j, "deaths": list(r.deaths),
                "cluster_heads": list(r.cluster_heads),
            }
            for r in summary.rounds_series
        ],
    }


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=1, allow_nan=False) + "\n"


# ---------------------------------------------------------------- batch


def run_batch(configs: Sequence[ScenarioConfig], jobs: int = 1) -> list[RunSummary]:
    """Simulate each config; results come back in input order regardless of ``jobs``."""
    if jobs > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(run_simulation, configs))
    return [run_simulation(c) for c in configs]


def aggregate(runs: Sequence[RunSummary]) -> dict:
    out = {}
    for name, get in (
        ("fnd", lambda r: r.markers.fnd),
        ("hnd", lambda r: r.markers.hnd),
        ("lnd", lambda r: r.markers.lnd),
        ("packets_bs", lambda r: r.total_packets_bs),
    ):
        mean, se = mean_se(get(r) for r in runs)
        out[f"mean_{name}"] = mean
        if name != "packets_bs":
            out[f"se_{name}"] = se
    return out


def _seeded(cfg: ScenarioConfig, seeds: Sequence[int]) -> list[ScenarioConfig]:
    return [replace(cfg, seed=s) for s in seeds]


def compare_protocols(cfg: ScenarioConfig, seeds: Sequence[int], jobs: int = 1):
    """LEACH and R-LEACH runs on identical seeds, plus their ratio table."""
    leach_cfg = cfg.with_protocol(Protocol.LEACH)
    rleach_cfg = cfg.with_protocol(Protocol.RLEACH)
    runs = run_batch(_seeded(leach_cfg, seeds) + _seeded(rleach_cfg, seeds), jobs)
    leach, rleach = runs[: len(seeds)], runs[len(seeds):]
    return leach, rleach, compare_runs(leach, rleach)


def mean_curve(runs: Sequence[RunSummary], series: Callable[[RunSummary], list], length: int) -> list[float]:
    """Seed-averaged curve; finished runs hold their last value."""
    acc = np.zeros(length)
    for r in runs:
        y = list(series(r))
        y += [y[-1]] * (length - len(y))
        acc += np.asarray(y[:length], dtype=float)
    return (acc / len(runs)).tolist()


PLOT_SERIES = {
    "lifetime.dat": lambda r: alive_series(r.rounds_series),
    "packets.dat": lambda r: [0] + throughput_series(r.rounds_series),
    "energy.dat": lambda r: residual_energy_series(r.rounds_series, r.config_echo.n_nodes),
}


def plot_dat_text(meta: list[str], by_protocol: dict[str, Sequence[RunSummary]], series) -> str:
    """gnuplot data: one two-column block per protocol, blocks separated by two blank lines."""
    length = max(len(r.rounds_series) + 1 for runs in by_protocol.values() for r in runs)
    blocks = []
    for name, runs in by_protocol.items():
        curve = mean_curve(runs, series, length)
        lines = [f"# protocol: {name}", "# round value"]
        lines += [f"{i} {fmt(v)}" for i, v in enumerate(curve)]
        blocks.append("\n".join(lines))
    return "\n".join(meta) + "\n" + "\n\n\n".join(blocks) + "\n"


# ---------------------------------------------------------------- commands


def cmd_run(manifest: RunManifest) -> list[Path]:
    out = manifest.output_dir
    out.mkdir(parents=True, exist_ok=True)
    runs = run_batch(_seeded(manifest.scenario, manifest.seeds), manifest.jobs)
    written = []
    for summary in runs:
        seed = summary.config_echo.seed
        if Emit.ROUND_CSV in manifest.emit:
            path = out / f"run_{seed}.csv"
            _write_text(path, _csv_text(_meta_lines(summary.config_echo, [seed]), ROUND_HEADER, round_rows(summary)))
            written.append(path)
        if Emit.SUMMARY_JSON in manifest.emit:
            path = out / f"run_{seed}.json"
            _write_text(path, _dump_json(summary_to_dict(summary)))
            written.append(path)
    return written


def _compare_doc(cfg, seeds, leach, rleach, table: ComparisonTable) -> dict:
    return {
        "version": __version__,
        "config": config_to_dict(cfg),
        "kopt_mode": cfg.proto.kopt_mode.value,
        "k_opt_formula": K_OPT_FORMULA if cfg.proto.kopt_override is None else "override",
        "no_ch_fallback": cfg.no_ch_fallback.value,
        "seeds": list(seeds),
        "protocols": {"leach": aggregate(leach), "rleach": aggregate(rleach)},
        "ratios": {
            "baseline": "leach",
            "per_seed": [{k: _finite_or_none(v) for k, v in row.items()} for row in table.per_seed],
            "mean": {k: _finite_or_none(v) for k, v in table.mean.items()},
            "stderr": {k: _finite_or_none(v) for k, v in table.stderr.items()},
        },
        "runs": [
            {
                "seed": a.config_echo.seed,
                "k_opt": _finite_or_none(b.k_opt),
                "leach": {"fnd": a.markers.fnd, "hnd": a.markers.hnd, "lnd": a.markers.lnd,
                          "packets_bs": a.total_packets_bs},
                "rleach": {"fnd": b.markers.fnd, "hnd": b.markers.hnd, "lnd": b.markers.lnd,
                           "packets_bs": b.total_packets_bs},
            }
            for a, b in zip(leach, rleach)
        ],
    }


def cmd_compare(manifest: RunManifest) -> list[Path]:
    out = manifest.output_dir
    out.mkdir(parents=True, exist_ok=True)
    cfg = manifest.scenario
    leach, rleach, table = compare_protocols(cfg, manifest.seeds, manifest.jobs)
    meta = _meta_lines(cfg, manifest.seeds)
    written = []
    if Emit.SUMMARY_JSON in manifest.emit:
        path = out / "compare.json"
        _write_text(path, _dump_json(_compare_doc(cfg, manifest.seeds, leach, rleach, table)))
        written.append(path)
    if Emit.ROUND_CSV in manifest.emit:
        header = ("seed", "fnd_ratio", "hnd_ratio", "lnd_ratio", "packets_bs_ratio", "energy_auc_ratio")
        metrics = ("fnd", "hnd", "lnd", "packets_bs", "energy_auc")
        rows = [[row["seed"]] + [row[m] for m in metrics] for row in table.per_seed]
        rows.append(["mean"] + [table.mean[m] for m in metrics])
        rows.append(["stderr"] + [table.stderr[m] for m in metrics])
        path = out / "compare.csv"
        _write_text(path, _csv_text(meta, header, rows))
        written.append(path)
    if Emit.PLOT_DAT in manifest.emit:
        for name, series in PLOT_SERIES.items():
            path = out / name
            _write_text(path, plot_dat_text(meta, {"leach": leach, "rleach": rleach}, series))
            written.append(path)
    return written


SWEEP_HEADER = (
    "axis_value", "protocol", "mean_fnd", "mean_hnd", "mean_lnd", "mean_packets_bs",
    "se_fnd", "se_hnd", "se_lnd",
)


def sweep_rows(cfg: ScenarioConfig, seeds, axis: str, values, jobs: int = 1) -> list[tuple]:
    field_name = {"e0": "e0_joules", "packet_bits": "packet_bits"}[axis]
    rows = []
    for value in sorted(values):
        point = validate_config(replace(cfg, **{field_name: value}))
        leach, rleach, _ = compare_protocols(point, seeds, jobs)
        for proto, runs in (("leach", leach), ("rleach", rleach)):
            agg = aggregate(runs)
            rows.append((value, proto) + tuple(agg[h] for h in SWEEP_HEADER[2:]))
    return rows


def cmd_sweep(manifest: RunManifest, axis: str, values: Sequence) -> list[Path]:
    if not values:
        raise ConfigError([(axis, values, "axis values must be non-empty")])
    out = manifest.output_dir
    out.mkdir(parents=True, exist_ok=True)
    rows = sweep_rows(manifest.scenario, manifest.seeds, axis, values, manifest.jobs)
    meta = _meta_lines(manifest.scenario, manifest.seeds) + [f"# axis: {axis}"]
    path = out / "sweep.csv"
    _write_text(path, _csv_text(meta, SWEEP_HEADER, rows))
    return [path]


# ---------------------------------------------------------------- argv


def parse_seeds(text: str, base_seed: int) -> tuple[int, ...]:
    """``"30"`` means 30 consecutive seeds from the config seed; ``"1,5,9"`` is an explicit list."""
    try:
        if "," in text:
            return tuple(int(s) for s in text.split(",") if s.strip())
        count = int(text)
    except ValueError:
        raise ConfigError([("--seeds", text, "must be a count or a comma-separated list")])
    if count < 1:
        raise ConfigError([("--seeds", text, "count must be >= 1")])
    return tuple(base_seed + i for i in range(count))


def _parse_values(text: str, conv) -> list:
    try:
        return [conv(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError([("axis", text, "values must be a comma-separated list of numbers")])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sim", description="LEACH / R-LEACH wireless sensor network simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "compare", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON scenario (defaults if omitted)")
        p.add_argument("--seeds", default="1", help="count from the config seed, or comma list")
        p.add_argument("--out", type=Path, required=True)
        p.add_argument("--protocol", choices=[e.value for e in Protocol])
        p.add_argument("--kopt-mode", choices=[e.value for e in KoptMode])
        p.add_argument("--fallback", choices=[e.value for e in Fallback])
        p.add_argument("--emit", default="csv,json,dat", help="subset of csv,json,dat")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        if name == "sweep":
            axis = p.add_mutually_exclusive_group(required=True)
            axis.add_argument("--e0", help="comma list of initial energies (J)")
            axis.add_argument("--packet-bits", help="comma list of packet sizes (bits)")
    return parser


def manifest_from_args(args) -> RunManifest:
    cfg = load_config(args.config) if args.config else validate_config(ScenarioConfig())
    proto_changes = {}
    if args.protocol:
        proto_changes["protocol"] = Protocol(args.protocol)
    if args.kopt_mode:
        proto_changes["kopt_mode"] = KoptMode(args.kopt_mode)
    if proto_changes:
        cfg = replace(cfg, proto=replace(cfg.proto, **proto_changes))
    if args.fallback:
        cfg = replace(cfg, no_ch_fallback=Fallback(args.fallback))
    try:
        emit = frozenset(Emit(e.strip()) for e in args.emit.split(",") if e.strip())
    except ValueError:
        raise ConfigError([("--emit", args.emit, "must be a subset of csv,json,dat")])
    if args.jobs < 1:
        raise ConfigError([("--jobs", args.jobs, "must be >= 1")])
    return RunManifest(
        scenario=validate_config(cfg),
        seeds=parse_seeds(args.seeds, cfg.seed),
        output_dir=args.out,
        emit=emit,
        jobs=args.jobs,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        manifest = manifest_from_args(args)
        cfg = manifest.scenario
        log.info("kopt_mode=%s fallback=%s seeds=%s", cfg.proto.kopt_mode.value, cfg.no_ch_fallback.value, manifest.seeds)
        if args.command == "run":
            written = cmd_run(manifest)
        elif args.command == "compare":
            written = cmd_compare(manifest)
        else:
            if args.e0 is not None:
                written = cmd_sweep(manifest, "e0", _parse_values(args.e0, float))
            else:
                written = cmd_sweep(manifest, "packet_bits", _parse_values(args.packet_bits, int))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
