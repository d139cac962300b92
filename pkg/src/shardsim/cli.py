"""Experiment harness: simulate single rounds, sweep grids, price idle
time, and self-verify the simulator's core guarantees.

Exit codes: 0 success, 1 infeasible configuration, 2 configuration
error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import config as config_mod
from .config import ExperimentConfig
from .errors import (
    ConfigError,
    InfeasibleConfigError,
    InternalInvariantError,
    ShardSimError,
)
from .executor import FunctionExecutor, check_feasibility, estimate_peak_memory
from .gradients import GradientTensor, fedavg_flat
from .models import MODEL_REGISTRY, gradient_template, make_clients, resolve_model
from .pricing import cost_of_round, feasibility_threshold, idle_ratio
from .store import ObjectStore
from .topology import (
    GRADSHARDING,
    LAMBDAFL,
    LIFL,
    Topology,
    SweepPoint,
    execute_round,
    plan,
    predicted_s3_ops,
    sweep,
)

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_CONFIG = 2
EXIT_INVARIANT = 3

CSV_COLUMNS = [
    "topology", "N", "M", "model", "shard_mb", "s3_read_s", "compute_s",
    "s3_write_s", "wall_clock_s", "speedup_vs_first", "puts", "gets",
    "lambda_cost", "s3_cost", "cost_per_1k", "peak_mem_mb", "feasible",
]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def _parse_args(argv: Optional[Sequence[str]]) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="shardsim",
        description="Simulate serverless federated-learning aggregation rounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", type=Path, help="TOML config file")
        p.add_argument("--topology", choices=[GRADSHARDING, LAMBDAFL, LIFL, "all"])
        p.add_argument("--n", type=int, help="clients per round")
        p.add_argument("--m", type=int, help="shard count (gradsharding)")
        p.add_argument("--model", help=f"one of: {', '.join(sorted(MODEL_REGISTRY))}")
        p.add_argument("--gradient-mb", type=float, dest="gradient_mb",
                       help="gradient size in MB (runs as phantom)")
        p.add_argument("--throughput", type=float,
                       help="object-store MB/s (sets read and write)")
        p.add_argument("--latency", type=float, dest="per_op_latency_s",
                       help="per-request latency in seconds")
        p.add_argument("--seed", type=int)
        p.add_argument("--cold-start", action="store_true", default=None,
                       dest="cold_start", help="charge a cold-start penalty")
        p.add_argument("--memory-mb", type=float, dest="memory_override_mb",
                       help="override per-function memory allocation")
        p.add_argument("--output", type=Path, help="output file path")

    sim = sub.add_parser("simulate", help="run one aggregation round")
    add_common(sim)

    swp = sub.add_parser("sweep", help="run a parameter grid, one CSV row per point")
    add_common(swp)
    swp.add_argument("--axis", choices=["m", "model-size"], required=True)
    swp.add_argument("--values", required=True,
                     help="comma-separated grid values (m counts, MB sizes, or model names)")

    idl = sub.add_parser("idle", help="idle-ratio table from training/aggregation times")
    idl.add_argument("--train-table", type=Path,
                     help="CSV with model,t_train_ms,t_agg_ms rows (default: built-in)")
    idl.add_argument("--output", type=Path)

    sub.add_parser("verify", help="run the built-in correctness suites")

    return parser.parse_args(argv)


_CLI_CONFIG_KEYS = (
    "topology", "n", "m", "model", "gradient_mb", "seed", "cold_start",
    "per_op_latency_s", "memory_override_mb",
)


def _config_from_args(args: argparse.Namespace,
                      require_gradient: bool = True) -> ExperimentConfig:
    file_overrides: Dict = {}
    if args.config is not None:
        file_overrides = config_mod.load_config_file(args.config)
    cli: Dict = {}
    for key in _CLI_CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None and value != "all":
            cli[key] = value
    if getattr(args, "throughput", None) is not None:
        cli["read_throughput_mb_s"] = args.throughput
        cli["write_throughput_mb_s"] = args.throughput
    if getattr(args, "model", None) is not None:
        if args.model not in MODEL_REGISTRY:
            raise ConfigError(
                f"model: unknown name {args.model!r}; "
                f"available: {', '.join(sorted(MODEL_REGISTRY))}"
            )
        cli.pop("gradient_mb", None)
    return config_mod.build_config(file_overrides, cli, require_gradient)


@dataclass
class RunSetup:
    cfg: ExperimentConfig
    model_name: str
    gradient_mb: float
    template: GradientTensor


def _setup(cfg: ExperimentConfig, size_mb: Optional[float] = None,
           model_name: Optional[str] = None) -> RunSetup:
    """Resolve the gradient template for one run, honoring the
    materialization threshold."""
    if model_name is None:
        model_name = cfg.model
    param_count = None
    if size_mb is None:
        if model_name is not None:
            spec = resolve_model(model_name)
            size_mb = spec.gradient_mb
            param_count = spec.param_count
        else:
            size_mb = cfg.gradient_mb
    materialize = size_mb <= cfg.materialize_threshold_mb
    template = gradient_template(size_mb, materialize, param_count)
    return RunSetup(cfg=cfg, model_name=model_name or f"{size_mb:g}MB",
                    gradient_mb=size_mb, template=template)


def _run_round(setup: RunSetup, topology: Topology):
    cfg = setup.cfg
    store = ObjectStore(cfg.transfer())
    executor = FunctionExecutor(
        limits=cfg.limits(),
        compute_throughput=cfg.compute_throughput_mb_s,
        cold_start_s=cfg.cold_start_penalty_s if cfg.cold_start else 0.0,
    )
    round_plan = plan(topology, cfg.n, setup.template, cfg.limits(),
                      memory_override_mb=cfg.memory_override_mb)
    clients = make_clients(setup.template, cfg.n, cfg.seed)
    return execute_round(round_plan, store, executor, clients)


def _topology_from_cfg(cfg: ExperimentConfig) -> Topology:
    return Topology(cfg.topology, cfg.m if cfg.topology == GRADSHARDING else 1)


def _resolve_output(path: Optional[Path], cfg: ExperimentConfig) -> Optional[Path]:
    if path is None or path.is_absolute():
        return path
    return cfg.resolved_output_dir() / path


def _write_json(path: Optional[Path], cfg: ExperimentConfig, payload: dict) -> None:
    doc = {"config": cfg.to_dict(), **payload}
    text = json.dumps(doc, indent=2, sort_keys=True)
    path = _resolve_output(path, cfg)
    if path is None:
        print(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text + "\n")
        print(f"wrote {path}")


def _human_table(metrics, cost) -> str:
    rows = [
        ("topology", metrics.topology.label),
        ("clients", metrics.n_clients),
        ("gradient MB", f"{metrics.gradient_mb:.1f}"),
        ("wall clock s", f"{metrics.wall_clock_s:.2f}"),
        ("  s3 read s", f"{metrics.s3_read_s:.2f}"),
        ("  compute s", f"{metrics.compute_s:.2f}"),
        ("  s3 write s", f"{metrics.s3_write_s:.2f}"),
        ("PUTs / GETs", f"{metrics.puts} / {metrics.gets}"),
        ("peak memory MB", f"{metrics.feasibility.required_mb:.0f}"),
        ("billed GB-s", f"{metrics.billed_gb_seconds:.2f}"),
        ("cost per round $", f"{cost.total:.6f}"),
        ("cost per 1K rounds $", f"{cost.per_1k_rounds:.2f}"),
    ]
    width = max(len(label) for label, _ in rows)
    return "\n".join(f"{label:<{width}}  {value}" for label, value in rows)


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    setup = _setup(cfg)
    topology = _topology_from_cfg(cfg)
    try:
        rounds = [_run_round(setup, topology) for _ in range(cfg.repetitions)]
    except InfeasibleConfigError as exc:
        record = {
            "feasible": False,
            "topology": topology.kind,
            "m": topology.m,
            "n": cfg.n,
            "model": setup.model_name,
            "gradient_mb": setup.gradient_mb,
            "required_mb": exc.required_mb,
            "limit_mb": exc.limit_mb,
        }
        _write_json(args.output, cfg, {"infeasible": record})
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    prices = cfg.prices()
    report = cost_of_round(rounds[0], prices)
    print(_human_table(rounds[0], report))
    payload = {
        "model": setup.model_name,
        "rounds": [
            {**m.to_json_dict(), "cost": cost_of_round(m, prices).to_dict()}
            for m in rounds
        ],
    }
    _write_json(args.output, cfg, payload)
    return EXIT_OK


def _sweep_rows(cfg: ExperimentConfig, points: List[SweepPoint],
                model_names: List[str]) -> List[Dict[str, object]]:
    prices = cfg.prices()
    rows = []
    for point, model_name in zip(points, model_names):
        stream_mb = (point.gradient_mb / point.topology.m
                     if point.topology.kind == GRADSHARDING else point.gradient_mb)
        row: Dict[str, object] = {
            "topology": point.topology.kind,
            "N": point.n_clients,
            "M": point.topology.m if point.topology.kind == GRADSHARDING else 1,
            "model": model_name,
            "shard_mb": stream_mb,
            "feasible": point.feasible,
        }
        if point.feasible:
            metrics = point.metrics
            cost = cost_of_round(metrics, prices)
            row.update({
                "s3_read_s": metrics.s3_read_s,
                "compute_s": metrics.compute_s,
                "s3_write_s": metrics.s3_write_s,
                "wall_clock_s": metrics.wall_clock_s,
                "speedup_vs_first": point.speedup_vs_first,
                "puts": metrics.puts,
                "gets": metrics.gets,
                "lambda_cost": cost.lambda_cost,
                "s3_cost": cost.s3_cost,
                "cost_per_1k": cost.per_1k_rounds,
                "peak_mem_mb": metrics.feasibility.required_mb,
            })
        else:
            row.update({
                "s3_read_s": None, "compute_s": None, "s3_write_s": None,
                "wall_clock_s": None, "speedup_vs_first": None,
                "puts": None, "gets": None, "lambda_cost": None,
                "s3_cost": None, "cost_per_1k": None,
                "peak_mem_mb": point.required_mb,
            })
        rows.append(row)
    return rows


def render_csv(rows: List[Dict[str, object]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[col]) for col in CSV_COLUMNS])
    return buf.getvalue()


def _run_sweep(cfg: ExperimentConfig, entries: List[tuple]) -> List[SweepPoint]:
    def make_store():
        return ObjectStore(cfg.transfer())

    def make_executor():
        return FunctionExecutor(
            limits=cfg.limits(),
            compute_throughput=cfg.compute_throughput_mb_s,
            cold_start_s=cfg.cold_start_penalty_s if cfg.cold_start else 0.0,
        )

    return sweep(entries, cfg.n, make_store=make_store,
                 make_executor=make_executor,
                 make_clients=lambda t: make_clients(t, cfg.n, cfg.seed),
                 limits=cfg.limits(),
                 memory_override_mb=cfg.memory_override_mb)


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args, require_gradient=args.axis == "m")
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("values: empty grid")

    rows: List[Dict[str, object]] = []
    if args.axis == "m":
        if cfg.topology != GRADSHARDING:
            raise ConfigError("axis m: only gradsharding has a shard count")
        try:
            m_values = [int(v) for v in values]
        except ValueError as exc:
            raise ConfigError(f"values: {exc}") from None
        setup = _setup(cfg)
        entries = [(Topology(GRADSHARDING, m), setup.template, f"m={m}")
                   for m in m_values]
        points = _run_sweep(cfg, entries)
        rows = _sweep_rows(cfg, points, [setup.model_name] * len(points))
    else:
        sizes: List[tuple] = []
        for token in values:
            if token in MODEL_REGISTRY:
                spec = MODEL_REGISTRY[token]
                sizes.append((spec.gradient_mb, token))
            else:
                try:
                    sizes.append((float(token), None))
                except ValueError:
                    raise ConfigError(
                        f"values: {token!r} is neither a model name nor a size in MB"
                    ) from None
        topologies = ([Topology(GRADSHARDING, cfg.m), Topology(LAMBDAFL), Topology(LIFL)]
                      if args.topology == "all" else [_topology_from_cfg(cfg)])
        per_topo: Dict[str, List[Dict[str, object]]] = {}
        for topo in topologies:
            entries, names = [], []
            for size_mb, model_name in sizes:
                setup = _setup(cfg, size_mb=size_mb, model_name=model_name)
                entries.append((topo, setup.template, setup.model_name))
                names.append(setup.model_name)
            points = _run_sweep(cfg, entries)
            per_topo[topo.label] = _sweep_rows(cfg, points, names)
        # size-major, topology-minor ordering
        for i in range(len(sizes)):
            for topo in topologies:
                rows.append(per_topo[topo.label][i])

    text = render_csv(rows)
    output = _resolve_output(args.output, cfg)
    if output is None:
        sys.stdout.write(text)
    else:
        output.parent.mkdir(parents=True, exist_ok=True)
        output.write_text(text)
        sidecar = output.with_name(output.name + ".config.json")
        sidecar.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
        print(f"wrote {output} ({len(rows)} rows) and {sidecar}")
    return EXIT_OK


def _default_idle_table() -> str:
    return resources.files("shardsim").joinpath("data/idle_times.csv").read_text()


def cmd_idle(args: argparse.Namespace) -> int:
    if args.train_table is not None:
        try:
            text = args.train_table.read_text()
        except OSError as exc:
            raise ConfigError(f"train-table: {exc}") from exc
    else:
        text = _default_idle_table()

    reader = csv.DictReader(io.StringIO(text))
    required = {"model", "t_train_ms", "t_agg_ms"}
    if reader.fieldnames is None or not required.issubset(reader.fieldnames):
        raise ConfigError(
            f"train-table: need columns {sorted(required)}, got {reader.fieldnames}"
        )
    out_rows = []
    for lineno, row in enumerate(reader, start=2):
        try:
            t_train = float(row["t_train_ms"])
            t_agg = float(row["t_agg_ms"])
        except (TypeError, ValueError):
            raise ConfigError(f"train-table: bad numbers on line {lineno}") from None
        report = idle_ratio(t_train, t_agg)
        if t_agg == 0:
            print(f"warning: {row['model']}: zero aggregation time, "
                  "idle ratio degenerates to 100%", file=sys.stderr)
        out_rows.append((row["model"], t_train, t_agg, report.idle_pct))

    header = f"{'model':<14} {'t_train_ms':>12} {'t_agg_ms':>10} {'idle_pct':>9}"
    lines = [header]
    for model, t_train, t_agg, pct in out_rows:
        lines.append(f"{model:<14} {t_train:>12.0f} {t_agg:>10.0f} {pct:>9.1f}")
    print("\n".join(lines))

    if args.output is not None:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["model", "t_train_ms", "t_agg_ms", "idle_pct"])
        for model, t_train, t_agg, pct in out_rows:
            writer.writerow([model, _fmt(t_train), _fmt(t_agg), f"{pct:.1f}"])
        args.output.parent.mkdir(parents=True, exist_ok=True)
        args.output.write_text(buf.getvalue())
        print(f"wrote {args.output}")
    return EXIT_OK


# -- verify ----------------------------------------------------------------

def _verify_oracle(report) -> bool:
    ok = True
    cfg = ExperimentConfig()
    for n in range(1, 13):
        clients = [GradientTensor.from_seed(97, seed=7000 + i) for i in range(n)]
        reference = fedavg_flat(clients)
        for topo in ([Topology(GRADSHARDING, m) for m in range(1, 6)]
                     + [Topology(LAMBDAFL), Topology(LIFL)]):
            metrics = execute_round(
                plan(topo, n, clients[0]),
                ObjectStore(cfg.transfer()), FunctionExecutor(), clients)
            got = metrics.result.require_values()
            want = reference.require_values()
            if topo.kind == GRADSHARDING:
                good = np.array_equal(got, want)
                detail = "bit-identical"
            else:
                good = np.allclose(got, want, rtol=1e-5, atol=1e-6)
                detail = "within 1e-5"
            if not good:
                report(False, f"oracle: {topo.label} N={n} diverges from flat average")
                ok = False
    if ok:
        report(True, "oracle: gradsharding bit-identical, trees within 1e-5 "
                     "(N in 1..12, M in 1..5)")
    return ok


def _verify_op_counts(report) -> bool:
    ok = True
    cfg = ExperimentConfig()
    grid = [(Topology(GRADSHARDING, m), n) for n in (1, 5, 20, 33) for m in (1, 2, 4, 16)]
    grid += [(Topology(LAMBDAFL), n) for n in (1, 5, 20, 33)]
    grid += [(Topology(LIFL), n) for n in (1, 5, 20, 33)]
    for topo, n in grid:
        template = GradientTensor.phantom(4096)
        metrics = execute_round(
            plan(topo, n, template), ObjectStore(cfg.transfer()),
            FunctionExecutor(), make_clients(template, n, seed=0))
        forecast = predicted_s3_ops(topo, n)
        if (metrics.puts, metrics.gets) != (forecast.puts, forecast.gets):
            report(False, f"op-count: {topo.label} N={n}: executed "
                          f"{metrics.puts}/{metrics.gets}, formula "
                          f"{forecast.puts}/{forecast.gets}")
            ok = False
    if ok:
        report(True, "op-count: executed PUT/GET tallies match the closed forms")
    return ok


def _verify_feasibility(report) -> bool:
    checks = [
        (round(estimate_peak_memory(2953.0)) == 9309, "full 2953 MB needs 9309 MB"),
        (round(estimate_peak_memory(5120.0)) == 15810, "full 5120 MB needs 15810 MB"),
        (round(estimate_peak_memory(2953.0 / 4)) == 2665, "2953/4 shard needs 2665 MB"),
        (round(estimate_peak_memory(5120.0 / 8)) == 2370, "5120/8 shard needs 2370 MB"),
        (check_feasibility(3263, 1).feasible, "3263 MB fits at M=1"),
        (not check_feasibility(3264, 1).feasible, "3264 MB exceeds the ceiling at M=1"),
        (abs(feasibility_threshold() - (10240 - 450) / 3) < 1e-9,
         "threshold is (max - overhead) / multiplier"),
    ]
    ok = True
    for good, label in checks:
        if not good:
            report(False, f"feasibility: {label}")
            ok = False
    if ok:
        report(True, "feasibility: memory formula and 3263/3264 MB boundary")
    return ok


def cmd_verify(_args: argparse.Namespace) -> int:
    failures = 0

    def report(good: bool, message: str):
        nonlocal failures
        print(f"{'PASS' if good else 'FAIL'}  {message}")
        if not good:
            failures += 1

    for suite in (_verify_oracle, _verify_op_counts, _verify_feasibility):
        suite(report)
    print(f"verify: {'all suites passed' if failures == 0 else f'{failures} failure(s)'}")
    return EXIT_OK if failures == 0 else EXIT_INVARIANT


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parse_args(argv)
    handlers = {
        "simulate": cmd_simulate,
        "sweep": cmd_sweep,
        "idle": cmd_idle,
        "verify": cmd_verify,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleConfigError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except InternalInvariantError as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ShardSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
