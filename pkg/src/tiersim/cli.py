"""Command-line front end: generate traces, simulate, run presets, characterize.

Every report is written next to a flat key=value manifest echoing the
fully-resolved configuration; `tiersim sim --manifest <file>` replays a
manifest and reproduces the original report byte for byte.

Exit codes: 0 success, 1 usage or I/O error, 2 scenario assertion failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .chameleon import Characterizer, CharacterizerConfig, stats_csv
from .core import ParseError, SimulationError, SpecError, Tier, TraceError
from .policies import PolicyKind, PolicySpec
from .scenarios import PRESETS, build_preset, run_scenario
from .simulator import NodeConfig, SimConfig, run
from .workloads import WorkloadKind, WorkloadSpec, generate, read_trace, write_trace


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); usage errors are exit 1
        raise UsageError(message)


_POLICY_NAMES = {
    "default-linux": PolicyKind.DEFAULT_LINUX,
    "numa-balancing": PolicyKind.NUMA_BALANCING,
    "tpp": PolicyKind.TPP,
    "autotiering": PolicyKind.AUTOTIERING_LIKE,
}
_POLICY_CLI_NAME = {kind: name for name, kind in _POLICY_NAMES.items()}
_KIND_NAMES = {k.value: k for k in WorkloadKind}


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_interleave(text: str):
    if text.lower() in ("none", "off"):
        return None
    n, _, k = text.partition(":")
    return (int(n), int(k))


def _fmt_interleave(value) -> str:
    return "none" if value is None else f"{value[0]}:{value[1]}"


# Documented override keys: dotted name -> (section, field, parse, format).
_NODE_FIELDS = {
    "capacity": int,
    "base_latency": float,
    "bandwidth": float,
    "distance": int,
    "min_frac": float,
    "low_frac": float,
    "high_frac": float,
}
_POLICY_FIELDS = {
    "kind": lambda s: _POLICY_NAMES[s],
    "interleave": _parse_interleave,
    "type_aware_alloc": _parse_bool,
    "active_lru_filter": _parse_bool,
    "decouple_watermarks": _parse_bool,
    "scan_quota": int,
    "scan_period": int,
    "demote_scale_factor": float,
    "reserved_promo_buffer": float,
    "demote_file_first": _parse_bool,
    "demote_to_active": _parse_bool,
    "cold_access_threshold": int,
    "reclaim_wake_latency": int,
}
_SIM_FIELDS = {
    "swap_latency": int,
    "migration_cost": int,
    "report_window": int,
    "seed": int,
}


def override_keys() -> list[str]:
    keys = []
    for node in ("local", "cxl"):
        keys += [f"node.{node}.{f}" for f in _NODE_FIELDS]
    keys += [f"policy.{f}" for f in _POLICY_FIELDS]
    keys += [f"sim.{f}" for f in _SIM_FIELDS]
    return keys


def apply_overrides(flat: dict, pairs: list[str]) -> dict:
    """Apply `key=value` strings onto the flat config; unknown keys fail."""
    known = set(override_keys())
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise UsageError(f"override {pair!r} is not of the form key=value")
        if key not in known:
            raise UsageError(f"unknown override key {key!r} (see --list-keys)")
        flat[key] = value
    return flat


def _caster_for(key: str):
    parts = key.split(".")
    if parts[0] == "node":
        return _NODE_FIELDS[parts[2]]
    if parts[0] == "policy":
        return _POLICY_FIELDS[parts[1]]
    if parts[0] == "sim":
        return _SIM_FIELDS[parts[1]]
    raise UsageError(f"unknown config key {key!r}")


def config_to_flat(config: SimConfig) -> dict:
    """Fully-resolved flat key=value view of a SimConfig."""
    flat = {}
    for nc in config.nodes:
        prefix = "node.local" if nc.tier is Tier.LOCAL else "node.cxl"
        flat[f"{prefix}.capacity"] = str(nc.capacity)
        flat[f"{prefix}.base_latency"] = str(nc.resolved_latency())
        flat[f"{prefix}.bandwidth"] = str(nc.bandwidth)
        flat[f"{prefix}.distance"] = str(nc.resolved_distance())
        flat[f"{prefix}.min_frac"] = str(nc.min_frac)
        flat[f"{prefix}.low_frac"] = str(nc.low_frac)
        flat[f"{prefix}.high_frac"] = str(nc.high_frac)
    pol = config.policy
    flat["policy.kind"] = _POLICY_CLI_NAME[pol.kind]
    flat["policy.interleave"] = _fmt_interleave(pol.interleave)
    flat["policy.type_aware_alloc"] = str(pol.type_aware_alloc).lower()
    flat["policy.active_lru_filter"] = str(pol.active_lru_filter).lower()
    flat["policy.decouple_watermarks"] = str(pol.decouple_watermarks).lower()
    flat["policy.scan_quota"] = str(pol.scan_quota)
    flat["policy.scan_period"] = str(pol.scan_period)
    flat["policy.demote_scale_factor"] = str(pol.demote_scale_factor)
    flat["policy.reserved_promo_buffer"] = str(pol.reserved_promo_buffer)
    flat["policy.demote_file_first"] = str(pol.demote_file_first).lower()
    flat["policy.demote_to_active"] = str(pol.demote_to_active).lower()
    flat["policy.cold_access_threshold"] = str(pol.cold_access_threshold)
    flat["policy.reclaim_wake_latency"] = str(pol.reclaim_wake_latency)
    flat["sim.swap_latency"] = str(config.swap_latency)
    flat["sim.migration_cost"] = str(config.migration_cost)
    flat["sim.report_window"] = str(config.report_window)
    flat["sim.seed"] = str(config.seed)
    return flat


def config_from_flat(flat: dict) -> SimConfig:
    def node_from(prefix: str, tier: Tier) -> NodeConfig | None:
        cap_key = f"{prefix}.capacity"
        if cap_key not in flat or int(flat[cap_key]) <= 0:
            return None
        get = lambda f, default: flat.get(f"{prefix}.{f}", default)
        return NodeConfig(
            tier,
            int(flat[cap_key]),
            base_latency=float(get("base_latency", 100.0 if tier is Tier.LOCAL else 170.0)),
            bandwidth=float(get("bandwidth", 1000.0)),
            distance=int(get("distance", 10 if tier is Tier.LOCAL else 20)),
            min_frac=float(get("min_frac", 0.005)),
            low_frac=float(get("low_frac", 0.01)),
            high_frac=float(get("high_frac", 0.015)),
        )

    nodes = [n for n in (node_from("node.local", Tier.LOCAL), node_from("node.cxl", Tier.CXL)) if n]
    policy_kwargs = {}
    for field_name, caster in _POLICY_FIELDS.items():
        key = f"policy.{field_name}"
        if key in flat:
            value = flat[key]
            policy_kwargs[field_name] = caster(value) if isinstance(value, str) else value
    policy = PolicySpec(kind=policy_kwargs.pop("kind", PolicyKind.TPP), **policy_kwargs)
    sim_kwargs = {}
    for field_name, caster in _SIM_FIELDS.items():
        key = f"sim.{field_name}"
        if key in flat:
            value = flat[key]
            sim_kwargs[field_name] = caster(value) if isinstance(value, str) else value
    return SimConfig(nodes=nodes, policy=policy, **sim_kwargs)


def write_manifest(path, command: str, entries: dict) -> None:
    lines = [f"command={command}"]
    lines.extend(f"{k}={v}" for k, v in sorted(entries.items()))
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path) -> dict:
    entries = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError(0, f"bad manifest line: {line!r}")
        entries[key] = value
    return entries


# -- Subcommands -----------------------------------------------------------


def _cmd_gen(args) -> int:
    spec = WorkloadSpec(
        kind=_KIND_NAMES[args.kind],
        total_pages=args.pages,
        anon_fraction=args.anon_fraction,
        hot_fraction=args.hot_fraction,
        zipf_s=args.zipf_s,
        duration=args.duration,
        ops_rate=args.ops_rate,
        churn_rate=args.churn_rate,
        one_touch_fraction=args.one_touch_fraction,
        seed=args.seed,
    )
    spec.validate()
    count = write_trace(generate(spec), args.output)
    print(f"wrote {count} events to {args.output}")
    return 0


def _make_sim_config(args) -> tuple[SimConfig, str]:
    if args.manifest:
        flat = read_manifest(args.manifest)
        trace_path = args.trace or flat.get("trace")
        if not trace_path:
            raise UsageError("manifest has no trace path and --trace not given")
        config = config_from_flat(flat)
        return config, trace_path
    if not args.trace:
        raise UsageError("--trace is required (or use --manifest)")
    flat = {
        "node.local.capacity": str(args.local_capacity),
        "node.cxl.capacity": str(args.cxl_capacity),
        "policy.kind": args.policy,
    }
    apply_overrides(flat, args.set or [])
    return config_from_flat(flat), args.trace


def _cmd_sim(args) -> int:
    config, trace_path = _make_sim_config(args)
    report = run(read_trace(trace_path), config)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.format == "json":
        out.write_text(report.to_json() + "\n")
    else:
        out.write_text(report.windows_csv())
    entries = config_to_flat(config)
    entries["trace"] = str(trace_path)
    entries["output"] = str(out)
    entries["format"] = args.format
    write_manifest(str(out) + ".manifest", "sim", entries)
    print(f"report written to {out} (manifest: {out}.manifest)")
    return 0


def _cmd_scenario(args) -> int:
    try:
        scenario = build_preset(args.name, seed=args.seed)
    except KeyError as exc:
        raise UsageError(str(exc)) from None
    result = run_scenario(scenario)
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    for label, report in result.reports.items():
        (outdir / f"{label}.report.json").write_text(report.to_json() + "\n")
    (outdir / "comparison.json").write_text(
        json.dumps(result.to_dict(), sort_keys=True, indent=2) + "\n"
    )
    entries = {"scenario": args.name, "seed": str(args.seed), "output_dir": str(outdir)}
    write_manifest(outdir / "manifest.txt", "scenario", entries)

    print(f"scenario {result.name} (seed {result.seed})")
    header = f"{'config':<16} {'local':>7} {'latency':>9} {'throughput':>12} {'promo':>8} {'demote':>8} {'swap':>8}"
    print(header)
    for label, row in result.table.items():
        print(
            f"{label:<16} {row['local_traffic_fraction']:>7.3f} "
            f"{row['mean_access_latency']:>9.1f} {row['throughput_proxy']:>12.4g} "
            f"{row['pgpromote_success']:>8} {row['pgdemote']:>8} {row['pgswapout']:>8}"
        )
    for res in result.assertion_results:
        print(res.describe())
    if not result.passed():
        print("scenario FAILED", file=sys.stderr)
        return 2
    print("scenario passed")
    return 0


def _cmd_characterize(args) -> int:
    config = CharacterizerConfig(
        sample_ratio=args.sample_ratio,
        mini_interval=args.mini_interval,
        interval=args.interval,
        duty_fraction=args.duty_fraction,
    )
    ch = Characterizer(config)
    rows = ch.process(read_trace(args.trace))
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(stats_csv(rows))
    entries = {
        "trace": str(args.trace),
        "output": str(out),
        "characterizer.sample_ratio": str(config.sample_ratio),
        "characterizer.mini_interval": str(config.mini_interval),
        "characterizer.interval": str(config.interval),
        "characterizer.duty_fraction": str(config.duty_fraction),
    }
    write_manifest(str(out) + ".manifest", "characterize", entries)
    print(f"characterization written to {out} ({len(rows)} intervals)")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="tiersim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic trace", parents=[], add_help=True)
    gen.add_argument("--kind", choices=sorted(_KIND_NAMES), required=True)
    gen.add_argument("--pages", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--anon-fraction", type=float, default=None)
    gen.add_argument("--hot-fraction", type=float, default=None)
    gen.add_argument("--zipf-s", type=float, default=1.1)
    gen.add_argument("--duration", type=int, default=2_000_000_000, help="simulated ns")
    gen.add_argument("--ops-rate", type=float, default=0.5, help="accesses per simulated us")
    gen.add_argument("--churn-rate", type=float, default=0.0)
    gen.add_argument("--one-touch-fraction", type=float, default=0.8)
    gen.add_argument("-o", "--output", required=True)
    gen.set_defaults(func=_cmd_gen)

    sim = sub.add_parser("sim", help="run one simulation over a trace file")
    sim.add_argument("--trace")
    sim.add_argument("--manifest", help="rerun from an emitted manifest")
    sim.add_argument("--policy", choices=sorted(_POLICY_NAMES), default="tpp")
    sim.add_argument("--local-capacity", type=int, default=65536)
    sim.add_argument("--cxl-capacity", type=int, default=32768, help="0 disables the CXL node")
    sim.add_argument("--set", action="append", metavar="KEY=VALUE", help="config override")
    sim.add_argument("--list-keys", action="store_true", help="print override keys and exit")
    sim.add_argument("--format", choices=("json", "csv"), default="json")
    sim.add_argument("-o", "--output", default="report.json")
    sim.set_defaults(func=_cmd_sim)

    scen = sub.add_parser("scenario", help="run a canned comparison preset")
    scen.add_argument("name", choices=sorted(PRESETS))
    scen.add_argument("--seed", type=int, default=42)
    scen.add_argument("-o", "--output-dir", default="scenario-out")
    scen.set_defaults(func=_cmd_scenario)

    char = sub.add_parser("characterize", help="page-temperature statistics for a trace")
    char.add_argument("--trace", required=True)
    char.add_argument("--sample-ratio", type=int, default=200)
    char.add_argument("--mini-interval", type=int, default=5_000_000_000)
    char.add_argument("--interval", type=int, default=60_000_000_000)
    char.add_argument("--duty-fraction", type=float, default=1.0)
    char.add_argument("-o", "--output", default="stats.csv")
    char.set_defaults(func=_cmd_characterize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "list_keys", False):
            print("\n".join(override_keys()))
            return 0
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (TraceError, ParseError, SpecError, SimulationError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
