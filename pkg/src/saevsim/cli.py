"""Command-line entry point: ``saevsim run | sweep | compare | validate-example``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .baselines import PolicyId, make_policy
from .errors import ConfigError, ScenarioLoadError
from .network import Zone
from .scenario import (
    Scenario,
    brooklyn_like,
    high_demand_scenario,
    illustrative_example,
    load_scenario,
    manhattan_like,
    ten_zone_scenario,
)
from .sim import SimResult, run

BUILTIN = {
    "illustrative": illustrative_example,
    "ten-zone": ten_zone_scenario,
    "high-demand": high_demand_scenario,
    "manhattan-like": manhattan_like,
    "brooklyn-like": brooklyn_like,
}

# (vehicle, customer, time) per V, read off the two published timelines
GOLDEN = {
    0.1: [(2, 1, 1.5), (3, 2, 5.6), (4, 3, 15.8)],
    1.0: [(3, 2, 9.0), (2, 1, 15.0), (5, 3, 18.0)],
}


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    scenario: str
    policy: str = PolicyId.MDPP.value
    V: float = 0.1
    tick: float | None = None
    seeds: list = field(default_factory=lambda: [0])
    horizon_min: float | None = None
    max_wait_min: float | None | str = "scenario"
    fleet_size: int | None = None
    capacity_kwh: float | None = None
    charger_power_kw: float | None = None
    out: str = "runs"

    def validate(self) -> None:
        try:
            PolicyId(self.policy)
        except ValueError:
            raise UsageError(f"unknown policy {self.policy!r}") from None
        if not (isinstance(self.V, (int, float)) and math.isfinite(self.V) and self.V >= 0):
            raise UsageError("--V must be a finite number >= 0")
        if not self.seeds or not all(isinstance(s, int) for s in self.seeds):
            raise UsageError("--seed must list one or more integers")
        if self.horizon_min is not None and not self.horizon_min > 0:
            raise UsageError("--horizon-min must be positive")
        if self.max_wait_min not in ("scenario", None) and not (
            isinstance(self.max_wait_min, (int, float)) and self.max_wait_min > 0
        ):
            raise UsageError("--max-wait-min must be positive or 'none'")
        for name in ("fleet_size", "capacity_kwh", "charger_power_kw"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise UsageError(f"--{name.replace('_', '-')} must be positive")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def resolve_scenario(ref: str) -> Scenario:
    if ref.startswith("builtin:"):
        name = ref.split(":", 1)[1]
        if name not in BUILTIN:
            raise UsageError(f"unknown builtin scenario {name!r}; choose from {sorted(BUILTIN)}")
        return BUILTIN[name]()
    if not Path(ref).is_file():
        raise UsageError(f"scenario file not found: {ref}")
    return load_scenario(ref)


def apply_overrides(sc: Scenario, m: RunManifest) -> Scenario:
    fleet = sc.fleet
    if m.fleet_size is not None:
        if fleet.vehicles:
            raise UsageError("--fleet-size cannot override an explicit vehicle list")
        fleet = replace(fleet, size=int(m.fleet_size))
    if m.capacity_kwh is not None:
        fleet = replace(fleet, capacity_kwh=float(m.capacity_kwh))
    zones = sc.zones
    if m.charger_power_kw is not None:
        zones = [
            Zone(z.id, z.representative_vertex,
                 tuple((float(m.charger_power_kw), n) for _, n in z.charger_specs), z.station_vertex)
            for z in zones
        ]
    out = replace(sc, fleet=fleet, zones=zones)
    if m.horizon_min is not None:
        out = replace(out, horizon=float(m.horizon_min))
    if m.max_wait_min != "scenario":
        out = replace(out, max_wait=m.max_wait_min)
    errors = out.validate()
    if errors:
        raise UsageError("; ".join(errors))
    return out


def simulate(m: RunManifest, seed: int, record_log: bool = True) -> SimResult:
    sc = apply_overrides(resolve_scenario(m.scenario), m)
    return run(sc, make_policy(m.policy, m.V, m.tick), seed=seed, record_log=record_log)


def write_run(result: SimResult, directory: Path, scenario_name: str) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    metrics = dict(result.metrics.summary())
    metrics.update(policy=result.policy, V=result.V, seed=result.seed, scenario=scenario_name,
                   violations=result.violations)
    (directory / "metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    (directory / "assignments.csv").write_text(result.assignments_csv())
    (directory / "events.log").write_text(result.events_log())
    (directory / "waiting_series.csv").write_text(result.waiting_series_csv())


def cmd_run(m: RunManifest) -> int:
    m.validate()
    out = Path(m.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(m.to_json())
    status = 0
    for seed in m.seeds:
        result = simulate(m, seed)
        write_run(result, out / f"seed-{seed}", m.scenario)
        s = result.metrics.summary()
        print(f"seed {seed}: mean wait {s['mean_wait_min']:.3f} min, lost {s['lost_customers']}, "
              f"dispatch {s['total_dispatch_km']:.3f} km")
        for v in result.violations:
            print(f"  VIOLATION: {v}", file=sys.stderr)
            status = 1
    return status


SWEEP_FIELDS = ["V", "seed", "mean_wait_min", "mean_waiting_customers", "lost_customers", "total_dispatch_km"]


def _pooled(rows):
    return {k: float(np.mean([r[k] for r in rows])) for k in SWEEP_FIELDS[2:]}


def cmd_sweep(m: RunManifest, V_values) -> int:
    seen, Vs = set(), []
    for v in V_values:
        if v in seen:
            warnings.warn(f"duplicate V={v:g} ignored")
            print(f"warning: duplicate V={v:g} ignored", file=sys.stderr)
            continue
        seen.add(v)
        Vs.append(v)
    if len(Vs) < 2:
        raise UsageError("sweep needs at least two distinct V values")
    m = replace(m, policy=PolicyId.MDPP.value)
    m.validate()
    out = Path(m.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps({**asdict(m), "V_list": Vs}, indent=2, sort_keys=True) + "\n")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_FIELDS)
    status = 0
    for V in Vs:
        rows = []
        for seed in m.seeds:
            result = simulate(replace(m, V=V), seed, record_log=False)
            status |= bool(result.violations)
            s = result.metrics.summary()
            row = {"V": V, "seed": seed, **{k: s[k] for k in SWEEP_FIELDS[2:]}}
            rows.append(row)
            w.writerow([f"{V:g}", seed] + [f"{row[k]:.6f}" for k in SWEEP_FIELDS[2:]])
        p = _pooled(rows)
        w.writerow([f"{V:g}", "pooled"] + [f"{p[k]:.6f}" for k in SWEEP_FIELDS[2:]])
    (out / "sweep.csv").write_text(buf.getvalue())
    print(buf.getvalue(), end="")
    return int(status)


def cmd_compare(m: RunManifest, policies) -> int:
    m.validate()
    out = Path(m.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps({**asdict(m), "policies": policies}, indent=2, sort_keys=True) + "\n")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["policy"] + SWEEP_FIELDS[1:])
    status = 0
    for name in policies:
        rows = []
        for seed in m.seeds:
            result = simulate(replace(m, policy=name), seed, record_log=False)
            status |= bool(result.violations)
            s = result.metrics.summary()
            rows.append({"seed": seed, **{k: s[k] for k in SWEEP_FIELDS[2:]}})
            w.writerow([result.policy, seed] + [f"{s[k]:.6f}" for k in SWEEP_FIELDS[2:]])
        p = _pooled(rows)
        w.writerow([result.policy, "pooled"] + [f"{p[k]:.6f}" for k in SWEEP_FIELDS[2:]])
    (out / "compare.csv").write_text(buf.getvalue())
    print(buf.getvalue(), end="")
    return int(status)


def validate_example(V: float, tol: float = 1e-6) -> tuple[bool, list[str]]:
    """Run the five-vehicle example and compare with the published timeline."""
    key = next((k for k in GOLDEN if abs(k - V) < 1e-12), None)
    if key is None:
        raise UsageError(f"no reference timeline for V={V:g}; use 0.1 or 1")
    from .scheduler import MDPPPolicy

    result = run(illustrative_example(), MDPPPolicy(V=key))
    got = [(a.vehicle_id, a.customer_id, a.time) for a in result.assignments]
    lines = []
    for i, exp in enumerate(GOLDEN[key]):
        if i >= len(got):
            return False, lines + [f"missing assignment #{i + 1}: expected Vehicle {exp[0]} -> Customer {exp[1]} at t={exp[2]:g}"]
        g = got[i]
        if g[0] != exp[0] or g[1] != exp[1] or abs(g[2] - exp[2]) > tol:
            return False, lines + [
                f"divergence at #{i + 1}: expected Vehicle {exp[0]} -> Customer {exp[1]} at t={exp[2]:g}, "
                f"got Vehicle {g[0]} -> Customer {g[1]} at t={g[2]:.6f}"
            ]
        lines.append(f"Vehicle {g[0]} -> Customer {g[1]} at t={g[2]:.6f}  ok")
    if len(got) > len(GOLDEN[key]):
        return False, lines + [f"unexpected extra assignment {got[len(GOLDEN[key])]}"]
    if result.violations:
        return False, lines + result.violations
    return True, lines


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _max_wait(text: str):
    # argparse also routes the string default through here
    if text.lower() in ("none", "scenario"):
        return None if text.lower() == "none" else "scenario"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a number or 'none'") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="saevsim", description="SAEV fleet dispatch simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, policy=True):
        sp.add_argument("--scenario", help="scenario YAML path or builtin:NAME")
        sp.add_argument("--manifest", help="re-run from a manifest.json echo")
        if policy:
            sp.add_argument("--policy", default=PolicyId.MDPP.value, choices=[x.value for x in PolicyId])
        sp.add_argument("--V", type=float, default=0.1)
        sp.add_argument("--tick", type=float, default=None, help="fixed decision interval (min); default event driven")
        sp.add_argument("--seed", type=_int_list, default=[0])
        sp.add_argument("--horizon-min", type=float, default=None)
        sp.add_argument("--max-wait-min", type=_max_wait, default="scenario")
        sp.add_argument("--fleet-size", type=int, default=None)
        sp.add_argument("--capacity-kwh", type=float, default=None)
        sp.add_argument("--charger-power-kw", type=float, default=None)
        sp.add_argument("--out", default="runs")

    common(sub.add_parser("run", help="simulate one policy for each seed"))
    sw = sub.add_parser("sweep", help="MDPP over a list of V values")
    common(sw, policy=False)
    sw.add_argument("--V-list", type=_float_list, default=[0.0, 0.001, 0.01, 0.1, 1.0])
    cp = sub.add_parser("compare", help="several policies on the same scenario and seeds")
    common(cp, policy=False)
    cp.add_argument("--policies", default="mdpp,nearest_fcfs,charger_chasing,nonev_noreb")
    ve = sub.add_parser("validate-example", help="check the five-vehicle example timeline")
    ve.add_argument("--V", type=float, required=True)
    return p


def _manifest_from_args(args) -> RunManifest:
    if getattr(args, "manifest", None):
        path = Path(args.manifest)
        if not path.is_file():
            raise UsageError(f"manifest not found: {path}")
        data = json.loads(path.read_text())
        known = {f for f in RunManifest.__dataclass_fields__}
        return RunManifest(**{k: v for k, v in data.items() if k in known})
    if not args.scenario:
        raise UsageError("--scenario is required")
    return RunManifest(
        scenario=args.scenario,
        policy=getattr(args, "policy", PolicyId.MDPP.value),
        V=args.V,
        tick=args.tick,
        seeds=list(args.seed),
        horizon_min=args.horizon_min,
        max_wait_min=args.max_wait_min,
        fleet_size=args.fleet_size,
        capacity_kwh=args.capacity_kwh,
        charger_power_kw=args.charger_power_kw,
        out=args.out,
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "validate-example":
            ok, lines = validate_example(args.V)
            for line in lines:
                print(line)
            print("PASS" if ok else "FAIL")
            return 0 if ok else 1
        m = _manifest_from_args(args)
        if args.command == "run":
            return cmd_run(m)
        if args.command == "sweep":
            return cmd_sweep(m, args.V_list)
        return cmd_compare(m, [s.strip() for s in args.policies.split(",") if s.strip()])
    except UsageError as exc:
        parser.error(str(exc))
    except ScenarioLoadError as exc:
        for e in exc.errors:
            print(f"scenario error: {e}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        parser.error(str(exc))
    return 0


if __name__ == "__main__":
    sys.exit(main())
