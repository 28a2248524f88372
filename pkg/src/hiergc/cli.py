"""Command-line entry point: ``hiergc {run,sweep,audit,gen-placement}``.

Scenarios and reports are JSON documents. Node and dataset ids in them are
1-based; the library underneath is 0-based.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from . import audit as audit_mod
from . import codec, sim
from .errors import ConfigurationError, HGCError
from .placement import (
    MODES,
    EvalPlan,
    Placement,
    RandomnessPlan,
    SystemParams,
    assign_randomness,
    compute_replication,
    default_eval_plan,
    generate_placement,
    margins_from,
    validate_randomness,
)

FAULT_KINDS = ("none", "explicit", "random", "enumerate")


def _one_based(sets):
    return [[sorted(k + 1 for k in ws) for ws in cl] for cl in sets]


def _zero_based(sets, where):
    try:
        return [[{int(k) - 1 for k in ws} for ws in cl] for cl in sets]
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{where}: expected a list of clusters of id lists") from exc


def _req(doc: dict, key: str, where: str):
    if key not in doc:
        raise ConfigurationError(f"{where}.{key}: missing required field")
    return doc[key]


def _int(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigurationError(f"{where}: expected an integer, got {v!r}")
    return v


@dataclass(frozen=True)
class ScenarioConfig:
    """Parsed scenario. Sections keep their JSON shape (1-based ids)."""

    q: int
    d: int
    mode: str
    N1: int
    N2: tuple
    s1: int = 0
    a1: int = 0
    s2: tuple = ()
    a2: tuple = ()
    placement: dict = field(default_factory=dict)
    randomness: dict = field(default_factory=dict)
    eval_plan: object = "default"
    gradients: dict = field(default_factory=lambda: {"seed": 0})
    faults: dict = field(default_factory=lambda: {"kind": "none"})
    name: str = ""

    def params(self) -> SystemParams:
        return SystemParams(
            self.N1, self.N2, self.s1, self.a1, self.s2, self.a2, self.d, self.q, self.mode
        )

    def to_dict(self) -> dict:
        doc = {
            "q": self.q,
            "d": self.d,
            "mode": self.mode,
            "topology": {"N1": self.N1, "N2": list(self.N2)},
            "budgets": {"s1": self.s1, "a1": self.a1, "s2": list(self.s2), "a2": list(self.a2)},
            "placement": self.placement,
            "randomness": self.randomness,
            "eval_plan": self.eval_plan,
            "gradients": self.gradients,
            "faults": self.faults,
        }
        if self.name:
            doc["name"] = self.name
        return doc


def serialize(cfg: ScenarioConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)


def _per_cluster(v, N1: int, where: str) -> tuple:
    if isinstance(v, int) and not isinstance(v, bool):
        return (v,) * N1
    if not isinstance(v, list) or len(v) != N1:
        raise ConfigurationError(f"{where}: expected an integer or a list of {N1} integers")
    return tuple(_int(x, where) for x in v)


def _norm_placement(doc, where="placement") -> dict:
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{where}: expected an object")
    kind = doc.get("kind", "explicit")
    if kind == "explicit":
        gamma = _req(doc, "gamma", where)
        _zero_based(gamma, f"{where}.gamma")
        return {"kind": "explicit", "K": _int(_req(doc, "K", where), f"{where}.K"),
                "gamma": [[sorted(int(k) for k in ws) for ws in cl] for cl in gamma]}
    if kind == "cyclic":
        r2 = _req(doc, "r2", where)
        return {"kind": "cyclic", "K": _int(_req(doc, "K", where), f"{where}.K"),
                "r1": _int(_req(doc, "r1", where), f"{where}.r1"),
                "r2": r2 if isinstance(r2, int) else [int(x) for x in r2]}
    raise ConfigurationError(f"{where}.kind: must be 'explicit' or 'cyclic', got {kind!r}")


def _norm_faults(doc) -> dict:
    where = "faults"
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{where}: expected an object")
    kind = doc.get("kind", "none")
    if kind not in FAULT_KINDS:
        raise ConfigurationError(f"{where}.kind: must be one of {FAULT_KINDS}, got {kind!r}")
    out = {"kind": kind}
    if kind == "explicit":
        for key in ("relay_stragglers", "relay_adversaries"):
            out[key] = sorted(int(x) for x in doc.get(key, []))
        for key in ("worker_stragglers", "worker_adversaries"):
            out[key] = [sorted(int(x) for x in s) for s in doc.get(key, [])]
        out["corruption_seed"] = _int(doc.get("corruption_seed", 0), f"{where}.corruption_seed")
    elif kind == "random":
        out["seed"] = _int(doc.get("seed", 0), f"{where}.seed")
    elif kind == "enumerate":
        out["maximal_only"] = bool(doc.get("maximal_only", True))
        out["strategy"] = doc.get("strategy", "auto")
        if out["strategy"] not in ("auto", "full", "factorized"):
            raise ConfigurationError(f"{where}.strategy: must be auto, full or factorized")
        out["corruption_seed"] = _int(doc.get("corruption_seed", 0), f"{where}.corruption_seed")
    return out


def config_from_dict(doc: dict) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigurationError("config: expected a JSON object")
    topo = _req(doc, "topology", "config")
    N1 = _int(_req(topo, "N1", "topology"), "topology.N1")
    N2 = _per_cluster(_req(topo, "N2", "topology"), N1, "topology.N2")
    budgets = doc.get("budgets", {})
    mode = doc.get("mode", "plain")
    if mode not in MODES:
        raise ConfigurationError(f"mode: must be one of {MODES}, got {mode!r}")
    ep = doc.get("eval_plan", "default")
    if ep != "default":
        if not isinstance(ep, dict):
            raise ConfigurationError("eval_plan: expected 'default' or an object of point lists")
        ep = {k: _req(ep, k, "eval_plan") for k in ("alpha1", "beta1", "alpha2", "beta2")}
    grads = doc.get("gradients", {"seed": 0})
    if not isinstance(grads, dict) or not ({"seed", "table"} & grads.keys()):
        raise ConfigurationError("gradients: expected {'seed': int} or {'table': [[...]]}")
    rnd = doc.get("randomness", {})
    if not isinstance(rnd, dict):
        raise ConfigurationError("randomness: expected an object")
    rnd = dict(rnd)
    if "plan" in rnd and rnd["plan"] != "auto":
        p = rnd["plan"]
        _req(p, "K_prime", "randomness.plan")
        _zero_based(_req(p, "gamma_prime", "randomness.plan"), "randomness.plan.gamma_prime")
    cfg = ScenarioConfig(
        q=_int(doc.get("q", 2147483647), "q"),
        d=_int(_req(doc, "d", "config"), "d"),
        mode=mode,
        N1=N1,
        N2=N2,
        s1=_int(budgets.get("s1", 0), "budgets.s1"),
        a1=_int(budgets.get("a1", 0), "budgets.a1"),
        s2=_per_cluster(budgets.get("s2", 0), N1, "budgets.s2"),
        a2=_per_cluster(budgets.get("a2", 0), N1, "budgets.a2"),
        placement=_norm_placement(_req(doc, "placement", "config")),
        randomness=rnd,
        eval_plan=ep,
        gradients=dict(grads),
        faults=_norm_faults(doc.get("faults", {"kind": "none"})),
        name=doc.get("name", ""),
    )
    Scenario(cfg)  # run every validator now
    return cfg


def parse_config(text: str) -> ScenarioConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(doc)


class Scenario:
    """Library objects built from a :class:`ScenarioConfig`."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.params = cfg.params()
        pl = cfg.placement
        if pl["kind"] == "cyclic":
            self.placement = generate_placement(self.params, pl["K"], pl["r1"], pl["r2"])
        else:
            self.placement = Placement(pl["K"], _zero_based(pl["gamma"], "placement.gamma"))
        self.placement.check_topology(self.params)
        self.r1, self.r2 = compute_replication(self.placement)
        self.m1, self.m2 = margins_from(self.params, self.r1, self.r2)
        if cfg.eval_plan == "default":
            self.plan = default_eval_plan(self.params, self.r1, self.r2)
        else:
            self.plan = EvalPlan(**cfg.eval_plan, q=cfg.q)
        self.plan.check_shape(self.params, self.m1, self.m2)
        self.d_padded = codec.padded_length(cfg.d, self.m1, self.m2)

        self.rand_plan = None
        if self.params.private:
            p = cfg.randomness.get("plan", "auto")
            if p == "auto":
                self.rand_plan = assign_randomness(self.params, self.r1, cfg.randomness.get("assign_seed"))
            else:
                self.rand_plan = RandomnessPlan(
                    int(p["K_prime"]), _zero_based(p["gamma_prime"], "randomness.plan.gamma_prime")
                )
                if tuple(len(c) for c in self.rand_plan.gamma_prime) != self.params.N2:
                    raise ConfigurationError("randomness.plan.gamma_prime: shape does not match the topology")

        g = cfg.gradients
        if "table" in g:
            table = np.asarray(g["table"], dtype=object)
            if table.shape != (self.placement.K, cfg.d):
                raise ConfigurationError(
                    f"gradients.table: expected shape ({self.placement.K}, {cfg.d}), got {table.shape}"
                )
            self.gradients = np.array([[int(x) % cfg.q for x in row] for row in table], dtype=np.int64)
        else:
            rng = np.random.default_rng(_int(g["seed"], "gradients.seed"))
            self.gradients = rng.integers(0, cfg.q, size=(self.placement.K, cfg.d), dtype=np.int64)

    @property
    def randomness_seed(self) -> int:
        return int(self.cfg.randomness.get("seed", 0))

    def fault_plan(self) -> sim.FaultPlan:
        f = self.cfg.faults
        p = self.params
        if f["kind"] in ("none", "enumerate"):
            return sim.FaultPlan.none(p, f.get("corruption_seed", 0))
        if f["kind"] == "explicit":
            ws = [{j - 1 for j in s} for s in f["worker_stragglers"]] or [set()] * p.N1
            wa = [{j - 1 for j in s} for s in f["worker_adversaries"]] or [set()] * p.N1
            plan = sim.FaultPlan(
                {n - 1 for n in f["relay_stragglers"]},
                {n - 1 for n in f["relay_adversaries"]},
                tuple(ws),
                tuple(wa),
                f["corruption_seed"],
            )
            plan.validate(p)
            return plan
        return sim.random_fault_plan(p, f["seed"])

    def derived(self) -> dict:
        out = {
            "K": self.placement.K,
            "r1": self.r1,
            "r2": list(self.r2),
            "m1": self.m1,
            "m2": list(self.m2),
            "d_padded": self.d_padded,
            "loads": {
                "relay_to_server": sim.format_load(Fraction(1, self.m1)),
                "worker_to_relay": [sim.format_load(Fraction(1, self.m1 * m)) for m in self.m2],
                "relay_to_server_elements": self.d_padded // self.m1,
                "worker_to_relay_elements": [self.d_padded // (self.m1 * m) for m in self.m2],
            },
        }
        if self.rand_plan is not None:
            out["K_prime"] = self.rand_plan.K_prime
        return out


def _faults_doc(f: sim.FaultPlan) -> dict:
    return {
        "relay_stragglers": sorted(n + 1 for n in f.relay_stragglers),
        "relay_adversaries": sorted(n + 1 for n in f.relay_adversaries),
        "worker_stragglers": [sorted(j + 1 for j in s) for s in f.worker_stragglers],
        "worker_adversaries": [sorted(j + 1 for j in s) for s in f.worker_adversaries],
    }


def _node_id(node) -> str:
    if node[0] == "relay":
        return f"relay {node[1] + 1}"
    return f"worker ({node[1] + 1},{node[2] + 1})"


# -- commands ----------------------------------------------------------------


def cmd_run(sc: Scenario, args) -> dict:
    faults = sc.fault_plan()
    out = sim.run_round(
        sc.params, sc.placement, sc.plan, sc.gradients, faults, sc.rand_plan, sc.randomness_seed
    )
    report, summary = sim.check_loads(out, sc.params, sc.r1, sc.r2)
    checks = [{"name": "exact_recovery", "passed": out.success, "detail": ""}]
    corrupted = {("relay", n) for n in faults.relay_adversaries}
    corrupted |= {("worker", n, j) for n, a in enumerate(faults.worker_adversaries) for j in a}
    missed = sorted(_node_id(c) for c in corrupted - out.identified_adversaries)
    checks.append({"name": "adversaries_identified", "passed": not missed,
                   "detail": f"missed {missed}" if missed else ""})
    checks += report.to_dict()["checks"]
    return {
        "result": {
            "success": out.success,
            "recovered": [int(x) for x in out.recovered],
            "expected": [int(x) for x in out.expected],
            "faults": _faults_doc(faults),
            "identified_adversaries": sorted(_node_id(c) for c in out.identified_adversaries),
            "loads": {
                "worker_to_relay": {f"{n + 1},{j + 1}": v for (n, j), v in sorted(out.loads["worker_to_relay"].items())},
                "relay_to_server": {str(n + 1): v for n, v in sorted(out.loads["relay_to_server"].items())},
            },
            "load_summary": summary,
        },
        "checks": checks,
    }


def cmd_sweep(sc: Scenario, args) -> dict:
    f = sc.cfg.faults
    res = sim.sweep(
        sc.params,
        sc.placement,
        sc.plan,
        sc.gradients,
        sc.rand_plan,
        sc.randomness_seed,
        maximal_only=f.get("maximal_only", True),
        cap=args.sweep_cap,
        strategy=f.get("strategy", "auto"),
        corruption_seed=f.get("corruption_seed", 0),
    )
    d = res.to_dict()
    d["failures"] = d["failures"][:50]
    return {
        "result": d,
        "checks": [{"name": "all_patterns_recover", "passed": res.passed,
                    "detail": f"{len(res.failures)} failing" if res.failures else ""}],
    }


def cmd_audit(sc: Scenario, args) -> dict:
    if not sc.params.private:
        raise ConfigurationError("mode: audit requires private mode (use --mode private)")
    valid = validate_randomness(sc.rand_plan, sc.params, sc.r1)
    clusters = audit_mod.audit_all(sc.rand_plan, sc.plan, sc.params)
    checks = [c.__dict__ | {"name": f"randomness_{c.name}"} for c in valid.checks]
    for c in clusters:
        bad = [[j + 1 for j in p.stragglers] for p in c.failing]
        checks.append({"name": f"cluster_{c.cluster + 1}_full_row_rank", "passed": c.passed,
                       "detail": f"rank deficient for stragglers {bad}" if bad else ""})
    return {
        "result": {
            "randomness_plan": {"K_prime": sc.rand_plan.K_prime,
                                "gamma_prime": _one_based(sc.rand_plan.gamma_prime)},
            "patterns": sum(len(c.patterns) for c in clusters),
            "full_rank": sum(p.full_row_rank for c in clusters for p in c.patterns),
            "clusters": [c.to_dict() for c in clusters],
        },
        "checks": checks,
    }


def cmd_gen_placement(sc: Scenario, args) -> dict:
    result = {"placement": {"kind": "explicit", "K": sc.placement.K,
                            "gamma": _one_based(sc.placement.gamma)}}
    checks = [{"name": "placement_valid", "passed": True, "detail": ""}]
    if sc.rand_plan is not None:
        result["randomness_plan"] = {"K_prime": sc.rand_plan.K_prime,
                                     "gamma_prime": _one_based(sc.rand_plan.gamma_prime)}
        checks += [c.__dict__ | {"name": f"randomness_{c.name}"}
                   for c in validate_randomness(sc.rand_plan, sc.params, sc.r1).checks]
    return {"result": result, "checks": checks}


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "audit": cmd_audit, "gen-placement": cmd_gen_placement}


def load_config_text(ref: str) -> str:
    """Read a config from a path, or from a shipped fixture name such as ``example_iii_b``."""
    path = Path(ref)
    if path.exists():
        return path.read_text()
    name = ref if ref.endswith(".json") else ref + ".json"
    fixture = resources.files("hiergc") / "fixtures" / name
    if fixture.is_file():
        return fixture.read_text()
    raise ConfigurationError(f"--config: no such file or fixture: {ref}")


def apply_overrides(cfg: ScenarioConfig, seed=None, mode=None) -> ScenarioConfig:
    if mode is not None:
        cfg = replace(cfg, mode=mode)
    if seed is not None:
        grads = cfg.gradients if "table" in cfg.gradients else {"seed": seed}
        rnd = dict(cfg.randomness, seed=seed)
        faults = dict(cfg.faults)
        if faults["kind"] == "random":
            faults["seed"] = seed
        elif "corruption_seed" in faults:
            faults["corruption_seed"] = seed
        cfg = replace(cfg, gradients=grads, randomness=rnd, faults=faults)
    return cfg


def execute(command: str, cfg_text: str, seed=None, mode=None, sweep_cap=sim.DEFAULT_CAP):
    """Run one command; returns ``(report, exit_status)``."""
    args = argparse.Namespace(sweep_cap=sweep_cap)
    report = {"command": command}
    try:
        cfg = apply_overrides(parse_config(cfg_text), seed, mode)
        sc = Scenario(cfg)
    except HGCError as exc:
        report.update(error={"type": type(exc).__name__, "message": str(exc)}, checks=[], **{"pass": False})
        return report, 2
    report["scenario"] = cfg.name
    report["mode"] = cfg.mode
    report["derived"] = sc.derived()
    try:
        report.update(COMMANDS[command](sc, args))
    except HGCError as exc:
        report.update(error={"type": type(exc).__name__, "message": str(exc)}, checks=[])
        report["pass"] = False
        return report, 1
    report["pass"] = all(c["passed"] for c in report["checks"])
    return report, 0 if report["pass"] else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hiergc", description="Hierarchical gradient coding simulator.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("run", "simulate one round"),
        ("sweep", "check every fault pattern within the budgets"),
        ("audit", "rank audit of the randomness seen by each relay (private mode)"),
        ("gen-placement", "print the placement and randomness plan of a config"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="JSON scenario path or shipped fixture name")
        p.add_argument("--seed", type=int, help="override gradient, randomness and fault seeds")
        p.add_argument("--mode", choices=MODES, help="override the scenario mode")
        p.add_argument("--out", help="write the report here instead of stdout")
        p.add_argument("--sweep-cap", type=int, default=sim.DEFAULT_CAP,
                       help="largest pattern count enumerated in full (default 10^6)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = load_config_text(args.config)
    except (HGCError, OSError) as exc:
        report = {"command": args.command, "error": {"type": type(exc).__name__, "message": str(exc)},
                  "checks": [], "pass": False}
        status = 2
    else:
        report, status = execute(args.command, text, args.seed, args.mode, args.sweep_cap)
    doc = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(doc + "\n")
    else:
        print(doc)
    return status


if __name__ == "__main__":
    sys.exit(main())
