"""Command-line driver: batch runs, config validation, result emission.

Every run command reads a JSON config validated against a strict schema
(unknown fields are rejected), draws randomness from a counter-based
generator keyed by (seed, replica) so outputs are reproducible regardless
of scheduling, and emits CSV tables plus a JSON summary carrying the
toolkit version, a config hash, and the seed.  Exit codes: 0 success,
1 verification failure, 2 config/schema violation, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from importlib import metadata
from pathlib import Path

import jsonschema
import numpy as np

from . import acceptance, dp, gibbs
from .llt import LltView
from .localization import RenormFamily, localize_run
from .potentials import potential_from_json
from .prox import ProxConfig, ProxKernel, run_chain

try:
    _VERSION = metadata.version("artifact")
except metadata.PackageNotFoundError:  # running from a source tree
    _VERSION = "0.0.0+uninstalled"


class ConfigError(ValueError):
    """Configuration rejected before any output was produced."""


# ---------------------------------------------------------------------------
# schemas

_POTENTIAL_SCHEMA = {
    "type": "object",
    "required": ["kind", "dim", "params", "shift"],
    "properties": {
        "kind": {"type": "string"},
        "dim": {"type": "integer", "minimum": 1},
        "params": {"type": "object"},
        "shift": {"type": "number"},
        "domain": {"type": "object"},
    },
    "additionalProperties": False,
}

_DP_FIELDS = {
    "n": {"type": "integer", "minimum": 1},
    "eps": {"type": "number"},
    "delta": {"type": "number"},
    "lipschitz_G": {"type": "number"},
    "diameter_D": {"type": "number"},
    "p": {"type": "number"},
    "d": {"type": "integer", "minimum": 1},
    "beta": {"type": "number"},
}

_SEED_REPLICAS = {
    "seed": {"type": "integer", "minimum": 0},
    "replicas": {"type": "integer", "minimum": 1, "maximum": 10_000},
}

_SCHEMAS = {
    "llt-eval": {
        "type": "object",
        "required": ["command", "potential", "probes"],
        "properties": {
            "command": {"const": "llt-eval"},
            "potential": _POTENTIAL_SCHEMA,
            "probes": {
                "type": "array", "minItems": 1,
                "items": {"type": "array", "minItems": 1,
                          "items": {"type": "number"}},
            },
            "backend": {"enum": ["closed-form-gaussian", "separable-product",
                                 "lq-radial", "quadrature-1d"]},
        },
        "additionalProperties": False,
    },
    "localize": {
        "type": "object",
        "required": ["command", "target", "increment", "steps"],
        "properties": {
            "command": {"const": "localize"},
            "target": _POTENTIAL_SCHEMA,
            "increment": _POTENTIAL_SCHEMA,
            "steps": {"type": "integer", "minimum": 1, "maximum": 1_000_000},
            **_SEED_REPLICAS,
        },
        "additionalProperties": False,
    },
    "prox": {
        "type": "object",
        "required": ["command", "target", "increment", "tau", "steps"],
        "properties": {
            "command": {"const": "prox"},
            "target": _POTENTIAL_SCHEMA,
            "increment": _POTENTIAL_SCHEMA,
            "tau": {"type": "integer", "minimum": 1, "maximum": 1_000_000},
            "steps": {"type": "integer", "minimum": 1, "maximum": 100_000},
            "init_mean": {"type": "array", "items": {"type": "number"}},
            "init_cov": {"type": "array",
                         "items": {"type": "array",
                                   "items": {"type": "number"}}},
            "backend": {"enum": ["auto", "exact-gaussian", "quad-1d",
                                 "grid"]},
            "grid_nodes": {"type": "integer", "minimum": 5},
            "grid_drop": {"type": "number"},
            **_SEED_REPLICAS,
        },
        "additionalProperties": False,
    },
    "gibbs": {
        "type": "object",
        "required": ["command", "joint_csv"],
        "properties": {
            "command": {"const": "gibbs"},
            "joint_csv": {"type": "string"},
        },
        "additionalProperties": False,
    },
    "dp-plan": {
        "type": "object",
        "required": ["command", "objective", "n", "eps", "delta",
                     "lipschitz_G", "diameter_D", "p", "d"],
        "properties": {
            "command": {"const": "dp-plan"},
            "objective": {"enum": ["erm", "sco"]},
            "theta": {"type": "number"},
            **_DP_FIELDS,
        },
        "additionalProperties": False,
    },
    "dp-toy": {
        "type": "object",
        "required": ["command", "n", "eps", "delta", "lipschitz_G",
                     "diameter_D", "p", "d"],
        "properties": {
            "command": {"const": "dp-toy"},
            "steps": {"type": "integer", "minimum": 1, "maximum": 10_000},
            "grid_nodes": {"type": "integer", "minimum": 17},
            **_DP_FIELDS,
            **_SEED_REPLICAS,
        },
        "additionalProperties": False,
    },
    "verify": {
        "type": "object",
        "required": ["command"],
        "properties": {
            "command": {"const": "verify"},
            "suite": {"enum": list(acceptance.SUITES)},
        },
        "additionalProperties": False,
    },
}


def _load_config(path: str, expect: str | None = None) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path!r}: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError("config root must be a JSON object")
    cmd = obj.get("command") if expect is None else expect
    if cmd not in _SCHEMAS:
        raise ConfigError(f"unknown command {cmd!r} in config")
    if expect is not None:
        obj = dict(obj)
        obj["command"] = expect
    try:
        jsonschema.validate(obj, _SCHEMAS[cmd])
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"schema violation: {exc.message}") from exc
    return obj


# ---------------------------------------------------------------------------
# deterministic emission

def replica_rng(seed: int, replica: int) -> np.random.Generator:
    """Counter-based stream split: replicas never share randomness and the
    result is independent of execution order."""
    return np.random.Generator(np.random.Philox(key=[seed, replica]))


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    # repr of a float is locale-independent and shortest-round-trip, which
    # is what makes re-runs byte-identical
    return repr(float(v))


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _jsonify(v):
    if isinstance(v, dict):
        return {k: _jsonify(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonify(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return None if math.isnan(f) else f
    if isinstance(v, np.ndarray):
        return _jsonify(v.tolist())
    return v


def _write_json(path: Path, obj) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        json.dump(_jsonify(obj), fh, sort_keys=True, indent=2)
        fh.write("\n")


def _config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _summary_base(cfg: dict | None, command: str, seed: int,
                  replicas: int) -> dict:
    out = {"command": command, "version": _VERSION, "seed": seed,
           "replicas": replicas}
    if cfg is not None:
        out["config"] = cfg
        out["config_sha256"] = _config_hash(cfg)
    return out


def _out_dir(arg_out: str | None) -> Path:
    d = Path(arg_out or os.environ.get("LLTPROX_OUT") or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _resolve(args, cfg: dict):
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    reps = (args.replicas if args.replicas is not None
            else int(cfg.get("replicas", 1)))
    return seed, reps


# ---------------------------------------------------------------------------
# command handlers

def _handle_llt_eval(cfg: dict, args) -> int:
    pot = potential_from_json(cfg["potential"])
    probes = np.asarray(cfg["probes"], dtype=float)
    if probes.shape[1] != pot.dim:
        raise ConfigError(f"probes must have {pot.dim} coordinates each")
    view = LltView(pot, backend=cfg.get("backend"))
    seed, reps = _resolve(args, cfg)
    rows, json_rows = [], []
    for i, x in enumerate(probes):
        arg = float(x[0]) if pot.dim == 1 else x
        val = float(view.value(arg))
        g = np.atleast_1d(view.grad(arg)).astype(float)
        h = np.atleast_2d(view.hess(arg)).astype(float)
        rows.append((i, *x, val, *g))
        json_rows.append({"index": i, "x": x, "value": val, "grad": g,
                          "hess": h})
    header = (["index"] + [f"x_{j + 1}" for j in range(pot.dim)]
              + ["value"] + [f"grad_{j + 1}" for j in range(pot.dim)])
    out = _out_dir(args.out)
    summary = _summary_base(cfg, "llt-eval", seed, reps)
    summary["backend"] = view.backend
    if args.format == "csv":
        _write_csv(out / "llt_eval.csv", header, rows)
        _write_json(out / "llt_eval.json",
                    {"summary": summary, "rows_files": ["llt_eval.csv"]})
    else:
        _write_json(out / "llt_eval.json",
                    {"summary": summary, "rows": json_rows})
    print(f"evaluated {len(rows)} probes with backend {view.backend}; "
          f"wrote {out / 'llt_eval.json'}")
    return 0


def _handle_localize(cfg: dict, args) -> int:
    family = RenormFamily(potential_from_json(cfg["target"]),
                          potential_from_json(cfg["increment"]))
    steps = int(cfg["steps"])
    seed, reps = _resolve(args, cfg)
    d = family.dim
    header = (["step"] + [f"y_{j + 1}" for j in range(d)]
              + [f"z_{j + 1}" for j in range(d)])
    out = _out_dir(args.out)
    files, replica_blobs, finals = [], [], []
    for r in range(reps):
        path = localize_run(family, steps, replica_rng(seed, r))
        rows = [(t, *path.ys[t], *path.zs[t - 1])
                for t in range(1, steps + 1)]
        finals.append([float(v) for v in path.ys[-1]])
        if args.format == "csv":
            name = f"localize_r{r}.csv"
            _write_csv(out / name, header, rows)
            files.append(name)
        else:
            replica_blobs.append(
                {"replica": r,
                 "rows": [dict(zip(header, row)) for row in rows]})
    summary = _summary_base(cfg, "localize", seed, reps)
    summary["final_states"] = finals
    blob = {"summary": summary}
    if args.format == "csv":
        blob["rows_files"] = files
    else:
        blob["replicas"] = replica_blobs
    _write_json(out / "localize.json", blob)
    print(f"ran {reps} trajectories of {steps} steps; "
          f"wrote {out / 'localize.json'}")
    return 0


def _handle_prox(cfg: dict, args) -> int:
    kwargs = {}
    for key in ("init_mean", "init_cov", "grid_nodes", "grid_drop"):
        if key in cfg:
            kwargs[key] = cfg[key]
    run_cfg = ProxConfig(target=potential_from_json(cfg["target"]),
                         increment=potential_from_json(cfg["increment"]),
                         tau=int(cfg["tau"]), steps=int(cfg["steps"]),
                         backend=cfg.get("backend", "auto"), **kwargs)
    kernel = ProxKernel(run_cfg)
    seed, reps = _resolve(args, cfg)
    header = ["iteration", "chi2", "kl", "accept_rate"]
    out = _out_dir(args.out)
    files, replica_blobs, summaries = [], [], []
    for r in range(reps):
        stats = run_chain(run_cfg, replica_rng(seed, r), kernel=kernel)
        summaries.append(stats.summary())
        rows = [(rec["iteration"], rec["chi2"], rec["kl"],
                 rec["accept_rate"]) for rec in stats.rows()]
        if args.format == "csv":
            name = f"prox_r{r}.csv"
            _write_csv(out / name, header, rows)
            files.append(name)
        else:
            replica_blobs.append({"replica": r,
                                  "rows": [dict(zip(header, row))
                                           for row in rows]})
        line = (f"replica {r}: accept {summaries[-1]['mean_accept_rate']:.3f}"
                f", oracle calls {summaries[-1]['total_oracle_calls']}")
        if "final_chi2" in summaries[-1]:
            line += f", final chi2 {summaries[-1]['final_chi2']:.3e}"
        print(line)
    summary = _summary_base(cfg, "prox", seed, reps)
    summary["chains"] = summaries
    blob = {"summary": summary}
    if args.format == "csv":
        blob["rows_files"] = files
    else:
        blob["replicas"] = replica_blobs
    _write_json(out / "prox.json", blob)
    print(f"wrote {out / 'prox.json'}")
    return 0


def _handle_gibbs(cfg: dict, args) -> int:
    path = cfg["joint_csv"]
    try:
        joint = gibbs.joint_from_csv(path)
    except OSError as exc:
        raise ConfigError(f"cannot read joint {path!r}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"joint {path!r} rejected: {exc}") from exc
    report = gibbs.analyze(joint)
    out = _out_dir(args.out)
    summary = _summary_base(cfg, "gibbs", args.seed or 0, 1)
    _write_json(out / "gibbs_report.json",
                {"summary": summary, "report": report})
    print(json.dumps(_jsonify(report), sort_keys=True))
    return 0


def _instance_from(cfg: dict) -> dp.DpInstance:
    kwargs = {k: cfg[k] for k in ("n", "eps", "delta", "lipschitz_G",
                                  "diameter_D", "p", "d")}
    if "beta" in cfg:
        kwargs["beta"] = cfg["beta"]
    return dp.DpInstance(**kwargs)


def _handle_dp_plan(cfg: dict, args) -> int:
    inst = _instance_from(cfg)
    planner = dp.plan_erm if cfg["objective"] == "erm" else dp.plan_sco
    plan = planner(inst, theta=cfg.get("theta"))
    out = _out_dir(args.out)
    blob = {"summary": _summary_base(cfg, "dp-plan", args.seed or 0, 1),
            "plan": plan.as_dict()}
    _write_json(out / "dp_plan.json", blob)
    print(json.dumps(_jsonify(plan.as_dict()), sort_keys=True, indent=2))
    return 0


def _handle_dp_toy(cfg: dict, args) -> int:
    inst = _instance_from(cfg)
    seed, reps = _resolve(args, cfg)
    plan = dp.plan_erm(inst)
    # the loss bundle is part of the experiment, drawn from its own stream
    # (replica chains use streams 1..R) so it is fixed by (config, seed)
    rng0 = replica_rng(seed, 0)
    g = rng0.standard_normal((inst.n, inst.d))
    q = inst.p / (inst.p - 1.0)
    g /= np.sum(np.abs(g) ** q, axis=1)[:, None] ** (1.0 / q)
    g *= inst.lipschitz_G * rng0.uniform(0.3, 1.0, inst.n)[:, None]
    run_cfg, _, _ = dp.toy_config(inst, plan, g, steps=cfg.get("steps", 16),
                                  grid_nodes=cfg.get("grid_nodes"))
    kernel = ProxKernel(run_cfg)
    rows = []
    for r in range(reps):
        run = dp.run_toy_erm(inst, g, replica_rng(seed, r + 1), plan=plan,
                             kernel=kernel)
        rows.append((r, run.excess_risk, run.accept_rate, run.oracle_calls))
        print(f"seed {r}: excess risk {run.excess_risk:.4f}, "
              f"accept {run.accept_rate:.3f}")
    header = ["seed", "excess_risk", "accept_rate", "oracle_calls"]
    out = _out_dir(args.out)
    summary = _summary_base(cfg, "dp-toy", seed, reps)
    summary["mean_excess_risk"] = float(np.mean([r[1] for r in rows]))
    summary["excess_risk_surrogate"] = dp.excess_risk_surrogate(inst)
    summary["plan"] = plan.as_dict()
    blob = {"summary": summary}
    if args.format == "json":
        blob["rows"] = [dict(zip(header, row)) for row in rows]
    else:
        _write_csv(out / "dp_toy.csv", header, rows)
        blob["rows_files"] = ["dp_toy.csv"]
    _write_json(out / "dp_toy.json", blob)
    print(f"wrote {out / 'dp_toy.json'}")
    return 0


def _handle_verify(cfg: dict | None, args, suite: str) -> int:
    results = acceptance.run_suite(suite)
    for res in results:
        print(res.line)
    out = _out_dir(args.out)
    blob = {"suite": suite, "version": _VERSION,
            "all_passed": all(r.passed for r in results),
            "checks": [r.report() for r in results]}
    _write_json(out / "verify_report.json", blob)
    if args.format == "csv":
        _write_csv(out / "verify_report.csv",
                   ["name", "status", "margin", "seconds"],
                   [(r.report()["name"], r.report()["status"],
                     float("nan") if r.report()["margin"] is None
                     else r.report()["margin"], r.elapsed)
                    for r in results])
    return 0 if blob["all_passed"] else 1


# ---------------------------------------------------------------------------
# argument parsing and dispatch

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="base RNG seed (default: config value or 0)")
    common.add_argument("--out", default=None,
                        help="output directory (default: $LLTPROX_OUT or .)")
    common.add_argument("--replicas", type=int, default=None,
                        help="independent replicas (default: config or 1)")
    common.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="result table format")

    p = argparse.ArgumentParser(
        prog="lltprox",
        description="proximal sampling toolkit: chain drivers, discrete-"
                    "chain analysis, private-optimization planning, and the "
                    "verification suite")
    sub = p.add_subparsers(dest="cmd", required=True)

    llt = sub.add_parser("llt", help="transform evaluation")
    llt_sub = llt.add_subparsers(dest="sub", required=True)
    llt_sub.add_parser("eval", parents=[common]).add_argument("config")

    loc = sub.add_parser("localize", help="sequential signal chain")
    loc_sub = loc.add_subparsers(dest="sub", required=True)
    loc_sub.add_parser("run", parents=[common]).add_argument("config")

    prx = sub.add_parser("prox", help="proximal sampler chain")
    prx_sub = prx.add_subparsers(dest="sub", required=True)
    prx_sub.add_parser("run", parents=[common]).add_argument("config")

    gb = sub.add_parser("gibbs", help="two-component discrete chain")
    gb_sub = gb.add_subparsers(dest="sub", required=True)
    gb_sub.add_parser("analyze", parents=[common]).add_argument("joint_csv")

    dpp = sub.add_parser("dp", help="private optimization")
    dp_sub = dpp.add_subparsers(dest="sub", required=True)
    plan = dp_sub.add_parser("plan", parents=[common])
    plan.add_argument("--json", dest="instance", required=True,
                      help="instance JSON path")
    dp_sub.add_parser("run-toy", parents=[common]).add_argument("config")

    ver = sub.add_parser("verify", parents=[common],
                         help="run the acceptance suite")
    ver.add_argument("--suite", choices=acceptance.SUITES, default="all")

    run = sub.add_parser("run", parents=[common],
                         help="dispatch on the config's command field")
    run.add_argument("config")
    return p


def _dispatch(args) -> int:
    if args.cmd == "verify":
        return _handle_verify(None, args, args.suite)
    if args.cmd == "gibbs":
        cfg = {"command": "gibbs", "joint_csv": args.joint_csv}
        return _handle_gibbs(cfg, args)
    if args.cmd == "dp" and args.sub == "plan":
        cfg = _load_config(args.instance, expect="dp-plan")
        return _handle_dp_plan(cfg, args)
    if args.cmd == "dp" and args.sub == "run-toy":
        return _handle_dp_toy(_load_config(args.config, expect="dp-toy"),
                              args)
    if args.cmd == "llt":
        return _handle_llt_eval(_load_config(args.config, expect="llt-eval"),
                                args)
    if args.cmd == "localize":
        return _handle_localize(_load_config(args.config, expect="localize"),
                                args)
    if args.cmd == "prox":
        return _handle_prox(_load_config(args.config, expect="prox"), args)
    if args.cmd == "run":
        cfg = _load_config(args.config)
        handler = {
            "llt-eval": _handle_llt_eval,
            "localize": _handle_localize,
            "prox": _handle_prox,
            "gibbs": _handle_gibbs,
            "dp-plan": _handle_dp_plan,
            "dp-toy": _handle_dp_toy,
        }.get(cfg["command"])
        if handler is None:  # verify via generic config
            return _handle_verify(cfg, args, cfg.get("suite", "all"))
        return handler(cfg, args)
    raise AssertionError(f"unroutable command {args.cmd!r}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # model construction rejected the configuration
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure in linalg: {exc}", file=sys.stderr)
        return 3
    except ArithmeticError as exc:
        mod = type(exc).__module__.rsplit(".", 1)[-1]
        print(f"numerical failure in {mod}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
