"""Batch command-line front end.

Commands: ``factorize``, ``passage``, ``simulate``, ``verify``.  Each reads
one YAML config (flags can override keys), writes CSV/JSON artifacts into
``--out``, and maps failures to exit codes: 1 for config problems, 2 for
solver errors, 3 for a failed verification suite.  Every output carries the
config hash and the seed.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import mc
from .config import Config, ConfigError, load_config
from .errors import FluidHopfError
from .homog import factorize
from .model import ensure_valid
from .passage import (
    apply_G,
    exp_indicator_boundary,
    extract_J,
    extract_P,
    solve_passage,
    solve_passage_minus,
    table_boundary,
)
from .queries import laplace_passage_table
from .verify import SUITES, run_suite

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_VERIFY = 3


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if isinstance(x, str):
        import json
        return json.dumps(x)
    if x is None:
        return "null"
    if isinstance(x, dict):
        inner = ", ".join(f"{_fmt(str(k))}: {_fmt(v)}" for k, v in x.items())
        return "{" + inner + "}"
    if isinstance(x, (list, tuple, np.ndarray)):
        seq = x.tolist() if isinstance(x, np.ndarray) else x
        return "[" + ", ".join(_fmt(v) for v in seq) + "]"
    raise TypeError(f"cannot serialize {type(x)}")


def write_json(path: str, obj: dict) -> None:
    """JSON with floats at 17 significant digits (exact double round-trip)."""
    with open(path, "w") as fh:
        fh.write(_fmt(obj))
        fh.write("\n")


def write_csv(path: str, header: list[str], rows, provenance: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# {provenance}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(
                format(v, ".17g") if isinstance(v, (float, np.floating)) else str(v)
                for v in row
            ) + "\n")


def _provenance(cfg: Config) -> str:
    return f"config_sha256={cfg.sha256()} seed={cfg.seed}"


def _numeric(cfg: Config, key: str, fallback):
    val = cfg.numerics.get(key)
    return fallback if val is None else val


def run_factorize(cfg: Config, out_dir: str) -> int:
    sec = cfg.section("factorize")
    if not cfg.model.generator.is_constant:
        raise ConfigError("factorize requires a constant generator family")
    c = float(sec.get("c", 1.0))
    space = cfg.model.space
    fact = factorize(cfg.model.generator.matrix, space, c)
    perm = space.permutation
    write_json(os.path.join(out_dir, "factorization.json"), {
        "c": c,
        "plus_states": [space.labels[i] for i in space.plus_indices],
        "minus_states": [space.labels[i] for i in space.minus_indices],
        "Pi_plus": fact.Pi_plus,
        "Pi_minus": fact.Pi_minus,
        "Q_plus": fact.Q_plus,
        "Q_minus": fact.Q_minus,
        "residual": fact.residual,
        "state_order": [space.labels[i] for i in perm],
        "provenance": {"config_sha256": cfg.sha256(), "seed": cfg.seed},
    })
    return EXIT_OK


def _boundary_from_config(cfg: Config, sec: dict, sign: str):
    space = cfg.model.space
    hit_idx = space.plus_indices if sign == "plus" else space.minus_indices
    hit_labels = [space.labels[i] for i in hit_idx]
    spec = sec.get("boundary")
    eta = _numeric(cfg, "eta", None)
    if spec is None or spec.get("kind", "exp_indicator") == "exp_indicator":
        c = float(sec.get("c", 1.0))
        target = (spec or {}).get("target", sec.get("target"))
        if target is None:
            raise ConfigError("passage boundary needs a 'target' hit state")
        if target not in hit_labels:
            raise ConfigError(
                f"target {target!r} is not in the {sign} hit class {hit_labels}"
            )
        eta = float(spec.get("eta")) if spec and spec.get("eta") else eta
        return exp_indicator_boundary(c, hit_labels.index(target),
                                      len(hit_labels), eta=eta), c
    if spec.get("kind") == "table":
        s = np.asarray(spec["s"], dtype=float)
        vals = np.asarray(spec["values"], dtype=float)
        return table_boundary(s, vals, eta=spec.get("eta")), None
    raise ConfigError(f"unknown boundary kind {spec.get('kind')!r}")


def run_passage(cfg: Config, out_dir: str) -> int:
    sec = cfg.section("passage")
    model = cfg.model
    sign = sec.get("sign", "plus")
    if sign not in ("plus", "minus"):
        raise ConfigError("passage sign must be 'plus' or 'minus'")
    level = float(sec.get("level", 0.0))
    ds = _numeric(cfg, "ds", None)
    da = _numeric(cfg, "da", None)
    prov = _provenance(cfg)

    if sec.get("laplace"):
        c = sec.get("c")
        if c is None:
            raise ConfigError("laplace passage needs a discount 'c'")
        table = laplace_passage_table(
            model, float(c), level, sign, ds=ds, da=da,
            eta=_numeric(cfg, "eta", None), s_window=sec.get("s_window"),
        )
        rows = [
            (float(table.s_nodes[k]), table.from_labels[i], table.to_labels[j],
             float(table.values[k, i, j]))
            for k in range(table.s_nodes.shape[0])
            for i in range(len(table.from_labels))
            for j in range(len(table.to_labels))
        ]
        write_csv(os.path.join(out_dir, "passage_laplace.csv"),
                  ["s", "from_state", "to_state", "value"], rows, prov)
        return EXIT_OK

    g, _ = _boundary_from_config(cfg, sec, sign)
    solver = solve_passage if sign == "plus" else solve_passage_minus
    sol = solver(model, g, level, ds=ds, da=da, s_max=_numeric(cfg, "s_max", None))
    grid = sol.grid
    labels = model.space.labels

    def full_rows():
        if sol.values is not None and grid.n_s * model.m * grid.n_a <= 2_000_000:
            for k in range(grid.n_s):
                for i in range(model.m):
                    for ka in range(grid.n_a):
                        yield (float(grid.s_nodes[k]), labels[i],
                               float(grid.a_nodes[ka]), float(sol.values[k, i, ka]))
        else:
            # too large to dump densely: emit the two operator columns
            for k in range(grid.n_s):
                for i in range(model.m):
                    yield (float(grid.s_nodes[k]), labels[i],
                           float(grid.level), float(sol.top_col[k, i]))
                    yield (float(grid.s_nodes[k]), labels[i],
                           0.0, float(sol.zero_col[k, i]))

    write_csv(os.path.join(out_dir, "passage_f.csv"),
              ["s", "state", "a", "value"], full_rows(), prov)

    j_tab = extract_J(sol)
    p_tab = extract_P(sol)
    for name, tab in (("passage_J.csv", j_tab), ("passage_P.csv", p_tab)):
        rows = [
            (float(tab.s_nodes[k]), tab.labels[i], float(tab.values[k, i]))
            for k in range(tab.s_nodes.shape[0]) for i in range(len(tab.labels))
        ]
        write_csv(os.path.join(out_dir, name), ["s", "state", "value"], rows, prov)
    if g.smooth:
        g_tab = apply_G(model, g, j_tab, sign=sign)
        rows = [
            (float(g_tab.s_nodes[k]), g_tab.labels[i], float(g_tab.values[k, i]))
            for k in range(g_tab.s_nodes.shape[0]) for i in range(len(g_tab.labels))
        ]
        write_csv(os.path.join(out_dir, "passage_G.csv"),
                  ["s", "state", "value"], rows, prov)
    return EXIT_OK


def run_simulate(cfg: Config, out_dir: str) -> int:
    sec = cfg.section("simulate")
    model = cfg.model
    sign = sec.get("sign", "plus")
    if sign not in ("plus", "minus"):
        raise ConfigError("simulate sign must be 'plus' or 'minus'")
    if "start_state" not in sec:
        raise ConfigError("simulate needs 'start_state'")
    level = float(sec.get("level", 0.0))
    n = int(sec.get("n", 10000))
    s0 = float(sec.get("s0", 0.0))
    discount = sec.get("discount")
    target = sec.get("target")
    space = model.space
    if target is not None and target not in space.labels:
        raise ConfigError(f"unknown target state {target!r}")

    if discount is not None:
        cval = float(discount)
        tgt = space.index(target) if target is not None else None

        def payoff(tau, state):
            base = np.exp(-cval * tau)
            if tgt is None:
                return base
            return base * (state == tgt)
    else:
        tgt = space.index(target) if target is not None else None

        def payoff(tau, state):
            ones = np.ones_like(np.asarray(tau, dtype=float))
            if tgt is None:
                return ones
            return ones * (state == tgt)

    est = mc.estimate_expectation(
        model, payoff, s0=s0, i0=str(sec["start_state"]), level=level,
        sign=sign, n=n, horizon=_numeric(cfg, "horizon", None),
        seed=cfg.seed, discount=float(discount) if discount is not None else None,
    )
    write_json(os.path.join(out_dir, "estimate.json"), {
        "mean": est.mean, "stderr": est.stderr, "n": est.n,
        "censor_fraction": est.censor_fraction, "bias_bound": est.bias_bound,
        "seed": est.seed, "horizon": est.horizon,
        "provenance": {"config_sha256": cfg.sha256(), "seed": cfg.seed},
    })
    return EXIT_OK


def run_verify(cfg: Config, suite: str, out_dir: str) -> int:
    if suite not in SUITES:
        print(f"unknown suite {suite!r}; choose from {sorted(SUITES)}",
              file=sys.stderr)
        return EXIT_CONFIG
    kwargs = {}
    sec = cfg.sections.get("verify") or {}
    if suite == "homog":
        kwargs["n_random"] = int(sec.get("n_random", 200))
    if suite == "inhomog":
        kwargs["n_mc"] = int(sec.get("n_mc", 200_000))
    if suite == "jumps":
        kwargs["n"] = int(sec.get("n_jumps", 100_000))
    if "seed" in sec:
        kwargs["seed"] = int(sec["seed"])
    report = run_suite(suite, **kwargs)
    for line in report.lines():
        print(line)
    write_json(os.path.join(out_dir, f"verify_{suite}.json"), {
        "suite": suite,
        "passed": report.passed,
        "checks": [
            {"label": c.label, "value": c.value, "tolerance": c.tolerance,
             "passed": c.passed, "detail": c.detail}
            for c in report.checks
        ],
        "provenance": {"config_sha256": cfg.sha256(), "seed": cfg.seed},
    })
    return EXIT_OK if report.passed else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fluidhopf",
        description="First-passage functionals of Markov-modulated fluids.",
    )
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("factorize", "passage", "simulate"):
        q = sub.add_parser(name)
        q.add_argument("config", help="YAML config file")
        q.add_argument("--out", default=".", help="output directory")
        q.add_argument("--set", action="append", default=[], dest="overrides",
                       metavar="KEY=VAL", help="override a config key")
        if name == "passage":
            q.add_argument("--laplace", action="store_true",
                           help="emit the normalized transform table")
    q = sub.add_parser("verify")
    q.add_argument("config", help="YAML config file")
    q.add_argument("suite", help="one of: " + ", ".join(sorted(SUITES)))
    q.add_argument("--out", default=".", help="output directory")
    q.add_argument("--set", action="append", default=[], dest="overrides",
                   metavar="KEY=VAL", help="override a config key")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.overrides)
    if getattr(args, "laplace", False):
        overrides.append("passage.laplace=true")
    try:
        cfg = load_config(args.config, overrides)
        ensure_valid(
            cfg.model,
            check_resolution=float(cfg.numerics["check_resolution"]),
            horizon=float(cfg.numerics["validation_horizon"]),
        )
    except (ConfigError, FluidHopfError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(args.out, exist_ok=True)
    try:
        if args.command == "factorize":
            return run_factorize(cfg, args.out)
        if args.command == "passage":
            return run_passage(cfg, args.out)
        if args.command == "simulate":
            return run_simulate(cfg, args.out)
        if args.command == "verify":
            return run_verify(cfg, args.suite, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FluidHopfError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    raise AssertionError("unreachable")


if __name__ == "__main__":
    raise SystemExit(main())
