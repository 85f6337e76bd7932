"""Command-line front end.

Subcommands: ``generate``, ``simulate``, ``estimate``, ``recovery-prob``,
``patch-catch``, ``theory-check``.  Experiment commands read a JSON config
and write CSV/JSON into an output directory; exit code 0 on success, 2 on
a configuration problem, 3 on a numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .dynamics import NoiseKind, SimConfig, analytic_correlations, simulate_and_accumulate
from .errors import ConfigError, NumericError
from .graphs import NodeSet, PartialErSpec, load_edge_list, sample_partial_er, save_edge_list, subgraph
from .inference import (
    ClassifierMethod,
    apply_classifier,
    classification_report,
    granger_truncated,
)
from .lab import (
    ClassifierSpec,
    CorrelationMode,
    CRule,
    EmbeddedSource,
    ExperimentConfig,
    PatchCatchConfig,
    RegimeSpec,
    TheoryCheckConfig,
    patch_catch_experiment,
    patch_catch_rows_csv,
    patch_catch_trace_csv,
    recovery_probability_experiment,
    recovery_rows_csv,
    theory_check,
    theory_rows_csv,
)
from .patchwork import TieBreak
from .weights import CombinationRule, PolicyParams, build_matrix

SCHEMA = 1


def parse_node_range(text: str) -> NodeSet:
    """Parse ``0-9`` / ``0,3,7`` / mixed ``0-4,8`` node specifications."""
    ids: set[int] = set()
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, _, hi = part.partition("-")
            try:
                lo_i, hi_i = int(lo), int(hi)
            except ValueError as exc:
                raise ConfigError(f"bad node range {part!r}") from exc
            if hi_i < lo_i:
                raise ConfigError(f"empty node range {part!r}")
            ids.update(range(lo_i, hi_i + 1))
        else:
            try:
                ids.add(int(part))
            except ValueError as exc:
                raise ConfigError(f"bad node id {part!r}") from exc
    if not ids:
        raise ConfigError(f"no node ids in {text!r}")
    return NodeSet.of(ids)


def _require(cfg: dict, key: str, kind, where: str):
    if key not in cfg:
        raise ConfigError(f"missing field {key!r} in {where}")
    value = cfg[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind):
        raise ConfigError(f"field {key!r} in {where} must be {kind.__name__}")
    return value


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path} (line {exc.lineno}): {exc.msg}") from exc


def _parse_c_rule(cfg: dict, where: str) -> CRule:
    kind = _require(cfg, "kind", str, where)
    if kind == "loglog":
        return CRule.loglog()
    if kind == "multiple":
        return CRule.multiple(_require(cfg, "value", float, where))
    if kind == "explicit":
        return CRule.explicit(_require(cfg, "value", float, where))
    raise ConfigError(f"unknown c rule {kind!r} in {where}")


def _parse_policy(cfg: dict, where: str) -> PolicyParams:
    rule = _require(cfg, "rule", str, where)
    try:
        rule_enum = CombinationRule(rule)
    except ValueError as exc:
        raise ConfigError(f"unknown combination rule {rule!r} in {where}") from exc
    rho = _require(cfg, "rho", float, where)
    lam = float(cfg.get("lambda", 1.0))
    try:
        return PolicyParams(rule_enum, rho, lam)
    except ValueError as exc:
        raise ConfigError(f"bad policy in {where}: {exc}") from exc


def _parse_embedded(cfg: dict, where: str) -> EmbeddedSource:
    kind = _require(cfg, "kind", str, where)
    if kind == "er":
        q = cfg.get("q")
        return EmbeddedSource.er(None if q is None else float(q))
    if kind == "match_p":
        return EmbeddedSource.match_p()
    if kind == "ring":
        return EmbeddedSource.ring()
    if kind == "explicit":
        path = _require(cfg, "file", str, where)
        try:
            return EmbeddedSource.explicit(load_edge_list(path))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load embedded graph {path}: {exc}") from exc
    raise ConfigError(f"unknown embedded source {kind!r} in {where}")


def _parse_sim(cfg: dict, where: str, default_beta: float) -> SimConfig:
    try:
        noise = NoiseKind(cfg.get("noise", "gaussian"))
    except ValueError as exc:
        raise ConfigError(f"unknown noise kind in {where}") from exc
    try:
        return SimConfig(
            beta=float(cfg.get("beta", default_beta)),
            n_max=int(_require(cfg, "n_max", int, where)),
            burn_in=int(cfg.get("burn_in", 1000)),
            noise=noise,
            seed=int(cfg.get("seed", 0)),
        )
    except ValueError as exc:
        raise ConfigError(f"bad simulation settings in {where}: {exc}") from exc


def _parse_classifier(cfg: dict, where: str) -> ClassifierSpec:
    method = _require(cfg, "method", str, where)
    if method == "kmeans2":
        return ClassifierSpec(ClassifierMethod.KMEANS2)
    if method == "threshold":
        eta = cfg.get("eta", "auto")
        if eta == "auto":
            return ClassifierSpec(ClassifierMethod.THRESHOLD, None)
        return ClassifierSpec(ClassifierMethod.THRESHOLD, float(eta))
    raise ConfigError(f"unknown classifier {method!r} in {where}")


def _out_path(out_dir: str, name: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, name)


def _save_matrix_csv(m: np.ndarray, path: str) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for row in np.atleast_2d(m):
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def _cmd_generate(args) -> int:
    rng = np.random.default_rng(args.seed)
    s = parse_node_range(args.s) if args.s else NodeSet(tuple(range(args.s_size)))
    if args.embedded == "ring":
        src = EmbeddedSource.ring()
    elif args.embedded == "match-p":
        src = EmbeddedSource.match_p()
    elif args.embedded.startswith("er"):
        _, _, q = args.embedded.partition(":")
        src = EmbeddedSource.er(float(q) if q else None)
    elif args.embedded.startswith("file:"):
        src = EmbeddedSource.explicit(load_edge_list(args.embedded[5:]))
    else:
        raise ConfigError(f"unknown embedded source {args.embedded!r}")
    planted = src.sample(len(s), args.p, rng)
    g = sample_partial_er(PartialErSpec(args.n, args.p, s, planted), rng)
    save_edge_list(g, _out_path(args.out, "graph.edges"))
    save_edge_list(subgraph(g, s), _out_path(args.out, "observable.edges"))
    print(
        f"generate: N={args.n} p={args.p:.5f} |S|={len(s)} "
        f"edges={g.edge_count()} -> {args.out}"
    )
    return 0


def _policy_from_args(args) -> PolicyParams:
    try:
        rule = CombinationRule(args.policy)
    except ValueError as exc:
        raise ConfigError(f"unknown combination rule {args.policy!r}") from exc
    try:
        return PolicyParams(rule, args.rho, args.lam)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _cmd_simulate(args) -> int:
    g = load_edge_list(args.graph)
    policy = _policy_from_args(args)
    a = build_matrix(g, policy)
    s = parse_node_range(args.s)
    s.check_within(g.n)
    beta = args.beta if args.beta is not None else 1.0 - policy.rho
    cfg = SimConfig(
        beta=beta,
        n_max=args.n_max,
        burn_in=args.burn_in,
        noise=NoiseKind(args.noise),
        seed=args.seed,
    )
    dump = None
    try:
        if args.dump:
            dump = open(_out_path(args.out, "trajectory.csv"), "w", encoding="ascii")
        corr = simulate_and_accumulate(a, cfg, s, dump=dump)
    finally:
        if dump is not None:
            dump.close()
    _save_matrix_csv(corr.r0, _out_path(args.out, "r0.csv"))
    _save_matrix_csv(corr.r1, _out_path(args.out, "r1.csv"))
    print(
        f"simulate: N={g.n} |S|={len(s)} n_max={cfg.n_max} "
        f"noise={cfg.noise.value} -> {args.out}"
    )
    return 0


def _cmd_estimate(args) -> int:
    g = load_edge_list(args.graph)
    policy = _policy_from_args(args)
    a = build_matrix(g, policy)
    s = parse_node_range(args.s)
    s.check_within(g.n)
    beta = args.beta if args.beta is not None else 1.0 - policy.rho
    if args.mode == "analytic":
        corr = analytic_correlations(a, beta, s)
    else:
        cfg = SimConfig(
            beta=beta,
            n_max=args.n_max,
            burn_in=args.burn_in,
            noise=NoiseKind(args.noise),
            seed=args.seed,
        )
        corr = simulate_and_accumulate(a, cfg, s)
    est = granger_truncated(corr)
    if args.classifier == "kmeans2":
        spec = ClassifierSpec(ClassifierMethod.KMEANS2)
    else:
        if args.eta == "auto":
            if args.p is None:
                raise ConfigError("--eta auto needs --p to derive the threshold")
            spec = ClassifierSpec(ClassifierMethod.THRESHOLD, None)
        else:
            spec = ClassifierSpec(ClassifierMethod.THRESHOLD, float(args.eta))
    decided = apply_classifier(est, spec.resolve(policy, g.n, args.p or 1.0))
    _save_matrix_csv(est, _out_path(args.out, "a_hat.csv"))
    report = {
        "schema": SCHEMA,
        "n": g.n,
        "observable": list(s),
        "pairs": classification_report(est, decided, s),
    }
    with open(_out_path(args.out, "classification.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    edges = decided.edge_count()
    print(f"estimate: |S|={len(s)} mode={args.mode} decided_edges={edges} -> {args.out}")
    return 0


def _cmd_recovery_prob(args) -> int:
    cfg = _load_config(args.config)
    policy = _parse_policy(_require(cfg, "policy", dict, args.config), "policy")
    regime = RegimeSpec(
        tuple(int(n) for n in _require(cfg, "n_grid", list, args.config)),
        _parse_c_rule(_require(cfg, "c_rule", dict, args.config), "c_rule"),
    )
    corr_cfg = _require(cfg, "correlations", dict, args.config)
    mode = _require(corr_cfg, "mode", str, "correlations")
    if mode == "analytic":
        correlations = CorrelationMode.analytic()
    elif mode == "empirical":
        correlations = CorrelationMode.empirical(
            _parse_sim(corr_cfg, "correlations", 1.0 - policy.rho)
        )
    else:
        raise ConfigError(f"unknown correlation mode {mode!r}")
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    experiment = ExperimentConfig(
        regime=regime,
        s_size=int(_require(cfg, "s_size", int, args.config)),
        embedded=_parse_embedded(cfg.get("embedded", {"kind": "er"}), "embedded"),
        policy=policy,
        classifier=_parse_classifier(
            cfg.get("classifier", {"method": "kmeans2"}), "classifier"
        ),
        correlations=correlations,
        trials=int(_require(cfg, "trials", int, args.config)),
        base_seed=seed,
    )
    rows = recovery_probability_experiment(experiment, threads=args.threads)
    csv_text = recovery_rows_csv(rows)
    with open(_out_path(args.out, "recovery.csv"), "w", encoding="ascii") as fh:
        fh.write(csv_text)
    summary = {
        "schema": SCHEMA,
        "rows": [
            {
                "N": r.n,
                "trials": r.trials,
                "perfect": r.perfect,
                "fraction": r.fraction,
                "ci_lo": r.ci_lo,
                "ci_hi": r.ci_hi,
            }
            for r in rows
        ],
    }
    with open(_out_path(args.out, "recovery.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    worst = min(rows, key=lambda r: r.fraction)
    print(
        f"recovery-prob: {len(rows)} sizes, worst fraction "
        f"{worst.fraction:.3f} at N={worst.n} -> {args.out}"
    )
    return 0


def _cmd_patch_catch(args) -> int:
    cfg = _load_config(args.config)
    policy = _parse_policy(_require(cfg, "policy", dict, args.config), "policy")
    sim = _parse_sim(
        _require(cfg, "sim", dict, args.config), "sim", 1.0 - policy.rho
    )
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    try:
        tiebreak = TieBreak(cfg.get("tiebreak", "first"))
    except ValueError as exc:
        raise ConfigError(f"unknown tiebreak {cfg.get('tiebreak')!r}") from exc
    experiment = PatchCatchConfig(
        n=int(_require(cfg, "n", int, args.config)),
        c_rule=_parse_c_rule(_require(cfg, "c_rule", dict, args.config), "c_rule"),
        s_size=int(_require(cfg, "s_size", int, args.config)),
        probe_limit=int(_require(cfg, "probe_limit", int, args.config)),
        policy=policy,
        sim=sim,
        trials=int(_require(cfg, "trials", int, args.config)),
        base_seed=seed,
        tiebreak=tiebreak,
        shared_trajectory=bool(cfg.get("shared_trajectory", True)),
        embedded=_parse_embedded(cfg.get("embedded", {"kind": "match_p"}), "embedded"),
    )
    results = patch_catch_experiment(experiment, threads=args.threads)
    with open(_out_path(args.out, "final.csv"), "w", encoding="ascii") as fh:
        fh.write(patch_catch_rows_csv(results))
    with open(_out_path(args.out, "trace.csv"), "w", encoding="ascii") as fh:
        fh.write(patch_catch_trace_csv(results))
    zero = sum(1 for r in results if r.final_distance == 0.0)
    mean_final = sum(r.final_distance for r in results) / len(results)
    print(
        f"patch-catch: {len(results)} trials, {zero} exact, "
        f"mean final distance {mean_final:.5f} -> {args.out}"
    )
    return 0


def _cmd_theory_check(args) -> int:
    if args.grid:
        try:
            grid = tuple(float(x) for x in args.grid.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad N grid {args.grid!r}") from exc
    else:
        grid = tuple(10.0 ** e for e in range(3, 9))
    cfg = TheoryCheckConfig(
        rho=args.rho,
        n_grid=grid,
        c_rule=CRule.loglog() if args.multiple is None else CRule.multiple(args.multiple),
        s_size=args.s_size,
    )
    rows = theory_check(cfg)
    text = theory_rows_csv(rows)
    if args.out:
        with open(_out_path(args.out, "theory.csv"), "w", encoding="ascii") as fh:
            fh.write(text)
    header = f"{'N':>12} {'r_N':>4} {'error_tail':>14} {'distance_tail':>16}"
    print(header)
    for r in rows:
        print(f"{r.n:>12.4g} {r.r_n:>4d} {r.error_tail:>14.6g} {r.distance_tail:>16.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tomolab",
        description="Local tomography of diffusion networks under partial observation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample a partially characterized network")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--s-size", type=int, default=10)
    p.add_argument("--s", type=str, default=None, help="explicit observable ids, e.g. 0-9")
    p.add_argument("--embedded", type=str, default="er", help="er[:q] | ring | match-p | file:PATH")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=_cmd_generate)

    common_sim = argparse.ArgumentParser(add_help=False)
    common_sim.add_argument("--graph", type=str, required=True)
    common_sim.add_argument("--policy", type=str, required=True, choices=["laplacian", "metropolis"])
    common_sim.add_argument("--rho", type=float, required=True)
    common_sim.add_argument("--lam", type=float, default=1.0)
    common_sim.add_argument("--s", type=str, required=True)
    common_sim.add_argument("--beta", type=float, default=None)
    common_sim.add_argument("--n-max", type=int, default=100000)
    common_sim.add_argument("--burn-in", type=int, default=1000)
    common_sim.add_argument("--noise", type=str, default="gaussian",
                            choices=[k.value for k in NoiseKind])
    common_sim.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("simulate", parents=[common_sim],
                       help="estimate correlations from a trajectory")
    p.add_argument("--dump", action="store_true", help="also write the raw observable samples")
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("estimate", parents=[common_sim],
                       help="estimate the observable submatrix and classify pairs")
    p.add_argument("--mode", type=str, default="analytic", choices=["analytic", "empirical"])
    p.add_argument("--classifier", type=str, default="kmeans2", choices=["kmeans2", "threshold"])
    p.add_argument("--eta", type=str, default="auto")
    p.add_argument("--p", type=float, default=None, help="edge probability, for --eta auto")
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("recovery-prob", help="recovery probability over a size grid")
    p.add_argument("--config", type=str, required=True)
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=_cmd_recovery_prob)

    p = sub.add_parser("patch-catch", help="patch-based reconstruction campaign")
    p.add_argument("--config", type=str, required=True)
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=_cmd_patch_catch)

    p = sub.add_parser("theory-check", help="tail quantities of the sparse regime")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--s-size", type=int, default=10)
    p.add_argument("--grid", type=str, default=None, help="comma-separated N values")
    p.add_argument("--multiple", type=float, default=None,
                   help="use p = k log(N)/N instead of the log-log offset")
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=_cmd_theory_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
