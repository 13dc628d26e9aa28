"""Command-line surface: every certifier as a subcommand with JSON configs,
JSON reports, optional CSV output, and a three-way exit-code contract
(0 pass, 2 a certified inequality failed numerically, 1 usage/input error).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time

import numpy as np

from .. import genbounds as gb
from .. import ita
from .. import privacy as pv
from .. import stability as sb
from .. import states as st
from ..divergences import d_max, hockey_stick, relative_entropy, sandwiched_renyi
from ..learning import apply_algorithm, instrument_from_json, losses_from_json
from . import instances, randoms
from .selftest import RunConfig, run_selftest

SCHEMA_VERSION = 1

SUBCOMMANDS = (
    "divergence",
    "dp-check",
    "stability",
    "gen-bound",
    "prob-bound",
    "trueloss-bound",
    "ita",
    "sweep",
    "selftest",
)


class UsageError(Exception):
    pass


def _load_config(path: str | None) -> dict:
    if path is None:
        return {"schema_version": SCHEMA_VERSION}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise UsageError(f"unsupported schema_version {version}")
    return data


def _jsonable(obj):
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _write_report(report: dict, path: str | None) -> None:
    report = dict(report)
    report.setdefault("schema_version", SCHEMA_VERSION)
    report["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    text = json.dumps(report, indent=2, sort_keys=True, default=_jsonable) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _mechanism_from_config(cfg: dict, seed: int):
    spec = cfg.get("mechanism")
    if spec is None:
        raise UsageError("config needs a 'mechanism' object")
    kind = spec.get("kind", "type-randomized-response")
    if kind == "type-randomized-response":
        alph = st.alphabet([str(s) for s in spec.get("alphabet", ["a", "b"])])
        n = int(spec.get("n", 2))
        eta = float(spec.get("eta", 0.4))
        if "flip_mass" in spec:
            mech = pv.TypeRandomizedResponse(
                n=n, alphabet=alph, flip_mass=float(spec["flip_mass"]), eta=eta
            )
        else:
            mech = instances.reference_mechanism(
                n,
                alph,
                float(cfg.get("epsilon", 0.5)),
                float(spec.get("target_delta", cfg.get("delta", 0.0))),
                eta,
            )
        return mech, mech.encoding(), n, alph
    if kind == "kraus":
        alph = st.alphabet([str(s) for s in spec["alphabet"]])
        inst = instrument_from_json(spec["instrument"])
        enc = st.encoding_from_json(spec["encoding"])
        return inst, enc, int(spec["n"]), alph
    raise UsageError(f"unknown mechanism kind {kind!r}")


def _instance_from_config(cfg: dict, seed: int):
    spec = cfg.get("instance", {"kind": "random"})
    kind = spec.get("kind", "random")
    if kind == "random":
        inst = instances.random_learning_instance(
            int(spec.get("seed", seed)), int(spec.get("index", 0)),
            bounded=bool(spec.get("bounded", False)),
        )
        return inst.joint, inst.loss
    if kind == "kraus":
        alph = st.alphabet([str(s) for s in spec["alphabet"]])
        enc = st.encoding_from_json(spec["encoding"])
        inst = instrument_from_json(spec["instrument"])
        datasets = [st.dataset_from_json(d, alph) for d in spec["datasets"]]
        prior = np.asarray(spec["prior"], dtype=float)
        joint = apply_algorithm(inst, datasets, prior, enc)
        loss = losses_from_json(spec["loss"], bounded=bool(spec.get("bounded", False)))
        return joint, loss
    raise UsageError(f"unknown instance kind {kind!r}")


def cmd_divergence(cfg: dict, args) -> tuple[int, dict]:
    if "rho" in cfg:
        rho = st.matrix_from_json(cfg["rho"])
        sigma = st.matrix_from_json(cfg["sigma"])
    else:
        rng = randoms.rng_for(args.seed, 0)
        dim = int(cfg.get("dim", 3))
        rho, sigma = randoms.ginibre_state(dim, rng), randoms.ginibre_state(dim, rng)
    gammas = [float(g) for g in cfg.get("gamma", [1.5, 2.0])]
    epsilons = [float(e) for e in cfg.get("epsilon", [0.0, 0.5])]
    rel = relative_entropy(rho, sigma)
    dm = d_max(rho, sigma)
    report = {
        "certifies": "divergence-evaluation",
        "relative_entropy": rel.value if rel.finite else "infinite",
        "d_max": dm.value if dm.finite else "infinite",
        "sandwiched_renyi": {
            str(g): (lambda v: v.value if v.finite else "infinite")(sandwiched_renyi(rho, sigma, g))
            for g in gammas
        },
        "hockey_stick": {str(e): hockey_stick(rho, sigma, e) for e in epsilons},
        "pass": True,
    }
    return 0, report


def cmd_dp_check(cfg: dict, args) -> tuple[int, dict]:
    mech, enc, n, alph = _mechanism_from_config(cfg, args.seed)
    params = pv.PrivacyParams(float(cfg.get("epsilon", 0.5)), float(cfg.get("delta", 0.0)))
    report = pv.dp_verify(mech, enc, params, n=n, alph=alph, strict=bool(cfg.get("strict", False)))
    payload = report.to_json()
    payload["certifies"] = "one-neighbor-dp"
    return (0 if report.passed else 2), payload


def cmd_stability(cfg: dict, args) -> tuple[int, dict]:
    mech, enc, n, alph = _mechanism_from_config(cfg, args.seed)
    params = pv.PrivacyParams(float(cfg.get("epsilon", 0.5)), float(cfg.get("delta", 0.0)))
    p = sb.StabilityBoundParams(
        n, alph.size, params, m=float(cfg.get("m", 1.0)), t=cfg.get("t")
    )
    datasets = st.all_datasets(n, alph)
    priors = sb.default_priors(
        len(datasets),
        randoms.rng_for(args.seed, 1),
        extra=int(cfg.get("random_priors", 20)),
    )
    chk = sb.empirical_stability_check(mech, enc, datasets, priors, p)
    payload = chk.to_json()
    payload["ldp_comparator"] = sb.ldp_comparator(params.epsilon)
    payload["optimal_t"] = sb.optimal_t(n, params.epsilon)
    if cfg.get("dump_grid_cover", False):
        payload["grid_cover"] = sb.grid_cover(n, alph, payload["optimal_t"]).to_json()
    return (0 if chk.passed else 2), payload


def cmd_gen_bound(cfg: dict, args) -> tuple[int, dict]:
    joint, loss = _instance_from_config(cfg, args.seed)
    alpha = cfg.get("alpha")
    rep = gb.bound_expected(joint, loss, alpha=float(alpha) if alpha is not None else None,
                            safety=float(cfg.get("safety", gb.DEFAULT_SAFETY)))
    return (0 if rep.passed else 2), rep.to_json()


def cmd_prob_bound(cfg: dict, args) -> tuple[int, dict]:
    spec = cfg.get("instance", {"kind": "random-iid"})
    if spec.get("kind", "random-iid") != "random-iid":
        raise UsageError("prob-bound supports instance kind 'random-iid'")
    inst = instances.random_iid_instance(
        int(spec.get("seed", args.seed)),
        int(spec.get("index", 0)),
        int(spec.get("n", 2)),
        te_dim=int(spec.get("te_dim", 1)),
    )
    rep = gb.bound_probabilistic(
        inst,
        float(cfg.get("gamma", 2.0)),
        float(cfg.get("confidence_delta", 0.1)),
        safety=float(cfg.get("safety", gb.DEFAULT_SAFETY)),
    )
    return (0 if rep.passed else 2), rep.to_json()


def cmd_trueloss_bound(cfg: dict, args) -> tuple[int, dict]:
    cfg = dict(cfg)
    cfg.setdefault("instance", {"kind": "random", "bounded": True})
    joint, loss = _instance_from_config(cfg, args.seed)
    reports = gb.bound_true_loss_lower(
        joint, loss, gamma=float(cfg.get("gamma", 2.0)),
        mode=cfg.get("mode", "both" if loss.bounded else "exponential"),
    )
    ok = all(r.passed for r in reports)
    return (0 if ok else 2), {
        "certifies": "true-loss-lower-bounds",
        "reports": [r.to_json() for r in reports],
        "pass": ok,
    }


def cmd_ita(cfg: dict, args) -> tuple[int, dict]:
    n = int(cfg.get("n", 2))
    p = float(cfg.get("p", 0.1))
    params = pv.PrivacyParams(float(cfg.get("epsilon", 0.0)), float(cfg.get("delta", 1.0)))
    ex = ita.build_example(n, p)
    qnd = ita.qnd_check(n, p)
    qnd_half = ita.qnd_check(n, 0.5)
    ka, kb = ita.encoded_ket([0], p), ita.encoded_ket([1], p)
    hel = ita.helstrom_error(np.outer(ka, ka.conj()), np.outer(kb, kb.conj()))
    rep = ita.untrusted_dp_verify(ex, params)
    # Certified claims: the measurement is non-demolition on the orthogonal
    # encoding, and non-orthogonal encodings keep every neighbor pair
    # strictly sub-unit. The DP report itself is a finding either way.
    ok = qnd_half <= 1e-9 and (p == 0.5 or rep.tightest_delta < 1.0 - 1e-9)
    payload = {
        "certifies": "untrusted-processor-example",
        "n": n,
        "p": p,
        "qnd_deviation": qnd,
        "qnd_deviation_orthogonal": qnd_half,
        "helstrom_error": hel,
        "dp_report": rep.to_json(),
        "pass": ok,
    }
    return (0 if ok else 2), payload


def cmd_sweep(cfg: dict, args) -> tuple[int, dict]:
    sweep_var = cfg.get("sweep", "p")
    defaults = {"p": (0.25, 0.75, 26), "alpha": (0.1, 1.0, 19)}
    if sweep_var not in defaults:
        raise UsageError(f"unknown sweep variable {sweep_var!r}")
    lo, hi, steps = defaults[sweep_var]
    rows = gb.sweep_comparison(
        sweep_var,
        float(cfg.get("lo", lo)),
        float(cfg.get("hi", hi)),
        int(cfg.get("steps", steps)),
        alpha=float(cfg.get("alpha", 1.0)),
        p_fixed=float(cfg.get("p_fixed", 0.4)),
        flip_q=float(cfg.get("flip_q", 0.15)),
        eta=float(cfg.get("eta", 0.4)),
    )
    if args.csv:
        gb.write_sweep_csv(rows, args.csv)
    ordered = all(r.b_mi <= r.b_sep + 1e-12 for r in rows)
    payload = {
        "certifies": "bound-comparison-sweep",
        "sweep": sweep_var,
        "rows": [
            {"value": r.value, "B_MI": r.b_mi, "B_SEP": r.b_sep} for r in rows
        ],
        "ordering_holds": ordered,
        "pass": ordered,
    }
    return (0 if ordered else 2), payload


def cmd_selftest(cfg: dict, args) -> tuple[int, dict]:
    run_cfg = RunConfig.from_json(cfg)
    if args.seed != DEFAULT_SEED:
        run_cfg.seed = args.seed
    code, summary = run_selftest(run_cfg)
    return code, summary


DEFAULT_SEED = 20250809

_HANDLERS = {
    "divergence": cmd_divergence,
    "dp-check": cmd_dp_check,
    "stability": cmd_stability,
    "gen-bound": cmd_gen_bound,
    "prob-bound": cmd_prob_bound,
    "trueloss-bound": cmd_trueloss_bound,
    "ita": cmd_ita,
    "sweep": cmd_sweep,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qpg",
        description="Numerical certification of privacy, stability and "
        "generalization properties of classical-quantum learning algorithms.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config path")
        p.add_argument("--report", default=None, help="write the JSON report here")
        p.add_argument("--csv", default=None, help="optional CSV output path")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        cfg = _load_config(args.config)
        code, report = _HANDLERS[args.command](cfg, args)
        _write_report(report, args.report)
        return code
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
