"""Command line entry points: generate networks, fit models, and run the
forward-simulation validation, all reproducibly seeded.

Configuration precedence is flags > key=value config file > built-in
defaults; every run writes the resolved configuration next to its outputs,
and identical command lines with identical seeds produce byte-identical
files. The default output directory can be set with the CRMSBM_OUTDIR
environment variable.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .baselines import BaselineConfig, dcsbm_gibbs, pirm_gibbs
from .data import (RawEdgeList, load_edge_list, make_holdout, preprocess,
                   save_edge_list)
from .errors import CrmsbmError
from .generate import sample_network
from .ggp import GgpParams
from .inference import McmcConfig, run_mcmc
from .validate import validate_signatures, validate_total_mass

_GENERATE_DEFAULTS = {
    "K": 3, "alpha": 20.0, "sigma": 0.5, "tau": 1.0,
    "lambda_a": 1.0, "lambda_b": 1.0, "beta0": 1.0,
    "seed": 0, "out": "", "prefix": "network",
}

_FIT_DEFAULTS = {
    "data": "", "model": "crmsbm", "K": 3, "iters": 2000, "burn_in": -1,
    "mh_steps": 0, "step_size": 0.0, "holdout": 0.0, "seed": 0, "chains": 1,
    "symmetrize": False, "counts": False, "drop_self": False,
    "out": "", "prefix": "fit",
}

_VALIDATE_DEFAULTS = {
    "alpha": 2.0, "sigma": 0.5, "tau": 1.0,
    "networks": 100000, "samples": 100000, "seed": 0,
    "out": "", "prefix": "val",
}

_MODELS = ("crmsbm", "crm", "pirm", "dcsbm")


def _read_config(path, parser):
    cfg = {}
    try:
        fh = open(path)
    except OSError as exc:
        parser.error(f"cannot read config file: {exc}")
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                parser.error(f"{path}:{lineno}: expected key=value")
            key, val = line.split("=", 1)
            cfg[key.strip().replace("-", "_")] = val.strip()
    return cfg


def _coerce(raw, default, key, parser):
    try:
        if isinstance(default, bool):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        parser.error(f"config key {key!r}: cannot parse {raw!r}")


def _resolve(args, parser, defaults):
    cfg = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path:
        for key, raw in _read_config(config_path, parser).items():
            if key not in cfg:
                parser.error(f"unknown config key {key!r}")
            cfg[key] = _coerce(raw, defaults[key], key, parser)
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _outdir(cfg):
    out = cfg["out"] or os.environ.get("CRMSBM_OUTDIR") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_manifest(cfg, command, out, prefix):
    manifest = dict(cfg)
    manifest["command"] = command
    path = os.path.join(out, f"{prefix}_manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join("%.12g" % float(v) for v in row) + "\n")


def _check_ggp(cfg, parser):
    if not cfg["alpha"] > 0.0:
        parser.error("alpha must be positive")
    if not 0.0 < cfg["sigma"] < 1.0:
        parser.error("sigma must lie in (0, 1)")
    if cfg["tau"] < 0.0:
        parser.error("tau must be nonnegative")


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def _cmd_generate(args, parser):
    cfg = _resolve(args, parser, _GENERATE_DEFAULTS)
    _check_ggp(cfg, parser)
    if cfg["K"] < 1:
        parser.error("K must be at least 1")
    if cfg["lambda_a"] <= 0.0 or cfg["lambda_b"] <= 0.0 or cfg["beta0"] <= 0.0:
        parser.error("lambda_a, lambda_b, and beta0 must be positive")

    out = _outdir(cfg)
    rng = np.random.default_rng(np.random.SeedSequence(cfg["seed"]))
    params = GgpParams(cfg["alpha"], cfg["sigma"], cfg["tau"])
    net = sample_network(cfg["K"], params, beta0=cfg["beta0"],
                         lambda_a=cfg["lambda_a"], lambda_b=cfg["lambda_b"],
                         rng=rng)
    counts = net.count_matrix()
    ii, jj = np.nonzero(counts)
    records = [(str(i + 1), str(j + 1), int(counts[i, j]))
               for i, j in zip(ii, jj)]
    save_edge_list(RawEdgeList(records),
                   os.path.join(out, f"{cfg['prefix']}_edges.txt"))
    with open(os.path.join(out, f"{cfg['prefix']}_truth.csv"), "w") as fh:
        fh.write("vertex,block,weight\n")
        for v, (b, w) in enumerate(zip(net.vertex_blocks,
                                       net.vertex_weights)):
            fh.write("%d,%d,%.12g\n" % (v + 1, b, w))
    _write_manifest(cfg, "generate", out, cfg["prefix"])
    print("generated %d vertices, %d edges (prefix %s)"
          % (net.vertex_weights.shape[0], net.src.shape[0], cfg["prefix"]))
    return 0


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def _fit_one_chain(A, cfg, rng):
    model = cfg["model"]
    if model in ("crmsbm", "crm"):
        mh_steps = cfg["mh_steps"] or 150
        step = cfg["step_size"] or 0.1
        mc = McmcConfig(K=1 if model == "crm" else cfg["K"],
                        iters=cfg["iters"], burn_in=cfg["burn_in"],
                        mh_steps=mh_steps, step_size=step,
                        crm_limit=(model == "crm"))
        res = run_mcmc(A, mc, rng)
        return res.trace_header, res.trace, res.predictions, \
            res.mode_labels, res.accept_rate
    mh_steps = cfg["mh_steps"] or 20
    step = cfg["step_size"] or 0.25
    bc = BaselineConfig(iters=cfg["iters"], burn_in=cfg["burn_in"],
                        mh_steps=mh_steps, step_size=step)
    run = dcsbm_gibbs if model == "dcsbm" else pirm_gibbs
    res = run(A, bc, rng)
    return res.trace_header, res.trace, res.predictions, \
        res.best_labels, res.accept_rate


def _cmd_fit(args, parser):
    cfg = _resolve(args, parser, _FIT_DEFAULTS)
    if not cfg["data"]:
        parser.error("--data is required")
    if cfg["model"] not in _MODELS:
        parser.error(f"model must be one of {', '.join(_MODELS)}")
    if cfg["K"] < 1:
        parser.error("K must be at least 1")
    if cfg["iters"] < 0:
        parser.error("iters must be nonnegative")
    if not 0.0 <= cfg["holdout"] < 1.0:
        parser.error("holdout must lie in [0, 1)")
    if cfg["chains"] < 1:
        parser.error("chains must be at least 1")

    out = _outdir(cfg)
    raw = load_edge_list(cfg["data"])
    A = preprocess(raw, symmetrize=cfg["symmetrize"],
                   binary=not cfg["counts"], drop_self=cfg["drop_self"])
    seeds = np.random.SeedSequence(cfg["seed"]).spawn(cfg["chains"] + 1)
    if cfg["holdout"] > 0.0:
        A = make_holdout(A, cfg["holdout"],
                         np.random.default_rng(seeds[-1]))

    def run_chain(idx):
        rng = np.random.default_rng(seeds[idx])
        header, trace, preds, labels, accept = _fit_one_chain(A, cfg, rng)
        suffix = "_c%d" % idx if cfg["chains"] > 1 else ""
        _write_csv(os.path.join(out, f"{cfg['prefix']}_trace{suffix}.csv"),
                   header, trace)
        with open(os.path.join(out,
                               f"{cfg['prefix']}_predictions{suffix}.csv"),
                  "w") as fh:
            fh.write("i,j,score,true_label\n")
            for (i, j), score, truth in zip(A.holdout_pairs, preds,
                                            A.holdout_truth):
                fh.write("%d,%d,%.12g,%d\n" % (i + 1, j + 1, score, truth))
        with open(os.path.join(out, f"{cfg['prefix']}_labels{suffix}.csv"),
                  "w") as fh:
            fh.write("vertex,block\n")
            for name, lab in zip(A.labels, labels):
                fh.write("%s,%d\n" % (name, lab))
        return idx, accept

    with ThreadPoolExecutor(max_workers=min(cfg["chains"], 4)) as pool:
        results = list(pool.map(run_chain, range(cfg["chains"])))
    _write_manifest(cfg, "fit", out, cfg["prefix"])
    for idx, accept in results:
        print("chain %d: %d vertices, %d iterations, accept rate %.3f"
              % (idx, A.n_vertices, cfg["iters"], accept))
    return 0


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

def _cmd_validate(args, parser):
    cfg = _resolve(args, parser, _VALIDATE_DEFAULTS)
    _check_ggp(cfg, parser)
    if cfg["networks"] < 1 or cfg["samples"] < 1:
        parser.error("networks and samples must be at least 1")

    out = _outdir(cfg)
    params = GgpParams(cfg["alpha"], cfg["sigma"], cfg["tau"])
    rng = np.random.default_rng(np.random.SeedSequence(cfg["seed"]))
    report = validate_signatures(params, cfg["networks"], rng)
    ks = validate_total_mass(params, cfg["samples"], rng)

    report.to_csv(os.path.join(out, f"{cfg['prefix']}_signatures.csv"))
    sig_ok = report.passed()
    ks_ok = ks < 0.01
    summary = {
        "max_abs_z": report.max_abs_z,
        "tv_distance": report.tv_distance,
        "ks_distance": ks,
        "z_limit": 4.0, "tv_limit": 0.02, "ks_limit": 0.01,
        "signatures_passed": bool(sig_ok),
        "total_mass_passed": bool(ks_ok),
        "passed": bool(sig_ok and ks_ok),
    }
    with open(os.path.join(out, f"{cfg['prefix']}_report.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(cfg, "validate", out, cfg["prefix"])

    print("%-14s %12s %12s %8s" % ("signature", "analytic", "empirical", "z"))
    for name, analytic, empirical, z in report.rows():
        print("%-14s %12.6f %12.6f %8.2f" % (name, analytic, empirical, z))
    print("max |z| = %.3f (limit 4), TV = %.5f (limit 0.02)"
          % (report.max_abs_z, report.tv_distance))
    print("total-mass KS = %.5f (limit 0.01)" % ks)
    print("PASS" if summary["passed"] else "FAIL")
    return 0 if summary["passed"] else 1


# ---------------------------------------------------------------------------

def _add_common(sub):
    sub.add_argument("--config", help="key=value file, overridden by flags")
    sub.add_argument("--out", help="output directory "
                     "(default: $CRMSBM_OUTDIR or the working directory)")
    sub.add_argument("--prefix", help="output file name prefix")
    sub.add_argument("--seed", type=int, help="RNG seed")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="crmsbm",
        description="Random-measure block models: generation, inference, "
                    "and forward-simulation validation.")
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("generate", help="sample a synthetic network")
    gen.add_argument("--K", type=int, help="number of blocks")
    gen.add_argument("--alpha", type=float)
    gen.add_argument("--sigma", type=float)
    gen.add_argument("--tau", type=float)
    gen.add_argument("--lambda-a", type=float, dest="lambda_a")
    gen.add_argument("--lambda-b", type=float, dest="lambda_b")
    gen.add_argument("--beta0", type=float,
                     help="block-proportion concentration")
    _add_common(gen)
    gen.set_defaults(func=_cmd_generate)

    fit = subs.add_parser("fit", help="run MCMC on an edge list")
    fit.add_argument("--data", help="edge list path")
    fit.add_argument("--model", choices=_MODELS)
    fit.add_argument("--K", type=int, help="number of blocks (crmsbm)")
    fit.add_argument("--iters", type=int)
    fit.add_argument("--burn-in", type=int, dest="burn_in",
                     help="default: half of iters")
    fit.add_argument("--mh-steps", type=int, dest="mh_steps")
    fit.add_argument("--step-size", type=float, dest="step_size")
    fit.add_argument("--holdout", type=float,
                     help="held-out dyad fraction for link prediction")
    fit.add_argument("--chains", type=int,
                     help="independent chains run concurrently")
    fit.add_argument("--symmetrize", action=argparse.BooleanOptionalAction)
    fit.add_argument("--counts", action=argparse.BooleanOptionalAction,
                     help="keep multiplicities instead of thresholding")
    fit.add_argument("--drop-self", action=argparse.BooleanOptionalAction,
                     dest="drop_self")
    _add_common(fit)
    fit.set_defaults(func=_cmd_fit)

    val = subs.add_parser("validate",
                          help="check forward simulation against analytic "
                               "signature probabilities and the total-mass "
                               "distribution")
    val.add_argument("--alpha", type=float)
    val.add_argument("--sigma", type=float)
    val.add_argument("--tau", type=float)
    val.add_argument("--networks", type=int,
                     help="forward-simulated networks for the signature table")
    val.add_argument("--samples", type=int,
                     help="draws for the total-mass distribution check")
    _add_common(val)
    val.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (CrmsbmError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
