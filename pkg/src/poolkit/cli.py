"""Command-line interface: pool, attnmap, gradcheck, tournament, inspect.

Exit codes: 0 success, 1 configuration/contract errors, 2 I/O errors,
3 numeric failures (non-convergence, failed gradient tolerance).
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import attnmap as attnmap_mod
from .cluster_poolers import SlotWeights, kmeans_distortion, kmeans_pool, otk_pool, slot_pool
from .errors import ConfigError, ContractError, FileFormatError, NumericError, PoolkitError, ShapeError
from .framework import FeatureMap, PooledSet
from .gradcheck import central_diff, compare
from .reweight_poolers import CbamWeights, SeWeights, cbam_pool, se_pool
from .simple_poolers import HowConfig, gap, gem, how, lse, max_pool
from .simpool import SimPoolParams, simpool_backward, simpool_forward
from .tensor_io import (
    METHOD_NAMES,
    RunConfig,
    config_from_dict,
    load_config,
    load_feature_map,
    read_npy,
    write_npy,
)
from .transformer_poolers import VitWeights, cait_class_attention, vit_cls_pool

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_NUMERIC = 3


def run_method(cfg: RunConfig, fm: FeatureMap) -> PooledSet:
    """Dispatch a configured method on a feature map."""
    from .framework import AttentionMatrix

    method = cfg.method
    gamma = cfg.resolved_gamma
    d = fm.d
    if method == "gap":
        return PooledSet(u=gap(fm)[:, None])
    if method == "max":
        return PooledSet(u=max_pool(fm)[:, None])
    if method == "gem":
        return PooledSet(u=gem(fm, gamma)[:, None])
    if method == "lse":
        return PooledSet(u=lse(fm, cfg.r)[:, None])
    if method == "how":
        cfg_how = HowConfig(
            centering=_load_weight(cfg, "centering"),
            projection=_load_weight(cfg, "projection"),
        )
        return PooledSet(u=how(fm, cfg_how)[:, None])
    if method == "sinkhorn-otk":
        anchors = _load_weight(cfg, "anchors")
        if anchors is None:
            rng = np.random.default_rng(cfg.seed)
            anchors = fm.x[:, rng.choice(fm.p, size=cfg.k, replace=False)]
        return otk_pool(fm, anchors, cfg.epsilon)
    if method == "kmeans":
        return kmeans_pool(fm, cfg.k, cfg.iters, seed=cfg.seed)
    if method == "slot":
        return slot_pool(fm, cfg.k, cfg.iters, SlotWeights.seeded(d, seed=cfg.seed),
                         seed=cfg.seed, simplified=True)
    if method == "se":
        w = SeWeights.seeded(_reducible(d), seed=cfg.seed)
        return se_pool(fm, w)
    if method == "cbam":
        w = CbamWeights.seeded(_reducible(d), seed=cfg.seed)
        return cbam_pool(fm, w)
    if method in ("vit", "cait"):
        weights = VitWeights.seeded(d, cfg.iters, seed=cfg.seed)
        fn = vit_cls_pool if method == "vit" else cait_class_attention
        return fn(fm, weights, cfg.heads, cfg.iters)
    if method == "simpool":
        params = SimPoolParams.seeded(d, gamma=gamma, seed=cfg.seed)
        u, a, _ = simpool_forward(fm, params)
        return PooledSet(u=u[:, None], attention=AttentionMatrix(a[:, None], stochastic_cols=True))
    raise ConfigError(f"unknown method {method!r}")


def _reducible(d: int) -> int:
    if d % 4 != 0:
        raise ConfigError(f"se/cbam need d divisible by 4, got d={d}")
    return d


def _load_weight(cfg: RunConfig, role: str):
    path = cfg.weights.get(role)
    if path is None:
        return None
    arr, _ = read_npy(path)
    return arr


def _config_from_args(args) -> RunConfig:
    base = {}
    if args.config:
        base = vars(load_config(args.config)).copy()
    overrides = {
        "method": args.method,
        "gamma": args.gamma,
        "k": args.k,
        "iters": args.iters,
        "heads": args.heads,
        "epsilon": args.epsilon,
        "r": args.r,
        "seed": args.seed,
        "width": args.width,
        "height": args.height,
    }
    for key, val in overrides.items():
        if val is not None:
            base[key] = val
    return config_from_dict(base, origin="command line")


def cmd_pool(args) -> int:
    cfg = _config_from_args(args)
    fm = load_feature_map(args.input, width=cfg.width, height=cfg.height)
    pooled = run_method(cfg, fm)
    if args.out:
        write_npy(pooled.u, args.out)
    if args.attn_out:
        if pooled.attention is None:
            raise ConfigError(f"method {cfg.method!r} produces no attention")
        write_npy(pooled.attention.a, args.attn_out)
    d_out, k_out = pooled.u.shape
    print(f"method={cfg.method} input d={fm.d} p={fm.p} "
          f"grid={fm.width}x{fm.height} -> pooled {d_out}x{k_out}")
    return EXIT_OK


def cmd_attnmap(args) -> int:
    a, _ = read_npy(args.attn)
    grid = attnmap_mod.reshape_attention(a, args.width, args.height)
    mask = attnmap_mod.mass_threshold(grid, args.mass)
    if args.pgm:
        attnmap_mod.write_pgm(grid, args.pgm)
    if args.mask_pgm:
        attnmap_mod.write_pgm(mask, args.mask_pgm)
    if args.bbox:
        box = attnmap_mod.largest_component_bbox(mask)
        print(f"{box.x_min} {box.y_min} {box.x_max} {box.y_max}")
    else:
        kept = int(mask.sum())
        print(f"grid {args.width}x{args.height}, mass {args.mass:g}: {kept} cells kept")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    if args.method != "simpool":
        raise ConfigError(f"gradcheck supports only 'simpool', got {args.method!r}")
    d, p = args.d, args.p
    reports = []
    for trial in range(args.trials):
        rng = np.random.default_rng(args.seed + trial)
        x = rng.normal(size=(d, p))
        fm = FeatureMap.from_array(x)
        params = SimPoolParams.seeded(d, gamma=args.gamma, seed=args.seed + 1000 + trial)
        du = rng.normal(size=d)
        _, _, cache = simpool_forward(fm, params)
        d_wq, d_wk, d_x = simpool_backward(cache, du)

        def loss_wq(wq):
            pp = SimPoolParams(w_q=wq, w_k=params.w_k, gamma=params.gamma)
            return float(du @ simpool_forward(fm, pp)[0])

        def loss_wk(wk):
            pp = SimPoolParams(w_q=params.w_q, w_k=wk, gamma=params.gamma)
            return float(du @ simpool_forward(fm, pp)[0])

        def loss_x(xv):
            return float(du @ simpool_forward(FeatureMap.from_array(xv), params)[0])

        reports.append(compare(f"W_Q[{trial}]", d_wq, central_diff(loss_wq, params.w_q, args.h)))
        reports.append(compare(f"W_K[{trial}]", d_wk, central_diff(loss_wk, params.w_k, args.h)))
        reports.append(compare(f"X[{trial}]", d_x, central_diff(loss_x, x, args.h)))

    print(f"{'parameter':<12} {'max rel err':>12} {'mean rel err':>13} {'worst':>10}")
    ok = True
    for rep in reports:
        status = "ok" if rep.passes(args.tol) else "FAIL"
        ok &= rep.passes(args.tol)
        print(f"{rep.name:<12} {rep.max_rel_error:>12.3e} {rep.mean_rel_error:>13.3e} "
              f"{str(rep.worst_index):>10} {status}")
    if not ok:
        raise NumericError(f"gradient check failed at tol {args.tol:g}")
    return EXIT_OK


def _synthesize_features(d: int, p: int, k_clusters: int, seed: int) -> FeatureMap:
    """Gaussian cluster mixture, shifted to be nonnegative."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(scale=3.0, size=(d, k_clusters))
    assign = rng.integers(k_clusters, size=p)
    x = centers[:, assign] + 0.3 * rng.standard_normal((d, p))
    return FeatureMap.from_array(x - x.min())


def _attention_entropy(pooled: PooledSet) -> float:
    if pooled.attention is None:
        return float("nan")
    a = pooled.attention.a
    mass = a.sum()
    if mass <= 0:
        return float("nan")
    q = (a / mass).reshape(-1)
    q = q[q > 0]
    return float(-(q * np.log(q)).sum())


def cmd_tournament(args) -> int:
    methods = args.methods.split(",") if args.methods else list(METHOD_NAMES)
    for m in methods:
        if m not in METHOD_NAMES:
            raise ConfigError(f"unknown method {m!r} in --methods")
    rows = []
    timings = {}
    for trial in range(args.trials):
        fm = _synthesize_features(args.d, args.p, args.k_clusters, args.seed + trial)
        for method in methods:
            overrides = {"method": method, "seed": args.seed,
                         "k": min(args.k_clusters, fm.p)}
            if method == "sinkhorn-otk":
                # scale the entropic regularizer to the squared-distance
                # costs so the plan stays solvable on any feature magnitude
                spread = float(np.var(fm.x, axis=1).sum())
                overrides["epsilon"] = max(0.1, 0.05 * spread)
            cfg = config_from_dict(overrides)
            start = time.perf_counter()
            pooled = run_method(cfg, fm)
            elapsed = (time.perf_counter() - start) * 1e3
            timings[method] = timings.get(method, 0.0) + elapsed
            rows.append((
                method,
                trial,
                float(np.linalg.norm(pooled.u)),
                kmeans_distortion(fm.x, pooled.u),
                _attention_entropy(pooled),
            ))
    header = "method\ttrial\tnorm\tdistortion\tentropy"
    lines = [header]
    for method, trial, norm, dist, ent in rows:
        lines.append(f"{method}\t{trial}\t{norm:.12g}\t{dist:.12g}\t{ent:.12g}")
    report = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report)
    else:
        sys.stdout.write(report)
    # wall times go to stdout only so the TSV stays byte-deterministic
    for method in methods:
        print(f"# {method}: {timings[method]:.1f} ms total", file=sys.stdout)
    return EXIT_OK


def cmd_inspect(args) -> int:
    _, header = read_npy(args.input)
    print(f"dtype={header.dtype} fortran_order={header.fortran_order} "
          f"shape={header.shape}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poolkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_pool = sub.add_parser("pool", help="pool a feature file")
    p_pool.add_argument("--input", required=True)
    p_pool.add_argument("--method", choices=METHOD_NAMES)
    p_pool.add_argument("--gamma", type=float)
    p_pool.add_argument("--k", type=int)
    p_pool.add_argument("--iters", type=int)
    p_pool.add_argument("--heads", type=int)
    p_pool.add_argument("--epsilon", type=float)
    p_pool.add_argument("--r", type=float)
    p_pool.add_argument("--seed", type=int)
    p_pool.add_argument("--width", type=int)
    p_pool.add_argument("--height", type=int)
    p_pool.add_argument("--config")
    p_pool.add_argument("--out")
    p_pool.add_argument("--attn-out")
    p_pool.set_defaults(fn=cmd_pool)

    p_attn = sub.add_parser("attnmap", help="threshold an attention map")
    p_attn.add_argument("--attn", required=True)
    p_attn.add_argument("--width", type=int, required=True)
    p_attn.add_argument("--height", type=int, required=True)
    p_attn.add_argument("--mass", type=float, default=0.6)
    p_attn.add_argument("--pgm")
    p_attn.add_argument("--mask-pgm")
    p_attn.add_argument("--bbox", action="store_true")
    p_attn.set_defaults(fn=cmd_attnmap)

    p_grad = sub.add_parser("gradcheck", help="verify analytic gradients")
    p_grad.add_argument("--method", default="simpool")
    p_grad.add_argument("--d", type=int, default=8)
    p_grad.add_argument("--p", type=int, default=12)
    p_grad.add_argument("--gamma", type=float, default=2.0)
    p_grad.add_argument("--h", type=float, default=1e-4)
    p_grad.add_argument("--tol", type=float, default=1e-5)
    p_grad.add_argument("--trials", type=int, default=3)
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.set_defaults(fn=cmd_gradcheck)

    p_tour = sub.add_parser("tournament", help="run every method on synthetic features")
    p_tour.add_argument("--d", type=int, default=16)
    p_tour.add_argument("--p", type=int, default=64)
    p_tour.add_argument("--k-clusters", type=int, default=4)
    p_tour.add_argument("--trials", type=int, default=1)
    p_tour.add_argument("--seed", type=int, default=0)
    p_tour.add_argument("--methods")
    p_tour.add_argument("--out")
    p_tour.set_defaults(fn=cmd_tournament)

    p_ins = sub.add_parser("inspect", help="print an NPY header")
    p_ins.add_argument("--input", required=True)
    p_ins.set_defaults(fn=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ContractError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericError, PoolkitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
