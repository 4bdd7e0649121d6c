"""Command-line entry point: ``weighted-willmore <command> --scene ...``.

Exit codes: 0 when every verdict is ``holds``/``equality``, 1 when something
is violated, 2 for unmet hypotheses or configuration errors.
"""
import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .comparison import (comparison_residual, curve_to_csv, cut_clip, default_ray_samples,
                         flow_rays, lemma_bound, shrinker_K_series, theta_series)
from .errors import ConfigurationError, HypothesisViolation, WillmoreError
from .functionals import THEOREMS, verify
from .hypersurface import Sphere
from .reilly import hk_chain_check, reilly_residual, solve_radial_poisson
from .scene import build_setup, load_scene, scene_from_dict, shipped_scenes
from .volume import TubeIntegrator, mc_cross_check, ratio_series

EXIT_OK, EXIT_VIOLATED, EXIT_UNMET = 0, 1, 2


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dump_report(report, out=None):
    text = json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv_dir(args):
    if not args.csv_dir:
        return None
    d = Path(args.csv_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


# ---------------------------------------------------------------------------
# commands


def cmd_verify(args, scene, setup):
    ids = scene.theorems if args.theorem == "all" else [args.theorem]
    if not ids:
        raise ConfigurationError("scene lists no theorems; name one explicitly")
    if args.theorem != "all":
        scene_from_dict({**scene.resolved(), "theorems": ids})   # cross-field rules for this id
    reports = []
    code = EXIT_OK
    csv_dir = _csv_dir(args)
    for th in ids:
        rep = verify(setup, th)
        reports.append(rep.as_dict())
        if rep.verdict == "violated":
            code = max(code, EXIT_VIOLATED)
        elif rep.verdict == "hypotheses-unmet":
            code = EXIT_UNMET
            sys.stderr.write(f"{th}: hypotheses unmet: {rep.failed_check}: "
                             f"{rep.diagnostics.get('failed_detail', '')}\n")
        if csv_dir and rep.volume_series:
            with open(csv_dir / f"{scene.name}-{th}-volume.csv", "w") as fh:
                fh.write("R,tube_volume,normalizer,ratio\n")
                for s in rep.volume_series["samples"]:
                    fh.write(f"{s['R']!r},{s['volume']!r},{s['normalizer']!r},{s['ratio']!r}\n")
    if csv_dir:
        setup.grid.to_csv(csv_dir / f"{scene.name}-boundary.csv")
    return {"command": "verify", "reports": reports}, code


def cmd_tube_volume(args, scene, setup):
    radii = args.radius if args.radius else list(setup.schedule)
    integ = TubeIntegrator(setup.grid, r_max=max(max(radii), 1.0))
    rows = [{"R": float(r), "volume": integ.volume(r)} for r in radii]
    out = {"command": "tube-volume", "enclosed_volume": integ.enclosed, "samples": rows}
    code = EXIT_OK
    if setup.mc_samples and setup.ambient.model == "flat":
        checks = []
        for row in rows:
            mc = mc_cross_check(setup.grid, row["R"], setup.mc_samples, setup.seed, args.threads)
            z = (row["volume"] - mc["estimate"]) / mc["stderr"] if mc["stderr"] > 0 else 0.0
            mc.update({"R": row["R"], "z_score": z, "within_4_sigma": abs(z) <= 4.0})
            if abs(z) > 4.0:
                code = EXIT_VIOLATED
            checks.append(mc)
        out["monte_carlo"] = checks
    kind = args.kind
    series = ratio_series(kind, setup.schedule, grid=setup.grid, center=setup.avr_center,
                          a=setup.a, k=setup.k, m=setup.m, threads=args.threads)
    out["ratio_series"] = series.as_dict()
    csv_dir = _csv_dir(args)
    if csv_dir:
        series.to_csv(csv_dir / f"{scene.name}-{kind}.csv")
    return out, code


def cmd_comparison(args, scene, setup):
    grid = setup.grid
    r = default_ray_samples(setup.ray_max)
    nodes = np.arange(0, len(grid), max(1, args.stride))
    curves = flow_rays(grid, r, nodes, rtol=setup.extra.get("ode_rtol", 1e-10))
    if grid.hypersurface.kind == "radial_graph" and not grid.hypersurface.shape.is_convex():
        curves = [cut_clip(grid, c) for c in curves]
    variants = {"a": {"a": setup.a}, "b": {"k": setup.k}}
    if setup.m is not None:
        variants["m"] = {"m": setup.m}
    summary = {}
    code = EXIT_OK
    for name, kw in variants.items():
        entry = {"params": kw, "nodes": len(curves)}
        try:
            hyp_ok = True
            worst_bound = -math.inf
            worst_theta = -math.inf
            verdicts = {}
            for c in curves:
                ts = theta_series(c, name, **kw)
                verdicts[ts.verdict] = verdicts.get(ts.verdict, 0) + 1
                if ts.verdict == "hypotheses unmet":
                    hyp_ok = False
                    continue
                res, _ = comparison_residual(c, name, **kw)
                worst_bound = max(worst_bound, res)
                worst_theta = max(worst_theta, ts.max_forward_difference)
            entry.update({"theta_verdicts": verdicts, "max_bound_residual": worst_bound,
                          "max_theta_forward_difference": worst_theta,
                          "hypotheses_hold_everywhere": hyp_ok})
            if worst_bound > 1e-8 or verdicts.get("not monotone", 0):
                code = EXIT_VIOLATED
        except HypothesisViolation as err:
            entry.update({"hypotheses_hold_everywhere": False, "failed_check": err.check,
                          "detail": str(err)})
        summary[name] = entry
    shrinker = {}
    try:
        series = [shrinker_K_series(c) for c in curves]
        shrinker = {"c_min": min(s.c for s in series), "c_max": max(s.c for s in series),
                    "K_max": max(float(np.max(s.K)) for s in series),
                    "K_max_forward_difference": max(s.K_max_forward_difference for s in series),
                    "volume_estimate_slack_min": min(float(np.min(s.volume_estimate_slack)) for s in series),
                    "volume_estimate_slack_max": max(float(np.max(s.volume_estimate_slack)) for s in series)}
        if shrinker["c_min"] < -1e-12 or shrinker["K_max"] > 1e-10:
            code = EXIT_VIOLATED
    except HypothesisViolation as err:
        shrinker = {"skipped": True, "failed_check": err.check, "detail": str(err)}
    csv_dir = _csv_dir(args)
    if csv_dir:
        for c in curves[: args.max_curves]:
            bound = theta = None
            try:
                bound = lemma_bound("a", c.n, c.H_f, c.r[c.valid], a=setup.a)
                theta = theta_series(c, "a", a=setup.a).theta
            except WillmoreError:
                pass
            K = None
            try:
                K = shrinker_K_series(c).K
            except WillmoreError:
                pass
            curve_to_csv(csv_dir / f"{scene.name}-node{c.node}.csv", c, bound, theta, K)
    out = {"command": "comparison", "normalization": curves[0].normalization,
           "ode_rel_dev": curves[0].ode_rel_dev,
           "focal_rays": int(sum(np.isfinite(c.focal_time) for c in curves)),
           "cut_rays": int(sum(np.isfinite(c.cut_time) for c in curves)),
           "variants": summary, "shrinker": shrinker}
    return out, code


def cmd_reilly(args, scene, setup):
    hyp = setup.hypersurface
    if hyp.kind == "radial_graph":
        shape = hyp.shape
        if not isinstance(shape, Sphere) or np.any(shape.center != 0):
            raise ConfigurationError("reilly needs a sphere centered at the origin")
        rho = shape.radius
    else:
        rho = hyp.radius
    sol = solve_radial_poisson(setup.ambient, rho)
    rr = reilly_residual(sol)
    mode = "m" if setup.m is not None else "f"
    chain = hk_chain_check(sol, m=setup.m, mode=mode)
    code = EXIT_OK if (rr["relative_residual"] < 1e-6 and chain["all_hold"]) else EXIT_VIOLATED
    out = {"command": "reilly", "rho": rho, "self_residual": sol.residual(),
           "solution": {"r": sol.r[::10], "u": sol.u[::10], "du": sol.du[::10]},
           "reilly": rr, "chain": chain}
    csv_dir = _csv_dir(args)
    if csv_dir:
        with open(csv_dir / f"{scene.name}-radial-solution.csv", "w") as fh:
            fh.write("r,u,du\n")
            for a, b, c in zip(sol.r, sol.u, sol.du):
                fh.write(f"{a!r},{b!r},{c!r}\n")
    return out, code


COMMANDS = {"verify": cmd_verify, "tube-volume": cmd_tube_volume,
            "comparison": cmd_comparison, "reilly": cmd_reilly}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scene", help="scene JSON path or shipped scene name")
    common.add_argument("--out", help="write the JSON report here (default stdout)")
    common.add_argument("--csv-dir", help="directory for CSV series")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--tolerance", type=float, help="override the equality tolerance")
    common.add_argument("--seed", type=int, help="override the Monte-Carlo seed")

    p = argparse.ArgumentParser(prog="weighted-willmore",
                                description="Willmore-type inequalities on weighted manifolds")
    sub = p.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", parents=[common], help="verify a theorem on a scene")
    v.add_argument("theorem", choices=list(THEOREMS) + ["all"])
    t = sub.add_parser("tube-volume", parents=[common], help="tube volumes and ratio series")
    t.add_argument("--radius", type=float, nargs="*")
    t.add_argument("--kind", default="RV_f", choices=["RV_f", "RVbar_f", "AVR_f_m", "AVR"])
    c = sub.add_parser("comparison", parents=[common], help="ray comparison quantities")
    c.add_argument("--stride", type=int, default=1, help="use every stride-th boundary node")
    c.add_argument("--max-curves", type=int, default=8, help="curves written with --csv-dir")
    sub.add_parser("reilly", parents=[common], help="Reilly identity and Heintze-Karcher chain")
    s = sub.add_parser("scene", help="scene catalog utilities")
    ssub = s.add_subparsers(dest="scene_command", required=True)
    ssub.add_parser("list", help="list shipped scenes")
    sv = ssub.add_parser("validate", help="validate a scene file")
    sv.add_argument("path")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "scene":
            if args.scene_command == "list":
                for name in shipped_scenes():
                    print(name)
                return EXIT_OK
            scene = load_scene(args.path)
            dump_report({"valid": True, "scene": scene.resolved()})
            return EXIT_OK
        if not args.scene:
            raise ConfigurationError("--scene is required")
        scene = load_scene(args.scene)
        setup = build_setup(scene, threads=args.threads, seed=args.seed, eq_tol=args.tolerance)
        body, code = COMMANDS[args.command](args, scene, setup)
    except ConfigurationError as err:
        sys.stderr.write(f"configuration error: {err}\n")
        return EXIT_UNMET
    except HypothesisViolation as err:
        sys.stderr.write(f"hypotheses unmet: {err.check}: {err}\n")
        return EXIT_UNMET
    except WillmoreError as err:
        sys.stderr.write(f"error: {err}\n")
        return EXIT_UNMET
    body["scene"] = scene.resolved()
    dump_report(body, args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
