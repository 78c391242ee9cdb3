"""Command line interface: ``lagshadow <command> ...``.

Exit codes: 0 success, 1 numerical/runtime failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from .analysis import (GridSpec, HamiltonianField, contour_grid, divergence_time, energy_trace,
                       nu_metric, pendulum_grid)
from .bea import motion_lagrangian
from .datagen import (GroundTruthSpec, SamplerSpec, generate_dataset, load_dataset,
                      save_dataset)
from .discretize import (NonConvergence, PredictedTrajectory, SingularJacobian, integrate,
                         read_trajectory_csv, recover_velocity, write_trajectory_csv)
from .domain import BenchmarkSystem
from .learn import (FlowMapGP, IllConditioned, KernelModel, TrainConfig, load_model,
                    save_flow_model, save_model, train_gpflow, train_lgp, train_lsi)

logger = logging.getLogger("lagshadow")

PRESETS = {
    "pendulum": {
        "system": "pendulum", "alpha": 0.8, "n_traj": 400, "traj_len": 6, "h": 0.5,
        "domain": [-math.pi, math.pi, -1.2, 1.2], "epsilon": 5.0, "ck": 1.0,
        "q0": [0.3], "qdot0": [0.0], "steps": 2000, "grid_resolution": 30,
    },
    "henon-heiles": {
        "system": "henon-heiles", "alpha": 0.8, "n_traj": 200, "traj_len": 5, "h": 0.1,
        "domain": [-0.8, 0.8] * 4, "epsilon": 10.0, "ck": 1.0,
        "q0": [0.675499, 0.08], "qdot0": [0.0, 0.0], "horizon": 30000.0, "bound": 2.0,
        "grid_resolution": 61,
    },
}

# published values, reported next to ours in the reproduce summaries
PUBLISHED = {
    "pendulum": {"nu_lsi_bea": 0.01, "nu_lgp_bea": 0.05, "nu_lgp_exact_bea": 0.1,
                 "nu_lgp": 0.03, "nu_lgp_exact": 3.4e-5,
                 "band_H0_lsi": 1e-4, "band_H2_lsi": 1e-6},
    "henon-heiles": {"t_div_gpflow": 1.4574e3, "t_div_lgp": 7.069e3, "t_div_lsi": 1.774e4},
}


class UsageError(Exception):
    """Bad flags, config values or inputs (exit code 2)."""


def fmt(x):
    if x is None:
        return "none"
    return format(float(x), ".17g")


def _floats(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _axis(text):
    parts = str(text).split(":")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("axis must look like INDEX:LOWER:UPPER:RESOLUTION")
    return int(parts[0]), (float(parts[1]), float(parts[2]), int(parts[3]))


def _fix(text):
    parts = str(text).split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("fixed coordinate must look like INDEX:VALUE")
    return int(parts[0]), float(parts[1])


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


# -- building blocks -------------------------------------------------------------

def _system(name, alpha):
    try:
        return BenchmarkSystem(name, alpha)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _dataset(system, n_traj, traj_len, h, h_fine, domain, skip=0):
    n = system.n
    if domain is None:
        domain = PRESETS[system.kind]["domain"]
    if len(domain) != 4 * n:
        raise UsageError(f"--domain needs {4 * n} numbers for {system.kind}, got {len(domain)}")
    bounds = tuple(zip(domain[0::2], domain[1::2]))
    try:
        sampler = SamplerSpec(bounds, n_traj, skip)
        gt = GroundTruthSpec(h, traj_len, h_fine)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return generate_dataset(system, sampler, gt)


def _train(dataset, method, scheme, epsilon, ck, c, rcond, system=None):
    if method == "gpflow":
        try:
            return train_gpflow(dataset)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    try:
        cfg = TrainConfig(epsilon=epsilon, c_k=ck, scheme=scheme, c=c, rcond=rcond)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if method == "lsi":
        return train_lsi(dataset, cfg)
    if method == "lgp-exact" and system is None:
        raise UsageError("lgp-exact needs --system to supply exact accelerations")
    mode = "exact" if method == "lgp-exact" else "finite-difference"
    try:
        return train_lgp(dataset, cfg, mode, system)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _save_any(model, path):
    if isinstance(model, FlowMapGP):
        save_flow_model(model, path)
    else:
        save_model(model, path)


def _field_for(spec, order, alpha=0.8):
    """``ref:SYSTEM`` or a model path, as a Lagrangian field."""
    if spec.startswith("ref:"):
        return _system(spec[4:], alpha).lagrangian()
    model = _load(spec)
    if not isinstance(model, KernelModel):
        raise UsageError("flow-map models have no Lagrangian")
    return motion_lagrangian(model, order) if order else model


def _load(path):
    if not os.path.exists(path):
        raise UsageError(f"no such file: {path}")
    try:
        return load_model(path)
    except (KeyError, ValueError) as exc:
        raise UsageError(f"cannot read model {path}: {exc}") from exc


def _predict(model, q0, qdot0, steps, order, with_velocities, stop=None):
    n = model.n
    if len(q0) != n or len(qdot0) != n:
        raise UsageError(f"model has dimension {n}; give {n} values to --q0 and --qdot0")
    if isinstance(model, FlowMapGP):
        stop_x = None if stop is None else (lambda x: stop(x[:n]))
        X = model.rollout(np.r_[q0, qdot0], steps, stop=stop_x)
        return PredictedTrajectory(model.h or 1.0, X[:, :n], np.full((len(X), n), np.nan),
                                   X[:, n:])
    L_cont = motion_lagrangian(model, order) if order else model
    return integrate(model, q0, qdot0, model.h, steps, model.scheme, L_cont=L_cont,
                     with_velocities=with_velocities, stop=stop)


def _grid(axes, fixed, n, resolution=30):
    if not axes:
        if n != 1:
            raise UsageError("give --axis for grids in more than one dimension")
        return pendulum_grid(resolution)
    try:
        return GridSpec(2 * n, dict(axes), dict(fixed or []))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _energy_of(field, traj, use_csv_velocities):
    """``H`` of ``field`` along ``traj``; velocities recovered from momenta unless told not to."""
    if traj.velocities is None:
        raise UsageError("energy traces need a trajectory with velocities")
    if use_csv_velocities or not np.all(np.isfinite(traj.momenta)):
        vel = traj.velocities
    else:
        vel = [recover_velocity(field, q, p, guess=v)
               for q, p, v in zip(traj.positions, traj.momenta, traj.velocities)]
    return energy_trace(HamiltonianField(field), traj.positions, vel, traj.h)


# -- commands --------------------------------------------------------------------

def cmd_gen_data(args):
    system = _system(args.system, args.alpha)
    ds = _dataset(system, args.n_traj, args.traj_len, args.h, args.h_fine, args.domain, args.skip)
    save_dataset(ds, args.out)
    print(f"trajectories {len(ds.trajectories)}")
    print(f"triples {ds.n_triples}")
    return 0


# interior velocities for gpflow, nested differences for lgp
_MIN_SNAPSHOTS = {"lsi": 3, "lgp": 5, "lgp-exact": 2, "gpflow": 4}


def cmd_train(args):
    if not os.path.exists(args.data):
        raise UsageError(f"no such file: {args.data}")
    ds = load_dataset(args.data)
    system = _system(args.system, args.alpha) if args.system else None
    if system is not None and system.n != ds.n:
        raise UsageError(f"--system {args.system} has dimension {system.n}, data has {ds.n}")
    need = _MIN_SNAPSHOTS[args.method]
    if max(len(t) for t in ds.trajectories) < need:
        raise UsageError(f"{args.method} needs trajectories with at least {need} snapshots")
    model = _train(ds, args.method, args.scheme, args.epsilon, args.ck, args.c, args.rcond, system)
    _save_any(model, args.out)
    if isinstance(model, FlowMapGP):
        print("epsilon " + " ".join(fmt(e) for e in model.epsilon_))
    else:
        print(f"centers {model.centers.shape[0]}")
        print(f"rank {model.diagnostics['rank']}")
        print(f"residual {fmt(model.diagnostics['residual'])}")
    return 0


def cmd_predict(args):
    model = _load(args.model)
    tr = _predict(model, args.q0, args.qdot0, args.steps, args.bea_order, args.with_velocities)
    write_trajectory_csv(args.out, tr, with_velocities=args.with_velocities)
    if tr.failure is not None:
        print(f"error: integration failed after step {len(tr) - 1}: {tr.failure}",
              file=sys.stderr)
        return 1
    print(f"snapshots {len(tr)}")
    return 0


def cmd_energy(args):
    if not os.path.exists(args.traj):
        raise UsageError(f"no such file: {args.traj}")
    traj = read_trajectory_csv(args.traj)
    field = _field_for(args.field, args.bea_order, args.alpha)
    if field.n != traj.positions.shape[1]:
        raise UsageError("field and trajectory dimensions differ")
    use_csv = args.field.startswith("ref:") or args.csv_velocities
    tr = _energy_of(field, traj, use_csv)
    if args.out:
        tr.to_csv(args.out)
    print(f"band {fmt(tr.band)}")
    print(f"slope {fmt(tr.slope)}")
    print(f"drift {'yes' if tr.has_drift else 'no'}")
    return 0


def cmd_nu(args):
    fa = _field_for(args.a, args.bea_order_a, args.alpha)
    fb = _field_for(args.b, args.bea_order_b, args.alpha)
    if fa.n != fb.n:
        raise UsageError(f"fields have dimensions {fa.n} and {fb.n}")
    grid = _grid(args.axis, args.fix, fa.n, args.resolution)
    if grid.dim != 2 * fa.n:
        raise UsageError(f"grid has dimension {grid.dim}, fields live in {2 * fa.n}")
    res = nu_metric(HamiltonianField(fa), HamiltonianField(fb), grid)
    print(f"nu {fmt(res.nu)}")
    print(f"used {res.used} skipped {res.skipped}")
    return 0


def cmd_contour(args):
    field = _field_for(args.field, args.bea_order, args.alpha)
    grid = _grid(args.axis, args.fix, field.n, args.resolution)
    if grid.dim != 2 * field.n:
        raise UsageError(f"grid has dimension {grid.dim}, field lives in {2 * field.n}")
    try:
        cg = contour_grid(HamiltonianField(field), grid)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    cg.to_csv(args.out)
    print(f"nodes {cg.values.size}")
    return 0


def cmd_divergence(args):
    if not os.path.exists(args.traj):
        raise UsageError(f"no such file: {args.traj}")
    traj = read_trajectory_csv(args.traj)
    if not args.bound > 0:
        raise UsageError("--bound must be positive")
    print(fmt(divergence_time(traj.positions, args.bound, traj.h)))
    return 0


# -- reproduce ----------------------------------------------------------------------

def _nu(field, ref, grid):
    return nu_metric(HamiltonianField(field), HamiltonianField(ref), grid).nu


def reproduce_pendulum(out, p):
    out.mkdir(parents=True, exist_ok=True)
    system = _system("pendulum", p["alpha"])
    ds = _dataset(system, p["n_traj"], p["traj_len"], p["h"], p.get("h_fine"), p["domain"])
    save_dataset(ds, out / "dataset.json")
    models = {}
    for method in ("lsi", "lgp", "lgp-exact"):
        logger.info("training %s", method)
        models[method] = _train(ds, method, "midpoint", p["epsilon"], p["ck"], 1.0,
                                p.get("rcond"), system)
        save_model(models[method], out / f"model_{method.replace('-', '_')}.json")

    ref = system.lagrangian()
    grid = pendulum_grid(p["grid_resolution"])
    metrics = {
        "nu_lsi_bea": _nu(motion_lagrangian(models["lsi"]), ref, grid),
        "nu_lgp_bea": _nu(motion_lagrangian(models["lgp"]), ref, grid),
        "nu_lgp_exact_bea": _nu(motion_lagrangian(models["lgp-exact"]), ref, grid),
        "nu_lgp": _nu(models["lgp"], ref, grid),
        "nu_lgp_exact": _nu(models["lgp-exact"], ref, grid),
    }

    logger.info("integrating %d steps", p["steps"])
    runs = {"lsi": 2, "lgp": 0}
    trajs = {}
    for method, order in runs.items():
        tr = _predict(models[method], p["q0"], p["qdot0"], p["steps"], order, True)
        if tr.failure is not None:
            raise RuntimeError(f"{method} prediction failed after {len(tr) - 1} steps: "
                               f"{tr.failure}")
        trajs[method] = tr
        write_trajectory_csv(out / f"trajectory_{method}.csv", tr)
        et = energy_trace(HamiltonianField(ref), tr.positions, tr.velocities, tr.h)
        et.to_csv(out / f"energy_ref_{method}.csv")
        metrics[f"band_ref_{method}"] = et.band
        metrics[f"drift_ref_{method}"] = bool(et.has_drift)
    for k in (0, 2):
        field = motion_lagrangian(models["lsi"], k) if k else models["lsi"]
        et = _energy_of(field, trajs["lsi"], False)
        et.to_csv(out / f"energy_H{k}_lsi.csv")
        metrics[f"band_H{k}_lsi"] = et.band
        metrics[f"drift_H{k}_lsi"] = bool(et.has_drift)

    wide = GridSpec(2, {0: (-math.pi, math.pi, 61), 1: (-1.2, 1.2, 49)})
    contour_grid(HamiltonianField(motion_lagrangian(models["lsi"])), wide).to_csv(
        out / "contour_H2_lsi.csv")
    _summary(out, "pendulum", p, metrics, models)
    return metrics


def reproduce_henon_heiles(out, p):
    out.mkdir(parents=True, exist_ok=True)
    system = _system("henon-heiles", p["alpha"])
    ds = _dataset(system, p["n_traj"], p["traj_len"], p["h"], p.get("h_fine"), p["domain"])
    save_dataset(ds, out / "dataset.json")
    models = {}
    for method in ("lsi", "lgp", "lgp-exact", "gpflow"):
        logger.info("training %s", method)
        models[method] = _train(ds, method, "midpoint", p["epsilon"], p["ck"], 1.0,
                                p.get("rcond"), system)
        _save_any(models[method], out / f"model_{method.replace('-', '_')}.json")
    models["gpflow"].h = ds.h

    steps = int(round(p["horizon"] / p["h"]))
    bound = p["bound"]

    def stop(q):
        return not np.linalg.norm(q) <= bound

    metrics = {}
    for method in ("gpflow", "lgp", "lgp-exact", "lsi"):
        logger.info("integrating %s for up to %d steps", method, steps)
        tr = _predict(models[method], p["q0"], p["qdot0"], steps, 0, False, stop=stop)
        write_trajectory_csv(out / f"trajectory_{method.replace('-', '_')}.csv", tr,
                             with_velocities=False)
        t = divergence_time(tr.positions, bound, tr.h)
        if t is None and tr.failure is not None:
            t = (len(tr) - 1) * tr.h
        metrics[f"t_div_{method.replace('-', '_')}"] = t

    sec = GridSpec(4, {0: (-1.0, 1.0, p["grid_resolution"]), 1: (-1.0, 1.0, p["grid_resolution"])},
                   {2: 0.0, 3: 0.0})
    contour_grid(HamiltonianField(motion_lagrangian(models["lsi"])), sec).to_csv(
        out / "contour_V2_lsi.csv")
    contour_grid(HamiltonianField(system.lagrangian()), sec).to_csv(out / "contour_V_ref.csv")
    _summary(out, "henon-heiles", p, metrics, models)
    return metrics


def _summary(out, name, params, metrics, models):
    diag = {k: {"rank": m.diagnostics["rank"], "residual": m.diagnostics["residual"]}
            for k, m in models.items() if isinstance(m, KernelModel)}
    _write_json(out / "summary.json", {"experiment": name, "parameters": params,
                                       "metrics": metrics, "published": PUBLISHED[name],
                                       "training": diag})
    lines = [f"{'metric':<20} {'ours':>24} {'published':>12}"]
    for k, v in metrics.items():
        pub = PUBLISHED[name].get(k)
        shown = ("yes" if v else "no") if isinstance(v, bool) else fmt(v)
        lines.append(f"{k:<20} {shown:>24} {'' if pub is None else fmt(pub):>12}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))


def cmd_reproduce(args):
    p = dict(PRESETS[args.name])
    for key in ("n_traj", "traj_len", "h", "h_fine", "epsilon", "ck", "rcond", "steps",
                "horizon", "bound", "grid_resolution"):
        val = getattr(args, key, None)
        if val is not None:
            p[key] = val
    out = Path(args.out)
    runner = reproduce_pendulum if args.name == "pendulum" else reproduce_henon_heiles
    runner(out, p)
    return 0


# -- parser ----------------------------------------------------------------------

def build_parser():
    leaves = {}
    parser = argparse.ArgumentParser(prog="lagshadow", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file of option values; flags override it")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a position-only training set")
    g.add_argument("--system", choices=BenchmarkSystem.KINDS, default="pendulum")
    g.add_argument("--alpha", type=float, default=0.8)
    g.add_argument("--n-traj", type=int, default=400)
    g.add_argument("--traj-len", type=int, default=6)
    g.add_argument("--h", type=float, default=0.5)
    g.add_argument("--h-fine", type=float, default=None, help="default h/500")
    g.add_argument("--domain", type=_floats, default=None, help="lo1,hi1,lo2,hi2,...")
    g.add_argument("--skip", type=int, default=0, help="Halton points to skip")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_data)
    leaves[("gen-data",)] = g

    t = sub.add_parser("train", help="train a model on a dataset")
    t.add_argument("--method", choices=("lsi", "lgp", "lgp-exact", "gpflow"), default="lsi")
    t.add_argument("--scheme", choices=("midpoint", "trapezoidal"), default="midpoint")
    t.add_argument("--epsilon", type=float, default=1.0)
    t.add_argument("--ck", type=float, default=1.0)
    t.add_argument("--c", type=float, default=1.0)
    t.add_argument("--rcond", type=float, default=None)
    t.add_argument("--system", choices=BenchmarkSystem.KINDS, default=None)
    t.add_argument("--alpha", type=float, default=0.8)
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)
    leaves[("train",)] = t

    pr = sub.add_parser("predict", help="integrate a trained model")
    pr.add_argument("--model", required=True)
    pr.add_argument("--q0", type=_floats, required=True)
    pr.add_argument("--qdot0", type=_floats, required=True)
    pr.add_argument("--steps", type=int, required=True)
    pr.add_argument("--with-velocities", action="store_true")
    pr.add_argument("--bea-order", type=int, choices=(0, 2), default=2)
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=cmd_predict)
    leaves[("predict",)] = pr

    an = sub.add_parser("analyze", help="energy, nu, contour and divergence analyses")
    asub = an.add_subparsers(dest="analysis", required=True)
    field_help = "model path or ref:pendulum / ref:henon-heiles"

    e = asub.add_parser("energy")
    e.add_argument("--traj", required=True)
    e.add_argument("--field", required=True, help=field_help)
    e.add_argument("--bea-order", type=int, choices=(0, 2), default=0)
    e.add_argument("--alpha", type=float, default=0.8)
    e.add_argument("--csv-velocities", action="store_true",
                   help="use the stored velocities instead of recovering them from momenta")
    e.add_argument("--out")
    e.set_defaults(func=cmd_energy)
    leaves[("analyze", "energy")] = e

    nu = asub.add_parser("nu")
    nu.add_argument("--a", required=True, help=field_help)
    nu.add_argument("--b", required=True, help=field_help)
    nu.add_argument("--bea-order-a", type=int, choices=(0, 2), default=0)
    nu.add_argument("--bea-order-b", type=int, choices=(0, 2), default=0)
    nu.add_argument("--alpha", type=float, default=0.8)
    nu.add_argument("--axis", type=_axis, action="append", help="INDEX:LOWER:UPPER:RES")
    nu.add_argument("--fix", type=_fix, action="append", help="INDEX:VALUE")
    nu.add_argument("--resolution", type=int, default=30)
    nu.set_defaults(func=cmd_nu)
    leaves[("analyze", "nu")] = nu

    c = asub.add_parser("contour")
    c.add_argument("--field", required=True, help=field_help)
    c.add_argument("--bea-order", type=int, choices=(0, 2), default=0)
    c.add_argument("--alpha", type=float, default=0.8)
    c.add_argument("--axis", type=_axis, action="append")
    c.add_argument("--fix", type=_fix, action="append")
    c.add_argument("--resolution", type=int, default=30)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_contour)
    leaves[("analyze", "contour")] = c

    d = asub.add_parser("divergence")
    d.add_argument("--traj", required=True)
    d.add_argument("--bound", type=float, default=2.0)
    d.set_defaults(func=cmd_divergence)
    leaves[("analyze", "divergence")] = d

    r = sub.add_parser("reproduce", help="run a full published experiment")
    r.add_argument("name", choices=tuple(PRESETS))
    r.add_argument("--out", required=True)
    for flag, typ in (("--n-traj", int), ("--traj-len", int), ("--h", float),
                      ("--h-fine", float), ("--epsilon", float), ("--ck", float),
                      ("--rcond", float), ("--steps", int), ("--horizon", float),
                      ("--bound", float), ("--grid-resolution", int)):
        r.add_argument(flag, type=typ, default=None)
    r.set_defaults(func=cmd_reproduce)
    leaves[("reproduce",)] = r
    return parser, leaves


def _apply_config(parser, leaves, argv):
    """Load ``--config`` values as defaults of the selected subcommand."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        with open(known.config) as fh:
            cfg = json.load(fh)
    except (OSError, ValueError) as exc:
        parser.error(f"cannot read config {known.config}: {exc}")
    if not isinstance(cfg, dict):
        parser.error("config must be a JSON object")
    top = {key[0] for key in leaves}
    idx = next((i for i, a in enumerate(argv) if a in top), None)
    if idx is None:
        return
    key = (argv[idx],)
    if key not in leaves and idx + 1 < len(argv):
        key = (argv[idx], argv[idx + 1])
    if key not in leaves:
        return
    leaf = (key, leaves[key])
    p = leaf[1]
    dests = {a.dest: a for a in p._actions}
    values = {}
    for k, v in cfg.items():
        dest = k.replace("-", "_")
        if dest not in dests or dest in ("help", "func"):
            parser.error(f"unknown config key {k!r} for {' '.join(leaf[0])}")
        action = dests[dest]
        if action.type is not None and not isinstance(v, list):
            v = action.type(str(v))
        elif action.type is not None:
            v = action.type(",".join(map(str, v))) if action.type is _floats else v
        values[dest] = v
        action.required = False
    p.set_defaults(**values)


def _thread_limit():
    raw = os.environ.get("LSI_THREADS", "0")
    try:
        n = int(raw)
    except ValueError as exc:
        raise UsageError(f"LSI_THREADS must be an integer, got {raw!r}") from exc
    if n < 0:
        raise UsageError("LSI_THREADS must be >= 0")
    if n == 0:
        return nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, leaves = build_parser()
    _apply_config(parser, leaves, argv)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with _thread_limit():
            return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NonConvergence, SingularJacobian, IllConditioned, np.linalg.LinAlgError,
            RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
