"""Command-line interface: ``lorentz <group> <command> [flags]``.

Groups mirror the library modules (billiard, cf, kernel, mc, solve) plus
the ``verify`` meta-runner that executes the acceptance suite.  Exit
status: 0 success, 1 check failure, 2 usage error.

Numeric tables are CSV, configs and reports JSON; every output file
starts with a metadata header (version, config hash, seed).
"""

import argparse
import csv
import gzip
import hashlib
import io
import json
import math
import os
import sys

__all__ = ["main"]


def _set_threads(n: int) -> None:
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ[var] = str(n)


def _header(args_dict, seed=None) -> str:
    from . import __version__
    blob = json.dumps(args_dict, sort_keys=True, default=str).encode()
    h = hashlib.sha256(blob).hexdigest()[:16]
    line = f"# lorentzgas {__version__} config={h}"
    if seed is not None:
        line += f" seed={seed}"
    return line


def _open_out(path, args_dict, seed=None, compress=False):
    """Open an output stream (or stdout for '-') with a metadata header."""
    if path == "-":
        out = sys.stdout
        close = False
    elif compress:
        out = io.TextIOWrapper(gzip.open(path, "wb"))
        close = True
    else:
        out = open(path, "w")
        close = True
    out.write(_header(args_dict, seed) + "\n")
    return out, close


# ----------------------------------------------------------------- billiard

def _cmd_billiard_trace(args):
    import numpy as np
    from . import billiard
    state = billiard.ParticleState((args.x, args.y),
                                   billiard.Direction.from_angle(args.theta))
    try:
        events = billiard.collision_sequence(state, args.r, args.n)
    except billiard.NoCollisionError as exc:
        print(f"no collision: {exc}", file=sys.stderr)
        return 1
    out, close = _open_out(args.output, vars(args))
    w = csv.writer(out)
    w.writerow(["j", "t", "x1", "x2", "theta_out", "h"])
    t = 0.0
    for j, ev in enumerate(events):
        t += ev.time
        w.writerow([j, f"{t:.17g}", f"{ev.point[0]:.17g}", f"{ev.point[1]:.17g}",
                    f"{ev.outgoing.theta:.17g}", f"{ev.impact:.17g}"])
    if close:
        out.close()
    return 0


def _cmd_billiard_transfer(args):
    from . import billiard
    res = billiard.transfer_map(args.hprime,
                                billiard.Direction.from_angle(args.theta),
                                args.r)
    print(f"S={res.flight:.12g} h={res.impact:.12g}")
    return 0


# ----------------------------------------------------------------------- cf

def _cmd_cf_params(args):
    import math
    from . import arithmetic
    cfg = arithmetic.obstacle_params_cf(
        (math.cos(args.theta), math.sin(args.theta)), args.r)
    print(json.dumps({"A": cfg.A, "B": cfg.B, "Q": cfg.Q, "Qbar": cfg.Qbar,
                      "sigma": cfg.sigma, "D": cfg.D, "Qprime": cfg.Qprime},
                     indent=1))
    return 0


def _cmd_cf_expand(args):
    from . import arithmetic
    exp = arithmetic.cf_expand(args.alpha, eps=args.eps,
                               max_digits=args.max_digits)
    out, close = _open_out(args.output, vars(args))
    w = csv.writer(out)
    w.writerow(["k", "digit", "p", "q", "d"])
    for k in range(len(exp.p)):
        digit = exp.digits[k - 2] if k >= 2 else ""
        w.writerow([k - 1, digit, exp.p[k], exp.q[k], f"{exp.d[k]:.17g}"])
    if close:
        out.close()
    return 0


# ------------------------------------------------------------------- kernel

def _cmd_kernel_eval(args):
    from . import kernel
    P = kernel.p_simple(args.s, args.h, args.hprime)
    Pi = kernel.pi_kernel(args.h, args.hprime)
    print(f"P={float(P):.6f} Pi={float(Pi):.6f}")
    return 0


def _parse_grid(spec: str):
    lo, hi, n = spec.split(":")
    import numpy as np
    return np.linspace(float(lo), float(hi), int(n))


def _cmd_kernel_tabulate(args):
    import numpy as np
    from . import kernel
    s_vals = _parse_grid(args.s_grid)
    h_vals = _parse_grid(args.h_grid)
    out, close = _open_out(args.output, vars(args))
    w = csv.writer(out)
    if args.what == "P":
        w.writerow(["S", "h", "hprime", "P"])
        for s in s_vals:
            for h in h_vals:
                w.writerow([f"{s:.12g}", f"{h:.12g}", f"{args.hprime:.12g}",
                            f"{float(kernel.p_simple(s, h, args.hprime)):.12g}"])
    elif args.what == "Pi":
        w.writerow(["h", "hprime", "Pi"])
        for h in h_vals:
            w.writerow([f"{h:.12g}", f"{args.hprime:.12g}",
                        f"{float(kernel.pi_kernel(h, args.hprime)):.12g}"])
    else:  # E
        w.writerow(["s", "h", "E"])
        for h in h_vals:
            col = kernel._E_column(float(h), np.asarray(s_vals, dtype=float),
                                   max(float(s_vals[-1]), 200.0))
            for s, e in zip(s_vals, col):
                w.writerow([f"{s:.12g}", f"{h:.12g}", f"{e:.12g}"])
    if close:
        out.close()
    return 0


def _cmd_kernel_verify(args):
    from . import verify
    checks = [verify.check_kernel_normalization(quick=True),
              verify.check_formula_equivalence(quick=True),
              verify.check_symmetries(quick=True),
              verify.check_pi_consistency(quick=True),
              verify.check_equilibrium(quick=True)]
    ok = verify.print_report(checks)
    return 0 if ok else 1


# ----------------------------------------------------------------------- mc

def _cmd_mc_kernel_converge(args):
    import numpy as np
    from . import mc, kernel
    S_edges = np.linspace(0.0, 4.0, 5)
    h_edges = np.linspace(-1.0, 1.0, 5)
    omega = mc.generic_direction(args.seed)
    est = mc.cesaro_kernel_estimate(args.hprime, omega, args.eps,
                                    S_edges, h_edges,
                                    points_per_decade=args.ppd)
    exp = np.array([[kernel.p_bin_mass(S_edges[i], S_edges[i + 1],
                                       h_edges[k], h_edges[k + 1],
                                       args.hprime)
                     for k in range(4)] for i in range(4)])
    out, close = _open_out(args.output, vars(args), seed=args.seed)
    w = csv.writer(out)
    w.writerow(["S_lo", "S_hi", "h_lo", "h_hi", "observed", "expected"])
    for i in range(4):
        for k in range(4):
            w.writerow([S_edges[i], S_edges[i + 1], h_edges[k], h_edges[k + 1],
                        f"{est.weights[i, k]:.12g}", f"{exp[i, k]:.12g}"])
    if close:
        out.close()
    _sidecar(args, {"n_total": est.n_total, "n_excluded": est.n_excluded,
                    "tail_weight": est.tail_weight,
                    "r_min": est.r_min, "r_max": est.r_max})
    return 0


def _cmd_mc_config_dist(args):
    from . import mc
    omega = mc.generic_direction(args.seed)
    dist = mc.cesaro_config_distribution(omega, args.eps,
                                         points_per_decade=args.ppd)
    out, close = _open_out(args.output, vars(args), seed=args.seed)
    w = csv.writer(out)
    w.writerow(["A", "B", "Q", "sigma", "weight", "block"])
    for i in range(len(dist["A"])):
        w.writerow([f"{dist['A'][i]:.12g}", f"{dist['B'][i]:.12g}",
                    f"{dist['Q'][i]:.12g}", int(dist["sigma"][i]),
                    f"{dist['weights'][i]:.12g}", int(dist["block"][i])])
    if close:
        out.close()
    _sidecar(args, {"n_excluded": dist["n_excluded"],
                    "n_indep": dist["n_indep"],
                    "r_min": dist["r_min"], "r_max": dist["r_max"]})
    return 0


def _cmd_mc_markov(args):
    import numpy as np
    from . import mc
    s_edges = np.concatenate([np.linspace(0.0, 2.0, 9), [3.0, 5.0, 100.0]])
    h_edges = np.linspace(-1.0, 1.0, 9)
    n_steps = max(int(args.tend), 10)
    probs, n_eff = mc.markov_chain_histogram(args.n, n_steps, args.seed,
                                             s_edges, h_edges)
    out, close = _open_out(args.output, vars(args), seed=args.seed)
    w = csv.writer(out)
    w.writerow(["s_lo", "s_hi", "h_lo", "h_hi", "prob"])
    for i in range(len(s_edges) - 1):
        for k in range(len(h_edges) - 1):
            w.writerow([s_edges[i], s_edges[i + 1], h_edges[k], h_edges[k + 1],
                        f"{probs[i, k]:.12g}"])
    if close:
        out.close()
    _sidecar(args, {"n_eff": n_eff, "n_chains": args.n, "n_steps": n_steps})
    return 0


def _cmd_mc_billiard(args):
    import numpy as np
    from . import mc
    f_in = lambda x1, x2, th: np.ones_like(x1)
    snaps = mc.billiard_ensemble(f_in, args.r, args.n, args.tend,
                                 snapshots=[args.tend], seed=args.seed)
    snap = snaps[-1]
    out, close = _open_out(args.output, vars(args), seed=args.seed)
    w = csv.writer(out)
    w.writerow(["t", "x1", "x2", "theta"])
    for i in range(len(snap["x1"])):
        w.writerow([snap["t"], f"{snap['x1'][i]:.9g}", f"{snap['x2'][i]:.9g}",
                    f"{snap['theta'][i]:.9g}"])
    if close:
        out.close()
    _sidecar(args, {"n_tangent_dropped": snap["n_dropped"]})
    return 0


def _cmd_mc_hypothesis_h(args):
    from . import mc
    omega = mc.generic_direction(args.seed)
    res = mc.hypothesis_h_correlation(omega, args.r,
                                      n_collisions=args.n, seed=args.seed)
    print(json.dumps(res, indent=1, default=float))
    return 0


def _sidecar(args, extra):
    if args.output == "-":
        return
    meta = dict(vars(args))
    meta.update(extra)
    with open(args.output + ".json", "w") as fh:
        json.dump(meta, fh, indent=1, default=str)


# -------------------------------------------------------------------- solve

_INITIALS = {
    "uniform": lambda p: (lambda x1, x2, w: __import__("numpy").ones_like(x1)
                          * p.get("amplitude", 1.0)),
    "cosine": lambda p: (lambda x1, x2, w: 1.0 + p.get("amplitude", 0.5)
                         * __import__("numpy").cos(2.0 * math.pi * x1)),
    "bump": lambda p: (lambda x1, x2, w: 1.0 + p.get("amplitude", 1.0)
                       * __import__("numpy").exp(
                           -((x1 - p.get("x0", 0.5)) ** 2
                             + (x2 - p.get("y0", 0.5)) ** 2)
                           / (2.0 * p.get("width", 0.1) ** 2))),
}


def _cmd_solve(args):
    import numpy as np
    from . import solver
    with open(args.config) as fh:
        cfg = json.load(fh)
    gspec = cfg.get("grids", {})
    grids = solver.SolverGrids(
        n_x=gspec.get("n_x", 16), n_omega=gspec.get("n_omega", 32),
        n_s=gspec.get("n_s", 64), n_h=gspec.get("n_h", 32),
        s_max=gspec.get("s_max", 40.0), cfl=cfg.get("cfl", 0.5))
    init = cfg.get("initial", {"kind": "uniform", "params": {}})
    if init["kind"] not in _INITIALS:
        print(f"unknown initial kind {init['kind']!r}; "
              f"valid: {sorted(_INITIALS)}", file=sys.stderr)
        return 2
    f_in = _INITIALS[init["kind"]](init.get("params", {}))
    field = solver.init_field(f_in, grids)
    t_end = cfg.get("t_end", 1.0)
    every = cfg.get("reports", {}).get("every", 1.0)
    field, reports = solver.solve(field, t_end, report_every=every)

    outdir = args.output_dir
    os.makedirs(outdir, exist_ok=True)
    diag_path = os.path.join(outdir, "diagnostics.csv")
    with open(diag_path, "w") as fh:
        fh.write(_header(cfg) + "\n")
        w = csv.writer(fh)
        w.writerow(["t", "mass", "H_zlogz", "D_zlogz", "H_sq", "D_sq",
                    "dist_to_CE", "coarse_dist", "lower_bound"])
        f2 = math.sqrt(float(np.mean(
            np.asarray(f_in(*np.meshgrid(grids.x_centers, grids.x_centers,
                                         grids.omega, indexing="ij"))) ** 2))
            * 2.0 * math.pi)
        for rec in reports:
            lb = solver.free_flow_lower_bound(f2, rec["t"])[0]
            w.writerow([f"{rec['t']:.6g}", f"{rec['mass']:.12g}",
                        f"{rec['H_zlogz']:.9g}", f"{rec['D_zlogz']:.9g}",
                        f"{rec['H_square']:.9g}", f"{rec['D_square']:.9g}",
                        f"{rec['dist_fine']:.9g}", f"{rec['dist_coarse']:.9g}",
                        f"{lb:.9g}"])
    snap_path = os.path.join(outdir, "snapshot.csv.gz")
    out, _ = _open_out(snap_path, cfg, compress=True)
    w = csv.writer(out)
    w.writerow(["x1", "x2", "theta", "s", "h", "F"])
    F = field.values
    for a in range(grids.n_x):
        for b in range(grids.n_x):
            for wi in range(grids.n_omega):
                for i in range(grids.n_s):
                    for k in range(grids.n_h):
                        w.writerow([f"{grids.x_centers[a]:.6g}",
                                    f"{grids.x_centers[b]:.6g}",
                                    f"{grids.omega[wi]:.6g}",
                                    f"{grids.s_centers[i]:.6g}",
                                    f"{grids.h_centers[k]:.6g}",
                                    f"{F[a, b, wi, i, k]:.9g}"])
    out.close()
    print(f"wrote {diag_path} and {snap_path}")
    return 0


# ------------------------------------------------------------------- verify

def _cmd_verify_all(args):
    from . import verify
    checks = verify.run_all(quick=args.quick)
    ok = verify.print_report(checks)
    report_path = os.path.join(args.output_dir, "verify_report.json")
    os.makedirs(args.output_dir, exist_ok=True)
    with open(report_path, "w") as fh:
        json.dump({"header": _header(vars(args)),
                   "checks": checks}, fh, indent=1, default=float)
    print(f"report written to {report_path}")
    return 0 if ok else 1


# ---------------------------------------------------------------- plot-data

def _cmd_plot_data(args):
    with open(args.input) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    header, body = rows[0], rows[1:]
    out, close = _open_out(args.output, vars(args))
    w = csv.writer(out)
    w.writerow(["row", "variable", "value"])
    for i, row in enumerate(body):
        for name, val in zip(header, row):
            w.writerow([i, name, val])
    if close:
        out.close()
    return 0


# ----------------------------------------------------------------- parsing

def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lorentz",
        description="Boltzmann-Grad limit of the periodic Lorentz gas: "
                    "billiard dynamics, obstacle arithmetic, transition "
                    "kernel, Monte Carlo checks, kinetic solver.")
    p.add_argument("--threads", type=int, default=None,
                   help="worker thread cap (default: env LORENTZ_BG_THREADS)")
    p.add_argument("--output-dir", default=".", help="directory for outputs")
    sub = p.add_subparsers(dest="group", required=True)

    def add(group_sub, name, fn, **kw):
        sp = group_sub.add_parser(name, **kw)
        sp.set_defaults(func=fn)
        return sp

    bil = p_sub = sub.add_parser("billiard", help="exact microscopic dynamics")
    bsub = bil.add_subparsers(dest="command", required=True)
    sp = add(bsub, "trace", _cmd_billiard_trace,
             help="CSV of successive collisions")
    sp.add_argument("--x", type=float, required=True)
    sp.add_argument("--y", type=float, required=True)
    sp.add_argument("--theta", type=float, required=True)
    sp.add_argument("--r", type=float, required=True)
    sp.add_argument("--n", type=int, default=10)
    sp.add_argument("--output", default="-")
    sp = add(bsub, "transfer", _cmd_billiard_transfer,
             help="scaled transfer map (S, h)")
    sp.add_argument("--hprime", type=float, required=True)
    sp.add_argument("--theta", type=float, required=True)
    sp.add_argument("--r", type=float, required=True)

    cf = sub.add_parser("cf", help="obstacle configuration arithmetic")
    csub = cf.add_subparsers(dest="command", required=True)
    sp = add(csub, "params", _cmd_cf_params,
             help="three-obstacle parameters as JSON")
    sp.add_argument("--theta", type=float, required=True)
    sp.add_argument("--r", type=float, required=True)
    sp = add(csub, "expand", _cmd_cf_expand,
             help="continued-fraction digit/convergent table")
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--eps", type=float, default=None)
    sp.add_argument("--max-digits", type=int, default=None)
    sp.add_argument("--output", default="-")

    ker = sub.add_parser("kernel", help="transition kernel and equilibrium")
    ksub = ker.add_subparsers(dest="command", required=True)
    sp = add(ksub, "eval", _cmd_kernel_eval, help="print P and Pi at a point")
    sp.add_argument("--s", type=float, required=True)
    sp.add_argument("--h", type=float, required=True)
    sp.add_argument("--hprime", type=float, required=True)
    sp = add(ksub, "tabulate", _cmd_kernel_tabulate, help="CSV table")
    sp.add_argument("--what", choices=["P", "Pi", "E"], required=True)
    sp.add_argument("--s-grid", default="0:4:41", help="lo:hi:n")
    sp.add_argument("--h-grid", default="-1:1:21", help="lo:hi:n")
    sp.add_argument("--hprime", type=float, default=0.0)
    sp.add_argument("--output", default="-")
    add(ksub, "verify", _cmd_kernel_verify,
        help="kernel invariant suite (quick)")

    mcg = sub.add_parser("mc", help="Monte Carlo and Cesaro estimators")
    msub = mcg.add_subparsers(dest="command", required=True)
    sp = add(msub, "kernel-converge", _cmd_mc_kernel_converge,
             help="Cesaro kernel estimate vs closed form")
    sp.add_argument("--hprime", type=float, default=0.0)
    sp.add_argument("--eps", type=float, default=1e-4)
    sp.add_argument("--ppd", type=int, default=100)
    sp.add_argument("--seed", type=int, default=300)
    sp.add_argument("--output", default="-")
    sp = add(msub, "config-dist", _cmd_mc_config_dist,
             help="Cesaro distribution of (A,B,Q,sigma)")
    sp.add_argument("--eps", type=float, default=1e-4)
    sp.add_argument("--ppd", type=int, default=100)
    sp.add_argument("--seed", type=int, default=31)
    sp.add_argument("--output", default="-")
    sp = add(msub, "markov", _cmd_mc_markov,
             help="stationary (s,h) histogram of the limit chain")
    sp.add_argument("--n", type=int, default=500, help="number of chains")
    sp.add_argument("--tend", type=float, default=200.0,
                    help="steps per chain")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--output", default="-")
    sp = add(msub, "billiard", _cmd_mc_billiard,
             help="microscopic ensemble snapshot")
    sp.add_argument("--r", type=float, required=True)
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--tend", type=float, default=5.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--output", default="-")
    sp = add(msub, "hypothesis-h", _cmd_mc_hypothesis_h,
             help="serial correlation of successive configurations")
    sp.add_argument("--r", type=float, default=1e-4)
    sp.add_argument("--n", type=int, default=2000)
    sp.add_argument("--seed", type=int, default=7)

    sol = sub.add_parser("solve", help="kinetic equation solver")
    sol.add_argument("--config", required=True, help="run config JSON")
    sol.set_defaults(func=_cmd_solve)

    ver = sub.add_parser("verify", help="acceptance suite")
    vsub = ver.add_subparsers(dest="command", required=True)
    sp = add(vsub, "all", _cmd_verify_all, help="run every acceptance check")
    sp.add_argument("--quick", action="store_true",
                    help="reduced scale (minutes instead of hours)")

    pd = sub.add_parser("plot-data", help="reshape a CSV to tidy long format")
    pd.add_argument("--input", required=True)
    pd.add_argument("--output", default="-")
    pd.set_defaults(func=_cmd_plot_data)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    threads = args.threads
    if threads is None:
        env = os.environ.get("LORENTZ_BG_THREADS")
        threads = int(env) if env else None
    if threads is not None:
        if threads < 1:
            parser.error("--threads must be >= 1")
        _set_threads(threads)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
