"""Command-line front end: run, sweep-eps, refine, check-compat.

Exit codes: 0 success, 2 scenario parse error, 3 validation error,
4 runtime error.  Output files are plain text with headers; snapshots are
raw little-endian float64 with a text sidecar describing the layout.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import coupling, diagnostics, scenario as scen
from .errors import RigidflowError, ScenarioParseError, ScenarioValidationError

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_RUNTIME = 4


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def write_timeseries(path, traj: coupling.Trajectory):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(traj.columns) + "\n")
        for row in traj.rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_snapshot(stem, t, mesh, U):
    var_names = ["p"] + [f"u_{ax}" for ax in "xyz"[: mesh.dim]] + ["s"]
    data = np.concatenate(
        [U.p[..., None], U.u, U.s[..., None]], axis=-1
    ).astype("<f8")
    data.tofile(stem + ".bin")
    dims = dict(zip(("N_r", "N_theta", "N_phi"), mesh.shape))
    with open(stem + ".txt", "w", encoding="utf-8") as fh:
        fh.write(f"t = {_fmt(float(t))}\n")
        fh.write(f"dim = {mesh.dim}\n")
        for k, v in dims.items():
            fh.write(f"{k} = {v}\n")
        fh.write(f"variables = {','.join(var_names)}\n")
        fh.write("layout = node-major, variables interleaved per node\n")
        fh.write("dtype = little-endian float64\n")


def _load_scenario(args):
    sc = scen.parse_scenario(args.scenario)
    if getattr(args, "eps", None) is not None:
        sc.fluid.eps = args.eps
    if getattr(args, "resolution", None) is not None:
        sc.mesh.N_r = args.resolution
        sc.mesh.N_theta = 2 * args.resolution
    scen.validate_scenario(sc)
    return sc


def _ensure_out(args):
    out = args.out or "out"
    os.makedirs(out, exist_ok=True)
    return out


def cmd_run(args):
    sc = _load_scenario(args)
    out = _ensure_out(args)
    traj = coupling.run(sc)
    write_timeseries(os.path.join(out, "timeseries.csv"), traj)
    mesh = _mesh_of(sc) if traj.snapshots else None
    for i, (t, U) in enumerate(traj.snapshots):
        write_snapshot(os.path.join(out, f"snap_{i:06d}"), t, mesh, U)
    print(f"run finished: t = {_fmt(traj.final.t)}, "
          f"{len(traj.rows)} rows, E0 growth constant {_fmt(traj.growth_constant)}")
    print(f"compatibility residuals at t=0: "
          + " ".join(_fmt(float(r)) for r in traj.compat_res))
    return EXIT_OK


def _mesh_of(sc):
    from .geometry import build_mesh
    return build_mesh(sc.domain_spec(), sc.resolution())


def _field_distance(mesh, A, B):
    d2 = (A.p - B.p) ** 2 + np.sum((A.u - B.u) ** 2, axis=-1) + (A.s - B.s) ** 2
    return float(np.sqrt(np.sum(mesh.volumes * d2)))


def cmd_sweep_eps(args):
    sc = _load_scenario(args)
    out = _ensure_out(args)
    eps_list = [float(x) for x in args.eps_list.split(",")]
    mesh = _mesh_of(sc)
    results = []
    for eps in eps_list:
        sc.fluid.eps = eps
        traj = coupling.run(sc)
        bc = traj.column("bc_mismatch")
        results.append({
            "eps": eps,
            "final_E0": traj.rows[-1][traj.columns.index("E0")],
            "max_bc_mismatch": float(bc.max()),
            "final_bc_mismatch": float(bc[-1]),
            "final": traj.final.U,
        })
    smallest = min(results, key=lambda r: r["eps"])
    for r in results:
        r["dist_to_smallest_eps"] = _field_distance(mesh, r["final"], smallest["final"])
    cols = ["eps", "final_E0", "max_bc_mismatch", "final_bc_mismatch",
            "dist_to_smallest_eps"]
    path = os.path.join(out, "eps_sweep.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for r in results:
            fh.write(",".join(_fmt(float(r[c])) for c in cols) + "\n")
    print(",".join(cols))
    for r in results:
        print(",".join(_fmt(float(r[c])) for c in cols))
    return EXIT_OK


def _restrict(field2, factor):
    """Average factor x factor fine cells onto the coarse grid."""
    n_r, n_t = field2.shape[:2]
    shape = (n_r // factor, factor, n_t // factor, factor) + field2.shape[2:]
    return field2.reshape(shape).mean(axis=(1, 3))


def cmd_refine(args):
    sc = _load_scenario(args)
    out = _ensure_out(args)
    levels = args.levels
    base_r, base_t = sc.mesh.N_r, sc.mesh.N_theta
    finals = []
    meshes = []
    for k in range(levels):
        sc.mesh.N_r = base_r * 2**k
        sc.mesh.N_theta = base_t * 2**k
        traj = coupling.run(sc)
        finals.append(traj.final.U)
        meshes.append(_mesh_of(sc))
    rows = []
    for k in range(levels - 1):
        factor = 2 ** (levels - 1 - k)
        fine = finals[-1]
        coarse_p = _restrict(fine.p, factor)
        coarse_u = _restrict(fine.u, factor)
        coarse_s = _restrict(fine.s, factor)
        ref = type(fine)(coarse_p, coarse_u, coarse_s)
        err = _field_distance(meshes[k], finals[k], ref)
        rows.append((base_r * 2**k, err))
    path = os.path.join(out, "refine.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("N_r,error_vs_finest\n")
        for n, e in rows:
            fh.write(f"{n},{_fmt(e)}\n")
    print("N_r,error_vs_finest")
    for n, e in rows:
        print(f"{n},{_fmt(e)}")
    if len(rows) >= 2:
        hs = np.log([1.0 / n for n, _ in rows])
        es = np.log([e for _, e in rows])
        order = float(np.polyfit(hs, es, 1)[0])
        print(f"observed order: {_fmt(order)}")
    return EXIT_OK


def cmd_check_compat(args):
    sc = _load_scenario(args)
    built = scen.build(sc)
    moments = built.solver.compatibility_derivatives(
        built.U0, built.theta0, built.props, args.order
    )
    res = diagnostics.compatibility_residual(moments, built.mesh)
    ok = True
    print("order,residual,threshold,pass")
    for k, r in enumerate(res):
        if k == 0:
            thresh = args.tol0
        else:
            scale = max(1.0, float(np.abs(moments[k].u).max()))
            thresh = args.tol * scale
        good = r <= thresh
        ok = ok and good
        print(f"{k},{_fmt(float(r))},{_fmt(float(thresh))},{'yes' if good else 'no'}")
    return EXIT_OK if ok else EXIT_RUNTIME


def build_parser():
    p = argparse.ArgumentParser(
        prog="rigidflow",
        description="Rigid body in a compressible inviscid fluid: "
                    "fixed-domain simulation toolkit",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--scenario", required=True, help="scenario file path")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--threads", type=int, default=1,
                        help="worker count (execution is vectorized; "
                             "recorded for reproducibility)")
        sp.add_argument("--eps", type=float, default=None,
                        help="override fluid.eps")
        sp.add_argument("--resolution", type=int, default=None,
                        help="override N_r (N_theta follows as 2x)")

    sp = sub.add_parser("run", help="integrate a scenario, write time series")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep-eps", help="run the scenario over an eps list")
    common(sp)
    sp.add_argument("--eps-list", default="0.1,0.05,0.025,0",
                    help="comma-separated eps values")
    sp.set_defaults(func=cmd_sweep_eps)

    sp = sub.add_parser("refine", help="error-vs-finest refinement table")
    common(sp)
    sp.add_argument("--levels", type=int, default=3)
    sp.set_defaults(func=cmd_refine)

    sp = sub.add_parser("check-compat", help="report data compatibility residuals")
    common(sp)
    sp.add_argument("--order", type=int, default=1)
    sp.add_argument("--tol0", type=float, default=1e-10,
                    help="absolute threshold for order 0")
    sp.add_argument("--tol", type=float, default=1e-6,
                    help="threshold for orders >= 1, scaled by the "
                         "derivative magnitude")
    sp.set_defaults(func=cmd_check_compat)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ScenarioValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (RigidflowError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
