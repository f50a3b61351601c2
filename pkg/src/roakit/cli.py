"""Command-line front end.

Subcommands:
  certify <config.json>    run a pipeline, write certificate / grid / contours
  combine <cert.json>...   combine certificates via the nesting check
  empirical <config.json>  replicator metric sweep, write a CSV table

Exit codes: 0 certified, 2 no certificate (or nesting rejected), 1 error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return 1


def cmd_certify(config_path: str) -> int:
    from .roa import certified_area, run_pipeline

    try:
        with open(config_path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(f"cannot read config: {exc}")
    try:
        _check_config(cfg)
        cert = run_pipeline(cfg)
    except (ValueError, KeyError, RuntimeError) as exc:
        return _fail(str(exc))
    outdir = cfg.get("output_dir", ".")
    os.makedirs(outdir, exist_ok=True)
    stem = cfg.get("output_stem", "certificate")
    cert_path = os.path.join(outdir, f"{stem}.json")
    cert.save(cert_path)
    print(f"certificate written to {cert_path}")
    if getattr(cert, "grid", None) is not None:
        grid_path = os.path.join(outdir, f"{stem}_grid.csv")
        cert.grid.to_csv(grid_path)
        print(f"grid written to {grid_path}")
    if cert.empty:
        print("no certificate found (empty gamma interval)")
        return 2
    area, se = certified_area(cert)
    print(f"gamma1={cert.gamma1:.6g} gamma2={cert.gamma2:.6g} "
          f"area_fraction={area:.4f}+-{se:.4f}")
    if cert.V.dim == 2:
        _write_levels(cert, outdir, stem)
    return 0


def _check_config(cfg: dict):
    if not isinstance(cfg, dict):
        raise ValueError("config must be a JSON object")
    for key, typ in (("system", dict), ("basis", dict), ("validator", dict)):
        if key in cfg and not isinstance(cfg[key], typ):
            raise ValueError(f"config field '{key}' must be an object")
    basis = cfg.get("basis", {})
    if (basis.get("kind") == "monomial"
            and cfg.get("projection", {}).get("kind") == "truncation"
            and cfg.get("approximation", {}).get("kind", "none") != "none"
            and int(cfg.get("approximation", {}).get("option", 1)) == 2):
        raise ValueError("config field 'approximation.option': truncation "
                         "requires a polynomial field (use option 1)")


def _write_levels(cert, outdir: str, stem: str, grid_n: int = 400):
    """Uniform V-evaluation grid plus marching-squares level polylines."""
    from skimage import measure

    xs = np.linspace(-1.0, 1.0, grid_n)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    Z = cert.V.eval_many(pts).reshape(grid_n, grid_n)
    vpath = os.path.join(outdir, f"{stem}_V.csv")
    with open(vpath, "w") as fh:
        fh.write("x,y,V\n")
        for i in range(grid_n):
            for j in range(grid_n):
                fh.write(f"{X[i, j]:.8g},{Y[i, j]:.8g},{Z[i, j]:.10g}\n")
    cpath = os.path.join(outdir, f"{stem}_contours.csv")
    step = 2.0 / (grid_n - 1)
    with open(cpath, "w") as fh:
        fh.write("curve_id,x,y\n")
        cid = 0
        for gamma in (cert.gamma1, cert.gamma2):
            if gamma <= 0:
                continue
            for contour in measure.find_contours(Z, gamma):
                for r, c in contour:
                    fh.write(f"{cid},{-1.0 + step * r:.8g},"
                             f"{-1.0 + step * c:.8g}\n")
                cid += 1
    print(f"level data written to {vpath}, {cpath}")


def cmd_combine(cert_paths, output: str = "combined.json") -> int:
    from .roa import Certificate, combine

    try:
        certs = [Certificate.load(p) for p in cert_paths]
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        return _fail(f"cannot read certificate: {exc}")
    try:
        result = combine(certs)
    except ValueError as exc:
        return _fail(str(exc))
    with open(output, "w") as fh:
        json.dump(result.to_json_dict(), fh, indent=1, sort_keys=True)
    if not result.nesting_verified:
        print(f"nesting violated at witness {result.witness}; "
              f"combination rejected (details in {output})")
        return 2
    print(f"combined certificate written to {output}")
    return 0


def cmd_empirical(config_path: str) -> int:
    from .dynamics import jacobian_at_origin, reduced_replicator, \
        stable_vertex_game
    from .empirical import (TrialRow, metric_r1, metric_r2,
                            quadratic_baseline, sample_basin,
                            sweep_rbf_candidates, write_metrics_csv)

    try:
        with open(config_path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(f"cannot read config: {exc}")
    dims = cfg.get("dimensions", [])
    K = int(cfg.get("K", 5000))
    trials = int(cfg.get("trials", 30))
    seed = int(cfg.get("seed", 0))
    out = cfg.get("output", "metrics.csv")
    rows = []
    baseline_rows = []
    for n in dims:
        A = stable_vertex_game(n, seed=seed + n)
        try:
            ss = sample_basin(A, K, seed=seed + n)
        except RuntimeError as exc:
            return_code = _fail(str(exc))
            return 2 if "acceptance rate" in str(exc) else return_code
        F = reduced_replicator(A)
        base = quadratic_baseline(jacobian_at_origin(F))
        r1b = metric_r1(base, F, ss.W)
        r2b, g1b, g2b = metric_r2(base, F, ss.W)
        baseline_rows.append(TrialRow(n, -1, 0.0, 0.0, r1b, r2b,
                                      g1b, g2b, seed + n))
        rows.extend(sweep_rbf_candidates(A, ss.W, trials=trials,
                                         seed=seed + n))
        print(f"n={n}: baseline r1={r1b:.3f} r2={r2b:.3f}, "
              f"{len([r for r in rows if r.n == n])} RBF trials")
    write_metrics_csv(out, rows, baseline_rows)
    print(f"metrics written to {out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="roakit",
        description="Koopman-based Lyapunov candidates with certified "
                    "region-of-attraction estimates.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_cert = sub.add_parser("certify", help="run a pipeline from a config")
    p_cert.add_argument("config")
    p_comb = sub.add_parser("combine", help="combine certificates")
    p_comb.add_argument("certificates", nargs="+")
    p_comb.add_argument("-o", "--output", default="combined.json")
    p_emp = sub.add_parser("empirical", help="replicator metric sweep")
    p_emp.add_argument("config")
    args = parser.parse_args(argv)
    if args.command == "certify":
        return cmd_certify(args.config)
    if args.command == "combine":
        return cmd_combine(args.certificates, args.output)
    return cmd_empirical(args.config)


if __name__ == "__main__":
    sys.exit(main())
