"""Command-line entry point: ``supercg {phantom,project,reconstruct,bench,check-theory}``.

Exit status: 0 success/converged, 1 theory bound violated within premise or
unreadable input, 2 usage error, 3 solver stopped at max_iter without meeting epsilon.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .bench import (DEFAULT_GAMMA0, ExperimentConfig, MethodParams, Problem, canonical_method,
                    metrics_rows, run_bench, run_method, summary_rows)
from .config import ConfigError, load_config
from .operators import Image, Sinogram
from .projector import NoiseModel, Projector, add_noise, make_geometry, make_phantom, snr_db
from .theory import (compute_constants, check_termination,
                     run_s_cg_instrumented, small_instance)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_MAX_ITER = 3
MAX_THEORY_SIZE = 32


class UsageError(Exception):
    pass


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _eps(s: str):
    if s == "auto":
        return "auto"
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError("eps must be 'auto' or a positive number")
    return v


def _method(s: str) -> str:
    try:
        return canonical_method(s)
    except KeyError:
        raise argparse.ArgumentTypeError(f"unknown method {s!r}") from None


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eps", type=_eps, default="auto")
    p.add_argument("--gamma0", type=float)
    p.add_argument("--a", type=float, default=0.975)
    p.add_argument("--kappa", type=float, default=1e-4)
    p.add_argument("--K", type=_positive_int, default=2)
    p.add_argument("--mu", type=float, default=0.01)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--max-iter", type=_positive_int, default=10_000)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="supercg", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("phantom", help="write a Shepp-Logan phantom as IMG1")
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--pgm", type=Path, help="also export a 16-bit PGM preview")

    p = sub.add_parser("project", help="forward-project a phantom and add noise")
    p.add_argument("phantom", type=Path)
    p.add_argument("--angles", type=_positive_int, default=120)
    p.add_argument("--rays", type=_positive_int, default=184)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("reconstruct", help="reconstruct an image from an SGM1 sinogram")
    p.add_argument("sinogram", type=Path)
    p.add_argument("--method", type=_method, required=True)
    p.add_argument("--truth", type=Path, help="IMG1 ground truth for rel_err")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--pgm", type=Path)
    _add_solver_flags(p)

    p = sub.add_parser("bench", help="run all configured methods on one noisy sinogram")
    p.add_argument("--config", type=Path)
    p.add_argument("--size", type=int)
    p.add_argument("--angles", type=_positive_int)
    p.add_argument("--rays", type=_positive_int)
    p.add_argument("--noise", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--method", type=_method, action="append",
                   help="restrict to this method (repeatable)")
    p.add_argument("--eps", type=_eps)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("check-theory", help="numerically check the S-CG descent bounds")
    p.add_argument("--size", type=int, default=16)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--eta0-scale", type=float, default=1.0,
                   help="perturbation size as a multiple of eta_l")
    p.add_argument("--max-iter", type=_positive_int, default=50)
    p.add_argument("--out", type=Path)
    return ap


def cmd_phantom(args) -> int:
    if args.size < 8:
        raise UsageError("--size must be at least 8")
    img = make_phantom(args.size, args.size)
    io.write_image(args.out, img)
    if args.pgm:
        io.write_pgm(args.pgm, img.as_array())
    return EXIT_OK


def cmd_project(args) -> int:
    if not args.noise > 0:
        raise UsageError("--noise must be positive; epsilon auto mode needs a noise variance")
    img = io.read_image(args.phantom)
    geom = make_geometry(args.angles, args.rays, img.width, img.height)
    clean = Projector(geom)(img.values)
    noisy, model = add_noise(clean, args.noise, args.seed)
    io.write_sinogram(args.out, Sinogram(noisy, geom.n_angles, geom.n_rays))
    io.write_meta(io.meta_path(args.out), {
        "sigma2": model.sigma2, "seed": model.seed, "n_angles": geom.n_angles,
        "n_rays": geom.n_rays, "image_width": img.width, "image_height": img.height,
        "level": model.level, "snr_db": snr_db(clean, noisy),
    })
    return EXIT_OK


def _load_problem(sino_path: Path, truth: Path | None, eps) -> Problem:
    sino = io.read_sinogram(sino_path)
    mpath = io.meta_path(sino_path)
    if not mpath.exists():
        raise UsageError(f"missing sidecar {mpath}")
    meta = io.read_meta(mpath)
    try:
        w, h = int(meta["image_width"]), int(meta["image_height"])
        sigma2 = float(meta["sigma2"])
        seed = int(meta.get("seed", 0))
        if (int(meta["n_angles"]), int(meta["n_rays"])) != (sino.n_angles, sino.n_rays):
            raise UsageError(f"{mpath}: geometry does not match {sino_path}")
    except (KeyError, ValueError) as e:
        raise UsageError(f"{mpath}: bad or missing field {e}") from None
    A = Projector(make_geometry(sino.n_angles, sino.n_rays, w, h))
    x_true = None
    if truth is not None:
        t = io.read_image(truth)
        if (t.width, t.height) != (w, h):
            raise UsageError("ground truth size does not match the sidecar geometry")
        x_true = t.values
    epsilon = A.geometry.n_data * sigma2 if eps == "auto" else float(eps)
    noise = NoiseModel(float(meta.get("level", "nan")), sigma2, seed)
    return Problem(A, x_true, sino.values, noise, epsilon)


def cmd_reconstruct(args) -> int:
    if not 0.0 < args.a < 1.0:
        raise UsageError("--a must lie in (0, 1)")
    if args.gamma0 is not None and args.gamma0 < 0:
        raise UsageError("--gamma0 must be nonnegative")
    prob = _load_problem(args.sinogram, args.truth, args.eps)
    name = args.method
    gamma0 = args.gamma0 if args.gamma0 is not None else DEFAULT_GAMMA0.get(name, 1.0)
    p = MethodParams(gamma0, args.a, args.kappa, args.K, args.mu, args.lam, args.max_iter)
    res = run_method(prob, name, p)
    w, h = prob.A.geometry.image_width, prob.A.geometry.image_height
    io.write_image(args.out, Image(res.x, width=w, height=h))
    io.write_csv(args.out.with_suffix(".csv"), metrics_rows({name: res}))
    if args.pgm:
        io.write_pgm(args.pgm, res.image())
    return EXIT_OK if res.converged else EXIT_MAX_ITER


def cmd_bench(args) -> int:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    over = {k: getattr(args, k) for k in ("size", "angles", "rays", "noise", "seed", "eps")
            if getattr(args, k) is not None}
    if args.method:
        over["methods"] = tuple(args.method)
    cfg = replace(cfg, **over)
    if cfg.size < 8:
        raise UsageError("--size must be at least 8")
    if not cfg.noise > 0:
        raise UsageError("--noise must be positive")
    _, results = run_bench(cfg)
    io.write_csv(args.out / "metrics.csv", metrics_rows(results))
    io.write_csv(args.out / "summary.csv", summary_rows(results))
    return EXIT_OK if all(r.converged for r in results.values()) else EXIT_MAX_ITER


def cmd_check_theory(args) -> int:
    if not 8 <= args.size <= MAX_THEORY_SIZE:
        raise UsageError(f"--size must lie in [8, {MAX_THEORY_SIZE}]")
    if args.eta0_scale < 0:
        raise UsageError("--eta0-scale must be nonnegative")
    inst = small_instance(args.size, args.noise, args.seed)
    consts = compute_constants(inst.A, inst.y)
    x0 = np.zeros(inst.A.domain_dim)
    eta0 = args.eta0_scale * consts.eta_l
    # epsilon = 0 keeps the instrumented run going for the full iteration budget
    rep = run_s_cg_instrumented(inst.A, inst.y, x0, 0.0, eta0, max_iter=args.max_iter,
                                constants=consts, seed=args.seed)
    L = inst.A.geometry.n_data
    eps_list = [1.5 * consts.eps0 + inst.sigma2, L * inst.sigma2, 0.5 * consts.eps0]
    cases = check_termination(inst.A, inst.y, x0, eps_list, eps0=consts.eps0)

    bound_rows = [["bound", "eta0", "k", "lhs", "rhs", "margin", "passed", "premise"]]
    for r in rep.rows:
        bound_rows.append([r.bound, repr(eta0), str(r.iteration), repr(r.lhs), repr(r.rhs),
                           repr(r.margin), "yes" if r.passed else "no",
                           "yes" if rep.premise_holds else "no"])
    term_rows = [["epsilon", "eps0", "expect_termination", "terminated", "f", "iterations"]]
    for c in cases:
        term_rows.append([repr(c.epsilon), repr(c.eps0), "yes" if c.expect_termination else "no",
                          "yes" if c.terminated else "no", repr(c.f_out), str(c.iterations)])
    if args.out:
        io.write_csv(args.out / "theory_bounds.csv", bound_rows)
        io.write_csv(args.out / "theory_termination.csv", term_rows)

    print(f"c={consts.c:.6g} eta_l={consts.eta_l:.6g} eps0={consts.eps0:.6g} eta0={eta0:.6g}")
    print(f"bound checks: {len(rep.rows)}, violations: {len(rep.violations)}"
          + ("" if rep.premise_holds else " (premise eta0 <= eta_l broken; reported only)"))
    for c in cases:
        tag = "required" if c.expect_termination else "not required"
        print(f"epsilon={c.epsilon:.6g} ({tag}): terminated={c.terminated} "
              f"after {c.iterations} iterations, f={c.f_out:.6g}")
    failed = (rep.premise_holds and rep.violations) or not all(c.ok for c in cases)
    return EXIT_VIOLATION if failed else EXIT_OK


_COMMANDS = {"phantom": cmd_phantom, "project": cmd_project, "reconstruct": cmd_reconstruct,
             "bench": cmd_bench, "check-theory": cmd_check_theory}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on bad usage
    try:
        return _COMMANDS[args.cmd](args)
    except (UsageError, ConfigError) as e:
        print(f"supercg {args.cmd}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, io.FormatError) as e:
        print(f"supercg {args.cmd}: {e}", file=sys.stderr)
        return EXIT_USAGE if isinstance(e, FileNotFoundError) else 1


if __name__ == "__main__":
    sys.exit(main())
