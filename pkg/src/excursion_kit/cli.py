"""Command-line front end.

Subcommands:

* ``faces``    — list the faces of the configured rectangle (one per line).
* ``compute``  — analytic excursion quantities over a level grid, CSV out.
* ``mc``       — Monte Carlo sup-probabilities and mean Euler counts, CSV out.
* ``validate`` — run the built-in invariant suites and report pass/fail.

Configuration lives in a JSON file (see ``load_config``); command-line flags
override file values.  Exit codes: 0 success, 2 configuration error,
3 capability error, 4 numeric error, 5 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .errors import CapabilityError, ConfigError, ExcursionError, NumericError
from .field import (
    FieldModel,
    SpectralSumField,
    check_h2,
    derivative_consistency,
    field_from_dict,
)
from .gauss import hermite_tail_identity_check
from .geometry import DomainError, Face, RectDomain, enumerate_faces, face_label, outward_cone
from .mec import (
    condition_check,
    excursion_prob_mu,
    laplace_mec_result,
    mean_euler_characteristic,
    prepare_laplace_inputs,
)
from .quad import QuadSpec
from . import mc as mc_mod

__all__ = ["RunConfig", "load_config", "main"]

METHODS = ("mu_approx", "mean_ec", "laplace", "mc")

_CONFIG_KEYS = {
    "field",
    "domain",
    "levels",
    "method",
    "quad",
    "mc",
    "seed",
    "threads",
    "out",
    "report",
}
_QUAD_KEYS = {"order_per_axis", "rel_tol", "abs_tol", "adaptive", "max_subdivisions"}
_MC_KEYS = {"grid", "reps"}


@dataclass(frozen=True)
class RunConfig:
    model: FieldModel
    domain: RectDomain
    levels: tuple[float, ...]
    method: str | None
    quad: QuadSpec
    mc_grid: Any
    mc_reps: int
    seed: int
    threads: int
    out: str | None
    report: str | None


def _levels_from_range(start: float, stop: float, step: float) -> tuple[float, ...]:
    if not (math.isfinite(start) and math.isfinite(stop) and math.isfinite(step)):
        raise ConfigError("level range must be finite")
    if step <= 0:
        raise ConfigError("level step must be positive")
    if stop < start:
        raise ConfigError("level range must be increasing")
    out = []
    k = 0
    while True:
        v = start + k * step
        if v > stop + 1e-9 * max(1.0, step):
            break
        out.append(v)
        k += 1
    return tuple(out)


def _parse_levels_flag(text: str) -> tuple[float, ...]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"--levels expects START:STOP:STEP, got {text!r}")
    try:
        a, b, s = (float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"--levels expects numbers, got {text!r}") from exc
    return _levels_from_range(a, b, s)


def _levels_from_config(spec) -> tuple[float, ...]:
    if isinstance(spec, list):
        levels = tuple(float(v) for v in spec)
        if not levels:
            raise ConfigError("levels list must be nonempty")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ConfigError("levels must be strictly increasing")
        return levels
    if isinstance(spec, dict):
        extra = set(spec) - {"start", "stop", "step"}
        if extra:
            raise ConfigError(f"unexpected level keys: {sorted(extra)}")
        try:
            return _levels_from_range(
                float(spec["start"]), float(spec["stop"]), float(spec["step"])
            )
        except KeyError as exc:
            raise ConfigError("level range needs start, stop, step") from exc
    raise ConfigError("levels must be a list or a start/stop/step object")


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    extra = set(data) - _CONFIG_KEYS
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    return data


def build_config(data: dict, args: argparse.Namespace) -> RunConfig:
    """Merge file values with flag overrides (flags win)."""
    if "field" not in data:
        raise ConfigError("config needs a 'field' spec")
    model = field_from_dict(data["field"])

    dom = data.get("domain")
    if not isinstance(dom, dict) or "lower" not in dom or "upper" not in dom:
        raise ConfigError("config needs a 'domain' with lower/upper")
    try:
        domain = RectDomain(dom["lower"], dom["upper"])
    except (TypeError, ValueError) as exc:
        # DomainError subclasses ValueError and already names the axis
        raise ConfigError(str(exc)) from exc
    if domain.dim != model.dim:
        raise ConfigError(
            f"domain dimension {domain.dim} does not match field dimension {model.dim}"
        )

    if getattr(args, "levels", None) is not None:
        levels = _parse_levels_flag(args.levels)
    elif "levels" in data:
        levels = _levels_from_config(data["levels"])
    else:
        levels = ()

    method = getattr(args, "method", None) or data.get("method")
    if method is not None and method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; choose from {METHODS}")

    quad_cfg = data.get("quad", {})
    if not isinstance(quad_cfg, dict):
        raise ConfigError("'quad' must be an object")
    extra = set(quad_cfg) - _QUAD_KEYS
    if extra:
        raise ConfigError(f"unknown quad keys: {sorted(extra)}")
    quad = QuadSpec(
        order_per_axis=int(quad_cfg.get("order_per_axis", 24)),
        adaptive=bool(quad_cfg.get("adaptive", True)),
        rel_tol=float(quad_cfg.get("rel_tol", 1e-6)),
        abs_tol=float(quad_cfg.get("abs_tol", 1e-14)),
        max_subdivisions=int(quad_cfg.get("max_subdivisions", 12)),
    )
    if getattr(args, "quad_order", None) is not None:
        quad = dataclasses.replace(quad, order_per_axis=int(args.quad_order))
    if getattr(args, "rel_tol", None) is not None:
        quad = dataclasses.replace(quad, rel_tol=float(args.rel_tol))

    mc_cfg = data.get("mc", {})
    if not isinstance(mc_cfg, dict):
        raise ConfigError("'mc' must be an object")
    extra = set(mc_cfg) - _MC_KEYS
    if extra:
        raise ConfigError(f"unknown mc keys: {sorted(extra)}")
    grid = mc_cfg.get("grid", 64)
    reps = int(mc_cfg.get("reps", 10_000))
    if getattr(args, "grid", None) is not None:
        grid = int(args.grid)
    if getattr(args, "reps", None) is not None:
        reps = int(args.reps)

    seed = data.get("seed", 0)
    if getattr(args, "seed", None) is not None:
        seed = args.seed
    seed = int(seed)
    if not (0 <= seed < 2**64):
        raise ConfigError("seed must fit in an unsigned 64-bit integer")

    if getattr(args, "threads", None) is not None:
        threads = int(args.threads)
    elif "threads" in data:
        threads = int(data["threads"])
    elif os.environ.get("EXK_THREADS"):
        try:
            threads = int(os.environ["EXK_THREADS"])
        except ValueError as exc:
            raise ConfigError("EXK_THREADS must be an integer") from exc
    else:
        threads = 1
    if threads < 1:
        raise ConfigError("threads must be >= 1")

    out = getattr(args, "out", None) or data.get("out")
    report = data.get("report")
    return RunConfig(
        model=model,
        domain=domain,
        levels=levels,
        method=method,
        quad=quad,
        mc_grid=grid,
        mc_reps=reps,
        seed=seed,
        threads=threads,
        out=out,
        report=report,
    )


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)  # RFC 4180: comma separated, CRLF line endings
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _maybe_report(cfg: RunConfig, command: str, header: list[str], rows: list[list]) -> None:
    if not cfg.report:
        return
    payload = {
        "command": command,
        "header": header,
        "rows": [[_fmt(v) for v in row] for row in rows],
    }
    with open(cfg.report, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cone_text(face: Face) -> str:
    cone = outward_cone(face)
    parts = [f"d{j + 1}{'>=' if s > 0 else '<='}0" for j, s in cone.constraints]
    return "{" + ",".join(parts) + "}"


def cmd_faces(cfg: RunConfig) -> int:
    lines = []
    for face in enumerate_faces(cfg.domain):
        sigma = "{" + ",".join(str(j + 1) for j in face.sigma) + "}"
        eps = "{" + ",".join(f"{j + 1}:{'upper' if b else 'lower'}" for j, b in face.epsilon) + "}"
        lines.append(f"{face_label(face)}  sigma={sigma}  eps={eps}  cone={_cone_text(face)}")
    _emit("\n".join(lines) + "\n", cfg.out)
    return 0


def cmd_compute(cfg: RunConfig) -> int:
    if not cfg.levels:
        raise ConfigError("compute needs levels (config 'levels' or --levels A:B:S)")
    if cfg.method is None:
        raise ConfigError("compute needs a method (mu_approx, mean_ec, or laplace)")
    if cfg.method == "mc":
        raise ConfigError("method 'mc' belongs to the mc command")

    faces = enumerate_faces(cfg.domain)
    labels = [face_label(f) for f in faces]
    header = ["level", "method", "total", *labels, "err_est"]
    rows: list[list] = []

    laplace_inputs = None
    if cfg.method == "laplace":
        laplace_inputs = prepare_laplace_inputs(cfg.model, cfg.domain)

    for u in cfg.levels:
        if cfg.method == "mu_approx":
            res = excursion_prob_mu(
                cfg.model, cfg.domain, u, cfg.quad, threads=cfg.threads
            )
        elif cfg.method == "mean_ec":
            res = mean_euler_characteristic(
                cfg.model, cfg.domain, u, cfg.quad, cfg.seed, threads=cfg.threads
            )
        else:
            res = laplace_mec_result(
                cfg.model, cfg.domain, u, laplace_inputs, seed=cfg.seed
            )
        ledger = res.by_label()
        rows.append([u, cfg.method, res.total, *(ledger[l] for l in labels), res.err_est])

    _emit(_csv_text(header, rows), cfg.out)
    _maybe_report(cfg, "compute", header, rows)
    return 0


def cmd_mc(cfg: RunConfig) -> int:
    if not cfg.levels:
        raise ConfigError("mc needs levels (config 'levels' or --levels A:B:S)")
    header = [
        "level",
        "p_hat",
        "stderr",
        "mean_chi",
        "chi_stderr",
        "grid",
        "reps",
        "p_fine",
        "stderr_fine",
        "grid_fine",
        "bias_flag",
    ]
    rows: list[list] = []
    for u in cfg.levels:
        dual = mc_mod.sup_prob_dual_resolution(
            cfg.model,
            cfg.domain,
            u,
            cfg.mc_grid,
            cfg.mc_reps,
            cfg.seed,
            threads=cfg.threads,
        )
        mean_chi, chi_se = mc_mod.mc_mean_ec(
            cfg.model,
            cfg.domain,
            u,
            cfg.mc_grid,
            cfg.mc_reps,
            cfg.seed,
            threads=cfg.threads,
        )
        rows.append(
            [
                u,
                dual["p_coarse"],
                dual["stderr_coarse"],
                mean_chi,
                chi_se,
                "x".join(str(p) for p in dual["grid_coarse"]),
                cfg.mc_reps,
                dual["p_fine"],
                dual["stderr_fine"],
                "x".join(str(p) for p in dual["grid_fine"]),
                dual["bias_flag"],
            ]
        )
    _emit(_csv_text(header, rows), cfg.out)
    _maybe_report(cfg, "mc", header, rows)
    return 0


# ---------------------------------------------------------------------------
# Validation suites
# ---------------------------------------------------------------------------


def _check_hermite() -> tuple[bool, str]:
    tol = 1e-8
    worst = 0.0
    for k in range(1, 7):
        for u in (0.5, 1.0, 2.0, 3.0):
            worst = max(worst, hermite_tail_identity_check(k, u))
    return worst < tol, f"max residual {worst:.3e} (tol {tol:.0e})"

def _check_lambda(model: FieldModel) -> tuple[bool, str]:
    if not isinstance(model, SpectralSumField):
        return True, "skipped (not a finite spectral sum)"
    tol = 1e-10
    diff = float(np.max(np.abs(model.lambda_spectral - model.lambda_mat)))
    return diff < tol, f"spectral vs variogram max diff {diff:.3e} (tol {tol:.0e})"

def _check_derivatives(model: FieldModel, domain: RectDomain) -> tuple[bool, str]:
    rep = derivative_consistency(model, domain)
    return rep.passed, (
        f"grad err {rep.max_grad_err:.3e}, hess err {rep.max_hess_err:.3e}"
        f" (rtol {rep.rtol:.0e})"
    )

def _check_ec_oracle() -> tuple[bool, str]:
    rng = np.random.Generator(np.random.Philox(key=np.array([99, 0], dtype=np.uint64)))
    bad = 0
    for _ in range(200):
        shape = (int(rng.integers(1, 13)), int(rng.integers(1, 13)))
        mask = rng.random(shape) < rng.uniform(0.2, 0.8)
        chi_cells = mc_mod.empirical_ec(mask.astype(float), 0.5).chi
        if chi_cells != mc_mod.ec_oracle_2d(mask):
            bad += 1
    block = np.zeros((7, 7), dtype=bool)
    block[1:6, 1:6] = True
    ring = block.copy()
    ring[2:5, 2:5] = False
    two = np.zeros((5, 9), dtype=bool)
    two[1:4, 1:4] = True
    two[1:4, 5:8] = True
    canon = (
        mc_mod.ec_oracle_2d(block) == 1
        and mc_mod.ec_oracle_2d(ring) == 0
        and mc_mod.ec_oracle_2d(two) == 2
    )
    ok = bad == 0 and canon
    return ok, f"{200 - bad}/200 random masks agree; canonical block/ring/two-blocks {'ok' if canon else 'BAD'}"

def _check_h2(model: FieldModel, domain: RectDomain) -> tuple[bool, str]:
    rep = check_h2(model, domain)
    return not rep.flagged, (
        f"min eig(Lambda - Lambda(t)) over grid = {rep.min_eig:.3e}"
        f" at t={np.array2string(rep.argmin, precision=4)} (tol {rep.tol:.0e})"
    )

def _check_condition(model: FieldModel, domain: RectDomain) -> tuple[bool, str]:
    rep = condition_check(model, domain)
    if rep.satisfied:
        return True, f"no flat fixed directions near sigma_T^2 = {rep.sigma_sq:.6g}"
    face, point, grads = rep.violations[0]
    pt = "(" + ", ".join(f"{x:.6g}" for x in point) + ")"
    gr = "(" + ", ".join(f"{x:.3g}" for x in grads) + ")"
    return False, (
        f"flat fixed direction at t={pt} on face {face_label(face)}"
        f" (fixed-direction derivatives {gr})"
    )


def cmd_validate(cfg: RunConfig) -> int:
    checks = [
        ("hermite_tail_identity", lambda: _check_hermite()),
        ("lambda_cross_check", lambda: _check_lambda(cfg.model)),
        ("derivative_consistency", lambda: _check_derivatives(cfg.model, cfg.domain)),
        ("ec_oracle_equivalence", lambda: _check_ec_oracle()),
        ("h2_scan", lambda: _check_h2(cfg.model, cfg.domain)),
        ("condition_check", lambda: _check_condition(cfg.model, cfg.domain)),
    ]
    lines = []
    all_ok = True
    for name, fn in checks:
        try:
            ok, detail = fn()
        except ExcursionError as exc:
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        all_ok &= ok
        lines.append(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    lines.append(f"{'all checks passed' if all_ok else 'VALIDATION FAILED'}")
    _emit("\n".join(lines) + "\n", cfg.out)
    return 0 if all_ok else 5


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

# the half-rectangle keeps the variance maximizer regular (corner with
# strictly positive one-sided derivatives), so every suite can pass
DEFAULT_VALIDATE_CONFIG = {
    "field": {"type": "cosine"},
    "domain": {"lower": [0.0, 0.0], "upper": [math.pi / 2, math.pi / 2]},
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="excursion-kit",
        description="Excursion probabilities and Euler characteristics of "
        "smooth Gaussian fields with stationary increments on rectangles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("faces", "list the faces of the configured rectangle"),
        ("compute", "analytic excursion quantities over a level grid (CSV)"),
        ("mc", "Monte Carlo sup-probability and mean Euler characteristic (CSV)"),
        ("validate", "run the built-in invariant suites"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH", help="JSON run configuration")
        p.add_argument("--levels", metavar="A:B:S", help="level grid start:stop:step")
        p.add_argument("--method", choices=METHODS, help="computation method")
        p.add_argument("--seed", type=int, metavar="N", help="master seed (default 0)")
        p.add_argument("--threads", type=int, metavar="N", help="worker threads")
        p.add_argument("--out", metavar="PATH", help="output file (default stdout)")
        p.add_argument("--grid", type=int, metavar="N", help="MC grid points per axis")
        p.add_argument("--reps", type=int, metavar="N", help="MC replicates")
        p.add_argument("--quad-order", type=int, metavar="N", help="quadrature order per axis")
        p.add_argument("--rel-tol", type=float, metavar="X", help="quadrature relative tolerance")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config is None:
            if args.command != "validate":
                raise ConfigError("--config is required")
            data = dict(DEFAULT_VALIDATE_CONFIG)
        else:
            data = load_config(args.config)
        cfg = build_config(data, args)
        if args.command == "faces":
            return cmd_faces(cfg)
        if args.command == "compute":
            return cmd_compute(cfg)
        if args.command == "mc":
            return cmd_mc(cfg)
        return cmd_validate(cfg)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CapabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
