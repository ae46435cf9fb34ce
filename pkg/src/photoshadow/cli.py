"""Command line front end.

Subcommands: simulate, reconstruct, ingest, analyze, verify-weingarten, mesh.

Exit codes: 0 success, 1 usage error, 2 data error, 3 model inconsistency
(including a failed Weingarten verification).

Options may also come from ``--config FILE``, a flat ``key = value`` file
(``#`` starts a comment, keys are long option names with ``-`` or ``_``).
Command line flags override the file, which overrides built-in defaults.
``PHOTOSHADOW_OUT_DIR`` sets the default output directory.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import analysis, formats, haar, mesh, noise, shadow
from .formats import DataFormatError
from .haar import RngSeed
from .matcore import DimensionError, basis_projector, spectral_decompose

log = logging.getLogger("photoshadow")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_MODEL = 0, 1, 2, 3
OUT_DIR_ENV = "PHOTOSHADOW_OUT_DIR"
DISTORTION_STREAM = 2**30


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def read_config(path: str) -> dict[str, str]:
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    for n, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _int_list(text: str) -> list[int]:
    return [int(float(x)) for x in text.replace(";", ",").split(",") if x.strip()]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def _out_dir(value: str | None) -> Path:
    p = Path(value or os.environ.get(OUT_DIR_ENV, "."))
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# simulate

def cmd_simulate(args) -> int:
    kind = shadow.Protocol(args.protocol)
    d = kind.sub_dim
    if args.d is not None and args.d != d:
        raise UsageError(f"protocol {kind.value} reconstructs a d={d} state, got --d {args.d}")
    if args.M < 1 or args.replications < 1 or args.workers < 1:
        raise UsageError("--M, --replications and --workers must be positive")
    grid = _int_list(args.grid) if args.grid else shadow.default_grid(min(args.grid_min, args.M), args.M,
                                                                       args.grid_points)
    if not grid or min(grid) < 1 or max(grid) > args.M or len(set(grid)) != len(grid):
        raise UsageError(f"grid must hold distinct values within [1, {args.M}]")
    noise_model = None
    if args.p is not None or args.epsilon is not None:
        p = args.p or 0.0
        eps = args.epsilon or 0.0
        if not 0 <= p <= 1:
            raise UsageError("--p must lie in [0, 1]")
        try:
            noise_model = noise.sample_coherent_distortion(d, eps, RngSeed(args.seed, DISTORTION_STREAM)).with_p(p)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    rseed = args.randomizer_seed if args.randomizer_seed is not None else args.seed
    spec = shadow.ProtocolSpec(kind, RngSeed(args.seed, 0), RngSeed(rseed, 2**31))
    run = shadow.simulate_replications(spec, args.M, noise_model, sorted(grid), args.replications,
                                       estimator=args.estimator, workers=args.workers)
    out = _out_dir(args.out_dir)
    series = run.series()
    (out / "series.csv").write_text(formats.series_to_csv(series))
    res = run.result(0)
    spec_vals = spectral_decompose(res.estimate).eigenvalues
    formats.dump_json(formats.result_to_json(res, {
        "protocol": kind.value, "replication": 0,
        "eigenvalues": [formats.sig9(v) for v in spec_vals]}), out / "reconstruction.json")
    if noise_model is not None:
        formats.dump_json(formats.noise_to_json(noise_model), out / "noise.json")
    last = series.mse_mean[-1]
    log.info("protocol %s: M=%d mse=%s (expected ideal %s)", kind.value, series.M[-1], formats.fmt9(last),
             formats.fmt9(shadow.expected_mse(d, int(series.M[-1]), 1.0)))
    return EXIT_OK


# reconstruct / ingest

def cmd_reconstruct(args) -> int:
    d, snaps = formats.snapshots_from_json(formats.load_json(args.snapshots), args.snapshots)
    est = shadow.reconstruct(snaps, d)
    target = formats.matrix_from_json(formats.load_json(args.target), args.target) if args.target \
        else basis_projector(d, 0)
    if target.shape[0] != d:
        raise DataFormatError(f"{args.target}: target has d={target.shape[0]}, snapshots have d={d}")
    res = shadow.ReconstructionResult(est, len(snaps), target)
    vals = spectral_decompose(est).eigenvalues
    text = formats.dump_json(formats.result_to_json(res, {"eigenvalues": [formats.sig9(v) for v in vals]}))
    _write(text, args.out)
    return EXIT_OK


def cmd_ingest(args) -> int:
    records = formats.read_voltage_csv(args.voltages)
    unitaries = formats.read_unitary_list(args.unitaries)
    try:
        snaps = shadow.snapshots_from_voltages(records, unitaries, args.protocol)
    except KeyError as exc:
        raise DataFormatError(f"{args.voltages}: {exc.args[0]}") from None
    except ValueError as exc:
        raise DataFormatError(str(exc)) from None
    obj = formats.snapshots_to_json(snaps, args.protocol, [r.run_id for r in records])
    _write(formats.dump_json(obj), args.out)
    return EXIT_OK


# analyze

def _leading_eigenvalue(args) -> float:
    sources = [x is not None for x in (args.recon, args.eigenvalues, args.leading)]
    if sum(sources) != 1:
        raise UsageError("give exactly one of --recon, --eigenvalues, --leading")
    if args.leading is not None:
        return args.leading
    if args.eigenvalues is not None:
        vals = _float_list(args.eigenvalues)
        if not vals:
            raise UsageError("--eigenvalues is empty")
        return max(vals)
    res = formats.result_from_json(formats.load_json(args.recon), args.recon)
    return spectral_decompose(res.estimate).leading


def cmd_analyze(args) -> int:
    d = args.d
    if d < 2:
        raise UsageError("--d must be >= 2")
    if (args.series is None) == (args.slope is None):
        raise UsageError("give exactly one of --series, --slope")
    d1 = _leading_eigenvalue(args)
    series = None
    if args.series is not None:
        series = formats.series_from_csv(args.series, d)
        fit = analysis.scaled_error_fit(series)
    else:
        se = args.slope_stderr if args.slope_stderr is not None else float("nan")
        fit = analysis.LinearFit(args.slope, float("nan"), se, float("nan"), float("nan"))
    grid = series.M if series is not None else shadow.default_grid()
    report = analysis.analyze(d, d1, fit, args.lambda1, grid)
    if report.m_crit is None:
        print("no hardware horizon: systematic floor is zero", file=sys.stderr)
    obj = report.to_dict()
    obj["d"] = d
    obj["leading_eigenvalue"] = d1
    _write(formats.dump_json(_round_floats(obj)), args.out)
    if args.csv_out:
        if series is None:
            raise UsageError("--csv-out needs --series")
        lines = ["M,observed_mse,predicted_mse"]
        for (m, pred), obs in zip(report.theory_curve, series.mse_mean):
            lines.append(f"{m},{formats.fmt9(obs)},{formats.fmt9(pred)}")
        Path(args.csv_out).write_text("\n".join(lines) + "\n")
    return EXIT_OK


def _round_floats(obj):
    if isinstance(obj, float):
        return formats.sig9(obj)
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


# verify-weingarten

def weingarten_table(dims, samples: int, seed: int) -> list[dict]:
    rows = []
    patterns = haar.verification_patterns()
    for k, d in enumerate(dims):
        idx = [p for _, p in patterns]
        mean, err = haar.fourth_moment_mc_many(idx, d, samples, RngSeed(seed, k))
        for (label, ix), mu, se in zip(patterns, mean, err):
            exact = float(haar.fourth_moment_analytic(ix, d))
            z = abs(mu - exact) / se if se > 0 else (0.0 if abs(mu - exact) < 1e-15 else float("inf"))
            rows.append({"pattern": label, "d": d, "analytic": exact, "mc_mean": mu, "mc_stderr": float(se),
                         "z_score": float(z)})
    return rows


def cmd_verify_weingarten(args) -> int:
    dims = _int_list(args.d)
    if not dims or min(dims) < 2:
        raise UsageError("Weingarten verification needs every d >= 2")
    if args.samples < 10_000:
        raise UsageError("--samples must be at least 10000")
    rows = weingarten_table(dims, args.samples, args.seed)
    lines = ["pattern,d,analytic,mc_mean,mc_stderr,z_score"]
    for r in rows:
        mu = r["mc_mean"]
        mean_txt = formats.fmt9(mu.real) if abs(mu.imag) < 5e-324 else f"{formats.fmt9(mu.real)}{mu.imag:+.9g}j"
        lines.append(",".join([r["pattern"], str(r["d"]), formats.fmt9(r["analytic"]), mean_txt,
                               formats.fmt9(r["mc_stderr"]), formats.fmt9(r["z_score"])]))
    _write("\n".join(lines) + "\n", args.out)
    worst = max(r["z_score"] for r in rows)
    if worst > 5:
        print(f"Weingarten check failed: max |z| = {worst:.3f} > 5", file=sys.stderr)
        return EXIT_MODEL
    return EXIT_OK


# mesh

def cmd_mesh(args) -> int:
    obj = formats.load_json(args.inp)
    if args.action == "decompose":
        u = formats.matrix_from_json(obj, args.inp)
        try:
            cfg = mesh.decompose_unitary(u)
        except ValueError as exc:
            raise DataFormatError(f"{args.inp}: {exc}") from None
        _write(formats.dump_json(formats.mesh_to_json(cfg)), args.out)
    else:
        cfg = formats.mesh_from_json(obj, args.inp)
        _write(formats.dump_json(formats.matrix_to_json(mesh.compose_mesh(cfg))), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="photoshadow", description="Photonic classical-shadow simulation and analysis.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="simulate a protocol and write series/reconstruction files")
    s.add_argument("--config")
    s.add_argument("--protocol", choices=[p.value for p in shadow.Protocol], default="I")
    s.add_argument("--d", type=int)
    s.add_argument("--M", type=int, default=5000)
    s.add_argument("--grid", help="explicit comma-separated M grid")
    s.add_argument("--grid-min", type=int, default=10)
    s.add_argument("--grid-points", type=int, default=20)
    s.add_argument("--replications", type=int, default=20)
    s.add_argument("--p", type=float)
    s.add_argument("--epsilon", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--randomizer-seed", type=int)
    s.add_argument("--estimator", choices=["intensity", "click"], default="intensity")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("reconstruct", help="reconstruct a state from a snapshots file")
    r.add_argument("--config")
    r.add_argument("--snapshots", required=True)
    r.add_argument("--target")
    r.add_argument("--out")
    r.set_defaults(func=cmd_reconstruct)

    i = sub.add_parser("ingest", help="turn photodiode voltages into snapshots")
    i.add_argument("--config")
    i.add_argument("--voltages", required=True)
    i.add_argument("--unitaries", required=True)
    i.add_argument("--protocol", choices=[p.value for p in shadow.Protocol], default="I")
    i.add_argument("--out")
    i.set_defaults(func=cmd_ingest)

    a = sub.add_parser("analyze", help="extract p, epsilon, floor and M_crit")
    a.add_argument("--config")
    a.add_argument("--d", type=int, required=True)
    a.add_argument("--series")
    a.add_argument("--slope", type=float)
    a.add_argument("--slope-stderr", type=float)
    a.add_argument("--recon")
    a.add_argument("--eigenvalues")
    a.add_argument("--leading", type=float)
    a.add_argument("--lambda1", type=float, default=1.0)
    a.add_argument("--out")
    a.add_argument("--csv-out")
    a.set_defaults(func=cmd_analyze)

    w = sub.add_parser("verify-weingarten", help="Monte-Carlo check of the fourth Haar moments")
    w.add_argument("--config")
    w.add_argument("--d", default="2,4,8")
    w.add_argument("--samples", type=lambda x: int(float(x)), default=1_000_000)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--out")
    w.set_defaults(func=cmd_verify_weingarten)

    m = sub.add_parser("mesh", help="decompose a unitary into mesh phases or compose a mesh")
    m.add_argument("action", choices=["decompose", "compose"])
    m.add_argument("--config")
    m.add_argument("--in", dest="inp", required=True)
    m.add_argument("--out")
    m.set_defaults(func=cmd_mesh)
    ap._subparsers_map = sub.choices
    return ap


def parse_args(argv):
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "config", None):
        sp = ap._subparsers_map[args.command]
        known = {a.dest for a in sp._actions}
        cfg = read_config(args.config)
        unknown = set(cfg) - known
        if unknown:
            raise UsageError(f"{args.config}: unknown keys {', '.join(sorted(unknown))}")
        sp.set_defaults(**cfg)
        args = ap.parse_args(argv)
    return args


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except analysis.ModelInconsistencyError as exc:
        print(f"model inconsistency: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (DataFormatError, DimensionError, ValueError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
