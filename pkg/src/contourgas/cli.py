"""Command line entry point: contourgas <command> --config run.json [--out dir].

Exit codes: 0 success, 1 a check failed or a non-finite number was produced,
2 configuration error.
"""
import argparse
import csv
import hashlib
import json
import math
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .correlators import vertex_mean
from .ensemble import (ChainConfig, GasConfig, beta1_logZ, bbgky_residual, circle_logZ,
                       jump_reality_residual, mcmc_run, smallN_logZ, two_particle,
                       normalization_residuals)
from .expansion import free_energy, internal_consistency, potential_from_json, predict_logZ
from .geometry import GridTooCoarse, LaurentContour, NonUnivalent, build_contour, check_univalence
from .maps import interior_map
from .operators import OperatorSet, fredholm_determinant, identity_residuals, random_band_limited
from .spectral import DeformationBreaksUnivalence, DeformationDirection, surgery_check, variation_harness

BUNDLED = ("circle", "ellipse_q02", "blob")

_pair = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "type": "object",
    "required": ["contour", "grid", "beta"],
    "properties": {
        "contour": {
            "type": "object",
            "required": ["r"],
            "properties": {
                "r": {"type": "number", "exclusiveMinimum": 0},
                "a0": {"oneOf": [{"type": "number"}, _pair]},
                "coeffs": {"type": "array", "items": {"oneOf": [{"type": "number"}, _pair]}},
            },
        },
        "grid": {
            "type": "object",
            "required": ["M"],
            "properties": {"M": {"enum": [32, 64, 128, 256, 512, 1024, 2048]}},
        },
        "beta": {"type": "number", "minimum": 0.1},
        "potential": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["zero", "fourier", "wprime"]},
                "cos": {"type": "array", "items": {"type": "number"}},
                "sin": {"type": "array", "items": {"type": "number"}},
                "const": {"type": "number"},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
        "expand": {
            "type": "object",
            "properties": {"N": {"type": "array", "items": {"type": "integer", "minimum": 1}}},
        },
        "spectrum": {"type": "object"},
        "sample": {
            "type": "object",
            "required": ["N"],
            "properties": {
                "N": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "steps": {"type": "integer", "minimum": 1},
                "burnin": {"type": "integer", "minimum": 0},
                "width": {"type": "number", "exclusiveMinimum": 0},
                "bins": {"type": "integer", "minimum": 1},
                "pair_bins": {"type": "integer", "minimum": 0},
                "probes": {"type": "array", "items": {
                    "type": "array", "minItems": 3, "maxItems": 4,
                    "prefixItems": [{"type": "number"}, {"type": "number"}, {"type": "number"},
                                    {"enum": ["holomorphic", "absolute"]}]}},
            },
        },
        "oracle": {
            "type": "object",
            "required": ["mode", "N"],
            "properties": {
                "mode": {"enum": ["beta1", "smallN", "circle"]},
                "N": {"type": "integer", "minimum": 1},
                "method": {"enum": ["arnoldi", "lu"]},
            },
        },
        "deform": {
            "type": "object",
            "required": ["mode", "eps", "quantity"],
            "properties": {
                "mode": {"oneOf": [{"type": "integer", "minimum": 0}, {"const": "dilation"}]},
                "phase": {"type": "number"},
                "eps": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 2},
                "quantity": {"enum": ["logr", "logdet_ext", "logdet_int", "detIV", "green"]},
                "points": {"type": "array", "items": _pair, "minItems": 2, "maxItems": 2},
                "side": {"enum": ["interior", "exterior"]},
            },
        },
        "verify": {"type": "object"},
    },
}


class ConfigError(ValueError):
    pass


class NonFinite(ValueError):
    pass


# ---------------------------------------------------------------- config plumbing

def bundled_config(name):
    text = resources.files("contourgas").joinpath("configs", name + ".json").read_text()
    return json.loads(text)


def load_config(path):
    p = str(path)
    if p in BUNDLED:
        return bundled_config(p)
    try:
        with open(p) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("malformed JSON in %s: %s" % (p, exc)) from exc
    except OSError as exc:
        raise ConfigError(str(exc)) from exc


def validate(config):
    try:
        jsonschema.Draft202012Validator(SCHEMA).validate(config)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(x) for x in exc.absolute_path) or "<root>"
        raise ConfigError("schema violation at %s: %s" % (path, exc.message)) from exc
    try:
        _assert_finite(config, "config")
    except NonFinite as exc:
        raise ConfigError(str(exc)) from exc


def config_hash(config):
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _assert_finite(obj, where="output"):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _assert_finite(v, "%s.%s" % (where, k))
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _assert_finite(v, "%s[%d]" % (where, i))
    elif isinstance(obj, float) and not math.isfinite(obj):
        raise NonFinite("non-finite value at %s" % where)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer, int)) and not isinstance(x, bool):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _write_json(out, name, payload):
    out.mkdir(parents=True, exist_ok=True)
    with open(out / name, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(out, name, header, rows):
    out.mkdir(parents=True, exist_ok=True)
    for row in rows:
        _assert_finite([float(v) for v in row if not isinstance(v, str)], name)
    with open(out / name, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else repr(float(v)) for v in row])


def _setup(config):
    spec = LaurentContour.from_json(config["contour"])
    W = potential_from_json(config.get("potential"))
    return spec, W, int(config["grid"]["M"]), float(config["beta"])


# ---------------------------------------------------------------- commands

def cmd_expand(config, out):
    spec, W, M, beta = _setup(config)
    grid = build_contour(spec, M)
    res = free_energy(grid, beta, W)
    Ns = config.get("expand", {}).get("N", [8, 16, 32, 64])
    summary = res.summary()
    summary["logZ"] = {str(N): predict_logZ(res, beta, N) for N in Ns}
    rows = [(float(t), float(a), float(b), float(c))
            for t, a, b, c in zip(grid.t, res.rho0, res.rho1, res.rho2)]
    _write_csv(out, "density.csv", ("t", "rho0", "rho1", "rho2"), rows)
    return summary


def cmd_spectrum(config, out):
    spec, _, M, _ = _setup(config)
    grid = build_contour(spec, M)
    ops = OperatorSet(grid, interior_map(grid))
    rep = surgery_check(grid, ops.imap, ops)
    lam = ops.spectrum.eigenvalues
    _write_csv(out, "spectrum.csv", ("index", "lambda", "pair_residual"),
               [(i, x, p) for i, (x, p) in enumerate(zip(lam, ops.spectrum.pair_residuals))])
    return {
        "detIV": fredholm_determinant(ops.spectrum),
        "P": grid.P,
        "log_det_IV": ops.log_det_IV,
        "logdetprimeN": ops.logdetprime_N,
        "max_imag": ops.spectrum.max_imag,
        "max_pair_residual": float(np.max(ops.spectrum.pair_residuals)),
        "surgery": rep.to_json(),
    }


def cmd_sample(config, out):
    spec, W, M, beta = _setup(config)
    s = config["sample"]
    probes = tuple((complex(p[0], p[1]), p[2], p[3] if len(p) > 3 else "holomorphic")
                   for p in s.get("probes", ()))
    chain = ChainConfig(seed=s.get("seed", config.get("seed", 0)), steps=s.get("steps", 100000),
                        burnin=s.get("burnin", 10000), width=s.get("width", 0.5),
                        bins=s.get("bins", 32), pair_bins=s.get("pair_bins", 0), probes=probes)
    gas = GasConfig(spec, beta, s["N"], W)
    st = mcmc_run(gas, chain)
    _write_csv(out, "density.csv", ("t_lo", "t_hi", "density", "stderr"), st.density_csv_rows())
    if st.pair.size:
        n = st.pair.shape[0]
        _write_csv(out, "pair.csv", ("i", "j", "R2"),
                   [(i, j, st.pair[i, j]) for i in range(n) for j in range(n)])
    vert = []
    grid = build_contour(spec, M) if probes else None
    for (p, a, kind), m, e in zip(probes, st.vertex, st.vertex_err):
        pred = vertex_mean(grid, beta, p, a, s["N"], kind)
        vert.append({"point": p, "alpha": a, "kind": kind, "mc": m, "stderr": e, "leading": pred})
    return {"acceptance": st.acceptance, "samples": st.n_samples, "flags": list(st.flags), "vertex": vert}


def cmd_oracle(config, out):
    spec, W, M, beta = _setup(config)
    o = config["oracle"]
    N = o["N"]
    if o["mode"] == "circle":
        if spec.coeffs and any(c != 0 for c in spec.coeffs):
            raise ConfigError("circle oracle needs a contour without Laurent coefficients")
        return {"logZ": circle_logZ(spec.r, beta, N), "error_estimate": 0.0}
    if o["mode"] == "beta1":
        if beta != 1.0:
            raise ConfigError("beta1 oracle needs beta = 1")
        grid = build_contour(spec, M)
        method = o.get("method", "arnoldi")
        val = beta1_logZ(grid, N, W, method)
        grid2 = build_contour(spec, 2 * M)
        return {"logZ": val, "error_estimate": abs(beta1_logZ(grid2, N, W, method) - val)}
    val, err = smallN_logZ(spec, beta, N, W)
    return {"logZ": val, "error_estimate": err}


def cmd_deform(config, out):
    spec, _, M, _ = _setup(config)
    d = config["deform"]
    pts = [complex(*p) for p in d["points"]] if "points" in d else None
    rep = variation_harness(spec, DeformationDirection(d["mode"], d.get("phase", 0.0)), d["quantity"],
                            eps=tuple(d["eps"]), M=M, points=pts, side=d.get("side", "interior"))
    _write_csv(out, "deform.csv", ("eps", "fd_value", "predicted", "mismatch"), rep.rows())
    return {"quantity": rep.quantity, "predicted": rep.predicted, "slope": rep.slope,
            "mismatch": rep.mismatch}


# ---------------------------------------------------------------- verify

def _check(name, residual, tol):
    residual = float(residual)
    ok = math.isfinite(residual) and residual <= tol
    msg = "%s residual %.1e %s %.0e" % (name, residual, "<=" if ok else ">", tol)
    return {"name": name, "residual": residual, "tol": tol, "passed": bool(ok), "message": msg}


def _failed(name, exc):
    return {"name": name, "residual": None, "tol": None, "passed": False,
            "message": "%s failed: %s: %s" % (name, type(exc).__name__, exc)}


def verify_suite(config):
    """Run the invariant checks for one configuration; failures are returned as data."""
    spec, W, M, beta = _setup(config)
    checks = []
    diag = check_univalence(spec)
    checks.append({"name": "univalence", "residual": None, "tol": None, "passed": bool(diag),
                   "message": "univalence: %s" % (diag.reason or "ok")})
    if not diag:
        return checks
    try:
        grid = build_contour(spec, M)
    except (GridTooCoarse, NonUnivalent) as exc:
        checks.append(_failed("grid resolution", exc))
        return checks
    try:
        ops = OperatorSet(grid, interior_map(grid))
        for k, v in identity_residuals(ops, random_band_limited(M, 20, kmax=min(8, M // 8))).items():
            checks.append(_check(k, v, 1e-7))
        checks.append(_check("spectral pairing", np.max(ops.spectrum.pair_residuals), 1e-6))
        checks.append(_check("surgery", abs(surgery_check(grid, ops.imap, ops).surgery_residual), 1e-6))
        for k, v in internal_consistency(grid, beta, W, ops).items():
            checks.append(_check(k, v, 1e-8))
        tp = two_particle(grid, beta, W)
        for k, v in normalization_residuals(tp).items():
            checks.append(_check(k, v, 1e-6))
        checks.append(_check("loop equation (N=2)", bbgky_residual(grid, beta, tp=tp), 1e-5))
        checks.append(_check("stress jump reality (N=2)", jump_reality_residual(grid, beta, tp=tp), 1e-5))
        # steps small enough that the eps^2 / (3 r^3) truncation stays below tolerance
        rep = variation_harness(spec, DeformationDirection("dilation"), "logr",
                                eps=(2e-3 * spec.r, 1e-3 * spec.r, 5e-4 * spec.r), M=M)
        checks.append(_check("log r dilation variation", rep.mismatch[-1], 1e-6))
        checks.append(_check("log r variation slope - 2", abs(rep.slope - 2), 0.1))
        if beta == 1.0 and M >= 256:
            # the beta1 oracle must approach the expansion with an O(1/N) gap
            res = free_energy(grid, beta, W, ops=ops)
            gaps = [abs(beta1_logZ(grid, N, W) - predict_logZ(res, beta, N)) for N in (8, 16, 32)]
            checks.append(_check("beta1 oracle gap at N=32", gaps[-1], 1e-2))
        if spec.K == 0 or all(c == 0 for c in spec.coeffs):
            res = free_energy(grid, beta, W, ops=ops)
            checks.append(_check("circle closed form N=8",
                                 abs(circle_logZ(spec.r, beta, 8) - predict_logZ(res, beta, 8)),
                                 1e-10 if beta == 1.0 else 0.05))
    except (GridTooCoarse, NonUnivalent, DeformationBreaksUnivalence, np.linalg.LinAlgError,
            RuntimeError, ValueError) as exc:
        checks.append(_failed("numerics", exc))
    return checks


def cmd_verify(config, out):
    checks = verify_suite(config)
    rows = [(c["name"], "nan" if c["residual"] is None else repr(c["residual"]), str(c["passed"]))
            for c in checks]
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "verify.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("check", "residual", "passed"))
        w.writerows(rows)
    return {"checks": checks, "passed": all(c["passed"] for c in checks)}


COMMANDS = {
    "expand": cmd_expand,
    "spectrum": cmd_spectrum,
    "sample": cmd_sample,
    "oracle": cmd_oracle,
    "deform": cmd_deform,
    "verify": cmd_verify,
}


def run(command, config, out):
    """Execute one command; returns (exit code, summary dict)."""
    out = Path(out)
    try:
        validate(config)
        if command in ("sample", "oracle", "deform") and command not in config:
            raise ConfigError("config lacks the '%s' block" % command)
        summary = COMMANDS[command](config, out)
    except ConfigError as exc:
        return 2, {"error": str(exc)}
    except (NonUnivalent, GridTooCoarse) as exc:
        return 2, {"error": "%s: %s" % (type(exc).__name__, exc)}
    except NonFinite as exc:
        return 1, {"error": str(exc)}
    summary = _jsonable(summary)
    payload = {"command": command, "version": __version__, "config_hash": config_hash(config),
               "result": summary}
    try:
        _assert_finite(summary, "result")
    except NonFinite as exc:
        payload["error"] = str(exc)
        _write_json(out, "summary.json", _jsonable(payload))
        return 1, payload
    _write_json(out, "summary.json", payload)
    failed = command == "verify" and not summary["passed"]
    return (1 if failed else 0), payload


def main(argv=None):
    ap = argparse.ArgumentParser(prog="contourgas", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True,
                    help="path to a JSON config, or one of: %s" % ", ".join(BUNDLED))
    ap.add_argument("--out", default=None, help="output directory (default: config 'out' or ./out)")
    args = ap.parse_args(argv)
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    out = args.out or (config.get("out") if isinstance(config, dict) else None) or "out"
    code, payload = run(args.command, config, out)
    if "error" in payload:
        print(payload["error"], file=sys.stderr)
    elif args.command == "verify":
        for c in payload["result"]["checks"]:
            print(("PASS " if c["passed"] else "FAIL ") + c["message"])
    else:
        print(json.dumps(payload["result"], sort_keys=True)[:2000])
    return code


if __name__ == "__main__":
    sys.exit(main())
