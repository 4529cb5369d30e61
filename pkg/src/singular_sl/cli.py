"""Command-line front end.

A run is described by ``key=value`` lines (``#`` starts a comment); every
key can also be given as ``--key value`` on the command line, which wins
over the file. The pipeline realizes the potential, factorizes it when
``form=tau_form``, computes spectra and then the command-specific outputs.
All files are written at the end of the run into ``output_dir`` together
with ``report.json`` and ``manifest.json`` (SHA-256 of every file).

Exit codes: 0 success, 1 numerical failure or failed check, 2 bad
configuration.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import warnings
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .errors import (AlignmentError, ConfigError, GridMismatchError, ResolutionError,
                     SpectralError)
from .potentials import PotentialSpec, describe, parse_potential, realize
from .propagator import BCS, FORMS

COMMANDS = ("spectrum", "charfn", "factorize", "asymptotics", "inverse", "selftest")
BC_CHOICES = ("both",) + BCS

EXIT_OK, EXIT_NUMERICAL, EXIT_CONFIG = 0, 1, 2


@dataclass
class RunConfig:
    """Validated run description (defaults applied)."""

    command: str = "spectrum"
    potential: str = "zero"
    h: complex = 0.0
    M: int = 2048
    n_max: int = 64
    form: str = "sigma_form"
    bc: str = "both"
    output_dir: str = "singular_sl_out"
    seed: int = 0
    workers: int | None = None
    n_samples: int = 20_000
    n_terms: int = 5
    lambda_max: float = 40.0
    lambda_points: int = 81
    alpha: float | None = None
    criteria: str = "all"

    @property
    def spec(self) -> PotentialSpec:
        return parse_potential(self.potential, self.h)

    @property
    def bcs(self) -> tuple[str, ...]:
        return BCS if self.bc == "both" else (self.bc,)

    def echo(self) -> dict:
        """The numerical configuration (output location and thread count excluded)."""
        out = asdict(self)
        out.pop("output_dir")
        out.pop("workers")
        out["h"] = [self.h.real, self.h.imag]
        return out


def _to_int(s: str) -> int:
    return int(s)


def _to_optional_int(s: str) -> int | None:
    return None if s.lower() in ("", "none", "auto") else int(s)


def _to_complex(s: str) -> complex:
    return complex(s.replace(" ", ""))


def _to_optional_float(s: str) -> float | None:
    return None if s.lower() in ("", "none") else float(s)


_CONVERTERS: dict[str, tuple[Callable[[str], Any], str]] = {
    "command": (str, "a command name"),
    "potential": (str, "a potential description"),
    "h": (_to_complex, "a complex number"),
    "M": (_to_int, "an integer"),
    "n_max": (_to_int, "an integer"),
    "form": (str, "a system form"),
    "bc": (str, "a boundary condition"),
    "output_dir": (str, "a path"),
    "seed": (_to_int, "an integer"),
    "workers": (_to_optional_int, "an integer"),
    "n_samples": (_to_int, "an integer"),
    "n_terms": (_to_int, "an integer"),
    "lambda_max": (float, "a real number"),
    "lambda_points": (_to_int, "an integer"),
    "alpha": (_to_optional_float, "a real number"),
    "criteria": (str, "a comma-separated list of criterion numbers"),
}
KEYS = tuple(f.name for f in fields(RunConfig))


def _error(key: str, line: int | None, message: str) -> ConfigError:
    """``ConfigError`` that names the line, or the ``--key`` override."""
    return ConfigError(message if line is not None else f"--{key}: {message}", line)


def parse_config(text: str, overrides=()) -> RunConfig:
    """Parse ``key=value`` text, apply ``(key, value)`` overrides and validate.

    Raises:
        ConfigError: unknown key, malformed line, type mismatch or violated
            guard; the message names the offending line (or ``--key``).
    """
    raw: dict[str, tuple[str, int | None]] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected key=value, got {body!r}", number)
        key, value = (part.strip() for part in body.split("=", 1))
        if key not in _CONVERTERS:
            raise ConfigError(f"unknown key {key!r}", number)
        raw[key] = (value, number)
    for key, value in overrides:
        if key not in _CONVERTERS:
            raise _error(key, None, f"unknown key {key!r}")
        raw[key] = (value, None)

    values: dict[str, Any] = {}
    for key, (value, line) in raw.items():
        conv, what = _CONVERTERS[key]
        try:
            values[key] = conv(value)
        except ValueError:
            raise _error(key, line, f"{key} expects {what}, got {value!r}") from None
    cfg = RunConfig(**values)
    _validate(cfg, {k: line for k, (_, line) in raw.items()})
    return cfg


def _validate(cfg: RunConfig, lines: dict[str, int | None]) -> None:
    def fail(key: str, message: str):
        raise _error(key, lines.get(key), message)

    if cfg.command not in COMMANDS:
        fail("command", f"command must be one of {', '.join(COMMANDS)}, got {cfg.command!r}")
    if cfg.form not in FORMS:
        fail("form", f"form must be one of {', '.join(FORMS)}, got {cfg.form!r}")
    if cfg.bc not in BC_CHOICES:
        fail("bc", f"bc must be one of {', '.join(BC_CHOICES)}, got {cfg.bc!r}")
    if cfg.M < 16:
        fail("M", f"M must be at least 16, got {cfg.M}")
    if cfg.n_max < 1:
        fail("n_max", f"n_max must be positive, got {cfg.n_max}")
    if 8 * cfg.n_max > cfg.M:
        key = "n_max" if "n_max" in lines else "M"
        fail(key, f"n_max={cfg.n_max} violates the guard n_max <= M/8 = {cfg.M // 8}")
    if cfg.command == "asymptotics" and cfg.n_max < 32:
        fail("n_max", f"asymptotics needs n_max >= 32, got {cfg.n_max}")
    if cfg.workers is not None and cfg.workers < 1:
        fail("workers", f"workers must be positive, got {cfg.workers}")
    if cfg.n_samples < 2:
        fail("n_samples", f"n_samples must be at least 2, got {cfg.n_samples}")
    if not 1 <= cfg.n_terms <= 5:
        fail("n_terms", f"n_terms must lie in 1..5, got {cfg.n_terms}")
    if cfg.lambda_max < 0.0 or (cfg.command == "charfn" and cfg.lambda_max > 0.5 * cfg.M):
        fail("lambda_max", f"lambda_max must lie in [0, M/2], got {cfg.lambda_max}")
    if cfg.lambda_points < 2:
        fail("lambda_points", f"lambda_points must be at least 2, got {cfg.lambda_points}")
    if cfg.alpha is not None and not 0.0 <= cfg.alpha <= 1.0:
        fail("alpha", f"alpha must lie in [0, 1], got {cfg.alpha}")
    try:
        cfg.spec
    except (ValueError, OSError) as exc:
        fail("potential", str(exc))
    try:
        _criteria(cfg)
    except ValueError:
        fail("criteria", f"criteria must be 'all' or numbers from 1 to 11, got {cfg.criteria!r}")


def _criteria(cfg: RunConfig) -> list[int] | None:
    if cfg.criteria.strip().lower() == "all":
        return None
    nums = sorted({int(p) for p in cfg.criteria.split(",") if p.strip()})
    if not nums or any(not 1 <= n <= 11 for n in nums):
        raise ValueError(cfg.criteria)
    return nums


# ---------------------------------------------------------------------------
# Output collection
# ---------------------------------------------------------------------------
def _json_value(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, dict):
        return {str(k): _json_value(u) for k, u in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(u) for u in v]
    if isinstance(v, np.ndarray):
        return _json_value(v.tolist())
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return _json_value(v.item())
    if isinstance(v, np.complexfloating):
        return [float(v.real), float(v.imag)]
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _dumps(obj) -> str:
    return json.dumps(_json_value(obj), indent=2, sort_keys=True) + "\n"


class _Outputs:
    """Files and report fields gathered during a run, written at the end."""

    def __init__(self):
        self.files: dict[str, str] = {}
        self.results: dict[str, Any] = {}
        self.fitted: dict[str, Any] = {}
        self.tolerances: dict[str, Any] = {}
        self.checks: dict[str, bool] = {}
        self.notes: list[str] = []

    def add(self, name: str, text: str) -> None:
        self.files[name] = text

    def check(self, name: str, passed: bool, tolerance=None) -> None:
        self.checks[name] = bool(passed)
        if tolerance is not None:
            self.tolerances[name] = tolerance


def _write_all(out_dir: Path, outputs: _Outputs, report: dict) -> None:
    files = dict(outputs.files)
    files["report.json"] = _dumps(report)
    manifest = []
    for name in sorted(files):
        data = files[name].encode("utf-8")
        (out_dir / name).write_bytes(data)
        manifest.append({"file": name, "bytes": len(data),
                         "sha256": hashlib.sha256(data).hexdigest()})
    (out_dir / "manifest.json").write_text(_dumps({"files": manifest}), encoding="utf-8")


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------
class _Pipeline:
    """Shared steps: realize, optional factorization, spectra."""

    def __init__(self, cfg: RunConfig, outputs: _Outputs):
        self.cfg = cfg
        self.out = outputs
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            self.sigma = realize(cfg.spec, cfg.M)
        outputs.notes.extend(str(w.message) for w in caught)
        self.factorization = None
        if cfg.form == "tau_form":
            from .factorization import factorize

            self.factorization = factorize(self.sigma)
            self.coeff = self.factorization.tau
            self.shift_C = self.factorization.shift_C
        else:
            self.coeff = self.sigma
            self.shift_C = 0.0
        self._spectra: dict[str, Any] = {}

    def spectrum(self, bc: str):
        """Unshifted spectrum for ``bc`` (cached)."""
        if bc not in self._spectra:
            from .spectrum import locate, unshift

            seq = locate(self.coeff, self.cfg.form, bc, self.cfg.n_max, self.shift_C)
            self._spectra[bc] = (seq, unshift(seq))
        return self._spectra[bc][1]

    def spectrum_checks(self, bc: str) -> None:
        raw = self._spectra[bc][0]
        scale = 1.0 + np.abs(raw.values)
        worst = float(np.max(raw.residuals / scale)) if len(raw) else 0.0
        self.out.results.setdefault("max_scaled_residual", {})[bc] = worst
        self.out.check(f"residual_{bc}", worst <= 1e-9, 1e-9)


def _cmd_spectrum(p: _Pipeline) -> None:
    from .spectrum import remainders

    for bc in p.cfg.bcs:
        seq = p.spectrum(bc)
        p.out.add(f"spectrum_{bc}.csv", seq.to_csv())
        p.out.add(f"remainders_{bc}.csv", remainders(seq).to_csv())
        p.spectrum_checks(bc)
        p.out.results.setdefault("first_values", {})[bc] = [complex(v) for v in seq.values[:5]]
        p.out.results.setdefault("count", {})[bc] = len(seq)
    p.out.results["shift_C"] = p.shift_C


def _table(columns: dict[str, np.ndarray]) -> str:
    names = list(columns)
    rows = [",".join(names)]
    for i in range(len(columns[names[0]])):
        rows.append(",".join(repr(float(columns[n][i])) for n in names))
    return "\n".join(rows) + "\n"


def _cmd_charfn(p: _Pipeline) -> None:
    from .propagator import ShootingSystem

    cfg = p.cfg
    lams = np.linspace(0.0, cfg.lambda_max, cfg.lambda_points)
    system = ShootingSystem(p.coeff, cfg.form)
    series = None
    if cfg.form == "tau_form":
        from .tauseries import build_series

        series = build_series(p.coeff, cfg.n_terms, cfg.n_samples, cfg.seed, cfg.workers)
        for name, f in [(f"tau_{n + 1}", t) for n, t in enumerate(series.tau_n)] + \
                [("tau_plus", series.tau_plus), ("tau_minus", series.tau_minus)]:
            p.out.add(f"{name}.csv", f.to_csv(header={"function": name,
                                                      "N_terms": series.N_terms}))
        p.out.results["tau_norm"] = series.tau_norm
        p.out.results["tail_bound"] = series.tail_bound
        p.out.results["mc_error_bound"] = series.mc_error_bound()
    p.out.results["shift_C"] = p.shift_C
    for bc in cfg.bcs:
        vals = system.char(lams, bc)
        cols = {"lambda": lams, "re": vals.real, "im": vals.imag}
        if series is not None:
            from .tauseries import series_char

            sv = series_char(series, lams, bc)
            cols.update(series_re=sv.real, series_im=sv.imag)
            gap = float(np.max(np.abs(sv - vals)))
            allowed = series.tail_bound + 1e-5
            p.out.results.setdefault("series_gap", {})[bc] = gap
            p.out.check(f"series_{bc}", gap <= allowed, allowed)
        p.out.add(f"charfn_{bc}.csv", _table(cols))


def _cmd_factorize(p: _Pipeline) -> None:
    from .factorization import factorize, min_abs_between_nodes
    from .gridfun import l2_norm

    fr = p.factorization or factorize(p.sigma)
    for name in ("u", "phi", "tau", "tilde_phi"):
        f = getattr(fr, name)
        p.out.add(f"{name}.csv", f.to_csv(header={"function": name, "shift_C": fr.shift_C}))
    p.out.results.update(shift_C=fr.shift_C, riccati_residual=fr.riccati_residual,
                         min_abs_u=min_abs_between_nodes(fr.u.values),
                         phi_at_0=complex(fr.phi.values[0]), tau_l2_norm=l2_norm(fr.tau))
    p.out.check("riccati_residual", fr.riccati_residual <= 1e-6, 1e-6)
    p.out.check("phi_at_0", abs(fr.phi.values[0]) <= 1e-10, 1e-10)


def _alpha(p: _Pipeline) -> float | None:
    if p.cfg.alpha is not None:
        return p.cfg.alpha
    spec = p.cfg.spec
    return None if spec.variant == "zero" else spec.nominal_alpha


def _cmd_asymptotics(p: _Pipeline) -> None:
    from .asymptotics import analyze, gamma_of

    spectra = [p.spectrum(bc) for bc in BCS]
    for bc in BCS:
        p.spectrum_checks(bc)
    alpha = _alpha(p)
    report = analyze(p.sigma, spectra, alpha)
    for lvl in ("leading", "refined"):
        for bc, seq in getattr(report, f"residual_{lvl}").items():
            p.out.add(f"residual_{lvl}_{bc}.csv", seq.to_csv())
    p.out.results.update(report.to_dict())
    p.out.fitted.update({k: (None if math.isinf(v) else float(v))
                         for k, v in report.fitted_exponents.items()})
    if alpha is not None:
        g = gamma_of(alpha)
        need = {"refined": g - 0.2, "leading": min(2.0 * alpha, g) - 0.2}
        for key, fit in report.fitted_exponents.items():
            level = key.split("_")[0]
            p.out.check(f"exponent_{key}", float(fit) >= need[level], need[level])


def _cmd_inverse(p: _Pipeline) -> None:
    from .inverse import reconstruct

    lam, mu = p.spectrum("dirichlet"), p.spectrum("neumann")
    for bc in BCS:
        p.spectrum_checks(bc)
    rec = reconstruct(lam, mu, p.cfg.M, sigma=p.sigma)
    p.out.add("sigma_star.csv", rec.sigma_star.to_csv(header={"function": "sigma_star",
                                                              "n_used": rec.n_used}))
    p.out.add("jumps.json", _dumps({"jumps": [{"position": x, "size": s}
                                              for x, s in rec.detected_jumps]}))
    p.out.results.update(rec.to_dict())
    inside = all(0.0 < x < 1.0 for x, _ in rec.detected_jumps)
    p.out.check("jumps_inside", inside)
    spec = p.cfg.spec
    alpha = _alpha(p)
    if spec.variant == "fourier_random" and alpha is not None and rec.smoothness_gain is not None:
        need = alpha - 0.2
        p.out.check("smoothness_gain", float(rec.smoothness_gain) >= need, need)
        p.out.check("no_spurious_jumps", not rec.detected_jumps)


def _cmd_selftest(cfg: RunConfig, outputs: _Outputs, quiet: bool) -> None:
    from .acceptance import run_checks

    echo = None if quiet else print
    for res in run_checks(_criteria(cfg), echo=echo):
        key = f"criterion_{res.number}"
        outputs.results[key] = res.to_dict()
        outputs.tolerances[key] = res.thresholds
        outputs.check(key, res.passed)
    outputs.add("selftest.txt", "".join(
        f"{'PASS' if r['passed'] else 'FAIL'} {k}\n" for k, r in outputs.results.items()))


_HANDLERS = {
    "spectrum": _cmd_spectrum,
    "charfn": _cmd_charfn,
    "factorize": _cmd_factorize,
    "asymptotics": _cmd_asymptotics,
    "inverse": _cmd_inverse,
}


def run(cfg: RunConfig, quiet: bool = False) -> int:
    """Execute one run; returns the exit code (0, 1 or 2)."""
    def say(msg: str, err: bool = False):
        if not quiet or err:
            print(msg, file=sys.stderr if err else sys.stdout)

    out_dir = Path(cfg.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        say(f"error: output_dir {cfg.output_dir!r} is not writable: {exc}", err=True)
        return EXIT_CONFIG

    outputs = _Outputs()
    status, code, error = "pass", EXIT_OK, None
    try:
        if cfg.command == "selftest":
            _cmd_selftest(cfg, outputs, quiet)
        else:
            _HANDLERS[cfg.command](_Pipeline(cfg, outputs))
    except (ConfigError, ResolutionError, GridMismatchError, AlignmentError) as exc:
        say(f"configuration error: {exc}", err=True)
        return EXIT_CONFIG
    except (SpectralError, ArithmeticError, np.linalg.LinAlgError) as exc:
        status, code, error = "error", EXIT_NUMERICAL, f"{type(exc).__name__}: {exc}"
        say(f"numerical failure: {error}", err=True)
    if code == EXIT_OK and not all(outputs.checks.values()):
        status, code = "fail", EXIT_NUMERICAL
    report = {
        "command": cfg.command,
        "status": status,
        "config_echo": cfg.echo(),
        "potential": describe(cfg.spec),
        "results": outputs.results,
        "fitted_exponents": outputs.fitted,
        "tolerances": outputs.tolerances,
        "pass_fail": outputs.checks,
        "notes": outputs.notes,
    }
    if error is not None:
        report["error"] = error
    _write_all(out_dir, outputs, report)
    failed = [k for k, ok in outputs.checks.items() if not ok]
    say(f"{cfg.command}: {status}" + (f" (failed: {', '.join(failed)})" if failed else "")
        + f"; outputs in {out_dir}")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="singular-sl",
        description="Spectra, asymptotics and inverse reconstruction for Sturm-Liouville "
                    "operators with distributional potentials.")
    parser.add_argument("target", nargs="?",
                        help="a config file of key=value lines, or a command name "
                             f"({', '.join(COMMANDS)})")
    for key in KEYS:
        parser.add_argument(f"--{key}", dest=key, metavar=key.upper(), default=None)
    parser.add_argument("--quiet", action="store_true", help="print errors only")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    text = ""
    overrides = []
    if args.target is not None:
        if args.target in COMMANDS:
            overrides.append(("command", args.target))
        else:
            try:
                text = Path(args.target).read_text(encoding="utf-8")
            except (OSError, UnicodeDecodeError) as exc:
                print(f"error: cannot read config {args.target!r}: {exc}", file=sys.stderr)
                return EXIT_CONFIG
    overrides += [(k, getattr(args, k)) for k in KEYS if getattr(args, k) is not None]
    try:
        cfg = parse_config(text, overrides)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg, quiet=args.quiet)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
