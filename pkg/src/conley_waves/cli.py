"""``conley-waves`` command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 hypotheses not met (``check`` only).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__, io
from .config import ConfigError, load_config
from .existence import NoConvergence, NoUnstableDirection, PreconditionError
from .expressions import ExpressionError
from .pipeline import COMMANDS
from .semiflow import BlowUpError, CertificateInapplicable
from .spectral import EigenSolverError, SpectralWindowError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_HYPOTHESES = 0, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="conley-waves", description="Standing-wave existence checks for 1D Schrödinger problems.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, type=Path, help="YAML run configuration")
    ap.add_argument("--out", type=Path, default=None, help="output directory (default: the config's 'output')")
    ap.add_argument("--workers", type=int, default=1, help="worker processes for sweep")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed (unsigned 64-bit)")
    return ap


def _error_payload(exc: BaseException, command: str) -> tuple[int, dict]:
    info: dict = {"command": command, "error_type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        code, reason = EXIT_CONFIG, "config_error"
        info.update(line=exc.line, column=exc.column, path=exc.path)
    elif isinstance(exc, ExpressionError):
        code, reason = EXIT_CONFIG, "config_error"
        info.update(expression=exc.source, column=exc.column)
    elif isinstance(exc, PreconditionError):
        code = EXIT_HYPOTHESES if command == "check" else EXIT_CONFIG
        reason = "hypotheses_not_met" if command == "check" else "config_error"
    elif isinstance(exc, BlowUpError):
        code, reason = EXIT_NUMERICAL, "blow_up"
        info.update(t=exc.t, norm=exc.norm, ceiling=exc.ceiling)
    elif isinstance(exc, NoConvergence):
        code, reason = EXIT_NUMERICAL, "no_convergence"
        info.update(residual=exc.residual)
    elif isinstance(exc, (EigenSolverError, SpectralWindowError, CertificateInapplicable, NoUnstableDirection,
                          ArithmeticError)):
        code, reason = EXIT_NUMERICAL, "numerical_failure"
    else:
        raise exc
    info["reason"] = reason
    info["exit_code"] = code
    return code, info


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    if args.workers < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    started = io.utc_now()
    config_text = ""
    out = args.out
    try:
        cfg, config_text = load_config(args.config)
        cfg = cfg.with_seed(args.seed)
        out = Path(cfg.output) if out is None else out
    except (ConfigError, OSError) as exc:
        out = out or Path("out")
        if isinstance(exc, OSError):
            exc = ConfigError(f"cannot read config: {exc}")
        code, info = _error_payload(exc, args.command)
        _finish(out, args, config_text, started, 0, error=info)
        print(f"error: {exc}", file=sys.stderr)
        return code
    out.mkdir(parents=True, exist_ok=True)
    try:
        func = COMMANDS[args.command]
        outcome = func(cfg, out, args.workers) if args.command == "sweep" else func(cfg, out)
        code = outcome.exit_code
    except Exception as exc:  # mapped to the exit-code contract, re-raised otherwise
        code, info = _error_payload(exc, args.command)
        _finish(out, args, config_text, started, cfg.seed, error=info)
        print(f"error: {exc}", file=sys.stderr)
        return code
    _finish(out, args, config_text, started, cfg.seed)
    if code == EXIT_HYPOTHESES:
        print("hypotheses not met; see verdict.json", file=sys.stderr)
    return code


def _finish(out: Path, args, config_text: str, started: str, seed: int, error: dict | None = None):
    out.mkdir(parents=True, exist_ok=True)
    if error is not None:
        io.write_json(out / "error.json", error)
    io.write_manifest(out, config_text=config_text, config_path=args.config if Path(args.config).is_file() else None,
                      version=__version__, command=args.command, started=started, seed=seed)


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
