#!/usr/bin/env python3
"""
bscalc CLI
Runs one verification command on built-in or user symbols and writes the report
"""

import argparse
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from config import ConfigError, get_config, load_tolerances
from exceptions import USAGE_ERRORS, BilinearCalculusError, ValidationError
from logging_config import setup_logging
from orchestrator import COMMANDS, Orchestrator, SuiteContext
from report import VERSION, Status, write_report
from symbols import SymbolExpr, builtin_family, load_symbol_spec

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INDETERMINATE = 2
EXIT_USAGE = 64
EXIT_INTERRUPTED = 130

EXIT_CODES = {
    Status.PASS: EXIT_PASS,
    Status.FAIL: EXIT_FAIL,
    Status.INDETERMINATE: EXIT_INDETERMINATE,
}


def parse_key_values(items: Optional[Sequence[str]], flag: str) -> Dict[str, str]:
    """'key=value' strings into a dict; values stay strings"""
    parsed = {}
    for item in items or []:
        key, sep, value = item.partition('=')
        if not sep or not key.strip():
            raise ValidationError(f"{flag} expects key=value, got '{item}'", field=flag)
        parsed[key.strip()] = value.strip()
    return parsed


@dataclass
class RunConfig:
    """One validated command invocation"""
    command: str
    symbol_paths: List[str] = field(default_factory=list)
    family: Optional[str] = None
    family_params: Dict[str, str] = field(default_factory=dict)
    dim: int = 1
    half_period: float = float(np.pi)
    grid_points: Optional[int] = None
    tolerance_overrides: Dict[str, str] = field(default_factory=dict)
    seed: int = 0
    output_dir: str = 'reports'
    log_level: str = 'INFO'
    options: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command '{self.command}'", field='command')
        if self.dim not in (1, 2):
            raise ValidationError(f"--dim must be 1 or 2, got {self.dim}", field='dim')
        if not self.half_period > 0:
            raise ValidationError(f"--half-period must be positive, got {self.half_period}", field='half_period')
        n = self.grid_points
        if n is not None and (n < 8 or n & (n - 1)):
            raise ValidationError(f"--grid-points must be a power of two >= 8, got {n}", field='grid_points')
        if self.seed < 0:
            raise ValidationError(f"--seed must be nonnegative, got {self.seed}", field='seed')
        if self.family_params and not self.family:
            raise ValidationError("--param needs --family", field='param')
        self._validate_options()

    def _validate_options(self):
        minimum = {'max_order': 0, 'expand': 1, 'trials': 1, 'M': 0}
        for key, low in minimum.items():
            value = self.options.get(key)
            if value is not None and value < low:
                raise ValidationError(f"--{key.replace('_', '-')} must be at least {low}, got {value}", field=key)
        for m in self.options.get('m') or []:
            if m < 0:
                raise ValidationError(f"--m must be nonnegative, got {m}", field='m')
        exponents = [self.options.get(k) for k in ('p', 'q', 'r')]
        if any(e is not None for e in exponents) and any(e is None for e in exponents):
            raise ValidationError("--p, --q and --r go together", field='p')

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> 'RunConfig':
        options = {
            'max_order': args.max_order,
            'which': args.which,
            'expand': args.expand,
            'M': args.M,
            'm': args.m,
            'p': args.p,
            'q': args.q,
            'r': args.r,
            'trials': args.trials,
        }
        return cls(
            command=args.command,
            symbol_paths=list(args.symbol or []),
            family=args.family,
            family_params=parse_key_values(args.param, '--param'),
            dim=args.dim,
            half_period=args.half_period,
            grid_points=args.grid_points,
            tolerance_overrides=parse_key_values(args.tolerance, '--tolerance'),
            seed=args.seed,
            output_dir=args.output_dir,
            log_level=args.log_level,
            options={k: v for k, v in options.items() if v is not None},
        )

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def load_symbols(run_config: RunConfig) -> List[SymbolExpr]:
    """Symbols from spec files, then the --family one"""
    symbols = []
    for path in run_config.symbol_paths:
        if not Path(path).is_file():
            raise FileNotFoundError(f"Symbol file not found: {path}")
        symbols.append(load_symbol_spec(path, dim=run_config.dim))
    if run_config.family:
        params = {}
        for key, value in run_config.family_params.items():
            try:
                params[key] = float(value)
            except ValueError:
                raise ValidationError(f"--param {key} must be a number, got '{value}'", field='param')
        symbols.append(builtin_family(run_config.family, params, dim=run_config.dim))
    return symbols


def build_parser() -> argparse.ArgumentParser:
    config = get_config()
    parser = argparse.ArgumentParser(
        prog='bscalc',
        description='Numerical verification of the bilinear pseudodifferential calculus BS^m_{rho,delta}',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Seminorm report of a symbol file
  python cli.py verify-class --symbol identity.json --max-order 2

  # First transpose with a two-term expansion
  python cli.py transpose --family derivative_xi --which 1 --expand 2

  # Norm sweep at fixed exponents
  python cli.py bounds --family elliptic --param m=1 --p 4 --q 4 --r 2

  # Every acceptance check on the built-ins
  python cli.py full-suite --seed 7 --output-dir out/
        """
    )
    parser.add_argument('command', choices=COMMANDS, help='Verification command')
    parser.add_argument('--version', action='version', version=f"%(prog)s {VERSION}")

    symbol_group = parser.add_argument_group('Symbols')
    symbol_group.add_argument('--symbol', action='append', metavar='PATH',
                              help='Symbol spec file (JSON); repeatable')
    symbol_group.add_argument('--family', help='Built-in family name')
    symbol_group.add_argument('--param', action='append', metavar='KEY=VALUE',
                              help='Built-in family parameter; repeatable')

    grid_group = parser.add_argument_group('Grid')
    grid_group.add_argument('--dim', type=int, default=1, help='Spatial dimension, 1 or 2 (default: 1)')
    grid_group.add_argument('--grid-points', type=int,
                            help='Points per axis, a power of two (default: per command)')
    grid_group.add_argument('--half-period', type=float, default=float(np.pi),
                            help='Half period L of the box [-L, L) (default: pi)')

    command_group = parser.add_argument_group('Command options')
    command_group.add_argument('--max-order', type=int, help='Largest derivative order for seminorms')
    command_group.add_argument('--which', choices=['1', '2', 'both'], help='Transpose index')
    command_group.add_argument('--expand', type=int, help='Number of expansion terms N')
    command_group.add_argument('--M', type=int, help='Kernel derivative order')
    command_group.add_argument('--m', type=float, action='append', help='Leibniz order; repeatable')
    command_group.add_argument('--p', type=float, help='Exponent of the first argument')
    command_group.add_argument('--q', type=float, help='Exponent of the second argument')
    command_group.add_argument('--r', type=float, help='Exponent of the output')
    command_group.add_argument('--trials', type=int, help='Witness pairs per dilation scale')

    run_group = parser.add_argument_group('Run settings')
    run_group.add_argument('--tolerance', action='append', metavar='KEY=VALUE',
                           help='Override a tolerance; repeatable')
    run_group.add_argument('--seed', type=int, default=config.seed,
                           help=f"Random seed (default: {config.seed})")
    run_group.add_argument('--output-dir', default=config.output_dir,
                           help=f"Report directory (default: $BSCALC_OUTPUT_DIR or {config.output_dir})")
    run_group.add_argument('--log-level', default=config.log_level,
                           choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], type=str.upper,
                           help=f"Log level (default: {config.log_level})")
    return parser


def execute(run_config: RunConfig) -> int:
    """Load inputs, run the command, write the report; returns the exit status"""
    tolerances = load_tolerances(run_config.tolerance_overrides)
    symbols = load_symbols(run_config)
    context = SuiteContext(
        seed=run_config.seed,
        tolerances=tolerances,
        dim=run_config.dim,
        half_period=run_config.half_period,
        grid_points=run_config.grid_points,
        symbols=symbols,
        options=run_config.options,
        workers=get_config().workers,
    )
    echo = {'run': run_config.to_dict(), 'tolerances': tolerances}
    report = Orchestrator(context).run(run_config.command, echo)
    written = write_report(report, run_config.output_dir)

    counts = report.summary()
    mark = {Status.PASS: '✓', Status.FAIL: '✗', Status.INDETERMINATE: '?'}[report.status]
    print(f"{mark} {run_config.command}: {report.status.value} "
          f"({counts['pass']} pass, {counts['fail']} fail, {counts['indeterminate']} indeterminate)")
    print(f"  report: {written[0]}")
    for path in written[1:]:
        print(f"  curve:  {path}")
    if report.error:
        print(f"  error:  {report.error['error']}: {report.error['message']}", file=sys.stderr)
    return EXIT_CODES[report.status]


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on bad usage, which would read as indeterminate
        return EXIT_USAGE if e.code else EXIT_PASS

    try:
        run_config = RunConfig.from_args(args)
        setup_logging(run_config.log_level)
        return execute(run_config)
    except (ConfigError, *USAGE_ERRORS) as e:
        print(f"usage error: {getattr(e, 'message', e)}", file=sys.stderr)
        return EXIT_USAGE
    except BilinearCalculusError as e:
        print(f"error [{e.error_code}]: {e.message}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as e:
        path = getattr(e, 'filename', None)
        print(f"file error: {e}" + (f" ({path})" if path and str(path) not in str(e) else ''), file=sys.stderr)
        return EXIT_FAIL
    except KeyboardInterrupt:
        print("\nOperation cancelled by user", file=sys.stderr)
        return EXIT_INTERRUPTED


def main():
    sys.exit(run())


if __name__ == '__main__':
    main()
