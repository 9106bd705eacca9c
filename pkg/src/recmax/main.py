"""
Records and Champions Command Line
==================================
Reproducible front end for the D-norm evaluators, samplers, record scanner
and Monte Carlo estimators.

Usage:
    python -m recmax.main norm --model logistic:2 --x -3,-4
    python -m recmax.main concurrence --model logistic:2:d=3 --method all --seed 7
    python -m recmax.main records scan --input observations.csv
    python -m recmax.main record-times --copula product:d=2 --n-samples 1000000 --seed 1
    python -m recmax.main champion-dist --model mo:0.5 --diagonal -3:-0.1:10

JSON goes to stdout (or --output); progress lines go to stderr.
Exit codes: 0 success, 2 parse/config error, 3 runtime estimation error.
"""

import argparse
import os
import re
import shlex
import sys
from dataclasses import asdict, dataclass, fields
from functools import partial
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from dotenv import load_dotenv

from . import estimators
from .dnorm import concurrence_closed_form, dual_eval, norm_eval, sample_generators
from .models.copula import CopulaModel, parse_copula
from .models.dependence import DependenceModel, parse_model
from .models.results import (
    ChampionTieError, DataFormatError, EstimationError, ModelError, RecmaxError, round12,
)
from .records import conditional_gap_law_check, pit_transform, scan, stochastic_monotonicity_check
from .samplers import sample_copulas, sample_etas
from .utils.console import print_error, print_info, print_progress, print_step, print_success, set_quiet
from .utils.io import (
    dumps_json, read_observations, table_to_csv, write_record_times_csv, write_samples_csv, write_summary_json,
)
from .utils.parallel import default_chunk_size, make_rng, map_chunks

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

# flags whose values may legitimately start with '-'
_VECTOR_FLAGS = ('--x', '--grid', '--diagonal', '--u-grid')
_NEGATIVE_VALUE = re.compile(r'^-[\d.]')


def load_configuration() -> Dict[str, Any]:
    """Load defaults from the environment (and a .env file when present)"""
    load_dotenv()
    raw_workers = os.getenv('RECMAX_WORKERS', '1')
    try:
        workers = int(raw_workers)
    except ValueError:
        raise ModelError(f"RECMAX_WORKERS must be an integer, got '{raw_workers}'") from None
    if workers < 1:
        raise ModelError("RECMAX_WORKERS must be >= 1")
    return {
        'workers': workers,
        'chunk_size': default_chunk_size(),
    }


@dataclass
class RunConfig:
    """Everything that determines a run's output; echoed under "config"."""
    subcommand: str
    model: Optional[str] = None
    copula: Optional[str] = None
    d: Optional[int] = None
    x: Optional[List[float]] = None
    n: Optional[int] = None
    reps: Optional[int] = None
    n_samples: Optional[int] = None
    seed: Optional[int] = None
    cap: Optional[int] = None
    method: Optional[str] = None
    grid: Optional[List[List[float]]] = None
    input: Optional[str] = None
    output: Optional[str] = None
    format: Optional[str] = None
    chunk_size: Optional[int] = None
    # never part of the echo: values do not depend on it
    workers: int = 1

    def to_dict(self) -> Dict[str, Any]:
        out = {k: v for k, v in asdict(self).items() if v is not None and k != 'workers'}
        return round12(out)


# Argument parsing ---------------------------------------------------------------------

def expand_args_from(argv: Sequence[str]) -> List[str]:
    """Splice ``--args-from FILE`` contents (one flag or flag/value pair per line) into argv"""
    out: List[str] = []
    items = list(argv)
    i = 0
    while i < len(items):
        token = items[i]
        path = None
        if token == '--args-from':
            if i + 1 >= len(items):
                raise ModelError("--args-from needs a file path")
            path = items[i + 1]
            i += 2
        elif token.startswith('--args-from='):
            path = token.split('=', 1)[1]
            i += 1
        else:
            out.append(token)
            i += 1
            continue
        try:
            lines = Path(path).read_text(encoding='utf-8').splitlines()
        except OSError as e:
            raise DataFormatError(f"cannot read --args-from file: {e}") from None
        for line in lines:
            line = line.strip()
            if line and not line.startswith('#'):
                out.extend(shlex.split(line))
    return out


def _join_negative_values(argv: Sequence[str]) -> List[str]:
    out: List[str] = []
    items = list(argv)
    i = 0
    while i < len(items):
        token = items[i]
        if token in _VECTOR_FLAGS and i + 1 < len(items) and _NEGATIVE_VALUE.match(items[i + 1]):
            out.append(f"{token}={items[i + 1]}")
            i += 2
        else:
            out.append(token)
            i += 1
    return out


def parse_vector(text: str) -> List[float]:
    try:
        values = [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{text}' is not a comma-separated list of numbers") from None
    if not values:
        raise argparse.ArgumentTypeError("empty vector")
    return values


def parse_grid(text: str) -> List[List[float]]:
    """Points separated by ';', coordinates by ','"""
    return [parse_vector(part) for part in text.split(';') if part.strip()]


def parse_diagonal(text: str):
    """start:stop:count along the diagonal t * (1, ..., 1)"""
    try:
        start, stop, count = text.split(':')
        return float(start), float(stop), int(count)
    except ValueError:
        raise argparse.ArgumentTypeError(f"diagonal must be start:stop:count, got '{text}'") from None


def positive_int(text: str) -> int:
    try:
        value = int(float(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{text}' is not an integer") from None
    if value < 1 or value != float(text):
        raise argparse.ArgumentTypeError(f"expected a positive integer, got '{text}'")
    return value


def _add_common(parser: argparse.ArgumentParser, samples: bool = True):
    parser.add_argument('--seed', type=int, default=0, help='master seed (default 0)')
    if samples:
        parser.add_argument('--n-samples', type=positive_int, default=100_000, help='Monte Carlo samples')
    parser.add_argument('--workers', type=positive_int, default=None,
                        help='worker processes (default: RECMAX_WORKERS or 1)')
    parser.add_argument('--output', help='write the result to this file instead of stdout')


def _add_model(parser: argparse.ArgumentParser, required: bool = True):
    parser.add_argument('--model', required=required, help='model descriptor, e.g. logistic:2:d=3')
    parser.add_argument('--d', type=positive_int, default=None, help='dimension when the descriptor has none')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='recmax',
        description='Records, champions and D-norms of multivariate i.i.d. observations',
    )
    parser.add_argument('--quiet', action='store_true', help='suppress progress output')
    parser.add_argument('--args-from', help='read additional flags from a file (one per line)')
    sub = parser.add_subparsers(dest='subcommand', required=True)

    for name, help_text in (('norm', 'evaluate the D-norm'), ('dual', 'evaluate the dual D-norm function')):
        p = sub.add_parser(name, help=help_text)
        _add_model(p)
        p.add_argument('--x', type=parse_vector, required=True, help='comma-separated vector')
        p.add_argument('--format', choices=('text', 'json'), default='text')
        if name == 'norm':
            p.add_argument('--mc', action='store_true', help='Monte Carlo estimate from generator draws')
            _add_common(p)

    p = sub.add_parser('sample', help='draw generators, max-stable vectors or copula vectors as CSV')
    _add_model(p, required=False)
    p.add_argument('--copula', help='copula descriptor (instead of --model)')
    p.add_argument('--kind', choices=('generator', 'eta'), default='eta', help='what to draw for --model')
    p.add_argument('--n', type=positive_int, default=1000, help='number of draws')
    _add_common(p, samples=False)

    p = sub.add_parser('concurrence', help='extremal concurrence probability')
    _add_model(p, required=False)
    p.add_argument('--copula', help='copula for the empirical route (default: max-stable copula of --model)')
    p.add_argument('--method', choices=('generator', 'eta', 'empirical', 'all'), default='all')
    p.add_argument('--n', type=positive_int, default=1000, help='observations per replication (empirical)')
    p.add_argument('--reps', type=positive_int, default=10_000, help='replications (empirical)')
    _add_common(p)

    p = sub.add_parser('records', help='scan a data file or simulate record counts')
    p.add_argument('action', choices=('scan', 'simulate'))
    p.add_argument('--input', help='CSV (header x1,...,xd) or NDJSON observations')
    p.add_argument('--pit', help="margins for a probability-integral transform, e.g. 'normal' or 'rank,exponential:2'")
    p.add_argument('--times-output', help='write simple record times as CSV')
    p.add_argument('--copula', help='copula descriptor for simulate')
    p.add_argument('--n', type=positive_int, default=1000, help='stream length for simulate')
    p.add_argument('--reps', type=positive_int, default=1000, help='streams for simulate')
    p.add_argument('--checkpoints', type=parse_vector, help='comma-separated k values')
    p.add_argument('--format', choices=('json', 'csv'), default='json')
    _add_common(p, samples=False)

    p = sub.add_parser('record-times', help='E N(2): tail table and divergence flag')
    p.add_argument('--copula', required=True)
    p.add_argument('--cap', type=positive_int, default=1000, help='largest observed gap')
    p.add_argument('--format', choices=('json', 'csv'), default='json')
    _add_common(p)

    p = sub.add_parser('gap-law', help='geometric gap law or stochastic monotonicity check')
    p.add_argument('--copula', required=True)
    p.add_argument('--check', choices=('geometric', 'monotone'), default='geometric')
    p.add_argument('--n-records', type=positive_int, default=5, help='gaps per sequence')
    p.add_argument('--reps', type=positive_int, default=100_000)
    p.add_argument('--max-category', type=positive_int, default=30)
    _add_common(p, samples=False)

    for name, help_text in (('champion-dist', 'champion survival H_bar_D on a grid'),
                            ('simple-dist', 'simple-record limit df H_D on a grid')):
        p = sub.add_parser(name, help=help_text)
        _add_model(p, required=False)
        p.add_argument('--copula', help='copula for the empirical route')
        p.add_argument('--route', choices=('limit', 'empirical'), default='limit')
        p.add_argument('--grid', type=parse_grid, help="points such as '-1,-0.5;-2,-1'")
        p.add_argument('--diagonal', type=parse_diagonal, help='start:stop:count along t*(1,...,1)')
        p.add_argument('--n', type=positive_int, default=2000, help='observations per replication (empirical)')
        p.add_argument('--reps', type=positive_int, default=10_000, help='replications (empirical)')
        p.add_argument('--format', choices=('json', 'csv'), default='csv')
        _add_common(p)

    p = sub.add_parser('chi-bar', help='tail dependence measure chi_bar(u)')
    p.add_argument('--copula')
    p.add_argument('--input', help='data file (moved to copula scale by ranks)')
    p.add_argument('--u-grid', type=parse_vector, default=[0.9, 0.99, 0.999])
    p.add_argument('--pair', type=parse_vector, default=[1, 2], help='1-based coordinate pair')
    p.add_argument('--format', choices=('json', 'csv'), default='csv')
    _add_common(p)

    p = sub.add_parser('second-record', help='df of the observation at the second simple record')
    p.add_argument('--copula', required=True)
    p.add_argument('--x', type=parse_vector, required=True)
    p.add_argument('--cap', type=positive_int, default=100_000)
    _add_common(p)
    return parser


# Helpers -------------------------------------------------------------------------------------

def _model(args) -> DependenceModel:
    if not args.model:
        raise ModelError(f"{args.subcommand} needs --model")
    return parse_model(args.model, args.d)


def _copula(text: Optional[str], dim: Optional[int] = None) -> CopulaModel:
    if not text:
        raise ModelError("this command needs --copula")
    return parse_copula(text, dim)


def _grid_points(args, dim: int) -> np.ndarray:
    points: List[List[float]] = []
    if args.grid:
        points.extend(args.grid)
    if args.diagonal:
        start, stop, count = args.diagonal
        points.extend([[t] * dim for t in np.linspace(start, stop, count)])
    if not points:
        raise ModelError("give --grid and/or --diagonal")
    for p in points:
        if len(p) != dim:
            raise ModelError(f"grid point {p} does not have dimension {dim}")
    return np.array(points, dtype=float)


def _emit(text: str, output: Optional[str]):
    if output:
        Path(output).write_text(text + ('' if text.endswith('\n') else '\n'), encoding='utf-8')
        print_success(f"wrote {output}")
    else:
        sys.stdout.write(text if text.endswith('\n') else text + '\n')


def _json(payload: Dict[str, Any], config: RunConfig) -> str:
    payload = dict(payload)
    payload['config'] = config.to_dict()
    return dumps_json(payload)


def _generator_chunk(model, size, rng):
    return sample_generators(model, rng, size)


def _eta_chunk(model, size, rng):
    return sample_etas(model, rng, size)


def _copula_chunk(copula, size, rng):
    return sample_copulas(copula, rng, size)


# Commands ------------------------------------------------------------------------------------

def cmd_norm(args, config: RunConfig) -> str:
    # without a d= suffix or --d the vector length fixes the dimension
    model = parse_model(args.model, args.d or len(args.x))
    config.model = model.descriptor
    if args.subcommand == 'norm' and args.mc:
        estimate = estimators.norm_estimate(model, args.x, args.n_samples, args.seed, args.workers)
        config.n_samples, config.seed = args.n_samples, args.seed
        return _json(estimate.to_dict(), config)
    evaluator = norm_eval if args.subcommand == 'norm' else dual_eval
    value = evaluator(model, np.asarray(args.x, dtype=float))
    if args.format == 'json':
        return _json({'value': value}, config)
    return f"{value:#.12g}"


cmd_dual = cmd_norm


def cmd_sample(args, config: RunConfig) -> str:
    if bool(args.model) == bool(args.copula):
        raise ModelError("sample needs exactly one of --model and --copula")
    if args.copula:
        copula = _copula(args.copula, args.d)
        config.copula = copula.descriptor
        fn = partial(_copula_chunk, copula)
    else:
        model = _model(args)
        config.model = model.descriptor
        config.method = args.kind
        fn = partial(_generator_chunk if args.kind == 'generator' else _eta_chunk, model)
    print_progress(f"drawing {args.n} samples")
    draws = map_chunks(fn, args.n, args.seed, args.workers)
    return write_samples_csv(draws)


def cmd_concurrence(args, config: RunConfig) -> str:
    results: Dict[str, Any] = {}
    model = _model(args) if args.model else None
    if model is not None:
        config.model = model.descriptor
    routes = ('generator', 'eta', 'empirical') if args.method == 'all' else (args.method,)
    if model is None and routes != ('empirical',):
        raise ModelError("the generator and eta routes need --model")
    total = len(routes)
    for step, route in enumerate(routes, start=1):
        print_step(step, total, f"{route} route")
        if route == 'generator':
            estimate = estimators.concurrence_via_generator(model, args.n_samples, args.seed, args.workers)
        elif route == 'eta':
            estimate = estimators.concurrence_via_eta(model, args.n_samples, args.seed, args.workers)
        else:
            copula = parse_copula(args.copula, args.d) if args.copula else CopulaModel.max_stable(model)
            config.copula, config.n, config.reps = copula.descriptor, args.n, args.reps
            estimate = estimators.concurrence_empirical(copula, args.n, args.reps, args.seed, args.workers)
        results[route] = estimate.to_dict()
        print_success(f"{route}: {estimate.value:.6g} +- {estimate.std_error:.2g}")
    payload: Dict[str, Any] = {'estimates': results}
    if model is not None:
        closed = concurrence_closed_form(model)
        if closed is not None:
            payload['closed_form'] = closed
    return _json(payload, config)


def _records_scan(args, config: RunConfig) -> str:
    if args.copula:
        raise ModelError("records scan takes --input, not --copula")
    if not args.input:
        raise ModelError("records scan needs --input")
    data = read_observations(args.input)
    if args.pit:
        specs = [s.strip() for s in args.pit.split(',')]
        data = pit_transform(data, specs[0] if len(specs) == 1 else specs)
        print_info(f"applied probability-integral transform ({args.pit})")
    print_progress(f"scanning {data.shape[0]} observations")
    summary = scan(data)
    if args.times_output:
        write_record_times_csv(summary, args.times_output)
        print_success(f"wrote record times to {args.times_output}")
    return write_summary_json(summary, config=config.to_dict())


def _records_simulate(args, config: RunConfig) -> str:
    if args.input:
        raise ModelError("records simulate takes --copula, not --input")
    copula = _copula(args.copula)
    config.copula, config.n, config.reps = copula.descriptor, args.n, args.reps
    checkpoints = [int(k) for k in args.checkpoints] if args.checkpoints else None
    growth = estimators.expected_records_growth(copula, args.n, args.reps, args.seed, checkpoints,
                                                args.workers)
    if args.format == 'csv':
        return table_to_csv(growth.rows)
    return _json(growth.to_dict(), config)


def cmd_records(args, config: RunConfig) -> str:
    config.method = args.action
    return _records_scan(args, config) if args.action == 'scan' else _records_simulate(args, config)


def cmd_record_times(args, config: RunConfig) -> str:
    copula = _copula(args.copula)
    config.copula, config.cap = copula.descriptor, args.cap
    print_progress(f"simulating {args.n_samples} second-record times")
    estimate = estimators.expected_N2(copula, args.n_samples, args.seed, args.cap, args.workers)
    if estimate.divergence_flag:
        criterion = estimate.details['criterion']
        print_info(f"infinite mean ({criterion['source']}: {criterion['reason']}); value is the truncated mean")
    if args.format == 'csv':
        return table_to_csv(estimate.details['tail'])
    return _json(estimate.to_dict(), config)


def cmd_gap_law(args, config: RunConfig) -> str:
    copula = _copula(args.copula)
    config.copula, config.reps, config.method = copula.descriptor, args.reps, args.check
    rng = make_rng(args.seed)
    if args.check == 'geometric':
        report = conditional_gap_law_check(copula, args.n_records, args.reps, rng,
                                           max_category=args.max_category)
    else:
        report = stochastic_monotonicity_check(copula, args.n_records, args.reps, rng)
    if report.passed:
        print_success(f"{args.check} check passed")
    else:
        print_error(f"{args.check} check failed")
    return _json(report.to_dict(), config)


def _distribution_grid(args, config: RunConfig, limit_fn, empirical_fn) -> str:
    config.method = args.route
    if args.route == 'limit':
        source = _model(args)
        config.model = source.descriptor
    else:
        source = _copula(args.copula, args.d)
        config.copula, config.n, config.reps = source.descriptor, args.n, args.reps
    points = _grid_points(args, source.dim)
    config.grid = points.tolist()
    rows = []
    for i, x in enumerate(points, start=1):
        if args.route == 'limit':
            estimate = limit_fn(source, x, args.n_samples, args.seed, workers=args.workers)
        else:
            estimate = empirical_fn(source, x, args.n, args.reps, args.seed, workers=args.workers)
        print_progress(f"[{i}/{len(points)}] x={x.tolist()}: {estimate.value:.6g}")
        row = {f"x{j + 1}": v for j, v in enumerate(x)}
        row.update({'value': estimate.value, 'std_error': estimate.std_error})
        rows.append(row)
    if args.format == 'csv':
        return table_to_csv(rows)
    return _json({'rows': rows}, config)


def cmd_champion_dist(args, config: RunConfig) -> str:
    return _distribution_grid(args, config, estimators.champion_survival,
                              estimators.champion_survival_empirical)


def cmd_simple_dist(args, config: RunConfig) -> str:
    return _distribution_grid(args, config, estimators.simple_record_limit_df,
                              estimators.simple_record_df_empirical)


def cmd_chi_bar(args, config: RunConfig) -> str:
    if bool(args.copula) == bool(args.input):
        raise ModelError("chi-bar needs exactly one of --copula and --input")
    pair = [int(p) - 1 for p in args.pair]
    if args.copula:
        copula = _copula(args.copula)
        config.copula = copula.descriptor
        table = estimators.chi_bar(copula, args.u_grid, args.n_samples, args.seed, pair, args.workers)
    else:
        table = estimators.chi_bar(read_observations(args.input), args.u_grid, pair=pair)
    config.grid = [list(args.u_grid)]
    if args.format == 'csv':
        return table_to_csv(table.rows)
    return _json(table.to_dict(), config)


def cmd_second_record(args, config: RunConfig) -> str:
    copula = _copula(args.copula)
    config.copula, config.cap = copula.descriptor, args.cap
    estimate = estimators.second_record_df(copula, args.x, args.n_samples, args.seed, args.cap,
                                           workers=args.workers)
    return _json(estimate.to_dict(), config)


COMMANDS = {
    'norm': cmd_norm,
    'dual': cmd_dual,
    'sample': cmd_sample,
    'concurrence': cmd_concurrence,
    'records': cmd_records,
    'record-times': cmd_record_times,
    'gap-law': cmd_gap_law,
    'champion-dist': cmd_champion_dist,
    'simple-dist': cmd_simple_dist,
    'chi-bar': cmd_chi_bar,
    'second-record': cmd_second_record,
}


def _run_config(args, env: Dict[str, Any]) -> RunConfig:
    config = RunConfig(subcommand=args.subcommand, workers=args.workers)
    names = {f.name for f in fields(RunConfig)}
    for key in ('d', 'x', 'n_samples', 'seed', 'input', 'output', 'format'):
        if key in names and getattr(args, key, None) is not None:
            setattr(config, key, getattr(args, key))
    config.chunk_size = env['chunk_size']
    return config


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Command-line entry point; returns the process exit code"""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _join_negative_values(expand_args_from(argv))
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    except RecmaxError as e:
        print_error(str(e))
        return EXIT_CONFIG
    set_quiet(args.quiet)
    try:
        env = load_configuration()
        if getattr(args, 'workers', None) is None:
            args.workers = env['workers']
        config = _run_config(args, env)
        text = COMMANDS[args.subcommand](args, config)
        _emit(text, getattr(args, 'output', None))
        return EXIT_OK
    except (EstimationError, ChampionTieError) as e:
        print_error(str(e))
        return EXIT_RUNTIME
    except (ValueError, ModelError, DataFormatError) as e:
        print_error(str(e))
        return EXIT_CONFIG
    except RecmaxError as e:
        print_error(str(e))
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        print_error("cancelled by user (Ctrl+C)")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
