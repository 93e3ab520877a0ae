"""
Command-line entry point. Every command reads its parameters from one resolved configuration:
src/defaults.cfg, then --config FILE, then LRV_<KEY> environment variables, then command-line flags.

Exit status: 0 on success, 2 for usage and configuration errors, 1 when the computation itself fails.
"""
import argparse
import configparser
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field as dataclass_field
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd

from errors import ConfigError, FieldVarianceError, UsageError
from estimators import NO_CUT, CutKind, CutRule, lrv_estimate_centered, threshold_lrv
from experiments import PRESETS, preset
from inference import DEFAULT_TEST_M, format_vector, image_test
from models import MODEL_NAMES, model_from_params, simulate
from subsampling import (STATISTIC_NAMES, STOP_ON_ACCEPT, STOP_ON_REJECT, STOP_RULES, SubsampleGrid,
                         alpha_grid_range, empirical_distribution, enumerate_blocks, make_statistic,
                         select_m_detailed, subsample_values, tune_alpha_detailed)
from util.field_io import FLOAT_FORMAT, format_csv, read_field, write_field
from util.grid import Field
from util.kernels import KernelSpec
from util.logging_utils import get_logger, set_level
from util.rng import SeedSpec, fresh_seed

LOGGER = get_logger('cli')

DEFAULTS_PATH = Path(__file__).absolute().parent / 'defaults.cfg'
ENV_PREFIX = 'LRV_'

SECTIONS = {
    'Estimator': ('m', 'kernel', 'qs_bandwidth', 'cut', 'alpha', 'delta', 'cut_constant', 'center'),
    'Subsampling': ('gamma', 'block', 'stride', 'confidence', 'm_max', 'stop_rule', 'stat', 'quantiles', 'k',
                    'alpha_max', 'alpha_step', 'tolerance'),
    'Model': ('model', 'shape', 'a', 'a5', 'a1', 'a2', 'a3', 'rho', 'order', 'rho_t'),
    'Run': ('seed', 'threads', 'reps', 'format', 'level', 'log_level', 'quiet'),
}
KNOWN_KEYS = tuple(key for keys in SECTIONS.values() for key in keys)
CENTER_MODES = ('none', 'global-mean', 'temporal')
FORMATS = ('csv', 'json')
LOG_LEVELS = ('debug', 'info', 'warning', 'error', 'critical')


def flag_for(key: str) -> str:
    return '--' + key.replace('_', '-')


@dataclass
class RunConfig:
    """The resolved parameters of one invocation. Values stay strings until a command asks for a typed one."""
    command: Optional[str] = None
    params: Dict[str, str] = dataclass_field(default_factory=dict)
    input: Optional[str] = None
    output: Optional[str] = None
    reference: Optional[str] = None
    table: Optional[str] = None
    seed: Optional[int] = None

    def text(self, key: str, default: str = None) -> Optional[str]:
        value = self.params.get(key, '')
        value = value.strip() if value is not None else ''
        return default if value == '' else value

    def _typed(self, key: str, convert: Callable[[str], Any], what: str, default=None):
        value = self.text(key)
        if value is None:
            return default
        try:
            return convert(value)
        except ValueError:
            raise UsageError(flag_for(key), f"expected {what}, got '{value}'") from None

    def integer(self, key: str, default: int = None) -> Optional[int]:
        return self._typed(key, int, 'an integer', default)

    def real(self, key: str, default: float = None) -> Optional[float]:
        def finite(v):
            x = float(v)
            if not math.isfinite(x):
                raise ValueError
            return x
        return self._typed(key, finite, 'a finite number', default)

    def vector(self, key: str, default: Tuple[int, ...] = None) -> Optional[Tuple[int, ...]]:
        return self._typed(key, lambda v: tuple(int(x) for x in v.split(',')), 'comma-separated integers', default)

    def reals(self, key: str) -> Optional[List[float]]:
        return self._typed(key, lambda v: [float(x) for x in v.split(',')], 'comma-separated numbers')

    def boolean(self, key: str, default: bool = False) -> bool:
        def convert(v):
            lowered = v.lower()
            if lowered in ('1', 'true', 'yes', 'on'):
                return True
            if lowered in ('0', 'false', 'no', 'off'):
                return False
            raise ValueError
        return self._typed(key, convert, 'true or false', default)

    def choice(self, key: str, choices, default: str = None) -> str:
        value = self.text(key, default)
        if value is None or value.lower() not in choices:
            raise UsageError(flag_for(key), f"expected one of {'|'.join(choices)}, got '{value}'")
        return value.lower()

    def required(self, value, key: str):
        if value is None:
            raise UsageError(flag_for(key), "is required for this command")
        return value

    def echo(self) -> Dict[str, str]:
        return {f"config.{key}": self.text(key) for key in KNOWN_KEYS if self.text(key) is not None}


def read_config_file(path, params: Dict[str, str]):
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as f:
            parser.read_file(f, source=str(path))
    except configparser.MissingSectionHeaderError as e:
        raise ConfigError(f"{path}: expected a [Section] header before '{e.line.strip()}'", line=e.lineno) from None
    except configparser.ParsingError as e:
        line, text = e.errors[0]
        raise ConfigError(f"{path}: cannot parse '{text.strip()}'", line=line) from None
    except configparser.Error as e:
        raise ConfigError(f"{path}: {e.message}", line=getattr(e, 'lineno', None)) from None
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e.strerror}") from None
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{path}: unknown section [{section}]", key=section)
        for key, value in parser.items(section):
            if key not in SECTIONS[section]:
                raise ConfigError(f"{path}: unknown key '{key}' in [{section}]", key=key)
            params[key] = value


def load_config(path=None, env: Mapping[str, str] = None) -> RunConfig:
    """Shipped defaults, then the given file, then LRV_<KEY> environment variables."""
    params: Dict[str, str] = {}
    read_config_file(DEFAULTS_PATH, params)
    if path is not None:
        read_config_file(path, params)
    env = os.environ if env is None else env
    for key in KNOWN_KEYS:
        value = env.get(ENV_PREFIX + key.upper())
        if value is not None:
            params[key] = value
    return RunConfig(params=params)


def apply_flags(config: RunConfig, args: argparse.Namespace):
    for key in KNOWN_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            config.params[key] = str(value)
    config.command = args.command
    config.input = getattr(args, 'input', None)
    config.output = getattr(args, 'out', None)
    config.reference = getattr(args, 'reference', None)
    config.table = getattr(args, 'table', None)


def resolve_seed(config: RunConfig) -> int:
    seed = config.integer('seed')
    if seed is None:
        seed = fresh_seed()
        LOGGER.info("no seed given, drew %d", seed)
    elif seed < 0:
        raise UsageError('--seed', f"must be >= 0, got {seed}")
    config.seed = seed
    return seed


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)


def _format_meta(value) -> str:
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % value
    return str(value)


def render(frame: pd.DataFrame, metadata: Dict[str, Any], fmt: str) -> str:
    """CSV with trailing `# key=value` metadata lines, or one JSON object holding metadata and rows."""
    if fmt == 'json':
        return json.dumps({'metadata': metadata, 'rows': frame.to_dict(orient='records')}, indent=2,
                          default=_json_default) + '\n'
    body = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return body + ''.join(f"# {k}={_format_meta(v)}\n" for k, v in metadata.items())


def _input_field(config: RunConfig, key: str = 'input') -> Field:
    path = config.input if key == 'input' else config.reference
    if path is None:
        raise UsageError(flag_for(key), "is required for this command")
    if not Path(path).is_file():
        raise UsageError(flag_for(key), f"no such file: {path}")
    return read_field(path)


def _check_m(m: Tuple[int, ...], shape: Tuple[int, ...], what: str = 'the field shape', key: str = 'm'):
    if len(m) != len(shape):
        raise UsageError(flag_for(key), f"m={m} has {len(m)} components but {what} {shape} has {len(shape)}")
    if any(mi < 0 for mi in m):
        raise UsageError(flag_for(key), f"m={m} must be componentwise >= 0")
    if any(mi >= n for mi, n in zip(m, shape)):
        raise UsageError(flag_for(key), f"m={m} must be componentwise smaller than {what} {shape}")


def _kernel(config: RunConfig) -> KernelSpec:
    try:
        return KernelSpec.from_name(config.text('kernel', 'constant'), config.real('qs_bandwidth', 0.0))
    except ValueError as e:
        raise UsageError('--kernel', str(e)) from None


def _cut_rule(config: RunConfig) -> CutRule:
    try:
        return CutRule.from_name(config.text('cut', 'none'), config.real('alpha', 0.0),
                                 config.real('delta', 1e-4), config.real('cut_constant', 0.0))
    except ValueError as e:
        raise UsageError('--cut', str(e)) from None


def _grid(config: RunConfig, field: Field) -> SubsampleGrid:
    try:
        block = config.vector('block')
        stride = config.vector('stride')
        if block is not None:
            grid = SubsampleGrid(block, stride)
        else:
            grid = SubsampleGrid.from_gamma(field.shape, config.real('gamma', 0.9), stride)
        grid.validate(field.shape)
    except ValueError as e:
        raise UsageError('--block' if config.text('block') else '--gamma', str(e)) from None
    return grid


def _fraction(config: RunConfig, key: str, default: float) -> float:
    value = config.real(key, default)
    if not 0.0 < value < 1.0:
        raise UsageError(flag_for(key), f"must lie in (0, 1), got {value}")
    return value


def _m_max(config: RunConfig, grid: SubsampleGrid) -> Optional[int]:
    m_max = config.integer('m_max')
    if m_max is not None and not 1 <= m_max < min(grid.b):
        raise UsageError('--m-max', f"must satisfy 1 <= m_max < min(b) = {min(grid.b)}, got {m_max}")
    return m_max


def cmd_simulate(config: RunConfig) -> str:
    try:
        spec = model_from_params(config.params)
    except ValueError as e:
        raise UsageError('--model', str(e)) from None
    shape = config.required(config.vector('shape'), 'shape')
    if len(shape) != spec.q or any(n < 1 for n in shape):
        raise UsageError('--shape', f"{spec.describe()} needs {spec.q} positive dimensions, got {shape}")
    seed = resolve_seed(config)
    field = simulate(spec, shape, SeedSpec(seed))
    metadata = {'model': spec.describe(), 'shape': format_vector(shape), 'seed': seed}
    if config.output is None:
        return format_csv(field) + ''.join(f"# {k}={v}\n" for k, v in metadata.items())
    write_field(field, config.output)
    return render(pd.DataFrame([{'path': config.output}]), metadata, config.choice('format', FORMATS))


def _estimate(config: RunConfig, with_cut: bool) -> str:
    field = _input_field(config)
    m = config.required(config.vector('m'), 'm')
    _check_m(m, field.shape)
    kernel = _kernel(config)
    rule = _cut_rule(config) if with_cut else NO_CUT
    center = config.choice('center', CENTER_MODES, 'none')
    if center == 'temporal':
        estimate = lrv_estimate_centered(field, m, kernel, rule)
    else:
        estimate = threshold_lrv(field, m, kernel, rule, center=center == 'global-mean')
    frame = pd.DataFrame(np.atleast_2d(estimate.sigma2), columns=[f"c{j}" for j in range(field.p)])
    metadata = {'shape': format_vector(field.shape), 'p': field.p, 'm': format_vector(m), 'kernel': kernel.name,
                'cut': rule.name, 'center': center, 'kept_lags': estimate.kept_lags}
    metadata.update(config.echo())
    return render(frame, metadata, config.choice('format', FORMATS))


def cmd_estimate(config: RunConfig) -> str:
    return _estimate(config, with_cut=False)


def cmd_threshold_estimate(config: RunConfig) -> str:
    return _estimate(config, with_cut=True)


def cmd_subsample(config: RunConfig) -> str:
    field = _input_field(config)
    grid = _grid(config, field)
    stat = config.choice('stat', STATISTIC_NAMES, 'lrv')
    m = config.vector('m')
    k = config.integer('k', 1)
    if stat == 'lrv':
        _check_m(config.required(m, 'm'), grid.b, 'the block shape')
    if stat == 'ring' and not 0 <= k < min(grid.b):
        raise UsageError('--k', f"ring radius must satisfy 0 <= k < min(b) = {min(grid.b)}, got {k}")
    statistic = make_statistic(stat, m, k, _kernel(config), _cut_rule(config))
    quantiles = config.reals('quantiles') or []
    if any(not 0.0 < g < 1.0 for g in quantiles):
        raise UsageError('--quantiles', f"every level must lie in (0, 1), got {quantiles}")
    values = subsample_values(field, grid, statistic)
    center = float(statistic(field))
    dist = empirical_distribution(values, center, grid.tau_b)
    origins = enumerate_blocks(field.shape, grid)
    frame = pd.DataFrame({'block': range(len(values)), 'origin': [format_vector(o) for o in origins],
                          'value': values})
    metadata = {'stat': stat, 'b': format_vector(grid.b), 'h': format_vector(grid.h), 'blocks': len(values),
                'center': center, 'tau_b': grid.tau_b}
    for g in quantiles:
        metadata[f"quantile.{g:g}"] = dist.quantile(g)
    metadata.update(config.echo())
    return render(frame, metadata, config.choice('format', FORMATS))


def _stop_rule(config: RunConfig, default: str) -> str:
    return config.choice('stop_rule', STOP_RULES, default)


def cmd_select_m(config: RunConfig) -> str:
    field = _input_field(config)
    grid = _grid(config, field)
    selection = select_m_detailed(field, grid, _fraction(config, 'confidence', 0.9), _m_max(config, grid),
                                  _stop_rule(config, STOP_ON_REJECT))
    frame = pd.DataFrame([{'k': k + 1, 'estimate': ci.estimate, 'lower': ci.lower, 'upper': ci.upper,
                           'contains_zero': ci.contains(0.0)} for k, ci in enumerate(selection.intervals)])
    metadata = {'m_opt': format_vector(selection.m_opt),
                'stopped_at': selection.stopped_at if selection.stopped_at is not None else 'none',
                'exhausted': selection.exhausted, 'stop_rule': selection.stop_rule, 'b': format_vector(grid.b)}
    metadata.update(config.echo())
    return render(frame, metadata, config.choice('format', FORMATS))


def _tuned_cut_kind(config: RunConfig) -> CutKind:
    """Only the power rules have an exponent to tune; 'none', the configured default, means power_l2."""
    name = config.text('cut', CutKind.NONE.value).strip().lower()
    if name in (CutKind.NONE.value, CutKind.POWER_L2.value):
        return CutKind.POWER_L2
    if name == CutKind.POWER_MAX.value:
        return CutKind.POWER_MAX
    raise UsageError('--cut', f"tune needs power_l2 or power_max, got '{name}'")


def cmd_tune(config: RunConfig) -> str:
    field = _input_field(config)
    grid = _grid(config, field)
    try:
        alphas = alpha_grid_range(config.real('alpha_max', 10.0), config.real('alpha_step', 0.1))
    except ValueError as e:
        raise UsageError('--alpha-step', str(e)) from None
    tolerance = config.real('tolerance', 0.01)
    if tolerance < 0:
        raise UsageError('--tolerance', f"must be >= 0, got {tolerance}")
    m_opt = config.vector('m')
    if m_opt is not None:
        _check_m(m_opt, grid.b, 'the block shape')
    cut_kind = _tuned_cut_kind(config)
    tuning = tune_alpha_detailed(field, grid, alphas, tolerance, m_opt=m_opt, m_max=_m_max(config, grid),
                                 stop_rule=_stop_rule(config, STOP_ON_ACCEPT), cut_kind=cut_kind,
                                 delta=config.real('delta', 1e-4), confidence=_fraction(config, 'confidence', 0.9))
    frame = pd.DataFrame({'alpha': list(tuning.rmse_by_alpha), 'rmse': list(tuning.rmse_by_alpha.values())})
    metadata = {'alpha': tuning.alpha, 'm_opt': format_vector(tuning.m_opt), 'tolerance': tolerance,
                'b': format_vector(grid.b), 'cut': cut_kind.value}
    if tuning.selection is not None:
        metadata['stop_rule'] = tuning.selection.stop_rule
        metadata['selection_exhausted'] = tuning.selection.exhausted
    metadata.update(config.echo())
    return render(frame, metadata, config.choice('format', FORMATS))


def _reference(config: RunConfig, field: Field):
    if config.reference is None:
        return 0.0
    try:
        return float(config.reference)
    except ValueError:
        reference = _input_field(config, 'reference')
    if reference.shape != field.shape or reference.p != 1:
        raise UsageError('--reference', f"reference shape {reference.shape} does not match the field {field.shape}")
    return reference


def cmd_image_test(config: RunConfig) -> str:
    field = _input_field(config)
    if field.p != 1:
        raise UsageError('--input', f"the image test needs a univariate field, got p={field.p}")
    m = config.vector('m', DEFAULT_TEST_M if field.q == 2 else (3,) * field.q)
    _check_m(m, field.shape)
    result = image_test(field, _reference(config, field), _fraction(config, 'level', 0.05), m, _kernel(config),
                        _cut_rule(config))
    metadata = {'shape': format_vector(field.shape), 'm': format_vector(m)}
    metadata.update(config.echo())
    return render(pd.DataFrame([asdict(result)]), metadata, config.choice('format', FORMATS))


def cmd_reproduce(config: RunConfig) -> str:
    if config.table is None:
        raise UsageError('--table', f"is required, one of {'|'.join(PRESETS)}")
    try:
        chosen = preset(config.table)
    except ValueError as e:
        raise UsageError('--table', str(e)) from None
    reps = config.integer('reps')
    if reps is not None and reps < 2:
        raise UsageError('--reps', f"must be >= 2, got {reps}")
    threads = config.integer('threads', 1)
    if threads < 1:
        raise UsageError('--threads', f"must be >= 1, got {threads}")
    fmt = config.choice('format', FORMATS)
    seed = resolve_seed(config)
    LOGGER.info("reproducing table %s (%s) with seed %d", chosen.key, chosen.title, seed)
    report = chosen.run(reps, seed, threads, progress=not config.boolean('quiet'))
    report.metadata.update(config.echo())
    return report.to_json() + '\n' if fmt == 'json' else report.to_csv()


COMMANDS: Dict[str, Callable[[RunConfig], str]] = {
    'simulate': cmd_simulate,
    'estimate': cmd_estimate,
    'threshold-estimate': cmd_threshold_estimate,
    'subsample': cmd_subsample,
    'tune': cmd_tune,
    'select-m': cmd_select_m,
    'image-test': cmd_image_test,
    'reproduce': cmd_reproduce,
}


def _add_keys(parser: argparse.ArgumentParser, keys, helps: Dict[str, str] = None):
    helps = helps or {}
    for key in keys:
        parser.add_argument(flag_for(key), dest=key, default=None, help=helps.get(key))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', default=None, help='INI file overriding src/defaults.cfg')
    common.add_argument('--out', default=None, help='output file (default: standard output)')
    _add_keys(common, ('format', 'threads', 'seed', 'log_level'))
    common.add_argument('--quiet', dest='quiet', action='store_const', const='true', default=None,
                        help='no progress bars')

    estimator_keys = ('m', 'kernel', 'qs_bandwidth', 'center')
    cut_keys = ('cut', 'alpha', 'delta', 'cut_constant')
    grid_keys = ('gamma', 'block', 'stride')

    parser = argparse.ArgumentParser(prog='spatial_lrv', description='Long-run variance estimation for random fields')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('simulate', parents=[common], help='simulate a model field')
    _add_keys(p, SECTIONS['Model'], {'model': '|'.join(MODEL_NAMES), 'shape': 'e.g. 30,40'})

    for name, keys in (('estimate', estimator_keys), ('threshold-estimate', estimator_keys + cut_keys)):
        p = sub.add_parser(name, parents=[common], help=f"{name.replace('-', ' ')} of the asymptotic variance")
        p.add_argument('--input', required=True)
        _add_keys(p, keys)

    p = sub.add_parser('subsample', parents=[common], help='block statistics and their quantiles')
    p.add_argument('--input', required=True)
    _add_keys(p, grid_keys + ('stat', 'm', 'k', 'quantiles', 'kernel', 'qs_bandwidth') + cut_keys)

    p = sub.add_parser('select-m', parents=[common], help='sequential ring tests for m')
    p.add_argument('--input', required=True)
    _add_keys(p, grid_keys + ('confidence', 'm_max', 'stop_rule'))

    p = sub.add_parser('tune', parents=[common], help='choose the cut exponent alpha by subsampling')
    p.add_argument('--input', required=True)
    _add_keys(p, grid_keys + ('m', 'confidence', 'm_max', 'stop_rule', 'alpha_max', 'alpha_step', 'tolerance',
                              'cut', 'delta'))

    p = sub.add_parser('image-test', parents=[common], help='partial-sum test against a reference image')
    p.add_argument('--input', required=True)
    p.add_argument('--reference', default=None, help='reference field file or a constant (default 0)')
    _add_keys(p, ('level', 'm', 'kernel', 'qs_bandwidth') + cut_keys)

    p = sub.add_parser('reproduce', parents=[common], help='run a built-in experiment preset')
    p.add_argument('--table', default=None, help='|'.join(PRESETS))
    _add_keys(p, ('reps',))
    return parser


def parse_and_dispatch(argv: List[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        config = load_config(args.config)
        apply_flags(config, args)
        set_level(config.choice('log_level', LOG_LEVELS, 'warning'))
        LOGGER.info("resolved configuration: %s", config.echo())
        text = COMMANDS[args.command](config)
        if config.output is not None and args.command != 'simulate':
            Path(config.output).write_text(text)
        else:
            sys.stdout.write(text)
    except (UsageError, ConfigError) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 2
    except (FieldVarianceError, ValueError, ArithmeticError, OSError) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(parse_and_dispatch(sys.argv[1:]))


if __name__ == '__main__':
    main()
