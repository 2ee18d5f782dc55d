import logging
import os

from dotenv import dotenv_values

from smoothfem.config import default
from smoothfem.config.settings import Config
from smoothfem.errors import ConfigError

logger = logging.getLogger('experiment_config')

PROBLEMS = ('block', 'patch')
MODES = ('plane_stress', 'plane_strain')
MESH_KINDS = ('tri', 'quad')
PATTERNS = ('slash', 'backslash', 'union_jack')
DIRICHLET_SIDES = ('bottom', 'all', 'none')
METHODS_BY_KIND = {'tri': default.TRI_METHODS, 'quad': default.QUAD_METHODS}


def _floats(value, count, field):
    if isinstance(value, str):
        value = [part for part in value.replace(' ', '').split(',') if part]
    try:
        numbers = tuple(float(part) for part in value)
    except (TypeError, ValueError):
        raise ConfigError(f"expected {count} comma-separated numbers, got {value!r}", field=field)
    if len(numbers) != count:
        raise ConfigError(f"expected {count} comma-separated numbers, got {len(numbers)}", field=field)
    return numbers


def _ints(value, field):
    if isinstance(value, str):
        value = [part for part in value.replace(' ', '').split(',') if part]
    try:
        return [int(part) for part in value]
    except (TypeError, ValueError):
        raise ConfigError(f"expected comma-separated integers, got {value!r}", field=field)


def _words(value):
    if isinstance(value, str):
        return [part.strip() for part in value.split(',') if part.strip()]
    return list(value)


def _flag(value, field):
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ('1', 'true', 'yes', 'on'):
        return True
    if text in ('0', 'false', 'no', 'off'):
        return False
    raise ConfigError(f"expected a boolean, got {value!r}", field=field)


class ExperimentConfig:
    """Validated experiment settings for one CLI run."""

    def __init__(self, data=None):
        data = dict(data or {})
        self.problem = data.get('problem', default.PROBLEM)
        self.domain = _floats(data.get('domain', default.DOMAIN), 4, 'domain')
        self.E = self._number(data.get('E', default.YOUNGS_MODULUS), 'E')
        self.nu = self._number(data.get('nu', default.POISSON_RATIO), 'nu')
        self.mode = data.get('mode', default.MODE)
        self.mesh_kind = data.get('mesh_kind', default.MESH_KIND)
        self.pattern = data.get('pattern', default.PATTERN)
        self.n = _ints(data.get('n', default.N_LIST), 'n')
        self.distortion = self._number(data.get('distortion', default.DISTORTION), 'distortion')
        self.seed = self._integer(data.get('seed', default.SEED), 'seed')
        self.mesh_files = _words(data.get('mesh_files', []))
        self.dirichlet = data.get('dirichlet', default.DIRICHLET)
        methods = data.get('methods')
        if methods is None:
            methods = METHODS_BY_KIND.get(self.mesh_kind, ())
        self.methods = _words(methods)
        self.reference_n = self._integer(data.get('reference_n', default.REFERENCE_N), 'reference_n')
        self.probe = _floats(data.get('probe', default.PROBE), 2, 'probe')
        self.out = data.get('out') or Config.OUT
        self.quadrature_refinement = self._integer(
            data.get('quadrature_refinement', default.QUADRATURE_REFINEMENT), 'quadrature_refinement')
        self.equivalence_tolerance = self._number(
            data.get('equivalence_tolerance', default.EQUIVALENCE_TOLERANCE), 'equivalence_tolerance')
        self.parallel = _flag(data.get('parallel', False), 'parallel')
        self.validate()

    @staticmethod
    def _number(value, field):
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"expected a number, got {value!r}", field=field)

    @classmethod
    def _integer(cls, value, field):
        number = cls._number(value, field)
        if not number.is_integer():
            raise ConfigError(f"expected an integer, got {value!r}", field=field)
        return int(number)

    def validate(self):
        """Check enum values and cross-field invariants"""
        choices = [
            ('problem', self.problem, PROBLEMS),
            ('mode', self.mode, MODES),
            ('mesh_kind', self.mesh_kind, MESH_KINDS),
            ('pattern', self.pattern, PATTERNS),
            ('dirichlet', self.dirichlet, DIRICHLET_SIDES),
        ]
        for field, value, allowed in choices:
            if value not in allowed:
                raise ConfigError(f"{value!r} is not one of {', '.join(allowed)}", field=field)

        allowed_methods = METHODS_BY_KIND[self.mesh_kind]
        for method in self.methods:
            if method not in allowed_methods:
                raise ConfigError(
                    f"{method!r} is not available on {self.mesh_kind} meshes "
                    f"(choose from {', '.join(allowed_methods)})", field='methods')
        if not self.methods:
            raise ConfigError("at least one method is required", field='methods')

        if not self.n and not self.mesh_files:
            raise ConfigError("at least one mesh size is required", field='n')
        if any(value < 1 for value in self.n):
            raise ConfigError("mesh sizes must be positive", field='n')
        if any(b <= a for a, b in zip(self.n, self.n[1:])):
            raise ConfigError("mesh sizes must be strictly increasing", field='n')
        if self.n and self.reference_n <= max(self.n):
            raise ConfigError(
                f"reference N ({self.reference_n}) must exceed the largest mesh size ({max(self.n)})",
                field='reference_n')

        x0, y0, x1, y1 = self.domain
        if x1 <= x0 or y1 <= y0:
            raise ConfigError("domain must be (x0, y0, x1, y1) with x1 > x0 and y1 > y0", field='domain')
        if self.E <= 0:
            raise ConfigError("Young's modulus must be positive", field='E')
        if not 0 <= self.nu < 0.5:
            raise ConfigError("Poisson's ratio must lie in [0, 0.5)", field='nu')
        if not 0 <= self.distortion < 0.5:
            raise ConfigError("distortion must lie in [0, 0.5)", field='distortion')
        if self.quadrature_refinement < 1:
            raise ConfigError("refinement must be at least 1", field='quadrature_refinement')
        if self.equivalence_tolerance <= 0:
            raise ConfigError("tolerance must be positive", field='equivalence_tolerance')
        for path in self.mesh_files:
            if not os.path.exists(path):
                raise ConfigError(f"mesh file {path!r} does not exist", field='mesh_files')

    @property
    def element_kind(self):
        return 'T3' if self.mesh_kind == 'tri' else 'Q4'

    def to_dict(self):
        """Convert to dictionary"""
        return {
            'problem': self.problem,
            'domain': self.domain,
            'E': self.E,
            'nu': self.nu,
            'mode': self.mode,
            'mesh_kind': self.mesh_kind,
            'pattern': self.pattern,
            'n': list(self.n),
            'distortion': self.distortion,
            'seed': self.seed,
            'mesh_files': list(self.mesh_files),
            'dirichlet': self.dirichlet,
            'methods': list(self.methods),
            'reference_n': self.reference_n,
            'probe': self.probe,
            'out': self.out,
            'quadrature_refinement': self.quadrature_refinement,
            'equivalence_tolerance': self.equivalence_tolerance,
            'parallel': self.parallel,
        }


def parse_config_file(path):
    """Read a `key = value` file into a dict of raw strings"""
    if not os.path.isfile(path):
        raise ConfigError(f"cannot read config file {path!r}: no such file", field='config')
    try:
        values = dotenv_values(path, interpolate=False)
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot read config file {path!r}: {e}", field='config')

    data = {}
    for key, value in values.items():
        # A bare word with no `=` parses as a key without a value
        if value is None:
            raise ConfigError(f"{key!r} has no value, expected 'key = value'", field='config')
        data[key] = value
    return data


def load_config(path=None, overrides=None):
    """Load config from an optional file, then apply command-line overrides"""
    data = parse_config_file(path) if path else {}
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value

    # Method lists default per mesh family unless given
    try:
        config = ExperimentConfig(data)
    except ConfigError as e:
        logger.error(f"Invalid experiment config: {e.message}")
        raise

    logger.info(f"Loaded {config.problem} experiment on {config.mesh_kind} meshes, N={config.n}")
    return config
