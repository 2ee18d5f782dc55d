import pytest

from smoothfem.config import load_config
from smoothfem.config.experiment import parse_config_file
from smoothfem.errors import ConfigError


def test_defaults():
    config = load_config()
    assert config.problem == 'block'
    assert config.n == [2, 4, 8, 16]
    assert config.reference_n == 64
    assert config.E == 1.0e3
    assert config.nu == 0.2
    assert config.methods == ['fem_t3', 'esfem', 'nsfem', 'sse']
    assert config.element_kind == 'T3'


def test_quad_methods_default_per_family():
    config = load_config(overrides={'mesh_kind': 'quad'})
    assert config.methods == ['fem_plq4', 'fem_blq4', 'csfem', 'esfem', 'sse']
    assert config.element_kind == 'Q4'


def test_none_overrides_are_ignored():
    config = load_config(overrides={'n': None, 'seed': None, 'pattern': 'backslash'})
    assert config.n == [2, 4, 8, 16]
    assert config.pattern == 'backslash'


def test_file_then_overrides(tmp_path):
    path = tmp_path / 'run.cfg'
    path.write_text("# block study\nmesh_kind = quad\n\nn = 2, 4   # sweep\nmethods = sse,csfem\nout = here\n")
    config = load_config(str(path), {'n': '2,4,8'})
    assert config.mesh_kind == 'quad'
    assert config.n == [2, 4, 8]
    assert config.methods == ['sse', 'csfem']
    assert config.out == 'here'


@pytest.mark.parametrize('overrides, field', [
    ({'n': '4,2'}, 'n'),
    ({'n': '2,2'}, 'n'),
    ({'n': '0,2'}, 'n'),
    ({'reference_n': 16}, 'reference_n'),
    ({'methods': 'csfem'}, 'methods'),
    ({'mesh_kind': 'hex'}, 'mesh_kind'),
    ({'pattern': 'zigzag'}, 'pattern'),
    ({'nu': 0.5}, 'nu'),
    ({'E': -1}, 'E'),
    ({'domain': '0,0,1'}, 'domain'),
    ({'domain': '1,0,0,1'}, 'domain'),
    ({'distortion': 0.7}, 'distortion'),
    ({'parallel': 'maybe'}, 'parallel'),
    ({'mesh_files': 'missing.mesh'}, 'mesh_files'),
])
def test_invalid_values_name_the_field(overrides, field):
    with pytest.raises(ConfigError) as excinfo:
        load_config(overrides=overrides)
    assert excinfo.value.field == field
    assert excinfo.value.to_line().startswith(f"smoothfem-error[CONFIG]: {field}: ")


def test_config_key_without_value(tmp_path):
    path = tmp_path / 'bad.cfg'
    path.write_text("n = 2,4\nmesh_kind\n")
    with pytest.raises(ConfigError, match="'mesh_kind' has no value") as excinfo:
        parse_config_file(str(path))
    assert excinfo.value.field == 'config'


def test_config_file_values_are_raw_strings(tmp_path):
    path = tmp_path / 'run.cfg'
    path.write_text("# comment\nseed = 7\nprobe = 0.5, 1\nout = 'quoted dir'\n")
    assert parse_config_file(str(path)) == {'seed': '7', 'probe': '0.5, 1', 'out': 'quoted dir'}


@pytest.mark.parametrize('seed', [1.5, '2.25', 'abc'])
def test_non_integer_seed_rejected(seed):
    with pytest.raises(ConfigError) as excinfo:
        load_config(overrides={'seed': seed})
    assert excinfo.value.field == 'seed'


def test_integral_seed_accepted(tmp_path):
    path = tmp_path / 'run.cfg'
    path.write_text("seed = 12\nreference_n = 32.0\n")
    config = load_config(str(path))
    assert config.seed == 12 and isinstance(config.seed, int)
    assert config.reference_n == 32


def test_fractional_reference_size_rejected():
    with pytest.raises(ConfigError) as excinfo:
        load_config(overrides={'reference_n': '64.5'})
    assert excinfo.value.field == 'reference_n'


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match='cannot read'):
        load_config(str(tmp_path / 'nope.cfg'))
