import csv

import pytest

from smoothfem import create_cli

cli = create_cli()


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / 'small.cfg'
    path.write_text("# quick sweep\nreference_n = 8\n")
    return str(path)


def read_rows(path):
    with open(path, newline='') as handle:
        return list(csv.DictReader(handle))


def test_help_lists_commands(runner):
    result = runner.invoke(cli, ['--help'])
    assert result.exit_code == 0
    for command in ('projection-errors', 'convergence', 'equivalence-check', 'verify', 'mesh'):
        assert command in result.output


def test_mesh_export_then_import(runner, tmp_path):
    path = str(tmp_path / 'grid.mesh')
    result = runner.invoke(cli, ['mesh', 'export', path, '--kind', 'quad', '--n', '3',
                                 '--distortion', '0.2', '--seed', '4'])
    assert result.exit_code == 0, result.output
    assert 'Q4, 16 vertices, 9 elements' in result.output

    result = runner.invoke(cli, ['mesh', 'import', path])
    assert result.exit_code == 0, result.output
    assert 'Q4 mesh: 16 vertices, 9 elements, 12 boundary edges (3 Dirichlet)' in result.output


def test_mesh_import_reports_bad_line(runner, tmp_path):
    path = tmp_path / 'broken.mesh'
    path.write_text("mesh T3 3 1 3\nv 0 0 0\nv 1 1 zero\n")
    result = runner.invoke(cli, ['mesh', 'import', str(path)])
    assert result.exit_code == 2
    assert 'smoothfem-error[MESHIO]: line 3:' in result.output


def test_invalid_sweep_exits_with_config_error(runner, tmp_path):
    result = runner.invoke(cli, ['convergence', '--n', '4,2', '--out', str(tmp_path)])
    assert result.exit_code == 2
    assert 'smoothfem-error[CONFIG]: n: ' in result.output


def test_method_outside_family_rejected(runner, tmp_path):
    result = runner.invoke(cli, ['convergence', '--mesh-kind', 'tri', '--method', 'csfem',
                                 '--out', str(tmp_path)])
    assert result.exit_code == 2
    assert 'smoothfem-error[CONFIG]: methods: ' in result.output


@pytest.mark.slow
def test_projection_errors_writes_table(runner, tmp_path, small_config):
    out = tmp_path / 'out'
    result = runner.invoke(cli, ['projection-errors', '--config', small_config, '--n', '2,4',
                                 '--out', str(out)])
    assert result.exit_code == 0, result.output
    rows = read_rows(out / 'projection_errors_tri.csv')
    assert [row['n'] for row in rows] == ['2', '4']
    for row in rows:
        assert float(row['W_2h']) < float(row['W_h'])
    summary = (out / 'projection_errors_tri_summary.txt').read_text()
    assert 'Reference : Q9, N=8' in summary


@pytest.mark.slow
def test_convergence_is_repeatable(runner, tmp_path, small_config):
    first, second = tmp_path / 'a', tmp_path / 'b'
    for out in (first, second):
        result = runner.invoke(cli, ['convergence', '--config', small_config, '--n', '2,4',
                                     '--mesh-kind', 'quad', '--method', 'fem_plq4,sse', '--out', str(out)])
        assert result.exit_code == 0, result.output
    assert (first / 'convergence_quad.csv').read_bytes() == (second / 'convergence_quad.csv').read_bytes()
    assert (first / 'convergence_quad.svg').exists()

    rows = read_rows(first / 'convergence_quad.csv')
    assert [(row['method'], row['n']) for row in rows] == [
        ('fem_plq4', '2'), ('fem_plq4', '4'), ('sse', '2'), ('sse', '4')]
    assert rows[0]['slope'] == '' and rows[1]['slope'] != ''
    assert rows[0]['representative_error'] == '' and rows[2]['representative_error'] != ''
    assert 'wall_time' not in rows[0]


def test_equivalence_check_on_triangles(runner, tmp_path):
    result = runner.invoke(cli, ['equivalence-check', '--n', '2,3', '--distortion', '0.2',
                                 '--out', str(tmp_path)])
    assert result.exit_code == 0, result.output
    rows = read_rows(tmp_path / 'equivalence_tri.csv')
    assert all(row['passed'] == 'true' for row in rows)


def test_equivalence_check_reports_distorted_quads(runner, tmp_path):
    result = runner.invoke(cli, ['equivalence-check', '--mesh-kind', 'quad', '--n', '2,3',
                                 '--distortion', '0.2', '--out', str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert 'differs' in result.output
    rows = read_rows(tmp_path / 'equivalence_quad.csv')
    assert all(row['expected'] == 'false' for row in rows)


def test_verify_selected_method(runner, tmp_path):
    result = runner.invoke(cli, ['verify', '--method', 'sse,csfem', '--out', str(tmp_path)])
    assert result.exit_code == 0, result.output
    rows = read_rows(tmp_path / 'verify.csv')
    assert {(row['method'], row['mesh_kind']) for row in rows} == {
        ('sse', 'tri'), ('sse', 'quad'), ('csfem', 'quad')}
    assert {row['check'] for row in rows} == {'rigid_modes', 'spectral_gap', 'patch', 'isotropy'}
    assert {row['mesh'] for row in rows} == {'regular', 'distorted'}
    for mesh in ('regular', 'distorted'):
        checks = {(row['method'], row['mesh_kind'], row['check']) for row in rows if row['mesh'] == mesh}
        assert len(checks) == 12
    assert all(row['passed'] == 'true' for row in rows)


def test_verify_unknown_method(runner, tmp_path):
    result = runner.invoke(cli, ['verify', '--method', 'xfem', '--out', str(tmp_path)])
    assert result.exit_code == 2
    assert 'smoothfem-error[CONFIG]: methods:' in result.output


@pytest.mark.parametrize('args, text', [
    (['convergence', '--seed', 'abc'], "'--seed'"),
    (['convergence', '--bogus'], '--bogus'),
    (['no-such-command'], 'no-such-command'),
    (['mesh', 'export'], 'PATH'),
    (['projection-errors', '--mesh-kind', 'hex'], "'--mesh-kind'"),
])
def test_usage_errors_print_one_error_line(runner, args, text):
    result = runner.invoke(cli, args)
    assert result.exit_code == 2
    lines = result.output.strip().splitlines()
    assert len(lines) == 1
    assert lines[0].startswith('smoothfem-error[USAGE]: ')
    assert text in lines[0]


@pytest.mark.slow
def test_convergence_distortion_flag(runner, tmp_path, small_config):
    out = tmp_path / 'out'
    result = runner.invoke(cli, ['convergence', '--config', small_config, '--n', '2,4',
                                 '--method', 'fem_t3', '--distortion', '0.2', '--out', str(out)])
    assert result.exit_code == 0, result.output
    assert {row['mesh'] for row in read_rows(out / 'convergence_tri.csv')} == {'distorted'}
    assert 'distorted by 0.2' in (out / 'convergence_tri_summary.txt').read_text()


def test_distortion_flag_is_validated(runner, tmp_path):
    result = runner.invoke(cli, ['projection-errors', '--distortion', '0.6', '--out', str(tmp_path)])
    assert result.exit_code == 2
    assert 'smoothfem-error[CONFIG]: distortion: ' in result.output
