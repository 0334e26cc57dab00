from importlib import resources

import pytest
import yaml

from lieloc.specfile import SpecError, builtin_names, load_builtin, load_example, load_spec

T2 = resources.files("lieloc").joinpath("builtins/t2-tangent-translation.yaml").read_text()


def test_registry():
    assert builtin_names() == [
        "s2-atiyah-line",
        "s2-poisson",
        "s2-tangent-rotation",
        "s2xs2-tangent",
        "su2-point",
        "t2-tangent-translation",
    ]
    s2 = load_example("s2-tangent-rotation")
    assert s2.manifold.dim == 2 and s2.action.dim == 1
    assert [r.label for r in s2.fresh_fixed_points()] == ["N", "S"]
    with pytest.raises(KeyError):
        load_builtin("nope")
    with pytest.raises(SpecError):
        load_example("/no/such/file.yaml")


def test_fresh_fixed_points_are_independent_copies(s2):
    a, b = s2.fresh_fixed_points(), s2.fresh_fixed_points()
    assert a[0] is not b[0]


def _locate(text, needle):
    for i, line in enumerate(text.splitlines(), 1):
        col = line.find(needle)
        if col >= 0:
            return i, col + 1
    raise AssertionError(needle)


def test_malformed_expression_reports_line_and_column():
    bad = T2.replace('{"0,1": "cos(t2)"}', '{"0,1": "cos(t2)) + 1"}')
    with pytest.raises(SpecError) as err:
        load_spec(bad, name="bad.yaml")
    line, col = _locate(bad, "cos(t2)) + 1")
    assert err.value.line == line
    # the stray parenthesis sits 7 characters into the expression
    assert err.value.column == col + 7
    assert str(err.value).startswith(f"bad.yaml:{line}:")


def test_unknown_symbol_and_structure_errors():
    bad = T2.replace('flat: {"": "sin(t2)"}', 'flat: {"": "sin(t3)"}')
    with pytest.raises(SpecError) as err:
        load_spec(bad)
    assert err.value.line == _locate(bad, "sin(t3)")[0]
    doc = yaml.safe_load(T2)
    del doc["manifold"]["charts"][0]["coords"]
    with pytest.raises(SpecError, match="coords"):
        load_spec(yaml.safe_dump(doc))
    with pytest.raises(SpecError) as err:
        load_spec(T2.replace("  dim: 2\n", "  dim: 2\n  dim: 3\n", 1))
    assert err.value.line is not None
    with pytest.raises(SpecError, match="YAML"):
        load_spec("a: [1, 2\n")


def test_builtins_round_trip_through_files(tmp_path):
    path = tmp_path / "t2.yaml"
    path.write_text(T2)
    spec = load_spec(path)
    assert spec.digest == load_builtin("t2-tangent-translation").digest
