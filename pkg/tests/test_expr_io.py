import numpy as np
import pytest

from pucci_lab.errors import ConfigError
from pucci_lab.expr import Expr, parse_scalar, parse_vector
from pucci_lab.grid import Disc, Rectangle, build_grid, sample_field
from pucci_lab.io import field_csv, field_pgm, field_svg, ramp, read_field_csv, sha256_text, table_csv


def test_expression_evaluation():
    e = Expr("sin(pi*x) * exp(-y**2) + 2")
    x, y = np.array([0.5, 0.0]), np.array([0.0, 1.0])
    assert e(x, y) == pytest.approx([3.0, 2.0])
    assert Expr("x1 + x2")(np.array([1.0]), np.array([2.0])) == pytest.approx([3.0])
    assert Expr("where(x > 0, 1.0, -1.0)")(np.array([-1.0, 1.0]), np.zeros(2)) == pytest.approx([-1, 1])
    assert Expr("3")(np.zeros((2, 2)), np.zeros((2, 2))).shape == (2, 2)


@pytest.mark.parametrize("src", ["__import__('os')", "x.real", "open('f')", "lambda: 1", "'a'",
                                 "[i for i in x]", "z + 1", ""])
def test_expression_rejects_unsafe_input(src):
    with pytest.raises(ConfigError):
        Expr(src)


def test_parse_helpers():
    assert parse_scalar(2) == 2.0
    assert callable(parse_scalar("x*y"))
    with pytest.raises(ConfigError):
        parse_scalar(True)
    v = parse_vector(["-x", 0.5])
    hx, hy = v(np.array([2.0]), np.array([0.0]))
    assert hx == pytest.approx([-2.0]) and hy == pytest.approx([0.5])
    w = parse_vector("(-x, -y)")
    assert w(np.array([1.0]), np.array([3.0]))[1] == pytest.approx([-3.0])
    with pytest.raises(ConfigError):
        parse_vector("x + y")
    with pytest.raises(ConfigError):
        parse_vector([1, 2, 3])


def test_field_csv_round_trip(tmp_path):
    grid = build_grid(Disc(0, 0, 1), 0.25)
    f = sample_field(grid, lambda x, y: np.exp(x) * np.cos(y) / 3)
    text = field_csv(f)
    assert text.splitlines()[0] == "x,y,value"
    assert len(text.splitlines()) == 1 + int(grid.active.sum())
    path = tmp_path / "f.csv"
    path.write_text(text)
    data = read_field_csv(path)
    assert data.shape == (int(grid.active.sum()), 3)
    # repr formatting keeps doubles exact
    assert np.array_equal(np.sort(data[:, 2]), np.sort(f.values[grid.active]))


def test_table_csv():
    text = table_csv([{"a": 1, "b": 0.1}, {"a": 2, "b": float("nan")}])
    lines = text.splitlines()
    assert lines[0] == "a,b" and lines[1].startswith("1,0.1") and len(lines) == 3


def test_images_are_deterministic():
    grid = build_grid(Rectangle(0, 1, 0, 1), 0.125)
    f = sample_field(grid, lambda x, y: x * y)
    svg = field_svg(f, "xy")
    assert svg == field_svg(f, "xy")
    assert svg.startswith("<svg") and "min" in svg and "max" in svg
    pgm = field_pgm(f)
    assert pgm.startswith(b"P5") and pgm == field_pgm(f)
    assert sha256_text(svg) == sha256_text(svg.encode())


def test_ramp_endpoints():
    c = ramp(np.array([0.0, 0.5, 1.0]))
    assert c.shape == (3, 3)
    assert np.all((c >= 0) & (c <= 255))
    assert not np.array_equal(c[0], c[2])
