import numpy as np
import pytest
from hypothesis import given, strategies as st

from ergodic_hjb.core import (CoefficientFns, Coefficients, ConfigError, ControlSet, Mode,
                              ProblemSpec, ScalarField, build_grid, control_grid,
                              load_coefficients_csv, make_problem, sample_coefficients,
                              save_coefficients_csv)
from ergodic_hjb.presets import explicit_cost


def test_smallest_grid():
    g = build_grid(1, 1.0, 3)
    np.testing.assert_array_equal(g.coords[:, 0], [-1.0, 0.0, 1.0])
    assert g.spacing == 1.0
    assert g.boundary.tolist() == [True, False, True]


def test_example_grid_spacing():
    g = build_grid(1, 6.0, 481)
    assert g.n_nodes == 481
    assert g.spacing == pytest.approx(0.025, abs=1e-15)
    assert g.coords[g.origin_index, 0] == 0.0


def test_2d_counts():
    g = build_grid(2, 2.0, 5)
    assert g.n_nodes == 25
    assert g.interior.sum() == 9


@pytest.mark.parametrize("args", [(1, 1.0, 4), (1, 0.0, 5), (1, -1.0, 5), (3, 1.0, 5), (1, 1.0, 1)])
def test_grid_rejects(args):
    with pytest.raises(ConfigError):
        build_grid(*args)


@given(dim=st.sampled_from([1, 2]), n=st.integers(1, 20).map(lambda k: 2 * k + 1),
       L=st.floats(0.1, 50.0))
def test_node_coordinate_round_trip(dim, n, L):
    g = build_grid(dim, L, n)
    idx = np.arange(g.n_nodes)
    back = [g.index_of(g.coord(i)) for i in idx]
    assert back == idx.tolist()
    # symmetric bit for bit, boundary exactly at +-L
    np.testing.assert_array_equal(g.axis, -g.axis[::-1])
    assert g.axis[-1] == pytest.approx(L, rel=1e-14)


def test_index_of_rejects_off_grid_points():
    g = build_grid(1, 1.0, 5)
    with pytest.raises(ConfigError):
        g.index_of([0.3])
    with pytest.raises(ConfigError):
        g.index_of([2.0])


def test_neighbors_are_clamped():
    g = build_grid(2, 1.0, 3)
    up = g.neighbor(1, +1)
    assert up[g.index_of([0.0, 0.0])] == g.index_of([0.0, 1.0])
    assert up[g.index_of([0.0, 1.0])] == g.index_of([0.0, 1.0])


def test_scalar_field_checks():
    g = build_grid(1, 1.0, 5)
    with pytest.raises(ConfigError):
        ScalarField(g, np.zeros(4))
    with pytest.raises(ConfigError):
        ScalarField(g, np.array([0, 0, np.nan, 0, 0]))
    f = ScalarField.from_function(g, lambda x: x[:, 0] ** 2)
    assert f.at([1.0]) == 1.0


def test_example_cost_value_at_origin():
    g = build_grid(1, 6.0, 481)
    fns = CoefficientFns(a=lambda x, al: 1.0, b=lambda x, al: -x, l=lambda x, al: explicit_cost(x))
    co = sample_coefficients(fns, g, ControlSet.single())
    assert co.l[0, g.origin_index] == -2.0
    np.testing.assert_array_equal(co.b[0, :, 0], -g.coords[:, 0])
    assert np.all(co.a == 1.0) and np.all(co.c0 == 0.0)


def test_non_psd_diffusion_rejected_with_location():
    g = build_grid(2, 1.0, 3)
    fns = CoefficientFns(a=lambda x, al: np.diag([-1.0, 1.0]), b=lambda x, al: 0.0)
    with pytest.raises(ConfigError, match="node 0, alpha index 0"):
        sample_coefficients(fns, g, ControlSet.single())


def test_negative_c0_rejected():
    g = build_grid(1, 1.0, 3)
    fns = CoefficientFns(a=lambda x, al: 1.0, b=lambda x, al: 0.0, c0=lambda x, al: -x[:, 0])
    with pytest.raises(ConfigError, match="c0 must be nonnegative"):
        sample_coefficients(fns, g, ControlSet.single())


def test_sigma_must_reproduce_a():
    g = build_grid(1, 1.0, 3)
    fns = CoefficientFns(a=lambda x, al: 1.0, b=lambda x, al: 0.0, sigma=lambda x, al: 2.0)
    with pytest.raises(ConfigError, match="sigma"):
        sample_coefficients(fns, g, ControlSet.single())


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.integers(0, 2 ** 31 - 1))
def test_sigma_sigma_t_always_psd(entries, seed):
    S = np.array(entries).reshape(2, 2)
    g = build_grid(2, 1.0, 3)
    fns = CoefficientFns(a=lambda x, al: S @ S.T, b=lambda x, al: 0.0, sigma=lambda x, al: S)
    co = sample_coefficients(fns, g, ControlSet.single())
    assert co.sigma is not None


def test_resampling_is_bitwise_idempotent():
    g = build_grid(2, 2.0, 9)
    ctl = control_grid(-1, 1, 3)
    fns = CoefficientFns(a=lambda x, al: 1 + al ** 2 + 0 * x[:, 0], b=lambda x, al: al - x,
                         l=lambda x, al: np.sin(x[:, 0]) * al)
    c1, c2 = sample_coefficients(fns, g, ctl), sample_coefficients(fns, g, ctl)
    for name in ("a", "b", "c0", "l"):
        assert getattr(c1, name).tobytes() == getattr(c2, name).tobytes()


def test_tables_are_read_only():
    g = build_grid(1, 1.0, 3)
    co = sample_coefficients(CoefficientFns(a=lambda x, al: 1.0, b=lambda x, al: -x), g,
                             ControlSet.single())
    with pytest.raises(ValueError):
        co.l[0, 0] = 1.0


def test_problem_preconditions():
    g1, g2 = build_grid(1, 1.0, 5), build_grid(2, 1.0, 5)
    fns = CoefficientFns(a=lambda x, al: 1.0, b=lambda x, al: -x)
    with pytest.raises(ConfigError):
        make_problem(fns, g1, mode="pucci-minus", pucci_lambda=2.0, pucci_Lambda=1.0)
    with pytest.raises(ConfigError):
        make_problem(fns, g2, mode="pucci-minus")
    with pytest.raises(ConfigError):
        make_problem(fns, g1, mode="isaacs")
    p = make_problem(fns, g1, mode="pucci-plus", pucci_lambda=1.0, pucci_Lambda=2.0)
    assert p.mode is Mode.PUCCI_PLUS and not p.mode.concave
    with pytest.raises(ConfigError):
        ProblemSpec(g2, ControlSet.single(), p.coefficients)


def test_control_set_nonempty():
    with pytest.raises(ConfigError):
        ControlSet(())
    assert len(control_grid(0, 1, 5)) == 5


@pytest.mark.parametrize("dim", [1, 2])
def test_csv_round_trip(tmp_path, dim):
    g = build_grid(dim, 1.0, 5)
    ctl = ControlSet((0.0, 1.0))
    fns = CoefficientFns(a=lambda x, al: 1.0 + al, b=lambda x, al: al - x,
                         c0=lambda x, al: al, l=lambda x, al: np.cos(x[:, 0]) + al)
    co = sample_coefficients(fns, g, ctl)
    path = tmp_path / "co.csv"
    save_coefficients_csv(co, path)
    back = load_coefficients_csv(path, g)
    for name in ("a", "b", "c0", "l"):
        np.testing.assert_array_equal(getattr(back, name), getattr(co, name))


def test_csv_missing_rows(tmp_path):
    g = build_grid(1, 1.0, 5)
    path = tmp_path / "co.csv"
    path.write_text("node_index,alpha_index,a_11,b_1,c0,l\n0,0,1,0,0,0\n")
    with pytest.raises(ConfigError, match="every"):
        load_coefficients_csv(path, g)


def test_shift_and_negation():
    g = build_grid(1, 1.0, 5)
    co = sample_coefficients(CoefficientFns(a=lambda x, al: 1.0, b=lambda x, al: -x,
                                            l=lambda x, al: x[:, 0]), g, ControlSet.single())
    np.testing.assert_array_equal(co.shifted(1.0).l, co.l + 1.0)
    np.testing.assert_array_equal(co.negated_cost().l, -co.l)
    assert isinstance(co.shifted(0.5), Coefficients)
