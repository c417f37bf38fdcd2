import math

import numpy as np
import pytest

from cfmplv.errors import (
    DimensionMismatch, InvalidHyperparams, NonIncreasingGrid, OutOfRangePhase, ParseError,
)
from cfmplv.phase_data import (
    TWO_PI, CsvLayout, PhaseDataset, TimeGrid, load_binary, load_csv, save_binary, save_csv,
    simulate_dataset, validate, wrap,
)
from cfmplv.plv import naive_plv
from cfmplv.priors import Hyperparams
from cfmplv.spline_basis import default_basis


def _dataset(values):
    return PhaseDataset.from_array(np.asarray(values, dtype=float))


def test_validate_accepts_in_range(rng):
    d = _dataset(rng.uniform(0, TWO_PI, (2, 3, 5)))
    assert validate(d) is d


@pytest.mark.parametrize("bad", [TWO_PI, -0.1, np.nan])
def test_validate_rejects_out_of_range(bad):
    v = np.zeros((2, 2, 4))
    v[1, 0, 2] = bad
    with pytest.raises(OutOfRangePhase) as exc:
        validate(_dataset(v))
    assert exc.value.index == (1, 0, 2)


def test_validate_reports_first_offender():
    v = np.zeros((1, 2, 3))
    v[0, 1, 0] = 7.0
    v[0, 1, 2] = -1.0
    with pytest.raises(OutOfRangePhase) as exc:
        validate(_dataset(v))
    assert exc.value.index == (0, 1, 0)


def test_validate_dimension_mismatch():
    d = PhaseDataset(np.zeros((1, 1, 4)), TimeGrid.uniform(5))
    with pytest.raises(DimensionMismatch):
        validate(d)


def test_validate_non_increasing_grid():
    d = PhaseDataset(np.zeros((1, 1, 3)), TimeGrid([0.0, 0.5, 0.5]))
    with pytest.raises(NonIncreasingGrid) as exc:
        validate(d)
    assert exc.value.index == 2


def test_wrap_half_open():
    assert wrap(TWO_PI) == 0.0
    assert wrap(-1e-18) == 0.0
    out = wrap(np.array([-1e-18, TWO_PI, 3 * TWO_PI + 1.0, -0.5]))
    assert np.all((out >= 0) & (out < TWO_PI))
    assert out[2] == pytest.approx(1.0)


def test_load_single_column(tmp_path):
    path = tmp_path / "one.csv"
    path.write_text("0.0\n3.1\n6.2\n")
    d = load_csv(path, CsvLayout.single_column())
    assert (d.n, d.p, d.T) == (1, 1, 3)
    np.testing.assert_array_equal(d.values[0, 0], [0.0, 3.1, 6.2])


def test_load_wrap_on_load(tmp_path):
    path = tmp_path / "w.csv"
    path.write_text("0.0\n6.4\n")
    d = load_csv(path, CsvLayout.single_column(wrap_on_load=True))
    assert d.values[0, 0, 1] == pytest.approx(0.116815, abs=1e-6)
    assert d.values[0, 0, 1] == pytest.approx(6.4 - 2 * math.pi, abs=1e-15)


def test_load_without_wrap_rejects(tmp_path):
    path = tmp_path / "w.csv"
    path.write_text("0.0\n6.4\n")
    with pytest.raises(OutOfRangePhase):
        load_csv(path, CsvLayout.single_column())


def test_parse_error_has_line_number(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("subject,channel,time_index,phase\n0,0,0,1.0\n0,0,1,abc\n")
    with pytest.raises(ParseError) as exc:
        load_csv(path)
    assert exc.value.line == 3


def test_missing_cell_is_dimension_mismatch(tmp_path):
    path = tmp_path / "gap.csv"
    path.write_text("subject,channel,time_index,phase\n0,0,0,1.0\n0,0,2,1.0\n")
    with pytest.raises(DimensionMismatch):
        load_csv(path)


def test_csv_round_trip(tmp_path, rng):
    d = _dataset(wrap(rng.normal(3, 2, (3, 4, 7))))
    save_csv(d, tmp_path / "d.csv")
    assert load_csv(tmp_path / "d.csv") == d


def test_long_format_rows_in_any_order(tmp_path):
    path = tmp_path / "shuffled.csv"
    path.write_text("phase,time_index,channel,subject\n"
                    "0.3,1,0,0\n0.1,0,1,0\n0.0,0,0,0\n0.4,1,1,0\n")
    d = load_csv(path)
    np.testing.assert_array_equal(d.values[0], [[0.0, 0.3], [0.1, 0.4]])


def test_binary_round_trip_and_header(tmp_path, rng):
    d = _dataset(wrap(rng.normal(0, 3, (2, 3, 5))))
    save_binary(d, tmp_path / "d.cfm")
    raw = (tmp_path / "d.cfm").read_bytes()
    assert raw[:4] == b"CFM1"
    assert np.frombuffer(raw[4:16], "<u4").tolist() == [2, 3, 5]
    assert len(raw) == 16 + 8 * 30
    assert load_binary(tmp_path / "d.cfm") == d


def test_binary_bad_magic(tmp_path):
    (tmp_path / "x.cfm").write_bytes(b"XXXX" + bytes(12))
    with pytest.raises(ParseError):
        load_binary(tmp_path / "x.cfm")


def test_simulate_all_variances_zero():
    basis = default_basis(20, 3, 4)
    beta = np.linspace(-2, 5, basis.L)
    d, truth = simulate_dataset(3, 4, basis, seed=1, beta=beta, tau2=0, gamma2=0, sigma2=0)
    expected = wrap(beta @ basis.values)
    for s in range(3):
        for k in range(4):
            np.testing.assert_array_equal(d.values[s, k], d.values[0, 0])
    np.testing.assert_allclose(d.values[0, 0], expected, atol=1e-12)
    _, avg = naive_plv(d)
    np.testing.assert_allclose(avg, 1.0, atol=1e-12)
    np.testing.assert_array_equal(truth.clean_phase, d.values)


def test_simulate_deterministic():
    basis = default_basis(30, 3, 5)
    d1, t1 = simulate_dataset(2, 3, basis, seed=42)
    d2, t2 = simulate_dataset(2, 3, basis, seed=42)
    assert d1.values.tobytes() == d2.values.tobytes()
    assert t1.a.tobytes() == t2.a.tobytes()
    d3, _ = simulate_dataset(2, 3, basis, seed=43)
    assert d3 != d1


def test_simulate_range_and_truth_consistency():
    basis = default_basis(50, 3, 6)
    d, truth = simulate_dataset(3, 3, basis, seed=7)
    validate(d)
    np.testing.assert_allclose(truth.clean_phase, wrap(truth.a @ basis.values))


def test_simulate_rejects_negative_fixed_variance():
    with pytest.raises(InvalidHyperparams):
        simulate_dataset(1, 1, default_basis(10, 1, 1), seed=0, tau2=-1.0)


def test_hyperparams_validation():
    with pytest.raises(InvalidHyperparams):
        Hyperparams(B0=0.0)
    with pytest.raises(InvalidHyperparams):
        Hyperparams(nu_sigma=-1.0)


def test_coefficient_moments():
    # oracle: 10^4 independent replicate datasets; the draws of a for a fixed
    # (k, l) given the fixed mu should be N(mu, tau2)
    basis = default_basis(100, 3, 6)
    L = basis.L
    tau2 = np.linspace(0.2, 1.5, L)
    reps = 10_000
    draws = np.empty((reps, 10, 5, L))
    mus = np.empty((reps, 5, L))
    for r in range(reps):
        _, truth = simulate_dataset(10, 5, basis, seed=r, beta=0.0, tau2=tau2, gamma2=1.0,
                                    sigma2=0.1)
        draws[r] = truth.a
        mus[r] = truth.mu
    dev = (draws - mus[:, None]).reshape(-1, L)
    N = dev.shape[0]
    assert np.all(np.abs(dev.mean(axis=0)) < 4 * np.sqrt(tau2 / N))
    np.testing.assert_allclose(dev.var(axis=0), tau2, rtol=4 * np.sqrt(2 / N))
