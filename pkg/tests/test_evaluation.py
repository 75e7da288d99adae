import json

import numpy as np
import pytest

from lpvsdr.core import AffineLpvModel, TrajectoryDataset
from lpvsdr.evaluation import (CSV_COLUMNS, CellResult, EvaluationReport, epsilon_check,
                               fit_method, frobenius_cost, open_loop_error, reducer_from_dict,
                               run_cell, signal_gain_ratio, sweep)
from lpvsdr.pca import fit_pca, pca_reduced_model


def scalar_setup():
    m = AffineLpvModel(m0=np.zeros((1, 1)), coeffs=(np.array([[1.0]]),), nx=1, nu=0, ny=0)
    ds = TrajectoryDataset(gamma=np.array([[0.0, 1.0, 2.0]]), sample_time=1.0)
    zero = AffineLpvModel(m0=np.zeros((1, 1)), coeffs=(np.zeros((1, 1)),), nx=1, nu=0, ny=0)
    return m, ds, zero


def test_frobenius_cost_by_hand():
    m, ds, zero = scalar_setup()
    # residuals 0, 1, 2 -> mean of squares 5/3
    assert frobenius_cost(m, zero, ds, lambda g: g) == pytest.approx(5 / 3)
    assert frobenius_cost(m, m, ds, lambda g: g) == 0.0


def test_frobenius_cost_dimension_check():
    m, ds, zero = scalar_setup()
    with pytest.raises(ValueError):
        frobenius_cost(m, zero, ds, lambda g: np.vstack([g, g]))


def test_epsilon_check():
    m, ds, zero = scalar_setup()
    res = epsilon_check(m, zero, ds, lambda g: g, 1.5)
    assert not res.passed and res.worst_index == 2 and res.worst_error == 2.0
    assert epsilon_check(m, zero, ds, lambda g: g, 2.5).passed
    with pytest.raises(ValueError):
        epsilon_check(m, zero, ds, lambda g: g, 0.0)


def test_gain_ratio_identities(rng):
    w = rng.standard_normal((2, 100))
    assert signal_gain_ratio(w, w, 0.01) == 1.0
    assert signal_gain_ratio(2 * w, w, 0.01) == 2.0
    with pytest.raises(ZeroDivisionError):
        signal_gain_ratio(w, np.zeros_like(w))


def test_lossless_pca_open_loop(model, dataset):
    red = fit_pca(dataset, 10)
    err = open_loop_error(model, pca_reduced_model(model, red), red.map, dataset)
    assert err.rms < 1e-6 and err.state_rms < 1e-6


def test_lossy_open_loop_is_larger(model, dataset):
    lossless = fit_pca(dataset, 10)
    lossy = fit_pca(dataset, 1)
    e10 = open_loop_error(model, pca_reduced_model(model, lossless), lossless.map, dataset)
    e1 = open_loop_error(model, pca_reduced_model(model, lossy), lossy.map, dataset)
    assert e1.rms > e10.rms


def test_fit_method_unknown(model, dataset):
    with pytest.raises(ValueError):
        fit_method("ica", model, dataset, 1)


def test_fit_method_reducer_roundtrip(model, dataset):
    res = fit_method("kpca", model, dataset, 2)
    again = reducer_from_dict(json.loads(json.dumps(res.reducer.to_dict())))
    sub = dataset.gamma[:, :5]
    np.testing.assert_array_equal(again.map(sub), res.reducer.map(sub))


def test_run_cell_records_failure(model):
    ds = TrajectoryDataset(gamma=np.ones((10, 20)), sample_time=0.01)
    cell = run_cell("kpca", 1, model, ds, [0])
    assert cell.status == "failed" and "positive eigenvalues" in cell.error
    assert cell.cost is None


def test_sweep_pca_nonincreasing(model, dataset):
    rep = sweep(model, dataset, ["pca"], range(1, 11), open_loop=False)
    costs = [rep.cell("pca", k).cost for k in range(1, 11)]
    assert all(b <= a + 1e-12 for a, b in zip(costs, costs[1:]))
    assert rep.metadata["mean_sq_norm"] == pytest.approx(9.0607, rel=1e-4)


def test_sweep_validation(model, dataset):
    with pytest.raises(ValueError):
        sweep(model, dataset, [], [1])
    with pytest.raises(ValueError):
        sweep(model, dataset, ["svd"], [1])


def test_report_roundtrip_and_csv(model, dataset, tmp_path):
    rep = sweep(model, dataset, ["pca", "ae"], [1, 2], seeds=[0, 1],
                options={"ae": {"epochs": 20}})
    again = EvaluationReport.from_json(rep.to_json())
    assert again == rep
    assert len(rep.cell("ae", 2).costs) == 2
    assert len(rep.cell("pca", 1).costs) == 1
    json_path, csv_path = rep.write(tmp_path)
    lines = csv_path.read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 5
    assert rep.to_csv() == again.to_csv()


def test_report_cell_lookup():
    rep = EvaluationReport(cells=[CellResult("pca", 1, cost=0.5)])
    assert rep.costs("pca") == {1: 0.5}
    with pytest.raises(KeyError):
        rep.cell("pca", 2)
