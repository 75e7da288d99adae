import logging

import numpy as np
import pytest

from lpvsdr.core import apply_normalizer, eval_model, variation_matrix, vec
from lpvsdr.dnn import (DnnReducer, build_targets, default_dnn_config, extract_reduced_model,
                        fit_dnn, warm_start_net)
from lpvsdr.evaluation import frobenius_cost
from lpvsdr.pca import fit_pca, pca_reduced_model


def short_config(epochs=200, seed=0):
    cfg = default_dnn_config(seed)
    cfg.epochs = epochs
    return cfg


def test_targets_are_variations(model, dataset):
    lam = build_targets(model, dataset)
    assert lam.shape == (36, dataset.n_samples)
    j = 123
    expected = vec(eval_model(model, dataset.gamma[:, j]) - model.m0)
    np.testing.assert_allclose(lam[:, j], expected, atol=1e-14)


def test_latent_nonnegative(model, dataset):
    red = fit_dnn(model, dataset, 2, config=short_config())
    assert np.all(red.map(dataset.gamma) >= 0)
    assert red.n_phi == 2


def test_extraction_matches_network(model, dataset):
    red = fit_dnn(model, dataset, 3, config=short_config())
    reduced = extract_reduced_model(red, model)
    net = red.network()
    out = net(apply_normalizer(red.normalizer, dataset.gamma))
    phi = red.map(dataset.gamma)
    lam_hat = reduced.coeff_matrix() @ phi + (vec(reduced.m0) - vec(model.m0))[:, None]
    assert np.max(np.abs(out - lam_hat)) < 1e-10
    # the training loss is the Frobenius cost
    cost = frobenius_cost(model, reduced, dataset, red.map)
    assert abs(cost - red.trace.final_data_loss) < 1e-10


@pytest.mark.parametrize("n_phi", [1, 2, 3])
def test_warm_start_reproduces_pca(model, dataset, n_phi):
    pca = fit_pca(dataset, n_phi)
    pca_cost = frobenius_cost(model, pca_reduced_model(model, pca), dataset, pca.map)
    red = fit_dnn(model, dataset, n_phi, config=short_config(epochs=0), warm_start=True)
    assert red.warm_started
    assert abs(red.trace.data_loss[0] - pca_cost) < 1e-12 * max(1.0, pca_cost) + 1e-13


def test_warm_start_infeasible_falls_back(model, dataset, caplog):
    rng = np.random.default_rng(0)
    assert warm_start_net(model, dataset, 6, (5,), rng) is None
    with caplog.at_level(logging.WARNING):
        red = fit_dnn(model, dataset, 6, config=short_config(epochs=2), warm_start=True)
    assert not red.warm_started
    assert "warm start infeasible" in caplog.text


def test_beats_variance_baseline(model, dataset):
    lam = variation_matrix(model, dataset.gamma)
    var = np.mean(np.sum((lam - lam.mean(axis=1, keepdims=True)) ** 2, axis=0))
    red = fit_dnn(model, dataset, 2, config=short_config(epochs=500))
    cost = frobenius_cost(model, extract_reduced_model(red, model), dataset, red.map)
    assert cost < var


def test_deeper_architecture(model, dataset):
    red = fit_dnn(model, dataset, 2, arch=(6, 4), config=short_config(epochs=50),
                  warm_start=True)
    assert red.warm_started
    assert len(red.encoder.layers) == 3


def test_seeded_runs_identical(model, dataset):
    a = fit_dnn(model, dataset, 2, config=short_config(epochs=30, seed=7))
    b = fit_dnn(model, dataset, 2, config=short_config(epochs=30, seed=7))
    assert a.map(dataset.gamma).tobytes() == b.map(dataset.gamma).tobytes()


def test_argument_validation(model, dataset):
    with pytest.raises(ValueError):
        fit_dnn(model, dataset, 0)
    with pytest.raises(ValueError):
        fit_dnn(model, dataset, 2, arch=())


def test_dict_roundtrip(model, dataset):
    red = fit_dnn(model, dataset, 2, config=short_config(epochs=5))
    again = DnnReducer.from_dict(red.to_dict())
    np.testing.assert_array_equal(again.map(dataset.gamma), red.map(dataset.gamma))
