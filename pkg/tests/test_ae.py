import numpy as np
import pytest

from lpvsdr.ae import (HIGH, LOW, AeReducer, default_ae_config, fit_ae, reconstruction_mse,
                       rescale, unrescale)
from lpvsdr.core import TrajectoryDataset
from lpvsdr.nn import TrainConfig


def plain_config(epochs=3000, seed=0):
    return TrainConfig(optimizer="adam", learning_rate=1e-2, epochs=epochs, rng_seed=seed)


@pytest.fixture(scope="module")
def small_dataset(dataset):
    return TrajectoryDataset(gamma=dataset.gamma[:, ::4], sample_time=0.04)


def test_rescale_maps_unit_box():
    np.testing.assert_allclose(rescale(np.array([-1.0, 0.0, 1.0])), [LOW, 0.5, HIGH])
    x = np.linspace(-1, 1, 7)
    np.testing.assert_allclose(unrescale(rescale(x)), x, atol=1e-15)


def test_full_width_reconstruction(small_dataset):
    red = fit_ae(small_dataset, small_dataset.n_rho, plain_config())
    assert reconstruction_mse(red, small_dataset) <= 1e-3


def test_latent_in_open_unit_interval(small_dataset):
    red = fit_ae(small_dataset, 2, default_ae_config())
    phi = red.map(small_dataset.gamma)
    assert phi.shape == (2, small_dataset.n_samples)
    assert np.all((phi > 0) & (phi < 1))


def test_training_reduces_loss(small_dataset):
    red = fit_ae(small_dataset, 2, default_ae_config())
    assert red.trace.loss[-1] < red.trace.loss[0]


def test_constant_dataset():
    ds = TrajectoryDataset(gamma=np.full((4, 30), 2.5), sample_time=1.0)
    red = fit_ae(ds, 1, plain_config(epochs=500))
    back = red.inverse(red.map(ds.gamma))
    assert np.max(np.abs(back - 2.5)) < 0.05


def test_seeded_runs_identical(small_dataset):
    a = fit_ae(small_dataset, 2, plain_config(epochs=100, seed=3))
    b = fit_ae(small_dataset, 2, plain_config(epochs=100, seed=3))
    assert a.map(small_dataset.gamma).tobytes() == b.map(small_dataset.gamma).tobytes()


def test_bad_nphi(small_dataset):
    with pytest.raises(ValueError):
        fit_ae(small_dataset, 0)
    with pytest.raises(ValueError):
        fit_ae(small_dataset, 11)


def test_dict_roundtrip(small_dataset):
    red = fit_ae(small_dataset, 2, plain_config(epochs=20))
    again = AeReducer.from_dict(red.to_dict())
    np.testing.assert_array_equal(again.map(small_dataset.gamma), red.map(small_dataset.gamma))
