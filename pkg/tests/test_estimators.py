import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from cbss.estimators import BVPTail, FeynmanKacTail, MonteCarloTail


def test_params_round_trip():
    est = MonteCarloTail(alpha=1.5, n=123, seed=9)
    assert est.get_params()["n"] == 123
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    assert BVPTail().set_params(nodes=200).nodes == 200


@pytest.mark.parametrize("est", [MonteCarloTail(), BVPTail(), FeynmanKacTail()])
def test_predict_before_fit(est):
    with pytest.raises(NotFittedError):
        est.predict([1.0])


def test_bvp_estimator():
    est = BVPTail(alpha=1.0).fit()
    p = est.predict([25.0, 100.0])
    assert p[0] > p[1]
    assert est.predict(np.array([[100.0]]))[0] == pytest.approx(p[1])
    assert 0.8 < 10 * p[1] / np.sqrt(2) < 1.2
    with pytest.raises(ValueError):
        est.predict([0.0])


def test_monte_carlo_estimator():
    est = MonteCarloTail(alpha=1.0, n=20_000, seed=3).fit([10.0, 40.0])
    assert est.levels_.tolist() == [10.0, 40.0]
    assert -0.7 < est.slope_ < -0.3
    p = est.predict([10.0, 20.0, 40.0, 80.0])
    assert p[0] == pytest.approx(est.p_hat_[0]) and p[2] == pytest.approx(est.p_hat_[1])
    assert p[0] > p[1] > p[2] > p[3]
    again = MonteCarloTail(alpha=1.0, n=20_000, seed=3).fit([40.0, 10.0])
    np.testing.assert_array_equal(again.p_hat_, est.p_hat_)


def test_monte_carlo_rejects_bad_levels():
    with pytest.raises(ValueError):
        MonteCarloTail(n=10).fit([-1.0, 2.0])
    with pytest.raises(ValueError):
        MonteCarloTail(alpha=2.0, n=10).fit([1.0])


def test_feynman_kac_estimator():
    xs = [0.5, 2.0, 10.0]
    est = FeynmanKacTail(alpha=1.0, iters=6, n_per_node=800, seed=1).fit(xs)
    bvp = BVPTail(alpha=1.0).fit().predict(xs)
    np.testing.assert_allclose(est.predict(xs), bvp, atol=0.04)
    assert est.std_err_.shape == (3,)
