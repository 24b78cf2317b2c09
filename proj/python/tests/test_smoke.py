import math

import numpy as np
import pytest

import qarspec


def test_tau_grid():
    assert qarspec.tau_grid(5) == pytest.approx([0.1, 0.3, 0.5, 0.7, 0.9])


def test_fit_path_shape():
    data = qarspec.simulate("case1", T=120, seed=7)
    out = qarspec.fit_path(list(data["y"]), 1, [0.25, 0.5, 0.75])
    assert np.asarray(out["coefficients"]).shape == (3, 2)


def test_factor_extraction_normalization():
    data = qarspec.simulate("case2", T=80, seed=3)
    fm = qarspec.extract_factors(np.asarray(data["panel"]), 1)
    f = np.asarray(fm["factors"])
    assert f.shape == (80, 1)
    assert f[:, 0] @ f[:, 0] / 80 == pytest.approx(1.0, abs=1e-10)


def test_spec_test_is_deterministic():
    data = qarspec.simulate("case2", T=100, seed=11)
    kw = dict(m=5, boot_reps=19, seed=5, factors=np.asarray(data["factors"]))
    a = qarspec.spec_test(list(data["y"]), **kw)
    b = qarspec.spec_test(list(data["y"]), **kw)
    assert a["cvm"] == b["cvm"] and a["p_cvm"] == b["p_cvm"]
    assert 0.0 <= a["p_cvm"] <= 1.0


def test_skewt_roundtrip():
    q = qarspec.skewt_quantile(0.3, 1.0, 2.0, 3.0, 5.0)
    assert qarspec.skewt_cdf(q, 1.0, 2.0, 3.0, 5.0) == pytest.approx(0.3, abs=1e-10)
    assert qarspec.skewt_pdf(0.0, 0.0, 1.0, 0.0, 5.0) == pytest.approx(
        math.gamma(3) / (math.sqrt(5 * math.pi) * math.gamma(2.5)), rel=1e-12)


def test_fit_skewt_recovers_normal_like_targets():
    values = [qarspec.skewt_quantile(p, 0.0, 1.0, 0.0, 5.0) for p in (0.05, 0.25, 0.75, 0.95)]
    fit = qarspec.fit_skewt(values)
    assert fit["objective"] < 1e-12
    assert abs(fit["alpha"]) < 1e-4


def test_errors_are_typed():
    with pytest.raises(qarspec.ParameterError):
        qarspec.simulate("case9")
