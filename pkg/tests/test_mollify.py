import numpy as np
import pytest

from marangoni.mollify import (BumpTransform, MollifierSpec, gauss_panel,
                               mollifier, mollifier_derivative)


def test_unit_mass():
    for eps in (1.0, 0.05, 3e-4):
        y, w = gauss_panel(-eps, eps, 200)
        assert abs(np.sum(w * mollifier(eps, y)) - 1.0) < 1e-12


def test_compact_support():
    eps = 0.05
    assert mollifier(eps, eps) == 0.0
    assert mollifier(eps, -eps) == 0.0
    ys = np.array([-10.0, -2 * eps, eps * 1.0000001, 5.0])
    assert np.all(mollifier(eps, ys) == 0.0)
    assert mollifier(eps, 0.0) > 0.0


def test_derivative_scaling_bound():
    # sup|d/dy delta_eps| <= c1 / eps^2 with one c1 across widths
    cs = []
    for eps in (0.2, 0.05, 0.01):
        t = np.linspace(-1, 1, 20001)
        sup = np.abs(mollifier_derivative(eps, t * eps)).max()
        cs.append(sup * eps ** 2)
    assert max(cs) - min(cs) < 1e-8          # pure scaling
    assert max(cs) < 10.0


def test_derivative_matches_fd():
    eps = 0.1
    y = np.linspace(-0.099, 0.099, 57)
    fd = (mollifier(eps, y + 1e-7) - mollifier(eps, y - 1e-7)) / 2e-7
    assert np.abs(fd - mollifier_derivative(eps, y)).max() < 1e-4


def test_spec_validation():
    with pytest.raises(ValueError):
        MollifierSpec(-1.0)
    with pytest.raises(ValueError):
        MollifierSpec(0.1, shape="gaussian")


class TestBumpTransform:
    def test_unit_at_zero(self):
        bt = BumpTransform(0.25, 0.05)
        assert abs(bt.transform(0.0) - 1.0) < 1e-13
        assert abs(bt.defect(0.0)) < 1e-15

    def test_decay(self):
        bt = BumpTransform(0.25, 0.05)
        # transform -> 0, defect -> -1 for large Re p
        assert abs(bt.transform(200.0)) < 1e-15
        assert abs(bt.defect(200.0) + 1.0) < 1e-15

    def test_complex_argument(self):
        bt = BumpTransform(0.3, 0.05)
        p = 2.0 + 1.5j
        y, w = gauss_panel(0.25, 0.35, 400)
        ref = np.sum(w * mollifier(0.05, y - 0.3) * np.exp(-p * y))
        assert abs(bt.transform(p) - ref) < 1e-12

    def test_support_guard(self):
        with pytest.raises(ValueError):
            BumpTransform(0.05, 0.1)    # support would cross y = 0
