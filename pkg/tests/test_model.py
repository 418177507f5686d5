import json
import math

import numpy as np
import pytest

from skewshift.model import (
    JacobiModel,
    ModelAdmissionError,
    TrigPoly1,
    TrigPoly2,
    default_theorem_model,
    derive_constants,
    load_model,
    model_from_dict,
    model_to_dict,
    save_model,
)
from skewshift.torus import GOLDEN_MEAN, Frequency

from conftest import constant_model, make_model


def test_trigpoly1_eval():
    a = TrigPoly1(((0, 1.5, 0.0), (1, 0.4, 0.0)))
    assert a(0.0) == pytest.approx(1.9)
    assert a(0.5) == pytest.approx(1.1)
    assert a.eval_scalar(0.25) == pytest.approx(1.5)
    ys = np.linspace(0, 1, 7)
    assert np.allclose(a(ys), 1.5 + 0.4 * np.cos(2 * np.pi * ys))


def test_trigpoly1_deriv_bound():
    a = TrigPoly1(((1, 0.4, 0.3),))
    assert a.deriv_bound() == pytest.approx(2 * math.pi * 0.7)


def test_trigpoly2_eval():
    v = TrigPoly2.cos_x()
    assert v(0.0, 0.37) == pytest.approx(1.0)
    assert v(0.5, 0.0) == pytest.approx(-1.0)
    xs = np.linspace(0, 1, 5)
    assert np.allclose(v(xs, np.zeros(5)), np.cos(2 * np.pi * xs))


def test_trigpoly2_mixed_term():
    v = TrigPoly2(((1, 2, 0.0, 0.0, 0.0, 0.7),))
    x, y = 0.13, 0.29
    want = 0.7 * math.sin(2 * math.pi * x) * math.sin(4 * math.pi * y)
    assert v(x, y) == pytest.approx(want)
    assert v.eval_scalar(x, y) == pytest.approx(want)


def test_trigpoly2_is_constant():
    assert TrigPoly2.constant(3.0).is_constant()
    assert not TrigPoly2.cos_x().is_constant()


def test_derive_constants_default():
    m = default_theorem_model()
    assert m.lam == 1e6
    assert m.sup_norm_v == pytest.approx(1.0, abs=5e-3)  # includes Lipschitz padding
    assert 1.0 <= m.inf_abs_a <= m.sup_abs_a <= 2.0
    assert m.inf_abs_a == pytest.approx(1.1, abs=1e-3)
    assert m.sup_abs_a == pytest.approx(1.9, abs=1e-3)
    # C >= max(e, 4(1+||v||)(1+sup|a|))
    assert m.constant_cva == pytest.approx(4 * 2.0 * 2.9, rel=1e-2)
    assert m.scaling_factor(0.0) == pytest.approx(math.log(m.constant_cva + 1e6))
    assert m.scaling_factor(0.0) >= 1.0


def test_log_avg_a_quadrature_oracle():
    # mean of log(1.5 + 0.4 cos) = log((1.5 + sqrt(1.5^2 - 0.4^2)) / 2)
    m = make_model()
    want = math.log((1.5 + math.sqrt(1.5**2 - 0.4**2)) / 2.0)
    assert m.log_avg_a == pytest.approx(want, abs=1e-10)


def test_admission_rejects_small_a():
    with pytest.raises(ModelAdmissionError):
        make_model(a=TrigPoly1.constant(0.9))


def test_admission_rejects_large_a():
    with pytest.raises(ModelAdmissionError):
        make_model(a=TrigPoly1(((0, 1.5, 0.0), (1, 0.8, 0.0))))


def test_admission_rejects_negative_lambda():
    with pytest.raises(ModelAdmissionError):
        make_model(lam=-1.0)


def test_theorem_mode_rejects_constant_v():
    with pytest.raises(ModelAdmissionError):
        make_model(v=TrigPoly2.constant(1.0), theorem_mode=True)
    # fine outside theorem mode
    make_model(v=TrigPoly2.constant(1.0), theorem_mode=False)


def test_lipschitz_base_dominates():
    m = make_model(lam=5.0)
    # must dominate |lam v - E| + 2 sup|a| for |E| <= energy_bound
    assert m.lipschitz_base >= m.lam * m.sup_norm_v + m.energy_bound + 2 * m.sup_abs_a


def test_energy_bound():
    m = default_theorem_model()
    assert m.energy_bound == pytest.approx(1e6 * m.sup_norm_v + 2 * m.sup_abs_a + 1.0)


def test_roundtrip_dict():
    m = default_theorem_model()
    m2 = model_from_dict(model_to_dict(m))
    assert m2.model_hash == m.model_hash
    assert m2.lam == m.lam
    assert m2.constant_cva == m.constant_cva


def test_roundtrip_file(tmp_path):
    m = make_model(lam=3.0)
    path = tmp_path / "m.json"
    save_model(m, str(path))
    m2 = load_model(str(path))
    assert m2.model_hash == m.model_hash
    raw = json.loads(path.read_text())
    assert set(raw) >= {"a_coeffs", "v_coeffs", "lambda", "omega", "epsilon"}


def test_hash_sensitive_to_lambda():
    assert make_model(lam=2.0).model_hash != make_model(lam=3.0).model_hash


def test_constant_model_admitted():
    m = constant_model(a0=1.0, v0=0.0, lam=0.0)
    assert m.log_avg_a == pytest.approx(0.0)
    assert m.eval_a(0.42) == 1.0
