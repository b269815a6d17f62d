import numpy as np
import pytest

import vchsim

SMALL = """
n = 12
T = 0.2
N = 8
potential = log
mobility = tanhpow
mu0 = bump 0.5 0.3 1 0.1
rho0 = constant 0.4
"""


def test_round_trip():
    c = vchsim.parse_config(SMALL)
    assert c.n == 12 and c.N == 8
    assert c.mobility == "tanhpow"
    assert vchsim.parse_config(c.render()) == c


def test_rejection_names_hypothesis():
    with pytest.raises(vchsim.ConfigError, match=r"line 2.*hpzero"):
        vchsim.parse_config("n = 8\nmu0 = constant -1\n")
    with pytest.raises(ValueError):
        vchsim.parse_config("n = 8\nbogus = 1\n")


def test_run_shapes_and_positivity():
    out = vchsim.run(vchsim.parse_config(SMALL))
    assert out["mu"].shape == (9, 12)
    assert out["t"][-1] == pytest.approx(0.2)
    assert out["mu"].min() >= -1e-10
    assert np.all((out["rho"] > 0) & (out["rho"] < 1))


def test_simulate_then_diagnose(tmp_path):
    vchsim.simulate(vchsim.parse_config(SMALL), str(tmp_path))
    assert (tmp_path / "manifest.txt").exists()
    rep = vchsim.diagnose(str(tmp_path))
    assert rep["violations"] == []
    assert len(rep["E_mu"]) == 9


def test_refinement_rows():
    c = vchsim.parse_config("n = 8\nT = 0.1\npotential = log\nmu0 = bump 0.5 0.3 1 0.1\n")
    rows = vchsim.tau_refinement(c, [4, 8, 16], 64)
    assert [r[0] for r in rows] == [4, 8, 16]
    assert rows[0][3] is None
    assert rows[-1][2] < rows[0][2]
