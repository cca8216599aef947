import math

import pytest

import tmrange


def test_bound_floor():
    p = tmrange.ranging_power(0.444)
    assert p == pytest.approx(2 * 0.2165**2, rel=5e-3)
    bound, theory = tmrange.jitter_bound(p, 0.0, 1500.0, 1 / 3e6, 0.240)
    assert theory == 0.0
    assert bound == pytest.approx(1.5e-5, rel=1e-9)


def test_bound_thermal_term():
    p = tmrange.ranging_power(0.444)
    n0 = tmrange.n0_from_pn0bl(30.0, p, 1500.0)
    _, theory = tmrange.jitter_bound(p, n0, 1500.0, 1 / 3e6, 0.0)
    assert theory == pytest.approx(1 / (8 * 1000), rel=1e-9)


def test_constellation_unit_power():
    for name in ("qpsk", "8psk", "16apsk", "32apsk", "64apsk"):
        pts = tmrange.constellation_points(name)
        assert sum(abs(z) ** 2 for z in pts) / len(pts) == pytest.approx(1.0, abs=1e-12)


def test_code_period():
    chips = tmrange.code_chips("t4b", 2000)
    assert set(chips) == {-1, 1}
    assert tmrange.code_period("t4b") == 1009470
    assert tmrange.code_chips("t4b", 40, phase=10) == chips[10:50]
    with pytest.raises(ValueError):
        tmrange.code_chips("t4b", 10, phase=1009470)


def test_sigma2_p_qpsk():
    assert tmrange.sigma2_p({"constellation": "qpsk", "rolloff": 0.2}, 100000, 3) == pytest.approx(0.240, abs=0.01)
    assert tmrange.sigma2_p({"constellation": "constant"}, 20000, 3) < 1e-20


def test_ber_theory_qpsk():
    q = 0.5 * math.erfc(math.sqrt(2 * 10 ** 0.6) / math.sqrt(2))
    assert tmrange.ber_theory("qpsk", 6.0) == pytest.approx(q, rel=1e-9)


def test_small_sweep_is_deterministic():
    cfg = {"bl": 30000, "snr": [20, 40], "trials": 2, "seed": 5, "threads": 1}
    a = tmrange.run_experiment(cfg)
    b = tmrange.run_experiment(dict(cfg, threads=2))
    assert a == b
    assert [r["snr_db"] for r in a] == [20, 40]
    assert a[0]["jitter_var_norm"] > a[1]["jitter_var_norm"]
    for r in a:
        assert r["jitter_var_norm"] <= 1.1 * r["jitter_bound_norm"]


def test_config_defaults():
    c = tmrange.config({"m-rg": 0.222})
    assert c["m_rg"] == 0.222
    assert c["constellation"] == "qpsk"
    assert c["n_symbols"] > 0


def test_bad_field_raises():
    with pytest.raises(ValueError, match="rolloff"):
        tmrange.config({"rolloff": 2})
