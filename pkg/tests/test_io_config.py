import json
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from laserflash import io
from laserflash.config import load_config, with_chain
from laserflash.errors import ConfigError, SurrogateMismatchError, ThermogramParseError
from laserflash.mcmc import ChainConfig, rwmh
from laserflash.pipeline import forward, synthesize_data
from laserflash.solvers import Thermogram

from conftest import COPPER_INI, copper

TABLE2 = {"R": 1.240e-2, "H": 2.037e-3, "T": 4.000e-2, "t_f": 4.000e-4, "z_f": 1.273e-4}


def test_copper_config_loads():
    c = copper()
    for k, v in TABLE2.items():
        assert getattr(c.geometry, k) == v
    assert c.geometry.L == pytest.approx(c.geometry.R / 2)
    m = c.material
    assert (m.rho, m.c_p, m.kappa, m.T_a) == (8.930e3, 3.970e2, 1.100e3, 385.0)
    assert c.disc.n_d == 401 and c.disc.n_t % (c.disc.n_d - 1) == 0
    assert c.disc.k == 6 and c.profile.kind == "uniform"
    assert c.box.bounds[0] == pytest.approx((150.0, 507.0))
    assert c.chain.thin == 1 and c.analysis.bins == 100


def write_ini(tmp_path, drop=None, **edits):
    lines = []
    section = None
    for line in COPPER_INI.read_text().splitlines():
        s = line.strip()
        if s.startswith("["):
            section = s[1:-1]
        key = s.split("=", 1)[0].strip() if "=" in s and not s.startswith("#") else None
        if key and f"{section}.{key}" == drop:
            continue
        if key and f"{section}.{key}" in edits:
            line = f"{key} = {edits[f'{section}.{key}']}"
        lines.append(line)
    path = tmp_path / "c.ini"
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.mark.parametrize("kw, match", [
    ({"edits": {"discretization.n_t": "801"}}, "discretization"),
    ({"edits": {"material.kappa": "-1"}}, "material"),
    ({"drop": "geometry.L"}, "geometry.L"),
    ({"edits": {"geometry.R": "abc"}}, "geometry.R"),
    ({"edits": {"discretization.n_t": "40.5"}}, "discretization.n_t"),
    ({"edits": {"box.lambda_max": "100"}}, "box"),
])
def test_config_rejections(tmp_path, kw, match):
    path = write_ini(tmp_path, drop=kw.get("drop"), **kw.get("edits", {}))
    with pytest.raises(ConfigError, match=match):
        load_config(path)


def test_config_optional_defaults(tmp_path):
    path = write_ini(tmp_path, drop="chain.thin")
    text = path.read_text()
    start, end = text.index("[box]"), text.index("[prior]")
    path.write_text(text[:start] + text[end:])
    c = load_config(path)
    assert c.chain.thin == 1
    assert c.box.bounds[1] == pytest.approx((0.6e12, 1.8e12))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.ini")


def test_overrides():
    c = copper("chain.M=12345", "discretization.k=3", "laser.profile=gaussian",
               "laser.r_f=4.1333e-3", "analysis.windows=1e12:1.1e12, 1.2e12:1.3e12")
    assert c.chain.M == 12345 and c.disc.k == 3
    assert c.profile.kind == "gaussian" and c.profile.r_f == 4.1333e-3
    assert c.analysis.windows == ((1e12, 1.1e12), (1.2e12, 1.3e12))
    with pytest.raises(ConfigError):
        copper("nodot=3")
    assert copper().surrogate_hash() == copper("chain.M=50000").surrogate_hash()
    assert copper().surrogate_hash() != copper("material.kappa=1000").surrogate_hash()


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(n=st.integers(2, 60), dt=st.floats(1e-6, 1.0),
       seed=st.integers(0, 2 ** 32 - 1))
def test_thermogram_round_trip(tmp_path, n, dt, seed):
    r = np.random.default_rng(seed)
    th = Thermogram(dt * np.arange(n), 385.0 + r.normal(0, 3, n) * 10.0 ** r.uniform(-10, 2, n))
    back = io.read_thermogram(io.write_thermogram(tmp_path / "th.csv", th))
    assert np.array_equal(back.times, th.times) and np.array_equal(back.temps, th.temps)


def test_full_length_thermogram(tmp_path):
    th = Thermogram(np.linspace(0, 0.04, 401), np.full(401, 385.0))
    assert len(io.read_thermogram(io.write_thermogram(tmp_path / "a.csv", th))) == 401


@pytest.mark.parametrize("body, match", [
    ("time_s,temperature_K\n0.0,385.0\n", "at least 2"),
    ("time_s,temperature_K\n0.0,385.0\n0.1,abc\n", ":3:"),
    ("time_s,temperature_K\n0.0,385.0\n0.1,1,2\n", ":3:"),
    ("time_s,temperature_K\n0.0,385.0\n0.1,385.1\n0.1,385.2\n", ":4:.*increasing"),
    ("t,T\n0.0,385.0\n0.1,385.1\n", ":1:"),
    ("time_s,temperature_K\n0.0,385.0\n0.1,385.1\n0.25,385.2\n", "equally spaced"),
])
def test_thermogram_rejections(tmp_path, body, match):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(ThermogramParseError, match=match):
        io.read_thermogram(p)


def test_surrogate_round_trip(tmp_path, small_config, small_surrogate):
    p = io.save_surrogate(tmp_path / "s.npz", small_surrogate)
    back = io.load_surrogate(p, expected_hash=small_config.surrogate_hash())
    assert np.array_equal(back.B, small_surrogate.B)
    assert np.array_equal(back.times, small_surrogate.times)
    assert back.basis.indices == small_surrogate.basis.indices
    assert back.box == small_surrogate.box and back.disc == small_surrogate.disc
    other = copper("material.kappa=1000", "discretization.h_target=3.4e-4",
                   "discretization.n_t=40", "discretization.n_d=41")
    with pytest.raises(SurrogateMismatchError):
        io.load_surrogate(p, expected_hash=other.surrogate_hash())


def test_chain_round_trip(tmp_path):
    ch = rwmh(lambda t: -0.5 * (t[0] ** 2 + t[1] ** 2),
              ChainConfig(M=500, n_B=100, thin=3, beta=1.0, seed=2, theta0=(5.8, 27.8)))
    back = io.read_chain(io.write_chain(tmp_path / "chain.csv", ch))
    assert np.array_equal(back.samples, ch.samples)
    assert np.array_equal(back.indices, ch.indices)
    assert np.array_equal(back.accepted_flags, ch.accepted_flags)
    assert (back.accepted, back.proposed, back.seed, back.beta) == (ch.accepted, ch.proposed,
                                                                    ch.seed, ch.beta)


def test_synthesize_data(small_config, small_ops):
    c = small_config
    clean = forward(c, 355.15, 1.1816e12, small_ops)
    zero = synthesize_data(c, 355.15, 1.1816e12, 0.0, 3, small_ops)
    assert np.array_equal(zero.temps, clean.temps)
    a = synthesize_data(c, 355.15, 1.1816e12, 0.05, 3, small_ops)
    b = synthesize_data(c, 355.15, 1.1816e12, 0.05, 3, small_ops)
    assert np.array_equal(a.temps, b.temps)
    d401 = copper("discretization.h_target=3.4e-4")
    noisy = synthesize_data(d401, 355.15, 1.1816e12, 0.05, 11)
    sd = np.std(noisy.temps - forward(d401, 355.15, 1.1816e12).temps, ddof=1)
    assert abs(sd / 0.05 - 1) <= 0.15


def test_summary_json(tmp_path):
    p = io.write_summary(tmp_path / "s.json", {"a": np.float64(1.5), "b": math.nan,
                                               "c": [np.int64(2), np.bool_(True)]})
    assert json.loads(p.read_text()) == {"a": 1.5, "b": None, "c": [2, True]}


def test_with_chain(small_config):
    c = with_chain(small_config, M=10, n_B=0)
    assert c.chain.M == 10 and c.geometry == small_config.geometry
