import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from nlsmulti import config as rc
from nlsmulti.errors import ConfigError


def test_defaults_roundtrip():
    cfg = rc.RunConfig()
    text = rc.dumps(cfg)
    assert rc.loads(text) == cfg
    assert rc.dumps(rc.loads(text)) == text


def test_exponent_floats_without_dot():
    cfg = rc.loads("integrator: {dt: 1e-3, t_end: 2}\n")
    assert cfg.integrator.dt == 1e-3
    assert cfg.integrator.t_end == 2


def test_empty_document_gives_defaults():
    assert rc.loads("") == rc.RunConfig()


@pytest.mark.parametrize("text, where", [
    ("grid: {L: 40, NN: 10}\n", "grid"),
    ("integrator: {dt: -1}\n", "integrator/dt"),
    ("solitons: []\n", "solitons"),
    ("solitons: [{v: 0.1}]\n", "solitons/0"),
    ("perturbation: {shape: square}\n", "perturbation/shape"),
    ("verify: {verifiers: [nope]}\n", "verify/verifiers/0"),
    ("seed: -3\n", "seed"),
    ("shooting: {solver: bisect}\n", "shooting/solver"),
])
def test_schema_errors_name_the_field(text, where):
    with pytest.raises(ConfigError) as exc:
        rc.loads(text)
    assert where in str(exc.value)


def test_semantic_checks():
    # solitons must be listed with strictly decreasing centers
    with pytest.raises(ConfigError):
        rc.loads("solitons:\n  - {y: -5, alpha: 1}\n  - {y: 5, alpha: 1}\n")
    with pytest.raises(ConfigError):
        rc.loads("grid: {L: 40, N: 9}\n")
    with pytest.raises(ConfigError):
        rc.loads("integrator: {dt: 0.1, t_end: 0.01}\n")
    with pytest.raises(ConfigError):
        rc.loads("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        rc.loads("grid: {L: [\n")


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        rc.load(tmp_path / "missing.yaml")


def test_multi_soliton_from_config():
    cfg = rc.loads("solitons:\n  - {v: 0.2, y: 20, alpha: 0.5}\n  - {v: -0.2, y: -20, alpha: 0.5, gamma: 1}\n")
    sig = cfg.multi_soliton()
    assert sig.m == 2
    assert sig.solitons[1].gamma == 1.0


_sol = st.fixed_dictionaries({
    "v": st.floats(-2, 2, allow_nan=False), "y": st.floats(-5, 5, allow_nan=False),
    "alpha": st.floats(0.1, 3, allow_nan=False), "gamma": st.floats(-3, 3, allow_nan=False)})


@settings(max_examples=40, deadline=None)
@given(dt=st.floats(1e-6, 1e-1), L=st.floats(5, 200), n=st.integers(4, 12), sol=_sol,
       seed=st.integers(0, 2 ** 64 - 1), tol=st.floats(1e-30, 1.0))
def test_roundtrip_property(dt, L, n, sol, seed, tol):
    data = {"seed": seed, "grid": {"L": L, "N": 2 ** n},
            "integrator": {"dt": dt, "t_end": 1.0}, "solitons": [sol],
            "verify": {"tolerances": {"interactt_tail_growth": tol}}}
    cfg = rc.from_dict(data)
    text = rc.dumps(cfg)
    back = rc.loads(text)
    assert back == cfg
    assert rc.dumps(back) == text
    assert yaml.safe_load(text)["seed"] == seed
