import pytest

from gapmeans.lacunary import theorem1_series
from gapmeans.weights import parse_weight_spec

# synthesized series are deterministic, so build each weight once per session
_CACHE = {}


def series_for(spec: str, **kw):
    key = (spec, tuple(sorted(kw.items())))
    if key not in _CACHE:
        _CACHE[key] = theorem1_series(parse_weight_spec(spec), **kw)
    return _CACHE[key]


@pytest.fixture(scope="session")
def alpha1_series():
    return series_for("power:alpha=1")


@pytest.fixture(scope="session")
def alpha2_series():
    return series_for("power:alpha=2")


@pytest.fixture(scope="session")
def exp_series():
    return series_for("exp:c=1,beta=1")


@pytest.fixture(scope="session")
def log_series():
    return series_for("log:gamma=3")
