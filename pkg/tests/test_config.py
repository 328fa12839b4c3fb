import pytest

from qcstats.config import Settings, load_settings
from qcstats.core import ConfigError


def test_defaults_from_empty_env():
    s = load_settings({})
    assert s == Settings(threads=1, db_uri=None, seed=0, chi_points=1024)


def test_values_from_env():
    s = load_settings(
        {
            "QCSTATS_THREADS": "4",
            "QCSTATS_DB_URI": " sqlite:///runs.db ",
            "QCSTATS_SEED": "11",
            "QCSTATS_CHI_POINTS": "2048",
        }
    )
    assert (s.threads, s.db_uri, s.seed, s.chi_points) == (4, "sqlite:///runs.db", 11, 2048)


@pytest.mark.parametrize(
    "env",
    [{"QCSTATS_THREADS": "0"}, {"QCSTATS_THREADS": "many"}, {"QCSTATS_SEED": "-1"}, {"QCSTATS_CHI_POINTS": "8"}],
)
def test_invalid_values_raise(env):
    with pytest.raises(ConfigError):
        load_settings(env)


def test_override_ignores_none():
    s = Settings().override(threads=8, seed=None, db_uri=None)
    assert s.threads == 8
    assert s.seed == 0
