import datetime as dt

import numpy as np
import pytest

from pvrise.feeder import default_config, noise_free, simulate, single_site_config
from pvrise.model import Dataset, FeederConfig, PvSiteSpec, SiteStream


def make_stream(site_id, net, volt, pv=None, irr=None, day=None, minute=None, start="2017-01-01"):
    net = np.asarray(net, dtype=float)
    n = len(net)
    day = np.zeros(n, dtype=int) if day is None else np.asarray(day, dtype=int)
    minute = np.arange(n) % 1440 if minute is None else np.asarray(minute, dtype=int)
    pv = np.zeros(n) if pv is None else np.asarray(pv, dtype=float)
    irr = np.zeros(n) if irr is None else np.asarray(irr, dtype=float)
    volt = np.asarray(volt, dtype=float)
    return SiteStream(site_id, dt.date.fromisoformat(start), day, minute, net, volt, pv, volt.copy(), irr)


def make_dataset(streams, capacities=None, impedances=None):
    """Wrap hand-built streams in a Dataset with a matching single-line config."""
    n = len(streams)
    caps = capacities or [5.0] * n
    imps = impedances or [0.01 * (k + 1) for k in range(n)]
    sites = [PvSiteSpec(s.site_id, caps[k], imps[k], position_index=k) for k, s in enumerate(streams)]
    segs = np.diff(np.concatenate([[0.0], imps]))
    config = FeederConfig(sites=sites, segment_resistances_ohm=segs)
    return Dataset(config, {s.site_id: s for s in streams})


@pytest.fixture(scope="session")
def default_sim_20():
    return simulate(default_config(n_days=20, seed=1))


@pytest.fixture(scope="session")
def noise_free_single_day():
    return simulate(noise_free(single_site_config(n_days=1)))


# filled by test_acceptance, printed after the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
