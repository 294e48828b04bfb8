import numpy as np
import pytest
from hypothesis import settings

from dmdmodal import synth
from dmdmodal.snapshots import remove_mean

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def sdof_snap():
    return synth.sdof_paper_snapshots()


@pytest.fixture(scope="session")
def chain6():
    return synth.chain6_paper()


@pytest.fixture(scope="session")
def chain6_truth(chain6):
    return synth.modal_ground_truth(chain6)


@pytest.fixture(scope="session")
def chain6_master():
    return synth.chain6_paper_snapshots()


@pytest.fixture(scope="session")
def chain6_free_decay(chain6, chain6_truth, chain6_master):
    """Step response minus the exact static solution: pure free decay."""
    static = np.linalg.solve(chain6.stiffness_matrix, chain6.force_pattern)
    return chain6_master.replace(data=chain6_master.data - static[:, None])


@pytest.fixture(scope="session")
def chain6_centred(chain6_master):
    return remove_mean(chain6_master)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import VERDICTS

    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
