import numpy as np
import pytest

from mcgame.model import ChannelRealization, SystemConfig


def orthogonal_signatures(num_users, processing_gain):
    """Rows of a Sylvester-Hadamard matrix scaled to unit norm."""
    h = np.array([[1.0]])
    while h.shape[0] < processing_gain:
        h = np.block([[h, h], [h, -h]])
    return h[:num_users, :processing_gain] / np.sqrt(processing_gain)


def make_channel(gains, processing_gain=16, signatures=None, seed=0):
    gains = np.asarray(gains, dtype=float)
    if signatures is None:
        return ChannelRealization.from_gains(gains, processing_gain,
                                             rng=np.random.default_rng(seed))
    return ChannelRealization(gains, signatures)


@pytest.fixture
def config2x2():
    return SystemConfig(num_users=2, num_carriers=2, processing_gain=16)


def pytest_terminal_summary(terminalreporter):
    module = __import__("sys").modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
