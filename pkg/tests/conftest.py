import numpy as np
import pytest

from cpsseq.coding import Channel, CodingScheme, MultichannelSequence, default_scheme


@pytest.fixture(scope="session")
def scheme():
    return default_scheme()


@pytest.fixture(scope="session")
def small_scheme():
    return CodingScheme((Channel("A", ("a", "b", "c")), Channel("X", ("x", "y", "z"))))


def random_sequence(rng, scheme, length, missing=0.2, sid="s"):
    """Random sequence over ``scheme`` with each entry MISSING w.p. ``missing``."""
    positions = []
    for _ in range(length):
        pos = []
        for ch in scheme.channels:
            if rng.random() < missing:
                pos.append(None)
            else:
                pos.append(ch.codes[int(rng.integers(len(ch.codes)))])
        positions.append(tuple(pos))
    return MultichannelSequence.from_positions(sid, positions, scheme.n_channels)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def groups_from_summary(means, sds, ns, seed=0):
    """Raw groups whose sample mean/SD (n-1) equal the targets exactly:
    z-score arbitrary draws, rescale, shift."""
    rng = np.random.default_rng(seed)
    out = []
    for m, s, n in zip(means, sds, ns):
        x = rng.normal(size=n)
        z = (x - x.mean()) / x.std(ddof=1)
        out.append(m + s * z)
    return out


# published per-type code frequency summaries: code -> (means, sds, F)
PUBLISHED_ROWS = {
    "Int-B": ((176.20, 105.43, 52.40), (19.83, 42.95, 20.98), 14.91),
    "KS": ((23.60, 56.36, 39.60), (17.95, 21.68, 13.72), 5.43),
    "TU": ((28.80, 7.36, 11.00), (12.76, 6.34, 6.36), 13.44),
    "CM": ((160.80, 97.36, 42.20), (37.31, 34.18, 7.19), 17.67),
    "OB": ((154.20, 54.29, 146.80), (75.62, 26.77, 58.38), 12.41),
}
TYPE_SIZES = (5, 14, 5)


def three_state_model():
    """Well-separated 3-state model over 3 channels of 4 codes each."""
    from cpsseq.hmm import HmmModel

    trans = np.array([[0.9, 0.05, 0.05], [0.05, 0.9, 0.05], [0.05, 0.05, 0.9]])
    emission = []
    for shift in range(3):
        e = np.full((3, 4), 0.1 / 3)
        for s in range(3):
            e[s, (s + shift) % 4] = 0.9
        emission.append(e)
    return HmmModel(np.full(3, 1 / 3), trans, emission)


# one pass/fail line per acceptance criterion, shown in the terminal summary
_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    number, title = mark.args
    if report.when == "call" or (report.when == "setup" and report.failed):
        _CRITERIA[number] = (title, "PASS" if report.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:>2} {status}: {title}")
