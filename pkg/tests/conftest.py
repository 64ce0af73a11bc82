import itertools
import math

import numpy as np
import pytest
from hypothesis import settings

from ordinal_shapley.synthetic import TableUtility

settings.register_profile("default", deadline=None)
settings.load_profile("default")


@pytest.fixture
def hand_game():
    """Two players; order matters only in the grand coalition."""
    return TableUtility(2, {(0,): 1.0, (1,): 2.0, (0, 1): 4.0, (1, 0): 3.0})


def brute_partial_ordinal(U):
    """Average append-marginal over every ordering, straight from the definition."""
    n = U.n_players
    phi = np.zeros(n)
    for perm in itertools.permutations(range(n)):
        for j, p in enumerate(perm):
            phi[p] += U(perm[: j + 1]) - U(perm[:j])
    return phi / math.factorial(n)


def brute_ordinal(U):
    """Each coalition size gets weight 1/n, spread evenly over ordered
    coalitions of the others (prefixes of their orderings) and insertion slots."""
    n = U.n_players
    phi = np.zeros(n)
    for i in range(n):
        others = [p for p in range(n) if p != i]
        total = 0.0
        for perm in itertools.permutations(others):
            for s in range(n):
                seq = perm[:s]
                for k in range(s + 1):
                    total += (U(seq[:k] + (i,) + seq[k:]) - U(seq)) / (s + 1)
        phi[i] = total / (math.factorial(n - 1) * n)
    return phi


# ---------------------------------------------------------------------------
# acceptance summary: one line per criterion at the end of the run

_ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        status = "PASS" if report.passed else "FAIL"
        detail = dict(item.user_properties).get("detail", "")
        _ACCEPTANCE[number] = (title, status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, status, detail = _ACCEPTANCE[number]
        line = f"[{status}] #{number} {title}"
        terminalreporter.write_line(f"{line}: {detail}" if detail else line)
