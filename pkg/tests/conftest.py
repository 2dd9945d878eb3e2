import numpy as np
import pytest

from geomlab import geometry, zoo

# (name, m) for every supported zoo instance
ZOO_CASES = [(name, m) for name in zoo.names() for m in zoo.get(name).dims]


def interior_points(spec, count, seed=0, margin=0.3):
    """Random chart points with r > margin where the metric validates.

    Rejection sampling from [-1, 1]^m.  The margin keeps the central
    differences of the oracle well inside their truncation budget.
    """
    rng = np.random.default_rng(seed)
    pts = []
    tries = 0
    while len(pts) < count:
        tries += 1
        if tries > 200 * count:
            raise RuntimeError(f"could not sample interior points of {spec.name}")
        p = rng.uniform(-1.0, 1.0, spec.dim)
        try:
            if geometry.defining_value(spec, p) <= margin:
                continue
            geometry.validate(spec, [p])
        except (ArithmeticError, ValueError):
            continue
        pts.append(p)
    return pts


@pytest.fixture(scope="session")
def klein3():
    return zoo.instantiate("klein_hyperbolic", 3)


@pytest.fixture(scope="session")
def klein2():
    return zoo.instantiate("klein_hyperbolic", 2)


# one "criterion N: PASS/FAIL" line per acceptance criterion, filled by test_acceptance
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
