"""Session-wide bookkeeping shared by the property and acceptance suites."""

from collections import Counter

CASES = 10_000
COUNTS = Counter()  # property name -> cases executed
OUTCOMES = {}  # property test name -> "passed" / "failed"
ACCEPTANCE = {}  # criterion number -> (passed, detail)


def tally(name):
    COUNTS[name] += 1


def record(criterion, passed, detail):
    ACCEPTANCE[criterion] = (bool(passed), detail)
