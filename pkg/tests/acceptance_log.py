"""Shared record of acceptance-criterion outcomes, printed at the end of the run."""
from contextlib import contextmanager

RESULTS = []


@contextmanager
def criterion(number: int, title: str):
    """Record PASS or FAIL for one criterion; the yielded list collects detail notes."""
    notes = []
    try:
        yield notes
    except BaseException as exc:
        first = (str(exc).splitlines() or [""])[0]
        RESULTS.append((number, title, False, f"{type(exc).__name__}: {first}"))
        raise
    RESULTS.append((number, title, True, "; ".join(notes)))
