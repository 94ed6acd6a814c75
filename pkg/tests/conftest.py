"""Shared fixtures and a brute-force lattice oracle.

The oracle evaluates ``u_n(m 2^-n)`` by memoized recursion straight from the
update rule, with plain Python integers.  It shares no code with the sweep
engine, so agreement between the two is a real check.
"""
import functools
import sys

import pytest

sys.setrecursionlimit(100000)


def oracle_field(f, g, add, a, b, N, reg, horizon_ticks):
    """Dict ``(n, m) -> value`` for scales ``0..N+1`` and times ``m 2^-n <= horizon``.

    ``f``, ``g`` are callables, ``add`` the group operation, ``a``/``b`` the
    initial and boundary lists (zero tails), ``reg(m)`` the value of scale
    ``N+1`` at tick ``m`` of its own grid and ``horizon_ticks`` the horizon in
    ticks of scale ``N+1``.
    """
    K = N + 1

    @functools.lru_cache(maxsize=None)
    def u(n, m):
        if n == 0:
            return b[m] if m < len(b) else 0
        if n == K:
            return reg(m)
        if m == 0:
            return a[n - 1] if n - 1 < len(a) else 0
        v = f(u(n, m - 1), u(n + 1, 2 * (m - 1)))
        if m % 2 == 0:
            v = add(v, g(u(n - 1, (m - 2) // 2), u(n, m - 2)))
        return v

    out = {}
    for n in range(K + 1):
        for m in range((horizon_ticks >> (K - n)) + 1):
            out[n, m] = u(n, m)
    return out


def bit_rules(f_table, g_table):
    return (lambda x, y: f_table[2 * x + y], lambda x, y: g_table[2 * x + y], lambda x, y: x ^ y)


@pytest.fixture
def oracle():
    return oracle_field


# acceptance criteria register here and are summarized at the end of the run
CRITERIA: dict[int, tuple[str, bool, float]] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        title, ok, secs = CRITERIA[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {title}  ({secs:.1f}s)")
