import heapq
import itertools

import numpy as np
import pytest

from hyperfill.fixtures import cantor, fix_a, fix_b, grid1d, grid2d


@pytest.fixture(scope="session")
def fixa():
    return fix_a()


@pytest.fixture(scope="session")
def fixb():
    return fix_b()


@pytest.fixture(scope="session")
def small_fixtures():
    """Instances cheap enough for exhaustive checks."""
    return [fix_a(), fix_b(), grid1d(16), cantor(2), grid2d(4)]


def heap_dijkstra(n, src, dst, length, sources):
    """Plain binary-heap Dijkstra, kept independent of scipy."""
    adj = [[] for _ in range(n)]
    for a, b, ell in zip(src, dst, length):
        adj[a].append((b, ell))
        adj[b].append((a, ell))
    dist = np.full(n, np.inf)
    heap = []
    for s in sources:
        dist[s] = 0.0
        heap.append((0.0, int(s)))
    heapq.heapify(heap)
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist[v]:
            continue
        for w, ell in adj[v]:
            nd = d + ell
            if nd < dist[w]:
                dist[w] = nd
                heapq.heappush(heap, (nd, w))
    return dist


def maximal_separated_supersets(dist, base, r):
    """All maximal r-separated subsets containing ``base`` (exhaustive, n <= 10)."""
    n = dist.shape[0]
    rest = [z for z in range(n) if z not in set(base)]

    def separated(s):
        return all(dist[a, b] >= r for a, b in itertools.combinations(s, 2))

    found = []
    for k in range(len(rest) + 1):
        for extra in itertools.combinations(rest, k):
            s = sorted(set(base) | set(extra))
            if not separated(s):
                continue
            if all(not separated(s + [z]) for z in range(n) if z not in s):
                found.append(s)
    return found


_VERDICTS = []


@pytest.fixture
def verdict():
    """Print and record one PASS/FAIL line per acceptance criterion."""
    def emit(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {label}: {detail}"
        print(line)
        _VERDICTS.append(line)
        return ok
    return emit


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
