"""Compensated streaming summation over integer index ranges."""

import numpy as np

#: Terms evaluated per vectorized chunk.
CHUNK = 1 << 20


class CompensatedSum:
    """Running sum with Neumaier (improved Kahan) compensation.

    >>> acc = CompensatedSum()
    >>> for x in (1.0, 1e100, 1.0, -1e100):
    ...     acc.add(x)
    >>> acc.value
    2.0
    """

    __slots__ = ("_s", "_c")

    def __init__(self):
        self._s = 0.0
        self._c = 0.0

    def add(self, x):
        x = float(x)
        t = self._s + x
        if abs(self._s) >= abs(x):
            self._c += (self._s - t) + x
        else:
            self._c += (x - t) + self._s
        self._s = t

    @property
    def value(self):
        return self._s + self._c


def stream_sum(term, start, stop, chunk=CHUNK):
    """Sum ``term(j)`` for integers ``start <= j <= stop``.

    ``term`` receives a float64 array of indices and must return an array of
    the same shape. Chunks are reduced with numpy's pairwise summation and
    the chunk totals are accumulated with compensation, so memory use is
    bounded by ``chunk`` regardless of the range length.
    """
    acc = CompensatedSum()
    lo = int(start)
    stop = int(stop)
    while lo <= stop:
        hi = min(lo + chunk - 1, stop)
        j = np.arange(lo, hi + 1, dtype=np.float64)
        acc.add(np.sum(term(j)))
        lo = hi + 1
    return acc.value


def tail_enclosure(integral_from, n):
    """Bracket ``sum_{j > n} f(j)`` for a positive decreasing ``f``.

    ``integral_from(x)`` must return the integral of ``f`` over ``[x, inf)``.
    The sum lies between the integrals started at ``n + 1`` and ``n``.
    """
    lo = integral_from(n + 1)
    hi = integral_from(n)
    return lo, hi



def stream_sums(terms, start, stop, chunk=CHUNK):
    """Like :func:`stream_sum` for a ``terms(j)`` returning a tuple of arrays.

    Returns a tuple of sums, one per array, computed in a single pass.
    """
    accs = None
    lo = int(start)
    stop = int(stop)
    while lo <= stop:
        hi = min(lo + chunk - 1, stop)
        j = np.arange(lo, hi + 1, dtype=np.float64)
        parts = terms(j)
        if accs is None:
            accs = [CompensatedSum() for _ in parts]
        for acc, part in zip(accs, parts):
            acc.add(np.sum(part))
        lo = hi + 1
    if accs is None:
        return tuple(0.0 for _ in terms(np.empty(0)))
    return tuple(acc.value for acc in accs)
