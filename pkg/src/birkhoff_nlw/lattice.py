"""Signed Fourier-index combinatorics and truncated spectral states.

Conventions
-----------
* A mode index ``a`` is a tuple of ``d`` integers.
* A signed mode ``j = (delta, a)`` has ``delta`` in ``{+1, -1}``; ``+1``
  stands for ``xi_a`` and ``-1`` for ``conj(xi_a)``.
* A multi-index is a tuple of signed modes stored in canonical order:
  ``delta`` descending, then ``a`` lexicographic.

Weights are compared through the exact integer ``1 + |a|^2``; floats only
appear in norms and divisors.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "CLASS_TAGS",
    "SpectralState",
    "canonical",
    "classify_by_high_modes",
    "conjugate",
    "enumerate_modes",
    "high_mode_count",
    "is_resonant",
    "is_self_conjugate",
    "mixed_norm",
    "momentum",
    "mu",
    "multiplicity_count",
    "weight",
    "weight_sq",
    "within",
    "zero_momentum_indices",
]

#: class tags ordered by number of high modes; ``"o"`` is the all-low class
CLASS_TAGS = ("o", "i", "ii", "iii")


def weight_sq(a):
    """Exact squared weight ``1 + |a|^2`` as an int."""
    return 1 + sum(x * x for x in a)


def weight(a):
    """Return ``<a> = sqrt(1 + |a|^2)``."""
    return math.sqrt(weight_sq(a))


def within(a, bound):
    """True when ``<a> <= bound`` (exact for integer bounds)."""
    return weight_sq(a) <= bound * bound


def _entry_key(j):
    return (-j[0], j[1])


def canonical(entries):
    """Canonical representative of a multiset of signed modes."""
    return tuple(sorted(((int(d), tuple(int(x) for x in a)) for d, a in entries), key=_entry_key))


def conjugate(k):
    """Flip every sign and re-canonicalize."""
    return tuple(sorted(((-d, a) for d, a in k), key=_entry_key))


def is_self_conjugate(k):
    return conjugate(k) == k


def momentum(k):
    """Componentwise signed sum ``sum_i delta_i a_i``."""
    if not k:
        return ()
    dim = len(k[0][1])
    out = [0] * dim
    for d, a in k:
        for i in range(dim):
            out[i] += d * a[i]
    return tuple(out)


def mu(n, k):
    """n-th largest weight in ``k``; ``mu(0, k)`` is ``+inf``."""
    if n < 0 or n > len(k):
        raise InvalidArgumentError(f"mu: n={n} outside 0..{len(k)}")
    if n == 0:
        return math.inf
    sq = sorted((weight_sq(a) for _, a in k), reverse=True)
    return math.sqrt(sq[n - 1])


def is_resonant(k):
    """Decide membership in the resonant set.

    Returns
    -------
    (bool, tuple or None)
        The flag and, when resonant, a permutation ``sigma`` (as a tuple of
        positions into ``k``) pairing each entry with an opposite-sign entry
        of equal weight.
    """
    m = len(k)
    if m % 2:
        return False, None
    plus = defaultdict(list)
    minus = defaultdict(list)
    for pos, (d, a) in enumerate(k):
        (plus if d > 0 else minus)[weight_sq(a)].append(pos)
    if set(plus) != set(minus):
        return False, None
    sigma = [0] * m
    for w2, ps in plus.items():
        ms = minus[w2]
        if len(ps) != len(ms):
            return False, None
        for p, q in zip(ps, ms):
            sigma[p] = q
            sigma[q] = p
    return True, tuple(sigma)


def high_mode_count(k, N):
    n2 = N * N
    return sum(1 for _, a in k if weight_sq(a) > n2)


def classify_by_high_modes(k, N):
    """Return ``(tag, count)`` with tag in ``CLASS_TAGS``."""
    c = high_mode_count(k, N)
    return CLASS_TAGS[min(c, 3)], c


def multiplicity_count(k):
    """Number of distinct orderings of the multiset ``k``."""
    counts = defaultdict(int)
    for j in k:
        counts[j] += 1
    out = math.factorial(len(k))
    for c in counts.values():
        out //= math.factorial(c)
    return out


@lru_cache(maxsize=None)
def enumerate_modes(d, K):
    """All ``a`` in ``Z^d`` with ``<a> <= K``, lexicographically sorted."""
    if d not in (1, 2, 3):
        raise InvalidArgumentError(f"dimension must be 1, 2 or 3, got {d}")
    if K < 1:
        raise InvalidArgumentError(f"cutoff K must be >= 1, got {K}")
    amax = int(math.isqrt(int(math.floor(K * K)) - 1)) if K * K >= 1 else 0
    rng = range(-amax, amax + 1)
    return tuple(a for a in product(rng, repeat=d) if within(a, K))


@lru_cache(maxsize=None)
def _signed_modes(d, K):
    modes = enumerate_modes(d, K)
    return tuple(sorted([(1, a) for a in modes] + [(-1, a) for a in modes], key=_entry_key))


def zero_momentum_indices(d, K, m):
    """Yield every canonical zero-momentum multi-index of length ``m``.

    The last entry is solved from the momentum constraint, so the cost is
    that of enumerating ``m - 1`` entries.
    """
    signed = _signed_modes(d, K)
    pos = {j: i for i, j in enumerate(signed)}
    zero = (0,) * d

    def rec(start, depth, prefix, mom):
        if depth == m - 1:
            for delta in (1, -1):
                a = tuple(-delta * x for x in mom)
                j = (delta, a)
                i = pos.get(j)
                if i is not None and i >= start:
                    yield tuple(prefix) + (j,)
            return
        for i in range(start, len(signed)):
            dl, a = signed[i]
            prefix.append(signed[i])
            yield from rec(i, depth + 1, prefix, tuple(x + dl * y for x, y in zip(mom, a)))
            prefix.pop()

    if m < 1:
        return
    yield from rec(0, 0, [], zero)


@dataclass(frozen=True, eq=False)
class SpectralState:
    """Complex Fourier coefficients ``xi_a`` for all ``<a> <= K``.

    ``modes`` is the lexicographic list from :func:`enumerate_modes`; ``xi``
    is aligned with it.
    """

    d: int
    K: float
    xi: np.ndarray

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=complex)
        if xi.shape != (len(self.modes),):
            raise InvalidArgumentError(
                f"state has {xi.shape} coefficients, layout (d={self.d}, K={self.K}) needs {len(self.modes)}"
            )
        object.__setattr__(self, "xi", xi)

    @property
    def modes(self):
        return enumerate_modes(self.d, self.K)

    @property
    def index(self):
        return _mode_index(self.d, self.K)

    @property
    def weights_sq(self):
        return _weights_sq(self.d, self.K)

    @classmethod
    def zeros(cls, d, K):
        return cls(d, K, np.zeros(len(enumerate_modes(d, K)), dtype=complex))

    @classmethod
    def from_dict(cls, d, K, values):
        st = cls.zeros(d, K)
        xi = st.xi.copy()
        idx = st.index
        for a, v in values.items():
            a = tuple(a)
            if a not in idx:
                raise InvalidArgumentError(f"mode {a} outside truncation K={K}")
            xi[idx[a]] = v
        return cls(d, K, xi)

    def with_xi(self, xi):
        return SpectralState(self.d, self.K, xi)

    def __getitem__(self, a):
        return self.xi[self.index[tuple(a)]]

    def doubled(self):
        """The variable ``z = (xi, conj(xi))`` as one flat array."""
        return np.concatenate([self.xi, np.conj(self.xi)])

    def norm(self, s=0.0):
        return mixed_norm(self, s)

    def split_low_high(self, N):
        low_mask = self.weights_sq <= N * N
        return (
            self.with_xi(np.where(low_mask, self.xi, 0)),
            self.with_xi(np.where(low_mask, 0, self.xi)),
        )


@lru_cache(maxsize=None)
def _mode_index(d, K):
    return {a: i for i, a in enumerate(enumerate_modes(d, K))}


@lru_cache(maxsize=None)
def _weights_sq(d, K):
    w = np.array([weight_sq(a) for a in enumerate_modes(d, K)], dtype=np.int64)
    w.setflags(write=False)
    return w


def mixed_norm(state, s, part="all", N=None):
    """Weighted l2 norm ``sqrt(sum <a>^{2s} |xi_a|^2)`` over a mode range.

    Parameters
    ----------
    part : {"all", "low", "high"}
        ``"low"`` keeps ``<a> <= N``, ``"high"`` keeps ``<a> > N``.
    """
    if s < 0:
        raise InvalidArgumentError(f"Sobolev index must be >= 0, got {s}")
    w2 = state.weights_sq
    terms = w2.astype(float) ** s * np.abs(state.xi) ** 2
    if part == "all":
        return float(np.sqrt(terms.sum()))
    if N is None:
        raise InvalidArgumentError("a threshold N is required for part='low'/'high'")
    if N > state.K:
        raise InvalidArgumentError(f"threshold N={N} exceeds truncation K={state.K}")
    low = w2 <= N * N
    if part == "low":
        return float(np.sqrt(terms[low].sum()))
    if part == "high":
        return float(np.sqrt(terms[~low].sum()))
    raise InvalidArgumentError(f"unknown part {part!r}")
