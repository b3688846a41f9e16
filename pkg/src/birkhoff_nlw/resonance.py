"""NLW frequencies, small divisors and exhaustive non-resonance scans."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend, _pykernels
from .errors import InvalidArgumentError, ResonanceDetectedError
from .lattice import canonical, enumerate_modes, is_resonant, weight_sq

__all__ = [
    "DivisorScanResult",
    "FitResult",
    "FrequencyModel",
    "fit_alpha_gamma",
    "format_index",
    "frequency",
    "min_divisor_scan",
    "naive_min_divisor",
    "scan_masses",
    "scan_rows_csv",
    "small_divisor",
    "smoothness_threshold",
]

CONDITIONS = {"H1": 1, "H2": 2, "H3": 3}


@dataclass(frozen=True)
class FrequencyModel:
    """Dispersion ``omega_a = sqrt(|a|^2 + m)`` on ``Z^d``."""

    mass: float
    d: int = 1

    def __post_init__(self):
        if not self.mass > 0:
            raise InvalidArgumentError(f"mass must be > 0, got {self.mass}")
        if self.d not in (1, 2, 3):
            raise InvalidArgumentError(f"dimension must be 1, 2 or 3, got {self.d}")

    def omega(self, a):
        return math.sqrt(float(weight_sq(a) - 1) + self.mass)

    def omegas(self, modes):
        return np.array([self.omega(a) for a in modes])


def frequency(a, model):
    return model.omega(a)


def small_divisor(k, model):
    """``Omega(k) = -sum_i delta_i omega_{a_i}``.

    Opposite signed frequencies cancel before summation (see
    :func:`signed_sum`), so resonant keys give exactly 0.
    """
    return -signed_sum(d * model.omega(a) for d, a in k)


def signed_sum(values):
    """Pair-cancelling sum shared by both scan kernels."""
    return _pykernels.signed_sum(list(values))


def format_index(k):
    """Render a multi-index as ``(d,a1,..) (d,a1,..)``."""
    return " ".join("(" + ",".join(str(x) for x in (d,) + tuple(a)) + ")" for d, a in k)


def parse_index(text):
    out = []
    for tok in text.replace(")", ") ").split():
        tok = tok.strip()
        if not tok:
            continue
        if not (tok.startswith("(") and tok.endswith(")")):
            raise InvalidArgumentError(f"bad index token {tok!r}")
        nums = [int(x) for x in tok[1:-1].split(",")]
        if nums[0] not in (1, -1) or len(nums) < 2:
            raise InvalidArgumentError(f"bad signed mode {tok!r}")
        out.append((nums[0], tuple(nums[1:])))
    return tuple(out)


@dataclass(frozen=True)
class DivisorScanResult:
    """Outcome of :func:`min_divisor_scan`.

    ``argmin`` holds the interior multi-index; ``exterior`` the appended
    ``+1`` high modes (one for H2, two for H3). ``empty`` is set when the
    scan domain had no admissible tuple, in which case ``min_abs_divisor``
    is ``inf``.
    """

    condition: str
    r: int
    N: float
    mass: float
    d: int
    min_abs_divisor: float
    argmin: tuple
    exterior: tuple
    count_scanned: int
    high_bound: float | None = None
    empty: bool = False

    @property
    def witness(self):
        """Full multi-index (interior plus exterior) in canonical order."""
        return canonical(self.argmin + tuple((1, b) for b in self.exterior))

    def csv_row(self):
        return [
            self.condition,
            self.r,
            _fmt(self.N),
            _fmt(self.mass),
            _fmt(self.min_abs_divisor),
            format_index(self.witness),
        ]


def _fmt(x):
    if isinstance(x, int):
        return str(x)
    return "%.17g" % x


def _mode_order_key(a):
    # shells by weight, positive components first inside a shell
    return (weight_sq(a), tuple(-x for x in a))


def _interior_modes(d, N):
    modes = sorted(enumerate_modes(d, N), key=_mode_order_key)
    return [(delta, a) for a in modes for delta in (1, -1)]


def _exterior_modes(d, N, bound):
    if bound <= N:
        return []
    n2 = N * N
    modes = sorted((a for a in enumerate_modes(d, bound) if weight_sq(a) > n2), key=_mode_order_key)
    return modes


def min_divisor_scan(r, N, model, condition="H1", high_bound=None, backend=None):
    """Smallest ``|Omega|`` over the finite domain of one non-resonance condition.

    Parameters
    ----------
    r : int
        Number of interior modes (all with ``<a> <= N``).
    condition : {"H1", "H2", "H3"}
        H1 skips resonant tuples; H2 appends one ``+1`` mode ``b`` with
        ``<b> > N`` closing the momentum; H3 appends two such modes with
        ``N < <b_i> <= high_bound`` (default ``3 r N``).
    """
    if condition not in CONDITIONS:
        raise InvalidArgumentError(f"condition must be one of {sorted(CONDITIONS)}, got {condition!r}")
    if r < 1:
        raise InvalidArgumentError(f"r must be >= 1, got {r}")
    if N < 1:
        raise InvalidArgumentError(f"N must be >= 1, got {N}")
    d = model.d
    interior = _interior_modes(d, N)
    if condition == "H1":
        bound = None
    elif condition == "H2":
        # zero momentum already forces <b> <= r N
        bound = max(r * N, high_bound or 0)
    else:
        bound = 3 * r * N if high_bound is None else high_bound
        if bound < N:
            raise InvalidArgumentError(f"high_bound={bound} must be >= N={N}")
    ext = _exterior_modes(d, N, bound) if bound is not None else []

    sign = np.array([s for s, _ in interior], dtype=np.int8)
    omega = np.array([model.omega(a) for _, a in interior])
    wsq = np.array([weight_sq(a) for _, a in interior], dtype=np.int64)
    vec = np.array([a for _, a in interior], dtype=np.int64).reshape(len(interior), d)
    box = int(math.isqrt(int(bound * bound))) + 1 if bound is not None else 0
    side = 2 * box + 1
    lookup = np.full(side**d if bound is not None else 1, -1, dtype=np.int64)
    for pos, b in enumerate(ext):
        flat = 0
        for x in b:
            flat = flat * side + (x + box)
        lookup[flat] = pos
    ext_omega = np.array([model.omega(b) for b in ext], dtype=float)
    ext_vec = np.array(ext, dtype=np.int64).reshape(len(ext), d)

    kernel = _backend.get("scan_min_divisor", backend)
    best, wit, ext_pos, count = kernel(
        sign, omega, wsq, vec, int(r), CONDITIONS[condition], ext_omega, ext_vec, lookup, box, d
    )
    if not wit:
        return DivisorScanResult(condition, r, N, model.mass, d, math.inf, (), (), 0, bound, empty=True)
    argmin = canonical(interior[i] for i in wit)
    exterior = tuple(ext[i] for i in ext_pos)
    return DivisorScanResult(condition, r, N, model.mass, d, float(best), argmin, exterior, int(count), bound)


def naive_min_divisor(r, N, model, condition="H1", high_bound=None):
    """Reference enumerator over ordered tuples, no pruning (test oracle)."""
    from itertools import product

    d = model.d
    modes = list(enumerate_modes(d, N))
    signed = [(s, a) for a in modes for s in (1, -1)]
    n2 = N * N
    if condition == "H2":
        bound = max(r * N, high_bound or 0)
    elif condition == "H3":
        bound = 3 * r * N if high_bound is None else high_bound
    else:
        bound = None
    highs = [b for b in enumerate_modes(d, bound) if weight_sq(b) > n2] if bound and bound > N else []
    best = math.inf
    for k in product(signed, repeat=r):
        if condition == "H1":
            if is_resonant(k)[0]:
                continue
            best = min(best, abs(small_divisor(k, model)))
            continue
        mom = [sum(s * a[i] for s, a in k) for i in range(d)]
        if condition == "H2":
            for b in highs:
                if all(mom[i] + b[i] == 0 for i in range(d)):
                    best = min(best, abs(small_divisor(k + ((1, b),), model)))
        else:
            for b1 in highs:
                for b2 in highs:
                    if all(mom[i] + b1[i] + b2[i] == 0 for i in range(d)):
                        best = min(best, abs(small_divisor(k + ((1, b1), (1, b2)), model)))
    return best


@dataclass(frozen=True)
class FitResult:
    """Power-law fit ``min ~ gamma N^{-alpha}`` of scan minima.

    ``gamma`` is the lower-envelope constant (``gamma N^{-alpha} <= min`` at
    every supplied point); ``gamma_ls`` the least-squares intercept.
    """

    alpha: float
    gamma: float
    residual: float
    gamma_ls: float
    points: tuple = field(default=())


def fit_alpha_gamma(scans):
    """Log-log least squares of ``log(min) = log(gamma) - alpha log(N)``."""
    if len(scans) < 3:
        raise InvalidArgumentError(f"need >= 3 scan points, got {len(scans)}")
    Ns, mins = [], []
    for sc in scans:
        m = sc.min_abs_divisor if isinstance(sc, DivisorScanResult) else sc[1]
        n = sc.N if isinstance(sc, DivisorScanResult) else sc[0]
        if not m > 0:
            raise ResonanceDetectedError(f"zero minimum at N={n}: mass is resonant at this range")
        if not math.isfinite(m):
            raise InvalidArgumentError(f"empty scan at N={n}")
        Ns.append(float(n))
        mins.append(float(m))
    x = np.log(Ns)
    y = np.log(mins)
    A = np.vstack([np.ones_like(x), -x]).T
    (log_gamma, alpha), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ np.array([log_gamma, alpha]) - y) ** 2)))
    gamma_env = float(np.min(np.exp(y + alpha * x)))
    return FitResult(float(alpha), gamma_env, resid, float(math.exp(log_gamma)), tuple(zip(Ns, mins)))


def smoothness_threshold(r, d, alpha_of_3r):
    """``6 r^2 alpha(3r) + 2 d r``: the required gap ``s - s0``."""
    if r <= 0 or d <= 0 or alpha_of_3r < 0:
        raise InvalidArgumentError("r, d must be positive and alpha(3r) nonnegative")
    return 6 * r * r * alpha_of_3r + 2 * d * r


def scan_masses(masses, r, N, d=1, floor=1e-6, backend=None):
    """H1 minimum for each mass; masses below ``floor`` are flagged resonant.

    Returns a list of ``(mass, min_abs_divisor, flagged)``.
    """
    out = []
    for m in masses:
        res = min_divisor_scan(r, N, FrequencyModel(float(m), d), "H1", backend=backend)
        out.append((float(m), res.min_abs_divisor, res.min_abs_divisor < floor))
    return out


def uniform_mass_grid(lo, hi, count, seed=0):
    rng = np.random.default_rng(seed)
    return np.sort(rng.uniform(lo, hi, size=count))


def scan_rows_csv(results):
    """CSV text ``condition,r,N,m,min_abs_divisor,witness`` for scan results."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["condition", "r", "N", "m", "min_abs_divisor", "witness"])
    for res in results:
        w.writerow(res.csv_row())
    return buf.getvalue()
