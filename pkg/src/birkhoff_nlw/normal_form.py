"""Order-by-order Birkhoff normal form with the low/high mode splitting.

Monomials are sorted by how many entries have weight ``> N``:

* class ``o`` (none): resonant keys stay in ``Z``, the rest are removed;
* class ``i`` (one): always removed;
* class ``ii`` (two): kept in ``S`` when the two high entries carry opposite
  signs, removed otherwise;
* class ``iii`` (three or more): kept untouched in ``P_three``.

"Removed" means solved into the generator ``chi`` through
``{H2, chi_m} = Q_m - X_m``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptedNormalFormError, InvalidArgumentError, NearResonanceError
from .lattice import (
    classify_by_high_modes,
    conjugate,
    enumerate_modes,
    is_resonant,
    weight_sq,
)
from .lattice import SpectralState
from .polynomial import (
    GradedPolynomial,
    HomogeneousPolynomial,
    dump_polynomial,
    evaluate,
    h2_bracket,
    lie_flow,
    lie_series_compose,
    load_polynomial,
)
from .resonance import FrequencyModel, format_index, small_divisor

logger = logging.getLogger(__name__)

__all__ = [
    "CouplingMatrix",
    "HomologicalSolution",
    "NormalFormResult",
    "VerificationReport",
    "birkhoff_normal_form",
    "dump_normal_form",
    "extract_coupling_matrix",
    "homological_residual",
    "is_symmetric_two_high",
    "load_normal_form",
    "solve_homological",
    "verify_normal_form",
]

DEFAULT_DIVISOR_FLOOR = 1e-8


def _high_entries(k, N):
    n2 = N * N
    return [(d, a) for d, a in k if weight_sq(a) > n2]


def is_symmetric_two_high(k, N):
    """True when ``k`` has exactly two high entries and they have opposite signs."""
    high = _high_entries(k, N)
    return len(high) == 2 and high[0][0] != high[1][0]


@dataclass
class HomologicalSolution:
    """Per-degree output of :func:`solve_homological`."""

    degree: int
    chi: dict  # class tag -> HomogeneousPolynomial
    Z: HomogeneousPolynomial
    S: HomogeneousPolynomial
    P_three: HomogeneousPolynomial
    min_divisor: float = math.inf

    @property
    def chi_total(self):
        out = HomogeneousPolynomial(self.degree)
        for p in self.chi.values():
            out = out + p
        return out

    @property
    def normal_part(self):
        return self.Z + self.S + self.P_three


def solve_homological(Q, model, N, divisor_floor=DEFAULT_DIVISOR_FLOOR):
    """Split ``Q`` into normal part ``X`` and generator ``chi`` of the same degree.

    Every removed coefficient ``q_k`` becomes ``q_k / (i Omega(k))``.

    Raises
    ------
    NearResonanceError
        If a removed key has ``|Omega(k)| < divisor_floor``.
    """
    if not divisor_floor > 0:
        raise InvalidArgumentError(f"divisor_floor must be > 0, got {divisor_floor}")
    m = Q.degree
    chi = {"o": {}, "i": {}, "ii": {}}
    Z, S, P3 = {}, {}, {}
    min_div = math.inf
    for k, q in Q.items():
        tag, _ = classify_by_high_modes(k, N)
        if tag == "iii":
            P3[k] = q
            continue
        if tag == "o" and is_resonant(k)[0]:
            Z[k] = q
            continue
        if tag == "ii" and is_symmetric_two_high(k, N):
            S[k] = q
            continue
        omega = small_divisor(k, model)
        if abs(omega) < divisor_floor:
            raise NearResonanceError(
                f"|Omega| = {abs(omega):.3e} below floor {divisor_floor:.1e} at {format_index(k)} "
                f"(mass {model.mass}, N = {N})",
                key=k,
                divisor=omega,
            )
        min_div = min(min_div, abs(omega))
        chi[tag][k] = q / (1j * omega)
    return HomologicalSolution(
        m,
        {t: HomogeneousPolynomial(m, c, check=False) for t, c in chi.items()},
        HomogeneousPolynomial(m, Z, check=False),
        HomogeneousPolynomial(m, S, check=False),
        HomogeneousPolynomial(m, P3, check=False),
        min_div,
    )


def homological_residual(Q, sol, model):
    """Relative max coefficient of ``{H2, chi_m} - (Q_m - X_m)``."""
    lhs = h2_bracket(model, sol.chi_total)
    diff = lhs - (Q - sol.normal_part)
    scale = max(Q.sup_norm(), 1e-300)
    return diff.sup_norm() / scale


@dataclass
class NormalFormResult:
    """Generator and normal form ``H2 + Z + S + P_three`` up to degree ``r``.

    ``coeff_log`` maps each degree to the sup norms of ``Q``, ``chi``, ``Z``,
    ``S`` and ``P_three`` at that degree; ``residuals`` holds the relative
    homological residual per degree.
    """

    chi: GradedPolynomial
    chi_classes: dict
    Z: GradedPolynomial
    S: GradedPolynomial
    P_three: GradedPolynomial
    N: float
    r: int
    K: float
    d: int
    mass: float
    divisor_floor: float
    coeff_log: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    min_divisor: float = math.inf

    @property
    def model(self):
        return FrequencyModel(self.mass, self.d)

    @property
    def normal_form(self):
        return self.Z + self.S + self.P_three

    def check_invariants(self):
        """Raise :class:`CorruptedNormalFormError` if any component has a foreign key."""
        for m, p in self.Z.items():
            for k in p:
                if classify_by_high_modes(k, self.N)[0] != "o" or not is_resonant(k)[0]:
                    raise CorruptedNormalFormError(f"Z_{m} holds non-resonant key {format_index(k)}")
        for m, p in self.S.items():
            for k in p:
                if not is_symmetric_two_high(k, self.N):
                    raise CorruptedNormalFormError(f"S_{m} holds key {format_index(k)}")
        for m, p in self.P_three.items():
            for k in p:
                if classify_by_high_modes(k, self.N)[0] != "iii":
                    raise CorruptedNormalFormError(f"P_three_{m} holds key {format_index(k)}")
        for m, p in self.chi.items():
            for k in p:
                if classify_by_high_modes(k, self.N)[0] == "iii":
                    raise CorruptedNormalFormError(f"chi_{m} holds class-iii key {format_index(k)}")

    def metadata(self):
        meta = {
            "N": self.N,
            "r": self.r,
            "K": self.K,
            "d": self.d,
            "m": self.mass,
            "divisor_floor": self.divisor_floor,
            "min_divisor": self.min_divisor,
        }
        for deg, norms in sorted(self.coeff_log.items()):
            for name, val in norms.items():
                meta[f"sup_{name}_{deg}"] = val
        for deg, val in sorted(self.residuals.items()):
            meta[f"residual_{deg}"] = val
        return meta


def birkhoff_normal_form(P, model, N, r, divisor_floor=DEFAULT_DIVISOR_FLOOR, K=None):
    """Normalize ``H2 + P`` degree by degree from 3 to ``r``.

    ``Q_m`` is the degree-``m`` part of ``exp(ad_chi_{<m})(H2 + P)``; it is
    split and solved by :func:`solve_homological`.
    """
    if r < 3:
        raise InvalidArgumentError(f"r must be >= 3, got {r}")
    if N < 1:
        raise InvalidArgumentError(f"N must be >= 1, got {N}")
    if any(m < 3 for m in P.degrees):
        raise InvalidArgumentError("P must only contain degrees >= 3")
    if K is None:
        K = math.sqrt(max((p.max_weight_sq() for _, p in P.items()), default=1))
    if N > K:
        raise InvalidArgumentError(f"N = {N} exceeds truncation K = {K}")
    P = P.truncate(r)
    chi_parts = []
    classes = {"o": [], "i": [], "ii": []}
    Z, S, P3 = [], [], []
    coeff_log, residuals = {}, {}
    min_div = math.inf
    for m in range(3, r + 1):
        Q = lie_series_compose(model, P, GradedPolynomial(chi_parts), m)[m]
        sol = solve_homological(Q, model, N, divisor_floor)
        residuals[m] = homological_residual(Q, sol, model)
        min_div = min(min_div, sol.min_divisor)
        chi_m = sol.chi_total
        chi_parts.append(chi_m)
        for tag, p in sol.chi.items():
            classes[tag].append(p)
        Z.append(sol.Z)
        S.append(sol.S)
        P3.append(sol.P_three)
        coeff_log[m] = {
            "Q": Q.sup_norm(),
            "chi": chi_m.sup_norm(),
            "Z": sol.Z.sup_norm(),
            "S": sol.S.sup_norm(),
            "P_three": sol.P_three.sup_norm(),
        }
        logger.info(
            "degree %d: |Q|=%.3e |chi|=%.3e terms chi/Z/S/P3 = %d/%d/%d/%d residual %.1e",
            m, coeff_log[m]["Q"], coeff_log[m]["chi"], len(chi_m), len(sol.Z), len(sol.S),
            len(sol.P_three), residuals[m],
        )
    return NormalFormResult(
        chi=GradedPolynomial(chi_parts),
        chi_classes={t: GradedPolynomial(ps) for t, ps in classes.items()},
        Z=GradedPolynomial(Z),
        S=GradedPolynomial(S),
        P_three=GradedPolynomial(P3),
        N=N,
        r=r,
        K=K,
        d=model.d,
        mass=model.mass,
        divisor_floor=divisor_floor,
        coeff_log=coeff_log,
        residuals=residuals,
        min_divisor=min_div,
    )


# -- a posteriori check -------------------------------------------------------


@dataclass
class VerificationReport:
    """``max |Delta|`` per radius and the fitted exponent of ``|Delta| ~ eps^p``."""

    radii: tuple
    max_residual: tuple
    exponent: float
    samples: int
    flow_constants: tuple = ()


def _h2_value(state, model):
    om = model.omegas(state.modes)
    return float(np.dot(om, np.abs(state.xi) ** 2))


def _unit_directions(d, K, s, samples, seed):
    rng = np.random.default_rng(seed)
    n = len(enumerate_modes(d, K))
    out = []
    for _ in range(samples):
        xi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        st = SpectralState(d, K, xi)
        out.append(xi / (math.sqrt(2.0) * st.norm(s)))
    return out


def verify_normal_form(result, P, radii=(1e-2, 5e-3, 2.5e-3), samples=8, s=1.0, seed=0, tol=1e-12):
    """Measure ``Delta(z) = (H2 + P)(Phi_chi^1(z)) - (H2 + Z + S + P_three)(z)``.

    The same random directions are rescaled to every radius ``eps``
    (``||z||_s = eps``), and ``log max|Delta|`` is regressed on ``log eps``.
    """
    if len(radii) < 2:
        raise InvalidArgumentError("need at least two radii")
    model = result.model
    NF = result.normal_form
    dirs = _unit_directions(result.d, result.K, s, samples, seed)
    maxima, consts = [], []
    for eps in radii:
        worst = 0.0
        cworst = 0.0
        for u in dirs:
            z = SpectralState(result.d, result.K, eps * u)
            if eps == 0:
                continue
            w, info = lie_flow(result.chi, z, 1.0, tol=tol, s=s, return_info=True)
            lhs = _h2_value(w, model) - _h2_value(z, model) + evaluate(P, w)
            delta = lhs - evaluate(NF, z)
            worst = max(worst, abs(delta))
            cworst = max(cworst, info["displacement_constant"])
        maxima.append(worst)
        consts.append(cworst)
    if all(x > 0 for x in maxima):
        slope = float(np.polyfit(np.log(radii), np.log(maxima), 1)[0])
    else:
        slope = math.nan
    return VerificationReport(tuple(radii), tuple(maxima), slope, samples, tuple(consts))


# -- high-mode coupling -------------------------------------------------------


@dataclass
class CouplingMatrix:
    """``B_ab`` with ``S = sum_{a,b} B_ab xi_a conj(xi_b)`` at a fixed low state.

    Rows and columns are indexed by ``modes`` (all ``N < <a> <= K``).
    """

    N: float
    r: int
    modes: tuple
    B: np.ndarray
    low_norm: float = 0.0

    @property
    def index(self):
        return {a: i for i, a in enumerate(self.modes)}

    def entry(self, a, b):
        idx = self.index
        return self.B[idx[tuple(a)], idx[tuple(b)]]

    def is_hermitian(self):
        return bool(np.array_equal(self.B, self.B.conj().T))

    def band_violation(self, width=None):
        """Largest ``|B_ab|`` with ``|a - b|_max > width`` (default ``3 r N``)."""
        width = 3 * self.r * self.N if width is None else width
        worst = 0.0
        nz = np.argwhere(self.B != 0)
        for i, j in nz:
            a, b = self.modes[i], self.modes[j]
            if max(abs(x - y) for x, y in zip(a, b)) > width:
                worst = max(worst, abs(self.B[i, j]))
        return worst

    def bound_constant(self):
        """``max |B_ab| / ||y_{<=N}||_s`` (0 when the low state vanishes)."""
        if self.low_norm == 0:
            return 0.0
        return float(np.max(np.abs(self.B), initial=0.0)) / self.low_norm


def extract_coupling_matrix(S_sym, low_state, N, r, K=None, s=1.0):
    """Evaluate the low factors of every symmetric two-high term.

    Conjugate key pairs are handled together and the Hermitian average of
    their two contributions is written to ``B_ab`` and ``B_ba``, so the
    output is Hermitian bit for bit.
    """
    K = low_state.K if K is None else K
    n2 = N * N
    if np.any((low_state.weights_sq > n2) & (low_state.xi != 0)):
        raise InvalidArgumentError("low_state must be supported on <a> <= N")
    y = {a: low_state.xi[i] for i, a in enumerate(low_state.modes)}
    modes = tuple(a for a in enumerate_modes(low_state.d, K) if weight_sq(a) > n2)
    idx = {a: i for i, a in enumerate(modes)}
    B = np.zeros((len(modes), len(modes)), dtype=complex)

    def contribution(k, c):
        hi = _high_entries(k, N)
        if len(hi) != 2 or hi[0][0] == hi[1][0]:
            raise CorruptedNormalFormError(f"S holds non-symmetric key {format_index(k)}")
        a = hi[0][1] if hi[0][0] > 0 else hi[1][1]
        b = hi[1][1] if hi[0][0] > 0 else hi[0][1]
        val = complex(c)
        for dl, l in k:
            if weight_sq(l) > n2:
                continue
            yl = y.get(l)
            if yl is None:
                raise InvalidArgumentError(f"low mode {l} outside the low state")
            val *= yl if dl > 0 else yl.conjugate()
        if a not in idx or b not in idx:
            raise InvalidArgumentError(f"high mode outside truncation K={K} in {format_index(k)}")
        return idx[a], idx[b], val

    for _, part in S_sym.items():
        done = set()
        for k, c in part.items():
            if k in done:
                continue
            kb = conjugate(k)
            done.add(k)
            done.add(kb)
            i, j, v = contribution(k, c)
            if kb == k:
                B[i, j] += v.real
                continue
            cb = part.get(kb, 0j)
            _, _, vb = contribution(kb, cb) if cb != 0 else (j, i, 0j)
            w = 0.5 * (v + vb.conjugate())
            B[i, j] += w
            B[j, i] += w.conjugate()
    # diagonal sums may pick up rounding-level imaginary parts
    B[np.diag_indices_from(B)] = B.diagonal().real
    low_norm = low_state.norm(s)
    return CouplingMatrix(N, r, modes, B, low_norm)


# -- serialization ----------------------------------------------------------------

_SECTIONS = ("chi_o", "chi_i", "chi_ii", "Z", "S", "P_three")


def dump_normal_form(result):
    """Metadata header (``# key = value``) then one polynomial block per class."""
    lines = [f"# {k} = {_fmt(v)}" for k, v in result.metadata().items()]
    blocks = {
        "chi_o": result.chi_classes["o"],
        "chi_i": result.chi_classes["i"],
        "chi_ii": result.chi_classes["ii"],
        "Z": result.Z,
        "S": result.S,
        "P_three": result.P_three,
    }
    for name in _SECTIONS:
        lines.append(f"[{name}]")
        body = dump_polynomial(blocks[name])
        if body:
            lines.append(body.rstrip("\n"))
    return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def load_normal_form(text):
    """Inverse of :func:`dump_normal_form`."""
    meta, blocks, current = {}, {n: [] for n in _SECTIONS}, None
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].partition("=")
            meta[key.strip()] = val.strip()
        elif line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            if current not in blocks:
                raise InvalidArgumentError(f"unknown section {current!r}")
        elif line.strip():
            if current is None:
                raise InvalidArgumentError("polynomial line before any section")
            blocks[current].append(line)
    polys = {n: load_polynomial("\n".join(ls)) for n, ls in blocks.items()}
    chi_classes = {"o": polys["chi_o"], "i": polys["chi_i"], "ii": polys["chi_ii"]}
    chi = GradedPolynomial([p for g in chi_classes.values() for _, p in g.items()])

    def num(key, cast=float):
        v = float(meta[key])
        return int(v) if cast is int or (cast is None and v.is_integer()) else v

    coeff_log, residuals = {}, {}
    for key, val in meta.items():
        if key.startswith("sup_"):
            name, deg = key[4:].rsplit("_", 1)
            coeff_log.setdefault(int(deg), {})[name] = float(val)
        elif key.startswith("residual_"):
            residuals[int(key.split("_")[1])] = float(val)
    return NormalFormResult(
        chi=chi,
        chi_classes=chi_classes,
        Z=polys["Z"],
        S=polys["S"],
        P_three=polys["P_three"],
        N=num("N", None),
        r=num("r", int),
        K=num("K", None),
        d=num("d", int),
        mass=num("m"),
        divisor_floor=num("divisor_floor"),
        coeff_log=coeff_log,
        residuals=residuals,
        min_divisor=num("min_divisor"),
    )
