"""Sparse real polynomial Hamiltonians in the variables ``z = (xi, conj(xi))``.

A :class:`HomogeneousPolynomial` maps canonical zero-momentum multi-indices
``k`` to complex coefficients; it represents ``sum_k c_k z_k`` with one key
per unordered monomial (the coefficient absorbs the number of orderings).

Sign convention
---------------
The bracket is ``{F, G} = i sum_a (dF/dxi_a dG/dxibar_a - dF/dxibar_a dG/dxi_a)``
so that ``{H2, z_k} = i Omega(k) z_k`` with ``Omega(k) = -sum delta_i omega_i``,
and along the flow of ``xi' = -i dH/dxibar`` one has ``dF/dt = {H, F}``.
Consequently ``F o Phi_chi^t = exp(t ad_chi) F`` with ``ad_chi = {chi, .}``.
"""
from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict

import numpy as np
from scipy.integrate import solve_ivp

from . import _backend
from .errors import IntegrationError, InvalidArgumentError
from .lattice import (
    _entry_key,
    canonical,
    conjugate,
    enumerate_modes,
    momentum,
    multiplicity_count,
    weight_sq,
    zero_momentum_indices,
)
from .resonance import format_index, parse_index, small_divisor

logger = logging.getLogger(__name__)

__all__ = [
    "GradedPolynomial",
    "HomogeneousPolynomial",
    "NonlinearityF",
    "RadiusGuardError",
    "dump_polynomial",
    "evaluate",
    "h2_bracket",
    "lie_flow",
    "lie_series_compose",
    "load_polynomial",
    "poisson_bracket",
    "pseudo_action",
    "taylor_expand_nlw",
    "vector_field",
]


class RadiusGuardError(IntegrationError):
    """The initial state lies outside the configured Lie-flow radius."""


class HomogeneousPolynomial:
    """Degree-``m`` polynomial ``sum_k c_k z_k`` over canonical keys.

    Instances are treated as immutable; arithmetic returns new objects.
    """

    __slots__ = ("degree", "terms", "_compiled")

    def __init__(self, degree, terms=None, check=True):
        self.degree = int(degree)
        items = {}
        for k, c in (terms or {}).items():
            c = complex(c)
            if c == 0:
                continue
            if check:
                if len(k) != self.degree:
                    raise InvalidArgumentError(f"key {k} has length {len(k)}, expected {self.degree}")
                k = canonical(k)
                if any(momentum(k)):
                    raise InvalidArgumentError(f"key {format_index(k)} has nonzero momentum")
                items[k] = items[k] + c if k in items else c
            else:
                items[k] = c
        self.terms = items
        self._compiled = {}

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __contains__(self, k):
        return k in self.terms

    def __repr__(self):
        return f"HomogeneousPolynomial(degree={self.degree}, nterms={len(self.terms)})"

    def items(self):
        return self.terms.items()

    def get(self, k, default=0j):
        return self.terms.get(k, default)

    def copy(self):
        return HomogeneousPolynomial(self.degree, dict(self.terms), check=False)

    def _combine(self, other, sign):
        if other.degree != self.degree and len(other) and len(self):
            raise InvalidArgumentError(f"degree mismatch {self.degree} vs {other.degree}")
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0) + sign * c
        return HomogeneousPolynomial(self.degree if len(self) else other.degree, out, check=False)

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __neg__(self):
        return self.scale(-1)

    def scale(self, factor):
        return HomogeneousPolynomial(self.degree, {k: factor * c for k, c in self.terms.items()}, check=False)

    __mul__ = scale
    __rmul__ = scale

    def filter(self, keep):
        """New polynomial with the terms whose key satisfies ``keep(k)``."""
        return HomogeneousPolynomial(self.degree, {k: c for k, c in self.terms.items() if keep(k)}, check=False)

    def sup_norm(self):
        """``max |c_k|`` over the stored (canonical) coefficients."""
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def ordered_sup_norm(self):
        """Sup norm of the symmetric coefficients over ordered multi-indices.

        A canonical coefficient ``c_k`` spreads evenly over the
        ``multiplicity_count(k)`` orderings of ``k``.
        """
        return max((abs(c) / multiplicity_count(k) for k, c in self.terms.items()), default=0.0)

    def reality_defect(self):
        """``max |c_conj(k) - conj(c_k)|`` (0 for a real Hamiltonian)."""
        worst = 0.0
        for k, c in self.terms.items():
            worst = max(worst, abs(self.terms.get(conjugate(k), 0) - c.conjugate()))
        return worst

    def is_real(self, rtol=1e-12):
        return self.reality_defect() <= rtol * max(self.sup_norm(), 1e-300)

    def max_weight_sq(self):
        return max((weight_sq(a) for k in self.terms for _, a in k), default=1)

    def compiled(self, d, K):
        """Index/coefficient arrays into the doubled layout of ``(d, K)``."""
        key = (d, K)
        hit = self._compiled.get(key)
        if hit is not None:
            return hit
        modes = enumerate_modes(d, K)
        n = len(modes)
        index = {a: i for i, a in enumerate(modes)}
        idx = np.empty((len(self.terms), self.degree), dtype=np.int64)
        coef = np.empty(len(self.terms), dtype=complex)
        for t, (k, c) in enumerate(self.terms.items()):
            for i, (delta, a) in enumerate(k):
                p = index.get(a)
                if p is None:
                    raise InvalidArgumentError(f"index {format_index(k)} lies outside truncation K={K}")
                idx[t, i] = p if delta > 0 else p + n
            coef[t] = c
        self._compiled[key] = (idx, coef)
        return idx, coef


class GradedPolynomial:
    """Sum of homogeneous pieces keyed by degree; missing degrees are zero."""

    __slots__ = ("parts",)

    def __init__(self, parts=None):
        self.parts = {}
        for p in (parts.values() if isinstance(parts, dict) else parts or ()):
            if len(p):
                if p.degree in self.parts:
                    self.parts[p.degree] = self.parts[p.degree] + p
                else:
                    self.parts[p.degree] = p

    def __getitem__(self, m):
        return self.parts.get(m, HomogeneousPolynomial(m))

    def __iter__(self):
        return iter(sorted(self.parts))

    def __len__(self):
        return sum(len(p) for p in self.parts.values())

    def __repr__(self):
        return "GradedPolynomial(" + ", ".join(f"{m}: {len(p)} terms" for m, p in sorted(self.parts.items())) + ")"

    @property
    def degrees(self):
        return sorted(self.parts)

    def items(self):
        return sorted(self.parts.items())

    def is_zero(self):
        return len(self) == 0

    def __add__(self, other):
        other_parts = other.parts.values() if isinstance(other, GradedPolynomial) else [other]
        return GradedPolynomial(list(self.parts.values()) + list(other_parts))

    def scale(self, factor):
        return GradedPolynomial([p.scale(factor) for p in self.parts.values()])

    def truncate(self, r):
        return GradedPolynomial([p for m, p in self.parts.items() if m <= r])

    def sup_norms(self):
        return {m: p.sup_norm() for m, p in sorted(self.parts.items())}

    def reality_defect(self):
        return max((p.reality_defect() for p in self.parts.values()), default=0.0)


def _as_parts(P):
    if isinstance(P, GradedPolynomial):
        return list(P.parts.values())
    return [P]


# -- evaluation -----------------------------------------------------------


def evaluate_complex(P, state):
    z = state.doubled()
    total = 0j
    for part in _as_parts(P):
        if not len(part):
            continue
        idx, coef = part.compiled(state.d, state.K)
        val, _ = _backend.poly_eval_grad(idx, coef, z, False)
        total += val
    return total


def evaluate(P, state):
    """Value of a real polynomial at ``state`` (imaginary rounding dropped)."""
    return evaluate_complex(P, state).real


def gradient(P, state):
    """``dP/dz_j`` for every doubled coordinate, as one array of length ``2n``."""
    z = state.doubled()
    grad = np.zeros_like(z)
    for part in _as_parts(P):
        if not len(part):
            continue
        idx, coef = part.compiled(state.d, state.K)
        _, g = _backend.poly_eval_grad(idx, coef, z, True)
        grad += g
    return grad


def vector_field(P, state):
    """``xi'_a = -i dP/dxibar_a`` for every retained mode."""
    n = len(state.xi)
    return -1j * gradient(P, state)[n:]


# -- brackets ---------------------------------------------------------------


def _remove_one(k, j):
    i = k.index(j)
    return k[:i] + k[i + 1:]


def poisson_bracket(F, G):
    """``{F, G}``, a homogeneous polynomial of degree ``deg F + deg G - 2``."""
    by_mode = defaultdict(list)
    for l, c2 in G.terms.items():
        for j, q in Counter(l).items():
            by_mode[j].append((l, c2, q))
    out = {}
    cache = {}
    for k, c1 in F.terms.items():
        for j, p in Counter(k).items():
            partner = (-j[0], j[1])
            lst = by_mode.get(partner)
            if not lst:
                continue
            k_rest = _remove_one(k, j)
            pref = (1j if j[0] > 0 else -1j) * p * c1
            for l, c2, q in lst:
                l_rest = cache.get((l, partner))
                if l_rest is None:
                    l_rest = cache[(l, partner)] = _remove_one(l, partner)
                key = tuple(sorted(k_rest + l_rest, key=_entry_key))
                out[key] = out.get(key, 0) + pref * q * c2
    return HomogeneousPolynomial(F.degree + G.degree - 2, out, check=False)


def h2_bracket(model, P):
    """Closed form ``{H2, P} = sum_k i Omega(k) c_k z_k``."""
    return HomogeneousPolynomial(
        P.degree, {k: 1j * small_divisor(k, model) * c for k, c in P.terms.items()}, check=False
    )


def pseudo_action(a, d, K):
    """``J_a = sum_{<b> = <a>} xi_b conj(xi_b)`` as a degree-2 polynomial."""
    w2 = weight_sq(a)
    terms = {((1, b), (-1, b)): 1.0 for b in enumerate_modes(d, K) if weight_sq(b) == w2}
    return HomogeneousPolynomial(2, terms, check=False)


def lie_series_compose(model, P, chi, r):
    """Terms of degree ``<= r`` of ``exp(ad_chi)(H2 + P) - H2``.

    ``ad_chi H2`` uses the closed form, so no truncated ``H2`` is built.
    Every generator degree is ``>= 3``, hence each bracket raises the degree
    and the series terminates below ``r``.
    """
    chi_parts = [c for c in _as_parts(chi) if len(c)]
    if any(c.degree < 3 for c in chi_parts):
        raise InvalidArgumentError("generator must have degrees >= 3")
    result = GradedPolynomial([p for p in _as_parts(P) if p.degree <= r])
    if not chi_parts:
        return result
    # first application includes H2
    term = defaultdict(list)
    for c in chi_parts:
        if c.degree <= r:
            term[c.degree].append(-h2_bracket(model, c))
    for c in chi_parts:
        for p in result.parts.values():
            if c.degree + p.degree - 2 <= r:
                term[c.degree + p.degree - 2].append(poisson_bracket(c, p))
    current = GradedPolynomial([_sum_same_degree(m, ps) for m, ps in term.items()])
    order = 1
    while len(current):
        result = result + current
        order += 1
        nxt = defaultdict(list)
        for c in chi_parts:
            for p in current.parts.values():
                if c.degree + p.degree - 2 <= r:
                    nxt[c.degree + p.degree - 2].append(poisson_bracket(c, p).scale(1.0 / order))
        current = GradedPolynomial([_sum_same_degree(m, ps) for m, ps in nxt.items()])
    return result


def _sum_same_degree(m, polys):
    out = {}
    for p in polys:
        for k, c in p.terms.items():
            out[k] = out.get(k, 0) + c
    return HomogeneousPolynomial(m, out, check=False)


# -- NLW nonlinearity ---------------------------------------------------------


class NonlinearityF:
    """Polynomial nonlinearity ``f(u) = sum_{p >= 2} f_p u^p``.

    ``F`` is the primitive with ``F(0) = 0``; its degree-``q`` coefficient is
    ``f_{q-1} / q``.
    """

    def __init__(self, coeffs=None):
        coeffs = {int(p): float(c) for p, c in (coeffs or {}).items() if float(c) != 0.0}
        bad = [p for p in coeffs if p < 2]
        if bad:
            raise InvalidArgumentError(f"f must vanish to order 2 at 0; got degrees {bad}")
        self.coeffs = dict(sorted(coeffs.items()))

    @classmethod
    def parse(cls, text):
        """Parse ``"2:1.0, 3:-0.5"``; an empty string means ``f = 0``."""
        out = {}
        for tok in (text or "").replace(";", ",").split(","):
            tok = tok.strip()
            if not tok:
                continue
            p, _, c = tok.partition(":")
            out[int(p)] = float(c)
        return cls(out)

    def __str__(self):
        return ",".join(f"{p}:{c!r}" for p, c in self.coeffs.items())

    def __eq__(self, other):
        return isinstance(other, NonlinearityF) and self.coeffs == other.coeffs

    @property
    def is_zero(self):
        return not self.coeffs

    @property
    def degree(self):
        return max(self.coeffs, default=0)

    def primitive_coeff(self, q):
        return self.coeffs.get(q - 1, 0.0) / q

    def f(self, u):
        out = np.zeros_like(u)
        for p, c in self.coeffs.items():
            out = out + c * u**p
        return out

    def F(self, u):
        out = np.zeros_like(u)
        for p, c in self.coeffs.items():
            out = out + c * u ** (p + 1) / (p + 1)
        return out


def taylor_expand_nlw(f, K, r, m, d=1):
    """Degree-3..r pieces of ``mean_x F(sum_a (xi_a e^{iax} + c.c.) / sqrt(2 omega_a))``.

    Averaging over the torus keeps exactly the zero-momentum monomials; each
    canonical key collects ``F_p`` times its number of orderings times
    ``prod (2 omega_{a_i})^{-1/2}``.
    """
    from .resonance import FrequencyModel

    if not m > 0:
        raise InvalidArgumentError(f"mass must be > 0, got {m}")
    if r < 3:
        raise InvalidArgumentError(f"r must be >= 3, got {r}")
    model = FrequencyModel(m, d)
    scale = {a: 1.0 / math.sqrt(2.0 * model.omega(a)) for a in enumerate_modes(d, K)}
    parts = []
    for p in range(3, r + 1):
        Fp = f.primitive_coeff(p)
        if Fp == 0.0:
            continue
        terms = {}
        for k in zero_momentum_indices(d, K, p):
            prod = 1.0
            # sign-free order keeps c_k and c_conj(k) bitwise equal
            for a in sorted(a for _, a in k):
                prod *= scale[a]
            terms[k] = Fp * multiplicity_count(k) * prod
        parts.append(HomogeneousPolynomial(p, terms, check=False))
    return GradedPolynomial(parts)


# -- Lie flow ---------------------------------------------------------------


def _max_coeff(chi):
    return max((p.sup_norm() for p in _as_parts(chi)), default=0.0)


def lie_flow(chi, state, t=1.0, tol=1e-12, radius=None, kappa=0.1, s=1.0, return_info=False):
    """Integrate ``z' = X_chi(z)`` from ``state`` up to time ``t``.

    Parameters
    ----------
    tol : float
        Relative local tolerance of the adaptive DOP853 integrator.
    radius : float, optional
        Refuse states with ``||z||_s`` above it. Defaults to
        ``kappa / max_m ||c_m||``.

    Raises
    ------
    RadiusGuardError
        If the state is outside the guard radius.
    IntegrationError
        If the integrator fails (e.g. step-size underflow).
    """
    parts = [p for p in _as_parts(chi) if len(p)]
    cmax = _max_coeff(chi)
    if radius is None:
        radius = kappa / cmax if cmax > 0 else math.inf
    znorm = math.sqrt(2.0) * state.norm(s)
    if znorm > radius:
        raise RadiusGuardError(f"||z||_{s} = {znorm:.3g} exceeds the Lie-flow radius {radius:.3g}")
    if not parts or t == 0:
        out = state.with_xi(state.xi.copy())
        return (out, {"nfev": 0, "displacement": 0.0, "displacement_constant": 0.0}) if return_info else out

    n = len(state.xi)
    compiled = [p.compiled(state.d, state.K) for p in parts]
    kernel = _backend.poly_eval_grad

    def rhs(_, y):
        xi = y[:n] + 1j * y[n:]
        z = np.concatenate([xi, np.conj(xi)])
        g = np.zeros(2 * n, dtype=complex)
        for idx, coef in compiled:
            g += kernel(idx, coef, z, True)[1]
        dxi = -1j * g[n:]
        return np.concatenate([dxi.real, dxi.imag])

    y0 = np.concatenate([state.xi.real, state.xi.imag])
    scale = float(np.max(np.abs(y0))) or 1.0
    sol = solve_ivp(rhs, (0.0, float(t)), y0, method="DOP853", rtol=tol, atol=tol * scale)
    if not sol.success:
        raise IntegrationError(f"Lie flow integration failed: {sol.message}")
    y = sol.y[:, -1]
    out = state.with_xi(y[:n] + 1j * y[n:])
    disp = math.sqrt(2.0) * out.with_xi(out.xi - state.xi).norm(s)
    const = disp / (cmax * znorm**2) if znorm > 0 and cmax > 0 else 0.0
    logger.debug("lie_flow: nfev=%d displacement=%.3e measured C=%.3e", sol.nfev, disp, const)
    if return_info:
        return out, {"nfev": sol.nfev, "displacement": disp, "displacement_constant": const}
    return out


# -- text format --------------------------------------------------------------


def dump_polynomial(P):
    """One monomial per line: ``deg m | (d,a..) ... | re im`` (17 digits)."""
    lines = []
    for part in _as_parts(P):
        for k, c in part.terms.items():
            lines.append(f"deg {part.degree} | {format_index(k)} | {c.real:.17g} {c.imag:.17g}")
    return "\n".join(lines) + ("\n" if lines else "")


def load_polynomial(text):
    """Inverse of :func:`dump_polynomial`; returns a :class:`GradedPolynomial`."""
    by_deg = defaultdict(dict)
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            head, idx, coef = (x.strip() for x in line.split("|"))
            deg = int(head.split()[1])
            re, im = (float(x) for x in coef.split())
            k = parse_index(idx)
        except (ValueError, IndexError, InvalidArgumentError) as exc:
            raise InvalidArgumentError(f"line {lineno}: cannot parse {line!r}") from exc
        if len(k) != deg:
            raise InvalidArgumentError(f"line {lineno}: degree {deg} but {len(k)} entries")
        by_deg[deg][canonical(k)] = complex(re, im)
    return GradedPolynomial([HomogeneousPolynomial(m, t) for m, t in by_deg.items()])
