"""Pseudo-spectral Strang splitting for the Galerkin-truncated NLW.

The evolved object is the retained spectrum ``xi_a`` (``<a> <= K``). Both
substeps are exact flows of the truncated system:

* linear: ``xi_a <- exp(-i omega_a h) xi_a``;
* nonlinear: ``u`` is frozen and ``v <- v - h f(u)``, i.e.
  ``xi_a <- xi_a - i h fhat(u)_a / sqrt(2 omega_a)``, with ``f(u)`` formed
  pointwise on a grid large enough that no product aliases onto the kept
  modes.

This is a simulator of the truncation at ``K``, not a convergent solver of the
full PDE.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import fft as sfft

from .errors import BlowUpError, ConfigError, InvalidArgumentError
from .lattice import SpectralState, enumerate_modes
from .polynomial import NonlinearityF
from .resonance import FrequencyModel

__all__ = [
    "Diagnostics",
    "DriftStudyResult",
    "GridField",
    "NLWSimulator",
    "RunSummary",
    "drift_scaling_study",
    "from_spectral",
    "grid_size",
    "initial_state",
    "run_experiment",
    "split_step",
    "super_actions",
    "to_spectral",
]


def grid_size(K, degree, factor=None):
    """Points per dimension: ``factor (2 ceil(K) + 1) / 2`` rounded to a fast FFT length.

    ``factor`` defaults to ``max(degree + 1, 2)``; smaller values would alias
    the product ``u^degree`` onto retained modes and are rejected.
    """
    need = max(degree + 1, 2)
    if factor is None:
        factor = need
    if factor < need:
        raise ConfigError(f"dealias factor {factor} < {need} aliases a degree-{degree} nonlinearity")
    return sfft.next_fast_len(int(math.ceil(factor * (2 * math.ceil(K) + 1) / 2)))


@dataclass(frozen=True, eq=False)
class GridField:
    """Real samples of ``u`` and ``v = du/dt`` on the uniform grid of ``[0, 2 pi)^d``."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if u.shape != v.shape or len(set(u.shape)) != 1:
            raise InvalidArgumentError(f"u, v must share a cubic grid shape, got {u.shape}, {v.shape}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def M(self):
        return self.u.shape[0]

    @property
    def d(self):
        return self.u.ndim

    @staticmethod
    def coordinates(M, d=1):
        x = 2 * np.pi * np.arange(M) / M
        return np.meshgrid(*([x] * d), indexing="ij")


class _Layout:
    """Index maps between the retained modes and an ``M^d`` FFT grid."""

    def __init__(self, d, K, M, mass):
        self.d, self.K, self.M = d, K, M
        self.modes = enumerate_modes(d, K)
        kmax = max((max(abs(x) for x in a) for a in self.modes), default=0)
        if M <= 2 * kmax:
            raise ConfigError(f"grid size {M} cannot resolve modes up to |a_i| = {kmax}")
        index = {a: i for i, a in enumerate(self.modes)}
        self.neg = np.array([index[tuple(-x for x in a)] for a in self.modes], dtype=np.intp)
        self.pos = np.ravel_multi_index(
            tuple(np.array([a[i] % M for a in self.modes], dtype=np.intp) for i in range(d)), (M,) * d
        )
        model = FrequencyModel(mass, d)
        self.omega = model.omegas(self.modes)
        self.sqrt_om = np.sqrt(self.omega)
        self.norm = float(M) ** d

    def u_hat(self, xi):
        return (xi + np.conj(xi[self.neg])) / (math.sqrt(2.0) * self.sqrt_om)

    def v_hat(self, xi):
        return (xi - np.conj(xi[self.neg])) * self.sqrt_om / (1j * math.sqrt(2.0))

    def to_grid(self, coeffs):
        buf = np.zeros(self.M**self.d, dtype=complex)
        buf[self.pos] = coeffs
        return sfft.ifftn(buf.reshape((self.M,) * self.d)) * self.norm

    def from_grid(self, values):
        return sfft.fftn(values).ravel()[self.pos] / self.norm


def to_spectral(fld, model, K):
    """``xi_a = (omega_a^{1/2} uhat_a + i omega_a^{-1/2} vhat_a) / sqrt 2`` for ``<a> <= K``.

    Fourier content of the field above ``K`` is discarded.
    """
    lay = _Layout(fld.d, K, fld.M, model.mass)
    uh = lay.from_grid(fld.u)
    vh = lay.from_grid(fld.v)
    xi = (lay.sqrt_om * uh + 1j * vh / lay.sqrt_om) / math.sqrt(2.0)
    return SpectralState(fld.d, K, xi)


def from_spectral(state, model, M=None, rtol=1e-12):
    """Inverse of :func:`to_spectral` on an ``M^d`` grid (default ``2 ceil(K) + 1``).

    Raises
    ------
    InvalidArgumentError
        If the synthesized fields have a relative imaginary part above ``rtol``.
    """
    M = M or grid_size(state.K, 1, 2)
    lay = _Layout(state.d, state.K, M, model.mass)
    u = lay.to_grid(lay.u_hat(state.xi))
    v = lay.to_grid(lay.v_hat(state.xi))
    for name, w in (("u", u), ("v", v)):
        scale = max(float(np.max(np.abs(w), initial=0.0)), 1e-300)
        if float(np.max(np.abs(w.imag), initial=0.0)) > rtol * scale:
            raise InvalidArgumentError(f"{name} is not real after the inverse transform")
    return GridField(u.real, v.real)


class NLWSimulator:
    """Reusable split-step integrator for one ``(d, K, m, f)`` setup."""

    def __init__(self, d, K, mass, f, dealias_factor=None):
        self.f = f if isinstance(f, NonlinearityF) else NonlinearityF(f)
        self.model = FrequencyModel(mass, d)
        self.d, self.K = d, K
        self.M = grid_size(K, self.f.degree, dealias_factor)
        self.layout = _Layout(d, K, self.M, mass)
        self.omega = self.layout.omega
        self.weights_sq = SpectralState.zeros(d, K).weights_sq
        self._phase = {}

    def _half_phase(self, dt):
        ph = self._phase.get(dt)
        if ph is None:
            ph = self._phase[dt] = np.exp(-0.5j * dt * self.omega)
        return ph

    def u_grid(self, xi):
        return self.layout.to_grid(self.layout.u_hat(xi)).real

    def kick(self, xi, dt):
        """Exact nonlinear flow for time ``dt`` (identity when ``f = 0``)."""
        if self.f.is_zero:
            return xi
        fu = self.f.f(self.u_grid(xi))
        fh = self.layout.from_grid(fu)
        return xi - 1j * dt * fh / (math.sqrt(2.0) * self.layout.sqrt_om)

    def step(self, xi, dt):
        ph = self._half_phase(dt)
        return ph * self.kick(ph * xi, dt)

    def energy(self, xi):
        h2 = float(np.dot(self.omega, np.abs(xi) ** 2))
        if self.f.is_zero:
            return h2
        return h2 + float(np.mean(self.f.F(self.u_grid(xi))))


@lru_cache(maxsize=32)
def _simulator(d, K, mass, fkey, dealias_factor):
    return NLWSimulator(d, K, mass, NonlinearityF.parse(fkey), dealias_factor)


def split_step(state, dt, model, f, dealias_factor=None):
    """One Strang step: half linear, full nonlinear kick, half linear."""
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be > 0, got {dt}")
    sim = _simulator(state.d, state.K, model.mass, str(f), dealias_factor)
    return state.with_xi(sim.step(state.xi, dt))


def super_actions(state):
    """``{1 + |a|^2: sum of |xi_b|^2 over <b> = <a>}`` for every class in the truncation."""
    w2 = state.weights_sq
    classes, inv = np.unique(w2, return_inverse=True)
    sums = np.bincount(inv, weights=np.abs(state.xi) ** 2, minlength=len(classes))
    return {int(c): float(v) for c, v in zip(classes, sums)}


# -- experiments --------------------------------------------------------------


def initial_state(cfg, epsilon=None, d=None):
    """Random-phase state with ``|xi_a| ~ <a>^{-(2s + d/2 + 1)}`` and ``||xi||_{2s} = eps``.

    With ``cfg.initial_state`` set, the profile is read from that file
    (lines ``(a1,..) re im``) and rescaled to the same norm.
    """
    eps = cfg.epsilon if epsilon is None else epsilon
    d = cfg.d if d is None else d
    if cfg.initial_state:
        st = load_state(cfg.initial_state, d, cfg.K)
    else:
        rng = np.random.default_rng(cfg.seed)
        st0 = SpectralState.zeros(d, cfg.K)
        amp = st0.weights_sq.astype(float) ** (-(2 * cfg.s + d / 2 + 1) / 2)
        phase = rng.uniform(0.0, 2 * np.pi, size=amp.shape)
        st = st0.with_xi(amp * np.exp(1j * phase))
    norm = st.norm(2 * cfg.s)
    if norm == 0 or eps == 0:
        return st.with_xi(np.zeros_like(st.xi))
    return st.with_xi(st.xi * (eps / norm))


def load_state(path, d, K):
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            idx, _, rest = line.partition(")")
            try:
                a = tuple(int(x) for x in idx.strip().lstrip("(").split(","))
                re, im = (float(x) for x in rest.split())
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: cannot parse {line!r}") from exc
            if len(a) != d:
                raise ConfigError(f"{path}:{lineno}: mode {a} is not {d}-dimensional")
            values[a] = complex(re, im)
    try:
        return SpectralState.from_dict(d, K, values)
    except InvalidArgumentError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


@dataclass
class Diagnostics:
    """Sampled time series; ``classes`` are the squared weights of the J columns."""

    classes: tuple
    rows: list = field(default_factory=list)

    @property
    def header(self):
        return ["t", "energy", "low_norm_s", "high_norm_s0", "drift_sum"] + [f"J_{c}" for c in self.classes]

    def column(self, name):
        i = self.header.index(name)
        return np.array([row[i] for row in self.rows])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow(["%.17g" % x for x in row])
        return buf.getvalue()


@dataclass
class RunSummary:
    """Result of :func:`run_experiment`; ``diagnostics`` is ``None`` when streamed."""

    epsilon: float
    N: float
    T: float
    dt: float
    steps: int
    max_weighted_drift: float
    max_drift_sum: float
    final_time: float
    diagnostics: Diagnostics | None = None
    grid_size: int = 0


class _Tracker:
    def __init__(self, w2, N, s, s0, J0_state):
        self.w2 = w2
        self.classes, self.inv = np.unique(w2, return_inverse=True)
        self.low_mask = w2 <= N * N
        self.low_classes = self.classes <= N * N
        self.cw = self.classes.astype(float) ** s
        self.ws = w2.astype(float) ** s
        self.ws0 = w2.astype(float) ** s0
        self.J0 = self.actions(J0_state)

    def actions(self, xi):
        return np.bincount(self.inv, weights=np.abs(xi) ** 2, minlength=len(self.classes))

    def drift(self, J):
        weighted = self.cw * np.abs(J - self.J0)
        weighted = weighted[self.low_classes]
        return float(weighted.sum()), float(weighted.max(initial=0.0))

    def row(self, t, xi, energy):
        J = self.actions(xi)
        ab2 = np.abs(xi) ** 2
        low = math.sqrt(float(np.sum(self.ws[self.low_mask] * ab2[self.low_mask])))
        high = math.sqrt(float(np.sum(self.ws0[~self.low_mask] * ab2[~self.low_mask])))
        dsum, _ = self.drift(J)
        return [float(t), energy, low, high, dsum] + [float(x) for x in J]


def run_experiment(cfg, epsilon=None, sink=None, collect=True):
    """Integrate from :func:`initial_state` to the configured horizon.

    Rows are sampled every ``cfg.stride`` steps (and at the final time) and
    passed to ``sink`` as they are produced; with ``collect=False`` nothing is
    retained, so memory does not grow with the horizon. The weighted drift
    maximum is tracked at every step.

    Raises
    ------
    BlowUpError
        When ``||xi||_{2s}`` exceeds ``blowup_factor`` times its initial value.
    """
    eps = cfg.epsilon if epsilon is None else epsilon
    sim = NLWSimulator(cfg.d, cfg.K, cfg.m, cfg.nonlinearity(), cfg.dealias_factor)
    st = initial_state(cfg, eps)
    N = cfg.threshold(eps)
    T = cfg.horizon(eps)
    steps = max(1, int(round(T / cfg.dt)))
    dt = T / steps
    xi = st.xi
    tracker = _Tracker(st.weights_sq, N, cfg.s, cfg.s0, xi)
    w2s = st.weights_sq.astype(float) ** (2 * cfg.s)
    limit = cfg.blowup_factor * math.sqrt(float(np.sum(w2s * np.abs(xi) ** 2)))
    diag = Diagnostics(tuple(int(c) for c in tracker.classes)) if collect else None

    def emit(row):
        if diag is not None:
            diag.rows.append(row)
        if sink is not None:
            sink(row)

    emit(tracker.row(0.0, xi, sim.energy(xi)))
    max_w, max_sum = 0.0, 0.0
    for n in range(1, steps + 1):
        xi = sim.step(xi, dt)
        t = n * dt
        nrm = math.sqrt(float(np.sum(w2s * np.abs(xi) ** 2)))
        if not nrm <= limit:
            raise BlowUpError(f"norm {nrm:.3e} exceeded {cfg.blowup_factor}x initial at t = {t:.6g}", time=t)
        dsum, dmax = tracker.drift(tracker.actions(xi))
        max_w = max(max_w, dmax)
        max_sum = max(max_sum, dsum)
        if n % cfg.stride == 0 or n == steps:
            emit(tracker.row(t, xi, sim.energy(xi)))
    return RunSummary(eps, N, T, dt, steps, max_w, max_sum, steps * dt, diag, sim.M)


@dataclass
class DriftStudyResult:
    """Per-eps drift maxima and the fitted exponent of ``max ~ eps^p``."""

    epsilons: tuple
    maxima: tuple
    exponent: float
    degenerate: bool
    s: float
    thresholds: tuple = ()

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epsilon", "N", "max_weighted_drift"])
        for e, n, m in zip(self.epsilons, self.thresholds, self.maxima):
            w.writerow(["%.17g" % e, "%.17g" % n, "%.17g" % m])
        w.writerow(["exponent", "", "%.17g" % self.exponent])
        return buf.getvalue()


def drift_scaling_study(cfg, epsilons=None, degenerate_rtol=1e-12):
    """Run each ``eps`` to ``T = 1/eps`` and fit ``log max drift`` against ``log eps``.

    The fit is flagged degenerate (exponent ``nan``) when every maximum is
    below ``degenerate_rtol * eps^2``, as happens for ``f = 0``.
    """
    epsilons = tuple(cfg.epsilons if epsilons is None else epsilons)
    if len(epsilons) < 3:
        raise InvalidArgumentError(f"need >= 3 epsilons, got {len(epsilons)}")
    if any(not e > 0 for e in epsilons):
        raise InvalidArgumentError("epsilons must be positive")
    cfg_t = cfg.replace(T=None, long_run=False)
    maxima, thresholds = [], []
    for eps in epsilons:
        res = run_experiment(cfg_t, eps, collect=False)
        maxima.append(res.max_weighted_drift)
        thresholds.append(res.N)
    degenerate = all(m <= degenerate_rtol * e * e for m, e in zip(maxima, epsilons))
    if degenerate:
        p = math.nan
    else:
        p = float(np.polyfit(np.log(epsilons), np.log(np.maximum(maxima, 1e-300)), 1)[0])
    return DriftStudyResult(tuple(epsilons), tuple(maxima), p, degenerate, cfg.s, tuple(thresholds))
