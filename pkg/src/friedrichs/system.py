"""First-order operators S = Σ_μ A^μ ∇_μ + C with a Hermitian fiber metric.

A system carries its chart, its batched coefficient evaluator and its fiber
metric G (possibly indefinite).  Conditions on the operator are certified by
sampling:

(S)  G·A^μ Hermitian at every sample,
(H)  ⟨σ(τ)·,·⟩ positive definite for sampled future timelike covectors τ,
(P)  the zero-order endomorphism of S + S† bounded below by c > 0.

The *time sign* s* ∈ {+1, −1} is the sign that makes s*·G·σ(dt) positive
definite.  For every catalog system except the Dirac operator s* = +1; the
Dirac operator with the standard spin product pairs negatively against dt,
and s* = −1 keeps the normalized metric s*·β·G·σ(dt) positive definite while
boundary forms stay in the original metric.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import geometry
from .errors import ContractError, NormalizationError
from .linalg import definiteness_sign, eigh_pencil, matrix_rank

#: finite-difference step scale for coefficient derivatives
FD_STEP = float(np.cbrt(np.finfo(float).eps))


@dataclass
class GradientLayout:
    """Block layout of a reduced second-order problem.

    The state vector is  [value block (k)] [gradient block] [tail block],
    where the gradient block stores covariant components, one k-wide slot per
    covector direction; ``has_time_slot`` marks a leading dt slot (Klein-Gordon
    reduction).  Boundary-condition constructors use this to place normal
    contractions.
    """

    k: int
    n: int
    value_start: int
    grad_start: int
    has_time_slot: bool = False
    tail_start: Optional[int] = None

    @property
    def grad_width(self):
        return self.k * (self.n + (1 if self.has_time_slot else 0))

    def grad_slot(self, axis):
        """Column range of the spatial covector slot for coordinate ``axis``."""
        off = self.grad_start + (self.k if self.has_time_slot else 0)
        return slice(off + axis * self.k, off + (axis + 1) * self.k)


@dataclass(eq=False)
class FriedrichsSystem:
    chart: geometry.SpacetimeChart
    fiber_rank: int
    coeff: Callable    # coeff(t, xs) -> (A (m, n+1, N, N), C (m, N, N))
    metric: Callable   # metric(t, xs) -> (m, N, N)
    metric_positive: bool
    name: str = "custom"
    layout: Optional[GradientLayout] = None
    time_independent: bool = True
    constant: bool = False
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def dim_space(self):
        return self.chart.dim_space

    def coeff_at(self, t, xs):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        A, C = self.coeff(t, xs)
        N, n = self.fiber_rank, self.dim_space
        A = np.broadcast_to(np.asarray(A, dtype=complex), (xs.shape[0], n + 1, N, N))
        C = np.broadcast_to(np.asarray(C, dtype=complex), (xs.shape[0], N, N))
        return A, C

    def metric_at(self, t, xs):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        N = self.fiber_rank
        G = np.broadcast_to(np.asarray(self.metric(t, xs), dtype=complex),
                            (xs.shape[0], N, N))
        return G

    def symbol(self, t, x, xi):
        """Principal symbol σ(ξ) = Σ_μ ξ_μ A^μ at the point (t, x)."""
        xi = np.asarray(xi, dtype=complex)
        if xi.shape != (self.dim_space + 1,):
            raise ContractError(f"covector must have {self.dim_space + 1} components")
        A, _ = self.coeff_at(t, np.atleast_2d(x))
        return np.einsum("m,mij->ij", xi, A[0])

    def symbol_batch(self, t, xs, xi):
        A, _ = self.coeff_at(t, xs)
        xi = np.asarray(xi, dtype=complex)
        return np.einsum("m,pmij->pij", xi, A)

    @property
    def time_sign(self):
        """Sign s* with s*·G·σ(dt) ≻ 0 at samples; 0 if indefinite/singular."""
        if "time_sign" not in self._cache:
            ts, xs = self.chart.sample_interior(8)
            signs = set()
            for t in ts[::3]:
                A, _ = self.coeff_at(t, xs)
                G = self.metric_at(t, xs)
                W = np.einsum("pij,pjk->pik", G, A[:, 0])
                for i in range(0, xs.shape[0], max(1, xs.shape[0] // 16)):
                    signs.add(definiteness_sign(W[i]))
            self._cache["time_sign"] = signs.pop() if len(signs) == 1 else 0
        return self._cache["time_sign"]

    def positive_metric_at(self, t, xs):
        """Positive-definite companion metric: G itself, or s*·β·G·σ(dt)."""
        G = self.metric_at(t, xs)
        if self.metric_positive:
            return G
        s = self.time_sign
        if s == 0:
            return None
        xs2 = np.atleast_2d(np.asarray(xs, dtype=float))
        beta = self.chart.beta_at(t, xs2)
        A, _ = self.coeff_at(t, xs2)
        P = s * beta[:, None, None] * np.einsum("pij,pjk->pik", G, A[:, 0])
        return 0.5 * (P + np.conj(np.swapaxes(P, 1, 2)))

    def classify(self):
        if "classification" not in self._cache:
            sym = check_symmetric(self)
            hyp = check_hyperbolic(self) if sym.verdict else None
            pos = check_positive(self) if sym.verdict else None
            cc = constant_characteristic(self)
            self._cache["classification"] = Classification(
                symmetric=sym.verdict,
                hyperbolic=bool(hyp and hyp.oriented_verdict),
                dt_form_positive=bool(hyp and hyp.dt_form_positive),
                time_sign=hyp.time_sign if hyp else 0,
                positive=bool(pos and pos.passed),
                constant_characteristic=cc[0],
                characteristic_dim=cc[1],
            )
        return self._cache["classification"]


@dataclass
class Classification:
    symmetric: bool
    hyperbolic: bool
    dt_form_positive: bool
    time_sign: int
    positive: bool
    constant_characteristic: bool
    characteristic_dim: int


@dataclass
class SymmetryReport:
    verdict: bool
    max_asymmetry: float


@dataclass
class HyperbolicReport:
    verdict: bool            # literal (H): ⟨σ(τ)·,·⟩ ≻ 0 on the future dt-cone
    oriented_verdict: bool   # (H) after orienting time with s*
    min_eigenvalue: float
    time_sign: int
    dt_form_positive: bool


@dataclass
class PositivityReport:
    slice_times: np.ndarray
    c_by_slice: np.ndarray   # per-time-slice lower bound c_t
    c_min: float
    passed: bool
    max_imag: float = 0.0
    interpretation: str = ("c_t = smallest eigenvalue of the pointwise Hermitian "
                           "part of the zero-order endomorphism of S + S† over "
                           "the slice")


def symbol(sys, t, x, xi):
    return sys.symbol(t, x, xi)


def check_symmetric(sys, per_axis=16, tol=1e-9):
    """Condition (S): G·A^μ Hermitian at every sampled point."""
    ts, xs = sys.chart.sample_interior(per_axis)
    worst = 0.0
    for t in ts[:: max(1, len(ts) // 8)]:
        A, _ = sys.coeff_at(t, xs)
        G = sys.metric_at(t, xs)
        W = np.einsum("pij,pmjk->pmik", G, A)
        asym = np.linalg.norm(W - np.conj(np.swapaxes(W, 2, 3)), axis=(2, 3))
        scale = np.maximum(1.0, np.linalg.norm(W, axis=(2, 3)))
        worst = max(worst, float(np.max(asym / scale)))
    return SymmetryReport(worst < tol, worst)


def _timelike_cone(sys, t, x, n_cone, rng):
    """dt plus random future timelike covectors at (t, x)."""
    n = sys.dim_space
    hinv = sys.chart.h_inv_at(t, np.atleast_2d(x))[0]
    beta = sys.chart.beta_at(t, np.atleast_2d(x))[0]
    taus = [np.concatenate([[1.0], np.zeros(n)])]
    for _ in range(n_cone):
        u = rng.standard_normal(n)
        norm = np.sqrt(u @ hinv @ u)
        if norm == 0:
            continue
        rho = rng.uniform(0.0, 0.95) / beta
        taus.append(np.concatenate([[1.0], rho * u / norm]))
    return taus


def check_hyperbolic(sys, per_axis=8, n_cone=16, tol=1e-10, seed=0):
    """Condition (H) over sampled points and a sampled future timelike cone.

    ``verdict`` is the literal condition for the +dt cone; ``oriented_verdict``
    allows the system's time sign s*.  ``dt_form_positive`` reports the weaker
    hypothesis that ⟨σ(dt)·,·⟩ alone is positive definite.
    """
    sym = check_symmetric(sys)
    if not sym.verdict:
        raise ContractError("check_hyperbolic requires a symmetric system")
    rng = np.random.default_rng(seed)
    ts, xs = sys.chart.sample_interior(per_axis)
    stride = max(1, xs.shape[0] // 16)
    min_eig = np.inf
    min_eig_oriented = np.inf
    dt_pos = True
    s = sys.time_sign
    for t in ts[:: max(1, len(ts) // 4)]:
        G = sys.metric_at(t, xs[::stride])
        for i, x in enumerate(xs[::stride]):
            for j, tau in enumerate(_timelike_cone(sys, t, x, n_cone, rng)):
                W = G[i] @ sys.symbol(t, x, tau)
                ev = np.linalg.eigvalsh(0.5 * (W + W.conj().T))
                min_eig = min(min_eig, float(ev[0]))
                if s != 0:
                    min_eig_oriented = min(min_eig_oriented, float(np.min(s * ev)))
                if j == 0:
                    dt_pos = dt_pos and ev[0] > tol
    oriented = s != 0 and min_eig_oriented > tol
    return HyperbolicReport(min_eig > tol, oriented, min_eig, s, bool(dt_pos))


def formal_adjoint(sys):
    """Formal adjoint S† in L²(G, β√det h): −A^{μ†}∇_μ − divergence term + C†.

    Adjoints of matrices are taken with respect to the fiber Gram matrix;
    coefficient and volume-density derivatives are centered differences.
    """
    chart = sys.chart
    n = sys.dim_space

    def weighted(t, xs):
        A, _ = sys.coeff_at(t, xs)
        G = sys.metric_at(t, xs)
        mu = geometry.volume_density(chart, t, xs)
        GA = np.einsum("pij,pmjk->pmik", G, A)
        return mu[:, None, None, None] * np.conj(np.swapaxes(GA, 2, 3))

    def coeff(t, xs):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        A, C = sys.coeff_at(t, xs)
        G = sys.metric_at(t, xs)
        Ginv = np.linalg.inv(G)
        mu = geometry.volume_density(chart, t, xs)
        A_adj = -np.einsum("pij,pmkj,pkl->pmil", Ginv, np.conj(A), G)
        C_adj = np.einsum("pij,pkj,pkl->pil", Ginv, np.conj(C), G)
        div = np.zeros_like(C)
        ht = FD_STEP * (1.0 + abs(t))
        div += (weighted(t + ht, xs)[:, 0] - weighted(t - ht, xs)[:, 0]) / (2 * ht)
        for a in range(n):
            hx = FD_STEP * (1.0 + float(np.max(np.abs(xs[:, a]))))
            dx = np.zeros_like(xs)
            dx[:, a] = hx
            div += (weighted(t, xs + dx)[:, 1 + a] - weighted(t, xs - dx)[:, 1 + a]) / (2 * hx)
        C_adj -= np.einsum("pij,pjk->pik", Ginv, div) / mu[:, None, None]
        return A_adj, C_adj

    return FriedrichsSystem(
        chart=chart, fiber_rank=sys.fiber_rank, coeff=coeff, metric=sys.metric,
        metric_positive=sys.metric_positive, name=sys.name + "_adjoint",
        layout=sys.layout, time_independent=sys.time_independent, constant=False)


def zero_order_symmetrization(sys, t, xs):
    """Hermitian part (w.r.t. G) of the zero-order endomorphism of S + S†."""
    adj = sys._cache.setdefault("adjoint", formal_adjoint(sys))
    _, C = sys.coeff_at(t, xs)
    _, C_adj = adj.coeff_at(t, xs)
    G = sys.metric_at(t, xs)
    Ginv = np.linalg.inv(G)
    Z = C + C_adj
    Z_h = 0.5 * (Z + np.einsum("pij,pkj,pkl->pil", Ginv, np.conj(Z), G))
    return Z_h, G


def check_positive(sys, n_slices=9, per_axis=24, pos_tol=1e-10):
    """Condition (P): per-slice lower bound of the symmetrized zero-order term.

    c_t is the smallest eigenvalue of the endomorphism Re(S† + S) over the
    slice; for an indefinite fiber metric the spectrum is taken from the
    endomorphism directly (real up to roundoff for the catalog systems).
    """
    chart = sys.chart
    ts = chart.sample_times(n_slices)
    _, xs = chart.sample_interior(per_axis)
    c_by_slice = np.empty(len(ts))
    max_imag = 0.0
    for k, t in enumerate(ts):
        Z_h, G = zero_order_symmetrization(sys, t, xs)
        c_slice = np.inf
        for i in range(xs.shape[0]):
            if sys.metric_positive:
                ev, _ = eigh_pencil(G[i] @ Z_h[i], G[i])
            else:
                ev = np.linalg.eigvals(Z_h[i])
                max_imag = max(max_imag, float(np.max(np.abs(ev.imag))))
                ev = np.sort(ev.real)
            c_slice = min(c_slice, float(ev[0]))
        c_by_slice[k] = c_slice
    c_min = float(np.min(c_by_slice))
    return PositivityReport(ts, c_by_slice, c_min, c_min > pos_tol, max_imag)


def constant_characteristic(sys, n_time=8, n_tang=4, tol=1e-9):
    """dim ker σ(n♭) along the boundary: (is it constant, common dimension)."""
    dims = []
    for q in geometry.all_boundary_points(sys.chart, n_time, n_tang):
        nb = geometry.outward_normal(sys.chart, q)
        sn = sys.symbol(q.t, q.x, nb)
        dims.append(sys.fiber_rank - matrix_rank(sn, tol=tol))
    return len(set(dims)) == 1, dims[0]


def beta_normalize(sys):
    """σ(dt)⁻¹·S with fiber metric s*·β·G·σ(dt).

    The returned system has A⁰ = Id.  ``metric_positive`` is set when the
    input was hyperbolic up to time orientation (s* ≠ 0); otherwise the
    algebraic normalization is still returned with an indefinite metric.
    """
    s = sys.time_sign
    chart = sys.chart

    def coeff(t, xs):
        A, C = sys.coeff_at(t, xs)
        try:
            a0inv = np.linalg.inv(A[:, 0])
        except np.linalg.LinAlgError as exc:
            raise NormalizationError("σ(dt) singular; cannot beta-normalize") from exc
        A_new = np.einsum("pij,pmjk->pmik", a0inv, A)
        C_new = np.einsum("pij,pjk->pik", a0inv, C)
        return A_new, C_new

    sign = s if s != 0 else 1

    def metric(t, xs):
        xs2 = np.atleast_2d(np.asarray(xs, dtype=float))
        A, _ = sys.coeff_at(t, xs2)
        G = sys.metric_at(t, xs2)
        beta = chart.beta_at(t, xs2)
        P = sign * beta[:, None, None] * np.einsum("pij,pjk->pik", G, A[:, 0])
        return 0.5 * (P + np.conj(np.swapaxes(P, 1, 2)))

    # fail fast on singular σ(dt)
    _, xs_probe = chart.sample_interior(4)
    coeff(chart.sample_times(3)[1], xs_probe[:2])

    return FriedrichsSystem(
        chart=chart, fiber_rank=sys.fiber_rank, coeff=coeff, metric=metric,
        metric_positive=s != 0, name=sys.name + "_normalized", layout=sys.layout,
        time_independent=sys.time_independent, constant=sys.constant and chart.constant)


def lambda_shift(sys, lam):
    """K_λ = S + λ·σ(dt): the zero-order term becomes C + λ·A⁰."""
    def coeff(t, xs):
        A, C = sys.coeff_at(t, xs)
        return A, C + lam * A[:, 0]

    return FriedrichsSystem(
        chart=sys.chart, fiber_rank=sys.fiber_rank, coeff=coeff, metric=sys.metric,
        metric_positive=sys.metric_positive, name=f"{sys.name}_shift{lam}",
        layout=sys.layout, time_independent=sys.time_independent, constant=sys.constant)


def find_lambda(sys, lam_max=64):
    """Smallest integer λ ≥ 0 making K_λ a positive symmetric system."""
    for lam in range(lam_max + 1):
        if check_positive(lambda_shift(sys, lam)).passed:
            return lam
    raise ContractError(f"no positive shift found with λ ≤ {lam_max}")


# -- elementary builders ----------------------------------------------------


def advection_system(chart, speed=1.0):
    """Scalar transport ∂_t + a·∂_x (1+1D)."""
    if chart.dim_space != 1:
        raise ContractError("advection builder is 1+1D")

    def coeff(t, xs):
        m = xs.shape[0]
        A = np.zeros((m, 2, 1, 1), dtype=complex)
        A[:, 0, 0, 0] = 1.0
        A[:, 1, 0, 0] = speed
        return A, np.zeros((m, 1, 1), dtype=complex)

    def metric(t, xs):
        return np.ones((xs.shape[0], 1, 1), dtype=complex)

    return FriedrichsSystem(chart, 1, coeff, metric, metric_positive=True,
                            name="advection", constant=True)


def constant_system(chart, A_list, C, gram=None, name="custom", metric_positive=None):
    """System with constant coefficient matrices (CLI custom tables, tests)."""
    A_const = np.asarray(A_list, dtype=complex)
    N = A_const.shape[-1]
    C_const = np.zeros((N, N), dtype=complex) if C is None else np.asarray(C, dtype=complex)
    G_const = np.eye(N, dtype=complex) if gram is None else np.asarray(gram, dtype=complex)
    if metric_positive is None:
        metric_positive = definiteness_sign(G_const) == 1

    def coeff(t, xs):
        m = xs.shape[0]
        return (np.broadcast_to(A_const, (m,) + A_const.shape),
                np.broadcast_to(C_const, (m, N, N)))

    def metric(t, xs):
        return np.broadcast_to(G_const, (xs.shape[0], N, N))

    return FriedrichsSystem(chart, N, coeff, metric, metric_positive=metric_positive,
                            name=name, constant=True)
