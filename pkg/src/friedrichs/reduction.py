"""First-order reductions of second-order operators and compatibility checks.

Wave reduction (state Ψ = (∇_t u, ∇^Σ u, u), N = k(n+2)):

    A₀ = diag(1/β², Id, Id)
    A_Σ(ξ) = [[0, −tr_h(ξ⊗·), 0], [−ξ⊗, 0, 0], [0, 0, 0]]
    C  = [[b₀, b⌟, c], [0, ½h⁻¹(∂_t h)⌟, R_{∂_t,·}], [−1, 0, 0]]

Klein-Gordon reduction (state Ψ = (u, ∇u) with a spacetime gradient,
N = k(n+2)); the trace contracts with the Lorentzian metric, so the gradient
block carries the indefinite pairing g⁻¹ ⊗ ⟨,⟩ and σ(dt) is singular:

    S = [[0, −tr_g], [−1, 0]]∇ + diag(m², 1)

Reaction-diffusion (state Ψ = (u, ∇^Σ u), N = k(n+1)):

    S = diag(1, 0)∇_t + [[0, −tr_h], [−1, 0]]∇^Σ + diag(c, 1),
    K_λ = S + λ·diag(1, 0).

The compatibility checker realises the order-k corner conditions through the
recursion  𝔥_k = Σ_j binom(k−1, j) H_j 𝔥_{k−1−j} + ∇_t^{k−1}(σ(dt)⁻¹𝔣)  with
H₀ = σ(dt)⁻¹H and H_j = [∇_t, H_{j−1}] realised as time-derivatives of the
coefficient matrices of H₀.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import geometry
from .errors import ContractError
from .system import FD_STEP, FriedrichsSystem, GradientLayout, lambda_shift


@dataclass
class SecondOrderProblem:
    kind: str                      # normally_hyperbolic | klein_gordon | reaction_diffusion
    chart: geometry.SpacetimeChart
    k: int = 1
    mass: float = 0.0              # klein_gordon
    c: Optional[Callable] = None   # zero-order term: c(t, xs) -> (m, k, k)
    b0: Optional[Callable] = None  # scalar damping (normally_hyperbolic)
    b: Optional[Callable] = None   # vector drift (normally_hyperbolic)
    curvature: Optional[Callable] = None  # R_{∂_t,·}: (t, xs) -> (m, n, k, k)
    static_coeffs: bool = True     # set False when c/b0/b/curvature depend on t

    @property
    def time_independent(self):
        return self.chart.time_independent and self.static_coeffs

    def c_at(self, t, xs):
        if self.c is None:
            return np.zeros((xs.shape[0], self.k, self.k), dtype=complex)
        out = np.asarray(self.c(t, xs), dtype=complex)
        if out.ndim == 0:
            out = out * np.broadcast_to(np.eye(self.k), (xs.shape[0], self.k, self.k))
        return np.broadcast_to(out, (xs.shape[0], self.k, self.k))


def _weingarten(chart, t, xs):
    """½ h⁻¹ ∂_t h at the sampled points (zero on static charts)."""
    if chart.time_independent:
        return np.zeros((xs.shape[0], chart.dim_space, chart.dim_space))
    ht = FD_STEP * (1.0 + abs(t))
    dh = (chart.h_at(t + ht, xs) - chart.h_at(t - ht, xs)) / (2 * ht)
    return 0.5 * np.einsum("pij,pjk->pik", chart.h_inv_at(t, xs), dh)


def _wave_drift(prob, t, xs):
    """Default b₀ = (1/2β²)(tr_h ∂_t h − ∂_t β²/β²) and b = −(1/2β²)grad_h β²."""
    chart = prob.chart
    m, n = xs.shape
    beta2 = chart.beta_at(t, xs) ** 2
    if prob.b0 is not None:
        b0 = np.broadcast_to(np.asarray(prob.b0(t, xs), dtype=complex), (m,))
    elif chart.time_independent:
        b0 = np.zeros(m)
    else:
        ht = FD_STEP * (1.0 + abs(t))
        dh = (chart.h_at(t + ht, xs) - chart.h_at(t - ht, xs)) / (2 * ht)
        trh = np.einsum("pij,pji->p", chart.h_inv_at(t, xs), dh)
        db2 = (chart.beta_at(t + ht, xs) ** 2 - chart.beta_at(t - ht, xs) ** 2) / (2 * ht)
        b0 = (trh - db2 / beta2) / (2 * beta2)
    if prob.b is not None:
        b = np.broadcast_to(np.asarray(prob.b(t, xs), dtype=complex), (m, n))
    else:
        grad = np.zeros((m, n))
        for a in range(n):
            hx = FD_STEP * (1.0 + float(np.max(np.abs(xs[:, a]))))
            dx = np.zeros_like(xs)
            dx[:, a] = hx
            grad[:, a] = (chart.beta_at(t, xs + dx) ** 2 - chart.beta_at(t, xs - dx) ** 2) / (2 * hx)
        b = -np.einsum("pij,pj->pi", chart.h_inv_at(t, xs), grad) / (2 * beta2[:, None])
    return b0, b


def wave_to_first_order(prob):
    """Normally hyperbolic P = (1/β²)∇²_t + b₀∇_t + (∇^Σ)*∇^Σ + ∇_b + c → system."""
    if prob.kind != "normally_hyperbolic":
        raise ContractError("wave_to_first_order expects kind='normally_hyperbolic'")
    chart, k, n = prob.chart, prob.k, prob.chart.dim_space
    N = k * (n + 2)
    layout = GradientLayout(k=k, n=n, value_start=0, grad_start=k,
                            has_time_slot=False, tail_start=k * (n + 1))
    Ik = np.eye(k)

    def coeff(t, xs):
        m = xs.shape[0]
        beta2 = chart.beta_at(t, xs) ** 2
        hinv = chart.h_inv_at(t, xs)
        A = np.zeros((m, n + 1, N, N), dtype=complex)
        A[:, 0, :k, :k] = (1.0 / beta2)[:, None, None] * Ik
        idx = np.arange(k, N)
        A[:, 0, idx, idx] = 1.0
        for i in range(n):
            for j in range(n):
                A[:, 1 + i, :k, layout.grad_slot(j)] = -hinv[:, i, j, None, None] * Ik
            A[:, 1 + i, layout.grad_slot(i), :k] = -Ik
        C = np.zeros((m, N, N), dtype=complex)
        b0, b = _wave_drift(prob, t, xs)
        C[:, :k, :k] = b0[:, None, None] * Ik
        for j in range(n):
            C[:, :k, layout.grad_slot(j)] = b[:, j, None, None] * Ik
        C[:, :k, layout.tail_start:] = prob.c_at(t, xs)
        W = _weingarten(chart, t, xs)
        for i in range(n):
            for j in range(n):
                C[:, layout.grad_slot(i), layout.grad_slot(j)] = W[:, i, j, None, None] * Ik
        if prob.curvature is not None:
            R = np.asarray(prob.curvature(t, xs), dtype=complex)
            for i in range(n):
                C[:, layout.grad_slot(i), layout.tail_start:] = R[:, i]
        C[:, layout.tail_start:, :k] = -Ik
        return A, C

    def metric(t, xs):
        m = xs.shape[0]
        hinv = chart.h_inv_at(t, xs)
        G = np.zeros((m, N, N), dtype=complex)
        G[:, :k, :k] = Ik
        for i in range(n):
            for j in range(n):
                G[:, layout.grad_slot(i), layout.grad_slot(j)] = hinv[:, i, j, None, None] * Ik
        G[:, layout.tail_start:, layout.tail_start:] = Ik
        return G

    return FriedrichsSystem(chart, N, coeff, metric, metric_positive=True,
                            name="wave_reduction", layout=layout,
                            time_independent=prob.time_independent,
                            constant=chart.constant and prob.c is None
                            and prob.b0 is None and prob.b is None
                            and prob.curvature is None)


def kg_to_first_order(prob):
    """Klein-Gordon ∇*∇ + m² → symmetric positive system on V ⊕ T*M⊗V."""
    if prob.kind != "klein_gordon":
        raise ContractError("kg_to_first_order expects kind='klein_gordon'")
    chart, k, n = prob.chart, prob.k, prob.chart.dim_space
    N = k * (n + 2)
    layout = GradientLayout(k=k, n=n, value_start=0, grad_start=k, has_time_slot=True)
    Ik = np.eye(k)
    m2 = prob.mass ** 2

    def coeff(t, xs):
        m = xs.shape[0]
        beta2 = chart.beta_at(t, xs) ** 2
        hinv = chart.h_inv_at(t, xs)
        A = np.zeros((m, n + 1, N, N), dtype=complex)
        tslot = slice(layout.grad_start, layout.grad_start + k)
        A[:, 0, :k, tslot] = (1.0 / beta2)[:, None, None] * Ik
        A[:, 0, tslot, :k] = -Ik
        for i in range(n):
            for j in range(n):
                A[:, 1 + i, :k, layout.grad_slot(j)] = -hinv[:, i, j, None, None] * Ik
            A[:, 1 + i, layout.grad_slot(i), :k] = -Ik
        C = np.zeros((m, N, N), dtype=complex)
        C[:, :k, :k] = m2 * Ik
        idx = np.arange(k, N)
        C[:, idx, idx] = 1.0
        return A, C

    def metric(t, xs):
        m = xs.shape[0]
        beta2 = chart.beta_at(t, xs) ** 2
        hinv = chart.h_inv_at(t, xs)
        G = np.zeros((m, N, N), dtype=complex)
        G[:, :k, :k] = Ik
        tslot = slice(layout.grad_start, layout.grad_start + k)
        G[:, tslot, tslot] = -(1.0 / beta2)[:, None, None] * Ik
        for i in range(n):
            for j in range(n):
                G[:, layout.grad_slot(i), layout.grad_slot(j)] = hinv[:, i, j, None, None] * Ik
        return G

    return FriedrichsSystem(chart, N, coeff, metric, metric_positive=False,
                            name="kg_reduction", layout=layout,
                            time_independent=chart.time_independent,
                            constant=chart.constant)


def reaction_diffusion_to_first_order(prob, lam=0.0):
    """∇_t − tr(∇^Σ∇^Σ) + c → K_λ = S + λ·σ(dt) on V ⊕ T*Σ⊗V."""
    if prob.kind != "reaction_diffusion":
        raise ContractError("reaction_diffusion_to_first_order expects "
                            "kind='reaction_diffusion'")
    chart, k, n = prob.chart, prob.k, prob.chart.dim_space
    N = k * (n + 1)
    layout = GradientLayout(k=k, n=n, value_start=0, grad_start=k, has_time_slot=False)
    Ik = np.eye(k)

    def coeff(t, xs):
        m = xs.shape[0]
        hinv = chart.h_inv_at(t, xs)
        A = np.zeros((m, n + 1, N, N), dtype=complex)
        A[:, 0, :k, :k] = Ik
        for i in range(n):
            for j in range(n):
                A[:, 1 + i, :k, layout.grad_slot(j)] = -hinv[:, i, j, None, None] * Ik
            A[:, 1 + i, layout.grad_slot(i), :k] = -Ik
        C = np.zeros((m, N, N), dtype=complex)
        C[:, :k, :k] = prob.c_at(t, xs)
        idx = np.arange(k, N)
        C[:, idx, idx] = 1.0
        return A, C

    def metric(t, xs):
        m = xs.shape[0]
        hinv = chart.h_inv_at(t, xs)
        G = np.zeros((m, N, N), dtype=complex)
        G[:, :k, :k] = Ik
        for i in range(n):
            for j in range(n):
                G[:, layout.grad_slot(i), layout.grad_slot(j)] = hinv[:, i, j, None, None] * Ik
        return G

    base = FriedrichsSystem(chart, N, coeff, metric, metric_positive=True,
                            name="reaction_diffusion", layout=layout,
                            time_independent=prob.time_independent,
                            constant=chart.constant and prob.c is None)
    return lambda_shift(base, lam) if lam else base


# -- initial data -----------------------------------------------------------


@dataclass
class FirstOrderData:
    """Sampled wave-reduction initial data (h', ∇^Σh, h) on the initial slice."""

    values: np.ndarray     # (m, N) in the wave layout
    layout: GradientLayout
    xs: np.ndarray         # (m,) 1D sample positions
    residual: float        # ‖second block − numeric gradient of third block‖

    def block(self, which):
        L = self.layout
        if which == "velocity":
            return self.values[:, :L.k]
        if which == "gradient":
            return self.values[:, L.grad_start:L.grad_start + L.grad_width]
        return self.values[:, L.tail_start:]


def first_order_data_residual(values, layout, xs):
    """Constraint defect ‖gradient block − D_x(value block)‖∞ of sampled data."""
    if layout.n != 1:
        raise ContractError("sampled first-order data is one-dimensional")
    u = values[:, layout.tail_start:]
    grad = values[:, layout.grad_start:layout.grad_start + layout.k]
    num = np.gradient(u, xs, axis=0)
    scale = max(1.0, float(np.max(np.abs(num))))
    return float(np.max(np.abs(grad - num))) / scale


def constrain_initial_data(h, h_prime, chart, xs):
    """Assemble Ψ(0) = (h', ∇^Σ h, h) with the gradient taken numerically.

    ``h`` and ``h_prime`` are arrays (m, k) sampled on the 1D grid ``xs`` (or
    callables of xs).  The returned residual is zero by construction; use
    :func:`first_order_data_residual` to validate externally supplied data.
    """
    if chart.dim_space != 1:
        raise ContractError("constrain_initial_data supports one spatial dimension")
    xs = np.asarray(xs, dtype=float)
    h = np.atleast_2d(h(xs) if callable(h) else np.asarray(h, dtype=complex))
    h_prime = np.atleast_2d(h_prime(xs) if callable(h_prime) else np.asarray(h_prime, dtype=complex))
    if h.shape[0] != xs.size:
        h = h.T
    if h_prime.shape[0] != xs.size:
        h_prime = h_prime.T
    k = h.shape[1]
    layout = GradientLayout(k=k, n=1, value_start=0, grad_start=k,
                            has_time_slot=False, tail_start=2 * k)
    values = np.concatenate([h_prime, np.gradient(h, xs, axis=0), h], axis=1)
    res = first_order_data_residual(values, layout, xs)
    return FirstOrderData(values, layout, xs, res)


# -- compatibility conditions ----------------------------------------------


def taylor_coefficients(fn, t0, order, delta=1e-3):
    """Taylor coefficients a_j (fn(t) ≈ Σ a_j (t−t0)^j) by polynomial fitting.

    ``fn`` maps t to an ndarray; evaluated on a centered stencil of
    2·order + 1 points.  Shared by the compatibility recursion and its test
    oracle so their comparison isolates the recursion algebra.
    """
    if order == 0:
        return [np.asarray(fn(t0))]
    npts = 2 * order + 1
    offsets = (np.arange(npts) - order) * delta
    samples = np.stack([np.asarray(fn(t0 + dt), dtype=complex) for dt in offsets])
    vander = np.vander(offsets / delta, order + 1, increasing=True)
    scaled, *_ = np.linalg.lstsq(vander, samples.reshape(npts, -1), rcond=None)
    return [(c / delta ** j).reshape(samples.shape[1:]) for j, c in enumerate(scaled)]


def _fd_x(values, xs):
    return np.gradient(values, xs, axis=0)


@dataclass
class CompatibilityReport:
    order: int
    residuals: np.ndarray          # (order+1, n_faces)
    tolerance: float
    pass_flags: np.ndarray = field(init=False)

    def __post_init__(self):
        self.pass_flags = np.all(self.residuals <= self.tolerance, axis=1)

    @property
    def passed(self):
        return bool(np.all(self.pass_flags))

    @property
    def max_residual(self):
        return float(np.max(self.residuals))


def corner_derivatives(sys, f, h, order, xs, delta=1e-3):
    """𝔥₀ … 𝔥_order on the initial slice from the commutator recursion."""
    chart = sys.chart
    t0 = chart.t_range[0]
    xs2 = xs[:, None]
    n_der = max(order, 1)

    def h0_coeffs(t):
        A, C = sys.coeff_at(t, xs2)
        try:
            a0inv = np.linalg.inv(A[:, 0])
        except np.linalg.LinAlgError as exc:
            raise ContractError(
                "compatibility recursion needs an invertible σ(dt) "
                "on the initial slice") from exc
        M = -np.einsum("pij,pjk->pik", a0inv, A[:, 1])
        D = -np.einsum("pij,pjk->pik", a0inv, C)
        return np.stack([M, D])

    H_coeffs = taylor_coefficients(h0_coeffs, t0, n_der - 1, delta)
    # ∂_t^j of the coefficients = j! · (Taylor coefficient j)
    H_ops = [(math.factorial(j) * c[0], math.factorial(j) * c[1])
             for j, c in enumerate(H_coeffs)]

    if f is None:
        f_td = [np.zeros((xs.size, sys.fiber_rank), dtype=complex)] * n_der
    else:
        def sigma_inv_f(t):
            A, _ = sys.coeff_at(t, xs2)
            return np.linalg.solve(A[:, 0], np.asarray(f(t, xs2))[..., None])[..., 0]

        f_coeffs = taylor_coefficients(sigma_inv_f, t0, n_der - 1, delta)
        f_td = [math.factorial(j) * c for j, c in enumerate(f_coeffs)]

    def apply_H(j, v):
        M, D = H_ops[j]
        return (np.einsum("pij,pj->pi", M, _fd_x(v, xs))
                + np.einsum("pij,pj->pi", D, v))

    hs = [np.asarray(h, dtype=complex)]
    for k in range(1, order + 1):
        acc = f_td[k - 1].copy()
        for j in range(k):
            acc += math.comb(k - 1, j) * apply_H(j, hs[k - 1 - j])
        hs.append(acc)
    return hs


def compatibility_check(sys, bc, f, h, order, nx=128, tol=1e-8, delta=1e-3):
    """Corner compatibility residuals of orders 0..order for 1+1D problems.

    ``f`` is a callable (t, xs2) -> (m, N) or None; ``h`` an array (nx, N)
    sampled on the node grid of the initial slice (or a callable of xs).
    """
    chart = sys.chart
    if chart.dim_space != 1:
        raise ContractError("compatibility_check supports one spatial dimension")
    L = chart.space_extent[0]
    xs = np.linspace(0.0, L, nx)
    h_arr = h(xs) if callable(h) else np.asarray(h, dtype=complex)
    if h_arr.shape != (nx, sys.fiber_rank):
        raise ContractError(f"initial data must have shape ({nx}, {sys.fiber_rank})")
    hs = corner_derivatives(sys, f, h_arr, order, xs, delta)

    t0 = chart.t_range[0]
    faces = chart.faces()
    residuals = np.zeros((order + 1, len(faces)))
    for fi, face in enumerate(faces):
        pos = chart.face_position(face)
        node = 0 if face[1] == 0 else nx - 1

        def gb_of_t(t):
            return bc.matrix(chart, geometry.BoundaryPoint(t, face, np.array([pos])))

        gb_coeffs = taylor_coefficients(gb_of_t, t0, order, delta)
        gb_td = [math.factorial(j) * c for j, c in enumerate(gb_coeffs)]
        for k in range(order + 1):
            r = np.zeros(sys.fiber_rank, dtype=complex)
            for j in range(k + 1):
                r += math.comb(k, j) * (gb_td[j] @ hs[k - j][node])
            residuals[k, fi] = float(np.linalg.norm(r))
    return CompatibilityReport(order, residuals, tol)
