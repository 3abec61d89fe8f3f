"""Spacetime strips [t_a, t_b] × [0, L]^n with splitting metric g = −β²dt² + h_t.

Charts are product strips only: all geometry enters through the lapse β(t, x)
and the spatial metric h_t(t, x).  Coefficient evaluators are vectorised over
batches of spatial points: ``beta(t, xs)`` takes ``xs`` of shape (m, n) and
returns shape (m,); ``h(t, xs)`` returns shape (m, n, n).
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, ContractError, NotHyperbolicError

#: faces of the 1D strip, for readability in configs and tests
LEFT = (0, 0)
RIGHT = (0, 1)


@dataclass
class SpacetimeChart:
    """Product strip with metric −β²dt² + h_t.

    ``space_extent`` holds one length per spatial axis; the spatial domain is
    the box  ∏_a [0, L_a].  ``beta`` and ``h`` must be positive resp. symmetric
    positive definite at every sampled point.
    """

    dim_space: int
    t_range: tuple
    space_extent: tuple
    beta: Callable
    h: Callable
    name: str = "custom"
    params: dict = field(default_factory=dict)
    time_independent: bool = True
    constant: bool = False

    def __post_init__(self):
        if self.dim_space < 1:
            raise ConfigError(f"dim_space must be >= 1, got {self.dim_space}")
        if not self.t_range[0] < self.t_range[1]:
            raise ConfigError(f"empty time range {self.t_range}")
        self.space_extent = tuple(float(L) for L in np.atleast_1d(self.space_extent))
        if len(self.space_extent) != self.dim_space:
            raise ConfigError("space_extent must give one length per axis")
        if any(L <= 0 for L in self.space_extent):
            raise ConfigError("space_extent lengths must be positive")

    # -- evaluation helpers ------------------------------------------------

    def beta_at(self, t, xs):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        return np.broadcast_to(np.asarray(self.beta(t, xs), dtype=float), (xs.shape[0],)).copy()

    def h_at(self, t, xs):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        n = self.dim_space
        return np.broadcast_to(np.asarray(self.h(t, xs), dtype=float), (xs.shape[0], n, n)).copy()

    def h_inv_at(self, t, xs):
        return np.linalg.inv(self.h_at(t, xs))

    def faces(self):
        return [(a, s) for a in range(self.dim_space) for s in (0, 1)]

    def face_position(self, face):
        axis, side = face
        return 0.0 if side == 0 else self.space_extent[axis]

    def sample_times(self, count):
        return np.linspace(self.t_range[0], self.t_range[1], count)

    def sample_interior(self, per_axis=64):
        """Uniform tensor grid of (t, x) samples, cell-centered in space."""
        ts = self.sample_times(per_axis)
        axes = [(np.arange(per_axis) + 0.5) * L / per_axis for L in self.space_extent]
        mesh = np.meshgrid(*axes, indexing="ij")
        xs = np.stack([m.ravel() for m in mesh], axis=-1)
        return ts, xs


@dataclass
class BoundaryPoint:
    """A point on one timelike boundary face of the strip."""

    t: float
    face: tuple
    x: np.ndarray  # full spatial coordinates, shape (n,)

    def __post_init__(self):
        self.x = np.atleast_1d(np.asarray(self.x, dtype=float))


def boundary_points(chart, face, n_time=8, n_tang=4):
    """Uniform samples of one boundary face."""
    axis, _ = face
    pos = chart.face_position(face)
    pts = []
    for t in chart.sample_times(n_time):
        if chart.dim_space == 1:
            pts.append(BoundaryPoint(t, face, np.array([pos])))
        else:
            tang_axes = [a for a in range(chart.dim_space) if a != axis]
            grids = [(np.arange(n_tang) + 0.5) * chart.space_extent[a] / n_tang for a in tang_axes]
            for combo in np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1).reshape(-1, len(tang_axes)):
                x = np.zeros(chart.dim_space)
                x[axis] = pos
                x[tang_axes] = combo
                pts.append(BoundaryPoint(t, face, x))
    return pts


def all_boundary_points(chart, n_time=8, n_tang=4):
    pts = []
    for face in chart.faces():
        pts.extend(boundary_points(chart, face, n_time, n_tang))
    return pts


def outward_normal(chart, q):
    """Unit outward conormal n♭ at a boundary point, as an (n+1)-covector.

    The dt-component is zero (the temporal gradient is tangent to the
    boundary); the spatial part is the conormal dx^a of the face, normalised
    to g⁻¹(n♭, n♭) = 1 and signed to point out of the strip.
    """
    axis, side = q.face
    pos = chart.face_position(q.face)
    if abs(q.x[axis] - pos) > 1e-9 * max(1.0, chart.space_extent[axis]):
        raise ContractError(f"point {q.x} at t={q.t} does not lie on face {q.face}")
    hinv = chart.h_inv_at(q.t, q.x[None, :])[0]
    scale = 1.0 / np.sqrt(hinv[axis, axis])
    sign = -1.0 if side == 0 else 1.0
    nb = np.zeros(chart.dim_space + 1)
    nb[1 + axis] = sign * scale
    return nb


def normal_vector(chart, q):
    """Outward unit normal vector n = (n♭)♯; spatial components only, shape (n,)."""
    nb = outward_normal(chart, q)
    hinv = chart.h_inv_at(q.t, q.x[None, :])[0]
    return hinv @ nb[1:]


def volume_density(chart, t, xs):
    """Spacetime volume density β·√det(h) at sampled points."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    beta = chart.beta_at(t, xs)
    dens = beta * np.sqrt(np.linalg.det(chart.h_at(t, xs)))
    if np.any(dens <= 0):
        raise ConfigError("volume density must be positive; check beta/h")
    return dens


def spatial_density(chart, t, xs):
    """Slice volume density √det(h_t)."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    return np.sqrt(np.linalg.det(chart.h_at(t, xs)))


def max_characteristic_speed(chart, system, per_axis=16):
    """sup over samples of |generalized eigenvalues of σ(dxʲ) relative to σ(dt)|.

    Raises NotHyperbolicError when the σ(dt)-form is singular or indefinite at
    a sample (definiteness of either sign is accepted; the sign is the
    system's time orientation).
    """
    ts, xs = chart.sample_interior(per_axis)
    speed = 0.0
    for t in ts[:: max(1, len(ts) // 8)]:
        A, _ = system.coeff_at(t, xs)
        G = system.metric_at(t, xs)
        for i in range(xs.shape[0]):
            W = G[i] @ A[i, 0]
            W = 0.5 * (W + W.conj().T)
            ev = np.linalg.eigvalsh(W)
            if np.min(np.abs(ev)) <= 1e-12 * max(1.0, np.max(np.abs(ev))) or ev[0] * ev[-1] < 0:
                raise NotHyperbolicError(
                    f"σ(dt)-form singular or indefinite at t={t}, x={xs[i]}"
                )
            a0inv = np.linalg.inv(A[i, 0])
            for j in range(chart.dim_space):
                lam = np.linalg.eigvals(a0inv @ A[i, 1 + j])
                speed = max(speed, float(np.max(np.abs(lam.real))))
    return speed


# -- chart builders --------------------------------------------------------


def minkowski_strip(t_range=(0.0, 1.0), lengths=(1.0,)):
    """Flat strip: β = 1, h = δ."""
    lengths = tuple(np.atleast_1d(lengths))
    n = len(lengths)
    eye = np.eye(n)

    def beta(t, xs):
        return np.ones(xs.shape[0])

    def h(t, xs):
        return np.broadcast_to(eye, (xs.shape[0], n, n))

    return SpacetimeChart(n, tuple(t_range), lengths, beta, h,
                          name="minkowski_strip", constant=True)


def ultrastatic(t_range=(0.0, 1.0), lengths=(1.0,), eps=0.2, waves=1):
    """β = 1 with a static curved spatial metric h = a(x)² δ, a = 1 + eps·sin."""
    lengths = tuple(np.atleast_1d(lengths))
    n = len(lengths)
    if not -0.9 < eps < 0.9:
        raise ConfigError("ultrastatic eps must keep h positive definite")

    def a(xs):
        phase = sum(2 * np.pi * waves * xs[:, j] / lengths[j] for j in range(n))
        return 1.0 + eps * np.sin(phase)

    def beta(t, xs):
        return np.ones(xs.shape[0])

    def h(t, xs):
        out = np.zeros((xs.shape[0], n, n))
        idx = np.arange(n)
        out[:, idx, idx] = a(xs)[:, None] ** 2
        return out

    return SpacetimeChart(n, tuple(t_range), lengths, beta, h,
                          name="ultrastatic", params={"eps": eps, "waves": waves})


def custom_chart(t_range, lengths, beta, h, time_independent=False):
    return SpacetimeChart(len(tuple(np.atleast_1d(lengths))), tuple(t_range),
                          tuple(np.atleast_1d(lengths)), beta, h,
                          name="custom", time_independent=time_independent)


#: named closed-form scalar profiles a(t, x) for config-declared charts
def _scalar_profile(spec, lengths):
    spec = dict(spec or {"profile": "constant"})
    kind = spec.get("profile", "constant")
    if kind == "constant":
        value = float(spec.get("value", 1.0))
        return (lambda t, xs: np.full(xs.shape[0], value)), True
    if kind == "sine":
        base = float(spec.get("base", 1.0))
        amp = float(spec.get("amplitude", 0.2))
        waves = float(spec.get("waves", 1.0))
        waves_t = float(spec.get("waves_t", 0.0))

        def fn(t, xs):
            phase = sum(2 * np.pi * waves * xs[:, j] / lengths[j]
                        for j in range(len(lengths)))
            return base + amp * np.sin(phase + 2 * np.pi * waves_t * t)

        return fn, waves_t == 0.0
    raise ConfigError(f"unknown chart profile '{kind}'")


def named_profile_chart(t_range=(0.0, 1.0), lengths=(1.0,), beta=None, h_scale=None):
    """Chart from named profiles: β and a conformal factor a with h = a²δ."""
    lengths = tuple(float(L) for L in np.atleast_1d(lengths))
    n = len(lengths)
    beta_fn, beta_static = _scalar_profile(beta, lengths)
    a_fn, a_static = _scalar_profile(h_scale, lengths)

    def h(t, xs):
        out = np.zeros((xs.shape[0], n, n))
        idx = np.arange(n)
        out[:, idx, idx] = a_fn(t, xs)[:, None] ** 2
        return out

    return SpacetimeChart(n, tuple(t_range), lengths, beta_fn, h, name="custom",
                          params={"beta": beta, "h_scale": h_scale},
                          time_independent=beta_static and a_static)


CHART_BUILDERS = {
    "minkowski_strip": minkowski_strip,
    "ultrastatic": ultrastatic,
    "custom": named_profile_chart,
}
