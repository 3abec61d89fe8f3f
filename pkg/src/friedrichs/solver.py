"""Time-stepping on the strip: characteristic upwind, implicit positive systems,
energy traces, propagation-speed measurement, Green operators, convergence.

Hyperbolic systems are advanced explicitly after beta-normalization:

    ∂_t Ψ + Ã ∂_x Ψ + C̃ Ψ = f̃,   Ã = σ(dt)⁻¹σ(dx),   P = s*·β·G·σ(dt) ≻ 0

with the first-order local-characteristic upwind update (central difference
plus |Ã| dissipation, |Ã| the P-spectral absolute value at cell faces) and a
ghost-cell boundary closure: outgoing/zero characteristic components of the
ghost match the interior cell, incoming components solve G_B(Ψ_g + Ψ_in)/2 = 0.
Condition (iii) of admissibility is exactly the statement that this closure is
a square solvable system.

Symmetric positive systems with singular σ(dt) (reaction-diffusion,
Klein-Gordon reduction) are stepped implicitly (backward difference, direct
sparse solve per step) on a node grid, with boundary rows replaced by the
row-reduced G_B in the constrained directions.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from . import geometry
from .errors import BoundaryClosureError, ConfigError, ContractError, NotHyperbolicError
from .linalg import RANK_TOL, eigh_pencil, pairwise_sum
from .boundary import admissibility

#: relative threshold below which a characteristic counts as tangent
ZERO_MODE_TOL = 1e-10


@dataclass
class Grid:
    nx: int               # number of cells
    dx: float
    dt: float
    nt: int
    cfl: float
    xs: np.ndarray        # sample positions (cell centers or nodes)
    ts: np.ndarray        # time levels, length nt + 1
    staggered: bool       # True: cell centers (explicit), False: nodes (implicit)

    @property
    def t0(self):
        return float(self.ts[0])

    @property
    def t1(self):
        return float(self.ts[-1])


def make_grid(sys, nx, cfl=0.5, t_final=None, nt=None):
    """Uniform grid with Δt = CFL·Δx / max characteristic speed.

    For systems with singular σ(dt) (implicit stepping, no CFL constraint)
    the nominal speed 1 is used and the grid is node-based.
    """
    if cfl > 0.9:
        raise ConfigError(f"CFL must be ≤ 0.9, got {cfl}")
    chart = sys.chart
    L = chart.space_extent[0]
    if chart.dim_space != 1:
        raise ContractError("the solver supports one spatial dimension")
    dx = L / nx
    try:
        speed = geometry.max_characteristic_speed(chart, sys, per_axis=8)
        staggered = True
    except NotHyperbolicError:
        speed = 1.0
        staggered = False
    t0 = chart.t_range[0]
    t1 = chart.t_range[1] if t_final is None else t_final
    T = t1 - t0
    if nt is None:
        nt = max(1, math.ceil(T * speed / (cfl * dx)))
    dt = T / nt
    if staggered:
        xs = (np.arange(nx) + 0.5) * dx
    else:
        xs = np.linspace(0.0, L, nx + 1)
    ts = t0 + dt * np.arange(nt + 1)
    return Grid(nx, dx, dt, nt, cfl, xs, ts, staggered)


@dataclass
class GridField:
    """Sampled space-time section: values of shape (nt+1, n_x, N)."""

    values: np.ndarray
    grid: Grid
    system_name: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)

    def check_finite(self):
        if not np.all(np.isfinite(self.values)):
            raise BoundaryClosureError("solution contains NaN/Inf samples")
        return self

    def level(self, m):
        return self.values[m]

    def pointwise_norm(self):
        return np.linalg.norm(self.values, axis=2)


def write_field(path, fld):
    """Flat binary dump with a one-line text header (dims + dtype)."""
    vals = np.ascontiguousarray(fld.values.astype("<c16"))
    nt1, nx, N = vals.shape
    header = f"field nt1={nt1} nx={nx} N={N} dtype=complex128 byteorder=little\n"
    with open(path, "wb") as fh:
        fh.write(header.encode())
        fh.write(vals.tobytes())


def read_field(path):
    with open(path, "rb") as fh:
        header = fh.readline().decode()
        fields = dict(tok.split("=") for tok in header.split()[1:])
        shape = (int(fields["nt1"]), int(fields["nx"]), int(fields["N"]))
        vals = np.frombuffer(fh.read(), dtype="<c16").reshape(shape)
    return vals


def _as_bc_map(sys, bcs):
    faces = sys.chart.faces()
    if isinstance(bcs, dict):
        missing = [f for f in faces if f not in bcs]
        if missing:
            raise ConfigError(f"missing boundary condition for faces {missing}")
        return bcs
    return {f: bcs for f in faces}


def _eval_forcing(f, t, xs, N):
    if f is None:
        return None
    out = np.asarray(f(t, xs[:, None]), dtype=complex)
    if out.shape != (xs.size, N):
        raise ConfigError(f"forcing must return shape ({xs.size}, {N})")
    return out


def _eval_initial(h, xs, N):
    if h is None:
        return np.zeros((xs.size, N), dtype=complex)
    arr = h(xs) if callable(h) else np.asarray(h, dtype=complex)
    arr = np.asarray(arr, dtype=complex)
    if arr.shape != (xs.size, N):
        raise ConfigError(f"initial data must have shape ({xs.size}, {N})")
    return arr


# -- explicit characteristic upwind -----------------------------------------


class _ExplicitTables:
    """Frozen-time coefficient tables for one upwind step."""

    def __init__(self, sys, bc_map, grid, t, force=False):
        xs2 = grid.xs[:, None]
        A, C = sys.coeff_at(t, xs2)
        self.a0inv = np.linalg.inv(A[:, 0])
        self.Atil = self.a0inv @ A[:, 1]
        self.Ctil = self.a0inv @ C
        faces = (np.arange(grid.nx + 1) * grid.dx)[:, None]
        Af, _ = sys.coeff_at(t, faces)
        Atil_f = np.linalg.inv(Af[:, 0]) @ Af[:, 1]
        Pf = sys.positive_metric_at(t, faces)
        self.Aabs = np.empty_like(Atil_f)
        for i in range(Atil_f.shape[0]):
            lam, V = eigh_pencil(Pf[i] @ Atil_f[i], Pf[i])
            self.Aabs[i] = (V * np.abs(lam)) @ V.conj().T @ Pf[i]
        self.closures = [
            _boundary_closure(sys, bc_map[face], t, face, force=force)
            for face in sys.chart.faces()
        ]


def _boundary_closure(sys, bc, t, face, force=False):
    """Matrix T with ghost = T @ Ψ_edge implementing the characteristic closure."""
    chart = sys.chart
    pos = chart.face_position(face)
    q = geometry.BoundaryPoint(t, face, np.array([pos]))
    nb = geometry.outward_normal(chart, q)
    A, _ = sys.coeff_at(t, np.array([[pos]]))
    M = np.linalg.inv(A[0, 0]) @ sys.symbol(t, q.x, nb)
    P = sys.positive_metric_at(t, np.array([[pos]]))[0]
    lam, V = eigh_pencil(P @ M, P)
    scale = max(1.0, float(np.max(np.abs(lam))))
    nonneg = lam >= -ZERO_MODE_TOL * scale
    W_oz = V[:, nonneg].conj().T @ P
    GB = bc.matrix(chart, q)
    U, s, _ = np.linalg.svd(GB)
    r = int(np.sum(s > RANK_TOL * s[0])) if s.size and s[0] > 0 else 0
    R = U[:, :r].conj().T @ GB
    K = np.vstack([W_oz, R])
    rhs_map = np.vstack([W_oz, -R])
    n_in = int(np.sum(~nonneg))
    if K.shape[0] != K.shape[1] or r != n_in:
        msg = (f"boundary closure at face {face}: {n_in} incoming characteristics "
               f"vs rank-{r} condition (admissibility (iii) defect)")
        if not force:
            raise BoundaryClosureError(msg)
        return np.linalg.pinv(K) @ rhs_map
    try:
        return np.linalg.solve(K, rhs_map)
    except np.linalg.LinAlgError as exc:
        if force:
            return np.linalg.pinv(K) @ rhs_map
        raise BoundaryClosureError(f"singular closure at face {face}") from exc


def _solve_explicit(sys, bc_map, f, h0, grid, force):
    nx, N = grid.nx, sys.fiber_rank
    out = np.empty((grid.nt + 1, nx, N), dtype=complex)
    out[0] = h0
    static = sys.time_independent and sys.chart.time_independent
    tables = _ExplicitTables(sys, bc_map, grid, grid.t0, force) if static else None
    dt, dx = grid.dt, grid.dx
    psi = out[0].copy()
    pad = np.empty((nx + 2, N), dtype=complex)
    for m in range(grid.nt):
        t = grid.ts[m]
        tb = tables if static else _ExplicitTables(sys, bc_map, grid, t, force)
        T_left, T_right = tb.closures[0], tb.closures[1]
        pad[0] = T_left @ psi[0]
        pad[-1] = T_right @ psi[-1]
        pad[1:-1] = psi
        jump = pad[1:] - pad[:-1]                       # (nx+1, N)
        diss = np.einsum("fij,fj->fi", tb.Aabs, jump)   # |Ã|·jump at faces
        central = (pad[2:] - pad[:-2]) / (2 * dx)
        rhs = -np.einsum("pij,pj->pi", tb.Atil, central)
        rhs += (diss[1:] - diss[:-1]) / (2 * dx)
        rhs -= np.einsum("pij,pj->pi", tb.Ctil, psi)
        src = _eval_forcing(f, t, grid.xs, N)
        if src is not None:
            rhs += np.einsum("pij,pj->pi", tb.a0inv, src)
        psi = psi + dt * rhs
        out[m + 1] = psi
    return out


# -- implicit positive systems -----------------------------------------------


def _implicit_matrix(sys, bc_map, grid, t):
    """Backward-Euler operator with boundary rows replaced in constrained
    directions by the row-reduced G_B."""
    chart = sys.chart
    xs = grid.xs
    npts, N = xs.size, sys.fiber_rank
    A, C = sys.coeff_at(t, xs[:, None])
    dt, dx = grid.dt, grid.dx
    rows, cols, vals = [], [], []

    def add_block(i, j, B):
        ii, jj = np.nonzero(np.abs(B) > 0)
        rows.extend((i * N + ii).tolist())
        cols.extend((j * N + jj).tolist())
        vals.extend(B[ii, jj].tolist())

    boundary_rows = {}
    for fi, face in enumerate(chart.faces()):
        node = 0 if face[1] == 0 else npts - 1
        pos = chart.face_position(face)
        q = geometry.BoundaryPoint(t, face, np.array([pos]))
        GB = bc_map[face].matrix(chart, q)
        U, s, Vh = np.linalg.svd(GB)
        r = int(np.sum(s > RANK_TOL * s[0])) if s.size and s[0] > 0 else 0
        R = U[:, :r].conj().T @ GB
        V1 = Vh.conj().T[:, :r]   # constrained directions
        V2 = Vh.conj().T[:, r:]   # unconstrained directions
        boundary_rows[node] = (R, V1, V2)

    for i in range(npts):
        blocks = {}
        M0 = A[i, 0] / dt + C[i]
        if i == 0:
            blocks[0] = M0 - A[i, 1] / dx
            blocks[1] = A[i, 1] / dx
        elif i == npts - 1:
            blocks[i] = M0 + A[i, 1] / dx
            blocks[i - 1] = -A[i, 1] / dx
        else:
            blocks[i] = M0
            blocks[i + 1] = A[i, 1] / (2 * dx)
            blocks[i - 1] = -A[i, 1] / (2 * dx)
        if i in boundary_rows:
            # drop the PDE equations along the constrained directions and
            # install the constraint rows there instead
            R, V1, V2 = boundary_rows[i]
            proj = V2 @ V2.conj().T
            blocks = {j: proj @ B for j, B in blocks.items()}
            blocks[i] = blocks.get(i, 0) + V1 @ R
        for j, B in blocks.items():
            add_block(i, j, B)
    mat = scipy.sparse.csr_matrix(
        (vals, (rows, cols)), shape=(npts * N, npts * N))
    return mat, boundary_rows


def _solve_implicit(sys, bc_map, f, h0, grid, force):
    xs = grid.xs
    npts, N = xs.size, sys.fiber_rank
    A, _ = sys.coeff_at(grid.t0, xs[:, None])
    out = np.empty((grid.nt + 1, npts, N), dtype=complex)
    out[0] = h0
    static = sys.time_independent and sys.chart.time_independent
    mat, brows = _implicit_matrix(sys, bc_map, grid, grid.t0 + grid.dt)
    lu = scipy.sparse.linalg.splu(mat.tocsc())
    psi = out[0].copy()
    for m in range(grid.nt):
        t1 = grid.ts[m + 1]
        if not static:
            mat, brows = _implicit_matrix(sys, bc_map, grid, t1)
            lu = scipy.sparse.linalg.splu(mat.tocsc())
            A, _ = sys.coeff_at(t1, xs[:, None])
        rhs = np.einsum("pij,pj->pi", A[:, 0], psi) / grid.dt
        src = _eval_forcing(f, t1, xs, N)
        if src is not None:
            rhs += src
        for node, (R, V1, V2) in brows.items():
            rhs[node] = V2 @ (V2.conj().T @ rhs[node])
        psi = lu.solve(rhs.ravel()).reshape(npts, N)
        out[m + 1] = psi
    return out


def solve(sys, bcs, f=None, h=None, grid=None, check_admissible=True, force=False):
    """Advance S Ψ = f, Ψ(t₀) = h, Ψ|∂ ∈ ker G_B over the grid.

    Hyperbolic systems use the explicit characteristic upwind scheme;
    symmetric positive systems with singular σ(dt) are stepped implicitly.
    Unless ``force`` is given, the boundary conditions must pass the
    admissibility check (counterexample studies pass force=True).
    """
    if grid is None:
        raise ConfigError("solve requires a grid (make_grid)")
    bc_map = _as_bc_map(sys, bcs)
    if check_admissible and not force:
        for face, bc in bc_map.items():
            rep = admissibility(sys, bc, n_time=3, n_tang=2, faces=[face])
            if not rep.admissible:
                raise ContractError(
                    f"boundary condition '{bc.name}' on face {face} is not "
                    f"admissible; pass force=True for counterexample studies\n"
                    + rep.summary())
    h0 = _eval_initial(h, grid.xs, sys.fiber_rank)
    if grid.staggered:
        if sys.time_sign == 0:
            raise NotHyperbolicError("explicit path needs a definite σ(dt)-form")
        vals = _solve_explicit(sys, bc_map, f, h0, grid, force)
    else:
        vals = _solve_implicit(sys, bc_map, f, h0, grid, force)
    return GridField(vals, grid, sys.name).check_finite()


# -- diagnostics -------------------------------------------------------------


@dataclass
class EnergyTrace:
    ts: np.ndarray
    energy: np.ndarray
    flux: np.ndarray

    @property
    def final_ratio(self):
        return float(self.energy[-1] / self.energy[0]) if self.energy[0] != 0 else np.inf

    @property
    def max_step_growth(self):
        e = self.energy
        prev = e[:-1]
        ok = prev > 0
        return float(np.max(e[1:][ok] / prev[ok])) if np.any(ok) else 1.0


def energy_trace(fld, sys):
    """E(t) = Σ_x ⟨Ψ, Ψ⟩_P √det(h) Δx, the discrete ∫_Σ |Ψ|²_β dμ_t.

    The flux column logs the boundary form s*·β·⟨σ(n♭)Ψ, Ψ⟩ summed over
    faces, evaluated at the edge sample; for conditions with vanishing
    boundary form it is an O(Δx) discretization artifact around zero.
    """
    grid = fld.grid
    chart = sys.chart
    xs2 = grid.xs[:, None]
    sdens = geometry.spatial_density(chart, grid.t0, xs2)
    weights = np.full(grid.xs.size, grid.dx)
    if not grid.staggered:
        weights[0] = weights[-1] = grid.dx / 2
    static = sys.time_independent and sys.chart.time_independent
    P = sys.positive_metric_at(grid.t0, xs2)
    if P is None:
        P = sys.metric_at(grid.t0, xs2)
    s = sys.time_sign if sys.time_sign != 0 else 1
    energy = np.empty(grid.nt + 1)
    flux = np.empty(grid.nt + 1)
    for m, t in enumerate(grid.ts):
        if not static:
            P = sys.positive_metric_at(t, xs2)
            sdens = geometry.spatial_density(chart, t, xs2)
        psi = fld.values[m]
        dens = np.real(np.einsum("pi,pij,pj->p", psi.conj(), P, psi))
        energy[m] = pairwise_sum(dens * sdens * weights)
        phi = 0.0
        for face in chart.faces():
            pos = chart.face_position(face)
            q = geometry.BoundaryPoint(t, face, np.array([pos]))
            nb = geometry.outward_normal(chart, q)
            sn = sys.symbol(t, q.x, nb)
            G = sys.metric_at(t, q.x[None, :])[0]
            beta = chart.beta_at(t, q.x[None, :])[0]
            trace = psi[0] if face[1] == 0 else psi[-1]
            phi += s * beta * float(np.real(trace.conj() @ G @ sn @ trace))
        flux[m] = phi
    return EnergyTrace(grid.ts.copy(), energy, flux)


def estimate_energy_constant(sys, n_samples=16):
    """Growth constant from the symmetrized zero-order term: E' ≤ C·E."""
    from .system import zero_order_symmetrization

    chart = sys.chart
    worst = 0.0
    _, xs = chart.sample_interior(n_samples)
    for t in chart.sample_times(5):
        Z_h, G = zero_order_symmetrization(sys, t, xs)
        P = sys.positive_metric_at(t, xs)
        if P is None:
            P = G
        for i in range(0, xs.shape[0], max(1, xs.shape[0] // 8)):
            W = P[i] @ (np.linalg.inv(sys.metric_at(t, xs)[i]) @ (G[i] @ Z_h[i]))
            ev, _ = eigh_pencil(0.5 * (W + W.conj().T), P[i])
            worst = max(worst, float(np.max(-ev)))
    return worst


def support_radius(fld, level, threshold=1e-8):
    """Intervals covering {x : |Ψ(t_level, x)| > threshold · max|Ψ|}."""
    norms = fld.pointwise_norm()
    ref = float(norms.max())
    if ref == 0.0:
        return []
    mask = norms[level] > threshold * ref
    if not mask.any():
        return []
    xs = fld.grid.xs
    intervals = []
    idx = np.flatnonzero(mask)
    start = idx[0]
    prev = idx[0]
    for i in idx[1:]:
        if i != prev + 1:
            intervals.append((float(xs[start]), float(xs[prev])))
            start = i
        prev = i
    intervals.append((float(xs[start]), float(xs[prev])))
    return intervals


def support_growth_margins(fld, c_max, threshold=1e-8):
    """Per-step slack of |support growth| ≤ c_max·Δt + 2Δx (per side).

    Nonnegative margins mean finite propagation speed holds at every step.
    """
    grid = fld.grid
    allowed = c_max * grid.dt + 2 * grid.dx
    margins = []
    prev = None
    for m in range(grid.nt + 1):
        iv = support_radius(fld, m, threshold)
        hull = (iv[0][0], iv[-1][1]) if iv else None
        if prev is not None and hull is not None:
            growth_right = hull[1] - prev[1]
            growth_left = prev[0] - hull[0]
            margins.append(allowed - max(0.0, growth_right))
            margins.append(allowed - max(0.0, growth_left))
        if hull is not None:
            prev = hull
    return np.asarray(margins)


def apply_operator(sys, fld):
    """Discrete S Ψ: centered differences inside, one-sided at edges."""
    grid = fld.grid
    vals = fld.values
    xs2 = grid.xs[:, None]
    dpsi_dt = np.gradient(vals, grid.dt, axis=0)
    dpsi_dx = np.gradient(vals, grid.dx, axis=1)
    out = np.empty_like(vals)
    static = sys.time_independent and sys.chart.time_independent
    A, C = sys.coeff_at(grid.t0, xs2)
    for m, t in enumerate(grid.ts):
        if not static:
            A, C = sys.coeff_at(t, xs2)
        out[m] = (np.einsum("pij,pj->pi", A[:, 0], dpsi_dt[m])
                  + np.einsum("pij,pj->pi", A[:, 1], dpsi_dx[m])
                  + np.einsum("pij,pj->pi", C, vals[m]))
    return GridField(out, grid, sys.name + "_residual")


def l2_norm(fld_values, grid):
    w = np.full(grid.xs.size, grid.dx)
    if not grid.staggered:
        w[0] = w[-1] = grid.dx / 2
    dens = np.sum(np.abs(fld_values) ** 2, axis=-1)
    if dens.ndim == 2:
        return float(np.sqrt(np.sum(dens @ w) * grid.dt))
    return float(np.sqrt(dens @ w))


# -- Green operators ---------------------------------------------------------


def forcing_support_levels(f, grid, N, threshold=1e-14):
    """Time levels where the forcing is active (threshold=0: strictly nonzero)."""
    norms = np.array([
        0.0 if (arr := _eval_forcing(f, t, grid.xs, N)) is None
        else float(np.linalg.norm(arr)) for t in grid.ts])
    nz = np.flatnonzero(norms > threshold * max(norms.max(), 1e-300))
    return nz


def green_plus(sys, bcs, f, grid, force=False):
    """Advanced Green operator: solve forward with zero data before supp f."""
    levels = forcing_support_levels(f, grid, sys.fiber_rank)
    if levels.size and levels[0] == 0:
        raise ContractError("supp f touches the initial slice; shrink the support")
    return solve(sys, bcs, f=f, h=None, grid=grid, force=force)


def time_reversed(sys):
    """The pullback system under t → t₀ + t₁ − t (σ(dt) negated)."""
    chart = sys.chart
    t0, t1 = chart.t_range

    def flip(t):
        return t0 + t1 - t

    rev_chart = geometry.SpacetimeChart(
        chart.dim_space, chart.t_range, chart.space_extent,
        beta=lambda t, xs: chart.beta(flip(t), xs),
        h=lambda t, xs: chart.h(flip(t), xs),
        name=chart.name + "_reversed", params=dict(chart.params),
        time_independent=chart.time_independent, constant=chart.constant)

    def coeff(t, xs):
        A, C = sys.coeff_at(flip(t), xs)
        A = A.copy()
        A[:, 0] = -A[:, 0]
        return A, C

    from .system import FriedrichsSystem

    return FriedrichsSystem(
        rev_chart, sys.fiber_rank, coeff,
        lambda t, xs: sys.metric_at(flip(t), xs),
        metric_positive=sys.metric_positive, name=sys.name + "_reversed",
        layout=sys.layout, time_independent=sys.time_independent,
        constant=sys.constant)


def green_minus(sys, bcs, f, grid, force=False):
    """Retarded Green operator via a time-reversed forward solve.

    ``bcs`` are imposed on the reversed evolution: conditions with vanishing
    boundary form (MIT, chirality, Neumann-like, Dirichlet) transfer verbatim;
    for transport-like systems pass the conditions of the reversed problem.
    The admissibility refusal policy applies to the original system, so the
    internal reversed solve only validates closure solvability.
    """
    if not grid.staggered:
        raise ContractError("the retarded Green operator needs a hyperbolic "
                            "system; reversing a parabolic solve is ill-posed")
    levels = forcing_support_levels(f, grid, sys.fiber_rank)
    if levels.size and levels[-1] == grid.nt:
        raise ContractError("supp f touches the final slice; shrink the support")
    rev = time_reversed(sys)
    t0, t1 = sys.chart.t_range

    def f_rev(t, xs2):
        return f(t0 + t1 - t, xs2)

    rev_grid = Grid(grid.nx, grid.dx, grid.dt, grid.nt, grid.cfl,
                    grid.xs.copy(), grid.ts.copy(), grid.staggered)
    fld = solve(rev, _as_bc_map(rev, bcs), f=f_rev, h=None, grid=rev_grid,
                check_admissible=False, force=force)
    return GridField(fld.values[::-1].copy(), grid, sys.name + "_green_minus")


def green_residual(sys, fld, f):
    """‖S(G f) − f‖₂ / ‖f‖₂ over the full grid."""
    grid = fld.grid
    res = apply_operator(sys, fld).values.copy()
    f_vals = np.stack([
        _eval_forcing(f, t, grid.xs, sys.fiber_rank) for t in grid.ts])
    res -= f_vals
    return l2_norm(res, grid) / max(l2_norm(f_vals, grid), 1e-300)


def causal_support_ok(fld, f, c_max, cells=2, threshold=1e-8, future=True):
    """supp(G±f) ⊂ J±(supp f) within a ``cells``-cell tolerance."""
    grid = fld.grid
    N = fld.values.shape[2]
    f_vals = np.stack([_eval_forcing(f, t, grid.xs, N) for t in grid.ts])
    fnorm = np.linalg.norm(f_vals, axis=2)
    fref = fnorm.max()
    levels = range(grid.nt + 1) if future else range(grid.nt, -1, -1)
    lo, hi = np.inf, -np.inf
    have_src = False
    slack = cells * grid.dx
    worst = np.inf
    for m in levels:
        t_idx = np.flatnonzero(fnorm[m] > 1e-10 * fref)
        if t_idx.size:
            have_src = True
            lo = min(lo, grid.xs[t_idx[0]])
            hi = max(hi, grid.xs[t_idx[-1]])
        iv = support_radius(fld, m, threshold)
        if iv:
            if not have_src:
                return False, -np.inf
            worst = min(worst, iv[0][0] - (lo - slack), (hi + slack) - iv[-1][1])
            if iv[0][0] < lo - slack - 1e-12 or iv[-1][1] > hi + slack + 1e-12:
                return False, float(worst)
        lo -= c_max * grid.dt
        hi += c_max * grid.dt
    return True, float(worst if np.isfinite(worst) else 0.0)


# -- studies -----------------------------------------------------------------


@dataclass
class ConvergenceReport:
    nxs: list
    errors: np.ndarray
    orders: np.ndarray

    def summary(self):
        rows = [f"  nx={nx:5d}  error={e:.4e}" +
                (f"  order={o:.2f}" if o == o else "")
                for nx, e, o in zip(self.nxs, self.errors,
                                    np.concatenate([[np.nan], self.orders]))]
        return "\n".join(rows)


def convergence_study(factory, nxs, exact):
    """L² errors at the final time against a closed-form solution.

    ``factory(nx)`` returns (sys, bcs, f, h, grid); ``exact(t, xs)`` the
    reference section.  Observed order = log₂(e_i / e_{i+1}).
    """
    errors = []
    for nx in nxs:
        sys_, bcs, f, h, grid = factory(nx)
        fld = solve(sys_, bcs, f=f, h=h, grid=grid)
        ref = np.asarray(exact(grid.t1, grid.xs), dtype=complex)
        errors.append(l2_norm(fld.values[-1] - ref, grid))
    errors = np.asarray(errors)
    orders = np.log2(errors[:-1] / errors[1:])
    return ConvergenceReport(list(nxs), errors, orders)


def restrict_fine(fine_vals, fine_grid, coarse_grid):
    """Project a refined-by-2 field onto the coarse grid (matching levels)."""
    stride = (fine_grid.nt) // coarse_grid.nt
    lev = fine_vals[::stride]
    if coarse_grid.staggered:
        return 0.5 * (lev[:, 0::2] + lev[:, 1::2])
    return lev[:, ::2]


@dataclass
class LambdaEquivalenceReport:
    lam: float
    discrepancy: float
    error_estimate: float

    @property
    def ratio(self):
        if self.discrepancy == 0.0:
            return 0.0
        return self.discrepancy / max(self.error_estimate, 1e-300)


def lambda_equivalence_check(sys, lam, bcs, f, h, nx, cfl=0.5):
    """Check e^{−λt}·(solution of S) against the solution of K_λ.

    Both problems run on the same grid; the discrepancy is compared with a
    Richardson estimate of the single-solve discretization error.
    """
    from .system import lambda_shift

    grid = make_grid(sys, nx, cfl)
    fld = solve(sys, bcs, f=f, h=h, grid=grid)
    fine = make_grid(sys, 2 * nx, cfl, nt=2 * grid.nt)
    fld_fine = solve(sys, bcs, f=f, h=h, grid=fine)
    est_vals = restrict_fine(fld_fine.values, fine, grid) - fld.values
    estimate = l2_norm(est_vals[-1], grid)

    shifted = lambda_shift(sys, lam)

    def f_scaled(t, xs2):
        return math.exp(-lam * t) * f(t, xs2) if f is not None else None

    fld_shift = solve(shifted, bcs, f=f_scaled if f is not None else None,
                      h=h, grid=grid)
    scale = np.exp(-lam * grid.ts)[:, None, None]
    disc = l2_norm((scale * fld.values - fld_shift.values)[-1], grid)
    return LambdaEquivalenceReport(lam, disc, estimate)
