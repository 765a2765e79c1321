"""2D plane-stress FE kernel with power-law material interpolation.

Bilinear quads on uniform square grids (element width h = 1, unit thickness,
Poisson ratio 0.3 by default). Designs live on elements; physical densities
are a cone-filtered version of the design (radius 1.5 h, row-normalized), and
element stiffness scales as rho^3 * E0. The half rectangular beam and the 2D
L-bracket are provided as built-in problems whose limit state is the
compliance margin g = C_max - C.

Compliance for a given design factors exactly over the two random inputs
(load multiplier P and bulk modulus E0): C(theta; P, E0) = P^2 / E0 * C1(theta)
with C1 the unit-parameter solve. Problem evaluations exploit this with a
single factorization per design; solve_direct keeps the per-sample assembly
path for exactness checks.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded
from scipy.spatial import cKDTree

from .reliability import LimitState
from .sampling import Lognormal, Normal, RandomInput
from .sgd import OptimizationProblem

THETA_MIN = 1e-3  # design floor keeping the stiffness matrix nonsingular


class SolverError(RuntimeError):
    pass


@dataclass
class Mesh:
    """Uniform-square-element grid, possibly with masked-out elements."""

    nodes: np.ndarray          # (n_nodes, 2) coordinates
    elems: np.ndarray          # (n_e, 4) node ids, counterclockwise from lower-left
    edofs: np.ndarray          # (n_e, 8) dof ids
    fixed_dofs: np.ndarray
    load_vector: np.ndarray    # unit load template; scaled by the load multiplier
    h: float
    grid_shape: tuple[int, int]      # (nx, ny) of the bounding grid
    elem_grid: np.ndarray            # (n_e, 2) integer (ex, ey) of each element

    def __post_init__(self):
        self.free_dofs = np.setdiff1d(np.arange(self.n_dofs), self.fixed_dofs)
        if self.fixed_dofs.size == 0:
            raise ValueError("mesh needs at least one constrained dof")
        if np.any(self.elems < 0) or np.any(self.elems >= len(self.nodes)):
            raise ValueError("element connectivity out of range")

    @property
    def n_dofs(self) -> int:
        return 2 * len(self.nodes)

    @property
    def n_elems(self) -> int:
        return len(self.elems)

    @property
    def centers(self) -> np.ndarray:
        return (self.elem_grid + 0.5) * self.h


def element_stiffness(e_mod: float = 1.0, nu: float = 0.3, h: float = 1.0) -> np.ndarray:
    """8x8 bilinear-quad plane-stress stiffness, 2x2 Gauss quadrature."""
    d_mat = e_mod / (1.0 - nu**2) * np.array(
        [[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, (1.0 - nu) / 2.0]]
    )
    corners = h * np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    ke = np.zeros((8, 8))
    for gx in (-1.0 / np.sqrt(3.0), 1.0 / np.sqrt(3.0)):
        for gy in (-1.0 / np.sqrt(3.0), 1.0 / np.sqrt(3.0)):
            d_shape = 0.25 * np.array(
                [
                    [-(1 - gy), (1 - gy), (1 + gy), -(1 + gy)],
                    [-(1 - gx), -(1 + gx), (1 + gx), (1 - gx)],
                ]
            )
            jac = d_shape @ corners
            d_xy = np.linalg.solve(jac, d_shape)
            b_mat = np.zeros((3, 8))
            b_mat[0, 0::2] = d_xy[0]
            b_mat[1, 1::2] = d_xy[1]
            b_mat[2, 0::2] = d_xy[1]
            b_mat[2, 1::2] = d_xy[0]
            ke += b_mat.T @ d_mat @ b_mat * np.linalg.det(jac)
    return ke


def _grid_mesh(nx: int, ny: int, elem_mask: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodes/elems for the masked (nx, ny) grid; returns (nodes, elems, elem_grid).

    Node ids are compacted over nodes touched by kept elements, ordered
    column-major (x-major, y fastest) for a small stiffness bandwidth.
    """
    full_id = lambda ix, iy: ix * (ny + 1) + iy
    used = np.zeros((nx + 1) * (ny + 1), dtype=bool)
    elems_full, elem_grid = [], []
    for ex in range(nx):
        for ey in range(ny):
            if not elem_mask[ex, ey]:
                continue
            n1 = full_id(ex, ey)
            n2 = full_id(ex + 1, ey)
            elems_full.append([n1, n2, n2 + 1, n1 + 1])
            elem_grid.append([ex, ey])
            used[[n1, n2, n2 + 1, n1 + 1]] = True
    renum = -np.ones(used.size, dtype=int)
    renum[used] = np.arange(used.sum())
    coords = np.array([[i // (ny + 1), i % (ny + 1)] for i in np.nonzero(used)[0]], dtype=float)
    elems = renum[np.array(elems_full)]
    return coords, elems, np.array(elem_grid)


def _edofs(elems: np.ndarray) -> np.ndarray:
    edofs = np.repeat(2 * elems, 2, axis=1)
    edofs[:, 1::2] += 1
    return edofs


def build_rect_mesh(nx: int = 120, ny: int = 40, h: float = 1.0) -> Mesh:
    """Half of a simply supported beam with a midspan point load.

    Symmetry rollers (x-displacement fixed) on the left edge, a vertical
    roller at the bottom-right corner, and the unit downward load on the
    top-left corner node, i.e. on the symmetry plane.
    """
    nodes, elems, elem_grid = _grid_mesh(nx, ny, np.ones((nx, ny), dtype=bool))
    nodes *= h
    node_id = lambda ix, iy: ix * (ny + 1) + iy  # compaction is identity here
    fixed = [2 * node_id(0, iy) for iy in range(ny + 1)]
    fixed.append(2 * node_id(nx, 0) + 1)
    load = np.zeros(2 * len(nodes))
    load[2 * node_id(0, ny) + 1] = -1.0
    return Mesh(nodes, elems, _edofs(elems), np.array(sorted(fixed)), load, h, (nx, ny), elem_grid)


def build_lshape_mesh(n: int = 72, h: float = 1.0) -> Mesh:
    """L-bracket: n x n grid minus the top-right (2n/3) x (2n/3) block.

    Clamped along the top edge of the vertical leg; unit downward point load
    at the middle of the right face of the horizontal leg.
    """
    if n % 6 != 0:
        raise ValueError("grid size must be divisible by 6")
    leg = n // 3
    mask = np.zeros((n, n), dtype=bool)
    for ex in range(n):
        for ey in range(n):
            mask[ex, ey] = ex < leg or ey < leg
    nodes, elems, elem_grid = _grid_mesh(n, n, mask)
    coords = {tuple(map(int, xy)): i for i, xy in enumerate(nodes)}
    nodes = nodes * h
    fixed = []
    for ix in range(leg + 1):
        nid = coords[(ix, n)]
        fixed.extend([2 * nid, 2 * nid + 1])
    load = np.zeros(2 * len(nodes))
    load[2 * coords[(n, n // 6)] + 1] = -1.0
    return Mesh(nodes, elems, _edofs(elems), np.array(sorted(fixed)), load, h, (n, n), elem_grid)


def build_filter(mesh: Mesh, radius_factor: float = 1.5) -> sparse.csr_matrix:
    """Row-normalized cone-weight density filter over element centers."""
    r_f = radius_factor * mesh.h
    centers = mesh.centers
    pairs = cKDTree(centers).query_pairs(r_f, output_type="ndarray")
    n_e = mesh.n_elems
    rows = np.concatenate([pairs[:, 0], pairs[:, 1], np.arange(n_e)])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0], np.arange(n_e)])
    weights = r_f - np.linalg.norm(centers[rows] - centers[cols], axis=1)
    w = sparse.csr_matrix((weights, (rows, cols)), shape=(n_e, n_e))
    return (sparse.diags(1.0 / np.asarray(w.sum(axis=1)).ravel()) @ w).tocsr()


def filter_forward(weight_matrix: sparse.csr_matrix, theta: np.ndarray) -> np.ndarray:
    """Physical densities rho = W theta."""
    return weight_matrix @ theta


def filter_backward(weight_matrix: sparse.csr_matrix, d_rho: np.ndarray) -> np.ndarray:
    """Chain rule through the filter: dJ/dtheta = W^T dJ/drho."""
    return weight_matrix.T @ d_rho


@dataclass
class SimpField:
    """Design and filtered densities with the material-law parameters."""

    theta: np.ndarray
    rho: np.ndarray
    e0: float = 1.0
    nu: float = 0.3
    beta_p: float = 3.0


class _BandedOperator:
    """Precomputed assembly-and-factorization pipeline on the free dofs.

    The stiffness sparsity pattern is fixed by the mesh, so per-design work
    reduces to scattering scaled element matrices into a banded array and a
    banded Cholesky factorization.
    """

    def __init__(self, mesh: Mesh, ke: np.ndarray):
        self.mesh = mesh
        self.ke = ke
        n_free = len(mesh.free_dofs)
        dof_map = -np.ones(mesh.n_dofs, dtype=int)
        dof_map[mesh.free_dofs] = np.arange(n_free)
        i_idx = np.repeat(mesh.edofs, 8, axis=1).ravel()
        j_idx = np.tile(mesh.edofs, (1, 8)).ravel()
        ri, rj = dof_map[i_idx], dof_map[j_idx]
        upper = (ri >= 0) & (rj >= 0) & (ri <= rj)
        self.n_free = n_free
        self.bandwidth = int((rj[upper] - ri[upper]).max())
        self.band_pos = (self.bandwidth + ri[upper] - rj[upper]) * n_free + rj[upper]
        self.entry_elem = np.repeat(np.arange(mesh.n_elems), 64)[upper]
        self.entry_ke = np.tile(ke.ravel(), mesh.n_elems)[upper]
        self.f_free = mesh.load_vector[mesh.free_dofs]

    def solve(self, scale: np.ndarray, load_mult: float) -> tuple[np.ndarray, float]:
        """Displacements (full dof vector) and compliance for K(scale) u = P f."""
        vals = scale[self.entry_elem] * self.entry_ke
        ab = np.bincount(
            self.band_pos, weights=vals, minlength=(self.bandwidth + 1) * self.n_free
        ).reshape(self.bandwidth + 1, self.n_free)
        try:
            chol = cholesky_banded(ab, lower=False)
        except LinAlgError as err:
            pivots = ab[-1]  # diagonal of the banded storage
            raise SolverError(
                f"stiffness matrix not positive definite "
                f"(smallest diagonal {pivots.min():.3e}): {err}"
            ) from err
        u_free = cho_solve_banded((chol, False), load_mult * self.f_free)
        u = np.zeros(self.mesh.n_dofs)
        u[self.mesh.free_dofs] = u_free
        compliance = float(load_mult * self.f_free @ u_free)
        return u, compliance


def solve_compliance(
    mesh: Mesh, field: SimpField, load_mult: float = 1.0, _op: _BandedOperator | None = None
) -> tuple[np.ndarray, float]:
    """Solve K(rho) u = P f and return (u, compliance = f^T u)."""
    op = _op or _BandedOperator(mesh, element_stiffness(1.0, field.nu, mesh.h))
    return op.solve(field.e0 * field.rho**field.beta_p, load_mult)


def compliance_sensitivity(mesh: Mesh, field: SimpField, u: np.ndarray) -> np.ndarray:
    """dC/drho per element; compliance is self-adjoint so no extra solve."""
    ke = element_stiffness(1.0, field.nu, mesh.h)
    ue = u[mesh.edofs]
    energies = np.einsum("ei,ij,ej->e", ue, ke, ue)
    return -field.beta_p * field.rho ** (field.beta_p - 1.0) * field.e0 * energies


@dataclass(frozen=True)
class BeamConfig:
    variant: str = "rect"          # "rect" | "lshape"
    nx: int = 120
    ny: int = 40
    n_grid: int = 72
    c_max: float = 700.0
    tau: float = 0.25
    p0_load: float = 1.0
    load_coeff: float = 0.25
    e0_mean: float = 1.0
    e0_std: float = 0.1
    nu: float = 0.3
    beta_p: float = 3.0
    filter_radius: float = 1.5
    theta0: float = 0.5

    def __post_init__(self):
        if self.c_max <= 0.0:
            raise ValueError("c_max must be > 0")
        if self.variant not in ("rect", "lshape"):
            raise ValueError(f"unknown mesh variant {self.variant!r}")


def lbeam_config(**overrides) -> BeamConfig:
    """L-bracket defaults: smaller load with a stronger fluctuation, softer modulus."""
    base = dict(
        variant="lshape", c_max=650.0, p0_load=0.5, load_coeff=0.5, e0_std=0.2
    )
    base.update(overrides)
    return BeamConfig(**base)


class BeamProblem:
    """Compliance-plus-mass minimization with a compliance failure margin.

    Uncertain inputs: xi[0] is the standard-normal load fluctuation, entering
    the load multiplier P = P0 (1 + c xi0); xi[1] is the lognormal bulk
    modulus E0 itself. A single unit-parameter factorization per design is
    cached and reused across samples via the exact rescaling C = P^2/E0 * C1.
    """

    def __init__(self, config: BeamConfig = BeamConfig()):
        self.config = config
        if config.variant == "rect":
            self.mesh = build_rect_mesh(config.nx, config.ny)
        else:
            self.mesh = build_lshape_mesh(config.n_grid)
        self.ke = element_stiffness(1.0, config.nu, self.mesh.h)
        self.weights = build_filter(self.mesh, config.filter_radius)
        self._op = _BandedOperator(self.mesh, self.ke)
        self.random_input = RandomInput(
            (Normal(0.0, 1.0), Lognormal(config.e0_mean, config.e0_std))
        )
        self.elem_volume = self.mesh.h**2
        self._mass_grad = config.tau * self.elem_volume * filter_backward(
            self.weights, np.ones(self.mesh.n_elems)
        )
        self._cache_key: bytes | None = None
        self._cache: tuple[float, np.ndarray] | None = None
        self.n_solves = 0
        self.limit_state = LimitState(
            fn=lambda theta, xi: self.limit_state_value(theta, xi),
            batch_fn=lambda theta, xis: self.limit_state_batch(theta, xis),
        )

    def field(self, theta: np.ndarray, e0: float = 1.0) -> SimpField:
        theta = np.asarray(theta, dtype=float)
        return SimpField(
            theta=theta,
            rho=filter_forward(self.weights, theta),
            e0=e0,
            nu=self.config.nu,
            beta_p=self.config.beta_p,
        )

    def load_multiplier(self, xi) -> float | np.ndarray:
        return self.config.p0_load * (1.0 + self.config.load_coeff * np.asarray(xi))

    def unit_solution(self, theta: np.ndarray) -> tuple[float, np.ndarray]:
        """(C1, dC1/drho) at unit load and unit modulus; cached per design."""
        theta = np.asarray(theta, dtype=float)
        key = theta.tobytes()
        if key != self._cache_key:
            field = self.field(theta, e0=1.0)
            u, c1 = solve_compliance(self.mesh, field, 1.0, _op=self._op)
            self.n_solves += 1
            dc1 = compliance_sensitivity(self.mesh, field, u)
            self._cache_key = key
            self._cache = (c1, dc1)
        return self._cache

    def compliance(self, theta: np.ndarray, xi: np.ndarray) -> float:
        c1, _ = self.unit_solution(theta)
        p = self.load_multiplier(xi[0])
        return float(p**2 / xi[1] * c1)

    def compliance_direct(self, theta: np.ndarray, xi: np.ndarray) -> float:
        """Per-sample assembly/solve path; exactness reference for compliance()."""
        field = self.field(theta, e0=float(xi[1]))
        _, c = solve_compliance(self.mesh, field, float(self.load_multiplier(xi[0])), _op=self._op)
        self.n_solves += 1
        return c

    def limit_state_value(self, theta, xi) -> float:
        return self.config.c_max - self.compliance(theta, np.asarray(xi, dtype=float))

    def limit_state_batch(self, theta, xis: np.ndarray) -> np.ndarray:
        c1, _ = self.unit_solution(theta)
        xis = np.atleast_2d(xis)
        p = self.load_multiplier(xis[:, 0])
        return self.config.c_max - p**2 / xis[:, 1] * c1

    def objective_sample(self, theta, xi) -> tuple[float, np.ndarray]:
        """Sampled compliance plus the deterministic mass term, with gradient."""
        theta = np.asarray(theta, dtype=float)
        c1, dc1 = self.unit_solution(theta)
        scale = float(self.load_multiplier(xi[0]) ** 2 / xi[1])
        rho = filter_forward(self.weights, theta)
        value = scale * c1 + self.config.tau * self.elem_volume * float(np.sum(rho))
        grad = filter_backward(self.weights, scale * dc1) + self._mass_grad
        return value, grad

    def objective_expected(self, theta) -> float:
        """Exact expectation of the sampled objective at a design.

        E[P^2] = P0^2 (1 + c^2) for the standard-normal load fluctuation and
        E[1/E0] = exp(sigma_ln^2)/mean for the lognormal modulus.
        """
        theta = np.asarray(theta, dtype=float)
        c1, _ = self.unit_solution(theta)
        cfg = self.config
        e0 = self.random_input.components[1]
        mean_scale = cfg.p0_load**2 * (1.0 + cfg.load_coeff**2) * np.exp(e0.sigma_ln**2) / e0.mean
        rho = filter_forward(self.weights, theta)
        return float(mean_scale * c1 + cfg.tau * self.elem_volume * np.sum(rho))

    def make_problem(self) -> OptimizationProblem:
        n_e = self.mesh.n_elems
        return OptimizationProblem(
            dim=n_e,
            theta0=np.full(n_e, self.config.theta0),
            lower=np.full(n_e, THETA_MIN),
            upper=np.ones(n_e),
            random_input=self.random_input,
            objective_sample=self.objective_sample,
            limit_state=self.limit_state,
            objective_expected=self.objective_expected,
        )

    def density_grid(self, rho: np.ndarray) -> np.ndarray:
        """Row-major (ny, nx) density image, top row first; voids are 0."""
        nx, ny = self.mesh.grid_shape
        grid = np.zeros((ny, nx))
        ex, ey = self.mesh.elem_grid[:, 0], self.mesh.elem_grid[:, 1]
        grid[ny - 1 - ey, ex] = rho
        return grid


def write_density_csv(path, grid: np.ndarray) -> None:
    np.savetxt(path, grid, fmt="%.6f", delimiter=",")


def write_density_pgm(path, grid: np.ndarray) -> None:
    """8-bit PGM, grayscale 255*(1 - rho): material renders dark."""
    pixels = np.round(255.0 * (1.0 - np.clip(grid, 0.0, 1.0))).astype(int)
    with open(path, "w") as fh:
        fh.write(f"P2\n{grid.shape[1]} {grid.shape[0]}\n255\n")
        for row in pixels:
            fh.write(" ".join(str(v) for v in row) + "\n")
