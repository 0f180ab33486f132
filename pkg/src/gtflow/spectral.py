"""Linearized system matrices, eigenstructure checks, and step-size bounds.

The stacked dynamics linearize, at every operating instant, to

    d/dt [x; y] = (diffusion + alpha * descent) [x; y]

where the diffusion part carries the two gain-scaled network Laplacians and
the Hessian-chain coupling, and the descent part carries the step-size
blocks. Stability of the whole scheme reduces to: the assembled matrix keeps
exactly m zero eigenvalues (the consensus directions) and every other
eigenvalue strictly in the left half-plane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cost import HessianAggregate
from .nonlinear import LinkGainSnapshot

__all__ = [
    "SystemMatrices",
    "SpectralReport",
    "StepSizeBounds",
    "assemble",
    "spectral_report",
    "spectrum_summary",
    "eigen_derivative_check",
    "matching_distance",
    "step_size_bounds",
    "stability_sweep",
]


@dataclass(frozen=True)
class SystemMatrices:
    """Assembled 2nm-by-2nm system blocks.

    ``full`` always reconstructs exactly as ``diffusion + alpha * descent``;
    with unit link gains ``diffusion`` equals ``diffusion_unit`` and ``full``
    is the linear-link system matrix.
    """

    diffusion: np.ndarray       # gain-scaled alpha-independent part
    diffusion_unit: np.ndarray  # same blocks with unit gains
    descent: np.ndarray         # blocks multiplied by the step size
    full: np.ndarray
    alpha: float
    n: int
    m: int


def assemble(
    lap_x: np.ndarray,
    lap_y: np.ndarray,
    hess: HessianAggregate,
    gains: LinkGainSnapshot | np.ndarray | None,
    alpha: float,
    m: int,
) -> SystemMatrices:
    """Exact block assembly of the linearized system.

    ``lap_x``/``lap_y`` are the n-by-n Laplacians driving the state and
    tracker lines; the Kronecker lift to m components is materialized here.
    ``gains`` is the length-nm diagonal of instantaneous link gains (None
    means unit gains).
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    lap_x = np.asarray(lap_x, dtype=float)
    lap_y = np.asarray(lap_y, dtype=float)
    n = lap_x.shape[0]
    if lap_x.shape != (n, n) or lap_y.shape != (n, n):
        raise ValueError("Laplacians must be square and equally sized")
    if hess.n != n or hess.m != m:
        raise ValueError("Hessian blocks do not match (n, m)")
    if gains is None:
        xi = np.ones(n * m)
    else:
        xi = gains.xi if isinstance(gains, LinkGainSnapshot) else np.asarray(gains, dtype=float)
    if xi.shape != (n * m,):
        raise ValueError(f"gain vector must have length n*m={n*m}")

    I_m = np.eye(m)
    Lx = np.kron(lap_x, I_m)
    Ly = np.kron(lap_y, I_m)
    H = hess.dense()
    nm = n * m
    zero = np.zeros((nm, nm))

    def _diffusion(gain_vec):
        LxG = Lx * gain_vec[None, :]
        LyG = Ly * gain_vec[None, :]
        return np.block([[LxG, zero], [H @ LxG, LyG]])

    diffusion = _diffusion(xi)
    diffusion_unit = diffusion if gains is None else _diffusion(np.ones(nm))
    descent = np.block([[zero, -np.eye(nm)], [zero, -H]])
    return SystemMatrices(diffusion, diffusion_unit, descent,
                          diffusion + alpha * descent, alpha, n, m)


@dataclass(frozen=True)
class SpectralReport:
    """Eigenstructure verdict for one assembled system.

    ``slowest_decay`` and ``spectral_radius`` are taken from the unit-gain
    diffusion matrix (whose spectrum is the union of the two lifted Laplacian
    spectra); they feed the step-size bound formulas. ``stable`` means the
    zero eigenvalue count is exactly m and everything else decays.
    """

    eigenvalues: np.ndarray
    zero_count: int
    max_nonzero_real: float
    slowest_decay: float
    spectral_radius: float
    m: int
    zero_tol: float

    @property
    def stable(self) -> bool:
        return self.zero_count == self.m and self.max_nonzero_real < 0


def spectrum_summary(eigs: np.ndarray, zero_tol: float) -> tuple[int, float]:
    """Count near-zero eigenvalues and the largest real part among the rest."""
    eigs = np.asarray(eigs)
    near_zero = np.abs(eigs) <= zero_tol
    nonzero = eigs[~near_zero]
    max_re = float(nonzero.real.max()) if nonzero.size else float("-inf")
    return int(near_zero.sum()), max_re


def spectral_report(mats: SystemMatrices, zero_tol: float | None = None) -> SpectralReport:
    """Dense eigen-decomposition and stability verdict.

    The default zero tolerance is 1e-8 * max|eigenvalue|, which separates the
    structural zeros from solver noise across fixture scales. The matrix is
    non-normal, so the general (balanced) dense solver is the right tool.
    """
    eigs = np.linalg.eigvals(mats.full)
    eigs = eigs[np.argsort(eigs.real)]
    scale = float(np.abs(eigs).max()) if eigs.size else 0.0
    tol = 1e-8 * scale if zero_tol is None else zero_tol
    zero_count, max_re = spectrum_summary(eigs, tol)

    base = np.linalg.eigvals(mats.diffusion_unit)
    base_tol = 1e-8 * float(np.abs(base).max()) if base.size else 0.0
    nonzero = base[np.abs(base) > base_tol]
    slowest = float(np.abs(nonzero.real).min()) if nonzero.size else 0.0
    radius = float(np.abs(base).max()) if base.size else 0.0

    return SpectralReport(eigs, zero_count, max_re, slowest, radius, mats.m, tol)


@dataclass(frozen=True)
class EigenDerivativeReport:
    """Zero-branch derivative check at alpha = 0.

    ``reduced`` is the 2m-by-2m projection of the descent blocks onto the
    zero-eigenvector pair in the display convention (ones vectors, no
    normalization): block column one vanishes and the nonzero block equals
    -sum_i hess_i for unit gains. The quantitative branch derivatives need
    the biorthonormalized pair; those are ``predicted`` and are compared
    against central finite differences of the actual spectrum.
    """

    reduced: np.ndarray
    zero_block_norm: float
    reduced_eigenvalues: np.ndarray
    predicted: np.ndarray
    finite_difference: np.ndarray
    max_rel_error: float

    @property
    def ok(self) -> bool:
        return self.max_rel_error <= 1e-4 and self.zero_block_norm <= 1e-10


def eigen_derivative_check(
    lap_x: np.ndarray,
    lap_y: np.ndarray,
    hess: HessianAggregate,
    gains: LinkGainSnapshot | np.ndarray | None = None,
    eps: float = 1e-6,
) -> EigenDerivativeReport:
    """How the 2m-fold zero eigenvalue splits when the step size turns on.

    Exactly m eigenvalues stay pinned at zero for every alpha (the consensus
    kernel survives); the other m move with derivative equal to the spectrum
    of -(sum_i H_i D_i^{-1})(sum_i D_i^{-1})^{-1}, where D_i is agent i's
    diagonal gain block. For unit gains this is -(1/n) sum_i H_i. The check
    cross-validates that closed form against finite differences of the
    assembled spectrum, pairing the moving branches by averaging the two
    one-sided slopes.
    """
    n, m = hess.n, hess.m
    if gains is None:
        xi = np.ones(n * m)
    else:
        xi = gains.xi if isinstance(gains, LinkGainSnapshot) else np.asarray(gains, dtype=float)

    # display-convention reduced matrix (unnormalized ones eigenvectors)
    ones = np.zeros((n * m, m))
    for i in range(n):
        ones[i * m:(i + 1) * m] = np.eye(m)
    V = np.zeros((2 * n * m, 2 * m))
    V[:n * m, :m] = ones
    V[n * m:, m:] = ones
    mats0 = assemble(lap_x, lap_y, hess, xi, 0.0, m)
    reduced = V.T @ mats0.descent @ V
    zero_block_norm = float(np.abs(reduced[:, :m]).max())
    reduced_eigs = np.sort_complex(np.linalg.eigvals(reduced[m:, m:]))

    # biorthonormal closed form for the moving branches
    T = np.zeros((m, m))
    S = np.zeros((m, m))
    for i in range(n):
        d_inv = np.diag(1.0 / xi[i * m:(i + 1) * m])
        T += hess.blocks[i] @ d_inv
        S += d_inv
    predicted = np.sort_complex(np.linalg.eigvals(-T @ np.linalg.inv(S)))

    def one_sided(a):
        # direct block sum: the probe evaluates at signed alpha around zero
        eigs = np.linalg.eigvals(mats0.diffusion + a * mats0.descent)
        eigs = eigs[np.argsort(np.abs(eigs))]
        return np.sort_complex(eigs[m:2 * m] / a)

    fd = 0.5 * (one_sided(eps) + one_sided(-eps))
    rel = float(np.max(np.abs(fd - predicted) / np.maximum(np.abs(predicted), 1e-300)))
    return EigenDerivativeReport(reduced, zero_block_norm, reduced_eigs, predicted, fd, rel)


def matching_distance(spec_a, spec_b) -> float:
    """Optimal matching distance between two eigenvalue multisets.

    min over pairings of the max displacement |a_i - b_{pi(i)}|, computed
    exactly as a bottleneck assignment: binary-search the answer over the
    sorted pairwise distances, testing feasibility with a maximum bipartite
    matching on the thresholded graph.
    """
    a = np.asarray(spec_a, dtype=complex).ravel()
    b = np.asarray(spec_b, dtype=complex).ravel()
    if a.size != b.size:
        raise ValueError("eigenvalue multisets must have equal cardinality")
    if a.size == 0:
        return 0.0
    dist = np.abs(a[:, None] - b[None, :])
    levels = np.unique(dist)
    lo, hi = 0, levels.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _has_perfect_matching(dist <= levels[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(levels[lo])


def _has_perfect_matching(allowed: np.ndarray) -> bool:
    """Kuhn's augmenting-path matching on a boolean bipartite adjacency."""
    size = allowed.shape[0]
    match_of_right = np.full(size, -1)

    def try_assign(u, seen):
        for v in np.flatnonzero(allowed[u]):
            if not seen[v]:
                seen[v] = True
                if match_of_right[v] < 0 or try_assign(match_of_right[v], seen):
                    match_of_right[v] = u
                    return True
        return False

    for u in range(size):
        if not try_assign(u, np.zeros(size, dtype=bool)):
            return False
    return True


@dataclass(frozen=True)
class StepSizeBounds:
    """The three admissible step-size estimates plus their inputs.

    ``tight`` is min(kappa * slow / gamma, slow / (upper * gamma)): the
    closed-form bound from the determinant factorization (derived under equal
    state/tracker adjacency; ``adjacency_mismatch`` flags when that premise
    is violated). ``matching`` inverts the infinity-norm perturbation bound,
    ``spectral`` the spectral-norm variant. All three are positive whenever
    the inputs are; the matching and spectral forms are typically far more
    conservative than the tight one.
    """

    matching: float
    spectral: float
    tight: float
    kappa: float
    upper: float
    gamma: float
    slowest_decay: float
    spectral_radius: float
    n: int
    m: int
    adjacency_mismatch: bool = False

    def admissible(self, alpha: float) -> dict[str, bool]:
        return {
            "matching": alpha < self.matching,
            "spectral": alpha < self.spectral,
            "tight": alpha < self.tight,
        }


def step_size_bounds(
    kappa: float,
    upper: float,
    gamma: float,
    slowest_decay: float,
    spectral_radius: float,
    n: int,
    m: int,
    adjacency_mismatch: bool = False,
) -> StepSizeBounds:
    """Evaluate all three step-size bound formulas.

    Inputs: sector bounds (kappa, upper), Hessian infinity norm gamma, and
    the slowest decay / spectral radius of the unit-gain diffusion spectrum.
    """
    if min(kappa, upper, gamma, slowest_decay, spectral_radius) <= 0:
        raise ValueError("all bound inputs must be positive")
    if kappa > upper:
        raise ValueError("kappa must not exceed the upper sector bound")
    nm = n * m
    target = kappa * slowest_decay

    tight = min(kappa * slowest_decay / gamma, slowest_decay / (upper * gamma))

    power = 1.0 - 1.0 / nm
    root = 1.0 / nm

    def matching_excess(alpha):
        # infinity-norm perturbation estimate of the matching distance
        if gamma < 1:
            base = 2 * upper * (1 + gamma) + max(
                2 * upper + gamma * (2 * upper + alpha), 2 * upper + alpha)
            pert = alpha
        else:
            base = 4 * upper + gamma * (4 * upper + alpha)
            pert = alpha * gamma
        return 4.0 * base ** power * pert ** root

    matching = _argmin_abs(matching_excess, target)

    spectral = (target ** nm) / (
        4 ** nm
        * upper ** (nm - 1)
        * (2 * spectral_radius + target) ** (nm - 1)
        * max(1.0, gamma)
    )

    return StepSizeBounds(matching, spectral, tight, kappa, upper, gamma,
                          slowest_decay, spectral_radius, n, m, adjacency_mismatch)


def _argmin_abs(excess, target, grid_points: int = 1024):
    """argmin over alpha > 0 of |excess(alpha) - target|.

    ``excess`` is monotone increasing from 0, so the objective is unimodal;
    a coarse log grid brackets the minimum and golden-section refines it. The
    grid extends downward until the left edge overshoots are cleared.
    """
    lo_exp, hi_exp = -6.0, 3.0
    while excess(10.0 ** lo_exp) > target and lo_exp > -300:
        lo_exp -= 12.0
    grid = np.logspace(lo_exp, hi_exp, grid_points)
    vals = np.array([abs(excess(a) - target) for a in grid])
    i = int(np.argmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid_points - 1)]

    phi = (np.sqrt(5.0) - 1.0) / 2.0
    x1 = b - phi * (b - a)
    x2 = a + phi * (b - a)
    f1, f2 = abs(excess(x1) - target), abs(excess(x2) - target)
    for _ in range(200):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - phi * (b - a)
            f1 = abs(excess(x1) - target)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + phi * (b - a)
            f2 = abs(excess(x2) - target)
        if b - a <= 1e-15 * b:
            break
    return 0.5 * (a + b)


@dataclass(frozen=True)
class SweepCell:
    alpha: float
    xi_label: str
    zero_count: int
    max_nonzero_real: float
    stable: bool


def stability_sweep(
    lap_x: np.ndarray,
    lap_y: np.ndarray,
    hess: HessianAggregate,
    alpha_grid,
    xi_regimes: dict[str, np.ndarray],
    zero_tol: float | None = None,
) -> list[SweepCell]:
    """Spectral verdict for every (alpha, gain regime) cell.

    Gains are frozen snapshots: the stability argument is pointwise in time,
    so constant gain vectors in the sector are the faithful test objects.
    Cells are independent; results come back in deterministic grid order.
    """
    m = hess.m
    cells = []
    for label, xi in xi_regimes.items():
        for alpha in alpha_grid:
            rep = spectral_report(assemble(lap_x, lap_y, hess, xi, float(alpha), m), zero_tol)
            cells.append(SweepCell(float(alpha), label, rep.zero_count,
                                   rep.max_nonzero_real, rep.stable))
    return cells


def sweep_to_csv(cells: list[SweepCell]) -> str:
    lines = ["alpha,xi_regime,zero_count,max_nonzero_real,stable"]
    for c in cells:
        lines.append(f"{c.alpha!r},{c.xi_label},{c.zero_count},{c.max_nonzero_real!r},{int(c.stable)}")
    return "\n".join(lines) + "\n"
