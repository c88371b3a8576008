"""Dense matrix helpers for autoregressive tracking.

Toeplitz and companion constructions, a Durand-Kerner polynomial root
finder, a cyclic Jacobi eigenvalue solver, Gaussian KL divergence, and
the quadratic form that the batched AR(d) average gain is built from.

The root finder and the Jacobi sweep are deliberately hand-rolled: the
companion spectrum must agree with the reciprocal polynomial roots, and
keeping both routes independent lets the test suite check one against
the other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

__all__ = [
    "StabilityRegion",
    "ArdQuadraticForm",
    "toeplitz_from_vector",
    "shift_matrix",
    "ar_matrix_a",
    "ar_matrix_b",
    "companion_matrix",
    "durand_kerner_roots",
    "ar_stability_check",
    "stability_inner_radius",
    "stability_outer_radius",
    "kl_gaussians",
    "ard_quadratic_matrix",
    "sym_eigenvalues",
    "lemma_eig_check",
    "abel_transform_check",
    "kp_constant",
]


# =====================================================================
# Toeplitz / shift / companion constructions
# =====================================================================

def toeplitz_from_vector(m) -> np.ndarray:
    """Build the d x d constant-diagonal matrix from a length 2d-1 vector.

    The vector is read starting at the top-right entry, backwards along
    the top row, then down the left column, so entry (i, j) is
    m[i - j + d - 1].
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 1 or m.size % 2 == 0:
        raise ValueError("expected a flat vector of odd length 2d-1")
    d = (m.size + 1) // 2
    idx = np.arange(d)
    return m[idx[:, None] - idx[None, :] + d - 1]


def shift_matrix(d: int, power: int = 1) -> np.ndarray:
    """Upper shift matrix S^power (ones on the power-th superdiagonal)."""
    if power >= d:
        return np.zeros((d, d))
    return np.eye(d, k=power)


def ar_matrix_a(theta) -> np.ndarray:
    """Unit upper-triangular A(theta) = I - sum_i S^i theta_i."""
    theta = np.asarray(theta, dtype=float)
    d = theta.size
    a = np.zeros(2 * d - 1)
    a[d - 1] = 1.0
    a[: d - 1] = -theta[: d - 1][::-1]  # entries -theta_{d-1} ... -theta_1
    return toeplitz_from_vector(a)


def ar_matrix_b(theta) -> np.ndarray:
    """Lower-triangular B(theta) = sum_i (S^{d-i})^T theta_i."""
    theta = np.asarray(theta, dtype=float)
    d = theta.size
    b = np.zeros(2 * d - 1)
    b[d - 1:] = theta[::-1]  # entries theta_d, theta_{d-1}, ..., theta_1
    return toeplitz_from_vector(b)


def companion_matrix(theta) -> np.ndarray:
    """Companion matrix: first row theta, ones on the subdiagonal."""
    theta = np.asarray(theta, dtype=float)
    d = theta.size
    c = np.zeros((d, d))
    c[0, :] = theta
    if d > 1:
        c[np.arange(1, d), np.arange(d - 1)] = 1.0
    return c


# =====================================================================
# Polynomial roots and the AR stability region
# =====================================================================

class RootFindingError(RuntimeError):
    """Durand-Kerner failed to converge; carries the last residuals."""

    def __init__(self, message: str, residuals: np.ndarray):
        super().__init__(message)
        self.residuals = residuals


def durand_kerner_roots(coeffs, tol: float = 1e-12, max_sweeps: int = 200) -> np.ndarray:
    """All complex roots of sum_j coeffs[j] z^j (ascending order, c[-1] != 0).

    Simultaneous iteration with initial guesses on a circle of radius
    1 + max |c_j / c_m|, slightly rotated to break symmetry.
    """
    c = np.asarray(coeffs, dtype=complex)
    if c.size < 2:
        raise ValueError("need a polynomial of degree >= 1")
    if c[-1] == 0:
        raise ValueError("leading coefficient must be nonzero")
    c = c / c[-1]
    m = c.size - 1
    radius = 1.0 + float(np.max(np.abs(c[:-1])))
    roots = radius * np.exp(2j * np.pi * (np.arange(m) + 0.357) / m)
    desc = c[::-1]  # descending for polyval
    for _ in range(max_sweeps):
        shift = np.zeros(m, dtype=complex)
        for i in range(m):
            diff = roots[i] - np.delete(roots, i)
            denom = np.prod(diff)
            shift[i] = np.polyval(desc, roots[i]) / denom
        roots = roots - shift
        if np.max(np.abs(shift)) < tol:
            return roots
    residuals = np.abs(np.polyval(desc, roots))
    if np.max(residuals) < 1e-10:  # converged in value if not in step
        return roots
    raise RootFindingError("root iteration did not converge", residuals)


@dataclass(frozen=True)
class StabilityRegion:
    """AR(d) coefficient vectors whose polynomial 1 - sum theta_i z^i has
    no zero inside the disc of radius 1/rho; equivalently the companion
    spectral radius is at most rho."""

    rho: float
    d: int

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if self.d < 1:
            raise ValueError("d must be positive")

    def contains(self, theta) -> bool:
        member, _ = ar_stability_check(theta, self.rho)
        return member


def stability_inner_radius(rho: float, d: int) -> float:
    """Sup-norm ball radius guaranteed inside the stability region."""
    return sum(rho ** (-2 * i) for i in range(1, d + 1)) ** -0.5


def stability_outer_radius(rho: float, d: int) -> float:
    """Sup-norm ball radius guaranteed to contain the stability region."""
    return (1.0 + rho) ** d - 1.0


def ar_stability_check(theta, rho: float) -> tuple[bool, float]:
    """Membership of theta in the rho-stability region.

    Returns (member, spectral_radius) where spectral_radius is the
    reciprocal of the smallest root modulus of 1 - sum theta_i z^i
    (zero for the all-zero coefficient vector, which has no roots).
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    # trailing zero coefficients drop the degree (roots escape to infinity)
    nz = np.nonzero(theta)[0]
    if nz.size == 0:
        return True, 0.0
    eff = theta[: nz[-1] + 1]
    coeffs = np.concatenate(([1.0], -eff))
    roots = durand_kerner_roots(coeffs)
    min_mod = float(np.min(np.abs(roots)))
    spectral_radius = 1.0 / min_mod
    member = min_mod >= 1.0 / rho - 1e-9
    return member, spectral_radius


# =====================================================================
# Gaussian KL divergence
# =====================================================================

def kl_gaussians(mu0, sigma0, mu1, sigma1) -> float:
    """KL(N(mu0, sigma0) || N(mu1, sigma1)) for SPD covariances."""
    mu0 = np.atleast_1d(np.asarray(mu0, dtype=float))
    mu1 = np.atleast_1d(np.asarray(mu1, dtype=float))
    sigma0 = np.atleast_2d(np.asarray(sigma0, dtype=float))
    sigma1 = np.atleast_2d(np.asarray(sigma1, dtype=float))
    d = mu0.size
    sign0, logdet0 = np.linalg.slogdet(sigma0)
    sign1, logdet1 = np.linalg.slogdet(sigma1)
    if sign0 <= 0 or sign1 <= 0:
        raise ValueError("covariances must be positive definite")
    diff = mu1 - mu0
    solve1 = np.linalg.solve(sigma1, np.column_stack([sigma0, diff]))
    trace_term = float(np.trace(solve1[:, :d]))
    quad_term = float(diff @ solve1[:, d])
    return 0.5 * (logdet1 - logdet0 + trace_term - d + quad_term)


# =====================================================================
# The AR(d) quadratic form
# =====================================================================

@dataclass(frozen=True)
class ArdQuadraticForm:
    """The matrix M(theta, Y) whose quadratic form (ϑ-θ)ᵀM(ϑ-θ)/2 equals
    the KL divergence between the two conditional Gaussian kernels."""

    matrix: np.ndarray
    theta: np.ndarray
    y: np.ndarray
    sigma: float

    def quadratic(self, candidate) -> float:
        delta = np.asarray(candidate, dtype=float) - self.theta
        return 0.5 * float(delta @ self.matrix @ delta)


def _a_inverse(a: np.ndarray) -> np.ndarray:
    """Inverse of a unit upper-triangular matrix by back-substitution."""
    return solve_triangular(a, np.eye(a.shape[0]), lower=False,
                            unit_diagonal=True)


def ard_quadratic_matrix(theta, y, sigma: float) -> ArdQuadraticForm:
    """Assemble M(theta, Y) from the shift-matrix expansion.

    M = V^T V + sigma^{-2} W^T W with column i of V the (column-major)
    vectorization of S^i A^{-1}(theta) and column i of W the vector
    C_i(theta) Y, C_i = (S^{d-i})^T + S^i A^{-1}(theta) B(theta).
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    d = theta.size
    if y.size != d:
        raise ValueError("y must have the same dimension as theta")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    a_inv = _a_inverse(ar_matrix_a(theta))
    b = ar_matrix_b(theta)
    v_cols = np.empty((d * d, d))
    w_cols = np.empty((d, d))
    a_inv_b = a_inv @ b
    for i in range(1, d + 1):
        s_i = shift_matrix(d, i)
        v_cols[:, i - 1] = (s_i @ a_inv).flatten(order="F")
        c_i = shift_matrix(d, d - i).T + s_i @ a_inv_b
        w_cols[:, i - 1] = c_i @ y
    m = v_cols.T @ v_cols + (w_cols.T @ w_cols) / sigma ** 2
    m = 0.5 * (m + m.T)  # kill roundoff asymmetry
    return ArdQuadraticForm(matrix=m, theta=theta, y=y, sigma=float(sigma))


# =====================================================================
# Symmetric eigenvalues (cyclic Jacobi) and the eigenvalue lemma
# =====================================================================

def sym_eigenvalues(m, max_sweeps: int = 60) -> np.ndarray:
    """All eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps until the off-diagonal Frobenius norm drops below 1e-12
    relative to the matrix scale.
    """
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.allclose(a, a.T, atol=1e-10 * (1.0 + np.abs(a).max())):
        raise ValueError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    d = a.shape[0]
    if d == 1:
        return a[0].copy()
    scale = max(1.0, float(np.linalg.norm(a)))
    tol = 1e-12 * scale
    for _ in range(max_sweeps):
        off_entries = a - np.diag(np.diag(a))
        off = math.sqrt(float(np.sum(off_entries * off_entries)))
        if off < tol:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.hypot(1.0, tau))
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                # similarity by J with J[p,p]=J[q,q]=c, J[p,q]=s, J[q,p]=-s
                left = np.array([[c, -s], [s, c]])
                a[[p, q], :] = left @ a[[p, q], :]
                a[:, [p, q]] = a[:, [p, q]] @ left.T
                a[p, q] = a[q, p] = 0.0
    else:
        raise RuntimeError("Jacobi iteration did not converge")
    return np.sort(np.diag(a))


@dataclass(frozen=True)
class EigLemmaReport:
    eigenvalues: np.ndarray
    norm_discrepancy: float
    ordering_discrepancy: float
    pnorm_ok: bool
    ok: bool


def _induced_norm(m: np.ndarray, p) -> float:
    if p == 1:
        return float(np.max(np.abs(m).sum(axis=0)))
    if p == math.inf:
        return float(np.max(np.abs(m).sum(axis=1)))
    if p == 2:
        return float(np.max(np.abs(sym_eigenvalues(m))))
    raise ValueError("only p in {1, 2, inf} supported")


def kp_constant(p, d: int) -> float:
    """Norm-equivalence bound K_p(d) relating the p-norm to the 2-norm."""
    if p == math.inf:
        return math.sqrt(d)
    if p < 1:
        raise ValueError("p must be >= 1")
    if p >= 2:
        return d ** ((p - 2) / (2 * p))
    return d ** ((2 - p) / (2 * p))


def lemma_eig_check(m, gamma: float, tol: float = 1e-10) -> EigLemmaReport:
    """Verify the contraction identities for I - gamma*M, M SPD.

    Checks ||I - gamma M||_2 = 1 - gamma*lambda_min(M), the eigenvalue
    order reversal of I - gamma M, strict positivity, and the p-norm
    bound ||M||_p <= K_p(d) lambda_max(M) for p in {1, 2, inf}.
    """
    m = np.asarray(m, dtype=float)
    d = m.shape[0]
    eigs = sym_eigenvalues(m)
    lam_min, lam_max = float(eigs[0]), float(eigs[-1])
    if lam_min <= 0:
        raise ValueError("matrix must be positive definite")
    if gamma * lam_max >= 1.0:
        raise ValueError("gamma * lambda_max must be below 1")
    contraction = np.eye(d) - gamma * m
    c_eigs = sym_eigenvalues(contraction)
    norm_disc = abs(_induced_norm(contraction, 2) - (1.0 - gamma * lam_min))
    ordering_disc = max(
        abs(float(c_eigs[0]) - (1.0 - gamma * lam_max)),
        abs(float(c_eigs[-1]) - (1.0 - gamma * lam_min)),
    )
    positive = float(c_eigs[0]) > 0.0 and float(c_eigs[-1]) < 1.0
    pnorm_ok = all(
        _induced_norm(m, p) <= kp_constant(p, d) * lam_max + tol
        for p in (1, 2, math.inf)
    )
    ok = norm_disc <= tol and ordering_disc <= tol and positive and pnorm_ok
    return EigLemmaReport(eigenvalues=eigs, norm_discrepancy=norm_disc,
                          ordering_discrepancy=ordering_disc,
                          pnorm_ok=pnorm_ok, ok=ok)


def abel_transform_check(b_matrices, a_vectors, k0: int = 0, k: int | None = None) -> float:
    """Max componentwise gap between the two sides of summation by parts.

    Direct sum: sum_{i=k0}^{k} B_i a_i.  Transformed side:
    sum_{i=k0}^{k-1} (B_i - B_{i+1}) A_i + B_k A_k with the partial sums
    A_i = sum_{j=k0}^{i} a_j.  Both sides require entries through index k.
    """
    b_matrices = [np.asarray(b, dtype=float) for b in b_matrices]
    a_vectors = [np.atleast_1d(np.asarray(a, dtype=float)) for a in a_vectors]
    if k is None:
        k = len(a_vectors) - 1
    if k < k0:
        raise ValueError("need k >= k0")
    if len(b_matrices) < k + 1 or len(a_vectors) < k + 1:
        raise ValueError("need entries through index k")
    d = a_vectors[k0].size
    direct = np.zeros(d)
    for i in range(k0, k + 1):
        direct = direct + b_matrices[i] @ a_vectors[i]
    partial = np.zeros(d)
    transformed = np.zeros(d)
    for i in range(k0, k):
        partial = partial + a_vectors[i]
        transformed = transformed + (b_matrices[i] - b_matrices[i + 1]) @ partial
    partial = partial + a_vectors[k]
    transformed = transformed + b_matrices[k] @ partial
    return float(np.max(np.abs(direct - transformed)))
