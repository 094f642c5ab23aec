"""Dense inequality-constrained quadratic programs and an interior-point solver.

Problems have the form

    minimize    0.5 z' H z + g' z
    subject to  G z <= h

with H symmetric positive semidefinite.  The solver is a primal-dual
path-following method on the perturbed KKT conditions; it is deterministic
(pure dense linear algebra, no randomized pivoting) so repeated solves of
the same problem produce bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KKT_TOLERANCE = 1e-6
MAX_ITERATIONS = 120
# fraction-to-boundary rule: step back from the exact boundary so the
# complementarity products stay strictly positive
_BOUNDARY_FRACTION = 0.995
_CENTERING = 0.1
# iterate well past the declared tolerance so the solution itself (not just
# the residuals) is accurate at the certified level
_INNER_REFINEMENT = 1e-4


class QpError(RuntimeError):
    """Raised when a program is malformed or provably infeasible."""


@dataclass(frozen=True)
class QpProblem:
    """Dense convex QP: minimize 0.5 z'Hz + g'z subject to Gz <= h."""

    hessian: np.ndarray
    gradient: np.ndarray
    ineq_matrix: np.ndarray
    ineq_bound: np.ndarray

    def __post_init__(self) -> None:
        h = np.asarray(self.hessian, dtype=float)
        g = np.asarray(self.gradient, dtype=float)
        a = np.asarray(self.ineq_matrix, dtype=float)
        b = np.asarray(self.ineq_bound, dtype=float)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise QpError("hessian must be square")
        n = h.shape[0]
        if g.shape != (n,):
            raise QpError(f"gradient shape {g.shape} does not match {n} variables")
        if a.ndim != 2 or a.shape[1] != n:
            raise QpError("constraint matrix column count must match variables")
        if b.shape != (a.shape[0],):
            raise QpError("constraint bound length must match constraint rows")
        if not np.allclose(h, h.T, atol=1e-10):
            raise QpError("hessian must be symmetric")
        for name, arr in (("hessian", h), ("gradient", g),
                          ("constraints", a), ("bounds", b)):
            if not np.all(np.isfinite(arr)):
                raise QpError(f"{name} contains non-finite entries")
        object.__setattr__(self, "hessian", h)
        object.__setattr__(self, "gradient", g)
        object.__setattr__(self, "ineq_matrix", a)
        object.__setattr__(self, "ineq_bound", b)

    @property
    def n_variables(self) -> int:
        return self.hessian.shape[0]

    @property
    def n_constraints(self) -> int:
        return self.ineq_matrix.shape[0]

    def objective(self, z: np.ndarray) -> float:
        z = np.asarray(z, dtype=float)
        return float(0.5 * z @ self.hessian @ z + self.gradient @ z)

    def kkt_residuals(self, z: np.ndarray, lam: np.ndarray) -> tuple[float, float, float]:
        """Return (stationarity, primal feasibility, complementarity) residuals.

        All three are infinity norms; a point is optimal when each is at
        most ``KKT_TOLERANCE`` (relative to the problem's data scale).
        """
        z = np.asarray(z, dtype=float)
        lam = np.asarray(lam, dtype=float)
        slack = self.ineq_bound - self.ineq_matrix @ z
        stationarity = self.hessian @ z + self.gradient + self.ineq_matrix.T @ lam
        primal = np.maximum(-slack, 0.0)
        comp = np.abs(lam * slack)
        inf = lambda v: float(np.max(np.abs(v))) if v.size else 0.0
        return inf(stationarity), inf(primal), inf(comp)


@dataclass(frozen=True)
class QpSolution:
    z: np.ndarray
    multipliers: np.ndarray
    iterations: int
    converged: bool
    residuals: tuple[float, float, float]
    objective: float = field(default=0.0)


def solve_qp(problem: QpProblem, tolerance: float = KKT_TOLERANCE,
             max_iterations: int = MAX_ITERATIONS) -> QpSolution:
    """Solve a convex QP with a primal-dual interior-point iteration.

    The returned solution has ``converged=False`` (best iterate retained)
    if the iteration budget runs out.  A program whose constraints admit no
    strictly feasible region drives the duals to infinity; this surfaces as
    a ``QpError`` naming the most violated constraint row.
    """
    n = problem.n_variables
    m = problem.n_constraints
    hess = problem.hessian
    grad = problem.gradient
    gmat = problem.ineq_matrix
    hvec = problem.ineq_bound

    if m == 0:
        z = np.linalg.solve(hess + 1e-12 * np.eye(n), -grad)
        return QpSolution(z, np.zeros(0), 0, True, (0.0, 0.0, 0.0),
                          problem.objective(z))

    scale = max(1.0, float(np.max(np.abs(grad))) if grad.size else 1.0,
                float(np.max(np.abs(hvec))) if hvec.size else 1.0)

    z = np.zeros(n)
    slack = hvec - gmat @ z
    # shift start into the strict interior of the slack cone
    slack = np.where(slack > 1.0, slack, 1.0)
    lam = np.ones(m)

    inner_target = tolerance * _INNER_REFINEMENT * scale
    best = None
    best_max = np.inf
    for iteration in range(1, max_iterations + 1):
        r_dual = hess @ z + grad + gmat.T @ lam
        r_primal = gmat @ z + slack - hvec
        mu = float(slack @ lam) / m

        residuals = problem.kkt_residuals(z, lam)
        worst = max(residuals)
        if worst < best_max:
            best_max = worst
            best = (z.copy(), lam.copy(), iteration - 1, residuals)
        if worst <= inner_target:
            return QpSolution(z, lam, iteration - 1, True, residuals,
                              problem.objective(z))

        # aggressive centering while far out, tight once nearly converged
        sigma = _CENTERING if worst > 1e3 * inner_target else 1e-3
        r_cent = slack * lam - sigma * mu

        # Newton step on the perturbed KKT system, condensed onto z:
        #   (H + G' diag(lam/s) G) dz = -(r_dual + G' (lam*r_primal - r_cent)/s)
        ratio = lam / slack
        kkt = hess + gmat.T @ (ratio[:, None] * gmat)
        rhs = -(r_dual + gmat.T @ ((lam * r_primal - r_cent) / slack))
        try:
            dz = np.linalg.solve(kkt + 1e-12 * np.eye(n), rhs)
        except np.linalg.LinAlgError as exc:
            raise QpError(f"KKT system singular at iteration {iteration}") from exc
        ds = -(r_primal + gmat @ dz)
        dlam = -(r_cent + lam * ds) / slack

        step = 1.0
        neg_s = ds < 0.0
        if np.any(neg_s):
            step = min(step, float(np.min(-slack[neg_s] / ds[neg_s])))
        neg_l = dlam < 0.0
        if np.any(neg_l):
            step = min(step, float(np.min(-lam[neg_l] / dlam[neg_l])))
        step *= _BOUNDARY_FRACTION

        z = z + step * dz
        slack = slack + step * ds
        lam = lam + step * dlam

        if np.max(lam) > 1e14 * scale:
            violation = gmat @ z - hvec
            row = int(np.argmax(violation))
            raise QpError(
                "constraints appear infeasible: row "
                f"{row} violated by {violation[row]:.3e}")

    z_best, lam_best, it_best, res_best = best
    converged = max(res_best) <= tolerance * scale
    return QpSolution(z_best, lam_best, max_iterations, converged, res_best,
                      problem.objective(z_best))


def box_rows(selector: np.ndarray, lower: float, upper: float) -> tuple[np.ndarray, np.ndarray]:
    """Rows encoding lower <= selector . z <= upper as two <= constraints."""
    selector = np.asarray(selector, dtype=float)
    rows = np.vstack([selector, -selector])
    bounds = np.array([upper, -lower])
    return rows, bounds
