"""Weight selection: objective evaluators, simplex solvers and closed-form weights."""

from __future__ import annotations

import logging
import math

import numpy as np

from config import Config
from core import ratio_norm
from models import (
    ArgumentError,
    ObjectiveParams,
    PrivacyDemand,
    SolverReport,
    WeightVector,
)

logger = logging.getLogger(__name__)

EXACT_METHODS = ("breakpoint", "subgradient")


def _branch(objective):
    """Accept 'C'/'U' as well as the setting names."""
    key = str(objective).strip().upper()[:1]
    if key not in ("C", "U"):
        raise ArgumentError(f"objective must be C or U, got {objective!r}")
    return key


def _check_dims(w: WeightVector, p: ObjectiveParams):
    if w.n != p.n:
        raise ArgumentError(f"{w.n} weights for {p.n} privacy levels")


# ================= OBJECTIVES ================= #
def r_C(w: WeightVector, p: ObjectiveParams) -> float:
    """sqrt(||w - 1/n||_1^2 + log(k/beta)^2 ||w/eps||_inf^2)."""
    _check_dims(w, p)
    dev = float(np.abs(w.w - 1.0 / w.n).sum())
    noise = p.log_term * ratio_norm(w, p.eps)
    return math.sqrt(dev ** 2 + noise ** 2)


def r_U(w: WeightVector, p: ObjectiveParams) -> float:
    """Like r_C, but the bias term is min(||w - 1/n||_1^2, log(k/beta) ||w||_2^2)."""
    _check_dims(w, p)
    L = p.log_term
    dev = float(np.abs(w.w - 1.0 / w.n).sum()) ** 2
    spread = L * float(np.dot(w.w, w.w))
    noise = L * ratio_norm(w, p.eps)
    return math.sqrt(min(dev, spread) + noise ** 2)


def relaxed_objective(objective, w: WeightVector, p: ObjectiveParams) -> float:
    """Square root of the l2-relaxed objective minimized by the turbo variants.

    C: n||w - 1/n||_2^2 + L^2 ||w/eps||_inf^2
    U: min(n||w - 1/n||_2^2, L ||w||_2^2) + L^2 ||w/eps||_inf^2
    """
    _check_dims(w, p)
    L = p.log_term
    bias = w.n * float(np.sum((w.w - 1.0 / w.n) ** 2))
    if _branch(objective) == "U":
        bias = min(bias, L * float(np.dot(w.w, w.w)))
    return math.sqrt(bias + (L * ratio_norm(w, p.eps)) ** 2)


def evaluate(objective, w: WeightVector, p: ObjectiveParams) -> float:
    return r_C(w, p) if _branch(objective) == "C" else r_U(w, p)


# ================= EXACT SOLVER ================= #
def solve_weights_exact(objective, p: ObjectiveParams, method="breakpoint",
                        max_iter=None, patience=None, tol=None) -> SolverReport:
    """argmin over the simplex of r_C or r_U.

    "breakpoint" is exact. "subgradient" runs projected subgradient descent and
    reports converged=False when the iteration budget runs out.
    """
    branch = _branch(objective)
    if method not in EXACT_METHODS:
        raise ArgumentError(f"unknown exact method {method!r}; pick one of {EXACT_METHODS}")

    if method == "subgradient":
        return _solve_subgradient(
            branch, p,
            max_iter=Config.SOLVER_MAX_ITER if max_iter is None else max_iter,
            patience=Config.SOLVER_PATIENCE if patience is None else patience,
            tol=Config.SOLVER_TOL if tol is None else tol,
        )

    w, steps = _l1_branch_weights(p)
    candidates = [("l1", w)]
    if branch == "U":
        spread = solve_weights_turbo(p.log_term, p.eps)
        candidates.append(("l2", spread.weights))
        steps += spread.iterations

    scored = [(evaluate(branch, cand, p), name, cand) for name, cand in candidates]
    value, name, best = min(scored, key=lambda item: item[0])
    logger.debug("exact %s solve: n=%d value=%.6g branch=%s", branch, p.n, value, name)
    return SolverReport(best, value, iterations=steps, converged=True,
                        method="breakpoint", branch=name if branch == "U" else None)


def _l1_branch_weights(p: ObjectiveParams):
    """Minimize ||w - 1/n||_1^2 + L^2 ||w/eps||_inf^2 exactly.

    For a fixed noise level t = ||w/eps||_inf the smallest l1 deviation is
    2 D(t) with D(t) = sum_i max(0, 1/n - t eps_i), reachable whenever
    sum_i t eps_i >= 1. The objective 4 D(t)^2 + L^2 t^2 is convex and
    quadratic between the breakpoints 1/(n eps_i), so each piece is minimized
    in closed form and the best piece wins.
    """
    n = p.n
    u = 1.0 / n
    L = p.log_term
    eps = p.eps.eps
    finite = np.isfinite(eps)
    if not finite.any():
        return WeightVector.uniform(n), 0

    has_public = not finite.all()
    fe = np.sort(eps[finite])
    m = fe.size
    t_min = 0.0 if has_public else 1.0 / fe.sum()

    # piece j: the j smallest finite levels sit below 1/n, so D(t) = j u - t S_j
    bounds = np.concatenate(([np.inf], u / fe, [0.0]))
    S = np.concatenate(([0.0], np.cumsum(fe)))
    j = np.arange(m + 1, dtype=float)
    hi = bounds[:-1]
    lo = np.maximum(bounds[1:], t_min)
    valid = lo <= hi

    denom = 4.0 * S ** 2 + L ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        t_star = np.where(denom > 0, 4.0 * S * j * u / denom, lo)
    t = np.clip(t_star, lo, hi)
    f = 4.0 * (j * u - t * S) ** 2 + (L * t) ** 2
    f[~valid] = np.inf
    t_best = float(t[int(np.argmin(f))])

    cap = np.full(n, np.inf)
    cap[finite] = t_best * eps[finite]
    w = np.minimum(u, cap)
    deficit = 1.0 - w.sum()
    if deficit > 0:
        if has_public:
            w[~finite] += deficit / np.count_nonzero(~finite)
        else:
            room = np.maximum(cap - u, 0.0)
            total_room = room.sum()
            if total_room > 0:
                w += deficit * room / total_room
    w = np.maximum(w, 0.0)
    return WeightVector(w / w.sum()), m + 1


def project_simplex(v):
    """Euclidean projection onto the probability simplex (sort and threshold)."""
    v = np.asarray(v, dtype=float)
    s = np.sort(v)[::-1]
    css = np.cumsum(s) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.flatnonzero(s - css / idx > 0)[-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _solve_subgradient(branch, p: ObjectiveParams, max_iter, patience, tol, step=0.5):
    bias_modes = ["l1"] if branch == "C" else ["l1", "l2"]
    results = [_descend(mode, p, max_iter, patience, tol, step) for mode in bias_modes]
    best_w = min(results, key=lambda item: item[1])[0]
    total_iters = sum(item[2] for item in results)
    converged = all(item[3] for item in results)
    if not converged:
        logger.warning("subgradient solver hit its %d-iteration budget (n=%d)", max_iter, p.n)
    weights = WeightVector(best_w / best_w.sum())
    return SolverReport(weights, evaluate(branch, weights, p), iterations=total_iters,
                        converged=converged, method="subgradient")


def _descend(mode, p: ObjectiveParams, max_iter, patience, tol, step):
    n = p.n
    u = 1.0 / n
    L = p.log_term
    eps = p.eps.eps
    finite = np.isfinite(eps)
    inv_eps = np.where(finite, 1.0 / np.where(finite, eps, 1.0), 0.0)

    def value_and_grad(w):
        ratios = w * inv_eps
        i_max = int(np.argmax(ratios))  # first index on ties
        t = ratios[i_max]
        grad = np.zeros(n)
        grad[i_max] = 2.0 * L ** 2 * t * inv_eps[i_max]
        if mode == "l1":
            dev = w - u
            s = np.abs(dev).sum()
            grad += 2.0 * s * np.sign(dev)
            return s ** 2 + (L * t) ** 2, grad
        grad += 2.0 * L * w
        return L * np.dot(w, w) + (L * t) ** 2, grad

    w = np.full(n, u)
    best_w, (best_f, _) = w.copy(), value_and_grad(w)
    last_gain_at, mark = 0, best_f
    for it in range(1, max_iter + 1):
        f, g = value_and_grad(w)
        if f < best_f:
            best_f, best_w = f, w.copy()
        if mark - best_f > tol:
            mark, last_gain_at = best_f, it
        elif it - last_gain_at >= patience:
            return best_w, best_f, it, True
        norm = np.linalg.norm(g)
        if norm == 0:
            return best_w, best_f, it, True
        w = project_simplex(w - (step / math.sqrt(it)) * g / norm)
    return best_w, best_f, max_iter, False


# ================= TURBO SOLVER ================= #
def turbo_sequence(c, sorted_eps):
    """The r-sequence for non-decreasing eps: capped at eps_i, then a constant level.

    r_1 = eps_1 and r_{j+1} = min((sum r_i^2 + c) / sum r_i, eps_{j+1}). Once a
    term falls below its cap the level repeats, so the sequence is the capped
    prefix followed by a constant.
    """
    eps = np.asarray(sorted_eps, dtype=float)
    fe = eps[np.isfinite(eps)]
    if fe.size == 0:
        return np.ones(eps.size)
    ratio = (np.cumsum(fe ** 2) + c) / np.cumsum(fe)
    capped = fe[1:] <= ratio[:-1]
    head = fe.size if capped.all() else int(np.argmin(capped)) + 1
    r = np.empty(eps.size)
    r[:head] = fe[:head]
    r[head:] = ratio[head - 1]
    return r


def solve_weights_turbo(c, eps: PrivacyDemand) -> SolverReport:
    """argmin over the simplex of ||w||_2^2 + c ||w/eps||_inf^2 in O(n log n)."""
    if c < 0 or np.isnan(c):
        raise ArgumentError(f"turbo constant must be >= 0, got {c}")
    if not isinstance(eps, PrivacyDemand):
        eps = PrivacyDemand(eps)
    sorted_eps, _, inverse = eps.sorted_view()
    r = turbo_sequence(c, sorted_eps)
    weights = WeightVector(r[inverse] / r.sum())
    value = float(np.dot(weights.w, weights.w)) + c * ratio_norm(weights, eps) ** 2
    return SolverReport(weights, value, iterations=eps.n, converged=True, method="turbo")


def turbo_objective_weights(objective, p: ObjectiveParams) -> SolverReport:
    """Turbo weights for the l2-relaxed C or U objective.

    n||w - 1/n||_2^2 = n||w||_2^2 - 1, so the C objective is n times
    ||w||_2^2 + (L^2/n) ||w/eps||_inf^2 minus a constant: a turbo problem with
    c = L^2/n. The U objective's second branch L||w||_2^2 + L^2||w/eps||_inf^2
    is L times a turbo problem with c = L. Both branches are solved and the one
    with the smaller branch value is kept.
    """
    branch = _branch(objective)
    n = p.n
    L = p.log_term
    l2 = solve_weights_turbo(L ** 2 / n, p.eps)
    if branch == "C":
        return SolverReport(l2.weights, relaxed_objective("C", l2.weights, p),
                            iterations=l2.iterations, method="turbo")

    spread = solve_weights_turbo(L, p.eps)
    first = n * float(np.sum((l2.weights.w - 1.0 / n) ** 2))
    first += (L * ratio_norm(l2.weights, p.eps)) ** 2
    second = L * float(np.dot(spread.weights.w, spread.weights.w))
    second += (L * ratio_norm(spread.weights, p.eps)) ** 2
    chosen, name = (l2, "l2-deviation") if first <= second else (spread, "l2-spread")
    return SolverReport(chosen.weights, relaxed_objective("U", chosen.weights, p),
                        iterations=l2.iterations + spread.iterations, method="turbo", branch=name)


# ================= CLOSED-FORM WEIGHTS ================= #
def hpfa_weights(eps: PrivacyDemand) -> WeightVector:
    """w proportional to 1 - exp(-eps); public users contribute 1."""
    return WeightVector.normalized(-np.expm1(-eps.eps))


def prop_weights(eps: PrivacyDemand) -> WeightVector:
    """w proportional to eps; refuses public users."""
    if eps.public.any():
        raise ArgumentError("proportional weights are undefined when some eps is infinite")
    return WeightVector.normalized(eps.eps)


# ================= LOCAL-DP WEIGHTS ================= #
def rappor_variance(eps) -> np.ndarray:
    """coth(eps/4)/eps per user, 0 for public users."""
    eps = np.asarray(eps, dtype=float)
    out = np.zeros_like(eps)
    finite = np.isfinite(eps)
    out[finite] = 1.0 / (np.tanh(eps[finite] / 4.0) * eps[finite])
    return out


def ldp_weights(setting, p: ObjectiveParams, task="frequency") -> SolverReport:
    """Server-side weights for the local-DP baselines.

    Frequency: minimize n||w - 1/n||_2^2 + L sum_i w_i^2 coth(eps_i/4)/eps_i
    (uncorrelated: the bias term becomes min(n||w - 1/n||_2^2, L||w||_2^2)).
    Each branch is a diagonal quadratic, so w_i is proportional to 1/a_i.
    Mean: the HPM weights for the objective in `p` (PAC or MSE).
    """
    branch = _branch(setting)
    if task == "mean":
        return solve_weights_exact(branch, p)
    if task != "frequency":
        raise ArgumentError(f"unknown task {task!r}")

    n = p.n
    L = p.log_term
    v = rappor_variance(p.eps.eps)

    def surrogate(w, spread_branch):
        noise = L * float(np.dot(v, w.w ** 2))
        if spread_branch:
            return L * float(np.dot(w.w, w.w)) + noise
        return n * float(np.sum((w.w - 1.0 / n) ** 2)) + noise

    deviation = WeightVector.normalized(1.0 / (n + L * v))
    if branch == "C":
        return SolverReport(deviation, math.sqrt(surrogate(deviation, False)), method="ldp")

    spread = WeightVector.normalized(1.0 / (1.0 + v)) if L > 0 else WeightVector.uniform(n)
    first, second = surrogate(deviation, False), surrogate(spread, True)
    chosen, name = (deviation, "l2-deviation") if first <= second else (spread, "l2-spread")
    noise = L * float(np.dot(v, chosen.w ** 2))
    bias = min(n * float(np.sum((chosen.w - 1.0 / n) ** 2)), L * float(np.dot(chosen.w, chosen.w)))
    return SolverReport(chosen, math.sqrt(bias + noise), method="ldp", branch=name)


# ================= REGISTRY ================= #
def objective_params(task, metric, eps: PrivacyDemand, k=None, beta=0.05) -> ObjectiveParams:
    """Parameter substitutions per task and metric.

    frequency: PAC (k, beta), MSE (k, 1); mean: PAC (1, beta), MSE (e, 1).
    """
    if task == "frequency":
        if k is None or k < 2:
            raise ArgumentError("frequency objectives need k >= 2")
        return ObjectiveParams(float(k), beta if metric == "pac" else 1.0, eps)
    if task == "mean":
        if metric == "pac":
            return ObjectiveParams(1.0, beta, eps)
        return ObjectiveParams(math.e, 1.0, eps)
    raise ArgumentError(f"unknown task {task!r}")


def bound_value(objective, p: ObjectiveParams, method="breakpoint") -> float:
    """The minimized r_C or r_U capped at 1."""
    return min(1.0, solve_weights_exact(objective, p, method=method).objective_value)


def resolve_weights(estimator, task, setting, metric, eps: PrivacyDemand, k=None,
                    beta=0.05, method="breakpoint") -> SolverReport:
    """Weights behind every weighted estimator name."""
    p = objective_params(task, metric, eps, k=k, beta=beta)
    family = estimator.split("-", 1)[-1] if estimator.startswith(("HPF-", "HPM-")) else estimator

    if family == "opt":
        return solve_weights_exact(setting, p, method=method)
    if family == "Turbo":
        return turbo_objective_weights(setting, p)
    if family == "A":
        w = hpfa_weights(eps)
    elif family == "Prop":
        w = prop_weights(eps)
    elif family == "UNI":
        w = WeightVector.uniform(eps.n)
    elif family == "LDP":
        return ldp_weights(setting, p, task=task)
    else:
        raise ArgumentError(f"estimator {estimator!r} has no weight vector")
    return SolverReport(w, evaluate(setting, w, p), method="closed-form")
