"""Fast in-package oracle checks, run by ``gplvm-density selftest``."""

import numpy as np

from .baselines import DiagonalKDE, PenalizedGaussianMixture
from .gp import condition, predict_det, predict_gauss, predict_mean_loo
from .kernels import Hyperparams, ard_kernel, downdate_inverse, expected_k, expected_kk
from .mixture import ModelState
from .objectives import evaluate_objective
from .optim import cg_minimize

__all__ = ["CHECKS", "run_selftest"]


def _rel(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def _hyp(rng, d, stochastic):
    return Hyperparams(rng.uniform(0.5, 2.0, d), rng.uniform(0.5, 2.0), rng.uniform(0.05, 0.2),
                       rng.uniform(0.05, 0.3, d) if stochastic else np.zeros(d))


def check_kernel_values():
    hyp = Hyperparams([4.0], 2.0, 1e-3)
    got = ard_kernel([0.0], [2.0], hyp)
    return abs(got - 2.0 * np.exp(-0.5)) < 1e-12, f"k = {got:.15g}"


def check_downdate():
    rng = np.random.default_rng(1)
    B = rng.standard_normal((6, 6))
    K = B @ B.T + 6 * np.eye(6)
    err = max(np.max(np.abs(downdate_inverse(np.linalg.inv(K), i)
                            - np.linalg.inv(np.delete(np.delete(K, i, 0), i, 1)))) for i in range(6))
    return err <= 1e-10, f"max dev {err:.2e}"


def check_expected_kernels():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((4, 2))
    hyp = _hyp(rng, 2, True)
    xs = rng.standard_normal(2)
    S = xs + np.sqrt(hyp.latent_var) * rng.standard_normal((200_000, 2))
    k = hyp.signal_var * np.exp(-0.5 * np.sum((S[:, None, :] - X) ** 2 / hyp.lengthscales_sq, -1))
    e1 = _rel(expected_k(X, xs, hyp), k.mean(0))
    e2 = _rel(expected_kk(X, xs, hyp), k.T @ k / len(S))
    return e1 < 0.02 and e2 < 0.05, f"rel err k {e1:.2e}, kk {e2:.2e}"


def check_deterministic_limit():
    rng = np.random.default_rng(3)
    X, Z = rng.standard_normal((6, 2)), rng.standard_normal((6, 3))
    hyp = _hyp(rng, 2, False).with_latent_var(np.full(2, 1e-12))
    gp = condition(X, Z, hyp)
    xs = rng.standard_normal(2)
    g, d = predict_gauss(gp, xs), predict_det(gp, xs)
    err = max(np.max(np.abs(g.mean - d.mean)), np.max(np.abs(g.covariance_matrix() - d.covariance_matrix())))
    return err <= 1e-6, f"max dev {err:.2e}"


def check_loo_mean():
    rng = np.random.default_rng(4)
    X, Z = rng.standard_normal((7, 2)), rng.standard_normal((7, 3))
    hyp = _hyp(rng, 2, False)
    gp = condition(X, Z, hyp)
    xs = rng.standard_normal(2)
    err = max(np.max(np.abs(predict_mean_loo(gp, xs, i)
                            - predict_det(condition(np.delete(X, i, 0), np.delete(Z, i, 0), hyp), xs).mean))
              for i in range(7))
    return err <= 1e-8, f"max dev {err:.2e}"


def check_gradients():
    rng = np.random.default_rng(5)
    X, Z = rng.standard_normal((6, 2)), rng.standard_normal((6, 3))
    worst = 0.0
    for stochastic in (False, True):
        theta = _hyp(rng, 2, stochastic).to_log_vector(stochastic)
        for kind, P in (("lz", None), ("loo", None), ("lpo", 2)):
            ov = evaluate_objective(kind, X, theta, Z, stochastic, P)
            subsets = None
            if kind == "lpo":
                from .objectives import select_lpo_subsets
                subsets = select_lpo_subsets(ModelState(X, Hyperparams.from_log_vector(theta, 2, stochastic), Z), P)
            x0 = np.concatenate([X.ravel(), theta])
            fd = np.empty_like(x0)
            for k in range(x0.size):
                e = np.zeros_like(x0)
                e[k] = 1e-5
                f = [evaluate_objective(kind, (x0 + s * e)[:12].reshape(6, 2), (x0 + s * e)[12:], Z,
                                        stochastic, P, subsets, wrt=()).value for s in (1, -1)]
                fd[k] = (f[0] - f[1]) / 2e-5
            worst = max(worst, _rel(np.concatenate([ov.grad_latents.ravel(), ov.grad_hyp]), fd))
    return worst <= 1e-4, f"worst rel err {worst:.2e}"


def check_cg_quadratic():
    rng = np.random.default_rng(6)
    B = rng.standard_normal((5, 5))
    Q = B @ B.T + np.eye(5)
    x, tr = cg_minimize(lambda x: (0.5 * x @ Q @ x, Q @ x), rng.standard_normal(5), max_steps=7, gtol=1e-8)
    g = float(np.linalg.norm(Q @ x))
    return g <= 1e-8, f"|g| = {g:.2e} after {tr.n_steps} steps"


def check_kde_two_points():
    kde = DiagonalKDE().fit(np.array([[0.0], [1.0]]))
    grid = np.exp(np.linspace(np.log(1e-3), np.log(10.0), 200_001))
    vals = [DiagonalKDE._loo(np.array([[0.0], [1.0]]), np.log([w]), need_hessian=False)[0] for w in grid[::100]]
    coarse = grid[::100][int(np.argmax(vals))]
    fine = grid[(grid > coarse / 1.01) & (grid < coarse * 1.01)]
    vals = [DiagonalKDE._loo(np.array([[0.0], [1.0]]), np.log([w]), need_hessian=False)[0] for w in fine]
    best = fine[int(np.argmax(vals))]
    err = abs(kde.widths_[0] - best) / best
    return err <= 1e-3, f"width {kde.widths_[0]:.6g} vs grid {best:.6g}"


def check_gm_entropy():
    rng = np.random.default_rng(7)
    gm = PenalizedGaussianMixture(1).fit(rng.standard_normal((250, 3)))
    got = gm.score(rng.standard_normal((20_000, 3)))
    ref = -1.5 * np.log(2 * np.pi) - 1.5
    return abs(got - ref) <= 0.1, f"{got:.4f} vs {ref:.4f}"


CHECKS = {
    "kernel hand value": check_kernel_values,
    "inverse downdate": check_downdate,
    "expected kernels vs Monte Carlo": check_expected_kernels,
    "deterministic limit": check_deterministic_limit,
    "leave-one-out mean": check_loo_mean,
    "objective gradients vs finite differences": check_gradients,
    "CG on a quadratic": check_cg_quadratic,
    "KDE two-point width": check_kde_two_points,
    "GM entropy": check_gm_entropy,
}


def run_selftest(out=print):
    """Run every check; returns ``True`` when all pass."""
    ok_all = True
    for name, fn in CHECKS.items():
        try:
            ok, detail = fn()
        except Exception as exc:  # noqa: BLE001 - report and continue
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        ok_all &= bool(ok)
        out(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return ok_all
