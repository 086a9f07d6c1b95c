"""Self-check suite behind ``lrmf verify``.

Each check is a zero-argument callable returning ``(passed, detail)``.
Sizes are kept small enough that the whole suite runs in well under a minute.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from . import closed_forms as cf
from .bounds import lb_multi, lb_single
from .factorizations import SINGLE_EPOCH, bisr, factorize
from .metrics import (
    ParticipationSchema,
    max_se,
    mean_se,
    multi_error,
    sens_lower_frobenius,
    sensitivity_multi,
    sensitivity_single,
)
from .noise import NoiseStream, Objective, SimConfig, dense_correlated_noise, dp_sgd_run
from .schedules import DECAYS, make_schedule
from .trimatrix import prefix_sum_matrix, toeplitz_dense
from .workload import apply_workload, build_workload

CHECKS: dict[str, Callable[[], tuple[bool, str]]] = {}


def check(name):
    def deco(fn):
        CHECKS[name] = fn
        return fn
    return deco


def _sched(kind, n, beta):
    return make_schedule(kind, n, 1.0 if kind == "constant" else beta)


@check("c_alpha_squared")
def _c_alpha_squared():
    worst = 0.0
    for n, beta in [(256, 0.1), (512, 1 / math.e)]:
        p = cf.ExpDecayParams.from_beta(n, beta)
        c = cf.c_alpha(p).coeffs
        sq = np.convolve(c, c)[:n]
        worst = max(worst, float(np.max(np.abs(sq - p.schedule_values()))))
    return worst <= 1e-9, f"max residual {worst:.2e}"


@check("exp_sqrt_closed_form")
def _exp_sqrt():
    worst = 0.0
    for beta in (0.1, 0.5):
        p = cf.ExpDecayParams.from_beta(256, beta)
        s = cf.exp_workload_sqrt(p).to_dense()
        si = cf.exp_workload_inv_sqrt(p).to_dense()
        a = cf.exp_workload(p).array
        worst = max(worst, float(np.max(np.abs(s @ s - a))), float(np.max(np.abs(s @ si - np.eye(256)))))
    return worst <= 1e-9, f"max residual {worst:.2e}"


@check("conv_r_rtilde")
def _conv():
    r, rt = cf.prefix_sqrt_coeffs(128), cf.prefix_inv_sqrt_coeffs(128)
    e = np.zeros(128)
    e[0] = 1.0
    dev = float(np.max(np.abs(np.convolve(r, rt)[:128] - e)))
    return dev <= 1e-12, f"max deviation {dev:.2e}"


@check("factorization_residuals")
def _residuals():
    worst = 0.0
    for kind in DECAYS:
        for n in (64, 256):
            w = build_workload(_sched(kind, n, 0.05))
            for strat in SINGLE_EPOCH:
                worst = max(worst, factorize(w, strat).residual / n)
    return worst <= 1e-9, f"max residual/n {worst:.2e}"


@check("identity_left_errors")
def _identity_left():
    n = 1024
    f = factorize(build_workload(make_schedule("exponential", n, 0.1)), "identity_left")
    dev = max(abs(max_se(f) - math.sqrt(n)), abs(mean_se(f) - math.sqrt(n)))
    return dev <= 1e-10, f"deviation from sqrt(n) {dev:.2e}"


@check("identity_right_meanse")
def _identity_right():
    n, dev = 1024, 0.0
    for beta in (0.1, 0.5):
        f = factorize(build_workload(make_schedule("exponential", n, beta)), "identity_right")
        a2 = cf.ExpDecayParams.from_beta(n, beta).alpha ** 2
        formula = math.sqrt((a2 ** (n + 1) - a2 * (n + 1) + n) / (n * (1 - a2) ** 2))
        dev = max(dev, abs(mean_se(f) - formula))
    return dev <= 1e-10, f"deviation {dev:.2e}"


@check("lower_bound_dominance")
def _dominance():
    violations = 0
    for kind in ("constant",) + DECAYS:
        for beta in (0.05, 1 / math.e):
            s = _sched(kind, 256, beta)
            w = build_workload(s)
            lb = lb_single(s)
            facts = [factorize(w, st) for st in SINGLE_EPOCH] + [bisr(w, 16, base) for base in ("prefix", "lr")]
            for f in facts:
                violations += max_se(f) < lb.lb_maxse - 1e-12
                violations += mean_se(f) < lb.lb_meanse - 1e-12
    return violations == 0, f"{violations} violations"


@check("multi_sensitivity_oracle")
def _multi_oracle():
    ok = abs(sensitivity_multi(prefix_sum_matrix(4), ParticipationSchema.minsep(4, 2, 2), "exact") - math.sqrt(10)) < 1e-12
    worst = 0.0
    for n in (12, 16):
        for b in (2, 3, 5):
            schema = ParticipationSchema.minsep(n, b)
            for coeffs in (np.ones(n), cf.prefix_sqrt_coeffs(n)):
                c = toeplitz_dense(coeffs)
                ex = sensitivity_multi(c, schema, "exact")
                worst = max(worst, abs(ex - sensitivity_multi(c, schema, "heuristic")))
                ok &= sens_lower_frobenius(c, b) <= ex + 1e-12
    return bool(ok and worst <= 1e-12), f"max exact/heuristic gap {worst:.2e}"


@check("streaming_noise_equivalence")
def _stream():
    w = build_workload(make_schedule("exponential", 128, 0.1))
    f = bisr(w, 8, "prefix")
    m = f.noise_matrix()
    stream = NoiseStream(m, 16, 1.0, seed=1234, mode="banded")
    rows, longest = [], 0
    for _ in range(128):
        rows.append(stream.next_noise())
        longest = max(longest, len(stream.buffer))
    dev = float(np.max(np.abs(np.stack(rows) - dense_correlated_noise(m, 16, 1.0, 1234))))
    return dev <= 1e-8 and longest <= 8, f"max deviation {dev:.2e}, buffer peak {longest}"


@check("monte_carlo_meanse")
def _monte_carlo():
    n, draws = 64, 10_000
    w = build_workload(make_schedule("exponential", n, 0.1))
    worst = 0.0
    for strat in ("lr_aware", "prefix_sqrt"):
        f = factorize(w, strat)
        sigma = sensitivity_single(f.C)
        noise = np.stack(list(NoiseStream(f.noise_matrix(), draws, sigma, seed=99)))
        err = apply_workload(w.chi, noise)
        emp = math.sqrt(np.mean(np.sum(err ** 2, axis=0)) / n)
        worst = max(worst, abs(emp / mean_se(f) - 1))
    return worst <= 0.05, f"max relative gap {worst:.3%}"


@check("simulator_degeneracy")
def _sim():
    n, eta = 32, 0.05
    w = build_workload(make_schedule("constant", n))
    f = factorize(w, "prefix_sqrt")
    cfg = SimConfig(dim=3, samples=64, batch=8, eta=eta, zeta=1e6, sigma_eps_delta=0.0)
    traj = dp_sgd_run(cfg, f)
    # plain SGD reference
    obj = Objective(cfg)
    theta = np.zeros(3)
    dev1 = 0.0
    for i in range(n):
        idx = (np.arange(cfg.batch) + i * cfg.batch) % cfg.samples
        theta = theta - eta * obj.per_example_grads(theta, idx).mean(axis=0)
        dev1 = max(dev1, float(np.max(np.abs(theta - traj.theta[i]))))
    w2 = build_workload(make_schedule("cosine", n, 0.1))
    cfg2 = SimConfig(dim=3, samples=64, batch=8, eta=eta, zeta=1e6, sigma_eps_delta=0.0, curvature=[0.0] * 3)
    traj2 = dp_sgd_run(cfg2, factorize(w2, "lr_aware"))
    obj2 = Objective(cfg2)
    g = np.stack([obj2.per_example_grads(np.zeros(3), (np.arange(8) + i * 8) % 64).mean(axis=0) for i in range(n)])
    dev2 = float(np.max(np.abs(traj2.theta + eta * (w2.a_chi.array @ g))))
    return dev1 <= 1e-12 and dev2 <= 1e-10, f"sgd dev {dev1:.1e}, stacking dev {dev2:.1e}"


@check("multi_lower_bound_dominance")
def _multi_lb():
    n, b = 256, 32
    violations = 0
    for kind in DECAYS:
        s = make_schedule(kind, n, 0.05)
        w = build_workload(s)
        schema = ParticipationSchema.minsep(n, b)
        lb = lb_multi(s, schema)
        for base in ("prefix", "lr"):
            f = bisr(w, 16, base)
            violations += multi_error(f.B, f.C, schema, "heuristic") < lb - 1e-12
    return violations == 0, f"{violations} violations"


def run_checks(names=None) -> list[dict]:
    out = []
    for name, fn in CHECKS.items():
        if names and name not in names:
            continue
        try:
            passed, detail = fn()
        except Exception as exc:  # a crashing check is a failing check
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        out.append({"check": name, "passed": bool(passed), "detail": detail})
    return out
