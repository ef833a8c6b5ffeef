#!/usr/bin/env python3
"""Writes guided_k3.txt: reference outputs of the guided sampler on a
three-step schedule with a closed-form Gaussian denoiser.

Everything is evaluated with plain Python floats, one scalar at a time, so the
fixture does not share code or vectorization order with the C++ library.
"""
import math
import random
import sys

BETAS = [0.1, 0.2, 0.3]
ROWS, COLS = 4, 2
ACTION_MIN = [-2.0, -1.0]
ACTION_MAX = [2.0, 3.0]
CLOSEST = [0.3, 1.2]

rng = random.Random(20240611)
MEAN = [[rng.uniform(-0.5, 0.5) for _ in range(COLS)] for _ in range(ROWS)]
STD = [[rng.uniform(0.2, 0.9) for _ in range(COLS)] for _ in range(ROWS)]

alpha = [1.0 - b for b in BETAS]
alpha_bar = []
p = 1.0
for a in alpha:
    p *= a
    alpha_bar.append(p)


def abar(k):
    return 1.0 if k == 0 else alpha_bar[k - 1]


def sigma_ddpm(k):
    if k == 1:
        return 0.0
    return math.sqrt(BETAS[k - 1] * (1.0 - abar(k - 1)) / (1.0 - abar(k)))


def gain(k, i, j):
    ab = abar(k)
    s2 = STD[i][j] ** 2
    return math.sqrt(ab) * s2 / (ab * s2 + 1.0 - ab)


def eps_hat(A, k):
    ab = abar(k)
    out = [[0.0] * COLS for _ in range(ROWS)]
    for i in range(ROWS):
        for j in range(COLS):
            m = MEAN[i][j]
            post = m + gain(k, i, j) * (A[i][j] - math.sqrt(ab) * m)
            out[i][j] = (A[i][j] - math.sqrt(ab) * post) / math.sqrt(1.0 - ab)
    return out


def eps_jacobian_diag(k, i, j):
    ab = abar(k)
    return (1.0 - math.sqrt(ab) * gain(k, i, j)) / math.sqrt(1.0 - ab)


def clip(x):
    return max(-1.0, min(1.0, x))


def to_world(x, j):
    half = 0.5 * (ACTION_MAX[j] - ACTION_MIN[j])
    return (x + 1.0) * half + ACTION_MIN[j]


def world_cost_grad(W, q_star):
    """Per-waypoint hinge gradient on both coordinates."""
    g = [[0.0] * COLS for _ in range(ROWS)]
    for i in range(ROWS):
        dx = W[i][0] - CLOSEST[0]
        dy = W[i][1] - CLOSEST[1]
        d = math.hypot(dx, dy)
        if d > q_star:
            continue
        g[i][0] = -dx / d
        g[i][1] = -dy / d
    return g


def guidance(A, k, eps, case):
    half = [0.5 * (ACTION_MAX[j] - ACTION_MIN[j]) for j in range(COLS)]
    if case["mode"] == "noisy_baseline":
        W = [[to_world(A[i][j], j) for j in range(COLS)] for i in range(ROWS)]
        g = world_cost_grad(W, case["q_star"])
        return [[g[i][j] * half[j] for j in range(COLS)] for i in range(ROWS)]
    ab = abar(k)
    clean = [[(A[i][j] - math.sqrt(1.0 - ab) * eps[i][j]) / math.sqrt(ab) for j in range(COLS)] for i in range(ROWS)]
    if case["clamp"]:
        clean = [[clip(v) for v in row] for row in clean]
    W = [[to_world(clean[i][j], j) for j in range(COLS)] for i in range(ROWS)]
    g = world_cost_grad(W, case["q_star"])
    u = [[g[i][j] * half[j] for j in range(COLS)] for i in range(ROWS)]
    out = [[0.0] * COLS for _ in range(ROWS)]
    for i in range(ROWS):
        for j in range(COLS):
            if case["grad_mode"] == "frozen_eps":
                out[i][j] = u[i][j] / math.sqrt(ab)
            else:
                out[i][j] = (u[i][j] - math.sqrt(1.0 - ab) * eps_jacobian_diag(k, i, j) * u[i][j]) / math.sqrt(ab)
    return out


def visit_order(case):
    K = len(BETAS)
    if case["kind"] == "ddpm":
        return list(range(K, 0, -1))
    S = case["steps"]
    return sorted({(i * K) // S for i in range(1, S + 1)}, reverse=True)


def run(case, noise):
    ts = visit_order(case)
    A = [row[:] for row in noise[0]]
    for n, k in enumerate(ts):
        z = noise[n + 1]
        k_prev = ts[n + 1] if n + 1 < len(ts) else 0
        eps = eps_hat(A, k)
        nxt = [[0.0] * COLS for _ in range(ROWS)]
        if case["kind"] == "ddpm":
            a = alpha[k - 1]
            ab = abar(k)
            sig = sigma_ddpm(k)
            for i in range(ROWS):
                for j in range(COLS):
                    mu = (A[i][j] - (1.0 - a) / math.sqrt(1.0 - ab) * eps[i][j]) / math.sqrt(a)
                    nxt[i][j] = mu + sig * z[i][j]
        else:
            ab = abar(k)
            abp = abar(k_prev)
            sig = case["eta"] * math.sqrt((1.0 - abp) / (1.0 - ab) * (1.0 - ab / abp))
            dir_var = max(1.0 - abp - sig * sig, 0.0)
            for i in range(ROWS):
                for j in range(COLS):
                    c = (A[i][j] - math.sqrt(1.0 - ab) * eps[i][j]) / math.sqrt(ab)
                    e = eps[i][j]
                    if case["clamp"]:
                        c = clip(c)
                        e = (A[i][j] - math.sqrt(ab) * c) / math.sqrt(1.0 - ab)
                    nxt[i][j] = math.sqrt(abp) * c + math.sqrt(dir_var) * e + sig * z[i][j]
        last = n + 1 == len(ts)
        if not (case["skip_last"] and last):
            g = guidance(A, k, eps, case)
            for i in range(ROWS):
                for j in range(COLS):
                    nxt[i][j] -= case["rho"] * g[i][j]
        A = nxt
    return A


CASES = [
    dict(name="ddpm_frozen", kind="ddpm", steps=3, eta=0.0, mode="clean_estimate", grad_mode="frozen_eps",
         skip_last=0, clamp=1, rho=0.05, q_star=1.5),
    dict(name="ddpm_frozen_skip_last", kind="ddpm", steps=3, eta=0.0, mode="clean_estimate", grad_mode="frozen_eps",
         skip_last=1, clamp=1, rho=0.05, q_star=1.5),
    dict(name="ddpm_full_vjp_noclamp", kind="ddpm", steps=3, eta=0.0, mode="clean_estimate", grad_mode="full_vjp",
         skip_last=0, clamp=0, rho=0.08, q_star=2.0),
    dict(name="ddpm_noisy_baseline", kind="ddpm", steps=3, eta=0.0, mode="noisy_baseline", grad_mode="frozen_eps",
         skip_last=0, clamp=1, rho=0.05, q_star=1.5),
    dict(name="ddim_two_steps", kind="ddim", steps=2, eta=0.5, mode="clean_estimate", grad_mode="frozen_eps",
         skip_last=0, clamp=1, rho=0.05, q_star=1.5),
]


def fmt(values):
    return " ".join(repr(float(v)) for v in values)


def flat(M):
    return [v for row in M for v in row]


def main(path):
    lines = ["# guided sampler reference, three-step schedule, Gaussian denoiser",
             "betas " + fmt(BETAS),
             "shape %d %d" % (ROWS, COLS),
             "mean " + fmt(flat(MEAN)),
             "std " + fmt(flat(STD)),
             "action_min " + fmt(ACTION_MIN),
             "action_max " + fmt(ACTION_MAX),
             "closest " + fmt(CLOSEST)]
    for case in CASES:
        steps = len(visit_order(case))
        noise = [[[rng.gauss(0.0, 1.0) for _ in range(COLS)] for _ in range(ROWS)] for _ in range(steps + 1)]
        out = run(case, noise)
        lines.append("case " + case["name"])
        for key in ("kind", "steps", "eta", "mode", "grad_mode", "skip_last", "clamp", "rho", "q_star"):
            lines.append("%s %s" % (key, case[key]))
        lines.append("noise %d" % len(noise))
        for z in noise:
            lines.append(fmt(flat(z)))
        lines.append("result " + fmt(flat(out)))
        lines.append("end")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "guided_k3.txt")
