"""Numeric kernels shared by the measure, generation, and inference layers.

Plain loops and math.* only, so the same source runs compiled (numba) or
interpreted; see _accel. Log-domain throughout: values below LOG_FLOOR are
treated as impossible states by callers.
"""

import math

import numpy as np

from ._accel import jit

LOG_FLOOR = -700.0
_U_EDGE = 1e-12  # angular auxiliary must stay inside (0, pi)
_PI = math.pi


@jit
def log_zolotarev_a(sigma, u):
    # log A(sigma, u) for u in the open interval (0, pi)
    c = 1.0 - sigma
    return (c * math.log(math.sin(c * u))
            + sigma * math.log(math.sin(sigma * u))
            - math.log(math.sin(u))) / c


@jit
def log_stable_ext_from_log(sigma, lx, u):
    # log of the joint density f(x, u) of a unit positive stable variable and
    # its angular auxiliary; x passed as lx = log x. Integrating u over (0, pi)
    # recovers the stable density.
    if u <= _U_EDGE or u >= _PI - _U_EDGE:
        return -math.inf
    la = log_zolotarev_a(sigma, u)
    expo = la - (sigma / (1.0 - sigma)) * lx
    if expo > 690.0:
        return -math.inf
    return (math.log(sigma) - math.log(1.0 - sigma) - math.log(_PI)
            - lx / (1.0 - sigma) + la - math.exp(expo))


@jit
def log_stable_ext(sigma, x, u):
    if x <= 0.0:
        return -math.inf
    return log_stable_ext_from_log(sigma, math.log(x), u)


@jit
def log_total_mass_ext(alpha, sigma, tau, t, u):
    # log g(t, u): total-mass density with the angular auxiliary retained.
    # Scaled, exponentially tilted stable law: x = t * theta^(-1/sigma),
    # tilt exp(tau^sigma * theta - tau * t), theta = alpha / sigma.
    if t <= 0.0:
        return -math.inf
    theta = alpha / sigma
    lc = -math.log(theta) / sigma
    lx = math.log(t) + lc
    tilt = theta * tau ** sigma - tau * t
    return lc + log_stable_ext_from_log(sigma, lx, u) + tilt


# ---------------------------------------------------------------------------
# adaptive thinning for the truncated weight process
# intensity  rho_c(w) = coef * w^(-1-sigma) * e^(-tau w)  on (eps, inf),
# coef = alpha / Gamma(1 - sigma); the envelope anchored at the latest point t
# freezes the power factor at t, leaving an exponential (tau > 0) or the exact
# power law (tau == 0), both invertible.
# ---------------------------------------------------------------------------

@jit
def _env_tail(coef, sigma, tau, t):
    # envelope mass on (t, inf)
    if tau > 0.0:
        return coef * t ** (-1.0 - sigma) * math.exp(-tau * t) / tau
    return coef / sigma * t ** (-sigma)


@jit
def _env_next(coef, sigma, tau, t, r):
    # next envelope point t' with integral_t^t' envelope = r (r < tail mass)
    if tau > 0.0:
        lq = math.log(r * tau / coef) + (1.0 + sigma) * math.log(t) + tau * t
        if lq >= 0.0:
            return -1.0
        return t - math.log1p(-math.exp(lq)) / tau
    base = t ** (-sigma) - r * sigma / coef
    if base <= 0.0:
        return -1.0
    return base ** (-1.0 / sigma)


@jit
def thin_buffered(alpha, sigma, tau, t0, exp_buf, unif_buf, out):
    """One buffered pass of the thinning loop.

    Consumes exp_buf[i], unif_buf[i] pairwise per envelope step. Returns
    (n_out, t_last, steps_used, done): done=False means the buffers ran dry
    and the caller should refill and continue from t_last.
    """
    coef = alpha / math.exp(math.lgamma(1.0 - sigma))
    t = t0
    n_out = 0
    n = exp_buf.shape[0]
    for i in range(n):
        r = exp_buf[i]
        if r >= _env_tail(coef, sigma, tau, t):
            return n_out, t, i + 1, True
        tp = _env_next(coef, sigma, tau, t, r)
        if tp <= t:
            return n_out, t, i + 1, True
        if tau == 0.0 or unif_buf[i] < (tp / t) ** (-1.0 - sigma):
            out[n_out] = tp
            n_out += 1
        t = tp
    return n_out, t, n, False


# ---------------------------------------------------------------------------
# collapsed joint likelihood and samplers
# ---------------------------------------------------------------------------

@jit
def gamma_norm_term(a, n, b, tt):
    """log[G(a + n, b + tt) / G(a, b)] for the Gamma-integral normalizer
    G(a, b) = Gamma(a) / b^a."""
    return (math.lgamma(a + n) - (a + n) * math.log(b + tt)
            - math.lgamma(a) + a * math.log(b))


@jit
def g_terms_sum(n_lm, T, lam_a, lam_b, crm):
    """Sum of tile interaction terms; the crm flag takes the
    lambda -> infinity reduction where every term collapses to -T_l T_m."""
    K = T.shape[0]
    total = 0.0
    for l in range(K):
        for m in range(K):
            tt = T[l] * T[m]
            if crm:
                total -= tt
            else:
                total += gamma_norm_term(lam_a, n_lm[l, m], lam_b, tt)
    return total


@jit
def log_joint_core(sigma, tau, alpha, s, t, u, beta0, lam_a, lam_b, crm,
                   k_l, n_l, n_lm, nvals, ncnt):
    """All parameter-dependent terms of the collapsed log joint.

    Leaves out -sum log A_ij!, which is constant in the parameters. The
    Pochhammer sum over vertices enters through the histogram (nvals, ncnt)
    of endpoint counts. Empty blocks must carry s[l] == 0.
    """
    K = alpha.shape[0]
    alpha_total = 0.0
    for l in range(K):
        if alpha[l] <= 0.0:
            return -math.inf
        alpha_total += alpha[l]
    if sigma <= 0.0 or sigma >= 1.0 or tau < 0.0 or beta0 <= 0.0:
        return -math.inf

    lp = (math.lgamma(beta0) - K * math.lgamma(beta0 / K)
          - (beta0 - 1.0) * math.log(alpha_total))
    for l in range(K):
        lp += (beta0 / K - 1.0) * math.log(alpha[l])
    lp += math.log(beta0) - beta0
    if not crm:
        if lam_a <= 0.0 or lam_b <= 0.0:
            return -math.inf
        lp += math.log(lam_a) - lam_a + math.log(lam_b) - lam_b

    lg1ms = math.lgamma(1.0 - sigma)
    for l in range(K):
        lp += log_total_mass_ext(alpha[l], sigma, tau, t[l], u[l])
        if k_l[l] > 0:
            if s[l] <= 0.0:
                return -math.inf
            shape = n_l[l] - k_l[l] * sigma
            lp += (k_l[l] * math.log(alpha[l])
                   + (shape - 1.0) * math.log(s[l])
                   - math.lgamma(shape) - tau * s[l])
    for v in range(nvals.shape[0]):
        lp += ncnt[v] * (math.lgamma(nvals[v] - sigma) - lg1ms)

    T = np.empty(K)
    for l in range(K):
        T[l] = s[l] + t[l]
    lp += g_terms_sum(n_lm, T, lam_a, lam_b, crm)
    return lp


# transformed-coordinate layout:
#   x[0] = logit sigma, x[1] = log tau,
#   x[2+4l .. 5+4l] = (log alpha_l, log s_l, log t_l, logit(u_l / pi)),
#   x[2+4K] = log beta0, x[3+4K] = log lambda_a, x[4+4K] = log lambda_b

@jit
def mh_target(x, K, k_l, n_l, n_lm, nvals, ncnt, crm, mask):
    """Log target in transformed coordinates: joint plus the log Jacobian of
    every sampled coordinate. Out-of-range proposals score -inf."""
    D = x.shape[0]
    for d in range(D):
        if mask[d] and (x[d] > 690.0 or x[d] < -690.0):
            return -math.inf
    sig_e = 1.0 / (1.0 + math.exp(-x[0]))
    tau = math.exp(x[1])
    alpha = np.empty(K)
    s = np.empty(K)
    t = np.empty(K)
    u = np.empty(K)
    for l in range(K):
        alpha[l] = math.exp(x[2 + 4 * l])
        s[l] = math.exp(x[3 + 4 * l]) if k_l[l] > 0 else 0.0
        t[l] = math.exp(x[4 + 4 * l])
        u[l] = _PI / (1.0 + math.exp(-x[5 + 4 * l]))
    beta0 = math.exp(x[2 + 4 * K])
    lam_a = math.exp(x[3 + 4 * K])
    lam_b = math.exp(x[4 + 4 * K])

    lp = log_joint_core(sig_e, tau, alpha, s, t, u, beta0, lam_a, lam_b, crm,
                        k_l, n_l, n_lm, nvals, ncnt)
    if math.isnan(lp) or lp == -math.inf:
        return -math.inf

    jac = 0.0
    for d in range(D):
        if not mask[d]:
            continue
        if d == 0:
            jac += math.log(sig_e) + math.log(1.0 - sig_e)
        elif d >= 2 and d < 2 + 4 * K and (d - 2) % 4 == 3:
            e = 1.0 / (1.0 + math.exp(-x[d]))
            jac += math.log(_PI) + math.log(e) + math.log(1.0 - e)
        else:
            jac += x[d]
    return lp + jac


@jit
def mh_sweep_core(x, mask, K, k_l, n_l, n_lm, nvals, ncnt, crm,
                  step_size, normals, unifs):
    """Joint random-walk Metropolis over the masked coordinates of x.

    normals has one row of D entries per step; unifs one entry per step.
    Updates x in place; returns (final log target, acceptance count).
    """
    D = x.shape[0]
    steps = unifs.shape[0]
    f_cur = mh_target(x, K, k_l, n_l, n_lm, nvals, ncnt, crm, mask)
    xp = np.empty(D)
    acc = 0
    for st in range(steps):
        for d in range(D):
            if mask[d]:
                xp[d] = x[d] + step_size * normals[st * D + d]
            else:
                xp[d] = x[d]
        f_new = mh_target(xp, K, k_l, n_l, n_lm, nvals, ncnt, crm, mask)
        if f_new > -math.inf and math.log(unifs[st]) < f_new - f_cur:
            for d in range(D):
                x[d] = xp[d]
            f_cur = f_new
            acc += 1
    return f_cur, acc


@jit
def gibbs_sweep_core(A, z, w, alpha, s, t, n_lm, k_l, n_l, n_i,
                     lam_a, lam_b, crm, unifs):
    """One fixed-order Gibbs sweep over block labels given imputed weights.

    The conditional for vertex i is proportional to alpha_c times the tile
    interaction terms with vertex i's endpoint counts and weight mass moved
    into block c. Updates z, s, n_lm, k_l, n_l in place.
    """
    k = z.shape[0]
    K = alpha.shape[0]
    r_out = np.empty(K, dtype=np.int64)
    r_in = np.empty(K, dtype=np.int64)
    T = np.empty(K)
    logw = np.empty(K)
    for i in range(k):
        b = z[i]
        for l in range(K):
            r_out[l] = 0
            r_in[l] = 0
        self_c = A[i, i]
        for j in range(k):
            if j != i:
                r_out[z[j]] += A[i, j]
                r_in[z[j]] += A[j, i]
        # detach vertex i
        for m in range(K):
            n_lm[b, m] -= r_out[m]
            n_lm[m, b] -= r_in[m]
        n_lm[b, b] -= self_c
        s[b] -= w[i]
        if k_l[b] == 1:
            s[b] = 0.0  # block becomes empty; kill float residue
        k_l[b] -= 1
        n_l[b] -= n_i[i]

        for c in range(K):
            # tentative attach to c
            for m in range(K):
                n_lm[c, m] += r_out[m]
                n_lm[m, c] += r_in[m]
            n_lm[c, c] += self_c
            s_c_old = s[c]
            s[c] = s_c_old + w[i]
            for l in range(K):
                T[l] = s[l] + t[l]
            logw[c] = math.log(alpha[c]) + g_terms_sum(n_lm, T, lam_a, lam_b, crm)
            s[c] = s_c_old
            for m in range(K):
                n_lm[c, m] -= r_out[m]
                n_lm[m, c] -= r_in[m]
            n_lm[c, c] -= self_c

        mx = logw[0]
        for c in range(1, K):
            if logw[c] > mx:
                mx = logw[c]
        total = 0.0
        for c in range(K):
            logw[c] = math.exp(logw[c] - mx)
            total += logw[c]
        draw = unifs[i] * total
        cum = 0.0
        pick = K - 1
        for c in range(K):
            cum += logw[c]
            if draw < cum:
                pick = c
                break
        # commit
        for m in range(K):
            n_lm[pick, m] += r_out[m]
            n_lm[m, pick] += r_in[m]
        n_lm[pick, pick] += self_c
        s[pick] += w[i]
        k_l[pick] += 1
        n_l[pick] += n_i[i]
        z[i] = pick

@jit
def icm_sweep_core(A, z, w, alpha, s, t, n_lm, k_l, n_l, n_i,
                   lam_a, lam_b, crm):
    """One conditional-mode sweep: like gibbs_sweep_core but each vertex
    takes the argmax block. Returns the number of changed labels."""
    k = z.shape[0]
    K = alpha.shape[0]
    r_out = np.empty(K, dtype=np.int64)
    r_in = np.empty(K, dtype=np.int64)
    T = np.empty(K)
    logw = np.empty(K)
    changed = 0
    for i in range(k):
        b = z[i]
        for l in range(K):
            r_out[l] = 0
            r_in[l] = 0
        self_c = A[i, i]
        for j in range(k):
            if j != i:
                r_out[z[j]] += A[i, j]
                r_in[z[j]] += A[j, i]
        for m in range(K):
            n_lm[b, m] -= r_out[m]
            n_lm[m, b] -= r_in[m]
        n_lm[b, b] -= self_c
        s[b] -= w[i]
        if k_l[b] == 1:
            s[b] = 0.0
        k_l[b] -= 1
        n_l[b] -= n_i[i]

        for c in range(K):
            for m in range(K):
                n_lm[c, m] += r_out[m]
                n_lm[m, c] += r_in[m]
            n_lm[c, c] += self_c
            s_c_old = s[c]
            s[c] = s_c_old + w[i]
            for l in range(K):
                T[l] = s[l] + t[l]
            logw[c] = math.log(alpha[c]) + g_terms_sum(n_lm, T, lam_a, lam_b, crm)
            s[c] = s_c_old
            for m in range(K):
                n_lm[c, m] -= r_out[m]
                n_lm[m, c] -= r_in[m]
            n_lm[c, c] -= self_c

        pick = 0
        for c in range(1, K):
            if logw[c] > logw[pick]:
                pick = c
        for m in range(K):
            n_lm[pick, m] += r_out[m]
            n_lm[m, pick] += r_in[m]
        n_lm[pick, pick] += self_c
        s[pick] += w[i]
        k_l[pick] += 1
        n_l[pick] += n_i[i]
        if pick != b:
            changed += 1
        z[i] = pick
    return changed
