# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: counter-based Gaussian draws and the per-run decision loop.

Mirrors ``rng.standard_normals`` and ``_pyloop.run_market`` operation for
operation on raw arrays.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, log1p, cos, fabs

cnp.import_array()

ctypedef unsigned long long u64

cdef u64 GAMMA = 0x9E3779B97F4A7C15ULL
cdef double INV_2_53 = 1.0 / 9007199254740992.0
cdef double TWO_PI = 6.283185307179586

cdef enum:
    P_LF = 0
    P_UCB = 1
    P_HYBRID = 2
    P_LF2S = 3
    P_ROONEY = 4
    P_ROONEY_THEN_LF = 5
    P_WARMSTART = 6

cdef enum:
    S_NONE = 0
    S_INDEX = 1
    S_COST_SAVING = 2

cdef enum:
    R_DET = 0
    R_L = 1
    R_BAYES = 2

cdef enum:
    REFRESH_EVERY = 256


cdef inline u64 mix64(u64 z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


def standard_normals(u64 key, int purpose, const long long[::1] rounds, int n_slots, int n_comp):
    cdef Py_ssize_t R = rounds.shape[0]
    out = np.empty((R, n_slots, n_comp), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t r, s, c
    cdef u64 h0, h1, base, ha, hb
    cdef double u1, u2
    with nogil:
        for r in range(R):
            h0 = mix64(key + (<u64>rounds[r]) * GAMMA)
            for s in range(n_slots):
                h1 = mix64(h0 + (<u64>s) * GAMMA)
                for c in range(n_comp):
                    base = ((<u64>purpose) << 20) | ((<u64>c) << 1)
                    ha = mix64(h1 + base * GAMMA)
                    hb = mix64(h1 + (base | 1ULL) * GAMMA)
                    u1 = (<double>(ha >> 11) + 0.5) * INV_2_53
                    u2 = (<double>(hb >> 11) + 0.5) * INV_2_53
                    o[r, s, c] = sqrt(-2.0 * log(u1)) * cos(TWO_PI * u2)
    return out


cdef struct Params:
    int d
    int G
    int K
    int variant
    int N
    double lam
    double delta
    double S
    double sigma_eps


cdef class _State:
    """Ridge state for all groups."""
    cdef double[:, :, ::1] V
    cdef double[:, :, ::1] Vinv
    cdef double[:, ::1] b
    cdef double[:, ::1] th
    cdef double[::1] logdet
    cdef double[::1] maxnorm
    cdef long[::1] nobs
    cdef long[::1] since
    cdef double[::1] u
    cdef double[:, ::1] L
    cdef double[:, ::1] Linv
    cdef double[:, ::1] A
    cdef Params p

    def __init__(self, int d, int G, double lam):
        self.V = np.zeros((G, d, d))
        self.Vinv = np.zeros((G, d, d))
        for g in range(G):
            for i in range(d):
                self.V[g, i, i] = lam
                self.Vinv[g, i, i] = 1.0 / lam
        self.b = np.zeros((G, d))
        self.th = np.zeros((G, d))
        self.logdet = np.full(G, d * log(lam))
        self.maxnorm = np.zeros(G)
        self.nobs = np.zeros(G, dtype=np.int_)
        self.since = np.zeros(G, dtype=np.int_)
        self.u = np.zeros(d)
        self.L = np.zeros((d, d))
        self.Linv = np.zeros((d, d))
        self.A = np.zeros((d, d))

    cdef inline double predict(self, int g, const double[::1] x) noexcept nogil:
        cdef double acc = 0.0
        cdef int j
        for j in range(self.p.d):
            acc = acc + x[j] * self.th[g, j]
        return acc

    cdef inline double wnorm(self, int g, const double[::1] x) noexcept nogil:
        cdef int i, j
        cdef double acc = 0.0, t
        for j in range(self.p.d):
            t = 0.0
            for i in range(self.p.d):
                t = t + x[i] * self.Vinv[g, i, j]
            acc = acc + t * x[j]
        if acc < 0.0:
            acc = 0.0
        return sqrt(acc)

    cdef double radius(self, int g) noexcept nogil:
        cdef int d = self.p.d
        cdef double arg, ell
        if self.p.variant == R_DET:
            arg = 0.5 * (self.logdet[g] - d * log(self.p.lam)) - log(self.p.delta)
            return self.p.sigma_eps * sqrt(d * arg) + sqrt(self.p.lam) * self.p.S
        if self.p.variant == R_L:
            arg = log((1.0 + self.nobs[g] * (self.maxnorm[g] * self.maxnorm[g]) / self.p.lam)
                      / self.p.delta)
            return self.p.sigma_eps * sqrt(d * arg) + sqrt(self.p.lam) * self.p.S
        ell = log(9.869604401089358 * ((<double>self.p.N) * (<double>self.p.N))
                  / (6.0 * self.p.delta))
        return self.p.sigma_eps * sqrt(d + ell + 2.0 * sqrt(d * ell))

    cdef double error_norm(self, int g, const double[:, ::1] theta) noexcept nogil:
        cdef int i, j, d = self.p.d
        cdef double acc = 0.0, t
        for j in range(d):
            t = 0.0
            for i in range(d):
                t = t + (self.th[g, i] - theta[g, i]) * self.V[g, i, j]
            acc = acc + t * (self.th[g, j] - theta[g, j])
        return sqrt(acc)

    cdef void solve_theta(self, int g) noexcept nogil:
        cdef int i, j, d = self.p.d
        cdef double acc
        for i in range(d):
            acc = 0.0
            for j in range(d):
                acc = acc + self.Vinv[g, i, j] * self.b[g, j]
            self.th[g, i] = acc

    cdef void refresh(self, int g) noexcept nogil:
        cdef int i, j, k, d = self.p.d
        cdef double acc, ld = 0.0
        # Cholesky V = L L'
        for i in range(d):
            for j in range(i + 1):
                acc = self.V[g, i, j]
                for k in range(j):
                    acc = acc - self.L[i, k] * self.L[j, k]
                if i == j:
                    self.L[i, i] = sqrt(acc)
                else:
                    self.L[i, j] = acc / self.L[j, j]
            for j in range(i + 1, d):
                self.L[i, j] = 0.0
        # Linv by forward substitution
        for j in range(d):
            for i in range(d):
                if i < j:
                    self.Linv[i, j] = 0.0
                    continue
                acc = 1.0 if i == j else 0.0
                for k in range(j, i):
                    acc = acc - self.L[i, k] * self.Linv[k, j]
                self.Linv[i, j] = acc / self.L[i, i]
        # Vinv = Linv' Linv
        for i in range(d):
            for j in range(d):
                acc = 0.0
                for k in range(d):
                    acc = acc + self.Linv[k, i] * self.Linv[k, j]
                self.Vinv[g, i, j] = acc
        for i in range(d):
            ld = ld + log(self.L[i, i])
        self.logdet[g] = 2.0 * ld
        self.solve_theta(g)
        self.since[g] = 0

    cdef void update(self, int g, const double[::1] x, double y) noexcept nogil:
        cdef int i, j, d = self.p.d
        cdef double s = 0.0, acc, nrm = 0.0
        for i in range(d):
            for j in range(d):
                self.V[g, i, j] = self.V[g, i, j] + x[i] * x[j]
            self.b[g, i] = self.b[g, i] + y * x[i]
        for i in range(d):
            acc = 0.0
            for j in range(d):
                acc = acc + self.Vinv[g, i, j] * x[j]
            self.u[i] = acc
        for i in range(d):
            s = s + x[i] * self.u[i]
        for i in range(d):
            for j in range(d):
                self.Vinv[g, i, j] = self.Vinv[g, i, j] - self.u[i] * self.u[j] / (1.0 + s)
        self.logdet[g] = self.logdet[g] + log1p(s)
        self.nobs[g] = self.nobs[g] + 1
        for i in range(d):
            nrm = nrm + x[i] * x[i]
        nrm = sqrt(nrm)
        if nrm > self.maxnorm[g]:
            self.maxnorm[g] = nrm
        self.since[g] = self.since[g] + 1
        if self.since[g] >= REFRESH_EVERY:
            self.refresh(g)
        else:
            self.solve_theta(g)

    cdef double min_eig(self, int g) noexcept nogil:
        cdef int d = self.p.d
        cdef double a, c, off, h
        if d == 1:
            return self.V[g, 0, 0]
        if d == 2:
            a = self.V[g, 0, 0]
            c = self.V[g, 1, 1]
            off = self.V[g, 0, 1]
            h = 0.5 * (a - c)
            return 0.5 * (a + c) - sqrt(h * h + off * off)
        return self.jacobi_min(g)

    cdef double jacobi_min(self, int g) noexcept nogil:
        # cyclic Jacobi rotations on a copy of V
        cdef int d = self.p.d, i, j, k, sweep
        cdef double off, theta_, t, cs, sn, aik, ajk, aii, ajj, aij, best
        for i in range(d):
            for j in range(d):
                self.A[i, j] = self.V[g, i, j]
        for sweep in range(100):
            off = 0.0
            for i in range(d):
                for j in range(i + 1, d):
                    off = off + self.A[i, j] * self.A[i, j]
            if off < 1e-30:
                break
            for i in range(d):
                for j in range(i + 1, d):
                    aij = self.A[i, j]
                    if fabs(aij) < 1e-300:
                        continue
                    aii = self.A[i, i]
                    ajj = self.A[j, j]
                    theta_ = (ajj - aii) / (2.0 * aij)
                    t = (1.0 if theta_ >= 0 else -1.0) / (fabs(theta_) + sqrt(theta_ * theta_ + 1.0))
                    cs = 1.0 / sqrt(t * t + 1.0)
                    sn = t * cs
                    for k in range(d):
                        aik = self.A[i, k]
                        ajk = self.A[j, k]
                        self.A[i, k] = cs * aik - sn * ajk
                        self.A[j, k] = sn * aik + cs * ajk
                    for k in range(d):
                        aik = self.A[k, i]
                        ajk = self.A[k, j]
                        self.A[k, i] = cs * aik - sn * ajk
                        self.A[k, j] = sn * aik + cs * ajk
        best = self.A[0, 0]
        for i in range(1, d):
            if self.A[i, i] < best:
                best = self.A[i, i]
        return best


cdef int argmax_first(const double[::1] v, int n) noexcept nogil:
    cdef int i, best = 0
    for i in range(1, n):
        if v[i] > v[best]:
            best = i
    return best


cdef int select_top(const double[::1] score, const long[::1] grp, int K, int K_F, int G,
                    bint each_group, unsigned char[::1] picked, long[::1] out) noexcept nogil:
    """Fill ``out`` with the chosen finalists in ascending index order."""
    cdef int i, g, best, n = 0
    for i in range(K):
        picked[i] = 0
    if each_group:
        for g in range(G):
            best = -1
            for i in range(K):
                if grp[i] == g and (best < 0 or score[i] > score[best]):
                    best = i
            if best < 0:
                return -1
            picked[best] = 1
            n += 1
    while n < K_F:
        best = -1
        for i in range(K):
            if not picked[i] and (best < 0 or score[i] > score[best]):
                best = i
        picked[best] = 1
        n += 1
    n = 0
    for i in range(K):
        if picked[i]:
            out[n] = i
            n += 1
    return n


cdef double best_of(const long[::1] fin, int nf, const double[::1] q, const double[::1] eta) noexcept nogil:
    cdef int j
    cdef double v, best = q[fin[0]] + eta[fin[0]]
    for j in range(1, nf):
        v = q[fin[j]] + eta[fin[j]]
        if v > best:
            best = v
    return best


def run_loop(
    const double[:, :, ::1] X,
    const double[:, ::1] Q,
    const double[:, ::1] EPS,
    const double[:, ::1] ETA,
    const long[::1] slot_group,
    const long[::1] schedule,
    const double[:, ::1] theta,
    const double[::1] sigma_x,
    int policy_code,
    int subsidy_code,
    int switch_round,
    double a,
    int K_F,
    double sigma_eps,
    double lam,
    double delta,
    double S,
    int variant,
    int N,
):
    cdef int K = X.shape[1]
    cdef int d = X.shape[2]
    cdef int G = theta.shape[0]
    cdef int n0 = schedule.shape[0]
    cdef int M = N - n0
    cdef bint two_stage = policy_code in (P_LF2S, P_ROONEY, P_ROONEY_THEN_LF)

    cdef _State st = _State(d, G, lam)
    st.p.d = d
    st.p.G = G
    st.p.K = K
    st.p.variant = variant
    st.p.N = N
    st.p.lam = lam
    st.p.delta = delta
    st.p.S = S
    st.p.sigma_eps = sigma_eps

    regret_a = np.zeros(M)
    paid_a = np.zeros(M)
    index_a = np.zeros(M)
    cs_a = np.zeros(M)
    chosen_a = np.zeros(M, dtype=np.int64)
    mineig_a = np.zeros((M, G))
    radius_a = np.zeros((M, G))
    hires_a = np.zeros((M, G), dtype=np.int64)
    covered_a = np.ones(G, dtype=bool)
    u2s_a = np.zeros(M)
    c2s_a = np.zeros(M)

    cdef double[::1] regret = regret_a
    cdef double[::1] paid = paid_a
    cdef double[::1] index_paid = index_a
    cdef double[::1] cs_paid = cs_a
    cdef long long[::1] chosen_group = chosen_a
    cdef double[:, ::1] mineig = mineig_a
    cdef double[:, ::1] radius = radius_a
    cdef long long[:, ::1] hires = hires_a
    cdef double[::1] u2s = u2s_a
    cdef double[::1] c2s = c2s_a
    cdef unsigned char[::1] covered = np.ones(G, dtype=np.uint8)

    cdef double[::1] qhat = np.zeros(K)
    cdef double[::1] w = np.zeros(K)
    cdef double[::1] idx = np.zeros(K)
    cdef double[::1] payoff = np.zeros(K)
    cdef unsigned char[::1] on = np.zeros(K, dtype=np.uint8)
    cdef double[::1] rad = np.zeros(G)
    cdef double[::1] thr = np.zeros(G)
    cdef unsigned char[::1] picked = np.zeros(K, dtype=np.uint8)
    cdef long[::1] fin = np.zeros(K, dtype=np.int_)
    cdef long[::1] bench = np.zeros(K, dtype=np.int_)
    cdef long[::1] first_slot = np.full(G, -1, dtype=np.int_)

    cdef int n, t, k, g, h, c, j, nf, mode, failures = 0
    cdef double y, qmax, mx, tol, initial_cost = 0.0, nrm, v, best

    for k in range(K):
        if first_slot[slot_group[k]] < 0:
            first_slot[slot_group[k]] = k

    with nogil:
        # initial sampling phase
        for n in range(n0):
            g = schedule[n]
            k = first_slot[g]
            for j in range(K):
                qhat[j] = st.predict(slot_group[j], X[n, j])
            initial_cost = initial_cost + (qhat[argmax_first(qhat, K)] - qhat[k])
            y = Q[n, k] + EPS[n, k]
            if two_stage:
                y = y + ETA[n, k]
            st.update(g, X[n, k], y)
            if st.error_norm(g, theta) > st.radius(g):
                covered[g] = 0

        for t in range(M):
            n = n0 + t
            for j in range(K):
                qhat[j] = st.predict(slot_group[j], X[n, j])
            if policy_code == P_UCB or policy_code == P_HYBRID:
                for h in range(G):
                    rad[h] = st.radius(h)
                    if policy_code == P_HYBRID:
                        nrm = 0.0
                        for j in range(d):
                            nrm = nrm + st.th[h, j] * st.th[h, j]
                        thr[h] = a * sigma_x[h] * sqrt(nrm)
                for j in range(K):
                    w[j] = rad[slot_group[j]] * st.wnorm(slot_group[j], X[n, j])

            # decision
            if policy_code == P_UCB:
                for j in range(K):
                    idx[j] = qhat[j] + w[j]
                c = argmax_first(idx, K)
            elif policy_code == P_HYBRID:
                for j in range(K):
                    on[j] = w[j] > thr[slot_group[j]]
                    idx[j] = qhat[j] + w[j] if on[j] else qhat[j]
                c = argmax_first(idx, K)
            elif two_stage:
                if policy_code == P_LF2S:
                    mode = 0
                elif policy_code == P_ROONEY:
                    mode = 1
                else:
                    mode = 1 if n + 1 <= switch_round else 0
                nf = select_top(qhat, slot_group, K, K_F, G, mode == 1, picked, fin)
                c = fin[0]
                best = qhat[c] + ETA[n, c]
                for j in range(1, nf):
                    v = qhat[fin[j]] + ETA[n, fin[j]]
                    if v > best:
                        best = v
                        c = fin[j]
            else:
                c = argmax_first(qhat, K)

            # subsidies: index payment, cost-saving payment, active rule
            qmax = qhat[argmax_first(qhat, K)]
            if policy_code == P_UCB:
                index_paid[t] = (qhat[c] + w[c]) - qhat[c]
            elif policy_code == P_HYBRID:
                index_paid[t] = ((qhat[c] + w[c]) - qhat[c]) if on[c] else 0.0
            else:
                index_paid[t] = 0.0
            cs_paid[t] = qmax - qhat[c]
            if subsidy_code == S_COST_SAVING:
                paid[t] = cs_paid[t]
            else:
                paid[t] = index_paid[t]

            if not two_stage:
                for j in range(K):
                    payoff[j] = qhat[j]
                    if subsidy_code == S_INDEX:
                        if policy_code == P_UCB:
                            payoff[j] = qhat[j] + ((qhat[j] + w[j]) - qhat[j])
                        elif policy_code == P_HYBRID and on[j]:
                            payoff[j] = qhat[j] + ((qhat[j] + w[j]) - qhat[j])
                if subsidy_code == S_COST_SAVING:
                    payoff[c] = qhat[c] + cs_paid[t]
                mx = payoff[argmax_first(payoff, K)]
                tol = 0.0
                for j in range(K):
                    # scale of the operands: estimates, payoffs and payments
                    if fabs(payoff[j]) > tol:
                        tol = fabs(payoff[j])
                    if fabs(qhat[j]) > tol:
                        tol = fabs(qhat[j])
                    if fabs(payoff[j] - qhat[j]) > tol:
                        tol = fabs(payoff[j] - qhat[j])
                if tol < 1.0:
                    tol = 1.0
                tol = 1e-12 * tol
                if not (payoff[c] >= mx - tol):
                    failures += 1

            regret[t] = Q[n, argmax_first(Q[n], K)] - Q[n, c]
            if two_stage:
                nf = select_top(Q[n], slot_group, K, K_F, G, False, picked, bench)
                u2s[t] = best_of(bench, nf, Q[n], ETA[n]) - (Q[n, c] + ETA[n, c])
                nf = select_top(Q[n], slot_group, K, K_F, G, True, picked, bench)
                c2s[t] = best_of(bench, nf, Q[n], ETA[n]) - (Q[n, c] + ETA[n, c])

            g = slot_group[c]
            chosen_group[t] = g
            y = Q[n, c] + EPS[n, c]
            if two_stage:
                y = y + ETA[n, c]
            st.update(g, X[n, c], y)
            if st.error_norm(g, theta) > st.radius(g):
                covered[g] = 0
            for h in range(G):
                mineig[t, h] = st.min_eig(h)
                radius[t, h] = st.radius(h)
                hires[t, h] = st.nobs[h]

    for h in range(G):
        covered_a[h] = covered[h] != 0
    return {
        "regret_inc": regret_a,
        "subsidy_paid": paid_a,
        "index_paid": index_a,
        "cs_paid": cs_a,
        "chosen_group": chosen_a,
        "min_eig": mineig_a,
        "radius": radius_a,
        "hires": hires_a,
        "covered": covered_a,
        "implements_failures": failures,
        "initial_cost": initial_cost,
        "u2s_inc": u2s_a if two_stage else None,
        "c2s_inc": c2s_a if two_stage else None,
    }
