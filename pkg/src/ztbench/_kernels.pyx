# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled engine kernel. Mirrors ``_kernels_py.py`` operation for operation."""
import numpy as np

cimport numpy as cnp

cnp.import_array()

BASELINE = 0
SECUREBANK = 1


def run_engine(int mode,
               const int[::1] user, const int[::1] device, const int[::1] context,
               const int[::1] service, const double[::1] amount,
               const signed char[::1] channel, const short[::1] region,
               const double[::1] risk, const double[::1] s_user,
               const double[::1] s_device, const double[::1] s_context,
               const signed char[::1] attack, const double[::1] challenge_u,
               double[::1] identity, double[::1] device_trust, double[::1] context_trust,
               int[::1] lock_remaining,
               weights, etas, fts_weights, const double[::1] tau,
               const double[::1] exposure, const double[::1] theta_block,
               const double[::1] theta_stepup,
               double amount_cap, double acf_floor, double acf_prior, int lock_events, long window_len,
               double epsilon, double amount_limit,
               const unsigned char[::1] blocked_region, const unsigned char[::1] stepup_rule,
               int n_regions, double pass_legit, double pass_attacker,
               signed char[::1] action, double[::1] theta_out, double[::1] fts_out,
               signed char[::1] band_out, unsigned char[::1] automated_out,
               signed char[::1] confirmed_out, double[::1] id_before, double[::1] id_after,
               unsigned char[::1] passed_out, unsigned char[::1] locked_out,
               long long[::1] service_valid, long long[::1] service_total,
               double[::1] counters):
    cdef Py_ssize_t n = user.shape[0]
    cdef Py_ssize_t n_users = identity.shape[0]
    cdef double w_i = weights[0], w_d = weights[1], w_r = weights[2], w_c = weights[3]
    cdef double eta_i = etas[0], eta_d = etas[1], eta_c = etas[2]
    cdef double f_a = fts_weights[0], f_b = fts_weights[1], f_g = fts_weights[2]
    cdef Py_ssize_t n_tau = tau.shape[0]
    cdef int top_band = <int>n_tau + 1
    cdef bint adaptive = mode == SECUREBANK

    cdef long long incidents = 0, handled = 0, acf_total = 0, acf_ok = 0, ital_n = 0
    cdef double ital_sum = 0.0

    cdef cnp.int64_t[::1] head = np.full(n_users, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] tail = np.full(n_users, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] pos = np.zeros(n_users, dtype=np.int64)
    cdef double[::1] win_start = np.zeros(max(n, 1), dtype=np.float64)
    cdef cnp.int64_t[::1] win_end = np.zeros(max(n, 1), dtype=np.int64)
    cdef cnp.int64_t[::1] win_next = np.full(max(n, 1), -1, dtype=np.int64)
    cdef cnp.int64_t n_win = 0

    cdef Py_ssize_t i, j
    cdef int u, d, c, s, r, band, lvl, conf
    cdef cnp.int64_t k, p
    cdef bint is_attack, auto, passed, locked
    cdef double su, sd, sc, I, D, C, th, loss, peak, f, running, v, start, denom, end_score

    for i in range(n):
        u = user[i]
        d = device[i]
        c = context[i]
        s = service[i]
        is_attack = attack[i] >= 0
        su = s_user[i]
        sd = s_device[i]
        sc = s_context[i]

        I = identity[u]
        D = device_trust[d]
        C = context_trust[c]

        p = pos[u]
        k = head[u]
        while k != -1 and win_end[k] == p:
            start = win_start[k]
            denom = start if start >= epsilon else epsilon
            ital_sum += (start - I) / denom
            ital_n += 1
            k = win_next[k]
        head[u] = k
        if k == -1:
            tail[u] = -1

        th = w_i * I + w_d * D + w_r * (1.0 - risk[i]) + w_c * C
        loss = amount[i] / amount_cap
        if loss > 1.0:
            loss = 1.0
        peak = su
        if sd > peak:
            peak = sd
        if sc > peak:
            peak = sc
        f = f_a * loss + f_b * peak + f_g * exposure[s]
        band = 1
        for j in range(n_tau):
            if f >= tau[j]:
                band += 1

        locked = False
        if adaptive:
            if lock_remaining[u] > 0:
                lvl = 2
                lock_remaining[u] -= 1
                locked = True
            else:
                if th < theta_block[s]:
                    lvl = 2
                elif th < theta_stepup[s]:
                    lvl = 1
                else:
                    lvl = 0
                if band >= 3 and lvl < 2:
                    lvl += 1
                if band == top_band:
                    lvl = 2
            if acf_total + acf_prior > 0:
                running = ((<double>acf_ok) + acf_prior) / ((<double>acf_total) + acf_prior)
            else:
                running = 1.0
            auto = running >= acf_floor or band <= 2
        else:
            r = region[i]
            if amount[i] > amount_limit or blocked_region[r]:
                lvl = 2
                auto = True
            elif stepup_rule[channel[i] * n_regions + r]:
                lvl = 1
                auto = False
            else:
                lvl = 0
                auto = False

        if is_attack:
            passed = challenge_u[i] < pass_attacker
        else:
            passed = challenge_u[i] < pass_legit
        if lvl != 1:
            passed = False

        conf = -1
        if lvl > 0 and auto and not locked:
            acf_total += 1
            if is_attack or lvl == 1:
                acf_ok += 1
                conf = 1
            else:
                conf = 0
        if adaptive and auto and lvl == 2 and band == top_band:
            lock_remaining[u] = lock_events

        service_total[s] += 1
        if is_attack:
            incidents += 1
            if auto and lvl > 0:
                handled += 1
        elif lvl == 0 or (lvl == 1 and passed):
            service_valid[s] += 1

        id_before[i] = I
        if adaptive:
            v = (1.0 - eta_i) * I + eta_i * (1.0 - su)
            identity[u] = 0.0 if v < 0.0 else (1.0 if v > 1.0 else v)
            v = (1.0 - eta_d) * D + eta_d * (1.0 - sd)
            device_trust[d] = 0.0 if v < 0.0 else (1.0 if v > 1.0 else v)
            v = (1.0 - eta_c) * C + eta_c * (1.0 - sc)
            context_trust[c] = 0.0 if v < 0.0 else (1.0 if v > 1.0 else v)
        id_after[i] = identity[u]

        if is_attack:
            win_start[n_win] = I
            win_end[n_win] = p + window_len - 1
            win_next[n_win] = -1
            if tail[u] == -1:
                head[u] = n_win
            else:
                win_next[tail[u]] = n_win
            tail[u] = n_win
            n_win += 1
        pos[u] = p + 1

        action[i] = lvl
        theta_out[i] = th
        fts_out[i] = f
        band_out[i] = band
        automated_out[i] = auto
        confirmed_out[i] = conf
        passed_out[i] = passed
        locked_out[i] = locked

    for u in range(n_users):
        k = head[u]
        if k == -1:
            continue
        end_score = identity[u]
        while k != -1:
            start = win_start[k]
            denom = start if start >= epsilon else epsilon
            ital_sum += (start - end_score) / denom
            ital_n += 1
            k = win_next[k]

    counters[0] = incidents
    counters[1] = handled
    counters[2] = acf_total
    counters[3] = acf_ok
    counters[4] = ital_sum
    counters[5] = ital_n
