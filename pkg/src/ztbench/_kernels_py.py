"""Pure-Python engine kernel. Mirrors ``_kernels.pyx`` operation for operation.

Both implementations must produce bit-identical outputs; keep the arithmetic
order in the two files in lockstep.
"""
BASELINE = 0
SECUREBANK = 1


def run_engine(mode, user, device, context, service, amount, channel, region, risk,
               s_user, s_device, s_context, attack, challenge_u,
               identity, device_trust, context_trust, lock_remaining,
               weights, etas, fts_weights, tau, exposure, theta_block, theta_stepup,
               amount_cap, acf_floor, acf_prior, lock_events, window_len, epsilon,
               amount_limit, blocked_region, stepup_rule, n_regions,
               pass_legit, pass_attacker,
               action, theta_out, fts_out, band_out, automated_out, confirmed_out,
               id_before, id_after, passed_out, locked_out,
               service_valid, service_total, counters):
    """Stream every event through one engine, filling the output columns in place.

    ``counters`` is a float64 array of length 6:
    incidents, auto_handled, acf_total, acf_confirmed, ital_sum, ital_windows.
    """
    out_arrays = (identity, device_trust, context_trust, lock_remaining,
                  service_valid, service_total)
    (user, device, context, service, amount, channel, region, risk, s_user, s_device,
     s_context, attack, challenge_u, identity, device_trust, context_trust, lock_remaining,
     tau, exposure, theta_block, theta_stepup, blocked_region, stepup_rule,
     service_valid, service_total) = (
        a.tolist() for a in (user, device, context, service, amount, channel, region, risk,
                             s_user, s_device, s_context, attack, challenge_u, identity,
                             device_trust, context_trust, lock_remaining, tau, exposure,
                             theta_block, theta_stepup, blocked_region, stepup_rule,
                             service_valid, service_total))
    outputs = (action, theta_out, fts_out, band_out, automated_out, confirmed_out,
               id_before, id_after, passed_out, locked_out)
    n = len(user)
    n_users = len(identity)
    (action, theta_out, fts_out, band_out, automated_out, confirmed_out,
     id_before, id_after, passed_out, locked_out) = ([0] * n for _ in range(10))
    w_i, w_d, w_r, w_c = weights
    eta_i, eta_d, eta_c = etas
    f_a, f_b, f_g = fts_weights
    n_tau = len(tau)
    top_band = n_tau + 1
    adaptive = mode == SECUREBANK

    incidents = 0
    handled = 0
    acf_total = 0
    acf_ok = 0
    ital_sum = 0.0
    ital_n = 0

    # per-user FIFO of open identity windows
    head = [-1] * n_users
    tail = [-1] * n_users
    pos = [0] * n_users
    win_start = [0.0] * n
    win_end = [0] * n
    win_next = [-1] * n
    n_win = 0

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

        # close windows that end at this trajectory point
        p = pos[u]
        k = head[u]
        while k != -1 and win_end[k] == p:
            start = win_start[k]
            ital_sum += (start - I) / max(start, epsilon)
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
                running = (float(acf_ok) + acf_prior) / (float(acf_total) + acf_prior)
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

    # truncate still-open windows at the closing point (final identity)
    for u in range(n_users):
        k = head[u]
        if k == -1:
            continue
        end_score = identity[u]
        while k != -1:
            start = win_start[k]
            ital_sum += (start - end_score) / max(start, epsilon)
            ital_n += 1
            k = win_next[k]

    for dst, src in zip(out_arrays, (identity, device_trust, context_trust, lock_remaining,
                                     service_valid, service_total)):
        dst[:] = src
    for dst, src in zip(outputs, (action, theta_out, fts_out, band_out, automated_out,
                                  confirmed_out, id_before, id_after, passed_out, locked_out)):
        dst[:] = src

    counters[0] = incidents
    counters[1] = handled
    counters[2] = acf_total
    counters[3] = acf_ok
    counters[4] = ital_sum
    counters[5] = ital_n

