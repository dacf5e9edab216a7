"""Compiled next-event loop for :func:`topicdiff.engine.simulate`.

Each node's local list holds one entry per topic, sorted by topic id, with
the summed instance weight (in units of ``B``) valid at the node's reference
time ``l_tref``. All entries of a node decay by the same factor, so the
node's total ``l_sum`` gives its whole contribution to a neighbor's
normalizer with a single ``exp``. Entries are pruned when their owner acts.
"""

import math

import numba
import numpy as np

OK = 0
OVERFLOW_INSTANCES = 1
OVERFLOW_TOPICS = 2
OVERFLOW_SLOTS = 3
OVERFLOW_LIVE = 4

# exp() argument above which the cumulative adoption table is rebased
_REBASE = 500.0


@numba.njit(cache=True)
def _sift_down(ht, hn, pos, size):
    t = ht[pos]
    node = hn[pos]
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size and (ht[child + 1] < ht[child] or
                                 (ht[child + 1] == ht[child] and hn[child + 1] < hn[child])):
            child += 1
        if ht[child] < t or (ht[child] == t and hn[child] < node):
            ht[pos] = ht[child]
            hn[pos] = hn[child]
            pos = child
        else:
            break
    ht[pos] = t
    hn[pos] = node


@numba.njit(cache=True)
def _gap(rng, rate):
    if rate > 0.0:
        return rng.exponential(1.0 / rate)
    return np.inf


@numba.njit(cache=True)
def _find(row, cnt, topic):
    a, z = 0, cnt
    while a < z:
        mid = (a + z) // 2
        if row[mid] < topic:
            a = mid + 1
        else:
            z = mid
    return a


@numba.njit(cache=True)
def run(indptr, indices, lam1, lam2, A, alpha, B, beta, horizon, eps,
        rng_arrival, rng_activity, rng_choice,
        preseed_topics, slots, max_live, n_cbins,
        inst_t, inst_node, inst_topic, inst_w, inst_adopt,
        arr_t, arr_before):
    """Advance the whole simulation to ``horizon``.

    Returns ``(status, n_instances, n_arrivals, n_noaction, peak_live,
    c_sum, c_cnt)``; the last two bin the per-event normalizer over time.
    """
    n = indptr.size - 1
    cap_inst = inst_t.size
    cap_topics = arr_t.size
    max_deg = 0
    for u in range(n):
        max_deg = max(max_deg, indptr[u + 1] - indptr[u])

    l_topic = np.empty((n, slots), dtype=np.int32)
    l_w = np.empty((n, slots), dtype=np.float64)
    l_cnt = np.zeros(n, dtype=np.int32)
    l_tref = np.zeros(n, dtype=np.float64)
    l_sum = np.zeros(n, dtype=np.float64)
    live = 0
    peak_live = 0

    # adoption sampling table over topics in arrival order
    cumw = np.empty(cap_topics, dtype=np.float64)
    ref = 0.0
    base_idx = 0
    lo = 0
    n_topics = 0
    if A <= 0.0:
        life_a = -np.inf
    elif eps > 0:
        life_a = math.log(A / eps) / alpha
    else:
        life_a = np.inf

    seg = np.empty(max_deg, dtype=np.float64)
    fac = np.empty(max_deg, dtype=np.float64)

    c_sum = np.zeros(n_cbins, dtype=np.float64)
    c_cnt = np.zeros(n_cbins, dtype=np.int64)
    bin_w = horizon / n_cbins

    ht = np.empty(n, dtype=np.float64)
    hn = np.empty(n, dtype=np.int32)
    for v in range(n):
        ht[v] = _gap(rng_activity, lam2)
        hn[v] = v
    for pos in range(n // 2 - 1, -1, -1):
        _sift_down(ht, hn, pos, n)

    for i in range(preseed_topics):
        arr_t[i] = 0.0
        arr_before[i] = 0
        cumw[i] = (cumw[i - 1] if i > 0 else 0.0) + 1.0
        n_topics += 1

    next_arrival = _gap(rng_arrival, lam1)
    n_inst = 0
    n_noaction = 0

    while True:
        t_act = ht[0]
        if next_arrival <= t_act:
            t = next_arrival
            if t > horizon:
                break
            if n_topics >= cap_topics:
                return OVERFLOW_TOPICS, n_inst, n_topics, n_noaction, peak_live, c_sum, c_cnt
            if alpha * (t - ref) > _REBASE:
                base_idx = lo
                acc = 0.0
                for j in range(lo, n_topics):
                    acc += math.exp(alpha * (arr_t[j] - t))
                    cumw[j] = acc
                ref = t
            prev = cumw[n_topics - 1] if n_topics > base_idx else 0.0
            cumw[n_topics] = prev + math.exp(alpha * (t - ref))
            arr_t[n_topics] = t
            arr_before[n_topics] = n_inst
            n_topics += 1
            next_arrival = t + _gap(rng_arrival, lam1)
            continue

        t = t_act
        if t > horizon:
            break
        u = hn[0]
        e0 = indptr[u]
        deg = indptr[u + 1] - e0

        while lo < n_topics and t - arr_t[lo] > life_a:
            lo += 1
        g_scale = A * math.exp(-alpha * (t - ref))
        g_total = 0.0
        below = 0.0
        if lo < n_topics:
            below = cumw[lo - 1] if lo - 1 >= base_idx else 0.0
            g_total = g_scale * (cumw[n_topics - 1] - below)

        l_total = 0.0
        for j in range(deg):
            v = indices[e0 + j]
            if l_cnt[v] == 0:
                fac[j] = 0.0
                seg[j] = 0.0
                continue
            f = B * math.exp(-beta * (t - l_tref[v]))
            fac[j] = f
            seg[j] = f * l_sum[v]
            l_total += seg[j]

        c = g_total + l_total
        b = int(t / bin_w)
        if b >= n_cbins:
            b = n_cbins - 1
        c_sum[b] += c
        c_cnt[b] += 1

        if c <= 0.0:
            n_noaction += 1
        else:
            if n_inst >= cap_inst:
                return OVERFLOW_INSTANCES, n_inst, n_topics, n_noaction, peak_live, c_sum, c_cnt
            r = rng_choice.random() * c
            adopted = r < g_total
            chosen = -1
            if adopted:
                target = below + r / g_scale
                a, z = lo, n_topics - 1
                while a < z:
                    mid = (a + z) // 2
                    if cumw[mid] > target:
                        z = mid
                    else:
                        a = mid + 1
                chosen = a
            else:
                r -= g_total
                pick = -1
                for j in range(deg):
                    if seg[j] <= 0.0:
                        continue
                    pick = j
                    if r < seg[j]:
                        break
                    r -= seg[j]
                v = indices[e0 + pick]
                f = fac[pick]
                cnt = l_cnt[v]
                chosen = l_topic[v, cnt - 1]
                for s in range(cnt):
                    w = l_w[v, s] * f
                    if r < w:
                        chosen = l_topic[v, s]
                        break
                    r -= w

            cw = 0.0
            for j in range(deg):
                if seg[j] <= 0.0:
                    continue
                v = indices[e0 + j]
                s = _find(l_topic[v], l_cnt[v], chosen)
                if s < l_cnt[v] and l_topic[v, s] == chosen:
                    w = l_w[v, s] * fac[j]
                    if w >= eps:
                        cw += w
            w_norm = cw / c

            # rescale, prune and insert into u's own list, keeping topic order
            cnt = l_cnt[u]
            f = math.exp(-beta * (t - l_tref[u]))
            keep = 0
            for s in range(cnt):
                w = l_w[u, s] * f
                if B * w < eps or w <= 0.0:
                    continue
                l_w[u, keep] = w
                l_topic[u, keep] = l_topic[u, s]
                keep += 1
            live += keep - cnt
            s = _find(l_topic[u], keep, chosen)
            if s < keep and l_topic[u, s] == chosen:
                l_w[u, s] += 1.0
            else:
                if keep >= slots:
                    return OVERFLOW_SLOTS, n_inst, n_topics, n_noaction, peak_live, c_sum, c_cnt
                for q in range(keep, s, -1):
                    l_topic[u, q] = l_topic[u, q - 1]
                    l_w[u, q] = l_w[u, q - 1]
                l_topic[u, s] = chosen
                l_w[u, s] = 1.0
                keep += 1
                live += 1
                if live > max_live:
                    return OVERFLOW_LIVE, n_inst, n_topics, n_noaction, peak_live, c_sum, c_cnt
                if live > peak_live:
                    peak_live = live
            tot = 0.0
            for s in range(keep):
                tot += l_w[u, s]
            l_sum[u] = tot
            l_cnt[u] = keep
            l_tref[u] = t

            inst_t[n_inst] = t
            inst_node[n_inst] = u
            inst_topic[n_inst] = chosen
            inst_w[n_inst] = w_norm
            inst_adopt[n_inst] = 1 if adopted else 0
            n_inst += 1

        ht[0] = t + _gap(rng_activity, lam2)
        _sift_down(ht, hn, 0, n)

    return OK, n_inst, n_topics, n_noaction, peak_live, c_sum, c_cnt
