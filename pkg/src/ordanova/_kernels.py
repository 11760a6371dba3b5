# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Gibbs sweep kernels.

Written in Cython pure-Python mode: the same file compiles to a C extension
and also runs unmodified on the interpreter, producing bit-identical draws.
To keep the two backends identical, every random variate is drawn outside
the kernel with a fixed layout, and all transcendental math goes through
libm in both modes.

Adaptive steps (the slice sampler) consume uniforms from a fixed-size row
per update; the row length bounds the work per update, and exhausting it is
reported as an error instead of silently drawing more.
"""

import cython

if cython.compiled:
    from cython.cimports.libc.math import exp, log, sqrt  # type: ignore
else:
    from math import exp, log, sqrt

from scipy.special import gammainc, gammaincinv

# Smallest standard deviation the sd samplers will evaluate; below this the
# log target is treated as -inf.
_MIN_SD = 1e-300



def is_compiled() -> bool:
    """True when running as the compiled extension."""
    return bool(cython.compiled)


def oneway_chain(
    y: cython.double[:],
    group: cython.Py_ssize_t[:],
    counts: cython.double[:],
    sums: cython.double[:],
    beta: cython.double[:],
    sigma2_start: cython.double,
    beta_mean: cython.double,
    beta_var: cython.double,
    nu0s0sq: cython.double,
    fix_sigma2: cython.Py_ssize_t,
    z: cython.double[:, :],
    chisq: cython.double[:],
    burn_in: cython.Py_ssize_t,
    thin: cython.Py_ssize_t,
    out_beta: cython.double[:, :],
    out_sigma2: cython.double[:],
) -> cython.int:
    """Conjugate Gibbs sweeps for the one-way normal means model.

    Each sweep draws every group mean from its normal full conditional,
    then the residual variance from its scaled inverse chi-square full
    conditional (unless ``fix_sigma2``). The prior-only chain is the
    special case of zero observations. Returns 0 on success.
    """
    iters: cython.Py_ssize_t = z.shape[0]
    n: cython.Py_ssize_t = y.shape[0]
    k: cython.Py_ssize_t = beta.shape[0]
    it: cython.Py_ssize_t
    i: cython.Py_ssize_t
    j: cython.Py_ssize_t
    idx: cython.Py_ssize_t
    s2: cython.double = sigma2_start
    prec: cython.double
    v: cython.double
    m: cython.double
    rss: cython.double
    r: cython.double

    for it in range(iters):
        for i in range(k):
            prec = counts[i] / s2 + 1.0 / beta_var
            v = 1.0 / prec
            m = v * (sums[i] / s2 + beta_mean / beta_var)
            beta[i] = m + sqrt(v) * z[it, i]
        if fix_sigma2 == 0:
            rss = 0.0
            for j in range(n):
                r = y[j] - beta[group[j]]
                rss += r * r
            s2 = (nu0s0sq + rss) / chisq[it]
        if it >= burn_in and (it - burn_in) % thin == 0:
            idx = (it - burn_in) // thin
            for i in range(k):
                out_beta[idx, i] = beta[i]
            out_sigma2[idx] = s2
    return 0


@cython.cfunc
def _sd_logpdf(
    x: cython.double, m: cython.double, q: cython.double, s: cython.double
) -> cython.double:
    """Log density (up to a constant) of a scale sd with half-normal prior:
    m coordinates of total square q at variance x**2, prior N+(0, s**2)."""
    return -m * log(x) - q / (2.0 * x * x) - x * x / (2.0 * s * s)


@cython.cfunc
def _slice_sd(
    x0: cython.double,
    m: cython.double,
    q: cython.double,
    s: cython.double,
    u: cython.double[:],
) -> cython.double:
    """One slice-sampling update of a scale sd under a half-normal prior.

    Consumes uniforms from ``u`` in a fixed order: slice height, interval
    placement, stepping-out split, then shrinkage proposals. The stepping-
    out budget of 16 is split at random between the two directions, which
    keeps the update reversible under a finite budget. Returns -1.0 if the
    row is exhausted before acceptance.
    """
    cap: cython.Py_ssize_t = u.shape[0]
    ui: cython.Py_ssize_t
    height: cython.double = u[0]
    left: cython.double
    right: cython.double
    w: cython.double
    logy: cython.double
    x1: cython.double
    split: cython.double
    jj: cython.Py_ssize_t
    kk: cython.Py_ssize_t

    if height <= 0.0:
        height = 2.2e-308
    logy = _sd_logpdf(x0, m, q, s) + log(height)
    w = 0.5 * x0 + 0.1 * s
    left = x0 - u[1] * w
    right = left + w
    split = u[2] * 16.0
    jj = int(split)
    kk = 15 - jj
    while jj > 0 and left > _MIN_SD and _sd_logpdf(left, m, q, s) > logy:
        left -= w
        jj -= 1
    if left < 0.0:
        left = 0.0
    while kk > 0 and _sd_logpdf(right, m, q, s) > logy:
        right += w
        kk -= 1
    for ui in range(3, cap):
        x1 = left + u[ui] * (right - left)
        if x1 > _MIN_SD and _sd_logpdf(x1, m, q, s) > logy:
            return x1
        if x1 < x0:
            left = x1
        else:
            right = x1
    return -1.0


@cython.cfunc
def _trunc_uniform_sd(
    m: cython.double, q: cython.double, upper: cython.double, u: cython.double
) -> cython.double:
    """Inverse-CDF draw of a scale sd under a uniform(0, upper) prior.

    The conditional of x = q / sd**2 is chi-square with m - 1 degrees of
    freedom truncated to x > q / upper**2; inverted with the regularized
    incomplete gamma function.
    """
    half: cython.double = (m - 1.0) / 2.0
    a: cython.double = q / (upper * upper)
    plo: cython.double = gammainc(half, a / 2.0)
    utail: cython.double = plo + u * (1.0 - plo)
    x: cython.double
    if utail > 1.0 - 1e-16:
        utail = 1.0 - 1e-16
    x = 2.0 * gammaincinv(half, utail)
    if x < a:
        x = a
    return sqrt(q / x)


def hier_chain(
    y: cython.double[:],
    labels: cython.Py_ssize_t[:, :],
    offsets: cython.Py_ssize_t[:],
    counts: cython.double[:],
    kinds: cython.Py_ssize_t[:],
    pin_first: cython.Py_ssize_t[:],
    sd_slot_of_batch: cython.Py_ssize_t[:],
    sd_prior_kind: cython.Py_ssize_t[:],
    sd_prior_param: cython.double[:],
    sd_dim: cython.double[:],
    mu_prior_var: cython.double,
    fixed_var: cython.double,
    mu_start: cython.double,
    eff: cython.double[:],
    sds: cython.double[:],
    z: cython.double[:, :],
    unis: cython.double[:, :, :],
    burn_in: cython.Py_ssize_t,
    thin: cython.Py_ssize_t,
    out_mu: cython.double[:],
    out_eff: cython.double[:, :],
    out_sds: cython.double[:, :],
    resid: cython.double[:],
    levsum: cython.double[:],
    levv: cython.double[:],
) -> cython.int:
    """Gibbs sweeps for an additive model with effect batches.

    The model is y = mu + sum of batch effects + noise. Varying batches
    (``kinds`` 0) have iid normal effects given their batch sd, constrained
    to sum to zero; the sd of each such batch carries the prior named by
    its slot in ``sd_prior_kind``/``sd_prior_param`` (0 half-normal with
    that scale, 1 uniform with that upper bound). Fixed batches (``kinds``
    1) have independent effects with variance ``fixed_var``, optionally
    with their first level pinned to zero. The last sd slot is the
    residual sd.

    A sum-to-zero batch is updated exactly: each level is drawn from its
    unconstrained normal full conditional, then the draw is conditioned on
    the zero-sum constraint by subtracting the conditional-variance-
    weighted mean. The batch sd conditionals use one fewer dimension than
    the batch has levels, matching the constrained prior.

    Sweep order: mu, each batch's effects in order, each varying batch's
    sd, then the residual sd. Normals are consumed row-wise from ``z``
    (mu first, then batch levels, skipping pinned ones); sd updates consume
    from their own row of ``unis``.

    Returns 0 on success, 1 if a slice update exhausted its uniform row,
    2 if the normal-draw layout does not match the batch structure.
    """
    iters: cython.Py_ssize_t = z.shape[0]
    n: cython.Py_ssize_t = y.shape[0]
    nbatch: cython.Py_ssize_t = kinds.shape[0]
    nslot: cython.Py_ssize_t = sds.shape[0]
    total: cython.Py_ssize_t = offsets[nbatch]
    it: cython.Py_ssize_t
    j: cython.Py_ssize_t
    b: cython.Py_ssize_t
    l: cython.Py_ssize_t
    g: cython.Py_ssize_t
    zi: cython.Py_ssize_t
    base: cython.Py_ssize_t
    nlev: cython.Py_ssize_t
    slot: cython.Py_ssize_t
    idx: cython.Py_ssize_t
    mu: cython.double = mu_start
    s2: cython.double = sds[nslot - 1] * sds[nslot - 1]
    fit: cython.double
    sr: cython.double
    prec: cython.double
    v: cython.double
    m: cython.double
    mu_new: cython.double
    bvar: cython.double
    sx: cython.double
    sv: cython.double
    adj: cython.double
    newval: cython.double
    q: cython.double
    r: cython.double
    sd_new: cython.double

    for it in range(iters):
        # Refresh residuals from the current state so rounding from the
        # incremental updates cannot accumulate across sweeps.
        for j in range(n):
            fit = mu
            for b in range(nbatch):
                fit += eff[offsets[b] + labels[b, j]]
            resid[j] = y[j] - fit

        # Grand mean.
        sr = 0.0
        for j in range(n):
            sr += resid[j]
        prec = n / s2 + 1.0 / mu_prior_var
        v = 1.0 / prec
        m = v * (sr + n * mu) / s2
        mu_new = m + sqrt(v) * z[it, 0]
        for j in range(n):
            resid[j] -= mu_new - mu
        mu = mu_new
        zi = 1

        # Effect batches.
        for b in range(nbatch):
            base = offsets[b]
            nlev = offsets[b + 1] - base
            for l in range(nlev):
                levsum[l] = 0.0
            for j in range(n):
                g = labels[b, j]
                levsum[g] += resid[j] + eff[base + g]
            if kinds[b] == 0:
                slot = sd_slot_of_batch[b]
                bvar = sds[slot] * sds[slot]
                sx = 0.0
                sv = 0.0
                for l in range(nlev):
                    prec = counts[base + l] / s2 + 1.0 / bvar
                    v = 1.0 / prec
                    m = v * levsum[l] / s2
                    levsum[l] = m + sqrt(v) * z[it, zi]
                    zi += 1
                    levv[l] = v
                    sx += levsum[l]
                    sv += v
                adj = sx / sv
                for l in range(nlev):
                    newval = levsum[l] - levv[l] * adj
                    levv[l] = newval - eff[base + l]
                    eff[base + l] = newval
            else:
                for l in range(nlev):
                    if pin_first[b] == 1 and l == 0:
                        newval = 0.0
                    else:
                        prec = counts[base + l] / s2 + 1.0 / fixed_var
                        v = 1.0 / prec
                        m = v * levsum[l] / s2
                        newval = m + sqrt(v) * z[it, zi]
                        zi += 1
                    levv[l] = newval - eff[base + l]
                    eff[base + l] = newval
            for j in range(n):
                resid[j] -= levv[labels[b, j]]

        if it == 0 and zi != z.shape[1]:
            return 2

        # Batch sds.
        for b in range(nbatch):
            if kinds[b] != 0:
                continue
            slot = sd_slot_of_batch[b]
            base = offsets[b]
            nlev = offsets[b + 1] - base
            q = 0.0
            for l in range(nlev):
                q += eff[base + l] * eff[base + l]
            if q < 1e-300:
                q = 1e-300
            if sd_prior_kind[slot] == 0:
                sd_new = _slice_sd(
                    sds[slot], sd_dim[slot], q, sd_prior_param[slot],
                    unis[it, slot],
                )
                if sd_new < 0.0:
                    return 1
            else:
                sd_new = _trunc_uniform_sd(
                    sd_dim[slot], q, sd_prior_param[slot], unis[it, slot, 0]
                )
            sds[slot] = sd_new

        # Residual sd.
        q = 0.0
        for j in range(n):
            q += resid[j] * resid[j]
        if q < 1e-300:
            q = 1e-300
        slot = nslot - 1
        if sd_prior_kind[slot] == 0:
            sd_new = _slice_sd(
                sds[slot], sd_dim[slot], q, sd_prior_param[slot],
                unis[it, slot],
            )
            if sd_new < 0.0:
                return 1
        else:
            sd_new = _trunc_uniform_sd(
                sd_dim[slot], q, sd_prior_param[slot], unis[it, slot, 0]
            )
        sds[slot] = sd_new
        s2 = sd_new * sd_new

        if it >= burn_in and (it - burn_in) % thin == 0:
            idx = (it - burn_in) // thin
            out_mu[idx] = mu
            for l in range(total):
                out_eff[idx, l] = eff[l]
            for slot in range(nslot):
                out_sds[idx, slot] = sds[slot]
    return 0
