"""Numba kernels over the flat arrays of :class:`~annealbench.model.CompiledProblem`.

Spin arrays are ``int8``. Trotter states are ``(slices, spins)`` so that the
neighbours of a spin within one slice are contiguous.
"""

import numpy as np
from numba import njit

AUDIT_INTERVAL = 10_000


@njit(cache=True)
def local_field(i, s, h, nbr_ptr, nbr_idx, nbr_J, term_ptr, term_spins, term_coef,
                spin_term_ptr, spin_term_idx):
    """Coefficient of ``s[i]`` in the energy (so flipping costs ``-2 s_i f``)."""
    f = h[i]
    for e in range(nbr_ptr[i], nbr_ptr[i + 1]):
        f += nbr_J[e] * s[nbr_idx[e]]
    for q in range(spin_term_ptr[i], spin_term_ptr[i + 1]):
        t = spin_term_idx[q]
        prod = term_coef[t]
        for r in range(term_ptr[t], term_ptr[t + 1]):
            a = term_spins[r]
            if a != i:
                prod *= s[a]
        f += prod
    return f


@njit(cache=True)
def full_energy(s, h, nbr_ptr, nbr_idx, nbr_J, term_ptr, term_spins, term_coef):
    n = s.shape[0]
    e = 0.0
    for i in range(n):
        e += h[i] * s[i]
        for q in range(nbr_ptr[i], nbr_ptr[i + 1]):
            j = nbr_idx[q]
            if j > i:
                e += nbr_J[q] * s[i] * s[j]
    for t in range(term_coef.shape[0]):
        prod = term_coef[t]
        for r in range(term_ptr[t], term_ptr[t + 1]):
            prod *= s[term_spins[r]]
        e += prod
    return e


@njit(cache=True)
def gray_enumerate(n, h, nbr_ptr, nbr_idx, nbr_J, term_ptr, term_spins, term_coef,
                   spin_term_ptr, spin_term_idx, rel_tol):
    """Minimum energy, its degeneracy and one minimizer over all 2^n states."""
    s = np.ones(n, dtype=np.int8)
    e = full_energy(s, h, nbr_ptr, nbr_idx, nbr_J, term_ptr, term_spins, term_coef)
    best = e
    count = 1
    best_code = 0
    code = 0
    total = 1 << n
    for k in range(1, total):
        i = 0
        while not (k >> i) & 1:
            i += 1
        f = local_field(i, s, h, nbr_ptr, nbr_idx, nbr_J, term_ptr, term_spins, term_coef,
                        spin_term_ptr, spin_term_idx)
        e -= 2.0 * s[i] * f
        s[i] = -s[i]
        code ^= 1 << i
        # re-anchor periodically against accumulated rounding
        if (k & 0xFFFFF) == 0:
            e = full_energy(s, h, nbr_ptr, nbr_idx, nbr_J, term_ptr, term_spins, term_coef)
        tol = rel_tol * max(1.0, abs(best))
        if e < best - tol:
            best = e
            count = 1
            best_code = code
        elif e <= best + tol:
            count += 1
            if e < best:
                best = e
    return best, count, best_code


@njit(cache=True)
def _sweep(flat, m, n, beta_over_m, jperp, h, nbr_ptr, nbr_idx, nbr_J, term_ptr, term_spins,
           term_coef, spin_term_ptr, spin_term_idx, slice_energy, bonds, audit_state):
    """One Metropolis attempt per (spin, slice) in lexicographic order.

    ``flat`` is the C-ordered ``(m, n)`` Trotter state. ``audit_state`` is
    ``[enabled, accepted_since_check, max_error]``.
    """
    auditing = audit_state[0] > 0.0
    for i in range(n):
        hi = h[i]
        e0, e1 = nbr_ptr[i], nbr_ptr[i + 1]
        t0, t1 = spin_term_ptr[i], spin_term_ptr[i + 1]
        for k in range(m):
            base = k * n
            f = hi
            for e in range(e0, e1):
                f += nbr_J[e] * flat[base + nbr_idx[e]]
            for q in range(t0, t1):
                t = spin_term_idx[q]
                prod = term_coef[t]
                for r in range(term_ptr[t], term_ptr[t + 1]):
                    a = term_spins[r]
                    if a != i:
                        prod *= flat[base + a]
                f += prod
            si = flat[base + i]
            km = base - n if k > 0 else (m - 1) * n
            kp = base + n if k < m - 1 else 0
            tau = flat[km + i] + flat[kp + i]
            d_energy = -2.0 * si * f
            d_action = beta_over_m * d_energy + 2.0 * jperp * si * tau
            if d_action <= 0.0 or np.random.random() < np.exp(-d_action):
                flat[base + i] = -si
                if auditing:
                    slice_energy[k] += d_energy
                    bonds[0] += -2.0 * si * tau
                    audit_state[1] += 1.0
                    if audit_state[1] >= AUDIT_INTERVAL:
                        audit_state[1] = 0.0
                        err = _audit(flat.reshape((m, n)), h, nbr_ptr, nbr_idx, nbr_J, term_ptr,
                                     term_spins, term_coef, slice_energy, bonds)
                        if err > audit_state[2]:
                            audit_state[2] = err


@njit(cache=True)
def _bond_sum(spins):
    m, n = spins.shape
    b = 0.0
    for k in range(m):
        kp = k + 1 if k < m - 1 else 0
        for i in range(n):
            b += spins[k, i] * spins[kp, i]
    return b


@njit(cache=True)
def _audit(spins, h, nbr_ptr, nbr_idx, nbr_J, term_ptr, term_spins, term_coef, slice_energy, bonds):
    err = 0.0
    for k in range(spins.shape[0]):
        exact = full_energy(spins[k], h, nbr_ptr, nbr_idx, nbr_J, term_ptr, term_spins, term_coef)
        err = max(err, abs(exact - slice_energy[k]) / max(1.0, abs(exact)))
        slice_energy[k] = exact
    exact_b = _bond_sum(spins)
    err = max(err, abs(exact_b - bonds[0]) / max(1.0, abs(exact_b)))
    bonds[0] = exact_b
    return err


@njit(cache=True)
def anneal(spins, beta_over_m, jperp_schedule, h, nbr_ptr, nbr_idx, nbr_J, term_ptr, term_spins,
           term_coef, spin_term_ptr, spin_term_idx, seed, audit):
    """Run the full schedule in place; returns final slice energies and the
    largest relative bookkeeping error seen (0 when not auditing)."""
    np.random.seed(seed)
    m = spins.shape[0]
    slice_energy = np.empty(m)
    for k in range(m):
        slice_energy[k] = full_energy(spins[k], h, nbr_ptr, nbr_idx, nbr_J, term_ptr, term_spins, term_coef)
    bonds = np.array([_bond_sum(spins)])
    audit_state = np.array([1.0 if audit else 0.0, 0.0, 0.0])
    flat = spins.reshape(-1)
    n = spins.shape[1]
    for step in range(jperp_schedule.shape[0]):
        _sweep(flat, m, n, beta_over_m, jperp_schedule[step], h, nbr_ptr, nbr_idx, nbr_J, term_ptr,
               term_spins, term_coef, spin_term_ptr, spin_term_idx, slice_energy, bonds, audit_state)
    if audit:
        err = _audit(spins, h, nbr_ptr, nbr_idx, nbr_J, term_ptr, term_spins, term_coef, slice_energy, bonds)
        if err > audit_state[2]:
            audit_state[2] = err
    final = np.empty(m)
    for k in range(m):
        final[k] = full_energy(spins[k], h, nbr_ptr, nbr_idx, nbr_J, term_ptr, term_spins, term_coef)
    return final, audit_state[2]


@njit(cache=True)
def state_histogram(spins, beta_over_m, jperp, h, nbr_ptr, nbr_idx, nbr_J, term_ptr, term_spins,
                    term_coef, spin_term_ptr, spin_term_idx, seed, sweeps):
    """Counts of the joint (slice, spin) state after each sweep at fixed coupling.

    State code bit ``k * n + i`` is set when spin ``i`` of slice ``k`` is -1.
    """
    np.random.seed(seed)
    m, n = spins.shape
    counts = np.zeros(1 << (m * n), dtype=np.int64)
    slice_energy = np.zeros(m)
    bonds = np.zeros(1)
    audit_state = np.zeros(3)
    flat = spins.reshape(-1)
    for _ in range(sweeps):
        _sweep(flat, m, n, beta_over_m, jperp, h, nbr_ptr, nbr_idx, nbr_J, term_ptr, term_spins,
               term_coef, spin_term_ptr, spin_term_idx, slice_energy, bonds, audit_state)
        code = 0
        for k in range(m):
            for i in range(n):
                if spins[k, i] < 0:
                    code |= 1 << (k * n + i)
        counts[code] += 1
    return counts
