"""Compiled right-hand sides and the adaptive integrator.

Every model's state is a flat float64 array laid out compartment-major:
entry c*6 + a is compartment c, age class a. Cumulative new-infection
channels (one per infection order, or severe/mild for the single-infection
model) are appended after the live compartments; their derivatives do not
depend on their own values, so the weekly driver can reset them to zero at
each sampling node without disturbing the state path.

Parameters travel in a single float64 pack (offsets below) so the kernels
stay signature-stable across models. fastmath is left off everywhere:
coverage zero must reproduce the unvaccinated arithmetic bit for bit.
"""
import math

import numpy as np
from numba import njit

# parameter-pack offsets
P_B = 0            # seasonal amplitude
P_PHI = 1          # seasonal phase
P_BETA0 = 2        # 6 baseline transmission rates
P_MUBAR = 8        # mean weekly birth rate
P_AMPL = 9         # 12 monthly birth amplitudes
P_ALPHA = 21       # 6 aging rates
P_CONTACT = 27     # 6x6 contact matrix, row-major
P_DELTA = 63       # maternal immunity waning
P_TAU = 64         # post-infection immunity waning
P_GAMMA1 = 65      # first-infection recovery
P_GAMMA2 = 66      # later-infection recovery
P_INCUB = 67       # incubation rate (exposed-stage model)
P_SIGMA = 68       # 4 relative susceptibilities by infection order
P_IOTA = 72        # 4 relative infectiousness weights by infection order
P_KAPPA = 76       # 3 return-to-susceptible probabilities
P_SC = 79          # seroconverting dose fraction s*c (successive models)
P_CVAX = 80        # dose coverage c (single-infection model)
P_ETA_S = 81       # vaccine protection against severe disease
P_ETA_M = 82       # vaccine protection against mild disease
P_NREF = 83        # birth reference population; < 0 means live total
P_SPLIT_S = 84     # severe branch fraction (single-infection model)
P_SPLIT_M = 85     # mild branch fraction
N_PARS = 86

TWO_PI = 2.0 * math.pi

# kernel codes
CODE_A = 0
CODE_B = 1
CODE_C = 2
CODE_D = 3
CODE_E = 4
CODE_A_VAX = 5


@njit(cache=True)
def _month_index(t):
    m = int(((t - 1.0) % 52.0) * 12.0 / 52.0)
    if m > 11:
        m = 11
    return m


@njit(cache=True)
def _birth(t, p):
    return p[P_MUBAR] * (1.0 + p[P_AMPL + _month_index(t)])


@njit(cache=True)
def _birth_ref(y, p, ncomp):
    nref = p[P_NREF]
    if nref >= 0.0:
        return nref
    total = 0.0
    for q in range(ncomp * 6):
        total += y[q]
    return total


@njit(cache=True)
def _foi(t, y, p, ncomp, w, lam):
    """lam_i = sum_j beta_j(t) C_ij w_j / N_j with w the infectiousness-weighted counts."""
    for i in range(6):
        lam[i] = 0.0
    season = 1.0 + p[P_B] * math.cos((TWO_PI * t - 52.0 * p[P_PHI]) / 52.0)
    for j in range(6):
        nj = 0.0
        for c in range(ncomp):
            nj += y[c * 6 + j]
        if nj <= 0.0:
            continue
        scale = p[P_BETA0 + j] * season * w[j] / nj
        for i in range(6):
            lam[i] += p[P_CONTACT + i * 6 + j] * scale


@njit(cache=True)
def _rhs_a(t, y, dy, p, scr):
    # M S Is Im R | severe mild
    w = scr[0:6]
    lam = scr[6:12]
    for j in range(6):
        w[j] = y[12 + j] + 0.5 * y[18 + j]
    _foi(t, y, p, 5, w, lam)
    muN = _birth(t, p) * _birth_ref(y, p, 5)
    delta = p[P_DELTA]
    tau = p[P_TAU]
    g1 = p[P_GAMMA1]
    g2 = p[P_GAMMA2]
    for i in range(6):
        al = p[P_ALPHA + i]
        m = y[i]
        s = y[6 + i]
        isv = y[12 + i]
        imv = y[18 + i]
        r = y[24 + i]
        if i > 0:
            ap = p[P_ALPHA + i - 1]
            m_in = ap * y[i - 1]
            s_in = ap * y[6 + i - 1]
            is_in = ap * y[12 + i - 1]
            im_in = ap * y[18 + i - 1]
            r_in = ap * y[24 + i - 1]
        else:
            m_in = muN
            s_in = 0.0
            is_in = 0.0
            im_in = 0.0
            r_in = 0.0
        ls = p[P_SPLIT_S] * lam[i]
        lm = p[P_SPLIT_M] * lam[i]
        dy[i] = m_in - al * m - delta * m
        dy[6 + i] = s_in - al * s + delta * m - (ls + lm) * s + tau * r
        dy[12 + i] = is_in - al * isv + ls * s - g1 * isv
        dy[18 + i] = im_in - al * imv + lm * s - g2 * imv
        dy[24 + i] = r_in - al * r + g1 * isv + g2 * imv - tau * r
        dy[30 + i] = ls * s
        dy[36 + i] = lm * s


@njit(cache=True)
def _rhs_a_vax(t, y, dy, p, scr):
    # M S Is Im R V | severe mild
    w = scr[0:6]
    lam = scr[6:12]
    for j in range(6):
        w[j] = y[12 + j] + 0.5 * y[18 + j]
    _foi(t, y, p, 6, w, lam)
    muN = _birth(t, p) * _birth_ref(y, p, 6)
    delta = p[P_DELTA]
    tau = p[P_TAU]
    g1 = p[P_GAMMA1]
    g2 = p[P_GAMMA2]
    c = p[P_CVAX]
    es = p[P_ETA_S]
    em = p[P_ETA_M]
    for i in range(6):
        al = p[P_ALPHA + i]
        m = y[i]
        s = y[6 + i]
        isv = y[12 + i]
        imv = y[18 + i]
        r = y[24 + i]
        v = y[30 + i]
        if i > 0:
            ap = p[P_ALPHA + i - 1]
            m_in = ap * y[i - 1]
            s_in = ap * y[6 + i - 1]
            is_in = ap * y[12 + i - 1]
            im_in = ap * y[18 + i - 1]
            r_in = ap * y[24 + i - 1]
            v_in = ap * y[30 + i - 1]
            if i == 1:
                # the dose is given at the class 1 -> 2 boundary
                m_in = (1.0 - c) * m_in
                s_in = (1.0 - c) * s_in
                v_in = v_in + c * ap * (y[0] + y[6])
        else:
            m_in = muN
            s_in = 0.0
            is_in = 0.0
            im_in = 0.0
            r_in = 0.0
            v_in = 0.0
        ls = p[P_SPLIT_S] * lam[i]
        lm = p[P_SPLIT_M] * lam[i]
        bs = (1.0 - es) * ls
        bm = (1.0 - em) * lm
        dy[i] = m_in - al * m - delta * m
        dy[6 + i] = s_in - al * s + delta * m - (ls + lm) * s + tau * r + tau * v
        dy[12 + i] = is_in - al * isv + ls * s + bs * v - g1 * isv
        dy[18 + i] = im_in - al * imv + lm * s + bm * v - g2 * imv
        dy[24 + i] = r_in - al * r + g1 * isv + g2 * imv - tau * r
        dy[30 + i] = v_in - al * v - tau * v - (bs + bm) * v
        dy[36 + i] = ls * s + bs * v
        dy[42 + i] = lm * s + bm * v


@njit(cache=True)
def _rhs_b(t, y, dy, p, scr):
    # M S1 I1 R1 S2 I2 R2 S3 I3 R3 | ord1 ord2 ord3
    w = scr[0:6]
    lam = scr[6:12]
    i2w = p[P_IOTA + 1]
    i3w = p[P_IOTA + 2]
    for j in range(6):
        w[j] = y[12 + j] + i2w * y[30 + j] + i3w * y[48 + j]
    _foi(t, y, p, 10, w, lam)
    muN = _birth(t, p) * _birth_ref(y, p, 10)
    delta = p[P_DELTA]
    tau = p[P_TAU]
    g1 = p[P_GAMMA1]
    g2 = p[P_GAMMA2]
    sc = p[P_SC]
    sg2 = p[P_SIGMA + 1]
    sg3 = p[P_SIGMA + 2]
    for i in range(6):
        al = p[P_ALPHA + i]
        m = y[i]
        s1 = y[6 + i]
        i1 = y[12 + i]
        r1 = y[18 + i]
        s2 = y[24 + i]
        i2 = y[30 + i]
        r2 = y[36 + i]
        s3 = y[42 + i]
        i3 = y[48 + i]
        r3 = y[54 + i]
        if i > 0:
            ap = p[P_ALPHA + i - 1]
            m_in = ap * y[i - 1]
            s1_in = ap * y[6 + i - 1]
            i1_in = ap * y[12 + i - 1]
            r1_in = ap * y[18 + i - 1]
            s2_in = ap * y[24 + i - 1]
            i2_in = ap * y[30 + i - 1]
            r2_in = ap * y[36 + i - 1]
            s3_in = ap * y[42 + i - 1]
            i3_in = ap * y[48 + i - 1]
            r3_in = ap * y[54 + i - 1]
            if i == 1:
                # dose 1: seroconverted fraction of the M/S1 aging flow
                # lands in R1 of class 2
                m_in = (1.0 - sc) * m_in
                s1_in = (1.0 - sc) * s1_in
                r1_in = r1_in + sc * ap * (y[0] + y[6])
            elif i == 2:
                # dose 2: seroconverted fraction of the R1/S2 aging flow
                # lands in R2 of class 3
                r1_in = (1.0 - sc) * r1_in
                s2_in = (1.0 - sc) * s2_in
                r2_in = r2_in + sc * ap * (y[18 + 1] + y[24 + 1])
        else:
            m_in = muN
            s1_in = 0.0
            i1_in = 0.0
            r1_in = 0.0
            s2_in = 0.0
            i2_in = 0.0
            r2_in = 0.0
            s3_in = 0.0
            i3_in = 0.0
            r3_in = 0.0
        l1 = lam[i]
        l2 = sg2 * lam[i]
        l3 = sg3 * lam[i]
        dy[i] = m_in - al * m - delta * m
        dy[6 + i] = s1_in - al * s1 + delta * m - l1 * s1
        dy[12 + i] = i1_in - al * i1 + l1 * s1 - g1 * i1
        dy[18 + i] = r1_in - al * r1 + g1 * i1 - tau * r1
        dy[24 + i] = s2_in - al * s2 + tau * r1 - l2 * s2
        dy[30 + i] = i2_in - al * i2 + l2 * s2 - g2 * i2
        dy[36 + i] = r2_in - al * r2 + g2 * i2 - tau * r2
        dy[42 + i] = s3_in - al * s3 + tau * r2 + tau * r3 - l3 * s3
        dy[48 + i] = i3_in - al * i3 + l3 * s3 - g2 * i3
        dy[54 + i] = r3_in - al * r3 + g2 * i3 - tau * r3
        dy[60 + i] = l1 * s1
        dy[66 + i] = l2 * s2
        dy[72 + i] = l3 * s3


@njit(cache=True)
def _rhs_c(t, y, dy, p, scr):
    # M S1 I1 R1 S2 I2 R2 S3 I3 R3 E1 E2 E3 | ord1 ord2 ord3
    w = scr[0:6]
    lam = scr[6:12]
    i2w = p[P_IOTA + 1]
    i3w = p[P_IOTA + 2]
    for j in range(6):
        w[j] = y[12 + j] + i2w * y[30 + j] + i3w * y[48 + j]
    _foi(t, y, p, 13, w, lam)
    muN = _birth(t, p) * _birth_ref(y, p, 13)
    delta = p[P_DELTA]
    tau = p[P_TAU]
    g1 = p[P_GAMMA1]
    g2 = p[P_GAMMA2]
    xi = p[P_INCUB]
    sc = p[P_SC]
    sg2 = p[P_SIGMA + 1]
    sg3 = p[P_SIGMA + 2]
    for i in range(6):
        al = p[P_ALPHA + i]
        m = y[i]
        s1 = y[6 + i]
        i1 = y[12 + i]
        r1 = y[18 + i]
        s2 = y[24 + i]
        i2 = y[30 + i]
        r2 = y[36 + i]
        s3 = y[42 + i]
        i3 = y[48 + i]
        r3 = y[54 + i]
        e1 = y[60 + i]
        e2 = y[66 + i]
        e3 = y[72 + i]
        if i > 0:
            ap = p[P_ALPHA + i - 1]
            m_in = ap * y[i - 1]
            s1_in = ap * y[6 + i - 1]
            i1_in = ap * y[12 + i - 1]
            r1_in = ap * y[18 + i - 1]
            s2_in = ap * y[24 + i - 1]
            i2_in = ap * y[30 + i - 1]
            r2_in = ap * y[36 + i - 1]
            s3_in = ap * y[42 + i - 1]
            i3_in = ap * y[48 + i - 1]
            r3_in = ap * y[54 + i - 1]
            e1_in = ap * y[60 + i - 1]
            e2_in = ap * y[66 + i - 1]
            e3_in = ap * y[72 + i - 1]
            if i == 1:
                m_in = (1.0 - sc) * m_in
                s1_in = (1.0 - sc) * s1_in
                r1_in = r1_in + sc * ap * (y[0] + y[6])
            elif i == 2:
                r1_in = (1.0 - sc) * r1_in
                s2_in = (1.0 - sc) * s2_in
                r2_in = r2_in + sc * ap * (y[18 + 1] + y[24 + 1])
        else:
            m_in = muN
            s1_in = 0.0
            i1_in = 0.0
            r1_in = 0.0
            s2_in = 0.0
            i2_in = 0.0
            r2_in = 0.0
            s3_in = 0.0
            i3_in = 0.0
            r3_in = 0.0
            e1_in = 0.0
            e2_in = 0.0
            e3_in = 0.0
        l1 = lam[i]
        l2 = sg2 * lam[i]
        l3 = sg3 * lam[i]
        dy[i] = m_in - al * m - delta * m
        dy[6 + i] = s1_in - al * s1 + delta * m - l1 * s1
        dy[12 + i] = i1_in - al * i1 + xi * e1 - g1 * i1
        dy[18 + i] = r1_in - al * r1 + g1 * i1 - tau * r1
        dy[24 + i] = s2_in - al * s2 + tau * r1 - l2 * s2
        dy[30 + i] = i2_in - al * i2 + xi * e2 - g2 * i2
        dy[36 + i] = r2_in - al * r2 + g2 * i2 - tau * r2
        dy[42 + i] = s3_in - al * s3 + tau * r2 + tau * r3 - l3 * s3
        dy[48 + i] = i3_in - al * i3 + xi * e3 - g2 * i3
        dy[54 + i] = r3_in - al * r3 + g2 * i3 - tau * r3
        dy[60 + i] = e1_in - al * e1 + l1 * s1 - xi * e1
        dy[66 + i] = e2_in - al * e2 + l2 * s2 - xi * e2
        dy[72 + i] = e3_in - al * e3 + l3 * s3 - xi * e3
        dy[78 + i] = l1 * s1
        dy[84 + i] = l2 * s2
        dy[90 + i] = l3 * s3


@njit(cache=True)
def _rhs_d(t, y, dy, p, scr):
    # M S1 I1 S2 I2 S3 I3 S4 I4 Rfinal | ord1 ord2 ord3 ord4
    w = scr[0:6]
    lam = scr[6:12]
    i2w = p[P_IOTA + 1]
    i3w = p[P_IOTA + 2]
    i4w = p[P_IOTA + 3]
    for j in range(6):
        w[j] = y[12 + j] + i2w * y[24 + j] + i3w * y[36 + j] + i4w * y[48 + j]
    _foi(t, y, p, 10, w, lam)
    muN = _birth(t, p) * _birth_ref(y, p, 10)
    delta = p[P_DELTA]
    g1 = p[P_GAMMA1]
    g2 = p[P_GAMMA2]
    sc = p[P_SC]
    sg2 = p[P_SIGMA + 1]
    sg3 = p[P_SIGMA + 2]
    sg4 = p[P_SIGMA + 3]
    for i in range(6):
        al = p[P_ALPHA + i]
        m = y[i]
        s1 = y[6 + i]
        i1 = y[12 + i]
        s2 = y[18 + i]
        i2 = y[24 + i]
        s3 = y[30 + i]
        i3 = y[36 + i]
        s4 = y[42 + i]
        i4 = y[48 + i]
        rf = y[54 + i]
        if i > 0:
            ap = p[P_ALPHA + i - 1]
            m_in = ap * y[i - 1]
            s1_in = ap * y[6 + i - 1]
            i1_in = ap * y[12 + i - 1]
            s2_in = ap * y[18 + i - 1]
            i2_in = ap * y[24 + i - 1]
            s3_in = ap * y[30 + i - 1]
            i3_in = ap * y[36 + i - 1]
            s4_in = ap * y[42 + i - 1]
            i4_in = ap * y[48 + i - 1]
            rf_in = ap * y[54 + i - 1]
            if i == 1:
                # dose 1 acts like a first infection: M/S1 flow lands in S2
                m_in = (1.0 - sc) * m_in
                s1_in = (1.0 - sc) * s1_in
                s2_in = s2_in + sc * ap * (y[0] + y[6])
            elif i == 2:
                # dose 2 acts like a second infection: S2 flow lands in S3
                s2_in = (1.0 - sc) * s2_in
                s3_in = s3_in + sc * ap * y[18 + 1]
        else:
            m_in = muN
            s1_in = 0.0
            i1_in = 0.0
            s2_in = 0.0
            i2_in = 0.0
            s3_in = 0.0
            i3_in = 0.0
            s4_in = 0.0
            i4_in = 0.0
            rf_in = 0.0
        l1 = lam[i]
        l2 = sg2 * lam[i]
        l3 = sg3 * lam[i]
        l4 = sg4 * lam[i]
        dy[i] = m_in - al * m - delta * m
        dy[6 + i] = s1_in - al * s1 + delta * m - l1 * s1
        dy[12 + i] = i1_in - al * i1 + l1 * s1 - g1 * i1
        dy[18 + i] = s2_in - al * s2 + g1 * i1 - l2 * s2
        dy[24 + i] = i2_in - al * i2 + l2 * s2 - g2 * i2
        dy[30 + i] = s3_in - al * s3 + g2 * i2 - l3 * s3
        dy[36 + i] = i3_in - al * i3 + l3 * s3 - g2 * i3
        dy[42 + i] = s4_in - al * s4 + g2 * i3 - l4 * s4
        dy[48 + i] = i4_in - al * i4 + l4 * s4 - g2 * i4
        dy[54 + i] = rf_in - al * rf + g2 * i4
        dy[60 + i] = l1 * s1
        dy[66 + i] = l2 * s2
        dy[72 + i] = l3 * s3
        dy[78 + i] = l4 * s4


@njit(cache=True)
def _rhs_e(t, y, dy, p, scr):
    # M S1 I1 S2 I2 S3 I3 S4 I4 Rfinal | ord1 ord2 ord3 ord4
    w = scr[0:6]
    lam = scr[6:12]
    i2w = p[P_IOTA + 1]
    i3w = p[P_IOTA + 2]
    i4w = p[P_IOTA + 3]
    for j in range(6):
        w[j] = y[12 + j] + i2w * y[24 + j] + i3w * y[36 + j] + i4w * y[48 + j]
    _foi(t, y, p, 10, w, lam)
    muN = _birth(t, p) * _birth_ref(y, p, 10)
    delta = p[P_DELTA]
    g1 = p[P_GAMMA1]
    g2 = p[P_GAMMA2]
    sc = p[P_SC]
    sg2 = p[P_SIGMA + 1]
    sg3 = p[P_SIGMA + 2]
    sg4 = p[P_SIGMA + 3]
    k1 = p[P_KAPPA]
    k2 = p[P_KAPPA + 1]
    k3 = p[P_KAPPA + 2]
    for i in range(6):
        al = p[P_ALPHA + i]
        m = y[i]
        s1 = y[6 + i]
        i1 = y[12 + i]
        s2 = y[18 + i]
        i2 = y[24 + i]
        s3 = y[30 + i]
        i3 = y[36 + i]
        s4 = y[42 + i]
        i4 = y[48 + i]
        rf = y[54 + i]
        if i > 0:
            ap = p[P_ALPHA + i - 1]
            m_in = ap * y[i - 1]
            s1_in = ap * y[6 + i - 1]
            i1_in = ap * y[12 + i - 1]
            s2_in = ap * y[18 + i - 1]
            i2_in = ap * y[24 + i - 1]
            s3_in = ap * y[30 + i - 1]
            i3_in = ap * y[36 + i - 1]
            s4_in = ap * y[42 + i - 1]
            i4_in = ap * y[48 + i - 1]
            rf_in = ap * y[54 + i - 1]
            if i == 1:
                # dose 1 splits like recovery from a first infection
                dose = sc * ap * (y[0] + y[6])
                m_in = (1.0 - sc) * m_in
                s1_in = (1.0 - sc) * s1_in
                s2_in = s2_in + k1 * dose
                rf_in = rf_in + (1.0 - k1) * dose
            elif i == 2:
                dose = sc * ap * y[18 + 1]
                s2_in = (1.0 - sc) * s2_in
                s3_in = s3_in + k2 * dose
                rf_in = rf_in + (1.0 - k2) * dose
        else:
            m_in = muN
            s1_in = 0.0
            i1_in = 0.0
            s2_in = 0.0
            i2_in = 0.0
            s3_in = 0.0
            i3_in = 0.0
            s4_in = 0.0
            i4_in = 0.0
            rf_in = 0.0
        l1 = lam[i]
        l2 = sg2 * lam[i]
        l3 = sg3 * lam[i]
        l4 = sg4 * lam[i]
        dy[i] = m_in - al * m - delta * m
        dy[6 + i] = s1_in - al * s1 + delta * m - l1 * s1
        dy[12 + i] = i1_in - al * i1 + l1 * s1 - g1 * i1
        dy[18 + i] = s2_in - al * s2 + k1 * g1 * i1 - l2 * s2
        dy[24 + i] = i2_in - al * i2 + l2 * s2 - g2 * i2
        dy[30 + i] = s3_in - al * s3 + k2 * g2 * i2 - l3 * s3
        dy[36 + i] = i3_in - al * i3 + l3 * s3 - g2 * i3
        dy[42 + i] = s4_in - al * s4 + k3 * g2 * i3 - l4 * s4
        dy[48 + i] = i4_in - al * i4 + l4 * s4 - g2 * i4
        dy[54 + i] = (rf_in - al * rf + (1.0 - k1) * g1 * i1
                      + (1.0 - k2) * g2 * i2 + (1.0 - k3) * g2 * i3 + g2 * i4)
        dy[60 + i] = l1 * s1
        dy[66 + i] = l2 * s2
        dy[72 + i] = l3 * s3
        dy[78 + i] = l4 * s4


@njit(cache=True)
def _rhs(code, t, y, dy, p, scr):
    if code == CODE_A:
        _rhs_a(t, y, dy, p, scr)
    elif code == CODE_B:
        _rhs_b(t, y, dy, p, scr)
    elif code == CODE_C:
        _rhs_c(t, y, dy, p, scr)
    elif code == CODE_D:
        _rhs_d(t, y, dy, p, scr)
    elif code == CODE_E:
        _rhs_e(t, y, dy, p, scr)
    else:
        _rhs_a_vax(t, y, dy, p, scr)


# Dormand-Prince 5(4) coefficients
_C2 = 1.0 / 5.0
_C3 = 3.0 / 10.0
_C4 = 4.0 / 5.0
_C5 = 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31 = 3.0 / 40.0
_A32 = 9.0 / 40.0
_A41 = 44.0 / 45.0
_A42 = -56.0 / 15.0
_A43 = 32.0 / 9.0
_A51 = 19372.0 / 6561.0
_A52 = -25360.0 / 2187.0
_A53 = 64448.0 / 6561.0
_A54 = -212.0 / 729.0
_A61 = 9017.0 / 3168.0
_A62 = -355.0 / 33.0
_A63 = 46732.0 / 5247.0
_A64 = 49.0 / 176.0
_A65 = -5103.0 / 18656.0
_A71 = 35.0 / 384.0
_A73 = 500.0 / 1113.0
_A74 = 125.0 / 192.0
_A75 = -2187.0 / 6784.0
_A76 = 11.0 / 84.0
_E1 = 71.0 / 57600.0
_E3 = -71.0 / 16695.0
_E4 = 71.0 / 1920.0
_E5 = -17253.0 / 339200.0
_E6 = 22.0 / 525.0
_E7 = -1.0 / 40.0

_MIN_STEP = 1e-12
_MAX_STEPS = 50_000_000

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_STEP_LIMIT = 2
STATUS_NONFINITE = 3


@njit(cache=True)
def integrate_weeks(code, y0, t0, n_weeks, p, rtol, atol, n_state,
                    states, weekly):
    """Integrate n_weeks from t0, sampling at integer-week nodes.

    states: (n_weeks+1, n_state) output, live compartments at week starts.
    weekly: (n_weeks, dim - n_state) output, per-week new-infection totals.
    Channels are reset at each node; their derivatives never read their own
    values, so the reset leaves the state path untouched.
    Returns (status, t_reached).
    """
    dim = y0.shape[0]
    y = y0.copy()
    for q in range(n_state, dim):
        y[q] = 0.0
    scr = np.empty(12)
    k1 = np.empty(dim)
    k2 = np.empty(dim)
    k3 = np.empty(dim)
    k4 = np.empty(dim)
    k5 = np.empty(dim)
    k6 = np.empty(dim)
    k7 = np.empty(dim)
    ytmp = np.empty(dim)
    ynew = np.empty(dim)
    for q in range(n_state):
        states[0, q] = y[q]
    _rhs(code, t0, y, k1, p, scr)
    t = t0
    h = 0.05
    steps = 0
    for w in range(n_weeks):
        t_end = t0 + (w + 1.0)
        while t < t_end - 1e-12:
            steps += 1
            if steps > _MAX_STEPS:
                return STATUS_STEP_LIMIT, t
            hs = h
            clipped = False
            if hs > t_end - t:
                hs = t_end - t
                clipped = True
            if hs < _MIN_STEP:
                return STATUS_UNDERFLOW, t
            for q in range(dim):
                ytmp[q] = y[q] + hs * _A21 * k1[q]
            _rhs(code, t + _C2 * hs, ytmp, k2, p, scr)
            for q in range(dim):
                ytmp[q] = y[q] + hs * (_A31 * k1[q] + _A32 * k2[q])
            _rhs(code, t + _C3 * hs, ytmp, k3, p, scr)
            for q in range(dim):
                ytmp[q] = y[q] + hs * (_A41 * k1[q] + _A42 * k2[q] + _A43 * k3[q])
            _rhs(code, t + _C4 * hs, ytmp, k4, p, scr)
            for q in range(dim):
                ytmp[q] = y[q] + hs * (_A51 * k1[q] + _A52 * k2[q]
                                       + _A53 * k3[q] + _A54 * k4[q])
            _rhs(code, t + _C5 * hs, ytmp, k5, p, scr)
            for q in range(dim):
                ytmp[q] = y[q] + hs * (_A61 * k1[q] + _A62 * k2[q] + _A63 * k3[q]
                                       + _A64 * k4[q] + _A65 * k5[q])
            _rhs(code, t + hs, ytmp, k6, p, scr)
            for q in range(dim):
                ynew[q] = y[q] + hs * (_A71 * k1[q] + _A73 * k3[q] + _A74 * k4[q]
                                       + _A75 * k5[q] + _A76 * k6[q])
            _rhs(code, t + hs, ynew, k7, p, scr)
            errsum = 0.0
            for q in range(dim):
                e = hs * (_E1 * k1[q] + _E3 * k3[q] + _E4 * k4[q]
                          + _E5 * k5[q] + _E6 * k6[q] + _E7 * k7[q])
                ay = abs(y[q])
                an = abs(ynew[q])
                sk = atol + rtol * (ay if ay > an else an)
                ratio = e / sk
                errsum += ratio * ratio
            err = math.sqrt(errsum / dim)
            if not math.isfinite(err):
                h = hs * 0.2
                continue
            if err <= 1.0:
                t = t + hs
                tmp = y
                y = ynew
                ynew = tmp
                tmp = k1
                k1 = k7
                k7 = tmp
                if err > 0.0:
                    fac = 0.9 * err ** -0.2
                    if fac > 5.0:
                        fac = 5.0
                    elif fac < 0.2:
                        fac = 0.2
                else:
                    fac = 5.0
                if clipped:
                    # do not let boundary-shortened steps shrink the
                    # controller's preferred step
                    if fac < 1.0:
                        h = hs * fac
                else:
                    h = hs * fac
            else:
                fac = 0.9 * err ** -0.2
                if fac < 0.2:
                    fac = 0.2
                h = hs * fac
        for q in range(n_state):
            val = y[q]
            if not math.isfinite(val):
                return STATUS_NONFINITE, t
            states[w + 1, q] = val
        for q in range(n_state, dim):
            weekly[w, q - n_state] = y[q]
            y[q] = 0.0
        t = t_end
    return STATUS_OK, t


@njit(cache=True)
def nb_loglik_sum(counts, means, r):
    """Sum of negative-binomial log-pmfs, mean/dispersion form.

    Means are floored at 1e-10 so a transiently empty model week cannot
    absorb the sampler at -inf.
    """
    lgr = math.lgamma(r)
    rlogr = r * math.log(r)
    total = 0.0
    for q in range(counts.shape[0]):
        k = counts[q]
        mu = means[q]
        if mu < 1e-10:
            mu = 1e-10
        lrm = math.log(r + mu)
        total += (math.lgamma(k + r) - lgr - math.lgamma(k + 1.0)
                  + rlogr - r * lrm + k * (math.log(mu) - lrm))
    return total
